//! Balanced-homodyne measurement: exact quadrature statistics of a density
//! matrix and seeded sampling of quadrature records.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, C64};

/// Record length used by the experiment and the default network input.
pub const STANDARD_RECORD_LEN: usize = 2048;
/// Nodes per phase in the inverse-CDF sampling grid.
pub const SAMPLING_GRID_NODES: usize = 4096;

const VACUUM_SIGMA: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Hermite functions `ψ_0(x) .. ψ_{n-1}(x)` by the normalized upward
/// recurrence (no raw Hermite polynomials, so nothing overflows).
pub fn hermite_functions(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    fill_hermite(x, (-x * x / 2.0).exp() * PI.powf(-0.25), &mut out);
    out
}

/// Same recurrence without the `exp(-x²/2)` factor, for Gauss-Hermite sums.
pub(crate) fn hermite_functions_unweighted(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    fill_hermite(x, PI.powf(-0.25), &mut out);
    out
}

fn fill_hermite(x: f64, psi0: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = psi0;
    if n > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * psi0;
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// `⟨x_θ|ρ|x_θ⟩` with `⟨x_θ|n⟩ = ψ_n(x) e^{-inθ}`.
pub fn quadrature_pdf(rho: &DensityMatrix, theta: f64, x: f64) -> f64 {
    let psi = hermite_functions(x, rho.dim());
    pdf_from_functions(rho, theta, &psi)
}

fn pdf_from_functions(rho: &DensityMatrix, theta: f64, psi: &[f64]) -> f64 {
    let d = rho.dim();
    let mut total = 0.0;
    for k in 0..d {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..d - k {
            acc += rho.get(n + k, n) * (psi[n + k] * psi[n]);
        }
        if k == 0 {
            total += acc.re;
        } else {
            total += 2.0 * (C64::from_polar(1.0, -(k as f64) * theta) * acc).re;
        }
    }
    total
}

/// Ladder moments `(⟨a⟩, ⟨a²⟩, ⟨a†a⟩)`, exact for a state supported on the
/// truncated space.
pub fn ladder_moments(rho: &DensityMatrix) -> (C64, C64, f64) {
    let d = rho.dim();
    let mut a1 = C64::new(0.0, 0.0);
    let mut a2 = C64::new(0.0, 0.0);
    let mut n = 0.0;
    for k in 0..d {
        n += k as f64 * rho.get(k, k).re;
        if k + 1 < d {
            a1 += rho.get(k + 1, k) * ((k + 1) as f64).sqrt();
        }
        if k + 2 < d {
            a2 += rho.get(k + 2, k) * (((k + 1) * (k + 2)) as f64).sqrt();
        }
    }
    (a1, a2, n)
}

/// `(⟨x_θ⟩, Var x_θ)` for `x_θ = (a e^{-iθ} + a† e^{iθ})/√2`.
pub fn quadrature_moments(rho: &DensityMatrix, theta: f64) -> (f64, f64) {
    let (a1, a2, n) = ladder_moments(rho);
    let e = C64::from_polar(1.0, -theta);
    let mean = std::f64::consts::SQRT_2 * (a1 * e).re;
    let second = n + 0.5 + (a2 * e * e).re;
    (mean, second - mean * mean)
}

pub fn quadrature_variance(rho: &DensityMatrix, theta: f64) -> f64 {
    quadrature_moments(rho, theta).1
}

/// Gauss-Hermite nodes and weights for `∫ e^{-x²} f(x) dx`.
///
/// Nodes are the eigenvalues of the Jacobi matrix (Golub-Welsch); weights
/// use the Christoffel form `1 / Σ_k φ_k(x_i)²` over the orthonormal
/// polynomials, which keeps full relative accuracy for the tiny outer
/// weights.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let (mut nodes, _) = crate::fock::symmetric_eigendecomposition(&jacobi);
    nodes.reverse();
    let weights = nodes
        .iter()
        .map(|&x| {
            1.0 / hermite_functions_unweighted(x, n)
                .iter()
                .map(|p| p * p)
                .sum::<f64>()
        })
        .collect();
    (nodes, weights)
}

/// `∫ p(x|θ) dx` by Gauss-Hermite quadrature; exact for `nodes ≥ dim`.
pub fn pdf_normalization(rho: &DensityMatrix, theta: f64, nodes: usize) -> f64 {
    let (xs, ws) = gauss_hermite(nodes);
    xs.iter()
        .zip(&ws)
        .map(|(&x, &w)| {
            w * pdf_from_functions(rho, theta, &hermite_functions_unweighted(x, rho.dim()))
        })
        .sum()
}

/// Second moment `∫ x² p(x|θ) dx` by Gauss-Hermite quadrature.
pub fn pdf_second_moment(rho: &DensityMatrix, theta: f64, nodes: usize) -> f64 {
    let (xs, ws) = gauss_hermite(nodes);
    xs.iter()
        .zip(&ws)
        .map(|(&x, &w)| {
            w * x * x * pdf_from_functions(rho, theta, &hermite_functions_unweighted(x, rho.dim()))
        })
        .sum()
}

/// One homodyne shot: local-oscillator phase and measured quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePoint {
    pub phase: f64,
    pub value: f64,
}

/// Ordered homodyne record.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRecord {
    points: Vec<QuadraturePoint>,
}

impl QuadratureRecord {
    pub fn new(points: Vec<QuadraturePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData("quadrature record is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.value.is_finite() && p.phase.is_finite()) {
                return Err(Error::ContractViolation(format!("point {i} is not finite")));
            }
            if !(0.0..TAU).contains(&p.phase) {
                return Err(Error::ContractViolation(format!(
                    "point {i} phase {} outside [0, 2π)",
                    p.phase
                )));
            }
        }
        Ok(Self { points })
    }

    /// Builds a record after wrapping phases into `[0, 2π)`.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(phase, value)| QuadraturePoint {
                    phase: wrap_phase(phase),
                    value,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[QuadraturePoint] {
        &self.points
    }

    /// Keeps the first `n` points.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        Self::new(self.points[..n.min(self.len())].to_vec())
    }

    /// Nearest-index resampling to exactly `len` points (decimates or
    /// repeats, preserving order).
    pub fn resampled(&self, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InsufficientData(
                "cannot resample to zero points".into(),
            ));
        }
        let n = self.len();
        Self::new((0..len).map(|i| self.points[i * n / len]).collect())
    }
}

pub(crate) fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// How the local-oscillator phase is swept during a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseSchedule {
    /// `start + span·i/n`, the swept local oscillator.
    LinearScan { start: f64, span: f64 },
    /// Cycles through the listed phases.
    FixedSet { phases: Vec<f64> },
    /// Independent uniform draws from `[start, start + span)`.
    RandomUniform { start: f64, span: f64 },
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        PhaseSchedule::LinearScan {
            start: 0.0,
            span: PI,
        }
    }
}

impl PhaseSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PhaseSchedule::LinearScan { start, span }
            | PhaseSchedule::RandomUniform { start, span } => {
                start.is_finite() && span.is_finite() && *span >= PI - 1e-12
            }
            PhaseSchedule::FixedSet { phases } => {
                if phases.is_empty() || phases.iter().any(|p| !p.is_finite()) {
                    false
                } else {
                    // informational completeness needs distinct angles modulo π
                    let mut folded: Vec<f64> = phases.iter().map(|p| p.rem_euclid(PI)).collect();
                    folded.sort_by(f64::total_cmp);
                    folded.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
                    folded.len() >= 2
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "phase schedule {self:?} does not cover [0, π)"
            )))
        }
    }

    pub fn phases(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            PhaseSchedule::LinearScan { start, span } => (0..n)
                .map(|i| wrap_phase(start + span * i as f64 / n as f64))
                .collect(),
            PhaseSchedule::FixedSet { phases } => (0..n)
                .map(|i| wrap_phase(phases[i % phases.len()]))
                .collect(),
            PhaseSchedule::RandomUniform { start, span } => (0..n)
                .map(|_| wrap_phase(start + span * rng.gen::<f64>()))
                .collect(),
        }
    }
}

/// Cached inverse-CDF sampler for one density matrix.
///
/// The pdf at phase θ is `Re Σ_k c_k e^{-ikθ} A_k(x)` over off-diagonals
/// `k`; the cumulative integrals of each `A_k` are tabulated once on the
/// grid, so the CDF at any phase and node costs `O(dim)`.
pub struct QuadratureSampler {
    dim: usize,
    grid: Vec<f64>,
    /// `cumulative[k * nodes + j]`: trapezoid integral of `A_k` up to node `j`.
    cumulative: Vec<C64>,
}

impl QuadratureSampler {
    pub fn new(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let vmax = quadrature_moments(rho, 0.0)
            .1
            .max(quadrature_moments(rho, PI / 2.0).1)
            .max(max_variance(rho));
        let mean_bound = {
            let (a1, _, _) = ladder_moments(rho);
            std::f64::consts::SQRT_2 * a1.norm()
        };
        let e_rmax = (vmax / 0.5).sqrt();
        let half_width = ((6.0 + 3.0 * e_rmax) * VACUUM_SIGMA + mean_bound)
            .max((2.0 * d as f64 + 1.0).sqrt() + 6.0);
        let nodes = SAMPLING_GRID_NODES;
        let h = 2.0 * half_width / (nodes - 1) as f64;
        let grid: Vec<f64> = (0..nodes).map(|j| -half_width + h * j as f64).collect();

        let mut cumulative = vec![C64::new(0.0, 0.0); d * nodes];
        let mut prev = vec![C64::new(0.0, 0.0); d];
        let mut running = vec![C64::new(0.0, 0.0); d];
        for (j, &x) in grid.iter().enumerate() {
            let psi = hermite_functions(x, d);
            for k in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..d - k {
                    acc += rho.get(n + k, n) * (psi[n + k] * psi[n]);
                }
                if j > 0 {
                    running[k] += (prev[k] + acc) * (h / 2.0);
                }
                prev[k] = acc;
                cumulative[k * nodes + j] = running[k];
            }
        }
        Self {
            dim: d,
            grid,
            cumulative,
        }
    }

    fn cdf_at(&self, j: usize, phases: &[C64]) -> f64 {
        let nodes = self.grid.len();
        let mut total = self.cumulative[j].re;
        for k in 1..self.dim {
            total += 2.0 * (phases[k] * self.cumulative[k * nodes + j]).re;
        }
        total
    }

    fn phase_factors(&self, theta: f64) -> Vec<C64> {
        (0..self.dim)
            .map(|k| C64::from_polar(1.0, -(k as f64) * theta))
            .collect()
    }

    /// Tabulated CDF at phase θ, normalized to end at 1.
    pub fn cdf(&self, theta: f64, x: f64) -> f64 {
        let phases = self.phase_factors(theta);
        let last = self.grid.len() - 1;
        let total = self.cdf_at(last, &phases);
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[last] {
            return 1.0;
        }
        let h = self.grid[1] - self.grid[0];
        let pos = (x - self.grid[0]) / h;
        let j = (pos.floor() as usize).min(last - 1);
        let t = pos - j as f64;
        let lo = self.cdf_at(j, &phases);
        let hi = self.cdf_at(j + 1, &phases);
        (lo + t * (hi - lo)) / total
    }

    /// Inverse-CDF draw at phase θ for a uniform `u ∈ [0, 1)`.
    pub fn quantile(&self, theta: f64, u: f64) -> f64 {
        let phases = self.phase_factors(theta);
        let last = self.grid.len() - 1;
        let target = u * self.cdf_at(last, &phases);
        let (mut lo, mut hi) = (0usize, last);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cdf_at(mid, &phases) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c_lo = self.cdf_at(lo, &phases);
        let c_hi = self.cdf_at(hi, &phases);
        let t = if c_hi > c_lo {
            ((target - c_lo) / (c_hi - c_lo)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        self.grid[lo] + t * (self.grid[hi] - self.grid[lo])
    }

    pub fn sample(
        &self,
        schedule: &PhaseSchedule,
        n: usize,
        seed: u64,
    ) -> Result<QuadratureRecord> {
        if n == 0 {
            return Err(Error::InsufficientData(
                "sample count must be at least 1".into(),
            ));
        }
        schedule.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = schedule.phases(n, &mut rng);
        let points = phases
            .into_iter()
            .map(|phase| QuadraturePoint {
                phase,
                value: self.quantile(phase, rng.gen::<f64>()),
            })
            .collect();
        QuadratureRecord::new(points)
    }
}

/// Largest quadrature variance over all angles (mean included).
pub fn max_variance(rho: &DensityMatrix) -> f64 {
    let (a1, a2, n) = ladder_moments(rho);
    let c = a2 - a1 * a1;
    n + 0.5 - a1.norm_sqr() + c.norm()
}

/// Draws `n` shots from `rho` with phases from `schedule`; deterministic in
/// `seed`.
pub fn sample(
    rho: &DensityMatrix,
    schedule: &PhaseSchedule,
    n: usize,
    seed: u64,
) -> Result<QuadratureRecord> {
    QuadratureSampler::new(rho).sample(schedule, n, seed)
}
