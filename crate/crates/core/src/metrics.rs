//! Figures of merit for reconstructed states.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix, SqueezeParams, Truncation, C64, PSD_TOL};
use crate::homodyne::{ladder_moments, max_variance};
use crate::states::{squeezed_thermal, ThermalParams};

/// Eigenvalue gap below which the dominant component is flagged ambiguous.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Largest tolerated imaginary residue in a Wigner evaluation.
pub const WIGNER_IMAG_TOL: f64 = 1e-10;
pub const DEFAULT_WIGNER_POINTS: usize = 201;

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

fn psd_sqrt(rho: &DensityMatrix) -> CMatrix {
    let eig = rho.eigen();
    let mut scaled = eig.vectors.clone();
    for (j, &l) in eig.values.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * eig.vectors.adjoint()
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let s = psd_sqrt(rho);
    let inner = &s * sigma.matrix() * &s;
    let inner = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    let eig = crate::fock::hermitian_eigendecomposition(&inner)?;
    let root: f64 = eig
        .values
        .iter()
        .map(|&l| {
            if l >= -PSD_TOL {
                l.max(0.0).sqrt()
            } else {
                f64::NAN
            }
        })
        .sum();
    if !root.is_finite() {
        return Err(Error::NumericFailure(
            "fidelity kernel has a negative eigenvalue".into(),
        ));
    }
    Ok((root * root).clamp(0.0, 1.0))
}

/// `tr ρ²`, clamped into `[1/dim, 1]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    let p: f64 = rho.matrix().iter().map(|z| z.norm_sqr()).sum();
    p.clamp(1.0 / rho.dim() as f64, 1.0)
}

/// `½ tr|ρ − σ|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let diff = rho.matrix() - sigma.matrix();
    let eig = crate::fock::hermitian_eigendecomposition(&diff)?;
    Ok(0.5 * eig.values.iter().map(|l| l.abs()).sum::<f64>())
}

/// Extremal quadrature variances in dB relative to the vacuum variance ½.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingLevels {
    /// `−10 log₁₀(V_min / ½)`; positive when squeezed.
    pub squeezing_db: f64,
    /// `10 log₁₀(V_max / ½)`.
    pub anti_squeezing_db: f64,
    /// Local-oscillator angle of the minimum, in `[0, π)`.
    pub angle: f64,
}

/// Closed-form extrema of `Var(θ) = m + Re(c e^{−2iθ})` from the first and
/// second ladder moments.
pub fn squeezing_levels(rho: &DensityMatrix) -> SqueezingLevels {
    let (a1, a2, _) = ladder_moments(rho);
    let c = a2 - a1 * a1;
    let v_max = max_variance(rho);
    let v_min = v_max - 2.0 * c.norm();
    let angle = if c.norm() > 0.0 {
        (0.5 * (c.arg() + PI)).rem_euclid(PI)
    } else {
        0.0
    };
    SqueezingLevels {
        squeezing_db: 10.0 * (0.5 / v_min).log10(),
        anti_squeezing_db: 10.0 * (v_max / 0.5).log10(),
        angle,
    }
}

/// Wigner function sampled on a rectangular grid; `values[(i, j)]` is
/// `W(x_axis[i], p_axis[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    /// Symmetric uniform axis covering six standard deviations of the
    /// broadest quadrature (at least six vacuum widths).
    pub fn default_axis(rho: &DensityMatrix, points: usize) -> Vec<f64> {
        let half = 6.0 * max_variance(rho).max(0.5).sqrt();
        uniform_axis(-half, half, points)
    }

    fn step(axis: &[f64]) -> f64 {
        if axis.len() < 2 {
            0.0
        } else {
            (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
        }
    }

    /// Riemann sum of `W` over the grid.
    pub fn integral(&self) -> f64 {
        self.values.sum() * Self::step(&self.x_axis) * Self::step(&self.p_axis)
    }

    /// `∫ W dp` at every `x`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let dp = Self::step(&self.p_axis);
        self.values.row_iter().map(|r| r.sum() * dp).collect()
    }

    /// `∫ W dx` at every `p`.
    pub fn p_marginal(&self) -> Vec<f64> {
        let dx = Self::step(&self.x_axis);
        self.values.column_iter().map(|c| c.sum() * dx).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }
}

pub fn uniform_axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `W(x, p) = Σ_{mn} ρ_{mn} W_{|m⟩⟨n|}(x, p)` with, for `m = n + k`,
/// `W_{|m⟩⟨n|} = (−1)ⁿ/π · sqrt(n!/m!) (√2(x − ip))^k e^{−(x²+p²)} L_n^{(k)}(2(x²+p²))`.
///
/// The Laguerre recurrence runs on the normalized functions
/// `sqrt(n!/(n+k)!) t^{k/2} e^{−t/2} L_n^{(k)}(t)`, which are bounded by one.
fn wigner_complex(rho: &DensityMatrix, x: f64, p: f64) -> C64 {
    let d = rho.dim();
    let t = 2.0 * (x * x + p * p);
    let phi = p.atan2(x);
    let mut total = C64::new(0.0, 0.0);
    let mut f = vec![0.0; d];
    for k in 0..d {
        let len = d - k;
        let kf = k as f64;
        f[0] = if t == 0.0 {
            if k == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (0.5 * kf * t.ln() - 0.5 * t - 0.5 * ln_factorial(k)).exp()
        };
        if len > 1 {
            f[1] = (1.0 + kf - t) * f[0] / (1.0 + kf).sqrt();
        }
        for n in 1..len.saturating_sub(1) {
            let nf = n as f64;
            let a = (2.0 * nf + 1.0 + kf - t) * ((nf + 1.0) / (nf + kf + 1.0)).sqrt();
            let b = (nf + kf) * ((nf + 1.0) * nf / ((nf + kf + 1.0) * (nf + kf))).sqrt();
            f[n + 1] = (a * f[n] - b * f[n - 1]) / (nf + 1.0);
        }
        let phase = C64::from_polar(1.0, -kf * phi);
        let mut lower = C64::new(0.0, 0.0);
        let mut upper = C64::new(0.0, 0.0);
        for (n, &fn_) in f.iter().enumerate().take(len) {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let w = phase * (sign * fn_);
            lower += rho.get(n + k, n) * w;
            if k > 0 {
                upper += rho.get(n, n + k) * w.conj();
            }
        }
        total += lower + upper;
    }
    total / PI
}

/// Single-point Wigner value.
pub fn wigner_at(rho: &DensityMatrix, x: f64, p: f64) -> Result<f64> {
    let w = wigner_complex(rho, x, p);
    if w.im.abs() > WIGNER_IMAG_TOL {
        return Err(Error::NumericFailure(format!(
            "Wigner value at ({x}, {p}) has imaginary residue {:e}",
            w.im
        )));
    }
    Ok(w.re)
}

/// Wigner function on `x_axis × p_axis`. The grid must reach five standard
/// deviations of the broadest quadrature on both axes.
pub fn wigner(rho: &DensityMatrix, x_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    if x_axis.is_empty() || p_axis.is_empty() {
        return Err(Error::InvalidParameter(
            "Wigner axes must be non-empty".into(),
        ));
    }
    if x_axis.iter().chain(p_axis).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("Wigner axes must be finite".into()));
    }
    let reach = 5.0 * max_variance(rho).sqrt();
    let covers = |axis: &[f64]| {
        let lo = axis.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = axis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo <= -reach && hi >= reach
    };
    if !covers(x_axis) || !covers(p_axis) {
        return Err(Error::ContractViolation(format!(
            "Wigner grid must span ±{reach:.3} on both axes"
        )));
    }
    let rows: Vec<Vec<f64>> = x_axis
        .par_iter()
        .map(|&x| {
            p_axis
                .iter()
                .map(|&p| wigner_at(rho, x, p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(x_axis.len(), p_axis.len(), |i, j| rows[i][j]);
    Ok(WignerGrid {
        x_axis: x_axis.to_vec(),
        p_axis: p_axis.to_vec(),
        values,
    })
}

/// Wigner function on the default symmetric grid.
pub fn wigner_default(rho: &DensityMatrix) -> Result<WignerGrid> {
    let axis = WignerGrid::default_axis(rho, DEFAULT_WIGNER_POINTS);
    wigner(rho, &axis, &axis)
}

/// Squeezed thermal state closest (in fidelity) to a given state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedThermalMatch {
    pub r: f64,
    pub phi: f64,
    pub nbar: f64,
    pub fidelity: f64,
}

/// `ρ = σ₁ |v₁⟩⟨v₁| + σ_non ρ_residual` from the spectral decomposition.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub sigma1: f64,
    pub sigma_non: f64,
    pub dominant: DensityMatrix,
    pub dominant_vector: DVector<C64>,
    /// `None` when the state is pure to numerical precision.
    pub residual: Option<DensityMatrix>,
    /// Set when the top eigenvalue is degenerate within [`DEGENERACY_GAP`].
    pub ambiguous: bool,
}

impl Decomposition {
    /// `σ₁ ρ_dominant + σ_non ρ_residual`.
    pub fn recombine(&self) -> CMatrix {
        let mut m = self.dominant.matrix() * C64::new(self.sigma1, 0.0);
        if let Some(res) = &self.residual {
            m += res.matrix() * C64::new(self.sigma_non, 0.0);
        }
        m
    }

    /// Best squeezed-thermal description of the residual part.
    pub fn residual_match(&self) -> Result<Option<SqueezedThermalMatch>> {
        self.residual.as_ref().map(fit_squeezed_thermal).transpose()
    }
}

/// Rotates `v` so its first non-negligible entry is real and positive.
fn fix_phase(v: &mut DVector<C64>) {
    if let Some(z) = v.iter().copied().find(|z| z.norm() > 1e-12) {
        let u = z.conj() / z.norm();
        v.iter_mut().for_each(|e| *e *= u);
    }
}

pub fn decompose(rho: &DensityMatrix) -> Decomposition {
    let eig = rho.eigen();
    let d = rho.dim();
    let sigma1 = eig.values[0].clamp(0.0, 1.0);
    let ambiguous = d > 1 && eig.values[0] - eig.values[1] < DEGENERACY_GAP;

    let mut candidates: Vec<DVector<C64>> = (0..d)
        .filter(|&j| eig.values[0] - eig.values[j] < DEGENERACY_GAP)
        .map(|j| {
            let mut v = eig.vectors.column(j).into_owned();
            fix_phase(&mut v);
            v
        })
        .collect();
    // lexicographic order on rounded moduli, then rounded phases
    let key = |v: &DVector<C64>| -> Vec<(i64, i64)> {
        v.iter()
            .map(|z| {
                (
                    (z.norm() * 1e9).round() as i64,
                    (z.arg() * 1e9).round() as i64,
                )
            })
            .collect()
    };
    candidates.sort_by_key(|v| std::cmp::Reverse(key(v)));
    let v = candidates.swap_remove(0);

    let dominant = DensityMatrix::from_positive_unchecked(&v * v.adjoint());
    let sigma_non = 1.0 - sigma1;
    let residual = if sigma_non > 1e-12 {
        let m =
            (rho.matrix() - dominant.matrix() * C64::new(sigma1, 0.0)) / C64::new(sigma_non, 0.0);
        Some(DensityMatrix::from_positive_unchecked(m))
    } else {
        None
    };
    Decomposition {
        sigma1,
        sigma_non,
        dominant,
        dominant_vector: v,
        residual,
        ambiguous,
    }
}

/// Searches `(r, φ, n̄)` for the squeezed thermal state of highest fidelity
/// with `rho`, starting from the moment estimate and refined by a shrinking
/// coordinate search.
pub fn fit_squeezed_thermal(rho: &DensityMatrix) -> Result<SqueezedThermalMatch> {
    let levels = squeezing_levels(rho);
    let v_min = 0.5 * 10f64.powf(-levels.squeezing_db / 10.0);
    let v_max = 0.5 * 10f64.powf(levels.anti_squeezing_db / 10.0);
    let v_min = v_min.max(1e-9);
    let mut x = [
        (0.25 * (v_max / v_min).ln()).max(0.0),
        2.0 * levels.angle,
        ((v_min * v_max).max(0.25).sqrt() - 0.5).max(0.0),
    ];
    let dim = rho.dim();
    let score = |x: &[f64; 3]| -> f64 {
        if x[0] < 0.0 || x[2] < 0.0 {
            return -1.0;
        }
        let (Ok(sq), Ok(th)) = (SqueezeParams::new(x[0], x[1]), ThermalParams::new(x[2])) else {
            return -1.0;
        };
        match squeezed_thermal(&sq, &th, Truncation::new(dim).with_max_tail(1.0)) {
            Ok(cand) => fidelity(rho, &cand).unwrap_or(-1.0),
            Err(_) => -1.0,
        }
    };
    // moment estimates of spread-out states can exceed what the working
    // space represents; shrink towards vacuum until the start is valid
    let mut best = score(&x);
    for _ in 0..40 {
        if best >= 0.0 {
            break;
        }
        x[0] *= 0.5;
        x[2] *= 0.5;
        best = score(&x);
    }
    if best < 0.0 {
        x = [0.0, x[1], 0.0];
        best = score(&x);
    }
    let mut step = [0.1, 0.2, 0.05];
    for _ in 0..60 {
        let mut improved = false;
        for i in 0..3 {
            for dir in [1.0, -1.0] {
                let mut y = x;
                y[i] += dir * step[i];
                let s = score(&y);
                if s > best {
                    best = s;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if step[0] < 1e-4 {
                break;
            }
        }
    }
    if best < 0.0 {
        return Err(Error::NumericFailure(
            "squeezed thermal search found no valid candidate".into(),
        ));
    }
    Ok(SqueezedThermalMatch {
        r: x[0],
        phi: x[1].rem_euclid(2.0 * PI),
        nbar: x[2],
        fidelity: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{apply_phase_noise, PhaseNoiseParam};
    use crate::homodyne::quadrature_pdf;
    use crate::states::{rotate, squeezed_vacuum, thermal, vacuum};
    use approx::assert_relative_eq;

    fn th(nbar: f64, dim: usize) -> DensityMatrix {
        thermal(
            &ThermalParams::new(nbar).unwrap(),
            Truncation::new(dim).with_max_tail(1e-12),
        )
        .unwrap()
    }

    fn random_unitary(dim: usize, seed: u64) -> crate::fock::Operator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = CMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let h = (&h + h.adjoint()) * C64::new(0.0, 0.5);
        crate::fock::matrix_exponential(&crate::fock::Operator::new(h).unwrap()).unwrap()
    }

    fn random_state(dim: usize, seed: u64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        DensityMatrix::from_positive(&a * a.adjoint()).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let r = squeezed_vacuum(&SqueezeParams::new(0.4, 0.2).unwrap(), 20).unwrap();
        assert_relative_eq!(fidelity(&r, &r).unwrap(), 1.0, epsilon = 1e-9);
        let v = vacuum(6).unwrap();
        let one = DensityMatrix::fock(1, 6).unwrap();
        assert!(fidelity(&v, &one).unwrap() < 1e-12);
        assert_relative_eq!(
            fidelity(&vacuum(80).unwrap(), &th(1.0, 80)).unwrap(),
            0.5,
            epsilon = 1e-8
        );
        assert!(fidelity(&v, &vacuum(7).unwrap()).is_err());
    }

    #[test]
    fn fidelity_matches_pure_state_overlap() {
        // oracle: F(|ψ⟩⟨ψ|, σ) = ⟨ψ|σ|ψ⟩
        let psi = squeezed_vacuum(&SqueezeParams::new(0.5, 0.0).unwrap(), 30).unwrap();
        let sigma = random_state(30, 3);
        let v = psi.eigen().vectors.column(0).into_owned();
        let overlap = (v.adjoint() * sigma.matrix() * &v)[(0, 0)].re;
        assert_relative_eq!(fidelity(&psi, &sigma).unwrap(), overlap, epsilon = 1e-9);
    }

    #[test]
    fn purity_examples() {
        let r = squeezed_vacuum(&SqueezeParams::new(0.4, 0.2).unwrap(), 20).unwrap();
        assert_relative_eq!(purity(&r), 1.0, epsilon = 1e-12);
        assert_relative_eq!(purity(&th(1.0, 80)), 1.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(
            purity(&DensityMatrix::maximally_mixed(4).unwrap()),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn squeezing_level_examples() {
        let v = squeezing_levels(&vacuum(5).unwrap());
        assert!(v.squeezing_db.abs() < 1e-12 && v.anti_squeezing_db.abs() < 1e-12);
        let s =
            squeezing_levels(&squeezed_vacuum(&SqueezeParams::new(1.0, 0.0).unwrap(), 60).unwrap());
        assert_relative_eq!(s.squeezing_db, 8.6859, epsilon = 1e-3);
        assert_relative_eq!(s.anti_squeezing_db, 8.6859, epsilon = 1e-3);
        let rot =
            squeezing_levels(&squeezed_vacuum(&SqueezeParams::new(0.5, 1.2).unwrap(), 40).unwrap());
        assert_relative_eq!(rot.angle, 0.6, epsilon = 1e-9);
    }

    #[test]
    fn wigner_examples() {
        assert_relative_eq!(
            wigner_at(&vacuum(2).unwrap(), 0.0, 0.0).unwrap(),
            1.0 / PI,
            epsilon = 1e-14
        );
        let one = DensityMatrix::fock(1, 4).unwrap();
        assert_relative_eq!(
            wigner_at(&one, 0.0, 0.0).unwrap(),
            -1.0 / PI,
            epsilon = 1e-14
        );
        // |1⟩: W = (2(x²+p²) − 1) e^{−(x²+p²)} / π
        let (x, p) = (0.7, -0.4);
        let q: f64 = x * x + p * p;
        assert_relative_eq!(
            wigner_at(&one, x, p).unwrap(),
            (2.0 * q - 1.0) * (-q).exp() / PI,
            epsilon = 1e-14
        );
    }

    #[test]
    fn wigner_normalizes_and_marginals_match_pdf() {
        let rho = rotate(
            &apply_phase_noise(
                &squeezed_vacuum(&SqueezeParams::new(0.4, 0.0).unwrap(), 30).unwrap(),
                PhaseNoiseParam::new(0.2).unwrap(),
            ),
            0.45,
        );
        let grid = wigner_default(&rho).unwrap();
        assert_relative_eq!(grid.integral(), 1.0, epsilon = 1e-3);
        let xm = grid.x_marginal();
        for (i, &x) in grid.x_axis.iter().enumerate() {
            assert!((xm[i] - quadrature_pdf(&rho, 0.0, x)).abs() < 1e-4);
        }
        let pm = grid.p_marginal();
        for (j, &p) in grid.p_axis.iter().enumerate() {
            assert!((pm[j] - quadrature_pdf(&rho, PI / 2.0, p)).abs() < 1e-4);
        }
    }

    #[test]
    fn wigner_rejects_narrow_grid() {
        let rho = squeezed_vacuum(&SqueezeParams::new(0.8, 0.0).unwrap(), 40).unwrap();
        let axis = uniform_axis(-2.0, 2.0, 11);
        assert!(matches!(
            wigner(&rho, &axis, &axis),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn decomposition_examples() {
        let pure = squeezed_vacuum(&SqueezeParams::new(0.3, 0.0).unwrap(), 20).unwrap();
        let d = decompose(&pure);
        assert_relative_eq!(d.sigma1, 1.0, epsilon = 1e-10);
        assert!(d.sigma_non < 1e-10);
        let t = decompose(&th(1.0, 80));
        assert_relative_eq!(t.sigma1, 0.5, epsilon = 1e-12);
        assert!(!t.ambiguous);
        let mixed = decompose(&DensityMatrix::maximally_mixed(3).unwrap());
        assert!(mixed.ambiguous);
        assert_eq!(
            mixed.dominant,
            decompose(&DensityMatrix::maximally_mixed(3).unwrap()).dominant
        );
    }

    #[test]
    fn residual_of_squeezed_thermal_mixture_is_matched() {
        let sq = SqueezeParams::new(0.5, 0.0).unwrap();
        let st =
            squeezed_thermal(&sq, &ThermalParams::new(0.2).unwrap(), Truncation::new(30)).unwrap();
        let m = fit_squeezed_thermal(&st).unwrap();
        assert!(m.fidelity > 0.9999, "{m:?}");
        assert_relative_eq!(m.r, 0.5, epsilon = 1e-2);
        assert_relative_eq!(m.nbar, 0.2, epsilon = 1e-2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn fidelity_is_symmetric_and_unitarily_invariant(seed in 0u64..10_000) {
                let a = random_state(8, seed);
                let b = random_state(8, seed + 77_777);
                let f = fidelity(&a, &b).unwrap();
                prop_assert!((f - fidelity(&b, &a).unwrap()).abs() < 1e-9);
                let u = random_unitary(8, seed + 5);
                let fu = fidelity(&a.conjugate_by(&u).unwrap(), &b.conjugate_by(&u).unwrap()).unwrap();
                prop_assert!((f - fu).abs() < 1e-8);
                prop_assert!((purity(&a) - purity(&a.conjugate_by(&u).unwrap())).abs() < 1e-10);
                // Fuchs-van de Graaf: 1 − √F ≤ D
                prop_assert!(1.0 - f.sqrt() <= trace_distance(&a, &b).unwrap() + 1e-9);
            }

            #[test]
            fn decomposition_recombines(seed in 0u64..10_000) {
                let a = random_state(10, seed);
                let d = decompose(&a);
                prop_assert!((d.sigma1 + d.sigma_non - 1.0).abs() < 1e-9);
                prop_assert!((d.recombine() - a.matrix()).norm() < 1e-9);
                if let Some(res) = &d.residual {
                    let top = res.eigen().values[0] * d.sigma_non;
                    prop_assert!(d.sigma1 >= top - 1e-12);
                }
            }
        }
    }

    #[test]
    fn squeezed_thermal_match_survives_spread_out_states() {
        // mass on the top levels implies moments far beyond the working space
        let d = 20;
        let mut m = CMatrix::zeros(d, d);
        m[(d - 1, d - 1)] = C64::new(0.5, 0.0);
        m[(d - 2, d - 2)] = C64::new(0.3, 0.0);
        m[(d - 1, d - 3)] = C64::new(0.1, 0.0);
        m[(d - 3, d - 1)] = C64::new(0.1, 0.0);
        m[(d - 3, d - 3)] = C64::new(0.2, 0.0);
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let best = fit_squeezed_thermal(&rho).unwrap();
        assert!((0.0..=1.0).contains(&best.fidelity));
    }
}
