//! Iterative maximum-likelihood reconstruction (diluted RρR).
//!
//! Shots are histogrammed on a grid of phase bins over `[0, π)` times
//! equal-width quadrature bins; shots with phase in `[π, 2π)` are folded
//! using `x_{θ+π} = −x_θ`. Each bin carries the bin-integrated projector
//!
//! ```text
//! Π_j = (1/Δθ) ∫∫_bin |x, θ⟩⟨x, θ| dx dθ,   ⟨n|x, θ⟩ = ψ_n(x) e^{inθ},
//! ```
//!
//! evaluated with three midpoint subnodes per axis. Because the integrand
//! factorizes, `Π_j` is the elementwise product of an x-bin matrix and a
//! phase-bin matrix.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{check_dim, CMatrix, DensityMatrix, C64};
use crate::homodyne::{hermite_functions, QuadratureRecord};

const SUBNODES: usize = 3;
/// Population of the top Fock level allowed outside the quadrature range.
const COVERAGE_TOL: f64 = 1e-12;
/// Chunk size of the fixed-order parallel reductions.
const REDUCE_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub dim: usize,
    /// Quadrature bins per phase bin.
    pub bin_count: usize,
    pub phase_bins: usize,
    pub max_iters: usize,
    /// Initial (and restored) dilution `ε ∈ (0, 1]`.
    pub dilution: f64,
    /// Stop when `|Δ log L|` stays below this for `stall_iters` iterations.
    pub tolerance: f64,
    pub stall_iters: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            bin_count: 100,
            phase_bins: 20,
            max_iters: 2000,
            dilution: 0.5,
            tolerance: 1e-9,
            stall_iters: 3,
        }
    }
}

impl MleConfig {
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if !(self.dilution > 0.0 && self.dilution <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dilution {} outside (0, 1]",
                self.dilution
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if self.bin_count == 0 || self.phase_bins == 0 {
            return Err(Error::InvalidParameter(
                "bin counts must be positive".into(),
            ));
        }
        if !(self.tolerance >= 0.0) || self.stall_iters == 0 {
            return Err(Error::InvalidParameter(
                "tolerance must be >= 0 and stall_iters >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Quadrature range `[-half_width, half_width]` split into bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub half_width: f64,
    pub bin_count: usize,
    pub phase_bins: usize,
}

impl BinGrid {
    /// Range wide enough that `ψ_{dim−1}` has less than `1e-12` of its
    /// weight outside, and that contains every shot.
    pub fn for_record(record: &QuadratureRecord, cfg: &MleConfig) -> Self {
        let extent = record
            .points()
            .iter()
            .map(|p| p.value.abs())
            .fold(0.0, f64::max);
        Self {
            half_width: coverage_half_width(cfg.dim).max(extent * (1.0 + 1e-9)),
            bin_count: cfg.bin_count,
            phase_bins: cfg.phase_bins,
        }
    }

    pub fn for_dim(cfg: &MleConfig) -> Self {
        Self {
            half_width: coverage_half_width(cfg.dim),
            bin_count: cfg.bin_count,
            phase_bins: cfg.phase_bins,
        }
    }

    pub fn len(&self) -> usize {
        self.bin_count * self.phase_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn x_width(&self) -> f64 {
        2.0 * self.half_width / self.bin_count as f64
    }

    fn phase_width(&self) -> f64 {
        PI / self.phase_bins as f64
    }

    /// Flat index `phase_bin * bin_count + x_bin`, or `None` outside range.
    pub fn index(&self, phase: f64, x: f64) -> Option<usize> {
        let (mut phase, mut x) = (phase.rem_euclid(2.0 * PI), x);
        if phase >= PI {
            phase -= PI;
            x = -x;
        }
        let pb = ((phase / self.phase_width()) as usize).min(self.phase_bins - 1);
        let xf = (x + self.half_width) / self.x_width();
        if !(0.0..=self.bin_count as f64).contains(&xf) {
            return None;
        }
        let xb = (xf as usize).min(self.bin_count - 1);
        Some(pb * self.bin_count + xb)
    }
}

fn coverage_half_width(dim: usize) -> f64 {
    // tail of ψ_{dim−1}² beyond X by trapezoid integration
    let n = dim - 1;
    let tail = |x0: f64| -> f64 {
        let steps = 4000;
        let h = 12.0 / steps as f64;
        (0..=steps)
            .map(|i| {
                let x = x0 + i as f64 * h;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                w * hermite_functions(x, dim)[n].powi(2)
            })
            .sum::<f64>()
            * h
    };
    let mut x = (2.0 * n as f64 + 1.0).sqrt();
    while 2.0 * tail(x) > COVERAGE_TOL {
        x += 0.25;
    }
    x
}

/// Binned projectors with their observed (or prescribed) frequencies.
pub struct MleProblem {
    dim: usize,
    grid: BinGrid,
    bins: Vec<usize>,
    frequencies: Vec<f64>,
    projectors: Vec<CMatrix>,
}

impl MleProblem {
    /// Histograms `record` (empty bins are skipped).
    pub fn from_record(record: &QuadratureRecord, cfg: &MleConfig) -> Result<Self> {
        cfg.validate()?;
        if record.is_empty() {
            return Err(Error::InsufficientData("empty quadrature record".into()));
        }
        if record.len() < cfg.dim * cfg.dim {
            log::warn!(
                "record of {} shots is shorter than dim² = {}",
                record.len(),
                cfg.dim * cfg.dim
            );
        }
        let grid = BinGrid::for_record(record, cfg);
        let mut counts = vec![0usize; grid.len()];
        for p in record.points() {
            let j = grid.index(p.phase, p.value).ok_or_else(|| {
                Error::NumericFailure(format!("shot {p:?} outside the bin range"))
            })?;
            counts[j] += 1;
        }
        let total = record.len() as f64;
        let (bins, frequencies): (Vec<usize>, Vec<f64>) = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &c)| (j, c as f64 / total))
            .unzip();
        Self::build(cfg.dim, grid, bins, frequencies)
    }

    /// Every bin of `grid`, with frequencies equal to the exact bin
    /// probabilities of `rho` (phase bins equally weighted).
    pub fn from_state(rho: &DensityMatrix, grid: BinGrid) -> Result<Self> {
        let bins: Vec<usize> = (0..grid.len()).collect();
        let mut problem = Self::build(rho.dim(), grid, bins, vec![0.0; grid.len()])?;
        let probs = problem.probabilities(rho);
        problem.frequencies = probs.iter().map(|p| p / grid.phase_bins as f64).collect();
        Ok(problem)
    }

    fn build(dim: usize, grid: BinGrid, bins: Vec<usize>, frequencies: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        let dx = grid.x_width();
        let dphi = grid.phase_width();
        let x_mats: Vec<nalgebra::DMatrix<f64>> = (0..grid.bin_count)
            .map(|b| {
                let mut m = nalgebra::DMatrix::<f64>::zeros(dim, dim);
                for s in 0..SUBNODES {
                    let x = -grid.half_width + dx * (b as f64 + (s as f64 + 0.5) / SUBNODES as f64);
                    let psi = nalgebra::DVector::from_vec(hermite_functions(x, dim));
                    m += &psi * psi.transpose() * (dx / SUBNODES as f64);
                }
                m
            })
            .collect();
        let phase_mats: Vec<CMatrix> = (0..grid.phase_bins)
            .map(|pb| {
                CMatrix::from_fn(dim, dim, |m, n| {
                    let k = m as f64 - n as f64;
                    (0..SUBNODES)
                        .map(|s| {
                            let theta = dphi * (pb as f64 + (s as f64 + 0.5) / SUBNODES as f64);
                            C64::from_polar(1.0 / SUBNODES as f64, k * theta)
                        })
                        .sum()
                })
            })
            .collect();
        let projectors = bins
            .par_iter()
            .map(|&j| {
                let (pb, xb) = (j / grid.bin_count, j % grid.bin_count);
                phase_mats[pb].zip_map(&x_mats[xb], |z, x| z * x)
            })
            .collect();
        Ok(Self {
            dim,
            grid,
            bins,
            frequencies,
            projectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn bin_indices(&self) -> &[usize] {
        &self.bins
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `tr(Π_j ρ)` for every stored bin.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        let r = rho.matrix();
        self.projectors
            .par_iter()
            .map(|p| {
                // tr(Π ρ) = Σ_mn Π_mn ρ_nm
                let mut acc = 0.0;
                for m in 0..self.dim {
                    for n in 0..self.dim {
                        acc += (p[(m, n)] * r[(n, m)]).re;
                    }
                }
                acc
            })
            .collect()
    }

    /// `Σ_j f_j ln p_j`; `−∞` when some observed bin has zero probability.
    pub fn log_likelihood(&self, rho: &DensityMatrix) -> f64 {
        let probs = self.probabilities(rho);
        self.log_likelihood_from(&probs)
    }

    fn log_likelihood_from(&self, probs: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (&f, &p) in self.frequencies.iter().zip(probs) {
            if f == 0.0 {
                continue;
            }
            if p <= 0.0 {
                log::warn!("observed bin has zero model probability");
                return f64::NEG_INFINITY;
            }
            ll += f * p.ln();
        }
        ll
    }

    /// `R = Σ_j (f_j / p_j) Π_j`, summed in a fixed order.
    fn r_operator(&self, probs: &[f64]) -> CMatrix {
        let d = self.dim;
        let weights: Vec<f64> = self
            .frequencies
            .iter()
            .zip(probs)
            .map(|(&f, &p)| if f > 0.0 && p > 0.0 { f / p } else { 0.0 })
            .collect();
        let partial: Vec<CMatrix> = self
            .projectors
            .par_chunks(REDUCE_CHUNK)
            .zip(weights.par_chunks(REDUCE_CHUNK))
            .map(|(ps, ws)| {
                let mut acc = CMatrix::zeros(d, d);
                for (p, &w) in ps.iter().zip(ws) {
                    if w != 0.0 {
                        acc.zip_apply(p, |a, b| *a += b * w);
                    }
                }
                acc
            })
            .collect();
        partial
            .into_iter()
            .fold(CMatrix::zeros(d, d), |acc, m| acc + m)
    }

    /// One diluted step `N[(I + ε(R − I)) ρ (I + ε(R − I))]`.
    pub fn step(&self, rho: &DensityMatrix, dilution: f64) -> DensityMatrix {
        let probs = self.probabilities(rho);
        self.step_with(rho, &probs, dilution)
    }

    fn step_with(&self, rho: &DensityMatrix, probs: &[f64], dilution: f64) -> DensityMatrix {
        let d = self.dim;
        let id = CMatrix::identity(d, d);
        let r = self.r_operator(probs);
        let g = &id + (r - &id) * C64::new(dilution, 0.0);
        DensityMatrix::from_positive_unchecked(&g * rho.matrix() * g.adjoint())
    }

    /// Iterates from `init` until the likelihood stalls or `max_iters`.
    pub fn solve(&self, init: DensityMatrix, cfg: &MleConfig) -> Result<MleOutcome> {
        cfg.validate()?;
        if init.dim() != self.dim {
            return Err(Error::DimMismatch {
                left: init.dim(),
                right: self.dim,
            });
        }
        let start = Instant::now();
        let mut rho = init;
        let mut probs = self.probabilities(&rho);
        let mut ll = self.log_likelihood_from(&probs);
        let mut trace = vec![ll];
        let mut eps = cfg.dilution;
        let (mut successes, mut stalled, mut rejected) = (0usize, 0usize, 0usize);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.max_iters {
            iterations += 1;
            let cand = self.step_with(&rho, &probs, eps);
            let cand_probs = self.probabilities(&cand);
            let cand_ll = self.log_likelihood_from(&cand_probs);
            if !cand_ll.is_finite() && ll.is_finite() || cand_ll < ll {
                rejected += 1;
                eps *= 0.5;
                successes = 0;
                if eps < 1e-12 {
                    converged = true;
                    break;
                }
                continue;
            }
            let delta = cand_ll - ll;
            rho = cand;
            probs = cand_probs;
            ll = cand_ll;
            trace.push(ll);
            successes += 1;
            if successes >= 5 {
                eps = cfg.dilution;
                successes = 0;
            }
            if delta.abs() < cfg.tolerance {
                stalled += 1;
                if stalled >= cfg.stall_iters {
                    converged = true;
                    break;
                }
            } else {
                stalled = 0;
            }
        }
        let rho = DensityMatrix::from_positive(rho.into_matrix())?;
        Ok(MleOutcome {
            rho,
            diagnostics: MleDiagnostics {
                iterations,
                rejected_steps: rejected,
                converged,
                log_likelihood: ll,
                loglik_trace: trace,
                final_dilution: eps,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleDiagnostics {
    pub iterations: usize,
    pub rejected_steps: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    /// Log-likelihood after every accepted iteration (first entry: start).
    pub loglik_trace: Vec<f64>,
    pub final_dilution: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct MleOutcome {
    pub rho: DensityMatrix,
    pub diagnostics: MleDiagnostics,
}

/// Maximum-likelihood density matrix for `record`, started from `I/dim`.
/// A run that exhausts `max_iters` returns its best iterate with
/// `diagnostics.converged == false`.
pub fn mle_reconstruct(record: &QuadratureRecord, cfg: &MleConfig) -> Result<MleOutcome> {
    let problem = MleProblem::from_record(record, cfg)?;
    problem.solve(DensityMatrix::maximally_mixed(cfg.dim)?, cfg)
}

/// Binned log-likelihood of `rho` for `record` under `cfg`'s binning.
pub fn log_likelihood(
    rho: &DensityMatrix,
    record: &QuadratureRecord,
    cfg: &MleConfig,
) -> Result<f64> {
    if rho.dim() != cfg.dim {
        return Err(Error::DimMismatch {
            left: rho.dim(),
            right: cfg.dim,
        });
    }
    Ok(MleProblem::from_record(record, cfg)?.log_likelihood(rho))
}
