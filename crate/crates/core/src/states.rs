//! Vacuum, thermal, squeezed vacuum and squeezed thermal states.
//!
//! Squeezed states are built in an enlarged working space and only then cut
//! down to the requested truncation, so the truncated generator's edge
//! artefacts never reach the retained block. The squeezing angle is applied
//! as a final Fock-diagonal rotation: `S(r, φ) = U S(r, 0) U†` with
//! `U = exp(iφ a†a / 2)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, check_dim, CMatrix, DensityMatrix, SqueezeParams, Truncation, C64};

/// Population allowed in the top fifth of the working space.
const EDGE_TOL: f64 = 1e-14;
const MAX_WORKING_DIM: usize = 720;

/// Thermal occupation; stands in for the reservoir temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub nbar: f64,
}

impl ThermalParams {
    pub fn new(nbar: f64) -> Result<Self> {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mean photon number {nbar} must be finite and >= 0"
            )));
        }
        Ok(Self { nbar })
    }

    /// Bose-Einstein population of level `n`.
    pub fn population(&self, n: usize) -> f64 {
        if self.nbar == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let q = self.nbar / (1.0 + self.nbar);
        q.powi(n as i32) / (1.0 + self.nbar)
    }

    /// Population outside the leading `dim` levels.
    pub fn tail(&self, dim: usize) -> f64 {
        if self.nbar == 0.0 {
            return 0.0;
        }
        (self.nbar / (1.0 + self.nbar)).powi(dim as i32)
    }
}

pub fn vacuum(dim: usize) -> Result<DensityMatrix> {
    DensityMatrix::fock(0, dim)
}

pub fn thermal(params: &ThermalParams, truncation: impl Into<Truncation>) -> Result<DensityMatrix> {
    let t = truncation.into();
    check_dim(t.dim)?;
    let tail = params.tail(t.dim);
    if tail >= t.max_tail {
        return Err(Error::TruncationOverflow {
            dim: t.dim,
            retained: 1.0 - tail,
            max_tail: t.max_tail,
        });
    }
    let mut m = CMatrix::zeros(t.dim, t.dim);
    for n in 0..t.dim {
        m[(n, n)] = C64::new(params.population(n), 0.0);
    }
    Ok(DensityMatrix::from_positive_unchecked(m))
}

pub fn squeezed_vacuum(
    sq: &SqueezeParams,
    truncation: impl Into<Truncation>,
) -> Result<DensityMatrix> {
    squeezed_thermal(sq, &ThermalParams { nbar: 0.0 }, truncation)
}

/// `S ρ_th S†`, truncated.
pub fn squeezed_thermal(
    sq: &SqueezeParams,
    th: &ThermalParams,
    truncation: impl Into<Truncation>,
) -> Result<DensityMatrix> {
    let t = truncation.into();
    check_dim(t.dim)?;
    let working = squeezed_thermal_working(sq.r, th, t.dim)?;
    rotate(&working, sq.phi / 2.0).truncate(t)
}

/// `exp(iα a†a) ρ exp(-iα a†a)`, applied elementwise.
pub fn rotate(rho: &DensityMatrix, alpha: f64) -> DensityMatrix {
    if alpha == 0.0 {
        return rho.clone();
    }
    let d = rho.dim();
    let mut m = rho.matrix().clone();
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] *= C64::from_polar(1.0, alpha * (i as f64 - j as f64));
        }
    }
    DensityMatrix::from_positive_unchecked(m)
}

/// Squeezed thermal state along φ = 0 in a working space large enough that
/// its population in the top fifth is below `1e-14`. The result is at least
/// `min_dim` levels.
pub fn squeezed_thermal_working(
    r: f64,
    th: &ThermalParams,
    min_dim: usize,
) -> Result<DensityMatrix> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "squeezing factor {r} must be finite and >= 0"
        )));
    }
    let mean_n = (th.nbar + 0.5) * (2.0 * r).cosh() - 0.5;
    let mut w = (min_dim + 24)
        .max(2 * min_dim)
        .max((12.0 * (mean_n + 1.0)).ceil() as usize);
    loop {
        w = quantize(w);
        let rho = squeezed_thermal_at(r, th, w)?;
        let edge: f64 = (w - w / 5..w).map(|n| rho.get(n, n).re).sum();
        if edge < EDGE_TOL {
            return Ok(rho);
        }
        if w >= MAX_WORKING_DIM {
            return Err(Error::TruncationOverflow {
                dim: w,
                retained: 1.0 - edge,
                max_tail: EDGE_TOL,
            });
        }
        w = (w * 3 / 2).min(MAX_WORKING_DIM);
    }
}

fn quantize(w: usize) -> usize {
    w.div_ceil(16) * 16
}

fn squeezed_thermal_at(r: f64, th: &ThermalParams, w: usize) -> Result<DensityMatrix> {
    if th.tail(w) > EDGE_TOL {
        return Err(Error::TruncationOverflow {
            dim: w,
            retained: 1.0 - th.tail(w),
            max_tail: EDGE_TOL,
        });
    }
    if r == 0.0 {
        return thermal(th, Truncation::new(w).with_max_tail(1.0));
    }
    let s = Squeezer::cached(w)?.operator(r);
    let mut scaled = s.clone();
    for j in 0..w {
        let p = th.population(j);
        for i in 0..w {
            scaled[(i, j)] *= p;
        }
    }
    let m = &scaled * s.transpose();
    let complex = m.map(|v| C64::new(v, 0.0));
    Ok(DensityMatrix::from_positive_unchecked(complex))
}

/// Cached spectral factorization of the φ = 0 squeezing generator
/// `K = (a² − a†²)/2`, giving `S(r, 0) = exp(rK)` for any `r` with a single
/// matrix product.
pub struct Squeezer {
    dim: usize,
    vectors: CMatrix,
    /// Eigenvalues `μ` of the Hermitian matrix `iK`.
    mu: Vec<f64>,
}

impl Squeezer {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let a = fock::annihilation(dim)?.into_matrix();
        let ad = a.adjoint();
        let k = (&a * &a - &ad * &ad) * C64::new(0.5, 0.0);
        let ik = k * C64::new(0.0, 1.0);
        let eig = fock::hermitian_eigendecomposition(&ik)?;
        Ok(Self {
            dim,
            vectors: eig.vectors,
            mu: eig.values,
        })
    }

    pub fn cached(dim: usize) -> Result<Arc<Squeezer>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Squeezer>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().expect("squeezer cache poisoned").get(&dim) {
            return Ok(Arc::clone(s));
        }
        let built = Arc::new(Squeezer::new(dim)?);
        cache
            .lock()
            .expect("squeezer cache poisoned")
            .insert(dim, Arc::clone(&built));
        Ok(built)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Real orthogonal matrix `exp(rK)` (within the truncation).
    pub fn operator(&self, r: f64) -> nalgebra::DMatrix<f64> {
        // exp(rK) = V diag(exp(-i r μ)) V†
        let mut scaled = self.vectors.clone();
        for (j, &mu) in self.mu.iter().enumerate() {
            let phase = C64::from_polar(1.0, -r * mu);
            for i in 0..self.dim {
                scaled[(i, j)] *= phase;
            }
        }
        (scaled * self.vectors.adjoint()).map(|z| z.re)
    }
}
