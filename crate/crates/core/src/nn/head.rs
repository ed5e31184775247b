//! Cholesky output head: raw network outputs → lower-triangular `T` →
//! `ρ = T T† / tr(T T†)`.

use crate::error::{Error, Result};
use crate::fock::{check_dim, hermitize, CMatrix, DensityMatrix, C64};

/// Pre-activations are clamped into `[-HEAD_CLAMP, HEAD_CLAMP]`; non-finite
/// values are replaced by zero.
pub const HEAD_CLAMP: f64 = 1e6;
/// Added to every softplus diagonal so `T` is never identically zero.
pub const DIAGONAL_FLOOR: f64 = 1e-12;
/// `softplus⁻¹(1)`: diagonal bias that starts `T` at the identity.
pub const IDENTITY_BIAS: f64 = 0.541_324_854_612_918_1;

/// Complex lower-triangular matrix with a real diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    entries: CMatrix,
}

impl CholeskyFactor {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::ContractViolation(
                "Cholesky factor must be square".into(),
            ));
        }
        check_dim(entries.nrows())?;
        let d = entries.nrows();
        for i in 0..d {
            for j in 0..d {
                let z = entries[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::ContractViolation(format!(
                        "entry ({i}, {j}) is not finite"
                    )));
                }
                if j > i && z != C64::new(0.0, 0.0) {
                    return Err(Error::ContractViolation(format!(
                        "entry ({i}, {j}) above the diagonal"
                    )));
                }
                if i == j && z.im != 0.0 {
                    return Err(Error::ContractViolation(format!(
                        "diagonal entry {i} is not real"
                    )));
                }
            }
        }
        if entries.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            return Err(Error::DegenerateFactor);
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            entries: CMatrix::identity(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Maps `dim²` raw outputs: the first `dim` feed softplus diagonals,
    /// the rest are `(re, im)` pairs of the strictly lower triangle in
    /// row-major order.
    pub fn from_outputs(raw: &[f64], dim: usize) -> Result<Self> {
        if raw.len() != dim * dim {
            return Err(Error::ContractViolation(format!(
                "head expects {} outputs, got {}",
                dim * dim,
                raw.len()
            )));
        }
        check_dim(dim)?;
        Ok(Self {
            entries: lower_from_outputs(raw, dim),
        })
    }
}

pub(crate) fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v.clamp(-HEAD_CLAMP, HEAD_CLAMP)
    } else {
        0.0
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn lower_from_outputs(raw: &[f64], dim: usize) -> CMatrix {
    let mut t = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        t[(i, i)] = C64::new(softplus(sanitize(raw[i])) + DIAGONAL_FLOOR, 0.0);
    }
    let mut k = dim;
    for i in 1..dim {
        for j in 0..i {
            t[(i, j)] = C64::new(sanitize(raw[k]), sanitize(raw[k + 1]));
            k += 2;
        }
    }
    t
}

/// `T` rescaled by its largest modulus, `ρ`, and the scale used.
pub(crate) struct HeadState {
    pub scaled: CMatrix,
    pub scale: f64,
    pub trace: f64,
    pub rho: CMatrix,
}

pub(crate) fn head_forward(raw: &[f64], dim: usize) -> HeadState {
    let t = lower_from_outputs(raw, dim);
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scaled = t / C64::new(scale, 0.0);
    let gram = &scaled * scaled.adjoint();
    let trace = gram.trace().re;
    let rho = hermitize(gram / C64::new(trace, 0.0));
    HeadState {
        scaled,
        scale,
        trace,
        rho,
    }
}

/// Gradient of `loss_weight · ‖ρ − σ‖²_F` with respect to the raw outputs.
pub(crate) fn head_backward(
    raw: &[f64],
    state: &HeadState,
    target: &CMatrix,
    loss_weight: f64,
) -> Vec<f64> {
    let d = state.rho.nrows();
    let g = (&state.rho - target) * C64::new(2.0 * loss_weight, 0.0);
    let c = (&g * &state.rho).trace().re;
    let h = (g - CMatrix::identity(d, d) * C64::new(c, 0.0)) / C64::new(state.trace, 0.0);
    let m = (h * &state.scaled) * C64::new(2.0 / state.scale, 0.0);
    let mut out = vec![0.0; d * d];
    let live = |v: f64| v.is_finite() && v.abs() < HEAD_CLAMP;
    for i in 0..d {
        if live(raw[i]) {
            out[i] = m[(i, i)].re * sigmoid(raw[i]);
        }
    }
    let mut k = d;
    for i in 1..d {
        for j in 0..i {
            if live(raw[k]) {
                out[k] = m[(i, j)].re;
            }
            if live(raw[k + 1]) {
                out[k + 1] = m[(i, j)].im;
            }
            k += 2;
        }
    }
    out
}

/// `T T† / tr(T T†)`, physical by construction.
pub fn density_from_cholesky(t: &CholeskyFactor) -> Result<DensityMatrix> {
    let scale = t.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateFactor);
    }
    let scaled = &t.entries / C64::new(scale, 0.0);
    let gram = &scaled * scaled.adjoint();
    let trace = gram.trace().re;
    DensityMatrix::from_matrix(hermitize(gram / C64::new(trace, 0.0)))
}

/// `‖pred − target‖²_F`.
pub fn loss_frobenius(pred: &DensityMatrix, target: &DensityMatrix) -> Result<f64> {
    Ok(pred.frobenius_distance(target)?.powi(2))
}
