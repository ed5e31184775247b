//! Truncated Fock-basis linear algebra.
//!
//! Conventions used throughout the crate: `hbar = 1`, the position-like
//! quadrature is `x = (a + a†)/√2` and the vacuum variance is `1/2`. A
//! squeezing level in dB is therefore `-10·log10(V / (1/2))`, which for an
//! ideal squeezed vacuum equals `(20 / ln 10)·r`.

use faer::complex_native::c64;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Fock truncation used when nothing else is requested.
pub const DEFAULT_DIM: usize = 35;
/// Largest population allowed outside the truncated space before a factory
/// refuses to renormalize.
pub const DEFAULT_MAX_TAIL: f64 = 1e-6;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;

/// Squaring threshold for the scaling-and-squaring exponential.
const EXPM_NORM_THRESHOLD: f64 = 0.5;

/// A truncation request: target dimension plus the largest tolerated
/// population leaking out of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub dim: usize,
    pub max_tail: f64,
}

impl Truncation {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            max_tail: DEFAULT_MAX_TAIL,
        }
    }

    pub fn with_max_tail(mut self, max_tail: f64) -> Self {
        self.max_tail = max_tail;
        self
    }
}

impl From<usize> for Truncation {
    fn from(dim: usize) -> Self {
        Truncation::new(dim)
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "Fock truncation must be at least 2",
        });
    }
    Ok(())
}

/// Squeezing parameter `ξ = r·e^{iφ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub r: f64,
    pub phi: f64,
}

impl SqueezeParams {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "squeezing factor r = {r} must be finite and >= 0"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "squeezing angle {phi} is not finite"
            )));
        }
        Ok(Self {
            r,
            phi: phi.rem_euclid(std::f64::consts::TAU),
        })
    }

    /// Squeezing given as an ideal level in dB.
    pub fn from_db(db: f64, phi: f64) -> Result<Self> {
        Self::new(db_to_r(db), phi)
    }

    pub fn xi(&self) -> C64 {
        C64::from_polar(self.r, self.phi)
    }

    pub fn level_db(&self) -> f64 {
        r_to_db(self.r)
    }
}

/// `(20 / ln 10)·r`.
pub fn r_to_db(r: f64) -> f64 {
    20.0 * r / std::f64::consts::LN_10
}

pub fn db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

/// A general (finite) operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    elements: CMatrix,
}

impl Operator {
    pub fn new(elements: CMatrix) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::ContractViolation(format!(
                "operator must be square, got {}x{}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        if elements
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NumericFailure(
                "operator has non-finite entries".into(),
            ));
        }
        Ok(Self { elements })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            elements: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_matrix(self) -> CMatrix {
        self.elements
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.elements[(row, col)]
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            elements: self.elements.adjoint(),
        }
    }

    pub fn compose(&self, other: &Operator) -> Operator {
        Operator {
            elements: &self.elements * &other.elements,
        }
    }
}

/// Ladder operator with `a[n-1][n] = sqrt(n)`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(Operator { elements: m })
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.dagger())
}

pub fn number_operator(dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = C64::new(n as f64, 0.0);
    }
    Ok(Operator { elements: m })
}

/// `exp(-iθ a†a)`.
pub fn phase_rotation(theta: f64, dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = C64::from_polar(1.0, -theta * n as f64);
    }
    Ok(Operator { elements: m })
}

/// `S(ξ) = exp[½ ξ* a² − ½ ξ a†²]`, exponentiated inside the truncation.
///
/// The truncated generator is only faithful on the low-photon block; states
/// should be squeezed in a larger working space and then cut down (see
/// [`crate::states`]).
pub fn squeeze_operator(params: &SqueezeParams, dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let a = annihilation(dim)?.into_matrix();
    let ad = a.adjoint();
    let xi = params.xi();
    let generator = (&a * &a) * (xi.conj() * 0.5) - (&ad * &ad) * (xi * 0.5);
    matrix_exponential(&Operator::new(generator)?)
}

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 0.5, the
/// series is summed to machine precision, and the result is squared `s` times.
pub fn matrix_exponential(op: &Operator) -> Result<Operator> {
    let m = op.matrix();
    let n = m.nrows();
    let norm = one_norm(m);
    if !norm.is_finite() {
        return Err(Error::NumericFailure(
            "matrix exponential of non-finite matrix".into(),
        ));
    }
    let squarings = if norm > EXPM_NORM_THRESHOLD {
        (norm / EXPM_NORM_THRESHOLD).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::NumericFailure(format!(
            "matrix exponential overflow (norm {norm:e})"
        )));
    }
    let scaled = m * C64::new(0.5f64.powi(squarings), 0.0);

    let mut result = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..60 {
        term = (&term * &scaled) / C64::new(k as f64, 0.0);
        result += &term;
        if one_norm(&term) <= f64::EPSILON * one_norm(&result) * 1e-2 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result
        .iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(Error::NumericFailure(
            "matrix exponential overflowed".into(),
        ));
    }
    Ok(Operator { elements: result })
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order; `vectors` holds the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= lambda;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub(crate) fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_eigendecomposition(matrix: &CMatrix) -> Result<HermitianEigen> {
    if !matrix.is_square() {
        return Err(Error::ContractViolation(
            "eigendecomposition needs a square matrix".into(),
        ));
    }
    let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = hermitian_defect(matrix);
    if !(defect <= 1e-8 * scale) {
        return Err(Error::ContractViolation(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }
    let n = matrix.nrows();
    let sym = faer::Mat::<c64>::from_fn(n, n, |i, j| {
        let z = 0.5 * (matrix[(i, j)] + matrix[(j, i)].conj());
        c64::new(z.re, z.im)
    });
    let eig = sym.selfadjoint_eigendecomposition(faer::Side::Lower);
    let (u, s) = (eig.u(), eig.s().column_vector());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(j).re.total_cmp(&s.read(i).re));
    let vectors = CMatrix::from_fn(n, n, |i, j| {
        let z = u.read(i, order[j]);
        C64::new(z.re, z.im)
    });
    Ok(HermitianEigen {
        values: order.iter().map(|&i| s.read(i).re).collect(),
        vectors,
    })
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues descending.
pub(crate) fn symmetric_eigendecomposition(matrix: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = matrix.nrows();
    let sym = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (matrix[(i, j)] + matrix[(j, i)]));
    let eig = sym.selfadjoint_eigendecomposition(faer::Side::Lower);
    let (u, s) = (eig.u(), eig.s().column_vector());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(j).total_cmp(&s.read(i)));
    let vectors = DMatrix::from_fn(n, n, |i, j| u.read(i, order[j]));
    (order.iter().map(|&i| s.read(i)).collect(), vectors)
}

/// Result of checking the three density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    pub hermitian_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
}

impl PhysicalityReport {
    pub fn is_physical(&self) -> bool {
        self.hermitian_defect <= HERMITIAN_TOL
            && self.trace_defect <= TRACE_TOL
            && self.min_eigenvalue >= -PSD_TOL
    }
}

pub fn physicality_report(m: &CMatrix) -> Result<PhysicalityReport> {
    let eig = hermitian_eigendecomposition(m)?;
    Ok(PhysicalityReport {
        hermitian_defect: hermitian_defect(m),
        trace_defect: (m.trace() - C64::new(1.0, 0.0)).norm(),
        min_eigenvalue: eig.values.last().copied().unwrap_or(0.0),
    })
}

/// Hermitian, unit-trace, positive semi-definite matrix in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: CMatrix,
}

impl DensityMatrix {
    /// Validates all three invariants without modifying the input.
    pub fn from_matrix(elements: CMatrix) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::ContractViolation(
                "density matrix must be square".into(),
            ));
        }
        check_dim(elements.nrows())?;
        let report = physicality_report(&elements)?;
        if !report.is_physical() {
            return Err(Error::ContractViolation(format!(
                "matrix is not a valid density matrix: {report:?}"
            )));
        }
        Ok(Self { elements })
    }

    /// Hermitizes and trace-normalizes a positive operator, then validates it.
    pub fn from_positive(elements: CMatrix) -> Result<Self> {
        let mut m = hermitize(elements);
        let tr = m.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::NumericFailure(format!(
                "cannot normalize operator with trace {tr}"
            )));
        }
        m /= C64::new(tr, 0.0);
        Self::from_matrix(m)
    }

    /// Skips the eigenvalue check; callers guarantee positivity by construction.
    pub(crate) fn from_positive_unchecked(elements: CMatrix) -> Self {
        let mut m = hermitize(elements);
        let tr = m.trace().re;
        m /= C64::new(tr, 0.0);
        Self { elements: m }
    }

    pub fn pure(state: &nalgebra::DVector<C64>) -> Result<Self> {
        let norm2 = state.norm_squared();
        if !(norm2.is_finite() && norm2 > 0.0) {
            return Err(Error::NumericFailure(
                "cannot build a pure state from a zero vector".into(),
            ));
        }
        let m = state * state.adjoint() / C64::new(norm2, 0.0);
        Ok(Self::from_positive_unchecked(m))
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(Error::InvalidDimension {
                dim,
                reason: "Fock index outside the truncation",
            });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(n, n)] = C64::new(1.0, 0.0);
        Ok(Self { elements: m })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            elements: CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_matrix(self) -> CMatrix {
        self.elements
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.elements[(row, col)]
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.elements[(n, n)].re).collect()
    }

    pub fn physicality(&self) -> PhysicalityReport {
        physicality_report(&self.elements).expect("density matrix is Hermitian by construction")
    }

    pub fn eigen(&self) -> HermitianEigen {
        hermitian_eigendecomposition(&self.elements)
            .expect("density matrix is Hermitian by construction")
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimMismatch {
                left: u.dim(),
                right: self.dim(),
            });
        }
        let m = u.matrix() * &self.elements * u.matrix().adjoint();
        Ok(Self::from_positive_unchecked(m))
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimMismatch {
                left: op.dim(),
                right: self.dim(),
            });
        }
        Ok((&self.elements * op.matrix()).trace())
    }

    /// Population inside the leading `dim` Fock levels.
    pub fn retained_trace(&self, dim: usize) -> f64 {
        (0..dim.min(self.dim()))
            .map(|n| self.elements[(n, n)].re)
            .sum()
    }

    /// Projects onto the leading `truncation.dim` levels and renormalizes,
    /// refusing when more than `max_tail` population would be discarded.
    pub fn truncate(&self, truncation: impl Into<Truncation>) -> Result<Self> {
        let t = truncation.into();
        check_dim(t.dim)?;
        if t.dim >= self.dim() {
            return Ok(self.embed(t.dim));
        }
        let retained = self.retained_trace(t.dim);
        if retained < 1.0 - t.max_tail {
            return Err(Error::TruncationOverflow {
                dim: t.dim,
                retained,
                max_tail: t.max_tail,
            });
        }
        let block = self.elements.view((0, 0), (t.dim, t.dim)).into_owned();
        Ok(Self::from_positive_unchecked(block))
    }

    /// Zero-pads into a larger truncation.
    pub fn embed(&self, dim: usize) -> Self {
        if dim <= self.dim() {
            return self.clone();
        }
        let mut m = CMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim()))
            .copy_from(&self.elements);
        Self { elements: m }
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok((&self.elements - &other.elements).norm())
    }
}

pub(crate) fn hermitize(m: CMatrix) -> CMatrix {
    let adj = m.adjoint();
    (m + adj) * C64::new(0.5, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn annihilation_entries() {
        let a = annihilation(2).unwrap();
        assert_eq!(a.get(0, 1), C64::new(1.0, 0.0));
        assert_eq!(a.get(1, 0), C64::new(0.0, 0.0));
        assert_eq!(a.get(0, 0), C64::new(0.0, 0.0));
        let a3 = annihilation(3).unwrap();
        assert_relative_eq!(a3.get(1, 2).re, 1.41421356, epsilon = 1e-8);
        assert!(matches!(
            annihilation(1),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn number_operator_from_ladder_product() {
        let a = annihilation(35).unwrap();
        let n = a.dagger().compose(&a);
        for k in 0..35 {
            assert_relative_eq!(n.get(k, k).re, k as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn expm_trivial_cases() {
        let zero = Operator::new(CMatrix::zeros(3, 3)).unwrap();
        assert_eq!(matrix_exponential(&zero).unwrap(), Operator::identity(3));

        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = C64::new(1.0, 0.0);
        d[(1, 1)] = C64::new(2.0, 0.0);
        let e = matrix_exponential(&Operator::new(d).unwrap()).unwrap();
        assert_relative_eq!(e.get(0, 0).re, 1f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(e.get(1, 1).re, 2f64.exp(), max_relative = 1e-12);
        assert_eq!(e.get(0, 1), C64::new(0.0, 0.0));

        let mut nil = CMatrix::zeros(2, 2);
        nil[(0, 1)] = C64::new(1.0, 0.0);
        let e = matrix_exponential(&Operator::new(nil).unwrap()).unwrap();
        assert_eq!(e.get(0, 0), C64::new(1.0, 0.0));
        assert_eq!(e.get(0, 1), C64::new(1.0, 0.0));
        assert_eq!(e.get(1, 1), C64::new(1.0, 0.0));
        assert_eq!(e.get(1, 0), C64::new(0.0, 0.0));
    }

    #[test]
    fn expm_overflow_is_numeric_failure() {
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = C64::new(1e6, 0.0);
        assert!(matches!(
            matrix_exponential(&Operator::new(d).unwrap()),
            Err(Error::NumericFailure(_))
        ));
    }

    #[test]
    fn expm_matches_nalgebra_pade() {
        // Independent route: nalgebra's Padé-based exponential.
        let mut m = CMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = C64::new(
                    ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6,
                    ((i + 2 * j) % 4) as f64 * 0.2 - 0.3,
                );
            }
        }
        let ours = matrix_exponential(&Operator::new(m.clone()).unwrap()).unwrap();
        let theirs = m.exp();
        let rel = (ours.matrix() - &theirs).norm() / theirs.norm();
        assert!(rel < 1e-10, "relative error {rel}");
    }

    #[test]
    fn squeeze_operator_identity_and_vacuum_overlap() {
        let s0 = squeeze_operator(&SqueezeParams::new(0.0, 0.3).unwrap(), 10).unwrap();
        assert!((s0.matrix() - CMatrix::identity(10, 10)).norm() < 1e-15);

        let r: f64 = 0.5;
        let s = squeeze_operator(&SqueezeParams::new(r, 0.0).unwrap(), 35).unwrap();
        assert_relative_eq!(s.get(0, 0).re, 1.0 / r.cosh().sqrt(), epsilon = 1e-10);
        assert!(s.get(0, 0).im.abs() < 1e-12);
        assert_relative_eq!(1.0 / r.cosh().sqrt(), 0.941711, epsilon = 1e-6);
    }

    #[test]
    fn squeeze_operator_inverse_is_adjoint_on_low_block() {
        let dim = 30;
        let p = SqueezeParams::new(0.7, 1.1).unwrap();
        let m = SqueezeParams::new(0.7, 1.1 + std::f64::consts::PI).unwrap();
        let s = squeeze_operator(&p, dim).unwrap();
        let s_neg = squeeze_operator(&m, dim).unwrap();
        let sd = s.dagger();
        let h = dim / 2;
        for i in 0..h {
            for j in 0..h {
                assert!((s_neg.get(i, j) - sd.get(i, j)).norm() < 1e-8);
            }
        }
        let unit = s.compose(&sd);
        for i in 0..h / 2 {
            for j in 0..h / 2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((unit.get(i, j) - C64::new(expect, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn eigen_examples() {
        let e = hermitian_eigendecomposition(&CMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.values.len(), 3);
        for v in &e.values {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-14);
        }
        let mut z = CMatrix::zeros(2, 2);
        z[(0, 0)] = C64::new(-1.0, 0.0);
        z[(1, 1)] = C64::new(1.0, 0.0);
        let e = hermitian_eigendecomposition(&z).unwrap();
        assert_relative_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], -1.0, epsilon = 1e-14);

        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            hermitian_eigendecomposition(&bad),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn truncate_refuses_large_tail() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(3, 3)] = C64::new(0.5, 0.0);
        let rho = DensityMatrix::from_matrix(m).unwrap();
        assert!(matches!(
            rho.truncate(3),
            Err(Error::TruncationOverflow { .. })
        ));
        let cut = rho.truncate(Truncation::new(3).with_max_tail(0.6)).unwrap();
        assert_relative_eq!(cut.get(0, 0).re, 1.0);
        assert_eq!(cut.embed(4).dim(), 4);
    }

    #[test]
    fn from_matrix_rejects_unphysical() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn hermitian(dim: usize, vals: &[f64]) -> CMatrix {
            let mut m = CMatrix::zeros(dim, dim);
            let mut k = 0;
            for i in 0..dim {
                for j in 0..=i {
                    let re = vals[k % vals.len()];
                    let im = if i == j {
                        0.0
                    } else {
                        vals[(k + 1) % vals.len()]
                    };
                    k += 2;
                    m[(i, j)] = C64::new(re, im);
                    m[(j, i)] = C64::new(re, -im);
                }
            }
            m
        }

        proptest! {
            #[test]
            fn eigen_roundtrip(dim in 2usize..12, vals in proptest::collection::vec(-3.0f64..3.0, 8..40)) {
                let m = hermitian(dim, &vals);
                let e = hermitian_eigendecomposition(&m).unwrap();
                let err = (e.reconstruct() - &m).norm();
                prop_assert!(err <= 1e-9 * m.norm().max(1e-300) + 1e-14);
                for w in e.values.windows(2) {
                    prop_assert!(w[0] >= w[1]);
                }
            }
        }
    }
}
