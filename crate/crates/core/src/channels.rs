//! Optical loss and phase-noise channels, and the closed-form squeezing /
//! anti-squeezing levels they produce.
//!
//! Levels follow
//!
//! ```text
//! V_sq = (1 − L)[V_sq,id cos²θ + V_as,id sin²θ] + L
//! V_as = (1 − L)[V_as,id cos²θ + V_sq,id sin²θ] + L
//! ```
//!
//! in vacuum-normalized variance units (vacuum = 1). Phase noise is modelled
//! as a symmetric two-point jitter `±θ`, which reproduces the cos²/sin²
//! mixing exactly; a Gaussian jitter of RMS `θ` is available for realism
//! studies and agrees only to second order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{check_dim, CMatrix, DensityMatrix, Operator, C64};

/// Power loss fraction `L ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParam(f64);

impl LossParam {
    pub fn new(l: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidParameter(format!("loss {l} outside [0, 1]")));
        }
        Ok(Self(l))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn transmissivity(&self) -> f64 {
        1.0 - self.0
    }
}

/// Phase-noise magnitude `θ ∈ [0, π/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseParam(f64);

impl PhaseNoiseParam {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "phase noise {theta} outside [0, π/2)"
            )));
        }
        Ok(Self(theta))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseNoiseModel {
    /// `½ U(θ) ρ U(θ)† + ½ U(−θ) ρ U(−θ)†`
    #[default]
    TwoPoint,
    /// Rotation angle drawn from `N(0, θ²)`.
    Gaussian,
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Kraus weight `sqrt(C(n,k) η^{n−k} (1−η)^k)`.
fn kraus_amplitude(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if eta == 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if eta == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln = ln_binomial(n, k) + (n - k) as f64 * eta.ln() + k as f64 * (1.0 - eta).ln();
    (0.5 * ln).exp()
}

/// Kraus operators `A_k = Σ_n sqrt(C(n,k) η^{n−k}(1−η)^k) |n−k⟩⟨n|` of the
/// pure-loss channel, `k = 0..dim`.
pub fn loss_kraus_operators(loss: LossParam, dim: usize) -> Result<Vec<Operator>> {
    check_dim(dim)?;
    let eta = loss.transmissivity();
    (0..dim)
        .map(|k| {
            let mut m = CMatrix::zeros(dim, dim);
            for n in k..dim {
                m[(n - k, n)] = C64::new(kraus_amplitude(n, k, eta), 0.0);
            }
            Operator::new(m)
        })
        .collect()
}

/// `Σ_k A_k ρ A_k†`, evaluated elementwise:
/// `ρ'_{mn} = Σ_k a(m+k,k) a(n+k,k) ρ_{m+k,n+k}`.
pub fn apply_loss(rho: &DensityMatrix, loss: LossParam) -> DensityMatrix {
    let d = rho.dim();
    let eta = loss.transmissivity();
    if eta == 1.0 {
        return rho.clone();
    }
    let amp: Vec<Vec<f64>> = (0..d)
        .map(|n| (0..=n).map(|k| kraus_amplitude(n, k, eta)).collect())
        .collect();
    let mut out = CMatrix::zeros(d, d);
    for m in 0..d {
        for n in 0..=m {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..d - m {
                acc += rho.get(m + k, n + k) * (amp[m + k][k] * amp[n + k][k]);
            }
            out[(m, n)] = acc;
            out[(n, m)] = acc.conj();
        }
    }
    DensityMatrix::from_positive_unchecked(out)
}

pub fn apply_phase_noise(rho: &DensityMatrix, noise: PhaseNoiseParam) -> DensityMatrix {
    apply_phase_noise_with(rho, noise, PhaseNoiseModel::TwoPoint)
}

/// Dephasing: `ρ_{mn}` is multiplied by `cos((m−n)θ)` (two-point) or
/// `exp(−(m−n)²θ²/2)` (Gaussian).
pub fn apply_phase_noise_with(
    rho: &DensityMatrix,
    noise: PhaseNoiseParam,
    model: PhaseNoiseModel,
) -> DensityMatrix {
    let theta = noise.value();
    if theta == 0.0 {
        return rho.clone();
    }
    let d = rho.dim();
    let mut m = rho.matrix().clone();
    for i in 0..d {
        for j in 0..d {
            let k = i as f64 - j as f64;
            let factor = match model {
                PhaseNoiseModel::TwoPoint => (k * theta).cos(),
                PhaseNoiseModel::Gaussian => (-0.5 * k * k * theta * theta).exp(),
            };
            m[(i, j)] *= factor;
        }
    }
    DensityMatrix::from_positive_unchecked(m)
}

/// Order in which the two channels act on a squeezed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelOrder {
    /// Loss acts last, matching the `(1 − L)[…] + L` form.
    #[default]
    PhaseNoiseThenLoss,
    LossThenPhaseNoise,
}

/// Combined degradation applied to an ideal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub loss: LossParam,
    pub phase_noise: PhaseNoiseParam,
    #[serde(default)]
    pub model: PhaseNoiseModel,
    #[serde(default)]
    pub order: ChannelOrder,
}

impl Degradation {
    pub fn new(loss: f64, phase_noise: f64) -> Result<Self> {
        Ok(Self {
            loss: LossParam::new(loss)?,
            phase_noise: PhaseNoiseParam::new(phase_noise)?,
            model: PhaseNoiseModel::TwoPoint,
            order: ChannelOrder::PhaseNoiseThenLoss,
        })
    }

    pub fn none() -> Self {
        Self::new(0.0, 0.0).expect("zero degradation is valid")
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        match self.order {
            ChannelOrder::PhaseNoiseThenLoss => apply_loss(
                &apply_phase_noise_with(rho, self.phase_noise, self.model),
                self.loss,
            ),
            ChannelOrder::LossThenPhaseNoise => {
                apply_phase_noise_with(&apply_loss(rho, self.loss), self.phase_noise, self.model)
            }
        }
    }
}

/// Measured variances `(V_sq, V_as)` in vacuum units for ideal variances
/// `(v_sq, v_as)`.
pub fn degraded_variances(v_sq: f64, v_as: f64, loss: f64, theta: f64) -> (f64, f64) {
    let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
    (
        (1.0 - loss) * (v_sq * c2 + v_as * s2) + loss,
        (1.0 - loss) * (v_as * c2 + v_sq * s2) + loss,
    )
}

/// Measured `(squeezing_dB, anti_squeezing_dB)` for an ideal pure squeezed
/// vacuum of `ideal_sq_db`, degraded by loss `L` and phase noise `θ`.
pub fn predicted_levels(ideal_sq_db: f64, loss: f64, theta: f64) -> (f64, f64) {
    let v_sq = 10f64.powf(-ideal_sq_db / 10.0);
    let (vs, va) = degraded_variances(v_sq, 1.0 / v_sq, loss, theta);
    (10.0 * vs.recip().log10(), 10.0 * va.log10())
}
