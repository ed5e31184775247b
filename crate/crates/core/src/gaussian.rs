//! Phase-space description of degraded squeezed thermal states.
//!
//! A squeezed thermal state with two-point phase jitter and loss is a
//! weighted mixture of zero-mean Gaussian states. Each component is fixed by
//! its minimum and maximum quadrature variances and the local-oscillator
//! angle of the minimum. This gives closed forms for variances, purity and
//! the Wigner function that do not depend on a Fock truncation, and an exact
//! sampler for states too strongly squeezed to represent in a small basis.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{LossParam, PhaseNoiseParam};
use crate::error::{Error, Result};
use crate::fock::SqueezeParams;
use crate::homodyne::{PhaseSchedule, QuadraturePoint, QuadratureRecord};
use crate::states::ThermalParams;

/// Zero-mean Gaussian state: `Var(θ) = v_min cos²(θ−angle) + v_max sin²(θ−angle)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub angle: f64,
}

impl GaussianComponent {
    pub fn variance(&self, theta: f64) -> f64 {
        let d = theta - self.angle;
        self.v_min * d.cos().powi(2) + self.v_max * d.sin().powi(2)
    }

    /// Covariance matrix `[[σ_xx, σ_xp], [σ_xp, σ_pp]]` of `(x̂, p̂)`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        let xx = self.v_min * c * c + self.v_max * s * s;
        let pp = self.v_min * s * s + self.v_max * c * c;
        let xp = (self.v_min - self.v_max) * s * c;
        [[xx, xp], [xp, pp]]
    }

    fn det_sum(&self, other: &GaussianComponent) -> f64 {
        let (a, b) = (self.covariance(), other.covariance());
        (a[0][0] + b[0][0]) * (a[1][1] + b[1][1]) - (a[0][1] + b[0][1]).powi(2)
    }

    fn wigner(&self, x: f64, p: f64) -> f64 {
        let s = self.covariance();
        let det = s[0][0] * s[1][1] - s[0][1] * s[0][1];
        let q = (s[1][1] * x * x - 2.0 * s[0][1] * x * p + s[0][0] * p * p) / det;
        (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
    }
}

/// Finite mixture of zero-mean Gaussian states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "mixture needs at least one component".into(),
            ));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &components {
            let ok = c.weight >= 0.0
                && c.v_min.is_finite()
                && c.v_max.is_finite()
                && c.angle.is_finite()
                && c.v_min > 0.0
                && c.v_min <= c.v_max
                && c.v_min * c.v_max >= 0.25 * (1.0 - 1e-12);
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "unphysical Gaussian component {c:?}"
                )));
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}"
            )));
        }
        Ok(Self { components })
    }

    /// `S(r, φ) ρ_th S(r, φ)†`.
    pub fn squeezed_thermal(sq: &SqueezeParams, th: &ThermalParams) -> Self {
        let scale = th.nbar + 0.5;
        Self {
            components: vec![GaussianComponent {
                weight: 1.0,
                v_min: scale * (-2.0 * sq.r).exp(),
                v_max: scale * (2.0 * sq.r).exp(),
                angle: sq.phi / 2.0,
            }],
        }
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn with_loss(&self, loss: LossParam) -> Self {
        let eta = loss.transmissivity();
        let vac = 0.5 * (1.0 - eta);
        Self {
            components: self
                .components
                .iter()
                .map(|c| GaussianComponent {
                    v_min: eta * c.v_min + vac,
                    v_max: eta * c.v_max + vac,
                    ..*c
                })
                .collect(),
        }
    }

    /// Two-point `±θ` jitter: every component splits in two.
    pub fn with_phase_noise(&self, noise: PhaseNoiseParam) -> Self {
        let theta = noise.value();
        if theta == 0.0 {
            return self.clone();
        }
        Self {
            components: self
                .components
                .iter()
                .flat_map(|c| {
                    [theta, -theta].map(|t| GaussianComponent {
                        weight: 0.5 * c.weight,
                        angle: c.angle + t,
                        ..*c
                    })
                })
                .collect(),
        }
    }

    pub fn variance(&self, theta: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.variance(theta))
            .sum()
    }

    /// `(min variance, max variance, angle of min)`, with the angle in `[0, π)`.
    pub fn variance_extrema(&self) -> (f64, f64, f64) {
        // Var(θ) = m + a cos 2θ + b sin 2θ
        let (v0, v45, v90) = (
            self.variance(0.0),
            self.variance(PI / 4.0),
            self.variance(PI / 2.0),
        );
        let m = 0.5 * (v0 + v90);
        let a = 0.5 * (v0 - v90);
        let b = v45 - m;
        let amp = a.hypot(b);
        let angle = (0.5 * (-b).atan2(-a)).rem_euclid(PI);
        (m - amp, m + amp, angle)
    }

    /// `(squeezing_dB, anti_squeezing_dB)` relative to the vacuum variance ½.
    pub fn levels_db(&self) -> (f64, f64) {
        let (lo, hi, _) = self.variance_extrema();
        (10.0 * (0.5 / lo).log10(), 10.0 * (hi / 0.5).log10())
    }

    /// `tr ρ² = Σ_ij w_i w_j / sqrt(det(σ_i + σ_j))`.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for a in &self.components {
            for b in &self.components {
                acc += a.weight * b.weight / a.det_sum(b).sqrt();
            }
        }
        acc
    }

    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.wigner(x, p))
            .sum()
    }

    /// Exact shots: pick a component by weight, then draw from its normal
    /// marginal at the scheduled phase.
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
            .map(|phase| {
                let c = self.pick(rng.gen::<f64>());
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                QuadraturePoint {
                    phase,
                    value: z * c.variance(phase).sqrt(),
                }
            })
            .collect();
        QuadratureRecord::new(points)
    }

    fn pick(&self, u: f64) -> &GaussianComponent {
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                return c;
            }
        }
        self.components.last().expect("mixture is non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{apply_loss, apply_phase_noise};
    use crate::fock::Truncation;
    use crate::homodyne::quadrature_variance;
    use crate::metrics::purity;
    use crate::states::squeezed_thermal;
    use approx::assert_relative_eq;

    fn params(r: f64, phi: f64, nbar: f64) -> (SqueezeParams, ThermalParams) {
        (
            SqueezeParams::new(r, phi).unwrap(),
            ThermalParams::new(nbar).unwrap(),
        )
    }

    #[test]
    fn vacuum_is_pure_with_half_variance() {
        let (sq, th) = params(0.0, 0.0, 0.0);
        let g = GaussianMixture::squeezed_thermal(&sq, &th);
        assert_relative_eq!(g.purity(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(g.variance(1.234), 0.5, epsilon = 1e-14);
        assert_relative_eq!(g.wigner(0.0, 0.0), 1.0 / PI, epsilon = 1e-14);
    }

    #[test]
    fn thermal_purity_closed_form() {
        let (sq, th) = params(0.7, 0.3, 1.0);
        let g = GaussianMixture::squeezed_thermal(&sq, &th);
        assert_relative_eq!(g.purity(), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn agrees_with_fock_route() {
        let (sq, th) = params(0.6, 1.1, 0.05);
        let loss = LossParam::new(0.15).unwrap();
        let noise = PhaseNoiseParam::new(0.08).unwrap();
        let g = GaussianMixture::squeezed_thermal(&sq, &th)
            .with_phase_noise(noise)
            .with_loss(loss);
        let rho = squeezed_thermal(&sq, &th, Truncation::new(50).with_max_tail(1e-9)).unwrap();
        let rho = apply_loss(&apply_phase_noise(&rho, noise), loss);
        for theta in [0.0, 0.3, 0.55, 1.2, 2.9] {
            assert_relative_eq!(
                g.variance(theta),
                quadrature_variance(&rho, theta),
                max_relative = 1e-8
            );
        }
        assert_relative_eq!(g.purity(), purity(&rho), max_relative = 1e-8);
    }

    #[test]
    fn extrema_locate_squeezing_axis() {
        let (sq, th) = params(0.5, 1.0, 0.0);
        let (lo, hi, angle) = GaussianMixture::squeezed_thermal(&sq, &th).variance_extrema();
        assert_relative_eq!(lo, 0.5 * (-1.0f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(hi, 0.5 * 1.0f64.exp(), epsilon = 1e-14);
        assert_relative_eq!(angle, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_unphysical_components() {
        let bad = GaussianComponent {
            weight: 1.0,
            v_min: 0.1,
            v_max: 0.5,
            angle: 0.0,
        };
        assert!(GaussianMixture::new(vec![bad]).is_err());
    }

    #[test]
    fn sampled_variance_matches() {
        let (sq, th) = params(1.5, 0.0, 0.0);
        let g = GaussianMixture::squeezed_thermal(&sq, &th)
            .with_phase_noise(PhaseNoiseParam::new(0.05).unwrap());
        let rec = g
            .sample(
                &PhaseSchedule::FixedSet {
                    phases: vec![0.0, PI / 2.0],
                },
                200_000,
                5,
            )
            .unwrap();
        let v0: Vec<f64> = rec.points().iter().step_by(2).map(|p| p.value).collect();
        let var = v0.iter().map(|v| v * v).sum::<f64>() / v0.len() as f64;
        assert_relative_eq!(var, g.variance(0.0), max_relative = 0.02);
    }
}
