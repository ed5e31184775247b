//! Degraded squeezed-state specifications, their Fock-space truths and
//! homodyne records, and the deterministic training corpus.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{Degradation, LossParam, PhaseNoiseParam};
use crate::error::{Error, Result};
use crate::fock::{db_to_r, DensityMatrix, SqueezeParams, Truncation};
use crate::gaussian::GaussianMixture;
use crate::homodyne::{PhaseSchedule, QuadratureRecord};
use crate::nn::{SampleInput, TrainingSample, TrainingSet};
use crate::rng::derive_seed;
use crate::states::{rotate, squeezed_thermal_working, ThermalParams};

/// Squeezed thermal state degraded by two-point phase noise, then loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    /// Ideal squeezing level `(20/ln10)·r`.
    pub squeezing_db: f64,
    /// Squeezing phase `φ`; the minimum-variance LO angle is `φ/2`.
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub nbar: f64,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub phase_noise: f64,
}

impl StateSpec {
    pub fn squeezed_vacuum(squeezing_db: f64) -> Self {
        Self {
            squeezing_db,
            angle: 0.0,
            nbar: 0.0,
            loss: 0.0,
            phase_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.squeezing_db.is_finite() && self.squeezing_db >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "squeezing {} dB must be finite and >= 0",
                self.squeezing_db
            )));
        }
        if !self.angle.is_finite() {
            return Err(Error::InvalidParameter(
                "squeezing angle must be finite".into(),
            ));
        }
        ThermalParams::new(self.nbar)?;
        self.degradation()?;
        Ok(())
    }

    pub fn squeeze(&self) -> Result<SqueezeParams> {
        SqueezeParams::from_db(self.squeezing_db, self.angle)
    }

    pub fn thermal(&self) -> Result<ThermalParams> {
        ThermalParams::new(self.nbar)
    }

    pub fn degradation(&self) -> Result<Degradation> {
        Degradation::new(self.loss, self.phase_noise)
    }

    /// Truncation-free phase-space description.
    pub fn mixture(&self) -> Result<GaussianMixture> {
        self.validate()?;
        Ok(
            GaussianMixture::squeezed_thermal(&self.squeeze()?, &self.thermal()?)
                .with_phase_noise(PhaseNoiseParam::new(self.phase_noise)?)
                .with_loss(LossParam::new(self.loss)?),
        )
    }

    /// Fock-space state built in an enlarged working space, degraded there,
    /// then cut to `truncation` (renormalized; fails when more than
    /// `max_tail` is discarded).
    pub fn density_matrix(&self, truncation: impl Into<Truncation>) -> Result<DensityMatrix> {
        self.validate()?;
        let t = truncation.into();
        let working =
            squeezed_thermal_working(db_to_r(self.squeezing_db), &self.thermal()?, t.dim)?;
        let rotated = rotate(&working, self.angle / 2.0);
        self.degradation()?.apply(&rotated).truncate(t)
    }

    /// Exact homodyne record from the phase-space sampler.
    pub fn record(
        &self,
        schedule: &PhaseSchedule,
        n: usize,
        seed: u64,
    ) -> Result<QuadratureRecord> {
        self.mixture()?.sample(schedule, n, seed)
    }

    /// Measured `(squeezing_dB, anti_squeezing_dB)`.
    pub fn levels_db(&self) -> Result<(f64, f64)> {
        Ok(self.mixture()?.levels_db())
    }

    /// Pure squeezed vacuum degraded by `loss` and the phase noise that
    /// reproduce the measured levels exactly (two-point jitter).
    pub fn matching_levels(squeezing_db: f64, anti_squeezing_db: f64, loss: f64) -> Result<Self> {
        LossParam::new(loss)?;
        if loss >= 1.0 {
            return Err(Error::InvalidParameter(
                "loss must be below 1 to match levels".into(),
            ));
        }
        let v_sq = 10f64.powf(-squeezing_db / 10.0);
        let v_as = 10f64.powf(anti_squeezing_db / 10.0);
        // undo loss, then (a + b) = s + t with a·b = 1 fixes r, and
        // s = a cos²θ + b sin²θ fixes θ
        let s = (v_sq - loss) / (1.0 - loss);
        let t = (v_as - loss) / (1.0 - loss);
        let cosh2r = 0.5 * (s + t);
        if !(s > 0.0 && cosh2r >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "levels ({squeezing_db}, {anti_squeezing_db}) dB cannot be reached with loss {loss}"
            )));
        }
        let r = 0.5 * cosh2r.acosh();
        let (a, b) = ((-2.0 * r).exp(), (2.0 * r).exp());
        let sin2 = if b > a { (s - a) / (b - a) } else { 0.0 };
        if !(-1e-12..=0.5).contains(&sin2) {
            return Err(Error::InvalidParameter(format!(
                "levels ({squeezing_db}, {anti_squeezing_db}) dB need anti-squeezing above squeezing"
            )));
        }
        let sin2 = sin2.max(0.0);
        let spec = Self {
            squeezing_db: crate::fock::r_to_db(r),
            angle: 0.0,
            nbar: 0.0,
            loss,
            phase_noise: sin2.sqrt().asin(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Named parameters, for corpus metadata.
    pub fn metadata(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("squeezing_db".to_string(), self.squeezing_db),
            ("angle".to_string(), self.angle),
            ("nbar".to_string(), self.nbar),
            ("loss".to_string(), self.loss),
            ("phase_noise".to_string(), self.phase_noise),
        ])
    }
}

/// Parameter ranges and sizes of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub dim: usize,
    pub base_seed: u64,
    pub max_squeezing_db: f64,
    pub max_nbar: f64,
    pub max_loss: f64,
    pub max_phase_noise: f64,
    pub record_len: usize,
    /// Fraction of samples recorded with `short_len` points instead.
    pub short_fraction: f64,
    pub short_len: usize,
    /// Population the truncated truth may discard (then renormalized).
    pub max_tail: f64,
    pub schedule: PhaseSchedule,
}

impl CorpusSpec {
    /// Desk-scale corpus: dim 12, 0–8 dB, n̄ ≤ 0.5, L ≤ 0.3, θ ≤ 0.1 rad.
    pub fn desk(count: usize, base_seed: u64) -> Self {
        Self {
            count,
            dim: 12,
            base_seed,
            max_squeezing_db: 8.0,
            max_nbar: 0.5,
            max_loss: 0.3,
            max_phase_noise: 0.1,
            record_len: crate::homodyne::STANDARD_RECORD_LEN,
            short_fraction: 0.25,
            short_len: 256,
            max_tail: 0.1,
            schedule: PhaseSchedule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.count >= 1
            && self.record_len >= 1
            && self.short_len >= 1
            && (0.0..=1.0).contains(&self.short_fraction)
            && (0.0..=1.0).contains(&self.max_tail)
            && self.max_squeezing_db >= 0.0
            && self.max_nbar >= 0.0
            && (0.0..1.0).contains(&self.max_loss)
            && (0.0..PI / 2.0).contains(&self.max_phase_noise);
        if !ok {
            return Err(Error::InvalidParameter(format!("bad corpus spec {self:?}")));
        }
        self.schedule.validate()?;
        crate::fock::check_dim(self.dim)
    }

    /// Entry `index`, drawn from its own seed `base_seed + index`.
    pub fn entry(&self, index: usize) -> CorpusEntry {
        let seed = self.base_seed.wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "corpus/params"));
        let spec = StateSpec {
            squeezing_db: rng.gen::<f64>() * self.max_squeezing_db,
            angle: rng.gen::<f64>() * TAU,
            nbar: rng.gen::<f64>() * self.max_nbar,
            loss: rng.gen::<f64>() * self.max_loss,
            phase_noise: rng.gen::<f64>() * self.max_phase_noise,
        };
        let short = rng.gen::<f64>() < self.short_fraction;
        CorpusEntry {
            index,
            seed,
            spec,
            record_len: if short {
                self.short_len
            } else {
                self.record_len
            },
        }
    }

    pub fn entries(&self) -> Vec<CorpusEntry> {
        (0..self.count).map(|i| self.entry(i)).collect()
    }

    /// Entries `range` as training samples with on-demand records; truths
    /// are computed in parallel.
    pub fn training_set(&self, range: std::ops::Range<usize>) -> Result<TrainingSet> {
        self.validate()?;
        let samples = range
            .into_par_iter()
            .map(|i| {
                let e = self.entry(i);
                Ok(TrainingSample {
                    input: SampleInput::Synthetic {
                        mixture: e.spec.mixture()?,
                        schedule: self.schedule.clone(),
                        len: e.record_len,
                        seed: e.record_seed(),
                    },
                    target: e.truth(self.dim, self.max_tail)?,
                    metadata: e.spec.metadata(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TrainingSet::new(samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub index: usize,
    pub seed: u64,
    pub spec: StateSpec,
    pub record_len: usize,
}

impl CorpusEntry {
    pub fn record_seed(&self) -> u64 {
        derive_seed(self.seed, "corpus/record")
    }

    pub fn record(&self, schedule: &PhaseSchedule) -> Result<QuadratureRecord> {
        self.spec
            .record(schedule, self.record_len, self.record_seed())
    }

    pub fn truth(&self, dim: usize, max_tail: f64) -> Result<DensityMatrix> {
        self.spec
            .density_matrix(Truncation::new(dim).with_max_tail(max_tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::quadrature_variance;
    use crate::metrics::purity;
    use approx::assert_relative_eq;

    #[test]
    fn fock_truth_agrees_with_phase_space() {
        let spec = StateSpec {
            squeezing_db: 5.0,
            angle: 0.7,
            nbar: 0.2,
            loss: 0.15,
            phase_noise: 0.08,
        };
        let rho = spec.density_matrix(60).unwrap();
        let mix = spec.mixture().unwrap();
        for th in [0.0, 0.35, 1.2, 2.5] {
            assert_relative_eq!(
                quadrature_variance(&rho, th),
                mix.variance(th),
                max_relative = 1e-8
            );
        }
        assert_relative_eq!(purity(&rho), mix.purity(), max_relative = 1e-8);
    }

    #[test]
    fn matching_levels_reproduces_markers() {
        for (sq, asq, loss) in [
            (3.76, 3.89, 0.0),
            (7.39, 12.16, 0.0),
            (7.91, 18.56, 0.0),
            (7.39, 12.16, 0.1),
        ] {
            let spec = StateSpec::matching_levels(sq, asq, loss).unwrap();
            let (s, a) = spec.levels_db().unwrap();
            assert_relative_eq!(s, sq, epsilon = 1e-9);
            assert_relative_eq!(a, asq, epsilon = 1e-9);
        }
        // anti-squeezing below squeezing with no loss is unreachable
        assert!(StateSpec::matching_levels(6.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn corpus_is_deterministic_and_in_range() {
        let c = CorpusSpec::desk(50, 9);
        let a = c.entries();
        assert_eq!(a, c.entries());
        for e in &a {
            assert!(e.spec.squeezing_db <= 8.0 && e.spec.nbar <= 0.5 && e.spec.loss <= 0.3);
            assert!(e.spec.phase_noise <= 0.1);
            assert!(e.record_len == 2048 || e.record_len == 256);
        }
        // entry i depends only on base_seed + i
        assert_eq!(CorpusSpec::desk(50, 10).entry(3).spec, c.entry(4).spec);
        let r1 = a[0].record(&c.schedule).unwrap();
        assert_eq!(r1, a[0].record(&c.schedule).unwrap());
    }

    #[test]
    fn corpus_truths_are_valid() {
        let c = CorpusSpec::desk(12, 1);
        let set = c.training_set(0..12).unwrap();
        assert_eq!(set.len(), 12);
        for s in set.samples() {
            assert!(s.target.physicality().is_physical());
        }
    }
}
