//! Fixed training recipes and an on-disk cache of their trained models.
//!
//! A cached model is reused only when its sidecar JSON carries exactly the
//! recipe being asked for; anything else triggers retraining.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{read_json, read_model, write_json, write_model};
use crate::nn::{train_with, Architecture, EpochRecord, NetworkModel, TrainOptions};
use crate::simulate::CorpusSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecipe {
    pub name: String,
    pub corpus: CorpusSpec,
    /// Corpus entries `[0, train_count)` train the model.
    pub train_count: usize,
    /// Entries `[train_count, train_count + validation_count)` are monitored.
    pub validation_count: usize,
    pub architecture: Architecture,
    pub init_seed: u64,
    pub options: TrainOptions,
}

/// Sidecar written next to a cached model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecipeRecord {
    pub recipe: TrainingRecipe,
    pub history: Vec<EpochRecord>,
    pub diverged_at: Option<usize>,
    pub wall_time_s: f64,
}

impl TrainingRecipe {
    /// 20k training states of the desk corpus (dim 12, up to 8 dB).
    pub fn desk() -> Self {
        let (train_count, validation_count) = (20_000, 1_000);
        Self {
            name: "desk12".into(),
            corpus: CorpusSpec::desk(train_count + validation_count, 1_000),
            train_count,
            validation_count,
            architecture: Architecture::desk(12),
            init_seed: 1,
            options: TrainOptions {
                epochs: 30,
                batch_size: 32,
                learning_rate: 0.1,
                seed: 2,
                ..TrainOptions::default()
            },
        }
    }

    /// 12k states at dim 35 spanning 0–13 dB with mild loss and phase
    /// noise, enough to reconstruct the marker A/B levels.
    pub fn markers() -> Self {
        let (train_count, validation_count) = (12_000, 500);
        Self {
            name: "markers35".into(),
            corpus: CorpusSpec {
                dim: 35,
                max_squeezing_db: 13.0,
                max_nbar: 0.05,
                max_loss: 0.15,
                max_phase_noise: 0.12,
                short_fraction: 0.0,
                ..CorpusSpec::desk(train_count + validation_count, 5_000)
            },
            train_count,
            validation_count,
            architecture: Architecture::desk(35),
            init_seed: 3,
            options: TrainOptions {
                epochs: 25,
                batch_size: 32,
                learning_rate: 0.1,
                seed: 4,
                ..TrainOptions::default()
            },
        }
    }

    /// Held-out corpus drawn from the same ranges with disjoint seeds.
    pub fn held_out(&self, count: usize) -> CorpusSpec {
        CorpusSpec {
            count,
            base_seed: self.corpus.base_seed.wrapping_add(1 << 32),
            ..self.corpus.clone()
        }
    }

    pub fn model_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.model", self.name))
    }

    pub fn record_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.json", self.name))
    }

    pub fn train(
        &self,
        observer: &mut dyn FnMut(&EpochRecord),
    ) -> Result<(NetworkModel, RecipeRecord)> {
        let start = std::time::Instant::now();
        let total = self.train_count + self.validation_count;
        let corpus = CorpusSpec {
            count: total,
            ..self.corpus.clone()
        };
        let data = corpus.training_set(0..self.train_count)?;
        let validation = (self.validation_count > 0)
            .then(|| corpus.training_set(self.train_count..total))
            .transpose()?;
        let init = NetworkModel::initialize(self.architecture.clone(), self.init_seed)?;
        let out = train_with(&init, &data, validation.as_ref(), &self.options, observer)?;
        let record = RecipeRecord {
            recipe: self.clone(),
            history: out.history,
            diverged_at: out.diverged_at,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((out.model, record))
    }

    /// The cached model for this recipe, if present and made by it.
    pub fn load_cached(&self, dir: &Path) -> Option<(NetworkModel, RecipeRecord)> {
        let record: RecipeRecord = read_json(&self.record_path(dir)).ok()?;
        if record.recipe != *self {
            return None;
        }
        let model = read_model(&self.model_path(dir)).ok()?;
        (*model.architecture() == self.architecture).then_some((model, record))
    }

    /// Cached model, or a freshly trained one written to `dir`.
    pub fn cached_or_train(
        &self,
        dir: &Path,
        observer: &mut dyn FnMut(&EpochRecord),
    ) -> Result<(NetworkModel, RecipeRecord)> {
        if let Some(hit) = self.load_cached(dir) {
            return Ok(hit);
        }
        let (model, record) = self.train(observer)?;
        std::fs::create_dir_all(dir)?;
        write_model(&self.model_path(dir), &model)?;
        write_json(&self.record_path(dir), &record)?;
        Ok((model, record))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrainingRecipe {
        let mut r = TrainingRecipe::desk();
        r.name = "small".into();
        r.train_count = 6;
        r.validation_count = 2;
        r.corpus.count = 8;
        r.corpus.dim = 4;
        r.corpus.max_squeezing_db = 1.0;
        r.corpus.max_nbar = 0.05;
        r.corpus.record_len = 64;
        r.corpus.short_len = 32;
        r.architecture = Architecture::tiny(4, 64);
        r.options.epochs = 2;
        r.options.batch_size = 2;
        r
    }

    #[test]
    fn cache_round_trip_and_invalidation() {
        let dir = tempfile::tempdir().unwrap();
        let r = small();
        let (m, rec) = r.cached_or_train(dir.path(), &mut |_| {}).unwrap();
        assert_eq!(rec.history.len(), 2);
        let (m2, _) = r.load_cached(dir.path()).unwrap();
        assert_eq!(m.weights(), m2.weights());
        let mut other = r.clone();
        other.options.epochs = 3;
        assert!(other.load_cached(dir.path()).is_none());
    }

    #[test]
    fn held_out_is_disjoint() {
        let r = TrainingRecipe::desk();
        let h = r.held_out(10);
        let train_seeds: std::collections::HashSet<u64> = (0..r.corpus.count)
            .map(|i| r.corpus.entry(i).seed)
            .collect();
        assert!(h.entries().iter().all(|e| !train_seeds.contains(&e.seed)));
    }
}
