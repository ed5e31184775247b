use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sqztomo_core::degradation::{
    fit, predict_band, purity_vs_antisqueezing, purity_vs_antisqueezing_exact, DegradationFit,
    LevelPoint,
};
use sqztomo_core::homodyne::{PhaseSchedule, QuadratureRecord};
use sqztomo_core::io;
use sqztomo_core::metrics::{
    decompose, fidelity, purity, squeezing_levels, trace_distance, uniform_axis,
    wigner as wigner_grid, wigner_default, SqueezedThermalMatch, SqueezingLevels,
};
use sqztomo_core::mle::{mle_reconstruct, MleConfig};
use sqztomo_core::nn::{
    train_with, Architecture, EpochRecord, NetworkModel, TrainOptions, TrainingSet,
};
use sqztomo_core::rng::{derive_indexed, derive_seed};
use sqztomo_core::simulate::{CorpusSpec, StateSpec};
use sqztomo_core::{DensityMatrix, Truncation};

use crate::args::*;
use crate::{CmdResult, Context, Failure};

fn schedule(kind: ScheduleKind) -> PhaseSchedule {
    match kind {
        ScheduleKind::Linear => PhaseSchedule::LinearScan {
            start: 0.0,
            span: PI,
        },
        ScheduleKind::Random => PhaseSchedule::RandomUniform {
            start: 0.0,
            span: PI,
        },
    }
}

/// `stem_0003.ext` for record `i` of a multi-record run.
fn indexed_path(path: &Path, i: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("record");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{i:04}.{ext}"),
        None => format!("{stem}_{i:04}"),
    };
    path.with_file_name(name)
}

fn write_record(path: &Path, record: &QuadratureRecord, format: RecordFormat) -> CmdResult {
    match format {
        RecordFormat::Csv => io::write_record_csv(path, record)?,
        RecordFormat::Bin => io::write_record(path, record)?,
    }
    Ok(())
}

pub fn simulate(ctx: &mut Context, a: &SimulateArgs) -> CmdResult {
    if a.n == 0 || a.count == 0 {
        return Err(Failure::usage("--n and --count must be at least 1"));
    }
    if !(0.0..=1.0).contains(&a.max_tail) {
        return Err(Failure::usage("--max-tail must lie in [0, 1]"));
    }
    let dim = ctx.global.dim.unwrap_or(35);
    let spec = StateSpec {
        squeezing_db: a.sq_db,
        angle: a.angle,
        nbar: a.nbar,
        loss: a.loss,
        phase_noise: a.phase_noise,
    };
    spec.validate()?;
    let truth = spec.density_matrix(Truncation::new(dim).with_max_tail(a.max_tail))?;
    let default_name = match a.format {
        RecordFormat::Csv => "record.csv",
        RecordFormat::Bin => "record.rec",
    };
    let base = a.record.clone().unwrap_or_else(|| default_name.into());
    let sched = schedule(a.schedule);
    let seed = ctx.global.seed;
    let records: Vec<QuadratureRecord> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            spec.record(
                &sched,
                a.n,
                derive_indexed(seed, "simulate/record", i as u64),
            )
        })
        .collect::<sqztomo_core::Result<_>>()?;
    for (i, rec) in records.iter().enumerate() {
        let path = if a.count == 1 {
            base.clone()
        } else {
            indexed_path(&base, i)
        };
        let path = ctx.output(&path)?;
        write_record(&path, rec, a.format)?;
    }
    let truth_path = ctx.output(&a.truth)?;
    io::write_density(&truth_path, &truth)?;
    let (sq, asq) = spec.levels_db()?;
    println!(
        "{} record(s) of {} points; truth dim {dim}, purity {:.6}; measured levels {sq:.3}:{asq:.3} dB",
        a.count,
        a.n,
        purity(&truth)
    );
    Ok(())
}

pub fn gen_corpus(ctx: &mut Context, a: &GenCorpusArgs) -> CmdResult {
    if a.count == 0 {
        return Err(Failure::usage("--count must be at least 1"));
    }
    let spec = CorpusSpec {
        count: a.count,
        dim: ctx.global.dim.unwrap_or(12),
        base_seed: a.base_seed.unwrap_or(ctx.global.seed),
        max_squeezing_db: a.max_sq_db,
        max_nbar: a.max_nbar,
        max_loss: a.max_loss,
        max_phase_noise: a.max_phase_noise,
        record_len: a.len,
        short_fraction: a.short_fraction,
        short_len: a.short_len,
        max_tail: a.max_tail,
        schedule: PhaseSchedule::default(),
    };
    spec.validate()?;
    let dir = ctx.output_dir(&a.out)?;
    std::fs::create_dir_all(dir.join("records")).map_err(sqztomo_core::Error::from)?;
    std::fs::create_dir_all(dir.join("truths")).map_err(sqztomo_core::Error::from)?;
    let entries = spec
        .entries()
        .par_iter()
        .map(|e| io::write_corpus_entry(&dir, &spec, e))
        .collect::<sqztomo_core::Result<Vec<_>>>()?;
    io::write_corpus_index(&dir, &spec, entries)?;
    println!("{} samples written to {}", a.count, dir.display());
    Ok(())
}

fn read_input_record(ctx: &mut Context, path: &Path) -> CmdResult<QuadratureRecord> {
    let p = ctx.input(path);
    Ok(io::read_record_any(&p)?)
}

fn write_state(
    ctx: &mut Context,
    out: &Path,
    json: Option<&PathBuf>,
    rho: &DensityMatrix,
) -> CmdResult {
    let p = ctx.output(out)?;
    io::write_density(&p, rho)?;
    if let Some(j) = json {
        let p = ctx.output(j)?;
        io::write_density_json(&p, rho)?;
    }
    Ok(())
}

pub fn reconstruct_mle(ctx: &mut Context, a: &MleArgs) -> CmdResult {
    let record = read_input_record(ctx, &a.input)?;
    let cfg = MleConfig {
        dim: ctx.global.dim.unwrap_or(20),
        bin_count: a.bins,
        phase_bins: a.phase_bins,
        max_iters: a.max_iters,
        dilution: a.dilution,
        ..MleConfig::default()
    };
    cfg.validate()?;
    let out = mle_reconstruct(&record, &cfg)?;
    write_state(ctx, &a.out, a.json.as_ref(), &out.rho)?;
    if let Some(d) = &a.diagnostics {
        let p = ctx.output(d)?;
        io::write_json(&p, &out.diagnostics)?;
    }
    let d = &out.diagnostics;
    println!(
        "{} iterations (converged: {}), log-likelihood {:.6}, {:.1} ms",
        d.iterations, d.converged, d.log_likelihood, d.wall_time_ms
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainReport<'a> {
    architecture: &'a Architecture,
    param_count: usize,
    options: &'a TrainOptions,
    train_samples: usize,
    validation_samples: usize,
    history: &'a [EpochRecord],
    diverged_at: Option<usize>,
}

pub fn train(ctx: &mut Context, a: &TrainArgs) -> CmdResult {
    let corpus = ctx.input(&a.corpus);
    let (index, set) = io::read_corpus(&corpus)?;
    let dim = index.spec.dim;
    if let Some(d) = ctx.global.dim {
        if d != dim {
            return Err(Failure::usage(format!(
                "--dim {d} does not match the corpus dim {dim}"
            )));
        }
    }
    if !(0.0..1.0).contains(&a.validation_fraction) {
        return Err(Failure::usage("--validation-fraction must lie in [0, 1)"));
    }
    let arch = match a.arch {
        ArchKind::Desk => Architecture::desk(dim),
        ArchKind::Tiny => Architecture::tiny(dim, 256),
        ArchKind::PaperScale => {
            let arch = Architecture::paper_scale();
            if arch.dim != dim {
                return Err(Failure::usage(format!(
                    "the paper-scale architecture needs a dim-{} corpus, found dim {dim}",
                    arch.dim
                )));
            }
            arch
        }
    };
    let n = set.len();
    let n_val = ((n as f64) * a.validation_fraction).round() as usize;
    let n_train = n - n_val;
    if n_train == 0 {
        return Err(Failure::usage(
            "no training samples left after the validation split",
        ));
    }
    let samples = set.samples();
    let train_set = TrainingSet::new(samples[..n_train].to_vec())?;
    let validation = (n_val > 0)
        .then(|| TrainingSet::new(samples[n_train..].to_vec()))
        .transpose()?;
    let opts = TrainOptions {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        momentum: a.momentum,
        cosine: !a.constant_lr,
        seed: derive_seed(ctx.global.seed, "train/order"),
    };
    let init = NetworkModel::initialize(arch, derive_seed(ctx.global.seed, "train/init"))?;
    let out = train_with(
        &init,
        &train_set,
        validation.as_ref(),
        &opts,
        &mut |e| match (e.validation_loss, e.validation_fidelity) {
            (Some(l), Some(f)) => eprintln!(
                "epoch {:>3}  loss {:.5e}  val loss {l:.5e}  val fidelity {f:.4}  lr {:.3e}",
                e.epoch, e.mean_loss, e.learning_rate
            ),
            _ => eprintln!(
                "epoch {:>3}  loss {:.5e}  lr {:.3e}",
                e.epoch, e.mean_loss, e.learning_rate
            ),
        },
    )?;
    let model_path = ctx.output(&a.out)?;
    io::write_model(&model_path, &out.model)?;
    let history_path = ctx.output(&a.history)?;
    io::write_json(
        &history_path,
        &TrainReport {
            architecture: out.model.architecture(),
            param_count: out.model.param_count(),
            options: &opts,
            train_samples: n_train,
            validation_samples: n_val,
            history: &out.history,
            diverged_at: out.diverged_at,
        },
    )?;
    if let Some(epoch) = out.diverged_at {
        eprintln!("training diverged at epoch {epoch}; the last finite checkpoint was kept");
    }
    println!(
        "trained {} parameters on {n_train} samples for {} epochs",
        out.model.param_count(),
        out.history.len()
    );
    Ok(())
}

fn load_model(ctx: &mut Context, path: &Path) -> CmdResult<NetworkModel> {
    let p = ctx.input(path);
    if !p.is_file() {
        return Err(Failure::data(format!(
            "model file {} not found; train one with `sqztomo train --corpus <dir> --out {}`",
            p.display(),
            p.display()
        )));
    }
    Ok(io::read_model(&p)?)
}

pub fn reconstruct_nn(ctx: &mut Context, a: &NnArgs) -> CmdResult {
    let model = load_model(ctx, &a.model)?;
    if let Some(d) = ctx.global.dim {
        if d != model.dim() {
            return Err(Failure::usage(format!(
                "--dim {d} does not match the model dim {}",
                model.dim()
            )));
        }
    }
    let record = read_input_record(ctx, &a.input)?;
    let pred = model.predict_density(&record)?;
    write_state(ctx, &a.out, a.json.as_ref(), &pred.rho)?;
    if a.time {
        println!(
            "inference wall time: {:.3} ms",
            pred.wall_time.as_secs_f64() * 1e3
        );
    }
    Ok(())
}

fn read_state(ctx: &mut Context, path: &Path) -> CmdResult<DensityMatrix> {
    let p = ctx.input(path);
    let json = p
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if json {
        io::read_density_json(&p)?
    } else {
        io::read_density(&p)?
    })
}

#[derive(Serialize)]
struct Comparison {
    fidelity: f64,
    trace_distance: f64,
}

#[derive(Serialize)]
struct EvaluationReport {
    dim: usize,
    purity: f64,
    levels: SqueezingLevels,
    sigma1: f64,
    sigma_non: f64,
    /// Top eigenvalue degenerate: the dominant component is not unique.
    ambiguous: bool,
    residual_match: Option<SqueezedThermalMatch>,
    reference: Option<Comparison>,
}

pub fn evaluate(ctx: &mut Context, a: &EvaluateArgs) -> CmdResult {
    let rho = read_state(ctx, &a.rho)?;
    let reference = match &a.reference {
        Some(r) => {
            let sigma = read_state(ctx, r)?;
            Some(Comparison {
                fidelity: fidelity(&rho, &sigma)?,
                trace_distance: trace_distance(&rho, &sigma)?,
            })
        }
        None => None,
    };
    let dec = decompose(&rho);
    let report = EvaluationReport {
        dim: rho.dim(),
        purity: purity(&rho),
        levels: squeezing_levels(&rho),
        sigma1: dec.sigma1,
        sigma_non: dec.sigma_non,
        ambiguous: dec.ambiguous,
        residual_match: dec.residual_match()?,
        reference,
    };
    let p = ctx.output(&a.report)?;
    io::write_json(&p, &report)?;
    println!(
        "purity {:.6}  sigma1 {:.6}  levels {:.3}:{:.3} dB{}",
        report.purity,
        report.sigma1,
        report.levels.squeezing_db,
        report.levels.anti_squeezing_db,
        report
            .reference
            .as_ref()
            .map(|c| format!("  fidelity {:.6}", c.fidelity))
            .unwrap_or_default()
    );
    Ok(())
}

pub fn wigner(ctx: &mut Context, a: &WignerArgs) -> CmdResult {
    let rho = read_state(ctx, &a.rho)?;
    if a.points < 2 {
        return Err(Failure::usage("--points must be at least 2"));
    }
    let grid = match a.extent {
        None if a.points == sqztomo_core::metrics::DEFAULT_WIGNER_POINTS => wigner_default(&rho)?,
        None => {
            let axis = sqztomo_core::metrics::WignerGrid::default_axis(&rho, a.points);
            wigner_grid(&rho, &axis, &axis)?
        }
        Some(e) if e.is_finite() && e > 0.0 => {
            let axis = uniform_axis(-e, e, a.points);
            wigner_grid(&rho, &axis, &axis)?
        }
        Some(_) => return Err(Failure::usage("--extent must be positive")),
    };
    let p = ctx.output(&a.out)?;
    io::write_text(&p, &io::wigner_to_csv(&grid))?;
    println!(
        "{}×{} grid, min W {:.4e}, integral {:.6}",
        a.points,
        a.points,
        grid.min(),
        grid.integral()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    fit: &'a DegradationFit,
    /// Squared Mahalanobis radius of the ±2σ-equivalent region.
    two_sigma_radius2: f64,
    points: &'a [LevelPoint],
}

pub fn fit_degradation(ctx: &mut Context, a: &FitArgs) -> CmdResult {
    let path = ctx.input(&a.points);
    let points = io::read_level_points_csv(&path)?;
    let f = fit(&points)?;
    if !(a.step_db > 0.0 && a.max_ideal_db >= 0.0 && a.max_ideal_db.is_finite()) {
        return Err(Failure::usage(
            "--step-db must be positive and --max-ideal-db finite",
        ));
    }
    let steps = (a.max_ideal_db / a.step_db).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * a.step_db).collect();
    let p = ctx.output(&a.out)?;
    io::write_json(
        &p,
        &FitReport {
            fit: &f,
            two_sigma_radius2: f.two_sigma_radius2(),
            points: &points,
        },
    )?;
    if let Some(b) = &a.band {
        let p = ctx.output(b)?;
        io::write_text(&p, &io::band_to_csv(&predict_band(&f, &grid)))?;
    }
    if let Some(pp) = &a.purity {
        let rows = match a.purity_route {
            PurityRoute::Fock => purity_vs_antisqueezing(&f, &grid, ctx.global.dim.unwrap_or(100))?,
            PurityRoute::PhaseSpace => purity_vs_antisqueezing_exact(&f, &grid)?,
        };
        let p = ctx.output(pp)?;
        io::write_text(&p, &io::purity_to_csv(&rows))?;
    }
    if !f.converged {
        eprintln!("warning: the fit did not converge; the best iterate is reported");
    }
    println!(
        "L = {:.6} ± {:.6}, theta = {:.6} ± {:.6} rad, rms {:.4} dB ({} points)",
        f.loss,
        f.covariance[0][0].sqrt(),
        f.theta,
        f.covariance[1][1].sqrt(),
        f.residual_rms,
        f.points
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct CompareCell {
    sq_db: f64,
    length: usize,
    states: usize,
    nn_fidelity_mean: f64,
    nn_fidelity_std: f64,
    mle_fidelity_mean: f64,
    mle_fidelity_std: f64,
    nn_ms_mean: f64,
    mle_ms_mean: f64,
    mle_unconverged: usize,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    dim: usize,
    loss: f64,
    phase_noise: f64,
    nbar: f64,
    cells: &'a [CompareCell],
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

struct Trial {
    nn_fidelity: f64,
    mle_fidelity: f64,
    nn_ms: f64,
    mle_ms: f64,
    mle_converged: bool,
}

pub fn compare(ctx: &mut Context, a: &CompareArgs) -> CmdResult {
    if a.lengths.is_empty() || a.sq_db.is_empty() {
        return Err(Failure::usage(
            "--lengths and --sq-db need at least one value",
        ));
    }
    if a.lengths.contains(&0) || a.states == 0 {
        return Err(Failure::usage("lengths and --states must be at least 1"));
    }
    let model = load_model(ctx, &a.model)?;
    let dim = model.dim();
    if let Some(d) = ctx.global.dim {
        if d != dim {
            return Err(Failure::usage(format!(
                "--dim {d} does not match the model dim {dim}"
            )));
        }
    }
    let seed = ctx.global.seed;
    let mle_cfg = MleConfig {
        max_iters: a.mle_max_iters,
        ..MleConfig::with_dim(dim)
    };
    mle_cfg.validate()?;
    let sched = PhaseSchedule::default();
    let mut states = Vec::new();
    for (li, &sq) in a.sq_db.iter().enumerate() {
        for s in 0..a.states {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(
                seed,
                "compare/angle",
                (li * a.states + s) as u64,
            ));
            let spec = StateSpec {
                squeezing_db: sq,
                angle: rng.gen::<f64>() * 2.0 * PI,
                nbar: a.nbar,
                loss: a.loss,
                phase_noise: a.phase_noise,
            };
            spec.validate()?;
            let truth = spec.density_matrix(Truncation::new(dim).with_max_tail(a.max_tail))?;
            states.push((li, s, spec, truth));
        }
    }
    let jobs: Vec<(usize, usize, usize)> = (0..a.lengths.len())
        .flat_map(|k| (0..states.len()).map(move |j| (k, j, 0)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(k, j, _)| -> CmdResult<Trial> {
            let len = a.lengths[k];
            let (_, _, spec, truth) = &states[j];
            let rseed = derive_indexed(seed, &format!("compare/record/{len}"), j as u64);
            let record = spec.record(&sched, len, rseed)?;
            let pred = model.predict_density(&record)?;
            let t = Instant::now();
            let mle = mle_reconstruct(&record, &mle_cfg)?;
            let mle_ms = t.elapsed().as_secs_f64() * 1e3;
            Ok(Trial {
                nn_fidelity: fidelity(&pred.rho, truth)?,
                mle_fidelity: fidelity(&mle.rho, truth)?,
                nn_ms: pred.wall_time.as_secs_f64() * 1e3,
                mle_ms,
                mle_converged: mle.diagnostics.converged,
            })
        })
        .collect::<CmdResult<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (li, &sq) in a.sq_db.iter().enumerate() {
        for (k, &len) in a.lengths.iter().enumerate() {
            let cell: Vec<&Trial> = jobs
                .iter()
                .zip(&trials)
                .filter(|((kk, j, _), _)| *kk == k && states[*j].0 == li)
                .map(|(_, t)| t)
                .collect();
            let col = |f: fn(&Trial) -> f64| cell.iter().map(|t| f(t)).collect::<Vec<f64>>();
            let (nn_m, nn_s) = mean_std(&col(|t| t.nn_fidelity));
            let (mle_m, mle_s) = mean_std(&col(|t| t.mle_fidelity));
            cells.push(CompareCell {
                sq_db: sq,
                length: len,
                states: cell.len(),
                nn_fidelity_mean: nn_m,
                nn_fidelity_std: nn_s,
                mle_fidelity_mean: mle_m,
                mle_fidelity_std: mle_s,
                nn_ms_mean: mean_std(&col(|t| t.nn_ms)).0,
                mle_ms_mean: mean_std(&col(|t| t.mle_ms)).0,
                mle_unconverged: cell.iter().filter(|t| !t.mle_converged).count(),
            });
        }
    }
    let mut csv = String::from(
        "sq_db,length,states,nn_fidelity_mean,nn_fidelity_std,mle_fidelity_mean,mle_fidelity_std,nn_ms_mean,mle_ms_mean,mle_unconverged\n",
    );
    for c in &cells {
        csv.push_str(&format!(
            "{:?},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
            c.sq_db,
            c.length,
            c.states,
            c.nn_fidelity_mean,
            c.nn_fidelity_std,
            c.mle_fidelity_mean,
            c.mle_fidelity_std,
            c.nn_ms_mean,
            c.mle_ms_mean,
            c.mle_unconverged
        ));
    }
    let csv_path = ctx.output(&a.out.with_extension("csv"))?;
    io::write_text(&csv_path, &csv)?;
    let json_path = ctx.output(&a.out.with_extension("json"))?;
    io::write_json(
        &json_path,
        &CompareReport {
            dim,
            loss: a.loss,
            phase_noise: a.phase_noise,
            nbar: a.nbar,
            cells: &cells,
        },
    )?;
    for c in &cells {
        println!(
            "{:>5.2} dB  {:>5} pts  NN {:.4} ± {:.4} ({:.2} ms)  MLE {:.4} ± {:.4} ({:.1} ms)",
            c.sq_db,
            c.length,
            c.nn_fidelity_mean,
            c.nn_fidelity_std,
            c.nn_ms_mean,
            c.mle_fidelity_mean,
            c.mle_fidelity_std,
            c.mle_ms_mean
        );
    }
    Ok(())
}
