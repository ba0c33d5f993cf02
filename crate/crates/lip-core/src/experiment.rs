//! Reproducible corruption sweeps: corrupt labels at several noise levels,
//! fit, repair, and record accuracies, spectra, subspace similarity, and
//! perturbation bounds for every trial.
//!
//! Determinism contract: identical plans (including seeds) produce
//! byte-identical `report.json`, `bounds.json`, and CSV artifacts. Wall-clock
//! measurements are written to a separate `timings.json`, which is the one
//! artifact excluded from that guarantee.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Axis;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{bound_report, similarity_grid, spectrum, BoundReport, SpectrumReport};
use crate::error::{Error, Result};
use crate::linmodel::{accuracy, predict, ridge_fit, RidgeConfig};
use crate::lip::{default_k, lip_apply, select_k, svd_thin, LipConfig};
use crate::matio::{validate_manifest, Dataset, DatasetManifest, LabelKind, Matrix};
use crate::noise::{corrupt, NoiseSpec};
use crate::synth::{gen_synthetic, SyntheticSpec};

/// Where the sweep's data comes from: generated clusters or files on disk.
/// Manifest datasets must carry ground-truth one-hot labels and are used for
/// both fitting and evaluation (no held-out split is available for them).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Manifest(DatasetManifest),
}

/// How the preserved-component count is chosen per trial: a fixed `{"k": N}`,
/// `"default"` for `ceil(0.8 * l)`, or `"grid"` for a validation-set search
/// over `grid_candidates`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSelection {
    Fixed(LipConfig),
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: DatasetSource,
    pub noise_levels: Vec<NoiseSpec>,
    pub ridge: RidgeConfig,
    pub lip: KSelection,
    /// Candidates for `"grid"` selection; empty means all of `1..=min(q, l)`.
    #[serde(default)]
    pub grid_candidates: Vec<usize>,
    pub trials: usize,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KMode {
    Fixed(usize),
    Default,
    Grid,
}

impl ExperimentPlan {
    fn k_mode(&self) -> Result<KMode> {
        match &self.lip {
            KSelection::Fixed(cfg) => {
                if cfg.k == 0 {
                    return Err(Error::Config("plan: k must be at least 1".to_string()));
                }
                Ok(KMode::Fixed(cfg.k))
            }
            KSelection::Keyword(word) => match word.as_str() {
                "grid" => Ok(KMode::Grid),
                "default" => Ok(KMode::Default),
                other => Err(Error::Config(format!(
                    "plan: lip must be {{\"k\": N}}, \"default\", or \"grid\", got {other:?}"
                ))),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("plan: trials must be at least 1".to_string()));
        }
        if self.noise_levels.is_empty() {
            return Err(Error::Config(
                "plan: noise_levels must be nonempty".to_string(),
            ));
        }
        if !self.ridge.lambda.is_finite() || self.ridge.lambda < 0.0 {
            return Err(Error::Config(format!(
                "plan: lambda must be finite and non-negative, got {}",
                self.ridge.lambda
            )));
        }
        self.k_mode().map(|_| ())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let plan: ExperimentPlan = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Mean and sample standard deviation (0 when fewer than two values).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Stat {
        if values.is_empty() {
            return Stat {
                mean: f64::NAN,
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let std = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (values.len() - 1) as f64;
            var.sqrt()
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub k_used: usize,
    pub realized_flip_rate: f64,
    pub accuracy_clean_w: f64,
    pub accuracy_noisy_w: f64,
    pub accuracy_psp_only: f64,
    pub accuracy_lip: f64,
    pub bound_report: BoundReport,
    /// Artifact paths, relative to the experiment output directory.
    pub spectrum_path: String,
    pub similarity_path: String,
    pub bounds_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Ok(TrialMetrics),
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub noise_index: usize,
    pub trial: usize,
    /// Seed actually fed to the corruption draw for this trial.
    pub seed_used: u64,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelAggregate {
    pub noise_index: usize,
    pub p: f64,
    pub trials_ok: usize,
    pub accuracy_clean_w: Stat,
    pub accuracy_noisy_w: Stat,
    pub accuracy_psp_only: Stat,
    pub accuracy_lip: Stat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub plan: ExperimentPlan,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<LevelAggregate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialTiming {
    pub noise_index: usize,
    pub trial: usize,
    pub fit_ms: f64,
    pub lip_apply_ms: f64,
}

/// Per-trial corruption seed: decorrelates trials drawn from one level seed
/// (and adjacent level seeds) via a SplitMix64 step.
pub fn derive_trial_seed(level_seed: u64, trial: usize) -> u64 {
    splitmix64(level_seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for the validation-split shuffle; corruption uses row streams
/// `0..n` and the removal-selection stream.
const SPLIT_STREAM: u64 = u64::MAX - 1;

fn load_dataset(source: &DatasetSource, base_dir: &Path) -> Result<(Dataset, Dataset)> {
    match source {
        DatasetSource::Synthetic(spec) => gen_synthetic(spec),
        DatasetSource::Manifest(manifest) => {
            let data = validate_manifest(manifest, base_dir)?;
            if data.label_kind != LabelKind::OneHotTruth {
                return Err(Error::Config(
                    "experiment datasets need one_hot_truth labels so corruption and accuracy \
                     are well-defined"
                        .to_string(),
                ));
            }
            Ok((data.clone(), data))
        }
    }
}

struct TrialContext<'a> {
    x_train: &'a Matrix,
    g_train: &'a Matrix,
    x_test: &'a Matrix,
    g_test: &'a Matrix,
    clean_spectrum: &'a [f64],
    clean_v: &'a Matrix,
    accuracy_clean: f64,
    lambda: f64,
    k_mode: KMode,
    grid_candidates: &'a [usize],
    output_dir: &'a Path,
}

fn run_trial(
    ctx: &TrialContext<'_>,
    noise_index: usize,
    level: &NoiseSpec,
    trial: usize,
    seed_used: u64,
) -> Result<(TrialMetrics, TrialTiming)> {
    let spec = NoiseSpec {
        seed: seed_used,
        ..level.clone()
    };
    let corrupted = corrupt(ctx.g_train, &spec)?;

    let fit_start = Instant::now();
    let w_noisy = ridge_fit(
        ctx.x_train,
        &corrupted.labels,
        &RidgeConfig { lambda: ctx.lambda },
    )?
    .weights;
    let fit_ms = fit_start.elapsed().as_secs_f64() * 1e3;

    let accuracy_noisy_w = accuracy(&predict(ctx.x_test, &w_noisy)?, ctx.g_test)?;

    let r = w_noisy.nrows().min(w_noisy.ncols());
    let k_used = match ctx.k_mode {
        KMode::Fixed(k) => {
            if k > r {
                return Err(Error::Config(format!(
                    "plan: k = {k} exceeds min(q, l) = {r}"
                )));
            }
            k
        }
        KMode::Default => default_k(w_noisy.nrows(), w_noisy.ncols()),
        KMode::Grid => {
            let all: Vec<usize>;
            let candidates: &[usize] = if ctx.grid_candidates.is_empty() {
                all = (1..=r).collect();
                &all
            } else {
                ctx.grid_candidates
            };
            let n = ctx.x_train.nrows();
            let mut rng = ChaCha8Rng::seed_from_u64(seed_used);
            rng.set_stream(SPLIT_STREAM);
            let mut idx: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            let val = &idx[..n / 2];
            let x_val = ctx.x_train.select(Axis(0), val);
            let y_val = corrupted.labels.select(Axis(0), val);
            let g_val = ctx.g_train.select(Axis(0), val);
            select_k(&x_val, &y_val, &g_val, &w_noisy, candidates)?
        }
    };

    let lip_start = Instant::now();
    let repaired = lip_apply(
        ctx.x_train,
        &corrupted.labels,
        &w_noisy,
        &LipConfig { k: k_used },
    )?;
    let lip_apply_ms = lip_start.elapsed().as_secs_f64() * 1e3;

    let accuracy_psp_only = accuracy(&predict(ctx.x_test, &repaired.w_k)?, ctx.g_test)?;
    let accuracy_lip = accuracy(&predict(ctx.x_test, &repaired.w_star)?, ctx.g_test)?;

    let noisy_factors = svd_thin(&w_noisy)?;
    let report = SpectrumReport::new(
        vec![
            "clean".to_string(),
            "noisy".to_string(),
            "psp".to_string(),
            "lip".to_string(),
        ],
        vec![
            Some(ctx.accuracy_clean),
            Some(accuracy_noisy_w),
            Some(accuracy_psp_only),
            Some(accuracy_lip),
        ],
        vec![
            ctx.clean_spectrum.to_vec(),
            noisy_factors.s.clone(),
            spectrum(&repaired.w_k)?,
            spectrum(&repaired.w_star)?,
        ],
    )?;

    let r_grid = ctx.clean_v.ncols().min(noisy_factors.v.ncols());
    let grid = similarity_grid(ctx.clean_v, &noisy_factors.v, r_grid, r_grid)?;

    let bounds = bound_report(
        ctx.x_train,
        ctx.g_train,
        &corrupted.mask,
        ctx.lambda,
        k_used,
    )?;

    let rel_dir = format!("level{noise_index:02}/trial{trial:02}");
    let trial_dir = ctx.output_dir.join(&rel_dir);
    fs::create_dir_all(&trial_dir).map_err(|source| Error::Io {
        path: trial_dir.clone(),
        source,
    })?;
    let write = |name: &str, contents: String| -> Result<String> {
        let path = trial_dir.join(name);
        fs::write(&path, contents).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(format!("{rel_dir}/{name}"))
    };
    let spectrum_path = write("spectrum.csv", report.to_csv())?;
    let similarity_path = write("similarity.csv", grid.to_csv())?;
    let bounds_path = write("bounds.json", {
        let mut s = serde_json::to_string_pretty(&bounds).expect("report serializes");
        s.push('\n');
        s
    })?;

    Ok((
        TrialMetrics {
            k_used,
            realized_flip_rate: corrupted.realized_flip_rate,
            accuracy_clean_w: ctx.accuracy_clean,
            accuracy_noisy_w,
            accuracy_psp_only,
            accuracy_lip,
            bound_report: bounds,
            spectrum_path,
            similarity_path,
            bounds_path,
        },
        TrialTiming {
            noise_index,
            trial,
            fit_ms,
            lip_apply_ms,
        },
    ))
}

/// Runs the full sweep. `base_dir` anchors relative paths found in the plan
/// (manifest files and `output_dir`). A failed trial is recorded and skipped;
/// it never aborts the sweep or another trial.
pub fn run_experiment(plan: &ExperimentPlan, base_dir: &Path) -> Result<ExperimentReport> {
    plan.validate()?;
    let output_dir = if plan.output_dir.is_absolute() {
        plan.output_dir.clone()
    } else {
        base_dir.join(&plan.output_dir)
    };
    fs::create_dir_all(&output_dir).map_err(|source| Error::Io {
        path: output_dir.clone(),
        source,
    })?;

    let (train, test) = load_dataset(&plan.dataset, base_dir)?;
    let lambda = plan.ridge.lambda;
    let w_clean = ridge_fit(&train.features, &train.labels, &plan.ridge)?.weights;
    let accuracy_clean = accuracy(&predict(&test.features, &w_clean)?, &test.labels)?;
    let clean_factors = svd_thin(&w_clean)?;

    let ctx = TrialContext {
        x_train: &train.features,
        g_train: &train.labels,
        x_test: &test.features,
        g_test: &test.labels,
        clean_spectrum: &clean_factors.s,
        clean_v: &clean_factors.v,
        accuracy_clean,
        lambda,
        k_mode: plan.k_mode()?,
        grid_candidates: &plan.grid_candidates,
        output_dir: &output_dir,
    };

    let mut trials = Vec::new();
    let mut timings = Vec::new();
    let mut aggregates = Vec::new();
    for (noise_index, level) in plan.noise_levels.iter().enumerate() {
        let mut ok: Vec<&TrialMetrics> = Vec::new();
        let mut level_records = Vec::new();
        for trial in 0..plan.trials {
            let seed_used = derive_trial_seed(level.seed, trial);
            let outcome = match run_trial(&ctx, noise_index, level, trial, seed_used) {
                Ok((metrics, timing)) => {
                    timings.push(timing);
                    TrialOutcome::Ok(metrics)
                }
                Err(e) => TrialOutcome::Failed {
                    error: e.to_string(),
                },
            };
            level_records.push(TrialRecord {
                noise_index,
                trial,
                seed_used,
                outcome,
            });
        }
        for record in &level_records {
            if let TrialOutcome::Ok(metrics) = &record.outcome {
                ok.push(metrics);
            }
        }
        let collect = |f: fn(&TrialMetrics) -> f64| -> Vec<f64> { ok.iter().map(|m| f(m)).collect() };
        aggregates.push(LevelAggregate {
            noise_index,
            p: level.p,
            trials_ok: ok.len(),
            accuracy_clean_w: Stat::of(&collect(|m| m.accuracy_clean_w)),
            accuracy_noisy_w: Stat::of(&collect(|m| m.accuracy_noisy_w)),
            accuracy_psp_only: Stat::of(&collect(|m| m.accuracy_psp_only)),
            accuracy_lip: Stat::of(&collect(|m| m.accuracy_lip)),
        });
        trials.extend(level_records);
    }

    let report = ExperimentReport {
        plan: plan.clone(),
        trials,
        aggregates,
    };
    let write_json = |name: &str, json: String| -> Result<()> {
        let path = output_dir.join(name);
        fs::write(&path, json).map_err(|source| Error::Io { path, source })
    };
    let mut report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    report_json.push('\n');
    write_json("report.json", report_json)?;
    let mut timings_json = serde_json::to_string_pretty(&timings).expect("timings serialize");
    timings_json.push('\n');
    write_json("timings.json", timings_json)?;
    Ok(report)
}
