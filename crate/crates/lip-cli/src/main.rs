//! `lip` — spectral repair of linear classifiers trained on noisy labels,
//! and the measurement tools around it.
//!
//! One subcommand per library capability: generate data, corrupt labels,
//! fit ridge weights, repair a weight matrix, inspect spectra and subspace
//! similarity, check perturbation bounds, and run full experiment sweeps.
//!
//! Every command prints a JSON summary to stdout on success. On failure a
//! single JSON object `{"error": {"class", "message"}}` goes to stderr and
//! the process exits 2 (validation), 3 (numerical), or 4 (I/O).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lip_core::analysis::{bound_report, similarity_grid, spectrum, SpectrumReport};
use lip_core::experiment::{run_experiment, ExperimentPlan};
use lip_core::linmodel::{fit_objective, ridge_fit, RidgeConfig};
use lip_core::lip::{default_k, lip_apply, svd_thin, LipConfig};
use lip_core::matio::{load_matrix, save_matrix, DatasetManifest, LabelKind};
use lip_core::noise::{corrupt, mask_frobenius, NoiseKind, NoiseSpec};
use lip_core::synth::{gen_synthetic, SyntheticSpec};
use lip_core::{Error, ErrorClass};

#[derive(Parser)]
#[command(
    name = "lip",
    version,
    about = "Repair linear classifier weights trained on noisy labels by \
             keeping their leading singular subspace and refitting the tail"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-cluster dataset as CSV files plus
    /// train/test manifests.
    GenData(GenDataArgs),
    /// Corrupt one-hot truth labels with a seeded noise model.
    Corrupt(CorruptArgs),
    /// Fit ridge-regression weights W = (X'X + lambda I)^-1 X'Y.
    Fit(FitArgs),
    /// Repair a weight matrix against its training data: keep the top-k
    /// singular components, refit the trailing singular values.
    Apply(ApplyArgs),
    /// Singular-value spectra of one or more weight matrices.
    Spectrum(SpectrumArgs),
    /// Subspace-similarity grid between the right singular subspaces of
    /// two weight matrices.
    Subspace(SubspaceArgs),
    /// Measured perturbation of the weights under a label corruption,
    /// next to its a priori bounds.
    Bounds(BoundsArgs),
    /// Run an experiment plan: sweep noise levels and trials, writing all
    /// artifacts under the plan's output directory.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKindArg {
    /// Flip each label entry independently with probability p.
    CandidateFlip,
    /// Candidate flips, then remove the true label from a fraction of rows.
    CandidateFlipWithTruthRemoval,
    /// Replace the true label by a uniform different class with probability p.
    Symmetric,
    /// Replace class j by class (j+1) mod l with probability p.
    Asymmetric,
}

impl From<NoiseKindArg> for NoiseKind {
    fn from(kind: NoiseKindArg) -> NoiseKind {
        match kind {
            NoiseKindArg::CandidateFlip => NoiseKind::CandidateFlip,
            NoiseKindArg::CandidateFlipWithTruthRemoval => {
                NoiseKind::CandidateFlipWithTruthRemoval
            }
            NoiseKindArg::Symmetric => NoiseKind::Symmetric,
            NoiseKindArg::Asymmetric => NoiseKind::Asymmetric,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct GenDataArgs {
    /// Total sample count across both splits.
    #[arg(long)]
    n: usize,
    /// Feature dimension.
    #[arg(long)]
    q: usize,
    /// Class count.
    #[arg(long)]
    l: usize,
    /// Scale of the centroid spectrum (pairwise centroid distances grow
    /// with it).
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    /// Isotropic noise scale around each centroid.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Fraction of each class assigned to the train split, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    /// RNG seed; the same seed reproduces the dataset exactly.
    #[arg(long)]
    seed: u64,
    /// Output directory for the CSV files and manifests.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorruptArgs {
    /// One-hot truth label CSV.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum)]
    noise_kind: NoiseKindArg,
    /// Flip probability, in [0, 1].
    #[arg(long)]
    p: f64,
    /// Fraction of rows whose true label is removed (only for
    /// candidate-flip-with-truth-removal).
    #[arg(long, default_value_t = 0.0)]
    removal_fraction: f64,
    /// RNG seed; the same seed reproduces the corruption exactly.
    #[arg(long)]
    seed: u64,
    /// Where the corrupted label CSV is written.
    #[arg(long)]
    out: PathBuf,
    /// Optional path for the mask M = Y - G (entries in {-1, 0, 1}).
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Feature CSV (n x q).
    #[arg(long)]
    features: PathBuf,
    /// Label CSV (n x l); real-valued targets are allowed.
    #[arg(long)]
    labels: PathBuf,
    /// Ridge regularization strength.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Where the fitted weight CSV (q x l) is written.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    /// Weight CSV (q x l) to repair, e.g. a fit against corrupted labels.
    #[arg(long)]
    weights: PathBuf,
    /// Training feature CSV (n x q) the weights were fit on.
    #[arg(long)]
    features: PathBuf,
    /// Training label CSV (n x l) the weights were fit on.
    #[arg(long)]
    labels: PathBuf,
    /// Number of leading singular components preserved verbatim.
    /// Defaults to ceil(0.8 * l), clamped to [1, min(q, l)].
    #[arg(long)]
    k: Option<usize>,
    /// Where the repaired weight CSV is written.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Weight CSV files; one spectrum column per file.
    #[arg(required = true)]
    weights: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SubspaceArgs {
    /// Reference weight CSV (e.g. fit against clean labels).
    #[arg(long)]
    weights: PathBuf,
    /// Comparison weight CSV (e.g. fit against corrupted labels).
    #[arg(long)]
    weights_prime: PathBuf,
    /// Grid extent along the reference side; cell (i, j) compares the
    /// top-i subspace with the top-j one. Defaults to min(rank, 60).
    #[arg(long)]
    max_i: Option<usize>,
    /// Grid extent along the comparison side. Defaults to min(rank, 60).
    #[arg(long)]
    max_j: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the grid here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Training feature CSV (n x q).
    #[arg(long)]
    features: PathBuf,
    /// Clean one-hot truth label CSV (n x l).
    #[arg(long)]
    labels: PathBuf,
    /// Corrupted label CSV (n x l); the mask is their difference.
    #[arg(long)]
    noisy_labels: PathBuf,
    /// Ridge regularization strength.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Subspace dimension the rotation bound is evaluated at.
    /// Defaults to ceil(0.8 * l), clamped to [1, min(q, l)].
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment plan JSON. Relative paths inside the plan resolve
    /// against the plan file's directory.
    #[arg(long)]
    plan: PathBuf,
    /// Override the plan's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Writes to stdout, treating a closed pipe as a normal early exit (the
/// reader has seen everything it wanted) and any other write failure as an
/// I/O error exit.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let result = out.write_all(text.as_bytes()).and_then(|()| out.flush());
    if let Err(e) = result {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("{}", json!({ "error": { "class": "io", "message": e.to_string() } }));
        std::process::exit(4);
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(summary) => {
            let mut text =
                serde_json::to_string_pretty(&summary).expect("summary serializes");
            text.push('\n');
            emit(&text);
        }
        Err(err) => {
            let class = match err.class() {
                ErrorClass::Validation => "validation",
                ErrorClass::Numerical => "numerical",
                ErrorClass::Io => "io",
            };
            let payload = json!({ "error": { "class": class, "message": err.to_string() } });
            eprintln!("{payload}");
            let code = match err.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Io => 4,
            };
            std::process::exit(code);
        }
    }
}

fn run(command: Command) -> lip_core::Result<Value> {
    match command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Corrupt(args) => cmd_corrupt(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Apply(args) => cmd_apply(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Subspace(args) => cmd_subspace(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn create_dir(path: &Path) -> lip_core::Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> lip_core::Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes one split (features + labels + manifest) and returns the manifest.
fn write_split(
    dir: &Path,
    split: &str,
    data: &lip_core::matio::Dataset,
) -> lip_core::Result<DatasetManifest> {
    let features_name = format!("{split}_features.csv");
    let labels_name = format!("{split}_labels.csv");
    save_matrix(&data.features, dir.join(&features_name))?;
    save_matrix(&data.labels, dir.join(&labels_name))?;
    let manifest = DatasetManifest {
        features_path: features_name,
        labels_path: labels_name,
        n: data.features.nrows(),
        q: data.features.ncols(),
        l: data.labels.ncols(),
        label_kind: LabelKind::OneHotTruth,
    };
    manifest.save(dir.join(format!("{split}_manifest.json")))?;
    Ok(manifest)
}

fn cmd_gen_data(args: GenDataArgs) -> lip_core::Result<Value> {
    let spec = SyntheticSpec {
        n: args.n,
        q: args.q,
        l: args.l,
        cluster_separation: args.separation,
        within_class_sigma: args.sigma,
        seed: args.seed,
        train_fraction: args.train_fraction,
    };
    let (train, test) = gen_synthetic(&spec)?;
    create_dir(&args.out)?;
    let train_manifest = write_split(&args.out, "train", &train)?;
    let test_manifest = write_split(&args.out, "test", &test)?;
    Ok(json!({
        "out": args.out,
        "seed": args.seed,
        "train": { "manifest": "train_manifest.json", "n": train_manifest.n },
        "test": { "manifest": "test_manifest.json", "n": test_manifest.n },
        "q": train_manifest.q,
        "l": train_manifest.l,
    }))
}

fn cmd_corrupt(args: CorruptArgs) -> lip_core::Result<Value> {
    let g = load_matrix(&args.labels)?;
    let spec = NoiseSpec {
        kind: args.noise_kind.into(),
        p: args.p,
        removal_fraction: args.removal_fraction,
        seed: args.seed,
    };
    let result = corrupt(&g, &spec)?;
    save_matrix(&result.labels, &args.out)?;
    if let Some(mask_path) = &args.mask {
        save_matrix(&result.mask, mask_path)?;
    }
    Ok(json!({
        "out": args.out,
        "rows": result.labels.nrows(),
        "classes": result.labels.ncols(),
        "noise_kind": spec.kind,
        "p": spec.p,
        "removal_fraction": spec.removal_fraction,
        "seed": spec.seed,
        "realized_flip_rate": result.realized_flip_rate,
        "mask_frobenius": mask_frobenius(&result.mask)?,
        "mask": args.mask,
    }))
}

fn cmd_fit(args: FitArgs) -> lip_core::Result<Value> {
    let x = load_matrix(&args.features)?;
    let y = load_matrix(&args.labels)?;
    let cfg = RidgeConfig { lambda: args.lambda };
    let fit = ridge_fit(&x, &y, &cfg)?;
    save_matrix(&fit.weights, &args.out)?;
    Ok(json!({
        "out": args.out,
        "q": fit.weights.nrows(),
        "l": fit.weights.ncols(),
        "lambda": args.lambda,
        "method": fit.method,
        "fit_objective": fit_objective(&x, &y, &fit.weights)?,
    }))
}

fn cmd_apply(args: ApplyArgs) -> lip_core::Result<Value> {
    let w_prime = load_matrix(&args.weights)?;
    let x = load_matrix(&args.features)?;
    let y = load_matrix(&args.labels)?;
    let k = match args.k {
        Some(k) => k,
        None => default_k(w_prime.nrows(), w_prime.ncols()),
    };
    let result = lip_apply(&x, &y, &w_prime, &LipConfig { k })?;
    save_matrix(&result.w_star, &args.out)?;
    Ok(json!({
        "out": args.out,
        "k": k,
        "tail_size": result.refit_tail.len(),
        "refit_tail": result.refit_tail,
        "skipped_indices": result.skipped_indices,
        "fit_objective_before": fit_objective(&x, &y, &w_prime)?,
        "fit_objective_after": fit_objective(&x, &y, &result.w_star)?,
    }))
}

/// Prints `text` to stdout or writes it to `out`; either way the JSON
/// summary names where the payload went.
fn deliver(
    out: Option<&Path>,
    text: &str,
    mut summary: serde_json::Map<String, Value>,
) -> lip_core::Result<Value> {
    match out {
        Some(path) => {
            write_text(path, text)?;
            summary.insert("out".to_string(), json!(path));
            Ok(Value::Object(summary))
        }
        None => {
            emit(text);
            if !text.ends_with('\n') {
                emit("\n");
            }
            summary.insert("out".to_string(), json!("stdout"));
            Ok(Value::Object(summary))
        }
    }
}

fn cmd_spectrum(args: SpectrumArgs) -> lip_core::Result<Value> {
    let mut labels = Vec::new();
    let mut spectra = Vec::new();
    for path in &args.weights {
        let w = load_matrix(path)?;
        labels.push(
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        );
        spectra.push(spectrum(&w)?);
    }
    match args.format {
        Format::Json => {
            let payload = json!({ "labels": labels, "spectra": spectra });
            let text = serde_json::to_string_pretty(&payload).expect("spectra serialize");
            let mut summary = serde_json::Map::new();
            summary.insert("runs".to_string(), json!(labels.len()));
            deliver(args.out.as_deref(), &text, summary)
        }
        Format::Csv => {
            let accuracies = vec![None; labels.len()];
            let report = SpectrumReport::new(labels.clone(), accuracies, spectra)?;
            let mut summary = serde_json::Map::new();
            summary.insert("runs".to_string(), json!(labels.len()));
            deliver(args.out.as_deref(), &report.to_csv(), summary)
        }
    }
}

fn cmd_subspace(args: SubspaceArgs) -> lip_core::Result<Value> {
    let w = load_matrix(&args.weights)?;
    let w_prime = load_matrix(&args.weights_prime)?;
    let f = svd_thin(&w)?;
    let f_prime = svd_thin(&w_prime)?;
    let max_i = args.max_i.unwrap_or_else(|| f.rank_dim().min(60));
    let max_j = args.max_j.unwrap_or_else(|| f_prime.rank_dim().min(60));
    let grid = similarity_grid(&f.v, &f_prime.v, max_i, max_j)?;
    let mut summary = serde_json::Map::new();
    summary.insert("i_max".to_string(), json!(grid.i_max));
    summary.insert("j_max".to_string(), json!(grid.j_max));
    match args.format {
        Format::Json => {
            let rows: Vec<Vec<f64>> = grid
                .phi
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect();
            let payload = json!({ "i_max": grid.i_max, "j_max": grid.j_max, "phi": rows });
            let text = serde_json::to_string_pretty(&payload).expect("grid serializes");
            deliver(args.out.as_deref(), &text, summary)
        }
        Format::Csv => deliver(args.out.as_deref(), &grid.to_csv(), summary),
    }
}

fn cmd_bounds(args: BoundsArgs) -> lip_core::Result<Value> {
    let x = load_matrix(&args.features)?;
    let g = load_matrix(&args.labels)?;
    let y = load_matrix(&args.noisy_labels)?;
    if g.nrows() != y.nrows() || g.ncols() != y.ncols() {
        return Err(Error::Shape(format!(
            "clean labels are {}x{} but noisy labels are {}x{}",
            g.nrows(),
            g.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let m = &y - &g;
    let k = match args.k {
        Some(k) => k,
        None => default_k(x.ncols(), g.ncols()),
    };
    let report = bound_report(&x, &g, &m, args.lambda, k)?;
    Ok(json!({
        "lambda": args.lambda,
        "k": k,
        "report": report,
    }))
}

fn cmd_experiment(args: ExperimentArgs) -> lip_core::Result<Value> {
    let mut plan = ExperimentPlan::load(&args.plan)?;
    if let Some(out) = &args.out {
        plan.output_dir = out.clone();
    }
    let base_dir = args
        .plan
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let report = run_experiment(&plan, &base_dir)?;
    let failed = report
        .trials
        .iter()
        .filter(|t| matches!(t.outcome, lip_core::experiment::TrialOutcome::Failed { .. }))
        .count();
    let output_dir = if plan.output_dir.is_absolute() {
        plan.output_dir.clone()
    } else {
        base_dir.join(&plan.output_dir)
    };
    Ok(json!({
        "report": output_dir.join("report.json"),
        "levels": report.aggregates,
        "trials_total": report.trials.len(),
        "trials_failed": failed,
    }))
}
