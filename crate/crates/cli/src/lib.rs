//! Command-line front end: align sequences, check gradients, generate
//! synthetic data, train and evaluate.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 tolerance failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use softalign::alignment::{
    brute_force_softdtw, classical_dtw, finite_difference_gradient, path_count,
    softdtw_value_and_gradient, ENUMERATION_LIMIT,
};
use softalign::cost::build_cost_matrix;
use softalign::metrics::DEFAULT_THRESHOLD;
use softalign::training::{
    generate_synthetic_dataset, toy, train, LinearModel, LossKind, SyntheticExcerpt, TrainConfig,
};
use softalign::{
    CostFunction, DenseMatrix, EvalReport, FeatureSequence, Gamma, LabelVariant, PianoRoll,
};

pub mod report;
pub mod seqfile;

pub use report::Report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Tolerance(_) => 2,
            _ => 1,
        }
    }
}

impl From<softalign::Error> for CliError {
    fn from(e: softalign::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "softalign",
    version,
    about = "Soft alignment (SoftDTW) toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Soft alignment cost between two sequence files.
    Align(AlignArgs),
    /// Compare the gradient against path enumeration and finite differences.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic dataset to a directory.
    Datagen(DatagenArgs),
    /// Train the per-frame model and write a run report.
    Train(TrainArgs),
    /// Score a prediction file against a binary reference.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct AlignArgs {
    x: PathBuf,
    y: PathBuf,
    #[arg(long, default_value_t = Gamma::DEFAULT)]
    gamma: f64,
    #[arg(long, default_value = "sqeuclidean")]
    cost: CostFunction,
    /// Also report classical DTW cost and an optimal path (1-based).
    #[arg(long)]
    hard: bool,
    /// Write the gradient with respect to the cost matrix to this file.
    #[arg(long, value_name = "FILE")]
    grad: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, default_value_t = toy::DATA_SEED)]
    data_seed: u64,
    #[arg(long, default_value_t = toy::EXCERPTS)]
    excerpts: usize,
    #[arg(long, default_value_t = toy::FRAMES)]
    frames: usize,
    #[arg(long, default_value_t = toy::POLYPHONY)]
    polyphony: usize,
    #[arg(long, default_value_t = toy::NOISE_LEVEL)]
    noise: f64,
}

#[derive(Debug, Args)]
struct DatagenArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value = "strong")]
    variant: LabelVariant,
    #[arg(long, default_value = "softdtw")]
    loss: LossKind,
    #[arg(long, default_value_t = Gamma::DEFAULT)]
    gamma: f64,
    /// Defaults to the bundled setting for the chosen loss.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = toy::EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = toy::TRAIN_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    data: DataArgs,
    /// Load excerpts written by `datagen` instead of generating them.
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Write the trained weights, one row per pitch with the bias last.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    pred: PathBuf,
    reference: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command) {
        Ok(report) => {
            let _ = write!(out, "{report}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<Report, CliError> {
    match command {
        Command::Align(a) => align(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Datagen(a) => datagen(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
    }
}

fn gamma(value: f64) -> Result<Gamma, CliError> {
    Ok(Gamma::new(value)?)
}

fn format_path(steps: &[(usize, usize)]) -> String {
    steps
        .iter()
        .map(|(n, m)| format!("{},{}", n + 1, m + 1))
        .collect::<Vec<_>>()
        .join(" ")
}

fn align(args: AlignArgs) -> Result<Report, CliError> {
    let g = gamma(args.gamma)?;
    let x = FeatureSequence::from(seqfile::read(&args.x)?);
    let y = FeatureSequence::from(seqfile::read(&args.y)?);
    if x.dim() != y.dim() {
        return Err(CliError::Invalid(format!(
            "dimension mismatch: {} has dimension {}, {} has dimension {}",
            args.x.display(),
            x.dim(),
            args.y.display(),
            y.dim()
        )));
    }
    let costs = build_cost_matrix(args.cost, &x, &y)?;
    let (result, gradient) = softdtw_value_and_gradient(&costs, g)?;

    let mut report = Report::new("align");
    report.push("gamma", g.value());
    report.push("cost_function", args.cost.name());
    report.push("rows", costs.rows());
    report.push("cols", costs.cols());
    report.push("softdtw_cost", result.cost);
    if args.hard {
        let (hard, path) = classical_dtw(&costs);
        report.push("dtw_cost", hard);
        report.push("dtw_path", format_path(&path.steps));
    }
    if let Some(path) = args.grad {
        seqfile::write(&path, &gradient.entries)?;
        report.push("gradient_file", path.display());
    }
    Ok(report)
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

const ORACLE_TOLERANCE: f64 = 1e-9;
const FD_TOLERANCE: f64 = 1e-5;

fn gradcheck(args: GradcheckArgs) -> Result<Report, CliError> {
    let g = gamma(args.gamma)?;
    if args.n == 0 || args.m == 0 || args.d == 0 || args.trials == 0 {
        return Err(CliError::Invalid(
            "n, m, d and trials must be positive".into(),
        ));
    }
    let paths = path_count(args.n, args.m);
    let use_oracle = paths <= ENUMERATION_LIMIT;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut random_seq = |len: usize| {
        FeatureSequence::from_flat(
            args.d,
            (0..len * args.d)
                .map(|_| rng.random_range(0.0..1.0))
                .collect(),
        )
    };

    let (mut worst_oracle, mut worst_fd) = (0.0f64, 0.0f64);
    for _ in 0..args.trials {
        let x = random_seq(args.n)?;
        let y = random_seq(args.m)?;
        let costs = build_cost_matrix(CostFunction::SquaredEuclidean, &x, &y)?;
        let (result, gradient) = softdtw_value_and_gradient(&costs, g)?;
        if use_oracle {
            let (value, oracle) = brute_force_softdtw(&costs, g)?;
            worst_oracle = worst_oracle.max(relative_error(result.cost, value));
            for (a, b) in gradient
                .entries
                .as_slice()
                .iter()
                .zip(oracle.entries.as_slice())
            {
                worst_oracle = worst_oracle.max(relative_error(*a, *b));
            }
        }
        let fd = finite_difference_gradient(&costs, g, args.step)?;
        for (a, b) in gradient.entries.as_slice().iter().zip(fd.as_slice()) {
            worst_fd = worst_fd.max(relative_error(*a, *b));
        }
    }

    let mut report = Report::new("gradcheck");
    report.push("n", args.n);
    report.push("m", args.m);
    report.push("d", args.d);
    report.push("gamma", g.value());
    report.push("seed", args.seed);
    report.push("trials", args.trials);
    report.push("step", args.step);
    report.push("path_count", paths);
    if use_oracle {
        report.push("max_rel_err_oracle", worst_oracle);
    } else {
        report.push("max_rel_err_oracle", "skipped");
    }
    report.push("tolerance_oracle", ORACLE_TOLERANCE);
    report.push("max_rel_err_fd", worst_fd);
    report.push("tolerance_fd", FD_TOLERANCE);
    let pass = worst_oracle <= ORACLE_TOLERANCE && worst_fd < FD_TOLERANCE;
    report.push("status", if pass { "pass" } else { "fail" });
    if pass {
        Ok(report)
    } else {
        Err(CliError::Tolerance(format!(
            "tolerance exceeded: oracle {worst_oracle:e} (limit {ORACLE_TOLERANCE:e}), \
             finite differences {worst_fd:e} (limit {FD_TOLERANCE:e})"
        )))
    }
}

fn generate(data: &DataArgs) -> Result<Vec<SyntheticExcerpt>, CliError> {
    Ok(generate_synthetic_dataset(
        data.data_seed,
        data.excerpts,
        data.frames,
        data.polyphony,
        data.noise,
    )?)
}

fn excerpt_paths(dir: &Path, index: usize) -> [PathBuf; 3] {
    ["input", "strong", "score"].map(|kind| dir.join(format!("excerpt_{index:04}_{kind}.txt")))
}

fn datagen(args: DatagenArgs) -> Result<Report, CliError> {
    let data = generate(&args.data)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    for (i, ex) in data.iter().enumerate() {
        let [input, strong, score] = excerpt_paths(&args.out, i);
        seqfile::write(&input, &ex.input.to_matrix()?)?;
        seqfile::write(&strong, &ex.strong_target.to_matrix())?;
        seqfile::write(&score, &ex.score_target.to_matrix())?;
    }
    let mut report = Report::new("datagen");
    push_data_args(&mut report, &args.data);
    report.push("out", args.out.display());
    report.push("files", 3 * data.len());
    Ok(report)
}

fn push_data_args(report: &mut Report, data: &DataArgs) {
    report.push("data_seed", data.data_seed);
    report.push("excerpts", data.excerpts);
    report.push("frames", data.frames);
    report.push("polyphony", data.polyphony);
    report.push("noise", data.noise);
}

fn load_dataset(dir: &Path) -> Result<Vec<SyntheticExcerpt>, CliError> {
    let mut data = Vec::new();
    loop {
        let [input, strong, score] = excerpt_paths(dir, data.len());
        if !input.exists() {
            break;
        }
        let roll = |path: &Path| -> Result<PianoRoll, CliError> {
            PianoRoll::validate(&seqfile::read(path)?)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
        };
        data.push(SyntheticExcerpt {
            input: FeatureSequence::from(seqfile::read(&input)?),
            strong_target: roll(&strong)?,
            score_target: roll(&score)?,
        });
    }
    if data.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no excerpt_0000_input.txt found",
            dir.display()
        )));
    }
    Ok(data)
}

fn model_matrix(model: &LinearModel) -> Result<DenseMatrix, CliError> {
    let d = model.input_dim();
    let rows: Vec<Vec<f64>> = model
        .weight()
        .chunks_exact(d)
        .zip(model.bias())
        .map(|(w, &b)| w.iter().copied().chain(std::iter::once(b)).collect())
        .collect();
    Ok(DenseMatrix::from_rows(&rows)?)
}

fn push_eval(report: &mut Report, prefix: &str, e: &EvalReport) {
    report.push(format!("{prefix}cs"), e.cosine_similarity);
    report.push(format!("{prefix}precision"), e.precision);
    report.push(format!("{prefix}recall"), e.recall);
    report.push(format!("{prefix}f_measure"), e.f_measure);
    report.push(format!("{prefix}accuracy"), e.accuracy);
    report.push(format!("{prefix}average_precision"), e.average_precision);
    if !e.average_precision_defined {
        report.push(format!("{prefix}average_precision_defined"), false);
    }
}

fn train_cmd(args: TrainArgs) -> Result<Report, CliError> {
    let config = TrainConfig {
        gamma: gamma(args.gamma)?,
        learning_rate: args.lr.unwrap_or_else(|| toy::learning_rate(args.loss)),
        momentum: args.momentum,
        epochs: args.epochs,
        batch_excerpts: args.batch,
        seed: args.seed,
        variant: args.variant,
        loss_kind: args.loss,
        threshold: args.threshold,
        ..TrainConfig::default()
    };
    let data = match &args.data_dir {
        Some(dir) => load_dataset(dir)?,
        None => generate(&args.data)?,
    };
    let outcome = train(&data, &config)?;

    let mut report = Report::new("train");
    report.push("variant", config.variant);
    report.push("loss", config.loss_kind);
    report.push("gamma", config.gamma.value());
    report.push("learning_rate", config.learning_rate);
    report.push("momentum", config.momentum);
    report.push("epochs", config.epochs);
    report.push("batch_excerpts", config.batch_excerpts);
    report.push("seed", config.seed);
    report.push("threshold", config.threshold);
    match &args.data_dir {
        Some(dir) => report.push("data_dir", dir.display()),
        None => push_data_args(&mut report, &args.data),
    }
    report.push("train_excerpts", data.len());
    report.push("input_dim", data[0].input.dim());
    report.push("loss_reference", outcome.loss_reference);
    report.push(
        "first_batch_loss",
        outcome.first_batch_loss().expect("at least one batch"),
    );
    for record in &outcome.history {
        report.push(format!("epoch_{:04}_loss", record.epoch + 1), record.loss);
    }
    push_eval(
        &mut report,
        "final_",
        outcome.final_eval().expect("at least one epoch"),
    );

    if let Some(path) = &args.model {
        seqfile::write(path, &model_matrix(&outcome.model)?)?;
        report.push("model_file", path.display());
    }
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_string()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(report)
}

fn eval(args: EvalArgs) -> Result<Report, CliError> {
    let pred = FeatureSequence::from(seqfile::read(&args.pred)?);
    let reference = PianoRoll::validate(&seqfile::read(&args.reference)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", args.reference.display())))?;
    if pred.len() != reference.len() || pred.dim() != softalign::PITCH_COUNT {
        return Err(CliError::Invalid(format!(
            "shape mismatch: prediction is {}x{}, reference is {}x{}",
            pred.len(),
            pred.dim(),
            reference.len(),
            softalign::PITCH_COUNT
        )));
    }
    let e = EvalReport::compute(&pred, &reference, args.threshold)?;
    let mut report = Report::new("eval");
    report.push("threshold", e.threshold);
    report.push("frames", pred.len());
    push_eval(&mut report, "", &e);
    Ok(report)
}
