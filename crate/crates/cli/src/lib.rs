//! Command-line front end for `qrandml`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure
//! (including a randomness battery with failing tests).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qrandml::bench::{self, BenchError, ExperimentReport, ExperimentSpec};
use qrandml::datasets::{self, Dataset, DatasetError};
use qrandml::entropy::{BitRecord, EntropyError, EntropyKind, EntropySource};
use qrandml::neural::{self, MlpConfig, NeuralError};
use qrandml::randtest::{self, RandTestError, Significance};
use qrandml::trees::{self, KAttributes, TreeConfig, TreeError};

#[derive(Debug, Parser)]
#[command(name = "qrandml", version, about = "Pseudorandom vs simulated-quantum entropy in ML training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit random integers as `numbers.txt` and `random.csv`.
    Gen(GenArgs),
    /// Run the randomness battery on a bit stream.
    Test(TestArgs),
    /// Train a single random tree on a CSV file.
    TrainTree(TreeArgs),
    /// Train a random forest on a CSV file.
    TrainForest(ForestArgs),
    /// Train a dense network on a CSV file or an MNIST directory.
    TrainMlp(MlpArgs),
    /// Run an experiment spec and write its reports.
    Bench(BenchArgs),
    /// Rebuild the CSV and statistics from a report JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// pseudo (default), quantumsim or replay. With --replay this only
    /// relabels the record; it defaults to the kind stored in the file.
    #[arg(long)]
    kind: Option<EntropyKind>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Bit-record file to replay instead of generating bits.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 32)]
    bits: u32,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Defaults to 10^6, or the whole record when replaying.
    #[arg(long)]
    n_bits: Option<usize>,
    /// CSV file for the results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the tested bits as a bit-record file.
    #[arg(long)]
    record_bits: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a label column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label: String,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    /// Seed of the pseudo source that draws the split.
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Candidate attributes per node; `auto` is log2(v)+1.
    #[arg(long, default_value = "auto")]
    k: KAttributes,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Model output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ForestArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long, default_value_t = 100)]
    trees: usize,
}

#[derive(Debug, Args)]
struct MlpArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, conflicts_with = "mnist", required_unless_present = "mnist")]
    data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label: String,
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
    /// Directory with MNIST IDX files.
    #[arg(long)]
    mnist: Option<PathBuf>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "64", value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Output directory for `model.txt` and `curve.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    #[arg(long)]
    no_timestamp: bool,
    /// Replay this bit record for every model of both kinds.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// A `report.json` written by `bench`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to the directory of the input.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl From<EntropyError> for CliError {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::InvalidWidth(_) | EntropyError::InvalidBounds { .. } => CliError::Usage(e.to_string()),
            EntropyError::Format(_) | EntropyError::MissingReplayRecord => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidParams(_) | DatasetError::KTooLarge { .. } => CliError::Usage(e.to_string()),
            DatasetError::Entropy(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::Entropy(inner) => inner.into(),
            TreeError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            TreeError::EmptyDataset => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Entropy(inner) => inner.into(),
            NeuralError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            NeuralError::EmptyDataset => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Spec(_) => CliError::Usage(e.to_string()),
            BenchError::Dataset(inner) => inner.into(),
            BenchError::Tree(inner) => inner.into(),
            BenchError::Neural(inner) => inner.into(),
            BenchError::Entropy(inner) => inner.into(),
            BenchError::Json(_) => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Test(a) => cmd_test(&a),
        Command::TrainTree(a) => cmd_train_tree(&a, None),
        Command::TrainForest(a) => cmd_train_tree(&a.tree, Some(a.trees)),
        Command::TrainMlp(a) => cmd_train_mlp(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            if let CliError::Usage(_) = e {
                eprintln!("run `qrandml --help` for usage");
            }
            e.exit_code()
        }
    }
}

fn read_record(path: &Path) -> CliResult<BitRecord> {
    if !path.exists() {
        return Err(CliError::Usage(format!("replay file {} not found", path.display())));
    }
    Ok(BitRecord::read_file(path)?)
}

fn open_source(args: &SourceArgs) -> CliResult<EntropySource> {
    match (&args.replay, args.kind) {
        (Some(path), kind) => {
            let record = read_record(path)?;
            let label = match kind {
                None | Some(EntropyKind::Replay) => record.source_kind,
                Some(k) => k,
            };
            Ok(EntropySource::replay_labeled(&record, label))
        }
        (None, Some(EntropyKind::Replay)) => Err(CliError::Usage("--kind replay needs --replay <file>".into())),
        (None, Some(EntropyKind::QuantumSim)) => Ok(EntropySource::quantum_sim(args.seed)),
        (None, Some(EntropyKind::Pseudo) | None) => Ok(EntropySource::pseudo(args.seed)),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Draws `count` integers of `bits` bits and formats them as the text file
/// (one decimal per line) and the CSV file (`<zero-padded binary>,<decimal>`).
pub fn gen_outputs(source: &mut EntropySource, count: usize, bits: u32) -> Result<(String, String), EntropyError> {
    let mut txt = String::new();
    let mut csv = String::new();
    for _ in 0..count {
        let value = source.next_uint(bits)?;
        let _ = writeln!(txt, "{value}");
        let _ = writeln!(csv, "{value:0width$b},{value}", width = bits as usize);
    }
    Ok((txt, csv))
}

fn cmd_gen(a: &GenArgs) -> CliResult<i32> {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be >= 1".into()));
    }
    if !(1..=64).contains(&a.bits) {
        return Err(CliError::Usage(format!("--bits must be in 1..=64, got {}", a.bits)));
    }
    let mut source = open_source(&a.source)?;
    let (txt, csv) = gen_outputs(&mut source, a.count, a.bits)?;
    write_file(&a.out.join("numbers.txt"), &txt)?;
    write_file(&a.out.join("random.csv"), &csv)?;
    println!("wrote {} numbers of {} bits ({}) to {}", a.count, a.bits, source.provenance(), a.out.display());
    Ok(0)
}

fn cmd_test(a: &TestArgs) -> CliResult<i32> {
    let mut source = open_source(&a.source)?;
    let n_bits = match (a.n_bits, &a.source.replay) {
        (Some(n), _) => n,
        (None, Some(path)) => read_record(path)?.len(),
        (None, None) => 1_000_000,
    };
    if n_bits < randtest::MIN_CHI_SQUARE_BITS {
        return Err(CliError::Data(format!(
            "need at least {} bits for the battery, got {n_bits}",
            randtest::MIN_CHI_SQUARE_BITS
        )));
    }
    let record = source.record_bits(n_bits).map_err(|e| match e {
        EntropyError::ReplayExhausted { drawn } => {
            CliError::Data(format!("replay record holds only {drawn} bits, {n_bits} requested"))
        }
        other => other.into(),
    })?;
    let reports = randtest::run_battery(&record.bits, &Significance::default()).map_err(|e| match e {
        RandTestError::TooFewBits { .. } => CliError::Data(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    })?;
    println!("{} bits from {}", n_bits, source.provenance());
    println!("{:<18} {:>14} {:>12} {:>5}", "test", "statistic", "p", "pass");
    for r in &reports {
        println!("{:<18} {:>14.6} {:>12.6} {:>5}", r.id, r.statistic, r.p_value, if r.pass { "yes" } else { "NO" });
    }
    if let Some(out) = &a.out {
        write_file(out, &randtest::reports_to_csv(&reports))?;
    }
    if let Some(path) = &a.record_bits {
        write_file(path, &record.to_file_string(!a.no_timestamp))?;
    }
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { 3 })
}

fn split_csv(data: &DataArgs) -> CliResult<(Dataset, Dataset)> {
    if !(data.split > 0.0 && data.split < 1.0) {
        return Err(CliError::Usage(format!("--split must be in (0, 1), got {}", data.split)));
    }
    let all = datasets::load_csv(&data.data, &data.label)?;
    let plan = datasets::stratified_split(&all, data.split, &mut EntropySource::pseudo(data.data_seed))?;
    Ok((all.subset(&plan.train_indices), all.subset(&plan.test_indices)))
}

fn cmd_train_tree(a: &TreeArgs, forest_size: Option<usize>) -> CliResult<i32> {
    if forest_size == Some(0) {
        return Err(CliError::Usage("--trees must be >= 1".into()));
    }
    let mut source = open_source(&a.source)?;
    let (train, test) = split_csv(&a.data)?;
    let config = TreeConfig { k_attributes: a.k, max_depth: a.max_depth, ..TreeConfig::default() };
    let (text, train_acc, test_acc) = match forest_size {
        None => {
            let tree = trees::train_random_tree(&train, &config, &mut source)?;
            (tree.to_text(), trees::evaluate(&tree, &train)?, trees::evaluate(&tree, &test)?)
        }
        Some(n) => {
            let forest = trees::train_forest(&train, n, &config, &mut source)?;
            (forest.to_text(), trees::evaluate(&forest, &train)?, trees::evaluate(&forest, &test)?)
        }
    };
    println!(
        "{} ({}, seed {}): train accuracy {:.4}, test accuracy {:.4}",
        if forest_size.is_some() { "forest" } else { "tree" },
        source.provenance(),
        source.seed(),
        train_acc,
        test_acc
    );
    if let Some(out) = &a.out {
        write_file(out, &text)?;
    }
    Ok(0)
}

fn cmd_train_mlp(a: &MlpArgs) -> CliResult<i32> {
    let mut source = open_source(&a.source)?;
    let (train, test) = match (&a.data, &a.mnist) {
        (_, Some(dir)) => datasets::load_mnist_dir(dir, a.train_limit, a.test_limit)?,
        (Some(data), None) => {
            split_csv(&DataArgs { data: data.clone(), label: a.label.clone(), split: a.split, data_seed: a.data_seed })?
        }
        (None, None) => unreachable!("clap requires one of --data / --mnist"),
    };
    let mut sizes = vec![train.n_features()];
    sizes.extend(&a.hidden);
    sizes.push(train.class_count().max(test.class_count()));
    let config = MlpConfig { epochs: a.epochs, batch_size: a.batch, ..MlpConfig::new(sizes) };
    config.validate()?;
    let (model, history) = neural::train_model(&config, &train, &test, &mut source)?;
    for (e, (acc, loss)) in history.accuracies.iter().zip(&history.losses).enumerate() {
        println!("epoch {:>3}  loss {:.5}  test accuracy {:.4}", e + 1, loss, acc);
    }
    if let Some(out) = &a.out {
        write_file(&out.join("model.txt"), &model.to_text())?;
        write_file(&out.join("curve.csv"), &history.to_csv())?;
    }
    match &history.failure {
        Some(f) => Err(CliError::Runtime(f.clone())),
        None => Ok(0),
    }
}

fn cmd_bench(a: &BenchArgs) -> CliResult<i32> {
    if !a.spec.is_file() {
        return Err(CliError::Usage(format!("spec file {} not found", a.spec.display())));
    }
    let mut spec = ExperimentSpec::from_file(&a.spec).map_err(|e| match e {
        BenchError::Io(io) => io_err(&a.spec, io),
        other => other.into(),
    })?;
    if let Some(path) = &a.replay {
        spec.replay = Some(read_record(path)?);
    }
    let mut report = bench::run_experiment(&spec)?;
    if !a.no_timestamp {
        report.stamp();
    }
    report.write_files(&a.out).map_err(|e| io_err(&a.out, e))?;
    print!("{}", report.stats_table());
    Ok(0)
}

fn cmd_report(a: &ReportArgs) -> CliResult<i32> {
    if !a.input.is_file() {
        return Err(CliError::Usage(format!("report file {} not found", a.input.display())));
    }
    let text = fs::read_to_string(&a.input).map_err(|e| io_err(&a.input, e))?;
    let mut report = ExperimentReport::from_json(&text)?;
    report.per_kind = bench::summarize(&report.rows)?;
    report.paired = bench::paired_summary(&report.rows);
    let out = a.out.clone().unwrap_or_else(|| a.input.parent().map(Path::to_path_buf).unwrap_or_default());
    write_file(&out.join("report.csv"), &report.to_csv())?;
    print!("{}", report.stats_table());
    Ok(0)
}
