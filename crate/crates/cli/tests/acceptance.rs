//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines are always printed; exits nonzero if any criterion fails.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use qrandml::bench::{self, aggregate, DatasetSpec, ExperimentReport, ExperimentSpec, Protocol};
use qrandml::datasets::{self, Dataset};
use qrandml::entropy::{BitRecord, EntropyKind, EntropySource, SplitMix64};
use qrandml::neural::{self, MlpConfig};
use qrandml::qsim::{self, GateMatrix, QubitState};
use qrandml::randtest::{self, Significance};
use qrandml::trees::{self, TreeConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type SourceFactory = fn(u64) -> EntropySource;

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    check(
        elapsed <= Duration::from_secs(limit_secs),
        format!("took {:.1} s, limit {limit_secs} s", elapsed.as_secs_f64()),
    )
}

fn kinds() -> [(EntropyKind, SourceFactory); 2] {
    [(EntropyKind::Pseudo, EntropySource::pseudo), (EntropyKind::QuantumSim, EntropySource::quantum_sim)]
}

fn entropy_laws() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    for (kind, make) in kinds() {
        let mut src = make(2024);
        let mut sum = 0.0;
        for _ in 0..100_000 {
            let x = src.next_bounded(-0.5, 0.5).map_err(|e| e.to_string())?;
            check((-0.5..=0.5).contains(&x), format!("{kind}: {x} out of range"))?;
            sum += x;
        }
        let mean = sum / 100_000.0;
        check(mean.abs() <= 0.005, format!("{kind}: mean {mean}"))?;
        detail.push(format!("{kind} mean {mean:+.5}"));
    }
    for (bit, want) in [(0u8, -0.5), (1u8, 0.5)] {
        let record = BitRecord::new(vec![bit; 32], EntropyKind::QuantumSim, 0);
        let got = EntropySource::replay(&record).next_bounded(-0.5, 0.5).map_err(|e| e.to_string())?;
        check(got == want, format!("forced word of {bit}s gave {got}"))?;
    }
    within(start.elapsed(), 5)?;
    Ok(detail.join(", "))
}

fn quantum_math() -> Outcome {
    let start = Instant::now();
    let h = GateMatrix::hadamard();
    let err = h.mul(&h).max_abs_diff(&GateMatrix::identity());
    check(err <= 1e-12, format!("|HH - I| = {err}"))?;
    let plus = qsim::hadamard(&QubitState::ZERO).map_err(|e| e.to_string())?;
    let minus = qsim::hadamard(&QubitState::ONE).map_err(|e| e.to_string())?;
    let amps = |s: &QubitState| (s.amp0.re, s.amp0.im, s.amp1.re, s.amp1.im);
    check(amps(&plus) == (FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0), format!("H|0> = {plus:?}"))?;
    check(amps(&minus) == (FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2, 0.0), format!("H|1> = {minus:?}"))?;
    let mut physical = SplitMix64::new(99);
    let ones: u32 = (0..100_000).map(|_| u32::from(qsim::qrng_bit(&mut physical))).sum();
    let fraction = f64::from(ones) / 100_000.0;
    check((0.494..=0.506).contains(&fraction), format!("ones fraction {fraction}"))?;
    within(start.elapsed(), 5)?;
    Ok(format!("|HH - I| = {err:e}, ones fraction {fraction:.4}"))
}

fn randomness_battery() -> Outcome {
    let start = Instant::now();
    let sig = Significance::default();
    let mut detail = Vec::new();
    for (kind, make) in kinds() {
        let record = make(7).record_bits(1_000_000).map_err(|e| e.to_string())?;
        let reports = randtest::run_battery(&record.bits, &sig).map_err(|e| e.to_string())?;
        for r in &reports {
            check(r.pass, format!("{kind} failed {} (stat {}, p {})", r.id, r.statistic, r.p_value))?;
        }
        let serial = reports.iter().find(|r| r.id == "serial_correlation").expect("serial row");
        check(serial.statistic.abs() < 4.0 / 1e3, format!("{kind} serial r {}", serial.statistic))?;
        let min_p = reports.iter().map(|r| r.p_value).fold(1.0, f64::min);
        detail.push(format!("{kind} min p {min_p:.3}"));
    }
    let all_ones = vec![1u8; 1_000_000];
    let alternating: Vec<u8> = (0..1_000_000).map(|i| (i % 2) as u8).collect();
    let mono = randtest::monobit_frequency(&all_ones, &sig).map_err(|e| e.to_string())?;
    check(!mono.pass, "all-ones passed monobit")?;
    let runs = randtest::runs_test(&alternating, &sig).map_err(|e| e.to_string())?;
    check(!runs.pass, "alternating passed runs")?;
    let serial = randtest::serial_correlation(&alternating, 1, &sig).map_err(|e| e.to_string())?;
    check(!serial.pass, "alternating passed serial correlation")?;
    within(start.elapsed(), 30)?;
    detail.push("adversarial streams rejected".into());
    Ok(detail.join(", "))
}

fn blobs(seed: u64) -> Dataset {
    datasets::synth_blobs(3, 100, 10, 0.6, &mut EntropySource::pseudo(seed)).expect("blobs")
}

fn provenance_transparency() -> Outcome {
    let record = EntropySource::quantum_sim(31).record_bits(400_000).map_err(|e| e.to_string())?;
    let as_kind = |k| EntropySource::replay_labeled(&record, k);
    let data = blobs(1);
    let config = TreeConfig::default();
    let tree = |k| trees::train_random_tree(&data, &config, &mut as_kind(k)).map(|t| t.to_text());
    let rt = tree(EntropyKind::Pseudo).map_err(|e| e.to_string())?;
    let qrt = tree(EntropyKind::QuantumSim).map_err(|e| e.to_string())?;
    check(rt == qrt, "replayed RT and QRT differ")?;
    let forest = |k| trees::train_forest(&data, 10, &config, &mut as_kind(k)).map(|f| f.to_text());
    check(
        forest(EntropyKind::Pseudo).map_err(|e| e.to_string())?
            == forest(EntropyKind::QuantumSim).map_err(|e| e.to_string())?,
        "replayed forests differ",
    )?;
    let mlp_config = MlpConfig { epochs: 2, ..MlpConfig::new(vec![10, 16, 3]) };
    let init = |k| neural::init_model(&mlp_config, &mut as_kind(k)).map(|m| m.to_text());
    let p_init = init(EntropyKind::Pseudo).map_err(|e| e.to_string())?;
    check(p_init == init(EntropyKind::QuantumSim).map_err(|e| e.to_string())?, "replayed MLP inits differ")?;
    let trained = |k| neural::train_model(&mlp_config, &data, &data, &mut as_kind(k)).map(|(m, _)| m.to_text());
    check(
        trained(EntropyKind::Pseudo).map_err(|e| e.to_string())?
            == trained(EntropyKind::QuantumSim).map_err(|e| e.to_string())?,
        "replayed MLP trainings differ",
    )?;
    Ok(format!("tree text {} bytes, MLP text {} bytes, both identical", rt.len(), p_init.len()))
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut src = EntropySource::pseudo(5);
    let mut worst: f64 = 0.0;
    let nets = 6;
    for _ in 0..nets {
        let draw = |src: &mut EntropySource, lo: usize, span: usize| lo + src.next_index_mod(span).unwrap();
        let sizes = vec![draw(&mut src, 2, 6), draw(&mut src, 2, 8), draw(&mut src, 2, 6), draw(&mut src, 2, 4)];
        let model = neural::init_model(&MlpConfig::new(sizes.clone()), &mut src).map_err(|e| e.to_string())?;
        let rows: Vec<(Vec<f64>, usize)> = (0..4)
            .map(|_| {
                let row = (0..sizes[0]).map(|_| src.next_bounded(-1.0, 1.0).unwrap()).collect();
                (row, src.next_index_mod(sizes[3]).unwrap())
            })
            .collect();
        let batch: Vec<(&[f64], usize)> = rows.iter().map(|(r, l)| (r.as_slice(), *l)).collect();
        let err = neural::gradient_check(&model, &batch).map_err(|e| e.to_string())?;
        check(err < 1e-3, format!("network {sizes:?}: relative error {err}"))?;
        worst = worst.max(err);
    }
    within(start.elapsed(), 10)?;
    Ok(format!("{nets} networks, max relative error {worst:.2e}"))
}

fn workspace_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn mnist_mlp() -> Outcome {
    let start = Instant::now();
    let mut spec = ExperimentSpec::new(
        Protocol::MlpInit,
        DatasetSpec::Mnist { dir: workspace_path("data/mnist"), train_limit: Some(2000), test_limit: Some(500) },
    );
    spec.n_models = 10;
    spec.mlp_hidden = vec![64];
    spec.epochs = 20;
    spec.batch_size = 32;
    let report = bench::run_mlp_experiment(&spec).map_err(|e| e.to_string())?;
    check(report.rows.len() == 10, "expected 10 models")?;
    check(report.rows.iter().all(|r| r.history.as_ref().unwrap().accuracies.len() == 20), "short history")?;
    let mut accs = Vec::new();
    for r in &report.rows {
        let acc = r.accuracy.ok_or_else(|| format!("{} seed {} failed", r.kind, r.seed))?;
        check(acc >= 0.85, format!("{} seed {} accuracy {acc}", r.kind, r.seed))?;
        accs.push(acc);
    }
    within(start.elapsed(), 300)?;
    let lo = accs.iter().copied().fold(1.0, f64::min);
    let hi = accs.iter().copied().fold(0.0, f64::max);
    Ok(format!("10 models, accuracy {lo:.3}..{hi:.3}"))
}

fn tree_forest_protocol() -> Outcome {
    let start = Instant::now();
    let spec = ExperimentSpec::new(Protocol::TreeSplit, ExperimentSpec::default_blobs());
    let mut loaded = bench::load_data(&spec).map_err(|e| e.to_string())?;
    let folds = loaded.cv_folds(spec.folds).map_err(|e| e.to_string())?;
    let data = loaded.train;
    check(data.n_rows() == 300 && data.n_features() == 10, "unexpected blob shape")?;
    let config = TreeConfig::default();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let mut detail = Vec::new();
    for (kind, make) in kinds() {
        let mut tree_means = Vec::new();
        let mut forest_means = Vec::new();
        for seed in 1..=10 {
            let t = bench::tree_cv_accuracy(&folds, &config, &mut make(seed)).map_err(|e| e.to_string())?;
            let f = bench::forest_cv_accuracy(&folds, 100, &config, &mut make(seed)).map_err(|e| e.to_string())?;
            tree_means.push(mean(&t));
            forest_means.push(mean(&f));
            let full = trees::train_random_tree(&data, &config, &mut make(seed)).map_err(|e| e.to_string())?;
            let train_acc = trees::evaluate(&full, &data).map_err(|e| e.to_string())?;
            check(train_acc == 1.0, format!("{kind} seed {seed}: training accuracy {train_acc}"))?;
        }
        let (t, f) = (mean(&tree_means), mean(&forest_means));
        check(f > t, format!("{kind}: forest {f:.4} <= tree {t:.4}"))?;
        detail.push(format!("{kind} tree {t:.4} < forest {f:.4}"));
    }
    within(start.elapsed(), 120)?;
    Ok(detail.join(", "))
}

fn read_outputs(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let specs = [
        ("tree", "protocol=tree\nn_models=4\n"),
        ("forest", "protocol=forest\nforest.sizes=5,10\nfolds=5\n"),
        ("mlp", "protocol=mlp\nn_models=4\nmlp.hidden=16\nmlp.epochs=3\n"),
    ];
    let mut compared = 0;
    for (name, text) in specs {
        let spec = dir.path().join(format!("{name}.spec"));
        fs::write(&spec, text).map_err(|e| e.to_string())?;
        let out = dir.path().join(name);
        let args =
            ["qrandml", "bench", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-timestamp"];
        check(qrandml_cli::run(args) == 0, format!("{name}: first run failed"))?;
        let first = read_outputs(&out);
        check(qrandml_cli::run(args) == 0, format!("{name}: second run failed"))?;
        check(first == read_outputs(&out), format!("{name}: reports differ between runs"))?;
        check(first.iter().any(|(p, _)| p.ends_with("report.json")), "no JSON report")?;
        check(first.iter().any(|(p, _)| p.ends_with("report.csv")), "no CSV report")?;
        compared += first.len();
    }
    Ok(format!("3 protocols, {compared} files byte-identical"))
}

fn aggregate_statistics() -> Outcome {
    let s = aggregate(&[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    check(
        (s.mean, s.sample_stddev, s.best, s.worst, s.range) == (2.0, 1.0, 3.0, 1.0, 2.0),
        format!("aggregate([1,2,3]) = {s:?}"),
    )?;
    let mut spec = ExperimentSpec::new(Protocol::TreeSplit, ExperimentSpec::default_blobs());
    spec.n_models = 10;
    let report = bench::run_tree_experiment(&spec).map_err(|e| e.to_string())?;
    let back = ExperimentReport::from_json(&report.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let recomputed = bench::summarize(&back.rows).map_err(|e| e.to_string())?;
    check(recomputed == report.per_kind, "stats differ after recomputing from rows")?;
    Ok("(2, 1, 3, 1, 2); 10-model report recomputes exactly".into())
}

fn gen_output_format() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let record = dir.path().join("nibble.bits");
    fs::write(&record, "#kind=QuantumSim seed=0\n0101\n").map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let args = [
        "qrandml",
        "gen",
        "--replay",
        record.to_str().unwrap(),
        "--bits",
        "4",
        "--count",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    check(qrandml_cli::run(args) == 0, "gen failed")?;
    let csv = fs::read_to_string(out.join("random.csv")).map_err(|e| e.to_string())?;
    let txt = fs::read_to_string(out.join("numbers.txt")).map_err(|e| e.to_string())?;
    check(csv == "0101,5\n", format!("random.csv = {csv:?}"))?;
    check(txt == "5\n", format!("numbers.txt = {txt:?}"))?;
    Ok("random.csv `0101,5`, numbers.txt `5`".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("entropy laws", entropy_laws),
        ("quantum math", quantum_math),
        ("randomness battery", randomness_battery),
        ("provenance transparency under replay", provenance_transparency),
        ("gradient fidelity", gradient_fidelity),
        ("MNIST-subset MLP accuracy", mnist_mlp),
        ("tree/forest protocol on blobs", tree_forest_protocol),
        ("end-to-end determinism", end_to_end_determinism),
        ("aggregate statistics", aggregate_statistics),
        ("gen output format", gen_output_format),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name} ({secs:.1} s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
