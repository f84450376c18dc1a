//! Datasets: loaders, a synthetic blob generator, and partitioning.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::entropy::{EntropyError, EntropySource};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at data row {row}, column {col}: `{value}`")]
    ParseError { row: usize, col: usize, value: String },
    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),
    #[error("file has no data rows")]
    EmptyFile,
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("file truncated: {0}")]
    TruncatedFile(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("class {class} has only {count} rows (need at least 2)")]
    ClassTooSmall { class: usize, count: usize },
    #[error("k = {k} folds is invalid for {n} rows")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Dense numeric features (row-major) with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_count: usize,
    pub feature_names: Option<Vec<String>>,
    /// Original label text per class index, when loaded from text.
    pub label_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if n_features == 0 || labels.is_empty() {
            return Err(DatasetError::Invalid("need n >= 1 rows and v >= 1 features".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(DatasetError::Invalid(format!(
                "{} feature values for {} rows of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if class_count < 2 {
            return Err(DatasetError::Invalid("need at least 2 classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(DatasetError::Invalid(format!("label {bad} >= class count {class_count}")));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(DatasetError::Invalid("non-finite feature value".into()));
        }
        Ok(Self { features, n_features, labels, class_count, feature_names: None, label_names: None })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.features.chunks_exact(self.n_features).zip(self.labels.iter().copied())
    }

    /// Row indices of each class, in row order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// New dataset holding the given rows (repeats allowed), same class space.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// CSV with a header; the label column is last and holds label names
    /// when known, class indices otherwise.
    pub fn to_csv_string(&self, label_column: &str) -> String {
        let mut out = String::new();
        let names: Vec<String> = match &self.feature_names {
            Some(n) => n.clone(),
            None => (0..self.n_features).map(|j| format!("x{j}")).collect(),
        };
        out.push_str(&names.join(","));
        out.push(',');
        out.push_str(label_column);
        out.push('\n');
        for (row, label) in self.rows() {
            for x in row {
                out.push_str(&format!("{x},"));
            }
            match &self.label_names {
                Some(n) => out.push_str(&n[label]),
                None => out.push_str(&label.to_string()),
            }
            out.push('\n');
        }
        out
    }
}

/// Loads a headed CSV; labels get dense indices in first-appearance order.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, label_column)
}

pub fn parse_csv(text: &str, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DatasetError::MissingLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> =
        headers.iter().enumerate().filter(|&(j, _)| j != label_idx).map(|(_, h)| h.to_string()).collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut label_map: HashMap<String, usize> = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                let next = label_map.len();
                let id = *label_map.entry(cell.to_string()).or_insert_with(|| {
                    label_names.push(cell.to_string());
                    next
                });
                labels.push(id);
            } else {
                let value = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::ParseError { row, col, value: cell.to_string() })?;
                features.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    let mut ds = Dataset::new(features, feature_names.len(), labels, label_names.len().max(2))?;
    ds.feature_names = Some(feature_names);
    if label_names.len() < 2 {
        label_names.push("<unseen>".into());
    }
    ds.label_names = Some(label_names);
    Ok(ds)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| DatasetError::TruncatedFile(format!("{what} header")))
}

/// Loads MNIST-style IDX image/label files; pixels are scaled to `[0, 1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<Dataset> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;
    parse_mnist_idx(&images, &labels, limit)
}

/// Loads the standard train and test file pairs
/// (`train-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`, ...) from `dir`.
pub fn load_mnist_dir(dir: &Path, train_limit: Option<usize>, test_limit: Option<usize>) -> Result<(Dataset, Dataset)> {
    let train =
        load_mnist_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"), train_limit)?;
    let test = load_mnist_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"), test_limit)?;
    Ok((train, test))
}

pub fn parse_mnist_idx(images: &[u8], labels: &[u8], limit: Option<usize>) -> Result<Dataset> {
    let magic = be_u32(images, 0, "image")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DatasetError::BadMagic { found: magic, expected: IDX_IMAGES_MAGIC });
    }
    let magic = be_u32(labels, 0, "label")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DatasetError::BadMagic { found: magic, expected: IDX_LABELS_MAGIC });
    }
    let n_images = be_u32(images, 4, "image")? as usize;
    let rows = be_u32(images, 8, "image")? as usize;
    let cols = be_u32(images, 12, "image")? as usize;
    let n_labels = be_u32(labels, 4, "label")? as usize;
    if n_images != n_labels {
        return Err(DatasetError::CountMismatch { images: n_images, labels: n_labels });
    }
    let pixels = rows * cols;
    let n = limit.map_or(n_images, |l| l.min(n_images));
    let pixel_bytes =
        images.get(16..16 + n * pixels).ok_or_else(|| DatasetError::TruncatedFile("image data".into()))?;
    let label_bytes = labels.get(8..8 + n).ok_or_else(|| DatasetError::TruncatedFile("label data".into()))?;
    let features = pixel_bytes.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = label_bytes.iter().map(|&l| usize::from(l)).collect();
    let class_count = labels.iter().max().map_or(2, |&m| (m + 1).max(10));
    Dataset::new(features, pixels, labels, class_count)
}

/// Gaussian blobs: class `c` centered at `(2c, …, 2c)` with noise std `spread`.
/// Rows are class-major; normals come from Box–Muller pairs over
/// `next_bounded(0, 1)` draws.
pub fn synth_blobs(
    classes: usize,
    per_class: usize,
    n_features: usize,
    spread: f64,
    entropy: &mut EntropySource,
) -> Result<Dataset> {
    if classes < 2 || per_class < 1 || n_features < 1 || !(spread > 0.0 && spread.is_finite()) {
        return Err(DatasetError::InvalidParams(format!(
            "classes={classes} per_class={per_class} features={n_features} spread={spread}"
        )));
    }
    let mut normals = GaussianPairs::default();
    let mut features = Vec::with_capacity(classes * per_class * n_features);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let center = 2.0 * c as f64;
        for _ in 0..per_class {
            for _ in 0..n_features {
                features.push(center + spread * normals.next(entropy)?);
            }
            labels.push(c);
        }
    }
    Dataset::new(features, n_features, labels, classes)
}

#[derive(Default)]
struct GaussianPairs {
    spare: Option<f64>,
}

impl GaussianPairs {
    fn next(&mut self, entropy: &mut EntropySource) -> Result<f64> {
        if let Some(z) = self.spare.take() {
            return Ok(z);
        }
        let u1 = loop {
            let u = entropy.next_bounded(0.0, 1.0)?;
            if u > 0.0 {
                break u;
            }
        };
        let u2 = entropy.next_bounded(0.0, 1.0)?;
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        Ok(r * theta.cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub fraction: f64,
}

/// Per-class train counts: largest-remainder apportionment of
/// `round(fraction·n)`, each class keeping at least one row on both sides.
fn train_counts(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let mut counts: Vec<usize> = sizes.iter().map(|&s| (fraction * s as f64).floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    let remainder = |c: usize| fraction * sizes[c] as f64 - counts[c] as f64;
    order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
    let mut missing = target.saturating_sub(counts.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if missing == 0 {
            break;
        }
        if counts[c] < sizes[c] {
            counts[c] += 1;
            missing -= 1;
        }
    }
    for (count, &size) in counts.iter_mut().zip(sizes) {
        *count = (*count).clamp(1, size - 1);
    }
    counts
}

/// Stratified shuffle split; the shuffle within each class is Fisher–Yates.
pub fn stratified_split(dataset: &Dataset, fraction: f64, entropy: &mut EntropySource) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::InvalidParams(format!("split fraction {fraction}")));
    }
    let mut by_class = dataset.class_indices();
    for (class, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < 2 {
            return Err(DatasetError::ClassTooSmall { class, count: rows.len() });
        }
    }
    by_class.retain(|rows| !rows.is_empty());
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = train_counts(&sizes, fraction);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (rows, take) in by_class.iter_mut().zip(counts) {
        entropy.shuffle(rows)?;
        train.extend_from_slice(&rows[..take]);
        test.extend_from_slice(&rows[take..]);
    }
    Ok(SplitPlan { train_indices: train, test_indices: test, fraction })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of each row.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k folds: shuffle each class, then deal rows round-robin with
/// one counter running across classes.
pub fn k_folds(dataset: &Dataset, k: usize, entropy: &mut EntropySource) -> Result<FoldPlan> {
    let n = dataset.n_rows();
    if k < 2 || k > n {
        return Err(DatasetError::KTooLarge { k, n });
    }
    let mut assignments = vec![0; n];
    let mut next = 0;
    for mut rows in dataset.class_indices() {
        entropy.shuffle(&mut rows)?;
        for i in rows {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n: usize, classes: usize) -> Dataset {
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        Dataset::new((0..n).map(|i| i as f64).collect(), 1, labels, classes).unwrap()
    }

    #[test]
    fn csv_first_appearance_labels() {
        let ds = parse_csv("x,y,label\n1,2,a\n3,4,b\n5,6,a\n", "label").unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.class_count(), 2);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.label_names.as_deref().unwrap(), ["a", "b"]);
    }

    #[test]
    fn csv_rejects_nan_and_garbage() {
        let err = parse_csv("x,label\n1,a\nNaN,b\n", "label").unwrap_err();
        assert!(matches!(err, DatasetError::ParseError { row: 1, col: 0, .. }), "{err}");
        assert!(matches!(parse_csv("x,label\nfoo,a\n", "label"), Err(DatasetError::ParseError { .. })));
        assert!(matches!(parse_csv("x,label\ninf,a\n", "label"), Err(DatasetError::ParseError { .. })));
    }

    #[test]
    fn csv_header_only_and_missing_label() {
        assert!(matches!(parse_csv("x,label\n", "label"), Err(DatasetError::EmptyFile)));
        assert!(matches!(parse_csv("x,y\n1,2\n", "label"), Err(DatasetError::MissingLabelColumn(_))));
    }

    #[test]
    fn csv_round_trip() {
        let mut src = EntropySource::pseudo(8);
        let ds = synth_blobs(3, 5, 4, 0.7, &mut src).unwrap();
        let back = parse_csv(&ds.to_csv_string("class"), "class").unwrap();
        assert_eq!(back.labels(), ds.labels());
        for i in 0..ds.n_rows() {
            assert_eq!(back.row(i), ds.row(i));
        }
    }

    fn idx_images(n: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(IDX_IMAGES_MAGIC.to_be_bytes());
        out.extend(n.to_be_bytes());
        out.extend(28u32.to_be_bytes());
        out.extend(28u32.to_be_bytes());
        out.extend_from_slice(pixels);
        out
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(IDX_LABELS_MAGIC.to_be_bytes());
        out.extend((labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn idx_scaling_and_limits() {
        let mut pixels = vec![0u8; 784 * 3];
        pixels[784] = 255;
        let ds = parse_mnist_idx(&idx_images(3, &pixels), &idx_labels(&[0, 7, 3]), None).unwrap();
        assert_eq!(ds.n_features(), 784);
        assert!(ds.row(0).iter().all(|&x| x == 0.0));
        assert_eq!(ds.row(1)[0], 1.0);
        assert_eq!(ds.labels(), &[0, 7, 3]);
        assert_eq!(ds.class_count(), 10);
        let ds = parse_mnist_idx(&idx_images(3, &pixels), &idx_labels(&[0, 7, 3]), Some(2)).unwrap();
        assert_eq!(ds.n_rows(), 2);
    }

    #[test]
    fn idx_errors() {
        let pixels = vec![0u8; 784 * 2];
        let mut bad = idx_images(2, &pixels);
        bad[3] = 0x01;
        assert!(matches!(parse_mnist_idx(&bad, &idx_labels(&[0, 1]), None), Err(DatasetError::BadMagic { .. })));
        assert!(matches!(
            parse_mnist_idx(&idx_images(2, &pixels), &idx_labels(&[0, 1, 2]), None),
            Err(DatasetError::CountMismatch { images: 2, labels: 3 })
        ));
        assert!(matches!(
            parse_mnist_idx(&idx_images(2, &pixels[..784 + 10]), &idx_labels(&[0, 1]), None),
            Err(DatasetError::TruncatedFile(_))
        ));
        assert!(matches!(parse_mnist_idx(&[0, 0], &idx_labels(&[0]), None), Err(DatasetError::TruncatedFile(_))));
    }

    #[test]
    fn blobs_shape_and_zero_noise_limit() {
        let mut src = EntropySource::pseudo(1);
        let ds = synth_blobs(2, 50, 3, 0.5, &mut src).unwrap();
        assert_eq!(ds.n_rows(), 100);
        assert_eq!(ds.labels().iter().filter(|&&l| l == 0).count(), 50);

        let ds = synth_blobs(3, 10, 2, 1e-12, &mut src).unwrap();
        for (row, label) in ds.rows() {
            for &x in row {
                assert!((x - 2.0 * label as f64).abs() < 1e-10);
            }
        }
        assert!(synth_blobs(1, 10, 2, 0.1, &mut src).is_err());
        assert!(synth_blobs(2, 10, 2, 0.0, &mut src).is_err());
    }

    #[test]
    fn blobs_deterministic() {
        let a = synth_blobs(3, 20, 4, 0.6, &mut EntropySource::quantum_sim(5)).unwrap();
        let b = synth_blobs(3, 20, 4, 0.6, &mut EntropySource::quantum_sim(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_seventy_thirty() {
        let ds = balanced(10, 2);
        let plan = stratified_split(&ds, 0.7, &mut EntropySource::pseudo(1)).unwrap();
        assert_eq!(plan.train_indices.len(), 7);
        assert_eq!(plan.test_indices.len(), 3);
        let per_class: Vec<usize> =
            (0..2).map(|c| plan.train_indices.iter().filter(|&&i| ds.label(i) == c).count()).collect();
        assert!(per_class == [4, 3] || per_class == [3, 4], "{per_class:?}");
    }

    #[test]
    fn split_half_is_stratified() {
        let ds = balanced(4, 2);
        let plan = stratified_split(&ds, 0.5, &mut EntropySource::pseudo(2)).unwrap();
        for side in [&plan.train_indices, &plan.test_indices] {
            let mut labels: Vec<usize> = side.iter().map(|&i| ds.label(i)).collect();
            labels.sort_unstable();
            assert_eq!(labels, [0, 1]);
        }
    }

    #[test]
    fn split_deterministic_and_errors() {
        let ds = balanced(30, 3);
        let a = stratified_split(&ds, 0.7, &mut EntropySource::pseudo(9)).unwrap();
        let b = stratified_split(&ds, 0.7, &mut EntropySource::pseudo(9)).unwrap();
        assert_eq!(a, b);
        assert!(stratified_split(&ds, 1.0, &mut EntropySource::pseudo(9)).is_err());
        let tiny = Dataset::new(vec![0.0, 1.0, 2.0], 1, vec![0, 0, 1], 2).unwrap();
        assert!(matches!(
            stratified_split(&tiny, 0.7, &mut EntropySource::pseudo(9)),
            Err(DatasetError::ClassTooSmall { class: 1, count: 1 })
        ));
    }

    #[test]
    fn folds_sizes_and_partition() {
        let ds = balanced(10, 2);
        let plan = k_folds(&ds, 10, &mut EntropySource::pseudo(1)).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);
        let plan = k_folds(&ds, 3, &mut EntropySource::pseudo(1)).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, [3, 3, 4]);
        let mut all: Vec<usize> = (0..3).flat_map(|f| plan.test_indices(f)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(matches!(k_folds(&ds, 11, &mut EntropySource::pseudo(1)), Err(DatasetError::KTooLarge { .. })));
        assert!(k_folds(&ds, 1, &mut EntropySource::pseudo(1)).is_err());
    }
}
