//! Dataset ingestion (IDX images, delimited tables), synthetic planted-model
//! generation, and train/test splitting.

use std::fs::File;
use std::io::{BufWriter, Cursor, Read, Write};

use byteorder::{BigEndian, ReadBytesExt};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classifiers::{ClassifierBank, LabelMatrix};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::sparse_coding::{Dictionary, SparseCode};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A labeled dataset: samples are columns, labels are class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        samples: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::Data("dataset has no samples".into()));
        }
        if samples.ncols() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "label count vs sample columns",
                expected: samples.ncols(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains non-finite samples".into()));
        }
        Ok(Dataset {
            samples,
            labels,
            class_count,
            provenance: provenance.into(),
        })
    }

    pub fn signal_dim(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One-hot +/-1 label matrix over the class indices.
    pub fn label_matrix(&self) -> Result<LabelMatrix> {
        LabelMatrix::from_class_indices(&self.labels, self.class_count)
    }

    /// Subset by sample indices (kept in the given order).
    pub fn select(&self, keep: &[usize], provenance: impl Into<String>) -> Result<Dataset> {
        let mut samples = Array2::zeros((self.signal_dim(), keep.len()));
        let mut labels = Vec::with_capacity(keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            samples.column_mut(dst).assign(&self.samples.column(src));
            labels.push(self.labels[src]);
        }
        Dataset::new(samples, labels, self.class_count, provenance)
    }
}

fn read_file(path: &str) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

/// Loads an IDX image/label file pair (big-endian magic and dimensions,
/// unsigned byte pixels). Pixels are scaled to [0, 1]; images are flattened
/// row-major.
pub fn load_idx(images_path: &str, labels_path: &str) -> Result<Dataset> {
    let img_bytes = read_file(images_path)?;
    let mut cur = Cursor::new(&img_bytes);
    let magic = cur.read_u32::<BigEndian>().map_err(|_| Error::Truncated {
        path: images_path.into(),
        needed: 4,
        had: img_bytes.len(),
    })?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: images_path.into(),
            got: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = cur.read_u32::<BigEndian>().map_err(|_| Error::Truncated {
        path: images_path.into(),
        needed: 16,
        had: img_bytes.len(),
    })? as usize;
    let rows = cur.read_u32::<BigEndian>().map_err(|_| Error::Truncated {
        path: images_path.into(),
        needed: 16,
        had: img_bytes.len(),
    })? as usize;
    let cols = cur.read_u32::<BigEndian>().map_err(|_| Error::Truncated {
        path: images_path.into(),
        needed: 16,
        had: img_bytes.len(),
    })? as usize;
    let d = rows * cols;
    let needed = 16 + count * d;
    if img_bytes.len() < needed {
        return Err(Error::Truncated {
            path: images_path.into(),
            needed,
            had: img_bytes.len(),
        });
    }
    let pixels = &img_bytes[16..16 + count * d];

    let lab_bytes = read_file(labels_path)?;
    let mut cur = Cursor::new(&lab_bytes);
    let magic = cur.read_u32::<BigEndian>().map_err(|_| Error::Truncated {
        path: labels_path.into(),
        needed: 4,
        had: lab_bytes.len(),
    })?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: labels_path.into(),
            got: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let lab_count = cur.read_u32::<BigEndian>().map_err(|_| Error::Truncated {
        path: labels_path.into(),
        needed: 8,
        had: lab_bytes.len(),
    })? as usize;
    if lab_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: lab_count,
        });
    }
    let needed = 8 + count;
    if lab_bytes.len() < needed {
        return Err(Error::Truncated {
            path: labels_path.into(),
            needed,
            had: lab_bytes.len(),
        });
    }
    let labels: Vec<usize> = lab_bytes[8..8 + count].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().copied().max().map_or(1, |m| m + 1);

    // Column i is image i flattened row-major.
    let mut samples = Array2::zeros((d, count));
    for i in 0..count {
        for p in 0..d {
            samples[(p, i)] = pixels[i * d + p] as f64 / 255.0;
        }
    }
    Dataset::new(
        samples,
        labels,
        class_count,
        format!("idx({images_path})"),
    )
}

/// Loads a delimited numeric table: rows are samples, one column carries the
/// class label. A single leading header row is skipped when non-numeric.
pub fn load_delimited(path: &str, delimiter: char, label_column: usize) -> Result<Dataset> {
    let text = String::from_utf8(read_file(path)?)
        .map_err(|_| Error::Data(format!("{path} is not valid UTF-8")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first_content_line = true;
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(delimiter).map(str::trim).collect();
        if first_content_line {
            first_content_line = false;
            // Header row: skip when any cell fails to parse.
            if cells.iter().any(|c| c.parse::<f64>().is_err()) {
                continue;
            }
        }
        let w = cells.len();
        match width {
            None => {
                if label_column >= w {
                    return Err(Error::InvalidConfig(format!(
                        "label column {label_column} out of range for {w}-column table"
                    )));
                }
                width = Some(w);
            }
            Some(expected) if expected != w => {
                return Err(Error::RaggedRow {
                    path: path.into(),
                    row: line_no,
                    got: w,
                    expected,
                });
            }
            _ => {}
        }
        let mut features = Vec::with_capacity(w - 1);
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                path: path.into(),
                row: line_no,
                col,
                cell: (*cell).to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteData {
                    path: path.into(),
                    index: rows.len(),
                });
            }
            if col == label_column {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::Data(format!(
                        "label cell {v} at row {line_no} is not a non-negative integer"
                    )));
                }
                labels.push(v as usize);
            } else {
                features.push(v);
            }
        }
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{path} contains no data rows")));
    }
    let d = rows[0].len();
    let n = rows.len();
    let mut samples = Array2::zeros((d, n));
    for (i, row) in rows.iter().enumerate() {
        for (r, &v) in row.iter().enumerate() {
            samples[(r, i)] = v;
        }
    }
    let class_count = labels.iter().copied().max().map_or(1, |m| m + 1);
    Dataset::new(samples, labels, class_count, format!("csv({path})"))
}

/// Writes a dataset as a delimited table (features plus a label column).
/// Floats use the shortest round-trip formatting, so reloading reproduces
/// the dataset exactly.
pub fn save_delimited(
    dataset: &Dataset,
    path: &str,
    delimiter: char,
    label_column: usize,
) -> Result<()> {
    let d = dataset.signal_dim();
    if label_column > d {
        return Err(Error::InvalidConfig(format!(
            "label column {label_column} out of range for {} feature columns",
            d
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..dataset.len() {
        let mut cells: Vec<String> = Vec::with_capacity(d + 1);
        for r in 0..d {
            cells.push(format!("{}", dataset.samples[(r, i)]));
        }
        cells.insert(label_column, format!("{}", dataset.labels[i]));
        let line = cells.join(&delimiter.to_string());
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parameters of the planted generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub k_true: usize,
    pub c: usize,
    pub n: usize,
    pub t_true: usize,
    pub noise_std: f64,
    pub label_noise_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k_true == 0 || self.c == 0 || self.n == 0 || self.t_true == 0 {
            return Err(Error::InvalidConfig(
                "synthetic dimensions must all be positive".into(),
            ));
        }
        if self.t_true > self.k_true {
            return Err(Error::InvalidConfig(format!(
                "t_true={} exceeds k_true={}",
                self.t_true, self.k_true
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.label_noise_rate) {
            return Err(Error::InvalidConfig(
                "label_noise_rate must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// The planted ground truth returned alongside a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub dictionary: Dictionary,
    pub codes: Vec<SparseCode>,
    pub classifiers: ClassifierBank,
    /// Labels before noise flips.
    pub clean_labels: Vec<usize>,
}

const MAX_REJECTIONS: usize = 100_000;
const PLANTED_MARGIN: f64 = 0.2;

/// Draws a dataset from a planted sparse model: unit-norm Gaussian
/// dictionary, T-sparse codes with coefficient magnitudes in [0.5, 1.5],
/// labels by the argmax of planted linear classifiers (rejecting draws whose
/// top-two score margin is below 0.2), Gaussian sample noise, and an
/// optional fraction of flipped labels.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, SyntheticTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let atoms = Array2::from_shape_fn((spec.d, spec.k_true), |_| {
        rng.sample::<f64, _>(StandardNormal)
    });
    let dictionary = Dictionary::from_unnormalized(atoms)?;

    let mut w = Array2::from_shape_fn((spec.k_true, spec.c), |_| {
        rng.sample::<f64, _>(StandardNormal)
    });
    for mut col in w.columns_mut() {
        let norm = col.dot(&col).sqrt();
        col.mapv_inplace(|v| v / norm);
    }
    let classifiers = ClassifierBank::new(w.clone(), Array1::zeros(spec.c), LossKind::Square)?;

    let mut rejections = 0usize;
    let mut codes = Vec::with_capacity(spec.n);
    let mut clean_labels = Vec::with_capacity(spec.n);
    let mut samples = Array2::zeros((spec.d, spec.n));
    for i in 0..spec.n {
        let (code, label) = loop {
            let support = rand::seq::index::sample(&mut rng, spec.k_true, spec.t_true).into_vec();
            let pairs: Vec<(usize, f64)> = support
                .into_iter()
                .map(|idx| {
                    let mag = 0.5 + rng.gen::<f64>();
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (idx, sign * mag)
                })
                .collect();
            let code = SparseCode::from_pairs(pairs, spec.k_true)?;
            let dense = code.to_dense();
            let scores = w.t().dot(&dense);
            let mut best = (f64::NEG_INFINITY, 0usize);
            let mut second = f64::NEG_INFINITY;
            for (j, &s) in scores.iter().enumerate() {
                if s > best.0 {
                    second = best.0;
                    best = (s, j);
                } else if s > second {
                    second = s;
                }
            }
            let margin = if spec.c == 1 { f64::INFINITY } else { best.0 - second };
            if margin >= PLANTED_MARGIN {
                break (code, best.1);
            }
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(Error::Data(format!(
                    "margin {PLANTED_MARGIN} infeasible: {MAX_REJECTIONS} rejections exceeded"
                )));
            }
        };
        let mut col = samples.column_mut(i);
        for (idx, v) in code.iter() {
            col.iter_mut()
                .zip(dictionary.atom(idx))
                .for_each(|(s, &a)| *s += v * a);
        }
        if spec.noise_std > 0.0 {
            for s in col.iter_mut() {
                *s += spec.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        codes.push(code);
        clean_labels.push(label);
    }

    let mut labels = clean_labels.clone();
    if spec.label_noise_rate > 0.0 && spec.c > 1 {
        for label in labels.iter_mut() {
            if rng.gen::<f64>() < spec.label_noise_rate {
                let offset = 1 + rng.gen_range(0..spec.c - 1);
                *label = (*label + offset) % spec.c;
            }
        }
    }

    let dataset = Dataset::new(
        samples,
        labels,
        spec.c,
        format!("synthetic(seed={})", spec.seed),
    )?;
    Ok((
        dataset,
        SyntheticTruth {
            dictionary,
            codes,
            classifiers,
            clean_labels,
        },
    ))
}

/// Splits a dataset into disjoint, exhaustive train/test parts.
///
/// Stratified mode preserves per-class proportions within one sample.
pub fn split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx: Vec<usize> = Vec::new();
    if stratified {
        for class in 0..dataset.class_count {
            let mut members: Vec<usize> = (0..n)
                .filter(|&i| dataset.labels[i] == class)
                .collect();
            if members.is_empty() {
                continue;
            }
            if members.len() < 2 {
                return Err(Error::Data(format!(
                    "class {class} has fewer than 2 samples; stratified split impossible"
                )));
            }
            members.shuffle(&mut rng);
            let take = ((test_fraction * members.len() as f64).round() as usize)
                .clamp(1, members.len() - 1);
            test_idx.extend_from_slice(&members[..take]);
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let take = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        test_idx.extend_from_slice(&order[..take]);
    }
    test_idx.sort_unstable();
    let in_test: Vec<bool> = {
        let mut v = vec![false; n];
        for &i in &test_idx {
            v[i] = true;
        }
        v
    };
    let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    let train = dataset.select(&train_idx, format!("{} [train]", dataset.provenance))?;
    let test = dataset.select(&test_idx, format!("{} [test]", dataset.provenance))?;
    Ok((train, test))
}
