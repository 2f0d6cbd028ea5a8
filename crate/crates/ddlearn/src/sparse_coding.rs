//! Traditional sparse coding: greedy l0-constrained least squares (OMP),
//! standalone and as the inner kernel of discriminative coding and the
//! dictionary update.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{col_dot, col_vec_dot, norm_sq, solve_spd};

/// Relative early-exit tolerance: callers that want the default stop
/// encoding once the residual falls below `1e-9 * ||signal||`.
pub fn default_residual_tol(signal_norm: f64) -> f64 {
    1e-9 * signal_norm
}

/// A dictionary of unit-norm atoms, stored as the columns of a `d x K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Array2<f64>,
}

impl Dictionary {
    /// Validates unit column norms (within 1e-9) and finiteness.
    pub fn new(atoms: Array2<f64>) -> Result<Self> {
        let (d, k) = atoms.dim();
        if d == 0 || k == 0 {
            return Err(Error::InvalidConfig(format!(
                "dictionary must be non-empty, got {d}x{k}"
            )));
        }
        for (j, col) in atoms.columns().into_iter().enumerate() {
            let mut sq = 0.0;
            for &x in col {
                if !x.is_finite() {
                    return Err(Error::NonFinite("dictionary entry"));
                }
                sq += x * x;
            }
            let norm = sq.sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "dictionary column {j} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Normalizes every column then validates. Errors if a column is zero.
    pub fn from_unnormalized(mut atoms: Array2<f64>) -> Result<Self> {
        for mut col in atoms.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm <= 0.0 || !norm.is_finite() {
                return Err(Error::InvalidConfig(
                    "cannot normalize a zero or non-finite dictionary column".into(),
                ));
            }
            col.mapv_inplace(|x| x / norm);
        }
        Dictionary::new(atoms)
    }

    pub fn signal_dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &Array2<f64> {
        &self.atoms
    }

    pub fn atom(&self, k: usize) -> ArrayView1<'_, f64> {
        self.atoms.column(k)
    }
}

/// A sparse coefficient vector: at most `T` nonzeros over `ambient_dim`
/// coordinates, indices strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    indices: Vec<usize>,
    values: Vec<f64>,
    ambient_dim: usize,
}

impl SparseCode {
    pub fn empty(ambient_dim: usize) -> Self {
        SparseCode {
            indices: Vec::new(),
            values: Vec::new(),
            ambient_dim,
        }
    }

    /// Builds a code from parallel index/value lists, validating the
    /// invariants: sorted unique in-range indices, finite nonzero values.
    pub fn new(indices: Vec<usize>, values: Vec<f64>, ambient_dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "sparse code index/value lists",
                expected: indices.len(),
                got: values.len(),
            });
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidConfig(
                    "sparse code indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= ambient_dim {
                return Err(Error::InvalidConfig(format!(
                    "sparse code index {last} out of range for dimension {ambient_dim}"
                )));
            }
        }
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse code value"));
            }
            if v == 0.0 {
                return Err(Error::InvalidConfig(
                    "sparse code must not store exact zeros".into(),
                ));
            }
        }
        Ok(SparseCode {
            indices,
            values,
            ambient_dim,
        })
    }

    /// Builds from unsorted (index, value) pairs, dropping exact zeros.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>, ambient_dim: usize) -> Result<Self> {
        pairs.retain(|&(_, v)| v != 0.0);
        pairs.sort_by_key(|&(i, _)| i);
        let (indices, values) = pairs.into_iter().unzip();
        SparseCode::new(indices, values, ambient_dim)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.ambient_dim);
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// Sparse dot product against a dense vector of the ambient dimension.
    pub fn dot_dense(&self, v: &ArrayView1<f64>) -> f64 {
        self.iter().map(|(i, x)| x * v[i]).sum()
    }

    /// Euclidean distance to another code over the shared ambient space.
    pub fn distance(&self, other: &SparseCode) -> f64 {
        let mut sq = 0.0;
        let (mut a, mut b) = (0, 0);
        while a < self.indices.len() || b < other.indices.len() {
            let ia = self.indices.get(a).copied().unwrap_or(usize::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(usize::MAX);
            if ia == ib {
                let d = self.values[a] - other.values[b];
                sq += d * d;
                a += 1;
                b += 1;
            } else if ia < ib {
                sq += self.values[a] * self.values[a];
                a += 1;
            } else {
                sq += other.values[b] * other.values[b];
                b += 1;
            }
        }
        sq.sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Greedy selection trace alongside the final code.
#[derive(Debug, Clone)]
pub struct OmpResult {
    pub code: SparseCode,
    /// Residual norm before any selection and after each refit.
    pub residual_norms: Vec<f64>,
}

/// Gram entries for the encoding matrix: either computed on demand from the
/// columns or read from a precomputed table built with the same column dots,
/// so both paths yield bit-identical floats.
enum Gram<'a> {
    Lazy,
    Table(&'a Array2<f64>),
}

impl Gram<'_> {
    #[inline]
    fn entry(&self, cols: &ArrayView2<f64>, i: usize, j: usize) -> f64 {
        match self {
            Gram::Lazy => col_dot(cols, i, j),
            Gram::Table(t) => t[(i, j)],
        }
    }
}

/// Precomputes the full Gram table entry-by-entry (same dots as the lazy path).
pub(crate) fn gram_table(cols: &ArrayView2<f64>) -> Array2<f64> {
    let k = cols.ncols();
    let mut g = Array2::zeros((k, k));
    for i in 0..k {
        for j in i..k {
            let d = col_dot(cols, i, j);
            g[(i, j)] = d;
            g[(j, i)] = d;
        }
    }
    g
}

fn validate_encode_args(
    cols: &ArrayView2<f64>,
    signal: &ArrayView1<f64>,
    t: usize,
    residual_tol: f64,
) -> Result<()> {
    if signal.len() != cols.nrows() {
        return Err(Error::DimensionMismatch {
            context: "signal length vs encoding matrix rows",
            expected: cols.nrows(),
            got: signal.len(),
        });
    }
    if t > cols.ncols() {
        return Err(Error::InvalidConfig(format!(
            "sparsity budget T={t} exceeds atom count {}",
            cols.ncols()
        )));
    }
    if !(residual_tol >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "residual tolerance must be >= 0, got {residual_tol}"
        )));
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    Ok(())
}

/// Core greedy loop over an arbitrary column matrix. Selection maximizes
/// |column . residual| / ||column||; ties go to the lower index; after each
/// selection the coefficients are refit by least squares on the support.
fn omp_core(
    cols: &ArrayView2<f64>,
    gram: &Gram,
    signal: &ArrayView1<f64>,
    t: usize,
    residual_tol: f64,
) -> OmpResult {
    let k = cols.ncols();
    let mut inv_norms = vec![0.0f64; k];
    for j in 0..k {
        let nsq = gram.entry(cols, j, j);
        inv_norms[j] = if nsq > 0.0 { 1.0 / nsq.sqrt() } else { 0.0 };
    }

    let mut residual = signal.to_owned();
    let mut selected: Vec<usize> = Vec::with_capacity(t);
    let mut coeffs: Vec<f64> = Vec::new();
    let mut trace = vec![residual.dot(&residual).sqrt()];
    let mut in_support = vec![false; k];

    while selected.len() < t && *trace.last().unwrap() > residual_tol {
        // Atom selection by normalized correlation with the residual.
        let mut best = usize::MAX;
        let mut best_score = 0.0f64;
        for j in 0..k {
            if in_support[j] || inv_norms[j] == 0.0 {
                continue;
            }
            let score = col_vec_dot(cols, j, &residual.view()).abs() * inv_norms[j];
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        if best == usize::MAX || best_score == 0.0 {
            break;
        }
        selected.push(best);
        in_support[best] = true;

        // Least squares on the support via the support Gram matrix.
        let m = selected.len();
        let mut g = Array2::zeros((m, m));
        let mut rhs = Array1::zeros(m);
        for (a, &ia) in selected.iter().enumerate() {
            for (b, &ib) in selected.iter().enumerate().skip(a) {
                let e = gram.entry(cols, ia, ib);
                g[(a, b)] = e;
                g[(b, a)] = e;
            }
            rhs[a] = col_vec_dot(cols, ia, signal);
        }
        match solve_spd(&g, &rhs, 1e-12) {
            Some(x) => coeffs = x.to_vec(),
            None => {
                // Collinear support even after jitter: drop the newest atom.
                let dropped = selected.pop().unwrap();
                in_support[dropped] = false;
                break;
            }
        }

        residual.assign(signal);
        for (a, &ia) in selected.iter().enumerate() {
            let c = coeffs[a];
            residual
                .iter_mut()
                .zip(cols.column(ia))
                .for_each(|(r, &v)| *r -= c * v);
        }
        trace.push(residual.dot(&residual).sqrt());
    }

    let pairs: Vec<(usize, f64)> = selected.into_iter().zip(coeffs).collect();
    let code = SparseCode::from_pairs(pairs, k).expect("greedy support is valid by construction");
    OmpResult {
        code,
        residual_norms: trace,
    }
}

/// Orthogonal matching pursuit over a unit-norm dictionary.
pub fn omp_encode(
    dict: &Dictionary,
    signal: &ArrayView1<f64>,
    t: usize,
    residual_tol: f64,
) -> Result<SparseCode> {
    Ok(omp_encode_detailed(dict, signal, t, residual_tol)?.code)
}

/// As [`omp_encode`], additionally reporting the per-iteration residual norms.
pub fn omp_encode_detailed(
    dict: &Dictionary,
    signal: &ArrayView1<f64>,
    t: usize,
    residual_tol: f64,
) -> Result<OmpResult> {
    let cols = dict.atoms().view();
    validate_encode_args(&cols, signal, t, residual_tol)?;
    Ok(omp_core(&cols, &Gram::Lazy, signal, t, residual_tol))
}

/// OMP over an arbitrary column matrix (columns need not be normalized);
/// selection uses norm-compensated correlations. This is the inner kernel
/// for the stacked discriminative systems.
pub fn omp_encode_columns(
    cols: &ArrayView2<f64>,
    signal: &ArrayView1<f64>,
    t: usize,
    residual_tol: f64,
) -> Result<SparseCode> {
    validate_encode_args(cols, signal, t, residual_tol)?;
    Ok(omp_core(cols, &Gram::Lazy, signal, t, residual_tol).code)
}

/// Encodes every column of `signals`, amortizing the dictionary Gram matrix
/// across samples. Results are identical to per-sample [`omp_encode`] calls.
pub fn batch_encode(
    dict: &Dictionary,
    signals: &ArrayView2<f64>,
    t: usize,
    residual_tol: f64,
) -> Result<Vec<SparseCode>> {
    batch_encode_with_tol(dict, signals, t, |_| residual_tol)
}

/// Batch encoding with the default per-sample relative tolerance.
pub(crate) fn batch_encode_default_tol(
    dict: &Dictionary,
    signals: &ArrayView2<f64>,
    t: usize,
) -> Result<Vec<SparseCode>> {
    batch_encode_with_tol(dict, signals, t, |norm| default_residual_tol(norm))
}

fn batch_encode_with_tol(
    dict: &Dictionary,
    signals: &ArrayView2<f64>,
    t: usize,
    tol_for_norm: impl Fn(f64) -> f64 + Sync,
) -> Result<Vec<SparseCode>> {
    if signals.ncols() == 0 {
        return Ok(Vec::new());
    }
    let cols = dict.atoms().view();
    for i in 0..signals.ncols() {
        validate_encode_args(&cols, &signals.column(i), t, 0.0)?;
    }
    let gram = gram_table(&cols);
    let results: Vec<SparseCode> = (0..signals.ncols())
        .into_par_iter()
        .map(|i| {
            let signal = signals.column(i);
            let tol = tol_for_norm(signal.dot(&signal).sqrt());
            omp_core(&cols, &Gram::Table(&gram), &signal, t, tol).code
        })
        .collect();
    Ok(results)
}

/// Squared Euclidean residual `||signal - D code||^2`.
pub fn reconstruction_error(
    dict: &Dictionary,
    code: &SparseCode,
    signal: &ArrayView1<f64>,
) -> Result<f64> {
    if code.ambient_dim() != dict.atom_count() {
        return Err(Error::DimensionMismatch {
            context: "code ambient dimension vs dictionary atoms",
            expected: dict.atom_count(),
            got: code.ambient_dim(),
        });
    }
    if signal.len() != dict.signal_dim() {
        return Err(Error::DimensionMismatch {
            context: "signal length vs dictionary rows",
            expected: dict.signal_dim(),
            got: signal.len(),
        });
    }
    let mut r = signal.to_owned();
    for (i, v) in code.iter() {
        r.iter_mut()
            .zip(dict.atom(i))
            .for_each(|(ri, &ai)| *ri -= v * ai);
    }
    Ok(norm_sq(&r.view()))
}
