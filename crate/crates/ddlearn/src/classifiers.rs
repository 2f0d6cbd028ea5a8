//! One-vs-all linear classifiers trained on fixed sparse codes by damped
//! Newton iterations with backtracking, one classifier per class.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::losses::{LossKind, Margin};
use crate::sparse_coding::SparseCode;

const MAX_NEWTON_ITERS: usize = 200;
const MAX_HALVINGS: usize = 30;
const GRAD_TOL_PER_SAMPLE: f64 = 1e-8;
const UNBOUNDED_GUARD: f64 = 1e10;

/// Labels over {-1, +1}: column `i` is the label vector of sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    entries: Array2<f64>,
}

impl LabelMatrix {
    /// Validates that every entry is exactly -1 or +1.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 {
            return Err(Error::Data("label matrix needs at least one class".into()));
        }
        for &v in entries.iter() {
            if v != 1.0 && v != -1.0 {
                return Err(Error::Data(format!(
                    "label matrix entries must be exactly -1 or +1, got {v}"
                )));
            }
        }
        Ok(LabelMatrix { entries })
    }

    /// One-hot construction: +1 at the sample's class, -1 elsewhere.
    pub fn from_class_indices(labels: &[usize], class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Data("class count must be positive".into()));
        }
        let n = labels.len();
        let mut entries = Array2::from_elem((class_count, n), -1.0);
        for (i, &c) in labels.iter().enumerate() {
            if c >= class_count {
                return Err(Error::Data(format!(
                    "label {c} out of range for {class_count} classes (sample {i})"
                )));
            }
            entries[(c, i)] = 1.0;
        }
        LabelMatrix::new(entries)
    }

    pub fn class_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn row(&self, class: usize) -> ArrayView1<'_, f64> {
        self.entries.row(class)
    }

    pub fn label(&self, class: usize, sample: usize) -> f64 {
        self.entries[(class, sample)]
    }

    /// True when every column carries exactly one +1.
    pub fn is_one_hot(&self) -> bool {
        self.entries
            .columns()
            .into_iter()
            .all(|col| col.iter().filter(|&&v| v == 1.0).count() == 1)
    }

    /// Keeps only the selected sample columns.
    pub fn select_samples(&self, keep: &[usize]) -> LabelMatrix {
        let mut entries = Array2::zeros((self.class_count(), keep.len()));
        for (dst, &src) in keep.iter().enumerate() {
            entries.column_mut(dst).assign(&self.entries.column(src));
        }
        LabelMatrix { entries }
    }
}

/// The trained linear classifiers: weight columns plus a bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBank {
    weights: Array2<f64>,
    biases: Array1<f64>,
    loss: LossKind,
}

impl ClassifierBank {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, loss: LossKind) -> Result<Self> {
        if weights.ncols() == 0 {
            return Err(Error::Data("classifier bank needs at least one class".into()));
        }
        if biases.len() != weights.ncols() {
            return Err(Error::DimensionMismatch {
                context: "bias count vs classifier columns",
                expected: weights.ncols(),
                got: biases.len(),
            });
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("classifier parameters"));
        }
        Ok(ClassifierBank {
            weights,
            biases,
            loss,
        })
    }

    pub fn code_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn weight_column(&self, class: usize) -> ArrayView1<'_, f64> {
        self.weights.column(class)
    }
}

/// A single trained classifier plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Regularized empirical loss of one classifier over augmented parameters
/// `[w; b]`; the ridge applies to the weight block only.
fn empirical_loss(
    codes: &ArrayView2<f64>,
    labels: &ArrayView1<f64>,
    loss: LossKind,
    ridge: f64,
    wb: &Array1<f64>,
) -> Result<f64> {
    let k = codes.nrows();
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        let s = codes.column(i).dot(&wb.slice(ndarray::s![..k])) + wb[k];
        total += loss.value(Margin::new(l * s)?);
    }
    let wsq: f64 = wb.slice(ndarray::s![..k]).iter().map(|w| w * w).sum();
    Ok(total + ridge * wsq)
}

/// For an unregularized problem whose gradient has vanished along a diverging
/// path (separable data under exponential-family losses), doubling the
/// parameters still strictly decreases the loss. Reject such "solutions"
/// as unbounded instead of returning them.
fn check_bounded(
    codes: &ArrayView2<f64>,
    labels: &ArrayView1<f64>,
    loss: LossKind,
    ridge: f64,
    wb: &Array1<f64>,
    current: f64,
) -> Result<()> {
    if ridge > 0.0 {
        return Ok(());
    }
    let doubled = wb.mapv(|v| 2.0 * v);
    let scaled = empirical_loss(codes, labels, loss, ridge, &doubled)?;
    if scaled < current {
        return Err(Error::NonConvergence(
            "loss is unbounded below (separable data without regularization); \
             use a positive ridge"
                .into(),
        ));
    }
    Ok(())
}

/// Trains one binary classifier on fixed codes by damped Newton steps.
///
/// Minimizes `sum_i loss(l_i (w' x_i + b)) + ridge ||w||^2` from a zero
/// start. Reports non-convergence instead of returning a diverging iterate.
pub fn train_classifier(
    codes: &ArrayView2<f64>,
    labels: &ArrayView1<f64>,
    loss: LossKind,
    ridge: f64,
) -> Result<TrainedClassifier> {
    let (k, n) = codes.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "label count vs code columns",
            expected: n,
            got: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::Data("cannot train a classifier on zero samples".into()));
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidConfig(format!("ridge must be >= 0, got {ridge}")));
    }
    for &l in labels.iter() {
        if l != 1.0 && l != -1.0 {
            return Err(Error::Data(format!("labels must be -1 or +1, got {l}")));
        }
    }

    let dim = k + 1;
    let mut wb = Array1::<f64>::zeros(dim);
    let grad_tol = GRAD_TOL_PER_SAMPLE * n as f64;
    let mut current = empirical_loss(codes, labels, loss, ridge, &wb)?;
    let mut iterations = 0usize;

    for _ in 0..MAX_NEWTON_ITERS {
        // Gradient and Hessian over the augmented parameters.
        let mut grad = Array1::<f64>::zeros(dim);
        let mut hess = Array2::<f64>::zeros((dim, dim));
        for (i, &l) in labels.iter().enumerate() {
            let xi = codes.column(i);
            let s = xi.dot(&wb.slice(ndarray::s![..k])) + wb[k];
            let z = Margin::new(l * s)?;
            let d1 = loss.d1(z) * l;
            let d2 = loss.d2(z);
            for r in 0..k {
                grad[r] += d1 * xi[r];
            }
            grad[k] += d1;
            for r in 0..k {
                let dr = d2 * xi[r];
                for c in r..k {
                    hess[(r, c)] += dr * xi[c];
                }
                hess[(r, k)] += dr;
            }
            hess[(k, k)] += d2;
        }
        for r in 0..k {
            grad[r] += 2.0 * ridge * wb[r];
            hess[(r, r)] += 2.0 * ridge;
        }
        for r in 0..dim {
            for c in 0..r {
                hess[(r, c)] = hess[(c, r)];
            }
        }

        let grad_norm = grad.dot(&grad).sqrt();
        if grad_norm <= grad_tol {
            check_bounded(codes, labels, loss, ridge, &wb, current)?;
            return Ok(TrainedClassifier {
                weights: wb.slice(ndarray::s![..k]).to_owned(),
                bias: wb[k],
                iterations,
                grad_norm,
            });
        }

        let neg_grad = grad.mapv(|g| -g);
        let step = solve_spd(&hess, &neg_grad, 1e-10).ok_or_else(|| {
            Error::NonConvergence("classifier Hessian is not positive definite".into())
        })?;

        // Backtracking on simple decrease.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &wb + &step.mapv(|s| scale * s);
            let value = empirical_loss(codes, labels, loss, ridge, &candidate)?;
            if value < current {
                wb = candidate;
                current = value;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        let norm = wb.dot(&wb).sqrt();
        if norm > UNBOUNDED_GUARD {
            return Err(Error::NonConvergence(format!(
                "classifier parameters diverged (norm {norm:.3e}); the problem is likely \
                 unbounded, use a positive ridge"
            )));
        }
    }

    // Final stationarity check after the iteration cap or a stalled search.
    let mut grad = Array1::<f64>::zeros(dim);
    for (i, &l) in labels.iter().enumerate() {
        let xi = codes.column(i);
        let s = xi.dot(&wb.slice(ndarray::s![..k])) + wb[k];
        let d1 = loss.d1(Margin::new(l * s)?) * l;
        for r in 0..k {
            grad[r] += d1 * xi[r];
        }
        grad[k] += d1;
    }
    for r in 0..k {
        grad[r] += 2.0 * ridge * wb[r];
    }
    let grad_norm = grad.dot(&grad).sqrt();
    if grad_norm <= grad_tol {
        check_bounded(codes, labels, loss, ridge, &wb, current)?;
        Ok(TrainedClassifier {
            weights: wb.slice(ndarray::s![..k]).to_owned(),
            bias: wb[k],
            iterations,
            grad_norm,
        })
    } else {
        Err(Error::NonConvergence(format!(
            "classifier training stopped with gradient norm {grad_norm:.3e} above tolerance \
             {grad_tol:.3e}"
        )))
    }
}

/// Trains all one-vs-all classifiers; class `j` sees only row `j` of the
/// label matrix, so classes train independently (and in parallel).
pub fn train_all(
    codes: &ArrayView2<f64>,
    labels: &LabelMatrix,
    loss: LossKind,
    ridge: f64,
) -> Result<ClassifierBank> {
    if labels.sample_count() != codes.ncols() {
        return Err(Error::DimensionMismatch {
            context: "label columns vs code columns",
            expected: codes.ncols(),
            got: labels.sample_count(),
        });
    }
    let c = labels.class_count();
    let trained: Vec<TrainedClassifier> = (0..c)
        .into_par_iter()
        .map(|j| train_classifier(codes, &labels.row(j), loss, ridge))
        .collect::<Result<Vec<_>>>()?;
    let k = codes.nrows();
    let mut weights = Array2::zeros((k, c));
    let mut biases = Array1::zeros(c);
    for (j, t) in trained.into_iter().enumerate() {
        weights.column_mut(j).assign(&t.weights);
        biases[j] = t.bias;
    }
    ClassifierBank::new(weights, biases, loss)
}

/// Unsigned decision values `w_j' x + b_j` for every class.
pub fn decision_values(bank: &ClassifierBank, x: &SparseCode) -> Result<Array1<f64>> {
    if x.ambient_dim() != bank.code_dim() {
        return Err(Error::DimensionMismatch {
            context: "code ambient dimension vs classifier rows",
            expected: bank.code_dim(),
            got: x.ambient_dim(),
        });
    }
    let mut scores = bank.biases.clone();
    for j in 0..bank.class_count() {
        let col = bank.weights.column(j);
        scores[j] += x.iter().map(|(i, v)| v * col[i]).sum::<f64>();
    }
    Ok(scores)
}
