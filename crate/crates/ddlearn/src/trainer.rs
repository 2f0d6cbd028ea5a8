//! Joint training: alternates discriminative coding, classifier fitting,
//! the dictionary sweep, and the closed-form noise/cost parameter updates,
//! tracking the full MAP objective each iteration.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::classifiers::{train_all, ClassifierBank, LabelMatrix};
use crate::dictionary::{init_dictionary, ksvd_update, InitKind, InitScheme};
use crate::dsc::{dsc_solve, DscProblem};
use crate::error::{Error, Result};
use crate::losses::{LossKind, Margin};
use crate::sparse_coding::{
    batch_encode_default_tol, default_residual_tol, omp_encode, Dictionary, SparseCode,
};

/// Floors keeping the log-prior terms finite on perfectly fit data.
pub const SIGMA_FLOOR: f64 = 1e-8;
pub const GAMMA_FLOOR: f64 = 1e-8;

/// Per-sample residual standard deviations, floored.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationParams {
    sigma: Array1<f64>,
}

impl RepresentationParams {
    pub fn new(sigma: Array1<f64>) -> Result<Self> {
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("sigma"));
        }
        Ok(RepresentationParams {
            sigma: sigma.mapv(|s| s.max(SIGMA_FLOOR)),
        })
    }

    pub fn sigma(&self) -> &Array1<f64> {
        &self.sigma
    }
}

/// Per-class mean classification costs, floored.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationParams {
    gamma: Array1<f64>,
}

impl ClassificationParams {
    pub fn new(gamma: Array1<f64>) -> Result<Self> {
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gamma"));
        }
        Ok(ClassificationParams {
            gamma: gamma.mapv(|g| g.max(GAMMA_FLOOR)),
        })
    }

    pub fn gamma(&self) -> &Array1<f64> {
        &self.gamma
    }
}

/// Training hyperparameters. `ridge = None` resolves to `1e-6 * N` at
/// training time; all randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub t: usize,
    pub loss: LossKind,
    pub q_max: usize,
    pub p_max: usize,
    pub stop_rel_change: f64,
    pub ridge: Option<f64>,
    pub init_kind: InitKind,
    pub seed: u64,
    /// `Some(mask)`: only samples with `mask[i] = true` are labeled; the
    /// label matrix columns correspond to the labeled samples in order.
    pub semi_supervised_mask: Option<Vec<bool>>,
}

impl TrainConfig {
    pub fn new(k: usize, t: usize, loss: LossKind) -> Self {
        TrainConfig {
            k,
            t,
            loss,
            q_max: 20,
            p_max: 100,
            stop_rel_change: 1e-4,
            ridge: None,
            init_kind: InitKind::FromSamples,
            seed: 0,
            semi_supervised_mask: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.t == 0 {
            return Err(Error::InvalidConfig("T must be at least 1".into()));
        }
        if self.t > self.k {
            return Err(Error::InvalidConfig(format!(
                "sparsity T={} cannot exceed K={}",
                self.t, self.k
            )));
        }
        if self.p_max == 0 {
            return Err(Error::InvalidConfig("p_max must be at least 1".into()));
        }
        if !(self.stop_rel_change >= 0.0) {
            return Err(Error::InvalidConfig("stop_rel_change must be >= 0".into()));
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0) {
                return Err(Error::InvalidConfig("ridge must be >= 0".into()));
            }
        }
        Ok(())
    }

    fn resolved_ridge(&self, n_labeled: usize) -> f64 {
        self.ridge.unwrap_or(1e-6 * n_labeled as f64)
    }

    fn init_scheme(&self) -> InitScheme {
        InitScheme {
            kind: self.init_kind,
            seed: self.seed,
        }
    }
}

/// One row of the objective trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    pub rep_cost: f64,
    pub cls_cost: f64,
    pub log_prior: f64,
}

/// The trained model and its training history.
#[derive(Debug, Clone)]
pub struct DdlModel {
    pub dictionary: Dictionary,
    pub classifiers: ClassifierBank,
    pub codes: Vec<SparseCode>,
    pub rep_params: RepresentationParams,
    pub cls_params: ClassificationParams,
    pub config: TrainConfig,
    pub objective_trace: Vec<ObjectiveBreakdown>,
}

/// Dense `K x N` matrix from sparse codes.
pub fn codes_to_dense(codes: &[SparseCode], k: usize) -> Array2<f64> {
    let mut out = Array2::zeros((k, codes.len()));
    for (i, code) in codes.iter().enumerate() {
        for (idx, v) in code.iter() {
            out[(idx, i)] = v;
        }
    }
    out
}

fn squared_residuals(y: &ArrayView2<f64>, dict: &Dictionary, codes: &[SparseCode]) -> Array1<f64> {
    let n = y.ncols();
    let mut out = Array1::zeros(n);
    for i in 0..n {
        let mut col = y.column(i).to_owned();
        for (idx, v) in codes[i].iter() {
            col.iter_mut()
                .zip(dict.atom(idx))
                .for_each(|(r, &a)| *r -= v * a);
        }
        out[i] = col.dot(&col);
    }
    out
}

/// Closed-form noise updates: `sigma_i = sqrt(||y_i - D x_i||^2 / (M + 2))`.
pub fn update_sigma(
    y: &ArrayView2<f64>,
    dict: &Dictionary,
    codes: &[SparseCode],
) -> Result<RepresentationParams> {
    if codes.len() != y.ncols() {
        return Err(Error::DimensionMismatch {
            context: "code count vs data columns",
            expected: y.ncols(),
            got: codes.len(),
        });
    }
    let m = y.nrows() as f64;
    let res = squared_residuals(y, dict, codes);
    RepresentationParams::new(res.mapv(|r| (r / (m + 2.0)).sqrt()))
}

/// Closed-form cost updates: `gamma_j = mean_j / (N + 1)` where `mean_j`
/// sums the loss over the signed margins (biases included).
pub fn update_gamma(
    labels: &LabelMatrix,
    bank: &ClassifierBank,
    codes: &[SparseCode],
    loss: LossKind,
) -> Result<ClassificationParams> {
    let n = labels.sample_count();
    if codes.len() != n {
        return Err(Error::DimensionMismatch {
            context: "code count vs label columns",
            expected: n,
            got: codes.len(),
        });
    }
    let c = labels.class_count();
    let mut gamma = Array1::zeros(c);
    for j in 0..c {
        let w = bank.weight_column(j);
        let b = bank.biases()[j];
        let mut total = 0.0;
        for (i, code) in codes.iter().enumerate() {
            let s = code.iter().map(|(idx, v)| v * w[idx]).sum::<f64>() + b;
            total += loss.value(Margin::new(labels.label(j, i) * s)?);
        }
        gamma[j] = total / (n as f64 + 1.0);
    }
    ClassificationParams::new(gamma)
}

/// Objective components over arbitrary labeled subsets: the representation
/// term and its log-prior run over all samples, the classification term and
/// its log-prior over the labeled ones.
fn objective_parts(
    y: &ArrayView2<f64>,
    dict: &Dictionary,
    codes: &[SparseCode],
    bank: &ClassifierBank,
    labels: &LabelMatrix,
    labeled: &[usize],
    rep: &RepresentationParams,
    cls: &ClassificationParams,
    loss: LossKind,
) -> Result<ObjectiveBreakdown> {
    let m = y.nrows() as f64;
    let res = squared_residuals(y, dict, codes);
    let sigma = rep.sigma();
    let gamma = cls.gamma();

    let mut rep_cost = 0.0;
    let mut log_prior = 0.0;
    for i in 0..y.ncols() {
        rep_cost += res[i] / (2.0 * sigma[i] * sigma[i]);
        log_prior += (m + 2.0) * sigma[i].ln();
    }

    let n_lab = labeled.len() as f64;
    let mut cls_cost = 0.0;
    for j in 0..labels.class_count() {
        let w = bank.weight_column(j);
        let b = bank.biases()[j];
        let mut class_cost = 0.0;
        for (pos, &i) in labeled.iter().enumerate() {
            let s = codes[i].iter().map(|(idx, v)| v * w[idx]).sum::<f64>() + b;
            class_cost += loss.value(Margin::new(labels.label(j, pos) * s)?);
        }
        cls_cost += class_cost / gamma[j];
        log_prior += (n_lab + 1.0) * gamma[j].ln();
    }

    let total = rep_cost + cls_cost + log_prior;
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "objective is not finite (rep {rep_cost}, cls {cls_cost}, prior {log_prior})"
        )));
    }
    Ok(ObjectiveBreakdown {
        total,
        rep_cost,
        cls_cost,
        log_prior,
    })
}

/// The full MAP objective of a model on supervised data.
pub fn map_objective(y: &ArrayView2<f64>, labels: &LabelMatrix, model: &DdlModel) -> Result<f64> {
    if labels.sample_count() != y.ncols() {
        return Err(Error::DimensionMismatch {
            context: "label columns vs data columns",
            expected: y.ncols(),
            got: labels.sample_count(),
        });
    }
    let labeled: Vec<usize> = (0..y.ncols()).collect();
    Ok(objective_parts(
        y,
        &model.dictionary,
        &model.codes,
        &model.classifiers,
        labels,
        &labeled,
        &model.rep_params,
        &model.cls_params,
        model.config.loss,
    )?
    .total)
}

fn labeled_indices(n: usize, config: &TrainConfig) -> Result<Vec<usize>> {
    match &config.semi_supervised_mask {
        None => Ok((0..n).collect()),
        Some(mask) => {
            if mask.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "semi-supervised mask length vs sample count",
                    expected: n,
                    got: mask.len(),
                });
            }
            let idx: Vec<usize> = mask
                .iter()
                .enumerate()
                .filter_map(|(i, &m)| m.then_some(i))
                .collect();
            if idx.is_empty() {
                return Err(Error::InvalidConfig(
                    "semi-supervised mask labels no samples".into(),
                ));
            }
            Ok(idx)
        }
    }
}

/// Dictionary-sweep weights `1 / sigma_i`, with sigma clamped below at the
/// median. Down-weighting of badly-fit samples survives; near-exactly-fit
/// samples (sigma at the hard floor, common when initial atoms are training
/// samples) would otherwise carry weights around 1e8 and pin every atom
/// they touch.
fn ksvd_weights(rep: &RepresentationParams) -> Array1<f64> {
    let sigma = rep.sigma();
    let mut sorted: Vec<f64> = sigma.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let floor = median.max(SIGMA_FLOOR);
    sigma.mapv(|s| 1.0 / s.max(floor))
}

struct Snapshot {
    objective: f64,
    dictionary: Dictionary,
    classifiers: ClassifierBank,
    codes: Vec<SparseCode>,
    rep: RepresentationParams,
    cls: ClassificationParams,
}

fn labeled_codes(codes: &[SparseCode], labeled: &[usize]) -> Vec<SparseCode> {
    labeled.iter().map(|&i| codes[i].clone()).collect()
}

/// Joint discriminative training.
///
/// Each outer iteration refreshes, in order: the sparse codes (one
/// discriminative solve per labeled sample, plain encoding for unlabeled
/// ones, warm-started from the previous codes), the classifiers, the
/// dictionary (one weighted sweep), and the closed-form parameters. The
/// returned model is the recorded iteration with the lowest objective.
pub fn train(y: &ArrayView2<f64>, labels: &LabelMatrix, config: &TrainConfig) -> Result<DdlModel> {
    config.validate()?;
    let n = y.ncols();
    if n == 0 {
        return Err(Error::Data("training set is empty".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    let labeled = labeled_indices(n, config)?;
    if labels.sample_count() != labeled.len() {
        return Err(Error::DimensionMismatch {
            context: "label columns vs labeled sample count",
            expected: labeled.len(),
            got: labels.sample_count(),
        });
    }
    let ridge = config.resolved_ridge(labeled.len());
    let loss = config.loss;

    // Initialization: dictionary from (labeled) samples, codes by plain
    // encoding, classifiers and parameters from their update rules.
    let mut dict = if labeled.len() == n {
        init_dictionary(y, Some(labels), config.k, &config.init_scheme())?
    } else {
        let mut y_lab = Array2::zeros((y.nrows(), labeled.len()));
        for (dst, &src) in labeled.iter().enumerate() {
            y_lab.column_mut(dst).assign(&y.column(src));
        }
        init_dictionary(&y_lab.view(), Some(labels), config.k, &config.init_scheme())?
    };
    let mut codes = batch_encode_default_tol(&dict, y, config.t)?;
    let k = config.k;

    let mut bank = train_all(
        &codes_to_dense(&labeled_codes(&codes, &labeled), k).view(),
        labels,
        loss,
        ridge,
    )?;
    let mut rep = update_sigma(y, &dict, &codes)?;
    let mut cls = update_gamma(labels, &bank, &labeled_codes(&codes, &labeled), loss)?;

    let mut trace = vec![objective_parts(
        y, &dict, &codes, &bank, labels, &labeled, &rep, &cls, loss,
    )?];
    let mut best = Snapshot {
        objective: trace[0].total,
        dictionary: dict.clone(),
        classifiers: bank.clone(),
        codes: codes.clone(),
        rep: rep.clone(),
        cls: cls.clone(),
    };

    let is_labeled: Vec<bool> = {
        let mut v = vec![false; n];
        for &i in &labeled {
            v[i] = true;
        }
        v
    };
    // Column position of each labeled sample within the label matrix.
    let label_pos: Vec<usize> = {
        let mut v = vec![usize::MAX; n];
        for (pos, &i) in labeled.iter().enumerate() {
            v[i] = pos;
        }
        v
    };

    for _q in 1..=config.q_max {
        // Code refresh over an immutable snapshot of (D, W, sigma, gamma).
        let sigma = rep.sigma().clone();
        let gamma = cls.gamma().clone();
        let new_codes: Vec<SparseCode> = (0..n)
            .into_par_iter()
            .map(|i| -> Result<SparseCode> {
                let yi = y.column(i);
                if !is_labeled[i] {
                    let tol = default_residual_tol(yi.dot(&yi).sqrt());
                    return omp_encode(&dict, &yi, config.t, tol);
                }
                let s = sigma[i];
                let a = dict.atoms().mapv(|v| v / s);
                let b = yi.mapv(|v| v / s);
                let pos = label_pos[i];
                let c = labels.class_count();
                let mut g = Array2::zeros((k, c));
                let mut bias = Array1::zeros(c);
                for j in 0..c {
                    let l = labels.label(j, pos);
                    let w = bank.weight_column(j);
                    for r in 0..k {
                        g[(r, j)] = l * w[r];
                    }
                    bias[j] = l * bank.biases()[j];
                }
                let prob = DscProblem::new(a, b, g, bias, gamma.clone(), loss, config.t)?;
                dsc_solve(&prob, &codes[i], config.p_max, config.stop_rel_change)
            })
            .collect::<Result<Vec<_>>>()?;
        codes = new_codes;

        bank = train_all(
            &codes_to_dense(&labeled_codes(&codes, &labeled), k).view(),
            labels,
            loss,
            ridge,
        )?;

        let weights = ksvd_weights(&rep);
        let (new_dict, new_codes) = ksvd_update(&dict, y, &codes, &weights.view())?;
        dict = new_dict;
        codes = new_codes;

        rep = update_sigma(y, &dict, &codes)?;
        cls = update_gamma(labels, &bank, &labeled_codes(&codes, &labeled), loss)?;

        let parts = objective_parts(y, &dict, &codes, &bank, labels, &labeled, &rep, &cls, loss)?;
        let prev_total = trace.last().unwrap().total;
        trace.push(parts);
        if parts.total < best.objective {
            best = Snapshot {
                objective: parts.total,
                dictionary: dict.clone(),
                classifiers: bank.clone(),
                codes: codes.clone(),
                rep: rep.clone(),
                cls: cls.clone(),
            };
        }
        let rel = (parts.total - prev_total).abs() / prev_total.abs().max(1e-12);
        if rel <= config.stop_rel_change {
            break;
        }
    }

    Ok(DdlModel {
        dictionary: best.dictionary,
        classifiers: best.classifiers,
        codes: best.codes,
        rep_params: best.rep,
        cls_params: best.cls,
        config: config.clone(),
        objective_trace: trace,
    })
}

/// Decoupled reference pipeline: unsupervised dictionary learning (plain
/// encoding plus unweighted sweeps), then classifiers trained once on the
/// final codes. Shares the initialization path with [`train`].
pub fn train_baseline(
    y: &ArrayView2<f64>,
    labels: &LabelMatrix,
    config: &TrainConfig,
) -> Result<DdlModel> {
    config.validate()?;
    let n = y.ncols();
    if n == 0 {
        return Err(Error::Data("training set is empty".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    let labeled = labeled_indices(n, config)?;
    if labels.sample_count() != labeled.len() {
        return Err(Error::DimensionMismatch {
            context: "label columns vs labeled sample count",
            expected: labeled.len(),
            got: labels.sample_count(),
        });
    }
    let mut dict = if labeled.len() == n {
        init_dictionary(y, Some(labels), config.k, &config.init_scheme())?
    } else {
        let mut y_lab = Array2::zeros((y.nrows(), labeled.len()));
        for (dst, &src) in labeled.iter().enumerate() {
            y_lab.column_mut(dst).assign(&y.column(src));
        }
        init_dictionary(&y_lab.view(), Some(labels), config.k, &config.init_scheme())?
    };
    let mut codes = batch_encode_default_tol(&dict, y, config.t)?;
    let unit = Array1::from_elem(n, 1.0);

    let ridge = config.resolved_ridge(labeled.len());
    let loss = config.loss;
    let k = config.k;

    let mut trace = Vec::with_capacity(config.q_max + 1);
    let eval = |dict: &Dictionary, codes: &[SparseCode]| -> Result<(
        ClassifierBank,
        RepresentationParams,
        ClassificationParams,
        ObjectiveBreakdown,
    )> {
        let bank = train_all(
            &codes_to_dense(&labeled_codes(codes, &labeled), k).view(),
            labels,
            loss,
            ridge,
        )?;
        let rep = update_sigma(y, dict, codes)?;
        let cls = update_gamma(labels, &bank, &labeled_codes(codes, &labeled), loss)?;
        let parts = objective_parts(y, dict, codes, &bank, labels, &labeled, &rep, &cls, loss)?;
        Ok((bank, rep, cls, parts))
    };

    // The trace records the objective of the evolving unsupervised fit;
    // classifiers are only kept from the final iteration.
    let (_, _, _, parts0) = eval(&dict, &codes)?;
    trace.push(parts0);
    for _q in 1..=config.q_max {
        let (d2, x2) = ksvd_update(&dict, y, &codes, &unit.view())?;
        dict = d2;
        codes = batch_encode_default_tol(&dict, y, config.t)?;
        let _ = x2;
        let (_, _, _, parts) = eval(&dict, &codes)?;
        trace.push(parts);
    }

    let (bank, rep, cls, _) = eval(&dict, &codes)?;
    Ok(DdlModel {
        dictionary: dict,
        classifiers: bank,
        codes,
        rep_params: rep,
        cls_params: cls,
        config: config.clone(),
        objective_trace: trace,
    })
}
