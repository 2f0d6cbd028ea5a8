//! Label prediction: a fast encode-then-classify path, an exact per-class
//! discriminative path, and optional error-corrected encoding over the
//! identity-augmented dictionary.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::dsc::{dsc_solve_detailed, DscProblem};
use crate::error::{Error, Result};
use crate::losses::Margin;
use crate::sparse_coding::{default_residual_tol, omp_encode_columns, SparseCode};
use crate::trainer::DdlModel;

/// Hard cap on the augmented-dictionary footprint in robust mode.
const ROBUST_MEMORY_BUDGET_BYTES: usize = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    /// One plain sparse encode, then score every class hypothesis.
    FastTsc,
    /// One discriminative solve per hypothesized class.
    FullDsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictOptions {
    pub mode: PredictMode,
    /// Augment the dictionary with identity columns to absorb sparse errors.
    pub robust: bool,
    /// Sparsity budget at test time.
    pub t_test: usize,
    /// Extra budget for identity (error) atoms in robust mode.
    pub e_budget: usize,
}

impl PredictOptions {
    pub fn fast(t_test: usize) -> Self {
        PredictOptions {
            mode: PredictMode::FastTsc,
            robust: false,
            t_test,
            e_budget: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_test == 0 {
            return Err(Error::InvalidConfig("t_test must be at least 1".into()));
        }
        Ok(())
    }
}

/// Prediction outcome: chosen class, per-class hypothesis scores, the
/// dictionary-part code, and the encoding residual norm.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub class: usize,
    pub scores: Array1<f64>,
    pub code: SparseCode,
    pub residual_norm: f64,
}

/// Columns of the effective encoding matrix: the dictionary, plus unit
/// identity columns in robust mode.
fn effective_columns(model: &DdlModel, robust: bool) -> Result<Array2<f64>> {
    let d = model.dictionary.signal_dim();
    let k = model.dictionary.atom_count();
    if !robust {
        return Ok(model.dictionary.atoms().clone());
    }
    let total = k + d;
    let bytes = d
        .checked_mul(total)
        .and_then(|c| c.checked_mul(std::mem::size_of::<f64>()))
        .ok_or_else(|| Error::InvalidConfig("augmented dictionary size overflows".into()))?;
    if bytes > ROBUST_MEMORY_BUDGET_BYTES {
        return Err(Error::InvalidConfig(format!(
            "robust augmentation needs {bytes} bytes for a {d}x{total} matrix, over the \
             {ROBUST_MEMORY_BUDGET_BYTES}-byte budget"
        )));
    }
    let mut cols = Array2::zeros((d, total));
    cols.slice_mut(ndarray::s![.., ..k])
        .assign(model.dictionary.atoms());
    for r in 0..d {
        cols[(r, k + r)] = 1.0;
    }
    Ok(cols)
}

/// Splits an augmented code into its dictionary part, and reports the
/// residual of the full encoding.
fn dictionary_part(code: &SparseCode, k: usize) -> Result<SparseCode> {
    let pairs: Vec<(usize, f64)> = code.iter().filter(|&(i, _)| i < k).collect();
    SparseCode::from_pairs(pairs, k)
}

/// Hypothesis score for class `j`: minus the total classification cost of
/// the one-hot label vector with +1 at `j`, weighted by the class scales.
fn hypothesis_score(
    scores: &Array1<f64>,
    gamma: &Array1<f64>,
    loss: crate::losses::LossKind,
    j: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (jp, &s) in scores.iter().enumerate() {
        let l = if jp == j { 1.0 } else { -1.0 };
        total += loss.value(Margin::new(l * s)?) / gamma[jp];
    }
    Ok(-total)
}

fn residual_norm(cols: &ArrayView2<f64>, code: &SparseCode, y: &ArrayView1<f64>) -> f64 {
    let mut r = y.to_owned();
    for (i, v) in code.iter() {
        r.iter_mut()
            .zip(cols.column(i))
            .for_each(|(ri, &ci)| *ri -= v * ci);
    }
    r.dot(&r).sqrt()
}

/// Predicts the class of one test sample. Ties resolve to the lowest index.
pub fn predict(model: &DdlModel, y: &ArrayView1<f64>, opts: &PredictOptions) -> Result<Prediction> {
    opts.validate()?;
    let d = model.dictionary.signal_dim();
    let k = model.dictionary.atom_count();
    let c = model.classifiers.class_count();
    if y.len() != d {
        return Err(Error::DimensionMismatch {
            context: "test sample length vs dictionary rows",
            expected: d,
            got: y.len(),
        });
    }
    let budget = if opts.robust {
        opts.t_test + opts.e_budget
    } else {
        opts.t_test
    };
    let cols = effective_columns(model, opts.robust)?;
    if budget > cols.ncols() {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} exceeds {} encoding columns",
            cols.ncols()
        )));
    }
    let loss = model.classifiers.loss();
    let gamma = model.cls_params.gamma();

    match opts.mode {
        PredictMode::FastTsc => {
            let tol = default_residual_tol(y.dot(y).sqrt());
            let full = omp_encode_columns(&cols.view(), y, budget, tol)?;
            let res = residual_norm(&cols.view(), &full, y);
            let code = dictionary_part(&full, k)?;
            let decisions = crate::classifiers::decision_values(&model.classifiers, &code)?;
            let mut scores = Array1::zeros(c);
            for j in 0..c {
                scores[j] = hypothesis_score(&decisions, gamma, loss, j)?;
            }
            let mut best = 0usize;
            for j in 1..c {
                if scores[j] > scores[best] {
                    best = j;
                }
            }
            Ok(Prediction {
                class: best,
                scores,
                code,
                residual_norm: res,
            })
        }
        PredictMode::FullDsc => {
            let mut scores = Array1::zeros(c);
            let mut best: Option<(usize, SparseCode, f64)> = None;
            for j in 0..c {
                // Signed classifiers for the hypothesized one-hot labels;
                // identity atoms carry no classifier weight.
                let mut g = Array2::zeros((cols.ncols(), c));
                let mut bias = Array1::zeros(c);
                for jp in 0..c {
                    let l = if jp == j { 1.0 } else { -1.0 };
                    let w = model.classifiers.weight_column(jp);
                    for r in 0..k {
                        g[(r, jp)] = l * w[r];
                    }
                    bias[jp] = l * model.classifiers.biases()[jp];
                }
                let prob = DscProblem::new(
                    cols.clone(),
                    y.to_owned(),
                    g,
                    bias,
                    gamma.clone(),
                    loss,
                    budget,
                )?;
                let sol = dsc_solve_detailed(
                    &prob,
                    &SparseCode::empty(cols.ncols()),
                    model.config.p_max,
                    model.config.stop_rel_change,
                )?;
                // The solve objective is ||y - Ax||^2 + 2 sum loss/gamma;
                // the joint log-probability is minus half of it.
                scores[j] = -0.5 * sol.objective;
                let replace = match &best {
                    None => true,
                    Some((_, _, s)) => scores[j] > *s,
                };
                if replace {
                    let res = residual_norm(&cols.view(), &sol.code, y);
                    best = Some((j, sol.code, res));
                    if let Some((_, _, s)) = &mut best {
                        *s = scores[j];
                    }
                }
            }
            let (class, full, _) = best.expect("at least one class");
            let res = residual_norm(&cols.view(), &full, y);
            let code = dictionary_part(&full, k)?;
            Ok(Prediction {
                class,
                scores,
                code,
                residual_norm: res,
            })
        }
    }
}

/// Evaluation summary over a test set.
#[derive(Debug, Clone)]
pub struct EvalMetrics {
    pub error_rate: f64,
    /// Per-class error rates; 0 for classes absent from the test set.
    pub per_class_error: Vec<f64>,
    /// `confusion[(true, predicted)]` counts.
    pub confusion: Array2<usize>,
    pub mean_residual: f64,
    pub runtime_ms: f64,
}

/// Predicts every test column and aggregates error rates, the confusion
/// matrix, and the mean encoding residual.
pub fn evaluate(
    model: &DdlModel,
    y_test: &ArrayView2<f64>,
    labels: &[usize],
    opts: &PredictOptions,
) -> Result<EvalMetrics> {
    let n = y_test.ncols();
    if n == 0 {
        return Err(Error::Data("test set is empty".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "test label count vs test columns",
            expected: n,
            got: labels.len(),
        });
    }
    let c = model.classifiers.class_count();
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Data(format!(
            "test label {bad} out of range for {c} classes"
        )));
    }
    let start = std::time::Instant::now();
    let predictions: Vec<Prediction> = (0..n)
        .into_par_iter()
        .map(|i| predict(model, &y_test.column(i), opts))
        .collect::<Result<Vec<_>>>()?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut confusion = Array2::zeros((c, c));
    let mut residual_sum = 0.0;
    for (i, p) in predictions.iter().enumerate() {
        confusion[(labels[i], p.class)] += 1;
        residual_sum += p.residual_norm;
    }
    let mut errors = 0usize;
    let mut per_class_error = vec![0.0; c];
    for class in 0..c {
        let total: usize = (0..c).map(|j| confusion[(class, j)]).sum();
        let wrong = total - confusion[(class, class)];
        errors += wrong;
        if total > 0 {
            per_class_error[class] = wrong as f64 / total as f64;
        }
    }
    Ok(EvalMetrics {
        error_rate: errors as f64 / n as f64,
        per_class_error,
        confusion,
        mean_residual: residual_sum / n as f64,
        runtime_ms,
    })
}

/// Schema line, header, and row for the metrics CSV.
pub const METRICS_SCHEMA: &str = "ddlearn.metrics.v1";

pub fn metrics_csv_header(class_count: usize) -> String {
    let mut cols = vec![
        "dataset".to_string(),
        "mode".to_string(),
        "robust".to_string(),
        "k".to_string(),
        "t".to_string(),
        "loss".to_string(),
        "error_rate".to_string(),
    ];
    for j in 0..class_count {
        cols.push(format!("per_class_error_{j}"));
    }
    cols.push("runtime_ms".to_string());
    cols.join(",")
}

pub fn metrics_csv_row(
    dataset: &str,
    model: &DdlModel,
    opts: &PredictOptions,
    metrics: &EvalMetrics,
) -> String {
    let mode = match opts.mode {
        PredictMode::FastTsc => "fast",
        PredictMode::FullDsc => "full",
    };
    let mut cols = vec![
        dataset.to_string(),
        mode.to_string(),
        opts.robust.to_string(),
        model.dictionary.atom_count().to_string(),
        model.config.t.to_string(),
        model.config.loss.name().to_string(),
        format!("{}", metrics.error_rate),
    ];
    for e in &metrics.per_class_error {
        cols.push(format!("{e}"));
    }
    cols.push(format!("{}", metrics.runtime_ms));
    cols.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierBank;
    use crate::dsc::dsc_solve;
    use crate::losses::LossKind;
    use crate::sparse_coding::Dictionary;
    use crate::trainer::{ClassificationParams, DdlModel, RepresentationParams, TrainConfig};
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Prototype model: orthonormal atoms, atom k is the prototype of class
    /// k, classifier k responds strongly to atom k alone.
    fn prototype_model(c: usize) -> DdlModel {
        let k = c;
        let d = c + 1;
        let mut atoms = Array2::zeros((d, k));
        for j in 0..k {
            atoms[(j, j)] = 1.0;
        }
        let dictionary = Dictionary::new(atoms).unwrap();
        let mut weights = Array2::zeros((k, c));
        for j in 0..c {
            weights[(j, j)] = 10.0;
        }
        let biases = Array1::from_elem(c, -5.0);
        let classifiers = ClassifierBank::new(weights, biases, LossKind::Logistic).unwrap();
        DdlModel {
            dictionary,
            classifiers,
            codes: vec![],
            rep_params: RepresentationParams::new(Array1::from_elem(1, 1.0)).unwrap(),
            cls_params: ClassificationParams::new(Array1::from_elem(c, 1.0)).unwrap(),
            config: TrainConfig::new(k, 1, LossKind::Logistic),
            objective_trace: vec![],
        }
    }

    #[test]
    fn prototype_samples_classified_under_both_modes() {
        let model = prototype_model(3);
        let y = model.dictionary.atom(2).to_owned();
        for mode in [PredictMode::FastTsc, PredictMode::FullDsc] {
            let opts = PredictOptions {
                mode,
                robust: false,
                t_test: 1,
                e_budget: 0,
            };
            let p = predict(&model, &y.view(), &opts).unwrap();
            assert_eq!(p.class, 2, "{mode:?}");
            assert_eq!(p.code.indices(), &[2]);
        }
    }

    #[test]
    fn equal_scores_tie_to_class_zero() {
        let mut model = prototype_model(3);
        // Zero classifiers: every hypothesis scores identically.
        model.classifiers = ClassifierBank::new(
            Array2::zeros((3, 3)),
            Array1::zeros(3),
            LossKind::Logistic,
        )
        .unwrap();
        let y = model.dictionary.atom(1).to_owned();
        let p = predict(&model, &y.view(), &PredictOptions::fast(1)).unwrap();
        assert_eq!(p.class, 0);
        for j in 1..3 {
            assert_eq!(p.scores[0], p.scores[j]);
        }
    }

    #[test]
    fn score_ordering_invariant_to_constant_shift() {
        let model = prototype_model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = Array1::from_shape_fn(5, |_| rng.sample::<f64, _>(StandardNormal));
        let p = predict(&model, &y.view(), &PredictOptions::fast(2)).unwrap();
        let shifted = p.scores.mapv(|s| s + 123.456);
        let mut best = 0usize;
        for j in 1..4 {
            if shifted[j] > shifted[best] {
                best = j;
            }
        }
        assert_eq!(best, p.class);
    }

    #[test]
    fn score_decomposition_matches_direct_evaluation() {
        let model = prototype_model(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let y = Array1::from_shape_fn(4, |_| rng.sample::<f64, _>(StandardNormal));
            let p = predict(&model, &y.view(), &PredictOptions::fast(2)).unwrap();
            let decisions =
                crate::classifiers::decision_values(&model.classifiers, &p.code).unwrap();
            let loss = model.classifiers.loss();
            let gamma = model.cls_params.gamma();
            // score(a) - score(b) only involves the flipped terms.
            for a in 0..3 {
                for b in 0..3 {
                    let flip = |j: usize| {
                        (loss.value(Margin::new(-decisions[j]).unwrap())
                            - loss.value(Margin::new(decisions[j]).unwrap()))
                            / gamma[j]
                    };
                    let expected = flip(a) - flip(b);
                    let got = p.scores[a] - p.scores[b];
                    assert!((got - expected).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn robust_mode_with_clean_signal_reduces_to_plain() {
        let model = prototype_model(3);
        let y = model.dictionary.atom(1).mapv(|v| 2.0 * v);
        let plain = predict(&model, &y.view(), &PredictOptions::fast(1)).unwrap();
        let robust = predict(
            &model,
            &y.view(),
            &PredictOptions {
                mode: PredictMode::FastTsc,
                robust: true,
                t_test: 1,
                e_budget: 0,
            },
        )
        .unwrap();
        assert_eq!(plain.class, robust.class);
        assert_eq!(plain.code.indices(), robust.code.indices());
        assert_eq!(plain.code.values(), robust.code.values());
        assert_eq!(plain.scores, robust.scores);
    }

    #[test]
    fn robust_mode_absorbs_a_gross_error() {
        let model = prototype_model(3);
        let mut y = model.dictionary.atom(2).mapv(|v| 2.0 * v);
        y[3] += 5.0; // corrupt a coordinate outside the atom span
        let robust = predict(
            &model,
            &y.view(),
            &PredictOptions {
                mode: PredictMode::FastTsc,
                robust: true,
                t_test: 1,
                e_budget: 1,
            },
        )
        .unwrap();
        assert_eq!(robust.class, 2);
        // The error atom is excluded from the classified code.
        assert!(robust.code.indices().iter().all(|&i| i < 3));
    }

    #[test]
    fn full_dsc_single_class_is_one_dsc_solve() {
        let model = prototype_model(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = Array1::from_shape_fn(2, |_| rng.sample::<f64, _>(StandardNormal));
        let opts = PredictOptions {
            mode: PredictMode::FullDsc,
            robust: false,
            t_test: 1,
            e_budget: 0,
        };
        let p = predict(&model, &y.view(), &opts).unwrap();
        assert_eq!(p.class, 0);

        let g = model.classifiers.weights().clone();
        let bias = model.classifiers.biases().clone();
        let prob = DscProblem::new(
            model.dictionary.atoms().clone(),
            y.clone(),
            g,
            bias,
            model.cls_params.gamma().clone(),
            model.classifiers.loss(),
            1,
        )
        .unwrap();
        let direct = dsc_solve(
            &prob,
            &SparseCode::empty(1),
            model.config.p_max,
            model.config.stop_rel_change,
        )
        .unwrap();
        assert_eq!(p.code.indices(), direct.indices());
        assert_eq!(p.code.values(), direct.values());
    }

    /// Exhaustive-support oracle for the joint criterion with the square
    /// loss: for each class hypothesis, minimize
    /// `0.5 ||y - D x||^2 + sum_j (1 - l_j (w_j' x + b_j))^2 / gamma_j`
    /// exactly over every support, then take the best class.
    fn exhaustive_joint_oracle(model: &DdlModel, y: &ArrayView1<f64>, t: usize) -> usize {
        let d = model.dictionary.signal_dim();
        let k = model.dictionary.atom_count();
        let c = model.classifiers.class_count();
        let gamma = model.cls_params.gamma();

        fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
            let n = b.len();
            for i in 0..n {
                let mut p = i;
                for r in (i + 1)..n {
                    if a[r][i].abs() > a[p][i].abs() {
                        p = r;
                    }
                }
                if a[p][i].abs() < 1e-13 {
                    return None;
                }
                a.swap(i, p);
                b.swap(i, p);
                for r in (i + 1)..n {
                    let f = a[r][i] / a[i][i];
                    for cc in i..n {
                        a[r][cc] -= f * a[i][cc];
                    }
                    b[r] -= f * b[i];
                }
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = b[i];
                for cc in (i + 1)..n {
                    s -= a[i][cc] * x[cc];
                }
                x[i] = s / a[i][i];
            }
            Some(x)
        }

        let mut supports: Vec<Vec<usize>> = vec![vec![]];
        for size in 1..=t {
            let mut stack = vec![(0usize, Vec::<usize>::new())];
            while let Some((start, cur)) = stack.pop() {
                if cur.len() == size {
                    supports.push(cur);
                    continue;
                }
                for i in start..k {
                    let mut next = cur.clone();
                    next.push(i);
                    stack.push((i + 1, next));
                }
            }
        }

        let mut best_class = 0usize;
        let mut best_value = f64::NEG_INFINITY;
        for j in 0..c {
            let mut class_best = f64::NEG_INFINITY;
            // Stacked rows: D / sqrt(2) with target y / sqrt(2), plus one row
            // per classifier: l w' / sqrt(gamma) with target (1 - l b) / sqrt(gamma).
            let rows = d + c;
            let mut m = vec![vec![0.0; k]; rows];
            let mut target = vec![0.0; rows];
            let s2 = 0.5f64.sqrt();
            for r in 0..d {
                for col in 0..k {
                    m[r][col] = s2 * model.dictionary.atoms()[(r, col)];
                }
                target[r] = s2 * y[r];
            }
            for jp in 0..c {
                let l = if jp == j { 1.0 } else { -1.0 };
                let scale = 1.0 / gamma[jp].sqrt();
                for col in 0..k {
                    m[d + jp][col] = scale * l * model.classifiers.weights()[(col, jp)];
                }
                target[d + jp] = scale * (1.0 - l * model.classifiers.biases()[jp]);
            }
            for s in &supports {
                let nsup = s.len();
                let coeffs = if nsup == 0 {
                    Vec::new()
                } else {
                    let mut gram = vec![vec![0.0; nsup]; nsup];
                    let mut rhs = vec![0.0; nsup];
                    for a_i in 0..nsup {
                        for b_i in 0..nsup {
                            gram[a_i][b_i] =
                                (0..rows).map(|r| m[r][s[a_i]] * m[r][s[b_i]]).sum();
                        }
                        rhs[a_i] = (0..rows).map(|r| m[r][s[a_i]] * target[r]).sum();
                    }
                    match gauss(gram, rhs) {
                        Some(x) => x,
                        None => continue,
                    }
                };
                let mut value = 0.0;
                for r in 0..rows {
                    let mut fit = 0.0;
                    for (a_i, &col) in s.iter().enumerate() {
                        fit += coeffs[a_i] * m[r][col];
                    }
                    value += (target[r] - fit) * (target[r] - fit);
                }
                if -value > class_best {
                    class_best = -value;
                }
            }
            if class_best > best_value {
                best_value = class_best;
                best_class = j;
            }
        }
        best_class
    }

    #[test]
    fn fast_path_matches_joint_oracle_on_separated_instances() {
        // Well-separated prototype-style model with the square loss.
        let mut model = prototype_model(3);
        model.classifiers = ClassifierBank::new(
            model.classifiers.weights().clone(),
            model.classifiers.biases().clone(),
            LossKind::Square,
        )
        .unwrap();
        model.config.loss = LossKind::Square;
        let mut agree = 0;
        let total = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..total {
            let class = trial % 3;
            let mut y = model.dictionary.atom(class).mapv(|v| 2.0 * v);
            for v in y.iter_mut() {
                *v += 0.05 * rng.sample::<f64, _>(StandardNormal);
            }
            let fast = predict(&model, &y.view(), &PredictOptions::fast(2)).unwrap();
            let oracle = exhaustive_joint_oracle(&model, &y.view(), 2);
            assert_eq!(oracle, class, "oracle itself misclassified trial {trial}");
            if fast.class == oracle {
                agree += 1;
            }
        }
        // Disagreement is possible in principle; on these separated
        // instances the fast path must match.
        assert_eq!(agree, total);
    }

    #[test]
    fn evaluate_perfect_and_single_miss() {
        let model = prototype_model(3);
        let mut y = Array2::zeros((4, 3));
        for i in 0..3 {
            y.column_mut(i).assign(&model.dictionary.atom(i));
        }
        let opts = PredictOptions::fast(1);
        let m = evaluate(&model, &y.view(), &[0, 1, 2], &opts).unwrap();
        assert_eq!(m.error_rate, 0.0);
        assert!(m.per_class_error.iter().all(|&e| e == 0.0));
        assert_eq!(m.confusion[(1, 1)], 1);
        assert!(m.mean_residual < 1e-9);

        // One sample with a wrong label: error 1.0, single off-diagonal.
        let one = y.slice(ndarray::s![.., ..1]).to_owned();
        let m = evaluate(&model, &one.view(), &[2], &opts).unwrap();
        assert_eq!(m.error_rate, 1.0);
        assert_eq!(m.confusion[(2, 0)], 1);
        assert_eq!(m.per_class_error[2], 1.0);

        assert!(evaluate(&model, &Array2::zeros((4, 0)).view(), &[], &opts).is_err());
    }

    #[test]
    fn random_labels_error_near_chance() {
        let c = 4;
        let model = prototype_model(c);
        let n = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut y = Array2::zeros((c + 1, n));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let cls = rng.gen_range(0..c);
            // Content is informative, labels are random: chance-level accuracy.
            y.column_mut(i)
                .assign(&model.dictionary.atom(rng.gen_range(0..c)));
            labels.push(cls);
        }
        let m = evaluate(&model, &y.view(), &labels, &PredictOptions::fast(1)).unwrap();
        let chance = (c as f64 - 1.0) / c as f64;
        assert!(
            (m.error_rate - chance).abs() <= 0.05,
            "error {} vs chance {chance}",
            m.error_rate
        );
    }

    #[test]
    fn csv_row_shape_matches_header() {
        let model = prototype_model(3);
        let y = Array2::from_shape_fn((4, 2), |_| 0.1);
        let opts = PredictOptions::fast(1);
        let m = evaluate(&model, &y.view(), &[0, 1], &opts).unwrap();
        let header = metrics_csv_header(3);
        let row = metrics_csv_row("unit", &model, &opts, &m);
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert!(header.contains("per_class_error_2"));
    }
}
