//! Discriminative sparse coding: finds a sparse code that both represents a
//! (scaled) signal and scores well under a bank of signed linear classifiers,
//! by iterating Newton linearizations that each reduce to one plain sparse
//! coding problem on a stacked system.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::losses::{LossKind, Margin};
use crate::sparse_coding::{omp_encode_columns, SparseCode};

/// Floor applied to the diagonal classifier weights so the stacked system
/// stays well posed when the curvature underflows at large margins.
pub const H_FLOOR: f64 = 1e-12;

/// One discriminative coding instance.
///
/// `a` is the scaled dictionary (signal part), `b` the scaled signal,
/// `g` the K x C matrix of signed classifiers (classifier direction times
/// label), `bias_offsets` the signed classifier biases entering each margin,
/// and `gamma` the per-class cost scales.
#[derive(Debug, Clone)]
pub struct DscProblem {
    a: Array2<f64>,
    b: Array1<f64>,
    g: Array2<f64>,
    bias_offsets: Array1<f64>,
    gamma: Array1<f64>,
    loss: LossKind,
    t: usize,
}

impl DscProblem {
    pub fn new(
        a: Array2<f64>,
        b: Array1<f64>,
        g: Array2<f64>,
        bias_offsets: Array1<f64>,
        gamma: Array1<f64>,
        loss: LossKind,
        t: usize,
    ) -> Result<Self> {
        let (d, k) = a.dim();
        if b.len() != d {
            return Err(Error::DimensionMismatch {
                context: "signal length vs scaled dictionary rows",
                expected: d,
                got: b.len(),
            });
        }
        if g.nrows() != k {
            return Err(Error::DimensionMismatch {
                context: "classifier rows vs atom count",
                expected: k,
                got: g.nrows(),
            });
        }
        let c = g.ncols();
        if bias_offsets.len() != c {
            return Err(Error::DimensionMismatch {
                context: "bias offsets vs class count",
                expected: c,
                got: bias_offsets.len(),
            });
        }
        if gamma.len() != c {
            return Err(Error::DimensionMismatch {
                context: "gamma vs class count",
                expected: c,
                got: gamma.len(),
            });
        }
        if gamma.iter().any(|&gj| !(gj > 0.0) || !gj.is_finite()) {
            return Err(Error::InvalidConfig(
                "classification parameters gamma must be positive and finite".into(),
            ));
        }
        Ok(DscProblem {
            a,
            b,
            g,
            bias_offsets,
            gamma,
            loss,
            t,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.a.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.g.ncols()
    }

    pub fn sparsity_budget(&self) -> usize {
        self.t
    }

    /// Signed margins `g_j' x + bias_j` for every class.
    fn margins(&self, x: &SparseCode) -> Array1<f64> {
        let c = self.class_count();
        let mut z = self.bias_offsets.clone();
        for j in 0..c {
            let col = self.g.column(j);
            z[j] += x.iter().map(|(i, v)| v * col[i]).sum::<f64>();
        }
        z
    }
}

/// One Newton linearization: bias-adjusted regression targets `delta`,
/// diagonal classifier weights `h_diag`, plus the expansion point and its
/// true objective value.
#[derive(Debug, Clone)]
pub struct NewtonState {
    pub x: SparseCode,
    pub delta: Array1<f64>,
    pub h_diag: Array1<f64>,
    pub objective: f64,
}

/// Full solve report.
#[derive(Debug, Clone)]
pub struct DscSolution {
    pub code: SparseCode,
    pub objective: f64,
    /// Number of sparse-coding solves performed.
    pub iterations: usize,
}

/// The discriminative coding objective
/// `||b - A x||^2 + 2 sum_j loss(g_j' x + bias_j) / gamma_j`.
pub fn dsc_objective(prob: &DscProblem, x: &SparseCode) -> Result<f64> {
    if x.ambient_dim() != prob.atom_count() {
        return Err(Error::DimensionMismatch {
            context: "code ambient dimension vs problem atoms",
            expected: prob.atom_count(),
            got: x.ambient_dim(),
        });
    }
    let mut r = prob.b.clone();
    for (i, v) in x.iter() {
        r.iter_mut()
            .zip(prob.a.column(i))
            .for_each(|(ri, &ai)| *ri -= v * ai);
    }
    let mut obj = norm_sq(&r.view());
    let z = prob.margins(x);
    for j in 0..prob.class_count() {
        obj += 2.0 * prob.loss.value(Margin::new(z[j])?) / prob.gamma[j];
    }
    Ok(obj)
}

/// Linearizes the classification terms around `x_prev`.
///
/// The quadratic model of each cost around its margin `z_j` is
/// `0.5 * d2(z_j) * [z - (z_j - ratio12(z_j))]^2 + const`; substituted into
/// the objective (whose classification block carries a factor 2) each
/// classifier row gets the weight `H_jj = sqrt(d2(z_j) / gamma_j)`, making
/// the stacked residual equal the quadratic model of the objective up to a
/// constant. The classifier bias is folded into the regression target so
/// the stacked least-squares problem is over the code alone.
pub fn newton_linearize(prob: &DscProblem, x_prev: &SparseCode) -> Result<NewtonState> {
    if x_prev.ambient_dim() != prob.atom_count() {
        return Err(Error::DimensionMismatch {
            context: "code ambient dimension vs problem atoms",
            expected: prob.atom_count(),
            got: x_prev.ambient_dim(),
        });
    }
    let c = prob.class_count();
    let z = prob.margins(x_prev);
    let mut delta = Array1::zeros(c);
    let mut h_diag = Array1::zeros(c);
    for j in 0..c {
        let zj = Margin::new(z[j])?;
        delta[j] = (z[j] - prob.loss.ratio12(zj)) - prob.bias_offsets[j];
        h_diag[j] = (prob.loss.d2(zj) / prob.gamma[j]).sqrt().max(H_FLOOR);
    }
    Ok(NewtonState {
        x: x_prev.clone(),
        delta,
        h_diag,
        objective: dsc_objective(prob, x_prev)?,
    })
}

/// Writes the classifier rows and target entries of the stacked system.
fn fill_stacked(prob: &DscProblem, state: &NewtonState, stacked: &mut Array2<f64>, target: &mut Array1<f64>) {
    let d = prob.b.len();
    let k = prob.atom_count();
    for j in 0..prob.class_count() {
        let h = state.h_diag[j];
        for col in 0..k {
            stacked[(d + j, col)] = h * prob.g[(col, j)];
        }
        target[d + j] = h * state.delta[j];
    }
}

/// Solves the discriminative coding problem by iterated linearization,
/// warm-started at `x0`. Returns the iterate with the lowest true objective
/// seen (including `x0`), guarding against greedy-solver non-monotonicity.
pub fn dsc_solve(
    prob: &DscProblem,
    x0: &SparseCode,
    p_max: usize,
    stop_rel_change: f64,
) -> Result<SparseCode> {
    Ok(dsc_solve_detailed(prob, x0, p_max, stop_rel_change)?.code)
}

/// As [`dsc_solve`], reporting the objective and iteration count.
pub fn dsc_solve_detailed(
    prob: &DscProblem,
    x0: &SparseCode,
    p_max: usize,
    stop_rel_change: f64,
) -> Result<DscSolution> {
    if p_max < 1 {
        return Err(Error::InvalidConfig("p_max must be at least 1".into()));
    }
    let d = prob.b.len();
    let k = prob.atom_count();
    let c = prob.class_count();

    let mut stacked = Array2::zeros((d + c, k));
    stacked.slice_mut(ndarray::s![..d, ..]).assign(&prob.a);
    let mut target = Array1::zeros(d + c);
    target.slice_mut(ndarray::s![..d]).assign(&prob.b);

    let mut x = x0.clone();
    let mut best_obj = dsc_objective(prob, &x)?;
    let mut best = x.clone();
    let mut prev_lin: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0usize;

    for _p in 1..=p_max {
        let state = newton_linearize(prob, &x)?;
        let lin = (state.delta.to_vec(), state.h_diag.to_vec());
        if prev_lin.as_ref() == Some(&lin) {
            // Unchanged linearization reproduces the same stacked system and
            // therefore the same solution; the iteration is converged.
            break;
        }
        fill_stacked(prob, &state, &mut stacked, &mut target);
        let x_new = omp_encode_columns(&stacked.view(), &target.view(), prob.t, 0.0)?;
        iterations += 1;
        let obj_new = dsc_objective(prob, &x_new)?;
        if obj_new < best_obj {
            best_obj = obj_new;
            best = x_new.clone();
        }
        let rel = x_new.distance(&x) / x.norm().max(1e-12);
        prev_lin = Some(lin);
        x = x_new;
        if rel <= stop_rel_change {
            break;
        }
    }

    Ok(DscSolution {
        code: best,
        objective: best_obj,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_coding::{omp_encode, Dictionary};
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(
        d: usize,
        k: usize,
        c: usize,
        loss: LossKind,
        t: usize,
        rng: &mut ChaCha8Rng,
    ) -> DscProblem {
        let a = Array2::from_shape_fn((d, k), |_| rng.sample::<f64, _>(StandardNormal));
        let b = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
        let g = Array2::from_shape_fn((k, c), |_| rng.sample::<f64, _>(StandardNormal));
        let bias = Array1::from_shape_fn(c, |_| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let gamma = Array1::from_shape_fn(c, |_| 0.5 + 1.5 * rng.gen::<f64>());
        DscProblem::new(a, b, g, bias, gamma, loss, t).unwrap()
    }

    fn random_code(k: usize, nnz: usize, rng: &mut ChaCha8Rng) -> SparseCode {
        let mut idx: Vec<usize> = (0..k).collect();
        idx.shuffle(rng);
        let pairs = idx[..nnz]
            .iter()
            .map(|&i| (i, rng.sample::<f64, _>(StandardNormal)))
            .collect();
        SparseCode::from_pairs(pairs, k).unwrap()
    }

    #[test]
    fn objective_hand_example() {
        // x = 0, b = 0, square loss, zero bias, gamma = 2, one class:
        // objective = 0 + 2 * (1 - 0)^2 / 2 = 1.
        let prob = DscProblem::new(
            array![[1.0, 0.0], [0.0, 1.0]],
            array![0.0, 0.0],
            array![[0.4], [-0.2]],
            array![0.0],
            array![2.0],
            LossKind::Square,
            2,
        )
        .unwrap();
        let x = SparseCode::empty(2);
        assert!((dsc_objective(&prob, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn objective_huge_gamma_is_pure_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array2::from_shape_fn((5, 8), |_| rng.sample::<f64, _>(StandardNormal));
        let b = Array1::from_shape_fn(5, |_| rng.sample::<f64, _>(StandardNormal));
        let g = Array2::from_shape_fn((8, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let prob = DscProblem::new(
            a.clone(),
            b.clone(),
            g,
            Array1::zeros(3),
            Array1::from_elem(3, 1e30),
            LossKind::Logistic,
            3,
        )
        .unwrap();
        let x = random_code(8, 3, &mut rng);
        let mut r = b.clone();
        for (i, v) in x.iter() {
            r.iter_mut().zip(a.column(i)).for_each(|(ri, &ai)| *ri -= v * ai);
        }
        let rep = r.dot(&r);
        assert!((dsc_objective(&prob, &x).unwrap() - rep).abs() < 1e-12 * rep.max(1.0));
    }

    #[test]
    fn objective_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for loss in [
            LossKind::Square,
            LossKind::Exponential,
            LossKind::Logistic,
            LossKind::smooth_hinge_default(),
        ] {
            let prob = random_problem(6, 10, 4, loss, 3, &mut rng);
            let x = random_code(10, 3, &mut rng);
            let xd = x.to_dense();
            let r = &prob.b - &prob.a.dot(&xd);
            let mut oracle = r.dot(&r);
            let z = prob.g.t().dot(&xd) + &prob.bias_offsets;
            for j in 0..4 {
                oracle += 2.0 * loss.value(Margin::new(z[j]).unwrap()) / prob.gamma[j];
            }
            let got = dsc_objective(&prob, &x).unwrap();
            assert!(
                (got - oracle).abs() < 1e-12 * oracle.max(1.0),
                "{loss:?}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn linearize_square_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prob = random_problem(5, 7, 3, LossKind::Square, 2, &mut rng);
        let x = random_code(7, 2, &mut rng);
        let state = newton_linearize(&prob, &x).unwrap();
        for j in 0..3 {
            // z - ratio12(z) = 1 identically for the square loss, and the
            // weight is sqrt(d2 / gamma) = sqrt(2 / gamma).
            assert!((state.delta[j] - (1.0 - prob.bias_offsets[j])).abs() < 1e-12);
            assert!((state.h_diag[j] - (2.0 / prob.gamma[j]).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn linearize_exponential_at_zero_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut prob = random_problem(5, 7, 2, LossKind::Exponential, 2, &mut rng);
        prob.bias_offsets.fill(0.0);
        let x = SparseCode::empty(7);
        let state = newton_linearize(&prob, &x).unwrap();
        for j in 0..2 {
            // d2 = 1 at z = 0, so the weight is sqrt(1 / gamma).
            assert!((state.delta[j] - 1.0).abs() < 1e-15);
            assert!((state.h_diag[j] - (1.0 / prob.gamma[j]).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn no_classifiers_degenerates_to_plain_encoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dict_atoms = Array2::from_shape_fn((6, 9), |_| rng.sample::<f64, _>(StandardNormal));
        let dict = Dictionary::from_unnormalized(dict_atoms).unwrap();
        let b = Array1::from_shape_fn(6, |_| rng.sample::<f64, _>(StandardNormal));
        let prob = DscProblem::new(
            dict.atoms().clone(),
            b.clone(),
            Array2::zeros((9, 0)),
            Array1::zeros(0),
            Array1::zeros(0),
            LossKind::Square,
            3,
        )
        .unwrap();
        let state = newton_linearize(&prob, &SparseCode::empty(9)).unwrap();
        assert_eq!(state.delta.len(), 0);
        let sol = dsc_solve_detailed(&prob, &SparseCode::empty(9), 10, 1e-4).unwrap();
        let plain = omp_encode(&dict, &b.view(), 3, 0.0).unwrap();
        assert_eq!(sol.code.indices(), plain.indices());
        assert_eq!(sol.code.values(), plain.values());
        assert_eq!(sol.iterations, 1);
    }

    /// The completed-square quadratic matches a second-order Taylor model:
    /// error decays cubically in the expansion distance.
    #[test]
    fn quadratic_model_fidelity() {
        for loss in [
            LossKind::Square,
            LossKind::Exponential,
            LossKind::Logistic,
            LossKind::smooth_hinge_default(),
        ] {
            for i in 0..41 {
                let zp = -3.0 + 6.0 * (i as f64) / 40.0;
                let mzp = Margin::new(zp).unwrap();
                let (v0, d1, d2, r12) = (loss.value(mzp), loss.d1(mzp), loss.d2(mzp), loss.ratio12(mzp));
                let c = v0 - 0.5 * d2 * r12 * r12;
                for s in 0..21 {
                    let dz = -0.1 + 0.2 * (s as f64) / 20.0;
                    let z = zp + dz;
                    // Completed square + constant == Taylor quadratic.
                    let quad_cs = 0.5 * d2 * (z - (zp - r12)) * (z - (zp - r12)) + c;
                    let quad_taylor = v0 + d1 * dz + 0.5 * d2 * dz * dz;
                    assert!(
                        (quad_cs - quad_taylor).abs() <= 1e-11 * (1.0 + quad_taylor.abs()),
                        "{loss:?} completed square mismatch at zp={zp}, dz={dz}"
                    );
                    // Integral-form remainder bound: |err| <= max|d2(s)-d2(zp)| * dz^2 / 2.
                    let err = (loss.value(Margin::new(z).unwrap()) - quad_taylor).abs();
                    let mut max_delta: f64 = 0.0;
                    for q in 0..=20 {
                        let zs = zp + dz * (q as f64) / 20.0;
                        max_delta = max_delta
                            .max((loss.d2(Margin::new(zs).unwrap()) - d2).abs());
                    }
                    assert!(
                        err <= 0.5 * max_delta * dz * dz * 1.0001 + 1e-13,
                        "{loss:?} remainder too large at zp={zp}, dz={dz}: {err}"
                    );
                }
            }
        }
    }

    #[test]
    fn square_loss_converges_in_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let prob = random_problem(6, 8, 2, LossKind::Square, 2, &mut rng);
            let sol = dsc_solve_detailed(&prob, &SparseCode::empty(8), 100, 1e-4).unwrap();
            assert_eq!(sol.iterations, 1);
        }
    }

    #[test]
    fn huge_gamma_reduces_to_plain_omp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let atoms = Array2::from_shape_fn((6, 10), |_| rng.sample::<f64, _>(StandardNormal));
            let dict = Dictionary::from_unnormalized(atoms).unwrap();
            let b = Array1::from_shape_fn(6, |_| rng.sample::<f64, _>(StandardNormal));
            let g = Array2::from_shape_fn((10, 3), |_| rng.sample::<f64, _>(StandardNormal));
            let prob = DscProblem::new(
                dict.atoms().clone(),
                b.clone(),
                g,
                Array1::zeros(3),
                Array1::from_elem(3, 1e12),
                LossKind::Logistic,
                3,
            )
            .unwrap();
            let sol = dsc_solve(&prob, &SparseCode::empty(10), 100, 1e-4).unwrap();
            let plain = omp_encode(&dict, &b.view(), 3, 0.0).unwrap();
            assert_eq!(sol.indices(), plain.indices());
            for (a, b) in sol.values().iter().zip(plain.values()) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn returned_objective_never_worse_than_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for loss in [LossKind::Exponential, LossKind::Logistic, LossKind::smooth_hinge_default()] {
            for _ in 0..10 {
                let prob = random_problem(5, 9, 3, loss, 3, &mut rng);
                let x0 = random_code(9, 2, &mut rng);
                let start = dsc_objective(&prob, &x0).unwrap();
                let sol = dsc_solve_detailed(&prob, &x0, 50, 1e-4).unwrap();
                assert!(sol.objective <= start + 1e-12, "{loss:?}");
                assert!(sol.code.nnz() <= 3);
            }
        }
    }

    /// For the square loss the linearization is exact, so the true objective
    /// equals the stacked residual norm with constant exactly zero.
    #[test]
    fn stacked_system_equivalence_square_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let prob = random_problem(5, 8, 3, LossKind::Square, 2, &mut rng);
            let x = random_code(8, 3, &mut rng);
            let state = newton_linearize(&prob, &x).unwrap();
            let xd = x.to_dense();
            let r = &prob.b - &prob.a.dot(&xd);
            let cls = &state.delta - &prob.g.t().dot(&xd);
            let stacked: f64 = r.dot(&r)
                + cls
                    .iter()
                    .zip(state.h_diag.iter())
                    .map(|(c, h)| (h * c) * (h * c))
                    .sum::<f64>();
            let obj = dsc_objective(&prob, &x).unwrap();
            assert!(
                (stacked - obj).abs() <= 1e-10 * obj.abs().max(1.0),
                "stacked {stacked} vs objective {obj}"
            );
        }
    }

    #[test]
    fn exhaustive_support_oracle_on_planted_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let (prob, _) = planted_square_instance(&mut rng);
            let sol = dsc_solve_detailed(&prob, &SparseCode::empty(8), 100, 1e-4).unwrap();
            let oracle = exhaustive_best_objective(&prob);
            let rel = (sol.objective - oracle).abs() / oracle.abs().max(1e-12);
            assert!(rel <= 1e-8, "objective {} vs oracle {oracle}", sol.objective);
        }
    }

    /// Planted instance: a 2-sparse code whose representation and margins are
    /// both nearly consistent, so the global optimum is well separated.
    pub(crate) fn planted_square_instance(rng: &mut ChaCha8Rng) -> (DscProblem, SparseCode) {
        let (d, k, c, t) = (6, 8, 2, 2);
        let a = Array2::from_shape_fn((d, k), |_| rng.sample::<f64, _>(StandardNormal));
        let g = Array2::from_shape_fn((k, c), |_| rng.sample::<f64, _>(StandardNormal));
        let gamma = Array1::from_shape_fn(c, |_| 0.5 + 1.5 * rng.gen::<f64>());
        let xstar = random_code_distinct(k, t, rng);
        let xd = xstar.to_dense();
        let mut b = a.dot(&xd);
        for v in b.iter_mut() {
            *v += 0.02 * rng.sample::<f64, _>(StandardNormal);
        }
        // Choose biases so each margin sits near the loss minimum at x*.
        let mut bias = Array1::zeros(c);
        for j in 0..c {
            let gx = g.column(j).dot(&xd);
            bias[j] = 1.0 - gx + 0.02 * rng.sample::<f64, _>(StandardNormal);
        }
        let prob = DscProblem::new(a, b, g, bias, gamma, LossKind::Square, t).unwrap();
        (prob, xstar)
    }

    fn random_code_distinct(k: usize, nnz: usize, rng: &mut ChaCha8Rng) -> SparseCode {
        let mut idx: Vec<usize> = (0..k).collect();
        idx.shuffle(rng);
        let pairs = idx[..nnz]
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                (i, sign * (2.0 - 0.75 * j as f64))
            })
            .collect();
        SparseCode::from_pairs(pairs, k).unwrap()
    }

    /// Exhaustive search over all supports of size <= T with exact least
    /// squares on the stacked square-loss system, scored by the true
    /// objective. Independent of the greedy path.
    pub(crate) fn exhaustive_best_objective(prob: &DscProblem) -> f64 {
        let k = prob.atom_count();
        let t = prob.sparsity_budget();
        let d = prob.b.len();
        let c = prob.class_count();
        // Dense stacked system for the square loss.
        let rows = d + c;
        let mut m = vec![vec![0.0f64; k]; rows];
        let mut target = vec![0.0f64; rows];
        for r in 0..d {
            for col in 0..k {
                m[r][col] = prob.a[(r, col)];
            }
            target[r] = prob.b[r];
        }
        for j in 0..c {
            let h = (1.0 / prob.gamma[j]).sqrt();
            for col in 0..k {
                m[d + j][col] = h * prob.g[(col, j)];
            }
            target[d + j] = h * (1.0 - prob.bias_offsets[j]);
        }

        fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
            let n = b.len();
            for i in 0..n {
                let mut p = i;
                for r in (i + 1)..n {
                    if a[r][i].abs() > a[p][i].abs() {
                        p = r;
                    }
                }
                if a[p][i].abs() < 1e-14 {
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

        let mut best = f64::INFINITY;
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
        for s in supports {
            let n = s.len();
            let x = if n == 0 {
                Vec::new()
            } else {
                let mut gram = vec![vec![0.0; n]; n];
                let mut rhs = vec![0.0; n];
                for a_i in 0..n {
                    for b_i in 0..n {
                        gram[a_i][b_i] = (0..rows).map(|r| m[r][s[a_i]] * m[r][s[b_i]]).sum();
                    }
                    rhs[a_i] = (0..rows).map(|r| m[r][s[a_i]] * target[r]).sum();
                }
                match gauss_solve(gram, rhs) {
                    Some(x) => x,
                    None => continue,
                }
            };
            let pairs: Vec<(usize, f64)> = s.iter().copied().zip(x).collect();
            let code = match SparseCode::from_pairs(pairs, k) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let obj = dsc_objective(prob, &code).unwrap();
            if obj < best {
                best = obj;
            }
        }
        best
    }

    #[test]
    fn solve_rejects_bad_p_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prob = random_problem(4, 6, 2, LossKind::Square, 2, &mut rng);
        assert!(dsc_solve(&prob, &SparseCode::empty(6), 0, 1e-4).is_err());
    }

    #[test]
    fn problem_validation() {
        let a = Array2::<f64>::zeros((4, 6));
        let b = Array1::<f64>::zeros(3);
        let g = Array2::<f64>::zeros((6, 2));
        assert!(DscProblem::new(
            a.clone(),
            b,
            g.clone(),
            Array1::zeros(2),
            Array1::from_elem(2, 1.0),
            LossKind::Square,
            2
        )
        .is_err());
        let b = Array1::<f64>::zeros(4);
        assert!(DscProblem::new(
            a,
            b,
            g,
            Array1::zeros(2),
            Array1::from_elem(2, 0.0),
            LossKind::Square,
            2
        )
        .is_err());
    }
}
