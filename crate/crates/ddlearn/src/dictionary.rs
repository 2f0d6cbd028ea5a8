//! Dictionary initialization and the single-sweep weighted KSVD update.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classifiers::LabelMatrix;
use crate::error::{Error, Result};
use crate::linalg::top_singular_triple;
use crate::sparse_coding::{Dictionary, SparseCode};

/// How the initial dictionary is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Training samples, drawn uniformly across classes, then normalized.
    FromSamples,
    /// I.i.d. zero-mean Gaussian entries, then normalized columnwise.
    GaussianRandom,
}

/// Initialization scheme; the same seed always yields the same dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitScheme {
    pub kind: InitKind,
    pub seed: u64,
}

/// Class index of each sample from a one-hot label matrix (first +1 row).
fn class_of_samples(labels: &LabelMatrix) -> Vec<usize> {
    let c = labels.class_count();
    (0..labels.sample_count())
        .map(|i| (0..c).find(|&j| labels.label(j, i) == 1.0).unwrap_or(0))
        .collect()
}

/// Draws `k` initial atoms from the data (or at random) and normalizes.
///
/// With labels present, `FromSamples` draws a near-equal number of samples
/// per class without replacement; the remainder goes to the lowest class
/// indices. Zero-norm samples are skipped and redrawn.
pub fn init_dictionary(
    y: &ArrayView2<f64>,
    labels: Option<&LabelMatrix>,
    k: usize,
    scheme: &InitScheme,
) -> Result<Dictionary> {
    let (d, n) = y.dim();
    if k == 0 || d == 0 {
        return Err(Error::InvalidConfig("dictionary size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scheme.seed);
    let atoms = match scheme.kind {
        InitKind::GaussianRandom => {
            Array2::from_shape_fn((d, k), |_| rng.sample::<f64, _>(StandardNormal))
        }
        InitKind::FromSamples => {
            if k > n {
                return Err(Error::InvalidConfig(format!(
                    "cannot draw {k} atoms from {n} samples without replacement"
                )));
            }
            let chosen: Vec<usize> = match labels {
                Some(lm) => {
                    if lm.sample_count() != n {
                        return Err(Error::DimensionMismatch {
                            context: "label columns vs data columns",
                            expected: n,
                            got: lm.sample_count(),
                        });
                    }
                    let c = lm.class_count();
                    let classes = class_of_samples(lm);
                    let base = k / c;
                    let rem = k % c;
                    let mut picked = Vec::with_capacity(k);
                    for j in 0..c {
                        let quota = base + usize::from(j < rem);
                        let mut members: Vec<usize> =
                            (0..n).filter(|&i| classes[i] == j).collect();
                        members.shuffle(&mut rng);
                        let mut taken = 0;
                        for &i in &members {
                            if taken == quota {
                                break;
                            }
                            if y.column(i).dot(&y.column(i)) > 0.0 {
                                picked.push(i);
                                taken += 1;
                            }
                        }
                        if taken < quota {
                            return Err(Error::Data(format!(
                                "class {j} has only {taken} usable samples, needs {quota} \
                                 for dictionary initialization"
                            )));
                        }
                    }
                    picked
                }
                None => {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng);
                    let picked: Vec<usize> = order
                        .into_iter()
                        .filter(|&i| y.column(i).dot(&y.column(i)) > 0.0)
                        .take(k)
                        .collect();
                    if picked.len() < k {
                        return Err(Error::Data(format!(
                            "only {} nonzero samples available for {k} atoms",
                            picked.len()
                        )));
                    }
                    picked
                }
            };
            let mut atoms = Array2::zeros((d, k));
            for (col, &i) in chosen.iter().enumerate() {
                atoms.column_mut(col).assign(&y.column(i));
            }
            atoms
        }
    };
    Dictionary::from_unnormalized(atoms)
}

/// One full weighted KSVD sweep.
///
/// Sample columns and their coefficients are scaled by `weights[i]` before
/// the per-atom rank-1 updates and unscaled afterwards, so the sweep
/// minimizes `sum_i weights[i]^2 ||y_i - D x_i||^2` with supports fixed.
/// Atoms used by no sample are replaced by the (normalized) sample with the
/// largest current weighted residual.
pub fn ksvd_update(
    dict: &Dictionary,
    y: &ArrayView2<f64>,
    codes: &[SparseCode],
    weights: &ArrayView1<f64>,
) -> Result<(Dictionary, Vec<SparseCode>)> {
    let (d, n) = y.dim();
    let k = dict.atom_count();
    if dict.signal_dim() != d {
        return Err(Error::DimensionMismatch {
            context: "dictionary rows vs data rows",
            expected: d,
            got: dict.signal_dim(),
        });
    }
    if codes.len() != n {
        return Err(Error::DimensionMismatch {
            context: "code count vs data columns",
            expected: n,
            got: codes.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            context: "weight count vs data columns",
            expected: n,
            got: weights.len(),
        });
    }
    for &w in weights.iter() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ksvd weights must be positive and finite, got {w}"
            )));
        }
    }
    for (i, code) in codes.iter().enumerate() {
        if code.ambient_dim() != k {
            return Err(Error::DimensionMismatch {
                context: "code ambient dimension vs atom count",
                expected: k,
                got: codes[i].ambient_dim(),
            });
        }
    }

    // usage[k] = (sample index, position within that sample's value list).
    let mut usage: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
    let mut code_indices: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut code_values: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, code) in codes.iter().enumerate() {
        for (pos, &atom) in code.indices().iter().enumerate() {
            usage[atom].push((i, pos));
        }
        code_indices.push(code.indices().to_vec());
        code_values.push(code.values().to_vec());
    }

    let mut atoms = dict.atoms().clone();
    // Scaled residual R = [w_i (y_i - D x_i)]_i, maintained across the sweep.
    let mut residual = Array2::zeros((d, n));
    for i in 0..n {
        let mut col = y.column(i).to_owned();
        for (pos, &atom) in code_indices[i].iter().enumerate() {
            let v = code_values[i][pos];
            col.iter_mut()
                .zip(atoms.column(atom))
                .for_each(|(r, &a)| *r -= v * a);
        }
        let w = weights[i];
        residual.column_mut(i).assign(&col.mapv(|r| w * r));
    }

    let mut replaced: Vec<usize> = Vec::new();
    for atom_idx in 0..k {
        let users = &usage[atom_idx];
        if users.is_empty() {
            // Dead atom: grab the worst-represented sample direction.
            let mut best = usize::MAX;
            let mut best_res = -1.0;
            for i in 0..n {
                if replaced.contains(&i) {
                    continue;
                }
                let rsq = residual.column(i).dot(&residual.column(i));
                let ysq = y.column(i).dot(&y.column(i));
                if ysq > 0.0 && rsq > best_res {
                    best_res = rsq;
                    best = i;
                }
            }
            if best != usize::MAX {
                replaced.push(best);
                let norm = y.column(best).dot(&y.column(best)).sqrt();
                let new_atom = y.column(best).mapv(|v| v / norm);
                atoms.column_mut(atom_idx).assign(&new_atom);
            }
            continue;
        }

        // Weighted residual with this atom's contribution restored.
        let m = users.len();
        let mut e = Array2::zeros((d, m));
        for (col, &(i, pos)) in users.iter().enumerate() {
            let scaled_coeff = weights[i] * code_values[i][pos];
            let atom = atoms.column(atom_idx);
            let mut dst = e.column_mut(col);
            dst.assign(&residual.column(i));
            dst.iter_mut()
                .zip(atom)
                .for_each(|(v, &a)| *v += scaled_coeff * a);
        }

        let (sigma, mut u, mut v) = top_singular_triple(&e.view());
        if sigma <= 0.0 {
            continue;
        }
        // Sign convention: first nonzero entry of the atom is positive.
        if let Some(&first) = u.iter().find(|&&x| x != 0.0) {
            if first < 0.0 {
                u.mapv_inplace(|x| -x);
                v.mapv_inplace(|x| -x);
            }
        }
        let unorm = u.dot(&u).sqrt();
        u.mapv_inplace(|x| x / unorm);

        atoms.column_mut(atom_idx).assign(&u);
        for (col, &(i, pos)) in users.iter().enumerate() {
            let scaled = sigma * v[col];
            code_values[i][pos] = scaled / weights[i];
            // New residual for this sample: restored column minus the rank-1 fit.
            let mut dst = residual.column_mut(i);
            dst.assign(&e.column(col));
            dst.iter_mut().zip(&u).for_each(|(r, &a)| *r -= scaled * a);
        }
    }

    let dict_out = Dictionary::from_unnormalized(atoms)?;
    let codes_out: Vec<SparseCode> = code_indices
        .into_iter()
        .zip(code_values)
        .map(|(idx, vals)| {
            let pairs = idx.into_iter().zip(vals).collect();
            SparseCode::from_pairs(pairs, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dict_out, codes_out))
}

/// `sum_i weights[i]^2 ||y_i - D x_i||^2`, the quantity a KSVD sweep reduces.
pub fn weighted_representation_cost(
    dict: &Dictionary,
    y: &ArrayView2<f64>,
    codes: &[SparseCode],
    weights: &ArrayView1<f64>,
) -> f64 {
    let mut total = 0.0;
    for (i, code) in codes.iter().enumerate() {
        let mut col = y.column(i).to_owned();
        for (atom, v) in code.iter() {
            col.iter_mut()
                .zip(dict.atom(atom))
                .for_each(|(r, &a)| *r -= v * a);
        }
        total += weights[i] * weights[i] * col.dot(&col);
    }
    total
}
