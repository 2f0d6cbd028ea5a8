use ddlearn::classifiers::LabelMatrix;
use ddlearn::data_io::Dataset;
use ddlearn::inference::{evaluate, PredictOptions};
use ddlearn::losses::LossKind;
use ddlearn::trainer::{train, train_baseline, TrainConfig};
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn clustered(d: usize, c: usize, atoms_per_class: usize, n: usize, t: usize,
             noise: f64, label_noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_true = c * atoms_per_class;
    let mut atoms = Array2::from_shape_fn((d, k_true), |_| rng.sample::<f64, _>(StandardNormal));
    for mut col in atoms.columns_mut() {
        let norm = col.dot(&col).sqrt();
        col.mapv_inplace(|v| v / norm);
    }
    let mut samples = Array2::zeros((d, n));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % c;
        labels.push(class);
        let own_start = class * atoms_per_class;
        let mut support = Vec::with_capacity(t);
        while support.len() < t {
            let pick = own_start + rng.gen_range(0..atoms_per_class);
            if !support.contains(&pick) {
                support.push(pick);
            }
        }
        let mut col = samples.column_mut(i);
        for &a in &support {
            let mag = 0.5 + rng.gen::<f64>();
            col.iter_mut().zip(atoms.column(a)).for_each(|(s, &v)| *s += mag * v);
        }
        for s in col.iter_mut() {
            *s += noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    if label_noise > 0.0 {
        for l in labels.iter_mut() {
            if rng.gen::<f64>() < label_noise {
                *l = (*l + 1 + rng.gen_range(0..c - 1)) % c;
            }
        }
    }
    Dataset::new(samples, labels, c, "clustered").unwrap()
}

fn main() {
    let ds = clustered(64, 5, 16, 3000, 3, 0.05, 0.0, 99);
    let (train_set, test_set) = ddlearn::data_io::split(&ds, 1.0 / 3.0, 5, true).unwrap();
    let labels: LabelMatrix = train_set.label_matrix().unwrap();
    for loss in [LossKind::Square, LossKind::Exponential, LossKind::Logistic, LossKind::smooth_hinge_default()] {
        let mut config = TrainConfig::new(200, 3, loss);
        config.q_max = 12;
        config.seed = 13;
        config.init_kind = ddlearn::dictionary::InitKind::GaussianRandom;
        let t0 = std::time::Instant::now();
        let ddl = train(&train_set.samples.view(), &labels, &config).unwrap();
        let base = train_baseline(&train_set.samples.view(), &labels, &config).unwrap();
        let opts = PredictOptions::fast(3);
        let m_ddl = evaluate(&ddl, &test_set.samples.view(), &test_set.labels, &opts).unwrap();
        let m_base = evaluate(&base, &test_set.samples.view(), &test_set.labels, &opts).unwrap();
        println!("{:>8}: ddl={:.4} base={:.4} ok={} ({:.0}s)",
            loss.name(), m_ddl.error_rate, m_base.error_rate,
            m_ddl.error_rate <= m_base.error_rate, t0.elapsed().as_secs_f64());
    }
}
