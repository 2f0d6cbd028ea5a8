//! Binary model container: a self-describing, little-endian layout that
//! round-trips bit-exactly. The exact byte layout is documented in
//! `docs/model_format.md`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::classifiers::ClassifierBank;
use crate::dictionary::InitKind;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::sparse_coding::Dictionary;
use crate::trainer::{
    ClassificationParams, DdlModel, ObjectiveBreakdown, RepresentationParams, TrainConfig,
};

pub const MODEL_MAGIC: &[u8; 8] = b"DDLMODL\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn loss_tag(loss: LossKind) -> (u8, f64, f64) {
    match loss {
        LossKind::Square => (0, 0.0, 0.0),
        LossKind::Exponential => (1, 0.0, 0.0),
        LossKind::Logistic => (2, 0.0, 0.0),
        LossKind::SmoothHinge { rho, eps } => (3, rho, eps),
    }
}

fn loss_from_tag(tag: u8, rho: f64, eps: f64, path: &str) -> Result<LossKind> {
    match tag {
        0 => Ok(LossKind::Square),
        1 => Ok(LossKind::Exponential),
        2 => Ok(LossKind::Logistic),
        3 => LossKind::smooth_hinge(rho, eps),
        other => Err(Error::BadModel {
            path: path.to_string(),
            reason: format!("unknown loss tag {other}"),
        }),
    }
}

/// Serializes a model to its canonical byte layout. Training codes are not
/// part of the container.
pub fn model_to_bytes(model: &DdlModel) -> Vec<u8> {
    let d = model.dictionary.signal_dim();
    let k = model.dictionary.atom_count();
    let c = model.classifiers.class_count();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.write_u32::<LittleEndian>(MODEL_FORMAT_VERSION).unwrap();
    out.write_u32::<LittleEndian>(d as u32).unwrap();
    out.write_u32::<LittleEndian>(k as u32).unwrap();
    out.write_u32::<LittleEndian>(c as u32).unwrap();
    out.write_u32::<LittleEndian>(model.config.t as u32).unwrap();

    let (tag, rho, eps) = loss_tag(model.config.loss);
    out.write_u8(tag).unwrap();
    out.write_f64::<LittleEndian>(rho).unwrap();
    out.write_f64::<LittleEndian>(eps).unwrap();

    for r in 0..d {
        for col in 0..k {
            out.write_f64::<LittleEndian>(model.dictionary.atoms()[(r, col)])
                .unwrap();
        }
    }
    for r in 0..k {
        for col in 0..c {
            out.write_f64::<LittleEndian>(model.classifiers.weights()[(r, col)])
                .unwrap();
        }
    }
    for j in 0..c {
        out.write_f64::<LittleEndian>(model.classifiers.biases()[j])
            .unwrap();
    }

    let sigma = model.rep_params.sigma();
    out.write_u64::<LittleEndian>(sigma.len() as u64).unwrap();
    for &s in sigma.iter() {
        out.write_f64::<LittleEndian>(s).unwrap();
    }
    for &g in model.cls_params.gamma().iter() {
        out.write_f64::<LittleEndian>(g).unwrap();
    }

    out.write_u64::<LittleEndian>(model.objective_trace.len() as u64)
        .unwrap();
    for row in &model.objective_trace {
        out.write_f64::<LittleEndian>(row.total).unwrap();
        out.write_f64::<LittleEndian>(row.rep_cost).unwrap();
        out.write_f64::<LittleEndian>(row.cls_cost).unwrap();
        out.write_f64::<LittleEndian>(row.log_prior).unwrap();
    }

    // Config snapshot.
    out.write_u32::<LittleEndian>(model.config.q_max as u32).unwrap();
    out.write_u32::<LittleEndian>(model.config.p_max as u32).unwrap();
    out.write_f64::<LittleEndian>(model.config.stop_rel_change)
        .unwrap();
    match model.config.ridge {
        None => {
            out.write_u8(0).unwrap();
            out.write_f64::<LittleEndian>(0.0).unwrap();
        }
        Some(r) => {
            out.write_u8(1).unwrap();
            out.write_f64::<LittleEndian>(r).unwrap();
        }
    }
    out.write_u8(match model.config.init_kind {
        InitKind::FromSamples => 0,
        InitKind::GaussianRandom => 1,
    })
    .unwrap();
    out.write_u64::<LittleEndian>(model.config.seed).unwrap();
    match &model.config.semi_supervised_mask {
        None => out.write_u8(0).unwrap(),
        Some(mask) => {
            out.write_u8(1).unwrap();
            out.write_u64::<LittleEndian>(mask.len() as u64).unwrap();
            for &m in mask {
                out.write_u8(u8::from(m)).unwrap();
            }
        }
    }
    out
}

fn bad(path: &str, reason: impl Into<String>) -> Error {
    Error::BadModel {
        path: path.to_string(),
        reason: reason.into(),
    }
}

/// Parses the canonical byte layout back into a model (with empty codes).
pub fn model_from_bytes(bytes: &[u8], path: &str) -> Result<DdlModel> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic)
        .map_err(|_| bad(path, "file shorter than the magic header"))?;
    if &magic != MODEL_MAGIC {
        return Err(bad(path, "magic bytes do not match a model file"));
    }
    let version = cur
        .read_u32::<LittleEndian>()
        .map_err(|_| bad(path, "missing format version"))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(bad(path, format!("unsupported format version {version}")));
    }
    let rd_u32 = |cur: &mut Cursor<&[u8]>, what: &str| -> Result<usize> {
        cur.read_u32::<LittleEndian>()
            .map(|v| v as usize)
            .map_err(|_| bad(path, format!("truncated while reading {what}")))
    };
    let rd_u64 = |cur: &mut Cursor<&[u8]>, what: &str| -> Result<usize> {
        cur.read_u64::<LittleEndian>()
            .map(|v| v as usize)
            .map_err(|_| bad(path, format!("truncated while reading {what}")))
    };
    let rd_f64 = |cur: &mut Cursor<&[u8]>, what: &str| -> Result<f64> {
        cur.read_f64::<LittleEndian>()
            .map_err(|_| bad(path, format!("truncated while reading {what}")))
    };

    let d = rd_u32(&mut cur, "signal dimension")?;
    let k = rd_u32(&mut cur, "atom count")?;
    let c = rd_u32(&mut cur, "class count")?;
    let t = rd_u32(&mut cur, "sparsity budget")?;
    let tag = cur
        .read_u8()
        .map_err(|_| bad(path, "truncated while reading loss tag"))?;
    let rho = rd_f64(&mut cur, "hinge rho")?;
    let eps = rd_f64(&mut cur, "hinge eps")?;
    let loss = loss_from_tag(tag, rho, eps, path)?;

    let mut atoms = Array2::zeros((d, k));
    for r in 0..d {
        for col in 0..k {
            atoms[(r, col)] = rd_f64(&mut cur, "dictionary entries")?;
        }
    }
    let mut weights = Array2::zeros((k, c));
    for r in 0..k {
        for col in 0..c {
            weights[(r, col)] = rd_f64(&mut cur, "classifier weights")?;
        }
    }
    let mut biases = Array1::zeros(c);
    for j in 0..c {
        biases[j] = rd_f64(&mut cur, "classifier biases")?;
    }

    let n_sigma = rd_u64(&mut cur, "sigma length")?;
    let mut sigma = Array1::zeros(n_sigma);
    for i in 0..n_sigma {
        sigma[i] = rd_f64(&mut cur, "sigma entries")?;
    }
    let mut gamma = Array1::zeros(c);
    for j in 0..c {
        gamma[j] = rd_f64(&mut cur, "gamma entries")?;
    }

    let trace_len = rd_u64(&mut cur, "trace length")?;
    let mut trace = Vec::with_capacity(trace_len);
    for _ in 0..trace_len {
        trace.push(ObjectiveBreakdown {
            total: rd_f64(&mut cur, "trace totals")?,
            rep_cost: rd_f64(&mut cur, "trace rep costs")?,
            cls_cost: rd_f64(&mut cur, "trace cls costs")?,
            log_prior: rd_f64(&mut cur, "trace priors")?,
        });
    }

    let q_max = rd_u32(&mut cur, "q_max")?;
    let p_max = rd_u32(&mut cur, "p_max")?;
    let stop_rel_change = rd_f64(&mut cur, "stop_rel_change")?;
    let ridge_flag = cur
        .read_u8()
        .map_err(|_| bad(path, "truncated while reading ridge flag"))?;
    let ridge_value = rd_f64(&mut cur, "ridge value")?;
    let ridge = match ridge_flag {
        0 => None,
        1 => Some(ridge_value),
        other => return Err(bad(path, format!("bad ridge flag {other}"))),
    };
    let init_tag = cur
        .read_u8()
        .map_err(|_| bad(path, "truncated while reading init kind"))?;
    let init_kind = match init_tag {
        0 => InitKind::FromSamples,
        1 => InitKind::GaussianRandom,
        other => return Err(bad(path, format!("bad init kind {other}"))),
    };
    let seed = cur
        .read_u64::<LittleEndian>()
        .map_err(|_| bad(path, "truncated while reading seed"))?;
    let mask_flag = cur
        .read_u8()
        .map_err(|_| bad(path, "truncated while reading mask flag"))?;
    let semi_supervised_mask = match mask_flag {
        0 => None,
        1 => {
            let len = rd_u64(&mut cur, "mask length")?;
            let mut mask = Vec::with_capacity(len);
            for _ in 0..len {
                let b = cur
                    .read_u8()
                    .map_err(|_| bad(path, "truncated while reading mask bytes"))?;
                mask.push(b != 0);
            }
            Some(mask)
        }
        other => return Err(bad(path, format!("bad mask flag {other}"))),
    };
    if cur.position() as usize != bytes.len() {
        return Err(bad(path, "trailing bytes after the config snapshot"));
    }

    let dictionary =
        Dictionary::new(atoms).map_err(|e| bad(path, format!("invalid dictionary: {e}")))?;
    let classifiers = ClassifierBank::new(weights, biases, loss)
        .map_err(|e| bad(path, format!("invalid classifiers: {e}")))?;
    let rep_params =
        RepresentationParams::new(sigma).map_err(|e| bad(path, format!("invalid sigma: {e}")))?;
    let cls_params =
        ClassificationParams::new(gamma).map_err(|e| bad(path, format!("invalid gamma: {e}")))?;

    Ok(DdlModel {
        dictionary,
        classifiers,
        codes: Vec::new(),
        rep_params,
        cls_params,
        config: TrainConfig {
            k,
            t,
            loss,
            q_max,
            p_max,
            stop_rel_change,
            ridge,
            init_kind,
            seed,
            semi_supervised_mask,
        },
        objective_trace: trace,
    })
}

pub fn save_model(model: &DdlModel, path: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&model_to_bytes(model))
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_model(path: &str) -> Result<DdlModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::LabelMatrix;
    use crate::trainer::train;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn trained_model(loss: LossKind, mask: bool) -> DdlModel {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20;
        let mut y = Array2::zeros((6, n));
        let mut classes = Vec::new();
        for i in 0..n {
            let c = i % 2;
            classes.push(c);
            for r in 0..6 {
                let base = if r == c { 2.0 } else { 0.0 };
                y[(r, i)] = base + 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let lm = LabelMatrix::from_class_indices(&classes, 2).unwrap();
        let mut config = TrainConfig::new(6, 2, loss);
        config.q_max = 2;
        config.seed = 11;
        if mask {
            config.semi_supervised_mask = Some(vec![true; n]);
        }
        train(&y.view(), &lm, &config).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for loss in [LossKind::Square, LossKind::smooth_hinge_default()] {
            let model = trained_model(loss, false);
            let bytes = model_to_bytes(&model);
            let loaded = model_from_bytes(&bytes, "mem").unwrap();
            let bytes2 = model_to_bytes(&loaded);
            assert_eq!(bytes, bytes2, "{loss:?}");
            assert_eq!(loaded.dictionary.atoms(), model.dictionary.atoms());
            assert_eq!(loaded.classifiers.weights(), model.classifiers.weights());
            assert_eq!(loaded.rep_params.sigma(), model.rep_params.sigma());
            assert_eq!(loaded.cls_params.gamma(), model.cls_params.gamma());
            assert_eq!(loaded.config, model.config);
            assert_eq!(loaded.objective_trace.len(), model.objective_trace.len());
        }
    }

    #[test]
    fn round_trip_preserves_mask() {
        let model = trained_model(LossKind::Logistic, true);
        let bytes = model_to_bytes(&model);
        let loaded = model_from_bytes(&bytes, "mem").unwrap();
        assert_eq!(loaded.config.semi_supervised_mask, Some(vec![true; 20]));
        assert_eq!(model_to_bytes(&loaded), bytes);
    }

    #[test]
    fn rejects_corrupted_headers() {
        let model = trained_model(LossKind::Square, false);
        let bytes = model_to_bytes(&model);

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            model_from_bytes(&bad_magic, "mem"),
            Err(Error::BadModel { .. })
        ));

        let truncated = &bytes[..bytes.len() / 2];
        assert!(model_from_bytes(truncated, "mem").is_err());

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(model_from_bytes(&trailing, "mem").is_err());

        let mut bad_version = bytes;
        bad_version[8] = 99;
        assert!(model_from_bytes(&bad_version, "mem").is_err());
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ddl");
        let path = path.to_str().unwrap();
        let model = trained_model(LossKind::Exponential, false);
        save_model(&model, path).unwrap();
        let loaded = load_model(path).unwrap();
        assert_eq!(model_to_bytes(&loaded), model_to_bytes(&model));
        assert!(load_model("/nonexistent/model.ddl").is_err());
    }
}
