//! Versioned binary checkpoints for trained heads and cluster models.
//!
//! ```text
//! magic     8 bytes  "ADAPTCKP"
//! version   u32 LE
//! kind      u32 LE   1 = trained head, 2 = cluster model
//! meta_len  u32 LE
//! meta      meta_len bytes of JSON (shapes + config snapshot)
//! payload   little-endian f64 arrays (u32 for assignments)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::clustering::ClusterModel;
use crate::geometry::UnitEmbedding;
use crate::tinynet::{MlpParams, TrainedHead, TrainerConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ADAPTCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

const KIND_HEAD: u32 = 1;
const KIND_CLUSTERS: u32 = 2;

#[derive(Serialize, Deserialize)]
struct HeadMeta {
    input_dim: usize,
    hidden_dim: usize,
    d_embed: usize,
    epochs_recorded: usize,
    config: TrainerConfig,
}

#[derive(Serialize, Deserialize)]
struct ClusterMeta {
    k: usize,
    seed: u64,
    dim: usize,
    n_samples: usize,
    n_history: usize,
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: u32, meta: &impl Serialize) -> Self {
        let meta = serde_json::to_vec(meta).expect("checkpoint metadata serializes");
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&kind.to_le_bytes());
        buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        buf.extend_from_slice(&meta);
        Self(buf)
    }

    fn f64s(&mut self, xs: &[f64]) {
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn u32s(&mut self, xs: impl Iterator<Item = u32>) {
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self.pos.checked_add(n).ok_or(DataError::TooLarge(n))?;
        if end > self.bytes.len() {
            return Err(DataError::Truncated {
                expected: end,
                got: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DataError> {
        let raw = self.take(n.checked_mul(8).ok_or(DataError::TooLarge(n))?)?;
        let xs: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(pos) = xs.iter().position(|x| !x.is_finite()) {
            return Err(DataError::NonFinite { row: 0, col: pos });
        }
        Ok(xs)
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>, DataError> {
        let raw = self.take(n.checked_mul(4).ok_or(DataError::TooLarge(n))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<(), DataError> {
        if self.pos != self.bytes.len() {
            return Err(DataError::TrailingBytes {
                expected: self.pos,
                got: self.bytes.len(),
            });
        }
        Ok(())
    }
}

/// Reads the header and returns the metadata JSON for the expected kind.
fn open<'a, M: for<'de> Deserialize<'de>>(
    bytes: &'a [u8],
    kind: u32,
) -> Result<(M, Reader<'a>), DataError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).map_err(|_| DataError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(DataError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(DataError::UnsupportedVersion(version));
    }
    let found = r.u32()?;
    if found != kind {
        let name = |k| match k {
            KIND_HEAD => "trained head".to_string(),
            KIND_CLUSTERS => "cluster model".to_string(),
            other => format!("unknown kind {other}"),
        };
        return Err(DataError::WrongKind {
            expected: if kind == KIND_HEAD {
                "trained head"
            } else {
                "cluster model"
            },
            found: name(found),
        });
    }
    let meta_len = r.u32()? as usize;
    let meta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| DataError::Parse(format!("checkpoint metadata: {e}")))?;
    Ok((meta, r))
}

fn write_params(w: &mut Writer, p: &MlpParams) {
    for t in p.tensors() {
        w.f64s(t);
    }
}

fn read_params(r: &mut Reader, meta: &HeadMeta) -> Result<MlpParams, DataError> {
    let (i, h, o) = (meta.input_dim, meta.hidden_dim, meta.d_embed);
    Ok(MlpParams {
        input_dim: i,
        hidden_dim: h,
        output_dim: o,
        w1: r.f64s(h * i)?,
        b1: r.f64s(h)?,
        w2: r.f64s(o * h)?,
        b2: r.f64s(o)?,
    })
}

pub fn encode_head_checkpoint(head: &TrainedHead) -> Vec<u8> {
    let meta = HeadMeta {
        input_dim: head.student.input_dim,
        hidden_dim: head.student.hidden_dim,
        d_embed: head.student.output_dim,
        epochs_recorded: head.loss_history.len(),
        config: head.config.clone(),
    };
    let mut w = Writer::new(KIND_HEAD, &meta);
    write_params(&mut w, &head.student);
    write_params(&mut w, &head.teacher);
    w.f64s(&head.loss_history);
    w.0
}

/// Decodes a head checkpoint; when `expected_d_embed` is given the stored
/// embedding dimension must match it.
pub fn decode_head_checkpoint(
    bytes: &[u8],
    expected_d_embed: Option<usize>,
) -> Result<TrainedHead, DataError> {
    let (meta, mut r): (HeadMeta, _) = open(bytes, KIND_HEAD)?;
    if let Some(expected) = expected_d_embed {
        if expected != meta.d_embed {
            return Err(DataError::EmbedDimMismatch {
                expected,
                found: meta.d_embed,
            });
        }
    }
    if meta.config.d_embed != meta.d_embed || meta.config.hidden_dim != meta.hidden_dim {
        return Err(DataError::InvalidConfig(
            "checkpoint shapes disagree with its config snapshot".into(),
        ));
    }
    let student = read_params(&mut r, &meta)?;
    let teacher = read_params(&mut r, &meta)?;
    let loss_history = r.f64s(meta.epochs_recorded)?;
    r.finish()?;
    Ok(TrainedHead {
        student,
        teacher,
        loss_history,
        config: meta.config,
    })
}

pub fn encode_cluster_checkpoint(model: &ClusterModel) -> Vec<u8> {
    let meta = ClusterMeta {
        k: model.k,
        seed: model.seed,
        dim: model.dim(),
        n_samples: model.assignments.len(),
        n_history: model.objective_history.len(),
    };
    let mut w = Writer::new(KIND_CLUSTERS, &meta);
    for c in &model.centroids {
        w.f64s(c.as_slice());
    }
    w.f64s(&model.objective_history);
    w.u32s(model.assignments.iter().map(|&a| a as u32));
    w.0
}

pub fn decode_cluster_checkpoint(
    bytes: &[u8],
    expected_dim: Option<usize>,
) -> Result<ClusterModel, DataError> {
    let (meta, mut r): (ClusterMeta, _) = open(bytes, KIND_CLUSTERS)?;
    if let Some(expected) = expected_dim {
        if expected != meta.dim {
            return Err(DataError::EmbedDimMismatch {
                expected,
                found: meta.dim,
            });
        }
    }
    let mut centroids = Vec::with_capacity(meta.k);
    for _ in 0..meta.k {
        let c = r.f64s(meta.dim)?;
        centroids.push(
            UnitEmbedding::from_unit(c).map_err(|e| DataError::InvalidConfig(e.to_string()))?,
        );
    }
    let objective_history = r.f64s(meta.n_history)?;
    let assignments: Vec<usize> = r
        .u32s(meta.n_samples)?
        .into_iter()
        .map(|a| a as usize)
        .collect();
    r.finish()?;
    if let Some(&bad) = assignments.iter().find(|&&a| a >= meta.k) {
        return Err(DataError::InvalidConfig(format!(
            "assignment {bad} out of range for k = {}",
            meta.k
        )));
    }
    Ok(ClusterModel {
        centroids,
        assignments,
        objective_history,
        k: meta.k,
        seed: meta.seed,
    })
}

pub fn write_head_checkpoint(head: &TrainedHead, path: impl AsRef<Path>) -> Result<(), DataError> {
    fs::write(path.as_ref(), encode_head_checkpoint(head)).map_err(|e| DataError::io(path.as_ref(), e))
}

pub fn read_head_checkpoint(
    path: impl AsRef<Path>,
    expected_d_embed: Option<usize>,
) -> Result<TrainedHead, DataError> {
    let bytes = fs::read(path.as_ref()).map_err(|e| DataError::io(path.as_ref(), e))?;
    decode_head_checkpoint(&bytes, expected_d_embed)
}

pub fn write_cluster_checkpoint(model: &ClusterModel, path: impl AsRef<Path>) -> Result<(), DataError> {
    fs::write(path.as_ref(), encode_cluster_checkpoint(model))
        .map_err(|e| DataError::io(path.as_ref(), e))
}

pub fn read_cluster_checkpoint(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<ClusterModel, DataError> {
    let bytes = fs::read(path.as_ref()).map_err(|e| DataError::io(path.as_ref(), e))?;
    decode_cluster_checkpoint(&bytes, expected_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn head() -> TrainedHead {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = TrainerConfig {
            hidden_dim: 5,
            d_embed: 3,
            ..Default::default()
        };
        let student = MlpParams::init(4, 5, 3, &mut rng);
        TrainedHead {
            teacher: MlpParams::init(4, 5, 3, &mut rng),
            student,
            loss_history: vec![1.5, 0.25],
            config: cfg,
        }
    }

    #[test]
    fn head_round_trip() {
        let h = head();
        let bytes = encode_head_checkpoint(&h);
        let back = decode_head_checkpoint(&bytes, Some(3)).unwrap();
        assert_eq!(back, h);
        assert_eq!(encode_head_checkpoint(&back), bytes);
    }

    #[test]
    fn d_embed_mismatch_is_loud() {
        let bytes = encode_head_checkpoint(&head());
        assert_eq!(
            decode_head_checkpoint(&bytes, Some(256)),
            Err(DataError::EmbedDimMismatch {
                expected: 256,
                found: 3
            })
        );
    }

    #[test]
    fn malformed_checkpoints() {
        let bytes = encode_head_checkpoint(&head());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_head_checkpoint(&bad, None), Err(DataError::BadMagic));
        assert!(matches!(
            decode_head_checkpoint(&bytes[..bytes.len() - 3], None),
            Err(DataError::Truncated { .. })
        ));
        let mut version = bytes.clone();
        version[8] = 9;
        assert_eq!(
            decode_head_checkpoint(&version, None),
            Err(DataError::UnsupportedVersion(9))
        );
        assert!(matches!(
            decode_cluster_checkpoint(&bytes, None),
            Err(DataError::WrongKind { .. })
        ));
        assert_eq!(decode_head_checkpoint(b"ADA", None), Err(DataError::BadMagic));
    }
}
