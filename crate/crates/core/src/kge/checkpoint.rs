//! Binary embedding checkpoints.
//!
//! ```text
//! "FKGE" | version u32 | model tag u8 | |E| u64 | |R| u64 | d u32 | d_real u32
//! entity rows, then relation rows, as little-endian f64
//! ```
//!
//! RotatE relations are written in `(cos θ, sin θ)` form so every row has
//! `d_real` columns.

use std::fs;
use std::path::Path;

use super::{EmbeddingStore, ModelKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 4] = b"FKGE";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 8 + 8 + 4 + 4;

/// Decoded checkpoint with relations in score form.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelKind,
    pub dim: usize,
    pub entities: Matrix,
    pub relations: Matrix,
}

impl Checkpoint {
    pub fn from_store(store: &EmbeddingStore) -> Self {
        Checkpoint {
            model: store.model,
            dim: store.dim,
            entities: store.entities.clone(),
            relations: store.export_relations(),
        }
    }

    /// Entity-only checkpoint, e.g. an upload or broadcast table.
    pub fn entities_only(model: ModelKind, dim: usize, entities: Matrix) -> Self {
        let dr = model.real_dim(dim);
        Checkpoint {
            model,
            dim,
            entities,
            relations: Matrix::zeros(0, dr),
        }
    }

    /// Back to stored form; RotatE phases are recovered with `atan2`.
    pub fn into_store(self) -> EmbeddingStore {
        let relations = if self.model == ModelKind::RotatE {
            let d = self.dim;
            let mut m = Matrix::zeros(self.relations.rows(), d);
            for r in 0..self.relations.rows() {
                let row = self.relations.row(r);
                for i in 0..d {
                    m.row_mut(r)[i] = row[d + i].atan2(row[i]);
                }
            }
            m
        } else {
            self.relations
        };
        EmbeddingStore {
            model: self.model,
            dim: self.dim,
            entities: self.entities,
            relations,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dr = self.model.real_dim(self.dim);
        let n = self.entities.data().len() + self.relations.data().len();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.model.tag());
        out.extend_from_slice(&(self.entities.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.relations.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(dr as u32).to_le_bytes());
        for x in self.entities.data().iter().chain(self.relations.data()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(bad("file shorter than header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let model = ModelKind::from_tag(bytes[8]).ok_or_else(|| bad("unknown model tag"))?;
        let n_e = u64_at(9) as usize;
        let n_r = u64_at(17) as usize;
        let dim = u32_at(25) as usize;
        let dr = u32_at(29) as usize;
        if dr != model.real_dim(dim) {
            return Err(bad("d_real does not match model and d"));
        }
        let want = n_e
            .checked_add(n_r)
            .and_then(|n| n.checked_mul(dr))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| bad("size overflow"))?;
        if bytes.len() != want {
            return Err(Error::Format(format!(
                "expected {want} bytes, found {}",
                bytes.len()
            )));
        }
        let vals: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (e, r) = vals.split_at(n_e * dr);
        Ok(Checkpoint {
            model,
            dim,
            entities: Matrix::from_vec(n_e, dr, e.to_vec()),
            relations: Matrix::from_vec(n_r, dr, r.to_vec()),
        })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn round_trip_all_models() {
        let mut rng = stream(3, &[]);
        for m in ModelKind::ALL {
            let s = EmbeddingStore::random(m, 4, 6, 2, &mut rng);
            let c = Checkpoint::from_store(&s);
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            assert_eq!(back, c);
            let restored = back.into_store();
            assert_eq!(restored.entities, s.entities);
            for (a, b) in restored.relations.data().iter().zip(s.relations.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn header_layout() {
        let s = EmbeddingStore::zeros(ModelKind::ComplEx, 3, 2, 1);
        let b = Checkpoint::from_store(&s).to_bytes();
        assert_eq!(&b[0..4], b"FKGE");
        assert_eq!(b[8], ModelKind::ComplEx.tag());
        assert_eq!(b.len(), HEADER_LEN + 8 * 3 * 6);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let s = EmbeddingStore::zeros(ModelKind::TransE, 2, 2, 1);
        let mut b = Checkpoint::from_store(&s).to_bytes();
        assert!(Checkpoint::from_bytes(&b[..b.len() - 1]).is_err());
        b[0] = b'X';
        assert!(Checkpoint::from_bytes(&b).is_err());
    }
}
