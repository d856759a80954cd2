//! Exact cosine k-nearest-neighbour index over unit vectors.
//!
//! Vectors are stored row-major in one flat buffer and every search scans
//! all of them. Results are ordered by score descending, then by chunk id
//! ascending, so output is fully deterministic.
//!
//! ## Binary format
//!
//! All integers little-endian.
//!
//! ```text
//! magic     4 bytes  "NYIX"
//! version   u8       1
//! dimension u32      > 0
//! count     u64
//! count x {
//!     id_len  u16
//!     id      id_len bytes, UTF-8
//!     vector  dimension x f32
//! }
//! ```

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::embedding::{dot, EmbeddingVector};

pub const MAGIC: &[u8; 4] = b"NYIX";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("index dimension must be positive")]
    ZeroDimension,
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("duplicate chunk id `{0}`")]
    DuplicateId(String),
    #[error("chunk id longer than {max} bytes", max = u16::MAX)]
    IdTooLong,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("corrupt index at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
}

/// Score descending, then chunk id ascending.
pub fn hit_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    positions: BTreeMap<String, usize>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Result<Self, IndexError> {
        if dimension == 0 {
            return Err(IndexError::ZeroDimension);
        }
        Ok(Self { dimension, ids: Vec::new(), data: Vec::new(), positions: BTreeMap::new() })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.positions.contains_key(chunk_id)
    }

    /// Stored components of entry `i`, in insertion order.
    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn add(&mut self, chunk_id: impl Into<String>, vector: &EmbeddingVector) -> Result<(), IndexError> {
        self.add_raw(chunk_id.into(), vector.as_slice())
    }

    fn add_raw(&mut self, chunk_id: String, vector: &[f32]) -> Result<(), IndexError> {
        if vector.len() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, actual: vector.len() });
        }
        if chunk_id.len() > u16::MAX as usize {
            return Err(IndexError::IdTooLong);
        }
        if self.positions.contains_key(&chunk_id) {
            return Err(IndexError::DuplicateId(chunk_id));
        }
        self.positions.insert(chunk_id.clone(), self.ids.len());
        self.ids.push(chunk_id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    /// The `min(k, len)` entries with the highest dot product against
    /// `query`.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if query.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, actual: query.dimension() });
        }
        let q = query.as_slice();
        let mut scored: Vec<(f64, usize)> = (0..self.len()).map(|i| (dot(q, self.vector(i)), i)).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| hit_order(a.0, &self.ids[a.1], b.0, &self.ids[b.1]);
        let k = k.min(scored.len());
        if k < scored.len() && k > 0 {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(score, i)| SearchHit { chunk_id: self.ids[i].clone(), score })
            .collect())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.ids.iter().map(|id| 2 + id.len() + 4 * self.dimension).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (i, id) in self.ids.iter().enumerate() {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for v in self.vector(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "truncated header")? != MAGIC {
            return Err(IndexError::Corrupt { offset: 0, reason: "bad magic" });
        }
        let version_at = r.pos;
        if r.take(1, "truncated header")?[0] != VERSION {
            return Err(IndexError::Corrupt { offset: version_at, reason: "unsupported version" });
        }
        let dimension = r.u32("truncated header")? as usize;
        if dimension == 0 {
            return Err(IndexError::ZeroDimension);
        }
        let count = r.u64("truncated header")?;
        let mut index = Self::new(dimension)?;
        let mut row = Vec::with_capacity(dimension);
        for _ in 0..count {
            let id_at = r.pos;
            let id_len = r.u16("truncated entry")? as usize;
            let id = core::str::from_utf8(r.take(id_len, "truncated entry id")?)
                .map_err(|_| IndexError::Corrupt { offset: id_at + 2, reason: "chunk id is not UTF-8" })?;
            row.clear();
            let vec_at = r.pos;
            let raw = r.take(4 * dimension, "truncated entry vector")?;
            for b in raw.chunks_exact(4) {
                let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                if !v.is_finite() {
                    return Err(IndexError::Corrupt { offset: vec_at, reason: "non-finite component" });
                }
                row.push(v);
            }
            index.add_raw(String::from(id), &row).map_err(|e| match e {
                IndexError::DuplicateId(_) => IndexError::Corrupt { offset: id_at, reason: "duplicate chunk id" },
                other => other,
            })?;
        }
        if r.pos != bytes.len() {
            return Err(IndexError::Corrupt { offset: r.pos, reason: "trailing bytes" });
        }
        Ok(index)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, reason: &'static str) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(IndexError::Corrupt { offset: self.bytes.len(), reason }),
        }
    }

    fn u16(&mut self, reason: &'static str) -> Result<u16, IndexError> {
        let b = self.take(2, reason)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, reason: &'static str) -> Result<u32, IndexError> {
        let b = self.take(4, reason)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, reason: &'static str) -> Result<u64, IndexError> {
        let b = self.take(8, reason)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(values: &[f32]) -> EmbeddingVector {
        EmbeddingVector::normalized(values.to_vec()).unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> EmbeddingVector {
        let v: Vec<f32> = (0..d).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        EmbeddingVector::normalized(v).unwrap()
    }

    /// Full scan, f64 dot products, sort by the documented order.
    fn brute_force(entries: &[(String, EmbeddingVector)], q: &EmbeddingVector, k: usize) -> Vec<String> {
        let mut all: Vec<(f64, &str)> = entries
            .iter()
            .map(|(id, v)| {
                let s: f64 = v.as_slice().iter().zip(q.as_slice()).map(|(a, b)| *a as f64 * *b as f64).sum();
                (s, id.as_str())
            })
            .collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        all.into_iter().take(k).map(|(_, id)| String::from(id)).collect()
    }

    #[test]
    fn add_counts_and_rejects() {
        let mut idx = VectorIndex::new(3).unwrap();
        idx.add("a", &unit(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.add("a", &unit(&[0.0, 1.0, 0.0])), Err(IndexError::DuplicateId("a".into())));
        assert_eq!(idx.len(), 1);
        assert_eq!(
            idx.add("b", &unit(&[1.0, 0.0])),
            Err(IndexError::DimensionMismatch { expected: 3, actual: 2 })
        );
        assert_eq!(VectorIndex::new(0), Err(IndexError::ZeroDimension));
    }

    #[test]
    fn self_and_orthogonal_similarity() {
        let mut idx = VectorIndex::new(2).unwrap();
        let v = unit(&[0.6, 0.8]);
        idx.add("v", &v).unwrap();
        let hits = idx.search(&v, 1).unwrap();
        assert_eq!(hits[0].chunk_id, "v");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
        let hits = idx.search(&unit(&[-0.8, 0.6]), 1).unwrap();
        assert!(hits[0].score.abs() < 1e-6);
    }

    #[test]
    fn empty_index_and_bad_queries() {
        let idx = VectorIndex::new(2).unwrap();
        assert!(idx.search(&unit(&[1.0, 0.0]), 3).unwrap().is_empty());
        assert_eq!(idx.search(&unit(&[1.0, 0.0]), 0), Err(IndexError::ZeroK));
        assert!(matches!(idx.search(&unit(&[1.0, 0.0, 0.0]), 1), Err(IndexError::DimensionMismatch { .. })));
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let mut idx = VectorIndex::new(2).unwrap();
        let v = unit(&[1.0, 0.0]);
        for id in ["c", "a", "b"] {
            idx.add(id, &v).unwrap();
        }
        let ids: Vec<_> = idx.search(&v, 3).unwrap().into_iter().map(|h| h.chunk_id).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn seeded_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let entries: Vec<_> = (0..1000).map(|i| (format!("c{i:04}"), random_unit(&mut rng, 32))).collect();
        let mut idx = VectorIndex::new(32).unwrap();
        for (id, v) in &entries {
            idx.add(id.clone(), v).unwrap();
        }
        for _ in 0..100 {
            let q = random_unit(&mut rng, 32);
            let got: Vec<_> = idx.search(&q, 10).unwrap().into_iter().map(|h| h.chunk_id).collect();
            assert_eq!(got, brute_force(&entries, &q, 10));
        }
    }

    #[test]
    fn roundtrip_bytes() {
        let empty = VectorIndex::new(4).unwrap();
        assert_eq!(VectorIndex::from_bytes(&empty.to_bytes()).unwrap(), empty);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut idx = VectorIndex::new(8).unwrap();
        for i in 0..100 {
            idx.add(format!("d{i}#0"), &random_unit(&mut rng, 8)).unwrap();
        }
        let bytes = idx.to_bytes();
        assert_eq!(bytes.len(), idx.encoded_len());
        let back = VectorIndex::from_bytes(&bytes).unwrap();
        for _ in 0..10 {
            let q = random_unit(&mut rng, 8);
            assert_eq!(idx.search(&q, 7).unwrap(), back.search(&q, 7).unwrap());
        }
    }

    #[test]
    fn header_layout() {
        let mut idx = VectorIndex::new(2).unwrap();
        idx.add("ab", &unit(&[1.0, 0.0])).unwrap();
        let b = idx.to_bytes();
        assert_eq!(&b[..4], b"NYIX");
        assert_eq!(b[4], 1);
        assert_eq!(&b[5..9], &2u32.to_le_bytes());
        assert_eq!(&b[9..17], &1u64.to_le_bytes());
        assert_eq!(&b[17..19], &2u16.to_le_bytes());
        assert_eq!(&b[19..21], b"ab");
        assert_eq!(&b[21..25], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 29);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let mut idx = VectorIndex::new(2).unwrap();
        idx.add("ab", &unit(&[1.0, 0.0])).unwrap();
        let good = idx.to_bytes();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert_eq!(VectorIndex::from_bytes(&bad_magic), Err(IndexError::Corrupt { offset: 0, reason: "bad magic" }));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(VectorIndex::from_bytes(&bad_version), Err(IndexError::Corrupt { offset: 4, .. })));

        let mut zero_dim = good.clone();
        zero_dim[5..9].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(VectorIndex::from_bytes(&zero_dim), Err(IndexError::ZeroDimension));

        let truncated = &good[..good.len() - 3];
        assert_eq!(
            VectorIndex::from_bytes(truncated),
            Err(IndexError::Corrupt { offset: truncated.len(), reason: "truncated entry vector" })
        );

        let mut trailing = good.clone();
        trailing.push(0);
        assert_eq!(
            VectorIndex::from_bytes(&trailing),
            Err(IndexError::Corrupt { offset: good.len(), reason: "trailing bytes" })
        );
        assert!(VectorIndex::from_bytes(&[]).is_err());
        assert!(VectorIndex::from_bytes(&[0u8; 3]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn smaller_k_is_prefix(seed in any::<u64>(), n in 1usize..200, k1 in 1usize..50, extra in 1usize..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = VectorIndex::new(6).unwrap();
            for i in 0..n {
                idx.add(format!("x{i}"), &random_unit(&mut rng, 6)).unwrap();
            }
            let q = random_unit(&mut rng, 6);
            let a = idx.search(&q, k1).unwrap();
            let b = idx.search(&q, k1 + extra).unwrap();
            prop_assert_eq!(&b[..a.len()], &a[..]);
            prop_assert!(b.iter().all(|h| h.score >= -1.0 - 1e-6 && h.score <= 1.0 + 1e-6));
        }

        #[test]
        fn any_prefix_truncation_is_corrupt(seed in any::<u64>(), cut in 0usize..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = VectorIndex::new(4).unwrap();
            for i in 0..5 {
                idx.add(format!("e{i}"), &random_unit(&mut rng, 4)).unwrap();
            }
            let bytes = idx.to_bytes();
            let cut = cut % bytes.len();
            let is_corrupt = matches!(VectorIndex::from_bytes(&bytes[..cut]), Err(IndexError::Corrupt { .. }));
            prop_assert!(is_corrupt);
        }
    }
}
