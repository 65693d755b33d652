use std::collections::HashMap;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{check_query, dot, top_k, AnnError, BlockKey, SearchHit};
use crate::ingest::DocId;

pub const FLAT_MAGIC: &[u8; 8] = b"CAFLAT32";
pub const FLAT_VERSION: u32 = 1;

/// Exact inner-product search over full-precision vectors.
#[derive(Debug, Clone, Default)]
pub struct FlatIndex {
    dim: usize,
    keys: Vec<BlockKey>,
    data: Vec<f32>,
    positions: HashMap<BlockKey, usize>,
}

impl FlatIndex {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn build(keys: Vec<BlockKey>, vectors: &[Vec<f32>]) -> Result<Self, AnnError> {
        if keys.len() != vectors.len() {
            return Err(AnnError::Validation(format!("{} keys for {} vectors", keys.len(), vectors.len())));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let mut index = Self::new(dim);
        for (key, v) in keys.into_iter().zip(vectors) {
            index.add(key, v)?;
        }
        Ok(index)
    }

    pub fn add(&mut self, key: BlockKey, vector: &[f32]) -> Result<(), AnnError> {
        if vector.len() != self.dim {
            return Err(AnnError::Dimension { expected: self.dim, got: vector.len() });
        }
        if self.positions.contains_key(&key) {
            return Err(AnnError::DuplicateKey(key));
        }
        self.positions.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[BlockKey] {
        &self.keys
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, key: &BlockKey) -> Option<&[f32]> {
        self.positions.get(key).map(|&i| self.row(i))
    }

    /// Exact inner product of `query` with the stored vector for `key`.
    pub fn score(&self, key: &BlockKey, query: &[f32]) -> Option<f64> {
        self.vector(key).map(|v| dot(v, query))
    }

    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, AnnError> {
        check_query(query, self.dim, k)?;
        let hits = (0..self.len())
            .map(|i| SearchHit { key: self.keys[i].clone(), score: dot(self.row(i), query) })
            .collect();
        Ok(top_k(hits, k))
    }

    /// Full-precision rows in insertion order.
    pub fn rows(&self) -> impl Iterator<Item = (&BlockKey, &[f32])> {
        self.keys.iter().enumerate().map(|(i, k)| (k, self.row(i)))
    }

    /// Little-endian: magic, version u32, dim u32, N u64, N keys
    /// (u32 length, UTF-8 doc id, u32 block index), then N·dim f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::with_capacity(24 + self.data.len() * 4);
        w.extend_from_slice(FLAT_MAGIC);
        w.write_u32::<LE>(FLAT_VERSION).unwrap();
        w.write_u32::<LE>(self.dim as u32).unwrap();
        w.write_u64::<LE>(self.len() as u64).unwrap();
        for key in &self.keys {
            w.write_u32::<LE>(key.doc_id.0.len() as u32).unwrap();
            w.extend_from_slice(key.doc_id.0.as_bytes());
            w.write_u32::<LE>(key.block_index).unwrap();
        }
        for &x in &self.data {
            w.write_f32::<LE>(x).unwrap();
        }
        w
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, AnnError> {
        let bad = |reason: String| AnnError::Format { path: path.to_path_buf(), reason };
        let eof = |e: std::io::Error| bad(format!("truncated: {e}"));
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(eof)?;
        if &magic != FLAT_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = r.read_u32::<LE>().map_err(eof)?;
        if version != FLAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LE>().map_err(eof)? as usize;
        let n = r.read_u64::<LE>().map_err(eof)? as usize;
        if (n as u64).saturating_mul(8) > bytes.len() as u64 {
            return Err(bad("truncated body".into()));
        }
        let mut keys = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.read_u32::<LE>().map_err(eof)? as usize;
            if len as u64 > bytes.len() as u64 - r.position() {
                return Err(bad("truncated key".into()));
            }
            let mut id = vec![0u8; len];
            r.read_exact(&mut id).map_err(eof)?;
            let id = String::from_utf8(id).map_err(|_| bad("doc id is not UTF-8".into()))?;
            let block = r.read_u32::<LE>().map_err(eof)?;
            keys.push(BlockKey { doc_id: DocId(id), block_index: block });
        }
        let remaining = bytes.len() as u64 - r.position();
        if remaining != (n * dim * 4) as u64 {
            return Err(bad(format!("expected {} vector bytes, found {remaining}", n * dim * 4)));
        }
        let mut data = vec![0f32; n * dim];
        r.read_f32_into::<LE>(&mut data).map_err(eof)?;
        let mut index = Self::new(dim);
        for (i, key) in keys.into_iter().enumerate() {
            index.add(key, &data[i * dim..(i + 1) * dim]).map_err(|e| bad(e.to_string()))?;
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnError> {
        crate::providers::cache::write_atomic(path, &self.to_bytes())
            .map_err(|source| AnnError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, AnnError> {
        let bytes = std::fs::read(path).map_err(|source| AnnError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis() -> FlatIndex {
        let keys = (0..3).map(|i| BlockKey::new("d", i)).collect();
        let vs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        FlatIndex::build(keys, &vs).unwrap()
    }

    #[test]
    fn orthonormal_query() {
        let hits = basis().search(&[1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(hits[0].key, BlockKey::new("d", 0));
        assert_eq!(hits[0].score, 1.0);
    }

    #[test]
    fn antipodal_query_scores_minus_one() {
        let hits = basis().search(&[-1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(hits.last().unwrap().key, BlockKey::new("d", 0));
        assert_eq!(hits.last().unwrap().score, -1.0);
    }

    #[test]
    fn bytes_round_trip() {
        let idx = basis();
        let path = Path::new("flat.bin");
        let back = FlatIndex::from_bytes(&idx.to_bytes(), path).unwrap();
        assert_eq!(back.keys(), idx.keys());
        assert_eq!(back.row(2), idx.row(2));
        let bytes = idx.to_bytes();
        assert!(FlatIndex::from_bytes(&bytes[..bytes.len() - 1], path).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(FlatIndex::from_bytes(&extra, path).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let mut idx = basis();
        assert!(matches!(idx.add(BlockKey::new("e", 0), &[1.0]), Err(AnnError::Dimension { .. })));
        assert!(matches!(idx.add(BlockKey::new("d", 0), &[1.0, 0.0, 0.0]), Err(AnnError::DuplicateKey(_))));
        assert!(idx.search(&[1.0, 0.0, 0.0], 0).is_err());
        assert_eq!(idx.search(&[1.0, 0.0, 0.0], 10).unwrap().len(), 3);
    }
}
