//! Content-addressed embedding cache keyed by `(model_tag, sha256(text))`.
//!
//! On disk each vector lives at `<root>/<hh>/<key>.f32`, where `key` is the
//! hex SHA-256 of `model_tag || 0x00 || text` and `hh` its first two hex
//! digits. The file is a little-endian `u32` dimension followed by that many
//! `f32` values. Entries are never invalidated implicitly.

use std::collections::HashMap;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::ProviderError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(model_tag: &str, text: &str) -> Self {
        let mut h = Sha256::new();
        h.update(model_tag.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        CacheKey(hex::encode(h.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub trait VectorCache: Send + Sync {
    fn get(&self, key: &CacheKey) -> Option<Vec<f32>>;
    fn put(&self, key: &CacheKey, vector: &[f32]) -> Result<(), ProviderError>;
}

#[derive(Default)]
pub struct MemoryCache {
    map: RwLock<HashMap<CacheKey, Vec<f32>>>,
}

impl MemoryCache {
    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl VectorCache for MemoryCache {
    fn get(&self, key: &CacheKey) -> Option<Vec<f32>> {
        self.map.read().unwrap().get(key).cloned()
    }

    fn put(&self, key: &CacheKey, vector: &[f32]) -> Result<(), ProviderError> {
        self.map.write().unwrap().insert(key.clone(), vector.to_vec());
        Ok(())
    }
}

pub struct DiskCache {
    root: PathBuf,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.root.join(&key.0[..2]).join(format!("{}.f32", key.0))
    }
}

fn decode(bytes: &[u8]) -> Option<Vec<f32>> {
    let mut r = Cursor::new(bytes);
    let dim = r.read_u32::<LittleEndian>().ok()? as usize;
    if bytes.len() != 4 + dim * 4 {
        return None;
    }
    let mut v = vec![0f32; dim];
    r.read_f32_into::<LittleEndian>(&mut v).ok()?;
    Some(v)
}

impl VectorCache for DiskCache {
    fn get(&self, key: &CacheKey) -> Option<Vec<f32>> {
        let mut f = std::fs::File::open(self.path_for(key)).ok()?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf).ok()?;
        // A torn or foreign file is treated as a miss and overwritten on put.
        decode(&buf)
    }

    fn put(&self, key: &CacheKey, vector: &[f32]) -> Result<(), ProviderError> {
        let path = self.path_for(key);
        let mut buf = Vec::with_capacity(4 + vector.len() * 4);
        buf.write_u32::<LittleEndian>(vector.len() as u32).unwrap();
        for &x in vector {
            buf.write_f32::<LittleEndian>(x).unwrap();
        }
        write_atomic(&path, &buf).map_err(|e| ProviderError::Cache(format!("{}: {e}", path.display())))
    }
}

/// Writes `bytes` to a temp file beside `path`, then renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_separates_model_and_text() {
        assert_ne!(CacheKey::new("a", "bc"), CacheKey::new("ab", "c"));
        assert_eq!(CacheKey::new("m", "x"), CacheKey::new("m", "x"));
        assert_eq!(CacheKey::new("m", "x").as_str().len(), 64);
    }

    #[test]
    fn disk_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let key = CacheKey::new("m", "hello");
        assert!(cache.get(&key).is_none());
        let v = vec![0.1f32, -0.25, 1.0 / 3.0];
        cache.put(&key, &v).unwrap();
        assert_eq!(cache.get(&key).unwrap(), v);
    }

    #[test]
    fn torn_file_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let key = CacheKey::new("m", "hello");
        cache.put(&key, &[1.0, 2.0]).unwrap();
        let path = cache.path_for(&key);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(cache.get(&key).is_none());
    }
}
