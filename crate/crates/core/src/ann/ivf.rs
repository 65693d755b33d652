use std::collections::HashSet;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::kmeans::{self, KMeansParams};
use super::sq8::Quantizer;
use super::{check_query, sq_dist, top_k, AnnError, BlockKey, SearchHit};
use crate::ingest::DocId;

pub const IVF_MAGIC: &[u8; 8] = b"CAIVFSQ8";
pub const IVF_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvfParams {
    /// Defaults to `max(1, round(sqrt(N)))`.
    pub nlist: Option<usize>,
    /// Defaults to `min(nlist, max(8, nlist / 8))`.
    pub nprobe: Option<usize>,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f32,
}

impl Default for IvfParams {
    fn default() -> Self {
        Self { nlist: None, nprobe: None, seed: 0, max_iter: 25, tol: 1e-4 }
    }
}

impl IvfParams {
    pub fn default_nlist(n: usize) -> usize {
        ((n as f64).sqrt().round() as usize).max(1)
    }

    pub fn default_nprobe(nlist: usize) -> usize {
        (nlist / 8).max(8).min(nlist)
    }
}

/// Inverted-file index with 8-bit scalar-quantized rows. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct IvfSq8Index {
    dim: usize,
    nprobe: usize,
    seed: u64,
    centroids: Vec<f32>,
    quantizer: Quantizer,
    keys: Vec<BlockKey>,
    postings: Vec<Vec<u32>>,
    codes: Vec<u8>,
}

impl IvfSq8Index {
    pub fn build(keys: Vec<BlockKey>, vectors: &[Vec<f32>], params: IvfParams) -> Result<Self, AnnError> {
        let dim = vectors.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for v in vectors {
            if v.len() != dim {
                return Err(AnnError::Dimension { expected: dim, got: v.len() });
            }
            data.extend_from_slice(v);
        }
        Self::build_from_rows(keys, data, dim, params)
    }

    /// Builds from row-major `data` of shape `keys.len() × dim`.
    pub fn build_from_rows(keys: Vec<BlockKey>, data: Vec<f32>, dim: usize, params: IvfParams) -> Result<Self, AnnError> {
        let n = keys.len();
        if n == 0 || dim == 0 {
            return Err(AnnError::Validation("cannot index an empty corpus".into()));
        }
        if data.len() != n * dim {
            return Err(AnnError::Validation(format!("{} values for {n} rows of dimension {dim}", data.len())));
        }
        let mut seen = HashSet::with_capacity(n);
        for key in &keys {
            if !seen.insert(key) {
                return Err(AnnError::DuplicateKey(key.clone()));
            }
        }
        let nlist = params.nlist.unwrap_or_else(|| IvfParams::default_nlist(n));
        if nlist == 0 || n < nlist {
            return Err(AnnError::Validation(format!("need 1 <= nlist <= N, got nlist = {nlist}, N = {n}")));
        }
        let nprobe = params.nprobe.unwrap_or_else(|| IvfParams::default_nprobe(nlist));
        if nprobe == 0 || nprobe > nlist {
            return Err(AnnError::Validation(format!("need 1 <= nprobe <= nlist, got {nprobe}")));
        }

        let km = kmeans::fit(
            &data,
            dim,
            KMeansParams { k: nlist, max_iter: params.max_iter, tol: params.tol, seed: params.seed },
        );
        let mut postings = vec![Vec::new(); nlist];
        for (row, &c) in km.assignments.iter().enumerate() {
            postings[c as usize].push(row as u32);
        }
        let quantizer = Quantizer::fit(&data, dim);
        let codes = data.chunks_exact(dim).flat_map(|row| quantizer.encode(row)).collect();
        Ok(Self { dim, nprobe, seed: params.seed, centroids: km.centroids, quantizer, keys, postings, codes })
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

    pub fn nlist(&self) -> usize {
        self.postings.len()
    }

    pub fn default_nprobe(&self) -> usize {
        self.nprobe
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn keys(&self) -> &[BlockKey] {
        &self.keys
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn postings(&self) -> &[Vec<u32>] {
        &self.postings
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn codes(&self, row: usize) -> &[u8] {
        &self.codes[row * self.dim..(row + 1) * self.dim]
    }

    pub fn decoded(&self, row: usize) -> Vec<f64> {
        self.quantizer.decode(self.codes(row))
    }

    fn hit(&self, row: usize, query: &[f32]) -> SearchHit {
        SearchHit { key: self.keys[row].clone(), score: self.quantizer.decoded_dot(query, self.codes(row)) }
    }

    /// Lists to scan for `query`, nearest centroid first (ties by list id).
    pub fn probe_order(&self, query: &[f32]) -> Vec<usize> {
        let mut order: Vec<(f32, usize)> = self
            .centroids
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(c, centroid)| (sq_dist(query, centroid), c))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, c)| c).collect()
    }

    pub fn search(&self, query: &[f32], k: usize, nprobe: usize) -> Result<Vec<SearchHit>, AnnError> {
        check_query(query, self.dim, k)?;
        if nprobe == 0 || nprobe > self.nlist() {
            return Err(AnnError::Validation(format!("need 1 <= nprobe <= {}, got {nprobe}", self.nlist())));
        }
        let hits = self.probe_order(query)[..nprobe]
            .iter()
            .flat_map(|&c| self.postings[c].iter())
            .map(|&row| self.hit(row as usize, query))
            .collect();
        Ok(top_k(hits, k))
    }

    /// Search with the index's default `nprobe`.
    pub fn search_default(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, AnnError> {
        self.search(query, k, self.nprobe)
    }

    /// Scores every row on its decoded vector, ignoring the coarse partition.
    pub fn search_exhaustive(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, AnnError> {
        check_query(query, self.dim, k)?;
        Ok(top_k((0..self.len()).map(|row| self.hit(row, query)).collect(), k))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + self.codes.len() + self.centroids.len() * 4);
        out.extend_from_slice(IVF_MAGIC);
        let w = &mut out;
        w.write_u32::<LE>(IVF_VERSION).unwrap();
        w.write_u32::<LE>(self.dim as u32).unwrap();
        w.write_u32::<LE>(self.nlist() as u32).unwrap();
        w.write_u64::<LE>(self.len() as u64).unwrap();
        w.write_u32::<LE>(self.nprobe as u32).unwrap();
        w.write_u64::<LE>(self.seed).unwrap();
        for &x in self.centroids.iter().chain(&self.quantizer.min).chain(&self.quantizer.max) {
            w.write_f32::<LE>(x).unwrap();
        }
        for key in &self.keys {
            w.write_u32::<LE>(key.doc_id.0.len() as u32).unwrap();
            w.extend_from_slice(key.doc_id.0.as_bytes());
            w.write_u32::<LE>(key.block_index).unwrap();
        }
        for list in &self.postings {
            w.write_u32::<LE>(list.len() as u32).unwrap();
            for &row in list {
                w.write_u32::<LE>(row).unwrap();
            }
        }
        w.extend_from_slice(&self.codes);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, AnnError> {
        let bad = |reason: String| AnnError::Format { path: path.to_path_buf(), reason };
        let eof = |e: std::io::Error| bad(format!("truncated: {e}"));
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(eof)?;
        if &magic != IVF_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = r.read_u32::<LE>().map_err(eof)?;
        if version != IVF_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LE>().map_err(eof)? as usize;
        let nlist = r.read_u32::<LE>().map_err(eof)? as usize;
        let n = r.read_u64::<LE>().map_err(eof)? as usize;
        let nprobe = r.read_u32::<LE>().map_err(eof)? as usize;
        let seed = r.read_u64::<LE>().map_err(eof)?;
        if dim == 0 || nlist == 0 || n < nlist || nprobe == 0 || nprobe > nlist {
            return Err(bad(format!("inconsistent header: dim {dim}, nlist {nlist}, N {n}, nprobe {nprobe}")));
        }
        let remaining = bytes.len() as u64 - r.position();
        if ((nlist + 2) * dim * 4 + n * (8 + dim)) as u64 > remaining {
            return Err(bad("truncated body".into()));
        }
        let mut floats = |count: usize| -> Result<Vec<f32>, AnnError> {
            let mut v = vec![0f32; count];
            r.read_f32_into::<LE>(&mut v).map_err(eof)?;
            Ok(v)
        };
        let centroids = floats(nlist * dim)?;
        let min = floats(dim)?;
        let max = floats(dim)?;
        let mut keys = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.read_u32::<LE>().map_err(eof)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(eof)?;
            let doc = String::from_utf8(buf).map_err(|_| bad("block key is not UTF-8".into()))?;
            keys.push(BlockKey { doc_id: DocId(doc), block_index: r.read_u32::<LE>().map_err(eof)? });
        }
        let mut postings = Vec::with_capacity(nlist);
        let mut seen = vec![false; n];
        for _ in 0..nlist {
            let count = r.read_u32::<LE>().map_err(eof)? as usize;
            let mut list = Vec::with_capacity(count.min(n));
            for _ in 0..count {
                let row = r.read_u32::<LE>().map_err(eof)?;
                if row as usize >= n || std::mem::replace(&mut seen[row as usize], true) {
                    return Err(bad(format!("posting row {row} out of range or repeated")));
                }
                list.push(row);
            }
            postings.push(list);
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("a row is missing from every posting list".into()));
        }
        let mut codes = vec![0u8; n * dim];
        r.read_exact(&mut codes).map_err(eof)?;
        if r.position() != bytes.len() as u64 {
            return Err(bad("trailing bytes after codes".into()));
        }
        Ok(Self { dim, nprobe, seed, centroids, quantizer: Quantizer { min, max }, keys, postings, codes })
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
