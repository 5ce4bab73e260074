//! On-disk matrix cache.
//!
//! A file is one JSON header line, then `rows × cols` little-endian `f64`
//! in row-major order, then an 8-byte checksum: the first eight bytes of
//! the SHA-256 of everything before it, read as a little-endian `u64`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;

pub const FORMAT: &str = "covarlab-matrix-v1";
pub const ENV_DIR: &str = "COVARLAB_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub rows: usize,
    pub cols: usize,
    pub endianness: String,
    pub spacetime_hash: String,
    pub perturbation_hash: String,
    pub tag: String,
}

#[derive(Debug, PartialEq)]
pub enum DecodeError {
    Truncated,
    BadHeader(String),
    Checksum { stored: u64, computed: u64 },
}

pub fn sha_hex<T: Serialize>(v: &T) -> String {
    let text = serde_json::to_string(v).expect("serialisable key");
    hex(&Sha256::digest(text.as_bytes()))
}

fn checksum(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn encode(header: &Header, m: &DMatrix<f64>) -> Vec<u8> {
    assert_eq!((header.rows, header.cols), m.shape(), "header shape");
    let mut out = serde_json::to_vec(header).expect("header serialises");
    out.push(b'\n');
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    let c = checksum(&out);
    out.extend_from_slice(&c.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<(Header, DMatrix<f64>), DecodeError> {
    if bytes.len() < 8 {
        return Err(DecodeError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = checksum(body);
    if stored != computed {
        return Err(DecodeError::Checksum { stored, computed });
    }
    let nl = body.iter().position(|&b| b == b'\n').ok_or(DecodeError::Truncated)?;
    let header: Header =
        serde_json::from_slice(&body[..nl]).map_err(|e| DecodeError::BadHeader(e.to_string()))?;
    if header.format != FORMAT || header.endianness != "le" {
        return Err(DecodeError::BadHeader(format!("{} / {}", header.format, header.endianness)));
    }
    let payload = &body[nl + 1..];
    if payload.len() != 8 * header.rows * header.cols {
        return Err(DecodeError::Truncated);
    }
    let mut m = DMatrix::zeros(header.rows, header.cols);
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        m[(k / header.cols, k % header.cols)] = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    Ok((header, m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheEvent {
    Hit,
    Miss,
    /// The stored entry failed its checksum or header check and was rebuilt.
    Recomputed,
    Disabled,
}

#[derive(Clone, Debug)]
pub struct MatrixCache {
    pub dir: PathBuf,
}

impl MatrixCache {
    /// `COVARLAB_CACHE_DIR` when set, else `fallback`.
    pub fn locate(fallback: PathBuf) -> Self {
        let dir = std::env::var_os(ENV_DIR).map(PathBuf::from).unwrap_or(fallback);
        MatrixCache { dir }
    }

    pub fn path(&self, h: &Header) -> PathBuf {
        let key = sha_hex(&(&h.spacetime_hash, &h.perturbation_hash, &h.tag));
        self.dir.join(format!("{}.mat", &key[..32]))
    }

    pub fn load(&self, h: &Header) -> Result<Option<DMatrix<f64>>, DecodeError> {
        let Ok(bytes) = fs::read(self.path(h)) else { return Ok(None) };
        let (stored, m) = decode(&bytes)?;
        if stored != *h {
            return Err(DecodeError::BadHeader("key mismatch".into()));
        }
        Ok(Some(m))
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn store(&self, h: &Header, m: &DMatrix<f64>) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(h);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(h, m))?;
        f.sync_all()?;
        fs::rename(&tmp, &path)
    }

    pub fn get_or_compute<E>(
        &self,
        h: &Header,
        compute: impl FnOnce() -> Result<DMatrix<f64>, E>,
    ) -> Result<(DMatrix<f64>, CacheEvent), E> {
        let event = match self.load(h) {
            Ok(Some(m)) => return Ok((m, CacheEvent::Hit)),
            Ok(None) => CacheEvent::Miss,
            Err(_) => CacheEvent::Recomputed,
        };
        let m = compute()?;
        // A failed write only loses the cache entry.
        let _ = self.store(h, &m);
        Ok((m, event))
    }
}

pub fn header(spacetime_hash: String, perturbation_hash: String, tag: String, rows: usize, cols: usize) -> Header {
    Header {
        format: FORMAT.into(),
        rows,
        cols,
        endianness: "le".into(),
        spacetime_hash,
        perturbation_hash,
        tag,
    }
}
