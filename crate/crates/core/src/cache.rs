//! Binary files for the expensive model tables and for solved policies.
//!
//! Every file starts with an 8-byte magic, a little-endian `u32` format
//! version, the 64-character hex hash of the settings that produced it and a
//! length-prefixed free-form tag (tool version, run configuration). Tables follow in row-major order, all integers and floats little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::belief::KnownPoseBranches;
use crate::quantization::KernelMatrix;
use crate::solver::{Policy, PolicyMeta, ValueFunction};

pub const TABLES_MAGIC: [u8; 8] = *b"ASLMTBL\0";
pub const POLICY_MAGIC: [u8; 8] = *b"ASLMPOL\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a cache file of the expected kind")]
    BadMagic,
    #[error("cache format version {found}, expected {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("cache built for settings {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("cache file is truncated or corrupt: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, CacheError>;

#[derive(Default)]
struct Encoder(Vec<u8>);

impl Encoder {
    fn header(magic: [u8; 8], hash: &str, tag: &str) -> Self {
        let mut e = Self::default();
        e.0.extend_from_slice(&magic);
        e.u32(FORMAT_VERSION);
        let mut h = [b'0'; 64];
        let src = hash.as_bytes();
        h[..src.len().min(64)].copy_from_slice(&src[..src.len().min(64)]);
        e.0.extend_from_slice(&h);
        e.u64(tag.len());
        e.0.extend_from_slice(tag.as_bytes());
        e
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len());
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn kernel(&mut self, k: &KernelMatrix) {
        self.u64(k.n_states());
        self.u64(k.n_actions());
        self.u64(k.n_cols());
        self.f64s(k.data());
    }

    fn write(self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("partial");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.0)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn open(buf: &'a [u8], magic: [u8; 8]) -> Result<(Self, String, String)> {
        if buf.len() < 84 || buf[..8] != magic {
            return Err(CacheError::BadMagic);
        }
        let mut d = Self { buf, pos: 8 };
        let found = d.u32()?;
        if found != FORMAT_VERSION {
            return Err(CacheError::Version { found });
        }
        let hash = d.text(64)?;
        let n = d.u64()?;
        let tag = d.text(n)?;
        Ok((d, hash, tag))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| CacheError::Corrupt(format!("need {n} bytes at offset {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn text(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CacheError::Corrupt("header text is not utf-8".into()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| CacheError::Corrupt(format!("length {v} does not fit in memory")))
    }

    fn array<T>(&mut self, width: usize, f: impl Fn(&[u8]) -> T) -> Result<Vec<T>> {
        let n = self.u64()?;
        let bytes = self.take(n.checked_mul(width).ok_or_else(|| CacheError::Corrupt("array length overflows".into()))?)?;
        Ok(bytes.chunks_exact(width).map(f).collect())
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        self.array(8, |c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
    }

    fn kernel(&mut self) -> Result<KernelMatrix> {
        let (s, a, c) = (self.u64()?, self.u64()?, self.u64()?);
        let data = self.f64s()?;
        if s.checked_mul(a).and_then(|x| x.checked_mul(c)) != Some(data.len()) {
            return Err(CacheError::Corrupt(format!("kernel {s}x{a}x{c} with {} entries", data.len())));
        }
        KernelMatrix::from_parts(s, a, c, data).map_err(|e| CacheError::Corrupt(e.to_string()))
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(CacheError::Corrupt(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn check_hash(expected: &str, found: String) -> Result<()> {
    if found != expected {
        return Err(CacheError::HashMismatch { expected: expected.to_string(), found });
    }
    Ok(())
}

/// Observation kernel and known-pose belief branches of one model.
#[derive(Debug, Clone)]
pub struct ModelTables {
    pub tag: String,
    pub obs_kernel: KernelMatrix,
    pub branches: KnownPoseBranches,
}

pub fn write_tables(path: &Path, hash: &str, tag: &str, obs_kernel: &KernelMatrix, branches: &KnownPoseBranches) -> Result<()> {
    let mut e = Encoder::header(TABLES_MAGIC, hash, tag);
    e.kernel(obs_kernel);
    e.u64(branches.n_poses());
    e.u64(branches.n_beliefs());
    let (offsets, next, prob) = branches.parts();
    e.u64(offsets.len());
    for o in offsets {
        e.u64(*o);
    }
    e.u64(next.len());
    for j in next {
        e.u32(*j);
    }
    e.f64s(prob);
    e.write(path)
}

/// Reads tables written by [`write_tables`]; fails unless they were built
/// for `hash`.
pub fn read_tables(path: &Path, hash: &str) -> Result<ModelTables> {
    let buf = fs::read(path)?;
    let (mut d, found, tag) = Decoder::open(&buf, TABLES_MAGIC)?;
    check_hash(hash, found)?;
    let obs_kernel = d.kernel()?;
    let (n_poses, n_beliefs) = (d.u64()?, d.u64()?);
    let offsets = d.array(8, |c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize)?;
    let next = d.array(4, |c| u32::from_le_bytes(c.try_into().expect("4 bytes")))?;
    let prob = d.f64s()?;
    d.finish()?;
    let branches = KnownPoseBranches::from_parts(n_poses, n_beliefs, offsets, next, prob)
        .ok_or_else(|| CacheError::Corrupt("inconsistent branch table".into()))?;
    Ok(ModelTables { tag, obs_kernel, branches })
}

/// Stored policy, value table and the hash of the model they were solved on.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub hash: String,
    pub tag: String,
    pub policy: Policy,
    pub value: ValueFunction,
}

pub fn write_policy(path: &Path, hash: &str, tag: &str, policy: &Policy, value: &ValueFunction) -> Result<()> {
    let mut e = Encoder::header(POLICY_MAGIC, hash, tag);
    let meta = serde_json::to_vec(&policy.meta).expect("metadata serializes");
    e.u64(meta.len());
    e.0.extend_from_slice(&meta);
    e.u64(policy.actions.len());
    for a in &policy.actions {
        e.0.extend_from_slice(&a.to_le_bytes());
    }
    e.u64(value.n_poses);
    e.f64s(&value.values);
    e.write(path)
}

pub fn read_policy(path: &Path) -> Result<PolicyFile> {
    let buf = fs::read(path)?;
    let (mut d, hash, tag) = Decoder::open(&buf, POLICY_MAGIC)?;
    let n = d.u64()?;
    let meta: PolicyMeta = serde_json::from_slice(d.take(n)?).map_err(|e| CacheError::Corrupt(e.to_string()))?;
    let actions = d.array(2, |c| u16::from_le_bytes(c.try_into().expect("2 bytes")))?;
    let n_poses = d.u64()?;
    let values = d.f64s()?;
    d.finish()?;
    if values.len() != actions.len() {
        return Err(CacheError::Corrupt("value and action tables differ in length".into()));
    }
    let policy = Policy::new(meta, actions).map_err(|e| CacheError::Corrupt(e.to_string()))?;
    Ok(PolicyFile { hash, tag, policy, value: ValueFunction { n_poses, values } })
}
