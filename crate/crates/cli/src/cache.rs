//! On-disk cache of FEM fundamental frequencies.
//!
//! Entries live under `<root>/<model digest>/<row digest>`, where the model
//! digest covers everything that affects the solve and the row digest is
//! taken over the exact bits of the input point. Each file stores the
//! frequency bits and a digest of them; a file whose digest does not match
//! is reported as corrupt and recomputed. Writes go through a temporary
//! file and a rename, so readers never see partial entries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;

use crate::config::hex_digest;

#[derive(Debug)]
pub struct FemCache {
    dir: Option<PathBuf>,
    pub hits: AtomicUsize,
    pub misses: AtomicUsize,
    pub corrupt: AtomicUsize,
}

impl FemCache {
    /// A cache rooted at `root` for one model; `None` disables caching.
    pub fn new(root: Option<&Path>, model_digest: &str) -> std::io::Result<Self> {
        let dir = match root {
            Some(r) => {
                let d = r.join(model_digest);
                fs::create_dir_all(&d)?;
                Some(d)
            }
            None => None,
        };
        Ok(FemCache { dir, hits: AtomicUsize::new(0), misses: AtomicUsize::new(0), corrupt: AtomicUsize::new(0) })
    }

    fn key(x: &[f64]) -> String {
        let bytes: Vec<u8> = x.iter().flat_map(|v| v.to_le_bytes()).collect();
        hex_digest(&bytes)
    }

    fn read(path: &Path) -> Option<Result<f64, ()>> {
        let text = fs::read_to_string(path).ok()?;
        let mut parts = text.split_whitespace();
        let (Some(bits), Some(check), None) = (parts.next(), parts.next(), parts.next()) else {
            return Some(Err(()));
        };
        if hex_digest(bits.as_bytes()) != check {
            return Some(Err(()));
        }
        Some(u64::from_str_radix(bits, 16).map(f64::from_bits).map_err(|_| ()))
    }

    fn write(path: &Path, value: f64) -> std::io::Result<()> {
        let bits = format!("{:016x}", value.to_bits());
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            writeln!(f, "{bits} {}", hex_digest(bits.as_bytes()))?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)
    }

    /// Cached value for `x`, computing and storing it on a miss.
    pub fn get_or_compute<E>(&self, x: &[f64], compute: impl FnOnce() -> Result<f64, E>) -> Result<f64, E> {
        let Some(dir) = &self.dir else {
            self.misses.fetch_add(1, Ordering::Relaxed);
            return compute();
        };
        let path = dir.join(Self::key(x));
        match Self::read(&path) {
            Some(Ok(v)) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(v);
            }
            Some(Err(())) => {
                warn!("corrupt cache entry {}; recomputing", path.display());
                self.corrupt.fetch_add(1, Ordering::Relaxed);
            }
            None => {}
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = compute()?;
        if let Err(e) = Self::write(&path, v) {
            warn!("cannot write cache entry {}: {e}", path.display());
        }
        Ok(v)
    }
}
