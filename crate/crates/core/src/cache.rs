//! Content-addressed disk cache for increment Gram matrices.
//!
//! Layout: `<dir>/gram/<hash>.bin` (f64 little-endian, row-major) with a
//! JSON sidecar `<hash>.json` echoing the parameters. Writes go to a
//! temporary file first and are renamed into place.

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug)]
pub struct GramCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

impl GramCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        GramCache {
            dir: dir.into(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn key(kernel_token: &str, t: f64, n: usize, rel_tol: f64, abs_tol: f64) -> String {
        let mut hasher = Sha256::new();
        hasher.update(kernel_token.as_bytes());
        hasher
            .update(format!("|t={t:.17e}|n={n}|rel={rel_tol:.17e}|abs={abs_tol:.17e}").as_bytes());
        let digest = hasher.finalize();
        let mut key = String::with_capacity(16);
        for b in digest.iter().take(8) {
            key.push_str(&format!("{b:02x}"));
        }
        key
    }

    fn bin_path(&self, key: &str) -> PathBuf {
        self.dir.join("gram").join(format!("{key}.bin"))
    }

    fn json_path(&self, key: &str) -> PathBuf {
        self.dir.join("gram").join(format!("{key}.json"))
    }

    /// Returns the cached matrix if present and of the right size.
    /// IO or shape problems count as a miss.
    pub(crate) fn load(&self, key: &str, n: usize) -> Option<DMatrix<f64>> {
        let result = (|| -> std::io::Result<Option<DMatrix<f64>>> {
            let mut file = match fs::File::open(self.bin_path(key)) {
                Ok(f) => f,
                Err(_) => return Ok(None),
            };
            let mut bytes = Vec::new();
            file.read_to_end(&mut bytes)?;
            if bytes.len() != n * n * 8 {
                return Ok(None);
            }
            let mut data = Vec::with_capacity(n * n);
            for chunk in bytes.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
            Ok(Some(DMatrix::from_row_slice(n, n, &data)))
        })();
        match result {
            Ok(Some(m)) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(m)
            }
            _ => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    /// Best-effort store; failures are ignored (the matrix is simply
    /// recomputed next time).
    pub(crate) fn store(&self, key: &str, sidecar: &serde_json::Value, matrix: &DMatrix<f64>) {
        let _ = (|| -> std::io::Result<()> {
            let dir = self.dir.join("gram");
            fs::create_dir_all(&dir)?;
            let n = matrix.nrows();
            let mut bytes = Vec::with_capacity(n * n * 8);
            for i in 0..n {
                for j in 0..n {
                    bytes.extend_from_slice(&matrix[(i, j)].to_le_bytes());
                }
            }
            let tmp_bin = dir.join(format!("{key}.bin.tmp"));
            {
                let mut f = fs::File::create(&tmp_bin)?;
                f.write_all(&bytes)?;
                f.sync_all()?;
            }
            fs::rename(&tmp_bin, self.bin_path(key))?;

            let tmp_json = dir.join(format!("{key}.json.tmp"));
            {
                let mut f = fs::File::create(&tmp_json)?;
                f.write_all(serde_json::to_string_pretty(sidecar).unwrap().as_bytes())?;
                f.sync_all()?;
            }
            fs::rename(&tmp_json, self.json_path(key))?;
            Ok(())
        })();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = GramCache::new(tmp.path());
        let m = DMatrix::from_fn(5, 5, |i, j| {
            1.0 / (1.0 + i as f64 + j as f64) + 1e-17 * i as f64
        });
        let key = GramCache::key("piecewise:test", 1.0, 5, 1e-8, 1e-12);
        assert!(cache.load(&key, 5).is_none());
        cache.store(&key, &serde_json::json!({"n": 5}), &m);
        let back = cache.load(&key, 5).expect("cached");
        assert_eq!(m, back);
        assert_eq!(cache.stats(), CacheStats { hits: 1, misses: 1 });
        // sidecar exists
        assert!(tmp.path().join("gram").join(format!("{key}.json")).exists());
    }

    #[test]
    fn key_depends_on_all_parameters() {
        let k0 = GramCache::key("a", 1.0, 8, 1e-8, 1e-12);
        assert_ne!(k0, GramCache::key("b", 1.0, 8, 1e-8, 1e-12));
        assert_ne!(k0, GramCache::key("a", 2.0, 8, 1e-8, 1e-12));
        assert_ne!(k0, GramCache::key("a", 1.0, 9, 1e-8, 1e-12));
        assert_ne!(k0, GramCache::key("a", 1.0, 8, 1e-9, 1e-12));
        assert_ne!(k0, GramCache::key("a", 1.0, 8, 1e-8, 1e-13));
        assert_eq!(k0, GramCache::key("a", 1.0, 8, 1e-8, 1e-12));
    }

    #[test]
    fn wrong_size_is_a_miss() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = GramCache::new(tmp.path());
        let m = DMatrix::from_element(3, 3, 1.0);
        let key = GramCache::key("t", 1.0, 3, 1e-8, 1e-12);
        cache.store(&key, &serde_json::json!({}), &m);
        assert!(cache.load(&key, 4).is_none());
    }
}
