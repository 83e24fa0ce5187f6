//! On-disk cache of orthonormal bases keyed by weight content.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use equilab_core::{build_basis, BergmanBasis, QuadratureGrid, WeightField};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult, StageExt};

/// Bumped whenever the basis construction changes its output.
const CACHE_FORMAT: &str = "equilab-basis-v1";

/// Content hash of the weight samples on `grid` together with `p` and the
/// grid dimensions. `-0.0` is identified with `0.0` and every NaN with one
/// canonical NaN; nothing else about the samples is normalized.
pub fn cache_key(phi: &[f64], p: usize, grid: &QuadratureGrid) -> String {
    let mut h = Sha256::new();
    h.update(CACHE_FORMAT.as_bytes());
    h.update((p as u64).to_le_bytes());
    h.update((grid.n_r() as u64).to_le_bytes());
    h.update((grid.n_theta() as u64).to_le_bytes());
    h.update((phi.len() as u64).to_le_bytes());
    for &v in phi {
        let v = if v == 0.0 {
            0.0
        } else if v.is_nan() {
            f64::NAN
        } else {
            v
        };
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug)]
pub struct BasisCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl BasisCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), hits: AtomicUsize::new(0), misses: AtomicUsize::new(0) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Loads the basis for `(w, p, grid)` or builds and stores it. Entries
    /// that fail to parse or describe another weight are rebuilt.
    pub fn basis(&self, w: &WeightField, p: usize, grid: &QuadratureGrid) -> LabResult<BergmanBasis> {
        let phi = w.sample_phi(grid).stage("weight")?;
        let key = cache_key(&phi, p, grid);
        let path = self.path(&key);
        let hash = equilab_core::envelope::field_hash(grid.dims(), &phi);
        if let Ok(text) = std::fs::read_to_string(&path) {
            match serde_json::from_str::<BergmanBasis>(&text) {
                Ok(b) if b.p == p && b.dims == grid.dims() && b.weight_hash == hash => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    log::debug!("basis cache hit {key}");
                    return Ok(b);
                }
                _ => log::warn!("discarding stale basis cache entry {}", path.display()),
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let basis = build_basis(p, w, grid).stage(&format!("bergman basis p={p}"))?;
        std::fs::create_dir_all(&self.dir).map_err(|e| LabError::io(&self.dir, e))?;
        let tmp = self.dir.join(format!("{key}.json.{}.tmp", std::process::id()));
        let text = serde_json::to_string(&basis).expect("bases serialize");
        std::fs::write(&tmp, text).map_err(|e| LabError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| LabError::io(&path, e))?;
        Ok(basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use equilab_core::build_grid;

    #[test]
    fn keys_track_content() {
        let g = build_grid(16, 16).unwrap();
        let phi = WeightField::fs().sample_phi(&g).unwrap();
        let k = cache_key(&phi, 3, &g);
        assert_eq!(k, cache_key(&phi, 3, &g));
        assert_ne!(k, cache_key(&phi, 4, &g));
        let mut moved = phi.clone();
        moved[5] += 1e-6;
        assert_ne!(k, cache_key(&moved, 3, &g));
        let g2 = build_grid(16, 24).unwrap();
        let phi2 = WeightField::fs().sample_phi(&g2).unwrap();
        assert_ne!(k, cache_key(&phi2, 3, &g2));
        let negative: Vec<f64> = phi.iter().map(|v| if *v == 0.0 { -0.0 } else { *v }).collect();
        assert_eq!(k, cache_key(&negative, 3, &g));
    }

    #[test]
    fn cached_basis_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BasisCache::new(dir.path());
        let g = build_grid(32, 64).unwrap();
        let w = WeightField::family("bump{0,1,0.5}".parse().unwrap());
        let cold = cache.basis(&w, 12, &g).unwrap();
        let warm = cache.basis(&w, 12, &g).unwrap();
        assert_eq!(cold, warm);
        assert_eq!((cache.hits(), cache.misses()), (1, 1));
        std::fs::write(cache.path(&cache_key(&w.sample_phi(&g).unwrap(), 12, &g)), "garbage").unwrap();
        assert_eq!(cache.basis(&w, 12, &g).unwrap(), cold);
        assert_eq!(cache.misses(), 2);
    }
}
