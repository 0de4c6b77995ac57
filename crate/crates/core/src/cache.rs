//! On-disk cache of spectral-density tables.
//!
//! One JSON file per key, `tables-<hash>.json`, where the hash is the
//! SHA-256 of the layout version, the potential, the material and the table
//! options. The file holds
//!
//! ```text
//! { "version": 1, "key": "<hex>", "omega": [...],
//!   "channels": [ { "name": "LA_DP", "re": [...], "im": [...] }, ... ],
//!   "zero_slope": [ { "name": ..., "re": [16], "im": [16] }, ... ] }
//! ```
//!
//! with each 4×4 matrix flattened row-major and matrices concatenated along ω.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::phonons::{spectral_density_tables, Channel, MaterialParams, SpectralTables, TableOptions};
use crate::wavefunctions::{AxialBasis, PotentialSpec};

pub const CACHE_LAYOUT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Block {
    name: String,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    key: String,
    omega: Vec<f64>,
    channels: Vec<Block>,
    zero_slope: Vec<Block>,
}

fn block(name: &str, ms: &[Matrix4<Complex64>]) -> Block {
    let mut re = Vec::with_capacity(16 * ms.len());
    let mut im = Vec::with_capacity(16 * ms.len());
    for m in ms {
        for r in 0..4 {
            for c in 0..4 {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
    }
    Block { name: name.to_string(), re, im }
}

fn unblock(b: &Block, n: usize) -> Result<Vec<Matrix4<Complex64>>> {
    if b.re.len() != 16 * n || b.im.len() != 16 * n {
        return Err(Error::Config(format!("cache block {} has the wrong length", b.name)));
    }
    Ok((0..n)
        .map(|k| Matrix4::from_fn(|r, c| Complex64::new(b.re[16 * k + 4 * r + c], b.im[16 * k + 4 * r + c])))
        .collect())
}

/// Hex key for a geometry, material and table layout.
pub fn table_key(potential: &PotentialSpec, material: &MaterialParams, opts: &TableOptions) -> String {
    let payload = serde_json::json!({
        "version": CACHE_LAYOUT_VERSION,
        "potential": potential,
        "material": material,
        "options": opts,
    });
    let digest = Sha256::digest(payload.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Table source with an optional cache directory.
#[derive(Debug, Clone, Default)]
pub struct TableStore {
    pub dir: Option<PathBuf>,
}

impl TableStore {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    fn path(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("tables-{}.json", &key[..16]))
    }

    /// Loads the tables for `basis` from the cache, or builds and stores them.
    pub fn get(&self, basis: &AxialBasis, material: &MaterialParams, opts: TableOptions) -> Result<SpectralTables> {
        let Some(dir) = &self.dir else {
            return spectral_density_tables(basis, material, opts);
        };
        let key = table_key(&basis.potential, material, &opts);
        let path = Self::path(dir, &key);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(t) = read(&text, &key) {
                return Ok(t);
            }
        }
        let tables = spectral_density_tables(basis, material, opts)?;
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, write(&tables, &key))?;
        fs::rename(&tmp, &path)?;
        Ok(tables)
    }
}

fn write(t: &SpectralTables, key: &str) -> String {
    let file = CacheFile {
        version: CACHE_LAYOUT_VERSION,
        key: key.to_string(),
        omega: t.omega.clone(),
        channels: Channel::ALL.iter().zip(&t.channels).map(|(c, m)| block(c.label(), m)).collect(),
        zero_slope: Channel::ALL.iter().zip(&t.zero_slope).map(|(c, m)| block(c.label(), std::slice::from_ref(m))).collect(),
    };
    serde_json::to_string(&file).expect("plain data serializes")
}

fn read(text: &str, key: &str) -> Result<SpectralTables> {
    let f: CacheFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad cache file: {e}")))?;
    if f.version != CACHE_LAYOUT_VERSION || f.key != key || f.channels.len() != 4 || f.zero_slope.len() != 4 {
        return Err(Error::Config("stale cache file".into()));
    }
    let n = f.omega.len();
    let mut channels: [Vec<Matrix4<Complex64>>; 4] = Default::default();
    let mut zero_slope = [Matrix4::zeros(); 4];
    for s in 0..4 {
        channels[s] = unblock(&f.channels[s], n)?;
        zero_slope[s] = unblock(&f.zero_slope[s], 1)?[0];
    }
    SpectralTables::new(f.omega, channels, zero_slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let store = TableStore::new(Some(dir.path().to_path_buf()));
        let basis = AxialBasis::solve(&PotentialSpec::new(350.0, 4.5, 7.0, 0.065)).unwrap();
        let m = MaterialParams::default();
        let opts = TableOptions { energy_max: 5.0, n_omega: 64, n_theta: 32 };
        let a = store.get(&basis, &m, opts).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = store.get(&basis, &m, opts).unwrap();
        assert_eq!(a, b);
    }
}
