//! Per-stage cache of inducing schemes, keyed by the hash of the resolved
//! map and the inducing parameters.

use std::io::Write;
use std::path::{Path, PathBuf};

use ergolab::inducing::{build_partition, InducedScheme, SchemeParams};
use ergolab::PiecewiseMap;

use crate::digest;

pub const CACHE_DIR: &str = ".ergolab-cache";

pub fn scheme_key(map: &PiecewiseMap, params: &SchemeParams) -> String {
    let mut bytes = serde_json::to_vec(map).expect("map serializes");
    bytes.extend(serde_json::to_vec(params).expect("params serialize"));
    bytes.extend(env!("CARGO_PKG_VERSION").as_bytes());
    digest(&bytes)
}

fn scheme_path(out: &Path, key: &str) -> PathBuf {
    out.join(CACHE_DIR).join(format!("scheme-{}.json", &key[..16]))
}

/// Write through a temporary file in the same directory, then rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// The cached scheme if present and readable, otherwise a fresh build that
/// is then stored. The flag tells whether the cache was hit.
pub fn scheme(out: &Path, map: &PiecewiseMap, params: &SchemeParams) -> ergolab::Result<(InducedScheme, bool)> {
    let key = scheme_key(map, params);
    let path = scheme_path(out, &key);
    if let Ok(bytes) = std::fs::read(&path) {
        if let Ok(s) = serde_json::from_slice::<InducedScheme>(&bytes) {
            if &s.map == map && s.params == *params {
                return Ok((s, true));
            }
        }
    }
    let s = build_partition(map, params)?;
    write_atomic(&path, &serde_json::to_vec(&s).expect("scheme serializes"))?;
    Ok((s, false))
}
