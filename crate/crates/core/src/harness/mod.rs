//! Verification studies: interpolation convergence, pool projections and
//! numerical diffusion with and without a moving window.

mod diffusion;
mod interp;
mod pool;

use std::path::Path;

use sha2::{Digest, Sha256};

pub use diffusion::{
    area_loss, diffusion_compare, frame_exactness, write_diffusion_outputs, DiffusionParams, DiffusionSample,
    DIFFUSION_CSV_HEADER,
};
pub use interp::{
    interp_convergence, interp_error, interp_layout, write_interp_outputs, AnalyticField, ConvergenceRow, ErrorMap,
    InterpKind, TABLE_CELL, TABLE_FACE, TABLE_RESOLUTIONS,
};
pub use pool::{pool_test, write_pool_outputs, PoolParams, PoolReport, PoolRun, POOL_CSV_HEADER};

use crate::{Error, Result};

/// Hex SHA-256 of a study description; embedded in every report.
pub fn config_hash(description: &str) -> String {
    Sha256::digest(description.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub(crate) fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(std::io::BufWriter::new(f))
}
