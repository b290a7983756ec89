pub mod bench;
pub mod enhance;
pub mod eval;
pub mod gradcheck;
pub mod train;

use std::path::Path;

use iaclahe::estimator::{load_checkpoint, EstimatorParams};

use crate::error::{CliError, CliResult};

/// A checkpoint the user pointed at must exist; anything wrong beyond that
/// is a runtime failure.
pub(crate) fn load_model(path: &Path) -> CliResult<EstimatorParams> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "model file {} not found",
            path.display()
        )));
    }
    Ok(load_checkpoint(path)?)
}

pub(crate) fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}
