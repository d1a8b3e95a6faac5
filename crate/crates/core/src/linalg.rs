//! Jittered Cholesky factorization for covariance matrices.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Result, RftError};

/// First diagonal jitter, relative to `trace / dim`.
pub const JITTER_START: f64 = 1e-10;
/// Largest diagonal jitter, relative to `trace / dim`.
pub const JITTER_MAX: f64 = 1e-4;

/// Factorizes a symmetric matrix, adding diagonal jitter if needed.
///
/// Tries the matrix as given, then adds `JITTER_START * trace/dim` and
/// escalates by 10x up to `JITTER_MAX * trace/dim`. Returns the factor and the
/// absolute jitter that was added.
pub fn jittered_cholesky(a: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Cholesky::new(a).expect("empty matrix"), 0.0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(RftError::NonFinite("covariance matrix".into()));
    }
    let scale = (a.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, 0.0));
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok((c, jitter));
        }
        rel *= 10.0;
    }
    Err(RftError::NotPositiveDefinite {
        max_jitter: JITTER_MAX * scale,
    })
}

/// `log |A|` from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}
