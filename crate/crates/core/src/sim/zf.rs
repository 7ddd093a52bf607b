//! Zero-forcing baseline.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::ci_model::ComplexChannel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ZfPrecoder {
    /// Transmit vector after scaling to the budget.
    pub x: Vec<Complex64>,
    /// Factor applied to the unscaled right inverse; the noiseless
    /// receive signal is `scale · s`.
    pub scale: f64,
}

/// `x̃ = scale · H̃ᴴ(H̃H̃ᴴ)⁻¹ s̃` with `‖x̃‖² = budget`.
pub fn zf_baseline(channel: &ComplexChannel, symbols: &[Complex64], budget: f64) -> Result<ZfPrecoder> {
    let h = channel.matrix();
    if symbols.len() != channel.users() {
        return Err(Error::dim(format!(
            "{} users but {} symbols",
            channel.users(),
            symbols.len()
        )));
    }
    if channel.users() > channel.antennas() {
        return Err(Error::Singular(format!(
            "zero-forcing needs K ≤ N_t, got {}×{}",
            channel.users(),
            channel.antennas()
        )));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::param(format!("budget must be positive, got {budget}")));
    }
    let sv = h.singular_values();
    if sv.min() <= 1e-10 * sv.max() {
        return Err(Error::Singular("channel is rank deficient".into()));
    }
    let hh = h.adjoint();
    let gram = h * &hh;
    let s = DVector::from_column_slice(symbols);
    let w = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("channel is rank deficient".into()))?
        .solve(&s);
    let x = hh * w;
    let power: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    if !(power > 0.0) {
        return Err(Error::Singular("zero-forcing precoder has zero power".into()));
    }
    let scale = (budget / power).sqrt();
    Ok(ZfPrecoder {
        x: x.iter().map(|v| v * scale).collect(),
        scale,
    })
}
