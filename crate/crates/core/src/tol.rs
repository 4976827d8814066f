//! Validation tolerances with an optional global override (the CLI `--tol` flag).

use std::sync::atomic::{AtomicU64, Ordering};

pub const UNITARY: f64 = 1e-8;
pub const COMPLETENESS: f64 = 1e-8;
pub const POSITIVITY_REL: f64 = 1e-10;
pub const HERMITIAN: f64 = 1e-10;
pub const KRAUS_NEGATIVE: f64 = 1e-8;

static OVERRIDE: AtomicU64 = AtomicU64::new(0);

/// Replaces every validation tolerance with `tol`. Passing `None` restores defaults.
pub fn set_override(tol: Option<f64>) {
    OVERRIDE.store(tol.map(f64::to_bits).unwrap_or(0), Ordering::Relaxed);
}

/// Returns the override if one is set, otherwise `default`.
pub fn get(default: f64) -> f64 {
    match OVERRIDE.load(Ordering::Relaxed) {
        0 => default,
        bits => f64::from_bits(bits),
    }
}
