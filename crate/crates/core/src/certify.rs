//! Min-entropy certification: converting a CHSH value, together with the
//! apparatus error budget, into a bound on an adversary's guessing
//! probability and the extractable min-entropy per measurement.
//!
//! The ideal-device chain is the standard one: a CHSH value `S` bounds the
//! guessing probability by `G ≤ 1/2 + 1/2·√(2 − S²/4)`, and `H∞ = −log₂ G`.
//! For the real apparatus the measured `S` is first debited by the CHSH
//! error budget `e_s` and the guessing bound is credited with the
//! cell-probability budget `e_p`, so the certificate only ever claims
//! entropy the imperfect device actually guarantees.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundBundle;
use crate::Error;

/// The quantum (Tsirelson) bound on the CHSH parameter, `2√2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Numerical slack allowed above the quantum bound before an input is
/// treated as an error (upstream bug) or flagged (statistical fluctuation).
const SUPER_QUANTUM_SLACK: f64 = 1e-9;

/// Certification result for one measured (or simulated) CHSH value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// The CHSH value of the real apparatus, as supplied.
    pub s_real: f64,
    /// CHSH error budget debited from `s_real`.
    pub e_s: f64,
    /// Guessing-probability credit for cell-probability errors.
    pub e_p: f64,
    /// `s_real − e_s`, clamped into `[0, 2√2]`; the value the entropy bound
    /// is evaluated at.
    pub s_effective: f64,
    /// Upper bound on the adversary's guessing probability, in (0, 1].
    pub guessing_bound: f64,
    /// Certified min-entropy per measurement, bits; `−log₂(guessing_bound)`
    /// when that is positive, otherwise 0.
    pub min_entropy_bits: f64,
    /// Whether any entropy is certified (`guessing_bound < 1`).
    pub certified: bool,
    /// True when `s_real − e_s` exceeded the quantum bound by more than the
    /// numerical slack and was clamped down to `2√2`. The certificate then
    /// sits on the quantum boundary, which maximizes the entropy claim, so a
    /// flagged result calls for manual review of the input statistics.
    pub clamped: bool,
}

/// Min-entropy bound (bits) for an ideal device from a CHSH value:
/// `max(0, −log₂(1/2 + 1/2·√(max(0, 2 − s²/4))))`.
///
/// Values of `|s|` beyond the quantum bound (plus numerical slack) are
/// rejected — they signal an upstream bug or an unhandled statistical
/// fluctuation that the caller must deal with explicitly.
pub fn pironio_entropy_bound(s: f64) -> Result<f64, Error> {
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "CHSH value {s} must be finite"
        )));
    }
    if s.abs() > TSIRELSON_BOUND + SUPER_QUANTUM_SLACK {
        return Err(Error::SuperQuantum(s));
    }
    let guessing = 0.5 + 0.5 * (2.0 - s * s / 4.0).max(0.0).sqrt();
    Ok((-guessing.log2()).max(0.0))
}

/// Certification for the real apparatus: debit the CHSH budget, credit the
/// probability budget, and report the resulting guessing/entropy bounds.
///
/// `guessing_bound = min(1, 1/2 + 1/2·√(max(0, 2 − s_eff²/4)) + e_p)` with
/// `s_eff = clamp(s_real − e_s, 0, 2√2)`. An effective value beyond the
/// quantum bound is clamped rather than rejected — finite-sample estimates
/// can legitimately overshoot — but the certificate is flagged.
pub fn realistic_certificate(s_real: f64, bundle: &BoundBundle) -> Result<Certificate, Error> {
    if !s_real.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "CHSH value {s_real} must be finite"
        )));
    }
    bundle.validate()?;
    let raw = s_real - bundle.e_s;
    let clamped = raw > TSIRELSON_BOUND + SUPER_QUANTUM_SLACK;
    let s_effective = raw.clamp(0.0, TSIRELSON_BOUND);
    let guessing_bound = (0.5
        + 0.5 * (2.0 - s_effective * s_effective / 4.0).max(0.0).sqrt()
        + bundle.e_p)
        .min(1.0);
    let min_entropy_bits = if guessing_bound < 1.0 {
        -guessing_bound.log2()
    } else {
        0.0
    };
    Ok(Certificate {
        s_real,
        e_s: bundle.e_s,
        e_p: bundle.e_p,
        s_effective,
        guessing_bound,
        min_entropy_bits,
        certified: guessing_bound < 1.0,
        clamped,
    })
}
