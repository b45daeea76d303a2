//! Asymptotic secret-key rate.
//!
//! Conclusive results split into those projected inside the protected
//! subspace S (fraction `p_S`) and the rest. Eve is granted full knowledge of
//! the outside part; the inside part behaves as ideal BB84. The rate per
//! conclusive result is
//!
//! ```text
//! r = p_S − H(e_x) − p_S · H(e_x^S)
//! ```
//!
//! where `e_x^S` follows from `e_x = p_S·e_x^S + (1 − p_S)·e_x^S̄` with the
//! outside error rate taken as ½.

use serde::{Deserialize, Serialize};

use crate::detection::TallyCounts;
use crate::error::{Error, Result};

/// Error rate assumed for conclusive results projected outside S.
pub const OUTSIDE_S_ERROR: f64 = 0.5;

/// Shannon entropy of a biased coin, in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Upper estimate of the error rate inside S, clamped to `[0, ½]`.
pub fn bound_ex_s(p_s: f64, e_x: f64) -> Result<f64> {
    check_inputs(p_s, e_x)?;
    Ok(((e_x - (1.0 - p_s) * OUTSIDE_S_ERROR) / p_s).clamp(0.0, 0.5))
}

/// Secret fraction per conclusive result. Negative values mean no key can be
/// distilled; they are returned unclamped.
pub fn key_rate(p_s: f64, e_x: f64) -> Result<f64> {
    let ex_s = bound_ex_s(p_s, e_x)?;
    Ok(p_s - binary_entropy(e_x)? - p_s * binary_entropy(ex_s)?)
}

fn check_inputs(p_s: f64, e_x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_s) {
        return Err(Error::InvalidProbability(p_s));
    }
    if p_s == 0.0 {
        return Err(Error::EmptySubspace);
    }
    if !(0.0..=0.5).contains(&e_x) {
        return Err(Error::InvalidProbability(e_x));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    #[serde(rename = "p_S")]
    pub p_s: f64,
    pub e_x: f64,
    #[serde(rename = "e_x_S")]
    pub e_x_s: f64,
    pub rate_fraction: f64,
    pub secret_bits_per_s: f64,
}

/// Evaluates the bound on measured tallies. A measured QBER above ½ is
/// treated as ½, the value it is statistically indistinguishable from.
pub fn report(t: &TallyCounts) -> Result<SecurityReport> {
    if t.sifted == 0 || t.ps_sample_total == 0 {
        return Err(Error::EmptySample);
    }
    if !t.is_consistent() {
        return Err(Error::InvalidConfig("tally counters are inconsistent".into()));
    }
    let e_x = (t.errors as f64 / t.sifted as f64).min(0.5);
    let p_s = t.ps_sample_in_s as f64 / t.ps_sample_total as f64;
    let e_x_s = bound_ex_s(p_s, e_x)?;
    let rate_fraction = key_rate(p_s, e_x)?;
    let secret_bits_per_s =
        if t.duration_s > 0.0 { rate_fraction * t.sifted as f64 / t.duration_s } else { 0.0 };
    Ok(SecurityReport { p_s, e_x, e_x_s, rate_fraction, secret_bits_per_s })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent closed-form oracle for H(p) using natural logs.
    fn h_oracle(p: f64) -> f64 {
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()) / std::f64::consts::LN_2
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        // H(0.102), frozen from direct evaluation.
        assert!((binary_entropy(0.102).unwrap() - 0.475_303_6).abs() < 1e-6);
        assert!((binary_entropy(0.102).unwrap() - h_oracle(0.102)).abs() < 1e-14);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn bound_examples() {
        assert!((bound_ex_s(1.0, 0.07).unwrap() - 0.07).abs() < 1e-15);
        assert!((bound_ex_s(0.91, 0.102).unwrap() - 0.0626).abs() < 1e-4);
        assert!((bound_ex_s(0.97, 0.068).unwrap() - 0.0546).abs() < 1e-4);
        assert!(matches!(bound_ex_s(0.0, 0.1), Err(Error::EmptySubspace)));
        // Exactly at e_x = (1 − p_S)/2 nothing is left for the inside part.
        assert!(bound_ex_s(0.8, 0.1).unwrap() < 1e-15);
    }

    #[test]
    fn key_rate_examples() {
        assert!((key_rate(1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        // Direct evaluation: 0.91 − H(0.102) − 0.91·H(0.0626374) = 0.127274.
        assert!((key_rate(0.91, 0.102).unwrap() - 0.127_274).abs() < 1e-6);
        // 0.97 − H(0.068) − 0.97·H(0.0546392) = 0.314972.
        assert!((key_rate(0.97, 0.068).unwrap() - 0.314_972).abs() < 1e-6);
        assert!(key_rate(0.9, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn identity_round_trip() {
        for &(p_s, e_x) in &[(0.91, 0.102), (0.97, 0.068), (0.6, 0.3)] {
            let inside = bound_ex_s(p_s, e_x).unwrap();
            let back = p_s * inside + (1.0 - p_s) * OUTSIDE_S_ERROR;
            assert!((back - e_x).abs() < 1e-12);
        }
    }

    #[test]
    fn report_examples() {
        let perfect = TallyCounts {
            rounds: 100,
            conclusive: 100,
            sifted: 50,
            errors: 0,
            ps_sample_total: 10,
            ps_sample_in_s: 10,
            duration_s: 10.0,
            ..Default::default()
        };
        let r = report(&perfect).unwrap();
        assert_eq!(r.rate_fraction, 1.0);
        assert_eq!(r.secret_bits_per_s, 5.0);

        let noisy = TallyCounts { errors: 25, ..perfect };
        assert!(report(&noisy).unwrap().rate_fraction < 0.0);

        assert!(report(&TallyCounts::default()).is_err());
        let broken = TallyCounts { errors: 60, ..perfect };
        assert!(report(&broken).is_err());
    }
}
