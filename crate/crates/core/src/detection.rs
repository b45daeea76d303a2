//! Counting statistics: source rate, fiber loss, accidental coincidences and
//! the Monte Carlo session that turns exact round probabilities into tallies.
//!
//! Rate bookkeeping (all in Hz):
//!
//! * `ceiling = pair_rate · apparatus_efficiency · T²` is the coincidence rate
//!   at full survival, with `T` the per-photon transmittance.
//! * true conclusive rate `C = ceiling · survival`; half of it survives
//!   sifting, `C_s = C / 2`.
//! * `A = accidental_rate(cfg)` is the rate of sifted accidental
//!   coincidences. Accidental detector patterns pass the gate at `2A` and
//!   half of them are sifted away, like true pairs.
//!
//! With these, the sifted error rate is `(e_true·C_s + A/2) / (C_s + A)`.

use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{randomized_survival, CollectiveRotation, RotatorSetting, Scheme};
use crate::error::{Error, Result};
use crate::protocol::{run_ps_round, run_round, BasisChoice, LogicalState, RoundParams};

pub const SOURCE_PAIR_RATE_HZ: f64 = 12_000.0;
pub const ATTENUATION_DB_PER_KM: f64 = 4.8;
pub const SINGLES_RATE_HZ: f64 = 2_000.0;
pub const COINCIDENCE_WINDOW_NS: f64 = 3.0;
pub const SOURCE_ERROR_PROB: f64 = 0.04;
pub const SHORT_FIBER_KM: f64 = 0.004;
pub const LONG_FIBER_KM: f64 = 1.0;
pub const SHORT_FIBER_CEILING_HZ: f64 = 140.0;
pub const LONG_FIBER_CEILING_HZ: f64 = 1.4;
pub const SHORT_FIBER_OUTSIDE_S: f64 = 0.03;
pub const LONG_FIBER_OUTSIDE_S: f64 = 0.05;
pub const PS_SAMPLE_FRACTION: f64 = 0.1;

/// Peak two-photon interference visibility.
pub const PEAK_VISIBILITY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Detected pair rate at the source.
    pub pair_rate_hz: f64,
    /// Beam-splitter combination/splitting, coupling and detector
    /// efficiencies folded into one factor.
    pub apparatus_efficiency: f64,
    pub fiber_length_km: f64,
    pub atten_db_per_km: f64,
    /// Per-photon loss outside the fiber (connectors).
    pub extra_loss_db: f64,
    /// Singles rate of each detector.
    pub singles_rate_hz: f64,
    pub window_ns: f64,
    pub source_error_prob: f64,
    /// Fraction of rounds where two-photon interference succeeds; a failed
    /// round gives a random bit.
    pub visibility: f64,
    /// Post-selected population pushed outside S by channel imperfections.
    pub outside_s_weight: f64,
    /// Fraction of rounds diverted to the p^S test measurement.
    pub ps_sample_fraction: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::long_fiber()
    }
}

impl NoiseConfig {
    /// 4 m fiber, calibrated to a 140 Hz coincidence ceiling.
    pub fn short_fiber() -> Self {
        let mut cfg = NoiseConfig {
            pair_rate_hz: SOURCE_PAIR_RATE_HZ,
            apparatus_efficiency: 1.0,
            fiber_length_km: SHORT_FIBER_KM,
            atten_db_per_km: ATTENUATION_DB_PER_KM,
            extra_loss_db: 0.0,
            singles_rate_hz: SINGLES_RATE_HZ,
            window_ns: COINCIDENCE_WINDOW_NS,
            source_error_prob: SOURCE_ERROR_PROB,
            visibility: 1.0,
            outside_s_weight: SHORT_FIBER_OUTSIDE_S,
            ps_sample_fraction: PS_SAMPLE_FRACTION,
        };
        cfg.apparatus_efficiency = SHORT_FIBER_CEILING_HZ / (cfg.pair_rate_hz * pair_transmittance(&cfg));
        cfg
    }

    /// 1 km fiber with the same apparatus, connector loss calibrated so the
    /// ceiling drops to 1.4 Hz.
    pub fn long_fiber() -> Self {
        let mut cfg = NoiseConfig::short_fiber();
        cfg.fiber_length_km = LONG_FIBER_KM;
        cfg.outside_s_weight = LONG_FIBER_OUTSIDE_S;
        cfg.extra_loss_db = calibrate_extra_loss(&cfg, LONG_FIBER_CEILING_HZ);
        cfg
    }

    /// No losses beyond the apparatus factor, no accidentals, no source or
    /// channel imperfections.
    pub fn noiseless() -> Self {
        NoiseConfig {
            fiber_length_km: 0.0,
            extra_loss_db: 0.0,
            singles_rate_hz: 0.0,
            source_error_prob: 0.0,
            visibility: 1.0,
            outside_s_weight: 0.0,
            ..NoiseConfig::short_fiber()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("pair_rate_hz", self.pair_rate_hz),
            ("fiber_length_km", self.fiber_length_km),
            ("atten_db_per_km", self.atten_db_per_km),
            ("extra_loss_db", self.extra_loss_db),
            ("singles_rate_hz", self.singles_rate_hz),
            ("window_ns", self.window_ns),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        let probs = [
            ("source_error_prob", self.source_error_prob),
            ("outside_s_weight", self.outside_s_weight),
            ("ps_sample_fraction", self.ps_sample_fraction),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [("apparatus_efficiency", self.apparatus_efficiency), ("visibility", self.visibility)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-photon transmittance `10^(−(L·α + extra)/10)`.
pub fn transmittance(cfg: &NoiseConfig) -> f64 {
    10f64.powf(-(cfg.fiber_length_km * cfg.atten_db_per_km + cfg.extra_loss_db) / 10.0)
}

/// Both photons cross the same link.
pub fn pair_transmittance(cfg: &NoiseConfig) -> f64 {
    transmittance(cfg).powi(2)
}

/// Coincidence rate at full survival.
pub fn coincidence_ceiling(cfg: &NoiseConfig) -> f64 {
    cfg.pair_rate_hz * cfg.apparatus_efficiency * pair_transmittance(cfg)
}

/// Per-photon connector loss (dB) that brings the ceiling to `target_hz`.
pub fn calibrate_extra_loss(cfg: &NoiseConfig, target_hz: f64) -> f64 {
    let without = NoiseConfig { extra_loss_db: 0.0, ..*cfg };
    // ceiling ∝ 10^(−2·extra/10)
    5.0 * (coincidence_ceiling(&without) / target_hz).log10()
}

/// `2 · singles² · window`.
pub fn accidental_rate(cfg: &NoiseConfig) -> f64 {
    2.0 * cfg.singles_rate_hz.powi(2) * cfg.window_ns * 1e-9
}

/// Error rate of true (non-accidental) sifted coincidences.
pub fn true_error_rate(cfg: &NoiseConfig) -> f64 {
    let inside = cfg.visibility * cfg.source_error_prob + (1.0 - cfg.visibility) * 0.5;
    (1.0 - cfg.outside_s_weight) * inside + cfg.outside_s_weight * 0.5
}

/// Sifted true-coincidence rate `C_s`.
pub fn sifted_true_rate(cfg: &NoiseConfig, survival: f64) -> f64 {
    0.5 * coincidence_ceiling(cfg) * survival
}

/// Analytic sifted QBER at a given survival probability.
pub fn expected_qber(cfg: &NoiseConfig, survival: f64) -> f64 {
    let cs = sifted_true_rate(cfg, survival);
    let a = accidental_rate(cfg);
    if cs + a == 0.0 {
        return f64::NAN;
    }
    (true_error_rate(cfg) * cs + 0.5 * a) / (cs + a)
}

/// The part of [`expected_qber`] caused by accidentals alone.
pub fn accidental_qber_contribution(cfg: &NoiseConfig, survival: f64) -> f64 {
    let cs = sifted_true_rate(cfg, survival);
    let a = accidental_rate(cfg);
    if cs + a == 0.0 {
        return f64::NAN;
    }
    0.5 * a / (cs + a)
}

/// Analytic expectations for a session; used as the Monte Carlo oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub conclusive_hz: f64,
    pub sifted_hz: f64,
    pub qber: f64,
    pub p_s: f64,
}

pub fn expected_rates(cfg: &NoiseConfig, u: &CollectiveRotation, scheme: Scheme) -> ExpectedRates {
    let survival = randomized_survival(u, scheme);
    let keep = 1.0 - cfg.ps_sample_fraction;
    let true_c = coincidence_ceiling(cfg) * survival;
    let acc_c = 2.0 * accidental_rate(cfg);
    let p_s = if true_c + acc_c > 0.0 {
        ((1.0 - cfg.outside_s_weight) * true_c + 0.5 * acc_c) / (true_c + acc_c)
    } else {
        f64::NAN
    };
    ExpectedRates {
        conclusive_hz: keep * (true_c + acc_c),
        sifted_hz: 0.5 * keep * (true_c + acc_c),
        qber: expected_qber(cfg, survival),
        p_s,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TallyCounts {
    /// Emitted pairs.
    pub rounds: u64,
    pub conclusive: u64,
    pub sifted: u64,
    pub errors: u64,
    pub accidental_conclusive: u64,
    #[serde(rename = "pS_sample_total")]
    pub ps_sample_total: u64,
    #[serde(rename = "pS_sample_inS")]
    pub ps_sample_in_s: u64,
    pub duration_s: f64,
}

impl TallyCounts {
    pub fn is_consistent(&self) -> bool {
        self.errors <= self.sifted
            && self.sifted <= self.conclusive
            && self.ps_sample_in_s <= self.ps_sample_total
            && self.accidental_conclusive <= self.conclusive
            && self.duration_s >= 0.0
    }

    pub fn qber(&self) -> Option<f64> {
        (self.sifted > 0).then(|| self.errors as f64 / self.sifted as f64)
    }

    pub fn qber_stderr(&self) -> Option<f64> {
        self.qber().map(|q| (q * (1.0 - q) / self.sifted as f64).sqrt())
    }

    pub fn p_s(&self) -> Option<f64> {
        (self.ps_sample_total > 0).then(|| self.ps_sample_in_s as f64 / self.ps_sample_total as f64)
    }

    pub fn conclusive_rate_hz(&self) -> f64 {
        if self.duration_s > 0.0 {
            self.conclusive as f64 / self.duration_s
        } else {
            0.0
        }
    }
}

impl AddAssign for TallyCounts {
    fn add_assign(&mut self, o: TallyCounts) {
        self.rounds += o.rounds;
        self.conclusive += o.conclusive;
        self.sifted += o.sifted;
        self.errors += o.errors;
        self.accidental_conclusive += o.accidental_conclusive;
        self.ps_sample_total += o.ps_sample_total;
        self.ps_sample_in_s += o.ps_sample_in_s;
        self.duration_s += o.duration_s;
    }
}

impl Add for TallyCounts {
    type Output = TallyCounts;

    fn add(mut self, o: TallyCounts) -> TallyCounts {
        self += o;
        self
    }
}

/// Target number of detector events per time slice.
const EVENTS_PER_SLICE: f64 = 20_000.0;
const MAX_SLICES: usize = 256;

/// Monte Carlo session for one rotator setting. The run is split into time
/// slices with independent ChaCha streams derived from `seed`; the slice
/// layout depends only on the inputs, so results do not depend on the
/// thread count.
pub fn simulate_session(
    cfg: &NoiseConfig,
    setting: &RotatorSetting,
    scheme: Scheme,
    duration_s: f64,
    seed: u64,
) -> Result<TallyCounts> {
    setting.validate()?;
    simulate_rotation(cfg, &CollectiveRotation::from_waveplates(setting), scheme, duration_s, seed)
}

pub fn simulate_rotation(
    cfg: &NoiseConfig,
    u: &CollectiveRotation,
    scheme: Scheme,
    duration_s: f64,
    seed: u64,
) -> Result<TallyCounts> {
    cfg.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidConfig(format!("duration must be positive, got {duration_s}")));
    }
    let events = (coincidence_ceiling(cfg) + 2.0 * accidental_rate(cfg)) * duration_s;
    let slices = ((events / EVENTS_PER_SLICE).ceil() as usize).clamp(1, MAX_SLICES);
    let dt = duration_s / slices as f64;
    let parts: Vec<Result<TallyCounts>> = (0..slices)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            simulate_slice(cfg, u, scheme, dt, &mut rng)
        })
        .collect();
    let mut total = TallyCounts::default();
    for p in parts {
        total += p?;
    }
    Ok(total)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map(|d| d.sample(rng)).unwrap_or(0)
}

/// One time slice on a single random stream.
pub fn simulate_slice<R: Rng + ?Sized>(
    cfg: &NoiseConfig,
    u: &CollectiveRotation,
    scheme: Scheme,
    duration_s: f64,
    rng: &mut R,
) -> Result<TallyCounts> {
    let mut t = TallyCounts { duration_s, ..TallyCounts::default() };
    let params = RoundParams {
        channel: *u,
        scheme,
        source_error_prob: cfg.source_error_prob,
        outside_s_weight: cfg.outside_s_weight,
        visibility: cfg.visibility,
    };

    // Emission, then independent survival of each photon, then the
    // apparatus factor.
    let emitted = poisson(cfg.pair_rate_hz * duration_s, rng);
    let tr = transmittance(cfg);
    let first = binomial(emitted, tr, rng);
    let both = binomial(first, tr, rng);
    let detected = binomial(both, cfg.apparatus_efficiency, rng);
    t.rounds = emitted;

    for _ in 0..detected {
        if cfg.ps_sample_fraction > 0.0 && rng.random_bool(cfg.ps_sample_fraction) {
            if let Some(inside) = run_ps_round(&params, rng)? {
                t.ps_sample_total += 1;
                t.ps_sample_in_s += inside as u64;
            }
            continue;
        }
        let r = run_round(&params, rng)?;
        if !r.outcome.conclusive {
            continue;
        }
        t.conclusive += 1;
        if r.outcome.basis_used == r.alice.basis() {
            t.sifted += 1;
            if r.outcome.bit != Some(r.alice.bit()) {
                t.errors += 1;
            }
        }
    }

    // Uncorrelated detector pairs that pass the 6 ns gate: a random pattern
    // in whatever basis Bob happened to choose.
    let accidentals = poisson(2.0 * accidental_rate(cfg) * duration_s, rng);
    for _ in 0..accidentals {
        if cfg.ps_sample_fraction > 0.0 && rng.random_bool(cfg.ps_sample_fraction) {
            t.ps_sample_total += 1;
            t.ps_sample_in_s += rng.random_bool(0.5) as u64;
            continue;
        }
        t.conclusive += 1;
        t.accidental_conclusive += 1;
        let alice = LogicalState::random(rng);
        let basis = BasisChoice::random(rng);
        let bit: u8 = rng.random_range(0..2);
        if basis == alice.basis() {
            t.sifted += 1;
            if bit != alice.bit() {
                t.errors += 1;
            }
        }
    }
    Ok(t)
}

/// Gaussian interference envelope `V₀·exp(−(Δx/ℓ_c)²)` with coherence length
/// `ℓ_c = λ²/Δλ` set by the interference filter.
pub fn visibility_envelope(path_mismatch_um: f64, filter_fwhm_nm: f64, wavelength_nm: f64) -> Result<f64> {
    visibility_envelope_with_peak(PEAK_VISIBILITY, path_mismatch_um, filter_fwhm_nm, wavelength_nm)
}

pub fn visibility_envelope_with_peak(
    peak: f64,
    path_mismatch_um: f64,
    filter_fwhm_nm: f64,
    wavelength_nm: f64,
) -> Result<f64> {
    if !(filter_fwhm_nm > 0.0 && wavelength_nm > 0.0) {
        return Err(Error::InvalidConfig("bandwidth and wavelength must be positive".into()));
    }
    let lc = coherence_length_um(filter_fwhm_nm, wavelength_nm);
    if path_mismatch_um.is_infinite() {
        return Ok(0.0);
    }
    Ok(peak * (-(path_mismatch_um / lc).powi(2)).exp())
}

/// `λ²/Δλ` in micrometres.
pub fn coherence_length_um(filter_fwhm_nm: f64, wavelength_nm: f64) -> f64 {
    wavelength_nm * wavelength_nm / filter_fwhm_nm * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transmittance_examples() {
        let cfg = NoiseConfig { fiber_length_km: 0.0, extra_loss_db: 0.0, ..NoiseConfig::short_fiber() };
        assert_eq!(transmittance(&cfg), 1.0);
        let km = NoiseConfig { fiber_length_km: 1.0, extra_loss_db: 0.0, ..cfg };
        assert!((transmittance(&km) - 0.331).abs() < 5e-4);
        assert!((pair_transmittance(&km) - transmittance(&km).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn presets_hit_coincidence_ceilings() {
        assert!((coincidence_ceiling(&NoiseConfig::short_fiber()) - 140.0).abs() < 1e-9);
        assert!((coincidence_ceiling(&NoiseConfig::long_fiber()) - 1.4).abs() < 1e-12);
        // Fiber alone (2×4.8 dB) does not explain the hundredfold drop.
        assert!(NoiseConfig::long_fiber().extra_loss_db > 5.0);
    }

    #[test]
    fn accidental_rate_examples() {
        let cfg = NoiseConfig::short_fiber();
        assert!((accidental_rate(&cfg) - 0.024).abs() < 1e-15);
        assert_eq!(accidental_rate(&NoiseConfig { singles_rate_hz: 0.0, ..cfg }), 0.0);
        assert!((accidental_rate(&NoiseConfig { singles_rate_hz: 1000.0, ..cfg }) - 0.006).abs() < 1e-15);
    }

    #[test]
    fn accidental_qber_endpoints() {
        let cfg = NoiseConfig::long_fiber();
        assert!((sifted_true_rate(&cfg, 1.0) - 0.7).abs() < 1e-12);
        let full = accidental_qber_contribution(&cfg, 1.0);
        assert!((full - 0.012 / 0.724).abs() < 1e-12);
        assert!((expected_qber(&cfg, 0.0) - 0.5).abs() < 1e-15);
        assert!((accidental_qber_contribution(&cfg, 0.0) - 0.5).abs() < 1e-15);
        let lo = accidental_qber_contribution(&cfg, 0.5);
        let hi = accidental_qber_contribution(&cfg, 0.25);
        assert!((lo - 0.012 / 0.374).abs() < 1e-12);
        assert!((hi - 0.012 / 0.199).abs() < 1e-12);
    }

    #[test]
    fn expected_qber_reduces_to_source_term_without_accidentals() {
        let cfg = NoiseConfig { singles_rate_hz: 0.0, outside_s_weight: 0.0, ..NoiseConfig::long_fiber() };
        assert!((expected_qber(&cfg, 0.3) - 0.04).abs() < 1e-15);
        let vis = NoiseConfig { visibility: 0.9, ..cfg };
        assert!((expected_qber(&vis, 0.3) - (0.9 * 0.04 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let good = NoiseConfig::long_fiber();
        assert!(good.validate().is_ok());
        assert!(NoiseConfig { pair_rate_hz: -1.0, ..good }.validate().is_err());
        assert!(NoiseConfig { source_error_prob: 1.5, ..good }.validate().is_err());
        assert!(NoiseConfig { visibility: 0.0, ..good }.validate().is_err());
        assert!(NoiseConfig { apparatus_efficiency: f64::NAN, ..good }.validate().is_err());
    }

    #[test]
    fn noiseless_identity_session() {
        let t = simulate_session(&NoiseConfig::noiseless(), &RotatorSetting::sweep(0), Scheme::None, 20.0, 1).unwrap();
        assert!(t.is_consistent());
        assert!(t.sifted > 1000);
        assert_eq!(t.errors, 0);
        assert_eq!(t.p_s(), Some(1.0));
    }

    #[test]
    fn session_is_deterministic() {
        let cfg = NoiseConfig::short_fiber();
        let a = simulate_session(&cfg, &RotatorSetting::sweep(2), Scheme::FlipHalf, 30.0, 99).unwrap();
        let b = simulate_session(&cfg, &RotatorSetting::sweep(2), Scheme::FlipHalf, 30.0, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_session(&cfg, &RotatorSetting::sweep(2), Scheme::FlipHalf, 30.0, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_duration_rejected() {
        let cfg = NoiseConfig::short_fiber();
        assert!(simulate_session(&cfg, &RotatorSetting::sweep(0), Scheme::None, 0.0, 1).is_err());
        assert!(simulate_session(&cfg, &RotatorSetting::sweep(0), Scheme::None, f64::NAN, 1).is_err());
    }

    #[test]
    fn visibility_examples() {
        assert!((visibility_envelope(0.0, 1.6, 702.0).unwrap() - 0.95).abs() < 1e-15);
        assert!((coherence_length_um(1.6, 702.0) - 308.0025).abs() < 1e-9);
        assert_eq!(visibility_envelope(f64::INFINITY, 1.6, 702.0).unwrap(), 0.0);
        assert!(visibility_envelope(1e6, 1.6, 702.0).unwrap() < 1e-12);
        assert!(visibility_envelope(0.0, 0.0, 702.0).is_err());
    }

    #[test]
    fn tally_merge_is_additive() {
        let a = TallyCounts { rounds: 3, conclusive: 2, sifted: 1, errors: 1, duration_s: 1.5, ..Default::default() };
        let b = TallyCounts { rounds: 5, conclusive: 4, sifted: 2, errors: 0, duration_s: 0.5, ..Default::default() };
        let s = a + b;
        assert_eq!((s.rounds, s.conclusive, s.sifted, s.errors), (8, 6, 3, 1));
        assert_eq!(s.duration_s, 2.0);
        assert_eq!(s.qber(), Some(1.0 / 3.0));
    }
}
