//! The honest protocol at amplitude level.
//!
//! One round: Alice prepares one of four logical states on an entangled pair,
//! delays her V component by `T`, applies the random `B⊗B`, and the pair
//! crosses the collective-rotation channel. Bob applies the random phase mask
//! `M_φ⊗M_φ`, delays his H′ component by `T`, then measures in one of two
//! bases. Only pairs whose photons sit in the same time bin (arrival gap equal
//! to the pair label) can give a key bit.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{CollectiveRotation, Scheme};
use crate::detection::TallyCounts;
use crate::error::{Error, Result};
use crate::hilbert::{density_average, Mat2, ModePair, PairDensity, PairState, PhotonMode, Pol, Target, MAX_BIN};

/// The four BB84-like logical states `(|HV⟩ + β|VH⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalState {
    PsiPlus,
    PsiMinus,
    PsiPlusI,
    PsiMinusI,
}

impl LogicalState {
    pub const ALL: [LogicalState; 4] =
        [LogicalState::PsiPlus, LogicalState::PsiMinus, LogicalState::PsiPlusI, LogicalState::PsiMinusI];

    /// `(α, β)` with `|α|² + |β|² = 1`.
    pub fn amplitudes(self) -> (Complex64, Complex64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let beta = match self {
            LogicalState::PsiPlus => Complex64::new(1.0, 0.0),
            LogicalState::PsiMinus => Complex64::new(-1.0, 0.0),
            LogicalState::PsiPlusI => Complex64::new(0.0, 1.0),
            LogicalState::PsiMinusI => Complex64::new(0.0, -1.0),
        };
        (Complex64::new(s, 0.0), beta * s)
    }

    pub fn basis(self) -> BasisChoice {
        match self {
            LogicalState::PsiPlus | LogicalState::PsiMinus => BasisChoice::PlusMinus,
            LogicalState::PsiPlusI | LogicalState::PsiMinusI => BasisChoice::PlusMinusI,
        }
    }

    /// Key bit carried by the state: the `+` states encode 0.
    pub fn bit(self) -> u8 {
        match self {
            LogicalState::PsiPlus | LogicalState::PsiPlusI => 0,
            LogicalState::PsiMinus | LogicalState::PsiMinusI => 1,
        }
    }

    pub fn from_basis_bit(basis: BasisChoice, bit: u8) -> Self {
        match (basis, bit) {
            (BasisChoice::PlusMinus, 0) => LogicalState::PsiPlus,
            (BasisChoice::PlusMinus, _) => LogicalState::PsiMinus,
            (BasisChoice::PlusMinusI, 0) => LogicalState::PsiPlusI,
            (BasisChoice::PlusMinusI, _) => LogicalState::PsiMinusI,
        }
    }

    /// The orthogonal state of the same basis (logical bit flip).
    pub fn flipped(self) -> Self {
        LogicalState::from_basis_bit(self.basis(), 1 - self.bit())
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        LogicalState::ALL[rng.random_range(0..4)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisChoice {
    PlusMinus,
    PlusMinusI,
}

impl BasisChoice {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            BasisChoice::PlusMinusI
        } else {
            BasisChoice::PlusMinus
        }
    }

    /// Polarization transform Bob applies before the H/V analyzers: a phase
    /// plate on the early photon for the `±i` basis, then a Hadamard on each.
    fn analyzer(self) -> (Mat2, Mat2) {
        let h = Mat2::hadamard();
        match self {
            BasisChoice::PlusMinus => (h, h),
            BasisChoice::PlusMinusI => {
                let phase = Mat2::diag(Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0));
                (h.mul(&phase), h)
            }
        }
    }
}

/// Bob's random phase `diag(1, e^{iφ})` with `φ = k·π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseMask(u8);

impl PhaseMask {
    pub const ALL: [PhaseMask; 4] = [PhaseMask(0), PhaseMask(1), PhaseMask(2), PhaseMask(3)];

    pub fn new(quarter_turns: u8) -> Result<Self> {
        if quarter_turns < 4 {
            Ok(PhaseMask(quarter_turns))
        } else {
            Err(Error::InvalidConfig(format!("phase mask index {quarter_turns} not in 0..4")))
        }
    }

    pub fn phi(self) -> f64 {
        self.0 as f64 * FRAC_PI_2
    }

    pub fn matrix(self) -> Mat2 {
        // Exact entries avoid cos(π/2) round-off.
        let e = match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Mat2::diag(Complex64::new(1.0, 0.0), e)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        PhaseMask(rng.random_range(0..4))
    }
}

impl fmt::Display for PhaseMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "φ={}π/2", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub conclusive: bool,
    pub bit: Option<u8>,
    pub basis_used: BasisChoice,
    /// Diagnostic only; the parties never learn it.
    pub inside_s: bool,
}

impl RoundOutcome {
    pub fn inconclusive(basis: BasisChoice) -> Self {
        RoundOutcome { conclusive: false, bit: None, basis_used: basis, inside_s: false }
    }
}

pub fn prepare(l: LogicalState) -> PairState {
    let (alpha, beta) = l.amplitudes();
    PairState::pure([
        (ModePair(PhotonMode::h(0), PhotonMode::v(0)), alpha),
        (ModePair(PhotonMode::v(0), PhotonMode::h(0)), beta),
    ])
    .expect("logical states are nonzero")
}

/// V-tag, then `B⊗B`, then the channel rotation on both photons.
pub fn alice_pipeline(s: &PairState, b: &CollectiveRotation, channel: &CollectiveRotation) -> Result<PairState> {
    if s.support(0.0).iter().any(|(m, _)| m.0.bin() != 0 || m.1.bin() != 0) {
        return Err(Error::BinOverflow);
    }
    s.tag(Pol::V)?
        .apply_pol_unitary(&b.matrix(), Target::Both)?
        .apply_pol_unitary(&channel.matrix(), Target::Both)
}

/// `M_φ⊗M_φ`, then the H′-tag.
pub fn bob_pipeline(s: &PairState, mask: PhaseMask) -> Result<PairState> {
    s.apply_pol_unitary(&mask.matrix(), Target::Both)?.tag(Pol::H)
}

/// Pre-tag modes spanning the protected subspace: `|H′,V′_T⟩`, `|V′_T,H′⟩`.
pub fn s_modes_before_tag() -> [ModePair; 2] {
    [ModePair(PhotonMode::h(0), PhotonMode::v(1)), ModePair(PhotonMode::v(1), PhotonMode::h(0))]
}

/// Pre-tag modes that also post-select but lie outside S: `|H′H′⟩`, `|V′_TV′_T⟩`.
pub fn outside_s_modes_before_tag() -> [ModePair; 2] {
    [ModePair(PhotonMode::h(0), PhotonMode::h(0)), ModePair(PhotonMode::v(1), PhotonMode::v(1))]
}

/// Channel imperfection that moves a fraction `weight` of the post-selected
/// population out of S. Acts on the state just before Bob's mask and tag:
/// the S amplitudes shrink by `√(1−weight)` and an outside-S component of
/// matching weight with random relative phases is added. The norm is kept.
pub fn inject_outside_s<R: Rng + ?Sized>(s: &PairState, weight: f64, rng: &mut R) -> Result<PairState> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidProbability(weight));
    }
    if weight == 0.0 {
        return Ok(s.clone());
    }
    let mut amps = *s.amplitudes();
    let s_idx = s_modes_before_tag().map(|m| m.index());
    let s_weight: f64 = s_idx.iter().map(|&i| amps[i].norm_sqr()).sum();
    let keep = (1.0 - weight).sqrt();
    for &i in &s_idx {
        amps[i] *= keep;
    }
    let moved = (weight * s_weight).sqrt();
    let split = rng.random::<f64>() * FRAC_PI_2;
    let [hh, vv] = outside_s_modes_before_tag();
    let p1 = rng.random::<f64>() * std::f64::consts::TAU;
    let p2 = rng.random::<f64>() * std::f64::consts::TAU;
    amps[hh.index()] += Complex64::from_polar(moved * split.cos(), p1);
    amps[vv.index()] += Complex64::from_polar(moved * split.sin(), p2);
    PairState::from_amplitudes(amps)
}

/// Bob's uniform average over the four phase masks, at density level.
pub fn dephase(rho: &PairDensity) -> Result<PairDensity> {
    let terms = PhaseMask::ALL
        .iter()
        .map(|m| rho.conjugate_local(&m.matrix()).map(|r| (r, 0.25)))
        .collect::<Result<Vec<_>>>()?;
    density_average(&terms)
}

/// Largest `|ρ|` element linking S to the post-selected modes outside it,
/// or linking the two outside modes to each other.
pub fn max_s_coherence(rho: &PairDensity) -> f64 {
    let s = s_modes_before_tag();
    let out = outside_s_modes_before_tag();
    let mut worst = 0.0f64;
    for &i in &s {
        for &o in &out {
            worst = worst.max(rho.element(i, o).norm()).max(rho.element(o, i).norm());
        }
    }
    worst.max(rho.element(out[0], out[1]).norm()).max(rho.element(out[1], out[0]).norm())
}

/// Exact Born probabilities of a measurement on the post-tag state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbabilities {
    /// Coincident and same polarization after the analyzer (bit 0).
    pub same: f64,
    /// Coincident and different polarization after the analyzer (bit 1).
    pub different: f64,
    /// Coincident weight carried by `|H′_T V′_T⟩`, `|V′_T H′_T⟩` (and the
    /// same pattern in the other bins).
    pub inside_s: f64,
    /// Coincident weight in the same-polarization modes.
    pub outside_s: f64,
}

impl OutcomeProbabilities {
    pub fn conclusive(&self) -> f64 {
        self.same + self.different
    }
}

pub fn outcome_probabilities(s: &PairState, basis: BasisChoice) -> OutcomeProbabilities {
    let (coincident, _) = s.project_equal_bins();
    let (u1, u2) = basis.analyzer();
    let analyzed = coincident.apply_local(&u1, Target::First).apply_local(&u2, Target::Second);
    let mut out = OutcomeProbabilities { same: 0.0, different: 0.0, inside_s: 0.0, outside_s: 0.0 };
    for bin in 0..=MAX_BIN {
        for p1 in Pol::ALL {
            for p2 in Pol::ALL {
                let m = ModePair(PhotonMode::new(p1, bin).unwrap(), PhotonMode::new(p2, bin).unwrap());
                let w_after = analyzed.amplitude(m).norm_sqr();
                let w_before = coincident.amplitude(m).norm_sqr();
                if p1 == p2 {
                    out.same += w_after;
                    out.outside_s += w_before;
                } else {
                    out.different += w_after;
                    out.inside_s += w_before;
                }
            }
        }
    }
    out
}

/// Samples Bob's detector pattern. Same polarization decodes to 0, different
/// to 1. Output-splitting losses are accounted in the detection layer.
pub fn measure<R: Rng + ?Sized>(s: &PairState, basis: BasisChoice, rng: &mut R) -> RoundOutcome {
    let p = outcome_probabilities(s, basis);
    let u: f64 = rng.random();
    let bit = if u < p.same {
        0
    } else if u < p.same + p.different {
        1
    } else {
        return RoundOutcome::inconclusive(basis);
    };
    let total = p.inside_s + p.outside_s;
    let inside_s = total > 0.0 && rng.random::<f64>() * total < p.inside_s;
    RoundOutcome { conclusive: true, bit: Some(bit), basis_used: basis, inside_s }
}

/// Basis reconciliation: keeps conclusive rounds whose basis matches Alice's
/// and counts bit disagreements.
pub fn sift(alice: &[LogicalState], bob: &[RoundOutcome]) -> Result<TallyCounts> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch(alice.len(), bob.len()));
    }
    let mut t = TallyCounts { rounds: alice.len() as u64, ..TallyCounts::default() };
    for (a, b) in alice.iter().zip(bob) {
        if !b.conclusive {
            continue;
        }
        t.conclusive += 1;
        if b.basis_used != a.basis() {
            continue;
        }
        t.sifted += 1;
        if b.bit != Some(a.bit()) {
            t.errors += 1;
        }
    }
    Ok(t)
}

/// Test measurement in the tagged H′/V′ basis on a coincident pair. Returns
/// `None` when the pair does not produce a coincidence, otherwise whether the
/// outcome was `|H′_T V′_T⟩` or `|V′_T H′_T⟩`.
pub fn ps_test_measurement<R: Rng + ?Sized>(s: &PairState, rng: &mut R) -> Option<bool> {
    let p = outcome_probabilities(s, BasisChoice::PlusMinus);
    let u = rng.random::<f64>();
    if u < p.inside_s {
        Some(true)
    } else if u < p.inside_s + p.outside_s {
        Some(false)
    } else {
        None
    }
}

/// Fraction of coincident test pairs found inside S. States without any
/// coincident weight are not part of the coincident sample and are skipped.
pub fn estimate_ps<R: Rng + ?Sized>(rounds: &[PairState], rng: &mut R) -> Result<f64> {
    let (mut total, mut inside) = (0u64, 0u64);
    for s in rounds {
        let p = outcome_probabilities(s, BasisChoice::PlusMinus);
        let w = p.inside_s + p.outside_s;
        if w <= 0.0 {
            continue;
        }
        total += 1;
        if rng.random::<f64>() * w < p.inside_s {
            inside += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptySample);
    }
    Ok(inside as f64 / total as f64)
}

/// Per-round physics knobs shared by every round of a session.
#[derive(Debug, Clone, Copy)]
pub struct RoundParams {
    pub channel: CollectiveRotation,
    pub scheme: Scheme,
    pub source_error_prob: f64,
    pub outside_s_weight: f64,
    pub visibility: f64,
}

impl RoundParams {
    pub fn ideal(channel: CollectiveRotation, scheme: Scheme) -> Self {
        RoundParams { channel, scheme, source_error_prob: 0.0, outside_s_weight: 0.0, visibility: 1.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RoundRecord {
    /// What Alice believes she sent.
    pub alice: LogicalState,
    pub outcome: RoundOutcome,
}

/// Evolves one pair up to the state Bob's analyzers see.
fn evolve<R: Rng + ?Sized>(params: &RoundParams, sent: LogicalState, rng: &mut R) -> Result<PairState> {
    let b = params.scheme.draw_b(rng);
    let mask = PhaseMask::random(rng);
    let mut s = alice_pipeline(&prepare(sent), &b, &params.channel)?;
    if params.outside_s_weight > 0.0 {
        s = inject_outside_s(&s, params.outside_s_weight, rng)?;
    }
    bob_pipeline(&s, mask)
}

fn draw_sent<R: Rng + ?Sized>(params: &RoundParams, rng: &mut R) -> (LogicalState, LogicalState) {
    let alice = LogicalState::random(rng);
    let sent = if params.source_error_prob > 0.0 && rng.random_bool(params.source_error_prob) {
        alice.flipped()
    } else {
        alice
    };
    (alice, sent)
}

/// Simulates a key-generation round for a pair that reached Bob's detectors.
pub fn run_round<R: Rng + ?Sized>(params: &RoundParams, rng: &mut R) -> Result<RoundRecord> {
    let (alice, sent) = draw_sent(params, rng);
    let state = evolve(params, sent, rng)?;
    let basis = BasisChoice::random(rng);
    let mut outcome = measure(&state, basis, rng);
    if outcome.conclusive && params.visibility < 1.0 && !rng.random_bool(params.visibility) {
        outcome.bit = Some(rng.random_range(0..2));
    }
    Ok(RoundRecord { alice, outcome })
}

/// Simulates a p^S test round: `None` if the pair gives no coincidence.
pub fn run_ps_round<R: Rng + ?Sized>(params: &RoundParams, rng: &mut R) -> Result<Option<bool>> {
    let (_, sent) = draw_sent(params, rng);
    let state = evolve(params, sent, rng)?;
    Ok(ps_test_measurement(&state, rng))
}
