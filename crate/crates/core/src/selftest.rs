//! Built-in invariant suites, run by `dfsqkd selftest`.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{delta_params, randomized_survival, survival_probability, CollectiveRotation, DeltaParams, RotatorSetting, Scheme};
use crate::hilbert::{ModePair, PairDensity, PairState, PhotonMode, Pol, Target};
use crate::protocol::{
    dephase, max_s_coherence, outside_s_modes_before_tag, prepare, run_round, s_modes_before_tag, LogicalState, RoundParams,
};
use crate::security::binary_entropy;

const SEED: u64 = 0x5e1f_7e57;
const TOL: f64 = 1e-10;

/// Source of δ parameters. Swappable so a broken implementation can be fed
/// to the suites.
pub type DeltaFn = fn(&CollectiveRotation) -> DeltaParams;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {}  {:>8.3} s  {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub fn all_passed(results: &[SuiteResult]) -> bool {
    results.iter().all(|r| r.passed)
}

pub fn run_all() -> Vec<SuiteResult> {
    run_with(delta_params)
}

pub fn run_with(delta: DeltaFn) -> Vec<SuiteResult> {
    vec![
        timed("delta_norm", || delta_norm(delta, 1000)),
        timed("expansion", || expansion(delta, 100)),
        timed("dfs_preservation", || dfs_preservation(50)),
        timed("haar_average", || haar_average(100_000)),
        timed("dephasing", || dephasing(20)),
        timed("oracle_agreement", oracle_agreement),
    ]
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> SuiteResult {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    match out {
        Ok(detail) => SuiteResult { name, passed: true, detail, elapsed },
        Err(detail) => SuiteResult { name, passed: false, detail, elapsed },
    }
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ salt)
}

pub fn delta_norm(delta: DeltaFn, samples: usize) -> Result<String, String> {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = CollectiveRotation::haar_sample(&mut r);
        worst = worst.max((delta(&u).norm_sqr_sum() - 1.0).abs());
    }
    if worst <= TOL {
        Ok(format!("max |Σ‖δ‖² − 1| = {worst:.2e} over {samples} rotations"))
    } else {
        Err(format!("δ norm off by {worst:.3e}"))
    }
}

pub fn expansion(delta: DeltaFn, samples: usize) -> Result<String, String> {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = CollectiveRotation::haar_sample(&mut r);
        for l in LogicalState::ALL {
            let (alpha, beta) = l.amplitudes();
            let evolved = prepare(l)
                .tag(Pol::V)
                .and_then(|s| s.apply_pol_unitary(&u.matrix(), Target::Both))
                .and_then(|s| s.tag(Pol::H))
                .map_err(|e| e.to_string())?;
            let expected = delta(&u).expanded_state(alpha, beta).map_err(|e| e.to_string())?;
            worst = worst.max(evolved.max_abs_diff(&expected));
        }
    }
    if worst <= TOL {
        Ok(format!("max coefficient deviation {worst:.2e}"))
    } else {
        Err(format!("expansion mismatch {worst:.3e}"))
    }
}

/// The logical state moved into bin 1, where the equal-bin term lands.
fn shifted(l: LogicalState) -> PairState {
    let (alpha, beta) = l.amplitudes();
    PairState::pure([
        (ModePair(PhotonMode::h(1), PhotonMode::v(1)), alpha),
        (ModePair(PhotonMode::v(1), PhotonMode::h(1)), beta),
    ])
    .expect("nonzero")
}

pub fn dfs_preservation(samples: usize) -> Result<String, String> {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = CollectiveRotation::haar_sample(&mut r);
        for l in LogicalState::ALL {
            let out = prepare(l)
                .tag(Pol::V)
                .and_then(|s| s.apply_pol_unitary(&u.matrix(), Target::Both))
                .and_then(|s| s.tag(Pol::H))
                .map_err(|e| e.to_string())?;
            let (kept, weight) = out.project_equal_bins();
            if weight < 1e-9 {
                continue;
            }
            let f = kept.normalized().and_then(|k| k.fidelity(&shifted(l))).map_err(|e| e.to_string())?;
            worst = worst.max((f - 1.0).abs());
        }
    }
    if worst > TOL {
        return Err(format!("post-selected fidelity off by {worst:.3e}"));
    }

    let mut errors = 0u64;
    let mut sifted = 0u64;
    for _ in 0..2000 {
        let u = CollectiveRotation::haar_sample(&mut r);
        let params = RoundParams::ideal(u, Scheme::FlipHalf);
        let rec = run_round(&params, &mut r).map_err(|e| e.to_string())?;
        if rec.outcome.conclusive && rec.outcome.basis_used == rec.alice.basis() {
            sifted += 1;
            errors += (rec.outcome.bit != Some(rec.alice.bit())) as u64;
        }
    }
    if errors > 0 {
        return Err(format!("noiseless protocol made {errors} errors in {sifted} sifted rounds"));
    }
    Ok(format!("fidelity deviation {worst:.2e}; 0 errors in {sifted} sifted rounds"))
}

pub fn haar_average(samples: usize) -> Result<String, String> {
    let mut r = rng(4);
    let mean = (0..samples).map(|_| survival_probability(&CollectiveRotation::haar_sample(&mut r))).sum::<f64>()
        / samples as f64;
    if (mean - 1.0 / 3.0).abs() > 0.005 {
        return Err(format!("Haar mean survival {mean:.5}"));
    }
    for _ in 0..1000 {
        let p = randomized_survival(&CollectiveRotation::haar_sample(&mut r), Scheme::FlipHalf);
        if !(0.25 - 1e-12..=0.5 + 1e-12).contains(&p) {
            return Err(format!("flip_half survival {p} outside [1/4, 1/2]"));
        }
    }
    let hi = randomized_survival(&CollectiveRotation::identity(), Scheme::FlipHalf);
    let lo = randomized_survival(&CollectiveRotation::from_waveplates(&RotatorSetting::sweep(2)), Scheme::FlipHalf);
    if (hi - 0.5).abs() > 1e-12 || (lo - 0.25).abs() > 1e-12 {
        return Err(format!("flip_half endpoints {lo}, {hi}"));
    }
    Ok(format!("mean survival {mean:.5}; flip_half spans [{lo:.6}, {hi:.6}]"))
}

pub fn dephasing(samples: usize) -> Result<String, String> {
    let mut r = rng(5);
    let modes: Vec<ModePair> = s_modes_before_tag().into_iter().chain(outside_s_modes_before_tag()).collect();
    let mut worst = 0.0f64;
    let mut before = 0.0f64;
    for _ in 0..samples {
        let state = PairState::pure(
            modes.iter().map(|&m| (m, Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))),
        )
        .map_err(|e| e.to_string())?;
        let rho = PairDensity::from_state(&state);
        before = before.max(max_s_coherence(&rho));
        let avg = dephase(&rho).map_err(|e| e.to_string())?;
        worst = worst.max(max_s_coherence(&avg));
    }
    if worst <= 1e-12 {
        Ok(format!("S/outside coherence {before:.3} -> {worst:.2e}"))
    } else {
        Err(format!("coherence survives dephasing: {worst:.3e}"))
    }
}

/// Cross-checks against closed forms computed without the library types.
pub fn oracle_agreement() -> Result<String, String> {
    for k in 0..5 {
        let u = CollectiveRotation::from_waveplates(&RotatorSetting::sweep(k));
        let want = (k as f64 * PI / 8.0).cos().powi(2);
        if (u.a().norm_sqr() - want).abs() > TOL {
            return Err(format!("sweep({k}) |a|² = {}, expected {want}", u.a().norm_sqr()));
        }
    }
    for &p in &[0.01, 0.102, 0.3, 0.5] {
        let want = -(p * f64::ln(p) + (1.0 - p) * f64::ln(1.0 - p)) / std::f64::consts::LN_2;
        let got = binary_entropy(p).map_err(|e| e.to_string())?;
        if (got - want).abs() > 1e-14 {
            return Err(format!("H({p}) = {got}, expected {want}"));
        }
    }
    Ok("waveplate sweep and entropy match closed forms".into())
}
