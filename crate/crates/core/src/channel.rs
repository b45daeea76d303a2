//! Collective polarization rotations.
//!
//! A collective rotation is one SU(2) matrix `[[a, −b*], [b, a*]]` applied to
//! the polarization of every photon in the fiber. It maps Alice's `{H, V}`
//! onto Bob's `{H′, V′}`. After Alice's V-tag, the rotation and Bob's H-tag,
//! the pair state splits into four terms whose weights are fixed by the
//! three δ-parameters computed in [`delta_params`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Mat2, ModePair, PairState, PhotonMode};

/// Special-unitary polarization rotation `[[a, −b*], [b, a*]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveRotation {
    a: Complex64,
    b: Complex64,
}

impl CollectiveRotation {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let n = a.norm_sqr() + b.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitary((n - 1.0).abs()));
        }
        Ok(CollectiveRotation { a, b })
    }

    pub fn identity() -> Self {
        CollectiveRotation { a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0) }
    }

    /// `H → V′`, `V → −H′`: a bit-flip with the phase that puts it in SU(2).
    pub fn bit_flip() -> Self {
        CollectiveRotation { a: Complex64::new(0.0, 0.0), b: Complex64::new(1.0, 0.0) }
    }

    /// Removes the global phase of a unitary so that its determinant is 1.
    pub fn from_unitary(u: &Mat2) -> Result<Self> {
        u.ensure_unitary(1e-10)?;
        let det = u.det();
        let s = det.sqrt().inv();
        let m = u.scale(s);
        let (a, b) = (m.0[0][0], m.0[1][0]);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        CollectiveRotation::new(a / n, b / n)
    }

    /// Euler-angle style constructor: `a = cos(θ/2)·e^{iψ}`, `b = sin(θ/2)·e^{iχ}`.
    pub fn from_angles(theta: f64, psi: f64, chi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        CollectiveRotation { a: Complex64::from_polar(c, psi), b: Complex64::from_polar(s, chi) }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.a, -self.b.conj(), self.b, self.a.conj())
    }

    /// `self · other`, i.e. `other` acts first.
    pub fn then_after(&self, other: &CollectiveRotation) -> Self {
        let (a1, b1, a2, b2) = (self.a, self.b, other.a, other.b);
        let a = a1 * a2 - b1.conj() * b2;
        let b = b1 * a2 + a1.conj() * b2;
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        CollectiveRotation { a: a / n, b: b / n }
    }

    /// Uniform (Haar) sample from SU(2) via a normalized Gaussian 4-vector.
    pub fn haar_sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let x: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-9 {
                return CollectiveRotation {
                    a: Complex64::new(x[0] / n, x[1] / n),
                    b: Complex64::new(x[2] / n, x[3] / n),
                };
            }
        }
    }

    pub fn from_waveplates(setting: &RotatorSetting) -> Self {
        let m = setting.jones();
        // Waveplate products are unitary by construction.
        CollectiveRotation::from_unitary(&m).expect("waveplate product is unitary")
    }
}

impl fmt::Display for CollectiveRotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={:.6}{:+.6}i b={:.6}{:+.6}i", self.a.re, self.a.im, self.b.re, self.b.im)
    }
}

/// Coefficients of the tagged-state expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaParams {
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
}

impl DeltaParams {
    pub fn norm_sqr_sum(&self) -> f64 {
        self.d1.norm_sqr() + self.d2.norm_sqr() + self.d3.norm_sqr()
    }

    /// `(δ₁+1)/2`: both photons tagged once, the original logical state.
    pub fn preserved(&self) -> Complex64 {
        (self.d1 + 1.0) / 2.0
    }

    /// `(δ₁−1)/2`: one photon untagged, the other tagged twice.
    pub fn double_tagged(&self) -> Complex64 {
        (self.d1 - 1.0) / 2.0
    }

    /// `(δ₂+δ₃)/2`: both photons end up H′.
    pub fn both_h(&self) -> Complex64 {
        (self.d2 + self.d3) / 2.0
    }

    /// `(δ₂−δ₃)/2`: both photons end up V′.
    pub fn both_v(&self) -> Complex64 {
        (self.d2 - self.d3) / 2.0
    }

    pub fn survival(&self) -> f64 {
        self.preserved().norm_sqr()
    }

    /// Assembles the four-term expansion for the input `α|HV⟩+β|VH⟩` directly
    /// from the δ coefficients, in Bob's frame after his tag.
    pub fn expanded_state(&self, alpha: Complex64, beta: Complex64) -> Result<PairState> {
        let (h, v) = (PhotonMode::h, PhotonMode::v);
        let mut amps = [Complex64::new(0.0, 0.0); crate::hilbert::PAIR_DIM];
        let mut put = |m: ModePair, z: Complex64| amps[m.index()] += z;
        put(ModePair(h(1), v(1)), self.preserved() * alpha);
        put(ModePair(v(1), h(1)), self.preserved() * beta);
        put(ModePair(v(0), h(2)), self.double_tagged() * alpha);
        put(ModePair(h(2), v(0)), self.double_tagged() * beta);
        put(ModePair(h(1), h(2)), self.both_h() * alpha);
        put(ModePair(h(2), h(1)), self.both_h() * beta);
        put(ModePair(v(0), v(1)), self.both_v() * alpha);
        put(ModePair(v(1), v(0)), self.both_v() * beta);
        PairState::from_amplitudes(amps)
    }
}

pub fn delta_params(u: &CollectiveRotation) -> DeltaParams {
    let (a, b) = (u.a, u.b);
    DeltaParams {
        d1: Complex64::from(a.norm_sqr() - b.norm_sqr()),
        d2: a.conj() * b - a * b.conj(),
        d3: -(a * b.conj() + a.conj() * b),
    }
}

/// Post-selection probability `‖(δ₁+1)/2‖² = |a|⁴`.
pub fn survival_probability(u: &CollectiveRotation) -> f64 {
    let a2 = u.a.norm_sqr();
    (a2 * a2).clamp(0.0, 1.0)
}

/// How the random `B⊗B` rotation between the two tags is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// No randomization.
    None,
    /// Identity or bit-flip with equal probability.
    FlipHalf,
    /// Haar-random SU(2).
    Haar,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::None, Scheme::FlipHalf, Scheme::Haar];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::FlipHalf => "flip_half",
            Scheme::Haar => "haar",
        }
    }

    pub fn draw_b<R: Rng + ?Sized>(self, rng: &mut R) -> CollectiveRotation {
        match self {
            Scheme::None => CollectiveRotation::identity(),
            Scheme::FlipHalf => {
                if rng.random_bool(0.5) {
                    CollectiveRotation::bit_flip()
                } else {
                    CollectiveRotation::identity()
                }
            }
            Scheme::Haar => CollectiveRotation::haar_sample(rng),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "flip_half" => Ok(Scheme::FlipHalf),
            "haar" => Ok(Scheme::Haar),
            other => Err(Error::InvalidConfig(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Survival probability averaged over the randomization `B`.
pub fn randomized_survival(u: &CollectiveRotation, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::None => survival_probability(u),
        Scheme::FlipHalf => {
            let a2 = u.a.norm_sqr();
            let b2 = u.b.norm_sqr();
            0.5 * (a2 * a2 + b2 * b2)
        }
        Scheme::Haar => 1.0 / 3.0,
    }
}

/// Angles of a QWP–HWP–QWP polarization rotator, in degrees. `qwp1` is the
/// plate the light meets first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatorSetting {
    pub qwp1_deg: f64,
    pub hwp_deg: f64,
    pub qwp2_deg: f64,
}

/// Fast-axis angle at which all three plates compose to the identity.
pub const CALIBRATED_AXIS_DEG: f64 = 45.0;

/// Step of the first quarter-wave plate between consecutive sweep settings.
pub const SWEEP_STEP_DEG: f64 = 22.5;

pub const SWEEP_LEN: usize = 5;

impl RotatorSetting {
    pub fn new(qwp1_deg: f64, hwp_deg: f64, qwp2_deg: f64) -> Result<Self> {
        let s = RotatorSetting { qwp1_deg, hwp_deg, qwp2_deg };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.qwp1_deg, self.hwp_deg, self.qwp2_deg].iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("rotator angles must be finite".into()))
        }
    }

    /// All plates aligned at the calibration axis.
    pub fn calibrated() -> Self {
        RotatorSetting { qwp1_deg: CALIBRATED_AXIS_DEG, hwp_deg: CALIBRATED_AXIS_DEG, qwp2_deg: CALIBRATED_AXIS_DEG }
    }

    /// Sweep setting `k` (0..=4): the first QWP turned by `k·22.5°` away from
    /// calibration. Gives `|a|² = cos²(kπ/8)`, from identity (k=0) to a
    /// collective bit-flip (k=4).
    pub fn sweep(k: usize) -> Self {
        let mut s = RotatorSetting::calibrated();
        s.qwp1_deg -= k as f64 * SWEEP_STEP_DEG;
        s
    }

    pub fn sweep_settings() -> Vec<RotatorSetting> {
        (0..SWEEP_LEN).map(RotatorSetting::sweep).collect()
    }

    /// Jones matrix of the rotator (light passes qwp1, then hwp, then qwp2).
    pub fn jones(&self) -> Mat2 {
        let q1 = quarter_wave(self.qwp1_deg.to_radians());
        let h = half_wave(self.hwp_deg.to_radians());
        let q2 = quarter_wave(self.qwp2_deg.to_radians());
        q2.mul(&h).mul(&q1)
    }
}

fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::real(c, s, -s, c)
}

/// Retarder with fast axis at `theta` and retardance `delta`.
fn retarder(theta: f64, delta: f64) -> Mat2 {
    let core = Mat2::diag(Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, delta));
    rotation(-theta).mul(&core).mul(&rotation(theta))
}

pub fn quarter_wave(theta: f64) -> Mat2 {
    retarder(theta, std::f64::consts::FRAC_PI_2)
}

pub fn half_wave(theta: f64) -> Mat2 {
    retarder(theta, std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn calibrated_rotator_is_identity() {
        let u = CollectiveRotation::from_waveplates(&RotatorSetting::calibrated());
        assert!((u.a().norm() - 1.0).abs() < 1e-12);
        assert!(u.b().norm() < 1e-12);
        // Aligned at 0° also composes to the identity.
        let u0 = CollectiveRotation::from_waveplates(&RotatorSetting::new(0.0, 0.0, 0.0).unwrap());
        assert!(u0.b().norm() < 1e-12);
    }

    #[test]
    fn last_sweep_setting_is_bit_flip() {
        let u = CollectiveRotation::from_waveplates(&RotatorSetting::sweep(4));
        assert!(u.a().norm() < 1e-12);
        assert!((u.b().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_spacing_matches_direct_jones_product() {
        for k in 0..SWEEP_LEN {
            let s = RotatorSetting::sweep(k);
            // Independent evaluation: explicit QWP/HWP matrices in closed form.
            let qwp = |t: f64| {
                let (c, sn) = (t.cos(), t.sin());
                let i = Complex64::i();
                Mat2::new(
                    c * c + i * sn * sn,
                    (1.0 - i) * sn * c,
                    (1.0 - i) * sn * c,
                    sn * sn + i * c * c,
                )
            };
            let hwp = |t: f64| {
                let (c2, s2) = ((2.0 * t).cos(), (2.0 * t).sin());
                Mat2::real(c2, s2, s2, -c2)
            };
            let m = qwp(s.qwp2_deg.to_radians())
                .mul(&hwp(s.hwp_deg.to_radians()))
                .mul(&qwp(s.qwp1_deg.to_radians()));
            let a2_direct = m.0[0][0].norm_sqr();
            let u = CollectiveRotation::from_waveplates(&s);
            let expect = (k as f64 * PI / 8.0).cos().powi(2);
            assert!((a2_direct - expect).abs() < 1e-12, "k={k}: {a2_direct} vs {expect}");
            assert!((u.a().norm_sqr() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn from_unitary_strips_global_phase() {
        let u = CollectiveRotation::from_angles(1.1, 0.3, -0.7);
        let phased = u.matrix().scale(Complex64::from_polar(1.0, 0.9));
        let back = CollectiveRotation::from_unitary(&phased).unwrap();
        // Up to the ±1 ambiguity of the square root.
        let same = back.matrix().approx_eq(&u.matrix(), 1e-12)
            || back.matrix().approx_eq(&u.matrix().scale((-1.0).into()), 1e-12);
        assert!(same);
        assert!((back.matrix().det() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn haar_is_deterministic_per_seed() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            assert_eq!(CollectiveRotation::haar_sample(&mut r1), CollectiveRotation::haar_sample(&mut r2));
        }
    }

    #[test]
    fn haar_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let (mut m2, mut m4) = (0.0, 0.0);
        for _ in 0..n {
            let a2 = CollectiveRotation::haar_sample(&mut rng).a().norm_sqr();
            m2 += a2;
            m4 += a2 * a2;
        }
        assert!((m2 / n as f64 - 0.5).abs() < 0.005);
        assert!((m4 / n as f64 - 1.0 / 3.0).abs() < 0.005);
    }

    #[test]
    fn delta_examples() {
        let id = delta_params(&CollectiveRotation::identity());
        assert_eq!((id.d1, id.d2, id.d3), (1.0.into(), 0.0.into(), Complex64::new(-0.0, 0.0)));
        assert!((id.survival() - 1.0).abs() < 1e-15);

        let flip = delta_params(&CollectiveRotation::bit_flip());
        assert!((flip.d1 + 1.0).norm() < 1e-15);
        assert!(flip.d2.norm() < 1e-15 && flip.d3.norm() < 1e-15);
        assert!(flip.survival() < 1e-15);

        let bal = delta_params(&CollectiveRotation::from_angles(PI / 2.0, 0.4, 1.3));
        assert!(bal.d1.norm() < 1e-12);
        assert!((bal.d2.norm_sqr() + bal.d3.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn survival_examples() {
        assert_eq!(survival_probability(&CollectiveRotation::identity()), 1.0);
        assert_eq!(survival_probability(&CollectiveRotation::bit_flip()), 0.0);
    }

    #[test]
    fn randomized_survival_examples() {
        let id = CollectiveRotation::identity();
        assert!((randomized_survival(&id, Scheme::FlipHalf) - 0.5).abs() < 1e-15);
        let bal = CollectiveRotation::from_angles(PI / 2.0, 0.0, 0.0);
        assert!((randomized_survival(&bal, Scheme::FlipHalf) - 0.25).abs() < 1e-15);
        assert_eq!(randomized_survival(&CollectiveRotation::bit_flip(), Scheme::None), 0.0);
        assert_eq!(randomized_survival(&bal, Scheme::Haar), 1.0 / 3.0);
    }

    #[test]
    fn composition_matches_matrix_product() {
        let u = CollectiveRotation::from_angles(0.7, 0.2, 1.9);
        let v = CollectiveRotation::from_angles(2.1, -1.0, 0.5);
        let uv = u.then_after(&v);
        assert!(uv.matrix().approx_eq(&u.matrix().mul(&v.matrix()), 1e-12));
    }

    #[test]
    fn scheme_parses() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
