//! Two-photon polarization ⊗ time-bin state space.
//!
//! Each photon lives in a six-dimensional space spanned by a polarization
//! (`H` or `V`) and a time bin counted in units of the tag delay `T`
//! (0, `T` or `2T`). A pair is an ordered product of two such spaces, so a
//! [`PairState`] carries 36 complex amplitudes. Photon 1 is always the early
//! photon of the pair label.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_BIN: u8 = 2;
pub const MODE_DIM: usize = 6;
pub const PAIR_DIM: usize = MODE_DIM * MODE_DIM;

/// Tolerance applied to normalization checks.
pub const NORM_TOL: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub const ALL: [Pol; 2] = [Pol::H, Pol::V];

    fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }

    pub fn flipped(self) -> Pol {
        match self {
            Pol::H => Pol::V,
            Pol::V => Pol::H,
        }
    }
}

/// Single-photon mode: polarization plus the number of tag delays picked up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonMode {
    pol: Pol,
    bin: u8,
}

impl PhotonMode {
    pub fn new(pol: Pol, bin: u8) -> Result<Self> {
        if bin > MAX_BIN {
            return Err(Error::BinOutOfRange(bin));
        }
        Ok(PhotonMode { pol, bin })
    }

    pub const fn h(bin: u8) -> Self {
        assert!(bin <= MAX_BIN);
        PhotonMode { pol: Pol::H, bin }
    }

    pub const fn v(bin: u8) -> Self {
        assert!(bin <= MAX_BIN);
        PhotonMode { pol: Pol::V, bin }
    }

    pub fn pol(self) -> Pol {
        self.pol
    }

    pub fn bin(self) -> u8 {
        self.bin
    }

    pub fn index(self) -> usize {
        self.pol.index() * 3 + self.bin as usize
    }

    pub fn from_index(i: usize) -> Self {
        let pol = if i < 3 { Pol::H } else { Pol::V };
        PhotonMode { pol, bin: (i % 3) as u8 }
    }

    pub fn all() -> impl Iterator<Item = PhotonMode> {
        (0..MODE_DIM).map(PhotonMode::from_index)
    }
}

impl fmt::Display for PhotonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.pol, self.bin)
    }
}

/// Ordered (early photon, late photon) mode assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModePair(pub PhotonMode, pub PhotonMode);

impl ModePair {
    pub fn index(self) -> usize {
        self.0.index() * MODE_DIM + self.1.index()
    }

    pub fn from_index(i: usize) -> Self {
        ModePair(PhotonMode::from_index(i / MODE_DIM), PhotonMode::from_index(i % MODE_DIM))
    }

    pub fn all() -> impl Iterator<Item = ModePair> {
        (0..PAIR_DIM).map(ModePair::from_index)
    }

    /// Both photons carry the same number of tags, i.e. they arrive with
    /// exactly the pair-label separation.
    pub fn equal_bins(self) -> bool {
        self.0.bin == self.1.bin
    }
}

impl fmt::Display for ModePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}⟩", self.0, self.1)
    }
}

/// 2×2 complex matrix acting on polarization, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[C1, C0], [C0, C1]]);

    pub fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Mat2([[m00, m01], [m10, m11]])
    }

    pub fn real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Mat2::new(m00.into(), m01.into(), m10.into(), m11.into())
    }

    pub fn diag(d0: Complex64, d1: Complex64) -> Self {
        Mat2::new(d0, C0, C0, d1)
    }

    /// `diag(1, e^{iφ})`.
    pub fn phase(phi: f64) -> Self {
        Mat2::diag(C1, Complex64::from_polar(1.0, phi))
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Mat2::real(s, s, s, -s)
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[C0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    pub fn adjoint(&self) -> Mat2 {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn scale(&self, s: Complex64) -> Mat2 {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Largest absolute entry of `U†U − I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { C1 } else { C0 };
                worst = worst.max((p.0[i][j] - target).norm());
            }
        }
        worst
    }

    pub fn ensure_unitary(&self, tol: f64) -> Result<()> {
        let dev = self.unitarity_deviation();
        if dev > tol || !dev.is_finite() {
            Err(Error::NotUnitary(dev))
        } else {
            Ok(())
        }
    }

    pub fn approx_eq(&self, other: &Mat2, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (self.0[i][j] - other.0[i][j]).norm() <= tol))
    }
}

/// Which photon(s) a local operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    First,
    Second,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Normalized,
    Subnormalized,
}

/// Pure two-photon state as a flat amplitude vector indexed by [`ModePair`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    amps: [Complex64; PAIR_DIM],
    norm_kind: NormKind,
}

impl PairState {
    /// Builds a normalized state from explicit amplitudes. Repeated mode pairs
    /// accumulate.
    pub fn pure<I>(assignments: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ModePair, Complex64)>,
    {
        let mut amps = [C0; PAIR_DIM];
        for (modes, a) in assignments {
            amps[modes.index()] += a;
        }
        Self::from_amplitudes(amps)?.normalized()
    }

    /// Takes ownership of a raw amplitude vector without rescaling it. The
    /// state is flagged normalized when its squared norm is 1 within
    /// [`NORM_TOL`].
    pub fn from_amplitudes(amps: [Complex64; PAIR_DIM]) -> Result<Self> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroState);
        }
        let norm_kind = if (n - 1.0).abs() <= NORM_TOL {
            NormKind::Normalized
        } else {
            NormKind::Subnormalized
        };
        Ok(PairState { amps, norm_kind })
    }

    pub fn amplitudes(&self) -> &[Complex64; PAIR_DIM] {
        &self.amps
    }

    pub fn amplitude(&self, modes: ModePair) -> Complex64 {
        self.amps[modes.index()]
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn is_normalized(&self) -> bool {
        self.norm_kind == NormKind::Normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroState);
        }
        let s = 1.0 / n.sqrt();
        let mut amps = self.amps;
        amps.iter_mut().for_each(|a| *a *= s);
        Ok(PairState { amps, norm_kind: NormKind::Normalized })
    }

    /// Applies a polarization unitary to one or both photons; time bins are
    /// untouched.
    pub fn apply_pol_unitary(&self, u: &Mat2, target: Target) -> Result<Self> {
        u.ensure_unitary(1e-10)?;
        Ok(self.apply_local(u, target))
    }

    /// Local polarization action without the unitarity check. Used for
    /// projective basis changes that are known to be unitary.
    pub(crate) fn apply_local(&self, u: &Mat2, target: Target) -> Self {
        let mut out = self.clone();
        if matches!(target, Target::First | Target::Both) {
            out.amps = act_on_photon(&out.amps, u, 0);
        }
        if matches!(target, Target::Second | Target::Both) {
            out.amps = act_on_photon(&out.amps, u, 1);
        }
        out
    }

    /// Delays every component of polarization `pol` by one bin, on both
    /// photons.
    pub fn tag(&self, pol: Pol) -> Result<Self> {
        let mut amps = [C0; PAIR_DIM];
        for (i, &a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let ModePair(m1, m2) = ModePair::from_index(i);
            let shifted = ModePair(delay(m1, pol)?, delay(m2, pol)?);
            amps[shifted.index()] += a;
        }
        Ok(PairState { amps, norm_kind: self.norm_kind })
    }

    /// Zeroes every amplitude outside `modes`. Returns the kept part (not
    /// rescaled) and its weight. A zero-weight projection returns the empty
    /// vector flagged subnormalized.
    pub fn project(&self, modes: &[ModePair]) -> (PairState, f64) {
        let mut amps = [C0; PAIR_DIM];
        for m in modes {
            amps[m.index()] = self.amps[m.index()];
        }
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let norm_kind = if (p - 1.0).abs() <= NORM_TOL {
            NormKind::Normalized
        } else {
            NormKind::Subnormalized
        };
        (PairState { amps, norm_kind }, p.min(1.0))
    }

    /// Projection onto every mode pair whose photons share a time bin.
    pub fn project_equal_bins(&self) -> (PairState, f64) {
        let modes: Vec<ModePair> = ModePair::all().filter(|m| m.equal_bins()).collect();
        self.project(&modes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PairState) -> Complex64 {
        self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &PairState) -> Result<f64> {
        if !self.is_normalized() || !other.is_normalized() {
            return Err(Error::Subnormalized);
        }
        Ok(self.inner(other).norm_sqr().min(1.0))
    }

    pub fn scaled(&self, s: Complex64) -> Result<Self> {
        let mut amps = self.amps;
        amps.iter_mut().for_each(|a| *a *= s);
        Self::from_amplitudes(amps)
    }

    /// Largest absolute amplitude difference.
    pub fn max_abs_diff(&self, other: &PairState) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Nonzero components, for display and debugging.
    pub fn support(&self, tol: f64) -> Vec<(ModePair, Complex64)> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(i, &a)| (ModePair::from_index(i), a))
            .collect()
    }
}

impl fmt::Display for PairState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.support(1e-12);
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, a)) in terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.4}{:+.4}i){}", a.re, a.im, m)?;
        }
        Ok(())
    }
}

fn delay(m: PhotonMode, pol: Pol) -> Result<PhotonMode> {
    if m.pol != pol {
        return Ok(m);
    }
    if m.bin >= MAX_BIN {
        return Err(Error::BinOverflow);
    }
    Ok(PhotonMode { pol: m.pol, bin: m.bin + 1 })
}

fn act_on_photon(amps: &[Complex64; PAIR_DIM], u: &Mat2, photon: usize) -> [Complex64; PAIR_DIM] {
    let mut out = [C0; PAIR_DIM];
    for (i, &a) in amps.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let ModePair(m1, m2) = ModePair::from_index(i);
        let src = if photon == 0 { m1 } else { m2 };
        for to in Pol::ALL {
            let coef = u.0[to.index()][src.pol.index()];
            if coef.norm_sqr() == 0.0 {
                continue;
            }
            let moved = PhotonMode { pol: to, bin: src.bin };
            let pair = if photon == 0 { ModePair(moved, m2) } else { ModePair(m1, moved) };
            out[pair.index()] += coef * a;
        }
    }
    out
}

/// Density operator over the 36-dimensional pair space.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDensity {
    matrix: DMatrix<Complex64>,
}

impl PairDensity {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != PAIR_DIM || matrix.ncols() != PAIR_DIM {
            return Err(Error::DimensionMismatch { expected: PAIR_DIM, got: matrix.nrows().max(matrix.ncols()) });
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = matrix.trace().re;
        if !(tr > 0.0 && tr <= 1.0 + NORM_TOL) {
            return Err(Error::InvalidDensity(format!("trace {tr} outside (0, 1]")));
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(PairDensity { matrix })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_state(s: &PairState) -> Self {
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        PairDensity { matrix: &v * v.adjoint() }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `⟨row|ρ|col⟩`.
    pub fn element(&self, row: ModePair, col: ModePair) -> Complex64 {
        self.matrix[(row.index(), col.index())]
    }

    /// `(U⊗U) ρ (U⊗U)†` with `U` acting on polarization of both photons.
    pub fn conjugate_local(&self, u: &Mat2) -> Result<Self> {
        u.ensure_unitary(1e-10)?;
        let op = local_operator(u);
        Ok(PairDensity { matrix: &op * &self.matrix * op.adjoint() })
    }

    pub fn max_hermitian_deviation(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Weighted sum of densities. Weights must be nonnegative and sum to at most 1.
pub fn density_average(states: &[(PairDensity, f64)]) -> Result<PairDensity> {
    if states.is_empty() {
        return Err(Error::InvalidWeights("empty mixture".into()));
    }
    let mut total = 0.0;
    let mut acc = DMatrix::<Complex64>::zeros(PAIR_DIM, PAIR_DIM);
    for (rho, w) in states {
        if w.is_nan() || *w < 0.0 {
            return Err(Error::InvalidWeights(format!("negative weight {w}")));
        }
        let m = rho.matrix();
        if m.nrows() != PAIR_DIM || m.ncols() != PAIR_DIM {
            return Err(Error::DimensionMismatch { expected: PAIR_DIM, got: m.nrows() });
        }
        total += w;
        acc += m * Complex64::from(*w);
    }
    if total > 1.0 + NORM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    Ok(PairDensity { matrix: acc })
}

fn local_operator(u: &Mat2) -> DMatrix<Complex64> {
    DMatrix::from_fn(PAIR_DIM, PAIR_DIM, |row, col| {
        let ModePair(r1, r2) = ModePair::from_index(row);
        let ModePair(c1, c2) = ModePair::from_index(col);
        if r1.bin != c1.bin || r2.bin != c2.bin {
            return C0;
        }
        u.0[r1.pol.index()][c1.pol.index()] * u.0[r2.pol.index()][c2.pol.index()]
    })
}
