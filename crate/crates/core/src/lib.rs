//! Simulator for entangled-photon QKD that needs no shared reference frame.
//!
//! Logical qubits live in a two-photon subspace built from polarization and
//! time bins. Collective polarization rotations of the channel leave the
//! post-selected part of that subspace untouched, so the key survives
//! arbitrary (slowly varying) birefringence at the price of a lower rate.
//!
//! Modules, bottom up:
//!
//! * [`hilbert`]: the 36-dimensional pair space, tagging, projection, densities.
//! * [`channel`]: SU(2) rotations, δ parameters, Haar sampling, waveplate optics.
//! * [`protocol`]: state preparation, tag/rotate/tag pipelines, measurement, p^S.
//! * [`detection`]: losses, accidentals and the seeded Monte Carlo session.
//! * [`security`]: key rate per conclusive result.
//! * [`harness`]: TOML configs, sweeps, CSV/JSON output.
//! * [`selftest`]: invariant suites behind `dfsqkd selftest`.
//!
//! Runnable walkthroughs sit in `examples/` (`cargo run --example <name>`).

pub mod channel;
pub mod detection;
pub mod error;
pub mod harness;
pub mod hilbert;
pub mod protocol;
pub mod security;
pub mod selftest;

pub use channel::{CollectiveRotation, DeltaParams, RotatorSetting, Scheme};
pub use detection::{NoiseConfig, TallyCounts};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, OutputFormat, Preset, SweepRow};
pub use hilbert::{ModePair, PairDensity, PairState, PhotonMode, Pol};
pub use protocol::{BasisChoice, LogicalState, PhaseMask};
pub use security::SecurityReport;
