//! Relativistic Stern-Gerlach spin toolkit.
//!
//! The crate builds up in layers: `lorentz` provides Minkowski vectors and
//! paired spin-1 / spin-1/2 Lorentz transformations, `spinor` the
//! momentum-indexed spin Hilbert spaces and their covariant spin observable,
//! `observable` the Stern-Gerlach field tensor and the measurement operator
//! it selects (plus two textbook rival operators for comparison), `wkbsim`
//! a semiclassical packet-splitting simulator, and `tomography` a spin-state
//! reconstruction pipeline that exposes the momentum dependence of the
//! measured direction. The `relsg` binary wraps all of it in a CLI.

pub mod error;
pub mod lorentz;
pub mod observable;
pub mod spinor;
pub mod tomography;
pub mod wkbsim;

pub use error::{Error, Result};
pub use lorentz::{FourVector, Generators, LorentzPair, PauliFourVector};
pub use observable::{FieldTensor, SGConfig};
pub use spinor::{SpinObservable, Spinor};

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
