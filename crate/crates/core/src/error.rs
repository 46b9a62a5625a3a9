use thiserror::Error;

/// Errors raised by the physics modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("four-vector {0:?} is not timelike")]
    NotTimelike([f64; 4]),
    #[error("four-vector {0:?} is not future-pointing")]
    NotFuturePointing([f64; 4]),
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("momentum is off shell: p.p = {found}, expected m^2 = {expected}")]
    OffShell { found: f64, expected: f64 },
    #[error("axis must be a unit 3-vector, |axis| = {0}")]
    NonUnitAxis(f64),
    #[error("states live in different Hilbert spaces: p1 = {0:?}, p2 = {1:?}")]
    MomentumMismatch([f64; 4], [f64; 4]),
    #[error("measurement direction not orthogonal to the 4-velocity: n.u = {0}")]
    NotOrthogonal(f64),
    #[error("measurement direction not normalized: n.n = {0}, expected -1")]
    NotNormalized(f64),
    #[error("Stern-Gerlach field magnitude must be positive")]
    ZeroField,
    #[error("invalid Stern-Gerlach configuration: {0}")]
    InvalidConfig(String),
    #[error("trajectory integration left numerical sanity bounds at tau = {0}")]
    IntegrationError(f64),
    #[error("packet never reached the detector plane within {0} steps")]
    DetectorNotReached(usize),
    #[error("design matrix is rank deficient: rank = {rank}, need 3")]
    RankDeficient { rank: usize },
    #[error("record {index} has unknown momentum; reconstruction requires known momenta")]
    UnknownMomentum { index: usize },
    #[error("need at least 3 measurement records, got {0}")]
    TooFewRecords(usize),
    #[error("Bloch vector has |r| = {0} > 1")]
    BlochOverflow(f64),
    #[error("spinor amplitude must be nonzero")]
    ZeroAmplitude,
}

pub type Result<T> = std::result::Result<T, Error>;
