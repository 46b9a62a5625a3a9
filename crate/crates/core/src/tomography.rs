//! Spin-state tomography with momentum-dependent measurement directions.
//!
//! A Stern-Gerlach apparatus pointed along b measures, for a particle of
//! momentum p, the covariant observable whose axis n depends on p. Pulled
//! back to the particle rest frame through the standard boost, the
//! measurement is an ordinary qubit measurement along an effective unit
//! direction d(v, b, p). For a rest-frame Bloch vector r the predicted
//! mean is r.d, which is linear in r: three (or more) linearly independent
//! directions determine r by least squares. Reconstructing while naively
//! assuming d = b (ignoring the momentum dependence) produces large errors
//! for relativistic beams, which `reconstruct_naive` demonstrates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorentz::{FourVector, LorentzPair};
use crate::observable::{sg_operator, SGConfig};

/// A qubit density state given as a rest-frame Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub r: [f64; 3],
}

impl BlochState {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if n > 1.0 + 1e-12 {
            return Err(Error::BlochOverflow(n));
        }
        Ok(BlochState { r })
    }

    pub fn norm(&self) -> f64 {
        (self.r[0] * self.r[0] + self.r[1] * self.r[1] + self.r[2] * self.r[2]).sqrt()
    }
}

/// One tomography data point: apparatus configuration, particle momentum
/// (None = unknown), observed mean, and shot count (0 = exact mean).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Device 4-velocity.
    pub v: [f64; 4],
    /// Field direction 4-vector (unit spacelike, orthogonal to v).
    pub b_sg: [f64; 4],
    /// Particle momentum; None if unknown.
    pub p: Option<[f64; 4]>,
    /// Observed mean of the +/-1 outcomes.
    pub mean: f64,
    /// Number of shots behind the mean (0 = exact expectation).
    pub shots: u64,
}

impl MeasurementRecord {
    pub fn config(&self) -> Result<SGConfig> {
        SGConfig::new(FourVector(self.v), FourVector(self.b_sg), 1.0)
    }
}

/// The effective rest-frame measurement direction d(v, b, p): the
/// Stern-Gerlach axis n pulled back through the standard boost, a unit
/// 3-vector.
pub fn effective_direction(cfg: &SGConfig, p: &FourVector, m: f64) -> Result<[f64; 3]> {
    let obs = sg_operator(cfg, p, m)?;
    let back = LorentzPair::standard_boost(p, m)?.inverse();
    let n_rest = back.apply(&obs.n);
    let d = n_rest.spatial();
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    Ok([d[0] / n, d[1] / n, d[2] / n])
}

/// Predicted mean r.d for a Bloch state measured by the given apparatus.
pub fn predict_mean(
    state: &BlochState,
    cfg: &SGConfig,
    p: &FourVector,
    m: f64,
) -> Result<f64> {
    let d = effective_direction(cfg, p, m)?;
    Ok(state.r[0] * d[0] + state.r[1] * d[1] + state.r[2] * d[2])
}

/// Result of a least-squares reconstruction.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub state: BlochState,
    /// Norm of the residual mean_k - r.d_k.
    pub residual: f64,
    /// Numerical rank of the stacked direction rows (singular values above
    /// 1e-10).
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

const SVD_CUTOFF: f64 = 1e-10;

fn least_squares(rows: &[[f64; 3]], means: &[f64]) -> Result<Reconstruction> {
    let n = rows.len();
    let mut a = DMatrix::zeros(n, 3);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..3 {
            a[(i, j)] = row[j];
        }
    }
    let y = DVector::from_row_slice(means);
    let svd = a.clone().svd(true, true);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > SVD_CUTOFF)
        .count();
    let sol = svd
        .solve(&y, SVD_CUTOFF)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let r = [sol[0], sol[1], sol[2]];
    let residual = (a * &sol - y).norm();
    let recon = Reconstruction {
        // Noisy data can push |r| slightly past 1; keep the raw solution
        // but report it through the validated type when possible.
        state: BlochState { r },
        residual,
        rank,
        singular_values: svd.singular_values.iter().copied().collect(),
    };
    if rank < 3 {
        return Err(Error::RankDeficient { rank });
    }
    Ok(recon)
}

/// Reconstructs the Bloch vector from measurement records with known
/// momenta, using the momentum-corrected effective directions.
pub fn reconstruct(records: &[MeasurementRecord], m: f64) -> Result<Reconstruction> {
    if records.len() < 3 {
        return Err(Error::TooFewRecords(records.len()));
    }
    let mut rows = Vec::with_capacity(records.len());
    let mut means = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let p = rec.p.ok_or(Error::UnknownMomentum { index: i })?;
        let cfg = rec.config()?;
        rows.push(effective_direction(&cfg, &FourVector(p), m)?);
        means.push(rec.mean);
    }
    least_squares(&rows, &means)
}

/// Reconstructs while wrongly assuming the measurement direction is the
/// device-frame apparatus direction b (no momentum correction). This is
/// the textbook non-relativistic procedure; for relativistic beams it
/// recovers the wrong state.
pub fn reconstruct_naive(records: &[MeasurementRecord], _m: f64) -> Result<Reconstruction> {
    if records.len() < 3 {
        return Err(Error::TooFewRecords(records.len()));
    }
    let mut rows = Vec::with_capacity(records.len());
    let mut means = Vec::with_capacity(records.len());
    for rec in records {
        let cfg = rec.config()?;
        rows.push(cfg.device_frame_direction());
        means.push(rec.mean);
    }
    least_squares(&rows, &means)
}

/// Forward-models one record: exact mean for shots = 0, otherwise the
/// empirical mean of `shots` Bernoulli outcomes drawn with a seeded
/// generator.
pub fn simulate_record(
    state: &BlochState,
    cfg: &SGConfig,
    p: &FourVector,
    m: f64,
    shots: u64,
    seed: u64,
) -> Result<MeasurementRecord> {
    let exact = predict_mean(state, cfg, p, m)?;
    let mean = if shots == 0 {
        exact
    } else {
        let prob_plus = (1.0 + exact) / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0i64;
        for _ in 0..shots {
            sum += if rng.gen::<f64>() < prob_plus { 1 } else { -1 };
        }
        sum as f64 / shots as f64
    };
    Ok(MeasurementRecord {
        v: cfg.device_velocity.0,
        b_sg: cfg.field_direction.0,
        p: Some(p.0),
        mean,
        shots,
    })
}

/// One row of the momentum-sensitivity scan.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityRow {
    pub rapidity: f64,
    /// Mean per apparatus direction, in input order.
    pub means: Vec<f64>,
}

/// Output of `momentum_sensitivity_experiment`.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityTable {
    pub rows: Vec<SensitivityRow>,
    /// Per-direction spread (max - min over the momentum grid).
    pub spread: Vec<f64>,
}

/// Scans predict_mean over a grid of particle rapidities (boost along
/// `boost_axis`) for fixed apparatus settings, reporting how much of the
/// observed mean is attributable to the unknown momentum.
pub fn momentum_sensitivity_experiment(
    state: &BlochState,
    cfg: &SGConfig,
    directions: &[SGConfig],
    boost_axis: [f64; 3],
    rapidities: &[f64],
    m: f64,
) -> Result<SensitivityTable> {
    let _ = cfg;
    let mut rows = Vec::with_capacity(rapidities.len());
    for &eta in rapidities {
        let boost = LorentzPair::boost(boost_axis, eta)?;
        let p = boost.apply(&FourVector::new(m, 0.0, 0.0, 0.0));
        let mut means = Vec::with_capacity(directions.len());
        for d in directions {
            means.push(predict_mean(state, d, &p, m)?);
        }
        rows.push(SensitivityRow {
            rapidity: eta,
            means,
        });
    }
    let ndir = directions.len();
    let mut spread = vec![0.0; ndir];
    for j in 0..ndir {
        let vals: Vec<f64> = rows.iter().map(|r| r.means[j]).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        spread[j] = max - min;
    }
    Ok(SensitivityTable { rows, spread })
}

/// Parses records from JSON-lines text (one record object per line).
pub fn parse_records(text: &str) -> Result<Vec<MeasurementRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let rec: MeasurementRecord = serde_json::from_str(line).map_err(|e| {
            Error::InvalidConfig(format!("records line {}: {e}", lineno + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Serializes records as JSON-lines text.
pub fn write_records(records: &[MeasurementRecord]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("record serialization"));
        out.push('\n');
    }
    out
}
