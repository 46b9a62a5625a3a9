//! The Stern-Gerlach field configuration and the spin operator it selects.
//!
//! A Stern-Gerlach device with 4-velocity v and (device-frame) field
//! direction b carries the field tensor
//!     F_{ab} = -eps_{abcd} v^c B^d,   B = |B| b,
//! which is purely magnetic in the device frame. Seen from a particle with
//! 4-velocity u the magnetic part is
//!     B_RF^a = -(1/2) eps^{abcd} u_b F_{cd} = |B| (b (v.u) - v (b.u)),
//! and the measurement axis is n = B_RF / |B_RF|. The resulting operator is
//! the covariant spin observable of the `spinor` module; two rival
//! operators from the literature (S' and S'') are provided for comparison.

use nalgebra::Matrix4;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lorentz::{
    dot, eps_lower, eps_upper, eta, FourVector, Generators, LorentzPair, C64, SpinorMatrix,
};
use crate::spinor::{pauli_lubanski, SpinObservable, Spinor};

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// A homogeneous Stern-Gerlach field: device 4-velocity, unit spacelike
/// field direction orthogonal to it, and a positive magnitude.
#[derive(Debug, Clone, Copy)]
pub struct SGConfig {
    pub device_velocity: FourVector,
    pub field_direction: FourVector,
    pub field_magnitude: f64,
}

impl SGConfig {
    pub fn new(v: FourVector, b: FourVector, magnitude: f64) -> Result<Self> {
        if (dot(&v, &v) - 1.0).abs() > 1e-10 || v.t() <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "device velocity must be unit timelike future-pointing, got v.v = {}",
                dot(&v, &v)
            )));
        }
        if (dot(&b, &b) + 1.0).abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "field direction must satisfy b.b = -1, got {}",
                dot(&b, &b)
            )));
        }
        if dot(&b, &v).abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "field direction must be orthogonal to the device velocity, b.v = {}",
                dot(&b, &v)
            )));
        }
        if magnitude < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "field magnitude must be non-negative, got {magnitude}"
            )));
        }
        Ok(SGConfig {
            device_velocity: v,
            field_direction: b,
            field_magnitude: magnitude,
        })
    }

    /// Device at rest with a spatial field direction.
    pub fn device_rest(direction: [f64; 3], magnitude: f64) -> Result<Self> {
        let norm = (direction[0] * direction[0]
            + direction[1] * direction[1]
            + direction[2] * direction[2])
            .sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidConfig("field direction is zero".into()));
        }
        Self::new(
            FourVector::REST,
            FourVector::from_spatial(0.0, [
                direction[0] / norm,
                direction[1] / norm,
                direction[2] / norm,
            ]),
            magnitude,
        )
    }

    /// The same apparatus described from another frame.
    pub fn transform(&self, t: &LorentzPair) -> Result<SGConfig> {
        SGConfig::new(
            t.apply(&self.device_velocity),
            t.apply(&self.field_direction),
            self.field_magnitude,
        )
    }

    /// Spatial direction of the field in the device's own frame
    /// (unit 3-vector).
    pub fn device_frame_direction(&self) -> [f64; 3] {
        let m = self
            .device_velocity
            .norm_sqr()
            .sqrt();
        let back = LorentzPair::standard_boost(&self.device_velocity, m)
            .expect("validated device velocity")
            .inverse();
        let b0 = back.apply(&self.field_direction);
        let s = b0.spatial();
        let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        [s[0] / n, s[1] / n, s[2] / n]
    }
}

/// Covariant components F_{ab} of an antisymmetric field tensor.
#[derive(Debug, Clone, Copy)]
pub struct FieldTensor(pub Matrix4<f64>);

impl FieldTensor {
    pub fn antisymmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                worst = worst.max((self.0[(a, b)] + self.0[(b, a)]).abs());
            }
        }
        worst
    }

    /// Contravariant components F^{ab}.
    pub fn upper(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for a in 0..4 {
            for b in 0..4 {
                m[(a, b)] = eta(a) * eta(b) * self.0[(a, b)];
            }
        }
        m
    }

    /// Covariant components in the new frame after x -> Lambda x:
    /// F'_{ab} = (Lambda^{-1})^c_a (Lambda^{-1})^d_b F_{cd}.
    pub fn transform(&self, t: &LorentzPair) -> FieldTensor {
        let inv = t.inverse().vector;
        FieldTensor(inv.transpose() * self.0 * inv)
    }

    /// The invariant F_{ab} F^{ab}.
    pub fn invariant_ff(&self) -> f64 {
        let up = self.upper();
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += self.0[(a, b)] * up[(a, b)];
            }
        }
        s
    }

    /// The invariant (1/2) eps^{abcd} F_{ab} F_{cd} (zero for a pure
    /// magnetic field).
    pub fn invariant_ffdual(&self) -> f64 {
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for cc in 0..4 {
                    for d in 0..4 {
                        let e = eps_upper(a, b, cc, d);
                        if e != 0.0 {
                            s += 0.5 * e * self.0[(a, b)] * self.0[(cc, d)];
                        }
                    }
                }
            }
        }
        s
    }
}

/// F_{ab} = -eps_{abcd} v^c B^d with B = |B| b.
pub fn sg_field_tensor(cfg: &SGConfig) -> FieldTensor {
    let v = cfg.device_velocity.0;
    let b = cfg.field_direction.0;
    let mag = cfg.field_magnitude;
    let mut f = Matrix4::zeros();
    for al in 0..4 {
        for be in 0..4 {
            let mut s = 0.0;
            for ga in 0..4 {
                for de in 0..4 {
                    let e = eps_lower(al, be, ga, de);
                    if e != 0.0 {
                        s -= e * v[ga] * mag * b[de];
                    }
                }
            }
            f[(al, be)] = s;
        }
    }
    FieldTensor(f)
}

/// Rest-frame magnetic field of F seen by 4-velocity u:
/// B^a = -(1/2) eps^{abcd} u_b F_{cd}.
pub fn rest_frame_b(f: &FieldTensor, u: &FourVector) -> FourVector {
    let ul = u.lower();
    let mut out = [0.0; 4];
    for (a, o) in out.iter_mut().enumerate() {
        for b in 0..4 {
            for cc in 0..4 {
                for d in 0..4 {
                    let e = eps_upper(a, b, cc, d);
                    if e != 0.0 {
                        *o -= 0.5 * e * ul[b] * f.0[(cc, d)];
                    }
                }
            }
        }
    }
    FourVector(out)
}

/// Closed form of the rest-frame magnetic field for a Stern-Gerlach tensor:
/// |B| (b (v.u) - v (b.u)).
pub fn rest_frame_b_closed(cfg: &SGConfig, u: &FourVector) -> FourVector {
    let vu = dot(&cfg.device_velocity, u);
    let bu = dot(&cfg.field_direction, u);
    cfg.field_direction
        .scale(vu)
        .sub(&cfg.device_velocity.scale(bu))
        .scale(cfg.field_magnitude)
}

/// Rest-frame electric field: E^a = F^{ab} u_b.
pub fn rest_frame_e(f: &FieldTensor, u: &FourVector) -> FourVector {
    let up = f.upper();
    let ul = u.lower();
    let mut out = [0.0; 4];
    for (a, o) in out.iter_mut().enumerate() {
        for b in 0..4 {
            *o += up[(a, b)] * ul[b];
        }
    }
    FourVector(out)
}

/// Invariant magnitude of a spacelike 4-vector, sqrt(-w.w).
pub fn spacelike_magnitude(w: &FourVector) -> f64 {
    (-w.norm_sqr()).max(0.0).sqrt()
}

/// The relativistic Stern-Gerlach spin operator: the covariant observable
/// along n = B_RF / |B_RF| for the particle (p, m).
pub fn sg_operator(cfg: &SGConfig, p: &FourVector, m: f64) -> Result<SpinObservable> {
    if cfg.field_magnitude <= 0.0 {
        return Err(Error::ZeroField);
    }
    p.check_on_shell(m, 1e-6)?;
    let u = p.scale(1.0 / m);
    let b_rf = rest_frame_b_closed(cfg, &u);
    let mag = spacelike_magnitude(&b_rf);
    if mag <= 0.0 {
        return Err(Error::ZeroField);
    }
    SpinObservable::new(p, m, &b_rf.scale(1.0 / mag))
}

/// The electric-field operator 2 u_c u^a F_{ab} L^{cb}.
pub fn electric_operator(f: &FieldTensor, u: &FourVector) -> SpinorMatrix {
    let gens = Generators::standard();
    let ul = u.lower();
    let mut m = SpinorMatrix::zeros();
    for cc in 0..4 {
        for a in 0..4 {
            for b in 0..4 {
                let w = ul[cc] * u.0[a] * f.0[(a, b)];
                if w != 0.0 {
                    m += gens.upper(cc, b) * c(2.0 * w, 0.0);
                }
            }
        }
    }
    m
}

/// The magnetic-field operator F_{ab} h^a_c h^b_d L^{cd}, with
/// h^a_c = delta^a_c - u^a u_c the projector orthogonal to u. Equal to
/// -|B_RF| times the Stern-Gerlach operator matrix.
pub fn magnetic_operator(f: &FieldTensor, u: &FourVector) -> SpinorMatrix {
    let gens = Generators::standard();
    let ul = u.lower();
    let mut h = Matrix4::<f64>::identity();
    for a in 0..4 {
        for b in 0..4 {
            h[(a, b)] -= u.0[a] * ul[b];
        }
    }
    let mut m = SpinorMatrix::zeros();
    for cc in 0..4 {
        for d in 0..4 {
            let mut w = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    w += f.0[(a, b)] * h[(a, cc)] * h[(b, d)];
                }
            }
            if w != 0.0 {
                m += gens.upper(cc, d) * c(w, 0.0);
            }
        }
    }
    m
}

/// Which rival spin operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltKind {
    /// S' proportional to a_i W^i.
    Sprime,
    /// S'' proportional to a_i (W^i - W^0 p^i / (p^0 + m)).
    Sdoubleprime,
}

/// A rival spin operator from the literature, normalized so its eigenvalues
/// are exactly +1 and -1 (it is traceless, so dividing by the principal
/// square root of -det does this).
pub fn alt_operator(kind: AltKind, a: [f64; 3], p: &FourVector, m: f64) -> Result<SpinorMatrix> {
    let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitAxis(norm));
    }
    let w = pauli_lubanski(p, m)?;
    let mut raw = SpinorMatrix::zeros();
    for i in 0..3 {
        let mut wi = w[i + 1];
        if kind == AltKind::Sdoubleprime {
            wi -= w[0] * c(p.0[i + 1] / (p.t() + m), 0.0);
        }
        raw += wi * c(a[i], 0.0);
    }
    let det = raw[(0, 0)] * raw[(1, 1)] - raw[(0, 1)] * raw[(1, 0)];
    let lambda = (-det).sqrt();
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(raw / lambda)
}

/// Expectation of a flat-Hermitian 2x2 operator in the Euclidean product.
pub fn flat_expectation(m: &SpinorMatrix, state: &Spinor) -> f64 {
    let num = (state.psi.adjoint() * m * state.psi)[(0, 0)].re;
    let den = state.psi.norm_squared();
    num / den
}

/// Side-by-side expectations of the Stern-Gerlach operator and the two
/// rival operators on the same state, with the apparatus orientation used
/// as the rivals' measurement axis.
#[derive(Debug, Clone, Copy)]
pub struct OperatorComparison {
    pub sg: f64,
    pub sprime: f64,
    pub sdoubleprime: f64,
    /// Flat-Hermiticity defects of the rival operators (diagnostic; the
    /// covariant operator is Hermitian in the invariant product instead).
    pub sprime_defect: f64,
    pub sdoubleprime_defect: f64,
}

pub fn compare_operators(
    cfg: &SGConfig,
    p: &FourVector,
    m: f64,
    state: &Spinor,
) -> Result<OperatorComparison> {
    let obs = sg_operator(cfg, p, m)?;
    let a = cfg.device_frame_direction();
    let sp = alt_operator(AltKind::Sprime, a, p, m)?;
    let sdp = alt_operator(AltKind::Sdoubleprime, a, p, m)?;
    Ok(OperatorComparison {
        sg: obs.expectation(state)?,
        sprime: flat_expectation(&sp, state),
        sdoubleprime: flat_expectation(&sdp, state),
        sprime_defect: crate::lorentz::max_abs2(&(sp - sp.adjoint())),
        sdoubleprime_defect: crate::lorentz::max_abs2(&(sdp - sdp.adjoint())),
    })
}
