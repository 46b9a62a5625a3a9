//! Minkowski geometry, the Pauli 4-vector algebra, and paired
//! spin-1 / spin-1/2 Lorentz transformations.
//!
//! Conventions: metric diag(1,-1,-1,-1), natural units (hbar = c = 1),
//! sigma^a = (I, sigma^i), sigmabar^a = (I, -sigma^i). The totally
//! antisymmetric symbol is fixed by eps_{0123} = +1 (so eps^{0123} = -1);
//! with the generators built from the sigma algebra this orientation makes
//! the self-duality identity L^{ab} = (i/2) eps^{abcd} L_{cd} hold exactly
//! and gives the standard cyclotron sense for the Lorentz force.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type SpinorMatrix = Matrix2<C64>;
pub type SpinorAmplitude = Vector2<C64>;

/// Metric signature factor for one index.
#[inline]
pub fn eta(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Covariant Levi-Civita symbol with eps_{0123} = +1.
pub fn eps_lower(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let idx = [a, b, c, d];
    let mut sign = 1.0;
    let mut v = idx;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if v[i] == v[j] {
                return 0.0;
            }
            if v[i] > v[j] {
                v.swap(i, j);
                sign = -sign;
            }
        }
    }
    sign
}

/// Contravariant Levi-Civita symbol; raising all four indices with the
/// metric contributes det(eta) = -1.
#[inline]
pub fn eps_upper(a: usize, b: usize, c: usize, d: usize) -> f64 {
    -eps_lower(a, b, c, d)
}

// ---------------------------------------------------------------------------
// FourVector
// ---------------------------------------------------------------------------

/// Real Minkowski 4-vector, contravariant components, index 0 = time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);
    pub const REST: FourVector = FourVector([1.0, 0.0, 0.0, 0.0]);

    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    pub fn from_spatial(t: f64, s: [f64; 3]) -> Self {
        FourVector([t, s[0], s[1], s[2]])
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn spatial_norm(&self) -> f64 {
        let s = self.spatial();
        (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
    }

    /// Covariant components a_mu = eta_{mu nu} a^nu.
    pub fn lower(&self) -> [f64; 4] {
        [self.0[0], -self.0[1], -self.0[2], -self.0[3]]
    }

    /// Minkowski scalar product a.b = a_mu b^mu.
    pub fn dot(&self, other: &FourVector) -> f64 {
        self.0[0] * other.0[0]
            - self.0[1] * other.0[1]
            - self.0[2] * other.0[2]
            - self.0[3] * other.0[3]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.dot(self)
    }

    pub fn is_timelike(&self) -> bool {
        self.norm_sqr() > 0.0
    }

    pub fn is_spacelike(&self) -> bool {
        self.norm_sqr() < 0.0
    }

    pub fn is_null(&self, tol: f64) -> bool {
        self.norm_sqr().abs() <= tol
    }

    pub fn is_future_pointing(&self) -> bool {
        self.is_timelike() && self.t() > 0.0
    }

    pub fn scale(&self, s: f64) -> FourVector {
        FourVector([self.0[0] * s, self.0[1] * s, self.0[2] * s, self.0[3] * s])
    }

    pub fn add(&self, other: &FourVector) -> FourVector {
        FourVector([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
            self.0[3] + other.0[3],
        ])
    }

    pub fn sub(&self, other: &FourVector) -> FourVector {
        FourVector([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
            self.0[3] - other.0[3],
        ])
    }

    pub fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.0[0], self.0[1], self.0[2], self.0[3])
    }

    pub fn from_vector4(v: &Vector4<f64>) -> FourVector {
        FourVector([v[0], v[1], v[2], v[3]])
    }

    /// Validates p timelike, future pointing and on the mass shell.
    pub fn check_on_shell(&self, mass: f64, rel_tol: f64) -> Result<()> {
        if mass <= 0.0 {
            return Err(Error::NonPositiveMass(mass));
        }
        if !self.is_timelike() {
            return Err(Error::NotTimelike(self.0));
        }
        if self.t() <= 0.0 {
            return Err(Error::NotFuturePointing(self.0));
        }
        let m2 = mass * mass;
        if (self.norm_sqr() - m2).abs() > rel_tol * m2.max(1.0) {
            return Err(Error::OffShell {
                found: self.norm_sqr(),
                expected: m2,
            });
        }
        Ok(())
    }
}

/// Scalar product of two 4-vectors under diag(1,-1,-1,-1).
pub fn dot(a: &FourVector, b: &FourVector) -> f64 {
    a.dot(b)
}

// ---------------------------------------------------------------------------
// Pauli 4-vector
// ---------------------------------------------------------------------------

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn identity2() -> SpinorMatrix {
    Matrix2::identity()
}

/// The Pauli matrix sigma^i, i = 1..3.
pub fn pauli(i: usize) -> SpinorMatrix {
    match i {
        1 => Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        2 => Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        3 => Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        _ => panic!("pauli index must be 1, 2 or 3"),
    }
}

/// sigma^a = (I, sigma^i).
pub fn sigma(a: usize) -> SpinorMatrix {
    if a == 0 {
        identity2()
    } else {
        pauli(a)
    }
}

/// sigmabar^a = (I, -sigma^i).
pub fn sigma_bar(a: usize) -> SpinorMatrix {
    if a == 0 {
        identity2()
    } else {
        -pauli(a)
    }
}

/// The Pauli 4-vector pair (sigma^a, sigmabar^a).
#[derive(Debug, Clone)]
pub struct PauliFourVector {
    pub sigma: [SpinorMatrix; 4],
    pub sigma_bar: [SpinorMatrix; 4],
}

impl PauliFourVector {
    pub fn standard() -> Self {
        PauliFourVector {
            sigma: [sigma(0), sigma(1), sigma(2), sigma(3)],
            sigma_bar: [sigma_bar(0), sigma_bar(1), sigma_bar(2), sigma_bar(3)],
        }
    }

    /// Max componentwise violation of the Clifford relation
    /// sigma^a sigmabar^b + sigma^b sigmabar^a = 2 eta^{ab} I.
    pub fn clifford_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let lhs = self.sigma[a] * self.sigma_bar[b] + self.sigma[b] * self.sigma_bar[a];
                let eta_ab = if a == b { eta(a) } else { 0.0 };
                let rhs = identity2() * c(2.0 * eta_ab, 0.0);
                worst = worst.max(max_abs2(&(lhs - rhs)));
            }
        }
        worst
    }
}

/// Contraction v_a sigmabar^a for a contravariant 4-vector v.
pub fn vector_sigma_bar(v: &FourVector) -> SpinorMatrix {
    let vl = v.lower();
    let mut m = SpinorMatrix::zeros();
    for a in 0..4 {
        m += sigma_bar(a) * c(vl[a], 0.0);
    }
    m
}

/// Contraction v_a sigma^a.
pub fn vector_sigma(v: &FourVector) -> SpinorMatrix {
    let vl = v.lower();
    let mut m = SpinorMatrix::zeros();
    for a in 0..4 {
        m += sigma(a) * c(vl[a], 0.0);
    }
    m
}

pub fn max_abs2(m: &SpinorMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs4(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// The six independent spin-1/2 Lorentz generators
/// L^{ab} = (i/4)(sigma^a sigmabar^b - sigma^b sigmabar^a),
/// stored as the full antisymmetric 4x4 table of 2x2 matrices.
#[derive(Debug, Clone)]
pub struct Generators {
    l: [[SpinorMatrix; 4]; 4],
}

impl Generators {
    pub fn standard() -> Self {
        let mut l = [[SpinorMatrix::zeros(); 4]; 4];
        let quarter_i = c(0.0, 0.25);
        for a in 0..4 {
            for b in 0..4 {
                l[a][b] = (sigma(a) * sigma_bar(b) - sigma(b) * sigma_bar(a)) * quarter_i;
            }
        }
        Generators { l }
    }

    /// L^{ab} with both indices contravariant.
    #[inline]
    pub fn upper(&self, a: usize, b: usize) -> SpinorMatrix {
        self.l[a][b]
    }

    /// L_{ab} with both indices lowered by the metric.
    #[inline]
    pub fn lower(&self, a: usize, b: usize) -> SpinorMatrix {
        self.l[a][b] * c(eta(a) * eta(b), 0.0)
    }

    /// Max componentwise violation of L^{ab} = (i/2) eps^{abcd} L_{cd}.
    pub fn self_duality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let mut rhs = SpinorMatrix::zeros();
                for cc in 0..4 {
                    for d in 0..4 {
                        let e = eps_upper(a, b, cc, d);
                        if e != 0.0 {
                            rhs += self.lower(cc, d) * c(0.0, 0.5 * e);
                        }
                    }
                }
                worst = worst.max(max_abs2(&(self.upper(a, b) - rhs)));
            }
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// Matrix exponentials (scaling and squaring with a Taylor series)
// ---------------------------------------------------------------------------

pub fn expm2(m: &SpinorMatrix) -> SpinorMatrix {
    let norm = max_abs2(m);
    let k = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m * c(0.5f64.powi(k as i32), 0.0);
    let mut term = SpinorMatrix::identity();
    let mut sum = SpinorMatrix::identity();
    for n in 1..24 {
        term = term * scaled * c(1.0 / n as f64, 0.0);
        sum += term;
    }
    let mut out = sum;
    for _ in 0..k {
        out = out * out;
    }
    out
}

pub fn expm4(m: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = max_abs4(m);
    let k = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m * 0.5f64.powi(k as i32);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for n in 1..24 {
        term = term * scaled / n as f64;
        sum += term;
    }
    let mut out = sum;
    for _ in 0..k {
        out = out * out;
    }
    out
}

// ---------------------------------------------------------------------------
// LorentzPair
// ---------------------------------------------------------------------------

/// A proper orthochronous Lorentz transformation carried in both the
/// spin-1 (4x4 real) and spin-1/2 (2x2 complex, unit determinant)
/// representations.
///
/// The spinor part acts directly on spinor amplitudes, psi -> S psi, with
/// the standard half-angle conventions: rotations exp(-i(theta/2) n.sigma),
/// boosts exp(-(eta/2) n.sigma).
#[derive(Debug, Clone)]
pub struct LorentzPair {
    pub vector: Matrix4<f64>,
    pub spinor: SpinorMatrix,
}

impl LorentzPair {
    pub fn identity() -> Self {
        LorentzPair {
            vector: Matrix4::identity(),
            spinor: SpinorMatrix::identity(),
        }
    }

    /// Builds the pair from antisymmetric parameters omega_{ab}: the vector
    /// part is exp(M) with M^a_b = eta^{ac} omega_{cb}, the spinor part is
    /// exp(-(i/2) omega_{ab} L^{ab}). Both representations share this one
    /// code path.
    pub fn from_parameters(omega: &Matrix4<f64>) -> Self {
        let gens = Generators::standard();
        let mut m = Matrix4::zeros();
        for a in 0..4 {
            for b in 0..4 {
                m[(a, b)] = eta(a) * omega[(a, b)];
            }
        }
        let mut s_gen = SpinorMatrix::zeros();
        for a in 0..4 {
            for b in 0..4 {
                s_gen += gens.upper(a, b) * c(0.0, -0.5 * omega[(a, b)]);
            }
        }
        LorentzPair {
            vector: expm4(&m),
            spinor: expm2(&s_gen),
        }
    }

    /// Pure boost with the given rapidity along a unit spatial axis.
    pub fn boost(axis: [f64; 3], rapidity: f64) -> Result<Self> {
        check_unit_axis(&axis)?;
        let mut omega = Matrix4::zeros();
        for (j, n) in axis.iter().enumerate() {
            omega[(0, j + 1)] = rapidity * n;
            omega[(j + 1, 0)] = -rapidity * n;
        }
        Ok(Self::from_parameters(&omega))
    }

    /// Pure boost with velocity beta along a unit spatial axis.
    pub fn boost_beta(axis: [f64; 3], beta: f64) -> Result<Self> {
        Self::boost(axis, beta.atanh())
    }

    /// Spatial rotation by `angle` about a unit axis (right-hand rule).
    pub fn rotation(axis: [f64; 3], angle: f64) -> Result<Self> {
        check_unit_axis(&axis)?;
        let mut omega = Matrix4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut w = 0.0;
                for (k, n) in axis.iter().enumerate() {
                    w += angle * eps3(i, j, k) * n;
                }
                omega[(i + 1, j + 1)] = w;
            }
        }
        Ok(Self::from_parameters(&omega))
    }

    /// The standard boost L(p) mapping (m, 0, 0, 0) to p.
    pub fn standard_boost(p: &FourVector, mass: f64) -> Result<Self> {
        p.check_on_shell(mass, 1e-6)?;
        let sp = p.spatial_norm();
        if sp / mass < 1e-15 {
            return Ok(Self::identity());
        }
        let rapidity = (p.t() / mass).acosh();
        let s = p.spatial();
        let axis = [s[0] / sp, s[1] / sp, s[2] / sp];
        Self::boost(axis, rapidity)
    }

    pub fn compose(&self, other: &LorentzPair) -> LorentzPair {
        LorentzPair {
            vector: self.vector * other.vector,
            spinor: self.spinor * other.spinor,
        }
    }

    pub fn inverse(&self) -> LorentzPair {
        // Lambda^{-1} = eta Lambda^T eta; the spinor part has unit
        // determinant so its inverse is the adjugate.
        let mut eta_m = Matrix4::identity();
        eta_m[(1, 1)] = -1.0;
        eta_m[(2, 2)] = -1.0;
        eta_m[(3, 3)] = -1.0;
        let s = &self.spinor;
        let inv_spinor = Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)])
            / (s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)]);
        LorentzPair {
            vector: eta_m * self.vector.transpose() * eta_m,
            spinor: inv_spinor,
        }
    }

    pub fn apply(&self, x: &FourVector) -> FourVector {
        FourVector::from_vector4(&(self.vector * x.as_vector4()))
    }

    pub fn apply_spinor(&self, psi: &SpinorAmplitude) -> SpinorAmplitude {
        self.spinor * psi
    }

    /// Max componentwise violation of Lambda^T eta Lambda = eta.
    pub fn metric_error(&self) -> f64 {
        let mut eta_m = Matrix4::identity();
        eta_m[(1, 1)] = -1.0;
        eta_m[(2, 2)] = -1.0;
        eta_m[(3, 3)] = -1.0;
        max_abs4(&(self.vector.transpose() * eta_m * self.vector - eta_m))
    }

    pub fn det_spinor_error(&self) -> f64 {
        let s = &self.spinor;
        ((s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)]) - c(1.0, 0.0)).norm()
    }

    /// Max componentwise violation of the Pauli 4-vector intertwining
    /// identity: Lambda^a_b X sigmabar^b X^dagger = sigmabar^a with
    /// X = (S^dagger)^{-1}, where S is the stored (state-action) spinor
    /// part; X is the spin-1/2 matrix carrying the upper spinor indices of
    /// sigmabar.
    pub fn intertwine_error(&self) -> f64 {
        let x = self.inverse().spinor.adjoint();
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            let mut lhs = SpinorMatrix::zeros();
            for b in 0..4 {
                lhs += x * sigma_bar(b) * x.adjoint() * c(self.vector[(a, b)], 0.0);
            }
            worst = worst.max(max_abs2(&(lhs - sigma_bar(a))));
        }
        worst
    }
}

fn check_unit_axis(axis: &[f64; 3]) -> Result<()> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitAxis(n));
    }
    Ok(())
}

/// Three-dimensional Levi-Civita symbol (zero-based indices).
#[inline]
pub fn eps3(i: usize, j: usize, k: usize) -> f64 {
    eps_lower(0, i + 1, j + 1, k + 1)
}
