//! Momentum-indexed spin-1/2 states and the covariant spin observable.
//!
//! A massive particle with on-shell momentum p carries a two-component
//! amplitude in its own Hilbert space H_p. The physically meaningful inner
//! product on H_p is not the flat one but
//!     <a, b>_u = a^dagger (u_alpha sigmabar^alpha) b,   u = p/m,
//! which is what Lorentz-transformed amplitudes preserve. Spin along a unit
//! spacelike axis n orthogonal to p is measured by the Hermitian (with
//! respect to <,>_u) operator
//!     A = n_alpha (-2 W^alpha / m) + (n.u) I,
//! built from the Pauli-Lubanski matrices W^alpha.

use nalgebra::Matrix2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lorentz::{
    dot, max_abs2, sigma_bar, vector_sigma_bar, FourVector, Generators, LorentzPair, C64,
    SpinorAmplitude, SpinorMatrix,
};

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// A spin amplitude attached to a definite on-shell momentum.
#[derive(Debug, Clone)]
pub struct Spinor {
    pub psi: SpinorAmplitude,
    pub p: FourVector,
    pub mass: f64,
}

impl Spinor {
    pub fn new(psi: SpinorAmplitude, p: FourVector, mass: f64) -> Result<Self> {
        p.check_on_shell(mass, 1e-6)?;
        if psi.norm() == 0.0 {
            return Err(Error::ZeroAmplitude);
        }
        Ok(Spinor { psi, p, mass })
    }

    /// Four-velocity u = p/m.
    pub fn velocity(&self) -> FourVector {
        self.p.scale(1.0 / self.mass)
    }

    /// The invariant inner-product matrix I_u = u_alpha sigmabar^alpha.
    pub fn metric_matrix(&self) -> SpinorMatrix {
        vector_sigma_bar(&self.velocity())
    }

    /// Invariant inner product <self, other>_u; both states must live in
    /// the same Hilbert space (same momentum).
    pub fn inner_product(&self, other: &Spinor) -> Result<C64> {
        let dp = self.p.sub(&other.p);
        let scale = self.p.as_vector4().amax().max(1.0);
        if dp.as_vector4().amax() > 1e-9 * scale || (self.mass - other.mass).abs() > 1e-9 {
            return Err(Error::MomentumMismatch(self.p.0, other.p.0));
        }
        Ok((self.psi.adjoint() * self.metric_matrix() * other.psi)[(0, 0)])
    }

    /// Invariant norm sqrt(<psi, psi>_u).
    pub fn norm(&self) -> f64 {
        let n = (self.psi.adjoint() * self.metric_matrix() * self.psi)[(0, 0)];
        n.re.max(0.0).sqrt()
    }

    /// Rescales the amplitude to unit invariant norm.
    pub fn normalized(&self) -> Result<Spinor> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroAmplitude);
        }
        Ok(Spinor {
            psi: self.psi / c(n, 0.0),
            p: self.p,
            mass: self.mass,
        })
    }

    /// Pushes the state to a new frame: psi -> S psi, p -> Lambda p.
    pub fn transform(&self, t: &LorentzPair) -> Spinor {
        Spinor {
            psi: t.apply_spinor(&self.psi),
            p: t.apply(&self.p),
            mass: self.mass,
        }
    }

    /// Expectation value of spin along the unit axis n (n.n = -1, n.p = 0):
    /// <A> = psi^dagger (n_alpha sigmabar^alpha) psi / <psi, psi>_u.
    pub fn expectation(&self, n: &FourVector) -> Result<f64> {
        let obs = SpinObservable::new(&self.p, self.mass, n)?;
        obs.expectation(self)
    }
}

/// The Pauli-Lubanski matrices W^alpha = i p_beta L^{beta alpha} for a
/// given on-shell momentum, as four 2x2 complex matrices.
pub fn pauli_lubanski(p: &FourVector, mass: f64) -> Result<[SpinorMatrix; 4]> {
    p.check_on_shell(mass, 1e-6)?;
    let gens = Generators::standard();
    let pl = p.lower();
    let mut w = [SpinorMatrix::zeros(); 4];
    for (a, wa) in w.iter_mut().enumerate() {
        for b in 0..4 {
            *wa += gens.upper(b, a) * c(0.0, pl[b]);
        }
    }
    Ok(w)
}

/// The covariant spin observable on H_p along a measurement axis.
#[derive(Debug, Clone)]
pub struct SpinObservable {
    pub matrix: SpinorMatrix,
    pub p: FourVector,
    pub mass: f64,
    /// The (possibly adjusted) axis actually used: unit spacelike,
    /// orthogonal to p.
    pub n: FourVector,
    /// True when the supplied axis needed a small projection or rescaling
    /// to satisfy n.p = 0 and n.n = -1.
    pub adjusted: bool,
}

impl SpinObservable {
    /// Builds A = n_alpha (-2 W^alpha / m) + (n.u) I. The axis must be unit
    /// spacelike and orthogonal to p; violations up to 1e-8 are repaired by
    /// projection/rescaling (flagged in `adjusted`), larger ones are errors.
    pub fn new(p: &FourVector, mass: f64, n: &FourVector) -> Result<Self> {
        p.check_on_shell(mass, 1e-6)?;
        let u = p.scale(1.0 / mass);
        let mut axis = *n;
        let mut adjusted = false;

        let nu = dot(&axis, &u);
        if nu.abs() > 1e-8 {
            return Err(Error::NotOrthogonal(nu));
        }
        if nu != 0.0 {
            axis = axis.sub(&u.scale(nu));
            adjusted = true;
        }
        let nn = dot(&axis, &axis);
        if (nn + 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(nn));
        }
        if nn != -1.0 {
            axis = axis.scale(1.0 / (-nn).sqrt());
            adjusted = true;
        }

        let w = pauli_lubanski(p, mass)?;
        let nl = axis.lower();
        let mut m = SpinorMatrix::zeros();
        for a in 0..4 {
            m += w[a] * c(-2.0 * nl[a] / mass, 0.0);
        }
        m += Matrix2::identity() * c(dot(&axis, &u), 0.0);

        Ok(SpinObservable {
            matrix: m,
            p: *p,
            mass,
            n: axis,
            adjusted,
        })
    }

    /// Max componentwise violation of Hermiticity with respect to <,>_u,
    /// i.e. of I_u A = A^dagger I_u.
    pub fn hermiticity_defect(&self) -> f64 {
        let iu = vector_sigma_bar(&self.p.scale(1.0 / self.mass));
        max_abs2(&(iu * self.matrix - self.matrix.adjoint() * iu))
    }

    /// Expectation in a state of the same momentum,
    /// psi^dagger (n_alpha sigmabar^alpha) psi / <psi, psi>_u.
    pub fn expectation(&self, state: &Spinor) -> Result<f64> {
        let dp = self.p.sub(&state.p);
        let scale = self.p.as_vector4().amax().max(1.0);
        if dp.as_vector4().amax() > 1e-9 * scale || (self.mass - state.mass).abs() > 1e-9 {
            return Err(Error::MomentumMismatch(self.p.0, state.p.0));
        }
        let denom = (state.psi.adjoint() * state.metric_matrix() * state.psi)[(0, 0)].re;
        if denom <= 0.0 {
            return Err(Error::ZeroAmplitude);
        }
        let nl = self.n.lower();
        let mut nsb = SpinorMatrix::zeros();
        for a in 0..4 {
            nsb += sigma_bar(a) * c(nl[a], 0.0);
        }
        let num = (state.psi.adjoint() * nsb * state.psi)[(0, 0)].re;
        Ok(num / denom)
    }

    /// The +1 and -1 eigenstates, unit-normalized in <,>_u, with the phase
    /// fixed so the largest component of each amplitude is real and
    /// non-negative. Built by solving the problem in the particle rest
    /// frame (where A reduces to d.sigma for the de-boosted axis d) and
    /// pushing the eigenvectors forward with the standard boost.
    pub fn eigenstates(&self) -> Result<(Spinor, Spinor)> {
        let boost = LorentzPair::standard_boost(&self.p, self.mass)?;
        let n_rf = boost.inverse().apply(&self.n);
        let d = n_rf.spatial();
        let dn = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if dn == 0.0 {
            return Err(Error::NonUnitAxis(0.0));
        }
        let d = [d[0] / dn, d[1] / dn, d[2] / dn];

        // Eigenvectors of d.sigma from the rank-1 projectors (I +/- d.sigma)/2,
        // taking whichever column carries the most weight.
        let dsig = Matrix2::new(
            c(d[2], 0.0),
            c(d[0], -d[1]),
            c(d[0], d[1]),
            c(-d[2], 0.0),
        );
        let chi = |sign: f64| -> SpinorAmplitude {
            let proj = (Matrix2::identity() + dsig * c(sign, 0.0)) * c(0.5, 0.0);
            let c0 = proj.column(0).into_owned();
            let c1 = proj.column(1).into_owned();
            let v = if c0.norm() >= c1.norm() { c0 } else { c1 };
            v / c(v.norm(), 0.0)
        };

        let make = |sign: f64| -> Result<Spinor> {
            let psi = boost.apply_spinor(&chi(sign));
            let s = Spinor::new(psi, self.p, self.mass)?.normalized()?;
            Ok(fix_phase(s))
        };
        Ok((make(1.0)?, make(-1.0)?))
    }
}

/// Rotates the overall phase so the largest-magnitude component is real
/// and non-negative.
fn fix_phase(mut s: Spinor) -> Spinor {
    let pick = if s.psi[0].norm() >= s.psi[1].norm() {
        s.psi[0]
    } else {
        s.psi[1]
    };
    if pick.norm() > 0.0 {
        let phase = pick / c(pick.norm(), 0.0);
        s.psi /= phase;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::pauli;
    use approx::assert_abs_diff_eq;

    fn rest_state(a: C64, b: C64) -> Spinor {
        Spinor::new(SpinorAmplitude::new(a, b), FourVector::REST, 1.0).unwrap()
    }

    #[test]
    fn inner_product_rest_frame_is_flat() {
        let s = rest_state(c(1.0, 0.0), c(1.0, 0.0));
        let ip = s.inner_product(&s).unwrap();
        assert_abs_diff_eq!(ip.re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inner_product_rejects_momentum_mismatch() {
        let a = rest_state(c(1.0, 0.0), c(0.0, 0.0));
        let b = Spinor::new(
            SpinorAmplitude::new(c(1.0, 0.0), c(0.0, 0.0)),
            FourVector::new(1.25, 0.75, 0.0, 0.0),
            1.0,
        )
        .unwrap();
        assert!(a.inner_product(&b).is_err());
    }

    #[test]
    fn inner_product_invariant_under_transform() {
        let a = rest_state(c(0.3, 0.4), c(-0.1, 0.9));
        let b = rest_state(c(1.0, -0.2), c(0.5, 0.5));
        let before = a.inner_product(&b).unwrap();
        let t = LorentzPair::boost([0.0, 0.6, 0.8], 1.2)
            .unwrap()
            .compose(&LorentzPair::rotation([1.0, 0.0, 0.0], 0.9).unwrap());
        let after = a.transform(&t).inner_product(&b.transform(&t)).unwrap();
        assert_abs_diff_eq!(before.re, after.re, epsilon = 1e-10);
        assert_abs_diff_eq!(before.im, after.im, epsilon = 1e-10);
    }

    #[test]
    fn pauli_lubanski_rest_frame() {
        let w = pauli_lubanski(&FourVector::REST, 1.0).unwrap();
        assert!(max_abs2(&w[0]) < 1e-15);
        for i in 1..4 {
            assert!(max_abs2(&(w[i] - pauli(i) * c(0.5, 0.0))) < 1e-15);
        }
    }

    #[test]
    fn pauli_lubanski_orthogonal_to_momentum() {
        // p_alpha W^alpha = 0 for a generic boosted momentum.
        let p = FourVector::new(2.0, 1.0, 0.9, -0.8);
        let m = p.norm_sqr().sqrt();
        let w = pauli_lubanski(&p, m).unwrap();
        let pl = p.lower();
        let mut contraction = SpinorMatrix::zeros();
        for a in 0..4 {
            contraction += w[a] * c(pl[a], 0.0);
        }
        assert!(max_abs2(&contraction) < 1e-12);
    }

    #[test]
    fn observable_reduces_to_pauli_in_rest_frame() {
        let n = FourVector::new(0.0, 0.0, 0.0, 1.0);
        let obs = SpinObservable::new(&FourVector::REST, 1.0, &n).unwrap();
        assert!(max_abs2(&(obs.matrix - pauli(3))) < 1e-14);
        assert!(!obs.adjusted);
    }

    #[test]
    fn observable_rejects_bad_axes() {
        let p = FourVector::REST;
        assert!(SpinObservable::new(&p, 1.0, &FourVector::new(0.0, 0.0, 0.0, 2.0)).is_err());
        assert!(SpinObservable::new(&p, 1.0, &FourVector::new(0.5, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn observable_repairs_tiny_violations() {
        let p = FourVector::REST;
        let n = FourVector::new(1e-10, 0.0, 0.0, 1.0 + 1e-10);
        let obs = SpinObservable::new(&p, 1.0, &n).unwrap();
        assert!(obs.adjusted);
        assert_abs_diff_eq!(dot(&obs.n, &obs.n), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dot(&obs.n, &p), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn hermitian_in_invariant_product() {
        let p = FourVector::new(1.25, 0.0, 0.0, 0.75);
        // Axis orthogonal to p: boost of z-hat, plus a transverse piece.
        let n = FourVector::new(0.75, 0.6, 0.0, 1.25);
        let n = n.scale(1.0 / (-dot(&n, &n)).sqrt());
        let obs = SpinObservable::new(&p, 1.0, &n).unwrap();
        assert!(obs.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn expectation_rest_frame_oracle() {
        let up = rest_state(c(1.0, 0.0), c(0.0, 0.0));
        let z = FourVector::new(0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(up.expectation(&z).unwrap(), 1.0, epsilon = 1e-14);
        let down = rest_state(c(0.0, 0.0), c(1.0, 0.0));
        assert_abs_diff_eq!(down.expectation(&z).unwrap(), -1.0, epsilon = 1e-14);
        // Transverse axis on an eigenstate of sigma_z: zero mean.
        let x = FourVector::new(0.0, 1.0, 0.0, 0.0);
        assert_abs_diff_eq!(up.expectation(&x).unwrap(), 0.0, epsilon = 1e-14);
        // sigma_x eigenstate along x: +1.
        let plus = rest_state(c(1.0, 0.0), c(1.0, 0.0));
        assert_abs_diff_eq!(plus.expectation(&x).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn expectation_agrees_with_matrix_sandwich() {
        // <A> from n_alpha sigmabar^alpha must equal the I_u sandwich of the
        // operator matrix, for a generic boosted setup.
        let t = LorentzPair::boost([0.6, 0.0, 0.8], 0.9).unwrap();
        let s = rest_state(c(0.7, 0.1), c(0.2, -0.5)).transform(&t);
        let n = t.apply(&FourVector::new(0.0, 0.0, 1.0, 0.0));
        let obs = SpinObservable::new(&s.p, s.mass, &n).unwrap();
        let direct = obs.expectation(&s).unwrap();
        let iu = s.metric_matrix();
        let num = (s.psi.adjoint() * iu * obs.matrix * s.psi)[(0, 0)].re;
        let den = (s.psi.adjoint() * iu * s.psi)[(0, 0)].re;
        assert_abs_diff_eq!(direct, num / den, epsilon = 1e-12);
    }

    #[test]
    fn expectation_is_frame_covariant() {
        let s = rest_state(c(0.8, -0.3), c(0.1, 0.4));
        let n = FourVector::new(0.0, 0.0, 1.0, 0.0);
        let before = s.expectation(&n).unwrap();
        let t = LorentzPair::boost([1.0, 0.0, 0.0], 1.4)
            .unwrap()
            .compose(&LorentzPair::rotation([0.0, 0.0, 1.0], 0.4).unwrap());
        let after = s.transform(&t).expectation(&t.apply(&n)).unwrap();
        assert_abs_diff_eq!(before, after, epsilon = 1e-10);
    }

    #[test]
    fn eigenstates_orthonormal_and_sharp() {
        let t = LorentzPair::boost([0.0, 0.6, 0.8], 1.1).unwrap();
        let p = t.apply(&FourVector::REST);
        let n = t.apply(&FourVector::new(0.0, 1.0, 0.0, 0.0));
        let obs = SpinObservable::new(&p, 1.0, &n).unwrap();
        let (plus, minus) = obs.eigenstates().unwrap();

        assert_abs_diff_eq!(plus.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(minus.norm(), 1.0, epsilon = 1e-12);
        let cross = plus.inner_product(&minus).unwrap();
        assert!(cross.norm() < 1e-12);

        assert_abs_diff_eq!(obs.expectation(&plus).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(obs.expectation(&minus).unwrap(), -1.0, epsilon = 1e-12);

        // Eigenvalue equation in matrix form.
        let rp = obs.matrix * plus.psi - plus.psi;
        let rm = obs.matrix * minus.psi + minus.psi;
        assert!(rp.norm() < 1e-11 && rm.norm() < 1e-11);

        // Phase convention: dominant component real, non-negative.
        for s in [&plus, &minus] {
            let pick = if s.psi[0].norm() >= s.psi[1].norm() {
                s.psi[0]
            } else {
                s.psi[1]
            };
            assert!(pick.im.abs() < 1e-13 && pick.re >= 0.0);
        }
    }
}
