//! Randomized property tests for the algebraic core: invariants that must
//! hold for arbitrary admissible inputs, not just hand-picked cases.

use num_complex::Complex;
use proptest::prelude::*;

use relsg::lorentz::{vector_sigma_bar, FourVector, LorentzPair, SpinorAmplitude};
use relsg::observable::{sg_operator, SGConfig};
use relsg::spinor::Spinor;

fn unit_axis() -> impl Strategy<Value = [f64; 3]> {
    ([-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0])
        .prop_filter_map("axis too short", |v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            (n > 1e-2).then(|| [v[0] / n, v[1] / n, v[2] / n])
        })
}

fn velocity() -> impl Strategy<Value = FourVector> {
    (unit_axis(), 0.0f64..3.0).prop_map(|(a, eta)| {
        FourVector::new(
            eta.cosh(),
            eta.sinh() * a[0],
            eta.sinh() * a[1],
            eta.sinh() * a[2],
        )
    })
}

fn amplitude() -> impl Strategy<Value = SpinorAmplitude> {
    ([-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0]).prop_filter_map(
        "zero amplitude",
        |v| {
            let amp = SpinorAmplitude::new(Complex::new(v[0], v[1]), Complex::new(v[2], v[3]));
            (amp.norm() > 1e-3).then_some(amp)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The velocity-dependent metric is Hermitian positive-definite for
    /// every future-pointing unit timelike velocity.
    #[test]
    fn metric_is_positive_definite(u in velocity()) {
        let iu = vector_sigma_bar(&u);
        let herm = (iu - iu.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(herm < 1e-12);
        let tr = iu.trace().re;
        let det = iu.determinant().re;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        prop_assert!((tr - disc) / 2.0 > 0.0);
    }

    /// Inner products are conjugate-symmetric and norms are invariant
    /// under simultaneous transformation of state and momentum.
    #[test]
    fn inner_product_symmetry_and_invariance(
        u in velocity(),
        a in amplitude(),
        b in amplitude(),
        axis in unit_axis(),
        eta in -2.0f64..2.0,
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let x = Spinor::new(a, u, 1.0).unwrap();
        let y = Spinor::new(b, u, 1.0).unwrap();
        let xy = x.inner_product(&y).unwrap();
        let yx = y.inner_product(&x).unwrap();
        prop_assert!((xy - yx.conj()).norm() < 1e-12);

        let t = LorentzPair::boost(axis, eta)
            .unwrap()
            .compose(&LorentzPair::rotation(axis, angle).unwrap());
        let xy2 = x.transform(&t).inner_product(&y.transform(&t)).unwrap();
        prop_assert!((xy - xy2).norm() < 1e-9 * (1.0 + xy.norm()));
    }

    /// Spin expectations of normalized states lie in [-1, 1] and the
    /// eigenstates saturate the bounds.
    #[test]
    fn expectations_are_bounded(
        dir in unit_axis(),
        u in velocity(),
        a in amplitude(),
    ) {
        let cfg = SGConfig::device_rest(dir, 1.0).unwrap();
        let obs = sg_operator(&cfg, &u, 1.0).unwrap();
        let psi = Spinor::new(a, u, 1.0).unwrap().normalized().unwrap();
        let e = obs.expectation(&psi).unwrap();
        prop_assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&e));

        let (plus, minus) = obs.eigenstates().unwrap();
        prop_assert!((obs.expectation(&plus).unwrap() - 1.0).abs() < 1e-10);
        prop_assert!((obs.expectation(&minus).unwrap() + 1.0).abs() < 1e-10);
    }

    /// Composing a transformation with its inverse is the identity on
    /// both representations.
    #[test]
    fn inverse_composes_to_identity(
        axis in unit_axis(),
        eta in -3.0f64..3.0,
        angle in 0.0f64..std::f64::consts::TAU,
        v in velocity(),
    ) {
        let t = LorentzPair::boost(axis, eta)
            .unwrap()
            .compose(&LorentzPair::rotation(axis, angle).unwrap());
        let round = t.inverse().compose(&t);
        let w = round.apply(&v);
        for i in 0..4 {
            prop_assert!((w.0[i] - v.0[i]).abs() < 1e-9 * (1.0 + v.0[i].abs()));
        }
    }
}
