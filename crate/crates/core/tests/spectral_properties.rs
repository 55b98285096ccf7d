use dollard::spectral::norms::{l2_norm, lr_norm};
use dollard::spectral::{free_propagator, riesz_potential, sobolev_norm, ComplexField, GridSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(3, 16, 6.0).unwrap()
}

/// Sum of a few off-center complex Gaussians.
fn bumps() -> impl Strategy<Value = ComplexField> {
    prop::collection::vec(
        (
            -2.0..2.0f64,
            -2.0..2.0f64,
            -2.0..2.0f64,
            0.8..2.0f64,
            -1.0..1.0f64,
            -1.0..1.0f64,
        ),
        1..4,
    )
    .prop_map(|specs| {
        ComplexField::from_fn(grid(), |x| {
            specs
                .iter()
                .map(|&(a, b, c, s, re, im)| {
                    let r2 = (x[0] - a).powi(2) + (x[1] - b).powi(2) + (x[2] - c).powi(2);
                    Complex64::new(re, im) * (-r2 / (2.0 * s * s)).exp()
                })
                .sum()
        })
    })
}

fn inner(a: &ComplexField, b: &ComplexField) -> Complex64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x.conj() * y)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_flow_is_unitary(f in bumps(), t in -50.0..50.0f64) {
        let n0 = l2_norm(&f);
        prop_assert!((l2_norm(&free_propagator(&f, t)) - n0).abs() <= 1e-12 * n0.max(1e-300));
    }

    #[test]
    fn free_flow_group_inverse(f in bumps(), t in -5.0..5.0f64) {
        let back = free_propagator(&free_propagator(&f, t), -t);
        prop_assert!(l2_norm(&back.sub(&f).unwrap()) <= 1e-12 * l2_norm(&f));
    }

    #[test]
    fn riesz_is_self_adjoint(f in bumps(), g in bumps(), mu in 0.3..2.7f64) {
        let lhs = inner(&f, &riesz_potential(&g, mu).unwrap());
        let rhs = inner(&riesz_potential(&f, mu).unwrap(), &g);
        let scale = inner(&f, &f).norm().sqrt() * inner(&g, &g).norm().sqrt() * 1e3;
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn zeroth_sobolev_norm_is_l2(f in bumps()) {
        let a = sobolev_norm(&f, 0);
        let b = lr_norm(&f, 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn sobolev_norm_is_absolutely_homogeneous(f in bumps(), re in -3.0..3.0f64, im in -3.0..3.0f64, k in 0usize..4) {
        let c = Complex64::new(re, im);
        let a = sobolev_norm(&f.scaled(c), k);
        let b = c.norm() * sobolev_norm(&f, k);
        prop_assert!((a - b).abs() <= 1e-11 * b.max(1e-300));
    }

    #[test]
    fn sobolev_norm_grows_with_order(f in bumps(), shift in -1.0..1.0f64) {
        let g = f.map(|z| z + shift);
        let norms: Vec<f64> = (0..5).map(|k| sobolev_norm(&g, k)).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] >= w[0]));
    }
}
