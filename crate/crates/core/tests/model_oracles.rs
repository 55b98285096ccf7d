use std::f64::consts::PI;

use dollard::model::{check_admissible, g0, g_diag, half_propagate_back, ModelParams};
use dollard::spectral::norms::real_l2_norm;
use dollard::spectral::{ComplexField, GridSpec, RealField};
use num_complex::Complex64;
use proptest::prelude::*;
use statrs::function::erf::erf;

fn gaussian(grid: GridSpec, amp: Complex64, sigma: f64, center: [f64; 3]) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum();
        amp * (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

fn rel(a: &RealField, b: &RealField) -> f64 {
    real_l2_norm(&a.sub(b).unwrap()) / real_l2_norm(b)
}

fn params() -> ModelParams {
    ModelParams::new(3, 0.7, 0.8, 1.0).unwrap()
}

fn pair(grid: GridSpec) -> (ComplexField, ComplexField) {
    let w1 = gaussian(grid, Complex64::new(0.3, 0.1), 1.6, [0.4, -0.2, 0.0]);
    let w2 = ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::from_polar(0.5 * (-r2 / 5.0).exp(), 0.3 * x[0] + 0.1 * x[2])
    });
    (w1, w2)
}

#[test]
fn g0_polarization_identity() {
    let grid = GridSpec::new(3, 16, 8.0).unwrap();
    let p = params();
    let (w1, w2) = pair(grid);
    let plus = w1.add(&w2).unwrap();
    let minus = w1.sub(&w2).unwrap();
    let lhs = g0(&w1, &w2, &p)
        .unwrap()
        .add(&g0(&w2, &w1, &p).unwrap())
        .unwrap();
    let rhs = g0(&plus, &plus, &p)
        .unwrap()
        .sub(&g0(&minus, &minus, &p).unwrap())
        .unwrap()
        .scaled(0.5);
    assert!(rel(&lhs, &rhs) < 1e-10, "{}", rel(&lhs, &rhs));
}

#[test]
fn g0_is_symmetric_real_bilinear_and_phase_blind() {
    let grid = GridSpec::new(3, 16, 8.0).unwrap();
    let p = params();
    let (w1, w2) = pair(grid);
    let a = g0(&w1, &w2, &p).unwrap();
    assert!(rel(&g0(&w2, &w1, &p).unwrap(), &a) < 1e-12);
    assert!(
        rel(
            &g0(&w1.scaled(Complex64::new(-2.5, 0.0)), &w2, &p).unwrap(),
            &a.scaled(-2.5)
        ) < 1e-12
    );
    let rot = Complex64::from_polar(1.0, 1.1);
    let b = g0(&w1.scaled(rot), &w2.scaled(rot), &p).unwrap();
    assert!(rel(&b, &a) < 1e-12);
    let doubled = ModelParams {
        lambda: 2.0 * p.lambda,
        ..p
    };
    assert!(rel(&g0(&w1, &w2, &doubled).unwrap(), &a.scaled(2.0)) < 1e-12);
}

#[test]
fn g0_of_gaussian_pair_matches_coulomb_kernel() {
    // |xi|^-2 in three dimensions is convolution with 1 / (4 pi |x|)
    // large box keeps the periodic image correction beyond the mean parabola small
    let grid = GridSpec::new(3, 64, 32.0).unwrap();
    let p = params();
    let (s1, s2) = (2.0f64, 2.5f64);
    let theta = 0.9;
    let w1 = gaussian(grid, Complex64::new(1.0, 0.0), s1, [0.0; 3]);
    let w2 = gaussian(grid, Complex64::from_polar(0.8, theta), s2, [0.0; 3]);
    let sigma = (1.0 / (1.0 / (s1 * s1) + 1.0 / (s2 * s2))).sqrt();
    let charge = 0.8 * theta.cos() * (2.0 * PI * sigma * sigma).powf(1.5);
    let g = g0(&w1, &w2, &p).unwrap();
    let mean = charge / grid.box_volume();
    let mut diffs = Vec::new();
    let mut scale = 0.0f64;
    for (x, v) in grid.nodes().zip(g.values()) {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r <= 3.0 {
            let pot = if r < 1e-12 {
                (2.0 / PI).sqrt() / sigma
            } else {
                erf(r / (2f64.sqrt() * sigma)) / r
            };
            let whole = p.lambda * (charge * pot / (4.0 * PI) - mean * r * r / 6.0);
            diffs.push(v - whole);
            scale = scale.max(whole.abs());
        }
    }
    let offset = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let spread = diffs.iter().map(|d| (d - offset).abs()).fold(0.0, f64::max);
    assert!(
        spread / scale < 1e-3,
        "relative interior error {}",
        spread / scale
    );
}

#[test]
fn g_diag_is_g0_of_back_propagated_field_and_tends_to_g0() {
    let grid = GridSpec::new(3, 16, 8.0).unwrap();
    let p = params();
    let (w, _) = pair(grid);
    let t = 3.0;
    let y = half_propagate_back(&w, t).unwrap();
    assert!(rel(&g_diag(&w, t, &p).unwrap(), &g0(&y, &y, &p).unwrap()) < 1e-12);
    let limit = g0(&w, &w, &p).unwrap();
    let e1 = rel(&g_diag(&w, 1e3, &p).unwrap(), &limit);
    let e2 = rel(&g_diag(&w, 1e4, &p).unwrap(), &limit);
    assert!(e2 < e1 && e2 < 1e-3, "{e1} {e2}");
}

proptest! {
    #[test]
    fn admissibility_survives_raising_both_indices(
        n in 3usize..=5, mu_step in 1usize..50, k in 0usize..10, l in 0usize..10,
    ) {
        let mu = 0.1 * mu_step as f64;
        prop_assume!(mu < n as f64);
        if check_admissible(n, mu, k, l).unwrap().is_admissible() {
            prop_assert!(check_admissible(n, mu, k + 1, l + 1).unwrap().is_admissible());
        }
    }

    #[test]
    fn admissibility_survives_lowering_mu(
        n in 3usize..=5, mu_step in 2usize..50, k in 0usize..=10, l in 0usize..=10,
    ) {
        let mu = 0.1 * mu_step as f64;
        prop_assume!(mu < n as f64);
        if check_admissible(n, mu, k, l).unwrap().is_admissible() {
            prop_assert!(check_admissible(n, mu - 0.1, k, l).unwrap().is_admissible());
        }
    }
}

#[test]
fn g0_difference_of_squares_form() {
    let grid = GridSpec::new(3, 16, 8.0).unwrap();
    let p = params();
    let (w1, w2) = pair(grid);
    let lhs = g0(&w1, &w1, &p)
        .unwrap()
        .sub(&g0(&w2, &w2, &p).unwrap())
        .unwrap();
    let rhs = g0(&w1.sub(&w2).unwrap(), &w1.add(&w2).unwrap(), &p).unwrap();
    assert!(rel(&lhs, &rhs) < 1e-10, "{}", rel(&lhs, &rhs));
}

#[test]
fn g0_quadratic_scaling_and_zero_coupling() {
    let grid = GridSpec::new(3, 16, 8.0).unwrap();
    let p = params();
    let (w, _) = pair(grid);
    let c = Complex64::new(1.3, -0.7);
    let base = g0(&w, &w, &p).unwrap();
    let scaled = g0(&w.scaled(c), &w.scaled(c), &p).unwrap();
    assert!(rel(&scaled, &base.scaled(c.norm_sqr())) < 1e-10);
    let off = ModelParams { lambda: 0.0, ..p };
    assert_eq!(g0(&w, &w, &off).unwrap().max_abs(), 0.0);
    assert_eq!(g_diag(&w, 2.0, &off).unwrap().max_abs(), 0.0);
}

#[test]
fn g_diag_at_large_time_is_close_to_g0() {
    let grid = GridSpec::new(3, 16, 8.0).unwrap();
    let p = params();
    let (w, _) = pair(grid);
    let e = rel(&g_diag(&w, 1e6, &p).unwrap(), &g0(&w, &w, &p).unwrap());
    assert!(e <= 1e-5, "{e}");
}
