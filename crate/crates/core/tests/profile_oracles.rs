use dollard::model::{g0, g_diag, ModelParams};
use dollard::profiles::{
    dollard_weight, free_phase_integral, gauss_legendre_panels, geometric_quadrature,
    phase_pair_series, phase_tail_bound, phase_tails, phi02_of_t, phi0_from_phi02, phi0_of_t,
    s02_of_t, s0_minus_s02_tail, s0_of_t, AsymptoticDatum, QuadratureConfig,
};
use dollard::spectral::norms::real_l2_norm;
use dollard::spectral::{gradient, x_norm, ComplexField, GridSpec, RealField, VectorField};
use dollard::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(3, 16, 8.0).unwrap()
}

fn params(gamma: f64) -> ModelParams {
    ModelParams::new(3, 1.0, gamma, 1.0).unwrap()
}

/// Gaussian with a drift phase, so the free flow changes its modulus at first order.
fn w_plus(grid: GridSpec, amp: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::from_polar(amp * (-r2 / 2.0).exp(), 0.4 * x[0] - 0.2 * x[1])
    })
}

fn bump(grid: GridSpec, amp: f64) -> RealField {
    RealField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        amp * (-r2 / 3.0).exp() * (1.0 + 0.2 * x[2])
    })
}

fn datum(amp: f64) -> AsymptoticDatum {
    let g = grid();
    AsymptoticDatum::new(w_plus(g, amp), bump(g, 0.05)).unwrap()
}

fn vec_l2(s: &VectorField) -> f64 {
    s.components()
        .iter()
        .map(|c| real_l2_norm(c).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn vec_gap(a: &VectorField, b: &VectorField) -> f64 {
    vec_l2(&a.sub(b).unwrap())
}

fn sup(f: &RealField) -> f64 {
    f.max_abs()
}

/// Composite Simpson in `u = ln tau` with `m` (even) intervals.
fn log_simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> RealField) -> RealField {
    let (ua, ub) = (a.ln(), b.ln());
    let h = (ub - ua) / m as f64;
    let mut acc: Option<RealField> = None;
    for j in 0..=m {
        let u = ua + h * j as f64;
        let wt = if j == 0 || j == m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let term = f(u.exp()).scaled(wt * h / 3.0 * u.exp());
        acc = Some(match acc {
            None => term,
            Some(s) => s.add(&term).unwrap(),
        });
    }
    acc.unwrap()
}

#[test]
fn closed_forms_start_from_the_datum() {
    let p = params(0.8);
    let d = datum(0.3);
    let phi = phi02_of_t(&d, 1.0, &p).unwrap();
    assert!(sup(&phi.sub(&d.phi02_at_1).unwrap()) == 0.0);
    let s = s02_of_t(&d, 1.0, &p).unwrap();
    assert!(vec_gap(&s, &d.s02_at_1()) == 0.0);
}

#[test]
fn zero_state_freezes_the_profiles() {
    let p = params(0.8);
    let g = grid();
    let d = AsymptoticDatum::new(ComplexField::zeros(g), bump(g, 0.1)).unwrap();
    for t in [3.0, 1e3, 1e7] {
        assert!(sup(&phi02_of_t(&d, t, &p).unwrap().sub(&d.phi02_at_1).unwrap()) == 0.0);
        assert!(vec_gap(&s02_of_t(&d, t, &p).unwrap(), &d.s02_at_1()) == 0.0);
    }
}

#[test]
fn phase_growth_matches_weighted_potential() {
    let p = params(0.8);
    let d = datum(0.3);
    let g = g0(&d.w_plus, &d.w_plus, &p).unwrap();
    // weight from an independent integration of tau^-0.8 on [1, 10]
    let m = 2000;
    let h = 9.0 / m as f64;
    let weight: f64 = (0..=m)
        .map(|j| {
            let tau = 1.0 + h * j as f64;
            let c = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * tau.powf(-0.8)
        })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((weight - (10f64.powf(0.2) - 1.0) / 0.2).abs() < 1e-10);
    let grown = phi02_of_t(&d, 10.0, &p)
        .unwrap()
        .sub(&d.phi02_at_1)
        .unwrap();
    let expect = g.scaled(weight);
    assert!(sup(&grown.sub(&expect).unwrap()) <= 1e-10 * sup(&expect));
}

#[test]
fn unit_gamma_is_rejected() {
    let p = ModelParams {
        gamma: 1.0,
        ..params(0.8)
    };
    let d = datum(0.3);
    assert!(matches!(
        phi02_of_t(&d, 2.0, &p),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(s02_of_t(&d, 2.0, &p), Err(Error::Unsupported(_))));
}

#[test]
fn gradients_of_phases_are_the_velocities() {
    let p = params(0.7);
    let d = datum(0.3);
    let q = QuadratureConfig::default();
    let phi0_1 = bump(grid(), -0.02);
    let s0_1 = gradient(&phi0_1);
    for t in [1.0, 4.0, 90.0, 2.5e4] {
        let s02 = s02_of_t(&d, t, &p).unwrap();
        let gap = gradient(&phi02_of_t(&d, t, &p).unwrap())
            .sub(&s02)
            .unwrap()
            .max_length();
        assert!(gap <= 1e-10, "phi02 at {t}: {gap}");
        let s0 = s0_of_t(&d, &s0_1, t, &p, &q).unwrap();
        let phi0 = phi0_of_t(&d, &phi0_1, t, &p, &q).unwrap();
        let gap = gradient(&phi0).sub(&s0).unwrap().max_length();
        assert!(gap <= 1e-10, "phi0 at {t}: {gap}");
    }
}

#[test]
fn free_velocity_without_coupling_is_constant() {
    let p = ModelParams::new(3, 0.0, 0.8, 1.0).unwrap();
    let d = datum(0.3);
    let q = QuadratureConfig::default();
    let s1 = d.s02_at_1();
    for t in [1.0, 7.0, 1e5] {
        assert!(vec_gap(&s0_of_t(&d, &s1, t, &p, &q).unwrap(), &s1) == 0.0);
    }
    let p = params(0.8);
    assert!(vec_gap(&s0_of_t(&d, &s1, 1.0, &p, &q).unwrap(), &s1) == 0.0);
}

#[test]
fn free_phase_integral_matches_log_simpson() {
    let p = params(0.8);
    let d = datum(0.3);
    let q = QuadratureConfig::default();
    let got = free_phase_integral(&d.w_plus, 1.0, 300.0, &p, &q).unwrap();
    let oracle = log_simpson(1.0, 300.0, 4000, |tau| {
        g_diag(&d.w_plus, tau, &p).unwrap().scaled(tau.powf(-0.8))
    });
    let err = real_l2_norm(&got.sub(&oracle).unwrap());
    assert!(err <= 1e-7 * real_l2_norm(&oracle).max(1.0), "{err}");
}

#[test]
fn panel_rule_converges_at_high_order() {
    let g = grid();
    let field = bump(g, 1.0);
    let f = |tau: f64| Ok(field.scaled(tau.powf(-1.8) * (1.0 + 0.5 * (tau.ln()).sin())));
    let reference = gauss_legendre_panels(&g, 1.0, 100.0, 512, &f).unwrap();
    let err = |panels: usize| {
        let v = gauss_legendre_panels(&g, 1.0, 100.0, panels, &f).unwrap();
        real_l2_norm(&v.sub(&reference).unwrap())
    };
    let (e1, e2) = (err(2), err(4));
    // five-point rule: tenth order, so halving the panel width gains ~2^10
    assert!(e1 / e2 > 2f64.powi(7), "{e1} {e2}");
}

#[test]
fn quadrature_reproduces_power_weights() {
    let g = grid();
    let field = bump(g, 1.0);
    let q = QuadratureConfig::default();
    let got =
        geometric_quadrature(&g, 1.0, 1e6, &q, |tau| Ok(field.scaled(tau.powf(-0.65)))).unwrap();
    let exact = field.scaled(dollard_weight(1e6, 0.65));
    assert!(real_l2_norm(&got.sub(&exact).unwrap()) <= 1e-8 * dollard_weight(1e6, 0.65));
    let back =
        geometric_quadrature(&g, 1e6, 1.0, &q, |tau| Ok(field.scaled(tau.powf(-0.65)))).unwrap();
    assert!(real_l2_norm(&back.add(&got).unwrap()) == 0.0);
}

#[test]
fn quadrature_reports_non_convergence() {
    let g = grid();
    let field = bump(g, 1.0);
    let q = QuadratureConfig {
        tol: 1e-300,
        max_doublings: 2,
    };
    let r = geometric_quadrature(
        &g,
        1.0,
        10.0,
        &q,
        |tau| Ok(field.scaled((50.0 * tau).sin())),
    );
    assert!(matches!(r, Err(Error::Quadrature(_))));
}

#[test]
fn tails_vanish_for_zero_state_and_late_times() {
    let p = params(0.8);
    let q = QuadratureConfig::default();
    let g = grid();
    let zero = AsymptoticDatum::from_w_plus(ComplexField::zeros(g));
    let t = s0_minus_s02_tail(&zero, 5.0, &p, &q).unwrap();
    assert!(t.max_length() == 0.0);
    let d = datum(0.3);
    let late = phase_tails(&d.w_plus, &[1e13], &p, &q).unwrap();
    assert!(
        real_l2_norm(&late[0]) <= q.tol,
        "{}",
        real_l2_norm(&late[0])
    );
}

#[test]
fn tail_needs_gamma_above_one_half() {
    let q = QuadratureConfig::default();
    let d = datum(0.3);
    for gamma in [0.3, 0.5] {
        let p = params(gamma);
        assert!(matches!(
            phi0_from_phi02(&d, 4.0, &p, &q),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            s0_minus_s02_tail(&d, 4.0, &p, &q),
            Err(Error::Unsupported(_))
        ));
    }
}

#[test]
fn tail_is_stable_under_tolerance_halving() {
    let p = params(0.8);
    let d = datum(0.3);
    let coarse = QuadratureConfig {
        tol: 1e-6,
        ..Default::default()
    };
    let fine = QuadratureConfig {
        tol: 5e-7,
        ..Default::default()
    };
    let a = phi0_from_phi02(&d, 10.0, &p, &coarse).unwrap();
    let b = phi0_from_phi02(&d, 10.0, &p, &fine).unwrap();
    let change = real_l2_norm(&a.sub(&b).unwrap());
    assert!(change < coarse.tol, "{change}");
}

#[test]
fn tail_matches_brute_force_window_plus_bound() {
    let p = params(0.75);
    let d = datum(0.3);
    let q = QuadratureConfig::default();
    let got = phase_tails(&d.w_plus, &[10.0], &p, &q).unwrap().remove(0);
    let g_inf = g0(&d.w_plus, &d.w_plus, &p).unwrap();
    let far = 1e9;
    let window = log_simpson(10.0, far, 6000, |tau| {
        g_diag(&d.w_plus, tau, &p)
            .unwrap()
            .sub(&g_inf)
            .unwrap()
            .scaled(-tau.powf(-0.75))
    });
    let err = real_l2_norm(&got.sub(&window).unwrap());
    let allowance = phase_tail_bound(&d.w_plus, far, &p) + 1e-7;
    assert!(err <= allowance, "{err} vs {allowance}");
    assert!(real_l2_norm(&got) > 10.0 * allowance);
}

#[test]
fn batched_tails_agree_with_single_evaluations() {
    let p = params(0.8);
    let d = datum(0.3);
    let q = QuadratureConfig::default();
    let times = [40.0, 5.0, 600.0];
    let batch = phase_tails(&d.w_plus, &times, &p, &q).unwrap();
    for (t, b) in times.iter().zip(&batch) {
        let single = phase_tails(&d.w_plus, &[*t], &p, &q).unwrap().remove(0);
        assert!(real_l2_norm(&single.sub(b).unwrap()) <= 4.0 * q.tol);
    }
    let pairs = phase_pair_series(&d, &times, &p, &q).unwrap();
    for ((t, b), (p02, p0)) in times.iter().zip(&batch).zip(&pairs) {
        assert!(real_l2_norm(&p0.sub(p02).unwrap().sub(b).unwrap()) <= 1e-14);
        let s_tail = gradient(b);
        let direct = s0_minus_s02_tail(&d, *t, &p, &q).unwrap();
        assert!(vec_gap(&s_tail, &direct) <= 4.0 * q.tol * 10.0);
    }
}

#[test]
fn rescaled_velocity_stays_within_its_bound() {
    let p = params(0.75);
    let d = datum(0.3);
    let l = 2;
    let drift = gradient(&g0(&d.w_plus, &d.w_plus, &p).unwrap());
    let bound = x_norm(&d.s02_at_1(), l) + 2.0 / (1.0 - p.gamma) * x_norm(&drift, l);
    let mut t = 1.0;
    while t <= 1e6 {
        let s = s02_of_t(&d, t, &p).unwrap();
        let val = t.powf(p.gamma - 1.0) * x_norm(&s, l);
        assert!(val <= bound, "t = {t}: {val} > {bound}");
        t *= 4.0;
    }
    let b = d.b_norm(&p, l).unwrap();
    assert!(b >= x_norm(&d.s02_at_1(), l + 1));
}

#[test]
fn matched_velocity_gap_grows_no_faster_than_the_bound() {
    // s0 and s02 agree at t = 1; their gap is bounded by const t^(1-gamma)
    let p = params(0.75);
    let d = datum(0.3);
    let q = QuadratureConfig::default();
    let s1 = d.s02_at_1();
    let times: Vec<f64> = (0..9).map(|j| 4f64.powi(j)).collect();
    let gaps: Vec<f64> = times
        .iter()
        .map(|&t| {
            let gap = s0_of_t(&d, &s1, t, &p, &q)
                .unwrap()
                .sub(&s02_of_t(&d, t, &p).unwrap())
                .unwrap();
            x_norm(&gap, 1)
        })
        .collect();
    let ratios: Vec<f64> = gaps[1..]
        .iter()
        .zip(&times[1..])
        .map(|(g, t)| g / t.powf(1.0 - p.gamma))
        .collect();
    for w in ratios.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{ratios:?}");
    }
}

fn small_datum() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.05..0.5f64, -0.3..0.3f64, 0.55..0.95f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn phi02_gradient_identity_holds_everywhere((amp, shift, gamma) in small_datum(), t in 1.0..1e6f64) {
        let g = grid();
        let d = AsymptoticDatum::new(w_plus(g, amp), bump(g, shift)).unwrap();
        let p = params(gamma);
        let gap = gradient(&phi02_of_t(&d, t, &p).unwrap())
            .sub(&s02_of_t(&d, t, &p).unwrap())
            .unwrap()
            .max_length();
        prop_assert!(gap <= 1e-10);
    }

    #[test]
    fn phase_growth_is_quadratic_in_the_state((amp, _shift, gamma) in small_datum(), c in 0.2..3.0f64, t in 1.0..1e4f64) {
        let g = grid();
        let p = params(gamma);
        let d1 = AsymptoticDatum::from_w_plus(w_plus(g, amp));
        let d2 = AsymptoticDatum::from_w_plus(w_plus(g, c * amp));
        let a = phi02_of_t(&d1, t, &p).unwrap();
        let b = phi02_of_t(&d2, t, &p).unwrap();
        prop_assert!(sup(&b.sub(&a.scaled(c * c)).unwrap()) <= 1e-12 * sup(&b).max(1e-300));
    }
}
