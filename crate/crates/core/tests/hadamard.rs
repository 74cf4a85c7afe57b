use approx::assert_relative_eq;
use proptest::prelude::*;
use ultraslow::hadamard::{
    delta_left_integral_log, hadamard_caputo_left, hadamard_caputo_left_log, hadamard_caputo_left_from_derivative, hadamard_derivative_left,
    hadamard_derivative_right, hadamard_integral_left, hadamard_integral_right, left_integral_raw, reflect_q,
    right_integral_raw, HadamardOptions,
};
use ultraslow::mittag_leffler::{free_propagator, ml};
use ultraslow::special::gamma;
use ultraslow::LogTimeWindow;

const ORDERS: [f64; 3] = [0.3, 0.5, 0.7];

fn window() -> LogTimeWindow {
    LogTimeWindow::new(2.0, 4.0).unwrap()
}

fn test_functions() -> Vec<(&'static str, Box<dyn Fn(f64) -> f64>)> {
    vec![
        ("quadratic log", Box::new(|t: f64| 1.0 + (t / 2.0).ln().powi(2))),
        ("sine", Box::new(|t: f64| t.sin())),
        ("decaying exponential", Box::new(|t: f64| (-t / 3.0).exp())),
        ("rational", Box::new(|t: f64| 1.0 / (1.0 + t))),
        ("cubic in ln t", Box::new(|t: f64| t.ln().powi(3) - t.ln())),
    ]
}

fn interior_points(w: &LogTimeWindow) -> Vec<f64> {
    let l = w.log_length();
    (0..20).map(|j| w.a * (l * (0.04 + 0.92 * j as f64 / 19.0)).exp()).collect()
}

#[test]
fn reflection_left_integral_equals_right_integral_of_reflection() {
    let w = window();
    let o = HadamardOptions::default();
    for alpha in ORDERS {
        for (name, f) in test_functions() {
            for t in interior_points(&w) {
                // Q I_a f (t)
                let lhs = hadamard_integral_left(&f, alpha, &w, w.reflect(t), o).unwrap();
                // I_b (Q f)(t), direct right kernel
                let rhs = right_integral_raw(reflect_q(&w, &f), alpha, w.b, t, o).unwrap();
                assert!((lhs - rhs).abs() < 1e-6, "(i) {name} alpha={alpha} t={t}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn left_integral_of_reflection_equals_reflected_right_integral() {
    let w = window();
    let o = HadamardOptions::default();
    for alpha in ORDERS {
        for (name, f) in test_functions() {
            for t in interior_points(&w) {
                let lhs = hadamard_integral_left(reflect_q(&w, &f), alpha, &w, t, o).unwrap();
                let rhs = right_integral_raw(&f, alpha, w.b, w.reflect(t), o).unwrap();
                assert!((lhs - rhs).abs() < 1e-6, "(iii) {name} alpha={alpha} t={t}: {lhs} vs {rhs}");
                let via_q = hadamard_integral_right(&f, alpha, &w, w.reflect(t), o).unwrap();
                assert!((via_q - rhs).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn reflection_swaps_left_and_right_derivatives() {
    let w = window();
    let o = HadamardOptions::default();
    for alpha in ORDERS {
        for (name, f) in test_functions() {
            for t in interior_points(&w) {
                // (ii) Q D_a f = D_b Q f
                let lhs = hadamard_derivative_left(&f, alpha, &w, w.reflect(t), o).unwrap();
                let rhs = hadamard_derivative_right(reflect_q(&w, &f), alpha, &w, t, o).unwrap();
                assert!((lhs - rhs).abs() < 1e-6, "(ii) {name} alpha={alpha} t={t}: {lhs} vs {rhs}");
                // (iv) D_a Q f = Q D_b f
                let lhs = hadamard_derivative_left(reflect_q(&w, &f), alpha, &w, t, o).unwrap();
                let rhs = hadamard_derivative_right(&f, alpha, &w, w.reflect(t), o).unwrap();
                assert!((lhs - rhs).abs() < 1e-6, "(iv) {name} alpha={alpha} t={t}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn derivative_of_constant_matches_closed_form() {
    // D_a^α 1 = (ln t/a)^{-α}/Γ(1-α)
    let w = window();
    let o = HadamardOptions::default();
    for alpha in ORDERS {
        for t in interior_points(&w) {
            let u = (t / w.a).ln();
            let d = hadamard_derivative_left(|_| 1.0, alpha, &w, t, o).unwrap();
            assert_relative_eq!(d, u.powf(-alpha) / gamma(1.0 - alpha), max_relative = 1e-7);
        }
    }
}

#[test]
fn integral_closed_forms() {
    let w = window();
    let o = HadamardOptions::default();
    let l = 2f64.ln();
    assert_relative_eq!(
        hadamard_integral_left(|_| 1.0, 0.5, &w, 4.0, o).unwrap(),
        l.sqrt() / gamma(1.5),
        max_relative = 1e-13
    );
    assert_relative_eq!(
        hadamard_integral_left(|s: f64| (s / 2.0).ln(), 0.5, &w, 4.0, o).unwrap(),
        gamma(2.0) / gamma(2.5) * l.powf(1.5),
        max_relative = 1e-13
    );
    assert_relative_eq!(
        hadamard_integral_right(|_| 1.0, 0.5, &w, 2.0, o).unwrap(),
        l.sqrt() / gamma(1.5),
        max_relative = 1e-13
    );
    // A polynomial in ln s through the Q identity.
    let p = |s: f64| 2.0 - s.ln() + 0.5 * s.ln().powi(2);
    for t in [2.2, 3.0, 3.7] {
        let direct = right_integral_raw(p, 0.4, w.b, t, o).unwrap();
        assert_relative_eq!(hadamard_integral_right(p, 0.4, &w, t, o).unwrap(), direct, max_relative = 1e-12);
    }
}

#[test]
fn caputo_of_log_powers() {
    let w = window();
    for alpha in ORDERS {
        for &p in &[1.0, 2.0, 1.5, 2.7] {
            // δ(ln s/a)^p = p (ln s/a)^{p-1}
            let opts = HadamardOptions { initial_exponent: Some(p - 1.0), ..Default::default() };
            for t in interior_points(&w) {
                let u = (t / w.a).ln();
                let got = hadamard_caputo_left_log(|sigma: f64| p * sigma.powf(p - 1.0), alpha, &w, t, opts).unwrap();
                let exact = gamma(p + 1.0) / gamma(p + 1.0 - alpha) * u.powf(p - alpha);
                assert!((got - exact).abs() < 1e-7, "alpha={alpha} p={p} t={t}: {got} vs {exact}");
            }
        }
    }
    // Spec example with the plain Gauss-Jacobi scheme.
    let got = hadamard_caputo_left_from_derivative(|s: f64| 1.0 / s, 0.5, &w, 4.0, HadamardOptions::default()).unwrap();
    assert_relative_eq!(got, gamma(2.0) / gamma(1.5) * 2f64.ln().sqrt(), max_relative = 1e-12);
}

#[test]
fn caputo_kills_constants() {
    let w = window();
    let v = hadamard_caputo_left(|_| 0.0, 0.5, &w, 3.0, HadamardOptions::default()).unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn mittag_leffler_is_a_caputo_eigenfunction() {
    let w = window();
    let lambda = std::f64::consts::PI.powi(2);
    for alpha in ORDERS {
        let opts = HadamardOptions { initial_exponent: Some(alpha - 1.0), ..Default::default() };
        for t in interior_points(&w) {
            let delta = |sigma: f64| {
                -lambda * sigma.powf(alpha - 1.0) * ml(alpha, alpha, -lambda * sigma.powf(alpha)).unwrap()
            };
            let d = hadamard_caputo_left_log(delta, alpha, &w, t, opts).unwrap();
            let z = free_propagator(alpha, lambda, &w, t).unwrap();
            assert!((d + lambda * z).abs() < 1e-6, "alpha={alpha} t={t}: {d} vs {}", -lambda * z);
        }
    }
}

#[test]
fn semigroup_property() {
    let w = window();
    for (alpha, beta) in [(0.3, 0.5), (0.5, 0.5), (0.2, 0.7), (0.4, 0.3)] {
        for (name, f) in test_functions() {
            for t in interior_points(&w) {
                let inner = |s: f64| left_integral_raw(&f, beta, w.a, s, HadamardOptions::default()).unwrap();
                let outer_opts = HadamardOptions { initial_exponent: Some(beta), ..Default::default() };
                let lhs = hadamard_integral_left(inner, alpha, &w, t, outer_opts).unwrap();
                let rhs = hadamard_integral_left(&f, alpha + beta, &w, t, HadamardOptions::default()).unwrap();
                assert!((lhs - rhs).abs() < 1e-7, "{name} ({alpha},{beta}) t={t}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn caputo_inverts_the_integral() {
    let w = window();
    let f = |s: f64| 1.0 + s.sin();
    let df = |s: f64| s * s.cos();
    for alpha in ORDERS {
        let opts = HadamardOptions { initial_exponent: Some(alpha - 1.0), ..Default::default() };
        for t in interior_points(&w) {
            let delta_g = |sigma: f64| delta_left_integral_log(f, df, alpha, &w, sigma, HadamardOptions::default()).unwrap();
            let back = hadamard_caputo_left_log(delta_g, alpha, &w, t, opts).unwrap();
            assert!((back - f(t)).abs() < 1e-6, "alpha={alpha} t={t}: {back} vs {}", f(t));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_is_an_involution(t in 2.0f64..4.0, c in -3.0f64..3.0) {
        let w = window();
        let f = move |s: f64| (c * s).sin() + s.ln();
        let qq = reflect_q(&w, reflect_q(&w, f));
        prop_assert!((qq(t) - f(t)).abs() < 1e-12);
    }

    #[test]
    fn integrals_are_linear(alpha in 0.1f64..1.0, t in 2.05f64..4.0, c in -5.0f64..5.0) {
        let w = window();
        let o = HadamardOptions::default();
        let f = |s: f64| s.cos();
        let g = |s: f64| s.ln().powi(2);
        let lhs = hadamard_integral_left(|s| f(s) + c * g(s), alpha, &w, t, o).unwrap();
        let rhs = hadamard_integral_left(f, alpha, &w, t, o).unwrap() + c * hadamard_integral_left(g, alpha, &w, t, o).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }
}
