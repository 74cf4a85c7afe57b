use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ultraslow::hadamard::{hadamard_derivative_left, hadamard_derivative_right, reflect_q, HadamardOptions};
use ultraslow::mittag_leffler::ml;
use ultraslow::quadrature::Grading;
use ultraslow::solver::{
    adjoint_solution, final_gradient, forced_solution, forced_solution_with, free_solution, ControlGrid, ControlSignal,
    LogClock, Plant,
};
use ultraslow::spectral::{dirichlet_eigenpairs, BasisKind, Rect, Region, SpectralBasis};
use ultraslow::{Error, LogTimeWindow};

// ∫_0^{ln 2} s^{-0.3} E_{0.7,0.7}(-π² s^0.7) ds, 50-digit mpmath (tests/oracles/ml_oracle.py).
const FORCED_ORACLE: f64 = 0.096409614750777755444;

fn window() -> LogTimeWindow {
    LogTimeWindow::new(2.0, 4.0).unwrap()
}

fn unit_interval(cutoff: usize) -> SpectralBasis {
    dirichlet_eigenpairs(&Rect::unit(1), cutoff, BasisKind::Canonical).unwrap()
}

/// One mode with λ = π², one actuator with d = 1.
fn scalar_plant(alpha: f64) -> Plant {
    Plant::from_coefficients(unit_interval(1), DMatrix::from_element(1, 1, 1.0), alpha, window()).unwrap()
}

fn smooth_grid() -> ControlGrid {
    ControlGrid::smooth(window(), LogClock::ToFinal, Grading::default()).unwrap()
}

/// Composite Simpson on s = v^{1/α}, which turns s^{α-1} ds into dv/α.
fn brute_force_forced(alpha: f64, lambda: f64, s_max: f64) -> f64 {
    let n = 20_000;
    let v_max = s_max.powf(alpha);
    let h = v_max / n as f64;
    let f = |v: f64| ml(alpha, alpha, -lambda * v).unwrap() / alpha;
    let mut acc = f(0.0) + f(v_max);
    for j in 1..n {
        acc += f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn zero_control_gives_zero_state() {
    let plant = scalar_plant(0.7);
    let u = ControlSignal::zeros(1, smooth_grid());
    for t in [2.5, 3.3, 4.0] {
        assert_eq!(forced_solution(&plant, &u, t).unwrap().coeffs.abs().max(), 0.0);
    }
}

#[test]
fn constant_control_single_mode_matches_oracles() {
    let plant = scalar_plant(0.7);
    let energy_grid = ControlGrid::for_energy(0.7, window(), None, Grading::default()).unwrap();
    for grid in [smooth_grid(), energy_grid] {
        let u = ControlSignal::from_fn(grid, 1, |_, _| 1.0).unwrap();
        let z = forced_solution(&plant, &u, 4.0).unwrap();
        assert_relative_eq!(z.coeffs[0], FORCED_ORACLE, max_relative = 1e-9);
    }
    let u = ControlSignal::from_fn(smooth_grid(), 1, |_, _| 1.0).unwrap();
    for t in [2.3, 3.0, 3.7] {
        let z = forced_solution(&plant, &u, t).unwrap().coeffs[0];
        let brute = brute_force_forced(0.7, PI * PI, (t / 2.0).ln());
        assert_relative_eq!(z, brute, max_relative = 1e-9);
    }
}

#[test]
fn classical_order_reduces_to_exponentials() {
    let plant = scalar_plant(1.0);
    let lambda = PI * PI;
    let u = ControlSignal::from_fn(smooth_grid(), 1, |_, _| 1.0).unwrap();
    for t in [2.5, 3.2, 4.0] {
        let z = forced_solution(&plant, &u, t).unwrap().coeffs[0];
        assert_relative_eq!(z, (1.0 - (2.0 / t).powf(lambda)) / lambda, max_relative = 1e-10);
        let free = free_solution(&plant, &DVector::from_element(1, 1.0), t).unwrap().coeffs[0];
        assert_relative_eq!(free, (2.0 / t).powf(lambda), max_relative = 1e-10);
        let adj = adjoint_solution(&plant, &DVector::from_element(1, 1.0), t).unwrap().coeffs[0];
        assert_relative_eq!(adj, (t / 4.0).powf(lambda), max_relative = 1e-10);
    }
    assert_eq!(adjoint_solution(&plant, &DVector::from_element(1, 2.0), 4.0).unwrap().coeffs[0], 2.0);

    // λ = 0 makes the kernel identically one: z(t) = ln(t/a).
    let mut flat = unit_interval(1);
    flat.modes[0].lambda = 0.0;
    flat.buckets[0].lambda = 0.0;
    let plant = Plant::from_coefficients(flat, DMatrix::from_element(1, 1, 1.0), 1.0, window()).unwrap();
    for t in [2.5, 4.0] {
        assert_relative_eq!(forced_solution(&plant, &u, t).unwrap().coeffs[0], (t / 2.0).ln(), max_relative = 1e-12);
    }
}

#[test]
fn forced_solution_domain_and_channel_errors() {
    let plant = scalar_plant(0.7);
    let u = ControlSignal::zeros(1, smooth_grid());
    assert!(matches!(forced_solution(&plant, &u, 2.0), Err(Error::Domain(_))));
    assert!(matches!(forced_solution(&plant, &u, 1.5), Err(Error::Domain(_))));
    let two = ControlSignal::zeros(2, smooth_grid());
    assert!(matches!(forced_solution(&plant, &two, 3.0), Err(Error::Config(_))));
}

#[test]
fn forced_solution_is_superposable() {
    let basis = dirichlet_eigenpairs(&Rect::new(vec![[-1.0, 1.0], [-1.0, 1.0]]).unwrap(), 3, BasisKind::Canonical).unwrap();
    let d = DMatrix::from_fn(2, basis.len(), |i, k| ((i + 1) as f64 * 0.7 + k as f64).sin());
    let plant = Plant::from_coefficients(basis, d, 0.6, window()).unwrap();
    let grid = smooth_grid();
    let u1 = ControlSignal::from_fn(grid.clone(), 2, |i, t| (t * (i + 1) as f64).cos()).unwrap();
    let u2 = ControlSignal::from_fn(grid, 2, |i, t| t.ln().powi(i as i32 + 1)).unwrap();
    let sum = u1.combine(1.0, &u2, 1.0).unwrap();
    for t in [2.7, 4.0] {
        let lhs = forced_solution(&plant, &sum, t).unwrap().coeffs;
        let rhs = forced_solution(&plant, &u1, t).unwrap().coeffs + forced_solution(&plant, &u2, t).unwrap().coeffs;
        assert!((lhs - rhs).abs().max() <= 1e-10);
    }
}

#[test]
fn forced_solution_converges_under_refinement() {
    let basis = dirichlet_eigenpairs(&Rect::new(vec![[-1.0, 1.0], [-1.0, 1.0]]).unwrap(), 6, BasisKind::Canonical).unwrap();
    let d = DMatrix::from_fn(1, basis.len(), |_, k| 1.0 / (1.0 + k as f64));
    for alpha in [0.3, 0.5, 0.7] {
        let plant = Plant::from_coefficients(basis.clone(), d.clone(), alpha, window()).unwrap();
        let control = |_: usize, t: f64| 1.0 + (2.0 * t).sin();
        let coarse_grid = ControlGrid::smooth(window(), LogClock::ToFinal, Grading::default()).unwrap();
        let fine_grid = ControlGrid::smooth(window(), LogClock::ToFinal, Grading::default().refined()).unwrap();
        let coarse = forced_solution(&plant, &ControlSignal::from_fn(coarse_grid.clone(), 1, control).unwrap(), 4.0).unwrap();
        let fine = forced_solution(&plant, &ControlSignal::from_fn(fine_grid, 1, control).unwrap(), 4.0).unwrap();
        let rel = (&coarse.coeffs - &fine.coeffs).abs().max() / fine.coeffs.abs().max();
        assert!(rel <= 1e-8, "alpha={alpha}: final-time change {rel}");

        let u = ControlSignal::from_fn(coarse_grid, 1, control).unwrap();
        let a = forced_solution_with(&plant, &u, 3.1, Grading::default()).unwrap();
        let b = forced_solution_with(&plant, &u, 3.1, Grading::default().refined()).unwrap();
        let rel = (&a.coeffs - &b.coeffs).abs().max() / b.coeffs.abs().max();
        assert!(rel <= 1e-8, "alpha={alpha}: interior change {rel}");
    }
}

#[test]
fn free_solution_basics() {
    let plant = scalar_plant(0.5);
    let z0 = DVector::from_element(1, 1.7);
    assert_eq!(free_solution(&plant, &z0, 2.0).unwrap().coeffs[0], 1.7);
    let z = free_solution(&plant, &z0, 4.0).unwrap().coeffs[0];
    assert_relative_eq!(z, 1.7 * ml(0.5, 1.0, -PI * PI * 2f64.ln().sqrt()).unwrap(), max_relative = 1e-14);
}

/// ^{HC}D^α z = D^α (z - z(a)), evaluated from solution values only.
fn caputo_residual(plant: &Plant, lambda: f64, t: f64) -> f64 {
    let w = plant.window;
    let z0 = DVector::from_element(1, 1.0);
    let z = |s: f64| free_solution(plant, &z0, s).unwrap().coeffs[0];
    let opts = HadamardOptions { initial_exponent: Some(plant.alpha), ..Default::default() };
    let d = hadamard_derivative_left(|s| z(s) - 1.0, plant.alpha, &w, t, opts).unwrap();
    d + lambda * z(t)
}

#[test]
fn free_solution_satisfies_the_fractional_ode() {
    let w = window();
    for alpha in [0.3, 0.5, 0.7] {
        for scale in [1.0, 5.0] {
            let mut basis = unit_interval(1);
            let lambda = scale * PI * PI;
            basis.modes[0].lambda = lambda;
            basis.buckets[0].lambda = lambda;
            let plant = Plant::from_coefficients(basis, DMatrix::from_element(1, 1, 1.0), alpha, w).unwrap();
            for j in 0..10 {
                let t = w.a * (w.log_length() * (0.08 + 0.09 * j as f64)).exp();
                let r = caputo_residual(&plant, lambda, t);
                assert!(r.abs() <= 1e-5, "alpha={alpha} lambda={lambda} t={t}: residual {r}");
            }
        }
    }
    let plant = scalar_plant(0.5);
    assert!(caputo_residual(&plant, PI * PI, 4.0).abs() <= 1e-6);
}

#[test]
fn adjoint_solution_properties() {
    let plant = scalar_plant(0.7);
    assert_eq!(adjoint_solution(&plant, &DVector::zeros(1), 3.0).unwrap().coeffs[0], 0.0);
    assert!(matches!(adjoint_solution(&plant, &DVector::from_element(1, 1.0), 4.0), Err(Error::SingularEndpoint(_))));

    // Right Hadamard derivative: D_b^α φ = -λ φ, and through Q: D_a^α Qφ = -λ Qφ.
    let w = window();
    let lambda = PI * PI;
    let phi = |t: f64| adjoint_solution(&plant, &DVector::from_element(1, 1.0), t).unwrap().coeffs[0];
    let opts = HadamardOptions { initial_exponent: Some(-0.3), ..Default::default() };
    for j in 0..10 {
        let t = w.a * (w.log_length() * (0.05 + 0.09 * j as f64)).exp();
        let r = hadamard_derivative_right(phi, 0.7, &w, t, opts).unwrap() + lambda * phi(t);
        assert!(r.abs() <= 1e-5, "t={t}: right residual {r}");
        let q = hadamard_derivative_left(reflect_q(&w, phi), 0.7, &w, w.reflect(t), opts).unwrap() + lambda * phi(t);
        assert!(q.abs() <= 1e-5, "t={t}: reflected residual {q}");
    }
}

#[test]
fn final_gradient_norms() {
    let basis = unit_interval(4);
    let omega = Region::whole(&basis.domain);
    let w = window();
    let zero = ultraslow::solver::SpectralState::zeros(&basis, 4.0);
    assert_eq!(final_gradient(&zero, &basis, &omega, &w).unwrap().norm_squared(), 0.0);
    for k in 0..4 {
        let mut c = DVector::zeros(4);
        c[k] = 0.8;
        let state = ultraslow::solver::SpectralState::new(&basis, 4.0, c).unwrap();
        let g = final_gradient(&state, &basis, &omega, &w).unwrap();
        assert_relative_eq!(g.norm_squared(), basis.modes[k].lambda * 0.64, max_relative = 1e-10);
    }
    let early = ultraslow::solver::SpectralState::zeros(&basis, 3.0);
    assert!(final_gradient(&early, &basis, &omega, &w).is_err());
}

#[test]
fn csv_exports() {
    let basis = unit_interval(2);
    let state = ultraslow::solver::SpectralState::new(&basis, 4.0, DVector::from_vec(vec![1.0, -0.5])).unwrap();
    let csv = state.to_csv();
    assert!(csv.starts_with("mode,index,lambda,coefficient\n0,1,"));
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(state.field_csv(&basis, 5).lines().count(), 6);
    let u = ControlSignal::from_fn(smooth_grid(), 2, |i, t| i as f64 + t).unwrap();
    let series = u.to_csv();
    assert!(series.starts_with("t,ln_b_over_t,u_1,u_2\n"));
    let first: Vec<f64> = series.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(first[0] > 2.0 && first[0] < 2.01);
}

#[test]
fn energy_of_unit_control_is_window_length() {
    for grid in [smooth_grid(), ControlGrid::for_energy(0.7, window(), None, Grading::default()).unwrap()] {
        let u = ControlSignal::from_fn(grid, 1, |_, _| 1.0).unwrap();
        assert_relative_eq!(u.energy(), 2.0, max_relative = 1e-12);
    }
    assert!(matches!(ControlGrid::for_energy(0.4, window(), None, Grading::default()), Err(Error::DivergentGramian { .. })));
    assert!(ControlGrid::for_energy(0.4, window(), Some(1e-3), Grading::default()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interpolation_reproduces_cubics_in_log_time(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c3 in -1.0f64..1.0, t in 2.0f64..4.0) {
        let p = move |t: f64| { let s = (4.0f64 / t).ln(); c0 + c1 * s + c3 * s.powi(3) };
        let u = ControlSignal::from_fn(smooth_grid(), 1, |_, t| p(t)).unwrap();
        prop_assert!((u.value_at(0, t) - p(t)).abs() <= 1e-10);
    }

    #[test]
    fn free_solution_decays_monotonically(alpha in 0.2f64..1.0, t1 in 2.0f64..4.0, dt in 0.0f64..1.0) {
        let plant = scalar_plant(alpha);
        let z0 = DVector::from_element(1, 1.0);
        let t2 = (t1 + dt).min(4.0);
        let a = free_solution(&plant, &z0, t1).unwrap().coeffs[0];
        let b = free_solution(&plant, &z0, t2).unwrap().coeffs[0];
        prop_assert!(b <= a + 1e-15 && b > 0.0);
    }
}
