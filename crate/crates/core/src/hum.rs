//! Minimum-energy control by the Hilbert Uniqueness Method: solve Fg = f - p_ω∇Ψ₂(b),
//! then u* = (1/t)B*φ with φ the adjoint state started from ∇*p_ω*g.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllability::{psd_range, InputMap};
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{free_solution, ControlSignal};
use crate::spectral::{gradient_gram, state_gram, Region};

/// Relative eigenvalue cutoff of the HUM solve and of every pseudo-inverse.
pub const SOLVE_TRUNCATION: f64 = 1e-12;
const RANGE_TOLERANCE: f64 = 1e-12;
/// Allowed decrease of J under an admissible perturbation.
pub const MINIMALITY_SLACK: f64 = 1e-9;
/// Relative agreement required with the pseudo-inverse minimum.
pub const PSEUDO_INVERSE_TOLERANCE: f64 = 1e-4;

/// What is steered on ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observation {
    /// p_ω∇z(b).
    Gradient,
    /// p_ωz(b).
    State,
}

/// Gram matrix of the observed basis fields on ω, reduced to its range:
/// Γ = U S Uᵀ and R = S^{1/2}Uᵀ maps coefficients to orthonormal coordinates.
#[derive(Debug, Clone)]
pub struct TargetSpace {
    pub observation: Observation,
    pub gram: DMatrix<f64>,
    pub reduce: DMatrix<f64>,
}

impl TargetSpace {
    pub fn new(map: &InputMap, region: &Region, observation: Observation) -> Result<Self> {
        let basis = &map.plant.basis;
        if let Err(problems) = region.validate_in(&basis.domain) {
            return Err(Error::Geometry(problems.join("; ")));
        }
        let gram = match observation {
            Observation::Gradient => gradient_gram(basis, region).gamma,
            Observation::State => state_gram(basis, region),
        };
        let (u, s) = psd_range(&gram, RANGE_TOLERANCE);
        let mut reduce = u.transpose();
        for (r, sr) in s.iter().enumerate() {
            reduce.row_mut(r).scale_mut(sr.sqrt());
        }
        Ok(Self { observation, gram, reduce })
    }

    pub fn dim(&self) -> usize {
        self.reduce.nrows()
    }

    /// ‖Σ c_k (observed φ_k)‖_{L²(ω)}.
    pub fn norm(&self, c: &DVector<f64>) -> f64 {
        c.dot(&(&self.gram * c)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct HumProblem {
    pub map: InputMap,
    pub space: TargetSpace,
    /// Target as coefficients of the observed basis fields on ω.
    pub target: DVector<f64>,
    pub initial_state: DVector<f64>,
}

impl HumProblem {
    pub fn new(map: InputMap, region: &Region, observation: Observation, target: DVector<f64>, initial_state: DVector<f64>) -> Result<Self> {
        let n = map.plant.modes();
        if target.len() != n || initial_state.len() != n {
            return Err(Error::Config(format!(
                "target has {} and initial state {} coefficients for {n} modes",
                target.len(),
                initial_state.len()
            )));
        }
        if target.iter().chain(initial_state.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("target and initial state must be finite".into()));
        }
        let space = TargetSpace::new(&map, region, observation)?;
        Ok(Self { map, space, target, initial_state })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub target_dim: usize,
    pub condition_number: Option<f64>,
    pub truncated: usize,
    pub ill_posed: bool,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HumSolution {
    /// g in basis coefficients (∇*p_ω*g has coefficients Γ g).
    pub g: DVector<f64>,
    /// Adjoint datum c = Γ g.
    pub adjoint_datum: DVector<f64>,
    pub control: ControlSignal,
    pub energy: f64,
    /// ‖p_ω∇z_{u*}(b) - f‖ / ‖f‖ (absolute when f = 0).
    pub residual: f64,
    pub final_state: DVector<f64>,
    pub free_final_state: DVector<f64>,
    pub diagnostics: SolveDiagnostics,
}

fn operator_in_target_coordinates(problem: &HumProblem, m: &DMatrix<f64>) -> DMatrix<f64> {
    let r = &problem.space.reduce;
    let p = r * m * r.transpose();
    (&p + p.transpose()) * 0.5
}

/// ∫_a^b ‖u(t)‖² dt.
pub fn energy(u: &ControlSignal) -> f64 {
    u.energy()
}

/// ‖g‖²_G = ∫_a^b ‖(1/t)B*K(t)∇*p_ω*g‖² dt on the input-map grid.
pub fn g_norm(map: &InputMap, space: &TargetSpace, g: &DVector<f64>) -> Result<f64> {
    Ok(map.adjoint(&(&space.gram * g))?.energy())
}

/// ⟨g, Fg⟩ = gᵀ Γ M Γ g.
pub fn g_pairing(map: &InputMap, space: &TargetSpace, g: &DVector<f64>) -> f64 {
    let c = &space.gram * g;
    c.dot(&(map.state_gramian() * &c))
}

pub fn solve_hum(problem: &HumProblem) -> Result<HumSolution> {
    let map = &problem.map;
    let b = map.plant.window.b;
    let free = free_solution(&map.plant, &problem.initial_state, b)?.coeffs;
    let rhs = &problem.space.reduce * (&problem.target - &free);

    let m = map.state_gramian();
    let p = operator_in_target_coordinates(problem, &m);
    let r = problem.space.dim();
    let mut diagnostics = SolveDiagnostics { target_dim: r, epsilon: map.epsilon(), ..Default::default() };
    let mut x = DVector::zeros(r);
    if r > 0 {
        let eig = SymmetricEigen::new(p);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let low = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        for i in 0..r {
            let mu = eig.eigenvalues[i];
            if top > 0.0 && mu > SOLVE_TRUNCATION * top {
                let v = eig.eigenvectors.column(i);
                x += v * (v.dot(&rhs) / mu);
            } else {
                diagnostics.truncated += 1;
            }
        }
        diagnostics.condition_number = (low > 0.0).then(|| top / low);
    }
    diagnostics.ill_posed = diagnostics.truncated > 0;
    if diagnostics.ill_posed {
        log::warn!("HUM system truncated {} of {r} directions; target may be unreachable", diagnostics.truncated);
    }

    // c = Γg = Rᵀx, g = U S^{-1/2} x.
    let adjoint_datum = problem.space.reduce.transpose() * &x;
    let g = pseudo_solve(&problem.space.gram, &adjoint_datum);
    let control = map.adjoint(&adjoint_datum)?;
    let reached = map.apply(&control)?.coeffs + &free;
    let miss = &reached - &problem.target;
    let scale = problem.space.norm(&problem.target);
    let residual = if scale > 0.0 { problem.space.norm(&miss) / scale } else { problem.space.norm(&miss) };
    let energy = control.energy();
    Ok(HumSolution { g, adjoint_datum, control, energy, residual, final_state: reached, free_final_state: free, diagnostics })
}

/// Symmetric pseudo-inverse solve with relative cutoff [`SOLVE_TRUNCATION`].
pub fn pseudo_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new((a + a.transpose()) * 0.5);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut out = DVector::zeros(rhs.len());
    for i in 0..rhs.len() {
        let mu = eig.eigenvalues[i];
        if top > 0.0 && mu > SOLVE_TRUNCATION * top {
            let v = eig.eigenvectors.column(i);
            out += v * (v.dot(rhs) / mu);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub trials: usize,
    pub passed: usize,
    /// min over trials of J(u*+w) - J(u*).
    pub worst_gap: Option<f64>,
    /// max over trials of the admissibility defect ‖p_ω∇H w‖.
    pub worst_defect: Option<f64>,
    pub kernel_available: bool,
    pub pseudo_inverse_energy: f64,
    pub relative_energy_gap: f64,
    pub pseudo_inverse_agrees: bool,
    pub pass: bool,
}

/// Perturbs u* inside the kernel of the discretized constraint map and
/// compares J(u*) with the minimum-norm pseudo-inverse control.
pub fn verify_minimality(problem: &HumProblem, solution: &HumSolution, trials: usize, seed: u64) -> Result<MinimalityReport> {
    let map = &problem.map;
    let c = &problem.space.reduce * map.energy_weighted_matrix();
    let rhs = &problem.space.reduce * (&problem.target - &solution.free_final_state);
    let svd = c.clone().svd(true, true);
    let (u_l, v_t) = match (svd.u.as_ref(), svd.v_t.as_ref()) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(Error::IllPosed("SVD did not return singular vectors".into())),
    };
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top > 0.0 && svd.singular_values[i] > SOLVE_TRUNCATION.sqrt() * top)
        .collect();

    // Minimum-norm solution x = V S⁻¹ Uᵀ rhs, independent of the HUM solve.
    let mut x_pinv = DVector::zeros(c.ncols());
    for &i in &keep {
        x_pinv += v_t.row(i).transpose() * (u_l.column(i).dot(&rhs) / svd.singular_values[i]);
    }
    let pseudo_inverse_energy = x_pinv.norm_squared();
    let j = solution.energy;
    let relative_energy_gap = (j - pseudo_inverse_energy).abs() / pseudo_inverse_energy.max(j).max(f64::MIN_POSITIVE);
    let pseudo_inverse_agrees = relative_energy_gap <= PSEUDO_INVERSE_TOLERANCE || (j == 0.0 && pseudo_inverse_energy == 0.0);

    let x_star = map.weighted_from_control(&solution.control);
    let dim = x_star.len();
    let kernel_available = keep.len() < dim;
    let scale = (x_star.norm() / (dim as f64).sqrt()).max(1e-3);
    let results: Vec<(f64, f64)> = if kernel_available {
        par::map_range(trials, |trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
            let mut w = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0) * scale);
            for &i in &keep {
                let row = v_t.row(i).transpose();
                let proj = row.dot(&w);
                w -= row * proj;
            }
            let perturbed = &x_star + &w;
            let gap = perturbed.norm_squared() - x_star.norm_squared();
            let defect = (&c * &w).norm();
            (gap, defect)
        })
    } else {
        Vec::new()
    };
    let passed = results.iter().filter(|(gap, _)| *gap >= -MINIMALITY_SLACK).count();
    let worst_gap = results.iter().map(|r| r.0).reduce(f64::min);
    let worst_defect = results.iter().map(|r| r.1).reduce(f64::max);
    let pass = pseudo_inverse_agrees && passed == results.len();
    Ok(MinimalityReport {
        trials: results.len(),
        passed,
        worst_gap,
        worst_defect,
        kernel_available,
        pseudo_inverse_energy,
        relative_energy_gap,
        pseudo_inverse_agrees,
        pass,
    })
}

/// Energies of the gradient and the state problem for a full-state target F
/// (coefficients), the gradient target being p_ω∇F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub gradient_energy: f64,
    pub state_energy: f64,
}

pub fn compare_costs(map: &InputMap, region: &Region, full_state_target: &DVector<f64>) -> Result<CostComparison> {
    let zero = DVector::zeros(full_state_target.len());
    let grad = HumProblem::new(map.clone(), region, Observation::Gradient, full_state_target.clone(), zero.clone())?;
    let state = HumProblem::new(map.clone(), region, Observation::State, full_state_target.clone(), zero)?;
    Ok(CostComparison { gradient_energy: solve_hum(&grad)?.energy, state_energy: solve_hum(&state)?.energy })
}

/// Seeded uniform(-1, 1) coefficients.
pub fn random_coefficients(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}
