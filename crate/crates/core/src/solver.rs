//! Mild solutions of the controlled, free and adjoint systems in spectral
//! coordinates. Every time integral runs in log-time.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::LogTimeWindow;
use crate::mittag_leffler::{kappa, ml};
use crate::par;
use crate::quadrature::{GradedRule, Grading};
use crate::spectral::{actuator_coefficients, gradient_gram, ActuatorSet, GradientBasisGram, Region, SpectralBasis};

/// Which log-time variable a grid is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogClock {
    /// τ = ln(b/t); τ = 0 is the final time.
    ToFinal,
    /// τ = ln(t/a); τ = 0 is the initial time.
    FromInitial,
}

/// How a grid's own rule may be used at the final time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridRole {
    /// The rule resolves κ·u and κ² at τ = 0: it defines the discrete input
    /// map H and the energy.
    InputMap,
    /// Sampling only; integrals against κ use a separate s-rule.
    Sampling,
}

/// Graded log-time nodes with dτ weights. Nodes are open at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    pub window: LogTimeWindow,
    pub clock: LogClock,
    pub role: GridRole,
    pub rule: GradedRule,
}

impl ControlGrid {
    pub fn new(
        window: LogTimeWindow,
        clock: LogClock,
        role: GridRole,
        lower: f64,
        singular_exponent: Option<f64>,
        grading: Grading,
    ) -> Result<Self> {
        window.validate()?;
        let l = window.log_length();
        if !(lower >= 0.0 && lower < l) {
            return Err(Error::Parameter(format!("grid lower end {lower} outside [0, {l})")));
        }
        let rule = GradedRule::new(lower, l, singular_exponent, grading)?;
        Ok(Self { window, clock, role, rule })
    }

    /// The grid on which H, H*, the Gramian, the energy and the G-norm are
    /// all discretized. Refuses α ≤ 1/2 unless an ε cutoff is supplied.
    pub fn for_energy(alpha: f64, window: LogTimeWindow, epsilon: Option<f64>, grading: Grading) -> Result<Self> {
        match epsilon {
            Some(eps) if eps > 0.0 => Self::new(window, LogClock::ToFinal, GridRole::InputMap, eps, None, grading),
            Some(eps) if eps < 0.0 || !eps.is_finite() => Err(Error::Parameter(format!("epsilon must be >= 0, got {eps}"))),
            _ if alpha <= 0.5 => Err(Error::DivergentGramian { alpha }),
            _ => {
                let c = 2.0 * alpha - 2.0;
                Self::new(window, LogClock::ToFinal, GridRole::InputMap, 0.0, (c != 0.0).then_some(c), grading)
            }
        }
    }

    /// Sampling grid for arbitrary smooth controls.
    pub fn smooth(window: LogTimeWindow, clock: LogClock, grading: Grading) -> Result<Self> {
        Self::new(window, clock, GridRole::Sampling, 0.0, None, grading)
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    pub fn taus(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn epsilon(&self) -> f64 {
        self.rule.lower
    }

    pub fn time_of(&self, tau: f64) -> f64 {
        match self.clock {
            LogClock::ToFinal => self.window.b * (-tau).exp(),
            LogClock::FromInitial => self.window.a * tau.exp(),
        }
    }

    pub fn tau_of(&self, t: f64) -> f64 {
        match self.clock {
            LogClock::ToFinal => (self.window.b / t).ln(),
            LogClock::FromInitial => (t / self.window.a).ln(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.rule.nodes.iter().map(|&tau| self.time_of(tau)).collect()
    }

    /// Weights for ∫_a^b g(t) dt, using dt = t dτ.
    pub fn dt_weights(&self) -> Vec<f64> {
        self.rule.nodes.iter().zip(&self.rule.weights).map(|(&tau, &w)| w * self.time_of(tau)).collect()
    }
}

/// m-channel control sampled on a [`ControlGrid`]; `values` is m × nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub grid: ControlGrid,
    pub values: DMatrix<f64>,
}

impl ControlSignal {
    pub fn new(grid: ControlGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::Config(format!("control has {} samples, grid has {} nodes", values.ncols(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("control values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(channels: usize, grid: ControlGrid) -> Self {
        let n = grid.len();
        Self { grid, values: DMatrix::zeros(channels, n) }
    }

    /// Samples `f(channel, t)` at the grid times.
    pub fn from_fn<F: Fn(usize, f64) -> f64>(grid: ControlGrid, channels: usize, f: F) -> Result<Self> {
        let times = grid.times();
        let values = DMatrix::from_fn(channels, times.len(), |i, j| f(i, times[j]));
        Self::new(grid, values)
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    /// a·self + c·other on a shared grid.
    pub fn combine(&self, a: f64, other: &ControlSignal, c: f64) -> Result<Self> {
        if self.grid != other.grid || self.channels() != other.channels() {
            return Err(Error::Config("controls live on different grids".into()));
        }
        Ok(Self { grid: self.grid.clone(), values: &self.values * a + &other.values * c })
    }

    /// Polynomial interpolation in log-time through the nodes of the grid
    /// cell containing t. Zero below an ε cutoff, where the regularized
    /// control vanishes by construction.
    pub fn value_at(&self, channel: usize, t: f64) -> f64 {
        let tau = self.grid.tau_of(t);
        if self.grid.epsilon() > 0.0 && tau < self.grid.epsilon() {
            return 0.0;
        }
        self.grid.rule.interpolate(|j| self.values[(channel, j)], tau)
    }

    /// ∫_a^b ‖u(t)‖² dt on the grid.
    pub fn energy(&self) -> f64 {
        let w = self.grid.dt_weights();
        (0..self.grid.len()).map(|j| w[j] * self.values.column(j).norm_squared()).sum()
    }

    /// Rows `t,ln_b_over_t,u_1,...,u_m`, ordered by increasing t. The log
    /// column resolves nodes that round to t = b.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,ln_b_over_t");
        for i in 0..self.channels() {
            let _ = write!(out, ",u_{}", i + 1);
        }
        out.push('\n');
        let times = self.grid.times();
        let l = self.grid.window.log_length();
        let to_b: Vec<f64> = match self.grid.clock {
            LogClock::ToFinal => self.grid.taus().to_vec(),
            LogClock::FromInitial => self.grid.taus().iter().map(|s| (l - s).max(0.0)).collect(),
        };
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&x, &y| to_b[y].total_cmp(&to_b[x]));
        for j in order {
            let _ = write!(out, "{:.17e},{:.17e}", times[j], to_b[j]);
            for i in 0..self.channels() {
                let _ = write!(out, ",{:.17e}", self.values[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

/// Modal coefficients of a state at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    pub t: f64,
    pub indices: Vec<Vec<usize>>,
    pub lambdas: Vec<f64>,
    pub coeffs: DVector<f64>,
}

impl SpectralState {
    pub fn new(basis: &SpectralBasis, t: f64, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Config(format!("{} coefficients for {} modes", coeffs.len(), basis.len())));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite state coefficient at t={t}")));
        }
        Ok(Self {
            t,
            indices: basis.modes.iter().map(|m| m.index.clone()).collect(),
            lambdas: basis.lambdas(),
            coeffs,
        })
    }

    pub fn zeros(basis: &SpectralBasis, t: f64) -> Self {
        Self::new(basis, t, DVector::zeros(basis.len())).expect("zero state is valid")
    }

    /// Rows `mode,index,lambda,coefficient`; multi-indices joined by ':'.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,index,lambda,coefficient\n");
        for (k, idx) in self.indices.iter().enumerate() {
            let joined: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{k},{},{:.17e},{:.17e}", joined.join(":"), self.lambdas[k], self.coeffs[k]);
        }
        out
    }

    /// Rows `x_1[,x_2],value` on a tensor grid of the domain.
    pub fn field_csv(&self, basis: &SpectralBasis, per_axis: usize) -> String {
        let dim = basis.dim();
        let mut out = String::from(if dim == 1 { "x_1,value\n" } else { "x_1,x_2,value\n" });
        for (x, v) in crate::spectral::sample_field(basis, &self.coeffs, per_axis) {
            if dim == 1 {
                let _ = writeln!(out, "{:.12e},{:.17e}", x[0], v);
            } else {
                let _ = writeln!(out, "{:.12e},{:.12e},{:.17e}", x[0], x[1], v);
            }
        }
        out
    }
}

/// Basis, actuator coefficients d^i_k (m × modes), order and window.
#[derive(Debug, Clone)]
pub struct Plant {
    pub basis: SpectralBasis,
    pub d: DMatrix<f64>,
    pub alpha: f64,
    pub window: LogTimeWindow,
}

impl Plant {
    pub fn new(basis: SpectralBasis, actuators: &ActuatorSet, alpha: f64, window: LogTimeWindow) -> Result<Self> {
        let d = actuator_coefficients(actuators, &basis)?;
        Self::from_coefficients(basis, d, alpha, window)
    }

    pub fn from_coefficients(basis: SpectralBasis, d: DMatrix<f64>, alpha: f64, window: LogTimeWindow) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        window.validate()?;
        if d.ncols() != basis.len() {
            return Err(Error::Config(format!("actuator matrix has {} columns for {} modes", d.ncols(), basis.len())));
        }
        Ok(Self { basis, d, alpha, window })
    }

    pub fn channels(&self) -> usize {
        self.d.nrows()
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    /// κ_k(τ_j) = τ_j^{α-1} E_{α,α}(-λ_k τ_j^α), modes × nodes. Evaluated once
    /// per eigenvalue bucket.
    pub fn kernel_table(&self, taus: &[f64]) -> Result<DMatrix<f64>> {
        let n = taus.len();
        let nb = self.basis.buckets.len();
        let flat = par::map_range(nb * n, |idx| kappa(self.alpha, self.basis.buckets[idx / n].lambda, taus[idx % n]));
        let flat: Vec<f64> = flat.into_iter().collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(self.modes(), n, |k, j| flat[self.basis.modes[k].bucket * n + j]))
    }

    /// Per-mode E_α(-λ_k σ^α).
    fn relaxation(&self, sigma: f64) -> Result<DVector<f64>> {
        let per_bucket: Vec<f64> = par::map_slice(&self.basis.buckets, |b| {
            if sigma == 0.0 {
                Ok(1.0)
            } else {
                ml(self.alpha, 1.0, -b.lambda * sigma.powf(self.alpha))
            }
        })
        .into_iter()
        .collect::<Result<_>>()?;
        Ok(DVector::from_fn(self.modes(), |k, _| per_bucket[self.basis.modes[k].bucket]))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        self.window.log_from_a(t).map(|_| ())
    }
}

/// Σ_j w_j κ_kj (Dᵀu_j)_k for sampled controls.
fn weighted_kernel_sum(plant: &Plant, kernel: &DMatrix<f64>, weights: &[f64], u: &DMatrix<f64>) -> DVector<f64> {
    let du = plant.d.transpose() * u;
    DVector::from_fn(plant.modes(), |k, _| {
        (0..weights.len()).map(|j| weights[j] * kernel[(k, j)] * du[(k, j)]).sum()
    })
}

/// z_k(t) = Σ_i d^i_k ∫_0^{ln t/a} s^{α-1} E_{α,α}(-λ_k s^α) u_i(t e^{-s}) ds, zero
/// initial state. At t = b on an input-map grid the control samples are used
/// directly with the grid's own rule.
pub fn forced_solution(plant: &Plant, u: &ControlSignal, t: f64) -> Result<SpectralState> {
    forced_solution_with(plant, u, t, Grading::default())
}

/// [`forced_solution`] with an explicit s-rule layout for t < b.
pub fn forced_solution_with(plant: &Plant, u: &ControlSignal, t: f64, grading: Grading) -> Result<SpectralState> {
    plant.check_time(t)?;
    if u.channels() != plant.channels() {
        return Err(Error::Config(format!("control has {} channels, plant has {} actuators", u.channels(), plant.channels())));
    }
    if u.grid.window != plant.window {
        return Err(Error::Config("control grid and plant use different windows".into()));
    }
    let s_max = plant.window.log_from_a(t)?;
    if s_max == 0.0 {
        return Err(Error::Domain(format!("forced solution needs t > a={}, got {t}", plant.window.a)));
    }
    let at_final = plant.window.log_to_b(t)? == 0.0 && u.grid.role == GridRole::InputMap && u.grid.clock == LogClock::ToFinal;
    let coeffs = if at_final {
        let kernel = plant.kernel_table(u.grid.taus())?;
        weighted_kernel_sum(plant, &kernel, &u.grid.rule.weights, &u.values)
    } else {
        let c = plant.alpha - 1.0;
        let rule = GradedRule::new(0.0, s_max, (c != 0.0).then_some(c), grading)?;
        let samples = DMatrix::from_fn(plant.channels(), rule.len(), |i, j| u.value_at(i, t * (-rule.nodes[j]).exp()));
        let kernel = plant.kernel_table(&rule.nodes)?;
        weighted_kernel_sum(plant, &kernel, &rule.weights, &samples)
    };
    SpectralState::new(&plant.basis, t, coeffs)
}

/// z_k(t) = E_α(-λ_k (ln t/a)^α) z0_k.
pub fn free_solution(plant: &Plant, z0: &DVector<f64>, t: f64) -> Result<SpectralState> {
    plant.check_time(t)?;
    if z0.len() != plant.modes() {
        return Err(Error::Config(format!("{} initial coefficients for {} modes", z0.len(), plant.modes())));
    }
    let relax = plant.relaxation(plant.window.log_from_a(t)?)?;
    SpectralState::new(&plant.basis, t, z0.component_mul(&relax))
}

/// φ_k(t) = (ln b/t)^{α-1} E_{α,α}(-λ_k (ln b/t)^α) c_k.
pub fn adjoint_solution(plant: &Plant, c: &DVector<f64>, t: f64) -> Result<SpectralState> {
    plant.check_time(t)?;
    if c.len() != plant.modes() {
        return Err(Error::Config(format!("{} adjoint coefficients for {} modes", c.len(), plant.modes())));
    }
    let tau = plant.window.log_to_b(t)?;
    if tau == 0.0 {
        if plant.alpha < 1.0 {
            return Err(Error::SingularEndpoint(format!(
                "adjoint state behaves like (ln b/t)^{} at t = b",
                plant.alpha - 1.0
            )));
        }
        return SpectralState::new(&plant.basis, t, c.clone());
    }
    let kernel = plant.kernel_table(&[tau])?;
    SpectralState::new(&plant.basis, t, c.component_mul(&kernel.column(0)))
}

/// p_ω∇z(b) as coefficients plus the gradient Gram on ω.
#[derive(Debug, Clone)]
pub struct FinalGradient {
    pub coeffs: DVector<f64>,
    pub gram: GradientBasisGram,
}

impl FinalGradient {
    /// ‖p_ω∇z(b)‖²_{L²(ω)}.
    pub fn norm_squared(&self) -> f64 {
        self.coeffs.dot(&(&self.gram.gamma * &self.coeffs))
    }
}

pub fn final_gradient(state: &SpectralState, basis: &SpectralBasis, region: &Region, window: &LogTimeWindow) -> Result<FinalGradient> {
    if window.log_to_b(state.t)? != 0.0 {
        return Err(Error::Domain(format!("final gradient needs a state at b={}, got t={}", window.b, state.t)));
    }
    if state.coeffs.len() != basis.len() {
        return Err(Error::Config("state and basis disagree on the mode count".into()));
    }
    Ok(FinalGradient { coeffs: state.coeffs.clone(), gram: gradient_gram(basis, region) })
}
