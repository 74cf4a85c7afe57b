//! Hadamard fractional integrals and derivatives on a log-time window.
//!
//! Every operator is evaluated after the substitution τ = ln(t/s), which turns
//! the logarithmic kernel into a power kernel absorbed by Gauss-Jacobi weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussJacobi, Grading, GradedRule};
use crate::special::rgamma;

pub const DEFAULT_NODES: usize = 64;
// Relative slack accepted when a time sits on a window endpoint.
const ENDPOINT_SLACK: f64 = 1e-12;

/// The interval [a, b], a > 0, with log-length L = ln(b/a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogTimeWindow {
    pub a: f64,
    pub b: f64,
}

impl LogTimeWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let w = Self { a, b };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Parameter(format!("window start a must be positive, got {}", self.a)));
        }
        if !(self.b > self.a && self.b.is_finite()) {
            return Err(Error::Parameter(format!(
                "window end b must exceed a (a={}, b={})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// L = ln(b/a).
    pub fn log_length(&self) -> f64 {
        (self.b / self.a).ln()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a * (1.0 - ENDPOINT_SLACK) && t <= self.b * (1.0 + ENDPOINT_SLACK)
    }

    fn check(&self, t: f64) -> Result<f64> {
        if !self.contains(t) || !t.is_finite() {
            return Err(Error::Domain(format!("t={t} outside window [{}, {}]", self.a, self.b)));
        }
        Ok(t.clamp(self.a, self.b))
    }

    /// ln(t/a), t in [a, b].
    pub fn log_from_a(&self, t: f64) -> Result<f64> {
        let t = self.check(t)?;
        Ok((t / self.a).ln().max(0.0))
    }

    /// ln(b/t), t in [a, b].
    pub fn log_to_b(&self, t: f64) -> Result<f64> {
        let t = self.check(t)?;
        Ok((self.b / t).ln().max(0.0))
    }

    /// The Q reflection point ab/t.
    pub fn reflect(&self, t: f64) -> f64 {
        self.a * self.b / t
    }
}

/// Qf(t) = f(ab/t).
pub fn reflect_q<'f, F: Fn(f64) -> f64 + 'f>(window: &LogTimeWindow, f: F) -> impl Fn(f64) -> f64 + 'f {
    let ab = window.a * window.b;
    move |t| f(ab / t)
}

/// Quadrature controls shared by the operators in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadamardOptions {
    /// Gauss-Jacobi nodes per integral.
    pub nodes: usize,
    /// Known behavior of the integrand at the window endpoint the integral
    /// reaches (s = a for left operators, s = b for right ones): f ~ |ln s/end|^e
    /// times a smooth factor. For Caputo derivatives it describes δf.
    pub initial_exponent: Option<f64>,
}

impl Default for HadamardOptions {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, initial_exponent: None }
    }
}

fn check_order(alpha: f64, closed_at_one: bool) -> Result<()> {
    let ok = if closed_at_one { alpha > 0.0 && alpha <= 1.0 } else { alpha > 0.0 && alpha < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter(format!("fractional order out of range: {alpha}")))
    }
}

/// ∫_0^u (u-σ)^{α-1} g(σ) dσ where g(σ) ~ σ^e near σ = 0: Gauss-Jacobi on the
/// half next to σ = u, a rule graded toward σ = 0 on the other half.
fn graded_kernel_integral<G: Fn(f64) -> f64>(g: G, alpha: f64, u: f64, e: f64, nodes: usize) -> Result<f64> {
    let half = 0.5 * u;
    let head = GaussJacobi::power_weight_on(nodes, alpha - 1.0, half)?;
    let near: f64 = head.iter().map(|(tau, w)| w * g(u - tau)).sum();
    // First cell ~1e-12 u wide; its Jacobi weight carries σ^e exactly.
    let grading = Grading { cells: 20, nodes_per_cell: 12, ratio: 0.25 };
    let exponent = if e > -1.0 && e != 0.0 { Some(e) } else { None };
    let tail = GradedRule::new(0.0, half, exponent, grading)?;
    let far: f64 = tail.integrate(|sigma| (u - sigma).powf(alpha - 1.0) * g(sigma));
    Ok(near + far)
}

/// (1/Γ(α)) ∫_a^t (ln t/s)^{α-1} f(s) ds/s without window checks.
/// `a` may be any positive number below t.
pub fn left_integral_raw<F: Fn(f64) -> f64>(f: F, alpha: f64, a: f64, t: f64, opts: HadamardOptions) -> Result<f64> {
    let u = (t / a).ln();
    if !(u > 0.0) {
        return Ok(0.0);
    }
    if let Some(e) = opts.initial_exponent {
        return Ok(graded_kernel_integral(|sigma| f(a * sigma.exp()), alpha, u, e, opts.nodes)? * rgamma(alpha));
    }
    let rule = GaussJacobi::power_weight_on(opts.nodes, alpha - 1.0, u)?;
    Ok(rule.iter().map(|(tau, w)| w * f(t * (-tau).exp())).sum::<f64>() * rgamma(alpha))
}

/// (1/Γ(α)) ∫_t^b (ln s/t)^{α-1} f(s) ds/s with the direct right kernel,
/// τ = ln(s/t). No window checks. `initial_exponent` describes f near s = b.
pub fn right_integral_raw<F: Fn(f64) -> f64>(f: F, alpha: f64, b: f64, t: f64, opts: HadamardOptions) -> Result<f64> {
    let u = (b / t).ln();
    if !(u > 0.0) {
        return Ok(0.0);
    }
    if let Some(e) = opts.initial_exponent {
        return Ok(graded_kernel_integral(|sigma| f(b * (-sigma).exp()), alpha, u, e, opts.nodes)? * rgamma(alpha));
    }
    let rule = GaussJacobi::power_weight_on(opts.nodes, alpha - 1.0, u)?;
    Ok(rule.iter().map(|(tau, w)| w * f(t * tau.exp())).sum::<f64>() * rgamma(alpha))
}

/// (1/Γ(α)) ∫_a^t (ln t/s)^{α-1} f(s) ds/s.
pub fn hadamard_integral_left<F: Fn(f64) -> f64>(
    f: F,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, true)?;
    if !(t > window.a) {
        return Err(Error::Domain(format!("left integral needs t > a (t={t}, a={})", window.a)));
    }
    let t = window.check(t)?;
    left_integral_raw(f, alpha, window.a, t, opts)
}

/// (1/Γ(α)) ∫_t^b (ln s/t)^{α-1} f(s) ds/s, computed as Q I_a^α Q f.
pub fn hadamard_integral_right<F: Fn(f64) -> f64>(
    f: F,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, true)?;
    if !(t < window.b) {
        return Err(Error::Domain(format!("right integral needs t < b (t={t}, b={})", window.b)));
    }
    let t = window.check(t)?;
    let qf = reflect_q(window, f);
    left_integral_raw(qf, alpha, window.a, window.reflect(t), opts)
}

/// Left Hadamard-Caputo derivative
/// (1/Γ(1-α)) ∫_a^t (ln t/s)^{-α} f'(s) ds = (1/Γ(1-α)) ∫_0^u τ^{-α} (δf)(t e^{-τ}) dτ,
/// where δf(s) = s f'(s) is supplied directly.
///
/// With `initial_exponent = Some(e)` the integrand may behave like (ln s/a)^e
/// near s = a; see [`hadamard_caputo_left_log`] for integrands that must see
/// ln(s/a) at full precision.
pub fn hadamard_caputo_left<D: Fn(f64) -> f64>(
    delta_f: D,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    let a = window.a;
    hadamard_caputo_left_log(|sigma| delta_f(a * sigma.exp()), alpha, window, t, opts)
}

/// Left Hadamard-Caputo derivative with δf given in log-time,
/// g(σ) = (δf)(a e^σ). With `initial_exponent = Some(e)`, g(σ) may behave like
/// σ^e at σ = 0; the half of the range next to σ = 0 then uses a rule graded
/// toward it.
pub fn hadamard_caputo_left_log<G: Fn(f64) -> f64>(
    g: G,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, false)?;
    if !(t > window.a) {
        return Err(Error::Domain(format!("Caputo derivative needs t > a (t={t}, a={})", window.a)));
    }
    let t = window.check(t)?;
    let u = (t / window.a).ln();
    let rg = rgamma(1.0 - alpha);
    match opts.initial_exponent {
        None => {
            let rule = GaussJacobi::power_weight_on(opts.nodes, -alpha, u)?;
            Ok(rg * rule.iter().map(|(tau, w)| w * g(u - tau)).sum::<f64>())
        }
        Some(e) => Ok(rg * graded_kernel_integral(g, 1.0 - alpha, u, e, opts.nodes)?),
    }
}

/// Left Hadamard-Caputo derivative from the ordinary derivative f':
/// (1/Γ(1-α)) ∫_a^t (ln t/s)^{-α} f'(s) ds.
pub fn hadamard_caputo_left_from_derivative<D: Fn(f64) -> f64>(
    f_prime: D,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    hadamard_caputo_left(|s| s * f_prime(s), alpha, window, t, opts)
}

/// δ(I_a^α f)(t) = (ln t/a)^{α-1} f(a)/Γ(α) + I_a^α(δf)(t), with δ = t d/dt.
pub fn delta_left_integral<F: Fn(f64) -> f64, D: Fn(f64) -> f64>(
    f: F,
    delta_f: D,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, true)?;
    let u = window.log_from_a(t)?;
    if !(u > 0.0) {
        return Err(Error::SingularEndpoint("δ I^α f is singular at t = a".into()));
    }
    Ok(u.powf(alpha - 1.0) * f(window.a) * rgamma(alpha) + left_integral_raw(delta_f, alpha, window.a, t, opts)?)
}

/// [`delta_left_integral`] at log-time σ = ln(t/a) > 0, without rounding σ
/// through t.
pub fn delta_left_integral_log<F: Fn(f64) -> f64, D: Fn(f64) -> f64>(
    f: F,
    delta_f: D,
    alpha: f64,
    window: &LogTimeWindow,
    sigma: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, true)?;
    if !(sigma > 0.0) {
        return Err(Error::SingularEndpoint("δ I^α f is singular at t = a".into()));
    }
    let t = window.a * sigma.exp();
    Ok(sigma.powf(alpha - 1.0) * f(window.a) * rgamma(alpha) + left_integral_raw(delta_f, alpha, window.a, t, opts)?)
}

// Fourth-order central difference of g in the variable ln t.
fn log_derivative<G: Fn(f64) -> Result<f64>>(g: G, t: f64, h: f64) -> Result<f64> {
    let e1 = h.exp();
    let e2 = (2.0 * h).exp();
    Ok((-g(t * e2)? + 8.0 * g(t * e1)? - 8.0 * g(t / e1)? + g(t / e2)?) / (12.0 * h))
}

// Fourth-order backward difference, for points too close to the window end.
fn log_derivative_backward<G: Fn(f64) -> Result<f64>>(g: G, t: f64, h: f64) -> Result<f64> {
    let p = |k: f64| g(t * (-k * h).exp());
    Ok((25.0 * p(0.0)? - 48.0 * p(1.0)? + 36.0 * p(2.0)? - 16.0 * p(3.0)? + 3.0 * p(4.0)?) / (12.0 * h))
}

fn fd_step(room: f64) -> f64 {
    (0.01 * room).min(1e-3)
}

/// Left Hadamard (Riemann-Liouville type) derivative δ I_a^{1-α} f.
pub fn hadamard_derivative_left<F: Fn(f64) -> f64>(
    f: F,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, false)?;
    let room = window.log_from_a(t)?;
    if !(room > 0.0) {
        return Err(Error::SingularEndpoint("left derivative is singular at t = a".into()));
    }
    let a = window.a;
    let h = fd_step(room);
    let integral = |s: f64| left_integral_raw(&f, 1.0 - alpha, a, s, opts);
    if t * (2.0 * h).exp() > window.b {
        log_derivative_backward(integral, t, h)
    } else {
        log_derivative(integral, t, h)
    }
}

/// Right Hadamard derivative -δ I_b^{1-α} f.
pub fn hadamard_derivative_right<F: Fn(f64) -> f64>(
    f: F,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, false)?;
    let room = window.log_to_b(t)?;
    if !(room > 0.0) {
        return Err(Error::SingularEndpoint("right derivative is singular at t = b".into()));
    }
    let b = window.b;
    // Direct right kernel, independent of the Q-based right integral.
    let right = |s: f64| right_integral_raw(&f, 1.0 - alpha, b, s, opts);
    Ok(-log_derivative(right, t, fd_step(room))?)
}

/// Right Hadamard-Caputo derivative
/// -(1/Γ(1-α)) ∫_t^b (ln s/t)^{-α} f'(s) ds, δf supplied.
pub fn hadamard_caputo_right<D: Fn(f64) -> f64>(
    delta_f: D,
    alpha: f64,
    window: &LogTimeWindow,
    t: f64,
    opts: HadamardOptions,
) -> Result<f64> {
    check_order(alpha, false)?;
    let u = window.log_to_b(t)?;
    if !(u > 0.0) {
        return Err(Error::Domain("right Caputo derivative needs t < b".into()));
    }
    let rule = GaussJacobi::power_weight_on(opts.nodes, -alpha, u)?;
    let s: f64 = rule.iter().map(|(tau, w)| w * delta_f(t * tau.exp())).sum();
    Ok(-rgamma(1.0 - alpha) * s)
}

/// A real signal sampled on an increasing time grid covering [a, b].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub window: LogTimeWindow,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub grading: f64,
}

impl SampledSignal {
    pub fn new(window: LogTimeWindow, nodes: Vec<f64>, values: Vec<f64>, grading: f64) -> Result<Self> {
        window.validate()?;
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::Parameter("signal needs matching node/value lists of length >= 2".into()));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Parameter("signal nodes must be strictly increasing".into()));
        }
        let tol = 1e-12 * window.b;
        if (nodes[0] - window.a).abs() > tol || (nodes[nodes.len() - 1] - window.b).abs() > tol {
            return Err(Error::Parameter("signal nodes must start at a and end at b".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("signal values must be finite".into()));
        }
        if !(grading >= 1.0) {
            return Err(Error::Parameter(format!("grading exponent must be >= 1, got {grading}")));
        }
        Ok(Self { window, nodes, values, grading })
    }

    /// Samples `f` on n+1 nodes t_j = a exp(L (j/n)^γ), clustered toward a.
    pub fn from_fn<F: Fn(f64) -> f64>(window: LogTimeWindow, n: usize, grading: f64, f: F) -> Result<Self> {
        let l = window.log_length();
        let n = n.max(1);
        let mut nodes: Vec<f64> = (0..=n)
            .map(|j| window.a * (l * (j as f64 / n as f64).powf(grading)).exp())
            .collect();
        nodes[0] = window.a;
        nodes[n] = window.b;
        let values = nodes.iter().map(|&t| f(t)).collect();
        Self::new(window, nodes, values, grading)
    }

    /// Piecewise-cubic interpolation in ln t through the four nearest nodes.
    pub fn eval(&self, t: f64) -> f64 {
        let x = t.ln();
        let n = self.nodes.len();
        let idx = self.nodes.partition_point(|&s| s <= t).clamp(1, n - 1);
        let lo = idx.saturating_sub(2).min(n.saturating_sub(4));
        let hi = (lo + 4).min(n);
        let xs: Vec<f64> = self.nodes[lo..hi].iter().map(|s| s.ln()).collect();
        let ys = &self.values[lo..hi];
        let mut acc = 0.0;
        for i in 0..xs.len() {
            let mut basis = 1.0;
            for j in 0..xs.len() {
                if i != j {
                    basis *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += basis * ys[i];
        }
        acc
    }
}
