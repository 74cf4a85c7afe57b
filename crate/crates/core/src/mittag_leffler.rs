//! Two-parameter Mittag-Leffler function E_{α,β}(z) on the real line and the
//! log-time propagator kernels built from it.
//!
//! Branches for 0 < α < 1:
//! * Taylor series with compensated summation when the largest term stays
//!   within about two orders of magnitude of the sum (z ≥ 0, or |z|^{1/α} ≤ 5);
//! * the real-line integral representation for the remaining -50 ≤ z < 0;
//! * the algebraic asymptotic expansion for z < -50.
//!
//! α = 1 uses closed forms built on e^z.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::LogTimeWindow;
use crate::quadrature::tanh_sinh;
use crate::special::{ln_gamma, rgamma};

pub const MAX_SERIES_TERMS: usize = 10_000;
pub const ASYMPTOTIC_THRESHOLD: f64 = 50.0;
pub const ASYMPTOTIC_TERMS: usize = 10;
// Largest |z|^{1/α} for which the alternating series is summed directly.
const SERIES_CANCELLATION_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Evaluation strategy, exposed so branches can be cross-checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Series,
    Integral,
    Asymptotic,
}

/// E_{α,β}(z).
pub fn eval_ml(p: MLParams, z: f64) -> Result<f64> {
    p.validate()?;
    if !z.is_finite() {
        return Err(Error::Domain(format!("Mittag-Leffler argument must be finite, got {z}")));
    }
    if z == 0.0 {
        return Ok(rgamma(p.beta));
    }
    if p.alpha == 1.0 {
        return eval_alpha_one(p.beta, z);
    }
    let branch = if z > 0.0 || (-z).powf(1.0 / p.alpha) <= SERIES_CANCELLATION_LIMIT {
        Branch::Series
    } else if -z <= ASYMPTOTIC_THRESHOLD {
        Branch::Integral
    } else {
        Branch::Asymptotic
    };
    eval_ml_branch(p, z, branch)
}

/// Shorthand for `eval_ml(MLParams::new(alpha, beta)?, z)`.
pub fn ml(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    eval_ml(MLParams::new(alpha, beta)?, z)
}

/// Forces a specific branch. `Integral` and `Asymptotic` need z < 0 and α < 1.
pub fn eval_ml_branch(p: MLParams, z: f64, branch: Branch) -> Result<f64> {
    p.validate()?;
    match branch {
        Branch::Series => series(p, z),
        Branch::Integral => {
            if !(z < 0.0) || p.alpha >= 1.0 {
                return Err(Error::Domain("integral branch needs z < 0 and alpha < 1".into()));
            }
            Ok(integral_negative(p.alpha, p.beta, -z))
        }
        Branch::Asymptotic => {
            if !(z < 0.0) {
                return Err(Error::Domain("asymptotic branch needs z < 0".into()));
            }
            Ok(asymptotic(p, z))
        }
    }
}

fn series(p: MLParams, z: f64) -> Result<f64> {
    let MLParams { alpha, beta } = p;
    let ln_abs_z = z.abs().ln();
    let negative = z < 0.0;
    // Kahan-compensated sum.
    let mut sum = rgamma(beta);
    let mut comp = 0.0;
    // Index of the largest term: nα + β ≈ |z|^{1/α}.
    let peak = ((z.abs().powf(1.0 / alpha) - beta) / alpha).max(0.0);
    let mut small_run = 0;
    for n in 1..MAX_SERIES_TERMS {
        let nf = n as f64;
        let arg = nf * alpha + beta;
        let magnitude = (nf * ln_abs_z - ln_gamma(arg)).exp();
        let term = if negative && n % 2 == 1 { -magnitude } else { magnitude };
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if nf > peak && magnitude <= 1e-17 * sum.abs().max(1e-300) {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
        if !sum.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence { alpha, beta, z })
}

fn asymptotic(p: MLParams, z: f64) -> f64 {
    let mut acc = 0.0;
    let inv = 1.0 / z;
    let mut pow = 1.0;
    for n in 1..=ASYMPTOTIC_TERMS {
        pow *= inv;
        // rgamma is zero at poles, which drops those terms.
        acc -= pow * rgamma(p.beta - n as f64 * p.alpha);
    }
    acc
}

/// E_{α,β}(-x), x > 0, 0 < α < 1, through
/// (1/π)∫_0^∞ r^{α-β} e^{-r} [r^α sin(π(1-β)) + x sin(π(1-β+α))] / (r^{2α} + 2 r^α x cos(απ) + x²) dr,
/// which holds for β < 1 + α; β = 1 + α adds 1/x. Larger β is lowered first.
fn integral_negative(alpha: f64, beta: f64, x: f64) -> f64 {
    // Keep the r^{α-β} endpoint factor comfortably integrable.
    if beta >= 1.0 + alpha - 0.25 && beta - alpha > 0.0 && (beta - 1.0 - alpha).abs() > 1e-14 {
        let lower = integral_negative(alpha, beta - alpha, x);
        return (lower - rgamma(beta - alpha)) / (-x);
    }
    let on_boundary = (beta - 1.0 - alpha).abs() <= 1e-14;
    let s1 = (PI * (1.0 - beta)).sin();
    let s2 = (PI * (1.0 - beta + alpha)).sin();
    let c = (alpha * PI).cos();
    let integrand = |r: f64| -> f64 {
        let ra = r.powf(alpha);
        let den = ra * ra + 2.0 * ra * x * c + x * x;
        r.powf(alpha - beta) * (-r).exp() * (ra * s1 + x * s2) / den
    };
    let mut breaks = vec![0.0, 1.0, 4.0, 16.0, 40.0];
    let mut end = 80.0;
    if c < 0.0 {
        // Near-resonance of the denominator at r^α = x|cos απ|.
        let peak = (x * (-c)).powf(1.0 / alpha);
        breaks.push(peak);
        breaks.push(2.0 * peak);
        end = f64::max(end, 2.0 * peak + 60.0);
    }
    breaks.push(end);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let total: f64 = breaks
        .windows(2)
        .map(|w| tanh_sinh(integrand, w[0], w[1], 1e-14))
        .sum();
    let value = total / PI;
    if on_boundary {
        value + 1.0 / x
    } else {
        value
    }
}

fn eval_alpha_one(beta: f64, z: f64) -> Result<f64> {
    if beta == 1.0 {
        return Ok(z.exp());
    }
    if z.abs() <= 5.0 {
        return series(MLParams { alpha: 1.0, beta }, z);
    }
    if beta < 1.0 {
        return Ok(rgamma(beta) + z * eval_alpha_one(beta + 1.0, z)?);
    }
    // Start in (1, 2] and recurse upward: E_{1,β+1} = (E_{1,β} - 1/Γ(β)) / z.
    let steps = (beta - 1.0).ceil() as usize - 1;
    let base = beta - steps as f64;
    let mut value = if (base - 2.0).abs() < 1e-15 {
        // E_{1,2}(z) = (e^z - 1)/z
        z.exp_m1() / z
    } else {
        // Euler integral: E_{1,β}(z) = 1/Γ(β-1) ∫_0^1 (1-s)^{β-2} e^{zs} ds
        let f = |s: f64| (1.0 - s).powf(base - 2.0) * (z * s).exp();
        let mut pieces = vec![0.0, 1.0];
        if z < -1.0 {
            for k in [1.0, 4.0, 16.0, 64.0] {
                let s = k / -z;
                if s < 1.0 {
                    pieces.push(s);
                }
            }
        }
        pieces.sort_by(|a, b| a.total_cmp(b));
        let total: f64 = pieces.windows(2).map(|w| tanh_sinh(f, w[0], w[1], 1e-15)).sum();
        rgamma(base - 1.0) * total
    };
    let mut b = base;
    for _ in 0..steps {
        value = (value - rgamma(b)) / z;
        b += 1.0;
    }
    Ok(value)
}

/// Specification of κ(τ) = τ^{α-1} E_{α,α}(-λ τ^α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorKernelSpec {
    pub alpha: f64,
    pub lambda: f64,
    pub window: LogTimeWindow,
}

impl PropagatorKernelSpec {
    pub fn new(alpha: f64, lambda: f64, window: LogTimeWindow) -> Result<Self> {
        MLParams::new(alpha, alpha)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be non-negative, got {lambda}")));
        }
        window.validate()?;
        Ok(Self { alpha, lambda, window })
    }
}

/// τ^{α-1} E_{α,α}(-λ τ^α) for τ > 0.
pub fn kernel_kappa(spec: &PropagatorKernelSpec, tau: f64) -> Result<f64> {
    kappa(spec.alpha, spec.lambda, tau)
}

/// Same as [`kernel_kappa`] without the window wrapper.
pub fn kappa(alpha: f64, lambda: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("kernel needs tau > 0, got {tau}")));
    }
    let ta = tau.powf(alpha);
    Ok(tau.powf(alpha - 1.0) * eval_ml(MLParams::new(alpha, alpha)?, -lambda * ta)?)
}

/// E_α(-λ (ln(t/a))^α) for t in [a, b].
pub fn free_propagator(alpha: f64, lambda: f64, window: &LogTimeWindow, t: f64) -> Result<f64> {
    let s = window.log_from_a(t)?;
    if s == 0.0 {
        return Ok(1.0);
    }
    eval_ml(MLParams::new(alpha, 1.0)?, -lambda * s.powf(alpha))
}
