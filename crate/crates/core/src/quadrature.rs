//! Quadrature rules: Gauss-Legendre, Gauss-Jacobi (Golub-Welsch), tanh-sinh,
//! and the geometrically graded composite rule used on log-time intervals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// ∫_lo^hi f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Nodes and weights mapped onto [lo, hi].
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Jacobi rule for ∫_{-1}^{1} (1-x)^a (1+x)^b f(x) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl GaussJacobi {
    /// Golub-Welsch construction from the symmetric Jacobi matrix.
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("Gauss-Jacobi needs at least one node".into()));
        }
        if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parameter(format!(
                "Gauss-Jacobi exponents must exceed -1 (a={a}, b={b})"
            )));
        }
        let ab = a + b;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let fi = i as f64;
            let diag = if i == 0 {
                (b - a) / (ab + 2.0)
            } else {
                (b * b - a * a) / ((2.0 * fi + ab) * (2.0 * fi + ab + 2.0))
            };
            jac[(i, i)] = diag;
            if i + 1 < n {
                let k = fi + 1.0;
                let s = 2.0 * k + ab;
                let off2 = if i == 0 {
                    // (1+a+b) cancels against (2k+a+b-1) at k = 1.
                    4.0 * (1.0 + a) * (1.0 + b) / (s * s * (s + 1.0))
                } else {
                    4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))
                };
                let off = off2.sqrt();
                jac[(i, i + 1)] = off;
                jac[(i + 1, i)] = off;
            }
        }
        let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
            - ln_gamma(ab + 2.0);
        let mu0 = ln_mu0.exp();
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            a,
            b,
        })
    }

    /// Memoized constructor; rules are keyed by (n, a, b) bit patterns.
    pub fn cached(n: usize, a: f64, b: f64) -> Result<Arc<Self>> {
        type Cache = Mutex<HashMap<(usize, u64, u64), Arc<GaussJacobi>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (n, a.to_bits(), b.to_bits());
        if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&key) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::new(n, a, b)?);
        cache
            .lock()
            .expect("quadrature cache poisoned")
            .insert(key, Arc::clone(&rule));
        Ok(rule)
    }

    /// Rule for ∫_0^len τ^c g(τ) dτ: returns (τ_j, ω_j) with Σ ω_j g(τ_j).
    pub fn power_weight_on(n: usize, c: f64, len: f64) -> Result<Vec<(f64, f64)>> {
        let gj = Self::cached(n, 0.0, c)?;
        let scale = (0.5 * len).powf(c + 1.0);
        Ok(gj
            .nodes
            .iter()
            .zip(&gj.weights)
            .map(|(x, w)| (0.5 * len * (1.0 + x), w * scale))
            .collect())
    }
}

/// Adaptive tanh-sinh (double exponential) quadrature on a finite interval.
///
/// Endpoint algebraic singularities are handled without special treatment;
/// abscissae near the ends are computed from the distance to the endpoint to
/// avoid cancellation.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    if hi == lo {
        return 0.0;
    }
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let t_max = 6.5;

    let eval_pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (ch * ch);
        // 1 - tanh(u) = 2 / (1 + e^{2u})
        let gap = 2.0 / (1.0 + (2.0 * u).exp());
        if gap == 0.0 || w * half == 0.0 {
            return 0.0;
        }
        let xr = hi - half * gap;
        let xl = lo + half * gap;
        let mut s = 0.0;
        if xr > lo && xr < hi {
            s += f(xr);
        }
        if xl > lo && xl < hi {
            s += f(xl);
        }
        w * s
    };

    let mut h = 1.0;
    let mut sum = FRAC_PI_2 * f(mid);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += eval_pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            add += eval_pair(k as f64 * h);
            k += 2;
        }
        sum += add;
        let next = sum * h * half;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * next.abs() || diff < 1e-300 {
            break;
        }
    }
    estimate
}

/// Composite rule on [lower, upper] with cells shrinking geometrically toward
/// `lower`. The first cell optionally absorbs a (τ - lower)^c factor through a
/// Gauss-Jacobi weight; the stored weights are divided back by that factor so
/// the rule integrates the full integrand directly: ∫ g ≈ Σ w_j g(τ_j).
#[derive(Debug, Clone, PartialEq)]
pub struct GradedRule {
    pub lower: f64,
    pub upper: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub singular_exponent: Option<f64>,
    /// Cell boundaries, lower first; cell i owns nodes [i n, (i+1) n).
    pub breaks: Vec<f64>,
}

/// Layout parameters of a [`GradedRule`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grading {
    pub cells: usize,
    pub nodes_per_cell: usize,
    pub ratio: f64,
}

impl Default for Grading {
    fn default() -> Self {
        // 32 cells x 12 nodes; first cell has relative width 0.3^31 ~ 6e-17.
        // Twelve nodes per cell keep the per-cell error of τ^c near 1e-13.
        Self { cells: 32, nodes_per_cell: 12, ratio: 0.3 }
    }
}

impl Grading {
    pub fn refined(self) -> Self {
        Self { nodes_per_cell: self.nodes_per_cell * 2, ..self }
    }

    pub fn total_nodes(&self) -> usize {
        self.cells * self.nodes_per_cell
    }
}

impl GradedRule {
    pub fn new(
        lower: f64,
        upper: f64,
        singular_exponent: Option<f64>,
        grading: Grading,
    ) -> Result<Self> {
        if !(upper > lower) {
            return Err(Error::Domain(format!("graded rule needs upper > lower ({lower}, {upper})")));
        }
        if grading.cells == 0 || grading.nodes_per_cell == 0 || !(grading.ratio > 0.0 && grading.ratio < 1.0) {
            return Err(Error::Parameter(format!("bad grading {grading:?}")));
        }
        let span = upper - lower;
        let mut breaks = Vec::with_capacity(grading.cells + 1);
        breaks.push(lower);
        for k in (0..grading.cells).rev() {
            breaks.push(lower + span * grading.ratio.powi(k as i32));
        }
        let gl = GaussLegendre::new(grading.nodes_per_cell);
        let mut nodes = Vec::with_capacity(grading.total_nodes());
        let mut weights = Vec::with_capacity(grading.total_nodes());
        for (idx, cell) in breaks.windows(2).enumerate() {
            let (lo, hi) = (cell[0], cell[1]);
            match singular_exponent {
                Some(c) if idx == 0 && c != 0.0 => {
                    for (x, w) in GaussJacobi::power_weight_on(grading.nodes_per_cell, c, hi - lo)? {
                        nodes.push(lo + x);
                        weights.push(w / x.powf(c));
                    }
                }
                _ => {
                    for (x, w) in gl.mapped(lo, hi) {
                        nodes.push(x);
                        weights.push(w);
                    }
                }
            }
        }
        Ok(Self { lower, upper, nodes, weights, singular_exponent, breaks })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.nodes.len() / (self.breaks.len() - 1)
    }

    /// Node index range of the cell containing x (clamped to the rule).
    pub fn cell_of(&self, x: f64) -> std::ops::Range<usize> {
        let cells = self.breaks.len() - 1;
        let cell = self.breaks[1..cells].partition_point(|&b| b <= x);
        let n = self.nodes_per_cell();
        cell * n..(cell + 1) * n
    }

    /// Barycentric interpolation of node samples through the nodes of the
    /// cell containing x.
    pub fn interpolate(&self, values: impl Fn(usize) -> f64, x: f64) -> f64 {
        let range = self.cell_of(x);
        let (lo, hi) = (self.nodes[range.start], self.nodes[range.end - 1]);
        let scale = 1.0 / (hi - lo).max(f64::MIN_POSITIVE);
        let local = |i: usize| (self.nodes[i] - lo) * scale;
        let xl = (x - lo) * scale;
        let (mut num, mut den) = (0.0, 0.0);
        for i in range.clone() {
            let diff = xl - local(i);
            if diff == 0.0 {
                return values(i);
            }
            let mut w = 1.0;
            for j in range.clone() {
                if j != i {
                    w /= local(i) - local(j);
                }
            }
            num += w / diff * values(i);
            den += w / diff;
        }
        num / den
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(10);
        // ∫_0^2 x^19 dx = 2^20 / 20
        let v = gl.integrate(0.0, 2.0, |x| x.powi(19));
        assert_relative_eq!(v, 2f64.powi(20) / 20.0, max_relative = 1e-13);
        assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn jacobi_weight_moments() {
        // ∫_{-1}^1 (1+x)^b x^0 dx = 2^{b+1}/(b+1)
        for &b in &[-0.9, -0.6, -0.3, 0.0, 0.4] {
            let gj = GaussJacobi::new(64, 0.0, b).unwrap();
            let s: f64 = gj.weights.iter().sum();
            assert_relative_eq!(s, 2f64.powf(b + 1.0) / (b + 1.0), max_relative = 1e-12);
            // ∫_0^1 τ^b τ^3 dτ = 1/(b+4)
            let rule = GaussJacobi::power_weight_on(16, b, 1.0).unwrap();
            let v: f64 = rule.iter().map(|(t, w)| w * t.powi(3)).sum();
            assert_relative_eq!(v, 1.0 / (b + 4.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn jacobi_two_sided_beta_function() {
        // ∫_{-1}^1 (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
        let (a, b) = (-0.4, 0.7);
        let gj = GaussJacobi::new(20, a, b).unwrap();
        let s: f64 = gj.weights.iter().sum();
        let exact = 2f64.powf(a + b + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(a + b + 2.0);
        assert_relative_eq!(s, exact, max_relative = 1e-13);
    }

    #[test]
    fn jacobi_rejects_bad_exponents() {
        assert!(GaussJacobi::new(8, -1.0, 0.0).is_err());
        assert!(GaussJacobi::new(0, 0.0, 0.0).is_err());
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{-0.7} dx = 1/0.3
        let v = tanh_sinh(|x| x.powf(-0.7), 0.0, 1.0, 1e-14);
        assert_relative_eq!(v, 1.0 / 0.3, max_relative = 1e-10);
        let v = tanh_sinh(|x| (1.0 - x).ln(), 0.0, 1.0, 1e-14);
        assert_relative_eq!(v, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn graded_rule_with_singular_first_cell() {
        // ∫_0^{ln 2} τ^{-0.6} e^{-50 τ^{0.7}} dτ against tanh-sinh
        let g = |t: f64| t.powf(-0.6) * (-50.0 * t.powf(0.7)).exp();
        let rule = GradedRule::new(0.0, 2f64.ln(), Some(-0.6), Grading::default()).unwrap();
        assert_eq!(rule.len(), 384);
        let reference = tanh_sinh(g, 0.0, 2f64.ln(), 1e-15);
        assert_relative_eq!(rule.integrate(g), reference, max_relative = 1e-12);
    }
}
