//! Dirichlet-Laplacian eigenstructure on intervals and rectangles, subregion
//! geometry, and the spatial inner products built on tensor Gauss-Legendre
//! quadrature.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::GaussLegendre;

/// Points carry two coordinates; the second is ignored in 1D.
pub type Point = [f64; 2];

pub const BUCKET_TOLERANCE: f64 = 1e-9;
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-9;

/// Axis-aligned box given by per-axis bounds [lo, hi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub bounds: Vec<[f64; 2]>,
}

impl Rect {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        let r = Self { bounds };
        r.validate()?;
        Ok(r)
    }

    pub fn unit(dim: usize) -> Self {
        Self { bounds: vec![[0.0, 1.0]; dim] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() || self.bounds.len() > 2 {
            return Err(Error::Geometry(format!("only 1D and 2D boxes are supported, got {} axes", self.bounds.len())));
        }
        for (d, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Geometry(format!("axis {d}: need lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self, d: usize) -> f64 {
        self.bounds[d][1] - self.bounds[d][0]
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim()).map(|d| self.len(d)).product()
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        let tol = 1e-12;
        self.dim() == other.dim()
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(o, i)| i[0] >= o[0] - tol && i[1] <= o[1] + tol)
    }

    fn interiors_overlap(&self, other: &Rect) -> bool {
        self.bounds
            .iter()
            .zip(&other.bounds)
            .all(|(p, q)| p[0].max(q[0]) < p[1].min(q[1]))
    }

    pub fn contains_point(&self, x: &Point) -> bool {
        self.bounds
            .iter()
            .enumerate()
            .all(|(d, [lo, hi])| x[d] >= *lo && x[d] <= *hi)
    }
}

/// The spatial domain Ω.
pub type RectDomain = Rect;

/// A subregion made of non-overlapping boxes inside Ω.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Region {
    pub boxes: Vec<Rect>,
}

impl Region {
    pub fn new(boxes: Vec<Rect>) -> Self {
        Self { boxes }
    }

    pub fn whole(domain: &RectDomain) -> Self {
        Self { boxes: vec![domain.clone()] }
    }

    pub fn empty() -> Self {
        Self { boxes: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty() || self.measure() == 0.0
    }

    pub fn measure(&self) -> f64 {
        self.boxes.iter().map(Rect::measure).sum()
    }

    /// Checks boxes lie in `domain` and do not overlap. Reports every problem.
    pub fn validate_in(&self, domain: &RectDomain) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for (i, b) in self.boxes.iter().enumerate() {
            if let Err(e) = b.validate() {
                problems.push(format!("box {i}: {e}"));
                continue;
            }
            if b.dim() != domain.dim() {
                problems.push(format!("box {i}: has {} axes, domain has {}", b.dim(), domain.dim()));
            } else if !domain.contains_rect(b) {
                problems.push(format!("box {i}: {:?} is not inside the domain {:?}", b.bounds, domain.bounds));
            }
        }
        for i in 0..self.boxes.len() {
            for j in (i + 1)..self.boxes.len() {
                let (p, q) = (&self.boxes[i], &self.boxes[j]);
                if p.dim() == q.dim() && p.interiors_overlap(q) {
                    problems.push(format!("boxes {i} and {j} overlap"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// Which eigenfunction family to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Complete Dirichlet basis Π sqrt(2/len) sin(kπ(x-lo)/len).
    #[default]
    Canonical,
    /// Π sin(kπx_d) on [-1,1]^n: a sub-family of the Dirichlet eigenfunctions.
    PaperBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Wavenumbers per axis, starting at 1.
    pub index: Vec<usize>,
    pub lambda: f64,
    pub bucket: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lambda: f64,
    pub modes: Vec<usize>,
}

impl Bucket {
    pub fn multiplicity(&self) -> usize {
        self.modes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    pub domain: RectDomain,
    pub kind: BasisKind,
    pub cutoff: usize,
    pub modes: Vec<Mode>,
    pub buckets: Vec<Bucket>,
    /// Gauss-Legendre nodes per box axis for all inner products.
    pub quadrature_order: usize,
    /// Factor between the printed example eigenfunctions (2 sin sin) and the
    /// normalized ones; 1 for the canonical basis.
    pub paper_scale: f64,
}

/// Tensor-product sine eigenpairs with λ ≤ the axis cutoff, sorted by λ.
pub fn dirichlet_eigenpairs(domain: &RectDomain, cutoff: usize, kind: BasisKind) -> Result<SpectralBasis> {
    domain.validate()?;
    if cutoff == 0 {
        return Err(Error::Parameter("cutoff K must be at least 1".into()));
    }
    if kind == BasisKind::PaperBasis
        && !domain.bounds.iter().all(|b| (b[0] + 1.0).abs() < 1e-14 && (b[1] - 1.0).abs() < 1e-14)
    {
        return Err(Error::Geometry("the paper basis is defined on [-1,1]^n only".into()));
    }
    let dim = domain.dim();
    let mut indices: Vec<Vec<usize>> = Vec::new();
    match dim {
        1 => indices.extend((1..=cutoff).map(|k| vec![k])),
        _ => {
            for k in 1..=cutoff {
                for l in 1..=cutoff {
                    indices.push(vec![k, l]);
                }
            }
        }
    }
    let wavenumber = |d: usize, k: usize| match kind {
        BasisKind::Canonical => k as f64 * PI / domain.len(d),
        BasisKind::PaperBasis => k as f64 * PI,
    };
    let mut modes: Vec<Mode> = indices
        .into_iter()
        .map(|index| {
            let lambda = index.iter().enumerate().map(|(d, &k)| wavenumber(d, k).powi(2)).sum();
            Mode { index, lambda, bucket: 0 }
        })
        .collect();
    modes.sort_by(|p, q| p.lambda.total_cmp(&q.lambda).then_with(|| p.index.cmp(&q.index)));
    let mut buckets: Vec<Bucket> = Vec::new();
    for (i, m) in modes.iter_mut().enumerate() {
        match buckets.last_mut() {
            Some(b) if (m.lambda - b.lambda).abs() <= BUCKET_TOLERANCE * b.lambda => {
                b.modes.push(i);
                m.bucket = buckets.len() - 1;
            }
            _ => {
                buckets.push(Bucket { lambda: m.lambda, modes: vec![i] });
                m.bucket = buckets.len() - 1;
            }
        }
    }
    let paper_scale = match (kind, dim) {
        (BasisKind::PaperBasis, 2) => 2.0,
        _ => 1.0,
    };
    let mut basis = SpectralBasis { domain: domain.clone(), kind, cutoff, modes, buckets, quadrature_order: 2 * cutoff + 8, paper_scale };
    basis.calibrate_quadrature()?;
    Ok(basis)
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    // (wavenumber, amplitude, offset) of the axis-d factor.
    fn axis(&self, d: usize, k: usize) -> (f64, f64, f64) {
        match self.kind {
            BasisKind::Canonical => {
                let len = self.domain.len(d);
                (k as f64 * PI / len, (2.0 / len).sqrt(), self.domain.bounds[d][0])
            }
            BasisKind::PaperBasis => (k as f64 * PI, 1.0, 0.0),
        }
    }

    /// Normalized eigenfunction value.
    pub fn value(&self, mode: usize, x: &Point) -> f64 {
        let m = &self.modes[mode];
        m.index
            .iter()
            .enumerate()
            .map(|(d, &k)| {
                let (w, amp, off) = self.axis(d, k);
                amp * (w * (x[d] - off)).sin()
            })
            .product()
    }

    /// Gradient of the normalized eigenfunction (unused components are 0).
    pub fn gradient(&self, mode: usize, x: &Point) -> Point {
        let m = &self.modes[mode];
        let dim = self.dim();
        let mut vals = [0.0; 2];
        let mut ders = [0.0; 2];
        for (d, &k) in m.index.iter().enumerate() {
            let (w, amp, off) = self.axis(d, k);
            let arg = w * (x[d] - off);
            vals[d] = amp * arg.sin();
            ders[d] = amp * w * arg.cos();
        }
        let mut g = [0.0; 2];
        for d in 0..dim {
            g[d] = (0..dim).map(|e| if e == d { ders[e] } else { vals[e] }).product();
        }
        g
    }

    /// Σ c_k φ_k(x).
    pub fn evaluate(&self, coeffs: &DVector<f64>, x: &Point) -> f64 {
        (0..self.len()).map(|k| coeffs[k] * self.value(k, x)).sum()
    }

    /// Σ c_k ∇φ_k(x).
    pub fn evaluate_gradient(&self, coeffs: &DVector<f64>, x: &Point) -> Point {
        let mut g = [0.0; 2];
        for k in 0..self.len() {
            let gk = self.gradient(k, x);
            g[0] += coeffs[k] * gk[0];
            g[1] += coeffs[k] * gk[1];
        }
        g
    }

    pub fn region_rule(&self, region: &Region) -> RegionRule {
        RegionRule::new(region, self.quadrature_order)
    }

    /// Raises the quadrature order until the basis Gram over Ω is the identity
    /// to [`ORTHONORMALITY_TOLERANCE`].
    fn calibrate_quadrature(&mut self) -> Result<()> {
        for _ in 0..8 {
            let err = self.orthonormality_error(&Region::whole(&self.domain));
            if err <= ORTHONORMALITY_TOLERANCE {
                return Ok(());
            }
            log::debug!(
                "orthonormality error {err:.2e} at quadrature order {}; raising it",
                self.quadrature_order
            );
            self.quadrature_order += self.quadrature_order / 2;
        }
        Err(Error::Geometry("could not reach orthonormality with tensor Gauss-Legendre".into()))
    }

    /// max |⟨φ_i, φ_j⟩_Ω - δ_ij|.
    pub fn orthonormality_error(&self, omega: &Region) -> f64 {
        let g = state_gram(self, omega);
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Values φ_k at every rule point: rows = modes.
    pub fn value_table(&self, rule: &RegionRule) -> DMatrix<f64> {
        let rows = par::map_range(self.len(), |k| rule.points.iter().map(|x| self.value(k, x)).collect::<Vec<f64>>());
        DMatrix::from_fn(self.len(), rule.len(), |k, p| rows[k][p])
    }

    /// Gradient component d of φ_k at every rule point: rows = modes.
    pub fn gradient_table(&self, rule: &RegionRule, d: usize) -> DMatrix<f64> {
        let rows = par::map_range(self.len(), |k| rule.points.iter().map(|x| self.gradient(k, x)[d]).collect::<Vec<f64>>());
        DMatrix::from_fn(self.len(), rule.len(), |k, p| rows[k][p])
    }
}

/// Tensor Gauss-Legendre points and weights covering every box of a region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl RegionRule {
    pub fn new(region: &Region, order: usize) -> Self {
        let gl = GaussLegendre::new(order.max(1));
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for b in &region.boxes {
            let axes: Vec<Vec<(f64, f64)>> = b.bounds.iter().map(|[lo, hi]| gl.mapped(*lo, *hi).collect()).collect();
            match axes.len() {
                1 => {
                    for &(x, w) in &axes[0] {
                        points.push([x, 0.0]);
                        weights.push(w);
                    }
                }
                _ => {
                    for &(x, wx) in &axes[0] {
                        for &(y, wy) in &axes[1] {
                            points.push([x, y]);
                            weights.push(wx * wy);
                        }
                    }
                }
            }
        }
        Self { points, weights, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Result of [`region_inner_product`]; `empty_region` flags a region of zero measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProduct {
    pub value: f64,
    pub empty_region: bool,
}

/// ⟨f, g⟩ over a region by tensor Gauss-Legendre of the given order per box axis.
pub fn region_inner_product<F, G>(f: F, g: G, region: &Region, order: usize) -> InnerProduct
where
    F: Fn(&Point) -> f64,
    G: Fn(&Point) -> f64,
{
    if region.is_empty() {
        log::warn!("inner product over an empty region");
        return InnerProduct { value: 0.0, empty_region: true };
    }
    let rule = RegionRule::new(region, order);
    InnerProduct { value: rule.integrate(|x| f(x) * g(x)), empty_region: false }
}

/// Weighted Gram Aᵀ diag(w) B for tables with rows = modes, columns = points.
fn weighted_gram(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let scaled = DMatrix::from_fn(b.nrows(), b.ncols(), |k, p| b[(k, p)] * w[p]);
    a * scaled.transpose()
}

/// ⟨φ_k, φ_k'⟩ over a region.
pub fn state_gram(basis: &SpectralBasis, region: &Region) -> DMatrix<f64> {
    if region.is_empty() {
        return DMatrix::zeros(basis.len(), basis.len());
    }
    let rule = basis.region_rule(region);
    let v = basis.value_table(&rule);
    symmetrize(weighted_gram(&v, &v, &rule.weights))
}

/// Γ_kk' = ⟨p_ω∇φ_k, p_ω∇φ_k'⟩ over (L²(ω))^n.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBasisGram {
    pub gamma: DMatrix<f64>,
    pub quadrature_order: usize,
}

pub fn gradient_gram(basis: &SpectralBasis, region: &Region) -> GradientBasisGram {
    gradient_gram_with_order(basis, region, basis.quadrature_order)
}

pub fn gradient_gram_with_order(basis: &SpectralBasis, region: &Region, order: usize) -> GradientBasisGram {
    let n = basis.len();
    if region.is_empty() {
        return GradientBasisGram { gamma: DMatrix::zeros(n, n), quadrature_order: order };
    }
    let rule = RegionRule::new(region, order);
    let mut gamma = DMatrix::zeros(n, n);
    for d in 0..basis.dim() {
        let g = basis.gradient_table(&rule, d);
        gamma += weighted_gram(&g, &g, &rule.weights);
    }
    GradientBasisGram { gamma: symmetrize(gamma), quadrature_order: order }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// c_k = ⟨g, ∇φ_k⟩ over ω for a vector field g evaluated pointwise.
///
/// Equals ⟨∇* p_ω* g, φ_k⟩_Ω by integration by parts against functions that
/// vanish on ∂Ω, so the Poisson problem for ∇* is never solved.
pub fn adjoint_gradient_coefficients<F>(field: F, basis: &SpectralBasis, region: &Region) -> DVector<f64>
where
    F: Fn(&Point) -> Point + Sync,
{
    let n = basis.len();
    if region.is_empty() {
        return DVector::zeros(n);
    }
    let rule = basis.region_rule(region);
    let samples: Vec<Point> = par::map_slice(&rule.points, |x| field(x));
    let coeffs = par::map_range(n, |k| {
        let mut acc = 0.0;
        for ((x, w), g) in rule.points.iter().zip(&rule.weights).zip(&samples) {
            let gk = basis.gradient(k, x);
            acc += w * (g[0] * gk[0] + g[1] * gk[1]);
        }
        acc
    });
    DVector::from_vec(coeffs)
}

/// Spatial profile d_i of an actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Constant {
        value: f64,
    },
    /// Σ c x^p y^q over the listed terms.
    Polynomial {
        terms: Vec<PolyTerm>,
    },
    /// amplitude Π sin(k_d π (x_d - lo_d)/len_d) relative to the domain Ω.
    ProductOfSines {
        amplitude: f64,
        wavenumbers: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl Distribution {
    pub fn eval(&self, x: &Point, domain: &RectDomain) -> f64 {
        match self {
            Distribution::Constant { value } => *value,
            Distribution::Polynomial { terms } => terms
                .iter()
                .map(|t| t.coeff * t.powers.iter().enumerate().map(|(d, &p)| x[d].powi(p as i32)).product::<f64>())
                .sum(),
            Distribution::ProductOfSines { amplitude, wavenumbers } => {
                amplitude
                    * wavenumbers
                        .iter()
                        .enumerate()
                        .map(|(d, k)| (k * PI * (x[d] - domain.bounds[d][0]) / domain.len(d)).sin())
                        .product::<f64>()
            }
        }
    }

    pub fn validate(&self, dim: usize) -> std::result::Result<(), String> {
        match self {
            Distribution::Constant { value } if !value.is_finite() => Err("constant value must be finite".into()),
            Distribution::Polynomial { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    if t.powers.len() != dim || !t.coeff.is_finite() {
                        return Err(format!("term {i}: need {dim} powers and a finite coefficient"));
                    }
                }
                Ok(())
            }
            Distribution::ProductOfSines { amplitude, wavenumbers } => {
                if wavenumbers.len() != dim || !amplitude.is_finite() || wavenumbers.iter().any(|k| !k.is_finite()) {
                    Err(format!("need {dim} finite wavenumbers and a finite amplitude"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// One actuator: support P_i and distribution d_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub support: Region,
    pub distribution: Distribution,
}

impl Actuator {
    pub fn zone(support: Region) -> Self {
        Self { support, distribution: Distribution::Constant { value: 1.0 } }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorSet {
    pub actuators: Vec<Actuator>,
}

impl ActuatorSet {
    pub fn new(actuators: Vec<Actuator>) -> Self {
        Self { actuators }
    }

    pub fn len(&self) -> usize {
        self.actuators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actuators.is_empty()
    }
}

/// One whole-domain actuator per mode, shaped like that mode. D is diagonal
/// with nonzero entries.
pub fn modal_bank(basis: &SpectralBasis) -> ActuatorSet {
    let scale = match basis.kind {
        BasisKind::Canonical => 1.0,
        // sin(kπx) on [-1, 1] is ± sin(2k π(x+1)/2).
        BasisKind::PaperBasis => 2.0,
    };
    ActuatorSet::new(
        basis
            .modes
            .iter()
            .map(|m| Actuator {
                support: Region::whole(&basis.domain),
                distribution: Distribution::ProductOfSines {
                    amplitude: 1.0,
                    wavenumbers: m.index.iter().map(|&k| scale * k as f64).collect(),
                },
            })
            .collect(),
    )
}

/// d^i_k = ⟨χ_{P_i} d_i, φ_k⟩: an m × modes matrix.
pub fn actuator_coefficients(actuators: &ActuatorSet, basis: &SpectralBasis) -> Result<DMatrix<f64>> {
    let n = basis.len();
    let mut d = DMatrix::zeros(actuators.len(), n);
    for (i, act) in actuators.actuators.iter().enumerate() {
        if let Err(problems) = act.support.validate_in(&basis.domain) {
            return Err(Error::Geometry(format!("actuator {i}: {}", problems.join("; "))));
        }
        if let Err(msg) = act.distribution.validate(basis.dim()) {
            return Err(Error::Geometry(format!("actuator {i}: {msg}")));
        }
        if act.support.is_empty() {
            continue;
        }
        let rule = basis.region_rule(&act.support);
        let v = basis.value_table(&rule);
        let weights: Vec<f64> = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * act.distribution.eval(x, &basis.domain))
            .collect();
        for k in 0..n {
            d[(i, k)] = (0..rule.len()).map(|p| v[(k, p)] * weights[p]).sum();
        }
    }
    Ok(d)
}

/// Gridded samples (x, y, value) of Σ c_k φ_k for plotting.
pub fn sample_field(basis: &SpectralBasis, coeffs: &DVector<f64>, per_axis: usize) -> Vec<(Point, f64)> {
    let per_axis = per_axis.max(2);
    let axis = |d: usize| -> Vec<f64> {
        let [lo, hi] = basis.domain.bounds[d];
        (0..per_axis).map(|j| lo + (hi - lo) * j as f64 / (per_axis - 1) as f64).collect()
    };
    let xs = axis(0);
    let mut out = Vec::new();
    if basis.dim() == 1 {
        for &x in &xs {
            let p = [x, 0.0];
            out.push((p, basis.evaluate(coeffs, &p)));
        }
    } else {
        let ys = axis(1);
        for &x in &xs {
            for &y in &ys {
                let p = [x, y];
                out.push((p, basis.evaluate(coeffs, &p)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_spectrum() {
        let b = dirichlet_eigenpairs(&Rect::unit(1), 3, BasisKind::Canonical).unwrap();
        let l: Vec<f64> = b.lambdas();
        assert_relative_eq!(l[0], PI * PI, max_relative = 1e-15);
        assert_relative_eq!(l[2], 9.0 * PI * PI, max_relative = 1e-15);
        assert!(b.buckets.iter().all(|bk| bk.multiplicity() == 1));
    }

    #[test]
    fn square_has_double_eigenvalues() {
        let b = dirichlet_eigenpairs(&Rect::unit(2), 3, BasisKind::Canonical).unwrap();
        let bucket = b.buckets.iter().find(|bk| (bk.lambda - 5.0 * PI * PI).abs() < 1e-9).unwrap();
        assert_eq!(bucket.multiplicity(), 2);
    }

    #[test]
    fn paper_basis_requires_symmetric_square() {
        assert!(dirichlet_eigenpairs(&Rect::unit(2), 2, BasisKind::PaperBasis).is_err());
        let dom = Rect::new(vec![[-1.0, 1.0], [-1.0, 1.0]]).unwrap();
        let b = dirichlet_eigenpairs(&dom, 2, BasisKind::PaperBasis).unwrap();
        assert_relative_eq!(b.modes[0].lambda, 2.0 * PI * PI, max_relative = 1e-15);
        assert_eq!(b.paper_scale, 2.0);
    }

    #[test]
    fn region_validation_reports_every_box() {
        let dom = Rect::unit(2);
        let region = Region::new(vec![
            Rect::new(vec![[0.0, 0.5], [0.0, 0.5]]).unwrap(),
            Rect::new(vec![[0.4, 1.2], [0.0, 0.5]]).unwrap(),
            Rect::new(vec![[0.2, 0.3], [0.1, 0.2]]).unwrap(),
        ]);
        let errs = region.validate_in(&dom).unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("box 1")));
        assert!(errs.iter().any(|e| e.contains("boxes 0 and 2 overlap")));
    }

    #[test]
    fn modal_bank_is_diagonal() {
        for (dom, kind) in [(Rect::unit(2), BasisKind::Canonical), (Rect::new(vec![[-1.0, 1.0], [-1.0, 1.0]]).unwrap(), BasisKind::PaperBasis)] {
            let b = dirichlet_eigenpairs(&dom, 3, kind).unwrap();
            let d = actuator_coefficients(&modal_bank(&b), &b).unwrap();
            for i in 0..b.len() {
                for k in 0..b.len() {
                    if i == k {
                        assert!(d[(i, k)].abs() > 0.4);
                    } else {
                        assert!(d[(i, k)].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_region_flags() {
        let r = region_inner_product(|_| 1.0, |_| 1.0, &Region::empty(), 8);
        assert!(r.empty_region);
        assert_eq!(r.value, 0.0);
    }
}
