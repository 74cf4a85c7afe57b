//! Input-to-gradient map H, its adjoint, the gradient Gramian and the
//! strategic-actuator rank test.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::LogTimeWindow;
use crate::mittag_leffler::kappa;
use crate::par;
use crate::quadrature::{GaussLegendre, Grading};
use crate::solver::{forced_solution, ControlGrid, ControlSignal, Plant, SpectralState};
use crate::spectral::{gradient_gram, BasisKind, Rect, Region, SpectralBasis};

/// Default relative threshold for positive definiteness.
pub const DEFAULT_PD_THRESHOLD: f64 = 1e-10;
/// Singular values below this times the largest one count as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;
// Γ eigenvalues below this times the largest span no gradient direction.
const GRADIENT_SPAN_TOLERANCE: f64 = 1e-12;

/// Hu = z_u(b) for controls on a fixed input-map grid, with the kernel table
/// κ_k(τ_j) cached.
#[derive(Debug, Clone)]
pub struct InputMap {
    pub plant: Plant,
    pub grid: ControlGrid,
    /// modes × nodes.
    pub kernel: DMatrix<f64>,
}

impl InputMap {
    pub fn new(plant: Plant, epsilon: Option<f64>, grading: Grading) -> Result<Self> {
        let grid = ControlGrid::for_energy(plant.alpha, plant.window, epsilon, grading)?;
        let kernel = plant.kernel_table(grid.taus())?;
        Ok(Self { plant, grid, kernel })
    }

    /// The ε cutoff, if the problem is regularized.
    pub fn epsilon(&self) -> Option<f64> {
        (self.grid.epsilon() > 0.0).then(|| self.grid.epsilon())
    }

    pub fn apply(&self, u: &ControlSignal) -> Result<SpectralState> {
        if u.grid != self.grid {
            return forced_solution(&self.plant, u, self.plant.window.b);
        }
        if u.channels() != self.plant.channels() {
            return Err(Error::Config(format!("control has {} channels, plant has {}", u.channels(), self.plant.channels())));
        }
        let du = self.plant.d.transpose() * &u.values;
        let w = &self.grid.rule.weights;
        let z = DVector::from_fn(self.plant.modes(), |k, _| {
            (0..w.len()).map(|j| w[j] * self.kernel[(k, j)] * du[(k, j)]).sum()
        });
        SpectralState::new(&self.plant.basis, self.plant.window.b, z)
    }

    /// (H*v)(t_j) = (1/t_j) Σ_k d^i_k κ_k(τ_j) v_k on the grid nodes.
    pub fn adjoint(&self, v: &DVector<f64>) -> Result<ControlSignal> {
        if v.len() != self.plant.modes() {
            return Err(Error::Config(format!("{} coefficients for {} modes", v.len(), self.plant.modes())));
        }
        let times = self.grid.times();
        let mut kv = self.kernel.clone();
        for (k, mut row) in kv.row_iter_mut().enumerate() {
            row *= v[k];
        }
        let mut values = &self.plant.d * kv;
        for (j, mut col) in values.column_iter_mut().enumerate() {
            col /= times[j];
        }
        ControlSignal::new(self.grid.clone(), values)
    }

    /// M = H H* in state coordinates:
    /// M_kk' = (DᵀD)_kk' Σ_j (w_j / t_j) κ_k(τ_j) κ_k'(τ_j).
    pub fn state_gramian(&self) -> DMatrix<f64> {
        let n = self.plant.modes();
        let nodes = self.grid.len();
        let times = self.grid.times();
        let s: Vec<f64> = (0..nodes).map(|j| self.grid.rule.weights[j] / times[j]).collect();
        let dtd = self.plant.d.transpose() * &self.plant.d;
        let rows = par::map_range(n, |k| {
            (0..n)
                .map(|l| {
                    if dtd[(k, l)] == 0.0 {
                        return 0.0;
                    }
                    let xi: f64 = (0..nodes).map(|j| s[j] * self.kernel[(k, j)] * self.kernel[(l, j)]).sum();
                    dtd[(k, l)] * xi
                })
                .collect::<Vec<f64>>()
        });
        let mut m = DMatrix::from_fn(n, n, |k, l| rows[k][l]);
        m = (&m + m.transpose()) * 0.5;
        m
    }

    /// The map x ↦ Hu with x_{i + m j} = sqrt(w_j t_j) u_i(t_j), so that the
    /// energy of u equals ‖x‖².
    pub fn energy_weighted_matrix(&self) -> DMatrix<f64> {
        let m = self.plant.channels();
        let n = self.plant.modes();
        let nodes = self.grid.len();
        let dt = self.grid.dt_weights();
        let w = &self.grid.rule.weights;
        DMatrix::from_fn(n, m * nodes, |k, col| {
            let (i, j) = (col % m, col / m);
            w[j] * self.kernel[(k, j)] * self.plant.d[(i, k)] / dt[j].sqrt()
        })
    }

    /// Inverse of the scaling in [`Self::energy_weighted_matrix`].
    pub fn control_from_weighted(&self, x: &DVector<f64>) -> Result<ControlSignal> {
        let m = self.plant.channels();
        let dt = self.grid.dt_weights();
        let values = DMatrix::from_fn(m, self.grid.len(), |i, j| x[i + m * j] / dt[j].sqrt());
        ControlSignal::new(self.grid.clone(), values)
    }

    pub fn weighted_from_control(&self, u: &ControlSignal) -> DVector<f64> {
        let m = self.plant.channels();
        let dt = self.grid.dt_weights();
        DVector::from_fn(m * self.grid.len(), |idx, _| u.values[(idx % m, idx / m)] * dt[idx / m].sqrt())
    }
}

/// Hu: the forced solution at t = b.
pub fn apply_h(plant: &Plant, u: &ControlSignal) -> Result<SpectralState> {
    forced_solution(plant, u, plant.window.b)
}

/// Channel values (H*v)(t) = (1/t)(ln b/t)^{α-1} Σ_k E_{α,α}(-λ_k (ln b/t)^α) d^i_k v_k.
pub fn apply_h_adjoint(plant: &Plant, v: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    apply_h_adjoint_log(plant, v, plant.window.log_to_b(t)?)
}

/// [`apply_h_adjoint`] at τ = ln(b/t), for τ too small to survive rounding
/// through t.
pub fn apply_h_adjoint_log(plant: &Plant, v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if v.len() != plant.modes() {
        return Err(Error::Config(format!("{} coefficients for {} modes", v.len(), plant.modes())));
    }
    if !(0.0..=plant.window.log_length() * (1.0 + 1e-12)).contains(&tau) {
        return Err(Error::Domain(format!("tau={tau} outside [0, ln(b/a)]")));
    }
    if tau == 0.0 && plant.alpha < 1.0 {
        return Err(Error::SingularEndpoint("H*v is singular at t = b for alpha < 1".into()));
    }
    let kv = if tau == 0.0 {
        v.clone()
    } else {
        let per_bucket: Vec<f64> = plant
            .basis
            .buckets
            .iter()
            .map(|b| kappa(plant.alpha, b.lambda, tau))
            .collect::<Result<_>>()?;
        DVector::from_fn(plant.modes(), |k, _| per_bucket[plant.basis.modes[k].bucket] * v[k])
    };
    Ok(&plant.d * kv * (tau.exp() / plant.window.b))
}

/// Eigenvalues of the symmetric pencil (ΓMΓ, Γ) on range(Γ), ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PencilSpectrum {
    pub eigenvalues: Vec<f64>,
    pub gradient_dim: usize,
}

/// The operator p_ω∇HH*∇*p_ω* in gradient coordinates, stored as (Γ, M).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientGramian {
    pub indices: Vec<Vec<usize>>,
    pub lambdas: Vec<f64>,
    /// Γ_kk' = ⟨p_ω∇φ_k, p_ω∇φ_k'⟩.
    pub gamma: DMatrix<f64>,
    /// M = HH* in state coordinates.
    pub state_gramian: DMatrix<f64>,
    pub alpha: f64,
    pub window: LogTimeWindow,
    pub region: Region,
    pub actuators: usize,
    pub epsilon: Option<f64>,
    pub space_quadrature_order: usize,
    pub time_nodes: usize,
    pub spectrum: PencilSpectrum,
}

impl GradientGramian {
    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.spectrum.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = (self.min_eigenvalue(), self.max_eigenvalue());
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    /// ΓMΓ: the coordinate matrix of ⟨F y, y'⟩.
    pub fn operator_form(&self) -> DMatrix<f64> {
        let g = &self.gamma;
        let f = g * &self.state_gramian * g;
        (&f + f.transpose()) * 0.5
    }
}

/// Range of a PSD matrix: eigenvectors with eigenvalue above the tolerance.
pub(crate) fn psd_range(g: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = g.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), Vec::new());
    }
    let eig = SymmetricEigen::new((g + g.transpose()) * 0.5);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&i| top > 0.0 && eig.eigenvalues[i] > tol * top).collect();
    let u = DMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    let s = keep.iter().map(|&i| eig.eigenvalues[i]).collect();
    (u, s)
}

fn pencil_spectrum(gamma: &DMatrix<f64>, m: &DMatrix<f64>) -> PencilSpectrum {
    let (u, s) = psd_range(gamma, GRADIENT_SPAN_TOLERANCE);
    let r = s.len();
    if r == 0 {
        return PencilSpectrum { eigenvalues: Vec::new(), gradient_dim: 0 };
    }
    let mut t = u;
    for (c, sc) in s.iter().enumerate() {
        t.column_mut(c).scale_mut(sc.sqrt());
    }
    let p = t.transpose() * m * &t;
    let p = (&p + p.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(p).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    PencilSpectrum { eigenvalues: ev, gradient_dim: r }
}

/// Builds the gradient Gramian on `region` from a prepared input map.
pub fn assemble_gramian(map: &InputMap, region: &Region) -> Result<GradientGramian> {
    let basis = &map.plant.basis;
    if let Err(problems) = region.validate_in(&basis.domain) {
        return Err(Error::Geometry(problems.join("; ")));
    }
    let gg = gradient_gram(basis, region);
    let m = map.state_gramian();
    let spectrum = pencil_spectrum(&gg.gamma, &m);
    Ok(GradientGramian {
        indices: basis.modes.iter().map(|md| md.index.clone()).collect(),
        lambdas: basis.lambdas(),
        gamma: gg.gamma,
        state_gramian: m,
        alpha: map.plant.alpha,
        window: map.plant.window,
        region: region.clone(),
        actuators: map.plant.channels(),
        epsilon: map.epsilon(),
        space_quadrature_order: gg.quadrature_order,
        time_nodes: map.grid.len(),
        spectrum,
    })
}

/// Outcome of the positive-definiteness test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub controllable: bool,
    /// Smallest pencil eigenvalue.
    pub margin: f64,
    pub relative_margin: f64,
    pub max_eigenvalue: f64,
    pub condition_number: Option<f64>,
    pub threshold: f64,
    /// K with ‖y‖ ≤ K ‖H*∇*p_ω* y‖ inside the truncation; not a certificate
    /// for the untruncated problem.
    pub exactness_constant: Option<f64>,
    pub gradient_dim: usize,
}

pub fn approx_controllability_verdict(w: &GradientGramian, threshold: f64) -> Verdict {
    let lo = w.min_eigenvalue();
    let hi = w.max_eigenvalue();
    let controllable = w.spectrum.gradient_dim > 0 && hi > 0.0 && lo > threshold * hi;
    let finite = |x: f64| x.is_finite().then_some(x);
    Verdict {
        controllable,
        margin: lo,
        relative_margin: if hi > 0.0 { lo / hi } else { 0.0 },
        max_eigenvalue: hi,
        condition_number: finite(w.condition_number()),
        threshold,
        exactness_constant: if lo > 0.0 { Some(lo.powf(-0.5)) } else { None },
        gradient_dim: w.spectrum.gradient_dim,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketReport {
    pub lambda: f64,
    pub multiplicity: usize,
    pub modes: Vec<Vec<usize>>,
    /// D_k^l per spatial direction l, m × r_k.
    pub blocks: Vec<DMatrix<f64>>,
    pub ranks: Vec<usize>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategicReport {
    pub actuators: usize,
    pub max_multiplicity: usize,
    pub rank_threshold: f64,
    /// True in two or more dimensions, where the rank test is the generic
    /// form of the injectivity condition.
    pub generic: bool,
    pub buckets: Vec<BucketReport>,
    pub strategic: bool,
}

fn numerical_rank(m: &DMatrix<f64>, cutoff: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Rank test on D_k^l: entry (i, j) is d^i_kj ‖p_ω ∂_l φ_kj‖, the size of
/// ∂_l(d^i_kj φ_kj) seen on ω. Ranks use one global singular-value cutoff.
pub fn strategic_test(basis: &SpectralBasis, d: &DMatrix<f64>, region: &Region) -> StrategicReport {
    strategic_test_with(basis, d, region, RANK_THRESHOLD)
}

/// [`strategic_test`] with a chosen relative singular-value cutoff.
pub fn strategic_test_with(basis: &SpectralBasis, d: &DMatrix<f64>, region: &Region, rank_threshold: f64) -> StrategicReport {
    let dim = basis.dim();
    let m = d.nrows();
    let rule = basis.region_rule(region);
    let norms: Vec<Vec<f64>> = (0..dim)
        .map(|l| {
            let g = basis.gradient_table(&rule, l);
            (0..basis.len())
                .map(|k| (0..rule.len()).map(|p| rule.weights[p] * g[(k, p)].powi(2)).sum::<f64>().sqrt())
                .collect()
        })
        .collect();
    let blocks: Vec<Vec<DMatrix<f64>>> = basis
        .buckets
        .iter()
        .map(|b| {
            (0..dim)
                .map(|l| DMatrix::from_fn(m, b.multiplicity(), |i, j| d[(i, b.modes[j])] * norms[l][b.modes[j]]))
                .collect()
        })
        .collect();
    let largest = blocks
        .iter()
        .flatten()
        .filter(|b| !b.is_empty())
        .map(|b| b.clone().svd(false, false).singular_values.max())
        .fold(0.0, f64::max);
    let cutoff = rank_threshold * largest;
    let max_multiplicity = basis.buckets.iter().map(|b| b.multiplicity()).max().unwrap_or(0);
    let buckets: Vec<BucketReport> = basis
        .buckets
        .iter()
        .zip(blocks)
        .map(|(b, blocks)| {
            let ranks: Vec<usize> = blocks.iter().map(|blk| numerical_rank(blk, cutoff)).collect();
            let pass = largest > 0.0 && ranks.iter().all(|&r| r == b.multiplicity());
            BucketReport {
                lambda: b.lambda,
                multiplicity: b.multiplicity(),
                modes: b.modes.iter().map(|&k| basis.modes[k].index.clone()).collect(),
                blocks,
                ranks,
                pass,
            }
        })
        .collect();
    let strategic = m >= max_multiplicity && !buckets.is_empty() && buckets.iter().all(|b| b.pass);
    StrategicReport { actuators: m, max_multiplicity, rank_threshold, generic: dim >= 2, buckets, strategic }
}

/// One row of the worked-example coefficient table on Ω = [-1,1]² with the
/// printed eigenfunctions 2 sin(kπx₁) sin(lπx₂).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleCoefficients {
    pub k: usize,
    pub l: usize,
    pub p: usize,
    pub q: usize,
    /// ∫_P 2 sin(kπx₁) sin(lπx₂) dx over the actuator support.
    pub m_kl: f64,
    /// M_kl(ω) ⟨∂_{x₁} z, sin(kπx₁) sin(lπx₂)⟩_{L²(ω)}, z = sin(pπx₁) cos(qπx₂).
    pub j_quadrature: f64,
    /// The printed closed form; None when a denominator vanishes.
    pub j_closed_form: Option<f64>,
    pub relative_discrepancy: Option<f64>,
    /// k, l odd and p, q even.
    pub in_parity_regime: bool,
}

fn box_integral<F: Fn(f64, f64) -> f64>(r: &Rect, order: usize, f: F) -> f64 {
    let gl = GaussLegendre::new(order);
    let [x0, x1] = r.bounds[0];
    let [y0, y1] = r.bounds[1];
    gl.integrate(x0, x1, |x| gl.integrate(y0, y1, |y| f(x, y)))
}

fn region_integral<F: Fn(f64, f64) -> f64 + Copy>(region: &Region, order: usize, f: F) -> f64 {
    region.boxes.iter().map(|b| box_integral(b, order, f)).sum()
}

/// M_kl for an actuator support P ⊂ [-1,1]², by quadrature.
pub fn example_m_kl(support: &Region, k: usize, l: usize, order: usize) -> f64 {
    let (kf, lf) = (k as f64 * PI, l as f64 * PI);
    region_integral(support, order, |x, y| 2.0 * (kf * x).sin() * (lf * y).sin())
}

/// The closed form as printed: 8p/(klπ) (1/((k+p)π) - 1/((k-p)π)) (1/((l+q)π) - 1/((l-q)π)).
pub fn example_j_closed_form(k: usize, l: usize, p: usize, q: usize) -> Option<f64> {
    if k == p || l == q {
        return None;
    }
    let (k, l, p, q) = (k as f64, l as f64, p as f64, q as f64);
    let a = 1.0 / ((k + p) * PI) - 1.0 / ((k - p) * PI);
    let b = 1.0 / ((l + q) * PI) - 1.0 / ((l - q) * PI);
    Some(8.0 * p / (k * l * PI) * a * b)
}

pub fn example_coefficients(
    support: &Region,
    omega: &Region,
    k: usize,
    l: usize,
    p: usize,
    q: usize,
    order: usize,
) -> ExampleCoefficients {
    let (kf, lf, pf, qf) = (k as f64 * PI, l as f64 * PI, p as f64 * PI, q as f64 * PI);
    let m_kl = example_m_kl(support, k, l, order);
    let m_omega = example_m_kl(omega, k, l, order);
    let pairing = region_integral(omega, order, |x, y| pf * (pf * x).cos() * (qf * y).cos() * (kf * x).sin() * (lf * y).sin());
    let j_quadrature = m_omega * pairing;
    let j_closed_form = example_j_closed_form(k, l, p, q);
    let relative_discrepancy = j_closed_form.map(|c| (c - j_quadrature).abs() / j_quadrature.abs().max(f64::MIN_POSITIVE));
    ExampleCoefficients {
        k,
        l,
        p,
        q,
        m_kl,
        j_quadrature,
        j_closed_form,
        relative_discrepancy,
        in_parity_regime: k % 2 == 1 && l % 2 == 1 && p % 2 == 0 && q % 2 == 0,
    }
}

/// True when the basis is the printed example family.
pub fn is_example_basis(basis: &SpectralBasis) -> bool {
    basis.kind == BasisKind::PaperBasis && basis.dim() == 2
}
