//! Runs a scenario and turns the result into a JSON report plus CSV tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::controllability::{
    approx_controllability_verdict, assemble_gramian, example_coefficients, example_m_kl, strategic_test_with, ExampleCoefficients,
    InputMap, StrategicReport, Verdict,
};
use crate::error::{Error, Result};
use crate::hum::{
    g_norm, g_pairing, pseudo_solve, random_coefficients, solve_hum, verify_minimality, HumProblem, MinimalityReport, Observation,
    SolveDiagnostics,
};
use crate::mittag_leffler::ml;
use crate::quadrature::Grading;
use crate::scenario::{ActuatorSpec, ControlSpec, NamedField, OutputFormat, Scenario, TargetSpec, Task};
use crate::solver::{forced_solution, free_solution, ControlGrid, ControlSignal, LogClock, Plant, SpectralState};
use crate::spectral::{
    adjoint_gradient_coefficients, dirichlet_eigenpairs, gradient_gram, Actuator, ActuatorSet, BasisKind, Point, Rect, Region,
    SpectralBasis,
};
use crate::LogTimeWindow;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

/// Alternative order used for the subregion checks of the worked example
/// when α ≤ 1/2 makes the zone-actuator energy infinite.
pub const EXAMPLE_SURROGATE_ALPHA: f64 = 0.7;
const EXAMPLE_ZERO_TOLERANCE: f64 = 1e-10;
const EXAMPLE_BLIND_TOLERANCE: f64 = 1e-20;
const EXAMPLE_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureInfo {
    pub space_order: usize,
    pub time_nodes: Option<usize>,
    pub grading: Grading,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub modes: usize,
    pub channels: usize,
    pub max_abs_actuator_coefficient: f64,
    pub verdict: Verdict,
    pub min_eigenvalue: f64,
    pub eigenvalues: Vec<f64>,
    pub strategic: StrategicReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesizeReport {
    pub verdict: Verdict,
    pub diagnostics: SolveDiagnostics,
    pub energy: f64,
    pub g_norm: f64,
    pub g_pairing: f64,
    /// |J(u*) - ‖g‖²_G| / ‖g‖²_G.
    pub energy_identity_gap: f64,
    pub residual: f64,
    pub minimality: MinimalityReport,
    pub target: Vec<f64>,
    pub g: Vec<f64>,
    pub adjoint_datum: Vec<f64>,
    pub final_state: Vec<f64>,
    pub free_final_state: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub channels: usize,
    pub control_energy: f64,
    pub states: Vec<SpectralState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleCheck {
    pub name: String,
    pub expected: String,
    pub observed: f64,
    pub detail: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub basis: BasisKind,
    /// Set whenever the run does not use the printed eigenfunctions.
    pub basis_note: Option<String>,
    pub cutoff: usize,
    pub alpha: f64,
    pub epsilon: Option<f64>,
    /// Order used for the subregion verdict and rank test.
    pub subregion_alpha: f64,
    pub checks: Vec<ExampleCheck>,
    pub checks_passed: usize,
    pub failing_buckets: Vec<Vec<Vec<usize>>>,
    pub j_table: Vec<ExampleCoefficients>,
    /// Every quadrature entry finite and nonzero.
    pub j_table_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Simulate(SimulateReport),
    Analyze(AnalyzeReport),
    Synthesize(SynthesizeReport),
    ReproduceExample(ExampleReport),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub task: Task,
    pub scenario: Scenario,
    pub parallel: bool,
    pub quadrature: QuadratureInfo,
    pub outcome: Outcome,
    /// Wall time; the only field that varies between identical runs.
    pub elapsed_seconds: f64,
}

/// One CSV table destined for the output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Artifact>,
}

impl RunOutput {
    /// 2 for a negative analyze verdict, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        match &self.report.outcome {
            Outcome::Analyze(a) if !a.verdict.controllable => EXIT_NEGATIVE,
            _ => EXIT_SUCCESS,
        }
    }

    pub fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.report)?)
    }

    /// Writes report.json and/or the CSV tables into `dir`.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if format.json() {
            let path = dir.join("report.json");
            std::fs::write(&path, self.report_json()?)?;
            written.push(path);
        }
        if format.csv() {
            for t in &self.tables {
                let path = dir.join(&t.file);
                std::fs::write(&path, &t.contents)?;
                written.push(path);
            }
        }
        Ok(written)
    }

    /// Human-readable summary lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        match &self.report.outcome {
            Outcome::Analyze(a) => {
                let v = &a.verdict;
                let _ = writeln!(s, "verdict: {}", if v.controllable { "CONTROLLABLE" } else { "NOT controllable" });
                let _ = writeln!(s, "min eigenvalue {:.6e}, max eigenvalue {:.6e}, relative margin {:.3e}", v.margin, v.max_eigenvalue, v.relative_margin);
                let _ = writeln!(s, "strategic rank test: {}", if a.strategic.strategic { "pass" } else { "fail" });
            }
            Outcome::Synthesize(r) => {
                let _ = writeln!(s, "J(u*) = {:.10e}, ||g||_G^2 = {:.10e}, residual {:.3e}", r.energy, r.g_norm, r.residual);
                let _ = writeln!(
                    s,
                    "minimality: {}/{} trials, pseudo-inverse gap {:.3e} ({})",
                    r.minimality.passed,
                    r.minimality.trials,
                    r.minimality.relative_energy_gap,
                    if r.minimality.pass { "pass" } else { "fail" }
                );
                if r.diagnostics.ill_posed {
                    let _ = writeln!(s, "warning: {} directions truncated, target may be unreachable", r.diagnostics.truncated);
                }
            }
            Outcome::Simulate(r) => {
                for st in &r.states {
                    let _ = writeln!(s, "t = {:.6}: |z|_2 = {:.6e}", st.t, st.coeffs.norm());
                }
            }
            Outcome::ReproduceExample(r) => {
                if let Some(note) = &r.basis_note {
                    let _ = writeln!(s, "note: {note}");
                }
                for c in &r.checks {
                    let _ = writeln!(s, "[{}] {}: observed {:.3e} (expected {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.observed, c.expected);
                }
                let _ = writeln!(s, "structural checks passed: {}/{}", r.checks_passed, r.checks.len());
                let _ = writeln!(s, "J table quadrature nonzero: {}", if r.j_table_pass { "pass" } else { "fail" });
            }
        }
        s
    }
}

struct Setup {
    basis: SpectralBasis,
    region: Region,
    plant: Plant,
}

fn setup(s: &Scenario) -> Result<Setup> {
    let domain = s.domain_rect()?;
    let basis = dirichlet_eigenpairs(&domain, s.cutoff, s.basis)?;
    let region = s.region();
    let actuators = s.actuator_set(&basis);
    let plant = Plant::new(basis.clone(), &actuators, s.alpha, s.window)?;
    Ok(Setup { basis, region, plant })
}

/// Executes the scenario's task.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let start = Instant::now();
    log::info!("running {:?} with K={}, alpha={}", scenario.task, scenario.cutoff, scenario.alpha);
    let (outcome, tables, quadrature) = match scenario.task {
        Task::Analyze => analyze(scenario)?,
        Task::Synthesize => synthesize(scenario)?,
        Task::Simulate => simulate(scenario)?,
        Task::ReproduceExample => {
            let (r, tables, q) = reproduce_example_with_tables(scenario)?;
            (Outcome::ReproduceExample(r), tables, q)
        }
    };
    let report = RunReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        task: scenario.task,
        scenario: scenario.clone(),
        parallel: crate::par::parallel_enabled(),
        quadrature,
        outcome,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { report, tables })
}

type TaskResult<T> = Result<(T, Vec<Artifact>, QuadratureInfo)>;

fn analyze(s: &Scenario) -> TaskResult<Outcome> {
    let Setup { basis, region, plant } = setup(s)?;
    let map = InputMap::new(plant, s.epsilon, Grading::default())?;
    let gram = assemble_gramian(&map, &region)?;
    let verdict = approx_controllability_verdict(&gram, s.thresholds.positive_definite);
    let strategic = strategic_test_with(&basis, &map.plant.d, &region, s.thresholds.rank);
    let mut spectrum = String::from("index,eigenvalue\n");
    for (i, e) in gram.spectrum.eigenvalues.iter().enumerate() {
        let _ = writeln!(spectrum, "{i},{e:.17e}");
    }
    let tables = vec![
        Artifact { file: "spectrum.csv".into(), contents: spectrum },
        Artifact { file: "strategic.csv".into(), contents: strategic_csv(&strategic) },
    ];
    let quadrature = QuadratureInfo { space_order: gram.space_quadrature_order, time_nodes: Some(gram.time_nodes), grading: Grading::default() };
    let report = AnalyzeReport {
        modes: basis.len(),
        channels: map.plant.channels(),
        max_abs_actuator_coefficient: map.plant.d.abs().max(),
        min_eigenvalue: verdict.margin,
        eigenvalues: gram.spectrum.eigenvalues.clone(),
        verdict,
        strategic,
    };
    Ok((Outcome::Analyze(report), tables, quadrature))
}

fn strategic_csv(r: &StrategicReport) -> String {
    let mut out = String::from("bucket,lambda,multiplicity,modes,ranks,pass\n");
    for (i, b) in r.buckets.iter().enumerate() {
        let modes: Vec<String> = b.modes.iter().map(|m| m.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(":")).collect();
        let ranks: Vec<String> = b.ranks.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(out, "{i},{:.17e},{},{},{},{}", b.lambda, b.multiplicity, modes.join(" "), ranks.join(" "), b.pass);
    }
    out
}

/// Target coefficients c with f = p_ω∇Σ c_k φ_k.
pub fn target_coefficients(s: &Scenario, basis: &SpectralBasis, region: &Region) -> DVector<f64> {
    let n = basis.len();
    match &s.target {
        TargetSpec::Zero => DVector::zeros(n),
        TargetSpec::Coefficients { values } => DVector::from_vec(values.clone()),
        TargetSpec::Random { seed } => random_coefficients(n, *seed),
        TargetSpec::Field { name } => {
            let gamma = gradient_gram(basis, region).gamma;
            let bbox = bounding_box(region, basis.dim());
            let rhs = adjoint_gradient_coefficients(|x| named_gradient(*name, &bbox, x), basis, region);
            pseudo_solve(&gamma, &rhs)
        }
    }
}

fn bounding_box(region: &Region, dim: usize) -> Vec<[f64; 2]> {
    (0..dim)
        .map(|d| {
            let lo = region.boxes.iter().map(|b| b.bounds[d][0]).fold(f64::INFINITY, f64::min);
            let hi = region.boxes.iter().map(|b| b.bounds[d][1]).fold(f64::NEG_INFINITY, f64::max);
            [lo, hi]
        })
        .collect()
}

/// ∇F for the named analytic fields.
pub fn named_gradient(name: NamedField, bbox: &[[f64; 2]], x: &Point) -> Point {
    let dim = bbox.len();
    let mut g = [0.0; 2];
    match name {
        NamedField::Bump => {
            let c: Vec<f64> = bbox.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
            let r2: f64 = (0..dim).map(|d| (x[d] - c[d]).powi(2)).sum();
            let f = (-r2 / 0.1).exp();
            for d in 0..dim {
                g[d] = -2.0 * (x[d] - c[d]) / 0.1 * f;
            }
        }
        NamedField::ProductSine => {
            let arg = |d: usize| std::f64::consts::PI * (x[d] - bbox[d][0]) / (bbox[d][1] - bbox[d][0]);
            for d in 0..dim {
                let mut v = std::f64::consts::PI / (bbox[d][1] - bbox[d][0]) * arg(d).cos();
                for e in (0..dim).filter(|&e| e != d) {
                    v *= arg(e).sin();
                }
                g[d] = v;
            }
        }
    }
    g
}

fn synthesize(s: &Scenario) -> TaskResult<Outcome> {
    let Setup { basis, region, plant } = setup(s)?;
    let n = basis.len();
    let map = InputMap::new(plant, s.epsilon, Grading::default())?;
    let gram = assemble_gramian(&map, &region)?;
    let verdict = approx_controllability_verdict(&gram, s.thresholds.positive_definite);
    if !verdict.controllable {
        log::warn!("gramian margin {:.3e} is below threshold; solving with the pseudo-inverse", verdict.margin);
    }
    let target = target_coefficients(s, &basis, &region);
    let y0 = s.initial_state.clone().map(DVector::from_vec).unwrap_or_else(|| DVector::zeros(n));
    let problem = HumProblem::new(map.clone(), &region, Observation::Gradient, target.clone(), y0)?;
    let sol = solve_hum(&problem)?;
    let gn = g_norm(&map, &problem.space, &sol.g)?;
    let pairing = g_pairing(&map, &problem.space, &sol.g);
    let minimality = verify_minimality(&problem, &sol, s.thresholds.minimality_trials, s.thresholds.seed)?;
    let b = s.window.b;
    let final_state = SpectralState::new(&basis, b, sol.final_state.clone())?;
    let tables = vec![
        Artifact { file: "control.csv".into(), contents: sol.control.to_csv() },
        Artifact { file: "final_state.csv".into(), contents: final_state.to_csv() },
        Artifact {
            file: "gradient_field.csv".into(),
            contents: gradient_field_csv(&basis, &region, &sol.final_state, &target, s.simulate.per_axis),
        },
    ];
    let report = SynthesizeReport {
        verdict,
        diagnostics: sol.diagnostics.clone(),
        energy: sol.energy,
        g_norm: gn,
        g_pairing: pairing,
        energy_identity_gap: if gn > 0.0 { (sol.energy - gn).abs() / gn } else { sol.energy },
        residual: sol.residual,
        minimality,
        target: target.iter().copied().collect(),
        g: sol.g.iter().copied().collect(),
        adjoint_datum: sol.adjoint_datum.iter().copied().collect(),
        final_state: sol.final_state.iter().copied().collect(),
        free_final_state: sol.free_final_state.iter().copied().collect(),
    };
    let quadrature = QuadratureInfo { space_order: basis.quadrature_order, time_nodes: Some(map.grid.len()), grading: Grading::default() };
    Ok((Outcome::Synthesize(report), tables, quadrature))
}

/// Rows `x_1[,x_2],reached_1[,reached_2],target_1[,target_2]` on a grid of each box of ω.
pub fn gradient_field_csv(basis: &SpectralBasis, region: &Region, reached: &DVector<f64>, target: &DVector<f64>, per_axis: usize) -> String {
    let dim = basis.dim();
    let per_axis = per_axis.max(2);
    let mut out = String::from(if dim == 1 { "x_1,reached_1,target_1\n" } else { "x_1,x_2,reached_1,reached_2,target_1,target_2\n" });
    for r in &region.boxes {
        let axis = |d: usize| -> Vec<f64> {
            let [lo, hi] = r.bounds[d];
            (0..per_axis).map(|j| lo + (hi - lo) * j as f64 / (per_axis - 1) as f64).collect()
        };
        let xs = axis(0);
        let ys = if dim == 1 { vec![0.0] } else { axis(1) };
        for &x in &xs {
            for &y in &ys {
                let p = [x, y];
                let g = basis.evaluate_gradient(reached, &p);
                let f = basis.evaluate_gradient(target, &p);
                if dim == 1 {
                    let _ = writeln!(out, "{x:.12e},{:.17e},{:.17e}", g[0], f[0]);
                } else {
                    let _ = writeln!(out, "{x:.12e},{y:.12e},{:.17e},{:.17e},{:.17e},{:.17e}", g[0], g[1], f[0], f[1]);
                }
            }
        }
    }
    out
}

fn simulate(s: &Scenario) -> TaskResult<Outcome> {
    let Setup { basis, plant, .. } = setup(s)?;
    let m = plant.channels();
    let grading = Grading::default();
    let grid = ControlGrid::smooth(s.window, LogClock::FromInitial, grading)?;
    let u = match &s.control {
        ControlSpec::Zero => ControlSignal::zeros(m, grid),
        ControlSpec::Constant { values } => ControlSignal::from_fn(grid, m, |i, _| values[i])?,
    };
    let times = if s.simulate.times.is_empty() { vec![s.window.b] } else { s.simulate.times.clone() };
    let y0 = s.initial_state.clone().map(DVector::from_vec);
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        let mut z = forced_solution(&plant, &u, t)?.coeffs;
        if let Some(y0) = &y0 {
            z += free_solution(&plant, y0, t)?.coeffs;
        }
        states.push(SpectralState::new(&basis, t, z)?);
    }
    let mut table = String::from("t,mode,index,lambda,coefficient\n");
    for st in &states {
        for line in st.to_csv().lines().skip(1) {
            let _ = writeln!(table, "{:.17e},{line}", st.t);
        }
    }
    let last = states.last().expect("at least one output time");
    let tables = vec![
        Artifact { file: "states.csv".into(), contents: table },
        Artifact { file: "field.csv".into(), contents: last.field_csv(&basis, s.simulate.per_axis) },
        Artifact { file: "control.csv".into(), contents: u.to_csv() },
    ];
    let report = SimulateReport { channels: m, control_energy: u.energy(), states };
    let quadrature = QuadratureInfo { space_order: basis.quadrature_order, time_nodes: Some(u.grid.len()), grading };
    Ok((Outcome::Simulate(report), tables, quadrature))
}

/// The four structural checks of the square worked example and its J_klpq
/// table. Failed checks are rows of the report, never errors.
pub fn reproduce_example(s: &Scenario) -> Result<ExampleReport> {
    Ok(reproduce_example_with_tables(s)?.0)
}

fn reproduce_example_with_tables(s: &Scenario) -> TaskResult<ExampleReport> {
    let domain = s.domain_rect()?;
    if domain.dim() != 2 || !domain.bounds.iter().all(|b| b[0] == -1.0 && b[1] == 1.0) {
        return Err(Error::Config("reproduce-example needs domain [-1, 1]^2".into()));
    }
    if !matches!(s.actuators, ActuatorSpec::RegionZone) {
        log::warn!("reproduce-example always uses zone actuators; the actuator section is ignored");
    }
    let basis = dirichlet_eigenpairs(&domain, s.cutoff, s.basis)?;
    let basis_note = (s.basis != BasisKind::PaperBasis)
        .then(|| format!("basis differs from paper: {:?} eigenfunctions instead of sin(k pi x1) sin(l pi x2)", s.basis));
    let whole = Region::whole(&domain);
    let omega = s.region();
    let order = basis.quadrature_order.max(40);
    let mut checks = Vec::new();

    // 1. M_kl on P = Ω.
    let whole_zone = ActuatorSet::new(vec![Actuator::zone(whole.clone())]);
    let whole_plant = Plant::new(basis.clone(), &whole_zone, s.alpha, s.window)?;
    let mut m_max: f64 = 0.0;
    for k in 1..=s.cutoff {
        for l in 1..=s.cutoff {
            m_max = m_max.max(example_m_kl(&whole, k, l, order).abs());
        }
    }
    let d_max = whole_plant.d.abs().max();
    checks.push(ExampleCheck {
        name: "actuator coefficients vanish for P = Omega".into(),
        expected: format!("<= {EXAMPLE_ZERO_TOLERANCE:e}"),
        observed: m_max.max(d_max),
        detail: format!("max |M_kl| = {m_max:.3e} (printed family), max |d_k| = {d_max:.3e} (basis in use), k,l <= {}", s.cutoff),
        pass: m_max.max(d_max) <= EXAMPLE_ZERO_TOLERANCE,
    });

    // 2. Whole-domain verdict.
    let whole_map = InputMap::new(whole_plant, s.epsilon, Grading::default())?;
    let whole_gram = assemble_gramian(&whole_map, &whole)?;
    let whole_verdict = approx_controllability_verdict(&whole_gram, s.thresholds.positive_definite);
    checks.push(ExampleCheck {
        name: "whole-domain actuator is NOT controllable".into(),
        expected: format!("max eigenvalue <= {EXAMPLE_BLIND_TOLERANCE:e}, verdict NOT"),
        observed: whole_verdict.max_eigenvalue,
        detail: format!("alpha = {}, epsilon = {:?}", s.alpha, s.epsilon),
        pass: whole_verdict.max_eigenvalue <= EXAMPLE_BLIND_TOLERANCE && !whole_verdict.controllable,
    });

    // 3. Zone actuator over ω.
    let (sub_alpha, sub_eps) = if s.alpha > 0.5 { (s.alpha, s.epsilon) } else { (EXAMPLE_SURROGATE_ALPHA, None) };
    let zone = ActuatorSet::new(vec![Actuator::zone(omega.clone())]);
    let sub_plant = Plant::new(basis.clone(), &zone, sub_alpha, s.window)?;
    let sub_map = InputMap::new(sub_plant, sub_eps, Grading::default())?;
    let sub_gram = assemble_gramian(&sub_map, &omega)?;
    let sub_verdict = approx_controllability_verdict(&sub_gram, s.thresholds.positive_definite);
    checks.push(ExampleCheck {
        name: "zone actuator on omega is CONTROLLABLE".into(),
        expected: format!("relative margin > {EXAMPLE_MARGIN:e}"),
        observed: sub_verdict.relative_margin,
        detail: format!(
            "alpha = {sub_alpha}, min eigenvalue {:.3e}, max eigenvalue {:.3e}",
            sub_verdict.margin, sub_verdict.max_eigenvalue
        ),
        pass: sub_verdict.controllable && sub_verdict.relative_margin > EXAMPLE_MARGIN,
    });

    // 4. Rank conditions.
    let strategic = strategic_test_with(&basis, &sub_map.plant.d, &omega, s.thresholds.rank);
    let failing: Vec<Vec<Vec<usize>>> = strategic.buckets.iter().filter(|b| !b.pass).map(|b| b.modes.clone()).collect();
    checks.push(ExampleCheck {
        name: "rank D_k^l = r_k for every eigenvalue".into(),
        expected: "0 failing eigenvalues".into(),
        observed: failing.len() as f64,
        detail: format!(
            "{} of {} eigenvalues fail; max multiplicity {} with {} actuator(s)",
            failing.len(),
            strategic.buckets.len(),
            strategic.max_multiplicity,
            strategic.actuators
        ),
        pass: strategic.strategic,
    });

    let mut j_table = Vec::new();
    for k in [1, 3, 5] {
        for l in [1, 3, 5] {
            for p in [2, 4] {
                for q in [2, 4] {
                    j_table.push(example_coefficients(&omega, &omega, k, l, p, q, order));
                }
            }
        }
    }
    let j_table_pass = j_table.iter().all(|r| r.j_quadrature.is_finite() && r.j_quadrature.abs() > 1e-12);

    let mut checks_csv = String::from("check,expected,observed,pass,detail\n");
    for c in &checks {
        let _ = writeln!(checks_csv, "\"{}\",\"{}\",{:.17e},{},\"{}\"", c.name, c.expected, c.observed, c.pass, c.detail);
    }
    let mut j_csv = String::from("k,l,p,q,m_kl,j_quadrature,j_closed_form,relative_discrepancy,parity_regime\n");
    for r in &j_table {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
        let _ = writeln!(
            j_csv,
            "{},{},{},{},{:.17e},{:.17e},{},{},{}",
            r.k,
            r.l,
            r.p,
            r.q,
            r.m_kl,
            r.j_quadrature,
            opt(r.j_closed_form),
            opt(r.relative_discrepancy),
            r.in_parity_regime
        );
    }
    let report = ExampleReport {
        basis: s.basis,
        basis_note,
        cutoff: s.cutoff,
        alpha: s.alpha,
        epsilon: s.epsilon,
        subregion_alpha: sub_alpha,
        checks_passed: checks.iter().filter(|c| c.pass).count(),
        checks,
        failing_buckets: failing,
        j_table,
        j_table_pass,
    };
    let tables = vec![
        Artifact { file: "checks.csv".into(), contents: checks_csv },
        Artifact { file: "j_table.csv".into(), contents: j_csv },
    ];
    let quadrature = QuadratureInfo { space_order: order, time_nodes: Some(sub_gram.time_nodes), grading: Grading::default() };
    Ok((report, tables, quadrature))
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub version: String,
    pub parallel: bool,
    pub checks: Vec<SelfCheck>,
    pub pass: bool,
}

impl SelftestReport {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_SUCCESS
        } else {
            EXIT_ERROR
        }
    }
}

/// Fast end-to-end checks against frozen reference values.
pub fn selftest() -> Result<SelftestReport> {
    let mut checks = Vec::new();
    let mut add = |name: &str, value: f64, expected: f64, tolerance: f64| {
        let pass = value.is_finite() && (value - expected).abs() <= tolerance * expected.abs().max(1.0);
        checks.push(SelfCheck { name: name.into(), value, expected, tolerance, pass });
    };
    add("E_{1,1}(-1) = 1/e", ml(1.0, 1.0, -1.0)?, (-1.0f64).exp(), 1e-14);
    add("E_{1/2,1}(-1) = e erfc(1)", ml(0.5, 1.0, -1.0)?, 0.42758357615580700442, 1e-13);
    // 50-digit references for α = 0.7, λ = π², [a, b] = [2, 4].
    let window = LogTimeWindow::new(2.0, 4.0)?;
    let basis = dirichlet_eigenpairs(&Rect::unit(1), 1, BasisKind::Canonical)?;
    let scalar = |alpha: f64| Plant::from_coefficients(basis.clone(), DMatrix::from_element(1, 1, 1.0), alpha, window);
    let map = InputMap::new(scalar(0.7)?, None, Grading::default())?;
    let one = ControlSignal::from_fn(map.grid.clone(), 1, |_, _| 1.0)?;
    add("forced response to u = 1", map.apply(&one)?.coeffs[0], 0.096409614750777755444, 1e-9);
    add("scalar gramian", map.state_gramian()[(0, 0)], 0.050813008194303338006, 1e-9);
    let lambda = std::f64::consts::PI.powi(2);
    let classical = InputMap::new(scalar(1.0)?, None, Grading::default())?;
    let l = window.log_length();
    add(
        "classical-order gramian",
        classical.state_gramian()[(0, 0)],
        (1.0 - ((1.0 - 2.0 * lambda) * l).exp()) / (window.b * (2.0 * lambda - 1.0)),
        1e-10,
    );
    let omega = Region::new(vec![Rect::new(vec![[0.2, 0.9]])?]);
    let problem = HumProblem::new(map.clone(), &omega, Observation::Gradient, DVector::from_element(1, 0.5), DVector::zeros(1))?;
    let sol = solve_hum(&problem)?;
    add("HUM residual", sol.residual, 0.0, 1e-10);
    add("HUM energy", sol.energy, 0.25 / 0.050813008194303338006, 1e-8);
    let pass = checks.iter().all(|c| c.pass);
    Ok(SelftestReport { version: env!("CARGO_PKG_VERSION").into(), parallel: crate::par::parallel_enabled(), checks, pass })
}
