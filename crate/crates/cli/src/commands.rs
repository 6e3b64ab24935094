use std::fs;
use std::path::{Path, PathBuf};

use dkpp_core::duhamel::{apply_map, time_derivative};
use dkpp_core::kernel::KernelSummary;
use dkpp_core::nonlinearity::{GrowthReport, LipschitzWitness, NonlinearitySummary};
use dkpp_core::oracle::linear_mode_field;
use dkpp_core::picard::{
    certify, check_nontriviality, contraction_ratio, l2_spacetime_norm, march_global, max_horizon, solve,
    w122_norm, FieldNorms, Horizon, SeamRecord,
};
use dkpp_core::random_fields::FieldSampler;
use dkpp_core::spectral::forward_transform;
use dkpp_core::{ContractionCertificate, Error, Nontriviality, Solution, SolveConfig, SolveReport, TimeWindow};
use serde::Serialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::snapshot::Snapshot;
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INADMISSIBLE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Shortest round-trip decimal, the same text serde_json writes.
fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialize")
    } else {
        String::new()
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn run_dir(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set output_dir".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzCheck {
    pub declared: f64,
    pub estimate: f64,
    pub witness: LipschitzWitness,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub kernel: KernelSummary,
    pub nonlinearity: NonlinearitySummary,
    pub lipschitz: LipschitzCheck,
    pub growth: GrowthReport,
}

/// Kernel and rate-function checks; failures are validation errors.
fn check_assumptions(cfg: &RunConfig, problem: &dkpp_core::ProblemSpec) -> Result<AssumptionReport, CliError> {
    let f = problem.nonlinearity();
    let samples = cfg.verification.samples;
    let witness = f
        .sweep_lipschitz(cfg.u_range(), samples)
        .map_err(|e| CliError::Validation(format!("nonlinearity: {e}")))?;
    let declared = f.lipschitz_constant();
    let passed = f.estimate_lipschitz(cfg.u_range(), samples).is_ok();
    if !passed {
        return Err(CliError::Validation(format!(
            "nonlinearity: Lipschitz bound l = {declared} violated, |F({}, {}) - F({}, {})| / |Δu| = {}",
            witness.u1, witness.x, witness.u2, witness.x, witness.quotient
        )));
    }
    let growth = f.verify_growth(cfg.u_range(), samples);
    if !growth.passed {
        let w = growth.witness.as_ref();
        return Err(CliError::Validation(format!(
            "nonlinearity: growth bound |F| <= k|u| + h violated{}",
            w.map(|w| format!(" at u = {}, x = {}: |F| = {} > {}", w.u, w.x, w.value, w.bound)).unwrap_or_default()
        )));
    }
    Ok(AssumptionReport {
        kernel: problem.kernel().summary(),
        nonlinearity: f.summary(),
        lipschitz: LipschitzCheck { declared, estimate: witness.quotient, witness, samples, passed },
        growth,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub certificate: ContractionCertificate,
    pub max_horizon: Horizon,
    pub assumptions: AssumptionReport,
    pub nontriviality: Nontriviality,
    pub warnings: Vec<String>,
}

/// Prints the certificate document and writes `certificate.json` when `out` is set.
pub fn cmd_certify(cfg: &RunConfig, out: Option<&Path>) -> Result<i32, CliError> {
    let r = cfg.resolve()?;
    let assumptions = check_assumptions(cfg, &r.problem)?;
    let certificate = certify(&r.problem, &r.window);
    let horizon = max_horizon(&r.problem);
    let doc = CertifyDocument {
        schema_version: SCHEMA_VERSION,
        command: "certify",
        certificate,
        max_horizon: horizon.clone(),
        assumptions,
        nontriviality: check_nontriviality(&r.problem).map_err(|e| CliError::Validation(e.to_string()))?,
        warnings: r.problem.boundary_warnings(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("certificate serializes");
    println!("{text}");
    if let Some(dir) = out.or(cfg.output_dir.as_deref()) {
        prepare_dir(dir)?;
        write_json(&dir.join("certificate.json"), &doc)?;
    }
    if certificate.admissible {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "inadmissible: C = {} >= 1 for T = {}; T_max = {}{}",
            certificate.constant,
            certificate.horizon,
            horizon.t_max,
            horizon.diagnostic.map(|d| format!(" ({d})")).unwrap_or_default()
        );
        Ok(EXIT_INADMISSIBLE)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub method: &'static str,
    pub relative_l2_error: f64,
    pub relative_derivative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionCheck {
    pub pairs: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub duhamel_residual: f64,
    pub quadrature_error_bound: f64,
    pub residual_within_bound: bool,
    pub ratios_within_bound: bool,
    /// `W^{1,2,2}` change from one more application of the map.
    pub stationarity_step: f64,
    pub contraction: ContractionCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub assumptions: AssumptionReport,
    pub warnings: Vec<String>,
    pub solve: SolveReport,
    pub oracle: Option<OracleComparison>,
    pub verification: Option<Verification>,
}

fn oracle_comparison(problem: &dkpp_core::ProblemSpec, sol: &Solution) -> Result<Option<OracleComparison>, Error> {
    if problem.nonlinearity().linear_coefficient().is_none() {
        return Ok(None);
    }
    let grid = problem.grid();
    let w = &sol.window;
    let (exact, exact_dt) = linear_mode_field(problem, w)?;
    let rel = |a: &dkpp_core::SpaceTimeField, b: &dkpp_core::SpaceTimeField| -> Result<f64, Error> {
        let denom = l2_spacetime_norm(b, grid, w)?;
        let num = l2_spacetime_norm(&a.sub(b)?, grid, w)?;
        Ok(if denom > 0.0 { num / denom } else { num })
    };
    Ok(Some(OracleComparison {
        method: "linear_mode_solution",
        relative_l2_error: rel(&sol.field, &exact)?,
        relative_derivative_error: rel(&sol.time_derivative, &exact_dt)?,
    }))
}

/// Absolute allowance for floating-point noise in residual checks.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

fn verification(
    problem: &dkpp_core::ProblemSpec,
    sol: &Solution,
    pairs: usize,
    seed: u64,
) -> Result<Verification, Error> {
    let grid = problem.grid();
    let w = &sol.window;
    let r = &sol.report;
    let again = apply_map(problem, w, &sol.field)?;
    let d_again = time_derivative(problem, w, &again, &sol.field)?;
    let stationarity_step = w122_norm(&again.sub(&sol.field)?, &d_again.sub(&sol.time_derivative)?, grid, w)?;
    let mut sampler = FieldSampler::new(seed, 1.0);
    let mut max_ratio = 0.0f64;
    for _ in 0..pairs {
        let (v1, d1) = sampler.next_pair(grid, w);
        let (v2, d2) = sampler.next_pair(grid, w);
        max_ratio = max_ratio.max(contraction_ratio(problem, w, (&v1, &d1), (&v2, &d2))?);
    }
    Ok(Verification {
        duhamel_residual: r.duhamel_residual,
        quadrature_error_bound: r.quadrature_error_bound,
        residual_within_bound: r.duhamel_residual <= r.quadrature_error_bound + ROUNDOFF_FLOOR,
        ratios_within_bound: r.ratios.iter().flatten().all(|&x| x <= r.ratio_bound),
        stationarity_step,
        contraction: ContractionCheck { pairs, max_ratio, bound: r.ratio_bound, passed: max_ratio <= r.ratio_bound },
    })
}

fn residual_rows(report: &SolveReport) -> Vec<Vec<String>> {
    report
        .residuals
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let ratio = if i == 0 { None } else { report.ratios[i - 1] };
            vec![(i + 1).to_string(), num(*r), ratio.map(num).unwrap_or_default()]
        })
        .collect()
}

fn inadmissible_message(c: &ContractionCertificate, h: &Horizon) -> String {
    format!(
        "contraction constant C = {} >= 1 for T = {} (T_max = {}{}); pass --allow-uncertified to iterate anyway",
        c.constant,
        c.horizon,
        h.t_max,
        h.diagnostic.as_deref().map(|d| format!(": {d}")).unwrap_or_default()
    )
}

/// Solves one window and writes `field.dkpp`, `report.json` and `residuals.csv`.
pub fn cmd_solve(
    cfg: &RunConfig,
    out: Option<&Path>,
    verify: bool,
    allow_uncertified: bool,
    seed: Option<u64>,
) -> Result<i32, CliError> {
    let dir = run_dir(cfg, out)?;
    let r = cfg.resolve()?;
    let assumptions = check_assumptions(cfg, &r.problem)?;
    let certificate = certify(&r.problem, &r.window);
    if !certificate.admissible && !allow_uncertified {
        return Err(CliError::Inadmissible(inadmissible_message(&certificate, &max_horizon(&r.problem))));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let solve_cfg = cfg.solve_config(allow_uncertified, seed);
    let (sol, converged) = match solve(&r.problem, &r.window, &solve_cfg) {
        Ok(s) => (s, true),
        Err(Error::NonConvergence { partial, .. }) => (*partial, false),
        Err(e) => return Err(CliError::Validation(format!("solve: {e}"))),
    };
    let core = |e: Error| CliError::Validation(format!("verification: {e}"));
    let oracle = oracle_comparison(&r.problem, &sol).map_err(core)?;
    let verification = if verify {
        Some(verification(&r.problem, &sol, cfg.verification.pairs, seed).map_err(core)?)
    } else {
        None
    };
    prepare_dir(&dir)?;
    Snapshot::new(&r.grid, &sol.window, &sol.field).write(&dir.join("field.dkpp"))?;
    write_rows(&dir.join("residuals.csv"), &["iteration", "residual", "ratio"], residual_rows(&sol.report))?;
    let doc = SolveDocument {
        schema_version: SCHEMA_VERSION,
        command: "solve",
        seed,
        config: cfg.clone(),
        assumptions,
        warnings: r.problem.boundary_warnings(),
        solve: sol.report.clone(),
        oracle,
        verification,
    };
    write_json(&dir.join("report.json"), &doc)?;
    let rep = &sol.report;
    println!(
        "{}: {} iterations, last residual {:.3e}, C = {:.6}, duhamel residual {:.3e} (bound {:.3e})",
        if converged { "converged" } else { "not converged" },
        rep.iterations,
        rep.residuals.last().copied().unwrap_or(f64::NAN),
        rep.certificate.constant,
        rep.duhamel_residual,
        rep.quadrature_error_bound
    );
    if converged {
        Ok(EXIT_OK)
    } else {
        Err(CliError::NonConvergence(format!(
            "Picard iteration stopped without convergence: {} (artifacts written to {})",
            rep.stop_reason,
            dir.display()
        )))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowRecord {
    pub index: usize,
    pub t_start: f64,
    pub horizon: f64,
    pub steps: usize,
    pub iterations: usize,
    pub converged: bool,
    pub last_residual: f64,
    pub max_ratio: Option<f64>,
    pub duhamel_residual: f64,
    pub quadrature_error_bound: f64,
    pub norms: FieldNorms,
    pub file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarchDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: RunConfig,
    pub total_time: f64,
    pub step: f64,
    pub max_horizon: Horizon,
    pub windows: Vec<WindowRecord>,
    pub seams: Vec<SeamRecord>,
    pub seam_tolerance: f64,
    pub seams_within_tolerance: bool,
}

/// The window actually marched: the configured one, or a shorter one with the
/// same `dt` when `T` exceeds `0.9·T_max`.
pub fn march_window(window: &TimeWindow, t_max: f64) -> Result<TimeWindow, Error> {
    let cap = 0.9 * t_max;
    if window.horizon() <= cap {
        return Ok(*window);
    }
    let steps = (cap / window.dt()).floor().max(1.0) as usize;
    TimeWindow::new(cap, steps)
}

/// Marches to `total_time` and writes `window_NNN.dkpp` files plus `march.json`.
pub fn cmd_march(
    cfg: &RunConfig,
    out: Option<&Path>,
    total_time: Option<f64>,
    seed: Option<u64>,
) -> Result<i32, CliError> {
    let dir = run_dir(cfg, out)?;
    let r = cfg.resolve()?;
    check_assumptions(cfg, &r.problem)?;
    let horizon = max_horizon(&r.problem);
    if horizon.t_max == 0.0 {
        return Err(CliError::Inadmissible(format!(
            "no admissible window: T_max = 0{}",
            horizon.diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
        )));
    }
    let total = total_time.unwrap_or(cfg.window.horizon);
    let window = march_window(&r.window, horizon.t_max).map_err(|e| CliError::Validation(e.to_string()))?;
    if !(total.is_finite() && total >= window.horizon()) {
        return Err(CliError::Validation(format!(
            "--total-time {total} must be at least the window length {}",
            window.horizon()
        )));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let solve_cfg: SolveConfig = cfg.solve_config(false, seed);
    let march = match march_global(&r.problem, &window, total, &solve_cfg) {
        Ok(m) => m,
        Err(Error::March { index, source }) => {
            return Err(match *source {
                Error::NonConvergence { .. } => {
                    CliError::NonConvergence(format!("window {index} did not converge: {source}"))
                }
                Error::Refused(m) => CliError::Inadmissible(format!("window {index}: {m}")),
                other => CliError::Validation(format!("window {index}: {other}")),
            })
        }
        Err(Error::Refused(m)) => return Err(CliError::Inadmissible(m)),
        Err(e) => return Err(CliError::Validation(e.to_string())),
    };
    prepare_dir(&dir)?;
    let mut windows = Vec::new();
    let mut t_start = 0.0;
    for (index, sol) in march.windows.iter().enumerate() {
        let file = format!("window_{index:03}.dkpp");
        Snapshot::new(&r.grid, &sol.window, &sol.field).write(&dir.join(&file))?;
        let rep = &sol.report;
        windows.push(WindowRecord {
            index,
            t_start,
            horizon: sol.window.horizon(),
            steps: sol.window.steps(),
            iterations: rep.iterations,
            converged: rep.converged,
            last_residual: *rep.residuals.last().expect("at least one residual"),
            max_ratio: rep.max_ratio,
            duhamel_residual: rep.duhamel_residual,
            quadrature_error_bound: rep.quadrature_error_bound,
            norms: rep.norms,
            file,
        });
        t_start += sol.window.horizon();
    }
    let seam_tolerance = 10.0 * cfg.solver.tolerance;
    let doc = MarchDocument {
        schema_version: SCHEMA_VERSION,
        command: "march",
        config: cfg.clone(),
        total_time: total,
        step: march.step,
        max_horizon: march.horizon.clone(),
        seams_within_tolerance: march.seams.iter().all(|s| s.value_jump <= seam_tolerance),
        seams: march.seams,
        windows,
        seam_tolerance,
    };
    write_json(&dir.join("march.json"), &doc)?;
    println!(
        "marched {} windows of length {:.6} to t = {}; max seam jump {:.3e}",
        doc.windows.len(),
        doc.step,
        total,
        doc.seams.iter().map(|s| s.value_jump).fold(0.0, f64::max)
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyMode {
    Dt,
    N,
    Picard,
    Contraction,
}

impl std::str::FromStr for StudyMode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dt" => Ok(StudyMode::Dt),
            "N" | "n" => Ok(StudyMode::N),
            "picard" => Ok(StudyMode::Picard),
            "contraction" => Ok(StudyMode::Contraction),
            other => Err(CliError::Validation(format!(
                "unknown study mode '{other}' (expected dt, N, picard or contraction)"
            ))),
        }
    }
}

impl StudyMode {
    pub fn name(&self) -> &'static str {
        match self {
            StudyMode::Dt => "dt",
            StudyMode::N => "N",
            StudyMode::Picard => "picard",
            StudyMode::Contraction => "contraction",
        }
    }
}

/// Least-squares slope of `y` against `x`.
fn fitted_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub schema_version: u32,
    pub mode: &'static str,
    pub table: String,
    /// Fitted quadrature order (dt), geometric decay rate (picard), max ratio (contraction).
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub passed: Option<bool>,
}

const DT_LADDER: usize = 4;

/// Writes `study_<mode>.csv` and `study_<mode>.json` into the run directory.
pub fn cmd_study(cfg: &RunConfig, out: Option<&Path>, mode: StudyMode, seed: Option<u64>) -> Result<i32, CliError> {
    let dir = run_dir(cfg, out)?;
    let r = cfg.resolve()?;
    check_assumptions(cfg, &r.problem)?;
    let certificate = certify(&r.problem, &r.window);
    if !certificate.admissible {
        return Err(CliError::Inadmissible(inadmissible_message(&certificate, &max_horizon(&r.problem))));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let core = |e: Error| CliError::Validation(format!("study: {e}"));
    let bound = certificate.constant + cfg.solver.slack;
    prepare_dir(&dir)?;
    let table = format!("study_{}.csv", mode.name());
    let path = dir.join(&table);
    let (value, bound, passed) = match mode {
        StudyMode::Dt => {
            let mut solve_cfg = cfg.solve_config(false, seed);
            solve_cfg.tolerance = solve_cfg.tolerance.min(1e-12);
            solve_cfg.max_iter = solve_cfg.max_iter.max(400);
            let mut finals = Vec::new();
            for j in 0..DT_LADDER {
                let w = r.window.refined(1 << j).map_err(core)?;
                let sol = solve(&r.problem, &w, &solve_cfg).map_err(core)?;
                finals.push((w, sol.field.last_level().to_vec()));
            }
            let g = &r.grid;
            let diff = |a: &[f64], b: &[f64]| {
                (g.dx() * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sqrt()
            };
            let diffs: Vec<f64> = finals.windows(2).map(|p| diff(&p[0].1, &p[1].1)).collect();
            let mut rows = Vec::new();
            let mut pts = Vec::new();
            for (j, (w, _)) in finals.iter().enumerate() {
                let d = diffs.get(j).copied();
                let order = match (diffs.get(j), diffs.get(j + 1)) {
                    (Some(a), Some(b)) if *b > 0.0 => Some((a / b).log2()),
                    _ => None,
                };
                if let Some(d) = d.filter(|d| *d > 0.0) {
                    pts.push((w.dt().ln(), d.ln()));
                }
                rows.push(vec![
                    w.steps().to_string(),
                    num(w.dt()),
                    d.map(num).unwrap_or_default(),
                    order.map(num).unwrap_or_default(),
                ]);
            }
            write_rows(&path, &["steps", "dt", "difference_to_next", "observed_order"], rows)?;
            let order = fitted_slope(&pts);
            (order, None, order.map(|o| (1.9..=2.1).contains(&o)))
        }
        StudyMode::N => {
            let sol = solve(&r.problem, &r.window, &cfg.solve_config(false, seed)).map_err(core)?;
            let spec = forward_transform(sol.field.last_level(), &r.grid).map_err(core)?;
            let c = spec.coefficients();
            let n = r.grid.n_points() as i64;
            let amp = |k: i64| r.grid.index_of(k).map(|i| c[i].norm()).unwrap_or(0.0);
            let per_k: Vec<f64> = (0..=n / 2).map(|k| amp(k).max(amp(-k))).collect();
            let peak = per_k.iter().cloned().fold(0.0, f64::max);
            let rows = per_k.iter().enumerate().map(|(k, a)| {
                vec![k.to_string(), num(r.grid.dp() * k as f64), num(*a), num(if peak > 0.0 { a / peak } else { 0.0 })]
            });
            write_rows(&path, &["wavenumber", "frequency", "amplitude", "relative"], rows)?;
            // tail: largest relative amplitude over the top quarter of modes
            let tail = per_k[(3 * per_k.len()) / 4..].iter().cloned().fold(0.0, f64::max) / peak.max(f64::MIN_POSITIVE);
            (Some(tail), None, None)
        }
        StudyMode::Picard => {
            let sol = solve(&r.problem, &r.window, &cfg.solve_config(false, seed)).map_err(core)?;
            let rep = &sol.report;
            let rows = residual_rows(rep).into_iter().map(|mut row| {
                row.push(num(bound));
                row
            });
            write_rows(&path, &["iteration", "residual", "ratio", "bound"], rows)?;
            let pts: Vec<(f64, f64)> = rep
                .residuals
                .iter()
                .enumerate()
                .filter(|(_, r)| **r > 0.0)
                .map(|(i, r)| (i as f64, r.ln()))
                .collect();
            let rate = fitted_slope(&pts).map(f64::exp);
            (rate, Some(bound), rate.map(|x| x <= bound))
        }
        StudyMode::Contraction => {
            let mut sampler = FieldSampler::new(seed, 1.0);
            let mut rows = Vec::new();
            let mut max_ratio = 0.0f64;
            for i in 0..cfg.verification.pairs {
                let (v1, d1) = sampler.next_pair(&r.grid, &r.window);
                let (v2, d2) = sampler.next_pair(&r.grid, &r.window);
                let ratio = contraction_ratio(&r.problem, &r.window, (&v1, &d1), (&v2, &d2)).map_err(core)?;
                max_ratio = max_ratio.max(ratio);
                rows.push(vec![i.to_string(), num(ratio), num(certificate.constant), num(bound)]);
            }
            write_rows(&path, &["pair", "ratio", "constant", "bound"], rows)?;
            (Some(max_ratio), Some(bound), Some(max_ratio <= bound))
        }
    };
    let summary = StudySummary { schema_version: SCHEMA_VERSION, mode: mode.name(), table, value, bound, passed };
    write_json(&dir.join(format!("study_{}.json", mode.name())), &summary)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Field,
    Norms,
    Residuals,
}

impl std::str::FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "field" => Ok(PlotKind::Field),
            "norms" => Ok(PlotKind::Norms),
            "residuals" => Ok(PlotKind::Residuals),
            other => Err(CliError::Validation(format!(
                "unknown plot kind '{other}' (expected field, norms or residuals)"
            ))),
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("missing artifact {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

fn json_num(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Number(n) => n.to_string(),
        _ => String::new(),
    }
}

/// Flat CSV for external plotting, written to `out` or stdout.
pub fn cmd_emit_plot(run: &Path, what: PlotKind, out: Option<&Path>) -> Result<i32, CliError> {
    let (header, rows): (&[&str], Vec<Vec<String>>) = match what {
        PlotKind::Field => {
            let path = [run.join("field.dkpp"), run.join("window_000.dkpp")]
                .into_iter()
                .find(|p| p.exists())
                .ok_or_else(|| CliError::Validation(format!("missing artifact: no field snapshot in {}", run.display())))?;
            let s = Snapshot::read(&path)?;
            let mut rows = Vec::with_capacity(s.levels() * s.n_points);
            for m in 0..s.levels() {
                let t = num(s.t(m));
                for j in 0..s.n_points {
                    rows.push(vec![num(s.x(j)), t.clone(), num(s.data[m * s.n_points + j])]);
                }
            }
            (&["x", "t", "value"], rows)
        }
        PlotKind::Residuals => {
            let report = read_json(&run.join("report.json"))?;
            let residuals = report["solve"]["residuals"]
                .as_array()
                .ok_or_else(|| CliError::Validation("report.json has no residual history".into()))?;
            let rows = residuals.iter().enumerate().map(|(i, r)| vec![(i + 1).to_string(), json_num(r)]).collect();
            (&["iteration", "residual"], rows)
        }
        PlotKind::Norms => {
            let report = run.join("report.json");
            let norms: Vec<serde_json::Value> = if report.exists() {
                vec![read_json(&report)?["solve"]["norms"].clone()]
            } else {
                let march = read_json(&run.join("march.json"))?;
                march["windows"]
                    .as_array()
                    .map(|ws| ws.iter().map(|w| w["norms"].clone()).collect())
                    .unwrap_or_default()
            };
            if norms.is_empty() || norms.iter().any(|n| !n.is_object()) {
                return Err(CliError::Validation("norms missing from run artifacts".into()));
            }
            let rows = norms
                .iter()
                .enumerate()
                .map(|(i, n)| vec![i.to_string(), json_num(&n["l2"]), json_num(&n["h2alpha"]), json_num(&n["w122"])])
                .collect();
            (&["window", "l2", "h2alpha", "w122"], rows)
        }
    };
    match out {
        Some(p) => write_rows(p, header, rows)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            let io = |e: csv::Error| CliError::Validation(format!("writing plot data: {e}"));
            w.write_record(header).map_err(io)?;
            for row in rows {
                w.write_record(&row).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Validation(format!("writing plot data: {e}")))?;
        }
    }
    Ok(EXIT_OK)
}
