//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero on any failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dkpp_core::duhamel::{apply_map, time_derivative};
use dkpp_core::kernel::{build_kernel, convolve};
use dkpp_core::oracle::{direct_convolution, heat_gaussian, linear_mode_field};
use dkpp_core::picard::{
    certify, check_nontriviality, contraction_ratio, iteration_bound, l2_spacetime_norm, march_global,
    max_horizon_for, solve, w122_norm,
};
use dkpp_core::random_fields::FieldSampler;
use dkpp_core::spectral::{forward_transform, l1_norm};
use dkpp_core::{
    Grid, InitialGuess, KernelKind, KernelSpec, NonlinearitySpec, ProblemSpec, RateKind, SolveConfig,
    SourceProfile, TimeWindow, Verdict,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SLACK: f64 = 0.05;
const TOL: f64 = 1e-10;

fn grid(n: usize) -> Grid {
    Grid::new(8.0 * PI, n).unwrap()
}

fn gaussian_u0(g: &Grid) -> Vec<f64> {
    g.points().iter().map(|x| (-x * x).exp()).collect()
}

fn gaussian(g: &Grid, sigma: f64) -> KernelSpec {
    build_kernel(KernelKind::Gaussian { sigma }, 1.0, g).unwrap()
}

fn saturating(g: &Grid, k: f64, source: Option<SourceProfile>) -> NonlinearitySpec {
    NonlinearitySpec::new(RateKind::Saturating { k }, source, g, None).unwrap()
}

fn source() -> Option<SourceProfile> {
    Some(SourceProfile::Gaussian { amplitude: 0.2, width: 1.5, center: 0.0 })
}

struct Setup {
    name: &'static str,
    problem: ProblemSpec,
    horizon: f64,
}

/// Gaussian kernels `σ ∈ {1, 2}`, `l ∈ {0.05, 0.1}`, horizons with `C ∈ [0.2, 0.8]`.
fn admissible_setups(g: &Grid) -> Vec<Setup> {
    let mk = |a: f64, b: f64, sigma: f64, l: f64| {
        ProblemSpec::new(0.5, a, b, gaussian(g, sigma), saturating(g, l, source()), gaussian_u0(g)).unwrap()
    };
    vec![
        Setup { name: "sigma=1 l=0.1 T=1", problem: mk(0.0, 0.0, 1.0, 0.1), horizon: 1.0 },
        Setup { name: "sigma=2 l=0.05 T=3", problem: mk(0.0, 0.0, 2.0, 0.05), horizon: 3.0 },
        Setup { name: "sigma=1 l=0.1 a=0.1 b=0.5 T=1", problem: mk(0.1, 0.5, 1.0, 0.1), horizon: 1.0 },
    ]
}

fn l2_diff(g: &Grid, a: &[f64], b: &[f64]) -> f64 {
    (g.dx() * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sqrt()
}

fn contraction_bound() -> Outcome {
    let start = Instant::now();
    let g = grid(256);
    let mut worst = Vec::new();
    for (i, s) in admissible_setups(&g).iter().enumerate() {
        let w = TimeWindow::new(s.horizon, 1000).unwrap();
        let c = certify(&s.problem, &w).constant;
        if !(0.2..=0.8).contains(&c) {
            return Err(format!("{}: C = {c} outside [0.2, 0.8]", s.name));
        }
        let mut sampler = FieldSampler::new(100 + i as u64, 1.0);
        let mut max = 0.0f64;
        for _ in 0..20 {
            let (v1, d1) = sampler.next_pair(&g, &w);
            let (v2, d2) = sampler.next_pair(&g, &w);
            let r = contraction_ratio(&s.problem, &w, (&v1, &d1), (&v2, &d2)).map_err(|e| e.to_string())?;
            max = max.max(r);
        }
        if max > c + SLACK {
            return Err(format!("{}: ratio {max:.4} > C + 0.05 = {:.4}", s.name, c + SLACK));
        }
        worst.push(format!("{max:.3}/{c:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 120.0 {
        return Err(format!("runtime {secs:.1}s exceeds 120s"));
    }
    Ok(format!("max ratio / C per config: {} in {secs:.1}s", worst.join(", ")))
}

fn geometric_convergence() -> Outcome {
    let g = grid(256);
    let mut notes = Vec::new();
    for s in admissible_setups(&g) {
        let w = TimeWindow::new(s.horizon, 200).unwrap();
        let r = solve(&s.problem, &w, &SolveConfig::default()).map_err(|e| format!("{}: {e}", s.name))?.report;
        let bound = r.certificate.constant + SLACK;
        if let Some(bad) = r.ratios.iter().flatten().find(|&&x| x > bound) {
            return Err(format!("{}: ratio {bad} > {bound}", s.name));
        }
        let last = *r.residuals.last().unwrap();
        let allowed = iteration_bound(TOL, r.residuals[0], bound).unwrap() + 2;
        if !(r.converged && last < TOL && r.iterations <= allowed) {
            return Err(format!("{}: {} iterations (allowed {allowed}), last residual {last:e}", s.name, r.iterations));
        }
        notes.push(format!("{}<={allowed}", r.iterations));
    }
    Ok(format!("iterations vs log bound + 2: {}", notes.join(", ")))
}

fn linear_oracle() -> Outcome {
    let g = grid(256);
    let f = NonlinearitySpec::linear(0.1, &g).unwrap();
    let p = ProblemSpec::new(0.5, 0.1, 0.5, gaussian(&g, 1.0), f, gaussian_u0(&g)).unwrap();
    let w = TimeWindow::new(1.0, 1000).unwrap();
    let sol = solve(&p, &w, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let (exact, _) = linear_mode_field(&p, &w).map_err(|e| e.to_string())?;
    let err = l2_spacetime_norm(&sol.field.sub(&exact).unwrap(), &g, &w).unwrap()
        / l2_spacetime_norm(&exact, &g, &w).unwrap();
    if err <= 1e-5 {
        Ok(format!("relative L2 error {err:.2e}"))
    } else {
        Err(format!("relative L2 error {err:.2e} > 1e-5"))
    }
}

fn heat_oracle() -> Outcome {
    let g = grid(256);
    let f = NonlinearitySpec::linear(0.0, &g).unwrap();
    let p = ProblemSpec::oracle_mode(1.0, 0.0, 0.0, gaussian(&g, 1.0), f, gaussian_u0(&g)).unwrap();
    let w = TimeWindow::new(1.0, 50).unwrap();
    let sol = solve(&p, &w, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let err = sol.field.sub(&heat_gaussian(&g, &w)).unwrap().max_abs();
    if err <= 1e-10 {
        Ok(format!("max error {err:.2e}"))
    } else {
        Err(format!("max error {err:.2e} > 1e-10"))
    }
}

fn builtin_kernels() -> Vec<KernelKind> {
    vec![
        KernelKind::Gaussian { sigma: 1.0 },
        KernelKind::Gaussian { sigma: 2.0 },
        KernelKind::Bump { width: 3.0 },
        KernelKind::SincSquared { bandwidth: 1.0 },
    ]
}

fn convolution_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for n in [64, 128, 256] {
        let g = grid(n);
        let mut sampler = FieldSampler::new(n as u64, 1.0);
        let fields: Vec<Vec<f64>> = (0..50).map(|_| sampler.next_white_noise(&g)).collect();
        for kind in builtin_kernels() {
            let k = build_kernel(kind, 1.0, &g).unwrap();
            for f in &fields {
                let a = convolve(&k, f, &g).unwrap();
                let b = direct_convolution(&k, f, &g).unwrap();
                worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).abs()));
            }
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max abs difference {worst:.2e}"))
    } else {
        Err(format!("max abs difference {worst:.2e} > 1e-12"))
    }
}

fn quadrature_order() -> Outcome {
    let g = grid(128);
    let p = ProblemSpec::new(0.5, 0.0, 0.0, gaussian(&g, 1.0), saturating(&g, 0.1, source()), gaussian_u0(&g)).unwrap();
    let cfg = SolveConfig { tolerance: 1e-13, ..SolveConfig::default() };
    let finals: Vec<Vec<f64>> = [20usize, 40, 80]
        .iter()
        .map(|&m| solve(&p, &TimeWindow::new(1.0, m).unwrap(), &cfg).map(|s| s.field.last_level().to_vec()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let order = (l2_diff(&g, &finals[0], &finals[1]) / l2_diff(&g, &finals[1], &finals[2])).log2();
    if (1.9..=2.1).contains(&order) {
        Ok(format!("observed order {order:.4}"))
    } else {
        Err(format!("observed order {order:.4} outside [1.9, 2.1]"))
    }
}

fn fourier_bounds() -> Outcome {
    let g = grid(256);
    let sup_p2 = |spec: &dkpp_core::SpectralField| {
        spec.coefficients().iter().enumerate().map(|(i, c)| g.frequency(i).powi(2) * c.norm()).fold(0.0f64, f64::max)
    };
    let root = (2.0 * PI).sqrt();
    let mut sampler = FieldSampler::new(2024, 2.0);
    for i in 0..100 {
        let (u, uxx) = sampler.next_field(&g).snapshot(&g, 0.3);
        let spec = forward_transform(&u, &g).unwrap();
        if spec.max_abs() > l1_norm(&u, &g).unwrap() / root + 1e-10 {
            return Err(format!("field {i}: sup bound violated"));
        }
        if sup_p2(&spec) > l1_norm(&uxx, &g).unwrap() / root + 1e-8 {
            return Err(format!("field {i}: second-derivative bound violated"));
        }
    }
    for kind in builtin_kernels() {
        let k = build_kernel(kind.clone(), 1.0, &g).unwrap();
        if k.spectrum().max_abs() > k.l1_g() / root + 1e-10 || sup_p2(k.spectrum()) > k.l1_g2() / root + 1e-8 {
            return Err(format!("kernel {}: bound violated", kind.name()));
        }
    }
    Ok(format!("100 fields and {} kernels", builtin_kernels().len()))
}

fn uniqueness() -> Outcome {
    let g = grid(256);
    let p = ProblemSpec::new(0.5, 0.0, 0.0, gaussian(&g, 1.0), saturating(&g, 0.1, source()), gaussian_u0(&g)).unwrap();
    let w = TimeWindow::new(1.0, 100).unwrap();
    let c = certify(&p, &w).constant;
    let run = |guess| solve(&p, &w, &SolveConfig { initial_guess: guess, ..SolveConfig::default() });
    let a = run(InitialGuess::Zero).map_err(|e| e.to_string())?;
    let b = run(InitialGuess::Random { seed: 17, amplitude: 1.0 }).map_err(|e| e.to_string())?;
    let gap = w122_norm(&a.field.sub(&b.field).unwrap(), &a.time_derivative.sub(&b.time_derivative).unwrap(), &g, &w)
        .unwrap();
    if gap > 10.0 * TOL {
        return Err(format!("fixed points differ by {gap:e} > 10·tolerance"));
    }
    let mut sampler = FieldSampler::new(9, 1.0);
    let (mut u1, mut d1) = sampler.next_pair(&g, &w);
    let (mut u2, mut d2) = (a.field.clone(), a.time_derivative.clone());
    let mut dist = w122_norm(&u1.sub(&u2).unwrap(), &d1.sub(&d2).unwrap(), &g, &w).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let n1 = apply_map(&p, &w, &u1).unwrap();
        let n2 = apply_map(&p, &w, &u2).unwrap();
        d1 = time_derivative(&p, &w, &n1, &u1).unwrap();
        d2 = time_derivative(&p, &w, &n2, &u2).unwrap();
        let next = w122_norm(&n1.sub(&n2).unwrap(), &d1.sub(&d2).unwrap(), &g, &w).unwrap();
        if dist > 1e-12 {
            worst = worst.max(next / dist);
        }
        dist = next;
        u1 = n1;
        u2 = n2;
    }
    if worst > c + SLACK {
        return Err(format!("perturbed distance contracted by {worst:.4} > {:.4}", c + SLACK));
    }
    Ok(format!("gap {gap:.1e}, worst per-iteration factor {worst:.4} vs C = {c:.4}"))
}

fn horizon_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let ql = 0.05 + 0.09 * i as f64;
        let b = -2.0 + 0.45 * i as f64;
        let s = b.abs() + 1.0;
        let exact = ((1.0 / (ql * ql) - 1.0) / (1.0 + 2.0 * s * s)).sqrt();
        let t = max_horizon_for(1.0, ql, 0.0, b).t_max;
        worst = worst.max((t - exact).abs());
    }
    if worst <= 1e-9 {
        Ok(format!("max deviation {worst:.1e}"))
    } else {
        Err(format!("max deviation {worst:.1e} > 1e-9"))
    }
}

fn global_march() -> Outcome {
    let g = grid(128);
    let p = ProblemSpec::new(0.5, 0.0, 0.0, gaussian(&g, 1.0), saturating(&g, 0.1, source()), gaussian_u0(&g)).unwrap();
    let cfg = SolveConfig::default();
    let one = solve(&p, &TimeWindow::new(1.0, 200).unwrap(), &cfg).map_err(|e| e.to_string())?;
    let two = march_global(&p, &TimeWindow::new(0.5, 100).unwrap(), 1.0, &cfg).map_err(|e| e.to_string())?;
    let d = l2_diff(&g, one.field.last_level(), two.final_level());
    if d > 1e-7 {
        return Err(format!("two half windows differ from one window by {d:e}"));
    }
    let ten = march_global(&p, &TimeWindow::new(0.5, 25).unwrap(), 5.0, &cfg).map_err(|e| e.to_string())?;
    let jump = ten.seams.iter().map(|s| s.value_jump).fold(0.0, f64::max);
    if ten.windows.len() != 10 || jump > 10.0 * TOL {
        return Err(format!("{} windows, max seam jump {jump:e}", ten.windows.len()));
    }
    Ok(format!("L2 gap {d:.1e}, 10 windows with max seam jump {jump:.1e}"))
}

fn nontriviality() -> Outcome {
    let g = grid(256);
    let p = ProblemSpec::new(0.5, 0.0, 0.0, gaussian(&g, 1.0), saturating(&g, 0.1, source()), gaussian_u0(&g)).unwrap();
    let gg = check_nontriviality(&p).unwrap().verdict;
    let kernel = build_kernel(KernelKind::SincSquared { bandwidth: 1.0 }, 1.0, &g).unwrap();
    let band = SourceProfile::Band { amplitude: 0.2, p_lo: 2.0, p_hi: 3.0 };
    let f = NonlinearitySpec::new(RateKind::Saturating { k: 0.1 }, Some(band), &g, None).unwrap();
    let p = ProblemSpec::new(0.5, 0.0, 0.0, kernel, f, gaussian_u0(&g)).unwrap();
    let disjoint = check_nontriviality(&p).unwrap().verdict;
    if gg == Verdict::NontrivialGuaranteed && disjoint == Verdict::Inconclusive {
        Ok("gaussian/gaussian guaranteed, disjoint bands inconclusive".into())
    } else {
        Err(format!("verdicts {gg:?} and {disjoint:?}"))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join("saturating.json");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_dkpp"))
            .args(["solve", "--verify", "--seed", "42", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if !status.success() {
            return Err(format!("solve exited with {status}"));
        }
        let files: Vec<Vec<u8>> = ["report.json", "residuals.csv", "field.dkpp"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap_or_default())
            .collect();
        outputs.push(files);
    }
    if outputs[0] == outputs[1] && outputs[0].iter().all(|f| !f.is_empty()) {
        Ok("report.json, residuals.csv and field.dkpp byte-identical".into())
    } else {
        Err("repeated runs differ".into())
    }
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("contraction bound on random pairs", contraction_bound),
        ("geometric Picard convergence", geometric_convergence),
        ("linear-rate analytic oracle", linear_oracle),
        ("heat-kernel oracle", heat_oracle),
        ("spectral vs direct convolution", convolution_equivalence),
        ("Duhamel quadrature order", quadrature_order),
        ("Fourier sup bounds", fourier_bounds),
        ("uniqueness of the fixed point", uniqueness),
        ("max horizon closed form", horizon_closed_form),
        ("global march continuity", global_march),
        ("nontriviality verdicts", nontriviality),
        ("determinism of solve", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
