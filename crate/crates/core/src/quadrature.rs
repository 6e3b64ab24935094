//! Adaptive composite Simpson quadrature.

/// Integrates `f` over `[a, b]` starting from `panels` equal Simpson panels and
/// halving each panel until the local Richardson estimate meets its share of
/// `rel_tol · |∫f|`. Kinks (e.g. `|g|` at sign changes of `g`) are resolved by
/// the local refinement.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rel_tol: f64) -> f64 {
    assert!(panels > 0 && b > a);
    let h = (b - a) / panels as f64;
    let min_width = (b - a) * 1e-12;
    let mut coarse = Vec::with_capacity(panels);
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let s = simpson(lo, hi, flo, fmid, fhi);
        total += s.abs();
        coarse.push((lo, hi, flo, fmid, fhi, s));
    }
    if total == 0.0 {
        return 0.0;
    }
    let tol = (rel_tol * total / panels as f64).max(f64::EPSILON * total / panels as f64);
    coarse
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, s)| refine(&f, lo, hi, flo, fmid, fhi, s, tol, 48, min_width))
        .sum()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    min_width: f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) < min_width {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, min_width)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, min_width)
}
