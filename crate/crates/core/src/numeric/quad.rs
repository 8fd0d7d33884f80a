//! Quadrature for the effective-potential integrals.
//!
//! Integrands here are `ln w(ν)` (possibly times a cosine). They are smooth
//! except at trapping zeros of the pumping function when `n_b = 0`, where the
//! logarithm has an integrable singularity. Callers pass those points as
//! breakpoints; a segment that ends on a singular breakpoint is integrated
//! after the substitution `ν = c + h s²`, which turns `ln|ν - c|` into the
//! bounded `s ln s`.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;
const MIN_DEPTH: u32 = 3;
const MAX_PANELS: usize = 1 << 24;

/// Where a segment touches a singular point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Singular {
    None,
    Left,
    Right,
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut ok = true;
    let mut unresolved = 0.0;
    let v = simpson_step(f, a, fa, m, fm, b, fb, whole, tol, 0, &mut ok, &mut unresolved);
    if ok && unresolved <= tol && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature { lo: a, hi: b, tol })
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    ok: &mut bool,
    unresolved: &mut f64,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if !delta.is_finite() {
        *ok = false;
        return left + right;
    }
    if depth >= MAX_DEPTH {
        // Pieces this narrow only arise next to a singular point; their
        // error estimates are summed and checked against the total budget.
        *unresolved += delta.abs();
        return left + right;
    }
    simpson_step(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1, ok, unresolved)
        + simpson_step(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1, ok, unresolved)
}

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + h * i as f64);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Splits `[lo, hi]` at the interior breakpoints and tags the ends that sit
/// on a singular breakpoint.
fn segments(lo: f64, hi: f64, breaks: &[f64], singular_breaks: bool) -> Vec<(f64, f64, Singular)> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > lo && p < hi).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut nodes = Vec::with_capacity(pts.len() + 2);
    nodes.push(lo);
    nodes.extend(pts);
    nodes.push(hi);
    let is_sing = |x: f64| singular_breaks && breaks.iter().any(|&p| p == x);
    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (c, d) = (w[0], w[1]);
        match (is_sing(c), is_sing(d)) {
            (false, false) => out.push((c, d, Singular::None)),
            (true, false) => out.push((c, d, Singular::Left)),
            (false, true) => out.push((c, d, Singular::Right)),
            (true, true) => {
                let m = 0.5 * (c + d);
                out.push((c, m, Singular::Left));
                out.push((m, d, Singular::Right));
            }
        }
    }
    out
}

/// Integrand on `s ∈ [0, 1]` after the square-root substitution.
fn substituted<'a, F: Fn(f64) -> f64>(f: &'a F, c: f64, d: f64, side: Singular) -> impl Fn(f64) -> f64 + 'a {
    let h = d - c;
    move |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let x = match side {
            Singular::Left => c + h * s * s,
            _ => d - h * s * s,
        };
        let v = 2.0 * h * s * f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }
}

/// Adaptive integral of `f` over `[lo, hi]` with breakpoints. When
/// `singular_breaks` is set, `f` may diverge logarithmically at every
/// breakpoint. Handles `lo > hi` by sign flip.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, breaks: &[f64], singular_breaks: bool, tol: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate(f, hi, lo, breaks, singular_breaks, tol).map(|v| -v);
    }
    let segs = segments(lo, hi, breaks, singular_breaks);
    let seg_tol = tol / segs.len() as f64;
    let mut total = 0.0;
    for (c, d, side) in segs {
        total += match side {
            Singular::None => adaptive_simpson(f, c, d, seg_tol)?,
            _ => adaptive_simpson(&substituted(f, c, d, side), 0.0, 1.0, seg_tol)
                .map_err(|_| Error::Quadrature { lo: c, hi: d, tol: seg_tol })?,
        };
    }
    Ok(total)
}

/// Integral of a rapidly oscillating integrand with known `period`, on a
/// fixed composite grid with at least 20 nodes per period; the grid is
/// doubled until successive estimates agree to `tol`.
pub fn integrate_oscillatory<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    period: f64,
    breaks: &[f64],
    singular_breaks: bool,
    tol: f64,
) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate_oscillatory(f, hi, lo, period, breaks, singular_breaks, tol).map(|v| -v);
    }
    let segs = segments(lo, hi, breaks, singular_breaks);
    let seg_tol = tol / segs.len() as f64;
    let mut total = 0.0;
    for (c, d, side) in segs {
        // Largest step in ν per unit step in the integration variable.
        let stretch = match side {
            Singular::None => d - c,
            _ => 2.0 * (d - c),
        };
        let mut panels = ((20.0 * stretch / period).ceil() as usize).max(16);
        panels += panels % 2;
        let g = |s: f64| f(s);
        let sub = substituted(f, c, d, side);
        let eval = |n: usize| match side {
            Singular::None => composite_simpson(&g, c, d, n),
            _ => composite_simpson(&sub, 0.0, 1.0, n),
        };
        let mut coarse = eval(panels);
        loop {
            if panels > MAX_PANELS {
                return Err(Error::Quadrature { lo: c, hi: d, tol: seg_tol });
            }
            panels *= 2;
            let fine = eval(panels);
            if (fine - coarse).abs() <= seg_tol {
                total += fine;
                break;
            }
            coarse = fine;
        }
    }
    Ok(total)
}
