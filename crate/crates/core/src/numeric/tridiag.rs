//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection.

/// Gershgorin interval `[lo, hi]` containing every eigenvalue.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    (lo, hi)
}

fn pivot_floor(off: &[f64]) -> f64 {
    let emax = off.iter().fold(1.0f64, |m, e| m.max(e * e));
    f64::MIN_POSITIVE * emax
}

/// Number of eigenvalues strictly below `x` (negative LDLᵀ pivots of `T - x`).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let pivmin = pivot_floor(off);
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i > 0 { off[i - 1] * off[i - 1] / q } else { 0.0 };
        q = diag[i] - x - coupling;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based), bisected until the bracket is
/// narrower than `tol · max(1, |λ|)` or no longer shrinks.
pub fn kth_smallest(diag: &[f64], off: &[f64], k: usize, tol: f64) -> f64 {
    assert!(k < diag.len(), "eigenvalue index out of range");
    let (mut lo, mut hi) = gershgorin(diag, off);
    let pad = f64::EPSILON * (lo.abs().max(hi.abs()) + 1.0) * 4.0;
    lo -= pad;
    hi += pad;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol * mid.abs().max(1.0) * 0.5 {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest eigenvalue of the positive definite matrix `AᵀA`, where `A` is
/// the lower bidiagonal `(m+1)×m` factor of a birth–death generator
/// symmetrized by its stationary measure:
///
/// `A[j][j] = √birth[j]`, `A[j+1][j] = -√death[j]`, `j = 0..m`
///
/// (`death[j]` is the downward rate out of state `j + 1`). The nonzero
/// spectrum of `AAᵀ` (the symmetrized generator) equals the spectrum of
/// `AᵀA`, so this is the spectral gap. The Sturm count uses the
/// differential form of the LDLᵀ recurrence, which only subtracts the shift
/// itself; exponentially small gaps come out with full relative accuracy.
pub fn edge_gap(birth: &[f64], death: &[f64], rel_tol: f64) -> f64 {
    assert_eq!(birth.len(), death.len());
    let m = birth.len();
    assert!(m > 0, "edge matrix must be nonempty");
    // AᵀA: diag b_j + d_j, off -√(d_j b_{j+1}), Gershgorin upper bound.
    let mut hi: f64 = 0.0;
    for j in 0..m {
        let mut row = birth[j] + death[j];
        if j > 0 {
            row += (death[j - 1] * birth[j]).sqrt();
        }
        if j + 1 < m {
            row += (death[j] * birth[j + 1]).sqrt();
        }
        hi = hi.max(row);
    }
    hi *= 1.0 + 4.0 * f64::EPSILON;
    let mut lo = 0.0f64;
    for _ in 0..4000 {
        let mid = if lo > 0.0 && hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi || hi - lo <= rel_tol * hi {
            break;
        }
        if edge_count(birth, death, mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalues of `AᵀA` strictly below `x`.
fn edge_count(birth: &[f64], death: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut r = birth[0] - x;
    let mut q = r + death[0];
    if q < 0.0 {
        count += 1;
    }
    for j in 1..birth.len() {
        let qs = if q == 0.0 { -f64::MIN_POSITIVE } else { q };
        r = birth[j] * (r / qs) - x;
        q = r + death[j];
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves a tridiagonal system by the Thomas algorithm. `sub[i]` couples row
/// `i + 1` to column `i`, `sup[i]` couples row `i` to column `i + 1`.
/// Intended for diagonally dominant systems; no pivoting.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    d[0] = rhs[0] / beta;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i - 1] * c[i - 1];
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}
