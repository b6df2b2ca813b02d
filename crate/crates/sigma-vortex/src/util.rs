//! Small numeric helpers shared across the crate: stable transcendental
//! combinations, a tridiagonal solver, quadrature and least-squares bits.

use crate::error::{Result, VortexError};

/// Logistic function, computed without overflow on either tail.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z), stable for large |z|. softplus(-inf) = 0, softplus(inf) = inf.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// ln(e^a + e^b) with both tails handled; -inf inputs behave as missing terms.
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// exp with the argument clamped at 300 so downstream arithmetic stays finite.
pub fn exp_clamped(z: f64) -> f64 {
    z.min(300.0).exp()
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower` and `upper` have length n-1; the matrix is assumed weakly
/// diagonally dominant, which every discrete operator in this crate is.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 2 && lower.len() == n - 1 && upper.len() == n - 1 && rhs.len() == n);
    let mut c = vec![0.0; n - 1];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Trapezoid rule on arbitrary abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Nodes and weights of the 16-point Gauss-Legendre rule on [-1, 1].
/// Composite panels of this rule integrate the piecewise-polynomial field
/// profiles to near machine precision.
const GL16_X: [f64; 8] = [
    0.09501250983763744,
    0.2816035507792589,
    0.45801677765722737,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL16_W: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

/// Composite 16-point Gauss-Legendre quadrature of `f` over [a, b] using
/// `panels` equal subintervals.
pub fn gauss_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for k in 0..8 {
            acc += GL16_W[k] * (f(mid + half * GL16_X[k]) + f(mid - half * GL16_X[k]));
        }
        total += acc * half;
    }
    total
}

/// Least-squares fit result. `condition` is the ratio of extreme diagonal
/// entries of R in the QR factorization, a cheap conditioning proxy.
#[derive(Debug, Clone)]
pub struct Lstsq {
    pub coeffs: Vec<f64>,
    pub residual_rms: f64,
    pub condition: f64,
}

/// Solves min ||A c - y||_2 by Householder QR. `columns` are the columns of A.
pub fn lstsq(columns: &[Vec<f64>], y: &[f64]) -> Result<Lstsq> {
    let ncols = columns.len();
    let m = y.len();
    assert!(ncols >= 1 && columns.iter().all(|c| c.len() == m));
    if m < ncols {
        return Err(VortexError::WindowTooShort(format!(
            "{m} samples for {ncols} basis functions"
        )));
    }
    // Column-major working copy of A, plus the target.
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut b = y.to_vec();
    let mut rdiag = vec![0.0; ncols];
    for k in 0..ncols {
        // Householder vector for column k below row k.
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(VortexError::IllConditioned(format!(
                "zero pivot in column {k}"
            )));
        }
        let alpha = if a[k][k] >= 0.0 { -norm } else { norm };
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|x| x * x).sum::<f64>();
        a[k][k] = alpha;
        rdiag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in (k + 1)..ncols {
                let dot: f64 = v
                    .iter()
                    .zip(&a[col][k..])
                    .map(|(vi, ci)| vi * ci)
                    .sum();
                let scale = 2.0 * dot / vnorm2;
                for (i, vi) in v.iter().enumerate() {
                    a[col][k + i] -= scale * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[k..]).map(|(vi, bi)| vi * bi).sum();
            let scale = 2.0 * dot / vnorm2;
            for (i, vi) in v.iter().enumerate() {
                b[k + i] -= scale * vi;
            }
        }
    }
    let dmax = rdiag.iter().map(|r| r.abs()).fold(0.0_f64, f64::max);
    let dmin = rdiag.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
    let condition = dmax / dmin;
    if !condition.is_finite() || condition > 1e12 {
        return Err(VortexError::IllConditioned(format!(
            "diagonal ratio {condition:.3e}"
        )));
    }
    // Back substitution on the upper triangle stored in `a`.
    let mut coeffs = vec![0.0; ncols];
    for i in (0..ncols).rev() {
        let mut s = b[i];
        for j in (i + 1)..ncols {
            s -= a[j][i] * coeffs[j];
        }
        coeffs[i] = s / a[i][i];
    }
    let mut res2 = 0.0;
    for bi in &b[ncols..] {
        res2 += bi * bi;
    }
    let residual_rms = (res2 / m as f64).sqrt();
    Ok(Lstsq {
        coeffs,
        residual_rms,
        condition,
    })
}

/// Golden-section minimization of a unimodal function on [lo, hi].
pub fn golden_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = 0.6180339887498949;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection root of an increasing function: finds t with f(t) = target.
/// Panics if the bracket does not straddle the target.
pub fn bisect_increasing(
    f: &dyn Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    steps: usize,
) -> f64 {
    debug_assert!(f(lo) <= target && f(hi) >= target);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// n points from a to b inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + h * i as f64).collect()
}

/// Formats with 12 significant digits; profile files rely on this being
/// locale-free and deterministic.
pub fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_softplus_agree_with_definitions() {
        for &z in &[-700.0, -30.0, -1.0, 0.0, 1.0, 30.0, 700.0] {
            let s = sigmoid(z);
            assert!((0.0..=1.0).contains(&s));
            if z.abs() < 20.0 {
                assert!((s - 1.0 / (1.0 + (-z).exp())).abs() < 1e-15);
                assert!((softplus(z) - (1.0 + z.exp()).ln()).abs() < 1e-12);
            }
        }
        assert_eq!(softplus(f64::NEG_INFINITY), 0.0);
        assert_eq!(softplus(f64::INFINITY), f64::INFINITY);
        // Complementary identity sigma(z) + sigma(-z) = 1.
        for &z in &[-8.0, -0.3, 0.0, 2.7, 19.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn logsumexp_handles_missing_terms() {
        assert_eq!(logsumexp2(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(logsumexp2(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((logsumexp2(1.0, 2.0) - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
        assert!((logsumexp2(-1000.0, -1001.0) - (-1000.0 + (1.0 + (-1.0_f64).exp()).ln())).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_matches_dense_elimination() {
        // -u'' = 1 on a 7-point grid with Dirichlet-style pinned ends baked
        // into the diagonal; compare against direct Gaussian elimination.
        let n = 7;
        let lower = vec![-1.0; n - 1];
        let upper = vec![-1.0; n - 1];
        let diag = vec![2.5; n];
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        // Residual check.
        for i in 0..n {
            let mut r = diag[i] * x[i] - rhs[i];
            if i > 0 {
                r += lower[i - 1] * x[i - 1];
            }
            if i < n - 1 {
                r += upper[i] * x[i + 1];
            }
            assert!(r.abs() < 1e-12, "row {i} residual {r}");
        }
    }

    #[test]
    fn gauss_panels_integrate_polynomials_exactly() {
        // Degree-9 polynomial over [0, 3].
        let f = |x: f64| 1.0 + x - 2.0 * x.powi(3) + 0.5 * x.powi(9);
        let exact = 3.0 + 4.5 - 40.5 + 0.05 * 3f64.powi(10);
        assert!((gauss_panels(&f, 0.0, 3.0, 2) - exact).abs() < 1e-10);
        // And a transcendental one against a known antiderivative.
        let g = |x: f64| (2.0 * x).sin();
        let exact_g = 0.5 * (1.0 - 6.0_f64.cos());
        assert!((gauss_panels(&g, 0.0, 3.0, 8) - exact_g).abs() < 1e-13);
    }

    #[test]
    fn lstsq_recovers_exact_coefficients() {
        let xs = linspace(1.0, 9.0, 40);
        let c0 = 2.5;
        let c1 = -1.25;
        let col0 = vec![1.0; xs.len()];
        let col1: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let y: Vec<f64> = xs.iter().map(|x| c0 + c1 * x.ln()).collect();
        let fit = lstsq(&[col0, col1], &y).unwrap();
        assert!((fit.coeffs[0] - c0).abs() < 1e-10);
        assert!((fit.coeffs[1] - c1).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn lstsq_flags_degenerate_bases() {
        let col = vec![1.0; 10];
        let same = vec![1.0; 10];
        let y = vec![2.0; 10];
        assert!(lstsq(&[col, same], &y).is_err());
    }

    #[test]
    fn golden_finds_quadratic_minimum() {
        let f = |x: f64| (x - 1.7).powi(2) + 3.0;
        let x = golden_min(&f, -10.0, 10.0, 1e-10);
        // Accuracy is limited by the flatness of the parabola near its
        // minimum in double precision, not by the bracket tolerance.
        assert!((x - 1.7).abs() < 1e-6);
    }

    #[test]
    fn bisection_hits_target_of_monotone_function() {
        let f = |t: f64| t.exp();
        let t = bisect_increasing(&f, 5.0, -10.0, 10.0, 200);
        assert!((t - 5f64.ln()).abs() < 1e-12);
    }
}
