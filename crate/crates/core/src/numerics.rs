//! Small scalar routines shared by the solvers.

/// Bisection for a sign change of `f` on `[a, b]`, stopping once the bracket is narrower than `tol`.
///
/// Returns the final bracket. The caller guarantees `f(a)` and `f(b)` differ in sign.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut fa = f(a);
    for _ in 0..400 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return (m, m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    (a, b)
}

/// Root of `f` in a bracket: bisection down to `coarse`, then Newton safeguarded by the bracket.
pub fn bracketed_newton(
    f: impl Fn(f64) -> (f64, f64),
    a: f64,
    b: f64,
    coarse: f64,
    tol: f64,
) -> f64 {
    let (mut lo, mut hi) = bisect(|x| f(x).0, a, b, coarse);
    let mut flo = f(lo).0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if (v > 0.0) == (flo > 0.0) {
            lo = x;
            flo = v;
        } else {
            hi = x;
        }
        let mut next = x - v / dv;
        let (l, h) = (lo.min(hi), lo.max(hi));
        if !next.is_finite() || next <= l || next >= h {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= tol * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Linear least squares `min |A c - y|` by Householder QR, with `A` given column-wise.
///
/// Returns the coefficients and the root-mean-square residual.
pub fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let p = cols.len();
    assert!(n >= p && p > 0, "least_squares needs at least as many rows as columns");
    let mut a: Vec<Vec<f64>> = cols.to_vec();
    let mut rhs = y.to_vec();
    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(k) {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
            let s = 2.0 * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        let dot: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum();
        let s = 2.0 * dot / vnorm2;
        for (c, vi) in rhs[k..].iter_mut().zip(&v) {
            *c -= s * vi;
        }
    }
    let mut coef = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = rhs[k];
        for j in k + 1..p {
            s -= a[j][k] * coef[j];
        }
        coef[k] = if a[k][k] != 0.0 { s / a[k][k] } else { 0.0 };
    }
    let mut ss = 0.0;
    for i in 0..n {
        let fit: f64 = (0..p).map(|j| cols[j][i] * coef[j]).sum();
        ss += (y[i] - fit).powi(2);
    }
    (coef, (ss / n as f64).sqrt())
}

/// Composite Simpson nodes and weights on `[a, b]` with `m` (even) panels.
pub fn simpson(a: f64, b: f64, m: usize) -> impl Iterator<Item = (f64, f64)> {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    (0..=m).map(move |i| {
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        (a + i as f64 * h, w * h / 3.0)
    })
}

/// `cosh(x) - 1` without cancellation for small `x`.
#[inline]
pub fn cosh_m1(x: f64) -> f64 {
    let s = (0.5 * x).sinh();
    2.0 * s * s
}

/// `1 - cos(x)` without cancellation for small `x`.
#[inline]
pub fn one_m_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}
