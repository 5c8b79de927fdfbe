//! The dispersion relation `D_c(lambda) = G(lambda) - c T(lambda) + f'(0)` of exponential
//! linear waves `e^{-lambda x}`.
//!
//! For the continuous operator `G(lambda) = int (cosh(lambda z) - 1) K` and `T(lambda) = lambda`.
//! The grid version uses the discrete weights for `G` and the symbol of the second-order
//! upwind derivative for `T`, so that its critical speed is the one the discrete solvers see.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Stencil};
use crate::numerics::{bisect, bracketed_newton, cosh_m1, one_m_cos};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    #[serde(rename = "c_K")]
    pub c_k: f64,
    pub lambda_star: f64,
    pub d_star: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "D3")]
    pub d3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub speed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexRoot {
    pub lambda: Complex64,
    pub residual: f64,
    pub fallback_used: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Transport {
    Exact,
    Upwind2 { h: f64 },
}

/// Dispersion relation for one kernel (continuous or sampled) and one slope `f'(0)`.
#[derive(Clone, Debug)]
pub struct Dispersion {
    /// `(z, q)`, `z >= 0`, with `sum_all w g(z) = sum q (g(z) + g(-z))`.
    nodes: Vec<(f64, f64)>,
    reach: f64,
    transport: Transport,
    f0: f64,
}

impl Dispersion {
    pub fn continuous(k: &Kernel, fprime0: f64) -> Dispersion {
        Dispersion { nodes: k.nodes().to_vec(), reach: k.halfwidth(), transport: Transport::Exact, f0: fprime0 }
    }

    /// Relation of the grid operator `W * u - m u + c D_h u` with `D_h` the upwind derivative.
    pub fn discrete(s: &Stencil, fprime0: f64) -> Result<Dispersion> {
        if !s.is_even() {
            return Err(Error::BadParams("discrete dispersion needs an even stencil".into()));
        }
        let m = s.lo.unsigned_abs();
        let mut nodes: Vec<(f64, f64)> = (0..=m).map(|j| (j as f64 * s.h, s.weights[m + j])).collect();
        nodes[0].1 *= 0.5;
        Ok(Dispersion { nodes, reach: m as f64 * s.h, transport: Transport::Upwind2 { h: s.h }, f0: fprime0 })
    }

    pub fn fprime0(&self) -> f64 {
        self.f0
    }

    pub fn with_fprime0(&self, fprime0: f64) -> Dispersion {
        Dispersion { f0: fprime0, ..self.clone() }
    }

    /// `G` and its first three derivatives.
    fn g(&self, l: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for &(z, q) in &self.nodes {
            let (s, c) = ((l * z).sinh(), cosh_m1(l * z));
            out[0] += q * c;
            out[1] += q * z * s;
            out[2] += q * z * z * (c + 1.0);
            out[3] += q * z * z * z * s;
        }
        out.map(|v| 2.0 * v)
    }

    fn g_complex(&self, l: Complex64) -> (Complex64, Complex64) {
        let mut g = Complex64::new(0.0, 0.0);
        let mut dg = Complex64::new(0.0, 0.0);
        for &(z, q) in &self.nodes {
            let half = (l * (0.5 * z)).sinh();
            g += q * 2.0 * half * half;
            dg += q * z * (l * z).sinh();
        }
        (2.0 * g, 2.0 * dg)
    }

    /// Transport symbol `T` and its first three derivatives.
    fn t(&self, l: f64) -> [f64; 4] {
        match self.transport {
            Transport::Exact => [l, 1.0, 0.0, 0.0],
            Transport::Upwind2 { h } => {
                let e1 = (-l * h).exp();
                let e2 = e1 * e1;
                // (3 - 4 e1 + e2) / (2h) = (1 - e1)(3 - e1) / (2h)
                let t = -(-l * h).exp_m1() * (3.0 - e1) / (2.0 * h);
                [t, 2.0 * e1 - e2, -2.0 * h * (e1 - e2), 2.0 * h * h * (e1 - 2.0 * e2)]
            }
        }
    }

    fn t_complex(&self, l: Complex64) -> (Complex64, Complex64) {
        match self.transport {
            Transport::Exact => (l, Complex64::new(1.0, 0.0)),
            Transport::Upwind2 { h } => {
                let e1 = (-l * h).exp();
                let e2 = e1 * e1;
                ((3.0 - 4.0 * e1 + e2) / (2.0 * h), 2.0 * e1 - e2)
            }
        }
    }

    /// `D_c(lambda)`.
    pub fn d(&self, c: f64, lambda: f64) -> f64 {
        self.g(lambda)[0] - c * self.t(lambda)[0] + self.f0
    }

    /// `(D', D'')` in `lambda`.
    pub fn d_derivatives(&self, c: f64, lambda: f64) -> (f64, f64) {
        let (g, t) = (self.g(lambda), self.t(lambda));
        (g[1] - c * t[1], g[2] - c * t[2])
    }

    pub fn d_third(&self, c: f64, lambda: f64) -> f64 {
        self.g(lambda)[3] - c * self.t(lambda)[3]
    }

    /// Speed of the linear wave with decay `lambda`: `(f'(0) + G) / T`.
    pub fn speed_of(&self, lambda: f64) -> f64 {
        (self.f0 + self.g(lambda)[0]) / self.t(lambda)[0]
    }

    fn lambda_cap(&self) -> f64 {
        700.0 / self.reach
    }

    /// Minimum of `c(lambda)` over `lambda > 0`.
    pub fn critical(&self) -> Result<DispersionReport> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::NoMinimum(format!("f'(0) = {} must be positive", self.f0)));
        }
        // dc/dlambda has the sign of G'T - (f0 + G)T', which increases from -f0.
        let slope = |l: f64| {
            let (g, t) = (self.g(l), self.t(l));
            (g[1] * t[0] - (self.f0 + g[0]) * t[1], g[2] * t[0] - (self.f0 + g[0]) * t[2])
        };
        let cap = self.lambda_cap();
        let mut hi = 1.0 / self.reach;
        while slope(hi).0 <= 0.0 {
            hi *= 2.0;
            if hi > cap {
                return Err(Error::NoMinimum(format!("no sign change of c'(lambda) below {cap}")));
            }
        }
        let lo = if hi * 0.5 > 1.0 / self.reach { hi * 0.5 } else { 0.0 };
        let lambda_star = bracketed_newton(slope, lo, hi, 1e-6, 1e-14);
        let c_k = self.speed_of(lambda_star);
        let (g, t) = (self.g(lambda_star), self.t(lambda_star));
        Ok(DispersionReport {
            c_k,
            lambda_star,
            d_star: 0.5 * g[2],
            d2: g[2] - c_k * t[2],
            d3: g[3] - c_k * t[3],
        })
    }

    /// The two positive roots `lambda_-(c) < lambda_* < lambda_+(c)` for `c > c_K`.
    pub fn real_roots(&self, c: f64) -> Result<RootPair> {
        let rep = self.critical()?;
        self.real_roots_with(&rep, c)
    }

    pub fn real_roots_with(&self, rep: &DispersionReport, c: f64) -> Result<RootPair> {
        if !(c > rep.c_k) {
            return Err(Error::SubcriticalSpeed { c, c_k: rep.c_k });
        }
        let f = |l: f64| (self.d(c, l), self.d_derivatives(c, l).0);
        let ls = rep.lambda_star;
        let lambda_minus = bracketed_newton(f, 0.0, ls, 1e-6, 1e-12);
        let mut hi = 2.0 * ls;
        while self.d(c, hi) <= 0.0 {
            hi *= 2.0;
            if hi > self.lambda_cap() {
                hi = self.lambda_cap();
                break;
            }
        }
        let lambda_plus = bracketed_newton(f, ls, hi, 1e-6, 1e-12);
        Ok(RootPair { lambda_minus, lambda_plus, speed: c })
    }

    /// Complex root of `D_c + mu = 0` by Newton from `seed`.
    fn complex_newton(&self, c: f64, mu: f64, seed: Complex64) -> (Complex64, f64, bool) {
        let eval = |l: Complex64| {
            let (g, dg) = self.g_complex(l);
            let (t, dt) = self.t_complex(l);
            (g - c * t + self.f0 + mu, dg - c * dt)
        };
        let scale = self.f0.abs().max(1e-300);
        let mut l = seed;
        let (mut v, _) = eval(l);
        for _ in 0..100 {
            if v.norm() <= 1e-14 * scale {
                return (l, v.norm(), true);
            }
            let (_, dv) = eval(l);
            let next = l - v / dv;
            if !next.re.is_finite() || !next.im.is_finite() {
                return (l, v.norm(), false);
            }
            l = next;
            v = eval(l).0;
        }
        (l, v.norm(), v.norm() <= 1e-8 * scale)
    }

    /// Complex root near `lambda_*` for `c` slightly below `c_K`.
    ///
    /// Seeded with `lambda_* + i sqrt(2 (c_K - c) T(lambda_*) / D'')`. When Newton stalls and
    /// `allow_fallback` is set the seed itself is returned with `fallback_used`.
    pub fn complex_branch_subcritical(&self, c: f64, allow_fallback: bool) -> Result<ComplexRoot> {
        let rep = self.critical()?;
        if !(c > 0.0 && c <= rep.c_k) {
            return Err(Error::BadParams(format!("need 0 < c <= c_K = {}, got {c}", rep.c_k)));
        }
        let t_star = self.t(rep.lambda_star)[0];
        let omega = (2.0 * (rep.c_k - c) * t_star / rep.d2).sqrt();
        let seed = Complex64::new(rep.lambda_star, omega);
        let (lambda, residual, ok) = self.complex_newton(c, 0.0, seed);
        if ok {
            Ok(ComplexRoot { lambda, residual, fallback_used: false })
        } else if allow_fallback {
            let residual = self.complex_residual(c, 0.0, seed);
            Ok(ComplexRoot { lambda: seed, residual, fallback_used: true })
        } else {
            Err(Error::NewtonDiverged { residual })
        }
    }

    /// Conjugate pair solving `D_{c_K}(lambda) + mu = 0` near `lambda_*`.
    pub fn complex_branch_shifted(&self, mu: f64) -> Result<(Complex64, Complex64)> {
        let rep = self.critical()?;
        if mu == 0.0 {
            let l = Complex64::new(rep.lambda_star, 0.0);
            return Ok((l, l));
        }
        if !(mu > 0.0) {
            return Err(Error::BadParams(format!("shift must be nonnegative, got {mu}")));
        }
        let re = rep.lambda_star + rep.d3 * mu / (3.0 * rep.d2 * rep.d2);
        let im = (2.0 * mu / rep.d2).sqrt();
        let (l, residual, ok) = self.complex_newton(rep.c_k, mu, Complex64::new(re, im));
        if !ok || l.im <= 0.0 {
            return Err(Error::NewtonDiverged { residual });
        }
        Ok((l, l.conj()))
    }

    /// `|D_c(lambda) + mu|` at a complex point.
    pub fn complex_residual(&self, c: f64, mu: f64, l: Complex64) -> f64 {
        let (g, _) = self.g_complex(l);
        let (t, _) = self.t_complex(l);
        (g - c * t + self.f0 + mu).norm()
    }
}

/// `D_c(lambda)` for the continuous operator.
pub fn d(k: &Kernel, fprime0: f64, c: f64, lambda: f64) -> f64 {
    Dispersion::continuous(k, fprime0).d(c, lambda)
}

pub fn d_derivatives(k: &Kernel, fprime0: f64, c: f64, lambda: f64) -> (f64, f64) {
    Dispersion::continuous(k, fprime0).d_derivatives(c, lambda)
}

pub fn critical(k: &Kernel, fprime0: f64) -> Result<DispersionReport> {
    Dispersion::continuous(k, fprime0).critical()
}

pub fn real_roots(k: &Kernel, fprime0: f64, c: f64) -> Result<RootPair> {
    Dispersion::continuous(k, fprime0).real_roots(c)
}

pub fn complex_branch_subcritical(k: &Kernel, fprime0: f64, c: f64) -> Result<ComplexRoot> {
    Dispersion::continuous(k, fprime0).complex_branch_subcritical(c, true)
}

pub fn complex_branch_shifted(k: &Kernel, fprime0: f64, mu: f64) -> Result<(Complex64, Complex64)> {
    Dispersion::continuous(k, fprime0).complex_branch_shifted(mu)
}

/// `omega_0(lambda) = int K(y) (1 - cos(lambda y)) dy`.
pub fn omega0(k: &Kernel, lambda: f64) -> f64 {
    k.integrate(|y| one_m_cos(lambda * y))
}

/// Speed `c` at which a narrow kernel with second moment `m2` behaves like `m2/2` times the Laplacian.
pub fn laplacian_speed(second_moment: f64, fprime0: f64) -> f64 {
    (2.0 * second_moment * fprime0).sqrt()
}

/// Sign change of `f` located by bisection, exposed for oracles in tests.
pub fn bracket_root(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (x, y) = bisect(f, a, b, tol);
    0.5 * (x + y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, Shape};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn indicator() -> Kernel {
        make_kernel(&Shape::Indicator, 1.0, true).unwrap()
    }

    fn cosine() -> Kernel {
        make_kernel(&Shape::CosineBump, 1.0, true).unwrap()
    }

    /// `c(lambda) = sinh(lambda) / lambda^2` for the unit indicator kernel and f'(0) = 1.
    fn indicator_speed(l: f64) -> f64 {
        l.sinh() / (l * l)
    }

    #[test]
    fn value_at_zero_is_slope() {
        for k in [indicator(), cosine()] {
            assert_eq!(d(&k, 0.7, 3.0, 0.0), 0.7);
        }
    }

    #[test]
    fn indicator_closed_form() {
        assert_relative_eq!(d(&indicator(), 1.0, 0.0, 1.0), 1f64.sinh(), max_relative = 1e-12);
    }

    #[test]
    fn linear_in_speed() {
        let k = cosine();
        for &l in &[0.1, 1.0, 3.7] {
            let diff = d(&k, 1.0, 0.4, l) - d(&k, 1.0, 1.9, l);
            assert_relative_eq!(diff, 1.5 * l, max_relative = 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = cosine();
        let (c, f0) = (0.8, 1.0);
        for &l in &[0.3, 1.5, 4.0] {
            let e = 1e-4;
            let fd1 = (d(&k, f0, c, l + e) - d(&k, f0, c, l - e)) / (2.0 * e);
            let fd2 = (d(&k, f0, c, l + e) - 2.0 * d(&k, f0, c, l) + d(&k, f0, c, l - e)) / (e * e);
            let (d1, d2) = d_derivatives(&k, f0, c, l);
            assert_relative_eq!(d1, fd1, max_relative = 1e-6);
            assert_relative_eq!(d2, fd2, max_relative = 1e-6);
        }
        let (d1, d2) = d_derivatives(&k, f0, c, 0.0);
        assert_eq!(d1, -c);
        assert_relative_eq!(d2, k.moment(2), max_relative = 1e-12);
    }

    #[test]
    fn third_derivative_matches_finite_difference() {
        let disp = Dispersion::continuous(&cosine(), 1.0);
        let (l, e) = (2.0, 1e-4);
        let fd = (disp.d_derivatives(0.5, l + e).1 - disp.d_derivatives(0.5, l - e).1) / (2.0 * e);
        assert_relative_eq!(disp.d_third(0.5, l), fd, max_relative = 1e-6);
    }

    #[test]
    fn critical_matches_dense_scan() {
        let rep = critical(&indicator(), 1.0).unwrap();
        let best = (1..=100_000)
            .map(|i| indicator_speed(20.0 * i as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!((rep.c_k - best).abs() <= 1e-6);
        // lambda_* solves lambda = 2 tanh(lambda).
        let ls = bracket_root(|l| l - 2.0 * l.tanh(), 1.0, 3.0, 1e-15);
        assert_relative_eq!(rep.lambda_star, ls, max_relative = 1e-10);
        let disp = Dispersion::continuous(&indicator(), 1.0);
        assert!(disp.d(rep.c_k, rep.lambda_star).abs() <= 1e-10);
        assert!(disp.d_derivatives(rep.c_k, rep.lambda_star).0.abs() <= 1e-10);
        assert!(rep.d2 > 0.0 && rep.d3 > 0.0);
        assert_relative_eq!(rep.d_star, crate::kernels::tilted_diffusivity(&indicator(), rep.lambda_star), max_relative = 1e-12);
    }

    #[test]
    fn nonpositive_slope_has_no_minimum() {
        assert!(matches!(critical(&indicator(), 0.0), Err(Error::NoMinimum(_))));
        assert!(matches!(critical(&indicator(), -1.0), Err(Error::NoMinimum(_))));
    }

    #[test]
    fn speed_increases_with_slope() {
        let k = cosine();
        let a = critical(&k, 1.0).unwrap().c_k;
        let b = critical(&k, 2.0).unwrap().c_k;
        assert!(b > a);
    }

    #[test]
    fn scaled_kernel_approaches_laplacian_speed() {
        let base = cosine();
        let mut last = f64::INFINITY;
        for (eps, tol) in [(0.2, 0.05), (0.1, 0.02), (0.05, 0.01)] {
            let k = base.scaled(eps).unwrap();
            let f0 = eps * eps;
            let ck = critical(&k, f0).unwrap().c_k;
            // Rescaled speed: c_K / eps against the narrow-kernel value eps * sqrt(2 m2 f'(0)).
            let rel = (ck / eps / (eps * laplacian_speed(base.moment(2), 1.0)) - 1.0).abs();
            assert!(rel < tol, "eps {eps}: {rel}");
            assert!(rel < last);
            last = rel;
        }
    }

    #[test]
    fn real_roots_against_scan() {
        let k = indicator();
        let rep = critical(&k, 1.0).unwrap();
        let c = 1.5 * rep.c_k;
        let roots = real_roots(&k, 1.0, c).unwrap();
        // Scan oracle: sign changes of sinh(l)/l - c l on a fine grid.
        let f = |l: f64| l.sinh() / l - c * l;
        let mut changes = vec![];
        let n = 200_000;
        for i in 1..n {
            let (a, b) = (20.0 * i as f64 / n as f64, 20.0 * (i + 1) as f64 / n as f64);
            if f(a) * f(b) <= 0.0 {
                changes.push(bracket_root(f, a, b, 1e-15));
            }
        }
        assert_eq!(changes.len(), 2);
        assert_relative_eq!(roots.lambda_minus, changes[0], max_relative = 1e-10);
        assert_relative_eq!(roots.lambda_plus, changes[1], max_relative = 1e-10);
        let disp = Dispersion::continuous(&k, 1.0);
        assert!(disp.d(c, roots.lambda_minus).abs() <= 1e-10);
        assert!(disp.d(c, roots.lambda_plus).abs() <= 1e-10);
    }

    #[test]
    fn near_critical_roots_merge() {
        let k = indicator();
        let rep = critical(&k, 1.0).unwrap();
        let r = real_roots(&k, 1.0, rep.c_k + 1e-9).unwrap();
        assert!((r.lambda_minus - rep.lambda_star).abs() < 1e-3);
        assert!((r.lambda_plus - rep.lambda_star).abs() < 1e-3);
        assert!(matches!(real_roots(&k, 1.0, 0.9 * rep.c_k), Err(Error::SubcriticalSpeed { .. })));
    }

    #[test]
    fn subcritical_branch() {
        let k = indicator();
        let rep = critical(&k, 1.0).unwrap();
        let at = complex_branch_subcritical(&k, 1.0, rep.c_k).unwrap();
        assert_eq!(at.lambda.im, 0.0);
        assert_eq!(at.lambda.re, rep.lambda_star);
        let c = 0.99 * rep.c_k;
        let r = complex_branch_subcritical(&k, 1.0, c).unwrap();
        assert!(!r.fallback_used);
        assert!(r.residual <= 1e-10);
        let leading = (2.0 * (rep.c_k - c) * rep.lambda_star / rep.d2).sqrt();
        assert!((r.lambda.im - leading).abs() <= 0.1 * leading);
        let disp = Dispersion::continuous(&k, 1.0);
        assert!(disp.complex_residual(c, 0.0, r.lambda) <= 1e-10);
    }

    #[test]
    fn shifted_branch() {
        let k = indicator();
        let rep = critical(&k, 1.0).unwrap();
        let (a, b) = complex_branch_shifted(&k, 1.0, 0.0).unwrap();
        assert_eq!(a, b);
        let mu = 1e-4;
        let (p, m) = complex_branch_shifted(&k, 1.0, mu).unwrap();
        assert_eq!(p, m.conj());
        let first = rep.d3 * mu / (3.0 * rep.d2 * rep.d2);
        assert!(((p.re - rep.lambda_star) - first).abs() <= 0.2 * first);
        assert!(Dispersion::continuous(&k, 1.0).complex_residual(rep.c_k, mu, p) <= 1e-10);
    }

    #[test]
    fn omega0_properties() {
        let k = indicator();
        assert_eq!(omega0(&k, 0.0), 0.0);
        let l = 1e-3;
        assert_relative_eq!(omega0(&k, l), l * l / 6.0, max_relative = 1e-6);
        for i in 0..200 {
            assert!(omega0(&k, 0.37 * i as f64) <= 2.0 * k.mass());
        }
    }

    #[test]
    fn discrete_relation_tracks_continuous() {
        let k = indicator();
        let cont = critical(&k, 1.0).unwrap();
        let mut errs = vec![];
        for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let disc = Dispersion::discrete(&k.sample_weights(h).unwrap(), 1.0).unwrap().critical().unwrap();
            errs.push((disc.c_k - cont.c_k).abs());
        }
        assert!(errs[0] < 0.01);
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
    }

    proptest! {
        #[test]
        fn c_of_lambda_minimal_at_star(f0 in 0.05f64..3.0, l in 0.05f64..8.0) {
            let disp = Dispersion::continuous(&cosine(), f0);
            let rep = disp.critical().unwrap();
            prop_assert!((disp.speed_of(rep.lambda_star) - rep.c_k).abs() <= 1e-12 * rep.c_k);
            if (l - rep.lambda_star).abs() > 1e-3 {
                prop_assert!(disp.speed_of(l) > rep.c_k);
            }
        }

        #[test]
        fn roots_monotone_in_speed(f0 in 0.1f64..2.0, a in 1.01f64..3.0, b in 1.01f64..3.0) {
            let disp = Dispersion::continuous(&indicator(), f0);
            let rep = disp.critical().unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-3);
            let r1 = disp.real_roots_with(&rep, lo * rep.c_k).unwrap();
            let r2 = disp.real_roots_with(&rep, hi * rep.c_k).unwrap();
            prop_assert!(r2.lambda_minus < r1.lambda_minus);
            prop_assert!(r2.lambda_plus > r1.lambda_plus);
            prop_assert!(r1.lambda_minus < rep.lambda_star && rep.lambda_star < r1.lambda_plus);
            prop_assert!(disp.d(lo * rep.c_k, r1.lambda_minus).abs() <= 1e-10);
            prop_assert!(disp.d(lo * rep.c_k, r1.lambda_plus).abs() <= 1e-10 * disp.g(r1.lambda_plus)[0].max(1.0));
        }
    }
}
