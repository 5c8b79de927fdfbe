//! Fourier-multiplier evolution for the tilted linear operator
//! `I_* v = -int K_*(x - y) (v(y) - v(x) - (y - x) v_x(x)) dy`, and its Gaussian limit.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::cauchy::{EvolutionConfig, Model, Stepper};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernels::{tilted_diffusivity, TiltedKernel};

/// `sin(x) - x` with a short series near zero.
fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x.sin() - x
    }
}

/// Tilted operator with its Fourier symbol cached per transform grid.
#[derive(Debug)]
pub struct TiltedProblem {
    pub kernel: TiltedKernel,
    pub d_star: f64,
    cache: Mutex<HashMap<(usize, u64), Arc<Vec<Complex64>>>>,
}

impl TiltedProblem {
    pub fn new(kernel: TiltedKernel) -> TiltedProblem {
        // Even moments are blind to the sign of the tilt.
        let d_star = tilted_diffusivity(&kernel.base, kernel.lambda);
        TiltedProblem { kernel, d_star, cache: Mutex::new(HashMap::new()) }
    }

    /// `m(xi) = int K_*(z) (1 - i xi z - e^{-i xi z}) dz`.
    pub fn symbol(&self, xi: f64) -> Complex64 {
        let l = self.kernel.lambda;
        let mut re = 0.0;
        let mut im = 0.0;
        for &(z, q) in self.kernel.base.nodes() {
            let (s, c) = ((l * z).sinh(), (l * z).cosh());
            let half = (0.5 * xi * z).sin();
            re += q * 2.0 * c * 2.0 * half * half;
            im += q * 2.0 * s * sin_minus_x(xi * z);
        }
        Complex64::new(re, im)
    }

    /// Angular frequencies of a length-`p` transform with spacing `h`.
    pub fn frequencies(p: usize, h: f64) -> Vec<f64> {
        (0..p)
            .map(|k| {
                let k = if k <= p / 2 { k as f64 } else { k as f64 - p as f64 };
                2.0 * PI * k / (p as f64 * h)
            })
            .collect()
    }

    fn symbol_on(&self, p: usize, h: f64) -> Result<Arc<Vec<Complex64>>> {
        let key = (p, h.to_bits());
        if let Some(s) = self.cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let xis = Self::frequencies(p, h);
        let sym: Vec<Complex64> = xis.iter().map(|&xi| self.symbol(xi)).collect();
        for (xi, m) in xis.iter().zip(&sym) {
            if m.re < -1e-12 {
                return Err(Error::DissipativityViolated { xi: *xi, value: m.re });
            }
        }
        let sym = Arc::new(sym);
        self.cache.lock().unwrap().insert(key, sym.clone());
        Ok(sym)
    }

    /// Symbol on the padded transform grid of a field with `n` points, checked for dissipativity.
    pub fn build_symbol(&self, n: usize, h: f64) -> Result<Vec<Complex64>> {
        self.symbol_on(2 * n, h).map(|s| s.to_vec())
    }
}

/// Tilted problem for `K_*` at the kernel's tilt.
pub fn build_symbol(tk: &TiltedKernel) -> TiltedProblem {
    TiltedProblem::new(tk.clone())
}

fn check_decay(v0: &Field) -> Result<()> {
    let n = v0.len();
    let edge = (n / 10).max(1);
    let worst = v0.values[..edge]
        .iter()
        .chain(&v0.values[n - edge..])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if worst >= 1e-8 {
        return Err(Error::DecayViolated { value: worst });
    }
    Ok(())
}

/// `e^{-t I_*} v0` on the grid of `v0`, by a zero-padded FFT of twice the length.
pub fn evolve(tp: &TiltedProblem, v0: &Field, t: f64) -> Result<Field> {
    check_decay(v0)?;
    spectral(tp, v0, t)
}

fn spectral(tp: &TiltedProblem, v0: &Field, t: f64) -> Result<Field> {
    if t == 0.0 {
        return Ok(v0.clone());
    }
    let n = v0.len();
    let p = 2 * n;
    let sym = tp.symbol_on(p, v0.h)?;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);
    let mut buf: Vec<Complex64> = v0.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(p, Complex64::new(0.0, 0.0));
    fwd.process(&mut buf);
    for (b, m) in buf.iter_mut().zip(sym.iter()) {
        *b *= (-t * m).exp();
    }
    inv.process(&mut buf);
    let scale = 1.0 / p as f64;
    let values = buf[..n].iter().map(|c| c.re * scale).collect();
    Ok(Field::new(v0.x0, v0.h, values, 0.0, 0.0))
}

/// Heat kernel with diffusivity `d`: `e^{-z^2 / (4 d t)} / sqrt(4 pi d t)`.
pub fn gaussian(d: f64, t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * d * t)).exp() / (4.0 * PI * d * t).sqrt()
}

/// `G(t) * v0` at every grid point, by direct summation.
pub fn gaussian_evolve(d: f64, v0: &Field, t: f64) -> Field {
    let support: Vec<(f64, f64)> = v0.xs().zip(&v0.values).filter(|(_, v)| **v != 0.0).map(|(x, v)| (x, *v)).collect();
    let values = v0.xs().map(|x| support.iter().map(|&(y, v)| v0.h * v * gaussian(d, t, x - y)).sum()).collect();
    Field::new(v0.x0, v0.h, values, 0.0, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianReport {
    pub t: f64,
    /// Sup of the difference on `|x| <= t^{1/2 + delta}`, relative to the Gaussian's sup.
    pub core_error: f64,
    pub tail_error: f64,
}

pub fn gaussian_compare(tp: &TiltedProblem, v0: &Field, t: f64, delta: f64) -> Result<GaussianReport> {
    if !(t >= 1.0) {
        return Err(Error::BadParams(format!("gaussian comparison needs t >= 1, got {t}")));
    }
    let v = evolve(tp, v0, t)?;
    let g = gaussian_evolve(tp.d_star, v0, t);
    let scale = g.sup_norm();
    let radius = t.powf(0.5 + delta);
    let (mut core, mut tail) = (0.0f64, 0.0f64);
    for (i, x) in v.xs().enumerate() {
        let e = (v.values[i] - g.values[i]).abs() / scale;
        if x.abs() <= radius {
            core = core.max(e);
        } else {
            tail = tail.max(e);
        }
    }
    Ok(GaussianReport { t, core_error: core, tail_error: tail })
}

/// Odd extension of half-line data sampled at `x = 0, h, 2h, ...`.
fn odd_extension(v0: &Field) -> Result<Field> {
    if v0.x0.abs() > 1e-12 * v0.h {
        return Err(Error::BadParams("half-line data must start at x = 0".into()));
    }
    let n = v0.len();
    let mut values = Vec::with_capacity(2 * n - 1);
    values.extend(v0.values[1..].iter().rev().map(|v| -v));
    values.push(0.0);
    values.extend_from_slice(&v0.values[1..]);
    Ok(Field::new(-(n as f64 - 1.0) * v0.h, v0.h, values, 0.0, 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirichletResult {
    /// Restriction to `x >= 0`.
    pub field: Field,
    /// Value at `x = 0`, zero for the exact Gaussian, not in general for `I_*`.
    pub boundary_value: f64,
}

/// Evolve the odd extension of `v0` and restrict to the half-line.
pub fn dirichlet_evolve(tp: &TiltedProblem, v0_halfline: &Field, t: f64) -> Result<DirichletResult> {
    let ext = odd_extension(v0_halfline)?;
    let out = evolve(tp, &ext, t)?;
    let n = v0_halfline.len();
    let values = out.values[n - 1..].to_vec();
    let boundary_value = values[0];
    Ok(DirichletResult { field: Field::new(0.0, v0_halfline.h, values, 0.0, 0.0), boundary_value })
}

/// Dirichlet heat solution `int_0^inf v0(y) (G(x - y) - G(x + y)) dy` at one point.
pub fn gaussian_dirichlet_at(d: f64, v0_halfline: &Field, t: f64, x: f64) -> f64 {
    v0_halfline
        .xs()
        .zip(&v0_halfline.values)
        .map(|(y, v)| v0_halfline.h * v * (gaussian(d, t, x - y) - gaussian(d, t, x + y)))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeLawReport {
    pub gamma: f64,
    pub first_moment: f64,
    /// `M1 / (2 sqrt(pi) d_*^{3/2})`.
    pub limit: f64,
    pub times: Vec<f64>,
    pub gaussian: Vec<f64>,
    pub tilted: Vec<f64>,
    pub gaussian_ratio: Vec<f64>,
    pub tilted_ratio: Vec<f64>,
}

/// `t^{3/2 - gamma} w(t, t^gamma)` for the Gaussian and the `I_*` Dirichlet evolutions.
pub fn slope_law_check(tp: &TiltedProblem, v0_halfline: &Field, t_list: &[f64], gamma: f64) -> Result<SlopeLawReport> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::BadParams(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) || t_list.first().is_some_and(|&t| t < 10.0) {
        return Err(Error::BadParams("times must increase and start at 10 or later".into()));
    }
    let m1: f64 = v0_halfline.xs().zip(&v0_halfline.values).map(|(y, v)| v0_halfline.h * y * v).sum();
    let limit = m1 / (2.0 * PI.sqrt() * tp.d_star.powf(1.5));
    let mut rep = SlopeLawReport {
        gamma,
        first_moment: m1,
        limit,
        times: t_list.to_vec(),
        gaussian: vec![],
        tilted: vec![],
        gaussian_ratio: vec![],
        tilted_ratio: vec![],
    };
    for &t in t_list {
        let x = t.powf(gamma);
        let w = t.powf(1.5 - gamma);
        let g = w * gaussian_dirichlet_at(tp.d_star, v0_halfline, t, x);
        let s = w * dirichlet_evolve(tp, v0_halfline, t)?.field.sample(x);
        rep.gaussian.push(g);
        rep.tilted.push(s);
        rep.gaussian_ratio.push(g / limit);
        rep.tilted_ratio.push(s / limit);
    }
    Ok(rep)
}

/// `v_t + I_* v = 0` by the explicit stepper: tilted weights plus transport at the tilted first moment.
pub fn cauchy_evolve(tk: &TiltedKernel, v0: &Field, t: f64, dt: f64) -> Result<Field> {
    let stencil = tk.sample_weights(v0.h)?;
    let c1 = stencil.moment(1);
    let cfg = EvolutionConfig {
        dt,
        t_end: t,
        frame_speed: c1,
        thresholds: vec![],
        bounds: (f64::NEG_INFINITY, f64::INFINITY),
        ..Default::default()
    };
    let mut s = Stepper::new(Model::Linear { stencil }, v0.h, (0.0, 0.0), &cfg, None)?;
    let sim = crate::cauchy::run(&mut s, v0, &cfg, &[])?;
    Ok(sim.final_state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::critical;
    use crate::kernels::{make_kernel, Kernel, Shape};

    fn indicator() -> Kernel {
        make_kernel(&Shape::Indicator, 1.0, true).unwrap()
    }

    fn problem() -> TiltedProblem {
        let k = indicator();
        let ls = critical(&k, 1.0).unwrap().lambda_star;
        build_symbol(&k.tilted(ls))
    }

    fn bump(n: usize, h: f64) -> Field {
        let x0 = -(n as f64 - 1.0) * h / 2.0;
        Field::from_fn(x0, h, n, (0.0, 0.0), |x| if x.abs() < 1.0 { (1.0 - x * x).powi(2) } else { 0.0 })
    }

    #[test]
    fn symbol_basics() {
        let tp = problem();
        assert_eq!(tp.symbol(0.0), Complex64::new(0.0, 0.0));
        for &xi in &[0.3, 1.7, 9.0] {
            let (a, b) = (tp.symbol(xi), tp.symbol(-xi));
            assert!((a.re - b.re).abs() < 1e-14 && (a.im + b.im).abs() < 1e-14);
        }
        // Real part against an independent quadrature of int K_* (1 - cos) on [-1, 1].
        let k = &tp.kernel;
        let xi = 2.3;
        let n = 20_000;
        let mut s = 0.0;
        for i in 0..=n {
            let z = -1.0 + 2.0 * i as f64 / n as f64;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * k.eval(z) * (1.0 - (xi * z).cos());
        }
        s *= 2.0 / n as f64 / 3.0;
        assert!((tp.symbol(xi).re - s).abs() < 1e-10);
    }

    #[test]
    fn symbol_small_frequency_is_diffusive() {
        let tp = problem();
        for &xi in &[1e-2, 3e-3, 1e-3] {
            let m = tp.symbol(xi);
            assert!((m.norm() / (tp.d_star * xi * xi) - 1.0).abs() < 5e-2);
        }
    }

    #[test]
    fn identity_semigroup_linearity() {
        let tp = problem();
        let v0 = bump(801, 1.0 / 16.0);
        assert_eq!(evolve(&tp, &v0, 0.0).unwrap(), v0);
        let once = evolve(&tp, &v0, 4.0).unwrap();
        let twice = evolve(&tp, &evolve(&tp, &v0, 2.0).unwrap(), 2.0).unwrap();
        for (a, b) in once.values.iter().zip(&twice.values) {
            assert!((a - b).abs() < 1e-10);
        }
        let mut w0 = v0.clone();
        for (i, v) in w0.values.iter_mut().enumerate() {
            *v = (-(v0.x(i) - 0.5).powi(2) * 4.0).exp();
        }
        let mut mix = v0.clone();
        for i in 0..mix.len() {
            mix.values[i] = 2.0 * v0.values[i] - 3.0 * w0.values[i];
        }
        let a = evolve(&tp, &v0, 3.0).unwrap();
        let b = evolve(&tp, &w0, 3.0).unwrap();
        let c = evolve(&tp, &mix, 3.0).unwrap();
        for i in 0..c.len() {
            assert!((c.values[i] - (2.0 * a.values[i] - 3.0 * b.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn untilted_mass_is_conserved() {
        let tp = build_symbol(&indicator().tilted(0.0));
        let v0 = bump(801, 1.0 / 16.0);
        let m0: f64 = v0.values.iter().sum();
        let m1: f64 = evolve(&tp, &v0, 5.0).unwrap().values.iter().sum();
        assert!(((m1 - m0) * v0.h).abs() < 1e-8);
    }

    #[test]
    fn non_decaying_data_rejected() {
        let tp = problem();
        let v0 = Field::from_fn(0.0, 0.1, 100, (0.0, 0.0), |_| 1.0);
        assert!(matches!(evolve(&tp, &v0, 1.0), Err(Error::DecayViolated { .. })));
        assert!(gaussian_compare(&tp, &bump(801, 1.0 / 16.0), 0.0, 0.1).is_err());
    }

    #[test]
    fn gaussian_dirichlet_vanishes_at_origin() {
        let v0 = Field::from_fn(0.0, 1.0 / 16.0, 200, (0.0, 0.0), |x| x * (-x).exp());
        assert_eq!(gaussian_dirichlet_at(0.4, &v0, 7.0, 0.0), 0.0);
    }

    #[test]
    fn dirichlet_is_linear() {
        let tp = problem();
        let v0 = Field::from_fn(0.0, 1.0 / 16.0, 1200, (0.0, 0.0), |x| x * (-x).exp());
        let mut v2 = v0.clone();
        v2.values.iter_mut().for_each(|v| *v *= 2.0);
        let a = dirichlet_evolve(&tp, &v0, 5.0).unwrap();
        let b = dirichlet_evolve(&tp, &v2, 5.0).unwrap();
        for (x, y) in a.field.values.iter().zip(&b.field.values) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }
}
