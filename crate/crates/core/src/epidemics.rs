//! SI dynamics and the Kendall model in cumulative form,
//! `u_t = S0 (1 - e^{-K * u}) - alpha u + I0(x)`, with `u` the number of past infections.

use serde::{Deserialize, Serialize};

use crate::cauchy::{run, EvolutionConfig, Model, Simulation, Stepper};
use crate::dispersion::{Dispersion, DispersionReport};
use crate::error::{Error, Result};
use crate::field::{convolve_direct, Field};
use crate::kernels::Kernel;
use crate::reactions::kendall_root;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicParams {
    #[serde(rename = "S0")]
    pub s0: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl EpidemicParams {
    pub fn new(s0: f64, beta: f64, alpha: f64) -> Result<EpidemicParams> {
        let p = EpidemicParams { s0, beta, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.s0) && ok(self.beta) && ok(self.alpha)) {
            return Err(Error::BadParams("S0, beta and alpha must be positive".into()));
        }
        Ok(())
    }
}

/// Basic reproduction number `S0 beta / alpha`.
pub fn r0(p: &EpidemicParams) -> f64 {
    p.s0 * p.beta / p.alpha
}

/// Positive root of `alpha u = S0 (1 - e^{-beta u})`.
pub fn u_star(p: &EpidemicParams) -> Result<f64> {
    p.validate()?;
    kendall_root(p.s0, p.beta, p.alpha, 0.0).map_err(|_| Error::SubcriticalR0 { r0: r0(p) })
}

/// Final size `u(+inf)` of the homogeneous epidemic started from `I0 > 0`.
pub fn final_size(p: &EpidemicParams, i0: f64) -> Result<f64> {
    p.validate()?;
    if !(i0 > 0.0) {
        return Err(Error::BadParams("initial infected density must be positive".into()));
    }
    kendall_root(p.s0, p.beta, p.alpha, i0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiTrajectory {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    /// `int_0^t I`, carried along with `(S, I)`.
    pub u_integral: Vec<f64>,
    /// Solution of the scalar cumulative equation.
    pub u: Vec<f64>,
}

impl SiTrajectory {
    /// Largest relative gap between the two cumulative curves.
    pub fn agreement(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.u_integral)
            .filter(|(a, _)| **a > 0.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs() / a.abs()))
    }
}

fn rk4<const N: usize>(y: &mut [f64; N], dt: f64, f: impl Fn(&[f64; N]) -> [f64; N]) {
    let add = |y: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|j| y[j] + s * k[j]) };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, 0.5 * dt));
    let k3 = f(&add(y, &k2, 0.5 * dt));
    let k4 = f(&add(y, &k3, dt));
    for j in 0..N {
        y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

/// `S' = -beta S I`, `I' = beta S I - alpha I` alongside `u' = S0 (1 - e^{-beta u}) - alpha u + I0`.
pub fn si_ode(p: &EpidemicParams, i0: f64, t_end: f64, dt: f64) -> Result<SiTrajectory> {
    p.validate()?;
    if !(i0 >= 0.0 && t_end > 0.0 && dt > 0.0) {
        return Err(Error::BadParams("need I0 >= 0, t_end > 0 and dt > 0".into()));
    }
    // Explicit RK4 is stable for dt * rate below about 2.78.
    let rate = p.beta * (p.s0 + i0) + p.alpha + p.s0 * p.beta;
    if dt * rate > 2.5 {
        return Err(Error::StepTooLarge { dt, bound: 2.5 / rate });
    }
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let EpidemicParams { s0, beta, alpha } = *p;
    let mut y = [s0, i0, 0.0];
    let mut u = [0.0];
    let mut tr = SiTrajectory { t: vec![0.0], s: vec![s0], i: vec![i0], u_integral: vec![0.0], u: vec![0.0] };
    for n in 1..=steps {
        rk4(&mut y, dt, |y| [-beta * y[0] * y[1], beta * y[0] * y[1] - alpha * y[1], y[1]]);
        rk4(&mut u, dt, |u| [-s0 * (-beta * u[0]).exp_m1() - alpha * u[0] + i0]);
        if !(y.iter().all(|v| v.is_finite()) && u[0].is_finite()) {
            return Err(Error::Instability { t: n as f64 * dt, index: 0, value: f64::NAN });
        }
        tr.t.push(n as f64 * dt);
        tr.s.push(y[0]);
        tr.i.push(y[1]);
        tr.u_integral.push(y[2]);
        tr.u.push(u[0]);
    }
    Ok(tr)
}

fn check_kernel(p: &EpidemicParams, k: &Kernel) -> Result<()> {
    if (k.mass() - p.beta).abs() > 1e-9 * p.beta {
        return Err(Error::BadParams(format!("kernel mass {} must equal beta = {}", k.mass(), p.beta)));
    }
    Ok(())
}

/// Dispersion data of the linearization `v_t + S0 (beta v - K * v) = alpha (R0 - 1) v`.
pub fn linear_spread(p: &EpidemicParams, k: &Kernel) -> Result<DispersionReport> {
    check_kernel(p, k)?;
    let f0 = p.alpha * (r0(p) - 1.0);
    if f0 <= 0.0 {
        return Err(Error::SubcriticalR0 { r0: r0(p) });
    }
    Dispersion::continuous(&k.with_mass(p.s0 * p.beta), f0).critical()
}

#[derive(Clone, Debug)]
pub struct KendallRun {
    pub simulation: Simulation,
    /// Level tracked by the front trace: `u_*/2`, or `NaN` when `R0 <= 1`.
    pub threshold: f64,
    /// `u` never decreased between recorded states (slack `1e-12`).
    pub monotone: bool,
    /// `min` and `max` of `S = S0 e^{-K * u}` over the recorded states.
    pub susceptible_range: (f64, f64),
}

/// Cumulative Kendall evolution from `u = 0` with source `i0`; the kernel carries mass `beta`.
pub fn kendall_simulate(p: &EpidemicParams, i0: &Field, k: &Kernel, cfg: &EvolutionConfig) -> Result<KendallRun> {
    p.validate()?;
    check_kernel(p, k)?;
    if i0.values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::BadParams("initial infected density must be nonnegative".into()));
    }
    let n = i0.len();
    let edge = n / 20 + 1;
    if i0.values[..edge].iter().chain(&i0.values[n - edge..]).any(|v| *v != 0.0) {
        return Err(Error::BadParams("initial infected density must vanish near the grid ends".into()));
    }
    let threshold = u_star(p).map(|u| 0.5 * u).unwrap_or(f64::NAN);
    let stencil = k.sample_weights(i0.h)?;
    let model = Model::Kendall { stencil: stencil.clone(), s0: p.s0, alpha: p.alpha, source: i0.values.clone() };
    let mut cfg = cfg.clone();
    cfg.snapshot_every = Some(cfg.snapshot_every.unwrap_or(cfg.record_every));
    let mut stepper = Stepper::new(model, i0.h, (0.0, 0.0), &cfg, None)?;
    let start = Field::new(i0.x0, i0.h, vec![0.0; n], 0.0, 0.0);
    let thresholds: Vec<f64> = if threshold.is_finite() { vec![threshold] } else { vec![] };
    let simulation = run(&mut stepper, &start, &cfg, &thresholds)?;
    let mut monotone = true;
    let mut s_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut prev: Option<&Field> = None;
    for snap in &simulation.snapshots {
        if let Some(q) = prev {
            monotone &= snap.field.values.iter().zip(&q.values).all(|(a, b)| *a >= b - 1e-12);
        }
        let conv = convolve_direct(&snap.field, &stencil);
        for c in &conv.values {
            let s = p.s0 * (-c).exp();
            s_range = (s_range.0.min(s), s_range.1.max(s));
        }
        prev = Some(&snap.field);
    }
    Ok(KendallRun { simulation, threshold, monotone, susceptible_range: s_range })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub field: Field,
    pub iterations: usize,
    pub residual: f64,
    /// Every iterate lay above the previous one.
    pub monotone: bool,
}

/// Minimal solution of `alpha u = S0 (1 - e^{-K * u}) + I0` by the monotone map from `seed` (zero by default).
///
/// Outside the grid `u` is held at `u_*` when `R0 > 1` and at zero otherwise.
pub fn kendall_steady(p: &EpidemicParams, i0: &Field, k: &Kernel, seed: Option<&Field>) -> Result<SteadyState> {
    p.validate()?;
    check_kernel(p, k)?;
    let far = if r0(p) > 1.0 { u_star(p)? } else { 0.0 };
    if far == 0.0 && i0.values.iter().all(|v| *v == 0.0) {
        return Err(Error::BadParams("steady state needs R0 > 1 or a nonzero source".into()));
    }
    let stencil = k.sample_weights(i0.h)?;
    let mut u = match seed {
        Some(s) => Field::new(i0.x0, i0.h, s.values.clone(), far, far),
        None => Field::new(i0.x0, i0.h, vec![0.0; i0.len()], far, far),
    };
    let map = |u: &Field| -> Vec<f64> {
        let c = convolve_direct(u, &stencil);
        c.values.iter().zip(&i0.values).map(|(c, s)| (-p.s0 * (-c).exp_m1() + s) / p.alpha).collect()
    };
    let mut monotone = true;
    for it in 1..=200_000 {
        let next = map(&u);
        monotone &= next.iter().zip(&u.values).all(|(a, b)| *a >= b - 1e-14 * b.abs().max(1.0));
        let change = next.iter().zip(&u.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        u.values = next;
        if change < 1e-13 {
            let residual = map(&u).iter().zip(&u.values).fold(0.0f64, |m, (a, b)| m.max(p.alpha * (a - b).abs()));
            if residual < 1e-10 {
                return Ok(SteadyState { field: u, iterations: it, residual, monotone });
            }
        }
    }
    Err(Error::NoConvergence { iterations: 200_000, change: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, Shape};

    #[test]
    fn reproduction_number() {
        assert_eq!(r0(&EpidemicParams::new(2.0, 1.0, 1.0).unwrap()), 2.0);
        assert_eq!(r0(&EpidemicParams::new(1.0, 1.0, 2.0).unwrap()), 0.5);
        let a = r0(&EpidemicParams::new(1.5, 0.7, 0.9).unwrap());
        let b = r0(&EpidemicParams::new(3.0, 0.7, 0.9).unwrap());
        assert!((b - 2.0 * a).abs() < 1e-15);
        assert!(EpidemicParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn u_star_matches_fixed_point_iteration() {
        let p = EpidemicParams::new(2.0, 1.0, 1.0).unwrap();
        let u = u_star(&p).unwrap();
        let mut v = 1.0f64;
        for _ in 0..200 {
            v = 2.0 * (1.0 - (-v).exp());
        }
        assert!((u - v).abs() < 1e-12);
        assert_eq!(
            u_star(&EpidemicParams::new(1.0, 1.0, 1.0).unwrap()),
            Err(Error::SubcriticalR0 { r0: 1.0 })
        );
        let mut last = 0.0;
        for s0 in [1.2, 1.5, 2.0, 3.0, 5.0] {
            let u = u_star(&EpidemicParams::new(s0, 1.0, 1.0).unwrap()).unwrap();
            assert!(u > last);
            last = u;
        }
    }

    #[test]
    fn cumulative_equation_integrates_infected() {
        let p = EpidemicParams::new(2.0, 1.0, 1.0).unwrap();
        let tr = si_ode(&p, 1e-3, 60.0, 0.01).unwrap();
        assert!(tr.agreement() < 1e-6, "{}", tr.agreement());
        let u_inf = final_size(&p, 1e-3).unwrap();
        assert!((tr.u.last().unwrap() - u_inf).abs() < 1e-6);
        assert!(si_ode(&p, 1e-3, 10.0, 5.0).is_err());
    }

    #[test]
    fn steady_constant_fixed_point() {
        let p = EpidemicParams::new(2.0, 1.0, 1.0).unwrap();
        let k = make_kernel(&Shape::Indicator, 1.0, true).unwrap();
        let us = u_star(&p).unwrap();
        let i0 = Field::new(-10.0, 1.0 / 8.0, vec![0.0; 161], 0.0, 0.0);
        let seed = Field::new(-10.0, 1.0 / 8.0, vec![us; 161], us, us);
        let st = kendall_steady(&p, &i0, &k, Some(&seed)).unwrap();
        assert!(st.field.values.iter().all(|v| (v - us).abs() < 1e-12));
    }

    #[test]
    fn steady_with_source_sits_above_u_star() {
        let p = EpidemicParams::new(2.0, 1.0, 1.0).unwrap();
        let k = make_kernel(&Shape::Indicator, 1.0, true).unwrap();
        let us = u_star(&p).unwrap();
        let i0 = Field::from_fn(-30.0, 1.0 / 8.0, 481, (0.0, 0.0), |x| if x.abs() < 1.0 { 0.2 } else { 0.0 });
        let st = kendall_steady(&p, &i0, &k, None).unwrap();
        assert!(st.monotone);
        assert!(st.field.values.iter().all(|v| *v >= us - 1e-12));
        assert!((st.field.values[0] - us).abs() < 1e-6);
    }

    #[test]
    fn kernel_mass_must_be_beta() {
        let p = EpidemicParams::new(2.0, 0.5, 1.0).unwrap();
        let k = make_kernel(&Shape::Indicator, 1.0, true).unwrap();
        assert!(linear_spread(&p, &k).is_err());
        assert!(linear_spread(&p, &k.with_mass(0.5)).is_err(), "R0 = 1 has no spread");
        let p = EpidemicParams::new(4.0, 0.5, 1.0).unwrap();
        let rep = linear_spread(&p, &k.with_mass(0.5)).unwrap();
        assert!(rep.c_k > 0.0);
    }
}
