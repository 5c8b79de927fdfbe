//! Time integration of `u_t + (<K> u - K * u) - c u_x = f(u)` on a truncated line.
//!
//! Values beyond the grid are the field's clamps. Positions of level sets are reported
//! in the lab frame whatever the frame speed.

use serde::{Deserialize, Serialize};

use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::field::{convolve_fft, diffusion_into, extend, transport_add, Field};
use crate::kernels::{Kernel, Stencil};
use crate::reactions::Reaction;

/// Values this small are flushed to zero to keep subnormals out of the inner loops.
const FLUSH: f64 = 1e-200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Splitting,
    Rk4Mol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    Direct,
    Fft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub frame_speed: f64,
    /// Adds `-3 / (2 lambda_*) / t` to the frame speed for `t >= 1`.
    pub log_shift: bool,
    /// Used by `log_shift`; taken from the continuous dispersion relation when absent.
    pub lambda_star: Option<f64>,
    pub record_every: f64,
    pub thresholds: Vec<f64>,
    pub snapshot_every: Option<f64>,
    /// Values outside this interval abort the run.
    pub bounds: (f64, f64),
    pub convolution: ConvolutionMethod,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            scheme: Scheme::Rk4Mol,
            dt: 0.05,
            t_end: 10.0,
            frame_speed: 0.0,
            log_shift: false,
            lambda_star: None,
            record_every: 1.0,
            thresholds: vec![0.5],
            snapshot_every: None,
            bounds: (-0.1, 1.5),
            convolution: ConvolutionMethod::Direct,
        }
    }
}

/// Level-set positions `X_theta(t)` in the lab frame; `None` where no crossing exists.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontTrace {
    pub theta: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Option<f64>>,
}

impl FrontTrace {
    /// Samples where the level set was found.
    pub fn defined(&self) -> (Vec<f64>, Vec<f64>) {
        self.times
            .iter()
            .zip(&self.positions)
            .filter_map(|(t, x)| x.map(|x| (*t, x)))
            .unzip()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Field with `x0` shifted to lab coordinates.
    pub field: Field,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Warning {
    /// A sentinel at 10% or 90% of the domain left its clamp value by more than `1e-6`.
    DomainTooSmall { t: f64, right: bool, deviation: f64 },
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub snapshots: Vec<Snapshot>,
    pub traces: Vec<FrontTrace>,
    pub warnings: Vec<Warning>,
    /// State at `t_end` in frame coordinates.
    pub final_state: Field,
    /// Frame displacement at `t_end`: lab `x` = frame `x` + `shift`.
    pub shift: f64,
}

/// Right-hand side families handled by the stepper.
#[derive(Clone, Debug)]
pub enum Model {
    /// `W * u - m u + c D_h u + f(u)`.
    Reaction { stencil: Stencil, reaction: Reaction },
    /// `W * u - m u + c D_h u` (the stencil may be asymmetric).
    Linear { stencil: Stencil },
    /// Cumulative Kendall model `S0 (1 - e^{-W * u}) - alpha u + I0(x)`.
    Kendall { stencil: Stencil, s0: f64, alpha: f64, source: Vec<f64> },
}

impl Model {
    fn stencil(&self) -> &Stencil {
        match self {
            Model::Reaction { stencil, .. } | Model::Linear { stencil } | Model::Kendall { stencil, .. } => stencil,
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Model::Reaction { reaction, .. } => reaction.lipschitz(),
            Model::Linear { .. } => 0.0,
            Model::Kendall { stencil, s0, alpha, .. } => s0 * stencil.mass() + alpha,
        }
    }
}

/// Explicit one-step integrator for a [`Model`] on a fixed grid.
pub struct Stepper {
    model: Model,
    h: f64,
    clamps: (f64, f64),
    scheme: Scheme,
    method: ConvolutionMethod,
    frame_speed: f64,
    log_coefficient: f64,
    bounds: (f64, f64),
    fixed: Option<Vec<Option<f64>>>,
    pad: usize,
    ext: Vec<f64>,
    stages: [Vec<f64>; 5],
}

impl Stepper {
    pub fn new(model: Model, h: f64, clamps: (f64, f64), cfg: &EvolutionConfig, lambda_star: Option<f64>) -> Result<Stepper> {
        if matches!(model, Model::Linear { .. } | Model::Kendall { .. }) && cfg.scheme == Scheme::Splitting {
            return Err(Error::BadParams("splitting needs a reaction model".into()));
        }
        if (model.stencil().h - h).abs() > 1e-12 * h {
            return Err(Error::BadParams("stencil and grid steps differ".into()));
        }
        let log_coefficient = if cfg.log_shift {
            let l = lambda_star.ok_or_else(|| Error::BadParams("log_shift needs lambda_*".into()))?;
            1.5 / l
        } else {
            0.0
        };
        let pad = model.stencil().reach() + 2;
        let s = Stepper {
            model,
            h,
            clamps,
            scheme: cfg.scheme,
            method: cfg.convolution,
            frame_speed: cfg.frame_speed,
            log_coefficient,
            bounds: cfg.bounds,
            fixed: None,
            pad,
            ext: Vec::new(),
            stages: Default::default(),
        };
        let bound = s.stable_dt();
        if !(cfg.dt > 0.0) || cfg.dt > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt: cfg.dt, bound });
        }
        Ok(s)
    }

    /// Largest admissible step `0.4 / (<K> + Lip + |c| / h)`.
    pub fn stable_dt(&self) -> f64 {
        let c = self.frame_speed.abs().max((self.frame_speed - self.log_coefficient).abs());
        0.4 / (self.model.stencil().mass().abs() + self.model.lipschitz() + c / self.h)
    }

    /// Prescribe values at some grid points (held fixed at every stage).
    pub fn set_fixed(&mut self, fixed: Vec<Option<f64>>) {
        self.fixed = Some(fixed);
    }

    pub fn frame_speed_at(&self, t: f64) -> f64 {
        if self.log_coefficient != 0.0 && t >= 1.0 {
            self.frame_speed - self.log_coefficient / t
        } else {
            self.frame_speed
        }
    }

    /// `int_0^t c(s) ds`.
    pub fn frame_shift(&self, t: f64) -> f64 {
        self.frame_speed * t - self.log_coefficient * t.max(1.0).ln()
    }

    /// Number of leading entries that can be nonzero in the right-hand side.
    fn active_len(&self, u: &[f64]) -> usize {
        let n = u.len();
        if self.clamps.1 != 0.0 || self.method == ConvolutionMethod::Fft {
            return n;
        }
        let last = match u.iter().rposition(|&v| v != 0.0) {
            Some(i) => i + 1,
            None => 0,
        };
        let mut upto = (last + self.pad + 1).min(n);
        if let Model::Kendall { source, .. } = &self.model {
            if let Some(i) = source.iter().rposition(|&v| v != 0.0) {
                upto = upto.max(i + 1);
            }
        }
        upto
    }

    /// `out = W * u - m u` (diffusion only, no transport or reaction).
    fn diffusion(&mut self, u: &[f64], upto: usize, out: &mut [f64]) {
        let st = self.model.stencil();
        match self.method {
            ConvolutionMethod::Direct => {
                extend(u, self.clamps, self.pad, &mut self.ext);
                diffusion_into(st, &self.ext, self.pad, upto, out);
            }
            ConvolutionMethod::Fft => {
                let f = Field::new(0.0, self.h, u.to_vec(), self.clamps.0, self.clamps.1);
                let conv = convolve_fft(&f, st);
                let m = st.mass();
                for i in 0..upto {
                    out[i] = conv.values[i] - m * u[i];
                }
                extend(u, self.clamps, self.pad, &mut self.ext);
            }
        }
    }

    /// Linear part: diffusion plus frame transport.
    fn linear_rhs(&mut self, t: f64, u: &[f64], upto: usize, out: &mut [f64]) {
        self.diffusion(u, upto, out);
        let c = self.frame_speed_at(t);
        transport_add(c, self.h, &self.ext, self.pad, upto, out);
    }

    /// Full right-hand side.
    pub fn rhs(&mut self, t: f64, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let upto = self.active_len(u);
        self.linear_rhs(t, u, upto, out);
        match &self.model {
            Model::Reaction { reaction, .. } => {
                for i in 0..upto {
                    out[i] += reaction.f(u[i]);
                }
            }
            Model::Linear { .. } => {}
            Model::Kendall { stencil, s0, alpha, source } => {
                let m = stencil.mass();
                for i in 0..upto {
                    let conv = out[i] + m * u[i];
                    out[i] = -s0 * (-conv).exp_m1() - alpha * u[i] + source[i];
                }
            }
        }
        out[upto..n].iter_mut().for_each(|o| *o = 0.0);
        self.zero_fixed(out);
    }

    fn zero_fixed(&self, out: &mut [f64]) {
        if let Some(fixed) = &self.fixed {
            for (o, f) in out.iter_mut().zip(fixed) {
                if f.is_some() {
                    *o = 0.0;
                }
            }
        }
    }

    fn apply_fixed(&self, u: &mut [f64]) {
        if let Some(fixed) = &self.fixed {
            for (v, f) in u.iter_mut().zip(fixed) {
                if let Some(x) = f {
                    *v = *x;
                }
            }
        }
    }

    /// Advance `u` from `t` to `t + dt`.
    pub fn step(&mut self, u: &mut [f64], t: f64, dt: f64) -> Result<()> {
        self.apply_fixed(u);
        match self.scheme {
            Scheme::Rk4Mol => self.rk4(u, t, dt),
            Scheme::Splitting => self.strang(u, t, dt),
        }
        self.apply_fixed(u);
        for (index, v) in u.iter_mut().enumerate() {
            if !v.is_finite() || *v < self.bounds.0 || *v > self.bounds.1 {
                return Err(Error::Instability { t: t + dt, index, value: *v });
            }
            if v.abs() < FLUSH {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn rk4(&mut self, u: &mut [f64], t: f64, dt: f64) {
        let n = u.len();
        let mut st = std::mem::take(&mut self.stages);
        for s in st.iter_mut() {
            s.resize(n, 0.0);
        }
        let [k1, k2, k3, k4, y] = &mut st;
        self.rhs(t, u, k1);
        for i in 0..n {
            y[i] = u[i] + 0.5 * dt * k1[i];
        }
        self.rhs(t + 0.5 * dt, y, k2);
        for i in 0..n {
            y[i] = u[i] + 0.5 * dt * k2[i];
        }
        self.rhs(t + 0.5 * dt, y, k3);
        for i in 0..n {
            y[i] = u[i] + dt * k3[i];
        }
        self.rhs(t + dt, y, k4);
        for i in 0..n {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        self.stages = st;
    }

    /// Half linear step (Heun), full reaction step (SSP-RK3, pointwise), half linear step.
    fn strang(&mut self, u: &mut [f64], t: f64, dt: f64) {
        self.heun_linear(u, t, 0.5 * dt);
        if let Model::Reaction { reaction, .. } = &self.model {
            let r = reaction.clone();
            let fixed = self.fixed.clone();
            for (i, v) in u.iter_mut().enumerate() {
                if fixed.as_ref().is_some_and(|f| f[i].is_some()) {
                    continue;
                }
                let a = *v;
                let b = a + dt * r.f(a);
                let c = 0.75 * a + 0.25 * (b + dt * r.f(b));
                *v = a / 3.0 + 2.0 / 3.0 * (c + dt * r.f(c));
            }
        }
        self.heun_linear(u, t + 0.5 * dt, 0.5 * dt);
    }

    fn heun_linear(&mut self, u: &mut [f64], t: f64, dt: f64) {
        let n = u.len();
        let mut st = std::mem::take(&mut self.stages);
        for s in st.iter_mut() {
            s.resize(n, 0.0);
        }
        let [k1, k2, _, _, y] = &mut st;
        let upto = self.active_len(u);
        self.linear_rhs(t, u, upto, k1);
        k1[upto..].iter_mut().for_each(|v| *v = 0.0);
        self.zero_fixed(k1);
        for i in 0..n {
            y[i] = u[i] + dt * k1[i];
        }
        let upto = self.active_len(y);
        self.linear_rhs(t + dt, y, upto, k2);
        k2[upto..].iter_mut().for_each(|v| *v = 0.0);
        self.zero_fixed(k2);
        for i in 0..n {
            u[i] += 0.5 * dt * (k1[i] + k2[i]);
        }
        self.stages = st;
    }
}

fn check_config(cfg: &EvolutionConfig) -> Result<()> {
    if !(cfg.t_end >= 0.0 && cfg.t_end.is_finite()) {
        return Err(Error::BadParams(format!("t_end must be nonnegative, got {}", cfg.t_end)));
    }
    if !(cfg.record_every > 0.0) {
        return Err(Error::BadParams("record_every must be positive".into()));
    }
    if let Some(&th) = cfg.thresholds.iter().find(|&&th| !(th > 0.0 && th < 1.0)) {
        return Err(Error::BadParams(format!("threshold {th} outside (0, 1)")));
    }
    Ok(())
}

fn check_field(field: &Field, st: &Stencil) -> Result<()> {
    let need = 2 * st.reach() + 16;
    if field.len() < need {
        return Err(Error::GridTooSmall(format!("{} points, need at least {need}", field.len())));
    }
    if let Some(i) = field.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::BadParams(format!("initial value at index {i} is not finite")));
    }
    Ok(())
}

/// Drive a stepper from `initial` to `cfg.t_end`, recording traces and snapshots.
pub fn run(stepper: &mut Stepper, initial: &Field, cfg: &EvolutionConfig, thresholds: &[f64]) -> Result<Simulation> {
    check_config(cfg)?;
    let steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps > 0 { cfg.t_end / steps as f64 } else { 0.0 };
    let stride = |every: f64| ((every / dt.max(f64::MIN_POSITIVE)).round() as usize).max(1);
    let rec = stride(cfg.record_every);
    let snap = cfg.snapshot_every.map(stride);
    let mut u = initial.values.clone();
    let mut sim = Simulation {
        snapshots: vec![],
        traces: thresholds.iter().map(|&theta| FrontTrace { theta, times: vec![], positions: vec![] }).collect(),
        warnings: vec![],
        final_state: initial.clone(),
        shift: 0.0,
    };
    let mut warned = [false, false];
    let sentinels = [initial.len() / 10, initial.len() * 9 / 10];
    let mut record = |sim: &mut Simulation, u: &[f64], t: f64, shift: f64, snapshot: bool| {
        let f = Field::new(initial.x0, initial.h, u.to_vec(), initial.clamp_left, initial.clamp_right);
        for tr in &mut sim.traces {
            tr.times.push(t);
            tr.positions.push(f.level_crossing(tr.theta).map(|x| x + shift));
        }
        for (side, &i) in sentinels.iter().enumerate() {
            let clamp = if side == 0 { f.clamp_left } else { f.clamp_right };
            let dev = (u[i] - clamp).abs();
            if dev >= 1e-6 && !warned[side] {
                warned[side] = true;
                sim.warnings.push(Warning::DomainTooSmall { t, right: side == 1, deviation: dev });
            }
        }
        if snapshot {
            let mut g = f;
            g.x0 += shift;
            sim.snapshots.push(Snapshot { t, field: g });
        }
    };
    record(&mut sim, &u, 0.0, 0.0, snap.is_some());
    for k in 0..steps {
        let t = k as f64 * dt;
        stepper.step(&mut u, t, dt)?;
        let n = k + 1;
        let t1 = n as f64 * dt;
        let shift = stepper.frame_shift(t1);
        let is_snap = snap.is_some_and(|s| n % s == 0 || n == steps);
        if n % rec == 0 || n == steps || is_snap {
            record(&mut sim, &u, t1, shift, is_snap);
        }
    }
    sim.shift = stepper.frame_shift(cfg.t_end);
    sim.final_state = Field::new(initial.x0, initial.h, u, initial.clamp_left, initial.clamp_right);
    Ok(sim)
}

fn lambda_star_for(k: &Kernel, r: &Reaction, cfg: &EvolutionConfig) -> Result<Option<f64>> {
    if !cfg.log_shift {
        return Ok(cfg.lambda_star);
    }
    match cfg.lambda_star {
        Some(l) => Ok(Some(l)),
        None => Ok(Some(Dispersion::continuous(k, r.slope_at_zero()).critical()?.lambda_star)),
    }
}

fn reaction_stepper(initial: &Field, k: &Kernel, r: &Reaction, cfg: &EvolutionConfig) -> Result<Stepper> {
    let stencil = k.sample_weights(initial.h)?;
    check_field(initial, &stencil)?;
    let ls = lambda_star_for(k, r, cfg)?;
    Stepper::new(
        Model::Reaction { stencil, reaction: r.clone() },
        initial.h,
        (initial.clamp_left, initial.clamp_right),
        cfg,
        ls,
    )
}

/// One step of the configured scheme from `t_now`.
pub fn step(field: &Field, k: &Kernel, r: &Reaction, cfg: &EvolutionConfig, t_now: f64) -> Result<Field> {
    let mut s = reaction_stepper(field, k, r, cfg)?;
    let mut out = field.clone();
    s.step(&mut out.values, t_now, cfg.dt)?;
    Ok(out)
}

/// Integrate to `cfg.t_end`, tracking `X_theta` for every threshold.
pub fn simulate(initial: &Field, k: &Kernel, r: &Reaction, cfg: &EvolutionConfig) -> Result<Simulation> {
    let mut s = reaction_stepper(initial, k, r, cfg)?;
    run(&mut s, initial, cfg, &cfg.thresholds)
}

/// Evolution with values prescribed outside `[a, b]`: `left_data` for `x < a`, `right_data` for `x > b`.
pub fn dirichlet_simulate(
    initial: &Field,
    k: &Kernel,
    r: &Reaction,
    cfg: &EvolutionConfig,
    left_data: impl Fn(f64) -> f64,
    right_data: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
) -> Result<Simulation> {
    let hw = k.halfwidth();
    if !(a < b) || a - hw < initial.x0 || b + hw > initial.x_max() {
        return Err(Error::GridTooSmall(format!("[a - R, b + R] = [{}, {}] not inside the grid", a - hw, b + hw)));
    }
    let mut s = reaction_stepper(initial, k, r, cfg)?;
    let fixed: Vec<Option<f64>> = initial
        .xs()
        .map(|x| {
            if x < a {
                Some(left_data(x))
            } else if x > b {
                Some(right_data(x))
            } else {
                None
            }
        })
        .collect();
    s.set_fixed(fixed);
    run(&mut s, initial, cfg, &cfg.thresholds)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HairTriggerReport {
    pub min_center: f64,
    pub first_time_above: Option<f64>,
}

/// Spread from a small cosine bump `height * (1 + cos(pi x / width)) / 2` on `|x| < width`.
pub fn hair_trigger_check(k: &Kernel, r: &Reaction, bump_height: f64, bump_width: f64, t_end: f64) -> Result<HairTriggerReport> {
    if !(bump_height >= 0.0 && bump_height <= 0.1) || !(bump_width > 0.0) {
        return Err(Error::BadParams("need bump height in [0, 0.1] and positive width".into()));
    }
    let ck = Dispersion::continuous(k, r.slope_at_zero()).critical()?.c_k;
    let h = k.halfwidth() / 16.0;
    let half = ck * t_end + bump_width + 10.0 + 4.0 * k.halfwidth();
    let n = (2.0 * half / h).ceil() as usize + 1;
    let init = Field::from_fn(-half, h, n, (0.0, 0.0), |x| {
        if x.abs() < bump_width {
            bump_height * 0.5 * (1.0 + (std::f64::consts::PI * x / bump_width).cos())
        } else {
            0.0
        }
    });
    let stencil = k.sample_weights(h)?;
    let probe = Stepper::new(
        Model::Reaction { stencil: stencil.clone(), reaction: r.clone() },
        h,
        (0.0, 0.0),
        &EvolutionConfig { dt: 1e-9, ..Default::default() },
        None,
    )?;
    let dt = probe.stable_dt().min(0.1);
    let cfg = EvolutionConfig { dt, t_end, record_every: 0.5, thresholds: vec![], ..Default::default() };
    let mut s = Stepper::new(Model::Reaction { stencil, reaction: r.clone() }, h, (0.0, 0.0), &cfg, None)?;
    let (i0, i1) = (init.index_of(-5.0), init.index_of(5.0));
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let mut u = init.values.clone();
    let mut first = None;
    let min_center = |u: &[f64]| u[i0..=i1].iter().copied().fold(f64::INFINITY, f64::min);
    for k in 0..steps {
        s.step(&mut u, k as f64 * dt, dt)?;
        if first.is_none() && min_center(&u) > 0.99 {
            first = Some((k + 1) as f64 * dt);
        }
    }
    Ok(HairTriggerReport { min_center: min_center(&u), first_time_above: first })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, Shape};

    fn indicator() -> Kernel {
        make_kernel(&Shape::Indicator, 1.0, true).unwrap()
    }

    fn step_field(n: usize, h: f64) -> Field {
        Field::from_fn(-(n as f64) * h * 0.3, h, n, (1.0, 0.0), |x| if x < 0.0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn constants_are_fixed_points() {
        let k = indicator();
        let r = Reaction::logistic();
        for scheme in [Scheme::Rk4Mol, Scheme::Splitting] {
            let cfg = EvolutionConfig { scheme, dt: 0.02, frame_speed: 0.5, ..Default::default() };
            for v in [0.0, 1.0] {
                let mut f = Field::from_fn(0.0, 1.0 / 16.0, 200, (v, v), |_| v);
                for s in 0..20 {
                    f = step(&f, &k, &r, &cfg, s as f64 * 0.02).unwrap();
                }
                assert!(f.values.iter().all(|&x| x == v), "{scheme:?} {v}");
            }
        }
    }

    #[test]
    fn step_too_large_is_rejected() {
        let cfg = EvolutionConfig { dt: 0.5, ..Default::default() };
        let f = step_field(200, 1.0 / 16.0);
        assert!(matches!(step(&f, &indicator(), &Reaction::logistic(), &cfg, 0.0), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn fft_and_direct_agree() {
        let k = indicator();
        let r = Reaction::logistic();
        let f = step_field(400, 1.0 / 16.0);
        let a = simulate(&f, &k, &r, &EvolutionConfig { t_end: 5.0, ..Default::default() }).unwrap();
        let b = simulate(
            &f,
            &k,
            &r,
            &EvolutionConfig { t_end: 5.0, convolution: ConvolutionMethod::Fft, ..Default::default() },
        )
        .unwrap();
        for (x, y) in a.final_state.values.iter().zip(&b.final_state.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn strict_positivity_after_one_step() {
        let k = indicator();
        let r = Reaction::logistic();
        let h = 1.0 / 16.0;
        let f = Field::from_fn(-10.0, h, 321, (0.0, 0.0), |x| if x.abs() < 0.5 { 0.3 } else { 0.0 });
        for scheme in [Scheme::Rk4Mol, Scheme::Splitting] {
            let g = step(&f, &k, &r, &EvolutionConfig { scheme, dt: 0.05, ..Default::default() }, 0.0).unwrap();
            for (i, x) in g.xs().enumerate() {
                if x.abs() < 1.5 - 1e-9 {
                    assert!(g.values[i] > 0.0, "{scheme:?} at {x}");
                }
            }
        }
    }

    #[test]
    fn splitting_and_rk4_gap_is_second_order() {
        let k = make_kernel(&Shape::CosineBump, 1.0, true).unwrap();
        let r = Reaction::logistic();
        let f = Field::from_fn(-8.0, 1.0 / 16.0, 257, (0.5, 0.5), |x| 0.5 + 0.3 * (-x * x).exp());
        let gap = |dt: f64| {
            let a = step(&f, &k, &r, &EvolutionConfig { dt, scheme: Scheme::Splitting, ..Default::default() }, 0.0).unwrap();
            let b = step(&f, &k, &r, &EvolutionConfig { dt, ..Default::default() }, 0.0).unwrap();
            a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let ratio = gap(0.1) / gap(0.05);
        // Halving dt should quarter the gap.
        assert!(ratio > 3.6, "{ratio}");
    }

    #[test]
    fn theta_half_start_has_no_front_until_growth() {
        let k = indicator();
        let r = Reaction::logistic();
        let f = Field::from_fn(-5.0, 1.0 / 16.0, 161, (0.25, 0.25), |_| 0.25);
        let cfg = EvolutionConfig { t_end: 5.0, record_every: 0.25, thresholds: vec![0.5], ..Default::default() };
        let sim = simulate(&f, &k, &r, &cfg).unwrap();
        let p = &sim.traces[0].positions;
        assert!(p[0].is_none());
        assert!(p.iter().any(|x| x.is_some()));
    }

    #[test]
    fn dirichlet_cells_hold_data() {
        let k = indicator();
        let r = Reaction::logistic();
        let f = Field::from_fn(-4.0, 1.0 / 16.0, 161, (0.0, 0.0), |x| if x < 0.0 { 1.0 } else { 0.0 });
        let cfg = EvolutionConfig { t_end: 2.0, snapshot_every: Some(0.5), ..Default::default() };
        let sim = dirichlet_simulate(&f, &k, &r, &cfg, |_| 1.0, |_| 0.0, -2.0, 2.0).unwrap();
        for s in &sim.snapshots {
            for (x, v) in s.field.xs().zip(&s.field.values) {
                if x < -2.0 - 1e-9 {
                    assert_eq!(*v, 1.0);
                } else if x > 2.0 + 1e-9 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn bad_thresholds_rejected() {
        let f = step_field(200, 1.0 / 16.0);
        let cfg = EvolutionConfig { thresholds: vec![1.2], ..Default::default() };
        assert!(simulate(&f, &indicator(), &Reaction::logistic(), &cfg).is_err());
    }

    #[test]
    fn zero_datum_stays_zero() {
        let rep = hair_trigger_check(&indicator(), &Reaction::logistic(), 0.0, 1.0, 5.0).unwrap();
        assert_eq!(rep.min_center, 0.0);
        assert!(rep.first_time_above.is_none());
    }
}
