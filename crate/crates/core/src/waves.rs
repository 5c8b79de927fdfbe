//! Travelling waves `J phi - c phi' = f(phi)`, `phi(-inf) = 1`, `phi(+inf) = 0`, on a truncated grid.
//!
//! The discrete problem uses the same sampled kernel and upwind derivative as the Cauchy stepper,
//! so a computed profile is a fixed point of the stepper in the frame moving at `c`.
//!
//! Profiles come from the linearly implicit monotone iteration
//! `((<K> + L) I - W - c D_h) phi_{n+1} = L phi_n + f(phi_n)`, which is a pseudo-time evolution with
//! step `1 / L`, followed by a pinned Newton polish. Whether a wave exists at `c` is read off the
//! motion of the front under that evolution.

use serde::Serialize;

use crate::banded::{Banded, BandedLu};
use crate::dispersion::{Dispersion, DispersionReport};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernels::{Kernel, Stencil};
use crate::numerics::least_squares;
use crate::reactions::{Kind, Reaction};

/// Uniform grid `x_min, x_min + h, ..., x_max` containing `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
}

impl WaveGrid {
    pub fn new(x_min: f64, x_max: f64, h: f64) -> Result<WaveGrid> {
        if !(h > 0.0 && x_min < 0.0 && x_max > 0.0) {
            return Err(Error::BadParams("wave grid needs h > 0 and x_min < 0 < x_max".into()));
        }
        let x_min = (x_min / h).round() * h;
        let x_max = (x_max / h).round() * h;
        Ok(WaveGrid { x_min, x_max, h })
    }

    pub fn len(&self) -> usize {
        ((self.x_max - self.x_min) / self.h).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    /// Index of `x = 0`.
    pub fn origin(&self) -> usize {
        (-self.x_min / self.h).round() as usize
    }
}

/// How the profile continues past `x_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TailClosure {
    Zero,
    /// `phi ~ e^{-rate x}`.
    Exponential { rate: f64 },
    /// `phi ~ x e^{-rate x}`.
    Critical { rate: f64 },
}

impl TailClosure {
    /// `phi(x_end + k h) / phi(x_end)`.
    fn ratio(&self, x_end: f64, k: usize, h: f64) -> f64 {
        let dx = k as f64 * h;
        match *self {
            TailClosure::Zero => 0.0,
            TailClosure::Exponential { rate } => (-rate * dx).exp(),
            TailClosure::Critical { rate } => (x_end + dx) / x_end * (-rate * dx).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveProfile {
    #[serde(skip)]
    pub field: Field,
    pub speed: f64,
    /// Sup of the discrete residual `J phi - c D_h phi - f(phi)` over the grid.
    pub residual: f64,
    /// `phi(0) = 1/2`.
    pub pinned: bool,
    pub closure: TailClosure,
    /// Outer iterations of the monotone scheme.
    pub iterations: usize,
    /// Whether every outer iterate lay below the previous one (slack `1e-10`).
    pub monotone_iterates: bool,
}

/// Assembled linear part `m phi - W phi - c D_h phi` of the wave operator on one grid.
struct Operator {
    stencil: Stencil,
    mass: f64,
    c: f64,
    grid: WaveGrid,
    closure: TailClosure,
}

/// How right ghosts enter: tied to the last unknown, or through a free amplitude `nu`.
#[derive(Clone, Copy, PartialEq)]
enum Ghosts {
    Tied,
    Free,
}

struct Assembled {
    matrix: Banded,
    /// Contribution of the left state `phi = 1` beyond the grid.
    left: Vec<f64>,
    /// Coefficient of `nu` when ghosts are free.
    nu: Vec<f64>,
}

impl Operator {
    fn new(k: &Kernel, c: f64, grid: WaveGrid, closure: TailClosure) -> Result<Operator> {
        let stencil = k.sample_weights(grid.h)?;
        let mass = stencil.mass();
        Ok(Operator { stencil, mass, c, grid, closure })
    }

    fn with_speed(&self, c: f64, closure: TailClosure) -> Operator {
        Operator { stencil: self.stencil.clone(), c, closure, ..*self }
    }

    /// `(column offset, coefficient)` of one row.
    fn terms(&self) -> Vec<(isize, f64)> {
        let mut t = vec![(0isize, self.mass)];
        t.extend(self.stencil.iter().map(|(j, w)| (-j, -w)));
        let k = self.c / (2.0 * self.grid.h);
        if self.c > 0.0 {
            t.extend([(0, 3.0 * k), (1, -4.0 * k), (2, k)]);
        } else if self.c < 0.0 {
            t.extend([(0, -3.0 * k), (-1, 4.0 * k), (-2, -k)]);
        }
        t
    }

    fn assemble(&self, diag: impl Fn(usize) -> f64, ghosts: Ghosts) -> Assembled {
        let n = self.grid.len();
        let reach = self.stencil.reach() + 2;
        let mut matrix = Banded::zeros(n, reach, reach);
        let mut left = vec![0.0; n];
        let mut nu = vec![0.0; n];
        let x_end = self.grid.x_max;
        let terms = self.terms();
        for i in 0..n {
            matrix.add(i, i, diag(i));
            for &(off, coef) in &terms {
                let col = i as isize + off;
                if col < 0 {
                    left[i] += coef;
                } else if col as usize >= n {
                    let k = col as usize - (n - 1);
                    let g = coef * self.closure.ratio(x_end, k, self.grid.h);
                    match ghosts {
                        Ghosts::Tied => matrix.add(i, n - 1, g),
                        Ghosts::Free => nu[i] += g,
                    }
                } else {
                    matrix.add(i, col as usize, coef);
                }
            }
        }
        Assembled { matrix, left, nu }
    }

    /// `-D_h phi` with the left state and tied right ghosts.
    fn minus_derivative(&self, phi: &[f64]) -> Vec<f64> {
        let n = phi.len();
        let h = self.grid.h;
        let at = |j: usize| -> f64 {
            if j < n {
                phi[j]
            } else {
                phi[n - 1] * self.closure.ratio(self.grid.x_max, j - (n - 1), h)
            }
        };
        (0..n).map(|i| -(-3.0 * phi[i] + 4.0 * at(i + 1) - at(i + 2)) / (2.0 * h)).collect()
    }
}

/// Rightmost crossing of `1/2` on the grid.
fn crossing(grid: &WaveGrid, phi: &[f64]) -> Option<f64> {
    Field::new(grid.x_min, grid.h, phi.to_vec(), 1.0, 0.0).level_crossing(0.5)
}

/// Translate by `shift` (profile moves left by `shift`), with linear interpolation.
fn translate(grid: &WaveGrid, phi: &[f64], shift: f64, closure: TailClosure) -> Vec<f64> {
    let n = phi.len();
    let f = Field::new(grid.x_min, grid.h, phi.to_vec(), 1.0, 0.0);
    (0..n)
        .map(|i| {
            let x = grid.x(i) + shift;
            if x > grid.x_max {
                let k = (x - grid.x_max) / grid.h;
                phi[n - 1] * closure_continuous(closure, grid.x_max, k * grid.h)
            } else {
                f.sample(x)
            }
        })
        .collect()
}

fn closure_continuous(closure: TailClosure, x_end: f64, dx: f64) -> f64 {
    match closure {
        TailClosure::Zero => 0.0,
        TailClosure::Exponential { rate } => (-rate * dx).exp(),
        TailClosure::Critical { rate } => (x_end + dx) / x_end * (-rate * dx).exp(),
    }
}

/// Shift by whole cells: positive `s` moves the profile left.
fn shift_cells(phi: &mut [f64], s: isize) {
    let n = phi.len();
    if s > 0 {
        let s = (s as usize).min(n);
        phi.copy_within(s.., 0);
        phi[n - s..].iter_mut().for_each(|v| *v = 0.0);
    } else if s < 0 {
        let s = (s.unsigned_abs()).min(n);
        phi.copy_within(..n - s, s);
        phi[..s].iter_mut().for_each(|v| *v = 1.0);
    }
}

/// Relaxation constant of the monotone scheme.
pub fn relaxation_constant(r: &Reaction) -> f64 {
    2.0 * r.lipschitz() + r.slope_at_zero().max(0.0)
}

/// One step of the monotone scheme.
struct Sattinger<'a> {
    lu: BandedLu,
    left: Vec<f64>,
    l: f64,
    r: &'a Reaction,
}

impl<'a> Sattinger<'a> {
    fn new(op: &Operator, r: &'a Reaction) -> Result<Sattinger<'a>> {
        let l = relaxation_constant(r);
        let a = op.assemble(|_| l, Ghosts::Tied);
        Ok(Sattinger { lu: a.matrix.factor()?, left: a.left, l, r })
    }

    fn step(&self, phi: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = phi
            .iter()
            .zip(&self.left)
            .map(|(&p, &g)| self.l * p + self.r.f(p) - g)
            .collect();
        self.lu.solve(&rhs)
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// What the Newton polish solves for besides the profile.
#[derive(Clone, Copy)]
enum Border {
    /// Speed fixed, amplitude of the ghost tail free.
    TailAmplitude,
    /// Speed free, ghosts tied to the last unknown.
    Speed,
}

struct Polished {
    phi: Vec<f64>,
    c: f64,
    closure: TailClosure,
    residual: f64,
}

/// Residual of the wave equation, plus the pin row `phi(0) - 1/2`.
fn wave_residual(op: &Operator, r: &Reaction, phi: &[f64], nu: Option<f64>) -> Vec<f64> {
    let a = op.assemble(|_| 0.0, if nu.is_some() { Ghosts::Free } else { Ghosts::Tied });
    let mut out = a.matrix.matvec(phi);
    for i in 0..phi.len() {
        out[i] += a.left[i] + nu.map_or(0.0, |v| v * a.nu[i]) - r.f(phi[i]);
    }
    out
}

/// Pinned Newton iteration, bordered by one scalar unknown.
fn newton_polish(
    op: &Operator,
    r: &Reaction,
    phi0: &[f64],
    border: Border,
    closure_for: impl Fn(f64) -> Result<TailClosure>,
    target: f64,
) -> Result<Polished> {
    let n = phi0.len();
    let i0 = op.grid.origin();
    let mut phi = phi0.to_vec();
    let mut c = op.c;
    let mut nu = phi[n - 1];
    let mut closure = op.closure;
    let eval = |phi: &[f64], c: f64, nu: f64, closure: TailClosure| -> (Operator, Vec<f64>, f64) {
        let o = op.with_speed(c, closure);
        let res = match border {
            Border::TailAmplitude => wave_residual(&o, r, phi, Some(nu)),
            Border::Speed => wave_residual(&o, r, phi, None),
        };
        let norm = res.iter().fold((phi[i0] - 0.5).abs(), |m, v| m.max(v.abs()));
        (o, res, norm)
    };
    let (mut o, mut res, mut norm) = eval(&phi, c, nu, closure);
    for _ in 0..60 {
        if norm <= target {
            let residual = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            return Ok(Polished { phi, c, closure, residual });
        }
        let ghosts = match border {
            Border::TailAmplitude => Ghosts::Free,
            Border::Speed => Ghosts::Tied,
        };
        let a = o.assemble(|i| -r.df(phi[i]), ghosts);
        let col = match border {
            Border::TailAmplitude => a.nu,
            Border::Speed => o.minus_derivative(&phi),
        };
        let lu = a.matrix.factor()?;
        let minus_res: Vec<f64> = res.iter().map(|v| -v).collect();
        let y = lu.solve(&minus_res);
        let z = lu.solve(&col);
        let g = 0.5 - phi[i0];
        if z[i0] == 0.0 {
            return Err(Error::NewtonDiverged { residual: norm });
        }
        let dp = (y[i0] - g) / z[i0];
        let delta: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b * dp).collect();
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p + step * d).collect();
            let (tc, tnu) = match border {
                Border::TailAmplitude => (c, nu + step * dp),
                Border::Speed => (c + step * dp, nu),
            };
            let tclosure = match border {
                Border::TailAmplitude => closure,
                Border::Speed => closure_for(tc)?,
            };
            let (to, tres, tnorm) = eval(&trial, tc, tnu, tclosure);
            if tnorm < norm || step < 1e-3 {
                phi = trial;
                c = tc;
                nu = tnu;
                closure = tclosure;
                o = to;
                res = tres;
                norm = tnorm;
                break;
            }
            step *= 0.5;
        }
        if !norm.is_finite() {
            break;
        }
    }
    if norm <= target {
        let residual = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Ok(Polished { phi, c, closure, residual });
    }
    Err(Error::NewtonDiverged { residual: norm })
}

fn check_profile(phi: &[f64]) -> bool {
    phi.iter().all(|&p| (-1e-10..=1.0 + 1e-10).contains(&p)) && phi.windows(2).all(|w| w[1] <= w[0] + 1e-10)
}

/// Dispersion data of the grid operator.
pub fn grid_dispersion(k: &Kernel, r: &Reaction, h: f64) -> Result<(Dispersion, DispersionReport)> {
    let disp = Dispersion::discrete(&k.sample_weights(h)?, r.slope_at_zero())?;
    let rep = disp.critical()?;
    Ok((disp, rep))
}

/// Residual target for a reaction.
fn residual_target(r: &Reaction) -> f64 {
    1e-8 * r.lipschitz().max(1.0)
}

/// Travelling wave at speed `c`, pinned at `phi(0) = 1/2`.
///
/// The right closure follows the minimal tail rate `lambda_-(c)` of the grid dispersion relation
/// (or `x e^{-lambda_* x}` at the critical speed). Returns `NoWaveAtSpeed` when the front leaves
/// the middle of the grid under the monotone iteration.
pub fn solve_wave(k: &Kernel, r: &Reaction, c: f64, grid: &WaveGrid, max_iter: usize) -> Result<WaveProfile> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::BadParams(format!("wave speed must be positive, got {c}")));
    }
    let (disp, rep) = grid_dispersion(k, r, grid.h)?;
    let critical_band = 1e-9 * rep.c_k;
    let (closure, start_rate) = if c > rep.c_k + critical_band {
        let lm = disp.real_roots_with(&rep, c)?.lambda_minus;
        (TailClosure::Exponential { rate: lm }, lm)
    } else if c >= rep.c_k - critical_band {
        (TailClosure::Critical { rate: rep.lambda_star }, rep.lambda_star)
    } else {
        (TailClosure::Zero, rep.lambda_star)
    };
    if (start_rate * grid.x_max) < 14.0 * std::f64::consts::LN_10 && closure == TailClosure::Zero {
        return Err(Error::GridTooSmall(format!("x_max = {} too short for the tail", grid.x_max)));
    }
    let op = Operator::new(k, c, *grid, closure)?;
    let sat = Sattinger::new(&op, r)?;
    let n = grid.len();
    let mut phi: Vec<f64> = (0..n).map(|i| (-start_rate * grid.x(i)).exp().min(1.0)).collect();
    let width = grid.x_max - grid.x_min;
    let (lo, hi) = (grid.x_min + 0.2 * width, grid.x_max - 0.2 * width);
    let target = residual_target(r);
    let mut monotone = true;
    let mut switch = 1e-6;
    for it in 1..=max_iter {
        let next = sat.step(&phi);
        monotone &= next.iter().zip(&phi).all(|(a, b)| *a <= b + 1e-10);
        let diff = sup_diff(&next, &phi);
        phi = next;
        let x = match crossing(grid, &phi) {
            Some(x) if x > lo && x < hi => x,
            _ => return Err(Error::NoWaveAtSpeed { c }),
        };
        if diff < switch {
            let shifted = translate(grid, &phi, x, closure);
            match newton_polish(&op, r, &shifted, Border::TailAmplitude, |_| Ok(closure), target) {
                Ok(p) if check_profile(&p.phi) => {
                    return Ok(WaveProfile {
                        field: Field::new(grid.x_min, grid.h, p.phi, 1.0, 0.0),
                        speed: c,
                        residual: p.residual,
                        pinned: true,
                        closure,
                        iterations: it,
                        monotone_iterates: monotone,
                    });
                }
                _ => switch *= 0.1,
            }
        }
    }
    let _ = disp;
    Err(Error::NoConvergence { iterations: max_iter, change: switch })
}

/// Pushed wave: speed and profile solved together, the tail closed at the steep rate `lambda_+(c)`.
///
/// `c_guess` must exceed the critical speed; the start profile is taken from a drift run.
pub fn solve_pushed_wave(k: &Kernel, r: &Reaction, c_guess: f64, grid: &WaveGrid) -> Result<WaveProfile> {
    let (disp, rep) = grid_dispersion(k, r, grid.h)?;
    let closure_for = |c: f64| -> Result<TailClosure> {
        Ok(TailClosure::Exponential { rate: disp.real_roots_with(&rep, c)?.lambda_plus })
    };
    let drift = front_drift(k, r, c_guess, grid, 4000.0 / relaxation_constant(r).max(1e-300))?;
    let c0 = c_guess + drift.velocity_lab_estimate();
    let c0 = if c0 > rep.c_k { c0 } else { c_guess };
    let closure = closure_for(c0)?;
    let op = Operator::new(k, c0, *grid, closure)?;
    let start = translate(grid, &drift.profile.values, 0.0, closure);
    let p = newton_polish(&op, r, &start, Border::Speed, closure_for, residual_target(r))?;
    if !check_profile(&p.phi) {
        return Err(Error::NoConvergence { iterations: 0, change: p.residual });
    }
    Ok(WaveProfile {
        field: Field::new(grid.x_min, grid.h, p.phi, 1.0, 0.0),
        speed: p.c,
        residual: p.residual,
        pinned: true,
        closure: p.closure,
        iterations: 0,
        monotone_iterates: false,
    })
}

/// Motion of the front under the monotone iteration in the frame moving at `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Drift {
    pub speed: f64,
    /// Front velocity in pseudo-time, positive when the front outruns the frame.
    pub velocity: f64,
    pub pseudo_time: f64,
    /// Last iterate, re-centred so the front sits near the origin.
    pub profile: Field,
    relaxation: f64,
}

impl Drift {
    /// Pseudo-time runs at the physical rate only near a wave, so this is a first-order guess.
    fn velocity_lab_estimate(&self) -> f64 {
        self.velocity
    }

    /// A wave exists at this speed when the front does not outrun the frame.
    pub fn wave_exists(&self) -> bool {
        self.velocity <= 1e-9 * self.speed.abs().max(1.0) * self.relaxation.min(1.0)
    }
}

/// Pseudo-time front velocity in frame `c` from a step datum, with the right state closed at zero.
///
/// Runs in chunks and stops once the chunk velocities settle in sign and size, or at `tau_max`.
pub fn front_drift(k: &Kernel, r: &Reaction, c: f64, grid: &WaveGrid, tau_max: f64) -> Result<Drift> {
    let op = Operator::new(k, c, *grid, TailClosure::Zero)?;
    let sat = Sattinger::new(&op, r)?;
    let n = grid.len();
    let l = sat.l;
    let rate = r.lipschitz().max(r.slope_at_zero()).max(1e-300);
    let chunk = ((10.0 / rate) * l).ceil().max(5.0) as usize;
    let mut phi: Vec<f64> = (0..n).map(|i| if grid.x(i) < 0.0 { 1.0 } else { 0.0 }).collect();
    let mut offset = 0.0;
    let mut pos = crossing(grid, &phi).unwrap_or(0.0);
    let mut velocities: Vec<f64> = Vec::new();
    let mut tau = 0.0;
    let dtau_chunk = chunk as f64 / l;
    while tau < tau_max {
        for _ in 0..chunk {
            phi = sat.step(&phi);
        }
        tau += dtau_chunk;
        let x = crossing(grid, &phi).ok_or(Error::NoWaveAtSpeed { c })?;
        let total = x + offset;
        velocities.push((total - pos) / dtau_chunk);
        pos = total;
        let s = (x / grid.h).round() as isize;
        if s != 0 {
            shift_cells(&mut phi, s);
            offset += s as f64 * grid.h;
        }
        let m = velocities.len();
        if m >= 6 {
            let (a, b, c3) = (velocities[m - 3], velocities[m - 2], velocities[m - 1]);
            let same = (a > 0.0) == (b > 0.0) && (b > 0.0) == (c3 > 0.0);
            // Both settled and clearly away from zero, or converged to rest.
            if (same && (c3 - b).abs() <= 0.02 * c3.abs() && (b - a).abs() <= 0.02 * b.abs()) || c3.abs() < 1e-12 {
                break;
            }
        }
    }
    let m = velocities.len();
    let velocity = if m >= 2 { 0.5 * (velocities[m - 1] + velocities[m - 2]) } else { velocities.last().copied().unwrap_or(0.0) };
    Ok(Drift {
        speed: c,
        velocity,
        pseudo_time: tau,
        profile: Field::new(grid.x_min, grid.h, phi, 1.0, 0.0),
        relaxation: l,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedSearch {
    pub c_star: f64,
    pub bracket: (f64, f64),
    /// Critical speed of the grid dispersion relation.
    pub c_k: f64,
    pub evaluations: usize,
}

/// Minimal wave speed by bracketing on wave existence.
///
/// Speeds at or below the grid critical speed have no wave; above it, existence is decided by
/// the sign of the front drift. Regula falsi on the drift velocity proposes the next speed.
pub fn min_speed_search(k: &Kernel, r: &Reaction, grid: &WaveGrid, c_lo: f64, c_hi: f64, tol: f64) -> Result<SpeedSearch> {
    if !(c_lo < c_hi && tol > 0.0) {
        return Err(Error::BracketInvalid { lo: c_lo, hi: c_hi, reason: "need c_lo < c_hi and tol > 0".into() });
    }
    let (_, rep) = grid_dispersion(k, r, grid.h)?;
    let tau_max = 20_000.0 / r.lipschitz().max(r.slope_at_zero()).max(1e-300);
    let mut evaluations = 0;
    let mut probe = |c: f64| -> Result<Option<f64>> {
        if c <= rep.c_k {
            return Ok(None);
        }
        evaluations += 1;
        let d = front_drift(k, r, c, grid, tau_max)?;
        Ok(Some(if d.wave_exists() { d.velocity.min(0.0) } else { d.velocity }))
    };
    let exists = |v: &Option<f64>| matches!(v, Some(x) if *x <= 0.0);
    let v_lo = probe(c_lo)?;
    if exists(&v_lo) {
        return Err(Error::BracketInvalid { lo: c_lo, hi: c_hi, reason: "a wave exists at c_lo".into() });
    }
    let v_hi = probe(c_hi)?;
    if !exists(&v_hi) {
        return Err(Error::BracketInvalid { lo: c_lo, hi: c_hi, reason: "no wave at c_hi".into() });
    }
    let (mut lo, mut hi) = (c_lo, c_hi);
    let (mut vl, mut vh) = (v_lo, v_hi.unwrap());
    // Everything up to the critical speed is known to have no wave.
    if lo < rep.c_k && rep.c_k < hi {
        let c = rep.c_k * (1.0 + 1e-12);
        let v = probe(c)?;
        if exists(&v) {
            hi = c;
            vh = v.unwrap();
            lo = rep.c_k;
            vl = None;
        } else {
            lo = c;
            vl = v;
        }
    }
    let mut side = 0i32;
    while hi - lo > tol {
        let mut c = match vl {
            Some(a) if a > 0.0 && vh < 0.0 => {
                let t = a / (a - vh);
                let t = match side {
                    1 => 0.5 * t,
                    -1 => 0.5 + 0.5 * t,
                    _ => t,
                };
                lo + t * (hi - lo)
            }
            _ => 0.5 * (lo + hi),
        };
        if !(c > lo + 0.05 * tol && c < hi - 0.05 * tol) {
            c = 0.5 * (lo + hi);
        }
        let v = probe(c)?;
        if exists(&v) {
            hi = c;
            vh = v.unwrap();
            side = if side == 1 { 0 } else { 1 };
            // Snap the other side when the guess was good.
            let c2 = c - 0.45 * tol;
            if hi - lo > tol && c2 > lo {
                let v2 = probe(c2)?;
                if exists(&v2) {
                    hi = c2;
                    vh = v2.unwrap();
                } else {
                    lo = c2;
                    vl = v2;
                }
            }
        } else {
            lo = c;
            vl = v;
            side = if side == -1 { 0 } else { -1 };
            let c2 = c + 0.45 * tol;
            if hi - lo > tol && c2 < hi {
                let v2 = probe(c2)?;
                if exists(&v2) {
                    hi = c2;
                    vh = v2.unwrap();
                } else {
                    lo = c2;
                    vl = v2;
                }
            }
        }
    }
    Ok(SpeedSearch { c_star: 0.5 * (lo + hi), bracket: (lo, hi), c_k: rep.c_k, evaluations })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub lambda: f64,
    /// Power of `x` in `A x^p e^{-lambda x}`.
    #[serde(rename = "p")]
    pub poly_degree: u32,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub window: (f64, f64),
    #[serde(rename = "rms")]
    pub rms_log_residual: f64,
}

/// Largest run of grid points with `lo <= phi <= hi`.
fn auto_window(f: &Field, lo: f64, hi: f64) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=f.len() {
        let inside = i < f.len() && f.values[i] >= lo && f.values[i] <= hi;
        match (inside, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.map_or(true, |(a, b)| i - s > b - a) {
                    best = Some((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Fit `ln phi = ln A + p ln x - lambda x`, `p` in `{0, 1}`, on a tail window.
///
/// Without a window, the largest stretch with `1e-10 <= phi <= 1e-4` is used.
pub fn fit_tail(profile: &Field, window: Option<(f64, f64)>) -> Result<TailFit> {
    let (a, b) = match window {
        Some((x0, x1)) => {
            let (i0, i1) = (profile.index_of(x0), profile.index_of(x1) + 1);
            if let Some(i) = (i0..i1).find(|&i| !(profile.values[i] > 1e-12)) {
                return Err(Error::WindowTooNoisy { x: profile.x(i), value: profile.values[i] });
            }
            (i0, i1)
        }
        None => auto_window(profile, 1e-10, 1e-4).ok_or(Error::TooFewSamples { found: 0, needed: 10 })?,
    };
    if b - a < 10 {
        return Err(Error::TooFewSamples { found: b - a, needed: 10 });
    }
    let xs: Vec<f64> = (a..b).map(|i| profile.x(i)).collect();
    let ln: Vec<f64> = profile.values[a..b].iter().map(|v| v.ln()).collect();
    let ones = vec![1.0; xs.len()];
    let neg_x: Vec<f64> = xs.iter().map(|x| -x).collect();
    let (c0, rms0) = least_squares(&[ones.clone(), neg_x.clone()], &ln);
    let mut fit = TailFit {
        lambda: c0[1],
        poly_degree: 0,
        amplitude: c0[0].exp(),
        window: (xs[0], xs[xs.len() - 1]),
        rms_log_residual: rms0,
    };
    if xs[0] > 0.0 {
        let y1: Vec<f64> = ln.iter().zip(&xs).map(|(l, x)| l - x.ln()).collect();
        let (c1, rms1) = least_squares(&[ones, neg_x], &y1);
        if rms1 < rms0 {
            fit.lambda = c1[1];
            fit.poly_degree = 1;
            fit.amplitude = c1[0].exp();
            fit.rms_log_residual = rms1;
        }
    }
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayCheck {
    pub c_star: f64,
    pub fit: TailFit,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// The fitted rate sits closer to `lambda_+` than to `lambda_-`.
    pub maximal: bool,
    /// The two roots are too close to tell apart.
    pub indeterminate: bool,
}

/// Tail of the pushed wave at the minimal speed, compared with both roots of the grid dispersion.
pub fn zfk_decay_check(k: &Kernel, r: &Reaction, c_star: f64, grid: &WaveGrid) -> Result<DecayCheck> {
    if r.classify(400).kind != Kind::Zfk {
        return Err(Error::BadParams("decay check needs a ZFK reaction".into()));
    }
    let (disp, rep) = grid_dispersion(k, r, grid.h)?;
    let wave = solve_pushed_wave(k, r, c_star, grid)?;
    let roots = disp.real_roots_with(&rep, wave.speed)?;
    let fit = fit_tail(&wave.field, None)?;
    let spread = roots.lambda_plus - roots.lambda_minus;
    let uncertainty = fit.rms_log_residual / (fit.window.1 - fit.window.0).max(1e-300);
    Ok(DecayCheck {
        c_star: wave.speed,
        maximal: (fit.lambda - roots.lambda_plus).abs() < (fit.lambda - roots.lambda_minus).abs(),
        indeterminate: spread < 10.0 * uncertainty,
        fit,
        lambda_minus: roots.lambda_minus,
        lambda_plus: roots.lambda_plus,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionPoint {
    pub a: f64,
    pub c_star: f64,
    pub c_k: f64,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionReport {
    pub points: Vec<TransitionPoint>,
    /// Smallest `a` on the grid with `c_* > 1.005 c_K`.
    pub first_pushed: Option<f64>,
    /// Where `sqrt(excess)` extrapolates to zero, from two line fits over the pushed points.
    pub estimate: Option<(f64, f64)>,
}

/// Scan of the Hadeler-Rothe family `u (1 + a u)(1 - u)`, times `rate`, for the pulled-to-pushed switch.
///
/// Near the switch `c_* - c_K` grows quadratically in `a`, so its square root is close to linear
/// and two line fits through the pushed points bracket the zero crossing.
///
/// `rel_tol` is the search tolerance relative to each `c_K`.
pub fn hadeler_rothe_transition(k: &Kernel, a_grid: &[f64], rate: f64, grid: &WaveGrid, rel_tol: f64) -> Result<TransitionReport> {
    if a_grid.windows(2).any(|w| w[1] <= w[0]) || a_grid.is_empty() {
        return Err(Error::BadParams("a grid must be nonempty and increasing".into()));
    }
    let mut points = Vec::new();
    for &a in a_grid {
        let r = Reaction::hadeler_rothe(a)?.with_rate(rate)?;
        let (_, rep) = grid_dispersion(k, &r, grid.h)?;
        let s = min_speed_search(k, &r, grid, 0.5 * rep.c_k, 2.0 * rep.c_k + 2.0 * (a * rate).sqrt(), rel_tol * rep.c_k)?;
        points.push(TransitionPoint { a, c_star: s.c_star, c_k: rep.c_k, excess: s.c_star / rep.c_k - 1.0 });
    }
    let first_pushed = points.iter().find(|p| p.excess > 0.005).map(|p| p.a);
    let pushed: Vec<&TransitionPoint> = points.iter().filter(|p| p.excess > 2.0 * rel_tol).collect();
    let root = |pts: &[&TransitionPoint]| -> f64 {
        let xs: Vec<f64> = pts.iter().map(|p| p.a).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.excess.sqrt()).collect();
        let (c, _) = least_squares(&[xs, vec![1.0; pts.len()]], &ys);
        -c[1] / c[0]
    };
    let estimate = match pushed.len() {
        0 | 1 => None,
        2 => {
            let r = root(&pushed);
            Some((r, r))
        }
        m => {
            let near = root(&pushed[..2]);
            let all = root(&pushed[..m.min(3)]);
            Some((near.min(all), near.max(all)))
        }
    };
    Ok(TransitionReport { points, first_pushed, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, Shape};

    fn indicator() -> Kernel {
        make_kernel(&Shape::Indicator, 1.0, true).unwrap()
    }

    #[test]
    fn closure_ratios() {
        assert_eq!(TailClosure::Zero.ratio(10.0, 3, 0.1), 0.0);
        let e = TailClosure::Exponential { rate: 2.0 }.ratio(10.0, 3, 0.1);
        assert!((e - (-0.6f64).exp()).abs() < 1e-15);
        let c = TailClosure::Critical { rate: 2.0 }.ratio(10.0, 3, 0.1);
        assert!((c - 1.03 * (-0.6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn grid_is_aligned() {
        let g = WaveGrid::new(-10.03, 20.0, 0.25).unwrap();
        assert_eq!(g.x(g.origin()), 0.0);
        assert_eq!(g.len(), 121);
    }

    #[test]
    fn shifting_by_cells() {
        let mut v = vec![1.0, 0.8, 0.5, 0.2, 0.0];
        shift_cells(&mut v, 2);
        assert_eq!(v, vec![0.5, 0.2, 0.0, 0.0, 0.0]);
        shift_cells(&mut v, -1);
        assert_eq!(v, vec![1.0, 0.5, 0.2, 0.0, 0.0]);
    }

    #[test]
    fn exact_exponential_tail() {
        let f = Field::from_fn(0.0, 0.1, 200, (1.0, 0.0), |x| 3.0 * (-2.0 * x).exp());
        let fit = fit_tail(&f, Some((1.0, 12.0))).unwrap();
        assert_eq!(fit.poly_degree, 0);
        assert!((fit.lambda - 2.0).abs() < 1e-10);
        assert!((fit.amplitude - 3.0).abs() < 1e-9);
    }

    #[test]
    fn exact_critical_tail() {
        let f = Field::from_fn(0.0, 0.1, 400, (1.0, 0.0), |x| 0.5 * x * (-1.5 * x).exp());
        let fit = fit_tail(&f, Some((5.0, 15.0))).unwrap();
        assert_eq!(fit.poly_degree, 1);
        assert!((fit.lambda - 1.5).abs() < 1e-10);
    }

    #[test]
    fn noisy_window_rejected() {
        let f = Field::from_fn(0.0, 0.1, 400, (1.0, 0.0), |x| (-2.0 * x).exp());
        assert!(matches!(fit_tail(&f, Some((5.0, 20.0))), Err(Error::WindowTooNoisy { .. })));
    }

    #[test]
    fn logistic_wave_is_monotone_with_small_residual() {
        let k = indicator();
        let r = Reaction::logistic();
        let grid = WaveGrid::new(-30.0, 70.0, 1.0 / 16.0).unwrap();
        let (_, rep) = grid_dispersion(&k, &r, grid.h).unwrap();
        let w = solve_wave(&k, &r, 1.5 * rep.c_k, &grid, 20_000).unwrap();
        assert!(w.residual < 1e-8, "{}", w.residual);
        assert!(w.pinned);
        assert!((w.field.values[grid.origin()] - 0.5).abs() < 1e-12);
        assert!(check_profile(&w.field.values));
        assert!(w.monotone_iterates);
    }

    #[test]
    fn slow_speed_has_no_wave() {
        let k = indicator();
        let r = Reaction::logistic();
        let grid = WaveGrid::new(-30.0, 70.0, 1.0 / 8.0).unwrap();
        let (_, rep) = grid_dispersion(&k, &r, grid.h).unwrap();
        let e = solve_wave(&k, &r, 0.5 * rep.c_k, &grid, 50_000).unwrap_err();
        assert_eq!(e, Error::NoWaveAtSpeed { c: 0.5 * rep.c_k });
    }
}
