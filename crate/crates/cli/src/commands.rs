//! One function per subcommand: parse the config, call the library, write the results.

use std::fs;
use std::path::{Path, PathBuf};

use frontlab::cauchy::{self, EvolutionConfig, FrontTrace, Snapshot};
use frontlab::config::{GridDesc, InitialDesc, KernelDesc, ReactionDesc};
use frontlab::dispersion::{Dispersion, DispersionReport, RootPair};
use frontlab::epidemics::{self, EpidemicParams};
use frontlab::field::Field;
use frontlab::frontfit::{self, FitResult};
use frontlab::heatkernel::{self, GaussianReport};
use frontlab::reactions::{Classification, Kind};
use frontlab::waves::{self, SpeedSearch, TailFit, WaveGrid, WaveProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::output::{read_trace, OutDir};
use crate::{CliError, Common};

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn write_snapshots(out: &OutDir, snaps: &[Snapshot]) -> Result<(), CliError> {
    for s in snaps {
        let f = &s.field;
        out.csv(&format!("snap_t{:.3}.csv", s.t), &["x", "u"], f.xs().zip(&f.values).map(|(x, u)| vec![x, *u]))?;
    }
    Ok(())
}

pub fn trace_name(theta: f64) -> String {
    format!("trace_theta{theta:.3}.csv")
}

fn write_traces(out: &OutDir, traces: &[FrontTrace]) -> Result<(), CliError> {
    for tr in traces {
        let (ts, xs) = tr.defined();
        out.csv(&trace_name(tr.theta), &["t", "X_theta"], ts.into_iter().zip(xs).map(|(t, x)| vec![t, x]))?;
    }
    Ok(())
}

fn write_field(out: &OutDir, name: &str, col: &str, f: &Field) -> Result<(), CliError> {
    out.csv(name, &["x", col], f.xs().zip(&f.values).map(|(x, u)| vec![x, *u]))
}

// ---------------------------------------------------------------- speed

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedConfig {
    pub kernel: KernelDesc,
    pub reaction: Option<ReactionDesc>,
    /// Overrides the reaction's slope at zero; one of the two must be present.
    pub fprime0: Option<f64>,
    /// Also report the relation seen by a grid of this spacing.
    pub h: Option<f64>,
    #[serde(default)]
    pub speeds: Vec<f64>,
    #[serde(default)]
    pub subcritical: Vec<f64>,
    #[serde(default)]
    pub shifted: Vec<f64>,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct SubcriticalEntry {
    pub speed: f64,
    pub lambda: ComplexValue,
    pub residual: f64,
    pub fallback_used: bool,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct ShiftedEntry {
    pub mu: f64,
    pub lambda: ComplexValue,
    pub conjugate: ComplexValue,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct SpeedReport {
    #[serde(flatten)]
    pub continuous: DispersionReport,
    pub fprime0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DispersionReport>,
    pub real_roots: Vec<RootPair>,
    pub subcritical: Vec<SubcriticalEntry>,
    pub shifted: Vec<ShiftedEntry>,
}

pub fn speed_report(cfg: &SpeedConfig) -> Result<SpeedReport, CliError> {
    let k = cfg.kernel.build()?;
    let reaction = cfg.reaction.as_ref().map(|r| r.build()).transpose()?;
    let f0 = match (cfg.fprime0, &reaction) {
        (Some(v), None) => v,
        (None, Some(r)) => r.slope_at_zero(),
        _ => return Err(config_error("give exactly one of 'reaction' and 'fprime0'")),
    };
    let disp = Dispersion::continuous(&k, f0);
    let continuous = disp.critical()?;
    let discrete = match cfg.h {
        Some(h) => Some(Dispersion::discrete(&k.sample_weights(h)?, f0)?.critical()?),
        None => None,
    };
    let real_roots = cfg.speeds.iter().map(|&c| disp.real_roots_with(&continuous, c)).collect::<Result<_, _>>()?;
    let subcritical = cfg
        .subcritical
        .iter()
        .map(|&c| {
            let r = disp.complex_branch_subcritical(c, true)?;
            Ok(SubcriticalEntry {
                speed: c,
                lambda: ComplexValue { re: r.lambda.re, im: r.lambda.im },
                residual: r.residual,
                fallback_used: r.fallback_used,
            })
        })
        .collect::<Result<_, frontlab::Error>>()?;
    let shifted = cfg
        .shifted
        .iter()
        .map(|&mu| {
            let (a, b) = disp.complex_branch_shifted(mu)?;
            Ok(ShiftedEntry {
                mu,
                lambda: ComplexValue { re: a.re, im: a.im },
                conjugate: ComplexValue { re: b.re, im: b.im },
            })
        })
        .collect::<Result<_, frontlab::Error>>()?;
    Ok(SpeedReport {
        continuous,
        fprime0: f0,
        classification: reaction.map(|r| r.classify(400)),
        discrete,
        real_roots,
        subcritical,
        shifted,
    })
}

pub fn speed(c: &Common) -> Result<(), CliError> {
    let cfg: SpeedConfig = load(&c.config)?;
    let report = speed_report(&cfg)?;
    OutDir::create(&c.out)?.json("dispersion.json", &report)
}

// ---------------------------------------------------------------- simulate

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFit {
    pub t_min: f64,
    /// Speed removed before the log-law and relaxation fits. Defaults to the grid critical
    /// speed for KPP reactions and to the fitted speed otherwise.
    pub c_known: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub kernel: KernelDesc,
    pub reaction: ReactionDesc,
    pub grid: GridDesc,
    pub initial: InitialDesc,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    pub fit: Option<SimFit>,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct TraceFits {
    pub theta: f64,
    pub speed: f64,
    pub log_law: FitResult,
    pub relaxation: FitResult,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    t_end: f64,
    shift: f64,
    warnings: &'a [cauchy::Warning],
}

pub fn simulate_fits(cfg: &SimulateConfig, traces: &[FrontTrace]) -> Result<Vec<TraceFits>, CliError> {
    let Some(fit) = &cfg.fit else { return Ok(vec![]) };
    let k = cfg.kernel.build()?;
    let r = cfg.reaction.build()?;
    let grid_ck = match r.classify(400).kind {
        Kind::Kpp => Some(waves::grid_dispersion(&k, &r, cfg.grid.h)?.1.c_k),
        _ => None,
    };
    traces
        .iter()
        .map(|tr| {
            let speed = frontfit::fit_speed(tr, fit.t_min)?;
            let c = fit.c_known.or(grid_ck).unwrap_or(speed);
            Ok(TraceFits {
                theta: tr.theta,
                speed,
                log_law: frontfit::fit_log_law(tr, c, fit.t_min)?,
                relaxation: frontfit::fit_relaxation(tr, c, fit.t_min)?,
            })
        })
        .collect::<Result<_, frontlab::Error>>()
        .map_err(CliError::from)
}

pub fn simulate(c: &Common) -> Result<(), CliError> {
    let cfg: SimulateConfig = load(&c.config)?;
    let k = cfg.kernel.build()?;
    let r = cfg.reaction.build()?;
    let initial = cfg.initial.field(&cfg.grid)?;
    let sim = cauchy::simulate(&initial, &k, &r, &cfg.evolution)?;
    let fits = simulate_fits(&cfg, &sim.traces)?;
    let out = OutDir::create(&c.out)?;
    write_snapshots(&out, &sim.snapshots)?;
    write_traces(&out, &sim.traces)?;
    out.json("run.json", &RunSummary { t_end: cfg.evolution.t_end, shift: sim.shift, warnings: &sim.warnings })?;
    if cfg.fit.is_some() {
        out.json("fits.json", &fits)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- wave

fn default_max_iter() -> usize {
    200_000
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchDesc {
    pub c_lo: f64,
    pub c_hi: f64,
    pub tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub kernel: KernelDesc,
    pub reaction: ReactionDesc,
    pub grid: GridDesc,
    pub speed: Option<f64>,
    pub search: Option<SearchDesc>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub tail_window: Option<(f64, f64)>,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct WaveReport {
    pub profile: WaveProfile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SpeedSearch>,
    pub classification: Classification,
    /// Critical speed of the grid dispersion relation.
    #[serde(rename = "c_K")]
    pub c_k: f64,
    pub lambda_star: f64,
    pub lambda_minus: Option<f64>,
    pub lambda_plus: Option<f64>,
}

pub fn wave_solve(cfg: &WaveConfig) -> Result<(WaveReport, TailFit), CliError> {
    let k = cfg.kernel.build()?;
    let r = cfg.reaction.build()?;
    let grid = WaveGrid::new(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.h)?;
    let (disp, rep) = waves::grid_dispersion(&k, &r, grid.h)?;
    let (profile, search) = match (cfg.speed, &cfg.search) {
        (Some(speed), None) => (waves::solve_wave(&k, &r, speed, &grid, cfg.max_iter)?, None),
        (None, Some(s)) => {
            let found = waves::min_speed_search(&k, &r, &grid, s.c_lo, s.c_hi, s.tol)?;
            let profile = if found.c_star - found.c_k > s.tol {
                waves::solve_pushed_wave(&k, &r, found.c_star, &grid)?
            } else {
                waves::solve_wave(&k, &r, found.c_star, &grid, cfg.max_iter)?
            };
            (profile, Some(found))
        }
        _ => return Err(config_error("give exactly one of 'speed' and 'search'")),
    };
    let tail = waves::fit_tail(&profile.field, cfg.tail_window)?;
    let roots = disp.real_roots_with(&rep, profile.speed).ok();
    let report = WaveReport {
        classification: r.classify(400),
        c_k: rep.c_k,
        lambda_star: rep.lambda_star,
        lambda_minus: roots.map(|p| p.lambda_minus),
        lambda_plus: roots.map(|p| p.lambda_plus),
        profile,
        search,
    };
    Ok((report, tail))
}

pub fn wave(c: &Common) -> Result<(), CliError> {
    let cfg: WaveConfig = load(&c.config)?;
    let (report, tail) = wave_solve(&cfg)?;
    let out = OutDir::create(&c.out)?;
    write_field(&out, "wave.csv", "phi", &report.profile.field)?;
    out.json("tail.json", &tail)?;
    out.json("wave.json", &report)
}

// ---------------------------------------------------------------- epidemic

#[derive(Deserialize, Clone, Copy)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfectedDesc {
    Uniform { value: f64 },
    Bump { height: f64, width: f64, center: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicConfig {
    #[serde(rename = "S0")]
    pub s0: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "I0")]
    pub i0: InfectedDesc,
    /// Spatial runs: the kernel is rescaled to carry mass `beta`.
    pub kernel: Option<KernelDesc>,
    pub grid: Option<GridDesc>,
    pub evolution: Option<EvolutionConfig>,
    /// Homogeneous runs.
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    #[serde(default)]
    pub steady: bool,
    /// Start of the window for the front speed fit; half of `t_end` by default.
    pub fit_t_min: Option<f64>,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct HomogeneousReport {
    #[serde(rename = "R0")]
    pub r0: f64,
    pub u_star: Option<f64>,
    pub final_size: f64,
    /// Largest gap between the SI and cumulative-model values of `u`.
    pub agreement: f64,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct SteadySummary {
    pub iterations: usize,
    pub residual: f64,
    pub monotone: bool,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct SpatialReport {
    #[serde(rename = "R0")]
    pub r0: f64,
    pub u_star: Option<f64>,
    pub threshold: Option<f64>,
    pub monotone: bool,
    pub susceptible_range: (f64, f64),
    pub linear_spread: Option<DispersionReport>,
    pub front_speed: Option<f64>,
    pub steady: Option<SteadySummary>,
}

pub fn epidemic(c: &Common) -> Result<(), CliError> {
    let cfg: EpidemicConfig = load(&c.config)?;
    let p = EpidemicParams::new(cfg.s0, cfg.beta, cfg.alpha)?;
    let out_dir = c.out.clone();
    match cfg.i0 {
        InfectedDesc::Uniform { value } => {
            let (Some(t_end), Some(dt)) = (cfg.t_end, cfg.dt) else {
                return Err(config_error("a uniform I0 needs 't_end' and 'dt'"));
            };
            if cfg.kernel.is_some() || cfg.grid.is_some() || cfg.evolution.is_some() || cfg.steady {
                return Err(config_error("kernel, grid, evolution and steady apply to spatial I0 only"));
            }
            let tr = epidemics::si_ode(&p, value, t_end, dt)?;
            let report = HomogeneousReport {
                r0: epidemics::r0(&p),
                u_star: epidemics::u_star(&p).ok(),
                final_size: epidemics::final_size(&p, value)?,
                agreement: tr.agreement(),
            };
            let out = OutDir::create(&out_dir)?;
            let rows = (0..tr.t.len()).map(|j| vec![tr.t[j], tr.s[j], tr.i[j], tr.u[j]]);
            out.csv("si.csv", &["t", "S", "I", "u"], rows)?;
            out.json("epidemic.json", &report)
        }
        InfectedDesc::Bump { height, width, center } => {
            let (Some(kd), Some(grid), Some(evo)) = (&cfg.kernel, &cfg.grid, &cfg.evolution) else {
                return Err(config_error("a bump I0 needs 'kernel', 'grid' and 'evolution'"));
            };
            if cfg.t_end.is_some() || cfg.dt.is_some() {
                return Err(config_error("'t_end' and 'dt' belong in 'evolution' for spatial runs"));
            }
            let (report, run, steady) = spatial_epidemic(&p, (height, width, center), kd, grid, evo, cfg.steady, cfg.fit_t_min)?;
            let out = OutDir::create(&out_dir)?;
            write_snapshots(&out, &run.snapshots)?;
            write_traces(&out, &run.traces)?;
            if let Some(s) = &steady {
                write_field(&out, "steady.csv", "u", s)?;
            }
            out.json("epidemic.json", &report)
        }
    }
}

#[allow(clippy::type_complexity)]
pub fn spatial_epidemic(
    p: &EpidemicParams,
    bump: (f64, f64, f64),
    kd: &KernelDesc,
    grid: &GridDesc,
    evo: &EvolutionConfig,
    steady: bool,
    fit_t_min: Option<f64>,
) -> Result<(SpatialReport, cauchy::Simulation, Option<Field>), CliError> {
    let k = kd.build()?.with_mass(p.beta);
    let (height, width, center) = bump;
    let i0 = InitialDesc::Bump { height, width, center }.field(grid)?;
    let run = epidemics::kendall_simulate(p, &i0, &k, evo)?;
    let super_critical = epidemics::r0(p) > 1.0;
    let linear_spread = if super_critical { Some(epidemics::linear_spread(p, &k)?) } else { None };
    let t_min = fit_t_min.unwrap_or(0.5 * evo.t_end);
    let front_speed = run.simulation.traces.first().and_then(|tr| frontfit::fit_speed(tr, t_min).ok());
    let (steady_summary, steady_field) = if steady {
        let s = epidemics::kendall_steady(p, &i0, &k, None)?;
        (Some(SteadySummary { iterations: s.iterations, residual: s.residual, monotone: s.monotone }), Some(s.field))
    } else {
        (None, None)
    };
    let report = SpatialReport {
        r0: epidemics::r0(p),
        u_star: epidemics::u_star(p).ok(),
        threshold: run.threshold.is_finite().then_some(run.threshold),
        monotone: run.monotone,
        susceptible_range: run.susceptible_range,
        linear_spread,
        front_speed,
        steady: steady_summary,
    };
    Ok((report, run.simulation, steady_field))
}

// ---------------------------------------------------------------- heatkernel

fn one() -> f64 {
    1.0
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct HeatGrid {
    pub half_length: f64,
    pub h: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatConfig {
    pub kernel: KernelDesc,
    /// Slope at zero that fixes the tilt `lambda_*`.
    #[serde(default = "one")]
    pub fprime0: f64,
    pub grid: HeatGrid,
    pub times: Vec<f64>,
    pub delta: f64,
    pub gamma: f64,
    /// Half-width of the cosine bumps used as initial data.
    #[serde(default = "one")]
    pub bump_width: f64,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct HeatEntry {
    #[serde(flatten)]
    pub gaussian: GaussianReport,
    /// Tilted Dirichlet slope over its limit; absent for `t < 10`.
    pub slope_ratio: Option<f64>,
}

pub fn heat_entries(cfg: &HeatConfig) -> Result<Vec<HeatEntry>, CliError> {
    let k = cfg.kernel.build()?;
    let rep = Dispersion::continuous(&k, cfg.fprime0).critical()?;
    let tp = heatkernel::build_symbol(&k.tilted(rep.lambda_star));
    let HeatGrid { half_length, h } = cfg.grid;
    if !(h > 0.0 && half_length > 4.0 * cfg.bump_width && cfg.bump_width > 0.0) {
        return Err(config_error("heat grid needs h > 0 and half_length > 4 bump widths"));
    }
    let n = (half_length / h).round() as usize;
    let w = cfg.bump_width;
    let full = InitialDesc::Bump { height: 1.0, width: w, center: 0.0 };
    let v0 = Field::from_fn(-(n as f64) * h, h, 2 * n + 1, (0.0, 0.0), |x| full.sample(x));
    let half = InitialDesc::Bump { height: 1.0, width: w, center: 2.0 * w };
    let v0_half = Field::from_fn(0.0, h, n + 1, (0.0, 0.0), |x| half.sample(x));
    let late: Vec<f64> = cfg.times.iter().copied().filter(|&t| t >= 10.0).collect();
    let slope = heatkernel::slope_law_check(&tp, &v0_half, &late, cfg.gamma)?;
    cfg.times
        .iter()
        .map(|&t| {
            let gaussian = heatkernel::gaussian_compare(&tp, &v0, t, cfg.delta)?;
            let slope_ratio = slope.times.iter().position(|&s| s == t).map(|j| slope.tilted_ratio[j]);
            Ok(HeatEntry { gaussian, slope_ratio })
        })
        .collect::<Result<_, frontlab::Error>>()
        .map_err(CliError::from)
}

pub fn heatkernel(c: &Common) -> Result<(), CliError> {
    let cfg: HeatConfig = load(&c.config)?;
    let entries = heat_entries(&cfg)?;
    OutDir::create(&c.out)?.json("heatkernel.json", &entries)
}

// ---------------------------------------------------------------- fit

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Speed,
    LogLaw,
    Relaxation,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Trace CSV, relative to the config file.
    pub trace: PathBuf,
    pub law: Law,
    pub c_known: Option<f64>,
    #[serde(default)]
    pub t_min: f64,
}

#[derive(Serialize, Debug, PartialEq)]
#[serde(untagged)]
pub enum FitOutput {
    Speed { c: f64 },
    Law(FitResult),
}

pub fn fit_trace(cfg: &FitConfig, trace: &FrontTrace) -> Result<FitOutput, CliError> {
    let known = || cfg.c_known.ok_or_else(|| config_error("this law needs 'c_known'"));
    Ok(match cfg.law {
        Law::Speed => FitOutput::Speed { c: frontfit::fit_speed(trace, cfg.t_min)? },
        Law::LogLaw => FitOutput::Law(frontfit::fit_log_law(trace, known()?, cfg.t_min)?),
        Law::Relaxation => FitOutput::Law(frontfit::fit_relaxation(trace, known()?, cfg.t_min)?),
    })
}

pub fn fit(c: &Common) -> Result<(), CliError> {
    let cfg: FitConfig = load(&c.config)?;
    let path = c.config.parent().unwrap_or(Path::new(".")).join(&cfg.trace);
    let (times, xs) = read_trace(&path)?;
    let trace = FrontTrace { theta: f64::NAN, times, positions: xs.into_iter().map(Some).collect() };
    let result = fit_trace(&cfg, &trace)?;
    OutDir::create(&c.out)?.json("fit.json", &result)
}
