//! Asymptotic fits of front positions `X(t)`: speed, logarithmic delay, offset and relaxation rate.

use serde::Serialize;

use crate::cauchy::FrontTrace;
use crate::error::{Error, Result};
use crate::numerics::least_squares;

const MIN_SAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    #[serde(rename = "c")]
    pub c_fit: f64,
    #[serde(rename = "mu")]
    pub mu_fit: f64,
    #[serde(rename = "b")]
    pub b_fit: f64,
    #[serde(rename = "omega")]
    pub omega_fit: Option<f64>,
    pub rms: f64,
    pub window: (f64, f64),
}

/// Defined samples with `t >= t_min`.
fn window(trace: &FrontTrace, t_min: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (ts, xs) = trace.defined();
    let (ts, xs): (Vec<f64>, Vec<f64>) = ts.into_iter().zip(xs).filter(|(t, _)| *t >= t_min).unzip();
    if ts.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { found: ts.len(), needed: MIN_SAMPLES });
    }
    Ok((ts, xs))
}

/// Least-squares slope of `X` against `t`.
pub fn fit_speed(trace: &FrontTrace, t_min: f64) -> Result<f64> {
    let (ts, xs) = window(trace, t_min)?;
    let (c, _) = least_squares(&[ts, vec![1.0; xs.len()]], &xs);
    Ok(c[0])
}

/// `X(t) - c t = mu ln t + b` with `c` given.
pub fn fit_log_law(trace: &FrontTrace, c_known: f64, t_min: f64) -> Result<FitResult> {
    let (ts, xs) = window(trace, t_min)?;
    if ts[0] <= 0.0 {
        return Err(Error::BadParams("log law needs t_min > 0".into()));
    }
    let y: Vec<f64> = ts.iter().zip(&xs).map(|(t, x)| x - c_known * t).collect();
    let logs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let (c, rms) = least_squares(&[logs, vec![1.0; ts.len()]], &y);
    Ok(FitResult {
        c_fit: c_known,
        mu_fit: c[0],
        b_fit: c[1],
        omega_fit: None,
        rms,
        window: (ts[0], ts[ts.len() - 1]),
    })
}

/// `X(t) - c t = b + O(e^{-omega t})` with `c` given.
///
/// `b` is the mean offset over the last quarter of the window. `omega` is minus the slope of
/// `ln |X - c t - b|` over the samples that stand clear of the noise, taken as ten times the larger of
/// rounding noise and the scatter left in the last quarter. It is absent when fewer than three
/// samples qualify.
pub fn fit_relaxation(trace: &FrontTrace, c_known: f64, t_min: f64) -> Result<FitResult> {
    let (ts, xs) = window(trace, t_min)?;
    let y: Vec<f64> = ts.iter().zip(&xs).map(|(t, x)| x - c_known * t).collect();
    let n = y.len();
    let tail = &y[n - n / 4..];
    let b = tail.iter().sum::<f64>() / tail.len() as f64;
    let scatter = tail.iter().fold(0.0f64, |m, v| m.max((v - b).abs()));
    let rounding = f64::EPSILON * xs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 10.0 * scatter.max(rounding);
    // Only the leading stretch that stays above the floor carries the exponential.
    let keep = y.iter().take_while(|v| (*v - b).abs() > floor).count();
    let omega = if keep >= 3 {
        let logs: Vec<f64> = y[..keep].iter().map(|v| (v - b).abs().ln()).collect();
        let (c, _) = least_squares(&[ts[..keep].to_vec(), vec![1.0; keep]], &logs);
        Some(-c[0])
    } else {
        None
    };
    let rms = (y.iter().map(|v| (v - b).powi(2)).sum::<f64>() / n as f64).sqrt();
    Ok(FitResult { c_fit: c_known, mu_fit: 0.0, b_fit: b, omega_fit: omega, rms, window: (ts[0], ts[n - 1]) })
}

/// Change in `mu` per unit change in `c_known`: `-cov(t, ln t) / var(ln t)` over the window.
pub fn log_law_sensitivity(trace: &FrontTrace, t_min: f64) -> Result<f64> {
    let (ts, _) = window(trace, t_min)?;
    let n = ts.len() as f64;
    let logs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let (mt, ml) = (ts.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let cov: f64 = ts.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let var: f64 = logs.iter().map(|l| (l - ml).powi(2)).sum();
    Ok(-cov / var)
}
