//! Reaction terms `f(u)` with `f(0) = f(upper_zero) = 0`, and their KPP/ZFK classification.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::bisect;

const LIP_SAMPLES: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub enum ReactionKind {
    Logistic,
    KppCubic,
    HadelerRothe { a: f64 },
    /// `eps u` below `theta`, `theta1 - u` above, C1 cubic blend of half-width `smoothing`.
    ZfkPiecewise { eps: f64, theta: f64, theta1: f64, smoothing: f64 },
    Kendall { s0: f64, beta: f64, alpha: f64 },
}

/// A reaction term multiplied by a constant `rate`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    kind: ReactionKind,
    rate: f64,
    upper_zero: f64,
    slope0: f64,
    lip: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kind {
    #[serde(rename = "KPP")]
    Kpp,
    #[serde(rename = "ZFK")]
    Zfk,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub kind: Kind,
    pub theta0: Option<f64>,
    pub witness: f64,
}

impl Reaction {
    pub fn new(kind: ReactionKind) -> Result<Reaction> {
        let bad = |m: &str| Err(Error::BadParams(m.to_string()));
        let upper_zero = match kind {
            ReactionKind::Logistic | ReactionKind::KppCubic => 1.0,
            ReactionKind::HadelerRothe { a } => {
                if !(a >= 0.0 && a.is_finite()) {
                    return bad("hadeler_rothe needs a >= 0");
                }
                1.0
            }
            ReactionKind::ZfkPiecewise { eps, theta, theta1, smoothing } => {
                if !(eps > 0.0 && 0.0 < theta && theta < theta1 && theta1 < 1.0) {
                    return bad("zfk_piecewise needs eps > 0 and 0 < theta < theta1 < 1");
                }
                if !(smoothing > 0.0 && theta - smoothing > 0.0 && theta + smoothing < theta1) {
                    return bad("zfk_piecewise smoothing band must fit inside (0, theta1)");
                }
                theta1
            }
            ReactionKind::Kendall { s0, beta, alpha } => {
                if !(s0 > 0.0 && beta > 0.0 && alpha > 0.0) {
                    return bad("kendall needs S0, beta, alpha > 0");
                }
                kendall_root(s0, beta, alpha, 0.0)?
            }
        };
        let mut r = Reaction { kind, rate: 1.0, upper_zero, slope0: 0.0, lip: 0.0 };
        r.slope0 = r.df(0.0);
        r.lip = r.sampled_lipschitz();
        Ok(r)
    }

    pub fn logistic() -> Reaction {
        Reaction::new(ReactionKind::Logistic).unwrap()
    }

    pub fn kpp_cubic() -> Reaction {
        Reaction::new(ReactionKind::KppCubic).unwrap()
    }

    pub fn hadeler_rothe(a: f64) -> Result<Reaction> {
        Reaction::new(ReactionKind::HadelerRothe { a })
    }

    pub fn zfk_piecewise(eps: f64, theta: f64, theta1: f64, smoothing: f64) -> Result<Reaction> {
        Reaction::new(ReactionKind::ZfkPiecewise { eps, theta, theta1, smoothing })
    }

    pub fn kendall(s0: f64, beta: f64, alpha: f64) -> Result<Reaction> {
        Reaction::new(ReactionKind::Kendall { s0, beta, alpha })
    }

    /// Same reaction multiplied by `rate > 0`.
    pub fn with_rate(&self, rate: f64) -> Result<Reaction> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::BadParams(format!("rate must be positive, got {rate}")));
        }
        let mut r = self.clone();
        r.rate = self.rate * rate;
        r.slope0 = self.slope0 * rate;
        r.lip = self.lip * rate;
        Ok(r)
    }

    pub fn kind(&self) -> &ReactionKind {
        &self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn upper_zero(&self) -> f64 {
        self.upper_zero
    }

    pub fn slope_at_zero(&self) -> f64 {
        self.slope0
    }

    /// Max of `|f'|` sampled on `[0, upper_zero]`.
    pub fn lipschitz(&self) -> f64 {
        self.lip
    }

    pub fn f(&self, u: f64) -> f64 {
        self.rate * self.base_f(u)
    }

    pub fn df(&self, u: f64) -> f64 {
        self.rate * self.base_df(u)
    }

    fn base_f(&self, u: f64) -> f64 {
        match self.kind {
            ReactionKind::Logistic => u * (1.0 - u),
            ReactionKind::KppCubic => u * (1.0 - u) * (1.0 - u),
            ReactionKind::HadelerRothe { a } => u * (1.0 + a * u) * (1.0 - u),
            ReactionKind::ZfkPiecewise { eps, theta, theta1, smoothing } => {
                let (lo, hi) = (theta - smoothing, theta + smoothing);
                if u <= lo {
                    eps * u
                } else if u >= hi {
                    theta1 - u
                } else {
                    let (p0, m0, p1, m1) = (eps * lo, eps, theta1 - hi, -1.0);
                    let w = hi - lo;
                    let s = (u - lo) / w;
                    let (s2, s3) = (s * s, s * s * s);
                    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
                        + (s3 - 2.0 * s2 + s) * w * m0
                        + (-2.0 * s3 + 3.0 * s2) * p1
                        + (s3 - s2) * w * m1
                }
            }
            ReactionKind::Kendall { s0, beta, alpha } => -s0 * (-beta * u).exp_m1() - alpha * u,
        }
    }

    fn base_df(&self, u: f64) -> f64 {
        match self.kind {
            ReactionKind::Logistic => 1.0 - 2.0 * u,
            ReactionKind::KppCubic => (1.0 - u) * (1.0 - 3.0 * u),
            ReactionKind::HadelerRothe { a } => 1.0 + 2.0 * (a - 1.0) * u - 3.0 * a * u * u,
            ReactionKind::ZfkPiecewise { eps, theta, theta1, smoothing } => {
                let (lo, hi) = (theta - smoothing, theta + smoothing);
                if u <= lo {
                    eps
                } else if u >= hi {
                    -1.0
                } else {
                    let (p0, m0, p1, m1) = (eps * lo, eps, theta1 - hi, -1.0);
                    let w = hi - lo;
                    let s = (u - lo) / w;
                    let s2 = s * s;
                    ((6.0 * s2 - 6.0 * s) * p0 + (-6.0 * s2 + 6.0 * s) * p1) / w
                        + (3.0 * s2 - 4.0 * s + 1.0) * m0
                        + (3.0 * s2 - 2.0 * s) * m1
                }
            }
            ReactionKind::Kendall { s0, beta, alpha } => s0 * beta * (-beta * u).exp() - alpha,
        }
    }

    fn sampled_lipschitz(&self) -> f64 {
        (0..=LIP_SAMPLES)
            .map(|i| self.df(self.upper_zero * i as f64 / LIP_SAMPLES as f64).abs())
            .fold(0.0, f64::max)
    }

    /// `g(u) = f'(0) u - f(u)`.
    pub fn deviation(&self, u: f64) -> f64 {
        self.slope0 * u - self.f(u)
    }

    pub fn classify(&self, grid_size: usize) -> Classification {
        let n = grid_size.max(100);
        let tol = 1e-12 * self.slope0.abs();
        let us: Vec<f64> = (1..=n).map(|i| self.upper_zero * i as f64 / (n + 1) as f64).collect();
        let dev: Vec<f64> = us.iter().map(|&u| self.deviation(u)).collect();
        if dev.iter().all(|&g| g >= -tol) {
            let (i, _) = dev
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &g)| if g < acc.1 { (i, g) } else { acc });
            return Classification { kind: Kind::Kpp, theta0: None, witness: us[i] };
        }
        let run = dev.iter().take_while(|&&g| g <= tol).count();
        if run > 0 && us[run - 1] >= 2.0 * self.upper_zero / n as f64 {
            let witness = if run < n { us[run] } else { us[run - 1] };
            return Classification { kind: Kind::Zfk, theta0: Some(us[run - 1]), witness };
        }
        let first_bad = dev.iter().position(|&g| g < -tol).unwrap_or(0);
        Classification { kind: Kind::Neither, theta0: None, witness: us[first_bad] }
    }
}

/// Positive root of `alpha u = S0 (1 - e^{-beta u}) + i0`.
pub fn kendall_root(s0: f64, beta: f64, alpha: f64, i0: f64) -> Result<f64> {
    let r0 = s0 * beta / alpha;
    if i0 <= 0.0 && r0 <= 1.0 {
        return Err(Error::NoPositiveRoot { r0 });
    }
    let g = |u: f64| -s0 * (-beta * u).exp_m1() + i0 - alpha * u;
    let lo = 1e-12 * s0.min(1.0);
    let hi = (s0 + i0) / alpha * 1.5 + 1.0;
    if g(lo) <= 0.0 || g(hi) >= 0.0 {
        return Err(Error::NoPositiveRoot { r0 });
    }
    let (a, b) = bisect(g, lo, hi, 1e-14 * hi.max(1.0));
    Ok(0.5 * (a + b))
}

/// Build a reaction from a name and named parameters, as in the JSON descriptor.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Reaction> {
    let allowed: &[&str] = match name {
        "logistic" | "kpp_cubic" => &["rate"],
        "hadeler_rothe" => &["a", "rate"],
        "zfk_piecewise" => &["eps", "theta", "theta1", "smoothing", "rate"],
        "kendall" => &["S0", "beta", "alpha"],
        _ => return Err(Error::BadParams(format!("unknown reaction '{name}'"))),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::BadParams(format!("unknown parameter '{k}' for {name}")));
    }
    let need = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::BadParams(format!("{name} needs parameter '{k}'")))
    };
    let r = match name {
        "logistic" => Reaction::logistic(),
        "kpp_cubic" => Reaction::kpp_cubic(),
        "hadeler_rothe" => Reaction::hadeler_rothe(need("a")?)?,
        "zfk_piecewise" => Reaction::zfk_piecewise(
            need("eps")?,
            need("theta")?,
            need("theta1")?,
            params.get("smoothing").copied().unwrap_or(0.02),
        )?,
        _ => Reaction::kendall(need("S0")?, need("beta")?, need("alpha")?)?,
    };
    match params.get("rate") {
        Some(&rate) => r.with_rate(rate),
        None => Ok(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn all_reactions() -> Vec<Reaction> {
        vec![
            Reaction::logistic(),
            Reaction::kpp_cubic(),
            Reaction::hadeler_rothe(3.0).unwrap(),
            Reaction::hadeler_rothe(10.0).unwrap().with_rate(0.2).unwrap(),
            Reaction::zfk_piecewise(0.1, 0.3, 0.8, 0.02).unwrap(),
            Reaction::kendall(2.0, 1.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn logistic_values() {
        let r = Reaction::logistic();
        assert_eq!(r.f(0.5), 0.25);
        assert_eq!(r.slope_at_zero(), 1.0);
        assert_relative_eq!(r.deviation(0.3), 0.09, epsilon = 1e-15);
        assert_eq!(r.lipschitz(), 1.0);
    }

    #[test]
    fn hadeler_rothe_zero_is_logistic() {
        let (a, b) = (Reaction::hadeler_rothe(0.0).unwrap(), Reaction::logistic());
        for i in 0..100 {
            let u = i as f64 / 99.0;
            assert_eq!(a.f(u), b.f(u));
        }
        assert_eq!(a.classify(1000).kind, Kind::Kpp);
    }

    #[test]
    fn hadeler_rothe_lipschitz() {
        assert_relative_eq!(Reaction::hadeler_rothe(10.0).unwrap().lipschitz(), 11.0, max_relative = 1e-12);
    }

    #[test]
    fn kendall_upper_zero_matches_bisection_oracle() {
        let r = Reaction::kendall(2.0, 1.0, 1.0).unwrap();
        let (mut lo, mut hi) = (1e-6, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m - 2.0 * (1.0 - (-m as f64).exp()) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert_relative_eq!(r.upper_zero(), lo, max_relative = 1e-13);
        assert!(r.f(r.upper_zero()).abs() < 1e-12);
        assert_eq!(r.slope_at_zero(), 1.0);
        assert!(matches!(Reaction::kendall(1.0, 1.0, 2.0), Err(Error::NoPositiveRoot { .. })));
    }

    #[test]
    fn zfk_piecewise_is_linear_below_band() {
        let r = Reaction::zfk_piecewise(0.1, 0.3, 0.8, 0.02).unwrap();
        assert_eq!(r.deviation(0.2), 0.0);
        assert_relative_eq!(r.f(0.5), 0.3, epsilon = 1e-15);
        assert_eq!(r.upper_zero(), 0.8);
        let c = r.classify(1000);
        assert_eq!(c.kind, Kind::Zfk);
        assert!(c.theta0.unwrap() > 0.7);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(Reaction::logistic().classify(100).kind, Kind::Kpp);
        assert_eq!(Reaction::hadeler_rothe(1.0).unwrap().classify(500).kind, Kind::Kpp);
        assert_eq!(Reaction::kendall(2.0, 1.0, 1.0).unwrap().classify(500).kind, Kind::Kpp);
        // u(1 + a u)(1 - u) - u = u^2 (a - 1 - a u) >= 0 exactly for u <= (a - 1)/a.
        let c = Reaction::hadeler_rothe(3.0).unwrap().classify(1000);
        assert_eq!(c.kind, Kind::Zfk);
        assert!((c.theta0.unwrap() - 2.0 / 3.0).abs() < 2e-3);
    }

    #[test]
    fn rescaled_reaction_classifies_identically() {
        for r in all_reactions() {
            let s = r.with_rate(1e-3).unwrap();
            assert_eq!(r.classify(400).kind, s.classify(400).kind);
        }
    }

    #[test]
    fn builtin_rejects_unknown_names_and_params() {
        let mut p = BTreeMap::new();
        assert!(builtin("bistable", &p).is_err());
        p.insert("b".to_string(), 1.0);
        assert!(builtin("logistic", &p).is_err());
        let mut q = BTreeMap::new();
        q.insert("a".to_string(), 2.5);
        q.insert("rate".to_string(), 0.5);
        let r = builtin("hadeler_rothe", &q).unwrap();
        assert_eq!(r.slope_at_zero(), 0.5);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for r in all_reactions() {
            let scale = r.upper_zero();
            let step = 1e-6 * scale;
            for i in 1..1000 {
                let u = scale * i as f64 / 1000.0;
                if let ReactionKind::ZfkPiecewise { theta, smoothing, .. } = *r.kind() {
                    // f'' jumps at the ends of the blend band.
                    if (u - theta).abs() > smoothing - 2.0 * step && (u - theta).abs() < smoothing + 2.0 * step {
                        continue;
                    }
                }
                let fd = (r.f(u + step) - r.f(u - step)) / (2.0 * step);
                let d = r.df(u);
                assert!((fd - d).abs() <= 1e-6 * d.abs().max(r.lipschitz() * 1e-3), "{r:?} at {u}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn zeros_and_positivity() {
        for r in all_reactions() {
            assert!(r.f(0.0).abs() <= 1e-12);
            assert!(r.f(r.upper_zero()).abs() <= 1e-12);
            assert_eq!(r.slope_at_zero(), r.df(0.0));
            for i in 1..200 {
                assert!(r.f(r.upper_zero() * i as f64 / 200.0) > 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn deviation_sign_matches_classification(a in 0.0f64..12.0, rate in 0.01f64..3.0) {
            let r = Reaction::hadeler_rothe(a).unwrap().with_rate(rate).unwrap();
            let c = r.classify(400);
            for i in 0..=400 {
                let u = i as f64 / 400.0;
                match c.kind {
                    Kind::Kpp => prop_assert!(r.deviation(u) >= -1e-12),
                    Kind::Zfk => if u <= c.theta0.unwrap() { prop_assert!(r.deviation(u) <= 1e-12) },
                    Kind::Neither => {}
                }
            }
            if a <= 1.0 {
                prop_assert_eq!(c.kind, Kind::Kpp);
            } else if (a - 1.0) / a > 2.0 / 400.0 {
                prop_assert_eq!(c.kind, Kind::Zfk);
            }
        }
    }
}
