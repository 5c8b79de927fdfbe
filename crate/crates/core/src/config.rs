//! JSON descriptors for kernels, reactions, grids and initial data.
//!
//! Every descriptor rejects unknown keys.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernels::{make_kernel, Kernel, Shape};
use crate::reactions::{builtin, Reaction};

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDesc {
    /// `indicator`, `cosine_bump`, `polynomial_bump` or `table`.
    pub shape: String,
    pub halfwidth: f64,
    /// Present means the kernel is `eps^{-1} K(x / eps)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl KernelDesc {
    pub fn build(&self) -> Result<Kernel> {
        let base = match (self.shape.as_str(), &self.samples) {
            ("indicator", None) => Shape::Indicator,
            ("cosine_bump", None) => Shape::CosineBump,
            ("polynomial_bump", None) => Shape::PolynomialBump,
            ("table", Some(s)) => Shape::Table(s.clone()),
            ("table", None) => return Err(Error::BadParams("table kernel needs samples".into())),
            (_, Some(_)) => return Err(Error::BadParams("samples only apply to table kernels".into())),
            (other, None) => return Err(Error::BadParams(format!("unknown kernel shape '{other}'"))),
        };
        let shape = match self.epsilon {
            Some(epsilon) => Shape::Scaled { inner: Box::new(base), epsilon },
            None => base,
        };
        make_kernel(&shape, self.halfwidth, self.normalize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionDesc {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ReactionDesc {
    pub fn build(&self) -> Result<Reaction> {
        builtin(&self.name, &self.params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDesc {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
}

impl GridDesc {
    pub fn len(&self) -> Result<usize> {
        if !(self.h > 0.0 && self.x_max > self.x_min) {
            return Err(Error::BadParams("grid needs h > 0 and x_max > x_min".into()));
        }
        Ok(((self.x_max - self.x_min) / self.h).round() as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDesc {
    /// `1` left of `position`, `0` right of it.
    Step { position: f64 },
    /// `height (1 + cos(pi (x - center) / width)) / 2` on `|x - center| < width`.
    Bump { height: f64, width: f64, center: f64 },
}

impl InitialDesc {
    pub fn sample(&self, x: f64) -> f64 {
        match *self {
            InitialDesc::Step { position } => {
                if x < position {
                    1.0
                } else {
                    0.0
                }
            }
            InitialDesc::Bump { height, width, center } => {
                let s = (x - center) / width;
                if s.abs() < 1.0 {
                    height * 0.5 * (1.0 + (PI * s).cos())
                } else {
                    0.0
                }
            }
        }
    }

    pub fn left_state(&self) -> f64 {
        match self {
            InitialDesc::Step { .. } => 1.0,
            InitialDesc::Bump { .. } => 0.0,
        }
    }

    pub fn field(&self, grid: &GridDesc) -> Result<Field> {
        if let InitialDesc::Bump { height, width, .. } = *self {
            if !(height >= 0.0 && width > 0.0) {
                return Err(Error::BadParams("bump needs height >= 0 and width > 0".into()));
            }
        }
        let n = grid.len()?;
        Ok(Field::from_fn(grid.x_min, grid.h, n, (self.left_state(), 0.0), |x| self.sample(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::EvolutionConfig;

    #[test]
    fn kernel_descriptor_round_trip() {
        let d: KernelDesc = serde_json::from_str(r#"{"shape": "cosine_bump", "halfwidth": 1.0, "epsilon": 0.1}"#).unwrap();
        assert!(d.normalize);
        let k = d.build().unwrap();
        assert!((k.halfwidth() - 0.1).abs() < 1e-15);
        let back: KernelDesc = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<KernelDesc>(r#"{"shape": "indicator", "halfwidth": 1, "width": 2}"#).is_err());
        assert!(serde_json::from_str::<ReactionDesc>(r#"{"name": "logistic", "rate": 2}"#).is_err());
        assert!(serde_json::from_str::<EvolutionConfig>(r#"{"dt": 0.1, "tend": 5}"#).is_err());
        assert!(serde_json::from_str::<InitialDesc>(r#"{"type": "step", "position": 0, "h": 1}"#).is_err());
    }

    #[test]
    fn evolution_defaults_fill_in() {
        let c: EvolutionConfig = serde_json::from_str(r#"{"dt": 0.01, "scheme": "splitting"}"#).unwrap();
        assert_eq!(c.dt, 0.01);
        assert_eq!(c.thresholds, vec![0.5]);
    }

    #[test]
    fn bad_shapes() {
        let d = KernelDesc { shape: "gauss".into(), halfwidth: 1.0, epsilon: None, normalize: true, samples: None };
        assert!(d.build().is_err());
        let d = KernelDesc { shape: "table".into(), ..d };
        assert!(d.build().is_err());
    }

    #[test]
    fn initial_data() {
        let g = GridDesc { x_min: -2.0, x_max: 2.0, h: 0.5 };
        let f = InitialDesc::Step { position: 0.0 }.field(&g).unwrap();
        assert_eq!(f.values, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = InitialDesc::Bump { height: 0.1, width: 1.0, center: 0.0 }.field(&g).unwrap();
        assert_eq!(b.values[4], 0.1);
        assert_eq!(b.clamp_left, 0.0);
    }
}
