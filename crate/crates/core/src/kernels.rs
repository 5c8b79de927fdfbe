//! Even, compactly supported diffusion kernels and their discretisation.
//!
//! A kernel is a raw profile on `[-1, 1]` stretched to `[-R, R]` and multiplied by an
//! amplitude. Integrals against the kernel use a fixed Simpson node set on `[0, R]`
//! and sum `g(z) + g(-z)`, so odd integrands give exactly zero.

use crate::error::{Error, Result};
use crate::numerics::simpson;

const QUAD_PANELS: usize = 4096;

/// Kernel shape descriptor, as accepted by [`make_kernel`].
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Indicator,
    CosineBump,
    PolynomialBump,
    /// `eps^{-1} K(x / eps)` for the inner shape.
    Scaled { inner: Box<Shape>, epsilon: f64 },
    /// Samples at equally spaced points across `[-R, R]`, linearly interpolated.
    Table(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
enum Profile {
    Indicator,
    CosineBump,
    PolynomialBump,
    Table(Vec<f64>),
}

impl Profile {
    fn raw(&self, s: f64) -> f64 {
        let s = s.abs();
        if s > 1.0 {
            return 0.0;
        }
        match self {
            Profile::Indicator => 1.0,
            Profile::CosineBump => 0.5 * (1.0 + (std::f64::consts::PI * s).cos()),
            Profile::PolynomialBump => {
                let q = 1.0 - s * s;
                q * q
            }
            Profile::Table(v) => {
                // Tables are even, so interpolating on the right half is enough.
                let n = v.len() - 1;
                let pos = (s + 1.0) * 0.5 * n as f64;
                let i = (pos.floor() as usize).min(n - 1);
                let frac = pos - i as f64;
                v[i] * (1.0 - frac) + v[i + 1] * frac
            }
        }
    }

    /// Points of `[0, 1]` where the profile may fail to be smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::Table(v) => {
                let n = (v.len() - 1) as f64;
                let mut b: Vec<f64> = (0..v.len())
                    .map(|j| -1.0 + 2.0 * j as f64 / n)
                    .filter(|s| *s > 1e-14)
                    .collect();
                b.insert(0, 0.0);
                if let Some(last) = b.last_mut() {
                    *last = 1.0;
                }
                b
            }
            _ => vec![0.0, 1.0],
        }
    }
}

/// Diffusion kernel `K`, even and supported in `[-halfwidth, halfwidth]`.
#[derive(Clone, Debug)]
pub struct Kernel {
    profile: Profile,
    halfwidth: f64,
    amplitude: f64,
    epsilon: Option<f64>,
    /// Simpson nodes `(z, q)` on `[0, R]`; `int g K = sum q (g(z) + g(-z))`.
    nodes: Vec<(f64, f64)>,
    moments: [f64; 5],
}

/// Build a kernel from a shape descriptor.
pub fn make_kernel(shape: &Shape, halfwidth: f64, normalize: bool) -> Result<Kernel> {
    if !(halfwidth > 0.0 && halfwidth.is_finite()) {
        return Err(Error::BadParams(format!("halfwidth must be positive, got {halfwidth}")));
    }
    let profile = match shape {
        Shape::Indicator => Profile::Indicator,
        Shape::CosineBump => Profile::CosineBump,
        Shape::PolynomialBump => Profile::PolynomialBump,
        Shape::Scaled { inner, epsilon } => {
            return make_kernel(inner, halfwidth, normalize)?.scaled(*epsilon);
        }
        Shape::Table(samples) => {
            check_table(samples)?;
            Profile::Table(samples.clone())
        }
    };
    let k = Kernel::assemble(profile, halfwidth, 1.0, None);
    if k.mass() <= 0.0 {
        return Err(Error::BadParams("kernel has zero mass".into()));
    }
    Ok(if normalize { k.with_mass(1.0) } else { k })
}

fn check_table(samples: &[f64]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::BadParams("kernel table needs at least two samples".into()));
    }
    for (index, &value) in samples.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::BadParams(format!("non-finite table sample at {index}")));
        }
        if value < 0.0 {
            return Err(Error::NegativeSample { index, value });
        }
    }
    let n = samples.len();
    for index in 0..n / 2 {
        let gap = (samples[index] - samples[n - 1 - index]).abs();
        if gap > 1e-12 {
            return Err(Error::AsymmetricTable { index, gap });
        }
    }
    Ok(())
}

impl Kernel {
    fn assemble(profile: Profile, halfwidth: f64, amplitude: f64, epsilon: Option<f64>) -> Kernel {
        let breaks = profile.breakpoints();
        let segments = breaks.len() - 1;
        let per = (QUAD_PANELS / segments).max(2);
        let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(segments * (per + 1));
        for w in breaks.windows(2) {
            for (s, ws) in simpson(w[0], w[1], per) {
                let q = ws * halfwidth * amplitude * profile.raw(s);
                match nodes.last_mut() {
                    Some(last) if (last.0 - s * halfwidth).abs() < 1e-15 * halfwidth => last.1 += q,
                    _ => nodes.push((s * halfwidth, q)),
                }
            }
        }
        let mut k = Kernel { profile, halfwidth, amplitude, epsilon, nodes, moments: [0.0; 5] };
        for n in 0..5 {
            k.moments[n] = if n % 2 == 1 { 0.0 } else { k.integrate(|z| z.powi(n as i32)) };
        }
        k
    }

    /// Same shape with a prescribed total mass.
    pub fn with_mass(&self, mass: f64) -> Kernel {
        let factor = mass / self.mass();
        Kernel::assemble(self.profile.clone(), self.halfwidth, self.amplitude * factor, self.epsilon)
    }

    /// `eps^{-1} K(x / eps)`: same mass, support `eps * halfwidth`.
    pub fn scaled(&self, epsilon: f64) -> Result<Kernel> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::BadParams(format!("epsilon must be positive, got {epsilon}")));
        }
        let eps = self.epsilon.unwrap_or(1.0) * epsilon;
        Ok(Kernel::assemble(
            self.profile.clone(),
            self.halfwidth * epsilon,
            self.amplitude / epsilon,
            Some(eps),
        ))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * self.profile.raw(x / self.halfwidth)
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    /// Accumulated scaling factor if the kernel was built by [`Kernel::scaled`].
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn mass(&self) -> f64 {
        self.moments[0]
    }

    /// `int z^n K(z) dz`.
    pub fn moment(&self, n: u32) -> f64 {
        if n % 2 == 1 {
            0.0
        } else if n < 5 {
            self.moments[n as usize]
        } else {
            self.integrate(|z| z.powi(n as i32))
        }
    }

    /// `int g(z) K(z) dz` on the kernel's quadrature nodes.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(z, q)| q * (g(z) + g(-z))).sum()
    }

    /// Pair-summed nodes `(z, q)` with `z >= 0`.
    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    /// Discrete weights `w_j ~ h K(jh)`, even in `j` and summing to the mass.
    pub fn sample_weights(&self, h: f64) -> Result<Stencil> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::BadParams(format!("grid step must be positive, got {h}")));
        }
        let ratio = self.halfwidth / h;
        if ratio < 8.0 - 1e-9 {
            return Err(Error::UnderResolved { ratio });
        }
        let rounded = ratio.round();
        let aligned = (ratio - rounded).abs() <= 1e-9 * ratio;
        let m = if aligned { rounded as usize } else { ratio.floor() as usize };
        let mut w: Vec<f64> = (0..=2 * m)
            .map(|i| {
                let z = ((i as f64 - m as f64) * h).clamp(-self.halfwidth, self.halfwidth);
                h * self.eval(z)
            })
            .collect();
        if aligned {
            // Gregory end corrections: fourth order for integrands smooth on [-R, R].
            const END: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
            let last = w.len() - 1;
            for (k, c) in END.iter().enumerate() {
                w[k] *= c;
                w[last - k] *= c;
            }
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::UnderResolved { ratio });
        }
        let scale = self.mass() / total;
        for v in &mut w {
            *v *= scale;
        }
        // Symmetrise against rounding in the two halves.
        for j in 0..m {
            let avg = 0.5 * (w[j] + w[2 * m - j]);
            w[j] = avg;
            w[2 * m - j] = avg;
        }
        Ok(Stencil { h, lo: -(m as isize), weights: w })
    }

    pub fn tilted(&self, lambda: f64) -> TiltedKernel {
        TiltedKernel { base: self.clone(), lambda }
    }
}

/// `d_* = 1/2 int z^2 e^{-lambda z} K(z) dz`.
pub fn tilted_diffusivity(k: &Kernel, lambda_star: f64) -> f64 {
    0.5 * k.integrate(|z| z * z * (-lambda_star * z).exp())
}

/// `int z^n K(z) dz`.
pub fn moment(k: &Kernel, n: u32) -> f64 {
    k.moment(n)
}

/// Kernel multiplied by an exponential weight, `K_*(x) = e^{lambda x} K(x)`.
#[derive(Clone, Debug)]
pub struct TiltedKernel {
    pub base: Kernel,
    pub lambda: f64,
}

impl TiltedKernel {
    pub fn eval(&self, x: f64) -> f64 {
        (self.lambda * x).exp() * self.base.eval(x)
    }

    pub fn halfwidth(&self) -> f64 {
        self.base.halfwidth()
    }

    /// `int z^n K_*(z) dz`.
    pub fn moment(&self, n: u32) -> f64 {
        let l = self.lambda;
        self.base.integrate(|z| z.powi(n as i32) * (l * z).exp())
    }

    pub fn mass(&self) -> f64 {
        self.moment(0)
    }

    /// Base weights multiplied by `e^{lambda z_j}`.
    pub fn sample_weights(&self, h: f64) -> Result<Stencil> {
        let mut s = self.base.sample_weights(h)?;
        let lo = s.lo;
        for (i, w) in s.weights.iter_mut().enumerate() {
            *w *= (self.lambda * (lo + i as isize) as f64 * h).exp();
        }
        Ok(s)
    }
}

/// Discrete convolution weights at offsets `lo, lo + 1, ...` (in grid steps).
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub h: f64,
    pub lo: isize,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest |offset|.
    pub fn reach(&self) -> usize {
        let hi = self.lo + self.weights.len() as isize - 1;
        self.lo.unsigned_abs().max(hi.unsigned_abs())
    }

    /// Iterator over `(offset, weight)`.
    pub fn iter(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, &w)| (self.lo + i as isize, w))
    }

    /// `sum_j w_j (j h)^n`.
    pub fn moment(&self, n: i32) -> f64 {
        self.iter().map(|(j, w)| w * (j as f64 * self.h).powi(n)).sum()
    }

    pub fn is_even(&self) -> bool {
        let n = self.weights.len();
        self.lo == -((n as isize - 1) / 2)
            && n % 2 == 1
            && (0..n / 2).all(|j| self.weights[j] == self.weights[n - 1 - j])
    }
}
