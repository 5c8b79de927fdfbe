//! Sampled functions on a uniform grid, and the grid operators that act on them.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::kernels::{Kernel, Stencil};

/// Values `u(x0 + i h)`, `i = 0..n`, with constant far-field states on either side.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub clamp_left: f64,
    pub clamp_right: f64,
}

impl Field {
    pub fn new(x0: f64, h: f64, values: Vec<f64>, clamp_left: f64, clamp_right: f64) -> Field {
        Field { x0, h, values, clamp_left, clamp_right }
    }

    pub fn from_fn(x0: f64, h: f64, n: usize, clamps: (f64, f64), f: impl Fn(f64) -> f64) -> Field {
        let values = (0..n).map(|i| f(x0 + i as f64 * h)).collect();
        Field::new(x0, h, values, clamps.0, clamps.1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x(i))
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.len().saturating_sub(1))
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn index_of(&self, x: f64) -> usize {
        let i = ((x - self.x0) / self.h).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation, with the clamps outside the grid.
    pub fn sample(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.h;
        if s <= 0.0 {
            return if s < -1e-12 { self.clamp_left } else { self.values[0] };
        }
        let n = self.len();
        if s >= (n - 1) as f64 {
            return if s > (n - 1) as f64 + 1e-12 { self.clamp_right } else { self.values[n - 1] };
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Rightmost crossing of level `theta`, linearly interpolated.
    pub fn level_crossing(&self, theta: f64) -> Option<f64> {
        let v = &self.values;
        (0..v.len().saturating_sub(1)).rev().find_map(|i| {
            let (a, b) = (v[i] - theta, v[i + 1] - theta);
            if a * b > 0.0 {
                return None;
            }
            let frac = if a == b { 0.0 } else { a / (a - b) };
            Some(self.x(i) + frac * self.h)
        })
    }
}

/// Copy `u` into `ext` with `pad` clamp ghosts on each side.
pub(crate) fn extend(u: &[f64], clamps: (f64, f64), pad: usize, ext: &mut Vec<f64>) {
    ext.clear();
    ext.resize(pad, clamps.0);
    ext.extend_from_slice(u);
    ext.resize(u.len() + 2 * pad, clamps.1);
}

/// `out_i = sum_j w_j (u_{i-j} - u_i)` for `i < upto`; `ext` holds `u` padded by `pad >= reach`.
pub(crate) fn diffusion_into(st: &Stencil, ext: &[f64], pad: usize, upto: usize, out: &mut [f64]) {
    out[..upto].iter_mut().for_each(|o| *o = 0.0);
    let u = &ext[pad..pad + upto];
    for (j, w) in st.iter() {
        let start = (pad as isize - j) as usize;
        let shifted = &ext[start..start + upto];
        for ((o, s), c) in out[..upto].iter_mut().zip(shifted).zip(u) {
            *o += w * (s - c);
        }
    }
}

/// `out_i += c (D_h u)_i`, second-order upwind against the transport direction.
pub(crate) fn transport_add(c: f64, h: f64, ext: &[f64], pad: usize, upto: usize, out: &mut [f64]) {
    if c == 0.0 {
        return;
    }
    let k = c / (2.0 * h);
    for i in 0..upto {
        let e = pad + i;
        let u = ext[e];
        let d = if c > 0.0 {
            4.0 * (ext[e + 1] - u) - (ext[e + 2] - u)
        } else {
            -(4.0 * (ext[e - 1] - u) - (ext[e - 2] - u))
        };
        out[i] += k * d;
    }
}

/// Second-order upwind derivative `D_h u` (biased to the right for `c > 0`).
pub fn upwind_derivative(field: &Field, c: f64) -> Vec<f64> {
    let mut ext = Vec::new();
    extend(&field.values, (field.clamp_left, field.clamp_right), 2, &mut ext);
    let mut out = vec![0.0; field.len()];
    transport_add(c.signum(), field.h, &ext, 2, field.len(), &mut out);
    out
}

/// `W * u` by direct summation with clamp ghosts.
pub fn convolve_direct(field: &Field, st: &Stencil) -> Field {
    let pad = st.reach() + 2;
    let mut ext = Vec::new();
    extend(&field.values, (field.clamp_left, field.clamp_right), pad, &mut ext);
    let n = field.len();
    let mut out = vec![0.0; n];
    for (j, w) in st.iter() {
        let start = (pad as isize - j) as usize;
        for (o, s) in out.iter_mut().zip(&ext[start..start + n]) {
            *o += w * s;
        }
    }
    let m = st.mass();
    Field::new(field.x0, field.h, out, m * field.clamp_left, m * field.clamp_right)
}

/// `W * u` by zero-padded FFT, the pad pre-filled with the clamps over the kernel reach.
pub fn convolve_fft(field: &Field, st: &Stencil) -> Field {
    let reach = st.reach();
    let n = field.len();
    let mut ext = Vec::new();
    extend(&field.values, (field.clamp_left, field.clamp_right), reach, &mut ext);
    let lw = st.weights.len();
    let size = (ext.len() + lw).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex64> = ext.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    a.resize(size, Complex64::new(0.0, 0.0));
    let mut b: Vec<Complex64> = st.weights.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    b.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    // conv[p] = sum_k w[k] ext[p - k] with w[k] = w_{lo + k}; u_i sits at ext[reach + i].
    let shift = (reach as isize - st.lo) as usize;
    let scale = 1.0 / size as f64;
    let out = (0..n).map(|i| a[i + shift].re * scale).collect();
    let m = st.mass();
    Field::new(field.x0, field.h, out, m * field.clamp_left, m * field.clamp_right)
}

/// `K * u` on the field's grid, by fast convolution.
pub fn convolve(field: &Field, k: &Kernel) -> Result<Field> {
    let st = k.sample_weights(field.h)?;
    Ok(convolve_fft(field, &st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, Shape};
    use rand::{Rng, SeedableRng};

    fn cosine() -> Kernel {
        make_kernel(&Shape::CosineBump, 1.0, true).unwrap()
    }

    /// Independent O(N M) oracle, written with explicit index arithmetic.
    fn oracle(field: &Field, st: &Stencil) -> Vec<f64> {
        let n = field.len() as isize;
        (0..n)
            .map(|i| {
                st.iter()
                    .map(|(j, w)| {
                        let k = i - j;
                        let v = if k < 0 {
                            field.clamp_left
                        } else if k >= n {
                            field.clamp_right
                        } else {
                            field.values[k as usize]
                        };
                        w * v
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_is_preserved() {
        let f = Field::from_fn(-10.0, 1.0 / 16.0, 400, (1.0, 1.0), |_| 1.0);
        let out = convolve(&f, &cosine()).unwrap();
        assert!(out.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn step_stays_monotone_and_matches_oracle() {
        let f = Field::from_fn(-10.0, 1.0 / 16.0, 320, (1.0, 0.0), |x| if x < 0.0 { 1.0 } else { 0.0 });
        let st = cosine().sample_weights(f.h).unwrap();
        let fast = convolve_fft(&f, &st);
        let direct = convolve_direct(&f, &st);
        let slow = oracle(&f, &st);
        for i in 0..f.len() {
            assert!((fast.values[i] - slow[i]).abs() <= 1e-12);
            assert!((direct.values[i] - slow[i]).abs() <= 1e-12);
        }
        assert!(fast.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn random_data_matches_oracle() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let f = Field::new(0.0, 0.05, (0..517).map(|_| rng.gen::<f64>()).collect(), 0.3, 0.8);
        let st = make_kernel(&Shape::PolynomialBump, 0.9, true).unwrap().sample_weights(0.05).unwrap();
        let fast = convolve_fft(&f, &st);
        for (a, b) in fast.values.iter().zip(oracle(&f, &st)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn exponential_is_eigenfunction_in_interior() {
        let k = cosine();
        let lambda = 1.3;
        let h = 1.0 / 256.0;
        let f = Field::from_fn(-5.0, h, 2561, (0.0, 0.0), |x| (-lambda * x).exp());
        let out = convolve(&f, &k).unwrap();
        let g = k.integrate(|z| crate::numerics::cosh_m1(lambda * z));
        for i in 400..2160 {
            // J e^{-lambda x} = -(int (cosh - 1) K) e^{-lambda x} with J u = <K> u - K * u.
            let j = f.values[i] - out.values[i];
            let expected = -g * f.values[i];
            assert!((j - expected).abs() <= 1e-8 * f.values[i].max(1.0), "{i}: {j} {expected}");
        }
    }

    #[test]
    fn upwind_derivative_is_second_order() {
        let err = |h: f64| {
            let n = (2.0 / h) as usize;
            let f = Field::from_fn(0.0, h, n, (0.0, 0.0), |x| (2.0 * x).sin());
            let d = upwind_derivative(&f, 1.0);
            (0..n - 2).map(|i| (d[i] - 2.0 * (2.0 * f.x(i)).cos()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.01) / err(0.005);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn crossing_scans_from_the_right() {
        let f = Field::new(0.0, 1.0, vec![1.0, 0.2, 0.8, 0.4, 0.0], 1.0, 0.0);
        assert_eq!(f.level_crossing(0.5), Some(2.75));
        assert_eq!(f.level_crossing(1.5), None);
    }
}
