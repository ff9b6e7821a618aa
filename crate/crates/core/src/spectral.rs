//! Fourier differentiation and integration on the periodic box.
//!
//! Spectral derivatives are only meaningful for fields whose periodic
//! extension is smooth, which here means fields that decay to (numerically)
//! zero at the box edge. Quantities that grow across the box, such as a
//! velocity `v` or the phase `S`, are differentiated through a decaying
//! weight instead: `∂f = (∂(f w) - f ∂w) / w` with `w = √ρ`
//! ([`weighted_derivative`]). The division is pointwise, so tail noise in
//! `w` stays local instead of spreading through the whole spectrum.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// Quotients `num / w` are trusted only where `w >= WEIGHT_FLOOR * max w`;
/// elsewhere the nearest trusted value is carried outward.
pub const WEIGHT_FLOOR: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Forward DFT (unnormalized).
pub fn forward(buf: &mut [Complex64]) {
    let (fwd, _) = plans(buf.len());
    fwd.process(buf);
}

/// Inverse DFT, normalized so that `inverse(forward(x)) == x`.
pub fn inverse(buf: &mut [Complex64]) {
    let (_, inv) = plans(buf.len());
    inv.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
}

/// Angular wavenumbers in FFT order. The Nyquist entry is returned as
/// `-π/dx`; odd-order derivatives zero it explicitly.
pub fn wavenumbers(grid: &GridSpec) -> Vec<f64> {
    let n = grid.n_x;
    let base = 2.0 * PI / grid.length();
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
            base * m as f64
        })
        .collect()
}

/// Checks that a slice is periodic-compatible: either constant, or small at
/// the edge node `x_min ≡ x_max` relative to its maximum.
pub fn check_boundary(grid: &GridSpec, values: &[f64]) -> Result<()> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || is_constant(values, grid.boundary_tol * max) {
        return Ok(());
    }
    let limit = grid.boundary_tol * max;
    let edge = values[0].abs();
    if edge > limit {
        return Err(Error::BoundaryLeak { edge, limit });
    }
    Ok(())
}

fn is_constant(values: &[f64], tol: f64) -> bool {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo <= tol
}

fn spectral_apply(grid: &GridSpec, values: &[f64], symbol: impl Fn(usize, f64) -> Complex64) -> Vec<f64> {
    let k = wavenumbers(grid);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&mut buf);
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= symbol(j, k[j]);
    }
    inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// First derivative of a periodic-compatible slice (no edge check).
pub fn derivative(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    let nyq = grid.n_x / 2;
    spectral_apply(grid, values, |j, k| {
        if j == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k)
        }
    })
}

pub fn second_derivative(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    spectral_apply(grid, values, |_, k| Complex64::new(-k * k, 0.0))
}

/// Derivative of order `order` of a complex slice.
pub fn derivative_complex(grid: &GridSpec, values: &[Complex64], order: u32) -> Vec<Complex64> {
    let k = wavenumbers(grid);
    let nyq = grid.n_x / 2;
    let mut buf = values.to_vec();
    forward(&mut buf);
    for (j, c) in buf.iter_mut().enumerate() {
        if order % 2 == 1 && j == nyq {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, k[j]).powu(order);
        }
    }
    inverse(&mut buf);
    buf
}

/// Spatial gradient of `f(·, t_j)` by Fourier differentiation.
///
/// Fails with [`Error::BoundaryLeak`] when the slice is not small at the
/// box edge. Constant slices differentiate to zero.
pub fn spectral_gradient(f: &ScalarField, t_index: usize) -> Result<Vec<f64>> {
    let grid = f.grid();
    grid.require_1d()?;
    if t_index > grid.n_t {
        return Err(Error::invalid("t_index", format!("{t_index} > n_t")));
    }
    let slice = f.slice(t_index);
    check_boundary(grid, slice)?;
    let max = slice.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if is_constant(slice, grid.boundary_tol * max) {
        return Ok(vec![0.0; slice.len()]);
    }
    Ok(derivative(grid, slice))
}

/// Periodic primitive `F(x) = ∫_{x_min}^x (f - mean f)` computed spectrally.
/// Returns the primitive together with `∫ f dx` over the box, so callers
/// can detect a non-zero mean.
pub fn antiderivative(grid: &GridSpec, values: &[f64]) -> (Vec<f64>, f64) {
    let total = crate::grid::trapezoid_periodic(grid, values);
    let nyq = grid.n_x / 2;
    let mut prim = spectral_apply(grid, values, |j, k| {
        if j == 0 || j == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / k)
        }
    });
    let anchor = prim[0];
    prim.iter_mut().for_each(|p| *p -= anchor);
    (prim, total)
}

/// `num / w` where `w` is trusted; untrusted points take the nearest
/// trusted value (scanning outward). All-zero weights give all zeros.
pub fn quotient_with_fill(num: &[f64], w: &[f64]) -> Vec<f64> {
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = WEIGHT_FLOOR * max;
    let mut out: Vec<Option<f64>> = num
        .iter()
        .zip(w)
        .map(|(&n, &w)| if w.abs() >= floor && w != 0.0 { Some(n / w) } else { None })
        .collect();
    let first = match out.iter().position(Option::is_some) {
        Some(i) => i,
        None => return vec![0.0; num.len()],
    };
    let lead = out[first];
    out[..first].iter_mut().for_each(|o| *o = lead);
    let mut last = lead;
    for o in out.iter_mut().skip(first) {
        match o {
            Some(_) => last = *o,
            None => *o = last,
        }
    }
    out.into_iter().map(|o| o.unwrap_or(0.0)).collect()
}

/// Derivative of a possibly non-decaying slice `f` through the decaying
/// weight `w`: `∂f = (∂(f w) - f ∂w) / w`.
pub fn weighted_derivative(grid: &GridSpec, values: &[f64], weight: &[f64]) -> Vec<f64> {
    let fw: Vec<f64> = values.iter().zip(weight).map(|(f, w)| f * w).collect();
    let d_fw = derivative(grid, &fw);
    let dw = derivative(grid, weight);
    let num: Vec<f64> = d_fw
        .iter()
        .zip(values)
        .zip(&dw)
        .map(|((dfw, f), dw)| dfw - f * dw)
        .collect();
    quotient_with_fill(&num, weight)
}

/// Band-limited interpolant of a periodic slice, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct FourierSeries {
    x_min: f64,
    coeffs: Vec<(f64, Complex64)>,
}

impl FourierSeries {
    pub fn new(grid: &GridSpec, values: &[f64]) -> Self {
        let n = grid.n_x;
        let k = wavenumbers(grid);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward(&mut buf);
        let scale = 1.0 / n as f64;
        let coeffs = buf
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                if j == n / 2 {
                    // split the Nyquist mode symmetrically to keep the interpolant real
                    (k[j].abs(), c * scale)
                } else {
                    (k[j], c * scale)
                }
            })
            .collect();
        FourierSeries {
            x_min: grid.x_min,
            coeffs,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = x - self.x_min;
        let n = self.coeffs.len();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, &(k, c))| {
                let e = Complex64::from_polar(1.0, k * s);
                if j == n / 2 {
                    c.re * (k * s).cos()
                } else {
                    (c * e).re
                }
            })
            .sum()
    }
}
