//! Free Schrödinger evolution `i ∂_t ψ + ½ ∂_x² ψ = 0` (ħ = m = 1).
//!
//! Evolution is exact in Fourier space: every time node is obtained from
//! the initial transform by the phase `exp(-i k² t / 2)`, so there is no
//! time-stepping error anywhere downstream.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid_periodic, GridSpec};
use crate::spectral::{self, check_boundary};

/// Default lower bound on `|ψ|²` inside the supported region.
pub const DEFAULT_NODE_FLOOR: f64 = 1e-30;

/// Tolerance on `‖ψ(·, t)‖² - 1` accepted by [`WaveField::new`].
pub const NORM_TOL: f64 = 1e-8;

/// Complex wave function on every (time, space) node.
#[derive(Debug, Clone)]
pub struct WaveField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl WaveField {
    /// Validates shape, normalization and absence of nodes.
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        Self::with_node_floor(grid, values, DEFAULT_NODE_FLOOR)
    }

    pub fn with_node_floor(grid: GridSpec, values: Vec<Complex64>, node_floor: f64) -> Result<Self> {
        grid.require_1d()?;
        let expected = grid.n_times() * grid.n_x;
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        let field = WaveField { grid, values };
        for j in 0..grid.n_times() {
            let norm = field.norm_squared(j);
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::NormDrift { t_index: j, norm });
            }
            check_nodes(&grid, &field.density_slice(j), j, node_floor)?;
        }
        Ok(field)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn slice(&self, t_index: usize) -> &[Complex64] {
        let n = self.grid.n_x;
        &self.values[t_index * n..(t_index + 1) * n]
    }

    pub fn density_slice(&self, t_index: usize) -> Vec<f64> {
        self.slice(t_index).iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm_squared(&self, t_index: usize) -> f64 {
        trapezoid_periodic(&self.grid, &self.density_slice(t_index))
    }

    /// Largest `|‖ψ(·, t)‖² - 1|` over all time nodes.
    pub fn max_norm_drift(&self) -> f64 {
        (0..self.grid.n_times())
            .map(|j| (self.norm_squared(j) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `|ψ|²` must stay above `node_floor` between the outermost points where
/// it exceeds `boundary_tol * max |ψ|²`. Outside that core the samples sit
/// at the level of FFT round-off and carry no information about nodes.
pub(crate) fn check_nodes(grid: &GridSpec, density: &[f64], t_index: usize, node_floor: f64) -> Result<()> {
    let max = density.iter().fold(0.0f64, |m, &v| m.max(v));
    let level = grid.boundary_tol * max;
    let first = density.iter().position(|&r| r >= level);
    let last = density.iter().rposition(|&r| r >= level);
    if let (Some(a), Some(b)) = (first, last) {
        for (k, &r) in density.iter().enumerate().take(b + 1).skip(a) {
            if r < node_floor {
                return Err(Error::NodeDetected {
                    t_index,
                    x_index: k,
                    density: r,
                });
            }
        }
    }
    Ok(())
}

/// Exact free evolution of `psi0` to every time node of `grid`.
pub fn free_propagate(psi0: &[Complex64], grid: &GridSpec) -> Result<WaveField> {
    grid.validate()?;
    grid.require_1d()?;
    if psi0.len() != grid.n_x {
        return Err(Error::ShapeMismatch {
            expected: grid.n_x,
            actual: psi0.len(),
        });
    }
    // the edge guard applies to the density, as for every other field
    let density: Vec<f64> = psi0.iter().map(|c| c.norm_sqr()).collect();
    check_boundary(grid, &density)?;
    let norm = trapezoid_periodic(grid, &density);
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NormDrift { t_index: 0, norm });
    }

    let k = spectral::wavenumbers(grid);
    let mut hat = psi0.to_vec();
    spectral::forward(&mut hat);

    let slices: Vec<Vec<Complex64>> = (0..grid.n_times())
        .into_par_iter()
        .map(|j| {
            if j == 0 {
                return psi0.to_vec();
            }
            let t = grid.t(j);
            let mut buf: Vec<Complex64> = hat
                .iter()
                .zip(&k)
                .map(|(c, &kk)| c * Complex64::from_polar(1.0, -0.5 * kk * kk * t))
                .collect();
            spectral::inverse(&mut buf);
            buf
        })
        .collect();

    let values = slices.concat();
    let field = WaveField { grid: *grid, values };
    for j in 0..grid.n_times() {
        let norm = field.norm_squared(j);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormDrift { t_index: j, norm });
        }
        check_nodes(grid, &field.density_slice(j), j, DEFAULT_NODE_FLOOR)?;
    }
    Ok(field)
}

/// Free Gaussian wave packet: initial position spread `sigma0`, mean
/// `mu0`, momentum `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacketSpec {
    pub sigma0: f64,
    pub mu0: f64,
    pub p: f64,
}

impl Default for GaussianPacketSpec {
    fn default() -> Self {
        GaussianPacketSpec {
            sigma0: 1.0,
            mu0: 0.0,
            p: 0.0,
        }
    }
}

impl GaussianPacketSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::invalid("sigma0", "must be positive"));
        }
        if !(self.mu0.is_finite() && self.p.is_finite()) {
            return Err(Error::invalid("mu0", "mean and momentum must be finite"));
        }
        Ok(())
    }

    /// Position variance `s_t² = σ₀² + t² / (4σ₀²)`.
    pub fn variance_at(&self, t: f64) -> f64 {
        let s2 = self.sigma0 * self.sigma0;
        s2 + t * t / (4.0 * s2)
    }

    pub fn mean_at(&self, t: f64) -> f64 {
        self.mu0 + self.p * t
    }

    /// Closed-form `ψ(x, t)`.
    pub fn psi(&self, x: f64, t: f64) -> Complex64 {
        let s2 = self.sigma0 * self.sigma0;
        let alpha = Complex64::new(s2, 0.5 * t);
        let shift = x - self.mean_at(t);
        let prefactor = (2.0 * std::f64::consts::PI).powf(-0.25) * self.sigma0.sqrt() / alpha.sqrt();
        let exponent = -shift * shift / (4.0 * alpha) + Complex64::new(0.0, self.p * (x - 0.5 * self.p * t));
        prefactor * exponent.exp()
    }

    /// Current velocity `∂_x S = p + (x - mean_t) t / (4σ₀² s_t²)`.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let s2 = self.sigma0 * self.sigma0;
        self.p + (x - self.mean_at(t)) * t / (4.0 * s2 * self.variance_at(t))
    }

    /// `|ψ(x, t)|²`.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        let v = self.variance_at(t);
        let z = x - self.mean_at(t);
        (-0.5 * z * z / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
    }
}

/// The closed-form packet sampled on `grid`.
pub fn gaussian_packet(spec: &GaussianPacketSpec, grid: &GridSpec) -> Result<WaveField> {
    spec.validate()?;
    grid.validate()?;
    grid.require_1d()?;
    let xs = grid.xs();
    let mut values = Vec::with_capacity(grid.n_times() * grid.n_x);
    for j in 0..grid.n_times() {
        let t = grid.t(j);
        let slice: Vec<Complex64> = xs.iter().map(|&x| spec.psi(x, t)).collect();
        let density: Vec<f64> = slice.iter().map(|c| c.norm_sqr()).collect();
        check_boundary(grid, &density)?;
        values.extend(slice);
    }
    WaveField::new(*grid, values)
}
