//! Uniform periodic space-time grid on a truncated box times `[0, 1]`, plus
//! the scalar and vector field containers every other module works with.
//!
//! Space is sampled at `x_k = x_min + k * dx`, `k = 0..n_x`, with
//! `dx = (x_max - x_min) / n_x`; the point `x_max` is the periodic image of
//! `x_min` and is not stored. Time is sampled at `t_j = j / n_t`,
//! `j = 0..=n_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative edge tolerance for spectral operations.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub d: usize,
    pub n_t: usize,
    /// Largest allowed `|f(x_min)|` relative to `max |f|` for fields that
    /// enter spectral differentiation or quadrature.
    pub boundary_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: -12.0,
            x_max: 12.0,
            n_x: 512,
            d: 1,
            n_t: 256,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
        }
    }
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, n_t: usize) -> Result<Self> {
        let grid = GridSpec {
            x_min,
            x_max,
            n_x,
            n_t,
            ..GridSpec::default()
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) || self.x_max <= self.x_min {
            return Err(Error::invalid("x_max", "x_max must exceed x_min"));
        }
        if self.n_x < 4 || !self.n_x.is_power_of_two() {
            return Err(Error::invalid(
                "n_x",
                format!("{} is not a power of two >= 4", self.n_x),
            ));
        }
        if self.n_t < 2 {
            return Err(Error::invalid("n_t", format!("{} < 2", self.n_t)));
        }
        if self.d == 0 {
            return Err(Error::invalid("d", "spatial dimension must be positive"));
        }
        if !(self.boundary_tol > 0.0 && self.boundary_tol < 1.0) {
            return Err(Error::invalid("boundary_tol", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Operations in this crate are implemented for one spatial dimension.
    pub fn require_1d(&self) -> Result<()> {
        if self.d != 1 {
            return Err(Error::Unsupported(format!(
                "spatial dimension {} (only d = 1 is implemented)",
                self.d
            )));
        }
        Ok(())
    }

    pub fn with_n_t(self, n_t: usize) -> Self {
        GridSpec { n_t, ..self }
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_x as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|k| self.x(k)).collect()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_t as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 / self.n_t as f64
    }

    pub fn n_times(&self) -> usize {
        self.n_t + 1
    }

    /// Grid with every other point in space and time, used for refinement
    /// error estimates.
    pub fn coarsened(&self) -> Option<GridSpec> {
        if self.n_x < 8 || self.n_t < 4 || !self.n_t.is_multiple_of(2) {
            return None;
        }
        Some(GridSpec {
            n_x: self.n_x / 2,
            n_t: self.n_t / 2,
            ..*self
        })
    }

    /// Index of the time node at or before `t` (clamped to `[0, n_t]`).
    pub fn time_index_at_or_before(&self, t: f64) -> usize {
        let s = (t * self.n_t as f64 + 1e-9).floor();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.n_t)
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Real field sampled on every (time, space) node, row-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_times() * grid.n_x;
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let xs = grid.xs();
        let mut values = Vec::with_capacity(grid.n_times() * grid.n_x);
        for j in 0..grid.n_times() {
            let t = grid.t(j);
            values.extend(xs.iter().map(|&x| f(x, t)));
        }
        Self::new(grid, values)
    }

    /// Builds a field from one slice per time node.
    pub fn from_slices(grid: GridSpec, slices: Vec<Vec<f64>>) -> Result<Self> {
        if slices.len() != grid.n_times() {
            return Err(Error::ShapeMismatch {
                expected: grid.n_times(),
                actual: slices.len(),
            });
        }
        Self::new(grid, slices.concat())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, t_index: usize) -> &[f64] {
        let n = self.grid.n_x;
        &self.values[t_index * n..(t_index + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if other.grid != self.grid {
            return Err(Error::invalid("grid", "fields live on different grids"));
        }
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Restriction to [`GridSpec::coarsened`].
    pub fn coarsened(&self) -> Option<Self> {
        let coarse = self.grid.coarsened()?;
        let values = (0..coarse.n_times())
            .flat_map(|j| self.slice(2 * j).iter().step_by(2).copied())
            .collect();
        Some(ScalarField {
            grid: coarse,
            values,
        })
    }

    /// The field at the time nodes of `grid.with_n_t(n_t / stride)`.
    pub fn time_subsampled(&self, stride: usize) -> Option<Self> {
        if stride == 0 || !self.grid.n_t.is_multiple_of(stride) {
            return None;
        }
        let grid = self.grid.with_n_t(self.grid.n_t / stride);
        let values = (0..grid.n_times())
            .flat_map(|j| self.slice(stride * j).iter().copied())
            .collect();
        Some(ScalarField { grid, values })
    }
}

/// Vector field with `grid.d` components per node, layout (time, space,
/// component).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_times() * grid.n_x * grid.d;
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(VectorField { grid, values })
    }

    /// One-component field from per-time slices (requires `d = 1`).
    pub fn from_slices(grid: GridSpec, slices: Vec<Vec<f64>>) -> Result<Self> {
        grid.require_1d()?;
        if slices.len() != grid.n_times() {
            return Err(Error::ShapeMismatch {
                expected: grid.n_times(),
                actual: slices.len(),
            });
        }
        Self::new(grid, slices.concat())
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        grid.require_1d()?;
        let s = ScalarField::from_fn(grid, f)?;
        Ok(VectorField {
            grid,
            values: s.values,
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        VectorField {
            grid,
            values: vec![0.0; grid.n_times() * grid.n_x * grid.d],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All components at time node `t_index`, interleaved per point.
    pub fn slice(&self, t_index: usize) -> &[f64] {
        let n = self.grid.n_x * self.grid.d;
        &self.values[t_index * n..(t_index + 1) * n]
    }

    /// View of a one-component field as a scalar field.
    pub fn to_scalar(&self) -> Result<ScalarField> {
        self.grid.require_1d()?;
        ScalarField::new(self.grid, self.values.clone())
    }

    pub fn coarsened(&self) -> Option<Self> {
        let s = ScalarField {
            grid: self.grid,
            values: self.values.clone(),
        };
        self.grid.require_1d().ok()?;
        let c = s.coarsened()?;
        Some(VectorField {
            grid: c.grid,
            values: c.values,
        })
    }

    pub fn time_subsampled(&self, stride: usize) -> Option<Self> {
        self.grid.require_1d().ok()?;
        let s = ScalarField {
            grid: self.grid,
            values: self.values.clone(),
        }
        .time_subsampled(stride)?;
        Some(VectorField {
            grid: s.grid,
            values: s.values,
        })
    }
}

impl From<ScalarField> for VectorField {
    /// Reinterprets a scalar field as the single component of a `d = 1`
    /// vector field.
    fn from(s: ScalarField) -> Self {
        VectorField {
            grid: GridSpec { d: 1, ..s.grid },
            values: s.values,
        }
    }
}

/// Periodic trapezoidal rule over one spatial slice.
pub fn trapezoid_periodic(grid: &GridSpec, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.dx()
}

/// Spatial integral of `f(·, t_j)` over the truncated box.
pub fn integrate(f: &ScalarField, t_index: usize) -> Result<f64> {
    let grid = f.grid();
    if t_index > grid.n_t {
        return Err(Error::invalid("t_index", format!("{t_index} > n_t")));
    }
    let slice = f.slice(t_index);
    crate::spectral::check_boundary(grid, slice)?;
    Ok(trapezoid_periodic(grid, slice))
}

/// Composite trapezoidal rule for samples on the uniform partition of
/// `[0, 1]` (`series.len() - 1` intervals).
pub fn time_integrate(series: &[f64]) -> f64 {
    match series.len() {
        0 | 1 => 0.0,
        len => {
            let h = 1.0 / (len - 1) as f64;
            let inner: f64 = series[1..len - 1].iter().sum();
            h * (inner + 0.5 * (series[0] + series[len - 1]))
        }
    }
}

/// Second-order centered time derivative at node `j` (one-sided at the ends).
pub fn time_derivative(grid: &GridSpec, slice_at: impl Fn(usize) -> Vec<f64>, j: usize) -> Vec<f64> {
    let dt = grid.dt();
    let (a, b, scale) = if j == 0 {
        (0, 1, 1.0 / dt)
    } else if j == grid.n_t {
        (grid.n_t - 1, grid.n_t, 1.0 / dt)
    } else {
        (j - 1, j + 1, 0.5 / dt)
    };
    let lo = slice_at(a);
    let hi = slice_at(b);
    hi.iter().zip(&lo).map(|(h, l)| (h - l) * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(1.0, -1.0, 64, 8).is_err());
        let err = GridSpec::new(-1.0, 1.0, 100, 8).unwrap_err();
        assert!(err.to_string().contains("n_x"));
        assert!(GridSpec::new(-1.0, 1.0, 64, 1).is_err());
    }

    #[test]
    fn integrates_normal_density_and_moments() {
        let grid = GridSpec::default();
        let rho = ScalarField::from_fn(grid, |x, _| normal(x)).unwrap();
        assert!((integrate(&rho, 0).unwrap() - 1.0).abs() < 1e-9);
        let odd = ScalarField::from_fn(grid, |x, _| x * normal(x)).unwrap();
        assert!(integrate(&odd, 3).unwrap().abs() < 1e-12);
        let second = ScalarField::from_fn(grid, |x, _| x * x * normal(x)).unwrap();
        assert!((integrate(&second, 0).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn time_integration() {
        let c = vec![2.5; 17];
        assert!((time_integrate(&c) - 2.5).abs() < 1e-14);
        let lin: Vec<f64> = (0..=64).map(|j| j as f64 / 64.0).collect();
        assert!((time_integrate(&lin) - 0.5).abs() < 1e-12);
        let quad: Vec<f64> = (0..=256).map(|j| (j as f64 / 256.0).powi(2)).collect();
        assert!((time_integrate(&quad) - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn coarsening_keeps_even_nodes() {
        let grid = GridSpec::new(-4.0, 4.0, 16, 8).unwrap();
        let f = ScalarField::from_fn(grid, |x, t| x + 10.0 * t).unwrap();
        let c = f.coarsened().unwrap();
        assert_eq!(c.grid().n_x, 8);
        assert_eq!(c.grid().n_t, 4);
        assert_eq!(c.slice(1)[1], f.slice(2)[2]);
    }

    #[test]
    fn time_index_lookup() {
        let grid = GridSpec::default();
        assert_eq!(grid.time_index_at_or_before(0.0), 0);
        assert_eq!(grid.time_index_at_or_before(0.5), 128);
        assert_eq!(grid.time_index_at_or_before(0.5 - 1e-6), 127);
        assert_eq!(grid.time_index_at_or_before(1.0), 256);
        assert_eq!(grid.time_index_at_or_before(1.5), 256);
    }
}
