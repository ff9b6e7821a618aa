//! Madelung decomposition `ψ = √ρ e^{iS}` into a fluid couple `(ρ, ∂_x S)`,
//! the osmotic velocity `u = ½ ∂_x log ρ`, the Nelson drift `b = v + u`,
//! and residuals of the two Madelung equations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid_periodic, GridSpec, ScalarField, VectorField};
use crate::schrodinger::{check_nodes, WaveField, DEFAULT_NODE_FLOOR};
use crate::spectral::{self, check_boundary, quotient_with_fill, weighted_derivative};

/// Tolerance on `∫ρ(·, t) dx - 1` for couples.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Residuals involving quotients by `ρ` are reported as sup-norms over the
/// region `ρ(·, t) >= SIGNIFICANT_DENSITY * max ρ(·, t)`.
pub const SIGNIFICANT_DENSITY: f64 = 1e-6;

/// Largest phase increment between neighbouring samples accepted by the
/// unwrapper.
pub const MAX_PHASE_STEP: f64 = 0.5 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SchrodingerDerived,
    Competitor,
    ClassicalOt,
    Synthetic,
}

/// Density and current velocity on a common grid.
#[derive(Debug, Clone)]
pub struct FluidCouple {
    rho: ScalarField,
    v: VectorField,
    pub provenance: Provenance,
}

impl FluidCouple {
    /// Checks strict positivity and normalization of `rho` at every time.
    pub fn new(rho: ScalarField, v: VectorField, provenance: Provenance) -> Result<Self> {
        let grid = *rho.grid();
        grid.require_1d()?;
        if *v.grid() != grid {
            return Err(Error::invalid("v", "velocity and density grids differ"));
        }
        if let Some(i) = rho.values().iter().position(|&r| r <= 0.0) {
            return Err(Error::InvalidDensity(format!(
                "rho = {} at flat index {i} is not strictly positive",
                rho.values()[i]
            )));
        }
        for j in 0..grid.n_times() {
            let mass = trapezoid_periodic(&grid, rho.slice(j));
            if (mass - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidDensity(format!(
                    "mass {mass} at time index {j}"
                )));
            }
        }
        Ok(FluidCouple { rho, v, provenance })
    }

    /// Samples analytic `ρ(x, t)` and `v(x, t)` on `grid`.
    pub fn from_fns(
        grid: GridSpec,
        rho: impl Fn(f64, f64) -> f64,
        v: impl Fn(f64, f64) -> f64,
        provenance: Provenance,
    ) -> Result<Self> {
        Self::new(
            ScalarField::from_fn(grid, rho)?,
            VectorField::from_fn(grid, v)?,
            provenance,
        )
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn v(&self) -> &VectorField {
        &self.v
    }

    pub fn sqrt_rho(&self, t_index: usize) -> Vec<f64> {
        self.rho.slice(t_index).iter().map(|r| r.sqrt()).collect()
    }

    /// The couple on [`GridSpec::coarsened`]; positivity and mass are
    /// inherited, so no re-validation is done.
    pub fn coarsened(&self) -> Option<Self> {
        Some(FluidCouple {
            rho: self.rho.coarsened()?,
            v: self.v.coarsened()?,
            provenance: self.provenance,
        })
    }

    pub fn time_subsampled(&self, stride: usize) -> Option<Self> {
        Some(FluidCouple {
            rho: self.rho.time_subsampled(stride)?,
            v: self.v.time_subsampled(stride)?,
            provenance: self.provenance,
        })
    }
}

/// How [`DriftField::eval`] reads the sampled drift between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Linear in `x`, held at the time node at or before the requested time;
    /// constant extension beyond the outermost samples.
    LinearXFrozenT,
}

/// Sampled drift with an evaluation rule at off-grid points.
#[derive(Debug, Clone)]
pub struct DriftField {
    pub b: VectorField,
    pub interpolation: Interpolation,
    pub label: String,
}

impl DriftField {
    pub fn new(b: VectorField, label: impl Into<String>) -> Result<Self> {
        b.grid().require_1d()?;
        Ok(DriftField {
            b,
            interpolation: Interpolation::LinearXFrozenT,
            label: label.into(),
        })
    }

    /// Space- and time-constant drift `c`.
    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Self::new(VectorField::from_fn(grid, |_, _| c)?, format!("constant({c})"))
    }

    pub fn grid(&self) -> &GridSpec {
        self.b.grid()
    }

    /// Drift at position `x`, reading time slice `t_index`.
    #[inline]
    pub fn eval(&self, x: f64, t_index: usize) -> f64 {
        interpolate(self.grid(), self.b.slice(t_index), x)
    }

    /// Drift at `(x, t)` under the frozen-time rule.
    pub fn eval_at(&self, x: f64, t: f64) -> f64 {
        self.eval(x, self.grid().time_index_at_or_before(t))
    }
}

/// Linear interpolation of a sampled slice, extended by the end values.
#[inline]
pub fn interpolate(grid: &GridSpec, slice: &[f64], x: f64) -> f64 {
    let s = (x - grid.x_min) / grid.dx();
    if s <= 0.0 {
        return slice[0];
    }
    let last = slice.len() - 1;
    let i = s.floor() as usize;
    if i >= last {
        return slice[last];
    }
    let frac = s - i as f64;
    slice[i] + frac * (slice[i + 1] - slice[i])
}

/// Result of [`decompose`].
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub rho: ScalarField,
    /// Phase unwrapped along `x` from the box center; only its gradient is
    /// meaningful.
    pub phase: ScalarField,
    pub couple: FluidCouple,
}

/// Splits `ψ` into density, unwrapped phase and the couple `(ρ, ∂_x S)`.
///
/// The velocity is evaluated as `Im(ψ̄ ∂_x ψ) / |ψ|²`, which is `∂_x S`
/// without differentiating the (non-periodic) phase itself.
pub fn decompose(psi: &WaveField) -> Result<Decomposition> {
    let grid = *psi.grid();
    let n = grid.n_x;
    let center = n / 2;

    for j in 0..grid.n_times() {
        check_nodes(&grid, &psi.density_slice(j), j, DEFAULT_NODE_FLOOR)?;
    }

    // continuous anchor phase at the center along time
    let mut anchors = Vec::with_capacity(grid.n_times());
    let mut prev = psi.slice(0)[center].arg();
    anchors.push(prev);
    for j in 1..grid.n_times() {
        let a = psi.slice(j)[center].arg();
        let step = wrap(a - wrap(prev));
        prev += step;
        anchors.push(prev);
    }

    let per_slice: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..grid.n_times())
        .into_par_iter()
        .map(|j| {
            let s = psi.slice(j);
            let rho: Vec<f64> = s.iter().map(|c| c.norm_sqr()).collect();
            let modulus: Vec<f64> = s.iter().map(|c| c.norm()).collect();
            let ds = spectral::derivative_complex(&grid, s, 1);
            let num: Vec<f64> = s
                .iter()
                .zip(&ds)
                .zip(&modulus)
                .map(|((c, d), &m)| if m > 0.0 { (c.conj() * d).im / m } else { 0.0 })
                .collect();
            let v = quotient_with_fill(&num, &modulus);
            let phase = unwrap_slice(&grid, s, &rho, anchors[j], j)?;
            Ok((rho, phase, v))
        })
        .collect();

    let mut rho_slices = Vec::with_capacity(grid.n_times());
    let mut phase_slices = Vec::with_capacity(grid.n_times());
    let mut v_slices = Vec::with_capacity(grid.n_times());
    for r in per_slice {
        let (rho, phase, v) = r?;
        rho_slices.push(rho);
        phase_slices.push(phase);
        v_slices.push(v);
    }
    let rho = ScalarField::from_slices(grid, rho_slices)?;
    let phase = ScalarField::from_slices(grid, phase_slices)?;
    let v = VectorField::from_slices(grid, v_slices)?;
    let couple = FluidCouple::new(rho.clone(), v, Provenance::SchrodingerDerived)?;
    Ok(Decomposition { rho, phase, couple })
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn unwrap_slice(grid: &GridSpec, s: &[Complex64], rho: &[f64], anchor: f64, j: usize) -> Result<Vec<f64>> {
    let n = grid.n_x;
    let center = n / 2;
    let max = rho.iter().fold(0.0f64, |m, &r| m.max(r));
    let trusted = |k: usize| rho[k] >= spectral::WEIGHT_FLOOR * spectral::WEIGHT_FLOOR * max;
    let mut phase = vec![0.0; n];
    phase[center] = anchor;
    let step_to = |from: usize, to: usize, phase: &mut Vec<f64>| -> Result<()> {
        let step = (s[to] * s[from].conj()).arg();
        if trusted(to) && trusted(from) && step.abs() > MAX_PHASE_STEP {
            return Err(Error::UnwrapInconsistent {
                t_index: j,
                x_index: to,
                step,
            });
        }
        phase[to] = phase[from] + step;
        Ok(())
    };
    for k in center + 1..n {
        step_to(k - 1, k, &mut phase)?;
    }
    for k in (0..center).rev() {
        step_to(k + 1, k, &mut phase)?;
    }
    Ok(phase)
}

/// Osmotic velocity `u = ½ ∂_x log ρ`, evaluated as `∂_x √ρ / √ρ`.
pub fn osmotic(rho: &ScalarField) -> Result<VectorField> {
    let grid = *rho.grid();
    grid.require_1d()?;
    let slices: Vec<Result<Vec<f64>>> = (0..grid.n_times())
        .into_par_iter()
        .map(|j| {
            check_boundary(&grid, rho.slice(j))?;
            let w: Vec<f64> = rho.slice(j).iter().map(|r| r.sqrt()).collect();
            let dw = spectral::derivative(&grid, &w);
            Ok(quotient_with_fill(&dw, &w))
        })
        .collect();
    VectorField::from_slices(grid, slices.into_iter().collect::<Result<_>>()?)
}

/// Nelson drift `b = v + ½ ∂_x log ρ` of a couple.
pub fn drift(couple: &FluidCouple) -> Result<DriftField> {
    let u = osmotic(couple.rho())?;
    let b: Vec<f64> = couple
        .v()
        .values()
        .iter()
        .zip(u.values())
        .map(|(v, u)| v + u)
        .collect();
    DriftField::new(
        VectorField::new(*couple.grid(), b)?,
        format!("{:?}", couple.provenance).to_lowercase(),
    )
}

/// Spatial divergence `∂_x b` of a drift, differentiated through `√ρ`.
pub fn drift_divergence(b: &DriftField, rho: &ScalarField) -> Result<ScalarField> {
    let grid = *rho.grid();
    if *b.grid() != grid {
        return Err(Error::invalid("b", "drift and density grids differ"));
    }
    let slices: Vec<Vec<f64>> = (0..grid.n_times())
        .into_par_iter()
        .map(|j| {
            let w: Vec<f64> = rho.slice(j).iter().map(|r| r.sqrt()).collect();
            weighted_derivative(&grid, b.b.slice(j), &w)
        })
        .collect();
    ScalarField::from_slices(grid, slices)
}

/// Sup-norm residuals of the two Madelung equations over interior time
/// nodes, with the sup of the individual terms as scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MadelungResiduals {
    /// `∂_t ρ + ∂_x(ρ ∂_x S)`, sup over the whole box.
    pub continuity: f64,
    pub continuity_scale: f64,
    /// `∂_t S + ½(∂_x S)² - ½ ∂_x²√ρ / √ρ`, sup over the significant region.
    pub hamilton_jacobi: f64,
    pub hamilton_jacobi_scale: f64,
}

/// Mask of points with `ρ >= SIGNIFICANT_DENSITY * max ρ`.
pub fn significant_mask(rho: &[f64]) -> Vec<bool> {
    let max = rho.iter().fold(0.0f64, |m, &r| m.max(r));
    rho.iter().map(|&r| r >= SIGNIFICANT_DENSITY * max).collect()
}

pub fn madelung_residuals(rho: &ScalarField, phase: &ScalarField) -> Result<MadelungResiduals> {
    let grid = *rho.grid();
    grid.require_1d()?;
    if *phase.grid() != grid {
        return Err(Error::invalid("phase", "density and phase grids differ"));
    }
    let dt = grid.dt();
    let sqrt = |j: usize| -> Vec<f64> { rho.slice(j).iter().map(|r| r.sqrt()).collect() };

    let rows: Vec<[f64; 4]> = (1..grid.n_t)
        .into_par_iter()
        .map(|j| {
            let r = rho.slice(j);
            let w = sqrt(j);
            let ds = weighted_derivative(&grid, phase.slice(j), &w);
            let flux: Vec<f64> = r.iter().zip(&ds).map(|(r, d)| r * d).collect();
            let dflux = spectral::derivative(&grid, &flux);
            let d2w = spectral::second_derivative(&grid, &w);
            let q = quotient_with_fill(&d2w, &w);
            let mask = significant_mask(r);
            let (lo, hi) = (rho.slice(j - 1), rho.slice(j + 1));
            let (slo, shi) = (phase.slice(j - 1), phase.slice(j + 1));

            let mut out = [0.0f64; 4];
            for k in 0..grid.n_x {
                let dtr = (hi[k] - lo[k]) / (2.0 * dt);
                out[0] = out[0].max((dtr + dflux[k]).abs());
                out[1] = out[1].max(dtr.abs()).max(dflux[k].abs());
                if mask[k] {
                    let dts = (shi[k] - slo[k]) / (2.0 * dt);
                    let kinetic = 0.5 * ds[k] * ds[k];
                    let quantum = 0.5 * q[k];
                    out[2] = out[2].max((dts + kinetic - quantum).abs());
                    out[3] = out[3].max(dts.abs()).max(kinetic).max(quantum.abs());
                }
            }
            out
        })
        .collect();

    let sup = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
    Ok(MadelungResiduals {
        continuity: sup(0),
        continuity_scale: sup(1),
        hamilton_jacobi: sup(2),
        hamilton_jacobi_scale: sup(3),
    })
}
