//! Classical optimal transport on the line: Gaussian `W₂`, the monotone
//! (Brénier) map `T = F₁⁻¹ ∘ F₀`, displacement interpolation between
//! Gaussians, and the pressureless Euler residual that separates classical
//! geodesics from quantum couples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_functionals::{classical_action, quantum_action};
use crate::error::{Error, Result};
use crate::grid::{trapezoid_periodic, GridSpec, ScalarField, VectorField};
use crate::madelung::{significant_mask, FluidCouple, Provenance};
use crate::spectral::{self, check_boundary, quotient_with_fill, weighted_derivative, FourierSeries};

/// Newton iterations stop once the bracket is this narrow (relative to `dx`).
const INVERSION_TOL: f64 = 1e-14;
const MAX_INVERSION_STEPS: usize = 100;

/// Endpoint densities of a couple must match the stated Gaussians this
/// closely (sup norm) in [`quantum_vs_classical`].
const ENDPOINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMeasure {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianMeasure {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let g = GaussianMeasure { mean, variance };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::invalid("variance", "must be positive"));
        }
        if !self.mean.is_finite() {
            return Err(Error::invalid("mean", "must be finite"));
        }
        Ok(())
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = x - self.mean;
        (-0.5 * z * z / self.variance).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

/// `τ₂ = (m₀ - m₁)² + (s₀ - s₁)²`.
pub fn gaussian_w2(g0: &GaussianMeasure, g1: &GaussianMeasure) -> f64 {
    let dm = g0.mean - g1.mean;
    let ds = g0.std() - g1.std();
    dm * dm + ds * ds
}

/// Monotone transport map and its convex potential sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan1D {
    pub grid: GridSpec,
    pub map_samples: Vec<f64>,
    /// `φ(x_k)`, the cumulative trapezoid of `T` from `x_min`.
    pub potential_samples: Vec<f64>,
    /// `∫ |T(x) - x|² ρ₀(x) dx`.
    pub cost: f64,
}

impl TransportPlan1D {
    pub fn is_monotone(&self) -> bool {
        self.map_samples.windows(2).all(|w| w[1] >= w[0])
    }

    /// Largest `|(φ_{k+1} - φ_k)/dx - (T_k + T_{k+1})/2|`.
    pub fn potential_defect(&self) -> f64 {
        let dx = self.grid.dx();
        self.potential_samples
            .windows(2)
            .zip(self.map_samples.windows(2))
            .map(|(p, t)| ((p[1] - p[0]) / dx - 0.5 * (t[0] + t[1])).abs())
            .fold(0.0, f64::max)
    }
}

/// Distribution function `F(x) = ∫_{x_min}^x ρ / ∫ρ` of a decaying slice,
/// exact for the band-limited interpolant of `ρ`.
struct SpectralCdf {
    x_min: f64,
    length: f64,
    mean_slope: f64,
    periodic: FourierSeries,
    density: FourierSeries,
    mass: f64,
    nodes: Vec<f64>,
}

impl SpectralCdf {
    fn new(grid: &GridSpec, rho: &[f64]) -> Result<Self> {
        if rho.len() != grid.n_x {
            return Err(Error::ShapeMismatch {
                expected: grid.n_x,
                actual: rho.len(),
            });
        }
        if rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidDensity("densities must be finite and nonnegative".into()));
        }
        check_boundary(grid, rho)?;
        let (prim, mass) = spectral::antiderivative(grid, rho);
        if !(mass > 0.0) {
            return Err(Error::InvalidDensity("density has zero mass".into()));
        }
        let length = grid.length();
        let nodes = grid
            .xs()
            .iter()
            .zip(&prim)
            .map(|(x, p)| (p + mass * (x - grid.x_min) / length) / mass)
            .collect();
        Ok(SpectralCdf {
            x_min: grid.x_min,
            length,
            mean_slope: mass / length,
            periodic: FourierSeries::new(grid, &prim),
            density: FourierSeries::new(grid, rho),
            mass,
            nodes,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        (self.periodic.eval(x) + self.mean_slope * (x - self.x_min)) / self.mass
    }

    fn pdf(&self, x: f64) -> f64 {
        self.density.eval(x) / self.mass
    }

    /// `F⁻¹(c)`: bracket from the nodal values, then safeguarded Newton.
    fn inverse(&self, c: f64, dx: f64) -> f64 {
        let n = self.nodes.len();
        let x_max = self.x_min + self.length;
        if c <= 0.0 {
            return self.x_min;
        }
        if c >= 1.0 {
            return x_max;
        }
        let i = self.nodes.partition_point(|&f| f <= c);
        let (mut lo, mut hi) = if i == 0 {
            (self.x_min, self.x_min)
        } else if i >= n {
            (self.x_min + (n - 1) as f64 * dx, x_max)
        } else {
            (self.x_min + (i - 1) as f64 * dx, self.x_min + i as f64 * dx)
        };
        if hi <= lo {
            return lo;
        }
        let (f_lo, f_hi) = (self.eval(lo) - c, self.eval(hi) - c);
        if f_lo >= 0.0 {
            return lo;
        }
        if f_hi <= 0.0 {
            return hi;
        }
        let mut x = lo + (hi - lo) * (-f_lo) / (f_hi - f_lo);
        for _ in 0..MAX_INVERSION_STEPS {
            let f = self.eval(x) - c;
            let p = self.pdf(x);
            // test before moving: a converged Newton point can sit on the
            // bracket edge, where the safeguard would bisect away from it
            if f == 0.0 || (p > 0.0 && (f / p).abs() <= INVERSION_TOL * dx) {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= INVERSION_TOL * dx {
                return 0.5 * (lo + hi);
            }
            let newton = if p > 0.0 { x - f / p } else { f64::NAN };
            x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        x
    }
}

/// The monotone map pushing `rho0` onto `rho1`.
///
/// Both distribution functions are integrated spectrally (exact for the
/// band-limited interpolants) and `F₁` is inverted by bracketed Newton
/// iteration, so the map is accurate to round-off wherever `ρ₁` is not
/// negligible. A running maximum removes round-off non-monotonicity in the
/// far tails.
pub fn monge_map_1d(grid: &GridSpec, rho0: &[f64], rho1: &[f64]) -> Result<TransportPlan1D> {
    grid.require_1d()?;
    let f0 = SpectralCdf::new(grid, rho0)?;
    let f1 = SpectralCdf::new(grid, rho1)?;
    let dx = grid.dx();
    let mut map: Vec<f64> = f0.nodes.par_iter().map(|&c| f1.inverse(c, dx)).collect();
    let mut running = f64::NEG_INFINITY;
    for t in map.iter_mut() {
        running = running.max(*t);
        *t = running;
    }
    let mut potential = Vec::with_capacity(grid.n_x);
    let mut acc = 0.0;
    potential.push(0.0);
    for w in map.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        potential.push(acc);
    }
    let xs = grid.xs();
    let integrand: Vec<f64> = map
        .iter()
        .zip(&xs)
        .zip(rho0)
        .map(|((t, x), r)| (t - x) * (t - x) * r)
        .collect();
    let cost = trapezoid_periodic(grid, &integrand) / f0.mass;
    Ok(TransportPlan1D {
        grid: *grid,
        map_samples: map,
        potential_samples: potential,
        cost,
    })
}

/// `τ₂(ρ(·,0), ρ(·,1))` of a couple by the quantile coupling.
pub fn endpoint_w2(couple: &FluidCouple) -> Result<f64> {
    let grid = couple.grid();
    Ok(monge_map_1d(grid, couple.rho().slice(0), couple.rho().slice(grid.n_t))?.cost)
}

/// Displacement interpolation between two Gaussians in closed form.
pub fn displacement_couple(g0: &GaussianMeasure, g1: &GaussianMeasure, grid: &GridSpec) -> Result<FluidCouple> {
    g0.validate()?;
    g1.validate()?;
    grid.validate()?;
    grid.require_1d()?;
    let (m0, m1, s0, s1) = (g0.mean, g1.mean, g0.std(), g1.std());
    let mean = |t: f64| (1.0 - t) * m0 + t * m1;
    let std = |t: f64| (1.0 - t) * s0 + t * s1;
    let rho = ScalarField::from_fn(*grid, |x, t| GaussianMeasure {
        mean: mean(t),
        variance: std(t) * std(t),
    }
    .density(x))?;
    for j in 0..grid.n_times() {
        check_boundary(grid, rho.slice(j))?;
    }
    let v = VectorField::from_fn(*grid, |x, t| (m1 - m0) + (s1 - s0) * (x - mean(t)) / std(t))?;
    FluidCouple::new(rho, v, Provenance::ClassicalOt)
}

/// Sup of `|∂_t v + v ∂_x v|` and of its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerResidual {
    pub residual: f64,
    pub scale: f64,
}

fn velocity_gradient(couple: &FluidCouple, j: usize) -> Vec<f64> {
    weighted_derivative(couple.grid(), couple.v().slice(j), &couple.sqrt_rho(j))
}

/// Pressureless Euler residual over interior time nodes, with centered
/// time differences and `∂_x v` taken through `√ρ`. The sup runs over the
/// significant region of `ρ(·, t)`, where `v` is meaningful.
pub fn euler_residual(couple: &FluidCouple) -> Result<EulerResidual> {
    let grid = *couple.grid();
    grid.require_1d()?;
    let dt = grid.dt();
    let rows: Vec<(f64, f64)> = (1..grid.n_t)
        .into_par_iter()
        .map(|j| {
            let v = couple.v().slice(j);
            let (lo, hi) = (couple.v().slice(j - 1), couple.v().slice(j + 1));
            let dv = velocity_gradient(couple, j);
            let mask = significant_mask(couple.rho().slice(j));
            let mut res = 0.0f64;
            let mut scale = 0.0f64;
            for k in 0..grid.n_x {
                if !mask[k] {
                    continue;
                }
                let dtv = (hi[k] - lo[k]) / (2.0 * dt);
                let adv = v[k] * dv[k];
                res = res.max((dtv + adv).abs());
                scale = scale.max(dtv.abs()).max(adv.abs());
            }
            (res, scale)
        })
        .collect();
    Ok(EulerResidual {
        residual: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        scale: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

/// Sup over interior time nodes and the significant region of
/// `|½ ∂_x(∂_x²√ρ / √ρ)|`, the quantum force that a Schrödinger couple's
/// velocity feels in place of pressureless Euler.
pub fn quantum_force_sup(couple: &FluidCouple) -> Result<f64> {
    let grid = *couple.grid();
    let sups: Vec<f64> = (1..grid.n_t)
        .into_par_iter()
        .map(|j| {
            let w = couple.sqrt_rho(j);
            let q = quotient_with_fill(&spectral::second_derivative(&grid, &w), &w);
            let dq = weighted_derivative(&grid, &q, &w);
            let mask = significant_mask(couple.rho().slice(j));
            dq.iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(d, _)| (0.5 * d).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(sups.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumClassicalReport {
    pub tau2: f64,
    pub classical_displacement: f64,
    pub classical_schrodinger: f64,
    pub quantum_schrodinger: f64,
    /// Summed error radii entering the two orderings.
    pub tolerance: f64,
    pub tau2_below_classical: bool,
    pub quantum_below_classical: bool,
}

/// Compares the classical geodesic between `g0` and `g1` with a
/// Schrödinger couple joining the same endpoints.
pub fn quantum_vs_classical(
    g0: &GaussianMeasure,
    g1: &GaussianMeasure,
    schrodinger: &FluidCouple,
) -> Result<QuantumClassicalReport> {
    let grid = *schrodinger.grid();
    let xs = grid.xs();
    for (g, j) in [(g0, 0), (g1, grid.n_t)] {
        let gap = xs
            .iter()
            .zip(schrodinger.rho().slice(j))
            .map(|(&x, r)| (g.density(x) - r).abs())
            .fold(0.0, f64::max);
        if gap > ENDPOINT_TOL {
            return Err(Error::invalid(
                "schrodinger",
                format!("density at time index {j} differs from the endpoint Gaussian by {gap}"),
            ));
        }
    }
    let displacement = displacement_couple(g0, g1, &grid)?;
    let cd = classical_action(&displacement)?;
    let cs = classical_action(schrodinger)?;
    let qs = quantum_action(schrodinger)?;
    let tau2 = gaussian_w2(g0, g1);
    let tolerance = cd.error_radius + cs.error_radius + qs.error_radius;
    Ok(QuantumClassicalReport {
        tau2,
        classical_displacement: cd.value,
        classical_schrodinger: cs.value,
        quantum_schrodinger: qs.value,
        tolerance,
        tau2_below_classical: tau2 <= cs.value + cs.error_radius,
        quantum_below_classical: qs.value <= cs.value + cs.error_radius + qs.error_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::madelung::decompose;
    use crate::schrodinger::{gaussian_packet, GaussianPacketSpec};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn sampled(grid: &GridSpec, g: &GaussianMeasure) -> Vec<f64> {
        grid.xs().iter().map(|&x| g.density(x)).collect()
    }

    /// `∫₀¹ (F₀⁻¹(u) - F₁⁻¹(u))² du` by the midpoint rule on quantiles.
    fn quantile_w2(q0: impl Fn(f64) -> f64, q1: impl Fn(f64) -> f64) -> f64 {
        let m = 200_000;
        (0..m)
            .map(|i| {
                let u = (i as f64 + 0.5) / m as f64;
                let d = q0(u) - q1(u);
                d * d
            })
            .sum::<f64>()
            / m as f64
    }

    fn normal_quantile(g: GaussianMeasure) -> impl Fn(f64) -> f64 {
        let n = Normal::new(g.mean, g.std()).unwrap();
        move |u| n.inverse_cdf(u)
    }

    #[test]
    fn gaussian_w2_examples() {
        let n01 = GaussianMeasure::new(0.0, 1.0).unwrap();
        assert_eq!(gaussian_w2(&n01, &n01), 0.0);
        let n31 = GaussianMeasure::new(3.0, 1.0).unwrap();
        let n04 = GaussianMeasure::new(0.0, 4.0).unwrap();
        assert!((gaussian_w2(&n01, &n31) - 9.0).abs() < 1e-15);
        assert!((gaussian_w2(&n01, &n04) - 1.0).abs() < 1e-15);
        for (a, b) in [(n01, n31), (n01, n04)] {
            let oracle = quantile_w2(normal_quantile(a), normal_quantile(b));
            assert!((gaussian_w2(&a, &b) - oracle).abs() < 1e-3, "{oracle}");
        }
        assert!(GaussianMeasure::new(0.0, 0.0).is_err());
    }

    #[test]
    fn identity_map_for_equal_densities() {
        let grid = GridSpec::default();
        let rho = sampled(&grid, &GaussianMeasure::new(0.5, 1.2).unwrap());
        let plan = monge_map_1d(&grid, &rho, &rho).unwrap();
        let mask = significant_mask(&rho);
        for ((t, x), m) in plan.map_samples.iter().zip(grid.xs()).zip(mask) {
            // F evaluation round-off (~1e-15) over ρ ≥ 1e-6 max ρ
            if m {
                assert!((t - x).abs() < 1e-8, "x {x}: {}", t - x);
            }
        }
        assert!(plan.cost < 1e-14, "{}", plan.cost);
    }

    #[test]
    fn translation_map() {
        let grid = GridSpec::default();
        let rho0 = sampled(&grid, &GaussianMeasure::new(0.0, 1.0).unwrap());
        let rho1 = sampled(&grid, &GaussianMeasure::new(3.0, 1.0).unwrap());
        let plan = monge_map_1d(&grid, &rho0, &rho1).unwrap();
        // wherever rho0 is significant the image must be exact, including
        // points whose image lands a hair above a bracket node
        let mask = significant_mask(&rho0);
        for ((t, x), m) in plan.map_samples.iter().zip(grid.xs()).zip(&mask) {
            if *m {
                assert!((t - x - 3.0).abs() < 1e-9, "x {x}: {t}");
            }
        }
        assert!((plan.cost - 9.0).abs() < 1e-9, "{}", plan.cost);
        assert!(plan.is_monotone());
        assert!(plan.potential_defect() < 1e-8);
    }

    #[test]
    fn scaling_map() {
        let grid = GridSpec::default();
        let rho0 = sampled(&grid, &GaussianMeasure::new(0.0, 1.0).unwrap());
        let rho1 = sampled(&grid, &GaussianMeasure::new(0.0, 4.0).unwrap());
        // variance 4 needs a wider box to decay
        let wide = GridSpec::new(-24.0, 24.0, 1024, 2).unwrap();
        let rho0w = sampled(&wide, &GaussianMeasure::new(0.0, 1.0).unwrap());
        let rho1w = sampled(&wide, &GaussianMeasure::new(0.0, 4.0).unwrap());
        assert!(matches!(monge_map_1d(&grid, &rho0, &rho1), Err(Error::BoundaryLeak { .. })));
        let plan = monge_map_1d(&wide, &rho0w, &rho1w).unwrap();
        let mask = significant_mask(&rho0w);
        for ((t, x), m) in plan.map_samples.iter().zip(wide.xs()).zip(&mask) {
            if *m {
                assert!((t - 2.0 * x).abs() < 1e-8, "x {x}: {t}");
            }
        }
        assert!((plan.cost - 1.0).abs() < 1e-8, "{}", plan.cost);
    }

    #[test]
    fn non_gaussian_target_matches_quantile_oracle() {
        let grid = GridSpec::default();
        let a = Normal::new(-1.0, 0.7).unwrap();
        let b = Normal::new(1.5, 0.5).unwrap();
        let mix_cdf = |x: f64| 0.5 * (a.cdf(x) + b.cdf(x));
        let mix_quantile = |u: f64| {
            let (mut lo, mut hi) = (-12.0, 12.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mix_cdf(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let g0 = GaussianMeasure::new(0.2, 0.8).unwrap();
        let rho0 = sampled(&grid, &g0);
        let rho1: Vec<f64> = grid
            .xs()
            .iter()
            .map(|&x| {
                use statrs::distribution::Continuous;
                0.5 * (a.pdf(x) + b.pdf(x))
            })
            .collect();
        let plan = monge_map_1d(&grid, &rho0, &rho1).unwrap();
        let oracle = quantile_w2(normal_quantile(g0), mix_quantile);
        assert!((plan.cost - oracle).abs() < 1e-4, "{} vs {oracle}", plan.cost);
        assert!(plan.is_monotone());
    }

    #[test]
    fn displacement_couple_identities() {
        let grid = GridSpec::new(-12.0, 12.0, 512, 64).unwrap();
        let g0 = GaussianMeasure::new(0.0, 1.0).unwrap();
        let still = displacement_couple(&g0, &g0, &grid).unwrap();
        assert!(still.v().values().iter().all(|&v| v == 0.0));
        assert!(classical_action(&still).unwrap().value.abs() < 1e-15);

        let g1 = GaussianMeasure::new(3.0, 1.0).unwrap();
        let shift = displacement_couple(&g0, &g1, &grid).unwrap();
        assert!((classical_action(&shift).unwrap().value - 9.0).abs() < 1e-5);

        let wide = GridSpec::new(-24.0, 24.0, 1024, 64).unwrap();
        let g4 = GaussianMeasure::new(0.0, 4.0).unwrap();
        let spread = displacement_couple(&g0, &g4, &wide).unwrap();
        assert!((classical_action(&spread).unwrap().value - 1.0).abs() < 1e-4);
    }

    #[test]
    fn displacement_velocity_is_affine() {
        let grid = GridSpec::new(-12.0, 12.0, 512, 16).unwrap();
        let g0 = GaussianMeasure::new(-1.0, 0.8).unwrap();
        let g1 = GaussianMeasure::new(1.0, 1.5).unwrap();
        let c = displacement_couple(&g0, &g1, &grid).unwrap();
        let xs = grid.xs();
        for j in 0..grid.n_times() {
            let v = c.v().slice(j);
            // affine fit through the first and last nodes
            let slope = (v[grid.n_x - 1] - v[0]) / (xs[grid.n_x - 1] - xs[0]);
            let dev = v
                .iter()
                .zip(&xs)
                .map(|(v, x)| (v - (c.v().slice(j)[0] + slope * (x - xs[0]))).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-8);
        }
    }

    #[test]
    fn geodesic_solves_pressureless_euler() {
        let g0 = GaussianMeasure::new(0.0, 1.0).unwrap();
        let g1 = GaussianMeasure::new(1.0, 1.44).unwrap();
        let coarse = displacement_couple(&g0, &g1, &GridSpec::default().with_n_t(64)).unwrap();
        let fine = displacement_couple(&g0, &g1, &GridSpec::default().with_n_t(128)).unwrap();
        let (a, b) = (euler_residual(&coarse).unwrap(), euler_residual(&fine).unwrap());
        assert!(a.residual <= 1e-3 * a.scale);
        let ratio = a.residual / b.residual;
        assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn static_couple_has_no_euler_residual() {
        let g = GaussianMeasure::new(0.0, 1.0).unwrap();
        let c = displacement_couple(&g, &g, &GridSpec::default().with_n_t(8)).unwrap();
        assert_eq!(euler_residual(&c).unwrap().residual, 0.0);
    }

    #[test]
    fn packet_feels_the_quantum_force() {
        let spec = GaussianPacketSpec::default();
        let grid = GridSpec::default().with_n_t(128);
        let couple = decompose(&gaussian_packet(&spec, &grid).unwrap()).unwrap().couple;
        let r = euler_residual(&couple).unwrap();
        let q = quantum_force_sup(&couple).unwrap();
        assert!(q > 0.1);
        assert!((r.residual - q).abs() < 0.05 * q, "{} vs {q}", r.residual);
    }

    #[test]
    fn schrodinger_couple_pays_more_than_the_geodesic() {
        let spec = GaussianPacketSpec::default();
        let grid = GridSpec::default().with_n_t(128);
        let couple = decompose(&gaussian_packet(&spec, &grid).unwrap()).unwrap().couple;
        let g0 = GaussianMeasure::new(0.0, spec.variance_at(0.0)).unwrap();
        let g1 = GaussianMeasure::new(0.0, spec.variance_at(1.0)).unwrap();
        let rep = quantum_vs_classical(&g0, &g1, &couple).unwrap();
        assert!(rep.tau2_below_classical && rep.quantum_below_classical);
        assert!((rep.tau2 - (1.0 - 1.25f64.sqrt()).powi(2)).abs() < 1e-15);
        assert!((rep.classical_displacement - rep.tau2).abs() < 1e-4);
        assert!((endpoint_w2(&couple).unwrap() - rep.tau2).abs() < 1e-5);
        // classical minus quantum is the Fisher term ∫ 1/(4 s_t²) dt
        let fisher = 0.5 * 0.5f64.atan();
        assert!((rep.classical_schrodinger - rep.quantum_schrodinger - fisher).abs() < 1e-5);
    }

    #[test]
    fn mismatched_endpoints_are_rejected() {
        let spec = GaussianPacketSpec::default();
        let grid = GridSpec::default().with_n_t(16);
        let couple = decompose(&gaussian_packet(&spec, &grid).unwrap()).unwrap().couple;
        let g = GaussianMeasure::new(1.0, 1.0).unwrap();
        assert!(quantum_vs_classical(&g, &g, &couple).is_err());
    }
}
