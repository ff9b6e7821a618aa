//! Competitor couples around a base couple `(ρ, v)`.
//!
//! A perturbation `g = ∂_x G` with `G` smooth and compactly supported in
//! space and time moves mass without changing it, so `ρ + y g` keeps the
//! endpoint densities. The velocity is corrected by `X_y = u_y / (ρ + y g)`,
//! where `∂_x u_y = -y [∂_t g + ∂_x(g v)]`, which keeps the continuity
//! equation intact. In one dimension `u_y` is a plain primitive, and it is
//! linear in `y`.
//!
//! [`verify_theorem1`] evaluates `A^Q` along such families and checks that
//! the base is stationary and no competitor does better.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_functionals::{quantum_action, ActionReport};
use crate::error::{Error, Result};
use crate::grid::{time_derivative, trapezoid_periodic, GridSpec, ScalarField, VectorField};
use crate::madelung::{FluidCouple, Provenance};
use crate::spectral;

/// Gaussian components are cut off at this many standard deviations, where
/// they are below `e^{-36}` of their peak.
const CUTOFF_SIGMAS: f64 = 8.5;

/// Range of the random component widths (standard deviations).
const WIDTH_RANGE: (f64, f64) = (0.4, 0.6);

/// Component centres stay within this distance of the support midpoint,
/// where the base density is not small compared to the bump.
const CENTRE_SPREAD: f64 = 1.5;

/// `u` values below this fraction of `max |u|` are round-off of the
/// primitive outside the support and are set to zero.
const U_FLOOR: f64 = 1e-12;

/// Step sizes of the centered `y`-derivative at zero.
pub const DERIVATIVE_STEPS: [f64; 2] = [0.125, 0.0625];

/// A competitor is reported as violating the inequality only when it falls
/// below the base by more than this many combined error radii.
pub const VIOLATION_FACTOR: f64 = 3.0;

/// Random smooth perturbation recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub seed: u64,
    pub space_support: (f64, f64),
    pub time_window: (f64, f64),
    /// Requested `max |g|` before the positivity rescaling.
    pub amplitude: f64,
    pub modes: usize,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            seed: 0,
            space_support: (-6.0, 6.0),
            time_window: (0.1, 0.9),
            amplitude: 0.03,
            modes: 3,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let (a, b) = self.space_support;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid("space_support", "must be a nonempty interval"));
        }
        if !(a > grid.x_min && b < grid.x_max) {
            return Err(Error::invalid("space_support", "must lie strictly inside the box"));
        }
        if (b - a) / 2.0 < CUTOFF_SIGMAS * WIDTH_RANGE.1 {
            return Err(Error::invalid(
                "space_support",
                format!("must be at least {} long", 2.0 * CUTOFF_SIGMAS * WIDTH_RANGE.1),
            ));
        }
        let (t0, t1) = self.time_window;
        if !(t0 > 0.0 && t1 < 1.0 && t0 < t1) {
            return Err(Error::invalid("time_window", "must be a nonempty interval inside (0, 1)"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be nonnegative"));
        }
        if self.modes == 0 {
            return Err(Error::invalid("modes", "at least one component is required"));
        }
        Ok(())
    }
}

/// `G(x) = Σ c_m exp(-(x - μ_m)² / (2 w_m²))`, truncated at
/// `CUTOFF_SIGMAS · w_m`.
#[derive(Debug, Clone)]
struct SpaceProfile {
    parts: Vec<(f64, f64, f64)>,
}

impl SpaceProfile {
    fn random(spec: &PerturbationSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (a, b) = spec.space_support;
        let parts = (0..spec.modes)
            .map(|_| {
                let w = rng.random_range(WIDTH_RANGE.0..=WIDTH_RANGE.1);
                let reach = CUTOFF_SIGMAS * w;
                let mid = 0.5 * (a + b);
                let lo = (a + reach).max(mid - CENTRE_SPREAD);
                let hi = (b - reach).min(mid + CENTRE_SPREAD);
                let mu = rng.random_range(lo..=hi);
                let c = rng.random_range(-1.0..=1.0);
                (c, mu, w)
            })
            .collect();
        SpaceProfile { parts }
    }

    /// `∂_x G`.
    fn derivative(&self, x: f64) -> f64 {
        self.parts
            .iter()
            .map(|&(c, mu, w)| {
                let z = (x - mu) / w;
                if z.abs() > CUTOFF_SIGMAS {
                    0.0
                } else {
                    -c * z / w * (-0.5 * z * z).exp()
                }
            })
            .sum()
    }
}

/// Smooth window on `(t0, t1)` with peak one, flat to all orders at the ends.
fn window(t: f64, (t0, t1): (f64, f64)) -> f64 {
    let half = 0.5 * (t1 - t0);
    let s = (t - 0.5 * (t0 + t1)) / half;
    if s.abs() >= 1.0 {
        return 0.0;
    }
    (1.0 - 1.0 / (1.0 - s * s)).exp()
}

/// `g` together with the factor applied to the requested amplitude.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub spec: PerturbationSpec,
    pub g: ScalarField,
    /// Factor in `(0, 1]` applied to keep `ρ ± g` positive.
    pub rescale: f64,
}

/// The perturbation of `spec` against `base`: random Gaussian components in
/// space times a smooth window in time, scaled to `max |g| = amplitude`.
///
/// The requested amplitude must keep `ρ ± g` positive everywhere, otherwise
/// the result is [`Error::AmplitudeInfeasible`]. If `ρ - |g|` then still
/// dips below a tenth of the smallest density on the support, the amplitude
/// is scaled down until it does not.
pub fn build_perturbation(spec: &PerturbationSpec, base: &FluidCouple) -> Result<Perturbation> {
    let grid = *base.grid();
    spec.validate(&grid)?;
    let profile = SpaceProfile::random(spec);
    let xs = grid.xs();
    let shape: Vec<f64> = xs.iter().map(|&x| profile.derivative(x)).collect();
    let windows: Vec<f64> = (0..grid.n_times()).map(|j| window(grid.t(j), spec.time_window)).collect();

    let peak_shape = shape.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let peak_window = windows.iter().fold(0.0f64, |m, w| m.max(*w));
    let mut kappa = if peak_shape > 0.0 && peak_window > 0.0 {
        spec.amplitude / (peak_shape * peak_window)
    } else {
        0.0
    };

    let rho = base.rho();
    let (a, b) = spec.space_support;
    let on_support: Vec<bool> = xs.iter().map(|&x| x >= a && x <= b).collect();
    let floor = 0.1
        * (0..grid.n_times())
            .flat_map(|j| rho.slice(j).iter().zip(&on_support).filter(|(_, s)| **s).map(|(r, _)| *r))
            .fold(f64::INFINITY, f64::min);

    // a tenth of the support minimum must survive on the support; elsewhere
    // (cut-off tails only) half of ρ
    let mut rescale = 1.0f64;
    for (j, &phi) in windows.iter().enumerate() {
        for (k, &s) in shape.iter().enumerate() {
            let g = (kappa * phi * s).abs();
            if g == 0.0 {
                continue;
            }
            let r = rho.slice(j)[k];
            if g >= r {
                return Err(Error::AmplitudeInfeasible(format!(
                    "amplitude {} makes rho - |g| = {} at t = {}, x = {}",
                    spec.amplitude,
                    r - g,
                    grid.t(j),
                    xs[k]
                )));
            }
            let room = if on_support[k] { r - floor } else { 0.5 * r };
            rescale = rescale.min(room / g);
        }
    }
    kappa *= rescale;

    let g_vals: Vec<f64> = windows
        .iter()
        .flat_map(|&phi| shape.iter().map(move |&s| kappa * phi * s))
        .collect();
    Ok(Perturbation {
        spec: *spec,
        g: ScalarField::new(grid, g_vals)?,
        rescale,
    })
}

/// The perturbation field `g` alone; see [`build_perturbation`].
pub fn make_perturbation(spec: &PerturbationSpec, base: &FluidCouple) -> Result<ScalarField> {
    Ok(build_perturbation(spec, base)?.g)
}

/// `u_1 = -∫_{x_min}^x [∂_t g + ∂_x(g v)] dx'`, the flux correction at
/// `y = 1`.
fn unit_flux(base: &FluidCouple, g: &ScalarField, dg_dt: &ScalarField) -> Result<VectorField> {
    let grid = *base.grid();
    if *g.grid() != grid || *dg_dt.grid() != grid {
        return Err(Error::invalid("g", "perturbation and base grids differ"));
    }
    let slices: Vec<Result<Vec<f64>>> = (0..grid.n_times())
        .into_par_iter()
        .map(|j| {
            let gs = g.slice(j);
            let gv: Vec<f64> = gs.iter().zip(base.v().slice(j)).map(|(g, v)| g * v).collect();
            let dgv = spectral::derivative(&grid, &gv);
            let integrand: Vec<f64> = dg_dt.slice(j).iter().zip(&dgv).map(|(a, b)| a + b).collect();
            let (prim, total) = spectral::antiderivative(&grid, &integrand);
            let max = prim.iter().fold(0.0f64, |m, u| m.max(u.abs()));
            if total.abs() > 1e-8 * max.max(f64::MIN_POSITIVE) && total.abs() > 1e-300 {
                return Err(Error::SupportLeak {
                    leak: total.abs(),
                    max,
                });
            }
            let cut = U_FLOOR * max;
            Ok(prim.into_iter().map(|u| if u.abs() <= cut { 0.0 } else { -u }).collect())
        })
        .collect();
    VectorField::from_slices(grid, slices.into_iter().collect::<Result<_>>()?)
}

fn centered_time_derivative(g: &ScalarField) -> Result<ScalarField> {
    let grid = *g.grid();
    let slices: Vec<Vec<f64>> = (0..grid.n_times())
        .map(|j| time_derivative(&grid, |i| g.slice(i).to_vec(), j))
        .collect();
    ScalarField::from_slices(grid, slices)
}

/// `X_y = u_y / (ρ + y g)`, with `∂_t g` taken by centered differences.
///
/// Fails with [`Error::SupportLeak`] when the primitive does not return to
/// zero (i.e. `g` does not have zero mean), and with
/// [`Error::InvalidDensity`] when `ρ + y g` is not positive.
pub fn solve_velocity_correction(base: &FluidCouple, g: &ScalarField, y: f64) -> Result<VectorField> {
    let dg_dt = centered_time_derivative(g)?;
    let u = unit_flux(base, g, &dg_dt)?;
    correction_from_flux(base, g, &u, y)
}

fn correction_from_flux(base: &FluidCouple, g: &ScalarField, u1: &VectorField, y: f64) -> Result<VectorField> {
    let grid = *base.grid();
    let rho = base.rho().values();
    let x: Vec<f64> = u1
        .values()
        .iter()
        .zip(rho)
        .zip(g.values())
        .enumerate()
        .map(|(i, ((u, r), g))| {
            let ry = r + y * g;
            if ry <= 0.0 {
                return Err(Error::InvalidDensity(format!(
                    "rho + y g = {ry} at flat index {i} for y = {y}"
                )));
            }
            Ok(y * u / ry)
        })
        .collect::<Result<_>>()?;
    VectorField::new(grid, x)
}

/// The family `(ρ + y g, v + X_y)` for one perturbation.
#[derive(Debug, Clone)]
pub struct CompetitorFamily {
    pub base: FluidCouple,
    pub g: ScalarField,
    /// Flux correction at `y = 1`; the one at `y` is `y · u`.
    pub u: VectorField,
    pub y_grid: Vec<f64>,
}

/// `{-1, -0.75, …, 1}`.
pub fn default_y_grid() -> Vec<f64> {
    (-4..=4).map(|i| i as f64 * 0.25).collect()
}

impl CompetitorFamily {
    /// Family of a ready-made perturbation. `∂_t g` is taken by the same
    /// centered differences the continuity residual uses, so every member
    /// satisfies the discrete continuity equation exactly as well as the base.
    pub fn new(base: &FluidCouple, perturbation: &Perturbation) -> Result<Self> {
        let dg_dt = centered_time_derivative(&perturbation.g)?;
        let u = unit_flux(base, &perturbation.g, &dg_dt)?;
        Ok(CompetitorFamily {
            base: base.clone(),
            g: perturbation.g.clone(),
            u,
            y_grid: default_y_grid(),
        })
    }

    pub fn from_spec(base: &FluidCouple, spec: &PerturbationSpec) -> Result<Self> {
        Self::new(base, &build_perturbation(spec, base)?)
    }

    /// The competitor couple at `y`.
    pub fn couple(&self, y: f64) -> Result<FluidCouple> {
        if y == 0.0 {
            return Ok(self.base.clone());
        }
        let x = correction_from_flux(&self.base, &self.g, &self.u, y)?;
        let rho = self.base.rho().zip_map(&self.g, |r, g| r + y * g)?;
        let v: Vec<f64> = self.base.v().values().iter().zip(x.values()).map(|(v, x)| v + x).collect();
        FluidCouple::new(rho, VectorField::new(*self.base.grid(), v)?, Provenance::Competitor)
    }

    /// Largest `|∫ g(·, t) dx|` over time nodes.
    pub fn max_mass_defect(&self) -> f64 {
        let grid = self.base.grid();
        (0..grid.n_times())
            .map(|j| trapezoid_periodic(grid, self.g.slice(j)).abs())
            .fold(0.0, f64::max)
    }
}

/// `A^Q` along the family at every `y` of its grid.
pub fn evaluate_family(fam: &CompetitorFamily) -> Result<Vec<(f64, ActionReport)>> {
    evaluate_at(fam, &fam.y_grid)
}

fn evaluate_at(fam: &CompetitorFamily, ys: &[f64]) -> Result<Vec<(f64, ActionReport)>> {
    ys.par_iter()
        .map(|&y| Ok((y, quantum_action(&fam.couple(y)?)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    /// Some check missed, but only within the error band.
    Inconclusive,
    Violated,
    FailedToConstruct,
}

/// Centered `y`-derivative of `A^Q` at zero for one step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredDerivative {
    pub h: f64,
    pub value: f64,
    pub error_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecReport {
    pub seed: u64,
    pub spec: PerturbationSpec,
    /// `(y, A^Q(y), error radius)`.
    pub y_profile: Vec<(f64, f64, f64)>,
    pub derivatives: Vec<CenteredDerivative>,
    /// `|D(h)| / |D(h/2)|` for the two steps in [`DERIVATIVE_STEPS`].
    pub derivative_ratio: f64,
    pub derivative_at_0: f64,
    /// `min_y [A(y) - A(0)] / (err(y) + err(0))`; below `-3` is a violation.
    pub min_margin: f64,
    pub min_gap: f64,
    /// Smallest second difference of the profile and its error radius.
    pub min_second_difference: f64,
    pub second_difference_radius: f64,
    pub stationary: bool,
    pub minimal: Verdict,
    pub convex: Verdict,
    pub verdict: Verdict,
    pub rescale: f64,
    pub error: Option<String>,
}

impl SpecReport {
    fn failed(spec: &PerturbationSpec, err: &Error) -> Self {
        SpecReport {
            seed: spec.seed,
            spec: *spec,
            y_profile: Vec::new(),
            derivatives: Vec::new(),
            derivative_ratio: f64::NAN,
            derivative_at_0: f64::NAN,
            min_margin: f64::NAN,
            min_gap: f64::NAN,
            min_second_difference: f64::NAN,
            second_difference_radius: f64::NAN,
            stationary: false,
            minimal: Verdict::FailedToConstruct,
            convex: Verdict::FailedToConstruct,
            verdict: Verdict::FailedToConstruct,
            rescale: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub base_action: f64,
    pub base_error_radius: f64,
    pub specs: Vec<SpecReport>,
    pub all_pass: bool,
}

/// Verdict for `value >= -tol` with the `VIOLATION_FACTOR` band.
fn banded(value: f64, radius: f64) -> Verdict {
    if value >= -radius {
        Verdict::Pass
    } else if value >= -VIOLATION_FACTOR * radius {
        Verdict::Inconclusive
    } else {
        Verdict::Violated
    }
}

/// The stationarity check: the centered derivative must shrink by `4 ± 1`
/// when `h` halves, as for a function whose first derivative vanishes.
pub fn derivative_shrinks_quadratically(ratio: f64) -> bool {
    (3.0..=5.0).contains(&ratio)
}

fn check_spec(fam: &CompetitorFamily, spec: &PerturbationSpec, rescale: f64) -> Result<SpecReport> {
    let mut ys = fam.y_grid.clone();
    for h in DERIVATIVE_STEPS {
        ys.push(h);
        ys.push(-h);
    }
    let values = evaluate_at(fam, &ys)?;
    let lookup = |y: f64| -> &ActionReport {
        &values.iter().find(|(v, _)| *v == y).expect("evaluated y").1
    };
    let a0 = lookup(0.0);

    let derivatives: Vec<CenteredDerivative> = DERIVATIVE_STEPS
        .iter()
        .map(|&h| {
            let (p, m) = (lookup(h), lookup(-h));
            CenteredDerivative {
                h,
                value: (p.value - m.value) / (2.0 * h),
                error_radius: (p.error_radius + m.error_radius) / (2.0 * h),
            }
        })
        .collect();
    let derivative_ratio = derivatives[0].value.abs() / derivatives[1].value.abs();

    let profile: Vec<(f64, f64, f64)> = fam
        .y_grid
        .iter()
        .map(|&y| {
            let r = lookup(y);
            (y, r.value, r.error_radius)
        })
        .collect();

    let mut min_margin = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    let mut minimal = Verdict::Pass;
    for &(y, a, e) in &profile {
        if y == 0.0 {
            continue;
        }
        let gap = a - a0.value;
        let radius = e + a0.error_radius;
        min_gap = min_gap.min(gap);
        min_margin = min_margin.min(if radius > 0.0 { gap / radius } else { gap.signum() * f64::INFINITY });
        minimal = worst(minimal, banded(gap, radius));
    }

    let mut min_second = f64::INFINITY;
    let mut second_radius = 0.0;
    let mut convex = Verdict::Pass;
    for w in profile.windows(3) {
        let d2 = w[0].1 - 2.0 * w[1].1 + w[2].1;
        let radius = w[0].2 + 2.0 * w[1].2 + w[2].2;
        if d2 < min_second {
            min_second = d2;
            second_radius = radius;
        }
        convex = worst(convex, banded(d2, radius));
    }

    let stationary = derivative_shrinks_quadratically(derivative_ratio);
    let verdict = if !stationary {
        worst(worst(minimal, convex), Verdict::Violated)
    } else {
        worst(minimal, convex)
    };
    Ok(SpecReport {
        seed: spec.seed,
        spec: *spec,
        y_profile: profile,
        derivative_at_0: derivatives[0].value,
        derivatives,
        derivative_ratio,
        min_margin,
        min_gap,
        min_second_difference: min_second,
        second_difference_radius: second_radius,
        stationary,
        minimal,
        convex,
        verdict,
        rescale,
        error: None,
    })
}

fn worst(a: Verdict, b: Verdict) -> Verdict {
    let rank = |v: Verdict| match v {
        Verdict::Pass => 0,
        Verdict::Inconclusive => 1,
        Verdict::Violated => 2,
        Verdict::FailedToConstruct => 3,
    };
    if rank(a) >= rank(b) {
        a
    } else {
        b
    }
}

/// Runs the family checks for every spec against `base`, without requiring
/// `base` to be Schrödinger-derived. Used directly for negative controls.
pub fn check_families(base: &FluidCouple, specs: &[PerturbationSpec]) -> Result<Theorem1Report> {
    let a0 = quantum_action(base)?;
    let reports: Vec<SpecReport> = specs
        .par_iter()
        .map(|spec| {
            build_perturbation(spec, base)
                .and_then(|p| {
                    let fam = CompetitorFamily::new(base, &p)?;
                    check_spec(&fam, spec, p.rescale)
                })
                .unwrap_or_else(|e| SpecReport::failed(spec, &e))
        })
        .collect();
    let all_pass = reports.iter().all(|r| r.verdict == Verdict::Pass);
    Ok(Theorem1Report {
        base_action: a0.value,
        base_error_radius: a0.error_radius,
        specs: reports,
        all_pass,
    })
}

/// Stationarity, minimality and convexity of `A^Q` along the competitor
/// family of every spec, for a Schrödinger-derived base.
pub fn verify_theorem1(base: &FluidCouple, specs: &[PerturbationSpec]) -> Result<Theorem1Report> {
    if base.provenance != Provenance::SchrodingerDerived {
        return Err(Error::Unsupported(format!(
            "base couple must be Schrödinger-derived, got {:?}",
            base.provenance
        )));
    }
    check_families(base, specs)
}

/// `count` specs with consecutive seeds from `first_seed` and otherwise
/// default settings.
pub fn random_specs(first_seed: u64, count: usize, amplitude: f64) -> Vec<PerturbationSpec> {
    (0..count as u64)
        .map(|i| PerturbationSpec {
            seed: first_seed + i,
            amplitude,
            ..PerturbationSpec::default()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_functionals::continuity_residual;
    use crate::madelung::decompose;
    use crate::schrodinger::{gaussian_packet, GaussianPacketSpec};

    fn packet_base(n_t: usize) -> FluidCouple {
        let grid = GridSpec::default().with_n_t(n_t);
        decompose(&gaussian_packet(&GaussianPacketSpec::default(), &grid).unwrap())
            .unwrap()
            .couple
    }

    #[test]
    fn perturbation_moves_no_mass_and_spares_the_endpoints() {
        let base = packet_base(64);
        let grid = *base.grid();
        for seed in 0..5 {
            let spec = PerturbationSpec {
                seed,
                ..PerturbationSpec::default()
            };
            let g = make_perturbation(&spec, &base).unwrap();
            for j in 0..grid.n_times() {
                assert!(trapezoid_periodic(&grid, g.slice(j)).abs() < 1e-10);
            }
            assert!(g.slice(0).iter().all(|&v| v == 0.0));
            assert!(g.slice(grid.n_t).iter().all(|&v| v == 0.0));
            assert!(g.values().iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_perturbation_and_correction() {
        let base = packet_base(32);
        let spec = PerturbationSpec {
            amplitude: 0.0,
            ..PerturbationSpec::default()
        };
        let g = make_perturbation(&spec, &base).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        let x = solve_velocity_correction(&base, &g, 0.7).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_y_reproduces_the_base() {
        let base = packet_base(32);
        let fam = CompetitorFamily::from_spec(&base, &PerturbationSpec::default()).unwrap();
        let c = fam.couple(0.0).unwrap();
        assert_eq!(c.rho().values(), base.rho().values());
        assert_eq!(c.v().values(), base.v().values());
        let g = make_perturbation(&PerturbationSpec::default(), &base).unwrap();
        let x0 = solve_velocity_correction(&base, &g, 0.0).unwrap();
        assert!(x0.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn correction_is_linear_in_y() {
        let base = packet_base(32);
        let g = make_perturbation(&PerturbationSpec::default(), &base).unwrap();
        let x1 = solve_velocity_correction(&base, &g, 1.0).unwrap();
        let xh = solve_velocity_correction(&base, &g, 0.5).unwrap();
        // u_y = y u_1, so X_y (ρ + y g) / y is the same field for all y
        for (i, ((a, b), (r, g))) in x1
            .values()
            .iter()
            .zip(xh.values())
            .zip(base.rho().values().iter().zip(g.values()))
            .enumerate()
        {
            let u1 = a * (r + g);
            let uh = b * (r + 0.5 * g) / 0.5;
            assert!((u1 - uh).abs() <= 1e-14 * (1.0 + u1.abs()), "index {i}");
        }
    }

    #[test]
    fn competitors_keep_the_continuity_residual_of_the_base() {
        let base = packet_base(256);
        let base_res = continuity_residual(&base).unwrap();
        let spec = PerturbationSpec {
            seed: 3,
            ..PerturbationSpec::default()
        };
        // centered-difference correction: the discrete residual is unchanged
        let g = make_perturbation(&spec, &base).unwrap();
        let x = solve_velocity_correction(&base, &g, 1.0).unwrap();
        let rho = base.rho().zip_map(&g, |r, g| r + g).unwrap();
        let v: Vec<f64> = base.v().values().iter().zip(x.values()).map(|(v, x)| v + x).collect();
        let c = FluidCouple::new(rho, VectorField::new(*base.grid(), v).unwrap(), Provenance::Competitor).unwrap();
        assert!(continuity_residual(&c).unwrap() <= 10.0 * base_res);
        // family with the analytic time derivative
        let fam = CompetitorFamily::from_spec(&base, &spec).unwrap();
        for y in [-1.0, 1.0] {
            let res = continuity_residual(&fam.couple(y).unwrap()).unwrap();
            assert!(res <= 10.0 * base_res, "y {y}: {res} vs {base_res}");
        }
    }

    #[test]
    fn competitor_masses_stay_normalized() {
        let base = packet_base(64);
        let fam = CompetitorFamily::from_spec(&base, &PerturbationSpec::default()).unwrap();
        assert!(fam.max_mass_defect() < 1e-10);
        for &y in &fam.y_grid {
            // FluidCouple::new re-checks positivity and mass at every time
            fam.couple(y).unwrap();
        }
    }

    #[test]
    fn non_conservative_g_leaks() {
        let base = packet_base(16);
        let grid = *base.grid();
        // a bump with nonzero mass inside the window
        let g = ScalarField::from_fn(grid, |x, t| {
            let phi = window(t, (0.1, 0.9));
            1e-3 * phi * (-x * x).exp()
        })
        .unwrap();
        let err = solve_velocity_correction(&base, &g, 1.0).unwrap_err();
        assert!(matches!(err, Error::SupportLeak { .. }), "{err}");
    }

    #[test]
    fn amplitude_that_forces_negative_density_is_infeasible() {
        let base = packet_base(32);
        let spec = PerturbationSpec {
            amplitude: 10.0,
            ..PerturbationSpec::default()
        };
        let err = build_perturbation(&spec, &base).unwrap_err();
        assert!(matches!(err, Error::AmplitudeInfeasible(_)));
        assert!(err.to_string().contains("amplitude"));
    }

    #[test]
    fn near_critical_amplitude_is_scaled_into_the_margin() {
        let base = packet_base(32);
        let probe = PerturbationSpec {
            amplitude: 1e-3,
            ..PerturbationSpec::default()
        };
        let g = make_perturbation(&probe, &base).unwrap();
        let worst = g
            .values()
            .iter()
            .zip(base.rho().values())
            .map(|(g, r)| g.abs() / r)
            .fold(0.0, f64::max);
        // the largest amplitude that still keeps ρ - |g| positive
        let critical = probe.amplitude / worst * (1.0 - 1e-12);
        let spec = PerturbationSpec {
            amplitude: critical,
            ..probe
        };
        let p = build_perturbation(&spec, &base).unwrap();
        assert!(p.rescale < 1.0);
        let (a, b) = spec.space_support;
        let xs = base.grid().xs();
        let floor = (0..base.grid().n_times())
            .flat_map(|j| {
                let rho = base.rho().slice(j);
                xs.iter().zip(rho).filter(|(x, _)| **x >= a && **x <= b).map(|(_, r)| *r).collect::<Vec<_>>()
            })
            .fold(f64::INFINITY, f64::min);
        for j in 0..base.grid().n_times() {
            for (k, &x) in xs.iter().enumerate() {
                if x >= a && x <= b {
                    let r = base.rho().slice(j)[k];
                    assert!(r - p.g.slice(j)[k].abs() >= 0.1 * floor * (1.0 - 1e-9));
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = packet_base(16);
        let bad = [
            PerturbationSpec {
                space_support: (-20.0, 6.0),
                ..PerturbationSpec::default()
            },
            PerturbationSpec {
                time_window: (0.0, 0.9),
                ..PerturbationSpec::default()
            },
            PerturbationSpec {
                modes: 0,
                ..PerturbationSpec::default()
            },
            PerturbationSpec {
                amplitude: -1.0,
                ..PerturbationSpec::default()
            },
        ];
        for spec in bad {
            assert!(matches!(make_perturbation(&spec, &base), Err(Error::InvalidParameter { .. })));
        }
    }

    #[test]
    fn empty_spec_list_passes_vacuously() {
        let rep = verify_theorem1(&packet_base(16), &[]).unwrap();
        assert!(rep.all_pass);
        assert!(rep.specs.is_empty());
    }

    #[test]
    fn theorem_check_requires_a_schrodinger_base() {
        let grid = GridSpec::default().with_n_t(16);
        let spec = GaussianPacketSpec::default();
        let c = FluidCouple::from_fns(grid, |x, t| spec.density(x, t), |x, t| spec.velocity(x, t), Provenance::Synthetic)
            .unwrap();
        assert!(matches!(verify_theorem1(&c, &[]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn failed_construction_is_not_a_violation() {
        let spec = PerturbationSpec {
            modes: 0,
            ..PerturbationSpec::default()
        };
        let rep = verify_theorem1(&packet_base(16), &[spec]).unwrap();
        assert_eq!(rep.specs[0].verdict, Verdict::FailedToConstruct);
        assert!(rep.specs[0].error.is_some());
        assert!(!rep.all_pass);
    }

    #[test]
    fn window_peaks_at_one_and_vanishes_outside() {
        assert_eq!(window(0.5, (0.1, 0.9)), 1.0);
        assert_eq!(window(0.1, (0.1, 0.9)), 0.0);
        assert_eq!(window(0.95, (0.1, 0.9)), 0.0);
        assert!(window(0.105, (0.1, 0.9)) < 1e-15);
    }
}
