//! Ensembles of Nelson diffusions `dq = b(q, t) dt + dW` on `[0, 1]` and
//! Monte-Carlo estimators of the discrete action `F_n`, its renormalized
//! limit, and the drift functional `𝔼∫(b² + ∂_x b) dt`.
//!
//! Every trajectory owns a ChaCha8 stream selected by its index, so an
//! ensemble is a pure function of `(seed, parameters)` no matter how rayon
//! schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::madelung::{interpolate, DriftField};

/// Euler–Maruyama steps per partition interval unless stated otherwise.
pub const DEFAULT_SUBSTEPS: usize = 4;

/// Trajectories escaping the box by more than this fraction of its length
/// abort the simulation.
const ESCAPE_MARGIN: f64 = 0.2;

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    #[serde(rename = "N")]
    pub n_samples: usize,
}

impl MCEstimate {
    /// Sample mean and `s / √N` with the unbiased sample deviation `s`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return MCEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n_samples: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MCEstimate {
            mean,
            std_error,
            n_samples: n,
        }
    }

    pub fn shifted(self, by: f64) -> Self {
        MCEstimate {
            mean: self.mean + by,
            ..self
        }
    }
}

/// `√(Σ σ_i²)` for independent estimates.
pub fn combined_std_error(estimates: &[MCEstimate]) -> f64 {
    estimates.iter().map(|e| e.std_error * e.std_error).sum::<f64>().sqrt()
}

/// Positions at the partition nodes `t_i = i / n` of every trajectory,
/// together with the Brownian increment accumulated over each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    paths: Vec<f64>,
    noise: Vec<f64>,
    n: usize,
    n_paths: usize,
    pub substeps: usize,
    pub seed: u64,
    pub drift_id: String,
}

/// What gets written to JSON for an ensemble (full paths go to the binary
/// array format instead).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    #[serde(rename = "N")]
    pub n_paths: usize,
    pub n: usize,
    pub substeps: usize,
    pub seed: u64,
    pub drift_id: String,
    pub final_mean: f64,
    pub final_variance: f64,
}

impl Ensemble {
    /// Partition size `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// The `n + 1` node positions of trajectory `i`.
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.n + 1;
        &self.paths[i * w..(i + 1) * w]
    }

    /// The `n` interval Brownian increments of trajectory `i`.
    pub fn noise(&self, i: usize) -> &[f64] {
        &self.noise[i * self.n..(i + 1) * self.n]
    }

    pub fn paths(&self) -> &[f64] {
        &self.paths
    }

    /// Positions of every trajectory at node `i`.
    pub fn positions_at(&self, node: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.path(p)[node]).collect()
    }

    pub fn summary(&self) -> EnsembleSummary {
        let last = self.positions_at(self.n);
        let m = last.iter().sum::<f64>() / last.len() as f64;
        let var = last.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / last.len() as f64;
        EnsembleSummary {
            n_paths: self.n_paths,
            n: self.n,
            substeps: self.substeps,
            seed: self.seed,
            drift_id: self.drift_id.clone(),
            final_mean: m,
            final_variance: var,
        }
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Inverse-CDF sampler for a density sampled on the grid: the cumulative
/// trapezoid rule over the nodes (closing the period at `x_max`) inverted by
/// linear interpolation.
struct InverseCdf {
    x_min: f64,
    dx: f64,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(grid: &GridSpec, rho0: &[f64]) -> Result<Self> {
        if rho0.len() != grid.n_x {
            return Err(Error::ShapeMismatch {
                expected: grid.n_x,
                actual: rho0.len(),
            });
        }
        if rho0.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidDensity("initial density must be finite and nonnegative".into()));
        }
        let dx = grid.dx();
        let mut cdf = Vec::with_capacity(grid.n_x + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..grid.n_x {
            let next = rho0[(k + 1) % grid.n_x];
            acc += 0.5 * dx * (rho0[k] + next);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::InvalidDensity("initial density has zero mass".into()));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(InverseCdf {
            x_min: grid.x_min,
            dx,
            cdf,
        })
    }

    fn sample(&self, u: f64) -> f64 {
        // first node with cdf > u; flat stretches are skipped automatically
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (lo, hi) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
        self.x_min + self.dx * ((i - 1) as f64 + frac)
    }
}

/// `N` i.i.d. draws from `rho0`; draw `i` uses the stream of trajectory `i`,
/// so these are exactly the starting points of an ensemble with the same
/// seed.
pub fn sample_initial(grid: &GridSpec, rho0: &[f64], n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let inv = InverseCdf::new(grid, rho0)?;
    Ok((0..n_paths)
        .into_par_iter()
        .map(|i| inv.sample(path_rng(seed, i).random::<f64>()))
        .collect())
}

fn check_run(grid: &GridSpec, n_paths: usize, n: usize, substeps: usize) -> Result<()> {
    grid.require_1d()?;
    if n_paths == 0 {
        return Err(Error::invalid("N", "at least one trajectory is required"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "partition must have at least one interval"));
    }
    if substeps == 0 {
        return Err(Error::invalid("substeps", "must be at least 1"));
    }
    Ok(())
}

/// Mixture weights after validation: nonnegative and summing to one.
fn check_weights(weights: &[f64], count: usize) -> Result<()> {
    if weights.len() != count || count == 0 {
        return Err(Error::invalid("weights", "one weight per drift is required"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights", "weights must be nonnegative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("weights", format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Euler–Maruyama ensemble driven by `b` from `X₀ ~ rho0`.
///
/// Each partition interval `[i/n, (i+1)/n]` is split into `substeps` steps
/// of variance `1 / (n · substeps)`; the drift is read from the time slice
/// at or before the step's start.
pub fn simulate_ensemble(
    b: &DriftField,
    rho0: &[f64],
    n_paths: usize,
    n: usize,
    substeps: usize,
    seed: u64,
) -> Result<Ensemble> {
    mixture_ensemble(std::slice::from_ref(b), &[1.0], rho0, n_paths, n, substeps, seed)
        .map(|mut e| {
            e.drift_id = b.label.clone();
            e
        })
}

/// Ensemble of the mixed process `q^β` with `β_t = Σ α_i b_i(q^{b_i}_t, t)`.
///
/// All component processes `q^{b_i}` and `q^β` share one initial point and
/// one Brownian path per trajectory. With a single drift of weight one the
/// component and the mixture coincide, so this is also the plain simulator.
pub fn mixture_ensemble(
    drifts: &[DriftField],
    weights: &[f64],
    rho0: &[f64],
    n_paths: usize,
    n: usize,
    substeps: usize,
    seed: u64,
) -> Result<Ensemble> {
    check_weights(weights, drifts.len())?;
    let grid = *drifts[0].grid();
    if drifts.iter().any(|d| *d.grid() != grid) {
        return Err(Error::invalid("drifts", "all drifts must share one grid"));
    }
    check_run(&grid, n_paths, n, substeps)?;
    let inv = InverseCdf::new(&grid, rho0)?;

    let h = 1.0 / (n * substeps) as f64;
    let sqrt_h = h.sqrt();
    let lo = grid.x_min - ESCAPE_MARGIN * grid.length();
    let hi = grid.x_max + ESCAPE_MARGIN * grid.length();
    // the frozen-time slice read by each Euler step
    let slices: Vec<usize> = (0..n * substeps)
        .map(|s| grid.time_index_at_or_before(s as f64 * h))
        .collect();

    let mut paths = vec![0.0; n_paths * (n + 1)];
    let mut noise = vec![0.0; n_paths * n];
    let outcomes: Vec<Result<()>> = paths
        .par_chunks_mut(n + 1)
        .zip(noise.par_chunks_mut(n))
        .enumerate()
        .map(|(p, (path, inc))| {
            let mut rng = path_rng(seed, p);
            let x0 = inv.sample(rng.random::<f64>());
            let mut comps = vec![x0; drifts.len()];
            let mut q = x0;
            path[0] = q;
            for i in 0..n {
                let mut w_sum = 0.0;
                for k in 0..substeps {
                    let step = i * substeps + k;
                    let j = slices[step];
                    let dw = sqrt_h * rng.sample::<f64, _>(StandardNormal);
                    let mut beta = 0.0;
                    for ((c, d), a) in comps.iter_mut().zip(drifts).zip(weights) {
                        let bc = d.eval(*c, j);
                        beta += a * bc;
                        *c += bc * h + dw;
                    }
                    q += beta * h + dw;
                    w_sum += dw;
                }
                if !(q.is_finite() && q > lo && q < hi) || comps.iter().any(|c| !(c.is_finite() && *c > lo && *c < hi)) {
                    return Err(Error::Diverged {
                        path: p,
                        time: (i + 1) as f64 / n as f64,
                        position: q,
                    });
                }
                path[i + 1] = q;
                inc[i] = w_sum;
            }
            Ok(())
        })
        .collect();
    outcomes.into_iter().collect::<Result<Vec<()>>>()?;

    let drift_id = if drifts.len() == 1 {
        drifts[0].label.clone()
    } else {
        let parts: Vec<String> = drifts
            .iter()
            .zip(weights)
            .map(|(d, a)| format!("{a}*{}", d.label))
            .collect();
        format!("mixture[{}]", parts.join(" + "))
    };
    Ok(Ensemble {
        paths,
        noise,
        n,
        n_paths,
        substeps,
        seed,
        drift_id,
    })
}

/// Per-trajectory values `n Σ_i (Δq_i)²`, in path order. Differences of
/// these between ensembles sharing a seed give common-random-number
/// comparisons.
pub fn discrete_action_samples(ens: &Ensemble) -> Vec<f64> {
    let n = ens.n as f64;
    (0..ens.n_paths)
        .into_par_iter()
        .map(|p| {
            let path = ens.path(p);
            n * path.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>()
        })
        .collect()
}

/// `F_n = n · 𝔼 Σ_i (Δq_i)²` with the path-level standard error.
pub fn discrete_action(ens: &Ensemble) -> MCEstimate {
    MCEstimate::from_samples(&discrete_action_samples(ens))
}

/// `F_n - n d`, which tends to `𝔼∫(b² + ∂_x b) dt` as `n → ∞`.
pub fn renormalized_action(ens: &Ensemble) -> MCEstimate {
    // trajectories are one-dimensional
    discrete_action(ens).shifted(-(ens.n as f64))
}

/// `𝔼∫₀¹ (b² + ∂_x b)(q_t, t) dt` along the ensemble, by the trapezoid rule
/// over the partition nodes. `div_b` is the divergence of `b` on the drift's
/// grid (see [`crate::madelung::drift_divergence`]).
pub fn estimate_i(ens: &Ensemble, b: &DriftField, div_b: &ScalarField) -> Result<MCEstimate> {
    let grid = *b.grid();
    if *div_b.grid() != grid {
        return Err(Error::invalid("div_b", "divergence and drift grids differ"));
    }
    let n = ens.n;
    let nodes: Vec<usize> = (0..=n)
        .map(|i| grid.time_index_at_or_before(i as f64 / n as f64))
        .collect();
    let samples: Vec<f64> = (0..ens.n_paths)
        .into_par_iter()
        .map(|p| {
            let path = ens.path(p);
            let f: Vec<f64> = path
                .iter()
                .zip(&nodes)
                .map(|(&x, &j)| {
                    let bx = b.eval(x, j);
                    bx * bx + interpolate(&grid, div_b.slice(j), x)
                })
                .collect();
            let inner: f64 = f[1..n].iter().sum();
            (inner + 0.5 * (f[0] + f[n])) / n as f64
        })
        .collect();
    Ok(MCEstimate::from_samples(&samples))
}

/// Density histogram of the ensemble at partition node `node`, with one bin
/// of width `dx` centred on every grid point. The box is periodic, so the
/// bin at `x_min` also collects points near `x_max`; points outside the box
/// are wrapped.
pub fn histogram(ens: &Ensemble, node: usize, grid: &GridSpec) -> Vec<f64> {
    let dx = grid.dx();
    let n_x = grid.n_x as isize;
    let mut counts = vec![0usize; grid.n_x];
    for p in 0..ens.n_paths {
        let s = ((ens.path(p)[node] - grid.x_min) / dx).round() as isize;
        counts[s.rem_euclid(n_x) as usize] += 1;
    }
    let scale = 1.0 / (ens.n_paths as f64 * dx);
    counts.into_iter().map(|c| c as f64 * scale).collect()
}

/// `Σ_k |h_k - ρ_k| dx` between the node histogram and a density slice.
pub fn marginal_l1(ens: &Ensemble, node: usize, grid: &GridSpec, rho: &[f64]) -> Result<f64> {
    if rho.len() != grid.n_x {
        return Err(Error::ShapeMismatch {
            expected: grid.n_x,
            actual: rho.len(),
        });
    }
    if node > ens.n {
        return Err(Error::invalid("node", format!("{node} > n = {}", ens.n)));
    }
    let h = histogram(ens, node, grid);
    Ok(h.iter().zip(rho).map(|(h, r)| (h - r).abs()).sum::<f64>() * grid.dx())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VectorField;
    use std::f64::consts::PI;

    fn normal(x: f64, var: f64) -> f64 {
        (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
    }

    fn standard_rho0(grid: &GridSpec) -> Vec<f64> {
        grid.xs().iter().map(|&x| normal(x, 1.0)).collect()
    }

    #[test]
    fn initial_samples_have_normal_moments() {
        let grid = GridSpec::default();
        let n = 100_000;
        let xs = sample_initial(&grid, &standard_rho0(&grid), n, 7).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn narrow_bump_samples_stay_in_support() {
        let grid = GridSpec::default();
        let dx = grid.dx();
        // nonzero only on the three nodes around x = 1
        let c = ((1.0 - grid.x_min) / dx).round() as usize;
        let mut rho = vec![0.0; grid.n_x];
        rho[c - 1] = 0.25 / dx;
        rho[c] = 0.5 / dx;
        rho[c + 1] = 0.25 / dx;
        let xs = sample_initial(&grid, &rho, 10_000, 3).unwrap();
        let (a, b) = (grid.x(c - 2), grid.x(c + 2));
        assert!(xs.iter().all(|&x| x >= a && x <= b));
    }

    #[test]
    fn same_seed_same_samples() {
        let grid = GridSpec::default();
        let rho = standard_rho0(&grid);
        assert_eq!(
            sample_initial(&grid, &rho, 1000, 11).unwrap(),
            sample_initial(&grid, &rho, 1000, 11).unwrap()
        );
        assert_ne!(
            sample_initial(&grid, &rho, 1000, 11).unwrap(),
            sample_initial(&grid, &rho, 1000, 12).unwrap()
        );
    }

    #[test]
    fn brownian_motion_from_origin_has_unit_variance() {
        let grid = GridSpec::default();
        let mut rho = vec![0.0; grid.n_x];
        rho[grid.n_x / 2] = 1.0 / grid.dx();
        // the linear inverse CDF spreads a single node over [-dx, dx]
        let b = DriftField::constant(grid, 0.0).unwrap();
        let ens = simulate_ensemble(&b, &rho, 50_000, 32, 2, 5).unwrap();
        let s = ens.summary();
        let spread = grid.dx() * grid.dx() / 3.0;
        let tol = 4.0 * (2.0f64 / 50_000.0).sqrt();
        assert!((s.final_variance - 1.0 - spread).abs() < tol, "{}", s.final_variance);
    }

    #[test]
    fn zero_drift_discrete_action_is_nd() {
        let grid = GridSpec::default();
        let b = DriftField::constant(grid, 0.0).unwrap();
        let ens = simulate_ensemble(&b, &standard_rho0(&grid), 20_000, 16, 1, 9).unwrap();
        let f = discrete_action(&ens);
        assert!((f.mean - 16.0).abs() < 4.0 * f.std_error, "{f:?}");
        let r = renormalized_action(&ens);
        assert!(r.mean.abs() < 4.0 * r.std_error);
        assert_eq!(r.std_error, f.std_error);
    }

    #[test]
    fn constant_drift_renormalizes_to_c_squared() {
        let grid = GridSpec::default();
        let b = DriftField::constant(grid, 3.0).unwrap();
        let rho0: Vec<f64> = grid.xs().iter().map(|&x| normal(x + 4.0, 1.0)).collect();
        let ens = simulate_ensemble(&b, &rho0, 20_000, 64, 1, 13).unwrap();
        let r = renormalized_action(&ens);
        assert!((r.mean - 9.0).abs() < 4.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn std_error_halves_when_n_quadruples() {
        let grid = GridSpec::default();
        let b = DriftField::constant(grid, 0.0).unwrap();
        let rho0 = standard_rho0(&grid);
        let small = discrete_action(&simulate_ensemble(&b, &rho0, 10_000, 16, 1, 1).unwrap());
        let big = discrete_action(&simulate_ensemble(&b, &rho0, 40_000, 16, 1, 1).unwrap());
        let ratio = small.std_error / big.std_error;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
        let double = discrete_action(&simulate_ensemble(&b, &rho0, 20_000, 16, 1, 1).unwrap());
        let r2 = small.std_error / double.std_error;
        assert!((r2 - 2f64.sqrt()).abs() < 0.2 * 2f64.sqrt(), "{r2}");
    }

    #[test]
    fn estimate_i_of_constant_drift_is_exact() {
        let grid = GridSpec::default();
        let rho0 = standard_rho0(&grid);
        for &c in &[0.0, 1.5] {
            let b = DriftField::constant(grid, c).unwrap();
            let div = ScalarField::from_fn(grid, |_, _| 0.0).unwrap();
            let ens = simulate_ensemble(&b, &rho0, 2_000, 32, 1, 2).unwrap();
            let est = estimate_i(&ens, &b, &div).unwrap();
            if c == 0.0 {
                assert_eq!(est.mean, 0.0);
            }
            assert!((est.mean - c * c).abs() < 1e-10);
        }
    }

    #[test]
    fn ensembles_are_reproducible_across_thread_counts() {
        let grid = GridSpec::default();
        let b = DriftField::new(
            VectorField::from_fn(grid, |x, t| -0.5 * x + 0.1 * t).unwrap(),
            "linear",
        )
        .unwrap();
        let rho0 = standard_rho0(&grid);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&b, &rho0, 3_000, 32, 4, 21).unwrap())
        };
        let a = run(1);
        let c = run(3);
        assert_eq!(a, c);
        assert_eq!(discrete_action(&a).mean.to_bits(), discrete_action(&c).mean.to_bits());
    }

    #[test]
    fn single_component_mixture_is_the_plain_ensemble() {
        let grid = GridSpec::default();
        let b = DriftField::new(VectorField::from_fn(grid, |x, _| -0.3 * x).unwrap(), "ou").unwrap();
        let rho0 = standard_rho0(&grid);
        let plain = simulate_ensemble(&b, &rho0, 2_000, 32, 4, 8).unwrap();
        let mix = mixture_ensemble(std::slice::from_ref(&b), &[1.0], &rho0, 2_000, 32, 4, 8).unwrap();
        assert_eq!(plain.paths(), mix.paths());

        let twin = mixture_ensemble(&[b.clone(), b.clone()], &[0.3, 0.7], &rho0, 2_000, 32, 4, 8).unwrap();
        let gap = plain
            .paths()
            .iter()
            .zip(twin.paths())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-12, "{gap}");
    }

    #[test]
    fn mixture_action_is_below_the_chord() {
        let grid = GridSpec::default();
        let rho0 = standard_rho0(&grid);
        let zero = DriftField::constant(grid, 0.0).unwrap();
        let three = DriftField::constant(grid, 3.0).unwrap();
        for &lambda in &[0.25, 0.5, 0.75] {
            let ens = mixture_ensemble(
                &[zero.clone(), three.clone()],
                &[lambda, 1.0 - lambda],
                &rho0,
                20_000,
                64,
                1,
                4,
            )
            .unwrap();
            let r = renormalized_action(&ens);
            assert!(r.mean <= (1.0 - lambda) * 9.0 + 4.0 * r.std_error, "{lambda}: {r:?}");
        }
    }

    #[test]
    fn bad_weights_are_rejected() {
        let grid = GridSpec::default();
        let rho0 = standard_rho0(&grid);
        let b = DriftField::constant(grid, 0.0).unwrap();
        for w in [vec![0.5, 0.6], vec![-0.5, 1.5], vec![1.0]] {
            assert!(mixture_ensemble(&[b.clone(), b.clone()], &w, &rho0, 10, 4, 1, 0).is_err());
        }
    }

    #[test]
    fn runaway_drift_diverges() {
        let grid = GridSpec::default();
        let b = DriftField::constant(grid, 100.0).unwrap();
        let err = simulate_ensemble(&b, &standard_rho0(&grid), 10, 16, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn histogram_integrates_to_one() {
        let grid = GridSpec::default();
        let b = DriftField::constant(grid, 0.0).unwrap();
        let ens = simulate_ensemble(&b, &standard_rho0(&grid), 5_000, 8, 1, 6).unwrap();
        let h = histogram(&ens, 8, &grid);
        assert!((h.iter().sum::<f64>() * grid.dx() - 1.0).abs() < 1e-12);
    }
}
