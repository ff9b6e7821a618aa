//! The named experiments and the stages they are built from.
//!
//! Each stage runs one group of computations, returns a serializable
//! record of every number it produced, and the [`Check`]s derived from
//! them. Experiments concatenate stages and collect CSV/binary artifacts.

use serde::Serialize;
use serde_json::Value;

use madelung_core::action_functionals::{classical_action, drift_action, quantum_action, ActionReport};
use madelung_core::benamou_brenier::{
    displacement_couple, euler_residual, gaussian_w2, monge_map_1d, quantum_force_sup, quantum_vs_classical,
    EulerResidual, GaussianMeasure, QuantumClassicalReport,
};
use madelung_core::competitors::{check_families, verify_theorem1, PerturbationSpec, Theorem1Report, Verdict};
use madelung_core::grid::trapezoid_periodic;
use madelung_core::io;
use madelung_core::madelung::{decompose, drift, drift_divergence, madelung_residuals, Decomposition, MadelungResiduals};
use madelung_core::nelson_sde::{
    combined_std_error, discrete_action_samples, estimate_i, histogram, marginal_l1,
    mixture_ensemble, renormalized_action, simulate_ensemble, EnsembleSummary, MCEstimate,
};
use madelung_core::schrodinger::{free_propagate, gaussian_packet};
use madelung_core::{DriftField, FluidCouple, GaussianPacketSpec, GridSpec, Provenance, ScalarField, WaveField};

use crate::config::{ExperimentConfig, ExperimentKind, McConfig};
use crate::criteria::{self, mc_agree, second_order, Check};
use crate::error::{CliError, Result};

/// Constant drift whose renormalized action must come out as its square.
pub const CONTROL_DRIFT: f64 = 3.0;

/// A file produced by an experiment, relative to the output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Value,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Attaches the experiment name to core errors.
pub(crate) fn ctx(experiment: &'static str) -> impl Fn(madelung_core::Error) -> CliError {
    move |source| CliError::Experiment { experiment, source }
}

fn csv_artifact(
    name: &str,
    write: impl FnOnce(&mut Vec<u8>) -> madelung_core::Result<()>,
) -> madelung_core::Result<Artifact> {
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(Artifact {
        name: name.to_string(),
        bytes,
    })
}

/// `A^Q` and the classical action `A` of the free packet over `[0, 1]`.
///
/// With `a = 2σ₀²` the kinetic and Fisher integrands are
/// `p² + t² / (2a(a² + t²))` and `a / (2(a² + t²))`, whose time integrals
/// are elementary.
pub fn packet_actions_closed_form(packet: &GaussianPacketSpec) -> (f64, f64) {
    let a = 2.0 * packet.sigma0 * packet.sigma0;
    let base = packet.p * packet.p + 0.5 / a;
    let atan = (1.0 / a).atan();
    (base - atan, base - 0.5 * atan)
}

// ---------------------------------------------------------------------------
// propagation and Madelung residuals

#[derive(Debug, Clone, Serialize)]
pub struct PropagationReport {
    pub second_moment_t1: f64,
    pub expected_second_moment_t1: f64,
    pub max_norm_drift: f64,
}

/// Spectral propagation of the closed-form initial packet to every node.
pub fn propagation(grid: &GridSpec, packet: &GaussianPacketSpec) -> Result<(WaveField, PropagationReport, Vec<Check>)> {
    let e = ctx("propagation");
    let initial = gaussian_packet(packet, &grid.with_n_t(2)).map_err(&e)?;
    let psi = free_propagate(initial.slice(0), grid).map_err(&e)?;
    let mean = packet.mean_at(1.0);
    let rho1 = psi.density_slice(grid.n_t);
    let weighted: Vec<f64> = grid
        .xs()
        .iter()
        .zip(&rho1)
        .map(|(x, r)| (x - mean) * (x - mean) * r)
        .collect();
    let report = PropagationReport {
        second_moment_t1: trapezoid_periodic(grid, &weighted),
        expected_second_moment_t1: packet.variance_at(1.0),
        max_norm_drift: psi.max_norm_drift(),
    };
    let gap = (report.second_moment_t1 - report.expected_second_moment_t1).abs();
    let checks = vec![
        Check::new(
            "second-moment-at-t1",
            gap <= criteria::SECOND_MOMENT_TOL,
            format!(
                "|{} - {}| = {gap:e} (tol {:e})",
                report.second_moment_t1,
                report.expected_second_moment_t1,
                criteria::SECOND_MOMENT_TOL
            ),
        ),
        Check::new(
            "norm-drift",
            report.max_norm_drift <= criteria::NORM_DRIFT_TOL,
            format!("{:e} (tol {:e})", report.max_norm_drift, criteria::NORM_DRIFT_TOL),
        ),
    ];
    Ok((psi, report, checks))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualOrders {
    pub n_t_fine: usize,
    pub fine: MadelungResiduals,
    pub coarse: MadelungResiduals,
    pub continuity_ratio: f64,
    pub hamilton_jacobi_ratio: f64,
}

/// Madelung residuals on the grid and on every other time node.
pub fn residual_orders(psi: &WaveField) -> Result<(Decomposition, ResidualOrders, Vec<Check>)> {
    let e = ctx("madelung residuals");
    let dec = decompose(psi).map_err(&e)?;
    let fine = madelung_residuals(&dec.rho, &dec.phase).map_err(&e)?;
    let (rho_c, phase_c) = dec
        .rho
        .time_subsampled(2)
        .zip(dec.phase.time_subsampled(2))
        .ok_or_else(|| CliError::config("grid.n_t", "must be even to compare against half the time resolution"))?;
    let coarse = madelung_residuals(&rho_c, &phase_c).map_err(&e)?;
    let report = ResidualOrders {
        n_t_fine: psi.grid().n_t,
        continuity_ratio: coarse.continuity / fine.continuity,
        hamilton_jacobi_ratio: coarse.hamilton_jacobi / fine.hamilton_jacobi,
        fine,
        coarse,
    };
    let checks = vec![
        Check::new(
            "continuity-residual-order",
            second_order(report.continuity_ratio),
            format!(
                "{:e} -> {:e}, ratio {}",
                coarse.continuity, fine.continuity, report.continuity_ratio
            ),
        ),
        Check::new(
            "hamilton-jacobi-residual-order",
            second_order(report.hamilton_jacobi_ratio),
            format!(
                "{:e} -> {:e}, ratio {}",
                coarse.hamilton_jacobi, fine.hamilton_jacobi, report.hamilton_jacobi_ratio
            ),
        ),
    ];
    Ok((dec, report, checks))
}

// ---------------------------------------------------------------------------
// deterministic functionals

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub label: String,
    pub quantum_action: ActionReport,
    pub drift_action: ActionReport,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub quantum_action: ActionReport,
    pub classical_action: ActionReport,
    pub closed_form_quantum: f64,
    pub closed_form_classical: f64,
    pub identity: Vec<IdentityRow>,
}

fn normalized_slices(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> madelung_core::Result<ScalarField> {
    let xs = grid.xs();
    let slices = (0..grid.n_times())
        .map(|j| {
            let t = grid.t(j);
            let raw: Vec<f64> = xs.iter().map(|&x| f(x, t)).collect();
            let mass = trapezoid_periodic(&grid, &raw);
            raw.into_iter().map(|r| r / mass).collect()
        })
        .collect();
    ScalarField::from_slices(grid, slices)
}

fn gauss(x: f64, mean: f64, var: f64) -> f64 {
    (-0.5 * (x - mean) * (x - mean) / var).exp()
}

/// Five smooth positive couples that are not Schrödinger-derived; most do
/// not even satisfy the continuity equation. The identity between the two
/// action quadratures holds slice by slice regardless.
pub fn synthetic_couples(grid: &GridSpec) -> madelung_core::Result<Vec<(String, FluidCouple)>> {
    type Recipe = (&'static str, fn(f64, f64) -> f64, fn(f64, f64) -> f64);
    let recipes: [Recipe; 5] = [
        ("static-gaussian", |x, _| gauss(x, 0.0, 1.0), |_, _| 0.0),
        ("translating-gaussian", |x, t| gauss(x, t, 1.0 + 0.25 * t * t), |_, _| 1.0),
        (
            "bimodal-shear",
            |x, t| 0.5 * gauss(x, -1.5 + 0.5 * t, 0.6) + 0.5 * gauss(x, 1.5, 0.8),
            |x, t| 0.3 * x.sin() * (1.0 + t),
        ),
        (
            "rippled-drifting",
            |x, t| {
                let y = x - 0.5 * t;
                (-0.5 * y * y / (1.0 + 0.3 * t) + 0.5 * y.sin()).exp()
            },
            |x, t| 0.2 + 0.1 * x * t,
        ),
        (
            "breathing",
            |x, t| gauss(x, 0.0, 1.0 + 0.5 * (std::f64::consts::PI * t).sin()),
            |x, t| 0.5 * x * (std::f64::consts::PI * t).cos(),
        ),
    ];
    recipes
        .iter()
        .map(|&(label, rho, v)| {
            let rho = normalized_slices(*grid, rho)?;
            let v = madelung_core::VectorField::from_fn(*grid, v)?;
            Ok((label.to_string(), FluidCouple::new(rho, v, Provenance::Synthetic)?))
        })
        .collect()
}

fn identity_row(label: &str, couple: &FluidCouple) -> madelung_core::Result<IdentityRow> {
    let q = quantum_action(couple)?;
    let b = drift(couple)?;
    let d = drift_action(&b, couple.rho())?;
    Ok(IdentityRow {
        label: label.to_string(),
        gap: (q.value - d.value).abs(),
        quantum_action: q,
        drift_action: d,
    })
}

/// Quantum and classical actions of the packet couple, and the agreement
/// of `A^Q` with the drift form on it and on [`synthetic_couples`].
pub fn functionals(couple: &FluidCouple, packet: &GaussianPacketSpec) -> Result<(FunctionalReport, Vec<Check>)> {
    let e = ctx("action functionals");
    let q = quantum_action(couple).map_err(&e)?;
    let c = classical_action(couple).map_err(&e)?;
    let (cq, cc) = packet_actions_closed_form(packet);
    let mut identity = vec![identity_row("packet", couple).map_err(&e)?];
    for (label, s) in synthetic_couples(couple.grid()).map_err(&e)? {
        identity.push(identity_row(&label, &s).map_err(&e)?);
    }

    let mut checks = vec![Check::new(
        "quantum-action-closed-form",
        (q.value - cq).abs() <= criteria::CLOSED_FORM_TOL,
        format!("{} vs {cq} (radius {:e})", q.value, q.error_radius),
    )];
    let worst = identity.iter().map(|r| r.gap).fold(0.0, f64::max);
    checks.push(Check::new(
        "functional-identity",
        worst <= criteria::FUNCTIONAL_IDENTITY_TOL,
        format!(
            "max |A^Q - drift form| over {} couples = {worst:e} (tol {:e})",
            identity.len(),
            criteria::FUNCTIONAL_IDENTITY_TOL
        ),
    ));
    let report = FunctionalReport {
        quantum_action: q,
        classical_action: c,
        closed_form_quantum: cq,
        closed_form_classical: cc,
        identity,
    };
    Ok((report, checks))
}

// ---------------------------------------------------------------------------
// Monte Carlo

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub ensemble: EnsembleSummary,
    pub renormalized_action: MCEstimate,
    pub estimate_i: MCEstimate,
    pub quantum_action: ActionReport,
    pub zero_drift_control: MCEstimate,
    pub constant_drift: f64,
    pub constant_drift_control: MCEstimate,
}

/// Renormalized discrete action, the path estimate of `𝔼∫(b² + ∂_x b)`,
/// and the deterministic `A^Q`, plus two constant-drift controls. Returns
/// the final positions of the main ensemble for dumping.
pub fn renormalization_chain(couple: &FluidCouple, mc: &McConfig) -> Result<(ChainReport, Vec<f64>, Vec<Check>)> {
    let e = ctx("renormalization chain");
    let grid = *couple.grid();
    let rho0 = couple.rho().slice(0).to_vec();
    let q = quantum_action(couple).map_err(&e)?;
    let b = drift(couple).map_err(&e)?;
    let div = drift_divergence(&b, couple.rho()).map_err(&e)?;

    let (summary, renorm, est, finals) = {
        let ens = simulate_ensemble(&b, &rho0, mc.n_paths, mc.n, mc.substeps, mc.seed).map_err(&e)?;
        let est = estimate_i(&ens, &b, &div).map_err(&e)?;
        (ens.summary(), renormalized_action(&ens), est, ens.positions_at(mc.n))
    };
    let control = |c: f64, seed: u64| -> Result<MCEstimate> {
        let d = DriftField::constant(grid, c).map_err(&e)?;
        let ens = simulate_ensemble(&d, &rho0, mc.n_paths, mc.n, mc.substeps, seed).map_err(&e)?;
        Ok(renormalized_action(&ens))
    };
    let zero = control(0.0, mc.seed.wrapping_add(1))?;
    let constant = control(CONTROL_DRIFT, mc.seed.wrapping_add(2))?;

    let pair = |name: &str, a: &MCEstimate, b: f64, se: f64| {
        Check::new(
            name,
            mc_agree(a.mean, b, se, q.value),
            format!(
                "{} vs {b}: gap {:e}, band max({} se = {:e}, {} |A^Q| = {:e})",
                a.mean,
                (a.mean - b).abs(),
                criteria::MC_SIGMAS,
                criteria::MC_SIGMAS * se,
                criteria::MC_RELATIVE,
                criteria::MC_RELATIVE * q.value.abs()
            ),
        )
    };
    let target = CONTROL_DRIFT * CONTROL_DRIFT;
    let checks = vec![
        pair("renormalized-vs-quantum-action", &renorm, q.value, renorm.std_error),
        pair("estimate-i-vs-quantum-action", &est, q.value, est.std_error),
        pair(
            "renormalized-vs-estimate-i",
            &renorm,
            est.mean,
            combined_std_error(&[renorm, est]),
        ),
        Check::new(
            "zero-drift-control",
            zero.mean.abs() <= criteria::MC_SIGMAS * zero.std_error,
            format!("{} ± {}", zero.mean, zero.std_error),
        ),
        Check::new(
            "constant-drift-control",
            (constant.mean - target).abs() <= criteria::MC_SIGMAS * constant.std_error,
            format!("{} ± {} vs {target}", constant.mean, constant.std_error),
        ),
    ];
    let report = ChainReport {
        ensemble: summary,
        renormalized_action: renorm,
        estimate_i: est,
        quantum_action: q,
        zero_drift_control: zero,
        constant_drift: CONTROL_DRIFT,
        constant_drift_control: constant,
    };
    Ok((report, finals, checks))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub renormalized_action: MCEstimate,
}

/// Renormalized action for every partition size in `mc.n_values`, all
/// with the same seed.
pub fn n_convergence(couple: &FluidCouple, mc: &McConfig) -> Result<(Vec<ConvergenceRow>, Vec<Check>)> {
    let e = ctx("convergence in n");
    let b = drift(couple).map_err(&e)?;
    let rho0 = couple.rho().slice(0).to_vec();
    let rows: Vec<ConvergenceRow> = mc
        .n_values
        .iter()
        .map(|&n| {
            let ens = simulate_ensemble(&b, &rho0, mc.n_paths, n, mc.substeps, mc.seed).map_err(&e)?;
            Ok(ConvergenceRow {
                n,
                renormalized_action: renormalized_action(&ens),
            })
        })
        .collect::<Result<_>>()?;

    let converged: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.n >= criteria::CONVERGED_FROM_N).collect();
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    let mut passed = true;
    for (i, a) in converged.iter().enumerate() {
        for b in &converged[i + 1..] {
            let gap = (a.renormalized_action.mean - b.renormalized_action.mean).abs();
            let band = criteria::MC_SIGMAS * combined_std_error(&[a.renormalized_action, b.renormalized_action]);
            passed &= gap <= band;
            if worst.is_none_or(|w| gap / band > w.2 / w.3) {
                worst = Some((a.n, b.n, gap, band));
            }
        }
    }
    let detail = match worst {
        Some((na, nb, gap, band)) => format!("worst pair n = {na}, {nb}: gap {gap:e} vs band {band:e}"),
        None => format!("fewer than two sizes >= {} (vacuous)", criteria::CONVERGED_FROM_N),
    };
    Ok((rows, vec![Check::new("renormalized-action-converged-in-n", passed, detail)]))
}

#[derive(Debug, Clone, Serialize)]
pub struct MixtureRow {
    pub lambda: f64,
    pub mixture_action: MCEstimate,
    pub convex_combination: f64,
    /// Path-wise `F(mixture) - [λ F(b₁) + (1-λ) F(b₂)]` under common
    /// random numbers.
    pub excess: MCEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixtureReport {
    pub drifts: (f64, f64),
    pub first_action: MCEstimate,
    pub second_action: MCEstimate,
    pub rows: Vec<MixtureRow>,
}

/// Convexity of the discrete action on mixtures of the constant drifts
/// `0` and `mc.mixture_drift`, with shared initial points and noise.
pub fn mixture_convexity(grid: &GridSpec, rho0: &[f64], mc: &McConfig) -> Result<(MixtureReport, Vec<Check>)> {
    let e = ctx("mixture convexity");
    let drifts = [
        DriftField::constant(*grid, 0.0).map_err(&e)?,
        DriftField::constant(*grid, mc.mixture_drift).map_err(&e)?,
    ];
    let samples = |weights: &[f64]| -> Result<Vec<f64>> {
        let ens = mixture_ensemble(&drifts, weights, rho0, mc.n_paths, mc.n, mc.substeps, mc.seed).map_err(&e)?;
        Ok(discrete_action_samples(&ens))
    };
    let s1 = samples(&[1.0, 0.0])?;
    let s2 = samples(&[0.0, 1.0])?;
    let (f1, f2) = (MCEstimate::from_samples(&s1), MCEstimate::from_samples(&s2));

    let mut rows = Vec::new();
    for &lambda in &mc.mixture_lambdas {
        let mix = samples(&[lambda, 1.0 - lambda])?;
        let excess: Vec<f64> = mix
            .iter()
            .zip(s1.iter().zip(&s2))
            .map(|(m, (a, b))| m - (lambda * a + (1.0 - lambda) * b))
            .collect();
        rows.push(MixtureRow {
            lambda,
            mixture_action: MCEstimate::from_samples(&mix),
            convex_combination: lambda * f1.mean + (1.0 - lambda) * f2.mean,
            excess: MCEstimate::from_samples(&excess),
        });
    }
    let checks = rows
        .iter()
        .map(|r| {
            Check::new(
                format!("mixture-convexity-lambda-{}", r.lambda),
                r.excess.mean <= criteria::MC_SIGMAS * r.excess.std_error,
                format!(
                    "F(mix) = {}, convex combination {}, excess {} ± {}",
                    r.mixture_action.mean, r.convex_combination, r.excess.mean, r.excess.std_error
                ),
            )
        })
        .collect();
    let report = MixtureReport {
        drifts: (0.0, mc.mixture_drift),
        first_action: f1,
        second_action: f2,
        rows,
    };
    Ok((report, checks))
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalRow {
    pub t: f64,
    pub node: usize,
    pub l1: f64,
}

/// Histograms of the packet ensemble against `ρ(·, t)`. Also returns
/// `(t, histogram, ρ)` triples for dumping.
#[allow(clippy::type_complexity)]
pub fn marginals(
    couple: &FluidCouple,
    mc: &McConfig,
    times: &[f64],
) -> Result<(Vec<MarginalRow>, Vec<(f64, Vec<f64>, Vec<f64>)>, Vec<Check>)> {
    let e = ctx("marginals");
    let grid = *couple.grid();
    let b = drift(couple).map_err(&e)?;
    let rho0 = couple.rho().slice(0).to_vec();
    let ens = simulate_ensemble(&b, &rho0, mc.n_paths, mc.n, mc.substeps, mc.seed).map_err(&e)?;
    let mut rows = Vec::new();
    let mut dumps = Vec::new();
    for &t in times {
        let node = (t * mc.n as f64).round() as usize;
        let rho = couple.rho().slice((t * grid.n_t as f64).round() as usize);
        let l1 = marginal_l1(&ens, node, &grid, rho).map_err(&e)?;
        dumps.push((t, histogram(&ens, node, &grid), rho.to_vec()));
        rows.push(MarginalRow { t, node, l1 });
    }
    let checks = rows
        .iter()
        .map(|r| {
            Check::new(
                format!("marginal-l1-t-{}", r.t),
                r.l1 <= criteria::MARGINAL_L1_TOL,
                format!("{} (tol {})", r.l1, criteria::MARGINAL_L1_TOL),
            )
        })
        .collect();
    Ok((rows, dumps, checks))
}

// ---------------------------------------------------------------------------
// competitor families

fn acceptable(v: Verdict) -> bool {
    matches!(v, Verdict::Pass | Verdict::Inconclusive)
}

/// Stationarity, minimality and convexity along every family.
pub fn theorem1(couple: &FluidCouple, specs: &[PerturbationSpec]) -> Result<(Theorem1Report, Vec<Check>)> {
    let report = verify_theorem1(couple, specs).map_err(ctx("competitor families"))?;
    let count = |f: &dyn Fn(&madelung_core::competitors::SpecReport) -> bool| {
        report.specs.iter().filter(|s| f(s)).count()
    };
    let total = report.specs.len();
    let vacuous = if total == 0 { " (vacuous)" } else { "" };
    let mut checks = Vec::new();
    let ok = count(&|s| acceptable(s.minimal));
    checks.push(Check::new(
        "theorem1-minimality",
        ok == total,
        format!(
            "{ok}/{total} profiles stay above A^Q(0) - {} radii{vacuous}",
            criteria::THEOREM_VIOLATION_SIGMAS
        ),
    ));
    let ok = count(&|s| s.stationary);
    checks.push(Check::new(
        "theorem1-stationarity",
        ok == total,
        format!("{ok}/{total} centered derivatives shrink 4 ± 1 when h halves{vacuous}"),
    ));
    let ok = count(&|s| acceptable(s.convex));
    checks.push(Check::new(
        "theorem1-convexity",
        ok == total,
        format!(
            "{ok}/{total} second differences above -{} radii{vacuous}",
            criteria::THEOREM_VIOLATION_SIGMAS
        ),
    ));
    Ok((report, checks))
}

/// A translating Gaussian carried by a constant velocity while it spreads:
/// positive and normalized, but not a critical point.
pub fn negative_control_couple(grid: &GridSpec, packet: &GaussianPacketSpec) -> madelung_core::Result<FluidCouple> {
    let moving = GaussianPacketSpec {
        p: criteria::NEGATIVE_CONTROL_MOMENTUM,
        ..*packet
    };
    FluidCouple::from_fns(
        *grid,
        |x, t| moving.density(x, t),
        |_, _| criteria::NEGATIVE_CONTROL_MOMENTUM,
        Provenance::Synthetic,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativeControlReport {
    pub families: Theorem1Report,
    /// Largest `|D(0)| / radius` over the specs.
    pub max_derivative_significance: f64,
}

pub fn negative_control(
    grid: &GridSpec,
    packet: &GaussianPacketSpec,
    specs: &[PerturbationSpec],
) -> Result<(NegativeControlReport, Vec<Check>)> {
    let e = ctx("negative control");
    let base = negative_control_couple(grid, packet).map_err(&e)?;
    let families = check_families(&base, specs).map_err(&e)?;
    let significance = families
        .specs
        .iter()
        .filter_map(|s| s.derivatives.first())
        .map(|d| d.value.abs() / d.error_radius)
        .fold(0.0, f64::max);
    let check = Check::new(
        "negative-control-detected",
        significance > criteria::NEGATIVE_CONTROL_SIGMAS,
        format!(
            "max |D(0)| / radius = {significance} (needs > {})",
            criteria::NEGATIVE_CONTROL_SIGMAS
        ),
    );
    Ok((
        NegativeControlReport {
            families,
            max_derivative_significance: significance,
        },
        vec![check],
    ))
}

// ---------------------------------------------------------------------------
// optimal transport

#[derive(Debug, Clone, Serialize)]
pub struct W2Row {
    pub pair: [f64; 4],
    pub gaussian_w2: f64,
    pub monge_cost: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportReport {
    pub pairs: Vec<W2Row>,
    pub endpoints: [f64; 4],
    pub tau2: f64,
    pub displacement_action: ActionReport,
    pub quantum_vs_classical: QuantumClassicalReport,
    pub geodesic_euler_fine: EulerResidual,
    pub geodesic_euler_coarse: EulerResidual,
    pub geodesic_euler_ratio: f64,
    pub packet_euler_fine: EulerResidual,
    pub packet_euler_coarse: EulerResidual,
    pub quantum_force_sup: f64,
}

fn sampled(grid: &GridSpec, g: &GaussianMeasure) -> Vec<f64> {
    grid.xs().iter().map(|&x| g.density(x)).collect()
}

/// Closed-form `W₂²` against Monge maps, the displacement interpolation of
/// the packet endpoints, and Euler residuals of the geodesic and the packet.
/// Also returns the packet's endpoint Monge map and the geodesic couple.
pub fn transport(
    couple: &FluidCouple,
    packet: &GaussianPacketSpec,
    pairs: &[(GaussianMeasure, GaussianMeasure)],
) -> Result<(TransportReport, Vec<Artifact>, Vec<Check>)> {
    let e = ctx("transport");
    let grid = *couple.grid();
    let mut checks = Vec::new();

    let rows: Vec<W2Row> = pairs
        .iter()
        .map(|(g0, g1)| {
            let plan = monge_map_1d(&grid, &sampled(&grid, g0), &sampled(&grid, g1)).map_err(&e)?;
            Ok(W2Row {
                pair: [g0.mean, g0.variance, g1.mean, g1.variance],
                gaussian_w2: gaussian_w2(g0, g1),
                monge_cost: plan.cost,
                monotone: plan.is_monotone(),
            })
        })
        .collect::<Result<_>>()?;
    let worst = rows
        .iter()
        .map(|r| (r.gaussian_w2 - r.monge_cost).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "w2-closed-form-vs-monge",
        worst <= criteria::W2_TOL && rows.iter().all(|r| r.monotone),
        format!("max gap {worst:e} over {} pairs (tol {:e})", rows.len(), criteria::W2_TOL),
    ));

    let g0 = GaussianMeasure::new(packet.mean_at(0.0), packet.variance_at(0.0)).map_err(&e)?;
    let g1 = GaussianMeasure::new(packet.mean_at(1.0), packet.variance_at(1.0)).map_err(&e)?;
    let tau2 = gaussian_w2(&g0, &g1);
    let geodesic = displacement_couple(&g0, &g1, &grid).map_err(&e)?;
    let displacement_action = classical_action(&geodesic).map_err(&e)?;
    let gap = (displacement_action.value - tau2).abs();
    checks.push(Check::new(
        "displacement-action-equals-tau2",
        gap <= criteria::DISPLACEMENT_ACTION_TOL,
        format!("{} vs {tau2}: gap {gap:e}", displacement_action.value),
    ));

    let qc = quantum_vs_classical(&g0, &g1, couple).map_err(&e)?;
    checks.push(Check::new(
        "tau2-below-schrodinger-classical-action",
        qc.tau2_below_classical,
        format!("{} <= {}", qc.tau2, qc.classical_schrodinger),
    ));

    let coarse_grid = grid.with_n_t(grid.n_t / 2);
    let geodesic_coarse = displacement_couple(&g0, &g1, &coarse_grid).map_err(&e)?;
    let ge_f = euler_residual(&geodesic).map_err(&e)?;
    let ge_c = euler_residual(&geodesic_coarse).map_err(&e)?;
    let ratio = ge_c.residual / ge_f.residual;
    checks.push(Check::new(
        "geodesic-euler-residual-order",
        second_order(ratio),
        format!("{:e} -> {:e}, ratio {ratio}", ge_c.residual, ge_f.residual),
    ));

    let packet_coarse = couple
        .time_subsampled(2)
        .ok_or_else(|| CliError::config("grid.n_t", "must be even to compare against half the time resolution"))?;
    let pe_f = euler_residual(couple).map_err(&e)?;
    let pe_c = euler_residual(&packet_coarse).map_err(&e)?;
    let force = quantum_force_sup(couple).map_err(&e)?;
    let rel = (pe_f.residual - force).abs() / force;
    let drift_rel = (pe_f.residual - pe_c.residual).abs() / pe_f.residual;
    checks.push(Check::new(
        "packet-euler-residual-matches-quantum-force",
        rel <= criteria::QUANTUM_FORCE_REL_TOL && drift_rel <= criteria::QUANTUM_FORCE_REL_TOL,
        format!(
            "residual {} (coarse {}), quantum force {force}: relative gap {rel:e}, change under refinement {drift_rel:e}",
            pe_f.residual, pe_c.residual
        ),
    ));

    let map = monge_map_1d(&grid, couple.rho().slice(0), couple.rho().slice(grid.n_t)).map_err(&e)?;
    let artifacts = vec![
        csv_artifact("transport_map.csv", |w| io::write_transport_csv(w, &map)).map_err(&e)?,
        csv_artifact("geodesic_couple.csv", |w| io::write_couple_csv(w, &geodesic)).map_err(&e)?,
    ];
    let report = TransportReport {
        pairs: rows,
        endpoints: [g0.mean, g0.variance, g1.mean, g1.variance],
        tau2,
        displacement_action,
        quantum_vs_classical: qc,
        geodesic_euler_fine: ge_f,
        geodesic_euler_coarse: ge_c,
        geodesic_euler_ratio: ratio,
        packet_euler_fine: pe_f,
        packet_euler_coarse: pe_c,
        quantum_force_sup: force,
    };
    Ok((report, artifacts, checks))
}

// ---------------------------------------------------------------------------
// experiments

/// The Schrödinger couple of the configured packet.
pub fn packet_couple(grid: &GridSpec, packet: &GaussianPacketSpec) -> Result<FluidCouple> {
    let (psi, _, _) = propagation(grid, packet)?;
    Ok(decompose(&psi).map_err(ctx("madelung decomposition"))?.couple)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Runs the configured experiment on the current rayon pool.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let grid = cfg.grid.spec();
    let packet = cfg.packet.spec();
    let mut results = serde_json::Map::new();
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    match cfg.experiment {
        ExperimentKind::GaussianBenchmark => {
            let e = ctx("gaussian-benchmark");
            let (psi, prop, c) = propagation(&grid, &packet)?;
            results.insert("propagation".into(), to_value(&prop)?);
            checks.extend(c);
            let (dec, orders, c) = residual_orders(&psi)?;
            results.insert("madelung_residuals".into(), to_value(&orders)?);
            checks.extend(c);
            artifacts.push(csv_artifact("wave.csv", |w| io::write_wave_csv(w, &psi)).map_err(&e)?);
            drop(psi);
            let couple = dec.couple;
            let (funcs, c) = functionals(&couple, &packet)?;
            results.insert("functionals".into(), to_value(&funcs)?);
            checks.extend(c);
            let (chain, finals, c) = renormalization_chain(&couple, &cfg.mc)?;
            results.insert("renormalization_chain".into(), to_value(&chain)?);
            checks.extend(c);
            let b = drift(&couple).map_err(&e)?;
            artifacts.push(csv_artifact("couple.csv", |w| io::write_couple_csv(w, &couple)).map_err(&e)?);
            artifacts.push(csv_artifact("drift.csv", |w| io::write_drift_csv(w, &b)).map_err(&e)?);
            let mut bin = Vec::new();
            io::write_array(&mut bin, &[finals.len()], &finals).map_err(&e)?;
            artifacts.push(Artifact {
                name: "final_positions.bin".into(),
                bytes: bin,
            });
        }
        ExperimentKind::RenormalizationConvergence => {
            let couple = packet_couple(&grid, &packet)?;
            let (rows, c) = n_convergence(&couple, &cfg.mc)?;
            checks.extend(c);
            let mut csv = String::from("n,mean,std_error,N\n");
            for r in &rows {
                let a = r.renormalized_action;
                csv.push_str(&format!("{},{},{},{}\n", r.n, a.mean, a.std_error, a.n_samples));
            }
            artifacts.push(Artifact {
                name: "convergence.csv".into(),
                bytes: csv.into_bytes(),
            });
            results.insert("convergence".into(), to_value(&rows)?);
            let (mix, c) = mixture_convexity(&grid, couple.rho().slice(0), &cfg.mc)?;
            results.insert("mixture_convexity".into(), to_value(&mix)?);
            checks.extend(c);
        }
        ExperimentKind::Theorem1Verify => {
            let e = ctx("theorem1-verify");
            let couple = packet_couple(&grid, &packet)?;
            let specs = cfg.perturbation_specs();
            let (report, c) = theorem1(&couple, &specs)?;
            checks.extend(c);
            artifacts.push(csv_artifact("profiles.csv", |w| io::write_profile_csv(w, &report.specs)).map_err(&e)?);
            results.insert("theorem1".into(), to_value(&report)?);
            if cfg.negative_control && !specs.is_empty() {
                let (control, c) = negative_control(&grid, &packet, &specs)?;
                checks.extend(c);
                artifacts.push(
                    csv_artifact("negative_control_profiles.csv", |w| {
                        io::write_profile_csv(w, &control.families.specs)
                    })
                    .map_err(&e)?,
                );
                results.insert("negative_control".into(), to_value(&control)?);
            }
        }
        ExperimentKind::BbCompare => {
            let couple = packet_couple(&grid, &packet)?;
            let pairs = cfg.transport.measures()?;
            let (report, arts, c) = transport(&couple, &packet, &pairs)?;
            results.insert("transport".into(), to_value(&report)?);
            checks.extend(c);
            artifacts.extend(arts);
        }
        ExperimentKind::MarginalCheck => {
            let e = ctx("marginal-check");
            let couple = packet_couple(&grid, &packet)?;
            let (rows, dumps, c) = marginals(&couple, &cfg.mc, &cfg.marginal.times)?;
            results.insert("marginals".into(), to_value(&rows)?);
            checks.extend(c);
            artifacts.push(csv_artifact("histograms.csv", |w| io::write_histogram_csv(w, &grid, &dumps)).map_err(&e)?);
        }
    }

    Ok(ExperimentOutput {
        results: Value::Object(results),
        checks,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct quadrature of `∫₀¹∫ (v² ∓ u²) ρ dx dt` from the packet's
    /// closed-form density and velocity.
    fn brute_force_actions(packet: &GaussianPacketSpec) -> (f64, f64) {
        let (nt, nx) = (400, 4000);
        let (lo, hi) = (-15.0, 15.0);
        let dx = (hi - lo) / nx as f64;
        let mut kinetic = 0.0;
        let mut fisher = 0.0;
        for j in 0..nt {
            let t = (j as f64 + 0.5) / nt as f64;
            let var = packet.variance_at(t);
            for k in 0..nx {
                let x = lo + (k as f64 + 0.5) * dx;
                let rho = packet.density(x, t);
                let v = packet.velocity(x, t);
                let u = -0.5 * (x - packet.mean_at(t)) / var;
                kinetic += v * v * rho * dx / nt as f64;
                fisher += u * u * rho * dx / nt as f64;
            }
        }
        (kinetic - fisher, kinetic)
    }

    #[test]
    fn closed_form_actions_match_quadrature() {
        for packet in [
            GaussianPacketSpec::default(),
            GaussianPacketSpec {
                sigma0: 0.7,
                mu0: 0.5,
                p: 0.8,
            },
        ] {
            let (q, c) = packet_actions_closed_form(&packet);
            let (bq, bc) = brute_force_actions(&packet);
            assert!((q - bq).abs() < 1e-5, "{q} vs {bq}");
            assert!((c - bc).abs() < 1e-5, "{c} vs {bc}");
        }
    }

    #[test]
    fn unit_packet_closed_form() {
        let (q, c) = packet_actions_closed_form(&GaussianPacketSpec::default());
        assert!((q - (0.25 - 0.5f64.atan())).abs() < 1e-15);
        assert!((c - q - 0.5 * 0.5f64.atan()).abs() < 1e-15);
    }

    #[test]
    fn synthetic_couples_are_valid_and_satisfy_the_identity() {
        let grid = GridSpec::default().with_n_t(16);
        let couples = synthetic_couples(&grid).unwrap();
        assert_eq!(couples.len(), 5);
        for (label, c) in &couples {
            let row = identity_row(label, c).unwrap();
            assert!(row.gap < criteria::FUNCTIONAL_IDENTITY_TOL, "{label}: {}", row.gap);
        }
    }

    #[test]
    fn negative_control_is_not_schrodinger_derived() {
        let grid = GridSpec::default().with_n_t(8);
        let c = negative_control_couple(&grid, &GaussianPacketSpec::default()).unwrap();
        assert_eq!(c.provenance, Provenance::Synthetic);
        assert!(verify_theorem1(&c, &[]).is_err());
    }
}
