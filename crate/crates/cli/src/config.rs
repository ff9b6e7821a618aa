//! Experiment configuration files.
//!
//! A config is a TOML document, normally written with dotted keys:
//!
//! ```toml
//! experiment = "gaussian-benchmark"
//! output_dir = "out/gaussian"
//! grid.n_x = 512
//! mc.N = 100000
//! mc.seed = 7
//! ```
//!
//! Every section is optional and falls back to the defaults below. Unknown
//! keys are rejected so that a typo cannot silently leave a default in
//! place. The only environment override is `OUTPUT_DIR`, which replaces
//! `output_dir`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use madelung_core::benamou_brenier::GaussianMeasure;
use madelung_core::competitors::{build_perturbation, random_specs, PerturbationSpec};
use madelung_core::madelung::decompose;
use madelung_core::schrodinger::gaussian_packet;
use madelung_core::{Error, GaussianPacketSpec, GridSpec};

use crate::error::{CliError, Result};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GaussianBenchmark,
    RenormalizationConvergence,
    Theorem1Verify,
    BbCompare,
    MarginalCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::GaussianBenchmark,
        ExperimentKind::RenormalizationConvergence,
        ExperimentKind::Theorem1Verify,
        ExperimentKind::BbCompare,
        ExperimentKind::MarginalCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GaussianBenchmark => "gaussian-benchmark",
            ExperimentKind::RenormalizationConvergence => "renormalization-convergence",
            ExperimentKind::Theorem1Verify => "theorem1-verify",
            ExperimentKind::BbCompare => "bb-compare",
            ExperimentKind::MarginalCheck => "marginal-check",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::GaussianBenchmark => {
                "free packet: propagation exactness, Madelung residuals, deterministic and Monte-Carlo actions"
            }
            ExperimentKind::RenormalizationConvergence => {
                "renormalized discrete action across partition sizes, and convexity on drift mixtures"
            }
            ExperimentKind::Theorem1Verify => {
                "stationarity, minimality and convexity of the quantum action along competitor families"
            }
            ExperimentKind::BbCompare => {
                "Wasserstein distances, Monge maps, displacement interpolation and pressureless Euler residuals"
            }
            ExperimentKind::MarginalCheck => "ensemble histograms against the packet density",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub boundary_tol: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig {
            x_min: g.x_min,
            x_max: g.x_max,
            n_x: g.n_x,
            n_t: g.n_t,
            boundary_tol: g.boundary_tol,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            n_x: self.n_x,
            n_t: self.n_t,
            boundary_tol: self.boundary_tol,
            ..GridSpec::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketConfig {
    pub sigma0: f64,
    pub mu0: f64,
    pub p: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        let p = GaussianPacketSpec::default();
        PacketConfig {
            sigma0: p.sigma0,
            mu0: p.mu0,
            p: p.p,
        }
    }
}

impl PacketConfig {
    pub fn spec(&self) -> GaussianPacketSpec {
        GaussianPacketSpec {
            sigma0: self.sigma0,
            mu0: self.mu0,
            p: self.p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    #[serde(rename = "N")]
    pub n_paths: usize,
    pub n: usize,
    pub substeps: usize,
    pub seed: u64,
    /// Partition sizes for the convergence sweep.
    pub n_values: Vec<usize>,
    /// Mixture weights `λ` for the convexity check on `(0, mixture_drift)`.
    pub mixture_lambdas: Vec<f64>,
    pub mixture_drift: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            n: 256,
            substeps: madelung_core::nelson_sde::DEFAULT_SUBSTEPS,
            seed: 20_240_917,
            n_values: vec![64, 128, 256, 512],
            mixture_lambdas: vec![0.25, 0.5, 0.75],
            mixture_drift: 3.0,
        }
    }
}

/// One explicit perturbation; omitted fields take the library defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub seed: u64,
    pub space_support: Option<[f64; 2]>,
    pub time_window: Option<[f64; 2]>,
    pub amplitude: Option<f64>,
    pub modes: Option<usize>,
}

impl PerturbationConfig {
    pub fn spec(&self) -> PerturbationSpec {
        let d = PerturbationSpec::default();
        PerturbationSpec {
            seed: self.seed,
            space_support: self.space_support.map_or(d.space_support, |[a, b]| (a, b)),
            time_window: self.time_window.map_or(d.time_window, |[a, b]| (a, b)),
            amplitude: self.amplitude.unwrap_or(d.amplitude),
            modes: self.modes.unwrap_or(d.modes),
        }
    }
}

/// `count` default-shaped perturbations with consecutive seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPerturbations {
    pub first_seed: u64,
    pub count: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    PerturbationSpec::default().amplitude
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportConfig {
    /// Gaussian pairs `[mean0, variance0, mean1, variance1]`.
    pub pairs: Vec<[f64; 4]>,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            pairs: vec![
                [0.0, 1.0, 0.0, 1.25],
                [0.0, 1.0, 1.0, 1.0],
                [-1.0, 0.5, 1.0, 0.5],
                [0.0, 0.25, 0.0, 2.0],
                [2.0, 1.5, -1.5, 0.75],
                [-0.5, 0.8, 0.3, 1.2],
                [1.0, 2.0, -1.0, 0.3],
                [0.0, 0.6, 2.5, 0.6],
                [-2.0, 1.0, 2.0, 1.6],
                [0.7, 0.4, -0.2, 1.9],
            ],
        }
    }
}

impl TransportConfig {
    pub fn measures(&self) -> Result<Vec<(GaussianMeasure, GaussianMeasure)>> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, &[m0, v0, m1, v1])| {
                let key = format!("transport.pairs[{i}]");
                let g0 = GaussianMeasure::new(m0, v0).map_err(|e| CliError::config(&key, e.to_string()))?;
                let g1 = GaussianMeasure::new(m1, v1).map_err(|e| CliError::config(&key, e.to_string()))?;
                Ok((g0, g1))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginalConfig {
    pub times: Vec<f64>,
}

impl Default for MarginalConfig {
    fn default() -> Self {
        MarginalConfig {
            times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub max_parallelism: Option<usize>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub packet: PacketConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub perturbations: Vec<PerturbationConfig>,
    #[serde(default)]
    pub random_perturbations: Option<RandomPerturbations>,
    /// Also run the families against a non-critical couple, which must be
    /// flagged.
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default)]
    pub transport: TransportConfig,
    #[serde(default)]
    pub marginal: MarginalConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

impl ExperimentConfig {
    /// Defaults for `experiment`, as `madelung run` would see them with a
    /// config containing only the `experiment` key.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            output_dir: default_output_dir(),
            max_parallelism: None,
            grid: GridConfig::default(),
            packet: PacketConfig::default(),
            mc: McConfig::default(),
            perturbations: Vec::new(),
            random_perturbations: None,
            negative_control: false,
            transport: TransportConfig::default(),
            marginal: MarginalConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let reason = e.message().to_string();
            let key = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .unwrap_or_default();
            CliError::config(key, reason)
        })
    }

    /// Reads, parses, applies `OUTPUT_DIR` and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every perturbation the experiment will use: explicit ones first,
    /// then the random batch.
    pub fn perturbation_specs(&self) -> Vec<PerturbationSpec> {
        let mut specs: Vec<PerturbationSpec> = self.perturbations.iter().map(|p| p.spec()).collect();
        if let Some(r) = self.random_perturbations {
            specs.extend(random_specs(r.first_seed, r.count, r.amplitude));
        }
        specs
    }

    /// Invariant checks on every section; the first failure is reported
    /// with the offending key.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.spec();
        grid.validate().map_err(|e| keyed("grid", e))?;
        let packet = self.packet.spec();
        packet.validate().map_err(|e| keyed("packet", e))?;
        self.check_packet_fits(&grid, &packet)?;

        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::config("output_dir", "must not be empty"));
        }
        if self.max_parallelism == Some(0) {
            return Err(CliError::config("max_parallelism", "must be at least 1"));
        }

        let mc = &self.mc;
        if mc.n_paths < 2 {
            return Err(CliError::config("mc.N", "at least two trajectories are needed for a standard error"));
        }
        if mc.n == 0 {
            return Err(CliError::config("mc.n", "must be positive"));
        }
        if mc.substeps == 0 {
            return Err(CliError::config("mc.substeps", "must be positive"));
        }
        if mc.n_values.is_empty() || mc.n_values.contains(&0) {
            return Err(CliError::config("mc.n_values", "must be a nonempty list of positive sizes"));
        }
        if mc.mixture_lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(CliError::config("mc.mixture_lambdas", "weights must lie in [0, 1]"));
        }
        if !mc.mixture_drift.is_finite() {
            return Err(CliError::config("mc.mixture_drift", "must be finite"));
        }

        let marginal_times: &[f64] = if self.experiment == ExperimentKind::MarginalCheck {
            &self.marginal.times
        } else {
            &[]
        };
        for (i, &t) in marginal_times.iter().enumerate() {
            let key = format!("marginal.times[{i}]");
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::config(key, format!("{t} is outside [0, 1]")));
            }
            if !on_lattice(t, mc.n) || !on_lattice(t, grid.n_t) {
                return Err(CliError::config(
                    key,
                    format!("{t} is not a node of both the partition (n = {}) and the grid (n_t = {})", mc.n, grid.n_t),
                ));
            }
        }

        self.transport.measures()?;
        if let Some(r) = self.random_perturbations {
            if !(r.amplitude >= 0.0 && r.amplitude.is_finite()) {
                return Err(CliError::config("random_perturbations.amplitude", "must be nonnegative"));
            }
        }
        self.check_perturbations(&grid, &packet)
    }

    fn check_packet_fits(&self, grid: &GridSpec, packet: &GaussianPacketSpec) -> Result<()> {
        for t in [0.0, 1.0] {
            let peak = packet.density(packet.mean_at(t), t);
            let edge = packet.density(grid.x_min, t).max(packet.density(grid.x_max, t));
            if edge > grid.boundary_tol * peak {
                return Err(CliError::config(
                    "packet",
                    format!(
                        "density at the box edge is {:e} of its peak at t = {t}, above grid.boundary_tol = {:e}",
                        edge / peak,
                        grid.boundary_tol
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Shape checks, then the positivity precheck: the perturbation is
    /// built against the packet density exactly as the experiment would,
    /// so an amplitude that cannot keep `ρ + y g > 0` is reported here.
    fn check_perturbations(&self, grid: &GridSpec, packet: &GaussianPacketSpec) -> Result<()> {
        let explicit = self.perturbations.len();
        let specs = self.perturbation_specs();
        let key = |i: usize, field: &str| {
            if i < explicit {
                format!("perturbations[{i}].{field}")
            } else {
                format!("random_perturbations.{field}")
            }
        };
        for (i, spec) in specs.iter().enumerate() {
            spec.validate(grid).map_err(|e| match e {
                Error::InvalidParameter { name, reason } => CliError::config(key(i, name), reason),
                other => CliError::config(key(i, "seed"), other.to_string()),
            })?;
        }
        if specs.is_empty() {
            return Ok(());
        }
        let base = gaussian_packet(packet, grid)
            .and_then(|psi| decompose(&psi))
            .map_err(|e| CliError::config("packet", e.to_string()))?
            .couple;
        for (i, spec) in specs.iter().enumerate() {
            match build_perturbation(spec, &base) {
                Ok(_) => {}
                Err(Error::AmplitudeInfeasible(reason)) => {
                    return Err(CliError::config(key(i, "amplitude"), reason));
                }
                Err(other) => return Err(CliError::config(key(i, "seed"), other.to_string())),
            }
        }
        Ok(())
    }
}

fn on_lattice(t: f64, n: usize) -> bool {
    let k = t * n as f64;
    (k - k.round()).abs() < 1e-9
}

/// Prefixes a parameter error from the core crate with its section.
fn keyed(section: &str, e: Error) -> CliError {
    match e {
        Error::InvalidParameter { name, reason } => CliError::config(format!("{section}.{name}"), reason),
        other => CliError::config(section, other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(err: CliError) -> String {
        match err {
            CliError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn dotted_keys_fill_sections() {
        let cfg = ExperimentConfig::parse(
            "experiment = \"marginal-check\"\ngrid.n_x = 256\nmc.N = 1000\nmc.seed = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::MarginalCheck);
        assert_eq!(cfg.grid.n_x, 256);
        assert_eq!(cfg.grid.n_t, 256);
        assert_eq!(cfg.mc.n_paths, 1000);
        assert_eq!(cfg.mc.seed, 3);
        assert_eq!(cfg.mc.substeps, 4);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::parse("experiment = \"bb-compare\"\nmc.samples = 3\n").unwrap_err();
        assert!(err.to_string().contains("samples"), "{err}");
    }

    #[test]
    fn unknown_experiment_is_rejected() {
        assert!(ExperimentConfig::parse("experiment = \"nope\"\n").is_err());
    }

    #[test]
    fn n_x_must_be_a_power_of_two() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GaussianBenchmark);
        cfg.grid.n_x = 500;
        assert_eq!(key_of(cfg.validate().unwrap_err()), "grid.n_x");
    }

    #[test]
    fn packet_must_fit_the_box() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GaussianBenchmark);
        cfg.packet.sigma0 = 3.0;
        assert_eq!(key_of(cfg.validate().unwrap_err()), "packet");
    }

    #[test]
    fn marginal_times_must_be_nodes() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::MarginalCheck);
        cfg.marginal.times = vec![0.0, 0.3];
        assert_eq!(key_of(cfg.validate().unwrap_err()), "marginal.times[1]");
    }

    #[test]
    fn oversized_amplitude_is_named() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Theorem1Verify);
        cfg.perturbations = vec![PerturbationConfig {
            seed: 5,
            space_support: None,
            time_window: None,
            amplitude: Some(5.0),
            modes: None,
        }];
        assert_eq!(key_of(cfg.validate().unwrap_err()), "perturbations[0].amplitude");
    }

    #[test]
    fn support_outside_the_box_is_named() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Theorem1Verify);
        cfg.perturbations = vec![PerturbationConfig {
            seed: 5,
            space_support: Some([-20.0, 0.0]),
            time_window: None,
            amplitude: None,
            modes: None,
        }];
        assert_eq!(key_of(cfg.validate().unwrap_err()), "perturbations[0].space_support");
    }

    #[test]
    fn random_batch_is_appended() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Theorem1Verify);
        cfg.random_perturbations = Some(RandomPerturbations {
            first_seed: 100,
            count: 3,
            amplitude: 0.03,
        });
        let specs = cfg.perturbation_specs();
        assert_eq!(specs.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![100, 101, 102]);
        cfg.validate().unwrap();
    }
}
