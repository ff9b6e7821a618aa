//! Pass/fail thresholds used by the experiments, and the check record they
//! produce.
//!
//! Thresholds fall into three groups:
//!
//! | Group | Basis |
//! |-------|-------|
//! | exactness | spectral propagation and quadrature reach ~1e-12; the bounds leave room for time discretisation |
//! | convergence orders | centered differences in time are second order, so halving `dt` divides errors by 4 |
//! | Monte Carlo | bounds are multiples of the standard error, with a 2 % relative floor for biased estimators |

use serde::{Deserialize, Serialize};

/// `|⟨(x - μ)²⟩ - s₁²|` for the propagated packet at `t = 1`.
pub const SECOND_MOMENT_TOL: f64 = 1e-6;

/// Largest allowed `| ‖ψ(t)‖² - 1 |` over all time nodes.
pub const NORM_DRIFT_TOL: f64 = 1e-10;

/// Admissible band for `r(n_t / 2) / r(n_t)` of a second-order residual.
pub const SECOND_ORDER_RATIO: (f64, f64) = (3.5, 4.5);

/// `|A^Q - ∫∫(b² + ∂_x b) ρ|`: the two quadratures of the same integral.
pub const FUNCTIONAL_IDENTITY_TOL: f64 = 2e-6;

/// Sanity bound between the quantum action quadrature and the closed form
/// of the free packet. Much looser than the quadrature error: this only
/// guards against a wrong sign or a missing factor.
pub const CLOSED_FORM_TOL: f64 = 1e-5;

/// Monte-Carlo agreement: `|a - b| ≤ max(MC_SIGMAS · se, MC_RELATIVE · |ref|)`.
pub const MC_SIGMAS: f64 = 4.0;
pub const MC_RELATIVE: f64 = 0.02;

/// Partition sizes from which the renormalized action must have converged.
pub const CONVERGED_FROM_N: usize = 256;

/// Competitor-family margins, in units of the quadrature error radius.
pub const THEOREM_VIOLATION_SIGMAS: f64 = 3.0;

/// A non-critical base must show some `|D(0)|` above this many radii.
pub const NEGATIVE_CONTROL_SIGMAS: f64 = 10.0;

/// Momentum of the translating Gaussian used as negative control.
pub const NEGATIVE_CONTROL_MOMENTUM: f64 = 1.0;

/// `|gaussian_w2 - monge cost|`.
pub const W2_TOL: f64 = 1e-5;

/// `|classical_action(displacement couple) - τ₂|`.
pub const DISPLACEMENT_ACTION_TOL: f64 = 1e-4;

/// Relative gap between the Euler residual of the packet couple and the
/// quantum force it should reproduce.
pub const QUANTUM_FORCE_REL_TOL: f64 = 0.05;

/// L¹ distance between ensemble histograms and the exact density.
pub const MARGINAL_L1_TOL: f64 = 0.03;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// `|a - b| ≤ max(MC_SIGMAS · se, MC_RELATIVE · |reference|)`.
pub fn mc_agree(a: f64, b: f64, se: f64, reference: f64) -> bool {
    (a - b).abs() <= (MC_SIGMAS * se).max(MC_RELATIVE * reference.abs())
}

pub fn second_order(ratio: f64) -> bool {
    (SECOND_ORDER_RATIO.0..=SECOND_ORDER_RATIO.1).contains(&ratio)
}
