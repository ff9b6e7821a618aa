//! End-to-end checks of the competitor construction against the free
//! Gaussian packet.

use madelung_core::competitors::{check_families, random_specs, verify_theorem1, Verdict};
use madelung_core::madelung::{decompose, FluidCouple, Provenance};
use madelung_core::schrodinger::{gaussian_packet, GaussianPacketSpec};
use madelung_core::GridSpec;

fn packet() -> (GridSpec, GaussianPacketSpec, FluidCouple) {
    let grid = GridSpec::default();
    let spec = GaussianPacketSpec::default();
    let couple = decompose(&gaussian_packet(&spec, &grid).unwrap()).unwrap().couple;
    (grid, spec, couple)
}

#[test]
fn packet_couple_beats_random_competitors() {
    let (_, _, base) = packet();
    let report = verify_theorem1(&base, &random_specs(100, 20, 0.03)).unwrap();
    for r in &report.specs {
        assert_eq!(r.verdict, Verdict::Pass, "seed {}: {r:?}", r.seed);
        assert!(r.min_margin >= -2.0, "seed {}", r.seed);
        assert!((3.0..=5.0).contains(&r.derivative_ratio), "seed {}", r.seed);
        // the profile value at zero is the base action itself
        let at_zero = r.y_profile.iter().find(|p| p.0 == 0.0).unwrap();
        assert_eq!(at_zero.1, report.base_action);
    }
    assert!(report.all_pass);
}

#[test]
fn mismatched_velocity_is_not_stationary() {
    let (grid, spec, _) = packet();
    // spreading density carried by a uniform velocity: not a critical point
    let base = FluidCouple::from_fns(grid, |x, t| spec.density(x - t, t), |_, _| 1.0, Provenance::Synthetic).unwrap();
    let report = check_families(&base, &random_specs(100, 5, 0.03)).unwrap();
    assert!(report
        .specs
        .iter()
        .any(|r| r.derivatives[0].value.abs() > 10.0 * r.derivatives[0].error_radius));
    assert!(!report.all_pass);
}
