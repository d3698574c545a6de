mod common;

use common::oracles::*;
use piforge_core::model::PerformanceIndicator;
use piforge_core::synth::{
    allocate, check_feasibility, FeasibilityVerdict, InterfaceStatus, DEFAULT_WARN_UTILIZATION,
};
use proptest::prelude::*;

#[test]
fn float32_at_ten_hertz() {
    let (load, utilization, latency, verdict) = single_interface("200 ms");
    // 32-bit value plus 64-bit header, ten times a second, on 1e8 bit/s.
    assert_eq!(load, (32.0 + 64.0) * 10.0);
    assert_eq!(load, 960.0);
    assert!(rel_eq(utilization, 9.6e-6), "{utilization}");
    assert!(rel_eq(latency, 9.6e-7), "{latency}");
    assert_eq!(verdict, FeasibilityVerdict::Ok);
}

#[test]
fn tight_freshness_fails() {
    assert_eq!(single_interface("0.05 s").3, FeasibilityVerdict::Fail);
}

#[test]
fn spatial_mismatch_fails() {
    let mut b = feasibility_bundle();
    b.architecture.buses.get_mut("a").unwrap().placement = Some("roof".into());
    let log: Vec<PerformanceIndicator> = b.pis().cloned().collect();
    let ifs = allocate(&log, &b.architecture).unwrap();
    let report = check_feasibility(&ifs, &b.architecture, DEFAULT_WARN_UTILIZATION);
    assert_eq!(report.interfaces[0].status, InterfaceStatus::NonViable);
    assert!(report.non_viable[0].reason.contains("spatial"));
}

proptest! {
    #[test]
    fn load_is_monotone(adds in proptest::collection::vec((1u32..2000, 1u32..64, any::<bool>()), 1..25)) {
        prop_load_monotone(&adds)?;
    }
}
