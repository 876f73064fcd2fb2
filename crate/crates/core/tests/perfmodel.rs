use proptest::prelude::*;
use qcgla::kernels::KernelTag;
use qcgla::machine::PhaseBreakdown;
use qcgla::perfmodel::*;

fn phases() -> impl Strategy<Value = PhaseBreakdown> {
    prop::array::uniform7(0.0f64..100.0).prop_map(PhaseBreakdown::from_values)
}

proptest! {
    #[test]
    fn pdp_is_linear_in_time_and_power(t in 0.0f64..1e4, p in 0.0f64..1e3, e in -20i32..20) {
        // power-of-two factors scale exactly
        let a = 2f64.powi(e);
        prop_assert_eq!(pdp(a * t, p).unwrap(), a * pdp(t, p).unwrap());
        prop_assert_eq!(pdp(t, a * p).unwrap(), a * pdp(t, p).unwrap());
    }

    #[test]
    fn pdp_linear_for_any_factor(t in 0.0f64..1e4, p in 0.0f64..1e3, a in 0.0f64..1e3) {
        let (l, r) = (pdp(a * t, p).unwrap(), a * pdp(t, p).unwrap());
        prop_assert!((l - r).abs() <= 4.0 * f64::EPSILON * r);
    }

    #[test]
    fn uniform_phase_power_equals_scalar(ph in phases(), w in 0.0f64..500.0) {
        let phased = pdp_phases(&ph, &PhasePower::uniform(w)).unwrap();
        let scalar = pdp(ph.total(), w).unwrap();
        prop_assert!((phased - scalar).abs() <= 1e-12 * scalar.max(1e-300));
    }

    #[test]
    fn compose_monotone(host in 0.0f64..1e3, f in 0.0f64..=1.0, a in 0.0f64..1e2, da in 0.0f64..1e2, dh in 0.0f64..1e2) {
        let base = e2e_compose(&E2EInputs::new(host, f, a)).unwrap();
        // slower accelerator never helps, a slower host never helps
        prop_assert!(e2e_compose(&E2EInputs::new(host, f, a + da)).unwrap() >= base);
        prop_assert!(e2e_compose(&E2EInputs::new(host + dh, f, a)).unwrap() >= base);
    }

    #[test]
    fn projection_round_trip(t in 0.0f64..1e6, f1 in 1e6f64..5e9, f2 in 1e6f64..5e9) {
        let back = freq_projection(freq_projection(t, f1, f2).unwrap(), f2, f1).unwrap();
        prop_assert!((back - t).abs() <= 1e-12 * t.max(1e-300));
    }
}

#[test]
fn pdp_rejects_negative_inputs() {
    assert!(pdp(-0.1, 1.0).is_err());
    assert!(pdp_phases(&PhaseBreakdown { exec_s: -1.0, ..Default::default() }, &PhasePower::uniform(1.0)).is_err());
}

#[test]
fn phase_projection_keeps_host_time() {
    let p = PhaseBreakdown::from_values([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    let q = freq_projection_phases(&p, 145e6, 840e6).unwrap();
    assert_eq!(q.cpu_s, 1.0);
    assert!((p.exec_s / q.exec_s - 840.0 / 145.0).abs() < 1e-12);
    assert_eq!(freq_projection(2.5, 145e6, 145e6).unwrap(), 2.5);
}

#[test]
fn energy_counts_host_throughout() {
    let mut i = E2EInputs::new(100.0, 0.1, 5.0);
    i.host_w = 2.0;
    i.accel_w = 10.0;
    assert_eq!(e2e_compose(&i).unwrap(), 95.0);
    assert_eq!(e2e_energy(&i).unwrap(), 2.0 * 95.0 + 50.0);
    i.overlap = 1.0;
    assert_eq!(e2e_compose(&i).unwrap(), 90.0);
}

#[test]
fn two_point_reproduces_reference_example() {
    let c = calibrate_two_point(809.7, 790.3, 754.5, 145e6, 840e6).unwrap();
    assert!((c.accel_s - 43.3).abs() < 0.05);
}

#[test]
fn builtin_profiles_match_the_device_table() {
    let d = builtin_devices();
    let get = |n: &str| d.iter().find(|x| x.name == n).unwrap();
    assert_eq!(get("gtx-1080ti").power_w(KernelTag::Q3K), 250.0);
    assert_eq!(get("xeon-w5").power_w(KernelTag::Q8_0), 200.0);
    assert_eq!(get("arm-a72").power_w(KernelTag::Q8_0), 1.5);
    assert_eq!(get("imax3-fpga").power_w(KernelTag::Q3K), 180.0);
    assert_eq!(get("imax3-28nm").power_w(KernelTag::Q8_0), 47.7);
    assert_eq!(get("imax3-28nm").power_w(KernelTag::Q3K), 52.8);
    assert_eq!(get("imax3-28nm").freq_hz, 840e6);
    assert_eq!(get("imax3-28nm-800").freq_hz, 800e6);
    assert_eq!(get("imax3-fpga").freq_hz, 145e6);
    assert!(get("gtx-1080ti").host.is_none());
}

#[test]
fn single_device_report() {
    let sc = Scenario {
        name: "one".into(),
        kernel: KernelTag::Q8_0,
        entries: vec![ScenarioEntry {
            device: "arm-a72".into(),
            latency_s: 625.1,
            accel_time_s: None,
        }],
    };
    let rows = compare_report(&builtin_devices(), &sc).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].pdp_j, 625.1 * 1.5);
}

#[test]
fn equal_devices_order_by_name() {
    let devices: Vec<_> = ["c", "a", "b"].iter().map(|n| DeviceProfile::new(n, 3.0, 1e9, None, "")).collect();
    let sc = Scenario {
        name: "eq".into(),
        kernel: KernelTag::Q3K,
        entries: ["c", "a", "b"]
            .iter()
            .map(|n| ScenarioEntry {
                device: n.to_string(),
                latency_s: 1.0,
                accel_time_s: None,
            })
            .collect(),
    };
    let names: Vec<_> = compare_report(&devices, &sc).unwrap().into_iter().map(|r| r.device).collect();
    assert_eq!(names, ["a", "b", "c"]);
}
