//! Energy, power-delay product and end-to-end latency analytics.

mod calibrate;
mod devices;

use serde::{Deserialize, Serialize};

pub use calibrate::{
    calibrate_joint, calibrate_two_point, reference_observations, CalibratedModel, Calibration, E2EObservation,
    TwoPointCalibration, DOT_SHARE_Q3_K, DOT_SHARE_Q8_0,
};
pub use devices::{
    builtin_devices, compare_report, reference_scenario, parse_scenario_file, CompareRow, DeviceProfile, Scenario,
    ScenarioEntry, ScenarioFile,
};

use crate::machine::PhaseBreakdown;
use crate::{Error, Result};

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be a non-negative number, got {v}")))
    }
}

/// Power-delay product of one time at one power, in joules.
pub fn pdp(time_s: f64, power_w: f64) -> Result<f64> {
    non_negative("time", time_s)?;
    non_negative("power", power_w)?;
    Ok(time_s * power_w)
}

/// Power drawn during each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePower {
    pub cpu_w: f64,
    pub conf_w: f64,
    pub regv_w: f64,
    pub range_w: f64,
    pub load_w: f64,
    pub exec_w: f64,
    pub drain_w: f64,
}

impl PhasePower {
    pub fn uniform(w: f64) -> Self {
        Self::from_values([w; 7])
    }

    /// Host power throughout, plus accelerator power in every phase but CPU.
    pub fn host_and_accel(host_w: f64, accel_w: f64) -> Self {
        let both = host_w + accel_w;
        Self::from_values([host_w, both, both, both, both, both, both])
    }

    pub fn values(&self) -> [f64; 7] {
        [self.cpu_w, self.conf_w, self.regv_w, self.range_w, self.load_w, self.exec_w, self.drain_w]
    }

    pub fn from_values(v: [f64; 7]) -> Self {
        let [cpu_w, conf_w, regv_w, range_w, load_w, exec_w, drain_w] = v;
        Self {
            cpu_w,
            conf_w,
            regv_w,
            range_w,
            load_w,
            exec_w,
            drain_w,
        }
    }
}

/// `Σ time·power` over phases.
pub fn pdp_phases(phases: &PhaseBreakdown, power: &PhasePower) -> Result<f64> {
    let mut total = 0.0;
    for (name, (t, p)) in PhaseBreakdown::NAMES.iter().zip(phases.values().into_iter().zip(power.values())) {
        non_negative(&format!("{name} time"), t)?;
        non_negative(&format!("{name} power"), p)?;
        total += t * p;
    }
    Ok(total)
}

/// `time·f_from/f_to`.
pub fn freq_projection(time_s: f64, f_from: f64, f_to: f64) -> Result<f64> {
    for f in [f_from, f_to] {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidInput(format!("frequency must be positive, got {f}")));
        }
    }
    Ok(time_s * f_from / f_to)
}

/// Rescales every cycle-derived phase; host CPU time is left alone.
pub fn freq_projection_phases(p: &PhaseBreakdown, f_from: f64, f_to: f64) -> Result<PhaseBreakdown> {
    freq_projection(0.0, f_from, f_to)?;
    let mut out = PhaseBreakdown::from_values(p.values().map(|t| t * f_from / f_to));
    out.cpu_s = p.cpu_s;
    Ok(out)
}

/// Inputs to the end-to-end latency composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E2EInputs {
    pub host_only_latency_s: f64,
    /// Share of host-only time spent in the kernel being offloaded.
    pub offload_fraction: f64,
    pub accel_kernel_time_s: f64,
    /// Transfer or launch time not covered by the kernel time.
    pub overhead_s: f64,
    /// Share of accelerator time hidden behind host work.
    pub overlap: f64,
    pub host_w: f64,
    pub accel_w: f64,
}

impl E2EInputs {
    pub fn new(host_only_latency_s: f64, offload_fraction: f64, accel_kernel_time_s: f64) -> Self {
        Self {
            host_only_latency_s,
            offload_fraction,
            accel_kernel_time_s,
            overhead_s: 0.0,
            overlap: 0.0,
            host_w: 0.0,
            accel_w: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("offload_fraction", self.offload_fraction), ("overlap", self.overlap)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        non_negative("host_only_latency_s", self.host_only_latency_s)?;
        non_negative("accel_kernel_time_s", self.accel_kernel_time_s)?;
        non_negative("overhead_s", self.overhead_s)?;
        non_negative("host_w", self.host_w)?;
        non_negative("accel_w", self.accel_w)
    }
}

/// `host·(1 − f) + (1 − overlap)·accel + overhead`.
pub fn e2e_compose(inputs: &E2EInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.host_only_latency_s * (1.0 - inputs.offload_fraction)
        + (1.0 - inputs.overlap) * inputs.accel_kernel_time_s
        + inputs.overhead_s)
}

/// Host power over the whole composed latency plus accelerator power while
/// the kernel runs.
pub fn e2e_energy(inputs: &E2EInputs) -> Result<f64> {
    let latency = e2e_compose(inputs)?;
    Ok(inputs.host_w * latency + inputs.accel_w * inputs.accel_kernel_time_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdp_examples() {
        assert_eq!(pdp(16.2, 250.0).unwrap(), 4050.0);
        assert_eq!(pdp(59.3, 200.0).unwrap(), 11860.0);
        assert_eq!(pdp(0.0, 250.0).unwrap(), 0.0);
        assert!(pdp(-1.0, 1.0).is_err());
        assert!(pdp(1.0, -1.0).is_err());
    }

    #[test]
    fn compose_examples() {
        let base = E2EInputs::new(809.7, 0.0, 0.0);
        assert_eq!(e2e_compose(&base).unwrap(), 809.7);
        let even = E2EInputs::new(100.0, 0.25, 25.0);
        assert_eq!(e2e_compose(&even).unwrap(), 100.0);
        assert!(e2e_compose(&E2EInputs::new(1.0, 1.5, 0.0)).is_err());
    }

    #[test]
    fn projection() {
        let s = freq_projection(1.0, 840e6, 145e6).unwrap();
        assert!((s - 5.793103448275862).abs() < 1e-12);
        assert_eq!(freq_projection(3.0, 145e6, 145e6).unwrap(), 3.0);
        assert!(freq_projection(1.0, 0.0, 1.0).is_err());
    }
}
