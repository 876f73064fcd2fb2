//! Cycle-approximate model of the multi-lane linear array.
//!
//! Each call runs through host-side setup (CPU work, CONF, REGV, RANGE and
//! LOAD), a burst EXEC on its lane and a DRAIN back to memory. EXEC needs
//! only the lane; every other phase needs one of the host cores.

mod config;
mod sim;
mod trace;

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

pub use config::{MachineConfig, ASIC_FREQ_HZ, ASIC_TABLE_FREQ_HZ, FPGA_FREQ_HZ};
pub use sim::{
    saturation_knee, simulate_trace, simulate_trace_with, sweep_lanes, CallRecord, MappingSet, SimReport, SweepRow,
    KNEE_THRESHOLD,
};
pub use trace::{parse_trace, write_trace, KernelCall};

use crate::kernels::KernelMapping;

/// Wall time per phase, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseBreakdown {
    pub cpu_s: f64,
    pub conf_s: f64,
    pub regv_s: f64,
    pub range_s: f64,
    pub load_s: f64,
    pub exec_s: f64,
    pub drain_s: f64,
}

impl PhaseBreakdown {
    pub const NAMES: [&'static str; 7] = ["cpu", "conf", "regv", "range", "load", "exec", "drain"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.cpu_s,
            self.conf_s,
            self.regv_s,
            self.range_s,
            self.load_s,
            self.exec_s,
            self.drain_s,
        ]
    }

    pub fn from_values(v: [f64; 7]) -> Self {
        let [cpu_s, conf_s, regv_s, range_s, load_s, exec_s, drain_s] = v;
        Self {
            cpu_s,
            conf_s,
            regv_s,
            range_s,
            load_s,
            exec_s,
            drain_s,
        }
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    /// Phases that occupy a host core before EXEC.
    pub fn pre_exec_s(&self) -> f64 {
        self.cpu_s + self.conf_s + self.regv_s + self.range_s + self.load_s
    }

    /// Share of the total per phase, in percent. All zero for an empty breakdown.
    pub fn percentages(&self) -> [f64; 7] {
        let t = self.total();
        self.values().map(|v| if t > 0.0 { 100.0 * v / t } else { 0.0 })
    }

    /// Every phase multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self::from_values(self.values().map(|v| v * s))
    }
}

impl Add for PhaseBreakdown {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.values(), rhs.values());
        Self::from_values(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl AddAssign for PhaseBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for PhaseBreakdown {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// LMM tiles a row needs: its weights plus the activation vector.
pub fn row_tiles(call: &KernelCall, config: &MachineConfig) -> u64 {
    let working_set = call.weight_row_bytes() + call.activation_bytes();
    working_set.div_ceil(config.lmm_bytes_per_lane).max(1)
}

/// EXEC cycles: each row pays the pipeline fill once per LMM tile, then
/// streams one word (8 elements) per cycle.
pub fn exec_cycles(call: &KernelCall, mapping: &KernelMapping, config: &MachineConfig) -> u64 {
    let fill = mapping.stages().len() as u64;
    let per_row = row_tiles(call, config) * fill + (call.k as u64).div_ceil(8);
    call.m as u64 * per_row
}

/// Phase durations of one call on an otherwise idle machine.
pub fn phase_times(call: &KernelCall, config: &MachineConfig, mapping: &KernelMapping) -> PhaseBreakdown {
    let f = config.freq_hz;
    PhaseBreakdown {
        cpu_s: config.host_service_seconds_per_call,
        conf_s: if call.reconf { config.conf_cycles as f64 / f } else { 0.0 },
        regv_s: config.regv_cycles as f64 / f,
        range_s: config.range_cycles as f64 / f,
        load_s: call.bytes_in() as f64 / (config.load_bw_bytes_per_cycle * f),
        exec_s: exec_cycles(call, mapping, config) as f64 / f,
        drain_s: call.bytes_out() as f64 / (config.drain_bw_bytes_per_cycle * f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{default_mapping, KernelTag};

    #[test]
    fn exec_cycle_examples() {
        let cfg = MachineConfig::default();
        let map = default_mapping(KernelTag::Q8_0);
        let call = |m, k| KernelCall::new(KernelTag::Q8_0, m, k, false).unwrap();
        assert_eq!(exec_cycles(&call(1, 256), &map, &cfg), 78);
        assert_eq!(exec_cycles(&call(0, 256), &map, &cfg), 0);
        assert_eq!(exec_cycles(&call(3, 512), &map, &cfg) - exec_cycles(&call(3, 256), &map, &cfg), 3 * 32);
    }

    #[test]
    fn tiling_repays_fill() {
        let cfg = MachineConfig {
            lmm_bytes_per_lane: 1024,
            ..MachineConfig::default()
        };
        let map = default_mapping(KernelTag::Q8_0);
        // 34·32 weight bytes + 34·32 activation bytes = 2176 → 3 tiles
        let call = KernelCall::new(KernelTag::Q8_0, 1, 1024, false).unwrap();
        assert_eq!(exec_cycles(&call, &map, &cfg), 3 * 46 + 128);
    }

    #[test]
    fn zero_call_keeps_setup_constants() {
        let cfg = MachineConfig::default();
        let call = KernelCall::new(KernelTag::Q3K, 0, 0, true).unwrap();
        let p = phase_times(&call, &cfg, &default_mapping(KernelTag::Q3K));
        assert_eq!(p.conf_s, 1024.0 / 145e6);
        assert_eq!(p.regv_s, 256.0 / 145e6);
        assert_eq!(p.range_s, 128.0 / 145e6);
        assert_eq!((p.cpu_s, p.load_s, p.exec_s, p.drain_s), (0.0, 0.0, 0.0, 0.0));
    }
}
