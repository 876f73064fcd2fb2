use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::kernels::{MAX_LANES, PES_PER_LANE};
use crate::{Error, Result};

/// FPGA prototype clock.
pub const FPGA_FREQ_HZ: f64 = 145e6;
/// 28 nm implementation clock from timing analysis.
pub const ASIC_FREQ_HZ: f64 = 840e6;
/// 28 nm clock as listed in the device comparison table.
pub const ASIC_TABLE_FREQ_HZ: f64 = 800e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub pes_per_lane: usize,
    pub lanes: usize,
    pub freq_hz: f64,
    pub lmm_bytes_per_lane: u64,
    pub host_cores: usize,
    pub load_bw_bytes_per_cycle: f64,
    pub drain_bw_bytes_per_cycle: f64,
    pub conf_cycles: u64,
    pub regv_cycles: u64,
    pub range_cycles: u64,
    pub host_service_seconds_per_call: f64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            pes_per_lane: PES_PER_LANE,
            lanes: MAX_LANES,
            freq_hz: FPGA_FREQ_HZ,
            lmm_bytes_per_lane: 512 * 1024,
            host_cores: 2,
            load_bw_bytes_per_cycle: 8.0,
            drain_bw_bytes_per_cycle: 8.0,
            conf_cycles: 64 * 16,
            regv_cycles: 64 * 4,
            range_cycles: 64 * 2,
            host_service_seconds_per_call: 0.0,
        }
    }
}

impl MachineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1..=MAX_LANES).contains(&self.lanes) {
            return bad(format!("lanes must be in 1..={MAX_LANES}, got {}", self.lanes));
        }
        if self.pes_per_lane == 0 || self.host_cores == 0 || self.lmm_bytes_per_lane == 0 {
            return bad("pes_per_lane, host_cores and lmm_bytes_per_lane must be positive".into());
        }
        for (name, v) in [
            ("freq_hz", self.freq_hz),
            ("load_bw_bytes_per_cycle", self.load_bw_bytes_per_cycle),
            ("drain_bw_bytes_per_cycle", self.drain_bw_bytes_per_cycle),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let h = self.host_service_seconds_per_call;
        if !(h.is_finite() && h >= 0.0) {
            return bad(format!("host_service_seconds_per_call must be non-negative, got {h}"));
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(n + 1, format!("expected key=value, got {line:?}")))?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Parses a config file over the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
        }
        // integers may be written in float notation, e.g. 512e3
        fn int(key: &str, v: &str) -> Result<u64> {
            v.parse::<u64>().or_else(|_| {
                let f: f64 = num(key, v)?;
                if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
                    Ok(f as u64)
                } else {
                    Err(Error::Config(format!("bad integer {v:?} for {key}")))
                }
            })
        }
        match key {
            "pes_per_lane" => self.pes_per_lane = int(key, value)? as usize,
            "lanes" => self.lanes = int(key, value)? as usize,
            "freq_hz" => self.freq_hz = num(key, value)?,
            "lmm_bytes_per_lane" => self.lmm_bytes_per_lane = int(key, value)?,
            "host_cores" => self.host_cores = int(key, value)? as usize,
            "load_bw_bytes_per_cycle" => self.load_bw_bytes_per_cycle = num(key, value)?,
            "drain_bw_bytes_per_cycle" => self.drain_bw_bytes_per_cycle = num(key, value)?,
            "conf_cycles" => self.conf_cycles = int(key, value)?,
            "regv_cycles" => self.regv_cycles = int(key, value)?,
            "range_cycles" => self.range_cycles = int(key, value)?,
            "host_service_seconds_per_call" => self.host_service_seconds_per_call = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pes_per_lane={}", self.pes_per_lane);
        let _ = writeln!(s, "lanes={}", self.lanes);
        let _ = writeln!(s, "freq_hz={}", self.freq_hz);
        let _ = writeln!(s, "lmm_bytes_per_lane={}", self.lmm_bytes_per_lane);
        let _ = writeln!(s, "host_cores={}", self.host_cores);
        let _ = writeln!(s, "load_bw_bytes_per_cycle={}", self.load_bw_bytes_per_cycle);
        let _ = writeln!(s, "drain_bw_bytes_per_cycle={}", self.drain_bw_bytes_per_cycle);
        let _ = writeln!(s, "conf_cycles={}", self.conf_cycles);
        let _ = writeln!(s, "regv_cycles={}", self.regv_cycles);
        let _ = writeln!(s, "range_cycles={}", self.range_cycles);
        let _ = writeln!(s, "host_service_seconds_per_call={}", self.host_service_seconds_per_call);
        s
    }
}
