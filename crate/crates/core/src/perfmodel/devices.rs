//! Device profiles and ranked PDP comparisons.

use serde::Serialize;

use super::calibrate::reference_calibration;
use super::pdp;
use crate::kernels::KernelTag;
use crate::machine::{ASIC_FREQ_HZ, ASIC_TABLE_FREQ_HZ, FPGA_FREQ_HZ};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceProfile {
    pub name: String,
    pub power_q8_0_w: f64,
    pub power_q3_k_w: f64,
    pub freq_hz: f64,
    /// Host whose power is accrued for the whole run, for accelerators.
    pub host: Option<String>,
    pub source: String,
}

impl DeviceProfile {
    pub fn new(name: &str, power_w: f64, freq_hz: f64, host: Option<&str>, source: &str) -> Self {
        Self {
            name: name.to_string(),
            power_q8_0_w: power_w,
            power_q3_k_w: power_w,
            freq_hz,
            host: host.map(str::to_string),
            source: source.to_string(),
        }
    }

    pub fn power_w(&self, kernel: KernelTag) -> f64 {
        match kernel {
            KernelTag::Q8_0 => self.power_q8_0_w,
            KernelTag::Q3K => self.power_q3_k_w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_q8_0_w > 0.0 && self.power_q3_k_w > 0.0) {
            return Err(Error::InvalidInput(format!("device {}: power must be positive", self.name)));
        }
        if !(self.freq_hz > 0.0) {
            return Err(Error::InvalidInput(format!("device {}: frequency must be positive", self.name)));
        }
        Ok(())
    }
}

/// The compared devices. The GPU is charged its board power only.
pub fn builtin_devices() -> Vec<DeviceProfile> {
    let imax28 = |name: &str, freq, source| DeviceProfile {
        power_q8_0_w: 47.7,
        power_q3_k_w: 52.8,
        ..DeviceProfile::new(name, 47.7, freq, Some("arm-a72"), source)
    };
    vec![
        DeviceProfile::new("arm-a72", 1.5, 1.4e9, None, "ARM Cortex-A72 on Versal, 2 cores"),
        DeviceProfile::new("imax3-fpga", 180.0, FPGA_FREQ_HZ, Some("arm-a72"), "IMAX3 on Xilinx VPK180"),
        imax28("imax3-28nm", ASIC_FREQ_HZ, "IMAX3 28 nm estimate at the timing-analysis clock"),
        imax28("imax3-28nm-800", ASIC_TABLE_FREQ_HZ, "IMAX3 28 nm estimate at the listed clock"),
        DeviceProfile::new("xeon-w5", 200.0, 3.1e9, None, "Intel Xeon w5-2465X"),
        DeviceProfile::new("gtx-1080ti", 250.0, 1.48e9, None, "NVIDIA GTX 1080 Ti"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioEntry {
    pub device: String,
    pub latency_s: f64,
    /// Time the accelerator draws its own power; the whole latency if absent.
    pub accel_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub kernel: KernelTag,
    pub entries: Vec<ScenarioEntry>,
}

/// Reported end-to-end latencies for one model, with accelerator times
/// from the joint calibration.
pub fn reference_scenario(kernel: KernelTag) -> Scenario {
    let cal = reference_calibration();
    let m = cal.model(kernel).expect("both models calibrated");
    let e = |device: &str, latency_s, accel_time_s| ScenarioEntry {
        device: device.into(),
        latency_s,
        accel_time_s,
    };
    let entries = match kernel {
        KernelTag::Q3K => vec![
            e("arm-a72", 809.7, None),
            e("imax3-fpga", 790.3, Some(m.accel_s)),
            e("imax3-28nm", 754.5, Some(m.projected_accel_s)),
            e("xeon-w5", 59.3, None),
            e("gtx-1080ti", 16.2, None),
        ],
        KernelTag::Q8_0 => vec![
            e("arm-a72", 625.1, None),
            e("imax3-fpga", 654.7, Some(m.accel_s)),
            e("imax3-28nm", 558.0, Some(m.projected_accel_s)),
        ],
    };
    Scenario {
        name: format!("ref-{kernel}"),
        kernel,
        entries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub device: String,
    pub scenario: String,
    pub latency_s: f64,
    pub energy_j: f64,
    pub pdp_j: f64,
    pub kernel: KernelTag,
    pub power_w: f64,
    pub host: String,
    pub host_w: f64,
    pub accel_time_s: f64,
    pub freq_hz: f64,
}

/// Energy and PDP per scenario entry, sorted by PDP then device name.
///
/// Accelerators accrue host power for the whole latency and their own power
/// for the accelerator time; other devices accrue their power throughout.
pub fn compare_report(devices: &[DeviceProfile], scenario: &Scenario) -> Result<Vec<CompareRow>> {
    let find = |name: &str| {
        devices
            .iter()
            .rev()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown device {name:?}")))
    };
    let mut rows = Vec::with_capacity(scenario.entries.len());
    for e in &scenario.entries {
        let dev = find(&e.device)?;
        dev.validate()?;
        let power_w = dev.power_w(scenario.kernel);
        let (host, host_w, accel_time_s, energy_j) = match &dev.host {
            Some(h) => {
                let host_w = find(h)?.power_w(scenario.kernel);
                let accel = e.accel_time_s.unwrap_or(e.latency_s);
                if accel > e.latency_s {
                    return Err(Error::InvalidInput(format!("{}: accelerator time exceeds latency", e.device)));
                }
                (h.clone(), host_w, accel, pdp(e.latency_s, host_w)? + pdp(accel, power_w)?)
            }
            None => {
                if e.accel_time_s.is_some() {
                    return Err(Error::InvalidInput(format!("{} has no host; accel_time_s does not apply", e.device)));
                }
                (String::new(), 0.0, e.latency_s, pdp(e.latency_s, power_w)?)
            }
        };
        rows.push(CompareRow {
            device: e.device.clone(),
            scenario: scenario.name.clone(),
            latency_s: e.latency_s,
            energy_j,
            pdp_j: energy_j,
            kernel: scenario.kernel,
            power_w,
            host,
            host_w,
            accel_time_s,
            freq_hz: dev.freq_hz,
        });
    }
    rows.sort_by(|a, b| a.pdp_j.total_cmp(&b.pdp_j).then_with(|| a.device.cmp(&b.device)));
    Ok(rows)
}

/// Device profiles (builtins first, then file-defined) and one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub devices: Vec<DeviceProfile>,
    pub scenario: Scenario,
}

/// Parses a sectioned `key=value` scenario file:
///
/// ```text
/// [scenario]
/// name = edge-q3k
/// kernel = q3_k
/// [profile my-npu]      # optional extra devices
/// power_w = 12
/// host = arm-a72
/// [device my-npu]
/// latency_s = 300
/// accel_time_s = 20
/// ```
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile> {
    enum Section {
        None,
        Scenario,
        Profile(usize),
        Device(usize),
    }
    let mut devices = builtin_devices();
    let builtin = devices.len();
    let mut scenario = Scenario {
        name: "custom".into(),
        kernel: KernelTag::Q3K,
        entries: Vec::new(),
    };
    let mut section = Section::None;
    for (n, raw) in text.lines().enumerate() {
        let err = |msg: String| Error::parse(n + 1, msg);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let mut parts = header.split_whitespace();
            section = match (parts.next(), parts.next(), parts.next()) {
                (Some("scenario"), None, _) => Section::Scenario,
                (Some("profile"), Some(name), None) => {
                    devices.push(DeviceProfile::new(name, 0.0, 1.0, None, "scenario file"));
                    Section::Profile(devices.len() - 1)
                }
                (Some("device"), Some(name), None) => {
                    scenario.entries.push(ScenarioEntry {
                        device: name.into(),
                        latency_s: f64::NAN,
                        accel_time_s: None,
                    });
                    Section::Device(scenario.entries.len() - 1)
                }
                _ => return Err(err(format!("unknown section [{header}]"))),
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
        let num = || value.parse::<f64>().map_err(|_| err(format!("bad number {value:?} for {key}")));
        match &section {
            Section::None => return Err(err("key outside a section".into())),
            Section::Scenario => match key {
                "name" => scenario.name = value.into(),
                "kernel" => scenario.kernel = value.parse().map_err(|e: Error| err(e.to_string()))?,
                _ => return Err(err(format!("unknown scenario key {key:?}"))),
            },
            Section::Profile(i) => {
                let d = &mut devices[*i];
                match key {
                    "power_w" => {
                        d.power_q8_0_w = num()?;
                        d.power_q3_k_w = d.power_q8_0_w;
                    }
                    "power_q8_0_w" => d.power_q8_0_w = num()?,
                    "power_q3_k_w" => d.power_q3_k_w = num()?,
                    "freq_hz" => d.freq_hz = num()?,
                    "host" => d.host = Some(value.into()),
                    "source" => d.source = value.into(),
                    _ => return Err(err(format!("unknown profile key {key:?}"))),
                }
            }
            Section::Device(i) => {
                let e = &mut scenario.entries[*i];
                match key {
                    "latency_s" => e.latency_s = num()?,
                    "accel_time_s" => e.accel_time_s = Some(num()?),
                    _ => return Err(err(format!("unknown device key {key:?}"))),
                }
            }
        }
    }
    for d in &devices[builtin..] {
        d.validate()?;
    }
    for e in &scenario.entries {
        if !(e.latency_s >= 0.0) {
            return Err(Error::InvalidInput(format!("device {} needs a non-negative latency_s", e.device)));
        }
    }
    Ok(ScenarioFile { devices, scenario })
}
