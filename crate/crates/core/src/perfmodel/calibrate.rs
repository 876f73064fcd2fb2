//! Calibrating the end-to-end composition from measured latencies.
//!
//! With host-only time `T_h`, measured accelerated time `T_a` and host time
//! `H` spent in the offloaded kernel, the accelerator-side time (kernel plus
//! transfers) is `A = T_a − T_h + H`. Projecting to a faster clock divides
//! `A` by the clock ratio, giving `T_h − H + A·f_from/f_to`.

use serde::Serialize;

use super::{e2e_compose, freq_projection, E2EInputs};
use crate::kernels::KernelTag;
use crate::machine::{ASIC_FREQ_HZ, FPGA_FREQ_HZ};
use crate::{Error, Result};

/// Share of dot-product time in the Q3_K kernel for the Q3_K model.
pub const DOT_SHARE_Q3_K: f64 = 0.103;
/// Share of dot-product time in the Q8_0 kernel for the Q8_0 model.
pub const DOT_SHARE_Q8_0: f64 = 0.163;

/// Measured latencies for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct E2EObservation {
    pub kernel: KernelTag,
    pub host_only_s: f64,
    pub accelerated_s: f64,
    /// Share of the model's dot-product time spent in the offloaded kernel.
    pub kernel_dot_share: f64,
    /// Projected latency to compare against, if known.
    pub target_s: Option<f64>,
}

/// Both models as measured on the host ARM and the 145 MHz FPGA, with the
/// reported 840 MHz projections as targets.
pub fn reference_observations() -> [E2EObservation; 2] {
    [
        E2EObservation {
            kernel: KernelTag::Q3K,
            host_only_s: 809.7,
            accelerated_s: 790.3,
            kernel_dot_share: DOT_SHARE_Q3_K,
            target_s: Some(754.5),
        },
        E2EObservation {
            kernel: KernelTag::Q8_0,
            host_only_s: 625.1,
            accelerated_s: 654.7,
            kernel_dot_share: DOT_SHARE_Q8_0,
            target_s: Some(558.0),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedModel {
    pub kernel: KernelTag,
    pub host_only_s: f64,
    pub accelerated_s: f64,
    pub kernel_dot_share: f64,
    /// `kernel_dot_share · dot_share`.
    pub offload_fraction: f64,
    /// Host time of the offloaded kernel, `H`.
    pub host_kernel_s: f64,
    /// Accelerator-side time at the source clock, `A`.
    pub accel_s: f64,
    /// `A` at the target clock.
    pub projected_accel_s: f64,
    pub predicted_s: f64,
    pub target_s: Option<f64>,
    /// `(predicted − target) / target`.
    pub rel_error: Option<f64>,
}

impl CalibratedModel {
    /// Composition inputs at the target clock.
    pub fn projected_inputs(&self) -> E2EInputs {
        E2EInputs::new(self.host_only_s, self.offload_fraction, self.projected_accel_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// Fitted share of host time spent in quantized dot products.
    pub dot_share: f64,
    pub f_from_hz: f64,
    pub f_to_hz: f64,
    /// `f_to / f_from`.
    pub speedup: f64,
    pub models: Vec<CalibratedModel>,
}

impl Calibration {
    pub fn model(&self, kernel: KernelTag) -> Option<&CalibratedModel> {
        self.models.iter().find(|m| m.kernel == kernel)
    }
}

fn project(o: &E2EObservation, dot_share: f64, f_from: f64, f_to: f64) -> Result<CalibratedModel> {
    let offload_fraction = o.kernel_dot_share * dot_share;
    let host_kernel_s = o.host_only_s * offload_fraction;
    let accel_s = o.accelerated_s - o.host_only_s + host_kernel_s;
    if accel_s < 0.0 {
        return Err(Error::InvalidInput(format!(
            "{}: accelerated run saves more than the offloaded host time",
            o.kernel
        )));
    }
    let projected_accel_s = freq_projection(accel_s, f_from, f_to)?;
    let predicted_s = e2e_compose(&E2EInputs::new(o.host_only_s, offload_fraction, projected_accel_s))?;
    Ok(CalibratedModel {
        kernel: o.kernel,
        host_only_s: o.host_only_s,
        accelerated_s: o.accelerated_s,
        kernel_dot_share: o.kernel_dot_share,
        offload_fraction,
        host_kernel_s,
        accel_s,
        projected_accel_s,
        predicted_s,
        target_s: o.target_s,
        rel_error: o.target_s.map(|t| (predicted_s - t) / t),
    })
}

/// Fits one dot-product share shared by all observations.
///
/// The predicted latency is affine in the share, so the value minimising the
/// summed squared relative error over the observations with targets has a
/// closed form. Without targets, the share defaults to 1.
pub fn calibrate_joint(obs: &[E2EObservation], f_from: f64, f_to: f64) -> Result<Calibration> {
    let ratio = freq_projection(1.0, f_from, f_to)?;
    let (mut num, mut den) = (0.0, 0.0);
    for o in obs {
        if let Some(t) = o.target_s {
            // predicted(p) = c − p·b
            let c = o.host_only_s + (o.accelerated_s - o.host_only_s) * ratio;
            let b = o.host_only_s * o.kernel_dot_share * (1.0 - ratio);
            num += (c - t) / t * (b / t);
            den += (b / t) * (b / t);
        }
    }
    let dot_share = if den > 0.0 { num / den } else { 1.0 };
    if !(0.0..=1.0).contains(&dot_share) {
        return Err(Error::InvalidInput(format!("fitted dot-product share {dot_share} is outside [0, 1]")));
    }
    let models = obs
        .iter()
        .map(|o| project(o, dot_share, f_from, f_to))
        .collect::<Result<_>>()?;
    Ok(Calibration {
        dot_share,
        f_from_hz: f_from,
        f_to_hz: f_to,
        speedup: f_to / f_from,
        models,
    })
}

/// Exact solution from one model's three latencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointCalibration {
    /// Accelerator-side time at the source clock.
    pub accel_s: f64,
    /// Host time of the offloaded kernel.
    pub host_kernel_s: f64,
    pub offload_fraction: f64,
}

/// Solves `T_a = T_h − H + A` and `T_p = T_h − H + A·f_from/f_to` for `A` and `H`.
pub fn calibrate_two_point(host_only_s: f64, accelerated_s: f64, projected_s: f64, f_from: f64, f_to: f64) -> Result<TwoPointCalibration> {
    let ratio = freq_projection(1.0, f_from, f_to)?;
    if ratio >= 1.0 {
        return Err(Error::InvalidInput("target clock must be faster than the source clock".into()));
    }
    let accel_s = (accelerated_s - projected_s) / (1.0 - ratio);
    let host_kernel_s = host_only_s - accelerated_s + accel_s;
    Ok(TwoPointCalibration {
        accel_s,
        host_kernel_s,
        offload_fraction: host_kernel_s / host_only_s,
    })
}

/// Joint calibration of [`reference_observations`] from 145 MHz to 840 MHz.
pub(crate) fn reference_calibration() -> Calibration {
    calibrate_joint(&reference_observations(), FPGA_FREQ_HZ, ASIC_FREQ_HZ).expect("reference latencies calibrate")
}
