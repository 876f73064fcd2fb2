//! Multi-lane trace simulation with a shared pool of host cores.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{phase_times, KernelCall, MachineConfig, PhaseBreakdown};
use crate::kernels::{default_mapping, KernelMapping, KernelTag};
use crate::Result;

/// The mapping used for each kernel.
#[derive(Debug, Clone)]
pub struct MappingSet {
    pub q8_0: KernelMapping,
    pub q3_k: KernelMapping,
}

impl Default for MappingSet {
    fn default() -> Self {
        Self {
            q8_0: default_mapping(KernelTag::Q8_0),
            q3_k: default_mapping(KernelTag::Q3K),
        }
    }
}

impl MappingSet {
    pub fn get(&self, tag: KernelTag) -> &KernelMapping {
        match tag {
            KernelTag::Q8_0 => &self.q8_0,
            KernelTag::Q3K => &self.q3_k,
        }
    }
}

/// Timeline of one call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallRecord {
    pub index: usize,
    pub lane: usize,
    pub call: KernelCall,
    pub phases: PhaseBreakdown,
    /// When the lane asked for a host core.
    pub ready_s: f64,
    pub start_s: f64,
    pub end_s: f64,
    /// Time spent queued for a host core.
    pub wait_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub lanes: usize,
    pub host_cores: usize,
    pub makespan_s: f64,
    pub calls: Vec<CallRecord>,
    pub per_lane: Vec<PhaseBreakdown>,
    pub per_kernel: BTreeMap<KernelTag, PhaseBreakdown>,
    pub aggregate: PhaseBreakdown,
}

#[derive(Clone, Copy, PartialEq)]
enum Step {
    Setup,
    Drain,
}

struct LaneState {
    queue: std::vec::IntoIter<usize>,
    current: Option<usize>,
    step: Step,
    ready: f64,
}

/// Simulates `trace` with the shipped mappings.
pub fn simulate_trace(trace: &[KernelCall], config: &MachineConfig) -> Result<SimReport> {
    simulate_trace_with(trace, config, &MappingSet::default())
}

/// Simulates `trace`, assigning call `i` to lane `i mod lanes`.
///
/// Lanes run their calls in order. Setup and DRAIN each need a host core;
/// pending requests are served in order of the time they were raised (lane
/// index breaks ties), each by the core that frees up first (lowest index
/// on ties). EXEC runs on the lane without holding a core.
pub fn simulate_trace_with(trace: &[KernelCall], config: &MachineConfig, mappings: &MappingSet) -> Result<SimReport> {
    config.validate()?;
    for c in trace {
        c.validate()?;
    }
    let lanes = config.lanes;
    let phases: Vec<PhaseBreakdown> = trace
        .iter()
        .map(|c| phase_times(c, config, mappings.get(c.kernel)))
        .collect();

    let mut state: Vec<LaneState> = (0..lanes)
        .map(|lane| {
            let mut queue: std::vec::IntoIter<usize> = (lane..trace.len()).step_by(lanes).collect::<Vec<_>>().into_iter();
            let current = queue.next();
            LaneState {
                queue,
                current,
                step: Step::Setup,
                ready: 0.0,
            }
        })
        .collect();
    let mut cores = vec![0.0f64; config.host_cores];
    let mut records: Vec<Option<CallRecord>> = vec![None; trace.len()];

    loop {
        let Some(lane) = (0..lanes)
            .filter(|&l| state[l].current.is_some())
            .min_by(|&a, &b| state[a].ready.total_cmp(&state[b].ready).then(a.cmp(&b)))
        else {
            break;
        };
        let core = (0..cores.len())
            .min_by(|&a, &b| cores[a].total_cmp(&cores[b]).then(a.cmp(&b)))
            .expect("at least one host core");
        let s = &mut state[lane];
        let idx = s.current.expect("filtered above");
        let p = &phases[idx];
        let start = s.ready.max(cores[core]);
        match s.step {
            Step::Setup => {
                let done = start + p.pre_exec_s();
                cores[core] = done;
                records[idx] = Some(CallRecord {
                    index: idx,
                    lane,
                    call: trace[idx],
                    phases: *p,
                    ready_s: s.ready,
                    start_s: start,
                    end_s: f64::NAN,
                    wait_s: start - s.ready,
                });
                s.ready = done + p.exec_s;
                s.step = Step::Drain;
            }
            Step::Drain => {
                let done = start + p.drain_s;
                cores[core] = done;
                let r = records[idx].as_mut().expect("setup recorded first");
                r.end_s = done;
                r.wait_s += start - s.ready;
                s.ready = done;
                s.step = Step::Setup;
                s.current = s.queue.next();
            }
        }
    }

    let calls: Vec<CallRecord> = records.into_iter().map(|r| r.expect("every call simulated")).collect();
    let mut per_lane = vec![PhaseBreakdown::default(); lanes];
    let mut per_kernel = BTreeMap::new();
    for r in &calls {
        per_lane[r.lane] += r.phases;
        *per_kernel.entry(r.call.kernel).or_insert_with(PhaseBreakdown::default) += r.phases;
    }
    Ok(SimReport {
        lanes,
        host_cores: config.host_cores,
        makespan_s: calls.iter().map(|r| r.end_s).fold(0.0, f64::max),
        aggregate: calls.iter().map(|r| r.phases).sum(),
        calls,
        per_lane,
        per_kernel,
    })
}

/// Makespan at one lane count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lanes: usize,
    pub makespan_s: f64,
    /// Relative to the first row.
    pub speedup: f64,
    /// Against the previous row; 1 for the first.
    pub marginal_speedup: f64,
}

/// Marginal speedup below which adding a lane no longer pays.
pub const KNEE_THRESHOLD: f64 = 1.1;

/// Simulates `trace` at each lane count in `lanes`.
pub fn sweep_lanes(trace: &[KernelCall], config: &MachineConfig, lanes: impl IntoIterator<Item = usize>) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = Vec::new();
    for n in lanes {
        let cfg = MachineConfig { lanes: n, ..config.clone() };
        let makespan_s = simulate_trace(trace, &cfg)?.makespan_s;
        let ratio = |prev: f64| if makespan_s > 0.0 { prev / makespan_s } else { 1.0 };
        let (speedup, marginal_speedup) = match (rows.first(), rows.last()) {
            (Some(first), Some(last)) => (ratio(first.makespan_s), ratio(last.makespan_s)),
            _ => (1.0, 1.0),
        };
        rows.push(SweepRow {
            lanes: n,
            makespan_s,
            speedup,
            marginal_speedup,
        });
    }
    Ok(rows)
}

/// First lane count whose marginal speedup falls below [`KNEE_THRESHOLD`].
pub fn saturation_knee(rows: &[SweepRow]) -> Option<usize> {
    rows.iter().skip(1).find(|r| r.marginal_speedup < KNEE_THRESHOLD).map(|r| r.lanes)
}
