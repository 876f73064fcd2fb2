use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context as _};
use qcgla::kernels::{default_mapping, matvec, KernelTag};
use qcgla::machine::{parse_trace, phase_times, saturation_knee, simulate_trace, sweep_lanes, write_trace, KernelCall, PhaseBreakdown, SimReport, SweepRow};
use qcgla::perfmodel::{builtin_devices, calibrate_joint, compare_report, reference_observations, reference_scenario, parse_scenario_file, Calibration, CompareRow};
use qcgla::machine::{ASIC_FREQ_HZ, FPGA_FREQ_HZ};
use qcgla::quant::{DType, QuantizedTensor, QCGT_MAGIC};
use serde::Serialize;

use crate::args::{BenchArgs, CheckArgs, Cli, Command, CompareArgs, DequantizeArgs, Format, GenTraceArgs, KernelChoice, Preset, QuantizeArgs, SweepArgs, TraceArgs};
use crate::check::{self, CheckOptions};
use crate::gen::{self, TraceKernel};
use crate::svg::BarChart;
use crate::{read_text, resolve_config, to_csv, to_json, Ctx, EXIT_CHECK_FAILED};

pub(crate) fn dispatch(cli: &Cli, ctx: &mut Ctx<'_>) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Quantize(a) => quantize(a, ctx),
        Command::Dequantize(a) => dequantize(a, ctx),
        Command::Check(a) => check(cli, a, ctx),
        Command::Bench(a) => bench(cli, a, ctx),
        Command::Simulate(a) => simulate(cli, a, ctx),
        Command::SweepLanes(a) => sweep(cli, a, ctx),
        Command::ComparePdp(a) => compare(a, ctx),
        Command::GenTrace(a) => gen_trace(cli, a, ctx),
    }
    .map(|()| 0)
    .or_else(|e| match e.downcast::<CheckFailed>() {
        Ok(_) => Ok(EXIT_CHECK_FAILED),
        Err(e) => Err(e),
    })
}

#[derive(Debug)]
struct CheckFailed;

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("check failed")
    }
}

impl std::error::Error for CheckFailed {}

fn read_tensor(path: &Path, cols: Option<usize>, rows: Option<usize>) -> anyhow::Result<QuantizedTensor> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(&QCGT_MAGIC) {
        return QuantizedTensor::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()));
    }
    let Some(cols) = cols else {
        bail!("{} is not a QCGT file; pass --cols to read it as raw binary32", path.display());
    };
    if bytes.len() % 4 != 0 {
        bail!("{}: {} bytes is not a whole number of binary32 values", path.display(), bytes.len());
    }
    let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    if cols == 0 || !values.len().is_multiple_of(cols) {
        bail!("{} values do not fill rows of {cols}", values.len());
    }
    let n = values.len() / cols;
    if let Some(r) = rows.filter(|&r| r != n) {
        bail!("--rows {r} but the file holds {n} rows of {cols}");
    }
    Ok(QuantizedTensor::from_f32(n, cols, values)?)
}

fn default_out(ctx: &Ctx<'_>, input: &Path, suffix: &str) -> PathBuf {
    ctx.out_path.clone().unwrap_or_else(|| {
        let mut s = input.as_os_str().to_owned();
        s.push(suffix);
        s.into()
    })
}

fn quantize(a: &QuantizeArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    let x = read_tensor(&a.input, a.cols, a.rows)?;
    if x.dtype() != DType::F32 {
        bail!("{} already holds {} data", a.input.display(), x.dtype());
    }
    let q = x.quantize(a.dtype)?;
    let out = default_out(ctx, &a.input, &format!(".{}.qcgt", a.dtype));
    std::fs::write(&out, q.to_bytes()).with_context(|| format!("writing {}", out.display()))?;
    let (src, dst) = (4 * a.dtype.block_len(), a.dtype.block_bytes());
    let mut s = String::new();
    writeln!(s, "dtype: {}", a.dtype)?;
    writeln!(s, "shape: {}x{}", q.rows(), q.cols())?;
    writeln!(s, "blocks: {}", q.block_count())?;
    writeln!(s, "compression: {src}/{dst} ({:.3}x)", src as f64 / dst as f64)?;
    writeln!(s, "wrote: {}", out.display())?;
    ctx.stdout.write_all(s.as_bytes())?;
    Ok(())
}

fn dequantize(a: &DequantizeArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    let q = read_tensor(&a.input, None, None)?;
    let x = q.dequantize();
    let out = default_out(ctx, &a.input, if a.raw { ".f32" } else { ".f32.qcgt" });
    let bytes = if a.raw {
        match x.data() {
            qcgla::quant::TensorData::F32(v) => v.iter().flat_map(|f| f.to_le_bytes()).collect(),
            _ => unreachable!("dequantize yields f32"),
        }
    } else {
        x.to_bytes()
    };
    std::fs::write(&out, bytes).with_context(|| format!("writing {}", out.display()))?;
    writeln!(ctx.stdout, "dequantized {} {}x{} to {}", q.dtype(), q.rows(), q.cols(), out.display())?;
    Ok(())
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    seed: u64,
    trials: usize,
    suites: &'a [check::SuiteReport],
    repack_accuracy: &'a check::AccuracyStats,
    passed: bool,
}

fn check(cli: &Cli, a: &CheckArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    if a.trials == 0 {
        ctx.warn("--trials 0: randomized suites pass vacuously");
    }
    let opts = CheckOptions {
        seed: cli.seed,
        trials: a.trials,
        inject_fault: a.inject_fault,
    };
    let suites = check::run_suites(&opts);
    let acc = check::repack_accuracy(cli.seed, a.accuracy_trials, check::ACCURACY_K)?;
    let passed = suites.iter().all(|s| s.passed());

    let mut s = String::new();
    for r in &suites {
        let verdict = if r.passed() { "ok" } else { "FAILED" };
        writeln!(s, "{:<17} {}/{} passed  {verdict}", r.suite, r.checks - r.failures, r.checks)?;
    }
    writeln!(
        s,
        "repack-accuracy   median relative error {:.4}% over {} trials at k={} (mean {:.4}%, p90 {:.4}%, bound {}%, informational)",
        100.0 * acc.median_rel_err,
        acc.trials,
        acc.k,
        100.0 * acc.mean_rel_err,
        100.0 * acc.p90_rel_err,
        100.0 * check::ACCURACY_BOUND
    )?;
    if let Some((r, c)) = suites.iter().find_map(|r| r.first_failure.as_ref().map(|c| (r, c))) {
        writeln!(s, "counterexample: suite={} seed={} trial={} ({} failures)", r.suite, cli.seed, c.trial, r.failures)?;
        writeln!(s, "  {}", c.detail)?;
    }
    match ctx.format {
        Format::Csv => {
            ctx.stdout.write_all(s.as_bytes())?;
            if let Some(p) = &ctx.out_path {
                let rows: Vec<_> = suites.iter().map(|r| (r.suite, r.checks, r.failures, r.passed())).collect();
                std::fs::write(p, to_csv(&["suite", "checks", "failures", "passed"], &rows)?)?;
            }
        }
        Format::Json => {
            ctx.emit(
                to_json(&CheckOutput {
                    seed: cli.seed,
                    trials: a.trials,
                    suites: &suites,
                    repack_accuracy: &acc,
                    passed,
                })?
                .as_bytes(),
            )?;
            ctx.summary(&s)?;
        }
    }
    if passed {
        Ok(())
    } else {
        Err(CheckFailed.into())
    }
}

#[derive(Serialize)]
struct BenchRow {
    kernel: KernelTag,
    m: usize,
    k: usize,
    lanes: usize,
    iters: usize,
    wall_s_per_iter: f64,
    checksum: f64,
    model_exec_s: f64,
    model_total_s: f64,
}

const BENCH_HEADER: [&str; 9] = ["kernel", "m", "k", "lanes", "iters", "wall_s_per_iter", "checksum", "model_exec_s", "model_total_s"];

fn bench(cli: &Cli, a: &BenchArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    let cfg = resolve_config(cli)?;
    let call = KernelCall::new(a.kernel, a.m, a.k, true)?;
    let mut rng = gen::trial_rng(cli.seed, 0xbe, 0);
    let w = QuantizedTensor::from_f32(a.m, a.k, gen::gaussian(&mut rng, a.m * a.k))?.quantize(a.kernel.weight_dtype())?;
    let x = QuantizedTensor::from_f32(1, a.k, gen::gaussian(&mut rng, a.k))?.quantize(a.kernel.activation_dtype())?;
    let mapping = default_mapping(a.kernel);
    let iters = a.iters.max(1);
    let start = Instant::now();
    let mut y = Vec::new();
    for _ in 0..iters {
        y = matvec(&w, &x, &mapping, cfg.lanes)?;
    }
    let wall = start.elapsed().as_secs_f64() / iters as f64;
    let phases = phase_times(&call, &cfg, &mapping);
    let row = BenchRow {
        kernel: a.kernel,
        m: a.m,
        k: a.k,
        lanes: cfg.lanes,
        iters,
        wall_s_per_iter: wall,
        checksum: y.iter().map(|&v| v as f64).sum(),
        model_exec_s: phases.exec_s,
        model_total_s: phases.total(),
    };
    let data = match ctx.format {
        Format::Csv => to_csv(&BENCH_HEADER, std::slice::from_ref(&row))?,
        Format::Json => to_json(&row)?,
    };
    ctx.emit(data.as_bytes())?;
    ctx.summary(&format!(
        "{} {}x{} on {} lanes: {:.3} ms per matvec on this host, {:.3} ms modelled at {} Hz\n",
        a.kernel,
        a.m,
        a.k,
        cfg.lanes,
        1e3 * wall,
        1e3 * row.model_total_s,
        cfg.freq_hz
    ))
}

fn load_trace(path: &Path) -> anyhow::Result<Vec<KernelCall>> {
    parse_trace(&read_text(path)?).with_context(|| format!("trace {}", path.display()))
}

#[derive(Serialize)]
struct SimRow {
    record: &'static str,
    index: Option<usize>,
    lane: Option<usize>,
    kernel: Option<KernelTag>,
    m: Option<usize>,
    k: Option<usize>,
    reconf: Option<bool>,
    ready_s: Option<f64>,
    start_s: Option<f64>,
    end_s: Option<f64>,
    wait_s: Option<f64>,
    cpu_s: f64,
    conf_s: f64,
    regv_s: f64,
    range_s: f64,
    load_s: f64,
    exec_s: f64,
    drain_s: f64,
    total_s: f64,
}

const SIM_HEADER: [&str; 19] = [
    "record", "index", "lane", "kernel", "m", "k", "reconf", "ready_s", "start_s", "end_s", "wait_s", "cpu_s", "conf_s", "regv_s", "range_s", "load_s", "exec_s", "drain_s",
    "total_s",
];

impl SimRow {
    fn summary(record: &'static str, p: &PhaseBreakdown) -> Self {
        SimRow {
            record,
            index: None,
            lane: None,
            kernel: None,
            m: None,
            k: None,
            reconf: None,
            ready_s: None,
            start_s: None,
            end_s: None,
            wait_s: None,
            cpu_s: p.cpu_s,
            conf_s: p.conf_s,
            regv_s: p.regv_s,
            range_s: p.range_s,
            load_s: p.load_s,
            exec_s: p.exec_s,
            drain_s: p.drain_s,
            total_s: p.total(),
        }
    }
}

fn sim_rows(r: &SimReport) -> Vec<SimRow> {
    let mut rows: Vec<SimRow> = r
        .calls
        .iter()
        .map(|c| SimRow {
            index: Some(c.index),
            lane: Some(c.lane),
            kernel: Some(c.call.kernel),
            m: Some(c.call.m),
            k: Some(c.call.k),
            reconf: Some(c.call.reconf),
            ready_s: Some(c.ready_s),
            start_s: Some(c.start_s),
            end_s: Some(c.end_s),
            wait_s: Some(c.wait_s),
            ..SimRow::summary("call", &c.phases)
        })
        .collect();
    if r.calls.is_empty() {
        return rows;
    }
    rows.extend(r.per_lane.iter().enumerate().map(|(lane, p)| SimRow {
        lane: Some(lane),
        ..SimRow::summary("lane", p)
    }));
    rows.extend(r.per_kernel.iter().map(|(&kernel, p)| SimRow {
        kernel: Some(kernel),
        ..SimRow::summary("kernel", p)
    }));
    rows.push(SimRow {
        end_s: Some(r.makespan_s),
        ..SimRow::summary("aggregate", &r.aggregate)
    });
    rows
}

/// Share of each phase per kernel, in percent.
#[derive(Serialize)]
struct PhaseShare {
    kernel: String,
    calls: usize,
    cpu: f64,
    drain: f64,
    conf: f64,
    regv: f64,
    range: f64,
    load: f64,
    exec: f64,
}

fn phase_shares(r: &SimReport) -> Vec<PhaseShare> {
    let share = |kernel: String, calls: usize, p: &PhaseBreakdown| {
        let [cpu, conf, regv, range, load, exec, drain] = p.percentages();
        PhaseShare {
            kernel,
            calls,
            cpu,
            drain,
            conf,
            regv,
            range,
            load,
            exec,
        }
    };
    let mut out: Vec<_> = r
        .per_kernel
        .iter()
        .map(|(&k, p)| share(k.to_string(), r.calls.iter().filter(|c| c.call.kernel == k).count(), p))
        .collect();
    if !r.calls.is_empty() {
        out.push(share("all".into(), r.calls.len(), &r.aggregate));
    }
    out
}

fn shares_table(r: &SimReport) -> String {
    let mut s = format!(
        "makespan {:.6e} s on {} lanes, {} host cores, {} calls\n",
        r.makespan_s,
        r.lanes,
        r.host_cores,
        r.calls.len()
    );
    let _ = writeln!(s, "{:<6} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}", "kernel", "calls", "CPU%", "DRAIN%", "CONF%", "REGV%", "RANGE%", "LOAD%", "EXEC%");
    for p in phase_shares(r) {
        let _ = writeln!(
            s,
            "{:<6} {:>6} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            p.kernel, p.calls, p.cpu, p.drain, p.conf, p.regv, p.range, p.load, p.exec
        );
    }
    s
}

#[derive(Serialize)]
struct SimOutput<'a> {
    report: &'a SimReport,
    phase_percent: Vec<PhaseShare>,
}

fn simulate(cli: &Cli, a: &TraceArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    let cfg = resolve_config(cli)?;
    let trace = load_trace(&a.trace)?;
    let report = simulate_trace(&trace, &cfg)?;
    let data = match ctx.format {
        Format::Csv => to_csv(&SIM_HEADER, &sim_rows(&report))?,
        Format::Json => to_json(&SimOutput {
            report: &report,
            phase_percent: phase_shares(&report),
        })?,
    };
    ctx.emit(data.as_bytes())?;
    ctx.summary(&shares_table(&report))
}

#[derive(Serialize)]
struct SweepCsvRow {
    lanes: usize,
    makespan_s: f64,
    speedup: f64,
    marginal_speedup: f64,
    knee: bool,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    rows: &'a [SweepRow],
    knee: Option<usize>,
    knee_threshold: f64,
}

fn sweep(cli: &Cli, a: &SweepArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    let cfg = resolve_config(cli)?;
    let trace = load_trace(&a.trace)?;
    let rows = sweep_lanes(&trace, &cfg, 1..=cfg.lanes)?;
    let knee = saturation_knee(&rows);
    let data = match ctx.format {
        Format::Csv => {
            let csv_rows: Vec<_> = rows
                .iter()
                .map(|r| SweepCsvRow {
                    lanes: r.lanes,
                    makespan_s: r.makespan_s,
                    speedup: r.speedup,
                    marginal_speedup: r.marginal_speedup,
                    knee: knee == Some(r.lanes),
                })
                .collect();
            to_csv(&["lanes", "makespan_s", "speedup", "marginal_speedup", "knee"], &csv_rows)?
        }
        Format::Json => to_json(&SweepOutput {
            rows: &rows,
            knee,
            knee_threshold: qcgla::machine::KNEE_THRESHOLD,
        })?,
    };
    ctx.emit(data.as_bytes())?;
    if let Some(path) = &a.svg {
        let chart = BarChart {
            title: "Speedup by active lanes",
            y_label: "speedup",
            labels: rows.iter().map(|r| r.lanes.to_string()).collect(),
            values: rows.iter().map(|r| r.speedup).collect(),
            reference: Some(rows.iter().map(|r| r.lanes as f64 / rows[0].lanes as f64).collect()),
            highlight: knee.and_then(|k| rows.iter().position(|r| r.lanes == k)),
        };
        std::fs::write(path, chart.render()).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut s = String::new();
    for r in &rows {
        writeln!(s, "lanes {:>2}  makespan {:.6e} s  speedup {:.3}  marginal {:.3}", r.lanes, r.makespan_s, r.speedup, r.marginal_speedup)?;
    }
    match knee {
        Some(k) => writeln!(s, "saturation knee at {k} lanes (marginal speedup < {})", qcgla::machine::KNEE_THRESHOLD)?,
        None => writeln!(s, "no saturation knee")?,
    }
    ctx.summary(&s)
}

const COMPARE_HEADER: [&str; 12] = [
    "rank", "device", "scenario", "kernel", "latency_s", "power_w", "host", "host_w", "accel_time_s", "freq_hz", "energy_j", "pdp_j",
];

#[derive(Serialize)]
struct CompareCsvRow<'a> {
    rank: usize,
    device: &'a str,
    scenario: &'a str,
    kernel: KernelTag,
    latency_s: f64,
    power_w: f64,
    host: &'a str,
    host_w: f64,
    accel_time_s: f64,
    freq_hz: f64,
    energy_j: f64,
    pdp_j: f64,
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    rows: &'a [CompareRow],
    calibration: Option<&'a Calibration>,
}

fn compare(a: &CompareArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    let (devices, scenario, calibration) = match a.scenario.as_str() {
        "ref-q3_k" | "ref-q8_0" => {
            let tag = if a.scenario == "ref-q3_k" { KernelTag::Q3K } else { KernelTag::Q8_0 };
            let cal = calibrate_joint(&reference_observations(), FPGA_FREQ_HZ, ASIC_FREQ_HZ)?;
            (builtin_devices(), reference_scenario(tag), Some(cal))
        }
        path => {
            let f = parse_scenario_file(&read_text(Path::new(path))?).with_context(|| format!("scenario {path}"))?;
            (f.devices, f.scenario, None)
        }
    };
    let rows = compare_report(&devices, &scenario)?;
    let data = match ctx.format {
        Format::Csv => {
            let csv_rows: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| CompareCsvRow {
                    rank: i + 1,
                    device: &r.device,
                    scenario: &r.scenario,
                    kernel: r.kernel,
                    latency_s: r.latency_s,
                    power_w: r.power_w,
                    host: &r.host,
                    host_w: r.host_w,
                    accel_time_s: r.accel_time_s,
                    freq_hz: r.freq_hz,
                    energy_j: r.energy_j,
                    pdp_j: r.pdp_j,
                })
                .collect();
            to_csv(&COMPARE_HEADER, &csv_rows)?
        }
        Format::Json => to_json(&CompareOutput {
            rows: &rows,
            calibration: calibration.as_ref(),
        })?,
    };
    ctx.emit(data.as_bytes())?;

    let mut s = format!("{} ({})\n", scenario.name, scenario.kernel);
    writeln!(s, "{:>4}  {:<16} {:>10} {:>9} {:>12} {:>12}", "rank", "device", "latency_s", "power_w", "accel_s", "pdp_j")?;
    for (i, r) in rows.iter().enumerate() {
        writeln!(s, "{:>4}  {:<16} {:>10.1} {:>9.2} {:>12.2} {:>12.1}", i + 1, r.device, r.latency_s, r.power_w, r.accel_time_s, r.pdp_j)?;
    }
    if let Some(cal) = &calibration {
        writeln!(s, "calibration: dot-product share {:.4}, clock {} -> {} Hz ({:.4}x)", cal.dot_share, cal.f_from_hz, cal.f_to_hz, cal.speedup)?;
        for m in &cal.models {
            writeln!(
                s,
                "  {}: offload fraction {:.5}, host kernel {:.2} s, accel {:.2} s -> {:.2} s, predicted {:.2} s{}",
                m.kernel,
                m.offload_fraction,
                m.host_kernel_s,
                m.accel_s,
                m.projected_accel_s,
                m.predicted_s,
                match (m.target_s, m.rel_error) {
                    (Some(t), Some(e)) => format!(" vs {t} s ({:+.2}%)", 100.0 * e),
                    _ => String::new(),
                }
            )?;
        }
    }
    ctx.summary(&s)
}

fn gen_trace(cli: &Cli, a: &GenTraceArgs, ctx: &mut Ctx<'_>) -> anyhow::Result<()> {
    let fixed = |k: KernelChoice| match k {
        KernelChoice::Q8_0 => Some(KernelTag::Q8_0),
        KernelChoice::Q3K => Some(KernelTag::Q3K),
        KernelChoice::Mixed => None,
    };
    let trace = match a.preset {
        Preset::UnetLike => {
            let kernel = fixed(a.kernel).map_or(TraceKernel::Mixed, TraceKernel::Fixed);
            gen::unet_like_trace(cli.seed, a.count, kernel)?
        }
        Preset::Uniform => {
            let Some(tag) = fixed(a.kernel) else {
                bail!("the uniform preset needs a single kernel");
            };
            gen::uniform_trace(tag, a.m, a.k, a.count)?
        }
    };
    ctx.emit(write_trace(&trace).as_bytes())
}
