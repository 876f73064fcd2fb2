//! One test per acceptance criterion. Each prints a single PASS/FAIL line to
//! the terminal whether or not the test harness captures output.

use std::io::Write as _;
use std::time::Instant;

use qcgla::isa::{op_ad24, Word64, I24_MAX};
use qcgla::kernels::{default_mapping, KernelMapping, KernelTag};
use qcgla::machine::{simulate_trace, write_trace, KernelCall, MachineConfig, ASIC_FREQ_HZ, FPGA_FREQ_HZ};
use qcgla::perfmodel::{calibrate_joint, e2e_compose, reference_observations};
use qcgla::quant::{repack_q3_k, repack_scale, DType, QuantizedTensor, SuperblockQ3K, QK_K};
use qcgla::Error;
use qcgla_cli::{check, gen};

const SEED: u64 = 42;

fn verdict(id: u32, title: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id:>2}: {title}: {detail}");
    assert!(ok, "criterion {id} ({title}) failed: {detail}");
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("qcgla").chain(args.iter().copied());
    let code = qcgla_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records().map(|x| x.unwrap()).collect()
}

fn column(text: &str, name: &str) -> usize {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn criterion_01_bit_exact_kernels() {
    let start = Instant::now();
    let trials = 10_000;
    let q8 = check::q8_0_bitexact(SEED, trials, false);
    let q3 = check::q3_k_bitexact(SEED, trials);
    let secs = start.elapsed().as_secs_f64();
    let ok = q8.passed() && q3.passed() && q8.checks == trials && q3.checks == trials && secs < 60.0;
    verdict(
        1,
        "bit-exact kernel equivalence",
        ok,
        &format!(
            "q8_0 {}/{}, q3_k {}/{} sequences (k up to {}) in {secs:.1} s; first failure {:?}",
            q8.checks - q8.failures,
            q8.checks,
            q3.checks - q3.failures,
            q3.checks,
            check::MAX_K,
            q8.first_failure.as_ref().or(q3.first_failure.as_ref()).map(|c| c.trial)
        ),
    );
}

#[test]
fn criterion_02_repack_bound() {
    let mut bad = Vec::new();
    for code in 0..64u8 {
        let err = 2 * repack_scale(code) - (code as i32 - 32);
        if err.abs() > 1 {
            bad.push(format!("scale {code}: {err}"));
        }
    }
    let mut rng = gen::trial_rng(SEED, 0xacc, 2);
    let base = gen::rand_q3_k(&mut rng);
    let mut preserved = 0;
    for pos in 0..QK_K {
        for code in 0..8u8 {
            let mut b = base.clone();
            b.quants[pos] = code;
            if repack_q3_k(&b).code(pos) == code {
                preserved += 1;
            } else {
                bad.push(format!("quant {code} at {pos}"));
            }
        }
    }
    verdict(
        2,
        "repack bound",
        bad.is_empty(),
        &format!("64/64 scale codes within 1 of 2*s5: {}, {preserved}/{} quant codes preserved; {:?}", bad.iter().all(|b| !b.starts_with("scale")), 8 * QK_K, bad.first()),
    );
}

#[test]
fn criterion_03_overflow_safety() {
    let stress = check::overflow_stress(SEED, 10_000);
    let max = Word64::splat_i24(I24_MAX).unwrap();
    let one = Word64::splat_i24(1).unwrap();
    let boundary = matches!(op_ad24(max, one), Err(Error::Overflow24 { .. }));
    let at_limit = op_ad24(Word64::splat_i24(I24_MAX - 1).unwrap(), one).is_ok_and(|w| w.i24(0) == I24_MAX);
    verdict(
        3,
        "overflow safety",
        stress.passed() && boundary && at_limit,
        &format!(
            "{}/{} extreme-value cases clean through the kernel entry points; 8388607+1 errors: {boundary}; 8388606+1 = 8388607: {at_limit}",
            stress.checks - stress.failures,
            stress.checks
        ),
    );
}

#[test]
fn criterion_04_repack_accuracy() {
    let stats = check::repack_accuracy(SEED, 1000, 4096).unwrap();
    let (code, out, _) = cli(&["check", "--trials", "1", "--accuracy-trials", "1000"]);
    let reported = format!("median relative error {:.4}%", 100.0 * stats.median_rel_err);
    let in_output = code == 0 && out.contains(&reported);
    verdict(
        4,
        "repacked accuracy",
        stats.median_rel_err <= 0.02 && in_output,
        &format!(
            "median relative error {:.3}% over {} Gaussian trials at k={} (bound 2%); reported by check: {in_output}",
            100.0 * stats.median_rel_err,
            stats.trials,
            stats.k
        ),
    );
}

#[test]
fn criterion_05_frequency_projection() {
    let trace = gen::unet_like_trace(SEED, 40, gen::TraceKernel::Mixed).unwrap();
    let at = |f: f64| {
        let cfg = MachineConfig {
            freq_hz: f,
            ..MachineConfig::default()
        };
        simulate_trace(&trace, &cfg).unwrap()
    };
    let (slow, fast) = (at(FPGA_FREQ_HZ), at(ASIC_FREQ_HZ));
    let want = 840.0 / 145.0;
    let worst = slow
        .calls
        .iter()
        .zip(&fast.calls)
        .map(|(a, b)| (a.phases.exec_s / b.phases.exec_s - want).abs())
        .chain([(slow.aggregate.exec_s / fast.aggregate.exec_s - want).abs()])
        .fold(0.0f64, f64::max);
    verdict(
        5,
        "frequency projection",
        worst <= 1e-9,
        &format!("exec-phase ratio 145 MHz / 840 MHz = {want:.6} (worst deviation {worst:.2e} over {} calls)", trace.len()),
    );
}

#[test]
fn criterion_06_pdp_arithmetic() {
    let (code, out, err) = cli(&["compare-pdp", "ref-q3_k"]);
    assert_eq!(code, 0, "{err}");
    let (dev, pdp) = (column(&out, "device"), column(&out, "pdp_j"));
    let rows = csv_rows(&out);
    let pdp_of = |name: &str| rows.iter().find(|r| &r[dev] == name).map(|r| r[pdp].parse::<f64>().unwrap());
    let rank = |name: &str| rows.iter().position(|r| &r[dev] == name);
    let (gpu, xeon) = (pdp_of("gtx-1080ti"), pdp_of("xeon-w5"));
    let order = [rank("arm-a72"), rank("imax3-28nm"), rank("gtx-1080ti"), rank("xeon-w5")];
    let ordered = order.iter().all(Option::is_some) && order.windows(2).all(|w| w[0] < w[1]);
    verdict(
        6,
        "PDP arithmetic",
        gpu == Some(4050.0) && xeon == Some(11860.0) && ordered,
        &format!(
            "GPU {gpu:?} J, Xeon {xeon:?} J, IMAX-28nm {:?} J, ARM {:?} J; ARM < IMAX-28nm < GPU < Xeon: {ordered}",
            pdp_of("imax3-28nm"),
            pdp_of("arm-a72")
        ),
    );
}

#[test]
fn criterion_07_e2e_composition() {
    let cal = calibrate_joint(&reference_observations(), FPGA_FREQ_HZ, ASIC_FREQ_HZ).unwrap();
    let q3 = cal.model(KernelTag::Q3K).unwrap();
    let q8 = cal.model(KernelTag::Q8_0).unwrap();
    let e3 = (e2e_compose(&q3.projected_inputs()).unwrap() - 754.5) / 754.5;
    let e8 = (e2e_compose(&q8.projected_inputs()).unwrap() - 558.0) / 558.0;

    let (code, out, _) = cli(&["compare-pdp", "ref-q3_k", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    let keys = ["offload_fraction", "host_kernel_s", "accel_s", "projected_accel_s", "predicted_s", "rel_error"];
    let exposed = code == 0
        && json["calibration"]["dot_share"].is_f64()
        && json["calibration"]["models"].as_array().is_some_and(|m| m.len() == 2 && m.iter().all(|x| keys.iter().all(|k| x[k].is_f64())));
    verdict(
        7,
        "E2E composition",
        e3.abs() <= 0.01 && e8.abs() <= 0.02 && exposed,
        &format!(
            "joint dot share {:.4}: Q3_K {:.2} s vs 754.5 ({:+.2}%), Q8_0 {:.2} s vs 558.0 ({:+.2}%); intermediates exposed: {exposed}",
            cal.dot_share,
            q3.predicted_s,
            100.0 * e3,
            q8.predicted_s,
            100.0 * e8
        ),
    );
}

fn sweep(trace: &[KernelCall], config: Option<&str>) -> (Vec<f64>, Option<usize>) {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("t.jsonl");
    std::fs::write(&tp, write_trace(trace)).unwrap();
    let mut args = vec!["sweep-lanes".to_string(), tp.display().to_string(), "--host-cores".into(), "2".into()];
    if let Some(c) = config {
        let cp = dir.path().join("m.cfg");
        std::fs::write(&cp, c).unwrap();
        args.extend(["--config".into(), cp.display().to_string()]);
    }
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, out, err) = cli(&argv);
    assert_eq!(code, 0, "{err}");
    let (s, k, l) = (column(&out, "speedup"), column(&out, "knee"), column(&out, "lanes"));
    let rows = csv_rows(&out);
    let speedups = rows.iter().map(|r| r[s].parse().unwrap()).collect();
    let knee = rows.iter().find(|r| &r[k] == "true").map(|r| r[l].parse().unwrap());
    (speedups, knee)
}

#[test]
fn criterion_08_lane_scaling_shape() {
    let host_bound = gen::uniform_trace(KernelTag::Q8_0, 16, 1024, 200).unwrap();
    let (hs, hknee) = sweep(&host_bound, Some("host_service_seconds_per_call = 1e-3\n"));
    let exec_bound = gen::uniform_trace(KernelTag::Q3K, 1024, 4096, 64).unwrap();
    let (es, _) = sweep(&exec_bound, None);
    verdict(
        8,
        "lane-scaling shape",
        hs.len() == 8 && hs[1] >= 1.8 && hknee == Some(3) && es.len() == 8 && es[7] >= 6.0,
        &format!(
            "host-bound: {:.3}x at 2 lanes, knee at {hknee:?}; exec-bound: {:.3}x at 8 lanes",
            hs[1], es[7]
        ),
    );
}

#[test]
fn criterion_09_format_round_trips() {
    let mut bad_blocks = 0;
    for t in 0..10_000 {
        let b = gen::rand_q3_k(&mut gen::trial_rng(SEED, 0x909, t));
        let p = b.pack();
        if !SuperblockQ3K::unpack(&p).is_ok_and(|u| u.pack() == p) {
            bad_blocks += 1;
        }
    }
    let mut files = 0;
    let mut bad_files = 0;
    let mut rng = gen::trial_rng(SEED, 0x909, u64::MAX);
    for dtype in DType::ALL {
        for (rows, blocks) in [(1, 1), (3, 2), (2, 5)] {
            let cols = blocks * dtype.block_len();
            let x = QuantizedTensor::from_f32(rows, cols, gen::gaussian(&mut rng, rows * cols)).unwrap().quantize(dtype).unwrap();
            let mut first = Vec::new();
            x.write_to(&mut first).unwrap();
            let back = QuantizedTensor::read_from(first.as_slice()).unwrap();
            let mut second = Vec::new();
            back.write_to(&mut second).unwrap();
            files += 1;
            bad_files += usize::from(first != second || back != x);
        }
    }
    verdict(
        9,
        "format round-trips",
        bad_blocks == 0 && bad_files == 0,
        &format!("{}/10000 superblocks pack->unpack->pack identical; {}/{files} QCGT files write->read->write identical", 10_000 - bad_blocks, files - bad_files),
    );
}

#[test]
fn criterion_10_mapping_totals() {
    let q8 = default_mapping(KernelTag::Q8_0);
    let q3 = default_mapping(KernelTag::Q3K);
    let revalidates = |m: &KernelMapping| {
        KernelMapping::new(m.tag(), m.stages().to_vec()).is_ok() && KernelMapping::parse(m.tag(), &m.to_descriptor()).is_ok_and(|p| &p == m)
    };
    let ok = q8.pe_count() == 46 && q3.pe_count() == 51 && revalidates(&q8) && revalidates(&q3);
    verdict(
        10,
        "mapping totals",
        ok,
        &format!("q8_0 {} PEs, q3_k {} PEs, acyclic validation passes: {}", q8.pe_count(), q3.pe_count(), revalidates(&q8) && revalidates(&q3)),
    );
}
