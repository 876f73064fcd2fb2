use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qcgla(args: &[&str]) -> Output {
    qcgla_env(args, None)
}

fn qcgla_env(args: &[&str], config_env: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qcgla"));
    c.args(args).env_remove("QCGLA_CONFIG");
    if let Some(p) = config_env {
        c.env("QCGLA_CONFIG", p);
    }
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, data: impl AsRef<[u8]>) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, data).unwrap();
    p
}

fn zeros_f32(n: usize) -> Vec<u8> {
    vec![0u8; 4 * n]
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn col(csv_text: &str, row: usize, name: &str) -> String {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.nth(row).unwrap().split(',').nth(i).unwrap().to_string()
}

#[test]
fn unknown_subcommand_and_flag_exit_2_with_usage() {
    for args in [&["frobnicate"][..], &["simulate", "--bogus", "x"], &[]] {
        let o = qcgla(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    }
    assert_eq!(qcgla(&["--help"]).status.code(), Some(0));
    assert_eq!(qcgla(&["--lanes", "9", "gen-trace"]).status.code(), Some(2));
}

#[test]
fn quantize_zero_row_q8_0() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "z.bin", zeros_f32(32));
    let out = dir.path().join("z.qcgt");
    let o = qcgla(&["quantize", s(&input), "--cols", "32", "--dtype", "q8_0", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("blocks: 1"), "{text}");
    assert!(text.contains("compression: 128/34"), "{text}");
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(bytes.len(), 16 + 34);
    assert!(bytes[16..].iter().all(|&b| b == 0));
}

#[test]
fn quantize_zero_row_q3_k() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "z.bin", zeros_f32(256));
    let out = dir.path().join("z.qcgt");
    let o = qcgla(&["quantize", s(&input), "--cols", "256", "--dtype", "q3_k", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("blocks: 1"));
    assert_eq!(std::fs::read(&out).unwrap().len(), 16 + 110);
}

#[test]
fn quantize_shape_and_io_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "z.bin", zeros_f32(33));
    let o = qcgla(&["quantize", s(&input), "--cols", "33", "--dtype", "q8_0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("33"), "{}", stderr(&o));
    let o = qcgla(&["quantize", s(&dir.path().join("missing")), "--cols", "32", "--dtype", "q8_0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qcgla(&["quantize", s(&input), "--dtype", "q8_0"]);
    assert_eq!(o.status.code(), Some(2), "raw input needs --cols");
}

#[test]
fn quantize_then_dequantize() {
    let dir = TempDir::new().unwrap();
    let values: Vec<u8> = (0..64).flat_map(|i| (i as f32 * 0.25 - 8.0).to_le_bytes()).collect();
    let input = write(&dir, "x.bin", values);
    let q = dir.path().join("x.qcgt");
    let d = dir.path().join("x.f32");
    assert_eq!(qcgla(&["quantize", s(&input), "--cols", "64", "--dtype", "q8_0", "--out", s(&q)]).status.code(), Some(0));
    let o = qcgla(&["dequantize", s(&q), "--raw", "--out", s(&d)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let back: Vec<f32> = std::fs::read(&d).unwrap().chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(back.len(), 64);
    for (i, v) in back.iter().enumerate() {
        let x = i as f32 * 0.25 - 8.0;
        assert!((v - x).abs() <= 8.0 / 127.0, "{i}: {v} vs {x}");
    }
}

#[test]
fn check_passes_fails_and_warns() {
    let o = qcgla(&["check", "--trials", "50", "--accuracy-trials", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    for suite in ["q8_0-bitexact", "q3_k-bitexact", "repack-bound", "overflow-stress", "format-roundtrip", "repack-accuracy"] {
        assert!(text.contains(suite), "{text}");
    }
    assert!(text.contains("50/50 passed"));

    let o = qcgla(&["check", "--trials", "5", "--accuracy-trials", "2", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("counterexample: suite=q8_0-bitexact seed=42 trial=0"), "{}", stdout(&o));

    let o = qcgla(&["check", "--trials", "0", "--accuracy-trials", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn check_is_deterministic_and_seeded() {
    let run = |seed: &str| stdout(&qcgla(&["check", "--trials", "20", "--accuracy-trials", "30", "--seed", seed]));
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"), "accuracy figure depends on the seed");
}

#[test]
fn simulate_empty_trace_is_header_only() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "t.jsonl", "");
    let o = qcgla(&["simulate", s(&t)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("record,index,lane,kernel,m,k,reconf,"));
}

#[test]
fn simulate_single_call_and_frequency_scaling() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "t.jsonl", "{\"kernel\":\"q8_0\",\"m\":1,\"k\":256,\"reconf\":true}\n");
    let slow = stdout(&qcgla(&["simulate", s(&t)]));
    let exec: f64 = col(&slow, 0, "exec_s").parse().unwrap();
    assert!((exec - 78.0 / 145e6).abs() <= 1e-15 * exec, "{exec}");

    let fast = stdout(&qcgla(&["simulate", s(&t), "--freq", "840e6"]));
    for c in ["conf_s", "regv_s", "range_s", "load_s", "exec_s", "drain_s"] {
        let a: f64 = col(&slow, 0, c).parse().unwrap();
        let b: f64 = col(&fast, 0, c).parse().unwrap();
        assert!((b - a * 145.0 / 840.0).abs() <= 1e-12 * a, "{c}: {a} -> {b}");
    }
    assert_eq!(col(&slow, 0, "cpu_s"), col(&fast, 0, "cpu_s"));
}

#[test]
fn simulate_reports_parse_line() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "t.jsonl", "{\"kernel\":\"q8_0\",\"m\":1,\"k\":256,\"reconf\":true}\n{\"kernel\":\"q9\"}\n");
    let o = qcgla(&["simulate", s(&t)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn simulate_out_file_json_and_determinism() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.jsonl");
    assert_eq!(qcgla(&["gen-trace", "--count", "30", "--kernel", "mixed", "--out", s(&t)]).status.code(), Some(0));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = qcgla(&["simulate", s(&t), "--out", s(&a)]);
    assert!(stdout(&o).contains("EXEC%"), "summary goes to stdout when records go to a file");
    qcgla(&["simulate", s(&t), "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let j = stdout(&qcgla(&["simulate", s(&t), "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&j).unwrap();
    assert_eq!(v["report"]["calls"].as_array().unwrap().len(), 30);
    assert!(v["phase_percent"].as_array().unwrap().iter().any(|p| p["kernel"] == "all"));
}

#[test]
fn config_env_fallback_and_flag_override() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "t.jsonl", "{\"kernel\":\"q8_0\",\"m\":1,\"k\":256,\"reconf\":false}\n");
    let cfg = write(&dir, "m.cfg", "freq_hz = 290e6\n");
    let base: f64 = col(&stdout(&qcgla(&["simulate", s(&t)])), 0, "exec_s").parse().unwrap();
    let env: f64 = col(&stdout(&qcgla_env(&["simulate", s(&t)], Some(&cfg))), 0, "exec_s").parse().unwrap();
    assert!((env - base / 2.0).abs() <= 1e-15 * base);
    let flag: f64 = col(&stdout(&qcgla_env(&["simulate", s(&t), "--freq", "145e6"], Some(&cfg))), 0, "exec_s").parse().unwrap();
    assert_eq!(flag, base);
    let bad = write(&dir, "bad.cfg", "freq_hz = 1\nnope = 3\n");
    assert_eq!(qcgla(&["simulate", s(&t), "--config", s(&bad)]).status.code(), Some(2));
}

#[test]
fn sweep_single_lane_and_svg() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.jsonl");
    qcgla(&["gen-trace", "--preset", "uniform", "--count", "16", "--out", s(&t)]);
    let o = qcgla(&["sweep-lanes", s(&t), "--lanes", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert_eq!(col(&text, 0, "knee"), "false");
    assert!(stderr(&o).contains("no saturation knee"));

    let svg = dir.path().join("s.svg");
    let o = qcgla(&["sweep-lanes", s(&t), "--svg", s(&svg)]);
    assert_eq!(stdout(&o).lines().count(), 9);
    let chart = std::fs::read_to_string(&svg).unwrap();
    assert!(chart.starts_with("<svg") && chart.matches("<rect ").count() == 9);
}

#[test]
fn compare_pdp_builtin_file_and_unknown_device() {
    let o = qcgla(&["compare-pdp", "ref-q3_k"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let gpu = text.lines().find(|l| l.contains("gtx-1080ti")).unwrap();
    assert!(gpu.ends_with(",4050.0,4050.0"), "{gpu}");
    assert!(stderr(&o).contains("calibration"));

    let dir = TempDir::new().unwrap();
    let one = write(&dir, "one.ini", "[scenario]\nname = solo\nkernel = q8_0\n[device xeon-w5]\nlatency_s = 2\n");
    let o = qcgla(&["compare-pdp", s(&one)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
    assert_eq!(col(&stdout(&o), 0, "pdp_j"), "400.0");

    let bad = write(&dir, "bad.ini", "[scenario]\nname = x\nkernel = q3_k\n[device tpu-v9]\nlatency_s = 1\n");
    let o = qcgla(&["compare-pdp", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tpu-v9"));
    assert_eq!(qcgla(&["compare-pdp", "ref-q4"]).status.code(), Some(2));
}

#[test]
fn gen_trace_presets() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("e.jsonl");
    assert_eq!(qcgla(&["gen-trace", "--count", "0", "--out", s(&empty)]).status.code(), Some(0));
    assert_eq!(std::fs::read(&empty).unwrap().len(), 0);

    let o = qcgla(&["gen-trace", "--preset", "uniform", "--m", "64", "--k", "2048", "--count", "10"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines.iter().all(|l| *l == lines[0]));
    assert!(lines[0].contains("\"m\":64") && lines[0].contains("\"k\":2048"));

    let run = |seed: &str| qcgla(&["gen-trace", "--count", "40", "--kernel", "mixed", "--seed", seed]).stdout;
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));

    assert_eq!(qcgla(&["gen-trace", "--preset", "uniform", "--m", "0"]).status.code(), Some(2));
    assert_eq!(qcgla(&["gen-trace", "--preset", "uniform", "--kernel", "mixed"]).status.code(), Some(2));
    assert_eq!(qcgla(&["gen-trace", "--preset", "uniform", "--kernel", "q3_k", "--k", "100"]).status.code(), Some(2));
}

#[test]
fn bench_reports_modelled_time() {
    let o = qcgla(&["bench", "--kernel", "q3_k", "--m", "8", "--k", "512", "--iters", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kernel"], "q3_k");
    assert!(v["model_exec_s"].as_f64().unwrap() > 0.0);
    let checksum = |o: &Output| serde_json::from_str::<serde_json::Value>(&stdout(o)).unwrap()["checksum"].clone();
    let again = qcgla(&["bench", "--kernel", "q3_k", "--m", "8", "--k", "512", "--iters", "1", "--format", "json"]);
    assert_eq!(checksum(&o), checksum(&again));
}
