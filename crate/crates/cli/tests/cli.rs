use std::path::Path;
use std::process::{Command, Output};

use jpeg_compat::image::GrayImage;
use jpeg_compat_cli::pgm::save_pgm;
use jpeg_compat_cli::results::{read_rows, Format, ResultRow};
use jpeg_compat_cli::synthetic::gen_synthetic;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jpeg-compat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn parse_rows(out: &Output) -> Vec<ResultRow> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    read_rows(&out.stdout, Format::Csv).unwrap()
}

fn find<'a>(rows: &'a [ResultRow], statistic: &str, value: f64) -> &'a ResultRow {
    rows.iter()
        .find(|r| r.statistic == statistic && r.value == value && r.item.is_none())
        .unwrap_or_else(|| panic!("no {statistic} row at {value}"))
}

const SMALL: &[&str] = &["--images", "2", "--image-size", "32", "--seed", "11"];

#[test]
fn verify_toy_cover() {
    let out = run(&["verify-block", "--shape", "1x2", "--pixels", "195,84"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("coefficients:  16 78"), "{text}");
    assert!(text.contains("rounded:       194 84"));
    assert!(text.contains("feasible (compatible)"));
    assert!(text.contains("antecedents:   (195 84) (194 84)"));
}

#[test]
fn verify_toy_stego() {
    let out = run(&["verify-block", "--shape", "1x2", "--coeffs", "17 77"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("rounded:       194 86"), "{text}");
    assert!(text.contains("infeasible"));
    assert!(text.contains("antecedents:   none"));
}

#[test]
fn verify_flat_block() {
    let zeros = vec!["0"; 64].join(",");
    let out = run(&["verify-block", "--coeffs", &zeros, "--budget-nodes", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("feasible (compatible)"));
}

#[test]
fn verify_with_quant_file() {
    let dir = tempfile::tempdir().unwrap();
    let quant = dir.path().join("q.txt");
    std::fs::write(&quant, "1 1\n1 1\n").unwrap();
    let q = quant.to_str().unwrap();
    let out = run(&["verify-block", "--shape", "2x2", "--quant", q, "--pixels", "10 20 30 40"]);
    assert_eq!(out.status.code(), Some(0));
    std::fs::write(&quant, "1 1 1").unwrap();
    let out = run(&["verify-block", "--shape", "2x2", "--quant", q, "--pixels", "10 20 30 40"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["incompat-rate", "--shape", "3x3"]).status.code(), Some(1));
    assert_eq!(run(&["verify-block", "--shape", "0x2", "--coeffs", "1"]).status.code(), Some(1));
    assert_eq!(run(&["verify-block", "--shape", "1x2", "--coeffs", "1"]).status.code(), Some(1));
    assert_eq!(run(&["verify-block", "--shape", "1x2", "--pixels", "1,300"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    let out = run(&["timing", "--shape", "3x3", "--budget-nodes", "100,10"]);
    assert_eq!(out.status.code(), Some(1));
    let mut args = vec!["timing", "--shape", "3x3", "--budget-nodes", "100,10"];
    args.extend(SMALL);
    assert_eq!(run(&args).status.code(), Some(1));
    let mut args = vec!["payload-detect", "--shape", "3x3", "--payload", "2"];
    args.extend(SMALL);
    assert_eq!(run(&args).status.code(), Some(1));
}

#[test]
fn io_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let out = run(&["incompat-rate", "--seed", "1", "--input-dir", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.pgm"), b"P5\n4 4\n255\n").unwrap();
    let out = run(&[
        "payload-detect",
        "--seed",
        "1",
        "--images",
        "1",
        "--input-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["incompat-rate", "--shape", "3x3", "--samples", "1000000", "--seed", "1", "--images", "1", "--image-size", "9"]);
    assert_eq!(out.status.code(), Some(2));
}

fn save_corpus(dir: &Path, count: u64) {
    for i in 0..count {
        let img: GrayImage = gen_synthetic(i, 24, 24, 1.0);
        save_pgm(&dir.join(format!("img{i:02}.pgm")), &img).unwrap();
    }
}

#[test]
fn pgm_directory_source() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(dir.path(), 3);
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let path = dir.path().to_str().unwrap();
    let out = run(&["incompat-rate", "--shape", "3x3", "--samples", "50", "--changes", "0,2", "--images", "3", "--seed", "4", "--input-dir", path]);
    let rows = parse_rows(&out);
    assert_eq!(find(&rows, "incompatible", 0.0).measured, 0.0);
    assert_eq!(find(&rows, "incompatible", 2.0).count, 50);
    let out = run(&["incompat-rate", "--shape", "3x3", "--images", "4", "--seed", "4", "--input-dir", path]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn incompat_rate_is_reproducible() {
    let mut args = vec!["incompat-rate", "--shape", "3x3", "--samples", "40", "--changes", "0,1,3"];
    args.extend(SMALL);
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let rows = parse_rows(&a);
    assert_eq!(rows.len(), 9);
    assert_eq!(find(&rows, "incompatible", 0.0).measured, 0.0);
    assert_eq!(find(&rows, "unsolved", 3.0).measured, 0.0);
}

#[test]
fn payload_detect_bounds() {
    let mut args = vec!["payload-detect", "--shape", "4x4", "--payload", "0.05", "--budget-nodes", "100000"];
    args.extend(SMALL);
    let a = run(&args);
    assert_eq!(a.stdout, run(&args).stdout);
    let rows = parse_rows(&a);
    let per_image = |stat: &str| -> Vec<f64> {
        rows.iter().filter(|r| r.statistic == stat && r.item.is_some()).map(|r| r.measured).collect()
    };
    for (inc, modified) in per_image("incompatible_blocks").iter().zip(per_image("modified_blocks")) {
        assert!(*inc <= modified);
    }
    assert_eq!(find(&rows, "cover_false_alarm_images", 0.05).measured, 0.0);

    let mut args = vec!["payload-detect", "--shape", "4x4", "--payload", "0", "--budget-nodes", "100000"];
    args.extend(SMALL);
    let rows = parse_rows(&run(&args));
    assert!(rows
        .iter()
        .filter(|r| r.statistic == "incompatible_blocks")
        .all(|r| r.measured == 0.0));
}

#[test]
fn timing_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let json = dir.path().join("t.json");
    let mut args = vec!["timing", "--shape", "4x4", "--payload", "0.1", "--budget-nodes", "10,100,1000"];
    args.extend(SMALL);
    for out in [&csv, &json] {
        let mut a = args.clone();
        a.extend(["--out", out.to_str().unwrap()]);
        assert_eq!(run(&a).status.code(), Some(0));
    }
    let from_csv = read_rows(&std::fs::read(&csv).unwrap(), Format::Csv).unwrap();
    let from_json = read_rows(&std::fs::read(&json).unwrap(), Format::Json).unwrap();
    assert_eq!(from_csv, from_json);
    assert_eq!(std::fs::read(&csv).unwrap(), run(&args).stdout);
    for budget in [10.0, 100.0, 1000.0] {
        let pe = find(&from_csv, "pe", budget).measured;
        assert!((0.0..=0.5).contains(&pe));
    }
    let ratios = from_csv.iter().filter(|r| r.statistic == "cover_unsolved_ratio").count();
    assert_eq!(ratios, 2 * 3);
}

#[test]
fn timing_identical_sets_give_chance() {
    let mut args = vec!["timing", "--shape", "4x4", "--payload", "0", "--budget-nodes", "50"];
    args.extend(SMALL);
    let rows = parse_rows(&run(&args));
    assert_eq!(find(&rows, "pe", 50.0).measured, 0.5);
}
