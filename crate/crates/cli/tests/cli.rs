use std::path::Path;

use equidissect::fixtures;
use equidissect::interchange::DissectionFile;
use serde_json::Value;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("equidissect").chain(args.iter().copied());
    let code = equidissect_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn body_json(r: &Run) -> Value {
    let line = r.out.lines().nth(1).expect("json line after header");
    serde_json::from_str(line).unwrap()
}

fn csv_rows(r: &Run) -> Vec<Vec<String>> {
    r.out
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_three_triangle(path: &Path) {
    let (d, m) = fixtures::three_triangle();
    DissectionFile::rational(d, m).write(path).unwrap();
}

#[test]
fn header_comes_first() {
    let r = run(&["bound", "predicted", "--n", "17"]);
    assert_eq!(r.code, 0);
    let first = r.out.lines().next().unwrap();
    assert!(first.starts_with("# equidissect "), "{first}");
    assert!(first.contains("seed=") && first.contains("precision="));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["verify"]).code, 2);
    assert_eq!(run(&["tarry", "--k", "3", "--max-len", "16", "--nope"]).code, 2);
    assert_eq!(run(&["tables", "5", "--n-max", "9"]).code, 2);
    let even = run(&["bound", "dissection", "--n", "4"]);
    assert_eq!(even.code, 2);
    assert!(even.err.contains("even"));
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn verify_good_file_passes() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("good.json");
    write_three_triangle(&f);
    let r = run(&["verify", p(&f), "--legality"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(body_json(&r)["legal"], Value::Bool(true));
    let all = run(&["verify", p(&f), "--monsky"]);
    assert_eq!(all.code, 0, "{}", all.err);
    assert_eq!(body_json(&all)["monsky"]["excludes_equal_areas"], Value::Bool(true));
}

#[test]
fn verify_broken_file_fails_with_reasons() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    write_three_triangle(&good);
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&good).unwrap()).unwrap();
    // Push the bottom-side node past the right corner.
    let nodes = v["nodes"].as_array_mut().unwrap();
    let side = nodes.iter_mut().find(|n| n["id"] == 4).unwrap();
    side["x"] = Value::String("3/2".into());
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    let r = run(&["verify", p(&bad), "--legality"]);
    assert_eq!(r.code, 1);
    let e: Value = serde_json::from_str(r.err.trim()).unwrap();
    assert!(e["error"].is_string());
    assert!(!e["reasons"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_json_fails() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("junk.json");
    std::fs::write(&f, "{\"n\": 3").unwrap();
    assert_eq!(run(&["verify", p(&f)]).code, 1);
}

#[test]
fn thue_morse_nine_range() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.json");
    let c = run(&["construct", "--family", "thue-morse", "--n", "9", "--out", p(&f)]);
    assert_eq!(c.code, 0, "{}", c.err);
    let r = run(&["verify", p(&f), "--metrics"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let range: f64 = body_json(&r)["metrics"]["range"].as_str().unwrap().parse().unwrap();
    assert!((range / 3.2719e-4 - 1.0).abs() < 1e-4, "{range}");
}

#[test]
fn construct_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (family, n) in [("thue-morse", "7"), ("slices", "9"), ("thue-morse", "17")] {
        let f = dir.path().join(format!("{family}{n}.json"));
        let c = run(&["construct", "--family", family, "--n", n, "--out", p(&f)]);
        assert_eq!(c.code, 0, "{}", c.err);
        let v = run(&["verify", p(&f), "--metrics"]);
        assert_eq!(v.code, 0, "{}", v.err);
        assert_eq!(body_json(&c)["metrics"], body_json(&v)["metrics"], "{family} {n}");
    }
    for (name, d, m) in fixtures::all_rational() {
        let f = dir.path().join(format!("{name}.json"));
        let file = DissectionFile::rational(d, m);
        file.write(&f).unwrap();
        let v = run(&["verify", p(&f), "--metrics"]);
        assert_eq!(v.code, 0, "{name}: {}", v.err);
        assert_eq!(body_json(&v)["metrics"], file.metrics_json(), "{name}");
    }
}

#[test]
fn explicit_signs_and_top_area() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("s.json");
    let c = run(&["construct", "--family", "signs", "--signs", "+-", "--top-area", "1/3", "--out", p(&f)]);
    assert_eq!(c.code, 0, "{}", c.err);
    let m = body_json(&c);
    let range: f64 = m["metrics"]["range"].as_str().unwrap().parse().unwrap();
    assert!((range - 1.0 / 3.0).abs() < 1e-30);
    let mismatch = run(&["construct", "--family", "signs", "--signs", "+-", "--n", "5", "--out", p(&f)]);
    assert_eq!(mismatch.code, 2);
}

#[test]
fn random_search_is_deterministic() {
    let args = [
        "search", "signs", "--n", "11", "--mode", "random", "--samples", "40", "--seed", "7", "--top", "5",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.code, 0, "{}", a.err);
    assert_eq!(a.out, b.out);
    assert!(a.out.lines().next().unwrap().contains("seed=7"));
    assert_eq!(a.out.lines().nth(1).unwrap(), "sequence,epsilon,range,rms,lambda");
    assert_eq!(csv_rows(&a).len(), 5);
}

#[test]
fn table_four_values() {
    let r = run(&["tables", "4", "--n-max", "33"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let rows = csv_rows(&r);
    let range_of = |n: &str| rows.iter().find(|row| row[0] == n).unwrap()[1].clone();
    assert_eq!(range_of("9"), "3.27190e-4");
    assert_eq!(range_of("17"), "6.76876e-7");
    assert_eq!(range_of("33"), "2.12290e-10");
    let nine = rows.iter().find(|row| row[0] == "9").unwrap();
    assert_eq!(nine[3], "1.0734");
    assert!(r.out.lines().skip(1).all(|l| !l.contains('E')));
}

#[test]
fn table_three_values() {
    let r = run(&["tables", "3", "--n-max", "11"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let eps: Vec<f64> = csv_rows(&r).iter().map(|row| row[2].parse().unwrap()).collect();
    let expect = [0.16667, 0.01250, 1.0248e-4, 1.6360e-4, 4.1201e-6];
    assert_eq!(eps.len(), expect.len());
    for (g, e) in eps.iter().zip(expect) {
        assert!((g / e - 1.0).abs() < 1e-3, "{g} vs {e}");
    }
}

#[test]
fn tarry_lists_thue_morse_split() {
    let r = run(&["tarry", "--k", "3", "--max-len", "16"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let rows = csv_rows(&r);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "1 4 6 7 10 11 13 16");
}

#[test]
fn optimize_three_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t.json");
    let o = dir.path().join("best.json");
    write_three_triangle(&f);
    let r = run(&["optimize", p(&f), "--restarts", "8", "--seed", "1", "--out", p(&o)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let rms: f64 = body_json(&r)["metrics"]["rms"].as_str().unwrap().parse().unwrap();
    assert!(rms <= 0.1179, "{rms}");
    assert_eq!(run(&["verify", p(&o), "--legality"]).code, 0);
}

#[test]
fn gap_bound_trace() {
    let r = run(&["bound", "gap", "--d", "4", "--k", "1", "--tau", "0"]);
    assert_eq!(r.code, 0);
    assert_eq!(body_json(&r)["exponent"], "78");
    let s = run(&["bound", "dissection", "--polygon", "square", "--n", "3"]);
    assert_eq!(s.code, 0, "{}", s.err);
    assert!(body_json(&s)["trace"].as_array().unwrap().len() > 5);
}
