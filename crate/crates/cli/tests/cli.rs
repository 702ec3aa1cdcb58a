use assert_cmd::Command;

fn bf2p() -> Command {
    let mut c = Command::cargo_bin("bf2p").unwrap();
    c.env_remove("BF2P_SEED");
    c
}

fn stdout(args: &[&str]) -> String {
    let out = bf2p().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap();
    line[key.len()..].trim().parse().unwrap()
}

#[test]
fn bf_prints_both_directions() {
    let out = stdout(&["bf", "--y1", "26", "--n1", "11034", "--y2", "10", "--n2", "11037", "--method", "lt"]);
    assert!((field(&out, "BF10") - 5.36).abs() < 0.1, "{out}");
    assert!((field(&out, "BF01") * field(&out, "BF10") - 1.0).abs() < 1e-5);
    assert!(out.contains("moderate evidence for H1 (interpretive)"));
}

#[test]
fn bf_json_and_methods() {
    let out = stdout(&["bf", "--y1", "0", "--n1", "100", "--y2", "0", "--n2", "100", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["bf01"].as_f64().unwrap() - 10201.0 / 201.0).abs() < 1e-9);
    let out = stdout(&["bf", "--y1", "3", "--n1", "20", "--y2", "9", "--n2", "20", "--method", "dep-ib"]);
    assert!(field(&out, "BF01") > 0.0);
}

#[test]
fn exit_codes() {
    bf2p().args(["bf", "--y1", "5", "--n1", "3", "--y2", "1", "--n2", "2"]).assert().code(1);
    bf2p().args(["bf", "--bogus"]).assert().code(1);
    bf2p().args(["bf", "--y1", "1", "--n1", "3", "--y2", "1", "--n2", "2", "--a", "0"]).assert().code(1);
    bf2p().arg("--help").assert().code(0);
}

#[test]
fn help_lists_bounds() {
    let out = stdout(&["bf", "--help"]);
    assert!(out.contains("a >= 1"));
    assert!(out.contains("above 2 trigger a warning"));
    assert!(out.contains("BF2P_SEED"));
    let out = bf2p()
        .args(["bf", "--y1", "1", "--n1", "3", "--y2", "1", "--n2", "2", "--method", "lt", "--sigma-psi", "3"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn sensitivity_endpoints() {
    let out = stdout(&["sensitivity", "--n", "100", "--method", "ib", "--method", "lt"]);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let bf = |y: &str, m: &str| -> f64 {
        rows.iter().find(|r| r[1] == y && r[2] == m).unwrap()[9].parse().unwrap()
    };
    assert!((bf("0", "ib") - 50.75).abs() < 0.01);
    assert!((bf("50", "ib") - 5.70).abs() < 0.01);
    assert!((bf("0", "lt") - 1.40).abs() < 0.02);
    assert!((bf("50", "lt") - 3.67).abs() < 0.02);
}

#[test]
fn priors_correlation_and_grids() {
    let out = stdout(&["priors", "--config", "lt", "--sigma-psi", "2", "--quantity", "correlation"]);
    assert!(out.trim().parse::<f64>().unwrap().abs() < 0.01);
    let a = stdout(&["--seed", "4", "priors", "--config", "dep-ib", "--quantity", "correlation"]);
    let b = bf2p()
        .env("BF2P_SEED", "4")
        .args(["priors", "--config", "dep-ib", "--quantity", "correlation"])
        .output()
        .unwrap();
    assert_eq!(a.as_bytes(), &b.stdout[..]);
    let out = stdout(&["priors", "--quantity", "eta", "--resolution", "11"]);
    assert_eq!(out.lines().count(), 12);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("joint.csv");
    stdout(&["priors", "--config", "lt", "--quantity", "joint", "--resolution", "64", "--out", path.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 64 * 64 + 1);
}

#[test]
fn posterior_and_avg() {
    let magee = ["--y1", "15", "--n1", "493", "--y2", "13", "--n2", "488"];
    let lt = stdout(&[&["posterior"], &magee[..]].concat());
    let ib = stdout(&[&["posterior", "--method", "ib", "--draws", "200000"], &magee[..]].concat());
    assert!((field(&lt, "mean") - field(&ib, "mean")).abs() < 0.1);
    assert!(field(&lt, "savage-dickey BF01") > 0.0);
    let again = stdout(&[&["posterior", "--method", "ib", "--draws", "200000"], &magee[..]].concat());
    assert_eq!(ib, again);
    let avg = stdout(&[&["avg"], &magee[..]].concat());
    assert!(field(&avg, "BFavg01") > 0.0);
    bf2p().args([&["avg", "--weights", "0.5,0.5,0.5,0.5"], &magee[..]].concat()).assert().code(1);
}

#[test]
fn reanalyze_files_and_strict() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("studies.csv");
    std::fs::write(&input, "id,label,y1,n1,y2,n2\n1,a,3,20,7,22\n2,b,0,15,4,16\n").unwrap();
    let out = dir.path().join("res.json");
    let args = |jobs: &str, out: &std::path::Path| {
        vec![
            "reanalyze".to_string(),
            "--input".into(),
            input.to_str().unwrap().into(),
            "--format".into(),
            "json".into(),
            "--jobs".into(),
            jobs.into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    bf2p().args(args("1", &out)).assert().success();
    let serial = std::fs::read(&out).unwrap();
    let out4 = dir.path().join("res4.json");
    bf2p().args(args("4", &out4)).assert().success();
    assert_eq!(serial, std::fs::read(&out4).unwrap());
    let parsed = bf2p::harness::parse_results_json(std::str::from_utf8(&serial).unwrap()).unwrap();
    assert_eq!(parsed.len(), 2 * (9 + 11));
    let base = ["reanalyze", "--input", input.to_str().unwrap(), "--a-values", "0.5,1"];
    bf2p().args(base).assert().success();
    bf2p().args([&base[..], &["--strict"]].concat()).assert().code(2);
    bf2p().args(["reanalyze", "--input", "/nonexistent/x.csv"]).assert().code(1);
    let shipped = stdout(&["reanalyze", "--grid", "point"]);
    assert!(shipped.lines().nth(1).unwrap().starts_with("3,ib,"));
}
