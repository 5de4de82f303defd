use std::path::Path;
use std::process::{Command, Output};

use recurlab_cli::report::ReportDoc;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_recurlab"));
    c.env_remove(recurlab_cli::OUT_DIR_ENV);
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

/// Check a JSON report against the schema and round-trip it through the report type.
fn check_report(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let v = schema();
    let errors: Vec<String> = v.iter_errors(&value).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", path.display());
    let doc: ReportDoc = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_value(&doc).unwrap(), value);
    value
}

#[test]
fn validate_prints_classification() {
    let o = run(&["validate", "--p", "3", "--a", "0", "--b", "1.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("invalid"), "{}", stdout(&o));
    let o = run(&["validate", "--flat", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("valid"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["moments", "--bogus"],
        vec!["frobnicate"],
        vec!["moments", "--p", "3", "--a", "0", "--b", "1.5"],
        vec!["superharmonic", "--eps", "1.5"],
        vec!["moments", "--points", "0"],
        vec!["validate", "--flat", "--a", "1"],
        vec!["verdict", "--format", "csv"],
        vec!["simulate", "--paths", "0", "--m", "1"],
        vec!["consistency", "--x-norms", "0"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"command": "verdict"}"#).unwrap();
    assert_eq!(run(&["validate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"p": 3, "typo": 1}"#).unwrap();
    assert_eq!(run(&["validate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_three() {
    let o = run(&["moments", "--eta-min", "100", "--eta-max", "1000", "--points", "2", "--max-terms", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_lists_defaults_and_units() {
    for sub in ["validate", "moments", "asymptotics", "superharmonic", "verdict", "simulate", "dichotomy", "consistency"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for line in text.lines().filter(|l| l.trim_start().starts_with("--") && !l.contains("--help")) {
            let flag = line.split_whitespace().next().unwrap();
            let switch = ["--flat", "--timing", "--config", "--out"].contains(&flag);
            assert!(switch || line.contains("[default:"), "{sub} {flag} has no default: {line}");
        }
    }
    assert!(stdout(&run(&["moments", "--help"])).contains("squared-norm units"));
}

#[test]
fn tables_have_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 6] = [
        (&["moments", "--eta-min", "1", "--eta-max", "100", "--points", "3"], "eta,mu1,mu2,mu3"),
        (&["asymptotics", "--eta-min", "1", "--eta-max", "100", "--points", "3"], "eta,mu1,mu2,mu3,rem1,rem2,rem3"),
        (&["superharmonic", "--eta-min", "1", "--eta-max", "1e4", "--points", "5"], "eta,bracket,delta,cond21_lhs,cond21_rhs"),
        (&["simulate", "--m", "5", "--start", "10", "--paths", "20", "--max-steps", "100"], "path_id,hit_step"),
        (&["dichotomy", "--paths", "20", "--max-steps", "100"], "p,n_paths,max_steps,hits,censored,hit_fraction,q25,q50,q75"),
        (
            &["consistency", "--x-norms", "2", "--samples", "200"],
            "x_norm,ks_statistic,ks_critical,ks_reject,acceptance_rate,dirichlet_full,dirichlet_full_se,dirichlet_reduced,dirichlet_reduced_se",
        ),
    ];
    for (args, header) in cases {
        let out = dir.path().join(format!("{}.csv", args[0]));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", out.to_str().unwrap()]);
        let o = run(&full);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
        assert!(text.lines().count() > 1);
    }
    // censored paths are written as -1
    let out = dir.path().join("censored.csv");
    run(&["simulate", "--flat", "--m", "1", "--start", "1e4", "--paths", "5", "--max-steps", "10", "--out", out.to_str().unwrap()]);
    assert!(std::fs::read_to_string(&out).unwrap().lines().skip(1).all(|l| l.ends_with(",-1")));
}

#[test]
fn every_report_matches_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 9] = [
        &["validate", "--a", "0", "--b", "2"],
        &["moments", "--eta-min", "1", "--eta-max", "100", "--points", "3"],
        &["asymptotics", "--eta-min", "1", "--eta-max", "100", "--points", "3"],
        &["superharmonic", "--eta-min", "1", "--eta-max", "1e4", "--points", "5"],
        &["verdict", "--eta-min", "1", "--eta-max", "1e4", "--points", "13"],
        &["simulate", "--m", "5", "--start", "10", "--paths", "20", "--max-steps", "100"],
        &["simulate", "--chain", "walk", "--paths", "20", "--max-steps", "100", "--timing"],
        &["dichotomy", "--paths", "20", "--max-steps", "100"],
        &["consistency", "--x-norms", "2", "--samples", "200"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = dir.path().join(format!("{i}.json"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", out.to_str().unwrap()]);
        let o = run(&full);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let v = check_report(&out);
        assert_eq!(v["command"], args[0]);
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"command": "validate", "p": 5, "a": 0.0, "b": 2.0}"#).unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["validate", "--config", cfg.to_str().unwrap(), "--b", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = check_report(&out);
    assert_eq!(v["config"]["p"], 5);
    assert_eq!(v["config"]["b"], 1.0);
    assert_eq!(v["payload"]["spec"]["a"], 0.0);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["validate"])
        .env(recurlab_cli::OUT_DIR_ENV, dir.path().join("nested"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    check_report(&dir.path().join("nested/validate.json"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--m", "20", "--start", "200", "--paths", "50", "--max-steps", "2000", "--seed", "3"];
    let mut files = Vec::new();
    for name in ["a.json", "b.json", "a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let mut full = args.to_vec();
        full.extend(["--out", out.to_str().unwrap()]);
        assert_eq!(run(&full).status.code(), Some(0));
        files.push(std::fs::read(out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[2], files[3]);
    let other = dir.path().join("c.json");
    let mut full = args.to_vec();
    full[args.len() - 1] = "4";
    full.extend(["--out", other.to_str().unwrap()]);
    run(&full);
    assert_ne!(std::fs::read(other).unwrap(), files[0]);
}

#[test]
fn dichotomy_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = run(&[
        "dichotomy", "--p", "3", "--start", "5", "--m", "1", "--paths", "1000", "--max-steps", "100000", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let row: recurlab_cli::report::DichotomyRow = rdr.deserialize().next().unwrap().unwrap();
    assert_eq!(row.p, 3);
    assert!(row.hit_fraction <= 0.5);
}
