use std::io::Cursor;
use std::path::Path;

use super::*;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str], stdin: &str) -> Outcome {
    let mut input = Cursor::new(stdin.as_bytes().to_vec());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("procsift").chain(args.iter().copied());
    let code = run(argv, &mut input, &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        &["model", "gen", "--colour", "red"][..],
        &["frobnicate"],
        &[],
        &["data", "gen", "--model", "m.json", "--lengths", "20x5", "--out", "d.jsonl"],
        &["eval", "run", "--model", "m", "--data", "d", "--tagger", "t", "--k", "0"],
        &["eval", "sweep", "--model", "m", "--data", "d", "--fractions", "0,100"],
        &["tagger", "train", "--model", "m", "--data", "d", "--out", "t", "--arch", "RNN"],
        &["tagger", "train", "--model", "m", "--data", "d", "--out", "t", "--holdout", "1.5"],
    ] {
        let o = cli(args, "");
        assert_eq!(o.code, 2, "{args:?}: {}", o.stderr);
        assert!(o.stderr.starts_with("error: ") || args.is_empty(), "{args:?}: {}", o.stderr);
    }
    assert!(cli(&[], "").stderr.contains("Usage: procsift <COMMAND>"));
    assert!(cli(&["model", "gen", "--colour", "red"], "").stderr.contains("Usage: procsift model gen"));
    let help = cli(&["--help"], "");
    assert_eq!(help.code, 0);
}

#[test]
fn domain_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let o = cli(&["data", "gen", "--model", p(&missing), "--lengths", "4:1", "--out", p(&dir.path().join("d.jsonl"))], "");
    assert_eq!(o.code, 1);
    assert!(o.stderr.starts_with("error: "), "{}", o.stderr);
    std::fs::write(&missing, "{\"v\": 1}").unwrap();
    let o = cli(&["repl", "--model", p(&missing)], "");
    assert_eq!(o.code, 1);
}

#[test]
fn model_presets() {
    let o = cli(&["model", "gen", "--preset", "care-restricted"], "");
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(parse_model(&o.stdout).unwrap(), parse_model(CARE_RESTRICTED_JSON).unwrap());
    let a = cli(&["model", "gen", "--seed", "3"], "").stdout;
    assert_eq!(a, cli(&["model", "gen", "--seed", "3"], "").stdout);
    assert_eq!(parse_model(&a).unwrap().activity_count(), 16);
}

#[test]
fn generate_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (model, data, tagger) = (dir.path().join("m.json"), dir.path().join("d.jsonl"), dir.path().join("t.json"));
    assert_eq!(cli(&["model", "gen", "--seed", "1", "--out", p(&model)], "").code, 0);
    let o = cli(&["data", "gen", "--model", p(&model), "--lengths", "8:10,12:5", "--seed", "7", "--out", p(&data)], "");
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(data.with_extension("manifest.json").exists());
    let o = cli(&["tagger", "train", "--model", p(&model), "--data", p(&data), "--arch", "MB_2", "--epochs", "2", "--out", p(&tagger)], "");
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stderr.contains("on 12 traces (3 held out)"), "{}", o.stderr);

    let run = |extra: &[&str]| {
        let mut args = vec!["eval", "run", "--model", p(&model), "--data", p(&data), "--tagger", p(&tagger), "--gamma", "0.001"];
        args.extend_from_slice(extra);
        cli(&args, "")
    };
    let o = run(&["--k", "auto"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let table = MetricsTable::from_csv(&o.stdout).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert_eq!(table.rows[2].arch, "MB_2");
    let all = run(&["--holdout", "0", "--format", "plot"]);
    let plot: serde_json::Value = serde_json::from_str(&all.stdout).unwrap();
    assert_eq!(plot["v"], 1);

    let o = cli(
        &["eval", "sweep", "--model", p(&model), "--data", p(&data), "--arch", "MB_2", "--epochs", "1", "--fractions", "50,100"],
        "",
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(MetricsTable::from_csv(&o.stdout).unwrap().rows.len(), 6);
    assert_eq!(o.stderr.matches("fraction").count(), 2);
    let o = cli(&["eval", "sweep", "--model", p(&model), "--data", p(&data), "--holdout", "0"], "");
    assert_eq!(o.code, 1);

    // The tagger fits a repl session on the same model.
    let o = cli(&["repl", "--model", p(&model), "--tagger", p(&tagger)], "help\n");
    assert_eq!(o.code, 0, "{}", o.stderr);
}

#[test]
fn repl_drives_one_session() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("care.json");
    std::fs::write(&model, CARE_RESTRICTED_JSON).unwrap();
    let script = "\
event BloodSample ward=3
e BloodPressure
event Temperature
event CannulaInsertion
query 4 A2 last 1
query 4 A1
explain 4 A1
query 9 A1
dance
finalize
quit
event Temperature
";
    let o = cli(&["repl", "--model", p(&model)], script);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines.len(), 10, "{}", o.stdout);
    assert!(lines[0].starts_with("#1 BloodSample -> A1"), "{}", lines[0]);
    assert_eq!(lines[3], "#4 CannulaInsertion -> A2 1.000  [valid: A2]");
    assert_eq!(lines[4], r#"{"v":1,"verdict":true}"#);
    assert_eq!(lines[5], r#"{"v":1,"readings":[]}"#);
    assert!(lines[6].contains(r#""reasons":[{"kind":"mapping_violation"}]"#), "{}", lines[6]);
    assert!(lines[7].starts_with("error: "));
    assert!(lines[8].starts_with("error: unknown command"));
    assert!(lines[9].contains(r#""inconsistent":[]"#));
}
