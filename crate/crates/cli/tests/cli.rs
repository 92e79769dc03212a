use std::path::Path;
use std::process::{Command, Output};

fn dyadtf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadtf")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn oracle_passes_and_reports_the_rng() {
    let o = dyadtf(&["oracle", "--trials", "5", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("# rng: ChaCha8Rng"));
    assert!(out.contains("trial,model,haar,rectangles,deviation,pass"));
    assert!(out.contains("# invariant_failures: 0"));
}

#[test]
fn out_file_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = dyadtf(&["sparsity", "--trials", "4", "--seed", "8", "--box-exp", "2", "--grid-exp", "6", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert!(stdout(&o).contains("invariant_failures=0"));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.contains("# box_exp: 2\n# res_exp: 6\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn invariants_render_key_value_lines() {
    let o = dyadtf(&["invariants", "--trials", "2", "--grid-exp", "5"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("check.oracle: PASS")));
    assert!(!out.contains("# "));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_exponents = write(dir.path(), "e.toml", "[exponents]\np1 = 2.0\nq1 = 2.0\np2 = 2.0\nq2 = 3.0\ns = 2.0\n");
    let wrong_kind = write(dir.path(), "k.toml", "[run]\nkind = \"oracle_equivalence\"\n");
    let unknown = write(dir.path(), "u.toml", "[run]\nbogus = 1\n");
    for args in [
        vec!["weaktype", "--config", bad_exponents.as_str()],
        vec!["sparsity", "--config", wrong_kind.as_str()],
        vec!["oracle", "--config", unknown.as_str()],
        vec!["oracle", "--config", "/nonexistent/config.toml"],
        vec!["oracle", "--grid-exp", "30"],
        vec!["leibniz", "--trials", "0"],
    ] {
        let o = dyadtf(&args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn invariant_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let strict = write(dir.path(), "l.toml", "[leibniz]\norders = [1.0]\nslope_tol = 1e-300\n");
    let o = dyadtf(&["leibniz", "--config", &strict, "--trials", "3"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn usage_errors_are_reported_by_clap() {
    let o = dyadtf(&["frobnicate"]);
    assert_eq!(code(&o), 2);
    assert!(dyadtf(&["--help"]).status.success());
}
