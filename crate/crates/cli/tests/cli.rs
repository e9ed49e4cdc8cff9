use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nondivfem"));
    c.env("NONDIVFEM_THREADS", "2");
    c
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nondivfem-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn run_writes_convergence_csv() {
    let out = tmp("run.csv");
    let s = bin()
        .args(["run", "--experiment", "exp1", "--kappa", "0.5", "--scheme", "recovery-cg", "--degree", "2"])
        .args(["--eta1", "0", "--eta2", "0", "--refine", "uniform", "--levels", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "Ndofs,h_max,L2_error,H1_error,H2h_error,Eta_global,iterations");
    assert_eq!(lines.count(), 3);
}

#[test]
fn adapt_and_compare_succeed() {
    let out = tmp("adapt.csv");
    let s = bin()
        .args(["adapt", "--experiment", "exp2", "--alpha", "1.5", "--theta", "0.9", "--max-dofs", "1500", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(0));
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() >= 3);

    let out = tmp("cmp.csv");
    let s = bin()
        .args(["compare", "--experiment", "exp1", "--degrees", "1,2", "--levels", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("degree,Ndofs,h_max,recovery-cg_L2_error"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn iteration_table_to_stdout() {
    let o = bin().args(["iters", "--kappas", "0.9", "--levels", "3", "--eta1", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "2^-3");
    let n: i64 = row[1].parse().unwrap();
    assert!((7..=20).contains(&n), "{n}");
}

#[test]
fn configuration_errors_exit_with_2() {
    for args in [
        vec!["run", "--experiment", "exp9"],
        vec!["run", "--kappa", "1.2"],
        vec!["run", "--scheme", "nsz", "--degree", "1"],
        vec!["run", "--refine", "sideways"],
        vec!["adapt", "--theta", "1.5"],
        vec!["run", "--degree", "two"],
    ] {
        let o = bin().args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = bin().args(["run", "--levels", "1"]).env("NONDIVFEM_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_3() {
    let o = bin().args(["run", "--kappa", "0.999", "--eta1", "0", "--max-iter", "2", "--levels", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = bin().args(["run", "--scheme", "nsz", "--eta1", "0", "--levels", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}
