use std::process::{Command, Output};

fn tracefem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracefem")).args(args).output().expect("binary runs")
}

#[test]
fn lb_writes_csv_with_header() {
    let out = tracefem(&["lb", "--p", "1", "--levels", "6:12", "--no-cond"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,h,ndof,l2_error,h1_error,eoc_l2,eoc_h1,cond,cond_diag,variant,p,gamma,shift,config_hash"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').count() == 14 && r.contains(",proposed,1,")));
}

#[test]
fn output_is_deterministic() {
    let args = ["cond-sweep", "--p", "2", "--levels", "6:12", "--shifts", "0,0.25"];
    let (a, b) = (tracefem(&args), tracefem(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("tracefem-cli-{}.csv", std::process::id()));
    let out = tracefem(&["mass", "--p", "1", "--levels", "6:12", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn config_errors_exit_with_one() {
    assert_eq!(tracefem(&["lb", "--p", "4"]).status.code(), Some(1));
    assert_eq!(tracefem(&["lb", "--levels", "12-24"]).status.code(), Some(1));
    assert_eq!(tracefem(&["lb", "--stab", "bogus"]).status.code(), Some(1));
    assert_eq!(tracefem(&["lb", "--geom", "square"]).status.code(), Some(1));
    assert_eq!(tracefem(&["curvature", "--p", "2"]).status.code(), Some(1));
    assert_eq!(tracefem(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn recorded_failures_exit_with_two() {
    // a curve outside the background domain leaves no active elements
    let out = tracefem(&["lb", "--geom", "circle:5,5,0.5", "--levels", "6:12", "--no-cond"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed"));
}

#[test]
fn help_succeeds() {
    let out = tracefem(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("cond-sweep"));
}
