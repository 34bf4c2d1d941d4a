use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn itersim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itersim"))
        .args(args)
        .env_remove("ITERSIM_SEED")
        .output()
        .expect("run itersim")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("itersim-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_one_row_per_knot() {
    let dir = scratch("simulate");
    let out = dir.join("path.csv");
    let o = itersim(&[
        "simulate", "--position", "bm(sigma=1)", "--time", "bm(sigma=1)", "--T", "1", "--steps", "1000", "--seed", "7",
        "--out", path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = text.lines().skip_while(|l| l.starts_with('#') || *l == "t,z").count();
    assert_eq!(rows, 1001);
    assert!(stdout(&o).starts_with("simulate:"));
}

#[test]
fn every_subcommand_runs_at_small_scale() {
    let dir = scratch("smoke");
    let runs: [&[&str]; 9] = [
        &["simulate", "--steps", "100"],
        &["density", "--paths", "500", "--steps", "50", "--nodes", "32"],
        &["variations", "--order", "4", "--paths", "200", "--steps", "200"],
        &["fk", "--f", "bump", "--paths", "1000", "--steps", "20", "--oracle"],
        &["two-sided", "--f", "linear-cosh", "--paths", "1000", "--steps", "20", "--kill-plus", "0.3"],
        &["beam", "--f", "gauss", "--paths", "1000", "--steps", "20", "--gm", "2"],
        &["intertwine", "--x", "1.5,2", "--paths", "200", "--steps", "20", "--lambda-nodes", "4", "--nodes", "16"],
        &["convergence", "--levels", "4,8,16", "--paths", "10", "--ref-multiplier", "8"],
        &["transform", "--v", "gauss", "--t", "0.5,2"],
    ];
    for args in runs {
        let out = dir.join(format!("{}.csv", args[0]));
        let mut full = args.to_vec();
        full.extend(["--out", path_str(&out)]);
        let o = itersim(&full);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        assert_eq!(stdout(&o).lines().count(), 1, "{args:?}");
        let csv = std::fs::read_to_string(&out).unwrap();
        assert!(csv.lines().count() >= 2, "{args:?}: {csv}");
    }
}

#[test]
fn csv_headers() {
    let dir = scratch("headers");
    let cases: [(&[&str], &str); 4] = [
        (&["fk", "--paths", "100", "--steps", "5"], "t,x,mean,stderr,n_paths,seed"),
        (&["density", "--paths", "100", "--steps", "10", "--nodes", "16"], "bin_left,bin_right,count"),
        (&["convergence", "--levels", "2,4,8", "--paths", "4", "--ref-multiplier", "8"], "n,error_moment,p,n_paths"),
        (&["transform"], "t,value"),
    ];
    for (args, header) in cases {
        let out = dir.join("h.csv");
        let mut full = args.to_vec();
        full.extend(["--out", path_str(&out)]);
        assert_eq!(itersim(&full).status.code(), Some(0));
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().next(), Some(header));
    }
    let curve = dir.join("curve.csv");
    let o = itersim(&["density", "--paths", "100", "--steps", "10", "--nodes", "16", "--curve-out", path_str(&curve)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&curve).unwrap().starts_with("z,p_oracle\n"));
}

#[test]
fn fk_reports_oracle_and_z_score() {
    let o = itersim(&["fk", "--f", "gauss", "--t", "1", "--x", "0", "--paths", "20000", "--steps", "10", "--seed", "7", "--oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("oracle 0.670225"), "{s}");
    assert!(s.contains("|diff|/stderr"), "{s}");
}

#[test]
fn variations_estimate_near_three() {
    let o = itersim(&["variations", "--order", "4", "--t", "1", "--paths", "2000", "--steps", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let value: f64 = s.rsplit(": ").next().unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((value - 3.0).abs() < 0.15, "{s}");
}

#[test]
fn configuration_errors_exit_with_2() {
    for args in [
        &["fk", "--bogus", "1"][..],
        &["fk", "--position", "bm(sigma=-1)"],
        &["fk", "--position", "wiener"],
        &["fk", "--t", "-1"],
        &["fk", "--paths", "1"],
        &["simulate", "--T", "0"],
        &["convergence", "--levels", "8,4"],
        &["intertwine", "--alpha", "0"],
        &["density", "--position", "sqbessel(delta=2)", "--oracle"],
        &["fk", "--position", "sqbessel(delta=2)", "--oracle", "--paths", "10", "--steps", "5"],
        &["--threads", "0", "fk"],
        &["frobnicate"],
        &[],
    ] {
        let o = itersim(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn error_message_names_the_offending_key() {
    let o = itersim(&["fk", "--position", "bm(sigma=-1)"]);
    assert!(stderr(&o).contains("--position"), "{}", stderr(&o));
    let o = itersim(&["convergence", "--levels", "8,4"]);
    assert!(stderr(&o).contains("levels"), "{}", stderr(&o));
}

#[test]
fn runtime_failures_exit_with_1() {
    let o = itersim(&["transform", "--out", "/nonexistent-dir/x/out.csv"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn help_exits_with_0() {
    let o = itersim(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("two-sided"));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = scratch("config");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "paths = 500\nsteps = 5\nseed = 11\nf = \"bump\"\n").unwrap();
    let from_file = itersim(&["fk", "--config", path_str(&cfg)]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    assert!(stdout(&from_file).contains("(500 paths, seed 11)"), "{}", stdout(&from_file));
    let overridden = itersim(&["fk", "--config", path_str(&cfg), "--paths", "800"]);
    assert!(stdout(&overridden).contains("(800 paths, seed 11)"), "{}", stdout(&overridden));
    let before = itersim(&["--threads", "2", "--config", path_str(&cfg), "fk", "--seed", "3"]);
    assert!(stdout(&before).contains("(500 paths, seed 3)"), "{}", stdout(&before));

    std::fs::write(&cfg, "pathz = 10\n").unwrap();
    let o = itersim(&["fk", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pathz"), "{}", stderr(&o));
    let o = itersim(&["fk", "--config", path_str(&dir.join("missing.toml"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_itersim"));
        cmd.args(["fk", "--paths", "300", "--steps", "5"]).args(extra);
        match env {
            Some(v) => cmd.env("ITERSIM_SEED", v),
            None => cmd.env_remove("ITERSIM_SEED"),
        };
        String::from_utf8(cmd.output().unwrap().stdout).unwrap()
    };
    assert!(run(Some("42"), &[]).contains("seed 42"));
    assert!(run(Some("42"), &["--seed", "5"]).contains("seed 5"));
    assert!(run(None, &[]).contains("seed 0"));
    assert_eq!(run(Some("42"), &[]), run(None, &["--seed", "42"]));
}

#[test]
fn output_is_byte_identical_across_runs_and_threads() {
    let dir = scratch("determinism");
    let mut outputs = Vec::new();
    for threads in ["1", "2", "1"] {
        let out = dir.join(format!("v-{threads}-{}.csv", outputs.len()));
        let o = itersim(&[
            "intertwine", "--x", "2", "--paths", "300", "--steps", "10", "--lambda-nodes", "4", "--nodes", "16", "--seed",
            "4", "--threads", threads, "--out", path_str(&out),
        ]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn unstable_beam_is_flagged() {
    let o = itersim(&[
        "beam", "--plus", "ou", "--minus", "bm", "--f", "linear-cosh", "--x", "1", "--paths", "20000", "--steps", "100",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("UNSTABLE") || s.contains("NON-FINITE"), "{s}");
}
