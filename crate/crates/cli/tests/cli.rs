use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
scene.x_max = 3
scene.y_max = 2
scene.resolution = 0.25
rays.R = 4
rays.N = 3
rays.d = 0.1
local.l_count = 6
active.init_M = 6
active.section_size = 1.5
active.candidate_res = 0.25
oracle.kind = sharp
oracle.tx_x = 0.5
oracle.tx_y = 1
oracle.region_x_min = 1.5
oracle.region_x_max = 3
oracle.region_y_min = 0
oracle.region_y_max = 2
oracle.bump_x = 2
oracle.bump_y = 1
oracle.bump_radius = 0.5
benchmark.seeds = 2
benchmark.random_n = 20
benchmark.active_max = 20
benchmark.scratch_n = 20
benchmark.dynamic_n = 12
benchmark.eval_stride = 5
";

fn rfgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfgp"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rfgp(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn setup(dir: &Path) -> (String, String) {
    let cfg = dir.join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let truth = dir.join("truth.csv");
    ok(&["generate", "--config", s(&cfg), "--out", s(&truth)]);
    (s(&cfg).to_string(), s(&truth).to_string())
}

#[test]
fn evaluate_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (_, truth) = setup(dir.path());
    let text = ok(&["evaluate", "--pred", &truth, "--truth", &truth]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["mae,median_ae,n_evaluated", "0,0,117"]);
}

#[test]
fn active_with_zero_budget_keeps_only_the_initial_draw() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, truth) = setup(dir.path());
    let trace = dir.path().join("trace.csv");
    ok(&[
        "active",
        "--config",
        &cfg,
        "--truth",
        &truth,
        "--seed",
        "4",
        "--budget",
        "0",
        "--trace",
        s(&trace),
    ]);
    let text = fs::read_to_string(&trace).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows
        .iter()
        .all(|r| r.starts_with("0,") && r.ends_with(",NaN")));
}

#[test]
fn pipeline_from_samples_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, truth) = setup(dir.path());
    let d = dir.path();
    let obs = d.join("obs.csv");
    let mean = d.join("mean.csv");
    let pgm = d.join("mean.pgm");
    ok(&[
        "sample",
        "--truth",
        &truth,
        "--count",
        "30",
        "--seed",
        "1",
        "--out",
        s(&obs),
    ]);
    assert_eq!(fs::read_to_string(&obs).unwrap().lines().count(), 31);
    ok(&[
        "reconstruct",
        "--config",
        &cfg,
        "--obs",
        s(&obs),
        "--mean",
        s(&mean),
        "--mean-pgm",
        s(&pgm),
    ]);
    assert!(fs::read_to_string(&pgm)
        .unwrap()
        .starts_with("P2\n13 9\n255\n"));
    let report = ok(&[
        "evaluate",
        "--pred",
        s(&mean),
        "--truth",
        &truth,
        "--obs",
        s(&obs),
    ]);
    let fields: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[2], "87");
    assert!(fields[0].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn active_and_dynamic_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = setup(dir.path());
    let d = dir.path();
    let (before, after) = (d.join("t.csv"), d.join("t1.csv"));
    ok(&[
        "generate",
        "--config",
        &cfg,
        "--set",
        "oracle.kind=dynamic-pair",
        "--out",
        s(&after),
        "--before",
        s(&before),
    ]);
    let (trace, curve, mean) = (
        d.join("a_trace.csv"),
        d.join("a_curve.csv"),
        d.join("a_mean.csv"),
    );
    ok(&[
        "active",
        "--config",
        &cfg,
        "--truth",
        s(&after),
        "--seed",
        "2",
        "--budget",
        "6",
        "--trace",
        s(&trace),
        "--curve",
        s(&curve),
        "--stride",
        "4",
        "--mean",
        s(&mean),
    ]);
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 13);
    let curve_text = fs::read_to_string(&curve).unwrap();
    let ns: Vec<&str> = curve_text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ns, ["4", "8", "12"]);

    let (composed, dtrace) = (d.join("composed.csv"), d.join("d_trace.csv"));
    ok(&[
        "dynamic",
        "--config",
        &cfg,
        "--baseline",
        s(&before),
        "--truth",
        s(&after),
        "--seed",
        "2",
        "--budget",
        "4",
        "--composed",
        s(&composed),
        "--trace",
        s(&dtrace),
    ]);
    assert_eq!(fs::read_to_string(&dtrace).unwrap().lines().count(), 11);
    assert!(fs::read_to_string(&composed)
        .unwrap()
        .starts_with("# bounds 0 3 0 2\n# resolution 0.25\n"));
}

#[test]
fn benchmark_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = setup(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let listed = ok(&[
        "benchmark",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out-dir",
        s(&a),
    ]);
    ok(&[
        "benchmark",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out-dir",
        s(&b),
    ]);
    let names: Vec<String> = listed
        .lines()
        .map(|l| {
            Path::new(l)
                .file_name()
                .unwrap()
                .to_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(
        names
            .iter()
            .filter(|n| n.starts_with("active_seed"))
            .count(),
        2
    );
    assert_eq!(
        names
            .iter()
            .filter(|n| n.starts_with("dynamic_seed"))
            .count(),
        2
    );
    assert!(names.contains(&"active_median.csv".to_string()));
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n}"
        );
    }
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "rays.R = 4\nrays.d = -1\n").unwrap();
    let out = rfgp(&[
        "generate",
        "--config",
        s(&bad),
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("rays.d") && err.contains("line 2"), "{err}");

    let out = rfgp(&[
        "evaluate",
        "--pred",
        "/nonexistent.csv",
        "--truth",
        "/nonexistent.csv",
    ]);
    assert!(!out.status.success());
    assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);
}
