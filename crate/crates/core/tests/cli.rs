use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn teacache(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teacache"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn teacache")
}

const SMALL: &str = "\
# reduced corpus to keep the CLI tests quick
[schedule]
steps = 12

[policy]
delta = 0.1
rescaler_path = cal/rescaler.txt

[run]
seeds = 3, 4, 5
uniform_interval = 2
reduced_steps = 6

[calibration]
order = 2
seeds = 0, 1

[sweep]
deltas = 0, 0.1, 0.2
";

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.ini"), SMALL).unwrap();
    dir
}

#[test]
fn calibrate_then_run_is_deterministic() {
    let dir = workspace();
    let d = dir.path();
    let out = teacache(&["--config", "exp.ini", "--output", "cal", "calibrate"], d);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rescaler = fs::read_to_string(d.join("cal/rescaler.txt")).unwrap();
    assert!(
        rescaler.starts_with("order = 2\ncoefficients = "),
        "{rescaler}"
    );
    assert!(d.join("cal/trace_seed0.csv").exists());
    assert!(d.join("cal/trace_seed1.csv").exists());

    let mut reports = Vec::new();
    for dir_name in ["a", "b"] {
        let out = teacache(
            &[
                "--config", "exp.ini", "--output", dir_name, "--quiet", "run",
            ],
            d,
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty());
        reports.push(fs::read(d.join(dir_name).join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let text = String::from_utf8(reports.pop().unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,method,delta,mode,order,computed_steps,speedup,psnr_db,ssim,rel_l1,jaccard_oracle"
    );
    // 3 seeds x {baseline, teacache, uniform, reduced}
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 4);
    assert!(rows.iter().all(|r| r.split(',').count() == 11));
    assert!(rows
        .iter()
        .any(|r| r.starts_with("3,teacache,0.1,modulated_input,2,")));
}

#[test]
fn sweep_writes_parseable_plots() {
    let dir = workspace();
    let d = dir.path();
    assert!(
        teacache(&["--config", "exp.ini", "--output", "cal", "calibrate"], d)
            .status
            .success()
    );
    let out = teacache(&["--config", "exp.ini", "--output", "sw", "sweep"], d);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sweep = fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3);
    let runs = fs::read_to_string(d.join("sw/sweep_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 3);
    for svg in ["quality_vs_speedup.svg", "step_differences.svg"] {
        let text = fs::read_to_string(d.join("sw").join(svg)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(doc
            .descendants()
            .any(|n| n.has_tag_name("polyline") || n.has_tag_name("path")));
    }
}

#[test]
fn trace_dump_and_seed_override() {
    let dir = workspace();
    let d = dir.path();
    assert!(
        teacache(&["--config", "exp.ini", "--output", "cal", "calibrate"], d)
            .status
            .success()
    );
    let out = teacache(
        &[
            "--config",
            "exp.ini",
            "--seed-override",
            "9",
            "--output",
            "td",
            "trace-dump",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let names: Vec<String> = fs::read_dir(d.join("td"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec!["trajectory_seed9.csv".to_string()]);
    let csv = fs::read_to_string(d.join("td/trajectory_seed9.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12);
    assert!(csv.lines().nth(1).unwrap().starts_with("11,computed,"));
}

#[test]
fn errors_exit_nonzero_with_kind() {
    let dir = workspace();
    let d = dir.path();
    // The configured rescaler does not exist yet.
    let out = teacache(&["--config", "exp.ini", "--output", "x", "run"], d);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error kind=MissingRescaler"), "{err}");

    fs::write(d.join("bad.ini"), "[policy]\ndelta = -1\n").unwrap();
    let out = teacache(&["--config", "bad.ini", "run"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error kind="));

    fs::write(d.join("typo.ini"), "[policy]\ndeltaa = 0.1\n").unwrap();
    let out = teacache(&["--config", "typo.ini", "run"], d);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=ConfigError"));

    let out = teacache(&["--config", "missing.ini", "run"], d);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=IoError"));
}
