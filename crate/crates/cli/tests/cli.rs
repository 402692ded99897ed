use std::path::Path;
use std::process::{Command, Output};

fn pulseprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulseprep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn payload(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn header(text: &str) -> String {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn exact_reports_three_site_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex");
    let o = pulseprep(&[
        "exact",
        "--sites",
        "3",
        "--m",
        "0.5",
        "--a",
        "0.1",
        "--theta",
        "0.5",
        "--e",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    for row in ["001 0.2233", "010 0.5310", "100 0.2457"] {
        assert!(s.contains(row), "{s}");
    }
    let ground = read(out.join("ground.csv"));
    let body = payload(&ground);
    let p010: f64 = body
        .lines()
        .find_map(|l| l.strip_prefix("010,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((p010 - 0.531).abs() < 5e-3);
    assert_eq!(
        read(out.join("report.txt")).lines().next(),
        Some("# command = \"exact\"")
    );
}

#[test]
fn exact_infinite_temperature_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex2");
    let o = pulseprep(&[
        "exact",
        "--sites",
        "2",
        "--beta",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = payload(&read(out.join("thermal.csv")));
    let row: Vec<&str> = rows.lines().nth(1).unwrap().split(',').collect();
    let s: f64 = row[2].parse().unwrap();
    assert!((s - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert_eq!(row[3], "nan");
}

#[test]
fn invalid_site_count_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = pulseprep(&[
        "exact",
        "--sites",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.contains("site count N must be >= 2"), "{e}");

    let o = pulseprep(&["ground", "--sites", "3", "--init", "01"]);
    assert_eq!(code(&o), 2);
    let o = pulseprep(&["ground", "--device", "no_such_device"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("neither a device preset nor an existing file"));
    let o = pulseprep(&["exact", "--bogus-flag"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn worker_count_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pulseprep"))
        .args([
            "exact",
            "--sites",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("PULSEPREP_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_pulseprep"))
        .args([
            "exact",
            "--sites",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("PULSEPREP_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn trotter_compare_four_sites() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tc");
    let o = pulseprep(&[
        "trotter-compare",
        "--sites",
        "4",
        "--met",
        "181",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("trotter: 55 gates"), "{s}");
    assert!(s.contains("2 routing SWAP"), "{s}");
    assert!(s.contains("duration 7891 ns"), "{s}");
    assert!(s.contains("181 ns + 2 x 71 ns preparation = 323 ns"), "{s}");
    let table = payload(&read(out.join("gates.csv")));
    assert!(
        table.lines().nth(1).unwrap().starts_with("trotter,55,"),
        "{table}"
    );
}

#[test]
fn trotter_compare_three_sites_and_osaka_timings() {
    let o = pulseprep(&[
        "trotter-compare",
        "--sites",
        "3",
        "--met",
        "53",
        "--out",
        tempfile::tempdir().unwrap().path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("trotter: 34 gates"), "{s}");
    assert!(s.contains("entangling: 12 gates"), "{s}");
    assert!(s.contains("speedup trotter = 40.27x"), "{s}");

    let o = pulseprep(&[
        "trotter-compare",
        "--sites",
        "2",
        "--device",
        "ibm_osaka",
        "--out",
        tempfile::tempdir().unwrap().path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("two-qubit 660 ns"), "{s}");
    assert!(s.contains("duration 3137 ns"), "{s}");
    assert!(s.contains("duration 1533 ns"), "{s}");
}

const QUICK_GROUND: &[&str] = &[
    "ground",
    "--sites",
    "2",
    "--segments",
    "10",
    "--restarts",
    "2",
    "--max-iter",
    "30",
];

#[test]
fn ground_is_seed_deterministic_and_headers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let run = |out: &Path| {
        let mut args = QUICK_GROUND.to_vec();
        args.extend([
            "--duration",
            "20",
            "--out",
            out.to_str().unwrap(),
            "--tol",
            "10",
        ]);
        let o = pulseprep(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    run(&a);
    run(&b);
    for f in [
        "restarts.csv",
        "fig2.csv",
        "fig3.csv",
        "schedule.txt",
        "report.txt",
    ] {
        assert_eq!(payload(&read(a.join(f))), payload(&read(b.join(f))), "{f}");
    }
    // Re-running from an output file's header reproduces the run.
    let o = pulseprep(&[
        "run",
        a.join("fig2.csv").to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        payload(&read(a.join("restarts.csv"))),
        payload(&read(c.join("restarts.csv")))
    );
    let ha = header(&read(a.join("restarts.csv")));
    let hc = header(&read(c.join("restarts.csv")));
    let strip = |h: &str| {
        h.lines()
            .filter(|l| !l.starts_with("# output"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&ha), strip(&hc));
    assert!(!read(a.join("report.txt")).contains("fig5"));
}

#[test]
fn unconverged_ground_exits_three_with_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let mut args = QUICK_GROUND.to_vec();
    args.extend(["--duration", "1", "--out", out.to_str().unwrap()]);
    let o = pulseprep(&args);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(read(out.join("report.txt")).contains("NOT CONVERGED"));
    assert!(out.join("restarts.csv").exists());
}

#[test]
fn ground_with_qudits_writes_leakage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g3");
    let mut args = QUICK_GROUND.to_vec();
    args.extend([
        "--duration",
        "20",
        "--levels",
        "3",
        "--tol",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    let o = pulseprep(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fig5 = payload(&read(out.join("fig5.csv")));
    assert!(fig5.lines().any(|l| l.starts_with("total,")));
    assert!(stdout(&o).contains("peak_top_level_population"));
}

#[test]
fn variance_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = pulseprep(&[
        "variance",
        "--site-counts",
        "2,3",
        "--durations",
        "5,10",
        "--samples",
        "4",
        "--segments",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fig6 = payload(&read(out.join("fig6.csv")));
    let rows: Vec<&str> = fig6.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("2-site,5,"));
    for r in rows {
        let v: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert!(v > 0.0);
    }
}

#[test]
fn noisy_ground_writes_three_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n");
    let o = pulseprep(&[
        "noisy-ground",
        "--thetas",
        "0",
        "--restarts",
        "1",
        "--max-iter",
        "3",
        "--segments",
        "5",
        "--duration",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    let fig8 = payload(&read(out.join("fig8.csv")));
    for s in ["exact,0,", "noiseless,0,", "noisy,0,"] {
        assert!(fig8.contains(s), "{fig8}");
    }
    let o = pulseprep(&[
        "noisy-ground",
        "--device",
        "falcon4q_nn",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no collapse rates"));
}

#[test]
fn thermal_grid_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = pulseprep(&[
        "thermal",
        "--beta-grid",
        "0.5:1:2",
        "--restarts",
        "2",
        "--max-iter",
        "10",
        "--segments",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    let table = payload(&read(out.join("thermal.csv")));
    assert_eq!(table.lines().count(), 3, "{table}");
    assert!(table.lines().nth(1).unwrap().starts_with("0.5,"));
    let fig10 = payload(&read(out.join("fig10.csv")));
    assert!(fig10.lines().any(|l| l.starts_with("entropy_exact,1,")));
    let o = pulseprep(&["thermal", "--beta", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn example_configs_drive_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = pulseprep(&["example-config", "exact"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("# Lattice spacing a."));
    let path = dir.path().join("exact.toml");
    std::fs::write(&path, text.replace("[model]\n", "[model]\n# edited\n")).unwrap();
    let out = dir.path().join("from_file");
    let o = pulseprep(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("010 0.5310"));
    let o = pulseprep(&["ground", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("config is for `exact`"));
}

#[test]
fn met_search_on_two_sites() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = pulseprep(&[
        "met",
        "--sites",
        "2",
        "--t-min",
        "2",
        "--t-max",
        "40",
        "--resolution",
        "4",
        "--search",
        "bisection",
        "--restarts",
        "2",
        "--max-iter",
        "200",
        "--segments",
        "20",
        "--tol",
        "1e-2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    let attempts = payload(&read(out.join("attempts.csv")));
    assert!(attempts.starts_with("duration_ns,n_segments,best_delta_e,restarts_used,success"));
    assert!(stdout(&o).contains("warning: bisection"));
}
