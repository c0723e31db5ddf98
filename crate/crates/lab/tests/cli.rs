use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_mckean-lab");

const BASE: &str = r#"eps = 0.1

[potentials]
V = [0, 0, -0.5, 0, 0.25]
F = [0, 0, 0.25]

[grid]
n = 401

[solver]
dt = 0.01
t_end = 400
record_every = 10
"#;

fn run(dir: &TempDir, sub: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(extra)
        .env_remove("MCKEAN_LAB_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect::<Vec<_>>();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    for row in &rows {
        assert_eq!(row.len(), header.len(), "{}", path.display());
    }
    (header, rows)
}

#[test]
fn validate_prints_the_structural_constants() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, "validate", BASE, &[]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for key in ["a = 1", "m = 2", "n = 1", "x0 = 0.7071067811865476", "LIN = true", "SYN = false"] {
        assert!(s.contains(key), "{s}");
    }
}

#[test]
fn stationary_report_has_three_rows() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, "stationary", BASE, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/stationary.csv"));
    assert_eq!(header, ["symmetry", "m1", "m2", "free_energy", "residual", "eta_norm"]);
    assert_eq!(rows.len(), 3);
    let summary = fs::read_to_string(dir.path().join("out/stationary_summary.txt")).unwrap();
    assert!(summary.starts_with("m3_status = M3\n"));
    let (dh, drows) = read_csv(&dir.path().join("out/stationary_0_symmetric.csv"));
    assert_eq!(dh, ["x", "u"]);
    assert_eq!(drows.len(), 401);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, "validate", &BASE.replace("eps = 0.1\n", ""), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps"));

    let odd = BASE.replace("[0, 0, -0.5, 0, 0.25]", "[0, 0.2, -0.5, 0, 0.25]");
    let o = run(&dir, "validate", &odd, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("V-1"));

    let o = run(&dir, "validate", &format!("{BASE}bogus = 1\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 14"));
}

#[test]
fn strict_basin_with_failing_hypothesis_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        "{BASE}\n[[experiment]]\nname = \"wrong side\"\nexpected = \"plus\"\n\
         hypotheses = [\"mean_positive\"]\nu0 = {{ kind = \"gaussian\", mean = -0.5, std = 0.2 }}\n"
    );
    let o = run(&dir, "basin", &cfg, &["--strict"]);
    assert_eq!(o.status.code(), Some(1));
    let line = fs::read_to_string(dir.path().join("out/basin.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["hypothesis_ok"], false);
    assert_eq!(v["passed"], false);

    // without --strict the run is labeled out-of-hypothesis and not a failure
    let o = run(&dir, "basin", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn basin_verdicts_mirror() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        "{BASE}\n[[experiment]]\nname = \"bump\"\nexpected = \"plus\"\nmirror = true\n\
         hypotheses = [\"mean_positive\", \"energy_below_symmetric_level\"]\n\
         u0 = {{ kind = \"gaussian\", mean = 0.95, std = 0.1 }}\n"
    );
    let o = run(&dir, "basin", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("out/basin.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["matched_branch"], "asymmetric_plus");
    assert_eq!(lines[1]["matched_branch"], "asymmetric_minus");
    for l in &lines {
        for key in ["name", "hypothesis_ok", "matched_branch", "final_distance", "fe_limit", "passed"] {
            assert!(l.get(key).is_some());
        }
        assert_eq!(l["passed"], true);
    }
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let cfg = BASE.replace("eps = 0.1\n", "eps = 0.3\nseed = 5\n")
        + "[initial]\nkind = \"gaussian\"\nmean = 0.3\nstd = 0.4\n\
           [particles]\nn = 500\ndt = 0.01\nt_end = 1\nrecord_every = 10\nwrite_points = true\n";
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(run(&a, "particles", &cfg, &[]).status.code(), Some(0));
    assert_eq!(run(&b, "particles", &cfg, &[]).status.code(), Some(0));
    for f in ["particles.csv", "points.csv"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let (header, rows) = read_csv(&a.path().join("out/particles.csv"));
    assert_eq!(header, ["t", "m1", "m2", "m3", "m4", "upsilonN"]);
    assert_eq!(rows.len(), 11);

    let c = TempDir::new().unwrap();
    run(&c, "particles", &cfg, &["--seed", "6"]);
    assert_ne!(
        fs::read(a.path().join("out/points.csv")).unwrap(),
        fs::read(c.path().join("out/points.csv")).unwrap()
    );
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, BASE).unwrap();
    let target = dir.path().join("from_env");
    let o = Command::new(BIN)
        .args(["stationary", "--config"])
        .arg(&cfg)
        .env("MCKEAN_LAB_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("stationary.csv").exists());
}

fn svg(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    roxmltree::Document::parse(&text).unwrap();
    text
}

fn polyline_ys(doc: &roxmltree::Document) -> Vec<Vec<f64>> {
    doc.descendants()
        .filter(|n| n.attribute("class") == Some("series"))
        .map(|n| {
            n.attribute("points")
                .unwrap()
                .split_whitespace()
                .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn evolve_writes_trajectory_and_decreasing_energy_plot() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{BASE}\n[initial]\nkind = \"uniform\"\nlo = -1.5\nhi = 1.0\n");
    let o = run(&dir, "evolve", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/trajectory.csv"));
    assert_eq!(&header[..4], ["t", "free_energy", "dissipation", "m1"]);
    assert!(rows.len() > 10);
    let text = svg(&dir.path().join("out/free_energy.svg"));
    let doc = roxmltree::Document::parse(&text).unwrap();
    let ys = polyline_ys(&doc);
    assert_eq!(ys.len(), 1);
    // screen y grows downward
    assert!(ys[0].windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn converge_overlays_three_densities() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        "{BASE}\n[[experiment]]\nname = \"Triangle start\"\nexpected = \"symmetric\"\n\
         u0 = {{ kind = \"triangle\", center = 0.0, half_width = 1.5 }}\n"
    );
    let o = run(&dir, "converge", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = svg(&dir.path().join("out/triangle_start_density.svg"));
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(polyline_ys(&doc).len(), 3);
    let legend = doc.descendants().filter(|n| n.attribute("class") == Some("legend")).count();
    assert_eq!(legend, 3);
}

#[test]
fn asymptotics_sweep_and_laplace_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = BASE.replace("eps = 0.1", "eps_list = [0.4, 0.2, 0.1]")
        + "\n[laplace]\nU = [0.25, 0, -0.5, 0, 0.25]\neps_list = [0.2, 0.1]\nl = [1, 2]\n";
    let o = run(&dir, "asymptotics", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/sweep.csv"));
    assert_eq!(
        header,
        ["eps", "fe_sym", "fe_plus", "fe_minus", "predicted_sym_limit", "predicted_asym_limit"]
    );
    assert_eq!(rows.len(), 3);
    let text = svg(&dir.path().join("out/sweep.svg"));
    assert_eq!(text.matches("class=\"ref\"").count(), 2);
    let (_, lap) = read_csv(&dir.path().join("out/laplace.csv"));
    assert_eq!(lap.len(), 4);
    assert_eq!(lap[0][2], "0.0");
}
