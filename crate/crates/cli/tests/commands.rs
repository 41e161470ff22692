use std::path::{Path, PathBuf};
use std::process::Command;

use protoline::fields::{Mat2, Vec2};
use protoline::linear::{in_half_plane, monstar_alpha_window, normal_form, LinearPlf};
use protoline::portrait::Portrait;
use protoline_cli::{Report, REPORT_COLUMNS, SCAN_COLUMNS, STREAMLINE_COLUMNS};
use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn protoline(args: &[&str], config: &Path, out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_protoline"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn read_report(dir: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn classify_canonical_trio() {
    for (name, class, twice) in [
        ("lemon", "Lemon", 1),
        ("monstar", "Monstar", 1),
        ("star", "Star", -1),
    ] {
        let dir = TempDir::new().unwrap();
        assert_eq!(protoline(&["classify"], &scenario(name), dir.path()), 0);
        let r = read_report(dir.path());
        assert_eq!(r.singularities.len(), 1);
        let s = &r.singularities[0];
        assert_eq!(s.class_name(), class);
        assert_eq!(s.twice_index, Some(twice));
        assert!(s.p().norm() < 1e-12);
        assert!(r.checks.iter().all(|c| c.passed), "{name}: {:?}", r.checks);
    }
}

#[test]
fn degenerate_scenario_exits_four() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["classify"], &scenario("degenerate"), dir.path()),
        4
    );
    let r = read_report(dir.path());
    assert_eq!(r.singularities[0].class_name(), "Degenerate");
    assert!(
        !r.checks
            .iter()
            .find(|c| c.name == "darbouxian")
            .unwrap()
            .passed
    );
}

#[test]
fn report_json_round_trips() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["classify"], &scenario("torus-sine"), dir.path()),
        0
    );
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let r: Report = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&r).unwrap() + "\n";
    assert_eq!(again, text);
    let back: Report = serde_json::from_str(&again).unwrap();
    assert_eq!(back, r);
    assert_eq!(r.singularities.len(), 4);
    assert_eq!(r.twice_index_sum, 0);
}

#[test]
fn report_csv_has_one_row_per_singularity() {
    let dir = TempDir::new().unwrap();
    let code = protoline(
        &["classify", "--format", "csv"],
        &scenario("torus-sine"),
        dir.path(),
    );
    assert_eq!(code, 0);
    let (header, rows) = csv_rows(&dir.path().join("report.csv"));
    assert_eq!(header, REPORT_COLUMNS);
    assert_eq!(rows.len(), 4);
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn lemon_portrait_files() {
    let dir = TempDir::new().unwrap();
    assert_eq!(protoline(&["portrait"], &scenario("lemon"), dir.path()), 0);
    let svg = std::fs::read_to_string(dir.path().join("portrait.svg")).unwrap();
    assert_eq!(svg.matches("<circle class=\"singularity\"").count(), 1);
    assert!(svg.contains(">Lemon</text>"));
    assert!(svg.matches("<path class=\"streamline\"").count() >= 20);
    assert!(svg.matches("<path class=\"skeleton\"").count() >= 1);
    let (header, rows) = csv_rows(&dir.path().join("streamlines.csv"));
    assert_eq!(header, STREAMLINE_COLUMNS);
    assert!(rows.len() > 100);
}

#[test]
fn portrait_output_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        assert_eq!(protoline(&["portrait"], &scenario("monstar"), d.path()), 0);
    }
    for f in ["portrait.svg", "streamlines.csv", "report.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn bifurcation_parameter_changes_the_portrait() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(
        protoline(
            &["portrait", "--param", "1"],
            &scenario("bifurcation"),
            a.path()
        ),
        0
    );
    assert_eq!(
        protoline(
            &["portrait", "--param", "3"],
            &scenario("bifurcation"),
            b.path()
        ),
        0
    );
    let x = std::fs::read(a.path().join("streamlines.csv")).unwrap();
    let y = std::fs::read(b.path().join("streamlines.csv")).unwrap();
    assert_ne!(x, y);
    assert!(a.path().join("portrait.svg").exists() && b.path().join("portrait.svg").exists());
}

#[test]
fn case2_skeleton_in_half_plane() {
    let dir = TempDir::new().unwrap();
    let code = protoline(
        &["portrait", "--format", "json"],
        &scenario("case2"),
        dir.path(),
    );
    assert_eq!(code, 0);
    let p: Portrait =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("portrait.json")).unwrap())
            .unwrap();
    let thetas: Vec<f64> = p.skeleton.iter().map(|s| s.tag.unwrap().theta).collect();
    assert_eq!(thetas.len(), 3);
    assert!(in_half_plane(&thetas));
}

#[test]
fn lambda_scan_is_marginal_at_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["scan"], &scenario("lambda-scan"), dir.path()),
        0
    );
    let (header, rows) = csv_rows(&dir.path().join("scan.csv"));
    assert_eq!(header, SCAN_COLUMNS);
    for row in &rows {
        let lambda: f64 = row[0].parse().unwrap();
        let slope: f64 = row[7].parse().unwrap();
        assert!((slope - lambda / 2.0).abs() < 1e-6);
        assert_eq!(row[1], "Lemon");
        assert_eq!(row[8] == "true", lambda == 2.0);
        let want = if lambda < 2.0 {
            "Lemon"
        } else if lambda == 2.0 {
            "Degenerate"
        } else {
            "Monstar"
        };
        assert_eq!(row[4], want, "lambda = {lambda}");
    }
}

#[test]
fn alpha_sweep_follows_window() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["scan"], &scenario("alpha-sweep"), dir.path()),
        0
    );
    let a = Mat2::new(1.0, 0.0, 0.0, 3.0);
    let nf = normal_form(&LinearPlf::new(a, Vec2::new(1.0, 0.0))).unwrap();
    let windows = monstar_alpha_window(&nf);
    let (_, rows) = csv_rows(&dir.path().join("scan.csv"));
    assert_eq!(rows.len(), 73);
    let mut inside = 0;
    for row in &rows {
        let alpha: f64 = row[0].parse().unwrap();
        let normal = nf.alpha_of(Vec2::new(alpha.cos(), alpha.sin()));
        let expect = windows.iter().any(|w| w.contains(normal));
        assert_eq!(row[1] == "Monstar", expect, "alpha = {alpha}");
        // With a Euclidean metric the raw-coordinate reading agrees.
        assert_eq!(row[4], row[1], "alpha = {alpha}");
        inside += expect as usize;
    }
    assert!(inside > 0 && inside < rows.len());
}

#[test]
fn kappa_above_one_scan_is_constant() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(
            &["scan", "--format", "json"],
            &scenario("kappa-scan"),
            dir.path()
        ),
        0
    );
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scan.json")).unwrap())
            .unwrap();
    assert_eq!(rows.len(), 25);
    for r in &rows {
        assert_eq!(r["case"], "Case1");
        assert_eq!(r["transition"], false);
    }
}

#[test]
fn worked_metric_at_origin() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["metric"], &scenario("metric-worked"), dir.path()),
        0
    );
    let (_, rows) = csv_rows(&dir.path().join("metric.csv"));
    let origin = rows
        .iter()
        .find(|r| {
            r[0].parse::<f64>().unwrap().abs() < 1e-12 && r[1].parse::<f64>().unwrap().abs() < 1e-12
        })
        .expect("origin sampled");
    let g: Vec<f64> = origin[3..6].iter().map(|v| v.parse().unwrap()).collect();
    assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12 && (g[2] - 0.5).abs() < 1e-12);
}

#[test]
fn metric_of_equal_fields_fails() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["metric"], &scenario("metric-degenerate"), dir.path()),
        3
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metric.json")).unwrap())
            .unwrap();
    assert_eq!(v["spd_fraction"], 0.0);
    assert_eq!(v["degenerate_points"].as_array().unwrap().len(), 100);
}

#[test]
fn random_metric_is_mostly_spd_and_seeded() {
    let (a, b, c) = (
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
    );
    assert_eq!(
        protoline(&["metric"], &scenario("metric-random"), a.path()),
        0
    );
    assert_eq!(
        protoline(&["metric"], &scenario("metric-random"), b.path()),
        0
    );
    assert_eq!(
        protoline(
            &["metric", "--seed", "8"],
            &scenario("metric-random"),
            c.path()
        ),
        0
    );
    let read = |d: &TempDir| std::fs::read(d.path().join("metric.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("metric.json")).unwrap())
            .unwrap();
    assert!(v["spd_fraction"].as_f64().unwrap() >= 0.99);
}

#[test]
fn torus_check_sums_to_zero() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["torus-check"], &scenario("torus-sine"), dir.path()),
        0
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("torus.json")).unwrap())
            .unwrap();
    assert_eq!(v["twice_index_sum"], 0);
    assert_eq!(v["holds"], true);
    let other = TempDir::new().unwrap();
    assert_eq!(
        protoline(&["torus-check"], &scenario("lemon"), other.path()),
        2
    );
}

#[test]
fn blowup_and_index_commands() {
    let dir = TempDir::new().unwrap();
    assert_eq!(protoline(&["blowup"], &scenario("monstar"), dir.path()), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("blowup.json")).unwrap())
            .unwrap();
    assert_eq!(v[0]["class"], "Monstar");
    assert_eq!(v[0]["zeros"].as_array().unwrap().len(), 6);
    assert!(v[0]["max_rel_error"].as_f64().unwrap() < 1e-3);

    assert_eq!(
        protoline(&["index", "--format", "csv"], &scenario("star"), dir.path()),
        0
    );
    let (_, rows) = csv_rows(&dir.path().join("index.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][4], "-1");
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(protoline(&["classify"], &missing, dir.path()), 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"x": ["x", "y"], "y": ["1", "0"], "domain": {"box": [0, 0, 0, 1]}}"#,
    )
    .unwrap();
    assert_eq!(protoline(&["classify"], &bad, dir.path()), 2);
    assert_eq!(
        protoline(
            &["classify", "--format", "svg"],
            &scenario("lemon"),
            dir.path()
        ),
        2
    );
    assert_eq!(protoline(&["scan"], &scenario("lemon"), dir.path()), 2);
}
