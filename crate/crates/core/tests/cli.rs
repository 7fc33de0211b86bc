use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_urbanbound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, surveys: usize) -> PathBuf {
    let o = run(&["synth", "--out", p(dir), "--surveys", &surveys.to_string()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join("surveys.csv")
}

/// Ten one-zone surveys carrying the Chilean survey totals.
fn totals_fixture(dir: &Path) -> PathBuf {
    let totals = [
        ("Arica", 193_073, 568_053),
        ("Iquique", 267_887, 653_181),
        ("Antofagasta", 329_294, 831_484),
        ("Copiapo", 145_683, 417_876),
        ("LaSerena", 366_463, 928_209),
        ("Valparaiso", 964_565, 2_295_100),
        ("Santiago", 6_651_735, 18_461_134),
        ("Temuco", 311_873, 1_008_087),
        ("Valdivia", 161_245, 561_830),
        ("Osorno", 138_967, 468_652),
    ];
    let mut manifest = String::from("survey_id,trips_path,population_path,year\n");
    for (id, pop, trips) in totals {
        fs::write(
            dir.join(format!("{id}_t.csv")),
            format!("origin,destination,weight\ncity,city,{trips}\n"),
        )
        .unwrap();
        fs::write(
            dir.join(format!("{id}_p.csv")),
            format!("zone,population\ncity,{pop}\n"),
        )
        .unwrap();
        manifest.push_str(&format!("{id},{id}_t.csv,{id}_p.csv,\n"));
    }
    let m = dir.join("surveys.csv");
    fs::write(&m, manifest).unwrap();
    m
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn rank_writes_one_block_per_survey() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 3);
    let out = dir.path().join("out");
    let o = run(&[
        "rank",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--deterministic",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("rankings.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "survey_id,zone_id,psi,lambda,scaling_mode,rank_national"
    );
    let ids: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    let mut blocks = ids.clone();
    blocks.dedup();
    assert_eq!(blocks, ["S01", "S02", "S03"]);
    assert_eq!(ids.len(), 3 * 24);

    let meta = read_json(&out.join("run_meta.json"));
    assert_eq!(meta["timestamp_unix"], 0);
    assert_eq!(meta["surveys"].as_array().unwrap().len(), 3);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);

    let first = fs::read(out.join("rankings.csv")).unwrap();
    let again = run(&[
        "rank",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--deterministic",
    ]);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(out.join("rankings.csv")).unwrap(), first);
    assert!(fs::read_dir(&out).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".tmp")));
}

#[test]
fn empty_manifest_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("surveys.csv");
    fs::write(&m, "survey_id,trips_path,population_path,year\n").unwrap();
    let o = run(&["rank", "--manifest", p(&m), "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no surveys"), "{}", stderr(&o));
    assert!(!dir.path().join("rankings.csv").exists());
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("t.csv"),
        "origin,destination,weight\na,b,1\na,b,oops\n",
    )
    .unwrap();
    fs::write(d.join("p.csv"), "zone,population\na,1\nb,2\n").unwrap();
    fs::write(
        d.join("m.csv"),
        "survey_id,trips_path,population_path,year\nX,t.csv,p.csv,2012\n",
    )
    .unwrap();
    let o = run(&["validate", "--manifest", p(&d.join("m.csv")), "--out", p(d)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let missing = run(&["rank", "--manifest", p(&d.join("nope.csv"))]);
    assert_eq!(code(&missing), 2);
    let bad_flag = run(&[
        "rank",
        "--manifest",
        p(&d.join("m.csv")),
        "--scaling-mode",
        "unit3",
    ]);
    assert_eq!(code(&bad_flag), 2);
}

#[test]
fn degenerate_survey_succeeds_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("t1.csv"),
        "origin,destination,weight\na,b,5\nb,a,5\nc,d,5\nb,c,1\n",
    )
    .unwrap();
    fs::write(
        d.join("p1.csv"),
        "zone,population\na,10\nb,10\nc,10\nd,10\n",
    )
    .unwrap();
    fs::write(d.join("t2.csv"), "origin,destination,weight\n").unwrap();
    fs::write(d.join("p2.csv"), "zone,population\nx,10\ny,20\n").unwrap();
    fs::write(
        d.join("m.csv"),
        "survey_id,trips_path,population_path,year\nA,t1.csv,p1.csv,\nB,t2.csv,p2.csv,\n",
    )
    .unwrap();
    let o = run(&["rank", "--manifest", p(&d.join("m.csv")), "--out", p(d)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let meta = read_json(&d.join("run_meta.json"));
    let warnings = meta["surveys"][1]["warnings"].to_string();
    assert!(warnings.contains("degenerate"), "{warnings}");
    assert_eq!(meta["surveys"][1]["lambda"], 0.0);

    let v = run(&["validate", "--manifest", p(&d.join("m.csv")), "--out", p(d)]);
    assert_eq!(code(&v), 0);
    assert!(String::from_utf8_lossy(&v.stdout).contains("no trips"));
    assert!(d.join("validation.json").exists());
}

#[test]
fn two_point_grid_gives_two_thresholds_plus_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 10);
    let out = dir.path().join("out");
    let o = run(&[
        "sweep",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--grid-points",
        "2",
        "--q-lo",
        "0.3",
        "--q-hi",
        "0.7",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "threshold,regime,beta,ci_lo,ci_hi,r2,adj_r2,n_points,flags"
    );
    assert!(lines[1].starts_with(",baseline,"));
    assert_eq!(lines.len(), 1 + 1 + 2 * 2);
    let mut thresholds: Vec<&str> = lines[2..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    thresholds.dedup();
    assert_eq!(thresholds.len(), 2);
    let meta = read_json(&out.join("sweep_meta.json"));
    assert_eq!(meta["grid"]["values"].as_array().unwrap().len(), 2);
    assert_eq!(meta["attribution"], "origin");
}

#[test]
fn survey_totals_only_give_baseline_and_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = totals_fixture(dir.path());
    let out = dir.path().join("out");
    let o = run(&["sweep", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let baseline: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(baseline[1], "baseline");
    let beta: f64 = baseline[2].parse().unwrap();
    assert!((beta - 0.95).abs() < 0.01, "{beta}");
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn solver_budget_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 2);
    let o = run(&[
        "rank",
        "--manifest",
        p(&manifest),
        "--out",
        p(dir.path()),
        "--max-iter",
        "2",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("converge"));
}

#[test]
fn classify_checks_preconditions_and_joins_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let manifest = synth(&data, 4);
    let out = dir.path().join("out");
    let same = run(&[
        "classify",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--psi-a",
        "100",
        "--psi-b",
        "100",
    ]);
    assert_eq!(code(&same), 2);
    let missing = run(&[
        "classify",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--geometry",
        p(&data.join("absent.geojson")),
    ]);
    assert_eq!(code(&missing), 2);
    assert!(!out.join("classification.csv").exists());

    let o = run(&[
        "classify",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--geometry",
        p(&data.join("zones.geojson")),
        "--psi-a",
        "1e3",
        "--psi-b",
        "1e4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let classes = fs::read_to_string(out.join("classification.csv")).unwrap();
    assert_eq!(
        classes.lines().next().unwrap(),
        "survey_id,zone_id,psi,class"
    );
    assert_eq!(classes.lines().count(), 1 + 4 * 24);
    let summary = fs::read_to_string(out.join("classification_summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert!(
        header.starts_with("survey_id,rural_at_psi_a,urban_at_psi_a,rural_at_psi_b,urban_at_psi_b")
    );
    assert!(summary.lines().last().unwrap().starts_with("TOTAL,"));
    let geo = read_json(&out.join("classification.geojson"));
    let features = geo["features"].as_array().unwrap();
    assert_eq!(features.len(), 4 * 24);
    assert!(features.iter().all(|f| f["geometry"]["type"] == "Point"));
    assert!(features.iter().all(
        |f| ["rural", "urban", "central"].contains(&f["properties"]["class"].as_str().unwrap())
    ));
}

#[test]
fn report_has_four_fits_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 10);
    let out = dir.path().join("out");
    let o = run(&[
        "report",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--psi-a",
        "3e3",
        "--psi-b",
        "1e4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    let slope = md
        .lines()
        .find(|l| l.starts_with("| Slope (beta)"))
        .unwrap();
    let cells: Vec<&str> = slope
        .split('|')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect();
    assert_eq!(cells.len(), 5);
    assert!(
        cells[1..].iter().all(|c| c.parse::<f64>().is_ok()),
        "{slope}"
    );
    let meta_hash = {
        let r = run(&[
            "rank",
            "--manifest",
            p(&manifest),
            "--out",
            p(&out),
            "--psi-a",
            "3e3",
            "--psi-b",
            "1e4",
        ]);
        assert_eq!(code(&r), 0);
        read_json(&out.join("run_meta.json"))["config_hash"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert!(md.contains(&meta_hash));
    assert!(md.contains("## Warnings"));
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    synth(&a, 3);
    synth(&b, 3);
    let o = run(&["synth", "--out", p(&c), "--surveys", "3", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3 * 2 + 2);
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n:?}"
        );
    }
    assert_ne!(
        fs::read(a.join("trips_S01.csv")).unwrap(),
        fs::read(c.join("trips_S01.csv")).unwrap()
    );
}
