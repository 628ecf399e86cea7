use std::path::Path;
use std::process::Command;

fn fermisim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fermisim"))
        .args(args)
        .output()
        .unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

fn rows(csv_text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(csv_text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn run_is_byte_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = fermisim(&[
            "run",
            "--experiment",
            "fig4_3mode",
            "--steps",
            "3",
            "--noise",
            "paper",
            "--seed",
            "42",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (read_dir_sorted(dirs[0].path()), read_dir_sorted(dirs[1].path()));
    assert_eq!(a.len(), 2);
    assert_eq!(a, b);
}

#[test]
fn time_series_has_documented_columns() {
    let d = tempfile::tempdir().unwrap();
    let out = fermisim(&["run", "--experiment", "fig4_4mode", "--out", d.path().to_str().unwrap()]);
    assert!(out.status.success());
    let mut r = csv::Reader::from_path(d.path().join("fig4_4mode.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "time",
            "P_mode1",
            "P_mode2",
            "P_mode3",
            "P_mode4",
            "P_other",
            "fidelity",
            "fidelity_exact",
            "overlap"
        ]
    );
    assert_eq!(r.records().count(), 5);
}

#[test]
fn census_json_is_stable() {
    let d = tempfile::tempdir().unwrap();
    let out = fermisim(&[
        "run",
        "--experiment",
        "census_table_s1",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(d.path().join("census.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for (row, ent, single) in [("two_mode", 6, 28), ("three_mode", 12, 87), ("four_mode", 10, 98)] {
        assert_eq!(v[row]["entangling"], ent);
        assert_eq!(v[row]["single_qubit"], single);
        for key in ["microwave", "idle", "detune", "virtual"] {
            assert!(v[row][key].is_u64());
        }
    }
    let again = tempfile::tempdir().unwrap();
    fermisim(&[
        "run",
        "--experiment",
        "census_table_s1",
        "--out",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(text, std::fs::read_to_string(again.path().join("census.json")).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "fig3", "steps": 3, "model": {"v": 1.0, "u": 0.5}}"#,
    )
    .unwrap();
    let out_dir = d.path().join("out");
    let out = fermisim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 4);
    assert_eq!(
        column(&out_dir.join("fig3_end_states.csv"), "steps"),
        ["1", "2", "3", "4"]
    );
}

#[test]
fn validation_errors_exit_with_code_2() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path().to_str().unwrap();
    for args in [
        vec!["run", "--experiment", "fig9", "--out", o],
        vec!["run", "--experiment", "fig3", "--steps", "0", "--out", o],
        vec!["run", "--experiment", "fig3", "--noise", "loud", "--out", o],
        vec!["run", "--experiment", "fig3", "--noise", "500", "--out", o],
        vec!["run", "--experiment", "fig3", "--ordering", "s7", "--out", o],
        vec![
            "sweep",
            "--experiment",
            "census_table_s1",
            "--axis",
            "steps",
            "--from",
            "1",
            "--to",
            "2",
            "--out",
            o,
        ],
        vec![
            "sweep",
            "--experiment",
            "fig3",
            "--axis",
            "colour",
            "--values",
            "1",
            "--out",
            o,
        ],
    ] {
        let out = fermisim(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment": "fig3", "stepz": 3}"#).unwrap();
    let out = fermisim(&["run", "--config", cfg.to_str().unwrap(), "--out", o]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));
    let missing = d.path().join("missing.json");
    let out = fermisim(&["run", "--config", missing.to_str().unwrap(), "--out", o]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn steps_sweep_tabulates_each_count() {
    let d = tempfile::tempdir().unwrap();
    let out = fermisim(&[
        "sweep",
        "--experiment",
        "fig3",
        "--axis",
        "steps",
        "--from",
        "1",
        "--to",
        "8",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(table.len(), 8);
    let dt = column(&d.path().join("sweep.csv"), "dt");
    let dt: Vec<f64> = dt.iter().map(|x| x.parse().unwrap()).collect();
    assert!(dt.windows(2).all(|w| w[1] < w[0]));
    for n in 1..=8 {
        assert!(d.path().join(format!("steps_{n}")).join("fig3.csv").exists());
    }
    // Two modes carry no digital error, so every row matches exact evolution.
    for f in column(&d.path().join("sweep.csv"), "end_fidelity_exact") {
        assert!((f.parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn zero_noise_sweep_keeps_ideal_fidelity() {
    let d = tempfile::tempdir().unwrap();
    let out = fermisim(&[
        "sweep",
        "--experiment",
        "fig4_3mode",
        "--axis",
        "noise_scale",
        "--values",
        "0,1",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let fids = column(&d.path().join("noise_scale_0").join("fig4_3mode.csv"), "fidelity");
    assert!(fids.iter().all(|f| f == "1"));
    let noisy = column(&d.path().join("noise_scale_1").join("fig4_3mode.csv"), "fidelity");
    assert!(noisy[1..].iter().all(|f| f.parse::<f64>().unwrap() < 0.99));
}

#[test]
fn ordering_sweep_reports_overlap_and_census() {
    let d = tempfile::tempdir().unwrap();
    let out = fermisim(&[
        "sweep",
        "--experiment",
        "fig4_4mode",
        "--axis",
        "ordering",
        "--values",
        "s5,s6",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let sweep = d.path().join("sweep.csv");
    let totals = column(&sweep, "census_full_run.total");
    assert_ne!(totals[0], totals[1]);
    let overlap = column(&sweep, "ordering_overlap");
    assert_eq!(overlap[0], overlap[1]);
    let o: f64 = overlap[0].parse().unwrap();
    assert!(o > 0.0 && o <= 1.0);
}
