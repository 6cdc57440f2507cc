use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plasmon_hom::fitting::visibility_v2;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> PathBuf {
    configs().join(name)
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_plasmon-hom"));
    cmd.env_remove(plasmon_hom::cli::SEED_ENV);
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_column(text: &str, col: usize) -> Vec<f64> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

fn sweep_p(config: &str, branches: usize, dir: &Path) -> Vec<f64> {
    let out = dir.join(format!("{config}.csv"));
    let o = run(&["sweep-coupler", s(&cfg(config)), "--at-5050-branches", &branches.to_string(), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "length_um,reflectance,transmittance,throughput,P");
    csv_column(&text, 4)
}

#[test]
fn sweep_branches_reproduce_decoherence_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let lossless = sweep_p("lossless.toml", 5, dir.path());
    assert!(lossless.iter().all(|&p| p == 1.0), "{lossless:?}");
    let dlsppw = sweep_p("dlsppw.toml", 5, dir.path());
    assert!(dlsppw.windows(2).all(|w| w[1] < w[0]));
    assert!(dlsppw.iter().all(|&p| p > 0.999));
    let metal = sweep_p("metal_strip.toml", 5, dir.path());
    assert!(metal.windows(2).all(|w| w[1] < w[0]));
    assert!(metal.iter().zip(&dlsppw).all(|(m, d)| m < d));
}

#[test]
fn sweep_explicit_lengths_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let gp = dir.path().join("s.gp");
    let o = run(&[
        "sweep-coupler", s(&cfg("metal_strip.toml")), "--lengths", "200,0,1.5", "--out", s(&out), "--gnuplot", s(&gp),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv_column(&text, 0), vec![0.0, 1.5, 200.0]);
    let p = csv_column(&text, 4);
    assert_eq!(p[0], 0.0);
    assert!((p[2] - 0.5).abs() < 1e-3);
    assert!(std::fs::read_to_string(&gp).unwrap().contains(s(&out)));
}

#[test]
fn sweep_argument_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["sweep-coupler", s(&cfg("dlsppw.toml")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write(dir.path(), "bad.toml", "[coupler]\nwavelength_um = 1.55\ncolour = 3\n");
    let o = run(&["sweep-coupler", s(&bad), "--at-5050-branches", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let flat = write(
        dir.path(),
        "flat.toml",
        "[coupler]\nwavelength_um = 1.55\nn_symmetric = { real = 1.2 }\nn_antisymmetric = { real = 1.2, loss = 0.01 }\n",
    );
    let o = run(&["sweep-coupler", s(&flat), "--at-5050-branches", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no mode beating"));
    let o = run(&["find-splitter", s(&flat), "--max-length-um", "10"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn find_splitter_tables() {
    let o = run(&["find-splitter", s(&cfg("dlsppw.toml")), "--max-length-um", "25"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "m,length_um,P,throughput");
    let lengths = csv_column(&text, 1);
    assert!((lengths[0] - 2.3065).abs() < 1e-4);
    assert_eq!(lengths.len(), 5);

    let o = run(&["find-splitter", s(&cfg("lossless.toml")), "--max-length-um", "40"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(csv_column(&text, 2).iter().all(|&p| p == 1.0));

    let o = run(&["find-splitter", s(&cfg("metal_strip.toml")), "--max-length-um", "50"]);
    let p = csv_column(&String::from_utf8(o.stdout).unwrap(), 2);
    assert!(p.last().unwrap() < &p[0]);
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..4).map(|i| dir.path().join(format!("d{i}.csv"))).collect();
    let c = cfg("photons_standard.toml");
    assert!(run(&["simulate", s(&c), "--seed", "5", "--out", s(&paths[0])]).status.success());
    assert!(run(&["simulate", s(&c), "--seed", "5", "--out", s(&paths[1])]).status.success());
    assert!(run(&["simulate", s(&c), "--seed", "5", "--sequential", "--out", s(&paths[2])]).status.success());
    let o = bin()
        .args(["simulate", s(&c), "--out", s(&paths[3])])
        .env(plasmon_hom::cli::SEED_ENV, "5")
        .output()
        .unwrap();
    assert!(o.status.success());
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert!(bytes.iter().all(|b| b == &bytes[0]));
    assert!(String::from_utf8_lossy(&bytes[0]).starts_with("stage_position_um,counts,integration_s\n"));

    let other = dir.path().join("other.csv");
    run(&["simulate", s(&c), "--seed", "6", "--out", s(&other)]);
    assert_ne!(std::fs::read(&other).unwrap(), bytes[0]);
}

#[test]
fn simulate_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let bad = write(dir.path(), "bad.toml", "[experiment]\nvisibility_cap = 2.0\n[overlap]\ncoherence_length_um = 100.0\n");
    let o = run(&["simulate", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let missing = write(dir.path(), "missing.toml", "[experiment]\n");
    assert_eq!(run(&["simulate", s(&missing), "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn modified_center_is_twice_the_wings() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "m.toml",
        "[experiment]\nconfiguration = \"modified\"\nintegration_time_s = 200.0\nstage_positions_um = [-2000.0, -1900.0, 0.0, 1900.0, 2000.0]\n[overlap]\ncoherence_length_um = 173.9\n",
    );
    let out = dir.path().join("d.csv");
    assert!(run(&["simulate", s(&c), "--out", s(&out)]).status.success());
    let counts = csv_column(&std::fs::read_to_string(&out).unwrap(), 1);
    let wing = (counts[0] + counts[1] + counts[3] + counts[4]) / 4.0;
    // Wing mean ~15750 counts, so the ratio is good to about 2%.
    assert!((counts[2] / wing - 2.0).abs() < 0.05, "{counts:?}");
}

#[test]
fn zero_visibility_series_is_statistically_flat() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "f.toml", "[experiment]\nvisibility_cap = 0.0\nrng_seed = 4\n[overlap]\ncoherence_length_um = 162.6\n");
    let out = dir.path().join("d.csv");
    assert!(run(&["simulate", s(&c), "--out", s(&out)]).status.success());
    let counts = csv_column(&std::fs::read_to_string(&out).unwrap(), 1);
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|y| (y - mean).powi(2) / mean).sum();
    // Upper 0.1% point of chi-square with 60 degrees of freedom.
    assert!(chi2 < 99.607, "chi2 = {chi2}");
}

fn report_value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find(|l| l.starts_with(&format!("{key},")))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&["simulate", s(&cfg("photons_standard.toml")), "--out", s(&data)]).status.success());
    let report = dir.path().join("fit.txt");
    let o = run(&["fit", s(&data), "--polarity", "dip", "--out", s(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("converged: true"));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), text);
    let csv = std::fs::read_to_string(dir.path().join("fit.csv")).unwrap();
    assert!((report_value(&csv, "visibility_V") - 0.955).abs() < 0.03);
    assert!((report_value(&csv, "coherence_length_um") / 162.6 - 1.0).abs() < 0.1);
    assert_eq!(report_value(&csv, "converged"), 1.0);
}

#[test]
fn peak_fit_report_is_consistent_with_v2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&["simulate", s(&cfg("photons_modified.toml")), "--out", s(&data)]).status.success());
    let csv_out = dir.path().join("r.csv");
    let o = run(&["fit", s(&data), "--polarity", "peak", "--out", s(&dir.path().join("r.txt")), "--csv-out", s(&csv_out)]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&csv_out).unwrap();
    let v = report_value(&csv, "visibility_V");
    let v2 = visibility_v2(report_value(&csv, "model_max"), report_value(&csv, "model_min")).unwrap();
    assert!((v2 - v).abs() < 1e-10, "{v2} vs {v}");
}

#[test]
fn fit_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.txt");

    let flat = write(dir.path(), "flat.csv", "stage_position_um,counts,integration_s\n0,7,1\n1,7,1\n2,7,1\n3,7,1\n4,7,1\n5,7,1\n");
    let o = run(&["fit", s(&flat), "--polarity", "dip", "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no interference feature detected"));

    let broken = write(dir.path(), "broken.csv", "stage_position_um,counts,integration_s\n0,7,1\n1,seven,1\n");
    let o = run(&["fit", s(&broken), "--polarity", "dip", "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let short = write(dir.path(), "short.csv", "stage_position_um,counts,integration_s\n0,7,1\n1,3,1\n");
    assert_eq!(run(&["fit", s(&short), "--polarity", "dip", "--out", s(&report)]).status.code(), Some(2));

    let data = dir.path().join("d.csv");
    run(&["simulate", s(&cfg("photons_standard.toml")), "--out", s(&data)]);
    let opts = write(dir.path(), "opts.toml", "[fit]\nmax_iterations = 1\n");
    let o = run(&["fit", s(&data), "--polarity", "dip", "--out", s(&report), "--config", s(&opts)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(std::fs::read_to_string(&report).unwrap().contains("converged: false"));
}

#[test]
fn plasmon_chip_config_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&["simulate", s(&cfg("plasmon_chip.toml")), "--out", s(&data)]).status.success());
    let o = run(&["fit", s(&data), "--polarity", "peak", "--out", s(&dir.path().join("r.txt"))]);
    assert!(o.status.success());
    let o = run(&["simulate", s(&cfg("run.toml")), "--out", s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
