//! Black-box tests of the binary: exit codes, CSV contract, determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_volcev"))
}

fn tmpdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("volcev-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn price_default_config_succeeds() {
    let out = bin().args(["price", "var-swap", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("value:"));
    assert!(text.contains("2.79849317011e-2"), "unexpected value in:\n{text}");
}

#[test]
fn validation_failure_exits_3() {
    let dir = tmpdir();
    let cfg = dir.join("bad_gamma.toml");
    std::fs::write(&cfg, "gamma = 0.4\n").unwrap();
    let out = bin()
        .args(["price", "var-swap", "2", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("requires gamma > 0.5"));
}

#[test]
fn divergent_branch_exits_3() {
    let dir = tmpdir();
    let cfg = dir.join("neg_gamma_branch.toml");
    std::fs::write(&cfg, "branch = \"m-neg-gamma\"\ngamma = 0.5\n").unwrap();
    let out = bin()
        .args(["price", "moment-swap", "1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverges"));
}

#[test]
fn config_parse_error_exits_2() {
    let dir = tmpdir();
    let cfg = dir.join("broken.toml");
    std::fs::write(&cfg, "gamma = \"not a number\"\n").unwrap();
    let out = bin().args(["price", "var-swap", "1", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["price", "frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_5() {
    let out = bin()
        .args(["surface", "--preset", "fig1", "--out", "/nonexistent-dir/x.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn degenerate_grid_has_exactly_four_rows() {
    let dir = tmpdir();
    let cfg = dir.join("grid2x2.toml");
    std::fs::write(
        &cfg,
        "[grid]\naxis1 = \"gamma\"\nmin1 = -0.8\nmax1 = -0.4\nn1 = 2\n\
         axis2 = \"x\"\nmin2 = 0.1\nmax2 = 0.3\nn2 = 2\n",
    )
    .unwrap();
    let csv = dir.join("grid2x2.csv");
    let out = bin()
        .args(["surface", "var-swap", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "axis1,axis2,value,flag");
    assert_eq!(lines.len(), 5);
}

#[test]
fn surface_is_deterministic() {
    let dir = tmpdir();
    let (a, b) = (dir.join("det_a.csv"), dir.join("det_b.csv"));
    for out in [&a, &b] {
        let status = bin()
            .args(["surface", "--preset", "fig1", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn mixed_grid_flags_failures_without_aborting() {
    // gamma sweep crossing into gamma > 0 territory: those points must be
    // flagged, the rest must still price
    let dir = tmpdir();
    let cfg = dir.join("mixed.toml");
    std::fs::write(
        &cfg,
        "[grid]\naxis1 = \"gamma\"\nmin1 = -0.5\nmax1 = 0.5\nn1 = 3\n\
         axis2 = \"x\"\nmin2 = 0.1\nmax2 = 0.3\nn2 = 2\n",
    )
    .unwrap();
    let csv = dir.join("mixed.csv");
    let out = bin()
        .args(["surface", "var-swap", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    // gamma = -0.5 prices, gamma = 0.0 is out of domain, gamma = 0.5
    // violates the moment-order gate
    let count = |flag: &str| rows.iter().filter(|r| r.ends_with(flag)).count();
    assert_eq!(count(",ok"), 2, "rows:\n{text}");
    assert_eq!(count(",domain"), 2, "rows:\n{text}");
    assert_eq!(count(",validation"), 2, "rows:\n{text}");
}

#[test]
fn verify_density_passes() {
    let out = bin().args(["verify", "density"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("all checks passed"));
    assert_eq!(text.matches("PASS").count(), 27);
}

#[test]
fn verify_pde_passes() {
    let out = bin().args(["verify", "pde"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}
