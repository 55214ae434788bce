use std::path::Path;
use std::process::{Command, Output};

fn ccrlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccrlab")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn manifest_reproduces_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccrlab(
        dir.path(),
        &["sample", "--sites", "10", "--grid", "6", "--paths", "300", "--seed", "3", "--param", "g=0.5",
          "--potential", "x^2/2 + g*x^4/4", "--out", "s.csv"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(dir.path().join("s.csv")).unwrap();
    std::fs::rename(dir.path().join("s.csv.manifest"), dir.path().join("run.cfg")).unwrap();
    std::fs::remove_file(dir.path().join("s.csv")).unwrap();
    let o = ccrlab(dir.path(), &["sample", "--config", "run.cfg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(dir.path().join("s.csv")).unwrap(), first);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "# kms run\nbeta=5\nsites=8\n").unwrap();
    let o = ccrlab(dir.path(), &["kms", "--config", "c.cfg", "--beta", "0.25", "--out", "k.csv"]);
    assert!(o.status.success());
    let m = std::fs::read_to_string(dir.path().join("k.csv.manifest")).unwrap();
    assert!(m.contains("beta=0.25\n") && m.contains("sites=8\n"));
}

#[test]
fn csv_floats_reparse_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccrlab(dir.path(), &["spectrum", "--sites", "24", "--potential", "x^2/2 + x^4/4", "--out", "e.csv"]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("e.csv")).unwrap();
    let from_file: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();

    let params = ccrlab::lattice::LatticeParams::commensurate(1, 24, 0.0, 0.0).unwrap();
    let v = ccrlab::expr::PotentialExpr::parse("x^2/2 + x^4/4").unwrap();
    let direct = ccrlab::spectral::spectrum(&params, &v, &Default::default()).unwrap();
    assert_eq!(from_file.len(), direct.len());
    for (a, b) in from_file.iter().zip(&direct) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn classical_and_butterfly_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccrlab(
        dir.path(),
        &["classical", "--param", "g=1", "--dt", "0.01", "--steps", "100", "--out", "c.csv", "--svg", "c.svg"],
    );
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(text.starts_with("t,x,v,E\r\n"));
    assert_eq!(text.lines().count(), 102);
    assert!(std::fs::read_to_string(dir.path().join("c.svg")).unwrap().contains("<polyline"));

    let o = ccrlab(dir.path(), &["butterfly", "--qmax", "3", "--phase-grid", "2", "--out", "b.csv", "--svg", "b.svg"]);
    assert!(o.status.success());
    let rows = std::fs::read_to_string(dir.path().join("b.csv")).unwrap().lines().count() - 1;
    // (1/1) + (1/2) + (1/3, 2/3): q rows per fraction, 4 phase cells
    assert_eq!(rows, (1 + 2 + 3 + 3) * 4);
    let svg = std::fs::read_to_string(dir.path().join("b.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), rows);
}

#[test]
fn verify_default_is_quick_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let o = ccrlab(dir.path(), &["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ccrlab(dir.path(), &["spectrum", "--potential", "x +"]).status.code(), Some(2));
    assert_eq!(ccrlab(dir.path(), &["spectrum", "--config", "missing.cfg"]).status.code(), Some(2));
    assert_eq!(ccrlab(dir.path(), &["fourier-check", "--p", "2", "--q", "8"]).status.code(), Some(2));
    assert_eq!(ccrlab(dir.path(), &["fourier-check", "--sites", "8", "--phi", "1"]).status.code(), Some(1));
    assert_eq!(ccrlab(dir.path(), &["spectrum", "--sites", "5", "--out", "no/such/dir/x.csv"]).status.code(), Some(1));
}
