use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_honeycomb-edge"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("honeycomb-edge-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

const SMALL: &str = "bulk_cutoff = 4\ncutoff = 6\n[bands]\nn_bands = 4\npoints_per_segment = 3\n[mu]\nn = 5\n";

#[test]
fn init_writes_a_template_and_refuses_to_overwrite() {
    let d = scratch("init");
    let o = run(&d, &["init", "--config", "c.toml"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(d.join("c.toml")).unwrap();
    assert!(text.contains("flavor = \"p-breaking\""));
    assert_eq!(run(&d, &["init", "--config", "c.toml"]).status.code(), Some(2));
    assert!(run(&d, &["init", "--config", "c.toml", "--force"]).status.success());
}

#[test]
fn bands_are_deterministic_and_carry_the_config_hash() {
    let d = scratch("bands");
    std::fs::write(d.join("c.toml"), SMALL).unwrap();
    let a = run(&d, &["bands", "--config", "c.toml", "--out", "a"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(run(&d, &["bands", "--config", "c.toml", "--out", "b", "--threads", "1"]).status.success());
    let fa = std::fs::read_to_string(d.join("a/bands.csv")).unwrap();
    let fb = std::fs::read_to_string(d.join("b/bands.csv")).unwrap();
    let (ha, body_a) = fa.split_once('\n').unwrap();
    let (hb, body_b) = fb.split_once('\n').unwrap();
    assert_eq!(body_a, body_b);
    // the output directory is part of the configuration
    assert!(ha.starts_with("# honeycomb-edge bands config_sha256=") && ha.contains("fold_tol="));
    assert_ne!(ha, hb);
    let lines: Vec<&str> = body_a.lines().collect();
    assert_eq!(lines[0], "label,s,kx,ky,E1,E2,E3,E4");
    assert_eq!(lines.len(), 1 + 3 * 3 + 1);
    assert!(lines[1].starts_with("G,0,0,0,"));
}

#[test]
fn dirac1d_reports_one_crossing_per_valley() {
    let d = scratch("dirac1d");
    std::fs::write(d.join("c.toml"), SMALL).unwrap();
    let o = run(&d, &["dirac1d", "--config", "c.toml", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("o/dirac1d.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["header"].as_str().unwrap().contains("config_sha256="));
    let valleys = v["valleys"].as_array().unwrap();
    assert_eq!(valleys.len(), 2);
    for x in valleys {
        assert_eq!(x["spectral_flow"].as_i64().unwrap().abs(), 1);
        assert_eq!(x["n_pairs"].as_u64(), Some(0));
    }
    let csv = std::fs::read_to_string(d.join("o/dirac1d.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("valley,mu,j,value,interior_mass,gap_edge"));
}

#[test]
fn zero_coupling_fails_the_gate() {
    let d = scratch("w0");
    std::fs::write(d.join("c.toml"), "[potential]\nw0 = 0.0\n").unwrap();
    let o = run(&d, &["validate", "--config", "c.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nondegeneracy"));
}

#[test]
fn non_coprime_edge_is_rejected() {
    let d = scratch("edge");
    let o = run(&d, &["validate", "--edge", "2,4", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not coprime"));
}

#[test]
fn validate_subset_passes_and_strict_reports_the_known_conflict() {
    let d = scratch("validate");
    let o = run(&d, &["validate", "--only", "3,4", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("o/validation.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);

    let lenient = run(&d, &["validate", "--only", "6", "--out", "o"]);
    assert!(lenient.status.success());
    let strict = run(&d, &["validate", "--only", "6", "--strict", "--out", "o"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stdout).contains("known conflict"));
}
