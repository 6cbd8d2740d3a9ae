//! Replays the checked-in fuzz corpus seeds through the parsers.

use std::path::PathBuf;

use spikebeta::io;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn ok_names<T, E>(target: &str, parse: fn(&[u8]) -> Result<T, E>) -> Vec<String> {
    seeds(target).into_iter().filter(|(_, d)| parse(d).is_ok()).map(|(n, _)| n).collect()
}

#[test]
fn potential_seeds() {
    assert_eq!(ok_names("parse_potential_json", io::parse_potential_json), ["seed-extreme", "seed-quartic-bare", "seed-semicircle"]);
}

#[test]
fn eqm_seeds() {
    assert_eq!(ok_names("parse_eqm_json", io::parse_eqm_json).len(), 3);
    let eqm = io::parse_eqm_json(&seeds("parse_eqm_json")[0].1).unwrap();
    assert!((eqm.b2 - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn config_seeds() {
    assert_eq!(ok_names("parse_config_json", io::parse_config_json).len(), 3);
}

#[test]
fn sample_seeds() {
    assert_eq!(ok_names("parse_samples_csv", io::parse_samples_csv).len(), 3);
    let (_, direct) = &seeds("parse_samples_csv")[1];
    let file = io::parse_samples_csv(direct).unwrap();
    assert_eq!(file.values.len(), 8);
    assert_eq!(file.get("method"), Some("DirectGaussian"));
}
