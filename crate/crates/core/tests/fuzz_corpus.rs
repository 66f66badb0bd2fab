//! Replays the checked-in fuzz seeds through the parsers.

use std::fs;
use std::path::PathBuf;

use mfmfe::io::{parse_config, Table};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn config_seeds() {
    let keys = ["family", "levels", "variant", "perm", "n", "nu", "range", "var", "seed"];
    let results: Vec<(String, bool)> = seeds("parse_config")
        .into_iter()
        .map(|(p, text)| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, parse_config(&text, &keys).is_ok())
        })
        .collect();
    assert!(results.len() >= 4);
    for (name, ok) in results {
        let expect = !matches!(name.as_str(), "duplicate.cfg" | "malformed.cfg");
        assert_eq!(ok, expect, "{name}");
    }
}

#[test]
fn csv_seeds() {
    for (p, text) in seeds("parse_csv") {
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        let parsed = Table::parse(&text);
        assert_eq!(parsed.is_ok(), name != "ragged.csv", "{name}");
    }
}
