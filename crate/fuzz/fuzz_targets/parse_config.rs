#![no_main]

use libfuzzer_sys::fuzz_target;
use mfmfe::io::parse_config;

const KEYS: &[&str] = &[
    "out",
    "family",
    "levels",
    "variant",
    "n0",
    "seed",
    "tau",
    "final_time",
    "perm",
    "n",
    "nu",
    "range",
    "var",
];

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(map) = parse_config(text, KEYS) {
            assert!(map.keys().all(|k| KEYS.contains(&k.as_str())));
        }
    }
});
