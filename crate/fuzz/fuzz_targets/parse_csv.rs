#![no_main]

use libfuzzer_sys::fuzz_target;
use mfmfe::io::Table;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = Table::parse(text) {
            assert!(table.rows.iter().all(|r| r.len() == table.header.len()));
            // anything that parsed must survive a write/read cycle
            if let Ok(csv) = table.to_csv() {
                let back = Table::parse(&csv).expect("re-parse of written table");
                assert_eq!(back.rows.len(), table.rows.len());
            }
        }
    }
});
