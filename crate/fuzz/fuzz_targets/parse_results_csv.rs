#![no_main]

use bf2p::harness::{parse_results_csv, results_to_string, OutputFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_results_csv(text) {
        let again = parse_results_csv(&results_to_string(&rows, OutputFormat::Csv)).expect("re-parse");
        assert_eq!(rows.len(), again.len());
    }
});
