#![no_main]

use bf2p::harness::ingest_reader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(batch) = ingest_reader(data) {
        for s in &batch {
            assert!(s.data.y1 <= s.data.n1 && s.data.y2 <= s.data.n2);
            assert!(s.data.n1 > 0 && s.data.n2 > 0);
        }
    }
});
