#![no_main]
use libfuzzer_sys::fuzz_target;
use spikebeta::io::parse_samples_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_samples_csv(data);
});
