#![no_main]
use libfuzzer_sys::fuzz_target;
use spikebeta::io::parse_potential_json;

fuzz_target!(|data: &[u8]| {
    let _ = parse_potential_json(data);
});
