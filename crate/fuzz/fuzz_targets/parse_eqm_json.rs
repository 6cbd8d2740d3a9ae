#![no_main]
use libfuzzer_sys::fuzz_target;
use spikebeta::io::parse_eqm_json;

fuzz_target!(|data: &[u8]| {
    let _ = parse_eqm_json(data);
});
