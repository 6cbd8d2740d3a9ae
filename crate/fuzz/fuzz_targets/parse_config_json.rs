#![no_main]
use libfuzzer_sys::fuzz_target;
use spikebeta::io::parse_config_json;

fuzz_target!(|data: &[u8]| {
    let _ = parse_config_json(data);
});
