#![no_main]

use fdmask_cli::config::{format_dataset_spec, parse_dataset_spec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_dataset_spec(text) {
        assert_eq!(parse_dataset_spec(&format_dataset_spec(&spec)).unwrap(), spec);
    }
});
