#![no_main]

use fdmask_cli::text::{format_manifest, parse_manifest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_manifest(text) {
        assert_eq!(parse_manifest(&format_manifest(&entries)).unwrap(), entries);
    }
});
