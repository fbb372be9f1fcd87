#![no_main]

use fdmask_cli::text::{format_index_list, parse_index_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(indices) = parse_index_list(text) {
        assert_eq!(parse_index_list(&format_index_list(&indices)).unwrap(), indices);
    }
});
