#![no_main]

use fdmask_cli::config::CheckpointMeta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(meta) = CheckpointMeta::parse(text) {
        assert_eq!(CheckpointMeta::parse(&meta.to_text()).unwrap(), meta);
    }
});
