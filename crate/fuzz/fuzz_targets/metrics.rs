#![no_main]

use fdmask_cli::text::{format_metrics, parse_metrics};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(epochs) = parse_metrics(text) {
        let again: String = epochs.iter().map(|m| format_metrics(m) + "\n").collect();
        let reparsed = parse_metrics(&again).unwrap();
        assert_eq!(reparsed.len(), epochs.len());
        for (a, b) in reparsed.iter().zip(&epochs) {
            assert_eq!(a.epoch, b.epoch);
            assert!(a.ce.to_bits() == b.ce.to_bits() || (a.ce.is_nan() && b.ce.is_nan()));
        }
    }
});
