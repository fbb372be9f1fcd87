#![no_main]

use fdmask_cli::container::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = decode(data) {
        let bytes = encode(&c).expect("decoded container re-encodes");
        assert_eq!(bytes, data);
    }
});
