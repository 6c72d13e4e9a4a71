#![no_main]

use conjkge::checkpoint::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = decode(data) {
        // the format has one encoding per checkpoint
        assert_eq!(encode(&ckpt), data);
    }
});
