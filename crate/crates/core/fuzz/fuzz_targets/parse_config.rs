#![no_main]

use conjkge::ModelConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ModelConfig::parse(text) else { return };
    let canonical = cfg.to_string();
    let again = ModelConfig::parse(&canonical).expect("canonical config reparses");
    assert_eq!(again.to_string(), canonical);
});
