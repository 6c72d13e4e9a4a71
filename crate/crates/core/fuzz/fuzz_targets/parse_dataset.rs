#![no_main]

use conjkge::data::{Dataset, Split};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // three splits separated by NUL bytes
    let mut parts = text.splitn(3, '\0');
    let (Some(train), Some(valid), Some(test)) = (parts.next(), parts.next(), parts.next()) else {
        let _ = conjkge::data::parse_triples("train", text);
        return;
    };
    let Ok(d) = Dataset::from_texts(train, valid, test) else {
        return;
    };

    // written splits parse back to the same id triples
    let mut texts = Vec::new();
    for split in Split::ALL {
        let mut buf = Vec::new();
        d.write_split(split, &mut buf).unwrap();
        texts.push(String::from_utf8(buf).unwrap());
    }
    let back = Dataset::from_texts(&texts[0], &texts[1], &texts[2]).expect("written dataset reparses");
    assert_eq!(back, d);

    if let Ok(aug) = d.augment_reciprocal() {
        assert_eq!(aug.train.len(), 2 * d.train.len());
    }
});
