//! Versioned little-endian binary checkpoints.
//!
//! Layout: magic `CKGE`, `u32` version, `u8` family, `u8` layout, `u16`
//! reserved (0), `u64` rank, `u64` entity count, `u64` relation count,
//! `u64` seed, then the entity table and the stored relation table as
//! interleaved `(re, im)` `f64` pairs.

use std::path::Path;

use crate::complex::{Complex, Family, Layout};
use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const MAGIC: [u8; 4] = *b"CKGE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 1 + 1 + 2 + 8 * 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: u64,
}

fn family_code(f: Family) -> u8 {
    match f {
        Family::ComplEx => 0,
        Family::FiveStar => 1,
    }
}

fn layout_code(l: Layout) -> u8 {
    Layout::ALL.iter().position(|&x| x == l).expect("layout listed in ALL") as u8
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let n_values = p.entity_table().len() + p.relation_table().len();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * n_values);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(family_code(p.family()));
    out.push(layout_code(p.layout()));
    out.extend_from_slice(&0u16.to_le_bytes());
    for v in [
        p.rank() as u64,
        p.n_entities() as u64,
        p.n_relations() as u64,
        ckpt.seed,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in p.entity_table().iter().chain(p.relation_table()) {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("{what} {v} does not fit in memory")))
    }

    fn complex_table(&mut self, n: usize) -> Result<Vec<Complex>> {
        let raw = self.take(
            n.checked_mul(16)
                .ok_or_else(|| Error::Checkpoint("table too large".into()))?,
        )?;
        Ok(raw
            .chunks_exact(16)
            .map(|c| {
                Complex::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let family = match r.u8()? {
        0 => Family::ComplEx,
        1 => Family::FiveStar,
        c => return Err(Error::Checkpoint(format!("unknown family code {c}"))),
    };
    let code = r.u8()?;
    let layout = *Layout::ALL
        .get(code as usize)
        .ok_or_else(|| Error::Checkpoint(format!("unknown layout code {code}")))?;
    if r.u16()? != 0 {
        return Err(Error::Checkpoint("reserved field is not zero".into()));
    }
    let rank = r.usize("rank")?;
    let n_entities = r.usize("entity count")?;
    let n_relations = r.usize("relation count")?;
    let seed = r.u64()?;
    layout.check(family, rank)?;

    // Sizes are validated against the remaining bytes before any allocation.
    let n_ent = n_entities
        .checked_mul(rank)
        .ok_or_else(|| Error::Checkpoint("entity table too large".into()))?;
    let (blocks, len) = layout.stored_shape(family, rank);
    let n_rel = blocks
        .checked_mul(len)
        .and_then(|per| n_relations.checked_mul(per))
        .ok_or_else(|| Error::Checkpoint("relation table too large".into()))?;
    let expected = n_ent
        .checked_add(n_rel)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::Checkpoint("tables too large".into()))?;
    let remaining = bytes.len() - r.pos;
    if remaining != expected {
        return Err(Error::Checkpoint(format!(
            "payload holds {remaining} bytes, header implies {expected}"
        )));
    }
    let entities = r.complex_table(n_ent)?;
    let relations = r.complex_table(n_rel)?;
    let params = ModelParams::from_parts(family, layout, rank, n_entities, n_relations, entities, relations)?;
    Ok(Checkpoint { params, seed })
}

pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, encode(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(family: Family, layout: Layout) -> Checkpoint {
        Checkpoint {
            params: ModelParams::random(family, layout, 4, 5, 3, 0.3, 11).unwrap(),
            seed: 11,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for family in Family::ALL {
            for &layout in family.layouts() {
                let c = sample(family, layout);
                let bytes = encode(&c);
                let back = decode(&bytes).unwrap();
                assert_eq!(back.seed, c.seed);
                assert_eq!(encode(&back), bytes);
                for (a, b) in back.params.entity_table().iter().zip(c.params.entity_table()) {
                    assert_eq!(a.re.to_bits(), b.re.to_bits());
                    assert_eq!(a.im.to_bits(), b.im.to_bits());
                }
            }
        }
    }

    #[test]
    fn nan_payload_survives() {
        let mut c = sample(Family::ComplEx, Layout::Full);
        c.params.entities[0] = Complex::new(f64::NAN, -0.0);
        let back = decode(&encode(&c)).unwrap();
        assert!(back.params.entities[0].re.is_nan());
        assert_eq!(back.params.entities[0].im.to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode(&sample(Family::FiveStar, Layout::ConjNeg));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(decode(&longer).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[9] = 1; // ConjHalf is not a 5★ layout
        assert!(decode(&bad).is_err());
        let mut huge = bytes[..HEADER_LEN].to_vec();
        huge[20..28].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
        assert!(decode(&[]).is_err());
    }

    #[test]
    fn rejects_rank_that_overflows_block_count() {
        let mut bytes = encode(&sample(Family::FiveStar, Layout::Full))[..HEADER_LEN].to_vec();
        bytes[12..20].copy_from_slice(&(u64::MAX / 2 - 1).to_le_bytes());
        bytes[20..28].copy_from_slice(&0u64.to_le_bytes());
        assert!(decode(&bytes).is_err());
    }
}
