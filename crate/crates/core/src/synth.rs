//! Seeded synthetic knowledge graphs whose relations follow known patterns.
//!
//! Every relation links `ceil(density · n_entities)` distinct unordered
//! entity pairs. Held-out triples are those implied by a pattern but
//! withheld from training:
//!
//! - symmetric: both `(h, r, t)` and `(t, r, h)` hold; for a held-out pair
//!   one direction is in train and the other is held out.
//! - antisymmetric: one orientation per pair, never the reverse. These
//!   triples only enter the training split since nothing is implied by them.
//! - inverse pair: relations `r` and `r'` with `(h, r, t) ⇔ (t, r', h)`;
//!   for a held-out pair one side is in train and the other is held out.
//!
//! Held-out triples alternate between the validation and test splits.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Triple, Vocab};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationFamily {
    Symmetric,
    Antisymmetric,
    InversePair,
}

impl RelationFamily {
    pub const ALL: [RelationFamily; 3] = [
        RelationFamily::Symmetric,
        RelationFamily::Antisymmetric,
        RelationFamily::InversePair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationFamily::Symmetric => "symmetric",
            RelationFamily::Antisymmetric => "antisymmetric",
            RelationFamily::InversePair => "inverse",
        }
    }
}

impl fmt::Display for RelationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "symmetric" | "sym" => Ok(RelationFamily::Symmetric),
            "antisymmetric" | "anti" => Ok(RelationFamily::Antisymmetric),
            "inverse" | "inverse-pair" | "inv" => Ok(RelationFamily::InversePair),
            _ => Err(format!("unknown relation family {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_entities: usize,
    pub families: Vec<RelationFamily>,
    pub density: f64,
    pub seed: u64,
    pub relations_per_family: usize,
    /// Fraction of pattern pairs whose implied triple is held out.
    pub holdout: f64,
}

impl SynthConfig {
    pub fn new(n_entities: usize, families: &[RelationFamily], density: f64, seed: u64) -> Self {
        SynthConfig {
            n_entities,
            families: families.to_vec(),
            density,
            seed,
            relations_per_family: 1,
            holdout: 0.2,
        }
    }

    pub fn pairs_per_relation(&self) -> usize {
        (self.density * self.n_entities as f64).ceil() as usize
    }
}

pub fn generate_synthetic_kg(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_entities < 4 {
        return Err(Error::SynthConfig(format!(
            "need at least 4 entities, got {}",
            cfg.n_entities
        )));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(Error::SynthConfig(format!(
            "density must be in (0, 1], got {}",
            cfg.density
        )));
    }
    if !(cfg.holdout > 0.0 && cfg.holdout < 1.0) {
        return Err(Error::SynthConfig(format!(
            "holdout must be in (0, 1), got {}",
            cfg.holdout
        )));
    }
    if cfg.relations_per_family == 0 || cfg.families.is_empty() {
        return Err(Error::SynthConfig("no relations requested".to_owned()));
    }
    let mut families = cfg.families.clone();
    families.sort();
    families.dedup();
    if families == [RelationFamily::Antisymmetric] {
        return Err(Error::SynthConfig(
            "antisymmetric relations alone imply no held-out triples".to_owned(),
        ));
    }

    let n = cfg.n_entities;
    let max_pairs = n * (n - 1) / 2;
    let m = cfg.pairs_per_relation().min(max_pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let entities: Vocab = (0..n).map(|i| format!("e{i}")).collect();
    let mut relations = Vocab::new();
    let mut train = Vec::new();
    let mut held_out = Vec::new();

    for &family in &families {
        for k in 0..cfg.relations_per_family {
            let pairs = sample_pairs(&mut rng, n, m);
            match family {
                RelationFamily::Symmetric => {
                    let r = relations.intern(&format!("symmetric_{k}"));
                    for (u, v) in pairs {
                        let (h, t) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
                        train.push(Triple::new(h, r, t));
                        let reverse = Triple::new(t, r, h);
                        if rng.random_bool(cfg.holdout) {
                            held_out.push(reverse);
                        } else {
                            train.push(reverse);
                        }
                    }
                }
                RelationFamily::Antisymmetric => {
                    let r = relations.intern(&format!("antisymmetric_{k}"));
                    for (u, v) in pairs {
                        let (h, t) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
                        train.push(Triple::new(h, r, t));
                    }
                }
                RelationFamily::InversePair => {
                    let fwd = relations.intern(&format!("inverse_{k}"));
                    let bwd = relations.intern(&format!("inverse_{k}_of"));
                    for (u, v) in pairs {
                        let (h, t) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
                        let mut both = [Triple::new(h, fwd, t), Triple::new(t, bwd, h)];
                        if rng.random_bool(0.5) {
                            both.swap(0, 1);
                        }
                        train.push(both[0]);
                        if rng.random_bool(cfg.holdout) {
                            held_out.push(both[1]);
                        } else {
                            train.push(both[1]);
                        }
                    }
                }
            }
        }
    }

    if held_out.len() < 2 {
        return Err(Error::DensityTooLow {
            density: cfg.density,
            n_entities: n,
        });
    }
    held_out.shuffle(&mut rng);
    let (mut valid, mut test) = (Vec::new(), Vec::new());
    for (i, t) in held_out.into_iter().enumerate() {
        if i % 2 == 0 {
            test.push(t);
        } else {
            valid.push(t);
        }
    }
    Dataset::from_parts(entities, relations, train, valid, test)
}

/// `m` distinct unordered pairs `(u, v)` with `u < v`, in sampling order.
fn sample_pairs(rng: &mut impl Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    let mut seen = HashSet::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if seen.insert(pair) {
            out.push(pair);
        }
    }
    out
}
