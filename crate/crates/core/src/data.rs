//! Triple datasets: TSV split loading, vocabularies, reciprocal relations
//! and the filter index used by filtered ranking.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, rel: usize, tail: usize) -> Self {
        Triple { head, rel, tail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown split {s:?}"))
    }
}

/// Bijection between names and dense ids, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: IndexSet<String>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        match self.names.get_index_of(name) {
            Some(id) => id,
            None => self.names.insert_full(name.to_owned()).0,
        }
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.get_index_of(name)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get_index(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

impl FromIterator<String> for Vocab {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        Vocab {
            names: iter.into_iter().collect(),
        }
    }
}

/// Raw `head<TAB>relation<TAB>tail` records of one split.
pub fn parse_triples<'a>(split: &str, text: &'a str) -> Result<Vec<[&'a str; 3]>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let mut fields = line.split('\t');
            let rec = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(h), Some(r), Some(t), None) => [h, r, t],
                _ => {
                    return Err(Error::Parse {
                        split: split.to_owned(),
                        line: i + 1,
                        msg: format!("expected 3 tab-separated fields, got {}", line.split('\t').count()),
                    })
                }
            };
            if rec.iter().any(|f| f.is_empty()) {
                return Err(Error::Parse {
                    split: split.to_owned(),
                    line: i + 1,
                    msg: "empty field".to_owned(),
                });
            }
            Ok(rec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    entities: Vocab,
    relations: Vocab,
    n_base_relations: usize,
    reciprocal: bool,
}

/// Split sizes in the shape of the usual benchmark statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub entities: usize,
    pub relations: usize,
    /// Training examples once every triple is also used in reverse.
    pub examples: usize,
}

impl Dataset {
    /// Parses three splits, assigning ids in first-seen order over
    /// train, valid, then test.
    pub fn from_texts(train: &str, valid: &str, test: &str) -> Result<Self> {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let mut splits = Vec::with_capacity(3);
        for (split, text) in Split::ALL.into_iter().zip([train, valid, test]) {
            let records = parse_triples(split.name(), text)?;
            if records.is_empty() {
                return Err(Error::EmptySplit(split.name().to_owned()));
            }
            let mut seen = HashSet::with_capacity(records.len());
            let mut triples = Vec::with_capacity(records.len());
            for (i, [h, r, t]) in records.into_iter().enumerate() {
                let triple = Triple::new(entities.intern(h), relations.intern(r), entities.intern(t));
                if !seen.insert(triple) {
                    return Err(Error::DuplicateTriple {
                        split: split.name().to_owned(),
                        line: i + 1,
                    });
                }
                triples.push(triple);
            }
            splits.push(triples);
        }
        let test = splits.pop().unwrap_or_default();
        let valid = splits.pop().unwrap_or_default();
        let train = splits.pop().unwrap_or_default();
        let n_base_relations = relations.len();
        Ok(Dataset {
            train,
            valid,
            test,
            entities,
            relations,
            n_base_relations,
            reciprocal: false,
        })
    }

    /// Assembles a dataset from id triples over fixed vocabularies.
    pub fn from_parts(
        entities: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        for (split, triples) in Split::ALL.into_iter().zip([&train, &valid, &test]) {
            if triples.is_empty() {
                return Err(Error::EmptySplit(split.name().to_owned()));
            }
            let mut seen = HashSet::with_capacity(triples.len());
            for (i, t) in triples.iter().enumerate() {
                for (kind, id, size) in [
                    ("entity", t.head, entities.len()),
                    ("relation", t.rel, relations.len()),
                    ("entity", t.tail, entities.len()),
                ] {
                    if id >= size {
                        return Err(Error::IdOutOfRange { kind, id, size });
                    }
                }
                if !seen.insert(*t) {
                    return Err(Error::DuplicateTriple {
                        split: split.name().to_owned(),
                        line: i + 1,
                    });
                }
            }
        }
        let n_base_relations = relations.len();
        Ok(Dataset {
            train,
            valid,
            test,
            entities,
            relations,
            n_base_relations,
            reciprocal: false,
        })
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    /// Relation count including reciprocal relations, if added.
    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn n_base_relations(&self) -> usize {
        self.n_base_relations
    }

    pub fn is_reciprocal(&self) -> bool {
        self.reciprocal
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Counts of the original (non-reciprocal) triples.
    pub fn stats(&self) -> DatasetStats {
        let base = |s: &[Triple]| s.iter().filter(|t| t.rel < self.n_base_relations).count();
        let train = base(&self.train);
        DatasetStats {
            train,
            valid: base(&self.valid),
            test: base(&self.test),
            entities: self.n_entities(),
            relations: self.n_base_relations,
            examples: 2 * train,
        }
    }

    /// Id of the reciprocal of relation `rel`.
    pub fn inverse_relation(&self, rel: usize) -> Option<usize> {
        self.reciprocal.then(|| {
            if rel < self.n_base_relations {
                rel + self.n_base_relations
            } else {
                rel - self.n_base_relations
            }
        })
    }

    /// Adds relation `r + n_r` for every relation `r` and the reversed copy
    /// of each training triple.
    pub fn augment_reciprocal(&self) -> Result<Dataset> {
        if self.reciprocal {
            return Err(Error::AlreadyReciprocal);
        }
        let n = self.n_base_relations;
        let mut relations = self.relations.clone();
        for r in 0..n {
            let mut name = format!("{}_reverse", self.relations.name(r).unwrap_or_default());
            while relations.id(&name).is_some() {
                name.push('_');
            }
            relations.intern(&name);
        }
        let mut train = self.train.clone();
        train.extend(self.train.iter().map(|t| Triple::new(t.tail, t.rel + n, t.head)));
        Ok(Dataset {
            train,
            valid: self.valid.clone(),
            test: self.test.clone(),
            entities: self.entities.clone(),
            relations,
            n_base_relations: n,
            reciprocal: true,
        })
    }

    /// Writes the original triples of `split` in the input TSV format.
    pub fn write_split(&self, split: Split, mut w: impl Write) -> std::io::Result<()> {
        for t in self.split(split).iter().filter(|t| t.rel < self.n_base_relations) {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.entities.name(t.head).unwrap_or_default(),
                self.relations.name(t.rel).unwrap_or_default(),
                self.entities.name(t.tail).unwrap_or_default()
            )?;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for split in Split::ALL {
            let path = dir.join(split.file_name());
            let mut buf = Vec::new();
            self.write_split(split, &mut buf).map_err(|e| Error::io(&path, e))?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Fraction of test triples whose reverse `(t, ·, h)` occurs in train.
    pub fn inverse_leakage(&self) -> f64 {
        let pairs: HashSet<(usize, usize)> = self
            .train
            .iter()
            .filter(|t| t.rel < self.n_base_relations)
            .map(|t| (t.head, t.tail))
            .collect();
        let test: Vec<_> = self.test.iter().filter(|t| t.rel < self.n_base_relations).collect();
        if test.is_empty() {
            return 0.0;
        }
        let leaked = test.iter().filter(|t| pairs.contains(&(t.tail, t.head))).count();
        leaked as f64 / test.len() as f64
    }
}

/// Reads `train.txt`, `valid.txt` and `test.txt` from `dir`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut texts = Vec::with_capacity(3);
    for split in Split::ALL {
        let path = dir.join(split.file_name());
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        texts.push(std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?);
    }
    Dataset::from_texts(&texts[0], &texts[1], &texts[2])
}

/// Known-true answers for every `(head, relation)` and `(relation, tail)`
/// pair over all splits.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(usize, usize), Vec<usize>>,
    heads: HashMap<(usize, usize), Vec<usize>>,
}

impl FilterIndex {
    /// True tails of `(head, rel, ?)`, sorted.
    pub fn tails(&self, head: usize, rel: usize) -> &[usize] {
        self.tails.get(&(head, rel)).map_or(&[], Vec::as_slice)
    }

    /// True heads of `(?, rel, tail)`, sorted.
    pub fn heads(&self, rel: usize, tail: usize) -> &[usize] {
        self.heads.get(&(rel, tail)).map_or(&[], Vec::as_slice)
    }

    pub fn n_tail_queries(&self) -> usize {
        self.tails.len()
    }
}

pub fn build_filter_index(d: &Dataset) -> FilterIndex {
    let mut tails: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut heads: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut add = |t: Triple| {
        tails.entry((t.head, t.rel)).or_default().push(t.tail);
        heads.entry((t.rel, t.tail)).or_default().push(t.head);
    };
    for split in Split::ALL {
        for &t in d.split(split) {
            add(t);
            // reversed train triples are already present
            if split != Split::Train {
                if let Some(inv) = d.inverse_relation(t.rel) {
                    add(Triple::new(t.tail, inv, t.head));
                }
            }
        }
    }
    for v in tails.values_mut().chain(heads.values_mut()) {
        v.sort_unstable();
        v.dedup();
    }
    FilterIndex { tails, heads }
}
