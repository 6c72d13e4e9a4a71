//! Filtered ranking and rank-based metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::Complex;
use crate::data::{Dataset, FilterIndex, Split, Triple};
use crate::error::{Error, Result};
use crate::model::{dot_re, ModelParams};

pub const HITS_AT: [usize; 3] = [1, 3, 10];

/// Filtered rank of `gold` in `scores` with average tie handling:
/// `1 + #{higher} + ⌊#{tied}/2⌋` over candidates outside `filter \ {gold}`.
///
/// A non-finite gold score ranks last among the candidates.
pub fn rank_query(scores: &[f64], gold: usize, filter: &[usize]) -> Result<usize> {
    let n = scores.len();
    if gold >= n {
        return Err(Error::IdOutOfRange {
            kind: "entity",
            id: gold,
            size: n,
        });
    }
    let target = scores[gold];
    let mut excluded = 0usize;
    let (mut higher, mut tied) = tally(scores, target);
    let owned;
    let filter = if filter.windows(2).all(|w| w[0] < w[1]) {
        filter
    } else {
        let mut v = filter.to_vec();
        v.sort_unstable();
        v.dedup();
        owned = v;
        &owned
    };
    for &e in filter {
        if e == gold || e >= n {
            continue;
        }
        excluded += 1;
        if scores[e] > target {
            higher -= 1;
        } else if scores[e] == target {
            tied -= 1;
        }
    }
    if !target.is_finite() {
        return Ok(n - excluded);
    }
    // gold ties with itself
    tied -= 1;
    Ok(1 + higher + tied / 2)
}

fn tally(scores: &[f64], target: f64) -> (usize, usize) {
    let mut higher = 0;
    let mut tied = 0;
    for &s in scores {
        if s > target {
            higher += 1;
        } else if s == target {
            tied += 1;
        }
    }
    (higher, tied)
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("ranks"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

pub fn hits_at_n(ranks: &[usize], n: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("ranks"));
    }
    if n == 0 {
        return Err(Error::EmptyInput("hits cutoff"));
    }
    Ok(ranks.iter().filter(|&&r| r <= n).count() as f64 / ranks.len() as f64)
}

/// How head queries `(?, r, t)` were answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadProtocol {
    /// As tail queries of the reciprocal relation.
    Reciprocal,
    /// By scoring every candidate head directly.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub n_queries: usize,
    pub head_protocol: HeadProtocol,
}

impl Metrics {
    pub fn from_ranks(ranks: &[usize], head_protocol: HeadProtocol) -> Result<Self> {
        let hits = HITS_AT
            .iter()
            .map(|&n| Ok((n, hits_at_n(ranks, n)?)))
            .collect::<Result<_>>()?;
        Ok(Metrics {
            mrr: mrr(ranks)?,
            hits,
            n_queries: ranks.len(),
            head_protocol,
        })
    }

    pub fn hits_at(&self, n: usize) -> f64 {
        self.hits.get(&n).copied().unwrap_or(f64::NAN)
    }
}

/// Filtered ranks for both directions of every triple in `split`: the tail
/// query first, then the head query, per triple.
pub fn rank_split(
    model: &ModelParams,
    dataset: &Dataset,
    split: Split,
    filter: &FilterIndex,
) -> Result<(Vec<usize>, HeadProtocol)> {
    check_vocab(model, dataset)?;
    let triples: Vec<Triple> = dataset
        .split(split)
        .iter()
        .copied()
        .filter(|t| t.rel < dataset.n_base_relations())
        .collect();
    let protocol = if dataset.is_reciprocal() {
        HeadProtocol::Reciprocal
    } else {
        HeadProtocol::Direct
    };
    let per_triple: Vec<[usize; 2]> = triples
        .par_iter()
        .map_init(
            || Scratch::new(model),
            |scratch, t| -> Result<[usize; 2]> {
                scratch.tail_scores(model, t.head, t.rel);
                let tail_rank = rank_query(&scratch.scores, t.tail, filter.tails(t.head, t.rel))?;
                let head_rank = match dataset.inverse_relation(t.rel) {
                    Some(inv) => {
                        scratch.tail_scores(model, t.tail, inv);
                        rank_query(&scratch.scores, t.head, filter.tails(t.tail, inv))?
                    }
                    None => {
                        scratch.head_scores(model, t.rel, t.tail);
                        rank_query(&scratch.scores, t.head, filter.heads(t.rel, t.tail))?
                    }
                };
                Ok([tail_rank, head_rank])
            },
        )
        .collect::<Result<_>>()?;
    Ok((per_triple.into_iter().flatten().collect(), protocol))
}

/// MRR and Hits@{1,3,10} pooled over head and tail queries.
pub fn evaluate(model: &ModelParams, dataset: &Dataset, split: Split, filter: &FilterIndex) -> Result<Metrics> {
    let (ranks, protocol) = rank_split(model, dataset, split, filter)?;
    Metrics::from_ranks(&ranks, protocol)
}

fn check_vocab(model: &ModelParams, dataset: &Dataset) -> Result<()> {
    if model.n_entities() != dataset.n_entities() || model.n_relations() != dataset.n_relations() {
        return Err(Error::VocabMismatch {
            model_entities: model.n_entities(),
            model_relations: model.n_relations(),
            data_entities: dataset.n_entities(),
            data_relations: dataset.n_relations(),
        });
    }
    Ok(())
}

struct Scratch {
    coeffs: Vec<Complex>,
    y: Vec<Complex>,
    scores: Vec<f64>,
}

impl Scratch {
    fn new(model: &ModelParams) -> Self {
        Scratch {
            coeffs: vec![Complex::new(0.0, 0.0); model.full_len()],
            y: vec![Complex::new(0.0, 0.0); model.rank()],
            scores: vec![0.0; model.n_entities()],
        }
    }

    fn tail_scores(&mut self, model: &ModelParams, head: usize, rel: usize) {
        model.materialize_relation(rel, &mut self.coeffs);
        model.transform(&self.coeffs, model.entity(head), &mut self.y);
        model.score_all(&self.y, &mut self.scores);
    }

    fn head_scores(&mut self, model: &ModelParams, rel: usize, tail: usize) {
        model.materialize_relation(rel, &mut self.coeffs);
        let t = model.entity(tail);
        for (e, s) in self.scores.iter_mut().enumerate() {
            model.transform(&self.coeffs, model.entity(e), &mut self.y);
            *s = dot_re(&self.y, t);
        }
    }
}
