//! 1-vs-all cross-entropy objective with analytic gradients.

use crate::complex::{accumulate_stored_grad, Complex};
use crate::data::Triple;
use crate::error::{Error, Result};
use crate::model::{relation_penalty, relation_penalty_grad, transform_backward, ModelParams, RegMode, RegNorm};

const ZERO: Complex = Complex::new(0.0, 0.0);

/// `−log softmax(row)[gold]`.
pub fn loss(row: &[f64], gold: usize) -> Result<f64> {
    if gold >= row.len() {
        return Err(Error::IdOutOfRange {
            kind: "entity",
            id: gold,
            size: row.len(),
        });
    }
    if row.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    // (max − s_gold) + ln(1 + Σ_{i≠argmax} e^{s_i − max}) keeps small losses exact
    let (arg, max) = row.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
    );
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &s)| (s - max).exp())
        .sum();
    Ok((max - row[gold]) + rest.ln_1p())
}

fn log_sum_exp(row: &[f64]) -> Result<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || row.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(max + row.iter().map(|&s| (s - max).exp()).sum::<f64>().ln())
}

/// Regularization settings entering the batch objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub mode: RegMode,
    pub norm: RegNorm,
    pub coefficient: f64,
}

/// Gradient buffers shaped like the model tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entities: Vec<Complex>,
    pub relations: Vec<Complex>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelParams) -> Self {
        Gradients {
            entities: vec![ZERO; model.entity_table().len()],
            relations: vec![ZERO; model.relation_table().len()],
        }
    }

    pub fn clear(&mut self) {
        self.entities.fill(ZERO);
        self.relations.fill(ZERO);
    }
}

/// Reusable per-query buffers.
#[derive(Debug, Clone)]
pub struct Workspace {
    coeffs: Vec<Complex>,
    y: Vec<Complex>,
    g_y: Vec<Complex>,
    g_coeffs: Vec<Complex>,
    scores: Vec<f64>,
}

impl Workspace {
    pub fn new(model: &ModelParams) -> Self {
        Workspace {
            coeffs: vec![ZERO; model.full_len()],
            y: vec![ZERO; model.rank()],
            g_y: vec![ZERO; model.rank()],
            g_coeffs: vec![ZERO; model.full_len()],
            scores: vec![0.0; model.n_entities()],
        }
    }
}

/// Mean cross-entropy over `batch` plus `coefficient / |batch|` times the
/// summed penalty of the batch's head, relation and tail parameters.
///
/// When `grads` is given, the gradient of that objective is added to it.
pub fn batch_objective(
    model: &ModelParams,
    batch: &[Triple],
    penalty: &Penalty,
    mut grads: Option<&mut Gradients>,
    ws: &mut Workspace,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    if !(penalty.coefficient >= 0.0) {
        return Err(Error::NegativeCoefficient(penalty.coefficient));
    }
    let (family, layout, rank) = (model.family(), model.layout(), model.rank());
    let stored_len = model.stored_len();
    let scale = 1.0 / batch.len() as f64;
    let reg_scale = penalty.coefficient * scale;
    let mut total = 0.0;

    for t in batch {
        model.check_entity(t.head)?;
        model.check_entity(t.tail)?;
        model.check_relation(t.rel)?;
        model.materialize_relation(t.rel, &mut ws.coeffs);
        let head = model.entity(t.head);
        model.transform(&ws.coeffs, head, &mut ws.y);
        model.score_all(&ws.y, &mut ws.scores);
        let lse = log_sum_exp(&ws.scores)?;
        total += scale * (lse - ws.scores[t.tail]);

        let tail = model.entity(t.tail);
        let stored = model.relation_stored(t.rel);
        if penalty.coefficient > 0.0 {
            total += reg_scale
                * (penalty.norm.sum(head)
                    + penalty.norm.sum(tail)
                    + relation_penalty(family, layout, rank, stored, penalty.mode, penalty.norm));
        }

        let Some(g) = grads.as_deref_mut() else { continue };
        ws.g_y.fill(ZERO);
        for (e, (g_e, emb)) in g
            .entities
            .chunks_exact_mut(rank)
            .zip(model.entity_table().chunks_exact(rank))
            .enumerate()
        {
            let mut d = (ws.scores[e] - lse).exp();
            if e == t.tail {
                d -= 1.0;
            }
            d *= scale;
            for i in 0..rank {
                g_e[i] += d * ws.y[i];
                ws.g_y[i] += d * emb[i];
            }
        }
        ws.g_coeffs.fill(ZERO);
        transform_backward(
            family,
            rank,
            &ws.coeffs,
            head,
            &ws.g_y,
            &mut g.entities[t.head * rank..(t.head + 1) * rank],
            &mut ws.g_coeffs,
        );
        let g_rel = &mut g.relations[t.rel * stored_len..(t.rel + 1) * stored_len];
        accumulate_stored_grad(family, layout, rank, &ws.g_coeffs, g_rel);

        if penalty.coefficient > 0.0 {
            penalty
                .norm
                .add_grad(head, reg_scale, &mut g.entities[t.head * rank..(t.head + 1) * rank]);
            penalty
                .norm
                .add_grad(tail, reg_scale, &mut g.entities[t.tail * rank..(t.tail + 1) * rank]);
            relation_penalty_grad(
                family,
                layout,
                rank,
                stored,
                penalty.mode,
                penalty.norm,
                reg_scale,
                g_rel,
                &mut ws.g_coeffs,
            );
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(total)
}
