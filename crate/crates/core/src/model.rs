//! Embedding tables, score functions and regularization.
//!
//! Both families score a triple as `Re Σᵢ ϑ(h)ᵢ · conj(tᵢ)` where `ϑ` is the
//! relation transform: elementwise weights for ComplEx, elementwise Möbius
//! maps for 5★.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::complex::{accumulate_stored_grad, materialize_into, Complex, ComplexVec, Family, Layout, RelationParams};
use crate::data::Triple;
use crate::error::{Error, Result};
use crate::mobius::{mobius_point, MobiusCoeffs, DIVISION_EPS};

const ZERO: Complex = Complex::new(0.0, 0.0);

/// Entity embeddings and stored relation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    family: Family,
    layout: Layout,
    rank: usize,
    n_entities: usize,
    n_relations: usize,
    pub(crate) entities: Vec<Complex>,
    pub(crate) relations: Vec<Complex>,
}

impl ModelParams {
    pub fn zeros(family: Family, layout: Layout, rank: usize, n_entities: usize, n_relations: usize) -> Result<Self> {
        layout.check(family, rank)?;
        Ok(ModelParams {
            family,
            layout,
            rank,
            n_entities,
            n_relations,
            entities: vec![ZERO; n_entities * rank],
            relations: vec![ZERO; n_relations * layout.stored_len(family, rank)],
        })
    }

    /// I.i.d. Gaussian initialization of every stored real component.
    pub fn random(
        family: Family,
        layout: Layout,
        rank: usize,
        n_entities: usize,
        n_relations: usize,
        init_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut params = Self::zeros(family, layout, rank, n_entities, n_relations)?;
        let normal = Normal::new(0.0, init_std).map_err(|e| Error::InvalidConfig(format!("init_std: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in params.entities.iter_mut().chain(params.relations.iter_mut()) {
            z.re = normal.sample(&mut rng);
            z.im = normal.sample(&mut rng);
        }
        Ok(params)
    }

    /// Assembles parameters from raw buffers, validating their lengths.
    pub fn from_parts(
        family: Family,
        layout: Layout,
        rank: usize,
        n_entities: usize,
        n_relations: usize,
        entities: Vec<Complex>,
        relations: Vec<Complex>,
    ) -> Result<Self> {
        layout.check(family, rank)?;
        if entities.len() != n_entities * rank {
            return Err(Error::MalformedParams(format!(
                "entity buffer holds {} scalars, expected {}",
                entities.len(),
                n_entities * rank
            )));
        }
        let per = layout.stored_len(family, rank);
        if relations.len() != n_relations * per {
            return Err(Error::MalformedParams(format!(
                "relation buffer holds {} scalars, expected {}",
                relations.len(),
                n_relations * per
            )));
        }
        Ok(ModelParams {
            family,
            layout,
            rank,
            n_entities,
            n_relations,
            entities,
            relations,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn entity_table(&self) -> &[Complex] {
        &self.entities
    }

    pub fn relation_table(&self) -> &[Complex] {
        &self.relations
    }

    pub fn stored_len(&self) -> usize {
        self.layout.stored_len(self.family, self.rank)
    }

    pub fn full_len(&self) -> usize {
        self.family.full_len(self.rank)
    }

    /// Real parameters held by the relation table.
    pub fn relation_reals(&self) -> usize {
        2 * self.relations.len()
    }

    pub fn entity(&self, e: usize) -> &[Complex] {
        &self.entities[e * self.rank..(e + 1) * self.rank]
    }

    pub fn entity_vec(&self, e: usize) -> Result<ComplexVec> {
        self.check_entity(e)?;
        ComplexVec::new(self.entity(e).to_vec())
    }

    pub fn relation_stored(&self, r: usize) -> &[Complex] {
        let n = self.stored_len();
        &self.relations[r * n..(r + 1) * n]
    }

    pub fn relation(&self, r: usize) -> Result<RelationParams> {
        self.check_relation(r)?;
        RelationParams::from_flat(self.family, self.layout, self.rank, self.relation_stored(r))
    }

    pub fn materialize_relation(&self, r: usize, out: &mut [Complex]) {
        materialize_into(self.family, self.layout, self.rank, self.relation_stored(r), out);
    }

    /// Same model expressed in the `Full` layout with every relation
    /// materialized.
    pub fn to_full(&self) -> ModelParams {
        let full = self.full_len();
        let mut relations = vec![ZERO; self.n_relations * full];
        for (r, out) in relations.chunks_mut(full).enumerate() {
            self.materialize_relation(r, out);
        }
        ModelParams {
            family: self.family,
            layout: Layout::Full,
            rank: self.rank,
            n_entities: self.n_entities,
            n_relations: self.n_relations,
            entities: self.entities.clone(),
            relations,
        }
    }

    pub(crate) fn check_entity(&self, e: usize) -> Result<()> {
        if e < self.n_entities {
            Ok(())
        } else {
            Err(Error::IdOutOfRange {
                kind: "entity",
                id: e,
                size: self.n_entities,
            })
        }
    }

    pub(crate) fn check_relation(&self, r: usize) -> Result<()> {
        if r < self.n_relations {
            Ok(())
        } else {
            Err(Error::IdOutOfRange {
                kind: "relation",
                id: r,
                size: self.n_relations,
            })
        }
    }

    /// Applies the materialized relation `coeffs` to the head embedding.
    #[inline]
    pub(crate) fn transform(&self, coeffs: &[Complex], head: &[Complex], out: &mut [Complex]) {
        transform_into(self.family, self.rank, coeffs, head, out);
    }

    /// Scores `y` against every entity.
    pub(crate) fn score_all(&self, y: &[Complex], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(self.entities.chunks_exact(self.rank)) {
            *o = dot_re(y, t);
        }
    }
}

/// `ϑ(head)` for materialized coefficients.
#[inline]
pub(crate) fn transform_into(family: Family, rank: usize, coeffs: &[Complex], head: &[Complex], out: &mut [Complex]) {
    match family {
        Family::ComplEx => {
            for ((o, w), h) in out.iter_mut().zip(coeffs).zip(head) {
                *o = w * h;
            }
        }
        Family::FiveStar => {
            let (a, rest) = coeffs.split_at(rank);
            let (b, rest) = rest.split_at(rank);
            let (c, d) = rest.split_at(rank);
            for i in 0..rank {
                out[i] = mobius_point(a[i], b[i], c[i], d[i], head[i]);
            }
        }
    }
}

/// `Re Σᵢ yᵢ · conj(tᵢ)`, summed in index order.
#[inline]
pub(crate) fn dot_re(y: &[Complex], t: &[Complex]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in y.iter().zip(t) {
        acc += a.re * b.re + a.im * b.im;
    }
    acc
}

/// Chain rule through [`transform_into`]. Given `g_y`, accumulates into the
/// head gradient and the full-coefficient gradient.
pub(crate) fn transform_backward(
    family: Family,
    rank: usize,
    coeffs: &[Complex],
    head: &[Complex],
    g_y: &[Complex],
    g_head: &mut [Complex],
    g_coeffs: &mut [Complex],
) {
    match family {
        Family::ComplEx => {
            for i in 0..rank {
                g_head[i] += coeffs[i].conj() * g_y[i];
                g_coeffs[i] += head[i].conj() * g_y[i];
            }
        }
        Family::FiveStar => {
            for i in 0..rank {
                let (a, b, c, d) = (coeffs[i], coeffs[rank + i], coeffs[2 * rank + i], coeffs[3 * rank + i]);
                let x = head[i];
                let num = a * x + b;
                let den = c * x + d;
                let n2 = den.norm_sqr();
                let (g_num, g_den) = if n2 >= DIVISION_EPS {
                    // y = num / den
                    let inv = den.conj() / n2;
                    let y = num * inv;
                    (inv.conj() * g_y[i], (-y * inv).conj() * g_y[i])
                } else {
                    // y = num · conj(den) / eps
                    (den * g_y[i] / DIVISION_EPS, num / DIVISION_EPS * g_y[i].conj())
                };
                g_coeffs[i] += x.conj() * g_num;
                g_coeffs[rank + i] += g_num;
                g_coeffs[2 * rank + i] += x.conj() * g_den;
                g_coeffs[3 * rank + i] += g_den;
                g_head[i] += a.conj() * g_num + c.conj() * g_den;
            }
        }
    }
}

/// ComplEx score `Re Σᵢ rᵢ hᵢ conj(tᵢ)`.
pub fn score_complex(h: &ComplexVec, r: &ComplexVec, t: &ComplexVec) -> Result<f64> {
    r.check_len(h.len())?;
    t.check_len(h.len())?;
    let mut y = vec![ZERO; h.len()];
    transform_into(Family::ComplEx, h.len(), r.as_slice(), h.as_slice(), &mut y);
    Ok(dot_re(&y, t.as_slice()))
}

/// 5★ score `Re Σᵢ ϑ(h)ᵢ conj(tᵢ)`.
pub fn score_fivestar(h: &ComplexVec, coeffs: &MobiusCoeffs, t: &ComplexVec) -> Result<f64> {
    h.check_len(coeffs.rank())?;
    t.check_len(coeffs.rank())?;
    let mut y = vec![ZERO; h.len()];
    transform_into(Family::FiveStar, h.len(), &coeffs.to_flat(), h.as_slice(), &mut y);
    Ok(dot_re(&y, t.as_slice()))
}

/// Scores of one relation, given as stored parameters, for a single triple.
pub fn score_stored(h: &ComplexVec, rel: &RelationParams, t: &ComplexVec) -> Result<f64> {
    h.check_len(rel.rank())?;
    t.check_len(rel.rank())?;
    let mut coeffs = vec![ZERO; rel.family().full_len(rel.rank())];
    materialize_into(rel.family(), rel.layout(), rel.rank(), &rel.flat(), &mut coeffs);
    let mut y = vec![ZERO; h.len()];
    transform_into(rel.family(), rel.rank(), &coeffs, h.as_slice(), &mut y);
    Ok(dot_re(&y, t.as_slice()))
}

/// Row-major query × entity score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.data[q * self.cols..(q + 1) * self.cols]
    }

    pub fn get(&self, q: usize, e: usize) -> f64 {
        self.data[q * self.cols + e]
    }
}

/// 1-vs-all scores for `(head, relation)` queries.
pub fn score_batch(params: &ModelParams, queries: &[(usize, usize)]) -> Result<ScoreMatrix> {
    let cols = params.n_entities();
    let mut data = vec![0.0; queries.len() * cols];
    let mut coeffs = vec![ZERO; params.full_len()];
    let mut y = vec![ZERO; params.rank()];
    for (&(h, r), row) in queries.iter().zip(data.chunks_mut(cols.max(1))) {
        params.check_entity(h)?;
        params.check_relation(r)?;
        params.materialize_relation(r, &mut coeffs);
        params.transform(&coeffs, params.entity(h), &mut y);
        params.score_all(&y, row);
    }
    Ok(ScoreMatrix {
        rows: queries.len(),
        cols,
        data,
    })
}

/// Single-triple score straight from the model tables.
pub fn score_triple(params: &ModelParams, h: usize, r: usize, t: usize) -> Result<f64> {
    params.check_entity(h)?;
    params.check_entity(t)?;
    params.check_relation(r)?;
    let mut coeffs = vec![ZERO; params.full_len()];
    let mut y = vec![ZERO; params.rank()];
    params.materialize_relation(r, &mut coeffs);
    params.transform(&coeffs, params.entity(h), &mut y);
    Ok(dot_re(&y, params.entity(t)))
}

/// How relation parameters enter the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegMode {
    /// Every materialized coefficient.
    FullSum,
    /// Stored half counted twice; equals `FullSum` on conjugate layouts.
    SharedTimesTwo,
    /// Half of the full coefficients, not doubled.
    HalfOnly,
}

impl RegMode {
    pub const ALL: [RegMode; 3] = [RegMode::FullSum, RegMode::SharedTimesTwo, RegMode::HalfOnly];

    pub fn name(self) -> &'static str {
        match self {
            RegMode::FullSum => "full_sum",
            RegMode::SharedTimesTwo => "shared_times_two",
            RegMode::HalfOnly => "half_only",
        }
    }

    /// `SharedTimesTwo` for conjugate layouts, `FullSum` otherwise.
    pub fn default_for(layout: Layout) -> RegMode {
        if layout.is_conjugate() {
            RegMode::SharedTimesTwo
        } else {
            RegMode::FullSum
        }
    }
}

impl std::str::FromStr for RegMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        RegMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown regularization mode {s:?}"))
    }
}

/// Per-scalar penalty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegNorm {
    /// `re² + im²`.
    #[default]
    L2,
    /// `|z|³` (nuclear 3-norm).
    N3,
}

impl RegNorm {
    pub fn name(self) -> &'static str {
        match self {
            RegNorm::L2 => "l2",
            RegNorm::N3 => "n3",
        }
    }

    #[inline]
    fn value(self, z: Complex) -> f64 {
        match self {
            RegNorm::L2 => z.norm_sqr(),
            RegNorm::N3 => z.norm().powi(3),
        }
    }

    #[inline]
    fn grad(self, z: Complex) -> Complex {
        match self {
            RegNorm::L2 => 2.0 * z,
            RegNorm::N3 => 3.0 * z.norm() * z,
        }
    }

    pub(crate) fn sum(self, v: &[Complex]) -> f64 {
        v.iter().map(|&z| self.value(z)).sum()
    }

    pub(crate) fn add_grad(self, v: &[Complex], scale: f64, g: &mut [Complex]) {
        for (gi, &z) in g.iter_mut().zip(v) {
            *gi += scale * self.grad(z);
        }
    }
}

impl std::str::FromStr for RegNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l2" => Ok(RegNorm::L2),
            "n3" => Ok(RegNorm::N3),
            _ => Err(format!("unknown regularization norm {s:?}")),
        }
    }
}

/// The half of the full coefficients counted by `HalfOnly` on a `Full` layout.
fn half_range(family: Family, rank: usize) -> std::ops::Range<usize> {
    match family {
        Family::ComplEx => 0..rank / 2,
        Family::FiveStar => 0..2 * rank,
    }
}

/// Unweighted penalty of one relation's stored parameters.
pub fn relation_penalty(
    family: Family,
    layout: Layout,
    rank: usize,
    stored: &[Complex],
    mode: RegMode,
    norm: RegNorm,
) -> f64 {
    match (mode, layout) {
        (RegMode::FullSum, Layout::Full) | (RegMode::SharedTimesTwo, Layout::Full) => norm.sum(stored),
        (RegMode::FullSum, _) => {
            let mut full = vec![ZERO; family.full_len(rank)];
            materialize_into(family, layout, rank, stored, &mut full);
            norm.sum(&full)
        }
        (RegMode::SharedTimesTwo, _) => 2.0 * norm.sum(stored),
        (RegMode::HalfOnly, Layout::Full) => norm.sum(&stored[half_range(family, rank)]),
        (RegMode::HalfOnly, _) => norm.sum(stored),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn relation_penalty_grad(
    family: Family,
    layout: Layout,
    rank: usize,
    stored: &[Complex],
    mode: RegMode,
    norm: RegNorm,
    scale: f64,
    grad: &mut [Complex],
    scratch: &mut [Complex],
) {
    match (mode, layout) {
        (RegMode::FullSum, Layout::Full) | (RegMode::SharedTimesTwo, Layout::Full) => {
            norm.add_grad(stored, scale, grad)
        }
        (RegMode::FullSum, _) => {
            let mut full = vec![ZERO; family.full_len(rank)];
            materialize_into(family, layout, rank, stored, &mut full);
            scratch.fill(ZERO);
            norm.add_grad(&full, scale, scratch);
            accumulate_stored_grad(family, layout, rank, scratch, grad);
        }
        (RegMode::SharedTimesTwo, _) => norm.add_grad(stored, 2.0 * scale, grad),
        (RegMode::HalfOnly, Layout::Full) => {
            let range = half_range(family, rank);
            norm.add_grad(&stored[range.clone()], scale, &mut grad[range]);
        }
        (RegMode::HalfOnly, _) => norm.add_grad(stored, scale, grad),
    }
}

/// `coefficient · Σ` of the per-scalar penalty over the head, relation and
/// tail parameters of every triple in `batch`.
pub fn regularization(
    params: &ModelParams,
    batch: &[Triple],
    mode: RegMode,
    norm: RegNorm,
    coefficient: f64,
) -> Result<f64> {
    if !(coefficient >= 0.0) {
        return Err(Error::NegativeCoefficient(coefficient));
    }
    let mut total = 0.0;
    for t in batch {
        params.check_entity(t.head)?;
        params.check_entity(t.tail)?;
        params.check_relation(t.rel)?;
        total += norm.sum(params.entity(t.head));
        total += norm.sum(params.entity(t.tail));
        total += relation_penalty(
            params.family(),
            params.layout(),
            params.rank(),
            params.relation_stored(t.rel),
            mode,
            norm,
        );
    }
    Ok(coefficient * total)
}
