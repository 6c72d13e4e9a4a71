//! Complex vectors, relation-parameter layouts and materialization of
//! conjugate-shared parameters into full transform coefficients.
//!
//! A relation of the ComplEx family is a per-dimension weight vector `w`.
//! A relation of the 5★ family is a per-dimension Möbius matrix
//! `[[a, b], [c, d]]`. Conjugate layouts store half of those values and
//! derive the rest by conjugation:
//!
//! | layout       | stored   | materialized                 |
//! |--------------|----------|------------------------------|
//! | `Full`       | all      | identity copy                |
//! | `ConjHalf`   | `a1`     | `[a1 ‖ conj(a1)]`            |
//! | `ConjDiag`   | `a, b`   | `(a, b, conj(b), conj(a))`   |
//! | `ConjNeg`    | `a, b`   | `(a, b, -conj(b), conj(a))`  |
//! | `ConjVert`   | `a, b`   | `(a, b, conj(a), conj(b))`   |
//! | `ConjHoriz`  | `a, c`   | `(a, conj(a), c, conj(c))`   |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::MobiusCoeffs;

pub use num_complex::Complex64 as Complex;

#[inline]
pub fn conj(z: Complex) -> Complex {
    Complex::new(z.re, -z.im)
}

/// Fixed-length sequence of complex scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec(Vec<Complex>);

impl ComplexVec {
    pub fn new(elems: Vec<Complex>) -> Result<Self> {
        if elems.is_empty() {
            return Err(Error::ZeroRank);
        }
        Ok(ComplexVec(elems))
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(re, im)| Complex::new(re, im)).collect())
    }

    pub fn zeros(rank: usize) -> Result<Self> {
        Self::new(vec![Complex::new(0.0, 0.0); rank])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<Complex> {
        self.0
    }

    pub fn conj(&self) -> ComplexVec {
        ComplexVec(self.0.iter().map(|&z| conj(z)).collect())
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::RankMismatch {
                expected,
                got: self.len(),
            })
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &ComplexVec) -> Result<ComplexVec> {
        other.check_len(self.len())?;
        Ok(ComplexVec(self.0.iter().zip(&other.0).map(|(x, y)| x * y).collect()))
    }

    /// Sum of squared real components.
    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl std::ops::Index<usize> for ComplexVec {
    type Output = Complex;

    fn index(&self, i: usize) -> &Complex {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Per-dimension complex weights.
    #[serde(rename = "complex")]
    ComplEx,
    /// Per-dimension Möbius transformation.
    #[serde(rename = "fivestar")]
    FiveStar,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::ComplEx, Family::FiveStar];

    /// Complex scalars in a materialized relation.
    pub fn full_len(self, rank: usize) -> usize {
        match self {
            Family::ComplEx => rank,
            Family::FiveStar => 4 * rank,
        }
    }

    pub fn layouts(self) -> &'static [Layout] {
        match self {
            Family::ComplEx => &[Layout::Full, Layout::ConjHalf],
            Family::FiveStar => &[
                Layout::Full,
                Layout::ConjDiag,
                Layout::ConjNeg,
                Layout::ConjVert,
                Layout::ConjHoriz,
            ],
        }
    }

    /// The conjugate layout proposed for the family.
    pub fn default_conjugate(self) -> Layout {
        match self {
            Family::ComplEx => Layout::ConjHalf,
            Family::FiveStar => Layout::ConjDiag,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::ComplEx => "complex",
            Family::FiveStar => "fivestar",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "complex" | "ComplEx" => Ok(Family::ComplEx),
            "fivestar" | "5star" | "5*E" => Ok(Family::FiveStar),
            _ => Err(format!("unknown model family {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Full,
    ConjHalf,
    ConjDiag,
    ConjNeg,
    ConjVert,
    ConjHoriz,
}

impl Layout {
    pub const ALL: [Layout; 6] = [
        Layout::Full,
        Layout::ConjHalf,
        Layout::ConjDiag,
        Layout::ConjNeg,
        Layout::ConjVert,
        Layout::ConjHoriz,
    ];

    pub fn is_conjugate(self) -> bool {
        self != Layout::Full
    }

    pub fn supports(self, family: Family) -> bool {
        match self {
            Layout::Full => true,
            Layout::ConjHalf => family == Family::ComplEx,
            Layout::ConjDiag | Layout::ConjNeg | Layout::ConjVert | Layout::ConjHoriz => family == Family::FiveStar,
        }
    }

    /// Validates the (family, layout, rank) combination.
    pub fn check(self, family: Family, rank: usize) -> Result<()> {
        if rank == 0 {
            return Err(Error::ZeroRank);
        }
        if !self.supports(family) {
            return Err(Error::LayoutMismatch { family, layout: self });
        }
        if self == Layout::ConjHalf && !rank.is_multiple_of(2) {
            return Err(Error::OddRank { layout: self, rank });
        }
        Ok(())
    }

    /// Number of stored vectors and the length of each.
    pub fn stored_shape(self, family: Family, rank: usize) -> (usize, usize) {
        match (family, self) {
            (Family::ComplEx, Layout::ConjHalf) => (1, rank / 2),
            (Family::ComplEx, _) => (1, rank),
            (Family::FiveStar, Layout::Full) => (4, rank),
            (Family::FiveStar, _) => (2, rank),
        }
    }

    /// Complex scalars stored per relation.
    pub fn stored_len(self, family: Family, rank: usize) -> usize {
        let (n, len) = self.stored_shape(family, rank);
        n * len
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Full => "full",
            Layout::ConjHalf => "conj_half",
            Layout::ConjDiag => "conj_diag",
            Layout::ConjNeg => "conj_neg",
            Layout::ConjVert => "conj_vert",
            Layout::ConjHoriz => "conj_horiz",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Layout::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown layout {s:?}"))
    }
}

/// Real parameters stored for `n_relations` relations.
pub fn relation_param_count(family: Family, layout: Layout, n_relations: u64, rank: u64) -> Result<u64> {
    layout.check(family, rank as usize)?;
    let per_relation = match (family, layout) {
        (Family::ComplEx, Layout::Full) => 2 * rank,
        (Family::ComplEx, _) => rank,
        (Family::FiveStar, Layout::Full) => 8 * rank,
        (Family::FiveStar, _) => 4 * rank,
    };
    Ok(per_relation * n_relations)
}

/// Materialized relation coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Weights(ComplexVec),
    Mobius(MobiusCoeffs),
}

/// Stored parameters of one relation together with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationParams {
    family: Family,
    layout: Layout,
    rank: usize,
    stored: Vec<ComplexVec>,
}

impl RelationParams {
    pub fn new(family: Family, layout: Layout, rank: usize, stored: Vec<ComplexVec>) -> Result<Self> {
        layout.check(family, rank)?;
        let (n, len) = layout.stored_shape(family, rank);
        if stored.len() != n {
            return Err(Error::MalformedParams(format!(
                "{family}/{layout} stores {n} vectors, got {}",
                stored.len()
            )));
        }
        for v in &stored {
            v.check_len(len)?;
        }
        Ok(RelationParams {
            family,
            layout,
            rank,
            stored,
        })
    }

    /// Builds from a flat slice in stored order.
    pub fn from_flat(family: Family, layout: Layout, rank: usize, flat: &[Complex]) -> Result<Self> {
        layout.check(family, rank)?;
        let (n, len) = layout.stored_shape(family, rank);
        if flat.len() != n * len {
            return Err(Error::MalformedParams(format!(
                "expected {} stored scalars, got {}",
                n * len,
                flat.len()
            )));
        }
        let stored = flat.chunks(len).map(|c| ComplexVec(c.to_vec())).collect();
        Ok(RelationParams {
            family,
            layout,
            rank,
            stored,
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

    pub fn stored(&self) -> &[ComplexVec] {
        &self.stored
    }

    pub fn flat(&self) -> Vec<Complex> {
        self.stored.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn stored_real_count(&self) -> usize {
        2 * self.stored.iter().map(ComplexVec::len).sum::<usize>()
    }

    pub fn materialize(&self) -> Coefficients {
        let mut out = vec![Complex::new(0.0, 0.0); self.family.full_len(self.rank)];
        materialize_into(self.family, self.layout, self.rank, &self.flat(), &mut out);
        match self.family {
            Family::ComplEx => Coefficients::Weights(ComplexVec(out)),
            Family::FiveStar => {
                let r = self.rank;
                let part = |k: usize| ComplexVec(out[k * r..(k + 1) * r].to_vec());
                Coefficients::Mobius(MobiusCoeffs::from_parts(part(0), part(1), part(2), part(3)))
            }
        }
    }
}

/// Writes the full coefficient set for `stored` into `out`.
///
/// ComplEx output is the weight vector; 5★ output is `a ‖ b ‖ c ‖ d`.
/// The combination must already be validated with [`Layout::check`].
pub fn materialize_into(family: Family, layout: Layout, rank: usize, stored: &[Complex], out: &mut [Complex]) {
    debug_assert_eq!(stored.len(), layout.stored_len(family, rank));
    debug_assert_eq!(out.len(), family.full_len(rank));
    match (family, layout) {
        (_, Layout::Full) => out.copy_from_slice(stored),
        (Family::ComplEx, Layout::ConjHalf) => {
            let half = rank / 2;
            out[..half].copy_from_slice(stored);
            for (o, &s) in out[half..].iter_mut().zip(stored) {
                *o = conj(s);
            }
        }
        (Family::FiveStar, _) => {
            let (s0, s1) = stored.split_at(rank);
            let (a, rest) = out.split_at_mut(rank);
            let (b, rest) = rest.split_at_mut(rank);
            let (c, d) = rest.split_at_mut(rank);
            for i in 0..rank {
                let (x, y) = (s0[i], s1[i]);
                let (ai, bi, ci, di) = match layout {
                    Layout::ConjDiag => (x, y, conj(y), conj(x)),
                    Layout::ConjNeg => (x, y, -conj(y), conj(x)),
                    Layout::ConjVert => (x, y, conj(x), conj(y)),
                    // stored (a, c)
                    Layout::ConjHoriz => (x, conj(x), y, conj(y)),
                    _ => unreachable!("unsupported layout {layout} for 5★"),
                };
                a[i] = ai;
                b[i] = bi;
                c[i] = ci;
                d[i] = di;
            }
        }
        (Family::ComplEx, l) => unreachable!("unsupported layout {l} for ComplEx"),
    }
}

/// Chain rule through [`materialize_into`]: accumulates the gradient with
/// respect to stored parameters given the gradient with respect to the
/// materialized coefficients.
///
/// Gradients use the `∂/∂re + i ∂/∂im` convention, so a position holding
/// `conj(s)` contributes `conj(g)` and one holding `-conj(s)` contributes
/// `-conj(g)`.
pub fn accumulate_stored_grad(
    family: Family,
    layout: Layout,
    rank: usize,
    full_grad: &[Complex],
    stored_grad: &mut [Complex],
) {
    debug_assert_eq!(stored_grad.len(), layout.stored_len(family, rank));
    debug_assert_eq!(full_grad.len(), family.full_len(rank));
    match (family, layout) {
        (_, Layout::Full) => {
            for (s, g) in stored_grad.iter_mut().zip(full_grad) {
                *s += g;
            }
        }
        (Family::ComplEx, Layout::ConjHalf) => {
            let half = rank / 2;
            for i in 0..half {
                stored_grad[i] += full_grad[i] + conj(full_grad[half + i]);
            }
        }
        (Family::FiveStar, _) => {
            let ga = &full_grad[..rank];
            let gb = &full_grad[rank..2 * rank];
            let gc = &full_grad[2 * rank..3 * rank];
            let gd = &full_grad[3 * rank..];
            let (s0, s1) = stored_grad.split_at_mut(rank);
            for i in 0..rank {
                let (g0, g1) = match layout {
                    Layout::ConjDiag => (ga[i] + conj(gd[i]), gb[i] + conj(gc[i])),
                    Layout::ConjNeg => (ga[i] + conj(gd[i]), gb[i] - conj(gc[i])),
                    Layout::ConjVert => (ga[i] + conj(gc[i]), gb[i] + conj(gd[i])),
                    Layout::ConjHoriz => (ga[i] + conj(gb[i]), gc[i] + conj(gd[i])),
                    _ => unreachable!("unsupported layout {layout} for 5★"),
                };
                s0[i] += g0;
                s1[i] += g1;
            }
        }
        (Family::ComplEx, l) => unreachable!("unsupported layout {l} for ComplEx"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn mobius(p: &RelationParams) -> MobiusCoeffs {
        match p.materialize() {
            Coefficients::Mobius(m) => m,
            other => panic!("expected Möbius coefficients, got {other:?}"),
        }
    }

    #[test]
    fn conj_examples() {
        assert_eq!(conj(c(3.0, 4.0)), c(3.0, -4.0));
        assert_eq!(conj(c(5.0, 0.0)), c(5.0, 0.0));
        assert_eq!(conj(conj(c(1.5, -2.5))), c(1.5, -2.5));
    }

    #[test]
    fn materialize_conj_diag() {
        let p = RelationParams::new(
            Family::FiveStar,
            Layout::ConjDiag,
            1,
            vec![
                ComplexVec::from_pairs(&[(1.0, 1.0)]).unwrap(),
                ComplexVec::from_pairs(&[(2.0, 0.0)]).unwrap(),
            ],
        )
        .unwrap();
        let m = mobius(&p);
        assert_eq!(m.a()[0], c(1.0, 1.0));
        assert_eq!(m.b()[0], c(2.0, 0.0));
        assert_eq!(m.c()[0], c(2.0, 0.0));
        assert_eq!(m.d()[0], c(1.0, -1.0));
    }

    #[test]
    fn materialize_conj_neg() {
        let p = RelationParams::new(
            Family::FiveStar,
            Layout::ConjNeg,
            1,
            vec![
                ComplexVec::from_pairs(&[(0.0, 1.0)]).unwrap(),
                ComplexVec::from_pairs(&[(1.0, 0.0)]).unwrap(),
            ],
        )
        .unwrap();
        let m = mobius(&p);
        assert_eq!(m.c()[0], c(-1.0, 0.0));
        assert_eq!(m.d()[0], c(0.0, -1.0));
    }

    #[test]
    fn materialize_vert_and_horiz() {
        let a = ComplexVec::from_pairs(&[(1.0, 2.0)]).unwrap();
        let s = ComplexVec::from_pairs(&[(3.0, -4.0)]).unwrap();
        let vert = RelationParams::new(Family::FiveStar, Layout::ConjVert, 1, vec![a.clone(), s.clone()]).unwrap();
        let m = mobius(&vert);
        assert_eq!((m.c()[0], m.d()[0]), (c(1.0, -2.0), c(3.0, 4.0)));

        let horiz = RelationParams::new(Family::FiveStar, Layout::ConjHoriz, 1, vec![a, s]).unwrap();
        let m = mobius(&horiz);
        assert_eq!(m.a()[0], c(1.0, 2.0));
        assert_eq!(m.b()[0], c(1.0, -2.0));
        assert_eq!(m.c()[0], c(3.0, -4.0));
        assert_eq!(m.d()[0], c(3.0, 4.0));
    }

    #[test]
    fn materialize_conj_half() {
        let p = RelationParams::new(
            Family::ComplEx,
            Layout::ConjHalf,
            4,
            vec![ComplexVec::from_pairs(&[(1.0, 2.0), (3.0, -1.0)]).unwrap()],
        )
        .unwrap();
        let expected = ComplexVec::from_pairs(&[(1.0, 2.0), (3.0, -1.0), (1.0, -2.0), (3.0, 1.0)]).unwrap();
        assert_eq!(p.materialize(), Coefficients::Weights(expected));
    }

    #[test]
    fn layout_errors() {
        assert!(matches!(
            Layout::ConjHalf.check(Family::ComplEx, 5),
            Err(Error::OddRank { rank: 5, .. })
        ));
        assert!(matches!(
            Layout::ConjDiag.check(Family::ComplEx, 4),
            Err(Error::LayoutMismatch { .. })
        ));
        assert!(matches!(
            Layout::ConjHalf.check(Family::FiveStar, 4),
            Err(Error::LayoutMismatch { .. })
        ));
        assert!(relation_param_count(Family::ComplEx, Layout::ConjNeg, 1, 4).is_err());
        assert!(RelationParams::new(Family::FiveStar, Layout::Full, 1, vec![]).is_err());
    }

    #[test]
    fn param_counts() {
        assert_eq!(
            relation_param_count(Family::FiveStar, Layout::Full, 1, 500).unwrap(),
            4000
        );
        assert_eq!(relation_param_count(Family::ComplEx, Layout::Full, 3, 10).unwrap(), 60);
        assert_eq!(
            relation_param_count(Family::ComplEx, Layout::ConjHalf, 3, 10).unwrap(),
            30
        );
        for family in Family::ALL {
            for &layout in family.layouts() {
                let n = relation_param_count(family, layout, 7, 12).unwrap();
                let (k, len) = layout.stored_shape(family, 12);
                assert_eq!(n, 7 * 2 * (k * len) as u64);
            }
        }
    }

    #[test]
    fn determinants_of_conjugate_layouts_are_real() {
        let a = ComplexVec::from_pairs(&[(0.3, -1.2), (2.0, 0.5)]).unwrap();
        let b = ComplexVec::from_pairs(&[(-0.7, 0.4), (1.1, 1.9)]).unwrap();
        for (layout, sign) in [(Layout::ConjDiag, -1.0), (Layout::ConjNeg, 1.0)] {
            let m = mobius(&RelationParams::new(Family::FiveStar, layout, 2, vec![a.clone(), b.clone()]).unwrap());
            for i in 0..2 {
                let det = m.a()[i] * m.d()[i] - m.b()[i] * m.c()[i];
                let expected = a[i].norm_sqr() + sign * b[i].norm_sqr();
                assert!(det.im.abs() <= 1e-12);
                assert!((det.re - expected).abs() <= 1e-12);
                if layout == Layout::ConjNeg {
                    assert!(det.re >= 0.0);
                }
            }
        }
    }

    #[test]
    fn layout_names_parse() {
        for l in Layout::ALL {
            assert_eq!(l.name().parse::<Layout>().unwrap(), l);
        }
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
    }

    #[test]
    fn serde_names_match_display() {
        for f in Family::ALL {
            assert_eq!(serde_json::to_value(f).unwrap(), f.name());
        }
        for l in Layout::ALL {
            assert_eq!(serde_json::to_value(l).unwrap(), l.name());
        }
    }
}
