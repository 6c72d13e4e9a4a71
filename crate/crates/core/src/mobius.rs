//! Per-dimension Möbius transformations `x ↦ (ax + b) / (cx + d)` and their
//! decomposition into translation, inversion, scaling and translation.

use crate::complex::{Complex, ComplexVec};
use crate::error::{Error, Result};

/// Floor on `|cx + d|²` in the guarded division.
pub const DIVISION_EPS: f64 = 1e-12;

/// Smallest `|c|` for which the decomposition is considered defined.
pub const DECOMPOSE_THRESHOLD: f64 = 1e-6;

/// Full per-dimension coefficients of a 5★ relation.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusCoeffs {
    a: ComplexVec,
    b: ComplexVec,
    c: ComplexVec,
    d: ComplexVec,
}

impl MobiusCoeffs {
    /// Lengths are guaranteed equal by the materializer.
    pub(crate) fn from_parts(a: ComplexVec, b: ComplexVec, c: ComplexVec, d: ComplexVec) -> Self {
        debug_assert!(a.len() == b.len() && b.len() == c.len() && c.len() == d.len());
        MobiusCoeffs { a, b, c, d }
    }

    pub fn new(a: ComplexVec, b: ComplexVec, c: ComplexVec, d: ComplexVec) -> Result<Self> {
        for v in [&b, &c, &d] {
            v.check_len(a.len())?;
        }
        Ok(MobiusCoeffs { a, b, c, d })
    }

    pub fn rank(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &ComplexVec {
        &self.a
    }

    pub fn b(&self) -> &ComplexVec {
        &self.b
    }

    pub fn c(&self) -> &ComplexVec {
        &self.c
    }

    pub fn d(&self) -> &ComplexVec {
        &self.d
    }

    /// Coefficients as one `a ‖ b ‖ c ‖ d` buffer.
    pub fn to_flat(&self) -> Vec<Complex> {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }
}

/// Guarded Möbius map of a single complex scalar.
#[inline]
pub fn mobius_point(a: Complex, b: Complex, c: Complex, d: Complex, x: Complex) -> Complex {
    let num = a * x + b;
    let den = c * x + d;
    num * den.conj() / den.norm_sqr().max(DIVISION_EPS)
}

pub fn transform_mobius(coeffs: &MobiusCoeffs, x: &ComplexVec) -> Result<ComplexVec> {
    x.check_len(coeffs.rank())?;
    let out = (0..x.len())
        .map(|i| mobius_point(coeffs.a[i], coeffs.b[i], coeffs.c[i], coeffs.d[i], x[i]))
        .collect();
    ComplexVec::new(out)
}

/// One dimension of `ϑ4 ∘ ϑ3 ∘ ϑ2 ∘ ϑ1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusSteps {
    /// ϑ1: translation by `d / c`.
    pub shift_in: Complex,
    /// ϑ3: homothety and rotation by `(bc − ad) / c²`.
    pub scale: Complex,
    /// ϑ4: translation by `a / c`.
    pub shift_out: Complex,
}

impl MobiusSteps {
    pub fn translate_in(&self, x: Complex) -> Complex {
        x + self.shift_in
    }

    /// ϑ2: inversion and reflection about the real axis.
    pub fn invert(&self, x: Complex) -> Complex {
        x.conj() / x.norm_sqr()
    }

    pub fn rescale(&self, x: Complex) -> Complex {
        self.scale * x
    }

    pub fn translate_out(&self, x: Complex) -> Complex {
        x + self.shift_out
    }

    pub fn apply(&self, x: Complex) -> Complex {
        self.translate_out(self.rescale(self.invert(self.translate_in(x))))
    }
}

pub fn decompose_mobius(coeffs: &MobiusCoeffs) -> Result<Vec<MobiusSteps>> {
    (0..coeffs.rank())
        .map(|i| {
            let (a, b, c, d) = (coeffs.a[i], coeffs.b[i], coeffs.c[i], coeffs.d[i]);
            let modulus = c.norm();
            if !(modulus >= DECOMPOSE_THRESHOLD) {
                return Err(Error::DecompositionUndefined { dim: i, modulus });
            }
            Ok(MobiusSteps {
                shift_in: d / c,
                scale: (b * c - a * d) / (c * c),
                shift_out: a / c,
            })
        })
        .collect()
}

/// Applies a decomposition pointwise.
pub fn compose_steps(steps: &[MobiusSteps], x: &ComplexVec) -> Result<ComplexVec> {
    x.check_len(steps.len())?;
    ComplexVec::new(steps.iter().zip(x.iter()).map(|(s, &xi)| s.apply(xi)).collect())
}
