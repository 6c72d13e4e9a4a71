//! SGD, Adagrad and Adam over complex parameter buffers, applied to the
//! real and imaginary components independently.

use crate::complex::Complex;
use crate::train::config::OptimizerKind;

pub const ADAGRAD_EPS: f64 = 1e-10;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

const ZERO: Complex = Complex::new(0.0, 0.0);

/// Optimizer state for one parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<Complex>,
    second: Vec<Complex>,
    steps: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, len: usize) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adagrad => (Vec::new(), vec![ZERO; len]),
            OptimizerKind::Adam => (vec![ZERO; len], vec![ZERO; len]),
        };
        Optimizer {
            kind,
            first,
            second,
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step(&mut self, lr: f64, params: &mut [Complex], grads: &[Complex]) {
        debug_assert_eq!(params.len(), grads.len());
        self.steps = self.steps.saturating_add(1);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.re -= lr * g.re;
                    p.im -= lr * g.im;
                }
            }
            OptimizerKind::Adagrad => {
                for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.second) {
                    acc.re += g.re * g.re;
                    acc.im += g.im * g.im;
                    p.re -= lr * g.re / (acc.re.sqrt() + ADAGRAD_EPS);
                    p.im -= lr * g.im / (acc.im.sqrt() + ADAGRAD_EPS);
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.steps);
                let c2 = 1.0 - ADAM_BETA2.powi(self.steps);
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                };
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    update(&mut p.re, g.re, &mut m.re, &mut v.re);
                    update(&mut p.im, g.im, &mut m.im, &mut v.im);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn sgd_step() {
        let mut p = [c(1.0, -1.0)];
        Optimizer::new(OptimizerKind::Sgd, 1).step(0.5, &mut p, &[c(2.0, 4.0)]);
        assert_eq!(p[0], c(0.0, -3.0));
    }

    #[test]
    fn adagrad_first_step_is_sign_times_lr() {
        let mut p = [c(1.0, 1.0)];
        let mut opt = Optimizer::new(OptimizerKind::Adagrad, 1);
        opt.step(0.1, &mut p, &[c(3.0, -0.5)]);
        // eps in the denominator shifts the step by at most lr·eps/|g|
        assert!((p[0].re - 0.9).abs() < 1e-10);
        assert!((p[0].im - 1.1).abs() < 1e-10);
        // second step: acc = 9 + 9 = 18
        opt.step(0.1, &mut p, &[c(3.0, 0.0)]);
        assert!((p[0].re - (0.9 - 0.3 / 18f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn adam_first_step_is_sign_times_lr() {
        let mut p = [c(0.0, 0.0)];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1);
        opt.step(0.01, &mut p, &[c(5.0, -1e-3)]);
        assert!((p[0].re + 0.01).abs() < 1e-9);
        assert!((p[0].im - 0.01).abs() < 1e-7);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        for kind in OptimizerKind::ALL {
            let orig = [c(0.3, -0.7), c(1e-3, 2.0)];
            let mut p = orig;
            let mut opt = Optimizer::new(kind, 2);
            for _ in 0..3 {
                opt.step(0.0, &mut p, &[c(1.0, 2.0), c(-3.0, 0.5)]);
            }
            assert_eq!(
                p.map(|z| (z.re.to_bits(), z.im.to_bits())),
                orig.map(|z| (z.re.to_bits(), z.im.to_bits()))
            );
        }
    }
}
