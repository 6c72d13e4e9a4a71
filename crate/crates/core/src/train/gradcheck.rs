//! Central finite-difference check of the analytic batch gradient.

use crate::complex::Complex;
use crate::data::Triple;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::train::objective::{batch_objective, Gradients, Penalty, Workspace};

pub const FD_STEP: f64 = 1e-5;
pub const MAX_RANK: usize = 8;
pub const MAX_ENTITIES: usize = 20;

/// Denominator floor for the relative error.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter with the largest error, e.g. `relation[2][5].im`.
    pub worst: String,
    pub n_checked: usize,
}

/// Largest `|analytic − numeric| / max(|analytic|, |numeric|)` over every
/// stored real parameter.
pub fn gradient_check(model: &ModelParams, batch: &[Triple], penalty: &Penalty) -> Result<f64> {
    Ok(gradient_check_report(model, batch, penalty)?.max_rel_error)
}

pub fn gradient_check_report(model: &ModelParams, batch: &[Triple], penalty: &Penalty) -> Result<GradCheck> {
    if model.rank() > MAX_RANK || model.n_entities() > MAX_ENTITIES {
        return Err(Error::InvalidConfig(format!(
            "gradient check is limited to rank <= {MAX_RANK} and <= {MAX_ENTITIES} entities"
        )));
    }
    let mut ws = Workspace::new(model);
    let mut grads = Gradients::zeros_like(model);
    batch_objective(model, batch, penalty, Some(&mut grads), &mut ws)?;

    let mut probe = model.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: String::new(),
        n_checked: 0,
    };
    for table in [Table::Entities, Table::Relations] {
        let analytic = match table {
            Table::Entities => &grads.entities,
            Table::Relations => &grads.relations,
        };
        for (idx, g) in analytic.iter().enumerate() {
            for part in [Part::Re, Part::Im] {
                let numeric = {
                    let mut eval = |delta: f64| -> Result<f64> {
                        let orig = table.get(&probe, idx);
                        table.set(&mut probe, idx, part.shift(orig, delta));
                        let v = batch_objective(&probe, batch, penalty, None, &mut ws);
                        table.set(&mut probe, idx, orig);
                        v
                    };
                    (eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP)
                };
                let a = part.of(*g);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
                report.n_checked += 1;
                if err > report.max_rel_error || report.worst.is_empty() {
                    report.max_rel_error = report.max_rel_error.max(err);
                    report.worst = table.describe(model, idx, part);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Copy)]
enum Table {
    Entities,
    Relations,
}

impl Table {
    fn get(self, m: &ModelParams, idx: usize) -> Complex {
        match self {
            Table::Entities => m.entities[idx],
            Table::Relations => m.relations[idx],
        }
    }

    fn set(self, m: &mut ModelParams, idx: usize, v: Complex) {
        match self {
            Table::Entities => m.entities[idx] = v,
            Table::Relations => m.relations[idx] = v,
        }
    }

    fn describe(self, m: &ModelParams, idx: usize, part: Part) -> String {
        let (name, width) = match self {
            Table::Entities => ("entity", m.rank()),
            Table::Relations => ("relation", m.stored_len()),
        };
        let p = match part {
            Part::Re => "re",
            Part::Im => "im",
        };
        format!("{name}[{}][{}].{p}", idx / width, idx % width)
    }
}

#[derive(Clone, Copy)]
enum Part {
    Re,
    Im,
}

impl Part {
    fn of(self, z: Complex) -> f64 {
        match self {
            Part::Re => z.re,
            Part::Im => z.im,
        }
    }

    fn shift(self, z: Complex, delta: f64) -> Complex {
        match self {
            Part::Re => Complex::new(z.re + delta, z.im),
            Part::Im => Complex::new(z.re, z.im + delta),
        }
    }
}
