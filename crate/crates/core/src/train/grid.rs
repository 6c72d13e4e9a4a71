//! Validation-MRR grid search.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FilterIndex};
use crate::error::{Error, Result};
use crate::train::config::{ModelConfig, OptimizerKind};
use crate::train::fit;

/// Hyperparameter value sets; points are enumerated in lexicographic order
/// over (rank, learning rate, batch size, regularization, optimizer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ranks: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub reg_coefficients: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
}

impl Default for Grid {
    /// The search space used for the published baselines.
    fn default() -> Self {
        Grid {
            ranks: vec![100, 500],
            learning_rates: vec![1e-2, 5e-2, 1e-1],
            batch_sizes: vec![100, 500, 1000, 2000],
            reg_coefficients: vec![2.5e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1],
            optimizers: OptimizerKind::ALL.to_vec(),
        }
    }
}

impl Grid {
    /// Grid holding only the values of `base`.
    pub fn single(base: &ModelConfig) -> Self {
        Grid {
            ranks: vec![base.rank],
            learning_rates: vec![base.learning_rate],
            batch_sizes: vec![base.batch_size],
            reg_coefficients: vec![base.reg_coefficient],
            optimizers: vec![base.optimizer],
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
            * self.learning_rates.len()
            * self.batch_sizes.len()
            * self.reg_coefficients.len()
            * self.optimizers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point applied on top of `base`.
    pub fn points(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &rank in &self.ranks {
            for &learning_rate in &self.learning_rates {
                for &batch_size in &self.batch_sizes {
                    for &reg_coefficient in &self.reg_coefficients {
                        for &optimizer in &self.optimizers {
                            out.push(ModelConfig {
                                rank,
                                learning_rate,
                                batch_size,
                                reg_coefficient,
                                optimizer,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: ModelConfig,
    /// Mean over repeats of the best validation MRR.
    pub valid_mrr: f64,
    pub seconds_per_epoch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ModelConfig,
    pub best_index: usize,
    pub table: Vec<GridEntry>,
}

/// Trains every grid point `repeats` times (seeds `base.seed + k`) and picks
/// the highest mean validation MRR; ties go to the lower epoch time, then
/// to the earlier point.
pub fn grid_search(
    dataset: &Dataset,
    filter: &FilterIndex,
    base: &ModelConfig,
    grid: &Grid,
    repeats: usize,
) -> Result<GridResult> {
    if grid.is_empty() || repeats == 0 {
        return Err(Error::EmptyGrid);
    }
    let mut table = Vec::with_capacity(grid.len());
    for point in grid.points(base) {
        point.validate()?;
        let mut mrr = 0.0;
        let mut secs = 0.0;
        for k in 0..repeats {
            let cfg = ModelConfig {
                seed: base.seed.wrapping_add(k as u64),
                ..point.clone()
            };
            let r = fit(dataset, filter, &cfg)?;
            mrr += r.best_valid.mrr;
            secs += r.mean_epoch_seconds();
        }
        table.push(GridEntry {
            config: point,
            valid_mrr: mrr / repeats as f64,
            seconds_per_epoch: secs / repeats as f64,
        });
    }
    let best_index = select_best(&table);
    Ok(GridResult {
        best: table[best_index].config.clone(),
        best_index,
        table,
    })
}

fn select_best(table: &[GridEntry]) -> usize {
    let mut best = 0;
    for (i, e) in table.iter().enumerate().skip(1) {
        let b = &table[best];
        if e.valid_mrr > b.valid_mrr || (e.valid_mrr == b.valid_mrr && e.seconds_per_epoch < b.seconds_per_epoch) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{Family, Layout};

    #[test]
    fn default_grid_has_432_points() {
        let g = Grid::default();
        assert_eq!(g.len(), 2 * 3 * 4 * 6 * 3);
        let pts = g.points(&ModelConfig::new(Family::FiveStar, Layout::ConjDiag));
        assert_eq!(pts.len(), 432);
        assert_eq!((pts[0].rank, pts[0].optimizer), (100, OptimizerKind::Adagrad));
        assert_eq!(pts[1].optimizer, OptimizerKind::Adam);
        assert_eq!(pts[431].rank, 500);
        assert!(pts.iter().all(|p| p.layout == Layout::ConjDiag));
    }

    #[test]
    fn tie_breaks() {
        let cfg = ModelConfig::default();
        let entry = |mrr, secs| GridEntry {
            config: cfg.clone(),
            valid_mrr: mrr,
            seconds_per_epoch: secs,
        };
        assert_eq!(select_best(&[entry(0.5, 1.0), entry(0.6, 9.0)]), 1);
        assert_eq!(select_best(&[entry(0.5, 2.0), entry(0.5, 1.0)]), 1);
        assert_eq!(select_best(&[entry(0.5, 1.0), entry(0.5, 1.0)]), 0);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let d = Dataset::from_texts("a\tr\tb\n", "a\tr\tb\n", "a\tr\tb\n").unwrap();
        let filter = crate::data::build_filter_index(&d);
        let mut g = Grid::single(&ModelConfig::default());
        g.optimizers.clear();
        assert!(matches!(
            grid_search(&d, &filter, &ModelConfig::default(), &g, 1),
            Err(Error::EmptyGrid)
        ));
    }
}
