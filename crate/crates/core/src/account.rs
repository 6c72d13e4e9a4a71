//! Parameter and memory accounting per layout.

use serde::{Deserialize, Serialize};

use crate::complex::{relation_param_count, Family, Layout};
use crate::error::Result;

pub const MIB: f64 = (1u64 << 20) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountRow {
    pub family: Family,
    pub layout: Layout,
    pub rank: u64,
    pub n_entities: u64,
    pub n_relations: u64,
    /// Real scalars.
    pub entity_params: u64,
    pub relation_params: u64,
    pub total_params: u64,
}

impl AccountRow {
    pub fn bytes(&self, bytes_per_real: u64) -> u64 {
        self.total_params * bytes_per_real
    }

    pub fn mib(&self, bytes_per_real: u64) -> f64 {
        self.bytes(bytes_per_real) as f64 / MIB
    }
}

pub fn account(family: Family, layout: Layout, n_entities: u64, n_relations: u64, rank: u64) -> Result<AccountRow> {
    let relation_params = relation_param_count(family, layout, n_relations, rank)?;
    let entity_params = 2 * rank * n_entities;
    Ok(AccountRow {
        family,
        layout,
        rank,
        n_entities,
        n_relations,
        entity_params,
        relation_params,
        total_params: entity_params + relation_params,
    })
}

/// Rows for every layout each family supports, in `Layout::ALL` order.
pub fn account_table(families: &[Family], n_entities: u64, n_relations: u64, rank: u64) -> Result<Vec<AccountRow>> {
    let mut rows = Vec::new();
    for &family in families {
        for &layout in family.layouts() {
            rows.push(account(family, layout, n_entities, n_relations, rank)?);
        }
    }
    Ok(rows)
}

pub fn render_table(rows: &[AccountRow]) -> String {
    let mut out = format!(
        "{:<10} {:<11} {:>6} {:>14} {:>14} {:>14} {:>11} {:>11}\n",
        "family", "layout", "rank", "entity", "relation", "total", "MiB(f64)", "MiB(f32)"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<10} {:<11} {:>6} {:>14} {:>14} {:>14} {:>11.1} {:>11.1}\n",
            r.family.name(),
            r.layout.name(),
            r.rank,
            r.entity_params,
            r.relation_params,
            r.total_params,
            r.mib(8),
            r.mib(4)
        ));
    }
    out
}
