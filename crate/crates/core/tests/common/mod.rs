#![allow(dead_code)]

use std::collections::BTreeSet;

use noesis_core::{FormalContext, QualityDimension};
use proptest::prelude::*;

/// Random contexts up to 12 objects x 10 attributes, split into 1-3 dimensions.
pub fn arb_context() -> impl Strategy<Value = FormalContext> {
    (0usize..=12, 1usize..=10, 1usize..=3, 0.0f64..1.0)
        .prop_flat_map(|(g, m, dims, density)| {
            let cells = proptest::collection::vec(proptest::bool::weighted(density.clamp(0.05, 0.95)), g * m);
            let granules = proptest::collection::vec(0u64..4, g);
            (Just(g), Just(m), Just(dims.min(m)), cells, granules)
        })
        .prop_map(|(g, m, dims, cells, granules)| build(g, m, dims, &cells, &granules))
}

pub fn build(g: usize, m: usize, dims: usize, cells: &[bool], granules: &[u64]) -> FormalContext {
    let per = m.div_ceil(dims);
    let attrs: Vec<String> = (0..m).map(|j| format!("m{j}")).collect();
    let dimensions = attrs
        .chunks(per)
        .enumerate()
        .map(|(i, chunk)| QualityDimension::new(format!("d{i}"), chunk.iter().cloned()))
        .collect();
    let objects = (0..g).map(|i| format!("g{i}")).collect();
    let incidence = cells.chunks(m.max(1)).take(g).map(|r| r.to_vec()).collect();
    let granules = (0..g).map(|i| (format!("g{i}"), granules[i])).collect();
    FormalContext::new(objects, dimensions, incidence, Some(granules)).unwrap()
}

/// Plain-matrix view used by the brute-force oracles.
pub struct Table {
    pub rows: Vec<Vec<bool>>,
    pub m: usize,
}

impl Table {
    pub fn of(ctx: &FormalContext) -> Self {
        Table { rows: ctx.incidence_matrix(), m: ctx.attribute_count() }
    }

    pub fn extent(&self, attrs: &BTreeSet<usize>) -> BTreeSet<usize> {
        (0..self.rows.len()).filter(|&g| attrs.iter().all(|&a| self.rows[g][a])).collect()
    }

    pub fn intent(&self, objs: &BTreeSet<usize>) -> BTreeSet<usize> {
        (0..self.m).filter(|&a| objs.iter().all(|&g| self.rows[g][a])).collect()
    }

    /// Every concept, found by closing all 2^m attribute subsets.
    pub fn powerset_concepts(&self) -> BTreeSet<(BTreeSet<usize>, BTreeSet<usize>)> {
        let mut out = BTreeSet::new();
        for mask in 0u32..(1 << self.m) {
            let attrs: BTreeSet<usize> = (0..self.m).filter(|&a| mask & (1 << a) != 0).collect();
            let ext = self.extent(&attrs);
            if self.intent(&ext) == attrs {
                out.insert((ext, attrs));
            }
        }
        out
    }
}

pub fn set_of(bits: &noesis_core::BitSet) -> BTreeSet<usize> {
    bits.iter().collect()
}
