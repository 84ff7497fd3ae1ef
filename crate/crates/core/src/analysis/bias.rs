//! Attribute co-occurrence counts per class, the raw data behind dataset
//! bias inspection.

use crate::data::AnnotatedDataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Threshold above which a continuous attribute counts as present.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    /// Attribute-index combinations, as requested.
    pub combinations: Vec<Vec<usize>>,
    /// `counts[i][c]` = instances of class `c` possessing every attribute in
    /// `combinations[i]`.
    pub counts: Vec<Vec<usize>>,
    pub class_labels: Vec<String>,
    pub attr_names: Vec<String>,
    pub total: usize,
}

/// Count, for each requested attribute combination, the per-class number of
/// instances whose attributes are all high (at threshold 0.5). The empty
/// combination yields per-class dataset totals.
pub fn bias_table(dataset: &AnnotatedDataset, combinations: &[Vec<usize>]) -> Result<BiasTable> {
    let attr_count = dataset.attr_count();
    for combo in combinations {
        for &a in combo {
            if a >= attr_count {
                return Err(Error::contract(format!(
                    "attribute index {a} out of range (dataset has {attr_count})"
                )));
            }
        }
    }
    let class_count = dataset.class_count();
    let mut counts = vec![vec![0usize; class_count]; combinations.len()];
    for inst in &dataset.instances {
        for (ci, combo) in combinations.iter().enumerate() {
            let has_all = combo
                .iter()
                .all(|&a| inst.attributes.values()[a] >= BINARIZE_THRESHOLD);
            if has_all {
                counts[ci][inst.label] += 1;
            }
        }
    }
    Ok(BiasTable {
        combinations: combinations.to_vec(),
        counts,
        class_labels: dataset.class_labels.clone(),
        attr_names: dataset.attr_names.clone(),
        total: dataset.len(),
    })
}

impl BiasTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("combination");
        for label in &self.class_labels {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (combo, row) in self.combinations.iter().zip(&self.counts) {
            if combo.is_empty() {
                out.push_str("(all)");
            } else {
                let names: Vec<&str> = combo
                    .iter()
                    .map(|&a| self.attr_names[a].as_str())
                    .collect();
                out.push_str(&names.join("+"));
            }
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}
