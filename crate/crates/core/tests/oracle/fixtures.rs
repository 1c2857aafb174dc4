//! Published reference numbers fed straight into the report builders.

use mtqe_core::agreement::{AgreementRow, AgreementTable, Dimension, Kappa};
use mtqe_core::model::{ErrorCategory, Score, SystemId};
use mtqe_core::scoring::{CategoryTotals, SeverityDistribution};

pub const SYSTEMS: [&str; 3] = ["Jais", "GPT-3.5", "NLLB-200"];

/// Segment counts per bucket out of 100 (NLLB minor is the remainder).
pub fn severity_counts() -> Vec<SeverityDistribution> {
    vec![
        SeverityDistribution::from_counts("Jais", 36, 34, 30),
        SeverityDistribution::from_counts("GPT-3.5", 39, 26, 35),
        SeverityDistribution::from_counts("NLLB-200", 19, 19, 62),
    ]
}

fn q(x: i64) -> Score {
    Score::new(x, 4)
}

/// Per-category split is illustrative; only the grand totals are reference
/// values (187.50, 196.25, 297.50).
pub fn category_totals() -> Vec<CategoryTotals> {
    use ErrorCategory::*;
    let split = |name: &str, v: [i64; 5]| {
        CategoryTotals::from_parts(name, [Flu, Prn, Trm, Gsmis, Adp].into_iter().zip(v.map(q)))
    };
    vec![
        split("Jais", [240, 120, 160, 180, 50]),
        split("GPT-3.5", [220, 140, 200, 195, 30]),
        split("NLLB-200", [360, 240, 280, 270, 40]),
    ]
}

pub const KAPPAS: [[f64; 4]; 3] = [
    [0.507, 0.529, 0.171, 0.608],
    [0.552, 0.629, 0.122, 0.629],
    [0.368, 0.554, 0.280, 0.500],
];

pub fn agreement_table() -> AgreementTable {
    let systems: Vec<SystemId> = SYSTEMS.iter().map(|s| SystemId::new(*s)).collect();
    let mut rows = Vec::new();
    for (sys, ks) in systems.iter().zip(KAPPAS) {
        for (dim, k) in Dimension::ALL.into_iter().zip(ks) {
            rows.push(AgreementRow::new(dim, sys.clone(), Kappa::Value(k), 100));
        }
    }
    AgreementTable {
        annotators: Vec::new(),
        systems,
        rows,
        excluded: Vec::new(),
    }
}
