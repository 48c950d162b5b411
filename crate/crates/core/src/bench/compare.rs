use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::Protocol;
use super::experiment::RunReport;
use crate::error::{NbvError, Result};
use crate::stats::{mean, paired_t_test, std_dev};

/// Mean and spread of AUC for one (mesh, policy) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// AUC keyed by seed.
    pub by_seed: BTreeMap<u64, f64>,
}

/// Paired-seed test between two columns of one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub row: String,
    pub a: String,
    pub b: String,
    pub n: usize,
    /// Mean of `AUC(a) − AUC(b)`.
    pub mean_difference: f64,
    pub p_two_sided: f64,
    /// One-sided p-value for `AUC(a) > AUC(b)`.
    pub p_a_greater: f64,
}

/// Rows are meshes, columns are policies (suffixed `#2`, `#3`, ... when a
/// policy repeats on one mesh).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub protocol: Protocol,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<Cell>>>,
    pub tests: Vec<PairedRow>,
    pub notes: Vec<String>,
}

pub fn compare(reports: &[RunReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(NbvError::invalid("compare needs at least two reports"));
    }
    let protocol = reports[0].protocol;
    if protocol == Protocol::VerifyTheorem {
        return Err(NbvError::invalid("theorem reports carry no coverage curves to compare"));
    }
    if let Some(r) = reports.iter().find(|r| r.protocol != protocol) {
        return Err(NbvError::invalid(format!(
            "protocol mismatch: {} vs {}",
            protocol.name(),
            r.protocol.name()
        )));
    }
    let mut rows: Vec<String> = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    let mut entries: Vec<(usize, usize, Cell)> = Vec::new();
    for r in reports {
        let row = match rows.iter().position(|x| *x == r.label) {
            Some(i) => i,
            None => {
                rows.push(r.label.clone());
                rows.len() - 1
            }
        };
        let base = r.policy.map(|p| p.name().to_string()).unwrap_or_else(|| "run".into());
        let mut name = base.clone();
        let mut k = 2;
        loop {
            let col = columns.iter().position(|c| *c == name);
            match col {
                Some(c) if entries.iter().any(|(rr, cc, _)| *rr == row && *cc == c) => {
                    name = format!("{base}#{k}");
                    k += 1;
                }
                _ => break,
            }
        }
        let col = match columns.iter().position(|c| *c == name) {
            Some(c) => c,
            None => {
                columns.push(name);
                columns.len() - 1
            }
        };
        let by_seed: BTreeMap<u64, f64> = r.seeds.iter().filter_map(|s| s.auc.map(|a| (s.seed, a))).collect();
        let aucs: Vec<f64> = by_seed.values().copied().collect();
        entries.push((
            row,
            col,
            Cell {
                n: aucs.len(),
                mean_auc: mean(&aucs),
                std_auc: std_dev(&aucs),
                by_seed,
            },
        ));
    }
    let mut cells: Vec<Vec<Option<Cell>>> = vec![vec![None; columns.len()]; rows.len()];
    for (r, c, cell) in entries {
        cells[r][c] = Some(cell);
    }
    let mut tests = Vec::new();
    let mut notes = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        for i in 0..columns.len() {
            for j in i + 1..columns.len() {
                let (Some(a), Some(b)) = (&cells[ri][i], &cells[ri][j]) else {
                    continue;
                };
                let seeds_match = a.by_seed.keys().eq(b.by_seed.keys());
                let test = if seeds_match {
                    let xa: Vec<f64> = a.by_seed.values().copied().collect();
                    let xb: Vec<f64> = b.by_seed.values().copied().collect();
                    paired_t_test(&xa, &xb)
                } else {
                    None
                };
                match test {
                    Some(t) => tests.push(PairedRow {
                        row: row.clone(),
                        a: columns[i].clone(),
                        b: columns[j].clone(),
                        n: t.n,
                        mean_difference: t.mean_difference,
                        p_two_sided: t.p_two_sided,
                        p_a_greater: t.p_greater,
                    }),
                    None => notes.push(format!(
                        "{row}: {} vs {}: p-value omitted ({})",
                        columns[i],
                        columns[j],
                        if seeds_match { "fewer than two paired seeds" } else { "seed lists differ" }
                    )),
                }
            }
        }
    }
    Ok(ComparisonTable {
        protocol,
        rows,
        columns,
        cells,
        tests,
        notes,
    })
}

impl ComparisonTable {
    /// `mesh,<policy>...` with `mean ± std` cells (empty when missing).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mesh");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            s.push_str(row);
            for cell in &self.cells[r] {
                s.push(',');
                if let Some(c) = cell {
                    let _ = write!(s, "{:.4} ± {:.4}", c.mean_auc, c.std_auc);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn tests_csv(&self) -> String {
        let mut s = String::from("mesh,a,b,n,mean_difference,p_two_sided,p_a_greater\n");
        for t in &self.tests {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                t.row, t.a, t.b, t.n, t.mean_difference, t.p_two_sided, t.p_a_greater
            );
        }
        s
    }
}
