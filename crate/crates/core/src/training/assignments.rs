//! Assignment log I/O and summaries.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Assignment;
use crate::data::DataError;

#[derive(Serialize, Deserialize)]
struct Row {
    example_id: usize,
    epoch: usize,
    chosen_members: String,
}

/// Writes the log as CSV `example_id,epoch,chosen_members` with members
/// joined by `;`.
pub fn write_assignments<W: Write>(writer: W, log: &[Assignment]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["example_id", "epoch", "chosen_members"])?;
    for a in log {
        let members: Vec<String> = a.chosen.iter().map(|m| m.to_string()).collect();
        w.write_record([a.example_id.to_string(), a.epoch.to_string(), members.join(";")])?;
    }
    w.flush().map_err(DataError::from)?;
    Ok(())
}

pub fn read_assignments<R: Read>(reader: R) -> Result<Vec<Assignment>, DataError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row?;
        let chosen = row
            .chosen_members
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DataError::AtRow {
                row: i + 2,
                source: Box::new(DataError::BadHeader(format!("bad member list: {e}"))),
            })?;
        out.push(Assignment {
            example_id: row.example_id,
            epoch: row.epoch,
            chosen,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSummary {
    /// Epoch the counts refer to (the last one in the log).
    pub epoch: Option<usize>,
    /// Per member, how many instances chose it first in that epoch.
    pub counts: Vec<usize>,
    /// Best label-permutation agreement, when labels are given.
    pub purity: Option<f64>,
}

/// Summarizes the last epoch of `log` for a `k`-member ensemble. `labels`
/// gives the planted class of each instance.
pub fn summarize_assignments(log: &[Assignment], k: usize, labels: Option<&[usize]>) -> AssignmentSummary {
    let epoch = log.iter().map(|a| a.epoch).max();
    let last: Vec<(usize, usize)> = log
        .iter()
        .filter(|a| Some(a.epoch) == epoch)
        .filter_map(|a| a.chosen.first().map(|&m| (a.example_id, m)))
        .collect();
    let k = k.max(last.iter().map(|&(_, m)| m + 1).max().unwrap_or(0));
    let mut counts = vec![0; k];
    for &(_, m) in &last {
        counts[m] += 1;
    }
    let purity = labels.map(|labels| {
        let pairs: Vec<(usize, usize)> = last
            .iter()
            .filter_map(|&(id, m)| labels.get(id).map(|&l| (m, l)))
            .collect();
        purity(&pairs)
    });
    AssignmentSummary { epoch, counts, purity }
}

/// Fraction of `(member, label)` pairs that agree under the best one-to-one
/// mapping from members to labels. Empty input gives 1.
pub fn purity(pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 1.0;
    }
    let n_members = pairs.iter().map(|p| p.0).max().unwrap() + 1;
    let n_labels = pairs.iter().map(|p| p.1).max().unwrap() + 1;
    let mut table = vec![vec![0usize; n_labels]; n_members];
    for &(m, l) in pairs {
        table[m][l] += 1;
    }
    let mut used = vec![false; n_labels];
    best_matching(&table, 0, &mut used) as f64 / pairs.len() as f64
}

fn best_matching(table: &[Vec<usize>], member: usize, used: &mut [bool]) -> usize {
    if member == table.len() {
        return 0;
    }
    // a member may also stay unmatched when there are more members than labels
    let mut best = best_matching(table, member + 1, used);
    for l in 0..used.len() {
        if !used[l] {
            used[l] = true;
            best = best.max(table[member][l] + best_matching(table, member + 1, used));
            used[l] = false;
        }
    }
    best
}
