use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::MeaningRepresentation;

/// Attributes left out of the coverage aggregate.
pub const COVERAGE_EXCLUDED: [&str; 1] = ["familyFriendly"];

/// Whether `needle` occurs as a contiguous run in `haystack`.
pub fn contains_run<S: AsRef<str>, T: AsRef<str>>(haystack: &[S], needle: &[T]) -> bool {
    !needle.is_empty()
        && haystack.len() >= needle.len()
        && haystack
            .windows(needle.len())
            .any(|w| w.iter().zip(needle).all(|(a, b)| a.as_ref() == b.as_ref()))
}

/// `(key, covered)` for every attribute of `mr`, in MR order. An attribute is
/// covered when its value tokens appear contiguously in `generated`.
pub fn attribute_coverage<S: AsRef<str>>(mr: &MeaningRepresentation, generated: &[S]) -> Vec<(String, bool)> {
    mr.pairs()
        .iter()
        .map(|p| (p.key.clone(), contains_run(generated, &p.value)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCount {
    pub generated: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Counts for every attribute, including excluded ones.
    pub per_attribute: BTreeMap<String, CoverageCount>,
    pub generated: usize,
    pub expected: usize,
    /// Lower-bound percentage over non-excluded attributes; `None` when no
    /// such attribute occurs.
    pub overall: Option<f64>,
}

impl CoverageReport {
    pub fn add<S: AsRef<str>>(&mut self, mr: &MeaningRepresentation, generated: &[S]) {
        for (key, covered) in attribute_coverage(mr, generated) {
            let excluded = COVERAGE_EXCLUDED.contains(&key.as_str());
            let c = self.per_attribute.entry(key).or_default();
            c.expected += 1;
            c.generated += covered as usize;
            if !excluded {
                self.expected += 1;
                self.generated += covered as usize;
            }
        }
        self.overall = (self.expected > 0).then(|| 100.0 * self.generated as f64 / self.expected as f64);
    }
}

/// Aggregate coverage over a corpus of (MR, generated tokens) pairs.
pub fn corpus_coverage<S: AsRef<str>>(items: &[(&MeaningRepresentation, &[S])]) -> CoverageReport {
    let mut report = CoverageReport::default();
    for (mr, gen) in items {
        report.add(mr, gen);
    }
    report
}
