//! Training instances: one (source, reference) pair with copy supervision.

use crate::data::{Example, MeaningRepresentation, SourceSeq, Vocabulary, EOS};

/// Per target step: whether the token is treated as copied, and the source
/// positions it can be copied from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopySupervision {
    pub z: Vec<bool>,
    pub positions: Vec<Vec<usize>>,
}

impl CopySupervision {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// A target token is copied iff it equals some source value token; boundary
/// tokens never match.
pub fn make_copy_labels<S: AsRef<str>>(source: &SourceSeq, target: &[S]) -> CopySupervision {
    let positions: Vec<Vec<usize>> = target
        .iter()
        .map(|t| {
            let t = t.as_ref();
            source
                .tokens
                .iter()
                .zip(&source.is_value)
                .enumerate()
                .filter(|(_, (tok, &is_value))| is_value && tok.as_str() == t)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    CopySupervision {
        z: positions.iter().map(|p| !p.is_empty()).collect(),
        positions,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Index of the grouped example this reference belongs to.
    pub example_id: usize,
    pub source: SourceSeq,
    pub target: Vec<String>,
    /// Extended ids of the target followed by `EOS`.
    pub target_ext: Vec<usize>,
    /// Supervision for every target step including the final `EOS`.
    pub supervision: CopySupervision,
}

impl Instance {
    pub fn new(example_id: usize, mr: &MeaningRepresentation, reference: &[String], vocab: &Vocabulary) -> Self {
        let source = SourceSeq::from_mr(mr, vocab);
        Self::from_source(example_id, source, reference, vocab)
    }

    pub fn from_source(example_id: usize, source: SourceSeq, reference: &[String], vocab: &Vocabulary) -> Self {
        let mut target_ext: Vec<usize> = reference.iter().map(|t| source.ext_id(t, vocab)).collect();
        target_ext.push(EOS);
        let mut supervision = make_copy_labels(&source, reference);
        supervision.z.push(false);
        supervision.positions.push(Vec::new());
        Self {
            example_id,
            source,
            target: reference.to_vec(),
            target_ext,
            supervision,
        }
    }

    /// Number of predicted steps (reference length + EOS).
    pub fn steps(&self) -> usize {
        self.target_ext.len()
    }

    /// Base ids fed to the decoder after BOS (all target tokens but the final EOS).
    pub fn decoder_inputs(&self) -> Vec<usize> {
        self.target_ext[..self.target_ext.len() - 1]
            .iter()
            .map(|&id| self.source.base_id(id))
            .collect()
    }

    /// Base-vocabulary id of step `t`'s target (`UNK` for OOV tokens).
    pub fn base_target(&self, t: usize) -> usize {
        self.source.base_id(self.target_ext[t])
    }
}

/// One instance per (example, reference), in corpus order.
pub fn instances(examples: &[Example], vocab: &Vocabulary) -> Vec<Instance> {
    let mut out = Vec::new();
    for (id, ex) in examples.iter().enumerate() {
        let source = SourceSeq::from_mr(&ex.mr, vocab);
        for reference in &ex.references {
            out.push(Instance::from_source(id, source.clone(), reference, vocab));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_mr, tokenize, UNK};

    fn src(mr: &str) -> SourceSeq {
        SourceSeq::from_mr(&parse_mr(mr).unwrap(), &Vocabulary::with_words(&[], ["near"]).unwrap())
    }

    #[test]
    fn copy_labels_follow_overlap() {
        let s = src("area[riverside]");
        let sup = make_copy_labels(&s, &["near", "riverside"]);
        assert_eq!(sup.z, vec![false, true]);
        assert_eq!(sup.positions, vec![vec![], vec![1]]);
    }

    #[test]
    fn no_overlap_means_no_copies() {
        let s = src("area[riverside]");
        assert_eq!(make_copy_labels(&s, &["a", "b", "c"]).z, vec![false; 3]);
    }

    #[test]
    fn repeated_source_tokens_all_listed() {
        // linearized: __start_name__ x __end_name__ __start_near__ x __end_near__
        let s = src("name[x], near[x]");
        let sup = make_copy_labels(&s, &["the", "y", "near", "x"]);
        assert_eq!(sup.positions[3], vec![1, 4]);
    }

    #[test]
    fn boundary_tokens_never_match() {
        let s = src("name[x]");
        assert_eq!(make_copy_labels(&s, &["__start_name__"]).z, vec![false]);
    }

    #[test]
    fn instance_layout() {
        let vocab = Vocabulary::with_words(&[], ["is", "good"]).unwrap();
        let mr = parse_mr("name[zed]").unwrap();
        let inst = Instance::new(0, &mr, &tokenize("zed is good"), &vocab);
        assert_eq!(inst.steps(), 4);
        assert_eq!(inst.target_ext[0], vocab.len());
        assert_eq!(*inst.target_ext.last().unwrap(), EOS);
        assert_eq!(inst.decoder_inputs()[0], UNK);
        assert_eq!(inst.supervision.z, vec![true, false, false, false]);
        for (z, p) in inst.supervision.z.iter().zip(&inst.supervision.positions) {
            assert_eq!(*z, !p.is_empty());
        }
    }
}
