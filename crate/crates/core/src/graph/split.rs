//! Train/validation/test splits.

use super::{AttributedGraph, GraphError, Result};
use crate::rng::seeded;
use rand::seq::SliceRandom;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitAssignment {
    pub fn new(mut train: Vec<usize>, mut val: Vec<usize>, mut test: Vec<usize>) -> Result<Self> {
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        let s = Self { train, val, test };
        s.validate(usize::MAX)?;
        Ok(s)
    }

    /// Checks non-emptiness, bounds against `universe` and disjointness.
    pub fn validate(&self, universe: usize) -> Result<()> {
        let bad = |m: String| Err(GraphError::InvalidSplit(m));
        if self.train.is_empty() || self.val.is_empty() || self.test.is_empty() {
            return bad("train, validation and test sets must be nonempty".into());
        }
        let mut all: Vec<usize> = self.train.iter().chain(&self.val).chain(&self.test).copied().collect();
        if let Some(&m) = all.iter().max() {
            if m >= universe {
                return bad(format!("index {m} out of range for {universe} items"));
            }
        }
        let len = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != len {
            return bad("sets are not pairwise disjoint".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Fractions {
    pub const fn new(train: f64, val: f64, test: f64) -> Self {
        Self { train, val, test }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| !(*f > 0.0)) || all.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(GraphError::InvalidSplit(format!(
                "fractions ({}, {}, {}) must be positive and sum to at most 1",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    fn counts(&self, size: usize) -> (usize, usize, usize) {
        let r = |f: f64| ((f * size as f64).round() as usize).max(1);
        let val = r(self.val);
        let test = r(self.test);
        let train = r(self.train).min(size.saturating_sub(val + test));
        (train, val, test)
    }
}

impl Default for Fractions {
    fn default() -> Self {
        Self::new(0.8, 0.1, 0.1)
    }
}

/// Splits item indices `0..labels.len()`. When `labels` is given the split
/// is stratified per class.
pub fn split_indices(count: usize, labels: Option<&[usize]>, fractions: Fractions, seed: u64) -> Result<SplitAssignment> {
    fractions.validate()?;
    let mut rng = seeded(seed);
    let groups: Vec<Vec<usize>> = match labels {
        Some(y) => {
            let classes = y.iter().max().map_or(0, |m| m + 1);
            let mut g = vec![Vec::new(); classes];
            for (i, &c) in y.iter().enumerate() {
                g[c].push(i);
            }
            for (c, members) in g.iter().enumerate() {
                if !members.is_empty() && members.len() < 3 {
                    return Err(GraphError::InvalidSplit(format!(
                        "class {c} has {} members, stratification needs at least 3",
                        members.len()
                    )));
                }
            }
            g.into_iter().filter(|m| !m.is_empty()).collect()
        }
        None => {
            if count < 3 {
                return Err(GraphError::InvalidSplit(format!("{count} items cannot fill three sets")));
            }
            vec![(0..count).collect()]
        }
    };
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for mut members in groups {
        members.shuffle(&mut rng);
        let (a, b, c) = fractions.counts(members.len());
        train.extend_from_slice(&members[..a]);
        val.extend_from_slice(&members[a..a + b]);
        test.extend_from_slice(&members[a + b..a + b + c]);
    }
    let s = SplitAssignment::new(train, val, test)?;
    s.validate(count)?;
    Ok(s)
}

/// Node split; `stratified` uses the node labels.
pub fn split_nodes(g: &AttributedGraph, fractions: Fractions, stratified: bool, seed: u64) -> Result<SplitAssignment> {
    let labels = if stratified {
        Some(g.node_labels().ok_or(GraphError::MissingLabels)?)
    } else {
        None
    };
    split_indices(g.n(), labels, fractions, seed)
}

/// Citation-benchmark style split: `per_class` training nodes per class,
/// then `val` and `test` nodes drawn from the remainder.
pub fn planetoid_split(g: &AttributedGraph, per_class: usize, val: usize, test: usize, seed: u64) -> Result<SplitAssignment> {
    let y = g.node_labels().ok_or(GraphError::MissingLabels)?;
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(&mut rng);
    let classes = g.num_classes();
    let mut taken = vec![0usize; classes];
    let (mut train, mut rest) = (Vec::new(), Vec::new());
    for i in order {
        if taken[y[i]] < per_class {
            taken[y[i]] += 1;
            train.push(i);
        } else {
            rest.push(i);
        }
    }
    if rest.len() < val + test {
        return Err(GraphError::InvalidSplit(format!(
            "{} nodes remain after training selection, need {}",
            rest.len(),
            val + test
        )));
    }
    let test_set = rest[val..val + test].to_vec();
    rest.truncate(val);
    SplitAssignment::new(train, rest, test_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_sbm, SbmSpec};
    use proptest::prelude::*;

    fn sbm600() -> AttributedGraph {
        sample_sbm(&SbmSpec { k: 3, community_size: 200, p: 0.05, q: 0.02, seed: 1 }).unwrap()
    }

    #[test]
    fn stratified_default_split() {
        let g = sbm600();
        let s = split_nodes(&g, Fractions::new(0.8, 0.1, 0.1), true, 4).unwrap();
        let y = g.node_labels().unwrap();
        for c in 0..3 {
            let cnt = |set: &[usize]| set.iter().filter(|&&i| y[i] == c).count();
            assert_eq!((cnt(&s.train), cnt(&s.val), cnt(&s.test)), (160, 20, 20));
        }
        s.validate(600).unwrap();
    }

    #[test]
    fn rejects_oversubscribed_fractions() {
        let g = sbm600();
        assert!(matches!(
            split_nodes(&g, Fractions::new(1.0, 0.5, 0.5), true, 0),
            Err(GraphError::InvalidSplit(_))
        ));
    }

    #[test]
    fn same_seed_same_split() {
        let g = sbm600();
        let a = split_nodes(&g, Fractions::default(), true, 77).unwrap();
        let b = split_nodes(&g, Fractions::default(), true, 77).unwrap();
        let c = split_nodes(&g, Fractions::default(), true, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_class_rejected() {
        let labels = [0, 0, 0, 1, 1];
        assert!(split_indices(5, Some(&labels), Fractions::default(), 0).is_err());
    }

    #[test]
    fn planetoid_counts() {
        let g = sbm600();
        let s = planetoid_split(&g, 20, 100, 200, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 100, 200));
        s.validate(600).unwrap();
    }

    proptest! {
        #[test]
        fn splits_disjoint_and_reproducible(count in 3usize..300, seed in any::<u64>(), strat in any::<bool>()) {
            let labels: Vec<usize> = (0..count).map(|i| i % 3).collect();
            let lab = if strat && count >= 9 { Some(labels.as_slice()) } else { None };
            let a = split_indices(count, lab, Fractions::default(), seed).unwrap();
            let b = split_indices(count, lab, Fractions::default(), seed).unwrap();
            prop_assert_eq!(&a, &b);
            a.validate(count).unwrap();
        }
    }
}
