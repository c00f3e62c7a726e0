use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Train/validation/test node sets for a Left-Out-Classes experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub ood_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ood_classes: Vec<usize>,
    pub per_class_train: usize,
    /// Share of all nodes placed in the test set.
    pub test_fraction: f64,
    /// Share of the remaining labeled ID nodes kept for validation.
    pub val_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { ood_classes: Vec::new(), per_class_train: 20, test_fraction: 0.2, val_fraction: 1.0 }
    }
}

/// Builds a split in which no node of an OOD class reaches train or val.
///
/// Train gets exactly `per_class_train` labeled nodes from every ID class.
/// The test set is `round(test_fraction · N)` labeled nodes (ID and OOD)
/// drawn from those not in train. Validation takes `val_fraction` of the
/// labeled ID nodes left over.
pub fn make_loc_split(graph: &Graph, cfg: &SplitConfig, seed: u64) -> Result<SplitSpec> {
    let c = graph.num_classes();
    let ood: BTreeSet<usize> = cfg.ood_classes.iter().copied().collect();
    if let Some(&bad) = ood.iter().find(|&&k| k >= c) {
        return Err(Error::Config(format!("ood class {bad} outside [0, {c})")));
    }
    if ood.len() == c {
        return Err(Error::Config("every class is marked out-of-distribution".into()));
    }
    if !(0.0..=1.0).contains(&cfg.test_fraction) || !(0.0..=1.0).contains(&cfg.val_fraction) {
        return Err(Error::Config("test_fraction and val_fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.num_nodes();
    let mut in_train = vec![false; n];
    let mut train_idx = Vec::new();
    for class in (0..c).filter(|k| !ood.contains(k)) {
        let mut members = graph.nodes_of_class(class);
        if members.len() < cfg.per_class_train {
            return Err(Error::InsufficientLabels {
                class,
                available: members.len(),
                required: cfg.per_class_train,
            });
        }
        members.shuffle(&mut rng);
        for &i in &members[..cfg.per_class_train] {
            in_train[i] = true;
            train_idx.push(i);
        }
    }

    let mut rest: Vec<usize> = (0..n).filter(|&i| !in_train[i] && graph.label(i).is_some()).collect();
    rest.shuffle(&mut rng);
    let n_test = ((cfg.test_fraction * n as f64).round() as usize).min(rest.len());
    let test_idx = rest[..n_test].to_vec();
    let id_rest: Vec<usize> = rest[n_test..]
        .iter()
        .copied()
        .filter(|&i| graph.label(i).is_some_and(|l| !ood.contains(&l)))
        .collect();
    let n_val = (cfg.val_fraction * id_rest.len() as f64).round() as usize;
    let val_idx = id_rest[..n_val].to_vec();

    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    Ok(SplitSpec {
        train_idx: sorted(train_idx),
        val_idx: sorted(val_idx),
        test_idx: sorted(test_idx),
        ood_classes: ood.into_iter().collect(),
    })
}

impl SplitSpec {
    pub fn is_ood_class(&self, class: usize) -> bool {
        self.ood_classes.contains(&class)
    }

    /// Checks disjointness and the no-OOD-in-train/val rule against `graph`.
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let n = graph.num_nodes();
        let mut seen = vec![false; n];
        for (name, set) in [("train", &self.train_idx), ("val", &self.val_idx), ("test", &self.test_idx)] {
            for &i in set {
                if i >= n {
                    return Err(Error::Config(format!("{name} index {i} outside graph of {n} nodes")));
                }
                if seen[i] {
                    return Err(Error::Config(format!("node {i} appears in more than one split set")));
                }
                seen[i] = true;
                let label = graph.label(i);
                if label.is_none() {
                    return Err(Error::Config(format!("{name} node {i} is unlabeled")));
                }
                if name != "test" && label.is_some_and(|l| self.is_ood_class(l)) {
                    return Err(Error::Config(format!("{name} node {i} belongs to an OOD class")));
                }
            }
        }
        if let Some(&k) = self.ood_classes.iter().find(|&&k| k >= graph.num_classes()) {
            return Err(Error::Config(format!("ood class {k} outside [0, {})", graph.num_classes())));
        }
        Ok(())
    }

    pub fn class_map(&self, num_classes: usize) -> ClassMap {
        ClassMap::new(num_classes, &self.ood_classes)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Maps original class indices onto the contiguous ID label space the models
/// are trained on. OOD classes have no image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    to_id: Vec<Option<usize>>,
    id_classes: Vec<usize>,
}

impl ClassMap {
    pub fn new(num_classes: usize, ood_classes: &[usize]) -> Self {
        let mut to_id = vec![None; num_classes];
        let mut id_classes = Vec::new();
        for (c, slot) in to_id.iter_mut().enumerate() {
            if !ood_classes.contains(&c) {
                *slot = Some(id_classes.len());
                id_classes.push(c);
            }
        }
        Self { to_id, id_classes }
    }

    /// Number of in-distribution classes, i.e. the model output width.
    pub fn num_id_classes(&self) -> usize {
        self.id_classes.len()
    }

    pub fn to_id(&self, class: usize) -> Option<usize> {
        self.to_id.get(class).copied().flatten()
    }

    pub fn original(&self, id: usize) -> usize {
        self.id_classes[id]
    }

    /// Model-space label of every node: `None` for unlabeled or OOD nodes.
    pub fn id_labels(&self, graph: &Graph) -> Vec<Option<usize>> {
        graph.labels().iter().map(|l| l.and_then(|c| self.to_id(c))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn labeled(counts: &[usize]) -> Graph {
        let labels: Vec<Option<usize>> =
            counts.iter().enumerate().flat_map(|(c, &k)| std::iter::repeat_n(Some(c), k)).collect();
        let n = labels.len();
        Graph::from_edges(Matrix::zeros(n, 1), &[], labels, counts.len()).unwrap().0
    }

    #[test]
    fn loc_split_excludes_ood_from_train() {
        let g = labeled(&[50, 50, 50]);
        let cfg = SplitConfig { ood_classes: vec![2], ..SplitConfig::default() };
        let s = make_loc_split(&g, &cfg, 7).unwrap();
        assert_eq!(s.train_idx.len(), 40);
        assert!(s.train_idx.iter().all(|&i| g.label(i) != Some(2)));
        assert!(s.val_idx.iter().all(|&i| g.label(i) != Some(2)));
        assert_eq!(s.test_idx.len(), 30);
        s.validate(&g).unwrap();
        // the remaining labeled ID nodes all go to validation
        let id_total = 100;
        let id_test = s.test_idx.iter().filter(|&&i| g.label(i) != Some(2)).count();
        assert_eq!(s.val_idx.len(), id_total - 40 - id_test);
    }

    #[test]
    fn no_ood_classes_gives_id_only_test() {
        let g = labeled(&[30, 30]);
        let s = make_loc_split(&g, &SplitConfig::default(), 1).unwrap();
        assert!(s.ood_classes.is_empty());
        assert_eq!(s.train_idx.len(), 40);
        s.validate(&g).unwrap();
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = labeled(&[40, 40, 40]);
        let cfg = SplitConfig { ood_classes: vec![0], ..SplitConfig::default() };
        assert_eq!(make_loc_split(&g, &cfg, 3).unwrap(), make_loc_split(&g, &cfg, 3).unwrap());
        assert_ne!(make_loc_split(&g, &cfg, 3).unwrap(), make_loc_split(&g, &cfg, 4).unwrap());
    }

    #[test]
    fn insufficient_labels_is_an_error() {
        let g = labeled(&[10, 30]);
        let err = make_loc_split(&g, &SplitConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientLabels { class: 0, available: 10, required: 20 }));
    }

    #[test]
    fn class_map_compacts_id_classes() {
        let m = ClassMap::new(4, &[1]);
        assert_eq!(m.num_id_classes(), 3);
        assert_eq!(m.to_id(0), Some(0));
        assert_eq!(m.to_id(1), None);
        assert_eq!(m.to_id(3), Some(2));
        assert_eq!(m.original(1), 2);
    }

    #[test]
    fn split_json_round_trip() {
        let g = labeled(&[25, 25]);
        let s = make_loc_split(&g, &SplitConfig::default(), 2).unwrap();
        assert_eq!(SplitSpec::from_json(&s.to_json().unwrap()).unwrap(), s);
    }
}
