//! Finite dyadic families stored as rooted weighted trees.
//!
//! Cubes are numbered in depth-first preorder with children kept in their
//! stored order, so the root is always `CubeId(0)`, every parent precedes its
//! children, and the leaves of any cube form a contiguous range of leaf
//! indices. Measures are purely atomic on the leaves and every cube measure is
//! the sum of the leaf weights below it.

mod build;
mod file;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use build::{LeafWeights, RandomTreeParams, TreeLaw, WeightLaw};
pub use file::{load_tree, save_tree, LoadOptions, MeasurePolicy, TreeFile, UnaryPolicy};

/// Largest leaf count accepted anywhere in the crate.
pub const MAX_LEAVES: usize = 1 << 24;

/// Relative tolerance for measure additivity.
pub const ADDITIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("leaf weight {value} at leaf {leaf} is not a positive finite number")]
    NonPositiveWeight { leaf: usize, value: f64 },
    #[error("expected {expected} leaf weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("tree would have {leaves} leaves, the limit is {limit}")]
    TooLarge { leaves: u128, limit: usize },
    #[error("branching range [{lo}, {hi}] is empty or below 2")]
    EmptyBranchingRange { lo: usize, hi: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("malformed tree structure: {0}")]
    Structure(String),
    #[error("measure of cube {child} exceeds the measure of its parent {parent}")]
    ChildExceedsParent { parent: CubeId, child: CubeId },
    #[error("additivity violated at cube {cube}: measure {measure}, children sum to {children_sum}")]
    Additivity {
        cube: CubeId,
        measure: f64,
        children_sum: f64,
    },
    #[error("cube {0} has a single child (unary chain) and strict mode rejects it")]
    UnaryChain(CubeId),
    #[error("leaf index {index} out of range for a tree with {leaves} leaves")]
    InvalidLeaf { index: usize, leaves: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Index of a cube inside its owning [`DyadicTree`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CubeId(pub usize);

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cube<T> {
    pub parent: Option<CubeId>,
    pub children: Vec<CubeId>,
    pub level: usize,
    pub measure: T,
    pub leaf_span: Range<usize>,
    /// Position among the parent's children (0 for the root).
    pub position: usize,
}

impl<T> Cube<T> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicTree<T> {
    cubes: Vec<Cube<T>>,
    leaf_measures: Vec<T>,
    leaf_cubes: Vec<CubeId>,
    depth: usize,
}

/// Structural constants of a normalized tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeStats<T> {
    /// Maximum number of children over internal cubes.
    pub max_children: usize,
    /// `max mu(Q) / mu(Q')` over internal `Q` and children `Q'`.
    pub dyadic_doubling: T,
    /// `min mu(Q) / mu(Q') - 1` over internal `Q` and children `Q'`.
    pub growth_eps: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralCheck {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicReport<T> {
    pub stats: TreeStats<T>,
    pub checks: Vec<StructuralCheck>,
    pub passed: bool,
}

impl<T: Real> DyadicTree<T> {
    pub fn cubes(&self) -> &[Cube<T>] {
        &self.cubes
    }

    pub fn cube(&self, id: CubeId) -> &Cube<T> {
        &self.cubes[id.0]
    }

    pub fn root(&self) -> CubeId {
        CubeId(0)
    }

    pub fn n_cubes(&self) -> usize {
        self.cubes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_measures.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn measure(&self, id: CubeId) -> T {
        self.cubes[id.0].measure
    }

    pub fn total_measure(&self) -> T {
        self.cubes[0].measure
    }

    pub fn leaf_measures(&self) -> &[T] {
        &self.leaf_measures
    }

    /// Cube that represents leaf `leaf`.
    pub fn leaf_cube(&self, leaf: usize) -> CubeId {
        self.leaf_cubes[leaf]
    }

    pub fn check_leaf(&self, leaf: usize) -> Result<(), TreeError> {
        if leaf < self.n_leaves() {
            Ok(())
        } else {
            Err(TreeError::InvalidLeaf {
                index: leaf,
                leaves: self.n_leaves(),
            })
        }
    }

    /// Cubes with at least one child, in preorder. After normalization this
    /// is exactly the reduced family of branching cubes.
    pub fn internal_cubes(&self) -> impl Iterator<Item = CubeId> + '_ {
        self.cubes
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_leaf())
            .map(|(i, _)| CubeId(i))
    }

    /// Chain of cubes containing `leaf`, from the leaf cube up to the root.
    pub fn ancestors(&self, leaf: usize) -> Ancestors<'_, T> {
        Ancestors {
            tree: self,
            next: Some(self.leaf_cubes[leaf]),
        }
    }

    pub fn contains(&self, cube: CubeId, leaf: usize) -> bool {
        self.cubes[cube.0].leaf_span.contains(&leaf)
    }

    /// Position of the child of `cube` whose span contains `leaf`.
    pub fn child_position(&self, cube: CubeId, leaf: usize) -> Option<usize> {
        let c = &self.cubes[cube.0];
        if c.is_leaf() || !c.leaf_span.contains(&leaf) {
            return None;
        }
        let pos = c
            .children
            .partition_point(|ch| self.cubes[ch.0].leaf_span.end <= leaf);
        Some(pos)
    }

    /// Whether some child of `cube` has children of its own.
    pub fn has_grandchildren(&self, cube: CubeId) -> bool {
        self.cubes[cube.0]
            .children
            .iter()
            .any(|ch| !self.cubes[ch.0].is_leaf())
    }

    /// Smallest positive distance between distinct leaves.
    pub fn resolution(&self) -> T {
        self.internal_cubes()
            .map(|q| self.measure(q))
            .fold(T::infinity(), T::min)
    }

    pub fn stats(&self) -> TreeStats<T> {
        let mut max_children = 0;
        let mut doubling = T::one();
        let mut min_ratio = T::infinity();
        for q in self.internal_cubes() {
            let cube = self.cube(q);
            max_children = max_children.max(cube.children.len());
            for &child in &cube.children {
                let ratio = cube.measure / self.measure(child);
                if ratio > doubling {
                    doubling = ratio;
                }
                if ratio < min_ratio {
                    min_ratio = ratio;
                }
            }
        }
        TreeStats {
            max_children,
            dyadic_doubling: doubling,
            growth_eps: min_ratio - T::one(),
        }
    }

    /// Raw constructor used by the builders and the file loader.
    ///
    /// `children` describes an arbitrary rooted tree (node 0 is the root);
    /// `explicit` optionally overrides the bottom-up measures.
    pub(crate) fn assemble(
        children: &[Vec<usize>],
        leaf_weights: &[T],
        explicit: Option<&[T]>,
        unary: UnaryPolicy,
        measures: MeasurePolicy,
    ) -> Result<Self, TreeError> {
        let nodes = children.len();
        if nodes == 0 {
            return Err(TreeError::Structure("empty tree".into()));
        }
        let order = preorder(children)?;
        let raw_leaves: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&v| children[v].is_empty())
            .collect();
        if raw_leaves.len() > MAX_LEAVES {
            return Err(TreeError::TooLarge {
                leaves: raw_leaves.len() as u128,
                limit: MAX_LEAVES,
            });
        }
        if raw_leaves.len() != leaf_weights.len() {
            return Err(TreeError::WeightCount {
                expected: raw_leaves.len(),
                got: leaf_weights.len(),
            });
        }
        if raw_leaves.len() < 2 {
            return Err(TreeError::Structure(
                "a dyadic tree needs at least two leaves".into(),
            ));
        }
        for (leaf, &w) in leaf_weights.iter().enumerate() {
            if !(w > T::zero() && w.is_finite()) {
                return Err(TreeError::NonPositiveWeight {
                    leaf,
                    value: w.as_f64(),
                });
            }
        }

        // Bottom-up sums over the raw structure.
        let mut sums = vec![T::zero(); nodes];
        let mut leaf_of = vec![usize::MAX; nodes];
        for (i, &v) in raw_leaves.iter().enumerate() {
            leaf_of[v] = i;
        }
        for &v in order.iter().rev() {
            sums[v] = if children[v].is_empty() {
                leaf_weights[leaf_of[v]]
            } else {
                children[v].iter().map(|&c| sums[c]).sum()
            };
        }

        if let Some(explicit) = explicit {
            if explicit.len() != nodes {
                return Err(TreeError::Structure(format!(
                    "expected {nodes} explicit measures, got {}",
                    explicit.len()
                )));
            }
            for (v, &m) in explicit.iter().enumerate() {
                if !(m > T::zero() && m.is_finite()) {
                    return Err(TreeError::Structure(format!(
                        "measure of cube #{v} is not a positive finite number"
                    )));
                }
            }
            if measures == MeasurePolicy::Verify {
                verify_explicit(children, &order, &leaf_of, leaf_weights, explicit)?;
            }
        }

        if unary == UnaryPolicy::Reject {
            if let Some(&v) = order.iter().find(|&&v| children[v].len() == 1) {
                return Err(TreeError::UnaryChain(CubeId(v)));
            }
        }

        let measure_of = |v: usize| explicit.map_or(sums[v], |e| e[v]);

        // Collapse unary chains while renumbering in preorder.
        let mut cubes: Vec<Cube<T>> = Vec::with_capacity(nodes);
        let mut leaf_cubes = Vec::with_capacity(raw_leaves.len());
        let mut leaf_measures = Vec::with_capacity(raw_leaves.len());
        // (raw node, parent id, position)
        let mut stack: Vec<(usize, Option<CubeId>, usize)> = vec![(0, None, 0)];
        while let Some((raw, parent, position)) = stack.pop() {
            let measure = measure_of(raw);
            let mut target = raw;
            while children[target].len() == 1 {
                target = children[target][0];
            }
            let id = CubeId(cubes.len());
            let level = parent.map_or(0, |p| cubes[p.0].level + 1);
            let start = leaf_cubes.len();
            if children[target].is_empty() {
                leaf_cubes.push(id);
                leaf_measures.push(leaf_weights[leaf_of[target]]);
            }
            if let Some(p) = parent {
                cubes[p.0].children.push(id);
            }
            cubes.push(Cube {
                parent,
                children: Vec::with_capacity(children[target].len()),
                level,
                measure,
                leaf_span: start..start,
                position,
            });
            for (pos, &c) in children[target].iter().enumerate().rev() {
                stack.push((c, Some(id), pos));
            }
        }
        // Children of a preorder-numbered tree have larger ids, so a reverse
        // sweep closes every span after its children.
        for i in (0..cubes.len()).rev() {
            let end = match cubes[i].children.last() {
                Some(last) => cubes[last.0].leaf_span.end,
                None => cubes[i].leaf_span.start + 1,
            };
            cubes[i].leaf_span.end = end;
        }
        let depth = cubes.iter().map(|c| c.level).max().unwrap_or(0);
        Ok(Self {
            cubes,
            leaf_measures,
            leaf_cubes,
            depth,
        })
    }

    /// Preorder child counts, the `structure` field of the tree file format.
    pub fn child_counts(&self) -> Vec<usize> {
        self.cubes.iter().map(|c| c.children.len()).collect()
    }

    /// Same tree with every cube measure replaced. Only meant for building
    /// negative-control fixtures; the result is checked by [`verify_dyadic`].
    pub fn with_measures_unchecked(&self, measures: &[T]) -> Self {
        let mut out = self.clone();
        for (c, &m) in out.cubes.iter_mut().zip(measures) {
            c.measure = m;
        }
        out
    }
}

fn preorder(children: &[Vec<usize>]) -> Result<Vec<usize>, TreeError> {
    let n = children.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        if v >= n || seen[v] {
            return Err(TreeError::Structure(format!(
                "node {v} is out of range or reached twice"
            )));
        }
        seen[v] = true;
        order.push(v);
        stack.extend(children[v].iter().rev());
    }
    if order.len() != n {
        return Err(TreeError::Structure(format!(
            "{} nodes are unreachable from the root",
            n - order.len()
        )));
    }
    Ok(order)
}

fn verify_explicit<T: Real>(
    children: &[Vec<usize>],
    order: &[usize],
    leaf_of: &[usize],
    leaf_weights: &[T],
    explicit: &[T],
) -> Result<(), TreeError> {
    let tol = T::lit(ADDITIVITY_TOL);
    for &v in order {
        let m = explicit[v];
        if children[v].is_empty() {
            let w = leaf_weights[leaf_of[v]];
            if (m - w).abs() > tol * w {
                return Err(TreeError::Additivity {
                    cube: CubeId(v),
                    measure: m.as_f64(),
                    children_sum: w.as_f64(),
                });
            }
            continue;
        }
        if let Some(&c) = children[v].iter().find(|&&c| explicit[c] > m) {
            return Err(TreeError::ChildExceedsParent {
                parent: CubeId(v),
                child: CubeId(c),
            });
        }
        let sum: T = children[v].iter().map(|&c| explicit[c]).sum();
        if (m - sum).abs() > tol * m {
            return Err(TreeError::Additivity {
                cube: CubeId(v),
                measure: m.as_f64(),
                children_sum: sum.as_f64(),
            });
        }
    }
    Ok(())
}

pub struct Ancestors<'a, T> {
    tree: &'a DyadicTree<T>,
    next: Option<CubeId>,
}

impl<T> Iterator for Ancestors<'_, T> {
    type Item = CubeId;

    fn next(&mut self) -> Option<CubeId> {
        let cur = self.next?;
        self.next = self.tree.cubes[cur.0].parent;
        Some(cur)
    }
}

/// Checks the finite analogues of the dyadic-family axioms and reports the
/// structural constants. Failures are reported, never raised.
pub fn verify_dyadic<T: Real>(tree: &DyadicTree<T>) -> DyadicReport<T> {
    let cubes = tree.cubes();
    let n = tree.n_leaves();
    let mut checks = Vec::new();
    let mut push = |name: &str, failure: Option<String>| {
        checks.push(StructuralCheck {
            name: name.to_string(),
            passed: failure.is_none(),
            detail: failure,
        })
    };

    let roots: Vec<usize> = (0..cubes.len())
        .filter(|&i| cubes[i].parent.is_none())
        .collect();
    push(
        "single_root",
        (roots != [0]).then(|| format!("parentless cubes: {roots:?}")),
    );

    let bad_level = cubes.iter().enumerate().find_map(|(i, c)| {
        let p = c.parent?;
        (c.level != cubes[p.0].level + 1).then_some(i)
    });
    push(
        "levels",
        bad_level.map(|i| format!("cube #{i} is not one level below its parent")),
    );

    // (d.1)/(d.2): each level together with shallower leaves tiles the leaves.
    let mut partition_failure = None;
    for j in 0..=tree.depth() {
        let mut spans: Vec<Range<usize>> = cubes
            .iter()
            .filter(|c| c.level == j || (c.level < j && c.is_leaf()))
            .map(|c| c.leaf_span.clone())
            .collect();
        spans.sort_by_key(|s| s.start);
        let mut cursor = 0;
        for s in &spans {
            if s.start != cursor || s.end <= s.start {
                partition_failure = Some(format!("level {j} does not tile leaves at {cursor}"));
                break;
            }
            cursor = s.end;
        }
        if partition_failure.is_none() && cursor != n {
            partition_failure = Some(format!("level {j} covers {cursor} of {n} leaves"));
        }
        if partition_failure.is_some() {
            break;
        }
    }
    push("partition", partition_failure);

    // (d.3)/(d.4): children partition the parent's span in order.
    let nesting = cubes.iter().enumerate().find_map(|(i, c)| {
        if c.is_leaf() {
            return (c.leaf_span.len() != 1).then_some(i);
        }
        let mut cursor = c.leaf_span.start;
        for ch in &c.children {
            let s = &cubes[ch.0].leaf_span;
            if s.start != cursor {
                return Some(i);
            }
            cursor = s.end;
        }
        (cursor != c.leaf_span.end).then_some(i)
    });
    push(
        "nesting",
        nesting.map(|i| format!("children of cube #{i} do not partition its leaves")),
    );

    let positive = cubes
        .iter()
        .position(|c| !(c.measure > T::zero() && c.measure.is_finite()));
    push(
        "positive_measures",
        positive.map(|i| format!("cube #{i} has a nonpositive measure")),
    );

    let tol = T::lit(ADDITIVITY_TOL);
    let additivity = cubes.iter().enumerate().find_map(|(i, c)| {
        let expected = if c.is_leaf() {
            tree.leaf_measures()[c.leaf_span.start]
        } else {
            c.children.iter().map(|ch| cubes[ch.0].measure).sum()
        };
        ((c.measure - expected).abs() > tol * c.measure.abs()).then(|| {
            format!(
                "cube #{i}: measure {} but children sum to {}",
                c.measure, expected
            )
        })
    });
    push("additivity", additivity);

    let unary = cubes.iter().position(|c| c.children.len() == 1);
    push(
        "branching",
        unary.map(|i| format!("cube #{i} has exactly one child")),
    );

    let stats = tree.stats();
    push(
        "growth",
        (stats.growth_eps.is_nan() || stats.growth_eps <= T::zero()).then(|| {
            format!(
                "growth constant {} is not positive (some child carries its parent's full measure)",
                stats.growth_eps
            )
        }),
    );

    let passed = checks.iter().all(|c| c.passed);
    DyadicReport {
        stats,
        checks,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(depth: usize, branching: usize) -> DyadicTree<f64> {
        DyadicTree::<f64>::build_uniform(depth, branching, &LeafWeights::Equal).unwrap()
    }

    #[test]
    fn uniform_binary_depth_three_measures() {
        let t = uniform(3, 2);
        assert_eq!(t.n_leaves(), 8);
        assert_eq!(t.depth(), 3);
        let level1: Vec<f64> = t
            .cubes()
            .iter()
            .filter(|c| c.level == 1)
            .map(|c| c.measure)
            .collect();
        assert_eq!(level1, vec![0.5, 0.5]);
        assert!(t
            .cubes()
            .iter()
            .filter(|c| c.level == 2)
            .all(|c| c.measure == 0.25));
    }

    #[test]
    fn ternary_single_level() {
        let t = uniform(1, 3);
        assert_eq!(t.cube(t.root()).children.len(), 3);
        for &c in &t.cube(t.root()).children {
            assert!((t.measure(c) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn listed_weights_force_level_one_measures() {
        let w = [1.0, 1.0, 2.0, 4.0].map(|x| x / 8.0).to_vec();
        let t = DyadicTree::<f64>::build_uniform(2, 2, &LeafWeights::Listed(w)).unwrap();
        let kids = &t.cube(t.root()).children;
        assert_eq!(t.measure(kids[0]), 0.25);
        assert_eq!(t.measure(kids[1]), 0.75);
    }

    #[test]
    fn weight_errors() {
        let err = DyadicTree::<f64>::build_uniform(2, 2, &LeafWeights::Listed(vec![1.0; 3]));
        assert!(matches!(err, Err(TreeError::WeightCount { expected: 4, got: 3 })));
        let err = DyadicTree::<f64>::build_uniform(
            1,
            2,
            &LeafWeights::Listed(vec![1.0, -1.0]),
        );
        assert!(matches!(err, Err(TreeError::NonPositiveWeight { leaf: 1, .. })));
    }

    #[test]
    fn verify_uniform_stats() {
        let r = verify_dyadic(&uniform(3, 2));
        assert!(r.passed, "{:?}", r.checks);
        assert_eq!(r.stats.max_children, 2);
        assert_eq!(r.stats.dyadic_doubling, 2.0);
        assert_eq!(r.stats.growth_eps, 1.0);

        let r = verify_dyadic(&uniform(2, 3));
        assert!(r.passed);
        assert_eq!(r.stats.max_children, 3);
        assert!((r.stats.dyadic_doubling - 3.0).abs() < 1e-12);
        assert!((r.stats.growth_eps - 2.0).abs() < 1e-12);
    }

    #[test]
    fn verify_weighted_binary_stats() {
        let t = DyadicTree::<f64>::build_uniform(1, 2, &LeafWeights::Listed(vec![0.25, 0.75])).unwrap();
        let r = verify_dyadic(&t);
        assert!(r.passed);
        // ratios 1/(1/4) = 4 and 1/(3/4) = 4/3
        assert!((r.stats.dyadic_doubling - 4.0).abs() < 1e-15);
        assert!((r.stats.growth_eps - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn corrupted_measures_fail_additivity() {
        let t = uniform(2, 2);
        let mut m: Vec<f64> = t.cubes().iter().map(|c| c.measure).collect();
        m[1] = 0.9;
        let bad = t.with_measures_unchecked(&m);
        let r = verify_dyadic(&bad);
        assert!(!r.passed);
        let failed: Vec<&str> = r
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        assert!(failed.contains(&"additivity"));
    }

    #[test]
    fn unary_chain_collapses() {
        // A -> B -> {C, D}
        let children = vec![vec![1], vec![2, 3], vec![], vec![]];
        let t = DyadicTree::<f64>::assemble(
            &children,
            &[0.5, 0.5],
            None,
            UnaryPolicy::Collapse,
            MeasurePolicy::Verify,
        )
        .unwrap();
        assert_eq!(t.n_cubes(), 3);
        assert_eq!(t.cube(t.root()).children, vec![CubeId(1), CubeId(2)]);
        assert_eq!(t.total_measure(), 1.0);
        assert_eq!(t.depth(), 1);

        let err = DyadicTree::<f64>::assemble(
            &children,
            &[0.5, 0.5],
            None,
            UnaryPolicy::Reject,
            MeasurePolicy::Verify,
        );
        assert!(matches!(err, Err(TreeError::UnaryChain(CubeId(0)))));
    }

    #[test]
    fn child_position_and_ancestors() {
        let t = uniform(3, 2);
        let chain: Vec<usize> = t.ancestors(5).map(|c| t.cube(c).level).collect();
        assert_eq!(chain, vec![3, 2, 1, 0]);
        assert_eq!(t.child_position(t.root(), 3), Some(0));
        assert_eq!(t.child_position(t.root(), 4), Some(1));
        assert_eq!(t.child_position(t.leaf_cube(0), 0), None);
    }
}
