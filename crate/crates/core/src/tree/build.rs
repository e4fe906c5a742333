use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DyadicTree, MeasurePolicy, TreeError, UnaryPolicy, MAX_LEAVES};
use crate::scalar::Real;

/// Leaf weight rule for complete trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "weights")]
pub enum LeafWeights {
    /// Every leaf gets `1 / n`; total mass 1.
    Equal,
    /// Explicit weights in canonical leaf order.
    Listed(Vec<f64>),
    /// Multiplicative cascade: a cube's mass is split among its children in
    /// these fixed proportions. One ratio per child; total mass 1.
    Cascade(Vec<f64>),
}

/// Distribution of raw leaf weights for random trees (normalized to mass 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum WeightLaw {
    Equal,
    Uniform { lo: f64, hi: f64 },
    /// `exp(U(0, ln spread))`, so weights differ by at most a factor `spread`.
    LogUniform { spread: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomTreeParams {
    pub seed: u64,
    pub depth: usize,
    /// Inclusive branching range `[lo, hi]`.
    pub branching: (usize, usize),
    pub weight_law: WeightLaw,
    /// Probability that a cube below level 1 stops early as a leaf.
    #[serde(default)]
    pub early_leaf_prob: f64,
}

/// A family of trees indexed by depth, used by depth sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TreeLaw {
    Uniform {
        branching: usize,
        #[serde(default = "equal_weights")]
        weights: LeafWeights,
    },
    Random {
        seed: u64,
        branching: (usize, usize),
        weight_law: WeightLaw,
        #[serde(default)]
        early_leaf_prob: f64,
    },
}

fn equal_weights() -> LeafWeights {
    LeafWeights::Equal
}

impl TreeLaw {
    pub fn build<T: Real>(&self, depth: usize) -> Result<DyadicTree<T>, TreeError> {
        match self {
            TreeLaw::Uniform { branching, weights } => {
                DyadicTree::build_uniform(depth, *branching, weights)
            }
            TreeLaw::Random {
                seed,
                branching,
                weight_law,
                early_leaf_prob,
            } => DyadicTree::build_random(&RandomTreeParams {
                seed: *seed,
                depth,
                branching: *branching,
                weight_law: weight_law.clone(),
                early_leaf_prob: *early_leaf_prob,
            }),
        }
    }

    /// Leaf count upper bound at `depth`, saturating.
    pub fn max_leaves(&self, depth: usize) -> u128 {
        let b = match self {
            TreeLaw::Uniform { branching, .. } => *branching,
            TreeLaw::Random { branching, .. } => branching.1,
        };
        (b as u128).saturating_pow(depth as u32)
    }
}

fn check_size(branching: usize, depth: usize) -> Result<usize, TreeError> {
    let leaves = (branching as u128).saturating_pow(depth.min(u32::MAX as usize) as u32);
    if leaves > MAX_LEAVES as u128 {
        return Err(TreeError::TooLarge {
            leaves,
            limit: MAX_LEAVES,
        });
    }
    Ok(leaves as usize)
}

/// Children lists of a complete tree, nodes in preorder.
fn complete_children(depth: usize, branching: usize) -> Vec<Vec<usize>> {
    let mut children: Vec<Vec<usize>> = Vec::new();
    fn visit(children: &mut Vec<Vec<usize>>, level: usize, depth: usize, b: usize) -> usize {
        let id = children.len();
        children.push(Vec::new());
        if level < depth {
            for _ in 0..b {
                let c = visit(children, level + 1, depth, b);
                children[id].push(c);
            }
        }
        id
    }
    visit(&mut children, 0, depth, branching);
    children
}

impl<T: Real> DyadicTree<T> {
    /// Complete `branching`-ary tree with `branching^depth` leaves.
    pub fn build_uniform(
        depth: usize,
        branching: usize,
        weights: &LeafWeights,
    ) -> Result<Self, TreeError> {
        if depth < 1 {
            return Err(TreeError::InvalidParameter {
                name: "depth",
                reason: "must be at least 1".into(),
            });
        }
        if branching < 2 {
            return Err(TreeError::InvalidParameter {
                name: "branching",
                reason: "must be at least 2".into(),
            });
        }
        let n = check_size(branching, depth)?;
        let leaf_weights: Vec<T> = match weights {
            LeafWeights::Equal => vec![T::one() / T::from_usize_lossy(n); n],
            LeafWeights::Listed(w) => {
                if w.len() != n {
                    return Err(TreeError::WeightCount {
                        expected: n,
                        got: w.len(),
                    });
                }
                w.iter().map(|&x| T::lit(x)).collect()
            }
            LeafWeights::Cascade(ratios) => {
                if ratios.len() != branching {
                    return Err(TreeError::InvalidParameter {
                        name: "cascade",
                        reason: format!("needs {branching} ratios, got {}", ratios.len()),
                    });
                }
                if let Some(i) = ratios.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(TreeError::NonPositiveWeight {
                        leaf: i,
                        value: ratios[i],
                    });
                }
                let total: f64 = ratios.iter().sum();
                let ratios: Vec<T> = ratios.iter().map(|&r| T::lit(r / total)).collect();
                (0..n)
                    .map(|leaf| {
                        let mut w = T::one();
                        let mut rest = leaf;
                        for _ in 0..depth {
                            w = w * ratios[rest % branching];
                            rest /= branching;
                        }
                        w
                    })
                    .collect()
            }
        };
        Self::assemble(
            &complete_children(depth, branching),
            &leaf_weights,
            None,
            UnaryPolicy::Collapse,
            MeasurePolicy::Verify,
        )
    }

    /// Seeded random tree with variable branching; deterministic per seed.
    pub fn build_random(params: &RandomTreeParams) -> Result<Self, TreeError> {
        let (lo, hi) = params.branching;
        if lo < 2 || hi < lo {
            return Err(TreeError::EmptyBranchingRange { lo, hi });
        }
        if params.depth < 1 {
            return Err(TreeError::InvalidParameter {
                name: "depth",
                reason: "must be at least 1".into(),
            });
        }
        if !(0.0..1.0).contains(&params.early_leaf_prob) {
            return Err(TreeError::InvalidParameter {
                name: "early_leaf_prob",
                reason: "must lie in [0, 1)".into(),
            });
        }
        check_size(hi, params.depth)?;
        match params.weight_law {
            WeightLaw::Uniform { lo, hi } if !(lo > 0.0 && hi >= lo && hi.is_finite()) => {
                return Err(TreeError::InvalidParameter {
                    name: "weight_law",
                    reason: format!("uniform weights need 0 < lo <= hi, got [{lo}, {hi}]"),
                });
            }
            WeightLaw::LogUniform { spread } if !(spread >= 1.0 && spread.is_finite()) => {
                return Err(TreeError::InvalidParameter {
                    name: "weight_law",
                    reason: format!("log-uniform spread must be >= 1, got {spread}"),
                });
            }
            _ => {}
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        // (node, level) in preorder
        let mut stack = vec![(0usize, 0usize)];
        let mut leaves = 0usize;
        while let Some((v, level)) = stack.pop() {
            let stop = level >= params.depth
                || (level >= 1
                    && params.early_leaf_prob > 0.0
                    && rng.random::<f64>() < params.early_leaf_prob);
            if stop {
                leaves += 1;
                continue;
            }
            let b = rng.random_range(lo..=hi);
            let first = children.len();
            for k in 0..b {
                children.push(Vec::new());
                children[v].push(first + k);
            }
            for k in (0..b).rev() {
                stack.push((first + k, level + 1));
            }
        }
        let raw: Vec<f64> = (0..leaves)
            .map(|_| match params.weight_law {
                WeightLaw::Equal => 1.0,
                WeightLaw::Uniform { lo, hi } => {
                    if hi > lo {
                        rng.random_range(lo..hi)
                    } else {
                        lo
                    }
                }
                WeightLaw::LogUniform { spread } => {
                    (rng.random::<f64>() * spread.ln()).exp()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<T> = raw.iter().map(|&w| T::lit(w / total)).collect();
        Self::assemble(
            &children,
            &weights,
            None,
            UnaryPolicy::Collapse,
            MeasurePolicy::Verify,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::verify_dyadic;

    fn params(seed: u64) -> RandomTreeParams {
        RandomTreeParams {
            seed,
            depth: 4,
            branching: (2, 3),
            weight_law: WeightLaw::LogUniform { spread: 8.0 },
            early_leaf_prob: 0.0,
        }
    }

    #[test]
    fn random_is_deterministic() {
        let a = DyadicTree::<f64>::build_random(&params(7)).unwrap();
        let b = DyadicTree::<f64>::build_random(&params(7)).unwrap();
        assert_eq!(a, b);
        assert!(verify_dyadic(&a).passed);
    }

    #[test]
    fn different_seeds_differ_in_a_measure() {
        let a = DyadicTree::<f64>::build_random(&params(7)).unwrap();
        let b = DyadicTree::<f64>::build_random(&params(8)).unwrap();
        let ma: Vec<f64> = a.cubes().iter().map(|c| c.measure).collect();
        let mb: Vec<f64> = b.cubes().iter().map(|c| c.measure).collect();
        assert_ne!(ma, mb);
    }

    #[test]
    fn depth_one_binary_range() {
        for seed in 0..5 {
            let t = DyadicTree::<f64>::build_random(&RandomTreeParams {
                seed,
                depth: 1,
                branching: (2, 2),
                weight_law: WeightLaw::Uniform { lo: 1.0, hi: 2.0 },
                early_leaf_prob: 0.0,
            })
            .unwrap();
            assert_eq!(t.n_leaves(), 2);
            assert!(verify_dyadic(&t).passed);
        }
    }

    #[test]
    fn empty_branching_range_is_rejected() {
        let mut p = params(1);
        p.branching = (3, 2);
        assert!(matches!(
            DyadicTree::<f64>::build_random(&p),
            Err(TreeError::EmptyBranchingRange { .. })
        ));
    }

    #[test]
    fn early_leaves_keep_invariants() {
        let mut p = params(3);
        p.depth = 6;
        p.early_leaf_prob = 0.3;
        let t = DyadicTree::<f64>::build_random(&p).unwrap();
        assert!(verify_dyadic(&t).passed);
        assert!(t.cubes().iter().any(|c| c.is_leaf() && c.level < 6));
    }

    #[test]
    fn cascade_is_self_similar() {
        let t = DyadicTree::<f64>::build_uniform(4, 2, &LeafWeights::Cascade(vec![1.0, 3.0]))
            .unwrap();
        for q in t.internal_cubes() {
            let c = t.cube(q);
            let r = t.measure(c.children[0]) / c.measure;
            assert!((r - 0.25).abs() < 1e-14);
        }
        assert!((t.total_measure() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oversized_trees_are_rejected() {
        assert!(matches!(
            DyadicTree::<f64>::build_uniform(25, 2, &LeafWeights::Equal),
            Err(TreeError::TooLarge { .. })
        ));
    }
}
