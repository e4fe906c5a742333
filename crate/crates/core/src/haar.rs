//! Haar systems on weighted trees of arbitrary branching.
//!
//! Every branching cube `Q` with `m` children carries `m - 1` functions that
//! are constant on each child, vanish off `Q`, integrate to zero and, together
//! with `chi_Q / mu(Q)^(1/2)`, form an orthonormal basis of the functions on
//! `Q` that are constant on the children. Binary cubes always get the
//! classical two-valued function, positive on the first child. Wider cubes get
//! a weighted Helmert basis rotated by a seeded random orthogonal matrix, which
//! is redrawn until no child value is small relative to the largest one.
//!
//! Functions are numbered cube by cube in preorder; that index is the key of
//! every coefficient vector in the crate.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function::LeafFunction;
use crate::scalar::{fmax, Real};
use crate::tree::{CubeId, DyadicTree};

#[derive(Debug, Error)]
pub enum HaarError {
    #[error("cube {cube} has {children} children; the classical-binary strategy needs exactly 2")]
    NonBinaryCube { cube: CubeId, children: usize },
    #[error("cube {cube}: no rotation reached the nonvanishing tolerance in {attempts} attempts (best {best})")]
    RetryBudgetExhausted {
        cube: CubeId,
        attempts: usize,
        best: f64,
    },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("the Haar system was built for a different tree")]
    TreeMismatch,
    #[error("nonvanishing tolerance must lie in [0, 1), got {0}")]
    InvalidTolerance(f64),
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaarStrategy {
    /// Binary trees only.
    ClassicalBinary,
    /// Classical functions on binary cubes, rotated Helmert bases elsewhere.
    #[default]
    RotatedHelmert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarParams {
    #[serde(default)]
    pub strategy: HaarStrategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub nonvanish_tol: f64,
    #[serde(default = "default_budget")]
    pub retry_budget: usize,
}

fn default_tol() -> f64 {
    1e-3
}

fn default_budget() -> usize {
    64
}

impl Default for HaarParams {
    fn default() -> Self {
        Self {
            strategy: HaarStrategy::default(),
            seed: 0,
            nonvanish_tol: default_tol(),
            retry_budget: default_budget(),
        }
    }
}

/// A single Haar function: constant `child_values[k]` on the `k`-th child of
/// `cube`, zero outside `cube`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarFunction<T> {
    pub cube: CubeId,
    pub index: usize,
    pub child_values: Vec<T>,
}

impl<T: Real> HaarFunction<T> {
    /// `min |value| / max |value|` over the children.
    pub fn comparability(&self) -> T {
        let (lo, hi) = self
            .child_values
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
        lo / hi
    }
}

/// Coefficients of a leaf function in the basis `{scaling} U H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients<T> {
    pub scaling: T,
    pub detail: Vec<T>,
}

impl<T: Real> Coefficients<T> {
    pub fn zeros(n_functions: usize) -> Self {
        Self {
            scaling: T::zero(),
            detail: vec![T::zero(); n_functions],
        }
    }

    pub fn sum_of_squares(&self) -> T {
        self.scaling * self.scaling + self.detail.iter().map(|&c| c * c).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HaarSystem<T> {
    functions: Vec<HaarFunction<T>>,
    by_cube: Vec<Range<usize>>,
    /// Value of `chi_X / mu(X)^(1/2)`.
    scaling: T,
    n_leaves: usize,
    params: HaarParams,
}

/// Serializable snapshot for cross-implementation comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarExport<T> {
    pub params: HaarParams,
    pub scaling: T,
    pub functions: Vec<HaarFunction<T>>,
}

impl<T: Real> HaarSystem<T> {
    pub fn build(tree: &DyadicTree<T>, params: &HaarParams) -> Result<Self, HaarError> {
        if !(0.0..1.0).contains(&params.nonvanish_tol) {
            return Err(HaarError::InvalidTolerance(params.nonvanish_tol));
        }
        let mut functions = Vec::with_capacity(tree.n_leaves());
        let mut by_cube = Vec::with_capacity(tree.n_cubes());
        for (i, cube) in tree.cubes().iter().enumerate() {
            let start = functions.len();
            let id = CubeId(i);
            let weights: Vec<T> = cube.children.iter().map(|&c| tree.measure(c)).collect();
            let columns = match weights.len() {
                0 => Vec::new(),
                1 => {
                    return Err(HaarError::NonBinaryCube {
                        cube: id,
                        children: 1,
                    })
                }
                2 => helmert(&weights),
                m => {
                    if params.strategy == HaarStrategy::ClassicalBinary {
                        return Err(HaarError::NonBinaryCube {
                            cube: id,
                            children: m,
                        });
                    }
                    rotated_helmert(id, &weights, params)?
                }
            };
            functions.extend(
                columns
                    .into_iter()
                    .enumerate()
                    .map(|(index, child_values)| HaarFunction {
                        cube: id,
                        index,
                        child_values,
                    }),
            );
            by_cube.push(start..functions.len());
        }
        Ok(Self {
            functions,
            by_cube,
            scaling: T::one() / tree.total_measure().sqrt(),
            n_leaves: tree.n_leaves(),
            params: params.clone(),
        })
    }

    pub fn functions(&self) -> &[HaarFunction<T>] {
        &self.functions
    }

    pub fn function(&self, h: usize) -> &HaarFunction<T> {
        &self.functions[h]
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn params(&self) -> &HaarParams {
        &self.params
    }

    /// Indices of the functions living on `cube`.
    pub fn range_for(&self, cube: CubeId) -> Range<usize> {
        self.by_cube[cube.0].clone()
    }

    pub fn for_cube(&self, cube: CubeId) -> &[HaarFunction<T>] {
        &self.functions[self.by_cube[cube.0].clone()]
    }

    pub fn scaling_value(&self) -> T {
        self.scaling
    }

    pub fn check_tree(&self, tree: &DyadicTree<T>) -> Result<(), HaarError> {
        if tree.n_leaves() == self.n_leaves && tree.n_cubes() == self.by_cube.len() {
            Ok(())
        } else {
            Err(HaarError::TreeMismatch)
        }
    }

    fn check_len(&self, len: usize) -> Result<(), HaarError> {
        if len == self.n_leaves {
            Ok(())
        } else {
            Err(HaarError::LengthMismatch {
                expected: self.n_leaves,
                got: len,
            })
        }
    }

    /// `h(x)`, zero off the cube of `h`.
    pub fn value(&self, tree: &DyadicTree<T>, h: usize, leaf: usize) -> T {
        let f = &self.functions[h];
        tree.child_position(f.cube, leaf)
            .map_or(T::zero(), |p| f.child_values[p])
    }

    pub fn to_leaf_function(&self, tree: &DyadicTree<T>, h: usize) -> LeafFunction<T> {
        let mut out = LeafFunction::zeros(tree.n_leaves());
        self.fill_values(tree, h, T::one(), &mut out.values);
        out
    }

    /// `out[x] += scale * h(x)` on the support of `h`.
    pub(crate) fn fill_values(&self, tree: &DyadicTree<T>, h: usize, scale: T, out: &mut [T]) {
        let f = &self.functions[h];
        for (&child, &v) in tree.cube(f.cube).children.iter().zip(&f.child_values) {
            for x in tree.cube(child).leaf_span.clone() {
                out[x] = out[x] + scale * v;
            }
        }
    }

    pub fn scaling_function(&self) -> LeafFunction<T> {
        LeafFunction::constant(self.n_leaves, self.scaling)
    }

    /// `<f, h>` for every `h`, plus the scaling coefficient, computed from
    /// bottom-up cube integrals in `O(n M)`.
    pub fn analyze(
        &self,
        tree: &DyadicTree<T>,
        f: &LeafFunction<T>,
    ) -> Result<Coefficients<T>, HaarError> {
        self.check_tree(tree)?;
        self.check_len(f.len())?;
        let integrals = cube_integrals(tree, &f.values);
        let detail = self
            .functions
            .iter()
            .map(|h| {
                tree.cube(h.cube)
                    .children
                    .iter()
                    .zip(&h.child_values)
                    .map(|(&c, &v)| v * integrals[c.0])
                    .sum()
            })
            .collect();
        Ok(Coefficients {
            scaling: integrals[0] * self.scaling,
            detail,
        })
    }

    /// Top-down accumulation; inverse of [`HaarSystem::analyze`].
    pub fn synthesize(
        &self,
        tree: &DyadicTree<T>,
        coeffs: &Coefficients<T>,
    ) -> Result<LeafFunction<T>, HaarError> {
        self.check_tree(tree)?;
        if coeffs.detail.len() != self.functions.len() {
            return Err(HaarError::LengthMismatch {
                expected: self.functions.len(),
                got: coeffs.detail.len(),
            });
        }
        let mut acc = vec![T::zero(); tree.n_cubes()];
        acc[0] = coeffs.scaling * self.scaling;
        let mut out = LeafFunction::zeros(tree.n_leaves());
        for (i, cube) in tree.cubes().iter().enumerate() {
            if cube.is_leaf() {
                out.values[cube.leaf_span.start] = acc[i];
                continue;
            }
            let range = self.by_cube[i].clone();
            for (pos, &child) in cube.children.iter().enumerate() {
                let mut v = acc[i];
                for h in range.clone() {
                    v = v + coeffs.detail[h] * self.functions[h].child_values[pos];
                }
                acc[child.0] = v;
            }
        }
        Ok(out)
    }

    pub fn export(&self) -> HaarExport<T> {
        HaarExport {
            params: self.params.clone(),
            scaling: self.scaling,
            functions: self.functions.clone(),
        }
    }
}

/// `integral of f over Q` for every cube, children summed in stored order.
pub(crate) fn cube_integrals<T: Real>(tree: &DyadicTree<T>, values: &[T]) -> Vec<T> {
    let mut integrals = vec![T::zero(); tree.n_cubes()];
    for (i, cube) in tree.cubes().iter().enumerate().rev() {
        integrals[i] = if cube.is_leaf() {
            let x = cube.leaf_span.start;
            values[x] * tree.leaf_measures()[x]
        } else {
            cube.children.iter().map(|c| integrals[c.0]).sum()
        };
    }
    integrals
}

/// Weighted Helmert basis of the mean-zero vectors on `weights.len()` children.
/// Column `k` is `c` on children `0..=k`, `-c S_k / w_{k+1}` on child `k + 1`
/// and zero afterwards, where `S_k` is the mass of the first `k + 1` children.
fn helmert<T: Real>(weights: &[T]) -> Vec<Vec<T>> {
    let m = weights.len();
    let mut columns = Vec::with_capacity(m - 1);
    let mut prefix = weights[0];
    for k in 0..m - 1 {
        let next = weights[k + 1];
        let extended = prefix + next;
        let c = (next / (prefix * extended)).sqrt();
        let mut col = vec![T::zero(); m];
        for v in col.iter_mut().take(k + 1) {
            *v = c;
        }
        col[k + 1] = -c * prefix / next;
        columns.push(col);
        prefix = extended;
    }
    columns
}

fn rotated_helmert<T: Real>(
    cube: CubeId,
    weights: &[T],
    params: &HaarParams,
) -> Result<Vec<Vec<T>>, HaarError> {
    let base = helmert(weights);
    let k = base.len();
    let m = weights.len();
    let tol = T::lit(params.nonvanish_tol);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(cube.0 as u64);
    let mut best = T::zero();
    for _ in 0..params.retry_budget.max(1) {
        let rotation = random_orthogonal::<T>(k, &mut rng);
        let columns: Vec<Vec<T>> = (0..k)
            .map(|j| {
                (0..m)
                    .map(|i| (0..k).map(|l| base[l][i] * rotation[l][j]).sum())
                    .collect()
            })
            .collect();
        let worst = columns
            .iter()
            .map(|col| {
                let hi = col.iter().fold(T::zero(), |a, v| a.max(v.abs()));
                let lo = col.iter().fold(T::infinity(), |a, v| a.min(v.abs()));
                lo / hi
            })
            .fold(T::infinity(), T::min);
        if worst >= tol && worst > T::zero() {
            return Ok(columns);
        }
        best = best.max(worst);
    }
    Err(HaarError::RetryBudgetExhausted {
        cube,
        attempts: params.retry_budget.max(1),
        best: best.as_f64(),
    })
}

/// Haar-distributed orthogonal `k x k` matrix from Gram-Schmidt on a
/// Gaussian matrix; `result[l][j]` is row `l`, column `j`.
fn random_orthogonal<T: Real>(k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    loop {
        let mut cols: Vec<Vec<T>> = (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| T::lit(StandardNormal.sample(rng)))
                    .collect()
            })
            .collect();
        let mut degenerate = false;
        for j in 0..k {
            // Two passes of modified Gram-Schmidt keep orthogonality at
            // machine precision.
            for _ in 0..2 {
                for i in 0..j {
                    let dot: T = (0..k).map(|r| cols[i][r] * cols[j][r]).sum();
                    for r in 0..k {
                        cols[j][r] = cols[j][r] - dot * cols[i][r];
                    }
                }
            }
            let norm = cols[j].iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm <= T::epsilon() {
                degenerate = true;
                break;
            }
            for v in &mut cols[j] {
                *v = *v / norm;
            }
        }
        if !degenerate {
            return (0..k)
                .map(|l| (0..k).map(|j| cols[j][l]).collect())
                .collect();
        }
    }
}

/// Measured constants and axiom residuals of a Haar system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarReport<T> {
    /// `min |h(x)| mu(Q(h))^(1/2)` over `h` and `x` in `Q(h)`.
    pub c1: T,
    /// `max |h(x)| mu(Q(h))^(1/2)`.
    pub c2: T,
    /// `c2 / c1`.
    pub h5_constant: T,
    /// Worst `max |h| / min |h|` on `Q(h)` over individual functions.
    pub worst_function_ratio: T,
    /// Each function is non-constant on its cube and not supported in one child.
    pub h1_support: bool,
    /// Exactly `#children - 1` functions per branching cube, none elsewhere.
    pub h2_counts: bool,
    pub function_count: usize,
    /// `max |integral of h|`.
    pub h3_mean_residual: T,
    /// Worst entry of `G - I` for the local bases `{chi_Q / mu(Q)^(1/2)} U H(Q)`.
    pub h4_local_residual: T,
    /// Worst entry of `G - I` over the full system including the scaling function.
    pub gram_residual: T,
}

pub const GRAM_TOL: f64 = 1e-10;
pub const MEAN_TOL: f64 = 1e-12;

impl<T: Real> HaarReport<T> {
    pub fn passed(&self) -> bool {
        self.h1_support
            && self.h2_counts
            && self.c1 > T::zero()
            && self.h3_mean_residual <= T::lit(MEAN_TOL)
            && self.h4_local_residual <= T::lit(GRAM_TOL)
            && self.gram_residual <= T::lit(GRAM_TOL)
    }
}

pub fn verify_haar<T: Real>(tree: &DyadicTree<T>, system: &HaarSystem<T>) -> HaarReport<T> {
    let mut c1 = T::infinity();
    let mut c2 = T::zero();
    let mut worst_ratio = T::one();
    let mut h1 = true;
    let mut h3 = T::zero();
    for (h, f) in system.functions().iter().enumerate() {
        let root_mu = tree.measure(f.cube).sqrt();
        for &v in &f.child_values {
            c1 = c1.min(v.abs() * root_mu);
            c2 = c2.max(v.abs() * root_mu);
        }
        worst_ratio = worst_ratio.max(T::one() / f.comparability());
        let nonzero = f.child_values.iter().filter(|v| **v != T::zero()).count();
        let first = f.child_values[0];
        let constant = f.child_values.iter().all(|&v| v == first);
        h1 &= nonzero >= 2 && !constant;

        let mut values = vec![T::zero(); tree.n_leaves()];
        system.fill_values(tree, h, T::one(), &mut values);
        let span = tree.cube(f.cube).leaf_span.clone();
        let mean: T = span
            .map(|x| values[x] * tree.leaf_measures()[x])
            .sum();
        h3 = h3.max(mean.abs());
    }

    let mut h2 = true;
    let mut h4 = T::zero();
    for (i, cube) in tree.cubes().iter().enumerate() {
        let id = CubeId(i);
        let fs = system.for_cube(id);
        let expected = cube.children.len().saturating_sub(1);
        h2 &= fs.len() == expected;
        if cube.is_leaf() {
            continue;
        }
        let w: Vec<T> = cube.children.iter().map(|&c| tree.measure(c)).collect();
        let flat = T::one() / cube.measure.sqrt();
        let mut basis: Vec<Vec<T>> = vec![vec![flat; w.len()]];
        basis.extend(fs.iter().map(|f| f.child_values.clone()));
        for a in 0..basis.len() {
            for b in a..basis.len() {
                let g: T = (0..w.len()).map(|r| basis[a][r] * basis[b][r] * w[r]).sum();
                let target = if a == b { T::one() } else { T::zero() };
                h4 = h4.max((g - target).abs());
            }
        }
    }

    HaarReport {
        c1,
        c2,
        h5_constant: c2 / c1,
        worst_function_ratio: worst_ratio,
        h1_support: h1,
        h2_counts: h2,
        function_count: system.len(),
        h3_mean_residual: h3,
        h4_local_residual: h4,
        gram_residual: gram_residual(tree, system),
    }
}

/// Worst entry of `G - I` for the Gram matrix of `{scaling} U H`, evaluated on
/// leaf values. Pairs with disjoint supports have an identically zero product
/// and are skipped; every other pair is nested and is summed over the leaves
/// of the smaller support.
pub fn gram_residual<T: Real>(tree: &DyadicTree<T>, system: &HaarSystem<T>) -> T {
    let mu = tree.leaf_measures();
    let s = system.scaling_value();
    let ss: T = mu.iter().map(|&m| s * s * m).sum();
    let mut worst = (ss - T::one()).abs();
    let mut values = vec![T::zero(); tree.n_leaves()];
    for (b, fb) in system.functions().iter().enumerate() {
        let span = tree.cube(fb.cube).leaf_span.clone();
        for x in span.clone() {
            values[x] = T::zero();
        }
        system.fill_values(tree, b, T::one(), &mut values);
        let sb: T = span.clone().map(|x| s * values[x] * mu[x]).sum();
        worst = fmax(worst, sb.abs());
        // Functions on the same cube and on strict ancestors.
        let mut cube = Some(fb.cube);
        while let Some(q) = cube {
            for a in system.range_for(q) {
                if q == fb.cube && a > b {
                    continue;
                }
                let fa = &system.functions()[a];
                let g: T = if q == fb.cube {
                    span.clone()
                        .map(|x| {
                            let p = tree.child_position(q, x).expect("x in Q");
                            fa.child_values[p] * values[x] * mu[x]
                        })
                        .sum()
                } else {
                    let p = tree
                        .child_position(q, span.start)
                        .expect("nested support");
                    span.clone()
                        .map(|x| fa.child_values[p] * values[x] * mu[x])
                        .sum()
                };
                let target = if a == b { T::one() } else { T::zero() };
                worst = fmax(worst, (g - target).abs());
            }
            cube = tree.cube(q).parent;
        }
    }
    worst
}

/// `max |h(x) - h(x')| mu(Q(h))^(3/2) / delta(x, x')` over all `h` and leaf
/// pairs, `h` extended by zero off `Q(h)`.
///
/// Pairs inside `Q(h)` only matter when they sit in different children, where
/// `delta = mu(Q(h))`. For `x` in `Q(h)` and `x'` outside, the smallest
/// distance is the smallest measure of a strict ancestor of `Q(h)`.
pub fn haar_lipschitz_constant<T: Real>(tree: &DyadicTree<T>, system: &HaarSystem<T>) -> T {
    let mut best = T::zero();
    for f in system.functions() {
        let mu = tree.measure(f.cube);
        let hi = f.child_values.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
        let lo = f.child_values.iter().fold(T::infinity(), |a, &v| a.min(v));
        best = fmax(best, (hi - lo) * mu.sqrt());
        let mut outside = T::infinity();
        let mut up = tree.cube(f.cube).parent;
        while let Some(p) = up {
            outside = outside.min(tree.measure(p));
            up = tree.cube(p).parent;
        }
        if outside.is_finite() {
            let peak = f.child_values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
            best = fmax(best, peak * mu * mu.sqrt() / outside);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{LeafWeights, RandomTreeParams, WeightLaw};

    fn lebesgue(depth: usize) -> DyadicTree<f64> {
        DyadicTree::<f64>::build_uniform(depth, 2, &LeafWeights::Equal).unwrap()
    }

    #[test]
    fn classical_root_function() {
        let t = lebesgue(1);
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.function(0).child_values, vec![1.0, -1.0]);
    }

    #[test]
    fn weighted_binary_values() {
        // a/4 + 3b/4 = 0, a^2/4 + 3 b^2/4 = 1, a > 0
        let t = DyadicTree::<f64>::build_uniform(1, 2, &LeafWeights::Listed(vec![0.25, 0.75])).unwrap();
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        let v = &h.function(0).child_values;
        assert!((v[0] - 3f64.sqrt()).abs() < 1e-15);
        assert!((v[1] + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let r = verify_haar(&t, &h);
        assert!((r.h5_constant - 3.0).abs() < 1e-14);
    }

    #[test]
    fn ternary_cube_is_orthonormal_and_nonvanishing() {
        let t = DyadicTree::<f64>::build_uniform(1, 3, &LeafWeights::Equal).unwrap();
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        assert_eq!(h.len(), 2);
        let r = verify_haar(&t, &h);
        assert!(r.gram_residual <= 1e-12, "{r:?}");
        assert!(h.functions().iter().all(|f| f.child_values.iter().all(|v| *v != 0.0)));
    }

    #[test]
    fn classical_strategy_rejects_wide_cubes() {
        let t = DyadicTree::<f64>::build_uniform(1, 3, &LeafWeights::Equal).unwrap();
        let p = HaarParams {
            strategy: HaarStrategy::ClassicalBinary,
            ..Default::default()
        };
        assert!(matches!(
            HaarSystem::build(&t, &p),
            Err(HaarError::NonBinaryCube { children: 3, .. })
        ));
    }

    #[test]
    fn impossible_tolerance_exhausts_budget() {
        let t = DyadicTree::<f64>::build_uniform(1, 4, &LeafWeights::Equal).unwrap();
        let p = HaarParams {
            nonvanish_tol: 0.999,
            retry_budget: 8,
            ..Default::default()
        };
        match HaarSystem::build(&t, &p) {
            Err(HaarError::RetryBudgetExhausted { cube, attempts, best }) => {
                assert_eq!(cube, CubeId(0));
                assert_eq!(attempts, 8);
                assert!(best < 0.999);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn analysis_of_basis_functions() {
        let t = lebesgue(3);
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        let mut f = LeafFunction::constant(8, 1.0);
        for x in 4..8 {
            f.values[x] = -1.0;
        }
        let c = h.analyze(&t, &f).unwrap();
        assert!((c.detail[0] - 1.0).abs() < 1e-15);
        assert!(c.detail[1..].iter().all(|v| v.abs() < 1e-15));
        assert!(c.scaling.abs() < 1e-15);

        let one = LeafFunction::constant(8, 1.0);
        let c = h.analyze(&t, &one).unwrap();
        assert!((c.scaling - 1.0).abs() < 1e-15);
        assert!(c.detail.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn synthesis_edge_cases() {
        let t = lebesgue(3);
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        let zero = h.synthesize(&t, &Coefficients::zeros(h.len())).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        for k in 0..h.len() {
            let mut c = Coefficients::zeros(h.len());
            c.detail[k] = 1.0;
            let f = h.synthesize(&t, &c).unwrap();
            assert_eq!(f, h.to_leaf_function(&t, k));
        }
        assert!(matches!(
            h.synthesize(&t, &Coefficients::zeros(3)),
            Err(HaarError::LengthMismatch { .. })
        ));
        assert!(matches!(
            h.analyze(&t, &LeafFunction::zeros(5)),
            Err(HaarError::LengthMismatch { expected: 8, got: 5 })
        ));
    }

    #[test]
    fn uniform_binary_constants() {
        let t = lebesgue(4);
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        let r = verify_haar(&t, &h);
        assert!(r.passed());
        assert!((r.c1 - 1.0).abs() < 1e-15 && (r.c2 - 1.0).abs() < 1e-15);
        assert!((r.h5_constant - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_constant_single_cube() {
        let t = lebesgue(1);
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        assert_eq!(haar_lipschitz_constant(&t, &h), 2.0);
    }

    #[test]
    fn construction_is_deterministic_per_seed() {
        let t = DyadicTree::<f64>::build_random(&RandomTreeParams {
            seed: 11,
            depth: 3,
            branching: (3, 4),
            weight_law: WeightLaw::LogUniform { spread: 4.0 },
            early_leaf_prob: 0.0,
        })
        .unwrap();
        let p = HaarParams {
            seed: 5,
            ..Default::default()
        };
        let a = HaarSystem::build(&t, &p).unwrap();
        let b = HaarSystem::build(&t, &p).unwrap();
        assert_eq!(a, b);
        let c = HaarSystem::build(
            &t,
            &HaarParams {
                seed: 6,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn f32_instantiation_works() {
        let t = DyadicTree::<f32>::build_uniform(3, 3, &LeafWeights::Equal).unwrap();
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        let r = verify_haar(&t, &h);
        assert!(r.gram_residual < 1e-4);
        let f = LeafFunction::new((0..27).map(|i| (i as f32).sin()).collect());
        let back = h.synthesize(&t, &h.analyze(&t, &f).unwrap()).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-4);
    }
}
