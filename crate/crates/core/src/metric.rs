//! The dyadic ultrametric `delta(x, y) = mu(Q(x, y))`, where `Q(x, y)` is the
//! smallest cube containing both leaves, together with balls and the checks
//! that `(X, delta, mu)` is a normal space.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::tree::{CubeId, DyadicTree, TreeError};

/// Smallest cube containing leaves `x` and `y`; the leaf itself when `x == y`.
pub fn smallest_common_cube<T: Real>(
    tree: &DyadicTree<T>,
    x: usize,
    y: usize,
) -> Result<CubeId, TreeError> {
    tree.check_leaf(x)?;
    tree.check_leaf(y)?;
    Ok(lca(tree, x, y))
}

#[inline]
pub(crate) fn lca<T: Real>(tree: &DyadicTree<T>, x: usize, y: usize) -> CubeId {
    tree.ancestors(x)
        .find(|&q| tree.contains(q, y))
        .unwrap_or(tree.root())
}

pub fn delta<T: Real>(tree: &DyadicTree<T>, x: usize, y: usize) -> Result<T, TreeError> {
    tree.check_leaf(x)?;
    tree.check_leaf(y)?;
    Ok(delta_unchecked(tree, x, y))
}

#[inline]
pub(crate) fn delta_unchecked<T: Real>(tree: &DyadicTree<T>, x: usize, y: usize) -> T {
    if x == y {
        T::zero()
    } else {
        tree.measure(lca(tree, x, y))
    }
}

/// The cube realizing the ball `B(x, r)`: the largest cube containing `x`
/// with measure at most `r`, or the leaf of `x` when no cube is that small.
pub fn ball_cube<T: Real>(tree: &DyadicTree<T>, x: usize, r: T) -> Result<CubeId, TreeError> {
    tree.check_leaf(x)?;
    let mut best = tree.leaf_cube(x);
    for q in tree.ancestors(x) {
        if tree.measure(q) <= r {
            best = q;
        } else {
            break;
        }
    }
    Ok(best)
}

/// Leaves of the dyadic ball `B(x, r)`. Always a contiguous range.
pub fn ball<T: Real>(tree: &DyadicTree<T>, x: usize, r: T) -> Result<Range<usize>, TreeError> {
    let q = ball_cube(tree, x, r)?;
    Ok(tree.cube(q).leaf_span.clone())
}

/// Dense table of pairwise distances, row-major.
#[derive(Clone, Debug)]
pub struct DeltaTable<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Real> DeltaTable<T> {
    pub fn new(tree: &DyadicTree<T>) -> Self {
        Self::from_fn(tree.n_leaves(), |x, y| delta_unchecked(tree, x, y))
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                values.push(f(x, y));
            }
        }
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[x * self.n + y]
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.values[x * self.n + y] = v;
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TripleSample {
    Exhaustive,
    Seeded { seed: u64, count: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleWitness<T> {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    /// `delta(x, y) - max(delta(x, z), delta(z, y))`; positive means violated.
    pub excess: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UltrametricReport<T> {
    pub holds: bool,
    pub checked: u64,
    pub worst: Option<TripleWitness<T>>,
}

/// Largest tree for which [`verify_ultrametric`] materializes a dense table.
pub const DENSE_TABLE_LIMIT: usize = 2048;

pub fn verify_ultrametric<T: Real>(
    tree: &DyadicTree<T>,
    sample: TripleSample,
) -> UltrametricReport<T> {
    if tree.n_leaves() <= DENSE_TABLE_LIMIT {
        verify_ultrametric_table(&DeltaTable::new(tree), sample)
    } else {
        scan_triples(tree.n_leaves(), sample, |x, y| delta_unchecked(tree, x, y))
    }
}

/// Ultrametric check over an arbitrary distance table, so corrupted tables
/// can serve as negative controls.
pub fn verify_ultrametric_table<T: Real>(
    table: &DeltaTable<T>,
    sample: TripleSample,
) -> UltrametricReport<T> {
    scan_triples(table.len(), sample, |x, y| table.get(x, y))
}

fn scan_triples<T: Real>(
    n: usize,
    sample: TripleSample,
    d: impl Fn(usize, usize) -> T,
) -> UltrametricReport<T> {
    let mut worst: Option<TripleWitness<T>> = None;
    let mut checked = 0u64;
    let mut visit = |x: usize, y: usize, z: usize| {
        checked += 1;
        let excess = d(x, y) - d(x, z).max(d(z, y));
        if worst.as_ref().is_none_or(|w| excess > w.excess) {
            worst = Some(TripleWitness { x, y, z, excess });
        }
    };
    match sample {
        TripleSample::Exhaustive => {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        visit(x, y, z);
                    }
                }
            }
        }
        TripleSample::Seeded { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let x = rng.random_range(0..n);
                let y = rng.random_range(0..n);
                let z = rng.random_range(0..n);
                visit(x, y, z);
            }
        }
    }
    let holds = worst.as_ref().is_none_or(|w| w.excess <= T::zero());
    UltrametricReport {
        holds,
        checked,
        worst,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport<T> {
    /// `max mu(B(x, r)) / r` over the sweep.
    pub sup_ratio: T,
    /// `min mu(B(x, r)) / r` over the sweep.
    pub inf_ratio: T,
    /// `1 / C` with `C` the dyadic doubling constant.
    pub lower_bound: T,
    /// Every swept ball coincided with the brute-force set `{y : delta(x, y) <= r}`.
    pub ball_equals_cube: bool,
    /// `r / C < mu(B) <= r` held at every swept point.
    pub holds: bool,
    /// Smallest positive distance between leaves.
    pub resolution: T,
    pub points_checked: u64,
}

/// Largest tree for which every swept ball is compared against brute force;
/// above it a seeded subset of 64 centers is compared.
pub const BRUTE_BALL_LIMIT: usize = 256;

/// Sweeps `r` over all cube measures and their immediate neighbours, for every
/// leaf `x`, restricted to `mu(leaf(x)) <= r <= mu(X)`.
pub fn verify_normal<T: Real>(tree: &DyadicTree<T>) -> NormalityReport<T> {
    let n = tree.n_leaves();
    let total = tree.total_measure();
    let stats = tree.stats();
    let mut radii: Vec<T> = Vec::with_capacity(3 * tree.n_cubes());
    for c in tree.cubes() {
        radii.extend([c.measure.nudge_down(), c.measure, c.measure.nudge_up()]);
    }
    radii.sort_by(|a, b| a.partial_cmp(b).expect("finite measures"));
    radii.dedup();

    let brute_centers: Vec<usize> = if n <= BRUTE_BALL_LIMIT {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..64).map(|_| rng.random_range(0..n)).collect()
    };
    let mut brute = vec![false; n];
    for &x in &brute_centers {
        brute[x] = true;
    }

    let mut sup_ratio = T::zero();
    let mut inf_ratio = T::infinity();
    let mut ball_equals_cube = true;
    let mut holds = true;
    let mut points = 0u64;
    let lower = T::one() / stats.dyadic_doubling;
    let slack = T::one() + T::lit(4.0) * T::epsilon();
    for x in 0..n {
        let chain: Vec<CubeId> = tree.ancestors(x).collect();
        let floor = tree.measure(chain[0]);
        let row: Vec<T> = if brute[x] {
            (0..n).map(|y| delta_unchecked(tree, x, y)).collect()
        } else {
            Vec::new()
        };
        let start = radii.partition_point(|&r| r < floor);
        for &r in radii[start..].iter().take_while(|&&r| r <= total) {
            points += 1;
            // Chain measures increase towards the root.
            let k = chain.partition_point(|&q| tree.measure(q) <= r);
            let q = chain[k.saturating_sub(1)];
            let mass = tree.measure(q);
            let ratio = mass / r;
            sup_ratio = sup_ratio.max(ratio);
            inf_ratio = inf_ratio.min(ratio);
            // r < mu(parent) <= C mu(B); the slack absorbs rounding in C.
            if !(mass <= r && r < mass * stats.dyadic_doubling * slack) {
                holds = false;
            }
            if brute[x] {
                let span = &tree.cube(q).leaf_span;
                let same = row
                    .iter()
                    .enumerate()
                    .all(|(y, &d)| (d <= r) == span.contains(&y));
                ball_equals_cube &= same;
            }
        }
    }
    NormalityReport {
        sup_ratio,
        inf_ratio,
        lower_bound: lower,
        ball_equals_cube,
        holds: holds && ball_equals_cube,
        resolution: tree.resolution(),
        points_checked: points,
    }
}

/// `max |chi_Q(x) - chi_Q(y)| mu(Q) / delta(x, y)` over all cubes and leaf
/// pairs. The maximizing pair for `Q` has `x` in `Q` and `y` in a sibling,
/// where `delta = mu(parent(Q))`; the value must not exceed 1.
pub fn indicator_lipschitz<T: Real>(tree: &DyadicTree<T>) -> T {
    tree.cubes()
        .iter()
        .filter_map(|c| c.parent.map(|p| c.measure / tree.measure(p)))
        .fold(T::zero(), T::max)
}
