use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::function::LeafFunction;
use crate::haar::{Coefficients, HaarSystem};
use crate::metric::{ball, delta_unchecked, DeltaTable};
use crate::operators::{KernelMatrix, OperatorKind};
use crate::scalar::{fmax, Real};
use crate::tree::{CubeId, DyadicTree};

/// Largest leaf count scanned exhaustively by [`smoothness_constants`].
pub const TRIPLE_SCAN_LIMIT: usize = 512;
/// Admissible triples drawn above [`TRIPLE_SCAN_LIMIT`].
pub const SAMPLED_TRIPLES: u64 = 1_000_000;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeScan<T> {
    pub size_c: T,
    pub pairs: u64,
    /// True when there was nothing to scan; the constant is then 0 by convention.
    pub empty: bool,
}

/// `max delta(x, y) |K(x, y)|` over leaf pairs `x != y`.
pub fn size_constant<T: Real>(tree: &DyadicTree<T>, kernel: &KernelMatrix<T>) -> SizeScan<T> {
    let n = tree.n_leaves();
    let size_c = (0..n)
        .into_par_iter()
        .map(|x| {
            let row = delta_row(tree, x);
            (0..n)
                .filter(|&y| y != x)
                .fold(T::zero(), |a, y| fmax(a, row[y] * kernel.get(x, y).abs()))
        })
        .reduce(T::zero, fmax);
    let pairs = (n as u64) * (n as u64).saturating_sub(1);
    SizeScan {
        size_c,
        pairs,
        empty: pairs == 0,
    }
}

/// `delta(x, y)` for every `y`, filled cube by cube in `O(n)`.
pub(crate) fn delta_row<T: Real>(tree: &DyadicTree<T>, x: usize) -> Vec<T> {
    let mut row = vec![T::zero(); tree.n_leaves()];
    let mut below: Option<CubeId> = None;
    for q in tree.ancestors(x) {
        if let Some(child) = below {
            let m = tree.measure(q);
            for &r in &tree.cube(q).children {
                if r != child {
                    for y in tree.cube(r).leaf_span.clone() {
                        row[y] = m;
                    }
                }
            }
        }
        below = Some(q);
    }
    row
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessScan<T> {
    /// `max |K(x', y) - K(x, y)| delta(x, y)^2 / delta(x, x')`.
    pub smooth_cx: T,
    /// `max |K(y, x') - K(y, x)| delta(x, y)^2 / delta(x, x')`.
    pub smooth_cy: T,
    pub triples: u64,
    pub mode: ScanMode,
    pub empty: bool,
    /// Every scanned triple had `delta(x, y) = delta(x', y)`; a violation is
    /// an error instead, so this is always true in a returned scan.
    pub lemma_holds: bool,
}

#[derive(Clone, Copy)]
struct Partial<T> {
    cx: T,
    cy: T,
    count: u64,
}

impl<T: Real> Partial<T> {
    fn zero() -> Self {
        Self {
            cx: T::zero(),
            cy: T::zero(),
            count: 0,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            cx: fmax(self.cx, o.cx),
            cy: fmax(self.cy, o.cy),
            count: self.count + o.count,
        }
    }
}

/// Smoothness constants with exponent 1 over the admissible triples
/// `2 delta(x, x') <= delta(x, y)`, `x != x'`. Exhaustive up to `limit`
/// leaves, otherwise [`SAMPLED_TRIPLES`] admissible triples drawn with `seed`.
///
/// Partial results are combined in index order, so the reported witness of a
/// violated triple does not depend on thread scheduling.
pub fn smoothness_constants<T: Real>(
    tree: &DyadicTree<T>,
    kernel: &KernelMatrix<T>,
    limit: usize,
    seed: u64,
) -> Result<SmoothnessScan<T>, CertifyError> {
    let n = tree.n_leaves();
    let two = T::lit(2.0);
    let visit = |x: usize, xp: usize, y: usize, dxxp: T, dxy: T, dxpy: T| -> Result<(T, T), CertifyError> {
        if dxy != dxpy {
            return Err(CertifyError::LemmaViolation {
                x,
                x_prime: xp,
                y,
                delta_xy: dxy.as_f64(),
                delta_xpy: dxpy.as_f64(),
            });
        }
        let w = dxy * dxy / dxxp;
        Ok((
            (kernel.get(xp, y) - kernel.get(x, y)).abs() * w,
            (kernel.get(y, xp) - kernel.get(y, x)).abs() * w,
        ))
    };

    let (partial, mode) = if n <= limit {
        let table = DeltaTable::new(tree);
        let p = (0..n)
            .into_par_iter()
            .map(|x| -> Result<Partial<T>, CertifyError> {
                let mut acc = Partial::zero();
                for xp in 0..n {
                    let dxxp = table.get(x, xp);
                    if xp == x {
                        continue;
                    }
                    for y in 0..n {
                        let dxy = table.get(x, y);
                        if two * dxxp > dxy {
                            continue;
                        }
                        let (a, b) = visit(x, xp, y, dxxp, dxy, table.get(xp, y))?;
                        acc.cx = fmax(acc.cx, a);
                        acc.cy = fmax(acc.cy, b);
                        acc.count += 1;
                    }
                }
                Ok(acc)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .try_fold(Partial::zero(), |a, b| b.map(|b| a.merge(b)))?;
        (p, ScanMode::Exhaustive)
    } else {
        const CHUNKS: u64 = 64;
        let per_chunk = SAMPLED_TRIPLES.div_ceil(CHUNKS);
        let p = (0..CHUNKS)
            .into_par_iter()
            .map(|chunk| -> Result<Partial<T>, CertifyError> {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chunk);
                let mut acc = Partial::zero();
                let mut draws = 0u64;
                while acc.count < per_chunk && draws < per_chunk * 200 {
                    draws += 1;
                    let x = rng.random_range(0..n);
                    let y = rng.random_range(0..n);
                    let dxy = delta_unchecked(tree, x, y);
                    if dxy == T::zero() {
                        continue;
                    }
                    // x' from the ball of radius delta(x, y) / 2 around x.
                    let span = ball(tree, x, dxy / two).expect("leaf in range");
                    if span.len() < 2 {
                        continue;
                    }
                    let mut xp = rng.random_range(span.start..span.end - 1);
                    if xp >= x {
                        xp += 1;
                    }
                    let dxxp = delta_unchecked(tree, x, xp);
                    if two * dxxp > dxy {
                        continue;
                    }
                    let (a, b) = visit(x, xp, y, dxxp, dxy, delta_unchecked(tree, xp, y))?;
                    acc.cx = fmax(acc.cx, a);
                    acc.cy = fmax(acc.cy, b);
                    acc.count += 1;
                }
                Ok(acc)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .try_fold(Partial::zero(), |a, b| b.map(|b| a.merge(b)))?;
        (p, ScanMode::Sampled)
    };
    Ok(SmoothnessScan {
        smooth_cx: partial.cx,
        smooth_cy: partial.cy,
        triples: partial.count,
        mode,
        empty: partial.count == 0,
        lemma_holds: true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck<T> {
    pub max_residual: T,
    pub trials: usize,
}

fn subtree_end<T: Real>(tree: &DyadicTree<T>, q: CubeId) -> usize {
    let span = &tree.cube(q).leaf_span;
    let mut end = q.0 + 1;
    while end < tree.n_cubes() && tree.cubes()[end].leaf_span.start < span.end {
        end += 1;
    }
    end
}

/// Unit-norm random element of the span of the Haar functions living in
/// the subtree of `q`.
fn random_local<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    q: CubeId,
    rng: &mut ChaCha8Rng,
) -> LeafFunction<T> {
    let end = subtree_end(tree, q);
    let first = system.range_for(q).start;
    let last = (q.0..end)
        .map(|c| system.range_for(CubeId(c)).end)
        .max()
        .unwrap_or(first);
    let mut detail = vec![T::zero(); system.len()];
    for c in &mut detail[first..last] {
        *c = T::lit(StandardNormal.sample(rng));
    }
    let f = system
        .synthesize(
            tree,
            &Coefficients {
                scaling: T::zero(),
                detail,
            },
        )
        .expect("system matches tree");
    let norm = f.norm(tree);
    f.scaled(T::one() / norm)
}

/// `max |<T phi, psi> - sum_x sum_y K(x, y) phi(y) psi(x) mu(x) mu(y)|` over
/// random pairs of disjoint branching cubes and random unit-norm Haar-span
/// functions supported in them.
pub fn weak_integral_identity<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    operator: &OperatorKind<T>,
    kernel: &KernelMatrix<T>,
    trials: usize,
    seed: u64,
) -> Result<IdentityCheck<T>, CertifyError> {
    let internal: Vec<CubeId> = tree.internal_cubes().collect();
    let disjoint = |a: CubeId, b: CubeId| {
        let (sa, sb) = (&tree.cube(a).leaf_span, &tree.cube(b).leaf_span);
        sa.end <= sb.start || sb.end <= sa.start
    };
    let any = internal
        .iter()
        .enumerate()
        .any(|(i, &a)| internal[i + 1..].iter().any(|&b| disjoint(a, b)));
    if !any {
        return Err(CertifyError::NoDisjointCubes);
    }
    let mu = tree.leaf_measures();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for _ in 0..trials {
        let (a, b) = loop {
            let a = internal[rng.random_range(0..internal.len())];
            let b = internal[rng.random_range(0..internal.len())];
            if disjoint(a, b) {
                break (a, b);
            }
        };
        let phi = random_local(tree, system, a, &mut rng);
        let psi = random_local(tree, system, b, &mut rng);
        let lhs = operator.apply(tree, system, &phi)?.inner(&psi, tree);
        let mut rhs = T::zero();
        for x in tree.cube(b).leaf_span.clone() {
            let mut inner = T::zero();
            for y in tree.cube(a).leaf_span.clone() {
                inner = inner + kernel.get(x, y) * phi.values[y] * mu[y];
            }
            rhs = rhs + inner * psi.values[x] * mu[x];
        }
        worst = fmax(worst, (lhs - rhs).abs());
    }
    Ok(IdentityCheck {
        max_residual: worst,
        trials,
    })
}
