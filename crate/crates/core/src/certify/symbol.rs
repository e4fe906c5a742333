use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::haar::{HaarReport, HaarSystem};
use crate::operators::{AlphaSequence, Symbol, SymbolValues};
use crate::scalar::{fmax, Real};
use crate::tree::{CubeId, DyadicTree, TreeStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolConditions<T> {
    /// `sup |eta(x, h)|`.
    pub symbol_ba: T,
    /// `sup |eta(x', h) - eta(x, h)| mu(Q(h)) / delta(x, x')` over `x != x'`.
    pub symbol_bb: T,
}

/// Measured symbol constants. A constant symbol does not depend on `x`, so its
/// `symbol_bb` is exactly 0. A variable symbol is extended by zero off the
/// cube of `h`, and both the pairs inside the cube and the pairs leaving it
/// are scanned.
pub fn symbol_conditions<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
) -> SymbolConditions<T> {
    let rows = match symbol.values() {
        SymbolValues::Constant(v) => {
            return SymbolConditions {
                symbol_ba: v.iter().fold(T::zero(), |a, x| a.max(x.abs())),
                symbol_bb: T::zero(),
            }
        }
        SymbolValues::Variable(rows) => rows,
    };
    let outside = nearest_outside(tree);
    let (ba, bb) = system
        .functions()
        .par_iter()
        .zip(rows.par_iter())
        .map(|(f, row)| {
            let q = f.cube;
            let mu_q = tree.measure(q);
            let start = tree.cube(q).leaf_span.start;
            let peak = row.iter().fold(T::zero(), |a, v| a.max(v.abs()));
            let mut bb = T::zero();
            if let Some(d) = outside[q.0] {
                bb = fmax(bb, peak * mu_q / d);
            }
            // Pairs inside Q(h) are grouped by their smallest common cube A;
            // then delta = mu(A) and the largest difference is attained between
            // the extreme values on two different children of A.
            let (_, _, inner) = spread(tree, q, row, start);
            bb = fmax(bb, inner * mu_q);
            (peak, bb)
        })
        .reduce(|| (T::zero(), T::zero()), |a, b| (fmax(a.0, b.0), fmax(a.1, b.1)));
    SymbolConditions {
        symbol_ba: ba,
        symbol_bb: bb,
    }
}

/// For every cube, the smallest measure among its strict ancestors.
pub(crate) fn nearest_outside<T: Real>(tree: &DyadicTree<T>) -> Vec<Option<T>> {
    let mut out: Vec<Option<T>> = vec![None; tree.n_cubes()];
    for (i, c) in tree.cubes().iter().enumerate() {
        if let Some(p) = c.parent {
            let here = tree.measure(p);
            out[i] = Some(out[p.0].map_or(here, |m: T| m.min(here)));
        }
    }
    out
}

/// `(min, max, best)` of `row` over the leaves of `q`, where `best` is the
/// largest `|v(x) - v(x')| / delta(x, x')` inside `q`.
fn spread<T: Real>(tree: &DyadicTree<T>, q: CubeId, row: &[T], start: usize) -> (T, T, T) {
    let cube = tree.cube(q);
    if cube.is_leaf() {
        let v = row[cube.leaf_span.start - start];
        return (v, v, T::zero());
    }
    let parts: Vec<(T, T, T)> = cube
        .children
        .iter()
        .map(|&c| spread(tree, c, row, start))
        .collect();
    let mut best = parts.iter().fold(T::zero(), |a, p| fmax(a, p.2));
    let mu = tree.measure(q);
    for (i, a) in parts.iter().enumerate() {
        for (j, b) in parts.iter().enumerate() {
            if i != j {
                best = fmax(best, (a.1 - b.0).abs() / mu);
                best = fmax(best, (b.1 - a.0).abs() / mu);
            }
        }
    }
    let lo = parts.iter().fold(T::infinity(), |a, p| a.min(p.0));
    let hi = parts.iter().fold(T::neg_infinity(), |a, p| a.max(p.1));
    (lo, hi, best)
}

/// Closed-form bounds for the Petermichl symbol, built from verified
/// constants: `M`, the dyadic doubling constant `C`, the Haar constants
/// `C1`, `C2` and `||alpha||_inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolBounds<T> {
    /// `M^2 ||alpha|| sqrt(C) C2 / C1`.
    pub ba_bound: T,
    /// `max(2 B, ||alpha|| M^2 C^(5/2) C2 / C1)`: the worst of the three
    /// nontrivial cases (pairs in different grandchildren, pairs leaving the
    /// cube, pairs in different children).
    pub bb_bound: T,
}

pub fn petermichl_bounds<T: Real>(
    stats: &TreeStats<T>,
    haar: &HaarReport<T>,
    alphas: &AlphaSequence<T>,
) -> SymbolBounds<T> {
    let m = T::from_usize_lossy(stats.max_children);
    let c = stats.dyadic_doubling;
    let a = alphas.sup_norm();
    let ratio = haar.c2 / haar.c1;
    let ba = m * m * a * c.sqrt() * ratio;
    let grand = a * m * m * c * c * c.sqrt() * ratio;
    SymbolBounds {
        ba_bound: ba,
        bb_bound: fmax(T::lit(2.0) * ba, grand),
    }
}
