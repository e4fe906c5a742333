use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{OperatorError, Symbol};
use crate::function::LeafFunction;
use crate::haar::{Coefficients, HaarSystem};
use crate::scalar::{fmax, Real};
use crate::tree::{CubeId, DyadicTree};

/// Bounded sequence `alpha_h`, one entry per Haar function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaSequence<T> {
    values: Vec<T>,
}

impl<T: Real> AlphaSequence<T> {
    pub fn new(values: Vec<T>) -> Result<Self, OperatorError> {
        if let Some(h) = values.iter().position(|v| !v.is_finite()) {
            return Err(OperatorError::NonFinite { h });
        }
        Ok(Self { values })
    }

    /// `(-1)^k` for functions on the `k`-th child of their parent; `+1` at the
    /// root. On binary trees this is `+1` on left children, `-1` on right ones.
    pub fn plus_minus(tree: &DyadicTree<T>, system: &HaarSystem<T>) -> Self {
        let values = system
            .functions()
            .iter()
            .map(|f| {
                if tree.cube(f.cube).position.is_multiple_of(2) {
                    T::one()
                } else {
                    -T::one()
                }
            })
            .collect();
        Self { values }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![T::one(); n],
        }
    }

    /// i.i.d. uniform on `[-1, 1]`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            values: (0..n).map(|_| T::lit(rng.random_range(-1.0..=1.0))).collect(),
        }
    }

    /// i.i.d. uniform on `{-1, +1}`.
    pub fn random_signs(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            values: (0..n)
                .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
                .collect(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    pub fn is_unimodular(&self) -> bool {
        self.values.iter().all(|v| v.abs() == T::one())
    }

    fn check(&self, system: &HaarSystem<T>) -> Result<(), OperatorError> {
        if self.values.len() == system.len() {
            Ok(())
        } else {
            Err(OperatorError::AlphaLength {
                expected: system.len(),
                got: self.values.len(),
            })
        }
    }
}

/// `P` in coefficient space: the coefficients of `h` on `Q` are summed and the
/// sum, weighted by `alpha`, becomes the coefficient of every function on
/// every child of `Q`. Functions on the root receive nothing.
pub fn petermichl_coefficients<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    alphas: &AlphaSequence<T>,
    coeffs: &[T],
) -> Result<Vec<T>, OperatorError> {
    alphas.check(system)?;
    let mut out = vec![T::zero(); system.len()];
    for (h, f) in system.functions().iter().enumerate() {
        if let Some(parent) = tree.cube(f.cube).parent {
            let s: T = system.range_for(parent).map(|k| coeffs[k]).sum();
            out[h] = alphas.values[h] * s;
        }
    }
    Ok(out)
}

/// `P^*` in coefficient space: every function on `Q` receives
/// `sum alpha_h' c_h'` over the functions `h'` on the children of `Q`.
pub fn petermichl_adjoint_coefficients<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    alphas: &AlphaSequence<T>,
    coeffs: &[T],
) -> Result<Vec<T>, OperatorError> {
    alphas.check(system)?;
    let mut out = vec![T::zero(); system.len()];
    for q in tree.internal_cubes() {
        let t: T = tree
            .cube(q)
            .children
            .iter()
            .flat_map(|&r| system.range_for(r))
            .map(|k| alphas.values[k] * coeffs[k])
            .sum();
        for h in system.range_for(q) {
            out[h] = t;
        }
    }
    Ok(out)
}

fn through_coefficients<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    f: &LeafFunction<T>,
    map: impl FnOnce(&[T]) -> Result<Vec<T>, OperatorError>,
) -> Result<LeafFunction<T>, OperatorError> {
    let c = system.analyze(tree, f)?;
    let detail = map(&c.detail)?;
    Ok(system.synthesize(
        tree,
        &Coefficients {
            scaling: T::zero(),
            detail,
        },
    )?)
}

pub fn petermichl_apply<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    alphas: &AlphaSequence<T>,
    f: &LeafFunction<T>,
) -> Result<LeafFunction<T>, OperatorError> {
    through_coefficients(tree, system, f, |c| {
        petermichl_coefficients(tree, system, alphas, c)
    })
}

pub fn petermichl_adjoint_apply<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    alphas: &AlphaSequence<T>,
    f: &LeafFunction<T>,
) -> Result<LeafFunction<T>, OperatorError> {
    through_coefficients(tree, system, f, |c| {
        petermichl_adjoint_coefficients(tree, system, alphas, c)
    })
}

/// The variable symbol reproducing `P` as a multiplier:
/// `eta(x, h) = sum_{h' on R} alpha_h' h'(x) / h_R` for `x` in the child `R`
/// of the cube of `h`, where `h_R` is the value of `h` on `R`.
pub fn petermichl_symbol<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    alphas: &AlphaSequence<T>,
) -> Result<Symbol<T>, OperatorError> {
    alphas.check(system)?;
    system.check_tree(tree)?;
    let tol = T::lit(system.params().nonvanish_tol);
    let mut values = Vec::with_capacity(system.len());
    for (h, f) in system.functions().iter().enumerate() {
        let peak = f.child_values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let cube = tree.cube(f.cube);
        let mut row = Vec::with_capacity(cube.leaf_span.len());
        for (&r, &hr) in cube.children.iter().zip(&f.child_values) {
            if hr == T::zero() || hr.abs() < tol * peak {
                return Err(OperatorError::SmallChildValue {
                    h,
                    value: hr.as_f64(),
                });
            }
            let rc = tree.cube(r);
            for x in rc.leaf_span.clone() {
                let sum: T = match tree.child_position(r, x) {
                    Some(p) => system
                        .range_for(r)
                        .map(|k| alphas.values[k] * system.function(k).child_values[p])
                        .sum(),
                    None => T::zero(),
                };
                row.push(sum / hr);
            }
        }
        values.push(row);
    }
    Symbol::variable(tree, system, values)
}

/// One block of `P^* P` in the Haar basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeComposition<T> {
    pub cube: CubeId,
    pub functions: usize,
    pub has_grandchildren: bool,
    /// Diagonal entry `(P^* P)_{hh}` for the functions on the cube (the largest
    /// deviation from the first one is in `diagonal_spread`).
    pub diagonal: T,
    pub diagonal_spread: T,
    /// `sum alpha_h'^2` over the functions on the children.
    pub closed_form: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeReport<T> {
    pub cubes: Vec<CubeComposition<T>>,
    /// Largest off-diagonal entry of `P^* P`.
    pub offdiag_full: T,
    /// Largest entry coupling functions on different cubes.
    pub offdiag_cross_cube: T,
    /// Largest off-diagonal entry coupling two functions on the same cube.
    pub offdiag_within_cube: T,
    /// Largest `|diagonal - closed_form|`.
    pub closed_form_residual: T,
    pub unimodular: bool,
    pub max_children: usize,
    /// `1 <= C(Q) <= M^2` on every cube with grandchildren; only meaningful
    /// for unimodular alphas.
    pub bracket_holds: bool,
}

/// `P^* P` column by column, from the coefficient-space operators applied to
/// the standard basis.
pub fn petermichl_compose_diag<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    alphas: &AlphaSequence<T>,
) -> Result<ComposeReport<T>, OperatorError> {
    alphas.check(system)?;
    let n = system.len();
    let mut diag = vec![T::zero(); n];
    let mut full = T::zero();
    let mut cross = T::zero();
    let mut within = T::zero();
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        let pe = petermichl_coefficients(tree, system, alphas, &e)?;
        let col = petermichl_adjoint_coefficients(tree, system, alphas, &pe)?;
        e[j] = T::zero();
        let qj = system.function(j).cube;
        for (i, &v) in col.iter().enumerate() {
            if i == j {
                diag[j] = v;
                continue;
            }
            full = fmax(full, v.abs());
            if system.function(i).cube == qj {
                within = fmax(within, v.abs());
            } else {
                cross = fmax(cross, v.abs());
            }
        }
    }
    let m = tree.stats().max_children;
    let m2 = T::from_usize_lossy(m * m);
    let mut cubes = Vec::new();
    let mut closed_residual = T::zero();
    let mut bracket = true;
    for q in tree.internal_cubes() {
        let range = system.range_for(q);
        let first = diag[range.start];
        let spread = range
            .clone()
            .fold(T::zero(), |a, h| a.max((diag[h] - first).abs()));
        let closed: T = tree
            .cube(q)
            .children
            .iter()
            .flat_map(|&r| system.range_for(r))
            .map(|k| alphas.values[k] * alphas.values[k])
            .sum();
        closed_residual = fmax(closed_residual, (first - closed).abs() + spread);
        let grand = tree.has_grandchildren(q);
        if grand {
            bracket &= first >= T::one() && first <= m2;
        }
        cubes.push(CubeComposition {
            cube: q,
            functions: range.len(),
            has_grandchildren: grand,
            diagonal: first,
            diagonal_spread: spread,
            closed_form: closed,
        });
    }
    Ok(ComposeReport {
        cubes,
        offdiag_full: full,
        offdiag_cross_cube: cross,
        offdiag_within_cube: within,
        closed_form_residual: closed_residual,
        unimodular: alphas.is_unimodular(),
        max_children: m,
        bracket_holds: bracket,
    })
}
