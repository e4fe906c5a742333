//! Multiplier operators `T f(x) = sum_h eta(x, h) <f, h> h(x)`, their kernels,
//! and Petermichl shift operators.
//!
//! The scaling component of `f` is always dropped: every operator here maps
//! into the mean-zero functions, matching the kernel `K = sum_h eta h (x) h`.

mod norm;
mod petermichl;
mod spec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function::LeafFunction;
use crate::haar::{Coefficients, HaarError, HaarSystem};
use crate::scalar::{fmax, Real};
use crate::tree::{CubeId, DyadicTree};

pub use norm::{l2_norm_estimate, NormEstimate};
pub use petermichl::{
    petermichl_adjoint_apply, petermichl_adjoint_coefficients, petermichl_apply,
    petermichl_coefficients, petermichl_compose_diag, petermichl_symbol, AlphaSequence,
    ComposeReport, CubeComposition,
};
pub use spec::{AlphaSpec, Entry, OperatorKind, SymbolSpec};

pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("symbol has {got} entries but the Haar system has {expected} functions")]
    SymbolLength { expected: usize, got: usize },
    #[error("variable symbol entry for function {h} has {got} values, cube {cube} has {expected} leaves")]
    VariableEntry {
        h: usize,
        cube: CubeId,
        expected: usize,
        got: usize,
    },
    #[error("symbol value for function {h} is not finite")]
    NonFinite { h: usize },
    #[error("alpha sequence has {got} entries but the Haar system has {expected} functions")]
    AlphaLength { expected: usize, got: usize },
    #[error("{leaves} leaves exceed the dense kernel limit of {limit}")]
    DenseLimit { leaves: usize, limit: usize },
    #[error("Haar function {h} has child value {value} below the nonvanishing threshold")]
    SmallChildValue { h: usize, value: f64 },
    #[error("no entry ({cube}, {index}) in the Haar system")]
    UnknownEntry { cube: CubeId, index: usize },
    #[error("unknown alpha preset `{0}` (expected plus-minus, ones, random:<seed> or random-signs:<seed>)")]
    UnknownPreset(String),
    #[error("cannot read symbol file {path}: {reason}")]
    File {
        path: std::path::PathBuf,
        reason: String,
    },
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error(transparent)]
    Haar(#[from] HaarError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum SymbolValues<T> {
    /// One value per Haar function.
    Constant(Vec<T>),
    /// Per Haar function, one value per leaf of its cube (canonical order).
    Variable(Vec<Vec<T>>),
}

/// Multiplier symbol `eta(x, h)`; zero for `x` outside the cube of `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Symbol<T> {
    values: SymbolValues<T>,
    bound: T,
}

impl<T: Real> Symbol<T> {
    pub fn constant(values: Vec<T>) -> Result<Self, OperatorError> {
        if let Some(h) = values.iter().position(|v| !v.is_finite()) {
            return Err(OperatorError::NonFinite { h });
        }
        let bound = values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        Ok(Self {
            values: SymbolValues::Constant(values),
            bound,
        })
    }

    pub fn filled(system: &HaarSystem<T>, value: T) -> Self {
        Self::constant(vec![value; system.len()]).expect("finite fill value")
    }

    pub fn identity(system: &HaarSystem<T>) -> Self {
        Self::filled(system, T::one())
    }

    pub fn zero(system: &HaarSystem<T>) -> Self {
        Self::filled(system, T::zero())
    }

    pub fn variable(
        tree: &DyadicTree<T>,
        system: &HaarSystem<T>,
        values: Vec<Vec<T>>,
    ) -> Result<Self, OperatorError> {
        if values.len() != system.len() {
            return Err(OperatorError::SymbolLength {
                expected: system.len(),
                got: values.len(),
            });
        }
        let mut bound = T::zero();
        for (h, (f, row)) in system.functions().iter().zip(&values).enumerate() {
            let span = tree.cube(f.cube).leaf_span.clone();
            if row.len() != span.len() {
                return Err(OperatorError::VariableEntry {
                    h,
                    cube: f.cube,
                    expected: span.len(),
                    got: row.len(),
                });
            }
            for v in row {
                if !v.is_finite() {
                    return Err(OperatorError::NonFinite { h });
                }
                bound = bound.max(v.abs());
            }
        }
        Ok(Self {
            values: SymbolValues::Variable(values),
            bound,
        })
    }

    pub fn values(&self) -> &SymbolValues<T> {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.values, SymbolValues::Constant(_))
    }

    /// Cached `sup |eta|`.
    pub fn bound(&self) -> T {
        self.bound
    }

    pub fn len(&self) -> usize {
        match &self.values {
            SymbolValues::Constant(v) => v.len(),
            SymbolValues::Variable(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `eta(x, h)` for `x` in the cube of `h`; the caller guarantees membership.
    #[inline]
    pub(crate) fn inside(&self, span_start: usize, h: usize, x: usize) -> T {
        match &self.values {
            SymbolValues::Constant(v) => v[h],
            SymbolValues::Variable(v) => v[h][x - span_start],
        }
    }

    /// `eta(x, h)`, zero off the cube of `h` for variable symbols. A constant
    /// symbol does not depend on `x` at all.
    pub fn eta(&self, tree: &DyadicTree<T>, system: &HaarSystem<T>, x: usize, h: usize) -> T {
        match &self.values {
            SymbolValues::Constant(v) => v[h],
            SymbolValues::Variable(v) => {
                let span = &tree.cube(system.function(h).cube).leaf_span;
                if span.contains(&x) {
                    v[h][x - span.start]
                } else {
                    T::zero()
                }
            }
        }
    }

    fn check(&self, system: &HaarSystem<T>) -> Result<(), OperatorError> {
        if self.len() == system.len() {
            Ok(())
        } else {
            Err(OperatorError::SymbolLength {
                expected: system.len(),
                got: self.len(),
            })
        }
    }
}

/// `T_eta f`.
///
/// Constant symbols go through coefficient space; variable symbols are summed
/// per leaf over the cubes containing it.
pub fn apply_multiplier<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
    f: &LeafFunction<T>,
) -> Result<LeafFunction<T>, OperatorError> {
    symbol.check(system)?;
    let mut coeffs = system.analyze(tree, f)?;
    coeffs.scaling = T::zero();
    match &symbol.values {
        SymbolValues::Constant(eta) => {
            for (c, &e) in coeffs.detail.iter_mut().zip(eta) {
                *c = *c * e;
            }
            Ok(system.synthesize(tree, &coeffs)?)
        }
        SymbolValues::Variable(_) => {
            let values = (0..tree.n_leaves())
                .into_par_iter()
                .map(|x| {
                    let mut acc = T::zero();
                    let mut below: Option<CubeId> = None;
                    for q in tree.ancestors(x) {
                        if let Some(child) = below {
                            let pos = tree.cube(child).position;
                            let start = tree.cube(q).leaf_span.start;
                            for h in system.range_for(q) {
                                let hx = system.function(h).child_values[pos];
                                acc = acc + symbol.inside(start, h, x) * coeffs.detail[h] * hx;
                            }
                        }
                        below = Some(q);
                    }
                    acc
                })
                .collect();
            Ok(LeafFunction::new(values))
        }
    }
}

/// `T_eta^* g = sum_h <eta(., h) h, g> h`.
pub fn apply_multiplier_adjoint<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
    g: &LeafFunction<T>,
) -> Result<LeafFunction<T>, OperatorError> {
    symbol.check(system)?;
    system.check_tree(tree)?;
    if g.len() != tree.n_leaves() {
        return Err(HaarError::LengthMismatch {
            expected: tree.n_leaves(),
            got: g.len(),
        }
        .into());
    }
    let mu = tree.leaf_measures();
    let detail = system
        .functions()
        .par_iter()
        .enumerate()
        .map(|(h, f)| {
            let cube = tree.cube(f.cube);
            let start = cube.leaf_span.start;
            let mut acc = T::zero();
            for (&child, &v) in cube.children.iter().zip(&f.child_values) {
                for x in tree.cube(child).leaf_span.clone() {
                    acc = acc + symbol.inside(start, h, x) * v * g.values[x] * mu[x];
                }
            }
            acc
        })
        .collect();
    Ok(system.synthesize(
        tree,
        &Coefficients {
            scaling: T::zero(),
            detail,
        },
    )?)
}

/// Dense kernel, row-major: `entries[x * n + y] = K(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.entries[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.entries[x * self.n..(x + 1) * self.n]
    }

    /// `(K f)(x) = sum_y K(x, y) f(y) mu(y)`.
    pub fn apply(&self, tree: &DyadicTree<T>, f: &LeafFunction<T>) -> LeafFunction<T> {
        let mu = tree.leaf_measures();
        LeafFunction::new(
            (0..self.n)
                .map(|x| {
                    self.row(x)
                        .iter()
                        .zip(&f.values)
                        .zip(mu)
                        .map(|((&k, &v), &m)| k * v * m)
                        .sum()
                })
                .collect(),
        )
    }

    /// `max |K(x, y) - K(y, x)|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for x in 0..self.n {
            for y in x + 1..self.n {
                worst = fmax(worst, (self.get(x, y) - self.get(y, x)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }
}

pub fn assemble_kernel<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
) -> Result<KernelMatrix<T>, OperatorError> {
    assemble_kernel_with_limit(tree, system, symbol, DENSE_LIMIT)
}

/// `K(x, y) = sum_h eta(x, h) h(x) h(y)`.
///
/// Row `x` only involves the Haar functions of the cubes containing `x`; for
/// each such cube the row is constant on every child, so it is filled child
/// by child.
pub fn assemble_kernel_with_limit<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
    limit: usize,
) -> Result<KernelMatrix<T>, OperatorError> {
    symbol.check(system)?;
    system.check_tree(tree)?;
    let n = tree.n_leaves();
    if n > limit {
        return Err(OperatorError::DenseLimit { leaves: n, limit });
    }
    let mut entries = vec![T::zero(); n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(x, row)| {
        let mut below: Option<CubeId> = None;
        for q in tree.ancestors(x) {
            if let Some(child) = below {
                let cube = tree.cube(q);
                let pos = tree.cube(child).position;
                for (r, &rc) in cube.children.iter().enumerate() {
                    let mut v = T::zero();
                    for h in system.range_for(q) {
                        let f = system.function(h);
                        v = v + symbol.inside(cube.leaf_span.start, h, x)
                            * f.child_values[pos]
                            * f.child_values[r];
                    }
                    for y in tree.cube(rc).leaf_span.clone() {
                        row[y] = row[y] + v;
                    }
                }
            }
            below = Some(q);
        }
    });
    Ok(KernelMatrix { n, entries })
}

/// Random mean-zero function in the Haar span: i.i.d. standard normal detail
/// coefficients, no scaling component.
pub fn random_mean_zero<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    seed: u64,
) -> LeafFunction<T> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detail = (0..system.len())
        .map(|_| T::lit(StandardNormal.sample(&mut rng)))
        .collect();
    system
        .synthesize(
            tree,
            &Coefficients {
                scaling: T::zero(),
                detail,
            },
        )
        .expect("system matches tree")
}
