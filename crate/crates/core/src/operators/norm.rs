use serde::{Deserialize, Serialize};

use super::{apply_multiplier, apply_multiplier_adjoint, random_mean_zero, OperatorError, Symbol};
use crate::haar::HaarSystem;
use crate::scalar::Real;
use crate::tree::DyadicTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate<T> {
    pub estimate: T,
    /// `sup |eta|`.
    pub bound_b: T,
    pub exceeds_bound: bool,
    pub iterations: usize,
}

/// Power iteration on `T^* T` over the mean-zero functions. The start vector
/// is a seeded random element of the Haar span; iteration stops early once
/// the estimate is stable to machine precision.
pub fn l2_norm_estimate<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
    iterations: usize,
    seed: u64,
) -> Result<NormEstimate<T>, OperatorError> {
    if iterations == 0 {
        return Err(OperatorError::NoIterations);
    }
    let bound = symbol.bound();
    let mut v = random_mean_zero(tree, system, seed);
    let mut estimate = T::zero();
    let mut used = 0;
    let norm = v.norm(tree);
    if norm > T::zero() {
        v = v.scaled(T::one() / norm);
        for it in 1..=iterations {
            used = it;
            let tv = apply_multiplier(tree, system, symbol, &v)?;
            let next = tv.norm(tree);
            let w = apply_multiplier_adjoint(tree, system, symbol, &tv)?;
            let wn = w.norm(tree);
            let settled = (next - estimate).abs() <= T::epsilon() * T::lit(4.0) * next;
            estimate = next;
            if wn == T::zero() || settled {
                break;
            }
            v = w.scaled(T::one() / wn);
        }
    }
    Ok(NormEstimate {
        estimate,
        bound_b: bound,
        exceeds_bound: estimate > bound * (T::one() + T::lit(1e-9)),
        iterations: used,
    })
}
