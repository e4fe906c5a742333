use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::function::LeafFunction;
use crate::haar::HaarSystem;
use crate::operators::{apply_multiplier, Symbol};
use crate::scalar::{fmax, Real};
use crate::tree::DyadicTree;

/// Cap on the number of leaf indicators and Haar functions tried as extreme
/// candidates; larger trees use an evenly spaced subset.
pub const CANDIDATE_LIMIT: usize = 4096;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Random,
    LeafIndicator,
    HaarFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult<T> {
    pub estimate: T,
    pub tested: usize,
    /// Kind of test function that attained the estimate.
    pub attained_by: Option<Candidate>,
}

fn spaced(n: usize) -> impl Iterator<Item = usize> {
    let step = n.div_ceil(CANDIDATE_LIMIT).max(1);
    (0..n).step_by(step)
}

/// Test functions in a fixed order: `trials` random functions with i.i.d.
/// standard normal leaf values made mean-zero, then leaf indicators minus
/// their means, then Haar functions.
fn candidates<'a, T: Real>(
    tree: &'a DyadicTree<T>,
    system: &'a HaarSystem<T>,
    trials: usize,
    seed: u64,
    mean_zero_atoms: bool,
) -> impl Iterator<Item = (Candidate, LeafFunction<T>)> + 'a {
    let n = tree.n_leaves();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = (0..trials).map(move |_| {
        let values = (0..n).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect();
        (Candidate::Random, LeafFunction::new(values).mean_zero(tree))
    });
    let atoms = spaced(n).map(move |x| {
        let f = LeafFunction::indicator(n, x);
        let f = if mean_zero_atoms { f.mean_zero(tree) } else { f };
        (Candidate::LeafIndicator, f)
    });
    let haar = spaced(system.len()).map(move |h| (Candidate::HaarFunction, system.to_leaf_function(tree, h)));
    random.chain(atoms).chain(haar)
}

/// Lower estimate of the `L^p` operator norm, `p > 1`, as the best ratio
/// `||T f||_p / ||f||_p` over the candidates.
pub fn empirical_lp_probe<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
    p: T,
    trials: usize,
    seed: u64,
) -> Result<ProbeResult<T>, CertifyError> {
    if p.is_nan() || p <= T::one() || !p.is_finite() {
        return Err(CertifyError::InvalidExponent(p.as_f64()));
    }
    let mut best = T::zero();
    let mut attained = None;
    let mut tested = 0;
    for (kind, f) in candidates(tree, system, trials, seed, true) {
        let norm = f.lp_norm(p, tree);
        if norm == T::zero() {
            continue;
        }
        tested += 1;
        let ratio = apply_multiplier(tree, system, symbol, &f)?.lp_norm(p, tree) / norm;
        if ratio > best {
            best = ratio;
            attained = Some(kind);
        }
    }
    Ok(ProbeResult {
        estimate: best,
        tested,
        attained_by: attained,
    })
}

/// `sup_lambda lambda mu{|g| > lambda}` for a function on the leaves.
pub fn weak_quasi_norm<T: Real>(tree: &DyadicTree<T>, g: &LeafFunction<T>) -> T {
    let mu = tree.leaf_measures();
    let mut pairs: Vec<(T, T)> = g.values.iter().map(|v| v.abs()).zip(mu.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite values"));
    // As lambda increases to a_k the level set is every leaf with |g| >= a_k.
    let mut best = T::zero();
    let mut mass = T::zero();
    let mut i = 0;
    while i < pairs.len() {
        let level = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == level {
            mass = mass + pairs[i].1;
            i += 1;
        }
        best = fmax(best, level * mass);
    }
    best
}

/// Estimate of the weak-(1,1) constant, `sup lambda mu{|T f| > lambda} / ||f||_1`
/// over the candidates; leaf indicators enter as they are (near-atoms).
pub fn weak_11_probe<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    symbol: &Symbol<T>,
    trials: usize,
    seed: u64,
) -> Result<ProbeResult<T>, CertifyError> {
    let mut best = T::zero();
    let mut attained = None;
    let mut tested = 0;
    for (kind, f) in candidates(tree, system, trials, seed, false) {
        let norm = f.lp_norm(T::one(), tree);
        if norm == T::zero() {
            continue;
        }
        tested += 1;
        let ratio = weak_quasi_norm(tree, &apply_multiplier(tree, system, symbol, &f)?) / norm;
        if ratio > best {
            best = ratio;
            attained = Some(kind);
        }
    }
    Ok(ProbeResult {
        estimate: best,
        tested,
        attained_by: attained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::HaarParams;
    use crate::tree::LeafWeights;

    fn setup() -> (DyadicTree<f64>, HaarSystem<f64>) {
        let t = DyadicTree::<f64>::build_uniform(4, 2, &LeafWeights::Equal).unwrap();
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        (t, h)
    }

    #[test]
    fn zero_symbol_probes_vanish() {
        let (t, h) = setup();
        let z = Symbol::zero(&h);
        assert_eq!(empirical_lp_probe(&t, &h, &z, 2.0, 10, 0).unwrap().estimate, 0.0);
        assert_eq!(weak_11_probe(&t, &h, &z, 10, 0).unwrap().estimate, 0.0);
    }

    #[test]
    fn p_one_is_rejected() {
        let (t, h) = setup();
        assert!(matches!(
            empirical_lp_probe(&t, &h, &Symbol::identity(&h), 1.0, 10, 0),
            Err(CertifyError::InvalidExponent(_))
        ));
    }

    #[test]
    fn identity_weak_ratio_is_at_most_one() {
        let (t, h) = setup();
        let r = weak_11_probe(&t, &h, &Symbol::identity(&h), 50, 1).unwrap();
        assert!(r.estimate <= 1.0 + 1e-12, "{r:?}");
    }

    #[test]
    fn weak_quasi_norm_by_hand() {
        let t = DyadicTree::<f64>::build_uniform(2, 2, &LeafWeights::Equal).unwrap();
        let g = LeafFunction::new(vec![4.0, 1.0, 1.0, 0.0]);
        // lambda -> 4: 4 * 1/4 = 1; lambda -> 1: 1 * 3/4
        assert_eq!(weak_quasi_norm(&t, &g), 1.0);
    }
}
