use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::tree::DyadicTree;

/// Real function on the leaves of a tree, in canonical leaf order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LeafFunction<T> {
    pub values: Vec<T>,
}

impl<T: Real> LeafFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self { values: vec![c; n] }
    }

    /// Indicator of a single leaf.
    pub fn indicator(n: usize, leaf: usize) -> Self {
        let mut f = Self::zeros(n);
        f.values[leaf] = T::one();
        f
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `<f, g> = sum_i f_i g_i mu(leaf_i)`.
    pub fn inner(&self, other: &Self, tree: &DyadicTree<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .zip(tree.leaf_measures())
            .map(|((&a, &b), &m)| a * b * m)
            .sum()
    }

    pub fn norm(&self, tree: &DyadicTree<T>) -> T {
        self.inner(self, tree).sqrt()
    }

    pub fn lp_norm(&self, p: T, tree: &DyadicTree<T>) -> T {
        let s: T = self
            .values
            .iter()
            .zip(tree.leaf_measures())
            .map(|(&v, &m)| v.abs().powf(p) * m)
            .sum();
        s.powf(T::one() / p)
    }

    pub fn integral(&self, tree: &DyadicTree<T>) -> T {
        self.values
            .iter()
            .zip(tree.leaf_measures())
            .map(|(&v, &m)| v * m)
            .sum()
    }

    /// Subtracts the mean so the result integrates to zero.
    pub fn mean_zero(mut self, tree: &DyadicTree<T>) -> Self {
        let mean = self.integral(tree) / tree.total_measure();
        for v in &mut self.values {
            *v = *v - mean;
        }
        self
    }

    pub fn scaled(mut self, c: T) -> Self {
        for v in &mut self.values {
            *v = *v * c;
        }
        self
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::LeafWeights;

    #[test]
    fn weighted_inner_product() {
        let t = DyadicTree::<f64>::build_uniform(1, 2, &LeafWeights::Listed(vec![0.25, 0.75]))
            .unwrap();
        let f = LeafFunction::new(vec![2.0, 1.0]);
        assert!((f.inner(&f, &t) - (4.0 * 0.25 + 0.75)).abs() < 1e-15);
        let z = f.clone().mean_zero(&t);
        assert!(z.integral(&t).abs() < 1e-15);
        assert!((f.lp_norm(1.0, &t) - 1.25).abs() < 1e-15);
    }
}
