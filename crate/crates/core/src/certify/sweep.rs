use serde::{Deserialize, Serialize};

use super::{certify, CertConfig, CertifyError};
use crate::haar::{HaarParams, HaarSystem};
use crate::operators::SymbolSpec;
use crate::scalar::Real;
use crate::tree::{DyadicTree, TreeLaw};

/// Columns of a sweep row, in CSV order.
pub const SWEEP_COLUMNS: [&str; 13] = [
    "depth",
    "leaves",
    "status",
    "size_c",
    "smooth_cx",
    "smooth_cy",
    "symbol_ba",
    "symbol_bb",
    "haar_lip_c",
    "growth_eps",
    "l2_norm",
    "weak_11",
    "passed",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub depth: usize,
    pub leaves: u128,
    /// Reason the depth was not certified.
    pub skipped: Option<String>,
    pub size_c: Option<T>,
    pub smooth_cx: Option<T>,
    pub smooth_cy: Option<T>,
    pub symbol_ba: Option<T>,
    pub symbol_bb: Option<T>,
    pub haar_lip_c: Option<T>,
    pub growth_eps: Option<T>,
    pub l2_norm: Option<T>,
    pub weak_11: Option<T>,
    pub passed: Option<bool>,
}

impl<T: Real> SweepRow<T> {
    pub fn csv_record(&self) -> Vec<String> {
        let f = |v: Option<T>| v.map_or(String::new(), |x| format!("{}", x.as_f64()));
        vec![
            self.depth.to_string(),
            self.leaves.to_string(),
            self.skipped
                .as_ref()
                .map_or("ok".to_string(), |s| format!("skipped: {s}")),
            f(self.size_c),
            f(self.smooth_cx),
            f(self.smooth_cy),
            f(self.symbol_ba),
            f(self.symbol_bb),
            f(self.haar_lip_c),
            f(self.growth_eps),
            f(self.l2_norm),
            f(self.weak_11),
            self.passed.map_or(String::new(), |p| p.to_string()),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnVariation<T> {
    pub column: String,
    pub variation: T,
    pub stable: bool,
    /// Whether the column counts towards [`SweepTable::stable`]; the norm
    /// probes are lower estimates and are reported only.
    pub enforced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable<T> {
    pub rows: Vec<SweepRow<T>>,
    pub variation: Vec<ColumnVariation<T>>,
    /// Every certified row passed and every enforced column varied less than
    /// the configured tolerance.
    pub stable: bool,
}

/// `(max - min) / max` of the values; 0 for an empty or all-zero column.
pub fn relative_variation<T: Real>(values: &[T]) -> T {
    let hi = values.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
    let lo = values.iter().fold(T::infinity(), |a, &v| a.min(v));
    if values.is_empty() || hi == T::zero() {
        T::zero()
    } else {
        (hi - lo) / hi.abs()
    }
}

/// Certifies the operator on the tree `law` builds at each depth. Depths
/// whose leaf count exceeds the dense kernel limit are marked skipped.
pub fn stability_sweep<T: Real>(
    law: &TreeLaw,
    depths: &[usize],
    symbol: &SymbolSpec,
    haar: &HaarParams,
    config: &CertConfig,
) -> Result<SweepTable<T>, CertifyError> {
    if depths.is_empty() || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CertifyError::UnsortedDepths);
    }
    let mut rows = Vec::with_capacity(depths.len());
    for &depth in depths {
        let bound = law.max_leaves(depth);
        if bound > config.dense_limit as u128 {
            rows.push(SweepRow {
                depth,
                leaves: bound,
                skipped: Some(format!("up to {bound} leaves exceed the dense limit {}", config.dense_limit)),
                size_c: None,
                smooth_cx: None,
                smooth_cy: None,
                symbol_ba: None,
                symbol_bb: None,
                haar_lip_c: None,
                growth_eps: None,
                l2_norm: None,
                weak_11: None,
                passed: None,
            });
            continue;
        }
        let tree: DyadicTree<T> = law.build(depth)?;
        let system = HaarSystem::build(&tree, haar)?;
        let op = symbol.resolve(&tree, &system)?;
        let r = certify(&tree, &system, &op, config)?;
        rows.push(SweepRow {
            depth,
            leaves: tree.n_leaves() as u128,
            skipped: None,
            size_c: r.size_c(),
            smooth_cx: r.smooth_c().map(|s| s.0),
            smooth_cy: r.smooth_c().map(|s| s.1),
            symbol_ba: r.symbol.as_ref().map(|s| s.symbol_ba),
            symbol_bb: r.symbol.as_ref().map(|s| s.symbol_bb),
            haar_lip_c: r.haar_lip_c,
            growth_eps: Some(r.growth_eps),
            l2_norm: r.norms.as_ref().map(|n| n.l2.estimate),
            weak_11: r.norms.as_ref().map(|n| n.weak_11.estimate),
            passed: Some(r.passed),
        });
    }

    let tol = T::lit(config.stability_tol);
    type Getter<T> = fn(&SweepRow<T>) -> Option<T>;
    let columns: [(&str, bool, Getter<T>); 9] = [
        ("size_c", true, |r| r.size_c),
        ("smooth_cx", true, |r| r.smooth_cx),
        ("smooth_cy", true, |r| r.smooth_cy),
        ("symbol_ba", true, |r| r.symbol_ba),
        ("symbol_bb", true, |r| r.symbol_bb),
        ("haar_lip_c", true, |r| r.haar_lip_c),
        ("growth_eps", true, |r| r.growth_eps),
        ("l2_norm", false, |r| r.l2_norm),
        ("weak_11", false, |r| r.weak_11),
    ];
    let variation: Vec<ColumnVariation<T>> = columns
        .iter()
        .filter_map(|&(name, enforced, get)| {
            let vals: Vec<T> = rows.iter().filter_map(get).collect();
            if vals.is_empty() {
                return None;
            }
            let variation = relative_variation(&vals);
            Some(ColumnVariation {
                column: name.to_string(),
                variation,
                stable: variation < tol,
                enforced,
            })
        })
        .collect();
    let stable = variation.iter().all(|c| c.stable || !c.enforced)
        && rows.iter().all(|r| r.passed != Some(false));
    Ok(SweepTable {
        rows,
        variation,
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::LeafWeights;

    #[test]
    fn variation_by_hand() {
        assert_eq!(relative_variation(&[2.0, 1.0, 1.5]), 0.5);
        assert_eq!(relative_variation::<f64>(&[]), 0.0);
        assert_eq!(relative_variation(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn identity_sweep_has_zero_bb_and_single_depth_one_row() {
        let law = TreeLaw::Uniform {
            branching: 2,
            weights: LeafWeights::Equal,
        };
        let t: SweepTable<f64> = stability_sweep(
            &law,
            &[1],
            &SymbolSpec::Identity,
            &HaarParams::default(),
            &CertConfig::default(),
        )
        .unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].smooth_cx, Some(0.0));
        assert_eq!(t.rows[0].symbol_bb, Some(0.0));
        assert!(matches!(
            stability_sweep::<f64>(&law, &[3, 2], &SymbolSpec::Identity, &HaarParams::default(), &CertConfig::default()),
            Err(CertifyError::UnsortedDepths)
        ));
    }
}
