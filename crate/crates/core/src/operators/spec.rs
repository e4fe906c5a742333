use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    apply_multiplier, petermichl_apply, petermichl_symbol, AlphaSequence, OperatorError, Symbol,
};
use crate::function::LeafFunction;
use crate::haar::HaarSystem;
use crate::scalar::Real;
use crate::tree::{CubeId, DyadicTree};

/// Value attached to the Haar function `(cube, index)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub cube: CubeId,
    pub index: usize,
    pub value: f64,
}

/// Alpha sequence: a preset name or explicit entries over a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    /// `plus-minus`, `ones`, `random:<seed>` or `random-signs:<seed>`.
    Preset(String),
    Explicit {
        #[serde(default)]
        default: f64,
        entries: Vec<Entry>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SymbolSpec {
    Identity,
    Zero,
    Constant {
        #[serde(default)]
        default: f64,
        #[serde(default)]
        entries: Vec<Entry>,
    },
    /// `eta_h = values[level of the cube of h]`, the last value repeating.
    ByLevel { values: Vec<f64> },
    Petermichl { alphas: AlphaSpec },
    /// JSON file holding, per Haar function, the symbol values on the leaves
    /// of its cube.
    VariableFile { path: PathBuf },
}

/// A resolved operator. Petermichl operators keep their alphas so the fast
/// coefficient-space path stays available next to the equivalent symbol.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind<T> {
    Multiplier(Symbol<T>),
    Petermichl {
        alphas: AlphaSequence<T>,
        symbol: Symbol<T>,
    },
}

impl<T: Real> OperatorKind<T> {
    pub fn symbol(&self) -> &Symbol<T> {
        match self {
            OperatorKind::Multiplier(s) => s,
            OperatorKind::Petermichl { symbol, .. } => symbol,
        }
    }

    pub fn alphas(&self) -> Option<&AlphaSequence<T>> {
        match self {
            OperatorKind::Multiplier(_) => None,
            OperatorKind::Petermichl { alphas, .. } => Some(alphas),
        }
    }

    pub fn apply(
        &self,
        tree: &DyadicTree<T>,
        system: &HaarSystem<T>,
        f: &LeafFunction<T>,
    ) -> Result<LeafFunction<T>, OperatorError> {
        match self {
            OperatorKind::Multiplier(s) => apply_multiplier(tree, system, s, f),
            OperatorKind::Petermichl { alphas, .. } => petermichl_apply(tree, system, alphas, f),
        }
    }
}

fn lookup<T: Real>(
    tree: &DyadicTree<T>,
    system: &HaarSystem<T>,
    default: f64,
    entries: &[Entry],
) -> Result<Vec<T>, OperatorError> {
    let mut values = vec![T::lit(default); system.len()];
    for e in entries {
        let range = if e.cube.0 < tree.n_cubes() {
            system.range_for(e.cube)
        } else {
            0..0
        };
        if e.index >= range.len() {
            return Err(OperatorError::UnknownEntry {
                cube: e.cube,
                index: e.index,
            });
        }
        values[range.start + e.index] = T::lit(e.value);
    }
    Ok(values)
}

impl AlphaSpec {
    pub fn resolve<T: Real>(
        &self,
        tree: &DyadicTree<T>,
        system: &HaarSystem<T>,
    ) -> Result<AlphaSequence<T>, OperatorError> {
        match self {
            AlphaSpec::Preset(name) => {
                let n = system.len();
                let seed = |rest: &str| {
                    rest.parse::<u64>()
                        .map_err(|_| OperatorError::UnknownPreset(name.clone()))
                };
                match name.as_str() {
                    "plus-minus" => Ok(AlphaSequence::plus_minus(tree, system)),
                    "ones" => Ok(AlphaSequence::ones(n)),
                    other => {
                        if let Some(rest) = other.strip_prefix("random-signs:") {
                            Ok(AlphaSequence::random_signs(n, seed(rest)?))
                        } else if let Some(rest) = other.strip_prefix("random:") {
                            Ok(AlphaSequence::random(n, seed(rest)?))
                        } else {
                            Err(OperatorError::UnknownPreset(name.clone()))
                        }
                    }
                }
            }
            AlphaSpec::Explicit { default, entries } => {
                AlphaSequence::new(lookup(tree, system, *default, entries)?)
            }
        }
    }
}

impl SymbolSpec {
    pub fn resolve<T: Real>(
        &self,
        tree: &DyadicTree<T>,
        system: &HaarSystem<T>,
    ) -> Result<OperatorKind<T>, OperatorError> {
        let symbol = match self {
            SymbolSpec::Identity => Symbol::identity(system),
            SymbolSpec::Zero => Symbol::zero(system),
            SymbolSpec::Constant { default, entries } => {
                Symbol::constant(lookup(tree, system, *default, entries)?)?
            }
            SymbolSpec::ByLevel { values } => {
                let last = values.last().copied().unwrap_or(0.0);
                Symbol::constant(
                    system
                        .functions()
                        .iter()
                        .map(|f| {
                            let level = tree.cube(f.cube).level;
                            T::lit(values.get(level).copied().unwrap_or(last))
                        })
                        .collect(),
                )?
            }
            SymbolSpec::Petermichl { alphas } => {
                let alphas = alphas.resolve(tree, system)?;
                let symbol = petermichl_symbol(tree, system, &alphas)?;
                return Ok(OperatorKind::Petermichl { alphas, symbol });
            }
            SymbolSpec::VariableFile { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| OperatorError::File {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
                let rows: Vec<Vec<f64>> =
                    serde_json::from_str(&text).map_err(|e| OperatorError::File {
                        path: path.clone(),
                        reason: e.to_string(),
                    })?;
                let rows = rows
                    .into_iter()
                    .map(|r| r.into_iter().map(T::lit).collect())
                    .collect();
                Symbol::variable(tree, system, rows)?
            }
        };
        Ok(OperatorKind::Multiplier(symbol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::HaarParams;
    use crate::tree::LeafWeights;

    #[test]
    fn specs_parse_and_resolve() {
        let t = DyadicTree::<f64>::build_uniform(3, 2, &LeafWeights::Equal).unwrap();
        let h = HaarSystem::build(&t, &HaarParams::default()).unwrap();
        let spec: SymbolSpec =
            serde_json::from_str(r#"{"kind":"petermichl","alphas":"plus-minus"}"#).unwrap();
        let op = spec.resolve(&t, &h).unwrap();
        assert!(op.alphas().is_some());
        let spec: SymbolSpec =
            serde_json::from_str(r#"{"kind":"by_level","values":[1,-1]}"#).unwrap();
        match spec.resolve(&t, &h).unwrap() {
            OperatorKind::Multiplier(s) => {
                assert_eq!(s.eta(&t, &h, 0, 0), 1.0);
                assert_eq!(s.eta(&t, &h, 0, 6), -1.0);
            }
            _ => panic!(),
        }
        let spec: SymbolSpec = serde_json::from_str(
            r#"{"kind":"constant","default":2,"entries":[{"cube":0,"index":0,"value":5}]}"#,
        )
        .unwrap();
        let s = spec.resolve(&t, &h).unwrap();
        assert_eq!(s.symbol().bound(), 5.0);
        let bad = AlphaSpec::Preset("random:x".into()).resolve(&t, &h);
        assert!(matches!(bad, Err(OperatorError::UnknownPreset(_))));
        let missing = SymbolSpec::Constant {
            default: 1.0,
            entries: vec![Entry {
                cube: CubeId(0),
                index: 1,
                value: 1.0,
            }],
        };
        assert!(matches!(
            missing.resolve(&t, &h),
            Err(OperatorError::UnknownEntry { .. })
        ));
    }
}
