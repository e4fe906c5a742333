use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dyadic_core::certify::CertConfig;
use dyadic_core::operators::SymbolSpec;
use dyadic_core::tree::{load_tree, LeafWeights, LoadOptions, TreeLaw, WeightLaw};
use dyadic_core::{HaarParams, Tree};
use serde::{Deserialize, Serialize};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "DYADIC_OUT_DIR";

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    #[default]
    Equal,
    Listed,
    Cascade,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TreeSpec {
    Uniform {
        depth: usize,
        branching: usize,
        #[serde(default)]
        leaf_weight_rule: WeightRule,
        /// Leaf weights for `listed`, split ratios for `cascade`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        leaf_weights: Option<Vec<f64>>,
    },
    Random {
        seed: u64,
        depth: usize,
        branching: (usize, usize),
        #[serde(default = "equal_law")]
        weight_law: WeightLaw,
        #[serde(default)]
        early_leaf_prob: f64,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        options: LoadOptions,
    },
}

fn equal_law() -> WeightLaw {
    WeightLaw::Equal
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Depths to build the tree law at; the tree's own `depth` is ignored.
    pub depths: Vec<usize>,
}

/// Output file names, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub tree: String,
    pub haar: String,
    pub manifest: String,
    pub report: String,
    pub verdicts_csv: String,
    pub sweep: String,
    pub sweep_csv: String,
    pub function: String,
    pub coefficients: String,
    pub resolved_config: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: None,
            tree: "tree.json".into(),
            haar: "haar.json".into(),
            manifest: "manifest.json".into(),
            report: "report.json".into(),
            verdicts_csv: "verdicts.csv".into(),
            sweep: "sweep.json".into(),
            sweep_csv: "sweep.csv".into(),
            function: "output.txt".into(),
            coefficients: "coefficients.json".into(),
            resolved_config: "config.json".into(),
        }
    }
}

fn identity() -> SymbolSpec {
    SymbolSpec::Identity
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tree: TreeSpec,
    #[serde(default)]
    pub haar: HaarParams,
    #[serde(default = "identity")]
    pub symbol: SymbolSpec,
    #[serde(default)]
    pub certify: CertConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.leaf_weights()?;
        if let Some(sweep) = &self.sweep {
            if matches!(self.tree, TreeSpec::File { .. }) {
                bail!("invalid field `sweep`: a depth sweep needs a `uniform` or `random` tree");
            }
            if sweep.depths.is_empty() || sweep.depths.windows(2).any(|w| w[0] >= w[1]) {
                bail!("invalid field `sweep.depths`: must be nonempty and strictly increasing");
            }
        }
        Ok(())
    }

    /// Replaces every seed in the config.
    pub fn override_seed(&mut self, seed: u64) {
        self.haar.seed = seed;
        self.certify.seed = seed;
        if let TreeSpec::Random { seed: s, .. } = &mut self.tree {
            *s = seed;
        }
    }

    /// Makes file paths relative to `base`, the directory of the config file.
    pub fn rebase(&self, base: &Path) -> Self {
        let mut out = self.clone();
        if let TreeSpec::File { path, .. } = &mut out.tree {
            *path = base.join(&*path);
        }
        if let SymbolSpec::VariableFile { path } = &mut out.symbol {
            *path = base.join(&*path);
        }
        out
    }

    /// Every seed the run depends on.
    pub fn seeds(&self) -> Seeds {
        Seeds {
            tree: match self.tree {
                TreeSpec::Random { seed, .. } => Some(seed),
                _ => None,
            },
            haar: self.haar.seed,
            certify: self.certify.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<u64>,
    pub haar: u64,
    pub certify: u64,
}

impl TreeSpec {
    fn leaf_weights(&self) -> Result<LeafWeights> {
        let TreeSpec::Uniform {
            leaf_weight_rule,
            leaf_weights,
            ..
        } = self
        else {
            return Ok(LeafWeights::Equal);
        };
        let need = |rule: &str| -> Result<Vec<f64>> {
            match leaf_weights {
                Some(w) => Ok(w.clone()),
                None => bail!(
                    "invalid field `tree.leaf_weight_rule`: rule `{rule}` requires `tree.leaf_weights`"
                ),
            }
        };
        Ok(match leaf_weight_rule {
            WeightRule::Equal => {
                if leaf_weights.is_some() {
                    bail!("invalid field `tree.leaf_weights`: not used by `leaf_weight_rule` `equal`");
                }
                LeafWeights::Equal
            }
            WeightRule::Listed => LeafWeights::Listed(need("listed")?),
            WeightRule::Cascade => LeafWeights::Cascade(need("cascade")?),
        })
    }

    pub fn law(&self) -> Result<TreeLaw> {
        Ok(match self {
            TreeSpec::Uniform { branching, .. } => TreeLaw::Uniform {
                branching: *branching,
                weights: self.leaf_weights()?,
            },
            TreeSpec::Random {
                seed,
                branching,
                weight_law,
                early_leaf_prob,
                ..
            } => TreeLaw::Random {
                seed: *seed,
                branching: *branching,
                weight_law: weight_law.clone(),
                early_leaf_prob: *early_leaf_prob,
            },
            TreeSpec::File { .. } => bail!("a tree file has no depth law"),
        })
    }

    pub fn build(&self) -> Result<Tree> {
        match self {
            TreeSpec::Uniform { depth, .. } | TreeSpec::Random { depth, .. } => {
                self.law()?.build(*depth).context("invalid field `tree`")
            }
            TreeSpec::File { path, options } => {
                load_tree(path, *options).with_context(|| format!("loading tree {}", path.display()))
            }
        }
    }
}
