use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dyadic_core::certify::{certify, stability_sweep, SweepTable, Verdict, SWEEP_COLUMNS};
use dyadic_core::haar::verify_haar;
use dyadic_core::tree::{save_tree, verify_dyadic};
use dyadic_core::{Coefficients, Function, Haar, HaarStrategy, Tree};
use serde::Serialize;

use crate::config::{ExperimentConfig, Seeds};

/// Resolved run: the config as given (after seed overrides), the config with
/// paths made absolute, and the output directory.
pub struct Run {
    pub config: ExperimentConfig,
    pub resolved: ExperimentConfig,
    pub out: PathBuf,
}

/// Result of a command: whether every enforced verdict passed, plus a
/// summary of what did not.
pub struct Outcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl Outcome {
    fn ok() -> Self {
        Self {
            passed: true,
            failures: Vec::new(),
        }
    }
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))?;
        write_json(&self.path(&self.config.outputs.resolved_config), &self.config)
    }

    fn build_system(&self) -> Result<(Tree, Haar)> {
        let tree = self.resolved.tree.build()?;
        let system = Haar::build(&tree, &self.resolved.haar).context("building the Haar system")?;
        Ok((tree, system))
    }
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    leaves: usize,
    cubes: usize,
    depth: usize,
    max_children: usize,
    dyadic_doubling: f64,
    growth_eps: f64,
    haar_strategy: HaarStrategy,
    haar_functions: usize,
    haar_c1: f64,
    haar_c2: f64,
    h5_constant: f64,
    haar_axioms_passed: bool,
    structure_passed: bool,
    seeds: Seeds,
    tree_file: &'a str,
    haar_file: &'a str,
}

pub fn cmd_build(run: &Run) -> Result<Outcome> {
    run.prepare()?;
    let (tree, system) = run.build_system()?;
    let outputs = &run.config.outputs;
    save_tree(&tree, &run.path(&outputs.tree))
        .with_context(|| format!("writing {}", outputs.tree))?;
    write_json(&run.path(&outputs.haar), &system.export())?;
    let structure = verify_dyadic(&tree);
    let haar = verify_haar(&tree, &system);
    let manifest = Manifest {
        leaves: tree.n_leaves(),
        cubes: tree.n_cubes(),
        depth: tree.depth(),
        max_children: structure.stats.max_children,
        dyadic_doubling: structure.stats.dyadic_doubling,
        growth_eps: structure.stats.growth_eps,
        haar_strategy: system.params().strategy,
        haar_functions: system.len(),
        haar_c1: haar.c1,
        haar_c2: haar.c2,
        h5_constant: haar.h5_constant,
        haar_axioms_passed: haar.passed(),
        structure_passed: structure.passed,
        seeds: run.config.seeds(),
        tree_file: &outputs.tree,
        haar_file: &outputs.haar,
    };
    write_json(&run.path(&outputs.manifest), &manifest)?;
    Ok(Outcome::ok())
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    name: &'a str,
    passed: bool,
    enforced: bool,
    detail: Option<&'a str>,
}

fn write_verdicts(path: &Path, verdicts: &[Verdict]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for v in verdicts {
        w.serialize(VerdictRow {
            name: &v.name,
            passed: v.passed,
            enforced: v.enforced,
            detail: v.detail.as_deref(),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn write_sweep(run: &Run, table: &SweepTable<f64>) -> Result<()> {
    let outputs = &run.config.outputs;
    write_json(&run.path(&outputs.sweep), table)?;
    let path = run.path(&outputs.sweep_csv);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SWEEP_COLUMNS)?;
    for row in &table.rows {
        w.write_record(row.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

fn sweep_failures(table: &SweepTable<f64>) -> Vec<String> {
    let mut out: Vec<String> = table
        .variation
        .iter()
        .filter(|c| c.enforced && !c.stable)
        .map(|c| format!("sweep: `{}` varies by {:.4} across depths", c.column, c.variation))
        .collect();
    for row in &table.rows {
        if row.passed == Some(false) {
            out.push(format!("sweep: certification failed at depth {}", row.depth));
        }
    }
    out
}

fn run_sweep(run: &Run) -> Result<Option<SweepTable<f64>>> {
    let Some(spec) = &run.resolved.sweep else {
        return Ok(None);
    };
    let table = stability_sweep(
        &run.resolved.tree.law()?,
        &spec.depths,
        &run.resolved.symbol,
        &run.resolved.haar,
        &run.resolved.certify,
    )?;
    write_sweep(run, &table)?;
    Ok(Some(table))
}

pub fn cmd_certify(run: &Run) -> Result<Outcome> {
    run.prepare()?;
    let (tree, system) = run.build_system()?;
    let op = run.resolved.symbol.resolve(&tree, &system)?;
    let report = certify(&tree, &system, &op, &run.resolved.certify)?;
    let outputs = &run.config.outputs;
    let path = run.path(&outputs.report);
    fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    write_verdicts(&run.path(&outputs.verdicts_csv), &report.verdicts)?;

    let mut failures: Vec<String> = report
        .failures()
        .map(|v| match &v.detail {
            Some(d) => format!("{}: {d}", v.name),
            None => v.name.clone(),
        })
        .collect();
    let mut passed = report.passed;
    if let Some(table) = run_sweep(run)? {
        passed &= table.stable;
        failures.extend(sweep_failures(&table));
    }
    Ok(Outcome { passed, failures })
}

pub fn cmd_sweep(run: &Run) -> Result<Outcome> {
    run.prepare()?;
    let table = run_sweep(run)?.context("missing field `sweep`: the sweep command needs `sweep.depths`")?;
    Ok(Outcome {
        passed: table.stable,
        failures: sweep_failures(&table),
    })
}

/// Reads newline-delimited decimal values; blank lines are skipped.
pub fn read_function(path: &Path) -> Result<Function> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("{}:{}: not a number: {l:?}", path.display(), i + 1))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Function::new(values))
}

fn write_function(path: &Path, f: &Function) -> Result<()> {
    let mut text = String::with_capacity(f.len() * 24);
    for v in &f.values {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct CoefficientPair {
    input: Coefficients<f64>,
    output: Coefficients<f64>,
}

pub fn cmd_apply(run: &Run, input: &Path) -> Result<Outcome> {
    run.prepare()?;
    let (tree, system) = run.build_system()?;
    let f = read_function(input)?;
    if f.len() != tree.n_leaves() {
        anyhow::bail!(
            "function in {} has {} values but the tree has {} leaves",
            input.display(),
            f.len(),
            tree.n_leaves()
        );
    }
    let op = run.resolved.symbol.resolve(&tree, &system)?;
    let g = op.apply(&tree, &system, &f)?;
    let outputs = &run.config.outputs;
    write_function(&run.path(&outputs.function), &g)?;
    let pair = CoefficientPair {
        input: system.analyze(&tree, &f)?,
        output: system.analyze(&tree, &g)?,
    };
    write_json(&run.path(&outputs.coefficients), &pair)?;
    Ok(Outcome::ok())
}
