//! Scenario runner behind the `weylpair` binary.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use weylpair_core::commutant::{self, RepGens, KERNEL_TOL, WITNESS_TOL};
use weylpair_core::counterexample as cx;
use weylpair_core::dilation::{self, CovariantRep};
use weylpair_core::lattice::{box_points, enumerate_pspaces};
use weylpair_core::linalg::CMatrix;
use weylpair_core::pair::{self, SafeRegion, WeylPair};
use weylpair_core::{CommutantError, CounterexampleError, DecomposeError, DilationError, LatticeError, PairError};

pub mod scenario;

pub use scenario::{LoadedScenario, Scenario};

/// Lower bound on `‖[E_a, E_b]‖` that counts as a non-commuting witness.
pub const NONCOMMUTING_FLOOR: f64 = 0.1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Commutant(#[from] CommutantError),
    #[error(transparent)]
    Dilation(#[from] DilationError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Counterexample(#[from] CounterexampleError),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counterexample {
    Increasing,
    Plateau,
    Pair,
    Transfer,
    Spec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PspaceEnum,
    PairBuild,
    PairCheck,
    Dilate,
    Decompose,
    Commutant,
    Equiv,
    Counterexample(Counterexample),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::PspaceEnum => "pspace-enum",
            Command::PairBuild => "pair-build",
            Command::PairCheck => "pair-check",
            Command::Dilate => "dilate",
            Command::Decompose => "decompose",
            Command::Commutant => "commutant",
            Command::Equiv => "equiv",
            Command::Counterexample(c) => match c {
                Counterexample::Increasing => "counterexample increasing",
                Counterexample::Plateau => "counterexample plateau",
                Counterexample::Pair => "counterexample pair",
                Counterexample::Transfer => "counterexample transfer",
                Counterexample::Spec => "counterexample spec",
            },
        };
        f.write_str(s)
    }
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::PspaceEnum,
        Command::PairBuild,
        Command::PairCheck,
        Command::Dilate,
        Command::Decompose,
        Command::Commutant,
        Command::Equiv,
        Command::Counterexample(Counterexample::Increasing),
        Command::Counterexample(Counterexample::Plateau),
        Command::Counterexample(Counterexample::Pair),
        Command::Counterexample(Counterexample::Transfer),
        Command::Counterexample(Counterexample::Spec),
    ];
}

impl std::str::FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let words = s.split_whitespace().collect::<Vec<_>>().join(" ");
        Command::ALL.into_iter().find(|c| c.to_string() == words).ok_or_else(|| CliError::Parse(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for artifacts; the current directory when absent.
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub invariant: String,
    pub module: &'static str,
    pub value: Value,
    pub relation: &'static str,
    pub bound: Value,
    pub passed: bool,
}

impl Check {
    pub fn at_most(invariant: &str, module: &'static str, value: f64, bound: f64) -> Self {
        Check { invariant: invariant.into(), module, value: json!(value), relation: "<=", bound: json!(bound), passed: value <= bound }
    }

    pub fn at_least(invariant: &str, module: &'static str, value: f64, bound: f64) -> Self {
        Check { invariant: invariant.into(), module, value: json!(value), relation: ">=", bound: json!(bound), passed: value >= bound }
    }

    pub fn equals<T: Serialize + PartialEq>(invariant: &str, module: &'static str, value: T, expected: T) -> Self {
        let passed = value == expected;
        Check { invariant: invariant.into(), module, value: json!(value), relation: "==", bound: json!(expected), passed }
    }
}

/// Everything a run prints. Contains no timings, so identical inputs give
/// byte-identical output.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub tolerance: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub data: Value,
    /// File names written into the output directory.
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn into_result(self) -> Result<Report, CliError> {
        match self.first_failure() {
            Some(c) => Err(CliError::CheckFailed(c.invariant.clone())),
            None => Ok(self),
        }
    }
}

/// Writes `s,t,value` rows with 17 significant digits.
pub fn export_heatmap(field: &[(f64, f64, f64)], path: &Path) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.display().to_string(), source };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "s,t,value").map_err(io)?;
    for (s, t, v) in field {
        writeln!(w, "{s:.16e},{t:.16e},{v:.16e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

struct Run<'a> {
    sc: &'a LoadedScenario,
    out: PathBuf,
    checks: Vec<Check>,
    artifacts: Vec<String>,
}

impl Run<'_> {
    fn tol(&self) -> f64 {
        self.sc.tolerance
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn expect<T: Serialize + PartialEq>(&mut self, invariant: &str, module: &'static str, value: T, expected: Option<T>) {
        if let Some(e) = expected {
            self.push(Check::equals(invariant, module, value, e));
        }
    }

    fn artifact(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<(), CliError>) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|source| CliError::Io { path: self.out.display().to_string(), source })?;
        write(&self.out.join(name))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn json_artifact<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Parse(e.to_string()))?;
        self.artifact(name, |p| std::fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }))
    }
}

/// Loads the scenario at `path` and runs `command` on it.
pub fn run_scenario(command: Command, path: &Path, opts: &RunOptions) -> Result<Report, CliError> {
    let sc = scenario::load(path, opts.seed, opts.tolerance)?;
    if let Some(named) = &sc.scenario.command {
        if named.trim() != command.to_string() {
            return Err(CliError::Parse(format!("scenario is for `{named}`, not `{command}`")));
        }
    }
    let mut run = Run { sc: &sc, out: opts.out.clone().unwrap_or_else(|| PathBuf::from(".")), checks: Vec::new(), artifacts: Vec::new() };
    let data = match command {
        Command::PspaceEnum => pspace_enum(&mut run)?,
        Command::PairBuild => pair_build(&mut run)?,
        Command::PairCheck => pair_check(&mut run)?,
        Command::Dilate => dilate(&mut run)?,
        Command::Decompose => decompose(&mut run)?,
        Command::Commutant => commutant_cmd(&mut run)?,
        Command::Equiv => equiv(&mut run)?,
        Command::Counterexample(c) => match c {
            Counterexample::Increasing => cx_increasing(&mut run)?,
            Counterexample::Plateau => cx_plateau(&mut run)?,
            Counterexample::Pair => cx_pair(&mut run)?,
            Counterexample::Transfer => cx_transfer(&mut run)?,
            Counterexample::Spec => cx_spec(&mut run)?,
        },
    };
    let Run { checks, artifacts, .. } = run;
    Ok(Report {
        command: command.to_string(),
        seed: sc.seed,
        tolerance: sc.tolerance,
        passed: checks.iter().all(|c| c.passed),
        checks,
        data,
        artifacts,
    })
}

fn pspace_enum(run: &mut Run) -> Result<Value, CliError> {
    let w = run.sc.window()?;
    let sets = enumerate_pspaces(&w)?;
    run.expect("lattice.pspace_count", "lattice", sets.len(), run.sc.scenario.expect.pspace_count);
    run.json_artifact("pspaces.json", &sets)?;
    let points: Vec<_> = sets.iter().map(|s| s.points()).collect();
    Ok(json!({ "window": w, "count": sets.len(), "pspaces": points }))
}

fn pair_summary(p: &WeylPair) -> Value {
    json!({ "label": p.label(), "dim_h": p.dim_h(), "window": p.window(), "support": p.support().len() })
}

fn pair_build(run: &mut Run) -> Result<Value, CliError> {
    let p = run.sc.pair()?;
    run.push(Check::at_most("pair.graded_shift", "weyl_pair", p.grading_defect(), run.tol()));
    run.json_artifact("pair.json", &p)?;
    Ok(pair_summary(&p))
}

fn pair_check(run: &mut Run) -> Result<Value, CliError> {
    let p = run.sc.pair()?;
    let w = p.window().clone();
    let margin = run.sc.scenario.margin.unwrap_or(1);
    let safe = SafeRegion::new(margin, &w)?;
    let shifts = box_points(w.dim(), margin);
    let weyl = pair::max_weyl_defect(&p, &pair::dual_grid(&w), &shifts, safe)?;
    let mut iso: f64 = 0.0;
    for a in &shifts {
        iso = iso.max(pair::isometry_defect(&p, a, safe)?);
    }
    let probe = run.sc.scenario.probe.clone().unwrap_or_else(|| box_points(w.dim(), 1));
    let comm = pair::check_commuting_ranges(&p, &probe)?;
    run.push(Check::at_most("pair.graded_shift", "weyl_pair", p.grading_defect(), run.tol()));
    run.push(Check::at_most("pair.weyl_relation", "weyl_pair", weyl, run.tol()));
    run.push(Check::at_most("pair.isometry", "weyl_pair", iso, run.tol()));
    if run.sc.scenario.expect.commuting_ranges.unwrap_or(true) {
        run.push(Check::at_most("pair.commuting_ranges", "weyl_pair", comm, run.tol()));
    } else {
        run.push(Check::at_least("pair.noncommuting_ranges", "weyl_pair", comm, NONCOMMUTING_FLOOR));
    }
    Ok(json!({ "pair": pair_summary(&p), "margin": margin, "weyl_defect": weyl, "isometry_defect": iso, "range_commutator": comm }))
}

fn dilate(run: &mut Run) -> Result<Value, CliError> {
    let p = run.sc.pair()?;
    let depth = run.sc.scenario.depth.unwrap_or(1);
    let bundle = dilation::minimal_dilation(&p, depth)?;
    run.json_artifact("dilation.json", &bundle)?;
    let rep = CovariantRep::new(bundle)?;
    let report = dilation::dilation_report(&rep)?;
    let samples = dilation::dual_grid_samples(&p);
    let ext = dilation::extend_u(rep.bundle(), &samples)?;
    let er = dilation::extension_report(&rep, &samples, &ext)?;
    let back = dilation::compress_phi(&rep)?;
    let eq = commutant::unitarily_equivalent(&RepGens::from_pair(&p), &RepGens::from_pair(&back), KERNEL_TOL)?;
    let spectrum: Vec<Value> = dilation::joint_spectrum(&rep)?.iter().map(|s| json!({ "pattern": s.pattern.points(), "dim": s.dim })).collect();
    run.push(Check::at_most("dilation.axioms", "dilation_covariant", report.max_defect(), run.tol()));
    run.push(Check::at_most("dilation.extension_on_embed", "dilation_covariant", er.c1, run.tol()));
    run.push(Check::at_most("dilation.extension_covariance", "dilation_covariant", er.c2, run.tol()));
    run.push(Check::at_most("dilation.extension_group_law", "dilation_covariant", er.group_law, run.tol()));
    run.push(Check::at_most("dilation.extension_commutes_with_e", "dilation_covariant", er.e_commutation, run.tol()));
    run.push(Check::equals("dilation.compression_round_trip", "dilation_covariant", eq.equivalent, true));
    Ok(json!({ "depth": depth, "dim_k": rep.bundle().dim_k(), "report": report, "extension": er, "spectrum": spectrum }))
}

fn decompose(run: &mut Run) -> Result<Value, CliError> {
    let p = run.sc.pair()?;
    let d = weylpair_core::decompose::decompose(&p)?;
    run.push(Check::at_most("decompose.reassembly_witness", "commutant_engine", d.residual, WITNESS_TOL));
    Ok(json!({ "pair": pair_summary(&p), "components": d.components, "residual": d.residual }))
}

fn commutant_cmd(run: &mut Run) -> Result<Value, CliError> {
    let gens = run.sc.generators()?;
    let s = commutant::summarize(&gens, KERNEL_TOL)?;
    let id = CMatrix::identity(gens.dim, gens.dim);
    run.push(Check::at_most("commutant.contains_identity", "commutant_engine", commutant::span_residual(&s.commutant_basis, &id), KERNEL_TOL));
    let e = run.sc.scenario.expect.clone();
    run.expect("commutant.dimension", "commutant_engine", s.commutant_dim, e.commutant_dim);
    run.expect("commutant.center_dimension", "commutant_engine", s.center_dim, e.center_dim);
    run.expect("commutant.is_factor", "commutant_engine", s.is_factor, e.is_factor);
    run.expect("commutant.is_irreducible", "commutant_engine", s.is_irreducible, e.is_irreducible);
    Ok(json!({ "dim": gens.dim, "generators": gens.len(), "summary": s }))
}

fn equiv(run: &mut Run) -> Result<Value, CliError> {
    let (a, b) = (run.sc.pair()?, run.sc.other_pair()?);
    let (ra, rb) = (RepGens::from_pair(&a), RepGens::from_pair(&b));
    let eq = commutant::unitarily_equivalent(&ra, &rb, KERNEL_TOL)?;
    if let Some(w) = &eq.witness {
        run.push(Check::at_most("commutant.witness_intertwines", "commutant_engine", commutant::witness_residual(w, &ra, &rb), WITNESS_TOL));
    }
    run.expect("commutant.equivalence", "commutant_engine", eq.equivalent, run.sc.scenario.expect.equivalent);
    Ok(json!({ "pair": pair_summary(&a), "other": pair_summary(&b), "equivalence": eq }))
}

fn cx_increasing(run: &mut Run) -> Result<Value, CliError> {
    let (f, ev, grid) = (run.sc.family()?, run.sc.evaluation()?, run.sc.grid()?);
    let violation = cx::check_increasing(&f, &ev, &grid)?;
    run.push(Check::at_most("counterexample.e_increasing", "counterexample_r2", violation, run.tol()));
    let field = cx::rank_field(&f, &ev, &grid)?;
    run.artifact("rank_heatmap.csv", |p| export_heatmap(&field, p))?;
    Ok(json!({ "kappa": f.kappa, "grid_points": grid.count(), "violation": violation }))
}

fn cx_plateau(run: &mut Run) -> Result<Value, CliError> {
    let (f, ev, grid) = (run.sc.family()?, run.sc.evaluation()?, run.sc.grid()?);
    let cells = run.sc.scenario.cells.clone().unwrap_or_else(|| vec![[0, 0]]);
    let bound = (1.0 - ev.b) * (1.0 - ev.d) - 2.0 * grid.step();
    let mut rows = Vec::new();
    for [m, n] in cells {
        let p = cx::plateau(&f, &ev, m, n, &grid)?;
        run.push(Check::at_least(&format!("counterexample.plateau_fraction[{m},{n}]"), "counterexample_r2", p.fraction, bound));
        run.push(Check::equals(&format!("counterexample.plateau_proof_region[{m},{n}]"), "counterexample_r2", p.contains_proof_region, true));
        rows.push(json!({ "cell": [m, n], "fraction": p.fraction, "cell_points": p.cell_points, "plateau_points": p.points.len() }));
    }
    Ok(json!({ "bound": bound, "cells": rows }))
}

fn cx_pair(run: &mut Run) -> Result<Value, CliError> {
    let (f, ev, grid) = (run.sc.family()?, run.sc.evaluation()?, run.sc.grid()?);
    let p = cx::build_r2_pair(&f, &ev, &grid)?;
    let w = p.window().clone();
    let safe = SafeRegion::new(1, &w)?;
    let weyl = pair::max_weyl_defect(&p, &pair::dual_grid(&w), &box_points(2, 1), safe)?;
    let compression = cx::compression_defect(&f, &ev, &grid, 2)?;
    let minimality = cx::minimality_defect(&f, &ev, &grid, 2)?;
    let comm = pair::check_commuting_ranges(&p, &cx::r2_probe(&grid))?;
    run.push(Check::at_most("pair.weyl_relation", "weyl_pair", weyl, run.tol()));
    run.push(Check::at_most("counterexample.compression", "counterexample_r2", compression, run.tol()));
    run.push(Check::at_most("counterexample.minimality", "counterexample_r2", minimality, run.tol()));
    run.push(Check::at_least("counterexample.noncommuting_ranges", "counterexample_r2", comm, NONCOMMUTING_FLOOR));
    run.json_artifact("r2_pair.json", &p)?;
    Ok(json!({
        "pair": pair_summary(&p),
        "weyl_defect": weyl,
        "compression_defect": compression,
        "minimality_defect": minimality,
        "range_commutator": comm,
    }))
}

fn cx_transfer(run: &mut Run) -> Result<Value, CliError> {
    let (f, ev, grid) = (run.sc.family()?, run.sc.evaluation()?, run.sc.grid()?);
    let t = cx::commutant_transfer_check(&f, &ev, &grid)?;
    run.push(Check::equals("counterexample.commutant_dimension_transfer", "counterexample_r2", t.sampled_dim, t.family_dim));
    run.push(Check::at_most("counterexample.commutant_transfer_angle", "counterexample_r2", t.principal_angle, KERNEL_TOL));
    Ok(json!(t))
}

fn cx_spec(run: &mut Run) -> Result<Value, CliError> {
    let (f, ev, grid) = (run.sc.family()?, run.sc.evaluation()?, run.sc.grid()?);
    let support = cx::spec_support(&f, &ev, &grid)?;
    let mut data = json!({ "grid_points": grid.count(), "support": support });
    if let Some(g) = run.sc.other_family()? {
        let other = cx::spec_support(&g, &ev, &grid)?;
        run.push(Check::equals("counterexample.spec_support_agrees", "counterexample_r2", &other, &support));
        let (pf, pg) = (cx::build_r2_pair(&f, &ev, &grid)?, cx::build_r2_pair(&g, &ev, &grid)?);
        let eq = commutant::unitarily_equivalent(&RepGens::from_pair(&pf), &RepGens::from_pair(&pg), KERNEL_TOL)?;
        run.expect("counterexample.pair_equivalence", "counterexample_r2", eq.equivalent, run.sc.scenario.expect.equivalent);
        data["equivalence"] = json!(eq);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_decide_pass() {
        assert!(Check::at_most("x", "m", 1e-11, 1e-10).passed);
        assert!(!Check::at_most("x", "m", f64::NAN, 1e-10).passed);
        assert!(!Check::at_least("x", "m", 0.05, 0.1).passed);
        assert!(Check::equals("x", "m", 3, 3).passed);
    }

    #[test]
    fn first_failure_is_reported_in_order() {
        let r = Report {
            command: "c".into(),
            seed: 0,
            tolerance: 1e-10,
            passed: false,
            checks: vec![Check::equals("a", "m", 1, 1), Check::equals("b", "m", 1, 2), Check::equals("c", "m", 1, 2)],
            data: Value::Null,
            artifacts: vec![],
        };
        assert!(matches!(r.into_result(), Err(CliError::CheckFailed(name)) if name == "b"));
    }

    #[test]
    fn command_names_match_the_cli() {
        assert_eq!(Command::PspaceEnum.to_string(), "pspace-enum");
        assert_eq!(Command::Counterexample(Counterexample::Spec).to_string(), "counterexample spec");
    }
}
