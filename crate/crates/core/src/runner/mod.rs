//! Configuration-driven experiments: JSON config in, CSV tables plus a JSON
//! and plain-text summary out.

mod scenarios;
mod selftest;

pub use selftest::selftest;

use crate::energies::Regime;
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::grid_field::Domain;
use crate::measures::{AtomicMeasure, PiecewiseDensity};
use crate::recovery::TdSpec;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    GammaLimsup,
    BallLowerBound,
    FlatNormBench,
    LatticeStudy,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::GammaLimsup => "gamma_limsup",
            Scenario::BallLowerBound => "ball_lower_bound",
            Scenario::FlatNormBench => "flat_norm_bench",
            Scenario::LatticeStudy => "lattice_study",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    #[serde(default)]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: f64,
    pub y: f64,
    pub degree: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuSpec {
    Pieces(Vec<PieceSpec>),
    Atoms(Vec<AtomSpec>),
}

impl Default for MuSpec {
    fn default() -> Self {
        MuSpec::Pieces(Vec::new())
    }
}

impl MuSpec {
    pub fn density(&self) -> Result<PiecewiseDensity> {
        match self {
            MuSpec::Pieces(p) => PiecewiseDensity::rects(
                &p.iter()
                    .map(|s| {
                        (Rect::new(Point::new(s.lower[0], s.lower[1]), Point::new(s.upper[0], s.upper[1])), s.level)
                    })
                    .collect::<Vec<_>>(),
            ),
            MuSpec::Atoms(_) => Err(Error::Argument("this scenario needs a piecewise-constant μ".into())),
        }
    }

    pub fn atoms(&self) -> Vec<(Point, i64)> {
        match self {
            MuSpec::Atoms(a) => a.iter().map(|a| (Point::new(a.x, a.y), a.degree)).collect(),
            MuSpec::Pieces(_) => Vec::new(),
        }
    }

    pub fn measure(&self) -> AtomicMeasure {
        AtomicMeasure::new(self.atoms().into_iter().map(|(p, z)| (p, z as f64)))
    }
}

fn default_regime() -> Regime {
    Regime::Critical
}
fn default_td() -> TdSpec {
    TdSpec::Zero
}
fn default_core_resolution() -> f64 {
    8.0
}
fn default_instances() -> usize {
    50
}
fn default_max_atoms() -> usize {
    6
}
fn default_lattice_n() -> Vec<u64> {
    vec![25, 100, 400]
}
fn default_flat_h_q() -> f64 {
    1.0 / 32.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub domain: DomainSpec,
    /// Spacing of the base uniform grid.
    pub h: f64,
    #[serde(default)]
    pub mu: MuSpec,
    #[serde(default = "default_td")]
    pub td: TdSpec,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    /// Fixed N_ε; the regime default when absent.
    #[serde(default)]
    pub n_eps: Option<u64>,
    /// Fine cells per ε near vortex cores.
    #[serde(default = "default_core_resolution")]
    pub core_resolution: f64,
    #[serde(default)]
    pub seed: u64,
    /// Default output directory (the command line may override it).
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_max_atoms")]
    pub max_atoms: usize,
    #[serde(default = "default_lattice_n")]
    pub lattice_n: Vec<u64>,
    #[serde(default = "default_flat_h_q")]
    pub flat_h_q: f64,
    /// Final growth time of the ball construction; by default the balls grow
    /// to a quarter of the shorter domain side.
    #[serde(default)]
    pub ball_t_final: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(vec![format!("config is not valid: {e}")]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = &self.domain;
        Domain::uniform(Point::new(d.lower[0], d.lower[1]), Point::new(d.upper[0], d.upper[1]), self.h, d.margin)
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = self.domain() {
            v.push(format!("domain: {e}"));
        }
        let eps = &self.epsilons;
        if eps.is_empty() {
            v.push("epsilon list is empty".into());
        }
        if eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            v.push("epsilon values must lie in (0, 1)".into());
        }
        if eps.windows(2).any(|w| !(w[1] < w[0])) {
            v.push("epsilon list not decreasing".into());
        }
        let min_eps = eps.iter().copied().fold(f64::INFINITY, f64::min);
        match self.scenario {
            Scenario::GammaLimsup => {
                if eps.len() < 3 {
                    v.push("gamma_limsup needs at least three epsilon values".into());
                }
                if !matches!(self.mu, MuSpec::Pieces(_)) {
                    v.push("gamma_limsup needs a piecewise-constant mu".into());
                }
                if !(self.core_resolution > 4.0) {
                    v.push("core grid spacing min(epsilon)/core_resolution must be below min(epsilon)/4".into());
                }
                if self.n_eps == Some(0) {
                    v.push("n_eps must be positive".into());
                }
            }
            Scenario::BallLowerBound => {
                let atoms = self.mu.atoms();
                if atoms.is_empty() {
                    v.push("ball_lower_bound needs vortex atoms".into());
                }
                if atoms.iter().any(|a| a.1 == 0) {
                    v.push("vortex degrees must be nonzero".into());
                }
                if !(self.h < min_eps / 4.0) {
                    v.push("grid spacing h must be below min(epsilon)/4".into());
                }
                if self.ball_t_final.is_some_and(|t| !(t > 0.0)) {
                    v.push("ball_t_final must be positive".into());
                }
            }
            Scenario::FlatNormBench => {
                if self.instances == 0 {
                    v.push("flat_norm_bench needs at least one instance".into());
                }
                if self.max_atoms == 0 {
                    v.push("max_atoms must be positive".into());
                }
            }
            Scenario::LatticeStudy => {
                if !matches!(&self.mu, MuSpec::Pieces(p) if !p.is_empty()) {
                    v.push("lattice_study needs a nonempty piecewise-constant mu".into());
                }
                if self.lattice_n.is_empty() || self.lattice_n.contains(&0) {
                    v.push("lattice_n must be a nonempty list of positive integers".into());
                }
            }
        }
        if !(self.flat_h_q > 0.0) {
            v.push("flat_h_q must be positive".into());
        }
        if let MuSpec::Pieces(_) = self.mu {
            if let Err(e) = self.mu.density() {
                v.push(format!("mu: {e}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// One re-executed invariant and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// A CSV table held as its header and formatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: String,
    pub rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub seed: u64,
    pub table: Table,
    pub checks: Vec<Check>,
    /// Γ-limit value π|μ|(Ω) + 2∫|T^D|² (or its regime variant).
    pub gamma_target: Option<f64>,
}

impl ScenarioResult {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Serialize)]
struct SummaryJson<'a> {
    scenario: &'a str,
    seed: u64,
    table: &'a str,
    rows: usize,
    gamma_target: Option<f64>,
    all_passed: bool,
    checks: &'a [Check],
}

/// Writes the table, `summary.json` and `summary.txt`; returns the paths.
pub fn emit_report(result: &ScenarioResult, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut csv = String::with_capacity(64 * (result.table.rows.len() + 1));
    csv.push_str(&result.table.header);
    csv.push('\n');
    for r in &result.table.rows {
        csv.push_str(r);
        csv.push('\n');
    }
    let table_path = out.join(&result.table.file);
    fs::write(&table_path, csv)?;

    let summary = SummaryJson {
        scenario: result.scenario.name(),
        seed: result.seed,
        table: &result.table.file,
        rows: result.table.rows.len(),
        gamma_target: result.gamma_target,
        all_passed: result.all_passed(),
        checks: &result.checks,
    };
    let json_path = out.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?;
    json.push('\n');
    fs::write(&json_path, json)?;

    let mut txt = format!("scenario: {}\nseed: {}\n", result.scenario.name(), result.seed);
    if let Some(g) = result.gamma_target {
        txt.push_str(&format!("gamma-limit target: {g}\n"));
    }
    txt.push_str(&format!("table: {} ({} rows)\n", result.table.file, result.table.rows.len()));
    for c in &result.checks {
        txt.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let txt_path = out.join("summary.txt");
    fs::write(&txt_path, txt)?;
    Ok(vec![table_path, json_path, txt_path])
}

/// Validates and runs the configured scenario.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ScenarioResult> {
    config.validate()?;
    match config.scenario {
        Scenario::GammaLimsup => scenarios::gamma_limsup(config),
        Scenario::BallLowerBound => scenarios::ball_lower_bound(config),
        Scenario::FlatNormBench => scenarios::flat_norm_bench(config),
        Scenario::LatticeStudy => scenarios::lattice_study(config),
    }
}

pub use scenarios::random_flat_instance;

#[cfg(test)]
mod tests;
