//! Scenario documents: one JSON file per run.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use weylpair_core::commutant::RepGens;
use weylpair_core::counterexample::{EvaluationPoint, GridSpec, ProjectionFamily};
use weylpair_core::lattice::{validate_pset, LatticeWindow, PSet, Point, SetKind};
use weylpair_core::linalg::{self, CMatrix};
use weylpair_core::pair::{self, WeylPair};

use crate::CliError;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    Bounds { lo: Point, hi: Point },
    Cube { dim: usize, side: i64 },
}

impl WindowSpec {
    pub fn build(&self) -> Result<LatticeWindow, CliError> {
        match self {
            WindowSpec::Bounds { lo, hi } => LatticeWindow::new(lo.clone(), hi.clone()),
            WindowSpec::Cube { dim, side } => LatticeWindow::cube(*dim, *side),
        }
        .map_err(|e| CliError::Parse(format!("window: {e}")))
    }
}

/// A P-space inside a window.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetSpec {
    Points(Vec<Point>),
    UpSet(Vec<Point>),
    Full,
}

impl SetSpec {
    pub fn build(&self, window: &LatticeWindow) -> Result<PSet, CliError> {
        match self {
            SetSpec::Points(p) => validate_pset(p.clone(), window, SetKind::PSpace),
            SetSpec::UpSet(g) => PSet::up_set(window, g),
            SetSpec::Full => Ok(PSet::full(window)),
        }
        .map_err(|e| CliError::Parse(format!("pspace: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub pspace: SetSpec,
    #[serde(default = "one")]
    pub k: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PairSpec {
    File {
        file: PathBuf,
    },
    Built {
        window: WindowSpec,
        components: Vec<ComponentSpec>,
        /// Conjugate every fiber by a seeded random unitary.
        #[serde(default)]
        scramble: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Demo { seed: Option<u64> },
    Rotated { kappa: usize, seed: Option<u64> },
    Coordinate { kappa: usize },
    Zero { kappa: usize, m: usize },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridInput {
    pub q: u32,
    pub extent: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub commutant_dim: Option<usize>,
    pub center_dim: Option<usize>,
    pub is_factor: Option<bool>,
    pub is_irreducible: Option<bool>,
    pub equivalent: Option<bool>,
    pub pspace_count: Option<usize>,
    /// Whether the range projections of the pair are expected to commute.
    pub commuting_ranges: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub command: Option<String>,
    pub window: Option<WindowSpec>,
    pub pair: Option<PairSpec>,
    pub other: Option<PairSpec>,
    /// Raw generators (`RepGens` JSON) for the commutant command.
    pub generators: Option<PathBuf>,
    pub margin: Option<i64>,
    pub probe: Option<Vec<Point>>,
    pub depth: Option<i64>,
    pub family: Option<FamilySpec>,
    pub other_family: Option<FamilySpec>,
    pub evaluation: Option<EvaluationPoint>,
    pub grid: Option<GridInput>,
    pub cells: Option<Vec<[i64; 2]>>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub expect: Expectations,
}

/// A parsed scenario together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base: PathBuf,
    pub seed: u64,
    pub tolerance: f64,
}

pub fn load(path: &Path, seed: Option<u64>, tol: Option<f64>) -> Result<LoadedScenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let tolerance = tol.or(scenario.tolerance).unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance > 0.0) {
        return Err(CliError::Parse(format!("tolerance must be positive, got {tolerance}")));
    }
    let loaded = LoadedScenario { seed: seed.or(scenario.seed).unwrap_or(0), tolerance, base, scenario };
    for f in loaded.referenced_files() {
        if !f.exists() {
            return Err(CliError::Parse(format!("referenced file {} does not exist", f.display())));
        }
    }
    Ok(loaded)
}

impl LoadedScenario {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn referenced_files(&self) -> Vec<PathBuf> {
        let s = &self.scenario;
        let mut out = Vec::new();
        for spec in [&s.pair, &s.other].into_iter().flatten() {
            if let PairSpec::File { file } = spec {
                out.push(self.resolve(file));
            }
        }
        for fam in [&s.family, &s.other_family].into_iter().flatten() {
            if let FamilySpec::File { path } = fam {
                out.push(self.resolve(path));
            }
        }
        if let Some(g) = &s.generators {
            out.push(self.resolve(g));
        }
        out
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, p: &Path) -> Result<T, CliError> {
        let path = self.resolve(p);
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn window(&self) -> Result<LatticeWindow, CliError> {
        self.scenario.window.as_ref().ok_or_else(|| missing("window"))?.build()
    }

    pub fn pair(&self) -> Result<WeylPair, CliError> {
        self.build_pair(self.scenario.pair.as_ref().ok_or_else(|| missing("pair"))?, self.seed)
    }

    pub fn other_pair(&self) -> Result<WeylPair, CliError> {
        self.build_pair(self.scenario.other.as_ref().ok_or_else(|| missing("other"))?, self.seed ^ 0x5eed)
    }

    fn build_pair(&self, spec: &PairSpec, seed: u64) -> Result<WeylPair, CliError> {
        match spec {
            PairSpec::File { file } => self.read_json(file),
            PairSpec::Built { window, components, scramble } => {
                let w = window.build()?;
                if components.is_empty() {
                    return Err(CliError::Parse("pair needs at least one component".into()));
                }
                let pieces = components
                    .iter()
                    .map(|c| Ok(pair::build_pspace_pair(&c.pspace.build(&w)?, c.k)?))
                    .collect::<Result<Vec<_>, CliError>>()?;
                let sum = pair::direct_sum(&pieces)?;
                if !scramble {
                    return Ok(sum);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let us: Vec<CMatrix> = sum.fibers().iter().map(|&k| linalg::random_unitary(k, &mut rng)).collect();
                Ok(pair::conjugate_fibers(&sum, &us)?)
            }
        }
    }

    pub fn generators(&self) -> Result<RepGens, CliError> {
        match &self.scenario.generators {
            Some(p) => self.read_json(p),
            None => Ok(RepGens::from_pair(&self.pair()?)),
        }
    }

    pub fn family(&self) -> Result<ProjectionFamily, CliError> {
        self.build_family(self.scenario.family.as_ref(), self.seed)
    }

    pub fn other_family(&self) -> Result<Option<ProjectionFamily>, CliError> {
        match &self.scenario.other_family {
            Some(spec) => self.build_family(Some(spec), self.seed.wrapping_add(1)).map(Some),
            None => Ok(None),
        }
    }

    fn build_family(&self, spec: Option<&FamilySpec>, default_seed: u64) -> Result<ProjectionFamily, CliError> {
        Ok(match spec {
            None => ProjectionFamily::default_demo(default_seed),
            Some(FamilySpec::Demo { seed }) => ProjectionFamily::default_demo(seed.unwrap_or(default_seed)),
            Some(FamilySpec::Rotated { kappa, seed }) => ProjectionFamily::rotated_rank_one(*kappa, seed.unwrap_or(default_seed)),
            Some(FamilySpec::Coordinate { kappa }) => ProjectionFamily::coordinate(*kappa),
            Some(FamilySpec::Zero { kappa, m }) => ProjectionFamily::zero(*kappa, *m),
            Some(FamilySpec::File { path }) => {
                let raw: ProjectionFamily = self.read_json(path)?;
                ProjectionFamily::new(raw.kappa, raw.p, raw.q)?
            }
        })
    }

    pub fn evaluation(&self) -> Result<EvaluationPoint, CliError> {
        let ev = self.scenario.evaluation.unwrap_or_else(EvaluationPoint::demo);
        ev.validate()?;
        Ok(ev)
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let g = self.scenario.grid.as_ref().ok_or_else(|| missing("grid"))?;
        Ok(GridSpec::new(g.q, g.extent, g.offset)?)
    }
}

fn missing(field: &str) -> CliError {
    CliError::Parse(format!("scenario is missing `{field}`"))
}
