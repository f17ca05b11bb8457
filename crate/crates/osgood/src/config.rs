//! Run-configuration schema (JSON) and construction of the concrete
//! problem objects it describes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::kernel::{KernelModel, TorusMesh};
use crate::semigroup::{SemigroupAction, SemigroupOperator};
use crate::source_term::SourceTerm;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub source: SourceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Path { n: usize },
    Cycle { n: usize },
    Grid { nx: usize, ny: usize },
    Torus { dims: Vec<usize> },
    Star { k: usize },
    Edgeless { n: usize },
    RandomConnected { n: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Gaussian {
        dim: usize,
        mesh: usize,
        period: f64,
    },
    FractionalStable {
        dim: usize,
        mesh: usize,
        period: f64,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Power { alpha: f64 },
    ExpMinusOne,
    PowerOverExp,
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// a = height·1_{vertex}.
    PointMass { vertex: String, height: f64 },
    Constant { value: f64 },
    /// CSV with header `vertex,value`; unlisted vertices default to 0.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Geometric certificate-search range and resolution.
    pub t_min: f64,
    pub t_max: f64,
    pub t_grid: usize,
    pub horizon: f64,
    /// Local relative tolerance of the integrator.
    pub tolerance: f64,
    pub divergence_threshold: f64,
    /// Overrides for the (κ, γ) asymptotics check; defaults come from the
    /// source family when available.
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    /// Volume-growth fit controls (graphs).
    pub basepoint: Option<String>,
    pub r_max: Option<usize>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            t_min: 0.01,
            t_max: 10.0,
            t_grid: 400,
            horizon: 1.0,
            tolerance: 1e-6,
            divergence_threshold: 1e8,
            kappa: None,
            gamma: None,
            basepoint: None,
            r_max: None,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.problem.graph, &self.problem.kernel) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "problem must name either a graph or a kernel, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "problem must name a graph or a kernel".into(),
                ))
            }
            _ => {}
        }
        if let Some(g) = &self.problem.graph {
            match (&g.generator, &g.edges) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(Error::InvalidConfig(
                        "graph spec needs exactly one of `generator` or `edges`".into(),
                    ))
                }
                _ => {}
            }
            if g.generator.is_some() && g.masses.is_some() {
                return Err(Error::InvalidConfig(
                    "`masses` only applies to file-based graphs".into(),
                ));
            }
        }
        let a = &self.analysis;
        for (name, v) in [
            ("t_min", a.t_min),
            ("t_max", a.t_max),
            ("horizon", a.horizon),
            ("tolerance", a.tolerance),
            ("divergence_threshold", a.divergence_threshold),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("analysis.{name} must be positive")));
            }
        }
        if a.t_min >= a.t_max {
            return Err(Error::InvalidConfig("analysis.t_min must be below t_max".into()));
        }
        if a.t_grid < 2 {
            return Err(Error::InvalidConfig("analysis.t_grid must be at least 2".into()));
        }
        Ok(())
    }

    /// Materialize the semigroup action described by `problem`.
    pub fn build_problem(&self, seed: u64) -> Result<Problem> {
        if let Some(g) = &self.problem.graph {
            let need = |ok: bool, what: &str| {
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!("graph generator: {what}")))
                }
            };
            let graph = match &g.generator {
                Some(GeneratorSpec::Path { n }) => {
                    need(*n >= 1, "path needs n ≥ 1")?;
                    WeightedGraph::path(*n)
                }
                Some(GeneratorSpec::Cycle { n }) => {
                    need(*n >= 3, "cycle needs n ≥ 3")?;
                    WeightedGraph::cycle(*n)
                }
                Some(GeneratorSpec::Grid { nx, ny }) => {
                    need(*nx >= 1 && *ny >= 1, "grid needs nx, ny ≥ 1")?;
                    WeightedGraph::grid(*nx, *ny)
                }
                Some(GeneratorSpec::Torus { dims }) => {
                    need(
                        !dims.is_empty() && dims.iter().all(|&d| d >= 3),
                        "torus needs every dimension ≥ 3",
                    )?;
                    WeightedGraph::torus(dims)
                }
                Some(GeneratorSpec::Star { k }) => WeightedGraph::star(*k),
                Some(GeneratorSpec::Edgeless { n }) => {
                    need(*n >= 1, "edgeless needs n ≥ 1")?;
                    WeightedGraph::edgeless(*n)
                }
                Some(GeneratorSpec::RandomConnected { n }) => {
                    need(*n >= 1, "random-connected needs n ≥ 1")?;
                    use rand::SeedableRng;
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                    WeightedGraph::random_connected(&mut rng, *n)
                }
                None => WeightedGraph::from_csv(
                    g.edges.as_deref().expect("validated"),
                    g.masses.as_deref(),
                )?,
            };
            Ok(Problem::Graph(SemigroupOperator::new(graph)))
        } else {
            let model = match self.problem.kernel.as_ref().expect("validated") {
                KernelSpec::Gaussian { dim, mesh, period } => {
                    KernelModel::gaussian(TorusMesh::new(*dim, *mesh, *period)?)
                }
                KernelSpec::FractionalStable {
                    dim,
                    mesh,
                    period,
                    beta,
                    c,
                } => KernelModel::fractional(TorusMesh::new(*dim, *mesh, *period)?, *beta, *c)?,
            };
            Ok(Problem::Kernel(model))
        }
    }

    pub fn build_source(&self) -> Result<SourceTerm> {
        match &self.source {
            SourceSpec::Power { alpha } => SourceTerm::power(*alpha),
            SourceSpec::ExpMinusOne => Ok(SourceTerm::exp_minus_one()),
            SourceSpec::PowerOverExp => Ok(SourceTerm::power_over_exp()),
            SourceSpec::Tabulated { path } => {
                let samples = read_source_table(path)?;
                SourceTerm::tabulated(&samples)
            }
        }
    }

    /// Initial value on the problem's vertex/point set.
    pub fn build_initial(&self, problem: &Problem) -> Result<Vec<f64>> {
        let n = problem.dim();
        let spec = self.initial.as_ref().ok_or_else(|| {
            Error::InvalidConfig("this command needs an `initial` section".into())
        })?;
        match spec {
            InitialSpec::Constant { value } => {
                if *value < 0.0 {
                    return Err(Error::InvalidConfig("initial value must be nonnegative".into()));
                }
                Ok(vec![*value; n])
            }
            InitialSpec::PointMass { vertex, height } => {
                if *height < 0.0 {
                    return Err(Error::InvalidConfig("initial value must be nonnegative".into()));
                }
                let idx = problem.resolve_vertex(vertex)?;
                let mut a = vec![0.0; n];
                a[idx] = *height;
                Ok(a)
            }
            InitialSpec::File { path } => {
                let mut a = vec![0.0; n];
                let text = fs::read_to_string(path)?;
                let display = path.display().to_string();
                let mut lines = text.lines().enumerate();
                match lines.next() {
                    Some((_, h)) if h.trim() == "vertex,value" => {}
                    _ => {
                        return Err(Error::Parse {
                            path: display,
                            line: 1,
                            message: "expected header `vertex,value`".into(),
                        })
                    }
                }
                for (i, line) in lines {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let err = |message: String| Error::Parse {
                        path: display.clone(),
                        line: i + 1,
                        message,
                    };
                    let (name, value) = line
                        .split_once(',')
                        .ok_or_else(|| err("expected `vertex,value`".into()))?;
                    let idx = problem
                        .resolve_vertex(name.trim())
                        .map_err(|e| err(e.to_string()))?;
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|e| err(format!("bad value: {e}")))?;
                    if !(v >= 0.0) {
                        return Err(err("initial value must be nonnegative".into()));
                    }
                    a[idx] = v;
                }
                Ok(a)
            }
        }
    }
}

fn read_source_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut samples = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t,f" => {}
        _ => {
            return Err(Error::Parse {
                path: display,
                line: 1,
                message: "expected header `t,f`".into(),
            })
        }
    }
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: display.clone(),
            line: i + 1,
            message,
        };
        let (t, f) = line
            .split_once(',')
            .ok_or_else(|| err("expected `t,f`".into()))?;
        let t: f64 = t.trim().parse().map_err(|e| err(format!("bad t: {e}")))?;
        let f: f64 = f.trim().parse().map_err(|e| err(format!("bad f: {e}")))?;
        samples.push((t, f));
    }
    Ok(samples)
}

/// A configured problem: a graph heat semigroup or a kernel model on a
/// quadrature mesh. Both expose the same semigroup action.
pub enum Problem {
    Graph(SemigroupOperator),
    Kernel(KernelModel),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Graph(sg) => sg.graph().len(),
            Problem::Kernel(model) => model.space.len(),
        }
    }

    pub fn resolve_vertex(&self, name: &str) -> Result<usize> {
        match self {
            Problem::Graph(sg) => sg
                .graph()
                .vertex_index(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown vertex `{name}`"))),
            Problem::Kernel(model) => {
                let idx: usize = name.parse().map_err(|_| {
                    Error::InvalidConfig(format!("kernel points are indexed by integers, got `{name}`"))
                })?;
                if idx >= model.space.len() {
                    return Err(Error::InvalidConfig(format!("point index {idx} out of range")));
                }
                Ok(idx)
            }
        }
    }

    pub fn vertex_name(&self, idx: usize) -> String {
        match self {
            Problem::Graph(sg) => sg.graph().names()[idx].clone(),
            Problem::Kernel(_) => idx.to_string(),
        }
    }
}

impl SemigroupAction for Problem {
    fn dim(&self) -> usize {
        Problem::dim(self)
    }

    fn masses(&self) -> &[f64] {
        match self {
            Problem::Graph(sg) => sg.masses(),
            Problem::Kernel(model) => model.space.masses(),
        }
    }

    fn apply(&self, t: f64, phi: &[f64]) -> Result<Vec<f64>> {
        match self {
            Problem::Graph(sg) => sg.apply(t, phi),
            Problem::Kernel(model) => model.semigroup().apply(t, phi),
        }
    }
}
