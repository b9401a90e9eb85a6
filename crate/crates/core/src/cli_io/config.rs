//! Run configuration: TOML file, `DGFRIC_*` environment overrides and
//! command-line flags, in increasing precedence.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptivity::AfemConfig;
use crate::assembly::{Beta, LdgConfig, Penalty};
use crate::error::{Error, Result};
use crate::mesh::MeshOptions;
use crate::verification::benchmarks::{Benchmark, BenchmarkId, Reference, Source};
use crate::verification::studies::StudyOptions;
use crate::vi_solver::UzawaConfig;

/// Prefix of environment overrides: `DGFRIC_<SECTION>_<KEY>=value`, e.g.
/// `DGFRIC_SOLVER_TOL=1e-9` or `DGFRIC_PROBLEM_BENCHMARK=slip`.
pub const ENV_PREFIX: &str = "DGFRIC_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    /// Built-in problem; ignored when `mesh` is set.
    pub benchmark: String,
    /// Mesh file in the `dgmesh 1` format.
    pub mesh: Option<PathBuf>,
    /// Friction bound; defaults to the benchmark's.
    pub g: Option<f64>,
    /// `"sine"` or a constant; defaults to the benchmark's.
    pub source: Option<String>,
    pub min_angle_deg: f64,
    /// Uniform refinements applied to the starting mesh.
    pub refinements: usize,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            benchmark: "stick".into(),
            mesh: None,
            g: None,
            source: None,
            min_angle_deg: MeshOptions::default().min_angle_deg,
            refinements: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSection {
    /// Penalty `η_e > 0` on every face.
    pub penalty: f64,
    /// Flux vector `β`.
    pub beta: [f64; 2],
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            penalty: 10.0,
            beta: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Uzawa step; estimated from the operator norm when absent.
    pub rho: Option<f64>,
    pub tol: f64,
    pub tol_lin: f64,
    pub tol_c: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let u = UzawaConfig::default();
        Self {
            rho: u.rho,
            tol: u.tol,
            tol_lin: u.tol_lin,
            tol_c: u.tol_c,
            max_iter: u.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AfemSection {
    pub theta: f64,
    pub max_dof: usize,
    pub max_levels: usize,
    pub tol: f64,
}

impl Default for AfemSection {
    fn default() -> Self {
        let a = AfemConfig::default();
        Self {
            theta: a.theta,
            max_dof: a.max_dof,
            max_levels: a.max_levels,
            tol: a.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    /// Uniform refinement levels of the benchmark base mesh.
    pub levels: Vec<usize>,
    pub bridge: bool,
    pub fine_levels: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            levels: vec![1, 2, 3, 4],
            bridge: true,
            fine_levels: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Write VTK files.
    pub vtk: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("dgfric-out"),
            threads: 0,
            vtk: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub discretization: DiscretizationSection,
    pub solver: SolverSection,
    pub afem: AfemSection,
    pub study: StudySection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses TOML text, then applies `env` overrides.
    pub fn from_toml_with_env<I>(text: &str, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_env(&mut table, env)?;
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_env(text, std::iter::empty())
    }

    /// Reads `path` (if any) and the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.problem.mesh.is_none() {
            self.problem.benchmark.parse::<BenchmarkId>()?;
        }
        if let Some(s) = &self.problem.source {
            s.parse::<Source>()?;
        }
        if let Some(g) = self.problem.g {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("problem.g must be positive, got {g}"));
            }
        }
        if !(self.problem.min_angle_deg > 0.0 && self.problem.min_angle_deg < 60.0) {
            return bad(format!("problem.min_angle_deg must lie in (0, 60), got {}", self.problem.min_angle_deg));
        }
        if !(self.discretization.penalty > 0.0 && self.discretization.penalty.is_finite()) {
            return bad(format!("discretization.penalty must be positive, got {}", self.discretization.penalty));
        }
        if !self.discretization.beta.iter().all(|b| b.is_finite()) {
            return bad("discretization.beta must be finite".into());
        }
        if self.study.levels.is_empty() {
            return bad("study.levels must not be empty".into());
        }
        self.uzawa().validate()?;
        self.afem_config().validate()
    }

    pub fn benchmark(&self) -> Result<Benchmark> {
        let mut b = match self.problem.mesh {
            Some(_) => Benchmark::custom(Source::Constant(1.0), 1.0),
            None => Benchmark::get(self.problem.benchmark.parse()?),
        };
        if let Some(g) = self.problem.g {
            b.g = g;
        }
        if let Some(s) = &self.problem.source {
            b.f = s.parse()?;
        }
        // changed data invalidates the closed-form or reference solution
        if self.problem.g.is_some_and(|g| g != Benchmark::get(b.id).g)
            || self.problem.source.as_ref().is_some_and(|_| b.f != Benchmark::get(b.id).f)
        {
            b = Benchmark { exact: None, reference: Reference::None, ..b };
        }
        Ok(b)
    }

    pub fn mesh_options(&self) -> MeshOptions {
        MeshOptions {
            min_angle_deg: self.problem.min_angle_deg,
        }
    }

    pub fn ldg(&self) -> LdgConfig {
        LdgConfig {
            penalty: Penalty::Uniform(self.discretization.penalty),
            beta: Beta::Uniform(self.discretization.beta),
        }
    }

    pub fn uzawa(&self) -> UzawaConfig {
        UzawaConfig {
            rho: self.solver.rho,
            tol: self.solver.tol,
            tol_lin: self.solver.tol_lin,
            tol_c: self.solver.tol_c,
            max_iter: self.solver.max_iter,
            initial: None,
        }
    }

    pub fn afem_config(&self) -> AfemConfig {
        AfemConfig {
            theta: self.afem.theta,
            max_dof: self.afem.max_dof,
            max_levels: self.afem.max_levels,
            tol: self.afem.tol,
            ldg: self.ldg(),
            uzawa: self.uzawa(),
        }
    }

    pub fn study_options(&self) -> StudyOptions {
        StudyOptions {
            ldg: self.ldg(),
            uzawa: self.uzawa(),
            bridge: self.study.bridge,
            fine_levels: self.study.fine_levels,
        }
    }
}

fn apply_env<I>(table: &mut toml::Table, env: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let rest = key[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some((section, field)) = rest.split_once('_') else {
            return Err(Error::Config(format!("environment override {key} must name a section and a key")));
        };
        // values are TOML literals; bare words are taken as strings
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.clone()));
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(field.to_string(), value);
            }
            _ => return Err(Error::Config(format!("`{section}` is not a section"))),
        }
    }
    Ok(())
}
