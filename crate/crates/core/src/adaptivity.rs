//! Solve, estimate, mark, refine.

use std::fmt;

use crate::assembly::LdgConfig;
use crate::error::{Error, Result};
use crate::estimator::LocalEstimate;
use crate::mesh::{Mesh, Point};
use crate::verification::benchmarks::Benchmark;
use crate::verification::studies::{evaluate_level, LevelResult, ReferenceSolution, StudyOptions, StudyRow};
use crate::vi_solver::UzawaConfig;

/// Bulk marking: the fewest triangles whose indicators `η_K² + η_∂K²` sum
/// to at least `θ²` of the total. Largest indicators first, ties by id.
pub fn mark(indicators: &[f64], theta: f64) -> Vec<usize> {
    mark_fraction(indicators, theta * theta)
}

/// [`mark`] with the covered fraction `θ²` given directly.
pub fn mark_fraction(indicators: &[f64], fraction: f64) -> Vec<usize> {
    let total: f64 = indicators.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let goal = fraction * total;
    let mut sum = 0.0;
    let mut out = Vec::new();
    for k in order {
        if sum >= goal {
            break;
        }
        sum += indicators[k];
        out.push(k);
    }
    out
}

/// Marks from local estimates.
pub fn mark_estimates(est: &LocalEstimate, theta: f64) -> Vec<usize> {
    mark(&est.indicators(), theta)
}

#[derive(Debug, Clone)]
pub struct AfemConfig {
    pub theta: f64,
    /// Stop once a mesh has at least this many unknowns.
    pub max_dof: usize,
    /// Number of refinement steps; `max_levels + 1` solves at most.
    pub max_levels: usize,
    /// Stop once `η_tot` is at or below this value.
    pub tol: f64,
    pub ldg: LdgConfig,
    pub uzawa: UzawaConfig,
}

impl Default for AfemConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_dof: 200_000,
            max_levels: 10,
            tol: 0.0,
            ldg: LdgConfig::default(),
            uzawa: UzawaConfig::default(),
        }
    }
}

impl AfemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("estimator tolerance must be nonnegative, got {}", self.tol)));
        }
        if self.max_dof == 0 {
            return Err(Error::Config("max_dof must be positive".into()));
        }
        self.uzawa.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxLevels,
    MaxDof,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Tolerance => "estimator tolerance reached",
            StopReason::MaxLevels => "level limit reached",
            StopReason::MaxDof => "unknown limit reached",
        })
    }
}

/// One pass of the loop, handed to the per-level callback.
pub struct AfemLevel {
    pub result: LevelResult,
    /// Triangles marked for refinement (empty on the last level).
    pub marked: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfemReport {
    pub rows: Vec<StudyRow>,
    pub marked: Vec<usize>,
    pub stop: StopReason,
}

/// A run stopped by an error; `partial` holds the completed levels.
#[derive(Debug)]
pub struct AfemAbort {
    pub partial: Vec<StudyRow>,
    pub source: Error,
}

impl fmt::Display for AfemAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "adaptive run aborted after {} level(s): {}", self.partial.len(), self.source)
    }
}

impl std::error::Error for AfemAbort {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Problem data for an adaptive run.
pub struct AfemProblem<'a> {
    pub mesh: Mesh,
    pub benchmark: Benchmark,
    /// Errors are measured against this reference when given. Fine
    /// references must be nested in every adaptive mesh.
    pub reference: Option<&'a ReferenceSolution>,
}

/// Runs the adaptive loop, calling `on_level` after every solve.
pub fn afem_run(
    problem: AfemProblem<'_>,
    config: &AfemConfig,
    mut on_level: impl FnMut(&AfemLevel) -> Result<()>,
) -> std::result::Result<AfemReport, AfemAbort> {
    let mut rows = Vec::new();
    let abort = |rows: &Vec<StudyRow>, source| AfemAbort {
        partial: rows.clone(),
        source,
    };
    config.validate().map_err(|e| abort(&rows, e))?;
    let options = StudyOptions {
        ldg: config.ldg.clone(),
        uzawa: config.uzawa.clone(),
        ..Default::default()
    };
    let mut marked_counts = Vec::new();
    let mut mesh = problem.mesh;
    let mut level = 0;
    loop {
        let result = evaluate_level(&problem.benchmark, level, mesh, &options, problem.reference, None)
            .map_err(|e| abort(&rows, e))?;
        let stop = if result.estimates.total() <= config.tol {
            Some(StopReason::Tolerance)
        } else if level >= config.max_levels {
            Some(StopReason::MaxLevels)
        } else if result.row.dofs >= config.max_dof {
            Some(StopReason::MaxDof)
        } else {
            None
        };
        let marked = if stop.is_none() {
            mark_estimates(&result.estimates, config.theta)
        } else {
            Vec::new()
        };
        let step = AfemLevel { result, marked };
        on_level(&step).map_err(|e| abort(&rows, e))?;
        rows.push(step.result.row.clone());
        marked_counts.push(step.marked.len());
        if let Some(stop) = stop {
            return Ok(AfemReport {
                rows,
                marked: marked_counts,
                stop,
            });
        }
        mesh = step.result.mesh.refine(&step.marked);
        level += 1;
    }
}

/// Area fraction of the triangles whose closure contains `x`.
pub fn point_patch_area_fraction(mesh: &Mesh, x: Point) -> f64 {
    let touching: f64 = (0..mesh.num_elements())
        .filter(|&k| mesh.barycentric(k, x).iter().all(|&b| b >= -1e-12))
        .map(|k| mesh.element(k).area)
        .sum();
    touching / mesh.area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::benchmarks::BenchmarkId;

    #[test]
    fn bulk_marking_examples() {
        assert_eq!(mark_fraction(&[9.0, 4.0, 4.0, 1.0], 0.5), vec![0]);
        assert_eq!(mark(&[1.0; 6], 1e-6), vec![0]);
        assert_eq!(mark(&[1.0, 0.0, 2.0, 3.0], 1.0 - 1e-12), vec![3, 2, 0]);
        // ties go to the smaller id
        assert_eq!(mark(&[1.0, 2.0, 2.0, 1.0], 0.5), vec![1]);
        assert!(mark(&[0.0, 0.0], 0.5).is_empty());
    }

    #[test]
    fn invalid_theta_is_rejected() {
        for theta in [0.0, 1.0, -0.2, f64::NAN] {
            let c = AfemConfig { theta, ..Default::default() };
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn zero_levels_means_one_solve() {
        let b = Benchmark::get(BenchmarkId::Stick);
        let problem = AfemProblem {
            mesh: b.base_mesh().unwrap(),
            benchmark: b,
            reference: None,
        };
        let mut calls = 0;
        let c = AfemConfig { max_levels: 0, ..Default::default() };
        let r = afem_run(problem, &c, |l| {
            calls += 1;
            assert!(l.marked.is_empty());
            Ok(())
        })
        .unwrap();
        assert_eq!((calls, r.rows.len(), r.stop), (1, 1, StopReason::MaxLevels));
    }

    #[test]
    fn callback_error_keeps_completed_levels() {
        let b = Benchmark::get(BenchmarkId::Stick);
        let problem = AfemProblem {
            mesh: b.base_mesh().unwrap(),
            benchmark: b,
            reference: None,
        };
        let c = AfemConfig { max_levels: 3, ..Default::default() };
        let mut n = 0;
        let err = afem_run(problem, &c, |_| {
            n += 1;
            if n == 2 {
                Err(Error::Config("stop".into()))
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert_eq!(err.partial.len(), 1);
    }

    #[test]
    fn corner_fraction_on_l_shape() {
        let m = crate::mesh::l_shape().unwrap();
        let f = point_patch_area_fraction(&m, [0.5, 0.5]);
        assert!(f > 0.0 && f <= 1.0);
        let r = m.refine_uniform();
        assert!((point_patch_area_fraction(&r, [0.5, 0.5]) - f / 4.0).abs() < 1e-12);
    }
}
