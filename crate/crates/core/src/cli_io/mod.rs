//! Command-line front end: configuration, output files and the five run
//! modes (`solve`, `afem`, `study`, `verify`, `mesh-info`).

pub mod config;
pub mod report;
pub mod vtk;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptivity::{afem_run, point_patch_area_fraction, AfemProblem, AfemReport};
use crate::error::{Error, Result};
use crate::estimator::dual_norm_global;
use crate::mesh::{load_mesh_with, unit_square_bottom_friction, FaceKind, Mesh};
use crate::verification::averaging::{averaging_study, averaging_supremum};
use crate::verification::benchmarks::{Benchmark, BenchmarkId, Reference};
use crate::verification::bubble::{bubble_constants, edge_bubble_value, element_bubble_value, REFERENCE_TRIANGLE};
use crate::verification::oracles::dual_norm_rayleigh;
use crate::verification::studies::{evaluate_level, spread, uniform_study, LevelResult, ReferenceSolution, StudyReport, StudyOptions};

pub use config::RunConfig;
use report::{commented, fmt_float, format_table, rates_vs_dofs, write_study_csv};

/// Process exit status for an error: 3 when the Uzawa iteration did not
/// converge, 2 for bad input (configuration, mesh, files), 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) => 3,
        Error::Config(_) | Error::Parse { .. } | Error::InvalidMesh(_) | Error::Io(_) => 2,
        Error::Domain(_) | Error::LinearSolver { .. } => 1,
    }
}

/// Sizes the global worker pool; 0 keeps rayon's default. Only the first
/// call in a process has an effect.
pub fn configure_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Report header: mode, version and the fully resolved configuration.
pub fn report_header(mode: &str, cfg: &RunConfig) -> String {
    let mut s = format!("dgfric {} {mode}\n", env!("CARGO_PKG_VERSION"));
    s += &cfg.to_toml();
    // options left unset print nothing in TOML; spell out what they mean
    let b = cfg.benchmark().ok();
    if cfg.problem.mesh.is_none() {
        s += "problem.mesh unset: benchmark base mesh\n";
    }
    if cfg.problem.g.is_none() {
        s += &format!("problem.g unset: {}\n", b.as_ref().map(|b| b.g.to_string()).unwrap_or_default());
    }
    if cfg.problem.source.is_none() {
        s += &format!("problem.source unset: {}\n", b.as_ref().map(|b| format!("{:?}", b.f)).unwrap_or_default());
    }
    if cfg.solver.rho.is_none() {
        s += "solver.rho unset: 1 / (g² σ_max) from power iteration\n";
    }
    commented(&s)
}

/// Starting mesh and problem data of a run.
pub fn initial_problem(cfg: &RunConfig) -> Result<(Mesh, Benchmark)> {
    let bench = cfg.benchmark()?;
    let mut mesh = match &cfg.problem.mesh {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read mesh {}: {e}", p.display())))?;
            load_mesh_with(&text, cfg.mesh_options())?
        }
        None => bench.base_mesh()?,
    };
    for _ in 0..cfg.problem.refinements {
        mesh = mesh.refine_uniform();
    }
    Ok((mesh, bench))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_level_vtk(dir: &Path, stem: &str, level: &LevelResult) -> Result<Vec<PathBuf>> {
    let mut files = vec![dir.join(format!("{stem}.vtk"))];
    let mut w = create(&files[0])?;
    vtk::write_solution(&mut w, &level.mesh, &level.solution.u, Some(&level.estimates))?;
    w.flush()?;
    if !level.mesh.friction_faces().is_empty() {
        files.push(dir.join(format!("{stem}_multiplier.vtk")));
        let mut w = create(&files[1])?;
        vtk::write_multiplier(&mut w, &level.mesh, &level.solution.lambda, Some(&level.estimates.osc_lambda))?;
        w.flush()?;
    }
    Ok(files)
}

fn reference_if_exact(bench: &Benchmark) -> Option<ReferenceSolution> {
    match (bench.reference, bench.exact) {
        (Reference::Exact, Some(e)) => Some(ReferenceSolution::Exact(e)),
        _ => None,
    }
}

/// Single solve on the starting mesh.
pub fn run_solve(cfg: &RunConfig, log: &mut dyn Write) -> Result<LevelResult> {
    let (mesh, bench) = initial_problem(cfg)?;
    let reference = reference_if_exact(&bench);
    let options = cfg.study_options();
    let level = evaluate_level(&bench, cfg.problem.refinements, mesh, &options, reference.as_ref(), None)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    if cfg.output.vtk {
        write_level_vtk(dir, "solution", &level)?;
    }
    let r = &level.solution.report;
    let mut s = report_header("solve", cfg);
    s += &format!("benchmark = {}\n", bench.id);
    s += &format!("elements = {}\n", level.mesh.num_elements());
    s += &format!("dofs = {}\n", level.row.dofs);
    s += &format!("friction_faces = {}\n", level.mesh.friction_faces().len());
    s += &format!("uzawa_iterations = {}\n", r.iterations);
    s += &format!("rho = {}\n", fmt_float(r.rho));
    s += &format!("kkt_residual = {}\n", fmt_float(r.kkt_residual));
    s += &format!("complementarity = {}\n", fmt_float(r.complementarity));
    s += &format!("max_abs_lambda = {}\n", fmt_float(level.solution.lambda.max_abs()));
    s += &format!("eta_K_tot = {}\n", fmt_float(level.row.eta_k_tot));
    s += &format!("eta_dK_tot = {}\n", fmt_float(level.row.eta_dk_tot));
    s += &format!("eta_tot = {}\n", fmt_float(level.row.eta_tot()));
    if let Some(e) = level.row.error {
        s += &format!("error = {}\n", fmt_float(e));
    }
    if let Some(e) = level.row.effectivity {
        s += &format!("effectivity = {e}\n");
    }
    fs::write(dir.join("summary.txt"), &s)?;
    log.write_all(s.as_bytes())?;
    Ok(level)
}

/// Adaptive loop; writes VTK per level, `afem.csv` and `afem_report.txt`.
/// On failure the completed levels are still written.
pub fn run_afem(cfg: &RunConfig, log: &mut dyn Write) -> Result<AfemReport> {
    let (mesh, bench) = initial_problem(cfg)?;
    let reference = reference_if_exact(&bench);
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let corner = (bench.id == BenchmarkId::LShape).then_some([0.5, 0.5]);
    let mut corner_fractions = Vec::new();
    let problem = AfemProblem {
        mesh,
        benchmark: bench,
        reference: reference.as_ref(),
    };
    let mut head = format!("{:>5} {:>8} {:>8} {:>12} {:>7}", "level", "dofs", "marked", "eta_tot", "uzawa");
    if corner.is_some() {
        head += &format!(" {:>12}", "corner_frac");
    }
    writeln!(log, "{head}")?;
    let outcome = afem_run(problem, &cfg.afem_config(), |step| {
        let l = &step.result;
        if cfg.output.vtk {
            write_level_vtk(&dir, &format!("level_{:02}", l.row.level), l)?;
        }
        let mut line = format!(
            "{:>5} {:>8} {:>8} {:12.4e} {:>7}",
            l.row.level,
            l.row.dofs,
            step.marked.len(),
            l.row.eta_tot(),
            l.row.uzawa_iterations
        );
        if let Some(x) = corner {
            let f = point_patch_area_fraction(&l.mesh, x);
            corner_fractions.push(f);
            line += &format!(" {f:12.4e}");
        }
        writeln!(log, "{line}")?;
        Ok(())
    });
    let (rows, marked, stop, failure) = match outcome {
        Ok(r) => (r.rows.clone(), r.marked.clone(), Some(r.stop), Ok(r)),
        Err(abort) => (abort.partial, Vec::new(), None, Err(abort.source)),
    };
    let mut w = create(&dir.join("afem.csv"))?;
    write_study_csv(&mut w, &rows, Some(("marked", &marked)))?;
    w.flush()?;
    let mut s = report_header("afem", cfg);
    s += &format_table(&rows);
    if !corner_fractions.is_empty() {
        s += &format!("corner patch area fractions: {}\n", corner_fractions.iter().map(|f| fmt_float(*f)).collect::<Vec<_>>().join(" "));
    }
    match (&stop, &failure) {
        (Some(stop), _) => s += &format!("stopped: {stop}\n"),
        (None, Err(e)) => s += &format!("aborted: {e}\n"),
        _ => {}
    }
    fs::write(dir.join("afem_report.txt"), &s)?;
    failure
}

/// Uniform refinement study; writes `study.csv` and `study_report.txt`.
pub fn run_study(cfg: &RunConfig, log: &mut dyn Write) -> Result<StudyReport> {
    if cfg.problem.mesh.is_some() {
        return Err(Error::Config("a study runs on a built-in benchmark; remove problem.mesh".into()));
    }
    let bench = cfg.benchmark()?;
    let report = uniform_study(&bench, &cfg.study.levels, &cfg.study_options())?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("study.csv"))?;
    write_study_csv(&mut w, &report.rows, None)?;
    w.flush()?;
    let mut s = report_header("study", cfg);
    s += &format_table(&report.rows);
    let fmt_rates = |v: Vec<Option<f64>>| {
        v.iter()
            .map(|r| r.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    s += &format!("rate eta_tot: {}\n", fmt_rates(rates_vs_dofs(&report.rows, |r| Some(r.eta_tot()))));
    s += &format!("rate error:   {}\n", fmt_rates(rates_vs_dofs(&report.rows, |r| r.error)));
    fs::write(dir.join("study_report.txt"), &s)?;
    log.write_all(s.as_bytes())?;
    Ok(report)
}

/// One numerical check of `verify`.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
}

fn two_triangles() -> Result<Mesh> {
    crate::mesh::load_mesh("dgmesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nboundary 4\n0 1 G2\n1 2 G1\n2 3 G1\n3 0 G1\n")
}

/// Averaging estimate on 100 random fields over three levels: the largest
/// ratio per level may drift by at most 1.2× across levels. The exact
/// suprema on the same meshes are reported alongside.
pub fn check_averaging() -> Result<Check> {
    let base = unit_square_bottom_friction(2)?;
    let study = averaging_study(&base, 100, 3, 2024);
    let (d0, d1) = study.drift();
    let (g0, g1) = study.growth();
    let mut mesh = base;
    let mut sup = Vec::new();
    for _ in 0..3 {
        sup.push(averaging_supremum(&mesh));
        mesh = mesh.refine_uniform();
    }
    let sup_drift = |f: fn(&(f64, f64)) -> f64| spread(&sup.iter().map(f).collect::<Vec<_>>());
    let bounded = study.levels.iter().all(|c| c.0.is_finite() && c.1.is_finite());
    let pairs = |v: &[(f64, f64)]| v.iter().map(|(a, b)| format!("({a:.4}, {b:.4})")).collect::<Vec<_>>().join(" ");
    Ok(Check {
        name: "averaging constants (lemma 2.1)",
        passed: bounded && d0 <= 1.2 && d1 <= 1.2,
        measured: format!(
            "sampled max per level {}; drift {d0:.4} / {d1:.4}; growth over base {g0:.4} / {g1:.4}; exact sup per level {}; sup drift {:.4} / {:.4}",
            pairs(&study.levels),
            pairs(&sup),
            sup_drift(|c| c.0),
            sup_drift(|c| c.1)
        ),
    })
}

/// Bubble constants on every shape of the base meshes, plus exact
/// normalization and boundary values.
pub fn check_bubbles() -> Result<Check> {
    let mut lo = [f64::INFINITY; 6];
    let mut hi = [0.0f64; 6];
    let mut ok = true;
    let mut shapes = vec![
        REFERENCE_TRIANGLE,
        [[0.0, 0.0], [1.0, 0.0], [0.5, 0.75f64.sqrt()]],
        // smallest angle 20 degrees
        [[0.0, 0.0], [1.0, 0.0], [20f64.to_radians().cos(), 20f64.to_radians().sin()]],
    ];
    for id in BenchmarkId::ALL {
        let m = Benchmark::get(id).base_mesh()?;
        shapes.extend((0..m.num_elements()).map(|k| m.element_points(k)));
    }
    {
        for p in shapes {
            let c = bubble_constants(p);
            ok &= c.all_positive_finite();
            for (i, v) in c.values().into_iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
    }
    let midpoint = edge_bubble_value([0.0, 0.5, 0.5]);
    let mut trace = 0.0f64;
    for i in 0..=16 {
        let t = i as f64 / 16.0;
        for l in [[0.0, t, 1.0 - t], [t, 0.0, 1.0 - t], [t, 1.0 - t, 0.0]] {
            trace = trace.max(element_bubble_value(l).abs());
        }
    }
    ok &= midpoint == 1.0 && trace == 0.0;
    let ranges: Vec<String> = lo.iter().zip(&hi).map(|(a, b)| format!("[{a:.4e}, {b:.4e}]")).collect();
    Ok(Check {
        name: "bubble constants (lemma 4.1)",
        passed: ok,
        measured: format!("ranges {}; tau(midpoint) = {midpoint}; max |phi_K| on boundary = {trace}", ranges.join(" ")),
    })
}

/// Bridge ratio spread over the configured levels of STICK.
pub fn check_bridge(cfg: &RunConfig) -> Result<Check> {
    let bench = Benchmark::get(BenchmarkId::Stick);
    let options = StudyOptions {
        bridge: true,
        ..cfg.study_options()
    };
    let report = uniform_study(&bench, &cfg.study.levels, &options)?;
    let ratios: Vec<f64> = report.rows.iter().filter_map(|r| r.bridge_ratio).collect();
    let s = spread(&ratios);
    Ok(Check {
        name: "bridge inequality",
        passed: ratios.len() == report.rows.len() && s <= 3.0,
        measured: format!(
            "ratios {}; max/min {s:.4}",
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" ")
        ),
    })
}

/// Local dual-norm evaluation against the dense Rayleigh quotient.
pub fn check_dual_norm() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let meshes = [
        two_triangles()?,
        unit_square_bottom_friction(1)?,
        unit_square_bottom_friction(2)?,
        Benchmark::get(BenchmarkId::Affine).base_mesh()?,
    ];
    for m in meshes.iter().filter(|m| m.num_elements() <= 8) {
        for _ in 0..20 {
            let mu: Vec<f64> = (0..3 * m.friction_faces().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = rng.random_range(0.1..4.0);
            worst = worst.max((dual_norm_global(m, g, &mu) - dual_norm_rayleigh(m, g, &mu)).abs());
        }
    }
    Ok(Check {
        name: "dual norm vs dense oracle",
        passed: worst <= 1e-8,
        measured: format!("max difference {worst:.3e}"),
    })
}

/// Runs all checks and prints one line per check.
pub fn run_verify(cfg: &RunConfig, log: &mut dyn Write) -> Result<Vec<Check>> {
    write!(log, "{}", report_header("verify", cfg))?;
    let checks = vec![check_averaging()?, check_bubbles()?, check_bridge(cfg)?, check_dual_norm()?];
    for c in &checks {
        writeln!(log, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured)?;
    }
    Ok(checks)
}

/// Mesh statistics of the starting mesh.
pub fn run_mesh_info(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let (m, bench) = initial_problem(cfg)?;
    let kinds = |k| m.faces_of_kind(k).count();
    writeln!(log, "problem        {}", bench.id)?;
    writeln!(log, "vertices       {}", m.vertices().len())?;
    writeln!(log, "triangles      {}", m.num_elements())?;
    writeln!(log, "dofs           {}", 3 * m.num_elements())?;
    writeln!(log, "faces          {} interior, {} on G1, {} on G2", kinds(FaceKind::Interior), kinds(FaceKind::Dirichlet), kinds(FaceKind::Friction))?;
    writeln!(log, "hanging nodes  {}", m.hanging_nodes().len())?;
    writeln!(log, "area           {}", fmt_float(m.area()))?;
    writeln!(log, "max diameter   {}", fmt_float(m.max_diameter()))?;
    writeln!(log, "min angle      {:.6} deg", m.min_angle_deg())?;
    writeln!(log, "1-irregular    {}", m.is_one_irregular())?;
    Ok(())
}
