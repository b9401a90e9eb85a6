//! C interface to `dgfric`.
//!
//! Objects are opaque heap handles created by `*_new`/`*_from_*` functions
//! and released with the matching `*_free`. Every fallible call returns a
//! [`DgfricStatus`]; on failure a message is kept per thread and can be
//! copied out with [`dgfric_last_error`]. Panics are caught at the boundary
//! and reported as [`DgfricStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dgfric::adaptivity::mark;
use dgfric::assembly::{Beta, LdgConfig, Penalty};
use dgfric::cli_io::vtk;
use dgfric::mesh::{load_mesh, Mesh};
use dgfric::verification::benchmarks::{Benchmark, BenchmarkId, Source};
use dgfric::verification::studies::{evaluate_level, LevelResult, StudyOptions};
use dgfric::vi_solver::UzawaConfig;
use dgfric::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgfricStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    InvalidMesh = 4,
    Config = 5,
    NonConvergence = 6,
    LinearSolver = 7,
    Io = 8,
    Domain = 9,
    /// The output buffer is too small; nothing was written.
    BufferTooSmall = 10,
    Panic = 11,
}

/// Opaque triangulation.
pub struct DgfricMesh(Mesh);

/// Opaque discrete solution with its estimates.
pub struct DgfricSolution(LevelResult);

/// Problem data and solver settings; start from [`dgfric_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DgfricSolveOptions {
    /// Friction bound `g > 0`.
    pub g: f64,
    /// Use `(2π² + 1) sin(πx) sin(πy)` as source when nonzero, otherwise
    /// the constant `source_constant`.
    pub sine_source: i32,
    pub source_constant: f64,
    /// Penalty number on every face.
    pub penalty: f64,
    /// Uzawa step; values `<= 0` select it automatically.
    pub rho: f64,
    pub tol: f64,
    pub tol_lin: f64,
    pub tol_c: f64,
    pub max_iter: usize,
}

/// Scalar results of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DgfricSummary {
    pub dofs: usize,
    pub multiplier_points: usize,
    pub uzawa_iterations: usize,
    pub eta_k_tot: f64,
    pub eta_dk_tot: f64,
    pub eta_tot: f64,
    pub kkt_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> DgfricStatus {
    match e {
        Error::Parse { .. } => DgfricStatus::Parse,
        Error::InvalidMesh(_) => DgfricStatus::InvalidMesh,
        Error::Config(_) => DgfricStatus::Config,
        Error::Domain(_) => DgfricStatus::Domain,
        Error::LinearSolver { .. } => DgfricStatus::LinearSolver,
        Error::NonConvergence(_) => DgfricStatus::NonConvergence,
        Error::Io(_) => DgfricStatus::Io,
    }
}

struct Fail(DgfricStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail(status: DgfricStatus, msg: &str) -> Fail {
    Fail(status, msg.to_string())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DgfricStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DgfricStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            DgfricStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(DgfricStatus::NullPointer, &format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DgfricStatus::InvalidArgument, &format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(DgfricStatus::NullPointer, &format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(DgfricStatus::NullPointer, &format!("{what} is null")))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(
            DgfricStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(fail(DgfricStatus::NullPointer, "buffer is null"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies the calling thread's last error message (NUL-terminated, possibly
/// truncated) into `buf` and returns the full message length without the
/// terminator. `buf` may be null when `len` is 0.
///
/// # Safety
/// `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dgfric_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parses a mesh in the `dgmesh 1` text format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgfric_mesh_from_string(text: *const c_char, out: *mut *mut DgfricMesh) -> DgfricStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let mesh = load_mesh(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(DgfricMesh(mesh)));
        Ok(())
    })
}

/// Base mesh of a built-in problem (`"stick"`, `"slip"`, `"lshape"`,
/// `"affine"`), refined uniformly `refinements` times.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgfric_mesh_benchmark(name: *const c_char, refinements: u32, out: *mut *mut DgfricMesh) -> DgfricStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let id: BenchmarkId = str_arg(name, "name")?.parse()?;
        let mesh = Benchmark::get(id).mesh(refinements as usize)?;
        *out = Box::into_raw(Box::new(DgfricMesh(mesh)));
        Ok(())
    })
}

/// Releases a mesh; null is ignored.
///
/// # Safety
/// `mesh` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dgfric_mesh_free(mesh: *mut DgfricMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of triangles, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgfric_mesh_num_elements(mesh: *const DgfricMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.num_elements())
}

/// Number of Γ2 faces, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgfric_mesh_num_friction_faces(mesh: *const DgfricMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.friction_faces().len())
}

/// Refines the `n` listed triangles (plus closure) into a new mesh.
///
/// # Safety
/// `marked` must point to `n` readable ids (or be null with `n == 0`).
#[no_mangle]
pub unsafe extern "C" fn dgfric_mesh_refine(
    mesh: *const DgfricMesh,
    marked: *const usize,
    n: usize,
    out: *mut *mut DgfricMesh,
) -> DgfricStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = &ref_arg(mesh, "mesh")?.0;
        let ids: &[usize] = if n == 0 {
            &[]
        } else if marked.is_null() {
            return Err(fail(DgfricStatus::NullPointer, "marked is null"));
        } else {
            std::slice::from_raw_parts(marked, n)
        };
        if let Some(bad) = ids.iter().find(|&&k| k >= m.num_elements()) {
            return Err(Fail(DgfricStatus::InvalidArgument, format!("triangle {bad} does not exist")));
        }
        *out = Box::into_raw(Box::new(DgfricMesh(m.refine(ids))));
        Ok(())
    })
}

/// Default options: `g = 1`, source 1, penalty 10, automatic step.
#[no_mangle]
pub extern "C" fn dgfric_solve_options_default() -> DgfricSolveOptions {
    let u = UzawaConfig::default();
    DgfricSolveOptions {
        g: 1.0,
        sine_source: 0,
        source_constant: 1.0,
        penalty: 10.0,
        rho: 0.0,
        tol: u.tol,
        tol_lin: u.tol_lin,
        tol_c: u.tol_c,
        max_iter: u.max_iter,
    }
}

/// Solves the friction problem on `mesh` and evaluates the estimators.
///
/// # Safety
/// `mesh` and `options` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgfric_solve(
    mesh: *const DgfricMesh,
    options: *const DgfricSolveOptions,
    out: *mut *mut DgfricSolution,
) -> DgfricStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = ref_arg(mesh, "mesh")?.0.clone();
        let o = *ref_arg(options, "options")?;
        if !(o.g > 0.0 && o.g.is_finite()) {
            return Err(fail(DgfricStatus::Config, "g must be positive"));
        }
        if !o.source_constant.is_finite() {
            return Err(fail(DgfricStatus::Config, "source_constant must be finite"));
        }
        let f = if o.sine_source != 0 { Source::Sine } else { Source::Constant(o.source_constant) };
        let bench = Benchmark::custom(f, o.g);
        let opts = StudyOptions {
            ldg: LdgConfig {
                penalty: Penalty::Uniform(o.penalty),
                beta: Beta::Uniform([0.0, 0.0]),
            },
            uzawa: UzawaConfig {
                rho: (o.rho > 0.0).then_some(o.rho),
                tol: o.tol,
                tol_lin: o.tol_lin,
                tol_c: o.tol_c,
                max_iter: o.max_iter,
                initial: None,
            },
            ..Default::default()
        };
        opts.uzawa.validate()?;
        let level = evaluate_level(&bench, 0, m, &opts, None, None)?;
        *out = Box::into_raw(Box::new(DgfricSolution(level)));
        Ok(())
    })
}

/// Releases a solution; null is ignored.
///
/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dgfric_solution_free(solution: *mut DgfricSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Scalar results.
///
/// # Safety
/// `solution` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgfric_solution_summary(solution: *const DgfricSolution, out: *mut DgfricSummary) -> DgfricStatus {
    guard(|| {
        let s = &ref_arg(solution, "solution")?.0;
        let out = out_arg(out, "out")?;
        *out = DgfricSummary {
            dofs: s.row.dofs,
            multiplier_points: s.solution.lambda.len(),
            uzawa_iterations: s.row.uzawa_iterations,
            eta_k_tot: s.row.eta_k_tot,
            eta_dk_tot: s.row.eta_dk_tot,
            eta_tot: s.row.eta_tot(),
            kkt_residual: s.solution.report.kkt_residual,
        };
        Ok(())
    })
}

/// Copies the `3 × triangles` coefficients of `u_h` (vertex values per
/// triangle) into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dgfric_solution_u(solution: *const DgfricSolution, buf: *mut f64, len: usize) -> DgfricStatus {
    guard(|| copy_out(&ref_arg(solution, "solution")?.0.solution.u.coeffs, buf, len))
}

/// Copies the multiplier at the three Gauss points of every Γ2 face.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dgfric_solution_lambda(solution: *const DgfricSolution, buf: *mut f64, len: usize) -> DgfricStatus {
    guard(|| copy_out(&ref_arg(solution, "solution")?.0.solution.lambda.values, buf, len))
}

/// Copies the refinement indicators `η_K² + η_∂K²`, one per triangle.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dgfric_solution_indicators(solution: *const DgfricSolution, buf: *mut f64, len: usize) -> DgfricStatus {
    guard(|| copy_out(&ref_arg(solution, "solution")?.0.estimates.indicators(), buf, len))
}

/// Writes the solution as legacy VTK to `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dgfric_solution_write_vtk(solution: *const DgfricSolution, path: *const c_char) -> DgfricStatus {
    guard(|| {
        let s = &ref_arg(solution, "solution")?.0;
        let path = str_arg(path, "path")?;
        let mut w = BufWriter::new(File::create(path).map_err(Error::from)?);
        vtk::write_solution(&mut w, &s.mesh, &s.solution.u, Some(&s.estimates)).map_err(Error::from)?;
        w.flush().map_err(Error::from)?;
        Ok(())
    })
}

/// Bulk marking of `indicators`. On entry `*count` is the capacity of
/// `marked` (at least `n` is always enough); on exit it is the number of
/// ids written.
///
/// # Safety
/// `indicators` must hold `n` doubles and `marked` `*count` ids.
#[no_mangle]
pub unsafe extern "C" fn dgfric_mark(
    indicators: *const f64,
    n: usize,
    theta: f64,
    marked: *mut usize,
    count: *mut usize,
) -> DgfricStatus {
    guard(|| {
        let count = out_arg(count, "count")?;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(fail(DgfricStatus::InvalidArgument, "theta must lie in (0, 1)"));
        }
        let ind: &[f64] = if n == 0 {
            &[]
        } else if indicators.is_null() {
            return Err(fail(DgfricStatus::NullPointer, "indicators is null"));
        } else {
            std::slice::from_raw_parts(indicators, n)
        };
        let ids = mark(ind, theta);
        if ids.len() > *count {
            return Err(Fail(DgfricStatus::BufferTooSmall, format!("{} ids marked, room for {}", ids.len(), *count)));
        }
        if !ids.is_empty() {
            if marked.is_null() {
                return Err(fail(DgfricStatus::NullPointer, "marked is null"));
            }
            ptr::copy_nonoverlapping(ids.as_ptr(), marked, ids.len());
        }
        *count = ids.len();
        Ok(())
    })
}
