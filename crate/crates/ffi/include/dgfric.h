#ifndef DGFRIC_H
#define DGFRIC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call.
typedef enum DgfricStatus {
  DGFRIC_STATUS_OK = 0,
  DGFRIC_STATUS_NULL_POINTER = 1,
  DGFRIC_STATUS_INVALID_ARGUMENT = 2,
  DGFRIC_STATUS_PARSE = 3,
  DGFRIC_STATUS_INVALID_MESH = 4,
  DGFRIC_STATUS_CONFIG = 5,
  DGFRIC_STATUS_NON_CONVERGENCE = 6,
  DGFRIC_STATUS_LINEAR_SOLVER = 7,
  DGFRIC_STATUS_IO = 8,
  DGFRIC_STATUS_DOMAIN = 9,
  // The output buffer is too small; nothing was written.
  DGFRIC_STATUS_BUFFER_TOO_SMALL = 10,
  DGFRIC_STATUS_PANIC = 11,
} DgfricStatus;

// Opaque triangulation.
typedef struct DgfricMesh DgfricMesh;

// Opaque discrete solution with its estimates.
typedef struct DgfricSolution DgfricSolution;

// Problem data and solver settings; start from [`dgfric_solve_options_default`].
typedef struct DgfricSolveOptions {
  // Friction bound `g > 0`.
  double g;
  // Use `(2π² + 1) sin(πx) sin(πy)` as source when nonzero, otherwise
  // the constant `source_constant`.
  int32_t sine_source;
  double source_constant;
  // Penalty number on every face.
  double penalty;
  // Uzawa step; values `<= 0` select it automatically.
  double rho;
  double tol;
  double tol_lin;
  double tol_c;
  size_t max_iter;
} DgfricSolveOptions;

// Scalar results of a solve.
typedef struct DgfricSummary {
  size_t dofs;
  size_t multiplier_points;
  size_t uzawa_iterations;
  double eta_k_tot;
  double eta_dk_tot;
  double eta_tot;
  double kkt_residual;
} DgfricSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message (NUL-terminated, possibly
// truncated) into `buf` and returns the full message length without the
// terminator. `buf` may be null when `len` is 0.
//
// # Safety
// `buf` must be valid for `len` bytes.
size_t dgfric_last_error(char *buf, size_t len);

// Parses a mesh in the `dgmesh 1` text format.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum DgfricStatus dgfric_mesh_from_string(const char *text, struct DgfricMesh **out);

// Base mesh of a built-in problem (`"stick"`, `"slip"`, `"lshape"`,
// `"affine"`), refined uniformly `refinements` times.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum DgfricStatus dgfric_mesh_benchmark(const char *name,
                                        uint32_t refinements,
                                        struct DgfricMesh **out);

// Releases a mesh; null is ignored.
//
// # Safety
// `mesh` must come from this library and not be used afterwards.
void dgfric_mesh_free(struct DgfricMesh *mesh);

// Number of triangles, or 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live handle.
size_t dgfric_mesh_num_elements(const struct DgfricMesh *mesh);

// Number of Γ2 faces, or 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live handle.
size_t dgfric_mesh_num_friction_faces(const struct DgfricMesh *mesh);

// Refines the `n` listed triangles (plus closure) into a new mesh.
//
// # Safety
// `marked` must point to `n` readable ids (or be null with `n == 0`).
enum DgfricStatus dgfric_mesh_refine(const struct DgfricMesh *mesh,
                                     const size_t *marked,
                                     size_t n,
                                     struct DgfricMesh **out);

// Default options: `g = 1`, source 1, penalty 10, automatic step.
struct DgfricSolveOptions dgfric_solve_options_default(void);

// Solves the friction problem on `mesh` and evaluates the estimators.
//
// # Safety
// `mesh` and `options` must be live; `out` must be writable.
enum DgfricStatus dgfric_solve(const struct DgfricMesh *mesh,
                               const struct DgfricSolveOptions *options,
                               struct DgfricSolution **out);

// Releases a solution; null is ignored.
//
// # Safety
// `solution` must come from this library and not be used afterwards.
void dgfric_solution_free(struct DgfricSolution *solution);

// Scalar results.
//
// # Safety
// `solution` must be live; `out` must be writable.
enum DgfricStatus dgfric_solution_summary(const struct DgfricSolution *solution,
                                          struct DgfricSummary *out);

// Copies the `3 × triangles` coefficients of `u_h` (vertex values per
// triangle) into `buf`.
//
// # Safety
// `buf` must be valid for `len` doubles.
enum DgfricStatus dgfric_solution_u(const struct DgfricSolution *solution, double *buf, size_t len);

// Copies the multiplier at the three Gauss points of every Γ2 face.
//
// # Safety
// `buf` must be valid for `len` doubles.
enum DgfricStatus dgfric_solution_lambda(const struct DgfricSolution *solution,
                                         double *buf,
                                         size_t len);

// Copies the refinement indicators `η_K² + η_∂K²`, one per triangle.
//
// # Safety
// `buf` must be valid for `len` doubles.
enum DgfricStatus dgfric_solution_indicators(const struct DgfricSolution *solution,
                                             double *buf,
                                             size_t len);

// Writes the solution as legacy VTK to `path`.
//
// # Safety
// `path` must be a NUL-terminated string.
enum DgfricStatus dgfric_solution_write_vtk(const struct DgfricSolution *solution,
                                            const char *path);

// Bulk marking of `indicators`. On entry `*count` is the capacity of
// `marked` (at least `n` is always enough); on exit it is the number of
// ids written.
//
// # Safety
// `indicators` must hold `n` doubles and `marked` `*count` ids.
enum DgfricStatus dgfric_mark(const double *indicators,
                              size_t n,
                              double theta,
                              size_t *marked,
                              size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DGFRIC_H */
