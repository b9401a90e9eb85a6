//! Built-in test problems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::dg_space::ExactField;
use crate::error::{Error, Result};
use crate::mesh::{l_shape, structured_rectangle, unit_square_bottom_friction, BoundaryTag, Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchmarkId {
    Stick,
    Slip,
    LShape,
    Affine,
    /// User-supplied mesh and data.
    Custom,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 4] = [BenchmarkId::Stick, BenchmarkId::Slip, BenchmarkId::LShape, BenchmarkId::Affine];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkId::Stick => "stick",
            BenchmarkId::Slip => "slip",
            BenchmarkId::LShape => "lshape",
            BenchmarkId::Affine => "affine",
            BenchmarkId::Custom => "custom",
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BenchmarkId::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown benchmark `{s}` (expected stick, slip, lshape or affine)")))
    }
}

/// Right-hand side `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// `(2π² + 1) sin(πx) sin(πy)`
    Sine,
    Constant(f64),
}

impl Source {
    pub fn value(self, x: Point) -> f64 {
        match self {
            Source::Sine => sine_source(x),
            Source::Constant(c) => c,
        }
    }
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("sine") {
            return Ok(Source::Sine);
        }
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|c| c.is_finite())
            .map(Source::Constant)
            .ok_or_else(|| Error::Config(format!("source must be `sine` or a number, got `{s}`")))
    }
}

/// Closed-form solution pair.
#[derive(Clone, Copy)]
pub struct Exact {
    pub u: fn(Point) -> f64,
    pub grad_u: fn(Point) -> Point,
    pub lambda: fn(Point) -> f64,
}

impl ExactField for Exact {
    fn value(&self, x: Point) -> f64 {
        (self.u)(x)
    }
    fn gradient(&self, x: Point) -> Point {
        (self.grad_u)(x)
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Exact")
    }
}

/// How the reference solution is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Exact,
    /// Conforming P1 solve on a mesh this many uniform levels finer.
    FineConforming { levels_finer: usize },
    /// No reference; only qualitative properties are checked.
    None,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub id: BenchmarkId,
    pub g: f64,
    pub f: Source,
    pub exact: Option<Exact>,
    pub reference: Reference,
}

impl Benchmark {
    pub fn get(id: BenchmarkId) -> Benchmark {
        match id {
            BenchmarkId::Stick => Benchmark {
                id,
                g: 4.0,
                f: Source::Sine,
                exact: Some(Exact {
                    u: sine_u,
                    grad_u: sine_grad,
                    lambda: |x| PI / 4.0 * (PI * x[0]).sin(),
                }),
                reference: Reference::Exact,
            },
            BenchmarkId::Slip => Benchmark {
                id,
                g: 0.1,
                f: Source::Sine,
                exact: None,
                reference: Reference::FineConforming { levels_finer: 4 },
            },
            BenchmarkId::LShape => Benchmark {
                id,
                g: 1.0,
                f: Source::Constant(1.0),
                exact: None,
                reference: Reference::None,
            },
            BenchmarkId::Affine => Benchmark {
                id,
                g: 1.0,
                f: Source::Constant(0.0),
                exact: Some(Exact {
                    u: |_| 0.0,
                    grad_u: |_| [0.0, 0.0],
                    lambda: |_| 0.0,
                }),
                reference: Reference::Exact,
            },
            BenchmarkId::Custom => Benchmark::custom(Source::Constant(1.0), 1.0),
        }
    }

    /// Problem on a user mesh with no reference solution.
    pub fn custom(f: Source, g: f64) -> Benchmark {
        Benchmark {
            id: BenchmarkId::Custom,
            g,
            f,
            exact: None,
            reference: Reference::None,
        }
    }

    /// Coarsest mesh of the benchmark.
    pub fn base_mesh(&self) -> Result<Mesh> {
        match self.id {
            BenchmarkId::Stick | BenchmarkId::Slip => unit_square_bottom_friction(2),
            BenchmarkId::LShape => l_shape(),
            BenchmarkId::Affine => structured_rectangle((0.0, 1.0), (0.0, 0.25), 4, 1, |m| {
                if m[0] == 0.0 {
                    BoundaryTag::Dirichlet
                } else {
                    BoundaryTag::Friction
                }
            }),
            BenchmarkId::Custom => Err(Error::Config("a custom problem needs a mesh file".into())),
        }
    }

    /// Base mesh refined uniformly `level` times.
    pub fn mesh(&self, level: usize) -> Result<Mesh> {
        let mut m = self.base_mesh()?;
        for _ in 0..level {
            m = m.refine_uniform();
        }
        Ok(m)
    }

    pub fn source(&self) -> impl Fn(Point) -> f64 + Sync + Copy + 'static {
        let f = self.f;
        move |x| f.value(x)
    }

    /// Largest violation of `|λ| ≤ 1` and `λu = |u|` over points on Γ2.
    pub fn kkt_defect(&self, points: &[Point]) -> Option<f64> {
        let ex = self.exact?;
        Some(
            points
                .iter()
                .map(|&x| {
                    let (u, l) = ((ex.u)(x), (ex.lambda)(x));
                    (l.abs() - 1.0).max(0.0) + (l * u - u.abs()).abs()
                })
                .fold(0.0, f64::max),
        )
    }
}

/// All built-in benchmarks.
pub fn builtin_benchmarks() -> Vec<Benchmark> {
    BenchmarkId::ALL.into_iter().map(Benchmark::get).collect()
}

fn sine_u(x: Point) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn sine_grad(x: Point) -> Point {
    [
        PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
        PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
    ]
}

fn sine_source(x: Point) -> f64 {
    (2.0 * PI * PI + 1.0) * sine_u(x)
}
