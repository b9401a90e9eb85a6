//! Numerical counterparts of the analytical tools behind the estimator:
//! the conforming averaging operator, bubble functions, the bridge
//! inequality, benchmark problems and effectivity studies.

pub mod benchmarks;
pub mod averaging;
pub mod bubble;
pub mod conforming;
pub mod oracles;
pub mod studies;
