//! Analysis of parameterized linear ODE systems dY/dz = A(z,t) Y at their
//! singular points: formal solutions, singular directions, Borel-Laplace
//! sums, Stokes matrices, monodromy and integrability checks.
//!
//! The series and expression layers are generic over the float type; the
//! numerical pipeline on top of them runs in double precision.

pub mod continuation;
pub mod directions;
pub mod error;
pub mod expr;
pub mod formal;
pub mod galois;
pub mod linalg;
pub mod matseries;
pub mod quad;
pub mod scalar;
pub mod series;
pub mod stokes;
pub mod summation;
pub mod system;

pub use error::{Error, Result};
pub use expr::{Origin, ParamRational, ParameterGrid, Var};
pub use formal::{formal_at, formal_solution, FormalSolution, QExp, ThetaOperator};
pub use matseries::MatSeries;
pub use scalar::{Real, Scaled};
pub use series::{Gevrey, GevreyFit, Pade, PuiseuxSeries, Rational};
pub use system::{LocalSystem, ParamSystem, Singularity};

pub type C64 = num_complex::Complex<f64>;
pub type C32 = num_complex::Complex<f32>;
pub type Series = PuiseuxSeries<f64>;
pub type Series32 = PuiseuxSeries<f32>;
pub type Expr = ParamRational<f64>;
pub type Expr32 = ParamRational<f32>;
