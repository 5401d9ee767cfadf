//! Steady states of nonlocal bistable equations `J * u - u + f(u) = 0` outside obstacles, on a truncated 2D grid.
//!
//! The core is generic over the scalar type; the aliases below fix it to `f64`.

pub mod config;
pub mod construction;
pub mod energy;
pub mod error;
pub mod fft2;
pub mod field;
pub mod geometry;
pub mod kernels;
pub mod nonlinearity;
pub mod nonlocal_op;
pub mod quad;
pub mod scalar;
pub mod scenario;
pub mod solver;
pub mod validation;

pub use error::{Error, ErrorClass, Result};

pub type Field64 = field::Field<f64>;
pub type GridDomain64 = geometry::GridDomain<f64>;
pub type ObstacleSpec64 = geometry::ObstacleSpec<f64>;
pub type KernelProfile64 = kernels::KernelProfile<f64>;
pub type KernelStencil64 = kernels::KernelStencil<f64>;
pub type Cubic64 = nonlinearity::Cubic<f64>;
pub type Nonlinearity64 = nonlinearity::Nonlinearity<f64>;
pub type OperatorContext64 = nonlocal_op::OperatorContext<f64>;
pub type TravelingFront64 = construction::TravelingFront<f64>;
