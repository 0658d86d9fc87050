//! Laboratory for stationary anisotropic Boolean models in the plane.
//!
//! A Boolean model drops convex grains (rotated copies of a base shape) at
//! the points of a Poisson process and takes their union. This crate
//! simulates such models on a periodic window, measures Minkowski
//! functionals and tensors of the realizations, evaluates the matching
//! closed-form densities, estimates model parameters from measurements, and
//! reconstructs the mean curvature-radius function of the typical grain
//! from its surface tensors.
//!
//! Module map:
//! - [`geom2d`]: convex polygons, rotations, ellipse discretization, polygon
//!   union on the flat torus, Euler characteristic.
//! - [`tensor`]: symmetric tensors over R^2 in a component array convention.
//! - [`minkowski`]: Minkowski functionals/tensors of polygons and realized
//!   union sets, mixed functionals, brute-force oracles.
//! - [`analytic`]: closed-form and quadrature evaluation of all density
//!   formulas (grain level, process level, union level, window means).
//! - [`sampler`]: random realization generation and batch measurement.
//! - [`inference`]: parameter estimation, bootstrap errors, Fourier
//!   reconstruction.
//! - [`quad`]: adaptive Gauss-Kronrod quadrature and small special-function
//!   helpers shared by the other modules.

pub mod analytic;
pub mod geom2d;
pub mod inference;
pub mod minkowski;
pub mod quad;
pub mod sampler;
pub mod tensor;

pub use geom2d::{BaseGrain, ConvexPolygon, PolyconvexRegion, TorusWindow, Vec2};
pub use tensor::SymTensor2;
