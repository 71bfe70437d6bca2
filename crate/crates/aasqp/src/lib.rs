//! Anderson-accelerated SQP-type methods for nonlinear programming.
//!
//! This crate implements a family of (inexact) SQP-type methods — exact
//! Hessian with regularization, (generalized) Gauss-Newton, SCQP, and
//! zero-order iterations with frozen constraint Jacobians — viewed as a
//! fixed-point iteration on the primal-dual vector, wrapped by Anderson
//! acceleration with a KKT-residual activation threshold. A convergence
//! analysis toolkit estimates the iteration matrix at a fixed point and
//! compares predicted and observed local rates, and an experiments layer
//! reproduces desk-scale optimal-control studies.

pub mod analysis;
pub mod anderson;
pub mod experiments;
pub mod hessian;
pub mod linalg;
pub mod nlp;
pub mod ocp;
pub mod qp;
pub mod report;
pub mod sqp;

pub use linalg::{Matrix, Vector};
pub use nlp::{Nlp, PrimalDualIterate};
