//! Edge states of honeycomb Schroedinger operators along rational domain walls, and their
//! effective one-dimensional Dirac description.
//!
//! Modules are generic over the real scalar (see [`scalar::Real`]); the aliases below fix it
//! to `f64`.

pub mod bulk;
pub mod dirac1d;
pub mod edge;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod potentials;
pub mod scalar;
pub mod tracking;
pub mod validation;

pub use error::{Error, Result};

pub type Vec2 = lattice::Vec2<f64>;
pub type LatticeBasis = lattice::LatticeBasis<f64>;
pub type EdgeFrame = lattice::EdgeFrame<f64>;
pub type FourierPotential = potentials::FourierPotential<f64>;
pub type DomainWall = potentials::DomainWall<f64>;
pub type DiracPointData = bulk::DiracPointData<f64>;
pub type EffectiveDiracModel = dirac1d::EffectiveDiracModel<f64>;
pub type EdgeProblem = edge::EdgeProblem<f64>;
pub type EdgeSetup = edge::EdgeSetup<f64>;
