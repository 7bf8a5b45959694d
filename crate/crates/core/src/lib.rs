//! Equilibrium shape of the interface between a charged-fluid nanochannel and
//! the surrounding elastomer.
//!
//! The kernels are generic over the scalar type ([`scalar::Real`]); the
//! aliases at the crate root fix it to `f64`, which is what the drivers use.

pub mod diagnostics;
pub mod elasticity;
pub mod energy;
pub mod equilibrium;
pub mod fem;
pub mod interface;
pub mod mesh;
pub mod params;
pub mod pb;
pub mod scalar;

pub use params::{Config, Dimensionless, PhysicalParams, RunConfig, Scales};

pub type Mesh = mesh::Mesh<f64>;
