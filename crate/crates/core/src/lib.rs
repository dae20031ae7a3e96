//! Inertial spin swarm model: integration, diagnostics, Gronwall-type bounds and flocking checks.

pub mod diagnostics;
pub mod error;
pub mod gronwall;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod reductions;
pub mod scenario;
pub mod theorems;

pub use error::{Error, Result};
pub use integrator::{simulate, IntegratorConfig, Scheme, Trajectory};
pub use model::{CommunicationKernel, MetricPsi, ModelParams, SwarmState, Vec3};
