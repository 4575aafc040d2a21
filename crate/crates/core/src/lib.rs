//! Boundary tangency strata, trajectory spaces and boundary-data
//! reconstruction for traversing flows on compact domains.
//!
//! A [`scene::Scene`] describes a domain `X = {z <= 0}` inside a bounding
//! box, a vector field `v` and a Lyapunov candidate `f`. From it the crate
//! computes the multiplicity of every boundary contact ([`strata`]),
//! traces trajectories into divisors ([`tracer`]), assembles the trajectory
//! space as a finite quotient ([`tspace`]) and rebuilds that quotient from
//! boundary data alone ([`holo`]). [`localmodel`] generates the canonical
//! polynomial models for a given multiplicity word and checks the whole
//! pipeline against them. [`cli`] wires everything into the `trajspace`
//! binary.

pub mod cli;
pub mod curves;
pub mod error;
pub mod expr;
pub mod geom;
pub mod holo;
pub mod localmodel;
pub mod ode;
pub mod render;
pub mod scene;
pub mod strata;
pub mod tracer;
pub mod tspace;

pub use error::{Error, ExprError, Result};
pub use expr::Expression;
pub use scene::{validate, Scene, ToleranceSet, ValidationReport};
