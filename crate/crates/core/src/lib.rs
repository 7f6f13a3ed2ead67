//! A numerical laboratory for Carnot-group calculus and weighted frequency
//! functions of solutions to `Δ_H u = V u`.
//!
//! Modules build on each other bottom-up: [`algebra`] (Lie algebra and group
//! law), [`jet`] and [`geometry`] (gauge, horizontal calculus), [`catalog`]
//! (exact solutions), [`quadrature`] (gauge-ball integrals), [`frequency`]
//! (height, energy, frequency and vanishing order), [`solver`] (finite
//! differences on `H^1`) and [`lab`] (configuration, reports, commands).

pub mod algebra;
pub mod catalog;
pub mod error;
pub mod frequency;
pub mod geometry;
pub mod identities;
pub mod jet;
pub mod lab;
pub mod par;
pub mod quadrature;
pub mod solver;

pub use error::{LabError, Result};
