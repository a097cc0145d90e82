//! Desk-scale simulator for large-strain magnetoelasticity with
//! Dzyaloshinskii-Moriya interaction.
//!
//! The crate evaluates a mixed Eulerian-Lagrangean energy for a deformable
//! magnetic body (elastic, exchange, magnetostatic and DMI terms plus
//! time-dependent loads), finds static minimizers by block-coordinate
//! descent, and runs a regularized rate-independent quasistatic evolution
//! via incremental minimization. Geometric machinery (topological degree,
//! deformed configuration, Ciarlet-Necas check, numerical inverse) audits
//! invertibility of the computed deformations.
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod cli;
pub mod config;
pub mod dissipation;
pub mod energy;
pub mod fields;
pub mod fixtures;
pub mod geometry;
pub mod gradients;
pub mod io;
pub mod optimizer;
pub mod quasistatic;
pub mod strayfield;
pub mod kinematics;

pub use energy::{EnergyBreakdown, LoadSchedule, MaterialModel};
pub use fields::{DeformationField, Grid, MagnetizationField, State};
pub use kinematics::{Mat3, Vec3};
