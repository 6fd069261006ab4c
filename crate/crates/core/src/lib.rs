//! Force-robustness analysis for multi-contact articulated robots:
//! rejectable force polytopes, the smallest unrejectable force (SUF) under
//! five computation methods, support-contact placement optimisation, and a
//! single-step hierarchical whole-body QP.

pub mod contacts;
pub mod geometry;
pub mod model;
pub mod models;
pub mod solver;
pub mod suf;

pub use contacts::{assemble, reduce, ConstraintSystem, ReducedSystem, Scenario};
pub use model::{ContactKind, IkOptions, RobotModel, RobotState};
