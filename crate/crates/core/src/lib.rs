//! Minimax optimization lab: objectives, GDA/GDmax/PPM/PPmax optimizers,
//! empirical stability measurement, closed-form bounds and reference oracles.

pub mod bounds;
pub mod data;
pub mod error;
pub mod objectives;
pub mod optimizers;
pub mod oracles;
pub mod stability;

pub use bounds::BoundReport;
pub use data::{Dataset, Vector};
pub use error::{LabError, Result};
pub use objectives::{Constants, ConvexityClass, Data, Objective, ObjectiveKind};
pub use optimizers::{AlgorithmSpec, Family, Mode, RunOptions, Schedule, Trajectory};
pub use stability::{GenRiskCurve, StabilityTrace};
