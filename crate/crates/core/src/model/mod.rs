//! Domain types shared by every solver.

pub mod control;
pub mod cost;
pub mod measure;
pub mod path;
pub mod problem;

pub use control::{concat, ImpulseControl, Intervention};
pub use cost::cost_functional;
pub use measure::{Atom, MarkedPointMeasure};
pub use path::{path_distance, CadlagPath, Jump, JumpKind};
pub use problem::{MarkFn, MarkSpace, PathFn, ProblemSpec, SpecDiagnostics};
