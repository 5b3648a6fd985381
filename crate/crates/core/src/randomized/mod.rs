//! Control randomization: densities of the point measure, Doléans-Dade
//! weights, the randomized objective and the saddle-point checks.

pub mod density;
pub mod girsanov;
pub mod saddle;
pub mod value;

pub use density::{PathDensity, TreeDensity};
pub use girsanov::{girsanov_weight, mean_weight, sample_weights};
pub use saddle::{saddle_density, verify_saddle, ProbeRow, SaddleReport, SADDLE_TOLERANCE};
pub use value::{randomized_value_mc, randomized_value_tree, McValue};
