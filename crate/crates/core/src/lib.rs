//! Exact, infinite-sample analysis of episodic upside-down RL recursions on finite
//! command-extension MDPs.

pub mod bounds;
pub mod ce;
pub mod domains;
pub mod error;
pub mod experiments;
pub mod recursion;
pub mod seg;
pub mod values;

pub use error::{LabError, Result};
