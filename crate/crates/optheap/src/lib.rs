//! Worst-case optimal meldable priority queue.

pub mod counter;
pub mod harness;
pub mod queue;
pub mod rarray;
mod reduce;
pub mod tree;
pub mod violations;
