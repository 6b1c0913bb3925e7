//! Independent nodal-analysis model of the amplifier, used to cross-check
//! the closed-form gain and noise expressions.

mod chain;
mod netlist;
mod solve;

pub use chain::*;
pub use netlist::{Element, Netlist, NodeId};
pub use solve::{solve_ac, AcSolution, AcSystem, CONDITION_WARN};
