//! Direct-logic hardware backend: lowering to a shift/add netlist, Verilog
//! emission, a cycle-accurate interpreter and a structural cost model.

mod cost;
mod csd;
mod interp;
mod netlist;
mod verilog;

pub use cost::{estimate_cost, CostEstimate};
pub use csd::{csd, csd_value, Digit};
pub use interp::{interpret_netlist, Simulator};
pub use netlist::{lower, Netlist, Node, NodeKind};
pub use verilog::{check_verilog, emit_verilog};

use alloc::string::ToString;

use crate::dse::DseResult;

/// Lowers every successful configuration and records its cost estimate.
/// Lowering failures (e.g. a fully pruned model with no input weights) are
/// stored as the cell's error. Returns the number of cells that failed.
pub fn attach_costs(result: &mut DseResult) -> usize {
    let mut failed = 0;
    for cfg in result.configs.iter_mut().filter(|c| c.error.is_none()) {
        let Some(model) = &cfg.model else { continue };
        match lower(model) {
            Ok(net) => cfg.cost = Some(estimate_cost(&net)),
            Err(e) => {
                cfg.error = Some(e.to_string());
                failed += 1;
            }
        }
    }
    failed
}
