use alloc::vec;

use serde::{Deserialize, Serialize};

use super::netlist::{Netlist, NodeKind};
use crate::quant::range_bits;

/// Structural resource estimate of a netlist.
///
/// `est_luts` is a fixed linear proxy: every adder or subtractor costs its
/// widest operand in bits, every comparator costs the width of its
/// comparison. It is only meant for ranking configurations against each
/// other.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// Adders and subtractors.
    pub n_adders: u64,
    pub n_comparators: u64,
    pub n_muxes: u64,
    pub n_registers: u64,
    pub register_bits: u64,
    pub n_shift_terms: u64,
    pub est_luts: u64,
    /// Longest chain of adders, comparators and muxes between registers
    /// or ports. Shifters are wiring and add no level.
    pub critical_path_levels: u64,
}

pub fn estimate_cost(net: &Netlist) -> CostEstimate {
    let mut c = CostEstimate::default();
    let mut level = vec![0u64; net.nodes.len()];
    for node in &net.nodes {
        let w = |k: usize| net.nodes[node.operands[k]].width as u64;
        let deepest = |lv: &[u64]| {
            if matches!(node.kind, NodeKind::Register { .. }) {
                0
            } else {
                node.operands.iter().map(|&o| lv[o]).max().unwrap_or(0)
            }
        };
        let mut own = 0;
        match node.kind {
            NodeKind::Adder | NodeKind::Subtractor => {
                c.n_adders += 1;
                c.est_luts += w(0).max(w(1));
                own = 1;
            }
            NodeKind::Comparator { threshold } => {
                c.n_comparators += 1;
                c.est_luts += w(0).max(range_bits(threshold, threshold) as u64);
                own = 1;
            }
            NodeKind::Mux => {
                c.n_muxes += 1;
                own = 1;
            }
            NodeKind::Register { .. } => {
                c.n_registers += 1;
                c.register_bits += node.width as u64;
            }
            NodeKind::Shifter { .. } => c.n_shift_terms += 1,
            _ => {}
        }
        level[node.id] = deepest(&level) + own;
        c.critical_path_levels = c.critical_path_levels.max(level[node.id]);
    }
    c
}
