use alloc::vec;
use alloc::vec::Vec;

use super::netlist::{Netlist, NodeKind};
use crate::error::{Error, Result};

fn fits(value: i64, width: u32) -> bool {
    width >= 64 || (value >= -(1i64 << (width - 1)) && value < (1i64 << (width - 1)))
}

/// Cycle-accurate evaluation of a netlist.
///
/// Each cycle evaluates every combinational node in topological order from
/// the current register contents, then clocks the registers: reset clears
/// them, otherwise a valid input loads the next state.
pub struct Simulator<'a> {
    net: &'a Netlist,
    values: Vec<i64>,
}

impl<'a> Simulator<'a> {
    /// Starts in the reset state.
    pub fn new(net: &'a Netlist) -> Self {
        Self { net, values: vec![0; net.nodes.len()] }
    }

    /// Current register contents, one per neuron.
    pub fn state(&self) -> Vec<i64> {
        self.net.registers.iter().map(|&r| self.values[r]).collect()
    }

    /// One clock cycle. Returns the output ports as seen before the edge.
    pub fn step(&mut self, input: &[i64], valid: bool, reset: bool) -> Result<Vec<i64>> {
        let net = self.net;
        if input.len() != net.d_in {
            return Err(Error::Shape { expected: net.d_in, got: input.len(), what: "input vector" });
        }
        for node in &net.nodes {
            let v = |k: usize| self.values[node.operands[k]];
            let value = match node.kind {
                NodeKind::Input { port } => input[port],
                NodeKind::Constant { value } => value,
                NodeKind::Register { .. } => self.values[node.id],
                NodeKind::Shifter { k } => v(0) << k,
                NodeKind::Adder => v(0) + v(1),
                NodeKind::Subtractor => v(0) - v(1),
                NodeKind::Comparator { threshold } => (v(0) >= threshold) as i64,
                NodeKind::Mux => {
                    if v(0) != 0 {
                        v(1)
                    } else {
                        v(2)
                    }
                }
                NodeKind::Output { .. } => v(0),
            };
            let in_range = match node.kind {
                NodeKind::Comparator { .. } => true,
                _ => fits(value, node.width),
            };
            if !in_range {
                return Err(Error::WidthViolation { node: node.id, value, width: node.width });
            }
            self.values[node.id] = value;
        }
        let outputs = net.outputs.iter().map(|&o| self.values[o]).collect();
        if reset || valid {
            for (&r, &next) in net.registers.iter().zip(&net.next_state) {
                self.values[r] = if reset { 0 } else { self.values[next] };
            }
        }
        Ok(outputs)
    }
}

/// Integer outputs (`steps × d_out`, row-major) for a series of input-port
/// codes, starting from the reset state with every input valid.
pub fn interpret_netlist(net: &Netlist, inputs: &[Vec<i64>]) -> Result<Vec<i64>> {
    let mut sim = Simulator::new(net);
    let mut out = Vec::with_capacity(inputs.len() * net.d_out);
    for u in inputs {
        out.extend(sim.step(u, true, false)?);
    }
    Ok(out)
}
