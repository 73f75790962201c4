use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::csd::csd;
use crate::error::{Error, Result};
use crate::quant::{range_bits, QuantizedModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Input { port: usize },
    Constant { value: i64 },
    /// State register of one neuron; operand 0 is its next value.
    Register { neuron: usize },
    /// `operand << k`.
    Shifter { k: u32 },
    Adder,
    /// `operand0 − operand1`.
    Subtractor,
    /// `operand >= threshold`, one unsigned bit.
    Comparator { threshold: i64 },
    /// `operand0 ? operand1 : operand2`.
    Mux,
    Output { port: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    #[serde(flatten)]
    pub kind: NodeKind,
    pub width: u32,
    pub operands: Vec<usize>,
    /// Value range from interval analysis.
    pub lo: i64,
    pub hi: i64,
}

impl Node {
    pub fn is_combinational(&self) -> bool {
        !matches!(self.kind, NodeKind::Input { .. } | NodeKind::Constant { .. } | NodeKind::Register { .. })
    }
}

/// Direct-logic datapath of one quantized reservoir. Nodes are stored in
/// topological order; only register operands may point forward.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub q: u32,
    pub n: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub input_width: u32,
    pub nodes: Vec<Node>,
    pub inputs: Vec<usize>,
    pub registers: Vec<usize>,
    /// Next-state value of each neuron (the mux-chain output).
    pub next_state: Vec<usize>,
    pub outputs: Vec<usize>,
}

impl Netlist {
    /// Structural checks: topological order, operand arity, widths covering
    /// the analysed ranges.
    pub fn validate(&self) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            let bad = |msg: &str| Err(Error::Internal(format!("node {i}: {msg}")));
            if node.id != i {
                return bad("id does not match position");
            }
            let arity = match node.kind {
                NodeKind::Input { .. } | NodeKind::Constant { .. } => 0,
                NodeKind::Register { .. } | NodeKind::Shifter { .. } | NodeKind::Comparator { .. } => 1,
                NodeKind::Output { .. } => 1,
                NodeKind::Adder | NodeKind::Subtractor => 2,
                NodeKind::Mux => 3,
            };
            if node.operands.len() != arity {
                return bad("wrong operand count");
            }
            let register = matches!(node.kind, NodeKind::Register { .. });
            for &op in &node.operands {
                if op >= self.nodes.len() || (!register && op >= i) {
                    return bad("operand breaks topological order");
                }
            }
            let covered = match node.kind {
                NodeKind::Comparator { .. } => node.width == 1 && node.lo >= 0 && node.hi <= 1,
                _ => range_bits(node.lo, node.hi) <= node.width,
            };
            if node.lo > node.hi || !covered {
                return bad("declared width below value range");
            }
        }
        Ok(())
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }
}

struct Builder {
    nodes: Vec<Node>,
    constants: BTreeMap<i64, usize>,
    shifts: BTreeMap<(usize, u32), usize>,
}

impl Builder {
    fn push(&mut self, kind: NodeKind, operands: Vec<usize>, lo: i64, hi: i64) -> usize {
        let id = self.nodes.len();
        let width = match kind {
            NodeKind::Shifter { k } => self.nodes[operands[0]].width + k,
            NodeKind::Comparator { .. } => 1,
            _ => range_bits(lo, hi),
        };
        self.nodes.push(Node { id, kind, width, operands, lo, hi });
        id
    }

    fn constant(&mut self, value: i64) -> usize {
        if let Some(&id) = self.constants.get(&value) {
            return id;
        }
        let id = self.push(NodeKind::Constant { value }, vec![], value, value);
        self.constants.insert(value, id);
        id
    }

    fn shifted(&mut self, src: usize, k: u32) -> usize {
        if k == 0 {
            return src;
        }
        if let Some(&id) = self.shifts.get(&(src, k)) {
            return id;
        }
        let (lo, hi) = (self.nodes[src].lo << k, self.nodes[src].hi << k);
        let id = self.push(NodeKind::Shifter { k }, vec![src], lo, hi);
        self.shifts.insert((src, k), id);
        id
    }

    /// Signed shifted operands realising `w · src`.
    fn product(&mut self, src: usize, w: i64, terms: &mut Vec<(bool, usize)>) {
        for d in csd(w) {
            let id = self.shifted(src, d.shift);
            terms.push((d.negative, id));
        }
    }

    fn add(&mut self, a: usize, b: usize) -> usize {
        let (x, y) = (&self.nodes[a], &self.nodes[b]);
        let (lo, hi) = (x.lo + y.lo, x.hi + y.hi);
        self.push(NodeKind::Adder, vec![a, b], lo, hi)
    }

    fn sub(&mut self, a: usize, b: usize) -> usize {
        let (x, y) = (&self.nodes[a], &self.nodes[b]);
        let (lo, hi) = (x.lo - y.hi, x.hi - y.lo);
        self.push(NodeKind::Subtractor, vec![a, b], lo, hi)
    }

    /// Balanced adder/subtractor tree over signed terms.
    fn sum(&mut self, mut terms: Vec<(bool, usize)>) -> usize {
        if terms.is_empty() {
            return self.constant(0);
        }
        while terms.len() > 1 {
            let mut next = Vec::with_capacity(terms.len().div_ceil(2));
            for pair in terms.chunks(2) {
                next.push(match *pair {
                    [(false, a), (false, b)] => (false, self.add(a, b)),
                    [(false, a), (true, b)] => (false, self.sub(a, b)),
                    [(true, a), (false, b)] => (false, self.sub(b, a)),
                    [(true, a), (true, b)] => (true, self.add(a, b)),
                    [t] => t,
                    _ => unreachable!(),
                });
            }
            terms = next;
        }
        match terms[0] {
            (false, id) => id,
            (true, id) => {
                let zero = self.constant(0);
                self.sub(zero, id)
            }
        }
    }
}

/// Lowers a quantized (possibly pruned) model to a shift/add netlist.
///
/// Per neuron: CSD shift terms of every nonzero input and recurrent weight
/// plus the bias constant feed a balanced adder tree; the accumulator is
/// compared against every threshold and a mux chain selects the state
/// code, which is registered. Outputs are the integer readout of the new
/// state, computed combinationally in the same cycle.
pub fn lower(qm: &QuantizedModel) -> Result<Netlist> {
    if qm.w_r.is_empty() && qm.w_in.iter().all(|&w| w == 0) {
        return Err(Error::DegenerateNetlist);
    }
    let mut b = Builder { nodes: Vec::new(), constants: BTreeMap::new(), shifts: BTreeMap::new() };
    let p = &qm.input_params;
    let inputs: Vec<usize> =
        (0..qm.d_in).map(|j| b.push(NodeKind::Input { port: j }, vec![], p.min_code(), p.max_code())).collect();
    let codes = &qm.thresholds.codes;
    let (code_lo, code_hi) = (codes[0], codes[codes.len() - 1]);
    let registers: Vec<usize> =
        (0..qm.n).map(|i| b.push(NodeKind::Register { neuron: i }, vec![0], code_lo, code_hi)).collect();

    let mut next_state = Vec::with_capacity(qm.n);
    let mut entries = qm.w_r.iter().peekable();
    for i in 0..qm.n {
        let mut terms = Vec::new();
        for (j, &src) in inputs.iter().enumerate() {
            b.product(src, qm.w_in[i * qm.d_in + j], &mut terms);
        }
        while let Some(e) = entries.next_if(|e| e.row == i) {
            b.product(registers[e.col], e.value, &mut terms);
        }
        if qm.bias[i] != 0 {
            let c = b.constant(qm.bias[i]);
            terms.push((false, c));
        }
        let acc = b.sum(terms);
        let mut value = b.constant(codes[0]);
        for (k, &t) in qm.thresholds.thresholds.iter().enumerate() {
            let sel = b.push(NodeKind::Comparator { threshold: t }, vec![acc], 0, 1);
            let code = b.constant(codes[k + 1]);
            let (lo, hi) = (b.nodes[value].lo.min(codes[k + 1]), b.nodes[value].hi.max(codes[k + 1]));
            value = b.push(NodeKind::Mux, vec![sel, code, value], lo, hi);
        }
        next_state.push(value);
    }
    for (i, &r) in registers.iter().enumerate() {
        b.nodes[r].operands[0] = next_state[i];
    }

    let mut outputs = Vec::with_capacity(qm.d_out);
    for o in 0..qm.d_out {
        let mut terms = Vec::new();
        for (i, &s) in next_state.iter().enumerate() {
            b.product(s, qm.w_out_int[o * qm.n + i], &mut terms);
        }
        let y = b.sum(terms);
        let (lo, hi) = (b.nodes[y].lo, b.nodes[y].hi);
        outputs.push(b.push(NodeKind::Output { port: o }, vec![y], lo, hi));
    }

    let net = Netlist {
        q: qm.q,
        n: qm.n,
        d_in: qm.d_in,
        d_out: qm.d_out,
        input_width: p.bits,
        nodes: b.nodes,
        inputs,
        registers,
        next_state,
        outputs,
    };
    net.validate()?;
    Ok(net)
}
