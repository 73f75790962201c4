//! Verilog-2001 emission and a checker for the emitted subset.
//!
//! The subset: one module; `wire`/`reg` vectors declared before use;
//! continuous `assign`s; a single `always @(posedge clk)` block with
//! non-blocking assignments. All vectors are unsigned bit patterns; signed
//! arithmetic is done by explicit sign extension to the result width.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::netlist::{Netlist, NodeKind};
use crate::error::{Error, Result};
use crate::quant::range_bits;

const KEYWORDS: &[&str] = &[
    "always", "and", "assign", "begin", "case", "default", "else", "end", "endcase", "endmodule", "for", "function",
    "if", "initial", "inout", "input", "integer", "localparam", "module", "negedge", "or", "output", "parameter",
    "posedge", "reg", "signed", "wire", "xor",
];
const PORTS: &[&str] = &["clk", "rst", "in_valid", "in_data", "out_valid", "out_data"];

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// True for names of the form `n<digits>` or `n<digits>_diff`, which the
/// emitter uses for nodes.
fn is_node_name(s: &str) -> bool {
    let body = s.strip_prefix('n').map(|b| b.strip_suffix("_diff").unwrap_or(b));
    matches!(body, Some(b) if !b.is_empty() && b.bytes().all(|c| c.is_ascii_digit()))
}

fn literal(value: i64, width: u32) -> String {
    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
    format!("{width}'h{:x}", (value as u64) & mask)
}

/// `name` (of width `from`) sign-extended or truncated to `to` bits.
fn ext(name: &str, from: u32, to: u32) -> String {
    match to.cmp(&from) {
        core::cmp::Ordering::Equal => name.to_string(),
        core::cmp::Ordering::Greater => format!("{{{{{}{{{name}[{}]}}}}, {name}}}", to - from, from - 1),
        core::cmp::Ordering::Less => format!("{name}[{}:0]", to - 1),
    }
}

fn node_name(id: usize) -> String {
    format!("n{id}")
}

/// Emits a netlist as a single-clock module.
///
/// Ports: `clk`, synchronous active-high `rst`, `in_valid`, `in_data`
/// (`d_in` input codes, port 0 in the low bits), `out_valid`, `out_data`
/// (`d_out` output words of equal width). State registers load on every
/// valid cycle; outputs are combinational from the current input and state.
pub fn emit_verilog(net: &Netlist, module_name: &str) -> Result<String> {
    if !is_identifier(module_name)
        || KEYWORDS.contains(&module_name)
        || PORTS.contains(&module_name)
        || is_node_name(module_name)
    {
        return Err(Error::Internal(format!("module name `{module_name}` collides with a reserved identifier")));
    }
    net.validate()?;
    let width = |id: usize| net.nodes[id].width;
    let iw = net.input_width;
    let ow = net.outputs.iter().map(|&o| width(o)).max().unwrap_or(1);
    let mut v = String::new();
    let w = &mut v;
    let _ = writeln!(w, "// Reservoir datapath: {} neurons, {} inputs, {} outputs, {}-bit states.", net.n, net.d_in, net.d_out, net.q);
    let _ = writeln!(w, "module {module_name} (");
    let _ = writeln!(w, "    input  wire clk,");
    let _ = writeln!(w, "    input  wire rst,");
    let _ = writeln!(w, "    input  wire in_valid,");
    let _ = writeln!(w, "    input  wire [{}:0] in_data,", net.d_in as u32 * iw - 1);
    let _ = writeln!(w, "    output wire out_valid,");
    let _ = writeln!(w, "    output wire [{}:0] out_data", net.d_out as u32 * ow - 1);
    let _ = writeln!(w, ");");

    for node in &net.nodes {
        let kw = if matches!(node.kind, NodeKind::Register { .. }) { "reg " } else { "wire" };
        let _ = writeln!(w, "    {kw} [{}:0] {};", node.width - 1, node_name(node.id));
        if let NodeKind::Comparator { threshold } = node.kind {
            let cw = width(node.operands[0]).max(range_bits(threshold, threshold));
            let _ = writeln!(w, "    wire [{cw}:0] {}_diff;", node_name(node.id));
        }
    }
    let _ = writeln!(w);

    for node in &net.nodes {
        let name = node_name(node.id);
        let nw = node.width;
        let op = |k: usize| {
            let id = node.operands[k];
            ext(&node_name(id), width(id), nw)
        };
        match node.kind {
            NodeKind::Input { port } => {
                let lo = port as u32 * iw;
                let _ = writeln!(w, "    assign {name} = {};", ext(&format!("in_data[{}:{lo}]", lo + iw - 1), iw, nw));
            }
            NodeKind::Constant { value } => {
                let _ = writeln!(w, "    assign {name} = {};", literal(value, nw));
            }
            NodeKind::Register { .. } => {}
            NodeKind::Shifter { k } => {
                let src = node.operands[0];
                let inner = ext(&node_name(src), width(src), nw - k);
                let _ = writeln!(w, "    assign {name} = {{{inner}, {k}'b0}};");
            }
            NodeKind::Adder => {
                let _ = writeln!(w, "    assign {name} = {} + {};", op(0), op(1));
            }
            NodeKind::Subtractor => {
                let _ = writeln!(w, "    assign {name} = {} - {};", op(0), op(1));
            }
            NodeKind::Comparator { threshold } => {
                let src = node.operands[0];
                let cw = width(src).max(range_bits(threshold, threshold));
                let _ = writeln!(
                    w,
                    "    assign {name}_diff = {} - {};",
                    ext(&node_name(src), width(src), cw + 1),
                    literal(threshold, cw + 1)
                );
                let _ = writeln!(w, "    assign {name} = ~{name}_diff[{cw}];");
            }
            NodeKind::Mux => {
                let _ = writeln!(w, "    assign {name} = {} ? {} : {};", node_name(node.operands[0]), op(1), op(2));
            }
            NodeKind::Output { port } => {
                let _ = writeln!(w, "    assign {name} = {};", op(0));
                let lo = port as u32 * ow;
                let _ = writeln!(w, "    assign out_data[{}:{lo}] = {};", lo + ow - 1, ext(&name, nw, ow));
            }
        }
    }
    let _ = writeln!(w, "    assign out_valid = in_valid;");
    let _ = writeln!(w);
    let _ = writeln!(w, "    always @(posedge clk) begin");
    let _ = writeln!(w, "        if (rst) begin");
    for &r in &net.registers {
        let _ = writeln!(w, "            {} <= {{{}{{1'b0}}}};", node_name(r), width(r));
    }
    let _ = writeln!(w, "        end else if (in_valid) begin");
    for (&r, &next) in net.registers.iter().zip(&net.next_state) {
        let _ = writeln!(w, "            {} <= {};", node_name(r), ext(&node_name(next), width(next), width(r)));
    }
    let _ = writeln!(w, "        end");
    let _ = writeln!(w, "    end");
    let _ = writeln!(w, "endmodule");
    Ok(v)
}

// ----------------------------------------------------------------- checker

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Sized(u32),
    Punct(&'static str),
}

fn lex(text: &str) -> core::result::Result<Vec<(Tok, usize)>, String> {
    const PUNCT: &[&str] = &["<=", ">=", "(", ")", "[", "]", "{", "}", ",", ";", ":", "=", "+", "-", "~", "?", "@"];
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line) = (0, 1);
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if text[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), line));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: u64 = text[start..i].parse().map_err(|_| format!("line {line}: bad number"))?;
            if i < bytes.len() && bytes[i] == b'\'' {
                let base = bytes.get(i + 1).copied();
                let radix = match base {
                    Some(b'h') => 16,
                    Some(b'b') => 2,
                    Some(b'd') => 10,
                    _ => return Err(format!("line {line}: unsupported literal base")),
                };
                i += 2;
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_digit(radix) {
                    i += 1;
                }
                if start == i || n == 0 || n > 64 {
                    return Err(format!("line {line}: malformed sized literal"));
                }
                let digits = &text[start..i];
                let value = u64::from_str_radix(digits, radix).map_err(|_| format!("line {line}: literal overflow"))?;
                if n < 64 && value >> n != 0 {
                    return Err(format!("line {line}: literal wider than {n} bits"));
                }
                out.push((Tok::Sized(n as u32), line));
            } else {
                out.push((Tok::Num(n), line));
            }
        } else {
            for p in PUNCT {
                if text[i..].starts_with(p) {
                    out.push((Tok::Punct(p), line));
                    i += p.len();
                    continue 'outer;
                }
            }
            return Err(format!("line {line}: unexpected character `{}`", c as char));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SigKind {
    Input,
    Output,
    Wire,
    Reg,
}

struct Signal {
    kind: SigKind,
    width: u32,
    driven: Vec<bool>,
}

struct Checker {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    signals: BTreeMap<String, Signal>,
}

type Check<T> = core::result::Result<T, String>;

impl Checker {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn err<T>(&self, msg: &str) -> Check<T> {
        Err(format!("line {}: {msg}", self.line()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == w)
    }

    fn punct(&mut self, p: &str) -> Check<()> {
        if self.is_punct(p) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected `{p}`"))
        }
    }

    fn word(&mut self, w: &str) -> Check<()> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected `{w}`"))
        }
    }

    fn ident(&mut self) -> Check<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn num(&mut self) -> Check<u32> {
        match self.peek() {
            Some(Tok::Num(n)) if *n <= u32::MAX as u64 => {
                let n = *n as u32;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected number"),
        }
    }

    /// `[hi:lo]` with `lo = 0`, returning the width.
    fn decl_range(&mut self) -> Check<u32> {
        if !self.is_punct("[") {
            return Ok(1);
        }
        self.punct("[")?;
        let hi = self.num()?;
        self.punct(":")?;
        if self.num()? != 0 {
            return self.err("declared ranges must end at 0");
        }
        self.punct("]")?;
        Ok(hi + 1)
    }

    fn declare(&mut self, name: String, kind: SigKind, width: u32) -> Check<()> {
        if self.signals.contains_key(&name) {
            return self.err(&format!("`{name}` declared twice"));
        }
        self.signals.insert(name, Signal { kind, width, driven: vec![false; width as usize] });
        Ok(())
    }

    fn signal(&self, name: &str) -> Check<&Signal> {
        match self.signals.get(name) {
            Some(s) => Ok(s),
            None => self.err(&format!("`{name}` used before declaration")),
        }
    }

    /// Optional `[i]` or `[hi:lo]` after a signal; returns `(lo, width)`.
    fn select(&mut self, width: u32) -> Check<(u32, u32)> {
        if !self.is_punct("[") {
            return Ok((0, width));
        }
        self.punct("[")?;
        let hi = self.num()?;
        let lo = if self.is_punct(":") {
            self.punct(":")?;
            self.num()?
        } else {
            hi
        };
        self.punct("]")?;
        if lo > hi || hi >= width {
            return self.err("select out of range");
        }
        Ok((lo, hi - lo + 1))
    }

    fn primary(&mut self) -> Check<u32> {
        match self.peek().cloned() {
            Some(Tok::Sized(w)) => {
                self.pos += 1;
                Ok(w)
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident()?;
                let sig = self.signal(&name)?;
                if sig.kind == SigKind::Output {
                    return self.err(&format!("output `{name}` read"));
                }
                let width = sig.width;
                Ok(self.select(width)?.1)
            }
            Some(Tok::Punct("(")) => {
                self.punct("(")?;
                let w = self.expr()?;
                self.punct(")")?;
                Ok(w)
            }
            Some(Tok::Punct("{")) => {
                self.punct("{")?;
                if let Some(Tok::Num(_)) = self.peek() {
                    let k = self.num()?;
                    self.punct("{")?;
                    let w = self.expr()?;
                    self.punct("}")?;
                    self.punct("}")?;
                    return Ok(k * w);
                }
                let mut total = self.expr()?;
                while self.is_punct(",") {
                    self.punct(",")?;
                    total += self.expr()?;
                }
                self.punct("}")?;
                Ok(total)
            }
            _ => self.err("expected expression"),
        }
    }

    fn unary(&mut self) -> Check<u32> {
        if self.is_punct("~") {
            self.punct("~")?;
            return self.unary();
        }
        self.primary()
    }

    fn additive(&mut self) -> Check<u32> {
        let mut w = self.unary()?;
        while self.is_punct("+") || self.is_punct("-") {
            self.pos += 1;
            let r = self.unary()?;
            if r != w {
                return self.err("operand widths differ");
            }
            w = w.max(r);
        }
        Ok(w)
    }

    fn expr(&mut self) -> Check<u32> {
        let w = self.additive()?;
        if self.is_punct("?") {
            if w != 1 {
                return self.err("condition must be one bit");
            }
            self.punct("?")?;
            let a = self.expr()?;
            self.punct(":")?;
            let b = self.expr()?;
            if a != b {
                return self.err("mux arm widths differ");
            }
            return Ok(a);
        }
        Ok(w)
    }

    /// Marks `lvalue` bits driven; returns the lvalue width.
    fn drive(&mut self, procedural: bool) -> Check<(String, u32, u32)> {
        let name = self.ident()?;
        let (kind, width) = {
            let s = self.signal(&name)?;
            (s.kind, s.width)
        };
        let ok = if procedural { kind == SigKind::Reg } else { matches!(kind, SigKind::Wire | SigKind::Output) };
        if !ok {
            return self.err(&format!("`{name}` cannot be assigned here"));
        }
        let (lo, w) = self.select(width)?;
        Ok((name, lo, w))
    }

    fn mark(&mut self, name: &str, lo: u32, w: u32) -> Check<()> {
        let line = self.line();
        let sig = self.signals.get_mut(name).expect("checked by drive");
        for b in lo..lo + w {
            if sig.driven[b as usize] {
                return Err(format!("line {line}: bit {b} of `{name}` driven twice"));
            }
            sig.driven[b as usize] = true;
        }
        Ok(())
    }

    fn assignment(&mut self, procedural: bool, loads: &mut BTreeMap<String, usize>) -> Check<()> {
        let (name, lo, w) = self.drive(procedural)?;
        self.punct(if procedural { "<=" } else { "=" })?;
        let rhs = self.expr()?;
        if rhs != w {
            return self.err(&format!("width mismatch assigning `{name}`: {w} bits from {rhs}"));
        }
        self.punct(";")?;
        if procedural {
            *loads.entry(name).or_insert(0) += 1;
            Ok(())
        } else {
            self.mark(&name, lo, w)
        }
    }

    fn statement(&mut self, loads: &mut BTreeMap<String, usize>) -> Check<()> {
        if self.is_word("begin") {
            self.word("begin")?;
            while !self.is_word("end") {
                if self.peek().is_none() {
                    return self.err("unterminated begin");
                }
                self.statement(loads)?;
            }
            return self.word("end");
        }
        if self.is_word("if") {
            self.word("if")?;
            self.punct("(")?;
            if self.expr()? != 1 {
                return self.err("if condition must be one bit");
            }
            self.punct(")")?;
            self.statement(loads)?;
            if self.is_word("else") {
                self.word("else")?;
                self.statement(loads)?;
            }
            return Ok(());
        }
        self.assignment(true, loads)
    }

    fn module(&mut self) -> Check<String> {
        self.word("module")?;
        let name = self.ident()?;
        self.punct("(")?;
        loop {
            let kind = if self.is_word("input") {
                SigKind::Input
            } else if self.is_word("output") {
                SigKind::Output
            } else {
                return self.err("expected port direction");
            };
            self.pos += 1;
            self.word("wire")?;
            let width = self.decl_range()?;
            let port = self.ident()?;
            self.declare(port, kind, width)?;
            if self.is_punct(",") {
                self.punct(",")?;
            } else {
                break;
            }
        }
        self.punct(")")?;
        self.punct(";")?;
        let mut always_blocks = 0;
        // per register: number of procedural assignments (reset + load)
        let mut loads = BTreeMap::new();
        loop {
            if self.is_word("endmodule") {
                self.word("endmodule")?;
                break;
            } else if self.is_word("wire") || self.is_word("reg") {
                let kind = if self.is_word("wire") { SigKind::Wire } else { SigKind::Reg };
                self.pos += 1;
                let width = self.decl_range()?;
                let n = self.ident()?;
                self.declare(n, kind, width)?;
                self.punct(";")?;
            } else if self.is_word("assign") {
                self.word("assign")?;
                self.assignment(false, &mut loads)?;
            } else if self.is_word("always") {
                always_blocks += 1;
                if always_blocks > 1 {
                    return self.err("more than one always block");
                }
                self.word("always")?;
                self.punct("@")?;
                self.punct("(")?;
                self.word("posedge")?;
                let clk = self.ident()?;
                if self.signal(&clk)?.kind != SigKind::Input || self.signal(&clk)?.width != 1 {
                    return self.err("clock must be a one-bit input");
                }
                self.punct(")")?;
                self.statement(&mut loads)?;
            } else if self.peek().is_none() {
                return self.err("missing endmodule");
            } else {
                return self.err("unsupported construct");
            }
        }
        if self.peek().is_some() {
            return self.err("text after endmodule");
        }
        for (n, s) in &self.signals {
            match s.kind {
                SigKind::Wire | SigKind::Output if s.driven.iter().any(|d| !d) => {
                    return Err(format!("`{n}` is not fully driven"));
                }
                SigKind::Reg if loads.get(n).copied().unwrap_or(0) == 0 => {
                    return Err(format!("register `{n}` is never loaded"));
                }
                _ => {}
            }
        }
        Ok(name)
    }
}

/// Parses `text` as the emitted Verilog subset and checks declarations,
/// single drivers, full driving of every wire and output, and exact width
/// agreement of every assignment. Returns the module name.
pub fn check_verilog(text: &str) -> Result<String> {
    let toks = lex(text).map_err(Error::Internal)?;
    let mut c = Checker { toks, pos: 0, signals: BTreeMap::new() };
    c.module().map_err(Error::Internal)
}
