//! Text formats for Hamiltonians (`.ham`) and CSS code descriptions (`.css`).
//!
//! `.ham`: UTF-8 lines, `#` comments, a `qubits N` header, then one term per
//! line as `<coefficient> <axis><index> ...`, e.g. `-1.0 Z0 Z1`. A line with
//! only a coefficient is a constant (identity) term.
//!
//! `.css`: `qubits N` header, generator lines `X 0 1 2 3` / `Z 2 3 4 5`, and
//! an optional `weights a b` line.

use std::collections::BTreeSet;

use crate::codes::CssCode;
use crate::error::{Error, Result};
use crate::pauli::{Axis, Hamiltonian, PauliTerm};

fn parse_err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

/// Strip a trailing comment and surrounding whitespace.
fn content(line: &str) -> &str {
    let line = match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    };
    line.trim()
}

pub fn parse_ham(text: &str) -> Result<Hamiltonian> {
    let mut n_qubits: Option<usize> = None;
    let mut terms: Vec<PauliTerm> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = content(raw);
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let first = toks.next().unwrap();
        if first == "qubits" {
            let n = toks
                .next()
                .ok_or_else(|| parse_err(lineno, line.len(), "missing qubit count"))?;
            let n: usize = n
                .parse()
                .map_err(|_| parse_err(lineno, 8, format!("bad qubit count `{n}`")))?;
            if n_qubits.replace(n).is_some() {
                return Err(parse_err(lineno, 1, "duplicate `qubits` header"));
            }
            continue;
        }
        let n = n_qubits
            .ok_or_else(|| parse_err(lineno, 1, "term line before `qubits N` header"))?;
        let coeff: f64 = first
            .parse()
            .map_err(|_| parse_err(lineno, 1, format!("bad coefficient `{first}`")))?;
        let mut axes: Vec<(usize, Axis)> = Vec::new();
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for tok in toks {
            let col = raw.find(tok).map(|p| p + 1).unwrap_or(1);
            let mut chars = tok.chars();
            let axis_ch = chars.next().unwrap();
            let axis = Axis::from_char(axis_ch)
                .ok_or_else(|| parse_err(lineno, col, format!("bad axis `{axis_ch}`")))?;
            let idx: usize = chars
                .as_str()
                .parse()
                .map_err(|_| parse_err(lineno, col, format!("bad qubit index in `{tok}`")))?;
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n_qubits: n });
            }
            if !seen.insert(idx) {
                return Err(parse_err(lineno, col, format!("duplicate qubit index {idx}")));
            }
            axes.push((idx, axis));
        }
        terms.push(PauliTerm::new(coeff, axes));
    }
    let n = n_qubits.ok_or_else(|| parse_err(1, 1, "missing `qubits N` header"))?;
    Hamiltonian::from_terms(n, terms, "")
}

pub fn serialize_ham(h: &Hamiltonian) -> String {
    let mut out = String::new();
    if !h.label.is_empty() {
        out.push_str(&format!("# {}\n", h.label));
    }
    out.push_str(&format!("qubits {}\n", h.n_qubits()));
    for t in h.terms() {
        out.push_str(&format!("{t}\n"));
    }
    out
}

pub fn parse_css(text: &str) -> Result<CssCode> {
    let mut n_qubits: Option<usize> = None;
    let mut xs: Vec<BTreeSet<usize>> = Vec::new();
    let mut zs: Vec<BTreeSet<usize>> = Vec::new();
    let mut weights = (1.0, 1.0);
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = content(raw);
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let first = toks.next().unwrap();
        match first {
            "qubits" => {
                let n = toks
                    .next()
                    .ok_or_else(|| parse_err(lineno, line.len(), "missing qubit count"))?;
                n_qubits = Some(
                    n.parse()
                        .map_err(|_| parse_err(lineno, 8, format!("bad qubit count `{n}`")))?,
                );
            }
            "weights" => {
                let a: f64 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(lineno, 9, "bad weight a"))?;
                let b: f64 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(lineno, 9, "bad weight b"))?;
                weights = (a, b);
            }
            "X" | "Z" => {
                let n = n_qubits
                    .ok_or_else(|| parse_err(lineno, 1, "generator before `qubits N`"))?;
                let mut set = BTreeSet::new();
                for tok in toks {
                    let q: usize = tok
                        .parse()
                        .map_err(|_| parse_err(lineno, 1, format!("bad qubit `{tok}`")))?;
                    if q >= n {
                        return Err(Error::IndexOutOfRange { index: q, n_qubits: n });
                    }
                    set.insert(q);
                }
                if first == "X" {
                    xs.push(set)
                } else {
                    zs.push(set)
                }
            }
            other => return Err(parse_err(lineno, 1, format!("unknown directive `{other}`"))),
        }
    }
    let n = n_qubits.ok_or_else(|| parse_err(1, 1, "missing `qubits N` header"))?;
    CssCode::new(n, xs, zs, weights.0, weights.1)
}

pub fn serialize_css(code: &CssCode) -> String {
    let mut out = format!("qubits {}\n", code.n_qubits);
    out.push_str(&format!("weights {} {}\n", code.a, code.b));
    for g in &code.x_generators {
        let idx: Vec<String> = g.iter().map(|q| q.to_string()).collect();
        out.push_str(&format!("X {}\n", idx.join(" ")));
    }
    for g in &code.z_generators {
        let idx: Vec<String> = g.iter().map(|q| q.to_string()).collect();
        out.push_str(&format!("Z {}\n", idx.join(" ")));
    }
    out
}
