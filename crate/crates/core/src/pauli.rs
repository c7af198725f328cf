//! Pauli-string algebra and the Hamiltonian intermediate representation.
//!
//! Every Hamiltonian in the pipeline is a real combination of Pauli strings,
//!
//!   H = Σ_k  c_k · σ_k,    σ_k = ⊗_q P_q,  P_q ∈ {X, Y, Z},
//!
//! stored sparsely as `qubit → axis` maps. Identity factors are implicit;
//! a term with an empty axis map is a constant energy shift. Complex phases
//! appear only transiently inside products of strings.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::MERGE_TOL;
use crate::error::{Error, Result};

/// Single-qubit Pauli operator, identity included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

/// Non-identity Pauli axis, the per-qubit payload of a stored term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn op(self) -> PauliOp {
        match self {
            Axis::X => PauliOp::X,
            Axis::Y => PauliOp::Y,
            Axis::Z => PauliOp::Z,
        }
    }

    pub fn label(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Axis> {
        match c {
            'X' | 'x' => Some(Axis::X),
            'Y' | 'y' => Some(Axis::Y),
            'Z' | 'z' => Some(Axis::Z),
            _ => None,
        }
    }
}

/// Fourth root of unity i^k tracked through Pauli products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn mul(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn as_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Real phases are ±1; products of Hermitian strings that stay Hermitian
    /// always land here.
    pub fn as_real(self) -> Option<f64> {
        match self.0 {
            0 => Some(1.0),
            2 => Some(-1.0),
            _ => None,
        }
    }
}

/// Single-qubit Pauli group product: a·b = phase · result.
pub fn pauli_mul(a: PauliOp, b: PauliOp) -> (Phase, PauliOp) {
    use PauliOp::*;
    match (a, b) {
        (I, p) | (p, I) => (Phase::ONE, p),
        (X, X) | (Y, Y) | (Z, Z) => (Phase::ONE, I),
        (X, Y) => (Phase::I, Z),
        (Y, X) => (Phase::MINUS_I, Z),
        (Y, Z) => (Phase::I, X),
        (Z, Y) => (Phase::MINUS_I, X),
        (Z, X) => (Phase::I, Y),
        (X, Z) => (Phase::MINUS_I, Y),
    }
}

/// One weighted Pauli string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    axes: BTreeMap<usize, Axis>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, axes: impl IntoIterator<Item = (usize, Axis)>) -> PauliTerm {
        PauliTerm { coefficient, axes: axes.into_iter().collect() }
    }

    /// Constant (identity) term.
    pub fn identity(coefficient: f64) -> PauliTerm {
        PauliTerm { coefficient, axes: BTreeMap::new() }
    }

    pub fn single(coefficient: f64, qubit: usize, axis: Axis) -> PauliTerm {
        PauliTerm::new(coefficient, [(qubit, axis)])
    }

    pub fn two(coefficient: f64, q0: usize, a0: Axis, q1: usize, a1: Axis) -> PauliTerm {
        assert_ne!(q0, q1, "two-qubit term needs distinct qubits");
        PauliTerm::new(coefficient, [(q0, a0), (q1, a1)])
    }

    pub fn axes(&self) -> &BTreeMap<usize, Axis> {
        &self.axes
    }

    /// Number of qubits acted on non-trivially (the term locality).
    pub fn weight(&self) -> usize {
        self.axes.len()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.axes.keys().copied()
    }

    pub fn acts_on(&self, qubit: usize) -> bool {
        self.axes.contains_key(&qubit)
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.axes.keys().next_back().copied()
    }

    pub fn overlaps(&self, other: &PauliTerm) -> Option<usize> {
        self.axes.keys().find(|q| other.axes.contains_key(q)).copied()
    }

    pub fn scaled(&self, factor: f64) -> PauliTerm {
        PauliTerm { coefficient: self.coefficient * factor, axes: self.axes.clone() }
    }

    /// Canonical key used for sorting and merging.
    pub fn key(&self) -> Vec<(usize, Axis)> {
        self.axes.iter().map(|(&q, &a)| (q, a)).collect()
    }

    /// Product of two strings with full phase tracking.
    pub fn product_with_phase(&self, other: &PauliTerm) -> (Complex64, BTreeMap<usize, Axis>) {
        let mut phase = Phase::ONE;
        let mut axes = self.axes.clone();
        for (&q, &b) in &other.axes {
            let a = axes.get(&q).map(|a| a.op()).unwrap_or(PauliOp::I);
            let (ph, r) = pauli_mul(a, b.op());
            phase = phase.mul(ph);
            match r {
                PauliOp::I => {
                    axes.remove(&q);
                }
                PauliOp::X => {
                    axes.insert(q, Axis::X);
                }
                PauliOp::Y => {
                    axes.insert(q, Axis::Y);
                }
                PauliOp::Z => {
                    axes.insert(q, Axis::Z);
                }
            }
        }
        (phase.as_complex() * self.coefficient * other.coefficient, axes)
    }

    /// Product of two strings. The phase must come out real (±1) for the
    /// result to remain a valid Hermitian term; callers multiplying
    /// disjoint-support factors always satisfy this.
    pub fn product(&self, other: &PauliTerm) -> Result<PauliTerm> {
        let (coeff, axes) = self.product_with_phase(other);
        if coeff.im.abs() > 1e-12 * coeff.norm().max(1.0) {
            return Err(Error::Layout(
                "Pauli product has imaginary phase; factors must commute qubit-wise".into(),
            ));
        }
        Ok(PauliTerm { coefficient: coeff.re, axes })
    }

    /// Extend the string with one more factor on a fresh qubit.
    pub fn extended(&self, qubit: usize, axis: Axis) -> PauliTerm {
        assert!(!self.axes.contains_key(&qubit), "qubit {qubit} already in term");
        let mut axes = self.axes.clone();
        axes.insert(qubit, axis);
        PauliTerm { coefficient: self.coefficient, axes }
    }

    /// Same string with every qubit index shifted up by `offset`.
    pub fn shifted(&self, offset: usize) -> PauliTerm {
        PauliTerm {
            coefficient: self.coefficient,
            axes: self.axes.iter().map(|(&q, &a)| (q + offset, a)).collect(),
        }
    }

    /// Renumber qubits through `map`; indices absent from the map stay.
    pub fn remapped(&self, map: &BTreeMap<usize, usize>) -> PauliTerm {
        PauliTerm {
            coefficient: self.coefficient,
            axes: self.axes.iter().map(|(&q, &a)| (*map.get(&q).unwrap_or(&q), a)).collect(),
        }
    }

    /// Count of Y factors; matrix entries are real iff this is even.
    pub fn y_count(&self) -> usize {
        self.axes.values().filter(|a| **a == Axis::Y).count()
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coefficient)?;
        for (q, a) in &self.axes {
            write!(f, " {}{}", a.label(), q)?;
        }
        Ok(())
    }
}

/// Scalar summary of a Hamiltonian's interaction structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    /// Max term weight (locality).
    pub kappa: usize,
    /// Max number of terms acting non-trivially on one qubit.
    pub delta: usize,
    /// Max |coefficient|.
    pub mu0: f64,
    pub n_terms: usize,
}

/// A sum of weighted Pauli strings on a fixed register.
///
/// Terms are kept in a canonical order (sorted by support, then axes) with
/// duplicates merged by coefficient addition and negligible coefficients
/// dropped, so equal Hamiltonians serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    pub label: String,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize, label: impl Into<String>) -> Hamiltonian {
        Hamiltonian { n_qubits, terms: Vec::new(), label: label.into() }
    }

    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = PauliTerm>,
        label: impl Into<String>,
    ) -> Result<Hamiltonian> {
        let mut h = Hamiltonian::new(n_qubits, label);
        for t in terms {
            h.add_term(t)?;
        }
        Ok(h)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Insert a term, merging it into an existing one with the same axes.
    pub fn add_term(&mut self, term: PauliTerm) -> Result<()> {
        if !term.coefficient.is_finite() {
            return Err(Error::Layout(format!("non-finite coefficient {}", term.coefficient)));
        }
        if let Some(q) = term.max_qubit() {
            if q >= self.n_qubits {
                return Err(Error::IndexOutOfRange { index: q, n_qubits: self.n_qubits });
            }
        }
        let key = term.key();
        match self.terms.binary_search_by(|t| t.key().cmp(&key)) {
            Ok(pos) => {
                self.terms[pos].coefficient += term.coefficient;
                if self.terms[pos].coefficient.abs() < MERGE_TOL {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => {
                if term.coefficient.abs() >= MERGE_TOL {
                    self.terms.insert(pos, term);
                }
            }
        }
        Ok(())
    }

    pub fn add_all(&mut self, other: &Hamiltonian) -> Result<()> {
        for t in &other.terms {
            self.add_term(t.clone())?;
        }
        Ok(())
    }

    /// Same terms on a wider register.
    pub fn widened(&self, n_qubits: usize) -> Hamiltonian {
        assert!(n_qubits >= self.n_qubits);
        Hamiltonian { n_qubits, terms: self.terms.clone(), label: self.label.clone() }
    }

    /// Every qubit index shifted up by `offset`, on a register of
    /// `n_qubits` total.
    pub fn shifted(&self, offset: usize, n_qubits: usize) -> Hamiltonian {
        assert!(self.n_qubits + offset <= n_qubits);
        Hamiltonian {
            n_qubits,
            terms: self.terms.iter().map(|t| t.shifted(offset)).collect(),
            label: self.label.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Hamiltonian {
        let terms = self
            .terms
            .iter()
            .map(|t| t.scaled(factor))
            .filter(|t| t.coefficient.abs() >= MERGE_TOL)
            .collect();
        Hamiltonian { n_qubits: self.n_qubits, terms, label: self.label.clone() }
    }

    pub fn graph_stats(&self) -> GraphStats {
        let kappa = self.terms.iter().map(|t| t.weight()).max().unwrap_or(0);
        let mut per_qubit = vec![0usize; self.n_qubits];
        for t in &self.terms {
            for q in t.support() {
                per_qubit[q] += 1;
            }
        }
        GraphStats {
            kappa,
            delta: per_qubit.iter().copied().max().unwrap_or(0),
            mu0: self.terms.iter().map(|t| t.coefficient.abs()).fold(0.0, f64::max),
            n_terms: self.terms.len(),
        }
    }

    /// Σ_k |c_k|, an upper bound on the operator norm by the triangle
    /// inequality.
    pub fn triangle_norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// Max number of *distinct partner qubits* any qubit couples to through
    /// 2-local terms. This is the lattice-degree notion the final structural
    /// checks bound by 4; `graph_stats().delta` counts raw terms.
    pub fn coupling_degree(&self) -> usize {
        let mut partners: Vec<std::collections::BTreeSet<usize>> =
            vec![Default::default(); self.n_qubits];
        for t in &self.terms {
            if t.weight() == 2 {
                let qs: Vec<usize> = t.support().collect();
                partners[qs[0]].insert(qs[1]);
                partners[qs[1]].insert(qs[0]);
            }
        }
        partners.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    pub fn hypergraph(&self) -> InteractionHypergraph {
        InteractionHypergraph {
            n_vertices: self.n_qubits,
            hyperedges: self
                .terms
                .iter()
                .enumerate()
                .map(|(id, t)| (id, t.support().collect()))
                .collect(),
        }
    }

    /// True if the realized matrix is real (every term has an even Y count).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.y_count() % 2 == 0)
    }
}

/// Vertices are qubits; one hyperedge per term, carrying its support set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionHypergraph {
    pub n_vertices: usize,
    pub hyperedges: Vec<(usize, Vec<usize>)>,
}

impl InteractionHypergraph {
    pub fn degree(&self, vertex: usize) -> usize {
        self.hyperedges.iter().filter(|(_, s)| s.contains(&vertex)).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_vertices).map(|v| self.degree(v)).max().unwrap_or(0)
    }
}
