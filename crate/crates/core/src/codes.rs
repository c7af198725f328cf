//! CSS code Hamiltonians from stabilizer generator lists.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Axis, Hamiltonian, PauliTerm};

/// A CSS stabilizer code given by X- and Z-generator supports plus the
/// Hamiltonian weights a (X side) and b (Z side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CssCode {
    pub n_qubits: usize,
    pub x_generators: Vec<BTreeSet<usize>>,
    pub z_generators: Vec<BTreeSet<usize>>,
    pub a: f64,
    pub b: f64,
}

impl CssCode {
    pub fn new(
        n_qubits: usize,
        x_generators: Vec<BTreeSet<usize>>,
        z_generators: Vec<BTreeSet<usize>>,
        a: f64,
        b: f64,
    ) -> Result<CssCode> {
        let code = CssCode { n_qubits, x_generators, z_generators, a, b };
        code.validate()?;
        Ok(code)
    }

    /// Supports in range and every X/Z pair overlapping on an even set.
    pub fn validate(&self) -> Result<()> {
        assert!(self.a > 0.0 && self.b > 0.0, "weights must be positive");
        for g in self.x_generators.iter().chain(&self.z_generators) {
            if let Some(&q) = g.iter().next_back() {
                if q >= self.n_qubits {
                    return Err(Error::IndexOutOfRange { index: q, n_qubits: self.n_qubits });
                }
            }
        }
        for (r, x) in self.x_generators.iter().enumerate() {
            for (s, z) in self.z_generators.iter().enumerate() {
                if x.intersection(z).count() % 2 != 0 {
                    return Err(Error::NonCommutingGenerators { r, s });
                }
            }
        }
        Ok(())
    }

    /// Logical qubit count n - rank(X) - rank(Z) over GF(2).
    pub fn logical_count(&self) -> usize {
        let rx = gf2_rank(&self.x_generators, self.n_qubits);
        let rz = gf2_rank(&self.z_generators, self.n_qubits);
        self.n_qubits - rx - rz
    }
}

/// Row rank of support sets viewed as GF(2) vectors.
pub fn gf2_rank(rows: &[BTreeSet<usize>], n: usize) -> usize {
    assert!(n <= 64);
    let mut basis: Vec<u64> = Vec::new();
    for row in rows {
        let mut v: u64 = 0;
        for &q in row {
            v |= 1 << q;
        }
        for b in &basis {
            let pivot = 63 - b.leading_zeros();
            if v >> pivot & 1 == 1 {
                v ^= b;
            }
        }
        if v != 0 {
            basis.push(v);
        }
    }
    basis.len()
}

/// H = -a Σ_r A_r - b Σ_s B_s with A_r = Π X, B_s = Π Z.
pub fn build_code_hamiltonian(code: &CssCode) -> Result<Hamiltonian> {
    code.validate()?;
    let mut terms = Vec::new();
    for g in &code.x_generators {
        terms.push(PauliTerm::new(-code.a, g.iter().map(|&q| (q, Axis::X))));
    }
    for g in &code.z_generators {
        terms.push(PauliTerm::new(-code.b, g.iter().map(|&q| (q, Axis::Z))));
    }
    Hamiltonian::from_terms(code.n_qubits, terms, "css code")
}

fn set(qubits: &[usize]) -> BTreeSet<usize> {
    qubits.iter().copied().collect()
}

/// The n-qubit repetition code: Z-generators Z_i Z_{i+1}.
pub fn repetition(n: usize) -> CssCode {
    assert!(n >= 2);
    let zs = (0..n - 1).map(|i| set(&[i, i + 1])).collect();
    CssCode::new(n, Vec::new(), zs, 1.0, 1.0).expect("repetition code is valid")
}

/// The 7-qubit Steane code.
///
/// X generators are the standard Hamming rows. The Z side spans the same
/// simplex code but in a degree-balanced basis, so no qubit sits in more
/// than 4 generators overall (the textbook identical-support table puts
/// qubit 6 in all six).
pub fn steane() -> CssCode {
    let xs = vec![set(&[0, 2, 4, 6]), set(&[1, 2, 5, 6]), set(&[3, 4, 5, 6])];
    let zs = vec![set(&[0, 2, 3, 5]), set(&[0, 1, 4, 5]), set(&[0, 2, 4, 6])];
    CssCode::new(7, xs, zs, 1.0, 1.0).expect("steane code is valid")
}

/// Distance-2 rotated surface code on 4 data qubits
/// (one weight-4 X plaquette, two weight-2 Z half-plaquettes).
pub fn surface2() -> CssCode {
    let xs = vec![set(&[0, 1, 2, 3])];
    let zs = vec![set(&[0, 1]), set(&[2, 3])];
    CssCode::new(4, xs, zs, 1.0, 1.0).expect("surface code is valid")
}

/// Look up a builtin code by name: `repetition(n)`, `steane`, `surface(2)`.
pub fn builtin(name: &str) -> Result<CssCode> {
    let name = name.trim();
    if name == "steane" {
        return Ok(steane());
    }
    if let Some(rest) = name.strip_prefix("repetition(").and_then(|r| r.strip_suffix(')')) {
        let n: usize = rest.parse().map_err(|_| Error::UnknownCode(name.into()))?;
        if n < 2 {
            return Err(Error::UnknownCode(name.into()));
        }
        return Ok(repetition(n));
    }
    if name == "surface(2)" {
        return Ok(surface2());
    }
    Err(Error::UnknownCode(name.into()))
}
