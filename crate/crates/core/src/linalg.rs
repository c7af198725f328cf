//! Dense and matrix-free numerics behind the desk-scale checks.
//!
//! Hamiltonians realize either as real symmetric matrices (every term has an
//! even Y count) or complex Hermitian ones. Dense eigendecompositions go
//! through faer; extremal eigenvalues of larger registers use a deflated
//! Lanczos with full reorthogonalization driven by the matrix-free term
//! application.

use faer::prelude::*;
use faer::Side;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::BackendCaps;
use crate::error::{Error, Result};
use crate::pauli::{Axis, Hamiltonian, PauliTerm};

pub use faer::c64;

/// Precomputed bit-twiddling form of one Pauli term.
#[derive(Debug, Clone, Copy)]
pub struct TermAction {
    /// Bits flipped by X and Y factors.
    pub flip: u64,
    /// Bits contributing a (-1)^{bit} phase (Z and Y factors).
    pub phase_mask: u64,
    /// coefficient * i^{#Y}.
    pub prefactor: c64,
}

impl TermAction {
    pub fn new(term: &PauliTerm) -> TermAction {
        let mut flip = 0u64;
        let mut phase_mask = 0u64;
        let mut y_count = 0u32;
        for (&q, &a) in term.axes() {
            match a {
                Axis::X => flip |= 1 << q,
                Axis::Y => {
                    flip |= 1 << q;
                    phase_mask |= 1 << q;
                    y_count += 1;
                }
                Axis::Z => phase_mask |= 1 << q,
            }
        }
        let i_pow = match y_count % 4 {
            0 => c64::new(1.0, 0.0),
            1 => c64::new(0.0, 1.0),
            2 => c64::new(-1.0, 0.0),
            _ => c64::new(0.0, -1.0),
        };
        TermAction { flip, phase_mask, prefactor: i_pow * term.coefficient }
    }

    #[inline]
    fn sign(&self, basis: u64) -> f64 {
        if (basis & self.phase_mask).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn actions(h: &Hamiltonian) -> Vec<TermAction> {
    h.terms().iter().map(TermAction::new).collect()
}

/// out += H v, matrix-free (complex amplitudes).
pub fn apply(actions: &[TermAction], v: &[c64], out: &mut [c64]) {
    for a in actions {
        for (b, &amp) in v.iter().enumerate() {
            if amp != c64::new(0.0, 0.0) {
                let target = b ^ (a.flip as usize);
                out[target] += a.prefactor * a.sign(b as u64) * amp;
            }
        }
    }
}

/// out += H v for real Hamiltonians (every prefactor real).
pub fn apply_real(actions: &[TermAction], v: &[f64], out: &mut [f64]) {
    for a in actions {
        debug_assert!(a.prefactor.im.abs() < 1e-15);
        let c = a.prefactor.re;
        for (b, &amp) in v.iter().enumerate() {
            if amp != 0.0 {
                let target = b ^ (a.flip as usize);
                out[target] += c * a.sign(b as u64) * amp;
            }
        }
    }
}

/// Dense realization of a Hamiltonian.
#[derive(Debug, Clone)]
pub enum OperatorMatrix {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        match self {
            OperatorMatrix::Real(m) => m.nrows(),
            OperatorMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn to_complex(&self) -> Mat<c64> {
        match self {
            OperatorMatrix::Real(m) => {
                Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
            }
            OperatorMatrix::Complex(m) => m.clone(),
        }
    }

    /// Max |M - M^dagger| entry, relative to the largest entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        match self {
            OperatorMatrix::Real(m) => {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                        scale = scale.max(m[(i, j)].abs());
                    }
                }
            }
            OperatorMatrix::Complex(m) => {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        let d = m[(i, j)] - m[(j, i)].conj();
                        worst = worst.max(d.norm());
                        scale = scale.max(m[(i, j)].norm());
                    }
                }
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Full eigendecomposition, ascending eigenvalues.
    pub fn eigh(&self) -> Spectrum {
        match self {
            OperatorMatrix::Real(m) => {
                let evd = m.self_adjoint_eigen(Side::Lower).expect("eigendecomposition");
                let n = m.nrows();
                let mut order: Vec<usize> = (0..n).collect();
                let s = evd.S();
                order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap());
                let evals = order.iter().map(|&k| s[k]).collect();
                let u = evd.U();
                let vecs = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
                Spectrum { evals, vecs: EigVecs::Real(vecs) }
            }
            OperatorMatrix::Complex(m) => {
                let evd = m.self_adjoint_eigen(Side::Lower).expect("eigendecomposition");
                let n = m.nrows();
                let mut order: Vec<usize> = (0..n).collect();
                let s = evd.S();
                order.sort_by(|&a, &b| s[a].re.partial_cmp(&s[b].re).unwrap());
                let evals = order.iter().map(|&k| s[k].re).collect();
                let u = evd.U();
                let vecs = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
                Spectrum { evals, vecs: EigVecs::Complex(vecs) }
            }
        }
    }

    /// Spectral norm via the largest |eigenvalue| (Hermitian input).
    pub fn spectral_norm(&self) -> f64 {
        let s = self.eigh();
        s.evals
            .first()
            .map(|a| a.abs())
            .unwrap_or(0.0)
            .max(s.evals.last().map(|a| a.abs()).unwrap_or(0.0))
    }
}

#[derive(Debug, Clone)]
enum EigVecs {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

/// Sorted eigenvalues plus eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub evals: Vec<f64>,
    vecs: EigVecs,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        match &self.vecs {
            EigVecs::Real(m) => m.nrows(),
            EigVecs::Complex(m) => m.nrows(),
        }
    }

    pub fn vector(&self, k: usize) -> Vec<c64> {
        match &self.vecs {
            EigVecs::Real(m) => (0..m.nrows()).map(|i| c64::new(m[(i, k)], 0.0)).collect(),
            EigVecs::Complex(m) => (0..m.nrows()).map(|i| m[(i, k)]).collect(),
        }
    }

    pub fn vector_real(&self, k: usize) -> Option<Vec<f64>> {
        match &self.vecs {
            EigVecs::Real(m) => Some((0..m.nrows()).map(|i| m[(i, k)]).collect()),
            EigVecs::Complex(_) => None,
        }
    }

    /// Columns `0..k` as a complex basis matrix.
    pub fn basis(&self, k: usize) -> Mat<c64> {
        let n = self.dim();
        match &self.vecs {
            EigVecs::Real(m) => Mat::from_fn(n, k, |i, j| c64::new(m[(i, j)], 0.0)),
            EigVecs::Complex(m) => Mat::from_fn(n, k, |i, j| m[(i, j)]),
        }
    }

    pub fn ground_energy(&self) -> f64 {
        self.evals[0]
    }

    /// Gap above a possibly degenerate ground level: first eigenvalue
    /// exceeding `evals[0] + tol`.
    pub fn gap_above_ground(&self, tol: f64) -> Option<f64> {
        let e0 = self.evals[0];
        self.evals.iter().find(|&&e| e > e0 + tol).map(|&e| e - e0)
    }
}

/// Realize a Hamiltonian as a dense matrix. Real storage when possible.
pub fn realize(h: &Hamiltonian, caps: &BackendCaps) -> Result<OperatorMatrix> {
    let n = h.n_qubits();
    if n > caps.dense {
        return Err(Error::CapExceeded { qubits: n, cap: caps.dense, backend: "dense" });
    }
    let dim = 1usize << n;
    let acts = actions(h);
    if h.is_real() {
        let mut m = Mat::<f64>::zeros(dim, dim);
        for a in &acts {
            let c = a.prefactor.re;
            for b in 0..dim {
                let t = b ^ (a.flip as usize);
                m[(t, b)] += c * a.sign(b as u64);
            }
        }
        Ok(OperatorMatrix::Real(m))
    } else {
        let mut m = Mat::<c64>::zeros(dim, dim);
        for a in &acts {
            for b in 0..dim {
                let t = b ^ (a.flip as usize);
                m[(t, b)] += a.prefactor * a.sign(b as u64);
            }
        }
        Ok(OperatorMatrix::Complex(m))
    }
}

/// Which eigenvalue engine `lowest_eigenvalues` should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Auto,
    Dense,
    Iterative,
}

/// The `k` lowest eigenvalues of `h`, ascending.
pub fn lowest_eigenvalues(
    h: &Hamiltonian,
    k: usize,
    backend: Backend,
    caps: &BackendCaps,
) -> Result<Vec<f64>> {
    let n = h.n_qubits();
    let use_dense = match backend {
        Backend::Dense => true,
        Backend::Iterative => false,
        Backend::Auto => n <= caps.dense,
    };
    if use_dense {
        let spec = realize(h, caps)?.eigh();
        Ok(spec.evals.into_iter().take(k).collect())
    } else {
        if n > caps.iterative {
            return Err(Error::CapExceeded { qubits: n, cap: caps.iterative, backend: "iterative" });
        }
        if !h.is_real() {
            return Err(Error::CapExceeded { qubits: n, cap: caps.dense, backend: "dense (complex)" });
        }
        lanczos_lowest(h, k, 0xC0FFEE)
    }
}

/// Deflated Lanczos with full reorthogonalization for the k lowest
/// eigenvalues of a real symmetric Hamiltonian.
pub fn lanczos_lowest(h: &Hamiltonian, k: usize, seed: u64) -> Result<Vec<f64>> {
    let dim = 1usize << h.n_qubits();
    let acts = actions(h);
    let matvec = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        apply_real(&acts, v, out);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    let tol = 1e-10;
    for _ in 0..k.min(dim) {
        let (val, vec) =
            lanczos_one(&matvec, dim, &found, &mut rng, tol).ok_or(Error::ConvergenceFailure {
                iters: LANCZOS_MAX_RESTARTS * LANCZOS_KRYLOV_DIM,
            })?;
        found.push((val, vec));
    }
    let mut evals: Vec<f64> = found.iter().map(|(v, _)| *v).collect();
    evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(evals)
}

const LANCZOS_KRYLOV_DIM: usize = 80;
const LANCZOS_MAX_RESTARTS: usize = 60;

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lanczos_one(
    matvec: &impl Fn(&[f64], &mut [f64]),
    dim: usize,
    deflate: &[(f64, Vec<f64>)],
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> Option<(f64, Vec<f64>)> {
    let defl: Vec<Vec<f64>> = deflate.iter().map(|(_, v)| v.clone()).collect();
    let m = LANCZOS_KRYLOV_DIM.min(dim);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    for restart in 0..LANCZOS_MAX_RESTARTS {
        orthogonalize(&mut start, &defl);
        let nrm = norm(&start);
        if nrm < 1e-14 {
            start = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
            continue;
        }
        start.iter_mut().for_each(|x| *x /= nrm);

        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        for j in 0..m {
            matvec(&basis[j], &mut w);
            let alpha: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
            alphas.push(alpha);
            // full reorthogonalization against the Krylov basis and the
            // deflation space keeps degenerate levels separated
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, &defl);
            let beta = norm(&w);
            if beta < 1e-13 || j + 1 == m {
                break;
            }
            betas.push(beta);
            let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
            basis.push(next);
            w.iter_mut().for_each(|x| *x = 0.0);
        }

        let t = alphas.len();
        let mut tri = Mat::<f64>::zeros(t, t);
        for i in 0..t {
            tri[(i, i)] = alphas[i];
            if i + 1 < t && i < betas.len() {
                tri[(i, i + 1)] = betas[i];
                tri[(i + 1, i)] = betas[i];
            }
        }
        let spec = OperatorMatrix::Real(tri).eigh();
        let y = spec.vector_real(0).unwrap();
        let mut ritz = vec![0.0; dim];
        for (j, b) in basis.iter().enumerate() {
            let c = y[j];
            ritz.iter_mut().zip(b).for_each(|(x, v)| *x += c * v);
        }
        orthogonalize(&mut ritz, &defl);
        let nrm = norm(&ritz);
        if nrm < 1e-14 {
            start = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
            continue;
        }
        ritz.iter_mut().for_each(|x| *x /= nrm);
        let mut hv = vec![0.0; dim];
        matvec(&ritz, &mut hv);
        let lam: f64 = hv.iter().zip(&ritz).map(|(x, y)| x * y).sum();
        let res: f64 = hv
            .iter()
            .zip(&ritz)
            .map(|(x, y)| (x - lam * y) * (x - lam * y))
            .sum::<f64>()
            .sqrt();
        if res <= tol * lam.abs().max(1.0) {
            return Some((lam, ritz));
        }
        start = ritz;
        let _ = restart;
    }
    None
}

// ---- small dense helpers used throughout verification ----

pub fn mat_mul(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a * b
}

pub fn adjoint(a: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn identity_c(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

/// Largest singular value of a (possibly non-Hermitian) complex matrix,
/// via the top eigenvalue of M^H M.
pub fn operator_norm(m: &Mat<c64>) -> f64 {
    let g = adjoint(m) * m;
    let spec = OperatorMatrix::Complex(g).eigh();
    spec.evals.last().map(|x| x.max(0.0).sqrt()).unwrap_or(0.0)
}

pub fn operator_norm_real(m: &Mat<f64>) -> f64 {
    let g = m.transpose() * m;
    let spec = OperatorMatrix::Real(g).eigh();
    spec.evals.last().map(|x| x.max(0.0).sqrt()).unwrap_or(0.0)
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &Mat<c64>) -> f64 {
    let spec = OperatorMatrix::Complex(m.clone()).eigh();
    spec.evals.iter().map(|x| x.abs()).sum()
}

/// Positive-semidefinite square root of a Hermitian matrix.
pub fn sqrt_psd(m: &Mat<c64>) -> Mat<c64> {
    let spec = OperatorMatrix::Complex(m.clone()).eigh();
    let n = m.nrows();
    let u = spec.basis(n);
    let mut scaled = u.clone();
    for j in 0..n {
        let s = spec.evals[j].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * adjoint(&u)
}

/// exp(-i M t) for Hermitian M.
pub fn expm_herm(m: &Mat<c64>, t: f64) -> Mat<c64> {
    let spec = OperatorMatrix::Complex(m.clone()).eigh();
    let n = m.nrows();
    let u = spec.basis(n);
    let mut scaled = u.clone();
    for j in 0..n {
        let ph = c64::new(0.0, -spec.evals[j] * t).exp();
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    &scaled * adjoint(&u)
}

/// Solve the Hermitian system M x = b through the pseudo-inverse, dropping
/// eigenmodes with |eigenvalue| below `cutoff`. Returns (x, dropped modes).
pub fn solve_hermitian_pinv(m: &OperatorMatrix, b: &[c64], cutoff: f64) -> (Vec<c64>, usize) {
    let spec = m.eigh();
    let n = spec.dim();
    let mut x = vec![c64::new(0.0, 0.0); n];
    let mut dropped = 0usize;
    for k in 0..n {
        if spec.evals[k].abs() < cutoff {
            dropped += 1;
            continue;
        }
        let v = spec.vector(k);
        let amp: c64 = v.iter().zip(b).map(|(vi, bi)| vi.conj() * bi).sum();
        let w = amp / spec.evals[k];
        x.iter_mut().zip(&v).for_each(|(xi, vi)| *xi += w * vi);
    }
    (x, dropped)
}

/// sin of the largest principal angle between the column spans of two
/// orthonormal bases (equal dimension).
pub fn largest_principal_angle_sin(u: &Mat<c64>, v: &Mat<c64>) -> f64 {
    assert_eq!(u.ncols(), v.ncols());
    let m = adjoint(u) * v;
    let g = adjoint(&m) * &m;
    let spec = OperatorMatrix::Complex(g).eigh();
    let cos2 = spec.evals.first().copied().unwrap_or(1.0).clamp(0.0, 1.0);
    (1.0 - cos2).max(0.0).sqrt()
}

/// Partial trace over the `n_anc` highest qubits of a density matrix on
/// `n_low + n_anc` qubits.
pub fn partial_trace_high(rho: &Mat<c64>, n_low: usize) -> Mat<c64> {
    let dim = rho.nrows();
    let low = 1usize << n_low;
    let high = dim / low;
    let mut out = Mat::<c64>::zeros(low, low);
    for a in 0..high {
        let off = a << n_low;
        for i in 0..low {
            for j in 0..low {
                out[(i, j)] += rho[(off + i, off + j)];
            }
        }
    }
    out
}

/// |psi><psi| for a state vector.
pub fn outer(psi: &[c64]) -> Mat<c64> {
    let n = psi.len();
    Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

pub fn vec_norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
