//! Policy constants and backend caps.
//!
//! The gadget lemmas fix only the exponents of the strength policies; the
//! constants here were calibrated once against the spectral-accuracy suite
//! (smallest powers of two that keep the measured low-spectrum error within
//! the requested epsilon at policy Delta) and are frozen as defaults.

use serde::{Deserialize, Serialize};

/// Calibrated second-order policy constant in Delta = c2 (L^6/eps^2 + L^2/eta^2).
pub const DEFAULT_C2: f64 = 16.0;
/// Calibrated third-order policy constant in Delta = c3 (L^12/eps^3 + L^3/eta^3).
pub const DEFAULT_C3: f64 = 16.0;
/// Ancilla-count bound constant: N <= c_N * n^2 kappa^2 delta^2.
/// Fixed by the worst builtin instance (distance-2 surface code).
pub const DEFAULT_CN: f64 = 12.0;
/// Soundness bound constant in 5 eps' + eps + c_s sqrt(eta) ||H_t||.
pub const DEFAULT_CS: f64 = 4.0;

/// Matrix backend caps and tolerances.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BackendCaps {
    /// Dense realization cap (qubits).
    pub dense: usize,
    /// Iterative (Lanczos) extremal-eigenvalue cap (qubits).
    pub iterative: usize,
    /// Chains longer than this use the proven C, D bounds instead of the
    /// dense restricted inversion.
    pub dense_chain: usize,
}

impl Default for BackendCaps {
    fn default() -> Self {
        BackendCaps { dense: 14, iterative: 20, dense_chain: 10 }
    }
}

/// Knobs shared by the W-chain constructors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChainPolicy {
    /// Gamma cap: Gamma <= cap_coeff * n^cap_power.
    pub cap_coeff: f64,
    pub cap_power: f64,
    /// Largest n whose uncle-Hamiltonian gap is measured exactly; beyond it
    /// the n^{-6.13} fit calibrated at this size is used.
    pub measured_gap_max_n: usize,
}

impl Default for ChainPolicy {
    fn default() -> Self {
        ChainPolicy { cap_coeff: 100.0, cap_power: 8.0, measured_gap_max_n: 12 }
    }
}

/// Full run configuration for the compiler and verifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub c2: f64,
    pub c3: f64,
    pub c_n: f64,
    pub c_s: f64,
    pub caps: BackendCaps,
    pub chain: ChainPolicy,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: 0.1,
            eta: 0.1,
            c2: DEFAULT_C2,
            c3: DEFAULT_C3,
            c_n: DEFAULT_CN,
            c_s: DEFAULT_CS,
            caps: BackendCaps::default(),
            chain: ChainPolicy::default(),
            seed: 7,
        }
    }
}

/// Coefficients with |c| below this are dropped when terms merge.
pub const MERGE_TOL: f64 = 1e-14;

/// Singular-value cutoff for restricted pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-10;
