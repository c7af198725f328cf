//! Perturbation gadgets: the compiler's rewrite rules.
//!
//! Every gadget produces `H~ = Δ H0 + H1 + √Δ H2` (second order) or
//! `H~ = Δ H0 + H1 + Δ^{1/3} H1' + Δ^{2/3} H2` (third order) on a register
//! enlarged by fresh mediator qubits, such that the effective low-energy
//! Hamiltonian
//!
//!   H_eff = (H1)__  -  (H2)_+ (H0++)^{-1} (H2)+_
//!
//! reproduces the target exactly (`residual_check` measures the defect; the
//! constructions here keep it at numerical zero). Given a large enough Δ
//! from the strength policy, the assembly is a (Δ/2, η, ε)-simulation of the
//! target.
//!
//! The two-axis constructors carry an XX-type and a YY-type target through
//! a single mediator by coupling one through X_t and the other through Y_t;
//! the commutator cross-terms they generate are 1-local Z fields and are
//! compensated exactly inside H1.

use serde::{Deserialize, Serialize};

use crate::config::PINV_CUTOFF;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, OperatorMatrix};
use crate::pauli::{Axis, Hamiltonian, PauliTerm};
use crate::wstate::{build_hw, GadgetConstants, WChainSpec};

/// Which rewrite produced an application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GadgetKind {
    Subdivision,
    ThreeToTwo,
    Triangle,
    Crossing,
    LongRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationOrder {
    Second,
    Third,
}

impl GadgetKind {
    pub fn order(self) -> PerturbationOrder {
        match self {
            GadgetKind::ThreeToTwo => PerturbationOrder::Third,
            _ => PerturbationOrder::Second,
        }
    }
}

/// Ground-state factor of one gadget's ancillas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AncillaBlock {
    /// Mediator qubit pinned to |0>.
    Zero { qubit: usize },
    /// Chain of qubits pinned to |W_n> (any site order; the state is
    /// permutation symmetric).
    WChain { qubits: Vec<usize>, spec: WChainSpec },
}

impl AncillaBlock {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            AncillaBlock::Zero { qubit } => vec![*qubit],
            AncillaBlock::WChain { qubits, .. } => qubits.clone(),
        }
    }
}

/// One perturbative rewrite on an enlarged register.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GadgetApplication {
    pub kind: GadgetKind,
    pub n_qubits: usize,
    /// Heavy part; acts only on ancillas, ground energy 0, restricted gap >= 1.
    pub h0: Hamiltonian,
    pub h1: Hamiltonian,
    pub h2: Hamiltonian,
    pub h1_prime: Option<Hamiltonian>,
    pub delta: f64,
    pub ancillas: Vec<usize>,
    /// Rank-one ancilla ground factor, block by block; the attached state
    /// |anc> of the isometry T|ψ> = |ψ> ⊗ |anc>.
    pub blocks: Vec<AncillaBlock>,
    /// What this application simulates, on the data register.
    pub target: Hamiltonian,
    pub constants: Option<GadgetConstants>,
}

impl GadgetApplication {
    pub fn n_data(&self) -> usize {
        self.n_qubits - self.ancillas.len()
    }

    pub fn order(&self) -> PerturbationOrder {
        if self.h1_prime.is_some() {
            PerturbationOrder::Third
        } else {
            self.kind.order()
        }
    }

    /// max(||H1||, ||H2||, ||H1'||) by the triangle bound.
    pub fn lambda(&self) -> f64 {
        let mut l = self.h1.triangle_norm_bound().max(self.h2.triangle_norm_bound());
        if let Some(hp) = &self.h1_prime {
            l = l.max(hp.triangle_norm_bound());
        }
        l
    }

    /// Fold the untouched remainder of the round's Hamiltonian into H1 and
    /// the target.
    pub fn with_else(mut self, h_else: &Hamiltonian) -> Result<GadgetApplication> {
        let widened = h_else.widened(self.n_qubits);
        self.h1.add_all(&widened)?;
        self.target.add_all(&widened)?;
        Ok(self)
    }

    /// Ancilla ground state over the ancilla sub-register (high bits).
    pub fn ancilla_state(&self) -> Vec<f64> {
        let n_data = self.n_data();
        let k = self.ancillas.len();
        let mut amps = vec![1.0f64; 1];
        // amplitude over ancilla basis computed block-wise
        let mut state = vec![0.0f64; 1 << k];
        'outer: for a in 0..(1usize << k) {
            let mut amp = 1.0;
            for block in &self.blocks {
                match block {
                    AncillaBlock::Zero { qubit } => {
                        if (a >> (qubit - n_data)) & 1 == 1 {
                            continue 'outer;
                        }
                    }
                    AncillaBlock::WChain { qubits, .. } => {
                        let ones: Vec<bool> =
                            qubits.iter().map(|q| (a >> (q - n_data)) & 1 == 1).collect();
                        if ones.iter().filter(|&&b| b).count() != 1 {
                            continue 'outer;
                        }
                        amp /= (qubits.len() as f64).sqrt();
                    }
                }
            }
            state[a] = amp;
        }
        amps.clear();
        state
    }
}

/// Second-order strength policy Δ = c2 (Λ^6/ε² + Λ²/η²).
pub fn choose_delta_2(lambda: f64, epsilon: f64, eta: f64, c2: f64) -> f64 {
    assert!(lambda > 0.0 && epsilon > 0.0 && eta > 0.0);
    c2 * (lambda.powi(6) / (epsilon * epsilon) + lambda.powi(2) / (eta * eta))
}

/// Third-order strength policy Δ = c3 (Λ^12/ε³ + Λ³/η³).
pub fn choose_delta_3(lambda: f64, epsilon: f64, eta: f64, c3: f64) -> f64 {
    assert!(lambda > 0.0 && epsilon > 0.0 && eta > 0.0);
    c3 * (lambda.powi(12) / epsilon.powi(3) + lambda.powi(3) / eta.powi(3))
}

pub fn choose_delta(order: PerturbationOrder, lambda: f64, eps: f64, eta: f64, c: f64) -> f64 {
    match order {
        PerturbationOrder::Second => choose_delta_2(lambda, eps, eta, c),
        PerturbationOrder::Third => choose_delta_3(lambda, eps, eta, c),
    }
}

/// H~ on the enlarged register.
pub fn assemble(g: &GadgetApplication) -> Hamiltonian {
    let d = g.delta;
    let mut h = g.h0.scaled(d);
    h.label = format!("assembled {:?}", g.kind);
    match g.order() {
        PerturbationOrder::Second => {
            h.add_all(&g.h1).unwrap();
            h.add_all(&g.h2.scaled(d.sqrt())).unwrap();
        }
        PerturbationOrder::Third => {
            h.add_all(&g.h1).unwrap();
            h.add_all(&g.h1_prime.as_ref().unwrap().scaled(d.cbrt())).unwrap();
            h.add_all(&g.h2.scaled(d.powf(2.0 / 3.0))).unwrap();
        }
    }
    h
}

fn check_disjoint(parts: &[&PauliTerm]) -> Result<()> {
    for (i, a) in parts.iter().enumerate() {
        for b in parts.iter().skip(i + 1) {
            if let Some(q) = a.overlaps(b) {
                return Err(Error::OverlappingSupports { qubit: q });
            }
        }
    }
    Ok(())
}

/// |1><1| on the mediator as Pauli terms: (1 - Z_t)/2.
fn mediator_penalty(n: usize, t: usize) -> Hamiltonian {
    Hamiltonian::from_terms(
        n,
        [PauliTerm::identity(0.5), PauliTerm::single(-0.5, t, Axis::Z)],
        "mediator penalty",
    )
    .unwrap()
}

/// (1/2)(Σ_i s_i)² for pairwise commuting strings s_i.
fn square_half(s: &[PauliTerm]) -> Result<Vec<PauliTerm>> {
    let mut out = Vec::new();
    for (i, a) in s.iter().enumerate() {
        out.push(a.product(a)?.scaled(0.5));
        for b in s.iter().skip(i + 1) {
            out.push(a.product(b)?);
        }
    }
    Ok(out)
}

/// (i/2)[s1, s2] expanded into (real) Pauli terms.
fn commutator_i_half(s1: &[PauliTerm], s2: &[PauliTerm]) -> Vec<PauliTerm> {
    let mut out = Vec::new();
    for a in s1 {
        for b in s2 {
            let (c_ab, axes) = a.product_with_phase(b);
            let (c_ba, _) = b.product_with_phase(a);
            let coeff = c64::new(0.0, 0.5) * (c_ab - c_ba);
            debug_assert!(coeff.im.abs() < 1e-12, "commutator term stays Hermitian");
            if coeff.re.abs() > 1e-15 {
                out.push(PauliTerm::new(coeff.re, axes));
            }
        }
    }
    out
}

/// One subdivision leg: simulate P_A ⊗ P_B through a mediator coupling.
#[derive(Debug, Clone)]
pub struct PairLeg {
    pub p_a: PauliTerm,
    pub p_b: PauliTerm,
}

/// Subdivision of up to two commuting product targets P_A ⊗ P_B through one
/// fresh mediator (legs beyond the first couple via Y_t instead of X_t).
pub fn subdivide_pair(h_else: &Hamiltonian, legs: &[PairLeg]) -> Result<GadgetApplication> {
    assert!((1..=2).contains(&legs.len()), "one mediator carries at most two legs");
    let n_data = h_else.n_qubits();
    let t = n_data;
    let n = n_data + 1;
    for leg in legs {
        check_disjoint(&[&leg.p_a, &leg.p_b])?;
    }
    let mediator_axis = [Axis::X, Axis::Y];
    let mut h1_terms: Vec<PauliTerm> = Vec::new();
    let mut h2 = Hamiltonian::new(n, "H2");
    let mut target = h_else.widened(n);
    let mut s_parts: Vec<Vec<PauliTerm>> = Vec::new();
    for (k, leg) in legs.iter().enumerate() {
        let s = vec![leg.p_a.clone(), leg.p_b.scaled(-1.0)];
        h2.add_term(leg.p_a.scaled(1.0 / 2f64.sqrt()).extended(t, mediator_axis[k]))?;
        h2.add_term(leg.p_b.scaled(-1.0 / 2f64.sqrt()).extended(t, mediator_axis[k]))?;
        h1_terms.extend(square_half(&s)?);
        target.add_term(leg.p_a.product(&leg.p_b)?)?;
        s_parts.push(s);
    }
    if s_parts.len() == 2 {
        h1_terms.extend(commutator_i_half(&s_parts[0], &s_parts[1]));
    }
    let mut h1 = h_else.widened(n);
    for term in h1_terms {
        h1.add_term(term)?;
    }
    Ok(GadgetApplication {
        kind: GadgetKind::Subdivision,
        n_qubits: n,
        h0: mediator_penalty(n, t),
        h1,
        h2,
        h1_prime: None,
        delta: 1.0,
        ancillas: vec![t],
        blocks: vec![AncillaBlock::Zero { qubit: t }],
        target,
        constants: None,
    })
}

/// Split the target H_else + P_A ⊗ P_B across a fresh mediator.
pub fn subdivide(
    h_else: &Hamiltonian,
    p_a: &PauliTerm,
    p_b: &PauliTerm,
) -> Result<GadgetApplication> {
    subdivide_pair(h_else, &[PairLeg { p_a: p_a.clone(), p_b: p_b.clone() }])
}

/// Third-order 3-to-2 gadget: H_else + P_A ⊗ P_B ⊗ P_C with 2-local output.
pub fn three_to_two(
    h_else: &Hamiltonian,
    p_a: &PauliTerm,
    p_b: &PauliTerm,
    p_c: &PauliTerm,
) -> Result<GadgetApplication> {
    check_disjoint(&[p_a, p_b, p_c])?;
    let n_data = h_else.n_qubits();
    let t = n_data;
    let n = n_data + 1;
    let ca2 = p_a.coefficient * p_a.coefficient;
    let cb2 = p_b.coefficient * p_b.coefficient;

    let mut h1 = h_else.widened(n);
    h1.add_term(p_c.scaled((ca2 + cb2) / (2.0 * p_c.coefficient) * p_c.coefficient).clone())?;
    // i.e. (1/2)(P_A² + P_B²) ⊗ P_C reduces to ((c_a²+c_b²)/2)·P_C
    let mut h1 = h_else.widened(n);
    h1.add_term(p_c.scaled((ca2 + cb2) / 2.0 / p_c.coefficient))?;

    let mut h1p = Hamiltonian::new(n, "H1'");
    h1p.add_term(PauliTerm::identity((ca2 + cb2) / 2.0))?;
    h1p.add_term(p_a.product(p_b)?.scaled(-1.0))?;

    let mut h2 = Hamiltonian::new(n, "H2");
    h2.add_term(p_c.scaled(0.5))?;
    h2.add_term(p_c.scaled(-0.5).extended(t, Axis::Z))?;
    h2.add_term(p_a.scaled(-1.0 / 2f64.sqrt()).extended(t, Axis::X))?;
    h2.add_term(p_b.scaled(1.0 / 2f64.sqrt()).extended(t, Axis::X))?;

    let mut target = h_else.widened(n);
    target.add_term(p_a.product(p_b)?.product(p_c)?)?;

    Ok(GadgetApplication {
        kind: GadgetKind::ThreeToTwo,
        n_qubits: n,
        h0: mediator_penalty(n, t),
        h1,
        h2,
        h1_prime: Some(h1p),
        delta: 1.0,
        ancillas: vec![t],
        blocks: vec![AncillaBlock::Zero { qubit: t }],
        target,
        constants: None,
    })
}

fn assert_unit(p: &PauliTerm) {
    assert!(
        (p.coefficient.abs() - 1.0).abs() < 1e-12,
        "this gadget needs unit-coefficient Pauli factors"
    );
}

/// Triangle gadget: two interactions sharing qubit A,
/// α_ab P_A⊗P_B + α_ac P_A⊗P_C, rewritten to drop A's degree by one.
pub fn triangle(
    h_else: &Hamiltonian,
    p_a: &PauliTerm,
    p_b: &PauliTerm,
    p_c: &PauliTerm,
    alpha_ab: f64,
    alpha_ac: f64,
) -> Result<GadgetApplication> {
    check_disjoint(&[p_a, p_b, p_c])?;
    assert_unit(p_a);
    assert_unit(p_b);
    assert_unit(p_c);
    let n_data = h_else.n_qubits();
    let t = n_data;
    let n = n_data + 1;

    let mut h1 = h_else.widened(n);
    h1.add_term(p_b.product(p_c)?.scaled(alpha_ab * alpha_ac))?;
    h1.add_term(PauliTerm::identity((1.0 + alpha_ab * alpha_ab + alpha_ac * alpha_ac) / 2.0))?;

    let mut h2 = Hamiltonian::new(n, "H2");
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    h2.add_term(p_a.scaled(-inv_sqrt2).extended(t, Axis::X))?;
    h2.add_term(p_b.scaled(alpha_ab * inv_sqrt2).extended(t, Axis::X))?;
    h2.add_term(p_c.scaled(alpha_ac * inv_sqrt2).extended(t, Axis::X))?;

    let mut target = h_else.widened(n);
    target.add_term(p_a.product(p_b)?.scaled(alpha_ab))?;
    target.add_term(p_a.product(p_c)?.scaled(alpha_ac))?;

    Ok(GadgetApplication {
        kind: GadgetKind::Triangle,
        n_qubits: n,
        h0: mediator_penalty(n, t),
        h1,
        h2,
        h1_prime: None,
        delta: 1.0,
        ancillas: vec![t],
        blocks: vec![AncillaBlock::Zero { qubit: t }],
        target,
        constants: None,
    })
}

/// One crossing leg: the pair α_ad P_A⊗P_D + α_bc P_B⊗P_C to be routed
/// through the shared mediator.
#[derive(Debug, Clone)]
pub struct CrossingLeg {
    pub p_a: PauliTerm,
    pub p_b: PauliTerm,
    pub p_c: PauliTerm,
    pub p_d: PauliTerm,
    pub alpha_ad: f64,
    pub alpha_bc: f64,
}

/// Crossing gadget carrying up to two legs through one mediator (the second
/// leg couples via Y_t; the commutator cross-terms are compensated in H1).
pub fn crossing_multi(h_else: &Hamiltonian, legs: &[CrossingLeg]) -> Result<GadgetApplication> {
    assert!((1..=2).contains(&legs.len()), "one mediator carries at most two legs");
    let n_data = h_else.n_qubits();
    let t = n_data;
    let n = n_data + 1;
    let mediator_axis = [Axis::X, Axis::Y];
    let inv_sqrt2 = 1.0 / 2f64.sqrt();

    let mut h1 = h_else.widened(n);
    let mut h2 = Hamiltonian::new(n, "H2");
    let mut target = h_else.widened(n);
    let mut s_parts: Vec<Vec<PauliTerm>> = Vec::new();
    for (k, leg) in legs.iter().enumerate() {
        check_disjoint(&[&leg.p_a, &leg.p_b, &leg.p_c, &leg.p_d])?;
        for p in [&leg.p_a, &leg.p_b, &leg.p_c, &leg.p_d] {
            assert_unit(p);
        }
        let (aad, abc) = (leg.alpha_ad, leg.alpha_bc);
        let s = vec![
            leg.p_a.scaled(-aad),
            leg.p_b.scaled(-abc),
            leg.p_c.clone(),
            leg.p_d.clone(),
        ];
        for part in &s {
            h2.add_term(part.scaled(inv_sqrt2).extended(t, mediator_axis[k]))?;
        }
        // (1/2)s² minus the two target couplings; the remaining cross terms
        // are the planar quadrilateral sides
        for term in square_half(&s)? {
            h1.add_term(term)?;
        }
        h1.add_term(leg.p_a.product(&leg.p_d)?.scaled(aad))?;
        h1.add_term(leg.p_b.product(&leg.p_c)?.scaled(abc))?;
        target.add_term(leg.p_a.product(&leg.p_d)?.scaled(aad))?;
        target.add_term(leg.p_b.product(&leg.p_c)?.scaled(abc))?;
        s_parts.push(s);
    }
    if s_parts.len() == 2 {
        for term in commutator_i_half(&s_parts[0], &s_parts[1]) {
            h1.add_term(term)?;
        }
    }

    Ok(GadgetApplication {
        kind: GadgetKind::Crossing,
        n_qubits: n,
        h0: mediator_penalty(n, t),
        h1,
        h2,
        h1_prime: None,
        delta: 1.0,
        ancillas: vec![t],
        blocks: vec![AncillaBlock::Zero { qubit: t }],
        target,
        constants: None,
    })
}

/// Crossing gadget: α_ad P_A⊗P_D + α_bc P_B⊗P_C simulated with only the
/// planar couplings (quadrilateral sides plus mediator spokes).
pub fn crossing(
    h_else: &Hamiltonian,
    p_a: &PauliTerm,
    p_b: &PauliTerm,
    p_c: &PauliTerm,
    p_d: &PauliTerm,
    alpha_ad: f64,
    alpha_bc: f64,
) -> Result<GadgetApplication> {
    crossing_multi(
        h_else,
        &[CrossingLeg {
            p_a: p_a.clone(),
            p_b: p_b.clone(),
            p_c: p_c.clone(),
            p_d: p_d.clone(),
            alpha_ad,
            alpha_bc,
        }],
    )
}

/// Long-range gadget: simulate H_else + P_A ⊗ P_B through a W-state chain
/// whose endpoints sit next to A and B.
///
/// `constants` must belong to `spec` (C = <W|X_i R X_j|W> + transpose,
/// A_ii/A_jj diagonals); the chain qubits are appended after the data
/// register in path order, with couplings at chain sites i and j.
pub fn long_range(
    h_else: &Hamiltonian,
    p_a: &PauliTerm,
    p_b: &PauliTerm,
    spec: &WChainSpec,
    constants: &GadgetConstants,
) -> Result<GadgetApplication> {
    check_disjoint(&[p_a, p_b])?;
    spec.validate()?;
    let n_data = h_else.n_qubits();
    let n = n_data + spec.n;
    let chain: Vec<usize> = (n_data..n).collect();
    let site_i = n_data + constants.i;
    let site_j = n_data + constants.j;

    let h0 = build_hw(spec)?.shifted(n_data, n);

    let ca2 = p_a.coefficient * p_a.coefficient;
    let cb2 = p_b.coefficient * p_b.coefficient;
    let mut h1 = h_else.widened(n);
    h1.add_term(PauliTerm::identity(
        (ca2 * constants.a_ii + cb2 * constants.a_jj) / constants.c,
    ))?;

    let inv_sqrt_c = 1.0 / constants.c.sqrt();
    let mut h2 = Hamiltonian::new(n, "H2");
    h2.add_term(p_a.scaled(inv_sqrt_c).extended(site_i, Axis::X))?;
    h2.add_term(p_b.scaled(-inv_sqrt_c).extended(site_j, Axis::X))?;

    let mut target = h_else.widened(n);
    target.add_term(p_a.product(p_b)?)?;

    Ok(GadgetApplication {
        kind: GadgetKind::LongRange,
        n_qubits: n,
        h0,
        h1,
        h2,
        h1_prime: None,
        delta: 1.0,
        ancillas: chain.clone(),
        blocks: vec![AncillaBlock::WChain { qubits: chain, spec: *spec }],
        target,
        constants: Some(*constants),
    })
}

/// Merge disjoint gadgets into one round of perturbation.
///
/// All applications must share the register, the perturbation order, and
/// pairwise-disjoint ancilla sets; H parts and targets add.
pub fn apply_parallel(apps: Vec<GadgetApplication>) -> Result<GadgetApplication> {
    assert!(!apps.is_empty());
    if apps.len() == 1 {
        return Ok(apps.into_iter().next().unwrap());
    }
    let n = apps[0].n_qubits;
    let order = apps[0].order();
    let mut seen = std::collections::BTreeSet::new();
    for app in &apps {
        if app.n_qubits != n {
            return Err(Error::PreconditionViolated(
                "parallel gadgets must share the enlarged register".into(),
            ));
        }
        if app.order() != order {
            return Err(Error::PreconditionViolated(
                "parallel gadgets must share the perturbation order".into(),
            ));
        }
        for &q in &app.ancillas {
            if !seen.insert(q) {
                return Err(Error::AncillaCollision { qubit: q });
            }
        }
    }
    let mut merged = apps[0].clone();
    for app in &apps[1..] {
        merged.h0.add_all(&app.h0)?;
        merged.h1.add_all(&app.h1)?;
        merged.h2.add_all(&app.h2)?;
        match (&mut merged.h1_prime, &app.h1_prime) {
            (Some(mp), Some(ap)) => mp.add_all(ap)?,
            (None, None) => {}
            _ => unreachable!("order already checked"),
        }
        merged.ancillas.extend(app.ancillas.iter().copied());
        merged.blocks.extend(app.blocks.iter().cloned());
        merged.target.add_all(&app.target)?;
    }
    merged.ancillas.sort_unstable();
    Ok(merged)
}

/// Operator norm of the effective-Hamiltonian defect
/// T H_t T† - (H1)__ + (H2)_+ (H0++)^{-1} (H2)+_ (third-order analogue for
/// third-order applications). The data-register target is `g.target` minus
/// its ancilla extension, so the check is self-contained.
pub fn residual_check(g: &GadgetApplication, caps: &crate::config::BackendCaps) -> Result<f64> {
    let n = g.n_qubits;
    if n > caps.dense {
        return Err(Error::CapExceeded { qubits: n, cap: caps.dense, backend: "dense" });
    }
    let n_data = g.n_data();
    let dim = 1usize << n;
    let dim_d = 1usize << n_data;
    let anc = g.ancilla_state();

    // embed M_data与 the ancilla state: M ⊗ |anc><anc|
    let embed = |data: &faer::Mat<c64>| -> faer::Mat<c64> {
        faer::Mat::from_fn(dim, dim, |x, y| {
            let (xd, xa) = (x & (dim_d - 1), x >> n_data);
            let (yd, ya) = (y & (dim_d - 1), y >> n_data);
            data[(xd, yd)] * anc[xa] * anc[ya]
        })
    };

    // target lives on the enlarged register but touches only data qubits;
    // restrict it back down for the encoding
    let target_data = restrict_to_data(&g.target, n_data)?;
    let t_mat = linalg::realize(&target_data, caps)?.to_complex();
    let tht = embed(&t_mat);

    let pi_minus = embed(&linalg::identity_c(dim_d));
    let pi_plus = linalg::identity_c(dim) - &pi_minus;

    let h1m = linalg::realize(&g.h1, caps)?.to_complex();
    let h2m = linalg::realize(&g.h2, caps)?.to_complex();
    let h0m = linalg::realize(&g.h0, caps)?.to_complex();

    let h0pp = &pi_plus * &h0m * &pi_plus;
    let inv = pinv_complex(&h0pp, PINV_CUTOFF);

    let h2_mp = &pi_minus * &h2m * &pi_plus;
    let h2_pm = &pi_plus * &h2m * &pi_minus;
    let correction = match g.order() {
        PerturbationOrder::Second => &h2_mp * &inv * &h2_pm,
        PerturbationOrder::Third => {
            let h2_pp = &pi_plus * &h2m * &pi_plus;
            &h2_mp * &inv * &h2_pp * &inv * &h2_pm
        }
    };
    let r = &tht - &pi_minus * &h1m * &pi_minus + correction;
    Ok(linalg::operator_norm(&r))
}

/// ||(H1')__ - (H2)_+ H0^{-1} (H2)+_|| — must vanish for third-order
/// applications.
pub fn third_order_consistency(
    g: &GadgetApplication,
    caps: &crate::config::BackendCaps,
) -> Result<f64> {
    let h1p = g
        .h1_prime
        .as_ref()
        .ok_or_else(|| Error::PreconditionViolated("not a third-order application".into()))?;
    let n = g.n_qubits;
    if n > caps.dense {
        return Err(Error::CapExceeded { qubits: n, cap: caps.dense, backend: "dense" });
    }
    let n_data = g.n_data();
    let dim = 1usize << n;
    let dim_d = 1usize << n_data;
    let anc = g.ancilla_state();
    let pi_minus = faer::Mat::from_fn(dim, dim, |x, y| {
        let (xd, xa) = (x & (dim_d - 1), x >> n_data);
        let (yd, ya) = (y & (dim_d - 1), y >> n_data);
        if xd == yd {
            c64::new(anc[xa] * anc[ya], 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let pi_plus = linalg::identity_c(dim) - &pi_minus;
    let h0m = linalg::realize(&g.h0, caps)?.to_complex();
    let h2m = linalg::realize(&g.h2, caps)?.to_complex();
    let h1pm = linalg::realize(h1p, caps)?.to_complex();
    let inv = pinv_complex(&(&pi_plus * &h0m * &pi_plus), PINV_CUTOFF);
    let lhs = &pi_minus * &h1pm * &pi_minus;
    let rhs = &pi_minus * &h2m * &pi_plus * &inv * &pi_plus * &h2m * &pi_minus;
    Ok(linalg::operator_norm(&(&lhs - &rhs)))
}

fn restrict_to_data(h: &Hamiltonian, n_data: usize) -> Result<Hamiltonian> {
    let mut out = Hamiltonian::new(n_data, h.label.clone());
    for t in h.terms() {
        if let Some(q) = t.max_qubit() {
            if q >= n_data {
                return Err(Error::PreconditionViolated(format!(
                    "target term touches ancilla qubit {q}"
                )));
            }
        }
        out.add_term(t.clone())?;
    }
    Ok(out)
}

fn pinv_complex(m: &faer::Mat<c64>, cutoff: f64) -> faer::Mat<c64> {
    let spec = OperatorMatrix::Complex(m.clone()).eigh();
    let n = m.nrows();
    let u = spec.basis(n);
    let mut scaled = u.clone();
    for j in 0..n {
        let s = if spec.evals[j].abs() < cutoff { 0.0 } else { 1.0 / spec.evals[j] };
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * linalg::adjoint(&u)
}

/// A composable (Δ, η, ε) guarantee.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationCertificate {
    pub delta: f64,
    pub eta: f64,
    pub epsilon: f64,
    /// max(||H1||, ||H1'||, ||H2||) bound entering the policy.
    pub lambda: f64,
    /// Encoding projector ranks; all gadgets here attach a pure state.
    pub p: u32,
    pub q: u32,
    pub provenance: Vec<String>,
    /// Set when composition used the transitivity overhead terms with their
    /// unstated constant taken as 1.
    pub heuristic_constant: bool,
}

impl SimulationCertificate {
    pub fn new(delta: f64, eta: f64, epsilon: f64, lambda: f64, pass: &str) -> Self {
        SimulationCertificate {
            delta,
            eta,
            epsilon,
            lambda,
            p: 1,
            q: 0,
            provenance: vec![pass.to_string()],
            heuristic_constant: false,
        }
    }
}

/// Transitivity: `outer` simulates the output of `inner`, `inner` simulates
/// the original target with norm bound `norm_c`. Preconditions
/// ε_A, ε_B ≤ ||C|| and Δ_B ≥ ||C|| + 2ε_A + ε_B; the composed guarantee is
///
///   Δ = Δ_B - ε_A,
///   η = η_A + η_B + ε_A / (Δ_B - ||C|| + ε_B),
///   ε = ε_A + ε_B + ε_A ||C|| / (Δ_B - ||C|| + ε_B),
///
/// with the unstated O(1) factors set to 1 and flagged.
pub fn compose_certificates(
    outer: &SimulationCertificate,
    inner: &SimulationCertificate,
    norm_c: f64,
) -> Result<SimulationCertificate> {
    let (eps_a, eta_a, delta_b, eps_b, eta_b) =
        (outer.epsilon, outer.eta, inner.delta, inner.epsilon, inner.eta);
    if eps_a > norm_c {
        return Err(Error::PreconditionViolated(format!(
            "epsilon_A = {eps_a} > ||C|| = {norm_c}"
        )));
    }
    if eps_b > norm_c {
        return Err(Error::PreconditionViolated(format!(
            "epsilon_B = {eps_b} > ||C|| = {norm_c}"
        )));
    }
    let needed = norm_c + 2.0 * eps_a + eps_b;
    if delta_b < needed {
        return Err(Error::PreconditionViolated(format!(
            "Delta_B = {delta_b} < ||C|| + 2 eps_A + eps_B = {needed}"
        )));
    }
    let denom = delta_b - norm_c + eps_b;
    let overhead_eta = if eps_a > 0.0 { eps_a / denom } else { 0.0 };
    let overhead_eps = if eps_a > 0.0 { eps_a * norm_c / denom } else { 0.0 };
    let mut provenance = inner.provenance.clone();
    provenance.extend(outer.provenance.iter().cloned());
    Ok(SimulationCertificate {
        delta: delta_b - eps_a,
        eta: eta_a + eta_b + overhead_eta,
        epsilon: eps_a + eps_b + overhead_eps,
        lambda: outer.lambda.max(inner.lambda),
        p: 1,
        q: 0,
        provenance,
        heuristic_constant: outer.heuristic_constant
            || inner.heuristic_constant
            || eps_a > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BackendCaps, ChainPolicy};
    use crate::wstate::compute_constants;

    fn caps() -> BackendCaps {
        BackendCaps::default()
    }

    fn unit(q: usize, a: Axis) -> PauliTerm {
        PauliTerm::single(1.0, q, a)
    }

    #[test]
    fn delta_policy_examples() {
        assert_eq!(choose_delta_2(1.0, 1.0, 1.0, 16.0), 32.0);
        assert_eq!(choose_delta_2(2.0, 0.1, 0.1, 16.0), 108800.0);
        // doubling lambda inflates by at most 64
        let d1 = choose_delta_2(1.5, 0.2, 0.3, 16.0);
        let d2 = choose_delta_2(3.0, 0.2, 0.3, 16.0);
        assert!(d2 <= 64.0 * d1 + 1e-9);
        assert_eq!(choose_delta_3(1.0, 1.0, 1.0, 16.0), 32.0);
        assert_eq!(choose_delta_3(3.0, 1.0, 1.0, 16.0), 16.0 * (3f64.powi(12) + 27.0));
        assert_eq!(choose_delta_3(1.0, 0.5, 1.0, 16.0), 16.0 * (8.0 + 1.0));
    }

    #[test]
    fn subdivision_residual_zero() {
        // X0 X1 X2 X3 split as (X0X1)(X2X3): kappa 4 -> 3
        let h_else = Hamiltonian::new(4, "else");
        let pa = PauliTerm::new(1.0, [(0, Axis::X), (1, Axis::X)]);
        let pb = PauliTerm::new(1.0, [(2, Axis::X), (3, Axis::X)]);
        let g = subdivide(&h_else, &pa, &pb).unwrap();
        assert_eq!(g.h1.graph_stats().kappa, 0); // identity shift only
        assert!(g.h2.graph_stats().kappa <= 3);
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
    }

    #[test]
    fn subdivision_scaled_coefficient() {
        let h_else =
            Hamiltonian::from_terms(2, [PauliTerm::single(0.3, 0, Axis::Z)], "else").unwrap();
        let c: f64 = -0.7;
        let pa = PauliTerm::single(c.signum() * c.abs().sqrt(), 0, Axis::X);
        let pb = PauliTerm::single(c.abs().sqrt(), 1, Axis::X);
        let g = subdivide(&h_else, &pa, &pb).unwrap();
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
        // assembled weights: Z_t carries -Delta/2, couplings sqrt(Delta/2)*c_side
        let mut g = g;
        g.delta = 64.0;
        let assembled = assemble(&g);
        let zt = assembled
            .terms()
            .iter()
            .find(|t| t.weight() == 1 && t.acts_on(2) && t.axes()[&2] == Axis::Z)
            .unwrap();
        assert!((zt.coefficient + 32.0).abs() < 1e-12);
        let coupling = assembled
            .terms()
            .iter()
            .find(|t| t.weight() == 2 && t.acts_on(0) && t.acts_on(2))
            .unwrap();
        assert!((coupling.coefficient.abs() - (32.0f64).sqrt() * c.abs().sqrt()).abs() < 1e-9);
    }

    #[test]
    fn subdivision_overlap_rejected() {
        let h_else = Hamiltonian::new(2, "else");
        let pa = PauliTerm::single(1.0, 0, Axis::X);
        let pb = PauliTerm::single(1.0, 0, Axis::Z);
        assert!(matches!(
            subdivide(&h_else, &pa, &pb).unwrap_err(),
            Error::OverlappingSupports { qubit: 0 }
        ));
    }

    #[test]
    fn subdivide_pair_two_axes_residual_zero() {
        let h_else = Hamiltonian::new(2, "else");
        let legs = [
            PairLeg {
                p_a: PauliTerm::single(-1.3, 0, Axis::X),
                p_b: PauliTerm::single(1.3f64.sqrt() / 1.3, 1, Axis::X),
            },
            PairLeg {
                p_a: PauliTerm::single(0.6, 0, Axis::Y),
                p_b: PauliTerm::single(0.9, 1, Axis::Y),
            },
        ];
        let g = subdivide_pair(&h_else, &legs).unwrap();
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
    }

    #[test]
    fn three_to_two_residuals() {
        let h_else = Hamiltonian::new(3, "else");
        let c: f64 = -0.7;
        let pa = PauliTerm::single(c.signum() * c.abs().sqrt(), 0, Axis::Z);
        let pb = PauliTerm::single(c.abs().sqrt(), 1, Axis::Z);
        let pc = PauliTerm::single(1.0, 2, Axis::Z);
        let g = three_to_two(&h_else, &pa, &pb, &pc).unwrap();
        assert!(g.assembled_is_two_local());
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
        assert!(third_order_consistency(&g, &caps()).unwrap() < 1e-10);
    }

    #[test]
    fn triangle_residual_zero() {
        let h_else = Hamiltonian::new(3, "else");
        let g = triangle(
            &h_else,
            &unit(0, Axis::Z),
            &unit(1, Axis::X),
            &unit(2, Axis::X),
            1.0,
            1.0,
        )
        .unwrap();
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
        let g = triangle(
            &h_else,
            &unit(0, Axis::Z),
            &unit(1, Axis::X),
            &unit(2, Axis::X),
            0.5,
            -2.0,
        )
        .unwrap();
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
    }

    #[test]
    fn triangle_degenerate_coefficient() {
        // alpha_ab = 0 leaves just the single A-C interaction
        let h_else = Hamiltonian::new(3, "else");
        let g = triangle(
            &h_else,
            &unit(0, Axis::Z),
            &unit(1, Axis::X),
            &unit(2, Axis::X),
            0.0,
            -1.5,
        )
        .unwrap();
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
        assert_eq!(g.target.terms().len(), 1);
    }

    #[test]
    fn crossing_residual_zero() {
        let h_else = Hamiltonian::new(4, "else");
        for (aad, abc) in [(1.0, 1.0), (0.7, -1.3), (0.0, 0.0)] {
            let g = crossing(
                &h_else,
                &unit(0, Axis::X),
                &unit(1, Axis::X),
                &unit(2, Axis::X),
                &unit(3, Axis::X),
                aad,
                abc,
            )
            .unwrap();
            assert!(
                residual_check(&g, &caps()).unwrap() < 1e-10,
                "alpha = ({aad},{abc})"
            );
        }
    }

    #[test]
    fn crossing_two_axis_residual_zero() {
        let h_else = Hamiltonian::new(4, "else");
        let legs = [
            CrossingLeg {
                p_a: unit(0, Axis::X),
                p_b: unit(1, Axis::X),
                p_c: unit(2, Axis::X),
                p_d: unit(3, Axis::X),
                alpha_ad: -0.25,
                alpha_bc: -0.25,
            },
            CrossingLeg {
                p_a: unit(0, Axis::Y),
                p_b: unit(1, Axis::Y),
                p_c: unit(2, Axis::Y),
                p_d: unit(3, Axis::Y),
                alpha_ad: -0.25,
                alpha_bc: -0.4,
            },
        ];
        let g = crossing_multi(&h_else, &legs).unwrap();
        assert!(residual_check(&g, &caps()).unwrap() < 1e-10);
    }

    #[test]
    fn long_range_residual_and_norm() {
        let policy = ChainPolicy::default();
        for n_chain in [2usize, 3, 4] {
            let spec = WChainSpec::with_policy(n_chain, &caps(), &policy).unwrap();
            let constants = compute_constants(&spec, 0, n_chain - 1, &caps()).unwrap();
            let h_else = Hamiltonian::new(2, "else");
            let pa = PauliTerm::single(1.0, 0, Axis::X);
            let pb = PauliTerm::single(1.0, 1, Axis::Z);
            let g = long_range(&h_else, &pa, &pb, &spec, &constants).unwrap();
            let r = residual_check(&g, &caps()).unwrap();
            assert!(r < 1e-8, "n={n_chain}: residual {r}");
            // ||H2|| <= 2 sqrt(n)
            assert!(g.h2.triangle_norm_bound() <= 2.0 * (n_chain as f64).sqrt() + 1e-9);
        }
    }

    #[test]
    fn residual_detects_fault_injection() {
        let h_else = Hamiltonian::new(2, "else");
        let pa = PauliTerm::single(1.0, 0, Axis::X);
        let pb = PauliTerm::single(1.0, 1, Axis::X);
        let mut g = subdivide(&h_else, &pa, &pb).unwrap();
        g.h1.add_term(PauliTerm::single(0.1, 0, Axis::Z)).unwrap();
        assert!(residual_check(&g, &caps()).unwrap() >= 0.05);
    }

    #[test]
    fn empty_gadget_zero_residual() {
        let h_else = Hamiltonian::new(1, "else");
        let g = subdivide(
            &h_else,
            &PauliTerm::single(0.0, 0, Axis::X),
            &PauliTerm::identity(0.0),
        );
        // zero-coefficient factors degenerate; simplest honest check is the
        // empty parallel merge below, so just assert construction succeeds
        assert!(g.is_ok());
        let g = g.unwrap();
        assert!(residual_check(&g, &caps()).unwrap() < 1e-12);
    }

    #[test]
    fn parallel_merge_residual_and_rank() {
        // two subdivisions of disjoint terms on a shared 4-qubit register
        let h_else = Hamiltonian::new(4, "else");
        let widened = h_else.widened(6);
        let g1 = {
            let mut g = subdivide(
                &h_else,
                &PauliTerm::single(1.0, 0, Axis::X),
                &PauliTerm::single(1.0, 1, Axis::X),
            )
            .unwrap();
            // re-target mediator to qubit 4 on the shared 6-qubit register
            g = subdivide_on(
                &widened,
                &PauliTerm::single(1.0, 0, Axis::X),
                &PauliTerm::single(1.0, 1, Axis::X),
                4,
            )
            .unwrap();
            g
        };
        let g2 = subdivide_on(
            &widened,
            &PauliTerm::single(1.0, 2, Axis::Z),
            &PauliTerm::single(1.0, 3, Axis::Z),
            5,
        )
        .unwrap();
        let merged = apply_parallel(vec![g1, g2]).unwrap();
        assert_eq!(merged.ancillas, vec![4, 5]);
        assert!(residual_check(&merged, &caps()).unwrap() < 1e-8);
        // the merged ancilla factor is one product state
        let anc = merged.ancilla_state();
        let norm: f64 = anc.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_collision_rejected() {
        let h_else = Hamiltonian::new(2, "else");
        let widened = h_else.widened(3);
        let g1 = subdivide_on(
            &widened,
            &PauliTerm::single(1.0, 0, Axis::X),
            &PauliTerm::single(1.0, 1, Axis::X),
            2,
        )
        .unwrap();
        let g2 = g1.clone();
        assert!(matches!(
            apply_parallel(vec![g1, g2]).unwrap_err(),
            Error::AncillaCollision { qubit: 2 }
        ));
    }

    #[test]
    fn certificate_composition() {
        // ideal inner certificate passes the outer one through unchanged
        let inner = SimulationCertificate::new(100.0, 0.0, 0.0, 1.0, "inner");
        let outer = SimulationCertificate::new(1000.0, 0.0, 0.0, 2.0, "outer");
        let c = compose_certificates(&outer, &inner, 5.0).unwrap();
        assert_eq!(c.epsilon, 0.0);
        assert_eq!(c.eta, 0.0);
        assert_eq!(c.delta, 100.0);
        assert!(!c.heuristic_constant);
        assert_eq!((c.p, c.q), (1, 0));

        // monotone epsilon along a 3-pass chain
        let c1 = SimulationCertificate::new(1e6, 0.01, 0.01, 1.0, "p1");
        let c2 = SimulationCertificate::new(1e8, 0.01, 0.01, 1.0, "p2");
        let c3 = SimulationCertificate::new(1e10, 0.01, 0.01, 1.0, "p3");
        let c12 = compose_certificates(&c2, &c1, 3.0).unwrap();
        assert!(c12.epsilon >= c1.epsilon && c12.epsilon >= c2.epsilon);
        let c123 = compose_certificates(&c3, &c12, 3.0).unwrap();
        assert!(c123.epsilon >= c12.epsilon);
        assert!(c123.heuristic_constant);
        assert_eq!(c123.provenance, vec!["p1", "p2", "p3"]);

        // Delta_B below threshold
        let weak = SimulationCertificate::new(3.0, 0.01, 0.01, 1.0, "weak");
        assert!(matches!(
            compose_certificates(&c2, &weak, 3.0).unwrap_err(),
            Error::PreconditionViolated(_)
        ));
    }

    /// Test helper: subdivision with an explicit mediator index on an
    /// already-enlarged register.
    fn subdivide_on(
        h_else: &Hamiltonian,
        p_a: &PauliTerm,
        p_b: &PauliTerm,
        t: usize,
    ) -> Result<GadgetApplication> {
        let n = h_else.n_qubits();
        let base = subdivide(
            &restrict_helper(h_else, t),
            p_a,
            p_b,
        )?;
        // remap mediator from its default slot to t: only valid when the
        // default slot already equals t
        assert_eq!(base.ancillas, vec![t], "helper assumes mediator lands at t");
        let mut g = base;
        g.n_qubits = n.max(t + 1);
        Ok(g)
    }

    fn restrict_helper(h: &Hamiltonian, n_data: usize) -> Hamiltonian {
        let mut out = Hamiltonian::new(n_data, h.label.clone());
        for t in h.terms() {
            out.add_term(t.clone()).unwrap();
        }
        out
    }

    impl GadgetApplication {
        fn assembled_is_two_local(&self) -> bool {
            let mut g = self.clone();
            g.delta = 10.0;
            assemble(&g).graph_stats().kappa <= 2
        }
    }
}
