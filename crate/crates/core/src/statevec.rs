//! Matrix-free unitary actions on state vectors.
//!
//! A circuit here is a tree of [`ActionNode`]s acting on named bit positions of
//! a global index. Registers are lists of bit positions (LSB of the register's
//! value first); the conventional global layout used by the rest of the crate
//! places the *system* register in the low bits and ancilla blocks above it,
//! so reading an index MSB-first gives `[ancilla | selector | design | x | y]`.
//!
//! The engine applies a node in `O(2^n)` time per leaf with no dense matrices
//! (except the caller-supplied small unitaries inside [`ActionNode::Prepare`],
//! which act on register fibers). Controls are handled by predicate context —
//! no subspace materialization — so controlled versions of every node cost the
//! same as the node itself.

use num_complex::Complex64 as C64;

use crate::error::Error;
use crate::linalg::{ComplexMatrix, StateVector};
use crate::Result;

/// A register: global bit positions, least-significant bit of the register
/// value first. Positions are bit indices into the basis-state integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reg {
    bits: Vec<usize>,
}

impl Reg {
    pub fn new(bits: Vec<usize>) -> Self {
        let mut seen = std::collections::BTreeSet::new();
        for &b in &bits {
            assert!(seen.insert(b), "duplicate bit {b} in register");
        }
        Reg { bits }
    }

    /// Contiguous register `[lo, lo+width)` with `lo` as the value's LSB.
    pub fn contiguous(lo: usize, width: usize) -> Self {
        Reg {
            bits: (lo..lo + width).collect(),
        }
    }

    pub fn empty() -> Self {
        Reg { bits: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[usize] {
        &self.bits
    }

    pub fn mask(&self) -> usize {
        self.bits.iter().fold(0usize, |m, &b| m | (1 << b))
    }

    /// Number of distinct register values.
    pub fn dim(&self) -> usize {
        1usize << self.bits.len()
    }

    /// Reads the register value out of a basis index.
    #[inline]
    pub fn extract(&self, idx: usize) -> u64 {
        let mut v = 0u64;
        for (j, &b) in self.bits.iter().enumerate() {
            v |= (((idx >> b) & 1) as u64) << j;
        }
        v
    }

    /// Writes value `v` into `base` (whose register bits must be clear).
    #[inline]
    pub fn deposit(&self, base: usize, v: u64) -> usize {
        let mut idx = base;
        for (j, &b) in self.bits.iter().enumerate() {
            idx |= (((v >> j) & 1) as usize) << b;
        }
        idx
    }

    /// Concatenation: `self` stays the low part of the combined value.
    pub fn then(&self, high: &Reg) -> Reg {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&high.bits);
        Reg::new(bits)
    }

    fn shifted(&self, threshold: usize, offset: usize) -> Reg {
        Reg {
            bits: self
                .bits
                .iter()
                .map(|&b| if b >= threshold { b + offset } else { b })
                .collect(),
        }
    }
}

/// Predicate on a register value, used by [`ActionNode::Controlled`].
#[derive(Clone, Debug, PartialEq)]
pub enum CtrlPred {
    /// Value equals the constant.
    Equals(u64),
    /// All register bits are 1.
    AllOnes,
    /// `lo <= value <= hi` (inclusive).
    InRange(u64, u64),
    /// Value is none of the listed constants.
    NotIn(Vec<u64>),
}

impl CtrlPred {
    pub fn holds(&self, v: u64, width: usize) -> bool {
        match self {
            CtrlPred::Equals(k) => v == *k,
            CtrlPred::AllOnes => v == ((1u64 << width) - 1).min(u64::MAX),
            CtrlPred::InRange(lo, hi) => *lo <= v && v <= *hi,
            CtrlPred::NotIn(ks) => !ks.contains(&v),
        }
    }
}

/// A unitary action on a state vector, built compositionally.
///
/// Every variant is unitary by construction (given a unitary `Prepare` matrix),
/// so trees compose into unitaries; block-encodings carry one of these as the
/// circuit they stand for.
#[derive(Clone, Debug)]
pub enum ActionNode {
    /// Diagonal phases: multiplies the amplitude of register value `v` by
    /// `exp(i · phases[v])`. A zero-width register with one entry is a global phase.
    PhaseDiag { reg: Reg, phases: Vec<f64> },
    /// `|v⟩ → |v + by mod 2^w⟩` on the register.
    CyclicShift { reg: Reg, by: i64 },
    /// Arbitrary small unitary applied on register fibers.
    Prepare { reg: Reg, mat: ComplexMatrix },
    /// Applies the arm whose key equals the register value; identity otherwise.
    Select { reg: Reg, arms: Vec<(u64, ActionNode)> },
    /// Applies `inner` only where the predicate holds on the register.
    Controlled {
        reg: Reg,
        pred: CtrlPred,
        inner: Box<ActionNode>,
    },
    /// `2|0⟩⟨0| − I` on the register: flips the sign of every component whose
    /// register value is nonzero.
    Reflection { reg: Reg },
    /// Steps applied first-to-last.
    Compose { steps: Vec<ActionNode> },
    /// Hermitian adjoint of the inner action.
    Adjoint { inner: Box<ActionNode> },
}

impl ActionNode {
    pub fn identity() -> Self {
        ActionNode::Compose { steps: Vec::new() }
    }

    pub fn global_phase(phi: f64) -> Self {
        ActionNode::PhaseDiag {
            reg: Reg::empty(),
            phases: vec![phi],
        }
    }

    pub fn pauli_x(bit: usize) -> Self {
        let mat = ComplexMatrix::from_rows(&[
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ]);
        ActionNode::Prepare {
            reg: Reg::new(vec![bit]),
            mat,
        }
    }

    pub fn hadamard(bit: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mat = ComplexMatrix::from_rows(&[
            vec![C64::new(s, 0.0), C64::new(s, 0.0)],
            vec![C64::new(s, 0.0), C64::new(-s, 0.0)],
        ]);
        ActionNode::Prepare {
            reg: Reg::new(vec![bit]),
            mat,
        }
    }

    /// Checked constructor for `Prepare`: the matrix must be unitary on the
    /// register dimension.
    pub fn prepare(reg: Reg, mat: ComplexMatrix) -> Result<Self> {
        let d = reg.dim();
        if mat.rows() != d || mat.cols() != d {
            return Err(Error::dim(format!(
                "prepare: matrix is {}x{}, register dimension is {d}",
                mat.rows(),
                mat.cols()
            )));
        }
        if !is_unitary(&mat, 1e-10) {
            return Err(Error::invalid("prepare: matrix is not unitary"));
        }
        Ok(ActionNode::Prepare { reg, mat })
    }

    pub fn compose(steps: Vec<ActionNode>) -> Self {
        ActionNode::Compose { steps }
    }

    pub fn adjoint(inner: ActionNode) -> Self {
        ActionNode::Adjoint {
            inner: Box::new(inner),
        }
    }

    pub fn controlled(reg: Reg, pred: CtrlPred, inner: ActionNode) -> Self {
        ActionNode::Controlled {
            reg,
            pred,
            inner: Box::new(inner),
        }
    }

    /// Remaps every referenced bit position: positions `>= threshold` move up
    /// by `offset`. Used when splicing a sub-circuit into a wider layout whose
    /// extra registers sit between the sub-circuit's blocks.
    pub fn shift_bits(&self, threshold: usize, offset: usize) -> ActionNode {
        match self {
            ActionNode::PhaseDiag { reg, phases } => ActionNode::PhaseDiag {
                reg: reg.shifted(threshold, offset),
                phases: phases.clone(),
            },
            ActionNode::CyclicShift { reg, by } => ActionNode::CyclicShift {
                reg: reg.shifted(threshold, offset),
                by: *by,
            },
            ActionNode::Prepare { reg, mat } => ActionNode::Prepare {
                reg: reg.shifted(threshold, offset),
                mat: mat.clone(),
            },
            ActionNode::Select { reg, arms } => ActionNode::Select {
                reg: reg.shifted(threshold, offset),
                arms: arms
                    .iter()
                    .map(|(k, n)| (*k, n.shift_bits(threshold, offset)))
                    .collect(),
            },
            ActionNode::Controlled { reg, pred, inner } => ActionNode::Controlled {
                reg: reg.shifted(threshold, offset),
                pred: pred.clone(),
                inner: Box::new(inner.shift_bits(threshold, offset)),
            },
            ActionNode::Reflection { reg } => ActionNode::Reflection {
                reg: reg.shifted(threshold, offset),
            },
            ActionNode::Compose { steps } => ActionNode::Compose {
                steps: steps.iter().map(|s| s.shift_bits(threshold, offset)).collect(),
            },
            ActionNode::Adjoint { inner } => ActionNode::Adjoint {
                inner: Box::new(inner.shift_bits(threshold, offset)),
            },
        }
    }

    /// Largest referenced bit position plus one (0 for pure global phases).
    pub fn min_qubits(&self) -> usize {
        match self {
            ActionNode::PhaseDiag { reg, .. }
            | ActionNode::CyclicShift { reg, .. }
            | ActionNode::Prepare { reg, .. }
            | ActionNode::Reflection { reg } => reg.bits().iter().map(|b| b + 1).max().unwrap_or(0),
            ActionNode::Select { reg, arms } => arms
                .iter()
                .map(|(_, n)| n.min_qubits())
                .chain(reg.bits().iter().map(|b| b + 1))
                .max()
                .unwrap_or(0),
            ActionNode::Controlled { reg, inner, .. } => inner
                .min_qubits()
                .max(reg.bits().iter().map(|b| b + 1).max().unwrap_or(0)),
            ActionNode::Compose { steps } => steps.iter().map(|s| s.min_qubits()).max().unwrap_or(0),
            ActionNode::Adjoint { inner } => inner.min_qubits(),
        }
    }

    /// Structural validation against a state of `nq` qubits: bit positions in
    /// range, table sizes consistent, and control registers disjoint from
    /// everything they gate.
    pub fn validate(&self, nq: usize) -> Result<()> {
        self.validate_rec(nq, 0)
    }

    fn validate_rec(&self, nq: usize, forbidden: usize) -> Result<()> {
        let check_reg = |reg: &Reg| -> Result<()> {
            for &b in reg.bits() {
                if b >= nq {
                    return Err(Error::dim(format!("bit {b} out of range for {nq} qubits")));
                }
            }
            if reg.mask() & forbidden != 0 {
                return Err(Error::invalid(
                    "register overlaps an enclosing control/select register",
                ));
            }
            Ok(())
        };
        match self {
            ActionNode::PhaseDiag { reg, phases } => {
                check_reg(reg)?;
                if phases.len() != reg.dim() {
                    return Err(Error::dim(format!(
                        "phase table has {} entries for a {}-value register",
                        phases.len(),
                        reg.dim()
                    )));
                }
                if !phases.iter().all(|p| p.is_finite()) {
                    return Err(Error::NonFinite("phase table"));
                }
                Ok(())
            }
            ActionNode::CyclicShift { reg, .. } => check_reg(reg),
            ActionNode::Prepare { reg, mat } => {
                check_reg(reg)?;
                if mat.rows() != reg.dim() || mat.cols() != reg.dim() {
                    return Err(Error::dim("prepare matrix does not match register"));
                }
                if !mat.all_finite() {
                    return Err(Error::NonFinite("prepare matrix"));
                }
                Ok(())
            }
            ActionNode::Select { reg, arms } => {
                check_reg(reg)?;
                let mut seen = std::collections::BTreeSet::new();
                for (k, node) in arms {
                    if *k >= reg.dim() as u64 {
                        return Err(Error::invalid(format!("select key {k} out of range")));
                    }
                    if !seen.insert(*k) {
                        return Err(Error::invalid(format!("duplicate select key {k}")));
                    }
                    node.validate_rec(nq, forbidden | reg.mask())?;
                }
                Ok(())
            }
            ActionNode::Controlled { reg, inner, .. } => {
                check_reg(reg)?;
                inner.validate_rec(nq, forbidden | reg.mask())
            }
            ActionNode::Reflection { reg } => check_reg(reg),
            ActionNode::Compose { steps } => {
                for s in steps {
                    s.validate_rec(nq, forbidden)?;
                }
                Ok(())
            }
            ActionNode::Adjoint { inner } => inner.validate_rec(nq, forbidden),
        }
    }
}

/// `‖M†M − I‖_max ≤ tol`.
pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let gram = m.adjoint().matmul(m).expect("square");
    gram.sub(&ComplexMatrix::identity(m.rows()))
        .expect("square")
        .max_norm()
        <= tol
}

/// Dense unitary whose first column is the given unit vector (remaining
/// columns complete an orthonormal basis). Input must have norm 1 to `1e-10`.
pub fn unitary_with_first_column(v: &[C64]) -> Result<ComplexMatrix> {
    let n = v.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid("column length must be a power of two"));
    }
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Numeric(format!(
            "first column has norm {norm}, expected 1"
        )));
    }
    // Factor out the phase of v[0] so the Householder target has a real
    // nonnegative first entry, reflect e0 onto it, then restore the phase on
    // the first basis direction: U = H · diag(w, 1, …, 1) with w = phase(v[0]).
    let w = if v[0].norm() > 1e-14 {
        v[0] / v[0].norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let vt: Vec<C64> = v.iter().map(|&z| w.conj() * z).collect(); // vt[0] = |v[0]| ≥ 0
    let mut m = ComplexMatrix::identity(n);
    let gap = 1.0 - vt[0].re;
    if gap > 1e-14 {
        // H = I − 2uu†/⟨u,u⟩ with u = e0 − vt reflects e0 to vt.
        let mut u = vec![C64::new(0.0, 0.0); n];
        for (i, &z) in vt.iter().enumerate() {
            u[i] = -z;
        }
        u[0] += C64::new(1.0, 0.0);
        let uu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        for r in 0..n {
            for c in 0..n {
                let delta = u[r] * u[c].conj() * (2.0 / uu);
                m[(r, c)] -= delta;
            }
        }
    }
    // Apply diag(w, 1, …, 1) on the right: scales the first column by w.
    for r in 0..n {
        let z = m[(r, 0)] * w;
        m[(r, 0)] = z;
    }
    if !is_unitary(&m, 1e-9) {
        return Err(Error::Numeric("completed basis is not unitary".to_string()));
    }
    Ok(m)
}

/// Applies a node tree to the state in place.
pub fn apply(node: &ActionNode, state: &mut StateVector) -> Result<()> {
    node.validate(state.num_qubits())?;
    let mut ctx: Vec<(&Reg, CtrlPred)> = Vec::new();
    apply_rec(node, state, false, &mut ctx)
}

fn ctx_holds(ctx: &[(&Reg, CtrlPred)], idx: usize) -> bool {
    ctx.iter()
        .all(|(reg, pred)| pred.holds(reg.extract(idx), reg.width()))
}

fn apply_rec<'a>(
    node: &'a ActionNode,
    state: &mut StateVector,
    adj: bool,
    ctx: &mut Vec<(&'a Reg, CtrlPred)>,
) -> Result<()> {
    match node {
        ActionNode::PhaseDiag { reg, phases } => {
            let sign = if adj { -1.0 } else { 1.0 };
            let table: Vec<C64> = phases
                .iter()
                .map(|&p| C64::from_polar(1.0, sign * p))
                .collect();
            let amps = state.amps_mut();
            if ctx.is_empty() {
                for (idx, a) in amps.iter_mut().enumerate() {
                    *a *= table[reg.extract(idx) as usize];
                }
            } else {
                for (idx, a) in amps.iter_mut().enumerate() {
                    if ctx_holds(ctx, idx) {
                        *a *= table[reg.extract(idx) as usize];
                    }
                }
            }
            Ok(())
        }
        ActionNode::CyclicShift { reg, by } => {
            if reg.width() == 0 {
                return Ok(());
            }
            let w = reg.width();
            let dim = 1u64 << w;
            let step = if adj { -by } else { *by };
            let shift = ((step % dim as i64) + dim as i64) as u64 % dim;
            if shift == 0 {
                return Ok(());
            }
            let mask = reg.mask();
            let mut scratch = state.amps().to_vec();
            let amps = state.amps();
            for (idx, &a) in amps.iter().enumerate() {
                if !ctx_holds(ctx, idx) {
                    continue;
                }
                let v = reg.extract(idx);
                let v2 = (v + shift) % dim;
                let idx2 = reg.deposit(idx & !mask, v2);
                scratch[idx2] = a;
            }
            state.amps_mut().copy_from_slice(&scratch);
            Ok(())
        }
        ActionNode::Prepare { reg, mat } => {
            let w = reg.width();
            let d = 1usize << w;
            let mat_eff;
            let m: &ComplexMatrix = if adj {
                mat_eff = mat.adjoint();
                &mat_eff
            } else {
                mat
            };
            let mask = reg.mask();
            let n = state.dim();
            let mut fiber = vec![C64::new(0.0, 0.0); d];
            let mut out = vec![C64::new(0.0, 0.0); d];
            let mut idxs = vec![0usize; d];
            let amps = state.amps_mut();
            for base in 0..n {
                if base & mask != 0 {
                    continue; // not a fiber base point
                }
                if !ctx_holds(ctx, base) {
                    continue; // ctx regs are disjoint from `reg`, so base decides
                }
                for v in 0..d {
                    let idx = reg.deposit(base, v as u64);
                    idxs[v] = idx;
                    fiber[v] = amps[idx];
                }
                for r in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for c in 0..d {
                        acc += m[(r, c)] * fiber[c];
                    }
                    out[r] = acc;
                }
                for v in 0..d {
                    amps[idxs[v]] = out[v];
                }
            }
            Ok(())
        }
        ActionNode::Select { reg, arms } => {
            for (key, arm) in arms {
                ctx.push((reg, CtrlPred::Equals(*key)));
                let res = apply_rec(arm, state, adj, ctx);
                ctx.pop();
                res?;
            }
            Ok(())
        }
        ActionNode::Controlled { reg, pred, inner } => {
            ctx.push((reg, pred.clone()));
            let res = apply_rec(inner, state, adj, ctx);
            ctx.pop();
            res
        }
        ActionNode::Reflection { reg } => {
            let amps = state.amps_mut();
            for (idx, a) in amps.iter_mut().enumerate() {
                if reg.extract(idx) != 0 && ctx_holds(ctx, idx) {
                    *a = -*a;
                }
            }
            Ok(())
        }
        ActionNode::Compose { steps } => {
            if adj {
                for s in steps.iter().rev() {
                    apply_rec(s, state, true, ctx)?;
                }
            } else {
                for s in steps {
                    apply_rec(s, state, false, ctx)?;
                }
            }
            Ok(())
        }
        ActionNode::Adjoint { inner } => apply_rec(inner, state, !adj, ctx),
    }
}

/// Zeroes every amplitude whose register value differs from `value`;
/// returns the probability mass kept.
pub fn project_onto_value(state: &mut StateVector, reg: &Reg, value: u64) -> f64 {
    let mut kept = 0.0;
    for (idx, a) in state.amps_mut().iter_mut().enumerate() {
        if reg.extract(idx) == value {
            kept += a.norm_sqr();
        } else {
            *a = C64::new(0.0, 0.0);
        }
    }
    kept
}

/// Extracts the sub-state over `keep` from the slice where each `(reg, value)`
/// in `fixed` is pinned. `keep` and the fixed registers must tile all qubits.
pub fn extract_subspace(
    state: &StateVector,
    keep: &Reg,
    fixed: &[(Reg, u64)],
) -> Result<StateVector> {
    let mut mask = keep.mask();
    let mut covered = keep.width();
    for (reg, value) in fixed {
        if reg.mask() & mask != 0 {
            return Err(Error::invalid("extract_subspace: overlapping registers"));
        }
        if *value >= reg.dim() as u64 {
            return Err(Error::invalid("extract_subspace: fixed value out of range"));
        }
        mask |= reg.mask();
        covered += reg.width();
    }
    if covered != state.num_qubits() || mask != (1usize << state.num_qubits()) - 1 {
        return Err(Error::invalid(
            "extract_subspace: registers must tile the full state",
        ));
    }
    let base0 = fixed
        .iter()
        .fold(0usize, |b, (reg, value)| reg.deposit(b, *value));
    let dim = keep.dim();
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for (v, a) in amps.iter_mut().enumerate() {
        *a = state.amps()[keep.deposit(base0, v as u64)];
    }
    StateVector::from_amps(amps)
}

/// Embeds `psi` into a `total`-qubit state at the bits of `place`; all other
/// bits are zero.
pub fn embed_state(psi: &StateVector, total: usize, place: &Reg) -> Result<StateVector> {
    if place.width() != psi.num_qubits() {
        return Err(Error::dim("embed_state: register width mismatch"));
    }
    if place.bits().iter().any(|&b| b >= total) {
        return Err(Error::dim("embed_state: register exceeds total"));
    }
    let mut amps = vec![C64::new(0.0, 0.0); 1usize << total];
    for (v, &a) in psi.amps().iter().enumerate() {
        amps[place.deposit(0, v as u64)] = a;
    }
    StateVector::from_amps(amps)
}

/// Dense matrix of a node on `nq` qubits, by applying it to each basis column.
/// Test/verification helper; exponential in `nq`.
pub fn materialize(node: &ActionNode, nq: usize) -> Result<ComplexMatrix> {
    let dim = 1usize << nq;
    if dim > crate::DENSE_CAP {
        return Err(Error::TooLarge {
            dim,
            cap: crate::DENSE_CAP,
        });
    }
    let mut out = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut s = StateVector::basis(nq, col);
        apply(node, &mut s)?;
        for row in 0..dim {
            out[(row, col)] = s.amps()[row];
        }
    }
    Ok(out)
}
