//! Block-encoding calculus.
//!
//! A [`BlockEncoding`] packages a unitary circuit (an [`ActionNode`] on the
//! layout `[ancilla | system]`, system in the low bits) together with the
//! metadata triple `(alpha, ancillas, eps)`: the top-left block of the unitary,
//! read on the all-zeros ancilla sector and multiplied by `alpha`, approximates
//! a target operator to spectral-norm error `eps`.
//!
//! Composition rules implemented here, each propagating metadata exactly:
//!
//! * [`product`] — encodes `A·B` with `(α_A α_B, a_A + a_B, α_A ε_B + α_B ε_A)`.
//! * [`lcu`] — encodes `Σ_j y_j A_j` with `(Σ_j |y_j| α_j, a_max + ⌈log₂ m⌉, Σ_j |y_j| ε_j)`;
//!   for arms sharing a common `α` and `ε` this is `(α‖y‖₁, a + ⌈log₂ m⌉, ε‖y‖₁)`
//!   computed in exactly that form.
//! * [`selector_offdiag`] — encodes `|0⟩⟨j| ⊗ A₁ + |j⟩⟨0| ⊗ A₂` on a widened
//!   system with a `k`-bit selector, at the cost of `4·(4k−2)` Toffoli gates.
//! * [`chebyshev`] — encodes the Chebyshev polynomial `T_k(H/α)` of an encoded
//!   Hermitian `H` via the alternating walk `U·R, U†·R, …` with reflections
//!   about the ancilla zero state, giving `(1, a+1, k·ε/α)`.
//!
//! Alongside the metadata every encoding carries an oracle-invocation counter
//! map and a two-qubit gate tally so assembled operators can be audited against
//! closed-form cost predictions.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::Error;
use crate::linalg::{spectral_norm, ComplexMatrix};
use crate::statevec::{
    self, unitary_with_first_column, ActionNode, CtrlPred, Reg,
};
use crate::Result;

/// Counter key under which Toffoli gates are tallied.
pub const TOFFOLI_KEY: &str = "toffoli";

/// References are tracked densely only up to this dimension.
pub const REF_CAP: usize = 1 << 9;

/// Two-qubit gate-count conventions used consistently by constructions and by
/// the closed-form cost predictions.
pub mod gates {
    /// A Toffoli decomposes into this many two-qubit gates.
    pub const TWO_QUBIT_PER_TOFFOLI: u64 = 6;

    /// Computing and uncomputing the AND of `k` control bits.
    pub fn and_ladder_toffolis(k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            4 * k as u64 - 2
        }
    }

    /// State preparation pair (prepare + unprepare) loading `m` amplitudes.
    pub fn prep_pair_gates(m: usize) -> u64 {
        4 * m as u64
    }

    /// Transposition of two `k`-bit basis states (`|0⟩ ↔ |j⟩`).
    pub fn swap_pair_gates(k: usize) -> u64 {
        3 * k as u64
    }

    /// Control overhead of the two-armed selector on a `k`-bit register.
    pub fn selector_toffolis(k: usize) -> u64 {
        4 * and_ladder_toffolis(k)
    }

    /// Control overhead of the single-sector diagonal selector (`|j⟩⟨j| ⊗ B`):
    /// one AND ladder computed and uncomputed.
    pub fn selector_diag_toffolis(k: usize) -> u64 {
        2 * and_ladder_toffolis(k)
    }

    /// Control overhead of the antisymmetric selector pair
    /// (`|0⟩⟨j| ⊗ B − |j⟩⟨0| ⊗ B` from one arm query): the paired-flag ladders
    /// plus the sector-0 phase ladder.
    pub fn selector_antisym_toffolis(k: usize) -> u64 {
        selector_toffolis(k) + and_ladder_toffolis(k)
    }

    /// Multiplexed select over `m` arms by unary iteration: one AND per
    /// step of the walk down the index register, computed and uncomputed.
    pub fn select_toffolis(m: usize) -> u64 {
        if m <= 1 {
            0
        } else {
            2 * (m as u64 - 1)
        }
    }

    /// Modular increment on an `n`-bit register.
    pub fn increment_toffolis(n: usize) -> u64 {
        if n <= 1 {
            0
        } else {
            2 * ((n - 1) as u64).pow(2)
        }
    }

    /// Phase ladder: per prepared control bit, a controlled diagonal-phase
    /// power on every target qubit at two gates each.
    pub fn phase_ladder_gates(ctrl_bits: usize, target_qubits: usize) -> u64 {
        2 * ctrl_bits as u64 * target_qubits as u64
    }
}

/// A unitary circuit encoding an operator in its top-left block.
///
/// Layout: system on bits `0..sys_qubits`, ancillas on the `ancillas` bits
/// above. The circuit in `action` may use fewer ancilla bits than the metadata
/// claims (padding bits are simply never touched and stay zero).
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    /// Normalization: the encoded operator is `alpha` times the corner block.
    pub alpha: f64,
    /// Ancilla qubits above the system register.
    pub ancillas: usize,
    /// Spectral-norm error bound between the encoded operator and the target.
    pub eps: f64,
    /// System register width.
    pub sys_qubits: usize,
    /// The unitary, on `sys_qubits + ancillas` qubits.
    pub action: ActionNode,
    /// Dense target operator, tracked while small enough to afford.
    pub reference: Option<ComplexMatrix>,
    /// Named oracle-invocation counts (includes [`TOFFOLI_KEY`]).
    pub counters: BTreeMap<String, u64>,
    /// Two-qubit gates outside the named counters.
    pub gate_count: u64,
    /// Human-readable provenance for reports.
    pub label: String,
}

impl BlockEncoding {
    /// Checked constructor.
    pub fn new(
        label: impl Into<String>,
        sys_qubits: usize,
        ancillas: usize,
        alpha: f64,
        eps: f64,
        action: ActionNode,
        reference: Option<ComplexMatrix>,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid("alpha must be finite and nonnegative"));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::invalid("eps must be finite and nonnegative"));
        }
        let total = sys_qubits + ancillas;
        if action.min_qubits() > total {
            return Err(Error::dim(format!(
                "action touches bit {} but the encoding has only {total} qubits",
                action.min_qubits() - 1
            )));
        }
        action.validate(total.max(action.min_qubits()))?;
        if let Some(r) = &reference {
            let dim = 1usize << sys_qubits;
            if r.rows() != dim || r.cols() != dim {
                return Err(Error::dim(format!(
                    "reference is {}x{}, system dimension is {dim}",
                    r.rows(),
                    r.cols()
                )));
            }
        }
        Ok(BlockEncoding {
            alpha,
            ancillas,
            eps,
            sys_qubits,
            action,
            reference,
            counters: BTreeMap::new(),
            gate_count: 0,
            label: label.into(),
        })
    }

    /// Exact encoding of the identity: `(1, 0, 0)`.
    pub fn identity(sys_qubits: usize) -> Self {
        let dim_ok = sys_qubits <= 9;
        BlockEncoding {
            alpha: 1.0,
            ancillas: 0,
            eps: 0.0,
            sys_qubits,
            action: ActionNode::identity(),
            reference: dim_ok.then(|| ComplexMatrix::identity(1 << sys_qubits)),
            counters: BTreeMap::new(),
            gate_count: 0,
            label: "I".into(),
        }
    }

    /// Encoding of the zero operator: flipping one ancilla makes the corner
    /// block vanish identically. Useful for switching off a coefficient while
    /// keeping an assembly's term structure intact.
    pub fn zero(sys_qubits: usize, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("zero encoding needs a positive alpha"));
        }
        Ok(BlockEncoding {
            alpha,
            ancillas: 1,
            eps: 0.0,
            sys_qubits,
            action: ActionNode::pauli_x(sys_qubits),
            reference: (sys_qubits <= 9)
                .then(|| ComplexMatrix::zeros(1 << sys_qubits, 1 << sys_qubits)),
            counters: BTreeMap::new(),
            gate_count: 0,
            label: "0".into(),
        })
    }

    /// Builder: record `n` invocations of a named oracle.
    pub fn with_counter(mut self, key: &str, n: u64) -> Self {
        if n > 0 {
            *self.counters.entry(key.to_string()).or_insert(0) += n;
        }
        self
    }

    /// Builder: record two-qubit gates.
    pub fn with_gates(mut self, g: u64) -> Self {
        self.gate_count += g;
        self
    }

    /// Builder: record Toffoli gates.
    pub fn with_toffolis(mut self, t: u64) -> Self {
        if t > 0 {
            *self.counters.entry(TOFFOLI_KEY.to_string()).or_insert(0) += t;
        }
        self
    }

    pub fn toffolis(&self) -> u64 {
        self.counters.get(TOFFOLI_KEY).copied().unwrap_or(0)
    }

    /// All two-qubit gates, Toffolis expanded.
    pub fn total_two_qubit_gates(&self) -> u64 {
        self.gate_count + gates::TWO_QUBIT_PER_TOFFOLI * self.toffolis()
    }

    /// Total qubits the circuit runs on.
    pub fn total_qubits(&self) -> usize {
        self.sys_qubits + self.ancillas
    }

    /// The ancilla register (above the system).
    pub fn anc_reg(&self) -> Reg {
        Reg::contiguous(self.sys_qubits, self.ancillas)
    }

    /// The system register.
    pub fn sys_reg(&self) -> Reg {
        Reg::contiguous(0, self.sys_qubits)
    }

    /// Hermitian adjoint: same metadata, adjoint circuit, daggered reference.
    /// Counter keys toggle an `_adj` suffix (gate-level tallies are unchanged).
    pub fn adjoint(&self) -> BlockEncoding {
        let mut counters = BTreeMap::new();
        for (k, v) in &self.counters {
            let key = if k == TOFFOLI_KEY {
                k.clone()
            } else if let Some(stripped) = k.strip_suffix("_adj") {
                stripped.to_string()
            } else {
                format!("{k}_adj")
            };
            *counters.entry(key).or_insert(0) += v;
        }
        BlockEncoding {
            alpha: self.alpha,
            ancillas: self.ancillas,
            eps: self.eps,
            sys_qubits: self.sys_qubits,
            action: ActionNode::adjoint(self.action.clone()),
            reference: self.reference.as_ref().map(|r| r.adjoint()),
            counters,
            gate_count: self.gate_count,
            label: format!("({})†", self.label),
        }
    }

    /// Dense estimate of the encoded operator: applies the circuit to each
    /// system basis column with zeroed ancillas, reads the zero-ancilla rows,
    /// and multiplies by `alpha`.
    pub fn materialize_block(&self) -> Result<ComplexMatrix> {
        let s = self.sys_qubits;
        let total = self.total_qubits();
        if s > 11 || total > 24 {
            return Err(Error::TooLarge {
                dim: 1usize << total.min(s + 13),
                cap: crate::DENSE_CAP,
            });
        }
        let dim = 1usize << s;
        let anc = self.anc_reg();
        let sys = self.sys_reg();
        let mut out = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut state = crate::linalg::StateVector::basis(total, col);
            statevec::apply(&self.action, &mut state)?;
            let sub = statevec::extract_subspace(&state, &sys, &[(anc.clone(), 0)])?;
            for row in 0..dim {
                out[(row, col)] = sub.amps()[row] * self.alpha;
            }
        }
        Ok(out)
    }

    /// Checks the encoded block against the tracked reference.
    pub fn verify(&self) -> Result<VerifyReport> {
        let reference = self
            .reference
            .as_ref()
            .ok_or_else(|| Error::invalid("verify: no reference tracked"))?;
        let block = self.materialize_block()?;
        let deviation = spectral_norm(&block.sub(reference)?);
        let bound = self.eps + 1e-10;
        Ok(VerifyReport {
            deviation,
            bound,
            ok: deviation <= bound,
            alpha: self.alpha,
            ancillas: self.ancillas,
            label: self.label.clone(),
        })
    }
}

/// Outcome of checking an encoding against its reference operator.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub deviation: f64,
    pub bound: f64,
    pub ok: bool,
    pub alpha: f64,
    pub ancillas: usize,
    pub label: String,
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: deviation {:.3e} {} bound {:.3e} (alpha {:.6}, {} ancillas)",
            self.label,
            self.deviation,
            if self.ok { "<=" } else { ">" },
            self.bound,
            self.alpha,
            self.ancillas
        )
    }
}

fn merge_counters(into: &mut BTreeMap<String, u64>, from: &BTreeMap<String, u64>, times: u64) {
    if times == 0 {
        return;
    }
    for (k, v) in from {
        *into.entry(k.clone()).or_insert(0) += v * times;
    }
}

/// Encodes `A·B` from encodings of `A` and `B` on the same system.
///
/// Metadata: `(α_A·α_B, a_A + a_B, α_A·ε_B + α_B·ε_A)`, computed in exactly
/// that form. `B`'s circuit runs first; `A`'s ancillas sit above `B`'s.
pub fn product(a: &BlockEncoding, b: &BlockEncoding) -> Result<BlockEncoding> {
    if a.sys_qubits != b.sys_qubits {
        return Err(Error::dim(format!(
            "product: system widths differ ({} vs {})",
            a.sys_qubits, b.sys_qubits
        )));
    }
    let s = a.sys_qubits;
    let action = ActionNode::compose(vec![
        b.action.clone(),
        a.action.clone().shift_bits(s, b.ancillas),
    ]);
    let reference = match (&a.reference, &b.reference) {
        (Some(ra), Some(rb)) if ra.rows() <= REF_CAP => Some(ra.matmul(rb)?),
        _ => None,
    };
    let mut counters = a.counters.clone();
    merge_counters(&mut counters, &b.counters, 1);
    Ok(BlockEncoding {
        alpha: a.alpha * b.alpha,
        ancillas: a.ancillas + b.ancillas,
        eps: a.alpha * b.eps + b.alpha * a.eps,
        sys_qubits: s,
        action,
        reference,
        counters,
        gate_count: a.gate_count + b.gate_count,
        label: format!("({}·{})", a.label, b.label),
    })
}

/// State-preparation pair realizing target weights on a prep register.
///
/// For weights `z` with `Λ = Σ|z_j|`, the pair satisfies
/// `⟨0|P'† |j⟩⟨j| P |0⟩ = z_j / Λ`: the prepare column carries
/// `phase(z_j)·√(|z_j|/Λ)` and the unprepare column `√(|z_j|/Λ)`.
#[derive(Clone, Debug)]
pub struct StatePreparationPair {
    pub prep: ComplexMatrix,
    pub unprep: ComplexMatrix,
    pub bits: usize,
}

impl StatePreparationPair {
    pub fn for_weights(z: &[C64], bits: usize) -> Result<Self> {
        let dim = 1usize << bits;
        if z.len() > dim {
            return Err(Error::dim(format!(
                "{} weights do not fit in {bits} prep bits",
                z.len()
            )));
        }
        let lambda: f64 = z.iter().map(|w| w.norm()).sum();
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("weights must have positive finite 1-norm"));
        }
        let mut c = vec![C64::new(0.0, 0.0); dim];
        let mut d = vec![C64::new(0.0, 0.0); dim];
        for (j, w) in z.iter().enumerate() {
            let mag = w.norm();
            if mag == 0.0 {
                continue;
            }
            let root = (mag / lambda).sqrt();
            c[j] = (w / mag) * root;
            d[j] = C64::new(root, 0.0);
        }
        // Guard against rounding in the square roots.
        let cn = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let dn = d.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in c.iter_mut() {
            *x /= cn;
        }
        for x in d.iter_mut() {
            *x /= dn;
        }
        Ok(StatePreparationPair {
            prep: unitary_with_first_column(&c)?,
            unprep: unitary_with_first_column(&d)?,
            bits,
        })
    }
}

fn ceil_log2(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

/// Encodes the linear combination `Σ_j y_j A_j`.
///
/// Arms must share a system width; ancilla blocks are padded to the widest arm
/// and a `⌈log₂ m⌉`-bit prep register is added above. When every arm shares
/// the same `alpha` (resp. `eps`), the result's metadata is computed as
/// `alpha·‖y‖₁` (resp. `eps·‖y‖₁`); otherwise the tight sums `Σ|y_j|α_j` and
/// `Σ|y_j|ε_j` are used.
pub fn lcu(coeffs: &[C64], arms: &[BlockEncoding], label: impl Into<String>) -> Result<BlockEncoding> {
    if arms.is_empty() || coeffs.len() != arms.len() {
        return Err(Error::invalid(format!(
            "lcu: {} coefficients for {} arms",
            coeffs.len(),
            arms.len()
        )));
    }
    let s = arms[0].sys_qubits;
    if arms.iter().any(|a| a.sys_qubits != s) {
        return Err(Error::dim("lcu: arms act on different system widths"));
    }
    if coeffs.iter().any(|y| !(y.re.is_finite() && y.im.is_finite())) {
        return Err(Error::NonFinite("lcu coefficients"));
    }
    let m = arms.len();
    let a_max = arms.iter().map(|a| a.ancillas).max().unwrap_or(0);
    let prep_bits = ceil_log2(m);

    let l1: f64 = coeffs.iter().map(|y| y.norm()).sum();
    let alpha_equal = arms.windows(2).all(|w| w[0].alpha == w[1].alpha);
    let eps_equal = arms.windows(2).all(|w| w[0].eps == w[1].eps);
    let alpha = if alpha_equal {
        arms[0].alpha * l1
    } else {
        coeffs
            .iter()
            .zip(arms)
            .map(|(y, a)| y.norm() * a.alpha)
            .sum()
    };
    let eps = if eps_equal {
        arms[0].eps * l1
    } else {
        coeffs
            .iter()
            .zip(arms)
            .map(|(y, a)| y.norm() * a.eps)
            .sum()
    };
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("lcu: combination has zero or non-finite weight"));
    }

    let z: Vec<C64> = coeffs
        .iter()
        .zip(arms)
        .map(|(y, a)| y * C64::new(a.alpha, 0.0))
        .collect();

    let mut counters = BTreeMap::new();
    let mut gate_count = 0u64;
    for a in arms {
        merge_counters(&mut counters, &a.counters, 1);
        gate_count += a.gate_count;
    }

    let action;
    if prep_bits == 0 {
        // Single arm: the combination is a global phase tweak of the arm.
        let phase = z[0].arg();
        action = ActionNode::compose(vec![
            ActionNode::global_phase(phase),
            arms[0].action.clone(),
        ]);
    } else {
        let pair = StatePreparationPair::for_weights(&z, prep_bits)?;
        let prep_reg = Reg::contiguous(s + a_max, prep_bits);
        let select_arms: Vec<(u64, ActionNode)> = arms
            .iter()
            .enumerate()
            .map(|(j, a)| (j as u64, a.action.clone()))
            .collect();
        action = ActionNode::compose(vec![
            ActionNode::prepare(prep_reg.clone(), pair.prep.clone())?,
            ActionNode::Select {
                reg: prep_reg.clone(),
                arms: select_arms,
            },
            ActionNode::adjoint(ActionNode::prepare(prep_reg, pair.unprep.clone())?),
        ]);
        let nonzero = z.iter().filter(|w| w.norm() > 0.0).count();
        gate_count += gates::prep_pair_gates(nonzero);
        let tof = gates::select_toffolis(m);
        *counters.entry(TOFFOLI_KEY.to_string()).or_insert(0) += tof;
    }

    let reference = if arms.iter().all(|a| a.reference.is_some()) && (1usize << s) <= REF_CAP {
        let mut acc = ComplexMatrix::zeros(1 << s, 1 << s);
        for (y, a) in coeffs.iter().zip(arms) {
            acc = acc.add(&a.reference.as_ref().unwrap().scale(*y))?;
        }
        Some(acc)
    } else {
        None
    };

    Ok(BlockEncoding {
        alpha,
        ancillas: a_max + prep_bits,
        eps,
        sys_qubits: s,
        action,
        reference,
        counters,
        gate_count,
        label: label.into(),
    })
}

/// Encodes the off-diagonal selector operator
/// `M_j = |0⟩⟨j| ⊗ A₁ + |j⟩⟨0| ⊗ A₂`
/// on the widened system `[selector(k bits) | system]`.
///
/// Both arms must share system width and normalization. The shared `alpha` is
/// taken as the larger of the two when they differ by rounding (at most
/// relative 1e−12, as happens when the arms multiply the same factors in a
/// different association); the gap is added to the error bound so the smaller
/// arm stays soundly covered. Sectors outside `{0, j}` are routed away from
/// the ancilla-zero block by flipping the top ancilla, which costs one extra
/// ancilla only when the arms have none and `k ≥ 2`. Control overhead is
/// pinned at `4·(4k−2)` Toffolis plus one `|0⟩↔|j⟩` transposition at `3k`
/// two-qubit gates.
pub fn selector_offdiag(
    k: usize,
    j: u64,
    a1: &BlockEncoding,
    a2: &BlockEncoding,
) -> Result<BlockEncoding> {
    if k == 0 || j == 0 || j >= (1u64 << k) {
        return Err(Error::invalid(format!(
            "selector index {j} out of range for {k} selector bits"
        )));
    }
    if a1.sys_qubits != a2.sys_qubits {
        return Err(Error::dim("selector arms act on different system widths"));
    }
    let alpha_gap = (a1.alpha - a2.alpha).abs();
    if alpha_gap > 1e-12 * a1.alpha.max(a2.alpha) {
        return Err(Error::invalid(format!(
            "selector arms must share alpha ({} vs {})",
            a1.alpha, a2.alpha
        )));
    }
    let s = a1.sys_qubits;
    let a_arm = a1.ancillas.max(a2.ancillas);
    let needs_flag = a_arm == 0 && k >= 2;
    let ancillas = if needs_flag { 1 } else { a_arm };
    let sel_reg = Reg::contiguous(s, k);
    let sel_dim = 1u64 << k;

    // Arms move above the selector: their ancilla bits shift up by k.
    let act1 = a1.action.clone().shift_bits(s, k);
    let act2 = a2.action.clone().shift_bits(s, k);

    // |0⟩↔|j⟩ transposition as a dense permutation on the selector.
    let mut perm = ComplexMatrix::identity(sel_dim as usize);
    perm[(0, 0)] = C64::new(0.0, 0.0);
    perm[(j as usize, j as usize)] = C64::new(0.0, 0.0);
    perm[(0, j as usize)] = C64::new(1.0, 0.0);
    perm[(j as usize, 0)] = C64::new(1.0, 0.0);

    let mut steps = vec![
        ActionNode::controlled(sel_reg.clone(), CtrlPred::Equals(0), act2),
        ActionNode::controlled(sel_reg.clone(), CtrlPred::Equals(j), act1),
        ActionNode::prepare(sel_reg.clone(), perm)?,
    ];
    if sel_dim > 2 {
        // Outside {0, j}: mark the top ancilla so the block reads zero there.
        steps.push(ActionNode::controlled(
            sel_reg.clone(),
            CtrlPred::NotIn(vec![0, j]),
            ActionNode::pauli_x(s + k + ancillas - 1),
        ));
    }

    let reference = match (&a1.reference, &a2.reference) {
        (Some(r1), Some(r2)) if (1usize << (s + k)) <= REF_CAP => {
            let dim = 1usize << s;
            let mut m = ComplexMatrix::zeros(dim << k, dim << k);
            for r in 0..dim {
                for c in 0..dim {
                    m[(r, j as usize * dim + c)] = r1[(r, c)];
                    m[(j as usize * dim + r, c)] = r2[(r, c)];
                }
            }
            Some(m)
        }
        _ => None,
    };

    let mut counters = a1.counters.clone();
    merge_counters(&mut counters, &a2.counters, 1);
    *counters.entry(TOFFOLI_KEY.to_string()).or_insert(0) += gates::selector_toffolis(k);

    Ok(BlockEncoding {
        alpha: a1.alpha.max(a2.alpha),
        ancillas,
        eps: a1.eps.max(a2.eps) + alpha_gap,
        sys_qubits: s + k,
        action: ActionNode::compose(steps),
        reference,
        counters,
        gate_count: a1.gate_count + a2.gate_count + gates::swap_pair_gates(k),
        label: format!("sel[{j}]({},{})", a1.label, a2.label),
    })
}

/// Encodes the diagonal selector operator `|j⟩⟨j| ⊗ B` on the widened system
/// `[selector(k bits) | system]`: the arm runs only in sector `j`, every other
/// sector reads zero. Needs one ancilla for the zero-routing flip when the arm
/// has none. Control overhead is pinned at `2·(4k−2)` Toffolis (one AND ladder
/// computed and uncomputed).
pub fn selector_diag(k: usize, j: u64, arm: &BlockEncoding) -> Result<BlockEncoding> {
    if k == 0 || j >= (1u64 << k) {
        return Err(Error::invalid(format!(
            "selector index {j} out of range for {k} selector bits"
        )));
    }
    let s = arm.sys_qubits;
    let ancillas = arm.ancillas.max(1);
    let sel_reg = Reg::contiguous(s, k);
    let act = arm.action.clone().shift_bits(s, k);
    let steps = vec![
        ActionNode::controlled(sel_reg.clone(), CtrlPred::Equals(j), act),
        ActionNode::controlled(
            sel_reg,
            CtrlPred::NotIn(vec![j]),
            ActionNode::pauli_x(s + k + ancillas - 1),
        ),
    ];
    let reference = match &arm.reference {
        Some(r) if (1usize << (s + k)) <= REF_CAP => {
            let dim = 1usize << s;
            let mut m = ComplexMatrix::zeros(dim << k, dim << k);
            for r_i in 0..dim {
                for c_i in 0..dim {
                    m[(j as usize * dim + r_i, j as usize * dim + c_i)] = r[(r_i, c_i)];
                }
            }
            Some(m)
        }
        _ => None,
    };
    let mut counters = arm.counters.clone();
    *counters.entry(TOFFOLI_KEY.to_string()).or_insert(0) += gates::selector_diag_toffolis(k);
    Ok(BlockEncoding {
        alpha: arm.alpha,
        ancillas,
        eps: arm.eps,
        sys_qubits: s + k,
        action: ActionNode::compose(steps),
        reference,
        counters,
        gate_count: arm.gate_count,
        label: format!("seldiag[{j}]({})", arm.label),
    })
}

/// Encodes the antisymmetric selector pair `|0⟩⟨j| ⊗ B − |j⟩⟨0| ⊗ B` with a
/// single query to the arm: a −1 phase on input sector 0, the `|0⟩↔|j⟩`
/// transposition, and one application of the arm on the `{0, j}` sectors give
/// both signed blocks at once. Control overhead is pinned at
/// `4·(4k−2) + (4k−2)` Toffolis (the paired-flag ladders plus the
/// sector-0 phase) and `3k` transposition gates.
pub fn selector_antisym(k: usize, j: u64, arm: &BlockEncoding) -> Result<BlockEncoding> {
    if k == 0 || j == 0 || j >= (1u64 << k) {
        return Err(Error::invalid(format!(
            "selector index {j} out of range for {k} selector bits"
        )));
    }
    let s = arm.sys_qubits;
    let a_arm = arm.ancillas;
    let needs_flag = a_arm == 0 && k >= 2;
    let ancillas = if needs_flag { 1 } else { a_arm };
    let sel_reg = Reg::contiguous(s, k);
    let sel_dim = 1u64 << k;

    let mut phases = vec![0.0f64; sel_dim as usize];
    phases[0] = std::f64::consts::PI;

    let mut perm = ComplexMatrix::identity(sel_dim as usize);
    perm[(0, 0)] = C64::new(0.0, 0.0);
    perm[(j as usize, j as usize)] = C64::new(0.0, 0.0);
    perm[(0, j as usize)] = C64::new(1.0, 0.0);
    perm[(j as usize, 0)] = C64::new(1.0, 0.0);

    // The arm runs on both live sectors; NotIn lists the complement of {0, j}.
    let others: Vec<u64> = (0..sel_dim).filter(|&v| v != 0 && v != j).collect();
    let act = arm.action.clone().shift_bits(s, k);
    let mut steps = vec![
        ActionNode::PhaseDiag {
            reg: sel_reg.clone(),
            phases,
        },
        ActionNode::prepare(sel_reg.clone(), perm)?,
        ActionNode::controlled(sel_reg.clone(), CtrlPred::NotIn(others), act),
    ];
    if sel_dim > 2 {
        steps.push(ActionNode::controlled(
            sel_reg,
            CtrlPred::NotIn(vec![0, j]),
            ActionNode::pauli_x(s + k + ancillas - 1),
        ));
    }

    let reference = match &arm.reference {
        Some(r) if (1usize << (s + k)) <= REF_CAP => {
            let dim = 1usize << s;
            let mut m = ComplexMatrix::zeros(dim << k, dim << k);
            for r_i in 0..dim {
                for c_i in 0..dim {
                    m[(r_i, j as usize * dim + c_i)] = r[(r_i, c_i)];
                    m[(j as usize * dim + r_i, c_i)] = -r[(r_i, c_i)];
                }
            }
            Some(m)
        }
        _ => None,
    };
    let mut counters = arm.counters.clone();
    *counters.entry(TOFFOLI_KEY.to_string()).or_insert(0) += gates::selector_antisym_toffolis(k);
    Ok(BlockEncoding {
        alpha: arm.alpha,
        ancillas,
        eps: arm.eps,
        sys_qubits: s + k,
        action: ActionNode::compose(steps),
        reference,
        counters,
        gate_count: arm.gate_count + gates::swap_pair_gates(k),
        label: format!("selpair[{j}](±{})", arm.label),
    })
}

/// Encodes `T_k(H/α)` for an encoded Hermitian `H`, metadata `(1, a+1, k·ε/α)`.
///
/// The circuit alternates the encoding unitary (odd steps) and its adjoint
/// (even steps) with reflections about the ancilla zero state between steps:
/// `V_1 = U`, `V_k = U^{(†)}·(2Π₀−I)·V_{k−1}`. On inputs with zeroed ancillas
/// the corner block of `V_k` is exactly `T_k` of the corner block of `U`.
/// Each reflection costs an AND ladder over the arm's ancillas; the extra
/// metadata ancilla is the ladder's flag and is returned to zero.
pub fn chebyshev(u: &BlockEncoding, k: usize) -> Result<BlockEncoding> {
    if u.alpha <= 0.0 {
        return Err(Error::invalid("chebyshev: alpha must be positive"));
    }
    if k == 0 {
        // T_0 = I on the padded ancilla layout.
        let mut out = BlockEncoding::identity(u.sys_qubits);
        out.ancillas = u.ancillas + 1;
        out.label = format!("T0({})", u.label);
        return Ok(out);
    }
    if let Some(r) = &u.reference {
        let dev = r.hermitian_deviation();
        if dev > 1e-9 * u.alpha.max(1.0) {
            return Err(Error::invalid(format!(
                "chebyshev: target is not Hermitian (deviation {dev:.3e})"
            )));
        }
    }
    let anc = u.anc_reg();
    let mut steps = Vec::with_capacity(2 * k - 1);
    for step in 1..=k {
        if step > 1 {
            steps.push(ActionNode::Reflection { reg: anc.clone() });
        }
        if step % 2 == 1 {
            steps.push(u.action.clone());
        } else {
            steps.push(ActionNode::adjoint(u.action.clone()));
        }
    }
    let reference = u.reference.as_ref().map(|r| {
        // Dense Chebyshev recurrence on H/α.
        let dim = r.rows();
        let x = r.scale(C64::new(1.0 / u.alpha, 0.0));
        let mut tm1 = ComplexMatrix::identity(dim);
        let mut t = x.clone();
        for _ in 2..=k {
            let next = x
                .matmul(&t)
                .unwrap()
                .scale(C64::new(2.0, 0.0))
                .sub(&tm1)
                .unwrap();
            tm1 = t;
            t = next;
        }
        t
    });
    let odd = k as u64 / 2 + k as u64 % 2;
    let even = k as u64 / 2;
    let mut counters = BTreeMap::new();
    merge_counters(&mut counters, &u.counters, odd);
    merge_counters(&mut counters, &u.adjoint().counters, even);
    *counters.entry(TOFFOLI_KEY.to_string()).or_insert(0) +=
        (k as u64 - 1) * gates::and_ladder_toffolis(u.ancillas);
    Ok(BlockEncoding {
        alpha: 1.0,
        ancillas: u.ancillas + 1,
        eps: k as f64 * u.eps / u.alpha,
        sys_qubits: u.sys_qubits,
        action: ActionNode::compose(steps),
        reference,
        counters,
        gate_count: k as u64 * u.gate_count,
        label: format!("T{k}({})", u.label),
    })
}

/// Controls an encoding on `ctrl_qubits` fresh qubits placed directly above
/// the original system (selector-style). The circuit runs only when every
/// control reads 1, so the widened encoded operator is
/// `|1…1⟩⟨1…1| ⊗ A  +  α·(I − |1…1⟩⟨1…1|) ⊗ I`
/// with metadata `(α, a, ε)` unchanged. Named query counters gain a `ctrl_`
/// prefix marking each inner oracle use as a controlled query; Toffoli and
/// plain gate tallies carry over as-is.
pub fn controlled(u: &BlockEncoding, ctrl_qubits: usize) -> Result<BlockEncoding> {
    if ctrl_qubits == 0 {
        return Err(Error::invalid("controlled needs at least one control qubit"));
    }
    let s = u.sys_qubits;
    let new_sys = s + ctrl_qubits;
    let ctrl_reg = Reg::contiguous(s, ctrl_qubits);
    let action = ActionNode::controlled(
        ctrl_reg,
        CtrlPred::AllOnes,
        u.action.clone().shift_bits(s, ctrl_qubits),
    );
    let ones = (1usize << ctrl_qubits) - 1;
    let reference = match &u.reference {
        Some(r) if (1usize << new_sys) <= REF_CAP => {
            let dim = 1usize << s;
            let mut m = ComplexMatrix::zeros(dim << ctrl_qubits, dim << ctrl_qubits);
            for v in 0..=ones {
                if v == ones {
                    for row in 0..dim {
                        for col in 0..dim {
                            m[(v * dim + row, v * dim + col)] = r[(row, col)];
                        }
                    }
                } else {
                    for row in 0..dim {
                        m[(v * dim + row, v * dim + row)] = C64::new(u.alpha, 0.0);
                    }
                }
            }
            Some(m)
        }
        _ => None,
    };
    let mut counters = BTreeMap::new();
    for (k, v) in &u.counters {
        let key = if k == TOFFOLI_KEY || k.starts_with("ctrl_") {
            k.clone()
        } else {
            format!("ctrl_{k}")
        };
        *counters.entry(key).or_insert(0) += v;
    }
    Ok(BlockEncoding {
        alpha: u.alpha,
        ancillas: u.ancillas,
        eps: u.eps,
        sys_qubits: new_sys,
        action,
        reference,
        counters,
        gate_count: u.gate_count,
        label: format!("ctrl[{ctrl_qubits}]({})", u.label),
    })
}
