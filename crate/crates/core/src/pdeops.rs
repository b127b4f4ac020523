//! Finite-difference operators and PDE generator assemblies.
//!
//! Spatial axes are discretized on the inclusive grid `x_i = i·h`,
//! `h = 1/(2^n − 1)`. First-order forward/backward differences fold their
//! boundary condition into the stencil ([`diff_matrix`]) and become
//! block-encodings through one of two backends ([`diff_be`]): a two-term
//! combination of the cyclic-shift unitary and the identity (periodic axes,
//! `α = 2/h`), or an exact one-ancilla unitary completion of the scaled matrix
//! (any boundary, `α = ‖D‖·(1+1e−6)`).
//!
//! On top of these, three generator assemblies combine coefficient encodings
//! and differences into one block-encoded operator:
//!
//! * [`assemble_a2nd`] — the damped second-order form on a `(d+2)`-component
//!   system: `|0⟩⟨0| ⊗ C_ρ⁻¹C_ζ − Σ_μ (|0⟩⟨μ+1| ⊗ C_ρ^{-½}D_μ⁺C_κ^{½} +
//!   |μ+1⟩⟨0| ⊗ C_κ^{½}D_μ⁻C_ρ^{-½}) + (|0⟩⟨d+1| − |d+1⟩⟨0|) ⊗ C_ρ^{-½}C_γ^{½}`.
//! * [`assemble_a1st`] — the first-order advection–diffusion–reaction form
//!   `−½Σ_μ(D_μ⁺C_κD_μ⁻ + D_μ⁻C_κD_μ⁺) + Σ_μ(C_{β_μ⁺}D_μ⁻ + C_{β_μ⁻}D_μ⁺) + C_γ`,
//!   the negated right-hand side of `∂_t u = (∇·κ∇ − β·∇ − γ)u`.
//!
//! All three assemblies share one orientation: the encoded operator `A` is
//! the negated generator, so the physical semigroup is `exp(−At)` in every
//! case (dissipative for the first-order family, norm-preserving for the
//! anti-Hermitian wave system).
//! * [`assemble_wave_a`] — the 2D acoustic first-order system
//!   `−(|0⟩⟨1| ⊗ CD_x⁺ + |1⟩⟨0| ⊗ D_x⁻C + |0⟩⟨2| ⊗ CD_y⁺ + |2⟩⟨0| ⊗ D_y⁻C)`
//!   on a four-component selector with the fourth row and column zero.
//!
//! Design registers ride along as extra system qubits between the selector
//! and the grid; differences and selectors never touch them, so one assembly
//! encodes every shifted-coefficient operator at once, sector by sector.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::becalc::{
    self, gates, lcu, product, selector_antisym, selector_diag, selector_offdiag, BlockEncoding,
};
use crate::diagenc::FourierDiagLayout;
use crate::error::Error;
use crate::linalg::{kron, spectral_norm, ComplexMatrix, StateVector};
use crate::statevec::{self, ActionNode, Reg};
use crate::Result;

/// Boundary treatment of the ghost value just outside an axis end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Ghost wraps to the opposite end.
    Periodic,
    /// Ghost value is zero.
    Dirichlet,
    /// Ghost copies the boundary value (zero one-sided derivative).
    Neumann,
}

/// One spatial axis: qubit count and the boundary treatment at each end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisGrid {
    pub n: usize,
    pub left: BoundaryKind,
    pub right: BoundaryKind,
}

impl AxisGrid {
    pub fn new(n: usize, left: BoundaryKind, right: BoundaryKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("axis needs at least one qubit"));
        }
        if (left == BoundaryKind::Periodic) != (right == BoundaryKind::Periodic) {
            return Err(Error::invalid("periodic wrap must apply to both ends of an axis"));
        }
        Ok(AxisGrid { n, left, right })
    }

    pub fn periodic(n: usize) -> Self {
        AxisGrid {
            n,
            left: BoundaryKind::Periodic,
            right: BoundaryKind::Periodic,
        }
    }

    /// Zero ghosts at both ends. This is also how a physical
    /// fixed-value/zero-slope boundary pair enters a first-order system:
    /// the time-derivative field vanishes past the fixed end and the
    /// spatial-derivative field vanishes past the zero-slope end, so both
    /// one-sided differences see zero ghosts and stay exact adjoints.
    pub fn zero_ghost(n: usize) -> Self {
        AxisGrid {
            n,
            left: BoundaryKind::Dirichlet,
            right: BoundaryKind::Dirichlet,
        }
    }

    pub fn points(&self) -> usize {
        1 << self.n
    }

    /// Grid spacing `1/(2^n − 1)` (endpoints inclusive).
    pub fn h(&self) -> f64 {
        1.0 / ((1usize << self.n) - 1) as f64
    }

    pub fn is_periodic(&self) -> bool {
        self.left == BoundaryKind::Periodic
    }

    /// Circuit-faithful shifts where the wrap allows it, exact completion
    /// otherwise.
    pub fn default_backend(&self) -> DiffBackend {
        if self.is_periodic() {
            DiffBackend::ShiftLcu
        } else {
            DiffBackend::Dilation
        }
    }
}

/// Spatial grid: axes ordered from the highest qubits downward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub axes: Vec<AxisGrid>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisGrid>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        Ok(GridSpec { axes })
    }

    pub fn d(&self) -> usize {
        self.axes.len()
    }

    pub fn grid_qubits(&self) -> usize {
        self.axes.iter().map(|a| a.n).sum()
    }

    pub fn points(&self) -> usize {
        1 << self.grid_qubits()
    }
}

/// Register layout of one generator: grid axes on the low bits (axis 0
/// highest), an optional design register above them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorLayout {
    pub grid: GridSpec,
    pub design_bits: usize,
}

impl OperatorLayout {
    pub fn plain(grid: GridSpec) -> Self {
        OperatorLayout {
            grid,
            design_bits: 0,
        }
    }

    pub fn sys_qubits(&self) -> usize {
        self.grid.grid_qubits() + self.design_bits
    }

    /// Bits of axis `mu`; axes pack from the top, so axis 0 sits above axis 1.
    pub fn axis_reg(&self, mu: usize) -> Reg {
        let below: usize = self.grid.axes[mu + 1..].iter().map(|a| a.n).sum();
        Reg::contiguous(below, self.grid.axes[mu].n)
    }

    pub fn design_reg(&self) -> Reg {
        Reg::contiguous(self.grid.grid_qubits(), self.design_bits)
    }
}

/// Difference direction: `Plus` looks at the next point, `Minus` at the
/// previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffDir {
    Plus,
    Minus,
}

/// How a difference operator becomes a block-encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffBackend {
    /// `D = ±(S − I)/h` as a two-term combination of the cyclic shift and the
    /// identity; periodic axes only, `α = 2/h`.
    ShiftLcu,
    /// One-ancilla unitary completion of `D/α`, any boundary,
    /// `α = ‖D‖·(1 + 1e−6)`.
    Dilation,
}

/// Dense one-axis difference stencil with the boundary folded in.
///
/// `Plus` rows read `(u_{i+1} − u_i)/h` and consult only the right boundary;
/// `Minus` rows read `(u_i − u_{i−1})/h` and consult only the left.
pub fn diff_matrix(axis: &AxisGrid, dir: DiffDir) -> ComplexMatrix {
    let n = axis.points();
    let h = axis.h();
    let one = C64::new(1.0 / h, 0.0);
    let mut m = ComplexMatrix::zeros(n, n);
    match dir {
        DiffDir::Plus => {
            for i in 0..n {
                m[(i, i)] = -one;
                if i + 1 < n {
                    m[(i, i + 1)] = one;
                }
            }
            match axis.right {
                BoundaryKind::Periodic => m[(n - 1, 0)] += one,
                BoundaryKind::Dirichlet => {}
                BoundaryKind::Neumann => m[(n - 1, n - 1)] += one,
            }
        }
        DiffDir::Minus => {
            for i in 0..n {
                m[(i, i)] = one;
                if i > 0 {
                    m[(i, i - 1)] = -one;
                }
            }
            match axis.left {
                BoundaryKind::Periodic => m[(0, n - 1)] -= one,
                BoundaryKind::Dirichlet => {}
                BoundaryKind::Neumann => m[(0, 0)] -= one,
            }
        }
    }
    m
}

/// Embeds a one-axis operator into the full system as
/// `I_design ⊗ I_above ⊗ M ⊗ I_below`.
pub fn embed_axis_operator(
    layout: &OperatorLayout,
    mu: usize,
    m: &ComplexMatrix,
) -> ComplexMatrix {
    let below: usize = layout.grid.axes[mu + 1..].iter().map(|a| a.n).sum();
    let above = layout.sys_qubits() - below - layout.grid.axes[mu].n;
    let mut out =
        kron(&ComplexMatrix::identity(1 << above), m).expect("embedding exceeds dense cap");
    if below > 0 {
        out = kron(&out, &ComplexMatrix::identity(1 << below))
            .expect("embedding exceeds dense cap");
    }
    out
}

/// Internal Toffoli tally of the shift-and-identity difference encoding.
pub fn diff_shift_lcu_toffolis(n: usize) -> u64 {
    gates::increment_toffolis(n) + 2 * gates::and_ladder_toffolis(1)
}

/// Two-qubit gate tally convention for the dense dilation on `n + 1` qubits.
pub fn diff_dilation_gates(n: usize) -> u64 {
    4u64.pow(n as u32 + 1)
}

fn dilation_unitary(scaled: &ComplexMatrix) -> ComplexMatrix {
    // [[Â, (I−ÂÂ†)^½], [(I−Â†Â)^½, −Â†]] for the contraction Â.
    let n = scaled.rows();
    let na = scaled.to_na();
    let svd = na.svd(true, true);
    let w = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let root = nalgebra::DMatrix::from_diagonal(
        &svd.singular_values
            .map(|s| C64::new((1.0 - s * s).max(0.0).sqrt(), 0.0)),
    );
    let b = w * &root * w.adjoint();
    let c = vt.adjoint() * &root * vt;
    let mut u = ComplexMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for col in 0..n {
            u[(r, col)] = scaled[(r, col)];
            u[(r, n + col)] = b[(r, col)];
            u[(n + r, col)] = c[(r, col)];
            u[(n + r, n + col)] = -scaled[(col, r)].conj();
        }
    }
    u
}

fn diff_be_with_alpha(
    layout: &OperatorLayout,
    mu: usize,
    dir: DiffDir,
    backend: DiffBackend,
    alpha_shared: Option<f64>,
) -> Result<BlockEncoding> {
    let axis = &layout.grid.axes[mu];
    let reg = layout.axis_reg(mu);
    let s = layout.sys_qubits();
    let h = axis.h();
    let key = match dir {
        DiffDir::Plus => "diff_plus",
        DiffDir::Minus => "diff_minus",
    };
    let dense = diff_matrix(axis, dir);
    let reference = (s <= 9).then(|| embed_axis_operator(layout, mu, &dense));

    match backend {
        DiffBackend::ShiftLcu => {
            if !axis.is_periodic() {
                return Err(Error::invalid(
                    "shift-based difference encoding needs a periodic axis",
                ));
            }
            let by = match dir {
                DiffDir::Plus => -1i64,
                DiffDir::Minus => 1i64,
            };
            let shift_ref = (s <= 9).then(|| {
                let np = axis.points();
                let mut p = ComplexMatrix::zeros(np, np);
                // The shift adds `by` to the register value: |i⟩ → |i + by⟩.
                for col in 0..np {
                    let to = ((col as i64 + by).rem_euclid(np as i64)) as usize;
                    p[(to, col)] = C64::new(1.0, 0.0);
                }
                embed_axis_operator(layout, mu, &p)
            });
            let shift = BlockEncoding::new(
                format!("S{}", if by < 0 { "-" } else { "+" }),
                s,
                0,
                1.0,
                0.0,
                ActionNode::CyclicShift {
                    reg: reg.clone(),
                    by,
                },
                shift_ref,
            )?
            .with_toffolis(gates::increment_toffolis(axis.n));
            let ident = BlockEncoding::identity(s);
            let inv_h = 1.0 / h;
            let (c_shift, c_id) = match dir {
                DiffDir::Plus => (inv_h, -inv_h),
                DiffDir::Minus => (-inv_h, inv_h),
            };
            let be = lcu(
                &[C64::new(c_shift, 0.0), C64::new(c_id, 0.0)],
                &[shift, ident],
                format!("D{}[{mu}]", if dir == DiffDir::Plus { "+" } else { "-" }),
            )?;
            Ok(be.with_counter(key, 1))
        }
        DiffBackend::Dilation => {
            let alpha = match alpha_shared {
                Some(a) => a,
                None => spectral_norm(&dense) * (1.0 + 1e-6),
            };
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::Numeric("difference dilation scale".into()));
            }
            let scaled = dense.scale(C64::new(1.0 / alpha, 0.0));
            let u = dilation_unitary(&scaled);
            let anc_bit = s;
            let full_reg = reg.then(&Reg::new(vec![anc_bit]));
            let action = ActionNode::prepare(full_reg, u)?;
            let be = BlockEncoding::new(
                format!(
                    "D{}[{mu}]~dilation",
                    if dir == DiffDir::Plus { "+" } else { "-" }
                ),
                s,
                1,
                alpha,
                0.0,
                action,
                reference,
            )?
            .with_gates(diff_dilation_gates(axis.n));
            Ok(be.with_counter(key, 1))
        }
    }
}

/// Block-encodes one difference operator on the layout's full system.
pub fn diff_be(
    layout: &OperatorLayout,
    mu: usize,
    dir: DiffDir,
    backend: DiffBackend,
) -> Result<BlockEncoding> {
    diff_be_with_alpha(layout, mu, dir, backend, None)
}

/// Both directions on one axis, sharing one normalization bit for bit so the
/// pair can sit on the two sides of a selector.
pub fn diff_be_pair(
    layout: &OperatorLayout,
    mu: usize,
    backend: DiffBackend,
) -> Result<(BlockEncoding, BlockEncoding)> {
    let shared = match backend {
        DiffBackend::ShiftLcu => None,
        DiffBackend::Dilation => {
            let axis = &layout.grid.axes[mu];
            let sp = spectral_norm(&diff_matrix(axis, DiffDir::Plus));
            let sm = spectral_norm(&diff_matrix(axis, DiffDir::Minus));
            Some(sp.max(sm) * (1.0 + 1e-6))
        }
    };
    let plus = diff_be_with_alpha(layout, mu, DiffDir::Plus, backend, shared)?;
    let minus = diff_be_with_alpha(layout, mu, DiffDir::Minus, backend, shared)?;
    Ok((plus, minus))
}

/// Coefficient encodings for the second-order assembly: the inverse-root
/// mass `C_ρ^{-½}`, root stiffness `C_κ^{½}`, damping `C_ζ`, and root
/// reaction `C_γ^{½}`, all diagonal on the same system.
#[derive(Clone, Debug)]
pub struct CoefficientSet2nd {
    pub inv_sqrt_rho: BlockEncoding,
    pub sqrt_kappa: BlockEncoding,
    pub zeta: BlockEncoding,
    pub sqrt_gamma: BlockEncoding,
}

impl CoefficientSet2nd {
    pub fn new(
        inv_sqrt_rho: BlockEncoding,
        sqrt_kappa: BlockEncoding,
        zeta: BlockEncoding,
        sqrt_gamma: BlockEncoding,
    ) -> Result<Self> {
        let s = inv_sqrt_rho.sys_qubits;
        for (name, be) in [
            ("sqrt_kappa", &sqrt_kappa),
            ("zeta", &zeta),
            ("sqrt_gamma", &sqrt_gamma),
        ] {
            if be.sys_qubits != s {
                return Err(Error::dim(format!(
                    "coefficient {name} acts on {} qubits, expected {s}",
                    be.sys_qubits
                )));
            }
        }
        Ok(CoefficientSet2nd {
            inv_sqrt_rho,
            sqrt_kappa,
            zeta,
            sqrt_gamma,
        })
    }
}

/// Coefficient encodings for the first-order assembly: diffusion `C_κ`,
/// per-axis upwind advection pair `(C_{β⁺}, C_{β⁻})`, and reaction `C_γ`.
/// All advection encodings must share one normalization.
#[derive(Clone, Debug)]
pub struct CoefficientSet1st {
    pub kappa: BlockEncoding,
    pub beta: Vec<(BlockEncoding, BlockEncoding)>,
    pub gamma: BlockEncoding,
}

impl CoefficientSet1st {
    pub fn new(
        kappa: BlockEncoding,
        beta: Vec<(BlockEncoding, BlockEncoding)>,
        gamma: BlockEncoding,
    ) -> Result<Self> {
        let s = kappa.sys_qubits;
        if gamma.sys_qubits != s {
            return Err(Error::dim("reaction coefficient system width mismatch"));
        }
        let alpha_b = beta.first().map(|(p, _)| p.alpha);
        for (plus, minus) in &beta {
            if plus.sys_qubits != s || minus.sys_qubits != s {
                return Err(Error::dim("advection coefficient system width mismatch"));
            }
            if Some(plus.alpha) != alpha_b || Some(minus.alpha) != alpha_b {
                return Err(Error::invalid(
                    "advection encodings must share one normalization",
                ));
            }
            if plus.ancillas != minus.ancillas {
                return Err(Error::invalid("advection pair ancilla mismatch"));
            }
            for (label, be, sign) in [("β⁺", plus, 1.0), ("β⁻", minus, -1.0)] {
                if let Some(r) = &be.reference {
                    for i in 0..r.rows() {
                        if sign * r[(i, i)].re < -1e-12 || r[(i, i)].im.abs() > 1e-12 {
                            return Err(Error::invalid(format!(
                                "{label} must be real with the matching sign everywhere"
                            )));
                        }
                    }
                }
            }
        }
        Ok(CoefficientSet1st {
            kappa,
            beta,
            gamma,
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

/// Assembles the damped second-order generator on the `(d+2)`-component
/// system `[selector | design | grid]`.
///
/// Term by term (selector sector, combination weight): the damping diagonal
/// `C_ρ⁻¹C_ζ` at `(0,0)` with `+1`, the `d` flux pairs
/// `C_ρ^{-½}D_μ⁺C_κ^{½}` / `C_κ^{½}D_μ⁻C_ρ^{-½}` across `(0,μ+1)/(μ+1,0)`
/// with `−1`, and the reaction pair `±C_ρ^{-½}C_γ^{½}` across `(0,d+1)/(d+1,0)`
/// with `+1`. The inverse mass is squared as `(C_ρ^{-½})†·C_ρ^{-½}`, one plain
/// and one adjoint query. Difference backends follow each axis's boundary.
pub fn assemble_a2nd(
    coeffs: &CoefficientSet2nd,
    layout: &OperatorLayout,
) -> Result<BlockEncoding> {
    let s = layout.sys_qubits();
    if coeffs.inv_sqrt_rho.sys_qubits != s {
        return Err(Error::dim(format!(
            "coefficients act on {} qubits but the layout has {s}",
            coeffs.inv_sqrt_rho.sys_qubits
        )));
    }
    let d = layout.grid.d();
    let k = ceil_log2(d + 2);

    let rho_inv = product(&coeffs.inv_sqrt_rho.adjoint(), &coeffs.inv_sqrt_rho)?;
    let damp = product(&rho_inv, &coeffs.zeta)?;
    let mut arms = vec![selector_diag(k, 0, &damp)?];
    let mut ys = vec![C64::new(1.0, 0.0)];

    for mu in 0..d {
        let backend = layout.grid.axes[mu].default_backend();
        let (dp, dm) = diff_be_pair(layout, mu, backend)?;
        let flux_out = product(&coeffs.inv_sqrt_rho, &product(&dp, &coeffs.sqrt_kappa)?)?;
        let flux_in = product(&coeffs.sqrt_kappa, &product(&dm, &coeffs.inv_sqrt_rho)?)?;
        arms.push(selector_offdiag(k, (mu + 1) as u64, &flux_out, &flux_in)?);
        ys.push(C64::new(-1.0, 0.0));
    }

    let reaction = product(&coeffs.inv_sqrt_rho, &coeffs.sqrt_gamma)?;
    arms.push(selector_antisym(k, (d + 1) as u64, &reaction)?);
    ys.push(C64::new(1.0, 0.0));

    lcu(&ys, &arms, "A2nd")
}

/// Assembles the first-order advection–diffusion–reaction operator on
/// `[design | grid]` as the negated generator of
/// `∂_t u = (∇·κ∇ − β·∇ − γ)u`, so `exp(−At)` is the physical semigroup:
/// symmetrized diffusion `D_μ⁺C_κD_μ⁻ + D_μ⁻C_κD_μ⁺` with weight `−½` per
/// ordering (the κ≡1 limit is `−(D⁺D⁻+D⁻D⁺)/2`, the negated standard
/// Laplacian, positive semidefinite so the semigroup contracts), upwind
/// advection `C_{β_μ⁺}D_μ⁻ + C_{β_μ⁻}D_μ⁺` with weight `+1`, and reaction
/// `C_γ` with weight `+1`. The combination norm is `3d+1` over `4d+1`
/// terms.
pub fn assemble_a1st(
    coeffs: &CoefficientSet1st,
    layout: &OperatorLayout,
) -> Result<BlockEncoding> {
    let s = layout.sys_qubits();
    if coeffs.kappa.sys_qubits != s {
        return Err(Error::dim(format!(
            "coefficients act on {} qubits but the layout has {s}",
            coeffs.kappa.sys_qubits
        )));
    }
    let d = layout.grid.d();
    if coeffs.beta.len() != d {
        return Err(Error::dim(format!(
            "need one advection pair per axis ({d}), got {}",
            coeffs.beta.len()
        )));
    }
    let mut arms = Vec::with_capacity(4 * d + 1);
    let mut ys = Vec::with_capacity(4 * d + 1);
    for mu in 0..d {
        let backend = layout.grid.axes[mu].default_backend();
        let (dp, dm) = diff_be_pair(layout, mu, backend)?;
        arms.push(product(&dp, &product(&coeffs.kappa, &dm)?)?);
        ys.push(C64::new(-0.5, 0.0));
        arms.push(product(&dm, &product(&coeffs.kappa, &dp)?)?);
        ys.push(C64::new(-0.5, 0.0));
        let (bp, bm) = &coeffs.beta[mu];
        arms.push(product(bp, &dm)?);
        ys.push(C64::new(1.0, 0.0));
        arms.push(product(bm, &dp)?);
        ys.push(C64::new(1.0, 0.0));
    }
    arms.push(coeffs.gamma.clone());
    ys.push(C64::new(1.0, 0.0));
    lcu(&ys, &arms, "A1st")
}

/// Builds the upwind advection pair from point samples:
/// `β⁺ = max(β, 0)`, `β⁻ = min(β, 0)`, both under one normalization so the
/// split recomposes exactly.
pub fn upwind_pair(
    beta: &[f64],
    alpha: f64,
) -> Result<(BlockEncoding, BlockEncoding)> {
    let plus: Vec<C64> = beta.iter().map(|&b| C64::new(b.max(0.0), 0.0)).collect();
    let minus: Vec<C64> = beta.iter().map(|&b| C64::new(b.min(0.0), 0.0)).collect();
    let p = crate::diagenc::diag_be_from_table(&plus, alpha, Some("u_beta_plus"))?;
    let m = crate::diagenc::diag_be_from_table(&minus, alpha, Some("u_beta_minus"))?;
    Ok((p, m))
}

/// Register plan of the 2D acoustic system: four field components on a
/// two-qubit selector above `[design | x | y]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WaveLayout {
    pub x: AxisGrid,
    pub y: AxisGrid,
    pub design_x: usize,
    pub design_y: usize,
}

impl WaveLayout {
    /// The configuration used throughout the worked example: zero ghosts on
    /// the x axis (the folded fixed-left/zero-slope-right pair) and a
    /// periodic y axis.
    pub fn demo(n: usize) -> Self {
        WaveLayout {
            x: AxisGrid::zero_ghost(n),
            y: AxisGrid::periodic(n),
            design_x: 0,
            design_y: 0,
        }
    }

    pub fn with_design(mut self, mx: usize, my: usize) -> Self {
        self.design_x = mx;
        self.design_y = my;
        self
    }

    /// Layout of the coefficient diagonal this system expects.
    pub fn diag_layout(&self) -> FourierDiagLayout {
        FourierDiagLayout {
            x: crate::diagenc::AxisLayout {
                grid_qubits: self.x.n,
                design_bits: self.design_x,
            },
            y: crate::diagenc::AxisLayout {
                grid_qubits: self.y.n,
                design_bits: self.design_y,
            },
        }
    }

    /// Width of `[design | x | y]` under the selector.
    pub fn inner_sys(&self) -> usize {
        self.diag_layout().sys_qubits()
    }

    /// Width including the two selector qubits.
    pub fn sys_qubits(&self) -> usize {
        self.inner_sys() + 2
    }

    pub fn sel_reg(&self) -> Reg {
        Reg::contiguous(self.inner_sys(), 2)
    }

    fn operator_layout(&self) -> Result<OperatorLayout> {
        Ok(OperatorLayout {
            grid: GridSpec::new(vec![self.x, self.y])?,
            design_bits: self.design_x + self.design_y,
        })
    }
}

/// Assembles the acoustic generator from a diagonal speed encoding `C`:
/// `−(|0⟩⟨1| ⊗ CD_x⁺ + |1⟩⟨0| ⊗ D_x⁻C + |0⟩⟨2| ⊗ CD_y⁺ + |2⟩⟨0| ⊗ D_y⁻C)`.
/// The two flux pairs sit on selector sectors 1 and 2 and are combined with
/// weights `(−1, −1)`; sector 3 reads zero. With a real diagonal `C` and
/// adjoint-paired differences the materialized block is anti-Hermitian.
pub fn assemble_wave_a(c_be: &BlockEncoding, wl: &WaveLayout) -> Result<BlockEncoding> {
    let inner = wl.inner_sys();
    if c_be.sys_qubits != inner {
        return Err(Error::dim(format!(
            "speed encoding acts on {} qubits but the layout has {inner}",
            c_be.sys_qubits
        )));
    }
    let layout = wl.operator_layout()?;
    let (dxp, dxm) = diff_be_pair(&layout, 0, wl.x.default_backend())?;
    let (dyp, dym) = diff_be_pair(&layout, 1, wl.y.default_backend())?;
    let m1 = selector_offdiag(2, 1, &product(c_be, &dxp)?, &product(&dxm, c_be)?)?;
    let m2 = selector_offdiag(2, 2, &product(c_be, &dyp)?, &product(&dym, c_be)?)?;
    lcu(
        &[C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)],
        &[m1, m2],
        "A_wave",
    )
}

/// Circuit preparing the acoustic initial state: the first field component
/// uniform over the two rightmost x-columns (`x ≥ (2^{n_x}−2)/(2^{n_x}−1)`),
/// uniform in y, all other components zero.
pub fn initial_condition_node(wl: &WaveLayout) -> Result<ActionNode> {
    if wl.x.n < 1 {
        return Err(Error::invalid("need at least one x qubit for two columns"));
    }
    let diag = wl.diag_layout();
    let x_reg = diag.x_reg();
    let y_reg = diag.y_reg();
    let mut steps = Vec::new();
    for &bit in &x_reg.bits()[1..] {
        steps.push(ActionNode::pauli_x(bit));
    }
    steps.push(ActionNode::hadamard(x_reg.bits()[0]));
    for &bit in y_reg.bits() {
        steps.push(ActionNode::hadamard(bit));
    }
    Ok(ActionNode::compose(steps))
}

/// The prepared initial state: norm exactly 1, every populated amplitude
/// `2^{-(n_y+1)/2}`.
pub fn prepare_initial(wl: &WaveLayout) -> Result<StateVector> {
    let node = initial_condition_node(wl)?;
    let mut state = StateVector::basis(wl.sys_qubits(), 0);
    statevec::apply(&node, &mut state)?;
    Ok(state)
}

/// Named-oracle query totals of an encoding, with gate tallies stripped.
pub fn oracle_queries(be: &BlockEncoding) -> BTreeMap<String, u64> {
    be.counters
        .iter()
        .filter(|(k, _)| k.as_str() != becalc::TOFFOLI_KEY)
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}
