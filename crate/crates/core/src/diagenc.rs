//! Diagonal block-encodings of grid-sampled functions.
//!
//! Coefficient functions enter the framework as trigonometric polynomials
//! `f(x,y) = Σ_{k,l} c_{k,l} e^{iπkx} e^{iπly}` of period 2 per axis
//! ([`FourierSeries`]), fitted from point values by quadrature on the even
//! extension ([`fit_fourier_1d`], [`fit_fourier_2d`]). The encoder
//! [`diag_be_fourier`] turns a series into a block-encoding of
//! `diag(f(x_i, y_j))` over the inclusive grid `x_i = i/(2^n − 1)`:
//! a state-preparation pair loads the coefficient tensor on per-axis prep
//! registers (`⌈log₂(2K+1)⌉` bits each) and phase ladders apply
//! `e^{iπk·x}` separably per grid qubit, with normalization `α = ‖c‖₁` and no
//! encoding error relative to the series.
//!
//! Axes may carry *design registers*: extra system qubits whose value `v`
//! shifts the argument by `ξ(v) = v/(2^m − 1)`, so one circuit encodes the
//! whole family `diag(f(x + ξ_x, y + ξ_y))` — shifts cost phase gates on the
//! design bits inside the same combination, never extra ancillas.
//!
//! Also here: table-driven diagonal encodings (multiplexed corner rotations),
//! rectangular region flags, and truncation-degree bounds for choosing `K`.

use num_complex::Complex64 as C64;

use crate::becalc::{gates, BlockEncoding, StatePreparationPair};
use crate::error::Error;
use crate::linalg::ComplexMatrix;
use crate::statevec::{unitary_with_first_column, ActionNode, CtrlPred, Reg};
use crate::Result;

/// Coordinate of grid point `i` on `n` qubits: `i/(2^n − 1)`, endpoints inclusive.
pub fn grid_coordinate(i: u64, n: usize) -> f64 {
    debug_assert!(n >= 1 && i < (1u64 << n));
    i as f64 / ((1u64 << n) - 1) as f64
}

/// Design-register value `v` on `m` bits mapped to a shift in `[0, 1]`.
pub fn design_value(v: u64, m: usize) -> f64 {
    debug_assert!(m >= 1 && v < (1u64 << m));
    v as f64 / ((1u64 << m) - 1) as f64
}

/// Truncated 2D Fourier series of period 2 per axis:
/// `f(x,y) = Σ_{|k|≤deg_x, |l|≤deg_y} c_{k,l} e^{iπkx} e^{iπly}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries {
    deg_x: usize,
    deg_y: usize,
    /// Row-major over `(k + deg_x, l + deg_y)`.
    coeffs: Vec<C64>,
}

impl FourierSeries {
    pub fn new(deg_x: usize, deg_y: usize, coeffs: Vec<C64>) -> Result<Self> {
        let want = (2 * deg_x + 1) * (2 * deg_y + 1);
        if coeffs.len() != want {
            return Err(Error::dim(format!(
                "expected {want} coefficients for degrees ({deg_x},{deg_y}), got {}",
                coeffs.len()
            )));
        }
        if !coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("series coefficients"));
        }
        Ok(FourierSeries {
            deg_x,
            deg_y,
            coeffs,
        })
    }

    pub fn constant(c: f64) -> Self {
        FourierSeries {
            deg_x: 0,
            deg_y: 0,
            coeffs: vec![C64::new(c, 0.0)],
        }
    }

    pub fn deg_x(&self) -> usize {
        self.deg_x
    }

    pub fn deg_y(&self) -> usize {
        self.deg_y
    }

    fn index(&self, k: i64, l: i64) -> usize {
        let kk = (k + self.deg_x as i64) as usize;
        let ll = (l + self.deg_y as i64) as usize;
        kk * (2 * self.deg_y + 1) + ll
    }

    pub fn coeff(&self, k: i64, l: i64) -> C64 {
        if k.unsigned_abs() as usize > self.deg_x || l.unsigned_abs() as usize > self.deg_y {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[self.index(k, l)]
    }

    pub fn set_coeff(&mut self, k: i64, l: i64, c: C64) {
        let idx = self.index(k, l);
        self.coeffs[idx] = c;
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `‖c‖₁`: the normalization the diagonal encoder reports.
    pub fn l1(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).sum()
    }

    pub fn eval(&self, x: f64, y: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in -(self.deg_x as i64)..=(self.deg_x as i64) {
            for l in -(self.deg_y as i64)..=(self.deg_y as i64) {
                let c = self.coeffs[self.index(k, l)];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let phase = std::f64::consts::PI * (k as f64 * x + l as f64 * y);
                acc += c * C64::from_polar(1.0, phase);
            }
        }
        acc
    }

    /// Series of `(x, y) ↦ f(x + dx, y + dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> FourierSeries {
        let mut out = self.clone();
        for k in -(self.deg_x as i64)..=(self.deg_x as i64) {
            for l in -(self.deg_y as i64)..=(self.deg_y as i64) {
                let idx = self.index(k, l);
                let phase = std::f64::consts::PI * (k as f64 * dx + l as f64 * dy);
                out.coeffs[idx] = self.coeffs[idx] * C64::from_polar(1.0, phase);
            }
        }
        out
    }

    /// Whether `c_{−k,−l} = conj(c_{k,l})` (real-valued series) to within `tol`.
    pub fn is_real_valued(&self, tol: f64) -> bool {
        for k in -(self.deg_x as i64)..=(self.deg_x as i64) {
            for l in -(self.deg_y as i64)..=(self.deg_y as i64) {
                let a = self.coeffs[self.index(k, l)];
                let b = self.coeffs[self.index(-k, -l)];
                if (a - b.conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Largest coefficient magnitude at ring `max(|k|,|l|) = r`, for decay scans.
    pub fn ring_max(&self, r: usize) -> f64 {
        let mut best = 0.0f64;
        for k in -(self.deg_x as i64)..=(self.deg_x as i64) {
            for l in -(self.deg_y as i64)..=(self.deg_y as i64) {
                if k.unsigned_abs().max(l.unsigned_abs()) as usize == r {
                    best = best.max(self.coeffs[self.index(k, l)].norm());
                }
            }
        }
        best
    }

    /// CSV serialization: header `k,l,re,im`, one row per coefficient, 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,l,re,im\n");
        for k in -(self.deg_x as i64)..=(self.deg_x as i64) {
            for l in -(self.deg_y as i64)..=(self.deg_y as i64) {
                let c = self.coeffs[self.index(k, l)];
                s.push_str(&format!("{k},{l},{:.16e},{:.16e}\n", c.re, c.im));
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<FourierSeries> {
        let mut rows: Vec<(i64, i64, C64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('k')) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(Error::invalid(format!(
                    "line {}: expected 4 comma-separated fields",
                    lineno + 1
                )));
            }
            let k: i64 = parts[0]
                .parse()
                .map_err(|e| Error::invalid(format!("line {}: bad k: {e}", lineno + 1)))?;
            let l: i64 = parts[1]
                .parse()
                .map_err(|e| Error::invalid(format!("line {}: bad l: {e}", lineno + 1)))?;
            let re: f64 = parts[2]
                .parse()
                .map_err(|e| Error::invalid(format!("line {}: bad re: {e}", lineno + 1)))?;
            let im: f64 = parts[3]
                .parse()
                .map_err(|e| Error::invalid(format!("line {}: bad im: {e}", lineno + 1)))?;
            rows.push((k, l, C64::new(re, im)));
        }
        if rows.is_empty() {
            return Err(Error::invalid("no coefficient rows in CSV"));
        }
        let deg_x = rows.iter().map(|r| r.0.unsigned_abs()).max().unwrap() as usize;
        let deg_y = rows.iter().map(|r| r.1.unsigned_abs()).max().unwrap() as usize;
        let mut series = FourierSeries::new(
            deg_x,
            deg_y,
            vec![C64::new(0.0, 0.0); (2 * deg_x + 1) * (2 * deg_y + 1)],
        )?;
        for (k, l, c) in rows {
            series.set_coeff(k, l, c);
        }
        Ok(series)
    }
}

/// A fitted series together with its sup-norm residual on the unit domain.
#[derive(Clone, Debug)]
pub struct FitReport {
    pub series: FourierSeries,
    /// `sup |f − series|` measured on a 4×-refined uniform grid of `[0,1]`
    /// (or `[0,1]²`).
    pub sup_residual: f64,
}

/// Fits a 1D function on `[0,1]` by quadrature on its even, period-2 extension.
///
/// `c_k = (1/Q) Σ_q f_ext(x_q) e^{−iπk x_q}` over `x_q = −1 + 2q/Q`. Evenness
/// makes the coefficients real and symmetric; both are enforced exactly. The
/// rule is exact (up to roundoff) for trigonometric polynomials of degree at
/// most `Q/2 − degree − 1`.
pub fn fit_fourier_1d(
    f: &dyn Fn(f64) -> f64,
    degree: usize,
    quad_points: usize,
) -> Result<FitReport> {
    if quad_points < 4 * (degree + 1) {
        return Err(Error::invalid(format!(
            "need at least {} quadrature points for degree {degree}",
            4 * (degree + 1)
        )));
    }
    let q = quad_points;
    let samples: Vec<f64> = (0..q)
        .map(|i| {
            let x = -1.0 + 2.0 * i as f64 / q as f64;
            f(x.abs())
        })
        .collect();
    if !samples.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("function samples"));
    }
    let mut coeffs = vec![C64::new(0.0, 0.0); 2 * degree + 1];
    for k in 0..=degree {
        let mut acc = 0.0f64;
        for (i, &s) in samples.iter().enumerate() {
            let x = -1.0 + 2.0 * i as f64 / q as f64;
            acc += s * (std::f64::consts::PI * k as f64 * x).cos();
        }
        let c = acc / q as f64;
        coeffs[degree + k] = C64::new(c, 0.0);
        coeffs[degree - k] = C64::new(c, 0.0);
    }
    let series = FourierSeries::new(degree, 0, coeffs)?;
    let refined = 4 * q;
    let mut sup = 0.0f64;
    for i in 0..=refined {
        let x = i as f64 / refined as f64;
        let err = (f(x) - series.eval(x, 0.0).re).abs();
        sup = sup.max(err);
    }
    Ok(FitReport {
        series,
        sup_residual: sup,
    })
}

/// 2D fit on `[0,1]²` by the tensor quadrature rule on the even extensions.
pub fn fit_fourier_2d(
    f: &dyn Fn(f64, f64) -> f64,
    deg_x: usize,
    deg_y: usize,
    quad_points: usize,
) -> Result<FitReport> {
    let need = 4 * (deg_x.max(deg_y) + 1);
    if quad_points < need {
        return Err(Error::invalid(format!(
            "need at least {need} quadrature points for degrees ({deg_x},{deg_y})"
        )));
    }
    let q = quad_points;
    let xs: Vec<f64> = (0..q).map(|i| -1.0 + 2.0 * i as f64 / q as f64).collect();
    let mut grid = vec![0.0f64; q * q];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            let v = f(x.abs(), y.abs());
            if !v.is_finite() {
                return Err(Error::NonFinite("function samples"));
            }
            grid[i * q + j] = v;
        }
    }
    let zeros = vec![C64::new(0.0, 0.0); (2 * deg_x + 1) * (2 * deg_y + 1)];
    let mut series = FourierSeries::new(deg_x, deg_y, zeros)?;
    for k in 0..=deg_x {
        for l in 0..=deg_y {
            let mut acc = 0.0f64;
            for (i, &x) in xs.iter().enumerate() {
                let ck = (std::f64::consts::PI * k as f64 * x).cos();
                for (j, &y) in xs.iter().enumerate() {
                    acc += grid[i * q + j] * ck * (std::f64::consts::PI * l as f64 * y).cos();
                }
            }
            let c = C64::new(acc / (q * q) as f64, 0.0);
            // Even in both axes: all four sign combinations share the value.
            series.set_coeff(k as i64, l as i64, c);
            series.set_coeff(-(k as i64), l as i64, c);
            series.set_coeff(k as i64, -(l as i64), c);
            series.set_coeff(-(k as i64), -(l as i64), c);
        }
    }
    let refined = 2 * q;
    let mut sup = 0.0f64;
    for i in 0..=refined {
        for j in 0..=refined {
            let x = i as f64 / refined as f64;
            let y = j as f64 / refined as f64;
            let err = (f(x, y) - series.eval(x, y).re).abs();
            sup = sup.max(err);
        }
    }
    Ok(FitReport {
        series,
        sup_residual: sup,
    })
}

/// Smallest degree `K` with geometric-tail bound
/// `2·M·e^{−a(K+1)}/(1 − e^{−a}) ≤ eps`, for coefficients obeying
/// `|c_k| ≤ M e^{−a|k|}`: `K ≥ (1/a)·ln(2M / ((1 − e^{−a})·eps)) − 1`.
pub fn degree_for_analytic_decay(m: f64, a: f64, eps: f64) -> Result<usize> {
    if !(m > 0.0 && a > 0.0 && eps > 0.0) || !(m.is_finite() && a.is_finite() && eps.is_finite()) {
        return Err(Error::invalid("decay bound needs positive finite M, a, eps"));
    }
    let k = (2.0 * m / ((1.0 - (-a).exp()) * eps)).ln() / a - 1.0;
    Ok(k.ceil().max(0.0) as usize)
}

/// Degree for a `ν`-times differentiable function with total variation bound
/// `V` on the ν-th derivative: `K = ⌈(V / (π·ν·eps))^{1/ν}⌉`.
pub fn degree_for_smoothness(v: f64, nu: u32, eps: f64) -> Result<usize> {
    if !(v > 0.0 && nu >= 1 && eps > 0.0) || !(v.is_finite() && eps.is_finite()) {
        return Err(Error::invalid("smoothness bound needs positive finite V, ν, eps"));
    }
    let k = (v / (std::f64::consts::PI * nu as f64 * eps)).powf(1.0 / nu as f64);
    Ok(k.ceil().max(1.0) as usize)
}

/// Per-axis register widths for the diagonal encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisLayout {
    /// Grid qubits (0 disables the axis entirely).
    pub grid_qubits: usize,
    /// Design-shift qubits (0 = no shift register on this axis).
    pub design_bits: usize,
}

impl AxisLayout {
    pub fn grid(n: usize) -> Self {
        AxisLayout {
            grid_qubits: n,
            design_bits: 0,
        }
    }
}

/// System layout of a 2D diagonal encoding, low bits first:
/// `[... design_x | design_y | x | y]` reading MSB→LSB.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourierDiagLayout {
    pub x: AxisLayout,
    pub y: AxisLayout,
}

impl FourierDiagLayout {
    pub fn sys_qubits(&self) -> usize {
        self.x.grid_qubits + self.y.grid_qubits + self.x.design_bits + self.y.design_bits
    }

    pub fn y_reg(&self) -> Reg {
        Reg::contiguous(0, self.y.grid_qubits)
    }

    pub fn x_reg(&self) -> Reg {
        Reg::contiguous(self.y.grid_qubits, self.x.grid_qubits)
    }

    pub fn design_y_reg(&self) -> Reg {
        Reg::contiguous(
            self.y.grid_qubits + self.x.grid_qubits,
            self.y.design_bits,
        )
    }

    pub fn design_x_reg(&self) -> Reg {
        Reg::contiguous(
            self.y.grid_qubits + self.x.grid_qubits + self.y.design_bits,
            self.x.design_bits,
        )
    }

    /// All grid/design values at a global system index, as `(x, ξx, y, ξy)`.
    pub fn coordinates(&self, idx: usize) -> (f64, f64, f64, f64) {
        let x = if self.x.grid_qubits > 0 {
            grid_coordinate(self.x_reg().extract(idx), self.x.grid_qubits)
        } else {
            0.0
        };
        let y = if self.y.grid_qubits > 0 {
            grid_coordinate(self.y_reg().extract(idx), self.y.grid_qubits)
        } else {
            0.0
        };
        let xix = if self.x.design_bits > 0 {
            design_value(self.design_x_reg().extract(idx), self.x.design_bits)
        } else {
            0.0
        };
        let xiy = if self.y.design_bits > 0 {
            design_value(self.design_y_reg().extract(idx), self.y.design_bits)
        } else {
            0.0
        };
        (x, xix, y, xiy)
    }
}

fn ceil_log2(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

/// Block-encodes `diag(f(x + ξ_x, y + ξ_y))` on the layout's system register.
///
/// `α = ‖c‖₁`, ancillas `⌈log₂(2·deg_x+1)⌉ + ⌈log₂(2·deg_y+1)⌉` (the per-axis
/// prep registers), encoding error 0 relative to the series. With
/// `oracle_name` set, the result counts as one invocation of that named
/// oracle; gate tallies (prep pair + phase ladders) are tracked either way.
pub fn diag_be_fourier(
    series: &FourierSeries,
    layout: &FourierDiagLayout,
    oracle_name: Option<&str>,
) -> Result<BlockEncoding> {
    if layout.x.grid_qubits == 0 && series.deg_x() > 0 {
        return Err(Error::invalid("series varies in x but the x axis has no qubits"));
    }
    if layout.y.grid_qubits == 0 && series.deg_y() > 0 {
        return Err(Error::invalid("series varies in y but the y axis has no qubits"));
    }
    if layout.x.design_bits > 0 && layout.x.grid_qubits == 0
        || layout.y.design_bits > 0 && layout.y.grid_qubits == 0
    {
        return Err(Error::invalid("design bits on a disabled axis"));
    }
    let alpha = series.l1();
    if !(alpha > 0.0) {
        return Err(Error::invalid("series has zero weight"));
    }
    let s = layout.sys_qubits();
    let kx = series.deg_x();
    let ky = series.deg_y();
    let mx = 2 * kx + 1;
    let my = 2 * ky + 1;
    let bx = ceil_log2(mx);
    let by = ceil_log2(my);
    let ancillas = bx + by;

    // Prep registers: y-axis low, x-axis above.
    let prep_y = Reg::contiguous(s, by);
    let prep_x = Reg::contiguous(s + by, bx);

    // Coefficient tensor laid into the joint register (x slot high bits).
    let mut weights = vec![C64::new(0.0, 0.0); 1 << (bx + by)];
    for k in -(kx as i64)..=(kx as i64) {
        for l in -(ky as i64)..=(ky as i64) {
            let px = (k + kx as i64) as usize;
            let py = (l + ky as i64) as usize;
            weights[(px << by) | py] = series.coeff(k, l);
        }
    }

    let mut steps: Vec<ActionNode> = Vec::new();
    let joint_prep = prep_y.then(&prep_x);
    let pair = if ancillas > 0 {
        Some(StatePreparationPair::for_weights(&weights, ancillas)?)
    } else {
        None
    };
    if let Some(p) = &pair {
        steps.push(ActionNode::prepare(joint_prep.clone(), p.prep.clone())?);
    } else {
        // Constant series: a pure global phase carries arg(c₀₀).
        let phase = weights[0].arg();
        if phase != 0.0 {
            steps.push(ActionNode::global_phase(phase));
        }
    }

    // Per-axis phase ladder: one diagonal over [grid | design | prep] whose
    // phase at (i, v, p) is π·(p − K)·(grid(i) + ξ(v)).
    let mut axis_ladder = |grid_reg: Reg, design_reg: Reg, prep_reg: Reg, deg: usize| {
        let n = grid_reg.width();
        let m = design_reg.width();
        let b = prep_reg.width();
        if b == 0 || n == 0 {
            return;
        }
        let full = grid_reg.then(&design_reg).then(&prep_reg);
        let terms = 2 * deg + 1;
        let mut phases = vec![0.0f64; 1 << (n + m + b)];
        for (val, ph) in phases.iter_mut().enumerate() {
            let i = val & ((1 << n) - 1);
            let v = (val >> n) & ((1 << m) - 1);
            let p = val >> (n + m);
            if p >= terms {
                continue; // padding slot, never populated
            }
            let kk = p as i64 - deg as i64;
            let coord = grid_coordinate(i as u64, n)
                + if m > 0 { design_value(v as u64, m) } else { 0.0 };
            *ph = std::f64::consts::PI * kk as f64 * coord;
        }
        steps.push(ActionNode::PhaseDiag { reg: full, phases });
    };
    axis_ladder(layout.x_reg(), layout.design_x_reg(), prep_x.clone(), kx);
    axis_ladder(layout.y_reg(), layout.design_y_reg(), prep_y.clone(), ky);

    if let Some(p) = &pair {
        steps.push(ActionNode::adjoint(ActionNode::prepare(
            joint_prep,
            p.unprep.clone(),
        )?));
    }

    // Reference diagonal over the full system (design sectors included).
    let reference = if s <= 9 {
        let dim = 1usize << s;
        let mut diag = Vec::with_capacity(dim);
        for idx in 0..dim {
            let (x, xix, y, xiy) = layout.coordinates(idx);
            diag.push(series.eval(x + xix, y + xiy));
        }
        Some(ComplexMatrix::from_diag(&diag))
    } else {
        None
    };

    let nonzero = weights.iter().filter(|w| w.norm_sqr() > 0.0).count();
    let ladder_gates = gates::phase_ladder_gates(bx, layout.x.grid_qubits + layout.x.design_bits)
        + gates::phase_ladder_gates(by, layout.y.grid_qubits + layout.y.design_bits);
    let mut be = BlockEncoding::new(
        oracle_name.unwrap_or("diag_f"),
        s,
        ancillas,
        alpha,
        0.0,
        ActionNode::compose(steps),
        reference,
    )?
    .with_gates(gates::prep_pair_gates(nonzero) + ladder_gates);
    if let Some(name) = oracle_name {
        be = be.with_counter(name, 1);
    }
    Ok(be)
}

/// Block-encodes an arbitrary diagonal `diag(values)` with one ancilla via
/// multiplexed corner rotations: in sector `v` the ancilla qubit rotates so
/// the zero-block entry reads `values[v]/α`. Requires `max|values| ≤ α`.
/// Gate convention: `2^n` controlled rotations at one two-qubit gate each.
pub fn diag_be_from_table(
    values: &[C64],
    alpha: f64,
    oracle_name: Option<&str>,
) -> Result<BlockEncoding> {
    if values.is_empty() || !values.len().is_power_of_two() {
        return Err(Error::invalid("table length must be a nonzero power of two"));
    }
    let maxv = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(alpha.is_finite() && alpha > 0.0) || maxv > alpha * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "normalization {alpha} does not dominate table (max {maxv})"
        )));
    }
    let n = values.len().trailing_zeros() as usize;
    let sys = Reg::contiguous(0, n);
    let anc_bit = n;
    let mut arms = Vec::with_capacity(values.len());
    for (v, &zval) in values.iter().enumerate() {
        let z = zval / alpha;
        let s = (1.0 - z.norm_sqr()).max(0.0).sqrt();
        let col = vec![z, C64::new(s, 0.0)];
        let rot = unitary_with_first_column(&col)?;
        arms.push((v as u64, ActionNode::prepare(Reg::new(vec![anc_bit]), rot)?));
    }
    let action = ActionNode::Select { reg: sys, arms };
    let reference = if n <= 9 {
        Some(ComplexMatrix::from_diag(values))
    } else {
        None
    };
    let mut be = BlockEncoding::new(
        oracle_name.unwrap_or("diag_table"),
        n,
        1,
        alpha,
        0.0,
        action,
        reference,
    )?
    .with_gates(values.len() as u64);
    if let Some(name) = oracle_name {
        be = be.with_counter(name, 1);
    }
    Ok(be)
}

/// Flips `flag_bit` exactly on the rectangle
/// `x ∈ [x_range.0, x_range.1] ∧ y ∈ [y_range.0, y_range.1]` (inclusive grid
/// index ranges). An axis with an empty register is ignored.
pub fn region_flag_node(
    x_reg: &Reg,
    y_reg: &Reg,
    x_range: (u64, u64),
    y_range: (u64, u64),
    flag_bit: usize,
) -> ActionNode {
    let mut node = ActionNode::pauli_x(flag_bit);
    if y_reg.width() > 0 {
        node = ActionNode::controlled(y_reg.clone(), CtrlPred::InRange(y_range.0, y_range.1), node);
    }
    if x_reg.width() > 0 {
        node = ActionNode::controlled(x_reg.clone(), CtrlPred::InRange(x_range.0, x_range.1), node);
    }
    node
}

/// Named entry point for the design-shifted encoder: `diag(f(x+ξ_x, y+ξ_y))`
/// over `[design | grid]` system registers, one shift register per axis.
/// Same combination as [`diag_be_fourier`] — the shift costs only phase
/// factors on the design bits, never extra ancillas.
pub fn param_diag_be_shift(
    series: &FourierSeries,
    grid_qubits: (usize, usize),
    design_qubits: (usize, usize),
    oracle_name: Option<&str>,
) -> Result<BlockEncoding> {
    let layout = FourierDiagLayout {
        x: AxisLayout {
            grid_qubits: grid_qubits.0,
            design_bits: design_qubits.0,
        },
        y: AxisLayout {
            grid_qubits: grid_qubits.1,
            design_bits: design_qubits.1,
        },
    };
    diag_be_fourier(series, &layout, oracle_name)
}

/// Exact `(1, 1, 0)`-encoding of the affine register value
/// `v(ξ) = lo + (hi − lo)·ξ/(2^m − 1)` on an `m`-qubit register, realized as
/// multiplexed corner rotations with unit normalization. The endpoints must
/// stay inside `[−1, 1]` so every rotation angle exists.
pub fn diag_be_register_value(
    m: usize,
    lo: f64,
    hi: f64,
    oracle_name: Option<&str>,
) -> Result<BlockEncoding> {
    if m == 0 {
        return Err(Error::invalid("register value map needs at least one qubit"));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid("value range must be finite and increasing"));
    }
    if lo.abs() > 1.0 || hi.abs() > 1.0 {
        return Err(Error::invalid(
            "register values must stay within [-1, 1] for a unit-normalized encoding",
        ));
    }
    let values: Vec<C64> = (0..1u64 << m)
        .map(|v| C64::new(lo + (hi - lo) * design_value(v, m), 0.0))
        .collect();
    let mut be = diag_be_from_table(&values, 1.0, oracle_name)?;
    if oracle_name.is_none() {
        be.label = format!("reg_value[{m}]");
    }
    Ok(be)
}

/// A register-against-register comparator: flips `flag_bit` exactly when the
/// integer in `x_reg` is ≥ the integer in `xi_reg` (inclusive threshold).
#[derive(Clone, Debug)]
pub struct ComparatorFlag {
    pub node: ActionNode,
    /// Multi-controlled flag toggles — the Toffoli-class step count, always
    /// ≤ 2·max(width_x, width_ξ).
    pub toffoli_steps: u64,
    /// Plain XOR gates (compute + uncompute sweeps).
    pub cnot_gates: u64,
}

/// Builds the comparator circuit. An XOR sweep folds `x`'s low bits into the
/// threshold register, so bit `j` afterwards reads `e_j = x_j ⊕ ξ_j`; the
/// flag then toggles once for equality (all `e_j = 0`) and once per position
/// `t` that can be the highest differing bit with `x_t = 1`, after which the
/// sweep is undone. Both registers come back unchanged and the whole circuit
/// is an involution, so it doubles as its own uncomputation.
pub fn comparator_flag(x_reg: &Reg, xi_reg: &Reg, flag_bit: usize) -> Result<ComparatorFlag> {
    let xb = x_reg.bits().to_vec();
    let tb = xi_reg.bits().to_vec();
    let mut seen = std::collections::BTreeSet::new();
    for &bit in xb.iter().chain(tb.iter()).chain(std::iter::once(&flag_bit)) {
        if !seen.insert(bit) {
            return Err(Error::invalid(
                "comparator registers and flag must be pairwise disjoint",
            ));
        }
    }
    let n = xb.len();
    let m = tb.len();
    let wmin = n.min(m);
    let wmax = n.max(m);
    // Carrier of e_j: the XORed threshold bit where both registers have
    // width, the raw bit of the longer register above that.
    let ebit = |j: usize| if j < wmin || m > n { tb[j] } else { xb[j] };

    let xor_sweep: Vec<ActionNode> = (0..wmin)
        .map(|j| {
            ActionNode::controlled(
                Reg::new(vec![xb[j]]),
                CtrlPred::AllOnes,
                ActionNode::pauli_x(tb[j]),
            )
        })
        .collect();

    let mut toggles: Vec<ActionNode> = Vec::new();
    if wmax == 0 {
        toggles.push(ActionNode::pauli_x(flag_bit)); // 0 ≥ 0 unconditionally
    } else {
        let all_e: Vec<usize> = (0..wmax).map(ebit).collect();
        toggles.push(ActionNode::controlled(
            Reg::new(all_e),
            CtrlPred::Equals(0),
            ActionNode::pauli_x(flag_bit),
        ));
    }
    // Strictly-greater cases: highest differing bit t with x_t = 1. Above the
    // shared width, a set x bit is itself the difference; a set ξ bit there
    // can only mean x < ξ, so it contributes no toggle.
    for t in 0..n {
        let mut bits: Vec<usize> = (t..wmax).map(ebit).collect();
        let mut want = 1u64;
        if t < wmin {
            want |= 1u64 << bits.len();
            bits.push(xb[t]);
        }
        toggles.push(ActionNode::controlled(
            Reg::new(bits),
            CtrlPred::Equals(want),
            ActionNode::pauli_x(flag_bit),
        ));
    }

    let toffoli_steps = toggles.len() as u64;
    let cnot_gates = 2 * wmin as u64;
    let mut steps = xor_sweep.clone();
    steps.extend(toggles);
    steps.extend(xor_sweep);
    Ok(ComparatorFlag {
        node: ActionNode::compose(steps),
        toffoli_steps,
        cnot_gates,
    })
}

/// One branch of a piecewise diagonal: a series in `x` alone plus — for every
/// piece after the base — the width of the threshold register carrying its
/// lower boundary. `pattern` overrides the flag-register value that selects
/// the piece (default: thermometer code, the first `i` flags set for piece
/// `i`, which reads as ordered intervals when the thresholds are sorted).
#[derive(Clone, Debug)]
pub struct PiecewisePiece {
    pub series: FourierSeries,
    pub threshold_bits: Option<usize>,
    pub pattern: Option<u64>,
}

impl PiecewisePiece {
    /// The base piece, active below every threshold.
    pub fn base(series: FourierSeries) -> Self {
        PiecewisePiece {
            series,
            threshold_bits: None,
            pattern: None,
        }
    }

    /// A piece that takes over at its own `threshold_bits`-wide register.
    pub fn above(series: FourierSeries, threshold_bits: usize) -> Self {
        PiecewisePiece {
            series,
            threshold_bits: Some(threshold_bits),
            pattern: None,
        }
    }
}

/// Diagonal block-encoding of a piecewise function with adjustable interval
/// boundaries: system `[ξ_last | … | ξ_1 | x]`, one comparator flag per
/// threshold register (computed, consumed as a control, uncomputed), and each
/// piece's coefficient combination applied only where the flag register
/// matches that piece's pattern. All pieces share `α = max_i ‖c_i‖₁`; the
/// prep register carries two spare slots that absorb the slack of the
/// lighter pieces, so every sector encodes its own piece exactly. Sectors
/// whose flag vector matches no pattern (unsorted thresholds) fall through to
/// the identity and read `α` on the diagonal.
pub fn piecewise_diag_be(
    pieces: &[PiecewisePiece],
    n: usize,
    oracle_name: Option<&str>,
) -> Result<BlockEncoding> {
    if pieces.is_empty() {
        return Err(Error::invalid("piecewise encoder needs at least one piece"));
    }
    if n == 0 {
        return Err(Error::invalid("piecewise encoder needs a coordinate register"));
    }
    if pieces[0].threshold_bits.is_some() {
        return Err(Error::invalid("the base piece has no lower threshold"));
    }
    for (i, p) in pieces.iter().enumerate() {
        if p.series.deg_y() != 0 {
            return Err(Error::invalid("piecewise pieces must vary in x alone"));
        }
        if i > 0 && p.threshold_bits.is_none_or(|m| m == 0) {
            return Err(Error::invalid(
                "each piece above the base needs a threshold register",
            ));
        }
    }
    let flags = pieces.len() - 1;

    // Resolved flag patterns. Two pieces answering to one pattern would both
    // fire on the same sector, so duplicates are rejected outright.
    let mut patterns: Vec<u64> = Vec::with_capacity(pieces.len());
    for (i, p) in pieces.iter().enumerate() {
        let pat = p.pattern.unwrap_or((1u64 << i) - 1);
        if flags > 0 && pat >= (1u64 << flags) {
            return Err(Error::invalid(format!(
                "flag pattern {pat:#b} does not fit {flags} flag bits"
            )));
        }
        if patterns.contains(&pat) {
            return Err(Error::invalid(format!(
                "overlapping flag patterns: {pat:#b} selects two pieces"
            )));
        }
        patterns.push(pat);
    }

    let alpha = pieces.iter().map(|p| p.series.l1()).fold(0.0f64, f64::max);
    if !(alpha > 0.0) {
        return Err(Error::invalid("every piece has zero weight"));
    }
    let max_terms = pieces
        .iter()
        .map(|p| 2 * p.series.deg_x() + 1)
        .max()
        .unwrap_or(1);
    let b = ceil_log2(max_terms + 2); // two spare slots absorb per-piece slack

    // System layout: threshold registers stacked above the coordinate.
    let x_reg = Reg::contiguous(0, n);
    let mut xi_regs: Vec<Reg> = Vec::with_capacity(flags);
    let mut off = n;
    for p in pieces.iter().skip(1) {
        let m = p.threshold_bits.unwrap_or(0);
        xi_regs.push(Reg::contiguous(off, m));
        off += m;
    }
    let s = off;
    let flag_reg = Reg::contiguous(s, flags);
    let prep_reg = Reg::contiguous(s + flags, b);
    let ancillas = flags + b;

    // Threshold flags f_i = [x ≥ ξ_i].
    let mut comp_toffolis = 0u64;
    let mut comp_cnots = 0u64;
    let mut comparators = Vec::with_capacity(flags);
    for (i, xi) in xi_regs.iter().enumerate() {
        let cmp = comparator_flag(&x_reg, xi, s + i)?;
        comp_toffolis += cmp.toffoli_steps;
        comp_cnots += cmp.cnot_gates;
        comparators.push(cmp.node);
    }

    let mut steps: Vec<ActionNode> = comparators.clone();
    let mut gate_count = 0u64;
    for (piece, &pat) in pieces.iter().zip(&patterns) {
        let deg = piece.series.deg_x();
        let terms = 2 * deg + 1;
        let slack = (1.0 - piece.series.l1() / alpha).max(0.0);
        let dim = 1usize << b;
        // Asymmetric prep pair: per populated slot the column product is
        // c_k/α; the slack weight sits in different slots of the two columns,
        // so it never reaches the block.
        let mut l_col = vec![C64::new(0.0, 0.0); dim];
        let mut r_col = vec![C64::new(0.0, 0.0); dim];
        for p in 0..terms {
            let ck = piece.series.coeff(p as i64 - deg as i64, 0);
            let mag = (ck.norm() / alpha).sqrt();
            l_col[p] = C64::new(mag, 0.0);
            r_col[p] = C64::from_polar(mag, ck.arg());
        }
        l_col[terms] = C64::new(slack.sqrt(), 0.0);
        r_col[terms + 1] = C64::new(slack.sqrt(), 0.0);
        let u_r = unitary_with_first_column(&r_col)?;
        let u_l = unitary_with_first_column(&l_col)?;

        // Phase ladder on [x | prep]: slot p applies e^{iπ(p−K)x_j}; the
        // slack slots stay inert.
        let mut phases = vec![0.0f64; 1 << (n + b)];
        for (val, ph) in phases.iter_mut().enumerate() {
            let i = val & ((1 << n) - 1);
            let p = val >> n;
            if p >= terms {
                continue;
            }
            let kk = p as i64 - deg as i64;
            *ph = std::f64::consts::PI * kk as f64 * grid_coordinate(i as u64, n);
        }
        let body = ActionNode::compose(vec![
            ActionNode::prepare(prep_reg.clone(), u_r)?,
            ActionNode::PhaseDiag {
                reg: x_reg.then(&prep_reg),
                phases,
            },
            ActionNode::adjoint(ActionNode::prepare(prep_reg.clone(), u_l)?),
        ]);
        steps.push(if flags == 0 {
            body
        } else {
            ActionNode::controlled(flag_reg.clone(), CtrlPred::Equals(pat), body)
        });
        let nonzero = terms + if slack > 0.0 { 2 } else { 0 };
        gate_count += gates::prep_pair_gates(nonzero) + gates::phase_ladder_gates(b, n);
    }
    steps.extend(comparators);

    // Reference: per sector, the piece whose pattern the comparator flags
    // select; unmatched sectors fall through to the identity.
    let reference = if s <= 9 {
        let dim = 1usize << s;
        let mut diag = Vec::with_capacity(dim);
        for idx in 0..dim {
            let xv = x_reg.extract(idx);
            let mut fl = 0u64;
            for (i, xi) in xi_regs.iter().enumerate() {
                if xv >= xi.extract(idx) {
                    fl |= 1 << i;
                }
            }
            diag.push(match patterns.iter().position(|&p| p == fl) {
                Some(i) => pieces[i].series.eval(grid_coordinate(xv, n), 0.0),
                None => C64::new(alpha, 0.0),
            });
        }
        Some(ComplexMatrix::from_diag(&diag))
    } else {
        None
    };

    let pattern_toffolis = if flags > 0 {
        2 * pieces.len() as u64 * gates::and_ladder_toffolis(flags)
    } else {
        0
    };
    let mut be = BlockEncoding::new(
        oracle_name.unwrap_or("piecewise_diag"),
        s,
        ancillas,
        alpha,
        0.0,
        ActionNode::compose(steps),
        reference,
    )?
    .with_gates(gate_count + comp_cnots)
    .with_toffolis(2 * comp_toffolis + pattern_toffolis);
    if let Some(name) = oracle_name {
        be = be.with_counter(name, 1);
    }
    Ok(be)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fit_recovers_constant() {
        let rep = fit_fourier_1d(&|_| 0.7, 2, 64).unwrap();
        assert!((rep.series.coeff(0, 0).re - 0.7).abs() < 1e-14);
        for k in 1..=2i64 {
            assert!(rep.series.coeff(k, 0).norm() < 1e-14);
        }
        assert!(rep.sup_residual < 1e-13);
    }

    #[test]
    fn fit_recovers_pure_mode() {
        let rep = fit_fourier_1d(&|x| (std::f64::consts::PI * x).cos(), 3, 128).unwrap();
        assert!((rep.series.coeff(1, 0).re - 0.5).abs() < 1e-13);
        assert!((rep.series.coeff(-1, 0).re - 0.5).abs() < 1e-13);
        assert!(rep.series.coeff(0, 0).norm() < 1e-13);
        assert!(rep.series.coeff(2, 0).norm() < 1e-13);
        assert!(rep.sup_residual < 1e-12);
    }

    #[test]
    fn fit_residual_decay_tracks_smoothness_class() {
        // A Gaussian bump has derivative kinks at 0 and 1 after even extension,
        // so its residual falls only algebraically (~1/K); a function that is
        // already smooth and period-1 falls geometrically.
        let g = |x: f64| (-(x - 0.5) * (x - 0.5) / (2.0 * 0.04)).exp();
        let g4 = fit_fourier_1d(&g, 4, 256).unwrap().sup_residual;
        let g8 = fit_fourier_1d(&g, 8, 256).unwrap().sup_residual;
        let g16 = fit_fourier_1d(&g, 16, 256).unwrap().sup_residual;
        assert!(g8 < g4 && g16 < g8, "not monotone: {g4:.3e} {g8:.3e} {g16:.3e}");
        assert!(g16 > 1e-3, "kinked extension should converge slowly, got {g16:.3e}");

        let e = |x: f64| (2.0 * std::f64::consts::PI * x).cos().exp();
        let e4 = fit_fourier_1d(&e, 4, 256).unwrap().sup_residual;
        let e8 = fit_fourier_1d(&e, 8, 256).unwrap().sup_residual;
        assert!(e8 < 1e-3, "smooth periodic target should converge fast, got {e8:.3e}");
        assert!(e8 < e4 / 50.0, "decay not geometric: {e4:.3e} -> {e8:.3e}");
        assert!(e8 < g8 / 10.0);
    }

    #[test]
    fn fit_2d_separable_product() {
        let f = |x: f64, y: f64| {
            (std::f64::consts::PI * x).cos() * (2.0 * std::f64::consts::PI * y).cos()
        };
        let rep = fit_fourier_2d(&f, 2, 3, 64).unwrap();
        // cos(πx)cos(2πy) splits into the four modes (±1, ±2), weight 1/4 each.
        assert!((rep.series.coeff(1, 2).re - 0.25).abs() < 1e-12);
        assert!((rep.series.coeff(-1, -2).re - 0.25).abs() < 1e-12);
        assert!(rep.series.coeff(0, 0).norm() < 1e-12);
        assert!(rep.sup_residual < 1e-11);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut s = FourierSeries::new(2, 1, vec![c(0.0, 0.0); 15]).unwrap();
        s.set_coeff(0, 0, c(0.123456789012345678, 0.0));
        s.set_coeff(2, -1, c(-1.5e-7, 3.25));
        s.set_coeff(-2, 1, c(-1.5e-7, -3.25));
        let text = s.to_csv();
        let back = FourierSeries::from_csv(&text).unwrap();
        assert_eq!(s, back);
        assert!(text.starts_with("k,l,re,im\n"));
    }

    #[test]
    fn shifted_series_evaluates_at_offset() {
        let rep = fit_fourier_1d(&|x| (std::f64::consts::PI * x).cos(), 1, 64).unwrap();
        let sh = rep.series.shifted(0.25, 0.0);
        for &x in &[0.0, 0.3, 0.9] {
            let want = (std::f64::consts::PI * (x + 0.25)).cos();
            assert!((sh.eval(x, 0.0).re - want).abs() < 1e-12);
            assert!(sh.eval(x, 0.0).im.abs() < 1e-12);
        }
        assert!(sh.is_real_valued(1e-12));
    }

    #[test]
    fn degree_bounds_control_tails() {
        // Geometric coefficients |c_k| = M e^{-a k}: returned K makes the exact
        // tail 2M Σ_{k>K} e^{-ak} fall below eps.
        for &(m, a, eps) in &[(1.0, 0.8, 1e-6), (3.0, 0.25, 1e-4), (0.5, 2.0, 1e-10)] {
            let k = degree_for_analytic_decay(m, a, eps).unwrap();
            let tail = 2.0 * m * (-(a * (k as f64 + 1.0))).exp() / (1.0 - (-a).exp());
            assert!(tail <= eps * (1.0 + 1e-9), "K={k} tail={tail:.3e} eps={eps:.0e}");
            if k > 0 {
                let tail_prev = 2.0 * m * (-(a * (k as f64))).exp() / (1.0 - (-a).exp());
                assert!(tail_prev > eps * (1.0 - 1e-9), "K not minimal");
            }
        }
        let k = degree_for_smoothness(2.0, 2, 1e-4).unwrap();
        assert_eq!(
            k,
            ((2.0 / (std::f64::consts::PI * 2.0 * 1e-4)).powf(0.5)).ceil() as usize
        );
    }

    #[test]
    fn encoder_matches_series_diagonal_1d() {
        let rep = fit_fourier_1d(&|x| 0.3 + 0.5 * (std::f64::consts::PI * x).cos(), 2, 64)
            .unwrap();
        let layout = FourierDiagLayout {
            x: AxisLayout::grid(3),
            y: AxisLayout::grid(0),
        };
        let be = diag_be_fourier(&rep.series, &layout, Some("u_kappa")).unwrap();
        assert_eq!(be.ancillas, 3); // ceil(log2 5)
        assert!((be.alpha - rep.series.l1()).abs() < 1e-15);
        assert_eq!(be.counters.get("u_kappa"), Some(&1));
        let v = be.verify().unwrap();
        assert!(v.ok, "{v}");
        assert!(v.deviation < 1e-12);
    }

    #[test]
    fn encoder_2d_prep_register_width() {
        // Degree 3 per axis: ceil(log2 7) = 3 prep bits per axis, 6 total.
        let f = |x: f64, y: f64| {
            0.5 + 0.2 * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos()
        };
        let rep = fit_fourier_2d(&f, 3, 3, 64).unwrap();
        let layout = FourierDiagLayout {
            x: AxisLayout::grid(2),
            y: AxisLayout::grid(2),
        };
        let be = diag_be_fourier(&rep.series, &layout, None).unwrap();
        assert_eq!(be.ancillas, 6);
        let v = be.verify().unwrap();
        assert!(v.ok, "{v}");
    }

    #[test]
    fn encoder_constant_series() {
        let series = FourierSeries::constant(-0.7);
        let layout = FourierDiagLayout {
            x: AxisLayout::grid(2),
            y: AxisLayout::grid(0),
        };
        let be = diag_be_fourier(&series, &layout, None).unwrap();
        assert_eq!(be.ancillas, 0);
        assert!((be.alpha - 0.7).abs() < 1e-15);
        let v = be.verify().unwrap();
        assert!(v.ok, "{v}");
    }

    #[test]
    fn design_sectors_encode_shifted_series() {
        let rep = fit_fourier_1d(&|x| (std::f64::consts::PI * x).cos(), 1, 64).unwrap();
        let layout = FourierDiagLayout {
            x: AxisLayout {
                grid_qubits: 2,
                design_bits: 2,
            },
            y: AxisLayout::grid(0),
        };
        let be = diag_be_fourier(&rep.series, &layout, None).unwrap();
        assert_eq!(be.ancillas, 2); // prep for 3 terms only; design bits are system
        let block = be.materialize_block().unwrap();
        for v in 0..4u64 {
            let xi = design_value(v, 2);
            for i in 0..4u64 {
                let x = grid_coordinate(i, 2);
                let idx = (v << 2 | i) as usize;
                let want = rep.series.eval(x + xi, 0.0);
                assert!(
                    (block[(idx, idx)] - want).norm() < 1e-12,
                    "sector {v}, point {i}"
                );
            }
        }
    }

    #[test]
    fn design_shift_wraps_periodically() {
        // ξ = 1 shifts by a full half-period: cos(π(x+1)) = −cos(πx), checking
        // the period-2 wrap is exact at the far design value.
        let rep = fit_fourier_1d(&|x| (std::f64::consts::PI * x).cos(), 1, 64).unwrap();
        let layout = FourierDiagLayout {
            x: AxisLayout {
                grid_qubits: 2,
                design_bits: 1,
            },
            y: AxisLayout::grid(0),
        };
        let be = diag_be_fourier(&rep.series, &layout, None).unwrap();
        let block = be.materialize_block().unwrap();
        for i in 0..4u64 {
            let x = grid_coordinate(i, 2);
            let base = block[(i as usize, i as usize)];
            let far = block[((4 + i as usize), (4 + i as usize))];
            assert!((base.re - (std::f64::consts::PI * x).cos()).abs() < 1e-12);
            assert!((far + base).norm() < 1e-12, "point {i}: {far} vs -{base}");
        }
    }

    #[test]
    fn table_encoding_handles_complex_values() {
        let values = vec![c(0.3, 0.0), c(-0.5, 0.2), c(0.0, 0.0), c(0.1, -0.9)];
        let be = diag_be_from_table(&values, 1.0, Some("u_gamma")).unwrap();
        assert_eq!(be.ancillas, 1);
        assert_eq!(be.counters.get("u_gamma"), Some(&1));
        let v = be.verify().unwrap();
        assert!(v.ok, "{v}");
        assert!(diag_be_from_table(&values, 0.5, None).is_err());
    }

    #[test]
    fn region_flag_flips_inside_rectangle_only() {
        let x_reg = Reg::contiguous(2, 2);
        let y_reg = Reg::contiguous(0, 2);
        let node = region_flag_node(&x_reg, &y_reg, (1, 2), (2, 3), 4);
        for idx in 0..16usize {
            let mut s = crate::linalg::StateVector::basis(5, idx);
            statevec::apply(&node, &mut s).unwrap();
            let xi = x_reg.extract(idx);
            let yi = y_reg.extract(idx);
            let inside = (1..=2).contains(&xi) && (2..=3).contains(&yi);
            let expect = if inside { idx | 16 } else { idx };
            assert_eq!(s.amps()[expect].re, 1.0, "idx {idx}");
        }
    }

    #[test]
    fn grid_endpoints_are_inclusive() {
        assert_eq!(grid_coordinate(0, 3), 0.0);
        assert_eq!(grid_coordinate(7, 3), 1.0);
        assert!((grid_coordinate(3, 3) - 3.0 / 7.0).abs() < 1e-16);
        assert_eq!(design_value(0, 2), 0.0);
        assert_eq!(design_value(3, 2), 1.0);
    }

    #[test]
    fn named_shift_encoder_matches_layout_form() {
        let series = FourierSeries::new(
            1,
            0,
            vec![c(0.2, 0.1), c(0.5, 0.0), c(0.2, -0.1)],
        )
        .unwrap();
        let shifted = param_diag_be_shift(&series, (3, 0), (2, 0), None).unwrap();
        assert_eq!(shifted.sys_qubits, 5);
        let rep = shifted.verify().unwrap();
        assert!(rep.ok, "{rep}");
        // The ξ = 0 sector reproduces the unshifted encoder.
        let plain = diag_be_fourier(
            &series,
            &FourierDiagLayout {
                x: AxisLayout::grid(3),
                y: AxisLayout::grid(0),
            },
            None,
        )
        .unwrap();
        assert_eq!(shifted.ancillas, plain.ancillas);
        let big = shifted.materialize_block().unwrap();
        let small = plain.materialize_block().unwrap();
        for i in 0..8 {
            assert!((big[(i, i)] - small[(i, i)]).norm() < 1e-12, "grid point {i}");
        }
    }

    #[test]
    fn register_value_encodes_affine_grid() {
        let bit = diag_be_register_value(1, 0.0, 1.0, None).unwrap();
        assert_eq!((bit.alpha, bit.ancillas, bit.eps), (1.0, 1, 0.0));
        let block = bit.materialize_block().unwrap();
        assert!((block[(0, 0)] - c(0.0, 0.0)).norm() < 1e-12);
        assert!((block[(1, 1)] - c(1.0, 0.0)).norm() < 1e-12);

        let sym = diag_be_register_value(2, -1.0, 1.0, Some("u_xi")).unwrap();
        assert_eq!(sym.counters.get("u_xi"), Some(&1));
        let rep = sym.verify().unwrap();
        assert!(rep.ok, "{rep}");
        let block = sym.materialize_block().unwrap();
        for (v, want) in [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0].into_iter().enumerate() {
            assert!((block[(v, v)] - c(want, 0.0)).norm() < 1e-12, "slot {v}");
        }

        assert!(diag_be_register_value(0, 0.0, 1.0, None).is_err());
        assert!(diag_be_register_value(2, 0.5, 0.5, None).is_err());
        assert!(diag_be_register_value(2, -0.2, 1.2, None).is_err());
    }

    /// Lifts an encoding onto a wider system with its original system bits at
    /// `offset` and identity elsewhere.
    fn embed(be: &BlockEncoding, total_sys: usize, offset: usize) -> BlockEncoding {
        let s = be.sys_qubits;
        let action = be
            .action
            .clone()
            .shift_bits(0, offset)
            .shift_bits(offset + s, total_sys - offset - s);
        let reference = be.reference.as_ref().map(|r| {
            let hi = ComplexMatrix::identity(1 << (total_sys - offset - s));
            let lo = ComplexMatrix::identity(1 << offset);
            crate::linalg::kron(&crate::linalg::kron(&hi, r).unwrap(), &lo).unwrap()
        });
        BlockEncoding {
            sys_qubits: total_sys,
            action,
            reference,
            ..be.clone()
        }
    }

    #[test]
    fn register_values_weight_basis_functions_in_combination() {
        // f(x; ξ) = ξ₁·φ₁(x) + ξ₂·φ₂(x) over [ξ₂ | ξ₁ | x], each ξ_k one qubit.
        let phi1 = vec![c(1.0, 0.0), c(0.5, 0.0), c(-0.5, 0.0), c(1.0, 0.0)];
        let phi2 = vec![c(0.2, 0.0), c(-0.4, 0.0), c(0.8, 0.0), c(0.6, 0.0)];
        let arm = |phi: &[C64], xi_bit: usize| {
            let weight = embed(&diag_be_register_value(1, 0.0, 1.0, None).unwrap(), 4, xi_bit);
            let basis = embed(&diag_be_from_table(phi, 1.0, None).unwrap(), 4, 0);
            crate::becalc::product(&weight, &basis).unwrap()
        };
        let f = crate::becalc::lcu(
            &[c(1.0, 0.0), c(1.0, 0.0)],
            &[arm(&phi1, 2), arm(&phi2, 3)],
            "sum_xi_phi",
        )
        .unwrap();
        let rep = f.verify().unwrap();
        assert!(rep.ok, "{rep}");
        let block = f.materialize_block().unwrap();
        for idx in 0..16usize {
            let x = idx & 3;
            let xi1 = (idx >> 2) & 1;
            let xi2 = (idx >> 3) & 1;
            let want = phi1[x] * xi1 as f64 + phi2[x] * xi2 as f64;
            assert!((block[(idx, idx)] - want).norm() < 1e-10, "idx {idx}");
        }
    }

    #[test]
    fn comparator_matches_integer_comparison_exhaustively() {
        for (n, m) in [(3usize, 3usize), (3, 1), (1, 3)] {
            let x_reg = Reg::contiguous(0, n);
            let xi_reg = Reg::contiguous(n, m);
            let flag = n + m;
            let cmp = comparator_flag(&x_reg, &xi_reg, flag).unwrap();
            assert!(
                cmp.toffoli_steps <= 2 * n.max(m) as u64,
                "step budget at n={n} m={m}: {}",
                cmp.toffoli_steps
            );
            for xv in 0..1u64 << n {
                for tv in 0..1u64 << m {
                    let idx = ((tv << n) | xv) as usize;
                    let mut state = crate::linalg::StateVector::basis(n + m + 1, idx);
                    statevec::apply(&cmp.node, &mut state).unwrap();
                    let want = if xv >= tv { idx | (1 << flag) } else { idx };
                    assert!(
                        (state.amps()[want] - c(1.0, 0.0)).norm() < 1e-12,
                        "n={n} m={m} x={xv} ξ={tv}"
                    );
                    // Involution: a second pass restores the input exactly.
                    statevec::apply(&cmp.node, &mut state).unwrap();
                    assert!((state.amps()[idx] - c(1.0, 0.0)).norm() < 1e-12);
                }
            }
        }
        let overlapping = comparator_flag(&Reg::contiguous(0, 2), &Reg::contiguous(1, 2), 4);
        assert!(overlapping.is_err());
    }

    #[test]
    fn single_piece_matches_plain_fourier_encoder() {
        let series = FourierSeries::new(
            1,
            0,
            vec![c(0.2, 0.1), c(0.5, 0.0), c(0.2, -0.1)],
        )
        .unwrap();
        let pw = piecewise_diag_be(&[PiecewisePiece::base(series.clone())], 3, None).unwrap();
        let plain = diag_be_fourier(
            &series,
            &FourierDiagLayout {
                x: AxisLayout::grid(3),
                y: AxisLayout::grid(0),
            },
            None,
        )
        .unwrap();
        assert_eq!(pw.sys_qubits, 3);
        assert!((pw.alpha - plain.alpha).abs() < 1e-15);
        let rep = pw.verify().unwrap();
        assert!(rep.ok, "{rep}");
        // Same diagonal; the piecewise form merely carries two spare prep
        // slots, so its prep register is one bit wider.
        let a = pw.materialize_block().unwrap();
        let b = plain.materialize_block().unwrap();
        assert!(a.sub(&b).unwrap().max_norm() < 1e-12);
    }

    #[test]
    fn two_constant_pieces_step_at_register_threshold() {
        let pieces = [
            PiecewisePiece::base(FourierSeries::constant(0.2)),
            PiecewisePiece::above(FourierSeries::constant(0.8), 2),
        ];
        let pw = piecewise_diag_be(&pieces, 2, Some("u_step")).unwrap();
        assert_eq!(pw.sys_qubits, 4);
        assert_eq!(pw.alpha, 0.8);
        assert_eq!(pw.counters.get("u_step"), Some(&1));
        assert!(pw.toffolis() > 0);
        let rep = pw.verify().unwrap();
        assert!(rep.ok, "{rep}");
        let block = pw.materialize_block().unwrap();
        for idx in 0..16usize {
            let xv = (idx & 3) as u64;
            let tv = (idx >> 2) as u64;
            let want = if xv >= tv { 0.8 } else { 0.2 };
            assert!(
                (block[(idx, idx)] - c(want, 0.0)).norm() < 1e-10,
                "x={xv} ξ={tv}"
            );
            assert!(block[(idx, (idx + 5) % 16)].norm() < 1e-10);
        }
    }

    #[test]
    fn superposed_threshold_carries_per_sector_steps() {
        let pieces = [
            PiecewisePiece::base(FourierSeries::constant(0.2)),
            PiecewisePiece::above(FourierSeries::constant(0.8), 2),
        ];
        let pw = piecewise_diag_be(&pieces, 2, None).unwrap();
        let total = pw.total_qubits();
        // ξ in uniform superposition, x = 1 fixed, ancillas zero.
        let mut state = crate::linalg::StateVector::basis(total, 0);
        state.amps_mut()[1] = c(0.0, 0.0);
        for tv in 0..4usize {
            state.amps_mut()[(tv << 2) | 1] = c(0.5, 0.0);
        }
        statevec::apply(&pw.action, &mut state).unwrap();
        for tv in 0..4usize {
            let want = if 1 >= tv { 0.8 } else { 0.2 } / pw.alpha * 0.5;
            let got = state.amps()[(tv << 2) | 1];
            assert!(
                (got - c(want, 0.0)).norm() < 1e-12,
                "sector ξ={tv}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn piecewise_rejects_malformed_piece_lists() {
        let base = PiecewisePiece::base(FourierSeries::constant(0.5));
        let above = PiecewisePiece::above(FourierSeries::constant(0.9), 2);
        assert!(piecewise_diag_be(&[], 2, None).is_err());
        assert!(piecewise_diag_be(&[above.clone()], 2, None).is_err());

        // Two pieces claiming the same flag pattern overlap.
        let mut clash = above.clone();
        clash.pattern = Some(0);
        let err = piecewise_diag_be(&[base.clone(), clash], 2, None).unwrap_err();
        assert!(err.to_string().contains("overlapping"), "{err}");

        // A pattern outside the flag register is rejected.
        let mut wide = above.clone();
        wide.pattern = Some(2);
        assert!(piecewise_diag_be(&[base.clone(), wide], 2, None).is_err());

        // Pieces must not vary in y.
        let mut planar = base.clone();
        planar.series = FourierSeries::new(0, 1, vec![c(0.1, 0.0); 3]).unwrap();
        assert!(piecewise_diag_be(&[planar], 2, None).is_err());
    }

    #[test]
    fn three_piece_thermometer_interval_semantics() {
        // Non-constant pieces with distinct weights exercise the slack slots:
        // every sector must still encode its own piece exactly.
        let low = FourierSeries::new(1, 0, vec![c(0.15, 0.05), c(0.3, 0.0), c(0.15, -0.05)])
            .unwrap();
        let mid = FourierSeries::constant(0.9);
        let high = FourierSeries::new(1, 0, vec![c(0.1, 0.0), c(0.2, 0.0), c(0.1, 0.0)]).unwrap();
        let pieces = [
            PiecewisePiece::base(low.clone()),
            PiecewisePiece::above(mid.clone(), 1),
            PiecewisePiece::above(high.clone(), 1),
        ];
        let pw = piecewise_diag_be(&pieces, 2, None).unwrap();
        assert_eq!(pw.sys_qubits, 4);
        assert_eq!(pw.alpha, 0.9);
        let rep = pw.verify().unwrap();
        assert!(rep.ok, "{rep}");
        let block = pw.materialize_block().unwrap();
        for idx in 0..16usize {
            let xv = (idx & 3) as u64;
            let t1 = ((idx >> 2) & 1) as u64;
            let t2 = ((idx >> 3) & 1) as u64;
            let x = grid_coordinate(xv, 2);
            // Sorted thresholds: flags form a thermometer and pick the last
            // piece whose threshold is ≤ x; unsorted sectors (ξ₁ > ξ₂ split)
            // fall through to α when the flag vector matches no pattern.
            let f1 = xv >= t1;
            let f2 = xv >= t2;
            let want = match (f1, f2) {
                (false, false) => low.eval(x, 0.0),
                (true, false) => mid.eval(x, 0.0),
                (true, true) => high.eval(x, 0.0),
                (false, true) => c(pw.alpha, 0.0),
            };
            assert!(
                (block[(idx, idx)] - want).norm() < 1e-10,
                "x={xv} ξ=({t1},{t2})"
            );
        }
    }
}
