//! Design-register sweeps and the simulation-constrained objective.
//!
//! A design register steers the translation of the spatially varying speed
//! profile (each register value phases the coefficient series into a shifted
//! copy, see [`crate::diagenc`]). On top of that parameterized generator this
//! module builds the objective `F(ξ) = (Σ_{(x,y)∈S} w₁(t,x,y;ξ)²)^{1/2}`
//! over a target region `S`: as a dense per-sector sweep, as one contracted
//! evolution run with the design register in uniform superposition, and as a
//! literal reflection circuit `V†(2Π_S − I)V` whose block is diagonal over
//! the design register with entries `(2/α_for²)·F(ξ)² − 1` (`α_for` being
//! the forward run's sub-normalization; `F` is recovered by square root in
//! post-processing).

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::becalc::{chebyshev, lcu, BlockEncoding};
use crate::diagenc::{design_value, diag_be_fourier, fit_fourier_2d, FourierSeries};
use crate::error::Error;
use crate::hamsim::{
    apply_expansion, evolve_exact, jacobi_anger_coefficients, plan_evolution, times_minus_i,
    EvolutionPlan,
};
use crate::linalg::{ComplexMatrix, StateVector};
use crate::pdeops::{assemble_wave_a, initial_condition_node, prepare_initial, WaveLayout};
use crate::statevec::{self, ActionNode, Reg};
use crate::Result;

/// One register-encoded optimization variable: `qubits` bits mapped affinely
/// onto `[at_zero, at_max]` (value at register 0 and at the top register
/// value respectively; the slope may be negative).
#[derive(Clone, Debug)]
pub struct DesignParam {
    pub name: String,
    pub qubits: usize,
    pub at_zero: f64,
    pub at_max: f64,
}

impl DesignParam {
    /// Parameter value at register content `v`.
    pub fn value(&self, v: u64) -> f64 {
        self.at_zero + (self.at_max - self.at_zero) * design_value(v, self.qubits)
    }
}

/// Ordered collection of design parameters; register order follows the list.
#[derive(Clone, Debug)]
pub struct DesignSpace {
    pub params: Vec<DesignParam>,
}

impl DesignSpace {
    pub fn new(params: Vec<DesignParam>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::invalid("design space needs at least one parameter"));
        }
        for p in &params {
            if p.qubits == 0 {
                return Err(Error::invalid(format!(
                    "design parameter {} has no qubits",
                    p.name
                )));
            }
            if !(p.at_zero.is_finite() && p.at_max.is_finite()) || p.at_zero == p.at_max {
                return Err(Error::invalid(format!(
                    "design parameter {} needs a nondegenerate affine range",
                    p.name
                )));
            }
        }
        Ok(DesignSpace { params })
    }

    /// The two-parameter shift family of the worked example: each register
    /// value moves the profile center from 1 (register 0) down to 0 (top).
    /// The phase ladder adds the register value to the coordinate argument,
    /// which translates the profile center the opposite way.
    pub fn demo_shift(m: usize) -> Result<Self> {
        DesignSpace::new(vec![
            DesignParam {
                name: "xi_x".into(),
                qubits: m,
                at_zero: 1.0,
                at_max: 0.0,
            },
            DesignParam {
                name: "xi_y".into(),
                qubits: m,
                at_zero: 1.0,
                at_max: 0.0,
            },
        ])
    }

    pub fn total_qubits(&self) -> usize {
        self.params.iter().map(|p| p.qubits).sum()
    }
}

/// The speed profile of the worked example: a dip of widths `(1/20, 1/5)`
/// carved out of a unit background, centered at `ξ` (default `(1/2, 1/2)`).
pub fn gaussian_profile(center: Option<(f64, f64)>) -> impl Fn(f64, f64) -> f64 {
    let (cx, cy) = center.unwrap_or((0.5, 0.5));
    let vx = 2.0 * (1.0 / 20.0) * (1.0 / 20.0);
    let vy = 2.0 * (1.0 / 5.0) * (1.0 / 5.0);
    move |x: f64, y: f64| 1.0 - (-((x - cx) * (x - cx) / vx + (y - cy) * (y - cy) / vy)).exp()
}

/// Grid cells whose field values feed the objective, within one component
/// (selector sector) of the assembled system.
#[derive(Clone, Debug)]
pub struct TargetRegion {
    /// `(x index, y index)` pairs.
    pub cells: Vec<(u64, u64)>,
    /// Selector-sector of the component the objective reads (0 for the
    /// leading field component of the worked example).
    pub selector: u64,
}

impl TargetRegion {
    pub fn new(cells: Vec<(u64, u64)>, selector: u64) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("target region is empty"));
        }
        if selector >= 4 {
            return Err(Error::invalid("selector sector out of range"));
        }
        Ok(TargetRegion { cells, selector })
    }

    /// The reduced demo's region: the two leftmost grid columns, middle half
    /// of the transverse axis — the band the inward-travelling front crosses
    /// last, centered where the profile dip slows it down.
    pub fn demo_band(n: usize) -> Result<Self> {
        let points = 1u64 << n;
        let lo = points / 4;
        let hi = (3 * points).div_ceil(4);
        let mut cells = Vec::new();
        for x in 0..2u64.min(points) {
            for y in lo..hi {
                cells.push((x, y));
            }
        }
        TargetRegion::new(cells, 0)
    }

    /// Bounds-checks the region against a layout.
    pub fn validate(&self, wl: &WaveLayout) -> Result<()> {
        let (px, py) = (1u64 << wl.x.n, 1u64 << wl.y.n);
        for &(x, y) in &self.cells {
            if x >= px || y >= py {
                return Err(Error::invalid(format!(
                    "region cell ({x},{y}) outside the {px}x{py} grid"
                )));
            }
        }
        Ok(())
    }

    /// Membership table over the inner grid, indexed `x·2^{n_y} + y`.
    fn mask(&self, wl: &WaveLayout) -> Vec<bool> {
        let ny = wl.y.n;
        let mut mask = vec![false; 1 << (wl.x.n + ny)];
        for &(x, y) in &self.cells {
            mask[((x << ny) | y) as usize] = true;
        }
        mask
    }
}

/// The parameterized forward pipeline: layout, design space, the base
/// coefficient series (already phased so that design sector `v` evaluates it
/// at `(x + ξ(v), y + ξ(v))`), and the assembled generator.
#[derive(Clone, Debug)]
pub struct DemoPipeline {
    pub wl: WaveLayout,
    pub space: DesignSpace,
    pub series: FourierSeries,
    pub generator: BlockEncoding,
    /// Sup-norm residual of the profile fit (0 when built from a given series).
    pub fit_residual: f64,
}

/// Assembles the parameterized generator from an explicit base series.
pub fn pipeline_from_series(series: FourierSeries, n: usize, m: usize) -> Result<DemoPipeline> {
    let space = DesignSpace::demo_shift(m)?;
    let wl = WaveLayout::demo(n).with_design(m, m);
    if space.total_qubits() > 2 * n {
        return Err(Error::invalid(
            "design register is wider than the grid register",
        ));
    }
    let c_be = diag_be_fourier(&series, &wl.diag_layout(), Some("u_c"))?;
    let generator = assemble_wave_a(&c_be, &wl)?;
    Ok(DemoPipeline {
        wl,
        space,
        series,
        generator,
        fit_residual: 0.0,
    })
}

/// Fits the shifted-profile family at its default center and assembles the
/// parameterized generator of the reduced demo: `n` grid qubits per axis,
/// `m` design qubits per parameter, fit degree `deg` per axis.
pub fn demo_pipeline(n: usize, m: usize, deg: usize, quad_points: usize) -> Result<DemoPipeline> {
    let fit = fit_fourier_2d(&gaussian_profile(None), deg, deg, quad_points)?;
    // Pre-phase by −1/2 per axis: sector v then evaluates the fit at
    // (x + ξ(v) − 1/2, ...), i.e. the profile translated to center 1 − ξ(v).
    let series = fit.series.shifted(-0.5, -0.5);
    let mut pipe = pipeline_from_series(series, n, m)?;
    pipe.fit_residual = fit.sup_residual;
    Ok(pipe)
}

/// Which evaluators a landscape sweep runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LandscapeMode {
    Matrix,
    BlockEnc,
    Both,
}

/// One design cell of the objective table.
#[derive(Clone, Debug)]
pub struct LandscapeCell {
    pub vx: u64,
    pub vy: u64,
    pub xi_x: f64,
    pub xi_y: f64,
    pub f_matrix: Option<f64>,
    pub f_blockenc: Option<f64>,
    /// Ancilla-zero projection probability of the forward run at this cell.
    pub success: Option<f64>,
    /// Raw diagonal entry `(2/α_for²)·F² − 1` of the objective encoding.
    pub raw_diag: Option<f64>,
}

/// Full objective table over the design register.
#[derive(Clone, Debug)]
pub struct Landscape {
    pub cells: Vec<LandscapeCell>,
    /// Sub-normalization of the forward (evolution) circuit.
    pub alpha_for: f64,
    pub truncation_order: usize,
    pub t: f64,
    pub eps_hs: f64,
}

impl Landscape {
    fn argmax_by(&self, f: impl Fn(&LandscapeCell) -> Option<f64>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, cell) in self.cells.iter().enumerate() {
            if let Some(v) = f(cell) {
                if best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn argmax_matrix(&self) -> Option<usize> {
        self.argmax_by(|c| c.f_matrix)
    }

    pub fn argmax_blockenc(&self) -> Option<usize> {
        self.argmax_by(|c| c.f_blockenc)
    }

    /// Largest cellwise gap between the two evaluators.
    pub fn max_cross_deviation(&self) -> Option<f64> {
        let mut out: Option<f64> = None;
        for c in &self.cells {
            if let (Some(a), Some(b)) = (c.f_matrix, c.f_blockenc) {
                let d = (a - b).abs();
                out = Some(out.map_or(d, |o: f64| o.max(d)));
            }
        }
        out
    }
}

/// Widths `(m_x, m_y)` checked against the pipeline's layout.
fn design_widths(pipe: &DemoPipeline) -> Result<(usize, usize)> {
    let (mx, my) = (pipe.wl.design_x, pipe.wl.design_y);
    if pipe.space.params.len() != 2
        || pipe.space.params[0].qubits != mx
        || pipe.space.params[1].qubits != my
    {
        return Err(Error::invalid(
            "design space does not match the layout's design registers",
        ));
    }
    if mx == 0 || my == 0 {
        return Err(Error::invalid("pipeline carries no design register"));
    }
    Ok((mx, my))
}

/// Dense per-cell forward run: evolve the restriction of the generator's
/// reference to one design sector and sum the region cells.
fn matrix_cell_f(
    pipe: &DemoPipeline,
    region: &TargetRegion,
    t: f64,
    alpha_full: f64,
    vx: u64,
    vy: u64,
) -> Result<f64> {
    let plain = WaveLayout {
        x: pipe.wl.x,
        y: pipe.wl.y,
        design_x: 0,
        design_y: 0,
    };
    let (mx, my) = (pipe.wl.design_x, pipe.wl.design_y);
    let series_v = pipe
        .series
        .shifted(design_value(vx, mx), design_value(vy, my));
    let c_v = diag_be_fourier(&series_v, &plain.diag_layout(), Some("u_c"))?;
    let a_v = assemble_wave_a(&c_v, &plain)?;
    if (a_v.alpha - alpha_full).abs() > 1e-9 * alpha_full.max(1.0) {
        return Err(Error::Numeric(format!(
            "per-sector normalization {} drifted from the joint assembly's {alpha_full}",
            a_v.alpha
        )));
    }
    let reference = a_v
        .reference
        .as_ref()
        .ok_or_else(|| Error::invalid("dense sweep needs a generator small enough to track"))?;
    let w0 = prepare_initial(&plain)?;
    let w_t = evolve_exact(reference, &w0, t)?;
    let ny = plain.y.n;
    let mask = region.mask(&plain);
    let grid = 1usize << (plain.x.n + ny);
    let base = (region.selector as usize) << (plain.x.n + ny);
    let mut g = 0.0f64;
    for (gi, &inside) in mask.iter().enumerate().take(grid) {
        if inside {
            g += w_t.amps()[base + gi].norm_sqr();
        }
    }
    Ok(g.sqrt())
}

/// Sweeps the objective over every design-register value.
///
/// `Matrix` mode evolves each sector's dense generator exactly; `BlockEnc`
/// mode runs the truncated expansion once with the design register in
/// uniform superposition and reads each sector's region sum and success
/// probability out of the result. `Both` fills both columns.
pub fn landscape(
    pipe: &DemoPipeline,
    region: &TargetRegion,
    t: f64,
    eps_hs: f64,
    mode: LandscapeMode,
) -> Result<Landscape> {
    region.validate(&pipe.wl)?;
    let (mx, my) = design_widths(pipe)?;
    let (nx, ny) = (pipe.wl.x.n, pipe.wl.y.n);
    let plan = plan_evolution(pipe.generator.alpha, t, eps_hs)?;
    let lambda: f64 = jacobi_anger_coefficients(&plan)
        .iter()
        .map(|z| z.norm())
        .sum();

    let mut cells: Vec<LandscapeCell> = Vec::with_capacity(1 << (mx + my));
    for vx in 0..1u64 << mx {
        for vy in 0..1u64 << my {
            cells.push(LandscapeCell {
                vx,
                vy,
                xi_x: pipe.space.params[0].value(vx),
                xi_y: pipe.space.params[1].value(vy),
                f_matrix: None,
                f_blockenc: None,
                success: None,
                raw_diag: None,
            });
        }
    }

    if mode != LandscapeMode::Matrix {
        // One contracted run over the uniform design superposition.
        let s_w = pipe.wl.sys_qubits();
        let mut state = StateVector::basis(s_w, 0);
        let mut prep = vec![initial_condition_node(&pipe.wl)?];
        let diag = pipe.wl.diag_layout();
        for &bit in diag
            .design_x_reg()
            .bits()
            .iter()
            .chain(diag.design_y_reg().bits())
        {
            prep.push(ActionNode::hadamard(bit));
        }
        statevec::apply(&ActionNode::compose(prep), &mut state)?;
        let acc = apply_expansion(&pipe.generator, &state, &plan)?;

        let sectors = 1usize << (mx + my);
        let grid = 1usize << (nx + ny);
        let mask = region.mask(&pipe.wl);
        let sel_base = (region.selector as usize) << (mx + my + nx + ny);
        for cell in cells.iter_mut() {
            let base = ((cell.vx as usize) << (my + nx + ny)) | ((cell.vy as usize) << (nx + ny));
            let mut region_sum = 0.0f64;
            let mut total = 0.0f64;
            for sel in 0..4usize {
                let sec = (sel << (mx + my + nx + ny)) | base;
                for gi in 0..grid {
                    let a = acc[sec | gi].norm_sqr();
                    total += a;
                    if sel == region.selector as usize && mask[gi] {
                        region_sum += a;
                    }
                }
            }
            debug_assert_eq!(sel_base | base, base | sel_base);
            let g = region_sum * sectors as f64;
            cell.f_blockenc = Some(g.sqrt());
            cell.success = Some(total * sectors as f64 / (lambda * lambda));
            cell.raw_diag = Some(2.0 * g / (lambda * lambda) - 1.0);
        }
    }

    if mode != LandscapeMode::BlockEnc {
        let alpha_full = pipe.generator.alpha;
        let fs: Vec<f64> = cells
            .par_iter()
            .map(|cell| matrix_cell_f(pipe, region, t, alpha_full, cell.vx, cell.vy))
            .collect::<Result<_>>()?;
        for (cell, f) in cells.iter_mut().zip(fs) {
            cell.f_matrix = Some(f);
        }
    }

    Ok(Landscape {
        cells,
        alpha_for: lambda,
        truncation_order: plan.r,
        t,
        eps_hs,
    })
}

/// Builds the literal objective circuit `V†(2Π_S − I)V` and frames it as a
/// block-encoding over the design register.
///
/// `V` prepares the initial field and applies the truncated-expansion
/// evolution circuit; `Π_S` projects onto the region cells of the selected
/// component with every evolution ancilla at zero. A bit swap conjugation
/// moves the design register into the encoding's system slot, so the
/// materialized block is diagonal with entries `(2/α_for²)·F(ξ)² − 1`. The
/// reference (when the generator's own reference is available) uses the
/// exact per-sector evolution, so `verify()` bounds the truncation error.
pub fn objective_be(
    pipe: &DemoPipeline,
    region: &TargetRegion,
    plan: &EvolutionPlan,
) -> Result<BlockEncoding> {
    region.validate(&pipe.wl)?;
    let (mx, my) = design_widths(pipe)?;
    let w = mx + my;
    let (nx, ny) = (pipe.wl.x.n, pipe.wl.y.n);
    let s_w = pipe.wl.sys_qubits();

    // Evolution circuit: the explicit weighted combination of the walk terms.
    let (e_action, anc_e, lambda, e_counters, e_gates) = if plan.r == 0 {
        (ActionNode::compose(vec![]), 0usize, 1.0f64, None, 0u64)
    } else {
        let h = times_minus_i(&pipe.generator);
        let cs = jacobi_anger_coefficients(plan);
        let arms: Vec<BlockEncoding> = (0..=plan.r)
            .map(|k| chebyshev(&h, k))
            .collect::<Result<_>>()?;
        let e = lcu(&cs, &arms, "evolution")?;
        (
            e.action.clone(),
            e.ancillas,
            cs.iter().map(|z| z.norm()).sum(),
            Some(e.counters.clone()),
            e.gate_count,
        )
    };

    let prep = initial_condition_node(&pipe.wl)?;

    // Reflection about region ∧ component ∧ all-ancillas-zero; identity on
    // the design register.
    let diag = pipe.wl.diag_layout();
    let refl_reg = diag
        .y_reg()
        .then(&diag.x_reg())
        .then(&pipe.wl.sel_reg())
        .then(&Reg::contiguous(s_w, anc_e));
    let mask = region.mask(&pipe.wl);
    let mut phases = vec![0.0f64; 1 << refl_reg.width()];
    for (val, ph) in phases.iter_mut().enumerate() {
        let gi = val & ((1 << (nx + ny)) - 1);
        let sel = (val >> (nx + ny)) & 3;
        let anc = val >> (nx + ny + 2);
        let inside = anc == 0 && sel == region.selector as usize && mask[gi];
        if !inside {
            *ph = std::f64::consts::PI;
        }
    }
    let reflection = ActionNode::PhaseDiag {
        reg: refl_reg,
        phases,
    };

    // Swap the design register with the low `w` grid bits, making the design
    // register the encoding's system.
    let mut swap4 = ComplexMatrix::zeros(4, 4);
    swap4[(0, 0)] = C64::new(1.0, 0.0);
    swap4[(2, 1)] = C64::new(1.0, 0.0);
    swap4[(1, 2)] = C64::new(1.0, 0.0);
    swap4[(3, 3)] = C64::new(1.0, 0.0);
    let design_bits: Vec<usize> = diag
        .design_y_reg()
        .bits()
        .iter()
        .chain(diag.design_x_reg().bits())
        .copied()
        .collect();
    let mut swaps = Vec::with_capacity(w);
    for (low, &db) in design_bits.iter().enumerate() {
        swaps.push(ActionNode::prepare(
            Reg::new(vec![low, db]),
            swap4.clone(),
        )?);
    }
    let swap_node = ActionNode::compose(swaps);

    let action = ActionNode::compose(vec![
        swap_node.clone(),
        prep.clone(),
        e_action.clone(),
        reflection,
        ActionNode::adjoint(e_action),
        ActionNode::adjoint(prep),
        swap_node,
    ]);

    // Exact-evolution reference diagonal, sector by sector.
    let reference = match &pipe.generator.reference {
        Some(full) => {
            let plain = WaveLayout {
                x: pipe.wl.x,
                y: pipe.wl.y,
                design_x: 0,
                design_y: 0,
            };
            let w0 = prepare_initial(&plain)?;
            let grid = 1usize << (nx + ny);
            let sector_dim = 4 * grid;
            let mut diag_ref = ComplexMatrix::zeros(1 << w, 1 << w);
            let plain_mask = region.mask(&plain);
            for xi in 0..1usize << w {
                let (vx, vy) = (xi >> my, xi & ((1 << my) - 1));
                let full_idx = |local: usize| -> usize {
                    let sel = local >> (nx + ny);
                    let gi = local & (grid - 1);
                    (sel << (w + nx + ny)) | (vx << (my + nx + ny)) | (vy << (nx + ny)) | gi
                };
                let mut sector = ComplexMatrix::zeros(sector_dim, sector_dim);
                for r in 0..sector_dim {
                    for c in 0..sector_dim {
                        sector[(r, c)] = full[(full_idx(r), full_idx(c))];
                    }
                }
                let w_t = evolve_exact(&sector, &w0, plan.t)?;
                let base = (region.selector as usize) << (nx + ny);
                let mut g = 0.0f64;
                for (gi, &inside) in plain_mask.iter().enumerate().take(grid) {
                    if inside {
                        g += w_t.amps()[base + gi].norm_sqr();
                    }
                }
                diag_ref[(xi, xi)] = C64::new(2.0 * g / (lambda * lambda) - 1.0, 0.0);
            }
            Some(diag_ref)
        }
        None => None,
    };

    // Truncation plus the generator's own encoding error, pushed through the
    // region-sum square and the rescaling.
    let eps_w = plan.eps_hs + pipe.generator.eps * plan.t;
    let eps_obj = 2.0 * (2.0 * eps_w + eps_w * eps_w) / (lambda * lambda);

    let mut be = BlockEncoding::new(
        format!("objective({})", pipe.generator.label),
        w,
        s_w - w + anc_e,
        1.0,
        eps_obj,
        action,
        reference,
    )?;
    if let Some(counters) = e_counters {
        for (k, v) in counters {
            *be.counters.entry(k).or_insert(0) += 2 * v;
        }
    }
    be.gate_count = 2 * e_gates + 2 * w as u64;
    Ok(be)
}
