//! Time evolution `exp(−At)` of a block-encoded anti-Hermitian operator.
//!
//! With `H = −iA` Hermitian and `θ = α·t`, the evolution expands as
//! `exp(−At) = exp(−iθ·H/α·…) = J₀(θ)·I + 2Σ_{k≥1} (−i)^k J_k(θ) T_k(H/α)`,
//! truncated at order `R` with tail `2Σ_{k>R}|J_k(θ)| ≤ eps`. The Chebyshev
//! iterates come from [`crate::becalc::chebyshev`]'s alternating
//! encode/reflect walk; [`evolve_be`] runs that walk once, accumulating the
//! weighted ancilla-zero projections incrementally, which reproduces the
//! literal combination circuit's projected output and success probability
//! exactly without ever materializing the combination register.
//! [`evolve_exact`] is the dense oracle `matexp(−A·t)`.

use num_complex::Complex64 as C64;

use crate::becalc::BlockEncoding;
use crate::error::Error;
use crate::linalg::{matexp, ComplexMatrix, StateVector};
use crate::statevec::{self, ActionNode};
use crate::Result;

/// Truncation plan for one evolution: time, target error, Chebyshev order,
/// the dimensionless `α·t`, and the Bessel weights `J_0..J_R` of that angle.
#[derive(Clone, Debug)]
pub struct EvolutionPlan {
    pub t: f64,
    pub eps_hs: f64,
    pub r: usize,
    pub alpha_tau: f64,
    pub bessel_weights: Vec<f64>,
    /// Abort threshold for the projection probability (default `1e-12`).
    pub success_floor: f64,
}

/// First-kind Bessel values `J_0(θ)..J_top(θ)` by the downward three-term
/// recurrence, sign-fixed by `J₀ + 2Σ J_{2k} = 1` and cross-checked against
/// `J₀² + 2Σ J_k² = 1` to `1e−12`.
fn bessel_table(theta: f64) -> Result<Vec<f64>> {
    if theta == 0.0 {
        return Ok(vec![1.0]);
    }
    let top = (theta + 12.0 * theta.cbrt() + 60.0).ceil() as usize;
    let mut j = vec![0.0f64; top + 2];
    j[top + 1] = 0.0;
    j[top] = 1.0;
    for k in (1..=top).rev() {
        j[k - 1] = (2.0 * k as f64 / theta) * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut even_sum = 0.0;
    let mut k = 2;
    while k <= top {
        even_sum += j[k];
        k += 2;
    }
    let norm = j[0] + 2.0 * even_sum;
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numeric("Bessel normalization".into()));
    }
    for v in j.iter_mut() {
        *v /= norm;
    }
    j.truncate(top + 1);
    let square_sum = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
    if (square_sum - 1.0).abs() > 1e-12 {
        return Err(Error::Numeric(format!(
            "Bessel square-sum identity off by {:.3e}",
            (square_sum - 1.0).abs()
        )));
    }
    Ok(j)
}

/// Chooses the smallest truncation order whose tail meets the error target.
///
/// Returns `R = 0` with weight `[1]` at `t = 0` (or a zero-scale operator);
/// otherwise the smallest `R` with `2Σ_{k>R}|J_k(αt)| ≤ eps_hs`, floored at
/// `⌈e·αt/2⌉`.
pub fn plan_evolution(alpha: f64, t: f64, eps_hs: f64) -> Result<EvolutionPlan> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid("evolution needs a finite nonnegative scale"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("evolution needs a finite nonnegative time"));
    }
    if !(eps_hs.is_finite() && eps_hs > 0.0) {
        return Err(Error::invalid("evolution error target must be positive"));
    }
    let theta = alpha * t;
    let floor = 1e-12;
    if theta == 0.0 {
        return Ok(EvolutionPlan {
            t,
            eps_hs,
            r: 0,
            alpha_tau: 0.0,
            bessel_weights: vec![1.0],
            success_floor: floor,
        });
    }
    let table = bessel_table(theta)?;
    let mut tail: Vec<f64> = vec![0.0; table.len() + 1];
    for k in (0..table.len()).rev() {
        tail[k] = tail[k + 1] + 2.0 * table[k].abs();
    }
    // tail[k+1] = 2·Σ_{j>k}|J_j|; scan for the smallest admissible order.
    let mut r = table.len() - 1;
    for k in 0..table.len() {
        if tail[k + 1] <= eps_hs {
            r = k;
            break;
        }
    }
    let r_min = (std::f64::consts::E * theta / 2.0).ceil() as usize;
    let r = r.max(r_min);
    if r >= table.len() {
        return Err(Error::Numeric("Bessel table too short for the target".into()));
    }
    Ok(EvolutionPlan {
        t,
        eps_hs,
        r,
        alpha_tau: theta,
        bessel_weights: table[..=r].to_vec(),
        success_floor: floor,
    })
}

/// Weights of the truncated expansion: `c_0 = J_0(θ)`,
/// `c_k = 2(−i)^k J_k(θ)`.
pub fn jacobi_anger_coefficients(plan: &EvolutionPlan) -> Vec<C64> {
    let minus_i = C64::new(0.0, -1.0);
    let mut phase = C64::new(1.0, 0.0);
    plan.bessel_weights
        .iter()
        .enumerate()
        .map(|(k, &jk)| {
            if k == 0 {
                return C64::new(jk, 0.0);
            }
            phase *= minus_i;
            phase * 2.0 * jk
        })
        .collect()
}

/// Multiplies an encoded operator by `−i` (a global phase on the circuit),
/// turning an anti-Hermitian target into a Hermitian one.
pub(crate) fn times_minus_i(u: &BlockEncoding) -> BlockEncoding {
    let mut out = u.clone();
    out.action = ActionNode::compose(vec![
        ActionNode::global_phase(-std::f64::consts::FRAC_PI_2),
        u.action.clone(),
    ]);
    out.reference = u.reference.as_ref().map(|r| r.scale(C64::new(0.0, -1.0)));
    out.label = format!("(-i·{})", u.label);
    out
}

/// Runs the truncated expansion `Σ_k c_k T_k(H/α)` against a normalized
/// input, returning the raw (unnormalized) output amplitudes
/// `≈ exp(−At)·w0`. Shared workhorse behind [`evolve_be`] and the
/// design-register sweeps, which post-process sectors of the result.
pub fn apply_expansion(
    u_a: &BlockEncoding,
    w0: &StateVector,
    plan: &EvolutionPlan,
) -> Result<Vec<C64>> {
    let s = u_a.sys_qubits;
    let dim = 1usize << s;
    if w0.amps().len() != dim {
        return Err(Error::dim(format!(
            "state has {} amplitudes, system dimension is {dim}",
            w0.amps().len()
        )));
    }
    if (w0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("evolution input state must be normalized"));
    }
    if let Some(r) = &u_a.reference {
        let dev = r.anti_hermitian_deviation();
        if dev > 1e-8 * u_a.alpha.max(1.0) {
            return Err(Error::invalid(format!(
                "evolution target is not anti-Hermitian (deviation {dev:.3e})"
            )));
        }
    }
    let theta = u_a.alpha * plan.t;
    if (theta - plan.alpha_tau).abs() > 1e-9 * theta.max(1.0) {
        return Err(Error::invalid(format!(
            "plan was built for α·t = {}, encoding gives {theta}",
            plan.alpha_tau
        )));
    }
    if plan.r == 0 {
        return Ok(w0.amps().to_vec());
    }

    let h = times_minus_i(u_a);
    let cs = jacobi_anger_coefficients(plan);
    let anc = u_a.anc_reg();
    let sys = u_a.sys_reg();
    let total = s + u_a.ancillas;

    let mut amps = vec![C64::new(0.0, 0.0); 1 << total];
    amps[..dim].copy_from_slice(w0.amps());
    let mut state = StateVector::from_amps(amps)?;
    let h_adj = ActionNode::adjoint(h.action.clone());

    // T_0 contributes the input itself.
    let mut acc: Vec<C64> = w0.amps().iter().map(|a| cs[0] * a).collect();
    for k in 1..=plan.r {
        if k > 1 && u_a.ancillas > 0 {
            statevec::apply(&ActionNode::Reflection { reg: anc.clone() }, &mut state)?;
        }
        let node = if k % 2 == 1 { &h.action } else { &h_adj };
        statevec::apply(node, &mut state)?;
        let sub = statevec::extract_subspace(&state, &sys, &[(anc.clone(), 0)])?;
        for (a, v) in acc.iter_mut().zip(sub.amps()) {
            *a += cs[k] * v;
        }
    }
    Ok(acc)
}

/// Applies `exp(−At)` to a normalized state through the truncated Chebyshev
/// combination of the encoding `U_A`, returning the renormalized projected
/// state and the exact all-ancillas-zero projection probability of the
/// combination circuit.
pub fn evolve_be(
    u_a: &BlockEncoding,
    w0: &StateVector,
    plan: &EvolutionPlan,
) -> Result<(StateVector, f64)> {
    let acc = apply_expansion(u_a, w0, plan)?;
    if plan.r == 0 {
        return Ok((w0.clone(), 1.0));
    }
    let lambda: f64 = jacobi_anger_coefficients(plan)
        .iter()
        .map(|z| z.norm())
        .sum();
    let norm_sq: f64 = acc.iter().map(|z| z.norm_sqr()).sum();
    let success = norm_sq / (lambda * lambda);
    if success < plan.success_floor {
        return Err(Error::Numeric(format!(
            "evolution amplitude vanished (success probability {success:.3e})"
        )));
    }
    let scale = C64::new(1.0 / norm_sq.sqrt(), 0.0);
    let out = StateVector::from_amps(acc.iter().map(|z| z * scale).collect())?;
    Ok((out, success))
}

/// Dense oracle: `exp(−A·t)·w0`.
pub fn evolve_exact(a: &ComplexMatrix, w0: &StateVector, t: f64) -> Result<StateVector> {
    if a.rows() != w0.amps().len() {
        return Err(Error::dim(format!(
            "operator is {}x{}, state has {} amplitudes",
            a.rows(),
            a.cols(),
            w0.amps().len()
        )));
    }
    let e = matexp(a, -t)?;
    StateVector::from_amps(e.mul_vec(w0.amps())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::becalc::{chebyshev, lcu};
    use crate::diagenc::diag_be_from_table;
    use crate::statevec::Reg;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Direct power series, accurate for small arguments.
    fn bessel_series(k: usize, x: f64) -> f64 {
        let mut sum = 0.0;
        for m in 0..40usize {
            let mut term = if m % 2 == 0 { 1.0 } else { -1.0 };
            term *= (x / 2.0).powi((2 * m + k) as i32);
            for i in 1..=m {
                term /= i as f64;
            }
            for i in 1..=(m + k) {
                term /= i as f64;
            }
            sum += term;
        }
        sum
    }

    #[test]
    fn zero_time_plan_is_identity() {
        let plan = plan_evolution(3.0, 0.0, 1e-8).unwrap();
        assert_eq!(plan.r, 0);
        assert_eq!(plan.bessel_weights, vec![1.0]);
        let plan = plan_evolution(0.0, 2.0, 1e-8).unwrap();
        assert_eq!(plan.r, 0);
        assert!(plan_evolution(1.0, 1.0, 0.0).is_err());
        assert!(plan_evolution(1.0, -1.0, 1e-6).is_err());
    }

    #[test]
    fn plan_weights_match_series_and_tail_is_tight() {
        let eps = 1e-8;
        let plan = plan_evolution(1.0, 1.0, eps).unwrap();
        for (k, &w) in plan.bessel_weights.iter().enumerate() {
            let want = bessel_series(k, 1.0);
            assert!(
                (w - want).abs() < 1e-12,
                "J_{k}(1): got {w}, series {want}"
            );
        }
        // Tail bound holds at R and fails at R−1 (R exceeds the hard floor
        // here, so the scan is the binding constraint).
        let tail = |r: usize| -> f64 {
            2.0 * (r + 1..80).map(|k| bessel_series(k, 1.0).abs()).sum::<f64>()
        };
        assert!((std::f64::consts::E / 2.0).ceil() as usize <= plan.r - 1);
        assert!(tail(plan.r) <= eps);
        assert!(tail(plan.r - 1) > eps);
    }

    #[test]
    fn truncation_order_is_monotone() {
        let base = plan_evolution(4.0, 1.0, 1e-6).unwrap();
        let longer = plan_evolution(4.0, 2.0, 1e-6).unwrap();
        let tighter = plan_evolution(4.0, 1.0, 1e-10).unwrap();
        assert!(longer.r >= base.r);
        assert!(tighter.r >= base.r);
        assert!(base.r >= (std::f64::consts::E * 4.0 / 2.0).ceil() as usize);
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<C64> = (0..1usize << n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amps(amps.iter().map(|z| z / norm).collect()).unwrap()
    }

    fn random_anti_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for cc in 0..n {
                m[(r, cc)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        m.sub(&m.adjoint()).unwrap().scale(c(0.5, 0.0))
    }

    #[test]
    fn exact_oracle_identity_norm_and_semigroup() {
        let a = random_anti_hermitian(8, 7);
        let w0 = random_state(3, 11);
        let same = evolve_exact(&a, &w0, 0.0).unwrap();
        for (x, y) in same.amps().iter().zip(w0.amps()) {
            assert!((x - y).norm() < 1e-12);
        }
        let w1 = evolve_exact(&a, &w0, 0.7).unwrap();
        assert!((w1.norm() - 1.0).abs() < 1e-10);
        let w2_direct = evolve_exact(&a, &w0, 1.8).unwrap();
        let w2_chained = evolve_exact(&a, &evolve_exact(&a, &w0, 1.1).unwrap(), 0.7).unwrap();
        for (x, y) in w2_direct.amps().iter().zip(w2_chained.amps()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    fn imag_diag_be(values: &[f64], alpha: f64) -> BlockEncoding {
        let vals: Vec<C64> = values.iter().map(|&v| c(0.0, v)).collect();
        diag_be_from_table(&vals, alpha, Some("u_test")).unwrap()
    }

    #[test]
    fn zero_time_evolution_returns_input() {
        let be = imag_diag_be(&[0.3, -0.8, 0.5, 0.1], 1.0);
        let w0 = random_state(2, 3);
        let plan = plan_evolution(be.alpha, 0.0, 1e-8).unwrap();
        let (out, p) = evolve_be(&be, &w0, &plan).unwrap();
        assert_eq!(p, 1.0);
        for (x, y) in out.amps().iter().zip(w0.amps()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn encoded_evolution_matches_exact_oracle() {
        let be = imag_diag_be(&[0.3, -0.8, 0.5, 0.1], 1.0);
        let w0 = random_state(2, 5);
        let t = 0.8;
        let plan = plan_evolution(be.alpha, t, 1e-9).unwrap();
        let (out, p) = evolve_be(&be, &w0, &plan).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);
        assert!(p > 1e-3, "success probability {p}");
        let exact = evolve_exact(be.reference.as_ref().unwrap(), &w0, t).unwrap();
        let mut dev = 0.0f64;
        for (x, y) in out.amps().iter().zip(exact.amps()) {
            dev = dev.max((x - y).norm());
        }
        assert!(dev < 1e-9 + 1e-11, "deviation {dev:.3e}");
    }

    #[test]
    fn hermitian_target_is_rejected() {
        let vals: Vec<C64> = [0.4, -0.2, 0.9, 0.5].iter().map(|&v| c(v, 0.0)).collect();
        let be = diag_be_from_table(&vals, 1.0, None).unwrap();
        let w0 = random_state(2, 9);
        let plan = plan_evolution(be.alpha, 0.5, 1e-6).unwrap();
        assert!(evolve_be(&be, &w0, &plan).is_err());
    }

    #[test]
    fn success_floor_aborts() {
        let be = imag_diag_be(&[0.3, -0.8, 0.5, 0.1], 1.0);
        let w0 = random_state(2, 5);
        let mut plan = plan_evolution(be.alpha, 0.8, 1e-9).unwrap();
        plan.success_floor = 2.0;
        assert!(evolve_be(&be, &w0, &plan).is_err());
    }

    #[test]
    fn incremental_walk_equals_literal_combination_circuit() {
        let be = imag_diag_be(&[0.6, -0.4, 0.2, -0.9], 1.0);
        let w0 = random_state(2, 13);
        let t = 0.9;
        let plan = plan_evolution(be.alpha, t, 1e-6).unwrap();
        let (out, p) = evolve_be(&be, &w0, &plan).unwrap();

        let h = times_minus_i(&be);
        let cs = jacobi_anger_coefficients(&plan);
        let arms: Vec<BlockEncoding> = (0..=plan.r)
            .map(|k| chebyshev(&h, k).unwrap())
            .collect();
        let expanded = lcu(&cs, &arms, "exp-test").unwrap();
        let s = expanded.sys_qubits;
        let total = s + expanded.ancillas;
        let mut amps = vec![c(0.0, 0.0); 1 << total];
        amps[..1 << s].copy_from_slice(w0.amps());
        let mut state = StateVector::from_amps(amps).unwrap();
        statevec::apply(&expanded.action, &mut state).unwrap();
        let sub = statevec::extract_subspace(
            &state,
            &Reg::contiguous(0, s),
            &[(Reg::contiguous(s, expanded.ancillas), 0)],
        )
        .unwrap();
        let p_literal: f64 = sub.amps().iter().map(|z| z.norm_sqr()).sum();
        assert!((p - p_literal).abs() < 1e-12, "{p} vs {p_literal}");
        let scale = c(p.sqrt(), 0.0);
        for (x, y) in out.amps().iter().zip(sub.amps()) {
            assert!((x * scale - y).norm() < 1e-12);
        }
    }

    #[test]
    fn wave_generator_evolution_agrees_with_dense_oracle() {
        use crate::diagenc::{diag_be_fourier, fit_fourier_2d};
        use crate::pdeops::{assemble_wave_a, prepare_initial, WaveLayout};

        fn speed(x: f64, y: f64) -> f64 {
            1.0 - (-((x - 0.5) * (x - 0.5) / 0.005 + (y - 0.5) * (y - 0.5) / 0.08)).exp()
        }
        let wl = WaveLayout::demo(2);
        let fit = fit_fourier_2d(&speed, 2, 2, 32).unwrap();
        let c_be = diag_be_fourier(&fit.series, &wl.diag_layout(), Some("u_c")).unwrap();
        let a = assemble_wave_a(&c_be, &wl).unwrap();
        let w0 = prepare_initial(&wl).unwrap();
        let t = 0.5;
        let eps = 1e-6;
        let plan = plan_evolution(a.alpha, t, eps).unwrap();
        let (out, p) = evolve_be(&a, &w0, &plan).unwrap();
        assert!(p > 1e-4, "success probability {p}");
        let exact = evolve_exact(a.reference.as_ref().unwrap(), &w0, t).unwrap();
        let mut dev = 0.0f64;
        for (x, y) in out.amps().iter().zip(exact.amps()) {
            dev = dev.max((x - y).norm());
        }
        assert!(dev < eps + 1e-9, "deviation {dev:.3e}");
    }
}
