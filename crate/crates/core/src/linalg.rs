//! Dense complex linear algebra: matrices, Kronecker products, matrix
//! exponentials, spectral norms, and state vectors.
//!
//! Everything here is desk-scale by design. Dense products and exponentials are
//! the *reference* side of every construction in this crate; the matrix-free
//! engine in [`crate::statevec`] is the production side, and the two are checked
//! against each other in tests. Dimensions are capped (default `2^14` rows) so a
//! typo in a qubit count fails fast instead of allocating gigabytes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

/// Complex scalar used throughout.
pub type C64 = Complex64;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        let show = self.rows.min(8);
        for r in 0..show {
            write!(f, "  ")?;
            for c in 0..self.cols.min(8) {
                let z = self[(r, c)];
                write!(f, "{:+.3}{:+.3}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        if show < self.rows {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Square matrix with the given diagonal.
    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds from nested rows; panics on ragged input (test convenience).
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let nr = rows.len();
        let nc = rows.first().map_or(0, |r| r.len());
        Self::from_fn(nr, nc, |r, c| {
            assert_eq!(rows[r].len(), nc, "ragged rows");
            rows[r][c]
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim("add: shape mismatch"));
        }
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim("sub: shape mismatch"));
        }
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o -= b;
        }
        Ok(out)
    }

    pub fn scale(&self, z: C64) -> ComplexMatrix {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= z;
        }
        out
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum (operator infinity norm).
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖M − M†‖_max`; zero for Hermitian matrices.
    pub fn hermitian_deviation(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_norm()).unwrap_or(f64::INFINITY)
    }

    /// `‖M + M†‖_max`; zero for anti-Hermitian matrices.
    pub fn anti_hermitian_deviation(&self) -> f64 {
        self.add(&self.adjoint()).map(|d| d.max_norm()).unwrap_or(f64::INFINITY)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::dim("mul_vec: length mismatch"));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            let base = r * self.cols;
            for c in 0..self.cols {
                acc += self.data[base + c] * v[c];
            }
            out[r] = acc;
        }
        Ok(out)
    }

    pub fn to_na(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)])
    }

    pub fn from_na(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

/// Kronecker product `a ⊗ b` with the left factor on the high-order index bits,
/// capped at `cap` output rows.
pub fn kron_capped(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a
        .rows
        .checked_mul(b.rows)
        .ok_or_else(|| Error::invalid("kron: row overflow"))?;
    let cols = a
        .cols
        .checked_mul(b.cols)
        .ok_or_else(|| Error::invalid("kron: col overflow"))?;
    if rows > cap || cols > cap {
        return Err(Error::TooLarge {
            dim: rows.max(cols),
            cap,
        });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let z = a[(ar, ac)];
            if z.norm_sqr() == 0.0 {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = z * b[(br, bc)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product with the default dense cap.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_capped(a, b, crate::DENSE_CAP)
}

/// Matrix exponential `exp(M·t)`.
///
/// Uses an eigendecomposition when `M` is Hermitian or anti-Hermitian to within
/// `1e-12` (relative to the largest entry), and scaling-and-squaring with a
/// Taylor core otherwise.
pub fn matexp(m: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::dim("matexp: matrix must be square"));
    }
    if !m.all_finite() || !t.is_finite() {
        return Err(Error::NonFinite("matexp input"));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    let scale = m.max_norm().max(1.0);
    let tol = 1e-12 * scale;
    if m.hermitian_deviation() <= tol {
        // M = Q Λ Q† with real Λ.
        return expm_hermitian_phase(m, |lam| C64::new(lam * t, 0.0).exp());
    }
    if m.anti_hermitian_deviation() <= tol {
        // i·M is Hermitian: M = -i(iM) and exp(Mt) = Q e^{-iΛt} Q†.
        let im = m.scale(C64::new(0.0, 1.0));
        return expm_hermitian_phase(&im, |lam| (C64::new(0.0, -lam * t)).exp());
    }
    expm_scaling_squaring(m, t)
}

/// Shared eigendecomposition path: given Hermitian `H`, returns `Q f(Λ) Q†`.
fn expm_hermitian_phase(h: &ComplexMatrix, f: impl Fn(f64) -> C64) -> Result<ComplexMatrix> {
    let na = h.to_na();
    let eig = nalgebra::SymmetricEigen::new(na);
    let q = &eig.eigenvectors;
    let n = h.rows();
    let mut fq = DMatrix::<C64>::zeros(n, n);
    for c in 0..n {
        let phase = f(eig.eigenvalues[c]);
        for r in 0..n {
            fq[(r, c)] = q[(r, c)] * phase;
        }
    }
    let out = &fq * q.adjoint();
    Ok(ComplexMatrix::from_na(&out))
}

fn expm_scaling_squaring(m: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let n = m.rows();
    let mt = m.scale(C64::new(t, 0.0));
    let norm = mt.inf_norm();
    let s = if norm > 0.5 {
        ((norm / 0.5).log2().ceil() as u32).min(60)
    } else {
        0
    };
    let small = mt.scale(C64::new(1.0 / (2f64.powi(s as i32)), 0.0));
    // Taylor core; terms fall below 1e-20 quickly at norm <= 0.5.
    let mut acc = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=24u32 {
        term = term.matmul(&small)?.scale(C64::new(1.0 / k as f64, 0.0));
        acc = acc.add(&term)?;
        if term.max_norm() < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        acc = acc.matmul(&acc)?;
    }
    if !acc.all_finite() {
        return Err(Error::NonFinite("matexp result"));
    }
    Ok(acc)
}

/// Spectral norm (largest singular value) by power iteration on `M†M`.
///
/// Deterministic start vector, relative tolerance `1e-12`, iteration cap 50_000.
/// The dense SVD is kept as an independent oracle in tests, not used here.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 || m.max_norm() == 0.0 {
        return 0.0;
    }
    // Deterministic pseudo-random start (splitmix64) to avoid adversarial
    // orthogonality with the top singular vector.
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z = z ^ (z >> 31);
        (z as f64 / u64::MAX as f64) - 0.5
    };
    let mut v: Vec<C64> = (0..m.cols()).map(|_| C64::new(next(), next())).collect();
    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= nv;
    }
    let mut sigma = 0.0f64;
    for _ in 0..50_000 {
        let mv = m.mul_vec(&v).expect("shape checked");
        let mut w = vec![C64::new(0.0, 0.0); m.cols()];
        // w = M† (M v)
        for r in 0..m.rows() {
            let a = mv[r];
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for c in 0..m.cols() {
                w[c] += m[(r, c)].conj() * a;
            }
        }
        let wn = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        let new_sigma = wn.sqrt(); // ‖M†Mv‖^(1/2) → top singular value
        for z in w.iter_mut() {
            *z /= wn;
        }
        v = w;
        if (new_sigma - sigma).abs() <= 1e-12 * new_sigma.max(1.0) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}

/// Amplitudes over a register of `nq` qubits.
///
/// The basis index is read most-significant-bit first against the global
/// register order documented in [`crate::statevec`]; amplitude `amps[i]`
/// belongs to the computational basis state whose bits are the binary digits
/// of `i`.
#[derive(Clone, Debug)]
pub struct StateVector {
    nq: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Computational basis state `|index⟩`.
    pub fn basis(nq: usize, index: usize) -> Self {
        let dim = 1usize << nq;
        assert!(index < dim, "basis index out of range");
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { nq, amps }
    }

    /// Wraps raw amplitudes; the length must be a power of two and all entries finite.
    pub fn from_amps(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::invalid("state length must be a nonzero power of two"));
        }
        if !amps.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("state amplitudes"));
        }
        let nq = amps.len().trailing_zeros() as usize;
        Ok(StateVector { nq, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.nq
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.nq != other.nq {
            return Err(Error::dim("inner: qubit count mismatch"));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Checks `‖ψ‖ = 1` to within `1e-12`.
    pub fn assert_normalized(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Numeric(format!("state norm {n} is not 1")));
        }
        Ok(())
    }

    pub fn scale(&mut self, z: C64) {
        for a in self.amps.iter_mut() {
            *a *= z;
        }
    }

    /// `self += z · other` (elementwise).
    pub fn axpy(&mut self, z: C64, other: &StateVector) -> Result<()> {
        if self.nq != other.nq {
            return Err(Error::dim("axpy: qubit count mismatch"));
        }
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += z * b;
        }
        Ok(())
    }

    /// `‖self − other‖₂`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Dense SVD via nalgebra, exposed for test oracles and the dilation backend.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let svd = m.to_na().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Eigen-decomposition of a Hermitian matrix: `(eigenvalues, unitary Q)` with
/// `M = Q diag(Λ) Q†`. Used by the dilation backend for matrix square roots.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::dim("hermitian_eigen: matrix must be square"));
    }
    if m.hermitian_deviation() > 1e-10 * m.max_norm().max(1.0) {
        return Err(Error::invalid("hermitian_eigen: input is not Hermitian"));
    }
    let eig = nalgebra::SymmetricEigen::new(m.to_na());
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    Ok((vals, ComplexMatrix::from_na(&eig.eigenvectors)))
}

/// Solves `argmin_{x ≥ 0} ‖Ax − b‖₂` by the Lawson–Hanson active-set method
/// (small systems only; subproblems solved by SVD).
pub fn nonneg_lstsq(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let am = DMatrix::<f64>::from_fn(rows, cols, |r, c| a[r][c]);
    let bv = DVector::<f64>::from_fn(rows, |r, _| b[r]);
    let scale = bv.norm().max(1.0);
    let tol = 1e-11 * scale * (am.norm().max(1.0));

    let solve_subset = |passive: &[usize]| -> DVector<f64> {
        let sub = DMatrix::<f64>::from_fn(rows, passive.len(), |r, k| am[(r, passive[k])]);
        sub.svd(true, true)
            .solve(&bv, 1e-13)
            .unwrap_or_else(|_| DVector::zeros(passive.len()))
    };

    let mut x = DVector::<f64>::zeros(cols);
    let mut passive: Vec<usize> = Vec::new();
    for _outer in 0..(3 * cols.max(1)) {
        let w = am.transpose() * (&bv - &am * &x);
        let candidate = (0..cols)
            .filter(|i| !passive.contains(i))
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        match candidate {
            Some(i) if w[i] > tol => passive.push(i),
            _ => break,
        }
        loop {
            let z = solve_subset(&passive);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in passive.iter().enumerate() {
                    x[i] = z[k];
                }
                break;
            }
            // Step toward z until the first passive variable hits zero.
            let mut alpha = 1.0f64;
            for (k, &i) in passive.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[i] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            for (k, &i) in passive.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
            }
            let dropped: Vec<usize> = passive
                .iter()
                .copied()
                .filter(|&i| x[i] <= tol / scale)
                .collect();
            for i in &dropped {
                x[*i] = 0.0;
            }
            passive.retain(|i| !dropped.contains(i));
            if passive.is_empty() {
                break;
            }
        }
    }
    x.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Independent elementwise Kronecker oracle.
    fn kron_oracle(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |r, c| {
            a[(r / b.rows(), c / b.cols())] * b[(r % b.rows(), c % b.cols())]
        })
    }

    /// Independent matrix-exponential oracle: 12th-order Taylor steps with the
    /// step count doubled until two refinements agree to 1e-11.
    fn matexp_oracle(m: &ComplexMatrix, t: f64) -> ComplexMatrix {
        fn taylor_step(m: &ComplexMatrix, dt: f64) -> ComplexMatrix {
            let n = m.rows();
            let mut acc = ComplexMatrix::identity(n);
            let mut term = ComplexMatrix::identity(n);
            for k in 1..=12u32 {
                term = term
                    .matmul(&m.scale(c(dt / k as f64, 0.0)))
                    .unwrap();
                acc = acc.add(&term).unwrap();
            }
            acc
        }
        let mut steps = 1usize.max((m.inf_norm() * t.abs()).ceil() as usize);
        let mut prev: Option<ComplexMatrix> = None;
        loop {
            let step = taylor_step(m, t / steps as f64);
            let mut out = ComplexMatrix::identity(m.rows());
            for _ in 0..steps {
                out = out.matmul(&step).unwrap();
            }
            if let Some(p) = &prev {
                if out.sub(p).unwrap().max_norm() < 1e-11 {
                    return out;
                }
            }
            prev = Some(out);
            steps *= 2;
            assert!(steps < 1 << 22, "matexp oracle failed to converge");
        }
    }

    fn rand_matrix(n: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn kron_of_pauli_x_and_z() {
        let x = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ]);
        let z = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0)],
        ]);
        let k = kron(&x, &z).unwrap();
        let expected = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        assert_eq!(k.sub(&expected).unwrap().max_norm(), 0.0);
    }

    #[test]
    fn kron_matches_elementwise_oracle_and_associates() {
        for seed in 0..5u64 {
            let a = rand_matrix(2, seed);
            let b = rand_matrix(3, seed + 100);
            let d = rand_matrix(2, seed + 200);
            let k = kron(&a, &b).unwrap();
            assert!(k.sub(&kron_oracle(&a, &b)).unwrap().max_norm() < 1e-15);
            let left = kron(&kron(&a, &b).unwrap(), &d).unwrap();
            let right = kron(&a, &kron(&b, &d).unwrap()).unwrap();
            assert!(left.sub(&right).unwrap().max_norm() < 1e-14);
        }
    }

    #[test]
    fn kron_mixed_product_rule() {
        // (A⊗B)(C⊗D) = (AC)⊗(BD)
        let a = rand_matrix(2, 1);
        let b = rand_matrix(3, 2);
        let cc = rand_matrix(2, 3);
        let d = rand_matrix(3, 4);
        let lhs = kron(&a, &b)
            .unwrap()
            .matmul(&kron(&cc, &d).unwrap())
            .unwrap();
        let rhs = kron(&a.matmul(&cc).unwrap(), &b.matmul(&d).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_norm() < 1e-13);
    }

    #[test]
    fn kron_respects_cap() {
        let a = ComplexMatrix::identity(128);
        let b = ComplexMatrix::identity(256);
        match kron_capped(&a, &b, 1 << 14) {
            Err(Error::TooLarge { dim, cap }) => {
                assert_eq!(dim, 32768);
                assert_eq!(cap, 16384);
            }
            other => panic!("expected TooLarge, got {:?}", other.map(|m| m.rows())),
        }
    }

    #[test]
    fn matexp_rotation_closed_form() {
        // exp(iθX) = cos(θ) I + i sin(θ) X, anti-Hermitian path.
        let theta = 0.7343;
        let ix = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 1.0), c(0.0, 0.0)],
        ]);
        let e = matexp(&ix, theta).unwrap();
        let expected = ComplexMatrix::from_rows(&[
            vec![c(theta.cos(), 0.0), c(0.0, theta.sin())],
            vec![c(0.0, theta.sin()), c(theta.cos(), 0.0)],
        ]);
        assert!(e.sub(&expected).unwrap().max_norm() < 1e-13);
    }

    #[test]
    fn matexp_matches_taylor_oracle_on_random_inputs() {
        for seed in 0..4u64 {
            let m = rand_matrix(5, seed); // generic, non-normal
            let t = 0.3 + 0.2 * seed as f64;
            let got = matexp(&m, t).unwrap();
            let want = matexp_oracle(&m, t);
            assert!(
                got.sub(&want).unwrap().max_norm() < 1e-9,
                "seed {seed}: deviation {}",
                got.sub(&want).unwrap().max_norm()
            );
        }
    }

    #[test]
    fn matexp_hermitian_path_matches_oracle() {
        let g = rand_matrix(6, 42);
        let h = g.add(&g.adjoint()).unwrap().scale(c(0.5, 0.0));
        let got = matexp(&h, 0.9).unwrap();
        let want = matexp_oracle(&h, 0.9);
        assert!(got.sub(&want).unwrap().max_norm() < 1e-10);
    }

    #[test]
    fn matexp_semigroup_property() {
        let m = rand_matrix(4, 7);
        let (s, t) = (0.4, 0.35);
        let whole = matexp(&m, s + t).unwrap();
        let split = matexp(&m, s).unwrap().matmul(&matexp(&m, t).unwrap()).unwrap();
        assert!(whole.sub(&split).unwrap().max_norm() < 1e-10);
    }

    #[test]
    fn matexp_ode_residual_on_probe_vectors() {
        // d/dt exp(Mt)v = M exp(Mt)v, probed by central differences.
        let m = rand_matrix(4, 11);
        let t = 0.6;
        let dt = 1e-5;
        let v: Vec<C64> = (0..4).map(|i| c(1.0 / (i as f64 + 1.0), 0.3 * i as f64)).collect();
        let plus = matexp(&m, t + dt).unwrap().mul_vec(&v).unwrap();
        let minus = matexp(&m, t - dt).unwrap().mul_vec(&v).unwrap();
        let mid = matexp(&m, t).unwrap().mul_vec(&v).unwrap();
        let mmid = m.mul_vec(&mid).unwrap();
        let mut resid: f64 = 0.0;
        for i in 0..4 {
            let deriv = (plus[i] - minus[i]) / c(2.0 * dt, 0.0);
            resid = resid.max((deriv - mmid[i]).norm());
        }
        assert!(resid < 1e-6, "ODE residual {resid}");
    }

    #[test]
    fn matexp_rejects_non_finite() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(matexp(&m, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn spectral_norm_known_values() {
        let m = ComplexMatrix::from_diag(&[c(0.2, 0.0), c(-3.5, 0.0), c(1.0, 1.0)]);
        assert!((spectral_norm(&m) - 3.5).abs() < 1e-10);
        let nilpotent = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(2.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        assert!((spectral_norm(&nilpotent) - 2.0).abs() < 1e-10);
        assert_eq!(spectral_norm(&ComplexMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn spectral_norm_matches_svd_oracle() {
        for seed in 0..6u64 {
            let m = rand_matrix(7, seed + 1000);
            let got = spectral_norm(&m);
            let want = singular_values(&m)[0];
            assert!(
                (got - want).abs() < 1e-9 * want.max(1.0),
                "seed {seed}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn state_vector_basics() {
        let mut s = StateVector::basis(3, 5);
        assert_eq!(s.dim(), 8);
        assert_eq!(s.norm(), 1.0);
        s.assert_normalized().unwrap();
        let other = StateVector::basis(3, 5);
        assert_eq!(s.inner(&other).unwrap(), c(1.0, 0.0));
        s.scale(c(0.5, 0.0));
        assert!(s.assert_normalized().is_err());
        assert!(StateVector::from_amps(vec![c(1.0, 0.0); 3]).is_err());
        assert!(StateVector::from_amps(vec![c(f64::INFINITY, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn nonneg_lstsq_recovers_nonnegative_solution() {
        // Overdetermined system with known nonnegative generator.
        let a: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let x = i as f64;
                vec![x, x * x, 1.0]
            })
            .collect();
        let truth = [2.0, 0.5, 3.0];
        let b: Vec<f64> = a.iter().map(|row| {
            row.iter().zip(truth.iter()).map(|(r, t)| r * t).sum()
        }).collect();
        let x = nonneg_lstsq(&a, &b);
        for (got, want) in x.iter().zip(truth.iter()) {
            assert!((got - want).abs() < 1e-6, "{x:?}");
        }
    }
}
