//! Dense complex linear algebra: LU with partial pivoting, one step of
//! iterative refinement, a Hager-style 1-norm condition estimate, a Hermitian
//! Jacobi eigensolver for small least-squares systems, and Gauss-Legendre
//! rules.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at step {step})")]
    Singular { step: usize, pivot: f64 },
    #[error("least-squares system is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Fills rows in parallel; `fill(i, row)` writes row `i`.
    pub fn par_fill_rows<F>(rows: usize, cols: usize, fill: F) -> Self
    where
        F: Fn(usize, &mut [Complex64]) + Sync,
    {
        let mut m = Self::zeros(rows, cols);
        m.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| fill(i, row));
        m
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(Complex64::ZERO, |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Conjugate-transpose product `A^H x`.
    pub fn mul_vec_conj_transpose(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![Complex64::ZERO; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, a) in sums.iter_mut().zip(self.row(i)) {
                *s += a.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}

/// LU factors of a square matrix, `P A = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: CMatrix,
    piv: Vec<usize>,
}

pub fn lu_factor(mut a: CMatrix) -> Result<LuFactors, LinalgError> {
    let n = a.rows;
    assert_eq!(a.rows, a.cols, "lu_factor requires a square matrix");
    let mut piv = Vec::with_capacity(n);
    for k in 0..n {
        // pivot search in column k
        let mut p = k;
        let mut pmax = a.get(k, k).norm();
        for i in k + 1..n {
            let v = a.get(i, k).norm();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax == 0.0 || !pmax.is_finite() {
            return Err(LinalgError::Singular { step: k, pivot: pmax });
        }
        piv.push(p);
        if p != k {
            let (lo, hi) = a.data.split_at_mut(p * n);
            lo[k * n..(k + 1) * n].swap_with_slice(&mut hi[..n]);
        }
        let inv_pivot = Complex64::new(1.0, 0.0) / a.get(k, k);
        for i in k + 1..n {
            let l = a.get(i, k) * inv_pivot;
            a.set(i, k, l);
        }
        // trailing update, parallel over rows
        let (upper, lower) = a.data.split_at_mut((k + 1) * n);
        let urow = &upper[k * n..];
        lower[..(n - k - 1) * n].par_chunks_mut(n).for_each(|row| {
            let l = row[k];
            if l != Complex64::ZERO {
                for j in k + 1..n {
                    row[j] -= l * urow[j];
                }
            }
        });
    }
    Ok(LuFactors { lu: a, piv })
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.lu.rows
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        // forward: L y = P b (unit lower)
        for i in 1..n {
            let row = self.lu.row(i);
            let mut acc = Complex64::ZERO;
            for j in 0..i {
                acc += row[j] * x[j];
            }
            x[i] -= acc;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = Complex64::ZERO;
            for j in i + 1..n {
                acc += row[j] * x[j];
            }
            x[i] = (x[i] - acc) / row[i];
        }
        x
    }

    /// Solves `A^H x = b` using the same factors.
    pub fn solve_conj_transpose(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // A^H = U^H L^H P, solve U^H y = b (lower, non-unit), then L^H z = y
        for i in 0..n {
            let mut acc = Complex64::ZERO;
            for j in 0..i {
                acc += self.lu.get(j, i).conj() * x[j];
            }
            x[i] = (x[i] - acc) / self.lu.get(i, i).conj();
        }
        for i in (0..n).rev() {
            let mut acc = Complex64::ZERO;
            for j in i + 1..n {
                acc += self.lu.get(j, i).conj() * x[j];
            }
            x[i] -= acc;
        }
        for k in (0..n).rev() {
            x.swap(k, self.piv[k]);
        }
        x
    }

    /// Solve with one step of iterative refinement against the original
    /// matrix; returns the solution and the final relative residual
    /// `|b - A x| / |b|` in the max norm.
    pub fn solve_refined(&self, a: &CMatrix, b: &[Complex64]) -> (Vec<Complex64>, f64) {
        let mut x = self.solve(b);
        let r = residual(a, &x, b);
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let r = residual(a, &x, b);
        let bnorm = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let rnorm = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        (x, rnorm / bnorm)
    }

    /// Hager-style estimate of the 1-norm of `A^{-1}`; multiply by
    /// `|A|_1` for a condition estimate.
    pub fn inv_norm_one_estimate(&self) -> f64 {
        let n = self.n();
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.norm()).sum();
            let xi: Vec<Complex64> = y
                .iter()
                .map(|v| {
                    if v.norm() > 0.0 {
                        v / v.norm()
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })
                .collect();
            let z = self.solve_conj_transpose(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            let xnorm: f64 = x.iter().map(|v| v.norm()).sum();
            if zmax <= z.iter().zip(&x).map(|(zi, xi)| (zi.conj() * xi).re).sum::<f64>().abs() / xnorm.max(1e-300)
            {
                break;
            }
            x = vec![Complex64::ZERO; n];
            x[jmax] = Complex64::new(1.0, 0.0);
        }
        est
    }
}

fn residual(a: &CMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Outcome of a rank-revealing least-squares solve.
#[derive(Debug, Clone)]
pub struct LsqOutcome {
    pub x: Vec<Complex64>,
    /// Ratio of extreme R-diagonal magnitudes (condition estimate of the
    /// design matrix before truncation).
    pub condition: f64,
    pub residual: f64,
    /// Basis directions dropped because the samples cannot support them.
    pub truncated: usize,
}

/// Least-squares solution of an overdetermined complex system by
/// Householder QR followed by a one-sided Jacobi SVD of the triangular
/// factor. Singular directions below `trunc_tol` of the largest singular
/// value are truncated (their coefficients set to zero) so ill-supported
/// directions cannot amplify noise; a spectrum collapse below 1e-15
/// (degenerate sampling) is an error.
pub fn least_squares_qr(
    a: CMatrix,
    b: Vec<Complex64>,
    trunc_tol: f64,
) -> Result<LsqOutcome, LinalgError> {
    let m = a.rows;
    let n = a.cols;
    if m < n {
        return Err(LinalgError::Shape(format!("need rows {m} >= cols {n}")));
    }
    assert_eq!(b.len(), m);
    let a_orig = a.clone();
    let b_orig = b.clone();
    let (mut r, c) = householder_qr(a, b);

    // one-sided Jacobi on the n x n factor: R = U Sigma V^H, V accumulated
    let mut v = CMatrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, Complex64::new(1.0, 0.0));
    }
    for _sweep in 0..40 {
        let mut converged = true;
        for p in 0..n {
            for q in p + 1..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = Complex64::ZERO;
                for i in 0..n {
                    let cp = r.get(i, p);
                    let cq = r.get(i, q);
                    app += cp.norm_sqr();
                    aqq += cq.norm_sqr();
                    apq += cp.conj() * cq;
                }
                if apq.norm() <= 1e-15 * (app * aqq).sqrt().max(1e-300) {
                    continue;
                }
                converged = false;
                let u = apq / apq.norm();
                let zeta = (aqq - app) / (2.0 * apq.norm());
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;
                let uc = u.conj();
                for i in 0..n {
                    let cp = r.get(i, p);
                    let cq = r.get(i, q);
                    r.set(i, p, cp * cos - uc * cq * sin);
                    r.set(i, q, cp * sin + uc * cq * cos);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, vp * cos - uc * vq * sin);
                    v.set(i, q, vp * sin + uc * vq * cos);
                }
            }
        }
        if converged {
            break;
        }
    }
    let mut sigma = vec![0.0_f64; n];
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            s += r.get(i, j).norm_sqr();
        }
        sigma[j] = s.sqrt();
    }
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let smin = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = smax / smin.max(1e-300);
    if smin < smax * 1e-15 {
        return Err(LinalgError::RankDeficient { condition });
    }
    // x = sum over retained directions of v_j (u_j^H c) / sigma_j, with
    // u_j = r_col_j / sigma_j
    let mut x = vec![Complex64::ZERO; n];
    let mut truncated = 0;
    for j in 0..n {
        if sigma[j] < smax * trunc_tol {
            truncated += 1;
            continue;
        }
        let mut proj = Complex64::ZERO;
        for i in 0..n {
            proj += r.get(i, j).conj() * c[i];
        }
        proj /= sigma[j] * sigma[j];
        for i in 0..n {
            x[i] += v.get(i, j) * proj;
        }
    }
    // residual against the original system
    let ax = a_orig.mul_vec(&x);
    let residual = b_orig
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(LsqOutcome { x, condition, residual, truncated })
}

/// Householder QR; returns the n x n upper factor and the transformed
/// right-hand side restricted to the first n rows.
fn householder_qr(mut a: CMatrix, mut b: Vec<Complex64>) -> (CMatrix, Vec<Complex64>) {
    let m = a.rows;
    let n = a.cols;
    for j in 0..n {
        let mut alpha2 = 0.0;
        for i in j..m {
            alpha2 += a.get(i, j).norm_sqr();
        }
        let alpha = alpha2.sqrt();
        if alpha == 0.0 {
            continue;
        }
        let xjj = a.get(j, j);
        let phase = if xjj.norm() > 0.0 { xjj / xjj.norm() } else { Complex64::new(1.0, 0.0) };
        let beta = -phase * alpha;
        let mut v = vec![Complex64::ZERO; m - j];
        v[0] = xjj - beta;
        for i in j + 1..m {
            v[i - j] = a.get(i, j);
        }
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 > 0.0 {
            let scale = 2.0 / vnorm2;
            for col in j + 1..n {
                let mut dot = Complex64::ZERO;
                for i in j..m {
                    dot += v[i - j].conj() * a.get(i, col);
                }
                dot *= scale;
                for i in j..m {
                    let t = a.get(i, col) - v[i - j] * dot;
                    a.set(i, col, t);
                }
            }
            let mut dot = Complex64::ZERO;
            for i in j..m {
                dot += v[i - j].conj() * b[i];
            }
            dot *= scale;
            for i in j..m {
                b[i] -= v[i - j] * dot;
            }
        }
        a.set(j, j, beta);
        for i in j + 1..m {
            a.set(i, j, Complex64::ZERO);
        }
    }
    let mut r = CMatrix::zeros(n, n);
    for i in 0..n {
        for jj in i..n {
            r.set(i, jj, a.get(i, jj));
        }
    }
    b.truncate(n);
    (r, b)
}

/// Cholesky solve of a real symmetric positive definite system; used by the
/// Levenberg-Marquardt normal equations. Returns `None` when the matrix is
/// not positive definite.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_poly_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_poly_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Deterministic splitmix64 stream for seeded test-pair sampling.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
