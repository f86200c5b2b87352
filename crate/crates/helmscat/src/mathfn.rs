//! Special functions: spherical Bessel/Hankel functions, Legendre and
//! normalized associated Legendre functions, complex and real spherical
//! harmonics, and least-squares spherical-harmonic expansions.

use crate::geom::Vec3;
use crate::linalg::{least_squares_qr, CMatrix, LinalgError};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MathError {
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("overflow in spherical Bessel y recurrence at l={l}, x={x}")]
    BesselOverflow { l: usize, x: f64 },
    #[error("order |m| = {m} exceeds degree l = {l}")]
    InvalidOrder { l: usize, m: i64 },
    #[error("need at least {needed} samples for degree {degree}, got {got}")]
    TooFewSamples { needed: usize, degree: usize, got: usize },
    #[error("sampling design matrix is rank deficient (cond > {0:.3e}); lower the degree or improve coverage")]
    RankDeficient(f64),
}

/// Flat index of the (l, m) coefficient, m in -l..=l.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    l * l + (l as i64 + m) as usize
}

/// Coefficient count for a degree-L expansion.
#[inline]
pub fn sh_len(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

// ---------------------------------------------------------------------------
// Spherical Bessel functions
// ---------------------------------------------------------------------------

/// All of j_0..j_lmax by downward (Miller) recurrence, anchored on the
/// closed forms of j_0 and j_1 (whichever is larger, so zeros of sin x do
/// not poison the normalization).
pub fn sph_bessel_j_upto(lmax: usize, x: f64) -> Result<Vec<f64>, MathError> {
    if x <= 0.0 {
        return Err(MathError::NonPositiveArgument(x));
    }
    let j0 = x.sin() / x;
    if lmax == 0 {
        return Ok(vec![j0]);
    }
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let start = lmax.max(x.ceil() as usize) + 40;
    let mut f_hi = 0.0_f64;
    let mut f = 1e-30_f64;
    let mut out = vec![0.0; lmax + 1];
    for n in (0..=start).rev() {
        let f_lo = (2 * n + 3) as f64 / x * f - f_hi;
        f_hi = f;
        f = f_lo;
        // f now holds the unnormalized value at order n
        if n <= lmax {
            out[n] = f;
        }
        if f.abs() > 1e250 {
            let s = 1e-250;
            f *= s;
            f_hi *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    let c = if j0.abs() >= j1.abs() { j0 / out[0] } else { j1 / out[1] };
    for v in out.iter_mut() {
        *v *= c;
    }
    Ok(out)
}

pub fn sph_bessel_j(l: usize, x: f64) -> Result<f64, MathError> {
    Ok(sph_bessel_j_upto(l, x)?[l])
}

/// All of y_0..y_lmax by upward recurrence (stable for y).
pub fn sph_bessel_y_upto(lmax: usize, x: f64) -> Result<Vec<f64>, MathError> {
    if x <= 0.0 {
        return Err(MathError::NonPositiveArgument(x));
    }
    let mut out = Vec::with_capacity(lmax + 1);
    let y0 = -x.cos() / x;
    out.push(y0);
    if lmax == 0 {
        return Ok(out);
    }
    out.push(-x.cos() / (x * x) - x.sin() / x);
    for n in 1..lmax {
        let next = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        if !next.is_finite() || next.abs() > 1e280 {
            return Err(MathError::BesselOverflow { l: n + 1, x });
        }
        out.push(next);
    }
    Ok(out)
}

pub fn sph_bessel_y(l: usize, x: f64) -> Result<f64, MathError> {
    Ok(sph_bessel_y_upto(l, x)?[l])
}

/// Outgoing spherical Hankel function h_l^(1) = j_l + i y_l.
pub fn sph_hankel1(l: usize, x: f64) -> Result<Complex64, MathError> {
    Ok(Complex64::new(sph_bessel_j(l, x)?, sph_bessel_y(l, x)?))
}

pub fn sph_hankel1_upto(lmax: usize, x: f64) -> Result<Vec<Complex64>, MathError> {
    let j = sph_bessel_j_upto(lmax, x)?;
    let y = sph_bessel_y_upto(lmax, x)?;
    Ok(j.into_iter().zip(y).map(|(a, b)| Complex64::new(a, b)).collect())
}

/// Derivative from the table of values: f_l' = f_{l-1} - (l+1)/x f_l, and
/// f_0' = -f_1.
pub fn sph_deriv_from_table<T>(table: &[T], l: usize, x: f64) -> T
where
    T: Copy
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>
        + std::ops::Neg<Output = T>,
{
    if l == 0 {
        -table[1]
    } else {
        table[l - 1] - table[l] * ((l + 1) as f64 / x)
    }
}

// ---------------------------------------------------------------------------
// Legendre polynomials
// ---------------------------------------------------------------------------

/// P_0(x)..P_lmax(x).
pub fn legendre_upto(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(1.0);
    if lmax == 0 {
        return p;
    }
    p.push(x);
    for l in 1..lmax {
        let lf = l as f64;
        p.push(((2.0 * lf + 1.0) * x * p[l] - lf * p[l - 1]) / (lf + 1.0));
    }
    p
}

// ---------------------------------------------------------------------------
// Normalized associated Legendre functions and spherical harmonics
// ---------------------------------------------------------------------------

#[inline]
fn packed(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized associated Legendre table p[l][m] for 0 <= m <= l <= L,
/// with the Condon-Shortley phase, so that Y_lm = p_lm(cos theta) e^{im phi}
/// is orthonormal on the sphere. Packed as l*(l+1)/2 + m.
pub fn norm_assoc_legendre(degree: usize, cos_theta: f64, sin_theta: f64) -> Vec<f64> {
    let mut p = vec![0.0; packed(degree, degree) + 1];
    let mut pmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    p[packed(0, 0)] = pmm;
    for m in 1..=degree {
        pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta;
        p[packed(m, m)] = pmm;
    }
    for m in 0..degree {
        p[packed(m + 1, m)] = cos_theta * ((2 * m + 3) as f64).sqrt() * p[packed(m, m)];
    }
    for m in 0..=degree {
        for l in m + 2..=degree {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[packed(l, m)] = a * (cos_theta * p[packed(l - 1, m)] - b * p[packed(l - 2, m)]);
        }
    }
    p
}

fn p_signed(p: &[f64], l: usize, m: i64) -> f64 {
    // extension to negative order: p_{l,-m} = (-1)^m p_{l,m}
    let ma = m.unsigned_abs() as usize;
    if ma > l {
        return 0.0;
    }
    let v = p[packed(l, ma)];
    if m < 0 && ma % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Orthonormal complex spherical harmonic Y_lm(theta, phi).
pub fn sph_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64, MathError> {
    if m.unsigned_abs() as usize > l {
        return Err(MathError::InvalidOrder { l, m });
    }
    let p = norm_assoc_legendre(l, theta.cos(), theta.sin());
    let plm = p_signed(&p, l, m);
    Ok(Complex64::from_polar(1.0, m as f64 * phi) * plm)
}

/// Reusable workspace for repeated associated-Legendre evaluations in hot
/// loops.
#[derive(Debug, Default, Clone)]
pub struct LegendreScratch {
    p: Vec<f64>,
    cis: Vec<Complex64>,
}

/// Writes into `p` the packed normalized associated Legendre table.
fn norm_assoc_legendre_into(degree: usize, cos_theta: f64, sin_theta: f64, p: &mut Vec<f64>) {
    let need = packed(degree, degree) + 1;
    p.clear();
    p.resize(need, 0.0);
    let mut pmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    p[packed(0, 0)] = pmm;
    for m in 1..=degree {
        pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta;
        p[packed(m, m)] = pmm;
    }
    for m in 0..degree {
        p[packed(m + 1, m)] = cos_theta * ((2 * m + 3) as f64).sqrt() * p[packed(m, m)];
    }
    for m in 0..=degree {
        for l in m + 2..=degree {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[packed(l, m)] = a * (cos_theta * p[packed(l - 1, m)] - b * p[packed(l - 2, m)]);
        }
    }
}

/// All Y_lm up to `degree` at one point, written into `out` (allocation
/// free given a scratch).
pub fn sh_basis_complex_into(
    degree: usize,
    theta: f64,
    phi: f64,
    ws: &mut LegendreScratch,
    out: &mut [Complex64],
) {
    debug_assert_eq!(out.len(), sh_len(degree));
    norm_assoc_legendre_into(degree, theta.cos(), theta.sin(), &mut ws.p);
    ws.cis.clear();
    for m in 0..=degree {
        ws.cis.push(Complex64::from_polar(1.0, m as f64 * phi));
    }
    for l in 0..=degree {
        for m in 0..=l as i64 {
            let plm = ws.p[packed(l, m as usize)];
            let v = ws.cis[m as usize] * plm;
            out[sh_index(l, m)] = v;
            if m > 0 {
                let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
                out[sh_index(l, -m)] = v.conj() * sign;
            }
        }
    }
}

/// All Y_lm up to `degree` at one point, indexed by [`sh_index`].
pub fn sh_basis_complex(degree: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; sh_len(degree)];
    let mut ws = LegendreScratch::default();
    sh_basis_complex_into(degree, theta, phi, &mut ws, &mut out);
    out
}

/// Value and tangential derivatives of a real expansion at one point:
/// (f, df/dtheta, (1/sin theta) df/dphi), allocation free given a scratch.
pub fn real_expansion_jet(
    degree: usize,
    theta: f64,
    phi: f64,
    coeffs: &[f64],
    ws: &mut LegendreScratch,
) -> (f64, f64, f64) {
    debug_assert_eq!(coeffs.len(), sh_len(degree));
    let ct = theta.cos();
    let st = theta.sin();
    norm_assoc_legendre_into(degree, ct, st, &mut ws.p);
    let p = &ws.p;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut value = 0.0;
    let mut d_theta = 0.0;
    let mut d_phi = 0.0;
    for l in 0..=degree {
        let lf = l as f64;
        for m in 0..=l {
            let mf = m as f64;
            let plm = p[packed(l, m)];
            let up = if m < l {
                ((lf - mf) * (lf + mf + 1.0)).sqrt() * p[packed(l, m + 1)]
            } else {
                0.0
            };
            let down = ((lf + mf) * (lf - mf + 1.0)).sqrt() * p_signed(p, l, m as i64 - 1);
            let dp = 0.5 * (up - down);
            if m == 0 {
                let c = coeffs[sh_index(l, 0)];
                value += c * plm;
                d_theta += c * dp;
            } else {
                let q = {
                    let c = -0.5 * ((2.0 * lf + 1.0) / (2.0 * lf - 1.0)).sqrt();
                    let t1 =
                        ((lf + mf) * (lf + mf - 1.0)).sqrt() * p_signed(p, l - 1, m as i64 - 1);
                    let t2 = if m + 1 < l {
                        ((lf - mf) * (lf - mf - 1.0)).sqrt() * p[packed(l - 1, m + 1)]
                    } else {
                        0.0
                    };
                    c * (t1 + t2)
                };
                let (smp, cmp_) = (mf * phi).sin_cos();
                let cc = coeffs[sh_index(l, m as i64)];
                let cs = coeffs[sh_index(l, -(m as i64))];
                value += sqrt2 * plm * (cc * cmp_ + cs * smp);
                d_theta += sqrt2 * dp * (cc * cmp_ + cs * smp);
                d_phi += sqrt2 * q * (cs * cmp_ - cc * smp);
            }
        }
    }
    (value, d_theta, d_phi)
}

/// Values and tangential derivatives of the orthonormal real spherical
/// harmonic basis at one point. `d_phi_over_sin` holds (1/sin theta) d/d phi,
/// evaluated without dividing by sin theta (pole safe).
#[derive(Debug, Clone)]
pub struct RealShJet {
    pub values: Vec<f64>,
    pub d_theta: Vec<f64>,
    pub d_phi_over_sin: Vec<f64>,
}

/// Real orthonormal basis: m = 0 zonal, m > 0 cosine, m < 0 sine sectors.
pub fn real_sh_jet(degree: usize, theta: f64, phi: f64) -> RealShJet {
    let ct = theta.cos();
    let st = theta.sin();
    let p = norm_assoc_legendre(degree, ct, st);
    let n = sh_len(degree);
    let mut values = vec![0.0; n];
    let mut d_theta = vec![0.0; n];
    let mut d_phi_over_sin = vec![0.0; n];
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=degree {
        let lf = l as f64;
        for m in 0..=l {
            let mf = m as f64;
            let plm = p[packed(l, m)];
            // d/d theta via the ladder identity (no sin division)
            let up = if m < l {
                ((lf - mf) * (lf + mf + 1.0)).sqrt() * p[packed(l, m + 1)]
            } else {
                0.0
            };
            let down = ((lf + mf) * (lf - mf + 1.0)).sqrt() * p_signed(&p, l, m as i64 - 1);
            let dp = 0.5 * (up - down);
            // m p_lm / sin theta via the degree-lowering ladder identity
            let q = if m >= 1 {
                let c = -0.5 * ((2.0 * lf + 1.0) / (2.0 * lf - 1.0)).sqrt();
                let t1 = ((lf + mf) * (lf + mf - 1.0)).sqrt() * p_signed(&p, l - 1, m as i64 - 1);
                let t2 = if m + 1 < l {
                    ((lf - mf) * (lf - mf - 1.0)).sqrt() * p[packed(l - 1, m + 1)]
                } else {
                    0.0
                };
                c * (t1 + t2)
            } else {
                0.0
            };
            if m == 0 {
                values[sh_index(l, 0)] = plm;
                d_theta[sh_index(l, 0)] = dp;
            } else {
                let (smp, cmp_) = (mf * phi).sin_cos();
                values[sh_index(l, m as i64)] = sqrt2 * plm * cmp_;
                values[sh_index(l, -(m as i64))] = sqrt2 * plm * smp;
                d_theta[sh_index(l, m as i64)] = sqrt2 * dp * cmp_;
                d_theta[sh_index(l, -(m as i64))] = sqrt2 * dp * smp;
                d_phi_over_sin[sh_index(l, m as i64)] = -sqrt2 * q * smp;
                d_phi_over_sin[sh_index(l, -(m as i64))] = sqrt2 * q * cmp_;
            }
        }
    }
    RealShJet { values, d_theta, d_phi_over_sin }
}

// ---------------------------------------------------------------------------
// Spherical-harmonic expansions
// ---------------------------------------------------------------------------

/// Truncated complex spherical-harmonic expansion.
#[derive(Debug, Clone)]
pub struct SHExpansion {
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl SHExpansion {
    pub fn new(degree: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), sh_len(degree));
        Self { degree, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, l: usize, m: i64) -> Complex64 {
        self.coeffs[sh_index(l, m)]
    }

    pub fn eval(&self, dir: Vec3) -> Complex64 {
        let (theta, phi) = dir.to_angles();
        let basis = sh_basis_complex(self.degree, theta, phi);
        basis
            .iter()
            .zip(&self.coeffs)
            .fold(Complex64::ZERO, |acc, (b, c)| acc + b * c)
    }

    /// Sum of |c_lm|^2; equals the sphere integral of |f|^2 (Parseval).
    pub fn power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Result of a least-squares fit on scattered directional samples.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub expansion: SHExpansion,
    /// Weighted residual norm sqrt(sum w |fit - sample|^2).
    pub residual: f64,
    /// Condition estimate of the design matrix.
    pub condition: f64,
    /// Basis directions the samples could not support (coefficients zeroed).
    pub truncated: usize,
}

/// Least-squares fit of a degree-L expansion to complex samples at unit
/// directions, via rank-revealing QR on the (weighted) design matrix.
/// Rank deficiency of the design matrix is an error; the condition number
/// is always reported so callers can judge how far an extension beyond the
/// sampled cap can be trusted.
pub fn fit_expansion(
    samples: &[(Vec3, Complex64)],
    degree: usize,
    weights: Option<&[f64]>,
) -> Result<FitResult, MathError> {
    fit_expansion_with(samples, degree, weights, 1e-10)
}

/// [`fit_expansion`] with an explicit rank-truncation threshold (relative
/// to the leading R diagonal of the pivoted QR).
pub fn fit_expansion_with(
    samples: &[(Vec3, Complex64)],
    degree: usize,
    weights: Option<&[f64]>,
    trunc_tol: f64,
) -> Result<FitResult, MathError> {
    let n = sh_len(degree);
    if samples.len() < n {
        return Err(MathError::TooFewSamples { needed: n, degree, got: samples.len() });
    }
    if let Some(w) = weights {
        assert_eq!(w.len(), samples.len());
    }
    let m = samples.len();
    let mut design = CMatrix::zeros(m, n);
    let mut rhs = vec![Complex64::ZERO; m];
    let mut ws = LegendreScratch::default();
    for (i, (dir, value)) in samples.iter().enumerate() {
        let (theta, phi) = dir.to_angles();
        let sw = weights.map_or(1.0, |w| w[i]).sqrt();
        sh_basis_complex_into(degree, theta, phi, &mut ws, design.row_mut(i));
        for v in design.row_mut(i) {
            *v *= sw;
        }
        rhs[i] = value * sw;
    }
    let out = match least_squares_qr(design, rhs, trunc_tol) {
        Ok(out) => out,
        Err(LinalgError::RankDeficient { condition }) => {
            return Err(MathError::RankDeficient(condition))
        }
        Err(e) => panic!("unexpected least-squares failure: {e}"),
    };
    Ok(FitResult {
        expansion: SHExpansion::new(degree, out.x),
        residual: out.residual,
        condition: out.condition,
        truncated: out.truncated,
    })
}
