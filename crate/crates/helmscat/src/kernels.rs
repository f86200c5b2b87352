//! Free-space Helmholtz kernel, its derivatives, and the far-field kernel.
//!
//! All kernels are evaluated in closed form; node counts are small enough
//! that direct O(N^2) evaluation dominates the cost profile anyway.

use crate::geom::Vec3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("wave number must be positive, got {0}")]
    NonPositiveWavenumber(f64),
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
}

/// Positive wave number k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavenumber(f64);

impl Wavenumber {
    pub fn new(k: f64) -> Result<Self, KernelError> {
        if k > 0.0 && k.is_finite() {
            Ok(Self(k))
        } else {
            Err(KernelError::NonPositiveWavenumber(k))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Free-space kernel g(x, y) = e^{ik|x-y|} / (4 pi |x-y|).
#[inline]
pub fn kernel_g(x: Vec3, y: Vec3, k: Wavenumber) -> Complex64 {
    let r = (x - y).norm();
    debug_assert!(r > 0.0, "kernel_g at coincident points");
    Complex64::from_polar(1.0, k.get() * r) / (4.0 * PI * r)
}

pub fn kernel_g_checked(x: Vec3, y: Vec3, k: Wavenumber) -> Result<Complex64, KernelError> {
    if (x - y).norm() == 0.0 {
        return Err(KernelError::CoincidentPoints);
    }
    Ok(kernel_g(x, y, k))
}

/// Radial derivative g'(r) = e^{ikr} (ikr - 1) / (4 pi r^2).
#[inline]
fn kernel_g_radial_deriv(r: f64, k: f64) -> Complex64 {
    Complex64::from_polar(1.0, k * r) * Complex64::new(-1.0, k * r) / (4.0 * PI * r * r)
}

/// Gradient of g with respect to the second argument.
#[inline]
pub fn kernel_g_grad_y(x: Vec3, y: Vec3, k: Wavenumber) -> [Complex64; 3] {
    let d = y - x;
    let r = d.norm();
    let gp = kernel_g_radial_deriv(r, k.get());
    let s = gp / r;
    [s * d.x, s * d.y, s * d.z]
}

/// Normal derivative with respect to the surface point: dg(x, s)/dN_s.
#[inline]
pub fn kernel_g_normal(x: Vec3, s: Vec3, normal_s: Vec3, k: Wavenumber) -> Complex64 {
    let d = s - x;
    let r = d.norm();
    kernel_g_radial_deriv(r, k.get()) * (d.dot(normal_s) / r)
}

/// Normal derivative with respect to the target point: dg(x, s)/dN_x.
#[inline]
pub fn kernel_g_normal_x(x: Vec3, normal_x: Vec3, s: Vec3, k: Wavenumber) -> Complex64 {
    let d = x - s;
    let r = d.norm();
    kernel_g_radial_deriv(r, k.get()) * (d.dot(normal_x) / r)
}

/// Gradient with respect to x of the double-layer kernel dg(x, s)/dN_s.
pub fn kernel_g_normal_grad_x(x: Vec3, s: Vec3, normal_s: Vec3, k: Wavenumber) -> [Complex64; 3] {
    let kk = k.get();
    let d = x - s;
    let r = d.norm();
    let dn = d.dot(normal_s);
    let e = Complex64::from_polar(1.0, kk * r);
    // d/dN_s g = -g'(r) (d . n)/r; grad_x of that:
    // -[g''(r) - g'(r)/r] (d.n) d/r^2 - g'(r) n / r
    let gp = kernel_g_radial_deriv(r, kk);
    let gpp = e * Complex64::new(2.0 - kk * kk * r * r, -2.0 * kk * r) / (4.0 * PI * r * r * r);
    let c1 = -(gpp - gp / r) * (dn / (r * r));
    let c2 = -gp / r;
    [
        c1 * d.x + c2 * normal_s.x,
        c1 * d.y + c2 * normal_s.y,
        c1 * d.z + c2 * normal_s.z,
    ]
}

/// Plane-wave far-field kernel e^{-ik beta . s}; unit modulus.
#[inline]
pub fn farfield_kernel(beta: Vec3, s: Vec3, k: Wavenumber) -> Complex64 {
    Complex64::from_polar(1.0, -k.get() * beta.dot(s))
}

/// Normal derivative of the far-field kernel with respect to the surface
/// point: -ik (beta . N_s) e^{-ik beta . s}.
#[inline]
pub fn farfield_kernel_normal(beta: Vec3, s: Vec3, normal_s: Vec3, k: Wavenumber) -> Complex64 {
    farfield_kernel(beta, s, k) * Complex64::new(0.0, -k.get() * beta.dot(normal_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SplitMix64;
    use proptest::prelude::*;

    fn k(v: f64) -> Wavenumber {
        Wavenumber::new(v).unwrap()
    }

    #[test]
    fn kernel_closed_form_values() {
        let g = kernel_g(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), k(1.0));
        let expect = Complex64::new(1.0_f64.cos(), 1.0_f64.sin()) / (4.0 * PI);
        assert!((g - expect).norm() < 1e-15);
        assert!((g.re - 0.04300).abs() < 1e-5);
        assert!((g.im - 0.06697).abs() < 1e-5);

        // k -> 0 limit approaches the Laplace kernel 1/(4 pi r)
        let g_small = kernel_g(Vec3::ZERO, Vec3::new(0.0, 2.0, 0.0), k(1e-9));
        assert!((g_small - Complex64::new(1.0 / (8.0 * PI), 0.0)).norm() < 1e-9);

        assert!(kernel_g_checked(Vec3::ZERO, Vec3::ZERO, k(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(seed in 0u64..5000) {
            let mut rng = SplitMix64::new(seed);
            let mut r = || 4.0 * rng.next_f64() - 2.0;
            let x = Vec3::new(r(), r(), r());
            let mut y = Vec3::new(r(), r(), r());
            if (x - y).norm() < 1e-6 {
                y = y + Vec3::new(1.0, 0.0, 0.0);
            }
            let kk = k(0.5 + 2.0 * rng.next_f64());
            prop_assert!((kernel_g(x, y, kk) - kernel_g(y, x, kk)).norm() < 1e-15);
        }

        #[test]
        fn farfield_kernel_has_unit_modulus(seed in 0u64..5000) {
            let mut rng = SplitMix64::new(seed);
            let mut r = || 2.0 * rng.next_f64() - 1.0;
            let beta = Vec3::new(r(), r(), r() + 2.0).normalized();
            let s = Vec3::new(r(), r(), r());
            let v = farfield_kernel(beta, s, k(1.7));
            prop_assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn farfield_kernel_phases() {
        // orthogonal phase
        let v = farfield_kernel(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 2.0, 0.0), k(3.0));
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // k=2, beta=z, s=(0,0,pi/2) -> e^{-i pi} = -1
        let v = farfield_kernel(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, PI / 2.0), k(2.0));
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn normal_derivative_matches_finite_difference() {
        let kk = k(2.0);
        let x = Vec3::new(0.1, -0.4, 0.9);
        let s = Vec3::new(0.8, 0.3, 0.2);
        let n = Vec3::new(1.0, 2.0, -0.5).normalized();
        let h = 1e-6;
        let fd = (kernel_g(x, s + n * h, kk) - kernel_g(x, s - n * h, kk)) / (2.0 * h);
        let an = kernel_g_normal(x, s, n, kk);
        assert!((an - fd).norm() < 1e-7, "{an} vs {fd}");
        // antisymmetry under normal flip
        assert!((kernel_g_normal(x, s, -n, kk) + an).norm() < 1e-15);
    }

    #[test]
    fn static_limit_is_laplace_double_layer() {
        // k -> 0 on a sphere: -cos(angle between d and n) / (4 pi r^2) pattern
        let kk = k(1e-10);
        let s = Vec3::new(1.0, 0.0, 0.0);
        let n = Vec3::new(1.0, 0.0, 0.0);
        let x = Vec3::new(3.0, 0.0, 0.0);
        let d = s - x;
        let r = d.norm();
        let expect = -d.dot(n).signum() / (4.0 * PI * r * r);
        let got = kernel_g_normal(x, s, n, kk);
        assert!((got - Complex64::new(expect, 0.0)).norm() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn normal_x_derivative_matches_finite_difference() {
        let kk = k(1.3);
        let x = Vec3::new(0.1, -0.4, 0.9);
        let s = Vec3::new(1.8, 0.3, 0.2);
        let n = Vec3::new(-0.3, 1.0, 0.4).normalized();
        let h = 1e-6;
        let fd = (kernel_g(x + n * h, s, kk) - kernel_g(x - n * h, s, kk)) / (2.0 * h);
        let an = kernel_g_normal_x(x, n, s, kk);
        assert!((an - fd).norm() < 1e-7);
    }

    #[test]
    fn double_layer_gradient_matches_finite_difference() {
        let kk = k(1.9);
        let x = Vec3::new(0.2, 0.1, 1.4);
        let s = Vec3::new(-0.6, 0.8, 0.0);
        let ns = Vec3::new(0.2, -1.0, 0.7).normalized();
        let h = 1e-6;
        let grad = kernel_g_normal_grad_x(x, s, ns, kk);
        for (axis, e) in [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ]
        .iter()
        .enumerate()
        {
            let fd = (kernel_g_normal(x + *e * h, s, ns, kk)
                - kernel_g_normal(x - *e * h, s, ns, kk))
                / (2.0 * h);
            assert!((grad[axis] - fd).norm() < 1e-6, "axis {axis}: {} vs {fd}", grad[axis]);
        }
    }

    #[test]
    fn kernel_satisfies_helmholtz_equation() {
        // 6th-order centered second-difference Laplacian on g at distance
        // >= 1 from the source: |(lap + k^2) g| < 1e-6 |g|
        let kk = k(1.4);
        let y = Vec3::ZERO;
        let x = Vec3::new(0.9, 0.7, 0.4);
        let h = 1e-2;
        let c = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
        let mut lap = Complex64::ZERO;
        for axis in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)] {
            for (j, cj) in c.iter().enumerate() {
                let off = (j as f64 - 3.0) * h;
                lap += *cj * kernel_g(x + axis * off, y, kk);
            }
        }
        lap /= h * h;
        let g = kernel_g(x, y, kk);
        let resid = (lap + kk.get() * kk.get() * g).norm();
        assert!(resid < 1e-6 * g.norm(), "helmholtz residual {resid:.3e}");
    }

    #[test]
    fn kernel_radiation_behavior() {
        // |d_r g - ik g| decays like r^{-2}: fitted log-log slope near -2
        let kk = k(1.0);
        let y = Vec3::ZERO;
        let dir = Vec3::new(0.3, -0.5, 0.81).normalized();
        let vals: Vec<(f64, f64)> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&r| {
                let x = dir * r;
                let grad = kernel_g_grad_y(y, x, kk); // gradient in x by symmetry
                let dr = Vec3::new(grad[0].re, grad[1].re, grad[2].re);
                let di = Vec3::new(grad[0].im, grad[1].im, grad[2].im);
                let radial = Complex64::new(dr.dot(dir), di.dot(dir));
                let mis = (radial - Complex64::i() * kk.get() * kernel_g(x, y, kk)).norm();
                (r.ln(), mis.ln())
            })
            .collect();
        let slope = (vals[2].1 - vals[0].1) / (vals[2].0 - vals[0].0);
        assert!((slope + 2.0).abs() < 0.05, "slope={slope}");
    }
}
