//! Star-shaped surfaces and their quadrature grids.
//!
//! A surface is a positive radius function over the unit sphere, stored as
//! real orthonormal spherical-harmonic coefficients, plus a rigid
//! translation. Discretization is a tensor Gauss-Legendre (polar) x
//! trapezoid (azimuthal) rule on the parameter sphere, pushed forward
//! through the radius map; nodes are Nystrom-style quadrature points, not
//! flat panels.

use crate::linalg::gauss_legendre;
use crate::mathfn::{real_expansion_jet, real_sh_jet, sh_index, sh_len, LegendreScratch};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("mean radius coefficient c00 must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("coefficient count {got} does not match degree {degree} (expected {expected})")]
    CoefficientCount { degree: usize, expected: usize, got: usize },
    #[error("surface is not star-shaped: radius {r:.3e} at theta={theta:.3}, phi={phi:.3}")]
    NotStarShaped { r: f64, theta: f64, phi: f64 },
    #[error("grid too coarse: need n_theta >= 4 and n_phi >= 8, got ({0}, {1})")]
    GridTooCoarse(usize, usize),
}

/// Plain 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self * (1.0 / n)
    }

    /// Polar/azimuthal angles of the direction, theta in [0, pi],
    /// phi in [0, 2 pi).
    pub fn to_angles(self) -> (f64, f64) {
        let r = self.norm();
        let theta = (self.z / r).clamp(-1.0, 1.0).acos();
        let mut phi = self.y.atan2(self.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        (theta, phi)
    }

    pub fn from_angles(theta: f64, phi: f64) -> Vec3 {
        let (st, ct) = (theta.sin(), theta.cos());
        Vec3::new(st * phi.cos(), st * phi.sin(), ct)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Gauss-Legendre x trapezoid quadrature on the unit sphere. Returns unit
/// directions and solid-angle weights summing to 4 pi. Node order is polar
/// index major (theta ascending), azimuthal minor.
pub fn sphere_quadrature(n_theta: usize, n_phi: usize) -> (Vec<Vec3>, Vec<f64>) {
    let (gl_nodes, gl_weights) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut dirs = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for it in 0..n_theta {
        // cos(theta) descends as theta ascends
        let ct = -gl_nodes[it];
        let theta = ct.clamp(-1.0, 1.0).acos();
        for ip in 0..n_phi {
            let phi = dphi * ip as f64;
            dirs.push(Vec3::from_angles(theta, phi));
            weights.push(gl_weights[it] * dphi);
        }
    }
    (dirs, weights)
}

/// Star-shaped surface: radius map over directions plus a translation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub label: String,
    pub center: [f64; 3],
    #[serde(rename = "L_geo")]
    pub degree: usize,
    /// Real orthonormal spherical-harmonic coefficients of the radius,
    /// (degree+1)^2 values indexed l^2 + l + m.
    pub coeffs: Vec<f64>,
}

/// Point, outward unit normal, and area Jacobians at a surface location.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceJet {
    pub point: Vec3,
    pub normal: Vec3,
    /// dS / dOmega = r sqrt(r^2 + |grad r|^2).
    pub jacobian_solid_angle: f64,
    pub radius: f64,
}

impl SurfaceSpec {
    /// Sphere of the given radius: c00 = radius * sqrt(4 pi), all other
    /// coefficients zero.
    pub fn make_sphere(radius: f64, center: Vec3) -> Result<Self, GeomError> {
        if radius <= 0.0 {
            return Err(GeomError::NonPositiveRadius(radius));
        }
        let mut coeffs = vec![0.0; 1];
        coeffs[0] = radius * (4.0 * PI).sqrt();
        Ok(Self {
            label: format!("sphere_r{radius}"),
            center: [center.x, center.y, center.z],
            degree: 0,
            coeffs,
        })
    }

    /// Validated construction from raw coefficients.
    pub fn from_coeffs(
        label: impl Into<String>,
        center: Vec3,
        degree: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self, GeomError> {
        let spec = Self {
            label: label.into(),
            center: [center.x, center.y, center.z],
            degree,
            coeffs,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Sphere plus a single real-harmonic perturbation of the radius.
    pub fn perturbed_sphere(
        radius: f64,
        l: usize,
        m: i64,
        amplitude: f64,
        center: Vec3,
    ) -> Result<Self, GeomError> {
        if radius <= 0.0 {
            return Err(GeomError::NonPositiveRadius(radius));
        }
        let degree = l;
        let mut coeffs = vec![0.0; sh_len(degree)];
        coeffs[0] = radius * (4.0 * PI).sqrt();
        coeffs[sh_index(l, m)] += amplitude;
        Self::from_coeffs(
            format!("sphere_r{radius}_plus_{amplitude}Y{l}{m}"),
            center,
            degree,
            coeffs,
        )
    }

    /// Spheroid with equatorial semi-axis `a` and polar semi-axis `c`,
    /// projected onto zonal harmonics up to `degree`.
    pub fn spheroid(a: f64, c: f64, degree: usize, center: Vec3) -> Result<Self, GeomError> {
        if a <= 0.0 || c <= 0.0 {
            return Err(GeomError::NonPositiveRadius(a.min(c)));
        }
        let radius = |ct: f64| {
            let st2 = 1.0 - ct * ct;
            1.0 / (st2 / (a * a) + ct * ct / (c * c)).sqrt()
        };
        let (nodes, weights) = gauss_legendre(200);
        let mut coeffs = vec![0.0; sh_len(degree)];
        for (x, w) in nodes.iter().zip(&weights) {
            let theta = x.clamp(-1.0, 1.0).acos();
            let jet = real_sh_jet(degree, theta, 0.0);
            let r = radius(*x);
            for l in 0..=degree {
                // zonal projection: c_l0 = 2 pi int r(theta) Y_l0 sin d theta
                coeffs[sh_index(l, 0)] += 2.0 * PI * w * r * jet.values[sh_index(l, 0)];
            }
        }
        Self::from_coeffs(format!("spheroid_a{a}_c{c}"), center, degree, coeffs)
    }

    /// Returns a copy translated by `d`.
    pub fn translated(&self, d: Vec3) -> Self {
        let mut s = self.clone();
        s.center = [self.center[0] + d.x, self.center[1] + d.y, self.center[2] + d.z];
        s
    }

    /// Returns a copy with the radius map scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeomError> {
        if factor <= 0.0 {
            return Err(GeomError::NonPositiveRadius(factor));
        }
        let mut s = self.clone();
        for c in s.coeffs.iter_mut() {
            *c *= factor;
        }
        s.label = format!("{}_x{factor}", self.label);
        Ok(s)
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(self.center[0], self.center[1], self.center[2])
    }

    /// Checks coefficient layout, c00 > 0, and star-shapedness on a probe
    /// grid.
    pub fn validate(&self) -> Result<(), GeomError> {
        let expected = sh_len(self.degree);
        if self.coeffs.len() != expected {
            return Err(GeomError::CoefficientCount {
                degree: self.degree,
                expected,
                got: self.coeffs.len(),
            });
        }
        if self.coeffs[0] <= 0.0 {
            return Err(GeomError::NonPositiveMean(self.coeffs[0]));
        }
        let n_probe = (2 * self.degree + 8).max(16);
        let (dirs, _) = sphere_quadrature(n_probe, 2 * n_probe);
        for d in &dirs {
            let (theta, phi) = d.to_angles();
            let r = self.radius_at(theta, phi);
            if r <= 0.0 {
                return Err(GeomError::NotStarShaped { r, theta, phi });
            }
        }
        Ok(())
    }

    pub fn radius_at(&self, theta: f64, phi: f64) -> f64 {
        let jet = real_sh_jet(self.degree, theta, phi);
        jet.values.iter().zip(&self.coeffs).map(|(v, c)| v * c).sum()
    }

    /// Largest radius over the validation grid; bounds the surface inside
    /// center + r_max * S^2.
    pub fn max_radius(&self) -> f64 {
        let n_probe = (2 * self.degree + 8).max(16);
        let (dirs, _) = sphere_quadrature(n_probe, 2 * n_probe);
        dirs.iter()
            .map(|d| {
                let (t, p) = d.to_angles();
                self.radius_at(t, p)
            })
            .fold(0.0, f64::max)
    }

    pub fn min_radius(&self) -> f64 {
        let n_probe = (2 * self.degree + 8).max(16);
        let (dirs, _) = sphere_quadrature(n_probe, 2 * n_probe);
        dirs.iter()
            .map(|d| {
                let (t, p) = d.to_angles();
                self.radius_at(t, p)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Point, analytic outward normal, and solid-angle Jacobian at the
    /// given parameter direction.
    pub fn surface_jet(&self, theta: f64, phi: f64) -> SurfaceJet {
        let mut ws = LegendreScratch::default();
        self.surface_jet_ws(theta, phi, &mut ws)
    }

    /// Allocation-free variant for hot loops.
    pub fn surface_jet_ws(&self, theta: f64, phi: f64, ws: &mut LegendreScratch) -> SurfaceJet {
        let (r, dr_dt, dr_dp) =
            real_expansion_jet(self.degree, theta, phi, &self.coeffs, ws);
        let dir = Vec3::from_angles(theta, phi);
        let (st, ct) = (theta.sin(), theta.cos());
        let theta_hat = Vec3::new(ct * phi.cos(), ct * phi.sin(), -st);
        let phi_hat = Vec3::new(-phi.sin(), phi.cos(), 0.0);
        let grad = theta_hat * dr_dt + phi_hat * dr_dp;
        let normal_unnorm = dir * r - grad;
        let jac = r * (r * r + grad.dot(grad)).sqrt();
        SurfaceJet {
            point: self.center() + dir * r,
            normal: normal_unnorm.normalized(),
            jacobian_solid_angle: jac,
            radius: r,
        }
    }

    /// True when `x` lies strictly inside the obstacle.
    pub fn contains(&self, x: Vec3) -> bool {
        let rel = x - self.center();
        let d = rel.norm();
        if d == 0.0 {
            return true;
        }
        let (theta, phi) = rel.to_angles();
        d < self.radius_at(theta, phi)
    }

    /// True when the coefficients describe a sphere (all non-mean terms
    /// negligible); returns its radius.
    pub fn as_sphere(&self) -> Option<f64> {
        let r = self.coeffs[0] / (4.0 * PI).sqrt();
        let tail: f64 = self.coeffs[1..].iter().map(|c| c.abs()).sum();
        (tail <= 1e-12 * self.coeffs[0].abs()).then_some(r)
    }
}

/// Point and normal with the full angular Jacobian dS/(d theta d phi).
pub fn evaluate_surface(spec: &SurfaceSpec, theta: f64, phi: f64) -> (Vec3, Vec3, f64) {
    let jet = spec.surface_jet(theta, phi);
    (jet.point, jet.normal, jet.jacobian_solid_angle * theta.sin())
}

/// Discretized surface: Nystrom nodes, surface-measure weights, outward
/// normals, and the underlying parameter grid.
#[derive(Debug, Clone)]
pub struct QuadSurface {
    pub spec: SurfaceSpec,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Unit parameter directions per node.
    pub dirs: Vec<Vec3>,
    /// Solid-angle weights per node (sum = 4 pi).
    pub solid_weights: Vec<f64>,
    pub nodes: Vec<Vec3>,
    /// Surface-measure weights (solid weight times Jacobian).
    pub weights: Vec<f64>,
    pub normals: Vec<Vec3>,
}

impl QuadSurface {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn centroid(&self) -> Vec3 {
        let area = self.area();
        let mut c = Vec3::ZERO;
        for (n, w) in self.nodes.iter().zip(&self.weights) {
            c = c + *n * *w;
        }
        c * (1.0 / area)
    }

    /// Characteristic panel size: parameter spacing scaled by the largest
    /// radius. Used for clearance checks near the surface.
    pub fn panel_diameter(&self) -> f64 {
        let h = (PI / self.n_theta as f64).max(2.0 * PI / self.n_phi as f64);
        h * self.spec.max_radius()
    }

    /// Distance from `x` to the nearest quadrature node.
    pub fn distance_to_nodes(&self, x: Vec3) -> f64 {
        self.nodes
            .iter()
            .map(|n| (*n - x).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Surface integral of a complex-valued nodal function.
    pub fn integrate(&self, values: &[num_complex::Complex64]) -> num_complex::Complex64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * *w)
            .fold(num_complex::Complex64::ZERO, |a, b| a + b)
    }
}

/// Tensor-grid discretization of a surface spec.
pub fn discretize(spec: &SurfaceSpec, n_theta: usize, n_phi: usize) -> Result<QuadSurface, GeomError> {
    if n_theta < 4 || n_phi < 8 {
        return Err(GeomError::GridTooCoarse(n_theta, n_phi));
    }
    let (dirs, solid_weights) = sphere_quadrature(n_theta, n_phi);
    let mut nodes = Vec::with_capacity(dirs.len());
    let mut weights = Vec::with_capacity(dirs.len());
    let mut normals = Vec::with_capacity(dirs.len());
    for (d, w) in dirs.iter().zip(&solid_weights) {
        let (theta, phi) = d.to_angles();
        let jet = spec.surface_jet(theta, phi);
        if jet.radius <= 0.0 {
            return Err(GeomError::NotStarShaped { r: jet.radius, theta, phi });
        }
        nodes.push(jet.point);
        weights.push(w * jet.jacobian_solid_angle);
        normals.push(jet.normal);
    }
    Ok(QuadSurface {
        spec: spec.clone(),
        n_theta,
        n_phi,
        dirs,
        solid_weights,
        nodes,
        weights,
        normals,
    })
}
