//! Field evaluation from boundary densities: scattered and total fields,
//! gradients, far-field patterns, obstacle Green's functions, and the
//! point-source-to-plane-wave limit sequence.
//!
//! The far field is produced by exact kernel substitution in the Green
//! representation (no numerical large-r limit); large-r evaluations appear
//! only in verification code, where the limiting behavior itself is the
//! claim under test.

use crate::geom::{discretize, sphere_quadrature, SurfaceSpec, Vec3};
use crate::kernels::{
    farfield_kernel, farfield_kernel_normal, kernel_g, kernel_g_grad_y, kernel_g_normal,
    kernel_g_normal_grad_x, Wavenumber,
};
use crate::solver::{
    assemble, BoundaryCondition, BoundarySolution, Incidence, NystromParams, SolveError,
    SolveOptions,
};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("evaluation point {0:?} lies inside the obstacle")]
    InsidePoint(Vec3),
    #[error("source at {0:?} must lie outside the probe bounding sphere (|y| = {1:.3} <= {2:.3})")]
    SourceInsideProbes(Vec3, f64, f64),
    #[error("pattern file is malformed: {0}")]
    MalformedPattern(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

// ---------------------------------------------------------------------------
// Point evaluation
// ---------------------------------------------------------------------------

/// Scattered field v(x) from the boundary density via the representation
/// formula with the boundary-condition trace substitutions.
pub fn eval_scattered(sol: &BoundarySolution, x: Vec3) -> Result<Complex64, FieldError> {
    if sol.surface.spec.contains(x) {
        return Err(FieldError::InsidePoint(x));
    }
    Ok(eval_scattered_unchecked(sol, x))
}

fn eval_scattered_unchecked(sol: &BoundarySolution, x: Vec3) -> Complex64 {
    let s = &sol.surface;
    let k = sol.k;
    let mut acc = Complex64::ZERO;
    match sol.bc {
        BoundaryCondition::Dirichlet => {
            for ((node, w), d) in s.nodes.iter().zip(&s.weights).zip(&sol.density) {
                acc -= kernel_g(x, *node, k) * d * *w;
            }
        }
        BoundaryCondition::Neumann => {
            for (((node, nrm), w), d) in
                s.nodes.iter().zip(&s.normals).zip(&s.weights).zip(&sol.density)
            {
                acc += kernel_g_normal(x, *node, *nrm, k) * d * *w;
            }
        }
        BoundaryCondition::Impedance(h) => {
            for (((node, nrm), w), d) in
                s.nodes.iter().zip(&s.normals).zip(&s.weights).zip(&sol.density)
            {
                acc += (kernel_g_normal(x, *node, *nrm, k) + h * kernel_g(x, *node, k)) * d * *w;
            }
        }
    }
    acc
}

/// Total field u(x) = incident + scattered.
pub fn eval_total(sol: &BoundarySolution, x: Vec3) -> Result<Complex64, FieldError> {
    Ok(sol.incidence.field(x, sol.k) + eval_scattered(sol, x)?)
}

/// Gradient of the scattered field.
pub fn eval_scattered_gradient(
    sol: &BoundarySolution,
    x: Vec3,
) -> Result<[Complex64; 3], FieldError> {
    if sol.surface.spec.contains(x) {
        return Err(FieldError::InsidePoint(x));
    }
    let s = &sol.surface;
    let k = sol.k;
    let h = sol.bc.h();
    let mut acc = [Complex64::ZERO; 3];
    match sol.bc {
        BoundaryCondition::Dirichlet => {
            for ((node, w), d) in s.nodes.iter().zip(&s.weights).zip(&sol.density) {
                let grad = kernel_g_grad_y(*node, x, k); // grad_x by symmetry of |x - s|
                let c = d * *w;
                for (a, g) in acc.iter_mut().zip(grad) {
                    *a -= g * c;
                }
            }
        }
        _ => {
            for (((node, nrm), w), d) in
                s.nodes.iter().zip(&s.normals).zip(&s.weights).zip(&sol.density)
            {
                let mut grad = kernel_g_normal_grad_x(x, *node, *nrm, k);
                if h != Complex64::ZERO {
                    let gg = kernel_g_grad_y(*node, x, k);
                    for (gr, g) in grad.iter_mut().zip(gg) {
                        *gr += h * g;
                    }
                }
                let c = d * *w;
                for (a, g) in acc.iter_mut().zip(grad) {
                    *a += g * c;
                }
            }
        }
    }
    Ok(acc)
}

pub fn eval_total_gradient(sol: &BoundarySolution, x: Vec3) -> Result<[Complex64; 3], FieldError> {
    let inc = sol.incidence.gradient(x, sol.k);
    let sc = eval_scattered_gradient(sol, x)?;
    Ok([inc[0] + sc[0], inc[1] + sc[1], inc[2] + sc[2]])
}

/// Scattered field at many points, in parallel.
pub fn eval_scattered_many(
    sol: &BoundarySolution,
    points: &[Vec3],
) -> Result<Vec<Complex64>, FieldError> {
    for p in points {
        if sol.surface.spec.contains(*p) {
            return Err(FieldError::InsidePoint(*p));
        }
    }
    Ok(points
        .par_iter()
        .map(|p| eval_scattered_unchecked(sol, *p))
        .collect())
}

/// True when the point is within one panel diameter of the surface nodes;
/// representation-formula accuracy degrades there.
pub fn near_surface(sol: &BoundarySolution, x: Vec3) -> bool {
    sol.surface.distance_to_nodes(x) < sol.surface.panel_diameter()
}

// ---------------------------------------------------------------------------
// Far-field pattern
// ---------------------------------------------------------------------------

/// Sampled scattering amplitude A(beta) on a spherical direction grid.
#[derive(Debug, Clone)]
pub struct FarFieldPattern {
    pub k: Wavenumber,
    /// Incident direction; absent for point-source patterns.
    pub alpha: Option<Vec3>,
    pub directions: Vec<Vec3>,
    /// Solid-angle quadrature weights, summing to 4 pi.
    pub weights: Vec<f64>,
    pub values: Vec<Complex64>,
    pub grid_dims: (usize, usize),
}

impl FarFieldPattern {
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Relative L2 distance to another pattern on the same grid.
    pub fn relative_l2_distance(&self, other: &FarFieldPattern) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let num: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .zip(&self.weights)
            .map(|((a, b), w)| (a - b).norm_sqr() * w)
            .sum();
        let den = other.l2_norm().max(1e-300);
        num.sqrt() / den
    }

    /// Relative L2 distance between the moduli |A| (phase-blind).
    pub fn modulus_l2_distance(&self, other: &FarFieldPattern) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .zip(&self.weights)
            .map(|((a, b), w)| (a.norm() - b.norm()).powi(2) * w)
            .sum();
        let den = other.l2_norm().max(1e-300);
        num.sqrt() / den
    }

    /// Integral of |A|^2 over the direction sphere.
    pub fn power_integral(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum()
    }

    /// Serializes as a JSON header line plus theta,phi,re,im rows at 17
    /// significant digits (lossless for f64).
    pub fn to_csv(&self) -> String {
        let alpha = self
            .alpha
            .map(|a| format!("[{:.16e},{:.16e},{:.16e}]", a.x, a.y, a.z))
            .unwrap_or_else(|| "null".into());
        let mut out = format!(
            "# {{\"k\":{:.16e},\"alpha\":{},\"grid_dims\":[{},{}]}}\n",
            self.k.get(),
            alpha,
            self.grid_dims.0,
            self.grid_dims.1
        );
        out.push_str("theta,phi,re_A,im_A\n");
        for (d, v) in self.directions.iter().zip(&self.values) {
            let (theta, phi) = d.to_angles();
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                theta, phi, v.re, v.im
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, FieldError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| FieldError::MalformedPattern("empty file".into()))?;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| FieldError::MalformedPattern("missing JSON header".into()))?;
        let meta: serde_json::Value = serde_json::from_str(header)
            .map_err(|e| FieldError::MalformedPattern(format!("bad header: {e}")))?;
        let k = Wavenumber::new(
            meta["k"]
                .as_f64()
                .ok_or_else(|| FieldError::MalformedPattern("header lacks k".into()))?,
        )
        .map_err(|e| FieldError::MalformedPattern(e.to_string()))?;
        let alpha = match &meta["alpha"] {
            serde_json::Value::Null => None,
            v => {
                let a: Vec<f64> = v
                    .as_array()
                    .ok_or_else(|| FieldError::MalformedPattern("alpha not an array".into()))?
                    .iter()
                    .filter_map(|x| x.as_f64())
                    .collect();
                if a.len() != 3 {
                    return Err(FieldError::MalformedPattern("alpha needs 3 entries".into()));
                }
                Some(Vec3::new(a[0], a[1], a[2]))
            }
        };
        let dims = meta["grid_dims"]
            .as_array()
            .ok_or_else(|| FieldError::MalformedPattern("header lacks grid_dims".into()))?;
        let n_theta = dims[0].as_u64().unwrap_or(0) as usize;
        let n_phi = dims[1].as_u64().unwrap_or(0) as usize;
        let (directions, weights) = sphere_quadrature(n_theta, n_phi);
        let mut values = Vec::with_capacity(directions.len());
        for line in lines.skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(FieldError::MalformedPattern(format!("bad row: {line}")));
            }
            let re: f64 = cols[2]
                .parse()
                .map_err(|e| FieldError::MalformedPattern(format!("bad re_A: {e}")))?;
            let im: f64 = cols[3]
                .parse()
                .map_err(|e| FieldError::MalformedPattern(format!("bad im_A: {e}")))?;
            values.push(Complex64::new(re, im));
        }
        if values.len() != directions.len() {
            return Err(FieldError::MalformedPattern(format!(
                "expected {} rows, got {}",
                directions.len(),
                values.len()
            )));
        }
        Ok(Self { k, alpha, directions, weights, values, grid_dims: (n_theta, n_phi) })
    }
}

/// Far-field amplitude at a single direction from the boundary density.
pub fn far_field_single(sol: &BoundarySolution, beta: Vec3) -> Complex64 {
    let s = &sol.surface;
    let k = sol.k;
    let quarter = 1.0 / (4.0 * PI);
    let mut acc = Complex64::ZERO;
    match sol.bc {
        BoundaryCondition::Dirichlet => {
            for ((node, w), d) in s.nodes.iter().zip(&s.weights).zip(&sol.density) {
                acc -= farfield_kernel(beta, *node, k) * d * *w;
            }
        }
        BoundaryCondition::Neumann => {
            for (((node, nrm), w), d) in
                s.nodes.iter().zip(&s.normals).zip(&s.weights).zip(&sol.density)
            {
                acc += farfield_kernel_normal(beta, *node, *nrm, k) * d * *w;
            }
        }
        BoundaryCondition::Impedance(h) => {
            for (((node, nrm), w), d) in
                s.nodes.iter().zip(&s.normals).zip(&s.weights).zip(&sol.density)
            {
                acc += (farfield_kernel_normal(beta, *node, *nrm, k)
                    + h * farfield_kernel(beta, *node, k))
                    * d
                    * *w;
            }
        }
    }
    acc * quarter
}

/// Far-field pattern on an explicit direction grid.
pub fn far_field_on(
    sol: &BoundarySolution,
    directions: &[Vec3],
    weights: &[f64],
    grid_dims: (usize, usize),
) -> FarFieldPattern {
    let values: Vec<Complex64> = directions
        .par_iter()
        .map(|beta| far_field_single(sol, *beta))
        .collect();
    let alpha = match sol.incidence {
        Incidence::PlaneWave { direction } => Some(direction),
        Incidence::PointSource { .. } => None,
    };
    FarFieldPattern {
        k: sol.k,
        alpha,
        directions: directions.to_vec(),
        weights: weights.to_vec(),
        values,
        grid_dims,
    }
}

/// Far-field pattern on a fresh (n_theta, n_phi) sphere grid.
pub fn far_field(sol: &BoundarySolution, n_theta: usize, n_phi: usize) -> FarFieldPattern {
    let (dirs, weights) = sphere_quadrature(n_theta, n_phi);
    far_field_on(sol, &dirs, &weights, (n_theta, n_phi))
}

// ---------------------------------------------------------------------------
// Obstacle Green's function
// ---------------------------------------------------------------------------

/// One sample of the obstacle Green's function.
#[derive(Debug, Clone, Copy)]
pub struct GreensSample {
    pub x: Vec3,
    pub y: Vec3,
    pub value: Complex64,
}

/// G(x, y, k): total field at x of the point-source problem sourced at y.
pub fn greens_function(
    spec: &SurfaceSpec,
    bc: BoundaryCondition,
    k: Wavenumber,
    x: Vec3,
    y: Vec3,
    n_theta: usize,
    n_phi: usize,
) -> Result<GreensSample, FieldError> {
    let surface = Arc::new(discretize(spec, n_theta, n_phi).map_err(SolveError::from)?);
    let params = NystromParams::default();
    let opts = SolveOptions::default();
    let factored = assemble(surface, bc, k, &params, &opts)?.factor(&opts)?;
    let sol = factored.solve(Incidence::point(y))?;
    let value = eval_total(&sol, x)?;
    Ok(GreensSample { x, y, value })
}

// ---------------------------------------------------------------------------
// Source-limit sequence (plane wave as the limit of a receding point source)
// ---------------------------------------------------------------------------

/// One step of the receding-source sequence: the renormalized field
/// G(x, -tau alpha0 + eta) / g(|y0|) at the probes, against the plane-wave
/// solution u(x, alpha0).
#[derive(Debug, Clone)]
pub struct SourceLimitSnapshot {
    pub tau: f64,
    pub y0: Vec3,
    /// G(probe, y0) / g(|y0|).
    pub renormalized: Vec<Complex64>,
    /// Plane-wave total field u(probe, alpha0).
    pub reference: Vec<Complex64>,
    /// max_p |G - g(|y0|) u| (absolute remainder).
    pub max_residual_absolute: f64,
    /// max_p |G/g - u| (renormalized remainder).
    pub max_residual_renormalized: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn scattering_solution_from_source_limit(
    spec: &SurfaceSpec,
    bc: BoundaryCondition,
    k: Wavenumber,
    alpha0: Vec3,
    tau_list: &[f64],
    eta: Vec3,
    probes: &[Vec3],
    n_theta: usize,
    n_phi: usize,
) -> Result<Vec<SourceLimitSnapshot>, FieldError> {
    let surface = Arc::new(discretize(spec, n_theta, n_phi).map_err(SolveError::from)?);
    let params = NystromParams::default();
    let opts = SolveOptions::default();
    let factored = assemble(surface, bc, k, &params, &opts)?.factor(&opts)?;
    let plane = factored.solve(Incidence::plane(alpha0)?)?;
    let reference: Vec<Complex64> = probes
        .iter()
        .map(|p| eval_total(&plane, *p))
        .collect::<Result<_, _>>()?;
    let probe_radius = probes.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let y0 = -alpha0 * tau + eta;
        if y0.norm() <= probe_radius {
            return Err(FieldError::SourceInsideProbes(y0, y0.norm(), probe_radius));
        }
        let point = factored.solve(Incidence::point(y0))?;
        let g_far = kernel_g(Vec3::ZERO, y0, k);
        let mut renorm = Vec::with_capacity(probes.len());
        let mut max_abs = 0.0_f64;
        let mut max_ren = 0.0_f64;
        for (p, u_ref) in probes.iter().zip(&reference) {
            let g_val = eval_total(&point, *p)?;
            renorm.push(g_val / g_far);
            let abs = (g_val - g_far * u_ref).norm();
            max_abs = max_abs.max(abs);
            max_ren = max_ren.max(abs / g_far.norm());
        }
        out.push(SourceLimitSnapshot {
            tau,
            y0,
            renormalized: renorm,
            reference: reference.clone(),
            max_residual_absolute: max_abs,
            max_residual_renormalized: max_ren,
        });
    }
    Ok(out)
}
