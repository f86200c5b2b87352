//! Shape and boundary-condition recovery from fixed-incident-direction
//! far-field data, plus discrimination experiments for distinct obstacles.
//!
//! The data A(beta) is a function of two variables, matching the two
//! degrees of freedom of the unknown radius map: the non-over-determined
//! regime. Reconstruction runs Levenberg-Marquardt on the real radius
//! coefficients with a central finite-difference Jacobian (columns solved
//! in parallel) and a Tikhonov pull toward the initial guess; boundary-
//! condition classification compares forward misfits across the three
//! hypotheses with the impedance fitted by Nelder-Mead.

use crate::fields::{far_field_on, FarFieldPattern};
use crate::geom::{discretize, sphere_quadrature, GeomError, SurfaceSpec, Vec3};
use crate::kernels::Wavenumber;
use crate::linalg::cholesky_solve;
use crate::solver::{
    assemble, assemble_operator_matrix, factor_prebuilt, BoundaryCondition, Incidence,
    NystromParams, OperatorKind, SolveError, SolveOptions,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InverseError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error("no step acceptable after {0} damping increases; misfit trace {1:?}")]
    NoAcceptableStep(usize, Vec<f64>),
    #[error("obstacles overlap; the discrimination experiment requires disjoint sets")]
    OverlapDetected,
    #[error("nesting violation: inner surface is not strictly inside the outer one")]
    NestingViolation,
    #[error("inversion degree {degree} exceeds the data grid support ({samples} samples)")]
    DegreeTooHigh { degree: usize, samples: usize },
}

/// Controls for the shape reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionConfig {
    pub k: f64,
    pub alpha: [f64; 3],
    /// Shape degree of the recovered radius map.
    pub degree: usize,
    /// Tikhonov weight pulling coefficients toward the initial guess.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Stop when the data misfit (relative L2) falls below this.
    pub misfit_tol: f64,
    /// Stop when the coefficient step falls below this.
    pub step_tol: f64,
    /// Central finite-difference step on the coefficients.
    pub fd_step: f64,
    /// Forward grid used inside the inversion (data should come from a
    /// finer grid to avoid the inverse crime).
    pub forward_grid: [usize; 2],
    /// Boundary-condition hypothesis held fixed during shape iterations.
    #[serde(skip, default = "default_bc")]
    pub bc: BoundaryCondition,
}

fn default_bc() -> BoundaryCondition {
    BoundaryCondition::Dirichlet
}

impl InversionConfig {
    pub fn new(k: f64, alpha: Vec3, degree: usize) -> Self {
        Self {
            k,
            alpha: [alpha.x, alpha.y, alpha.z],
            degree,
            lambda: 1e-6,
            max_iterations: 30,
            misfit_tol: 1e-7,
            step_tol: 1e-10,
            fd_step: 1e-4,
            forward_grid: [12, 24],
            bc: BoundaryCondition::Dirichlet,
        }
    }

    fn alpha_vec(&self) -> Vec3 {
        Vec3::new(self.alpha[0], self.alpha[1], self.alpha[2]).normalized()
    }
}

/// Result of a reconstruction run.
#[derive(Debug, Clone)]
pub struct InversionResult {
    pub spec: SurfaceSpec,
    /// Relative L2 data misfit after each accepted step (non-increasing).
    pub misfit_trace: Vec<f64>,
    pub final_misfit: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted residual vector (re/im interleaved) of the forward pattern
/// against the data, plus Tikhonov rows.
struct ForwardModel<'a> {
    data: &'a FarFieldPattern,
    cfg: &'a InversionConfig,
    center: Vec3,
    data_norm: f64,
    init_coeffs: Vec<f64>,
}

impl ForwardModel<'_> {
    fn residuals(&self, coeffs: &[f64]) -> Result<Vec<f64>, InverseError> {
        let spec =
            SurfaceSpec::from_coeffs("iterate", self.center, self.cfg.degree, coeffs.to_vec())?;
        let surface = Arc::new(discretize(&spec, self.cfg.forward_grid[0], self.cfg.forward_grid[1])?);
        let opts = SolveOptions { skip_resonance_guard: true, ..SolveOptions::default() };
        let k = Wavenumber::new(self.cfg.k)?;
        let fac = assemble(surface, self.cfg.bc, k, &NystromParams::default(), &opts)?
            .factor(&opts)?;
        let sol = fac.solve(Incidence::plane(self.alpha())?)?;
        let pattern = far_field_on(&sol, &self.data.directions, &self.data.weights, self.data.grid_dims);
        let mut r = Vec::with_capacity(2 * pattern.values.len() + coeffs.len());
        for ((v, d), w) in pattern.values.iter().zip(&self.data.values).zip(&self.data.weights) {
            let sw = w.sqrt() / self.data_norm;
            r.push((v.re - d.re) * sw);
            r.push((v.im - d.im) * sw);
        }
        let sl = self.cfg.lambda.sqrt();
        for (c, c0) in coeffs.iter().zip(&self.init_coeffs) {
            r.push(sl * (c - c0));
        }
        Ok(r)
    }

    fn alpha(&self) -> Vec3 {
        self.cfg.alpha_vec()
    }

    /// Relative L2 data misfit (Tikhonov rows excluded).
    fn data_misfit(&self, residuals: &[f64]) -> f64 {
        let m = 2 * self.data.values.len();
        residuals[..m].iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Levenberg-Marquardt reconstruction of the radius coefficients from
/// fixed-(alpha, k) far-field data.
pub fn reconstruct_shape(
    cfg: &InversionConfig,
    data: &FarFieldPattern,
    initial: &SurfaceSpec,
) -> Result<InversionResult, InverseError> {
    let n_params = crate::mathfn::sh_len(cfg.degree);
    if data.values.len() < n_params {
        return Err(InverseError::DegreeTooHigh { degree: cfg.degree, samples: data.values.len() });
    }
    // lift the initial coefficients into the inversion degree
    let mut coeffs = vec![0.0; n_params];
    for (i, c) in initial.coeffs.iter().enumerate() {
        if i < n_params {
            coeffs[i] = *c;
        }
    }
    let model = ForwardModel {
        data,
        cfg,
        center: initial.center(),
        data_norm: data.l2_norm().max(1e-300),
        init_coeffs: coeffs.clone(),
    };

    let mut r = model.residuals(&coeffs)?;
    let mut misfit = model.data_misfit(&r);
    let mut trace = vec![misfit];
    let mut mu = 1e-3;
    let mut converged = misfit < cfg.misfit_tol;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        // central-difference Jacobian, columns in parallel
        let cols: Vec<Result<Vec<f64>, InverseError>> = (0..n_params)
            .into_par_iter()
            .map(|j| {
                let mut up = coeffs.clone();
                let mut dn = coeffs.clone();
                up[j] += cfg.fd_step;
                dn[j] -= cfg.fd_step;
                let ru = model.residuals(&up)?;
                let rd = model.residuals(&dn)?;
                Ok(ru
                    .iter()
                    .zip(&rd)
                    .map(|(a, b)| (a - b) / (2.0 * cfg.fd_step))
                    .collect())
            })
            .collect();
        let mut jac: Vec<Vec<f64>> = Vec::with_capacity(n_params);
        for c in cols {
            jac.push(c?);
        }
        let m = r.len();
        // normal equations
        let mut jtj = vec![vec![0.0; n_params]; n_params];
        let mut jtr = vec![0.0; n_params];
        for a in 0..n_params {
            for b in a..n_params {
                let mut s = 0.0;
                for i in 0..m {
                    s += jac[a][i] * jac[b][i];
                }
                jtj[a][b] = s;
                jtj[b][a] = s;
            }
            let mut s = 0.0;
            for i in 0..m {
                s += jac[a][i] * r[i];
            }
            jtr[a] = s;
        }
        // damping loop
        let mut accepted = false;
        for _try in 0..14 {
            let mut lhs = jtj.clone();
            for (d, row) in lhs.iter_mut().enumerate() {
                row[d] += mu;
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(delta) = cholesky_solve(&lhs, &rhs) else {
                mu *= 4.0;
                continue;
            };
            let step_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            let cand: Vec<f64> = coeffs.iter().zip(&delta).map(|(c, d)| c + d).collect();
            // reject candidates that lose star-shapedness
            let cand_res = match SurfaceSpec::from_coeffs("iterate", model.center, cfg.degree, cand.clone())
            {
                Ok(_) => model.residuals(&cand),
                Err(_) => {
                    mu *= 4.0;
                    continue;
                }
            };
            let cand_res = cand_res?;
            let cand_misfit = model.data_misfit(&cand_res);
            if cand_misfit < misfit {
                coeffs = cand;
                r = cand_res;
                misfit = cand_misfit;
                trace.push(misfit);
                mu = (mu / 3.0).max(1e-14);
                accepted = true;
                if misfit < cfg.misfit_tol || step_norm < cfg.step_tol {
                    converged = true;
                }
                break;
            }
            if step_norm < cfg.step_tol {
                converged = true;
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            return Err(InverseError::NoAcceptableStep(14, trace));
        }
    }
    let spec = SurfaceSpec::from_coeffs(
        format!("recovered_deg{}", cfg.degree),
        model.center,
        cfg.degree,
        coeffs,
    )?;
    Ok(InversionResult {
        spec,
        misfit_trace: trace,
        final_misfit: misfit,
        iterations,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Boundary-condition classification
// ---------------------------------------------------------------------------

/// Outcome of hypothesis testing over the three boundary conditions.
#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub selected: BoundaryCondition,
    /// Relative L2 misfits per hypothesis: (label, misfit).
    pub misfits: Vec<(String, f64)>,
    /// Best-fit impedance under the third hypothesis.
    pub fitted_h: Complex64,
    /// Smallest misfit (the noise floor of the comparison).
    pub noise_floor: f64,
    /// Gap between the runner-up and the best misfit.
    pub gap: f64,
    /// Raised when the gap falls below 10x the noise floor (as with the
    /// h = 0 impedance/Neumann degeneracy).
    pub ambiguous: bool,
}

fn misfit_of(pattern: &FarFieldPattern, data: &FarFieldPattern) -> f64 {
    pattern.relative_l2_distance(data)
}

/// Hypothesis testing: forward-solve under each boundary condition (with h
/// fitted by Nelder-Mead for the impedance case) and select the smallest
/// data misfit.
pub fn classify_boundary_condition(
    spec: &SurfaceSpec,
    data: &FarFieldPattern,
    k: Wavenumber,
    alpha: Vec3,
    forward_grid: [usize; 2],
) -> Result<ClassificationReport, InverseError> {
    let surface = Arc::new(discretize(spec, forward_grid[0], forward_grid[1])?);
    let opts = SolveOptions { skip_resonance_guard: true, ..SolveOptions::default() };
    let params = NystromParams::default();
    let inc = Incidence::plane(alpha)?;

    let pattern_for = |bc: BoundaryCondition,
                       matrix: crate::linalg::CMatrix|
     -> Result<FarFieldPattern, InverseError> {
        let fac = factor_prebuilt(Arc::clone(&surface), bc, k, matrix, &opts)?;
        let sol = fac.solve(inc)?;
        Ok(far_field_on(&sol, &data.directions, &data.weights, data.grid_dims))
    };

    // Dirichlet
    let m_dir = assemble_operator_matrix(&surface, OperatorKind::System(BoundaryCondition::Dirichlet), k, &params);
    let mis_dirichlet = misfit_of(&pattern_for(BoundaryCondition::Dirichlet, m_dir)?, data);
    // Neumann system and single-layer block, reused across impedance trials
    let m_neu =
        assemble_operator_matrix(&surface, OperatorKind::System(BoundaryCondition::Neumann), k, &params);
    let m_single = assemble_operator_matrix(&surface, OperatorKind::SingleLayer, k, &params);
    let mis_neumann = misfit_of(&pattern_for(BoundaryCondition::Neumann, m_neu.clone())?, data);

    // impedance misfit as a function of h = (re, im), im clamped >= 0
    let eval_h = |h: Complex64| -> Result<f64, InverseError> {
        let h = Complex64::new(h.re.clamp(-10.0, 10.0), h.im.clamp(0.0, 10.0));
        let mut m = m_neu.clone();
        let n = surface.len();
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j) - h * m_single.get(i, j);
                m.set(i, j, v);
            }
        }
        Ok(misfit_of(&pattern_for(BoundaryCondition::Impedance(h), m)?, data))
    };

    // Nelder-Mead on (re h, im h)
    let mut simplex = [
        (Complex64::new(0.5, 0.1), 0.0),
        (Complex64::new(1.2, 0.1), 0.0),
        (Complex64::new(0.5, 0.8), 0.0),
    ];
    for v in simplex.iter_mut() {
        v.1 = eval_h(v.0)?;
    }
    for _ in 0..40 {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = (simplex[2].1 - simplex[0].1).abs();
        if spread < 1e-12 + 1e-6 * simplex[0].1 {
            break;
        }
        let centroid = (simplex[0].0 + simplex[1].0) * 0.5;
        let worst = simplex[2];
        let reflected = centroid + (centroid - worst.0);
        let fr = eval_h(reflected)?;
        if fr < simplex[0].1 {
            let expanded = centroid + (centroid - worst.0) * 2.0;
            let fe = eval_h(expanded)?;
            simplex[2] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (reflected, fr);
        } else {
            let contracted = centroid + (worst.0 - centroid) * 0.5;
            let fc = eval_h(contracted)?;
            if fc < worst.1 {
                simplex[2] = (contracted, fc);
            } else {
                // shrink toward the best vertex
                for i in 1..3 {
                    simplex[i].0 = simplex[0].0 + (simplex[i].0 - simplex[0].0) * 0.5;
                    simplex[i].1 = eval_h(simplex[i].0)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let fitted_h = Complex64::new(
        simplex[0].0.re.clamp(-10.0, 10.0),
        simplex[0].0.im.clamp(0.0, 10.0),
    );
    let mis_impedance = simplex[0].1;

    let mut scored = [
        ("dirichlet".to_string(), mis_dirichlet, BoundaryCondition::Dirichlet),
        ("neumann".to_string(), mis_neumann, BoundaryCondition::Neumann),
        (
            "impedance".to_string(),
            mis_impedance,
            BoundaryCondition::Impedance(fitted_h),
        ),
    ];
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let noise_floor = scored[0].1;
    let gap = scored[1].1 - scored[0].1;
    Ok(ClassificationReport {
        selected: scored[0].2,
        misfits: scored.iter().map(|(n, m, _)| (n.clone(), *m)).collect(),
        fitted_h,
        noise_floor,
        gap,
        ambiguous: gap <= 10.0 * noise_floor,
    })
}

// ---------------------------------------------------------------------------
// Discrimination experiments
// ---------------------------------------------------------------------------

/// Fixed-incident-direction pattern distance between two obstacles.
#[derive(Debug, Clone)]
pub struct DiscrepancyReport {
    /// Relative L2 distance between the complex patterns.
    pub distance: f64,
    /// Relative L2 distance between the pattern moduli (phase blind).
    pub modulus_distance: f64,
    /// Self-consistency noise estimate: change of the first obstacle's
    /// pattern under one grid refinement step.
    pub noise_estimate: f64,
    /// Smallest |u| on the interior probe surface (nested case only).
    pub min_field_on_probe: Option<f64>,
}

fn pattern_of(
    spec: &SurfaceSpec,
    k: Wavenumber,
    alpha: Vec3,
    grid: [usize; 2],
    out_grid: (usize, usize),
) -> Result<(FarFieldPattern, crate::solver::BoundarySolution), InverseError> {
    let surface = Arc::new(discretize(spec, grid[0], grid[1])?);
    let opts = SolveOptions { skip_resonance_guard: true, ..SolveOptions::default() };
    let fac = assemble(surface, BoundaryCondition::Dirichlet, k, &NystromParams::default(), &opts)?
        .factor(&opts)?;
    let sol = fac.solve(Incidence::plane(alpha)?)?;
    let (dirs, weights) = sphere_quadrature(out_grid.0, out_grid.1);
    Ok((far_field_on(&sol, &dirs, &weights, out_grid), sol))
}

fn surfaces_disjoint(a: &SurfaceSpec, b: &SurfaceSpec) -> bool {
    let (dirs, _) = sphere_quadrature(16, 32);
    for d in &dirs {
        let (theta, phi) = d.to_angles();
        let pa = a.surface_jet(theta, phi).point;
        if b.contains(pa) {
            return false;
        }
        let pb = b.surface_jet(theta, phi).point;
        if a.contains(pb) {
            return false;
        }
    }
    !b.contains(a.center()) && !a.contains(b.center())
}

/// Pattern distance between two disjoint obstacles at fixed incident
/// direction (the constructive face of the disjoint-pair uniqueness
/// statement: distinct disjoint obstacles cannot share the data).
pub fn discriminate_disjoint(
    spec1: &SurfaceSpec,
    spec2: &SurfaceSpec,
    k: Wavenumber,
    alpha: Vec3,
    grid: [usize; 2],
) -> Result<DiscrepancyReport, InverseError> {
    // identical specs are the degenerate control case; anything else must
    // be genuinely disjoint
    let identical = spec1.center == spec2.center
        && spec1.degree == spec2.degree
        && spec1.coeffs == spec2.coeffs;
    if !identical && !surfaces_disjoint(spec1, spec2) {
        return Err(InverseError::OverlapDetected);
    }
    let out = (16, 32);
    let (p1, _) = pattern_of(spec1, k, alpha, grid, out)?;
    let (p2, _) = pattern_of(spec2, k, alpha, grid, out)?;
    let (p1_fine, _) = pattern_of(spec1, k, alpha, [grid[0] + grid[0] / 2, grid[1] + grid[1] / 2], out)?;
    Ok(DiscrepancyReport {
        distance: p1.relative_l2_distance(&p2),
        modulus_distance: p1.modulus_l2_distance(&p2),
        noise_estimate: p1.relative_l2_distance(&p1_fine),
        min_field_on_probe: None,
    })
}

/// Pattern distance for strictly nested obstacles, plus the scattering
/// solution of the inner obstacle evaluated on a closed probe surface
/// between the two boundaries: its minimum modulus is reported and must
/// stay positive (a scattering solution has no closed zero surface other
/// than the obstacle boundary).
pub fn discriminate_nested(
    inner: &SurfaceSpec,
    outer: &SurfaceSpec,
    k: Wavenumber,
    alpha: Vec3,
    grid: [usize; 2],
) -> Result<DiscrepancyReport, InverseError> {
    // strict nesting on a probe grid
    let (dirs, _) = sphere_quadrature(16, 32);
    for d in &dirs {
        let (theta, phi) = d.to_angles();
        let p_in = inner.surface_jet(theta, phi).point;
        let rel = p_in - outer.center();
        let (to, po) = rel.to_angles();
        if rel.norm() >= outer.radius_at(to, po) * 0.999 {
            return Err(InverseError::NestingViolation);
        }
    }
    let out = (16, 32);
    let (p_inner, sol_inner) = pattern_of(inner, k, alpha, grid, out)?;
    let (p_outer, _) = pattern_of(outer, k, alpha, grid, out)?;
    let (p_inner_fine, _) =
        pattern_of(inner, k, alpha, [grid[0] + grid[0] / 2, grid[1] + grid[1] / 2], out)?;
    // probe surface halfway between the two boundaries (closed, exterior
    // to the inner obstacle, interior to the outer one)
    let mut min_u = f64::INFINITY;
    for d in &dirs {
        let (theta, phi) = d.to_angles();
        let r_in = inner.surface_jet(theta, phi).point - inner.center();
        let rel_dir = *d;
        let (to, po) = rel_dir.to_angles();
        let r_out = outer.radius_at(to, po);
        let probe = inner.center() + rel_dir * (0.5 * (r_in.norm() + r_out));
        let u = crate::fields::eval_total(&sol_inner, probe)?;
        min_u = min_u.min(u.norm());
    }
    Ok(DiscrepancyReport {
        distance: p_inner.relative_l2_distance(&p_outer),
        modulus_distance: p_inner.modulus_l2_distance(&p_outer),
        noise_estimate: p_inner.relative_l2_distance(&p_inner_fine),
        min_field_on_probe: Some(min_u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mie_far_field;

    fn zhat() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn sphere_data_with_sphere_guess_is_a_fixed_point() {
        let k = Wavenumber::new(1.0).unwrap();
        let data = mie_far_field(1.0, BoundaryCondition::Dirichlet, k, zhat(), 12, 24).unwrap();
        let mut cfg = InversionConfig::new(1.0, zhat(), 2);
        cfg.forward_grid = [10, 20];
        cfg.max_iterations = 4;
        // desk-grid forward solves reproduce series data to ~1e-6
        cfg.misfit_tol = 1e-4;
        let initial = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
        let out = reconstruct_shape(&cfg, &data, &initial).unwrap();
        assert!(out.converged, "trace = {:?}", out.misfit_trace);
        assert!(out.iterations <= 1, "no update needed at the fixed point");
        let r = out.spec.radius_at(1.0, 2.0);
        assert!((r - 1.0).abs() < 1e-3, "radius {r}");
    }

    #[test]
    fn misfit_trace_is_non_increasing() {
        let k = Wavenumber::new(1.0).unwrap();
        let target = SurfaceSpec::perturbed_sphere(1.0, 2, 0, 0.15, Vec3::ZERO).unwrap();
        let (data, _) = pattern_of(&target, k, zhat(), [16, 32], (12, 24)).unwrap();
        let mut cfg = InversionConfig::new(1.0, zhat(), 2);
        cfg.forward_grid = [10, 20];
        cfg.max_iterations = 6;
        cfg.misfit_tol = 1e-5;
        let initial = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
        let out = reconstruct_shape(&cfg, &data, &initial).unwrap();
        for w in out.misfit_trace.windows(2) {
            assert!(w[1] <= w[0], "trace must not increase: {:?}", out.misfit_trace);
        }
    }

    #[test]
    fn jacobian_columns_match_secant_at_second_step() {
        // gradient validation: derivative estimates at steps h and h/2
        // agree within 5 percent
        let k = Wavenumber::new(1.0).unwrap();
        let data = mie_far_field(1.0, BoundaryCondition::Dirichlet, k, zhat(), 10, 20).unwrap();
        let cfg = InversionConfig::new(1.0, zhat(), 1);
        let mut cfg = cfg;
        cfg.forward_grid = [8, 16];
        let initial = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
        let n = crate::mathfn::sh_len(cfg.degree);
        let mut coeffs = vec![0.0; n];
        coeffs[0] = initial.coeffs[0];
        let model = ForwardModel {
            data: &data,
            cfg: &cfg,
            center: Vec3::ZERO,
            data_norm: data.l2_norm(),
            init_coeffs: coeffs.clone(),
        };
        for j in [0usize, 2] {
            let col = |h: f64| -> Vec<f64> {
                let mut up = coeffs.clone();
                let mut dn = coeffs.clone();
                up[j] += h;
                dn[j] -= h;
                let ru = model.residuals(&up).unwrap();
                let rd = model.residuals(&dn).unwrap();
                ru.iter().zip(&rd).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            };
            let c1 = col(1e-4);
            let c2 = col(5e-5);
            let n1: f64 = c1.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff: f64 = c1
                .iter()
                .zip(&c2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 0.05 * n1.max(1e-12), "column {j}: diff {diff:.3e} vs {n1:.3e}");
        }
    }

    #[test]
    fn disjoint_discrimination_and_translate_phase() {
        let k = Wavenumber::new(1.0).unwrap();
        let s0 = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
        let s3 = s0.translated(Vec3::new(3.0, 0.0, 0.0));
        let rep = discriminate_disjoint(&s0, &s3, k, zhat(), [12, 24]).unwrap();
        // translates share the modulus but not the phase
        assert!(rep.distance > 0.1, "complex distance {}", rep.distance);
        assert!(rep.modulus_distance < 1e-3, "modulus distance {}", rep.modulus_distance);
        assert!(rep.noise_estimate < 1e-4);

        // identical specs: distance at the bitwise-reproducibility floor
        let rep = discriminate_disjoint(&s0, &s0, k, zhat(), [12, 24]).unwrap();
        assert!(rep.distance < 1e-12);

        // overlap rejected
        let near = s0.translated(Vec3::new(0.5, 0.0, 0.0));
        assert!(matches!(
            discriminate_disjoint(&s0, &near, k, zhat(), [12, 24]),
            Err(InverseError::OverlapDetected)
        ));
    }

    #[test]
    fn nested_discrimination_reports_positive_interior_field() {
        let k = Wavenumber::new(1.0).unwrap();
        let inner = SurfaceSpec::make_sphere(0.5, Vec3::ZERO).unwrap();
        let outer = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
        let rep = discriminate_nested(&inner, &outer, k, zhat(), [12, 24]).unwrap();
        assert!(rep.distance > 0.1, "distance {}", rep.distance);
        let min_u = rep.min_field_on_probe.unwrap();
        assert!(min_u > 0.0, "no closed zero surface expected: min |u| = {min_u}");

        // inner == outer violates strict nesting
        assert!(matches!(
            discriminate_nested(&outer, &outer, k, zhat(), [12, 24]),
            Err(InverseError::NestingViolation)
        ));
    }
}
