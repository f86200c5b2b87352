//! Direct second-kind boundary integral solver for the exterior scattering
//! problem under Dirichlet, Neumann, or impedance boundary conditions.
//!
//! The formulations take traces of the Green representation of the scattered
//! field, so the solver shares its structure with the identity checks built
//! on the same representation formulas:
//!
//! - Dirichlet, unknown u_N:   (I/2 + K') u_N = du_inc/dN
//! - Neumann, unknown u:       (I/2 - K) u = u_inc
//! - Impedance, unknown u:     (I/2 - K - h S) u = u_inc
//!
//! where S, K, K' are the single-layer, double-layer, and adjoint
//! double-layer operators. The weakly singular quadrature splits each row
//! integral with a smooth radial bump around the target node: outside the
//! patch the plain tensor rule applies; inside, a polar rule centred on the
//! node integrates kernel times a spherical-harmonic interpolant of the
//! density. Direct formulations have spurious interior resonances; a guard
//! flags wave numbers near the interior eigenvalues (for spheres) or a large
//! condition estimate (generally).

use crate::geom::{discretize, GeomError, QuadSurface, SurfaceSpec, Vec3};
use crate::kernels::{
    kernel_g, kernel_g_grad_y, kernel_g_normal, kernel_g_normal_x, KernelError, Wavenumber,
};
use crate::linalg::{gauss_legendre, lu_factor, CMatrix, LinalgError, LuFactors};
use crate::mathfn::{
    sh_basis_complex_into, sh_len, sph_bessel_j_upto, sph_deriv_from_table, LegendreScratch,
    MathError,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("impedance must have Im h >= 0 for uniqueness, got h = {0}")]
    InvalidImpedance(Complex64),
    #[error("incident direction must be a unit vector, |alpha| = {0}")]
    NonUnitDirection(f64),
    #[error("point source at {0:?} is inside or too close to the surface (clearance {1:.3e} < {2:.3e})")]
    SourceTooClose(Vec3, f64, f64),
    #[error("wave number k*a = {ka:.6} is within {band:.3} of an interior eigenvalue (l = {l}, root = {root:.6}); the direct formulation is unreliable there")]
    ResonanceGuard { ka: f64, band: f64, l: usize, root: f64 },
    #[error("system condition estimate {0:.3e} exceeds threshold {1:.3e}; possible discretization resonance")]
    IllConditioned(f64, f64),
    #[error("node count {0} exceeds the configured cap {1}")]
    TooManyNodes(usize, usize),
    #[error("linear solve residual {0:.3e} exceeds tolerance {1:.3e}")]
    ResidualTooLarge(f64, f64),
}

/// Boundary condition on the obstacle surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Impedance(Complex64),
}

impl BoundaryCondition {
    pub fn validate(&self) -> Result<(), SolveError> {
        if let BoundaryCondition::Impedance(h) = self {
            if h.im < 0.0 || !h.is_finite() {
                return Err(SolveError::InvalidImpedance(*h));
            }
        }
        Ok(())
    }

    /// Impedance coefficient; zero for Dirichlet/Neumann.
    pub fn h(&self) -> Complex64 {
        match self {
            BoundaryCondition::Impedance(h) => *h,
            _ => Complex64::ZERO,
        }
    }

    pub fn label(&self) -> String {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet".into(),
            BoundaryCondition::Neumann => "neumann".into(),
            BoundaryCondition::Impedance(h) => format!("impedance({},{})", h.re, h.im),
        }
    }
}

/// Incident field: a unit plane wave or a point source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Incidence {
    PlaneWave { direction: Vec3 },
    PointSource { location: Vec3 },
}

impl Incidence {
    pub fn plane(direction: Vec3) -> Result<Self, SolveError> {
        let n = direction.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(SolveError::NonUnitDirection(n));
        }
        Ok(Incidence::PlaneWave { direction })
    }

    pub fn point(location: Vec3) -> Self {
        Incidence::PointSource { location }
    }

    /// Incident field value at x.
    pub fn field(&self, x: Vec3, k: Wavenumber) -> Complex64 {
        match self {
            Incidence::PlaneWave { direction } => {
                Complex64::from_polar(1.0, k.get() * direction.dot(x))
            }
            Incidence::PointSource { location } => kernel_g(x, *location, k),
        }
    }

    /// Incident field gradient at x.
    pub fn gradient(&self, x: Vec3, k: Wavenumber) -> [Complex64; 3] {
        match self {
            Incidence::PlaneWave { direction } => {
                let v = self.field(x, k) * Complex64::new(0.0, k.get());
                [v * direction.x, v * direction.y, v * direction.z]
            }
            Incidence::PointSource { location } => kernel_g_grad_y(*location, x, k),
        }
    }

    pub fn normal_derivative(&self, x: Vec3, normal: Vec3, k: Wavenumber) -> Complex64 {
        let g = self.gradient(x, k);
        g[0] * normal.x + g[1] * normal.y + g[2] * normal.z
    }
}

/// Quadrature controls for the weakly singular Nystrom assembly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NystromParams {
    /// Patch radius as a multiple of the polar grid spacing pi/n_theta.
    pub patch_radius_factor: f64,
    /// Radial Gauss points inside the patch.
    pub n_rho: usize,
    /// Azimuthal trapezoid points inside the patch.
    pub n_psi: usize,
    /// Cap on the density interpolation degree.
    pub interp_degree_cap: usize,
}

impl Default for NystromParams {
    fn default() -> Self {
        Self { patch_radius_factor: 16.0, n_rho: 24, n_psi: 48, interp_degree_cap: 16 }
    }
}

/// Solve-time controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative linear-residual tolerance after refinement.
    pub solve_tol: f64,
    /// Guard band around interior eigen-wavenumbers (in units of k*a).
    pub resonance_guard_band: f64,
    /// Condition-estimate threshold for refusing a factorization.
    pub condition_threshold: f64,
    /// Disable the sphere resonance guard (the advisory is still available).
    pub skip_resonance_guard: bool,
    /// Hard cap on node count.
    pub max_nodes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            solve_tol: 1e-10,
            resonance_guard_band: 0.05,
            condition_threshold: 1e12,
            skip_resonance_guard: false,
            max_nodes: 6000,
        }
    }
}

/// Solved boundary density with its scenario metadata. For Dirichlet the
/// density is u_N; for Neumann/impedance it is the total-field trace u.
#[derive(Debug, Clone)]
pub struct BoundarySolution {
    pub surface: Arc<QuadSurface>,
    pub bc: BoundaryCondition,
    pub incidence: Incidence,
    pub k: Wavenumber,
    pub density: Vec<Complex64>,
    pub residual: f64,
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Smooth radial bump: 1 at t = 0, 0 at t >= 1, C-infinity in between.
#[inline]
fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let q = |s: f64| (-1.0 / s).exp();
    q(1.0 - t) / (q(1.0 - t) + q(t))
}

/// Which integral operator to discretize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// Full second-kind system I/2 + Q for the boundary condition.
    System(BoundaryCondition),
    /// Plain single-layer quadrature (no identity term); combined with the
    /// Neumann system this lets impedance systems be re-formed for many h
    /// without reassembly.
    SingleLayer,
}

#[inline]
fn operator_kernel(
    kind: OperatorKind,
    k: Wavenumber,
    x: Vec3,
    nx: Vec3,
    s: Vec3,
    ns: Vec3,
) -> Complex64 {
    match kind {
        OperatorKind::System(BoundaryCondition::Dirichlet) => kernel_g_normal_x(x, nx, s, k),
        OperatorKind::System(BoundaryCondition::Neumann) => -kernel_g_normal(x, s, ns, k),
        OperatorKind::System(BoundaryCondition::Impedance(h)) => {
            -kernel_g_normal(x, s, ns, k) - h * kernel_g(x, s, k)
        }
        OperatorKind::SingleLayer => kernel_g(x, s, k),
    }
}

/// Dense Nystrom matrix of the boundary integral operator I/2 + Q for the
/// given boundary condition. Deterministic given inputs; rows are assembled
/// in parallel.
pub fn assemble_matrix(
    surface: &QuadSurface,
    bc: BoundaryCondition,
    k: Wavenumber,
    params: &NystromParams,
) -> CMatrix {
    assemble_operator_matrix(surface, OperatorKind::System(bc), k, params)
}

/// Dense Nystrom discretization of the requested operator.
pub fn assemble_operator_matrix(
    surface: &QuadSurface,
    kind: OperatorKind,
    k: Wavenumber,
    params: &NystromParams,
) -> CMatrix {
    let n = surface.len();
    let h_theta = PI / surface.n_theta as f64;
    let delta = (params.patch_radius_factor * h_theta).min(std::f64::consts::PI - 0.2);
    let interp_degree = (surface.n_theta - 1)
        .min((surface.n_phi - 1) / 2)
        .min(params.interp_degree_cap);
    let n_sh = sh_len(interp_degree);

    // hyperinterpolation analysis matrix: coeff_lm = sum_j wSolid_j conj(Y_lm) f_j
    let analysis = {
        let mut by_node = CMatrix::par_fill_rows(n, n_sh, |j, row| {
            let (theta, phi) = surface.dirs[j].to_angles();
            let mut ws = LegendreScratch::default();
            sh_basis_complex_into(interp_degree, theta, phi, &mut ws, row);
            for v in row.iter_mut() {
                *v = v.conj() * surface.solid_weights[j];
            }
        });
        // transpose to (lm, node) for contiguous row access below
        let mut t = CMatrix::zeros(n_sh, n);
        for j in 0..n {
            for (lm, v) in by_node.row_mut(j).iter().enumerate() {
                t.set(lm, j, *v);
            }
        }
        t
    };

    // patch rule in (rho, psi)
    let (gl_nodes, gl_weights) = gauss_legendre(params.n_rho);
    let rho_nodes: Vec<f64> = gl_nodes.iter().map(|x| 0.5 * delta * (x + 1.0)).collect();
    let rho_weights: Vec<f64> = gl_weights.iter().map(|w| 0.5 * delta * w).collect();
    let dpsi = 2.0 * PI / params.n_psi as f64;
    let psi_dirs: Vec<(f64, f64)> = (0..params.n_psi)
        .map(|m| (dpsi * m as f64).sin_cos())
        .collect();

    CMatrix::par_fill_rows(n, n, |i, row| {
        let xi = surface.nodes[i];
        let ni = surface.normals[i];
        let di = surface.dirs[i];
        // far part: plain rule damped by (1 - bump) near the target
        for j in 0..n {
            if j == i {
                continue;
            }
            let cosang = di.dot(surface.dirs[j]).clamp(-1.0, 1.0);
            let ang = cosang.acos();
            let cut = 1.0 - bump(ang / delta);
            if cut == 0.0 {
                continue;
            }
            row[j] = operator_kernel(kind, k, xi, ni, surface.nodes[j], surface.normals[j])
                * (surface.weights[j] * cut);
        }
        // patch part: polar rule around the node, density interpolated in
        // spherical harmonics
        let (e1, e2) = tangent_frame(di);
        let mut ws = LegendreScratch::default();
        let mut basis = vec![Complex64::ZERO; n_sh];
        let mut coeff_weights = vec![Complex64::ZERO; n_sh];
        for (rho, wr) in rho_nodes.iter().zip(&rho_weights) {
            let (srho, crho) = rho.sin_cos();
            let eta = bump(rho / delta);
            if eta == 0.0 {
                continue;
            }
            for (spsi, cpsi) in &psi_dirs {
                let dir = (di * crho + (e1 * *cpsi + e2 * *spsi) * srho).normalized();
                let (theta, phi) = dir.to_angles();
                let jet = surface.spec.surface_jet_ws(theta, phi, &mut ws);
                let kv = operator_kernel(kind, k, xi, ni, jet.point, jet.normal);
                let scale = kv * (wr * dpsi * srho * eta * jet.jacobian_solid_angle);
                sh_basis_complex_into(interp_degree, theta, phi, &mut ws, &mut basis);
                for (cw, b) in coeff_weights.iter_mut().zip(&basis) {
                    *cw += scale * b;
                }
            }
        }
        for (lm, cw) in coeff_weights.iter().enumerate() {
            if cw.norm_sqr() == 0.0 {
                continue;
            }
            for (out, a) in row.iter_mut().zip(analysis.row(lm)) {
                *out += cw * a;
            }
        }
        if matches!(kind, OperatorKind::System(_)) {
            row[i] += Complex64::new(0.5, 0.0);
        }
    })
}

/// Orthonormal tangent frame at a unit direction; deterministic.
fn tangent_frame(d: Vec3) -> (Vec3, Vec3) {
    let up = if d.z.abs() < 0.9 {
        Vec3::new(0.0, 0.0, 1.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let e1 = up.cross(d).normalized();
    let e2 = d.cross(e1);
    (e1, e2)
}

/// Assembled boundary operator, not yet factored.
pub struct BieOperator {
    pub surface: Arc<QuadSurface>,
    pub bc: BoundaryCondition,
    pub k: Wavenumber,
    pub matrix: CMatrix,
}

pub fn assemble(
    surface: Arc<QuadSurface>,
    bc: BoundaryCondition,
    k: Wavenumber,
    params: &NystromParams,
    opts: &SolveOptions,
) -> Result<BieOperator, SolveError> {
    bc.validate()?;
    if surface.len() > opts.max_nodes {
        return Err(SolveError::TooManyNodes(surface.len(), opts.max_nodes));
    }
    let matrix = assemble_matrix(&surface, bc, k, params);
    Ok(BieOperator { surface, bc, k, matrix })
}

/// Factored operator; one factorization serves any number of incident
/// fields.
pub struct FactoredBie {
    pub surface: Arc<QuadSurface>,
    pub bc: BoundaryCondition,
    pub k: Wavenumber,
    matrix: CMatrix,
    lu: LuFactors,
    condition_estimate: f64,
    opts: SolveOptions,
}

impl BieOperator {
    pub fn factor(self, opts: &SolveOptions) -> Result<FactoredBie, SolveError> {
        let norm = self.matrix.norm_one();
        let lu = lu_factor(self.matrix.clone())?;
        let condition_estimate = norm * lu.inv_norm_one_estimate();
        if condition_estimate > opts.condition_threshold {
            return Err(SolveError::IllConditioned(
                condition_estimate,
                opts.condition_threshold,
            ));
        }
        Ok(FactoredBie {
            surface: self.surface,
            bc: self.bc,
            k: self.k,
            matrix: self.matrix,
            lu,
            condition_estimate,
            opts: *opts,
        })
    }
}

impl FactoredBie {
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Right-hand side for the given incidence.
    fn rhs(&self, incidence: &Incidence) -> Result<Vec<Complex64>, SolveError> {
        if let Incidence::PointSource { location } = incidence {
            let clearance = self.surface.distance_to_nodes(*location);
            let panel = self.surface.panel_diameter();
            if self.surface.spec.contains(*location) || clearance < panel {
                return Err(SolveError::SourceTooClose(*location, clearance, panel));
            }
        }
        let k = self.k;
        Ok(match self.bc {
            BoundaryCondition::Dirichlet => self
                .surface
                .nodes
                .iter()
                .zip(&self.surface.normals)
                .map(|(x, n)| incidence.normal_derivative(*x, *n, k))
                .collect(),
            _ => self
                .surface
                .nodes
                .iter()
                .map(|x| incidence.field(*x, k))
                .collect(),
        })
    }

    pub fn solve(&self, incidence: Incidence) -> Result<BoundarySolution, SolveError> {
        let b = self.rhs(&incidence)?;
        let (density, residual) = self.lu.solve_refined(&self.matrix, &b);
        if residual > self.opts.solve_tol {
            return Err(SolveError::ResidualTooLarge(residual, self.opts.solve_tol));
        }
        Ok(BoundarySolution {
            surface: Arc::clone(&self.surface),
            bc: self.bc,
            incidence,
            k: self.k,
            density,
            residual,
        })
    }

    /// Density for a superposition of incident fields (the problem is
    /// linear in the right-hand side).
    pub fn solve_superposition(
        &self,
        parts: &[(Complex64, Incidence)],
    ) -> Result<Vec<Complex64>, SolveError> {
        let n = self.surface.len();
        let mut b = vec![Complex64::ZERO; n];
        for (amp, inc) in parts {
            for (acc, v) in b.iter_mut().zip(self.rhs(inc)?) {
                *acc += amp * v;
            }
        }
        let (density, _) = self.lu.solve_refined(&self.matrix, &b);
        Ok(density)
    }
}

/// Builds a factored operator directly from a prebuilt system matrix
/// (used when sweeping the impedance without reassembly).
pub fn factor_prebuilt(
    surface: Arc<QuadSurface>,
    bc: BoundaryCondition,
    k: Wavenumber,
    matrix: CMatrix,
    opts: &SolveOptions,
) -> Result<FactoredBie, SolveError> {
    BieOperator { surface, bc, k, matrix }.factor(opts)
}

/// One-call pipeline: guard, assemble, factor, solve.
pub fn solve_scattering(
    surface: Arc<QuadSurface>,
    bc: BoundaryCondition,
    incidence: Incidence,
    k: Wavenumber,
) -> Result<BoundarySolution, SolveError> {
    solve_scattering_with(
        surface,
        bc,
        incidence,
        k,
        &NystromParams::default(),
        &SolveOptions::default(),
    )
}

pub fn solve_scattering_with(
    surface: Arc<QuadSurface>,
    bc: BoundaryCondition,
    incidence: Incidence,
    k: Wavenumber,
    params: &NystromParams,
    opts: &SolveOptions,
) -> Result<BoundarySolution, SolveError> {
    if !opts.skip_resonance_guard {
        let advisory = interior_resonance_guard(&surface.spec, k, opts.resonance_guard_band)?;
        if let Some((l, root)) = advisory.nearest_within_band {
            return Err(SolveError::ResonanceGuard {
                ka: advisory.ka.unwrap_or(f64::NAN),
                band: opts.resonance_guard_band,
                l,
                root,
            });
        }
    }
    let op = assemble(surface, bc, k, params, opts)?;
    op.factor(opts)?.solve(incidence)
}

// ---------------------------------------------------------------------------
// Interior resonance guard
// ---------------------------------------------------------------------------

/// Advisory from the resonance guard. For spheres, k*a is compared against
/// interior eigen-wavenumbers (zeros of j_l and j_l', covering the spurious
/// sets of all three direct formulations); for other shapes the caller
/// should watch the factorization's condition estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceAdvisory {
    /// k * radius when the surface is a sphere.
    pub ka: Option<f64>,
    /// Closest tabulated eigen-wavenumber (l, root), if any were scanned.
    pub nearest: Option<(usize, f64)>,
    /// Set when the distance to `nearest` is below the guard band.
    pub nearest_within_band: Option<(usize, f64)>,
    pub message: String,
}

/// Scans zeros of j_l and j_l' below `x_max` by bisection.
fn sphere_eigen_wavenumbers(x_max: f64) -> Vec<(usize, f64)> {
    let mut roots = Vec::new();
    let lmax = (x_max.ceil() as usize) + 2;
    let eval_j = |l: usize, x: f64| sph_bessel_j_upto(l, x).map(|t| t[l]).unwrap_or(f64::NAN);
    let eval_jp = |l: usize, x: f64| {
        sph_bessel_j_upto(l + 1, x)
            .map(|t| sph_deriv_from_table(&t, l, x))
            .unwrap_or(f64::NAN)
    };
    let mut scan = |l: usize, f: &dyn Fn(f64) -> f64| {
        let step = 0.02;
        let mut x0 = 0.05;
        let mut f0 = f(x0);
        while x0 < x_max {
            let x1 = (x0 + step).min(x_max);
            let f1 = f(x1);
            if f0 == 0.0 {
                roots.push((l, x0));
            } else if f0 * f1 < 0.0 {
                let (mut a, mut b) = (x0, x1);
                let mut fa = f0;
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    let fm = f(mid);
                    if fa * fm <= 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                }
                roots.push((l, 0.5 * (a + b)));
            }
            x0 = x1;
            f0 = f1;
        }
    };
    for l in 0..=lmax {
        scan(l, &|x| eval_j(l, x));
        scan(l, &|x| eval_jp(l, x));
    }
    roots.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    roots
}

/// Resonance advisory for a surface at wave number k. Advisory only; the
/// solver consults it before factorizing, and non-sphere shapes rely on the
/// condition monitor instead.
pub fn interior_resonance_guard(
    spec: &SurfaceSpec,
    k: Wavenumber,
    band: f64,
) -> Result<ResonanceAdvisory, SolveError> {
    if let Some(radius) = spec.as_sphere() {
        let ka = k.get() * radius;
        let roots = sphere_eigen_wavenumbers(ka + band + 1.0);
        let nearest = roots
            .iter()
            .min_by(|a, b| (a.1 - ka).abs().partial_cmp(&(b.1 - ka).abs()).unwrap())
            .copied();
        let nearest_within_band = nearest.filter(|(_, r)| (r - ka).abs() < band);
        let message = match (&nearest_within_band, &nearest) {
            (Some((l, r)), _) => format!(
                "k*a = {ka:.6} is within {band} of the interior eigen-wavenumber {r:.6} (l = {l}); expect a spurious resonance of the direct formulation"
            ),
            (None, Some((l, r))) => format!(
                "k*a = {ka:.6} is clear of interior eigen-wavenumbers (nearest {r:.6} at l = {l})"
            ),
            _ => format!("k*a = {ka:.6}; no eigen-wavenumbers scanned"),
        };
        Ok(ResonanceAdvisory { ka: Some(ka), nearest, nearest_within_band, message })
    } else {
        Ok(ResonanceAdvisory {
            ka: None,
            nearest: None,
            nearest_within_band: None,
            message: "non-spherical surface: consult the factorization condition estimate".into(),
        })
    }
}

// ---------------------------------------------------------------------------
// Scenario configuration (external interface)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcConfig {
    /// One of "dirichlet", "neumann", "impedance".
    pub kind: String,
    #[serde(default)]
    pub h_re: f64,
    #[serde(default)]
    pub h_im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncidenceConfig {
    /// One of "plane", "point".
    pub kind: String,
    #[serde(default)]
    pub direction: Option<[f64; 3]>,
    #[serde(default)]
    pub location: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToleranceConfig {
    #[serde(default = "default_solve_tol")]
    pub solve_tol: f64,
    #[serde(default = "default_guard_band")]
    pub resonance_guard_band: f64,
    #[serde(default = "default_cond_threshold")]
    pub condition_threshold: f64,
}

fn default_solve_tol() -> f64 {
    1e-10
}
fn default_guard_band() -> f64 {
    0.05
}
fn default_cond_threshold() -> f64 {
    1e12
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            solve_tol: default_solve_tol(),
            resonance_guard_band: default_guard_band(),
            condition_threshold: default_cond_threshold(),
        }
    }
}

/// One forward-solve scenario, as read from a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub surface: SurfaceSpec,
    pub bc: BcConfig,
    pub incidence: IncidenceConfig,
    pub k: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown boundary condition kind {0:?}")]
    UnknownBc(String),
    #[error("unknown incidence kind {0:?}")]
    UnknownIncidence(String),
    #[error("incidence {0:?} requires field {1:?}")]
    MissingField(String, String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl ScenarioConfig {
    pub fn boundary_condition(&self) -> Result<BoundaryCondition, ConfigError> {
        let bc = match self.bc.kind.as_str() {
            "dirichlet" => BoundaryCondition::Dirichlet,
            "neumann" => BoundaryCondition::Neumann,
            "impedance" => BoundaryCondition::Impedance(Complex64::new(self.bc.h_re, self.bc.h_im)),
            other => return Err(ConfigError::UnknownBc(other.into())),
        };
        bc.validate()?;
        Ok(bc)
    }

    pub fn incidence_value(&self) -> Result<Incidence, ConfigError> {
        match self.incidence.kind.as_str() {
            "plane" => {
                let d = self.incidence.direction.ok_or_else(|| {
                    ConfigError::MissingField("plane".into(), "direction".into())
                })?;
                Ok(Incidence::plane(Vec3::new(d[0], d[1], d[2]).normalized())?)
            }
            "point" => {
                let p = self.incidence.location.ok_or_else(|| {
                    ConfigError::MissingField("point".into(), "location".into())
                })?;
                Ok(Incidence::point(Vec3::new(p[0], p[1], p[2])))
            }
            other => Err(ConfigError::UnknownIncidence(other.into())),
        }
    }

    pub fn wavenumber(&self) -> Result<Wavenumber, ConfigError> {
        Ok(Wavenumber::new(self.k)?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            solve_tol: self.tolerances.solve_tol,
            resonance_guard_band: self.tolerances.resonance_guard_band,
            condition_threshold: self.tolerances.condition_threshold,
            ..SolveOptions::default()
        }
    }

    pub fn discretize(&self) -> Result<QuadSurface, ConfigError> {
        self.surface.validate()?;
        Ok(discretize(&self.surface, self.n_theta, self.n_phi)?)
    }

    /// Runs the scenario end to end.
    pub fn run(&self) -> Result<BoundarySolution, ConfigError> {
        let surface = Arc::new(self.discretize()?);
        Ok(solve_scattering_with(
            surface,
            self.boundary_condition()?,
            self.incidence_value()?,
            self.wavenumber()?,
            &NystromParams::default(),
            &self.solve_options(),
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere(n_theta: usize, n_phi: usize) -> Arc<QuadSurface> {
        let spec = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
        Arc::new(discretize(&spec, n_theta, n_phi).unwrap())
    }

    #[test]
    fn assembly_is_deterministic() {
        let q = unit_sphere(8, 16);
        let k = Wavenumber::new(1.0).unwrap();
        let m1 = assemble_matrix(&q, BoundaryCondition::Dirichlet, k, &NystromParams::default());
        let m2 = assemble_matrix(&q, BoundaryCondition::Dirichlet, k, &NystromParams::default());
        assert_eq!(m1.data(), m2.data());
    }

    #[test]
    fn impedance_h_zero_reduces_to_neumann() {
        let q = unit_sphere(8, 16);
        let k = Wavenumber::new(1.2).unwrap();
        let inc = Incidence::plane(Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let opts = SolveOptions::default();
        let params = NystromParams::default();
        let neu = assemble(Arc::clone(&q), BoundaryCondition::Neumann, k, &params, &opts)
            .unwrap()
            .factor(&opts)
            .unwrap()
            .solve(inc)
            .unwrap();
        let imp = assemble(
            Arc::clone(&q),
            BoundaryCondition::Impedance(Complex64::ZERO),
            k,
            &params,
            &opts,
        )
        .unwrap()
        .factor(&opts)
        .unwrap()
        .solve(inc)
        .unwrap();
        let max_diff = neu
            .density
            .iter()
            .zip(&imp.density)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-10, "max_diff={max_diff:.3e}");
    }

    #[test]
    fn static_limit_gives_capacitance_density() {
        // k -> 0 Dirichlet unit sphere: u_N -> 1 uniformly (unit-capacitance
        // surface charge density 1/(4 pi) in Gaussian convention); at finite
        // ka the exact density carries an O(ka) correction, so compare to
        // the series solution and to the limit with matching slack
        let q = unit_sphere(16, 32);
        let k = Wavenumber::new(0.01).unwrap();
        let alpha = Vec3::new(0.0, 0.0, 1.0);
        let inc = Incidence::plane(alpha).unwrap();
        let sol = solve_scattering(Arc::clone(&q), BoundaryCondition::Dirichlet, inc, k).unwrap();
        for (d, node) in sol.density.iter().zip(&q.nodes) {
            let exact = crate::oracle::mie_total_field_radial_deriv(
                1.0,
                BoundaryCondition::Dirichlet,
                k,
                alpha,
                *node * (1.0 + 1e-12),
            )
            .unwrap();
            assert!((d - exact).norm() < 2e-3, "density {d} vs exact {exact}");
            assert!((d.norm() - 1.0).abs() < 0.03, "density {d} far from the static limit");
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(BoundaryCondition::Impedance(Complex64::new(0.3, -0.1)).validate().is_err());
        assert!(Incidence::plane(Vec3::new(0.0, 0.0, 2.0)).is_err());
        let q = unit_sphere(8, 16);
        let k = Wavenumber::new(1.0).unwrap();
        // point source inside the obstacle
        let res = solve_scattering(
            Arc::clone(&q),
            BoundaryCondition::Dirichlet,
            Incidence::point(Vec3::new(0.2, 0.0, 0.0)),
            k,
        );
        assert!(matches!(res, Err(SolveError::SourceTooClose(..))));
        // too close outside
        let res = solve_scattering(
            q,
            BoundaryCondition::Dirichlet,
            Incidence::point(Vec3::new(1.05, 0.0, 0.0)),
            k,
        );
        assert!(matches!(res, Err(SolveError::SourceTooClose(..))));
    }

    #[test]
    fn resonance_guard_flags_interior_eigenvalues() {
        let spec = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
        // k = pi: first zero of j_0
        let adv = interior_resonance_guard(&spec, Wavenumber::new(PI).unwrap(), 0.05).unwrap();
        assert!(adv.nearest_within_band.is_some(), "{}", adv.message);
        let (_, root) = adv.nearest_within_band.unwrap();
        assert!((root - PI).abs() < 1e-6);
        // k = 1: clear
        let adv = interior_resonance_guard(&spec, Wavenumber::new(1.0).unwrap(), 0.05).unwrap();
        assert!(adv.nearest_within_band.is_none(), "{}", adv.message);
        // solve refuses at the resonance
        let q = unit_sphere(8, 16);
        let res = solve_scattering(
            q,
            BoundaryCondition::Dirichlet,
            Incidence::plane(Vec3::new(0.0, 0.0, 1.0)).unwrap(),
            Wavenumber::new(PI).unwrap(),
        );
        assert!(matches!(res, Err(SolveError::ResonanceGuard { .. })));
    }

    #[test]
    fn guard_reports_non_sphere_without_table() {
        let spec = SurfaceSpec::spheroid(1.0, 1.3, 8, Vec3::ZERO).unwrap();
        let adv = interior_resonance_guard(&spec, Wavenumber::new(2.0).unwrap(), 0.05).unwrap();
        assert!(adv.ka.is_none());
        assert!(adv.nearest_within_band.is_none());
    }

    #[test]
    fn node_cap_is_enforced() {
        let q = unit_sphere(8, 16);
        let opts = SolveOptions { max_nodes: 16, ..SolveOptions::default() };
        let res = assemble(
            q,
            BoundaryCondition::Dirichlet,
            Wavenumber::new(1.0).unwrap(),
            &NystromParams::default(),
            &opts,
        );
        assert!(matches!(res, Err(SolveError::TooManyNodes(128, 16))));
    }

    #[test]
    fn scenario_config_round_trip() {
        let text = r#"{
            "surface": {"label": "s", "center": [0,0,0], "L_geo": 0, "coeffs": [3.5449077018110318]},
            "bc": {"kind": "impedance", "h_re": 0.3, "h_im": 0.2},
            "incidence": {"kind": "plane", "direction": [0,0,1]},
            "k": 1.0, "n_theta": 8, "n_phi": 16
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(text).unwrap();
        assert!(matches!(cfg.boundary_condition().unwrap(), BoundaryCondition::Impedance(_)));
        assert!(matches!(cfg.incidence_value().unwrap(), Incidence::PlaneWave { .. }));
        let sol = cfg.run().unwrap();
        assert_eq!(sol.density.len(), 128);
        assert!(sol.residual < 1e-10);
    }
}
