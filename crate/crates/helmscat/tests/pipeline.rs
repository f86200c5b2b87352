//! Solver-to-fields pipeline checked against the partial-wave series
//! oracle on spheres, plus translation covariance and the receding-source
//! limit.

use helmscat::fields::{
    eval_scattered, eval_total, far_field, far_field_single,
    scattering_solution_from_source_limit, FarFieldPattern,
};
use helmscat::geom::{discretize, SurfaceSpec, Vec3};
use helmscat::kernels::Wavenumber;
use helmscat::oracle::{mie_far_field, mie_scattered_field, sphere_greens};
use helmscat::solver::{
    assemble, solve_scattering, BoundaryCondition, Incidence, NystromParams, SolveOptions,
};
use num_complex::Complex64;
use std::sync::Arc;

fn kw(v: f64) -> Wavenumber {
    Wavenumber::new(v).unwrap()
}

fn zhat() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

fn sphere_solution(
    radius: f64,
    n_theta: usize,
    n_phi: usize,
    bc: BoundaryCondition,
    k: f64,
) -> helmscat::solver::BoundarySolution {
    let spec = SurfaceSpec::make_sphere(radius, Vec3::ZERO).unwrap();
    let q = Arc::new(discretize(&spec, n_theta, n_phi).unwrap());
    solve_scattering(q, bc, Incidence::plane(zhat()).unwrap(), kw(k)).unwrap()
}

#[test]
fn far_field_matches_oracle_for_all_boundary_conditions() {
    for (bc, tol) in [
        (BoundaryCondition::Dirichlet, 1e-5),
        (BoundaryCondition::Neumann, 1e-5),
        (BoundaryCondition::Impedance(Complex64::new(0.3, 0.2)), 1e-5),
    ] {
        let sol = sphere_solution(1.0, 16, 32, bc, 1.0);
        let bie = far_field(&sol, 16, 32);
        let mie = mie_far_field(1.0, bc, kw(1.0), zhat(), 16, 32).unwrap();
        let err = bie.relative_l2_distance(&mie);
        assert!(err < tol, "{bc:?}: rel L2 err {err:.3e}");
    }
}

#[test]
fn far_field_converges_under_grid_doubling() {
    let mie = mie_far_field(1.0, BoundaryCondition::Dirichlet, kw(2.0), zhat(), 12, 24).unwrap();
    let coarse = far_field(&sphere_solution(1.0, 8, 16, BoundaryCondition::Dirichlet, 2.0), 12, 24);
    let fine = far_field(&sphere_solution(1.0, 16, 32, BoundaryCondition::Dirichlet, 2.0), 12, 24);
    let e_coarse = coarse.relative_l2_distance(&mie);
    let e_fine = fine.relative_l2_distance(&mie);
    assert!(
        e_fine < e_coarse,
        "doubling must reduce the error: {e_coarse:.3e} -> {e_fine:.3e}"
    );
    let change = fine.relative_l2_distance(&coarse);
    assert!(change <= 2.0 * e_coarse, "change {change:.3e} vs coarse error {e_coarse:.3e}");
}

#[test]
fn scattered_field_matches_oracle_series() {
    let sol = sphere_solution(1.0, 16, 32, BoundaryCondition::Dirichlet, 1.0);
    for x in [
        Vec3::new(0.0, 0.0, 5.0),
        Vec3::new(3.0, -2.0, 1.0),
        Vec3::new(-1.2, 0.3, -1.1),
    ] {
        let v = eval_scattered(&sol, x).unwrap();
        let exact = mie_scattered_field(1.0, BoundaryCondition::Dirichlet, kw(1.0), zhat(), x)
            .unwrap();
        assert!(
            (v - exact).norm() < 1e-3 * exact.norm().max(0.05),
            "at {x:?}: {v} vs {exact}"
        );
    }
}

#[test]
fn scaled_scattered_field_converges_to_far_field_value() {
    // |v(r beta)| r is bounded and approaches |A(beta)|
    let sol = sphere_solution(1.0, 12, 24, BoundaryCondition::Dirichlet, 1.0);
    let beta = Vec3::new(0.6, 0.0, 0.8);
    let a = far_field_single(&sol, beta);
    let mut gaps = Vec::new();
    for r in [50.0, 100.0, 200.0] {
        let v = eval_scattered(&sol, beta * r).unwrap();
        let scaled = v * r / Complex64::from_polar(1.0, sol.k.get() * r);
        let gap = (scaled - a).norm();
        assert!(scaled.norm() < 10.0, "scaled field must stay bounded");
        gaps.push(gap);
    }
    // v r e^{-ikr} approaches A at the O(1/r) rate
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "gaps {gaps:?}");
    assert!(gaps[2] < 0.4 * gaps[0], "gaps {gaps:?}");
    assert!(gaps[2] < 0.05 * a.norm().max(0.1));
}

#[test]
fn translation_covariance_of_the_pattern() {
    // A_d(beta, alpha) = e^{i k (alpha - beta) . d} A(beta, alpha)
    let k = kw(1.0);
    let d = Vec3::new(0.7, -0.4, 1.1);
    let base = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
    let shifted = base.translated(d);
    let q0 = Arc::new(discretize(&base, 12, 24).unwrap());
    let q1 = Arc::new(discretize(&shifted, 12, 24).unwrap());
    let alpha = zhat();
    let s0 = solve_scattering(q0, BoundaryCondition::Dirichlet, Incidence::plane(alpha).unwrap(), k)
        .unwrap();
    let s1 = solve_scattering(q1, BoundaryCondition::Dirichlet, Incidence::plane(alpha).unwrap(), k)
        .unwrap();
    let p0 = far_field(&s0, 8, 16);
    let p1 = far_field(&s1, 8, 16);
    let mut max_err = 0.0_f64;
    for ((beta, v0), v1) in p0.directions.iter().zip(&p0.values).zip(&p1.values) {
        let phase = Complex64::from_polar(1.0, k.get() * (alpha - *beta).dot(d));
        max_err = max_err.max((v1 - phase * v0).norm());
    }
    assert!(max_err < 1e-6, "max covariance error {max_err:.3e}");
}

#[test]
fn greens_function_is_symmetric_and_matches_series() {
    let spec = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
    let k = kw(1.0);
    let x = Vec3::new(0.3, 0.2, 2.2);
    let y = Vec3::new(-1.8, 0.4, -0.9);
    let gxy = helmscat::fields::greens_function(&spec, BoundaryCondition::Dirichlet, k, x, y, 12, 24)
        .unwrap();
    let gyx = helmscat::fields::greens_function(&spec, BoundaryCondition::Dirichlet, k, y, x, 12, 24)
        .unwrap();
    let rel = (gxy.value - gyx.value).norm() / gxy.value.norm();
    assert!(rel < 1e-3, "symmetry violation {rel:.3e}");
    let exact = sphere_greens(1.0, k, x, y).unwrap();
    let rel = (gxy.value - exact).norm() / exact.norm();
    assert!(rel < 1e-3, "series mismatch {rel:.3e}");
}

#[test]
fn vanishing_obstacle_reduces_green_to_free_kernel() {
    let spec = SurfaceSpec::make_sphere(1e-3, Vec3::ZERO).unwrap();
    let k = kw(1.0);
    let x = Vec3::new(0.0, 0.0, 1.5);
    let y = Vec3::new(1.2, 0.5, -0.8);
    let g = helmscat::fields::greens_function(&spec, BoundaryCondition::Dirichlet, k, x, y, 8, 16)
        .unwrap();
    let free = helmscat::kernels::kernel_g(x, y, k);
    assert!(
        (g.value - free).norm() < 0.01 * free.norm(),
        "G = {:?} vs g = {free:?}",
        g.value
    );
}

#[test]
fn green_vanishes_as_source_approaches_dirichlet_boundary() {
    let spec = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
    let k = kw(1.0);
    let x = Vec3::new(0.0, 0.0, 3.0);
    let t = Vec3::new(1.0, 0.0, 0.0);
    let q = Arc::new(discretize(&spec, 16, 32).unwrap());
    let opts = SolveOptions::default();
    let fac = assemble(Arc::clone(&q), BoundaryCondition::Dirichlet, k, &NystromParams::default(), &opts)
        .unwrap()
        .factor(&opts)
        .unwrap();
    let mut prev = f64::INFINITY;
    // clearance in panel diameters, shrinking toward the surface
    for c in [6.0, 4.0, 2.0] {
        let y = t * (1.0 + c * q.panel_diameter());
        let sol = fac.solve(Incidence::point(y)).unwrap();
        let g = eval_total(&sol, x).unwrap();
        assert!(g.norm() < prev, "|G| should decrease along the approach");
        prev = g.norm();
    }
    // |G| at ~2-panel clearance scales like clearance * normal derivative
    let free_scale = helmscat::kernels::kernel_g(x, t, k).norm();
    assert!(prev < 0.35 * free_scale, "terminal |G| = {prev:.3e}");
}

#[test]
fn receding_source_approaches_plane_wave_solution() {
    let spec = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
    let k = kw(1.0);
    let r = 1.3;
    let probes: Vec<Vec3> = vec![
        Vec3::new(0.0, 0.0, r),
        Vec3::new(r, 0.0, 0.0),
        Vec3::new(0.0, -r, 0.0),
        Vec3::new(r * 0.577, r * 0.577, -r * 0.577),
    ];
    let taus = [20.0, 40.0, 80.0];
    // eta = 0
    let snaps = scattering_solution_from_source_limit(
        &spec,
        BoundaryCondition::Dirichlet,
        k,
        zhat(),
        &taus,
        Vec3::ZERO,
        &probes,
        16,
        32,
    )
    .unwrap();
    let xs: Vec<f64> = snaps.iter().map(|s| s.y0.norm().ln()).collect();
    let ys: Vec<f64> = snaps.iter().map(|s| s.max_residual_absolute.ln()).collect();
    let slope = (ys[2] - ys[0]) / (xs[2] - xs[0]);
    assert!(slope <= -1.8, "absolute remainder slope {slope:.2}");
    assert!(snaps[2].max_residual_renormalized < 1e-2);
    // eta orthogonal to alpha: same limit
    let snaps_eta = scattering_solution_from_source_limit(
        &spec,
        BoundaryCondition::Dirichlet,
        k,
        zhat(),
        &taus,
        Vec3::new(1.0, 0.0, 0.0),
        &probes,
        16,
        32,
    )
    .unwrap();
    let ys: Vec<f64> = snaps_eta.iter().map(|s| s.max_residual_absolute.ln()).collect();
    let slope = (ys[2] - ys[0]) / (xs[2] - xs[0]);
    assert!(slope <= -1.8, "eta offset slope {slope:.2}");
    // small tau deviates visibly more, decreasing in tau
    let snaps_small = scattering_solution_from_source_limit(
        &spec,
        BoundaryCondition::Dirichlet,
        k,
        zhat(),
        &[3.0, 6.0, 12.0],
        Vec3::ZERO,
        &probes,
        16,
        32,
    )
    .unwrap();
    assert!(snaps_small[0].max_residual_renormalized > snaps_small[1].max_residual_renormalized);
    assert!(snaps_small[1].max_residual_renormalized > snaps_small[2].max_residual_renormalized);
    assert!(snaps_small[0].max_residual_renormalized > snaps[2].max_residual_renormalized * 5.0);
}

#[test]
fn boundary_condition_satisfied_at_offgrid_points_and_shrinks() {
    // reconstructed total field near off-grid surface points: |u| for
    // Dirichlet at fixed 1.5-panel clearance shrinks under refinement
    let spec = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
    let k = kw(1.0);
    let mut eps = Vec::new();
    for (nt, np) in [(8usize, 16usize), (16, 32)] {
        let q = Arc::new(discretize(&spec, nt, np).unwrap());
        let sol = solve_scattering(
            Arc::clone(&q),
            BoundaryCondition::Dirichlet,
            Incidence::plane(zhat()).unwrap(),
            k,
        )
        .unwrap();
        let clearance = 1.5 * q.panel_diameter();
        let mut worst = 0.0_f64;
        for (theta, phi) in [(0.9, 0.37), (1.7, 2.3), (2.6, 4.9)] {
            let jet = spec.surface_jet(theta, phi);
            let x = jet.point + jet.normal * clearance;
            worst = worst.max(eval_total(&sol, x).unwrap().norm());
        }
        eps.push(worst);
    }
    assert!(eps[1] < eps[0], "bc mismatch must shrink: {eps:?}");
    // |u| a clearance c off the surface is ~ c |u_N|; require the expected scale
    let q = discretize(&spec, 16, 32).unwrap();
    assert!(eps[1] < 3.0 * 1.5 * q.panel_diameter(), "terminal bc mismatch {:.3e}", eps[1]);
}

#[test]
fn pattern_file_round_trip_through_disk_format() {
    let sol = sphere_solution(1.0, 8, 16, BoundaryCondition::Dirichlet, 1.0);
    let p = far_field(&sol, 8, 16);
    let text = p.to_csv();
    let back = FarFieldPattern::from_csv(&text).unwrap();
    assert_eq!(back.to_csv(), text);
}
