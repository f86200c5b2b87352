//! Inversion demos beyond the acceptance baseline: reconstruction from
//! cap-restricted data with continuation preprocessing, and rotation
//! equivariance of the recovered shape.

use helmscat::fields::{far_field_on, FarFieldPattern};
use helmscat::geom::{discretize, sphere_quadrature, SurfaceSpec, Vec3};
use helmscat::inverse::{reconstruct_shape, InversionConfig};
use helmscat::kernels::Wavenumber;
use helmscat::mathfn::{fit_expansion, sh_index};
use helmscat::solver::{assemble, BoundaryCondition, Incidence, NystromParams, SolveOptions};
use std::f64::consts::PI;
use std::sync::Arc;

fn forward_pattern(
    spec: &SurfaceSpec,
    k: Wavenumber,
    alpha: Vec3,
    solve_grid: [usize; 2],
    out: (usize, usize),
) -> FarFieldPattern {
    let surface = Arc::new(discretize(spec, solve_grid[0], solve_grid[1]).unwrap());
    let opts = SolveOptions::default();
    let fac = assemble(surface, BoundaryCondition::Dirichlet, k, &NystromParams::default(), &opts)
        .unwrap()
        .factor(&opts)
        .unwrap();
    let sol = fac.solve(Incidence::plane(alpha).unwrap()).unwrap();
    let (dirs, weights) = sphere_quadrature(out.0, out.1);
    far_field_on(&sol, &dirs, &weights, out)
}

#[test]
fn cap_restricted_data_converges_after_continuation() {
    let k = Wavenumber::new(1.0).unwrap();
    let alpha = Vec3::new(0.0, 0.0, 1.0);
    let target = SurfaceSpec::perturbed_sphere(1.0, 2, 0, 0.2, Vec3::ZERO).unwrap();
    let full = forward_pattern(&target, k, alpha, [18, 36], (16, 32));

    // keep only the polar cap theta < 90 degrees, then extend back to the
    // full sphere by a least-squares expansion before inverting
    let mut samples = Vec::new();
    let mut weights = Vec::new();
    for ((d, v), w) in full.directions.iter().zip(&full.values).zip(&full.weights) {
        if d.to_angles().0 < PI / 2.0 {
            samples.push((*d, *v));
            weights.push(*w);
        }
    }
    assert!(samples.len() < full.values.len(), "cap restriction must drop data");
    let fit = fit_expansion(&samples, 6, Some(&weights)).unwrap();
    let extended = FarFieldPattern {
        values: full.directions.iter().map(|d| fit.expansion.eval(*d)).collect(),
        ..full.clone()
    };
    // the extension itself must be close to the held-out hemisphere
    let ext_err = extended.relative_l2_distance(&full);
    assert!(ext_err < 1e-3, "continuation error {ext_err:.3e}");

    let mut cfg = InversionConfig::new(1.0, alpha, 2);
    cfg.forward_grid = [10, 20];
    cfg.misfit_tol = 5e-4;
    cfg.max_iterations = 12;
    let initial = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
    let out = reconstruct_shape(&cfg, &extended, &initial).unwrap();
    assert!(out.converged, "trace {:?}", out.misfit_trace);
    let c20 = out.spec.coeffs[sh_index(2, 0)];
    assert!((c20 - 0.2).abs() < 1e-2, "recovered c20 = {c20}");
}

#[test]
fn reconstruction_is_rotation_equivariant() {
    // rotating the data directions about the (invariant) incident axis
    // must rotate the recovered shape the same way
    let k = Wavenumber::new(1.0).unwrap();
    let alpha = Vec3::new(0.0, 0.0, 1.0);
    let target = SurfaceSpec::perturbed_sphere(1.0, 2, 1, 0.15, Vec3::ZERO).unwrap();
    let data = forward_pattern(&target, k, alpha, [14, 28], (12, 24));

    let rotate = |v: Vec3| Vec3::new(-v.y, v.x, v.z); // +90 degrees about z
    let rotated_data = FarFieldPattern {
        directions: data.directions.iter().map(|d| rotate(*d)).collect(),
        ..data.clone()
    };

    let mut cfg = InversionConfig::new(1.0, alpha, 2);
    cfg.forward_grid = [10, 20];
    cfg.misfit_tol = 3e-4;
    cfg.max_iterations = 10;
    let initial = SurfaceSpec::make_sphere(1.0, Vec3::ZERO).unwrap();
    let rec1 = reconstruct_shape(&cfg, &data, &initial).unwrap();
    let rec2 = reconstruct_shape(&cfg, &rotated_data, &initial).unwrap();
    assert!(rec1.converged && rec2.converged);

    let (dirs, _) = sphere_quadrature(10, 20);
    let mut worst = 0.0_f64;
    for d in &dirs {
        let (t1, p1) = d.to_angles();
        let (t2, p2) = rotate(*d).to_angles();
        worst = worst.max((rec2.spec.radius_at(t2, p2) - rec1.spec.radius_at(t1, p1)).abs());
    }
    assert!(worst < 5e-3, "equivariance violation {worst:.3e}");
}
