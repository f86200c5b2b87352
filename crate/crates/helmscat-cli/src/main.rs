//! Command-line front end: forward solves, Green's function probes, the
//! sphere oracle, the identity-verification suites, shape inversion,
//! parameter sweeps, and mesh dumps.
//!
//! Every run writes a manifest listing the resolved configuration, the
//! emitted files, and wall-clock timings. Data outputs are deterministic
//! byte-for-byte given the same configuration; floats are printed at 17
//! significant digits so files round-trip losslessly.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use helmscat::fields::{far_field, FarFieldPattern};
use helmscat::geom::{discretize, sphere_quadrature, SurfaceSpec, Vec3};
use helmscat::inverse::{classify_boundary_condition, reconstruct_shape, InversionConfig};
use helmscat::kernels::{kernel_g, Wavenumber};
use helmscat::oracle::mie_far_field_on;
use helmscat::solver::{
    assemble, BoundaryCondition, Incidence, NystromParams, ScenarioConfig, SolveOptions,
};
use helmscat::verify::{render_table, run_identity, run_suite, VerifyProfile};
use num_complex::Complex64;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "helmscat",
    about = "Exterior Helmholtz obstacle scattering: boundary integral solver, sphere oracle, identity verification, and shape inversion",
    version
)]
struct Cli {
    /// Directory for emitted files and the run manifest.
    #[arg(long, global = true, default_value = "helmscat-out")]
    output_dir: PathBuf,
    /// Print the run plan without solving or writing data files.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scattering scenario from a JSON config; dump the boundary
    /// density and the far-field pattern.
    Forward(ForwardArgs),
    /// Obstacle Green's function G(x, y, k) for a scenario's surface.
    Greens(GreensArgs),
    /// Exact partial-wave far-field pattern of a sphere.
    Oracle(OracleArgs),
    /// Run the identity-verification suite or a single identity.
    Verify(VerifyArgs),
    /// Recover an obstacle shape (and optionally the boundary condition)
    /// from far-field data.
    Invert(InvertArgs),
    /// Cartesian parameter sweep over wave numbers, grids, and surfaces.
    Sweep(SweepArgs),
    /// Dump quadrature nodes, normals, and weights for a surface.
    MeshDump(MeshDumpArgs),
}

#[derive(Args)]
struct ForwardArgs {
    /// Scenario JSON file (see configs/scenario_sphere_dirichlet.json).
    #[arg(long)]
    config: PathBuf,
    /// Far-field output grid "n_theta,n_phi".
    #[arg(long, default_value = "16,32")]
    pattern_grid: String,
}

#[derive(Args)]
struct GreensArgs {
    /// Scenario JSON file providing the surface, boundary condition, wave
    /// number, and discretization (the incidence entry is ignored).
    #[arg(long)]
    config: PathBuf,
    /// Evaluation point "x,y,z".
    #[arg(long)]
    x: String,
    /// Source point "x,y,z".
    #[arg(long)]
    y: String,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// One of dirichlet, neumann, impedance.
    #[arg(long, default_value = "dirichlet")]
    bc: String,
    #[arg(long, default_value_t = 0.0)]
    h_re: f64,
    #[arg(long, default_value_t = 0.0)]
    h_im: f64,
    /// Incident direction "x,y,z".
    #[arg(long, default_value = "0,0,1")]
    alpha: String,
    /// Output grid "n_theta,n_phi".
    #[arg(long, default_value = "16,32")]
    grid: String,
    /// Output pattern file name (inside the output directory).
    #[arg(long, default_value = "oracle_pattern.csv")]
    out: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Tolerance/grid profile: fast or slow.
    #[arg(long, default_value = "fast")]
    suite: String,
    /// Run a single identity instead of the whole suite.
    #[arg(long)]
    identity: Option<String>,
    /// Profile JSON overriding the shipped configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report file name (inside the output directory).
    #[arg(long, default_value = "verify_report.json")]
    out: String,
}

#[derive(Args)]
struct InvertArgs {
    /// Far-field data file (CSV with JSON header, as written by forward/oracle).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Incident direction "x,y,z" of the data.
    #[arg(long, default_value = "0,0,1")]
    alpha: String,
    /// Shape degree of the recovered radius map.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Boundary condition: auto, dirichlet, neumann, impedance.
    #[arg(long, default_value = "dirichlet")]
    bc: String,
    #[arg(long, default_value_t = 1e-6)]
    lambda: f64,
    #[arg(long, default_value_t = 30)]
    max_iter: usize,
    /// Forward grid "n_theta,n_phi" used inside the inversion.
    #[arg(long, default_value = "12,24")]
    forward_grid: String,
    /// Initial-guess sphere radius.
    #[arg(long, default_value_t = 1.0)]
    initial_radius: f64,
    /// Result file name (inside the output directory).
    #[arg(long, default_value = "inversion.json")]
    out: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep JSON file (see configs/sweep_example.json).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV name (inside the output directory).
    #[arg(long, default_value = "sweep.csv")]
    out: String,
    /// Refuse sweeps whose estimated cost exceeds this many node-cubed
    /// units.
    #[arg(long, default_value_t = 2e12)]
    budget: f64,
}

#[derive(Args)]
struct MeshDumpArgs {
    /// Surface spec JSON file.
    #[arg(long)]
    surface: PathBuf,
    /// Grid "n_theta,n_phi".
    #[arg(long, default_value = "16,32")]
    grid: String,
    /// Output CSV name (inside the output directory).
    #[arg(long, default_value = "mesh.csv")]
    out: String,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: serde_json::Value,
    outputs: Vec<String>,
    timings_seconds: serde_json::Value,
    tolerance_profile: Option<serde_json::Value>,
}

fn parse_triple(text: &str) -> Result<Vec3> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("expected three comma-separated numbers, got {text:?}"))?;
    if parts.len() != 3 {
        bail!("expected three comma-separated numbers, got {text:?}");
    }
    Ok(Vec3::new(parts[0], parts[1], parts[2]))
}

fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("expected \"n_theta,n_phi\", got {text:?}"))?;
    if parts.len() != 2 {
        bail!("expected \"n_theta,n_phi\", got {text:?}");
    }
    Ok((parts[0], parts[1]))
}

fn parse_bc(kind: &str, h_re: f64, h_im: f64) -> Result<BoundaryCondition> {
    let bc = match kind {
        "dirichlet" => BoundaryCondition::Dirichlet,
        "neumann" => BoundaryCondition::Neumann,
        "impedance" => BoundaryCondition::Impedance(Complex64::new(h_re, h_im)),
        other => bail!("unknown boundary condition {other:?}"),
    };
    bc.validate().map_err(|e| anyhow!(e.to_string()))?;
    Ok(bc)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

struct Emitter {
    dir: PathBuf,
    dry_run: bool,
    outputs: Vec<String>,
}

impl Emitter {
    fn new(dir: &Path, dry_run: bool) -> Result<Self> {
        if !dry_run {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create output directory {dir:?}"))?;
        }
        Ok(Self { dir: dir.to_path_buf(), dry_run, outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if self.dry_run {
            println!("dry-run: would write {}", path.display());
        } else {
            std::fs::write(&path, contents)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    fn finish(
        mut self,
        subcommand: &str,
        config: serde_json::Value,
        timings: serde_json::Value,
        profile: Option<serde_json::Value>,
    ) -> Result<()> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config,
            outputs: std::mem::take(&mut self.outputs),
            timings_seconds: timings,
            tolerance_profile: profile,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        if self.dry_run {
            println!("dry-run manifest:\n{text}");
        } else {
            let path = self.dir.join("manifest.json");
            std::fs::write(&path, text)
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("manifest: {}", path.display());
        }
        Ok(())
    }
}

fn density_csv(sol: &helmscat::solver::BoundarySolution) -> String {
    let mut out = String::from("x,y,z,re_density,im_density\n");
    for (node, d) in sol.surface.nodes.iter().zip(&sol.density) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt17(node.x),
            fmt17(node.y),
            fmt17(node.z),
            fmt17(d.re),
            fmt17(d.im)
        ));
    }
    out
}

fn run_forward(cli: &Cli, args: &ForwardArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).context("malformed scenario config")?;
    let (pt, pp) = parse_grid(&args.pattern_grid)?;
    let mut emitter = Emitter::new(&cli.output_dir, cli.dry_run)?;
    let config_snapshot = serde_json::to_value(&cfg)?;
    if cli.dry_run {
        emitter.write("density.csv", "")?;
        emitter.write("pattern.csv", "")?;
        emitter.finish(
            "forward",
            config_snapshot,
            serde_json::json!({}),
            None,
        )?;
        return Ok(0);
    }
    let t0 = Instant::now();
    let sol = cfg.run().map_err(|e| anyhow!(e.to_string()))?;
    let solve_s = t0.elapsed().as_secs_f64();
    let pattern = far_field(&sol, pt, pp);
    emitter.write("density.csv", &density_csv(&sol))?;
    emitter.write("pattern.csv", &pattern.to_csv())?;
    println!(
        "forward solve: {} nodes, linear residual {:.3e}, |A| L2 = {:.6e}",
        sol.surface.len(),
        sol.residual,
        pattern.l2_norm()
    );
    emitter.finish(
        "forward",
        config_snapshot,
        serde_json::json!({"total": t0.elapsed().as_secs_f64(), "solve": solve_s}),
        None,
    )?;
    Ok(0)
}

fn run_greens(cli: &Cli, args: &GreensArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).context("malformed scenario config")?;
    let x = parse_triple(&args.x)?;
    let y = parse_triple(&args.y)?;
    let mut emitter = Emitter::new(&cli.output_dir, cli.dry_run)?;
    let config_snapshot = serde_json::json!({
        "scenario": serde_json::to_value(&cfg)?,
        "x": [x.x, x.y, x.z],
        "y": [y.x, y.y, y.z],
    });
    if cli.dry_run {
        emitter.write("greens.json", "")?;
        emitter.finish("greens", config_snapshot, serde_json::json!({}), None)?;
        return Ok(0);
    }
    let t0 = Instant::now();
    let k = cfg.wavenumber().map_err(|e| anyhow!(e.to_string()))?;
    let sample = helmscat::fields::greens_function(
        &cfg.surface,
        cfg.boundary_condition().map_err(|e| anyhow!(e.to_string()))?,
        k,
        x,
        y,
        cfg.n_theta,
        cfg.n_phi,
    )
    .map_err(|e| anyhow!(e.to_string()))?;
    let free = kernel_g(x, y, k);
    let scattered = sample.value - free;
    let body = serde_json::json!({
        "x": [x.x, x.y, x.z],
        "y": [y.x, y.y, y.z],
        "k": k.get(),
        "green_total": [sample.value.re, sample.value.im],
        "free_space": [free.re, free.im],
        "scattered_part": [scattered.re, scattered.im],
    });
    emitter.write("greens.json", &serde_json::to_string_pretty(&body)?)?;
    println!(
        "G(x,y,k) = {:.10e} + {:.10e} i  (free part {:.10e} + {:.10e} i)",
        sample.value.re, sample.value.im, free.re, free.im
    );
    emitter.finish(
        "greens",
        config_snapshot,
        serde_json::json!({"total": t0.elapsed().as_secs_f64()}),
        None,
    )?;
    Ok(0)
}

fn run_oracle(cli: &Cli, args: &OracleArgs) -> Result<i32> {
    let bc = parse_bc(&args.bc, args.h_re, args.h_im)?;
    let alpha = parse_triple(&args.alpha)?.normalized();
    let (nt, np) = parse_grid(&args.grid)?;
    let k = Wavenumber::new(args.k).map_err(|e| anyhow!(e.to_string()))?;
    let mut emitter = Emitter::new(&cli.output_dir, cli.dry_run)?;
    let config_snapshot = serde_json::json!({
        "radius": args.radius, "k": args.k, "bc": args.bc,
        "h": [args.h_re, args.h_im], "alpha": [alpha.x, alpha.y, alpha.z],
        "grid": [nt, np],
    });
    if cli.dry_run {
        emitter.write(&args.out, "")?;
        emitter.finish("oracle", config_snapshot, serde_json::json!({}), None)?;
        return Ok(0);
    }
    let t0 = Instant::now();
    let (dirs, weights) = sphere_quadrature(nt, np);
    let pattern = mie_far_field_on(args.radius, bc, k, alpha, &dirs, &weights, (nt, np))
        .map_err(|e| anyhow!(e.to_string()))?;
    emitter.write(&args.out, &pattern.to_csv())?;
    println!("oracle pattern |A| L2 = {:.6e}", pattern.l2_norm());
    emitter.finish(
        "oracle",
        config_snapshot,
        serde_json::json!({"total": t0.elapsed().as_secs_f64()}),
        None,
    )?;
    Ok(0)
}

fn run_verify(cli: &Cli, args: &VerifyArgs) -> Result<i32> {
    let profile = match (&args.config, args.suite.as_str()) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<VerifyProfile>(&text).context("malformed profile config")?
        }
        (None, "fast") => VerifyProfile::fast(),
        (None, "slow") => VerifyProfile::slow(),
        (None, other) => bail!("unknown suite {other:?}; use fast or slow"),
    };
    let mut emitter = Emitter::new(&cli.output_dir, cli.dry_run)?;
    let profile_snapshot = serde_json::to_value(&profile)?;
    if cli.dry_run {
        let names = helmscat::verify::suite_identity_names();
        println!(
            "dry-run: would run {} ({} identities): {:?}",
            profile.name,
            names.len(),
            names
        );
        emitter.write(&args.out, "")?;
        emitter.finish(
            "verify",
            serde_json::json!({"suite": profile.name, "identity": args.identity}),
            serde_json::json!({}),
            Some(profile_snapshot),
        )?;
        return Ok(0);
    }
    let t0 = Instant::now();
    let reports = match &args.identity {
        Some(name) => vec![run_identity(name, &profile).map_err(|e| anyhow!(e.to_string()))?],
        None => run_suite(&profile),
    };
    print!("{}", render_table(&reports));
    emitter.write(&args.out, &serde_json::to_string_pretty(&reports)?)?;
    let failures = reports.iter().filter(|r| !r.pass).count();
    println!(
        "{}/{} identities passed in {:.1}s",
        reports.len() - failures,
        reports.len(),
        t0.elapsed().as_secs_f64()
    );
    emitter.finish(
        "verify",
        serde_json::json!({"suite": profile.name, "identity": args.identity}),
        serde_json::json!({"total": t0.elapsed().as_secs_f64()}),
        Some(profile_snapshot),
    )?;
    Ok(if failures == 0 { 0 } else { 1 })
}

fn run_invert(cli: &Cli, args: &InvertArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.data)
        .with_context(|| format!("cannot read {}", args.data.display()))?;
    let data = FarFieldPattern::from_csv(&text).map_err(|e| anyhow!(e.to_string()))?;
    let alpha = parse_triple(&args.alpha)?.normalized();
    let (ft, fp) = parse_grid(&args.forward_grid)?;
    let auto_bc = args.bc == "auto";
    let bc = if auto_bc {
        BoundaryCondition::Dirichlet
    } else {
        parse_bc(&args.bc, 0.0, 0.0)?
    };
    let mut cfg = InversionConfig::new(args.k, alpha, args.degree);
    cfg.lambda = args.lambda;
    cfg.max_iterations = args.max_iter;
    cfg.forward_grid = [ft, fp];
    cfg.bc = bc;
    let mut emitter = Emitter::new(&cli.output_dir, cli.dry_run)?;
    let config_snapshot = serde_json::json!({
        "data": args.data.display().to_string(),
        "inversion": serde_json::to_value(&cfg)?,
        "bc": args.bc,
        "initial_radius": args.initial_radius,
    });
    if cli.dry_run {
        emitter.write(&args.out, "")?;
        emitter.write("recovered_surface.json", "")?;
        emitter.finish("invert", config_snapshot, serde_json::json!({}), None)?;
        return Ok(0);
    }
    let t0 = Instant::now();
    let initial = SurfaceSpec::make_sphere(args.initial_radius, Vec3::ZERO)
        .map_err(|e| anyhow!(e.to_string()))?;
    let result = reconstruct_shape(&cfg, &data, &initial).map_err(|e| anyhow!(e.to_string()))?;
    let classification = if auto_bc {
        let k = Wavenumber::new(args.k).map_err(|e| anyhow!(e.to_string()))?;
        let rep = classify_boundary_condition(&result.spec, &data, k, alpha, [ft, fp])
            .map_err(|e| anyhow!(e.to_string()))?;
        Some(serde_json::json!({
            "selected": rep.selected.label(),
            "fitted_h": [rep.fitted_h.re, rep.fitted_h.im],
            "misfits": rep.misfits,
            "noise_floor": rep.noise_floor,
            "gap": rep.gap,
            "ambiguous": rep.ambiguous,
        }))
    } else {
        None
    };
    let body = serde_json::json!({
        "converged": result.converged,
        "iterations": result.iterations,
        "final_misfit": result.final_misfit,
        "misfit_trace": result.misfit_trace,
        "surface": serde_json::to_value(&result.spec)?,
        "classification": classification,
    });
    emitter.write(&args.out, &serde_json::to_string_pretty(&body)?)?;
    emitter.write(
        "recovered_surface.json",
        &serde_json::to_string_pretty(&result.spec)?,
    )?;
    println!(
        "inversion: converged={} in {} iterations, misfit {:.3e}",
        result.converged, result.iterations, result.final_misfit
    );
    emitter.finish(
        "invert",
        config_snapshot,
        serde_json::json!({"total": t0.elapsed().as_secs_f64()}),
        None,
    )?;
    Ok(if result.converged { 0 } else { 1 })
}

#[derive(serde::Deserialize, Serialize)]
struct SweepConfig {
    k_values: Vec<f64>,
    grids: Vec<[usize; 2]>,
    surfaces: Vec<SurfaceSpec>,
    bc: helmscat::solver::BcConfig,
    alpha: [f64; 3],
}

fn run_sweep(cli: &Cli, args: &SweepArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))?;
    let cfg: SweepConfig = serde_json::from_str(&text).context("malformed sweep config")?;
    if cfg.k_values.is_empty() || cfg.grids.is_empty() || cfg.surfaces.is_empty() {
        bail!("sweep axes must be nonempty (k_values, grids, surfaces)");
    }
    let cells = cfg.k_values.len() * cfg.grids.len() * cfg.surfaces.len();
    let cost: f64 = cfg
        .k_values
        .iter()
        .flat_map(|_| cfg.grids.iter())
        .flat_map(|g| cfg.surfaces.iter().map(move |_| ((g[0] * g[1]) as f64).powi(3)))
        .sum();
    if cost > args.budget {
        bail!(
            "sweep refused: estimated cost {cost:.3e} node-cubed units over {cells} cells exceeds budget {:.3e}",
            args.budget
        );
    }
    let bc = parse_bc(&cfg.bc.kind, cfg.bc.h_re, cfg.bc.h_im)?;
    let alpha = Vec3::new(cfg.alpha[0], cfg.alpha[1], cfg.alpha[2]).normalized();
    let mut emitter = Emitter::new(&cli.output_dir, cli.dry_run)?;
    let config_snapshot = serde_json::to_value(&cfg)?;
    if cli.dry_run {
        println!("dry-run: {cells} sweep cells, estimated cost {cost:.3e}");
        emitter.write(&args.out, "")?;
        emitter.finish("sweep", config_snapshot, serde_json::json!({}), None)?;
        return Ok(0);
    }
    let t0 = Instant::now();
    let mut csv = String::from(
        "k,n_theta,n_phi,surface,nodes,condition_estimate,oracle_rel_l2_error\n",
    );
    for spec in &cfg.surfaces {
        spec.validate().map_err(|e| anyhow!(e.to_string()))?;
        for &kv in &cfg.k_values {
            for grid in &cfg.grids {
                let k = Wavenumber::new(kv).map_err(|e| anyhow!(e.to_string()))?;
                let surface = Arc::new(
                    discretize(spec, grid[0], grid[1]).map_err(|e| anyhow!(e.to_string()))?,
                );
                let opts = SolveOptions::default();
                let fac = assemble(surface, bc, k, &NystromParams::default(), &opts)
                    .and_then(|op| op.factor(&opts))
                    .map_err(|e| anyhow!(e.to_string()))?;
                let sol = fac
                    .solve(Incidence::plane(alpha).map_err(|e| anyhow!(e.to_string()))?)
                    .map_err(|e| anyhow!(e.to_string()))?;
                let pattern = far_field(&sol, 16, 32);
                let oracle_err = match spec.as_sphere() {
                    Some(radius) if spec.center() == Vec3::ZERO => {
                        let (dirs, weights) = sphere_quadrature(16, 32);
                        let mie =
                            mie_far_field_on(radius, bc, k, alpha, &dirs, &weights, (16, 32))
                                .map_err(|e| anyhow!(e.to_string()))?;
                        fmt17(pattern.relative_l2_distance(&mie))
                    }
                    _ => String::new(),
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt17(kv),
                    grid[0],
                    grid[1],
                    spec.label,
                    grid[0] * grid[1],
                    fmt17(fac.condition_estimate()),
                    oracle_err
                ));
            }
        }
    }
    emitter.write(&args.out, &csv)?;
    println!("sweep: {cells} cells written");
    emitter.finish(
        "sweep",
        config_snapshot,
        serde_json::json!({"total": t0.elapsed().as_secs_f64()}),
        None,
    )?;
    Ok(0)
}

fn run_mesh_dump(cli: &Cli, args: &MeshDumpArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.surface)
        .with_context(|| format!("cannot read {}", args.surface.display()))?;
    let spec: SurfaceSpec = serde_json::from_str(&text).context("malformed surface spec")?;
    spec.validate().map_err(|e| anyhow!(e.to_string()))?;
    let (nt, np) = parse_grid(&args.grid)?;
    let mut emitter = Emitter::new(&cli.output_dir, cli.dry_run)?;
    let config_snapshot = serde_json::json!({
        "surface": serde_json::to_value(&spec)?, "grid": [nt, np],
    });
    if cli.dry_run {
        emitter.write(&args.out, "")?;
        emitter.finish("mesh-dump", config_snapshot, serde_json::json!({}), None)?;
        return Ok(0);
    }
    let q = discretize(&spec, nt, np).map_err(|e| anyhow!(e.to_string()))?;
    let mut csv = String::from("x,y,z,nx,ny,nz,weight\n");
    for ((node, normal), w) in q.nodes.iter().zip(&q.normals).zip(&q.weights) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt17(node.x),
            fmt17(node.y),
            fmt17(node.z),
            fmt17(normal.x),
            fmt17(normal.y),
            fmt17(normal.z),
            fmt17(*w)
        ));
    }
    emitter.write(&args.out, &csv)?;
    println!("mesh: {} nodes, area {:.12e}", q.len(), q.area());
    emitter.finish("mesh-dump", config_snapshot, serde_json::json!({}), None)?;
    Ok(0)
}

use std::sync::Arc;

fn main() -> ExitCode {
    // thread-count override for the compute pool
    if let Ok(threads) = std::env::var("HELMSCAT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Forward(args) => run_forward(&cli, args),
        Command::Greens(args) => run_greens(&cli, args),
        Command::Oracle(args) => run_oracle(&cli, args),
        Command::Verify(args) => run_verify(&cli, args),
        Command::Invert(args) => run_invert(&cli, args),
        Command::Sweep(args) => run_sweep(&cli, args),
        Command::MeshDump(args) => run_mesh_dump(&cli, args),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
