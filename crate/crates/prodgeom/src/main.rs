//! Command-line front end: build hypersurface families, run the verification
//! suites, solve the sinh-Gordon equation, and sweep parallel distances.
//!
//! Exit codes: 0 all checks pass, 1 check failure, 2 usage error,
//! 3 solver nonconvergence, 4 focal point.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prodgeom::immersions::{
    family_hatmab, family_mab, family_mt, family_prop61, CurveOnSphere, Immersion,
};
use prodgeom::report::{CheckReport, ReportEnvelope};
use prodgeom::sinhgordon::{
    coordinate_solution_check, intrinsic_checks, solve_sinh_gordon, soliton_profile, Domain,
    GridSolution,
};
use prodgeom::verify::{
    classification_probe, codazzi_residual, gauss_crosscheck, lemma21_residuals,
    tsinghua_identity,
};
use prodgeom::{parallel, GeomError};

#[derive(Parser)]
#[command(
    name = "prodgeom",
    version,
    about = "Numerical differential geometry of hypersurfaces in S2 x S2"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the identity-verification suite on a hypersurface family.
    Verify(VerifyArgs),
    /// sinh-Gordon grid solver and integrability checks.
    Sg {
        #[command(subcommand)]
        cmd: SgCmd,
    },
    /// Parallel-hypersurface sweeps and the distance-pi/(2 sqrt2) check.
    Parallel {
        #[command(subcommand)]
        cmd: ParallelCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Mt,
    Mab,
    HatMab,
    Prop61,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Mt => "mt",
            Family::Mab => "mab",
            Family::HatMab => "hat-mab",
            Family::Prop61 => "prop61",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct VerifyArgs {
    /// Hypersurface family to verify.
    #[arg(long, value_enum)]
    family: Family,
    /// Parameter t of the isoparametric family (mt only).
    #[arg(long, default_value_t = 0.3)]
    t: f64,
    /// Constant product angle C (prop61 only).
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    /// Number of seeded samples per check.
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Finite-difference step for jets and field derivatives.
    #[arg(long, default_value_t = 1e-4)]
    fd_step: f64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum SgCmd {
    /// Solve the Dirichlet problem on an n x n grid and archive the result.
    Solve(SgSolveArgs),
    /// Run the intrinsic integrability checks on an archived grid.
    Check(SgCheckArgs),
}

#[derive(Args)]
struct SgSolveArgs {
    /// Grid size (n x n nodes, n >= 16).
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Boundary data: "zero", "soliton", or a path prefix of an archived
    /// grid (PREFIX.csv / PREFIX.json) to interpolate boundary values from.
    #[arg(long, default_value = "zero")]
    bc: String,
    /// Side length of the square domain.
    #[arg(long, default_value_t = 1.0)]
    domain: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Archive path prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long, default_value = "grid")]
    out: PathBuf,
}

#[derive(Args)]
struct SgCheckArgs {
    /// Archive path prefix (reads PREFIX.csv and PREFIX.json).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum ParallelCmd {
    /// Sweep the normal distance and emit CSV rows
    /// (r, h_mean, h_max, c_max, det_b_min).
    Sweep(SweepArgs),
    /// Check that the distance-pi/(2 sqrt2) parallel of a constant-curvature
    /// family is minimal with C = 0.
    Check46(Check46Args),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 0.3)]
    t: f64,
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    r_min: f64,
    #[arg(long, default_value_t = 1.2)]
    r_max: f64,
    #[arg(long, default_value_t = 25)]
    steps: usize,
    /// Samples per distance.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Check46Args {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 0.3)]
    t: f64,
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn build_family(family: Family, t: f64, c: f64) -> Result<Immersion, GeomError> {
    match family {
        Family::Mt => family_mt(t),
        Family::Mab => Ok(family_mab()),
        Family::HatMab => Ok(family_hatmab()),
        Family::Prop61 => {
            family_prop61(c, CurveOnSphere::equator(), CurveOnSphere::equator())
        }
    }
}

fn exit_code_for(e: &GeomError) -> ExitCode {
    match e {
        GeomError::Usage(_) => ExitCode::from(2),
        GeomError::NonConvergence { .. } => ExitCode::from(3),
        GeomError::FocalPoint { .. } => ExitCode::from(4),
        _ => ExitCode::from(1),
    }
}

fn emit(env: &ReportEnvelope, out: Option<&PathBuf>, format: Format) -> Result<(), GeomError> {
    let text = match format {
        Format::Json => env.to_json()?,
        Format::Csv => env.to_csv(),
    };
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, GeomError> {
    if args.n < 1 {
        return Err(GeomError::Usage("--n must be at least 1".into()));
    }
    if args.fd_step <= 1e-8 || args.fd_step >= 1e-2 {
        return Err(GeomError::Usage(format!(
            "--fd-step must lie in (1e-8, 1e-2), got {}",
            args.fd_step
        )));
    }
    let im = build_family(args.family, args.t, args.c)?.with_fd_step(args.fd_step);
    let step = args.fd_step;
    let mut checks = Vec::new();
    checks.push(gauss_crosscheck(&im, args.n, args.seed, step, 1e-3)?);
    checks.push(codazzi_residual(&im, args.n, args.seed, step, 1e-3)?);
    checks.extend(lemma21_residuals(&im, args.n, args.seed, step, 1e-3)?);
    let (eq, rhs, dev) = tsinghua_identity(&im, args.n, args.seed, 1e-5)?;
    checks.push(eq);
    checks.push(rhs);
    checks.push(dev);
    // curvature statistics are informational: constancy is a property of
    // specific families, not an identity
    let probe = classification_probe(&im, args.n, 8, args.seed)?;
    checks.push(CheckReport::informational(
        "kappa_spread",
        probe.kappa_max - probe.kappa_min,
        probe.samples,
    ));
    checks.push(CheckReport::informational(
        "c_abs_max",
        probe.c_max.abs().max(probe.c_min.abs()),
        probe.samples,
    ));
    checks.push(CheckReport::informational(
        "h_spread",
        probe.h_max - probe.h_min,
        probe.samples,
    ));
    checks.push(CheckReport::informational(
        "b1b4_b2sq_half_dev",
        probe.b1b4_b2sq_half_dev,
        probe.samples,
    ));

    let mut config = BTreeMap::new();
    config.insert("command".into(), "verify".into());
    config.insert("family".into(), args.family.name().into());
    match args.family {
        Family::Mt => {
            config.insert("t".into(), args.t.to_string());
        }
        Family::Prop61 => {
            config.insert("c".into(), args.c.to_string());
        }
        _ => {}
    }
    config.insert("n".into(), args.n.to_string());
    config.insert("seed".into(), args.seed.to_string());
    config.insert("fd_step".into(), args.fd_step.to_string());

    let env = ReportEnvelope::new(config, checks);
    emit(&env, args.out.as_ref(), args.format)?;
    Ok(if env.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_sg_solve(args: &SgSolveArgs) -> Result<ExitCode, GeomError> {
    let domain = Domain {
        u0: 0.0,
        v0: 0.0,
        lu: args.domain,
        lv: args.domain,
    };
    let boundary: Box<dyn Fn(f64, f64) -> f64> = match args.bc.as_str() {
        "zero" => Box::new(|_, _| 0.0),
        "soliton" => Box::new(|u, _| soliton_profile(0.5, u)),
        path => {
            let prefix = PathBuf::from(path);
            let source = GridSolution::read_archive(
                &prefix.with_extension("csv"),
                &prefix.with_extension("json"),
            )?;
            Box::new(move |u, v| source.h_interp(u, v).unwrap_or(0.0))
        }
    };
    let mut gs = solve_sinh_gordon(
        domain,
        args.grid,
        args.grid,
        boundary.as_ref(),
        None,
        args.max_iter,
        args.tol,
    )?;
    gs.boundary = args.bc.clone();
    let csv = args.out.with_extension("csv");
    let json = args.out.with_extension("json");
    gs.write_archive(&csv, &json)?;
    eprintln!(
        "solved {}x{} grid, residual {:.3e}; wrote {} and {}",
        gs.nu,
        gs.nv,
        gs.residual,
        csv.display(),
        json.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sg_check(args: &SgCheckArgs) -> Result<ExitCode, GeomError> {
    let gs = GridSolution::read_archive(
        &args.input.with_extension("csv"),
        &args.input.with_extension("json"),
    )?;
    let mut checks = intrinsic_checks(&gs, args.n, args.seed)?;
    let (alg, flat) = coordinate_solution_check(&gs, args.n, args.seed)?;
    checks.push(alg);
    checks.push(flat);
    let mut config = BTreeMap::new();
    config.insert("command".into(), "sg check".into());
    config.insert("input".into(), args.input.display().to_string());
    config.insert("grid".into(), format!("{}x{}", gs.nu, gs.nv));
    config.insert("n".into(), args.n.to_string());
    config.insert("seed".into(), args.seed.to_string());
    let env = ReportEnvelope::new(config, checks);
    emit(&env, args.out.as_ref(), args.format)?;
    if env.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        for c in env.checks.iter().filter(|c| !c.pass) {
            eprintln!(
                "check {} failed: residual {:.3e} > {:.1e}{}",
                c.name,
                c.max_residual,
                c.tolerance,
                c.metadata
                    .get("worst_node")
                    .map(|w| format!(" at node {w}"))
                    .unwrap_or_default()
            );
        }
        Ok(ExitCode::from(1))
    }
}

fn cmd_parallel_sweep(args: &SweepArgs) -> Result<ExitCode, GeomError> {
    if args.steps < 2 {
        return Err(GeomError::Usage("--steps must be at least 2".into()));
    }
    let im = build_family(args.family, args.t, args.c)?;
    let tol = prodgeom::frames::FrameTolerance::default();
    let mut rows = String::from("r,h_mean,h_max,c_max,det_b_min\n");
    for k in 0..args.steps {
        let r = args.r_min + (args.r_max - args.r_min) * k as f64 / (args.steps - 1) as f64;
        let par = parallel::parallel_immersion(&im, r);
        let samples = prodgeom::verify::sample_params(&par, args.n, args.seed, 0.1);
        let mut h_sum = 0.0;
        let mut h_max: f64 = 0.0;
        let mut c_max: f64 = 0.0;
        let mut det_min = f64::MAX;
        for s in &samples {
            let f0 = prodgeom::frames::build_frame(&im, *s, &tol)?;
            if let Some(b) = f0.b_entries() {
                let pp = parallel::ParallelParams {
                    r,
                    b1: b[0],
                    b2: b[1],
                    b4: b[3],
                };
                let det = parallel::det_b(&pp);
                if det.abs() <= parallel::FOCAL_EPS {
                    return Err(GeomError::FocalPoint { r, det });
                }
                det_min = det_min.min(det);
            }
            let f = prodgeom::frames::build_frame(&par, *s, &tol)?;
            let h = prodgeom::frames::mean_curvature(&f).abs();
            h_sum += h;
            h_max = h_max.max(h);
            c_max = c_max.max(f.c.abs());
        }
        rows.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r,
            h_sum / samples.len() as f64,
            h_max,
            c_max,
            det_min
        ));
    }
    match &args.out {
        Some(p) => std::fs::write(p, rows)?,
        None => print!("{rows}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_parallel_check46(args: &Check46Args) -> Result<ExitCode, GeomError> {
    let im = build_family(args.family, args.t, args.c)?;
    let report = parallel::theorem46_check(&im, args.n, args.seed)?;
    let mut config = BTreeMap::new();
    config.insert("command".into(), "parallel check46".into());
    config.insert("family".into(), args.family.name().into());
    config.insert("n".into(), args.n.to_string());
    config.insert("seed".into(), args.seed.to_string());
    let env = ReportEnvelope::new(config, vec![report]);
    emit(&env, args.out.as_ref(), args.format)?;
    Ok(if env.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PRODGEOM_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // ignore failure: the global pool can only be set once
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("PRODGEOM_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Sg { cmd: SgCmd::Solve(a) } => cmd_sg_solve(a),
        Cmd::Sg { cmd: SgCmd::Check(a) } => cmd_sg_check(a),
        Cmd::Parallel { cmd: ParallelCmd::Sweep(a) } => cmd_parallel_sweep(a),
        Cmd::Parallel { cmd: ParallelCmd::Check46(a) } => cmd_parallel_check46(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
