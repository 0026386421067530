use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracefem::assembly::{StabilizationConfig, Variant};
use tracefem::experiments::{doubling_levels, run, Experiment, ExperimentConfig};
use tracefem::{Error, Result};

/// Stabilized trace finite element experiments on curves in a 2D background mesh.
#[derive(Debug, Parser)]
#[command(name = "tracefem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Laplace-Beltrami convergence and conditioning on a circle.
    Lb(Options),
    /// Stabilized mass matrix problem.
    Mass(Options),
    /// Discrete mean curvature vector with linear elements.
    Curvature(Options),
    /// Condition numbers over mesh shifts for several stabilizations.
    CondSweep(Options),
}

#[derive(Debug, Args)]
struct Options {
    /// Polynomial degree (1, 2 or 3).
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long)]
    gamma: Option<f64>,
    /// proposed, face, normalgrad, fullgrad or none.
    #[arg(long)]
    stab: Option<String>,
    /// Face constants c_{F,1..p}, comma separated.
    #[arg(long, value_delimiter = ',')]
    cf: Option<Vec<f64>>,
    /// Surface constants c_{Gamma,1..p}, comma separated.
    #[arg(long, value_delimiter = ',')]
    cgamma: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    ct: Option<f64>,
    /// Codimension in the face scaling h^{1-cd}.
    #[arg(long, default_value_t = 1)]
    cd: u32,
    /// circle, circle:cx,cy,r, ellipse, ellipse:a2,b2,level or line:a,b,c.
    #[arg(long)]
    geom: Option<String>,
    /// Refinement ladder NMIN:NMAX (doubling).
    #[arg(long)]
    levels: Option<String>,
    /// Mesh shifts in units of h, comma separated.
    #[arg(long, value_delimiter = ',')]
    shifts: Option<Vec<f64>>,
    /// Gauss points per curve piece.
    #[arg(long)]
    gauss: Option<usize>,
    /// Skip condition numbers.
    #[arg(long)]
    no_cond: bool,
    /// CSV output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_levels(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidInput(format!("levels must look like NMIN:NMAX, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    doubling_levels(a, b)
}

fn build_config(experiment: Experiment, o: &Options) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(experiment, o.p);
    if let Some(stab) = &o.stab {
        let variant: Variant = stab.parse()?;
        cfg.stabilization = match variant {
            Variant::Proposed => cfg.stabilization.clone(),
            Variant::PureFace => StabilizationConfig::pure_face(0.1),
            Variant::NormalGradient => StabilizationConfig::normal_gradient(0.1, 1.0),
            Variant::FullGradient => StabilizationConfig::full_gradient(0.1),
            Variant::None => StabilizationConfig::none(),
        };
        if variant == Variant::Proposed && cfg.stabilization.variant != Variant::Proposed {
            cfg.stabilization = StabilizationConfig::laplace_beltrami(o.p);
        }
    }
    let s = &mut cfg.stabilization;
    if let Some(g) = o.gamma {
        s.gamma = g;
    }
    if let Some(cf) = &o.cf {
        s.c_f = cf.clone();
    }
    if let Some(cg) = &o.cgamma {
        s.c_gamma = cg.clone();
    }
    if let Some(a) = o.alpha {
        s.alpha = a;
    }
    if let Some(ct) = o.ct {
        s.c_t = ct;
    }
    s.cd = o.cd;
    if let Some(g) = &o.geom {
        cfg.geometry = g.clone();
    }
    if let Some(l) = &o.levels {
        cfg.levels = parse_levels(l)?;
    }
    if let Some(sh) = &o.shifts {
        cfg.shifts = sh.clone();
    }
    if let Some(g) = o.gauss {
        cfg.gauss = g;
    }
    cfg.condition_numbers = !o.no_cond;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    faer::set_global_parallelism(faer::Par::Seq);

    let (experiment, options) = match &cli.command {
        Command::Lb(o) => (Experiment::Lb, o),
        Command::Mass(o) => (Experiment::Mass, o),
        Command::Curvature(o) => (Experiment::Curvature, o),
        Command::CondSweep(o) => (Experiment::CondSweep, o),
    };
    let cfg = match build_config(experiment, options) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let output = match run(&cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let csv = output.to_csv();
    match &options.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{csv}"),
    }
    eprint!("{}", output.summary());
    for f in &output.failures {
        eprintln!("failed: {f}");
    }
    if output.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
