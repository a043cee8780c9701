//! Experiment runner: reproduces the built-in convergence studies and
//! geometric-regularity diagnostics from the command line or a config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rotvem::experiment::{run_experiment, ExperimentConfig, StabChoice};
use rotvem::problems::{ExampleId, ProblemParams};
use rotvem::regularity::{tau_theta, varrho};

#[derive(Parser)]
#[command(
    name = "rotvem",
    about = "Edge-based virtual element solver for the 2D time-harmonic Maxwell equation in piecewise-constant media on cut polygonal meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from flags or a config file.
    Run(RunArgs),
    /// Print the config that a set of flags expands to.
    Config(RunArgs),
    /// Evaluate the shape-regularity functions τ(θ) and ϱ(κ₀, κ₁).
    Tau {
        #[arg(long, default_value_t = 0.9)]
        theta: f64,
        #[arg(long, default_value_t = -1.0)]
        kappa0: f64,
        #[arg(long, default_value_t = 60.0)]
        kappa1: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in example: circle | line_singular | double_circle | layers.
    #[arg(long)]
    example: Option<String>,
    /// Comma-separated refinement levels k (h = 2^-k).
    #[arg(long)]
    levels: Option<String>,
    /// Reference level for the self-convergence examples.
    #[arg(long)]
    ref_level: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stabilization weight: local-hk | global-h.
    #[arg(long)]
    stab: Option<String>,
    /// Volume quadrature degree.
    #[arg(long)]
    quad_order: Option<usize>,
    /// Regularity-audit solution order θ ∈ (1/2, 1].
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa0: Option<f64>,
    #[arg(long)]
    kappa1: Option<f64>,
    /// Exponent s of the singular-line solution.
    #[arg(long, allow_hyphen_values = true)]
    s_exponent: Option<f64>,
    /// Angular frequency ω.
    #[arg(long)]
    omega: Option<f64>,
    /// Permittivity ε (both regions; also the source width).
    #[arg(long)]
    eps: Option<f64>,
    /// Thin-layer count (2 or 5).
    #[arg(long)]
    layers: Option<usize>,
    /// Also run the Nédélec edge-element baseline.
    #[arg(long, default_value_t = false)]
    fem: bool,
    /// Audit the meshes and skip the solves.
    #[arg(long, default_value_t = false)]
    audit_only: bool,
    /// Write per-level VTK fields.
    #[arg(long, default_value_t = false)]
    fields: bool,
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut config = if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        ExperimentConfig::parse(&text).map_err(|e| e.to_string())?
    } else {
        let name = args
            .example
            .as_deref()
            .ok_or("either --config or --example is required")?;
        let example = ExampleId::parse(name).ok_or_else(|| format!("unknown example '{name}'"))?;
        let mut c = ExperimentConfig::new(example, vec![3, 4, 5], PathBuf::from("results"));
        c.params = ProblemParams::defaults(example);
        c.out_dir = PathBuf::from("results").join(example.name());
        c
    };
    if let Some(name) = &args.example {
        if args.config.is_some() {
            let example =
                ExampleId::parse(name).ok_or_else(|| format!("unknown example '{name}'"))?;
            if example != config.example {
                return Err("--example conflicts with the config file".into());
            }
        }
    }
    if let Some(levels) = &args.levels {
        config.levels = levels
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
    }
    if let Some(r) = args.ref_level {
        config.ref_level = Some(r);
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(stab) = &args.stab {
        config.stab = StabChoice::parse(stab).ok_or_else(|| format!("unknown stab '{stab}'"))?;
    }
    if let Some(q) = args.quad_order {
        config.quad_order = q;
    }
    if let Some(v) = args.theta {
        config.audit.theta = v;
    }
    if let Some(v) = args.kappa0 {
        config.audit.kappa0 = v;
    }
    if let Some(v) = args.kappa1 {
        config.audit.kappa1 = v;
    }
    if let Some(v) = args.s_exponent {
        config.params.s_exponent = v;
    }
    if let Some(v) = args.omega {
        config.params.omega = v;
    }
    if let Some(v) = args.eps {
        config.params.eps_perm = [v, v];
    }
    if let Some(v) = args.layers {
        config.params.n_layers = v;
    }
    config.run_fem |= args.fem;
    config.audit_only |= args.audit_only;
    config.write_fields |= args.fields;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Tau {
            theta,
            kappa0,
            kappa1,
        } => {
            println!("tau({theta}) = {:.12e}", tau_theta(theta, kappa0, kappa1));
            println!("varrho({kappa0}, {kappa1}) = {:.12e}", varrho(kappa0, kappa1));
            ExitCode::SUCCESS
        }
        Command::Config(args) => match build_config(&args) {
            Ok(config) => {
                print!("{}", config.serialize());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Run(args) => {
            let config = match build_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            eprintln!(
                "running {} at levels {:?} (out: {})",
                config.example.name(),
                config.levels,
                config.out_dir.display()
            );
            match run_experiment(&config) {
                Ok(outcome) => {
                    println!("h,l2_err,l2_order,rot_err,rot_order");
                    for row in &outcome.table.rows {
                        println!(
                            "{:.6e},{:.6e},{},{:.6e},{}",
                            row.h,
                            row.l2_err,
                            row.l2_order
                                .map(|o| format!("{o:.4}"))
                                .unwrap_or_else(|| "--".into()),
                            row.rot_err,
                            row.rot_order
                                .map(|o| format!("{o:.4}"))
                                .unwrap_or_else(|| "--".into()),
                        );
                    }
                    for level in &outcome.levels {
                        if let Err(e) = &level.status {
                            eprintln!("level {} failed: {e}", level.level);
                        }
                        if let Some(d) = level.fem_vs_vem {
                            eprintln!(
                                "level {}: VEM vs edge-element relative field difference {:.3e}",
                                level.level, d
                            );
                        }
                    }
                    if outcome.all_ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
