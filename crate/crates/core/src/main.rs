use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rotshock::cli::{self, Overrides};

#[derive(Parser)]
#[command(name = "rotshock", version, about = "Transonic shocks in a rotating nozzle flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory (default: output.dir of the config, relative to it)
    #[arg(long)]
    out: Option<PathBuf>,
    /// also write the elliptic solve data
    #[arg(long)]
    dump_elliptic: bool,
    /// override solver.nx and solver.ny
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), grid: self.grid.as_ref().map(|g| (g[0], g[1])), dump_elliptic: self.dump_elliptic }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the normal shock background and check its jump conditions
    Background(Common),
    /// Linear approximation and shock position
    Initial(Common),
    /// Nonlinear free-boundary iteration
    Solve(Common),
    /// Recheck the residuals of a stored solve
    Verify(Common),
    /// Solve for each value of one config key
    Sweep {
        #[command(flatten)]
        common: Common,
        /// dotted key, e.g. nozzle.sigma
        #[arg(long)]
        key: String,
        /// JSON values, one per run
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
    },
}

fn run(cmd: Command) -> rotshock::Result<()> {
    match cmd {
        Command::Background(c) => {
            let (cfg, m) = cli::prepare(&c.config, &c.overrides())?;
            let r = cli::run_background(&cfg, &m)?;
            println!("background: {} nodes, max R-H residual {:e}", r.nodes, r.max_rh_residual);
        }
        Command::Initial(c) => {
            let ov = c.overrides();
            let (cfg, m) = cli::prepare(&c.config, &ov)?;
            let r = cli::run_initial(&cfg, &m, &ov)?;
            println!("initial: psi_bar {:.12} |J1-J2| {:e}", r.psi_bar, (r.j1_at_psi - r.j2).abs());
        }
        Command::Solve(c) => {
            let ov = c.overrides();
            let (cfg, m) = cli::prepare(&c.config, &ov)?;
            let r = cli::run_solve(&cfg, &m, &ov)?;
            println!("solve: {} iterations, psi_bar {:.12}, psi_sharp {:e}", r.iterations, r.psi_bar, r.psi_sharp);
            for (name, v) in cli::checked_residuals(&r.residuals) {
                println!("  {name} {v:e}");
            }
        }
        Command::Verify(c) => {
            let (cfg, m) = cli::prepare(&c.config, &c.overrides())?;
            let r = cli::run_verify(&cfg, &m)?;
            for (name, v) in cli::checked_residuals(&r) {
                println!("{name} {v:e} ok");
            }
        }
        Command::Sweep { common, key, values } => {
            let ov = common.overrides();
            let (cfg, _) = cli::prepare(&common.config, &ov)?;
            let base = common.config.parent().map(PathBuf::from).unwrap_or_default();
            let rows = cli::run_sweep(&cfg, &base, &key, &values, &ov)?;
            for r in rows {
                println!("{key}={} status {} {}", r.value, r.status, r.message);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
