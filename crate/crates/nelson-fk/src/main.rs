use clap::{Args, Parser, Subcommand};
use nelson_fk::cli::{self, Experiment, RunConfig, Suite};
use nelson_fk::Error;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "nelson-fk", version, about = "Feynman-Kac Monte Carlo for the renormalized Nelson model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-path complex action and its decomposition.
    Action(Common),
    /// Ground-state energy from the semigroup decay.
    Energy(Common),
    /// Fiber ground-state energies and effective mass.
    Fiber(Common),
    /// Ground-state energy in the non-Fock representation.
    Nonfock(Common),
    /// Analytic bounds, Pekar values and pair-lemma checks.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Print the kernel catalog as CSV and exit.
        #[arg(long)]
        list_kernels: bool,
    },
    /// Run verification suites.
    Verify {
        #[command(flatten)]
        common: Common,
        /// fock-algebra | identities | moments | convergence | bounds; repeatable or comma-separated.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Positive integer or "inf".
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// sharp | taper[:flat]
    #[arg(long)]
    chi: Option<String>,
    /// one | ir-cut:LAMBDA
    #[arg(long)]
    eta: Option<String>,
    /// zero | harmonic[:w[:R]] | soft-coulomb[:a[:s]]
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    /// a:b:n, t1,t2,... or t.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_radial: Option<usize>,
    /// 6 | 14 | 26 | 50 | TxP
    #[arg(long)]
    grid_angular: Option<String>,
    /// Fiber momenta along the configured direction.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    xi: Option<Vec<f64>>,
    /// Cutoffs of an action convergence sweep.
    #[arg(long, value_delimiter = ',')]
    kappas: Option<Vec<u32>>,
    /// Also fit the untransformed energy (nonfock).
    #[arg(long)]
    compare: bool,
}

impl Common {
    fn config(&self) -> nelson_fk::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let m = &mut c.model;
        set(&mut m.eps, self.eps);
        set(&mut m.mu, self.mu);
        set(&mut m.n, self.n);
        set(&mut m.kappa, self.kappa.clone());
        set(&mut m.lambda, self.lambda);
        set(&mut m.chi, self.chi.clone());
        set(&mut m.eta, self.eta.clone());
        set(&mut m.potential, self.potential.clone());
        set(&mut c.mc.dt, self.dt);
        set(&mut c.mc.t, self.t.clone());
        set(&mut c.mc.paths, self.paths);
        set(&mut c.mc.seed, self.seed);
        set(&mut c.grid.radial, self.grid_radial);
        set(&mut c.grid.angular, self.grid_angular.clone());
        set(&mut c.experiment.xi, self.xi.clone());
        set(&mut c.experiment.kappas, self.kappas.clone());
        c.experiment.compare |= self.compare;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let started = Instant::now();
    let (experiment, common, suites) = match args.command {
        Command::Action(c) => (Experiment::Action, c, vec![]),
        Command::Energy(c) => (Experiment::Energy, c, vec![]),
        Command::Fiber(c) => (Experiment::Fiber, c, vec![]),
        Command::Nonfock(c) => (Experiment::Nonfock, c, vec![]),
        Command::Bounds { common, list_kernels } => {
            if list_kernels {
                return match cli::kernel_catalog_csv() {
                    Ok(b) => {
                        let _ = std::io::stdout().write_all(&b);
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        exit_for(&e)
                    }
                };
            }
            (Experiment::Bounds, common, vec![])
        }
        Command::Verify { common, suite } => {
            let parsed: nelson_fk::Result<Vec<Suite>> =
                suite.iter().filter(|s| !s.trim().is_empty()).map(|s| s.parse()).collect();
            match parsed {
                Ok(s) => (Experiment::Verify, common, s),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
    };
    let result = common.config().and_then(|cfg| {
        let out = cli::run(experiment, &cfg, &suites)?;
        if let Some(dir) = &common.out {
            cli::persist(dir, &cfg, &out, started)?;
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out.summary).unwrap_or_default();
            let _ = writeln!(std::io::stdout(), "{text}");
            if out.failed {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
