mod commands;
mod config;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use contactforge::Error;

use commands::{LoopKind, MapKind, PathKind, TargetKind};
use config::Settings;
use report::Outcome;

#[derive(Parser, Debug)]
#[command(name = "contactforge", version, about = "Numerical checks for prequantization spaces and positive contact loops", after_help = config::help())]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Configuration file of dotted `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sets a configuration key, overriding the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print a CSV table instead of the JSON report.
    #[arg(long, global = true)]
    csv: bool,
    /// Write the output to this file.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed of the sampling grid (grid.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance of the main check (tol).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Run sweeps on one thread (exec.mode = sequential).
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Conformal factor of a catalog map, closed-form and by finite differences.
    VerifyMap {
        #[arg(value_enum)]
        map: MapKind,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "N", default_value_t = 1)]
        big_n: u32,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
    },
    /// Positivity and closure of a catalog loop.
    VerifyLoop {
        #[arg(value_enum)]
        kind: LoopKind,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Coordinate index of the h loop (1-based, >= 2).
        #[arg(long, default_value_t = 2)]
        j: usize,
        /// Rotation parameter of the h loop.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
    },
    /// Positivity of the loop on S^3 built from the PU(2,1) element b.
    S3Loop {
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Comma-separated alphas; prints a threshold table.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<f64>,
    },
    /// Estimate of mu for the contracting homotopy of the main loop.
    Mu {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0.8)]
        lo: f64,
        #[arg(long, default_value_t = 1.05)]
        hi: f64,
    },
    /// The inequality behind the contraction of f_t.
    Fundamental {
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Decides whether B(R1) squeezes into B(R2) or C(R2).
    SqueezeVerdict {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "R2")]
        r2: f64,
        #[arg(long, value_enum, default_value_t = TargetKind::Ball)]
        target: TargetKind,
        #[arg(long = "R3")]
        r3: Option<f64>,
    },
    /// Iterated contraction from R1 down to R2.
    SqueezePlan {
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "R2")]
        r2: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// Squeezes sampled points of the cylinder into the ball.
    Pipeline {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Fixed shift along Re z_1; chosen automatically when absent.
        #[arg(long)]
        shift: Option<f64>,
    },
    /// Conley-Zehnder and Maslov indices of a linear path.
    Cz {
        #[arg(value_enum)]
        path: PathKind,
        /// Rotation rates, or the diagonal of the quadratic form.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 513)]
        samples: usize,
    },
    /// Contact homology of the prequantized ellipsoid.
    ChEllipsoid {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "N", default_value_t = 1)]
        big_n: u32,
        #[arg(long = "R")]
        r: f64,
    },
    /// Truncated action spectrum of the prequantized ellipsoid.
    Spectrum {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "N", default_value_t = 1)]
        big_n: u32,
        #[arg(long = "R")]
        r: f64,
    },
    /// Transform of the profile F_{a,b,c}.
    Profile {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Root data, invariant cone and orderability verdict for su(2,1).
    Olshanskii,
    /// Builds the distinguished map and checks the main loop.
    MainLoop {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyMap { .. } => "verify-map",
            Command::VerifyLoop { .. } => "verify-loop",
            Command::S3Loop { .. } => "s3-loop",
            Command::Mu { .. } => "mu",
            Command::Fundamental { .. } => "fundamental",
            Command::SqueezeVerdict { .. } => "squeeze-verdict",
            Command::SqueezePlan { .. } => "squeeze-plan",
            Command::Pipeline { .. } => "pipeline",
            Command::Cz { .. } => "cz",
            Command::ChEllipsoid { .. } => "ch-ellipsoid",
            Command::Spectrum { .. } => "spectrum",
            Command::Profile { .. } => "profile",
            Command::Olshanskii => "olshanskii",
            Command::MainLoop { .. } => "main-loop",
        }
    }
}

fn overrides(g: &Global) -> Result<BTreeMap<String, String>, String> {
    let mut m = BTreeMap::new();
    for s in &g.set {
        let (k, v) = config::parse_assignment(s)?;
        m.insert(k, v);
    }
    if let Some(s) = g.seed {
        m.insert("grid.seed".into(), s.to_string());
    }
    if let Some(t) = g.tol {
        m.insert("tol".into(), t.to_string());
    }
    if let Some(p) = &g.output {
        m.insert("output.path".into(), p.display().to_string());
    }
    if g.sequential {
        m.insert("exec.mode".into(), "sequential".into());
    }
    Ok(m)
}

fn run(cmd: &Command, cfg: &Settings) -> contactforge::Result<Outcome> {
    match *cmd {
        Command::VerifyMap { map, n, big_n, hbar } => commands::verify_map(cfg, map, n, big_n, hbar),
        Command::VerifyLoop { kind, n, j, s, margin } => commands::verify_loop(cfg, kind, n, j, s, margin),
        Command::S3Loop { alpha, ref sweep } => commands::s3_loop(cfg, alpha, sweep),
        Command::Mu { n, lo, hi } => commands::mu(cfg, n, lo, hi),
        Command::Fundamental { n } => commands::fundamental(cfg, n),
        Command::SqueezeVerdict { n, r1, r2, target, r3 } => commands::squeeze_verdict(n, r1, r2, target, r3),
        Command::SqueezePlan { r1, r2, gamma } => commands::squeeze_plan(r1, r2, gamma),
        Command::Pipeline { n, samples, shift } => commands::pipeline(cfg, n, samples, shift),
        Command::Cz { path, ref values, samples } => commands::cz(path, values, samples),
        Command::ChEllipsoid { n, big_n, r } => commands::ch_ellipsoid_cmd(n, big_n, r),
        Command::Spectrum { n, big_n, r } => commands::spectrum(cfg, n, big_n, r),
        Command::Profile { a, b, c, samples } => commands::profile(a, b, c, samples),
        Command::Olshanskii => commands::olshanskii(cfg),
        Command::MainLoop { n, samples } => commands::main_loop(cfg, n, samples),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Resonant(_) | Error::Admissibility(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match overrides(&cli.global).and_then(|o| config::load(cli.global.config.as_deref(), o)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let outcome = match run(&cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let text = if cli.global.csv {
        outcome.csv()
    } else {
        let doc = outcome.document(cli.command.name(), &cfg.hash());
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    };
    match &cfg.output {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("error: cannot write {}: {e}", p.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    eprintln!("{}: {} in {:.1} ms", cli.command.name(), if outcome.pass() { "pass" } else { "fail" }, start.elapsed().as_secs_f64() * 1e3);
    if outcome.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
