use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand, ValueEnum};

use lie_minmax::cli::{run, RunOutcome};
use lie_minmax::config::{load_config, preset, Guess, RunConfig, PRESET_NAMES};
use lie_minmax::spacecraft::GuessKind;

#[derive(Parser)]
#[command(name = "lie-minmax", version, about = "Min-max optimal attitude control on SO(2)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a preset or a JSON configuration file.
    Solve {
        /// Preset name (S7minus, S3, S16, S17, UW4) or path to a config file.
        target: Option<String>,
        /// Output directory; overrides `output_path`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solve every preset concurrently.
        #[arg(long)]
        all_presets: bool,
        /// Override the initial guess generator.
        #[arg(long, value_enum)]
        guess: Option<GuessArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GuessArg {
    Zero,
    Drift,
    Geodesic,
}

impl From<GuessArg> for GuessKind {
    fn from(g: GuessArg) -> Self {
        match g {
            GuessArg::Zero => GuessKind::Zero,
            GuessArg::Drift => GuessKind::Drift,
            GuessArg::Geodesic => GuessKind::Geodesic,
        }
    }
}

fn describe(outcome: &RunOutcome) {
    let r = &outcome.report;
    let residual = r.residual_inf.map_or("-".to_string(), |x| format!("{x:.3e}"));
    println!(
        "{}: status={} guess={} residual={} iterations={}",
        r.name,
        r.status,
        r.guess,
        residual,
        r.iterations.map_or("-".into(), |i| i.to_string())
    );
    if let Some(msg) = &r.message {
        eprintln!("{}: error category={} {msg}", r.name, r.status);
    }
}

fn main() -> ExitCode {
    let Command::Solve {
        target,
        out,
        all_presets,
        guess,
    } = Cli::parse().command;

    let mut configs: Vec<RunConfig> = Vec::new();
    if all_presets {
        configs.extend(PRESET_NAMES.iter().filter_map(|n| preset(n)));
    }
    if let Some(t) = &target {
        match load_config(t) {
            Ok(cfg) => configs.push(cfg),
            Err(e) => {
                eprintln!("error category=InvalidConfig {e}");
                return ExitCode::from(5);
            }
        }
    }
    if configs.is_empty() {
        eprintln!("error category=InvalidConfig nothing to solve: give a target or --all-presets");
        return ExitCode::from(5);
    }
    if let Some(g) = guess {
        for cfg in &mut configs {
            cfg.guess = Guess::Named(g.into());
        }
    }

    let out = out.as_deref();
    let outcomes: Vec<RunOutcome> = thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || run(cfg, out)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });

    let mut code = 0;
    for o in &outcomes {
        describe(o);
        if code == 0 {
            code = o.exit_code();
        }
    }
    ExitCode::from(code as u8)
}
