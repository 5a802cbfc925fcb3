//! The `enssamp` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    min_models_search, run_experiment, ExperimentConfig, RunOptions, SearchConfig, OUTPUT_DIR_ENV,
};
use crate::stats::{theorem1_assumption_holds, theorem1_min_m};
use crate::verify::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(name = "enssamp", version, about = "Ensemble sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every agent in a config file and write regret CSVs.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Smallest ensemble size whose end-of-horizon regret is within eps of Thompson sampling.
    MinModels {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Overrides search.eps_target.
        #[arg(long)]
        eps: Option<f64>,
        /// Comma-separated ensemble sizes, ascending.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        /// Average the last W periods instead of the final one.
        #[arg(long)]
        trailing_window: Option<usize>,
        /// Overrides env.actions.
        #[arg(long)]
        actions: Option<usize>,
        /// Overrides run.horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Ensemble size sufficient for the regret guarantee: ceil((4A/eps^2) ln(4AT/eps^3)).
    Bound {
        #[arg(long)]
        actions: u64,
        #[arg(long)]
        horizon: u64,
        #[arg(long)]
        eps: f64,
    },
    /// Run the property suites and print one line per suite.
    Verify {
        /// Suite to run; repeatable. Defaults to all.
        #[arg(long)]
        suite: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory; falls back to run.output, then $ENSSAMP_OUT_DIR, then ./results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the realization pool.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(r) = self.realizations {
            config.run.realizations = r;
        }
    }

    fn output_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.run.output.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    fn options(&self) -> Result<RunOptions> {
        match self.threads {
            Some(0) => Err(Error::Config("--threads must be at least 1".into())),
            Some(n) => Ok(RunOptions::threads(n)),
            None => Ok(RunOptions::default()),
        }
    }
}

/// Parses `args` (including the program name), runs the command, and returns
/// the exit code: 0 on success, 2 on usage or config errors, 1 otherwise.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run { config, common } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            common.apply(&mut cfg);
            cfg.validate()?;
            let options = common.options()?;
            let dir = common.output_dir(&cfg);
            let result = run_experiment(&cfg, Some(&dir), options)?;
            for agent in &result.agents {
                writeln!(
                    out,
                    "{}: cumulative regret {:.4} over {} realizations",
                    agent.label, agent.summary.cumulative_mean, agent.summary.realizations
                )?;
            }
            writeln!(out, "wrote {}", dir.display())?;
            Ok(0)
        }
        Command::MinModels {
            config,
            common,
            eps,
            grid,
            trailing_window,
            actions,
            horizon,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            common.apply(&mut cfg);
            if let Some(k) = actions {
                cfg.env.actions = k;
            }
            if let Some(t) = horizon {
                cfg.run.horizon = t;
            }
            let base = cfg.search.clone();
            let search = SearchConfig {
                eps_target: eps
                    .or(base.as_ref().map(|s| s.eps_target))
                    .ok_or_else(|| Error::Config("need --eps or search.eps_target".into()))?,
                grid: grid
                    .or(base.as_ref().map(|s| s.grid.clone()))
                    .ok_or_else(|| Error::Config("need --grid or search.grid".into()))?,
                trailing_window: trailing_window.or(base.as_ref().map(|s| s.trailing_window)).unwrap_or(1),
            };
            cfg.search = Some(search.clone());
            cfg.validate()?;
            let options = common.options()?;
            let dir = common.output_dir(&cfg);
            let report = min_models_search(&cfg, &search, Some(&dir), options)?;
            writeln!(out, "ts: {:.6} +/- {:.6}", report.ts.mean, report.ts.stderr)?;
            for row in &report.rows {
                writeln!(
                    out,
                    "M={}: {:.6} +/- {:.6} (excess {:.6} +/- {:.6})",
                    row.models, row.es.mean, row.es.stderr, row.excess, row.excess_stderr
                )?;
            }
            match report.minimal {
                Some(m) => writeln!(out, "minimal M = {m}")?,
                None => writeln!(out, "minimal M = not found")?,
            }
            Ok(0)
        }
        Command::Bound { actions, horizon, eps } => {
            let m = theorem1_min_m(actions, horizon, eps).map_err(|e| Error::Config(e.to_string()))?;
            writeln!(out, "{m}")?;
            if !theorem1_assumption_holds(actions, horizon, eps) {
                writeln!(err, "warning: A*T/(eps*delta) < 9 with delta = eps/2; the guarantee does not apply")?;
            }
            Ok(0)
        }
        Command::Verify { suite, seed } => {
            let suites = if suite.is_empty() {
                Suite::ALL.to_vec()
            } else {
                suite.iter().map(|s| s.parse()).collect::<Result<Vec<Suite>>>()?
            };
            let mut failed = 0;
            for s in suites {
                let report = run_suite(s, seed)?;
                writeln!(out, "{report}")?;
                if !report.passed {
                    failed += 1;
                }
            }
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}
