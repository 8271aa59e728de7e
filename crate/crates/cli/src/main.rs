use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use ssci_core::harness::{
    load_run_config, open_env, simulate, spawn_server, write_config_snapshot, write_trace_csv,
    HarnessError, Mode, RunConfig, ServerConfig, BEST_CHECKPOINT,
};
use ssci_core::policy::load_checkpoint;
use ssci_core::trainer::{evaluate, grid_search, train, TrainError};

#[derive(Parser, Debug)]
#[command(name = "ssci", version, about = "Adaptive gain tuning of a surrogate SSCI plant")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand accepts. Any other `--key value`, `--key=value`
/// or `key=value` argument overrides the config field of that name.
#[derive(clap::Args, Debug)]
struct Common {
    /// Config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(allow_hyphen_values = true, trailing_var_arg = true, num_args = 0.., value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy and write the run directory.
    Train {
        /// `local` or `remote:HOST:PORT`.
        #[arg(long)]
        env: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Roll out a checkpoint's mean action and report the mitigation.
    Evaluate {
        /// Checkpoint path; defaults to `best.ckpt` in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the unmitigated baseline episode.
        #[arg(long)]
        no_mitigation: bool,
        #[arg(long)]
        env: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one open-loop episode and write raw, decimated and filtered traces.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        kp: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Serve the surrogate plant over the line protocol.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 4100)]
        port: u16,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep every gain bucket at zero noise and write reward against gain.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

/// A configuration problem; reported with exit status 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Overrides = (Vec<(String, String)>, Vec<String>);

/// Splits free-form override arguments into `(key, value)` pairs and the
/// boolean flags named in `flags`.
fn parse_overrides(args: &[String], flags: &[&str]) -> Result<Overrides> {
    let mut pairs = Vec::new();
    let mut set_flags = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let (key, inline) = match arg.strip_prefix("--") {
            Some(body) => match body.split_once('=') {
                Some((k, v)) => (k.to_string(), Some(v.to_string())),
                None => (body.to_string(), None),
            },
            None => match arg.split_once('=') {
                Some((k, v)) => (k.to_string(), Some(v.to_string())),
                None => return Err(ConfigError(format!("unexpected argument `{arg}`")).into()),
            },
        };
        let key = key.replace('-', "_");
        if inline.is_none() && flags.contains(&key.as_str()) {
            set_flags.push(key);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .cloned()
                .ok_or_else(|| ConfigError(format!("missing value for `--{key}`")))?,
        };
        pairs.push((key, value));
    }
    Ok((pairs, set_flags))
}

struct Resolved {
    run: RunConfig,
    flags: Vec<String>,
    extra: Vec<(String, String)>,
}

/// Loads the config file and applies overrides. Keys in `extra_keys` are
/// returned to the caller instead of being applied.
fn resolve(common: &Common, mode: Mode, flags: &[&str], extra_keys: &[&str]) -> Result<Resolved> {
    let (pairs, set_flags) = parse_overrides(&common.overrides, flags)?;
    let mut config_path = common.config.clone();
    let mut rest = Vec::new();
    for (k, v) in pairs {
        if k == "config" {
            config_path = Some(PathBuf::from(v));
        } else {
            rest.push((k, v));
        }
    }
    let mut run = match &config_path {
        Some(path) if !path.exists() => {
            return Err(ConfigError(format!("config not found: {}", path.display())).into())
        }
        Some(path) => load_run_config(path).map_err(|e| match e {
            HarnessError::Config { path, source } => {
                anyhow!(ConfigError(format!("{}: {source}", path.display())))
            }
            other => anyhow!(ConfigError(other.to_string())),
        })?,
        None => RunConfig::default(),
    };
    run.mode = mode;
    if let Some(out) = &common.out {
        run.out_dir = out.clone();
    }
    let mut extra = Vec::new();
    for (k, v) in rest {
        if extra_keys.contains(&k.as_str()) {
            extra.push((k, v));
            continue;
        }
        run.set_override(&k, &v)
            .map_err(|m| ConfigError(format!("override --{k}: {m}")))?;
    }
    Ok(Resolved {
        run,
        flags: set_flags,
        extra,
    })
}

fn apply_env(run: &mut RunConfig, env: &Option<String>) -> Result<()> {
    if let Some(e) = env {
        run.set_override("env", e)
            .map_err(|m| ConfigError(format!("--env: {m}")))?;
    }
    Ok(())
}

fn validate(run: &RunConfig) -> Result<()> {
    run.scenario
        .validate()
        .map_err(|e| ConfigError(e.to_string()))?;
    run.train.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(())
}

fn cmd_train(env: Option<String>, common: Common) -> Result<()> {
    let mut run = resolve(&common, Mode::Train, &[], &[])?.run;
    apply_env(&mut run, &env)?;
    validate(&run)?;
    let dir = run.out_dir.clone();
    write_config_snapshot(&dir, &run)?;
    let environment = open_env(&run.env)?;
    let outcome = match train(environment, &run.scenario, &run.train, Some(&dir)) {
        Ok(o) => o,
        Err(e @ TrainError::InvalidConfig(_)) => return Err(ConfigError(e.to_string()).into()),
        Err(e) => return Err(e.into()),
    };
    println!(
        "trained {} epochs: best mean reward {:.6e} at epoch {}, {} plant evaluations, {} buckets",
        outcome.stats.len(),
        outcome.best_reward,
        outcome.best_epoch,
        outcome.evaluations,
        outcome.distinct_buckets
    );
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_evaluate(
    checkpoint: Option<PathBuf>,
    no_mitigation: bool,
    env: Option<String>,
    common: Common,
) -> Result<()> {
    let resolved = resolve(&common, Mode::Evaluate, &["no_mitigation"], &["checkpoint"])?;
    let mut run = resolved.run;
    apply_env(&mut run, &env)?;
    validate(&run)?;
    let no_mitigation = no_mitigation || resolved.flags.iter().any(|f| f == "no_mitigation");
    let checkpoint = resolved
        .extra
        .iter()
        .find(|(k, _)| k == "checkpoint")
        .map(|(_, v)| PathBuf::from(v))
        .or(checkpoint)
        .unwrap_or_else(|| run.out_dir.join(BEST_CHECKPOINT));
    let policy = load_checkpoint(&checkpoint, run.train.policy_config())
        .with_context(|| format!("loading {}", checkpoint.display()))?;
    let mut environment = open_env(&run.env)?;
    let seed = run.train.seed;
    let eval = evaluate(&mut environment, &policy, &run.scenario, &run.train, seed)?;
    let dir = &run.out_dir;
    std::fs::create_dir_all(dir)?;
    let report = eval.report.to_kv_string();
    std::fs::write(dir.join("report.txt"), &report)?;
    write_trace_csv(&dir.join("episode.csv"), &eval.trace)?;
    if no_mitigation {
        write_trace_csv(&dir.join("baseline.csv"), &eval.unmitigated_trace)?;
    }
    print!("{report}");
    Ok(())
}

fn cmd_simulate(kp: Option<f64>, common: Common) -> Result<()> {
    let resolved = resolve(&common, Mode::Simulate, &[], &["kp"])?;
    let run = resolved.run;
    let kp = match resolved.extra.iter().find(|(k, _)| k == "kp") {
        Some((_, v)) => v
            .parse::<f64>()
            .map_err(|_| ConfigError(format!("bad value for --kp: `{v}`")))?,
        None => kp.ok_or_else(|| ConfigError("--kp is required".into()))?,
    };
    run.scenario
        .validate_timeline()
        .map_err(|e| ConfigError(e.to_string()))?;
    if !kp.is_finite() {
        return Err(ConfigError(format!("kp must be finite, got {kp}")).into());
    }
    let sim = simulate(&run.scenario, &run.train.pipeline(), kp, run.train.seed)?;
    sim.write(&run.out_dir)?;
    match sim.diverged_at {
        Some(t) => println!("diverged after t = {t} s; trace truncated to {} samples", sim.raw.len()),
        None => println!("wrote {} raw samples", sim.raw.len()),
    }
    println!("output directory: {}", run.out_dir.display());
    Ok(())
}

fn cmd_serve(host: String, port: u16, common: Common) -> Result<()> {
    let run = resolve(&common, Mode::Serve, &[], &[])?.run;
    validate(&run)?;
    let config = ServerConfig {
        scenario: run.scenario.clone(),
        seed: run.train.seed,
        kp_min: run.train.kp_min,
        kp_max: run.train.kp_max,
    };
    let server = spawn_server((host.as_str(), port), config)
        .with_context(|| format!("binding {host}:{port}"))?;
    println!("listening on {}", server.local_addr());
    server.join();
    Ok(())
}

fn cmd_oracle(common: Common) -> Result<()> {
    let run = resolve(&common, Mode::Oracle, &[], &[])?.run;
    validate(&run)?;
    let mut env = open_env(&run.env)?;
    let sweep = grid_search(&mut env, &run.scenario, &run.train)?;
    std::fs::create_dir_all(&run.out_dir)?;
    let path = run.out_dir.join("oracle.csv");
    std::fs::write(&path, sweep.to_csv())?;
    println!(
        "best kp = {} (reward {:.6e}, {})",
        sweep.best_kp,
        sweep.best_reward,
        if sweep.unique { "unique" } else { "tied" }
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { env, common } => cmd_train(env, common),
        Command::Evaluate {
            checkpoint,
            no_mitigation,
            env,
            common,
        } => cmd_evaluate(checkpoint, no_mitigation, env, common),
        Command::Simulate { kp, common } => cmd_simulate(kp, common),
        Command::Serve { host, port, common } => cmd_serve(host, port, common),
        Command::Oracle { common } => cmd_oracle(common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
