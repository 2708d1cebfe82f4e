//! `mgoig`: run multi-group one-inclusion graph experiments from JSON configs.

mod config;
mod describe;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mgoig::agnostic::{canonical_coords, AgnosticGraph, AgnosticOigLearner};
use mgoig::evaluation::trial_rng;
use mgoig::learner::Predictor;
use mgoig::{enumerate_group_realizable, rational, CapacityMode, ConceptClass, GroupFamily, LabeledSample, Oig, SetDescriptor};
use serde::Deserialize;

use config::{ExperimentConfig, LearnerChoice};

#[derive(Parser)]
#[command(name = "mgoig", version, about = "Multi-group one-inclusion graph experiments")]
struct Cli {
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Capacity mode; overrides the config.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<CapacityMode>,
    #[command(subcommand)]
    command: Command,
}

fn parse_mode(s: &str) -> Result<CapacityMode, String> {
    s.parse().map_err(|e: mgoig::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a config and write CSV plus a manifest.
    Run { config: PathBuf },
    /// Print instance sizes and budgets without running.
    Describe { config: PathBuf },
    /// Matching network commands.
    Match {
        #[command(subcommand)]
        command: MatchCommand,
    },
    /// Predict one point with a chosen learner.
    Predict {
        #[arg(long, value_enum)]
        learner: LearnerChoice,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        point: usize,
    },
    /// Agnostic learner commands.
    Agnostic {
        #[command(subcommand)]
        command: AgnosticCommand,
    },
    /// One-inclusion graph commands.
    Oig {
        #[command(subcommand)]
        command: OigCommand,
    },
}

#[derive(Subcommand)]
enum MatchCommand {
    /// Solve the matching on the full domain and print value, integrality and iterations.
    Solve { config: PathBuf },
}

#[derive(Subcommand)]
enum AgnosticCommand {
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        point: usize,
    },
    /// Dump credits, discounted densities and capacities as JSON.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        /// Include this test point as an extra coordinate.
        #[arg(long)]
        point: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum OigCommand {
    /// Print the graph on the full domain.
    Dump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: DumpFormat,
    },
}

/// Class and groups only; any other config fields are ignored.
#[derive(Deserialize)]
struct ModelConfig {
    domain: usize,
    hypotheses: SetDescriptor,
    groups: SetDescriptor,
    #[serde(default)]
    mode: CapacityMode,
    #[serde(default = "default_delta")]
    delta: f64,
}

fn default_delta() -> f64 {
    0.1
}

impl ModelConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("config-invalid: {}", path.display()))
    }

    fn resolve(&self) -> Result<(ConceptClass, GroupFamily)> {
        Ok((self.hypotheses.to_class(self.domain)?, self.groups.to_groups(self.domain)?))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    points: Vec<usize>,
    labels: Vec<u8>,
}

fn load_sample(path: &Path, m: usize, consistent: bool) -> Result<LabeledSample> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let s: SampleFile = serde_json::from_str(&text).with_context(|| format!("sample-invalid: {}", path.display()))?;
    if s.points.len() != s.labels.len() || s.labels.iter().any(|&y| y > 1) {
        bail!("sample-invalid: points and 0/1 labels must have equal length");
    }
    let entries = s.points.into_iter().zip(s.labels.into_iter().map(|y| y == 1)).collect();
    Ok(if consistent { LabeledSample::new(m, entries)? } else { LabeledSample::noisy(m, entries)? })
}

fn load_experiment(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn print_prediction(name: &str, point: usize, p: &rational::Rational, y: bool, seed: u64) -> Result<()> {
    let report = serde_json::json!({
        "learner": name,
        "point": point,
        "prob_one": rational::format(p),
        "prob_one_decimal": rational::to_f64(p),
        "prediction": y as u8,
        "seed": seed,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().map_err(|e| anyhow!(e))?;
    }
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_experiment(cli, config)?;
            let out = experiments::run(&cfg)?;
            let (csv, manifest) = output::write_outputs(&cfg, &out.rows, &out.notes)?;
            for (suffix, body) in &out.artifacts {
                std::fs::write(cfg.out_dir().join(format!("{}.{suffix}", cfg.id())), body)?;
            }
            let failures = out.rows.iter().filter(|r| r.failed_exact()).count();
            for note in &out.notes {
                eprintln!("note: {note}");
            }
            println!("wrote {} ({} rows) and {}", csv.display(), out.rows.len(), manifest.display());
            if failures > 0 {
                eprintln!("bound-violated: {failures} exact check(s) failed");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Describe { config } => {
            let cfg = load_experiment(cli, config)?;
            print!("{}", describe::describe(&cfg)?);
        }
        Command::Match { command: MatchCommand::Solve { config } } => {
            let m = ModelConfig::load(config)?;
            let mode = cli.mode.unwrap_or(m.mode);
            let (h, g) = m.resolve()?;
            let c = enumerate_group_realizable(&h, &g)?;
            let oig = Oig::build(&c, Some(&g));
            let net = mgoig::build_network(&oig, &g, mode)?;
            let out = mgoig::matching::solve_best_effort(&net)?;
            for w in net.warnings() {
                eprintln!("warning: {w}");
            }
            println!("mode: {}", experiments::mode_name(mode));
            println!("value: {} of {}", rational::format(&out.matching.value()), net.edge_count());
            println!("integral: {}", out.matching.is_integral());
            println!("iterations: {}", out.iterations);
            println!("complete: {}", out.complete);
        }
        Command::Predict { learner, config, sample, point } => {
            let m = ModelConfig::load(config)?;
            let (h, g) = m.resolve()?;
            let agnostic = matches!(learner, LearnerChoice::Agnostic | LearnerChoice::Mixture);
            let s = load_sample(sample, m.domain, !agnostic)?;
            check_point(*point, m.domain)?;
            let l = config::make_learner(*learner, cli.mode.unwrap_or(m.mode), m.delta, &h, &g)?;
            predict_one(l.as_ref(), &s, *point, seed)?;
        }
        Command::Agnostic { command } => match command {
            AgnosticCommand::Predict { config, sample, point } => {
                let m = ModelConfig::load(config)?;
                let (h, g) = m.resolve()?;
                let s = load_sample(sample, m.domain, false)?;
                check_point(*point, m.domain)?;
                let l = AgnosticOigLearner::new(h, g)?;
                predict_one(&l, &s, *point, seed)?;
            }
            AgnosticCommand::Audit { config, sample, point } => {
                let m = ModelConfig::load(config)?;
                let (h, g) = m.resolve()?;
                let s = load_sample(sample, m.domain, false)?;
                let coords = match point {
                    Some(x) => {
                        check_point(*x, m.domain)?;
                        canonical_coords(&s, *x).0
                    }
                    None => {
                        let mut c: Vec<usize> = s.entries().iter().map(|e| e.0).collect();
                        c.sort_unstable();
                        c
                    }
                };
                let graph = AgnosticGraph::new(&h, &g, &coords)?;
                println!("{}", serde_json::to_string_pretty(&graph.audit())?);
            }
        },
        Command::Oig { command: OigCommand::Dump { config, format } } => {
            let m = ModelConfig::load(config)?;
            let (h, g) = m.resolve()?;
            let oig = Oig::build(&enumerate_group_realizable(&h, &g)?, Some(&g));
            match format {
                DumpFormat::Json => println!("{}", serde_json::to_string_pretty(&oig.dump())?),
                DumpFormat::Dot => print!("{}", oig.to_dot()),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn check_point(x: usize, m: usize) -> Result<()> {
    if x >= m {
        bail!("point {x} outside the domain of {m} points");
    }
    Ok(())
}

fn predict_one(l: &dyn Predictor, s: &LabeledSample, x: usize, seed: u64) -> Result<()> {
    let p = l.prob_one(s, x)?;
    let y = l.predict(s, x, &mut trial_rng(seed, 0))?;
    print_prediction(&l.name(), x, &p, y, seed)
}

fn main() -> ExitCode {
    // exit status 2 is reserved for failed exact checks
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
