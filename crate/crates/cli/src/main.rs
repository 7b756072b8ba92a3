//! `rswitch`: fit, simulate and analyse Markov-switching models.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use rswitch_core::analysis::{
    diagnose, gof_pvalue, gof_statistic, log_bayes_factor, model_evidence, posterior_mean_point, summarize,
    DiagnosticsReport,
};
use rswitch_core::io::{self, report, RunConfig};
use rswitch_core::mle::{aic_bic, fit_mle};
use rswitch_core::sampler::ChainResult;
use rswitch_core::{Error, Family, ModelSpec, Result};

#[derive(Parser)]
#[command(name = "rswitch", version, about = "Bayesian Markov-switching count and severity models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler and persist all chains to a run directory.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic dataset from the `[simulate]` table of a config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sidecar with the true parameters and states.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scale reduction factors, acceptance rates, label report and posterior
    /// summary of a run.
    Diagnose {
        run: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        level: Option<f64>,
    },
    /// Harmonic-mean evidence with bootstrap interval, and DIC.
    Marglik {
        run: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Log Bayes factor of the second run against the first.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Chi-square statistic and Monte-Carlo p-value.
    Gof {
        run: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-period posterior probability of state 1.
    States {
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Single-state maximum-likelihood baselines with AIC and BIC.
    Mle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit { config, data, out, chains, seed } => fit(&config, &data, &out, chains, seed),
        Command::Simulate { config, out, truth, seed } => simulate(&config, &out, truth.as_deref(), seed),
        Command::Diagnose { run, delta, level } => {
            let run = io::load_run(&run)?;
            let (spec, _, _) = run.arrange()?;
            let (report, retained) = retained_chains(&run, &spec, delta)?;
            print!("{}", report::diagnostics_text(&report));
            let level = level.unwrap_or(run.config.analysis.level);
            let summary = summarize(&retained, &spec, level)?;
            print!("{}", report::summary_csv(&summary));
            Ok(())
        }
        Command::Marglik { run, delta, seed } => {
            let run = io::load_run(&run)?;
            let (spec, _, panel) = run.arrange()?;
            let (_, retained) = retained_chains(&run, &spec, delta)?;
            let seed = seed.unwrap_or(run.meta.seed);
            let evidence = model_evidence(&panel, &spec, &retained, run.config.analysis.bootstrap_draws, seed)?;
            print!("{}", report::evidence_text(&evidence));
            Ok(())
        }
        Command::Compare { first, second, delta } => {
            let a = log_marginal(&first, delta)?;
            let b = log_marginal(&second, delta)?;
            println!("log marginal likelihood, first: {a:.2}");
            println!("log marginal likelihood, second: {b:.2}");
            print!("{}", report::bayes_factor_text(log_bayes_factor(b, a)));
            Ok(())
        }
        Command::Gof { run, replicates, delta, seed } => {
            let run = io::load_run(&run)?;
            let (spec, layout, panel) = run.arrange()?;
            let (_, retained) = retained_chains(&run, &spec, delta)?;
            let point = posterior_mean_point(&retained)?;
            let replicates = replicates.unwrap_or(run.config.analysis.gof_replicates);
            let statistic = gof_statistic(&panel, &spec, &layout, &point).unwrap_or(f64::INFINITY);
            let p = gof_pvalue(&panel, &spec, &layout, &point, replicates, seed.unwrap_or(run.meta.seed))?;
            print!("{}", report::gof_text(statistic, p, replicates));
            Ok(())
        }
        Command::States { run, out, delta } => {
            let run = io::load_run(&run)?;
            let (spec, layout, _) = run.arrange()?;
            if !spec.is_switching() {
                return Err(Error::Specification("a single-state model has no state probabilities".into()));
            }
            let (_, retained) = retained_chains(&run, &spec, delta)?;
            let summary = summarize(&retained, &spec, run.config.analysis.level)?;
            let text = report::states_csv(&summary, &layout)?;
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Mle { config, data } => mle(&config, &data),
    }
}

fn fit(config: &Path, data: &Path, out: &Path, chains: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut config = RunConfig::load(config)?;
    if let Some(c) = chains {
        config.sampler.n_chains = c;
    }
    if let Some(s) = seed {
        config.sampler.seed = s;
    }
    config.validate()?;
    let data = io::load_dataset(data)?;
    let every = (config.sampler.draws / 10).max(1);
    let progress = move |chain: usize, g: usize, lj: f64| {
        if g.is_multiple_of(every) {
            info!("chain {chain}: sweep {g}, log-joint {lj:.2}");
        }
    };
    let results = io::fit(&config, &data, Some(&progress))?;
    io::save_run(out, &config, &data, &results)?;
    let mut ok = 0;
    for (c, r) in results.iter().enumerate() {
        match r {
            Ok(_) => ok += 1,
            Err(e) => error!("chain {c} failed: {e}"),
        }
    }
    println!("{ok} of {} chains written to {}", results.len(), out.display());
    if ok == 0 {
        return Err(Error::Unavailable("every chain failed".into()));
    }
    Ok(())
}

fn simulate(config: &Path, out: &Path, truth: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let config = RunConfig::load(config)?;
    let (data, t) = io::simulate_dataset(&config, seed.unwrap_or(config.sampler.seed))?;
    io::write_dataset(out, &data)?;
    if let Some(path) = truth {
        io::write_truth(path, &t)?;
    }
    println!("{} observations written to {}", data.len(), out.display());
    Ok(())
}

fn mle(config: &Path, data: &Path) -> Result<()> {
    let config = RunConfig::load(config)?;
    let data = io::load_dataset(data)?;
    let (spec, _, panel) = io::arrange(&config, &data)?;
    let mut done: Vec<Family> = Vec::new();
    for &family in spec.families() {
        if family == Family::ZeroOnly || done.contains(&family) {
            continue;
        }
        done.push(family);
        let base = ModelSpec::single(family, spec.covariates().to_vec())?;
        let fit = fit_mle(&base, &panel, None)?;
        let (aic, bic) = aic_bic(&fit, panel.len());
        print!("{}", report::mle_text(family.name(), &fit, aic, bic));
    }
    Ok(())
}

/// Label resolution over a run's chains; returns the report and the
/// retained chains.
fn retained_chains<'a>(
    run: &'a io::Run,
    spec: &ModelSpec,
    delta: Option<f64>,
) -> Result<(DiagnosticsReport, Vec<&'a ChainResult>)> {
    if run.chains.is_empty() {
        return Err(Error::Unavailable("the run has no successful chains".into()));
    }
    let delta = delta.unwrap_or(run.config.analysis.delta);
    let report = diagnose(&run.chains, spec, delta)?;
    let retained = run.chains.iter().filter(|c| report.retained_chains.contains(&c.chain)).collect();
    Ok((report, retained))
}

fn log_marginal(dir: &Path, delta: Option<f64>) -> Result<f64> {
    let run = io::load_run(dir)?;
    let (spec, _, _) = run.arrange()?;
    let (_, retained) = retained_chains(&run, &spec, delta)?;
    let ll: Vec<f64> = retained.iter().flat_map(|c| c.loglik.iter().copied()).collect();
    rswitch_core::analysis::log_marginal_likelihood(&ll)
}
