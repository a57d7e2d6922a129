use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use loansim::evaluation::{delta_sweep, run_experiment, ExperimentConfig, GainReport, PolicyKind};
use loansim::interfaces::{csv, Config, Server};
use loansim::InterventionSequence;

#[derive(Parser)]
#[command(name = "loansim", version, about = "Loan-application process simulator and intervention benchmark")]
struct Cli {
    /// TOML file with [process], [bank], [experiment] and [learner] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed. Falls back to the config file, then 42.
    #[arg(long, global = true, env = "SIMBANK_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an event log as CSV.
    Generate {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        /// Probability that a case follows the bank policy; the rest are randomized.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Comma-separated interventions subject to the mixture.
        #[arg(long, default_value = "choose_procedure,set_interest_rate,time_contact_hq")]
        interventions: String,
        #[arg(long, default_value_t = 0)]
        base_case: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add the hidden client quality column.
        #[arg(long)]
        include_hidden: bool,
    },
    /// Gain of one policy over the bank.
    Evaluate {
        #[arg(long, default_value = "s-learner")]
        policy: String,
        #[arg(long, default_value = "choose_procedure")]
        interventions: String,
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        sizes: Sizes,
        #[arg(long)]
        json: bool,
    },
    /// Gain table of several policies on several intervention sets.
    Benchmark {
        /// Intervention sets, each comma-separated. Repeatable.
        #[arg(
            long = "interventions",
            default_values_t = ["choose_procedure".to_string(), "set_interest_rate".to_string(), "time_contact_hq".to_string()]
        )]
        sets: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "random,bank,s-learner,kmeans-q,oracle")]
        policies: Vec<String>,
        #[command(flatten)]
        sizes: Sizes,
    },
    /// Gain as a function of the training-log δ.
    Sweep {
        #[arg(long, default_value = "s-learner")]
        policy: String,
        #[arg(long, default_value = "time_contact_hq")]
        interventions: String,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,0.999")]
        delta_list: Vec<f64>,
        #[command(flatten)]
        sizes: Sizes,
        /// CSV with columns delta,mean,ci_lo,ci_hi.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Serve the NDJSON decision protocol over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
    /// Every counterfactual outcome of one case.
    Counterfactuals {
        #[arg(long = "case")]
        case_nr: u64,
        #[arg(long, default_value = "choose_procedure,set_interest_rate,time_contact_hq")]
        interventions: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Sizes {
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
}

impl Sizes {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.n_train = self.n_train.unwrap_or(cfg.n_train);
        cfg.n_val = self.n_val.unwrap_or(cfg.n_val);
        cfg.n_test = self.n_test.unwrap_or(cfg.n_test);
        cfg.n_reps = self.reps.unwrap_or(cfg.n_reps);
    }
}

fn interventions(list: &str) -> Result<InterventionSequence> {
    Ok(InterventionSequence::parse(list)?)
}

fn policy(name: &str) -> Result<PolicyKind> {
    Ok(name.parse()?)
}

fn report_line(r: &GainReport) -> String {
    let (lo, hi) = r.ci95();
    format!(
        "{:<10} {:<50} delta={:<5} gain={:+.4} std={:.4} ci95=[{:+.4}, {:+.4}] reps={} n_test={}",
        r.policy.name(),
        r.interventions.names().join(","),
        r.delta,
        r.mean,
        r.std,
        lo,
        hi,
        r.n_reps,
        r.n_test
    )
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Config::default(),
    };
    let seed = config.resolve_seed(cli.seed)?;
    let sim = config.simulator(seed);
    let mut exp = config.experiment_config();

    match cli.command {
        Command::Generate {
            cases,
            delta,
            interventions: ints,
            base_case,
            out,
            include_hidden,
        } => {
            let log = sim.generate_log(cases, delta, &interventions(&ints)?, base_case)?;
            match out {
                Some(path) => csv::export_csv(&log, &path, include_hidden)?,
                None => csv::write_log(std::io::stdout().lock(), &log, include_hidden)?,
            }
        }
        Command::Evaluate {
            policy: p,
            interventions: ints,
            delta,
            sizes,
            json,
        } => {
            sizes.apply(&mut exp);
            exp.delta = delta.unwrap_or(exp.delta);
            let r = run_experiment(&sim, policy(&p)?, &interventions(&ints)?, &exp)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("{}", report_line(&r));
            }
        }
        Command::Benchmark { sets, policies, sizes } => {
            sizes.apply(&mut exp);
            let kinds = policies.iter().map(|p| policy(p)).collect::<Result<Vec<_>>>()?;
            let mut out = std::io::stdout().lock();
            write!(out, "{:<50}", "interventions")?;
            for k in &kinds {
                write!(out, " {:>18}", k.name())?;
            }
            writeln!(out)?;
            for set in &sets {
                let active = interventions(set)?;
                write!(out, "{:<50}", active.names().join(","))?;
                for &k in &kinds {
                    let r = run_experiment(&sim, k, &active, &exp)?;
                    write!(out, " {:>18}", format!("{:+.3} ± {:.3}", r.mean, r.std))?;
                    out.flush()?;
                }
                writeln!(out)?;
            }
        }
        Command::Sweep {
            policy: p,
            interventions: ints,
            delta_list,
            sizes,
            plot_data,
        } => {
            sizes.apply(&mut exp);
            if delta_list.is_empty() {
                bail!("--delta-list is empty");
            }
            let reports = delta_sweep(&sim, policy(&p)?, &interventions(&ints)?, &delta_list, &exp)?;
            for r in &reports {
                println!("{}", report_line(r));
            }
            if let Some(path) = plot_data {
                let mut w = ::csv::Writer::from_path(&path)?;
                w.write_record(["delta", "mean", "ci_lo", "ci_hi"])?;
                for r in &reports {
                    let (lo, hi) = r.ci95();
                    w.write_record([r.delta, r.mean, lo, hi].map(|v| format!("{v:.6}")))?;
                }
                w.flush()?;
            }
        }
        Command::Serve { host, port } => {
            let server = Server::bind((host.as_str(), port), sim)?;
            eprintln!("listening on {} (seed {seed})", server.local_addr()?);
            server.serve()?;
        }
        Command::Counterfactuals {
            case_nr,
            interventions: ints,
            json,
        } => {
            let active = interventions(&ints)?;
            let branches = sim.evaluate_counterfactuals(case_nr, &active)?;
            let best = sim.oracle(case_nr, &active)?.branch_index;
            if json {
                let rows: Vec<_> = branches
                    .iter()
                    .enumerate()
                    .map(|(i, (b, r))| {
                        serde_json::json!({
                            "branch": b.label(),
                            "profit": r.profit,
                            "accepted": r.accepted,
                            "canceled": r.canceled,
                            "oracle": i == best,
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                for (i, (b, r)) in branches.iter().enumerate() {
                    let mark = if i == best { "*" } else { " " };
                    let outcome = if r.canceled {
                        "canceled"
                    } else if r.accepted {
                        "accepted"
                    } else {
                        "refused"
                    };
                    println!("{mark} {:<70} {:>12.2} {outcome}", b.label(), r.profit);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sizes_override_only_given_fields() {
        let mut cfg = ExperimentConfig::default();
        Sizes {
            n_train: Some(10),
            n_val: None,
            n_test: None,
            reps: Some(2),
        }
        .apply(&mut cfg);
        assert_eq!((cfg.n_train, cfg.n_val, cfg.n_reps), (10, 1000, 2));
    }
}
