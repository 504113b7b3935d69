//! `amp-lab`: command-line front end for the experiments and checks.

use std::io::Write;
use std::path::{Path, PathBuf};

use amp_lab::ensembles::RngStream;
use amp_lab::harness::{
    build_instance, run_experiment, state_evolution_for, universality_compare, ExperimentConfig, ExperimentKind,
    ExperimentOutput, RunOptions,
};
use amp_lab::tensor_net::battery::{bcp_diagonal_battery, graph_lemma_battery, BatteryReport};
use amp_lab::tensor_net::{
    alt_cycle_component_bound_check, bcp_ratio, bcp_ratio_bruteforce, eval_value_bruteforce, eval_value_contraction,
    parse_network, validate_bcp_query, BcpQuery, TensorSpec,
};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "amp-lab", version, about = "Approximate message passing experiments and tensor-network checks")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the instance seed (signal, noise, K) and the tensor-check seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; files are written there in addition to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Single-threaded, timing-free run for byte-identical output.
    #[arg(long, global = true)]
    serial: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs AMP over every (ensemble, seed) cell and prints per-iteration records.
    RunAmp {
        /// Built-in experiment used when no --config is given.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Prints the state-evolution prediction only.
    StateEvolution {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Compares mean MSE curves across ensembles.
    Universality {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Evaluates a tensor network given in the text network format.
    TensorEval {
        file: PathBuf,
        /// Replaces the `dim` line of the file.
        #[arg(long)]
        dim: Option<usize>,
        /// Sums over all index tuples instead of contracting.
        #[arg(long)]
        bruteforce: bool,
    },
    /// Validates a BCP index pattern and evaluates its ratio, or runs the
    /// diagonal battery with --battery.
    BcpCheck {
        /// JSON file with `query`, `dim` and `tensors`.
        file: Option<PathBuf>,
        #[arg(long)]
        battery: Option<usize>,
        #[arg(long)]
        bruteforce: bool,
    },
    /// Checks the component bound on alternating cycles from a JSON file
    /// (`[[v0, v1, ...], ...]`) or on random instances with --random.
    GraphLemma {
        file: Option<PathBuf>,
        #[arg(long)]
        random: Option<usize>,
    },
}

#[derive(Debug, Deserialize)]
struct BcpInput {
    query: BcpQuery,
    dim: usize,
    tensors: Vec<TensorSpec>,
}

#[derive(Debug, Serialize)]
struct BcpOutput {
    surjective: bool,
    even_multiplicity: bool,
    connected: bool,
    ratio: f64,
}

fn load_config(cli: &Cli, preset: Option<&str>, fallback: ExperimentKind) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, preset) {
        (Some(_), Some(_)) => bail!("give either --config or --preset, not both"),
        (Some(path), None) => {
            ExperimentConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?
        }
        (None, Some(p)) => ExperimentConfig::preset(ExperimentKind::parse(p)?),
        (None, None) => ExperimentConfig::preset(fallback),
    };
    if let Some(s) = cli.seed {
        cfg.instance_seed = s;
        cfg.tensor.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    cli.out.clone().or_else(|| cfg.and_then(|c| c.output.clone()))
}

fn emit(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        stdout.write_all(b"\n")?;
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn write_outputs(dir: Option<&Path>, out: &ExperimentOutput) -> Result<()> {
    if let Some(dir) = dir {
        for p in out.write_to(dir)? {
            log::info!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn report_batteries(cli: &Cli, reports: &[BatteryReport]) -> Result<bool> {
    match cli.format {
        Format::Json => emit(&to_json(&reports)?)?,
        Format::Csv => {
            let mut s = String::from("name,instances,passed,worst,detail\n");
            for r in reports {
                s.push_str(&format!("{},{},{},{:.6e},\"{}\"\n", r.name, r.instances, r.passed, r.worst, r.detail.replace('"', "'")));
            }
            emit(&s)?;
        }
    }
    Ok(reports.iter().all(|r| r.ok()))
}

fn run(cli: &Cli) -> Result<bool> {
    let opts = RunOptions { serial: cli.serial };
    match &cli.command {
        Command::RunAmp { preset } => {
            let cfg = load_config(cli, preset.as_deref(), ExperimentKind::Fig1Local)?;
            let out = run_experiment(&cfg, opts)?;
            write_outputs(out_dir(cli, Some(&cfg)).as_deref(), &out)?;
            if let Some(reports) = &out.summary.tensor_checks {
                return report_batteries(cli, reports);
            }
            match cli.format {
                Format::Csv => emit(&out.records_csv()?)?,
                Format::Json => emit(&out.summary_json()?)?,
            }
        }
        Command::StateEvolution { preset } => {
            let cfg = load_config(cli, preset.as_deref(), ExperimentKind::Fig1Local)?;
            if cfg.experiment == ExperimentKind::TensorChecks {
                bail!("state-evolution needs a sensing experiment, got tensor_checks");
            }
            let r = cfg.resolve()?;
            let inst = build_instance(&cfg, &r)?;
            let se = state_evolution_for(&cfg, &r, &inst)?;
            if let Some(dir) = out_dir(cli, Some(&cfg)) {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("se.csv"), se.to_csv())?;
            }
            match cli.format {
                Format::Csv => emit(&se.to_csv())?,
                Format::Json => emit(&to_json(&se)?)?,
            }
        }
        Command::Universality { preset } => {
            let cfg = load_config(cli, preset.as_deref(), ExperimentKind::Fig1Local)?;
            let (out, report) = universality_compare(&cfg, opts)?;
            write_outputs(out_dir(cli, Some(&cfg)).as_deref(), &out)?;
            match cli.format {
                Format::Json => emit(&to_json(&report)?)?,
                Format::Csv => {
                    let mut s = String::from("t,se_predicted");
                    for e in &report.ensembles {
                        s.push_str(&format!(",mean_{e},rel_gap_{e},rel_gap_se_{e}"));
                    }
                    s.push('\n');
                    for row in &report.rows {
                        s.push_str(&format!("{},{:.12e}", row.t, row.se_predicted));
                        for k in 0..row.mean.len() {
                            s.push_str(&format!(",{:.12e},{:.6e},{:.6e}", row.mean[k], row.rel_gap_ensemble[k], row.rel_gap_se[k]));
                        }
                        s.push('\n');
                    }
                    emit(&s)?;
                }
            }
        }
        Command::TensorEval { file, dim, bruteforce } => {
            let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let net = parse_network(&text, *dim, file.parent())?;
            let value = if *bruteforce {
                eval_value_bruteforce(&net.graph, &net.labeling, net.dim)?
            } else {
                eval_value_contraction(&net.graph, &net.labeling, net.dim)?
            };
            match cli.format {
                Format::Csv => emit(&format!("vertices,edges,dim,value\n{},{},{},{value:.17e}\n", net.graph.n_vertices, net.graph.n_edges(), net.dim))?,
                Format::Json => emit(&to_json(&serde_json::json!({
                    "vertices": net.graph.n_vertices,
                    "edges": net.graph.n_edges(),
                    "dim": net.dim,
                    "value": value,
                }))?)?,
            }
        }
        Command::BcpCheck { file, battery, bruteforce } => match (file, battery) {
            (Some(_), Some(_)) => bail!("give either a query file or --battery, not both"),
            (None, Some(k)) => {
                let seed = cli.seed.unwrap_or(0);
                return report_batteries(cli, &[bcp_diagonal_battery(*k, RngStream::new(seed, 3))?]);
            }
            (None, None) => bail!("bcp-check needs a query file or --battery N"),
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let input: BcpInput = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let q = BcpQuery::new(input.query.orders, input.query.ell, input.query.pi)?;
                let tensors = input.tensors.iter().map(|t| t.build(input.dim)).collect::<amp_lab::Result<Vec<_>>>()?;
                let rep = validate_bcp_query(&q);
                let ratio = if *bruteforce { bcp_ratio_bruteforce(&q, &tensors, input.dim)? } else { bcp_ratio(&q, &tensors, input.dim)? };
                let out = BcpOutput { surjective: rep.surjective, even_multiplicity: rep.even_multiplicity, connected: rep.connected, ratio };
                match cli.format {
                    Format::Json => emit(&to_json(&out)?)?,
                    Format::Csv => emit(&format!(
                        "surjective,even_multiplicity,connected,ratio\n{},{},{},{:.17e}\n",
                        out.surjective, out.even_multiplicity, out.connected, out.ratio
                    ))?,
                }
                return Ok(rep.valid());
            }
        },
        Command::GraphLemma { file, random } => match (file, random) {
            (Some(_), Some(_)) => bail!("give either a cycles file or --random, not both"),
            (None, Some(k)) => {
                let seed = cli.seed.unwrap_or(0);
                return report_batteries(cli, &[graph_lemma_battery(*k, RngStream::new(seed, 4))?]);
            }
            (None, None) => bail!("graph-lemma needs a cycles file or --random N"),
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let cycles: Vec<Vec<usize>> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let r = alt_cycle_component_bound_check(&cycles)?;
                match cli.format {
                    Format::Json => emit(&to_json(&r)?)?,
                    Format::Csv => emit(&format!(
                        "vertices,edges,cycles,c_red,c_blue,c_all,lhs,rhs,holds,equality\n{},{},{},{},{},{},{},{},{},{}\n",
                        r.vertices, r.edges, r.cycles, r.c_red, r.c_blue, r.c_all, r.lhs, r.rhs, r.holds, r.equality
                    ))?,
                }
                return Ok(r.holds);
            }
        },
    }
    Ok(true)
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => std::process::ExitCode::SUCCESS,
        Ok(false) => std::process::ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::from(2)
        }
    }
}
