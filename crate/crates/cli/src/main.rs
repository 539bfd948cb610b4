//! `prodnet`: run simulations, phase sweeps, equilibrium checks, degree
//! kinetics and statistics from the command line.
//!
//! Exit status is 0 on success, 1 on a configuration or usage error and 2
//! on a runtime failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use prodnet::equilibrium::solve_equilibrium;
use prodnet::experiment::{
    artifacts::{PHASE_GRID_FILE, CONFIG_FILE},
    load_run, sweep_phase_diagram_with, write_fits, write_phase_grid, write_run, ExperimentConfig, FitOutcome,
    FitsReport,
};
use prodnet::master_eq::{gain_rate, loss_rate, stationary_degree_distribution};
use prodnet::{init_economy, ProductionNetwork};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "prodnet", version, about = "Production-network economy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one economy and write its artifacts and fits.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to `out_dir` of the config, then `artifacts`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify every point of the config's sweep grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to PRODNET_WORKERS, then all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve the equilibrium of a fixed network.
    GeCheck {
        /// Parameters (the `params` section is used) and, without
        /// `--network`, the initial network law.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Network file with a `suppliers` list per firm, ids from 1.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stationary in-degree distribution of the degree master equation.
    MasterEq {
        #[arg(long, default_value_t = 5.0)]
        d_tilde: f64,
        #[arg(long, default_value_t = 500)]
        k_max: usize,
        /// Output CSV file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the fits of a run directory.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write `fits.json`; defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<prodnet::Error> for Failure {
    fn from(e: prodnet::Error) -> Self {
        match e {
            prodnet::Error::Config(_) | prodnet::Error::Domain { .. } => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(Failure::Runtime),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(runtime),
    }
}

fn fit_line<T>(name: &str, f: &FitOutcome<T>, show: impl Fn(&T) -> String) -> String {
    match f {
        FitOutcome::Fitted { fit } => format!("{name}: {}", show(fit)),
        FitOutcome::Failed { reason } => format!("{name}: not fitted ({reason})"),
    }
}

fn report_lines(r: &FitsReport) -> Vec<String> {
    let tail = |f: &prodnet::stats::PowerLawFit| {
        let p = f.p_value.map_or("n/a".to_string(), |p| format!("{p:.3}"));
        format!(
            "exponent {:.3} +- {:.3}, x_min {}, tail {} of {}, p {p}",
            f.exponent, f.exponent_se, f.x_min, f.n_tail, f.n
        )
    };
    let mut out = vec![
        fit_line("in-degree", &r.in_degree, tail),
        fit_line("in-weight", &r.in_weight, tail),
        fit_line("sales", &r.sales, tail),
    ];
    for g in &r.growth {
        out.push(fit_line(&format!("growth dt={}", g.dt), &g.laplace, |l| {
            format!("b+ {:.3}, b- {:.3}, Laplace preferred {}", l.b_plus, l.b_minus, l.laplace_preferred())
        }));
        out.push(fit_line(&format!("variance-size dt={}", g.dt), &g.variance_size, |v| {
            format!("beta {:.4} +- {:.4}, p {:.2e}", v.beta, v.beta_se, v.p_value)
        }));
        out.push(fit_line(&format!("gibrat dt={}", g.dt), &g.gibrat, |v| {
            format!("gamma {:.4} +- {:.4}", v.gamma, v.gamma_se)
        }));
    }
    out.push(fit_line("exits", &r.exits, |e| {
        format!(
            "{} exits over {} periods, exponential fit good {}, age tail decay {}",
            e.total_exits,
            e.periods,
            e.exponential_good,
            e.tail_decay.map_or("n/a".to_string(), |a| format!("{a:.4}"))
        )
    }));
    out
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config, seed)?;
    let dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("artifacts"));
    let run = prodnet::experiment::run_experiment(&cfg)?;
    let fits = run.fits();
    let written = write_run(&dir, &run, Some(&fits))?;
    println!(
        "{} periods, {} active firms; {} files in {}",
        cfg.horizon,
        run.final_state.network.active_count(),
        written.len(),
        dir.display()
    );
    for line in report_lines(&fits) {
        println!("  {line}");
    }
    Ok(())
}

fn cmd_sweep(config: &Path, seed: Option<u64>, out: Option<PathBuf>, workers: Option<usize>) -> Result<(), Failure> {
    let cfg = load_config(config, seed)?;
    let workers = match workers {
        Some(0) => return Err(Failure::Config(anyhow!("--workers must be positive"))),
        Some(n) => Some(n),
        None => prodnet::experiment::sweep::workers_from_env()?,
    };
    let dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("artifacts"));
    let points = sweep_phase_diagram_with(&cfg, workers)?;
    fs::create_dir_all(&dir).map_err(runtime)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()).map_err(runtime)?;
    write_phase_grid(&dir.join(PHASE_GRID_FILE), &points)?;
    for p in &points {
        let label = match &p.result {
            Ok(r) => r.label.to_string(),
            Err(e) => format!("error: {e}"),
        };
        println!(
            "theta {} tau_p {} tau_w {} p_new {} rho_chg {}: {label}",
            p.params.theta, p.params.tau_p, p.params.tau_w, p.params.p_new, p.params.rho_chg
        );
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    /// `suppliers[i]` lists the suppliers of firm `i + 1`.
    suppliers: Vec<Vec<usize>>,
}

fn read_network(path: &Path) -> Result<ProductionNetwork, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Config)?;
    let file: NetworkFile = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| Failure::Config(e.into()))?
    } else {
        toml::from_str(&text).map_err(|e| Failure::Config(e.into()))?
    };
    let m = file.suppliers.len();
    if m == 0 {
        return Err(Failure::Config(anyhow!("network has no firm")));
    }
    let mut suppliers = vec![Vec::new()];
    for (k, list) in file.suppliers.into_iter().enumerate() {
        let firm = k + 1;
        let mut seen = list.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != list.len() {
            return Err(Failure::Config(anyhow!("firm {firm} lists a supplier twice")));
        }
        if let Some(&bad) = list.iter().find(|&&j| j == 0 || j > m || j == firm) {
            return Err(Failure::Config(anyhow!("firm {firm} has invalid supplier {bad}")));
        }
        suppliers.push(list);
    }
    let mut active = vec![true; m + 1];
    active[0] = false;
    Ok(ProductionNetwork::from_suppliers(m, suppliers, active))
}

fn cmd_ge_check(
    config: Option<PathBuf>,
    network: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = match &config {
        Some(p) => load_config(p, seed)?,
        None => ExperimentConfig {
            seed: seed.unwrap_or(0),
            ..Default::default()
        },
    };
    let mut params = cfg.params.clone();
    let net = match network {
        Some(p) => {
            let net = read_network(&p)?;
            params.m = net.m();
            net
        }
        None => init_economy(&params, &cfg.init, cfg.seed)?.network,
    };
    params.validate()?;
    let solution = solve_equilibrium(&net, &params)?;
    let text = serde_json::to_string_pretty(&solution).map_err(runtime)? + "\n";
    emit(out.as_deref(), &text)
}

fn cmd_master_eq(d_tilde: f64, k_max: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let dist = stationary_degree_distribution(d_tilde, k_max)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "p_k", "f_k", "rho_k", "mu_k"]).map_err(runtime)?;
    for k in 0..=dist.k_max() {
        let mu = loss_rate(k, &dist).map_or(String::new(), |x| x.to_string());
        w.write_record([
            k.to_string(),
            dist.p[k].to_string(),
            dist.cdf[k].to_string(),
            gain_rate(k, &dist).to_string(),
            mu,
        ])
        .map_err(runtime)?;
    }
    let bytes = w.into_inner().map_err(|e| runtime(anyhow!(e.to_string())))?;
    emit(out.as_deref(), &String::from_utf8(bytes).map_err(runtime)?)
}

fn cmd_stats(input: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let run = load_run(input)?;
    let fits = run.fits();
    let dir = out.unwrap_or_else(|| input.to_path_buf());
    fs::create_dir_all(&dir).map_err(runtime)?;
    let path = write_fits(&dir, &fits)?;
    println!("fits of {} (t = {}) in {}", input.display(), run.manifest.final_t, path.display());
    for line in report_lines(&fits) {
        println!("  {line}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Sweep {
            config,
            seed,
            out,
            workers,
        } => cmd_sweep(&config, seed, out, workers),
        Command::GeCheck {
            config,
            network,
            seed,
            out,
        } => cmd_ge_check(config, network, seed, out),
        Command::MasterEq { d_tilde, k_max, out } => cmd_master_eq(d_tilde, k_max, out),
        Command::Stats { input, out } => cmd_stats(&input, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
