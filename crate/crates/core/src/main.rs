use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gasnet::error::{Error, Result};
use gasnet::experiments::single_pipe::{EosChoice, Resolution};
use gasnet::experiments::{
    network_step_plan, run_convergence_study, run_fast_transient, run_five_node_network, run_network_observed,
    run_slow_transient, run_temperature_effect, ConvergenceConfig, FastTransientConfig, FiveNodeConfig,
    SlowTransientConfig, TemperatureConfig,
};
use gasnet::io::{load_config, sha256_hex, write_json, InitialState, NetworkConfig, RunSummary, SeriesWriter};
use gasnet::network::steady::steady_state_solve;
use gasnet::network::NodeKind;

#[derive(Parser, Debug)]
#[command(name = "gasnet", version, about = "Transient gas pipeline network simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Time step, s (default: largest stable step dividing the cadence)
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Target cell size, m
    #[arg(long, global = true)]
    dx: Option<f64>,
    /// End time, s
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sampling interval, s
    #[arg(long, global = true)]
    cadence: Option<f64>,
    #[arg(long = "cfl-safety", global = true, default_value_t = 0.9)]
    cfl_safety: f64,
    /// Reject unknown config keys
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a network described by a config file
    Run { config: PathBuf },
    /// Grid-refinement study on a single pipe
    Convergence,
    /// Outlet flux steps on a 20 km pipe
    FastTransient {
        #[arg(long, default_value = "cnga")]
        eos: EosChoice,
    },
    /// Slow harmonic inlet pressure on a 50 km pipe
    SlowTransient {
        #[arg(long, default_value = "cnga")]
        eos: EosChoice,
    },
    /// Warm inlet section on a 100 km pipe
    Temperature {
        /// Temperature decay rate, 1/m
        #[arg(long, default_value_t = 1e-3)]
        rate: f64,
    },
    /// One day on the five-node test network
    FiveNode,
    /// Check a config file
    Validate { config: PathBuf },
    /// Steady state of a configured network
    Steady { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("reason={}", e.reason());
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Run { config } => run(config, g),
        Command::Convergence => convergence(g),
        Command::FastTransient { eos } => fast_transient(*eos, g),
        Command::SlowTransient { eos } => slow_transient(*eos, g),
        Command::Temperature { rate } => temperature(*rate, g),
        Command::FiveNode => five_node(g),
        Command::Validate { config } => {
            load(config, g)?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Steady { config } => steady(config, g),
    }
}

fn load(path: &Path, g: &Global) -> Result<(NetworkConfig, String)> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = load_config(path, g.strict)?;
    Ok((cfg, sha256_hex(&bytes)))
}

fn out_dir(g: &Global, default: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn debug_sha(value: &impl std::fmt::Debug) -> String {
    sha256_hex(format!("{value:?}").as_bytes())
}

fn resolution(g: &Global, base: Resolution) -> Resolution {
    Resolution {
        dx: g.dx.unwrap_or(base.dx),
        cfl_safety: g.cfl_safety,
        cadence: g.cadence.unwrap_or(base.cadence),
        dt: g.dt.or(base.dt),
    }
}

fn run(path: &Path, g: &Global) -> Result<()> {
    let (mut cfg, sha) = load(path, g)?;
    let sim = &mut cfg.simulation;
    sim.dt = g.dt.or(sim.dt);
    sim.dx_target = g.dx.unwrap_or(sim.dx_target);
    sim.t_end = g.t_end.unwrap_or(sim.t_end);
    sim.cadence = g.cadence.unwrap_or(sim.cadence);
    if g.cfl_safety != 0.9 {
        sim.cfl_safety = g.cfl_safety;
    }
    cfg.validate()?;
    let sim = cfg.simulation.clone();
    let dir = out_dir(g, &sim.output);

    let mut net = cfg.build_network()?;
    if sim.initial == InitialState::Steady {
        let s = net.initialize_steady(0.0)?;
        log::info!("steady start after {} Newton iterations", s.iterations);
    }
    let (dt, every) = network_step_plan(&net, sim.dt, sim.cfl_safety, sim.cadence)?;
    log::info!("dt = {dt} s, {} pipes, output in {}", net.pipes.len(), dir.display());
    let mut writer = SeriesWriter::create(dir.join("series.csv"))?;
    let result = run_network_observed(&mut net, dt, every, sim.t_end, |t, net, entry| {
        writer.network_sample(t, net, entry)
    });
    let run = result?;
    RunSummary::new(sha, run.steps, Some(&run.ledger), run.wall_seconds)
        .with("dt", run.dt)
        .with("max_balance_ratio", run.max_balance_ratio)
        .write(dir.join("summary.json"))
}

fn steady(path: &Path, g: &Global) -> Result<()> {
    let (cfg, sha) = load(path, g)?;
    let start = Instant::now();
    let net = cfg.build_network()?;
    let s = steady_state_solve(&net, 0.0)?;
    let nodes: Vec<_> = net
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| json!({"id": n.id, "slack": matches!(n.kind, NodeKind::Slack(_)), "pressure": s.node_pressures[k]}))
        .collect();
    let pipes: Vec<_> = net
        .pipes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            json!({
                "id": p.label,
                "flow": s.mass_flow(&net, k),
                "pressure_in": s.inlet_pressures[k],
                "pressure_out": s.outlet_pressures[k],
            })
        })
        .collect();
    let doc = json!({"iterations": s.iterations, "residual": s.residual, "nodes": nodes, "pipes": pipes});
    println!("{}", serde_json::to_string_pretty(&doc).expect("json value serialises"));
    let dir = out_dir(g, "out/steady");
    write_json(dir.join("steady.json"), &doc)?;
    RunSummary::new(sha, 0, None, start.elapsed().as_secs_f64())
        .with("iterations", s.iterations)
        .write(dir.join("summary.json"))
}

fn convergence(g: &Global) -> Result<()> {
    let cfg = ConvergenceConfig {
        dt0: g.dt.unwrap_or(1.0),
        ..ConvergenceConfig::default()
    };
    let start = Instant::now();
    let report = run_convergence_study(&cfg)?;
    let dir = out_dir(g, "out/convergence");
    write_json(dir.join("report.json"), &report)?;
    println!(
        "last two   rho {:.4}  p {:.4}  phi {:.4}",
        report.rates.last_two[0], report.rates.last_two[1], report.rates.last_two[2]
    );
    println!(
        "first-last rho {:.4}  p {:.4}  phi {:.4}",
        report.rates.first_last[0], report.rates.first_last[1], report.rates.first_last[2]
    );
    RunSummary::new(debug_sha(&cfg), 0, None, start.elapsed().as_secs_f64())
        .with("rates", &report.rates)
        .write(dir.join("summary.json"))
}

fn fast_transient(eos: EosChoice, g: &Global) -> Result<()> {
    let base = FastTransientConfig::default();
    let cfg = FastTransientConfig {
        eos,
        t_end: g.t_end.unwrap_or(base.t_end),
        resolution: resolution(g, base.resolution),
        ..base
    };
    let start = Instant::now();
    let s = run_fast_transient(&cfg)?;
    let dir = out_dir(g, &format!("out/fast_transient_{eos}"));
    let mut w = SeriesWriter::create(dir.join("series.csv"))?;
    w.pipe_series(&s)?;
    RunSummary::new(debug_sha(&cfg), s.steps, Some(&s.ledger), start.elapsed().as_secs_f64())
        .with("eos", eos)
        .with("dt", s.dt)
        .with(
            "max_outlet_velocity",
            gasnet::experiments::PipeSeries::max_abs(&s.right.v),
        )
        .write(dir.join("summary.json"))
}

fn slow_transient(eos: EosChoice, g: &Global) -> Result<()> {
    let base = SlowTransientConfig::default();
    let periods = match g.t_end {
        Some(t) => ((t / base.period()).round() as u32).max(1),
        None => base.periods,
    };
    let cfg = SlowTransientConfig {
        eos,
        periods,
        resolution: resolution(g, base.resolution),
        ..base
    };
    let start = Instant::now();
    let r = run_slow_transient(&cfg)?;
    let dir = out_dir(g, &format!("out/slow_transient_{eos}"));
    let mut w = SeriesWriter::create(dir.join("series.csv"))?;
    w.pipe_series(&r.series)?;
    RunSummary::new(
        debug_sha(&cfg),
        r.series.steps,
        Some(&r.series.ledger),
        start.elapsed().as_secs_f64(),
    )
    .with("eos", eos)
    .with("dt", r.series.dt)
    .with("limit_cycle_rms", r.limit_cycle_rms)
    .write(dir.join("summary.json"))
}

fn temperature(rate: f64, g: &Global) -> Result<()> {
    let base = TemperatureConfig::default();
    let cfg = TemperatureConfig {
        decay_rate: rate,
        t_end: g.t_end.unwrap_or(base.t_end),
        resolution: resolution(g, base.resolution),
        ..base
    };
    let start = Instant::now();
    let s = run_temperature_effect(&cfg)?;
    let dir = out_dir(g, &format!("out/temperature_{rate:e}"));
    let mut w = SeriesWriter::create(dir.join("series.csv"))?;
    w.pipe_series(&s)?;
    RunSummary::new(debug_sha(&cfg), s.steps, Some(&s.ledger), start.elapsed().as_secs_f64())
        .with("decay_rate", rate)
        .with("dt", s.dt)
        // the outlet rate is a mass flux, not a density
        .with("outlet_flux_units", "kg/(m^2 s)")
        .write(dir.join("summary.json"))
}

fn five_node(g: &Global) -> Result<()> {
    let base = FiveNodeConfig::default();
    let cfg = FiveNodeConfig {
        dx: g.dx.unwrap_or(base.dx),
        dt: g.dt.or(if g.dx.is_some() { None } else { base.dt }),
        cfl_safety: g.cfl_safety,
        t_end: g.t_end.unwrap_or(base.t_end),
        cadence: g.cadence.unwrap_or(base.cadence),
        ..base
    };
    let r = run_five_node_network(&cfg)?;
    let dir = out_dir(g, "out/five_node");
    let mut w = SeriesWriter::create(dir.join("series.csv"))?;
    w.network_run(&r.run)?;
    let mass0 = r.run.ledger.entries.first().map_or(0.0, |e| e.mass);
    RunSummary::new(debug_sha(&cfg), r.run.steps, Some(&r.run.ledger), r.run.wall_seconds)
        .with("dt", r.run.dt)
        .with("initial_mass_kg", mass0)
        .with("max_balance_ratio", r.run.max_balance_ratio)
        .with("steady_iterations", r.steady.iterations)
        .write(dir.join("summary.json"))
}
