use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use skyway::bench::{run_bench, write_report, write_traces_jsonl, RequestResult};
use skyway::composer::{compose, Mission, PretrainedFleet, Strategy};
use skyway::config::Config;
use skyway::failure::InjectionConfig;
use skyway::fed::{config_hash, train_corpus, write_loss_csv, Checkpoint, CorpusTrainConfig, Target};
use skyway::flightlog::{generate_synthetic_flights, read_flight_csv, write_flight_csv, write_series_jsonl, DriftConfig};
use skyway::net::{
    generate_network, generate_requests, load_network, read_requests, write_edges, write_nodes, write_requests,
    DeliveryRequest, SkywayNetwork,
};

#[derive(Parser)]
#[command(name = "skyway", version, about = "Failure-sentient swarm drone delivery: composition, simulation and benchmarks")]
struct Cli {
    /// TOML config file; missing keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random planar skyway network (edges.csv and nodes.csv).
    GenNetwork {
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "network")]
        out: PathBuf,
    },
    /// Draw delivery requests over a network as JSON lines.
    GenRequests {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic flight logs (one CSV per flight plus series.jsonl).
    GenLogs {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shift the newest flights' statistics.
        #[arg(long)]
        drift: bool,
        #[arg(long, default_value = "logs")]
        out: PathBuf,
    },
    /// Federated training over a directory of flight CSVs.
    Train {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value_t = 4)]
        drones: usize,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long)]
        epochs: Option<usize>,
        /// History weight of new data.
        #[arg(long)]
        weight: Option<usize>,
        #[arg(long, default_value = "model")]
        out: PathBuf,
    },
    /// Run one request with one strategy and write its trace.
    Simulate {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        requests: PathBuf,
        /// Request id; the first request when absent.
        #[arg(long)]
        request: Option<String>,
        #[arg(long, default_value = "heuristic")]
        strategy: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tune: TuneArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run strategies over a request corpus and write metrics and traces.
    Bench {
        #[command(flatten)]
        net: NetArgs,
        /// Requests as JSON lines; generated from the config when absent.
        #[arg(long)]
        requests: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
        /// Repetition seeds, comma separated.
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        #[command(flatten)]
        tune: TuneArgs,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct NetArgs {
    /// Directory with edges.csv (and optionally nodes.csv), or an edge list
    /// file. Generated from the config when absent.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Node file for an edge list given by path.
    #[arg(long)]
    nodes: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    lookahead_depth: Option<usize>,
    #[arg(long)]
    exhaustive_cap: Option<usize>,
    /// Injection settings (TOML or JSON).
    #[arg(long)]
    inject: Option<PathBuf>,
}

impl TuneArgs {
    fn apply(&self, cfg: &mut Config) -> Result<()> {
        if let Some(d) = self.lookahead_depth {
            cfg.composer.lookahead_depth = d;
        }
        if let Some(c) = self.exhaustive_cap {
            cfg.composer.exhaustive_cap = c;
        }
        if let Some(p) = &self.inject {
            cfg.injection = load_injection(p)?;
        }
        cfg.validate()?;
        Ok(())
    }
}

fn load_injection(path: &Path) -> Result<InjectionConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: InjectionConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_net(args: &NetArgs, cfg: &Config) -> Result<SkywayNetwork> {
    let Some(path) = &args.network else {
        return Ok(generate_network(&cfg.network)?);
    };
    let (edges, nodes) = if path.is_dir() {
        let n = path.join("nodes.csv");
        (path.join("edges.csv"), args.nodes.clone().or(n.exists().then_some(n)))
    } else {
        (path.clone(), args.nodes.clone())
    };
    let e = File::open(&edges).with_context(|| format!("opening {}", edges.display()))?;
    let n = match &nodes {
        Some(p) => Some(File::open(p).with_context(|| format!("opening {}", p.display()))?),
        None => None,
    };
    load_network(e, n, cfg.network.pads).with_context(|| format!("loading {}", edges.display()))
}

fn load_requests(path: &Path) -> Result<Vec<DeliveryRequest>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_requests(f).with_context(|| format!("reading {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::GenNetwork { nodes, seed, out } => {
            if let Some(n) = nodes {
                cfg.network.nodes = n;
            }
            if let Some(s) = seed {
                cfg.network.seed = s;
            }
            let net = generate_network(&cfg.network)?;
            std::fs::create_dir_all(&out)?;
            let mut e = create(&out.join("edges.csv"))?;
            write_edges(&net, &mut e)?;
            e.flush()?;
            let mut n = create(&out.join("nodes.csv"))?;
            write_nodes(&net, &mut n)?;
            n.flush()?;
            log::info!("wrote {} nodes, {} segments to {}", net.len(), net.segments().len(), out.display());
        }
        Command::GenRequests { net, count, seed, out } => {
            let network = load_net(&net, &cfg)?;
            let r = &cfg.requests;
            let reqs = generate_requests(
                &network,
                count.unwrap_or(r.count),
                seed.unwrap_or(r.seed),
                r.payloads,
                r.window,
            )?;
            let mut w = output(out.as_deref())?;
            write_requests(&reqs, &mut w)?;
            w.flush()?;
        }
        Command::GenLogs { count, seed, drift, out } => {
            let d = if drift { DriftConfig::on() } else { DriftConfig::default() };
            let synth = skyway::flightlog::SyntheticConfig::default();
            let flights = generate_synthetic_flights(count, seed, &d, &synth);
            std::fs::create_dir_all(&out)?;
            for (i, f) in flights.iter().enumerate() {
                let mut w = create(&out.join(format!("flight_{i:04}.csv")))?;
                write_flight_csv(f, &mut w)?;
                w.flush()?;
            }
            let series: Vec<_> = flights.iter().map(|f| f.to_series()).collect();
            let mut w = create(&out.join("series.jsonl"))?;
            write_series_jsonl(&series, &mut w)?;
            w.flush()?;
            log::info!("wrote {count} flights to {}", out.display());
        }
        Command::Train { logs, drones, rounds, epochs, weight, out } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&logs)
                .with_context(|| format!("listing {}", logs.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            files.sort();
            if files.is_empty() {
                bail!("no flight CSV files in {}", logs.display());
            }
            let mut series = Vec::new();
            for p in &files {
                let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                series.push(read_flight_csv(f).with_context(|| format!("reading {}", p.display()))?.to_series());
            }
            let mut tc = CorpusTrainConfig { drones, rounds, ..Default::default() };
            if let Some(e) = epochs {
                tc.train.epochs = e;
            }
            if let Some(w) = weight {
                tc.train.history_weight = w;
            }
            let result = train_corpus(&series, &tc)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("scaler.json"), serde_json::to_string_pretty(&result.scaler.to_json())?)?;
            for (target, name) in [(Target::Ttf, "ft"), (Target::Uptime, "uptime")] {
                let ck = Checkpoint {
                    target,
                    model: result.models.get(target).clone(),
                    scale: tc.scale,
                    scaler: "scaler.json".into(),
                    config_hash: config_hash(&tc.train),
                };
                std::fs::write(out.join(format!("{name}.json")), serde_json::to_string_pretty(&ck)?)?;
            }
            let mut w = create(&out.join("loss.csv"))?;
            write_loss_csv(&result.loss, &mut w)?;
            w.flush()?;
            log::info!("trained on {} flights, wrote {}", series.len(), out.display());
        }
        Command::Simulate { net, requests, request, strategy, seed, tune, out } => {
            tune.apply(&mut cfg)?;
            let network = load_net(&net, &cfg)?;
            let reqs = load_requests(&requests)?;
            let req = match &request {
                Some(id) => reqs.iter().find(|r| &r.id == id).with_context(|| format!("no request '{id}'"))?,
                None => reqs.first().context("request file is empty")?,
            };
            let composer = cfg.composer_config();
            let fleet = PretrainedFleet::train(seed, &composer.drone, &composer.predictor)?;
            let mission = Mission::new(&network, req, &composer, Some(&fleet), &cfg.injection, seed)?;
            let start = Instant::now();
            let trace = compose(&mission, strategy);
            let result = RequestResult { seed, trace, execution_time: start.elapsed().as_secs_f64() };
            let mut w = output(out.as_deref())?;
            write_traces_jsonl(std::slice::from_ref(&result), &mut w)?;
            w.flush()?;
        }
        Command::Bench { net, requests, strategies, seed, tune, workers, out } => {
            tune.apply(&mut cfg)?;
            let network = load_net(&net, &cfg)?;
            let reqs = match &requests {
                Some(p) => load_requests(p)?,
                None => {
                    let r = &cfg.requests;
                    generate_requests(&network, r.count, r.seed, r.payloads, r.window)?
                }
            };
            let mut bc = cfg.bench_config();
            if let Some(s) = strategies {
                bc.strategies = s;
            }
            if let Some(s) = seed {
                bc.seeds = s;
            }
            if let Some(w) = workers {
                bc.workers = w;
            }
            let report = run_bench(&network, &reqs, &bc)?;
            write_report(&report, &out)?;
            for r in &report.rows {
                println!(
                    "{:<10} seed {:<3} successful {}/{} on-time {} mean delivery {:.1} s, mean execution {:.4} s",
                    r.strategy.as_str(),
                    r.seed,
                    r.successful_requests,
                    r.total_requests,
                    r.on_time_requests,
                    r.mean_delivery_time,
                    r.mean_execution_time
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
