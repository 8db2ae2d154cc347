use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use classplay_core::scenario::{
    load_scenario, sample_scenario, validate_scenario, LoadError, Scenario,
};
use classplay_core::survey::{read_csv, recode, report, score, write_scores_csv, SubscaleMap};
use classplay_server::{AdminClient, Server, ServerConfig};
use classplay_sim::{run_simulation, Fault, ProfileSpec, SimConfig, TransportKind};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario file; the built-in sample when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    players: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bot behavior, `[<player>=]<kind>[:k=v,...]`, e.g. `s03=slow:min=8000,max=30000`.
    #[arg(long = "profile")]
    profiles: Vec<ProfileSpec>,
    /// Injected fault: `drop:<player>@<Phase>[+ms|+never]`, `crash@<Phase>` or `dup:<player>`.
    #[arg(long = "fault")]
    faults: Vec<Fault>,
    /// Write the run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the transcript as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "in-process")]
    transport: TransportArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum TransportArg {
    InProcess,
    Tcp,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Scenario file; the built-in sample when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Class sizes: an inclusive range `6..36` or a list `6,9,12`.
    #[arg(long, default_value = "6..36")]
    sizes: String,
    /// Seeds 0..k.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Write the sweep report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn read_scenario(path: Option<&Path>) -> Result<Scenario> {
    let Some(path) = path else {
        return Ok(sample_scenario());
    };
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_scenario(&bytes).with_context(|| format!("loading {}", path.display()))
}

/// Prints one diagnostic per line; load failures are reported as STRUCTURE errors.
pub fn validate(file: &Path) -> Result<bool> {
    let bytes = fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let scenario = match load_scenario(&bytes) {
        Ok(s) => s,
        Err(e) => {
            let location = match &e {
                LoadError::Syntax { line, column, .. } => {
                    format!("{}:{line}:{column}", file.display())
                }
                LoadError::Reference { location, .. } => location.clone(),
                LoadError::DuplicateId { kind, .. } => format!("{kind}s"),
            };
            println!("ERROR STRUCTURE {location}: {e}");
            return Ok(false);
        }
    };
    let report = validate_scenario(&scenario);
    for d in &report.diagnostics {
        println!("{d}");
    }
    Ok(report.ok)
}

pub fn serve(config: Option<&Path>) -> Result<bool> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    let mut config = match config {
        Some(path) => ServerConfig::load(path)?,
        None => ServerConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.listen)
            .await
            .with_context(|| format!("binding {}", config.listen))?;
        let rooms = config.rooms.clone();
        let server = Server::new(config)?;
        let recovered = server.recover().await?;
        // Rooms from the config file are opened only on a fresh start; after
        // a restart they come back from their checkpoints instead.
        if recovered.is_empty() {
            for spec in &rooms {
                let code = server.open_spec(spec).await?;
                println!("room {code} ({} players)", spec.roster.len());
            }
        } else {
            for code in &recovered {
                println!("room {code} (recovered)");
            }
        }
        tracing::info!(addr = %listener.local_addr()?, "listening");
        tokio::select! {
            r = server.serve(listener) => r?,
            _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
        }
        Ok(true)
    })
}

pub fn rooms(addr: &str) -> Result<bool> {
    let runtime = tokio::runtime::Runtime::new()?;
    let rooms = runtime.block_on(AdminClient::new(addr).rooms())?;
    for r in rooms {
        println!(
            "{}\t{}\t{}{}\t{}/{} connected\tevent {}\t{} checkpoints",
            r.join_code,
            r.scenario_id,
            r.phase,
            if r.paused { " (paused)" } else { "" },
            r.connected.len(),
            r.players,
            r.event_seq,
            r.checkpoints.len(),
        );
    }
    Ok(true)
}

pub fn restore(addr: &str, room: &str, checkpoint: &str) -> Result<bool> {
    let runtime = tokio::runtime::Runtime::new()?;
    let info = runtime.block_on(AdminClient::new(addr).restore(room, checkpoint))?;
    println!(
        "room {room} restored to {} (event {}, {})",
        info.checkpoint, info.event_seq, info.phase
    );
    Ok(true)
}

pub fn sim(args: &SimArgs) -> Result<bool> {
    let scenario = read_scenario(args.scenario.as_deref())?;
    let mut config = SimConfig::new(args.players, args.seed);
    config.profiles = args.profiles.clone();
    config.faults = args.faults.clone();
    config.transport = match args.transport {
        TransportArg::InProcess => TransportKind::InProcess,
        TransportArg::Tcp => TransportKind::Tcp,
    };
    let (transcript, r) = run_simulation(&scenario, &config)?;
    println!("transcript_digest {}", r.transcript_digest);
    println!("state_digest {}", r.state_digest);
    println!(
        "{} players, seed {}, {}: {} at {} ms virtual, {} frames in, {} out",
        r.players,
        r.seed,
        r.transport,
        if r.completed { "completed" } else { "stopped" },
        r.virtual_ms,
        r.frames_in,
        r.frames_out,
    );
    for v in &r.violations {
        println!("violation: {v}");
    }
    if let Some(f) = &r.engine_fault {
        println!("engine fault: {f}");
    }
    if let Some(d) = &r.deadlock {
        println!(
            "deadlock in {} at {} ms, waiting on {:?}",
            d.phase, d.at, d.waiting
        );
    }
    if let Some(path) = &args.report {
        fs::write(path, serde_json::to_vec_pretty(&r)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.transcript {
        fs::write(path, transcript.to_jsonl())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(r.ok())
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().context("range start")?;
        let b: usize = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .context("range end")?;
        if a > b {
            bail!("empty size range {text}");
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("size \"{s}\"")))
        .collect()
}

pub fn sweep(args: &SweepArgs) -> Result<bool> {
    let scenario = read_scenario(args.scenario.as_deref())?;
    let sizes = parse_sizes(&args.sizes)?;
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let report = classplay_sim::sweep(&scenario, &SimConfig::new(0, 0), &sizes, &seeds)?;
    for r in report.failures() {
        let why = r
            .error
            .clone()
            .or_else(|| r.engine_fault.clone())
            .or_else(|| r.violations.first().cloned())
            .unwrap_or_else(|| {
                if r.no_matching_entry > 0 {
                    "no matching pair-code entry".into()
                } else {
                    "did not complete".into()
                }
            });
        println!("FAIL {} players, seed {}: {why}", r.players, r.seed);
    }
    let failed = report.failures().count();
    println!(
        "{} runs, {} failed, {} ms",
        report.runs.len(),
        failed,
        report.elapsed_ms
    );
    if let Some(path) = &args.report {
        fs::write(path, serde_json::to_vec_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(report.ok())
}

fn item_map(path: Option<&Path>) -> Result<SubscaleMap> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(SubscaleMap::from_json(&text)?)
        }
        None => Ok(SubscaleMap::default()),
    }
}

fn read_matrix(path: &Path) -> Result<classplay_core::survey::SurveyMatrix> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_csv(file)?)
}

pub fn survey_score(csv: &Path, items: Option<&Path>) -> Result<bool> {
    let map = item_map(items)?;
    let m = recode(&read_matrix(csv)?, &map);
    let stdout = std::io::stdout();
    write_scores_csv(stdout.lock(), &score(&m, &map), &map)?;
    Ok(true)
}

pub fn survey_report(csv: &Path, items: Option<&Path>) -> Result<bool> {
    let map = item_map(items)?;
    let r = report(&read_matrix(csv)?, &map);
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &r)?;
    writeln!(out)?;
    Ok(true)
}
