use std::fs;
use std::io;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use affordsim::agent::{
    run_episode, serve_lines, serve_tcp, AccuracyMap, AgentConfig, Endpoint, EpisodeRun, PolicyKind, ReasonerConfig,
    StubMode, DEFAULT_TIMEOUT,
};
use affordsim::eval::{
    aggregate, episode_metrics, read_results, render_report, results_to_jsonl, Grouping, ReportFormat,
};
use affordsim::genbench::{build_dataset, load_config, load_dataset, write_dataset, DatasetConfig, GenError};
use affordsim::sim::{reset_with_budget, TrajectoryRecord, DEFAULT_MAX_STEPS};
use affordsim::task::Partition;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "affordsim", version, about = "Household benchmark with dynamic object affordances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a JSON config.
    Gen {
        /// Dataset config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a policy over a dataset.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value = "oracle")]
        reasoner: ReasonerArg,
        /// Uniform accuracy, or a JSON accuracy map file. Defaults to the
        /// reference per-class accuracies.
        #[arg(long)]
        accuracy: Option<String>,
        /// `tcp://host:port`, `host:port` or `cmd:program args`.
        #[arg(long, env = "AFFORDSIM_ENDPOINT")]
        endpoint: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_millis() as u64)]
        timeout_ms: u64,
        /// Send the revealed observation to the external reasoner.
        #[arg(long)]
        share_latent: bool,
        /// Seed for the noisy reasoner.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u32,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Only run episodes of this partition.
        #[arg(long)]
        partition: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a results file into a report.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
        /// Comma-separated dimensions from split, partition, mode, difficulty.
        #[arg(long, default_value = "split,mode,difficulty")]
        group: String,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a trajectory log and check every outcome and digest.
    Replay {
        #[arg(long)]
        episode: String,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = ".")]
        dataset: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u32,
    },
    /// Serve reasoner requests for protocol testing.
    StubReasoner {
        #[arg(long, default_value = "oracle")]
        mode: String,
        /// `host:port`, or `stdio` for standard pipes.
        #[arg(long, default_value = "stdio")]
        listen: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Vanilla,
    Adapt,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReasonerArg {
    Oracle,
    Noisy,
    External,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

type Outcome = Result<(), Failure>;

fn validation(e: impl ToString) -> Failure {
    Failure::Validation(e.to_string())
}

fn runtime(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn gen_failure(e: GenError) -> Failure {
    match e {
        GenError::Config(_) | GenError::Json { .. } => validation(e),
        GenError::Io { ref source, .. } if source.kind() == io::ErrorKind::NotFound => validation(e),
        _ => runtime(e),
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn gen(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> Outcome {
    let mut cfg = match config {
        Some(p) => load_config(&p).map_err(gen_failure)?,
        None => DatasetConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dataset = build_dataset(&cfg).map_err(gen_failure)?;
    write_dataset(&dataset, &out).map_err(runtime)?;
    let t = &dataset.manifest.totals;
    println!(
        "event=generated out={} episodes={} static={} dynamic={} scenes={} annotations={}",
        out.display(),
        t.episodes,
        t.static_episodes,
        t.dynamic,
        t.scenes,
        t.annotations
    );
    Ok(())
}

fn accuracy_map(arg: Option<&str>) -> Result<AccuracyMap, Failure> {
    let map = match arg {
        None => AccuracyMap::reference(),
        Some(s) => match s.parse::<f64>() {
            Ok(a) => AccuracyMap::uniform(a),
            Err(_) => {
                let text = fs::read_to_string(s).map_err(|e| validation(format!("{s}: {e}")))?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de).map_err(|e| validation(format!("{s}: {e}")))?
            }
        },
    };
    map.validate().map_err(validation)?;
    Ok(map)
}

#[allow(clippy::too_many_arguments)]
fn run(
    dataset: PathBuf,
    policy: PolicyArg,
    reasoner: ReasonerArg,
    accuracy: Option<String>,
    endpoint: Option<String>,
    timeout_ms: u64,
    share_latent: bool,
    seed: u64,
    max_steps: u32,
    parallel: usize,
    partition: Option<String>,
    out: PathBuf,
) -> Outcome {
    let reasoner_cfg = match reasoner {
        ReasonerArg::Oracle => ReasonerConfig::Oracle,
        ReasonerArg::Noisy => ReasonerConfig::Noisy { accuracy: accuracy_map(accuracy.as_deref())?, seed },
        ReasonerArg::External => {
            let e = endpoint.ok_or_else(|| validation("the external reasoner requires --endpoint"))?;
            ReasonerConfig::External {
                endpoint: Endpoint::parse(&e).map_err(validation)?,
                timeout: Duration::from_millis(timeout_ms),
                share_latent,
            }
        }
    };
    reasoner_cfg.build().map_err(validation)?;
    let partition = match partition {
        Some(p) => Some(Partition::parse(&p).ok_or_else(|| validation(format!("unknown partition `{p}`")))?),
        None => None,
    };
    if parallel == 0 {
        return Err(validation("--parallel must be at least 1"));
    }
    let policy = match policy {
        PolicyArg::Vanilla => PolicyKind::Vanilla,
        PolicyArg::Adapt => PolicyKind::Adapt,
    };
    let agent = AgentConfig { max_steps, ..AgentConfig::with_policy(policy) };
    let data = load_dataset(&dataset).map_err(gen_failure)?;
    let episodes: Vec<_> = data.episodes.iter().filter(|e| partition.is_none_or(|p| e.partition == p)).collect();
    println!("event=start episodes={} policy={} parallel={parallel}", episodes.len(), policy.as_str());

    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallel).build().map_err(runtime)?;
    let runs: Vec<Result<EpisodeRun, String>> = pool.install(|| {
        episodes
            .par_iter()
            .map(|spec| {
                let scene =
                    data.scene_of(spec).ok_or_else(|| format!("{}: unknown scene {}", spec.id, spec.scene_id))?;
                let mut r = reasoner_cfg.build()?;
                run_episode(scene, spec, &agent, r.as_mut()).map_err(|e| format!("{}: {e}", spec.id))
            })
            .collect()
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>, _>>().map_err(runtime)?;
    runs.sort_by(|a, b| a.result.episode_id.cmp(&b.result.episode_id));

    let traj_dir = out.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(|e| runtime(format!("{}: {e}", traj_dir.display())))?;
    for r in &runs {
        let text: String = r.trajectory.iter().map(|t| t.to_json_line() + "\n").collect();
        write_file(&traj_dir.join(format!("{}.jsonl", r.result.episode_id)), &text)?;
        let m = episode_metrics(&r.result);
        println!(
            "event=episode id={} success={} gc={:.4} steps={} expert={} abort={}",
            r.result.episode_id,
            r.result.success,
            m.gc,
            r.result.agent_steps,
            r.result.expert_steps,
            serde_json::to_value(r.result.abort).map_err(runtime)?.as_str().unwrap_or("")
        );
    }
    let results: Vec<_> = runs.into_iter().map(|r| r.result).collect();
    let path = out.join("results.jsonl");
    write_file(&path, &results_to_jsonl(&results))?;
    let successes = results.iter().filter(|r| r.success).count();
    println!("event=done episodes={} successes={successes} results={}", results.len(), path.display());
    Ok(())
}

fn grouping(spec: &str) -> Result<Grouping, Failure> {
    let mut g = Grouping { split: false, partition: false, mode: false, difficulty: false };
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part {
            "split" => g.split = true,
            "partition" => g.partition = true,
            "mode" => g.mode = true,
            "difficulty" => g.difficulty = true,
            other => return Err(validation(format!("unknown grouping dimension `{other}`"))),
        }
    }
    Ok(g)
}

fn eval(results: PathBuf, format: String, group: String, out: Option<PathBuf>) -> Outcome {
    let format = ReportFormat::parse(&format).ok_or_else(|| validation(format!("unknown format `{format}`")))?;
    let grouping = grouping(&group)?;
    let results = read_results(&results).map_err(validation)?;
    let report = aggregate(&results, grouping).map_err(validation)?;
    let text = render_report(&report, format).map_err(runtime)?;
    match out {
        Some(p) => {
            write_file(&p, &text)?;
            println!("event=report out={} cells={}", p.display(), report.cells.len());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn replay(episode: String, trace: PathBuf, dataset: PathBuf, max_steps: u32) -> Outcome {
    let data = load_dataset(&dataset).map_err(gen_failure)?;
    let spec = data
        .episodes
        .iter()
        .find(|e| e.id == episode)
        .ok_or_else(|| validation(format!("episode `{episode}` is not in the dataset")))?;
    let scene = data.scene_of(spec).ok_or_else(|| validation(format!("unknown scene {}", spec.scene_id)))?;
    let text = fs::read_to_string(&trace).map_err(|e| validation(format!("{}: {e}", trace.display())))?;
    let mut state = reset_with_budget(scene, spec, max_steps).map_err(runtime)?;
    let mut n = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: TrajectoryRecord =
            serde_json::from_str(line).map_err(|e| validation(format!("{} line {}: {e}", trace.display(), i + 1)))?;
        let t = state.step_count;
        let outcome = state.step(&rec.action);
        let digest = state.observe(false).digest();
        if rec.t != t || rec.outcome != outcome || rec.observation_digest != digest {
            return Err(runtime(format!("trajectory diverges at line {} (t={t}, outcome {outcome:?})", i + 1)));
        }
        n += 1;
    }
    let score = state.score_goal().map_err(runtime)?;
    println!(
        "event=replay episode={episode} records={n} steps={} success={} gc={}/{}",
        state.step_count, score.success, score.satisfied, score.total
    );
    Ok(())
}

fn stub(mode: String, listen: String) -> Outcome {
    let mode = StubMode::parse(&mode).ok_or_else(|| validation(format!("unknown stub mode `{mode}`")))?;
    if listen == "stdio" {
        return serve_lines(io::stdin().lock(), io::stdout().lock(), mode).map_err(runtime);
    }
    let listener = TcpListener::bind(&listen).map_err(|e| runtime(format!("{listen}: {e}")))?;
    println!("event=listening addr={}", listener.local_addr().map_err(runtime)?);
    serve_tcp(listener, mode).map_err(runtime)
}

fn main() -> ExitCode {
    let outcome = match Cli::parse().command {
        Command::Gen { config, out, seed } => gen(config, out, seed),
        Command::Run {
            dataset,
            policy,
            reasoner,
            accuracy,
            endpoint,
            timeout_ms,
            share_latent,
            seed,
            max_steps,
            parallel,
            partition,
            out,
        } => run(
            dataset,
            policy,
            reasoner,
            accuracy,
            endpoint,
            timeout_ms,
            share_latent,
            seed,
            max_steps,
            parallel,
            partition,
            out,
        ),
        Command::Eval { results, format, group, out } => eval(results, format, group, out),
        Command::Replay { episode, trace, dataset, max_steps } => replay(episode, trace, dataset, max_steps),
        Command::StubReasoner { mode, listen } => stub(mode, listen),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
