use std::path::{Path, PathBuf};

use bess_core::dqn::{train, write_log_csv, Hyperparams};
use bess_core::env::write_slot_csv;
use bess_core::report::{
    build_report, evaluate, write_class_supply_csv, write_roi_csv, write_roi_matrix_csv,
    write_rows_csv, write_supply_csv, Evaluation,
};
use bess_core::scenario::{city_calendar, parse_calendar, TraceFiles};
use bess_core::{BessEnv, BsType, Error, PolicyKind, Result, ScenarioConfig, ScenarioTraces};

use crate::manifest::RunManifest;
use crate::{Cli, Command, EvaluateArgs, ReportArgs, ScenarioArgs, TrainArgs};

pub const SCENARIO_FILE: &str = "scenario.json";
pub const EVALUATION_FILE: &str = "evaluation.json";

pub fn run(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Scenario(args) => scenario(cli, args),
        Command::Train(args) => train_cmd(cli, args),
        Command::Evaluate(args) => evaluate_cmd(cli, args),
        Command::Report(args) => report(cli, args),
    }
}

fn base_config(cli: &Cli) -> Result<ScenarioConfig> {
    match &cli.config {
        Some(path) => ScenarioConfig::load(path),
        None => Ok(ScenarioConfig::default()),
    }
}

/// Scenario from `--scenario`, else `--config`, else the default, with the
/// directory that relative trace paths hang off.
fn load_scenario(cli: &Cli, path: Option<&PathBuf>) -> Result<(ScenarioConfig, Option<PathBuf>, Option<PathBuf>)> {
    let path = path.or(cli.config.as_ref());
    match path {
        Some(p) => {
            let cfg = ScenarioConfig::load(p)?.validated()?;
            let dir = p.parent().map(Path::to_path_buf);
            Ok((cfg, dir, Some(p.clone())))
        }
        None => Ok((ScenarioConfig::default(), None, None)),
    }
}

fn scenario(cli: &Cli, args: &ScenarioArgs) -> Result<()> {
    let mut cfg = base_config(cli)?;
    cfg.bs_type = BsType::parse(&args.bs_type)?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    match (&args.city, &args.calendar) {
        (Some(city), _) => {
            cfg.weather_calendar = city_calendar(city)?;
            cfg.city = Some(city.to_ascii_lowercase());
        }
        (None, Some(path)) => {
            cfg.weather_calendar = parse_calendar(&std::fs::read_to_string(path)?)?;
            cfg.city = Some(
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "custom".into()),
            );
        }
        (None, None) => {}
    }
    cfg.traces = TraceFiles::default();
    cfg.validate()?;

    let traces = ScenarioTraces::build(&cfg, None)?;
    let mut manifest = RunManifest::start("scenario", &cli.out);
    manifest.seed = Some(cfg.rng_seed);
    let mut files = TraceFiles::default();
    for (trace, slot) in [
        (&traces.demand, &mut files.demand),
        (&traces.weather.ghi, &mut files.ghi),
        (&traces.weather.temperature, &mut files.temperature),
        (&traces.weather.wind_speed, &mut files.wind_speed),
    ] {
        let name = format!("{}.csv", trace.kind().name());
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        manifest.write(&name, &buf)?;
        *slot = Some(PathBuf::from(name));
    }
    cfg.traces = files;
    let path = manifest.write(SCENARIO_FILE, cfg.to_json()?.as_bytes())?;
    manifest.scenario = Some(path.clone());
    manifest.finish()?;
    log::info!(
        "{} scenario for {} written to {}",
        cfg.bs_type.name(),
        cfg.city.as_deref().unwrap_or("custom"),
        path.display()
    );
    Ok(())
}

fn hyperparams(args: &TrainArgs) -> Result<Hyperparams> {
    let mut h = match &args.hyper {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => Hyperparams::default(),
    };
    if let Some(v) = args.episodes {
        h.episodes = v;
    }
    if let Some(v) = args.lr {
        h.learning_rate = v;
    }
    if let Some(v) = args.epsilon {
        h.epsilon = v;
    }
    if let Some(v) = args.gamma {
        h.gamma = v;
    }
    if let Some(v) = args.target_sync {
        h.target_sync = v;
    }
    if let Some(v) = args.update_every {
        h.update_every = v;
    }
    if let Some(v) = args.batch {
        h.batch_size = v;
    }
    if let Some(v) = args.capacity {
        h.replay_capacity = v;
    }
    if let Some(v) = args.eval_every {
        h.eval_every = v;
    }
    h.validate()?;
    Ok(h)
}

fn train_cmd(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let (cfg, dir, path) = load_scenario(cli, args.scenario.as_ref())?;
    let hyper = hyperparams(args)?;
    let seed = cli.seed.unwrap_or(cfg.rng_seed);
    let mut env = BessEnv::from_file_base(&cfg, dir.as_deref())?;
    let out = train(&mut env, &hyper, seed)?;

    let mut manifest = RunManifest::start("train", &cli.out);
    manifest.scenario = path;
    manifest.seed = Some(seed);
    manifest.policy = Some("dqn".into());
    manifest.write("checkpoint.json", out.net.to_json()?.as_bytes())?;
    let mut log_csv = Vec::new();
    write_log_csv(&out.log, &mut log_csv)?;
    manifest.write("training_log.csv", &log_csv)?;
    manifest.write("hyperparams.json", serde_json::to_string_pretty(&hyper)?.as_bytes())?;
    manifest.finish()?;
    if let Some((episode, cost)) = out.selected {
        log::info!("kept network from episode {episode} (greedy cost {cost:.2})");
    }
    log::info!("trained {} episodes", out.log.len());
    Ok(())
}

fn evaluate_cmd(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let (cfg, dir, path) = load_scenario(cli, args.scenario.as_ref())?;
    let policy = PolicyKind::parse(&args.policy, args.checkpoint.as_deref())?;
    if let PolicyKind::Dqn(ck) = &policy {
        if !ck.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("checkpoint {} not found", ck.display()),
            )));
        }
    }
    let eval = evaluate(&cfg, dir.as_deref(), &policy)?;

    let mut manifest = RunManifest::start("evaluate", &cli.out);
    manifest.scenario = path;
    manifest.seed = Some(cfg.rng_seed);
    manifest.policy = Some(policy.name().into());
    manifest.write(EVALUATION_FILE, serde_json::to_string_pretty(&eval)?.as_bytes())?;
    let mut buf = Vec::new();
    write_rows_csv(std::slice::from_ref(&eval.row), &mut buf)?;
    manifest.write("row.csv", &buf)?;
    let mut buf = Vec::new();
    write_slot_csv(&eval.reports, &mut buf)?;
    manifest.write("slots.csv", &buf)?;
    let mut buf = Vec::new();
    write_supply_csv(&eval.supply, &eval.weather_calendar, &mut buf)?;
    manifest.write("supply.csv", &buf)?;
    manifest.finish()?;
    log::info!(
        "{}: bill {:.2} (saving {:.2}, {:.1}%)",
        eval.policy,
        eval.row.total,
        eval.row.saving,
        100.0 * eval.row.ratio
    );
    Ok(())
}

fn report(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let evals = args
        .runs
        .iter()
        .map(|dir| {
            let text = std::fs::read_to_string(dir.join(EVALUATION_FILE))?;
            Ok(serde_json::from_str::<Evaluation>(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&evals)?;

    let mut manifest = RunManifest::start("report", &cli.out);
    let mut buf = Vec::new();
    write_rows_csv(&report.rows, &mut buf)?;
    manifest.write("table.csv", &buf)?;
    let mut buf = Vec::new();
    write_roi_csv(&report.roi, &mut buf)?;
    manifest.write("roi.csv", &buf)?;
    let mut policies: Vec<&str> = report.roi.iter().map(|r| r.policy.as_str()).collect();
    policies.sort_unstable();
    policies.dedup();
    for policy in policies {
        let mut buf = Vec::new();
        write_roi_matrix_csv(&report.roi, policy, &mut buf)?;
        manifest.write(&format!("roi_matrix_{policy}.csv"), &buf)?;
    }
    let mut buf = Vec::new();
    write_class_supply_csv(&report.class_supply, &mut buf)?;
    manifest.write("supply_by_class.csv", &buf)?;
    manifest.finish()?;
    log::info!("merged {} runs", evals.len());
    Ok(())
}
