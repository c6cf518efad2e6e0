use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use xbs_core::scenario::{error_json, run_config, set_path, CheckSelection, ScenarioArtifacts, ScenarioConfig};
use xbs_core::Error;

#[derive(Parser)]
#[command(name = "xbs", version, about = "Run hybrid observer/controller scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify, simulate and check one scenario (or a sweep of it).
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Vary one numeric field: `controller.k=400,500,600`.
        #[arg(long)]
        sweep: Option<String>,
        /// `all`, `none`, or a comma list of check names.
        #[arg(long, default_value = "all")]
        checks: String,
    },
}

fn summary(label: Option<&str>, art: &ScenarioArtifacts) -> serde_json::Value {
    let mut v = json!({
        "run": label,
        "all_checks_passed": art.report.all_checks_passed,
        "failed": art.report.failed_checks(),
        "warnings": art.report.warnings,
        "report": art.report_path,
        "trajectory": art.trajectory,
    });
    if !art.report.all_checks_passed {
        v["error"] = json!("ChecksFailed");
    }
    v
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<f64>), Error> {
    let (path, vals) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("sweep {spec:?} is not PARAM=a,b,c")))?;
    let vals = vals
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("sweep value {v:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((path.trim().to_string(), vals))
}

fn run(config: &Path, out: &Path, sweep: Option<&str>, checks: &str) -> Result<bool, Error> {
    let checks = CheckSelection::parse(checks)?;
    let text = std::fs::read_to_string(config)?;
    let Some(sweep) = sweep else {
        let cfg = ScenarioConfig::from_json(&text)?;
        let art = run_config(&cfg, out, &checks)?;
        println!("{}", summary(None, &art));
        return Ok(art.report.all_checks_passed);
    };
    let (path, vals) = parse_sweep(sweep)?;
    let base: serde_json::Value = serde_json::from_str(&text)?;
    let mut cfgs = Vec::new();
    for &v in &vals {
        let mut doc = base.clone();
        set_path(&mut doc, &path, v)?;
        cfgs.push((format!("{path}={v}"), ScenarioConfig::from_value(doc)?));
    }
    let results: Vec<Result<ScenarioArtifacts, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|(label, cfg)| {
                let dir = out.join(label);
                let checks = &checks;
                s.spawn(move || run_config(cfg, &dir, checks))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut all_ok = true;
    for ((label, _), res) in cfgs.iter().zip(results) {
        match res {
            Ok(art) => {
                all_ok &= art.report.all_checks_passed;
                println!("{}", summary(Some(label), &art));
            }
            Err(e) => {
                all_ok = false;
                let mut v: serde_json::Value = serde_json::from_str(&error_json(&e))?;
                v["run"] = json!(label);
                println!("{v}");
            }
        }
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            sweep,
            checks,
        } => match run(&config, &out, sweep.as_deref(), &checks) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                println!("{}", error_json(&e));
                ExitCode::FAILURE
            }
        },
    }
}
