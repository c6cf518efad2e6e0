//! JSON-configured scenarios: certification, simulation, analysis and
//! artifact output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::analysis::{bound_report, BoundReport, DEFAULT_THRESHOLD_FRACTION};
use crate::certificates::{dwell_time_certificate, dwell_time_floor, DwellTimeCertificate, LyapunovCertificate};
use crate::dynamics::control_input;
use crate::engine::{simulate, ClosedLoop, Simulation, SolverStats};
use crate::error::{Error, Result};
use crate::model::{
    ControllerConfig, GainDerivation, GainSpec, HSchedule, HybridTrajectory, JumpRecord,
    ObserverGains, PlantParams, SolverConfig, Termination,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Names accepted by `--checks`.
pub const CHECK_NAMES: [&str; 8] = [
    "vobs",
    "phi_oracle",
    "tau_clock",
    "dwell",
    "zeno",
    "invariance",
    "envelope",
    "overshoot",
];

pub const TRAJECTORY_HEADER: &str = "t,j,i,tau,z1,z2,z1_hat,z2_hat,z_tilde1,z_tilde2,z_star,u";
pub const PHASE_HEADER: &str = "z1,z2";
pub const TIMESERIES_HEADER: &str = "t,z1,z2,z1_hat,z2_hat,z_star";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub k1_plus: f64,
    pub k2_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_prime: Option<f64>,
    pub z_star_init: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R_tilde")]
    pub r_tilde: f64,
    pub h_schedule: HSchedule,
    pub max_cycles: u32,
}

impl ControllerSection {
    pub fn to_config(&self) -> Result<ControllerConfig> {
        let gain = match (self.k, self.k_prime) {
            (Some(k), None) => GainSpec::Fixed(k),
            (None, Some(kp)) => GainSpec::Derived { k_prime: kp },
            _ => {
                return Err(Error::InvalidConfig(
                    "controller needs exactly one of k or k_prime".into(),
                ))
            }
        };
        let cfg = ControllerConfig {
            z_star_init: self.z_star_init,
            gain,
            epsilon: self
                .epsilon
                .unwrap_or_else(|| ControllerConfig::default_epsilon(self.z_star_init)),
            r: self.r,
            r_tilde: self.r_tilde,
            h_schedule: self.h_schedule.clone(),
            max_cycles: self.max_cycles,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub z0: [f64; 2],
    pub z_hat0: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub threshold_fraction: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub trajectory: String,
    pub report: String,
    pub phase: String,
    pub timeseries: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            report: "report.json".into(),
            phase: "phase.csv".into(),
            timeseries: "timeseries.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub plant: PlantParams,
    pub observer: ObserverSection,
    pub controller: ControllerSection,
    #[serde(default)]
    pub solver: SolverConfig,
    pub initial: InitialSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let schema = value.get("schema").and_then(|s| s.as_u64());
        if schema != Some(u64::from(SCHEMA_VERSION)) {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema {:?}; expected {SCHEMA_VERSION}",
                value.get("schema")
            )));
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.plant.validate()?;
        cfg.solver.validate()?;
        let t = cfg.analysis.threshold_fraction;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidConfig("analysis.threshold_fraction must lie in (0, 1)".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Certifies gains and assembles the closed loop.
    pub fn closed_loop(&self) -> Result<ClosedLoop> {
        ClosedLoop::new(
            self.plant,
            self.observer.k1_plus,
            self.observer.k2_plus,
            self.controller.to_config()?,
        )
    }
}

/// Replaces the number at a dotted path, e.g. `controller.k` or
/// `initial.z0.1`.
pub fn set_path(value: &mut serde_json::Value, path: &str, x: f64) -> Result<()> {
    let mut cur = value;
    for key in path.split('.') {
        cur = match cur {
            serde_json::Value::Object(m) => m
                .get_mut(key)
                .ok_or_else(|| Error::InvalidConfig(format!("no field {key:?} in {path:?}")))?,
            serde_json::Value::Array(v) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad index {key:?} in {path:?}")))?;
                v.get_mut(idx)
                    .ok_or_else(|| Error::InvalidConfig(format!("index {idx} out of range in {path:?}")))?
            }
            _ => return Err(Error::InvalidConfig(format!("{path:?} does not name a number"))),
        };
    }
    if !cur.is_number() && !cur.is_null() {
        return Err(Error::InvalidConfig(format!("{path:?} does not name a number")));
    }
    *cur = serde_json::json!(x);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckSelection {
    All,
    None,
    List(Vec<String>),
}

impl CheckSelection {
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim() {
            "all" => Ok(Self::All),
            "none" => Ok(Self::None),
            list => {
                let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
                for n in &names {
                    if !CHECK_NAMES.contains(&n.as_str()) {
                        return Err(Error::InvalidConfig(format!(
                            "unknown check {n:?}; known: {}",
                            CHECK_NAMES.join(", ")
                        )));
                    }
                }
                Ok(Self::List(names))
            }
        }
    }

    pub fn enabled(&self, name: &str) -> bool {
        match self {
            Self::All => true,
            Self::None => false,
            Self::List(v) => v.iter().any(|n| n == name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub gains: ObserverGains,
    pub lyapunov: LyapunovCertificate,
    pub control_gain: GainDerivation,
    pub t_lmin: Option<f64>,
    pub dwell: Vec<DwellTimeCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub termination: Option<Termination>,
    pub samples: usize,
    pub jumps: usize,
    pub t_final: f64,
    pub final_cycle: Option<u32>,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub schema: u32,
    pub name: Option<String>,
    pub certificates: Certificates,
    pub g_converges: bool,
    pub warnings: Vec<String>,
    pub simulation: SimulationSummary,
    pub bounds: BoundReport,
    pub checks: BTreeMap<String, bool>,
    pub all_checks_passed: bool,
    pub jump_log: Vec<JumpRecord>,
}

impl ScenarioReport {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, ok)| !**ok)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Static certificates of a closed loop: gains, `P`, control gain and dwell bounds.
pub fn certificates(lp: &ClosedLoop) -> Certificates {
    let dwell = (1..=lp.cfg.max_cycles.max(1))
        .filter_map(|i| dwell_time_certificate(&lp.params, &lp.cfg, i).ok())
        .collect();
    Certificates {
        gains: lp.gains,
        lyapunov: lp.cert,
        control_gain: lp.gain.clone(),
        t_lmin: dwell_time_floor(&lp.params, &lp.cfg).ok(),
        dwell,
    }
}

/// Runs a scenario in memory.
pub fn execute(cfg: &ScenarioConfig, checks: &CheckSelection) -> Result<(ClosedLoop, Simulation, ScenarioReport)> {
    let lp = cfg.closed_loop()?;
    let z0 = Vector2::from(cfg.initial.z0);
    let z_hat0 = Vector2::from(cfg.initial.z_hat0);
    let sim = simulate(&lp, &cfg.solver, z0, z_hat0)?;
    let traj = &sim.trajectory;
    let bounds = bound_report(&lp, traj, cfg.analysis.threshold_fraction)?;

    let mut warnings = Vec::new();
    let g_converges = lp.cfg.h_schedule.g_converges_to_zero();
    if !g_converges {
        warnings.push("g(i) does not converge to 0".to_string());
    }
    let unmet = lp.gain.unmet();
    if !unmet.is_empty() {
        warnings.push(format!("k' = {} is below the bounds {unmet:?}", lp.gain.k_prime));
    }

    let results = [
        ("vobs", bounds.vobs.monotone),
        ("phi_oracle", bounds.phi_oracle.ok),
        ("tau_clock", bounds.tau_clock.ok),
        ("dwell", bounds.dwell.ok),
        ("zeno", bounds.zeno.ok),
        ("invariance", bounds.invariance.ok),
        ("envelope", bounds.envelope_ok()),
        ("overshoot", bounds.overshoot_ok()),
    ];
    let checks: BTreeMap<String, bool> = results
        .iter()
        .filter(|(n, _)| checks.enabled(n))
        .map(|(n, ok)| (n.to_string(), *ok))
        .collect();
    let all_checks_passed = checks.values().all(|ok| *ok);

    let report = ScenarioReport {
        schema: SCHEMA_VERSION,
        name: cfg.name.clone(),
        certificates: certificates(&lp),
        g_converges,
        warnings,
        simulation: SimulationSummary {
            termination: traj.termination,
            samples: traj.len(),
            jumps: traj.jumps.len(),
            t_final: traj.samples.last().map_or(0.0, |s| s.t),
            final_cycle: traj.final_cycle(),
            stats: sim.stats.clone(),
        },
        bounds,
        checks,
        all_checks_passed,
        jump_log: traj.jumps.clone(),
    };
    Ok((lp, sim, report))
}

fn num(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.16e}");
}

/// Trajectory CSV with 17 significant digits per value.
pub fn trajectory_csv(lp: &ClosedLoop, traj: &HybridTrajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 300);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let st = &s.state;
        let zh = st.z_hat();
        let _ = write!(out, "{},{},{},", fmt17(s.t), s.j, st.cycle);
        for (k, x) in [
            st.tau,
            st.z[0],
            st.z[1],
            zh[0],
            zh[1],
            st.z_tilde[0],
            st.z_tilde[1],
            st.z_star,
            control_input(&lp.params, lp.k(), st),
        ]
        .into_iter()
        .enumerate()
        {
            if k > 0 {
                out.push(',');
            }
            num(&mut out, x);
        }
        out.push('\n');
    }
    out
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn phase_csv(traj: &HybridTrajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 50);
    out.push_str(PHASE_HEADER);
    out.push('\n');
    for s in &traj.samples {
        num(&mut out, s.state.z[0]);
        out.push(',');
        num(&mut out, s.state.z[1]);
        out.push('\n');
    }
    out
}

pub fn timeseries_csv(traj: &HybridTrajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 140);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let zh = s.state.z_hat();
        for (k, x) in [s.t, s.state.z[0], s.state.z[1], zh[0], zh[1], s.state.z_star]
            .into_iter()
            .enumerate()
        {
            if k > 0 {
                out.push(',');
            }
            num(&mut out, x);
        }
        out.push('\n');
    }
    out
}

/// Writes the phase-plane and time-series CSVs.
pub fn emit_plot_data(traj: &HybridTrajectory, phase: &Path, timeseries: &Path) -> Result<()> {
    fs::write(phase, phase_csv(traj))?;
    fs::write(timeseries, timeseries_csv(traj))?;
    Ok(())
}

pub fn report_json(report: &ScenarioReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct ScenarioArtifacts {
    pub report: ScenarioReport,
    pub trajectory: PathBuf,
    pub report_path: PathBuf,
    pub phase: PathBuf,
    pub timeseries: PathBuf,
}

/// Runs a configuration and writes all artifacts under `out_dir`.
pub fn run_config(cfg: &ScenarioConfig, out_dir: &Path, checks: &CheckSelection) -> Result<ScenarioArtifacts> {
    let (lp, sim, report) = execute(cfg, checks)?;
    fs::create_dir_all(out_dir)?;
    let trajectory = out_dir.join(&cfg.outputs.trajectory);
    let report_path = out_dir.join(&cfg.outputs.report);
    let phase = out_dir.join(&cfg.outputs.phase);
    let timeseries = out_dir.join(&cfg.outputs.timeseries);
    fs::write(&trajectory, trajectory_csv(&lp, &sim.trajectory))?;
    emit_plot_data(&sim.trajectory, &phase, &timeseries)?;
    fs::write(&report_path, report_json(&report)?)?;
    Ok(ScenarioArtifacts {
        report,
        trajectory,
        report_path,
        phase,
        timeseries,
    })
}

/// Loads `config_path` and runs it.
pub fn run_scenario(config_path: &Path, out_dir: &Path, checks: &CheckSelection) -> Result<ScenarioArtifacts> {
    run_config(&ScenarioConfig::load(config_path)?, out_dir, checks)
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
    })
    .to_string()
}
