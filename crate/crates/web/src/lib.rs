//! WebAssembly bindings for the browser demo.
//!
//! Every export takes a scenario configuration as JSON text (same schema as
//! the CLI) and returns JSON text. The `*_json` functions hold the logic and
//! are callable natively; the `#[wasm_bindgen]` wrappers only convert errors.

use nalgebra::Vector2;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use xbs_core::certificates::{dwell_time_floor, dwell_time_lower_bound};
use xbs_core::engine::simulate as run;
use xbs_core::scenario::{certificates, error_json, ScenarioConfig};
use xbs_core::Result;

/// Bundled dry-road scenario, used as the page's starting point.
pub const DEFAULT_SCENARIO: &str = include_str!("../../cli/scenarios/abs_dry_road.json");

fn to_js(r: Result<String>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&error_json(&e)))
}

pub fn certify_json(config: &str) -> Result<String> {
    let cfg = ScenarioConfig::from_json(config)?;
    let lp = cfg.closed_loop()?;
    Ok(serde_json::to_string(&certificates(&lp))?)
}

/// Simulates and returns at most `max_points` evenly strided samples
/// (the last sample is always kept) plus the jump log.
pub fn simulate_json(config: &str, max_points: usize) -> Result<String> {
    let cfg = ScenarioConfig::from_json(config)?;
    let lp = cfg.closed_loop()?;
    let sim = run(
        &lp,
        &cfg.solver,
        Vector2::from(cfg.initial.z0),
        Vector2::from(cfg.initial.z_hat0),
    )?;
    let traj = &sim.trajectory;
    let n = traj.samples.len();
    let stride = n.div_ceil(max_points.max(2) - 1).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if n > 0 && idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    let col = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { idx.iter().map(|&k| f(k)).collect() };
    let s = |k: usize| &traj.samples[k].state;
    let out = json!({
        "t": col(&|k| traj.samples[k].t),
        "cycle": idx.iter().map(|&k| s(k).cycle).collect::<Vec<_>>(),
        "z1": col(&|k| s(k).z[0]),
        "z2": col(&|k| s(k).z[1]),
        "z1_hat": col(&|k| s(k).z_hat()[0]),
        "z2_hat": col(&|k| s(k).z_hat()[1]),
        "z_star": col(&|k| s(k).z_star),
        "v_obs": col(&|k| lp.cert.v_obs(&s(k).z_tilde)),
        "jumps": traj.jumps,
        "samples": n,
        "termination": traj.termination,
        "k": lp.k(),
    });
    Ok(out.to_string())
}

/// Closed-form dwell lower bound for cycles `1..=cycles` and its floor.
pub fn dwell_curve_json(config: &str, cycles: u32) -> Result<String> {
    let cfg = ScenarioConfig::from_json(config)?;
    let lp = cfg.closed_loop()?;
    let bounds = (1..=cycles.max(1))
        .map(|i| dwell_time_lower_bound(&lp.params, &lp.cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let v: Value = json!({
        "t_lmin": dwell_time_floor(&lp.params, &lp.cfg)?,
        "bounds": bounds,
    });
    Ok(v.to_string())
}

#[wasm_bindgen]
pub fn default_scenario() -> String {
    DEFAULT_SCENARIO.to_string()
}

#[wasm_bindgen]
pub fn certify(config: &str) -> std::result::Result<String, JsValue> {
    to_js(certify_json(config))
}

#[wasm_bindgen]
pub fn simulate(config: &str, max_points: usize) -> std::result::Result<String, JsValue> {
    to_js(simulate_json(config, max_points))
}

#[wasm_bindgen]
pub fn dwell_curve(config: &str, cycles: u32) -> std::result::Result<String, JsValue> {
    to_js(dwell_curve_json(config, cycles))
}
