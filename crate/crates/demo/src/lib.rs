//! Browser bindings: analytic age curves, a CDF check against simulated SINRs and
//! the RSMA optimizer, each returning JSON for `www/index.html`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use rsma_aoi::model::{validate_config, PowerAllocation, RateSplit, SystemConfig};
use rsma_aoi::optimizer::{default_starts, evaluate_point, multistart_optimize, QosParams, ScaOptions};
use rsma_aoi::simulator::{run_monte_carlo, SimOptions};
use rsma_aoi::stats::{gamma_approx_params, sinr_cdf, Stream};

const MAX_CURVE_POINTS: usize = 400;
const MAX_SAMPLES: usize = 200_000;

fn scenario(tx_power_dbm: f64, velocity_kmh: f64) -> SystemConfig {
    SystemConfig { tx_power_dbm, velocity_mps: velocity_kmh / 3.6, ..Default::default() }
}

fn slots(cfg: &SystemConfig, s: f64) -> Value {
    // JSON has no infinity; a diverging age becomes null
    let v = s / cfg.slot_duration_s;
    if v.is_finite() { json!(v) } else { Value::Null }
}

/// Mean common and overall age, in slots, against transmit power for an even allocation.
pub fn power_curve(p_min: f64, p_max: f64, points: usize, alpha_c: f64, psi: f64, velocity_kmh: f64) -> Result<String, String> {
    if !(2..=MAX_CURVE_POINTS).contains(&points) || !(p_max > p_min) {
        return Err(format!("need 2..={MAX_CURVE_POINTS} points and p_max > p_min"));
    }
    if !(0.0..1.0).contains(&alpha_c) || !(0.0..=1.0).contains(&psi) {
        return Err("alpha_c must lie in [0, 1) and psi in [0, 1]".into());
    }
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let p = p_min + (p_max - p_min) * i as f64 / (points - 1) as f64;
        let cfg = scenario(p, velocity_kmh);
        let budget = validate_config(&cfg).map_err(|e| e.to_string())?;
        let alloc = PowerAllocation::even(cfg.n_users, alpha_c);
        let set = evaluate_point(&cfg, &budget, &alloc, &RateSplit::uniform(cfg.n_users, psi)).map_err(|e| e.to_string())?;
        out.push(json!({
            "tx_power_dbm": p,
            "common": slots(&cfg, set.mean_common.seconds()),
            "overall": slots(&cfg, set.mean_overall.seconds()),
        }));
    }
    Ok(Value::Array(out).to_string())
}

/// Closed-form and empirical CDFs of user `user`'s common and private SINR on a shared grid.
pub fn cdf_check(alpha_c: f64, velocity_kmh: f64, user: usize, samples: usize, seed: u64) -> Result<String, String> {
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(format!("samples must lie in 1..={MAX_SAMPLES}"));
    }
    let cfg = SystemConfig { n_trials: samples, rng_seed: seed, ..scenario(35.0, velocity_kmh) };
    if user >= cfg.n_users {
        return Err(format!("user must be below {}", cfg.n_users));
    }
    let budget = validate_config(&cfg).map_err(|e| e.to_string())?;
    let alloc = PowerAllocation::new(alpha_c, vec![(1.0 - alpha_c) / cfg.n_users as f64; cfg.n_users]).map_err(|e| e.to_string())?;
    let stats = gamma_approx_params(&cfg, &budget, &alloc);
    let opts = SimOptions { keep_sinr_samples: true, ..Default::default() };
    let sim = run_monte_carlo(&cfg, &alloc, &RateSplit::uniform(cfg.n_users, 0.0), &opts).map_err(|e| e.to_string())?;
    let kept = sim.sinr_samples.ok_or("simulator returned no samples")?;
    let mut streams = serde_json::Map::new();
    for (name, stream, mut xs) in [("common", Stream::Common, kept.common[user].clone()), ("private", Stream::Private, kept.private[user].clone())] {
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let hi = xs[(n * 99) / 100].max(1e-9);
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = sinr_cdf(stream, user, &stats, &alloc, &budget, x.max(0.0)).map_err(|e| e.to_string())?;
            ks = ks.max((f - i as f64 / n as f64).abs()).max((f - (i + 1) as f64 / n as f64).abs());
        }
        let grid: Vec<Value> = (0..=60)
            .map(|j| {
                let x = hi * j as f64 / 60.0;
                let empirical = xs.partition_point(|&v| v <= x) as f64 / n as f64;
                let closed = sinr_cdf(stream, user, &stats, &alloc, &budget, x).unwrap_or(f64::NAN);
                json!({ "x": x, "closed_form": closed, "empirical": empirical })
            })
            .collect();
        streams.insert(name.into(), json!({ "ks": ks, "points": grid }));
    }
    Ok(Value::Object(streams).to_string())
}

/// Multi-start RSMA optimization at the default scenario with three knobs changed.
pub fn optimize(tx_power_dbm: f64, velocity_kmh: f64, lambda: f64) -> Result<String, String> {
    let cfg = SystemConfig { qos_lambda: lambda, ..scenario(tx_power_dbm, velocity_kmh) };
    let budget = validate_config(&cfg).map_err(|e| e.to_string())?;
    let opts = ScaOptions { parallel: false, ..Default::default() };
    let sol = multistart_optimize(&cfg, &budget, Some(QosParams::from_config(&cfg)), &default_starts(cfg.n_users), &opts)
        .map_err(|e| e.to_string())?;
    let ages = |v: &[rsma_aoi::aoi::Age]| v.iter().map(|a| slots(&cfg, a.seconds())).collect::<Vec<_>>();
    Ok(json!({
        "alpha_c": sol.alloc.alpha_c,
        "alpha": sol.alloc.alpha,
        "psi": sol.split.psi,
        "mean_overall": slots(&cfg, sol.aaoi.mean_overall.seconds()),
        "mean_common": slots(&cfg, sol.aaoi.mean_common.seconds()),
        "overall": ages(&sol.aaoi.aaoi_overall),
        "common": ages(&sol.aaoi.aaoi_common),
        "selected_start": sol.selected_start,
    })
    .to_string())
}

#[wasm_bindgen(js_name = powerCurve)]
pub fn power_curve_js(p_min: f64, p_max: f64, points: usize, alpha_c: f64, psi: f64, velocity_kmh: f64) -> Result<String, JsError> {
    power_curve(p_min, p_max, points, alpha_c, psi, velocity_kmh).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = cdfCheck)]
pub fn cdf_check_js(alpha_c: f64, velocity_kmh: f64, user: usize, samples: usize, seed: u32) -> Result<String, JsError> {
    cdf_check(alpha_c, velocity_kmh, user, samples, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = optimize)]
pub fn optimize_js(tx_power_dbm: f64, velocity_kmh: f64, lambda: f64) -> Result<String, JsError> {
    optimize(tx_power_dbm, velocity_kmh, lambda).map_err(|e| JsError::new(&e))
}
