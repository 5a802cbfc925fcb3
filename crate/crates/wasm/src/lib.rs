//! `wasm-bindgen` bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string; errors become JS exceptions.

pub mod demo;

use wasm_bindgen::prelude::*;

fn to_json<T: serde::Serialize>(result: ensemble_sampling::Result<T>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// Exact posterior optimal-action probabilities against an ensemble estimate.
#[wasm_bindgen(js_name = actionDistribution)]
pub fn action_distribution(arms: u32, pulls: u32, models: u32, seed: u32) -> Result<String, JsError> {
    to_json(demo::action_distribution(arms as usize, pulls as usize, models as usize, seed as u64))
}

/// Per-period regret curves; `models` is a list of ensemble sizes.
#[wasm_bindgen(js_name = regretCurves)]
pub fn regret_curves(arms: u32, horizon: u32, realizations: u32, models: Vec<u32>, seed: u32) -> Result<String, JsError> {
    let models: Vec<usize> = models.into_iter().map(|m| m as usize).collect();
    to_json(demo::regret_curves(arms as usize, horizon as usize, realizations as usize, &models, seed as u64))
}

/// Sufficient ensemble size and the concentration tail.
#[wasm_bindgen(js_name = ensembleSizeBound)]
pub fn ensemble_size_bound(actions: f64, horizon: f64, eps: f64) -> Result<String, JsError> {
    if !(actions >= 1.0 && horizon >= 1.0) || actions.fract() != 0.0 || horizon.fract() != 0.0 {
        return Err(JsError::new("actions and horizon must be positive integers"));
    }
    to_json(demo::ensemble_size_bound(actions as u64, horizon as u64, eps))
}
