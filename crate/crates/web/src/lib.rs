//! Browser demo. Each export takes and returns JSON strings so the page
//! needs no generated type glue beyond the wasm-bindgen shim.

use broja_core::cone::{barrier, ConePoint};
use broja_core::distributions::{build_distribution, Outcome};
use broja_core::gates::GateKind;
use broja_core::pid::{run_distribution, OutputMode, ReturnData};
use broja_core::solver::{IterationRecord, SolverParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Decomposition {
    pub returndata: ReturnData,
    #[serde(rename = "MI")]
    pub mi: f64,
    pub status: String,
    pub warnings: Vec<String>,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Serialize)]
struct Failure {
    error: String,
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo records serialize")
}

fn failure(e: impl ToString) -> String {
    to_json(&Failure {
        error: e.to_string(),
    })
}

fn solve(input: Vec<(Outcome, f64)>) -> Result<Decomposition, broja_core::Error> {
    let p = build_distribution(input)?;
    let run = run_distribution(
        &p,
        &SolverParams::default(),
        OutputMode::Quiet,
        &mut std::io::sink(),
    )?;
    Ok(Decomposition {
        returndata: run.result.returndata(),
        mi: run.result.mi,
        status: run.result.meta.status.to_string(),
        warnings: run.result.warnings,
        trace: run.solution.trace,
    })
}

/// Decompose a binary distribution given as eight weights indexed by
/// `4x + 2y + z`. Weights are normalized first, so any nonnegative vector
/// with positive sum is accepted.
pub fn decompose_binary(weights: &[f64]) -> Result<Decomposition, String> {
    if weights.len() != 8 {
        return Err(format!("expected 8 weights, got {}", weights.len()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err("weights must be finite and nonnegative".into());
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err("at least one weight must be positive".into());
    }
    let input = weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let k = k as i64;
            (Outcome::new(k >> 2, (k >> 1) & 1, k & 1), w / total)
        })
        .collect();
    solve(input).map_err(|e| e.to_string())
}

/// Decompose a named reference gate.
pub fn decompose_gate(name: &str) -> Result<(Decomposition, [f64; 4]), String> {
    let kind: GateKind = name.parse().map_err(|e: broja_core::Error| e.to_string())?;
    let d = solve(broja_core::gate(kind).entries().collect()).map_err(|e| e.to_string())?;
    Ok((d, kind.expected_bits()))
}

/// Barrier value on an `n x n` grid over `(p, q) in (0, extent]^2` at fixed
/// `r`; `None` outside the cone.
pub fn cone_slice(r: f64, extent: f64, n: usize) -> Vec<Option<f64>> {
    let h = extent / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = (j as f64 + 0.5) * h;
            let q = (i as f64 + 0.5) * h;
            out.push(barrier(ConePoint::new(r, p, q)).ok().map(|b| b.value));
        }
    }
    out
}

#[wasm_bindgen(js_name = decomposeBinary)]
pub fn decompose_binary_js(weights: Vec<f64>) -> String {
    match decompose_binary(&weights) {
        Ok(d) => to_json(&d),
        Err(e) => failure(e),
    }
}

#[wasm_bindgen(js_name = decomposeGate)]
pub fn decompose_gate_js(name: &str) -> String {
    #[derive(Serialize)]
    struct GateOut {
        #[serde(flatten)]
        decomposition: Decomposition,
        expected: [f64; 4],
    }
    match decompose_gate(name) {
        Ok((decomposition, expected)) => to_json(&GateOut {
            decomposition,
            expected,
        }),
        Err(e) => failure(e),
    }
}

/// Flattened grid for canvas rendering; `NaN` marks points outside the cone.
#[wasm_bindgen(js_name = coneSlice)]
pub fn cone_slice_js(r: f64, extent: f64, n: usize) -> Vec<f64> {
    cone_slice(r, extent, n.clamp(1, 512))
        .into_iter()
        .map(|v| v.unwrap_or(f64::NAN))
        .collect()
}

#[wasm_bindgen(js_name = gateNames)]
pub fn gate_names() -> Vec<String> {
    GateKind::ALL.iter().map(|g| g.name().to_owned()).collect()
}
