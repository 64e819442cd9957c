//! Browser bindings. Each export takes and returns JSON text; the plain Rust
//! functions underneath are what the native tests exercise.

use noesis_core::{
    parse_context, replay, BeliefState, ConceptLattice, EnsembleError, FormalContext, Format, Implication, LabelMode,
    Observable,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn context(text: &str) -> Result<FormalContext, String> {
    parse_context(text.as_bytes(), Format::Json).map_err(|e| format!("context: {e}"))
}

fn as_value(json_text: &str) -> Value {
    serde_json::from_str(json_text).expect("library JSON parses")
}

/// Support-weighted state of `ctx`, or the uniform prior before any object is known.
fn support_state(ctx: &FormalContext) -> Result<BeliefState, String> {
    match BeliefState::reinforce_from_support(ctx) {
        Err(EnsembleError::EmptyContext) => BeliefState::uniform_prior(ctx.attributes().to_vec()),
        other => other,
    }
    .map_err(|e| e.to_string())
}

/// `{"concepts":[..],"hasse":[[lower,upper],..],"dot":".."}` for a context in canonical JSON.
pub fn lattice_view(context_json: &str) -> Result<String, String> {
    let lattice = ConceptLattice::enumerate(&context(context_json)?);
    let mut doc = as_value(&lattice.to_json());
    doc["dot"] = Value::String(lattice.export_dot(LabelMode::Reduced));
    Ok(doc.to_string())
}

/// Measures the support-weighted state of a context on `attributes_json`
/// (a JSON array of attribute names).
pub fn measure_view(context_json: &str, attributes_json: &str) -> Result<String, String> {
    let ctx = context(context_json)?;
    let attributes: Vec<String> = serde_json::from_str(attributes_json).map_err(|e| format!("attributes: {e}"))?;
    let state = support_state(&ctx)?;
    let blocks: Vec<Value> = Observable::from_dimensions(&ctx)
        .probabilities(&state)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(name, p)| json!({ "name": name, "probability": p }))
        .collect();
    let (probability, collapsed) = match state.measure_named(&attributes) {
        Ok(m) => (m.probability, as_value(&m.collapsed.to_json())),
        Err(EnsembleError::ZeroProbability) => (0.0, Value::Null),
        Err(e) => return Err(e.to_string()),
    };
    Ok(json!({
        "state": as_value(&state.to_json()),
        "blocks": blocks,
        "probability": probability,
        "collapsed": collapsed,
    })
    .to_string())
}

/// Replays a cue script (JSON array of `{premise, conclusion}`) against a
/// reference context and returns every granule's lattice and ensemble.
pub fn replay_view(reference_json: &str, script_json: &str) -> Result<String, String> {
    let reference = context(reference_json)?;
    let script: Vec<Implication> = serde_json::from_str(script_json).map_err(|e| format!("script: {e}"))?;
    let run = replay(&reference, &script).map_err(|e| e.to_string())?;
    let snapshots: Vec<Value> = run
        .snapshots
        .iter()
        .map(|s| json!({ "granule": s.granule, "lattice": as_value(&s.lattice.to_json()), "ensemble": as_value(&s.ensemble.to_json()) }))
        .collect();
    Ok(json!({
        "supporting": run.supporting_cues(),
        "snapshots": snapshots,
        "trace": run.to_jsonl(),
    })
    .to_string())
}

#[wasm_bindgen(js_name = lattice)]
pub fn js_lattice(context_json: &str) -> Result<String, JsError> {
    lattice_view(context_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = measure)]
pub fn js_measure(context_json: &str, attributes_json: &str) -> Result<String, JsError> {
    measure_view(context_json, attributes_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = replay)]
pub fn js_replay(reference_json: &str, script_json: &str) -> Result<String, JsError> {
    replay_view(reference_json, script_json).map_err(|e| JsError::new(&e))
}
