//! Python bindings. Designs and configurations cross the boundary as JSON
//! text so the Python side needs no extra packages.

use hlsdse_core::advisor::RuleAdvisor;
use hlsdse_core::design::{DirectiveConfig, FeatureRecord, HlsDesign};
use hlsdse_core::pareto::{adrs as core_adrs, Objectives};
use hlsdse_core::qor::{MockBackend, QorBackend};
use hlsdse_core::sampling::{sample as core_sample, SamplerKind, SamplerSpec};
use hlsdse_core::search::{explore as core_explore, SearchParams};
use hlsdse_core::space::{prune, DesignSpace, PruneRuleSet};
use hlsdse_core::{emit_tcl as core_emit_tcl, encode_feature_vector, ProjectSettings};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn design(json: &str) -> PyResult<HlsDesign> {
    HlsDesign::from_json(json).map_err(value_err)
}

fn space(d: &HlsDesign, pruned: bool) -> PyResult<DesignSpace> {
    let full = DesignSpace::build(d);
    if pruned {
        prune(&full, d, &PruneRuleSet::default()).map_err(value_err)
    } else {
        Ok(full)
    }
}

fn config(d: &HlsDesign, records_json: &str) -> PyResult<DirectiveConfig> {
    let recs: Vec<FeatureRecord> = serde_json::from_str(records_json).map_err(value_err)?;
    DirectiveConfig::from_records(d, &recs).map_err(value_err)
}

fn records(d: &HlsDesign, c: &DirectiveConfig) -> PyResult<String> {
    let recs = encode_feature_vector(d, c).map_err(value_err)?;
    serde_json::to_string(&recs).map_err(value_err)
}

/// Validates a design description and returns it normalized.
#[pyfunction]
fn parse_design(design_json: &str) -> PyResult<String> {
    Ok(design(design_json)?.to_json())
}

/// The design space as JSON, pruned by the built-in rules unless `pruned` is false.
#[pyfunction]
#[pyo3(signature = (design_json, pruned = true))]
fn design_space(design_json: &str, pruned: bool) -> PyResult<String> {
    let d = design(design_json)?;
    Ok(space(&d, pruned)?.to_json().to_string())
}

/// Draws `n` configurations; each is returned as feature-record JSON.
#[pyfunction]
#[pyo3(signature = (design_json, kind = "lhs", n = 12, seed = 0))]
fn sample(design_json: &str, kind: &str, n: usize, seed: u64) -> PyResult<Vec<String>> {
    let d = design(design_json)?;
    let s = space(&d, true)?;
    let kind: SamplerKind = serde_json::from_value(serde_json::Value::String(kind.to_string())).map_err(value_err)?;
    let set = core_sample(&s, &d, &SamplerSpec::new(kind, n, seed), Some(&RuleAdvisor)).map_err(value_err)?;
    set.configs.iter().map(|c| records(&d, c)).collect()
}

/// QoR of one configuration under the analytical model, as JSON.
#[pyfunction]
fn evaluate_mock(design_json: &str, records_json: &str) -> PyResult<String> {
    let d = design(design_json)?;
    let c = config(&d, records_json)?;
    let q = MockBackend::default().evaluate(&d, &c).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serde_json::to_string(&q).map_err(value_err)
}

/// Runs the adaptive search with the rule advisor and the analytical model.
/// Returns `{"evaluations": n, "front": [{"latency", "util", "config"}]}`.
#[pyfunction]
#[pyo3(signature = (design_json, seed = 0, i_max = 3))]
fn explore(design_json: &str, seed: u64, i_max: usize) -> PyResult<String> {
    let d = design(design_json)?;
    let s = space(&d, true)?;
    let params = SearchParams { seed, i_max, ..Default::default() };
    let r = core_explore(&d, &s, &MockBackend::default(), &RuleAdvisor, &params)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let front = r
        .front_configs()
        .iter()
        .map(|(c, o)| {
            let recs = encode_feature_vector(&d, c).map_err(value_err)?;
            Ok(serde_json::json!({ "latency": o.latency, "util": o.util, "config": recs }))
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(serde_json::json!({ "evaluations": r.trajectory.len(), "front": front }).to_string())
}

/// ADRS of an explored front against a reference front, both as
/// `(latency, util)` pairs.
#[pyfunction]
fn adrs(explored: Vec<(f64, f64)>, reference: Vec<(f64, f64)>) -> PyResult<f64> {
    let to = |v: Vec<(f64, f64)>| v.into_iter().map(|(l, u)| Objectives::new(l, u)).collect::<Vec<_>>();
    core_adrs(&to(explored), &to(reference)).map_err(value_err)
}

/// Tcl synthesis script for a configuration given as feature-record JSON.
#[pyfunction]
fn emit_tcl(design_json: &str, records_json: &str) -> PyResult<String> {
    let d = design(design_json)?;
    let c = config(&d, records_json)?;
    Ok(core_emit_tcl(&d, &c, &ProjectSettings::default()))
}

#[pymodule]
fn hlsdse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", hlsdse_core::VERSION)?;
    m.add_function(wrap_pyfunction!(parse_design, m)?)?;
    m.add_function(wrap_pyfunction!(design_space, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_mock, m)?)?;
    m.add_function(wrap_pyfunction!(explore, m)?)?;
    m.add_function(wrap_pyfunction!(adrs, m)?)?;
    m.add_function(wrap_pyfunction!(emit_tcl, m)?)?;
    Ok(())
}
