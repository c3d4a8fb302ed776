use std::collections::BTreeSet;
use std::path::PathBuf;

use framestudy_core::analysis::{
    self, baseline_frame_distribution, cluster_matrix, pre_election_comparison, prepost_pattern_table,
    robustness::robustness_on_study, union_deviation_matrix, RobustnessMode, RobustnessParams,
};
use framestudy_core::eventstudy::EventStudy;
use framestudy_core::frames::{classify_lexicon, Lexicon};
use framestudy_core::ingest::{
    derive_all_outcomes, load_posts, parse_elections, ElectionSchema, Registry, RuleSet, StudyRange,
};
use framestudy_core::pipeline::{run_study, StudyConfig, StudyInputs};
use framestudy_core::stats::{self, TTestVariant};
use framestudy_core::synth::{generate_scenario, Effect, ScenarioConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde::Serialize;
use serde_json::Value;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(xs) => {
            let items = xs.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn py_value<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &serde_json::to_value(value).map_err(err)?)
}

fn variant(name: &str) -> PyResult<TTestVariant> {
    match name {
        "welch" => Ok(TTestVariant::Welch),
        "pooled" => Ok(TTestVariant::Pooled),
        other => Err(err(format!("unknown t-test variant `{other}`"))),
    }
}

/// Welch two-sample t-test; returns `t`, `df`, `p` and both group summaries.
#[pyfunction]
#[pyo3(signature = (a, b, variant_name = "welch"))]
fn t_test<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>, variant_name: &str) -> PyResult<Bound<'py, PyAny>> {
    let r = stats::t_test(&a, &b, variant(variant_name)?).map_err(err)?;
    py_value(py, &r)
}

#[pyfunction]
#[pyo3(signature = (k, n, alpha = 0.05))]
fn wilson_interval(k: u64, n: u64, alpha: f64) -> PyResult<(f64, f64)> {
    stats::wilson_interval(k, n, alpha).map_err(err)
}

/// Newcombe interval for `k1/n1 - k2/n2`.
#[pyfunction]
#[pyo3(signature = (k1, n1, k2, n2, alpha = 0.05))]
fn newcombe_diff_ci<'py>(py: Python<'py>, k1: u64, n1: u64, k2: u64, n2: u64, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
    let ci = stats::newcombe_diff_ci(k1, n1, k2, n2, alpha).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("d", ci.d)?;
    d.set_item("lower", ci.lower)?;
    d.set_item("upper", ci.upper)?;
    d.set_item("significant", ci.significant())?;
    Ok(d.into_any())
}

#[pyfunction]
fn percentile(values: Vec<f64>, q: f64) -> PyResult<f64> {
    stats::percentile(&values, q).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (flags, threshold = 0.8))]
fn seed_consensus(flags: Vec<bool>, threshold: f64) -> bool {
    stats::seed_consensus(&flags, threshold)
}

/// Canonical union id under the bundled rules, or `None`.
#[pyfunction]
fn normalize_name(raw: &str) -> Option<String> {
    RuleSet::builtin().normalize(raw).canonical().map(str::to_string)
}

/// Frame flags assigned by the bundled lexicon.
#[pyfunction]
fn classify_text<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py_value(py, &Lexicon::builtin().classify_text(text))
}

fn parse_effect(t: (String, String, i64, i64, f64)) -> PyResult<Effect> {
    Ok(Effect {
        outcome: t.0.parse().map_err(err)?,
        frame: t.1.parse().map_err(err)?,
        days: (t.2, t.3),
        delta: t.4,
    })
}

/// Event study over labeled posts and election outcomes.
#[pyclass(frozen, module = "framestudy")]
struct Study {
    inputs: StudyInputs,
    config: StudyConfig,
    study: EventStudy,
}

impl Study {
    fn build(inputs: StudyInputs, config: StudyConfig) -> PyResult<Self> {
        let study = run_study(&inputs, &config).map_err(err)?;
        Ok(Study { inputs, config, study })
    }
}

#[pymethods]
impl Study {
    /// Reads an elections CSV and a posts JSONL file. `label_source` is
    /// `"lexicon"` or `"embedded"`.
    #[staticmethod]
    #[pyo3(signature = (elections, posts, label_source = "lexicon", window_days = 5, start = None, end = None))]
    fn from_files(
        elections: PathBuf,
        posts: PathBuf,
        label_source: &str,
        window_days: usize,
        start: Option<&str>,
        end: Option<&str>,
    ) -> PyResult<Self> {
        let mut range = StudyRange::reference_period();
        if let Some(s) = start {
            range.start = s.parse().map_err(err)?;
        }
        if let Some(e) = end {
            range.end = e.parse().map_err(err)?;
        }
        let range = StudyRange::new(range.start, range.end).map_err(err)?;
        let parsed = parse_elections(&elections, &ElectionSchema::default()).map_err(err)?;
        let cases: Vec<_> = parsed.cases.into_iter().filter(|c| range.contains(c.election_date)).collect();
        let tracked: BTreeSet<String> = Registry::builtin().ids();
        let (outcomes, _) = derive_all_outcomes(&cases, &RuleSet::builtin(), &tracked);
        let mut posts = load_posts(&posts, Some(&range)).map_err(err)?.posts;
        match label_source {
            "embedded" => {}
            "lexicon" => {
                let lex = Lexicon::builtin();
                for p in &mut posts {
                    p.labels = Some(classify_lexicon(p, &lex));
                }
            }
            other => return Err(err(format!("unknown label source `{other}`"))),
        }
        let config = StudyConfig {
            window_days,
            study_range: range,
            ..Default::default()
        };
        Study::build(StudyInputs::new(posts, outcomes), config)
    }

    /// Synthetic scenario; `effects` holds `(outcome, frame, from_day, to_day, delta)`.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, n_orgs = 40, cases_per_org = 50, post_rate = 1.0, effects = Vec::new(), window_days = 5))]
    fn synthetic(
        seed: u64,
        n_orgs: usize,
        cases_per_org: usize,
        post_rate: f64,
        effects: Vec<(String, String, i64, i64, f64)>,
        window_days: usize,
    ) -> PyResult<Self> {
        let cfg = ScenarioConfig {
            seed,
            n_orgs,
            cases_per_org,
            post_rate,
            effects: effects.into_iter().map(parse_effect).collect::<PyResult<_>>()?,
            ..Default::default()
        };
        let s = generate_scenario(&cfg);
        let config = StudyConfig {
            window_days,
            study_range: cfg.study_range,
            ..Default::default()
        };
        Study::build(StudyInputs::new(s.posts, s.outcomes), config)
    }

    #[getter]
    fn n_instances(&self) -> usize {
        self.study.instances.len()
    }

    #[getter]
    fn n_dropped(&self) -> usize {
        self.study.dropped.len()
    }

    #[getter]
    fn orgs(&self) -> Vec<String> {
        self.inputs.posts_by_org.keys().cloned().collect()
    }

    fn instances<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        py_value(py, &self.study.instances)
    }

    fn thresholds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        py_value(py, &self.study.thresholds)
    }

    #[pyo3(signature = (seed = 0, variant_name = "welch"))]
    fn compare_pre<'py>(&self, py: Python<'py>, seed: u64, variant_name: &str) -> PyResult<Bound<'py, PyAny>> {
        let r = pre_election_comparison(&self.study.instances, seed, variant(variant_name)?).map_err(err)?;
        py_value(py, &r)
    }

    #[pyo3(signature = (seed = 0, alpha = 0.05))]
    fn patterns<'py>(&self, py: Python<'py>, seed: u64, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
        let t = prepost_pattern_table(&self.study.instances, &self.study.thresholds, seed, alpha).map_err(err)?;
        py_value(py, &t)
    }

    #[pyo3(signature = (n_seeds = 5, seed = 0))]
    fn baseline_distribution<'py>(&self, py: Python<'py>, n_seeds: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let b = baseline_frame_distribution(&self.inputs.posts_by_org, n_seeds, seed).map_err(err)?;
        py_value(py, &b)
    }

    /// Deviation matrix rows plus the average-linkage dendrogram.
    #[pyo3(signature = (n_seeds = 5, seed = 0))]
    fn deviation_matrix<'py>(&self, py: Python<'py>, n_seeds: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let b = baseline_frame_distribution(&self.inputs.posts_by_org, n_seeds, seed).map_err(err)?;
        let m = union_deviation_matrix(&self.inputs.posts_by_org, &b, &Registry::builtin());
        let dendrogram = cluster_matrix(&m, analysis::Linkage::Average).map_err(err)?;
        py_value(py, &serde_json::json!({ "matrix": m, "dendrogram": dendrogram }))
    }

    /// Seed summaries and consensus cells. `window_variant` reruns the study
    /// at a 3-day window.
    #[pyo3(signature = (mode = "multi_seed_balance", n_seeds = 20, base_seed = 0))]
    fn robustness<'py>(&self, py: Python<'py>, mode: &str, n_seeds: usize, base_seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let mode: RobustnessMode = mode.parse().map_err(err)?;
        let params = RobustnessParams {
            n_seeds,
            base_seed,
            ..Default::default()
        };
        let r = if mode == RobustnessMode::WindowVariant {
            analysis::robustness_run(&self.inputs, &self.config, mode, &params)
        } else {
            robustness_on_study(&self.study, self.config.window_days, mode, &params)
        }
        .map_err(err)?;
        let v = serde_json::json!({
            "mode": r.mode,
            "window_days": r.window_days,
            "summaries": r.summaries,
            "cells": r.cells,
        });
        py_value(py, &v)
    }

    fn __repr__(&self) -> String {
        format!(
            "Study(orgs={}, instances={}, dropped={}, window_days={})",
            self.inputs.posts_by_org.len(),
            self.study.instances.len(),
            self.study.dropped.len(),
            self.config.window_days
        )
    }
}

#[pymodule]
fn framestudy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Study>()?;
    m.add_function(wrap_pyfunction!(t_test, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(newcombe_diff_ci, m)?)?;
    m.add_function(wrap_pyfunction!(percentile, m)?)?;
    m.add_function(wrap_pyfunction!(seed_consensus, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_name, m)?)?;
    m.add_function(wrap_pyfunction!(classify_text, m)?)?;
    Ok(())
}
