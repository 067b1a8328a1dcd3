//! Python bindings: compile a grammar, parse, read trees and compare with the
//! reference interpreter.

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use pegll::engine::{parse_with, ParseOptions};
use pegll::grammar::SlotId;
use pegll::oracle::eval_start;
use pegll::{CompiledGrammar, Forest};

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

/// A validated, desugared grammar with its slot table.
#[pyclass(name = "Grammar", module = "pegll", frozen)]
struct PyGrammar {
    inner: Arc<CompiledGrammar>,
}

#[pymethods]
impl PyGrammar {
    /// Compiles grammar text. Raises ValueError listing every diagnostic.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        CompiledGrammar::from_dsl(text)
            .map(|g| PyGrammar { inner: Arc::new(g) })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        Self::new(&text)
    }

    #[getter]
    fn start(&self) -> String {
        self.inner.core.start.clone()
    }

    /// Nonterminals after desugaring, in slot-table order.
    #[getter]
    fn nonterminals(&self) -> Vec<String> {
        self.inner.slots.nts.iter().map(|nt| nt.name.clone()).collect()
    }

    fn nullable(&self) -> BTreeMap<String, bool> {
        let nullable = self.inner.nullable();
        self.inner
            .slots
            .nts
            .iter()
            .map(|nt| (nt.name.clone(), nullable.of(&nt.name)))
            .collect()
    }

    fn first(&self) -> BTreeMap<String, Vec<String>> {
        let first = self.inner.first();
        self.inner
            .slots
            .nts
            .iter()
            .map(|nt| (nt.name.clone(), first.of(&nt.name).iter().cloned().collect()))
            .collect()
    }

    fn slots(&self) -> Vec<String> {
        (0..self.inner.slots.len())
            .map(|n| self.inner.slots.display_slot(SlotId(n as u32)))
            .collect()
    }

    #[pyo3(signature = (input, trace = false))]
    fn parse(&self, input: &str, trace: bool) -> PyParseResult {
        let result = parse_with(&self.inner, input, &ParseOptions { trace });
        PyParseResult {
            grammar: Arc::clone(&self.inner),
            result,
        }
    }

    /// Extents and failure flag from the reference interpreter.
    fn oracle(&self, input: &str) -> (Vec<usize>, bool) {
        let r = eval_start(&self.inner, input);
        (r.extents.into_iter().collect(), r.failed)
    }

    /// True when the engine and the reference interpreter report the same extents.
    fn compare(&self, input: &str) -> bool {
        let engine = parse_with(&self.inner, input, &ParseOptions::default());
        engine.extents == eval_start(&self.inner, input).extents
    }

    fn __repr__(&self) -> String {
        format!(
            "Grammar(start={:?}, rules={}, slots={})",
            self.inner.core.start,
            self.inner.core.rules.len(),
            self.inner.slots.len()
        )
    }
}

#[pyclass(name = "ParseResult", module = "pegll", frozen)]
struct PyParseResult {
    grammar: Arc<CompiledGrammar>,
    result: pegll::ParseResult,
}

#[pymethods]
impl PyParseResult {
    #[getter]
    fn matched(&self) -> bool {
        self.result.matched
    }

    #[getter]
    fn full(&self) -> bool {
        self.result.full
    }

    #[getter]
    fn extents(&self) -> Vec<usize> {
        self.result.extents.iter().copied().collect()
    }

    #[getter]
    fn max_extent(&self) -> Option<usize> {
        self.result.max_extent
    }

    /// Furthest failure as (position, expected token names), if any.
    #[getter]
    fn furthest_failure(&self) -> Option<(usize, Vec<String>)> {
        self.result
            .furthest_failure
            .as_ref()
            .map(|f| (f.position, f.expected.clone()))
    }

    /// BSR elements as (slot label, i, j, k), sorted.
    #[getter]
    fn bsr(&self) -> Vec<(String, usize, usize, usize)> {
        self.result
            .bsr
            .iter()
            .map(|e| (self.grammar.slots.bsr_label(e.slot), e.i, e.j, e.k))
            .collect()
    }

    #[getter]
    fn stats(&self) -> BTreeMap<&'static str, usize> {
        let s = &self.result.stats;
        BTreeMap::from([
            ("descriptors", s.descriptors),
            ("reprocessed", s.reprocessed),
            ("seen", s.seen),
            ("bsr", s.bsr),
            ("crf_nodes", s.crf_nodes),
            ("crf_edges", s.crf_edges),
            ("popped", s.popped),
        ])
    }

    #[getter]
    fn trace(&self) -> Vec<String> {
        self.result.trace.clone()
    }

    /// Up to `cap` trees for the start symbol ending at `extent` (default:
    /// the greatest extent), as nested dicts, plus a truncation flag.
    #[pyo3(signature = (cap = 10, extent = None))]
    fn trees<'py>(&self, py: Python<'py>, cap: usize, extent: Option<usize>) -> PyResult<(Bound<'py, PyList>, bool)> {
        if cap == 0 {
            return Err(PyValueError::new_err(pegll::forest::ForestError::ZeroCap.to_string()));
        }
        let list = PyList::empty(py);
        let Some(k) = extent.or(self.result.max_extent) else {
            return Ok((list, false));
        };
        let forest = Forest::new(&self.grammar.slots, &self.result.bsr);
        let ex = forest
            .extract_trees(self.grammar.slots.start, 0, k, cap)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        for tree in &ex.trees {
            list.append(json_to_py(py, &tree.to_json())?)?;
        }
        Ok((list, ex.truncated))
    }

    fn __repr__(&self) -> String {
        format!(
            "ParseResult(matched={}, full={}, extents={:?})",
            self.result.matched, self.result.full, self.result.extents
        )
    }
}

#[pymodule(name = "pegll")]
fn pegll_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrammar>()?;
    m.add_class::<PyParseResult>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
