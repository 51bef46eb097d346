//! Python bindings: group/lattice inspection plus the config-driven index,
//! sweep and criterion operations, mirroring the CLI's JSON schema. Reports
//! come back as plain Python dicts/lists.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyString};
use serde_json::Value;

use ::equifuller::config::Config;
use ::equifuller::error::EquifullerError;
use ::equifuller::fuller::fuller_index;
use ::equifuller::group::{enumerate_subgroup_classes, FiniteGroup, IsotropyLattice};
use ::equifuller::nondeg::{s1_nondegenerate, z2_nondegenerate};
use ::equifuller::sweep::sweep_family;
use ::equifuller::systems::BUILTIN_NAMES;

fn to_py_err(e: EquifullerError) -> PyErr {
    match e {
        EquifullerError::Config(_)
        | EquifullerError::InvalidGroup(_)
        | EquifullerError::InvalidAction(_)
        | EquifullerError::GroupTooLarge(..) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64()
                    .ok_or_else(|| PyValueError::new_err("non-finite number in report"))?
                    .into_pyobject(py)?
                    .into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, value_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

/// A finite group with its isotropy lattice and table of marks.
#[pyclass(module = "equifuller")]
struct Group {
    lattice: Arc<IsotropyLattice>,
}

impl Group {
    fn build(group: FiniteGroup) -> PyResult<Self> {
        let lattice = enumerate_subgroup_classes(&group).map_err(to_py_err)?;
        Ok(Self {
            lattice: Arc::new(lattice),
        })
    }
}

#[pymethods]
impl Group {
    #[staticmethod]
    fn trivial() -> PyResult<Self> {
        Self::build(FiniteGroup::trivial())
    }

    #[staticmethod]
    fn cyclic(n: usize) -> PyResult<Self> {
        Self::build(FiniteGroup::cyclic(n).map_err(to_py_err)?)
    }

    #[staticmethod]
    fn dihedral(n: usize) -> PyResult<Self> {
        Self::build(FiniteGroup::dihedral(n).map_err(to_py_err)?)
    }

    #[staticmethod]
    fn symmetric(n: usize) -> PyResult<Self> {
        Self::build(FiniteGroup::symmetric(n).map_err(to_py_err)?)
    }

    #[staticmethod]
    #[pyo3(signature = (mul, names=None))]
    fn from_table(mul: Vec<Vec<usize>>, names: Option<Vec<String>>) -> PyResult<Self> {
        Self::build(FiniteGroup::from_table(mul, names).map_err(to_py_err)?)
    }

    fn order(&self) -> usize {
        self.lattice.group().order()
    }

    /// Conjugacy class names of subgroups, largest subgroups first.
    fn class_names(&self) -> Vec<String> {
        self.lattice
            .classes()
            .iter()
            .map(|c| c.name.clone())
            .collect()
    }

    fn weyl_orders(&self) -> Vec<usize> {
        self.lattice
            .classes()
            .iter()
            .map(|c| c.weyl_order)
            .collect()
    }

    /// Table of marks in class order: marks[k][l] = |(G/L_l)^{K_k}|.
    fn marks(&self) -> Vec<Vec<i64>> {
        self.lattice.marks().clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Group(order={}, classes={})",
            self.lattice.group().order(),
            self.lattice.len()
        )
    }
}

/// Names of the builtin systems accepted in config {"system": ...}.
#[pyfunction]
fn builtin_systems() -> Vec<&'static str> {
    BUILTIN_NAMES.to_vec()
}

fn parse_config(config_json: &str) -> PyResult<Config> {
    Config::from_str(config_json).map_err(to_py_err)
}

/// Compute the equivariant Fuller index for a JSON config (same schema as
/// the CLI); returns the report dict.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None))]
fn index<'py>(
    py: Python<'py>,
    config_json: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config_json)?;
    let scenario = cfg.resolve_scenario().map_err(to_py_err)?;
    let opts = cfg.fuller_options(seed).map_err(to_py_err)?;
    let result = fuller_index(
        &scenario.builtin.system,
        &scenario.builtin.lattice,
        &scenario.region,
        scenario.window,
        &scenario.lambda,
        scenario.builtin.seed_radius,
        &opts,
    )
    .map_err(to_py_err)?;
    value_to_py(py, &result.to_json(&scenario.builtin.lattice))
}

/// Trace a one-parameter family (config needs a "sweep" section); returns
/// the report dict with trace, events and the invariance verdict.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None))]
fn sweep<'py>(
    py: Python<'py>,
    config_json: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config_json)?;
    let scenario = cfg.resolve_scenario().map_err(to_py_err)?;
    let (opts, range) = cfg.sweep_options(seed).map_err(to_py_err)?;
    let result = sweep_family(
        &scenario.builtin.system,
        &scenario.builtin.lattice,
        &scenario.region,
        scenario.window,
        range,
        scenario.builtin.seed_radius,
        &opts,
    )
    .map_err(to_py_err)?;
    value_to_py(py, &result.to_json(&scenario.builtin.lattice))
}

/// Reflection-symmetry criterion for an affine family
/// h(lambda) = constant + linear . lambda; returns the verdict string.
#[pyfunction]
#[pyo3(signature = (constant, linear, lambda0, fd_step=1e-4))]
fn check_z2(constant: f64, linear: Vec<f64>, lambda0: Vec<f64>, fd_step: f64) -> String {
    let verdict = z2_nondegenerate(
        move |_v, lam: &[f64]| {
            constant + linear.iter().zip(lam).map(|(c, l)| c * l).sum::<f64>()
        },
        &lambda0,
        fd_step,
    );
    serde_json::to_value(verdict)
        .expect("verdict serializes")
        .as_str()
        .expect("verdict is a string")
        .to_string()
}

/// Rotation-action criterion for affine coefficient families a, b; returns
/// the verdict string.
#[pyfunction]
#[pyo3(signature = (a_constant, a_linear, b_constant, b_linear, lambda0, fd_step=1e-4))]
fn check_s1(
    a_constant: f64,
    a_linear: Vec<f64>,
    b_constant: f64,
    b_linear: Vec<f64>,
    lambda0: Vec<f64>,
    fd_step: f64,
) -> String {
    let s = lambda0.len();
    let verdict = s1_nondegenerate(
        move |_v, _w, lam: &[f64]| {
            a_constant + a_linear.iter().zip(lam).map(|(c, l)| c * l).sum::<f64>()
        },
        move |_v, _w, lam: &[f64]| {
            b_constant + b_linear.iter().zip(lam).map(|(c, l)| c * l).sum::<f64>()
        },
        &lambda0,
        s,
        fd_step,
    );
    serde_json::to_value(verdict)
        .expect("verdict serializes")
        .as_str()
        .expect("verdict is a string")
        .to_string()
}

#[pymodule]
fn equifuller(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Group>()?;
    m.add_function(wrap_pyfunction!(builtin_systems, m)?)?;
    m.add_function(wrap_pyfunction!(index, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(check_z2, m)?)?;
    m.add_function(wrap_pyfunction!(check_s1, m)?)?;
    Ok(())
}
