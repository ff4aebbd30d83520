use kdvlab_core::control_tools::{bump_control, hum_control as hum};
use kdvlab_core::critical_lengths as cl;
use kdvlab_core::kdv_solver::{solve_linear, solve_nonlinear, Grid};
use kdvlab_core::obstruction_experiments::{nonlinear_steer, sign_definiteness_sweep, SteerConfig, SteerPlan, SweepGrid};
use kdvlab_core::{complex_cubic, spectral, toy_ode, KdvError};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: KdvError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

#[pyclass(name = "CriticalPair", frozen)]
struct PyPair {
    inner: cl::CriticalPair,
}

#[pymethods]
impl PyPair {
    #[new]
    fn new(k: u32, l: u32) -> PyResult<Self> {
        Ok(PyPair { inner: cl::CriticalPair::new(k, l).map_err(err)? })
    }
    #[getter]
    fn k(&self) -> u32 {
        self.inner.k
    }
    #[getter]
    fn l(&self) -> u32 {
        self.inner.l
    }
    #[getter(L)]
    fn length(&self) -> f64 {
        self.inner.len
    }
    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }
    #[getter(E)]
    fn e(&self) -> Complex64 {
        self.inner.e
    }
    #[getter]
    fn dim_m(&self) -> u32 {
        self.inner.dim_m
    }
    #[getter]
    fn obstruction_applies(&self) -> bool {
        self.inner.obstruction_applies
    }
    fn __repr__(&self) -> String {
        format!("CriticalPair(k={}, l={}, L={:.6}, p={:.6}, E={:.6})", self.inner.k, self.inner.l, self.inner.len, self.inner.p, self.inner.e)
    }
}

/// Roots of λ³ + λ + iz = 0, sorted.
#[pyfunction]
fn solve_cubic(z: Complex64) -> PyResult<Vec<Complex64>> {
    Ok(complex_cubic::solve_cubic(z).map_err(err)?.lambda.to_vec())
}

#[pyfunction]
#[pyo3(name = "h_value", signature = (z, L))]
#[allow(non_snake_case)]
fn h_value(z: Complex64, L: f64) -> PyResult<Complex64> {
    spectral::h_value(z, L).map_err(err)
}

/// Real zeros of H(·, L) in [zmin, zmax].
#[pyfunction]
#[pyo3(signature = (L, zmin, zmax))]
#[allow(non_snake_case)]
fn find_real_zeros(L: f64, zmin: f64, zmax: f64) -> PyResult<Vec<f64>> {
    Ok(spectral::find_real_zeros_h(L, (zmin, zmax)).map_err(err)?.zeros.iter().map(|z| z.z).collect())
}

#[pyfunction]
fn enumerate_pairs(smax: u64) -> PyResult<Vec<PyPair>> {
    Ok(cl::enumerate_pairs(smax).map_err(err)?.into_iter().map(|inner| PyPair { inner }).collect())
}

/// Solution driven by a centred bump control; returns (x, t, y).
#[pyfunction]
#[pyo3(signature = (L, N, dt, T, amplitude = 1.0, nonlinear = false))]
#[allow(non_snake_case)]
fn simulate(L: f64, N: usize, dt: f64, T: f64, amplitude: f64, nonlinear: bool) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let grid = Grid::new(L, N, dt, T).map_err(err)?;
    let u = bump_control(T, 0.5 * T, 0.25 * T, amplitude, dt).map_err(err)?;
    let y0 = vec![0.0; grid.interior()];
    let traj = if nonlinear { solve_nonlinear(&grid, &y0, &u) } else { solve_linear(&grid, &y0, &u, None) }.map_err(err)?;
    Ok((grid.xs(), traj.times, traj.states))
}

/// Minimum-norm control reaching `target` (values at interior nodes).
#[pyfunction]
#[pyo3(signature = (L, N, dt, T, target, tikhonov = 1e-8, project = false))]
#[allow(non_snake_case)]
fn hum_control<'py>(py: Python<'py>, L: f64, N: usize, dt: f64, T: f64, target: Vec<f64>, tikhonov: f64, project: bool) -> PyResult<Bound<'py, PyAny>> {
    let grid = Grid::new(L, N, dt, T).map_err(err)?;
    to_py(py, &hum(&grid, &target, tikhonov, project).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (T, n_samples = 200, seed = 0))]
#[allow(non_snake_case)]
fn toy_check<'py>(py: Python<'py>, T: f64, n_samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| toy_ode::toy_obstruction_check(T, n_samples, seed)).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (k, l, T_list, n_samples = 20, seed = 0, N = 256, steps = 2000))]
#[allow(non_snake_case)]
fn obstruction_sweep<'py>(py: Python<'py>, k: u32, l: u32, T_list: Vec<f64>, n_samples: usize, seed: u64, N: usize, steps: usize) -> PyResult<Bound<'py, PyAny>> {
    let pair = cl::CriticalPair::new(k, l).map_err(err)?;
    let r = py.detach(|| sign_definiteness_sweep(&pair, &T_list, n_samples, seed, SweepGrid { n: N, steps })).map_err(err)?;
    to_py(py, &r)
}

/// Steers 0 to ρ·(cos a, sin a) in the unreachable plane at T = t_factor·π/p.
#[pyfunction]
#[pyo3(signature = (k, l, t_factor = 1.2, rho = 1e-3, angle_deg = 0.0, iterations = 8))]
fn steer<'py>(py: Python<'py>, k: u32, l: u32, t_factor: f64, rho: f64, angle_deg: f64, iterations: usize) -> PyResult<Bound<'py, PyAny>> {
    let pair = cl::CriticalPair::new(k, l).map_err(err)?;
    let out = py
        .detach(|| {
            let plan = SteerPlan::new(&pair, t_factor * std::f64::consts::PI / pair.p, SteerConfig::default())?;
            let a = angle_deg.to_radians();
            let b = &plan.basis.functions;
            let y_t: Vec<f64> = b[0].iter().zip(&b[1]).map(|(u, v)| rho * (a.cos() * u + a.sin() * v)).collect();
            nonlinear_steer(&plan, &vec![0.0; y_t.len()], &y_t, rho, iterations)
        })
        .map_err(err)?;
    to_py(py, &out)
}

#[pymodule]
fn kdvlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPair>()?;
    m.add_function(wrap_pyfunction!(solve_cubic, m)?)?;
    m.add_function(wrap_pyfunction!(h_value, m)?)?;
    m.add_function(wrap_pyfunction!(find_real_zeros, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(hum_control, m)?)?;
    m.add_function(wrap_pyfunction!(toy_check, m)?)?;
    m.add_function(wrap_pyfunction!(obstruction_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(steer, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
