//! Python bindings: the main types and operations of the analysis pipeline.
//!
//! The module mirrors the Rust API closely; points travel as `[x, y]`
//! sequences, domains as `(x0, x1, y0, y1)` tuples, and reports as JSON
//! strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::collections::BTreeMap;
use std::path::PathBuf;

use irtmap::align;
use irtmap::config::{parse_config, RunConfig};
use irtmap::data::{dichotomize, load_responses, Layout, ResponseMatrix};
use irtmap::diagnostics;
use irtmap::latent::{LatentConfig, Point};
use irtmap::lsirm;
use irtmap::ns;
use irtmap::pipeline;
use irtmap::synth;

fn err(e: irtmap::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_layout(layout: &str) -> PyResult<Layout> {
    match layout {
        "wide" => Ok(Layout::Wide),
        "long" => Ok(Layout::Long),
        other => Err(PyValueError::new_err(format!(
            "layout must be \"wide\" or \"long\", got {other:?}"
        ))),
    }
}

fn domain_from(t: (f64, f64, f64, f64)) -> PyResult<ns::Domain2D> {
    ns::Domain2D::new(t.0, t.1, t.2, t.3).map_err(err)
}

fn latent_to_py(cfg: &LatentConfig) -> (Vec<String>, Vec<Point>) {
    (cfg.labels().to_vec(), cfg.points().to_vec())
}

/// Binary response matrix with respondent and item identifiers.
#[pyclass(name = "ResponseMatrix", skip_from_py_object)]
#[derive(Clone)]
struct PyResponseMatrix {
    inner: ResponseMatrix,
}

#[pymethods]
impl PyResponseMatrix {
    /// Build from explicit 0/1 cells (`None` = missing), row-major by
    /// respondent.
    #[new]
    #[pyo3(signature = (respondent_ids, item_ids, values, group_label=None))]
    fn new(
        respondent_ids: Vec<String>,
        item_ids: Vec<String>,
        values: Vec<Vec<Option<u8>>>,
        group_label: Option<String>,
    ) -> PyResult<Self> {
        let flat: Vec<Option<u8>> = values.into_iter().flatten().collect();
        Ok(Self {
            inner: ResponseMatrix::new(respondent_ids, item_ids, flat, group_label).map_err(err)?,
        })
    }

    /// Load a Likert CSV and dichotomize it (positive when `>= threshold`).
    #[staticmethod]
    #[pyo3(signature = (path, layout="wide", threshold=4, group_label=None))]
    fn load(
        path: PathBuf,
        layout: &str,
        threshold: u8,
        group_label: Option<String>,
    ) -> PyResult<Self> {
        let likert = load_responses(&path, parse_layout(layout)?).map_err(err)?;
        let mut inner = dichotomize(&likert, threshold).map_err(err)?;
        inner.group_label = group_label;
        Ok(Self { inner })
    }

    fn n_respondents(&self) -> usize {
        self.inner.n_respondents()
    }

    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    fn respondent_ids(&self) -> Vec<String> {
        self.inner.respondent_ids.clone()
    }

    fn item_ids(&self) -> Vec<String> {
        self.inner.item_ids.clone()
    }

    fn values(&self) -> Vec<Vec<Option<u8>>> {
        (0..self.inner.n_respondents())
            .map(|k| (0..self.inner.n_items()).map(|i| self.inner.get(k, i)).collect())
            .collect()
    }

    /// Per-item positive proportions (`None` for all-missing items).
    fn positive_proportions(&self) -> PyResult<Vec<Option<f64>>> {
        irtmap::report::positive_proportions(&self.inner).map_err(err)
    }
}

/// Run configuration (TOML-backed).
#[pyclass(name = "RunConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    fn new() -> Self {
        Self {
            inner: RunConfig::default(),
        }
    }

    /// Parse TOML text; unset keys take their defaults.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_config(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: irtmap::config::load_config(&path).map_err(err)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    /// The resolved configuration as a JSON string.
    fn json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Stored MCMC draws plus bookkeeping.
#[pyclass(name = "PosteriorChain", skip_from_py_object)]
#[derive(Clone)]
struct PyPosteriorChain {
    inner: lsirm::PosteriorChain,
}

#[pymethods]
impl PyPosteriorChain {
    fn n_draws(&self) -> usize {
        self.inner.n_draws()
    }

    #[getter]
    fn aligned(&self) -> bool {
        self.inner.aligned
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn log_posterior(&self) -> Vec<f64> {
        self.inner.log_posterior.clone()
    }

    fn acceptance_rates(&self) -> BTreeMap<String, f64> {
        let a = &self.inner.acceptance;
        let mut out = BTreeMap::new();
        out.insert("beta".to_string(), a.beta);
        out.insert("theta".to_string(), a.theta);
        out.insert("z".to_string(), a.z);
        out.insert("w".to_string(), a.w);
        if let Some(g) = a.gamma {
            out.insert("gamma".to_string(), g);
        }
        out
    }

    /// Posterior means of the item effects.
    fn beta_means(&self) -> Vec<f64> {
        let nd = self.inner.n_draws() as f64;
        let mut out = vec![0.0; self.inner.n_items()];
        for draw in &self.inner.draws {
            for (acc, b) in out.iter_mut().zip(&draw.beta) {
                *acc += b / nd;
            }
        }
        out
    }

    /// Posterior means of the respondent effects.
    fn theta_means(&self) -> Vec<f64> {
        let nd = self.inner.n_draws() as f64;
        let mut out = vec![0.0; self.inner.n_respondents()];
        for draw in &self.inner.draws {
            for (acc, t) in out.iter_mut().zip(&draw.theta) {
                *acc += t / nd;
            }
        }
        out
    }
}

/// A chain aligned to its maximum-posterior draw.
#[pyclass(name = "AlignedChain", skip_from_py_object)]
#[derive(Clone)]
struct PyAlignedChain {
    inner: align::AlignedChain,
}

#[pymethods]
impl PyAlignedChain {
    fn chain(&self) -> PyPosteriorChain {
        PyPosteriorChain {
            inner: self.inner.chain.clone(),
        }
    }

    #[getter]
    fn reference_index(&self) -> usize {
        self.inner.reference_index
    }

    /// Aligned posterior-mean positions: ((respondent_ids, z), (item_ids, w)).
    #[allow(clippy::type_complexity)]
    fn posterior_mean_positions(
        &self,
    ) -> PyResult<((Vec<String>, Vec<Point>), (Vec<String>, Vec<Point>))> {
        let (z, w) = lsirm::posterior_mean_positions(&self.inner.chain).map_err(err)?;
        Ok((latent_to_py(&z), latent_to_py(&w)))
    }
}

/// Ensemble of independent point-process fits.
#[pyclass(name = "NsEnsemble", skip_from_py_object)]
#[derive(Clone)]
struct PyNsEnsemble {
    inner: ns::NsEnsemble,
}

#[pymethods]
impl PyNsEnsemble {
    fn n_runs(&self) -> usize {
        self.inner.n_runs()
    }

    /// Per-run (seed, centers, alpha, omega, log_posterior).
    #[allow(clippy::type_complexity)]
    fn runs(&self) -> Vec<(u64, Vec<Point>, f64, f64, f64)> {
        self.inner
            .runs
            .iter()
            .map(|r| {
                (
                    r.seed,
                    r.state.centers.clone(),
                    r.state.alpha,
                    r.state.omega,
                    r.log_posterior,
                )
            })
            .collect()
    }

    /// Histogram of the center count and its mode (ties to the smaller).
    fn cluster_count_mode(&self) -> PyResult<(BTreeMap<usize, usize>, usize)> {
        ns::cluster_count_mode(&self.inner).map_err(err)
    }
}

/// Kernel density estimate of the pooled ensemble centers.
#[pyclass(name = "DensityGrid", skip_from_py_object)]
#[derive(Clone)]
struct PyDensityGrid {
    inner: ns::DensityGrid,
}

#[pymethods]
impl PyDensityGrid {
    #[getter]
    fn xs(&self) -> Vec<f64> {
        self.inner.xs.clone()
    }

    #[getter]
    fn ys(&self) -> Vec<f64> {
        self.inner.ys.clone()
    }

    /// Row-major by y: `values[iy][ix]`.
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner
            .values
            .chunks(self.inner.nx())
            .map(|row| row.to_vec())
            .collect()
    }

    #[getter]
    fn bandwidth(&self) -> (f64, f64) {
        self.inner.bandwidth
    }

    fn value_at(&self, p: Point) -> f64 {
        self.inner.value_at(p)
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }
}

/// Inverse-logit response probability for one respondent-item pair.
#[pyfunction]
fn logit_prob(theta_k: f64, beta_i: f64, gamma: f64, z_k: Point, w_i: Point) -> f64 {
    lsirm::logit_prob(theta_k, beta_i, gamma, z_k, w_i)
}

/// Model log-likelihood of a response matrix.
#[pyfunction]
#[pyo3(signature = (matrix, beta, theta, z, w, gamma=1.0, sigma_theta_sq=1.0))]
fn log_likelihood(
    matrix: &PyResponseMatrix,
    beta: Vec<f64>,
    theta: Vec<f64>,
    z: Vec<Point>,
    w: Vec<Point>,
    gamma: f64,
    sigma_theta_sq: f64,
) -> PyResult<f64> {
    let params = lsirm::LsirmParams {
        beta,
        theta,
        z,
        w,
        gamma,
        sigma_theta_sq,
    };
    lsirm::log_likelihood(&matrix.inner, &params).map_err(err)
}

/// Simulate a response matrix from the generative model; returns the matrix
/// and the truth as a JSON string.
#[pyfunction]
#[pyo3(signature = (n, p, seed, gamma=1.0))]
fn simulate_lsirm(n: usize, p: usize, seed: u64, gamma: f64) -> PyResult<(PyResponseMatrix, String)> {
    let spec = synth::TruthSpec {
        gamma,
        ..synth::TruthSpec::default()
    };
    let (matrix, truth) = synth::simulate_lsirm(n, p, &spec, seed).map_err(err)?;
    let truth_json =
        serde_json::to_string(&truth).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((PyResponseMatrix { inner: matrix }, truth_json))
}

/// Simulate a Thomas process with fixed parents; returns (offspring,
/// discarded count).
#[pyfunction]
fn simulate_thomas(
    parents: Vec<Point>,
    alpha: f64,
    omega: f64,
    domain: (f64, f64, f64, f64),
    seed: u64,
) -> PyResult<(Vec<Point>, usize)> {
    let dom = domain_from(domain)?;
    let truth = synth::simulate_thomas(&synth::ParentSpec::Fixed(parents), alpha, omega, &dom, seed)
        .map_err(err)?;
    Ok((truth.offspring, truth.discarded))
}

/// Draw posterior chains (one RNG stream per chain index).
#[pyfunction]
#[pyo3(signature = (matrix, config, seed, n_chains=1))]
fn sample_posterior(
    py: Python<'_>,
    matrix: &PyResponseMatrix,
    config: &PyRunConfig,
    seed: u64,
    n_chains: usize,
) -> PyResult<Vec<PyPosteriorChain>> {
    let (matrix, config) = (matrix.inner.clone(), config.inner.clone());
    let chains = py
        .detach(move || lsirm::sample_posterior_chains(&matrix, &config, seed, n_chains))
        .map_err(err)?;
    Ok(chains
        .into_iter()
        .map(|inner| PyPosteriorChain { inner })
        .collect())
}

/// Align every draw to the maximum-log-posterior draw.
#[pyfunction]
fn align_chain(chain: &PyPosteriorChain) -> PyResult<PyAlignedChain> {
    Ok(PyAlignedChain {
        inner: align::align_chain(chain.inner.clone()).map_err(err)?,
    })
}

/// Map the moving group onto the reference group via the posterior-mean
/// item configurations.
#[pyfunction]
fn align_across_groups(
    reference: &PyAlignedChain,
    moving: &PyAlignedChain,
) -> PyResult<PyAlignedChain> {
    Ok(PyAlignedChain {
        inner: align::align_across_groups(&reference.inner, moving.inner.clone()).map_err(err)?,
    })
}

/// Least-squares rigid fit; returns (rotation 2x2, translation, residual).
#[pyfunction]
#[allow(clippy::type_complexity)]
fn procrustes_fit(
    source: Vec<Point>,
    target: Vec<Point>,
) -> PyResult<([[f64; 2]; 2], Point, f64)> {
    let t = align::procrustes_fit_points(&source, &target).map_err(err)?;
    let r = align::residual(&t, &source, &target);
    Ok((t.rotation, t.translation, r))
}

/// Gelman-Rubin diagnostics over chains; returns (names, values).
#[pyfunction]
fn rhat(chains: Vec<PyRef<PyPosteriorChain>>) -> PyResult<(Vec<String>, Vec<f64>)> {
    let refs: Vec<&lsirm::PosteriorChain> = chains.iter().map(|c| &c.inner).collect();
    let report = diagnostics::rhat(&refs).map_err(err)?;
    Ok((report.names, report.values))
}

/// Posterior predictive check of per-item positive proportions.
#[pyfunction]
#[pyo3(signature = (chain, matrix, n_rep=200, seed=0))]
fn posterior_predictive_check(
    chain: &PyPosteriorChain,
    matrix: &PyResponseMatrix,
    n_rep: usize,
    seed: u64,
) -> PyResult<String> {
    let report = diagnostics::posterior_predictive_check(&chain.inner, &matrix.inner, n_rep, seed)
        .map_err(err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Bounding box of the points expanded by a margin fraction.
#[pyfunction]
fn make_domain(points: Vec<Point>, margin: f64) -> PyResult<(f64, f64, f64, f64)> {
    let d = ns::make_domain(&points, margin).map_err(err)?;
    Ok((d.x0, d.x1, d.y0, d.y1))
}

/// Kernel mass of a Gaussian centered at `c` over the domain.
#[pyfunction]
fn kernel_mass(c: Point, omega: f64, domain: (f64, f64, f64, f64)) -> PyResult<f64> {
    Ok(ns::kernel_mass(c, omega, &domain_from(domain)?))
}

/// Neyman-Scott log-likelihood of a point pattern.
#[pyfunction]
fn ns_log_likelihood(
    points: Vec<Point>,
    centers: Vec<Point>,
    alpha: f64,
    omega: f64,
    domain: (f64, f64, f64, f64),
) -> PyResult<f64> {
    let state = ns::NsState {
        centers,
        alpha,
        omega,
    };
    ns::ns_log_likelihood(&points, &state, &domain_from(domain)?).map_err(err)
}

/// Uniform alpha prior bounds for a target cluster-count range.
#[pyfunction]
fn alpha_prior_bounds(
    n_points: usize,
    domain: (f64, f64, f64, f64),
    m_min: usize,
    m_max: usize,
) -> PyResult<(f64, f64)> {
    ns::alpha_prior_bounds(n_points, &domain_from(domain)?, m_min, m_max).map_err(err)
}

/// Run the birth-death ensemble over a point pattern.
#[pyfunction]
#[pyo3(signature = (points, domain, config, n_runs, seed))]
fn run_ensemble(
    py: Python<'_>,
    points: Vec<Point>,
    domain: (f64, f64, f64, f64),
    config: &PyRunConfig,
    n_runs: usize,
    seed: u64,
) -> PyResult<PyNsEnsemble> {
    let dom = domain_from(domain)?;
    let fit_cfg = ns::NsFitConfig::resolve(&config.inner.ns, points.len(), &dom).map_err(err)?;
    let inner = py
        .detach(move || ns::run_ensemble(&points, &dom, &fit_cfg, n_runs, seed))
        .map_err(err)?;
    Ok(PyNsEnsemble { inner })
}

/// BIC-selected state among runs with exactly `m` centers; returns
/// (centers, alpha, omega, bic).
#[pyfunction]
#[allow(clippy::type_complexity)]
fn select_centers_bic(
    ensemble: &PyNsEnsemble,
    points: Vec<Point>,
    domain: (f64, f64, f64, f64),
    m: usize,
    config: &PyRunConfig,
) -> PyResult<(Vec<Point>, f64, f64, f64)> {
    let sel = ns::select_centers_bic(
        &ensemble.inner,
        &points,
        &domain_from(domain)?,
        m,
        config.inner.ns.bic_penalty,
    )
    .map_err(err)?;
    Ok((sel.state.centers, sel.state.alpha, sel.state.omega, sel.bic))
}

/// Density of the pooled ensemble centers on a regular grid.
#[pyfunction]
fn center_density(
    ensemble: &PyNsEnsemble,
    domain: (f64, f64, f64, f64),
    config: &PyRunConfig,
) -> PyResult<PyDensityGrid> {
    let inner = ns::center_density(
        &ensemble.inner,
        &domain_from(domain)?,
        config.inner.ns.kde_grid,
        config.inner.ns.kde_bandwidth,
    )
    .map_err(err)?;
    Ok(PyDensityGrid { inner })
}

/// Drop centers in low-density regions; returns (kept centers, dropped
/// indices with density ratios).
#[pyfunction]
#[allow(clippy::type_complexity)]
fn adjust_centers(
    centers: Vec<Point>,
    alpha: f64,
    omega: f64,
    density: &PyDensityGrid,
    tau: f64,
) -> PyResult<(Vec<Point>, Vec<(usize, f64)>)> {
    let state = ns::NsState {
        centers,
        alpha,
        omega,
    };
    let adj = ns::adjust_centers(&state, &density.inner, tau).map_err(err)?;
    Ok((
        adj.centers,
        adj.dropped
            .iter()
            .map(|d| (d.index, d.density_ratio))
            .collect(),
    ))
}

/// Nearest-center membership per item (ties to the lowest index).
#[pyfunction]
fn assign_items(points: Vec<Point>, centers: Vec<Point>) -> PyResult<Vec<usize>> {
    ns::assign_items(&points, &centers).map_err(err)
}

/// Nearest of centers plus their midpoint per student; midpoint membership
/// reports as None. Returns (midpoint, memberships).
#[pyfunction]
fn assign_students(
    points: Vec<Point>,
    centers: Vec<Point>,
) -> PyResult<(Point, Vec<Option<usize>>)> {
    let a = ns::assign_students(&points, &centers).map_err(err)?;
    Ok((
        a.midpoint,
        a.memberships
            .iter()
            .map(|m| match m {
                ns::StudentCluster::Center(j) => Some(*j),
                ns::StudentCluster::Midpoint => None,
            })
            .collect(),
    ))
}

/// Run the full pipeline from a config file; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (config_path, seed=None, out_dir=None))]
fn run_pipeline(
    py: Python<'_>,
    config_path: PathBuf,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
) -> PyResult<String> {
    let opts = pipeline::PipelineOptions { seed, out_dir };
    let report = py
        .detach(move || pipeline::run_pipeline(&config_path, &opts))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn irtmap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyResponseMatrix>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyPosteriorChain>()?;
    m.add_class::<PyAlignedChain>()?;
    m.add_class::<PyNsEnsemble>()?;
    m.add_class::<PyDensityGrid>()?;
    m.add_function(wrap_pyfunction!(logit_prob, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_lsirm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_thomas, m)?)?;
    m.add_function(wrap_pyfunction!(sample_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(align_chain, m)?)?;
    m.add_function(wrap_pyfunction!(align_across_groups, m)?)?;
    m.add_function(wrap_pyfunction!(procrustes_fit, m)?)?;
    m.add_function(wrap_pyfunction!(rhat, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_predictive_check, m)?)?;
    m.add_function(wrap_pyfunction!(make_domain, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_mass, m)?)?;
    m.add_function(wrap_pyfunction!(ns_log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_prior_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(select_centers_bic, m)?)?;
    m.add_function(wrap_pyfunction!(center_density, m)?)?;
    m.add_function(wrap_pyfunction!(adjust_centers, m)?)?;
    m.add_function(wrap_pyfunction!(assign_items, m)?)?;
    m.add_function(wrap_pyfunction!(assign_students, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_surface_works_embedded() {
        Python::initialize();
        Python::attach(|py| {
            let m = pyo3::wrap_pymodule!(irtmap_py)(py);
            let m = m.bind(py);
            py_run_smoke(py, m).unwrap();
        });
    }

    fn py_run_smoke(py: Python<'_>, module: &Bound<'_, PyModule>) -> PyResult<()> {
        let globals = pyo3::types::PyDict::new(py);
        globals.set_item("irtmap_py", module)?;
        py.run(
            c"
m, truth = irtmap_py.simulate_lsirm(20, 6, 42)
assert m.n_respondents() == 20 and m.n_items() == 6
cfg = irtmap_py.RunConfig.parse('[mcmc]\\nn_iter = 200\\nburn_in = 50\\nthin_to = 40\\n')
chains = irtmap_py.sample_posterior(m, cfg, 7, 2)
assert len(chains) == 2 and chains[0].n_draws() == 40
aligned = irtmap_py.align_chain(chains[0])
(zl, zp), (wl, wp) = aligned.posterior_mean_positions()
assert len(zp) == 20 and len(wp) == 6
p = irtmap_py.logit_prob(0.0, 0.0, 1.0, [0.0, 0.0], [0.0, 0.0])
assert abs(p - 0.5) < 1e-12
lo, hi = irtmap_py.alpha_prior_bounds(62, (0.0, 1.0, 0.0, 1.0), 2, 10)
assert (lo, hi) == (6.2, 31.0)
",
            Some(&globals),
            None,
        )?;
        Ok(())
    }
}
