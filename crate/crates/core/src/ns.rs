//! Neyman-Scott point-process clustering of item positions.
//!
//! Item positions are modeled as offspring of latent parents (cluster
//! centers): parents follow a Poisson process with intensity kappa, each
//! parent spawns on average alpha offspring scattered by an isotropic
//! Gaussian kernel with spread omega, and kappa is reparameterized as
//! `kappa = P / (|S| * alpha)`. Centers are sampled by birth-death-move MCMC
//! with Metropolis updates for (alpha, omega); an ensemble of independent
//! runs yields the distribution of the cluster count and of the center
//! locations, from which the mode, a BIC-selected center set, and a
//! density-based adjustment produce the final clusters.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::config::{BandwidthName, BandwidthRule, BicPenalty, NsConfig};
use crate::error::{Error, Result};
use crate::latent::Point;
use crate::seed::{derive_seed, rng_for};

/// Axis-aligned rectangular domain of the interaction map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain2D {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Domain2D {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::Contract(format!(
                "invalid domain [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn uniform_point<R: Rng>(&self, rng: &mut R) -> Point {
        [
            self.x0 + rng.random::<f64>() * (self.x1 - self.x0),
            self.y0 + rng.random::<f64>() * (self.y1 - self.y0),
        ]
    }
}

/// Bounding box of the points expanded by `margin` times the side length on
/// each side. A side of zero extent borrows the other side's length so the
/// domain stays valid for collinear input.
pub fn make_domain(points: &[Point], margin: f64) -> Result<Domain2D> {
    if points.len() < 2 {
        return Err(Error::Contract("need at least 2 points".into()));
    }
    if margin < 0.0 {
        return Err(Error::Contract(format!("margin must be >= 0, got {margin}")));
    }
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for p in points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let mut side_x = x1 - x0;
    let mut side_y = y1 - y0;
    if side_x == 0.0 && side_y == 0.0 {
        return Err(Error::Degenerate(
            "all points are identical; domain is empty".into(),
        ));
    }
    if side_x == 0.0 {
        side_x = side_y;
    }
    if side_y == 0.0 {
        side_y = side_x;
    }
    let ex = margin * side_x;
    let ey = margin * side_y;
    Domain2D::new(x0 - ex, x1 + ex, y0 - ey, y1 + ey)
}

/// One state of the Neyman-Scott posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsState {
    /// Parent locations (cluster centers), M >= 1.
    pub centers: Vec<Point>,
    /// Expected offspring per parent.
    pub alpha: f64,
    /// Gaussian kernel spread.
    pub omega: f64,
}

impl NsState {
    pub fn m(&self) -> usize {
        self.centers.len()
    }

    /// Implied parent intensity `kappa = P / (|S| * alpha)`.
    pub fn kappa(&self, n_points: usize, dom: &Domain2D) -> f64 {
        n_points as f64 / (dom.area() * self.alpha)
    }
}

#[inline]
fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Integral of the bivariate Gaussian kernel centered at `c` over the domain:
/// the product of per-axis normal CDF differences.
pub fn kernel_mass(c: Point, omega: f64, dom: &Domain2D) -> f64 {
    let mx = std_normal_cdf((dom.x1 - c[0]) / omega) - std_normal_cdf((dom.x0 - c[0]) / omega);
    let my = std_normal_cdf((dom.y1 - c[1]) / omega) - std_normal_cdf((dom.y0 - c[1]) / omega);
    mx * my
}

/// Bivariate isotropic Gaussian density with per-axis variance omega^2.
#[inline]
fn kernel_density(d_sq: f64, omega: f64) -> f64 {
    let v = omega * omega;
    (-0.5 * d_sq / v).exp() / (2.0 * std::f64::consts::PI * v)
}

/// Log-likelihood of the point pattern under the Neyman-Scott density with
/// respect to the unit-rate Poisson process:
/// `|S| - sum_i alpha * mass(c_i) + sum_j log(sum_i alpha * k(w_j - c_i))`.
pub fn ns_log_likelihood(w: &[Point], s: &NsState, dom: &Domain2D) -> Result<f64> {
    if s.centers.is_empty() {
        return Err(Error::Contract("state needs at least one center".into()));
    }
    if !(s.alpha > 0.0 && s.omega > 0.0) {
        return Err(Error::Contract(format!(
            "alpha and omega must be > 0, got alpha={}, omega={}",
            s.alpha, s.omega
        )));
    }
    for p in w {
        if !dom.contains(*p) {
            return Err(Error::Contract(format!(
                "point ({}, {}) lies outside the domain",
                p[0], p[1]
            )));
        }
    }
    let mut total = dom.area();
    for c in &s.centers {
        total -= s.alpha * kernel_mass(*c, s.omega, dom);
    }
    for p in w {
        let mut intensity = 0.0;
        for c in &s.centers {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            intensity += s.alpha * kernel_density(dx * dx + dy * dy, s.omega);
        }
        total += intensity.ln();
    }
    Ok(total)
}

/// Uniform prior bounds for alpha so that the implied mean parent count
/// `P / (|S| * alpha)` spans `[m_min, m_max]`.
pub fn alpha_prior_bounds(
    n_points: usize,
    dom: &Domain2D,
    m_min: usize,
    m_max: usize,
) -> Result<(f64, f64)> {
    if m_min < 1 || m_min >= m_max {
        return Err(Error::Contract(format!(
            "need 1 <= m_min < m_max, got [{m_min}, {m_max}]"
        )));
    }
    let p = n_points as f64;
    let area = dom.area();
    Ok((p / (m_max as f64 * area), p / (m_min as f64 * area)))
}

/// Fully resolved sampler settings for one Neyman-Scott run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsFitConfig {
    pub alpha_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    pub n_iter: usize,
    pub burn_in: usize,
    pub center_step: f64,
    pub alpha_step: f64,
    pub omega_step: f64,
}

impl NsFitConfig {
    /// Resolve config defaults against the data: alpha bounds from the
    /// target cluster-count range and omega bounds and steps from the domain
    /// scale, unless given explicitly.
    pub fn resolve(cfg: &NsConfig, n_points: usize, dom: &Domain2D) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::Contract(
                "cannot fit a point process to an empty pattern".into(),
            ));
        }
        let alpha_bounds = match (cfg.alpha_min, cfg.alpha_max) {
            (Some(lo), Some(hi)) => (lo, hi),
            (None, None) => alpha_prior_bounds(n_points, dom, cfg.m_min, cfg.m_max)?,
            _ => {
                return Err(Error::Config(
                    "ns.alpha_min and ns.alpha_max must be set together".into(),
                ))
            }
        };
        let scale = dom.area().sqrt();
        let omega_bounds = match (cfg.omega_min, cfg.omega_max) {
            (Some(lo), Some(hi)) => (lo, hi),
            (None, None) => (0.005 * scale, 0.5 * scale),
            _ => {
                return Err(Error::Config(
                    "ns.omega_min and ns.omega_max must be set together".into(),
                ))
            }
        };
        if !(alpha_bounds.0 > 0.0 && alpha_bounds.0 < alpha_bounds.1) {
            return Err(Error::Config(format!(
                "invalid alpha bounds ({}, {})",
                alpha_bounds.0, alpha_bounds.1
            )));
        }
        if !(omega_bounds.0 > 0.0 && omega_bounds.0 < omega_bounds.1) {
            return Err(Error::Config(format!(
                "invalid omega bounds ({}, {})",
                omega_bounds.0, omega_bounds.1
            )));
        }
        Ok(Self {
            alpha_bounds,
            omega_bounds,
            n_iter: cfg.ns_iter,
            burn_in: cfg.ns_burn_in,
            center_step: cfg.center_step_frac * scale,
            alpha_step: cfg.alpha_step_frac * (alpha_bounds.1 - alpha_bounds.0),
            omega_step: cfg.omega_step_frac * (omega_bounds.1 - omega_bounds.0),
        })
    }
}

/// Result of one MCMC run.
///
/// The run's center count is the modal count of the post-burn-in trace
/// (ties to the smaller count) and the summary state is the highest-target
/// state visited at that count. A raw cross-dimensional maximum is not used:
/// single-iteration birth excursions can top the density at a count the
/// chain otherwise never occupies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsFit {
    pub state: NsState,
    pub log_posterior: f64,
    pub m_trace: Vec<usize>,
}

/// Log target: likelihood plus the parent Poisson-process prior
/// `M log(kappa) - kappa |S|` with `kappa = P / (|S| alpha)`.
fn ns_log_target(w: &[Point], s: &NsState, dom: &Domain2D) -> Result<f64> {
    let kappa = s.kappa(w.len(), dom);
    Ok(ns_log_likelihood(w, s, dom)? + s.m() as f64 * kappa.ln() - kappa * dom.area())
}

/// Birth-death-move MCMC over centers with Metropolis updates for alpha and
/// omega, both rejected outside their uniform prior bounds. Deterministic
/// given the seed.
pub fn fit_ns(w: &[Point], dom: &Domain2D, cfg: &NsFitConfig, seed: u64) -> Result<NsFit> {
    if w.is_empty() {
        return Err(Error::Contract(
            "cannot fit a point process to an empty pattern".into(),
        ));
    }
    if cfg.burn_in >= cfg.n_iter {
        return Err(Error::Config(format!(
            "ns burn-in ({}) must be < iteration count ({})",
            cfg.burn_in, cfg.n_iter
        )));
    }
    let mut rng = rng_for(seed, 0x4E53);
    let (a_lo, a_hi) = cfg.alpha_bounds;
    let (o_lo, o_hi) = cfg.omega_bounds;
    let alpha0 = (a_lo * a_hi).sqrt();
    let omega0 = (o_lo * o_hi).sqrt();
    let m0 = ((w.len() as f64 / alpha0).round() as usize).max(1);
    let mut state = NsState {
        centers: (0..m0).map(|_| dom.uniform_point(&mut rng)).collect(),
        alpha: alpha0,
        omega: omega0,
    };
    let mut current = ns_log_target(w, &state, dom)?;
    if !current.is_finite() {
        return Err(Error::Init(format!(
            "log target at initialization is {current}"
        )));
    }
    let area = dom.area();
    let ln_area = area.ln();

    // best target seen per center count, post burn-in
    let mut best_per_m: BTreeMap<usize, (f64, NsState)> = BTreeMap::new();
    let mut m_trace = Vec::with_capacity(cfg.n_iter);

    for iter in 0..cfg.n_iter {
        let u: f64 = rng.random();
        if u < 1.0 / 3.0 {
            // birth: uniform new center
            let c = dom.uniform_point(&mut rng);
            state.centers.push(c);
            match ns_log_target(w, &state, dom) {
                Ok(prop) => {
                    let m_before = state.centers.len() - 1;
                    let ln_a = prop - current + ln_area - ((m_before + 1) as f64).ln();
                    if rng.random::<f64>().ln() < ln_a {
                        current = prop;
                    } else {
                        state.centers.pop();
                    }
                }
                Err(e) => return Err(e),
            }
        } else if u < 2.0 / 3.0 {
            // death: remove a uniformly chosen center; skipped when M = 1
            if state.centers.len() > 1 {
                let m_before = state.centers.len();
                let j = rng.random_range(0..m_before);
                let removed = state.centers.remove(j);
                let prop = ns_log_target(w, &state, dom)?;
                let ln_a = prop - current + (m_before as f64).ln() - ln_area;
                if rng.random::<f64>().ln() < ln_a {
                    current = prop;
                } else {
                    state.centers.insert(j, removed);
                }
            }
        } else {
            // move: spherical Gaussian random walk on one center
            let j = rng.random_range(0..state.centers.len());
            let old = state.centers[j];
            let prop_center = [
                old[0] + cfg.center_step * rng.sample::<f64, _>(StandardNormal),
                old[1] + cfg.center_step * rng.sample::<f64, _>(StandardNormal),
            ];
            if dom.contains(prop_center) {
                state.centers[j] = prop_center;
                let prop = ns_log_target(w, &state, dom)?;
                if rng.random::<f64>().ln() < prop - current {
                    current = prop;
                } else {
                    state.centers[j] = old;
                }
            }
        }

        // Metropolis update for alpha, rejected outside the prior bounds.
        let prop_alpha = state.alpha + cfg.alpha_step * rng.sample::<f64, _>(StandardNormal);
        if prop_alpha > a_lo && prop_alpha < a_hi {
            let old = state.alpha;
            state.alpha = prop_alpha;
            let prop = ns_log_target(w, &state, dom)?;
            if rng.random::<f64>().ln() < prop - current {
                current = prop;
            } else {
                state.alpha = old;
            }
        }

        // Metropolis update for omega.
        let prop_omega = state.omega + cfg.omega_step * rng.sample::<f64, _>(StandardNormal);
        if prop_omega > o_lo && prop_omega < o_hi {
            let old = state.omega;
            state.omega = prop_omega;
            let prop = ns_log_target(w, &state, dom)?;
            if rng.random::<f64>().ln() < prop - current {
                current = prop;
            } else {
                state.omega = old;
            }
        }

        m_trace.push(state.centers.len());
        if iter >= cfg.burn_in {
            let entry = best_per_m
                .entry(state.centers.len())
                .or_insert_with(|| (f64::NEG_INFINITY, state.clone()));
            if current > entry.0 {
                *entry = (current, state.clone());
            }
        }
    }

    // modal count of the post-burn-in trace, ties to the smaller count
    let mut occupancy: BTreeMap<usize, usize> = BTreeMap::new();
    for &m in &m_trace[cfg.burn_in..] {
        *occupancy.entry(m).or_insert(0) += 1;
    }
    let modal_m = occupancy
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&m, _)| m)
        .expect("post-burn-in trace is nonempty");
    let (log_posterior, summary) = best_per_m.remove(&modal_m).expect("modal count was visited");

    Ok(NsFit {
        state: summary,
        log_posterior,
        m_trace,
    })
}

/// One ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsRun {
    pub run: usize,
    pub seed: u64,
    pub state: NsState,
    pub log_posterior: f64,
}

/// A collection of independent fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsEnsemble {
    pub runs: Vec<NsRun>,
}

impl NsEnsemble {
    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    /// All centers pooled across runs.
    pub fn pooled_centers(&self) -> Vec<Point> {
        self.runs
            .iter()
            .flat_map(|r| r.state.centers.iter().copied())
            .collect()
    }
}

/// Run `n_runs` independent fits concurrently, one derived seed per run
/// index; the result is indexed by run, so it is independent of scheduling.
pub fn run_ensemble(
    w: &[Point],
    dom: &Domain2D,
    cfg: &NsFitConfig,
    n_runs: usize,
    master_seed: u64,
) -> Result<NsEnsemble> {
    if n_runs < 2 {
        return Err(Error::Contract(format!(
            "ensemble needs at least 2 runs, got {n_runs}"
        )));
    }
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = derive_seed(master_seed, run as u64);
            let fit = fit_ns(w, dom, cfg, seed)?;
            Ok(NsRun {
                run,
                seed,
                state: fit.state,
                log_posterior: fit.log_posterior,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NsEnsemble { runs })
}

/// Histogram of per-run center counts and its mode (ties break to the
/// smaller count).
pub fn cluster_count_mode(e: &NsEnsemble) -> Result<(BTreeMap<usize, usize>, usize)> {
    if e.runs.is_empty() {
        return Err(Error::Contract("ensemble is empty".into()));
    }
    let mut histogram = BTreeMap::new();
    for r in &e.runs {
        *histogram.entry(r.state.m()).or_insert(0usize) += 1;
    }
    let mut mode = 0usize;
    let mut best = 0usize;
    for (&m, &count) in &histogram {
        if count > best {
            best = count;
            mode = m;
        }
    }
    Ok((histogram, mode))
}

/// The BIC-selected state among runs with exactly `m` centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicSelection {
    pub run_index: usize,
    pub state: NsState,
    pub bic: f64,
}

/// Among runs with exactly `m` centers, return the one minimizing
/// `-2 log L + k log P` with `k` free parameters from the penalty rule.
pub fn select_centers_bic(
    e: &NsEnsemble,
    w: &[Point],
    dom: &Domain2D,
    m: usize,
    penalty: BicPenalty,
) -> Result<BicSelection> {
    let mut best: Option<BicSelection> = None;
    for r in &e.runs {
        if r.state.m() != m {
            continue;
        }
        let ll = ns_log_likelihood(w, &r.state, dom)?;
        let bic = -2.0 * ll + penalty.free_params(m) * (w.len() as f64).ln();
        if best.as_ref().is_none_or(|b| bic < b.bic) {
            best = Some(BicSelection {
                run_index: r.run,
                state: r.state.clone(),
                bic,
            });
        }
    }
    best.ok_or_else(|| {
        Error::Selection(format!(
            "no ensemble run produced {m} centers; widen the ensemble or the alpha range"
        ))
    })
}

/// Kernel density estimate of the pooled ensemble centers on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major by y: `values[iy * xs.len() + ix]`.
    pub values: Vec<f64>,
    pub bandwidth: (f64, f64),
}

impl DensityGrid {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation, clamped to the grid extent.
    pub fn value_at(&self, p: Point) -> f64 {
        let locate = |grid: &[f64], v: f64| -> (usize, f64) {
            let last = grid.len() - 1;
            if v <= grid[0] {
                return (0, 0.0);
            }
            if v >= grid[last] {
                return (last - 1, 1.0);
            }
            let step = (grid[last] - grid[0]) / last as f64;
            let idx = (((v - grid[0]) / step) as usize).min(last - 1);
            let frac = (v - grid[idx]) / (grid[idx + 1] - grid[idx]);
            (idx, frac.clamp(0.0, 1.0))
        };
        let (ix, fx) = locate(&self.xs, p[0]);
        let (iy, fy) = locate(&self.ys, p[1]);
        let nx = self.nx();
        let v00 = self.values[iy * nx + ix];
        let v10 = self.values[iy * nx + ix + 1];
        let v01 = self.values[(iy + 1) * nx + ix];
        let v11 = self.values[(iy + 1) * nx + ix + 1];
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

fn sample_std(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1).max(1) as f64).sqrt()
}

/// Gaussian KDE of all pooled centers on a `grid_res` x `grid_res` grid over
/// the domain. Silverman's rule per axis (`sigma * n^(-1/6)` for d = 2),
/// floored at one grid cell so point masses stay visible.
pub fn center_density(
    e: &NsEnsemble,
    dom: &Domain2D,
    grid_res: usize,
    bandwidth: BandwidthRule,
) -> Result<DensityGrid> {
    if e.runs.is_empty() {
        return Err(Error::Contract("ensemble is empty".into()));
    }
    if grid_res < 2 {
        return Err(Error::Contract("grid resolution must be >= 2".into()));
    }
    let centers = e.pooled_centers();
    let n = centers.len();
    let xs = linspace(dom.x0, dom.x1, grid_res);
    let ys = linspace(dom.y0, dom.y1, grid_res);
    let cell_x = (dom.x1 - dom.x0) / (grid_res - 1) as f64;
    let cell_y = (dom.y1 - dom.y0) / (grid_res - 1) as f64;
    let (hx, hy) = match bandwidth {
        BandwidthRule::Fixed(h) => (h, h),
        BandwidthRule::Rule(BandwidthName::Silverman) => {
            let sx = sample_std(centers.iter().map(|c| c[0]), n);
            let sy = sample_std(centers.iter().map(|c| c[1]), n);
            let factor = (n as f64).powf(-1.0 / 6.0);
            ((sx * factor).max(cell_x), (sy * factor).max(cell_y))
        }
    };
    let norm = 1.0 / (n as f64 * 2.0 * std::f64::consts::PI * hx * hy);
    let values: Vec<f64> = ys
        .par_iter()
        .flat_map_iter(|&gy| {
            let xs = &xs;
            let centers = &centers;
            xs.iter().map(move |&gx| {
                let mut total = 0.0;
                for c in centers {
                    let dx = (gx - c[0]) / hx;
                    let dy = (gy - c[1]) / hy;
                    total += (-0.5 * (dx * dx + dy * dy)).exp();
                }
                total * norm
            })
        })
        .collect();
    Ok(DensityGrid {
        xs,
        ys,
        values,
        bandwidth: (hx, hy),
    })
}

/// A center dropped by the contour adjustment, with its density ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCenter {
    pub index: usize,
    pub center: Point,
    /// Interpolated density at the center divided by the grid maximum.
    pub density_ratio: f64,
}

/// Result of the contour-plot adjustment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterAdjustment {
    pub centers: Vec<Point>,
    /// Indices into the selected state's center list.
    pub kept_indices: Vec<usize>,
    pub dropped: Vec<DroppedCenter>,
}

/// Drop selected centers that sit in low-density regions of the ensemble
/// center distribution: density below `tau` times the peak. Accepts the
/// `tau = 0` limit (nothing is ever dropped); at least one center must
/// survive.
pub fn adjust_centers(
    selected: &NsState,
    density: &DensityGrid,
    tau: f64,
) -> Result<CenterAdjustment> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Contract(format!(
            "tau must be in [0, 1), got {tau}"
        )));
    }
    let peak = density.max();
    if !(peak > 0.0) {
        return Err(Error::Adjustment("density grid has no mass".into()));
    }
    let mut centers = Vec::new();
    let mut kept_indices = Vec::new();
    let mut dropped = Vec::new();
    for (index, &center) in selected.centers.iter().enumerate() {
        let ratio = density.value_at(center) / peak;
        if ratio < tau {
            dropped.push(DroppedCenter {
                index,
                center,
                density_ratio: ratio,
            });
        } else {
            centers.push(center);
            kept_indices.push(index);
        }
    }
    if centers.is_empty() {
        return Err(Error::Adjustment(format!(
            "every selected center falls below {tau} of the peak density"
        )));
    }
    Ok(CenterAdjustment {
        centers,
        kept_indices,
        dropped,
    })
}

/// Nearest-center membership for each item; ties break to the lowest center
/// index.
pub fn assign_items(w: &[Point], centers: &[Point]) -> Result<Vec<usize>> {
    if centers.is_empty() {
        return Err(Error::Contract("need at least one center".into()));
    }
    Ok(w
        .iter()
        .map(|p| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = crate::latent::dist(*p, *c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// A student's cluster: one of the item-derived centers, or the midpoint
/// label "M" for no strong tendency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum StudentCluster {
    Center(usize),
    Midpoint,
}

/// Student memberships over centers plus the midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentAssignment {
    pub midpoint: Point,
    pub memberships: Vec<StudentCluster>,
}

/// Assign each student to the nearest of the adjusted centers and their
/// midpoint (the coordinate-wise mean of the centers). Ties break to the
/// lowest center index; the midpoint wins only when strictly closest.
pub fn assign_students(z: &[Point], centers: &[Point]) -> Result<StudentAssignment> {
    if centers.is_empty() {
        return Err(Error::Contract("need at least one center".into()));
    }
    let midpoint = crate::latent::centroid(centers);
    let memberships = z
        .iter()
        .map(|p| {
            let mut best = StudentCluster::Center(0);
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = crate::latent::dist(*p, *c);
                if d < best_d {
                    best_d = d;
                    best = StudentCluster::Center(j);
                }
            }
            if crate::latent::dist(*p, midpoint) < best_d {
                best = StudentCluster::Midpoint;
            }
            best
        })
        .collect();
    Ok(StudentAssignment {
        midpoint,
        memberships,
    })
}
