//! Convergence diagnostics and posterior predictive checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::lsirm::{logit_prob, PosteriorChain};
use crate::seed::rng_for;

/// Potential scale reduction factors, one per scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhatReport {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Whether the values come from multiple chains or one split chain.
    pub split_single_chain: bool,
}

impl RhatReport {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fraction of parameters with R-hat below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        if self.values.is_empty() {
            return 1.0;
        }
        self.values.iter().filter(|v| **v < threshold).count() as f64 / self.values.len() as f64
    }
}

/// Gelman-Rubin PSRF over one scalar series per chain (no further splitting).
pub fn rhat_scalar(series: &[Vec<f64>]) -> f64 {
    let m = series.len() as f64;
    let n = series[0].len() as f64;
    let means: Vec<f64> = series
        .iter()
        .map(|s| s.iter().sum::<f64>() / n)
        .collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = series
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w < 1e-300 {
        // constant chains: agree -> 1, disagree -> diverged
        return if b < 1e-300 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// R-hat for every scalar parameter of the given chains.
///
/// With one chain the series is split in half; with several chains each chain
/// is one group. Position coordinates are included only when every chain is
/// aligned (they are meaningless across unaligned orientations); gamma is
/// included only when estimated.
pub fn rhat(chains: &[&PosteriorChain]) -> Result<RhatReport> {
    if chains.is_empty() {
        return Err(Error::Contract("rhat needs at least one chain".into()));
    }
    let len = chains[0].n_draws();
    if chains.iter().any(|c| c.n_draws() != len) {
        return Err(Error::Contract("chains must have equal length".into()));
    }
    if len < 4 {
        return Err(Error::Contract(format!(
            "chain length {len} is too short for R-hat (need >= 4)"
        )));
    }
    let n = chains[0].n_respondents();
    let p = chains[0].n_items();
    if chains.iter().any(|c| c.n_respondents() != n || c.n_items() != p) {
        return Err(Error::Contract("chains must share dimensions".into()));
    }
    let single = chains.len() == 1;
    let include_positions = chains.iter().all(|c| c.aligned);
    let include_gamma = chains[0].gamma_estimated();

    let mut names = Vec::new();
    let mut extractors: Vec<Box<dyn Fn(&crate::lsirm::LsirmParams) -> f64>> = Vec::new();
    for i in 0..p {
        names.push(format!("beta[{}]", chains[0].item_ids[i]));
        extractors.push(Box::new(move |d| d.beta[i]));
    }
    for k in 0..n {
        names.push(format!("theta[{}]", chains[0].respondent_ids[k]));
        extractors.push(Box::new(move |d| d.theta[k]));
    }
    names.push("sigma_theta_sq".into());
    extractors.push(Box::new(|d| d.sigma_theta_sq));
    if include_gamma {
        names.push("gamma".into());
        extractors.push(Box::new(|d| d.gamma));
    }
    if include_positions {
        for k in 0..n {
            for (axis, label) in ["x", "y"].iter().enumerate() {
                names.push(format!("z[{}].{label}", chains[0].respondent_ids[k]));
                extractors.push(Box::new(move |d| d.z[k][axis]));
            }
        }
        for i in 0..p {
            for (axis, label) in ["x", "y"].iter().enumerate() {
                names.push(format!("w[{}].{label}", chains[0].item_ids[i]));
                extractors.push(Box::new(move |d| d.w[i][axis]));
            }
        }
    }

    let values = extractors
        .iter()
        .map(|f| {
            let series: Vec<Vec<f64>> = if single {
                let s: Vec<f64> = chains[0].draws.iter().map(|d| f(d)).collect();
                let mid = s.len() / 2;
                vec![s[..mid].to_vec(), s[mid..].to_vec()]
            } else {
                chains
                    .iter()
                    .map(|c| c.draws.iter().map(|d| f(d)).collect())
                    .collect()
            };
            rhat_scalar(&series)
        })
        .collect();

    Ok(RhatReport {
        names,
        values,
        split_single_chain: single,
    })
}

/// Posterior predictive check of per-item positive proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub item_ids: Vec<String>,
    /// Observed positive proportion per item; `None` when every response is
    /// missing.
    pub observed: Vec<Option<f64>>,
    /// Mean replicate proportion per item.
    pub replicate_mean: Vec<f64>,
    /// Central 95% replicate interval per item.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Fraction of observed items inside their interval.
    pub coverage: f64,
    pub n_rep: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = q * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Simulate `n_rep` replicate matrices from evenly spaced posterior draws and
/// compare per-item positive proportions against the observed data. The
/// statistic is invariant to alignment, so unaligned chains are accepted.
/// Replicates mirror the observed missingness mask.
pub fn posterior_predictive_check(
    chain: &PosteriorChain,
    x: &ResponseMatrix,
    n_rep: usize,
    seed: u64,
) -> Result<PpcReport> {
    if n_rep < 20 {
        return Err(Error::Contract(format!(
            "n_rep must be >= 20 for a usable interval, got {n_rep}"
        )));
    }
    if chain.n_respondents() != x.n_respondents() || chain.n_items() != x.n_items() {
        return Err(Error::Contract("chain and data dimensions differ".into()));
    }
    if chain.draws.is_empty() {
        return Err(Error::Contract("chain has no draws".into()));
    }
    let n = x.n_respondents();
    let p = x.n_items();
    let cells = x.dense();

    let mut observed_pos = vec![0.0f64; p];
    let mut observed_cnt = vec![0usize; p];
    for k in 0..n {
        for i in 0..p {
            let c = cells[k * p + i];
            if c >= 0 {
                observed_cnt[i] += 1;
                observed_pos[i] += f64::from(c);
            }
        }
    }
    let observed: Vec<Option<f64>> = (0..p)
        .map(|i| (observed_cnt[i] > 0).then(|| observed_pos[i] / observed_cnt[i] as f64))
        .collect();

    let n_draws = chain.draws.len();
    let mut rng = rng_for(seed, 0xC0DA);
    // per-item replicate proportions, n_rep x p
    let mut reps = vec![0.0f64; n_rep * p];
    for r in 0..n_rep {
        let draw = &chain.draws[r * n_draws / n_rep];
        for i in 0..p {
            if observed_cnt[i] == 0 {
                continue;
            }
            let mut pos = 0u32;
            for k in 0..n {
                if cells[k * p + i] >= 0 {
                    let prob =
                        logit_prob(draw.theta[k], draw.beta[i], draw.gamma, draw.z[k], draw.w[i]);
                    if rng.random::<f64>() < prob {
                        pos += 1;
                    }
                }
            }
            reps[r * p + i] = f64::from(pos) / observed_cnt[i] as f64;
        }
    }

    let mut replicate_mean = vec![0.0f64; p];
    let mut lower = vec![0.0f64; p];
    let mut upper = vec![0.0f64; p];
    let mut covered = 0usize;
    let mut scored = 0usize;
    for i in 0..p {
        let mut col: Vec<f64> = (0..n_rep).map(|r| reps[r * p + i]).collect();
        replicate_mean[i] = col.iter().sum::<f64>() / n_rep as f64;
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lower[i] = quantile(&col, 0.025);
        upper[i] = quantile(&col, 0.975);
        if let Some(obs) = observed[i] {
            scored += 1;
            if obs >= lower[i] && obs <= upper[i] {
                covered += 1;
            }
        }
    }
    let coverage = if scored == 0 {
        0.0
    } else {
        covered as f64 / scored as f64
    };

    Ok(PpcReport {
        item_ids: chain.item_ids.clone(),
        observed,
        replicate_mean,
        lower,
        upper,
        coverage,
        n_rep,
    })
}
