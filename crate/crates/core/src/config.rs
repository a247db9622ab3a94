//! Run configuration.
//!
//! Configuration files are TOML with dotted sections (`[mcmc]`, `[priors]`,
//! `[ns]`, `[pipeline]`). Every key has a documented default so an empty file
//! is a valid configuration; the resolved config is echoed into every output
//! artifact for provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Layout;
use crate::error::{Error, Result};

/// How the distance weight gamma is handled during sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// Gamma is held at `gamma_value`; its prior term drops out as a constant.
    Fixed,
    /// Gamma is sampled on the log scale under a log-normal prior.
    Estimated,
}

/// MCMC schedule and proposal step sizes for the LSIRM sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    /// Number of evenly spaced post-burn-in draws to retain.
    pub thin_to: usize,
    pub step_beta: f64,
    pub step_theta: f64,
    pub step_z: f64,
    pub step_w: f64,
    pub step_log_gamma: f64,
    pub gamma_mode: GammaMode,
    pub gamma_value: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 60_000,
            burn_in: 10_000,
            thin_to: 5_000,
            step_beta: 0.3,
            step_theta: 0.4,
            step_z: 0.3,
            step_w: 0.2,
            step_log_gamma: 0.1,
            gamma_mode: GammaMode::Fixed,
            gamma_value: 1.0,
        }
    }
}

/// Prior hyperparameters for the LSIRM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub sigma_beta: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub mu_gamma: f64,
    pub sigma_gamma: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            sigma_beta: 1.0,
            a_sigma: 0.001,
            b_sigma: 0.001,
            mu_gamma: 0.0,
            sigma_gamma: 1.0,
        }
    }
}

/// Kernel bandwidth rule for the center-density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum BandwidthRule {
    /// Named rule; only `"silverman"` is recognized.
    Rule(BandwidthName),
    /// Fixed bandwidth applied to both axes.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthName {
    Silverman,
}

/// Free-parameter count used in the BIC penalty for a state with M centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BicPenalty {
    /// 2M center coordinates plus alpha and omega.
    #[serde(rename = "2m+2")]
    TwoMPlusTwo,
    #[serde(rename = "2m")]
    TwoM,
    #[serde(rename = "3m")]
    ThreeM,
}

impl BicPenalty {
    pub fn free_params(self, m: usize) -> f64 {
        match self {
            BicPenalty::TwoMPlusTwo => (2 * m + 2) as f64,
            BicPenalty::TwoM => (2 * m) as f64,
            BicPenalty::ThreeM => (3 * m) as f64,
        }
    }
}

/// Neyman-Scott ensemble settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsConfig {
    pub n_runs: usize,
    pub ns_iter: usize,
    pub ns_burn_in: usize,
    /// Target cluster-count range; the alpha prior bounds follow as
    /// `[P/(m_max*|S|), P/(m_min*|S|)]` unless overridden below.
    pub m_min: usize,
    pub m_max: usize,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    /// Omega prior bounds; defaults scale with the domain as
    /// `[0.005*sqrt(|S|), 0.5*sqrt(|S|)]` when unset.
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    /// Domain margin as a fraction of each bounding-box side.
    pub margin: f64,
    /// Contour threshold: centers below `tau * peak density` are dropped.
    pub tau: f64,
    pub kde_bandwidth: BandwidthRule,
    /// Nodes per axis of the density grid.
    pub kde_grid: usize,
    /// Center move proposal scale as a fraction of `sqrt(|S|)`.
    pub center_step_frac: f64,
    /// Alpha / omega proposal scales as fractions of the prior ranges.
    pub alpha_step_frac: f64,
    pub omega_step_frac: f64,
    pub bic_penalty: BicPenalty,
}

impl Default for NsConfig {
    fn default() -> Self {
        Self {
            n_runs: 1_000,
            ns_iter: 20_000,
            ns_burn_in: 5_000,
            m_min: 2,
            m_max: 10,
            alpha_min: None,
            alpha_max: None,
            omega_min: None,
            omega_max: None,
            margin: 0.10,
            tau: 0.10,
            kde_bandwidth: BandwidthRule::Rule(BandwidthName::Silverman),
            kde_grid: 128,
            center_step_frac: 0.05,
            alpha_step_frac: 0.10,
            omega_step_frac: 0.10,
            bic_penalty: BicPenalty::TwoMPlusTwo,
        }
    }
}

/// Pipeline inputs and reporting knobs (cli-report module).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// One or two response CSV files (one per group).
    pub responses: Vec<PathBuf>,
    pub layout: Layout,
    /// Group labels, parallel to `responses`.
    pub group_labels: Vec<String>,
    pub out_dir: PathBuf,
    /// Chains per group; the first feeds inference, all feed R-hat.
    pub n_chains: usize,
    /// Replicates for the posterior predictive check.
    pub ppc_reps: usize,
    /// Distance-difference threshold for highlighting in cross-group tables.
    pub highlight_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            responses: Vec::new(),
            layout: Layout::Wide,
            group_labels: Vec::new(),
            out_dir: PathBuf::from("out"),
            n_chains: 2,
            ppc_reps: 200,
            highlight_threshold: 0.3,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// 64-bit master seed; every stochastic stage derives its own stream.
    pub seed: u64,
    pub dichotomize_threshold: u8,
    pub mcmc: McmcConfig,
    pub priors: PriorConfig,
    pub ns: NsConfig,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dichotomize_threshold: 4,
            mcmc: McmcConfig::default(),
            priors: PriorConfig::default(),
            ns: NsConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    /// Check every config invariant, naming the violated constraint.
    pub fn validate(&self) -> Result<()> {
        let m = &self.mcmc;
        if m.burn_in >= m.n_iter {
            return Err(Error::Config(format!(
                "mcmc.burn_in ({}) must be < mcmc.n_iter ({})",
                m.burn_in, m.n_iter
            )));
        }
        if m.thin_to == 0 || m.thin_to > m.n_iter - m.burn_in {
            return Err(Error::Config(format!(
                "mcmc.thin_to ({}) must be in 1..=n_iter-burn_in ({})",
                m.thin_to,
                m.n_iter - m.burn_in
            )));
        }
        for (name, v) in [
            ("mcmc.step_beta", m.step_beta),
            ("mcmc.step_theta", m.step_theta),
            ("mcmc.step_z", m.step_z),
            ("mcmc.step_w", m.step_w),
            ("mcmc.step_log_gamma", m.step_log_gamma),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if m.gamma_value < 0.0 {
            return Err(Error::Config(format!(
                "mcmc.gamma_value must be >= 0, got {}",
                m.gamma_value
            )));
        }
        let p = &self.priors;
        for (name, v) in [
            ("priors.sigma_beta", p.sigma_beta),
            ("priors.a_sigma", p.a_sigma),
            ("priors.b_sigma", p.b_sigma),
            ("priors.sigma_gamma", p.sigma_gamma),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        let ns = &self.ns;
        if ns.m_min < 1 {
            return Err(Error::Config("ns.m_min must be >= 1".into()));
        }
        if ns.m_min >= ns.m_max {
            return Err(Error::Config(format!(
                "ns.m_min ({}) must be < ns.m_max ({})",
                ns.m_min, ns.m_max
            )));
        }
        if !(ns.tau > 0.0 && ns.tau < 1.0) {
            return Err(Error::Config(format!(
                "ns.tau must be in (0, 1), got {}",
                ns.tau
            )));
        }
        if ns.margin < 0.0 {
            return Err(Error::Config(format!(
                "ns.margin must be >= 0, got {}",
                ns.margin
            )));
        }
        if ns.ns_burn_in >= ns.ns_iter {
            return Err(Error::Config(format!(
                "ns.ns_burn_in ({}) must be < ns.ns_iter ({})",
                ns.ns_burn_in, ns.ns_iter
            )));
        }
        if ns.kde_grid < 2 {
            return Err(Error::Config("ns.kde_grid must be >= 2".into()));
        }
        for (name, v) in [
            ("ns.center_step_frac", ns.center_step_frac),
            ("ns.alpha_step_frac", ns.alpha_step_frac),
            ("ns.omega_step_frac", ns.omega_step_frac),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if let (Some(lo), Some(hi)) = (ns.alpha_min, ns.alpha_max) {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Config(format!(
                    "ns.alpha_min ({lo}) must be positive and < ns.alpha_max ({hi})"
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (ns.omega_min, ns.omega_max) {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Config(format!(
                    "ns.omega_min ({lo}) must be positive and < ns.omega_max ({hi})"
                )));
            }
        }
        if let BandwidthRule::Fixed(h) = ns.kde_bandwidth {
            if !(h > 0.0) {
                return Err(Error::Config(format!(
                    "ns.kde_bandwidth must be > 0 when numeric, got {h}"
                )));
            }
        }
        if !(2..=5).contains(&self.dichotomize_threshold) {
            return Err(Error::Config(format!(
                "dichotomize_threshold must be in 2..=5, got {}",
                self.dichotomize_threshold
            )));
        }
        let pl = &self.pipeline;
        if pl.responses.len() > 2 {
            return Err(Error::Config(format!(
                "pipeline.responses supports 1 or 2 groups, got {}",
                pl.responses.len()
            )));
        }
        if !pl.group_labels.is_empty() && pl.group_labels.len() != pl.responses.len() {
            return Err(Error::Config(
                "pipeline.group_labels must match pipeline.responses in length".into(),
            ));
        }
        if pl.n_chains == 0 {
            return Err(Error::Config("pipeline.n_chains must be >= 1".into()));
        }
        if pl.ppc_reps < 20 {
            return Err(Error::Config(format!(
                "pipeline.ppc_reps must be >= 20, got {}",
                pl.ppc_reps
            )));
        }
        Ok(())
    }
}

/// Parse a TOML config file; unset keys take their documented defaults.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parse config text (see [`load_config`]).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text)
        .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.mcmc.n_iter, 60_000);
        assert_eq!(cfg.mcmc.burn_in, 10_000);
        assert_eq!(cfg.mcmc.thin_to, 5_000);
        assert_eq!(cfg.mcmc.gamma_mode, GammaMode::Fixed);
        assert_eq!(cfg.mcmc.gamma_value, 1.0);
        assert_eq!(cfg.priors.sigma_beta, 1.0);
        assert_eq!(cfg.priors.a_sigma, 0.001);
        assert_eq!(cfg.priors.b_sigma, 0.001);
        assert_eq!(cfg.ns.n_runs, 1_000);
        assert_eq!((cfg.ns.m_min, cfg.ns.m_max), (2, 10));
        assert_eq!(cfg.dichotomize_threshold, 4);
    }

    #[test]
    fn overrides_apply_and_rest_default() {
        let cfg = parse_config("[mcmc]\nn_iter = 6000\nburn_in = 1000\nthin_to = 1000\n").unwrap();
        assert_eq!(cfg.mcmc.n_iter, 6_000);
        assert_eq!(cfg.mcmc.burn_in, 1_000);
        assert_eq!(cfg.mcmc.step_beta, 0.3);
        assert_eq!(cfg.mcmc.step_theta, 0.4);
        assert_eq!(cfg.priors.a_sigma, 0.001);
    }

    #[test]
    fn burn_in_exceeding_n_iter_rejected() {
        let err = parse_config("[mcmc]\nburn_in = 70000\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("burn_in"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            parse_config("[mcmc]\nnn_iter = 10\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tau_bounds_checked() {
        assert!(parse_config("[ns]\ntau = 0.0\n").is_err());
        assert!(parse_config("[ns]\ntau = 1.0\n").is_err());
        assert!(parse_config("[ns]\ntau = 0.5\n").is_ok());
    }

    #[test]
    fn bandwidth_accepts_rule_or_number() {
        let cfg = parse_config("[ns]\nkde_bandwidth = \"silverman\"\n").unwrap();
        assert_eq!(
            cfg.ns.kde_bandwidth,
            BandwidthRule::Rule(BandwidthName::Silverman)
        );
        let cfg = parse_config("[ns]\nkde_bandwidth = 0.05\n").unwrap();
        assert_eq!(cfg.ns.kde_bandwidth, BandwidthRule::Fixed(0.05));
    }

    #[test]
    fn config_echo_roundtrips_through_json() {
        let cfg = RunConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
