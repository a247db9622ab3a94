//! Forward simulators with known ground truth.
//!
//! These generators back every recovery-based check: response matrices drawn
//! from the model with known parameters, and clustered point patterns drawn
//! from a Thomas process with known parents.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::latent::Point;
use crate::lsirm::{logit_prob, LsirmParams};
use crate::ns::Domain2D;
use crate::seed::rng_for;

/// Generating parameters for [`simulate_lsirm`]; unset blocks are drawn from
/// their priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub beta: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub z: Option<Vec<Point>>,
    pub w: Option<Vec<Point>>,
    pub gamma: f64,
    pub sigma_beta: f64,
    pub sigma_theta: f64,
    /// Standard deviation of the position coordinates.
    pub position_sd: f64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            beta: None,
            theta: None,
            z: None,
            w: None,
            gamma: 1.0,
            sigma_beta: 1.0,
            sigma_theta: 1.0,
            position_sd: 1.0,
        }
    }
}

/// The parameters that generated a synthetic response matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsirmTruth {
    pub params: LsirmParams,
    pub seed: u64,
}

/// Simulate an N x P binary response matrix from the model.
///
/// Parameter blocks not pinned in `spec` are drawn first (beta, theta, z, w,
/// in that order), then each cell is Bernoulli with the model probability.
/// Deterministic given the seed.
pub fn simulate_lsirm(
    n: usize,
    p: usize,
    spec: &TruthSpec,
    seed: u64,
) -> Result<(ResponseMatrix, LsirmTruth)> {
    if n < 2 || p < 2 {
        return Err(Error::Contract(format!(
            "need N, P >= 2, got N={n}, P={p}"
        )));
    }
    if spec.gamma < 0.0 {
        return Err(Error::Contract("gamma must be >= 0".into()));
    }
    let mut rng = rng_for(seed, 0x515);
    let check_len = |name: &str, len: usize, want: usize| -> Result<()> {
        if len != want {
            return Err(Error::Contract(format!(
                "{name} has length {len}, expected {want}"
            )));
        }
        Ok(())
    };
    let beta = match &spec.beta {
        Some(b) => {
            check_len("beta", b.len(), p)?;
            b.clone()
        }
        None => (0..p)
            .map(|_| spec.sigma_beta * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    let theta = match &spec.theta {
        Some(t) => {
            check_len("theta", t.len(), n)?;
            t.clone()
        }
        None => (0..n)
            .map(|_| spec.sigma_theta * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    let draw_points = |count: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Point> {
        (0..count)
            .map(|_| {
                [
                    spec.position_sd * rng.sample::<f64, _>(StandardNormal),
                    spec.position_sd * rng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect()
    };
    let z = match &spec.z {
        Some(z) => {
            check_len("z", z.len(), n)?;
            z.clone()
        }
        None => draw_points(n, &mut rng),
    };
    let w = match &spec.w {
        Some(w) => {
            check_len("w", w.len(), p)?;
            w.clone()
        }
        None => draw_points(p, &mut rng),
    };

    let mut values = Vec::with_capacity(n * p);
    for k in 0..n {
        for i in 0..p {
            let prob = logit_prob(theta[k], beta[i], spec.gamma, z[k], w[i]);
            values.push(Some(u8::from(rng.random::<f64>() < prob)));
        }
    }
    let x = ResponseMatrix::new(
        (0..n).map(|k| format!("r{}", k + 1)).collect(),
        (0..p).map(|i| format!("i{}", i + 1)).collect(),
        values,
        None,
    )?;
    let truth = LsirmTruth {
        params: LsirmParams {
            beta,
            theta,
            z,
            w,
            gamma: spec.gamma,
            sigma_theta_sq: spec.sigma_theta * spec.sigma_theta,
        },
        seed,
    };
    Ok((x, truth))
}

/// How Thomas-process parents are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParentSpec {
    /// Use these locations (recovery tests need a known layout).
    Fixed(Vec<Point>),
    /// Draw this many parents uniformly in the domain.
    Count(usize),
    /// Poisson(kappa * |S|) parents, uniform in the domain.
    Intensity(f64),
}

/// A realized Thomas pattern and the truth that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThomasTruth {
    pub parents: Vec<Point>,
    pub alpha: f64,
    pub omega: f64,
    pub domain: Domain2D,
    pub seed: u64,
    pub offspring: Vec<Point>,
    /// Offspring that fell outside the domain and were dropped.
    pub discarded: usize,
}

/// Simulate a Thomas process: each parent spawns Poisson(alpha) offspring at
/// parent + N(0, omega^2 I); offspring outside the domain are discarded with
/// the count recorded.
pub fn simulate_thomas(
    parents: &ParentSpec,
    alpha: f64,
    omega: f64,
    dom: &Domain2D,
    seed: u64,
) -> Result<ThomasTruth> {
    if !(alpha > 0.0) {
        return Err(Error::Contract(format!("alpha must be > 0, got {alpha}")));
    }
    if !(omega > 0.0) {
        return Err(Error::Contract(format!("omega must be > 0, got {omega}")));
    }
    let mut rng = rng_for(seed, 0x7077);
    let parent_points: Vec<Point> = match parents {
        ParentSpec::Fixed(pts) => {
            for pt in pts {
                if !dom.contains(*pt) {
                    return Err(Error::Contract(format!(
                        "parent ({}, {}) lies outside the domain",
                        pt[0], pt[1]
                    )));
                }
            }
            if pts.is_empty() {
                return Err(Error::Contract("need at least one parent".into()));
            }
            pts.clone()
        }
        ParentSpec::Count(m) => {
            if *m == 0 {
                return Err(Error::Contract("need at least one parent".into()));
            }
            (0..*m).map(|_| dom.uniform_point(&mut rng)).collect()
        }
        ParentSpec::Intensity(kappa) => {
            if !(*kappa > 0.0) {
                return Err(Error::Contract("kappa must be > 0".into()));
            }
            let pois = Poisson::new(kappa * dom.area())
                .map_err(|e| Error::Contract(format!("invalid Poisson rate: {e}")))?;
            let mut count = 0usize;
            for attempt in 0..100 {
                count = pois.sample(&mut rng) as usize;
                if count > 0 {
                    break;
                }
                if attempt == 99 {
                    return Err(Error::Init(
                        "no parents realized in 100 attempts; raise kappa or enlarge the domain"
                            .into(),
                    ));
                }
            }
            (0..count).map(|_| dom.uniform_point(&mut rng)).collect()
        }
    };

    let pois = Poisson::new(alpha)
        .map_err(|e| Error::Contract(format!("invalid Poisson rate: {e}")))?;
    let mut offspring = Vec::new();
    let mut discarded = 0usize;
    for parent in &parent_points {
        let n_off = pois.sample(&mut rng) as usize;
        for _ in 0..n_off {
            let pt = [
                parent[0] + omega * rng.sample::<f64, _>(StandardNormal),
                parent[1] + omega * rng.sample::<f64, _>(StandardNormal),
            ];
            if dom.contains(pt) {
                offspring.push(pt);
            } else {
                discarded += 1;
            }
        }
    }

    Ok(ThomasTruth {
        parents: parent_points,
        alpha,
        omega,
        domain: dom.clone(),
        seed,
        offspring,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lsirm_gamma_zero_gives_coin_flips() {
        let spec = TruthSpec {
            gamma: 0.0,
            beta: Some(vec![0.0; 20]),
            theta: Some(vec![0.0; 100]),
            ..TruthSpec::default()
        };
        let (x, _) = simulate_lsirm(100, 20, &spec, 4242).unwrap();
        let total: f64 = x.values().iter().map(|v| f64::from(v.unwrap())).sum();
        let freq = total / (100.0 * 20.0);
        let tol = 3.0 / ((100.0f64 * 20.0).sqrt());
        assert!((freq - 0.5).abs() < tol, "freq {freq}");
    }

    #[test]
    fn identical_items_have_matching_proportions() {
        // two items share beta and w: their positive proportions agree up to
        // Monte Carlo error
        let n = 2000;
        let w = vec![[0.5, -0.2], [0.5, -0.2], [-1.0, 0.3]];
        let spec = TruthSpec {
            beta: Some(vec![0.3, 0.3, -0.5]),
            w: Some(w),
            ..TruthSpec::default()
        };
        let (x, _) = simulate_lsirm(n, 3, &spec, 77).unwrap();
        let prop = |i: usize| -> f64 {
            (0..n).map(|k| f64::from(x.get(k, i).unwrap())).sum::<f64>() / n as f64
        };
        let diff = (prop(0) - prop(1)).abs();
        assert!(diff < 3.0 * (0.5 / (n as f64).sqrt()), "diff {diff}");
    }

    #[test]
    fn lsirm_is_deterministic() {
        let spec = TruthSpec::default();
        let (a, ta) = simulate_lsirm(300, 30, &spec, 20240601).unwrap();
        let (b, tb) = simulate_lsirm(300, 30, &spec, 20240601).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = simulate_lsirm(300, 30, &spec, 20240602).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn truth_beats_perturbed_truth_on_average() {
        let spec = TruthSpec::default();
        let mut wins = 0;
        for rep in 0..10 {
            let (x, truth) = simulate_lsirm(80, 12, &spec, 900 + rep).unwrap();
            let ll_truth = crate::lsirm::log_likelihood(&x, &truth.params).unwrap();
            assert!(ll_truth.is_finite());
            let mut moved = truth.params.clone();
            for pt in moved.z.iter_mut() {
                pt[0] += 1.5;
            }
            // a non-rigid distortion (z moved, w not) loses likelihood
            let ll_moved = crate::lsirm::log_likelihood(&x, &moved).unwrap();
            if ll_truth > ll_moved {
                wins += 1;
            }
        }
        assert!(wins >= 8, "truth won only {wins}/10");
    }

    #[test]
    fn thomas_offspring_mean_matches_alpha() {
        let dom = Domain2D::new(-10.0, 10.0, -10.0, 10.0).unwrap();
        let alpha = 5.0;
        let mut total = 0usize;
        let reps = 10_000usize;
        for rep in 0..reps {
            let t = simulate_thomas(
                &ParentSpec::Fixed(vec![[0.0, 0.0]]),
                alpha,
                0.05,
                &dom,
                rep as u64,
            )
            .unwrap();
            total += t.offspring.len() + t.discarded;
        }
        let mean = total as f64 / reps as f64;
        let se = (alpha / reps as f64).sqrt();
        assert!((mean - alpha).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn thomas_tiny_omega_keeps_offspring_on_parents() {
        let dom = Domain2D::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let parents = vec![[0.25, 0.25], [0.75, 0.75]];
        let t = simulate_thomas(&ParentSpec::Fixed(parents.clone()), 20.0, 1e-6, &dom, 5).unwrap();
        assert!(!t.offspring.is_empty());
        for off in &t.offspring {
            let nearest = parents
                .iter()
                .map(|p| crate::latent::dist(*p, *off))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-4);
        }
    }

    #[test]
    fn thomas_deterministic_and_validates() {
        let dom = Domain2D::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let a = simulate_thomas(&ParentSpec::Count(4), 8.0, 0.05, &dom, 123).unwrap();
        let b = simulate_thomas(&ParentSpec::Count(4), 8.0, 0.05, &dom, 123).unwrap();
        assert_eq!(a, b);
        assert!(simulate_thomas(&ParentSpec::Count(4), 0.0, 0.05, &dom, 1).is_err());
        assert!(simulate_thomas(&ParentSpec::Count(4), 8.0, -1.0, &dom, 1).is_err());
        assert!(simulate_thomas(
            &ParentSpec::Fixed(vec![[2.0, 0.5]]),
            8.0,
            0.05,
            &dom,
            1
        )
        .is_err());
    }
}
