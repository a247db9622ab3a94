//! Rigid alignment of latent configurations.
//!
//! The LSIRM likelihood is invariant to translations, rotations, and
//! reflections of the positions, so raw draws wander over that orbit. Step
//! one aligns every draw of a chain to the draw with the highest stored log
//! posterior; step two maps one group's configuration onto another's via the
//! posterior-mean item positions, reusing the same transform for the
//! respondent positions.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{centroid, LatentConfig, Point};
use crate::lsirm::PosteriorChain;

/// A rotation/reflection plus translation of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    /// Orthogonal 2x2 matrix, determinant +1 (rotation) or -1 (reflection).
    pub rotation: [[f64; 2]; 2],
    pub translation: Point,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + self.translation[0],
            r[1][0] * p[0] + r[1][1] * p[1] + self.translation[1],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * r[1][1] - r[0][1] * r[1][0]
    }

    /// `self` after `other`: (self ∘ other)(x) = self(other(x)).
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.rotation;
        let b = &other.rotation;
        let rotation = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let translation = self.apply(other.translation);
        Self {
            rotation,
            translation,
        }
    }

    /// Max deviation of R^T R from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let r = &self.rotation;
        let rtr = [
            [
                r[0][0] * r[0][0] + r[1][0] * r[1][0],
                r[0][0] * r[0][1] + r[1][0] * r[1][1],
            ],
            [
                r[0][1] * r[0][0] + r[1][1] * r[1][0],
                r[0][1] * r[0][1] + r[1][1] * r[1][1],
            ],
        ];
        let mut defect: f64 = 0.0;
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((v - target).abs());
            }
        }
        defect
    }
}

/// Sum of squared distances between `T(source)` and `target`.
pub fn residual(t: &RigidTransform, source: &[Point], target: &[Point]) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(s, y)| {
            let m = t.apply(*s);
            let dx = m[0] - y[0];
            let dy = m[1] - y[1];
            dx * dx + dy * dy
        })
        .sum()
}

/// Least-squares rigid fit of `source` onto `target` (labels must match).
///
/// Both configurations are centered, the orthogonal polar factor of the
/// cross-covariance comes from its singular decomposition, and the
/// translation reconnects the centroids. No scaling: gamma is fixed to
/// standardize map size, so scale is identified.
pub fn procrustes_fit(source: &LatentConfig, target: &LatentConfig) -> Result<RigidTransform> {
    if source.labels() != target.labels() {
        return Err(Error::Contract(
            "procrustes_fit requires identically labeled configurations".into(),
        ));
    }
    procrustes_fit_points(source.points(), target.points())
}

/// Rigid fit on bare point lists, paired by index.
pub fn procrustes_fit_points(source: &[Point], target: &[Point]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::Contract(format!(
            "point counts differ: {} vs {}",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 2 {
        return Err(Error::Contract(
            "need at least 2 points for a rigid fit".into(),
        ));
    }
    let sc = centroid(source);
    let spread = source
        .iter()
        .map(|p| {
            let dx = p[0] - sc[0];
            let dy = p[1] - sc[1];
            dx * dx + dy * dy
        })
        .sum::<f64>();
    if spread == 0.0 {
        return Err(Error::Degenerate(
            "all source points are identical; rotation is unrecoverable".into(),
        ));
    }
    let tc = centroid(target);

    // cross-covariance H = sum (x - x_bar)(y - y_bar)^T
    let mut h: Matrix2<f64> = Matrix2::zeros();
    for (s, y) in source.iter().zip(target) {
        let xs = [s[0] - sc[0], s[1] - sc[1]];
        let ys = [y[0] - tc[0], y[1] - tc[1]];
        h[(0, 0)] += xs[0] * ys[0];
        h[(0, 1)] += xs[0] * ys[1];
        h[(1, 0)] += xs[1] * ys[0];
        h[(1, 1)] += xs[1] * ys[1];
    }
    let svd = h.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Contract("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Contract("SVD failed".into()))?;
    // maximizing tr(R H) over orthogonal R gives R = V U^T
    let r: Matrix2<f64> = v_t.transpose() * u.transpose();
    let rotation = [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]];
    let translation = [
        tc[0] - (rotation[0][0] * sc[0] + rotation[0][1] * sc[1]),
        tc[1] - (rotation[1][0] * sc[0] + rotation[1][1] * sc[1]),
    ];
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Which positions the within-chain fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignTarget {
    /// Fit on the stacked (Z; W) configuration, keeping respondent-item
    /// geometry coherent (default).
    Stacked,
    /// Fit on the item positions only.
    ItemsOnly,
}

/// A chain whose draws share one orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedChain {
    pub chain: PosteriorChain,
    /// Per-draw transform that was applied; identity at the reference draw.
    pub transforms: Vec<RigidTransform>,
    pub reference_index: usize,
    /// Set by [`align_across_groups`] on the moving group.
    pub cross_group: Option<RigidTransform>,
}

/// Align every draw to the maximum-log-posterior draw (ties break to the
/// earliest index). One common transform per draw is applied to both Z and W.
pub fn align_chain(chain: PosteriorChain) -> Result<AlignedChain> {
    align_chain_with(chain, AlignTarget::Stacked)
}

/// [`align_chain`] with an explicit choice of fit target.
pub fn align_chain_with(mut chain: PosteriorChain, target: AlignTarget) -> Result<AlignedChain> {
    if chain.draws.is_empty() {
        return Err(Error::Contract("cannot align an empty chain".into()));
    }
    let mut reference_index = 0;
    for (idx, lp) in chain.log_posterior.iter().enumerate() {
        if *lp > chain.log_posterior[reference_index] {
            reference_index = idx;
        }
    }
    let reference: Vec<Point> = stack(&chain.draws[reference_index], target);
    let transforms: Vec<RigidTransform> = chain
        .draws
        .par_iter_mut()
        .enumerate()
        .map(|(idx, draw)| {
            if idx == reference_index {
                return Ok(RigidTransform::identity());
            }
            let t = procrustes_fit_points(&stack(draw, target), &reference)?;
            for pt in draw.z.iter_mut().chain(draw.w.iter_mut()) {
                *pt = t.apply(*pt);
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    chain.aligned = true;
    Ok(AlignedChain {
        chain,
        transforms,
        reference_index,
        cross_group: None,
    })
}

fn stack(draw: &crate::lsirm::LsirmParams, target: AlignTarget) -> Vec<Point> {
    match target {
        AlignTarget::Stacked => draw.z.iter().chain(draw.w.iter()).copied().collect(),
        AlignTarget::ItemsOnly => draw.w.clone(),
    }
}

/// Map the moving group onto the reference group.
///
/// One transform is fitted from the moving group's posterior-mean item
/// configuration to the reference group's, then applied to every draw's W
/// and Z; respondent positions reuse the item-fit transform.
pub fn align_across_groups(
    reference_group: &AlignedChain,
    mut moving_group: AlignedChain,
) -> Result<AlignedChain> {
    if reference_group.chain.n_items() != moving_group.chain.n_items() {
        return Err(Error::Contract(format!(
            "item counts differ: {} vs {}",
            reference_group.chain.n_items(),
            moving_group.chain.n_items()
        )));
    }
    let (_, w_ref) = crate::lsirm::posterior_mean_positions(&reference_group.chain)?;
    let (_, w_mov) = crate::lsirm::posterior_mean_positions(&moving_group.chain)?;
    let t = procrustes_fit_points(w_mov.points(), w_ref.points())?;
    moving_group.chain.draws.par_iter_mut().for_each(|draw| {
        for pt in draw.z.iter_mut().chain(draw.w.iter_mut()) {
            *pt = t.apply(*pt);
        }
    });
    for existing in moving_group.transforms.iter_mut() {
        *existing = t.compose(existing);
    }
    moving_group.cross_group = Some(t);
    Ok(moving_group)
}
