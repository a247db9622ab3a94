//! Labeled point configurations in the plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the two-dimensional latent space.
pub type Point = [f64; 2];

/// Euclidean distance between two points.
pub fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Coordinate-wise mean of a point set.
pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let mut c = [0.0, 0.0];
    for p in points {
        c[0] += p[0];
        c[1] += p[1];
    }
    [c[0] / n, c[1] / n]
}

/// An ordered set of labeled points (item positions W or respondent
/// positions Z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentConfig {
    labels: Vec<String>,
    points: Vec<Point>,
}

impl LatentConfig {
    pub fn new(labels: Vec<String>, points: Vec<Point>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::Contract(format!(
                "label count {} does not match point count {}",
                labels.len(),
                points.len()
            )));
        }
        Ok(Self { labels, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn centroid(&self) -> Point {
        centroid(&self.points)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Point)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.points.iter().copied())
    }
}
