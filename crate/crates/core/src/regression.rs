//! Inverse-distance-weighted k-nearest-neighbor regression, used in two
//! directions over a fingerprint database:
//!
//! * location → power ([`knn_power_estimate`]), the learned received-power
//!   model inside the database-assisted NLS objective;
//! * power → location ([`knn_location_estimate`]), the fingerprinting
//!   estimator.
//!
//! Neighbor search is exact brute force. When the k-th and (k+1)-th distances
//! tie, the lower database index wins.

use thiserror::Error;

use crate::database::{Database, PowerVector};
use crate::scene::Vec3;

/// Distances below this count as an exact match (meters or watts).
pub const ZERO_DISTANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("k = {k} is out of range for {available} points")]
    KOutOfRange { k: usize, available: usize },
    #[error("query has {query} dimensions but points have {points}")]
    DimensionMismatch { query: usize, points: usize },
    #[error("query contains non-finite values")]
    NonFiniteQuery,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    /// Euclidean distances, ascending.
    pub distances: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Normalized inverse-distance weights, one per neighbor.
    ///
    /// If any neighbor is an exact match, the exact matches share the weight
    /// equally and every other neighbor gets zero.
    pub fn weights(&self) -> Vec<f64> {
        let exact = self.distances.iter().filter(|&&d| d < ZERO_DISTANCE).count();
        if exact > 0 {
            let w = 1.0 / exact as f64;
            return self
                .distances
                .iter()
                .map(|&d| if d < ZERO_DISTANCE { w } else { 0.0 })
                .collect();
        }
        let inv: Vec<f64> = self.distances.iter().map(|d| 1.0 / d).collect();
        let total: f64 = inv.iter().sum();
        inv.into_iter().map(|w| w / total).collect()
    }
}

/// The `k` points closest to `query`, ordered by `(distance, index)`.
pub fn nearest_neighbors<P, I>(query: &[f64], points: I, k: usize) -> Result<NeighborSet, RegressionError>
where
    P: AsRef<[f64]>,
    I: IntoIterator<Item = P>,
{
    if query.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFiniteQuery);
    }
    let mut mismatch = None;
    let squared = points.into_iter().map(|p| {
        let p = p.as_ref();
        if p.len() != query.len() {
            mismatch.get_or_insert(p.len());
            return f64::INFINITY;
        }
        query.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum()
    });
    let set = select(squared, k);
    if let Some(points) = mismatch {
        return Err(RegressionError::DimensionMismatch {
            query: query.len(),
            points,
        });
    }
    set
}

fn nearest_locations(query: [f64; 3], points: &[[f64; 3]], k: usize) -> Result<NeighborSet, RegressionError> {
    if query.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFiniteQuery);
    }
    let squared = points.iter().map(|p| {
        let (dx, dy, dz) = (query[0] - p[0], query[1] - p[1], query[2] - p[2]);
        dx * dx + dy * dy + dz * dz
    });
    select(squared, k)
}

/// Keeps the `k` smallest squared distances; earlier indices win ties.
fn select(squared: impl Iterator<Item = f64>, k: usize) -> Result<NeighborSet, RegressionError> {
    // (squared distance, index), kept sorted; at most k long
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    let mut count = 0;
    for (i, d2) in squared.enumerate() {
        count += 1;
        if k == 0 || (best.len() == k && d2 >= best[k - 1].0) {
            continue;
        }
        // strict comparison keeps earlier indices ahead of later ties
        let pos = best.partition_point(|&(d, _)| d <= d2);
        best.insert(pos, (d2, i));
        best.truncate(k);
    }
    if k == 0 || k > count {
        return Err(RegressionError::KOutOfRange { k, available: count });
    }
    Ok(NeighborSet {
        indices: best.iter().map(|&(_, i)| i).collect(),
        distances: best.iter().map(|&(d, _)| d.sqrt()).collect(),
    })
}

/// Learned received-power vector at `query_location`: the inverse-distance
/// weighted mean of the powers stored at the `k` nearest database locations.
pub fn knn_power_estimate(query_location: Vec3, db: &Database, k: usize) -> Result<PowerVector, RegressionError> {
    let entries = db.entries();
    let nn = nearest_locations(query_location.to_array(), db.locations(), k)?;
    let mut out = PowerVector::zeros(db.led_count());
    for (&idx, w) in nn.indices.iter().zip(nn.weights()) {
        for (o, p) in out.iter_mut().zip(entries[idx].powers.iter()) {
            *o += w * p;
        }
    }
    Ok(out)
}

/// Fingerprinting: the inverse-distance weighted mean of the locations of the
/// `k` fingerprints nearest to `measured` in power space.
pub fn knn_location_estimate(measured: &PowerVector, db: &Database, k: usize) -> Result<Vec3, RegressionError> {
    let entries = db.entries();
    let nn = nearest_neighbors(measured.as_slice(), entries.iter().map(|e| e.powers.as_slice()), k)?;
    let mut out = Vec3::default();
    for (&idx, w) in nn.indices.iter().zip(nn.weights()) {
        out = out + entries[idx].location * w;
    }
    Ok(out)
}
