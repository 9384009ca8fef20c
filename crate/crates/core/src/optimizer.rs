//! Global-best particle swarm optimization over a box-bounded search region.
//!
//! Coordinates can be pinned (e.g. z fixed to the PD plane), in which case the
//! swarm only moves in the remaining free dimensions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Room, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("objective returned {value} at {location}")]
    NonFinite { location: Vec3, value: f64 },
    #[error("invalid search region: {0}")]
    Region(String),
    #[error("invalid PSO configuration: {0}")]
    Config(String),
}

/// The feasible location set: per-axis bounds, with optional pinned axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRegion {
    lower: [f64; 3],
    upper: [f64; 3],
    fixed: [Option<f64>; 3],
}

impl SearchRegion {
    pub fn new(lower: [f64; 3], upper: [f64; 3], fixed: [Option<f64>; 3]) -> Result<Self, OptimizerError> {
        for axis in 0..3 {
            match fixed[axis] {
                Some(v) if !v.is_finite() => {
                    return Err(OptimizerError::Region(format!(
                        "axis {axis} pinned to non-finite value"
                    )))
                }
                Some(_) => {}
                None if !(lower[axis].is_finite() && upper[axis].is_finite() && lower[axis] < upper[axis]) => {
                    return Err(OptimizerError::Region(format!(
                        "axis {axis}: need lower < upper, got [{}, {}]",
                        lower[axis], upper[axis]
                    )))
                }
                None => {}
            }
        }
        Ok(Self { lower, upper, fixed })
    }

    /// The room footprint at height `z`, searched in x and y only.
    pub fn footprint(room: &Room, z: f64) -> Self {
        let (hw, hd) = (room.width / 2.0, room.depth / 2.0);
        Self::new([-hw, -hd, z], [hw, hd, z], [None, None, Some(z)]).expect("room dimensions are positive")
    }

    pub fn free_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(|&a| self.fixed[a].is_none())
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.to_array().iter().enumerate().all(|(a, &v)| match self.fixed[a] {
            Some(f) => v == f,
            None => v >= self.lower[a] && v <= self.upper[a],
        })
    }

    fn point(&self, free: &[f64]) -> Vec3 {
        let mut out = [0.0; 3];
        let mut it = free.iter();
        for (a, o) in out.iter_mut().enumerate() {
            *o = match self.fixed[a] {
                Some(v) => v,
                None => *it.next().unwrap(),
            };
        }
        out.into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia_weight: f64,
    pub cognitive_coefficient: f64,
    pub social_coefficient: f64,
    /// Improvement of the global best below this counts as a stalled iteration.
    pub stall_tolerance: f64,
    /// Stop after this many consecutive stalled iterations.
    pub stall_iterations: usize,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 200,
            max_iterations: 300,
            inertia_weight: 0.729,
            cognitive_coefficient: 1.49445,
            social_coefficient: 1.49445,
            stall_tolerance: 1e-18,
            stall_iterations: 30,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.swarm_size < 2 {
            return Err(OptimizerError::Config("swarm_size must be >= 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(OptimizerError::Config("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("inertia_weight", self.inertia_weight),
            ("cognitive_coefficient", self.cognitive_coefficient),
            ("social_coefficient", self.social_coefficient),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(OptimizerError::Config(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub location: Vec3,
    pub value: f64,
    /// Swarm update iterations performed (excluding initialization).
    pub iterations: usize,
    /// Global-best value after initialization and after every iteration.
    pub best_trace: Vec<f64>,
}

fn evaluate<F: Fn(Vec3) -> f64>(objective: &F, region: &SearchRegion, free: &[f64]) -> Result<f64, OptimizerError> {
    let location = region.point(free);
    let value = objective(location);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(OptimizerError::NonFinite { location, value })
    }
}

/// Minimizes `objective` over `region`.
///
/// Velocities are clamped to half the region span per axis and positions to
/// the region bounds, so the objective is never evaluated outside the region.
/// The global best is updated synchronously once per iteration.
pub fn minimize<F>(objective: F, region: &SearchRegion, config: &PsoConfig) -> Result<PsoOutcome, OptimizerError>
where
    F: Fn(Vec3) -> f64,
{
    config.validate()?;
    let axes: Vec<usize> = region.free_axes().collect();
    let dims = axes.len();
    if dims == 0 {
        let location = region.point(&[]);
        let value = evaluate(&objective, region, &[])?;
        return Ok(PsoOutcome {
            location,
            value,
            iterations: 0,
            best_trace: vec![value],
        });
    }
    let lo: Vec<f64> = axes.iter().map(|&a| region.lower[a]).collect();
    let hi: Vec<f64> = axes.iter().map(|&a| region.upper[a]).collect();
    let vmax: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.swarm_size;
    let mut pos = vec![0.0; n * dims];
    let mut vel = vec![0.0; n * dims];
    for p in 0..n {
        for d in 0..dims {
            pos[p * dims + d] = rng.random_range(lo[d]..=hi[d]);
            vel[p * dims + d] = rng.random_range(-vmax[d]..=vmax[d]);
        }
    }
    let mut best_pos = pos.clone();
    let mut best_val = Vec::with_capacity(n);
    for p in 0..n {
        best_val.push(evaluate(&objective, region, &pos[p * dims..(p + 1) * dims])?);
    }
    let mut g = argmin(&best_val);
    let mut g_pos = best_pos[g * dims..(g + 1) * dims].to_vec();
    let mut g_val = best_val[g];
    let mut trace = vec![g_val];

    let (w, c1, c2) = (
        config.inertia_weight,
        config.cognitive_coefficient,
        config.social_coefficient,
    );
    let mut stalled = 0;
    let mut iterations = 0;
    for _ in 0..config.max_iterations {
        iterations += 1;
        for p in 0..n {
            let row = p * dims..(p + 1) * dims;
            for d in 0..dims {
                let i = row.start + d;
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = w * vel[i] + c1 * r1 * (best_pos[i] - pos[i]) + c2 * r2 * (g_pos[d] - pos[i]);
                let v = v.clamp(-vmax[d], vmax[d]);
                let x = pos[i] + v;
                if x < lo[d] || x > hi[d] {
                    pos[i] = x.clamp(lo[d], hi[d]);
                    vel[i] = 0.0;
                } else {
                    pos[i] = x;
                    vel[i] = v;
                }
            }
            let value = evaluate(&objective, region, &pos[row.clone()])?;
            if value < best_val[p] {
                best_val[p] = value;
                best_pos[row.clone()].copy_from_slice(&pos[row]);
            }
        }
        let prev = g_val;
        g = argmin(&best_val);
        if best_val[g] < g_val {
            g_val = best_val[g];
            g_pos.copy_from_slice(&best_pos[g * dims..(g + 1) * dims]);
        }
        trace.push(g_val);
        if prev - g_val < config.stall_tolerance {
            stalled += 1;
            if stalled >= config.stall_iterations {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(PsoOutcome {
        location: region.point(&g_pos),
        value: g_val,
        iterations,
        best_trace: trace,
    })
}

/// Index of the smallest value; the first one on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn footprint() -> SearchRegion {
        SearchRegion::footprint(
            &Room {
                width: 5.0,
                depth: 5.0,
                height: 3.0,
            },
            -0.65,
        )
    }

    fn bowl(p: Vec3) -> f64 {
        (p.x - 0.7).powi(2) + (p.y + 1.1).powi(2)
    }

    #[test]
    fn finds_quadratic_minimum() {
        let out = minimize(bowl, &footprint(), &PsoConfig::default().with_seed(3)).unwrap();
        assert!(((out.location.x - 0.7).powi(2) + (out.location.y + 1.1).powi(2)).sqrt() < 1e-3);
        assert_eq!(out.location.z, -0.65);
        assert_eq!(out.value, bowl(out.location));
    }

    #[test]
    fn quadratic_success_rate() {
        let region = footprint();
        let ok = (0..100)
            .filter(|&s| {
                let out = minimize(bowl, &region, &PsoConfig::default().with_seed(s)).unwrap();
                bowl(out.location).sqrt() < 1e-3
            })
            .count();
        assert!(ok >= 99, "{ok}/100");
    }

    #[test]
    fn constant_objective() {
        let region = footprint();
        let out = minimize(|_| 2.5, &region, &PsoConfig::default()).unwrap();
        assert_eq!(out.value, 2.5);
        assert!(region.contains(out.location));
        // nothing improves, so the stall rule ends the run early
        assert_eq!(out.iterations, 30);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = PsoConfig::default().with_seed(11);
        let f = |p: Vec3| (p.x * 3.0).sin() + (p.y * 2.0).cos() + 0.1 * p.x * p.x;
        assert_eq!(
            minimize(f, &footprint(), &cfg).unwrap(),
            minimize(f, &footprint(), &cfg).unwrap()
        );
    }

    #[test]
    fn trace_is_monotone_and_evaluations_in_bounds() {
        let region = footprint();
        let f = |p: Vec3| {
            assert!(region.contains(p), "evaluated outside region at {p}");
            (p.x * 5.0).sin() * (p.y * 4.0).cos() + 0.05 * p.norm_squared()
        };
        let out = minimize(f, &region, &PsoConfig::default().with_seed(5)).unwrap();
        assert!(out.best_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(out.best_trace.len(), out.iterations + 1);
    }

    #[test]
    fn reports_non_finite_values() {
        let err = minimize(
            |p: Vec3| if p.x > 0.0 { f64::NAN } else { 0.0 },
            &footprint(),
            &PsoConfig::default(),
        )
        .unwrap_err();
        match err {
            OptimizerError::NonFinite { location, .. } => assert!(location.x > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_region_and_config() {
        assert!(SearchRegion::new([0.0; 3], [0.0, 1.0, 1.0], [None; 3]).is_err());
        let cfg = PsoConfig {
            swarm_size: 1,
            ..PsoConfig::default()
        };
        assert!(minimize(bowl, &footprint(), &cfg).is_err());
    }
}
