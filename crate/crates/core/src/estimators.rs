//! Online-phase position estimators.
//!
//! * [`estimate_fingerprint`]: weighted k-NN in power space, no channel model.
//! * [`estimate_nls`]: weighted least squares against the LOS-only channel
//!   model.
//! * [`estimate_danls`]: weighted least squares against the received-power
//!   model learned from the fingerprint database (k-NN in location space),
//!   which absorbs reflections the LOS model misses.
//!
//! Both least-squares objectives weight residual `i` by `1/σ_i²` from the
//! scene's noise model and are minimized with PSO.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::los_gain;
use crate::database::{Database, DatabaseError, PowerVector};
use crate::optimizer::{minimize, OptimizerError, PsoConfig, SearchRegion};
use crate::regression::{knn_location_estimate, knn_power_estimate, RegressionError};
use crate::scene::{Scene, Vec3};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("measured {found} powers, scene has {expected} LEDs")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Database(#[from] DatabaseError),
    #[error("estimator `{0}` needs a fingerprint database")]
    MissingDatabase(Method),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "fp")]
    Fingerprint,
    #[serde(rename = "nls")]
    Nls,
    #[serde(rename = "danls")]
    DaNls,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fingerprint, Method::Nls, Method::DaNls];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fingerprint => "fp",
            Method::Nls => "nls",
            Method::DaNls => "danls",
        }
    }

    pub fn uses_database(self) -> bool {
        !matches!(self, Method::Nls)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fp" | "fingerprint" => Ok(Method::Fingerprint),
            "nls" => Ok(Method::Nls),
            "danls" | "da-nls" => Ok(Method::DaNls),
            other => Err(format!("unknown estimator `{other}` (expected fp, nls or danls)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorInput<'a> {
    pub measured: PowerVector,
    pub scene: &'a Scene,
    pub region: SearchRegion,
}

impl<'a> EstimatorInput<'a> {
    /// Input searching the room footprint on the PD plane.
    pub fn on_pd_plane(measured: PowerVector, scene: &'a Scene) -> Self {
        Self {
            region: SearchRegion::footprint(&scene.room, scene.pd_plane_z()),
            measured,
            scene,
        }
    }

    fn check(&self) -> Result<(), EstimatorError> {
        if self.measured.len() != self.scene.led_count() {
            return Err(EstimatorError::LengthMismatch {
                expected: self.scene.led_count(),
                found: self.measured.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub location: Vec3,
    /// Minimized objective; `None` for fingerprinting.
    pub objective_value: Option<f64>,
    pub method: Method,
    /// True when the database was collected under a different scene.
    pub stale_database: bool,
}

fn weighted_residual(measured: &[f64], model: impl Iterator<Item = f64>, weights: &[f64]) -> f64 {
    measured
        .iter()
        .zip(model)
        .zip(weights)
        .map(|((m, p), w)| (m - p) * (m - p) * w)
        .sum()
}

/// Weights `1/σ_i²`. A noiseless scene gets equal weights normalized by the
/// mean squared measured power, so the cost is dimensionless and the
/// optimizer's absolute stall tolerance means the same thing in both cases.
fn objective_weights(input: &EstimatorInput) -> Vec<f64> {
    let noise = &input.scene.noise;
    if noise.is_noiseless() {
        let n = input.measured.len().max(1) as f64;
        let mean_sq = input.measured.iter().map(|p| p * p).sum::<f64>() / n;
        if mean_sq > 0.0 && mean_sq.is_finite() {
            return vec![1.0 / mean_sq; input.measured.len()];
        }
    }
    noise.objective_weights()
}

/// LOS-only least-squares cost at `candidate`.
pub fn nls_objective(candidate: Vec3, input: &EstimatorInput) -> f64 {
    let weights = objective_weights(input);
    nls_cost(candidate, input, &weights)
}

fn nls_cost(candidate: Vec3, input: &EstimatorInput, weights: &[f64]) -> f64 {
    let model = input
        .scene
        .leds
        .iter()
        .map(|led| led.tx_power * los_gain(led, candidate, input.scene).unwrap_or(f64::NAN));
    weighted_residual(&input.measured, model, weights)
}

/// Least-squares cost against the database-learned power model at `candidate`.
pub fn danls_objective(
    candidate: Vec3,
    input: &EstimatorInput,
    db: &Database,
    k: usize,
) -> Result<f64, EstimatorError> {
    let weights = objective_weights(input);
    danls_cost(candidate, input, db, k, &weights)
}

fn danls_cost(
    candidate: Vec3,
    input: &EstimatorInput,
    db: &Database,
    k: usize,
    weights: &[f64],
) -> Result<f64, EstimatorError> {
    let model = knn_power_estimate(candidate, db, k)?;
    Ok(weighted_residual(&input.measured, model.iter().copied(), weights))
}

pub fn estimate_nls(input: &EstimatorInput, pso: &PsoConfig) -> Result<Estimate, EstimatorError> {
    input.check()?;
    let weights = objective_weights(input);
    let out = minimize(|l| nls_cost(l, input, &weights), &input.region, pso)?;
    Ok(Estimate {
        location: out.location,
        objective_value: Some(out.value),
        method: Method::Nls,
        stale_database: false,
    })
}

fn check_database(input: &EstimatorInput, db: &Database, k: usize) -> Result<bool, EstimatorError> {
    let fresh = db.check_scene(input.scene)?;
    if !fresh {
        log::warn!(
            "fingerprint database was built for scene {} but the current scene is {}",
            db.scene_hash(),
            input.scene.content_hash()
        );
    }
    if k == 0 || k > db.len() {
        return Err(RegressionError::KOutOfRange { k, available: db.len() }.into());
    }
    Ok(!fresh)
}

pub fn estimate_danls(
    input: &EstimatorInput,
    db: &Database,
    k: usize,
    pso: &PsoConfig,
) -> Result<Estimate, EstimatorError> {
    input.check()?;
    let stale = check_database(input, db, k)?;
    let weights = objective_weights(input);
    // k is validated above, so the k-NN lookup cannot fail here
    let objective = |l: Vec3| danls_cost(l, input, db, k, &weights).unwrap_or(f64::NAN);
    let out = minimize(objective, &input.region, pso)?;
    Ok(Estimate {
        location: out.location,
        objective_value: Some(out.value),
        method: Method::DaNls,
        stale_database: stale,
    })
}

pub fn estimate_fingerprint(input: &EstimatorInput, db: &Database, k: usize) -> Result<Estimate, EstimatorError> {
    input.check()?;
    let stale = check_database(input, db, k)?;
    Ok(Estimate {
        location: knn_location_estimate(&input.measured, db, k)?,
        objective_value: None,
        method: Method::Fingerprint,
        stale_database: stale,
    })
}

/// Runs `method` on `input`; `db` is required for the database-backed methods.
pub fn estimate(
    method: Method,
    input: &EstimatorInput,
    db: Option<&Database>,
    k: usize,
    pso: &PsoConfig,
) -> Result<Estimate, EstimatorError> {
    let need_db = || db.ok_or(EstimatorError::MissingDatabase(method));
    match method {
        Method::Nls => estimate_nls(input, pso),
        Method::DaNls => estimate_danls(input, need_db()?, k, pso),
        Method::Fingerprint => estimate_fingerprint(input, need_db()?, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Channel;
    use crate::database::{build_database, grid_locations, Fingerprint};

    fn los_only_powers(scene: &Scene, at: Vec3) -> PowerVector {
        PowerVector::new(
            scene
                .leds
                .iter()
                .map(|l| l.tx_power * los_gain(l, at, scene).unwrap())
                .collect(),
        )
    }

    #[test]
    fn nls_objective_vanishes_at_truth() {
        let scene = Scene::reference(20.0);
        let at = Vec3::new(0.4, -1.3, scene.pd_plane_z());
        let input = EstimatorInput::on_pd_plane(los_only_powers(&scene, at), &scene);
        assert_eq!(nls_objective(at, &input), 0.0);
    }

    #[test]
    fn nls_objective_scales_with_inverse_variance() {
        let scene = Scene::reference(20.0);
        let z = scene.pd_plane_z();
        let measured = los_only_powers(&scene, Vec3::new(0.4, -1.3, z));
        let mut scaled = scene.clone();
        scaled.noise.variance_per_led.iter_mut().for_each(|v| *v *= 4.0);
        let a = nls_objective(
            Vec3::new(1.0, 1.0, z),
            &EstimatorInput::on_pd_plane(measured.clone(), &scene),
        );
        let b = nls_objective(Vec3::new(1.0, 1.0, z), &EstimatorInput::on_pd_plane(measured, &scaled));
        assert!((a / 4.0 - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn single_led_residual() {
        let mut scene = Scene::reference(10.0);
        scene.leds.truncate(1);
        scene.noise.variance_per_led.truncate(1);
        let at = Vec3::new(-1.0, -1.0, scene.pd_plane_z());
        let delta = 3e-5;
        let mut measured = los_only_powers(&scene, at);
        measured[0] += delta;
        let input = EstimatorInput::on_pd_plane(measured, &scene);
        let expected = delta * delta / 9.15e-7;
        assert!((nls_objective(at, &input) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn danls_objective_zero_at_exact_match() {
        let scene = Scene::reference(20.0).noiseless();
        let locs = grid_locations(&scene.room, scene.pd_plane_z(), 5, 5);
        let db = build_database(&scene, &locs, 1).unwrap();
        let e = &db.entries()[7];
        let input = EstimatorInput::on_pd_plane(e.powers.clone(), &scene);
        assert_eq!(danls_objective(e.location, &input, &db, 3).unwrap(), 0.0);
    }

    #[test]
    fn danls_objective_flat_for_uniform_database() {
        let scene = Scene::reference(20.0);
        let z = scene.pd_plane_z();
        let flat = vec![1e-4, 2e-4, 3e-4, 4e-4];
        let db = Database::new(
            grid_locations(&scene.room, z, 3, 3)
                .into_iter()
                .map(|l| Fingerprint {
                    location: l,
                    powers: PowerVector::new(flat.clone()),
                })
                .collect(),
            "flat",
        )
        .unwrap();
        let measured = PowerVector::new(vec![2e-4; 4]);
        let input = EstimatorInput::on_pd_plane(measured.clone(), &scene);
        let expected: f64 = measured.iter().zip(&flat).map(|(m, p)| (m - p).powi(2) / 9.15e-7).sum();
        for c in [Vec3::new(0.0, 0.0, z), Vec3::new(2.0, -1.7, z), Vec3::new(-0.3, 0.8, z)] {
            let v = danls_objective(c, &input, &db, 9).unwrap();
            assert!((v - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn learned_model_beats_los_model_under_reflections() {
        let scene = Scene::reference(20.0).noiseless();
        let locs = grid_locations(&scene.room, scene.pd_plane_z(), 28, 28);
        let db = build_database(&scene, &locs, 1).unwrap();
        let ch = Channel::new(&scene);
        for truth in [
            Vec3::new(0.3, -0.9, -0.65),
            Vec3::new(-2.0, 1.7, -0.65),
            Vec3::new(1.1, 2.2, -0.65),
        ] {
            let input = EstimatorInput::on_pd_plane(ch.noiseless_vector(truth).unwrap(), &scene);
            assert!(danls_objective(truth, &input, &db, 3).unwrap() < nls_objective(truth, &input));
        }
    }

    #[test]
    fn nls_exact_without_reflections() {
        let scene = Scene::reference(20.0).with_reflectance(0.0).noiseless();
        let ch = Channel::new(&scene);
        let truth = Vec3::new(0.9, -0.35, scene.pd_plane_z());
        let input = EstimatorInput::on_pd_plane(ch.noiseless_vector(truth).unwrap(), &scene);
        let est = estimate_nls(&input, &PsoConfig::default().with_seed(1)).unwrap();
        assert!(est.location.distance(truth) < 1e-2);
    }

    #[test]
    fn nls_biased_with_reflections() {
        let scene = Scene::reference(20.0).noiseless();
        let ch = Channel::new(&scene);
        let truth = Vec3::new(-1.9, 2.1, scene.pd_plane_z());
        let input = EstimatorInput::on_pd_plane(ch.noiseless_vector(truth).unwrap(), &scene);
        let est = estimate_nls(&input, &PsoConfig::default().with_seed(1)).unwrap();
        assert!(est.location.distance(truth) > 1e-2);
    }

    #[test]
    fn nls_handles_all_zero_measurements() {
        let scene = Scene::reference(20.0);
        let input = EstimatorInput::on_pd_plane(PowerVector::zeros(4), &scene);
        let est = estimate_nls(&input, &PsoConfig::default()).unwrap();
        assert!(input.region.contains(est.location));
        // weakest LOS coverage is at the corners
        assert!(est.location.x.abs() > 2.0 && est.location.y.abs() > 2.0);
    }

    #[test]
    fn fingerprint_exact_match_and_convex_hull() {
        let scene = Scene::reference(20.0);
        let locs = grid_locations(&scene.room, scene.pd_plane_z(), 10, 10);
        let db = build_database(&scene, &locs, 3).unwrap();
        let e = &db.entries()[42];
        let input = EstimatorInput::on_pd_plane(e.powers.clone(), &scene);
        let est = estimate_fingerprint(&input, &db, 3).unwrap();
        assert_eq!(est.location, e.location);
        assert_eq!(est.objective_value, None);
        assert!(!est.stale_database);
    }

    #[test]
    fn stale_database_is_flagged_not_rejected() {
        let scene = Scene::reference(20.0);
        let locs = grid_locations(&scene.room, scene.pd_plane_z(), 4, 4);
        let db = build_database(&scene, &locs, 3).unwrap();
        let other = scene.with_reflectance(0.2);
        let input = EstimatorInput::on_pd_plane(db.entries()[0].powers.clone(), &other);
        assert!(estimate_fingerprint(&input, &db, 2).unwrap().stale_database);
    }

    #[test]
    fn input_validation() {
        let scene = Scene::reference(20.0);
        let locs = grid_locations(&scene.room, scene.pd_plane_z(), 2, 2);
        let db = build_database(&scene, &locs, 3).unwrap();
        let short = EstimatorInput::on_pd_plane(PowerVector::zeros(3), &scene);
        assert!(matches!(
            estimate_fingerprint(&short, &db, 1),
            Err(EstimatorError::LengthMismatch { expected: 4, found: 3 })
        ));
        let input = EstimatorInput::on_pd_plane(PowerVector::zeros(4), &scene);
        assert!(matches!(
            estimate_danls(&input, &db, 5, &PsoConfig::default()),
            Err(EstimatorError::Regression(RegressionError::KOutOfRange {
                k: 5,
                available: 4
            }))
        ));
    }
}
