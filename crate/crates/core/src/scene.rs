//! Simulation world: room geometry, LED array, photodetector optics, channel
//! constants and the measurement noise model.
//!
//! Coordinates are room-centered with z pointing up, so the floor sits at
//! `z = -height / 2` and the ceiling at `z = height / 2`. LEDs hang on the
//! ceiling pointing straight down; the photodetector (PD) points straight up.
//!
//! Scenes are loaded from TOML. See `configs/reference_scene.toml` for the full
//! schema; the field-by-field units are:
//!
//! | key                          | unit    |
//! |------------------------------|---------|
//! | `room.width/depth/height`    | m       |
//! | `leds[].position`            | m       |
//! | `leds[].tx_power`            | W       |
//! | `pd.area`                    | m²      |
//! | `pd.fov_half_angle_deg`      | degrees |
//! | `pd.fov_half_angle_rad`      | radians |
//! | `pd.height_above_floor`      | m       |
//! | `channel.wall_patch_size`    | m       |
//! | `noise.variance_per_led`     | W (as stated in the source parameter set; dimensionally W²) |
//!
//! Exactly one of `fov_half_angle_deg` / `fov_half_angle_rad` must be given.
//! Serialization always writes radians so that a save/load cycle is exact.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("failed to parse scene document: {0}")]
    Parse(String),
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Point or direction in room-centered coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Box-shaped room centered on the origin. Only the four vertical walls
/// reflect light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Room {
    pub fn floor_z(&self) -> f64 {
        -self.height / 2.0
    }

    pub fn ceiling_z(&self) -> f64 {
        self.height / 2.0
    }

    /// True when `p` lies inside the closed room box.
    pub fn contains(&self, p: Vec3) -> bool {
        p.x.abs() <= self.width / 2.0 && p.y.abs() <= self.depth / 2.0 && p.z.abs() <= self.height / 2.0
    }
}

/// Ceiling-mounted LED pointing straight down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Led {
    pub position: Vec3,
    /// Transmitted optical power, watts.
    pub tx_power: f64,
}

impl Led {
    pub const ORIENTATION: Vec3 = Vec3::new(0.0, 0.0, -1.0);
}

/// Upward-facing photodetector with an optical filter and concentrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdSpec {
    /// Detector area, m².
    pub area: f64,
    /// Field of view ψ_c, radians.
    pub fov_half_angle: f64,
    pub refractive_index: f64,
    pub optical_filter_gain: f64,
    /// Known, fixed mounting height measured from the floor, meters.
    pub height_above_floor: f64,
}

impl PdSpec {
    pub const ORIENTATION: Vec3 = Vec3::new(0.0, 0.0, 1.0);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub lambertian_order: f64,
    pub reflectance: f64,
    /// Edge length of the wall discretization used for the reflection integral.
    pub wall_patch_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-LED variance of a single power measurement.
    pub variance_per_led: Vec<f64>,
    /// Number of repeated measurements averaged into one reported value.
    pub averaging_count: u32,
}

impl NoiseModel {
    /// Weights `1/σ_i²` for the least-squares objectives.
    ///
    /// A noiseless model (all variances zero) falls back to unit weights, the
    /// equal-variance limit of the weighted objective.
    pub fn objective_weights(&self) -> Vec<f64> {
        if self.variance_per_led.iter().all(|&v| v == 0.0) {
            vec![1.0; self.variance_per_led.len()]
        } else {
            self.variance_per_led.iter().map(|v| 1.0 / v).collect()
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.variance_per_led.iter().all(|&v| v == 0.0)
    }
}

/// The complete simulation world. Its serde form (used inside experiment
/// specs and for hashing) stores the FOV in radians; use [`load_scene`] for
/// TOML configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room: Room,
    pub leds: Vec<Led>,
    pub pd: PdSpec,
    pub channel: ChannelParams,
    pub noise: NoiseModel,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PdDoc {
    area: f64,
    fov_half_angle_deg: Option<f64>,
    fov_half_angle_rad: Option<f64>,
    refractive_index: f64,
    optical_filter_gain: f64,
    height_above_floor: f64,
}

#[derive(Serialize)]
struct PdOut {
    area: f64,
    fov_half_angle_rad: f64,
    refractive_index: f64,
    optical_filter_gain: f64,
    height_above_floor: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    room: Room,
    leds: Vec<Led>,
    pd: PdDoc,
    channel: ChannelParams,
    noise: NoiseModel,
}

#[derive(Serialize)]
struct SceneOut<'a> {
    room: &'a Room,
    leds: &'a [Led],
    pd: PdOut,
    channel: &'a ChannelParams,
    noise: &'a NoiseModel,
}

/// Parse and validate a TOML scene document.
pub fn load_scene(config_text: &str) -> Result<Scene, SceneError> {
    let doc: SceneDoc = toml::from_str(config_text).map_err(|e| SceneError::Parse(e.to_string()))?;
    let fov = match (doc.pd.fov_half_angle_deg, doc.pd.fov_half_angle_rad) {
        (Some(deg), None) => deg.to_radians(),
        (None, Some(rad)) => rad,
        (Some(_), Some(_)) => {
            return Err(invalid(
                "pd.fov_half_angle_deg",
                "give either degrees or radians, not both",
            ))
        }
        (None, None) => return Err(SceneError::Missing("pd.fov_half_angle_deg")),
    };
    let scene = Scene {
        room: doc.room,
        leds: doc.leds,
        pd: PdSpec {
            area: doc.pd.area,
            fov_half_angle: fov,
            refractive_index: doc.pd.refractive_index,
            optical_filter_gain: doc.pd.optical_filter_gain,
            height_above_floor: doc.pd.height_above_floor,
        },
        channel: doc.channel,
        noise: doc.noise,
    };
    scene.validate()?;
    Ok(scene)
}

/// Room-centered z coordinate of the PD plane.
pub fn pd_plane_z(scene: &Scene) -> f64 {
    scene.pd.height_above_floor - scene.room.height / 2.0
}

impl Scene {
    /// The reference scenario: 5×5×3 m room, four LEDs at (±1.25, ±1.25) on
    /// the ceiling, PD at 0.85 m.
    pub fn reference(tx_power: f64) -> Scene {
        let leds = [(-1.25, -1.25), (-1.25, 1.25), (1.25, -1.25), (1.25, 1.25)]
            .into_iter()
            .map(|(x, y)| Led {
                position: Vec3::new(x, y, 1.5),
                tx_power,
            })
            .collect();
        Scene {
            room: Room {
                width: 5.0,
                depth: 5.0,
                height: 3.0,
            },
            leds,
            pd: PdSpec {
                area: 1e-4,
                fov_half_angle: 70f64.to_radians(),
                refractive_index: 1.5,
                optical_filter_gain: 1.0,
                height_above_floor: 0.85,
            },
            channel: ChannelParams {
                lambertian_order: 0.646,
                reflectance: 0.8,
                wall_patch_size: 0.1,
            },
            noise: NoiseModel {
                variance_per_led: vec![9.15e-7; 4],
                averaging_count: 1000,
            },
        }
    }

    pub fn led_count(&self) -> usize {
        self.leds.len()
    }

    pub fn pd_plane_z(&self) -> f64 {
        pd_plane_z(self)
    }

    /// Same scene with every LED transmitting `tx_power`.
    pub fn with_tx_power(&self, tx_power: f64) -> Scene {
        let mut s = self.clone();
        for led in &mut s.leds {
            led.tx_power = tx_power;
        }
        s
    }

    pub fn with_reflectance(&self, reflectance: f64) -> Scene {
        let mut s = self.clone();
        s.channel.reflectance = reflectance;
        s
    }

    /// Same scene with every measurement variance set to zero.
    pub fn noiseless(&self) -> Scene {
        let mut s = self.clone();
        s.noise.variance_per_led.iter_mut().for_each(|v| *v = 0.0);
        s
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let r = &self.room;
        for (name, v) in [
            ("room.width", r.width),
            ("room.depth", r.depth),
            ("room.height", r.height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }

        if self.leds.is_empty() {
            return Err(invalid("leds", "at least one LED is required"));
        }
        let mut seen = HashSet::new();
        for (i, led) in self.leds.iter().enumerate() {
            let p = led.position;
            if !p.is_finite() {
                return Err(invalid(format!("leds[{i}].position"), "non-finite"));
            }
            if (p.z - r.ceiling_z()).abs() > 1e-9 {
                return Err(invalid(
                    format!("leds[{i}].position"),
                    format!("must lie on the ceiling plane z = {}", r.ceiling_z()),
                ));
            }
            if p.x.abs() > r.width / 2.0 || p.y.abs() > r.depth / 2.0 {
                return Err(invalid(format!("leds[{i}].position"), "outside the room"));
            }
            if !(led.tx_power.is_finite() && led.tx_power >= 0.0) {
                return Err(invalid(format!("leds[{i}].tx_power"), "must be >= 0"));
            }
            if !seen.insert(p.to_array().map(f64::to_bits)) {
                return Err(invalid(
                    format!("leds[{i}].position"),
                    "duplicates another LED position",
                ));
            }
        }

        let pd = &self.pd;
        if !(pd.area.is_finite() && pd.area > 0.0) {
            return Err(invalid("pd.area", "must be > 0"));
        }
        if !(pd.fov_half_angle > 0.0 && pd.fov_half_angle <= std::f64::consts::FRAC_PI_2) {
            return Err(invalid("pd.fov_half_angle", "must be in (0, 90] degrees"));
        }
        if !(pd.refractive_index.is_finite() && pd.refractive_index >= 1.0) {
            return Err(invalid("pd.refractive_index", "must be >= 1"));
        }
        if !(pd.optical_filter_gain.is_finite() && pd.optical_filter_gain > 0.0) {
            return Err(invalid("pd.optical_filter_gain", "must be > 0"));
        }
        if !(pd.height_above_floor >= 0.0 && pd.height_above_floor < r.height) {
            return Err(invalid(
                "pd.height_above_floor",
                "must be in [0, room.height) so the PD sits below the LEDs",
            ));
        }

        let ch = &self.channel;
        if !(ch.lambertian_order.is_finite() && ch.lambertian_order > 0.0) {
            return Err(invalid("channel.lambertian_order", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&ch.reflectance) {
            return Err(invalid(
                "channel.reflectance",
                format!("must be in [0, 1], got {}", ch.reflectance),
            ));
        }
        if !(ch.wall_patch_size.is_finite() && ch.wall_patch_size > 0.0) {
            return Err(invalid("channel.wall_patch_size", "must be > 0"));
        }

        let noise = &self.noise;
        if noise.variance_per_led.len() != self.leds.len() {
            return Err(invalid(
                "noise.variance_per_led",
                format!(
                    "expected {} entries (one per LED), got {}",
                    self.leds.len(),
                    noise.variance_per_led.len()
                ),
            ));
        }
        if noise.variance_per_led.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("noise.variance_per_led", "variances must be >= 0"));
        }
        let zeros = noise.variance_per_led.iter().filter(|&&v| v == 0.0).count();
        if zeros != 0 && zeros != noise.variance_per_led.len() {
            return Err(invalid(
                "noise.variance_per_led",
                "either all variances are zero (noiseless) or all are positive",
            ));
        }
        if noise.averaging_count < 1 {
            return Err(invalid("noise.averaging_count", "must be >= 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let out = SceneOut {
            room: &self.room,
            leds: &self.leds,
            pd: PdOut {
                area: self.pd.area,
                fov_half_angle_rad: self.pd.fov_half_angle,
                refractive_index: self.pd.refractive_index,
                optical_filter_gain: self.pd.optical_filter_gain,
                height_above_floor: self.pd.height_above_floor,
            },
            channel: &self.channel,
            noise: &self.noise,
        };
        toml::to_string(&out).expect("scene serializes to TOML")
    }

    /// Short content hash identifying the channel conditions a database was
    /// collected under.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scene serializes to JSON");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE_TOML: &str = include_str!("../../../configs/reference_scene.toml");

    #[test]
    fn reference_config_loads() {
        let scene = load_scene(REFERENCE_TOML).unwrap();
        assert_eq!(scene.led_count(), 4);
        assert_eq!(scene.leds[0].position, Vec3::new(-1.25, -1.25, 1.5));
        assert!((scene.pd.fov_half_angle - 70f64.to_radians()).abs() < 1e-15);
        assert_eq!(scene, Scene::reference(20.0));
    }

    #[test]
    fn pd_plane_height() {
        let mut scene = Scene::reference(1.0);
        assert!((pd_plane_z(&scene) + 0.65).abs() < 1e-12);
        scene.pd.height_above_floor = 1.5;
        assert_eq!(pd_plane_z(&scene), 0.0);
        scene.pd.height_above_floor = 0.0;
        assert_eq!(pd_plane_z(&scene), -1.5);
    }

    fn field_of(err: SceneError) -> String {
        match err {
            SceneError::Invalid { field, .. } => field,
            other => panic!("expected invalid-field error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_reflectance_out_of_range() {
        let text = REFERENCE_TOML.replace("reflectance = 0.8", "reflectance = 1.5");
        assert_eq!(field_of(load_scene(&text).unwrap_err()), "channel.reflectance");
    }

    #[test]
    fn rejects_empty_led_list() {
        let mut scene = Scene::reference(1.0);
        scene.leds.clear();
        scene.noise.variance_per_led.clear();
        let err = load_scene(&scene.to_toml()).unwrap_err();
        assert_eq!(field_of(err), "leds");
    }

    #[test]
    fn rejects_unknown_and_missing_keys() {
        let text = REFERENCE_TOML.replace("[room]", "[room]\ncolour = 3");
        assert!(matches!(load_scene(&text), Err(SceneError::Parse(m)) if m.contains("colour")));

        let text = REFERENCE_TOML.replace("refractive_index = 1.5", "");
        assert!(matches!(load_scene(&text), Err(SceneError::Parse(m)) if m.contains("refractive_index")));

        let text = REFERENCE_TOML.replace("fov_half_angle_deg = 70.0", "");
        assert_eq!(
            load_scene(&text).unwrap_err(),
            SceneError::Missing("pd.fov_half_angle_deg")
        );
    }

    #[test]
    fn rejects_each_type_invariant() {
        let base = Scene::reference(1.0);
        type Mutation = Box<dyn Fn(&mut Scene)>;
        let cases: Vec<(&str, Mutation)> = vec![
            ("room.width", Box::new(|s| s.room.width = 0.0)),
            ("room.depth", Box::new(|s| s.room.depth = -1.0)),
            ("room.height", Box::new(|s| s.room.height = 0.0)),
            ("leds[1].tx_power", Box::new(|s| s.leds[1].tx_power = -1.0)),
            ("leds[2].position", Box::new(|s| s.leds[2].position.z = 1.0)),
            ("leds[3].position", Box::new(|s| s.leds[3].position.x = 9.0)),
            (
                "leds[1].position",
                Box::new(|s| s.leds[1].position = s.leds[0].position),
            ),
            ("pd.area", Box::new(|s| s.pd.area = 0.0)),
            ("pd.fov_half_angle", Box::new(|s| s.pd.fov_half_angle = 2.0)),
            ("pd.refractive_index", Box::new(|s| s.pd.refractive_index = 0.9)),
            ("pd.optical_filter_gain", Box::new(|s| s.pd.optical_filter_gain = 0.0)),
            ("pd.height_above_floor", Box::new(|s| s.pd.height_above_floor = 3.0)),
            (
                "channel.lambertian_order",
                Box::new(|s| s.channel.lambertian_order = 0.0),
            ),
            ("channel.reflectance", Box::new(|s| s.channel.reflectance = -0.1)),
            ("channel.wall_patch_size", Box::new(|s| s.channel.wall_patch_size = 0.0)),
            (
                "noise.variance_per_led",
                Box::new(|s| {
                    s.noise.variance_per_led.pop();
                }),
            ),
            (
                "noise.variance_per_led",
                Box::new(|s| s.noise.variance_per_led[0] = -1.0),
            ),
            (
                "noise.variance_per_led",
                Box::new(|s| s.noise.variance_per_led[0] = 0.0),
            ),
            ("noise.averaging_count", Box::new(|s| s.noise.averaging_count = 0)),
        ];
        for (field, mutate) in cases {
            let mut s = base.clone();
            mutate(&mut s);
            let err = load_scene(&s.to_toml()).expect_err(field);
            assert_eq!(field_of(err), field);
        }
    }

    #[test]
    fn noiseless_scene_uses_unit_weights() {
        let s = Scene::reference(1.0).noiseless();
        s.validate().unwrap();
        assert_eq!(s.noise.objective_weights(), vec![1.0; 4]);
        let w = Scene::reference(1.0).noise.objective_weights();
        assert_eq!(w[0], 1.0 / 9.15e-7);
    }

    #[test]
    fn hash_tracks_channel_conditions() {
        let a = Scene::reference(20.0);
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_ne!(a.content_hash(), a.with_reflectance(0.5).content_hash());
        assert_ne!(a.content_hash(), a.with_tx_power(5.0).content_hash());
        assert_eq!(a.content_hash().len(), 16);
    }
}
