//! Optical channel: line-of-sight DC gain, single-bounce wall reflections and
//! simulated received-power measurements.
//!
//! The reflection integral over the walls is evaluated with the midpoint rule
//! on a uniform rectangular patch grid (`ChannelParams::wall_patch_size`).
//! Patches that face away from either endpoint, sit outside the LED's lower
//! half-space, or arrive outside the PD's field of view contribute nothing.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::database::PowerVector;
use crate::scene::{Led, PdSpec, Room, Scene, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("degenerate geometry: PD at {0} coincides with an LED")]
    DegenerateGeometry(Vec3),
    #[error("no line of sight from LED at {led} to PD at {pd}; kappa is undefined")]
    NoLineOfSight { led: Vec3, pd: Vec3 },
    #[error("LED index {index} out of range for {count} LEDs")]
    LedIndex { index: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallPatch {
    pub center: Vec3,
    /// Unit normal pointing into the room.
    pub normal: Vec3,
    pub area: f64,
    /// Vertical extent; walls are vertical, so `area / height` is the width.
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBreakdown {
    pub los: f64,
    pub nlos: f64,
    pub total: f64,
    /// `total / los`; at least 1 for any non-negative reflectance.
    pub kappa: f64,
}

/// Optical concentrator gain `g(ψ) = n² / sin²ψ_c` inside the field of view,
/// zero outside. The FOV boundary is inclusive.
pub fn concentrator_gain(incidence_angle: f64, pd: &PdSpec) -> f64 {
    if (0.0..=pd.fov_half_angle).contains(&incidence_angle) {
        let s = pd.fov_half_angle.sin();
        pd.refractive_index * pd.refractive_index / (s * s)
    } else {
        0.0
    }
}

/// Line-of-sight DC gain between `led` and an upward-facing PD at
/// `pd_location`.
pub fn los_gain(led: &Led, pd_location: Vec3, scene: &Scene) -> Result<f64, ChannelError> {
    let d2 = (led.position - pd_location).norm_squared();
    if d2 == 0.0 {
        return Err(ChannelError::DegenerateGeometry(pd_location));
    }
    let d = d2.sqrt();
    // Both devices are vertical, so irradiance and incidence angles coincide.
    let cos_angle = (led.position.z - pd_location.z) / d;
    if cos_angle <= 0.0 {
        return Ok(0.0);
    }
    let psi = cos_angle.min(1.0).acos();
    let g = concentrator_gain(psi, &scene.pd);
    if g == 0.0 {
        return Ok(0.0);
    }
    let m = scene.channel.lambertian_order;
    Ok((m + 1.0) * scene.pd.area / (2.0 * PI * d2) * cos_angle.powf(m) * scene.pd.optical_filter_gain * g * cos_angle)
}

fn split(length: f64, patch_size: f64) -> usize {
    // tolerate rounding so that e.g. 5.0 / 0.1 yields 50, not 51
    ((length / patch_size) - 1e-9).ceil().max(1.0) as usize
}

/// Uniform midpoint patches covering the four vertical walls.
///
/// Each wall is split into `ceil(extent / patch_size)` equal columns and rows,
/// so patches tile the wall exactly even when the size does not divide it.
pub fn wall_patches(room: &Room, patch_size: f64) -> Vec<WallPatch> {
    let (hw, hd, hh) = (room.width / 2.0, room.depth / 2.0, room.height / 2.0);
    // (wall center, inward normal, horizontal axis, horizontal extent)
    let walls = [
        (
            Vec3::new(-hw, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            room.depth,
        ),
        (
            Vec3::new(hw, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            room.depth,
        ),
        (
            Vec3::new(0.0, -hd, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            room.width,
        ),
        (
            Vec3::new(0.0, hd, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            room.width,
        ),
    ];
    let rows = split(room.height, patch_size);
    let row_h = room.height / rows as f64;
    let mut patches = Vec::new();
    for (center, normal, axis, extent) in walls {
        let cols = split(extent, patch_size);
        let col_w = extent / cols as f64;
        for c in 0..cols {
            let u = -extent / 2.0 + (c as f64 + 0.5) * col_w;
            for r in 0..rows {
                let z = -hh + (r as f64 + 0.5) * row_h;
                patches.push(WallPatch {
                    center: center + axis * u + Vec3::new(0.0, 0.0, z),
                    normal,
                    area: col_w * row_h,
                    height: row_h,
                });
            }
        }
    }
    patches
}

/// Patches closer than this many patch sizes to the PD or LED are split.
const REFINE_DISTANCE: f64 = 4.0;
const MAX_REFINE_DEPTH: u32 = 8;

struct Reflection<'a> {
    led: &'a Led,
    pd: Vec3,
    lambertian_order: f64,
    cos_fov: f64,
    /// Height gained by the field-of-view boundary per meter of horizontal distance.
    rise: f64,
}

impl Reflection<'_> {
    /// Contribution of a wall rectangle, split 2×2 while it is large relative
    /// to its distance from either endpoint.
    fn rectangle(&self, center: Vec3, normal: Vec3, width: f64, height: f64, depth: u32) -> f64 {
        let size = width.max(height);
        let near = (self.pd - center).norm().min((self.led.position - center).norm());
        if depth < MAX_REFINE_DEPTH && near < REFINE_DISTANCE * size {
            let axis = Vec3::new(-normal.y, normal.x, 0.0);
            let (dw, dh) = (width / 4.0, height / 4.0);
            return [(-dw, -dh), (-dw, dh), (dw, -dh), (dw, dh)]
                .into_iter()
                .map(|(u, v)| {
                    let c = center + axis * u + Vec3::new(0.0, 0.0, v);
                    self.rectangle(c, normal, width / 2.0, height / 2.0, depth + 1)
                })
                .sum();
        }
        self.clipped(center, normal, width * height, height)
    }

    /// Midpoint value of a rectangle after clipping it to the PD field of view.
    ///
    /// The PD faces up, so on a vertical wall its field of view ends at a
    /// height threshold that grows with horizontal distance. Clipping at that
    /// threshold keeps the sum second-order accurate at the cutoff.
    fn clipped(&self, mut center: Vec3, normal: Vec3, mut area: f64, height: f64) -> f64 {
        let horizontal = ((center.x - self.pd.x).powi(2) + (center.y - self.pd.y).powi(2)).sqrt();
        let cutoff = self.pd.z + horizontal * self.rise;
        let (bottom, top) = (center.z - height / 2.0, center.z + height / 2.0);
        if top <= cutoff {
            return 0.0;
        }
        if bottom < cutoff {
            center.z = (cutoff + top) / 2.0;
            area *= (top - cutoff) / height;
        }
        let to_led = self.led.position - center;
        let d1sq = to_led.norm_squared();
        let to_pd = self.pd - center;
        let d2sq = to_pd.norm_squared();
        if d1sq == 0.0 || d2sq == 0.0 {
            return 0.0;
        }
        let (d1, d2) = (d1sq.sqrt(), d2sq.sqrt());
        let cos_irr = to_led.z / d1;
        let cos_inc = -to_pd.z / d2;
        let cos_alpha = normal.dot(to_led) / d1;
        let cos_beta = normal.dot(to_pd) / d2;
        // clipped centers sit just inside the cone; allow for rounding
        if cos_irr < 0.0 || cos_alpha < 0.0 || cos_beta < 0.0 || cos_inc < self.cos_fov - 1e-12 {
            return 0.0;
        }
        cos_irr.powf(self.lambertian_order) * cos_alpha * cos_beta * cos_inc * area / (d1sq * d2sq)
    }
}

/// Single-reflection gain summed over `patches`, for unit reflectance.
fn nlos_unit_gain(led: &Led, pd_location: Vec3, scene: &Scene, patches: &[WallPatch]) -> f64 {
    let m = scene.channel.lambertian_order;
    let fov = scene.pd.fov_half_angle;
    let r = Reflection {
        led,
        pd: pd_location,
        lambertian_order: m,
        cos_fov: fov.cos(),
        rise: if fov < FRAC_PI_2 { 1.0 / fov.tan() } else { 0.0 },
    };
    let sum: f64 = patches
        .iter()
        .map(|p| r.rectangle(p.center, p.normal, p.area / p.height, p.height, 0))
        .sum();
    let g = concentrator_gain(0.0, &scene.pd);
    (m + 1.0) * scene.pd.area * scene.pd.optical_filter_gain * g / (2.0 * PI * PI) * sum
}

/// Gain of all single wall reflections between `led` and the PD.
///
/// Rebuilds the patch grid on every call; use [`Channel`] for repeated
/// evaluation.
pub fn nlos_gain(led: &Led, pd_location: Vec3, scene: &Scene) -> f64 {
    let patches = wall_patches(&scene.room, scene.channel.wall_patch_size);
    scene.channel.reflectance * nlos_unit_gain(led, pd_location, scene, &patches)
}

pub fn gain_breakdown(led: &Led, pd_location: Vec3, scene: &Scene) -> Result<GainBreakdown, ChannelError> {
    let los = los_gain(led, pd_location, scene)?;
    breakdown(led, pd_location, los, nlos_gain(led, pd_location, scene))
}

fn breakdown(led: &Led, pd: Vec3, los: f64, nlos: f64) -> Result<GainBreakdown, ChannelError> {
    if los <= 0.0 {
        return Err(ChannelError::NoLineOfSight { led: led.position, pd });
    }
    let total = los + nlos;
    Ok(GainBreakdown {
        los,
        nlos,
        total,
        kappa: total / los,
    })
}

/// Received power without noise, watts.
pub fn noiseless_power(led: &Led, pd_location: Vec3, scene: &Scene) -> Result<f64, ChannelError> {
    Ok(led.tx_power * (los_gain(led, pd_location, scene)? + nlos_gain(led, pd_location, scene)))
}

/// One averaged power reading from LED `led_index`: the noiseless power plus a
/// single Gaussian draw with variance `σ_i² / averaging_count`, which has the
/// distribution of the mean of `averaging_count` independent raw readings.
pub fn measure_power<R: Rng + ?Sized>(
    led_index: usize,
    pd_location: Vec3,
    scene: &Scene,
    rng: &mut R,
) -> Result<f64, ChannelError> {
    Channel::new(scene).measure_power(led_index, pd_location, rng)
}

/// Scene geometry hash, LED position bits, PD position bits.
type NlosKey = (u64, [u64; 3], [u64; 3]);

/// Memoized unit-reflectance NLOS gains, shared across scenes that differ only
/// in transmit power, reflectance or noise.
#[derive(Debug, Default)]
pub struct NlosCache {
    map: RwLock<HashMap<NlosKey, f64>>,
}

impl NlosCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything the unit-reflectance NLOS gain depends on.
fn geometry_key(scene: &Scene) -> u64 {
    let mut h = DefaultHasher::new();
    let r = &scene.room;
    let pd = &scene.pd;
    for v in [
        r.width,
        r.depth,
        r.height,
        pd.area,
        pd.fov_half_angle,
        pd.refractive_index,
        pd.optical_filter_gain,
        scene.channel.lambertian_order,
        scene.channel.wall_patch_size,
    ] {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Channel evaluator for one scene with a precomputed wall grid.
#[derive(Debug, Clone)]
pub struct Channel {
    scene: Scene,
    patches: Vec<WallPatch>,
    geometry_key: u64,
    cache: Option<Arc<NlosCache>>,
}

impl Channel {
    pub fn new(scene: &Scene) -> Self {
        Self {
            scene: scene.clone(),
            patches: wall_patches(&scene.room, scene.channel.wall_patch_size),
            geometry_key: geometry_key(scene),
            cache: None,
        }
    }

    pub fn with_cache(scene: &Scene, cache: Arc<NlosCache>) -> Self {
        Self {
            cache: Some(cache),
            ..Self::new(scene)
        }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn patches(&self) -> &[WallPatch] {
        &self.patches
    }

    fn led(&self, index: usize) -> Result<&Led, ChannelError> {
        self.scene.leds.get(index).ok_or(ChannelError::LedIndex {
            index,
            count: self.scene.leds.len(),
        })
    }

    pub fn los_gain(&self, led_index: usize, pd_location: Vec3) -> Result<f64, ChannelError> {
        los_gain(self.led(led_index)?, pd_location, &self.scene)
    }

    pub fn nlos_gain(&self, led_index: usize, pd_location: Vec3) -> Result<f64, ChannelError> {
        let led = self.led(led_index)?;
        let unit = match &self.cache {
            None => nlos_unit_gain(led, pd_location, &self.scene, &self.patches),
            Some(cache) => {
                let key = (
                    self.geometry_key,
                    led.position.to_array().map(f64::to_bits),
                    pd_location.to_array().map(f64::to_bits),
                );
                let hit = cache.map.read().unwrap().get(&key).copied();
                match hit {
                    Some(g) => g,
                    None => {
                        let g = nlos_unit_gain(led, pd_location, &self.scene, &self.patches);
                        cache.map.write().unwrap().insert(key, g);
                        g
                    }
                }
            }
        };
        Ok(self.scene.channel.reflectance * unit)
    }

    pub fn gain_breakdown(&self, led_index: usize, pd_location: Vec3) -> Result<GainBreakdown, ChannelError> {
        let led = self.led(led_index)?;
        let los = los_gain(led, pd_location, &self.scene)?;
        breakdown(led, pd_location, los, self.nlos_gain(led_index, pd_location)?)
    }

    pub fn noiseless_power(&self, led_index: usize, pd_location: Vec3) -> Result<f64, ChannelError> {
        let led = self.led(led_index)?;
        let los = los_gain(led, pd_location, &self.scene)?;
        Ok(led.tx_power * (los + self.nlos_gain(led_index, pd_location)?))
    }

    pub fn measure_power<R: Rng + ?Sized>(
        &self,
        led_index: usize,
        pd_location: Vec3,
        rng: &mut R,
    ) -> Result<f64, ChannelError> {
        let clean = self.noiseless_power(led_index, pd_location)?;
        let noise = &self.scene.noise;
        let z: f64 = rng.sample(StandardNormal);
        let var = noise.variance_per_led[led_index] / f64::from(noise.averaging_count);
        Ok(clean + var.sqrt() * z)
    }

    /// Noiseless power from every LED, in LED order.
    pub fn noiseless_vector(&self, pd_location: Vec3) -> Result<PowerVector, ChannelError> {
        (0..self.scene.leds.len())
            .map(|i| self.noiseless_power(i, pd_location))
            .collect::<Result<Vec<_>, _>>()
            .map(PowerVector::new)
    }

    /// One averaged measurement from every LED, drawn in LED order.
    pub fn measure_vector<R: Rng + ?Sized>(&self, pd_location: Vec3, rng: &mut R) -> Result<PowerVector, ChannelError> {
        (0..self.scene.leds.len())
            .map(|i| self.measure_power(i, pd_location, rng))
            .collect::<Result<Vec<_>, _>>()
            .map(PowerVector::new)
    }
}
