//! Offline phase: fingerprint databases of averaged received-power vectors
//! collected at known PD locations.
//!
//! # File format
//!
//! Plain UTF-8 text, `\n` line endings. The first line is a header, the
//! second names the columns, and every following line is one fingerprint:
//!
//! ```text
//! # vlp-fingerprint-db v1 leds=<N> scene=<16 hex digits>
//! x,y,z,p1,p2,...,pN
//! <x>,<y>,<z>,<P1>,...,<PN>
//! ```
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! identical `f64`, so a save/load cycle is exact.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};
use std::ops::{Deref, DerefMut};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Channel, ChannelError};
use crate::rng::substream;
use crate::scene::{Room, Scene, Vec3};

const HEADER_TAG: &str = "# vlp-fingerprint-db v1";

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("database file is empty")]
    Empty,
    #[error("malformed database header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnMismatch { line: usize, expected: usize, found: usize },
    #[error("database has {found} LEDs but the scene has {expected}")]
    LedCountMismatch { expected: usize, found: usize },
    #[error("database must contain at least one fingerprint")]
    NoEntries,
    #[error("fingerprint {index} has {found} powers, expected {expected}")]
    RaggedEntry {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate fingerprint location {0}")]
    DuplicateLocation(Vec3),
    #[error("location {0} is outside the room")]
    OutsideRoom(Vec3),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Received power from each LED, watts, in LED order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PowerVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for PowerVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for PowerVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub location: Vec3,
    pub powers: PowerVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    entries: Vec<Fingerprint>,
    /// Entry locations, packed for neighbor search.
    locations: Vec<[f64; 3]>,
    led_count: usize,
    scene_hash: String,
}

impl Database {
    pub fn new(entries: Vec<Fingerprint>, scene_hash: impl Into<String>) -> Result<Self, DatabaseError> {
        let first = entries.first().ok_or(DatabaseError::NoEntries)?;
        let led_count = first.powers.len();
        let mut seen = HashSet::with_capacity(entries.len());
        for (index, e) in entries.iter().enumerate() {
            if e.powers.len() != led_count {
                return Err(DatabaseError::RaggedEntry {
                    index,
                    expected: led_count,
                    found: e.powers.len(),
                });
            }
            if !seen.insert(e.location.to_array().map(f64::to_bits)) {
                return Err(DatabaseError::DuplicateLocation(e.location));
            }
        }
        Ok(Self {
            locations: entries.iter().map(|e| e.location.to_array()).collect(),
            entries,
            led_count,
            scene_hash: scene_hash.into(),
        })
    }

    pub fn entries(&self) -> &[Fingerprint] {
        &self.entries
    }

    pub fn locations(&self) -> &[[f64; 3]] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn led_count(&self) -> usize {
        self.led_count
    }

    pub fn scene_hash(&self) -> &str {
        &self.scene_hash
    }

    /// Checks the database is usable with `scene`. An LED-count mismatch is an
    /// error; a different scene hash only means the channel conditions may have
    /// changed since collection, reported as `Ok(false)`.
    pub fn check_scene(&self, scene: &Scene) -> Result<bool, DatabaseError> {
        if self.led_count != scene.led_count() {
            return Err(DatabaseError::LedCountMismatch {
                expected: scene.led_count(),
                found: self.led_count,
            });
        }
        Ok(self.scene_hash == scene.content_hash())
    }
}

/// Cell centers of a uniform `rows × cols` partition of the room footprint at
/// height `pd_plane_z`. Rows run along y, columns along x; points are ordered
/// row-major starting from the (−x, −y) corner.
pub fn grid_locations(room: &Room, pd_plane_z: f64, rows: usize, cols: usize) -> Vec<Vec3> {
    let dx = room.width / cols as f64;
    let dy = room.depth / rows as f64;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = -room.depth / 2.0 + (r as f64 + 0.5) * dy;
        for c in 0..cols {
            let x = -room.width / 2.0 + (c as f64 + 0.5) * dx;
            out.push(Vec3::new(x, y, pd_plane_z));
        }
    }
    out
}

/// Offline phase: measure every LED at every location.
///
/// Location `j` draws its noise from substream `("database", j)` of `seed`,
/// so the result does not depend on the number of worker threads.
pub fn build_database(scene: &Scene, locations: &[Vec3], seed: u64) -> Result<Database, DatabaseError> {
    build_database_with(&Channel::new(scene), locations, seed)
}

pub fn build_database_with(channel: &Channel, locations: &[Vec3], seed: u64) -> Result<Database, DatabaseError> {
    let scene = channel.scene();
    if let Some(p) = locations.iter().find(|p| !scene.room.contains(**p)) {
        return Err(DatabaseError::OutsideRoom(*p));
    }
    let entries = locations
        .par_iter()
        .enumerate()
        .map(|(j, &location)| {
            let mut rng = substream(seed, "database", &[j as u64]);
            measure_fingerprint(channel, location, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Database::new(entries, scene.content_hash())
}

fn measure_fingerprint<R: Rng>(channel: &Channel, location: Vec3, rng: &mut R) -> Result<Fingerprint, DatabaseError> {
    Ok(Fingerprint {
        location,
        powers: channel.measure_vector(location, rng)?,
    })
}

pub fn save_database<W: Write>(db: &Database, mut sink: W) -> io::Result<()> {
    writeln!(sink, "{HEADER_TAG} leds={} scene={}", db.led_count, db.scene_hash)?;
    let mut cols = String::from("x,y,z");
    for i in 1..=db.led_count {
        cols.push_str(&format!(",p{i}"));
    }
    writeln!(sink, "{cols}")?;
    for e in &db.entries {
        let l = e.location;
        write!(sink, "{},{},{}", l.x, l.y, l.z)?;
        for p in e.powers.iter() {
            write!(sink, ",{p}")?;
        }
        writeln!(sink)?;
    }
    sink.flush()
}

fn parse_header(line: &str) -> Result<(usize, String), DatabaseError> {
    let rest = line
        .strip_prefix(HEADER_TAG)
        .ok_or_else(|| DatabaseError::Header(format!("expected `{HEADER_TAG}`")))?;
    let mut leds = None;
    let mut hash = None;
    for token in rest.split_whitespace() {
        match token.split_once('=') {
            Some(("leds", v)) => {
                leds = Some(
                    v.parse::<usize>()
                        .map_err(|e| DatabaseError::Header(format!("leds: {e}")))?,
                )
            }
            Some(("scene", v)) => hash = Some(v.to_string()),
            _ => return Err(DatabaseError::Header(format!("unexpected token `{token}`"))),
        }
    }
    match (leds, hash) {
        (Some(0), _) => Err(DatabaseError::Header("leds must be >= 1".into())),
        (Some(n), Some(h)) => Ok((n, h)),
        _ => Err(DatabaseError::Header("missing `leds=` or `scene=`".into())),
    }
}

pub fn load_database<R: BufRead>(source: R) -> Result<Database, DatabaseError> {
    let mut lines = source.lines().enumerate();
    let header = match lines.next() {
        None => return Err(DatabaseError::Empty),
        Some((_, l)) => l?,
    };
    if header.trim().is_empty() {
        return Err(DatabaseError::Empty);
    }
    let (led_count, scene_hash) = parse_header(header.trim_end())?;
    let expected = 3 + led_count;
    match lines.next() {
        Some((_, l)) => {
            let l = l?;
            let found = l.trim_end().split(',').count();
            if found != expected {
                return Err(DatabaseError::ColumnMismatch {
                    line: 2,
                    expected,
                    found,
                });
            }
        }
        None => return Err(DatabaseError::NoEntries),
    }
    let mut entries = Vec::new();
    for (i, l) in lines {
        let l = l?;
        let line = i + 1;
        let l = l.trim_end();
        if l.is_empty() {
            continue;
        }
        let values = l
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DatabaseError::Parse {
                line,
                message: e.to_string(),
            })?;
        if values.len() != expected {
            return Err(DatabaseError::ColumnMismatch {
                line,
                expected,
                found: values.len(),
            });
        }
        entries.push(Fingerprint {
            location: Vec3::new(values[0], values[1], values[2]),
            powers: PowerVector::new(values[3..].to_vec()),
        });
    }
    Database::new(entries, scene_hash)
}
