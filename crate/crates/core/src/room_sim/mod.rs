//! Parametric shoebox rooms, measurement grids and image-source impulse responses.

mod decay;
mod image_source;

pub use decay::{energy_decay_db, sabine_rt60, schroeder_rt60, DIRECT_SOUND_GUARD};
pub use image_source::{default_max_time, simulate_air, FRACTIONAL_DELAY_TAPS};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::Rng;

/// Speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

const GRID_STEP: f64 = 0.1;
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RoomError {
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("grid margin {margin} m does not fit a {length} x {width} m floor")]
    RoomTooSmall {
        margin: f64,
        length: f64,
        width: f64,
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("energy decay never reaches -25 dB")]
    DecayTooShort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeCategory {
    Corridor,
    Rectangle,
    Square,
}

impl ShapeCategory {
    pub const ALL: [ShapeCategory; 3] = [Self::Corridor, Self::Rectangle, Self::Square];

    /// Allowed width/length ratio band.
    pub fn ratio_band(self) -> (f64, f64) {
        match self {
            Self::Corridor => (0.1, 0.3),
            Self::Rectangle => (0.4, 0.7),
            Self::Square => (0.8, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Corridor => "corridor",
            Self::Rectangle => "rectangle",
            Self::Square => "square",
        }
    }
}

fn on_grid(v: f64) -> bool {
    let steps = v / GRID_STEP;
    (steps - steps.round()).abs() * GRID_STEP <= GRID_TOL
}

/// A shoebox with uniform absorption on all six surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub room_id: String,
    pub shape: ShapeCategory,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub absorption: f64,
}

impl RoomSpec {
    pub fn new(
        room_id: impl Into<String>,
        shape: ShapeCategory,
        length: f64,
        width: f64,
        height: f64,
        absorption: f64,
    ) -> Result<Self, RoomError> {
        let room = Self {
            room_id: room_id.into(),
            shape,
            length,
            width,
            height,
            absorption,
        };
        room.validate()?;
        Ok(room)
    }

    /// Builds a room from its width/length ratio; the width is `ratio * length`.
    pub fn from_ratio(
        room_id: impl Into<String>,
        shape: ShapeCategory,
        length: f64,
        ratio: f64,
        height: f64,
        absorption: f64,
    ) -> Result<Self, RoomError> {
        Self::new(room_id, shape, length, ratio * length, height, absorption)
    }

    pub fn validate(&self) -> Result<(), RoomError> {
        let bad = |m: String| Err(RoomError::InvalidRoom(m));
        if !(1.0 - GRID_TOL..=50.0 + GRID_TOL).contains(&self.length) || !on_grid(self.length) {
            return bad(format!(
                "length {} outside [1, 50] or off the 0.1 m grid",
                self.length
            ));
        }
        if !(2.0 - GRID_TOL..=5.0 + GRID_TOL).contains(&self.height) || !on_grid(self.height) {
            return bad(format!(
                "height {} outside [2, 5] or off the 0.1 m grid",
                self.height
            ));
        }
        let (lo, hi) = self.shape.ratio_band();
        let ratio = self.width / self.length;
        if !(ratio >= lo - GRID_TOL && ratio <= hi + GRID_TOL) {
            return bad(format!(
                "width/length {ratio:.4} outside [{lo}, {hi}] for {}",
                self.shape.name()
            ));
        }
        if !(0.1 - GRID_TOL..=0.8 + GRID_TOL).contains(&self.absorption) {
            return bad(format!("absorption {} outside [0.1, 0.8]", self.absorption));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    pub fn surface_area(&self) -> f64 {
        2.0 * (self.length * self.width + self.length * self.height + self.width * self.height)
    }

    /// Per-bounce pressure reflection coefficient, `sqrt(1 - absorption)`.
    pub fn reflection(&self) -> f64 {
        (1.0 - self.absorption).sqrt()
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.length, self.width, self.height]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter().zip(self.dims()).all(|(&v, d)| v > 0.0 && v < d)
    }
}

/// Ranges a room is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSampler {
    pub length: (f64, f64),
    pub height: (f64, f64),
    pub absorption: (f64, f64),
    /// Fixed absorption overriding the range.
    pub fixed_absorption: Option<f64>,
}

impl Default for RoomSampler {
    fn default() -> Self {
        Self {
            length: (1.0, 50.0),
            height: (2.0, 5.0),
            absorption: (0.1, 0.8),
            fixed_absorption: None,
        }
    }
}

fn grid_values(lo: f64, hi: f64) -> Vec<f64> {
    let first = (lo / GRID_STEP - GRID_TOL).ceil() as i64;
    let last = (hi / GRID_STEP + GRID_TOL).floor() as i64;
    (first..=last)
        .map(|k| (k as f64 * GRID_STEP * 10.0).round() / 10.0)
        .collect()
}

impl RoomSampler {
    /// Largest volume any room drawn by this sampler can have.
    pub fn max_volume(&self) -> f64 {
        self.length.1 * self.length.1 * self.height.1
    }

    /// Smallest volume any room drawn by this sampler can have.
    pub fn min_volume(&self) -> f64 {
        self.length.0 * (0.1 * self.length.0) * self.height.0
    }
}

/// Draws a room of the given category. Length, width and height are uniform
/// over the 0.1 m grid; the width is uniform over the grid values whose ratio
/// to the length falls in the category band.
pub fn sample_room(
    room_id: impl Into<String>,
    shape: ShapeCategory,
    sampler: &RoomSampler,
    rng: &mut Rng,
) -> Result<RoomSpec, RoomError> {
    let lengths = grid_values(sampler.length.0.max(1.0), sampler.length.1.min(50.0));
    let heights = grid_values(sampler.height.0.max(2.0), sampler.height.1.min(5.0));
    if lengths.is_empty() || heights.is_empty() {
        return Err(RoomError::InvalidRoom(
            "empty length or height range".into(),
        ));
    }
    let length = lengths[rng.gen_range(0..lengths.len())];
    let (lo, hi) = shape.ratio_band();
    let widths = grid_values(lo * length, hi * length);
    if widths.is_empty() {
        return Err(RoomError::InvalidRoom(format!(
            "no 0.1 m width fits a {length} m {}",
            shape.name()
        )));
    }
    let width = widths[rng.gen_range(0..widths.len())];
    let height = heights[rng.gen_range(0..heights.len())];
    let absorption = match sampler.fixed_absorption {
        Some(a) => a,
        None => rng.gen_range(sampler.absorption.0..=sampler.absorption.1),
    };
    RoomSpec::new(room_id, shape, length, width, height, absorption)
}

/// Equidistant microphone grid at a fixed height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub edge_margin: f64,
    pub mic_height: f64,
    pub source_mic_distance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 5,
            cols: 5,
            edge_margin: 0.3,
            mic_height: 1.7,
            source_mic_distance: 0.1,
        }
    }
}

impl GridSpec {
    pub fn fits(&self, room: &RoomSpec) -> bool {
        self.edge_margin < room.length.min(room.width) / 2.0
            && self.mic_height + self.source_mic_distance < room.height
    }
}

/// (row, col) position on the measurement grid.
pub type GridIndex = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub mic: [f64; 3],
    pub source: [f64; 3],
    pub grid_index: GridIndex,
}

impl Placement {
    pub fn distance(&self) -> f64 {
        dist(self.mic, self.source)
    }
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn axis_positions(n: usize, extent: f64, margin: f64) -> Vec<f64> {
    if n == 1 {
        return vec![extent / 2.0];
    }
    let step = (extent - 2.0 * margin) / (n - 1) as f64;
    (0..n).map(|i| margin + step * i as f64).collect()
}

/// Places one mic per grid cell, columns along the room length and rows
/// along its width. The source sits `source_mic_distance` from the mic on the
/// horizontal ray towards the room centre; the mic exactly at the centre
/// faces +x.
pub fn grid_placements(room: &RoomSpec, grid: &GridSpec) -> Result<Vec<Placement>, RoomError> {
    if grid.rows == 0 || grid.cols == 0 || !grid.fits(room) {
        return Err(RoomError::RoomTooSmall {
            margin: grid.edge_margin,
            length: room.length,
            width: room.width,
        });
    }
    let xs = axis_positions(grid.cols, room.length, grid.edge_margin);
    let ys = axis_positions(grid.rows, room.width, grid.edge_margin);
    let (cx, cy) = (room.length / 2.0, room.width / 2.0);
    let mut out = Vec::with_capacity(grid.rows * grid.cols);
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            let (dx, dy) = (cx - x, cy - y);
            let norm = (dx * dx + dy * dy).sqrt();
            let (ux, uy) = if norm < 1e-12 {
                (1.0, 0.0)
            } else {
                (dx / norm, dy / norm)
            };
            let d = grid.source_mic_distance;
            out.push(Placement {
                mic: [x, y, grid.mic_height],
                source: [x + d * ux, y + d * uy, grid.mic_height],
                grid_index: (r, c),
            });
        }
    }
    Ok(out)
}

/// Ground-truth labels attached to every impulse response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirLabels {
    pub volume: f64,
    pub rt60_sabine: f64,
    pub rt60_schroeder: f64,
}

/// A rendered impulse response with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Air {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
    pub room_id: String,
    pub grid_index: GridIndex,
    pub labels: AirLabels,
}
