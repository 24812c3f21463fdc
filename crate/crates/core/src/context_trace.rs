//! Gaze and hand context: frames, frame windows, per-frame weights and a
//! scripted synthetic trace generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, unit, Ray, Vec3};
use crate::spatial_profile::{SpatialProfile, CELL_SIZE};

/// Tracked joints per hand.
pub const HAND_JOINTS: usize = 15;

/// Default window length, roughly one second at 90 Hz.
pub const DEFAULT_WINDOW: usize = 90;

#[derive(Debug, Clone, PartialEq)]
pub struct HandSample {
    pub joints: [Vec3; HAND_JOINTS],
    /// Palm position.
    pub position: Vec3,
    /// Unit forward direction of the hand.
    pub forward: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub gaze_left: Ray,
    pub gaze_right: Ray,
    pub left: Option<HandSample>,
    pub right: Option<HandSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hand {
    Left,
    Right,
}

impl Frame {
    /// Midpoint of the two gaze origins.
    pub fn eye_midpoint(&self) -> Vec3 {
        (self.gaze_left.origin + self.gaze_right.origin) / 2.0
    }

    /// Normalized mean of the two gaze directions.
    pub fn gaze_forward(&self) -> Result<Vec3> {
        unit(self.gaze_left.direction() + self.gaze_right.direction()).ok_or(Error::DegenerateGaze)
    }

    pub fn hand(&self, hand: Hand) -> Option<&HandSample> {
        match hand {
            Hand::Left => self.left.as_ref(),
            Hand::Right => self.right.as_ref(),
        }
    }
}

/// A snapshot of consecutive frames with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameWindow {
    frames: Vec<Frame>,
}

impl FrameWindow {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a frame window needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        for (i, f) in frames.iter().enumerate() {
            if !f.t.is_finite() {
                return Err(Error::InvalidArgument(format!("frame {i} has a non-finite timestamp")));
            }
            if i > 0 && f.t <= frames[i - 1].t {
                return Err(Error::NonIncreasingTimestamps { index: i });
            }
        }
        Ok(Self { frames })
    }

    /// The last `n` frames of `trace` ending at index `cursor` (inclusive).
    pub fn ending_at(trace: &[Frame], cursor: usize, n: usize) -> Result<Self> {
        if cursor >= trace.len() {
            return Err(Error::InvalidArgument(format!(
                "cursor {cursor} is past the end of a {}-frame trace",
                trace.len()
            )));
        }
        let start = (cursor + 1).saturating_sub(n);
        Self::new(trace[start..=cursor].to_vec())
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn latest(&self) -> &Frame {
        self.frames.last().expect("window is non-empty")
    }

    /// Angular speed of the left and right gaze in degrees per second. The
    /// first frame has no predecessor and copies the second frame's speed.
    pub fn gaze_angular_speeds(&self) -> Vec<(f64, f64)> {
        let mut v = Vec::with_capacity(self.frames.len());
        for pair in self.frames.windows(2) {
            let dt = pair[1].t - pair[0].t;
            let speed = |a: &Ray, b: &Ray| {
                angle_between(&a.direction(), &b.direction()).expect("ray directions are unit") / dt
            };
            v.push((
                speed(&pair[0].gaze_left, &pair[1].gaze_left),
                speed(&pair[0].gaze_right, &pair[1].gaze_right),
            ));
        }
        v.insert(0, v[0]);
        v
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// Per-frame weights favouring slow gaze and recent frames; sums to 1.
    pub fn frame_weights(&self) -> Vec<f64> {
        let (left, right): (Vec<f64>, Vec<f64>) = self.gaze_angular_speeds().into_iter().unzip();
        frame_weights(&left, &right, &self.timestamps())
    }
}

/// Rescales to `[0, 1]`; a constant input maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Scales to sum 1; an all-zero input becomes uniform.
pub fn normalize_sum(values: &[f64]) -> Vec<f64> {
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0) {
        return vec![1.0 / values.len() as f64; values.len()];
    }
    values.iter().map(|v| v / sum).collect()
}

/// Frame weights from per-frame gaze speeds and timestamps.
///
/// `w_speed` is the mean absolute speed of both eyes and `w_time` the
/// elapsed fraction of the window; both are min-max normalized and the
/// weight is `normalize((1 - w_speed) * w_time)`.
pub fn frame_weights(v_left: &[f64], v_right: &[f64], t: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert!(n > 0 && v_left.len() == n && v_right.len() == n, "mismatched frame arrays");
    let speed: Vec<f64> = v_left.iter().zip(v_right).map(|(l, r)| (l.abs() + r.abs()) / 2.0).collect();
    let span = t[n - 1] - t[0];
    let time: Vec<f64> = t
        .iter()
        .map(|ti| if span > 0.0 { (ti - t[0]) / span } else { 0.0 })
        .collect();
    let speed = min_max_normalize(&speed);
    let time = min_max_normalize(&time);
    let raw: Vec<f64> = speed.iter().zip(&time).map(|(s, t)| (1.0 - s) * t).collect();
    normalize_sum(&raw)
}

// ---------------------------------------------------------------------------
// JSON Lines trace format

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    t: f64,
    gaze: GazeDoc,
    hands: HandsDoc,
}

#[derive(Serialize, Deserialize)]
struct GazeDoc {
    left: RayDoc,
    right: RayDoc,
}

#[derive(Serialize, Deserialize)]
struct RayDoc {
    origin: [f64; 3],
    dir: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct HandsDoc {
    left: Option<HandDoc>,
    right: Option<HandDoc>,
}

#[derive(Serialize, Deserialize)]
struct HandDoc {
    joints: Vec<[f64; 3]>,
    pos: [f64; 3],
    forward: [f64; 3],
}

impl RayDoc {
    fn from_ray(r: &Ray) -> Self {
        Self {
            origin: r.origin.into(),
            dir: r.direction().into(),
        }
    }

    fn to_ray(&self) -> Result<Ray> {
        Ray::new(Vec3::from(self.origin), Vec3::from(self.dir))
    }
}

impl HandDoc {
    fn from_hand(h: &HandSample) -> Self {
        Self {
            joints: h.joints.iter().map(|j| (*j).into()).collect(),
            pos: h.position.into(),
            forward: h.forward.into(),
        }
    }

    fn to_hand(&self) -> Result<HandSample> {
        let joints: Vec<Vec3> = self.joints.iter().map(|j| Vec3::from(*j)).collect();
        let joints: [Vec3; HAND_JOINTS] = joints.try_into().map_err(|j: Vec<Vec3>| {
            Error::Parse(format!("expected {HAND_JOINTS} hand joints, got {}", j.len()))
        })?;
        let forward = unit(Vec3::from(self.forward))
            .ok_or_else(|| Error::Parse("hand forward direction has zero length".into()))?;
        Ok(HandSample {
            joints,
            position: Vec3::from(self.pos),
            forward,
        })
    }
}

impl Frame {
    pub fn to_json_line(&self) -> String {
        let doc = FrameDoc {
            t: self.t,
            gaze: GazeDoc {
                left: RayDoc::from_ray(&self.gaze_left),
                right: RayDoc::from_ray(&self.gaze_right),
            },
            hands: HandsDoc {
                left: self.left.as_ref().map(HandDoc::from_hand),
                right: self.right.as_ref().map(HandDoc::from_hand),
            },
        };
        serde_json::to_string(&doc).expect("frame serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let doc: FrameDoc = serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Frame {
            t: doc.t,
            gaze_left: doc.gaze.left.to_ray()?,
            gaze_right: doc.gaze.right.to_ray()?,
            left: doc.hands.left.as_ref().map(HandDoc::to_hand).transpose()?,
            right: doc.hands.right.as_ref().map(HandDoc::to_hand).transpose()?,
        })
    }
}

pub fn read_trace(text: &str) -> Result<Vec<Frame>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Frame::from_json_line(l).map_err(|e| Error::Parse(format!("trace line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_trace(frames: &[Frame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&f.to_json_line());
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Synthetic traces

/// A point of regard: a cell on a named surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTarget {
    pub surface: String,
    pub r: usize,
    pub c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhichHands {
    #[default]
    Both,
    Left,
    Right,
}

/// Both hands hover over a rectangular block of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandDwell {
    pub surface: String,
    pub r: usize,
    pub c: usize,
    #[serde(default = "one")]
    pub cols: usize,
    #[serde(default = "one")]
    pub rows: usize,
    /// Fraction of the way from the eye to the surface at which the joints sit.
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default)]
    pub which: WhichHands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_s: f64,
    /// Where the gaze rests at the end of the segment.
    pub gaze: CellTarget,
    /// When set, the gaze sweeps from this target to `gaze` over the segment.
    #[serde(default)]
    pub saccade_from: Option<CellTarget>,
    #[serde(default = "default_noise")]
    pub gaze_noise_deg: f64,
    #[serde(default)]
    pub hands: Option<HandDwell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceScript {
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    pub eye: [f64; 3],
    #[serde(default = "default_ipd")]
    pub ipd_m: f64,
    pub segments: Vec<Segment>,
}

fn one() -> usize {
    1
}
fn default_depth() -> f64 {
    0.6
}
fn default_noise() -> f64 {
    0.2
}
fn default_rate() -> f64 {
    90.0
}
fn default_ipd() -> f64 {
    0.064
}

/// Renders a trace script into frames. The output depends only on the
/// script, the profile and `seed`.
pub fn generate_synthetic_trace(script: &TraceScript, profile: &SpatialProfile, seed: u64) -> Result<Vec<Frame>> {
    if !(script.rate_hz > 0.0) {
        return Err(Error::InvalidArgument("rate_hz must be positive".into()));
    }
    let resolve = |t: &CellTarget, fu: f64, fv: f64| -> Result<Vec3> {
        let s = profile.surface(&t.surface).ok_or_else(|| Error::UnknownSurface(t.surface.clone()))?;
        if !s.contains_cell(t.r as i64, t.c as i64) {
            return Err(Error::CellOutOfRange {
                surface: s.id.clone(),
                r: t.r as i64,
                c: t.c as i64,
                w: s.cols(),
                h: s.rows(),
            });
        }
        Ok(s.top_left + s.right * (CELL_SIZE * (t.r as f64 + fu)) - s.up * (CELL_SIZE * (t.c as f64 + fv)))
    };
    // Validate every reference before generating anything.
    for seg in &script.segments {
        resolve(&seg.gaze, 0.0, 0.0)?;
        if let Some(from) = &seg.saccade_from {
            resolve(from, 0.0, 0.0)?;
        }
        if let Some(h) = &seg.hands {
            for dr in 0..h.cols.max(1) {
                for dc in 0..h.rows.max(1) {
                    resolve(&CellTarget { surface: h.surface.clone(), r: h.r + dr, c: h.c + dc }, 0.0, 0.0)?;
                }
            }
        }
    }

    let eye = Vec3::from(script.eye);
    let half_ipd = Vec3::x() * (script.ipd_m / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::new();
    let mut k = 0usize;
    for seg in &script.segments {
        let count = (seg.duration_s * script.rate_hz).round().max(0.0) as usize;
        let to = resolve(&seg.gaze, 0.0, 0.0)?;
        let from = match &seg.saccade_from {
            Some(f) => resolve(f, 0.0, 0.0)?,
            None => to,
        };
        for i in 0..count {
            let s = if count > 1 { i as f64 / (count - 1) as f64 } else { 1.0 };
            let target = from + (to - from) * s;
            let noise = seg.gaze_noise_deg.to_radians();
            let mut jitter = || Vec3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)) * noise;
            let left_origin = eye - half_ipd;
            let right_origin = eye + half_ipd;
            let gaze_left = Ray::new(left_origin, (target - left_origin).normalize() + jitter())?;
            let gaze_right = Ray::new(right_origin, (target - right_origin).normalize() + jitter())?;

            let (mut left, mut right) = (None, None);
            if let Some(h) = &seg.hands {
                if matches!(h.which, WhichHands::Both | WhichHands::Left) {
                    left = Some(dwell_hand(h, eye, &resolve, &mut rng, 0)?);
                }
                if matches!(h.which, WhichHands::Both | WhichHands::Right) {
                    right = Some(dwell_hand(h, eye, &resolve, &mut rng, 7)?);
                }
            }
            frames.push(Frame {
                t: k as f64 / script.rate_hz,
                gaze_left,
                gaze_right,
                left,
                right,
            });
            k += 1;
        }
    }
    if frames.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(frames)
}

/// Joints spread over the dwell block, each on the segment from the eye to
/// a point within 0.35 cell of one of the block's cell anchors.
fn dwell_hand(
    h: &HandDwell,
    eye: Vec3,
    resolve: &impl Fn(&CellTarget, f64, f64) -> Result<Vec3>,
    rng: &mut ChaCha8Rng,
    phase: usize,
) -> Result<HandSample> {
    let cols = h.cols.max(1);
    let rows = h.rows.max(1);
    let cells = cols * rows;
    let mut joints = [Vec3::zeros(); HAND_JOINTS];
    for (j, joint) in joints.iter_mut().enumerate() {
        let idx = (j + phase) % cells;
        let cell = CellTarget {
            surface: h.surface.clone(),
            r: h.r + idx % cols,
            c: h.c + idx / cols,
        };
        let p = resolve(&cell, rng.gen_range(0.0..0.35), rng.gen_range(0.0..0.35))?;
        *joint = eye + (p - eye) * h.depth;
    }
    let position = joints.iter().sum::<Vec3>() / HAND_JOINTS as f64;
    let center = resolve(
        &CellTarget { surface: h.surface.clone(), r: h.r, c: h.c },
        (cols - 1) as f64 / 2.0,
        (rows - 1) as f64 / 2.0,
    )?;
    let forward = unit(center - position).unwrap_or_else(Vec3::z);
    Ok(HandSample { joints, position, forward })
}
