//! Environment model: key objects, their anchoring surfaces and the 3 cm
//! cell grid laid over each surface.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::geometry::Orientation;
use crate::geometry::{frame_rotation, Quat, Rect, Vec3};

/// Edge length of one placement cell, in meters.
pub const CELL_SIZE: f64 = 0.03;

/// Axes whose lengths or mutual dot product deviate by more than this are
/// rejected rather than re-orthonormalized.
const REPAIR_TOLERANCE: f64 = 1e-3;
/// Axes closer than this to orthonormal are kept verbatim.
const EXACT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchoringSurface {
    pub id: String,
    pub top_left: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    pub rotation: Quat,
    pub width_m: f64,
    pub height_m: f64,
    pub orientation: Orientation,
    w: usize,
    h: usize,
}

impl AnchoringSurface {
    pub fn new(
        id: impl Into<String>,
        top_left: Vec3,
        right: Vec3,
        up: Vec3,
        width_m: f64,
        height_m: f64,
        orientation: Orientation,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidSurface {
            surface: id.clone(),
            reason,
        };
        if !(top_left.iter().all(|x| x.is_finite()) && width_m.is_finite() && height_m.is_finite()) {
            return Err(invalid("non-finite geometry".into()));
        }
        let (right, up) = orthonormalize(&right, &up).map_err(invalid)?;
        let w = cell_count(width_m);
        let h = cell_count(height_m);
        if w == 0 || h == 0 {
            return Err(invalid(format!(
                "{width_m} m x {height_m} m is smaller than one {CELL_SIZE} m cell"
            )));
        }
        let forward = right.cross(&up);
        let rotation = frame_rotation(&right, &up, &forward);
        Ok(Self {
            id,
            top_left,
            right,
            up,
            forward,
            rotation,
            width_m,
            height_m,
            orientation,
            w,
            h,
        })
    }

    /// Cells along the width (`W`).
    pub fn cols(&self) -> usize {
        self.w
    }

    /// Cells along the height (`H`).
    pub fn rows(&self) -> usize {
        self.h
    }

    pub fn cell_count(&self) -> usize {
        self.w * self.h
    }

    pub fn contains_cell(&self, r: i64, c: i64) -> bool {
        r >= 0 && c >= 0 && (r as usize) < self.w && (c as usize) < self.h
    }

    /// World position of cell `(r, c)`: `top_left + 0.03 r right - 0.03 c up`.
    pub fn cell_center(&self, r: usize, c: usize) -> Result<Vec3> {
        if r >= self.w || c >= self.h {
            return Err(Error::CellOutOfRange {
                surface: self.id.clone(),
                r: r as i64,
                c: c as i64,
                w: self.w,
                h: self.h,
            });
        }
        Ok(self.cell_position(r as i64, c as i64))
    }

    /// The placement formula without bounds checking; used for attempted
    /// moves that leave the grid.
    pub fn cell_position(&self, r: i64, c: i64) -> Vec3 {
        self.top_left + self.right * (CELL_SIZE * r as f64) - self.up * (CELL_SIZE * c as f64)
    }

    pub fn rect(&self) -> Rect {
        Rect {
            top_left: self.top_left,
            right: self.right,
            up: self.up,
            width: self.width_m,
            height: self.height_m,
        }
    }

    /// Cell whose anchor point is nearest to the in-plane coordinates
    /// `(u, v)` (meters from the top-left vertex), clamped to the grid.
    pub fn cell_at(&self, u: f64, v: f64) -> (usize, usize) {
        let idx = |x: f64, n: usize| ((x / CELL_SIZE).round().max(0.0) as usize).min(n - 1);
        (idx(u, self.w), idx(v, self.h))
    }
}

fn cell_count(extent_m: f64) -> usize {
    if extent_m <= 0.0 {
        return 0;
    }
    // The epsilon absorbs representation error such as 0.9 / 0.03 < 30.
    (extent_m / CELL_SIZE + 1e-9).floor() as usize
}

fn orthonormalize(right: &Vec3, up: &Vec3) -> std::result::Result<(Vec3, Vec3), String> {
    let (nr, nu) = (right.norm(), up.norm());
    if (nr - 1.0).abs() > REPAIR_TOLERANCE || (nu - 1.0).abs() > REPAIR_TOLERANCE {
        return Err(format!("axes are not unit length (|right| = {nr}, |up| = {nu})"));
    }
    let dot = right.dot(up);
    if dot.abs() > REPAIR_TOLERANCE {
        return Err(format!("right and up axes are not orthogonal (dot = {dot})"));
    }
    if (nr - 1.0).abs() <= EXACT_TOLERANCE && (nu - 1.0).abs() <= EXACT_TOLERANCE && dot.abs() <= EXACT_TOLERANCE {
        return Ok((*right, *up));
    }
    // Gram-Schmidt, keeping the right axis fixed.
    let r = right / nr;
    let u = up - r * up.dot(&r);
    Ok((r, u.normalize()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyObject {
    pub name: String,
    surfaces: Vec<AnchoringSurface>,
}

impl KeyObject {
    pub fn new(name: impl Into<String>, surfaces: Vec<AnchoringSurface>) -> Result<Self> {
        let name = name.into();
        if surfaces.is_empty() {
            return Err(Error::InvalidProfile(format!("key object `{name}` has no surfaces")));
        }
        let mut seen = HashSet::new();
        for s in &surfaces {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidProfile(format!(
                    "key object `{name}` has duplicate surface id `{}`",
                    s.id
                )));
            }
        }
        Ok(Self { name, surfaces })
    }

    pub fn surfaces(&self) -> &[AnchoringSurface] {
        &self.surfaces
    }

    pub fn surface_index(&self, id: &str) -> Option<usize> {
        self.surfaces.iter().position(|s| s.id == id)
    }

    pub fn total_cells(&self) -> usize {
        self.surfaces.iter().map(AnchoringSurface::cell_count).sum()
    }

    /// Every `(surface index, r, c)` in lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.surfaces
            .iter()
            .enumerate()
            .flat_map(|(s, surf)| (0..surf.cols()).flat_map(move |r| (0..surf.rows()).map(move |c| (s, r, c))))
    }

    /// The `n`-th cell in [`KeyObject::cells`] order.
    pub fn nth_cell(&self, mut n: usize) -> Option<(usize, usize, usize)> {
        for (s, surf) in self.surfaces.iter().enumerate() {
            if n < surf.cell_count() {
                return Some((s, n / surf.rows(), n % surf.rows()));
            }
            n -= surf.cell_count();
        }
        None
    }

    /// Largest distance between any two surface vertices.
    pub fn d_max(&self) -> f64 {
        let corners: Vec<Vec3> = self.surfaces.iter().flat_map(|s| s.rect().corners()).collect();
        let mut best = 0.0f64;
        for (i, a) in corners.iter().enumerate() {
            for b in &corners[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialProfile {
    pub environment: String,
    key_objects: Vec<KeyObject>,
}

impl SpatialProfile {
    pub fn new(environment: impl Into<String>, key_objects: Vec<KeyObject>) -> Result<Self> {
        let mut seen = HashSet::new();
        for k in &key_objects {
            if !seen.insert(k.name.as_str()) {
                return Err(Error::InvalidProfile(format!("duplicate key object `{}`", k.name)));
            }
        }
        Ok(Self {
            environment: environment.into(),
            key_objects,
        })
    }

    pub fn key_objects(&self) -> &[KeyObject] {
        &self.key_objects
    }

    pub fn key_object(&self, name: &str) -> Option<&KeyObject> {
        self.key_objects.iter().find(|k| k.name == name)
    }

    /// Looks a surface up by id across all key objects.
    pub fn surface(&self, id: &str) -> Option<&AnchoringSurface> {
        self.key_objects.iter().flat_map(|k| k.surfaces.iter()).find(|s| s.id == id)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let doc: ProfileDoc = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        let key_objects = doc
            .key_objects
            .into_iter()
            .map(|k| {
                let surfaces = k
                    .surfaces
                    .into_iter()
                    .map(|s| {
                        AnchoringSurface::new(
                            s.id,
                            Vec3::from(s.top_left),
                            Vec3::from(s.right_dir),
                            Vec3::from(s.up_dir),
                            s.width_m,
                            s.height_m,
                            s.orientation,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                KeyObject::new(k.name, surfaces)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.environment, key_objects)
    }

    pub fn to_json(&self) -> String {
        let doc = ProfileDoc {
            environment: self.environment.clone(),
            key_objects: self
                .key_objects
                .iter()
                .map(|k| KeyObjectDoc {
                    name: k.name.clone(),
                    surfaces: k
                        .surfaces
                        .iter()
                        .map(|s| SurfaceDoc {
                            id: s.id.clone(),
                            top_left: s.top_left.into(),
                            right_dir: s.right.into(),
                            up_dir: s.up.into(),
                            width_m: s.width_m,
                            height_m: s.height_m,
                            orientation: s.orientation,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("profile serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileDoc {
    environment: String,
    key_objects: Vec<KeyObjectDoc>,
}

#[derive(Serialize, Deserialize)]
struct KeyObjectDoc {
    name: String,
    surfaces: Vec<SurfaceDoc>,
}

#[derive(Serialize, Deserialize)]
struct SurfaceDoc {
    id: String,
    top_left: [f64; 3],
    right_dir: [f64; 3],
    up_dir: [f64; 3],
    width_m: f64,
    height_m: f64,
    orientation: Orientation,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(id: &str, top_left: Vec3, side: f64) -> AnchoringSurface {
        AnchoringSurface::new(id, top_left, Vec3::x(), Vec3::y(), side, side, Orientation::Vertical).unwrap()
    }

    const ONE_OBJECT: &str = r#"{
        "environment": "office kitchen",
        "key_objects": [{
            "name": "microwave",
            "surfaces": [{
                "id": "door", "top_left": [0.0, 1.2, 0.5],
                "right_dir": [1.0, 0.0, 0.0], "up_dir": [0.0, 1.0, 0.0],
                "width_m": 0.45, "height_m": 0.3, "orientation": "vertical"
            }]
        }]
    }"#;

    #[test]
    fn loads_one_object() {
        let p = SpatialProfile::from_json(ONE_OBJECT.as_bytes()).unwrap();
        assert_eq!(p.key_objects().len(), 1);
        let s = &p.key_objects()[0].surfaces()[0];
        assert_eq!((s.cols(), s.rows()), (15, 10));
        assert_relative_eq!(s.forward, Vec3::z());
    }

    #[test]
    fn rejects_skewed_axes() {
        let bad = ONE_OBJECT.replace("\"up_dir\": [0.0, 1.0, 0.0]", "\"up_dir\": [0.1, 0.99498743710662, 0.0]");
        match SpatialProfile::from_json(bad.as_bytes()) {
            Err(Error::InvalidSurface { surface, .. }) => assert_eq!(surface, "door"),
            other => panic!("expected invalid surface, got {other:?}"),
        }
    }

    #[test]
    fn rejects_sub_cell_surface() {
        let bad = ONE_OBJECT.replace("\"width_m\": 0.45", "\"width_m\": 0.01");
        assert!(matches!(
            SpatialProfile::from_json(bad.as_bytes()),
            Err(Error::InvalidSurface { .. })
        ));
    }

    #[test]
    fn repairs_nearly_orthogonal_axes() {
        let s = AnchoringSurface::new(
            "s",
            Vec3::zeros(),
            Vec3::x(),
            Vec3::new(0.0005, 1.0, 0.0),
            0.3,
            0.3,
            Orientation::Vertical,
        )
        .unwrap();
        assert!(s.right.dot(&s.up).abs() < 1e-12);
        assert!((s.up.norm() - 1.0).abs() < 1e-12);
        assert!((s.forward - s.right.cross(&s.up)).norm() < 1e-12);
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(SpatialProfile::from_json(b"{"), Err(Error::Parse(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let a = KeyObject::new("sink", vec![square("a", Vec3::zeros(), 0.3)]).unwrap();
        assert!(SpatialProfile::new("e", vec![a.clone(), a]).is_err());
        assert!(KeyObject::new("x", vec![square("a", Vec3::zeros(), 0.3), square("a", Vec3::x(), 0.3)]).is_err());
        assert!(KeyObject::new("x", vec![]).is_err());
    }

    #[test]
    fn cell_center_follows_formula() {
        let tl = Vec3::new(0.1, 0.2, 0.3);
        let s = AnchoringSurface::new("s", tl, Vec3::z(), Vec3::x(), 0.3, 0.3, Orientation::Horizontal).unwrap();
        assert_relative_eq!(s.cell_center(0, 0).unwrap(), tl);
        assert_relative_eq!(s.cell_center(1, 0).unwrap(), tl + 0.03 * Vec3::z(), epsilon = 1e-15);
        assert_relative_eq!(s.cell_center(0, 2).unwrap(), tl - 0.06 * Vec3::x(), epsilon = 1e-15);
        assert!(matches!(s.cell_center(10, 0), Err(Error::CellOutOfRange { .. })));
        assert!(s.cell_center(0, 10).is_err());
    }

    #[test]
    fn cells_lie_within_extended_rect() {
        let p = SpatialProfile::from_json(ONE_OBJECT.as_bytes()).unwrap();
        let k = &p.key_objects()[0];
        for (si, r, c) in k.cells() {
            let s = &k.surfaces()[si];
            let rel = s.cell_center(r, c).unwrap() - s.top_left;
            let (u, v) = (rel.dot(&s.right), -rel.dot(&s.up));
            assert!(u >= -1e-12 && u <= s.width_m + CELL_SIZE);
            assert!(v >= -1e-12 && v <= s.height_m + CELL_SIZE);
            assert!(rel.dot(&s.forward).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_handles_representation_error() {
        assert_eq!(cell_count(0.9), 30);
        assert_eq!(cell_count(0.299), 9);
        assert_eq!(cell_count(0.01), 0);
    }

    fn brute_force_diameter(k: &KeyObject) -> f64 {
        let mut pts = Vec::new();
        for s in k.surfaces() {
            for (du, dv) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                pts.push(s.top_left + s.right * s.width_m * du - s.up * s.height_m * dv);
            }
        }
        pts.iter()
            .flat_map(|a| pts.iter().map(move |b| (a - b).norm()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn d_max_examples() {
        let one = KeyObject::new("a", vec![square("s", Vec3::zeros(), 1.0)]).unwrap();
        assert_relative_eq!(one.d_max(), 2f64.sqrt(), epsilon = 1e-15);
        let two = KeyObject::new(
            "b",
            vec![square("s0", Vec3::zeros(), 1.0), square("s1", Vec3::x(), 1.0)],
        )
        .unwrap();
        assert_relative_eq!(brute_force_diameter(&two), 5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(two.d_max(), brute_force_diameter(&two));
        let small = KeyObject::new("c", vec![square("s", Vec3::zeros(), 0.3)]).unwrap();
        assert_relative_eq!(small.d_max(), 0.4243, epsilon = 1e-4);
    }

    #[test]
    fn round_trip_is_identical() {
        let skewed = ONE_OBJECT.replace("\"up_dir\": [0.0, 1.0, 0.0]", "\"up_dir\": [0.0003, 1.0002, 0.0]");
        let p1 = SpatialProfile::from_json(skewed.as_bytes()).unwrap();
        let s1 = p1.to_json();
        let p2 = SpatialProfile::from_json(s1.as_bytes()).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(s1, p2.to_json());
    }

    #[test]
    fn nth_cell_matches_iteration_order() {
        let k = KeyObject::new(
            "k",
            vec![square("a", Vec3::zeros(), 0.09), square("b", Vec3::z(), 0.12)],
        )
        .unwrap();
        let all: Vec<_> = k.cells().collect();
        assert_eq!(all.len(), k.total_cells());
        for (n, cell) in all.iter().enumerate() {
            assert_eq!(k.nth_cell(n), Some(*cell));
        }
        assert_eq!(k.nth_cell(all.len()), None);
    }
}
