//! Occlusion maps and the placement cost model.

use serde::{Deserialize, Serialize};

use crate::context_trace::{FrameWindow, Hand};
use crate::error::{Error, Result};
use crate::geometry::{angle_between, get_rotation, ray_rect_intersect, Quat, Ray, Rect, Vec3};
use crate::importance::{window_importance, CellMask, ImportanceMap};
use crate::maps::Grid;
use crate::spatial_profile::KeyObject;

/// A label cell leaves the view unobstructed only if it lies at least this
/// far (meters) behind the label along the viewing ray. Makes a label lying
/// flat on a surface cover the cells beneath it.
pub const OCCLUSION_TOLERANCE: f64 = 1e-6;

/// Readability penalty switches from 1 to the angle itself beyond this
/// angle (degrees) from the gaze direction.
pub const BINOCULAR_HALF_ANGLE: f64 = 60.0;

/// A candidate label pose: cell `(r, c)` on surface index `surface`.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub surface: usize,
    pub r: usize,
    pub c: usize,
    pub position: Vec3,
    pub rotation: Quat,
}

impl Placement {
    /// Resolves the cell's world position and the rotation facing `eye`.
    pub fn new(k: &KeyObject, surface: usize, r: usize, c: usize, eye: &Vec3) -> Result<Self> {
        let s = k
            .surfaces()
            .get(surface)
            .ok_or_else(|| Error::UnknownSurface(format!("#{surface} of `{}`", k.name)))?;
        let position = s.cell_center(r, c)?;
        let rotation = get_rotation(&s.rotation, &position, eye, s.orientation)?;
        Ok(Self {
            surface,
            r,
            c,
            position,
            rotation,
        })
    }

    pub fn cell(&self) -> (usize, usize, usize) {
        (self.surface, self.r, self.c)
    }
}

/// Physical extent of an instruction label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelGeometry {
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for LabelGeometry {
    fn default() -> Self {
        Self {
            width_m: 0.30,
            height_m: 0.12,
        }
    }
}

impl LabelGeometry {
    pub fn new(width_m: f64, height_m: f64) -> Result<Self> {
        if !(width_m > 0.0 && height_m > 0.0) || !width_m.is_finite() || !height_m.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "label extent must be positive, got {width_m} x {height_m}"
            )));
        }
        Ok(Self { width_m, height_m })
    }
}

/// Weights of the four cost terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub visibility: f64,
    pub readability: f64,
    pub hand_angle: f64,
    pub preference: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            visibility: 0.24,
            readability: 0.24,
            hand_angle: 0.24,
            preference: 0.28,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.visibility, self.readability, self.hand_angle, self.preference];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("cost weights must be non-negative, got {all:?}")))
        }
    }
}

/// The four cost terms of one placement and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub visibility: f64,
    pub readability: f64,
    pub hand_angle: f64,
    pub preference: f64,
    pub total: f64,
}

/// Cells of `k` hidden from `eye` behind the label placed at `a`.
pub fn occlusion_map(a: &Placement, label: &LabelGeometry, eye: &Vec3, k: &KeyObject) -> CellMask {
    let rect = Rect::centered(a.position, &a.rotation, label.width_m, label.height_m);
    let surfaces = k
        .surfaces()
        .iter()
        .map(|s| {
            Grid::from_fn(s.cols(), s.rows(), |r, c| {
                let p = s.cell_position(r as i64, c as i64);
                let Ok(ray) = Ray::through(*eye, p) else { return false };
                let t_cell = (p - eye).norm();
                ray_rect_intersect(&ray, &rect).is_some_and(|hit| hit.t < t_cell + OCCLUSION_TOLERANCE)
            })
        })
        .collect();
    CellMask { surfaces }
}

fn check_shapes(mask: &CellMask, imap: &ImportanceMap) -> Result<()> {
    let a: Vec<_> = mask.surfaces.iter().map(Grid::shape).collect();
    let b: Vec<_> = imap.surfaces.iter().map(Grid::shape).collect();
    if a == b {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("occlusion {a:?} vs importance {b:?}")))
    }
}

/// `(sum I * imap)^2 / (|imap| * sum I)`, zero when nothing is occluded or
/// nothing is important.
pub fn visibility_cost(occlusion: &CellMask, imap: &ImportanceMap) -> Result<f64> {
    check_shapes(occlusion, imap)?;
    let mut overlap = 0.0;
    let mut occluded = 0usize;
    for (m, g) in occlusion.surfaces.iter().zip(&imap.surfaces) {
        for (&hidden, &v) in m.values().iter().zip(g.values()) {
            if hidden {
                occluded += 1;
                overlap += v;
            }
        }
    }
    let norm = imap.norm();
    if occluded == 0 || norm == 0.0 {
        return Ok(0.0);
    }
    Ok(overlap * overlap / (norm * occluded as f64))
}

/// Distance from `p_a` to the gaze ray over `d_max`, scaled by the angle in
/// degrees once `p_a` leaves the binocular cone.
pub fn readability_cost(p_a: &Vec3, eye: &Vec3, gaze_forward: &Vec3, d_max: f64) -> Result<f64> {
    if !(d_max > 0.0) {
        return Err(Error::InvalidArgument(format!("d_max must be positive, got {d_max}")));
    }
    let v = p_a - eye;
    if v.norm() == 0.0 {
        return Err(Error::InvalidArgument("label position coincides with the eye".into()));
    }
    let along = v.dot(gaze_forward).max(0.0);
    let distance = (v - gaze_forward * along).norm();
    let theta = angle_between(&v, gaze_forward)?;
    let k = if theta < BINOCULAR_HALF_ANGLE { 1.0 } else { theta };
    Ok(k * distance / d_max)
}

/// Weighted mean over frames of the angles between each hand's forward
/// direction and the direction to `p_a`, over 360 degrees. Absent hands
/// contribute zero.
pub fn hand_angle_cost(p_a: &Vec3, window: &FrameWindow, weights: &[f64]) -> f64 {
    window
        .frames()
        .iter()
        .zip(weights)
        .map(|(f, w)| {
            let theta = |hand| {
                f.hand(hand)
                    .and_then(|h| angle_between(&h.forward, &(p_a - h.position)).ok())
                    .unwrap_or(0.0)
            };
            w * (theta(Hand::Left) + theta(Hand::Right)) / 360.0
        })
        .sum()
}

pub fn preference_cost(p_a: &Vec3, p_pref: Option<&Vec3>, d_max: f64) -> f64 {
    p_pref.map_or(0.0, |p| (p_a - p).norm() / d_max)
}

/// Everything needed to score placements of one step on one key object.
#[derive(Debug, Clone)]
pub struct CostContext<'a> {
    pub key_object: &'a KeyObject,
    pub window: &'a FrameWindow,
    pub frame_weights: Vec<f64>,
    pub importance: ImportanceMap,
    pub eye: Vec3,
    pub gaze_forward: Vec3,
    pub d_max: f64,
    pub label: LabelGeometry,
    pub weights: CostWeights,
    pub preferred: Option<Vec3>,
}

impl<'a> CostContext<'a> {
    /// Derives frame weights and the importance map from `window`; eye and
    /// gaze come from its latest frame.
    pub fn new(
        key_object: &'a KeyObject,
        window: &'a FrameWindow,
        label: LabelGeometry,
        weights: CostWeights,
        preferred: Option<Vec3>,
    ) -> Result<Self> {
        weights.validate()?;
        let latest = window.latest();
        Ok(Self {
            key_object,
            window,
            frame_weights: window.frame_weights(),
            importance: window_importance(window, key_object),
            eye: latest.eye_midpoint(),
            gaze_forward: latest.gaze_forward()?,
            d_max: key_object.d_max(),
            label,
            weights,
            preferred,
        })
    }

    pub fn placement(&self, surface: usize, r: usize, c: usize) -> Result<Placement> {
        Placement::new(self.key_object, surface, r, c, &self.eye)
    }

    pub fn occlusion(&self, a: &Placement) -> CellMask {
        occlusion_map(a, &self.label, &self.eye, self.key_object)
    }

    pub fn breakdown(&self, a: &Placement) -> Result<CostBreakdown> {
        let visibility = visibility_cost(&self.occlusion(a), &self.importance)?;
        let readability = readability_cost(&a.position, &self.eye, &self.gaze_forward, self.d_max)?;
        let hand_angle = hand_angle_cost(&a.position, self.window, &self.frame_weights);
        let preference = preference_cost(&a.position, self.preferred.as_ref(), self.d_max);
        Ok(CostBreakdown {
            visibility,
            readability,
            hand_angle,
            preference,
            total: total_cost(visibility, readability, hand_angle, preference, &self.weights),
        })
    }

    /// Total cost of cell `(surface, r, c)`. Cells whose cost is undefined
    /// (the eye sits on the cell) score infinity.
    pub fn cost(&self, surface: usize, r: usize, c: usize) -> f64 {
        self.placement(surface, r, c)
            .and_then(|a| self.breakdown(&a))
            .map_or(f64::INFINITY, |b| b.total)
    }
}

pub fn total_cost(visibility: f64, readability: f64, hand_angle: f64, preference: f64, w: &CostWeights) -> f64 {
    w.visibility * visibility + w.readability * readability + w.hand_angle * hand_angle + w.preference * preference
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context_trace::{Frame, HandSample, HAND_JOINTS};
    use crate::spatial_profile::{AnchoringSurface, Orientation};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn wall(width: f64, height: f64) -> KeyObject {
        // Facing -z at z = 1, centred on the z axis.
        let s = AnchoringSurface::new(
            "wall",
            Vec3::new(-width / 2.0, height / 2.0, 1.0),
            Vec3::x(),
            Vec3::y(),
            width,
            height,
            Orientation::Vertical,
        )
        .unwrap();
        KeyObject::new("oven", vec![s]).unwrap()
    }

    fn frame(t: f64, eye: Vec3, dir: Vec3, hands: Option<(Vec3, Vec3)>) -> Frame {
        let hand = hands.map(|(position, forward)| HandSample {
            joints: [position; HAND_JOINTS],
            position,
            forward,
        });
        Frame {
            t,
            gaze_left: Ray::new(eye, dir).unwrap(),
            gaze_right: Ray::new(eye, dir).unwrap(),
            left: hand.clone(),
            right: hand,
        }
    }

    /// A placement with an explicit rotation, bypassing the facing rule.
    fn posed(position: Vec3, rotation: Quat) -> Placement {
        Placement {
            surface: 0,
            r: 0,
            c: 0,
            position,
            rotation,
        }
    }

    #[test]
    fn occlusion_label_midway_matches_per_cell_oracle() {
        let k = wall(0.6, 0.6);
        let eye = Vec3::zeros();
        // Label facing the eye at z = 0.5 covers a 0.56 x 0.20 footprint on the wall.
        let a = posed(Vec3::new(0.0, 0.0, 0.5), Quat::identity());
        let mask = occlusion_map(&a, &LabelGeometry::new(0.28, 0.10).unwrap(), &eye, &k);
        let s = &k.surfaces()[0];
        let mut count = 0;
        for (r, c, &hidden) in mask.surfaces[0].iter() {
            let p = s.cell_position(r as i64, c as i64);
            // Similar triangles: the wall point projects to half its
            // coordinates on the label plane.
            let inside = (p.x / 2.0).abs() <= 0.14 && (p.y / 2.0).abs() <= 0.05;
            assert_eq!(hidden, inside, "cell ({r}, {c}) at {p:?}");
            count += inside as usize;
        }
        assert!(count > 0);
    }

    #[test]
    fn occlusion_behind_eye_is_empty() {
        let k = wall(0.6, 0.6);
        let a = posed(Vec3::new(0.0, 0.0, -0.5), Quat::identity());
        let mask = occlusion_map(&a, &LabelGeometry::default(), &Vec3::zeros(), &k);
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn tiny_off_axis_label_hides_at_most_one_cell() {
        let k = wall(0.6, 0.6);
        let a = posed(Vec3::new(0.2, 0.2, 0.9), Quat::identity());
        let mask = occlusion_map(&a, &LabelGeometry::new(0.01, 0.01).unwrap(), &Vec3::zeros(), &k);
        assert!(mask.count() <= 1);
    }

    #[test]
    fn flat_label_covers_cells_beneath_it() {
        let k = wall(0.6, 0.6);
        let eye = Vec3::zeros();
        let a = Placement::new(&k, 0, 10, 10, &eye).unwrap();
        let mask = occlusion_map(&a, &LabelGeometry::new(0.29, 0.11).unwrap(), &eye, &k);
        // 0.29 x 0.11 centred on a cell anchor spans 9 x 3 anchors.
        assert_eq!(mask.count(), 9 * 3);
        assert!(mask.get(0, 10, 10));
    }

    fn four_cell_case() -> (CellMask, ImportanceMap) {
        let mut mask = Grid::filled(5, 5, false);
        let mut imap = Grid::filled(5, 5, 0.0);
        for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            mask.set(r, c, true);
            imap.set(r, c, 1.0);
        }
        (CellMask { surfaces: vec![mask] }, ImportanceMap { surfaces: vec![imap] })
    }

    #[test]
    fn visibility_examples() {
        let (mask, imap) = four_cell_case();
        assert!((visibility_cost(&mask, &imap).unwrap() - 2.0).abs() <= TOL);

        let none = CellMask { surfaces: vec![Grid::filled(5, 5, false)] };
        assert_eq!(visibility_cost(&none, &imap).unwrap(), 0.0);

        let flat = ImportanceMap { surfaces: vec![Grid::filled(5, 5, 0.0)] };
        assert_eq!(visibility_cost(&mask, &flat).unwrap(), 0.0);

        let wrong = ImportanceMap { surfaces: vec![Grid::filled(4, 5, 0.0)] };
        assert!(matches!(visibility_cost(&mask, &wrong), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn readability_examples() {
        let eye = Vec3::zeros();
        let f = Vec3::z();
        assert_eq!(readability_cost(&Vec3::new(0.0, 0.0, 1.3), &eye, &f, 2.0).unwrap(), 0.0);

        let along = 0.5 / 30f64.to_radians().tan();
        let at30 = Vec3::new(0.5, 0.0, along);
        assert!((readability_cost(&at30, &eye, &f, 2.0).unwrap() - 0.25).abs() <= TOL);

        let at90 = Vec3::new(0.5, 0.0, 0.0);
        assert!((readability_cost(&at90, &eye, &f, 2.0).unwrap() - 22.5).abs() <= TOL);

        assert!(readability_cost(&eye, &eye, &f, 2.0).is_err());
    }

    #[test]
    fn hand_angle_examples() {
        let p_a = Vec3::new(0.0, 0.0, 1.0);
        let hand_at = Vec3::new(0.0, 0.0, 0.5);
        let cost = |forward: Vec3| {
            let f = frame(0.0, Vec3::zeros(), Vec3::z(), Some((hand_at, forward)));
            let mut g = f.clone();
            g.t = 1.0;
            let w = FrameWindow::new(vec![f, g]).unwrap();
            hand_angle_cost(&p_a, &w, &[0.0, 1.0])
        };
        assert!(cost(Vec3::z()).abs() <= TOL);
        assert!((cost(-Vec3::z()) - 1.0).abs() <= TOL);
        assert!((cost(Vec3::x()) - 0.5).abs() <= TOL);
    }

    #[test]
    fn absent_hands_contribute_nothing() {
        let f = frame(0.0, Vec3::zeros(), Vec3::z(), None);
        let mut g = f.clone();
        g.t = 1.0;
        let w = FrameWindow::new(vec![f, g]).unwrap();
        assert_eq!(hand_angle_cost(&Vec3::new(1.0, 2.0, 3.0), &w, &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn preference_examples() {
        let p = Vec3::new(0.1, 0.2, 0.3);
        assert_eq!(preference_cost(&p, None, 2.0), 0.0);
        assert_eq!(preference_cost(&p, Some(&p), 2.0), 0.0);
        let q = p + Vec3::new(0.0, 2.0, 0.0);
        assert!((preference_cost(&p, Some(&q), 2.0) - 1.0).abs() <= TOL);
    }

    #[test]
    fn total_examples() {
        let w = CostWeights::default();
        assert_eq!(total_cost(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert!((total_cost(1.0, 0.0, 0.0, 0.0, &w) - 0.24).abs() <= TOL);
        assert!((total_cost(0.0, 0.0, 0.0, 1.0, &w) - 0.28).abs() <= TOL);
        assert!(CostWeights { visibility: -1.0, ..w }.validate().is_err());
    }

    #[test]
    fn context_breakdown_is_consistent() {
        let k = wall(0.3, 0.3);
        let hands = Some((Vec3::new(0.0, -0.1, 0.5), Vec3::z()));
        let frames = (0..5).map(|i| frame(i as f64 / 90.0, Vec3::zeros(), Vec3::z(), hands)).collect();
        let window = FrameWindow::new(frames).unwrap();
        let pref = k.surfaces()[0].cell_center(1, 1).unwrap();
        let ctx = CostContext::new(&k, &window, LabelGeometry::default(), CostWeights::default(), Some(pref)).unwrap();
        let a = ctx.placement(0, 5, 5).unwrap();
        let b = ctx.breakdown(&a).unwrap();
        assert_relative_eq!(
            b.total,
            total_cost(b.visibility, b.readability, b.hand_angle, b.preference, &ctx.weights)
        );
        assert_eq!(ctx.cost(0, 5, 5), b.total);
        assert!(ctx.importance.values().all(|v| (0.0..=1.0).contains(&v)));
    }

    proptest! {
        #[test]
        fn total_is_monotone_in_each_term(
            base in prop::array::uniform4(0.0f64..10.0),
            bump in 0.0f64..5.0, which in 0usize..4,
        ) {
            let w = CostWeights::default();
            let mut up = base;
            up[which] += bump;
            prop_assert!(total_cost(up[0], up[1], up[2], up[3], &w) >= total_cost(base[0], base[1], base[2], base[3], &w));
        }

        #[test]
        fn visibility_zero_iff_disjoint_support(
            cells in prop::collection::vec((any::<bool>(), 0.0f64..1.0), 25),
        ) {
            let mask = CellMask { surfaces: vec![Grid::from_fn(5, 5, |r, c| cells[c * 5 + r].0)] };
            let imap = ImportanceMap { surfaces: vec![Grid::from_fn(5, 5, |r, c| cells[c * 5 + r].1)] };
            let overlap = cells.iter().any(|(m, v)| *m && *v > 0.0);
            prop_assert_eq!(visibility_cost(&mask, &imap).unwrap() > 0.0, overlap);
        }

        #[test]
        fn hand_angle_is_bounded(
            fwd in prop::array::uniform3(-1.0f64..1.0),
            pos in prop::array::uniform3(-1.0f64..1.0),
            p in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let forward = Vec3::from(fwd);
            prop_assume!(forward.norm() > 1e-3);
            let f = frame(0.0, Vec3::new(0.0, 0.0, -3.0), Vec3::z(), Some((Vec3::from(pos), forward.normalize())));
            let mut g = f.clone();
            g.t = 0.5;
            let w = FrameWindow::new(vec![f, g]).unwrap();
            let weights = w.frame_weights();
            let cost = hand_angle_cost(&Vec3::from(p), &w, &weights);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&cost));
        }

        #[test]
        fn readability_inside_cone_within_hull_is_at_most_one(
            r in 0usize..10, c in 0usize..10,
        ) {
            let k = wall(0.3, 0.3);
            let s = &k.surfaces()[0];
            let p = s.cell_center(r, c).unwrap();
            // Eye on the surface plane's normal, gazing at the centre cell.
            let eye = Vec3::new(0.0, 0.0, 0.0);
            let gaze = (s.cell_center(5, 5).unwrap() - eye).normalize();
            prop_assert!(angle_between(&(p - eye), &gaze).unwrap() < 60.0);
            prop_assert!(readability_cost(&p, &eye, &gaze, k.d_max()).unwrap() <= 1.0);
        }
    }
}
