//! Importance maps: where on a key object's surfaces the user's hands are
//! working, projected from the eye and softened with a distance transform.

use crate::context_trace::{Frame, FrameWindow, Hand};
use crate::geometry::{ray_rect_intersect, Ray};
use crate::maps::Grid;
use crate::spatial_profile::{AnchoringSurface, KeyObject};

/// Binary per-cell mask over every surface of a key object.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMask {
    pub surfaces: Vec<Grid<bool>>,
}

/// Per-cell importance in `[0, 1]` over every surface of a key object.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMap {
    pub surfaces: Vec<Grid<f64>>,
}

impl CellMask {
    pub fn empty(k: &KeyObject) -> Self {
        Self {
            surfaces: k.surfaces().iter().map(|s| Grid::filled(s.cols(), s.rows(), false)).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.surfaces.iter().map(|g| g.values().iter().filter(|&&b| b).count()).sum()
    }

    pub fn get(&self, s: usize, r: usize, c: usize) -> bool {
        *self.surfaces[s].get(r, c)
    }
}

impl ImportanceMap {
    pub fn zeros(k: &KeyObject) -> Self {
        Self {
            surfaces: k.surfaces().iter().map(|s| Grid::filled(s.cols(), s.rows(), 0.0)).collect(),
        }
    }

    pub fn get(&self, s: usize, r: usize, c: usize) -> f64 {
        *self.surfaces[s].get(r, c)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.surfaces.iter().flat_map(|g| g.values().iter().copied())
    }

    /// Frobenius norm over all cells of all surfaces.
    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(surface, r, c)` of the largest value; first in lexicographic order
    /// on ties.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = (0, 0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for (s, g) in self.surfaces.iter().enumerate() {
            for r in 0..g.width() {
                for c in 0..g.height() {
                    if *g.get(r, c) > best_v {
                        best_v = *g.get(r, c);
                        best = (s, r, c);
                    }
                }
            }
        }
        best
    }
}

/// Casts a ray from the eye midpoint through each joint of `hand` and
/// records the cell of the nearest surface hit. Returns one hit list per
/// surface of `k`; an absent hand yields empty lists.
pub fn project_joints(frame: &Frame, hand: Hand, k: &KeyObject) -> Vec<Vec<(usize, usize)>> {
    let mut hits = vec![Vec::new(); k.surfaces().len()];
    let Some(sample) = frame.hand(hand) else {
        return hits;
    };
    let eye = frame.eye_midpoint();
    for joint in &sample.joints {
        let Ok(ray) = Ray::through(eye, *joint) else { continue };
        let nearest = k
            .surfaces()
            .iter()
            .enumerate()
            .filter_map(|(i, s)| ray_rect_intersect(&ray, &s.rect()).map(|h| (i, h)))
            .min_by(|a, b| a.1.t.total_cmp(&b.1.t));
        if let Some((i, hit)) = nearest {
            hits[i].push(k.surfaces()[i].cell_at(hit.u, hit.v));
        }
    }
    hits
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull in counter-clockwise order without collinear points
/// (Andrew's monotone chain, exact integer arithmetic).
pub fn convex_hull(points: &[(usize, usize)]) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = points.iter().map(|&(r, c)| (r as i64, c as i64)).collect();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn in_hull(hull: &[(i64, i64)], p: (i64, i64)) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p) == 0
                && p.0 >= a.0.min(b.0)
                && p.0 <= a.0.max(b.0)
                && p.1 >= a.1.min(b.1)
                && p.1 <= a.1.max(b.1)
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}

/// Marks the hit cells and fills every cell inside or on their convex hull.
pub fn get_map(hits: &[(usize, usize)], w: usize, h: usize) -> Grid<bool> {
    let mut mask = Grid::filled(w, h, false);
    if hits.is_empty() {
        return mask;
    }
    for &(r, c) in hits {
        mask.set(r, c, true);
    }
    let hull = convex_hull(hits);
    let (r0, r1) = hull.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (c0, c1) = hull.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    for r in r0..=r1 {
        for c in c0..=c1 {
            if in_hull(&hull, (r, c)) {
                mask.set(r as usize, c as usize, true);
            }
        }
    }
    mask
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance (in cells) from every cell to the nearest set cell;
/// infinite everywhere when no cell is set.
pub fn distance_transform(mask: &Grid<bool>) -> Grid<f64> {
    let (w, h) = mask.shape();
    let mut sq = mask.map(|&b| if b { 0.0 } else { f64::INFINITY });
    let mut buf = vec![0.0; w.max(h)];
    for c in 0..h {
        let col: Vec<f64> = (0..w).map(|r| *sq.get(r, c)).collect();
        edt_1d(&col, &mut buf[..w]);
        for (r, &d) in buf[..w].iter().enumerate() {
            sq.set(r, c, d);
        }
    }
    for r in 0..w {
        let row: Vec<f64> = (0..h).map(|c| *sq.get(r, c)).collect();
        edt_1d(&row, &mut buf[..h]);
        for (c, &d) in buf[..h].iter().enumerate() {
            sq.set(r, c, d);
        }
    }
    sq.map(|d| d.sqrt())
}

/// `1 - e / max(e)` where `e` is the distance to the nearest set cell. An
/// empty mask gives all zeros and a full mask all ones.
pub fn soften(mask: &Grid<bool>) -> Grid<f64> {
    if !mask.values().iter().any(|&b| b) {
        return mask.map(|_| 0.0);
    }
    let e = distance_transform(mask);
    let max = e.values().iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return mask.map(|_| 1.0);
    }
    e.map(|d| 1.0 - d / max)
}

/// Softened hull masks of one hand in one frame, per surface.
fn soft_hand_map(frame: &Frame, hand: Hand, k: &KeyObject) -> Vec<Grid<f64>> {
    project_joints(frame, hand, k)
        .iter()
        .zip(k.surfaces())
        .map(|(hits, s): (_, &AnchoringSurface)| soften(&get_map(hits, s.cols(), s.rows())))
        .collect()
}

/// Weighted sum of both hands' softened maps over `frames`, min-max
/// normalized over all cells of the key object.
pub fn get_overall_map(frames: &[Frame], weights: &[f64], k: &KeyObject) -> ImportanceMap {
    assert_eq!(frames.len(), weights.len(), "one weight per frame");
    let mut map = ImportanceMap::zeros(k);
    for (frame, &w) in frames.iter().zip(weights) {
        if w == 0.0 || (frame.left.is_none() && frame.right.is_none()) {
            continue;
        }
        for hand in [Hand::Left, Hand::Right] {
            if frame.hand(hand).is_none() {
                continue;
            }
            for (acc, soft) in map.surfaces.iter_mut().zip(soft_hand_map(frame, hand, k)) {
                for (a, s) in acc.values_mut().iter_mut().zip(soft.values()) {
                    *a += w * s;
                }
            }
        }
    }
    let min = map.values().fold(f64::INFINITY, f64::min);
    let max = map.values().fold(f64::NEG_INFINITY, f64::max);
    for g in &mut map.surfaces {
        for v in g.values_mut() {
            *v = if max > min { (*v - min) / (max - min) } else { 0.0 };
        }
    }
    map
}

/// [`get_overall_map`] over a window using its own frame weights.
pub fn window_importance(window: &FrameWindow, k: &KeyObject) -> ImportanceMap {
    get_overall_map(window.frames(), &window.frame_weights(), k)
}
