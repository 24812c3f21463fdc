//! Vector and quaternion helpers, ray casting against oriented rectangles,
//! and the rotation that turns an instruction label toward the viewer.

use nalgebra::{UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

const EPS: f64 = 1e-12;

/// Unsigned angle between two non-zero vectors, in degrees.
pub fn angle_between(a: &Vec3, b: &Vec3) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na < EPS || nb < EPS {
        return Err(Error::InvalidArgument(
            "angle between a zero-length vector".into(),
        ));
    }
    // atan2 of |a x b| and a.b stays accurate near 0 and 180 degrees,
    // where acos of the clamped cosine loses precision.
    let cross = a.cross(b).norm();
    let dot = a.dot(b);
    Ok(cross.atan2(dot).to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Builds a ray; the direction is normalized. Directions already unit
    /// to within rounding are kept bit-for-bit.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if n < EPS || !n.is_finite() {
            return Err(Error::InvalidArgument("ray direction has zero length".into()));
        }
        let direction = if (n - 1.0).abs() <= 1e-14 { direction } else { direction / n };
        Ok(Self { origin, direction })
    }

    /// Ray from `origin` through `target`.
    pub fn through(origin: Vec3, target: Vec3) -> Result<Self> {
        Self::new(origin, target - origin)
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// An oriented rectangle described by its top-left vertex and two in-plane
/// unit axes. `u` runs along `right` and `v` runs along `-up`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub top_left: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vec3,
    pub u: f64,
    pub v: f64,
    pub t: f64,
}

impl Rect {
    /// Rectangle centred on `center` with axes taken from `rotation`
    /// (local +x is right, local +y is up).
    pub fn centered(center: Vec3, rotation: &Quat, width: f64, height: f64) -> Self {
        let right = rotation * Vec3::x();
        let up = rotation * Vec3::y();
        Self {
            top_left: center - right * (width / 2.0) + up * (height / 2.0),
            right,
            up,
            width,
            height,
        }
    }

    pub fn normal(&self) -> Vec3 {
        self.right.cross(&self.up)
    }

    pub fn corners(&self) -> [Vec3; 4] {
        let w = self.right * self.width;
        let h = self.up * self.height;
        [self.top_left, self.top_left + w, self.top_left - h, self.top_left + w - h]
    }
}

/// Intersects a ray with a rectangle. Hits at or behind the origin, and
/// rays parallel to the rectangle plane, yield `None`.
pub fn ray_rect_intersect(ray: &Ray, rect: &Rect) -> Option<RayHit> {
    let n = rect.normal();
    let denom = n.dot(&ray.direction);
    if denom.abs() < EPS {
        return None;
    }
    let t = n.dot(&(rect.top_left - ray.origin)) / denom;
    if !(t > EPS) {
        return None;
    }
    let point = ray.at(t);
    let rel = point - rect.top_left;
    let u = rel.dot(&rect.right);
    let v = -rel.dot(&rect.up);
    if (0.0..=rect.width).contains(&u) && (0.0..=rect.height).contains(&v) {
        Some(RayHit { point, u, v, t })
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Euler rotation in degrees. The z rotation is applied first, then x,
/// then y, all about the fixed local axes: `R = Ry * Rx * Rz`.
pub fn euler_zxy(x_deg: f64, y_deg: f64, z_deg: f64) -> Quat {
    let rx = Quat::from_axis_angle(&Vector3::x_axis(), x_deg.to_radians());
    let ry = Quat::from_axis_angle(&Vector3::y_axis(), y_deg.to_radians());
    let rz = Quat::from_axis_angle(&Vector3::z_axis(), z_deg.to_radians());
    ry * rx * rz
}

/// Rotation of an instruction label placed at `p_a` on a surface with
/// rotation `rot_s`, so that the label faces a viewer at `p_eye`.
///
/// The label's local +z is its facing normal. The tilt angles come from the
/// angles between the viewing direction and the surface's up and right
/// axes; horizontal surfaces tilt about local x and spin about local z,
/// vertical surfaces tilt about local x and y.
pub fn get_rotation(rot_s: &Quat, p_a: &Vec3, p_eye: &Vec3, orientation: Orientation) -> Result<Quat> {
    let dir = p_a - p_eye;
    if dir.norm() < EPS {
        return Err(Error::InvalidArgument(
            "label position coincides with the eye".into(),
        ));
    }
    let up = rot_s * Vec3::y();
    let right = rot_s * Vec3::x();
    let alpha_up = angle_between(&up, &dir)?;
    let alpha_right = angle_between(&right, &dir)?;
    let local = match orientation {
        Orientation::Horizontal => euler_zxy(90.0 - alpha_up, 0.0, 90.0 - alpha_right),
        Orientation::Vertical => euler_zxy(90.0 - alpha_up, alpha_right - 90.0, 0.0),
    };
    Ok(Quat::new_normalize((rot_s * local).into_inner()))
}

/// Quaternion equality modulo the double cover (`q` and `-q` are the same
/// rotation).
pub fn quat_approx_eq(a: &Quat, b: &Quat, tol: f64) -> bool {
    let (a, b) = (a.as_ref(), b.as_ref());
    (a - b).norm() <= tol || (a + b).norm() <= tol
}

/// Rotation taking the local axes (x, y, z) onto the given orthonormal
/// right-handed frame.
pub fn frame_rotation(right: &Vec3, up: &Vec3, forward: &Vec3) -> Quat {
    let m = nalgebra::Matrix3::from_columns(&[*right, *up, *forward]);
    Quat::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m))
}

/// Normalizes `v`; `None` for zero length. Near-unit input is returned
/// unchanged.
pub fn unit(v: Vec3) -> Option<Vec3> {
    let n = v.norm();
    if n < EPS || !n.is_finite() {
        None
    } else if (n - 1.0).abs() <= 1e-14 {
        Some(v)
    } else {
        Some(v / n)
    }
}
