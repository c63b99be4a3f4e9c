//! Coordinate frames, frame-tagged vectors and rotations.
//!
//! Three frames appear throughout the pipeline:
//!
//! * [`World`]: fixed global frame, `+y` points up (against gravity).
//! * [`Device`]: the IMU body frame in which raw readings arrive.
//! * [`Stabilized`]: the device frame with pitch and roll removed, so that its
//!   `+y` axis is aligned with measured gravity while the device heading survives.
//!
//! Vectors carry their frame as a type parameter and rotations carry both the
//! destination and the source frame, so applying a `FrameRotation<World, Device>`
//! to a `Vec3<Stabilized>` does not compile.
//!
//! Quaternions are Hamilton, scalar first, right handed. A rotation `R_AB`
//! maps coordinates expressed in frame `B` into frame `A`.

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion, Vector3};

/// Runtime tag for a coordinate frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameTag {
    World,
    Device,
    Stabilized,
}

impl fmt::Display for FrameTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FrameTag::World => "world",
            FrameTag::Device => "device",
            FrameTag::Stabilized => "stabilized",
        };
        f.write_str(name)
    }
}

/// Compile-time marker for a coordinate frame.
pub trait Frame: Copy + Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    const TAG: FrameTag;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct World;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Device;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Stabilized;

impl Frame for World {
    const TAG: FrameTag = FrameTag::World;
}

impl Frame for Device {
    const TAG: FrameTag = FrameTag::Device;
}

impl Frame for Stabilized {
    const TAG: FrameTag = FrameTag::Stabilized;
}

/// A 3-vector expressed in frame `F`.
#[derive(Clone, Copy, PartialEq)]
pub struct Vec3<F: Frame> {
    v: Vector3<f64>,
    frame: PhantomData<F>,
}

impl<F: Frame> Vec3<F> {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self::from_raw(Vector3::new(x, y, z))
    }

    pub fn from_raw(v: Vector3<f64>) -> Self {
        Self {
            v,
            frame: PhantomData,
        }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn zeros() -> Self {
        Self::from_raw(Vector3::zeros())
    }

    pub fn raw(&self) -> &Vector3<f64> {
        &self.v
    }

    pub fn into_raw(self) -> Vector3<f64> {
        self.v
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.v.x, self.v.y, self.v.z]
    }

    pub fn x(&self) -> f64 {
        self.v.x
    }

    pub fn y(&self) -> f64 {
        self.v.y
    }

    pub fn z(&self) -> f64 {
        self.v.z
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.v.dot(&other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|c| c.is_finite())
    }

    pub fn frame_tag(&self) -> FrameTag {
        F::TAG
    }
}

impl<F: Frame> Default for Vec3<F> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<F: Frame> fmt::Debug for Vec3<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vec3<{}>({}, {}, {})", F::TAG, self.v.x, self.v.y, self.v.z)
    }
}

impl<F: Frame> Add for Vec3<F> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_raw(self.v + rhs.v)
    }
}

impl<F: Frame> AddAssign for Vec3<F> {
    fn add_assign(&mut self, rhs: Self) {
        self.v += rhs.v;
    }
}

impl<F: Frame> Sub for Vec3<F> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_raw(self.v - rhs.v)
    }
}

impl<F: Frame> SubAssign for Vec3<F> {
    fn sub_assign(&mut self, rhs: Self) {
        self.v -= rhs.v;
    }
}

impl<F: Frame> Mul<f64> for Vec3<F> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::from_raw(self.v * rhs)
    }
}

impl<F: Frame> Neg for Vec3<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_raw(-self.v)
    }
}

/// Unit quaternion, frame agnostic.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation {
    q: UnitQuaternion<f64>,
}

impl Rotation {
    /// Builds a rotation from scalar-first components, normalizing them.
    ///
    /// Returns `None` for a zero or non-finite quaternion.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return None;
        }
        // Already-unit input is kept bit for bit so stored quaternions round trip.
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Some(Self {
                q: Unit::new_unchecked(q),
            });
        }
        Some(Self {
            q: Unit::new_normalize(q),
        })
    }

    pub fn identity() -> Self {
        Self {
            q: UnitQuaternion::identity(),
        }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        match Unit::try_new(*axis, 1e-15) {
            Some(a) => Self {
                q: UnitQuaternion::from_axis_angle(&a, angle),
            },
            None => Self::identity(),
        }
    }

    /// Rotation by the rotation vector `v` (axis times angle).
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        Self {
            q: UnitQuaternion::from_scaled_axis(*v),
        }
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Self { q }
    }

    pub fn unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.q
    }

    /// Scalar-first components `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let c = self.q.quaternion();
        [c.w, c.i, c.j, c.k]
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.q.transform_vector(v)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let mut q = self.q * other.q;
        q.renormalize();
        Self { q }
    }

    pub fn inverse(&self) -> Rotation {
        Self {
            q: self.q.inverse(),
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        self.q.to_rotation_matrix().into_inner()
    }

    /// Rotation vector (axis times angle, angle in `[0, π]`).
    pub fn rotation_vector(&self) -> Vector3<f64> {
        self.q.scaled_axis()
    }

    pub fn angle(&self) -> f64 {
        self.q.angle()
    }

    /// Angle of the relative rotation between `self` and `other`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.q.angle_to(&other.q)
    }

    /// Spherical linear interpolation along the shorter arc.
    ///
    /// `t = 0` returns `self` and `t = 1` returns `other` exactly.
    pub fn slerp(&self, other: &Rotation, t: f64) -> Rotation {
        if t == 0.0 {
            return *self;
        }
        if t == 1.0 {
            return *other;
        }
        let a = self.q.quaternion().coords;
        let mut b = other.q.quaternion().coords;
        let mut d = a.dot(&b);
        if d < 0.0 {
            b = -b;
            d = -d;
        }
        let coords = if d > 1.0 - 1e-12 {
            a * (1.0 - t) + b * t
        } else {
            let theta = d.min(1.0).acos();
            let s = theta.sin();
            a * (((1.0 - t) * theta).sin() / s) + b * ((t * theta).sin() / s)
        };
        Self {
            q: Unit::new_normalize(Quaternion::from(coords)),
        }
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [w, x, y, z] = self.wxyz();
        write!(f, "Rotation(w={w}, x={x}, y={y}, z={z})")
    }
}

/// Applies `r` to `v`.
pub fn rotate(r: &Rotation, v: &Vector3<f64>) -> Vector3<f64> {
    r.rotate(v)
}

/// `r1 ∘ r2`.
pub fn compose(r1: &Rotation, r2: &Rotation) -> Rotation {
    r1.compose(r2)
}

/// Rotation mapping vectors expressed in `From` into `To`.
pub struct FrameRotation<To: Frame, From: Frame> {
    rot: Rotation,
    frames: PhantomData<(To, From)>,
}

impl<To: Frame, From: Frame> Clone for FrameRotation<To, From> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<To: Frame, From: Frame> Copy for FrameRotation<To, From> {}

impl<To: Frame, From: Frame> PartialEq for FrameRotation<To, From> {
    fn eq(&self, other: &Self) -> bool {
        self.rot == other.rot
    }
}

impl<To: Frame, From: Frame> fmt::Debug for FrameRotation<To, From> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R[{} <- {}]{:?}", To::TAG, From::TAG, self.rot)
    }
}

impl<To: Frame, From: Frame> Default for FrameRotation<To, From> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<To: Frame, From: Frame> FrameRotation<To, From> {
    pub fn new(rot: Rotation) -> Self {
        Self {
            rot,
            frames: PhantomData,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity())
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rot
    }

    pub fn apply(&self, v: &Vec3<From>) -> Vec3<To> {
        Vec3::from_raw(self.rot.rotate(v.raw()))
    }

    pub fn inverse(&self) -> FrameRotation<From, To> {
        FrameRotation::new(self.rot.inverse())
    }

    /// Chains `self` after `inner`: `From2 -> From -> To`.
    pub fn compose<Inner: Frame>(
        &self,
        inner: &FrameRotation<From, Inner>,
    ) -> FrameRotation<To, Inner> {
        FrameRotation::new(self.rot.compose(&inner.rot))
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        self.rot.to_matrix()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Independent quaternion-to-matrix conversion from the textbook formula.
    fn matrix_oracle(r: &Rotation) -> Matrix3<f64> {
        let [w, x, y, z] = r.wxyz();
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    fn quat() -> impl Strategy<Value = Rotation> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
        )
            .prop_filter_map("degenerate", |(w, x, y, z)| Rotation::from_wxyz(w, x, y, z))
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    #[test]
    fn identity_leaves_vector_unchanged() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(rotate(&Rotation::identity(), &v), v);
    }

    #[test]
    fn half_turn_about_y_flips_x() {
        let r = Rotation::from_axis_angle(&Vector3::y(), PI);
        let out = rotate(&r, &Vector3::new(1.0, 0.0, 0.0));
        assert!((out - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let r = Rotation::from_wxyz(0.3, -0.2, 0.7, 0.1).unwrap();
        assert!(compose(&r, &Rotation::identity()).angle_to(&r) < 1e-12);
        assert!(compose(&r, &r.inverse()).angle() < 1e-9);
    }

    #[test]
    fn slerp_midpoint_of_quarter_turn_is_eighth_turn() {
        let a = Rotation::identity();
        let b = Rotation::from_axis_angle(&Vector3::z(), PI / 2.0);
        let mid = a.slerp(&b, 0.5);
        let expected = Rotation::from_axis_angle(&Vector3::z(), PI / 4.0);
        assert!(mid.angle_to(&expected) < 1e-12);
        assert_eq!(a.slerp(&b, 0.0), a);
        assert_eq!(a.slerp(&b, 1.0), b);
    }

    #[test]
    fn frame_rotation_chains_types() {
        let wd: FrameRotation<World, Device> =
            FrameRotation::new(Rotation::from_axis_angle(&Vector3::y(), 0.4));
        let ds: FrameRotation<Device, Stabilized> =
            FrameRotation::new(Rotation::from_axis_angle(&Vector3::x(), -0.2));
        let ws = wd.compose(&ds);
        let v = Vec3::<Stabilized>::new(0.3, 1.0, -2.0);
        let direct = wd.apply(&ds.apply(&v));
        assert!((ws.apply(&v) - direct).norm() < 1e-12);
        assert_eq!(ws.apply(&v).frame_tag(), FrameTag::World);
    }

    proptest! {
        #[test]
        fn rotate_preserves_norm(r in quat(), v in vec3()) {
            let out = rotate(&r, &v);
            prop_assert!((out.norm() - v.norm()).abs() < 1e-9);
            let q = r.unit_quaternion().quaternion().norm();
            prop_assert!((q - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotate_matches_matrix_oracle(r in quat(), v in vec3()) {
            let out = rotate(&r, &v);
            prop_assert!((out - matrix_oracle(&r) * v).norm() < 1e-9);
        }

        #[test]
        fn compose_matches_matrix_product(a in quat(), b in quat(), v in vec3()) {
            let c = compose(&a, &b);
            prop_assert!((matrix_oracle(&c) - matrix_oracle(&a) * matrix_oracle(&b)).norm() < 1e-9);
            prop_assert!((rotate(&c, &v) - rotate(&a, &rotate(&b, &v))).norm() < 1e-9);
            prop_assert!((c.unit_quaternion().quaternion().norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn composition_is_associative(a in quat(), b in quat(), c in quat(), v in vec3()) {
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            prop_assert!((rotate(&left, &v) - rotate(&right, &v)).norm() < 1e-9);
        }

        #[test]
        fn inverse_cancels(a in quat()) {
            prop_assert!(compose(&a, &a.inverse()).angle() < 1e-9);
        }
    }
}
