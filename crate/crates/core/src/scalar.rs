//! Scalar abstraction shared by every numerical kernel.
//!
//! All geometry, assembly and solver code is written against [`Real`], so the
//! same kernels run in `f32` (for cheap smoke checks) and `f64` (the default
//! used by the drivers and the CLI).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the FEM kernels.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every `Real` can represent (a rounding of) any `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A point or vector in the plane.
pub type Vec2<T> = [T; 2];

/// Row-major 2x2 tensor.
pub type Mat2<T> = [[T; 2]; 2];

#[inline]
pub fn sub<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale<T: Real>(a: Vec2<T>, s: T) -> Vec2<T> {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

/// z-component of the planar cross product.
#[inline]
pub fn cross<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm<T: Real>(a: Vec2<T>) -> T {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    norm(sub(a, b))
}

#[inline]
pub fn normalize<T: Real>(a: Vec2<T>) -> Vec2<T> {
    let n = norm(a);
    if n > T::zero() {
        scale(a, T::one() / n)
    } else {
        a
    }
}

/// Right-hand normal of a direction: rotates `t` by -90 degrees.
#[inline]
pub fn right_normal<T: Real>(t: Vec2<T>) -> Vec2<T> {
    [t[1], -t[0]]
}

#[inline]
pub fn mat_vec<T: Real>(m: Mat2<T>, v: Vec2<T>) -> Vec2<T> {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

#[inline]
pub fn mat_mul<T: Real>(a: Mat2<T>, b: Mat2<T>) -> Mat2<T> {
    let mut c = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

#[inline]
pub fn transpose<T: Real>(m: Mat2<T>) -> Mat2<T> {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

#[inline]
pub fn det<T: Real>(m: Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Converts a vector between scalar types.
pub fn cast_vec<S: Real, T: Real>(v: &[S]) -> Vec<T> {
    v.iter().map(|x| T::lit(x.f64())).collect()
}

pub fn cast_pts<S: Real, T: Real>(v: &[Vec2<S>]) -> Vec<Vec2<T>> {
    v.iter()
        .map(|p| [T::lit(p[0].f64()), T::lit(p[1].f64())])
        .collect()
}
