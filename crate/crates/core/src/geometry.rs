use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::{Deserialize, Serialize};

/// Floating-point types the geometric kernels accept.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Unit vector at angle `theta`.
    pub fn from_angle(theta: T) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    /// Length of the shortest 8-connected lattice route covering this offset.
    pub fn octile_norm(self) -> T {
        let ax = self.x.abs();
        let ay = self.y.abs();
        let (lo, hi) = if ax < ay { (ax, ay) } else { (ay, ax) };
        hi + (T::SQRT_2() - T::one()) * lo
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn octile_distance(self, o: Self) -> T {
        (self - o).octile_norm()
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    /// Rotates by +90 degrees.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn unit(self) -> Self {
        let n = self.norm();
        if n == T::zero() {
            self
        } else {
            self * (T::one() / n)
        }
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(
            U::from(self.x).expect("cast"),
            U::from(self.y).expect("cast"),
        )
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> AddAssign for Point2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Normalizes an angle into `[0, 2π)`.
pub fn normalize_angle<T: Scalar>(theta: T) -> T {
    let tau = T::TAU();
    let mut t = theta % tau;
    if t < T::zero() {
        t = t + tau;
    }
    if t >= tau {
        t = t - tau;
    }
    t
}

/// Proper or touching intersection of two segments.
///
/// Returns the point and the parameters along each segment. Parallel or
/// collinear segments yield `None`.
pub fn segment_intersection<T: Scalar>(
    a0: Point2<T>,
    a1: Point2<T>,
    b0: Point2<T>,
    b1: Point2<T>,
) -> Option<(Point2<T>, T, T)> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.cross(s);
    let scale = r.norm() * s.norm();
    if scale == T::zero() || denom.abs() <= lit::<T>(1e-12) * scale {
        return None;
    }
    let qp = b0 - a0;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let tol = lit::<T>(1e-9);
    if t < -tol || t > T::one() + tol || u < -tol || u > T::one() + tol {
        return None;
    }
    let t = t.max(T::zero()).min(T::one());
    let u = u.max(T::zero()).min(T::one());
    Some((a0 + r * t, t, u))
}

/// Winding number of a closed polygon around `p` (the last vertex connects back to the first).
pub fn winding_number<T: Scalar>(poly: &[Point2<T>], p: Point2<T>) -> i32 {
    let n = poly.len();
    if n < 3 {
        return 0;
    }
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > T::zero() {
                wn += 1;
            }
        } else if b.y <= p.y && side < T::zero() {
            wn -= 1;
        }
    }
    wn
}

/// Total length of a polyline.
pub fn polyline_length<T: Scalar>(pts: &[Point2<T>]) -> T {
    pts.windows(2)
        .fold(T::zero(), |acc, w| acc + w[0].distance(w[1]))
}

/// Path length on the 8-connected lattice, held as exact step counts.
///
/// The metric value is `straight + diagonal * √2` cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OctileLength {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileLength {
    pub const ZERO: Self = Self {
        straight: 0,
        diagonal: 0,
    };

    pub fn new(straight: u32, diagonal: u32) -> Self {
        Self { straight, diagonal }
    }

    /// Shortest lattice length between two cells.
    pub fn between(dr: i64, dc: i64) -> Self {
        let a = dr.unsigned_abs();
        let b = dc.unsigned_abs();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        Self::new((hi - lo) as u32, lo as u32)
    }

    pub fn cells<T: Scalar>(self) -> T {
        lit::<T>(self.straight as f64) + lit::<T>(self.diagonal as f64) * T::SQRT_2()
    }

    pub fn meters<T: Scalar>(self, cell_size: T) -> T {
        self.cells::<T>() * cell_size
    }

    pub fn step(diagonal: bool) -> Self {
        if diagonal {
            Self::new(0, 1)
        } else {
            Self::new(1, 0)
        }
    }
}

impl Add for OctileLength {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.straight + o.straight, self.diagonal + o.diagonal)
    }
}

impl AddAssign for OctileLength {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Ord for OctileLength {
    fn cmp(&self, other: &Self) -> Ordering {
        // Sign of da + db*sqrt(2), decided in integers.
        let da = self.straight as i64 - other.straight as i64;
        let db = self.diagonal as i64 - other.diagonal as i64;
        if da >= 0 && db >= 0 {
            return (da + db).cmp(&0);
        }
        if da <= 0 && db <= 0 {
            return 0.cmp(&-(da + db));
        }
        let lhs = (da * da) as i128;
        let rhs = 2 * (db * db) as i128;
        if da > 0 {
            lhs.cmp(&rhs)
        } else {
            rhs.cmp(&lhs)
        }
    }
}

impl PartialOrd for OctileLength {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
