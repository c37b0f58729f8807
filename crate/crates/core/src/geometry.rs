//! Planar points and a few exact area formulas.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Planar vectors share the point representation.
pub type Vec2 = Point;

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Counterclockwise rotation by a right angle: (a, b) -> (-b, a).
    pub fn perp(self) -> Self {
        Point::new(-self.y, self.x)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn lex_cmp(&self, o: &Point) -> std::cmp::Ordering {
        self.x.total_cmp(&o.x).then(self.y.total_cmp(&o.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lower: Point,
    pub upper: Point,
}

impl Rect {
    pub fn new(lower: Point, upper: Point) -> Self {
        Rect { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper.x - self.lower.x
    }

    pub fn height(&self) -> f64 {
        self.upper.y - self.lower.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    pub fn inradius(&self) -> f64 {
        0.5 * self.width().min(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.lower.x && p.x <= self.upper.x && p.y >= self.lower.y && p.y <= self.upper.y
    }

    pub fn contains_strict(&self, p: Point) -> bool {
        p.x > self.lower.x && p.x < self.upper.x && p.y > self.lower.y && p.y < self.upper.y
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        (p.x - self.lower.x).min(self.upper.x - p.x).min(p.y - self.lower.y).min(self.upper.y - p.y)
    }

    pub fn intersection(&self, o: &Rect) -> Option<Rect> {
        let lo = Point::new(self.lower.x.max(o.lower.x), self.lower.y.max(o.lower.y));
        let hi = Point::new(self.upper.x.min(o.upper.x), self.upper.y.min(o.upper.y));
        (lo.x < hi.x && lo.y < hi.y).then(|| Rect::new(lo, hi))
    }
}

/// Region used to select balls or cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    All,
    Rect(Rect),
    Disk { center: Point, radius: f64 },
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::All => true,
            Region::Rect(r) => r.contains(p),
            Region::Disk { center, radius } => p.dist(*center) <= *radius,
        }
    }

    /// Whether the closed disk `B_r(c)` lies in the region.
    pub fn contains_disk(&self, c: Point, r: f64) -> bool {
        match self {
            Region::All => true,
            Region::Rect(rect) => rect.contains(c) && rect.boundary_distance(c) >= r,
            Region::Disk { center, radius } => c.dist(*center) + r <= *radius,
        }
    }
}

/// Exact area of `B_radius(center) ∩ rect`.
pub fn disk_rect_overlap(center: Point, radius: f64, rect: &Rect) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let r = radius;
    let (x0, x1) = (rect.lower.x - center.x, rect.upper.x - center.x);
    let (y0, y1) = (rect.lower.y - center.y, rect.upper.y - center.y);
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b || y0 >= r || y1 <= -r {
        return 0.0;
    }
    // Antiderivative of sqrt(r^2 - x^2).
    let big_s = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).clamp(-1.0, 1.0).asin())
    };
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let xb = (r * r - y * y).sqrt();
            for x in [-xb, xb] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let s = (r * r - m * m).max(0.0).sqrt();
        let up = y1.min(s);
        let lo = y0.max(-s);
        if up <= lo {
            continue;
        }
        let arc = big_s(q) - big_s(p);
        let upper = if y1 < s { y1 * (q - p) } else { arc };
        let lower = if y0 > -s { y0 * (q - p) } else { -arc };
        area += upper - lower;
    }
    area.max(0.0)
}
