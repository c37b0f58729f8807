//! Pre-Jacobian, supercurrent, the current T_u = T^D + T^S, circle degrees
//! and Jacobian pairings.

use crate::error::{Error, Result};
use crate::geometry::{Point, Vec2};
use crate::grid_field::{Domain, JumpEdge, S1GridField, ScalarGridField, VectorGridField};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Unit value and its partial derivatives at a cell centre, obtained from
/// the jump-corrected lifting gradient by the chain rule.
fn cell_unit_derivatives(u: &S1GridField, i: usize, j: usize) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let g = u.cell_gradient(i, j);
    let (s, c) = (2.0 * PI * u.cell_center_phase(i, j)).sin_cos();
    let d1 = [-2.0 * PI * g.x * s, 2.0 * PI * g.x * c];
    let d2 = [-2.0 * PI * g.y * s, 2.0 * PI * g.y * c];
    ([c, s], d1, d2)
}

fn per_cell(d: &Domain, f: impl Fn(usize, usize) -> Vec2) -> VectorGridField {
    let mut values = Vec::with_capacity(d.cell_count());
    for j in 0..d.cells_y() {
        for i in 0..d.cells_x() {
            values.push(f(i, j));
        }
    }
    VectorGridField::new(d.clone(), values).expect("cell count")
}

/// λ_u = ½(−u¹∂₂u² + u²∂₂u¹, u¹∂₁u² − u²∂₁u¹), per cell.
pub fn prejacobian_lambda(u: &S1GridField) -> VectorGridField {
    per_cell(u.domain(), |i, j| {
        let (v, d1, d2) = cell_unit_derivatives(u, i, j);
        Point::new(0.5 * (-v[0] * d2[1] + v[1] * d2[0]), 0.5 * (v[0] * d1[1] - v[1] * d1[0]))
    })
}

/// j(u) = ½(u¹∇u² − u²∇u¹), per cell.
pub fn supercurrent(u: &S1GridField) -> VectorGridField {
    per_cell(u.domain(), |i, j| {
        let (v, d1, d2) = cell_unit_derivatives(u, i, j);
        Point::new(0.5 * (v[0] * d1[1] - v[1] * d1[0]), 0.5 * (v[0] * d2[1] - v[1] * d2[0]))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPart {
    pub jump: JumpEdge,
    /// ½ sin(2π(w⁻ − w⁺)), per unit length along the edge tangent.
    pub density: f64,
}

#[derive(Debug, Clone)]
pub struct CurrentDecomposition {
    pub diffuse: VectorGridField,
    pub singular: Vec<SingularPart>,
}

impl CurrentDecomposition {
    /// Total variation |T|(Ω).
    pub fn mass(&self) -> f64 {
        self.diffuse.l1_norm() + self.singular.iter().map(|s| s.density.abs() * s.jump.length).sum::<f64>()
    }
}

pub fn t_current(u: &S1GridField) -> CurrentDecomposition {
    let diffuse = per_cell(u.domain(), |i, j| u.cell_gradient(i, j).perp() * PI);
    let singular = u
        .jumps()
        .iter()
        .map(|&jump| {
            let density = if jump.integer { 0.0 } else { -0.5 * (2.0 * PI * jump.amplitude).sin() };
            SingularPart { jump, density }
        })
        .collect();
    CurrentDecomposition { diffuse, singular }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
    pub samples: usize,
}

impl Circle {
    /// Circle sampled at arc spacing at most an eighth of the finest grid spacing.
    pub fn on_grid(domain: &Domain, center: Point, radius: f64) -> Result<Self> {
        let h = domain.min_spacing();
        let n = ((8.0 * 2.0 * PI * radius / h).ceil() as usize).max(64);
        Circle::new(center, radius, n, h)
    }

    pub fn new(center: Point, radius: f64, samples: usize, h: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Argument(format!("circle radius must be positive, got {radius}")));
        }
        if samples < 8 {
            return Err(Error::Argument("a circle needs at least 8 samples".into()));
        }
        if 2.0 * PI * radius / samples as f64 >= h {
            return Err(Error::Argument("circle arc spacing must be below the grid spacing".into()));
        }
        Ok(Circle { center, radius, samples })
    }

    pub fn point(&self, k: usize) -> Point {
        let (s, c) = (2.0 * PI * k as f64 / self.samples as f64).sin_cos();
        self.center + Point::new(c, s) * self.radius
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut t = a % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Winding number of `u` along the circle.
pub fn degree_on_circle(u: &S1GridField, c: &Circle) -> Result<i64> {
    let b = u.domain().bounds();
    if !b.contains(c.center) || b.boundary_distance(c.center) < c.radius {
        return Err(Error::Domain(format!(
            "circle at ({}, {}) with radius {} leaves the domain",
            c.center.x, c.center.y, c.radius
        )));
    }
    let mut samples = Vec::with_capacity(c.samples);
    for k in 0..c.samples {
        let v = u.interpolate_unit(c.point(k)).ok_or(Error::UndersampledCircle { residual: 1.0 })?;
        samples.push(v);
    }
    let mut winding = 0.0;
    let mut flux = 0.0;
    for k in 0..c.samples {
        let a = samples[k];
        let b = samples[(k + 1) % c.samples];
        winding += wrap_angle(b[1].atan2(b[0]) - a[1].atan2(a[0]));
        // Discrete ∮ (u¹ du² − u² du¹).
        flux += a[0] * b[1] - a[1] * b[0];
    }
    let deg = (winding / (2.0 * PI)).round();
    let residual = (flux / (2.0 * PI) - deg).abs();
    if residual >= 0.05 {
        return Err(Error::UndersampledCircle { residual });
    }
    Ok(deg as i64)
}

/// Gradient of nodal values on cell `(i, j)` (bilinear interpolant at the centre).
fn nodal_cell_gradient(f: &ScalarGridField, i: usize, j: usize) -> Vec2 {
    let d = f.domain();
    let gx = 0.5 * ((f.value(i + 1, j) - f.value(i, j)) + (f.value(i + 1, j + 1) - f.value(i, j + 1))) / d.dx(i);
    let gy = 0.5 * ((f.value(i, j + 1) - f.value(i, j)) + (f.value(i + 1, j + 1) - f.value(i + 1, j))) / d.dy(j);
    Point::new(gx, gy)
}

/// ⟨Ju, φ⟩ = ∫∇φ·dT_u for a nodal test function vanishing near ∂Ω.
pub fn jacobian_pairing(u: &S1GridField, test: &ScalarGridField) -> Result<f64> {
    let d = u.domain();
    if !d.same_grid(test.domain()) {
        return Err(Error::Argument("test function lives on a different grid".into()));
    }
    let scale = test.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let band = 3usize.min(d.nx() / 2).min(d.ny() / 2);
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            let near = i < band || j < band || i + band >= d.nx() || j + band >= d.ny();
            if near && test.value(i, j).abs() > 1e-12 * scale.max(1e-300) {
                return Err(Error::Argument(
                    "test function must vanish on a band of two cells along the boundary".into(),
                ));
            }
        }
    }
    let t = t_current(u);
    let mut acc = 0.0;
    for j in 0..d.cells_y() {
        for i in 0..d.cells_x() {
            acc += nodal_cell_gradient(test, i, j).dot(t.diffuse.get(i, j)) * d.cell_area(i, j);
        }
    }
    for s in t.singular.iter().filter(|s| s.density != 0.0) {
        let cells = d.edge_cells(s.jump.edge);
        let g = cells.iter().fold(Point::ZERO, |a, &(i, j)| a + nodal_cell_gradient(test, i, j))
            * (1.0 / cells.len() as f64);
        acc += s.density * g.dot(s.jump.edge.tangent()) * s.jump.length;
    }
    Ok(acc)
}

/// |T_u − T_v|(Ω).
pub fn current_mass_distance(u: &S1GridField, v: &S1GridField) -> Result<f64> {
    if !u.domain().same_grid(v.domain()) {
        return Err(Error::Argument("fields live on different grids".into()));
    }
    let (tu, tv) = (t_current(u), t_current(v));
    let diffuse = tu.diffuse.zip_with(&tv.diffuse, |a, b| a - b)?.l1_norm();
    let mut edges: BTreeMap<_, (f64, f64)> = BTreeMap::new();
    for s in &tu.singular {
        edges.entry(s.jump.edge).or_insert((0.0, s.jump.length)).0 += s.density;
    }
    for s in &tv.singular {
        edges.entry(s.jump.edge).or_insert((0.0, s.jump.length)).0 -= s.density;
    }
    Ok(diffuse + edges.values().map(|(r, l)| r.abs() * l).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_field::{build_s1_field, canonical_vortex_lifting, vortex_superposition};

    fn square(lo: f64, hi: f64, h: f64) -> Domain {
        Domain::uniform(Point::new(lo, lo), Point::new(hi, hi), h, 0.0).unwrap()
    }

    fn bump(d: &Domain, c: Point, r: f64, amp: f64) -> ScalarGridField {
        ScalarGridField::from_fn(d, |p| {
            let s = p.dist(c) / r;
            if s < 1.0 {
                amp * (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        })
    }

    #[test]
    fn constant_field_has_zero_currents() {
        let d = square(0.0, 1.0, 0.05);
        let u = build_s1_field(ScalarGridField::constant(&d, 0.42));
        assert!(prejacobian_lambda(&u).values().iter().all(|v| v.norm() == 0.0));
        let t = t_current(&u);
        assert!(t.singular.is_empty());
        let test = bump(&d, Point::new(0.5, 0.5), 0.3, 1.0);
        assert_eq!(jacobian_pairing(&u, &test).unwrap(), 0.0);
    }

    #[test]
    fn linear_lifting_lambda_exact() {
        let d = square(0.0, 1.0, 1.0 / 16.0);
        let a = Point::new(0.3, -0.45);
        let u = build_s1_field(ScalarGridField::from_fn(&d, |p| a.dot(p)));
        for v in prejacobian_lambda(&u).values() {
            assert!((*v - a.perp() * PI).norm() < 1e-12);
        }
        let t = t_current(&u);
        assert!(t.singular.is_empty());
        for (a, b) in t.diffuse.values().iter().zip(prejacobian_lambda(&u).values()) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn vortex_lambda_magnitude() {
        let h = 1.0 / 128.0;
        let d = square(-1.0, 1.0, h);
        let u = build_s1_field(canonical_vortex_lifting(&d, Point::ZERO, 1).unwrap());
        let c = d.snap_to_cell_center(Point::ZERO).unwrap();
        let lam = prejacobian_lambda(&u);
        for j in 0..d.cells_y() {
            for i in 0..d.cells_x() {
                let r = d.cell_center(i, j).dist(c);
                if r > 0.25 && r < 0.9 {
                    let exact = 1.0 / (2.0 * r);
                    assert!((lam.get(i, j).norm() - exact).abs() / exact < 4.0 * h / r);
                }
            }
        }
        // Integer jumps carry no singular current.
        assert!(t_current(&u).singular.iter().all(|s| s.density == 0.0));
    }

    #[test]
    fn fractional_quarter_jump_density() {
        let d = square(0.0, 1.0, 0.01);
        let u = build_s1_field(ScalarGridField::from_fn(&d, |p| if p.x > 0.505 { 1.25 } else { 0.0 }));
        let t = t_current(&u);
        assert_eq!(t.singular.len(), d.ny());
        for s in &t.singular {
            assert!((s.density.abs() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn degrees_of_vortices() {
        let d = square(0.0, 1.0, 1.0 / 128.0);
        for k in -3..=3i64 {
            let lift = if k == 0 {
                ScalarGridField::constant(&d, 0.1)
            } else {
                canonical_vortex_lifting(&d, Point::new(0.5, 0.5), k).unwrap()
            };
            let u = build_s1_field(lift);
            for r in [0.05, 0.2, 0.4] {
                let c = Circle::on_grid(&d, Point::new(0.51, 0.49), r).unwrap();
                assert_eq!(degree_on_circle(&u, &c).unwrap(), k);
            }
            let away = Circle::on_grid(&d, Point::new(0.2, 0.2), 0.1).unwrap();
            assert_eq!(degree_on_circle(&u, &away).unwrap(), 0);
        }
    }

    #[test]
    fn degree_additivity_and_domain_error() {
        let d = square(0.0, 1.0, 1.0 / 128.0);
        let u =
            build_s1_field(vortex_superposition(&d, &[(Point::new(0.3, 0.5), 2), (Point::new(0.7, 0.5), -1)]).unwrap());
        let big = Circle::on_grid(&d, Point::new(0.5, 0.5), 0.45).unwrap();
        assert_eq!(degree_on_circle(&u, &big).unwrap(), 1);
        let left = Circle::on_grid(&d, Point::new(0.3, 0.5), 0.1).unwrap();
        assert_eq!(degree_on_circle(&u, &left).unwrap(), 2);
        let out = Circle::on_grid(&d, Point::new(0.9, 0.5), 0.2).unwrap();
        assert!(matches!(degree_on_circle(&u, &out), Err(Error::Domain(_))));
    }

    #[test]
    fn vortex_pairing_is_pi_times_test_at_center() {
        let h = 1.0 / 256.0;
        let d = square(0.0, 1.0, h);
        let c = d.snap_to_cell_center(Point::new(0.5, 0.5)).unwrap();
        let u = build_s1_field(canonical_vortex_lifting(&d, c, 1).unwrap());
        let test = bump(&d, c, 0.2, 0.7);
        let got = jacobian_pairing(&u, &test).unwrap();
        assert!((got - PI * 0.7).abs() / (PI * 0.7) < 0.03, "{got}");
        let x = d.snap_to_cell_center(Point::new(0.35, 0.4)).unwrap();
        let y = d.snap_to_cell_center(Point::new(0.65, 0.6)).unwrap();
        let dip = build_s1_field(vortex_superposition(&d, &[(x, 1), (y, -1)]).unwrap());
        let test = bump(&d, Point::new(0.45, 0.45), 0.4, 1.0);
        let tv = |p: Point| {
            let s = p.dist(Point::new(0.45, 0.45)) / 0.4;
            if s < 1.0 {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        };
        let want = PI * (tv(x) - tv(y));
        let got = jacobian_pairing(&dip, &test).unwrap();
        assert!((got - want).abs() / want.abs() < 0.03, "{got} vs {want}");
    }

    #[test]
    fn pairing_rejects_non_compact_tests() {
        let d = square(0.0, 1.0, 0.05);
        let u = build_s1_field(ScalarGridField::constant(&d, 0.0));
        let test = ScalarGridField::constant(&d, 1.0);
        assert!(matches!(jacobian_pairing(&u, &test), Err(Error::Argument(_))));
    }

    #[test]
    fn mass_distance_examples() {
        let d = square(0.0, 1.0, 0.01);
        let flat = build_s1_field(ScalarGridField::constant(&d, 0.0));
        let other = build_s1_field(ScalarGridField::constant(&d, 0.7));
        assert_eq!(current_mass_distance(&flat, &flat).unwrap(), 0.0);
        assert_eq!(current_mass_distance(&flat, &other).unwrap(), 0.0);
        // A 5x5 block of nodes lifted by 1.25: jump perimeter 20 edges of length 0.01.
        let block = build_s1_field(ScalarGridField::from_fn(&d, |p| {
            if (0.395..0.445).contains(&p.x) && (0.395..0.445).contains(&p.y) {
                1.25
            } else {
                0.0
            }
        }));
        assert!((block.jump_length() - 0.2).abs() < 1e-12);
        assert!((current_mass_distance(&flat, &block).unwrap() - 0.1).abs() < 1e-12);
    }
}
