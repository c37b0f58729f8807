//! Liftings, S¹-valued fields and cell-sampled vector fields on tensor grids.
//!
//! Nodes are indexed `(i, j)` with `i` along x; flat storage is row-major
//! (`j * nx + i`). Uniform grids are the common case, but the recovery
//! builder needs local refinement around vortex cores, so node coordinates
//! are stored per axis.

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect, Vec2};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Lifting differences above this size (in absolute value) are jumps.
pub const JUMP_THRESHOLD: f64 = 0.5;
/// Amplitudes this close to an integer are invisible to the unit field.
pub const INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    xs: Vec<f64>,
    ys: Vec<f64>,
    margin: f64,
    h: Option<f64>,
}

fn check_axis(v: &[f64], name: &str) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::Domain(format!("{name}-axis needs at least two nodes")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!("{name}-axis nodes must be finite and increasing")));
    }
    Ok(())
}

impl Domain {
    /// Uniform grid on `[lower, upper]` with spacing `h` and inner margin `margin`.
    pub fn uniform(lower: Point, upper: Point, h: f64, margin: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("grid spacing must be positive, got {h}")));
        }
        let mut axes = [Vec::new(), Vec::new()];
        for (k, (lo, hi)) in [(lower.x, upper.x), (lower.y, upper.y)].into_iter().enumerate() {
            let side = hi - lo;
            if !(side > 0.0) {
                return Err(Error::Domain("upper corner must exceed lower corner".into()));
            }
            let n = (side / h).round();
            if n < 1.0 || ((n * h - side) / side).abs() > 1e-12 {
                return Err(Error::Domain(format!("side length {side} is not an integer multiple of h = {h}")));
            }
            let n = n as usize;
            axes[k] = (0..=n).map(|i| if i == n { hi } else { lo + i as f64 * h }).collect();
        }
        let [xs, ys] = axes;
        let mut d = Domain::rectilinear(xs, ys, margin)?;
        d.h = Some(h);
        Ok(d)
    }

    /// Tensor grid with explicit node coordinates along each axis.
    pub fn rectilinear(xs: Vec<f64>, ys: Vec<f64>, margin: f64) -> Result<Self> {
        check_axis(&xs, "x")?;
        check_axis(&ys, "y")?;
        let w = xs[xs.len() - 1] - xs[0];
        let hgt = ys[ys.len() - 1] - ys[0];
        if !(margin >= 0.0) || 2.0 * margin >= w.min(hgt) {
            return Err(Error::Domain(format!(
                "inner margin {margin} must be nonnegative and below half of each side"
            )));
        }
        Ok(Domain { xs, ys, margin, h: None })
    }

    /// Tensor grid refined around the given core coordinates: spacing
    /// `h_fine` within `half_width` of each focus (foci sit at cell
    /// centres), geometric growth by `growth` away from them, capped at `h_max`.
    #[allow(clippy::too_many_arguments)]
    pub fn graded(
        bounds: Rect,
        margin: f64,
        foci_x: &[f64],
        foci_y: &[f64],
        h_fine: f64,
        half_width: f64,
        growth: f64,
        h_max: f64,
    ) -> Result<Self> {
        if !(h_fine > 0.0 && h_fine <= h_max && growth > 1.0) {
            return Err(Error::Domain("invalid grading parameters".into()));
        }
        let xs = graded_axis(bounds.lower.x, bounds.upper.x, foci_x, h_fine, half_width, growth, h_max)?;
        let ys = graded_axis(bounds.lower.y, bounds.upper.y, foci_y, h_fine, half_width, growth, h_max)?;
        Domain::rectilinear(xs, ys, margin)
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }
    pub fn ny(&self) -> usize {
        self.ys.len()
    }
    pub fn cells_x(&self) -> usize {
        self.xs.len() - 1
    }
    pub fn cells_y(&self) -> usize {
        self.ys.len() - 1
    }
    pub fn node_count(&self) -> usize {
        self.nx() * self.ny()
    }
    pub fn cell_count(&self) -> usize {
        self.cells_x() * self.cells_y()
    }
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Spacing of a uniform grid, `None` for graded grids.
    pub fn spacing(&self) -> Option<f64> {
        self.h
    }

    pub fn is_uniform(&self) -> bool {
        self.h.is_some()
    }

    pub fn min_spacing(&self) -> f64 {
        self.xs.windows(2).chain(self.ys.windows(2)).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.xs.windows(2).chain(self.ys.windows(2)).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(Point::new(self.xs[0], self.ys[0]), Point::new(self.xs[self.nx() - 1], self.ys[self.ny() - 1]))
    }

    /// The compactly contained subdomain Ω′.
    pub fn inner(&self) -> Rect {
        let b = self.bounds();
        let m = Point::new(self.margin, self.margin);
        Rect::new(b.lower + m, b.upper - m)
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.xs[i], self.ys[j])
    }
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.cells_x() + i
    }
    pub fn dx(&self, i: usize) -> f64 {
        self.xs[i + 1] - self.xs[i]
    }
    pub fn dy(&self, j: usize) -> f64 {
        self.ys[j + 1] - self.ys[j]
    }
    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(0.5 * (self.xs[i] + self.xs[i + 1]), 0.5 * (self.ys[j] + self.ys[j + 1]))
    }
    pub fn cell_area(&self, i: usize, j: usize) -> f64 {
        self.dx(i) * self.dy(j)
    }
    pub fn cell_rect(&self, i: usize, j: usize) -> Rect {
        Rect::new(self.node(i, j), self.node(i + 1, j + 1))
    }

    /// Half-width of the dual cell around node coordinate `k` on an axis.
    fn dual_half(axis: &[f64], k: usize) -> (f64, f64) {
        let lo = if k > 0 { 0.5 * (axis[k] - axis[k - 1]) } else { 0.0 };
        let hi = if k + 1 < axis.len() { 0.5 * (axis[k + 1] - axis[k]) } else { 0.0 };
        (lo, hi)
    }

    /// Area of the dual (control-volume) cell of node `(i, j)`.
    pub fn dual_area(&self, i: usize, j: usize) -> f64 {
        let (a, b) = Self::dual_half(&self.xs, i);
        let (c, d) = Self::dual_half(&self.ys, j);
        (a + b) * (c + d)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.bounds().contains(p)
    }

    /// Index of the cell containing `p` (closed on the upper boundary).
    pub fn locate_cell(&self, p: Point) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let find = |axis: &[f64], v: f64| axis.partition_point(|&a| a <= v).saturating_sub(1).min(axis.len() - 2);
        Some((find(&self.xs, p.x), find(&self.ys, p.y)))
    }

    /// Centre of the cell containing `p`.
    pub fn snap_to_cell_center(&self, p: Point) -> Option<Point> {
        self.locate_cell(p).map(|(i, j)| self.cell_center(i, j))
    }

    /// Bilinear interpolation of nodal values.
    pub fn interpolate(&self, values: &[f64], p: Point) -> Option<f64> {
        let (i, j) = self.locate_cell(p)?;
        let tx = (p.x - self.xs[i]) / self.dx(i);
        let ty = (p.y - self.ys[j]) / self.dy(j);
        let v = |a, b| values[self.node_index(a, b)];
        Some(
            (1.0 - tx) * (1.0 - ty) * v(i, j)
                + tx * (1.0 - ty) * v(i + 1, j)
                + (1.0 - tx) * ty * v(i, j + 1)
                + tx * ty * v(i + 1, j + 1),
        )
    }

    pub fn same_grid(&self, o: &Domain) -> bool {
        self == o
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        let (nx, ny) = (self.nx() as u32, self.ny() as u32);
        let h = (0..ny).flat_map(move |j| (0..nx - 1).map(move |i| EdgeId { dir: EdgeDir::H, i, j }));
        let v = (0..ny - 1).flat_map(move |j| (0..nx).map(move |i| EdgeId { dir: EdgeDir::V, i, j }));
        h.chain(v)
    }

    /// Length of the dual segment crossing `e` (the ℋ¹ weight of a jump on `e`).
    pub fn dual_length(&self, e: EdgeId) -> f64 {
        let (a, b) = match e.dir {
            EdgeDir::H => Self::dual_half(&self.ys, e.j as usize),
            EdgeDir::V => Self::dual_half(&self.xs, e.i as usize),
        };
        a + b
    }

    pub fn edge_length(&self, e: EdgeId) -> f64 {
        match e.dir {
            EdgeDir::H => self.dx(e.i as usize),
            EdgeDir::V => self.dy(e.j as usize),
        }
    }

    pub fn edge_midpoint(&self, e: EdgeId) -> Point {
        let (i, j) = (e.i as usize, e.j as usize);
        match e.dir {
            EdgeDir::H => Point::new(0.5 * (self.xs[i] + self.xs[i + 1]), self.ys[j]),
            EdgeDir::V => Point::new(self.xs[i], 0.5 * (self.ys[j] + self.ys[j + 1])),
        }
    }

    /// End points of the dual segment of `e`.
    pub fn dual_segment(&self, e: EdgeId) -> (Point, Point) {
        let m = self.edge_midpoint(e);
        match e.dir {
            EdgeDir::H => {
                let (lo, hi) = Self::dual_half(&self.ys, e.j as usize);
                (Point::new(m.x, m.y - lo), Point::new(m.x, m.y + hi))
            }
            EdgeDir::V => {
                let (lo, hi) = Self::dual_half(&self.xs, e.i as usize);
                (Point::new(m.x - lo, m.y), Point::new(m.x + hi, m.y))
            }
        }
    }

    /// Cells adjacent to the dual segment of `e` (one on the boundary, else two).
    pub fn edge_cells(&self, e: EdgeId) -> Vec<(usize, usize)> {
        let (i, j) = (e.i as usize, e.j as usize);
        let mut out = Vec::with_capacity(2);
        match e.dir {
            EdgeDir::H => {
                if j > 0 {
                    out.push((i, j - 1));
                }
                if j < self.cells_y() {
                    out.push((i, j));
                }
            }
            EdgeDir::V => {
                if i > 0 {
                    out.push((i - 1, j));
                }
                if i < self.cells_x() {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Node coordinates on `[lo, hi]` refined around `foci` (see [`Domain::graded`]).
pub fn graded_axis(
    lo: f64,
    hi: f64,
    foci: &[f64],
    h_fine: f64,
    half_width: f64,
    growth: f64,
    h_max: f64,
) -> Result<Vec<f64>> {
    let mut centers: Vec<f64> = foci.to_vec();
    centers.sort_by(f64::total_cmp);
    centers.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let k = (half_width / h_fine).ceil().max(1.0) as i64;
    let reach = (k as f64 + 0.5) * h_fine;
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for &c in &centers {
        if c - reach <= lo || c + reach >= hi {
            return Err(Error::Domain(format!("refinement focus {c} too close to the domain edge")));
        }
        if let Some(prev) = blocks.last() {
            if c - reach <= *prev.last().unwrap() + h_fine {
                return Err(Error::Domain(format!("refinement foci closer than the fine band near {c}")));
            }
        }
        blocks.push((-k - 1..=k).map(|m| c + (m as f64 + 0.5) * h_fine).collect());
    }
    let mut out = vec![lo];
    let mut cursor = (lo, h_max);
    for b in blocks {
        out.extend(fill_gap(cursor.0, b[0], cursor.1, h_fine, growth, h_max));
        out.extend_from_slice(&b);
        cursor = (*b.last().unwrap(), h_fine);
    }
    out.extend(fill_gap(cursor.0, hi, cursor.1, h_max, growth, h_max));
    out.push(hi);
    Ok(out)
}

/// Interior nodes between `a` and `b` with spacings growing away from both ends.
fn fill_gap(a: f64, b: f64, sa: f64, sb: f64, g: f64, h_max: f64) -> Vec<f64> {
    let (mut xa, mut xb) = (a, b);
    let (mut da, mut db) = (sa, sb);
    let mut left = Vec::new();
    let mut right = Vec::new();
    loop {
        let na = (da * g).min(h_max);
        let nb = (db * g).min(h_max);
        if xb - xa <= na + nb {
            break;
        }
        if na <= nb {
            xa += na;
            left.push(xa);
            da = na;
        } else {
            xb -= nb;
            right.push(xb);
            db = nb;
        }
    }
    let rem = xb - xa;
    let s = (da * g).max(db * g).min(h_max);
    let m = (rem / s).ceil().max(1.0) as usize;
    left.extend((1..m).map(|q| xa + q as f64 * rem / m as f64));
    left.extend(right.into_iter().rev());
    left
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeDir {
    /// Joins `(i, j)` and `(i + 1, j)`.
    H,
    /// Joins `(i, j)` and `(i, j + 1)`.
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId {
    pub dir: EdgeDir,
    pub i: u32,
    pub j: u32,
}

impl EdgeId {
    pub fn h(i: usize, j: usize) -> Self {
        EdgeId { dir: EdgeDir::H, i: i as u32, j: j as u32 }
    }
    pub fn v(i: usize, j: usize) -> Self {
        EdgeId { dir: EdgeDir::V, i: i as u32, j: j as u32 }
    }

    /// The two node indices, in increasing coordinate order.
    pub fn nodes(&self) -> ((usize, usize), (usize, usize)) {
        let (i, j) = (self.i as usize, self.j as usize);
        match self.dir {
            EdgeDir::H => ((i, j), (i + 1, j)),
            EdgeDir::V => ((i, j), (i, j + 1)),
        }
    }

    /// Unit tangent of the dual segment, oriented as −ν^⊥ where ν points
    /// from the first node to the second.
    pub fn tangent(&self) -> Vec2 {
        match self.dir {
            EdgeDir::H => Point::new(0.0, -1.0),
            EdgeDir::V => Point::new(1.0, 0.0),
        }
    }
}

/// Nodal lifting φ with optionally declared one-sided jump amplitudes.
///
/// A declared amplitude overrides the raw nodal difference as the trace jump
/// across that edge; the remainder of the difference counts as gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGridField {
    domain: Domain,
    values: Vec<f64>,
    declared: BTreeMap<EdgeId, f64>,
}

impl ScalarGridField {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::Argument(format!(
                "expected {} nodal values, got {}",
                domain.node_count(),
                values.len()
            )));
        }
        Ok(ScalarGridField { domain, values, declared: BTreeMap::new() })
    }

    pub fn from_fn(domain: &Domain, f: impl Fn(Point) -> f64) -> Self {
        let mut values = Vec::with_capacity(domain.node_count());
        for j in 0..domain.ny() {
            for i in 0..domain.nx() {
                values.push(f(domain.node(i, j)));
            }
        }
        ScalarGridField { domain: domain.clone(), values, declared: BTreeMap::new() }
    }

    pub fn constant(domain: &Domain, c: f64) -> Self {
        Self::from_fn(domain, |_| c)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.domain.node_index(i, j)]
    }
    pub fn declared_jumps(&self) -> &BTreeMap<EdgeId, f64> {
        &self.declared
    }

    /// Declares the trace jump `φ⁺ − φ⁻` across `e`; a zero amplitude removes it.
    pub fn declare_jump(&mut self, e: EdgeId, amplitude: f64) {
        if amplitude == 0.0 {
            self.declared.remove(&e);
        } else {
            self.declared.insert(e, amplitude);
        }
    }

    pub fn edge_difference(&self, e: EdgeId) -> f64 {
        let (a, b) = e.nodes();
        self.value(b.0, b.1) - self.value(a.0, a.1)
    }

    /// Pointwise sum; declared amplitudes add up.
    pub fn add(&self, o: &ScalarGridField) -> Result<ScalarGridField> {
        if !self.domain.same_grid(&o.domain) {
            return Err(Error::Argument("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect();
        let mut out = ScalarGridField { domain: self.domain.clone(), values, declared: self.declared.clone() };
        for (&e, &amp) in &o.declared {
            let total = out.declared.get(&e).copied().unwrap_or(0.0) + amp;
            out.declare_jump(e, total);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> ScalarGridField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.declared.values_mut().for_each(|v| *v *= s);
        out.declared.retain(|_, v| *v != 0.0);
        out
    }
}

/// The branch of the polar angle with its cut on the downward ray, valued in (−π/2, 3π/2].
pub fn vortex_angle(p: Point) -> f64 {
    let t = p.y.atan2(p.x);
    if t < -0.5 * PI || (p.x == 0.0 && p.y < 0.0) {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Closed-form lifting `(z/2π)·ϑ(x − center)` of a degree-`z` vortex.
pub fn vortex_phase(x: Point, center: Point, z: i64) -> f64 {
    z as f64 * vortex_angle(x - center) / (2.0 * PI)
}

/// Lifting of a degree-`z` vortex. The centre is moved to the centre of the
/// cell containing it; the cut edges below it carry the declared amplitude −z.
pub fn canonical_vortex_lifting(domain: &Domain, center: Point, z: i64) -> Result<ScalarGridField> {
    vortex_superposition(domain, &[(center, z)])
}

/// Sum of canonical vortex liftings.
pub fn vortex_superposition(domain: &Domain, vortices: &[(Point, i64)]) -> Result<ScalarGridField> {
    let b = domain.bounds();
    let mut snapped = Vec::with_capacity(vortices.len());
    for &(c, z) in vortices {
        if z == 0 {
            return Err(Error::Argument("vortex degree must be nonzero".into()));
        }
        if !b.contains_strict(c) {
            return Err(Error::Domain(format!("vortex centre ({}, {}) is not inside the domain", c.x, c.y)));
        }
        snapped.push((domain.snap_to_cell_center(c).expect("inside"), z));
    }
    let mut field = ScalarGridField::from_fn(domain, |p| snapped.iter().map(|&(c, z)| vortex_phase(p, c, z)).sum());
    for &(c, z) in &snapped {
        let (ci, cj) = domain.locate_cell(c).expect("inside");
        for j in 0..=cj {
            let e = EdgeId::h(ci, j);
            let total = field.declared.get(&e).copied().unwrap_or(0.0) - z as f64;
            field.declare_jump(e, total);
        }
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEdge {
    pub edge: EdgeId,
    /// Trace jump φ⁺ − φ⁻ from the first node to the second.
    pub amplitude: f64,
    /// Dual length (ℋ¹ weight).
    pub length: f64,
    pub integer: bool,
}

impl JumpEdge {
    pub fn is_fractional(&self) -> bool {
        !self.integer
    }
}

/// Unit field `u = e^{2πiφ}` with its jump bookkeeping.
#[derive(Debug, Clone)]
pub struct S1GridField {
    lifting: ScalarGridField,
    jumps: Vec<JumpEdge>,
    unit: Vec<[f64; 2]>,
    /// Gradient part of each horizontal / vertical edge difference.
    inc_h: Vec<f64>,
    inc_v: Vec<f64>,
}

pub fn build_s1_field(lifting: ScalarGridField) -> S1GridField {
    let d = lifting.domain().clone();
    let unit = lifting
        .values()
        .iter()
        .map(|&p| {
            let (s, c) = (2.0 * PI * p).sin_cos();
            [c, s]
        })
        .collect();
    let mut inc_h = vec![0.0; d.cells_x() * d.ny()];
    let mut inc_v = vec![0.0; d.nx() * d.cells_y()];
    let mut jumps = Vec::new();
    for e in d.edges() {
        let raw = lifting.edge_difference(e);
        let declared = lifting.declared.get(&e).copied();
        let amplitude = match declared {
            Some(a) => Some(a),
            None if raw.abs() > JUMP_THRESHOLD => Some(raw),
            None => None,
        };
        let inc = raw - amplitude.unwrap_or(0.0);
        let (i, j) = (e.i as usize, e.j as usize);
        match e.dir {
            EdgeDir::H => inc_h[j * d.cells_x() + i] = inc,
            EdgeDir::V => inc_v[j * d.nx() + i] = inc,
        }
        if let Some(a) = amplitude {
            jumps.push(JumpEdge {
                edge: e,
                amplitude: a,
                length: d.dual_length(e),
                integer: (a - a.round()).abs() < INTEGER_TOL,
            });
        }
    }
    jumps.sort_by_key(|j| j.edge);
    S1GridField { lifting, jumps, unit, inc_h, inc_v }
}

impl S1GridField {
    pub fn domain(&self) -> &Domain {
        self.lifting.domain()
    }
    pub fn lifting(&self) -> &ScalarGridField {
        &self.lifting
    }
    pub fn jumps(&self) -> &[JumpEdge] {
        &self.jumps
    }
    pub fn fractional_jumps(&self) -> impl Iterator<Item = &JumpEdge> {
        self.jumps.iter().filter(|j| !j.integer)
    }
    pub fn unit(&self, i: usize, j: usize) -> [f64; 2] {
        self.unit[self.domain().node_index(i, j)]
    }
    pub fn units(&self) -> &[[f64; 2]] {
        &self.unit
    }

    /// ℋ¹(S_u): total dual length of the fractional jump edges.
    pub fn jump_length(&self) -> f64 {
        self.fractional_jumps().fold(0.0, |s, j| s + j.length)
    }

    /// ℋ¹(S_φ): total dual length of all jump edges of the lifting.
    pub fn lifting_jump_length(&self) -> f64 {
        self.jumps.iter().map(|j| j.length).sum()
    }

    /// Gradient part of the lifting difference along `e`.
    pub fn increment(&self, e: EdgeId) -> f64 {
        let d = self.domain();
        let (i, j) = (e.i as usize, e.j as usize);
        match e.dir {
            EdgeDir::H => self.inc_h[j * d.cells_x() + i],
            EdgeDir::V => self.inc_v[j * d.nx() + i],
        }
    }

    /// Approximate gradient of the lifting on cell `(i, j)`.
    pub fn cell_gradient(&self, i: usize, j: usize) -> Vec2 {
        let d = self.domain();
        let cx = d.cells_x();
        let gx = 0.5 * (self.inc_h[j * cx + i] + self.inc_h[(j + 1) * cx + i]) / d.dx(i);
        let gy = 0.5 * (self.inc_v[j * d.nx() + i] + self.inc_v[j * d.nx() + i + 1]) / d.dy(j);
        Point::new(gx, gy)
    }

    /// Lifting value at the centre of cell `(i, j)`, continued from the
    /// lower-left node through gradient increments only.
    pub fn cell_center_phase(&self, i: usize, j: usize) -> f64 {
        let d = self.domain();
        let cx = d.cells_x();
        let a = self.inc_h[j * cx + i];
        let b = self.inc_v[j * d.nx() + i];
        let c = self.inc_h[(j + 1) * cx + i];
        let e = self.inc_v[j * d.nx() + i + 1];
        // Corners reached along the cell boundary; the far corner is averaged over both paths.
        self.lifting.value(i, j) + 0.25 * (a + b + 0.5 * ((b + c) + (a + e)))
    }

    /// Bilinear interpolation of `u` renormalised to the unit circle; `None`
    /// outside the domain or where the interpolant nearly vanishes.
    pub fn interpolate_unit(&self, p: Point) -> Option<[f64; 2]> {
        let d = self.domain();
        let (i, j) = d.locate_cell(p)?;
        let tx = (p.x - d.xs()[i]) / d.dx(i);
        let ty = (p.y - d.ys()[j]) / d.dy(j);
        let w = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
        let n = [self.unit(i, j), self.unit(i + 1, j), self.unit(i, j + 1), self.unit(i + 1, j + 1)];
        let mut v = [0.0; 2];
        for k in 0..4 {
            v[0] += w[k] * n[k][0];
            v[1] += w[k] * n[k][1];
        }
        let len = v[0].hypot(v[1]);
        (len > 1e-3).then(|| [v[0] / len, v[1] / len])
    }
}

/// Per-cell planar vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGridField {
    domain: Domain,
    values: Vec<Vec2>,
}

impl VectorGridField {
    pub fn new(domain: Domain, values: Vec<Vec2>) -> Result<Self> {
        if values.len() != domain.cell_count() {
            return Err(Error::Argument(format!(
                "expected {} cell vectors, got {}",
                domain.cell_count(),
                values.len()
            )));
        }
        Ok(VectorGridField { domain, values })
    }

    pub fn zeros(domain: &Domain) -> Self {
        VectorGridField { domain: domain.clone(), values: vec![Point::ZERO; domain.cell_count()] }
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(domain: &Domain, f: impl Fn(Point) -> Vec2) -> Self {
        let mut values = Vec::with_capacity(domain.cell_count());
        for j in 0..domain.cells_y() {
            for i in 0..domain.cells_x() {
                values.push(f(domain.cell_center(i, j)));
            }
        }
        VectorGridField { domain: domain.clone(), values }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn values(&self) -> &[Vec2] {
        &self.values
    }
    pub fn get(&self, i: usize, j: usize) -> Vec2 {
        self.values[self.domain.cell_index(i, j)]
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Self {
        VectorGridField { domain: self.domain.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, o: &Self, f: impl Fn(Vec2, Vec2) -> Vec2) -> Result<Self> {
        if !self.domain.same_grid(&o.domain) {
            return Err(Error::Argument("vector fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(VectorGridField { domain: self.domain.clone(), values })
    }

    /// Midpoint-rule integral of `g(center, value)` over the cells.
    pub fn integrate(&self, g: impl Fn(Point, Vec2) -> f64) -> f64 {
        let d = &self.domain;
        let mut acc = 0.0;
        for j in 0..d.cells_y() {
            for i in 0..d.cells_x() {
                acc += g(d.cell_center(i, j), self.get(i, j)) * d.cell_area(i, j);
            }
        }
        acc
    }

    /// ∫|v|².
    pub fn l2_norm_sq(&self) -> f64 {
        self.integrate(|_, v| v.norm_sq())
    }

    /// ∫|v|.
    pub fn l1_norm(&self) -> f64 {
        self.integrate(|_, v| v.norm())
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Bilinear interpolation between cell centres, constant extension near the boundary.
    pub fn sample(&self, p: Point) -> Vec2 {
        let d = &self.domain;
        let locate = |axis: &[f64], v: f64| -> (usize, usize, f64) {
            let n = axis.len() - 1;
            let mid = |k: usize| 0.5 * (axis[k] + axis[k + 1]);
            if v <= mid(0) {
                return (0, 0, 0.0);
            }
            if v >= mid(n - 1) {
                return (n - 1, n - 1, 0.0);
            }
            // Largest k with mid(k) <= v.
            let k = axis.partition_point(|&a| a <= v).saturating_sub(1).min(n - 1);
            let k = if mid(k) > v { k - 1 } else { k };
            let t = (v - mid(k)) / (mid(k + 1) - mid(k));
            (k, k + 1, t)
        };
        let (i0, i1, tx) = locate(d.xs(), p.x);
        let (j0, j1, ty) = locate(d.ys(), p.y);
        self.get(i0, j0) * ((1.0 - tx) * (1.0 - ty))
            + self.get(i1, j0) * (tx * (1.0 - ty))
            + self.get(i0, j1) * ((1.0 - tx) * ty)
            + self.get(i1, j1) * (tx * ty)
    }
}

/// Per-cell approximate gradient of the lifting (jump parts removed).
pub fn approximate_gradient(field: &S1GridField) -> VectorGridField {
    let d = field.domain();
    let mut values = Vec::with_capacity(d.cell_count());
    for j in 0..d.cells_y() {
        for i in 0..d.cells_x() {
            values.push(field.cell_gradient(i, j));
        }
    }
    VectorGridField { domain: d.clone(), values }
}

/// Writes a uniform-grid lifting in the `vortexlab-field v1` text format.
pub fn write_dump<W: Write>(field: &ScalarGridField, mut w: W) -> Result<()> {
    let d = field.domain();
    let h = d.spacing().ok_or_else(|| Error::Argument("the dump format only describes uniform grids".into()))?;
    let b = d.bounds();
    writeln!(w, "vortexlab-field v1 {} {} {:.16e} {:.16e} {:.16e}", d.nx(), d.ny(), h, b.lower.x, b.lower.y)?;
    for v in field.values() {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

/// Reads a lifting written by [`write_dump`]; the inner margin is not part of the format.
pub fn read_dump<R: BufRead>(r: R, margin: f64) -> Result<ScalarGridField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Argument("empty field dump".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 7 || parts[0] != "vortexlab-field" || parts[1] != "v1" {
        return Err(Error::Argument(format!("bad field dump header: {header}")));
    }
    let bad = |what: &str| Error::Argument(format!("bad field dump header field {what}"));
    let nx: usize = parts[2].parse().map_err(|_| bad("nx"))?;
    let ny: usize = parts[3].parse().map_err(|_| bad("ny"))?;
    let h: f64 = parts[4].parse().map_err(|_| bad("h"))?;
    let x0: f64 = parts[5].parse().map_err(|_| bad("x0"))?;
    let y0: f64 = parts[6].parse().map_err(|_| bad("y0"))?;
    if nx < 2 || ny < 2 {
        return Err(bad("nx/ny"));
    }
    let lower = Point::new(x0, y0);
    let upper = Point::new(x0 + (nx - 1) as f64 * h, y0 + (ny - 1) as f64 * h);
    let domain = Domain::uniform(lower, upper, h, margin)?;
    let mut values = Vec::with_capacity(nx * ny);
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(t.parse::<f64>().map_err(|_| Error::Argument(format!("bad nodal value {t}")))?);
    }
    ScalarGridField::new(domain, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(h: f64) -> Domain {
        Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), h, 0.1).unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::uniform(Point::ZERO, Point::new(1.0, 1.0), 0.3, 0.0).is_err());
        assert!(Domain::uniform(Point::ZERO, Point::new(1.0, 1.0), 0.25, 0.5).is_err());
        assert!(Domain::uniform(Point::ZERO, Point::new(1.0, 1.0), -0.1, 0.0).is_err());
        let d = unit_square(0.25);
        assert_eq!((d.nx(), d.ny(), d.cell_count()), (5, 5, 16));
        assert_eq!(d.spacing(), Some(0.25));
    }

    #[test]
    fn vortex_phase_examples() {
        assert_eq!(vortex_phase(Point::new(1.0, 0.0), Point::ZERO, 1), 0.0);
        assert!((vortex_phase(Point::new(0.0, 1.0), Point::ZERO, 1) - 0.25).abs() < 1e-15);
        assert!((vortex_phase(Point::new(-1.0, 0.0), Point::ZERO, -2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_vortex_errors() {
        let d = unit_square(0.125);
        assert!(matches!(canonical_vortex_lifting(&d, Point::new(0.5, 0.5), 0), Err(Error::Argument(_))));
        assert!(matches!(canonical_vortex_lifting(&d, Point::new(1.0, 0.5), 1), Err(Error::Domain(_))));
        assert!(matches!(canonical_vortex_lifting(&d, Point::new(1.5, 0.5), 1), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_field_has_no_jumps() {
        let d = unit_square(0.1);
        let f = build_s1_field(ScalarGridField::constant(&d, 0.3));
        assert!(f.jumps().is_empty());
        let (s, c) = (0.6 * PI).sin_cos();
        for u in f.units() {
            assert!((u[0] - c).abs() < 1e-15 && (u[1] - s).abs() < 1e-15);
        }
        assert!(approximate_gradient(&f).values().iter().all(|v| *v == Point::ZERO));
    }

    #[test]
    fn vortex_jumps_lie_on_the_cut_ray() {
        let d = unit_square(1.0 / 64.0);
        let lift = canonical_vortex_lifting(&d, Point::new(0.5, 0.5), 1).unwrap();
        let c = d.snap_to_cell_center(Point::new(0.5, 0.5)).unwrap();
        let f = build_s1_field(lift);
        assert!(!f.jumps().is_empty());
        for jmp in f.jumps() {
            assert_eq!(jmp.edge.dir, EdgeDir::H);
            let m = d.edge_midpoint(jmp.edge);
            assert!((m.x - c.x).abs() < 1e-12 && m.y < c.y);
            assert!(jmp.integer);
            assert_eq!(jmp.amplitude, -1.0);
        }
        assert_eq!(f.jumps().len(), 33);
        // The unit field itself does not jump.
        assert_eq!(f.fractional_jumps().count(), 0);
        assert!(f.lifting_jump_length() > 0.0);
    }

    #[test]
    fn step_field_fractional_jumps() {
        let d = Domain::uniform(Point::new(-0.5, -0.5), Point::new(0.5, 0.5), 0.1, 0.0).unwrap();
        let f = build_s1_field(ScalarGridField::from_fn(&d, |p| if p.x > 1e-9 { 0.6 } else { 0.0 }));
        assert_eq!(f.jumps().len(), d.ny());
        for jmp in f.jumps() {
            let m = d.edge_midpoint(jmp.edge);
            assert!((m.x - 0.05).abs() < 1e-12);
            assert!((jmp.amplitude - 0.6).abs() < 1e-15);
            assert!(!jmp.integer);
        }
        assert!(approximate_gradient(&f).values().iter().all(|v| *v == Point::ZERO));
    }

    #[test]
    fn linear_lifting_gradient_exact() {
        let d = unit_square(1.0 / 32.0);
        let a = Point::new(0.37, -0.21);
        let f = build_s1_field(ScalarGridField::from_fn(&d, |p| a.dot(p)));
        for g in approximate_gradient(&f).values() {
            assert!((*g - a).norm() < 1e-12);
        }
    }

    #[test]
    fn vortex_gradient_magnitude() {
        let h = 1.0 / 128.0;
        let d = Domain::uniform(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), h, 0.0).unwrap();
        let f = build_s1_field(canonical_vortex_lifting(&d, Point::ZERO, 1).unwrap());
        let c = d.snap_to_cell_center(Point::ZERO).unwrap();
        let g = approximate_gradient(&f);
        let mut checked = 0;
        for j in 0..d.cells_y() {
            for i in 0..d.cells_x() {
                let v = g.get(i, j);
                assert!(v.x.is_finite() && v.y.is_finite());
                let r = d.cell_center(i, j).dist(c);
                if (r - 0.5).abs() < h {
                    let exact = 1.0 / (2.0 * PI * r);
                    assert!((v.norm() - exact).abs() / exact < 2.0 * h / 0.5);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn jump_detection_idempotent() {
        let d = unit_square(1.0 / 40.0);
        let lift = vortex_superposition(&d, &[(Point::new(0.3, 0.3), 1), (Point::new(0.7, 0.6), -2)]).unwrap();
        let a = build_s1_field(lift.clone());
        let b = build_s1_field(a.lifting().clone());
        assert_eq!(a.jumps(), b.jumps());
        assert_eq!(build_s1_field(lift).jumps(), a.jumps());
    }

    #[test]
    fn opposite_cuts_cancel() {
        let d = unit_square(1.0 / 32.0);
        let lift = vortex_superposition(&d, &[(Point::new(0.5, 0.3), 1), (Point::new(0.5, 0.7), -1)]).unwrap();
        let f = build_s1_field(lift);
        // Only the segment between the two cores keeps a cut.
        for jmp in f.jumps() {
            let m = d.edge_midpoint(jmp.edge);
            assert!(m.y > 0.3 && m.y < 0.7, "{m:?}");
        }
    }

    #[test]
    fn graded_axis_is_refined_and_centered() {
        let xs = graded_axis(0.0, 1.0, &[0.3, 0.7], 1e-3, 4e-3, 1.2, 0.02).unwrap();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(xs[0], 0.0);
        assert_eq!(*xs.last().unwrap(), 1.0);
        for c in [0.3, 0.7] {
            let k = xs.partition_point(|&x| x < c);
            assert!((xs[k] - c - 5e-4).abs() < 1e-12 && (c - xs[k - 1] - 5e-4).abs() < 1e-12);
        }
        let max = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(max <= 0.02 + 1e-12);
        for w in xs.windows(3) {
            let r = (w[2] - w[1]) / (w[1] - w[0]);
            assert!(r < 2.5 && r > 0.4, "ratio {r}");
        }
    }

    #[test]
    fn dump_round_trip() {
        let d = Domain::uniform(Point::new(-0.5, 0.25), Point::new(0.5, 0.75), 0.125, 0.0).unwrap();
        let f = ScalarGridField::from_fn(&d, |p| (3.0 * p.x).sin() + p.y / 3.0);
        let mut buf = Vec::new();
        write_dump(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vortexlab-field v1 9 5 "));
        let g = read_dump(std::io::Cursor::new(buf), 0.0).unwrap();
        assert_eq!(f.values(), g.values());
        assert_eq!(g.domain(), f.domain());
    }

    #[test]
    fn vector_sample_reproduces_linear_fields() {
        let d = unit_square(0.05);
        let v = VectorGridField::from_fn(&d, |p| Point::new(2.0 * p.x - p.y, p.y + 0.5));
        let p = Point::new(0.4321, 0.6789);
        let s = v.sample(p);
        assert!((s - Point::new(2.0 * p.x - p.y, p.y + 0.5)).norm() < 1e-12);
    }
}
