//! Atomic and piecewise-constant measures, flat norms and H⁻¹ norms.

mod oracle;

pub use oracle::{flat_norm_lp_oracle, flat_norm_lp_oracle_in, OracleSolution};

use crate::error::{Error, Result};
use crate::flow::MinCostFlow;
use crate::geometry::{Point, Rect};
use crate::grid_field::{Domain, ScalarGridField};
use crate::poisson::{density_loads, nodal_dirichlet_norm, solve_node_dirichlet};
use rayon::prelude::*;
use std::io::{BufRead, Write};

/// Real weights are transported in integer units of this size.
pub const WEIGHT_QUANTUM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: Point,
    pub weight: f64,
}

/// Σ z_i δ_{x_i}; zero weights are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: impl IntoIterator<Item = (Point, f64)>) -> Self {
        AtomicMeasure {
            atoms: atoms
                .into_iter()
                .filter(|&(_, w)| w != 0.0)
                .map(|(position, weight)| Atom { position, weight })
                .collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.atoms.iter().map(|a| (a.position, a.weight * s)))
    }

    pub fn negate(&self) -> Self {
        self.scale(-1.0)
    }

    /// Concatenation (the sum of the two measures).
    pub fn plus(&self, o: &Self) -> Self {
        Self::new(self.atoms.iter().chain(&o.atoms).map(|a| (a.position, a.weight)))
    }

    pub fn is_integral(&self) -> bool {
        self.atoms.iter().all(|a| a.weight.fract() == 0.0)
    }

    /// μ(B̄_r(c)).
    pub fn mass_in_ball(&self, c: Point, r: f64) -> f64 {
        self.atoms.iter().filter(|a| a.position.dist(c) <= r).map(|a| a.weight).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,weight")?;
        for a in &self.atoms {
            writeln!(w, "{},{},{}", a.position.x, a.position.y, a.weight)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut atoms = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let v = parse_row(&line, 3)?;
            atoms.push((Point::new(v[0], v[1]), v[2]));
        }
        Ok(Self::new(atoms))
    }
}

fn parse_row(line: &str, n: usize) -> Result<Vec<f64>> {
    let v: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(Error::Argument(format!("bad CSV row: {line}"))),
    }
}

/// |μ|(Ω) = Σ|z_i|.
pub fn total_variation(mu: &AtomicMeasure) -> f64 {
    mu.atoms.iter().map(|a| a.weight.abs()).sum()
}

/// Union of cells of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMask {
    domain: Domain,
    cells: Vec<bool>,
}

impl CellMask {
    pub fn new(domain: Domain, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != domain.cell_count() {
            return Err(Error::Argument("mask size does not match the cell count".into()));
        }
        Ok(CellMask { domain, cells })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cell(&self, i: usize, j: usize) -> bool {
        self.cells[self.domain.cell_index(i, j)]
    }

    fn members(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cx = self.domain.cells_x();
        self.cells.iter().enumerate().filter(|(_, &b)| b).map(move |(k, _)| (k % cx, k / cx))
    }

    /// Whether the closed rectangle lies in the interior of the union of cells.
    pub fn contains_closed_rect(&self, r: &Rect) -> bool {
        let d = &self.domain;
        if !d.bounds().contains_strict(r.lower) || !d.bounds().contains_strict(r.upper) {
            return false;
        }
        let range = |axis: &[f64], lo: f64, hi: f64| {
            let a = axis.partition_point(|&v| v < lo).saturating_sub(1);
            let b = axis.partition_point(|&v| v <= hi).min(axis.len() - 1);
            (a, b)
        };
        let (i0, i1) = range(d.xs(), r.lower.x, r.upper.x);
        let (j0, j1) = range(d.ys(), r.lower.y, r.upper.y);
        (j0..j1).all(|j| (i0..i1).all(|i| self.cell(i, j)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PieceRegion {
    Rect(Rect),
    Mask(CellMask),
}

impl PieceRegion {
    pub fn area(&self) -> f64 {
        match self {
            PieceRegion::Rect(r) => r.area(),
            PieceRegion::Mask(m) => m.members().map(|(i, j)| m.domain.cell_area(i, j)).sum(),
        }
    }

    pub fn overlap(&self, rect: &Rect) -> f64 {
        match self {
            PieceRegion::Rect(r) => r.intersection(rect).map_or(0.0, |x| x.area()),
            PieceRegion::Mask(m) => {
                m.members().filter_map(|(i, j)| m.domain.cell_rect(i, j).intersection(rect)).map(|x| x.area()).sum()
            }
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            PieceRegion::Rect(r) => r.perimeter(),
            PieceRegion::Mask(m) => {
                let d = &m.domain;
                let inside = |i: isize, j: isize| {
                    i >= 0
                        && j >= 0
                        && (i as usize) < d.cells_x()
                        && (j as usize) < d.cells_y()
                        && m.cell(i as usize, j as usize)
                };
                let mut p = 0.0;
                for (i, j) in m.members() {
                    let (a, b) = (i as isize, j as isize);
                    if !inside(a - 1, b) {
                        p += d.dy(j);
                    }
                    if !inside(a + 1, b) {
                        p += d.dy(j);
                    }
                    if !inside(a, b - 1) {
                        p += d.dx(i);
                    }
                    if !inside(a, b + 1) {
                        p += d.dx(i);
                    }
                }
                p
            }
        }
    }

    pub fn bounding_box(&self) -> Rect {
        match self {
            PieceRegion::Rect(r) => *r,
            PieceRegion::Mask(m) => {
                let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for (i, j) in m.members() {
                    let c = m.domain.cell_rect(i, j);
                    lo = Point::new(lo.x.min(c.lower.x), lo.y.min(c.lower.y));
                    hi = Point::new(hi.x.max(c.upper.x), hi.y.max(c.upper.y));
                }
                Rect::new(lo, hi)
            }
        }
    }

    /// Radius of the largest inscribed square's half-side (rectangles) or a
    /// cell-count estimate of it (masks).
    pub fn inradius(&self) -> f64 {
        match self {
            PieceRegion::Rect(r) => r.inradius(),
            PieceRegion::Mask(m) => {
                let bb = self.bounding_box();
                let mut best = 0.0f64;
                for (i, j) in m.members() {
                    let c = m.domain.cell_center(i, j);
                    let mut lo = 0.0;
                    let mut hi = bb.inradius().max(m.domain.max_spacing());
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        let sq = Rect::new(c - Point::new(mid, mid), c + Point::new(mid, mid));
                        if m.contains_closed_rect(&sq) {
                            lo = mid
                        } else {
                            hi = mid
                        }
                    }
                    best = best.max(lo);
                }
                best
            }
        }
    }

    /// Whether the closed square of half-side `r` at `z` lies in the open region.
    pub fn contains_closed_square(&self, z: Point, r: f64) -> bool {
        let tol = 1e-12 * (1.0 + z.x.abs().max(z.y.abs()));
        match self {
            PieceRegion::Rect(rect) => {
                z.x - r > rect.lower.x + tol
                    && z.x + r < rect.upper.x - tol
                    && z.y - r > rect.lower.y + tol
                    && z.y + r < rect.upper.y - tol
            }
            PieceRegion::Mask(m) => m.contains_closed_rect(&Rect::new(z - Point::new(r, r), z + Point::new(r, r))),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            PieceRegion::Rect(r) => r.contains_strict(p),
            PieceRegion::Mask(m) => m.domain.locate_cell(p).is_some_and(|(i, j)| m.cell(i, j)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub region: PieceRegion,
    pub level: f64,
}

/// Σ m^l χ_{ω^l}.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseDensity {
    pieces: Vec<Piece>,
}

impl PiecewiseDensity {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        for p in &pieces {
            if !(p.region.area() > 0.0) {
                return Err(Error::Argument("density pieces need positive area".into()));
            }
            if !p.level.is_finite() {
                return Err(Error::Argument("density levels must be finite".into()));
            }
        }
        for (k, a) in pieces.iter().enumerate() {
            for b in &pieces[k + 1..] {
                let overlap = match (&a.region, &b.region) {
                    (PieceRegion::Rect(r), other) | (other, PieceRegion::Rect(r)) => other.overlap(r),
                    (PieceRegion::Mask(m), other) => {
                        m.members().map(|(i, j)| other.overlap(&m.domain.cell_rect(i, j))).sum()
                    }
                };
                if overlap > 1e-12 {
                    return Err(Error::Argument("density pieces overlap".into()));
                }
            }
        }
        Ok(PiecewiseDensity { pieces })
    }

    pub fn rects(rects: &[(Rect, f64)]) -> Result<Self> {
        Self::new(rects.iter().map(|&(r, level)| Piece { region: PieceRegion::Rect(r), level }).collect())
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// |μ|(Ω) = Σ|m^l||ω^l|.
    pub fn total_variation(&self) -> f64 {
        self.pieces.iter().map(|p| p.level.abs() * p.region.area()).sum()
    }

    pub fn density_at(&self, p: Point) -> f64 {
        self.pieces.iter().filter(|q| q.region.contains(p)).map(|q| q.level).sum()
    }

    /// μ(rect), exact.
    pub fn mass_in_rect(&self, rect: &Rect) -> f64 {
        self.pieces.iter().map(|p| p.level * p.region.overlap(rect)).sum()
    }

    /// Midpoint quadrature on a grid of spacing `h_q` anchored at each
    /// piece's lower-left corner; atoms sit at the centroids of the
    /// clipped quadrature cells.
    pub fn atomize(&self, h_q: f64) -> AtomicMeasure {
        let mut atoms = Vec::new();
        for p in self.pieces.iter().filter(|p| p.level != 0.0) {
            let bb = p.region.bounding_box();
            let nx = (bb.width() / h_q).ceil().max(1.0) as usize;
            let ny = (bb.height() / h_q).ceil().max(1.0) as usize;
            for j in 0..ny {
                for i in 0..nx {
                    let lo = bb.lower + Point::new(i as f64 * h_q, j as f64 * h_q);
                    let hi = Point::new((lo.x + h_q).min(bb.upper.x), (lo.y + h_q).min(bb.upper.y));
                    let cell = Rect::new(lo, hi);
                    let area = p.region.overlap(&cell);
                    if area > 0.0 {
                        let c = match &p.region {
                            PieceRegion::Rect(r) => {
                                let x = r.intersection(&cell).expect("positive overlap");
                                (x.lower + x.upper) * 0.5
                            }
                            PieceRegion::Mask(_) => (cell.lower + cell.upper) * 0.5,
                        };
                        atoms.push((c, p.level * area));
                    }
                }
            }
        }
        AtomicMeasure::new(atoms)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x0,y0,x1,y1,level")?;
        for p in &self.pieces {
            match &p.region {
                PieceRegion::Rect(r) => {
                    writeln!(w, "{},{},{},{},{}", r.lower.x, r.lower.y, r.upper.x, r.upper.y, p.level)?
                }
                PieceRegion::Mask(m) => {
                    for (i, j) in m.members() {
                        let r = m.domain.cell_rect(i, j);
                        writeln!(w, "{},{},{},{},{}", r.lower.x, r.lower.y, r.upper.x, r.upper.y, p.level)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rects = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let v = parse_row(&line, 5)?;
            rects.push((Rect::new(Point::new(v[0], v[1]), Point::new(v[2], v[3])), v[4]));
        }
        Self::rects(&rects)
    }
}

/// Which C^{0,1} norm bounds the flat-norm test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestNorm {
    /// ‖φ‖∞ + Lip(φ) ≤ 1.
    #[default]
    Combined,
    /// max(‖φ‖∞, Lip(φ)) ≤ 1.
    Max,
}

impl TestNorm {
    /// (sup bound, Lipschitz bound) for splitting parameter `s`.
    pub fn bounds(self, s: f64) -> (f64, f64) {
        match self {
            TestNorm::Combined => (1.0 - s, s),
            TestNorm::Max => (1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatNorm {
    pub value: f64,
    /// Optimal splitting: Lipschitz bound of the maximising test function.
    pub split: f64,
}

fn check_atoms_inside(mu: &AtomicMeasure, bounds: &Rect) -> Result<()> {
    for a in mu.atoms() {
        if !bounds.contains_strict(a.position) {
            return Err(Error::Argument(format!(
                "atom at ({}, {}) is not strictly inside the domain",
                a.position.x, a.position.y
            )));
        }
    }
    Ok(())
}

struct Transport {
    pos: Vec<(Point, i64, f64)>,
    neg: Vec<(Point, i64, f64)>,
}

impl Transport {
    fn new(mu: &AtomicMeasure, bounds: &Rect) -> Self {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for a in mu.atoms() {
            let q = (a.weight / WEIGHT_QUANTUM).round() as i64;
            let item = (a.position, q.abs(), bounds.boundary_distance(a.position));
            match q.cmp(&0) {
                std::cmp::Ordering::Greater => pos.push(item),
                std::cmp::Ordering::Less => neg.push(item),
                std::cmp::Ordering::Equal => {}
            }
        }
        Transport { pos, neg }
    }

    /// Min-cost transport with pairing cost `lip·d` and absorption cost
    /// `min(sup, lip·d(x, ∂Ω))`, in weight units.
    fn value(&self, sup: f64, lip: f64) -> f64 {
        self.value_pruned(sup, lip, 8)
    }

    fn value_pruned(&self, sup: f64, lip: f64, k0: usize) -> f64 {
        self.solve(sup, lip, k0).0
    }

    /// Optimal cost together with its split `cost = sup·A + lip·B`: A is the
    /// mass absorbed at the sup bound, B the distance-weighted rest.
    fn solve(&self, sup: f64, lip: f64, k0: usize) -> (f64, f64, f64) {
        let (np, nn) = (self.pos.len(), self.neg.len());
        if np + nn == 0 {
            return (0.0, 0.0, 0.0);
        }
        // Absorption cost min(sup, lip·d) with the channel it uses.
        let absorb = |d: f64| if sup <= lip * d { (sup, None) } else { (lip * d, Some(d)) };
        let cp: Vec<(f64, Option<f64>)> = self.pos.iter().map(|a| absorb(a.2)).collect();
        let cn: Vec<(f64, Option<f64>)> = self.neg.iter().map(|a| absorb(a.2)).collect();
        // Candidate pairing arcs: a few nearest opposite atoms, grown on demand
        // until the dual potentials certify optimality over all pairs.
        let mut active = vec![Vec::<usize>::new(); np];
        for i in 0..np {
            let mut order: Vec<usize> = (0..nn).collect();
            order.sort_by(|&a, &b| self.pos[i].0.dist(self.neg[a].0).total_cmp(&self.pos[i].0.dist(self.neg[b].0)));
            active[i] = order.into_iter().take(k0).collect();
        }
        for j in 0..nn {
            let mut best: Vec<usize> = (0..np).collect();
            best.sort_by(|&a, &b| self.neg[j].0.dist(self.pos[a].0).total_cmp(&self.neg[j].0.dist(self.pos[b].0)));
            for &i in best.iter().take(k0) {
                if !active[i].contains(&j) {
                    active[i].push(j);
                }
            }
        }
        let total_p: i64 = self.pos.iter().map(|a| a.1).sum();
        let total_n: i64 = self.neg.iter().map(|a| a.1).sum();
        let inf = total_p + total_n + 1;
        loop {
            // Nodes: 0 = source, 1 = sink, 2 = ground, then positives, then negatives.
            let mut g = MinCostFlow::new(3 + np + nn);
            let (s, t, gr) = (0, 1, 2);
            // (arc id, channel) for every arc that carries cost.
            let mut priced: Vec<(usize, Option<f64>)> = Vec::new();
            for (i, a) in self.pos.iter().enumerate() {
                g.add_arc(s, 3 + i, a.1, 0.0);
                priced.push((g.add_arc(3 + i, gr, inf, cp[i].0), cp[i].1));
                for &j in &active[i] {
                    let d = a.0.dist(self.neg[j].0);
                    if lip * d < cp[i].0 + cn[j].0 {
                        priced.push((g.add_arc(3 + i, 3 + np + j, inf, lip * d), Some(d)));
                    }
                }
            }
            for (j, a) in self.neg.iter().enumerate() {
                g.add_arc(3 + np + j, t, a.1, 0.0);
                priced.push((g.add_arc(gr, 3 + np + j, inf, cn[j].0), cn[j].1));
            }
            if total_n > total_p {
                g.add_arc(s, gr, total_n - total_p, 0.0);
            } else if total_p > total_n {
                g.add_arc(gr, t, total_p - total_n, 0.0);
            }
            let (_, cost) = g.run(s, t, total_p.max(total_n));
            let d = g.residual_potentials();
            let mut grew = false;
            for i in 0..np {
                for j in 0..nn {
                    let c = lip * self.pos[i].0.dist(self.neg[j].0);
                    let reduced = c + d[3 + i] - d[3 + np + j];
                    if reduced < -1e-12 * (1.0 + c) && !active[i].contains(&j) {
                        active[i].push(j);
                        grew = true;
                    }
                }
            }
            if !grew {
                let (mut a_part, mut b_part) = (0.0, 0.0);
                for &(id, channel) in &priced {
                    let f = g.flow(id) as f64;
                    match channel {
                        None => a_part += f,
                        Some(dist) => b_part += f * dist,
                    }
                }
                return (cost * WEIGHT_QUANTUM, a_part * WEIGHT_QUANTUM, b_part * WEIGHT_QUANTUM);
            }
        }
    }

    /// max over s ∈ [0, 1] of V(s) = transport value at (sup, lip) = (1 − s, s).
    /// V is the minimum of the lines (1 − s)A + sB over transport plans, so
    /// intersecting the supporting lines at the bracket ends converges after
    /// finitely many evaluations.
    fn combined(&self) -> (f64, f64) {
        // Supporting line of the optimal plan at s: intercept A, slope B − A.
        let eval = |s: f64| {
            let (v, a, b) = self.solve(1.0 - s, s, 8);
            (v, a, b - a)
        };
        let (v0, a0, g0) = eval(0.0);
        if g0 <= 0.0 {
            return (0.0, v0);
        }
        let (v1, a1, g1) = eval(1.0);
        if g1 >= 0.0 {
            return (1.0, v1);
        }
        let (mut lo, mut hi) = ((0.0, a0, g0), (1.0, a1, g1));
        let mut best = if v0 >= v1 { (0.0, v0) } else { (1.0, v1) };
        for _ in 0..100 {
            let s = ((hi.1 - lo.1) / (lo.2 - hi.2)).clamp(lo.0, hi.0);
            let bound = lo.1 + s * lo.2;
            let (v, a, g) = eval(s);
            if v > best.1 {
                best = (s, v);
            }
            if bound - v <= 1e-12 * (1.0 + bound.abs()) || g == 0.0 {
                break;
            }
            if g > 0.0 {
                lo = (s, a, g);
            } else {
                hi = (s, a, g);
            }
        }
        best
    }
}

/// Chebyshev points of the first kind mapped to [0, 1].
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.5 * (1.0 - ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())).collect()
}

/// Maximises a concave function on [0, 1]: sampling, then golden-section
/// search in the bracket around the best sample.
pub(crate) fn maximize_concave(samples: &[f64], f: impl Fn(f64) -> f64 + Sync) -> (f64, f64) {
    let mut pts: Vec<f64> = samples.to_vec();
    pts.push(0.0);
    pts.push(1.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let vals: Vec<f64> = pts.par_iter().map(|&s| f(s)).collect();
    let k = (0..pts.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let (mut best_s, mut best_v) = (pts[k], vals[k]);
    let mut lo = pts[k.saturating_sub(1)];
    let mut hi = pts[(k + 1).min(pts.len() - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-9 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v > best_v {
                best_v = v;
                best_s = x;
            }
        }
    }
    (best_s, best_v)
}

/// Flat norm of an atomic measure on the rectangle `bounds`.
pub fn flat_norm_atomic_in(mu: &AtomicMeasure, bounds: &Rect, norm: TestNorm) -> Result<FlatNorm> {
    check_atoms_inside(mu, bounds)?;
    // Fix the orientation so that μ and −μ run the identical computation.
    let flipped;
    let mu = match mu.atoms().first() {
        Some(a) if a.weight < 0.0 => {
            flipped = mu.negate();
            &flipped
        }
        _ => mu,
    };
    let tr = Transport::new(mu, bounds);
    Ok(match norm {
        TestNorm::Max => FlatNorm { value: tr.value(1.0, 1.0), split: 1.0 },
        TestNorm::Combined => {
            let (split, value) = tr.combined();
            FlatNorm { value, split }
        }
    })
}

/// ‖μ‖_flat on Ω with the combined test norm ‖φ‖∞ + Lip(φ) ≤ 1.
pub fn flat_norm_atomic(mu: &AtomicMeasure, domain: &Domain) -> Result<f64> {
    Ok(flat_norm_atomic_in(mu, &domain.bounds(), TestNorm::Combined)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatDistance {
    pub value: f64,
    /// Bound on the error introduced by atomizing the density.
    pub atomization_bound: f64,
}

/// ‖ν − μ‖_flat for atomic ν and piecewise-constant μ atomized at spacing `h_q`.
pub fn flat_distance_to_density(
    nu: &AtomicMeasure,
    mu: &PiecewiseDensity,
    domain: &Domain,
    h_q: f64,
    norm: TestNorm,
) -> Result<FlatDistance> {
    if !(h_q > 0.0) {
        return Err(Error::Argument("quadrature spacing must be positive".into()));
    }
    let diff = nu.plus(&mu.atomize(h_q).negate());
    let value = flat_norm_atomic_in(&diff, &domain.bounds(), norm)?.value;
    Ok(FlatDistance { value, atomization_bound: h_q * std::f64::consts::FRAC_1_SQRT_2 * mu.total_variation() })
}

/// ‖f‖_{H⁻¹(Ω)} for integrated nodal loads.
pub fn h_minus1_norm_loads(domain: &Domain, loads: &[f64]) -> Result<f64> {
    let (v, _) = solve_node_dirichlet(domain, loads)?;
    Ok(nodal_dirichlet_norm(&v))
}

/// ‖f‖_{H⁻¹(Ω)} for a density sampled at the nodes.
pub fn h_minus1_norm(f: &ScalarGridField) -> Result<f64> {
    h_minus1_norm_loads(f.domain(), &density_loads(f))
}

/// Exact dual-cell integrals of a piecewise density and of uniform ball
/// densities `Σ w_k (πρ_k²)⁻¹ χ_{B_{ρ_k}(c_k)}`.
pub fn exact_loads(domain: &Domain, density: &PiecewiseDensity, balls: &[(Point, f64, f64)]) -> Vec<f64> {
    let mut loads = vec![0.0; domain.node_count()];
    let xs = domain.xs();
    let ys = domain.ys();
    let dual = |axis: &[f64], k: usize| {
        let lo = if k > 0 { 0.5 * (axis[k - 1] + axis[k]) } else { axis[0] };
        let hi = if k + 1 < axis.len() { 0.5 * (axis[k] + axis[k + 1]) } else { axis[k] };
        (lo, hi)
    };
    for j in 0..domain.ny() {
        let (y0, y1) = dual(ys, j);
        for i in 0..domain.nx() {
            let (x0, x1) = dual(xs, i);
            let cell = Rect::new(Point::new(x0, y0), Point::new(x1, y1));
            loads[domain.node_index(i, j)] = density.mass_in_rect(&cell);
        }
    }
    for &(c, rho, w) in balls {
        let dens = w / (std::f64::consts::PI * rho * rho);
        let i0 = xs.partition_point(|&x| x < c.x - rho).saturating_sub(1);
        let i1 = xs.partition_point(|&x| x <= c.x + rho).min(xs.len() - 1);
        let j0 = ys.partition_point(|&y| y < c.y - rho).saturating_sub(1);
        let j1 = ys.partition_point(|&y| y <= c.y + rho).min(ys.len() - 1);
        for j in j0..=j1 {
            let (y0, y1) = dual(ys, j);
            for i in i0..=i1 {
                let (x0, x1) = dual(xs, i);
                let cell = Rect::new(Point::new(x0, y0), Point::new(x1, y1));
                loads[domain.node_index(i, j)] += dens * crate::geometry::disk_rect_overlap(c, rho, &cell);
            }
        }
    }
    loads
}

#[cfg(test)]
mod tests;
