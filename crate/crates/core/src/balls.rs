//! Ball construction: merging, synchronized growth, annular lower bounds,
//! jump-set covers and vortex measures extracted from ball families.

use crate::currents::{degree_on_circle, Circle};
use crate::error::{Error, Result};
use crate::geometry::{Point, Region};
use crate::grid_field::S1GridField;
use crate::measures::AtomicMeasure;
use std::f64::consts::PI;
use std::io::Write;

/// Two closures may share a point up to this slack and still count as disjoint.
pub const DISJOINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedBall {
    pub center: Point,
    pub radius: f64,
    pub weight: i64,
}

impl WeightedBall {
    pub fn new(center: Point, radius: f64, weight: i64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Argument(format!("ball radius must be positive, got {radius}")));
        }
        Ok(WeightedBall { center, radius, weight })
    }

    fn slack(&self, o: &WeightedBall) -> f64 {
        DISJOINT_TOL * (1.0 + self.radius + o.radius)
    }

    /// Closures meet (touching counts).
    pub fn meets(&self, o: &WeightedBall) -> bool {
        self.center.dist(o.center) <= self.radius + o.radius + self.slack(o)
    }

    /// Closures share at most one point.
    pub fn essentially_disjoint(&self, o: &WeightedBall) -> bool {
        self.center.dist(o.center) >= self.radius + o.radius - self.slack(o)
    }

    pub fn contains_ball(&self, o: &WeightedBall) -> bool {
        self.center.dist(o.center) + o.radius <= self.radius + self.slack(o)
    }

    pub fn contains_point(&self, p: Point) -> bool {
        self.center.dist(p) <= self.radius
    }

    /// Smallest disk containing both, carrying the summed weight.
    pub fn enclosing(&self, o: &WeightedBall) -> WeightedBall {
        let weight = self.weight + o.weight;
        if self.contains_ball(o) {
            return WeightedBall { weight, ..*self };
        }
        if o.contains_ball(self) {
            return WeightedBall { weight, ..*o };
        }
        let d = self.center.dist(o.center);
        let radius = 0.5 * (d + self.radius + o.radius);
        let dir = (o.center - self.center) * (1.0 / d);
        WeightedBall { center: self.center + dir * (radius - self.radius), radius, weight }
    }
}

/// ℬ(t): pairwise essentially disjoint balls at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallFamily {
    pub balls: Vec<WeightedBall>,
    pub t: f64,
}

impl BallFamily {
    pub fn empty() -> Self {
        BallFamily { balls: Vec::new(), t: 0.0 }
    }

    pub fn total_radius(&self) -> f64 {
        self.balls.iter().map(|b| b.radius).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn is_disjoint(&self) -> bool {
        self.balls.iter().enumerate().all(|(k, a)| self.balls[k + 1..].iter().all(|b| a.essentially_disjoint(b)))
    }

    pub fn covers(&self, p: Point) -> bool {
        self.balls.iter().any(|b| b.contains_point(p))
    }

    /// 𝒞(t) filter: which balls have their closure inside `region`.
    pub fn inside(&self, region: &Region) -> Vec<bool> {
        self.balls.iter().map(|b| region.contains_disk(b.center, b.radius)).collect()
    }

    /// μ̃ = Σ_{B ∈ 𝒞} μ(B) δ_{x(B)}.
    pub fn truncated_measure(&self, region: &Region) -> AtomicMeasure {
        AtomicMeasure::new(
            self.balls
                .iter()
                .zip(self.inside(region))
                .filter(|(_, keep)| *keep)
                .map(|(b, _)| (b.center, b.weight as f64)),
        )
    }
}

fn order_balls(balls: &mut [WeightedBall]) {
    balls.sort_by(|a, b| a.center.lex_cmp(&b.center).then(a.radius.total_cmp(&b.radius)));
}

/// Merges balls with intersecting closures until the family is pairwise
/// essentially disjoint. The lexicographically first meeting pair is
/// replaced at each step.
pub fn merge_family(balls: &[WeightedBall]) -> BallFamily {
    let mut v = balls.to_vec();
    order_balls(&mut v);
    'outer: loop {
        for a in 0..v.len() {
            for b in a + 1..v.len() {
                if v[a].meets(&v[b]) {
                    let m = v[a].enclosing(&v[b]);
                    v.remove(b);
                    v[a] = m;
                    order_balls(&mut v);
                    continue 'outer;
                }
            }
        }
        break;
    }
    BallFamily { balls: v, t: 0.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    /// Family right after the event.
    pub family: BallFamily,
}

/// Event-driven growth: every ball dilates as ρ(1 + t) about its centre;
/// touching balls merge.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthTrace {
    pub events: Vec<TraceEvent>,
    pub end: f64,
    initial_total: f64,
}

impl GrowthTrace {
    /// The family at time `t` (radii dilated from the last event before `t`).
    pub fn family_at(&self, t: f64) -> BallFamily {
        let k = self.events.partition_point(|e| e.t <= t).max(1) - 1;
        let e = &self.events[k];
        let scale = (1.0 + t) / (1.0 + e.t);
        BallFamily {
            balls: e.family.balls.iter().map(|b| WeightedBall { radius: b.radius * scale, ..*b }).collect(),
            t,
        }
    }

    pub fn initial_total_radius(&self) -> f64 {
        self.initial_total
    }

    /// Σ_k π Σ|w| log((1 + t_{k+1})/(1 + t_k)) over all balls of each interval.
    pub fn accumulated_bound(&self, t: f64) -> f64 {
        annular_lower_bound(self, 0.0, t.min(self.end), &Region::All)
    }

    /// Times where the family changes, within [0, end].
    fn breakpoints(&self, t1: f64, t2: f64) -> Vec<f64> {
        let mut v = vec![t1];
        v.extend(self.events.iter().map(|e| e.t).filter(|&t| t > t1 && t < t2));
        v.push(t2);
        v
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "event_index,t,ball_id,cx,cy,r,weight,lower_bound_accumulated")?;
        for (k, e) in self.events.iter().enumerate() {
            let lb = self.accumulated_bound(e.t);
            for (id, b) in e.family.balls.iter().enumerate() {
                writeln!(w, "{k},{},{id},{},{},{},{},{lb}", e.t, b.center.x, b.center.y, b.radius, b.weight)?;
            }
        }
        Ok(())
    }
}

pub fn grow_family(initial: &BallFamily, t_target: f64) -> Result<GrowthTrace> {
    if !(t_target > 0.0) {
        return Err(Error::Argument(format!("growth target time must be positive, got {t_target}")));
    }
    let start = merge_family(&initial.balls);
    let initial_total = initial.total_radius();
    // Reduced radii ρ = r/(1+t) are constant between events.
    let mut reduced: Vec<WeightedBall> = start.balls.clone();
    let mut events = vec![TraceEvent { t: 0.0, family: BallFamily { balls: start.balls, t: 0.0 } }];
    let mut t = 0.0;
    loop {
        let mut next = f64::INFINITY;
        for a in 0..reduced.len() {
            for b in a + 1..reduced.len() {
                let d = reduced[a].center.dist(reduced[b].center);
                let tt = d / (reduced[a].radius + reduced[b].radius) - 1.0;
                next = next.min(tt.max(t));
            }
        }
        if next > t_target {
            break;
        }
        t = next;
        let scale = 1.0 + t;
        let dilated: Vec<WeightedBall> =
            reduced.iter().map(|b| WeightedBall { radius: b.radius * scale, ..*b }).collect();
        let merged = merge_family(&dilated);
        reduced = merged.balls.iter().map(|b| WeightedBall { radius: b.radius / scale, ..*b }).collect();
        events.push(TraceEvent { t, family: BallFamily { balls: merged.balls, t } });
    }
    Ok(GrowthTrace { events, end: t_target, initial_total })
}

/// Property (2): every ball of `earlier` lies in some ball of `later`.
pub fn check_nesting(earlier: &BallFamily, later: &BallFamily) -> bool {
    earlier.balls.iter().all(|a| later.balls.iter().any(|b| b.contains_ball(a)))
}

/// Property (5): Σ r(t) ≤ (1 + t) Σ r(0).
pub fn check_radius_bound(trace: &GrowthTrace, t: f64) -> bool {
    let total = trace.family_at(t).total_radius();
    total <= (1.0 + t) * trace.initial_total * (1.0 + 1e-12)
}

/// Nesting, disjointness and the radius bound at every event and at the end.
pub fn check_trace(trace: &GrowthTrace) -> bool {
    let mut times: Vec<f64> = trace.events.iter().map(|e| e.t).collect();
    times.push(trace.end);
    let fams: Vec<BallFamily> = times.iter().map(|&t| trace.family_at(t)).collect();
    fams.windows(2).all(|w| check_nesting(&w[0], &w[1]))
        && fams.iter().all(|f| f.is_disjoint())
        && times.iter().all(|&t| check_radius_bound(trace, t))
}

/// π Σ_{B ⊂ A} |μ(B)| log((1 + t₂)/(1 + t₁)), accumulated interval by
/// interval with the family in force on each interval.
pub fn annular_lower_bound(trace: &GrowthTrace, t1: f64, t2: f64, region: &Region) -> f64 {
    if !(t2 > t1) {
        return 0.0;
    }
    let pts = trace.breakpoints(t1, t2.min(trace.end));
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let fam = trace.family_at(w[0]);
        let scale = (1.0 + w[1]) / (1.0 + w[0]);
        let weight: i64 =
            fam.balls.iter().filter(|b| region.contains_disk(b.center, b.radius * scale)).map(|b| b.weight.abs()).sum();
        acc += PI * weight as f64 * scale.ln();
    }
    acc
}

/// Discrete ½∫|∇u|² over the cells covered by the family at `t2` but not
/// by the family at `t1`.
pub fn measured_annular_energy(u: &S1GridField, trace: &GrowthTrace, t1: f64, t2: f64) -> f64 {
    let inner = trace.family_at(t1);
    let outer = trace.family_at(t2.min(trace.end));
    crate::energies::dirichlet_energy_in(u, |c| outer.covers(c) && !inner.covers(c))
}

/// Which jump edges a cover must contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpCoverage {
    /// S_u: the jump set of the unit field.
    #[default]
    Fractional,
    /// S_φ: every jump edge of the lifting, integer ones included.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverOptions {
    pub coverage: JumpCoverage,
    /// Budget constant C in ℋ¹(S) ≤ C ε |log ε|².
    pub budget_constant: f64,
    /// Greedy balls have radius `radius_factor · ε`.
    pub radius_factor: f64,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { coverage: JumpCoverage::Fractional, budget_constant: 10.0, radius_factor: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverCertificate {
    pub jump_length: f64,
    pub bound: f64,
    pub total_radius: f64,
    pub radius_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpCover {
    pub family: BallFamily,
    pub certificate: CoverCertificate,
}

/// Greedy ball cover of the jump set, merged to a disjoint family with
/// ε ≤ Rad ≤ C ε |log ε|².
pub fn cover_jump_set(u: &S1GridField, eps: f64, opts: CoverOptions) -> Result<JumpCover> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Argument(format!("cover scale must lie in (0, 1), got {eps}")));
    }
    let d = u.domain();
    let segments: Vec<(Point, Point)> = u
        .jumps()
        .iter()
        .filter(|j| opts.coverage == JumpCoverage::All || !j.integer)
        .map(|j| d.dual_segment(j.edge))
        .collect();
    let jump_length: f64 = segments.iter().map(|(a, b)| a.dist(*b)).sum();
    let log2 = eps.ln().powi(2);
    let bound = opts.budget_constant * eps * log2;
    if jump_length > bound {
        return Err(Error::CoverBudget { jump_length, bound });
    }
    let r = opts.radius_factor * eps;
    let mut balls: Vec<WeightedBall> = Vec::new();
    for &(a, b) in &segments {
        if !balls.iter().any(|ball| ball.contains_point(a) && ball.contains_point(b)) {
            let mid = (a + b) * 0.5;
            balls.push(WeightedBall { center: mid, radius: r.max(0.5 * a.dist(b) * (1.0 + 1e-9)), weight: 0 });
        }
    }
    let mut family = merge_family(&balls);
    while !family.is_empty() && family.total_radius() < eps {
        let deficit = eps - family.total_radius();
        family.balls[0].radius += deficit;
        family = merge_family(&family.balls);
    }
    let total_radius = family.total_radius();
    Ok(JumpCover {
        family,
        certificate: CoverCertificate { jump_length, bound, total_radius, radius_bound: bound.max(eps) },
    })
}

/// Distance from `p` to the segment `[a, b]`.
fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len = ab.norm_sq();
    let s = if len > 0.0 { ((p - a).dot(ab) / len).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + ab * s)
}

/// Σ deg(u, ∂B) δ_{x(B)} over the family, zero degrees dropped.
pub fn vortex_measure(u: &S1GridField, family: &BallFamily) -> Result<AtomicMeasure> {
    let d = u.domain();
    // Clearance is measured in the local grid spacing around each jump edge.
    let frac: Vec<(Point, Point, f64)> = u
        .fractional_jumps()
        .map(|j| {
            let (p, q) = d.dual_segment(j.edge);
            (p, q, 2.0 * d.edge_length(j.edge).max(d.dual_length(j.edge)))
        })
        .collect();
    let mut atoms = Vec::new();
    for b in &family.balls {
        for &(p, q, clearance) in &frac {
            let near = segment_distance(b.center, p, q);
            let far = b.center.dist(p).max(b.center.dist(q));
            if near - clearance <= b.radius && b.radius <= far + clearance {
                return Err(Error::Clearance(format!(
                    "circle of radius {} at ({}, {}) passes within {clearance} of a jump",
                    b.radius, b.center.x, b.center.y
                )));
            }
        }
        let deg = degree_on_circle(u, &Circle::on_grid(d, b.center, b.radius)?)?;
        atoms.push((b.center, deg as f64));
    }
    Ok(AtomicMeasure::new(atoms))
}

/// Balls of radius `r` at the given vortex centres, carrying their degrees.
pub fn balls_at(vortices: &[(Point, i64)], r: f64) -> Result<Vec<WeightedBall>> {
    vortices.iter().map(|&(c, z)| WeightedBall::new(c, r, z)).collect()
}
