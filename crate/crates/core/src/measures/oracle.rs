//! Grid linear-programming oracle for the flat norm of atomic measures.
//!
//! The LP maximises Σ w_i φ(x_i) over grid functions with |φ| ≤ a,
//! |φ(x) − φ(y)| ≤ b|x − y| along stencil links and φ = 0 on the boundary.
//! Its dual is a transshipment over the stencil graph, which collapses to a
//! small problem on the atoms plus one ground node once the graph metric
//! between atoms is known.

use super::{maximize_concave, AtomicMeasure, TestNorm};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::grid_field::Domain;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const STENCIL_RADIUS: i64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub value: f64,
    pub split: f64,
    /// Optimal test function at the atoms.
    pub potentials: Vec<f64>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn stencil() -> Vec<(i64, i64)> {
    let mut s = Vec::new();
    for p in -STENCIL_RADIUS..=STENCIL_RADIUS {
        for q in -STENCIL_RADIUS..=STENCIL_RADIUS {
            if (p, q) != (0, 0) && gcd(p, q) == 1 {
                s.push((p, q));
            }
        }
    }
    s
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

struct StencilGraph {
    lower: Point,
    h: f64,
    n: (usize, usize),
    stencil: Vec<(i64, i64, f64)>,
}

impl StencilGraph {
    fn node(&self, k: usize) -> Point {
        let (i, j) = (k % self.n.0, k / self.n.0);
        self.lower + Point::new(i as f64 * self.h, j as f64 * self.h)
    }

    fn on_boundary(&self, k: usize) -> bool {
        let (i, j) = (k % self.n.0, k / self.n.0);
        i == 0 || j == 0 || i + 1 == self.n.0 || j + 1 == self.n.0
    }

    /// Graph distances from atom `a` to every other atom and to the ground.
    fn distances(&self, atoms: &[Point], a: usize) -> (Vec<f64>, f64) {
        let (nx, ny) = self.n;
        let count = nx * ny;
        let link = |p: Point| -> Vec<(usize, f64)> {
            let r = 2.0 * self.h;
            let i0 = (((p.x - r - self.lower.x) / self.h).floor().max(0.0)) as usize;
            let j0 = (((p.y - r - self.lower.y) / self.h).floor().max(0.0)) as usize;
            let i1 = ((((p.x + r - self.lower.x) / self.h).ceil()) as usize).min(nx - 1);
            let j1 = ((((p.y + r - self.lower.y) / self.h).ceil()) as usize).min(ny - 1);
            let mut v = Vec::new();
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let k = j * nx + i;
                    let d = self.node(k).dist(p);
                    if d <= r {
                        v.push((k, d));
                    }
                }
            }
            v
        };
        let mut dist = vec![f64::INFINITY; count];
        let mut heap = BinaryHeap::new();
        for (k, d) in link(atoms[a]) {
            if d < dist[k] {
                dist[k] = d;
                heap.push(Item(d, k));
            }
        }
        while let Some(Item(d, k)) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            let (i, j) = ((k % nx) as i64, (k / nx) as i64);
            for &(p, q, len) in &self.stencil {
                let (a, b) = (i + p, j + q);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    continue;
                }
                let m = b as usize * nx + a as usize;
                let nd = d + len;
                if nd < dist[m] {
                    dist[m] = nd;
                    heap.push(Item(nd, m));
                }
            }
        }
        let to_atoms =
            atoms
                .iter()
                .enumerate()
                .map(|(b, &p)| {
                    if b == a {
                        0.0
                    } else {
                        link(p).into_iter().map(|(k, d)| dist[k] + d).fold(f64::INFINITY, f64::min)
                    }
                })
                .collect();
        let ground = (0..count).filter(|&k| self.on_boundary(k)).map(|k| dist[k]).fold(f64::INFINITY, f64::min);
        (to_atoms, ground)
    }
}

struct Arc {
    to: usize,
    cost: f64,
    cap: f64,
}

/// Transshipment on atoms + ground solved by negative-cycle cancelling;
/// returns the cost and the optimal potentials at the atoms.
fn transship(weights: &[f64], pair: &[Vec<f64>], absorb: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = weights.len();
    let g = n;
    let mut arcs: Vec<Arc> = Vec::new();
    let mut adj = vec![Vec::new(); n + 1];
    let add = |arcs: &mut Vec<Arc>, adj: &mut Vec<Vec<usize>>, u: usize, v: usize, cost: f64, flow: f64| {
        adj[u].push(arcs.len());
        arcs.push(Arc { to: v, cost, cap: f64::INFINITY });
        adj[v].push(arcs.len());
        arcs.push(Arc { to: u, cost: -cost, cap: flow });
    };
    for i in 0..n {
        for j in 0..n {
            if i != j {
                add(&mut arcs, &mut adj, i, j, pair[i][j], 0.0);
            }
        }
        add(&mut arcs, &mut adj, i, g, absorb[i], weights[i].max(0.0));
        add(&mut arcs, &mut adj, g, i, absorb[i], (-weights[i]).max(0.0));
    }
    let live = |a: &Arc| a.cap > 1e-13;
    let tol = 1e-12;
    let bellman_ford = |arcs: &Vec<Arc>, from_zero: bool| -> (Vec<f64>, Vec<Option<usize>>, Option<usize>) {
        let mut d = vec![if from_zero { 0.0 } else { f64::INFINITY }; n + 1];
        d[g] = 0.0;
        let mut pred = vec![None; n + 1];
        let mut last = None;
        for _ in 0..=n + 1 {
            last = None;
            for u in 0..=n {
                if !d[u].is_finite() {
                    continue;
                }
                for &id in &adj[u] {
                    let a = &arcs[id];
                    if live(a) && d[u] + a.cost < d[a.to] - tol {
                        d[a.to] = d[u] + a.cost;
                        pred[a.to] = Some(id);
                        last = Some(a.to);
                    }
                }
            }
            if last.is_none() {
                break;
            }
        }
        (d, pred, last)
    };
    let mut rounds = 0;
    loop {
        let (_, pred, last) = bellman_ford(&arcs, true);
        let Some(mut v) = last else { break };
        rounds += 1;
        if rounds > 10_000 {
            return Err(Error::Numerical { message: "cycle cancelling did not terminate".into(), residual: f64::NAN });
        }
        for _ in 0..=n {
            v = arcs[pred[v].expect("relaxed node has a predecessor") ^ 1].to;
        }
        let mut cycle = Vec::new();
        let start = v;
        loop {
            let id = pred[v].expect("cycle node has a predecessor");
            cycle.push(id);
            v = arcs[id ^ 1].to;
            if v == start {
                break;
            }
        }
        let push = cycle.iter().map(|&id| arcs[id].cap).fold(f64::INFINITY, f64::min);
        if !push.is_finite() {
            return Err(Error::Numerical { message: "unbounded transshipment".into(), residual: f64::NAN });
        }
        for &id in &cycle {
            arcs[id].cap -= push;
            arcs[id ^ 1].cap += push;
        }
    }
    let cost: f64 = (0..arcs.len()).step_by(2).map(|id| arcs[id ^ 1].cap * arcs[id].cost).sum();
    let (delta, _, _) = bellman_ford(&arcs, false);
    Ok((cost, delta[..n].iter().map(|d| -d).collect()))
}

/// Flat norm of `mu` from the grid LP with spacing `h`, under `norm`.
pub fn flat_norm_lp_oracle_in(mu: &AtomicMeasure, bounds: &Rect, h: f64, norm: TestNorm) -> Result<OracleSolution> {
    if mu.atoms().first().is_some_and(|a| a.weight < 0.0) {
        let mut sol = flat_norm_lp_oracle_in(&mu.negate(), bounds, h, norm)?;
        sol.potentials.iter_mut().for_each(|p| *p = -*p);
        return Ok(sol);
    }
    let atoms: Vec<Point> = mu.atoms().iter().map(|a| a.position).collect();
    let weights: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    if !(h > 0.0) {
        return Err(Error::Argument("oracle spacing must be positive".into()));
    }
    super::check_atoms_inside(mu, bounds)?;
    let nx = (bounds.width() / h).round() as usize + 1;
    let ny = (bounds.height() / h).round() as usize + 1;
    if nx < 3
        || ny < 3
        || ((nx - 1) as f64 * h - bounds.width()).abs() > 1e-9 * bounds.width()
        || ((ny - 1) as f64 * h - bounds.height()).abs() > 1e-9 * bounds.height()
    {
        return Err(Error::Argument("oracle spacing must divide the domain into at least two cells per axis".into()));
    }
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            if !(h < 0.5 * atoms[i].dist(atoms[j])) {
                return Err(Error::Argument("oracle spacing does not resolve the atom separations".into()));
            }
        }
    }
    if atoms.is_empty() {
        return Ok(OracleSolution { value: 0.0, split: 1.0, potentials: Vec::new() });
    }
    let graph = StencilGraph {
        lower: bounds.lower,
        h,
        n: (nx, ny),
        stencil: stencil().into_iter().map(|(p, q)| (p, q, h * ((p * p + q * q) as f64).sqrt())).collect(),
    };
    let rows: Vec<(Vec<f64>, f64)> = {
        use rayon::prelude::*;
        (0..atoms.len()).into_par_iter().map(|a| graph.distances(&atoms, a)).collect()
    };
    let pair: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let ground: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let solve = |s: f64| -> Result<(f64, Vec<f64>)> {
        let (a, b) = norm.bounds(s);
        let scaled: Vec<Vec<f64>> = pair.iter().map(|r| r.iter().map(|d| b * d).collect()).collect();
        let absorb: Vec<f64> = ground.iter().map(|d| a.min(b * d)).collect();
        let (cost, phi) = transship(&weights, &scaled, &absorb)?;
        let tol = 1e-9 * (1.0 + cost.abs());
        let mut worst = 0.0f64;
        for i in 0..phi.len() {
            worst = worst.max(phi[i].abs() - absorb[i]);
            for j in 0..phi.len() {
                if i != j {
                    worst = worst.max(phi[i] - phi[j] - scaled[i][j]);
                }
            }
        }
        let value: f64 = weights.iter().zip(&phi).map(|(w, p)| w * p).sum();
        let gap = (value - cost).abs();
        if worst > tol || gap > tol {
            return Err(Error::Numerical {
                message: "oracle primal/dual certificate failed".into(),
                residual: worst.max(gap),
            });
        }
        Ok((cost, phi))
    };
    match norm {
        TestNorm::Max => {
            let (value, potentials) = solve(1.0)?;
            Ok(OracleSolution { value, split: 1.0, potentials })
        }
        TestNorm::Combined => {
            let samples: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
            let failure = std::sync::Mutex::new(None);
            let (split, _) = maximize_concave(&samples, |s| match solve(s) {
                Ok((v, _)) => v,
                Err(e) => {
                    *failure.lock().expect("poisoned") = Some(e);
                    f64::NEG_INFINITY
                }
            });
            if let Some(e) = failure.into_inner().expect("poisoned") {
                return Err(e);
            }
            let (value, potentials) = solve(split)?;
            Ok(OracleSolution { value, split, potentials })
        }
    }
}

/// Flat norm of `mu` on Ω (combined test norm) from the grid LP with spacing `h`.
pub fn flat_norm_lp_oracle(mu: &AtomicMeasure, domain: &Domain, h: f64) -> Result<f64> {
    Ok(flat_norm_lp_oracle_in(mu, &domain.bounds(), h, TestNorm::Combined)?.value)
}
