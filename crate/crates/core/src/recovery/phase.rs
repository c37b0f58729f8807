use super::lattice::{lattice_vortices, LatticePlacement};
use crate::balls::{cover_jump_set, vortex_measure, CoverOptions};
use crate::currents::{degree_on_circle, Circle};
use crate::energies::{
    compatibility_residual, gamma_limit_energy, ms_energy, EnergyReport, Regime, Scaling, VortexDensity,
    COMPATIBILITY_TOL,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, Vec2};
use crate::grid_field::{build_s1_field, vortex_phase, Domain, EdgeId, S1GridField, ScalarGridField, VectorGridField};
use crate::measures::{exact_loads, flat_distance_to_density, PiecewiseDensity, TestNorm};
use crate::poisson::{nodal_dirichlet_norm, solve_cell_dirichlet, solve_node_dirichlet, CgReport, CG_TOLERANCE};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;
use std::io::Write;

/// Quintic smoothstep in |x − x_n|: 0 on B_ε, 1 outside B_{3ε/2}.
pub fn cutoff(rho: f64, eps: f64) -> f64 {
    if rho <= eps {
        return 0.0;
    }
    if rho >= 1.5 * eps {
        return 1.0;
    }
    let t = (rho - eps) / (0.5 * eps);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// sup |∇σ_ε| = (15/8)·(2/ε).
pub fn cutoff_slope_bound(eps: f64) -> f64 {
    3.75 / eps
}

/// How N_ε is chosen when the caller does not fix it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NRule {
    /// ⌊|log ε|⌋ in the sub/critical regimes, round(|log ε|^{3/2}) in the supercritical one.
    #[default]
    Default,
    Fixed(u64),
}

/// Default N_ε for the regime, validated.
pub fn default_n_eps(regime: Regime, eps: f64) -> Result<u64> {
    let l = eps.ln().abs();
    let n = match regime {
        Regime::Subcritical | Regime::Critical => l.floor() as u64,
        Regime::Supercritical => l.powf(1.5).round() as u64,
    };
    check_n_eps(regime, eps, n)?;
    Ok(n)
}

fn check_n_eps(regime: Regime, eps: f64, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Regime(format!("N_ε = 0 at ε = {eps}")));
    }
    if regime == Regime::Supercritical {
        let l = eps.ln().abs();
        let nf = n as f64;
        if !(nf > 2.0 * l && nf < 0.1 / eps) {
            return Err(Error::Regime(format!(
                "supercritical N_ε = {n} at ε = {eps} must satisfy 2|log ε| < N_ε < 0.1/ε"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub regime: Regime,
    pub n_rule: NRule,
    /// Fine cells per ε near the cores.
    pub core_resolution: f64,
    /// Geometric growth of the graded grid away from the cores.
    pub growth: f64,
    /// Atomization spacing of μ for the flat distance; `None` skips it.
    pub flat_h_q: Option<f64>,
    /// Refuse fine grids with more nodes than this.
    pub max_fine_nodes: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            regime: Regime::Critical,
            n_rule: NRule::Default,
            core_resolution: 8.0,
            growth: 1.1,
            flat_h_q: Some(1.0 / 32.0),
            max_fine_nodes: 8_000_000,
        }
    }
}

/// ∫_p^q k·dl for the unit Rankine kernel of radius `r` at `c`:
/// (x−c)^⊥/(2πr²) inside the disk, (x−c)^⊥/(2π|x−c|²) outside.
pub fn rankine_edge_integral(p: Point, q: Point, c: Point, r: f64) -> f64 {
    let d = q - p;
    let a = p - c;
    // |a + s d|² = r²
    let qa = d.norm_sq();
    let qb = 2.0 * a.dot(d);
    let qc = a.norm_sq() - r * r;
    let mut cuts = vec![0.0];
    let disc = qb * qb - 4.0 * qa * qc;
    if qa > 0.0 && disc > 0.0 {
        let sq = disc.sqrt();
        for s in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
            if s > 0.0 && s < 1.0 {
                cuts.push(s);
            }
        }
    }
    cuts.push(1.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let x0 = p + d * w[0] - c;
        let x1 = p + d * w[1] - c;
        let mid = (x0 + x1) * 0.5;
        if mid.norm() < r {
            total += mid.cross(x1 - x0) / (2.0 * PI * r * r);
        } else {
            total += x0.cross(x1).atan2(x0.dot(x1)) / (2.0 * PI);
        }
    }
    total
}

fn unit_kernel(p: Point, c: Point) -> Vec2 {
    let x = p - c;
    x.perp() * (1.0 / (2.0 * PI * x.norm_sq()))
}

fn min_radius(placement: &LatticePlacement) -> f64 {
    placement.min_radius().unwrap_or(f64::INFINITY)
}

/// K̂_ε = Σ z∇ϑ/2π on the annuli A_{ε,r}, K̃_ε = Σ z|x−x_n|²∇ϑ/(2πr²) on B_r,
/// evaluated at cell centres.
pub fn vortex_kernels(
    placement: &LatticePlacement,
    eps: f64,
    domain: &Domain,
) -> Result<(VectorGridField, VectorGridField)> {
    if !(eps > 0.0 && eps < min_radius(placement)) {
        return Err(Error::Regime(format!("ε = {eps} must lie below every lattice radius")));
    }
    let mut k_hat = vec![Point::ZERO; domain.cell_count()];
    let mut k_tilde = vec![Point::ZERO; domain.cell_count()];
    for (c, z, r) in placement.cores() {
        for_cells_near(domain, c, r, |i, j, p| {
            let rho = p.dist(c);
            if rho >= r || rho == 0.0 {
                return;
            }
            let k = unit_kernel(p, c) * z as f64;
            let idx = domain.cell_index(i, j);
            if rho > eps {
                k_hat[idx] = k_hat[idx] + k;
            }
            k_tilde[idx] = k_tilde[idx] + k * (rho * rho / (r * r));
        });
    }
    Ok((VectorGridField::new(domain.clone(), k_hat)?, VectorGridField::new(domain.clone(), k_tilde)?))
}

/// Visits cells whose centre lies in the square of half-side `r` around `c`.
fn for_cells_near(domain: &Domain, c: Point, r: f64, mut f: impl FnMut(usize, usize, Point)) {
    let range = |axis: &[f64], lo: f64, hi: f64| {
        let a = axis.partition_point(|&v| v < lo).saturating_sub(1);
        let b = axis.partition_point(|&v| v <= hi).min(axis.len() - 1);
        a..b
    };
    for j in range(domain.ys(), c.y - r, c.y + r) {
        for i in range(domain.xs(), c.x - r, c.x + r) {
            let p = domain.cell_center(i, j);
            if (p.x - c.x).abs() <= r && (p.y - c.y).abs() <= r {
                f(i, j, p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonCorrection {
    /// ∇⊥v at cell centres.
    pub grad_perp: VectorGridField,
    pub v: ScalarGridField,
    /// ‖∇v‖_{L²}.
    pub dirichlet_norm: f64,
    pub report: CgReport,
}

impl PoissonCorrection {
    /// ‖∇v‖/√(N_ε|log ε|).
    pub fn normalized(&self, n_eps: u64, eps: f64) -> f64 {
        self.dirichlet_norm / (n_eps as f64 * eps.ln().abs()).sqrt()
    }
}

/// −Δv = μ̃_ε − N_ε μ with v = 0 on ∂Ω, μ̃_ε the ball-uniform densities.
pub fn poisson_correction(
    placement: &LatticePlacement,
    mu: &PiecewiseDensity,
    n_eps: u64,
    domain: &Domain,
) -> Result<PoissonCorrection> {
    let balls: Vec<(Point, f64, f64)> = placement.cores().into_iter().map(|(c, z, r)| (c, r, z as f64)).collect();
    let mut loads = exact_loads(domain, &PiecewiseDensity::zero(), &balls);
    for (l, m) in loads.iter_mut().zip(exact_loads(domain, mu, &[])) {
        *l -= n_eps as f64 * m;
    }
    let (v, report) = solve_node_dirichlet(domain, &loads)?;
    if !(report.relative_residual <= CG_TOLERANCE) {
        return Err(Error::Numerical {
            message: "Poisson correction did not converge".into(),
            residual: report.relative_residual,
        });
    }
    let mut values = Vec::with_capacity(domain.cell_count());
    for j in 0..domain.cells_y() {
        for i in 0..domain.cells_x() {
            let gx = 0.5 * ((v.value(i + 1, j) - v.value(i, j)) + (v.value(i + 1, j + 1) - v.value(i, j + 1)))
                / domain.dx(i);
            let gy = 0.5 * ((v.value(i, j + 1) - v.value(i, j)) + (v.value(i + 1, j + 1) - v.value(i + 1, j)))
                / domain.dy(j);
            values.push(Point::new(-gy, gx));
        }
    }
    Ok(PoissonCorrection {
        grad_perp: VectorGridField::new(domain.clone(), values)?,
        dirichlet_norm: nodal_dirichlet_norm(&v),
        v,
        report,
    })
}

/// Edge cochain on a uniform grid: H edges `(i, j)` at `j * (nx − 1) + i`,
/// V edges `(i, j)` at `j * nx + i`.
struct Cochain {
    nx: usize,
    ny: usize,
    h: Vec<f64>,
    v: Vec<f64>,
}

impl Cochain {
    fn hi(&self, i: usize, j: usize) -> usize {
        j * (self.nx - 1) + i
    }
    fn vi(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    /// Counterclockwise circulation around cell `(i, j)`.
    fn circ(&self, i: usize, j: usize) -> f64 {
        self.h[self.hi(i, j)] + self.v[self.vi(i + 1, j)] - self.h[self.hi(i, j + 1)] - self.v[self.vi(i, j)]
    }
}

/// Integrates a closed cochain from node (0, 0) along a spanning tree.
/// `breadth_first` selects BFS (neighbours +y, +x, −y, −x); otherwise the
/// comb tree: along the bottom row, then up each column.
fn integrate_cochain(g: &Cochain, breadth_first: bool) -> Vec<f64> {
    let (nx, ny) = (g.nx, g.ny);
    let mut psi = vec![0.0; nx * ny];
    if breadth_first {
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        seen[0] = true;
        while let Some((i, j)) = queue.pop_front() {
            let here = psi[j * nx + i];
            let mut step = |a: usize, b: usize, inc: f64| {
                let k = b * nx + a;
                if !seen[k] {
                    seen[k] = true;
                    psi[k] = here + inc;
                    queue.push_back((a, b));
                }
            };
            if j + 1 < ny {
                step(i, j + 1, g.v[g.vi(i, j)]);
            }
            if i + 1 < nx {
                step(i + 1, j, g.h[g.hi(i, j)]);
            }
            if j > 0 {
                step(i, j - 1, -g.v[g.vi(i, j - 1)]);
            }
            if i > 0 {
                step(i - 1, j, -g.h[g.hi(i - 1, j)]);
            }
        }
    } else {
        for i in 1..nx {
            psi[i] = psi[i - 1] + g.h[g.hi(i - 1, 0)];
        }
        for j in 1..ny {
            for i in 0..nx {
                psi[j * nx + i] = psi[(j - 1) * nx + i] + g.v[g.vi(i, j - 1)];
            }
        }
    }
    psi
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryDiagnostics {
    pub epsilon: f64,
    pub n_eps: u64,
    pub regime: Regime,
    pub cores: usize,
    /// Cores whose degree on ∂B_{2ε} differs from the lattice degree.
    pub degree_failures: usize,
    /// max |∮β̄·τ − z| over 5 radii in [2ε, r/2] per core.
    pub circulation_residual: f64,
    /// max |curl β̄| off the cores, relative to ‖β̄‖∞/h.
    pub curl_ratio: f64,
    /// Max phase difference between two spanning-tree integrations.
    pub tree_discrepancy: f64,
    pub jump_length: f64,
    /// Σ N^l·4ε.
    pub jump_bound: f64,
    /// ‖∇v‖/√(N_ε|log ε|).
    pub h1_resid: f64,
    /// Σ_n ∫_{A_{ε,r}}|K̂^n|² on the fine grid, and its prediction Σ log(r/ε)/2π.
    pub core_energy: f64,
    pub core_prediction: f64,
    /// max_n |measured/predicted − 1| per core.
    pub core_worst_deviation: f64,
    pub energy: EnergyReport,
    pub scaled_energy: f64,
    pub gamma_target: f64,
    pub flat_dist: Option<f64>,
    pub fine_nodes: usize,
}

impl RecoveryDiagnostics {
    pub fn core_ratio(&self) -> f64 {
        if self.core_prediction > 0.0 {
            self.core_energy / self.core_prediction
        } else {
            f64::NAN
        }
    }

    /// (1/(N_ε|log ε|))·ℋ¹(S_u)/ε.
    pub fn jump_ratio(&self) -> f64 {
        self.jump_length / (self.epsilon * self.n_eps as f64 * self.epsilon.ln().abs())
    }

    pub fn row(&self) -> ReportRow {
        ReportRow {
            epsilon: self.epsilon,
            n_eps: self.n_eps,
            scaled_energy: self.scaled_energy,
            gamma_target: self.gamma_target,
            core_ratio: self.core_ratio(),
            jump_ratio: self.jump_ratio(),
            flat_dist: self.flat_dist.unwrap_or(f64::NAN),
            h1_resid: self.h1_resid,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryField {
    pub u: S1GridField,
    pub placement: LatticePlacement,
    /// Coarse-grid components; β̄ = Nβ + K̂ − K̃ + correction.
    pub beta_bar: VectorGridField,
    pub n_beta: VectorGridField,
    pub k_hat: VectorGridField,
    pub k_tilde: VectorGridField,
    pub correction: VectorGridField,
    /// Smooth part of the phase on the coarse nodes.
    pub psi: ScalarGridField,
    pub diagnostics: RecoveryDiagnostics,
}

/// Builds u_ε = e^{2πıϑ_ε} from a piecewise-constant μ and a diffuse current
/// T^D sampled on a uniform grid.
pub fn assemble_recovery_field(
    mu: &PiecewiseDensity,
    td: &VectorGridField,
    eps: f64,
    opts: &RecoveryOptions,
) -> Result<RecoveryField> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Argument(format!("ε must lie in (0, 1), got {eps}")));
    }
    if !(opts.core_resolution > 4.0) {
        return Err(Error::Argument("core resolution must exceed 4 cells per ε".into()));
    }
    let coarse = td.domain().clone();
    let h = coarse.spacing().ok_or_else(|| Error::Argument("T^D must be sampled on a uniform grid".into()))?;
    let n_eps = match opts.n_rule {
        NRule::Default => default_n_eps(opts.regime, eps)?,
        NRule::Fixed(n) => {
            check_n_eps(opts.regime, eps, n)?;
            n
        }
    };
    let density = VortexDensity::Piecewise(mu.clone());
    let compat = compatibility_residual(&density, td, 10, 0x5eed);
    if compat > COMPATIBILITY_TOL {
        return Err(Error::Constraint { worst_residual: compat, tolerance: COMPATIBILITY_TOL });
    }
    let placement = lattice_vortices(mu, n_eps)?;
    let cores = placement.cores();
    if 2.0 * eps >= min_radius(&placement) {
        return Err(Error::Regime(format!("2ε = {} is not below the smallest lattice radius", 2.0 * eps)));
    }
    let inner = coarse.inner();
    for &(c, _, r) in &cores {
        if c.x - r < inner.lower.x || c.x + r > inner.upper.x || c.y - r < inner.lower.y || c.y + r > inner.upper.y {
            return Err(Error::Domain(format!("lattice ball at ({}, {}) leaves the inner domain", c.x, c.y)));
        }
    }

    // Coarse cochain F = Nβ − Σ z k_n with β = −(T^D)^⊥/π.
    let nf = n_eps as f64;
    let (nx, ny) = (coarse.nx(), coarse.ny());
    let edge_value = |e: EdgeId| -> f64 {
        let (a, b) = e.nodes();
        let p = coarse.node(a.0, a.1);
        let q = coarse.node(b.0, b.1);
        let t = td.sample(coarse.edge_midpoint(e));
        let beta = Point::new(t.y, -t.x) * (nf / PI);
        let mut val = beta.dot(q - p);
        for &(c, z, r) in &cores {
            val -= z as f64 * rankine_edge_integral(p, q, c, r);
        }
        val
    };
    let hvals: Vec<f64> =
        (0..ny * (nx - 1)).into_par_iter().map(|k| edge_value(EdgeId::h(k % (nx - 1), k / (nx - 1)))).collect();
    let vvals: Vec<f64> = (0..(ny - 1) * nx).into_par_iter().map(|k| edge_value(EdgeId::v(k % nx, k / nx))).collect();
    let mut g = Cochain { nx, ny, h: hvals, v: vvals };

    // Hodge correction: −Δ_h v = −curl_h F, G = F − D^⊥v is closed.
    let (cx, cy) = (coarse.cells_x(), coarse.cells_y());
    let rhs: Vec<f64> = (0..cx * cy).map(|k| -g.circ(k % cx, k / cx) / (h * h)).collect();
    let (vcell, report) = solve_cell_dirichlet(&coarse, &rhs)?;
    if !(report.relative_residual <= CG_TOLERANCE) {
        return Err(Error::Numerical {
            message: "Hodge correction did not converge".into(),
            residual: report.relative_residual,
        });
    }
    let vc = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= cx as isize || j >= cy as isize {
            0.0
        } else {
            vcell[j as usize * cx + i as usize]
        }
    };
    let mut dperp_h = vec![0.0; g.h.len()];
    let mut dperp_v = vec![0.0; g.v.len()];
    let mut grad_sq = 0.0;
    for j in 0..ny {
        for i in 0..nx - 1 {
            let d = vc(i as isize, j as isize) - vc(i as isize, j as isize - 1);
            let k = g.hi(i, j);
            dperp_h[k] = -d;
            g.h[k] += d;
            grad_sq += d * d;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let d = vc(i as isize, j as isize) - vc(i as isize - 1, j as isize);
            let k = g.vi(i, j);
            dperp_v[k] = d;
            g.v[k] -= d;
            grad_sq += d * d;
        }
    }
    let h1_resid = grad_sq.sqrt() / (nf * eps.ln().abs()).sqrt();

    let psi_bfs = integrate_cochain(&g, true);
    let psi_comb = integrate_cochain(&g, false);
    let tree_discrepancy = psi_bfs.iter().zip(&psi_comb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let psi = ScalarGridField::new(coarse.clone(), psi_bfs)?;

    // Coarse component fields at cell centres.
    let (k_hat, k_tilde) = vortex_kernels(&placement, eps, &coarse)?;
    let n_beta = td.map(|t| Point::new(t.y, -t.x) * (nf / PI));
    let mut corr = Vec::with_capacity(cx * cy);
    let mut g_cell = Vec::with_capacity(cx * cy);
    let mut curl_max = 0.0f64;
    for j in 0..cy {
        for i in 0..cx {
            let (b, t, l, r) = (g.hi(i, j), g.hi(i, j + 1), g.vi(i, j), g.vi(i + 1, j));
            corr.push(Point::new(-(dperp_h[b] + dperp_h[t]), -(dperp_v[l] + dperp_v[r])) * (0.5 / h));
            g_cell.push(Point::new(g.h[b] + g.h[t], g.v[l] + g.v[r]) * (0.5 / h));
            curl_max = curl_max.max(g.circ(i, j).abs() / (h * h));
        }
    }
    let correction = VectorGridField::new(coarse.clone(), corr)?;
    let g_cell = VectorGridField::new(coarse.clone(), g_cell)?;
    let beta_bar =
        n_beta.zip_with(&k_hat, |a, b| a + b)?.zip_with(&k_tilde, |a, b| a - b)?.zip_with(&correction, |a, b| a + b)?;
    let beta_max = beta_bar.max_norm();
    let curl_ratio = if beta_max > 0.0 { curl_max * h / beta_max } else { curl_max * h };

    // Fine grid refined around the cores.
    let fine = if cores.is_empty() {
        coarse.clone()
    } else {
        let fx: Vec<f64> = cores.iter().map(|c| c.0.x).collect();
        let fy: Vec<f64> = cores.iter().map(|c| c.0.y).collect();
        Domain::graded(
            coarse.bounds(),
            coarse.margin(),
            &fx,
            &fy,
            eps / opts.core_resolution,
            2.0 * eps,
            opts.growth,
            h,
        )?
    };
    if fine.node_count() > opts.max_fine_nodes {
        return Err(Error::Argument(format!(
            "fine grid would need {} nodes (limit {})",
            fine.node_count(),
            opts.max_fine_nodes
        )));
    }
    let theta_bar = |p: Point| -> f64 {
        let mut s = coarse.interpolate(psi.values(), p).unwrap_or(0.0);
        for &(c, z, _) in &cores {
            s += vortex_phase(p, c, z);
        }
        s
    };
    let fnx = fine.nx();
    let mut values: Vec<f64> =
        (0..fine.node_count()).into_par_iter().map(|k| theta_bar(fine.node(k % fnx, k / fnx))).collect();

    // Half-annulus averages on A_{ε,2ε}, split by the cut line x = x_n.
    let mut averages = Vec::with_capacity(cores.len());
    for &(c, _, _) in &cores {
        let (mut sl, mut al, mut sr, mut ar) = (0.0, 0.0, 0.0, 0.0);
        let tol = 1e-9 * eps;
        for_cells_near(&fine, c, 2.0 * eps, |i, j, p| {
            let rho = p.dist(c);
            if rho > eps && rho < 2.0 * eps && (p.x - c.x).abs() > tol {
                let a = fine.cell_area(i, j);
                if p.x < c.x {
                    sl += a * theta_bar(p);
                    al += a;
                } else {
                    sr += a * theta_bar(p);
                    ar += a;
                }
            }
        });
        if al == 0.0 || ar == 0.0 {
            return Err(Error::Argument("core annulus is not resolved by the fine grid".into()));
        }
        averages.push((sl / al, sr / ar));
    }
    let node_range =
        |axis: &[f64], lo: f64, hi: f64| axis.partition_point(|&v| v < lo)..axis.partition_point(|&v| v <= hi);
    for (&(c, _, _), &(a_l, a_r)) in cores.iter().zip(&averages) {
        let reach = 1.5 * eps;
        for j in node_range(fine.ys(), c.y - reach, c.y + reach) {
            for i in node_range(fine.xs(), c.x - reach, c.x + reach) {
                let p = fine.node(i, j);
                let s = cutoff(p.dist(c), eps);
                if s < 1.0 {
                    let k = fine.node_index(i, j);
                    let a = if p.x < c.x { a_l } else { a_r };
                    values[k] = s * values[k] + (1.0 - s) * a;
                }
            }
        }
    }
    let mut lifting = ScalarGridField::new(fine.clone(), values)?;

    // Declared jumps on the cut column of every core.
    let mut columns: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (n, &(c, _, _)) in cores.iter().enumerate() {
        columns.entry(c.x.to_bits()).or_default().push(n);
    }
    for members in columns.values() {
        let cx0 = cores[members[0]].0.x;
        let (ci, _) = fine.locate_cell(Point::new(cx0, cores[members[0]].0.y)).expect("core inside");
        for j in 0..fine.ny() {
            let y = fine.ys()[j];
            let jbar: f64 = -members.iter().filter(|&&n| cores[n].0.y > y).map(|&n| cores[n].1 as f64).sum::<f64>();
            let left = fine.node(ci, j);
            let mut amp = jbar;
            for &n in members {
                let (c, _, _) = cores[n];
                let s = cutoff(left.dist(c), eps);
                if s < 1.0 {
                    let (a_l, a_r) = averages[n];
                    amp = s * jbar + (1.0 - s) * (a_r - a_l);
                }
            }
            if amp != 0.0 {
                lifting.declare_jump(EdgeId::h(ci, j), amp);
            }
        }
    }
    let u = build_s1_field(lifting);

    // Degrees on ∂B_{2ε}.
    let mut degree_failures = 0;
    for &(c, z, _) in &cores {
        let deg = degree_on_circle(&u, &Circle::on_grid(&fine, c, 2.0 * eps)?)?;
        if deg != z {
            degree_failures += 1;
        }
    }

    // Circulation of β̄ = Σ z∇ϑ/2π + G on circles of radius ρ ∈ [2ε, r/2].
    let beta_at = |p: Point| -> Vec2 {
        let mut b = g_cell.sample(p);
        for &(c, z, _) in &cores {
            b = b + unit_kernel(p, c) * z as f64;
        }
        b
    };
    let circulation_residual = cores
        .par_iter()
        .map(|&(c, z, r)| {
            let mut worst = 0.0f64;
            let (lo, hi) = (2.0 * eps, 0.5 * r);
            for k in 0..5 {
                let rho = lo * (hi / lo).powf(k as f64 / 4.0);
                let m = 4096;
                let mut acc = 0.0;
                for s in 0..m {
                    let t = 2.0 * PI * (s as f64 + 0.5) / m as f64;
                    let (sn, cs) = t.sin_cos();
                    let p = c + Point::new(cs, sn) * rho;
                    acc += beta_at(p).dot(Point::new(-sn, cs));
                }
                worst = worst.max((acc * 2.0 * PI * rho / m as f64 - z as f64).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);

    // Kernel energy on the annuli, fine-grid quadrature.
    let mut core_energy = 0.0;
    let mut core_prediction = 0.0;
    let mut core_worst_deviation = 0.0f64;
    for &(c, _, r) in &cores {
        let mut e = 0.0;
        for_cells_near(&fine, c, r, |i, j, p| {
            let rho = p.dist(c);
            if rho > eps && rho < r {
                e += fine.cell_area(i, j) / (4.0 * PI * PI * rho * rho);
            }
        });
        let pred = (r / eps).ln() / (2.0 * PI);
        core_energy += e;
        core_prediction += pred;
        core_worst_deviation = core_worst_deviation.max((e / pred - 1.0).abs());
    }

    let jump_length = u.jump_length();
    let jump_bound = placement.pieces.iter().fold(0.0, |s, p| s + p.count() as f64 * 4.0 * eps);
    let scaling = Scaling::new(opts.regime, eps, Some(n_eps))?;
    let energy = ms_energy(&u, eps)?.with_scaling(scaling);
    let scaled_energy = energy.scaled_total().expect("scaling set");
    let gamma_target = gamma_limit_energy(opts.regime, &density, td)?;

    let flat_dist = match opts.flat_h_q {
        None => None,
        Some(h_q) => {
            let cover = cover_jump_set(&u, eps, CoverOptions::default())?;
            let nu = vortex_measure(&u, &cover.family)?.scale(1.0 / nf);
            Some(flat_distance_to_density(&nu, mu, &coarse, h_q, TestNorm::Combined)?.value)
        }
    };

    let diagnostics = RecoveryDiagnostics {
        epsilon: eps,
        n_eps,
        regime: opts.regime,
        cores: cores.len(),
        degree_failures,
        circulation_residual,
        curl_ratio,
        tree_discrepancy,
        jump_length,
        jump_bound,
        h1_resid,
        core_energy,
        core_prediction,
        core_worst_deviation,
        energy,
        scaled_energy,
        gamma_target,
        flat_dist,
        fine_nodes: fine.node_count(),
    };
    Ok(RecoveryField { u, placement, beta_bar, n_beta, k_hat, k_tilde, correction, psi, diagnostics })
}

pub const REPORT_HEADER: &str = "epsilon,N_eps,scaled_energy,gamma_target,core_ratio,jump_ratio,flat_dist,h1_resid";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub epsilon: f64,
    pub n_eps: u64,
    pub scaled_energy: f64,
    pub gamma_target: f64,
    pub core_ratio: f64,
    pub jump_ratio: f64,
    pub flat_dist: f64,
    pub h1_resid: f64,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epsilon,
            self.n_eps,
            self.scaled_energy,
            self.gamma_target,
            self.core_ratio,
            self.jump_ratio,
            self.flat_dist,
            self.h1_resid
        )
    }
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], mut w: W) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Runs the builder at every ε (in parallel) and returns the diagnostics in input order.
pub fn convergence_report(
    mu: &PiecewiseDensity,
    td: &VectorGridField,
    eps_list: &[f64],
    opts: &RecoveryOptions,
) -> Result<Vec<RecoveryDiagnostics>> {
    if eps_list.len() < 3 {
        return Err(Error::Argument("a convergence report needs at least three ε values".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Argument("ε list must be strictly decreasing".into()));
    }
    eps_list.par_iter().map(|&eps| assemble_recovery_field(mu, td, eps, opts).map(|f| f.diagnostics)).collect()
}
