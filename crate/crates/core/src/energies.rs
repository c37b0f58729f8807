//! ε-level energies (Ginzburg–Landau, core-radius, jump-penalised) and the
//! Γ-limit energies of the three scaling regimes.

use crate::balls::BallFamily;
use crate::currents::{degree_on_circle, Circle};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid_field::{Domain, S1GridField, VectorGridField};
use crate::measures::{total_variation, AtomicMeasure, PiecewiseDensity};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Energy ~ |log ε|.
    Subcritical,
    /// Energy ~ |log ε|².
    Critical,
    /// Energy ~ N_ε², |log ε| ≪ N_ε ≪ 1/ε.
    Supercritical,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "subcritical" => Some(Regime::Subcritical),
            "critical" => Some(Regime::Critical),
            "supercritical" => Some(Regime::Supercritical),
            _ => None,
        }
    }
}

/// Regime tag with the divisor used for rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scaling {
    pub regime: Regime,
    pub divisor: f64,
}

impl Scaling {
    /// |log ε| (subcritical), N_ε|log ε| or |log ε|² (critical), N_ε² (supercritical).
    pub fn new(regime: Regime, eps: f64, n_eps: Option<u64>) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Argument(format!("ε must lie in (0, 1), got {eps}")));
        }
        let l = eps.ln().abs();
        let divisor = match (regime, n_eps) {
            (Regime::Subcritical, _) => l,
            (Regime::Critical, Some(n)) => n as f64 * l,
            (Regime::Critical, None) => l * l,
            (Regime::Supercritical, Some(n)) => (n as f64).powi(2),
            (Regime::Supercritical, None) => return Err(Error::Argument("the supercritical scaling needs N_ε".into())),
        };
        Ok(Scaling { regime, divisor })
    }

    /// A user-supplied divisor for intermediate energy regimes.
    pub fn custom(regime: Regime, divisor: f64) -> Result<Self> {
        if !(divisor > 0.0) {
            return Err(Error::Argument("scaling divisor must be positive".into()));
        }
        Ok(Scaling { regime, divisor })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub epsilon: f64,
    pub dirichlet: f64,
    /// Potential, core or jump term depending on the functional.
    pub second_term: f64,
    pub total: f64,
    pub scaling: Option<Scaling>,
    /// False when the energy is +∞ because the jump set leaves Ω′.
    pub admissible: bool,
}

impl EnergyReport {
    fn new(epsilon: f64, dirichlet: f64, second_term: f64) -> Self {
        EnergyReport {
            epsilon,
            dirichlet,
            second_term,
            total: dirichlet + second_term,
            scaling: None,
            admissible: true,
        }
    }

    pub fn with_scaling(mut self, s: Scaling) -> Self {
        self.scaling = Some(s);
        self
    }

    pub fn scaled_total(&self) -> Option<f64> {
        self.scaling.map(|s| self.total / s.divisor)
    }

    pub const CSV_HEADER: &'static str = "epsilon,regime,dirichlet,second_term,total,scaled_total,admissible";

    pub fn write_csv_row<W: Write>(&self, mut w: W) -> Result<()> {
        let regime = self.scaling.map_or("none", |s| s.regime.name());
        let scaled = self.scaled_total().map_or(String::new(), |v| v.to_string());
        writeln!(
            w,
            "{},{regime},{},{},{},{scaled},{}",
            self.epsilon, self.dirichlet, self.second_term, self.total, self.admissible
        )?;
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("ε must be positive, got {eps}")))
    }
}

/// Nodal ℝ²-valued field, not constrained to the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarField {
    domain: Domain,
    values: Vec<[f64; 2]>,
}

impl PlanarField {
    pub fn new(domain: Domain, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::Argument("planar field size does not match the node count".into()));
        }
        Ok(PlanarField { domain, values })
    }

    pub fn from_fn(domain: &Domain, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let mut values = Vec::with_capacity(domain.node_count());
        for j in 0..domain.ny() {
            for i in 0..domain.nx() {
                values.push(f(domain.node(i, j)));
            }
        }
        PlanarField { domain: domain.clone(), values }
    }

    pub fn from_unit(u: &S1GridField) -> Self {
        PlanarField { domain: u.domain().clone(), values: u.units().to_vec() }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.domain.node_index(i, j)]
    }

    /// |∇u|² on cell `(i, j)` from the bilinear interpolant at the centre.
    fn cell_gradient_sq(&self, i: usize, j: usize) -> f64 {
        let d = &self.domain;
        let (a, b, c, e) = (self.at(i, j), self.at(i + 1, j), self.at(i, j + 1), self.at(i + 1, j + 1));
        (0..2)
            .map(|k| {
                let gx = 0.5 * ((b[k] - a[k]) + (e[k] - c[k])) / d.dx(i);
                let gy = 0.5 * ((c[k] - a[k]) + (e[k] - b[k])) / d.dy(j);
                gx * gx + gy * gy
            })
            .sum()
    }
}

/// ½∫|∇u|² + ε⁻²∫(1 − |u|²)², over cells whose centre satisfies `keep`.
pub fn gl_energy_in(u: &PlanarField, eps: f64, keep: impl Fn(Point) -> bool) -> Result<EnergyReport> {
    check_eps(eps)?;
    let d = &u.domain;
    let mut dirichlet = 0.0;
    for j in 0..d.cells_y() {
        for i in 0..d.cells_x() {
            if keep(d.cell_center(i, j)) {
                dirichlet += 0.5 * u.cell_gradient_sq(i, j) * d.cell_area(i, j);
            }
        }
    }
    let mut potential = 0.0;
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            if keep(d.node(i, j)) {
                let v = u.at(i, j);
                let defect = 1.0 - (v[0] * v[0] + v[1] * v[1]);
                potential += defect * defect * d.dual_area(i, j);
            }
        }
    }
    Ok(EnergyReport::new(eps, dirichlet, potential / (eps * eps)))
}

pub fn gl_energy(u: &PlanarField, eps: f64) -> Result<EnergyReport> {
    gl_energy_in(u, eps, |_| true)
}

/// ½∫|∇u|² = 2π²∫|∇φ|² over the cells whose centre satisfies `keep`.
pub fn dirichlet_energy_in(u: &S1GridField, keep: impl Fn(Point) -> bool) -> f64 {
    let d = u.domain();
    let mut acc = 0.0;
    for j in 0..d.cells_y() {
        for i in 0..d.cells_x() {
            let c = d.cell_center(i, j);
            if keep(c) {
                acc += 2.0 * PI * PI * u.cell_gradient(i, j).norm_sq() * d.cell_area(i, j);
            }
        }
    }
    acc
}

/// ½∫_{Ω_ε(μ)}|∇u|² + |μ|(Ω), the Dirichlet part over cells outside every
/// closed ball of the family.
pub fn cr_energy(u: &S1GridField, mu: &AtomicMeasure, balls: &BallFamily, eps: f64) -> Result<EnergyReport> {
    cr_energy_in(u, mu, balls, eps, |_| true)
}

pub fn cr_energy_in(
    u: &S1GridField,
    mu: &AtomicMeasure,
    balls: &BallFamily,
    eps: f64,
    keep: impl Fn(Point) -> bool,
) -> Result<EnergyReport> {
    check_eps(eps)?;
    if !balls.is_disjoint() {
        return Err(Error::Argument("core balls must be pairwise disjoint".into()));
    }
    for (k, b) in balls.balls.iter().enumerate() {
        let expected = mu.mass_in_ball(b.center, b.radius);
        let deg = degree_on_circle(u, &Circle::on_grid(u.domain(), b.center, b.radius)?)?;
        if deg as f64 != expected {
            return Err(Error::Compatibility(format!(
                "ball {k} at ({}, {}) has degree {deg} but encloses vortex mass {expected}",
                b.center.x, b.center.y
            )));
        }
    }
    let dirichlet = dirichlet_energy_in(u, |c| keep(c) && !balls.covers(c));
    Ok(EnergyReport::new(eps, dirichlet, total_variation(mu)))
}

/// ½∫|∇u|² + ε⁻¹ℋ¹(S_u). Discrete jump sets are closed, so the variant
/// penalising the closure of S_u takes the same value.
pub fn ms_energy(u: &S1GridField, eps: f64) -> Result<EnergyReport> {
    check_eps(eps)?;
    let d = u.domain();
    let inner = d.inner();
    let admissible = u.fractional_jumps().all(|j| {
        let (a, b) = d.dual_segment(j.edge);
        inner.contains(a) && inner.contains(b)
    });
    let mut r = EnergyReport::new(eps, dirichlet_energy_in(u, |_| true), u.jump_length() / eps);
    r.admissible = admissible;
    Ok(r)
}

/// Either kind of limiting vortex density.
#[derive(Debug, Clone, PartialEq)]
pub enum VortexDensity {
    Atomic(AtomicMeasure),
    Piecewise(PiecewiseDensity),
}

impl VortexDensity {
    pub fn total_variation(&self) -> f64 {
        match self {
            VortexDensity::Atomic(m) => total_variation(m),
            VortexDensity::Piecewise(p) => p.total_variation(),
        }
    }

    /// ∫φ dμ; piecewise densities use exact cell masses at cell centres.
    fn integrate(&self, domain: &Domain, phi: impl Fn(Point) -> f64) -> f64 {
        match self {
            VortexDensity::Atomic(m) => m.atoms().iter().map(|a| a.weight * phi(a.position)).sum(),
            VortexDensity::Piecewise(p) => {
                let mut acc = 0.0;
                for j in 0..domain.cells_y() {
                    for i in 0..domain.cells_x() {
                        let mass = p.mass_in_rect(&domain.cell_rect(i, j));
                        if mass != 0.0 {
                            acc += mass * phi(domain.cell_center(i, j));
                        }
                    }
                }
                acc
            }
        }
    }
}

/// Relative tolerance of the −Div T^D = πμ pairing check.
pub const COMPATIBILITY_TOL: f64 = 0.02;

/// Worst relative residual of ∫∇φ·T^D = π∫φ dμ over `tests` random smooth
/// bumps supported in Ω′.
pub fn compatibility_residual(mu: &VortexDensity, td: &VectorGridField, tests: usize, seed: u64) -> f64 {
    let d = td.domain();
    let inner = d.inner();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..tests {
        let rmax = 0.5 * inner.width().min(inner.height());
        let r = rng.gen_range(0.3 * rmax..rmax);
        let c = Point::new(
            rng.gen_range(inner.lower.x + r..=inner.upper.x - r),
            rng.gen_range(inner.lower.y + r..=inner.upper.y - r),
        );
        // (1 − s²)³ for s = |x − c|/r < 1: C² with compact support.
        let phi = |p: Point| {
            let s2 = (p - c).norm_sq() / (r * r);
            if s2 < 1.0 {
                (1.0 - s2).powi(3)
            } else {
                0.0
            }
        };
        let grad = |p: Point| {
            let s2 = (p - c).norm_sq() / (r * r);
            if s2 < 1.0 {
                (p - c) * (-6.0 * (1.0 - s2).powi(2) / (r * r))
            } else {
                Point::ZERO
            }
        };
        let lhs = td.integrate(|x, t| grad(x).dot(t));
        let rhs = PI * mu.integrate(d, phi);
        let scale = rhs.abs() + td.integrate(|x, t| grad(x).norm() * t.norm());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}

/// π|μ|(Ω), π|μ|(Ω) + 2∫|T^D|², or 2∫|T^D|².
pub fn gamma_limit_energy(regime: Regime, mu: &VortexDensity, td: &VectorGridField) -> Result<f64> {
    let vortex = PI * mu.total_variation();
    let diffuse = 2.0 * td.l2_norm_sq();
    match regime {
        Regime::Subcritical => Ok(vortex),
        Regime::Supercritical => Ok(diffuse),
        Regime::Critical => {
            let worst = compatibility_residual(mu, td, 10, 0x5eed);
            if worst > COMPATIBILITY_TOL {
                return Err(Error::Constraint { worst_residual: worst, tolerance: COMPATIBILITY_TOL });
            }
            Ok(vortex + diffuse)
        }
    }
}

#[cfg(test)]
mod tests;
