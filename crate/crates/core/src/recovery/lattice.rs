use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid_field::Domain;
use crate::measures::{exact_loads, h_minus1_norm_loads, AtomicMeasure, PiecewiseDensity};

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePiece {
    /// Index of the density piece.
    pub piece: usize,
    pub level: f64,
    /// sign(m^l).
    pub degree: i64,
    /// r^l = 1/(2√(N|m^l|)); `None` for zero levels.
    pub radius: Option<f64>,
    pub points: Vec<Point>,
    /// |N^l/N − |m^l||ω^l||.
    pub deviation: f64,
    /// |m^l|·Per(ω^l)·2r^l, the size of the strip missed near ∂ω^l.
    pub deviation_bound: f64,
}

impl LatticePiece {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePlacement {
    pub n_eps: u64,
    pub pieces: Vec<LatticePiece>,
}

impl LatticePlacement {
    pub fn total_count(&self) -> usize {
        self.pieces.iter().map(|p| p.count()).sum()
    }

    /// (centre, degree, lattice radius) of every vortex.
    pub fn cores(&self) -> Vec<(Point, i64, f64)> {
        self.pieces
            .iter()
            .flat_map(|p| p.points.iter().map(move |&x| (x, p.degree, p.radius.expect("occupied piece"))))
            .collect()
    }

    pub fn min_radius(&self) -> Option<f64> {
        self.pieces.iter().filter(|p| !p.points.is_empty()).filter_map(|p| p.radius).reduce(f64::min)
    }

    /// μ_ε = Σ z δ_x.
    pub fn measure(&self) -> AtomicMeasure {
        AtomicMeasure::new(self.cores().into_iter().map(|(x, z, _)| (x, z as f64)))
    }
}

/// Points of 2r^l ℤ² whose closed r^l-square lies in ω^l, for every piece.
pub fn lattice_vortices(mu: &PiecewiseDensity, n_eps: u64) -> Result<LatticePlacement> {
    if n_eps == 0 {
        return Err(Error::Argument("N_ε must be at least 1".into()));
    }
    let n = n_eps as f64;
    let mut pieces = Vec::new();
    for (k, piece) in mu.pieces().iter().enumerate() {
        let m = piece.level;
        let area = piece.region.area();
        if m == 0.0 {
            pieces.push(LatticePiece {
                piece: k,
                level: 0.0,
                degree: 0,
                radius: None,
                points: Vec::new(),
                deviation: 0.0,
                deviation_bound: 0.0,
            });
            continue;
        }
        let r = 1.0 / (2.0 * (n * m.abs()).sqrt());
        let inradius = piece.region.inradius();
        if r >= 0.5 * inradius {
            return Err(Error::Geometry(format!("piece {k} is too thin for lattice radius {r} (inradius {inradius})")));
        }
        let bb = piece.region.bounding_box();
        let step = 2.0 * r;
        let range = |lo: f64, hi: f64| ((lo / step).floor() as i64)..=((hi / step).ceil() as i64);
        let mut points = Vec::new();
        for b in range(bb.lower.y, bb.upper.y) {
            for a in range(bb.lower.x, bb.upper.x) {
                let z = Point::new(a as f64 * step, b as f64 * step);
                if piece.region.contains_closed_square(z, r) {
                    points.push(z);
                }
            }
        }
        let ratio = points.len() as f64 / n;
        pieces.push(LatticePiece {
            piece: k,
            level: m,
            degree: if m > 0.0 { 1 } else { -1 },
            radius: Some(r),
            points,
            deviation: (ratio - m.abs() * area).abs(),
            deviation_bound: m.abs() * piece.region.perimeter() * 2.0 * r,
        });
    }
    Ok(LatticePlacement { n_eps, pieces })
}

/// ‖μ̃_ε/N_ε − μ‖_{H⁻¹(Ω)} with μ̃_ε the uniform densities on the lattice balls.
pub fn lattice_h1_residual(placement: &LatticePlacement, mu: &PiecewiseDensity, domain: &Domain) -> Result<f64> {
    let n = placement.n_eps as f64;
    let balls: Vec<(Point, f64, f64)> = placement.cores().into_iter().map(|(c, z, r)| (c, r, z as f64 / n)).collect();
    let mut loads = exact_loads(domain, &PiecewiseDensity::zero(), &balls);
    for (l, m) in loads.iter_mut().zip(exact_loads(domain, mu, &[])) {
        *l -= m;
    }
    h_minus1_norm_loads(domain, &loads)
}
