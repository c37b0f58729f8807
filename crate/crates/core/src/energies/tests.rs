use super::*;
use crate::balls::{balls_at, merge_family, WeightedBall};
use crate::geometry::Rect;
use crate::grid_field::{build_s1_field, canonical_vortex_lifting, vortex_superposition, ScalarGridField};

fn square(lo: f64, hi: f64, h: f64) -> Domain {
    Domain::uniform(Point::new(lo, lo), Point::new(hi, hi), h, 0.0).unwrap()
}

#[test]
fn gl_trivial_fields() {
    let d = square(0.0, 2.0, 1.0 / 16.0);
    let one = PlanarField::from_fn(&d, |_| [1.0, 0.0]);
    let r = gl_energy(&one, 0.1).unwrap();
    assert_eq!(r.total, 0.0);
    let zero = PlanarField::from_fn(&d, |_| [0.0, 0.0]);
    let r = gl_energy(&zero, 0.1).unwrap();
    assert!((r.total - 4.0 / 0.01).abs() < 1e-9);
    assert_eq!(r.total, r.dirichlet + r.second_term);
    assert!(gl_energy(&one, 0.0).is_err());
}

#[test]
fn gl_vortex_annulus() {
    let d = square(-1.0, 1.0, 1.0 / 512.0);
    let c = Point::new(1.0 / 1024.0, 1.0 / 1024.0);
    let u = build_s1_field(canonical_vortex_lifting(&d, c, 1).unwrap());
    let eps = 0.05;
    let r = gl_energy_in(&PlanarField::from_unit(&u), eps, |p| {
        let s = p.dist(c);
        s > eps && s < 1.0
    })
    .unwrap();
    let exact = PI * (1.0 / eps).ln();
    assert!((r.total - exact).abs() < 0.03 * exact, "{} vs {exact}", r.total);
    assert!(r.second_term < 1e-20);
}

#[test]
fn cr_single_vortex_in_unit_disk() {
    let d = square(-1.0, 1.0, 1.0 / 512.0);
    let c = Point::new(1.0 / 1024.0, 1.0 / 1024.0);
    let u = build_s1_field(canonical_vortex_lifting(&d, c, 1).unwrap());
    let eps = 0.05;
    let mu = AtomicMeasure::new([(c, 1.0)]);
    let balls = merge_family(&balls_at(&[(c, 1)], eps).unwrap());
    let r = cr_energy_in(&u, &mu, &balls, eps, |p| p.dist(c) < 1.0).unwrap();
    let exact = PI * 20f64.ln() + 1.0;
    assert!((r.total - exact).abs() < 0.03 * exact, "{} vs {exact}", r.total);
    assert_eq!(r.second_term, 1.0);
}

#[test]
fn cr_two_vortices_and_degree_mismatch() {
    let d = square(-2.0, 2.0, 1.0 / 128.0);
    let (a, b) = (Point::new(-0.5, 0.0), Point::new(0.5, 0.0));
    let u = build_s1_field(vortex_superposition(&d, &[(a, 1), (b, 1)]).unwrap());
    let eps = 0.05;
    let (a, b) = (d.snap_to_cell_center(a).unwrap(), d.snap_to_cell_center(b).unwrap());
    let mu = AtomicMeasure::new([(a, 1.0), (b, 1.0)]);
    let balls = merge_family(&balls_at(&[(a, 1), (b, 1)], eps).unwrap());
    // Ω = B₁ around the midpoint.
    let r = cr_energy_in(&u, &mu, &balls, eps, |p| p.dist(Point::ZERO) < 1.0).unwrap();
    let exact = 2.0 * PI * (1.0 / eps).ln() + 2.0;
    assert!((r.total - exact).abs() < 0.05 * exact, "{} vs {exact}", r.total);

    let wrong = AtomicMeasure::new([(a, 1.0), (b, -1.0)]);
    assert!(matches!(cr_energy(&u, &wrong, &balls, eps), Err(Error::Compatibility(_))));
}

#[test]
fn cr_trivial() {
    let d = square(0.0, 1.0, 1.0 / 32.0);
    let u = build_s1_field(ScalarGridField::constant(&d, 0.2));
    let r = cr_energy(&u, &AtomicMeasure::empty(), &BallFamily::empty(), 0.1).unwrap();
    assert_eq!(r.total, 0.0);
}

#[test]
fn ms_examples() {
    let d = Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 0.01, 0.1).unwrap();
    let u = build_s1_field(ScalarGridField::constant(&d, 0.4));
    assert_eq!(ms_energy(&u, 0.1).unwrap().total, 0.0);

    // Closed 5 × 5 block lifted by 1.25: no gradient, fractional jump set of
    // length 0.2 (its perimeter).
    let block =
        ScalarGridField::from_fn(
            &d,
            |p| {
                if p.x > 0.405 && p.x < 0.455 && p.y > 0.405 && p.y < 0.455 {
                    1.25
                } else {
                    0.0
                }
            },
        );
    let u = build_s1_field(block);
    let r = ms_energy(&u, 0.1).unwrap();
    assert!(r.dirichlet.abs() < 1e-20);
    assert!((r.second_term - 2.0).abs() < 1e-12, "{}", r.second_term);
    assert!(r.admissible);
    let r2 = ms_energy(&u, 0.05).unwrap();
    assert!((r2.second_term - 2.0 * r.second_term).abs() < 1e-12);

    let edge = ScalarGridField::from_fn(&d, |p| if p.x < 0.05 { 0.7 } else { 0.0 });
    assert!(!ms_energy(&build_s1_field(edge), 0.1).unwrap().admissible);
}

#[test]
fn ms_vortex_has_no_jump_term() {
    let d = square(-1.0, 1.0, 1.0 / 128.0);
    let u = build_s1_field(canonical_vortex_lifting(&d, Point::new(0.0, 0.0), 1).unwrap());
    let r = ms_energy(&u, 0.1).unwrap();
    assert_eq!(r.second_term, 0.0);
    // π log(R/h) + O(1) with R ≈ 1.
    let lead = PI * 128f64.ln();
    assert!((r.dirichlet - lead).abs() < 3.0, "{} vs {lead}", r.dirichlet);
}

#[test]
fn gamma_limits() {
    let d = square(0.0, 1.0, 1.0 / 64.0);
    let p = Point::new(0.5, 0.5);
    let mu = VortexDensity::Atomic(AtomicMeasure::new([(p, 2.0), (Point::new(0.2, 0.2), -1.0)]));
    let zero_t = VectorGridField::zeros(&d);
    assert!((gamma_limit_energy(Regime::Subcritical, &mu, &zero_t).unwrap() - 3.0 * PI).abs() < 1e-12);

    let unit_t = VectorGridField::from_fn(&d, |_| Point::new(0.6, 0.8));
    let none = VortexDensity::Atomic(AtomicMeasure::empty());
    assert!((gamma_limit_energy(Regime::Critical, &none, &unit_t).unwrap() - 2.0).abs() < 1e-12);
    assert!((gamma_limit_energy(Regime::Supercritical, &none, &unit_t).unwrap() - 2.0).abs() < 1e-12);
    assert!(matches!(gamma_limit_energy(Regime::Critical, &mu, &unit_t), Err(Error::Constraint { .. })));
}

#[test]
fn critical_compatibility_with_potential_field() {
    // −Δψ = μ for μ = χ of a centred square: T^D = π∇ψ built from the discrete solve.
    let d = square(0.0, 1.0, 1.0 / 128.0);
    let dens = PiecewiseDensity::rects(&[(Rect::new(Point::new(0.3, 0.3), Point::new(0.7, 0.7)), 1.0)]).unwrap();
    let loads = crate::measures::exact_loads(&d, &dens, &[]);
    let (psi, _) = crate::poisson::solve_node_dirichlet(&d, &loads).unwrap();
    let td = VectorGridField::from_fn(&d, |_| Point::ZERO);
    let mut values = td.values().to_vec();
    for j in 0..d.cells_y() {
        for i in 0..d.cells_x() {
            let gx = 0.5 * ((psi.value(i + 1, j) - psi.value(i, j)) + (psi.value(i + 1, j + 1) - psi.value(i, j + 1)))
                / d.dx(i);
            let gy = 0.5 * ((psi.value(i, j + 1) - psi.value(i, j)) + (psi.value(i + 1, j + 1) - psi.value(i + 1, j)))
                / d.dy(j);
            values[d.cell_index(i, j)] = Point::new(gx, gy) * PI;
        }
    }
    let td = VectorGridField::new(d.clone(), values).unwrap();
    let mu = VortexDensity::Piecewise(dens);
    let crit = gamma_limit_energy(Regime::Critical, &mu, &td).unwrap();
    let sub = gamma_limit_energy(Regime::Subcritical, &mu, &td).unwrap();
    assert!(crit > sub);
    assert!(compatibility_residual(&mu, &td, 10, 1) < COMPATIBILITY_TOL);
}

#[test]
fn scaling_and_csv() {
    let s = Scaling::new(Regime::Critical, 1e-2, Some(4)).unwrap();
    assert!((s.divisor - 4.0 * 100f64.ln()).abs() < 1e-12);
    assert!(Scaling::new(Regime::Supercritical, 1e-2, None).is_err());
    let r = EnergyReport::new(0.01, 1.0, 2.0).with_scaling(Scaling::custom(Regime::Subcritical, 3.0).unwrap());
    let mut buf = Vec::new();
    r.write_csv_row(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "0.01,subcritical,1,2,3,1,true\n");
    let _ = WeightedBall::new(Point::ZERO, 1.0, 1).unwrap();
}
