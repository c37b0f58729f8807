use super::*;
use proptest::prelude::*;

fn unit_square() -> Rect {
    Rect::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0))
}

fn flat(mu: &AtomicMeasure, r: &Rect, norm: TestNorm) -> f64 {
    flat_norm_atomic_in(mu, r, norm).unwrap().value
}

#[test]
fn total_variation_examples() {
    let p = Point::new(0.5, 0.5);
    assert_eq!(total_variation(&AtomicMeasure::new([(p, 2.0), (p, -1.0)])), 3.0);
    assert_eq!(total_variation(&AtomicMeasure::empty()), 0.0);
    assert_eq!(total_variation(&AtomicMeasure::new([(p, -5.0)])), 5.0);
    assert!(AtomicMeasure::new([(p, 0.0)]).is_empty());
}

#[test]
fn single_atom_near_boundary() {
    let mu = AtomicMeasure::new([(Point::new(0.3, 0.5), 1.0)]);
    assert!((flat(&mu, &unit_square(), TestNorm::Max) - 0.3).abs() < 1e-6);
    // max over s of min(1 − s, 0.3 s)
    let combined = flat_norm_atomic_in(&mu, &unit_square(), TestNorm::Combined).unwrap();
    assert!((combined.value - 0.3 / 1.3).abs() < 1e-6);
    assert!((combined.split - 1.0 / 1.3).abs() < 1e-4);
}

#[test]
fn dipole_far_from_boundary() {
    let r = Rect::new(Point::new(0.0, 0.0), Point::new(3.0, 3.0));
    let mu = AtomicMeasure::new([(Point::new(1.45, 1.5), 1.0), (Point::new(1.55, 1.5), -1.0)]);
    assert!((flat(&mu, &r, TestNorm::Max) - 0.1).abs() < 1e-6);
    // pairing 0.1 s against absorbing both at 2(1 − s)
    assert!((flat(&mu, &r, TestNorm::Combined) - 0.2 / 2.1).abs() < 1e-6);
}

#[test]
fn zero_measure_and_boundary_atom() {
    assert_eq!(flat(&AtomicMeasure::empty(), &unit_square(), TestNorm::Combined), 0.0);
    let mu = AtomicMeasure::new([(Point::new(0.0, 0.5), 1.0)]);
    assert!(matches!(flat_norm_atomic_in(&mu, &unit_square(), TestNorm::Max), Err(Error::Argument(_))));
}

#[test]
fn pruned_arcs_reach_the_dense_optimum() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let atoms: Vec<(Point, f64)> = (0..30)
            .map(|_| {
                let w = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.1..2.0);
                (Point::new(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)), w)
            })
            .collect();
        let tr = Transport::new(&AtomicMeasure::new(atoms), &unit_square());
        for (a, b) in [(1.0, 1.0), (0.3, 0.7), (0.9, 0.1)] {
            let dense = tr.value_pruned(a, b, usize::MAX);
            let sparse = tr.value_pruned(a, b, 1);
            assert!((dense - sparse).abs() < 1e-9, "{dense} vs {sparse}");
        }
    }
}

#[test]
fn oracle_single_atom_at_center() {
    let h = 1.0 / 64.0;
    let mu = AtomicMeasure::new([(Point::new(0.5, 0.5), 1.0)]);
    let max = flat_norm_lp_oracle_in(&mu, &unit_square(), h, TestNorm::Max).unwrap();
    assert!((max.value - 0.5).abs() <= 2.0 * h);
    let d = Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), h, 0.0).unwrap();
    let combined = flat_norm_lp_oracle(&mu, &d, h).unwrap();
    assert!((combined - 1.0 / 3.0).abs() <= 2.0 * h);
    let neg = flat_norm_lp_oracle(&mu.negate(), &d, h).unwrap();
    assert_eq!(combined, neg);
}

#[test]
fn oracle_rejects_unresolved_atoms() {
    let mu = AtomicMeasure::new([(Point::new(0.5, 0.5), 1.0), (Point::new(0.52, 0.5), -1.0)]);
    assert!(matches!(
        flat_norm_lp_oracle_in(&mu, &unit_square(), 1.0 / 64.0, TestNorm::Combined),
        Err(Error::Argument(_))
    ));
}

#[test]
fn oracle_agrees_with_flow_on_dipole_and_triple() {
    let h = 1.0 / 64.0;
    let cases = [
        vec![(Point::new(0.3, 0.4), 1.0), (Point::new(0.6, 0.7), -1.0)],
        vec![(Point::new(0.2, 0.2), 2.0), (Point::new(0.5, 0.5), -1.0), (Point::new(0.8, 0.3), -0.5)],
    ];
    for atoms in cases {
        let mu = AtomicMeasure::new(atoms);
        for norm in [TestNorm::Max, TestNorm::Combined] {
            let o = flat_norm_lp_oracle_in(&mu, &unit_square(), h, norm).unwrap().value;
            let f = flat(&mu, &unit_square(), norm);
            assert!((o - f).abs() <= 2.0 * h, "{norm:?}: oracle {o} flow {f}");
        }
    }
}

#[test]
fn flat_distance_examples() {
    let d = Domain::uniform(Point::new(-2.0, -2.0), Point::new(3.0, 3.0), 0.1, 0.0).unwrap();
    let mu = PiecewiseDensity::rects(&[(unit_square(), 1.0)]).unwrap();
    let exact = mu.atomize(0.1);
    let fd = flat_distance_to_density(&exact, &mu, &d, 0.1, TestNorm::Combined).unwrap();
    assert!(fd.value <= fd.atomization_bound);
    assert!(fd.value.abs() < 1e-9);

    let n = 50.0;
    let nu = AtomicMeasure::new([(Point::new(0.5, 0.5), 1.0 / n)]);
    let zero = PiecewiseDensity::zero();
    let max = flat_distance_to_density(&nu, &zero, &d, 0.1, TestNorm::Max).unwrap();
    assert!((max.value - 1.0 / n).abs() < 1e-6);
    let comb = flat_distance_to_density(&nu, &zero, &d, 0.1, TestNorm::Combined).unwrap();
    assert!((comb.value - 2.5 / 3.5 / n).abs() < 1e-6);
}

#[test]
fn atomization_conserves_mass() {
    let mu = PiecewiseDensity::rects(&[
        (Rect::new(Point::new(0.0, 0.0), Point::new(0.33, 0.71)), 2.0),
        (Rect::new(Point::new(0.5, 0.1), Point::new(0.9, 0.2)), -1.5),
    ])
    .unwrap();
    let a = mu.atomize(0.05);
    assert!((a.total_mass() - (2.0 * 0.33 * 0.71 - 1.5 * 0.4 * 0.1)).abs() < 1e-12);
    assert!((total_variation(&a) - mu.total_variation()).abs() < 1e-12);
}

#[test]
fn overlapping_pieces_rejected() {
    let r = unit_square();
    assert!(PiecewiseDensity::rects(&[(r, 1.0), (Rect::new(Point::new(0.5, 0.5), Point::new(2.0, 2.0)), 1.0)]).is_err());
    assert!(PiecewiseDensity::rects(&[(r, 1.0), (Rect::new(Point::new(1.0, 0.0), Point::new(2.0, 1.0)), 1.0)]).is_ok());
}

#[test]
fn csv_round_trip() {
    let mu = AtomicMeasure::new([(Point::new(0.25, 0.5), 1.5), (Point::new(0.125, 0.75), -2.0)]);
    let mut buf = Vec::new();
    mu.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x,y,weight\n"));
    assert_eq!(AtomicMeasure::read_csv(&buf[..]).unwrap(), mu);
    let dens = PiecewiseDensity::rects(&[(unit_square(), 0.5)]).unwrap();
    let mut buf = Vec::new();
    dens.write_csv(&mut buf).unwrap();
    assert_eq!(PiecewiseDensity::read_csv(&buf[..]).unwrap(), dens);
}

#[test]
fn mask_pieces() {
    let d = Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 0.25, 0.0).unwrap();
    let mut cells = vec![false; d.cell_count()];
    for (i, j) in [(1, 1), (2, 1), (1, 2)] {
        cells[d.cell_index(i, j)] = true;
    }
    let region = PieceRegion::Mask(CellMask::new(d, cells).unwrap());
    assert!((region.area() - 3.0 / 16.0).abs() < 1e-15);
    assert!((region.perimeter() - 2.0).abs() < 1e-15);
    assert!(region.contains(Point::new(0.6, 0.3)));
    assert!(!region.contains(Point::new(0.6, 0.6)));
    assert!(region.contains_closed_square(Point::new(0.375, 0.375), 0.1));
    assert!(!region.contains_closed_square(Point::new(0.6, 0.6), 0.05));
}

#[test]
fn h_minus1_examples() {
    let d = Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 1.0 / 128.0, 0.0).unwrap();
    let pi = std::f64::consts::PI;
    let f = ScalarGridField::from_fn(&d, |p| (pi * p.x).sin() * (pi * p.y).sin());
    let n = h_minus1_norm(&f).unwrap();
    let exact = 1.0 / (2.0 * 2f64.sqrt() * pi);
    assert!((n - exact).abs() < 0.01 * exact, "{n} vs {exact}");
    let n2 = h_minus1_norm(&f.scale(2.0)).unwrap();
    assert!((n2 - 2.0 * n).abs() < 1e-10 * n);
    assert_eq!(h_minus1_norm(&ScalarGridField::constant(&d, 0.0)).unwrap(), 0.0);
}

fn atoms_strategy(max: usize) -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((0.02f64..0.98, 0.02f64..0.98, -3.0f64..3.0), 0..max)
        .prop_map(|v| AtomicMeasure::new(v.into_iter().map(|(x, y, w)| (Point::new(x, y), (w * 1e3).round() / 1e3))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flat_norm_bounded_by_total_variation(mu in atoms_strategy(10)) {
        for norm in [TestNorm::Max, TestNorm::Combined] {
            prop_assert!(flat(&mu, &unit_square(), norm) <= total_variation(&mu) + 1e-9);
        }
    }

    #[test]
    fn flat_norm_symmetric(mu in atoms_strategy(10)) {
        for norm in [TestNorm::Max, TestNorm::Combined] {
            prop_assert_eq!(flat(&mu, &unit_square(), norm), flat(&mu.negate(), &unit_square(), norm));
        }
    }

    #[test]
    fn flat_norm_triangle(mu in atoms_strategy(6), nu in atoms_strategy(6)) {
        for norm in [TestNorm::Max, TestNorm::Combined] {
            let lhs = flat(&mu.plus(&nu), &unit_square(), norm);
            let rhs = flat(&mu, &unit_square(), norm) + flat(&nu, &unit_square(), norm);
            prop_assert!(lhs <= rhs + 1e-6, "{} > {}", lhs, rhs);
        }
    }

    #[test]
    fn h_minus1_parallelogram(a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.5f64..3.0) {
        let d = Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 1.0 / 32.0, 0.0).unwrap();
        let f = ScalarGridField::from_fn(&d, |p| a * p.x + b * p.y * p.y);
        let g = ScalarGridField::from_fn(&d, |p| (c * p.x).cos() - p.y);
        let n = |u: &ScalarGridField| h_minus1_norm(u).unwrap();
        let sum = f.add(&g).unwrap();
        let diff = f.add(&g.scale(-1.0)).unwrap();
        let lhs = n(&sum).powi(2) + n(&diff).powi(2);
        let rhs = 2.0 * (n(&f).powi(2) + n(&g).powi(2));
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs));
        prop_assert!((n(&f.scale(-c)) - c * n(&f)).abs() <= 1e-8 * (1.0 + n(&f)));
    }
}
