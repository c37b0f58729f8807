use super::Check;
use crate::balls::{balls_at, check_trace, grow_family, BallFamily};
use crate::currents::{degree_on_circle, prejacobian_lambda, supercurrent, t_current, Circle};
use crate::geometry::{Point, Rect};
use crate::grid_field::{build_s1_field, canonical_vortex_lifting, vortex_superposition, Domain, ScalarGridField};
use crate::measures::{flat_norm_atomic_in, flat_norm_lp_oracle_in, PiecewiseDensity, TestNorm};
use crate::poisson::{density_loads, solve_node_dirichlet};
use crate::recovery::{assemble_recovery_field, build_td, lattice_vortices, RecoveryOptions, TdSpec};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn run(name: &str, f: impl FnOnce() -> crate::Result<(bool, String)>) -> Check {
    match f() {
        Ok((ok, detail)) => Check::new(name, ok, detail),
        Err(e) => Check::new(name, false, format!("error: {e}")),
    }
}

/// Small, fast re-runs of the core invariants.
pub fn selftest() -> Vec<Check> {
    let mut out = Vec::new();

    out.push(run("degree of a canonical vortex", || {
        let d = Domain::uniform(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), 1.0 / 64.0, 0.0)?;
        let c = Point::new(1.0 / 128.0, 1.0 / 128.0);
        let mut bad = Vec::new();
        for z in [-2, -1, 1, 3] {
            let u = build_s1_field(canonical_vortex_lifting(&d, c, z)?);
            let deg = degree_on_circle(&u, &Circle::on_grid(&d, c, 0.5)?)?;
            if deg != z {
                bad.push((z, deg));
            }
        }
        Ok((bad.is_empty(), format!("mismatches {bad:?}")))
    }));

    out.push(run("pre-Jacobian and diffuse current identities", || {
        let d = Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 1.0 / 32.0, 0.0)?;
        let u = build_s1_field(vortex_superposition(
            &d,
            &[
                (Point::new(0.3 + 1.0 / 64.0, 0.4 + 1.0 / 64.0), 1),
                (Point::new(0.7 - 1.0 / 64.0, 0.6 + 1.0 / 64.0), -1),
            ],
        )?);
        let lam = prejacobian_lambda(&u);
        let j = supercurrent(&u);
        let t = t_current(&u);
        let mut worst = 0.0f64;
        for ((l, jv), (td, k)) in lam.values().iter().zip(j.values()).zip(t.diffuse.values().iter().zip(0..)) {
            let (ci, cj) = (k % d.cells_x(), k / d.cells_x());
            let g = u.cell_gradient(ci, cj).perp() * PI;
            worst = worst.max((*l - jv.perp()).norm()).max((*td - g).norm());
        }
        Ok((worst < 1e-10, format!("max deviation {worst:.3e}")))
    }));

    out.push(run("min-cost flow agrees with the LP oracle", || {
        let bounds = Rect::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        let h = 1.0 / 64.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let mu = super::random_flat_instance(&mut rng, &bounds, 4, 2.1 * h);
            let a = flat_norm_atomic_in(&mu, &bounds, TestNorm::Combined)?.value;
            let b = flat_norm_lp_oracle_in(&mu, &bounds, h, TestNorm::Combined)?.value;
            worst = worst.max((a - b).abs());
        }
        Ok((worst <= 2.0 * h, format!("worst difference {worst:.3e}")))
    }));

    out.push(run("ball growth trace", || {
        let centres = [(Point::new(0.0, 0.0), 1), (Point::new(0.3, 0.0), -1), (Point::new(0.0, 0.5), 2)];
        let family = BallFamily { balls: balls_at(&centres, 0.01)?, t: 0.0 };
        let trace = grow_family(&family, 40.0)?;
        Ok((check_trace(&trace), format!("{} events", trace.events.len())))
    }));

    out.push(run("lattice counts on the unit square", || {
        let mu = PiecewiseDensity::rects(&[(Rect::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0)), 1.0)])?;
        let p = lattice_vortices(&mu, 100)?;
        let piece = &p.pieces[0];
        let ok = piece.count() == 81 && piece.deviation <= piece.deviation_bound;
        Ok((ok, format!("{} points, deviation {} <= {}", piece.count(), piece.deviation, piece.deviation_bound)))
    }));

    out.push(run("Poisson solve on an eigenfunction", || {
        let d = Domain::uniform(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 1.0 / 64.0, 0.0)?;
        let f = ScalarGridField::from_fn(&d, |p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin());
        let (v, _) = solve_node_dirichlet(&d, &density_loads(&f))?;
        let mut worst = 0.0f64;
        for j in 0..d.ny() {
            for i in 0..d.nx() {
                let p = d.node(i, j);
                worst = worst.max((v.value(i, j) - (PI * p.x).sin() * (PI * p.y).sin()).abs());
            }
        }
        Ok((worst < 1e-3, format!("max nodal error {worst:.3e}")))
    }));

    out.push(run("recovery field around a single vortex", || {
        let mu = PiecewiseDensity::rects(&[(Rect::new(Point::new(0.35, 0.35), Point::new(0.78, 0.78)), 25.0 / 6.0)])?;
        let domain = Domain::uniform(Point::new(-0.5, -0.5), Point::new(1.5, 1.5), 1.0 / 64.0, 0.25)?;
        let td = build_td(&TdSpec::Potential { offset: [0.0, 0.0] }, &mu, &domain)?;
        let opts = RecoveryOptions { flat_h_q: None, ..RecoveryOptions::default() };
        let f = assemble_recovery_field(&mu, &td, 1e-3, &opts)?;
        let d = &f.diagnostics;
        let ok = d.degree_failures == 0
            && d.circulation_residual < 1e-3
            && d.curl_ratio <= 1e-6
            && d.tree_discrepancy <= 1e-6
            && d.jump_length <= d.jump_bound;
        Ok((
            ok,
            format!(
                "{} cores, circulation {:.1e}, curl {:.1e}, trees {:.1e}",
                d.cores, d.circulation_residual, d.curl_ratio, d.tree_discrepancy
            ),
        ))
    }));

    out
}
