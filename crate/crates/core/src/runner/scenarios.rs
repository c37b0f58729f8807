use super::{Check, ExperimentConfig, Scenario, ScenarioResult, Table};
use crate::balls::{annular_lower_bound, balls_at, check_trace, grow_family, measured_annular_energy, BallFamily};
use crate::energies::Regime;
use crate::error::Result;
use crate::geometry::{Point, Rect, Region};
use crate::grid_field::{build_s1_field, vortex_superposition};
use crate::measures::{flat_distance_to_density, flat_norm_atomic_in, flat_norm_lp_oracle_in, AtomicMeasure, TestNorm};
use crate::recovery::{
    build_td, convergence_report, lattice_h1_residual, lattice_vortices, NRule, RecoveryOptions, REPORT_HEADER,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub(super) fn gamma_limsup(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    let domain = cfg.domain()?;
    let mu = cfg.mu.density()?;
    let td = build_td(&cfg.td, &mu, &domain)?;
    let opts = RecoveryOptions {
        regime: cfg.regime,
        n_rule: cfg.n_eps.map_or(NRule::Default, NRule::Fixed),
        core_resolution: cfg.core_resolution,
        flat_h_q: Some(cfg.flat_h_q),
        ..RecoveryOptions::default()
    };
    let diags = convergence_report(&mu, &td, &cfg.epsilons, &opts)?;
    let mut checks = Vec::new();
    for d in &diags {
        let e = d.epsilon;
        checks.push(Check::new(
            format!("degree on each core circle (eps={e})"),
            d.degree_failures == 0,
            format!("{} of {} cores wrong", d.degree_failures, d.cores),
        ));
        checks.push(Check::new(
            format!("circulation of beta_bar (eps={e})"),
            d.circulation_residual < 1e-3,
            format!("max |circ - z| = {:.3e}", d.circulation_residual),
        ));
        checks.push(Check::new(
            format!("jump length bound (eps={e})"),
            d.jump_length <= d.jump_bound,
            format!("{} <= {}", d.jump_length, d.jump_bound),
        ));
        checks.push(Check::new(
            format!("off-core curl (eps={e})"),
            d.curl_ratio <= 1e-6,
            format!("max |curl| h/|beta_bar|_inf = {:.3e}", d.curl_ratio),
        ));
        checks.push(Check::new(
            format!("spanning trees agree (eps={e})"),
            d.tree_discrepancy <= 1e-6,
            format!("max phase difference {:.3e}", d.tree_discrepancy),
        ));
        if d.cores > 0 {
            checks.push(Check::new(
                format!("kernel annulus energy (eps={e})"),
                d.core_worst_deviation <= 0.03,
                format!("worst relative deviation {:.3e}", d.core_worst_deviation),
            ));
        }
        checks.push(Check::new(format!("jumps inside the inner domain (eps={e})"), d.energy.admissible, ""));
    }
    let gaps: Vec<f64> = diags.iter().map(|d| (d.scaled_energy - d.gamma_target).abs()).collect();
    if cfg.regime == Regime::Supercritical && diags.iter().all(|d| d.cores == 0) {
        let worst = diags.iter().map(|d| (d.scaled_energy / d.gamma_target - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            "scaled energy equals the target",
            worst <= 0.02,
            format!("worst relative gap {worst:.3e}"),
        ));
    } else {
        let ratios: Vec<f64> = diags.iter().map(|d| d.jump_ratio()).collect();
        checks.push(Check::new("jump ratio decreasing", strictly_decreasing(&ratios), format!("{ratios:?}")));
        checks.push(Check::new("energy gap decreasing", strictly_decreasing(&gaps), format!("{gaps:?}")));
    }
    Ok(ScenarioResult {
        scenario: Scenario::GammaLimsup,
        seed: cfg.seed,
        table: Table {
            file: "gamma_limsup.csv".into(),
            header: REPORT_HEADER.into(),
            rows: diags.iter().map(|d| d.row().csv_line()).collect(),
        },
        checks,
        gamma_target: diags.first().map(|d| d.gamma_target),
    })
}

pub(super) fn ball_lower_bound(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    let domain = cfg.domain()?;
    let atoms = cfg.mu.atoms();
    let u = build_s1_field(vortex_superposition(&domain, &atoms)?);
    let centres: Vec<(Point, i64)> =
        atoms.iter().map(|&(c, z)| (domain.snap_to_cell_center(c).expect("validated"), z)).collect();
    let inner = domain.inner();
    let bounds = domain.bounds();
    let reach = 0.25 * bounds.width().min(bounds.height());
    let mut checks = Vec::new();
    let mut table = Table { file: "ball_lower_bound.csv".into(), header: String::new(), rows: Vec::new() };
    for &eps in &cfg.epsilons {
        let t_final = cfg.ball_t_final.unwrap_or(reach / eps - 1.0);
        let family = BallFamily { balls: balls_at(&centres, eps)?, t: 0.0 };
        let trace = grow_family(&family, t_final)?;
        checks.push(Check::new(
            format!("nesting, disjointness and radius bound (eps={eps})"),
            check_trace(&trace),
            format!("{} events", trace.events.len()),
        ));
        let bound = annular_lower_bound(&trace, 0.0, t_final, &Region::Rect(inner));
        let measured = measured_annular_energy(&u, &trace, 0.0, t_final);
        let inflated = measured * (1.0 + 5.0 * cfg.h / eps);
        checks.push(Check::new(
            format!("annular lower bound (eps={eps})"),
            bound <= inflated,
            format!("bound {bound} <= measured {measured} x (1 + 5h/eps)"),
        ));
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        let text = String::from_utf8(buf).expect("ascii");
        let mut lines = text.lines();
        table.header = lines.next().unwrap_or_default().to_string();
        table.rows = lines.map(str::to_string).collect();
    }
    Ok(ScenarioResult { scenario: Scenario::BallLowerBound, seed: cfg.seed, table, checks, gamma_target: None })
}

/// Random signed measure with 1..=`max_atoms` atoms in the central 90% of
/// `bounds`, pairwise farther apart than `min_sep`, weights in [−1, 1].
pub fn random_flat_instance(rng: &mut ChaCha8Rng, bounds: &Rect, max_atoms: usize, min_sep: f64) -> AtomicMeasure {
    let n = rng.gen_range(1..=max_atoms);
    let (w, h) = (bounds.width(), bounds.height());
    let mut atoms: Vec<(Point, f64)> = Vec::with_capacity(n);
    let mut attempts = 0;
    while atoms.len() < n && attempts < 10_000 {
        attempts += 1;
        let p =
            Point::new(bounds.lower.x + w * rng.gen_range(0.05..0.95), bounds.lower.y + h * rng.gen_range(0.05..0.95));
        let weight = (rng.gen_range(-1.0f64..1.0) * 1000.0).round() / 1000.0;
        if weight == 0.0 || atoms.iter().any(|a| a.0.dist(p) <= min_sep) {
            continue;
        }
        atoms.push((p, weight));
    }
    AtomicMeasure::new(atoms)
}

pub(super) fn flat_norm_bench(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    let domain = cfg.domain()?;
    let bounds = domain.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.instances);
    let mut worst = 0.0f64;
    for k in 0..cfg.instances {
        let mu = random_flat_instance(&mut rng, &bounds, cfg.max_atoms, 2.1 * cfg.h);
        let flow = flat_norm_atomic_in(&mu, &bounds, TestNorm::Combined)?.value;
        let oracle = flat_norm_lp_oracle_in(&mu, &bounds, cfg.h, TestNorm::Combined)?.value;
        let diff = (flow - oracle).abs();
        worst = worst.max(diff);
        rows.push(format!("{k},{},{flow},{oracle},{diff}", mu.atoms().len()));
    }
    let checks = vec![Check::new(
        "min-cost flow agrees with the LP oracle within 2h",
        worst <= 2.0 * cfg.h,
        format!("worst difference {worst:.3e}, 2h = {}", 2.0 * cfg.h),
    )];
    Ok(ScenarioResult {
        scenario: Scenario::FlatNormBench,
        seed: cfg.seed,
        table: Table { file: "flat_norm_bench.csv".into(), header: "instance,atoms,flow,oracle,abs_diff".into(), rows },
        checks,
        gamma_target: None,
    })
}

pub(super) fn lattice_study(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    let domain = cfg.domain()?;
    let mu = cfg.mu.density()?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut flats = Vec::new();
    let mut h1s = Vec::new();
    for &n in &cfg.lattice_n {
        let placement = lattice_vortices(&mu, n)?;
        let nu = placement.measure().scale(1.0 / n as f64);
        let flat = flat_distance_to_density(&nu, &mu, &domain, cfg.flat_h_q, TestNorm::Combined)?.value;
        let h1 = lattice_h1_residual(&placement, &mu, &domain)?;
        flats.push(flat);
        h1s.push(h1);
        for p in &placement.pieces {
            rows.push(format!(
                "{n},{},{},{},{},{},{},{},{flat},{h1}",
                p.piece,
                p.level,
                p.radius.unwrap_or(f64::NAN),
                p.count(),
                p.count() as f64 / n as f64,
                p.deviation,
                p.deviation_bound
            ));
            checks.push(Check::new(
                format!("count deviation within the boundary-strip bound (N={n}, piece {})", p.piece),
                p.deviation <= p.deviation_bound,
                format!("{} <= {}", p.deviation, p.deviation_bound),
            ));
        }
    }
    if flats.len() > 1 {
        checks.push(Check::new("flat distance decreasing in N", strictly_decreasing(&flats), format!("{flats:?}")));
        let c = h1s[0] * (cfg.lattice_n[0] as f64).powf(0.25);
        let ok = cfg.lattice_n.iter().zip(&h1s).all(|(&n, &r)| r <= c * (n as f64).powf(-0.25) * (1.0 + 1e-12));
        checks.push(Check::new("H^-1 residual below C N^(-1/4)", ok, format!("C = {c}, residuals {h1s:?}")));
    }
    Ok(ScenarioResult {
        scenario: Scenario::LatticeStudy,
        seed: cfg.seed,
        table: Table {
            file: "lattice_study.csv".into(),
            header: "N_eps,piece,level,radius,count,ratio,deviation,deviation_bound,flat_dist,h1_resid".into(),
            rows,
        },
        checks,
        gamma_target: None,
    })
}
