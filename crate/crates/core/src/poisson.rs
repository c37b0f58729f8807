//! Conjugate-gradient solvers for the discrete Dirichlet Laplacian.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid_field::{Domain, ScalarGridField};

pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned CG for an SPD operator given by `apply`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((x, CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut res = 1.0;
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Numerical { message: "operator is not positive definite".into(), residual: res });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if res <= tol {
            return Ok((x, CgReport { iterations: it + 1, relative_residual: res }));
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::Numerical {
        message: format!("conjugate gradient did not converge in {max_iter} iterations"),
        residual: res,
    })
}

/// Solves −Δv = f with v = 0 on ∂Ω, nodal finite volumes on the tensor grid.
/// `loads` holds ∫ f over each node's dual cell; boundary entries are ignored.
pub fn solve_node_dirichlet(domain: &Domain, loads: &[f64]) -> Result<(ScalarGridField, CgReport)> {
    let (nx, ny) = (domain.nx(), domain.ny());
    assert_eq!(loads.len(), nx * ny);
    if nx < 3 || ny < 3 {
        return Ok((ScalarGridField::constant(domain, 0.0), CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let (mx, my) = (nx - 2, ny - 2);
    let xs = domain.xs();
    let ys = domain.ys();
    // Coupling weights: dual face length over edge length.
    let wx: Vec<f64> =
        (0..ny).map(|j| if j == 0 || j == ny - 1 { 0.0 } else { 0.5 * (ys[j + 1] - ys[j - 1]) }).collect();
    let wy: Vec<f64> =
        (0..nx).map(|i| if i == 0 || i == nx - 1 { 0.0 } else { 0.5 * (xs[i + 1] - xs[i - 1]) }).collect();
    let cx = |i: usize, j: usize| wx[j] / (xs[i + 1] - xs[i]);
    let cy = |i: usize, j: usize| wy[i] / (ys[j + 1] - ys[j]);
    let idx = |i: usize, j: usize| (j - 1) * mx + (i - 1);
    let mut diag = vec![0.0; mx * my];
    let mut b = vec![0.0; mx * my];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            diag[idx(i, j)] = cx(i - 1, j) + cx(i, j) + cy(i, j - 1) + cy(i, j);
            b[idx(i, j)] = loads[domain.node_index(i, j)];
        }
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = idx(i, j);
                let mut acc = diag[k] * v[k];
                if i > 1 {
                    acc -= cx(i - 1, j) * v[k - 1];
                }
                if i < nx - 2 {
                    acc -= cx(i, j) * v[k + 1];
                }
                if j > 1 {
                    acc -= cy(i, j - 1) * v[k - mx];
                }
                if j < ny - 2 {
                    acc -= cy(i, j) * v[k + mx];
                }
                out[k] = acc;
            }
        }
    };
    let (sol, report) = conjugate_gradient(apply, &diag, &b, CG_TOLERANCE, 20 * mx * my)?;
    let mut values = vec![0.0; nx * ny];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            values[domain.node_index(i, j)] = sol[idx(i, j)];
        }
    }
    Ok((ScalarGridField::new(domain.clone(), values)?, report))
}

/// (Σ cells |∇v|² area)^{1/2} for nodal v, with the bilinear cell gradient.
pub fn nodal_dirichlet_norm(v: &ScalarGridField) -> f64 {
    let d = v.domain();
    let mut acc = 0.0;
    for j in 0..d.cells_y() {
        for i in 0..d.cells_x() {
            let gx =
                0.5 * ((v.value(i + 1, j) - v.value(i, j)) + (v.value(i + 1, j + 1) - v.value(i, j + 1))) / d.dx(i);
            let gy =
                0.5 * ((v.value(i, j + 1) - v.value(i, j)) + (v.value(i + 1, j + 1) - v.value(i + 1, j))) / d.dy(j);
            acc += (gx * gx + gy * gy) * d.cell_area(i, j);
        }
    }
    acc.sqrt()
}

/// Cell-centred solve of −Δ_h v = rhs on a uniform grid, with v = 0 on the
/// ghost cells one spacing outside the boundary.
pub fn solve_cell_dirichlet(domain: &Domain, rhs: &[f64]) -> Result<(Vec<f64>, CgReport)> {
    let h =
        domain.spacing().ok_or_else(|| Error::Argument("cell-centred Poisson solve needs a uniform grid".into()))?;
    let (mx, my) = (domain.cells_x(), domain.cells_y());
    assert_eq!(rhs.len(), mx * my);
    let inv = 1.0 / (h * h);
    let diag = vec![4.0 * inv; mx * my];
    let apply = |v: &[f64], out: &mut [f64]| {
        for j in 0..my {
            for i in 0..mx {
                let k = j * mx + i;
                let mut acc = 4.0 * v[k];
                if i > 0 {
                    acc -= v[k - 1];
                }
                if i + 1 < mx {
                    acc -= v[k + 1];
                }
                if j > 0 {
                    acc -= v[k - mx];
                }
                if j + 1 < my {
                    acc -= v[k + mx];
                }
                out[k] = acc * inv;
            }
        }
    };
    conjugate_gradient(apply, &diag, rhs, CG_TOLERANCE, 20 * mx * my)
}

/// Integrated loads of a nodal density sampled at the nodes.
pub fn density_loads(f: &ScalarGridField) -> Vec<f64> {
    let d = f.domain();
    let mut loads = vec![0.0; d.node_count()];
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            loads[d.node_index(i, j)] = f.value(i, j) * d.dual_area(i, j);
        }
    }
    loads
}

/// Each Dirac mass deposited on its nearest node (an h⁻²-scaled nodal density).
pub fn dirac_loads(domain: &Domain, atoms: &[(Point, f64)]) -> Vec<f64> {
    let mut loads = vec![0.0; domain.node_count()];
    let nearest = |axis: &[f64], v: f64| {
        let k = axis.partition_point(|&a| a < v);
        if k == 0 {
            0
        } else if k == axis.len() || v - axis[k - 1] <= axis[k] - v {
            k - 1
        } else {
            k
        }
    };
    for &(p, w) in atoms {
        let (i, j) = (nearest(domain.xs(), p.x), nearest(domain.ys(), p.y));
        loads[domain.node_index(i, j)] += w;
    }
    loads
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn node_solver_reproduces_quadratic() {
        // v = x(1-x)y(1-y) has -Δv = 2[y(1-y) + x(1-x)]; the 5-point scheme is exact for it.
        let d = Domain::uniform(Point::ZERO, Point::new(1.0, 1.0), 1.0 / 16.0, 0.0).unwrap();
        let f = ScalarGridField::from_fn(&d, |p| 2.0 * (p.y * (1.0 - p.y) + p.x * (1.0 - p.x)));
        let (v, rep) = solve_node_dirichlet(&d, &density_loads(&f)).unwrap();
        assert!(rep.relative_residual <= CG_TOLERANCE);
        for j in 0..d.ny() {
            for i in 0..d.nx() {
                let p = d.node(i, j);
                assert!((v.value(i, j) - p.x * (1.0 - p.x) * p.y * (1.0 - p.y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn graded_node_solver_converges_to_eigenfunction() {
        let xs = crate::grid_field::graded_axis(0.0, 1.0, &[0.4], 0.004, 0.02, 1.15, 1.0 / 64.0).unwrap();
        let d = Domain::rectilinear(xs.clone(), xs, 0.0).unwrap();
        let f = ScalarGridField::from_fn(&d, |p| (PI * p.x).sin() * (PI * p.y).sin());
        let (v, _) = solve_node_dirichlet(&d, &density_loads(&f)).unwrap();
        let mut err: f64 = 0.0;
        for j in 0..d.ny() {
            for i in 0..d.nx() {
                let want = f.value(i, j) / (2.0 * PI * PI);
                err = err.max((v.value(i, j) - want).abs());
            }
        }
        assert!(err < 2e-4, "{err}");
    }

    #[test]
    fn cell_solver_matches_manufactured_residual() {
        let d = Domain::uniform(Point::ZERO, Point::new(1.0, 0.5), 1.0 / 32.0, 0.0).unwrap();
        let (mx, my) = (d.cells_x(), d.cells_y());
        let v0: Vec<f64> = (0..mx * my).map(|k| ((k * 7919) % 101) as f64 / 101.0).collect();
        let h = 1.0 / 32.0;
        let mut rhs = vec![0.0; mx * my];
        for j in 0..my {
            for i in 0..mx {
                let g = |a: isize, b: isize| {
                    if a < 0 || b < 0 || a >= mx as isize || b >= my as isize {
                        0.0
                    } else {
                        v0[b as usize * mx + a as usize]
                    }
                };
                let (a, b) = (i as isize, j as isize);
                rhs[j * mx + i] = (4.0 * g(a, b) - g(a - 1, b) - g(a + 1, b) - g(a, b - 1) - g(a, b + 1)) / (h * h);
            }
        }
        let (v, _) = solve_cell_dirichlet(&d, &rhs).unwrap();
        for (a, b) in v.iter().zip(&v0) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}
