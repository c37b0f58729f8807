//! Recovery sequences: lattice vortex placement, vortex kernels, the Poisson
//! correction, phase reconstruction with core cutoff, and convergence tables.

mod lattice;
mod phase;

pub use lattice::{lattice_h1_residual, lattice_vortices, LatticePiece, LatticePlacement};
pub use phase::{
    assemble_recovery_field, convergence_report, cutoff, cutoff_slope_bound, default_n_eps, poisson_correction,
    rankine_edge_integral, vortex_kernels, write_report_csv, NRule, PoissonCorrection, RecoveryDiagnostics,
    RecoveryField, RecoveryOptions, ReportRow, REPORT_HEADER,
};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid_field::{Domain, VectorGridField};
use crate::measures::PiecewiseDensity;
use crate::poisson::solve_node_dirichlet;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How the diffuse current T^D is prescribed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TdSpec {
    Zero,
    Constant {
        value: [f64; 2],
    },
    /// π∇ψ_μ + offset, with −Δψ_μ = μ and ψ_μ = 0 on ∂Ω, so that −Div T^D = πμ.
    Potential {
        offset: [f64; 2],
    },
}

/// T^D as a cell field on `domain`.
pub fn build_td(spec: &TdSpec, mu: &PiecewiseDensity, domain: &Domain) -> Result<VectorGridField> {
    match *spec {
        TdSpec::Zero => Ok(VectorGridField::zeros(domain)),
        TdSpec::Constant { value } => Ok(VectorGridField::from_fn(domain, |_| Point::new(value[0], value[1]))),
        TdSpec::Potential { offset } => {
            let loads = crate::measures::exact_loads(domain, mu, &[]);
            let (psi, report) = solve_node_dirichlet(domain, &loads)?;
            if !(report.relative_residual <= crate::poisson::CG_TOLERANCE) {
                return Err(Error::Numerical {
                    message: "potential solve failed".into(),
                    residual: report.relative_residual,
                });
            }
            let mut values = Vec::with_capacity(domain.cell_count());
            for j in 0..domain.cells_y() {
                for i in 0..domain.cells_x() {
                    let gx = 0.5
                        * ((psi.value(i + 1, j) - psi.value(i, j)) + (psi.value(i + 1, j + 1) - psi.value(i, j + 1)))
                        / domain.dx(i);
                    let gy = 0.5
                        * ((psi.value(i, j + 1) - psi.value(i, j)) + (psi.value(i + 1, j + 1) - psi.value(i + 1, j)))
                        / domain.dy(j);
                    values.push(Point::new(PI * gx + offset[0], PI * gy + offset[1]));
                }
            }
            VectorGridField::new(domain.clone(), values)
        }
    }
}
