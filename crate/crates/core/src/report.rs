//! Shape-energy reports shared by the drop and entropic energies.

use serde::Serialize;

use crate::cloud::{discretize, Placement};
use crate::equilibrium::equilibrium_measure;
use crate::error::Result;
use crate::geometry::Shape;
use crate::kernel::KernelParams;
use crate::operator::assemble_operator;

/// `total = perimeter + charge² · interaction`.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub shape: String,
    pub charge: f64,
    pub perimeter: f64,
    pub interaction: f64,
    pub total: f64,
    /// Residual of the optimality conditions of the interaction solve.
    pub el_residual: f64,
    pub nodes: usize,
}

impl EnergyReport {
    pub fn new(
        shape: &Shape,
        charge: f64,
        perimeter: f64,
        interaction: f64,
        el_residual: f64,
        nodes: usize,
    ) -> Self {
        Self {
            shape: shape.kind().to_string(),
            charge,
            perimeter,
            interaction,
            total: perimeter + charge * charge * interaction,
            el_residual,
            nodes,
        }
    }
}

/// Boundary nodes carry the equilibrium measure for `α >= 2`, volume nodes otherwise.
pub fn natural_placement(params: &KernelParams) -> Placement {
    if params.alpha() >= 2.0 {
        Placement::Boundary
    } else {
        Placement::Volume
    }
}

/// Charged-drop energy `Per(Ω) + Q² 𝓘_α(Ω)` at resolution `m`.
pub fn drop_energy(
    shape: &Shape,
    params: KernelParams,
    charge: f64,
    m: usize,
    tol: f64,
) -> Result<EnergyReport> {
    let perimeter = shape.perimeter()?;
    let op = assemble_operator(discretize(shape, m, natural_placement(&params))?, params)?;
    let eq = equilibrium_measure(&op, tol)?;
    Ok(EnergyReport::new(
        shape,
        charge,
        perimeter,
        eq.energy,
        eq.kkt_residual,
        op.len(),
    ))
}
