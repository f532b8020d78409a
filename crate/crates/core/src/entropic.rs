//! The entropic functional
//! `J(Ω) = min { ∫|∇v|² + ∫_Ω ρ² : -Δv = ρ, ∫_Ω ρ = 1 }` in `R^3`.
//!
//! With `-Δv = ρ`, `∫|∇v|² = (1/4π) I₂(ρ)`, so on a volume cloud with cell
//! masses `m_i = ρ_i vol_i` the problem is the quadratic program
//! `min mᵀ A m` over `Σ m = 1` with `A = K/4π + diag(1/vol_i)`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::cloud::{discretize, NodeCloud, Placement};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::kernel::{distance, KernelParams};
use crate::linalg::solve_many;
use crate::operator::{assemble_operator, KernelOperator};
use crate::report::EnergyReport;

#[derive(Debug, Clone)]
pub struct DensityResult {
    pub cloud: Arc<NodeCloud>,
    /// Cell densities `ρ_i`; the sign is not constrained.
    pub density: Vec<f64>,
    pub j_value: f64,
    /// `max_i |v_i/4π + ρ_i - J| / J`, the relative stationarity defect.
    pub el_residual: f64,
    /// Objective at the uniform density `1/|Ω|`, an upper bound for `J`.
    pub uniform_bound: f64,
    pub min_density: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    #[serde(rename = "J")]
    pub j_value: f64,
    pub el_residual: f64,
    pub uniform_bound: f64,
    pub min_density: f64,
    pub nodes: usize,
}

impl DensityResult {
    pub fn summary(&self) -> DensitySummary {
        DensitySummary {
            j_value: self.j_value,
            el_residual: self.el_residual,
            uniform_bound: self.uniform_bound,
            min_density: self.min_density,
            nodes: self.density.len(),
        }
    }

    /// Mean density in `bins` equal-width shells of `[0, r_max]` about `center`.
    pub fn radial_profile(
        &self,
        center: &[f64],
        r_max: f64,
        bins: usize,
    ) -> Vec<(f64, f64, usize)> {
        let mut sum = vec![0.0; bins];
        let mut count = vec![0usize; bins];
        for (i, rho) in self.density.iter().enumerate() {
            let r = distance(self.cloud.position(i), center);
            let k = ((r / r_max * bins as f64) as usize).min(bins - 1);
            sum[k] += rho;
            count[k] += 1;
        }
        (0..bins)
            .map(|k| {
                let mid = (k as f64 + 0.5) * r_max / bins as f64;
                (
                    mid,
                    if count[k] > 0 {
                        sum[k] / count[k] as f64
                    } else {
                        f64::NAN
                    },
                    count[k],
                )
            })
            .collect()
    }

    /// `r_mid,density,nodes` rows of [`DensityResult::radial_profile`]; empty
    /// shells leave the density field blank.
    pub fn write_radial_csv<W: Write>(
        &self,
        out: W,
        center: &[f64],
        r_max: f64,
        bins: usize,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r_mid", "density", "nodes"])?;
        for (r, rho, n) in self.radial_profile(center, r_max, bins) {
            let rho = if n > 0 {
                format!("{rho:e}")
            } else {
                String::new()
            };
            w.write_record([format!("{r:e}"), rho, n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Minimizing density on a volume cloud of a three-dimensional shape.
pub fn solve_entropic(
    cloud: impl Into<Arc<NodeCloud>>,
    params: KernelParams,
) -> Result<DensityResult> {
    if params.dim() != 3 || params.alpha() != 2.0 {
        return Err(Error::Unsupported(
            "the entropic functional is defined for N = 3, alpha = 2".into(),
        ));
    }
    let cloud: Arc<NodeCloud> = cloud.into();
    if cloud.placement() != Placement::Volume {
        return Err(Error::InvalidParameter(
            "the entropic functional needs a volume cloud".into(),
        ));
    }
    solve_entropic_operator(&assemble_operator(cloud, params)?)
}

/// As [`solve_entropic`], reusing an assembled volume operator.
pub fn solve_entropic_operator(op: &KernelOperator) -> Result<DensityResult> {
    let params = op.params();
    if params.dim() != 3 || params.alpha() != 2.0 || op.cloud().placement() != Placement::Volume {
        return Err(Error::InvalidParameter(
            "expected a Coulomb operator on a three-dimensional volume cloud".into(),
        ));
    }
    let cloud = op.cloud().clone();
    let n = op.len();
    let c = 1.0 / (4.0 * PI);
    let mut a = op.as_mat().to_owned();
    for i in 0..n {
        a[(i, i)] = c * op.entry(i, i) + 1.0 / cloud.weight(i);
        for j in 0..n {
            if j != i {
                a[(i, j)] *= c;
            }
        }
    }
    let ones = vec![1.0; n];
    let y = solve_many(a.as_ref(), &[&ones])?.remove(0);
    let s: f64 = y.iter().sum();
    let j_value = 1.0 / s;
    let masses: Vec<f64> = y.iter().map(|v| v / s).collect();
    let density: Vec<f64> = masses
        .iter()
        .zip(cloud.weights())
        .map(|(m, w)| m / w)
        .collect();

    let v = op.apply(&masses);
    let el_residual = v
        .iter()
        .zip(&density)
        .map(|(vi, rho)| (c * vi + rho - j_value).abs())
        .fold(0.0, f64::max)
        / j_value;

    let vol = cloud.total_weight();
    let uniform: Vec<f64> = cloud.weights().iter().map(|w| w / vol).collect();
    let uniform_bound = c * op.quadratic_form(&uniform) + 1.0 / vol;
    let min_density = density.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DensityResult {
        cloud,
        density,
        j_value,
        el_residual,
        uniform_bound,
        min_density,
    })
}

/// `G(Ω) = Per(Ω) + Q² J(Ω)` on a volume cloud of about `m` nodes.
pub fn entropic_energy(shape: &Shape, charge: f64, m: usize) -> Result<EnergyReport> {
    if shape.dim() != 3 {
        return Err(Error::Unsupported(
            "the entropic functional is defined for N = 3".into(),
        ));
    }
    let perimeter = shape.perimeter()?;
    let res = solve_entropic(
        discretize(shape, m, Placement::Volume)?,
        KernelParams::coulomb(3)?,
    )?;
    Ok(EnergyReport::new(
        shape,
        charge,
        perimeter,
        res.j_value,
        res.el_residual,
        res.density.len(),
    ))
}
