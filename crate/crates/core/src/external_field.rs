//! Zero-charge measures in an external potential.
//!
//! Minimizes `F(μ) = wᵀ K w + Σ φ(x_i) w_i` over `Σ w = 0`. Stationarity
//! reads `K w = -φ/2 + λ`, so the optimum is `w₀ + λ w_Ω` with
//! `K w₀ = -φ/2`, `K w_Ω = 1` and `λ` fixed by the charge constraint.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::cloud::{NodeCloud, Placement};
use crate::error::{Error, Result};
use crate::linalg::solve_many;
use crate::operator::KernelOperator;

/// Tolerance on `|Σ w|` for zero-charge measures, relative to `max(1, Σ|w|)`.
pub const CHARGE_TOL: f64 = 1e-12;

type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// External potential `φ`.
#[derive(Clone)]
pub enum ExternalPotential {
    /// `φ(x) = -E·x` for a uniform field `E`.
    Linear {
        field: Vec<f64>,
    },
    Custom(PotentialFn),
}

impl fmt::Debug for ExternalPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExternalPotential::Linear { field } => {
                f.debug_struct("Linear").field("field", field).finish()
            }
            ExternalPotential::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ExternalPotential {
    pub fn linear(field: Vec<f64>) -> Self {
        ExternalPotential::Linear { field }
    }

    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ExternalPotential::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExternalPotential::Linear { field } => {
                -field.iter().zip(x).map(|(e, v)| e * v).sum::<f64>()
            }
            ExternalPotential::Custom(f) => f(x),
        }
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let base = self.clone();
        ExternalPotential::custom(move |x| base.eval(x) + c)
    }

    /// `φ(· - t)`, the potential carried along with a translated shape.
    pub fn translated(&self, t: &[f64]) -> Self {
        let base = self.clone();
        let t = t.to_vec();
        ExternalPotential::custom(move |x| {
            let y: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a - b).collect();
            base.eval(&y)
        })
    }

    pub fn on_cloud(&self, cloud: &NodeCloud) -> Vec<f64> {
        cloud.positions().map(|x| self.eval(x)).collect()
    }
}

/// Signed point masses with zero total charge.
#[derive(Debug, Clone)]
pub struct SignedMeasure {
    cloud: Arc<NodeCloud>,
    masses: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(cloud: Arc<NodeCloud>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != cloud.len() {
            return Err(Error::InvalidParameter(
                "one mass per node is required".into(),
            ));
        }
        check_zero_charge(&masses)?;
        Ok(Self { cloud, masses })
    }

    pub fn zero(cloud: Arc<NodeCloud>) -> Self {
        let masses = vec![0.0; cloud.len()];
        Self { cloud, masses }
    }

    pub fn cloud(&self) -> &Arc<NodeCloud> {
        &self.cloud
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `Σ w_i x_i`.
    pub fn dipole_moment(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.cloud.dim()];
        for (x, w) in self.cloud.positions().zip(&self.masses) {
            d.iter_mut().zip(x).for_each(|(di, xi)| *di += w * xi);
        }
        d
    }
}

fn check_zero_charge(masses: &[f64]) -> Result<()> {
    let total: f64 = masses.iter().sum();
    let scale: f64 = masses.iter().map(|w| w.abs()).sum::<f64>().max(1.0);
    if total.abs() > CHARGE_TOL * scale {
        return Err(Error::ConstraintViolation(format!(
            "total charge is {total:e}, expected 0"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FieldResult {
    pub measure: SignedMeasure,
    pub lambda: f64,
    pub f_value: f64,
    /// `max_i |2 v(x_i) + φ(x_i) - 2λ|`.
    pub el_residual: f64,
    pub dipole_moment: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub nodes: usize,
    pub lambda: f64,
    #[serde(rename = "F")]
    pub f_value: f64,
    pub el_residual: f64,
    pub dipole_moment: Vec<f64>,
}

impl FieldResult {
    pub fn summary(&self) -> FieldSummary {
        FieldSummary {
            nodes: self.measure.masses.len(),
            lambda: self.lambda,
            f_value: self.f_value,
            el_residual: self.el_residual,
            dipole_moment: self.dipole_moment.clone(),
        }
    }

    /// `node,x_1..x_N,mass,density` rows, density being mass over node weight.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let cloud = self.measure.cloud();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node".to_string()];
        header.extend((1..=cloud.dim()).map(|k| format!("x{k}")));
        header.extend(["mass".to_string(), "density".to_string()]);
        w.write_record(&header)?;
        for (i, m) in self.measure.masses.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(cloud.position(i).iter().map(|v| format!("{v:e}")));
            row.push(format!("{m:e}"));
            row.push(format!("{:e}", m / cloud.weight(i)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Optimal zero-charge measure for `φ` on the operator's (boundary) cloud.
pub fn solve_external(op: &KernelOperator, phi: &ExternalPotential) -> Result<FieldResult> {
    let params = op.params();
    if params.alpha() != 2.0 || params.dim() < 3 {
        return Err(Error::Unsupported(format!(
            "external fields need alpha = 2 and N >= 3, got alpha = {} and N = {}",
            params.alpha(),
            params.dim()
        )));
    }
    let cloud = op.cloud();
    if cloud.placement() != Placement::Boundary {
        return Err(Error::InvalidParameter(
            "external-field solves need a boundary cloud".into(),
        ));
    }
    if let ExternalPotential::Linear { field } = phi {
        if field.len() != params.dim() {
            return Err(Error::InvalidParameter(format!(
                "field must have {} components",
                params.dim()
            )));
        }
    }
    let phi_nodes = phi.on_cloud(cloud);
    let rhs0: Vec<f64> = phi_nodes.iter().map(|p| -0.5 * p).collect();
    let ones = vec![1.0; op.len()];
    let sol = solve_many(op.as_mat(), &[&rhs0, &ones])?;
    let (w0, w_omega) = (&sol[0], &sol[1]);
    let s_omega: f64 = w_omega.iter().sum();
    if s_omega.abs() < f64::EPSILON {
        return Err(Error::Singular(
            "the constant potential carries no charge".into(),
        ));
    }
    let lambda = -w0.iter().sum::<f64>() / s_omega;
    let mut w: Vec<f64> = w0
        .iter()
        .zip(w_omega)
        .map(|(a, b)| a + lambda * b)
        .collect();
    // remove the rounding-level charge along w_Ω, which keeps stationarity
    let drift: f64 = w.iter().sum::<f64>() / s_omega;
    w.iter_mut().zip(w_omega).for_each(|(x, b)| *x -= drift * b);

    let v = op.apply(&w);
    let el_residual = v
        .iter()
        .zip(&phi_nodes)
        .map(|(vi, pi)| (2.0 * vi + pi - 2.0 * lambda).abs())
        .fold(0.0, f64::max);
    let f_value = energy_from_parts(&w, &v, &phi_nodes);
    let measure = SignedMeasure {
        cloud: cloud.clone(),
        masses: w,
    };
    let dipole_moment = measure.dipole_moment();
    Ok(FieldResult {
        measure,
        lambda,
        f_value,
        el_residual,
        dipole_moment,
    })
}

fn energy_from_parts(w: &[f64], kw: &[f64], phi: &[f64]) -> f64 {
    w.iter()
        .zip(kw)
        .zip(phi)
        .map(|((wi, vi), pi)| wi * (vi + pi))
        .sum()
}

/// `F(μ) = wᵀ K w + Σ φ(x_i) w_i`.
pub fn field_energy(
    measure: &SignedMeasure,
    op: &KernelOperator,
    phi: &ExternalPotential,
) -> Result<f64> {
    if measure.masses.len() != op.len() {
        return Err(Error::InvalidParameter(
            "measure and operator sizes differ".into(),
        ));
    }
    check_zero_charge(&measure.masses)?;
    Ok(raw_field_energy(
        &measure.masses,
        op,
        &phi.on_cloud(op.cloud()),
    ))
}

fn raw_field_energy(w: &[f64], op: &KernelOperator, phi_nodes: &[f64]) -> f64 {
    energy_from_parts(w, &op.apply(w), phi_nodes)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub trials: usize,
    /// Largest `|F(ν) - F(μ) - I(ν - μ)|`, relative to `max(|F(ν)|, |F(μ)|, I(ν - μ))`.
    pub max_violation: f64,
    /// Smallest observed `F(ν) - F(μ)`.
    pub min_gap: f64,
}

/// Checks `F(ν) - F(μ) = (ν - μ)ᵀ K (ν - μ)` for random zero-charge `ν`.
pub fn verify_optimality(
    result: &FieldResult,
    op: &KernelOperator,
    phi: &ExternalPotential,
    trials: usize,
    seed: u64,
) -> Result<OptimalityReport> {
    let mu = &result.measure.masses;
    let n = mu.len();
    if n != op.len() {
        return Err(Error::InvalidParameter(
            "result and operator sizes differ".into(),
        ));
    }
    let phi_nodes = phi.on_cloud(op.cloud());
    let f_mu = raw_field_energy(mu, op, &phi_nodes);
    let scale = mu
        .iter()
        .map(|w| w * w)
        .sum::<f64>()
        .sqrt()
        .max(1.0 / n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..trials {
        let mut d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let norm = d
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            .sqrt();
        d.iter_mut().for_each(|x| *x = (*x - mean) * scale / norm);
        let nu: Vec<f64> = mu.iter().zip(&d).map(|(a, b)| a + b).collect();
        let (gap, violation) = identity_defect(op, &phi_nodes, f_mu, &nu, &d);
        max_violation = max_violation.max(violation);
        min_gap = min_gap.min(gap);
    }
    Ok(OptimalityReport {
        trials,
        max_violation,
        min_gap,
    })
}

/// `(F(ν) - F(μ), relative defect of the identity)` for `ν = μ + d`.
fn identity_defect(
    op: &KernelOperator,
    phi_nodes: &[f64],
    f_mu: f64,
    nu: &[f64],
    d: &[f64],
) -> (f64, f64) {
    let f_nu = raw_field_energy(nu, op, phi_nodes);
    let i_d = op.quadratic_form(d);
    let gap = f_nu - f_mu;
    let denom = f_nu.abs().max(f_mu.abs()).max(i_d).max(f64::MIN_POSITIVE);
    (gap, (gap - i_d).abs() / denom)
}
