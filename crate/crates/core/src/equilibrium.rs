//! Equilibrium measures: minimal-energy probability measures on a node cloud.
//!
//! The discrete problem is `min wᵀ K w` over the simplex `Σ w = 1, w >= 0`.
//! Its KKT conditions are the discrete form of the classical
//! characterization: the potential `v = K w` equals the energy on the support
//! and is no smaller elsewhere.

use std::collections::HashSet;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{fibonacci_directions, NodeCloud};
use crate::error::{Error, Result};
use crate::kernel::{distance, KernelParams, PatchSelfEnergy};
use crate::linalg::simplex_plane_minimizer;
use crate::operator::{self_energy, KernelOperator};

/// Tolerance on `Σ w - 1` for probability measures.
pub const MASS_TOL: f64 = 1e-12;

/// Point masses on the nodes of a cloud.
#[derive(Debug, Clone)]
pub struct Measure {
    cloud: Arc<NodeCloud>,
    masses: Vec<f64>,
}

impl Measure {
    /// A probability measure; masses must be (numerically) nonnegative and sum to one.
    pub fn new(cloud: Arc<NodeCloud>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != cloud.len() {
            return Err(Error::InvalidParameter(
                "one mass per node is required".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL * masses.len().max(1) as f64 {
            return Err(Error::ConstraintViolation(format!(
                "masses sum to {total}, not 1"
            )));
        }
        if masses.iter().any(|m| *m < -MASS_TOL) {
            return Err(Error::ConstraintViolation(
                "probability masses must be nonnegative".into(),
            ));
        }
        Ok(Self { cloud, masses })
    }

    /// Normalized node weights, i.e. the discretized uniform measure.
    pub fn uniform(cloud: Arc<NodeCloud>) -> Self {
        let total = cloud.total_weight();
        let masses = cloud.weights().iter().map(|w| w / total).collect();
        Self { cloud, masses }
    }

    pub fn cloud(&self) -> &Arc<NodeCloud> {
        &self.cloud
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumOptions {
    /// Relative KKT tolerance (scaled by `max(|energy|, 1)`).
    pub tol: f64,
    pub max_iter: usize,
    /// Starting free set for the active-set iteration; all nodes when `None`.
    pub initial_support: Option<Vec<usize>>,
    /// Iterations of the projected-gradient fallback.
    pub fallback_iter: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            initial_support: None,
            fallback_iter: 3000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub measure: Measure,
    /// Minimal energy `𝓘_α`.
    pub energy: f64,
    pub capacity: f64,
    pub potential_on_nodes: Vec<f64>,
    /// Absolute KKT residual: worst of `|v_i - energy|` on the support and
    /// `energy - v_i` off it.
    pub kkt_residual: f64,
    /// Fraction of nodes carrying positive mass.
    pub active_fraction: f64,
    pub iterations: usize,
    pub used_fallback: bool,
}

/// JSON-facing digest of an [`EquilibriumResult`].
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSummary {
    pub nodes: usize,
    pub energy: f64,
    pub capacity: f64,
    pub kkt_residual: f64,
    pub active_fraction: f64,
    pub iterations: usize,
    pub used_fallback: bool,
}

impl EquilibriumResult {
    pub fn summary(&self) -> EquilibriumSummary {
        EquilibriumSummary {
            nodes: self.measure.masses.len(),
            energy: self.energy,
            capacity: self.capacity,
            kkt_residual: self.kkt_residual,
            active_fraction: self.active_fraction,
            iterations: self.iterations,
            used_fallback: self.used_fallback,
        }
    }

    /// `node,component,mass,potential` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "component", "mass", "potential"])?;
        let cloud = self.measure.cloud();
        for (i, (m, v)) in self
            .measure
            .masses
            .iter()
            .zip(&self.potential_on_nodes)
            .enumerate()
        {
            w.write_record([
                i.to_string(),
                cloud.component(i).to_string(),
                format!("{m:e}"),
                format!("{v:e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Equilibrium measure with default options and relative tolerance `tol`.
pub fn equilibrium_measure(op: &KernelOperator, tol: f64) -> Result<EquilibriumResult> {
    equilibrium_measure_with(
        op,
        &EquilibriumOptions {
            tol,
            ..Default::default()
        },
    )
}

/// Active-set solve: start from the given free set, solve the equality
/// constrained problem on it, drop nodes with negative mass, and re-admit
/// the node whose potential most undercuts the energy until the KKT
/// conditions hold. Falls back to projected gradient if a free set repeats.
pub fn equilibrium_measure_with(
    op: &KernelOperator,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let n = op.len();
    let mut free = vec![opts.initial_support.is_none(); n];
    if let Some(init) = &opts.initial_support {
        for &i in init {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "initial support index {i} out of range"
                )));
            }
            free[i] = true;
        }
    }

    let mut best: Option<EquilibriumResult> = None;
    let outcome = active_set(op, opts, free, opts.max_iter, &mut best, 0)?;
    if let Some(res) = outcome {
        return Ok(res);
    }

    // Fallback: projected gradient, then polish its support with active set.
    let start = best
        .as_ref()
        .map(|b| b.measure.masses.clone())
        .unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let w = projected_gradient(op, start, opts.fallback_iter);
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let support: Vec<bool> = w.iter().map(|&x| x > 1e-9 * wmax).collect();
    let done = opts.max_iter;
    if let Some(mut res) = active_set(op, opts, support, opts.max_iter, &mut best, done)? {
        res.used_fallback = true;
        return Ok(res);
    }
    let fallback = build_result(op, w, done + opts.fallback_iter, true);
    let best = match best {
        Some(b) if b.kkt_residual <= fallback.kkt_residual => b,
        _ => fallback,
    };
    Err(Error::NonConvergence {
        iterations: best.iterations,
        residual: best.kkt_residual,
        best: Box::new(best),
    })
}

fn kkt_scale(energy: f64) -> f64 {
    energy.abs().max(1.0)
}

fn active_set(
    op: &KernelOperator,
    opts: &EquilibriumOptions,
    mut free: Vec<bool>,
    max_iter: usize,
    best: &mut Option<EquilibriumResult>,
    offset: usize,
) -> Result<Option<EquilibriumResult>> {
    let n = op.len();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for it in 1..=max_iter {
        let mut idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        if idx.is_empty() {
            // smallest self-energy node is the best single-point measure
            let k = (0..n)
                .min_by(|&a, &b| op.entry(a, a).total_cmp(&op.entry(b, b)))
                .expect("nonempty");
            free[k] = true;
            idx = vec![k];
        }
        if !seen.insert(idx.clone()) {
            return Ok(None);
        }
        let (x, _) = simplex_plane_minimizer(op.principal_submatrix(&idx).as_ref())?;
        if x.iter().any(|&v| v < 0.0) {
            for (k, &i) in idx.iter().enumerate() {
                if x[k] < 0.0 {
                    free[i] = false;
                }
            }
            continue;
        }
        let mut w = vec![0.0; n];
        for (k, &i) in idx.iter().enumerate() {
            w[i] = x[k];
        }
        let res = build_result(op, w, offset + it, false);
        let tol_abs = opts.tol * kkt_scale(res.energy);
        let violator = (0..n)
            .filter(|&i| !free[i] && res.potential_on_nodes[i] < res.energy - tol_abs)
            .min_by(|&a, &b| res.potential_on_nodes[a].total_cmp(&res.potential_on_nodes[b]));
        let converged = res.kkt_residual <= tol_abs;
        if best
            .as_ref()
            .is_none_or(|b| res.kkt_residual < b.kkt_residual)
        {
            *best = Some(res.clone());
        }
        match violator {
            None if converged => return Ok(Some(res)),
            Some(i) => free[i] = true,
            // Potential mismatch on the support with no violator to add:
            // the equality solve was not accurate enough.
            None => return Ok(None),
        }
    }
    Ok(None)
}

fn build_result(
    op: &KernelOperator,
    w: Vec<f64>,
    iterations: usize,
    used_fallback: bool,
) -> EquilibriumResult {
    let n = w.len();
    let mut masses: Vec<f64> = w.iter().map(|&m| if m < 0.0 { 0.0 } else { m }).collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    let v = op.apply(&masses);
    let energy: f64 = masses.iter().zip(&v).map(|(a, b)| a * b).sum();
    let mut residual: f64 = 0.0;
    let mut active = 0usize;
    for i in 0..n {
        if masses[i] > 0.0 {
            active += 1;
            residual = residual.max((v[i] - energy).abs());
        } else {
            residual = residual.max(energy - v[i]);
        }
    }
    let params = op.params();
    EquilibriumResult {
        measure: Measure {
            cloud: op.cloud().clone(),
            masses,
        },
        energy,
        capacity: params.capacity_from_energy(energy),
        potential_on_nodes: v,
        kkt_residual: residual,
        active_fraction: active as f64 / n as f64,
        iterations,
        used_fallback,
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: &mut [f64]) {
    let mut s: Vec<f64> = y.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in s.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

/// Accelerated projected gradient on the simplex.
fn projected_gradient(op: &KernelOperator, start: Vec<f64>, iters: usize) -> Vec<f64> {
    let n = op.len();
    // Gershgorin bound on the spectral radius of 2K
    let lip = 2.0
        * (0..n)
            .map(|i| (0..n).map(|j| op.entry(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max);
    let mut x = start;
    project_simplex(&mut x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = op.apply(&y);
        let mut next: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - 2.0 * b / lip).collect();
        project_simplex(&mut next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        x = next;
        t = t_next;
    }
    x
}

/// Potential `v(p) = Σ w_i k(p, x_i)` at arbitrary points. A point that
/// coincides with a node picks up that node's patch self-energy instead of
/// the singular kernel value.
pub fn potential(
    measure: &Measure,
    params: &KernelParams,
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let cloud = measure.cloud();
    if cloud.dim() != params.dim() {
        return Err(Error::InvalidParameter(
            "measure and kernel dimensions differ".into(),
        ));
    }
    let patch = PatchSelfEnergy::new(*params);
    points
        .par_iter()
        .map(|p| {
            if p.len() != params.dim() {
                return Err(Error::InvalidParameter(
                    "evaluation point has the wrong dimension".into(),
                ));
            }
            let mut v = 0.0;
            for (i, &m) in measure.masses.iter().enumerate() {
                let r = distance(p, cloud.position(i));
                v += m * if r == 0.0 {
                    self_energy(&patch, cloud, i)?
                } else {
                    params.at_distance(r)
                };
            }
            Ok(v)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FarfieldRow {
    pub radius: f64,
    /// `v r^{N-α}` averaged over directions (or `v + log r` for `α = N`).
    pub normalized: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FarfieldTable {
    pub rows: Vec<FarfieldRow>,
    /// Deviation from the limit (1, or 0 in the logarithmic case) at the largest radius.
    pub final_deviation: f64,
}

/// Direction-averaged far-field decay about the origin.
pub fn farfield_check(
    measure: &Measure,
    params: &KernelParams,
    radii: &[f64],
) -> Result<FarfieldTable> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidParameter(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    let extent = measure
        .cloud()
        .positions()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let rmax = *radii.last().expect("nonempty");
    if rmax < 100.0 * extent {
        return Err(Error::InvalidParameter(format!(
            "largest radius {rmax} must be at least 100 times the cloud extent {extent:.3}"
        )));
    }
    let dim = params.dim();
    let directions: Vec<Vec<f64>> = match dim {
        2 => (0..16)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => fibonacci_directions(32)
            .into_iter()
            .map(|(t, p)| vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
            .collect(),
        _ => (0..dim)
            .flat_map(|k| {
                [1.0, -1.0].into_iter().map(move |s| {
                    let mut e = vec![0.0; dim];
                    e[k] = s;
                    e
                })
            })
            .collect(),
    };
    let target = if params.is_logarithmic() { 0.0 } else { 1.0 };
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let pts: Vec<Vec<f64>> = directions
            .iter()
            .map(|d| d.iter().map(|x| r * x).collect())
            .collect();
        let v = potential(measure, params, &pts)?;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let normalized = if params.is_logarithmic() {
            mean + r.ln()
        } else {
            mean * r.powf(params.exponent())
        };
        rows.push(FarfieldRow {
            radius: r,
            normalized,
            deviation: (normalized - target).abs(),
        });
    }
    let final_deviation = rows.last().expect("nonempty").deviation;
    Ok(FarfieldTable {
        rows,
        final_deviation,
    })
}

/// How to group nodes in [`support_profile`].
#[derive(Debug, Clone)]
pub enum Regions {
    /// Shells `edges[k] <= |x - center| < edges[k+1]` (last shell closed).
    RadialShells { center: Vec<f64>, edges: Vec<f64> },
    /// One region per connected component label of the cloud.
    Components,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionMass {
    pub label: String,
    pub nodes: usize,
    pub mass: f64,
}

/// Aggregates a measure's mass by region.
pub fn support_profile(measure: &Measure, regions: &Regions) -> Result<Vec<RegionMass>> {
    let cloud = measure.cloud();
    match regions {
        Regions::RadialShells { center, edges } => {
            if edges.len() < 2
                || edges.windows(2).any(|w| w[1] <= w[0])
                || center.len() != cloud.dim()
            {
                return Err(Error::InvalidParameter(
                    "shell edges must be increasing and the center must match the cloud".into(),
                ));
            }
            let k = edges.len() - 1;
            let mut out: Vec<RegionMass> = (0..k)
                .map(|s| RegionMass {
                    label: format!("[{}, {})", edges[s], edges[s + 1]),
                    nodes: 0,
                    mass: 0.0,
                })
                .collect();
            let tol = 1e-12 * edges[k].abs().max(1.0);
            for (i, &m) in measure.masses.iter().enumerate() {
                let r = distance(cloud.position(i), center);
                let shell = (0..k).find(|&s| {
                    r >= edges[s] && (r < edges[s + 1] || (s == k - 1 && r <= edges[k] + tol))
                });
                let s = shell.ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "node {i} at radius {r} lies outside every shell"
                    ))
                })?;
                out[s].nodes += 1;
                out[s].mass += m;
            }
            Ok(out)
        }
        Regions::Components => {
            let k = cloud.components().iter().max().map_or(0, |m| m + 1);
            let mut out: Vec<RegionMass> = (0..k)
                .map(|c| RegionMass {
                    label: format!("component {c}"),
                    nodes: 0,
                    mass: 0.0,
                })
                .collect();
            for (i, &m) in measure.masses.iter().enumerate() {
                out[cloud.component(i)].nodes += 1;
                out[cloud.component(i)].mass += m;
            }
            Ok(out)
        }
    }
}
