//! Nearly spherical perturbations: perimeter expansions, charge thresholds
//! and the energy-versus-perimeter deficit ratio.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{discretize, Placement};
use crate::equilibrium::{equilibrium_measure, EquilibriumResult};
use crate::error::{Error, Result};
use crate::geometry::{Shape, SPHERE_QUADRATURE_THETA};
use crate::harmonics::{expansion, HarmonicCoefficient, SphereQuadrature};
use crate::kernel::{unit_ball_volume, KernelParams};
use crate::operator::assemble_operator;

/// `r = 1 + t φ` over the unit sphere, dilated back to the volume of `B_1`.
pub fn perturbed_sphere(coefficients: &[HarmonicCoefficient], t: f64) -> Result<Shape> {
    Shape::nearly_spherical(t, coefficients.to_vec())?.with_volume(unit_ball_volume(3))
}

/// Coefficients with repeated `(l, m)` entries merged.
fn merged(coefficients: &[HarmonicCoefficient]) -> BTreeMap<(usize, i64), f64> {
    let mut map = BTreeMap::new();
    for c in coefficients {
        *map.entry((c.l, c.m)).or_insert(0.0) += c.value;
    }
    map
}

#[derive(Debug, Clone, Serialize)]
pub struct FugledeRow {
    pub epsilon: f64,
    pub perimeter: f64,
    pub expansion: f64,
    pub remainder: f64,
    /// `remainder / ε³`; absent at `ε = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FugledeTable {
    /// `d/dε Per` at `ε = 0`: `2 ∫φ`.
    pub first_variation: f64,
    /// `Σ a_lm² (1 + l(l+1)/2)`, the `ε²` coefficient.
    pub quadratic_form: f64,
    /// `ε²` coefficient after dilating back to `|B_1|`: `Σ a_lm² (l-1)(l+2)/2`.
    pub renormalized_form: f64,
    pub rows: Vec<FugledeRow>,
    /// Largest `|ratio|` over the rows.
    pub max_ratio: f64,
}

/// Compares the perimeter of `r = 1 + εφ` with its second-order expansion
/// `4π + 2ε ∫φ + ε² Σ a_lm² (1 + l(l+1)/2)`.
pub fn fuglede_check(
    coefficients: &[HarmonicCoefficient],
    eps_list: &[f64],
) -> Result<FugledeTable> {
    let map = merged(coefficients);
    let first_variation = 2.0 * map.get(&(0, 0)).copied().unwrap_or(0.0) * (4.0 * PI).sqrt();
    let quadratic_form: f64 = map
        .iter()
        .map(|(&(l, _), a)| a * a * (1.0 + (l * (l + 1)) as f64 / 2.0))
        .sum();
    let renormalized_form: f64 = map
        .iter()
        .filter(|(&(l, _), _)| l > 0)
        .map(|(&(l, _), a)| a * a * ((l as f64 - 1.0) * (l as f64 + 2.0)) / 2.0)
        .sum();
    let lmax = map.keys().map(|k| k.0).max().unwrap_or(0);
    let n_theta = SPHERE_QUADRATURE_THETA.max(4 * lmax + 16);
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let shape = Shape::nearly_spherical(eps, coefficients.to_vec())?;
            let perimeter = shape.nearly_spherical_perimeter(n_theta);
            let expansion = 4.0 * PI + eps * first_variation + eps * eps * quadratic_form;
            let remainder = perimeter - expansion;
            let ratio = (eps != 0.0).then(|| remainder / eps.abs().powi(3));
            Ok(FugledeRow {
                epsilon: eps,
                perimeter,
                expansion,
                remainder,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows
        .iter()
        .filter_map(|r| r.ratio)
        .map(f64::abs)
        .fold(0.0, f64::max);
    Ok(FugledeTable {
        first_variation,
        quadratic_form,
        renormalized_form,
        rows,
        max_ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityScan {
    /// Harmonic degree `l` of the axisymmetric mode `Y_l0`.
    pub mode: usize,
    pub amplitudes: Vec<f64>,
    pub charges: Vec<f64>,
    /// Perimeter per amplitude.
    pub perimeters: Vec<f64>,
    /// `𝓘₂` per amplitude.
    pub interaction: Vec<f64>,
    /// `E(Q, t)`, indexed `[charge][amplitude]`.
    pub energy_table: Vec<Vec<f64>>,
    /// Central second difference of `E(Q, ·)` at `t = 0`, per charge.
    pub second_derivative: Vec<f64>,
    /// Step of the second difference.
    pub step: f64,
    /// Charge at which the second difference changes sign (`Q² = -P''/𝓘''`).
    pub threshold_estimate: Option<f64>,
    /// Smallest scanned charge with a negative second difference.
    pub first_unstable_charge: Option<f64>,
    /// Amplitudes whose equilibrium solve did not converge (best iterate used).
    pub unconverged: Vec<f64>,
}

fn solve_or_best(shape: &Shape, m: usize, tol: f64) -> Result<(EquilibriumResult, bool)> {
    let op = assemble_operator(
        discretize(shape, m, Placement::Boundary)?,
        KernelParams::coulomb(3)?,
    )?;
    match equilibrium_measure(&op, tol) {
        Ok(r) => Ok((r, true)),
        Err(Error::NonConvergence { best, .. }) => Ok((*best, false)),
        Err(e) => Err(e),
    }
}

/// Energies `E(Q, t) = Per + Q² 𝓘₂` of volume-normalized perturbations
/// `1 + t Y_l0`, and the charge where `∂²E/∂t²` at the ball changes sign.
pub fn rayleigh_scan(
    l: usize,
    amplitudes: &[f64],
    charges: &[f64],
    m: usize,
    tol: f64,
) -> Result<StabilityScan> {
    if l == 0 {
        return Err(Error::InvalidParameter(
            "mode degree must be at least 1".into(),
        ));
    }
    if !amplitudes.contains(&0.0) {
        return Err(Error::InvalidParameter("amplitudes must include 0".into()));
    }
    let step = amplitudes
        .iter()
        .filter(|&&t| t > 0.0 && amplitudes.contains(&-t))
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !step.is_finite() {
        return Err(Error::InvalidParameter(
            "amplitudes need a symmetric pair ±h".into(),
        ));
    }
    if charges.iter().any(|q| !q.is_finite()) {
        return Err(Error::InvalidParameter("charges must be finite".into()));
    }
    let coeffs = [HarmonicCoefficient::new(l, 0, 1.0)];
    let solved: Vec<(f64, f64, bool)> = amplitudes
        .par_iter()
        .map(|&t| {
            let shape = perturbed_sphere(&coeffs, t)?;
            let per = shape.perimeter()?;
            let (eq, ok) = solve_or_best(&shape, m, tol)?;
            Ok((per, eq.energy, ok))
        })
        .collect::<Result<_>>()?;
    let perimeters: Vec<f64> = solved.iter().map(|s| s.0).collect();
    let interaction: Vec<f64> = solved.iter().map(|s| s.1).collect();
    let unconverged = amplitudes
        .iter()
        .zip(&solved)
        .filter(|(_, s)| !s.2)
        .map(|(t, _)| *t)
        .collect();
    let energy_table: Vec<Vec<f64>> = charges
        .iter()
        .map(|q| {
            perimeters
                .iter()
                .zip(&interaction)
                .map(|(p, i)| p + q * q * i)
                .collect()
        })
        .collect();

    let idx = |t: f64| amplitudes.iter().position(|&a| a == t).expect("present");
    let (i0, ip, im) = (idx(0.0), idx(step), idx(-step));
    let d2 = |v: &[f64]| (v[ip] + v[im] - 2.0 * v[i0]) / (step * step);
    let p2 = d2(&perimeters);
    let i2 = d2(&interaction);
    let second_derivative: Vec<f64> = charges.iter().map(|q| p2 + q * q * i2).collect();
    let threshold_estimate = (i2 < 0.0 && p2 > 0.0).then(|| (p2 / -i2).sqrt());
    let first_unstable_charge = charges
        .iter()
        .zip(&second_derivative)
        .filter(|(_, d)| **d < 0.0)
        .map(|(q, _)| *q)
        .fold(None, |acc: Option<f64>, q| {
            Some(acc.map_or(q, |a| a.min(q)))
        });
    Ok(StabilityScan {
        mode: l,
        amplitudes: amplitudes.to_vec(),
        charges: charges.to_vec(),
        perimeters,
        interaction,
        energy_table,
        second_derivative,
        step,
        threshold_estimate,
        first_unstable_charge,
        unconverged,
    })
}

/// Ratio statistics at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ResolutionStats {
    pub resolution: usize,
    pub ball_energy: f64,
    pub used: usize,
    /// Samples whose energy deficit `𝓘₂(B_1) - 𝓘₂(Ω)` was not positive.
    pub nonpositive: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub median_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaRatioReport {
    pub samples: usize,
    pub epsilon_max: f64,
    /// Samples whose perimeter deficit is below the quadrature noise floor.
    pub skipped: usize,
    pub per_resolution: Vec<ResolutionStats>,
    /// `|max₁ - max₂| / max(max₁, max₂)` over the first two resolutions.
    pub resolution_spread: Option<f64>,
    /// Largest `|Ω Δ B_1| / sqrt(Per(Ω) - Per(B_1))`.
    pub isoperimetric_constant: f64,
}

/// Perimeter deficits below this are treated as quadrature noise.
const DEFICIT_FLOOR: f64 = 1e-9;

const LEMMA_LMIN: usize = 2;
const LEMMA_LMAX: usize = 4;

/// Random volume-normalized nearly spherical sets: `φ` has Gaussian
/// coefficients for `2 <= l <= 4` scaled to `max |φ| = 1`, amplitude
/// uniform in `[ε_max/2, ε_max]`.
fn random_samples(samples: usize, eps_max: f64, seed: u64) -> Result<Vec<Shape>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = SphereQuadrature::new(32);
    (0..samples)
        .map(|_| {
            let mut coeffs: Vec<HarmonicCoefficient> = (LEMMA_LMIN..=LEMMA_LMAX)
                .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
                .map(|(l, m)| HarmonicCoefficient::new(l, m, rng.sample(StandardNormal)))
                .collect();
            let sup = grid
                .nodes
                .iter()
                .map(|&(t, p, _)| expansion(&coeffs, t, p).value.abs())
                .fold(0.0, f64::max);
            coeffs.iter_mut().for_each(|c| c.value /= sup);
            let eps = rng.gen_range(0.5 * eps_max..=eps_max);
            perturbed_sphere(&coeffs, eps)
        })
        .collect()
}

/// `|Ω Δ B_1| = ∫ |r³ - 1| / 3 dω` for a radial graph centered at the origin.
fn symmetric_difference(shape: &Shape) -> f64 {
    let q = SphereQuadrature::new(SPHERE_QUADRATURE_THETA);
    q.integrate(|t, p| {
        shape
            .radial_profile(t, p)
            .map_or(f64::NAN, |r| (r.value.powi(3) - 1.0).abs() / 3.0)
    })
}

/// Empirical constant `C` in `𝓘₂(B_1) - 𝓘₂(Ω) <= C (Per(Ω) - Per(B_1))`
/// over random nearly spherical sets, at each requested resolution.
pub fn lemma_ratio_check(
    samples: usize,
    eps_max: f64,
    resolutions: &[usize],
    seed: u64,
    tol: f64,
) -> Result<LemmaRatioReport> {
    if !(eps_max > 0.0 && eps_max < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon_max must lie in (0, 0.5), got {eps_max}"
        )));
    }
    if resolutions.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one resolution is required".into(),
        ));
    }
    let shapes = random_samples(samples, eps_max, seed)?;
    let sphere_area = 4.0 * PI;
    let deficits: Vec<f64> = shapes
        .iter()
        .map(|s| s.perimeter().map(|p| p - sphere_area))
        .collect::<Result<_>>()?;
    let kept: Vec<usize> = (0..samples)
        .filter(|&i| deficits[i] > DEFICIT_FLOOR)
        .collect();
    let isoperimetric_constant = kept
        .iter()
        .map(|&i| symmetric_difference(&shapes[i]) / deficits[i].sqrt())
        .fold(0.0, f64::max);

    let mut per_resolution = Vec::with_capacity(resolutions.len());
    for &m in resolutions {
        let (ball, _) = solve_or_best(&Shape::unit_ball(3), m, tol)?;
        let energies: Vec<f64> = kept
            .par_iter()
            .map(|&i| solve_or_best(&shapes[i], m, tol).map(|(r, _)| r.energy))
            .collect::<Result<_>>()?;
        let mut ratios: Vec<f64> = kept
            .iter()
            .zip(&energies)
            .filter(|(_, e)| ball.energy - **e > 0.0)
            .map(|(&i, e)| (ball.energy - e) / deficits[i])
            .collect();
        ratios.sort_by(f64::total_cmp);
        let used = ratios.len();
        let stat = |f: &dyn Fn(&[f64]) -> f64| if used > 0 { f(&ratios) } else { f64::NAN };
        per_resolution.push(ResolutionStats {
            resolution: m,
            ball_energy: ball.energy,
            used,
            nonpositive: kept.len() - used,
            max_ratio: stat(&|r| r[r.len() - 1]),
            mean_ratio: stat(&|r| r.iter().sum::<f64>() / r.len() as f64),
            median_ratio: stat(&|r| r[r.len() / 2]),
        });
    }
    let resolution_spread = (per_resolution.len() >= 2).then(|| {
        let (a, b) = (per_resolution[0].max_ratio, per_resolution[1].max_ratio);
        (a - b).abs() / a.max(b)
    });
    Ok(LemmaRatioReport {
        samples,
        epsilon_max: eps_max,
        skipped: samples - kept.len(),
        per_resolution,
        resolution_spread,
        isoperimetric_constant,
    })
}
