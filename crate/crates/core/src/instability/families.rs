//! Energy-decreasing competitor sequences.

use rayon::prelude::*;
use serde::Serialize;

use super::{term, FamilyPoint};
use crate::cloud::{discretize, NodeCloud, Placement};
use crate::equilibrium::equilibrium_measure;
use crate::error::{Error, Result};
use crate::geometry::{BallSpec, Shape};
use crate::kernel::{unit_ball_volume, unit_sphere_area, KernelParams};
use crate::operator::{assemble_operator, cross_interaction};
use crate::quadrature::loglog_slope;
use crate::report::natural_placement;

/// `∫∫ |x - y|^{-1} dx dy` over the unit cube.
pub const UNIT_CUBE_ENERGY: f64 = 1.882_312_644_389_66;

#[derive(Debug, Clone)]
pub struct ManyBallsOptions {
    /// Nodes per ball for equilibrium solves.
    pub resolution: usize,
    /// Center spacing of the small balls; when set, the energy is also
    /// evaluated numerically on the union.
    pub separation: Option<f64>,
    /// `𝓘_α(B_1)`; solved for at `resolution` when absent (exactly 1 for `N = 3, α = 2`).
    pub unit_ball_energy: Option<f64>,
    pub tol: f64,
}

impl Default for ManyBallsOptions {
    fn default() -> Self {
        Self {
            resolution: 800,
            separation: None,
            unit_ball_energy: None,
            tol: 1e-10,
        }
    }
}

/// Default center spacing used to lay out the shapes when none is requested.
const LAYOUT_SEPARATION: f64 = 1e3;

/// A large ball carrying no charge plus `n` far-apart balls of radius
/// `n^{-β}`, each carrying charge `Q/n`, at total volume `|B_1|`.
pub fn many_balls_family(
    n_list: &[usize],
    beta: f64,
    charge: f64,
    params: KernelParams,
    opts: &ManyBallsOptions,
) -> Result<Vec<FamilyPoint>> {
    let dim = params.dim();
    let nf = dim as f64;
    let alpha = params.alpha();
    if !(alpha > 1.0 && alpha < nf) {
        return Err(Error::InvalidParameter(format!(
            "many-balls family needs 1 < alpha < N, got alpha = {alpha}"
        )));
    }
    let (lo, hi) = (1.0 / (nf - 1.0), 1.0 / (nf - alpha));
    if !(beta > lo && beta < hi) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in ({lo:.4}, {hi:.4}), got {beta}"
        )));
    }
    if let Some(d) = opts.separation {
        if !(d > 4.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "separation must exceed 4, got {d}"
            )));
        }
    }
    let unit_energy = match opts.unit_ball_energy {
        Some(e) => e,
        None if dim == 3 && alpha == 2.0 => 1.0,
        None => {
            let op = assemble_operator(
                discretize(
                    &Shape::unit_ball(dim),
                    opts.resolution,
                    natural_placement(&params),
                )?,
                params,
            )?;
            equilibrium_measure(&op, opts.tol)?.energy
        }
    };
    let sphere = unit_sphere_area(dim);
    let spacing = opts.separation.unwrap_or(LAYOUT_SEPARATION);
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "family indices must be positive".into(),
            ));
        }
        let r = (n as f64).powf(-beta);
        let used = n as f64 * r.powf(nf);
        if used >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "n = {n}: small balls exhaust the volume"
            )));
        }
        let big = (1.0 - used).powf(1.0 / nf);
        let components = vec![
            term("perimeter_large", sphere * big.powf(nf - 1.0)),
            term("perimeter_small", n as f64 * r.powf(nf - 1.0) * sphere),
            term(
                "interaction",
                charge * charge / n as f64 * r.powf(-(nf - alpha)) * unit_energy,
            ),
        ];
        let mut balls = vec![BallSpec {
            center: vec![0.0; dim],
            radius: big,
        }];
        balls.extend((0..n).map(|k| {
            let mut c = vec![0.0; dim];
            c[0] = spacing * (k + 1) as f64;
            BallSpec {
                center: c,
                radius: r,
            }
        }));
        let mut point = FamilyPoint::new(n, Shape::UnionOfBalls { balls }, components);
        // pairwise interactions of the small balls, each pair at distance >= spacing
        point.bound =
            Some(charge * charge * (n as f64 - 1.0) / n as f64 * spacing.powf(-(nf - alpha)));
        if opts.separation.is_some() {
            let numeric = many_balls_numeric(n, r, spacing, params, opts)?;
            let perimeter = point.components[0].value + point.components[1].value;
            point.numeric_energy = Some(perimeter + charge * charge * numeric);
        }
        out.push(point);
    }
    Ok(out)
}

/// `I_α` of the measure giving each small ball mass `1/n` in its equilibrium distribution.
fn many_balls_numeric(
    n: usize,
    r: f64,
    spacing: f64,
    params: KernelParams,
    opts: &ManyBallsOptions,
) -> Result<f64> {
    let dim = params.dim();
    let ball = Shape::ball(vec![0.0; dim], r)?;
    let op = assemble_operator(
        discretize(&ball, opts.resolution, natural_placement(&params))?,
        params,
    )?;
    let eq = equilibrium_measure(&op, opts.tol)?;
    let w: Vec<f64> = eq.measure.masses().to_vec();
    let shifted: Vec<NodeCloud> = (0..n)
        .map(|k| {
            let mut t = vec![0.0; dim];
            t[0] = spacing * (k + 1) as f64;
            op.cloud().translated(&t)
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let cross: f64 = pairs
        .par_iter()
        .map(|&(i, j)| cross_interaction(&params, &shifted[i], &w, &shifted[j], &w))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let nf = n as f64;
    Ok(eq.energy / nf + 2.0 * cross / (nf * nf))
}

/// Two balls of half the unit volume at `±n e₁` with charge densities `±1`,
/// in the uniform field `E e₁` (`φ = -E x₁`), `N = 3`.
pub fn two_balls_field_family(
    n_list: &[usize],
    field: f64,
    resolution: usize,
) -> Result<Vec<FamilyPoint>> {
    const DIM: usize = 3;
    let nf = DIM as f64;
    if !field.is_finite() {
        return Err(Error::InvalidParameter(
            "field strength must be finite".into(),
        ));
    }
    let a = 0.5f64.powf(1.0 / nf);
    let mass = unit_ball_volume(DIM) / 2.0;
    let self_one = mass * mass * a.powf(2.0 - nf) * 2.0 * nf / (nf + 2.0);
    let params = KernelParams::coulomb(DIM)?;
    n_list
        .iter()
        .map(|&n| {
            let d = n as f64;
            if d <= a {
                return Err(Error::InvalidParameter(format!(
                    "n = {n}: the balls at ±n e₁ overlap"
                )));
            }
            let center = |s: f64| {
                let mut c = vec![0.0; DIM];
                c[0] = s * d;
                c
            };
            let shape = Shape::union_of_balls(vec![
                BallSpec {
                    center: center(1.0),
                    radius: a,
                },
                BallSpec {
                    center: center(-1.0),
                    radius: a,
                },
            ])?;
            let components = vec![
                term("perimeter", 2.0 * unit_sphere_area(DIM) * a.powf(nf - 1.0)),
                term("self", 2.0 * self_one),
                term("cross", -2.0 * mass * mass / (2.0 * d).powf(nf - 2.0)),
                term("field", -2.0 * field * mass * d),
            ];
            let mut point = FamilyPoint::new(n, shape, components);
            point.bound = Some(2.0 * self_one - 2.0 * d * field * mass);

            let plus = discretize(
                &Shape::ball(center(1.0), a)?,
                resolution.max(2) / 2,
                Placement::Volume,
            )?;
            let minus = plus.translated(&center(-2.0))?;
            let w: Vec<f64> = plus.weights().to_vec();
            let op = assemble_operator(plus, params)?;
            let self_num = 2.0 * op.quadratic_form(&w);
            let cross_num = -2.0 * cross_interaction(&params, op.cloud(), &w, &minus, &w)?;
            let moment: f64 = op
                .cloud()
                .positions()
                .zip(&w)
                .map(|(x, m)| x[0] * m)
                .sum::<f64>()
                - minus
                    .positions()
                    .zip(&w)
                    .map(|(x, m)| x[0] * m)
                    .sum::<f64>();
            let numeric = point.components[0].value + self_num + cross_num - field * moment;
            point.numeric_energy = Some(numeric);
            Ok(point)
        })
        .collect()
}

/// Log-log slopes of the slab energy terms against `n`.
#[derive(Debug, Clone, Serialize)]
pub struct SlabExponents {
    pub perimeter: f64,
    pub interaction: f64,
    /// Slope of `|field term|`; the term itself is negative.
    pub field: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlabFamily {
    pub points: Vec<FamilyPoint>,
    pub exponents: SlabExponents,
    /// Smallest listed `n` from which every total energy is negative.
    pub crossover: Option<usize>,
}

/// Slabs `[-n/2, n/2] × [0, ε_n]²` of volume `|B_1|` with unit charges of
/// opposite sign spread over the two end cubes of side `ε_n`, `N = 3`.
///
/// Components are evaluated on volume clouds of the end caps (`resolution`
/// nodes per cap); the analytic energy uses the cube self-energy and the
/// point-charge cross term.
pub fn slab_family(n_list: &[usize], field: f64, resolution: usize) -> Result<SlabFamily> {
    const DIM: usize = 3;
    if n_list.len() < 2 {
        return Err(Error::InvalidParameter(
            "a slab family needs at least two members to fit exponents".into(),
        ));
    }
    if resolution < 8 {
        return Err(Error::Resolution(format!(
            "{resolution} nodes per end cap cannot resolve a cube"
        )));
    }
    let params = KernelParams::coulomb(DIM)?;
    let volume = unit_ball_volume(DIM);
    let points: Vec<FamilyPoint> = n_list
        .iter()
        .map(|&n| {
            let len = n as f64;
            let eps = (volume / len).sqrt();
            if len.is_nan() || len <= 2.0 * eps {
                return Err(Error::InvalidParameter(format!(
                    "n = {n}: end caps of the slab overlap"
                )));
            }
            let shape = Shape::cuboid(vec![0.0; DIM], vec![len / 2.0, eps / 2.0, eps / 2.0])?;
            let components = vec![
                term("perimeter", 2.0 * eps * eps + 4.0 * len * eps),
                term(
                    "interaction",
                    2.0 * UNIT_CUBE_ENERGY / eps - 2.0 / (len - eps),
                ),
                term("field", -field * (len - eps)),
            ];
            let mut point = FamilyPoint::new(n, shape, components);

            let cap = Shape::cuboid(vec![len / 2.0 - eps / 2.0, 0.0, 0.0], vec![eps / 2.0; DIM])?;
            let plus = discretize(&cap, resolution, Placement::Volume)?;
            let minus = plus.translated(&[-(len - eps), 0.0, 0.0])?;
            let total = plus.total_weight();
            let w: Vec<f64> = plus.weights().iter().map(|v| v / total).collect();
            let op = assemble_operator(plus, params)?;
            let interaction = 2.0 * op.quadratic_form(&w)
                - 2.0 * cross_interaction(&params, op.cloud(), &w, &minus, &w)?;
            let moment: f64 = op
                .cloud()
                .positions()
                .zip(&w)
                .map(|(x, m)| x[0] * m)
                .sum::<f64>()
                - minus
                    .positions()
                    .zip(&w)
                    .map(|(x, m)| x[0] * m)
                    .sum::<f64>();
            point.numeric_energy = Some(point.components[0].value + interaction - field * moment);
            Ok(point)
        })
        .collect::<Result<_>>()?;

    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let slope = |name: &str| {
        let ys: Vec<f64> = points
            .iter()
            .map(|p| p.component(name).unwrap_or(f64::NAN).abs())
            .collect();
        loglog_slope(&ns, &ys)
    };
    let exponents = SlabExponents {
        perimeter: slope("perimeter"),
        interaction: slope("interaction"),
        field: slope("field"),
    };
    let negative_from = points
        .iter()
        .rposition(|p| p.numeric_energy.unwrap_or(p.analytic_energy) >= 0.0);
    let crossover = match negative_from {
        None => points.first().map(|p| p.n),
        Some(k) if k + 1 < points.len() => Some(points[k + 1].n),
        Some(_) => None,
    };
    Ok(SlabFamily {
        points,
        exponents,
        crossover,
    })
}
