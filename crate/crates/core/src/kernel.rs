//! Riesz and logarithmic interaction kernels, and the self-energies of
//! uniformly charged patches used to desingularize operator diagonals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Dimension `N` and order `alpha` of the interaction `|x - y|^{alpha - N}`
/// (or `-log|x - y|` when `alpha == N`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    dim: usize,
    alpha: f64,
}

impl KernelParams {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "dim must be >= 2, got {dim}"
            )));
        }
        if !(alpha > 0.0 && alpha <= dim as f64 + LOG_EPS) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, {dim}], got {alpha}"
            )));
        }
        let alpha = if (alpha - dim as f64).abs() <= LOG_EPS {
            dim as f64
        } else {
            alpha
        };
        Ok(Self { dim, alpha })
    }

    /// Newtonian interaction `alpha = 2`.
    pub fn coulomb(dim: usize) -> Result<Self> {
        Self::new(dim, 2.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_logarithmic(&self) -> bool {
        self.alpha == self.dim as f64
    }

    /// `N - alpha`.
    pub fn exponent(&self) -> f64 {
        self.dim as f64 - self.alpha
    }

    /// Constant `c` in `-Δv = c μ` for the potential of `μ` when `alpha = 2`:
    /// `(N - 2) ω_{N-1}` for `N >= 3`, and `2π` for the planar logarithmic kernel.
    pub fn pde_constant(&self) -> Result<f64> {
        if self.alpha != 2.0 {
            return Err(Error::Unsupported(format!(
                "the PDE constant is only available for alpha = 2 (got {})",
                self.alpha
            )));
        }
        if self.dim == 2 {
            Ok(2.0 * PI)
        } else {
            Ok((self.dim as f64 - 2.0) * unit_sphere_area(self.dim))
        }
    }

    /// Kernel at distance `r > 0`. No checks.
    #[inline]
    pub fn at_distance(&self, r: f64) -> f64 {
        if self.is_logarithmic() {
            -r.ln()
        } else if self.alpha == 2.0 && self.dim == 3 {
            1.0 / r
        } else {
            r.powf(-self.exponent())
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "points must have dimension {}",
                self.dim
            )));
        }
        let r = distance(x, y);
        if r == 0.0 {
            return Err(Error::Domain(
                "kernel evaluated at coincident points".into(),
            ));
        }
        Ok(self.at_distance(r))
    }

    /// Energy of a measure scaled by `factor` about the origin, relative to the
    /// unscaled one: multiplicative for Riesz kernels, additive for `-log`.
    pub fn rescale_energy(&self, energy: f64, factor: f64) -> f64 {
        if self.is_logarithmic() {
            energy - factor.ln()
        } else {
            energy * factor.powf(-self.exponent())
        }
    }

    /// Capacity from the minimal energy.
    pub fn capacity_from_energy(&self, energy: f64) -> f64 {
        if self.is_logarithmic() {
            (-energy).exp()
        } else {
            1.0 / energy
        }
    }
}

const LOG_EPS: f64 = 1e-12;

#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Surface area `ω_{N-1}` of the unit sphere in `R^N`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI / (d as f64 - 2.0) * unit_sphere_area(d - 2),
    }
}

/// Volume of the unit ball in `R^N`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    unit_sphere_area(dim) / dim as f64
}

/// Probability density of the distance between two independent uniform
/// points of the unit disk.
fn disk_distance_density(d: f64) -> f64 {
    let h = 0.5 * d;
    4.0 * d / PI * (h.clamp(-1.0, 1.0).acos() - h * (1.0 - h * h).max(0.0).sqrt())
}

/// Same for the unit ball in `R^3`.
fn ball_distance_density(d: f64) -> f64 {
    3.0 / 16.0 * d * d * (2.0 - d) * (2.0 - d) * (d + 4.0)
}

/// `∫∫ k(|x-y|) dx dy` over two uniform probability measures on a unit body,
/// given the distance density `f` (which behaves like `d^{body_dim - 1}` at 0).
fn unit_body_energy(f: fn(f64) -> f64, body_dim: usize, params: &KernelParams) -> f64 {
    // d = 2 u^q flattens the d^{body_dim - 1 - s} endpoint behaviour.
    let e = body_dim as f64
        - 1.0
        - if params.is_logarithmic() {
            0.0
        } else {
            params.exponent()
        };
    let q = 2.0 / (e + 1.0);
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let d = 2.0 * u.powf(q);
        let jac = 2.0 * q * u.powf(q - 1.0);
        let k = if params.is_logarithmic() {
            -d.ln()
        } else {
            d.powf(-params.exponent())
        };
        k * f(d) * jac
    };
    quadrature::integrate(integrand, 0.0, 1.0, 64, 20)
}

/// Normalized self-energies of the equal-measure patch shapes, computed once
/// per kernel and reused across every diagonal entry of an operator.
#[derive(Debug, Clone, Copy)]
pub struct PatchSelfEnergy {
    params: KernelParams,
    boundary_const: Option<f64>,
    volume_const: Option<f64>,
}

impl PatchSelfEnergy {
    pub fn new(params: KernelParams) -> Self {
        let s = params.exponent();
        let log = params.is_logarithmic();
        let (boundary_const, volume_const) = match params.dim {
            2 => {
                // Boundary patch: straight segment. Volume patch: disk.
                let segment = if log {
                    Some(1.5)
                } else if s < 1.0 {
                    Some(2.0 / ((1.0 - s) * (2.0 - s)))
                } else {
                    None
                };
                (
                    segment,
                    Some(unit_body_energy(disk_distance_density, 2, &params)),
                )
            }
            3 => {
                // Boundary patch: flat disk. Volume patch: ball.
                let disk = if params.alpha == 2.0 {
                    Some(16.0 / (3.0 * PI))
                } else if log || s < 2.0 {
                    Some(unit_body_energy(disk_distance_density, 2, &params))
                } else {
                    None
                };
                (
                    disk,
                    Some(unit_body_energy(ball_distance_density, 3, &params)),
                )
            }
            _ => (None, None),
        };
        Self {
            params,
            boundary_const,
            volume_const,
        }
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    /// Self-energy of a boundary patch of measure `weight` (length in 2D, area in 3D).
    pub fn boundary(&self, weight: f64) -> Result<f64> {
        let c = self.boundary_const.ok_or_else(|| {
            Error::Unsupported(format!(
                "no boundary diagonal rule for dim {} alpha {} (boundary has zero capacity \
                 or the dimension is not supported)",
                self.params.dim, self.params.alpha
            ))
        })?;
        // Characteristic length: segment length in 2D, disk radius in 3D.
        let len = if self.params.dim == 2 {
            weight
        } else {
            (weight / PI).sqrt()
        };
        Ok(self.scale(c, len))
    }

    /// Self-energy of a volume cell of measure `weight`, replaced by the ball of
    /// equal volume.
    pub fn volume(&self, weight: f64) -> Result<f64> {
        let c = self.volume_const.ok_or_else(|| {
            Error::Unsupported(format!(
                "no volume diagonal rule for dim {}",
                self.params.dim
            ))
        })?;
        let radius =
            (weight / unit_ball_volume(self.params.dim)).powf(1.0 / self.params.dim as f64);
        Ok(self.scale(c, radius))
    }

    fn scale(&self, unit_value: f64, len: f64) -> f64 {
        if self.params.is_logarithmic() {
            unit_value - len.ln()
        } else {
            unit_value * len.powf(-self.params.exponent())
        }
    }
}
