//! Parametric compact sets with exact (or spectrally accurate) perimeter and
//! volume.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{self, AngularSample, HarmonicCoefficient, SphereQuadrature};
use crate::kernel::{distance, unit_ball_volume, unit_sphere_area};

/// Default `θ` resolution of the sphere quadrature used for nearly spherical sets.
pub const SPHERE_QUADRATURE_THETA: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// A compact set in `R^N`. The JSON form is internally tagged by `"type"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Annulus {
        center: Vec<f64>,
        r_in: f64,
        r_out: f64,
    },
    UnionOfBalls {
        balls: Vec<BallSpec>,
    },
    Box {
        center: Vec<f64>,
        half_widths: Vec<f64>,
    },
    /// Planar convex polygon, vertices counterclockwise.
    ConvexPolygon {
        vertices: Vec<[f64; 2]>,
    },
    /// `{ x : |x - c| <= radius (1 + ε φ(x/|x|)) }` in `R^3`, with
    /// `φ = Σ a_lm Y_lm` in the real orthonormal basis.
    NearlySpherical {
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "unit")]
        radius: f64,
        epsilon: f64,
        coefficients: Vec<HarmonicCoefficient>,
    },
}

fn unit() -> f64 {
    1.0
}

impl Shape {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let s = Shape::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    /// The unit ball centered at the origin of `R^dim`.
    pub fn unit_ball(dim: usize) -> Self {
        Shape::Ball {
            center: vec![0.0; dim],
            radius: 1.0,
        }
    }

    pub fn annulus(center: Vec<f64>, r_in: f64, r_out: f64) -> Result<Self> {
        let s = Shape::Annulus {
            center,
            r_in,
            r_out,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn union_of_balls(balls: Vec<BallSpec>) -> Result<Self> {
        let s = Shape::UnionOfBalls { balls };
        s.validate()?;
        Ok(s)
    }

    pub fn cuboid(center: Vec<f64>, half_widths: Vec<f64>) -> Result<Self> {
        let s = Shape::Box {
            center,
            half_widths,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn convex_polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let s = Shape::ConvexPolygon { vertices };
        s.validate()?;
        Ok(s)
    }

    pub fn nearly_spherical(epsilon: f64, coefficients: Vec<HarmonicCoefficient>) -> Result<Self> {
        let s = Shape::NearlySpherical {
            center: [0.0; 3],
            radius: 1.0,
            epsilon,
            coefficients,
        };
        s.validate()?;
        Ok(s)
    }

    /// Regular `m`-gon centered at the origin with the given area.
    pub fn regular_polygon(m: usize, area: f64) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidShape(format!(
                "a polygon needs >= 3 vertices, got {m}"
            )));
        }
        let mf = m as f64;
        // area = (m/2) R^2 sin(2π/m)
        let r = (2.0 * area / (mf * (2.0 * PI / mf).sin())).sqrt();
        let vertices = (0..m)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / mf;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        Self::convex_polygon(vertices)
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. }
            | Shape::Annulus { center, .. }
            | Shape::Box { center, .. } => center.len(),
            Shape::UnionOfBalls { balls } => balls.first().map_or(0, |b| b.center.len()),
            Shape::ConvexPolygon { .. } => 2,
            Shape::NearlySpherical { .. } => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidShape(msg));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Shape::Ball { center, radius } => {
                if center.len() < 2 || !finite(center) {
                    return bad("ball center must be a finite point of dimension >= 2".into());
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad(format!("ball radius must be positive, got {radius}"));
                }
            }
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => {
                if center.len() < 2 || !finite(center) {
                    return bad("annulus center must be a finite point of dimension >= 2".into());
                }
                if !(*r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
                    return bad(format!(
                        "annulus needs 0 < r_in < r_out, got {r_in}, {r_out}"
                    ));
                }
            }
            Shape::UnionOfBalls { balls } => {
                if balls.is_empty() {
                    return bad("union of balls is empty".into());
                }
                let dim = balls[0].center.len();
                for b in balls {
                    if b.center.len() != dim {
                        return bad("balls of a union must share one dimension".into());
                    }
                    Shape::Ball {
                        center: b.center.clone(),
                        radius: b.radius,
                    }
                    .validate()?;
                }
                for (i, a) in balls.iter().enumerate() {
                    for b in &balls[i + 1..] {
                        if distance(&a.center, &b.center) <= a.radius + b.radius {
                            return bad("balls of a union must be pairwise disjoint".into());
                        }
                    }
                }
            }
            Shape::Box {
                center,
                half_widths,
            } => {
                if center.len() < 2 || center.len() != half_widths.len() || !finite(center) {
                    return bad("box center and half widths must share a dimension >= 2".into());
                }
                if half_widths.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                    return bad("box half widths must be positive".into());
                }
            }
            Shape::ConvexPolygon { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return bad(format!("a polygon needs >= 3 vertices, got {n}"));
                }
                let mut turning = 0.0;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    let e1 = [b[0] - a[0], b[1] - a[1]];
                    let e2 = [c[0] - b[0], c[1] - b[1]];
                    let cross = e1[0] * e2[1] - e1[1] * e2[0];
                    if cross <= 0.0 || !cross.is_finite() {
                        return bad("polygon must be strictly convex and counterclockwise".into());
                    }
                    turning += cross.atan2(e1[0] * e2[0] + e1[1] * e2[1]);
                }
                if (turning - 2.0 * PI).abs() > 1e-6 {
                    return bad("polygon boundary winds more than once".into());
                }
            }
            Shape::NearlySpherical {
                center,
                radius,
                epsilon,
                coefficients,
            } => {
                if !(finite(center) && *radius > 0.0 && radius.is_finite() && epsilon.is_finite()) {
                    return bad("nearly spherical set needs a finite center, positive radius and finite epsilon".into());
                }
                for c in coefficients {
                    if c.m.unsigned_abs() as usize > c.l || !c.value.is_finite() {
                        return bad(format!(
                            "invalid harmonic coefficient (l={}, m={})",
                            c.l, c.m
                        ));
                    }
                }
                let q = SphereQuadrature::new(SPHERE_QUADRATURE_THETA);
                let min = q
                    .nodes
                    .iter()
                    .map(|&(t, p, _)| {
                        1.0 + epsilon * harmonics::expansion(coefficients, t, p).value
                    })
                    .fold(f64::INFINITY, f64::min);
                if min <= 0.0 {
                    return bad(format!(
                        "radial graph 1 + εφ must stay positive (min {min:.3e})"
                    ));
                }
            }
        }
        if self.volume_unchecked() <= 0.0 {
            return bad("shape has zero volume".into());
        }
        Ok(())
    }

    /// `H^{N-1}(∂Ω)`.
    pub fn perimeter(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.perimeter_unchecked())
    }

    /// Lebesgue measure `|Ω|`.
    pub fn volume(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.volume_unchecked())
    }

    fn perimeter_unchecked(&self) -> f64 {
        match self {
            Shape::Ball { center, radius } => {
                unit_sphere_area(center.len()) * radius.powi(center.len() as i32 - 1)
            }
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let n = center.len() as i32;
                unit_sphere_area(center.len()) * (r_in.powi(n - 1) + r_out.powi(n - 1))
            }
            Shape::UnionOfBalls { balls } => balls
                .iter()
                .map(|b| {
                    unit_sphere_area(b.center.len()) * b.radius.powi(b.center.len() as i32 - 1)
                })
                .sum(),
            Shape::Box { half_widths, .. } => {
                let widths: Vec<f64> = half_widths.iter().map(|h| 2.0 * h).collect();
                (0..widths.len())
                    .map(|i| {
                        2.0 * widths
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, w)| w)
                            .product::<f64>()
                    })
                    .sum()
            }
            Shape::ConvexPolygon { vertices } => {
                polygon_edges(vertices).map(|(a, b)| distance(&a, &b)).sum()
            }
            Shape::NearlySpherical { .. } => {
                self.nearly_spherical_perimeter(SPHERE_QUADRATURE_THETA)
            }
        }
    }

    fn volume_unchecked(&self) -> f64 {
        match self {
            Shape::Ball { center, radius } => {
                unit_ball_volume(center.len()) * radius.powi(center.len() as i32)
            }
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let n = center.len() as i32;
                unit_ball_volume(center.len()) * (r_out.powi(n) - r_in.powi(n))
            }
            Shape::UnionOfBalls { balls } => balls
                .iter()
                .map(|b| unit_ball_volume(b.center.len()) * b.radius.powi(b.center.len() as i32))
                .sum(),
            Shape::Box { half_widths, .. } => half_widths.iter().map(|h| 2.0 * h).product(),
            Shape::ConvexPolygon { vertices } => polygon_area(vertices),
            Shape::NearlySpherical { .. } => self.nearly_spherical_volume(SPHERE_QUADRATURE_THETA),
        }
    }

    /// Radius `radius (1 + ε φ)` and its angular derivatives in direction `(θ, ϕ)`.
    /// Returns `None` for variants other than `NearlySpherical`.
    pub fn radial_profile(&self, theta: f64, phi: f64) -> Option<AngularSample> {
        match self {
            Shape::NearlySpherical {
                radius,
                epsilon,
                coefficients,
                ..
            } => {
                let s = harmonics::expansion(coefficients, theta, phi);
                Some(AngularSample {
                    value: radius * (1.0 + epsilon * s.value),
                    d_theta: radius * epsilon * s.d_theta,
                    d_phi: radius * epsilon * s.d_phi,
                })
            }
            _ => None,
        }
    }

    /// Area element `r sqrt(r² + |∇_S r|²)` of a radial graph, per unit solid angle.
    pub fn radial_area_element(&self, theta: f64, phi: f64) -> Option<f64> {
        self.radial_profile(theta, phi).map(|r| {
            let s = theta.sin();
            let grad2 = r.d_theta * r.d_theta + if s > 0.0 { (r.d_phi / s).powi(2) } else { 0.0 };
            r.value * (r.value * r.value + grad2).sqrt()
        })
    }

    /// Perimeter of a nearly spherical set with an explicit quadrature resolution.
    pub fn nearly_spherical_perimeter(&self, n_theta: usize) -> f64 {
        let q = SphereQuadrature::new(n_theta);
        q.integrate(|t, p| self.radial_area_element(t, p).unwrap_or(f64::NAN))
    }

    pub fn nearly_spherical_volume(&self, n_theta: usize) -> f64 {
        let q = SphereQuadrature::new(n_theta);
        q.integrate(|t, p| {
            self.radial_profile(t, p)
                .map_or(f64::NAN, |r| r.value.powi(3) / 3.0)
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Ball { center, radius } => distance(x, center) <= *radius,
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = distance(x, center);
                r >= *r_in && r <= *r_out
            }
            Shape::UnionOfBalls { balls } => {
                balls.iter().any(|b| distance(x, &b.center) <= b.radius)
            }
            Shape::Box {
                center,
                half_widths,
            } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .all(|((x, c), h)| (x - c).abs() <= *h),
            Shape::ConvexPolygon { vertices } => polygon_edges(vertices)
                .all(|(a, b)| (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) >= 0.0),
            Shape::NearlySpherical { center, .. } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r == 0.0 {
                    return true;
                }
                let theta = (d[2] / r).clamp(-1.0, 1.0).acos();
                let phi = d[1].atan2(d[0]);
                r <= self.radial_profile(theta, phi).map_or(0.0, |p| p.value)
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let around = |c: &[f64], r: f64| {
            (
                c.iter().map(|v| v - r).collect::<Vec<_>>(),
                c.iter().map(|v| v + r).collect::<Vec<_>>(),
            )
        };
        match self {
            Shape::Ball { center, radius } => around(center, *radius),
            Shape::Annulus { center, r_out, .. } => around(center, *r_out),
            Shape::UnionOfBalls { balls } => {
                let dim = balls[0].center.len();
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for b in balls {
                    let (l, h) = around(&b.center, b.radius);
                    for k in 0..dim {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
                (lo, hi)
            }
            Shape::Box {
                center,
                half_widths,
            } => (
                center.iter().zip(half_widths).map(|(c, h)| c - h).collect(),
                center.iter().zip(half_widths).map(|(c, h)| c + h).collect(),
            ),
            Shape::ConvexPolygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
            Shape::NearlySpherical { center, .. } => {
                let q = SphereQuadrature::new(SPHERE_QUADRATURE_THETA);
                let rmax = q
                    .nodes
                    .iter()
                    .filter_map(|&(t, p, _)| self.radial_profile(t, p))
                    .map(|s| s.value)
                    .fold(0.0, f64::max);
                around(center, rmax * 1.05)
            }
        }
    }

    /// A reference point used to align volume grids (center of symmetry where
    /// one exists, centroid for polygons).
    pub fn anchor(&self) -> Vec<f64> {
        match self {
            Shape::Ball { center, .. }
            | Shape::Annulus { center, .. }
            | Shape::Box { center, .. } => center.clone(),
            Shape::UnionOfBalls { balls } => balls[0].center.clone(),
            Shape::ConvexPolygon { vertices } => {
                let n = vertices.len() as f64;
                vec![
                    vertices.iter().map(|v| v[0]).sum::<f64>() / n,
                    vertices.iter().map(|v| v[1]).sum::<f64>() / n,
                ]
            }
            Shape::NearlySpherical { center, .. } => center.to_vec(),
        }
    }

    /// Dilation by `factor` about the shape's anchor point.
    pub fn dilate(&self, factor: f64) -> Result<Shape> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive, got {factor}"
            )));
        }
        let anchor = self.anchor();
        let scale_pt = |p: &[f64]| -> Vec<f64> {
            p.iter()
                .zip(&anchor)
                .map(|(x, a)| a + factor * (x - a))
                .collect()
        };
        let s = match self {
            Shape::Ball { center, radius } => Shape::Ball {
                center: center.clone(),
                radius: radius * factor,
            },
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => Shape::Annulus {
                center: center.clone(),
                r_in: r_in * factor,
                r_out: r_out * factor,
            },
            Shape::UnionOfBalls { balls } => Shape::UnionOfBalls {
                balls: balls
                    .iter()
                    .map(|b| BallSpec {
                        center: scale_pt(&b.center),
                        radius: b.radius * factor,
                    })
                    .collect(),
            },
            Shape::Box {
                center,
                half_widths,
            } => Shape::Box {
                center: center.clone(),
                half_widths: half_widths.iter().map(|h| h * factor).collect(),
            },
            Shape::ConvexPolygon { vertices } => Shape::ConvexPolygon {
                vertices: vertices
                    .iter()
                    .map(|v| {
                        let p = scale_pt(v);
                        [p[0], p[1]]
                    })
                    .collect(),
            },
            Shape::NearlySpherical {
                center,
                radius,
                epsilon,
                coefficients,
            } => Shape::NearlySpherical {
                center: *center,
                radius: radius * factor,
                epsilon: *epsilon,
                coefficients: coefficients.clone(),
            },
        };
        s.validate()?;
        Ok(s)
    }

    /// Uniform dilation to a prescribed volume.
    pub fn with_volume(&self, target: f64) -> Result<Shape> {
        let v = self.volume()?;
        self.dilate((target / v).powf(1.0 / self.dim() as f64))
    }

    pub fn translate(&self, t: &[f64]) -> Result<Shape> {
        if t.len() != self.dim() {
            return Err(Error::InvalidParameter(
                "translation has the wrong dimension".into(),
            ));
        }
        let mv = |p: &[f64]| -> Vec<f64> { p.iter().zip(t).map(|(a, b)| a + b).collect() };
        let s = match self {
            Shape::Ball { center, radius } => Shape::Ball {
                center: mv(center),
                radius: *radius,
            },
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => Shape::Annulus {
                center: mv(center),
                r_in: *r_in,
                r_out: *r_out,
            },
            Shape::UnionOfBalls { balls } => Shape::UnionOfBalls {
                balls: balls
                    .iter()
                    .map(|b| BallSpec {
                        center: mv(&b.center),
                        radius: b.radius,
                    })
                    .collect(),
            },
            Shape::Box {
                center,
                half_widths,
            } => Shape::Box {
                center: mv(center),
                half_widths: half_widths.clone(),
            },
            Shape::ConvexPolygon { vertices } => Shape::ConvexPolygon {
                vertices: vertices
                    .iter()
                    .map(|v| [v[0] + t[0], v[1] + t[1]])
                    .collect(),
            },
            Shape::NearlySpherical {
                center,
                radius,
                epsilon,
                coefficients,
            } => Shape::NearlySpherical {
                center: [center[0] + t[0], center[1] + t[1], center[2] + t[2]],
                radius: *radius,
                epsilon: *epsilon,
                coefficients: coefficients.clone(),
            },
        };
        Ok(s)
    }

    /// Shape name as used in the JSON tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Ball { .. } => "ball",
            Shape::Annulus { .. } => "annulus",
            Shape::UnionOfBalls { .. } => "union_of_balls",
            Shape::Box { .. } => "box",
            Shape::ConvexPolygon { .. } => "convex_polygon",
            Shape::NearlySpherical { .. } => "nearly_spherical",
        }
    }
}

pub(crate) fn polygon_edges(
    vertices: &[[f64; 2]],
) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    0.5 * polygon_edges(vertices)
        .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
        .sum::<f64>()
}
