//! Real orthonormal spherical harmonics on the unit sphere of `R^3`, and a
//! tensor-product quadrature rule for integrating over it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::quadrature::gauss_legendre;

/// One entry `a_{lm}` of a real spherical-harmonic expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficient {
    pub l: usize,
    pub m: i64,
    pub value: f64,
}

impl HarmonicCoefficient {
    pub fn new(l: usize, m: i64, value: f64) -> Self {
        Self { l, m, value }
    }
}

/// Value and angular derivatives of a function on the sphere at `(θ, ϕ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularSample {
    pub value: f64,
    pub d_theta: f64,
    pub d_phi: f64,
}

/// Associated Legendre functions `P_l^m(cos θ)` (no Condon–Shortley phase)
/// and their θ-derivatives, for a fixed `m` and `l = m..=lmax`.
fn legendre_column(m: usize, lmax: usize, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let x = theta.cos();
    let s = theta.sin();
    let mut p = vec![0.0; lmax + 1];
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if m <= lmax {
        p[m] = pmm;
    }
    if m < lmax {
        p[m + 1] = x * (2 * m + 1) as f64 * pmm;
    }
    for l in (m + 2)..=lmax {
        p[l] = ((2 * l - 1) as f64 * x * p[l - 1] - (l + m - 1) as f64 * p[l - 2]) / (l - m) as f64;
    }
    // dP/dθ = (l x P_l^m - (l+m) P_{l-1}^m) / sin θ
    let mut dp = vec![0.0; lmax + 1];
    for l in m..=lmax {
        let prev = if l > m { p[l - 1] } else { 0.0 };
        dp[l] = if s.abs() > 1e-300 {
            (l as f64 * x * p[l] - (l + m) as f64 * prev) / s
        } else {
            0.0
        };
    }
    (p, dp)
}

fn normalization(l: usize, m: usize) -> f64 {
    // sqrt((2l+1)/(4π) · (l-m)!/(l+m)!) without forming factorials
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

/// Real spherical harmonic `Y_lm(θ, ϕ)` with its angular derivatives.
pub fn real_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> AngularSample {
    let am = m.unsigned_abs() as usize;
    assert!(am <= l, "|m| must not exceed l");
    let (p, dp) = legendre_column(am, l, theta);
    let n = normalization(l, am);
    if m == 0 {
        AngularSample {
            value: n * p[l],
            d_theta: n * dp[l],
            d_phi: 0.0,
        }
    } else {
        let c = std::f64::consts::SQRT_2 * n;
        let mf = am as f64;
        let (trig, dtrig) = if m > 0 {
            ((mf * phi).cos(), -mf * (mf * phi).sin())
        } else {
            ((mf * phi).sin(), mf * (mf * phi).cos())
        };
        AngularSample {
            value: c * p[l] * trig,
            d_theta: c * dp[l] * trig,
            d_phi: c * p[l] * dtrig,
        }
    }
}

/// Evaluates `Σ a_lm Y_lm` and its derivatives.
pub fn expansion(coefficients: &[HarmonicCoefficient], theta: f64, phi: f64) -> AngularSample {
    coefficients.iter().fold(
        AngularSample {
            value: 0.0,
            d_theta: 0.0,
            d_phi: 0.0,
        },
        |acc, c| {
            let y = real_harmonic(c.l, c.m, theta, phi);
            AngularSample {
                value: acc.value + c.value * y.value,
                d_theta: acc.d_theta + c.value * y.d_theta,
                d_phi: acc.d_phi + c.value * y.d_phi,
            }
        },
    )
}

/// Gauss–Legendre in `cos θ` times the periodic trapezoid rule in `ϕ`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    /// `(θ, ϕ, weight)` triples; weights sum to `4π`.
    pub nodes: Vec<(f64, f64, f64)>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize) -> Self {
        let n_phi = 2 * n_theta;
        let (x, w) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let theta = xi.acos();
            for j in 0..n_phi {
                nodes.push((theta, j as f64 * dphi, wi * dphi));
            }
        }
        Self { nodes }
    }

    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|&(t, p, w)| w * f(t, p)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonics_are_orthonormal() {
        let q = SphereQuadrature::new(24);
        let modes = [(0, 0), (1, -1), (1, 0), (2, 1), (3, -2), (4, 4)];
        for &(l1, m1) in &modes {
            for &(l2, m2) in &modes {
                let g = q.integrate(|t, p| {
                    real_harmonic(l1, m1, t, p).value * real_harmonic(l2, m2, t, p).value
                });
                let expect = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12, "({l1},{m1})·({l2},{m2}) = {g}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for &(l, m) in &[(2usize, 0i64), (3, 2), (4, -3), (5, 1)] {
            let (t, p) = (0.7, 1.3);
            let y = real_harmonic(l, m, t, p);
            let dt = (real_harmonic(l, m, t + h, p).value - real_harmonic(l, m, t - h, p).value)
                / (2.0 * h);
            let dp = (real_harmonic(l, m, t, p + h).value - real_harmonic(l, m, t, p - h).value)
                / (2.0 * h);
            assert!((y.d_theta - dt).abs() < 1e-7);
            assert!((y.d_phi - dp).abs() < 1e-7);
        }
    }

    #[test]
    fn dirichlet_energy_is_l_times_l_plus_one() {
        let q = SphereQuadrature::new(24);
        let (l, m) = (3usize, 1i64);
        let e = q.integrate(|t, p| {
            let y = real_harmonic(l, m, t, p);
            y.d_theta * y.d_theta + (y.d_phi / t.sin()).powi(2)
        });
        assert!((e - 12.0).abs() < 1e-10);
    }
}
