//! Dense kernel matrices over node clouds.

use std::io::Write;
use std::sync::Arc;

use faer::{Mat, MatRef};
use rayon::prelude::*;

use crate::cloud::{NodeCloud, Placement};
use crate::error::{Error, Result};
use crate::kernel::{distance, KernelParams, PatchSelfEnergy};

/// Symmetric matrix `K_ij = k(x_i, x_j)` for `i != j`, with the diagonal
/// replaced by the self-energy of a uniformly charged patch of the node's
/// weight (disk or segment on boundaries, equal-volume ball in volumes).
///
/// For masses `w`, `wᵀ K w` approximates `I_α(μ)` of the measure
/// `μ = Σ w_i δ_{x_i}` smeared over the node patches.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    params: KernelParams,
    cloud: Arc<NodeCloud>,
    n: usize,
    // column-major (and symmetric)
    data: Vec<f64>,
}

/// Diagonal entry for node `i` of `cloud`.
pub fn self_energy(patch: &PatchSelfEnergy, cloud: &NodeCloud, i: usize) -> Result<f64> {
    match cloud.placement() {
        Placement::Boundary => patch.boundary(cloud.weight(i)),
        Placement::Volume => patch.volume(cloud.weight(i)),
    }
}

pub fn assemble_operator(
    cloud: impl Into<Arc<NodeCloud>>,
    params: KernelParams,
) -> Result<KernelOperator> {
    let cloud: Arc<NodeCloud> = cloud.into();
    if cloud.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot assemble an operator on an empty cloud".into(),
        ));
    }
    if cloud.dim() != params.dim() {
        return Err(Error::InvalidParameter(format!(
            "cloud dimension {} does not match kernel dimension {}",
            cloud.dim(),
            params.dim()
        )));
    }
    let n = cloud.len();
    let patch = PatchSelfEnergy::new(params);
    let diag: Vec<f64> = (0..n)
        .map(|i| self_energy(&patch, &cloud, i))
        .collect::<Result<_>>()?;

    let mut data = vec![0.0; n * n];
    let coincident = data
        .par_chunks_mut(n)
        .enumerate()
        .map(|(j, col)| {
            let xj = cloud.position(j);
            let mut clash = false;
            for (i, entry) in col.iter_mut().enumerate() {
                *entry = if i == j {
                    diag[j]
                } else {
                    let r = distance(cloud.position(i), xj);
                    clash |= r == 0.0;
                    params.at_distance(r)
                };
            }
            clash
        })
        .reduce(|| false, |a, b| a || b);
    if coincident {
        return Err(Error::Domain("node cloud contains coincident nodes".into()));
    }
    Ok(KernelOperator {
        params,
        cloud,
        n,
        data,
    })
}

impl KernelOperator {
    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn cloud(&self) -> &Arc<NodeCloud> {
        &self.cloud
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.data, self.n, self.n)
    }

    /// `K w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n, "vector length must match the operator");
        // K is symmetric, so row i is column i.
        self.data
            .par_chunks(self.n)
            .map(|col| col.iter().zip(w).map(|(k, x)| k * x).sum())
            .collect()
    }

    /// `uᵀ K w`.
    pub fn bilinear(&self, u: &[f64], w: &[f64]) -> f64 {
        self.apply(w).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// `wᵀ K w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        self.bilinear(w, w)
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Mat<f64> {
        Mat::from_fn(idx.len(), idx.len(), |i, j| self.entry(idx[i], idx[j]))
    }

    /// Writes the matrix as CSV, one row per line, no header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for i in 0..self.n {
            w.write_record((0..self.n).map(|j| format!("{:e}", self.entry(i, j))))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σ_i Σ_j a_i b_j k(x_i, y_j)` between two disjoint clouds.
pub fn cross_interaction(
    params: &KernelParams,
    a: &NodeCloud,
    wa: &[f64],
    b: &NodeCloud,
    wb: &[f64],
) -> Result<f64> {
    if wa.len() != a.len() || wb.len() != b.len() {
        return Err(Error::InvalidParameter(
            "weight vectors must match their clouds".into(),
        ));
    }
    let partial: Vec<Option<f64>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let xi = a.position(i);
            let mut s = 0.0;
            for (j, w) in wb.iter().enumerate() {
                let r = distance(xi, b.position(j));
                if r == 0.0 {
                    return None;
                }
                s += w * params.at_distance(r);
            }
            Some(wa[i] * s)
        })
        .collect();
    partial
        .into_iter()
        .sum::<Option<f64>>()
        .ok_or_else(|| Error::Domain("clouds share a node".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::discretize;
    use crate::geometry::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn operator_is_symmetric() {
        let cloud = discretize(
            &Shape::regular_polygon(5, 2.0).unwrap(),
            80,
            Placement::Boundary,
        )
        .unwrap();
        let op = assemble_operator(cloud, KernelParams::coulomb(2).unwrap()).unwrap();
        for i in 0..op.len() {
            for j in 0..op.len() {
                assert_eq!(op.entry(i, j), op.entry(j, i));
            }
        }
    }

    #[test]
    fn uniform_sphere_energy_tends_to_one() {
        let params = KernelParams::coulomb(3).unwrap();
        let mut prev = f64::INFINITY;
        for m in [500, 2000] {
            let op = assemble_operator(
                discretize(&Shape::unit_ball(3), m, Placement::Boundary).unwrap(),
                params,
            )
            .unwrap();
            let e = op.quadratic_form(&uniform(m));
            let err = (e - 1.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 0.01, "{prev}");
    }

    #[test]
    fn uniform_circle_energy_is_minus_log_radius() {
        let params = KernelParams::coulomb(2).unwrap();
        for r in [0.5, 1.0, 2.0] {
            let m = 400;
            let shape = Shape::ball(vec![0.0, 0.0], r).unwrap();
            let op = assemble_operator(discretize(&shape, m, Placement::Boundary).unwrap(), params)
                .unwrap();
            let e = op.quadratic_form(&uniform(m));
            // exact discrete value: -log r + (3/2 - log 2π) / m
            let exact = -r.ln() + (1.5 - (2.0 * std::f64::consts::PI).ln()) / m as f64;
            assert!((e - exact).abs() < 1e-10, "{e} {exact}");
        }
    }

    #[test]
    fn zero_sum_vectors_have_positive_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (shape, params, placement) in [
            (
                Shape::unit_ball(3),
                KernelParams::coulomb(3).unwrap(),
                Placement::Boundary,
            ),
            (
                Shape::unit_ball(2),
                KernelParams::coulomb(2).unwrap(),
                Placement::Boundary,
            ),
            (
                Shape::unit_ball(3),
                KernelParams::new(3, 1.5).unwrap(),
                Placement::Volume,
            ),
        ] {
            let op =
                assemble_operator(discretize(&shape, 300, placement).unwrap(), params).unwrap();
            let n = op.len();
            for _ in 0..1000 {
                let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mean = w.iter().sum::<f64>() / n as f64;
                w.iter_mut().for_each(|v| *v -= mean);
                assert!(op.quadratic_form(&w) > 0.0);
            }
        }
    }

    #[test]
    fn unsupported_configuration() {
        let cloud = discretize(&Shape::unit_ball(3), 100, Placement::Boundary).unwrap();
        let err = assemble_operator(cloud, KernelParams::new(3, 0.5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn coincident_nodes_rejected() {
        let shape = Shape::unit_ball(2);
        let cloud = NodeCloud::from_parts(
            shape,
            Placement::Boundary,
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.1, 0.1],
            vec![0, 0],
        )
        .unwrap();
        assert!(matches!(
            assemble_operator(cloud, KernelParams::coulomb(2).unwrap()),
            Err(Error::Domain(_))
        ));
    }
}
