//! Planar convex shapes of area `π` under the logarithmic kernel.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{discretize, Placement};
use crate::equilibrium::equilibrium_measure;
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::kernel::KernelParams;
use crate::operator::assemble_operator;

/// Convex polygon with `vertices` corners at uniformly random angles on the
/// unit circle (minimum angular gap `π / (4 vertices)`), scaled to area `π`.
pub fn random_convex_polygon<R: Rng>(rng: &mut R, vertices: usize) -> Result<Shape> {
    if vertices < 3 {
        return Err(Error::InvalidParameter(
            "a polygon needs at least 3 vertices".into(),
        ));
    }
    let min_gap = PI / (4.0 * vertices as f64);
    loop {
        let mut angles: Vec<f64> = (0..vertices)
            .map(|_| rng.gen_range(0.0..2.0 * PI))
            .collect();
        angles.sort_by(f64::total_cmp);
        let gaps_ok = (0..vertices).all(|k| {
            let next = if k + 1 < vertices {
                angles[k + 1]
            } else {
                angles[0] + 2.0 * PI
            };
            next - angles[k] > min_gap && next - angles[k] < PI
        });
        if gaps_ok {
            let pts = angles.iter().map(|a| [a.cos(), a.sin()]).collect();
            return Shape::convex_polygon(pts)?.with_volume(PI);
        }
    }
}

/// The unit disk, regular `m`-gons and random convex polygons, all of area `π`.
pub fn polygon_family(regular: &[usize], random: usize, seed: u64) -> Result<Vec<(String, Shape)>> {
    let mut out = vec![("disk".to_string(), Shape::unit_ball(2))];
    for &m in regular {
        out.push((format!("regular-{m}"), Shape::regular_polygon(m, PI)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..random {
        let vertices = rng.gen_range(5..=12);
        out.push((
            format!("random-{k}"),
            random_convex_polygon(&mut rng, vertices)?,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexScan {
    pub labels: Vec<String>,
    pub charges: Vec<f64>,
    pub perimeters: Vec<f64>,
    /// Logarithmic energy `𝓘₂` per shape.
    pub interaction: Vec<f64>,
    /// `Per + Q² 𝓘₂`, indexed `[charge][shape]`.
    pub energy_table: Vec<Vec<f64>>,
    /// Shape indices by increasing energy, per charge.
    pub rankings: Vec<Vec<usize>>,
    /// Whether the disk (if present) is strictly lowest at the smallest positive charge.
    pub disk_lowest_at_min_charge: Option<bool>,
}

/// Ranks planar convex shapes of area `π` by `Per + Q² 𝓘₂` (`N = α = 2`).
pub fn convex_scan_2d(
    charges: &[f64],
    family: &[(String, Shape)],
    m: usize,
    tol: f64,
) -> Result<ConvexScan> {
    if charges.is_empty() || family.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one charge and one shape".into(),
        ));
    }
    for (label, shape) in family {
        match shape {
            Shape::Ball { center, .. } if center.len() == 2 => {}
            Shape::ConvexPolygon { .. } => {}
            _ => {
                return Err(Error::InvalidShape(format!(
                    "{label}: expected a disk or a convex polygon"
                )))
            }
        }
        let area = shape.volume()?;
        if (area - PI).abs() > 1e-9 {
            return Err(Error::InvalidShape(format!(
                "{label}: area {area} differs from π"
            )));
        }
    }
    let params = KernelParams::coulomb(2)?;
    let solved: Vec<(f64, f64)> = family
        .par_iter()
        .map(|(_, shape)| {
            let op = assemble_operator(discretize(shape, m, Placement::Boundary)?, params)?;
            Ok((shape.perimeter()?, equilibrium_measure(&op, tol)?.energy))
        })
        .collect::<Result<_>>()?;
    let perimeters: Vec<f64> = solved.iter().map(|s| s.0).collect();
    let interaction: Vec<f64> = solved.iter().map(|s| s.1).collect();
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
    let rankings: Vec<Vec<usize>> = energy_table
        .iter()
        .map(|row| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let disk = family
        .iter()
        .position(|(_, s)| matches!(s, Shape::Ball { .. }));
    // smallest positive charge; at Q = 0 the ranking is by perimeter alone
    let qmin = (0..charges.len())
        .filter(|&k| charges[k] > 0.0)
        .min_by(|&a, &b| charges[a].total_cmp(&charges[b]))
        .unwrap_or(0);
    let disk_lowest_at_min_charge = disk.map(|d| {
        let row = &energy_table[qmin];
        (0..row.len()).filter(|&k| k != d).all(|k| row[d] < row[k])
    });
    Ok(ConvexScan {
        labels: family.iter().map(|(l, _)| l.clone()).collect(),
        charges: charges.to_vec(),
        perimeters,
        interaction,
        energy_table,
        rankings,
        disk_lowest_at_min_charge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_polygons_are_convex_with_area_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for v in [3, 6, 12] {
            let s = random_convex_polygon(&mut rng, v).unwrap();
            assert!((s.volume().unwrap() - PI).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_wins_at_small_charge_and_perimeter_orders_zero_charge() {
        let family = polygon_family(&[4, 6, 12], 3, 5).unwrap();
        let scan = convex_scan_2d(&[0.0, 0.5], &family, 240, 1e-10).unwrap();
        assert_eq!(scan.disk_lowest_at_min_charge, Some(true));
        let mut by_perimeter: Vec<usize> = (0..family.len()).collect();
        by_perimeter.sort_by(|&a, &b| scan.perimeters[a].total_cmp(&scan.perimeters[b]));
        assert_eq!(scan.rankings[0], by_perimeter);
        let regular: Vec<f64> = (1..4).map(|k| scan.energy_table[1][k]).collect();
        assert!(regular[0] > regular[1] && regular[1] > regular[2]);
    }

    #[test]
    fn non_polygon_rejected() {
        let family = vec![(
            "box".to_string(),
            Shape::cuboid(vec![0.0, 0.0], vec![1.0, PI / 4.0]).unwrap(),
        )];
        assert!(convex_scan_2d(&[0.0], &family, 100, 1e-10).is_err());
    }
}
