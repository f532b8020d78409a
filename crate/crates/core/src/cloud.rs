//! Quadrature node clouds on shape boundaries and interiors.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polygon_edges, Shape};
use crate::kernel::distance;

/// Smallest resolution accepted by [`discretize`], and the minimum node count
/// for each connected component of a boundary cloud.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Boundary,
    Volume,
}

/// Weighted nodes discretizing a measure on a shape. Weights are areas
/// (boundary) or volumes (volume) of the patch each node represents.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCloud {
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
    components: Vec<usize>,
    placement: Placement,
    shape: Shape,
    resolution: usize,
}

impl NodeCloud {
    /// Builds a cloud from raw parts. `positions` is flat, `dim` entries per node.
    pub fn from_parts(
        shape: Shape,
        placement: Placement,
        positions: Vec<f64>,
        weights: Vec<f64>,
        components: Vec<usize>,
    ) -> Result<Self> {
        let dim = shape.dim();
        let n = weights.len();
        if n == 0 || positions.len() != n * dim || components.len() != n {
            return Err(Error::InvalidParameter(
                "inconsistent node cloud parts".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(
                "node weights must be positive".into(),
            ));
        }
        Ok(Self {
            dim,
            positions,
            weights,
            components,
            placement,
            shape,
            resolution: n,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Connected component of node `i` (inner/outer sphere of an annulus,
    /// ball index of a union, face index of a box boundary).
    pub fn component(&self, i: usize) -> usize {
        self.components[i]
    }

    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Requested resolution `M` (node counts of volume clouds are approximate).
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// The same cloud rigidly translated by `t`.
    pub fn translated(&self, t: &[f64]) -> Result<NodeCloud> {
        let shape = self.shape.translate(t)?;
        let positions = self
            .positions
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(t).map(|(a, b)| a + b))
            .collect();
        Ok(NodeCloud {
            positions,
            shape,
            ..self.clone()
        })
    }

    /// Writes `index,component,weight,x0,x1,...` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string(), "component".into(), "weight".into()];
        header.extend((0..self.dim).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                i.to_string(),
                self.components[i].to_string(),
                format!("{:e}", self.weights[i]),
            ];
            row.extend(self.position(i).iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fibonacci lattice directions on the unit sphere `S^2`, as `(θ, ϕ)`.
///
/// The spiral index is centered and phase-shifted so the lattice is
/// invariant under the half-turn `(x, y, z) ↦ (-x, y, -z)`.
pub fn fibonacci_directions(m: usize) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mid = (m as f64 - 1.0) / 2.0;
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let phi = golden * (i as f64 - mid) + FRAC_PI_2;
            (z.acos(), phi.rem_euclid(2.0 * PI))
        })
        .collect()
}

fn sphere_nodes(
    center: &[f64],
    radius: f64,
    m: usize,
    out: &mut Vec<f64>,
    weights: &mut Vec<f64>,
) -> Result<()> {
    match center.len() {
        2 => {
            let w = 2.0 * PI * radius / m as f64;
            for k in 0..m {
                let t = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                out.extend_from_slice(&[
                    center[0] + radius * t.cos(),
                    center[1] + radius * t.sin(),
                ]);
                weights.push(w);
            }
        }
        3 => {
            let w = 4.0 * PI * radius * radius / m as f64;
            for (theta, phi) in fibonacci_directions(m) {
                let (st, ct) = theta.sin_cos();
                out.extend_from_slice(&[
                    center[0] + radius * st * phi.cos(),
                    center[1] + radius * st * phi.sin(),
                    center[2] + radius * ct,
                ]);
                weights.push(w);
            }
        }
        d => {
            return Err(Error::Unsupported(format!(
                "boundary placement on spheres in dimension {d}"
            )));
        }
    }
    Ok(())
}

/// Splits `total` into integer parts proportional to `shares` (largest remainder).
fn apportion(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| total as f64 * s / sum).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let assigned: usize = parts.iter().sum();
    for &k in order.iter().take(total - assigned) {
        parts[k] += 1;
    }
    parts
}

/// Discretizes `shape` into roughly `m` nodes.
///
/// Boundary clouds use Fibonacci lattices on spheres, equal arc-length
/// subdivision on planar curves and per-face grids on boxes. Volume clouds
/// keep the cells of a uniform Cartesian grid (aligned with the shape's
/// anchor point) whose centers lie in the shape.
pub fn discretize(shape: &Shape, m: usize, placement: Placement) -> Result<NodeCloud> {
    shape.validate()?;
    if m < MIN_NODES {
        return Err(Error::Resolution(format!(
            "resolution must be at least {MIN_NODES}, got {m}"
        )));
    }
    let mut cloud = match placement {
        Placement::Boundary => boundary_cloud(shape, m)?,
        Placement::Volume => volume_cloud(shape, m)?,
    };
    cloud.resolution = m;
    Ok(cloud)
}

fn boundary_cloud(shape: &Shape, m: usize) -> Result<NodeCloud> {
    let dim = shape.dim();
    let mut pos = Vec::with_capacity(m * dim);
    let mut wts = Vec::with_capacity(m);
    let mut comp = Vec::with_capacity(m);
    let check_component = |count: usize, what: &str| -> Result<()> {
        if count < MIN_NODES {
            Err(Error::Resolution(format!(
                "{what} would receive {count} nodes (< {MIN_NODES}); increase the resolution"
            )))
        } else {
            Ok(())
        }
    };
    match shape {
        Shape::Ball { center, radius } => {
            sphere_nodes(center, *radius, m, &mut pos, &mut wts)?;
            comp.resize(m, 0);
        }
        Shape::Annulus {
            center,
            r_in,
            r_out,
        } => {
            let k = dim as i32 - 1;
            let parts = apportion(m, &[r_in.powi(k), r_out.powi(k)]);
            check_component(parts[0], "inner sphere of the annulus")?;
            sphere_nodes(center, *r_in, parts[0], &mut pos, &mut wts)?;
            sphere_nodes(center, *r_out, parts[1], &mut pos, &mut wts)?;
            comp.extend(std::iter::repeat_n(0, parts[0]));
            comp.extend(std::iter::repeat_n(1, parts[1]));
        }
        Shape::UnionOfBalls { balls } => {
            let shares: Vec<f64> = balls
                .iter()
                .map(|b| b.radius.powi(dim as i32 - 1))
                .collect();
            let parts = apportion(m, &shares);
            for (i, (b, &count)) in balls.iter().zip(&parts).enumerate() {
                check_component(count, &format!("ball {i} of the union"))?;
                sphere_nodes(&b.center, b.radius, count, &mut pos, &mut wts)?;
                comp.extend(std::iter::repeat_n(i, count));
            }
        }
        Shape::Box {
            center,
            half_widths,
        } => {
            box_boundary(center, half_widths, m, &mut pos, &mut wts, &mut comp)?;
        }
        Shape::ConvexPolygon { vertices } => {
            if m < vertices.len() {
                return Err(Error::Resolution(format!(
                    "{m} nodes cannot cover {} polygon edges",
                    vertices.len()
                )));
            }
            let lengths: Vec<f64> = polygon_edges(vertices)
                .map(|(a, b)| distance(&a, &b))
                .collect();
            let parts = apportion(m - vertices.len(), &lengths);
            for (e, ((a, b), &extra)) in polygon_edges(vertices).zip(&parts).enumerate() {
                let count = extra + 1;
                let len = lengths[e] / count as f64;
                for k in 0..count {
                    let t = (k as f64 + 0.5) / count as f64;
                    pos.extend_from_slice(&[a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    wts.push(len);
                    comp.push(e);
                }
            }
        }
        Shape::NearlySpherical { center, .. } => {
            let dw = 4.0 * PI / m as f64;
            for (theta, phi) in fibonacci_directions(m) {
                let r = shape
                    .radial_profile(theta, phi)
                    .expect("nearly spherical")
                    .value;
                let (st, ct) = theta.sin_cos();
                pos.extend_from_slice(&[
                    center[0] + r * st * phi.cos(),
                    center[1] + r * st * phi.sin(),
                    center[2] + r * ct,
                ]);
                wts.push(
                    dw * shape
                        .radial_area_element(theta, phi)
                        .expect("nearly spherical"),
                );
                comp.push(0);
            }
        }
    }
    NodeCloud::from_parts(shape.clone(), Placement::Boundary, pos, wts, comp)
}

fn box_boundary(
    center: &[f64],
    half: &[f64],
    m: usize,
    pos: &mut Vec<f64>,
    wts: &mut Vec<f64>,
    comp: &mut Vec<usize>,
) -> Result<()> {
    let dim = center.len();
    match dim {
        2 => {
            let (hx, hy) = (half[0], half[1]);
            let corners = [
                [center[0] - hx, center[1] - hy],
                [center[0] + hx, center[1] - hy],
                [center[0] + hx, center[1] + hy],
                [center[0] - hx, center[1] + hy],
            ];
            let lengths = [2.0 * hx, 2.0 * hy, 2.0 * hx, 2.0 * hy];
            let parts = apportion(m - 4, &lengths);
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                let count = parts[e] + 1;
                for k in 0..count {
                    let t = (k as f64 + 0.5) / count as f64;
                    pos.extend_from_slice(&[a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    wts.push(lengths[e] / count as f64);
                    comp.push(e);
                }
            }
        }
        3 => {
            let area = 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2]);
            let h = (area / m as f64).sqrt();
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let nu = ((2.0 * half[u] / h).round() as usize).max(1);
                let nv = ((2.0 * half[v] / h).round() as usize).max(1);
                let (du, dv) = (2.0 * half[u] / nu as f64, 2.0 * half[v] / nv as f64);
                for (side, sign) in [-1.0f64, 1.0].into_iter().enumerate() {
                    for i in 0..nu {
                        for j in 0..nv {
                            let mut p = center.to_vec();
                            p[axis] += sign * half[axis];
                            p[u] += -half[u] + (i as f64 + 0.5) * du;
                            p[v] += -half[v] + (j as f64 + 0.5) * dv;
                            pos.extend_from_slice(&p);
                            wts.push(du * dv);
                            comp.push(2 * axis + side);
                        }
                    }
                }
            }
        }
        d => {
            return Err(Error::Unsupported(format!(
                "box boundary placement in dimension {d}"
            )))
        }
    }
    Ok(())
}

fn volume_cloud(shape: &Shape, m: usize) -> Result<NodeCloud> {
    let dim = shape.dim();
    if !(2..=3).contains(&dim) {
        return Err(Error::Unsupported(format!(
            "volume placement in dimension {dim}"
        )));
    }
    let mut pos = Vec::new();
    let mut wts = Vec::new();
    let mut comp = Vec::new();
    match shape {
        Shape::Box {
            center,
            half_widths,
        } => {
            // Exact tiling by near-cubic cells.
            let vol: f64 = half_widths.iter().map(|h| 2.0 * h).product();
            let h = (vol / m as f64).powf(1.0 / dim as f64);
            let counts: Vec<usize> = half_widths
                .iter()
                .map(|w| ((2.0 * w / h).round() as usize).max(1))
                .collect();
            let steps: Vec<f64> = half_widths
                .iter()
                .zip(&counts)
                .map(|(w, &n)| 2.0 * w / n as f64)
                .collect();
            let cell: f64 = steps.iter().product();
            for idx in GridIter::new(&counts) {
                for k in 0..dim {
                    pos.push(center[k] - half_widths[k] + (idx[k] as f64 + 0.5) * steps[k]);
                }
                wts.push(cell);
                comp.push(0);
            }
        }
        Shape::UnionOfBalls { balls } => {
            let total = shape.volume()?;
            for (i, b) in balls.iter().enumerate() {
                let ball = Shape::Ball {
                    center: b.center.clone(),
                    radius: b.radius,
                };
                let share = ((m as f64) * ball.volume()? / total).round() as usize;
                let before = wts.len();
                grid_fill(&ball, share.max(1), &mut pos, &mut wts)?;
                let count = wts.len() - before;
                if count < MIN_NODES {
                    return Err(Error::Resolution(format!(
                        "ball {i} of the union would receive {count} volume cells (< {MIN_NODES})"
                    )));
                }
                comp.extend(std::iter::repeat_n(i, count));
            }
        }
        _ => {
            let h = grid_fill(shape, m, &mut pos, &mut wts)?;
            if let Shape::Annulus { r_in, r_out, .. } = shape {
                if h > 0.5 * (r_out - r_in) {
                    return Err(Error::Resolution(format!(
                        "grid spacing {h:.3} does not resolve the annulus shell of width {:.3}",
                        r_out - r_in
                    )));
                }
            }
            comp.resize(wts.len(), 0);
        }
    }
    if wts.len() < MIN_NODES {
        return Err(Error::Resolution(format!(
            "only {} volume cells fall inside the shape",
            wts.len()
        )));
    }
    NodeCloud::from_parts(shape.clone(), Placement::Volume, pos, wts, comp)
}

/// Adds the cells of a grid with spacing `(|Ω|/m)^{1/N}` whose centers lie in
/// `shape`. Cell centers sit at `anchor + k h`, so the grid inherits the
/// shape's reflection symmetries about the anchor. Returns the spacing.
fn grid_fill(shape: &Shape, m: usize, pos: &mut Vec<f64>, wts: &mut Vec<f64>) -> Result<f64> {
    let dim = shape.dim();
    let h = (shape.volume()? / m as f64).powf(1.0 / dim as f64);
    let anchor = shape.anchor();
    let (lo, hi) = shape.bounding_box();
    let first: Vec<i64> = (0..dim)
        .map(|k| ((lo[k] - anchor[k]) / h).floor() as i64)
        .collect();
    let last: Vec<i64> = (0..dim)
        .map(|k| ((hi[k] - anchor[k]) / h).ceil() as i64)
        .collect();
    let counts: Vec<usize> = (0..dim)
        .map(|k| (last[k] - first[k] + 1) as usize)
        .collect();
    let cell = h.powi(dim as i32);
    let mut p = vec![0.0; dim];
    for idx in GridIter::new(&counts) {
        for k in 0..dim {
            p[k] = anchor[k] + (first[k] + idx[k] as i64) as f64 * h;
        }
        if shape.contains(&p) {
            pos.extend_from_slice(&p);
            wts.push(cell);
        }
    }
    Ok(h)
}

/// Row-major multi-index iterator over `0..counts[0] × 0..counts[1] × ...`.
struct GridIter {
    counts: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl GridIter {
    fn new(counts: &[usize]) -> Self {
        let current = if counts.iter().all(|&c| c > 0) {
            Some(vec![0; counts.len()])
        } else {
            None
        };
        Self {
            counts: counts.to_vec(),
            current,
        }
    }
}

impl Iterator for GridIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().expect("checked above");
        let mut k = cur.len();
        loop {
            if k == 0 {
                self.current = None;
                break;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < self.counts[k] {
                break;
            }
            cur[k] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BallSpec;
    use crate::harmonics::HarmonicCoefficient;
    use crate::kernel::unit_ball_volume;

    #[test]
    fn ball_boundary_weights() {
        let c = discretize(&Shape::unit_ball(3), 1000, Placement::Boundary).unwrap();
        assert_eq!(c.len(), 1000);
        assert!((c.total_weight() / (4.0 * PI) - 1.0).abs() < 5e-3);
        for p in c.positions() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn annulus_boundary_splits_by_area() {
        let a = Shape::annulus(vec![0.0; 3], 0.5, 1.0).unwrap();
        let c = discretize(&a, 2000, Placement::Boundary).unwrap();
        let inner: f64 = (0..c.len())
            .filter(|&i| c.component(i) == 0)
            .map(|i| c.weight(i))
            .sum();
        let outer: f64 = (0..c.len())
            .filter(|&i| c.component(i) == 1)
            .map(|i| c.weight(i))
            .sum();
        assert!((inner / (PI * 4.0 * 0.25) - 1.0).abs() < 1e-2);
        assert!((outer / (4.0 * PI) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn thin_inner_sphere_is_refused() {
        let a = Shape::annulus(vec![0.0; 3], 0.05, 1.0).unwrap();
        assert!(matches!(
            discretize(&a, 200, Placement::Boundary),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            discretize(&Shape::unit_ball(3), 8, Placement::Boundary),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn polygon_arc_length_is_exact() {
        let sq = Shape::regular_polygon(4, PI).unwrap();
        let c = discretize(&sq, 101, Placement::Boundary).unwrap();
        assert_eq!(c.len(), 101);
        assert!((c.total_weight() - sq.perimeter().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn box_boundary_and_volume() {
        let b = Shape::cuboid(vec![0.0; 3], vec![1.0, 0.5, 0.25]).unwrap();
        let c = discretize(&b, 600, Placement::Boundary).unwrap();
        assert!((c.total_weight() - b.perimeter().unwrap()).abs() < 1e-12);
        let v = discretize(&b, 600, Placement::Volume).unwrap();
        assert!((v.total_weight() - b.volume().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn volume_grid_converges() {
        let ball = Shape::unit_ball(3);
        let exact = unit_ball_volume(3);
        let e1 = (discretize(&ball, 500, Placement::Volume)
            .unwrap()
            .total_weight()
            - exact)
            .abs();
        let e2 = (discretize(&ball, 8000, Placement::Volume)
            .unwrap()
            .total_weight()
            - exact)
            .abs();
        assert!(e2 < e1, "{e1} {e2}");
        let c = discretize(&ball, 2000, Placement::Volume).unwrap();
        // the anchor cell sits at the center
        assert!(c.positions().any(|p| p.iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn nearly_spherical_boundary_converges_to_perimeter() {
        let s = Shape::nearly_spherical(
            0.15,
            vec![
                HarmonicCoefficient::new(2, 0, 1.0),
                HarmonicCoefficient::new(3, 1, 0.7),
            ],
        )
        .unwrap();
        let per = s.perimeter().unwrap();
        let e1 = (discretize(&s, 250, Placement::Boundary)
            .unwrap()
            .total_weight()
            - per)
            .abs();
        let e2 = (discretize(&s, 1000, Placement::Boundary)
            .unwrap()
            .total_weight()
            - per)
            .abs();
        assert!(e2 <= 0.5 * e1, "{e1} {e2}");
    }

    #[test]
    fn union_components() {
        let u = Shape::union_of_balls(vec![
            BallSpec {
                center: vec![-2.0, 0.0, 0.0],
                radius: 1.0,
            },
            BallSpec {
                center: vec![2.0, 0.0, 0.0],
                radius: 1.0,
            },
        ])
        .unwrap();
        let c = discretize(&u, 400, Placement::Boundary).unwrap();
        assert_eq!(c.components().iter().filter(|&&k| k == 1).count(), 200);
        let v = discretize(&u, 1000, Placement::Volume).unwrap();
        let n0 = v.components().iter().filter(|&&k| k == 0).count();
        assert_eq!(2 * n0, v.len());
    }

    #[test]
    fn unsupported_dimension() {
        let b = Shape::unit_ball(4);
        assert!(matches!(
            discretize(&b, 100, Placement::Boundary),
            Err(Error::Unsupported(_))
        ));
    }
}
