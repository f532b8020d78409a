//! Competitor families and stability experiments for the charged-drop
//! energies: energy-decreasing sequences of shapes, perimeter expansions of
//! nearly spherical sets, and charge thresholds.

mod convex;
mod families;
mod stability;

use serde::Serialize;

use crate::geometry::Shape;

pub use convex::{convex_scan_2d, polygon_family, random_convex_polygon, ConvexScan};
pub use families::{
    many_balls_family, slab_family, two_balls_field_family, ManyBallsOptions, SlabFamily,
    UNIT_CUBE_ENERGY,
};
pub use stability::{
    fuglede_check, lemma_ratio_check, perturbed_sphere, rayleigh_scan, FugledeRow, FugledeTable,
    LemmaRatioReport, ResolutionStats, StabilityScan,
};

/// One named term of an energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTerm {
    pub name: &'static str,
    pub value: f64,
}

/// One member of a competitor family.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyPoint {
    pub n: usize,
    pub shape: Shape,
    /// Closed-form energy, the sum of `components`.
    pub analytic_energy: f64,
    /// Energy evaluated on node clouds, when requested.
    pub numeric_energy: Option<f64>,
    pub components: Vec<EnergyTerm>,
    /// Family-specific bound: the cross-term error of finite separation for
    /// many balls, the upper bound on `F(μ_n)` for two balls.
    pub bound: Option<f64>,
}

impl FamilyPoint {
    fn new(n: usize, shape: Shape, components: Vec<EnergyTerm>) -> Self {
        let analytic_energy = components.iter().map(|c| c.value).sum();
        Self {
            n,
            shape,
            analytic_energy,
            numeric_energy: None,
            components,
            bound: None,
        }
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.value)
    }
}

fn term(name: &'static str, value: f64) -> EnergyTerm {
    EnergyTerm { name, value }
}

/// Writes family points as CSV: `n, analytic_energy, numeric_energy, <components>, bound`.
pub fn write_family_csv<W: std::io::Write>(points: &[FamilyPoint], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<&str> = points
        .first()
        .map(|p| p.components.iter().map(|c| c.name).collect())
        .unwrap_or_default();
    let mut header = vec!["n", "analytic_energy", "numeric_energy"];
    header.extend(&names);
    header.push("bound");
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for p in points {
        let mut row = vec![
            p.n.to_string(),
            format!("{:e}", p.analytic_energy),
            opt(p.numeric_energy),
        ];
        row.extend(p.components.iter().map(|c| format!("{:e}", c.value)));
        row.push(opt(p.bound));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
