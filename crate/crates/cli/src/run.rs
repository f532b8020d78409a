use std::fs;

use dropcap_core::equilibrium::{
    equilibrium_measure_with, farfield_check, support_profile, Regions,
};
use dropcap_core::instability::{
    convex_scan_2d, fuglede_check, lemma_ratio_check, many_balls_family, polygon_family,
    rayleigh_scan, slab_family, two_balls_field_family, write_family_csv, FamilyPoint,
    ManyBallsOptions,
};
use dropcap_core::kernel::unit_sphere_area;
use dropcap_core::{
    assemble_operator, discretize, solve_entropic, solve_external, EnergyReport,
    EquilibriumOptions, EquilibriumResult, Error, ExternalPotential, HarmonicCoefficient,
    KernelOperator, KernelParams, Placement, Shape,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::*;

/// Everything a subcommand produces; rendered as JSON or CSV by the caller.
pub struct Output {
    pub config: Value,
    pub result: Value,
    pub csv: Vec<u8>,
}

pub enum Failure {
    /// Bad input, detected before or during setup.
    Validation(String),
    /// Numerical breakdown other than non-convergence.
    Solver(String),
    /// The solver stopped early; `partial` holds the best iterate.
    NonConvergence {
        message: String,
        partial: Box<Output>,
    },
}

type Run = std::result::Result<Output, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

/// Maps a core error, keeping the best iterate of a stalled equilibrium solve.
fn lift(config: &Value) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::NonConvergence { ref best, .. } => {
            let message = e.to_string();
            match equilibrium_output(config.clone(), best, json!({})) {
                Ok(partial) => Failure::NonConvergence {
                    message,
                    partial: Box::new(partial),
                },
                Err(f) => f,
            }
        }
        e if e.is_validation() => Failure::Validation(e.to_string()),
        e => Failure::Solver(e.to_string()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Solver(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::Solver(e.to_string()))
}

fn csv_table(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Solver(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::Solver(e.to_string()))
}

fn capture(
    write: impl FnOnce(&mut Vec<u8>) -> dropcap_core::Result<()>,
) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| Failure::Solver(e.to_string()))?;
    Ok(buf)
}

/// Reads a shape from a file path or an inline JSON document.
pub fn load_shape(source: &str) -> Result<Shape, Failure> {
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        fs::read_to_string(source)
            .map_err(|e| invalid(format!("cannot read shape file '{source}': {e}")))?
    };
    let shape: Shape =
        serde_json::from_str(&text).map_err(|e| invalid(format!("malformed shape JSON: {e}")))?;
    shape.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(shape)
}

fn check_resolution(m: usize) -> Result<(), Failure> {
    if m == 0 {
        return Err(invalid("M must be positive"));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid(format!("tol must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

fn check_finite(name: &str, values: &[f64]) -> Result<(), Failure> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{name} must be finite")));
    }
    Ok(())
}

fn config_with_shape<T: Serialize>(args: &T, shape: &Shape) -> Value {
    let mut config = to_value(args);
    config["shape"] = to_value(shape);
    config
}

struct Prepared {
    config: Value,
    shape: Shape,
    params: KernelParams,
    placement: Placement,
}

fn prepare<T: Serialize>(args: &T, solve: &SolveArgs) -> Result<Prepared, Failure> {
    let shape = load_shape(&solve.shape.shape)?;
    let dim = shape.dim();
    if let Some(d) = solve.dim {
        if d != dim {
            return Err(invalid(format!(
                "--dim {d} does not match the {dim}-dimensional shape"
            )));
        }
    }
    check_resolution(solve.m)?;
    check_tol(solve.tol)?;
    let params = KernelParams::new(dim, solve.alpha).map_err(|e| invalid(e.to_string()))?;
    let placement = match solve.placement {
        PlacementArg::Auto if solve.alpha >= 2.0 => Placement::Boundary,
        PlacementArg::Auto | PlacementArg::Volume => Placement::Volume,
        PlacementArg::Boundary => Placement::Boundary,
    };
    let mut config = config_with_shape(args, &shape);
    config["dim"] = json!(dim);
    config["placement"] = to_value(&placement);
    Ok(Prepared {
        config,
        shape,
        params,
        placement,
    })
}

fn operator(p: &Prepared, m: usize) -> Result<KernelOperator, Failure> {
    let cloud = discretize(&p.shape, m, p.placement).map_err(lift(&p.config))?;
    assemble_operator(cloud, p.params).map_err(lift(&p.config))
}

fn solve(p: &Prepared, solve: &SolveArgs) -> Result<(KernelOperator, EquilibriumResult), Failure> {
    let op = operator(p, solve.m)?;
    let opts = EquilibriumOptions {
        tol: solve.tol,
        max_iter: solve.max_iter,
        fallback_iter: solve.fallback_iter,
        ..Default::default()
    };
    let res = equilibrium_measure_with(&op, &opts).map_err(lift(&p.config))?;
    Ok((op, res))
}

fn equilibrium_output(config: Value, res: &EquilibriumResult, extra: Value) -> Run {
    let mut result = to_value(&res.summary());
    if let (Value::Object(r), Value::Object(x)) = (&mut result, extra) {
        r.extend(x);
    }
    let csv = capture(|buf| res.write_csv(buf))?;
    Ok(Output {
        config,
        result,
        csv,
    })
}

pub fn execute(command: &Command) -> Run {
    match command {
        Command::Capacity(a) => capacity(a),
        Command::Equilibrium(a) => equilibrium(a),
        Command::ExternalField(a) => external_field(a),
        Command::Entropic(a) => entropic(a),
        Command::Energy(a) => energy(a),
        Command::Family(FamilyCommand::ManyBalls(a)) => many_balls(a),
        Command::Family(FamilyCommand::TwoBalls(a)) => two_balls(a),
        Command::Family(FamilyCommand::Slab(a)) => slab(a),
        Command::Stability(StabilityCommand::Fuglede(a)) => fuglede(a),
        Command::Stability(StabilityCommand::Rayleigh(a)) => rayleigh(a),
        Command::Stability(StabilityCommand::LemmaRatio(a)) => lemma(a),
        Command::Stability(StabilityCommand::Convex2d(a)) => convex(a),
    }
}

fn capacity(a: &SolveArgs) -> Run {
    let p = prepare(a, a)?;
    let (_, res) = solve(&p, a)?;
    let summary = res.summary();
    Ok(Output {
        config: p.config,
        result: to_value(&summary),
        csv: csv_rows(&[summary])?,
    })
}

fn equilibrium(a: &EquilibriumArgs) -> Run {
    let p = prepare(a, &a.solve)?;
    check_finite("farfield radii", &a.farfield)?;
    check_finite("shell edges", &a.shells)?;
    let (_, res) = solve(&p, &a.solve)?;
    let err = lift(&p.config);
    let mut extra = Map::new();
    extra.insert(
        "components".into(),
        to_value(&support_profile(&res.measure, &Regions::Components).map_err(&err)?),
    );
    if !a.shells.is_empty() {
        let regions = Regions::RadialShells {
            center: p.shape.anchor(),
            edges: a.shells.clone(),
        };
        extra.insert(
            "shells".into(),
            to_value(&support_profile(&res.measure, &regions).map_err(&err)?),
        );
    }
    if !a.farfield.is_empty() {
        extra.insert(
            "farfield".into(),
            to_value(&farfield_check(&res.measure, &p.params, &a.farfield).map_err(&err)?),
        );
    }
    equilibrium_output(p.config.clone(), &res, Value::Object(extra))
}

fn external_field(a: &FieldArgs) -> Run {
    let shape = load_shape(&a.shape.shape)?;
    check_resolution(a.m)?;
    check_finite("field", &a.field)?;
    let dim = shape.dim();
    if a.field.len() != dim {
        return Err(invalid(format!(
            "--field has {} components, the shape lives in R^{dim}",
            a.field.len()
        )));
    }
    let config = config_with_shape(a, &shape);
    let err = lift(&config);
    let params = KernelParams::coulomb(dim).map_err(&err)?;
    let op = assemble_operator(
        discretize(&shape, a.m, Placement::Boundary).map_err(&err)?,
        params,
    )
    .map_err(&err)?;
    let res = solve_external(&op, &ExternalPotential::linear(a.field.clone())).map_err(&err)?;
    drop(err);
    let csv = capture(|buf| res.write_csv(buf))?;
    Ok(Output {
        result: to_value(&res.summary()),
        csv,
        config,
    })
}

fn entropic(a: &EntropicArgs) -> Run {
    let shape = load_shape(&a.shape.shape)?;
    check_resolution(a.m)?;
    check_finite("Q", &[a.q])?;
    if a.bins == 0 {
        return Err(invalid("bins must be positive"));
    }
    if shape.dim() != 3 {
        return Err(invalid(
            "the entropic functional needs a 3-dimensional shape",
        ));
    }
    let config = config_with_shape(a, &shape);
    let err = lift(&config);
    let perimeter = shape.perimeter().map_err(&err)?;
    let cloud = discretize(&shape, a.m, Placement::Volume).map_err(&err)?;
    let res = solve_entropic(cloud, KernelParams::coulomb(3).map_err(&err)?).map_err(&err)?;
    let result = json!({
        "J": res.j_value,
        "perimeter": perimeter,
        "G": perimeter + a.q * a.q * res.j_value,
        "el_residual": res.el_residual,
        "uniform_bound": res.uniform_bound,
        "min_density": res.min_density,
        "nodes": res.density.len(),
    });
    let center = shape.anchor();
    // farthest node, nudged so it falls inside the last shell
    let r_max = res
        .cloud
        .positions()
        .map(|x| {
            x.iter()
                .zip(&center)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
        * (1.0 + 1e-12);
    drop(err);
    let csv = capture(|buf| res.write_radial_csv(buf, &center, r_max, a.bins))?;
    Ok(Output {
        config,
        result,
        csv,
    })
}

fn energy(a: &EnergyArgs) -> Run {
    let p = prepare(a, &a.solve)?;
    check_finite("Q", &[a.q])?;
    let perimeter = p.shape.perimeter().map_err(lift(&p.config))?;
    let (op, res) = solve(&p, &a.solve)?;
    let report = EnergyReport::new(
        &p.shape,
        a.q,
        perimeter,
        res.energy,
        res.kkt_residual,
        op.len(),
    );
    Ok(Output {
        config: p.config,
        result: to_value(&report),
        csv: csv_rows(&[&report])?,
    })
}

/// Family members without the (possibly very large) shape descriptions.
fn digest(points: &[FamilyPoint]) -> Value {
    points
        .iter()
        .map(|p| {
            let components: Map<String, Value> = p
                .components
                .iter()
                .map(|c| (c.name.to_string(), json!(c.value)))
                .collect();
            json!({
                "n": p.n,
                "analytic_energy": p.analytic_energy,
                "numeric_energy": p.numeric_energy,
                "components": components,
                "bound": p.bound,
            })
        })
        .collect()
}

fn family_csv(points: &[FamilyPoint]) -> Result<Vec<u8>, Failure> {
    capture(|buf| write_family_csv(points, buf))
}

fn check_n(n: &[usize]) -> Result<(), Failure> {
    if n.is_empty() || n.contains(&0) {
        return Err(invalid("n must be a nonempty list of positive integers"));
    }
    Ok(())
}

fn many_balls(a: &ManyBallsArgs) -> Run {
    check_n(&a.n)?;
    check_resolution(a.m)?;
    check_tol(a.tol)?;
    check_finite("Q", &[a.q, a.beta])?;
    let params = KernelParams::new(a.dim, a.alpha).map_err(|e| invalid(e.to_string()))?;
    let config = to_value(a);
    let opts = ManyBallsOptions {
        resolution: a.m,
        separation: a.separation,
        unit_ball_energy: None,
        tol: a.tol,
    };
    let points = many_balls_family(&a.n, a.beta, a.q, params, &opts).map_err(lift(&config))?;
    let result = json!({ "limit": unit_sphere_area(a.dim), "points": digest(&points) });
    Ok(Output {
        config,
        result,
        csv: family_csv(&points)?,
    })
}

fn two_balls(a: &FieldFamilyArgs) -> Run {
    check_n(&a.n)?;
    check_resolution(a.m)?;
    check_finite("field", &[a.field])?;
    let config = to_value(a);
    let points = two_balls_field_family(&a.n, a.field, a.m).map_err(lift(&config))?;
    Ok(Output {
        result: json!({ "points": digest(&points) }),
        csv: family_csv(&points)?,
        config,
    })
}

fn slab(a: &FieldFamilyArgs) -> Run {
    check_n(&a.n)?;
    check_resolution(a.m)?;
    check_finite("field", &[a.field])?;
    let config = to_value(a);
    let family = slab_family(&a.n, a.field, a.m).map_err(lift(&config))?;
    let result = json!({
        "points": digest(&family.points),
        "exponents": family.exponents,
        "crossover": family.crossover,
    });
    Ok(Output {
        result,
        csv: family_csv(&family.points)?,
        config,
    })
}

fn parse_coefficient(s: &str) -> Result<HarmonicCoefficient, Failure> {
    let bad = || invalid(format!("coefficient '{s}' is not of the form l:m:value"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let l: usize = parts[0].parse().map_err(|_| bad())?;
    let m: i64 = parts[1].parse().map_err(|_| bad())?;
    let value: f64 = parts[2].parse().map_err(|_| bad())?;
    if m.unsigned_abs() as usize > l || !value.is_finite() {
        return Err(invalid(format!(
            "coefficient '{s}' needs |m| <= l and a finite value"
        )));
    }
    Ok(HarmonicCoefficient::new(l, m, value))
}

fn fuglede(a: &FugledeArgs) -> Run {
    let coeffs: Vec<HarmonicCoefficient> = a
        .coeffs
        .iter()
        .map(|s| parse_coefficient(s))
        .collect::<Result<_, _>>()?;
    check_finite("eps", &a.eps)?;
    let mut config = to_value(a);
    config["coeffs"] = to_value(&coeffs);
    let table = fuglede_check(&coeffs, &a.eps).map_err(lift(&config))?;
    let csv = csv_rows(&table.rows)?;
    Ok(Output {
        result: to_value(&table),
        csv,
        config,
    })
}

fn rayleigh(a: &RayleighArgs) -> Run {
    check_resolution(a.m)?;
    check_tol(a.tol)?;
    check_finite("amplitudes", &a.amplitudes)?;
    check_finite("charges", &a.charges)?;
    let config = to_value(a);
    let scan = rayleigh_scan(a.l, &a.amplitudes, &a.charges, a.m, a.tol).map_err(lift(&config))?;
    let header = ["charge", "amplitude", "energy"].map(String::from);
    let rows: Vec<Vec<String>> = scan
        .charges
        .iter()
        .zip(&scan.energy_table)
        .flat_map(|(q, row)| {
            scan.amplitudes
                .iter()
                .zip(row)
                .map(move |(t, e)| vec![q.to_string(), t.to_string(), format!("{e:e}")])
        })
        .collect();
    let csv = csv_table(&header, &rows)?;
    Ok(Output {
        result: to_value(&scan),
        csv,
        config,
    })
}

fn lemma(a: &LemmaArgs) -> Run {
    a.m.iter().try_for_each(|&m| check_resolution(m))?;
    check_tol(a.tol)?;
    if a.samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let config = to_value(a);
    let report =
        lemma_ratio_check(a.samples, a.eps_max, &a.m, a.seed, a.tol).map_err(lift(&config))?;
    let csv = csv_rows(&report.per_resolution)?;
    Ok(Output {
        result: to_value(&report),
        csv,
        config,
    })
}

fn convex(a: &ConvexArgs) -> Run {
    check_resolution(a.m)?;
    check_tol(a.tol)?;
    check_finite("charges", &a.charges)?;
    let config = to_value(a);
    let err = lift(&config);
    let family = polygon_family(&a.regular, a.random, a.seed).map_err(&err)?;
    let scan = convex_scan_2d(&a.charges, &family, a.m, a.tol).map_err(&err)?;
    let mut header: Vec<String> = ["label", "perimeter", "interaction"]
        .map(String::from)
        .to_vec();
    header.extend(scan.charges.iter().map(|q| format!("energy_q{q}")));
    let rows: Vec<Vec<String>> = (0..scan.labels.len())
        .map(|k| {
            let mut row = vec![
                scan.labels[k].clone(),
                format!("{:e}", scan.perimeters[k]),
                format!("{:e}", scan.interaction[k]),
            ];
            row.extend(scan.energy_table.iter().map(|r| format!("{:e}", r[k])));
            row
        })
        .collect();
    drop(err);
    let csv = csv_table(&header, &rows)?;
    Ok(Output {
        result: to_value(&scan),
        csv,
        config,
    })
}
