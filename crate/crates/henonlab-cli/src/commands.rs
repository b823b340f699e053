//! Subcommand implementations. Each parses its parameter block (with defaults),
//! runs one pipeline and returns the result with its side files.

use crate::error::CliError;
use crate::output::{Artifacts, Extra};
use henonlab::basins::{critical_points, linearize_sink, SearchDisk};
use henonlab::escape::{encode_pgm, render_julia_slice, PixelClass, SliceSpec};
use henonlab::family::{ComplexSpec, FamilySpec, ParamHenonFamily};
use henonlab::implosion::model::{RationalModel, RationalSkewMap};
use henonlab::implosion::normal_form::{jet_from_terms, reduce_normal_form, NormalFormOptions};
use henonlab::implosion::transit::{transit_solve_1d, TransitProblem, TransitSolution};
use henonlab::implosion::transit2d::{transit_solve_2d, TransitProblem2d, GRAPH_SAMPLES, SLOPE_BOUND};
use henonlab::jet::{Jet, Shape};
use henonlab::linalg::Point2;
use henonlab::manifolds::{geometric_schedule, order_estimate, stable_series, unstable_series, wiman_circles, ManifoldSeries};
use henonlab::maps::Iterate;
use henonlab::periodic::{
    continue_orbit, enumerate_periodic, scan_bifurcation_grid, solve_multiplier_root_of_unity, solve_periodic, CellTag,
    OrbitRecord, ParamGrid, PeriodicOrbit, ScanBudget, StepControl, CSV_HEADER,
};
use henonlab::tangency::{
    homoclinic_tangency_hunt, tangency_hunt, BiPoly, BidiskFrame, HuntDomain, HuntOptions, HuntReport, LambdaDomain,
    PolyCurve,
};
use henonlab::family::Disk;
use henonlab::C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// Inputs shared by every subcommand.
pub struct Context {
    pub family: Option<FamilySpec>,
    pub seed: u64,
    pub tol: Option<f64>,
    pub params: Map<String, Value>,
}

/// What a subcommand produced, with the configuration it actually used.
pub struct Outcome {
    pub family: Option<FamilySpec>,
    pub params: Value,
    pub artifacts: Artifacts,
}

pub fn run(command: &str, ctx: &Context) -> Result<Outcome, CliError> {
    match command {
        "render julia" => render_julia(ctx),
        "render bifurcation" => render_bifurcation(ctx),
        "orbits find" => orbits_find(ctx),
        "orbits enumerate" => orbits_enumerate(ctx),
        "orbits continue" => orbits_continue(ctx),
        "orbits unity" => orbits_unity(ctx),
        "manifold series" => manifold_series(ctx),
        "manifold order" => manifold_order(ctx),
        "manifold wiman" => manifold_wiman(ctx),
        "basin critical" => basin_critical(ctx),
        "implosion normal-form" => implosion_normal_form(ctx),
        "implosion transit1d" => implosion_transit1d(ctx),
        "implosion transit2d" => implosion_transit2d(ctx),
        "tangency hunt" => tangency_hunt_cmd(ctx),
        "tangency homoclinic" => tangency_homoclinic(ctx),
        other => Err(CliError::new("usage", format!("unknown command '{other}'"))),
    }
}

fn parse<T: DeserializeOwned + Serialize>(params: &Map<String, Value>) -> Result<(T, Value), CliError> {
    let p: T = serde_json::from_value(Value::Object(params.clone())).map_err(|e| CliError::from("params", e))?;
    let v = serde_json::to_value(&p).map_err(|e| CliError::from("params", e))?;
    Ok((p, v))
}

fn to_json<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::from("output", e))
}

/// The quadratic family (z² + λ − b·w, z) over a disk.
pub fn quadratic_spec(b: f64, center: f64, radius: f64) -> FamilySpec {
    serde_json::from_value(json!({
        "factors": [{ "p": [[[0.0, 0.0], [1.0, 0.0]], 0.0, 1.0], "b": b }],
        "domain": { "center": center, "radius": radius },
    }))
    .expect("quadratic spec is well formed")
}

fn family(ctx: &Context, default: FamilySpec) -> Result<(ParamHenonFamily, FamilySpec), CliError> {
    let spec = ctx.family.clone().unwrap_or(default);
    let fam = spec.build().map_err(|e| CliError::from("family", e))?;
    Ok((fam, spec))
}

fn complex(c: &ComplexSpec) -> Result<C64, CliError> {
    c.value().map_err(|e| CliError::from("params", e))
}

fn point(p: &[ComplexSpec; 2]) -> Result<Point2, CliError> {
    Ok(Point2::new(complex(&p[0])?, complex(&p[1])?))
}

fn num(x: f64) -> ComplexSpec {
    ComplexSpec::Number(x)
}

fn records_csv(orbits: &[PeriodicOrbit], lambda: C64) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for o in orbits {
        for row in o.record(lambda).csv_rows() {
            s.push_str(&row);
            s.push('\n');
        }
    }
    s
}

// ---------------------------------------------------------------- render

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct JuliaParams {
    lambda: ComplexSpec,
    /// Explicit slice; when absent the diagonal {(ζ, ζ)} over |Re ζ|, |Im ζ| ≤ half_width.
    slice: Option<SliceSpec>,
    half_width: f64,
    resolution: usize,
    escape_radius: Option<f64>,
    budget: usize,
    gamma: f64,
}

impl Default for JuliaParams {
    fn default() -> Self {
        JuliaParams { lambda: num(0.0), slice: None, half_width: 2.5, resolution: 128, escape_radius: None, budget: 200, gamma: 0.5 }
    }
}

fn render_julia(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (JuliaParams, _) = parse(&ctx.params)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.5, 0.0, 4.0))?;
    let map = fam.family_at(complex(&p.lambda)?).map_err(|e| CliError::from("family", e))?;
    let slice = p.slice.clone().unwrap_or_else(|| SliceSpec::diagonal(p.half_width, p.resolution));
    if !slice.is_valid() {
        return Err(CliError::new("params", "slice directions are degenerate"));
    }
    let radius = p.escape_radius.unwrap_or_else(|| map.default_escape_radius());
    let raster = render_julia_slice(&map, &slice, radius, p.budget);
    let (pgm, scale) = encode_pgm(raster.width, raster.height, &raster.values, p.gamma);
    let count = |c: PixelClass| raster.classes.iter().filter(|&&x| x == c).count();
    let result = json!({
        "width": raster.width,
        "height": raster.height,
        "escape_radius": radius,
        "class_counts": {
            "bounded": count(PixelClass::Bounded),
            "forward_bounded": count(PixelClass::ForwardBounded),
            "escaped": count(PixelClass::Escaped),
        },
        "pgm_scale": scale,
        "pgm": "julia.pgm",
    });
    Ok(Outcome {
        family: Some(spec),
        params,
        artifacts: Artifacts { result, extras: vec![Extra::Pgm("julia.pgm".into(), pgm)] },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BifurcationParams {
    grid: ParamGrid,
    max_period: usize,
    budget: ScanBudget,
}

impl Default for BifurcationParams {
    fn default() -> Self {
        BifurcationParams {
            grid: ParamGrid { re_range: (-1.0, 0.4), im_range: (-0.3, 0.3), cols: 14, rows: 6 },
            max_period: 1,
            budget: ScanBudget::default(),
        }
    }
}

fn render_bifurcation(ctx: &Context) -> Result<Outcome, CliError> {
    let (mut p, _): (BifurcationParams, Value) = parse(&ctx.params)?;
    if let Some(t) = ctx.tol {
        p.budget.step.tol = t;
    }
    let params = to_json(&p)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.1, 0.0, 4.0))?;
    if p.grid.cols == 0 || p.grid.rows == 0 || p.max_period == 0 {
        return Err(CliError::new("params", "grid and max_period must be positive"));
    }
    let raster = scan_bifurcation_grid(&fam, &p.grid, p.max_period, &p.budget);
    let shades: Vec<f64> = raster
        .tags
        .iter()
        .map(|t| match t {
            CellTag::Constant => 1.0,
            CellTag::Untracked => 0.5,
            CellTag::Crossing => 0.0,
        })
        .collect();
    let (pgm, _) = encode_pgm(p.grid.cols, p.grid.rows, &shades, 1.0);
    let mut result = to_json(&raster)?;
    result["pgm"] = json!("bifurcation.pgm");
    Ok(Outcome {
        family: Some(spec),
        params,
        artifacts: Artifacts { result, extras: vec![Extra::Pgm("bifurcation.pgm".into(), pgm)] },
    })
}

// ---------------------------------------------------------------- orbits

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FindParams {
    lambda: ComplexSpec,
    period: usize,
    start: [ComplexSpec; 2],
    tol: f64,
}

impl Default for FindParams {
    fn default() -> Self {
        FindParams { lambda: num(0.0), period: 1, start: [num(1.4), num(1.4)], tol: 1e-12 }
    }
}

fn orbits_find(ctx: &Context) -> Result<Outcome, CliError> {
    let (mut p, _): (FindParams, Value) = parse(&ctx.params)?;
    p.tol = ctx.tol.unwrap_or(p.tol);
    let params = to_json(&p)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.5, 0.0, 4.0))?;
    let lambda = complex(&p.lambda)?;
    let map = fam.family_at(lambda).map_err(|e| CliError::from("family", e))?;
    let orbit = solve_periodic(&map, p.period, point(&p.start)?, p.tol).map_err(|e| CliError::from("periodic", e))?;
    let record: OrbitRecord = orbit.record(lambda);
    let result = json!({ "orbit": orbit, "record": record });
    Ok(Outcome {
        family: Some(spec),
        params,
        artifacts: Artifacts { result, extras: vec![Extra::Csv("orbits.csv".into(), records_csv(&[orbit], lambda))] },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EnumerateParams {
    lambda: ComplexSpec,
    period: usize,
    box_radius: Option<f64>,
    grid_density: usize,
}

impl Default for EnumerateParams {
    fn default() -> Self {
        EnumerateParams { lambda: num(-3.0), period: 1, box_radius: None, grid_density: 8 }
    }
}

fn orbits_enumerate(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (EnumerateParams, _) = parse(&ctx.params)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.1, 0.0, 4.0))?;
    if p.period == 0 {
        return Err(CliError::new("params", "period must be positive"));
    }
    let lambda = complex(&p.lambda)?;
    let map = fam.family_at(lambda).map_err(|e| CliError::from("family", e))?;
    let e = enumerate_periodic(&map, p.period, p.box_radius, p.grid_density);
    let csv = records_csv(&e.orbits, lambda);
    Ok(Outcome {
        family: Some(spec),
        params,
        artifacts: Artifacts { result: to_json(&e)?, extras: vec![Extra::Csv("orbits.csv".into(), csv)] },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ContinueParams {
    period: usize,
    start: [ComplexSpec; 2],
    path: Vec<ComplexSpec>,
    step: StepControl,
}

impl Default for ContinueParams {
    fn default() -> Self {
        ContinueParams { period: 1, start: [num(0.01), num(0.01)], path: vec![num(0.0), num(0.31)], step: StepControl::default() }
    }
}

fn orbits_continue(ctx: &Context) -> Result<Outcome, CliError> {
    let (mut p, _): (ContinueParams, Value) = parse(&ctx.params)?;
    if let Some(t) = ctx.tol {
        p.step.tol = t;
    }
    let params = to_json(&p)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.1, 0.0, 4.0))?;
    let path: Vec<C64> = p.path.iter().map(complex).collect::<Result<_, _>>()?;
    let first = *path.first().ok_or_else(|| CliError::new("params", "path is empty"))?;
    let map = fam.family_at(first).map_err(|e| CliError::from("family", e))?;
    let orbit = solve_periodic(&map, p.period, point(&p.start)?, p.step.tol).map_err(|e| CliError::from("periodic", e))?;
    let r = continue_orbit(&fam, &orbit, &path, &p.step).map_err(|e| CliError::from("periodic", e))?;
    let csv = records_csv(&r.orbits, r.lambda);
    Ok(Outcome {
        family: Some(spec),
        params,
        artifacts: Artifacts { result: to_json(&r)?, extras: vec![Extra::Csv("orbits.csv".into(), csv)] },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct UnityParams {
    lambda: ComplexSpec,
    period: usize,
    start: [ComplexSpec; 2],
    /// Target multiplier; overridden by `root` = [p, q] meaning e^{2πip/q}.
    target: ComplexSpec,
    root: Option<[i64; 2]>,
    lambda_seed: Option<ComplexSpec>,
    tol: f64,
}

impl Default for UnityParams {
    fn default() -> Self {
        UnityParams {
            lambda: num(0.2),
            period: 1,
            start: [num(0.3), num(0.3)],
            target: num(1.0),
            root: None,
            lambda_seed: None,
            tol: 1e-12,
        }
    }
}

fn orbits_unity(ctx: &Context) -> Result<Outcome, CliError> {
    let (mut p, _): (UnityParams, Value) = parse(&ctx.params)?;
    p.tol = ctx.tol.unwrap_or(p.tol);
    let params = to_json(&p)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.1, 0.0, 2.0))?;
    let lambda = complex(&p.lambda)?;
    let target = match p.root {
        Some([num_, den]) if den > 0 => C64::from_polar(1.0, 2.0 * std::f64::consts::PI * num_ as f64 / den as f64),
        Some(_) => return Err(CliError::new("params", "root denominator must be positive")),
        None => complex(&p.target)?,
    };
    let seed = match &p.lambda_seed {
        Some(s) => complex(s)?,
        None => lambda,
    };
    let map = fam.family_at(lambda).map_err(|e| CliError::from("family", e))?;
    let orbit = solve_periodic(&map, p.period, point(&p.start)?, p.tol).map_err(|e| CliError::from("periodic", e))?;
    let r = solve_multiplier_root_of_unity(&fam, &orbit, target, seed).map_err(|e| CliError::from("periodic", e))?;
    Ok(Outcome { family: Some(spec), params, artifacts: Artifacts::json(to_json(&r)?) })
}

// ---------------------------------------------------------------- manifolds

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Unstable,
    Stable,
}

fn series_for(
    ctx: &Context,
    lambda: &ComplexSpec,
    period: usize,
    start: &[ComplexSpec; 2],
    kind: Kind,
    order: usize,
) -> Result<(henonlab::family::HenonMap, ManifoldSeries, FamilySpec), CliError> {
    let (fam, spec) = family(ctx, quadratic_spec(0.5, 0.0, 4.0))?;
    let map = fam.family_at(complex(lambda)?).map_err(|e| CliError::from("family", e))?;
    let tol = ctx.tol.unwrap_or(1e-12);
    let saddle = solve_periodic(&map, period, point(start)?, tol).map_err(|e| CliError::from("periodic", e))?;
    let series = match kind {
        Kind::Unstable => unstable_series(&map, &saddle, order),
        Kind::Stable => stable_series(&map, &saddle, order),
    }
    .map_err(|e| CliError::from("manifold", e))?;
    Ok((map, series, spec))
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SeriesParams {
    lambda: ComplexSpec,
    period: usize,
    start: [ComplexSpec; 2],
    kind: Kind,
    order: usize,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams { lambda: num(0.0), period: 1, start: [num(1.4), num(1.4)], kind: Kind::Unstable, order: 40 }
    }
}

fn manifold_series(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (SeriesParams, _) = parse(&ctx.params)?;
    let (_, series, spec) = series_for(ctx, &p.lambda, p.period, &p.start, p.kind, p.order)?;
    Ok(Outcome { family: Some(spec), params, artifacts: Artifacts::json(to_json(&series)?) })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OrderParams {
    lambda: ComplexSpec,
    period: usize,
    start: [ComplexSpec; 2],
    kind: Kind,
    order: usize,
    r_start: f64,
    r_end: f64,
    per_decade: usize,
    samples: usize,
}

impl Default for OrderParams {
    fn default() -> Self {
        OrderParams {
            lambda: num(0.0),
            period: 1,
            start: [num(1.4), num(1.4)],
            kind: Kind::Unstable,
            order: 40,
            r_start: 1.0,
            r_end: 1e4,
            per_decade: 8,
            samples: 512,
        }
    }
}

fn manifold_order(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (OrderParams, _) = parse(&ctx.params)?;
    if !(p.r_start > 0.0 && p.r_end > p.r_start) || p.per_decade == 0 || p.samples == 0 {
        return Err(CliError::new("params", "radii schedule needs 0 < r_start < r_end and positive counts"));
    }
    let (map, series, spec) = series_for(ctx, &p.lambda, p.period, &p.start, p.kind, p.order)?;
    let radii = geometric_schedule(p.r_start, p.r_end, p.per_decade);
    let g = order_estimate(&series, &series.dynamics(&map), &radii, p.samples);
    let mut result = to_json(&g)?;
    result["csv"] = json!("growth.csv");
    Ok(Outcome {
        family: Some(spec),
        params,
        artifacts: Artifacts { result, extras: vec![Extra::Csv("growth.csv".into(), g.csv())] },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WimanParams {
    lambda: ComplexSpec,
    period: usize,
    start: [ComplexSpec; 2],
    kind: Kind,
    order: usize,
    k_radius: Option<f64>,
    r_max: f64,
}

impl Default for WimanParams {
    fn default() -> Self {
        WimanParams {
            lambda: num(0.0),
            period: 1,
            start: [num(1.4), num(1.4)],
            kind: Kind::Stable,
            order: 40,
            k_radius: None,
            r_max: 1e6,
        }
    }
}

fn manifold_wiman(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (WimanParams, _) = parse(&ctx.params)?;
    let (map, series, spec) = series_for(ctx, &p.lambda, p.period, &p.start, p.kind, p.order)?;
    let k = p.k_radius.unwrap_or_else(|| map.default_escape_radius());
    let circles = wiman_circles(&series, &series.dynamics(&map), k, p.r_max);
    let result = json!({ "k_radius": k, "r_max": p.r_max, "count": circles.len(), "circles": circles });
    Ok(Outcome { family: Some(spec), params, artifacts: Artifacts::json(result) })
}

// ---------------------------------------------------------------- basins

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CriticalParams {
    lambda: ComplexSpec,
    sink_start: [ComplexSpec; 2],
    saddle_start: [ComplexSpec; 2],
    linearization_order: usize,
    series_order: usize,
    disk: SearchDisk,
    tol: f64,
    budget: usize,
}

impl Default for CriticalParams {
    fn default() -> Self {
        CriticalParams {
            lambda: num(0.225),
            sink_start: [num(0.3), num(0.3)],
            saddle_start: [num(0.75), num(0.75)],
            linearization_order: 12,
            series_order: 40,
            disk: SearchDisk { center: C64::new(0.1313, 0.3265), radius: 0.02 },
            tol: 1e-6,
            budget: 3000,
        }
    }
}

fn basin_critical(ctx: &Context) -> Result<Outcome, CliError> {
    let (mut p, _): (CriticalParams, Value) = parse(&ctx.params)?;
    p.tol = ctx.tol.unwrap_or(p.tol);
    let params = to_json(&p)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.05, 0.0, 1.0))?;
    let map = fam.family_at(complex(&p.lambda)?).map_err(|e| CliError::from("family", e))?;
    let sink = solve_periodic(&map, 1, point(&p.sink_start)?, 1e-13).map_err(|e| CliError::from("periodic", e))?;
    let saddle = solve_periodic(&map, 1, point(&p.saddle_start)?, 1e-13).map_err(|e| CliError::from("periodic", e))?;
    let lin = linearize_sink(&Iterate::forward(&map, sink.period), &sink, p.linearization_order).map_err(|e| CliError::from("basin", e))?;
    let series = unstable_series(&map, &saddle, p.series_order).map_err(|e| CliError::from("manifold", e))?;
    let rep = critical_points(&map, &lin, &series, &p.disk, p.tol, p.budget);
    Ok(Outcome { family: Some(spec), params, artifacts: Artifacts::json(to_json(&rep)?) })
}

// ---------------------------------------------------------------- implosion

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NormalFormParams {
    order: usize,
    lambda_order: usize,
    /// Terms [i, j, m, re, im] of x ↦ Σ c·xⁱyʲλᵐ.
    x_terms: Vec<[f64; 5]>,
    y_terms: Vec<[f64; 5]>,
    q: usize,
    detection_tol: f64,
}

impl Default for NormalFormParams {
    fn default() -> Self {
        let t = |v: &[(usize, usize, usize, f64)]| v.iter().map(|&(i, j, m, c)| [i as f64, j as f64, m as f64, c, 0.0]).collect();
        NormalFormParams {
            order: 7,
            lambda_order: 4,
            x_terms: t(&[
                (1, 0, 0, 1.0),
                (1, 0, 1, 0.7),
                (0, 1, 0, 0.2),
                (0, 1, 1, 0.1),
                (0, 2, 0, 0.3),
                (2, 0, 1, 0.4),
                (1, 1, 0, 0.25),
                (3, 0, 0, 1.5),
                (2, 1, 0, -0.3),
                (4, 0, 0, 0.2),
            ]),
            y_terms: t(&[(0, 1, 0, 0.4), (0, 1, 1, -0.1), (2, 0, 0, 0.5), (0, 2, 0, 0.2), (1, 1, 0, 0.1)]),
            q: 1,
            detection_tol: NormalFormOptions::default().detection_tol,
        }
    }
}

fn build_jet(shape: Shape, terms: &[[f64; 5]]) -> Result<Jet, CliError> {
    let mut out = Vec::new();
    for t in terms {
        if t[..3].iter().any(|e| *e < 0.0 || e.fract() != 0.0) {
            return Err(CliError::new("params", format!("term exponents must be non-negative integers: {t:?}")));
        }
        out.push((t[0] as usize, t[1] as usize, t[2] as usize, C64::new(t[3], t[4])));
    }
    Ok(jet_from_terms(shape, &out))
}

/// Nonzero coefficients as [i, j, m, re, im].
fn jet_terms(j: &Jet, shape: Shape) -> Vec<[f64; 5]> {
    shape
        .monomials()
        .filter_map(|(i, k, m)| {
            let c = j.coeff(i, k, m);
            (c.norm() > 1e-15).then_some([i as f64, k as f64, m as f64, c.re, c.im])
        })
        .collect()
}

fn implosion_normal_form(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (NormalFormParams, _) = parse(&ctx.params)?;
    let shape = Shape::graded(p.order, p.lambda_order);
    let f = build_jet(shape, &p.x_terms)?;
    let g = build_jet(shape, &p.y_terms)?;
    let opts = NormalFormOptions { q: p.q, detection_tol: p.detection_tol };
    let r = reduce_normal_form(&f, &g, &opts).map_err(|e| CliError::from("normal_form", e))?;
    let chain: Vec<Value> = r
        .chain
        .iter()
        .map(|s| {
            let size = jet_terms(&s.forward.0, shape).len() + jet_terms(&s.forward.1, shape).len();
            json!({ "kind": s.kind, "power": s.power, "terms": size })
        })
        .collect();
    let result = json!({
        "k": r.k,
        "q": r.q,
        "nu": r.nu,
        "lambda_order": r.lambda_order,
        "killed_max": r.killed_max,
        "chain": chain,
        "map": { "x": jet_terms(&r.map.0, shape), "y": jet_terms(&r.map.1, shape) },
        "rho": jet_terms(&r.rho, shape),
        "b": jet_terms(&r.b, shape),
    });
    Ok(Outcome { family: None, params, artifacts: Artifacts::json(result) })
}

fn transit_result(sol: &TransitSolution) -> Result<Artifacts, CliError> {
    let mut result = to_json(sol)?;
    result["all_certified"] = json!(sol.require_certified().is_ok());
    result["orbit_csv"] = json!("orbit.csv");
    Ok(Artifacts { result, extras: vec![Extra::Csv("orbit.csv".into(), sol.orbit_csv())] })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Transit1dParams {
    z_in: ComplexSpec,
    z_out: ComplexSpec,
    n: usize,
    model: RationalModel,
    radius: f64,
    window_scale: f64,
    n_floor: usize,
    m_const: Option<f64>,
}

impl Default for Transit1dParams {
    fn default() -> Self {
        Transit1dParams {
            z_in: num(-10.0),
            z_out: num(10.0),
            n: 800,
            model: RationalModel::inverse_power(0.5),
            radius: 1.0,
            window_scale: 40.0,
            n_floor: 1,
            m_const: None,
        }
    }
}

fn implosion_transit1d(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (Transit1dParams, _) = parse(&ctx.params)?;
    let mut tp = TransitProblem::new(complex(&p.z_in)?, complex(&p.z_out)?, p.n);
    tp.radius = p.radius;
    tp.window_scale = p.window_scale;
    tp.n_floor = p.n_floor;
    tp.m_const = p.m_const;
    let sol = transit_solve_1d(&p.model, &tp).map_err(|e| CliError::from("transit", e))?;
    Ok(Outcome { family: None, params, artifacts: transit_result(&sol)? })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Transit2dParams {
    z_in: ComplexSpec,
    w_in: ComplexSpec,
    z_out: ComplexSpec,
    n: usize,
    map: RationalSkewMap,
    radius: f64,
    window_scale: f64,
    s: f64,
    samples: usize,
    slope_bound: f64,
}

impl Default for Transit2dParams {
    fn default() -> Self {
        Transit2dParams {
            z_in: num(-30.0),
            w_in: num(0.1),
            z_out: num(30.0),
            n: 600,
            map: RationalSkewMap::standard(),
            radius: 10.0,
            window_scale: 40.0,
            s: 1.0,
            samples: GRAPH_SAMPLES,
            slope_bound: SLOPE_BOUND,
        }
    }
}

fn implosion_transit2d(ctx: &Context) -> Result<Outcome, CliError> {
    let (p, params): (Transit2dParams, _) = parse(&ctx.params)?;
    let mut tp = TransitProblem2d::new(complex(&p.z_in)?, complex(&p.w_in)?, complex(&p.z_out)?, p.n);
    tp.base.radius = p.radius;
    tp.base.window_scale = p.window_scale;
    tp.s = p.s;
    tp.samples = p.samples;
    tp.slope_bound = p.slope_bound;
    let sol = transit_solve_2d(&p.map, &tp).map_err(|e| CliError::from("transit", e))?;
    Ok(Outcome { family: None, params, artifacts: transit_result(&sol)? })
}

// ---------------------------------------------------------------- tangency

fn hunt_artifacts(r: &HuntReport) -> Result<Artifacts, CliError> {
    let mut result = to_json(r)?;
    result["coverage_csv"] = json!("coverage.csv");
    Ok(Artifacts { result, extras: vec![Extra::Csv("coverage.csv".into(), r.coverage_csv())] })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HuntParams {
    v: PolyCurve,
    w: PolyCurve,
    domain: HuntDomain,
    frame: BidiskFrame,
    options: HuntOptions,
}

impl Default for HuntParams {
    fn default() -> Self {
        let c = |x: f64| C64::new(x, 0.0);
        HuntParams {
            v: PolyCurve::new(BiPoly::new(&[(2, 0, 1.0), (0, 1, 1.0)]), BiPoly::new(&[(1, 0, 1.0)])),
            w: PolyCurve::vertical_graph(BiPoly::new(&[(1, 0, 0.5)])),
            domain: HuntDomain {
                t: Disk { center: c(0.0), radius: 1.0 },
                s: Disk { center: c(0.0), radius: 1.0 },
                lambda: LambdaDomain::Segment { a: c(-0.5), b: c(0.5) },
            },
            frame: BidiskFrame::identity(),
            options: HuntOptions::default(),
        }
    }
}

fn tangency_hunt_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let (mut p, _): (HuntParams, Value) = parse(&ctx.params)?;
    if let Some(t) = ctx.tol {
        p.options.defect_tol = t;
    }
    let params = to_json(&p)?;
    let r = tangency_hunt(&p.v, &p.w, &p.domain, &p.frame, &p.options).map_err(|e| CliError::from("tangency", e))?;
    Ok(Outcome { family: None, params, artifacts: hunt_artifacts(&r)? })
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HomoclinicParams {
    saddle_start: [ComplexSpec; 2],
    order: usize,
    frame: BidiskFrame,
    domain: HuntDomain,
    options: HuntOptions,
}

impl Default for HomoclinicParams {
    fn default() -> Self {
        let c = |x: f64| C64::new(x, 0.0);
        // outer fixed point of z² − 1.3 − 0.3w
        let x = (1.3 + (1.69f64 + 5.2).sqrt()) / 2.0;
        HomoclinicParams {
            saddle_start: [num(x), num(x)],
            order: 30,
            frame: BidiskFrame {
                center: Point2::real(-1.72, 0.0),
                dir1: Point2::real(1.0, 0.0),
                dir2: Point2::real(0.0, 1.0),
                scale1: 0.5,
                scale2: 2.0,
            },
            domain: HuntDomain {
                t: Disk { center: c(-9.8), radius: 3.0 },
                s: Disk { center: c(-52.0), radius: 12.0 },
                lambda: LambdaDomain::Segment { a: c(-1.6), b: c(-1.0) },
            },
            options: HuntOptions::default(),
        }
    }
}

fn tangency_homoclinic(ctx: &Context) -> Result<Outcome, CliError> {
    let (mut p, _): (HomoclinicParams, Value) = parse(&ctx.params)?;
    if let Some(t) = ctx.tol {
        p.options.defect_tol = t;
    }
    let params = to_json(&p)?;
    let (fam, spec) = family(ctx, quadratic_spec(0.3, -1.3, 1.0))?;
    let frame = BidiskFrame::new(p.frame.center, p.frame.dir1, p.frame.dir2, p.frame.scale1, p.frame.scale2)
        .map_err(|e| CliError::from("tangency", e))?;
    let r = homoclinic_tangency_hunt(&fam, point(&p.saddle_start)?, p.order, &frame, &p.domain, &p.options)
        .map_err(|e| CliError::from("tangency", e))?;
    Ok(Outcome { family: Some(spec), params, artifacts: hunt_artifacts(&r)? })
}
