use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use psm_core::expr::{self, Function};
use psm_core::groupoid2d::{
    Domain2D, GroupoidPoint2D, Phi2D, PlanarGroupoid, SampleBox, COMPOSABLE_TOLERANCE,
};
use psm_core::lie_dual::{
    expm, from_groupoid, holonomy, inverse_lie, multiply_lie, to_groupoid, LieAlgebraSpec,
    LieGroupoidPoint,
};
use psm_core::pathspace::{
    concatenate, gauge_flow, gauss_residual, solve_gauss, DiscretizedMorphism, GaugeField,
};
use psm_core::poisson::{PoissonStructure, RadialFunction};
use psm_core::radial3d::RadialProfile;

use crate::{
    Cli, Command, ExprArgs, ExprOp, FlowArgs, FlowOp, G2dArgs, G2dOp, LieArgs, LieOp, Outcome,
    RadialArgs, RunConfig, Values,
};

/// Round trip `i ∘ j` tolerance.
const ROUNDTRIP_TOLERANCE: f64 = 1e-6;
/// Holonomy of a constant η against the matrix exponential.
const HOLONOMY_TOLERANCE: f64 = 1e-8;
/// Drift of invariants along a gauge flow.
const DRIFT_TOLERANCE: f64 = 1e-6;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = &cli.config;
    match &cli.command {
        Command::G2d(a) => g2d(cfg, a),
        Command::Flow(a) => flow(cfg, a),
        Command::Lie(a) => lie(cfg, a),
        Command::Radial(a) => radial(cfg, a),
        Command::Expr(a) => expression(a),
    }
}

fn domain(cfg: &RunConfig) -> Result<Domain2D> {
    Ok(match cfg.domain {
        Some([x0, x1, y0, y1]) => Domain2D::new(x0, x1, y0, y1)?,
        None => Domain2D::plane(),
    })
}

fn planar(cfg: &RunConfig, phi: &str) -> Result<PlanarGroupoid> {
    Ok(PlanarGroupoid::new(Phi2D::parse(phi)?, domain(cfg)?).with_switch(cfg.switch))
}

fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value.clone().ok_or_else(|| anyhow!("missing --{flag}"))
}

fn values(value: &Option<Values>, flag: &str) -> Result<Vec<f64>> {
    require(value, flag).map(|v| v.0)
}

fn point_json(g: &GroupoidPoint2D) -> Value {
    json!({"x": g.x, "pi": g.pi})
}

fn g2d(cfg: &RunConfig, a: &G2dArgs) -> Result<Outcome> {
    let grp = planar(cfg, &a.phi)?;
    if let G2dOp::Verify = a.op {
        let bx = SampleBox::around(&grp.domain, a.x_radius, a.pi_radius);
        let report = grp.verify_axioms(&bx, cfg.samples, cfg.seed, cfg.tol)?;
        let passed = report.all_passed();
        let mut csv = String::from("check,max_dev,tolerance,passed\n");
        for (name, c) in &report.checks {
            writeln!(csv, "{name},{:e},{:e},{}", c.max_dev, c.tolerance, c.passed)?;
        }
        let mut json = serde_json::to_value(&report)?;
        json["phi"] = json!(grp.phi.source());
        json["passed"] = json!(passed);
        return Ok(Outcome {
            json,
            passed,
            csv: Some(csv),
        });
    }
    let g = GroupoidPoint2D::new(require(&a.x, "x")?, require(&a.pi, "pi")?);
    let json = match a.op {
        G2dOp::Member => json!({"member": grp.contains(&g)}),
        G2dOp::Mul => {
            let gt = GroupoidPoint2D::new(require(&a.x2, "x2")?, require(&a.pi2, "pi2")?);
            point_json(&grp.multiply(&g, &gt, COMPOSABLE_TOLERANCE)?)
        }
        G2dOp::Inv => point_json(&grp.inverse(&g)?),
        G2dOp::Left => json!({"left": grp.left(&g)}),
        G2dOp::Right => json!({"right": grp.right(&g)?}),
        G2dOp::H => json!({"h": grp.h(&g)?}),
        G2dOp::Psi => json!({"psi": grp.psi(&g)?}),
        G2dOp::Xf => json!({"x_f": grp.x_f(&g)?}),
        G2dOp::Verify => unreachable!("handled above"),
    };
    Ok(Outcome::ok(json))
}

enum Target {
    Planar(PlanarGroupoid),
    Lie(LieAlgebraSpec),
    Other(PoissonStructure),
}

impl Target {
    fn parse(cfg: &RunConfig, spec: &str) -> Result<Self> {
        let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
        Ok(match head {
            "phi2d" => Target::Planar(planar(cfg, rest)?),
            "radial" => Target::Other(PoissonStructure::RotInvariant3(RadialFunction::parse(rest)?)),
            "constant" => Target::Other(PoissonStructure::constant_from_json(&read(rest)?)?),
            "lie" => Target::Lie(LieAlgebraSpec::from_json(&read(rest)?)?),
            name => Target::Lie(
                LieAlgebraSpec::builtin(name)
                    .ok_or_else(|| anyhow!("unknown structure {spec:?}"))?,
            ),
        })
    }

    fn structure(&self) -> PoissonStructure {
        match self {
            Target::Planar(g) => g.structure(),
            Target::Lie(spec) => spec.kk_structure(),
            Target::Other(s) => s.clone(),
        }
    }

    fn invariants(&self, m: &DiscretizedMorphism) -> Result<Invariants> {
        Ok(match self {
            Target::Planar(g) => Invariants::Planar(g.invariants(m)?),
            Target::Lie(spec) => Invariants::Lie(to_groupoid(spec, m)?),
            Target::Other(_) => bail!("invariants need a phi2d or Lie structure"),
        })
    }

    fn invariants_json(&self, inv: &Invariants) -> Value {
        match (self, inv) {
            (_, Invariants::Planar(g)) => point_json(g),
            (Target::Lie(spec), Invariants::Lie(p)) => lie_point_json(spec, p),
            (_, Invariants::Lie(p)) => json!({"xi": p.xi}),
        }
    }
}

enum Invariants {
    Planar(GroupoidPoint2D),
    Lie(LieGroupoidPoint),
}

impl Invariants {
    fn distance(&self, other: &Invariants) -> f64 {
        match (self, other) {
            (Invariants::Planar(a), Invariants::Planar(b)) => a
                .coords()
                .iter()
                .zip(b.coords())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max),
            (Invariants::Lie(a), Invariants::Lie(b)) => a.distance(b),
            _ => f64::INFINITY,
        }
    }
}

fn read(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_morphism(path: &Option<std::path::PathBuf>, flag: &str) -> Result<DiscretizedMorphism> {
    Ok(DiscretizedMorphism::from_json(&read(require(path, flag)?)?)?)
}

fn path_csv(m: &DiscretizedMorphism) -> String {
    let mut csv = String::from("u");
    for i in 1..=m.n {
        write!(csv, ",X{i}").unwrap();
    }
    for i in 1..=m.n {
        write!(csv, ",eta{i}").unwrap();
    }
    csv.push('\n');
    for k in 0..m.nodes() {
        csv.push_str(&m.node(k).to_string());
        for v in m.x[k].iter().chain(&m.eta_u[k]) {
            write!(csv, ",{v}").unwrap();
        }
        csv.push('\n');
    }
    csv
}

/// Writes the morphism to `--out`, or inlines it in the report.
fn emit_morphism(a: &FlowArgs, m: &DiscretizedMorphism, mut json: Value) -> Result<Outcome> {
    match &a.out {
        Some(path) => {
            fs::write(path, m.to_json()).with_context(|| format!("writing {}", path.display()))?;
            json["out"] = json!(path.display().to_string());
        }
        None => json["morphism"] = serde_json::to_value(m)?,
    }
    Ok(Outcome {
        json,
        passed: true,
        csv: Some(path_csv(m)),
    })
}

fn components(src: &str) -> Vec<&str> {
    src.split(';').map(str::trim).collect()
}

fn flow(cfg: &RunConfig, a: &FlowArgs) -> Result<Outcome> {
    if let FlowOp::Concat = a.op {
        let m = concatenate(&read_morphism(&a.input, "in")?, &read_morphism(&a.input2, "in2")?)?;
        let mut json = json!({"intervals": m.intervals});
        if let Some(spec) = &a.structure {
            let target = Target::parse(cfg, spec)?;
            json["residual"] = json!(gauss_residual(&target.structure(), &m)?);
        }
        return emit_morphism(a, &m, json);
    }
    let target = Target::parse(cfg, &require(&a.structure, "structure")?)?;
    let s = target.structure();
    match a.op {
        FlowOp::Solve => {
            let (x0, eta, n) = match (&a.input, a.x0.as_ref().map(|v| &v.0)) {
                (Some(_), _) => {
                    let m = read_morphism(&a.input, "in")?;
                    (m.x[0].clone(), m.eta_u, m.intervals)
                }
                (None, Some(x0)) => {
                    let parts = components(&require(&a.eta, "eta")?)
                        .into_iter()
                        .map(|src| Function::parse(src, &["u"]))
                        .collect::<Result<Vec<_>, _>>()?;
                    let n = cfg.intervals;
                    let eta = (0..=n)
                        .map(|k| {
                            let u = k as f64 / n as f64;
                            parts.iter().map(|f| f.eval(&[u])).collect()
                        })
                        .collect::<Result<Vec<Vec<f64>>, _>>()?;
                    (x0.clone(), eta, n)
                }
                (None, None) => bail!("solve needs --in or --x0 with --eta"),
            };
            let m = solve_gauss(&s, &x0, &eta, n)?;
            let json = json!({"residual": gauss_residual(&s, &m)?, "end": m.end()});
            emit_morphism(a, &m, json)
        }
        FlowOp::Gauge => {
            let m = read_morphism(&a.input, "in")?;
            let beta = match &a.beta {
                Some(src) => GaugeField::parse(&components(src))?,
                None => GaugeField::zero(s.dim()),
            };
            let before = gauss_residual(&s, &m)?;
            let flowed = gauge_flow(&s, &m, &beta, cfg.steps)?;
            let mut json = json!({
                "residual_before": before,
                "residual_after": gauss_residual(&s, &flowed)?,
            });
            let mut passed = true;
            if !matches!(target, Target::Other(_)) {
                let (i0, i1) = (target.invariants(&m)?, target.invariants(&flowed)?);
                let drift = i0.distance(&i1);
                passed = drift <= DRIFT_TOLERANCE;
                json["invariants_before"] = target.invariants_json(&i0);
                json["invariants_after"] = target.invariants_json(&i1);
                json["drift"] = json!(drift);
                json["tolerance"] = json!(DRIFT_TOLERANCE);
                json["passed"] = json!(passed);
            }
            let mut out = emit_morphism(a, &flowed, json)?;
            out.passed = passed;
            Ok(out)
        }
        FlowOp::Invariants => {
            let m = read_morphism(&a.input, "in")?;
            let inv = target.invariants(&m)?;
            let mut json = target.invariants_json(&inv);
            json["residual"] = json!(gauss_residual(&s, &m)?);
            Ok(Outcome::ok(json))
        }
        FlowOp::Embed => {
            let m = match &target {
                Target::Planar(grp) => {
                    let g = GroupoidPoint2D::new(require(&a.x, "x")?, require(&a.pi, "pi")?);
                    grp.embed(&g, cfg.intervals, a.tapered)?
                }
                Target::Lie(spec) => {
                    let p = lie_point(spec, &values(&a.xi, "xi")?, &values(&a.g, "g")?)?;
                    from_groupoid(spec, &p, cfg.intervals, a.tapered)?
                }
                Target::Other(_) => bail!("embed needs a phi2d or Lie structure"),
            };
            let json = json!({"residual": gauss_residual(&s, &m)?});
            emit_morphism(a, &m, json)
        }
        FlowOp::Concat => unreachable!("handled above"),
    }
}

fn lie_spec(name: &str) -> Result<LieAlgebraSpec> {
    match LieAlgebraSpec::builtin(name) {
        Some(spec) => Ok(spec),
        None => Ok(LieAlgebraSpec::from_json(&read(name)?)?),
    }
}

fn lie_point(spec: &LieAlgebraSpec, xi: &[f64], g: &[f64]) -> Result<LieGroupoidPoint> {
    Ok(LieGroupoidPoint::new(xi.to_vec(), spec.element(g)?))
}

fn lie_point_json(spec: &LieAlgebraSpec, p: &LieGroupoidPoint) -> Value {
    json!({"xi": p.xi, "g": spec.element_values(&p.g)})
}

fn lie(cfg: &RunConfig, a: &LieArgs) -> Result<Outcome> {
    let spec = lie_spec(&a.spec)?;
    match a.op {
        LieOp::Roundtrip => {
            let p = lie_point(&spec, &values(&a.xi, "xi")?, &values(&a.g, "g")?)?;
            let m = from_groupoid(&spec, &p, cfg.intervals, a.tapered)?;
            let back = to_groupoid(&spec, &m)?;
            let deviation = back.distance(&p);
            let passed = deviation <= ROUNDTRIP_TOLERANCE;
            Ok(Outcome {
                json: json!({
                    "point": lie_point_json(&spec, &back),
                    "residual": gauss_residual(&spec.kk_structure(), &m)?,
                    "deviation": deviation,
                    "tolerance": ROUNDTRIP_TOLERANCE,
                    "passed": passed,
                }),
                passed,
                csv: None,
            })
        }
        LieOp::Mul => {
            let p = lie_point(&spec, &values(&a.xi, "xi")?, &values(&a.g, "g")?)?;
            let xi2 = match &a.xi2 {
                Some(v) => v.0.clone(),
                None => spec.right(&p)?,
            };
            let q = lie_point(&spec, &xi2, &values(&a.g2, "g2")?)?;
            let prod = multiply_lie(&spec, &p, &q, COMPOSABLE_TOLERANCE)?;
            let mut json = lie_point_json(&spec, &prod);
            json["inverse"] = lie_point_json(&spec, &inverse_lie(&spec, &prod)?);
            Ok(Outcome::ok(json))
        }
        LieOp::Holonomy => match (a.eta.as_ref().map(|v| &v.0), &a.input) {
            (Some(eta), _) => {
                let n = cfg.intervals;
                let xi = match &a.xi {
                    Some(xi) => xi.0.clone(),
                    None => vec![0.0; spec.dim()],
                };
                let m = DiscretizedMorphism::new(vec![xi; n + 1], vec![eta.clone(); n + 1])?;
                let h = holonomy(&spec, &m)?;
                let oracle = expm(&spec.matrix(eta));
                let deviation = (&h - &oracle).amax();
                let passed = deviation <= HOLONOMY_TOLERANCE;
                Ok(Outcome {
                    json: json!({
                        "g": spec.element_values(&h),
                        "deviation": deviation,
                        "tolerance": HOLONOMY_TOLERANCE,
                        "passed": passed,
                    }),
                    passed,
                    csv: None,
                })
            }
            (None, Some(_)) => {
                let m = read_morphism(&a.input, "in")?;
                Ok(Outcome::ok(json!({"g": spec.element_values(&holonomy(&spec, &m)?)})))
            }
            (None, None) => bail!("holonomy needs --eta or --in"),
        },
    }
}

fn radial(cfg: &RunConfig, a: &RadialArgs) -> Result<Outcome> {
    let profile = RadialProfile::parse(&a.f, a.range[0], a.range[1])?;
    let report = profile.analyze(cfg.samples)?;
    let mut csv = String::from("R,A,dA,C,fiber,period\n");
    for s in &report.samples {
        let fiber = serde_json::to_value(s.fiber)?;
        let fiber = fiber.as_str().unwrap_or_default();
        writeln!(csv, "{},{},{},{},{fiber},{}", s.r, s.a, s.da, s.c, s.period)?;
    }
    let mut json = serde_json::to_value(&report)?;
    json["f"] = json!(profile.source());
    Ok(Outcome {
        json,
        passed: true,
        csv: Some(csv),
    })
}

fn expression(a: &ExprArgs) -> Result<Outcome> {
    let vars: Vec<&str> = a.vars.split(',').map(str::trim).collect();
    let e = expr::parse(&a.expr, &vars)?;
    let eval = |e: &expr::Expr| -> Result<Option<f64>> {
        match &a.at {
            Some(at) => Ok(Some(e.eval(&at.0)?)),
            None => Ok(None),
        }
    };
    Ok(Outcome::ok(match a.op {
        ExprOp::Eval => {
            let at = values(&a.at, "at")?;
            if at.len() != vars.len() {
                bail!("--at has {} values for {} variables", at.len(), vars.len());
            }
            json!({"value": e.eval(&at)?})
        }
        ExprOp::Diff => {
            let wrt = match &a.wrt {
                Some(w) => w.as_str(),
                None if vars.len() == 1 => vars[0],
                None => bail!("--wrt is required with several variables"),
            };
            let i = vars
                .iter()
                .position(|v| *v == wrt)
                .ok_or_else(|| anyhow!("unknown variable {wrt:?}"))?;
            let d = e.diff(i);
            json!({"derivative": d.display(&vars).to_string(), "value": eval(&d)?})
        }
    }))
}
