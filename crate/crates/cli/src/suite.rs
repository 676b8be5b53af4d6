use std::str::FromStr;
use std::time::Instant;

use duality_core::conedual::{
    check_lagrangian, check_nondegenerate, check_osculating_condition, prolong_cone, solve_u,
    ConeFamily, DirectionField,
};
use duality_core::distduality::{
    check_235, prolong_235, solve_e, symbol_algebra_at, verify_pseudo_product, Distribution235,
    Failure, FiberChart, PseudoProductStructure,
};
use duality_core::paths::{
    classify_biextremal, fibre_lift, verify_duality_batch, BiExtremalOptions, Classification,
    ControlSystem, DualityOptions, DualityReport, Side,
};
use duality_core::scalar::{SampleBox, Symbol, Value};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use crate::model::{ModelBody, ModelFile};
use crate::report::{
    assignment_json, box_json, float, floats_json, point_json, zero_test_json, CheckEntry, Report,
    Status,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Verify,
    Prolong,
    Duality,
    All,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Verify => "verify",
            Suite::Prolong => "prolong",
            Suite::Duality => "duality",
            Suite::All => "all",
        }
    }

    fn verify(&self) -> bool {
        matches!(self, Suite::Verify | Suite::All)
    }

    fn prolong(&self) -> bool {
        matches!(self, Suite::Prolong | Suite::All)
    }

    fn duality(&self) -> bool {
        matches!(self, Suite::Duality | Suite::All)
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verify" => Ok(Suite::Verify),
            "prolong" => Ok(Suite::Prolong),
            "duality" => Ok(Suite::Duality),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite `{s}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub suite: Suite,
    pub seed: u64,
    pub box_scale: BigRational,
    /// Record wall time per check. Off by default so reports stay byte-identical.
    pub timings: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            suite: Suite::All,
            seed: 0,
            box_scale: BigRational::from_integer(1.into()),
            timings: false,
        }
    }
}

/// Integration length for duality checks, in units of the first coordinate.
pub const DUALITY_LENGTH: f64 = 0.5;
/// Random start points per duality and fibre-lift check, besides the base point.
pub const RANDOM_STARTS: usize = 5;
/// Length of the lifted fibres used for classification.
const FIBRE_LENGTH: f64 = 0.25;

struct Outcome {
    pass: bool,
    detail: Json,
    witness: Option<Json>,
    certified_box: Option<Json>,
}

impl Outcome {
    fn new(pass: bool, detail: Json) -> Self {
        Outcome {
            pass,
            detail,
            witness: None,
            certified_box: None,
        }
    }

    fn witness(mut self, w: Option<Json>) -> Self {
        self.witness = w;
        self
    }

    fn certified(mut self, bx: &SampleBox) -> Self {
        self.certified_box = Some(box_json(bx));
        self
    }
}

struct Runner {
    timings: bool,
    checks: Vec<CheckEntry>,
}

impl Runner {
    fn run<F>(&mut self, name: &str, f: F)
    where
        F: FnOnce() -> Result<Outcome, String>,
    {
        let start = Instant::now();
        let result = f();
        let wall = self.timings.then(|| start.elapsed().as_secs_f64() * 1e3);
        let entry = match result {
            Ok(o) => {
                let status = if o.pass { Status::Pass } else { Status::Fail };
                let witness = match (status, o.witness) {
                    (Status::Fail, None) => Some(o.detail.clone()),
                    (_, w) => w,
                };
                CheckEntry {
                    name: name.to_string(),
                    status,
                    detail: o.detail,
                    witness,
                    certified_box: o.certified_box,
                    wall_time_ms: wall,
                }
            }
            Err(e) => CheckEntry {
                name: name.to_string(),
                status: Status::Error,
                detail: json!({ "error": e }),
                witness: None,
                certified_box: None,
                wall_time_ms: wall,
            },
        };
        self.checks.push(entry);
    }

    /// Records an error for a check whose input could not be built.
    fn blocked(&mut self, name: &str, why: &str) {
        self.run(name, || Err(why.to_string()));
    }
}

fn rational_base(base: &[Value]) -> Result<Vec<BigRational>, String> {
    base.iter()
        .map(|v| {
            v.as_rational()
                .cloned()
                .ok_or_else(|| "base point must be rational".to_string())
        })
        .collect()
}

/// The box base ± half-width, with the last `fibers` coordinates using the fiber half-width.
fn sample_box(
    vars: &[Symbol],
    base: &[Value],
    hw: &BigRational,
    fiber_hw: &BigRational,
    fibers: usize,
) -> Result<SampleBox, String> {
    let c = rational_base(base)?;
    let n = vars.len();
    let sides = vars
        .iter()
        .zip(&c)
        .enumerate()
        .map(|(i, (s, c))| {
            let h = if i + fibers >= n { fiber_hw } else { hw };
            (s.clone(), c - h, c + h)
        })
        .collect();
    SampleBox::new(sides).map_err(|e| e.to_string())
}

/// Random rational points in the box, on a grid of 1/16 of each half-width.
fn random_points(bx: &SampleBox, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Value>> {
    (0..n)
        .map(|_| {
            bx.sides()
                .iter()
                .map(|(_, lo, hi)| {
                    let mid = (lo + hi) / BigRational::from_integer(2.into());
                    let h = (hi - lo) / BigRational::from_integer(2.into());
                    let k = rng.random_range(-16i64..=16);
                    Value::Rational(mid + h * BigRational::new(k.into(), 16.into()))
                })
                .collect()
        })
        .collect()
}

struct Ctx {
    hw: BigRational,
    fiber_hw: BigRational,
    rng: ChaCha8Rng,
}

pub fn run_suite(model: &ModelFile, opts: &SuiteOptions) -> Report {
    let mut ctx = Ctx {
        hw: &model.half_width * &opts.box_scale,
        fiber_hw: &model.fiber_half_width * &opts.box_scale,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
    };
    let mut r = Runner {
        timings: opts.timings,
        checks: Vec::new(),
    };
    let mut notes = Vec::new();
    match &model.body {
        ModelBody::Distribution(d) => distribution_suite(&mut ctx, &mut r, d, opts.suite),
        ModelBody::Cone(f) => cone_suite(&mut ctx, &mut r, f, opts.suite, &mut notes),
        ModelBody::PseudoProduct(p) => {
            if opts.suite.verify() || opts.suite.prolong() {
                pseudo_checks(&ctx, &mut r, p);
            }
            if opts.suite.duality() {
                fibre_checks(&mut ctx, &mut r, p);
            }
        }
    }
    Report {
        model_name: model.name.clone(),
        model_kind: model.kind.as_str().to_string(),
        model_hash: model.hash.clone(),
        suite: opts.suite.as_str().to_string(),
        seed: opts.seed,
        box_scale: opts.box_scale.to_string(),
        checks: r.checks,
        notes,
    }
}

fn distribution_suite(ctx: &mut Ctx, r: &mut Runner, d: &Distribution235, suite: Suite) {
    if suite.verify() {
        r.run("check_235", || {
            let bx = sample_box(d.chart().vars(), d.base(), &ctx.hw, &ctx.fiber_hw, 0)?;
            let rep = check_235(d, &bx).map_err(|e| e.to_string())?;
            let witness = rep
                .witness
                .as_ref()
                .map(|(p, ranks)| json!({ "point": point_json(p), "ranks": ranks }));
            Ok(Outcome::new(
                rep.pass,
                json!({ "growth": rep.growth, "samples": rep.samples }),
            )
            .witness(witness)
            .certified(&bx))
        });
    }
    if !(suite.prolong() || suite.duality()) {
        return;
    }
    let prolongation = prolong_235(d, &BigRational::from_integer(0.into()), FiberChart::Affine)
        .map_err(|e| e.to_string());
    if suite.prolong() {
        r.run("prolong_235", || {
            let p = prolongation.as_ref().map_err(|e| e.clone())?;
            Ok(Outcome::new(
                true,
                json!({ "growth": p.flag.growth(), "fiber": p.fiber.to_string() }),
            ))
        });
    }
    let solved = prolongation.as_ref().map_err(|e| e.clone()).and_then(|p| {
        let zbox = sample_box(p.chart.vars(), &p.base, &ctx.hw, &ctx.fiber_hw, 1)?;
        let s = solve_e(p, &zbox).map_err(|e| e.to_string())?;
        Ok((zbox, s))
    });
    if suite.prolong() {
        r.run("solve_e", || {
            let (zbox, s) = solved.as_ref().map_err(|e| e.clone())?;
            let witness = (!s.self_check.is_zero()).then(|| zero_test_json(&s.self_check));
            let pass = s.expr.is_some() && s.self_check.is_zero();
            Ok(Outcome::new(
                pass,
                json!({
                    "e": s.expr.as_ref().map(|e| e.to_string()),
                    "self_check": zero_test_json(&s.self_check),
                    "warning": s.warning,
                    "table_points": s.table.len(),
                }),
            )
            .witness(witness)
            .certified(zbox))
        });
    }
    let structure = match (&prolongation, &solved) {
        (Ok(p), Ok((_, s))) => {
            PseudoProductStructure::from_prolongation(p, s).map_err(|e| e.to_string())
        }
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    if suite.prolong() {
        match &structure {
            Ok(ps) => pseudo_checks(ctx, r, ps),
            Err(e) => r.blocked("pseudo_product", e),
        }
    }
    if suite.duality() {
        match (&structure, ControlSystem::from_distribution(d)) {
            (Ok(ps), Ok(cs)) => {
                duality_checks(ctx, r, ps, Side::K, &cs);
                fibre_checks(ctx, r, ps);
            }
            (Err(e), _) => r.blocked("duality", &format!("no pseudo-product structure: {e}")),
            (_, Err(e)) => r.blocked("duality", &e.to_string()),
        }
    }
}

fn cone_suite(
    ctx: &mut Ctx,
    r: &mut Runner,
    f: &ConeFamily,
    suite: Suite,
    notes: &mut Vec<String>,
) {
    let zbox = {
        let mut base = f.x0().to_vec();
        base.push(f.theta0().clone());
        sample_box(f.z_chart().vars(), &base, &ctx.hw, &ctx.fiber_hw, 1)
    };
    let zbox = match zbox {
        Ok(b) => b,
        Err(e) => {
            r.blocked("cone_box", &e);
            return;
        }
    };
    let mut condition = None;
    if suite.verify() {
        r.run("nondegenerate", || {
            let ok = check_nondegenerate(f, f.x0()).map_err(|e| e.to_string())?;
            let detail = json!({ "point": point_json(f.x0()), "theta_samples": 17 });
            let witness = (!ok).then(|| detail.clone());
            Ok(Outcome::new(ok, detail).witness(witness))
        });
        r.run("lagrangian", || {
            let s = match f.theta0() {
                Value::Rational(q) => DirectionField::constant(q.clone()),
                Value::Real(_) => return Err("θ₀ must be rational".into()),
            };
            let rep = check_lagrangian(f, &s).map_err(|e| e.to_string())?;
            let witness = [&rep.alpha_zeta2, &rep.alpha_zeta3, &rep.dalpha]
                .into_iter()
                .find(|z| !z.is_zero())
                .map(zero_test_json)
                .or_else(|| (!rep.contact).then(|| json!({ "contact": false })));
            Ok(Outcome::new(
                rep.pass,
                json!({
                    "contact": rep.contact,
                    "alpha_zeta2": zero_test_json(&rep.alpha_zeta2),
                    "alpha_zeta3": zero_test_json(&rep.alpha_zeta3),
                    "dalpha_zeta2_zeta3": zero_test_json(&rep.dalpha),
                    "all_sections": rep.all_sections,
                }),
            )
            .witness(witness)
            .certified(&rep.certified_box))
        });
    }
    if suite.verify() || f.is_cubic().unwrap_or(false) {
        let rep = check_osculating_condition(f, &zbox);
        condition = rep.as_ref().ok().map(|c| c.pass);
        if suite.verify() {
            r.run("osculating_condition", || {
                let rep = rep.map_err(|e| e.to_string())?;
                let residual: serde_json::Map<String, Json> = rep
                    .residual
                    .iter()
                    .map(|(s, e)| (s.to_string(), json!(e.to_string())))
                    .collect();
                let witness = rep
                    .witness
                    .as_ref()
                    .map(|(p, v)| json!({ "point": assignment_json(p), "value": float(*v) }));
                Ok(Outcome::new(
                    rep.pass,
                    json!({ "bracket": rep.bracket.to_string(), "residual": residual }),
                )
                .witness(witness)
                .certified(&zbox))
            });
        }
    }
    if f.is_cubic().unwrap_or(false) {
        let outcome = match condition {
            Some(true) => "holds",
            Some(false) => "fails",
            None => "could not be decided",
        };
        notes.push(format!(
            "open question: for the cubic normal form the literature states the osculating \
             condition holds if and only if a is not identically zero; here it {outcome}. \
             The computed outcome is recorded, not asserted."
        ));
    }
    if !(suite.prolong() || suite.duality()) {
        return;
    }
    if suite.prolong() {
        r.run("solve_u", || {
            let s = solve_u(f, &zbox).map_err(|e| e.to_string())?;
            let witness = (!s.self_check.is_zero()).then(|| zero_test_json(&s.self_check));
            Ok(Outcome::new(
                s.self_check.is_zero(),
                json!({
                    "u": s.expr.to_string(),
                    "self_check": zero_test_json(&s.self_check),
                    "max_residual": float(s.max_residual),
                }),
            )
            .witness(witness)
            .certified(&zbox))
        });
    }
    let structure = prolong_cone(f, &zbox);
    if suite.prolong() {
        r.run("prolong_cone", || {
            let p = structure.as_ref().map_err(|e| e.to_string())?;
            Ok(Outcome::new(
                true,
                json!({ "K": p.k().to_string(), "L": p.l().to_string(), "growth": p.flag().growth() }),
            ))
        });
        if let Ok(p) = &structure {
            pseudo_checks(ctx, r, p);
        }
    }
    if suite.duality() {
        match (&structure, ControlSystem::from_cone(f)) {
            (Ok(p), Ok(cs)) => {
                duality_checks(ctx, r, p, Side::L, &cs);
                fibre_checks(ctx, r, p);
            }
            (Err(e), _) => r.blocked("duality", &format!("no pseudo-product structure: {e}")),
            (_, Err(e)) => r.blocked("duality", &e.to_string()),
        }
    }
}

fn failure_json(f: &Failure) -> Json {
    match f {
        Failure::NotContained {
            generator,
            residual,
        } => {
            json!({ "not_contained": { "generator": generator, "residual": floats_json(residual) } })
        }
        Failure::RankDeficit { rank, expected } => {
            json!({ "rank_deficit": { "rank": rank, "expected": expected } })
        }
    }
}

fn pseudo_checks(ctx: &Ctx, r: &mut Runner, p: &PseudoProductStructure) {
    let bx = sample_box(p.chart().vars(), p.base(), &ctx.hw, &ctx.fiber_hw, 1);
    let rep = bx
        .as_ref()
        .map_err(|e| e.clone())
        .and_then(|bx| verify_pseudo_product(p, bx).map_err(|e| e.to_string()));
    match rep {
        Ok(rep) => {
            for c in &rep.conditions {
                r.run(&format!("pseudo_product.condition_{}", c.condition.index), || {
                    let witness = c.witness.as_ref().map(|w| {
                        json!({ "point": point_json(&w.point), "failure": failure_json(&w.failure) })
                    });
                    let mut o = Outcome::new(
                        c.pass,
                        json!({ "relation": c.condition.label(), "samples": rep.samples }),
                    )
                    .witness(witness);
                    if let Ok(bx) = &bx {
                        o = o.certified(bx);
                    }
                    Ok(o)
                });
            }
        }
        Err(e) => r.blocked("pseudo_product", &e),
    }
    r.run("symbol_algebra", || {
        let s = symbol_algebra_at(p, p.base()).map_err(|e| e.to_string())?;
        let relations: serde_json::Map<String, Json> = s
            .relations
            .iter()
            .map(|rel| (rel.label.clone(), json!(rel.holds)))
            .collect();
        let witness = s
            .first_failure()
            .map(|l| json!({ "point": point_json(&s.point), "relation": l }));
        Ok(Outcome::new(
            s.matches_model(),
            json!({ "point": point_json(&s.point), "relations": relations }),
        )
        .witness(witness))
    });
}

fn structure_box(ctx: &Ctx, p: &PseudoProductStructure) -> Result<SampleBox, String> {
    sample_box(p.chart().vars(), p.base(), &ctx.hw, &ctx.fiber_hw, 1)
}

fn duality_entry(z0: &[Value], rep: DualityReport, tol: f64) -> Outcome {
    let (mut worst, mut at) = (0.0, 0);
    for (i, (a, b)) in rep.leaf.iter().zip(&rep.extremal.states).enumerate() {
        let d = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if d > worst {
            worst = d;
            at = i;
        }
    }
    let witness = (!rep.pass).then(|| {
        json!({
            "parameter": float(rep.grid[at]),
            "leaf": floats_json(&rep.leaf[at]),
            "extremal": floats_json(&rep.extremal.states[at]),
        })
    });
    Outcome::new(
        rep.pass,
        json!({
            "side": rep.side.to_string(),
            "start": point_json(z0),
            "sup_distance": float(rep.sup_distance),
            "tolerance": float(tol),
            "length": float(DUALITY_LENGTH),
            "interval": [float(rep.interval.0), float(rep.interval.1)],
            "grid_points": rep.grid.len(),
            "max_constraint_residual": float(rep.extremal.max_residual()),
        }),
    )
    .witness(witness)
}

fn duality_checks(
    ctx: &mut Ctx,
    r: &mut Runner,
    p: &PseudoProductStructure,
    side: Side,
    cs: &ControlSystem,
) {
    let bx = match structure_box(ctx, p) {
        Ok(b) => b,
        Err(e) => return r.blocked("duality", &e),
    };
    let mut starts = vec![p.base().to_vec()];
    starts.extend(random_points(&bx, RANDOM_STARTS, &mut ctx.rng));
    let opts = DualityOptions::default();
    let results = verify_duality_batch(p, side, cs, &starts, DUALITY_LENGTH, &opts);
    for (i, (z0, res)) in starts.iter().zip(results).enumerate() {
        r.run(&format!("duality.start_{i}"), || {
            let rep = res.map_err(|e| e.to_string())?;
            Ok(duality_entry(z0, rep, opts.tol))
        });
    }
}

fn fibre_checks(ctx: &mut Ctx, r: &mut Runner, p: &PseudoProductStructure) {
    let bx = match structure_box(ctx, p) {
        Ok(b) => b,
        Err(e) => return r.blocked("asymmetry", &e),
    };
    let starts = random_points(&bx, RANDOM_STARTS, &mut ctx.rng);
    let opts = BiExtremalOptions::default();
    for (side, label, expected) in [
        (Side::L, "l_fibre", Classification::RegularSingular),
        (Side::K, "k_fibre", Classification::TotallyIrregular),
    ] {
        for (i, z0) in starts.iter().enumerate() {
            r.run(&format!("asymmetry.{label}_{i}"), || {
                let tr = fibre_lift(p, side, z0, FIBRE_LENGTH, &opts).map_err(|e| e.to_string())?;
                let c = classify_biextremal(p.flag(), &tr).map_err(|e| e.to_string())?;
                Ok(Outcome::new(
                    c.tag == expected,
                    json!({
                        "start": point_json(z0),
                        "expected": expected.as_str(),
                        "tag": c.tag.as_str(),
                        "d1_residual": float(c.d1_residual),
                        "d2_residual": float(c.d2_residual),
                        "d2_min": float(c.d2_min),
                    }),
                ))
            });
        }
    }
}
