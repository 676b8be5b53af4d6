use std::collections::BTreeMap;
use std::str::FromStr;

use duality_core::conedual::{builtin_model, ConeError, ConeFamily, Model};
use duality_core::distduality::{Distribution235, PseudoProductStructure};
use duality_core::scalar::{
    parse_expr, Chart, OpaqueFn, OpaqueRegistry, ScalarError, ScalarExpr, Symbol, Value,
};
use duality_core::vecfield::{OneForm, VectorField};
use num_rational::BigRational;
use serde_json::{Map, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Expression {
        path: String,
        #[source]
        source: ScalarError,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn schema(path: &str, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn invalid(path: &str, e: impl std::fmt::Display) -> ModelError {
    ModelError::Invalid {
        path: path.to_string(),
        message: e.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Distribution235,
    ConeFamily,
    PseudoProduct,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Distribution235 => "distribution235",
            ModelKind::ConeFamily => "cone-family",
            ModelKind::PseudoProduct => "pseudo-product",
        }
    }
}

#[derive(Clone, Debug)]
pub enum ModelBody {
    Distribution(Distribution235),
    Cone(ConeFamily),
    PseudoProduct(PseudoProductStructure),
}

/// A validated model file.
#[derive(Clone, Debug)]
pub struct ModelFile {
    pub name: String,
    pub description: Option<String>,
    pub kind: ModelKind,
    pub body: ModelBody,
    /// Half-width of the sample box in the base coordinates.
    pub half_width: BigRational,
    /// Half-width along the fiber coordinate (θ or t).
    pub fiber_half_width: BigRational,
    /// SHA-256 of the file text, hex encoded.
    pub hash: String,
}

pub fn content_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Obj<'a> {
    path: String,
    map: &'a Map<String, Json>,
}

impl<'a> Obj<'a> {
    fn new(path: &str, v: &'a Json, allowed: &[&str]) -> Result<Self, ModelError> {
        let map = v
            .as_object()
            .ok_or_else(|| schema(path, "expected an object"))?;
        for k in map.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(schema(&format!("{path}.{k}"), "unknown field"));
            }
        }
        Ok(Obj {
            path: path.to_string(),
            map,
        })
    }

    fn at(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn opt(&self, key: &str) -> Option<&'a Json> {
        self.map.get(key)
    }

    fn req(&self, key: &str) -> Result<&'a Json, ModelError> {
        self.map
            .get(key)
            .ok_or_else(|| schema(&self.at(key), "missing required field"))
    }

    fn str(&self, key: &str) -> Result<&'a str, ModelError> {
        self.req(key)?
            .as_str()
            .ok_or_else(|| schema(&self.at(key), "expected a string"))
    }

    fn opt_str(&self, key: &str) -> Result<Option<&'a str>, ModelError> {
        match self.opt(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| schema(&self.at(key), "expected a string")),
        }
    }

    fn strings(&self, key: &str) -> Result<Vec<&'a str>, ModelError> {
        string_list(&self.at(key), self.req(key)?)
    }
}

fn string_list<'a>(path: &str, v: &'a Json) -> Result<Vec<&'a str>, ModelError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema(path, "expected an array of strings"))?;
    arr.iter()
        .enumerate()
        .map(|(i, s)| {
            s.as_str()
                .ok_or_else(|| schema(&format!("{path}[{i}]"), "expected a string"))
        })
        .collect()
}

fn rational(path: &str, s: &str) -> Result<BigRational, ModelError> {
    BigRational::from_str(s.trim()).map_err(|_| schema(path, format!("`{s}` is not a rational")))
}

fn expr(
    path: &str,
    text: &str,
    chart: &Chart,
    reg: &OpaqueRegistry,
) -> Result<ScalarExpr, ModelError> {
    parse_expr(text, chart, reg).map_err(|source| ModelError::Expression {
        path: path.to_string(),
        source,
    })
}

fn field(
    path: &str,
    v: &Json,
    chart: &Chart,
    reg: &OpaqueRegistry,
) -> Result<VectorField, ModelError> {
    let texts = string_list(path, v)?;
    if texts.len() != chart.dim() {
        return Err(schema(
            path,
            format!("expected {} components, got {}", chart.dim(), texts.len()),
        ));
    }
    let coeffs = texts
        .iter()
        .enumerate()
        .map(|(i, t)| expr(&format!("{path}[{i}]"), t, chart, reg))
        .collect::<Result<Vec<_>, _>>()?;
    VectorField::new(chart, coeffs).map_err(|e| invalid(path, e))
}

fn chart(o: &Obj) -> Result<Chart, ModelError> {
    let names = o.strings("chart")?;
    Chart::new(&names).map_err(|e| invalid(&o.at("chart"), e))
}

fn point(o: &Obj, key: &str, dim: usize) -> Result<Vec<Value>, ModelError> {
    let texts = o.strings(key)?;
    if texts.len() != dim {
        return Err(schema(
            &o.at(key),
            format!("expected {dim} coordinates, got {}", texts.len()),
        ));
    }
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(Value::Rational(rational(
                &format!("{}[{i}]", o.at(key)),
                t,
            )?))
        })
        .collect()
}

/// Built-in functions plus the file's `opaque` declarations.
fn registry(o: &Obj) -> Result<OpaqueRegistry, ModelError> {
    let mut reg = OpaqueRegistry::with_builtins();
    let Some(list) = o.opt("opaque") else {
        return Ok(reg);
    };
    let path = o.at("opaque");
    let arr = list
        .as_array()
        .ok_or_else(|| schema(&path, "expected an array"))?;
    for (i, d) in arr.iter().enumerate() {
        let d = Obj::new(&format!("{path}[{i}]"), d, &["name", "param", "body"])?;
        let name = d.str("name")?;
        let param = d.str("param")?;
        let pc = Chart::new(&[param]).map_err(|e| invalid(&d.at("param"), e))?;
        let body = expr(&d.at("body"), d.str("body")?, &pc, &reg)?;
        let f = OpaqueFn::from_body(name, &Symbol::new(param), &body)
            .map_err(|e| invalid(&d.at("body"), e))?;
        reg.register(f);
    }
    Ok(reg)
}

const COMMON: [&str; 7] = [
    "name",
    "description",
    "kind",
    "chart",
    "base",
    "box",
    "opaque",
];

fn fields_for(extra: &[&'static str]) -> Vec<&'static str> {
    COMMON.iter().chain(extra).copied().collect()
}

pub fn parse_model(text: &str) -> Result<ModelFile, ModelError> {
    let root: Json = serde_json::from_str(text)?;
    let kind_text = root
        .get("kind")
        .and_then(Json::as_str)
        .ok_or_else(|| schema("$.kind", "missing required field"))?;
    let (kind, extra): (ModelKind, &[&str]) = match kind_text {
        "distribution235" => (ModelKind::Distribution235, &["frame"]),
        "cone-family" => (
            ModelKind::ConeFamily,
            &[
                "theta",
                "theta0",
                "contact_form",
                "components",
                "normal_form",
            ],
        ),
        "pseudo-product" => (ModelKind::PseudoProduct, &["K", "L"]),
        other => return Err(schema("$.kind", format!("unknown kind `{other}`"))),
    };
    let o = Obj::new("$", &root, &fields_for(extra))?;
    let name = o.str("name")?.to_string();
    let description = o.opt_str("description")?.map(str::to_string);
    let reg = registry(&o)?;
    let chart = chart(&o)?;
    let (mut half_width, mut fiber_half_width) = (
        BigRational::new(1.into(), 4.into()),
        BigRational::new(1.into(), 2.into()),
    );
    if let Some(b) = o.opt("box") {
        let b = Obj::new(&o.at("box"), b, &["half_width", "fiber_half_width"])?;
        if let Some(t) = b.opt_str("half_width")? {
            half_width = rational(&b.at("half_width"), t)?;
        }
        if let Some(t) = b.opt_str("fiber_half_width")? {
            fiber_half_width = rational(&b.at("fiber_half_width"), t)?;
        }
        let zero = BigRational::from_integer(0.into());
        if half_width <= zero || fiber_half_width <= zero {
            return Err(schema(&o.at("box"), "half-widths must be positive"));
        }
    }
    let base = point(&o, "base", chart.dim())?;
    let body = match kind {
        ModelKind::Distribution235 => {
            let f = Obj::new(&o.at("frame"), o.req("frame")?, &["eta1", "eta2"])?;
            let e1 = field(&f.at("eta1"), f.req("eta1")?, &chart, &reg)?;
            let e2 = field(&f.at("eta2"), f.req("eta2")?, &chart, &reg)?;
            let d = Distribution235::new(&chart, e1, e2, base)
                .map_err(|e| invalid(&o.at("frame"), e))?;
            ModelBody::Distribution(d)
        }
        ModelKind::ConeFamily => ModelBody::Cone(cone(&o, &chart, base, &reg)?),
        ModelKind::PseudoProduct => {
            let k = field(&o.at("K"), o.req("K")?, &chart, &reg)?;
            let l = field(&o.at("L"), o.req("L")?, &chart, &reg)?;
            let p = PseudoProductStructure::new(&chart, k, l, base)
                .map_err(|e| invalid(&o.at("K"), e))?;
            ModelBody::PseudoProduct(p)
        }
    };
    Ok(ModelFile {
        name,
        description,
        kind,
        body,
        half_width,
        fiber_half_width,
        hash: content_hash(text),
    })
}

fn cone(
    o: &Obj,
    chart: &Chart,
    base: Vec<Value>,
    reg: &OpaqueRegistry,
) -> Result<ConeFamily, ModelError> {
    let theta = o.str("theta")?;
    let z = chart
        .extended(theta)
        .map_err(|e| invalid(&o.at("theta"), e))?;
    let theta0 = Value::Rational(rational(&o.at("theta0"), o.str("theta0")?)?);
    let alpha_texts = o.strings("contact_form")?;
    if alpha_texts.len() != chart.dim() {
        return Err(schema(
            &o.at("contact_form"),
            format!("expected {} components", chart.dim()),
        ));
    }
    let alpha = OneForm::new(
        chart,
        alpha_texts
            .iter()
            .enumerate()
            .map(|(i, t)| expr(&format!("{}[{i}]", o.at("contact_form")), t, chart, reg))
            .collect::<Result<Vec<_>, _>>()?,
    )
    .map_err(|e| invalid(&o.at("contact_form"), e))?;
    let comps: [ScalarExpr; 4] = match (o.opt("components"), o.opt("normal_form")) {
        (Some(c), None) => {
            let c = Obj::new(&o.at("components"), c, &["A", "B", "S", "T"])?;
            let get = |k: &str| expr(&c.at(k), c.str(k)?, &z, reg);
            [get("A")?, get("B")?, get("S")?, get("T")?]
        }
        (None, Some(n)) => {
            let n = Obj::new(&o.at("normal_form"), n, &["model", "params"])?;
            let mut params = BTreeMap::new();
            if let Some(p) = n.opt("params") {
                let p = p
                    .as_object()
                    .ok_or_else(|| schema(&n.at("params"), "expected an object"))?;
                for (k, v) in p {
                    let s = v.as_str().ok_or_else(|| {
                        schema(&format!("{}.{k}", n.at("params")), "expected a string")
                    })?;
                    params.insert(k.clone(), s.to_string());
                }
            }
            let model = builtin_model(n.str("model")?, &params, reg).map_err(|e| match e {
                ConeError::Scalar(source) => ModelError::Expression {
                    path: n.at("params"),
                    source,
                },
                e => invalid(&n.at("model"), e),
            })?;
            let Model::Cone(f) = model else {
                return Err(schema(&n.at("model"), "not a cone normal form"));
            };
            if f.x_chart() != chart || f.theta().as_str() != theta {
                return Err(schema(
                    &o.at("chart"),
                    format!(
                        "normal forms use the chart {:?} with fiber `{}`",
                        f.x_chart().vars(),
                        f.theta()
                    ),
                ));
            }
            f.components().try_into().expect("four components")
        }
        (Some(_), Some(_)) => {
            return Err(schema(
                &o.at("components"),
                "give either components or normal_form",
            ))
        }
        (None, None) => return Err(schema(&o.at("components"), "missing required field")),
    };
    ConeFamily::new(chart, theta, comps, alpha, base, theta0).map_err(|e| invalid(&o.path, e))
}

/// A bundled model file.
pub struct Bundled {
    pub name: &'static str,
    pub text: &'static str,
}

pub const BUNDLED: [Bundled; 6] = [
    Bundled {
        name: "hilbert-cartan",
        text: include_str!("../models/hilbert-cartan.json"),
    },
    Bundled {
        name: "flat-cone",
        text: include_str!("../models/flat-cone.json"),
    },
    Bundled {
        name: "cubic-a",
        text: include_str!("../models/cubic-a.json"),
    },
    Bundled {
        name: "noncubic-bc",
        text: include_str!("../models/noncubic-bc.json"),
    },
    Bundled {
        name: "noncubic-bc-violating",
        text: include_str!("../models/noncubic-bc-violating.json"),
    },
    Bundled {
        name: "swapped-pseudo-product",
        text: include_str!("../models/swapped-pseudo-product.json"),
    },
];

pub fn bundled(name: &str) -> Option<&'static Bundled> {
    BUNDLED.iter().find(|b| b.name == name)
}
