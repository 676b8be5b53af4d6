use std::fmt::Write;

use duality_core::scalar::{SampleBox, Value, ZeroTest};
use num_rational::BigRational;
use serde_json::{json, Map, Value as Json};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckEntry {
    pub name: String,
    pub status: Status,
    pub detail: Json,
    pub witness: Option<Json>,
    pub certified_box: Option<Json>,
    pub wall_time_ms: Option<f64>,
}

impl CheckEntry {
    fn to_json(&self) -> Json {
        let mut m = Map::new();
        m.insert("name".into(), json!(self.name));
        m.insert("status".into(), json!(self.status.as_str()));
        m.insert("detail".into(), self.detail.clone());
        m.insert("witness".into(), self.witness.clone().unwrap_or(Json::Null));
        m.insert(
            "certified_box".into(),
            self.certified_box.clone().unwrap_or(Json::Null),
        );
        if let Some(t) = self.wall_time_ms {
            m.insert("wall_time_ms".into(), json!(t));
        }
        Json::Object(m)
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub model_name: String,
    pub model_kind: String,
    pub model_hash: String,
    pub suite: String,
    pub seed: u64,
    pub box_scale: String,
    pub checks: Vec<CheckEntry>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn count(&self, s: Status) -> usize {
        self.checks.iter().filter(|c| c.status == s).count()
    }

    /// 0 when every check passed, 2 when any errored, otherwise 1.
    pub fn exit_code(&self) -> i32 {
        if self.count(Status::Error) > 0 {
            2
        } else if self.count(Status::Fail) > 0 {
            1
        } else {
            0
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Json {
        json!({
            "tool": { "name": "g2dual", "version": env!("CARGO_PKG_VERSION") },
            "model": {
                "name": self.model_name,
                "kind": self.model_kind,
                "sha256": self.model_hash,
            },
            "suite": self.suite,
            "seed": self.seed,
            "box_scale": self.box_scale,
            "checks": self.checks.iter().map(CheckEntry::to_json).collect::<Vec<_>>(),
            "notes": self.notes,
            "summary": {
                "pass": self.count(Status::Pass),
                "fail": self.count(Status::Fail),
                "error": self.count(Status::Error),
            },
        })
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = canonical_json(&self.to_json());
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "model {} ({}) sha256 {}",
            self.model_name, self.model_kind, self.model_hash
        );
        let _ = writeln!(
            s,
            "suite {} seed {} box scale {}",
            self.suite, self.seed, self.box_scale
        );
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let _ = write!(s, "{:<width$}  {:<5}", c.name, c.status.as_str());
            if let Some(w) = &c.witness {
                let _ = write!(s, "  witness {}", canonical_json(w));
            } else if c.status == Status::Error {
                let _ = write!(s, "  {}", canonical_json(&c.detail));
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(
            s,
            "{} pass, {} fail, {} error",
            self.count(Status::Pass),
            self.count(Status::Fail),
            self.count(Status::Error)
        );
        s
    }
}

/// Compact JSON with sorted keys and floats printed with 17 significant digits.
pub fn canonical_json(v: &Json) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Json, out: &mut String) {
    match v {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let x = n.as_f64().expect("finite number");
                let _ = write!(out, "{x:.16e}");
            }
        }
        Json::String(s) => out.push_str(&Json::String(s.clone()).to_string()),
        Json::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        Json::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Json::String((*k).clone()).to_string());
                out.push(':');
                write_canonical(&m[*k], out);
            }
            out.push('}');
        }
    }
}

/// Exact values as rational strings, floats as numbers (non-finite ones as null).
pub fn value_json(v: &Value) -> Json {
    match v {
        Value::Rational(q) => json!(q.to_string()),
        Value::Real(x) => float(*x),
    }
}

pub fn point_json(p: &[Value]) -> Json {
    Json::Array(p.iter().map(value_json).collect())
}

pub fn floats_json(v: &[f64]) -> Json {
    Json::Array(v.iter().map(|x| float(*x)).collect())
}

pub fn float(x: f64) -> Json {
    serde_json::Number::from_f64(x).map_or(Json::Null, Json::Number)
}

pub fn box_json(bx: &SampleBox) -> Json {
    Json::Array(
        bx.sides()
            .iter()
            .map(|(s, lo, hi)| json!({ "coordinate": s.to_string(), "lo": lo.to_string(), "hi": hi.to_string() }))
            .collect(),
    )
}

pub fn assignment_json(w: &[(duality_core::scalar::Symbol, BigRational)]) -> Json {
    let mut m = Map::new();
    for (s, q) in w {
        m.insert(s.to_string(), json!(q.to_string()));
    }
    Json::Object(m)
}

pub fn zero_test_json(z: &ZeroTest) -> Json {
    match z {
        ZeroTest::ProvablyZero => json!("provably-zero"),
        ZeroTest::NumericallyZero => json!("numerically-zero"),
        ZeroTest::NonZero { witness, value } => json!({
            "nonzero": { "point": assignment_json(witness), "value": float(*value) }
        }),
    }
}
