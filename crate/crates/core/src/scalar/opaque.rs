use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use super::expr::{ScalarExpr, Symbol};
use super::ScalarError;

type Evaluator = Arc<dyn Fn(f64) -> Option<f64> + Send + Sync>;

/// How an opaque unary function differentiates.
#[derive(Clone, Debug)]
pub enum Derivative {
    /// f' is another opaque function.
    Opaque(Arc<OpaqueFn>),
    /// f'(u) given as an expression in [`OpaqueFn::placeholder`].
    Template(ScalarExpr),
}

/// A smooth unary function known only through a numeric evaluator and a derivative rule.
pub struct OpaqueFn {
    name: String,
    eval: Evaluator,
    derivative: OnceLock<Derivative>,
}

impl OpaqueFn {
    pub fn new<F>(name: &str, eval: F) -> Arc<Self>
    where
        F: Fn(f64) -> Option<f64> + Send + Sync + 'static,
    {
        Arc::new(OpaqueFn {
            name: name.to_string(),
            eval: Arc::new(eval),
            derivative: OnceLock::new(),
        })
    }

    /// Builds an opaque function from a body expression in one parameter. The body is
    /// compiled for evaluation and differentiated symbolically for the derivative rule.
    pub fn from_body(
        name: &str,
        param: &Symbol,
        body: &ScalarExpr,
    ) -> Result<Arc<Self>, ScalarError> {
        let compiled = super::eval::CompiledExpr::compile(body, std::slice::from_ref(param))?;
        let placeholder = Self::placeholder();
        let deriv =
            super::differentiate(body, param)?.substitute(param, &ScalarExpr::var(&placeholder));
        let f = OpaqueFn::new(name, move |x| {
            let v = compiled.eval(&[x]);
            v.is_finite().then_some(v)
        });
        f.set_derivative(Derivative::Template(deriv));
        Ok(f)
    }

    /// The bound variable used by derivative templates.
    pub fn placeholder() -> Symbol {
        Symbol::new("__arg")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        (self.eval)(x)
    }

    /// Sets the derivative rule. Only the first call has an effect.
    pub fn set_derivative(&self, rule: Derivative) {
        let _ = self.derivative.set(rule);
    }

    pub fn derivative(&self) -> Option<&Derivative> {
        self.derivative.get()
    }

    /// f'(arg) as an expression.
    pub fn derivative_at(&self, arg: &ScalarExpr) -> Result<ScalarExpr, ScalarError> {
        match self.derivative() {
            Some(Derivative::Opaque(g)) => Ok(ScalarExpr::apply(g, arg.clone())),
            Some(Derivative::Template(t)) => Ok(t.substitute(&Self::placeholder(), arg)),
            None => Err(ScalarError::UnregisteredDerivative(self.name.clone())),
        }
    }
}

impl fmt::Debug for OpaqueFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpaqueFn")
            .field("name", &self.name)
            .finish()
    }
}

/// Name -> opaque function table used while parsing. Populated at setup, read-only afterwards.
#[derive(Clone, Debug, Default)]
pub struct OpaqueRegistry {
    funcs: BTreeMap<String, Arc<OpaqueFn>>,
}

impl OpaqueRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with `sin`, `cos`, `exp` and `ln`.
    pub fn with_builtins() -> Self {
        let u = ScalarExpr::var(&OpaqueFn::placeholder());
        let sin = OpaqueFn::new("sin", |x| Some(x.sin()));
        let cos = OpaqueFn::new("cos", |x| Some(x.cos()));
        let exp = OpaqueFn::new("exp", |x| Some(x.exp()));
        let ln = OpaqueFn::new("ln", |x| (x > 0.0).then(|| x.ln()));
        sin.set_derivative(Derivative::Template(ScalarExpr::apply(&cos, u.clone())));
        cos.set_derivative(Derivative::Template(-ScalarExpr::apply(&sin, u.clone())));
        exp.set_derivative(Derivative::Opaque(exp.clone()));
        ln.set_derivative(Derivative::Template(u.recip()));
        let mut reg = Self::new();
        for f in [sin, cos, exp, ln] {
            reg.funcs.insert(f.name().to_string(), f);
        }
        reg
    }

    pub fn register(&mut self, f: Arc<OpaqueFn>) {
        self.funcs.insert(f.name().to_string(), f);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<OpaqueFn>> {
        self.funcs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.funcs.keys().map(|s| s.as_str())
    }
}
