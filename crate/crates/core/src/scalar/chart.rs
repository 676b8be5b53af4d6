use std::fmt;
use std::sync::Arc;

use super::expr::Symbol;
use super::ScalarError;

/// Ordered list of pairwise distinct coordinate symbols.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Chart {
    vars: Arc<[Symbol]>,
}

impl Chart {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, ScalarError> {
        Self::from_symbols(names.iter().map(|n| Symbol::new(n.as_ref())).collect())
    }

    pub fn from_symbols(vars: Vec<Symbol>) -> Result<Self, ScalarError> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(ScalarError::DuplicateSymbol(v.to_string()));
            }
        }
        Ok(Chart { vars: vars.into() })
    }

    pub fn empty() -> Self {
        Chart {
            vars: Arc::from(Vec::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[Symbol] {
        &self.vars
    }

    pub fn var(&self, i: usize) -> &Symbol {
        &self.vars[i]
    }

    pub fn index_of(&self, sym: &Symbol) -> Option<usize> {
        self.vars.iter().position(|v| v == sym)
    }

    pub fn contains(&self, sym: &Symbol) -> bool {
        self.index_of(sym).is_some()
    }

    /// This chart with one more coordinate appended.
    pub fn extended(&self, name: &str) -> Result<Chart, ScalarError> {
        let mut vars = self.vars.to_vec();
        vars.push(Symbol::new(name));
        Chart::from_symbols(vars)
    }

    /// Concatenation of two charts.
    pub fn join(&self, other: &Chart) -> Result<Chart, ScalarError> {
        let mut vars = self.vars.to_vec();
        vars.extend(other.vars.iter().cloned());
        Chart::from_symbols(vars)
    }

    /// A fresh name derived from `base` that is not already a coordinate.
    pub fn fresh_name(&self, base: &str) -> String {
        let mut name = base.to_string();
        while self.contains(&Symbol::new(&name)) {
            name.push('_');
        }
        name
    }
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.vars.iter()).finish()
    }
}
