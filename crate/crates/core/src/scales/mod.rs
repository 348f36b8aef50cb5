//! Scaling functions `g_i(x_i, t)` with analytic partial derivatives.
//!
//! A scale is an [`Expr`] over `x` and `t`; both partials are derived
//! symbolically when the scale is built, so the protocol divides by an exact
//! `∂g/∂x` rather than a finite-difference estimate.

mod expr;
mod parse;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use expr::{Expr, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("cannot parse scale {input:?} at offset {offset}: {message}")]
    Parse {
        input: String,
        offset: usize,
        message: String,
    },
    #[error("unknown scale setting {0:?} (expected C1, C2, C3 or C4)")]
    UnknownSetting(String),
    #[error("scale setting {setting} has no agent {index} (agents are numbered 1..=6)")]
    AgentIndex { setting: String, index: usize },
    #[error("malformed built-in scale reference {0:?} (expected e.g. \"builtin:C1:3\")")]
    BuiltinRef(String),
}

/// `g(x, t)` together with `∂g/∂x` and `∂g/∂t`.
#[derive(Debug, Clone)]
pub struct ScaleFunction {
    g: Expr,
    dg_dx: Expr,
    dg_dt: Expr,
}

impl PartialEq for ScaleFunction {
    fn eq(&self, other: &Self) -> bool {
        self.g == other.g
    }
}

impl ScaleFunction {
    pub fn new(g: Expr) -> Self {
        let dg_dx = g.derivative(Var::X);
        let dg_dt = g.derivative(Var::T);
        Self { g, dg_dx, dg_dt }
    }

    /// `g(x, t) = x`.
    pub fn identity() -> Self {
        Self::new(Expr::X)
    }

    pub fn parse(src: &str) -> Result<Self, ScaleError> {
        Ok(Self::new(parse::fold_constants(parse::parse_expr(src)?)))
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.g.eval(x, t)
    }

    #[inline]
    pub fn d_dx(&self, x: f64, t: f64) -> f64 {
        self.dg_dx.eval(x, t)
    }

    #[inline]
    pub fn d_dt(&self, x: f64, t: f64) -> f64 {
        self.dg_dt.eval(x, t)
    }

    pub fn is_time_invariant(&self) -> bool {
        !self.g.depends_on(Var::T)
    }

    pub fn expr(&self) -> &Expr {
        &self.g
    }

    pub fn dx_expr(&self) -> &Expr {
        &self.dg_dx
    }

    pub fn dt_expr(&self) -> &Expr {
        &self.dg_dt
    }
}

impl fmt::Display for ScaleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.g.fmt(f)
    }
}

impl FromStr for ScaleFunction {
    type Err = ScaleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// The four built-in scale settings, by agent (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleSetting {
    C1,
    C2,
    C3,
    C4,
}

const C1: [&str; 6] = [
    "(0.5*sin(2*pi*t) + 1)*(5*sin(0.2*x) + 2*x)",
    "(-0.5*sin(2*pi*t) - 1)*(2*sin(0.5*x) + 2*x)",
    "(-0.5*sin(2*pi*t) - 1)*(sin(x) + 2*x)",
    "(-0.5*sin(2*pi*t) - 1)*(5*cos(0.2*x) - 2*x)",
    "(0.5*sin(2*pi*t) + 1)*(2*cos(0.5*x) - 2*x)",
    "(0.5*sin(2*pi*t) + 1)*(cos(x) - 2*x)",
];

const C2: [&str; 6] = [
    "5*sin(0.2*x) + 2*x",
    "10*sin(0.5*x) + 10*x",
    "sin(x) + 2*x",
    "-5*cos(0.2*x) + 2*x",
    "-10*cos(0.5*x) + 10*x",
    "-cos(x) + 2*x",
];

const C3: [&str; 6] = [
    "(0.5*sin(2*pi*t) + 1)*(x + x/(1 + 0.1*x^2))",
    "(-0.5*sin(2*pi*t) - 1)*(x + x/(1 + 0.1*x^2))",
    "(-0.5*sin(2*pi*t) - 1)*(x + x/(1 + 0.1*x^2))",
    "(-0.5*sin(2*pi*t) - 1)*(x + x/(1 + 0.1*x^2))",
    "(0.5*sin(2*pi*t) + 1)*(x + x/(1 + 0.1*x^2))",
    "(0.5*sin(2*pi*t) + 1)*(x + x/(1 + 0.1*x^2))",
];

const C4: [&str; 6] = [
    "1*(x + x/(1 + 0.1*x^2))",
    "5*(x + x/(1 + 0.1*x^2))",
    "1*(x + x/(1 + 0.1*x^2))",
    "-1*(x + x/(1 + 0.1*x^2))",
    "-5*(x + x/(1 + 0.1*x^2))",
    "-1*(x + x/(1 + 0.1*x^2))",
];

impl ScaleSetting {
    pub const ALL: [ScaleSetting; 4] = [Self::C1, Self::C2, Self::C3, Self::C4];

    pub fn name(self) -> &'static str {
        match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::C4 => "C4",
        }
    }

    /// Source text of agent `index`'s scale (1-based).
    pub fn source(self, index: usize) -> Option<&'static str> {
        let table = match self {
            Self::C1 => &C1,
            Self::C2 => &C2,
            Self::C3 => &C3,
            Self::C4 => &C4,
        };
        index.checked_sub(1).and_then(|i| table.get(i)).copied()
    }
}

impl FromStr for ScaleSetting {
    type Err = ScaleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(Self::C1),
            "C2" => Ok(Self::C2),
            "C3" => Ok(Self::C3),
            "C4" => Ok(Self::C4),
            _ => Err(ScaleError::UnknownSetting(s.to_string())),
        }
    }
}

/// Scale of agent `agent_index` (1-based) in a built-in setting.
pub fn builtin_setting(name: &str, agent_index: usize) -> Result<ScaleFunction, ScaleError> {
    let setting: ScaleSetting = name.parse()?;
    let src = setting
        .source(agent_index)
        .ok_or_else(|| ScaleError::AgentIndex {
            setting: setting.name().to_string(),
            index: agent_index,
        })?;
    ScaleFunction::parse(src)
}

/// Resolves a per-agent scale entry: either `builtin:<setting>:<index>` or
/// an expression.
pub fn resolve_scale(entry: &str) -> Result<ScaleFunction, ScaleError> {
    match entry.trim().strip_prefix("builtin:") {
        Some(rest) => {
            let (name, idx) = rest
                .split_once(':')
                .ok_or_else(|| ScaleError::BuiltinRef(entry.to_string()))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| ScaleError::BuiltinRef(entry.to_string()))?;
            builtin_setting(name, idx)
        }
        None => ScaleFunction::parse(entry),
    }
}
