//! Run reports: theoretical bounds next to measured settling times.

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::attracting_law::{
    settling_bounds_state_independent, transformed_params, AlParams, SettlingBounds,
};
use crate::config::{PreparedScenario, ReferenceBlock};
use crate::protocol::ProtocolKind;
use crate::simulator::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail(why) => write!(f, "FAIL ({why})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub kind: ProtocolKind,
    pub n_agents: usize,
    pub lambda2: f64,
    pub balance: Option<Vec<f64>>,
    /// Scalar law parameters obeyed by `sqrt(V)`; absent for the signed
    /// protocol, which has no settling-time theorem.
    pub transformed: Option<AlParams>,
    pub bounds: Option<SettlingBounds>,
    pub measured: Option<f64>,
    pub epsilon: f64,
    pub record_stride: f64,
    pub verdict: Verdict,
    pub reference: Option<ReferenceBlock>,
    pub csv_path: Option<PathBuf>,
    pub svg_path: Option<PathBuf>,
}

impl RunReport {
    /// PASS iff the run settled no later than the state-independent upper
    /// bound plus one record stride.
    pub fn new(prepared: &PreparedScenario, traj: &Trajectory) -> Self {
        let s = &prepared.scenario;
        let kind = s.protocol.kind();
        let transformed = match kind {
            ProtocolKind::SignedGal => None,
            _ => transformed_params(s.protocol.params(), prepared.lambda2, s.n()).ok(),
        };
        let bounds = transformed.as_ref().map(settling_bounds_state_independent);
        let measured = traj.settling_time;
        let stride = s.settings.record_stride;
        let verdict = match (measured, bounds) {
            (None, _) => Verdict::Fail(format!(
                "did not settle within epsilon = {:e} by t = {}",
                s.settings.epsilon, s.settings.horizon
            )),
            (Some(t), Some(b)) if t > b.upper + stride => Verdict::Fail(format!(
                "settled at {t:.4} s, after the upper bound {:.4} s",
                b.upper
            )),
            _ => Verdict::Pass,
        };
        Self {
            name: s.name.clone(),
            kind,
            n_agents: s.n(),
            lambda2: prepared.lambda2,
            balance: prepared.balance.clone(),
            transformed,
            bounds,
            measured,
            epsilon: s.settings.epsilon,
            record_stride: stride,
            verdict,
            reference: prepared.reference.clone(),
            csv_path: None,
            svg_path: None,
        }
    }

    /// One row of the reproduction summary table.
    pub fn summary_row(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        format!(
            "{:<18} {:<13} {:>8.4} {:>8} {:>8} {:>10} {}",
            self.name,
            self.kind.as_str(),
            self.lambda2,
            fmt_opt(self.bounds.map(|b| b.lower)),
            fmt_opt(self.bounds.map(|b| b.upper)),
            fmt_opt(self.measured),
            self.verdict
        )
    }

    pub fn summary_header() -> String {
        format!(
            "{:<18} {:<13} {:>8} {:>8} {:>8} {:>10} verdict",
            "scenario", "protocol", "lambda2", "T_lower", "T_upper", "settled"
        )
    }
}

fn with_reference(
    out: &mut String,
    key: &str,
    value: f64,
    reference: Option<f64>,
    tol: Option<f64>,
) {
    let _ = write!(out, "{key} = {value:.6}");
    if let Some(r) = reference {
        let _ = write!(out, "  (reference {r}");
        if let Some(tol) = tol {
            let ok = (value - r).abs() <= tol;
            let _ = write!(
                out,
                ", tolerance {tol:e}, {}",
                if ok { "match" } else { "MISMATCH" }
            );
        }
        out.push(')');
    }
    out.push('\n');
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let r = self.reference.as_ref();
        let _ = writeln!(out, "scenario = {}", self.name);
        let _ = writeln!(out, "protocol = {}", self.kind);
        let _ = writeln!(out, "agents = {}", self.n_agents);
        with_reference(
            &mut out,
            "lambda2",
            self.lambda2,
            r.and_then(|r| r.lambda2),
            r.and_then(|r| r.lambda2_tolerance),
        );
        if let Some(p) = &self.balance {
            let p: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "detail_balance = [{}]", p.join(", "));
        }
        if let Some(t) = &self.transformed {
            let _ = writeln!(out, "rho' = {:.6}", t.rho());
            let _ = writeln!(out, "kappa1' = {:.6}", t.kappa1());
            let _ = writeln!(out, "kappa2' = {:.6}", t.kappa2());
        }
        if let Some(b) = &self.bounds {
            let tol = r.and_then(|r| r.bound_tolerance);
            with_reference(
                &mut out,
                "lower_bound",
                b.lower,
                r.and_then(|r| r.lower),
                tol,
            );
            with_reference(
                &mut out,
                "upper_bound",
                b.upper,
                r.and_then(|r| r.upper),
                tol,
            );
        }
        let _ = writeln!(out, "epsilon = {:e}", self.epsilon);
        match self.measured {
            Some(t) => {
                let _ = writeln!(out, "settling_time = {t:.4}");
                if let Some(b) = &self.bounds {
                    // The network lower bound is not a theorem; informational only.
                    let side = if t < b.lower { "below" } else { "above" };
                    let _ = writeln!(out, "lower_bound_comparison = {side}");
                }
            }
            None => {
                let _ = writeln!(out, "settling_time = not settled");
            }
        }
        if let Some(p) = &self.csv_path {
            let _ = writeln!(out, "csv = {}", p.display());
        }
        if let Some(p) = &self.svg_path {
            let _ = writeln!(out, "svg = {}", p.display());
        }
        let _ = write!(out, "verdict = {}", self.verdict);
        f.write_str(&out)
    }
}
