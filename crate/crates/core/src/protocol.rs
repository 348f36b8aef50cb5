//! Distributed scaled-consensus protocols.
//!
//! For agent `i` with coupling error `e_i = Σ_j a_ij (g_j - g_i)`:
//!
//! ```text
//! u_i = ( k1 e_i^g1 + k2 e_i^g2 + rho e_i - ∂g_i/∂t ) / (∂g_i/∂x_i)
//! ```
//!
//! Powers are signed odd-ratio powers. The double-power protocol is the
//! `rho = 0` case. The signed protocol replaces `g_i` inside the difference by
//! `sgn(a_ij) g_i` so that antagonistic neighbours agree in modulus with
//! opposite signs. Directed graphs enter through their mirror weights
//! `p_i a_ij`, so nothing below branches on directedness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attracting_law::{signed_pow, AlParams};
use crate::linalg::SquareMatrix;
use crate::scales::ScaleFunction;

/// Smallest admissible `|∂g_i/∂x_i|`.
pub const DERIVATIVE_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("coupling weights must be symmetric for the {0} protocol (max asymmetry {1:e})")]
    Asymmetric(ProtocolKind, f64),
    #[error("negative coupling weight a[{i}][{j}] = {value} requires the signed-gal protocol")]
    NegativeWeight { i: usize, j: usize, value: f64 },
    #[error("{scales} scales for {agents} agents")]
    ScaleCount { scales: usize, agents: usize },
    #[error(
        "derivative guard: |dg/dx| = {derivative:e} < {DERIVATIVE_GUARD:e} for agent {} at t = {t}, x = {x}",
        agent + 1
    )]
    DerivativeGuard {
        agent: usize,
        t: f64,
        x: f64,
        derivative: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    /// Three-term generic attracting-law protocol.
    Gal,
    /// Two-term protocol (`rho` forced to 0).
    DoublePower,
    /// Generic protocol over signed (cooperative/antagonistic) weights.
    SignedGal,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gal => "gal",
            Self::DoublePower => "double-power",
            Self::SignedGal => "signed-gal",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gal" => Ok(Self::Gal),
            "double-power" | "dp" => Ok(Self::DoublePower),
            "signed-gal" => Ok(Self::SignedGal),
            _ => Err(format!(
                "unknown protocol {s:?} (expected gal, double-power or signed-gal)"
            )),
        }
    }
}

/// A protocol bound to its coupling weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    kind: ProtocolKind,
    params: AlParams,
    weights: SquareMatrix,
    /// Nonzero couplings per agent: `(j, a_ij, sgn(a_ij))`.
    neighbors: Vec<Vec<(usize, f64, f64)>>,
}

impl ProtocolSpec {
    pub fn new(
        kind: ProtocolKind,
        params: AlParams,
        weights: SquareMatrix,
    ) -> Result<Self, ProtocolError> {
        let params = match kind {
            ProtocolKind::DoublePower => {
                params.with_rho(0.0).expect("rho = 0 is always admissible")
            }
            _ => params,
        };
        let n = weights.dim();
        if kind != ProtocolKind::SignedGal {
            let asym = weights.asymmetry();
            if asym > 1e-12 * weights.max_abs().max(1.0) {
                return Err(ProtocolError::Asymmetric(kind, asym));
            }
            for i in 0..n {
                for j in 0..n {
                    if weights[(i, j)] < 0.0 {
                        return Err(ProtocolError::NegativeWeight {
                            i,
                            j,
                            value: weights[(i, j)],
                        });
                    }
                }
            }
        }
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && weights[(i, j)] != 0.0)
                    .map(|j| (j, weights[(i, j)], weights[(i, j)].signum()))
                    .collect()
            })
            .collect();
        Ok(Self {
            kind,
            params,
            weights,
            neighbors,
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn params(&self) -> &AlParams {
        &self.params
    }

    pub fn weights(&self) -> &SquareMatrix {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.dim()
    }

    /// Coupling error `e_i = Σ_j a_ij (g_j - sgn(a_ij) g_i)`.
    #[inline]
    pub fn coupling_error(&self, i: usize, g: &[f64]) -> f64 {
        let gi = g[i];
        let mut e = 0.0;
        for &(j, a, s) in &self.neighbors[i] {
            e += a * (g[j] - s * gi);
        }
        e
    }

    pub fn coupling_errors(&self, g: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.coupling_error(i, g)).collect()
    }

    /// Desired rate of change of the scaled state for coupling error `e`.
    #[inline]
    pub fn attracting_rate(&self, e: f64) -> f64 {
        let p = &self.params;
        p.kappa1() * signed_pow(e, p.gamma1().value())
            + p.kappa2() * signed_pow(e, p.gamma2().value())
            + p.rho() * e
    }

    /// Control inputs for state `x` at time `t`, written into `u`.
    pub fn control_into(
        &self,
        scales: &[ScaleFunction],
        x: &[f64],
        t: f64,
        g_buf: &mut [f64],
        u: &mut [f64],
    ) -> Result<(), ProtocolError> {
        let n = self.n();
        if scales.len() != n {
            return Err(ProtocolError::ScaleCount {
                scales: scales.len(),
                agents: n,
            });
        }
        for i in 0..n {
            g_buf[i] = scales[i].eval(x[i], t);
        }
        for i in 0..n {
            let dx = scales[i].d_dx(x[i], t);
            if dx.abs() < DERIVATIVE_GUARD || dx.is_nan() {
                return Err(ProtocolError::DerivativeGuard {
                    agent: i,
                    t,
                    x: x[i],
                    derivative: dx,
                });
            }
            let e = self.coupling_error(i, g_buf);
            u[i] = (self.attracting_rate(e) - scales[i].d_dt(x[i], t)) / dx;
        }
        Ok(())
    }

    pub fn control(
        &self,
        scales: &[ScaleFunction],
        x: &[f64],
        t: f64,
    ) -> Result<Vec<f64>, ProtocolError> {
        let mut g = vec![0.0; self.n()];
        let mut u = vec![0.0; self.n()];
        self.control_into(scales, x, t, &mut g, &mut u)?;
        Ok(u)
    }

    /// `V = ¼ Σ_i Σ_j |a_ij| (g_j - sgn(a_ij) g_i)²`.
    pub fn disagreement(&self, g: &[f64]) -> f64 {
        let mut v = 0.0;
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            for &(j, a, s) in nbrs {
                let d = g[j] - s * g[i];
                v += a.abs() * d * d;
            }
        }
        0.25 * v
    }

    /// Largest pairwise disagreement of the scaled states; for the signed
    /// protocol, of their moduli.
    pub fn spread(&self, g: &[f64]) -> f64 {
        let key = |v: f64| match self.kind {
            ProtocolKind::SignedGal => v.abs(),
            _ => v,
        };
        let (lo, hi) = g
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(key(v)), hi.max(key(v)))
            });
        hi - lo
    }
}
