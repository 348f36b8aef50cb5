//! Scalar attracting laws and their settling-time bounds.
//!
//! The generic law is
//!
//! ```text
//! x' = -rho x - k1 |x|^g1 sgn(x) - k2 |x|^g2 sgn(x),   0 < g1 < 1 < g2
//! ```
//!
//! With `rho = 0` it reduces to the double-power law. Both are fixed-time
//! stable: the settling time is bounded uniformly in `x0`. This module
//! evaluates the closed-form lower/upper bounds on the settling time, the
//! parameter transformation that maps a network's disagreement onto a scalar
//! law, and a scalar integrator used to measure settling times empirically.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("exponent {0}: q, p, m, n are odd numbers (both numerator and denominator must be odd positive integers)")]
    NotOdd(OddRatio),
    #[error("exponent ratio {0:?} is not of the form q/p")]
    Malformed(String),
    #[error("gamma1 = {0} must satisfy q < p (0 < gamma1 < 1)")]
    Gamma1Range(OddRatio),
    #[error("gamma2 = {0} must satisfy n < m (gamma2 > 1)")]
    Gamma2Range(OddRatio),
    #[error("{name} = {value} is out of range ({constraint})")]
    Coefficient {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("lambda2 = {0} must be positive (is the graph connected?)")]
    NonPositiveLambda2(f64),
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
}

/// An exponent `num/den` with both parts odd and positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OddRatio {
    num: u32,
    den: u32,
}

impl OddRatio {
    pub fn new(num: u32, den: u32) -> Result<Self, ParamError> {
        let r = Self { num, den };
        if num == 0 || den == 0 || num % 2 == 0 || den % 2 == 0 {
            return Err(ParamError::NotOdd(r));
        }
        Ok(r)
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for OddRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for OddRatio {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || ParamError::Malformed(s.to_string());
        let (num, den) = s.split_once('/').ok_or_else(malformed)?;
        let num = num.trim().parse().map_err(|_| malformed())?;
        let den = den.trim().parse().map_err(|_| malformed())?;
        Self::new(num, den)
    }
}

impl Serialize for OddRatio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OddRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `|x|^gamma sgn(x)`, with 0 at the origin.
#[inline]
pub fn signed_pow(x: f64, gamma: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * (gamma * x.abs().ln()).exp()
    }
}

/// Parameters of the generic attracting law. `rho = 0` is the double-power
/// law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlParams {
    rho: f64,
    kappa1: f64,
    kappa2: f64,
    gamma1: OddRatio,
    gamma2: OddRatio,
}

impl AlParams {
    pub fn new(
        rho: f64,
        kappa1: f64,
        kappa2: f64,
        gamma1: OddRatio,
        gamma2: OddRatio,
    ) -> Result<Self, ParamError> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(ParamError::Coefficient {
                name: "rho",
                value: rho,
                constraint: "finite, >= 0",
            });
        }
        for (name, value) in [("kappa1", kappa1), ("kappa2", kappa2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::Coefficient {
                    name,
                    value,
                    constraint: "finite, > 0",
                });
            }
        }
        if gamma1.num >= gamma1.den {
            return Err(ParamError::Gamma1Range(gamma1));
        }
        if gamma2.num <= gamma2.den {
            return Err(ParamError::Gamma2Range(gamma2));
        }
        Ok(Self {
            rho,
            kappa1,
            kappa2,
            gamma1,
            gamma2,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn gamma1(&self) -> OddRatio {
        self.gamma1
    }

    pub fn gamma2(&self) -> OddRatio {
        self.gamma2
    }

    pub fn is_double_power(&self) -> bool {
        self.rho == 0.0
    }

    /// Same parameters with a different proportional gain.
    pub fn with_rho(self, rho: f64) -> Result<Self, ParamError> {
        Self::new(rho, self.kappa1, self.kappa2, self.gamma1, self.gamma2)
    }

    /// Right-hand side of the attracting law at `x`.
    pub fn rhs(&self, x: f64) -> f64 {
        -self.rho * x
            - self.kappa1 * signed_pow(x, self.gamma1.value())
            - self.kappa2 * signed_pow(x, self.gamma2.value())
    }
}

/// Which closed-form expression produced a [`SettlingBounds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRegime {
    /// `x0 = 0`.
    Origin,
    /// `|x0| < 1`.
    Small,
    /// `|x0| >= 1`.
    Large,
    /// Uniform over all `|x0| >= 1`; `upper` also covers `|x0| < 1`.
    StateIndependent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlingBounds {
    pub lower: f64,
    pub upper: f64,
    pub regime: BoundRegime,
}

impl SettlingBounds {
    pub fn contains(&self, t: f64, slack: f64) -> bool {
        t >= self.lower - slack && t <= self.upper + slack
    }
}

/// Settling-time bounds for a given initial state.
///
/// Uses the two-phase estimates: the time from `|x0|` down to 1 and the time
/// from 1 to the origin, each bracketed by dropping or dominating one power
/// term.
pub fn settling_bounds_state_dependent(params: &AlParams, x0: f64) -> SettlingBounds {
    let a = x0.abs();
    if a == 0.0 {
        return SettlingBounds {
            lower: 0.0,
            upper: 0.0,
            regime: BoundRegime::Origin,
        };
    }
    let AlParams {
        rho,
        kappa1: k1,
        kappa2: k2,
        ..
    } = *params;
    let g1 = params.gamma1.value();
    let g2 = params.gamma2.value();

    if rho > 0.0 {
        if a >= 1.0 {
            let c = k2 / (rho + k1);
            let lower = ((1.0 + c) / (a.powf(1.0 - g2) + c)).ln() / ((rho + k1) * (g2 - 1.0))
                + (1.0 + (rho + k2) / k1).ln() / ((rho + k2) * (1.0 - g1));
            let d = k2 / rho;
            let upper = (1.0 + rho / k1).ln() / (rho * (1.0 - g1))
                + ((1.0 + d) / (a.powf(1.0 - g2) + d)).ln() / (rho * (g2 - 1.0));
            SettlingBounds {
                lower,
                upper,
                regime: BoundRegime::Large,
            }
        } else {
            let s = a.powf(1.0 - g1);
            SettlingBounds {
                lower: (1.0 + (rho + k2) * s / k1).ln() / ((rho + k2) * (1.0 - g1)),
                upper: (1.0 + rho / k1 * s).ln() / (rho * (1.0 - g1)),
                regime: BoundRegime::Small,
            }
        }
    } else if a >= 1.0 {
        let c = k2 / k1;
        SettlingBounds {
            lower: ((1.0 + c) / (a.powf(1.0 - g2) + c)).ln() / (k1 * (g2 - 1.0))
                + (1.0 + k2 / k1).ln() / (k2 * (1.0 - g1)),
            upper: 1.0 / (k1 * (1.0 - g1)) + (1.0 - a.powf(1.0 - g2)) / (k2 * (g2 - 1.0)),
            regime: BoundRegime::Large,
        }
    } else {
        let s = a.powf(1.0 - g1);
        SettlingBounds {
            lower: (1.0 + k2 * s / k1).ln() / (k2 * (1.0 - g1)),
            upper: s / (k1 * (1.0 - g1)),
            regime: BoundRegime::Small,
        }
    }
}

/// Bounds on the settling time that hold for every `|x0| >= 1`; the upper
/// bound holds for every `x0`.
pub fn settling_bounds_state_independent(params: &AlParams) -> SettlingBounds {
    let AlParams {
        rho,
        kappa1: k1,
        kappa2: k2,
        ..
    } = *params;
    let g1 = params.gamma1.value();
    let g2 = params.gamma2.value();
    let (lower, upper) = if rho > 0.0 {
        (
            (1.0 + (rho + k2) / k1).ln() / ((rho + k2) * (1.0 - g1)),
            (1.0 + rho / k2).ln() / (rho * (g2 - 1.0)) + (1.0 + rho / k1).ln() / (rho * (1.0 - g1)),
        )
    } else {
        (
            (1.0 + k2 / k1).ln() / (k2 * (1.0 - g1)),
            1.0 / (k1 * (1.0 - g1)) + 1.0 / (k2 * (g2 - 1.0)),
        )
    };
    SettlingBounds {
        lower,
        upper,
        regime: BoundRegime::StateIndependent,
    }
}

/// Parameters of the scalar law obeyed by `sqrt(V)` for a network with
/// algebraic connectivity `lambda2` and `n_agents` agents:
///
/// ```text
/// rho' = rho λ2
/// k1'  = k1 2^((q-p)/2p) λ2^((q+p)/2p)
/// k2'  = k2 2^((m-n)/2n) N^((n-m)/2n) λ2^((m+n)/2n)
/// ```
pub fn transformed_params(
    params: &AlParams,
    lambda2: f64,
    n_agents: usize,
) -> Result<AlParams, ParamError> {
    if !(lambda2.is_finite() && lambda2 > 0.0) {
        return Err(ParamError::NonPositiveLambda2(lambda2));
    }
    if n_agents < 2 {
        return Err(ParamError::TooFewAgents(n_agents));
    }
    let (q, p) = (params.gamma1.num as f64, params.gamma1.den as f64);
    let (m, n) = (params.gamma2.num as f64, params.gamma2.den as f64);
    let big_n = n_agents as f64;
    let kappa1 = params.kappa1 * 2f64.powf((q - p) / (2.0 * p)) * lambda2.powf((q + p) / (2.0 * p));
    let kappa2 = params.kappa2
        * 2f64.powf((m - n) / (2.0 * n))
        * big_n.powf((n - m) / (2.0 * n))
        * lambda2.powf((m + n) / (2.0 * n));
    AlParams::new(
        params.rho * lambda2,
        kappa1,
        kappa2,
        params.gamma1,
        params.gamma2,
    )
}

/// Whether both state-independent bounds are strictly smaller than those of
/// the double-power law with the same gains.
pub fn corollary_compare(params: &AlParams) -> bool {
    let Ok(dp) = params.with_rho(0.0) else {
        return false;
    };
    let gal = settling_bounds_state_independent(params);
    let dp = settling_bounds_state_independent(&dp);
    gal.lower < dp.lower && gal.upper < dp.upper
}

/// Settings for [`measure_scalar_settling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarOdeOptions {
    /// Largest step; also the unit of the containment slack.
    pub base_step: f64,
    /// `|x| <= band` counts as settled.
    pub band: f64,
    /// Each step moves `x` by at most this fraction of `|x|` (estimated from
    /// the current slope).
    pub max_relative_change: f64,
    /// Integration stops this long after the last band entry.
    pub confirm_window: f64,
}

impl ScalarOdeOptions {
    /// Base step `1e-4 * max(1, T_upper)` with a `1e-9` band.
    pub fn for_params(params: &AlParams) -> Self {
        let t_up = settling_bounds_state_independent(params).upper;
        Self {
            base_step: 1e-4 * t_up.max(1.0),
            band: 1e-9,
            max_relative_change: 0.05,
            confirm_window: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSettling {
    /// Time of the last entry into the band.
    pub time: f64,
    pub steps: usize,
    pub base_step: f64,
}

fn rk4_step(params: &AlParams, x: f64, h: f64) -> f64 {
    let k1 = params.rhs(x);
    let k2 = params.rhs(x + 0.5 * h * k1);
    let k3 = params.rhs(x + 0.5 * h * k2);
    let k4 = params.rhs(x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates the scalar law from `x0` with RK4 and returns the time after
/// which `|x|` stays inside the band.
///
/// The step is `min(base_step, max_relative_change * |x| / |f(x)|)`,
/// floored at the step whose finite-time chatter amplitude
/// `(k1 h)^(1/(1-g1))` is a tenth of the band. Far from the origin this
/// resolves the fast `g2` phase; near it, it refines the step as the `g1`
/// term's slope blows up.
pub fn measure_scalar_settling(
    params: &AlParams,
    x0: f64,
    opts: &ScalarOdeOptions,
) -> ScalarSettling {
    let g1 = params.gamma1.value();
    let floor = ((0.1 * opts.band).powf(1.0 - g1) / params.kappa1).min(opts.base_step);
    let mut x = x0;
    let mut t = 0.0;
    let mut steps = 0;
    let mut entered: Option<f64> = (x.abs() <= opts.band).then_some(0.0);
    let horizon_guard = 1e3 * settling_bounds_state_independent(params).upper.max(1.0);

    loop {
        if let Some(t_in) = entered {
            if t - t_in >= opts.confirm_window || x == 0.0 {
                break;
            }
        }
        if t > horizon_guard {
            break;
        }
        let f = params.rhs(x);
        let h = if f == 0.0 {
            opts.base_step
        } else {
            (opts.max_relative_change * x.abs() / f.abs()).clamp(floor, opts.base_step)
        };
        x = rk4_step(params, x, h);
        t += h;
        steps += 1;
        if x.abs() <= opts.band {
            entered.get_or_insert(t);
        } else {
            entered = None;
        }
    }
    ScalarSettling {
        time: entered.unwrap_or(f64::INFINITY),
        steps,
        base_step: opts.base_step,
    }
}
