//! Closed-loop simulation of `x_i' = u_i` under a consensus protocol.
//!
//! Integration is classical fixed-step RK4. The control is re-evaluated at
//! every stage with the stage's own time, so time-varying scales are seen at
//! `t`, `t + h/2` and `t + h`. The protocol is not Lipschitz at consensus
//! (the `g1 < 1` term), which is why the step is fixed and "settled" means
//! staying inside an `epsilon` band rather than reaching exact agreement.

use std::io::{self, Write};

use thiserror::Error;

use crate::graph::WeightedGraph;
use crate::protocol::{ProtocolError, ProtocolSpec};
use crate::scales::ScaleFunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("state became non-finite at t = {t}; last finite state {last_state:?}")]
    NonFinite { t: f64, last_state: Vec<f64> },
}

/// Integrator and measurement settings of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub horizon: f64,
    pub step: f64,
    /// Band on the largest pairwise scaled disagreement.
    pub epsilon: f64,
    /// Sampling interval of the recorded trajectory; a multiple of `step`.
    pub record_stride: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            step: 1e-4,
            epsilon: 1e-3,
            record_stride: 1e-3,
        }
    }
}

impl RunSettings {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Invalid(m.to_string()));
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad("step must be positive");
        }
        if !(self.horizon.is_finite() && self.horizon >= self.step) {
            return bad("horizon must be at least one step");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.record_stride.is_finite() && self.record_stride >= self.step) {
            return bad("record_stride must be at least one step");
        }
        let ratio = self.record_stride / self.step;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return bad("record_stride must be an integer multiple of step");
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn steps_per_sample(&self) -> usize {
        (self.record_stride / self.step).round() as usize
    }
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub graph: WeightedGraph,
    pub protocol: ProtocolSpec,
    pub scales: Vec<ScaleFunction>,
    pub x0: Vec<f64>,
    pub settings: RunSettings,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        graph: WeightedGraph,
        protocol: ProtocolSpec,
        scales: Vec<ScaleFunction>,
        x0: Vec<f64>,
        settings: RunSettings,
    ) -> Result<Self, SimError> {
        let n = graph.n();
        if protocol.n() != n {
            return Err(SimError::Invalid(format!(
                "protocol couples {} agents but the graph has {n}",
                protocol.n()
            )));
        }
        if scales.len() != n {
            return Err(SimError::Invalid(format!(
                "{} scales for {n} agents",
                scales.len()
            )));
        }
        if x0.len() != n {
            return Err(SimError::Invalid(format!(
                "initial state has {} entries for {n} agents",
                x0.len()
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Invalid("initial state must be finite".into()));
        }
        settings.validate()?;
        Ok(Self {
            name: name.into(),
            graph,
            protocol,
            scales,
            x0,
            settings,
        })
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn scaled_states(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.scales
            .iter()
            .zip(x)
            .map(|(g, &xi)| g.eval(xi, t))
            .collect()
    }
}

/// Sampled closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub scaled_states: Vec<Vec<f64>>,
    pub lyapunov: Vec<f64>,
    /// Largest pairwise scaled disagreement per sample.
    pub spread: Vec<f64>,
    pub epsilon: f64,
    pub settling_time: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn measure_settling(&self, epsilon: f64) -> Option<f64> {
        measure_settling(&self.times, &self.spread, epsilon)
    }

    /// CSV with header `t,x_1..x_n,g_1..g_n,V`, 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.n_agents();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("g_{i}")));
        header.push("V".into());
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            line.push_str(&sig9(self.times[k]));
            for v in self.states[k].iter().chain(&self.scaled_states[k]) {
                line.push(',');
                line.push_str(&sig9(*v));
            }
            line.push(',');
            line.push_str(&sig9(self.lyapunov[k]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Formats with 9 significant digits in scientific notation.
pub fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Earliest sample time from which `spread <= epsilon` holds through the
/// last sample.
pub fn measure_settling(times: &[f64], spread: &[f64], epsilon: f64) -> Option<f64> {
    let mut since = None;
    for (&t, &s) in times.iter().zip(spread) {
        if s <= epsilon {
            since.get_or_insert(t);
        } else {
            since = None;
        }
    }
    since
}

struct Rk4Workspace {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    g: Vec<f64>,
}

/// Integrates the scenario over `[0, horizon]`.
pub fn simulate(s: &Scenario) -> Result<Trajectory, SimError> {
    let n = s.n();
    let h = s.settings.step;
    let total = s.settings.total_steps();
    let every = s.settings.steps_per_sample();
    let samples = total / every + 2;

    let mut traj = Trajectory {
        times: Vec::with_capacity(samples),
        states: Vec::with_capacity(samples),
        scaled_states: Vec::with_capacity(samples),
        lyapunov: Vec::with_capacity(samples),
        spread: Vec::with_capacity(samples),
        epsilon: s.settings.epsilon,
        settling_time: None,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| {
        let g = s.scaled_states(x, t);
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.lyapunov.push(s.protocol.disagreement(&g));
        traj.spread.push(s.protocol.spread(&g));
        traj.scaled_states.push(g);
    };

    let mut ws = Rk4Workspace {
        k: std::array::from_fn(|_| vec![0.0; n]),
        stage: vec![0.0; n],
        g: vec![0.0; n],
    };
    let mut x = s.x0.clone();
    record(&mut traj, 0.0, &x);

    for step in 0..total {
        let t = step as f64 * h;
        let t_next = (step + 1) as f64 * h;
        let t_mid = t + 0.5 * h;
        let [k1, k2, k3, k4] = &mut ws.k;

        s.protocol.control_into(&s.scales, &x, t, &mut ws.g, k1)?;
        for i in 0..n {
            ws.stage[i] = x[i] + 0.5 * h * k1[i];
        }
        s.protocol
            .control_into(&s.scales, &ws.stage, t_mid, &mut ws.g, k2)?;
        for i in 0..n {
            ws.stage[i] = x[i] + 0.5 * h * k2[i];
        }
        s.protocol
            .control_into(&s.scales, &ws.stage, t_mid, &mut ws.g, k3)?;
        for i in 0..n {
            ws.stage[i] = x[i] + h * k3[i];
        }
        s.protocol
            .control_into(&s.scales, &ws.stage, t_next, &mut ws.g, k4)?;

        let mut finite = true;
        for i in 0..n {
            ws.stage[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite &= ws.stage[i].is_finite();
        }
        if !finite {
            return Err(SimError::NonFinite {
                t: t_next,
                last_state: x,
            });
        }
        std::mem::swap(&mut x, &mut ws.stage);

        if (step + 1) % every == 0 || step + 1 == total {
            record(&mut traj, t_next, &x);
        }
    }

    traj.settling_time = measure_settling(&traj.times, &traj.spread, s.settings.epsilon);
    Ok(traj)
}

/// `V(t)` recomputed from the recorded scaled states, with forward
/// finite-difference slopes between consecutive samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `slopes[k] = (V[k+1] - V[k]) / (t[k+1] - t[k])`.
    pub slopes: Vec<f64>,
}

impl LyapunovSeries {
    /// First sample index `k`, taken while the spread is still above
    /// `epsilon`, at which `V[k+1] > V[k] * (1 + rel_slack)`.
    pub fn first_increase_outside_band(
        &self,
        spread: &[f64],
        epsilon: f64,
        rel_slack: f64,
    ) -> Option<usize> {
        (0..self.values.len().saturating_sub(1)).find(|&k| {
            spread[k] > epsilon && self.values[k + 1] > self.values[k] * (1.0 + rel_slack)
        })
    }
}

pub fn lyapunov_series(s: &Scenario, traj: &Trajectory) -> LyapunovSeries {
    let values: Vec<f64> = traj
        .scaled_states
        .iter()
        .map(|g| s.protocol.disagreement(g))
        .collect();
    let slopes = values
        .windows(2)
        .zip(traj.times.windows(2))
        .map(|(v, t)| (v[1] - v[0]) / (t[1] - t[0]))
        .collect();
    LyapunovSeries {
        times: traj.times.clone(),
        values,
        slopes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attracting_law::{AlParams, OddRatio};
    use crate::linalg::SquareMatrix;
    use crate::protocol::ProtocolKind;

    fn pair_scenario(x0: Vec<f64>, settings: RunSettings) -> Scenario {
        let w = SquareMatrix::from_row_major(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let g = WeightedGraph::from_matrix(w.clone(), false).unwrap();
        let p = AlParams::new(
            2.0,
            1.0,
            1.0,
            OddRatio::new(1, 3).unwrap(),
            OddRatio::new(5, 3).unwrap(),
        )
        .unwrap();
        let spec = ProtocolSpec::new(ProtocolKind::Gal, p, w).unwrap();
        Scenario::new(
            "pair",
            g,
            spec,
            vec![ScaleFunction::identity(); 2],
            x0,
            settings,
        )
        .unwrap()
    }

    #[test]
    fn settling_stay_inside_semantics() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(measure_settling(&t, &[0.0; 5], 0.1), Some(0.0));
        assert_eq!(
            measure_settling(&t, &[1.0, 0.05, 0.5, 0.05, 0.01], 0.1),
            Some(3.0)
        );
        assert_eq!(
            measure_settling(&t, &[1.0, 0.05, 0.05, 0.05, 0.5], 0.1),
            None
        );
    }

    #[test]
    fn symmetric_pair_stays_antisymmetric() {
        let s = pair_scenario(
            vec![1.0, -1.0],
            RunSettings {
                horizon: 2.0,
                ..RunSettings::default()
            },
        );
        let traj = simulate(&s).unwrap();
        for x in &traj.states {
            assert!((x[0] + x[1]).abs() <= 1e-9, "{x:?}");
        }
        assert!(traj.settling_time.is_some());
    }

    #[test]
    fn consensus_start_is_stationary() {
        let s = pair_scenario(vec![0.7, 0.7], RunSettings::default());
        let traj = simulate(&s).unwrap();
        assert_eq!(traj.settling_time, Some(0.0));
        assert!(traj.lyapunov.iter().all(|&v| v == 0.0));
        assert!(traj.states.iter().all(|x| x == &vec![0.7, 0.7]));
    }

    #[test]
    fn pair_lyapunov_matches_double_sum() {
        let s = pair_scenario(
            vec![3.0, -1.0],
            RunSettings {
                horizon: 1.0,
                ..RunSettings::default()
            },
        );
        let traj = simulate(&s).unwrap();
        let series = lyapunov_series(&s, &traj);
        for (k, x) in traj.states.iter().enumerate() {
            // ¼ Σ_i Σ_j a_ij (x_j - x_i)² with a_12 = a_21 = 1
            let d = x[1] - x[0];
            let oracle = 0.25 * (d * d + d * d);
            assert!((series.values[k] - oracle).abs() <= 1e-15 * (1.0 + oracle));
            assert_eq!(series.values[k], traj.lyapunov[k]);
        }
        assert_eq!(
            series.first_increase_outside_band(&traj.spread, traj.epsilon, 1e-9),
            None
        );
    }

    #[test]
    fn sampling_grid() {
        let s = pair_scenario(
            vec![1.0, 0.0],
            RunSettings {
                horizon: 0.01,
                step: 1e-4,
                epsilon: 1e-3,
                record_stride: 1e-3,
            },
        );
        let traj = simulate(&s).unwrap();
        assert_eq!(traj.len(), 11);
        assert!((traj.times[10] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn invalid_settings_rejected() {
        let w = SquareMatrix::from_row_major(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let g = WeightedGraph::from_matrix(w.clone(), false).unwrap();
        let p = AlParams::new(
            2.0,
            1.0,
            1.0,
            OddRatio::new(1, 3).unwrap(),
            OddRatio::new(5, 3).unwrap(),
        )
        .unwrap();
        let spec = ProtocolSpec::new(ProtocolKind::Gal, p, w).unwrap();
        let scales = vec![ScaleFunction::identity(); 2];
        let mk = |x0: Vec<f64>, settings| {
            Scenario::new("bad", g.clone(), spec.clone(), scales.clone(), x0, settings)
        };
        assert!(mk(vec![1.0], RunSettings::default()).is_err());
        for settings in [
            RunSettings {
                step: 0.0,
                ..Default::default()
            },
            RunSettings {
                horizon: 1e-5,
                ..Default::default()
            },
            RunSettings {
                epsilon: -1.0,
                ..Default::default()
            },
            RunSettings {
                record_stride: 1.5e-4,
                ..Default::default()
            },
        ] {
            assert!(mk(vec![1.0, 0.0], settings).is_err(), "{settings:?}");
        }
    }

    #[test]
    fn guard_violation_aborts_with_diagnostic() {
        let w = SquareMatrix::from_row_major(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let g = WeightedGraph::from_matrix(w.clone(), false).unwrap();
        let p = AlParams::new(
            2.0,
            1.0,
            1.0,
            OddRatio::new(1, 3).unwrap(),
            OddRatio::new(5, 3).unwrap(),
        )
        .unwrap();
        let spec = ProtocolSpec::new(ProtocolKind::Gal, p, w).unwrap();
        // x^3 has a flat point at 0, which agent 2 starts on.
        let scales = vec![
            ScaleFunction::identity(),
            ScaleFunction::parse("x^3").unwrap(),
        ];
        let s = Scenario::new(
            "guard",
            g,
            spec,
            scales,
            vec![1.0, 0.0],
            RunSettings::default(),
        )
        .unwrap();
        match simulate(&s) {
            Err(SimError::Protocol(ProtocolError::DerivativeGuard { agent: 1, .. })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_layout() {
        let s = pair_scenario(
            vec![1.0, 0.0],
            RunSettings {
                horizon: 0.002,
                ..RunSettings::default()
            },
        );
        let traj = simulate(&s).unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x_1,x_2,g_1,g_2,V"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 6);
        assert_eq!(first[0], "0.00000000e0");
        assert_eq!(first[1], "1.00000000e0");
        assert_eq!(first[5].parse::<f64>().unwrap(), 0.5);
        assert_eq!(text.lines().count(), 1 + traj.len());
    }
}
