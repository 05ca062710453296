//! Built-in "full digital twin" simulators.
//!
//! Each system is a small ODE with hidden parameters, integrated with
//! classical RK4 at an inner step `inner_dt` and observed every
//! `record_every` inner steps through a fixed QoI extractor. Hidden
//! parameters drive the dynamics but never appear in the returned
//! [`Trajectory`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ExplicitParams, QoiVector, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    /// `dA/dt = (sigma + i omega) A - (1 + i c)|A|^2 A`, observed as `(Re A, Im A)`.
    StuartLandau,
    /// `x'' - mu (1 - x^2) x' + x = 0`, observed as `x` only.
    VanDerPol,
    /// Lorenz '63 with hidden `(sigma, rho, beta)`, observed as `x` only.
    Lorenz63,
}

impl SystemId {
    pub fn state_dim(self) -> usize {
        match self {
            SystemId::StuartLandau | SystemId::VanDerPol => 2,
            SystemId::Lorenz63 => 3,
        }
    }

    pub fn qoi_dim(self) -> usize {
        match self {
            SystemId::StuartLandau => 2,
            SystemId::VanDerPol | SystemId::Lorenz63 => 1,
        }
    }

    pub fn hidden_param_names(self) -> &'static [&'static str] {
        match self {
            SystemId::StuartLandau => &["sigma", "omega", "c"],
            SystemId::VanDerPol => &["mu"],
            SystemId::Lorenz63 => &["sigma", "rho", "beta"],
        }
    }

    pub fn qoi_names(self) -> &'static [&'static str] {
        match self {
            SystemId::StuartLandau => &["re_a", "im_a"],
            SystemId::VanDerPol | SystemId::Lorenz63 => &["x"],
        }
    }

    /// Right-hand side `ds/dt = f(s; p)`.
    fn rhs(self, p: &[f64], s: &[f64], out: &mut [f64]) {
        match self {
            SystemId::StuartLandau => {
                let (sigma, omega, c) = (p[0], p[1], p[2]);
                let (x, y) = (s[0], s[1]);
                let r2 = x * x + y * y;
                out[0] = sigma * x - omega * y - r2 * (x - c * y);
                out[1] = omega * x + sigma * y - r2 * (c * x + y);
            }
            SystemId::VanDerPol => {
                let mu = p[0];
                let (x, v) = (s[0], s[1]);
                out[0] = v;
                out[1] = mu * (1.0 - x * x) * v - x;
            }
            SystemId::Lorenz63 => {
                let (sigma, rho, beta) = (p[0], p[1], p[2]);
                let (x, y, z) = (s[0], s[1], s[2]);
                out[0] = sigma * (y - x);
                out[1] = x * (rho - z) - y;
                out[2] = x * y - beta * z;
            }
        }
    }

    fn extract_qoi(self, s: &[f64]) -> Vec<f64> {
        match self {
            SystemId::StuartLandau => vec![s[0], s[1]],
            SystemId::VanDerPol | SystemId::Lorenz63 => vec![s[0]],
        }
    }
}

/// Closed interval `[lo, hi]`, written as a two-element JSON array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Affine map of a unit draw `u in [0, 1)` onto the interval.
    pub fn lerp(&self, u: f64) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Configuration of one full-DT system and its sampling boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDtSpec {
    pub system: SystemId,
    /// Sampling box for the hidden parameters, in [`SystemId::hidden_param_names`] order.
    pub hidden_param_ranges: Vec<Interval>,
    /// Sampling box for the initial state.
    pub init_state_ranges: Vec<Interval>,
    /// Integrator step.
    pub inner_dt: f64,
    /// Inner steps per recorded QoI step.
    pub record_every: usize,
    /// Recorded steps integrated and discarded before the first record.
    pub burn_in: usize,
}

impl FullDtSpec {
    /// Limit-cycle wake analog. The initial box sits inside the limit
    /// cycle, so every run starts with a growing transient.
    pub fn stuart_landau() -> Self {
        Self {
            system: SystemId::StuartLandau,
            hidden_param_ranges: vec![
                Interval::new(0.5, 1.5),
                Interval::new(2.0 * PI * 0.15, 2.0 * PI * 0.25),
                Interval::point(0.0),
            ],
            init_state_ranges: vec![Interval::new(-0.3, 0.3); 2],
            inner_dt: 0.01,
            record_every: 10,
            burn_in: 0,
        }
    }

    pub fn van_der_pol() -> Self {
        Self {
            system: SystemId::VanDerPol,
            hidden_param_ranges: vec![Interval::new(0.5, 2.0)],
            init_state_ranges: vec![Interval::new(-0.5, 0.5); 2],
            inner_dt: 0.01,
            record_every: 10,
            burn_in: 0,
        }
    }

    pub fn lorenz63() -> Self {
        Self {
            system: SystemId::Lorenz63,
            hidden_param_ranges: vec![
                Interval::new(9.0, 11.0),
                Interval::new(24.0, 32.0),
                Interval::new(2.4, 3.0),
            ],
            init_state_ranges: vec![Interval::new(-1.0, 1.0); 3],
            inner_dt: 0.005,
            record_every: 20,
            burn_in: 0,
        }
    }

    pub fn default_for(system: SystemId) -> Self {
        match system {
            SystemId::StuartLandau => Self::stuart_landau(),
            SystemId::VanDerPol => Self::van_der_pol(),
            SystemId::Lorenz63 => Self::lorenz63(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn qoi_dim(&self) -> usize {
        self.system.qoi_dim()
    }

    /// QoI recording step `record_every * inner_dt`.
    pub fn dt(&self) -> f64 {
        self.record_every as f64 * self.inner_dt
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n_hidden = self.system.hidden_param_names().len();
        if self.hidden_param_ranges.len() != n_hidden {
            out.push(format!(
                "{:?} has {n_hidden} hidden parameter(s), got {} range(s)",
                self.system,
                self.hidden_param_ranges.len()
            ));
        }
        if self.init_state_ranges.len() != self.state_dim() {
            out.push(format!(
                "{:?} has state dimension {}, got {} initial-state range(s)",
                self.system,
                self.state_dim(),
                self.init_state_ranges.len()
            ));
        }
        for (i, r) in self.hidden_param_ranges.iter().enumerate() {
            if !r.is_valid() {
                out.push(format!("hidden range {i} [{}, {}] is empty or non-finite", r.lo, r.hi));
            }
        }
        for (i, r) in self.init_state_ranges.iter().enumerate() {
            if !r.is_valid() {
                out.push(format!("initial-state range {i} [{}, {}] is empty or non-finite", r.lo, r.hi));
            }
        }
        if !(self.inner_dt.is_finite() && self.inner_dt > 0.0) {
            out.push(format!("inner_dt must be > 0, got {}", self.inner_dt));
        }
        if self.record_every < 1 {
            out.push("record_every must be >= 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigViolations(v))
        }
    }
}

/// One concrete full-DT execution.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub spec: FullDtSpec,
    pub hidden_params: Vec<f64>,
    pub initial_state: Vec<f64>,
    pub n_step: usize,
}

impl SimRun {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n_step < 1 {
            return Err(Error::Config("n_step must be >= 1".into()));
        }
        let check = |what: &str, vals: &[f64], ranges: &[Interval]| -> Result<()> {
            if vals.len() != ranges.len() {
                return Err(Error::Config(format!(
                    "{what} has {} entries, expected {}",
                    vals.len(),
                    ranges.len()
                )));
            }
            for (i, (v, r)) in vals.iter().zip(ranges).enumerate() {
                if !r.contains(*v) {
                    return Err(Error::Config(format!(
                        "{what}[{i}] = {v} outside [{}, {}]",
                        r.lo, r.hi
                    )));
                }
            }
            Ok(())
        };
        check("hidden_params", &self.hidden_params, &self.spec.hidden_param_ranges)?;
        check("initial_state", &self.initial_state, &self.spec.init_state_ranges)?;
        Ok(())
    }
}

/// Scratch buffers for repeated RK4 steps.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, system: SystemId, p: &[f64], s: &mut [f64], h: f64) -> bool {
        let n = s.len();
        system.rhs(p, s, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = s[i] + 0.5 * h * self.k1[i];
        }
        system.rhs(p, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = s[i] + 0.5 * h * self.k2[i];
        }
        system.rhs(p, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = s[i] + h * self.k3[i];
        }
        system.rhs(p, &self.tmp, &mut self.k4);
        for i in 0..n {
            s[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        s.iter().all(|v| v.is_finite())
    }
}

/// Advances `state` by one classical RK4 step of size `dt`.
pub fn rk4_step(system: SystemId, hidden_params: &[f64], state: &[f64], dt: f64) -> Result<Vec<f64>> {
    if state.len() != system.state_dim() {
        return Err(Error::Config(format!(
            "{system:?} expects a state of dimension {}, got {}",
            system.state_dim(),
            state.len()
        )));
    }
    if hidden_params.len() != system.hidden_param_names().len() {
        return Err(Error::Config(format!(
            "{system:?} expects {} hidden parameter(s), got {}",
            system.hidden_param_names().len(),
            hidden_params.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("step size must be > 0, got {dt}")));
    }
    let mut s = state.to_vec();
    if Rk4::new(s.len()).step(system, hidden_params, &mut s, dt) {
        Ok(s)
    } else {
        Err(Error::IntegrationBlowup { step: 1 })
    }
}

/// Integrates one run and records its QoI series.
///
/// The returned trajectory has `n_step + 1` entries (the initial QoI
/// included) and empty explicit parameters.
pub fn run_full_dt(run: &SimRun) -> Result<Trajectory> {
    run.validate()?;
    let spec = &run.spec;
    let system = spec.system;
    let p = &run.hidden_params;
    let mut s = run.initial_state.clone();
    let mut rk = Rk4::new(s.len());
    let mut inner = 0usize;

    let mut advance = |s: &mut Vec<f64>, inner: &mut usize| -> Result<()> {
        for _ in 0..spec.record_every {
            *inner += 1;
            if !rk.step(system, p, s, spec.inner_dt) {
                return Err(Error::IntegrationBlowup { step: *inner });
            }
        }
        Ok(())
    };

    for _ in 0..spec.burn_in {
        advance(&mut s, &mut inner)?;
    }

    let record = |s: &[f64]| -> Result<QoiVector> {
        let q = system.extract_qoi(s);
        if q.len() != spec.qoi_dim() {
            return Err(Error::Config(format!(
                "QoI extractor returned {} values, expected {}",
                q.len(),
                spec.qoi_dim()
            )));
        }
        QoiVector::new(q)
    };

    let mut qois = Vec::with_capacity(run.n_step + 1);
    qois.push(record(&s)?);
    for _ in 0..run.n_step {
        advance(&mut s, &mut inner)?;
        qois.push(record(&s)?);
    }
    Trajectory::new(spec.dt(), qois, ExplicitParams::empty())
}
