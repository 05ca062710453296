//! Domain types shared across the toolkit.
//!
//! Everything here is immutable once built. Constructors reject non-finite
//! values; [`validate_dataset`] reports structural violations of a
//! [`BurstDataset`] as data rather than failing.
//!
//! Hidden system parameters have no representation in [`Trajectory`] or
//! [`Burst`]: a targeted twin only ever sees QoI values and the explicit
//! parameters `gamma`.

use crate::error::{Error, Result};

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}

/// Number of consecutive entries in a burst: `n_M + 1` memory entries
/// followed by `n_R` recurrent targets.
pub const fn burst_length(n_m: usize, n_r: usize) -> usize {
    n_m + 1 + n_r
}

/// Total number of training bursts when `n_b` bursts are drawn from each of
/// `n_sim` trajectories.
pub const fn total_bursts(n_b: usize, n_sim: usize) -> usize {
    n_b * n_sim
}

/// Quantities of interest at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct QoiVector(Vec<f64>);

impl QoiVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("qoi", &values)?;
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for QoiVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Explicit (recorded) system parameters; frequently empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplicitParams(Vec<f64>);

impl ExplicitParams {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("gamma", &values)?;
        Ok(Self(values))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn common_dim(what: &str, qois: &[QoiVector]) -> Result<usize> {
    let n_v = qois.first().map_or(0, QoiVector::len);
    if let Some(i) = qois.iter().position(|q| q.len() != n_v) {
        return Err(Error::Data(format!(
            "{what} entry {i} has {} components, expected {n_v}",
            qois[i].len()
        )));
    }
    Ok(n_v)
}

/// QoI time series recorded from one full-DT run at a fixed step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    qois: Vec<QoiVector>,
    gamma: ExplicitParams,
}

impl Trajectory {
    pub fn new(dt: f64, qois: Vec<QoiVector>, gamma: ExplicitParams) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Data(format!("trajectory dt must be > 0, got {dt}")));
        }
        if qois.is_empty() {
            return Err(Error::Data("trajectory has no entries".into()));
        }
        common_dim("trajectory", &qois)?;
        Ok(Self { dt, qois, gamma })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn qois(&self) -> &[QoiVector] {
        &self.qois
    }

    pub fn gamma(&self) -> &ExplicitParams {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.qois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qois.is_empty()
    }

    pub fn n_v(&self) -> usize {
        self.qois[0].len()
    }

    /// Values of one QoI component over time.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.qois.iter().map(|q| q.as_slice()[c]).collect()
    }
}

/// One training record: `n_L` consecutive QoI entries and their `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Burst {
    entries: Vec<QoiVector>,
    gamma: ExplicitParams,
}

impl Burst {
    pub fn new(entries: Vec<QoiVector>, gamma: ExplicitParams) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Data("burst has no entries".into()));
        }
        common_dim("burst", &entries)?;
        Ok(Self { entries, gamma })
    }

    pub fn entries(&self) -> &[QoiVector] {
        &self.entries
    }

    pub fn gamma(&self) -> &ExplicitParams {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The training set `D`. Fields are public so that malformed datasets can be
/// represented and reported by [`validate_dataset`]; use
/// [`BurstDataset::new`] to get a checked value.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstDataset {
    pub n_v: usize,
    pub n_gamma: usize,
    pub n_m: usize,
    pub n_r: usize,
    pub dt: f64,
    pub bursts: Vec<Burst>,
}

impl BurstDataset {
    pub fn new(
        n_v: usize,
        n_gamma: usize,
        n_m: usize,
        n_r: usize,
        dt: f64,
        bursts: Vec<Burst>,
    ) -> Result<Self> {
        let d = Self {
            n_v,
            n_gamma,
            n_m,
            n_r,
            dt,
            bursts,
        };
        let violations = validate_dataset(&d);
        if violations.is_empty() {
            Ok(d)
        } else {
            Err(Error::Data(violations.join("; ")))
        }
    }

    pub fn n_l(&self) -> usize {
        burst_length(self.n_m, self.n_r)
    }

    pub fn n_data(&self) -> usize {
        self.bursts.len()
    }
}

/// Lists every invariant violation in `d`; empty iff the dataset is valid.
pub fn validate_dataset(d: &BurstDataset) -> Vec<String> {
    let mut out = Vec::new();
    if d.n_r < 1 {
        out.push(format!("n_R must be >= 1, got {}", d.n_r));
    }
    if d.n_v < 1 {
        out.push("n_V must be >= 1".to_string());
    }
    if !(d.dt.is_finite() && d.dt > 0.0) {
        out.push(format!("dt must be > 0, got {}", d.dt));
    }
    let n_l = d.n_l();
    for (j, b) in d.bursts.iter().enumerate() {
        if b.len() != n_l {
            out.push(format!("burst {j} has length {}, expected n_L = {n_l}", b.len()));
        }
        if let Some(q) = b.entries().first() {
            if q.len() != d.n_v {
                out.push(format!(
                    "burst {j} has n_V = {}, expected {}",
                    q.len(),
                    d.n_v
                ));
            }
        }
        if b.gamma().len() != d.n_gamma {
            out.push(format!(
                "burst {j} has n_gamma = {}, expected {}",
                b.gamma().len(),
                d.n_gamma
            ));
        }
    }
    out
}

/// Truncated Fourier series `a0 + sum_n a_n cos(n t) + b_n sin(n t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierSeries {
    pub fn new(a0: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Data(format!(
                "cosine/sine coefficient counts differ: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        check_finite("a0", &[a0])?;
        check_finite("a", &a)?;
        check_finite("b", &b)?;
        Ok(Self { a0, a, b })
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// Coefficients in QoI layout `(a0, a1..aN, b1..bN)`.
    pub fn to_qoi(&self) -> QoiVector {
        let mut v = Vec::with_capacity(2 * self.order() + 1);
        v.push(self.a0);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        QoiVector(v)
    }

    pub fn from_qoi(q: &QoiVector) -> Result<Self> {
        let v = q.as_slice();
        if v.len().is_multiple_of(2) {
            return Err(Error::Data(format!(
                "Fourier QoI vector must have odd length 2N+1, got {}",
                v.len()
            )));
        }
        let n = v.len() / 2;
        Ok(Self {
            a0: v[0],
            a: v[1..=n].to_vec(),
            b: v[n + 1..].to_vec(),
        })
    }
}
