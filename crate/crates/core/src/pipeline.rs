//! Training-data machinery: input sampling, batch execution of full-DT runs,
//! burst extraction, and the binary trajectory/dataset formats.
//!
//! All randomness is derived from one root seed. Run `j` draws its inputs
//! from ChaCha stream `j` and its burst windows from a second, disjoint
//! stream family, so generation can fan out over workers and still produce
//! output identical to a sequential pass.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::sims::{run_full_dt, FullDtSpec, Interval, SimRun, SystemId};
use crate::types::{burst_length, total_bursts, Burst, BurstDataset, ExplicitParams, QoiVector, Trajectory};

pub const DATASET_MAGIC: [u8; 4] = *b"FMLD";
pub const TRAJECTORY_MAGIC: [u8; 4] = *b"FMLT";
pub const FORMAT_VERSION: u32 = 1;
pub const DATASET_HEADER_LEN: usize = 40;
pub const TRAJECTORY_HEADER_LEN: usize = 32;

const SAMPLE_STREAM: u64 = 0;
const BURST_STREAM: u64 = 1 << 48;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of distinct burst windows of length `n_l` in a series of `len` entries.
pub fn window_count(len: usize, n_l: usize) -> usize {
    (len + 1).saturating_sub(n_l)
}

/// A complete data-generation request.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationPlan {
    pub spec: FullDtSpec,
    pub n_sim: usize,
    pub n_step: usize,
    pub n_m: usize,
    pub n_r: usize,
    pub n_b: usize,
    pub seed: u64,
}

impl GenerationPlan {
    pub fn n_l(&self) -> usize {
        burst_length(self.n_m, self.n_r)
    }

    pub fn n_data(&self) -> usize {
        total_bursts(self.n_b, self.n_sim)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = self.spec.violations();
        if self.n_sim < 1 {
            out.push("N_sim must be >= 1".into());
        }
        if self.n_r < 1 {
            out.push("n_R must be >= 1".into());
        }
        if self.n_b < 1 {
            out.push("n_B must be >= 1".into());
        }
        if self.n_step < self.n_m + 2 {
            out.push(format!("N_step = {} must be >= n_M + 2 = {}", self.n_step, self.n_m + 2));
        }
        let windows = window_count(self.n_step + 1, self.n_l());
        if windows == 0 {
            out.push(format!(
                "N_step + 1 = {} entries cannot hold a burst of n_L = {}",
                self.n_step + 1,
                self.n_l()
            ));
        } else if self.n_b > windows {
            out.push(format!(
                "n_B = {} exceeds the {windows} distinct burst windows per trajectory",
                self.n_b
            ));
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

// ---------------------------------------------------------------------------
// JSON configuration

const GEN_REQUIRED: &[&str] = &[
    "system", "N_sim", "N_step", "n_M", "n_R", "n_B", "dt", "inner_dt", "seed",
];
const GEN_OPTIONAL: &[&str] = &["ranges", "burn_in"];

/// Every key a generation config may carry.
pub fn generation_config_keys() -> impl Iterator<Item = &'static str> {
    GEN_REQUIRED.iter().chain(GEN_OPTIONAL).copied()
}

/// Replaces top-level keys of a JSON config with `key=value` overrides.
///
/// Values are parsed as JSON when possible, otherwise taken as strings.
/// Overrides may only name keys in `allowed`.
pub fn apply_overrides(config: &mut Value, overrides: &[(String, String)], allowed: &[&str]) -> Result<()> {
    let obj = config
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    let mut bad = Vec::new();
    for (k, v) in overrides {
        if !allowed.contains(&k.as_str()) {
            bad.push(format!("override names unknown key {k:?}"));
            continue;
        }
        let parsed = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.clone()));
        obj.insert(k.clone(), parsed);
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::ConfigViolations(bad))
    }
}

pub(crate) fn check_keys(obj: &Map<String, Value>, required: &[&str], optional: &[&str], out: &mut Vec<String>) {
    for k in obj.keys() {
        if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
            out.push(format!("unknown key {k:?}"));
        }
    }
    for k in required {
        if !obj.contains_key(*k) {
            out.push(format!("missing key {k:?}"));
        }
    }
}

pub(crate) fn field<T: serde::de::DeserializeOwned>(
    obj: &Map<String, Value>,
    key: &str,
    out: &mut Vec<String>,
) -> Option<T> {
    let v = obj.get(key)?;
    match serde_json::from_value(v.clone()) {
        Ok(t) => Some(t),
        Err(e) => {
            out.push(format!("key {key:?}: {e}"));
            None
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RangesJson {
    hidden: Option<Vec<Interval>>,
    initial_state: Option<Vec<Interval>>,
}

/// Parses and validates a generation config, reporting every violation at once.
pub fn plan_from_json(config: &Value) -> Result<GenerationPlan> {
    let obj = config
        .as_object()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    let mut errs = Vec::new();
    check_keys(obj, GEN_REQUIRED, GEN_OPTIONAL, &mut errs);

    let system: Option<SystemId> = field(obj, "system", &mut errs);
    let n_sim: Option<usize> = field(obj, "N_sim", &mut errs);
    let n_step: Option<usize> = field(obj, "N_step", &mut errs);
    let n_m: Option<usize> = field(obj, "n_M", &mut errs);
    let n_r: Option<usize> = field(obj, "n_R", &mut errs);
    let n_b: Option<usize> = field(obj, "n_B", &mut errs);
    let dt: Option<f64> = field(obj, "dt", &mut errs);
    let inner_dt: Option<f64> = field(obj, "inner_dt", &mut errs);
    let seed: Option<u64> = field(obj, "seed", &mut errs);
    let ranges: Option<RangesJson> = field(obj, "ranges", &mut errs);
    let burn_in: Option<usize> = field(obj, "burn_in", &mut errs);

    let mut record_every = None;
    if let (Some(dt), Some(inner)) = (dt, inner_dt) {
        if dt > 0.0 && inner > 0.0 && dt.is_finite() && inner.is_finite() {
            let k = (dt / inner).round();
            if k >= 1.0 && (k * inner - dt).abs() <= 1e-9 * dt {
                record_every = Some(k as usize);
            } else {
                errs.push(format!("dt = {dt} is not an integer multiple of inner_dt = {inner}"));
            }
        } else {
            errs.push(format!("dt and inner_dt must be positive, got {dt} and {inner}"));
        }
    }

    if let (Some(system), Some(n_sim), Some(n_step), Some(n_m), Some(n_r), Some(n_b), Some(inner_dt), Some(seed), Some(k)) =
        (system, n_sim, n_step, n_m, n_r, n_b, inner_dt, seed, record_every)
    {
        let mut spec = FullDtSpec::default_for(system);
        spec.inner_dt = inner_dt;
        spec.record_every = k;
        spec.burn_in = burn_in.unwrap_or(0);
        if let Some(r) = ranges {
            if let Some(h) = r.hidden {
                spec.hidden_param_ranges = h;
            }
            if let Some(i) = r.initial_state {
                spec.init_state_ranges = i;
            }
        }
        let plan = GenerationPlan {
            spec,
            n_sim,
            n_step,
            n_m,
            n_r,
            n_b,
            seed,
        };
        errs.extend(plan.violations());
        if errs.is_empty() {
            return Ok(plan);
        }
    }
    Err(Error::ConfigViolations(errs))
}

/// Inverse of [`plan_from_json`].
pub fn plan_to_json(plan: &GenerationPlan) -> Value {
    serde_json::json!({
        "system": plan.spec.system,
        "ranges": {
            "hidden": plan.spec.hidden_param_ranges,
            "initial_state": plan.spec.init_state_ranges,
        },
        "N_sim": plan.n_sim,
        "N_step": plan.n_step,
        "n_M": plan.n_m,
        "n_R": plan.n_r,
        "n_B": plan.n_b,
        "dt": plan.spec.dt(),
        "inner_dt": plan.spec.inner_dt,
        "burn_in": plan.spec.burn_in,
        "seed": plan.seed,
    })
}

// ---------------------------------------------------------------------------
// Sampling and generation

/// Draws run `j`'s hidden parameters and initial state from its own stream.
pub fn sample_run(plan: &GenerationPlan, j: usize) -> SimRun {
    let mut rng = stream_rng(plan.seed, SAMPLE_STREAM | j as u64);
    let hidden_params = plan
        .spec
        .hidden_param_ranges
        .iter()
        .map(|r| r.lerp(rng.gen::<f64>()))
        .collect();
    let initial_state = plan
        .spec
        .init_state_ranges
        .iter()
        .map(|r| r.lerp(rng.gen::<f64>()))
        .collect();
    SimRun {
        spec: plan.spec.clone(),
        hidden_params,
        initial_state,
        n_step: plan.n_step,
    }
}

/// Uniform i.i.d. draws of hidden parameters and initial states, one per run.
pub fn sample_inputs(plan: &GenerationPlan) -> Result<Vec<SimRun>> {
    plan.validate()?;
    Ok((0..plan.n_sim).map(|j| sample_run(plan, j)).collect())
}

fn run_indexed(j: usize, run: &SimRun) -> Result<Trajectory> {
    run_full_dt(run).map_err(|e| Error::RunFailed {
        run_index: j,
        hidden_params: run.hidden_params.clone(),
        initial_state: run.initial_state.clone(),
        source: Box::new(e),
    })
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs every sampled input and returns the QoI trajectories in plan order.
pub fn generate_trajectories(plan: &GenerationPlan, workers: Option<usize>) -> Result<Vec<Trajectory>> {
    let runs = sample_inputs(plan)?;
    with_pool(workers, || {
        runs.par_iter()
            .enumerate()
            .map(|(j, r)| run_indexed(j, r))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Draws `n_b` distinct burst windows from trajectory `j`.
pub fn bursts_from_trajectory(
    traj: &Trajectory,
    j: usize,
    n_m: usize,
    n_r: usize,
    n_b: usize,
    seed: u64,
) -> Result<Vec<Burst>> {
    let n_l = burst_length(n_m, n_r);
    let windows = window_count(traj.len(), n_l);
    if n_b > windows {
        return Err(Error::Data(format!(
            "trajectory {j} has {} entries, i.e. {windows} windows of length {n_l}; cannot draw n_B = {n_b}",
            traj.len()
        )));
    }
    let mut rng = stream_rng(seed, BURST_STREAM | j as u64);
    index::sample(&mut rng, windows, n_b)
        .into_iter()
        .map(|start| Burst::new(traj.qois()[start..start + n_l].to_vec(), traj.gamma().clone()))
        .collect()
}

/// Start indices used by [`bursts_from_trajectory`]; exposed for testing.
pub fn burst_starts(len: usize, j: usize, n_l: usize, n_b: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, BURST_STREAM | j as u64);
    index::sample(&mut rng, window_count(len, n_l), n_b).into_vec()
}

/// Assembles the training dataset from a trajectory set.
pub fn extract_bursts(
    trajectories: &[Trajectory],
    n_m: usize,
    n_r: usize,
    n_b: usize,
    seed: u64,
) -> Result<BurstDataset> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Data("no trajectories to extract bursts from".into()))?;
    if n_r < 1 || n_b < 1 {
        return Err(Error::Config(format!("n_R and n_B must be >= 1, got {n_r} and {n_b}")));
    }
    let (dt, n_v, n_gamma) = (first.dt(), first.n_v(), first.gamma().len());
    let mut bursts = Vec::with_capacity(n_b * trajectories.len());
    for (j, t) in trajectories.iter().enumerate() {
        if t.dt() != dt || t.n_v() != n_v || t.gamma().len() != n_gamma {
            return Err(Error::Data(format!("trajectory {j} disagrees with trajectory 0 on dt, n_V or n_gamma")));
        }
        bursts.extend(bursts_from_trajectory(t, j, n_m, n_r, n_b, seed)?);
    }
    BurstDataset::new(n_v, n_gamma, n_m, n_r, dt, bursts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationSummary {
    pub n_sim: usize,
    pub n_step: usize,
    pub n_l: usize,
    pub n_data: usize,
}

impl GenerationSummary {
    pub fn of(plan: &GenerationPlan) -> Self {
        Self {
            n_sim: plan.n_sim,
            n_step: plan.n_step,
            n_l: plan.n_l(),
            n_data: plan.n_data(),
        }
    }
}

/// Generates trajectories chunk by chunk, streaming them to an FMLT file
/// and extracting bursts as each chunk completes. Only the bursts are kept
/// in memory.
pub fn generate_to_file(plan: &GenerationPlan, trajectory_path: &Path, workers: Option<usize>) -> Result<BurstDataset> {
    plan.validate()?;
    let chunk = workers.unwrap_or_else(rayon::current_num_threads).max(1) * 8;
    let mut writer = TrajectoryWriter::create(
        trajectory_path,
        plan.spec.qoi_dim(),
        0,
        plan.n_sim as u64,
        plan.spec.dt(),
    )?;
    let mut bursts = Vec::with_capacity(plan.n_data());
    let mut start = 0;
    while start < plan.n_sim {
        let end = (start + chunk).min(plan.n_sim);
        let trajs = with_pool(workers, || {
            (start..end)
                .into_par_iter()
                .map(|j| run_indexed(j, &sample_run(plan, j)))
                .collect::<Result<Vec<_>>>()
        })??;
        for (off, t) in trajs.iter().enumerate() {
            writer.write(t)?;
            bursts.extend(bursts_from_trajectory(t, start + off, plan.n_m, plan.n_r, plan.n_b, plan.seed)?);
        }
        start = end;
    }
    writer.finish()?;
    BurstDataset::new(plan.spec.qoi_dim(), 0, plan.n_m, plan.n_r, plan.spec.dt(), bursts)
}

// ---------------------------------------------------------------------------
// Binary formats

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.buf[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_magic(path: &Path, r: &mut Reader<'_>, expected: [u8; 4]) -> Result<()> {
    let found = r.take::<4>();
    if found != expected {
        return Err(Error::MagicMismatch {
            path: path.into(),
            expected,
            found,
        });
    }
    let version = r.u32();
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            path: path.into(),
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    Ok(())
}

/// Header fields of an FMLD dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetHeader {
    pub n_v: u32,
    pub n_gamma: u32,
    pub n_m: u32,
    pub n_r: u32,
    pub n_data: u64,
    pub dt: f64,
}

impl DatasetHeader {
    pub fn n_l(&self) -> u64 {
        self.n_m as u64 + 1 + self.n_r as u64
    }

    pub fn record_bytes(&self) -> u64 {
        8 * (self.n_l() * self.n_v as u64 + self.n_gamma as u64)
    }
}

fn parse_dataset_header(path: &Path, bytes: &[u8], file_len: u64) -> Result<DatasetHeader> {
    if bytes.len() < DATASET_HEADER_LEN {
        // Still report a bad magic before a short read when we can see it.
        if bytes.len() >= 4 && bytes[..4] != DATASET_MAGIC {
            return Err(Error::MagicMismatch {
                path: path.into(),
                expected: DATASET_MAGIC,
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(Error::Truncated {
            path: path.into(),
            len: bytes.len(),
        });
    }
    let mut r = Reader::new(bytes);
    check_magic(path, &mut r, DATASET_MAGIC)?;
    let h = DatasetHeader {
        n_v: r.u32(),
        n_gamma: r.u32(),
        n_m: r.u32(),
        n_r: r.u32(),
        n_data: r.u64(),
        dt: r.f64(),
    };
    if h.n_v == 0 || h.n_r == 0 || !(h.dt.is_finite() && h.dt > 0.0) {
        return Err(Error::DimensionMismatch {
            path: path.into(),
            detail: format!("n_V = {}, n_R = {}, dt = {}", h.n_v, h.n_r, h.dt),
        });
    }
    let expected = h.n_data.checked_mul(h.record_bytes()).ok_or_else(|| Error::DimensionMismatch {
        path: path.into(),
        detail: "payload size overflows".into(),
    })?;
    let actual = file_len - DATASET_HEADER_LEN as u64;
    if expected != actual {
        return Err(Error::SizeMismatch {
            path: path.into(),
            expected,
            actual,
        });
    }
    Ok(h)
}

/// Reads and checks an FMLD header without loading the payload.
pub fn read_dataset_header(path: &Path) -> Result<DatasetHeader> {
    use std::io::Read;
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut head = Vec::with_capacity(DATASET_HEADER_LEN);
    f.take(DATASET_HEADER_LEN as u64)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    parse_dataset_header(path, &head, len)
}

pub fn encode_dataset(d: &BurstDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(DATASET_HEADER_LEN + d.n_data() * 8 * (d.n_l() * d.n_v + d.n_gamma));
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [d.n_v, d.n_gamma, d.n_m, d.n_r] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(d.n_data() as u64).to_le_bytes());
    out.extend_from_slice(&d.dt.to_le_bytes());
    for b in &d.bursts {
        for q in b.entries() {
            for v in q.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in b.gamma().as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_dataset(path: &Path, bytes: &[u8]) -> Result<BurstDataset> {
    let h = parse_dataset_header(path, bytes, bytes.len() as u64)?;
    let mut r = Reader::new(&bytes[DATASET_HEADER_LEN..]);
    let (n_v, n_gamma, n_l) = (h.n_v as usize, h.n_gamma as usize, h.n_l() as usize);
    let bad = |e: Error| Error::Data(format!("{}: {e}", path.display()));
    let mut bursts = Vec::with_capacity(h.n_data as usize);
    for _ in 0..h.n_data {
        let entries = (0..n_l)
            .map(|_| QoiVector::new((0..n_v).map(|_| r.f64()).collect()))
            .collect::<Result<Vec<_>>>()
            .map_err(bad)?;
        let gamma = ExplicitParams::new((0..n_gamma).map(|_| r.f64()).collect()).map_err(bad)?;
        bursts.push(Burst::new(entries, gamma).map_err(bad)?);
    }
    BurstDataset::new(n_v, n_gamma, h.n_m as usize, h.n_r as usize, h.dt, bursts).map_err(bad)
}

pub fn save_dataset(d: &BurstDataset, path: &Path) -> Result<()> {
    let violations = crate::types::validate_dataset(d);
    if !violations.is_empty() {
        return Err(Error::Data(violations.join("; ")));
    }
    std::fs::write(path, encode_dataset(d)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<BurstDataset> {
    decode_dataset(path, &read_file(path)?)
}

/// Incremental FMLT writer. The record count is fixed up front.
pub struct TrajectoryWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    n_v: usize,
    n_gamma: usize,
    expected: u64,
    written: u64,
}

impl TrajectoryWriter {
    pub fn create(path: &Path, n_v: usize, n_gamma: usize, n_records: u64, dt: f64) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        let mut head = Vec::with_capacity(TRAJECTORY_HEADER_LEN);
        head.extend_from_slice(&TRAJECTORY_MAGIC);
        head.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        head.extend_from_slice(&(n_v as u32).to_le_bytes());
        head.extend_from_slice(&(n_gamma as u32).to_le_bytes());
        head.extend_from_slice(&n_records.to_le_bytes());
        head.extend_from_slice(&dt.to_le_bytes());
        out.write_all(&head).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out,
            path: path.into(),
            n_v,
            n_gamma,
            expected: n_records,
            written: 0,
        })
    }

    pub fn write(&mut self, t: &Trajectory) -> Result<()> {
        if t.n_v() != self.n_v || t.gamma().len() != self.n_gamma {
            return Err(Error::Data(format!(
                "trajectory dims ({}, {}) do not match file dims ({}, {})",
                t.n_v(),
                t.gamma().len(),
                self.n_v,
                self.n_gamma
            )));
        }
        let mut buf = Vec::with_capacity(8 + 8 * (t.len() * self.n_v + self.n_gamma));
        buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for q in t.qois() {
            for v in q.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in t.gamma().as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf).map_err(|e| Error::io(&self.path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.expected {
            return Err(Error::Data(format!(
                "wrote {} trajectories, header declares {}",
                self.written, self.expected
            )));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn save_trajectories(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Data("no trajectories to save".into()))?;
    let mut w = TrajectoryWriter::create(path, first.n_v(), first.gamma().len(), trajectories.len() as u64, first.dt())?;
    for t in trajectories {
        if t.dt() != first.dt() {
            return Err(Error::Data("trajectories disagree on dt".into()));
        }
        w.write(t)?;
    }
    w.finish()
}

/// Header fields of an FMLT trajectory file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryHeader {
    pub n_v: u32,
    pub n_gamma: u32,
    pub n_records: u64,
    pub dt: f64,
}

fn parse_trajectory_header(path: &Path, r: &mut Reader<'_>) -> Result<TrajectoryHeader> {
    if r.remaining() < TRAJECTORY_HEADER_LEN {
        return Err(Error::Truncated {
            path: path.into(),
            len: r.remaining(),
        });
    }
    check_magic(path, r, TRAJECTORY_MAGIC)?;
    let h = TrajectoryHeader {
        n_v: r.u32(),
        n_gamma: r.u32(),
        n_records: r.u64(),
        dt: r.f64(),
    };
    if h.n_v == 0 || !(h.dt.is_finite() && h.dt > 0.0) {
        return Err(Error::DimensionMismatch {
            path: path.into(),
            detail: format!("n_V = {}, dt = {}", h.n_v, h.dt),
        });
    }
    Ok(h)
}

pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes);
    let h = parse_trajectory_header(path, &mut r)?;
    let (n_v, n_gamma) = (h.n_v as usize, h.n_gamma as usize);
    let short = |needed: usize, r: &Reader<'_>| Error::SizeMismatch {
        path: path.into(),
        expected: (r.pos + needed) as u64,
        actual: bytes.len() as u64,
    };
    let bad = |e: Error| Error::Data(format!("{}: {e}", path.display()));
    let mut out = Vec::with_capacity(h.n_records as usize);
    for _ in 0..h.n_records {
        if r.remaining() < 8 {
            return Err(short(8, &r));
        }
        let len = r.u64() as usize;
        let needed = len
            .checked_mul(n_v)
            .and_then(|x| x.checked_add(n_gamma))
            .and_then(|x| x.checked_mul(8))
            .ok_or_else(|| short(usize::MAX - r.pos, &r))?;
        if r.remaining() < needed {
            return Err(short(needed, &r));
        }
        let qois = (0..len)
            .map(|_| QoiVector::new((0..n_v).map(|_| r.f64()).collect()))
            .collect::<Result<Vec<_>>>()
            .map_err(bad)?;
        let gamma = ExplicitParams::new((0..n_gamma).map(|_| r.f64()).collect()).map_err(bad)?;
        out.push(Trajectory::new(h.dt, qois, gamma).map_err(bad)?);
    }
    if r.remaining() != 0 {
        return Err(Error::SizeMismatch {
            path: path.into(),
            expected: r.pos as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(out)
}

pub fn read_trajectory_header(path: &Path) -> Result<TrajectoryHeader> {
    use std::io::Read;
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = Vec::with_capacity(TRAJECTORY_HEADER_LEN);
    f.take(TRAJECTORY_HEADER_LEN as u64)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    parse_trajectory_header(path, &mut Reader::new(&head))
}
