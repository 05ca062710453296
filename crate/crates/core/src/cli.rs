//! Command implementations behind the `tdt` binary.
//!
//! Every command is a plain function of its inputs (config, seed, paths),
//! so the whole generate -> train -> predict -> evaluate chain can be
//! driven from tests exactly as from the shell.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fml::{self, FlowMapModel, TrainSpec};
use crate::pipeline::{self, GenerationSummary};
use crate::predict::{self, Peak, SeriesTable};
use crate::types::{ExplicitParams, FourierSeries};

pub const TRAJECTORY_FILE: &str = "trajectories.fmlt";
pub const DATASET_FILE: &str = "dataset.fmld";
pub const MODEL_FILE: &str = "model.fmlm";
pub const LOSS_FILE: &str = "loss.csv";
pub const PREDICTION_FILE: &str = "prediction.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SPECTRUM_FILE: &str = "spectrum.json";

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dry_run: bool,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
}

impl GlobalOpts {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn require_config(&self) -> Result<&Path> {
        self.config
            .as_deref()
            .ok_or_else(|| Error::Config("--config PATH is required".into()))
    }
}

/// Splits a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Config(format!("override {s:?} is not key=value"))),
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: invalid JSON: {e}", path.display())))
}

fn load_config(opts: &GlobalOpts, keys: &[&str]) -> Result<Value> {
    let mut v = read_json(opts.require_config()?)?;
    pipeline::apply_overrides(&mut v, &opts.overrides, keys)?;
    if let Some(seed) = opts.seed {
        if let Some(obj) = v.as_object_mut() {
            obj.insert("seed".into(), seed.into());
        }
    }
    Ok(v)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).expect("serializable report");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Result of `generate`.
#[derive(Debug, Clone, Serialize)]
pub struct GenerateReport {
    pub summary: GenerationSummary,
    pub dry_run: bool,
    pub trajectory_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
}

impl std::fmt::Display for GenerateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = &self.summary;
        writeln!(f, "N_sim = {}", s.n_sim)?;
        writeln!(f, "N_step = {}", s.n_step)?;
        writeln!(f, "n_L = {}", s.n_l)?;
        write!(f, "N_data = {}", s.n_data)?;
        if self.dry_run {
            write!(f, "\n(dry run: nothing computed)")?;
        }
        Ok(())
    }
}

/// Samples, runs the full DT, and writes the trajectory and burst files.
pub fn cmd_generate(opts: &GlobalOpts) -> Result<GenerateReport> {
    let keys: Vec<_> = pipeline::generation_config_keys().collect();
    let plan = pipeline::plan_from_json(&load_config(opts, &keys)?)?;
    let summary = GenerationSummary::of(&plan);
    if opts.dry_run {
        return Ok(GenerateReport {
            summary,
            dry_run: true,
            trajectory_path: None,
            dataset_path: None,
        });
    }
    let dir = opts.out_dir();
    create_dir(&dir)?;
    let traj = dir.join(TRAJECTORY_FILE);
    let data = dir.join(DATASET_FILE);
    let dataset = pipeline::generate_to_file(&plan, &traj, opts.workers)?;
    pipeline::save_dataset(&dataset, &data)?;
    Ok(GenerateReport {
        summary,
        dry_run: false,
        trajectory_path: Some(traj),
        dataset_path: Some(data),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub plan: fml::TrainPlan,
    pub layer_widths: Vec<usize>,
    pub final_loss: Option<f64>,
    pub model_path: Option<PathBuf>,
    pub loss_path: Option<PathBuf>,
}

impl std::fmt::Display for TrainReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "layer widths {:?}", self.layer_widths)?;
        write!(
            f,
            "{} bursts, {} batches/epoch, {} epochs, {} iterations",
            self.plan.n_data, self.plan.batches_per_epoch, self.plan.epochs, self.plan.total_iterations
        )?;
        if let Some(l) = self.final_loss {
            write!(f, "\nfinal epoch loss {l:e}")?;
        }
        Ok(())
    }
}

/// Trains a flow map on a dataset file; writes the model and per-epoch losses.
pub fn cmd_train(opts: &GlobalOpts, dataset_path: &Path) -> Result<TrainReport> {
    let keys: Vec<_> = fml::train_config_keys().collect();
    let mut spec = TrainSpec::from_json(&load_config(opts, &keys)?)?;
    let header = pipeline::read_dataset_header(dataset_path)?;
    if spec.config.n_r == 0 {
        spec.config.n_r = header.n_r as usize;
    } else if spec.config.n_r != header.n_r as usize {
        return Err(Error::Config(format!(
            "config n_R = {} but dataset {} has n_R = {}",
            spec.config.n_r,
            dataset_path.display(),
            header.n_r
        )));
    }
    let model = FlowMapModel::init(
        header.n_v as usize,
        header.n_gamma as usize,
        header.n_m as usize,
        &spec.hidden_widths,
        spec.config.rng_seed,
    )?
    .with_residual(spec.residual);
    let plan = fml::plan_training(header.n_data as usize, &spec.config)?;
    let widths = model.layer_widths().to_vec();
    if opts.dry_run {
        return Ok(TrainReport {
            plan,
            layer_widths: widths,
            final_loss: None,
            model_path: None,
            loss_path: None,
        });
    }
    let dataset = pipeline::load_dataset(dataset_path)?;
    let outcome = fml::train(model, &dataset, &spec.config)?;
    let dir = opts.out_dir();
    create_dir(&dir)?;
    let model_path = dir.join(MODEL_FILE);
    let loss_path = dir.join(LOSS_FILE);
    fml::save_model(&outcome.model, &model_path)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_history.iter().enumerate() {
        csv.push_str(&format!("{e},{l}\n"));
    }
    std::fs::write(&loss_path, csv).map_err(|e| Error::io(&loss_path, e))?;
    Ok(TrainReport {
        plan,
        layer_widths: widths,
        final_loss: outcome.loss_history.last().copied(),
        model_path: Some(model_path),
        loss_path: Some(loss_path),
    })
}

/// Loads a model and a window CSV of exactly `n_M + 1` rows and writes the
/// predicted continuation. Prediction times continue the window's clock.
pub fn cmd_predict(model_path: &Path, window_csv: &Path, horizon: usize, out_csv: &Path) -> Result<SeriesTable> {
    let model = fml::load_model(model_path)?;
    let window = SeriesTable::read_csv(window_csv)?;
    let need = model.window_len();
    if window.len() != need {
        return Err(Error::Data(format!(
            "{}: window has {} rows; {need} rows required (n_M + 1)",
            window_csv.display(),
            window.len()
        )));
    }
    if window.names.len() != model.n_v() {
        return Err(Error::Data(format!(
            "{}: window has {} value columns, model has n_V = {}",
            window_csv.display(),
            window.names.len(),
            model.n_v()
        )));
    }
    if model.n_gamma() != 0 {
        return Err(Error::Config(
            "models with explicit parameters need gamma, which the CSV window does not carry".into(),
        ));
    }
    let dt = model
        .dt()
        .or_else(|| window.dt())
        .ok_or_else(|| Error::Data("cannot determine the time step".into()))?;
    let pred = predict::predict_qoi(&model, &window.qois()?, &ExplicitParams::empty(), horizon)?;
    let table = SeriesTable {
        names: window.names.clone(),
        t: (0..pred.len()).map(|i| window.t[0] + (need + i) as f64 * dt).collect(),
        rows: pred.iter().map(|q| q.as_slice().to_vec()).collect(),
    };
    table.write_csv(out_csv)?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentMetrics {
    pub name: String,
    pub rms: f64,
    pub max_abs: f64,
    pub peaks_pred: Vec<Peak>,
    pub peaks_ref: Vec<Peak>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceMetrics {
    pub order: usize,
    pub e2: Vec<f64>,
    pub e2_mean: f64,
    pub e2_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub n_steps: usize,
    pub components: Vec<ComponentMetrics>,
    pub l2_surface: Option<SurfaceMetrics>,
}

fn top_peaks(signal: &[f64], dt: f64, n: usize) -> Result<Vec<Peak>> {
    if signal.len() < 16 {
        return Ok(Vec::new());
    }
    Ok(predict::spectrum(signal, dt)?.top(n).to_vec())
}

/// Compares a predicted series with a reference series on the same clock.
/// In Fourier mode the columns are `(a0, a1..aN, b1..bN)` and the `L^2`
/// surface error is reported per row.
pub fn evaluate_tables(pred: &SeriesTable, reference: &SeriesTable, fourier: bool) -> Result<Metrics> {
    if pred.len() != reference.len() {
        return Err(Error::Data(format!(
            "misaligned time columns: {} vs {} rows",
            pred.len(),
            reference.len()
        )));
    }
    if let Some(i) = pred
        .t
        .iter()
        .zip(&reference.t)
        .position(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0))
    {
        return Err(Error::Data(format!(
            "misaligned time columns at row {i}: t = {} vs {}",
            pred.t[i], reference.t[i]
        )));
    }
    if pred.names.len() != reference.names.len() {
        return Err(Error::Data("column counts differ".into()));
    }
    let (p, r) = (pred.qois()?, reference.qois()?);
    let errs = predict::component_errors(&p, &r)?;
    let dt = reference.dt().unwrap_or(1.0);
    let mut components = Vec::with_capacity(errs.len());
    for (c, e) in errs.into_iter().enumerate() {
        components.push(ComponentMetrics {
            name: reference.names[c].clone(),
            rms: e.rms,
            max_abs: e.max_abs,
            peaks_pred: top_peaks(&pred.column(c), dt, 4)?,
            peaks_ref: top_peaks(&reference.column(c), dt, 4)?,
        });
    }
    let l2_surface = if fourier {
        let e2 = p
            .iter()
            .zip(&r)
            .map(|(a, b)| predict::l2_surface_error(&FourierSeries::from_qoi(a)?, &FourierSeries::from_qoi(b)?))
            .collect::<Result<Vec<_>>>()?;
        let n = e2.len().max(1) as f64;
        Some(SurfaceMetrics {
            order: reference.names.len() / 2,
            e2_mean: e2.iter().sum::<f64>() / n,
            e2_max: e2.iter().fold(0.0, |m, v| m.max(*v)),
            e2,
        })
    } else {
        None
    };
    Ok(Metrics {
        n_steps: pred.len(),
        components,
        l2_surface,
    })
}

pub fn cmd_evaluate(pred_csv: &Path, ref_csv: &Path, fourier: bool, out_json: &Path) -> Result<Metrics> {
    let m = evaluate_tables(&SeriesTable::read_csv(pred_csv)?, &SeriesTable::read_csv(ref_csv)?, fourier)?;
    write_json(out_json, &m)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSpectrum {
    pub name: String,
    pub bin_width: f64,
    pub peaks: Vec<Peak>,
}

/// Ranked spectral peaks of one or all columns of a series CSV.
pub fn cmd_spectrum(input_csv: &Path, column: Option<&str>, top: usize, out_json: &Path) -> Result<Vec<ColumnSpectrum>> {
    let table = SeriesTable::read_csv(input_csv)?;
    let dt = table
        .dt()
        .ok_or_else(|| Error::Data(format!("{}: need at least two rows", input_csv.display())))?;
    let cols: Vec<usize> = match column {
        Some(name) => vec![table
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Data(format!("no column named {name:?}")))?],
        None => (0..table.names.len()).collect(),
    };
    let mut out = Vec::with_capacity(cols.len());
    for c in cols {
        let s = predict::spectrum(&table.column(c), dt)?;
        out.push(ColumnSpectrum {
            name: table.names[c].clone(),
            bin_width: s.bin_width(),
            peaks: s.top(top).to_vec(),
        });
    }
    write_json(out_json, &out)?;
    Ok(out)
}

/// Checks a config and any given file headers; never writes anything.
pub fn cmd_validate(
    opts: &GlobalOpts,
    dataset: Option<&Path>,
    model: Option<&Path>,
    trajectories: Option<&Path>,
) -> Result<Vec<String>> {
    let mut report = Vec::new();
    if let Some(path) = &opts.config {
        let raw = read_json(path)?;
        if raw.get("system").is_some() {
            let keys: Vec<_> = pipeline::generation_config_keys().collect();
            let plan = pipeline::plan_from_json(&load_config(opts, &keys)?)?;
            report.push(format!(
                "{}: generation config ok (N_data = {})",
                path.display(),
                plan.n_data()
            ));
        } else {
            let keys: Vec<_> = fml::train_config_keys().collect();
            let spec = TrainSpec::from_json(&load_config(opts, &keys)?)?;
            report.push(format!(
                "{}: training config ok (hidden widths {:?})",
                path.display(),
                spec.hidden_widths
            ));
        }
    }
    if let Some(p) = dataset {
        let h = pipeline::read_dataset_header(p)?;
        report.push(format!(
            "{}: dataset ok (n_V {}, n_gamma {}, n_M {}, n_R {}, N_data {}, dt {})",
            p.display(),
            h.n_v,
            h.n_gamma,
            h.n_m,
            h.n_r,
            h.n_data,
            h.dt
        ));
    }
    if let Some(p) = trajectories {
        let h = pipeline::read_trajectory_header(p)?;
        report.push(format!(
            "{}: trajectory file ok ({} records, n_V {}, dt {})",
            p.display(),
            h.n_records,
            h.n_v,
            h.dt
        ));
    }
    if let Some(p) = model {
        let m = fml::load_model(p)?;
        report.push(format!("{}: model ok (widths {:?})", p.display(), m.layer_widths()));
    }
    if report.is_empty() {
        return Err(Error::Config("nothing to validate: pass --config, --dataset, --model or --trajectories".into()));
    }
    Ok(report)
}

/// Default output path inside `--out` when a command has no explicit one.
pub fn output_path(opts: &GlobalOpts, explicit: Option<&Path>, default_name: &str) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| opts.out_dir().join(default_name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_parsing() {
        assert_eq!(parse_override("N_sim=4").unwrap(), ("N_sim".into(), "4".into()));
        assert!(parse_override("N_sim").is_err());
        assert!(parse_override("=3").is_err());
    }

    #[test]
    fn misaligned_clock_rejected() {
        let q = vec![crate::types::QoiVector::new(vec![1.0]).unwrap(); 3];
        let a = SeriesTable::from_qois(vec!["x".into()], 0.0, 0.1, &q);
        let b = SeriesTable::from_qois(vec!["x".into()], 0.05, 0.1, &q);
        let err = evaluate_tables(&a, &b, false).unwrap_err();
        assert!(err.to_string().contains("misaligned"));
        assert!(evaluate_tables(&a, &a, false).is_ok());
    }
}
