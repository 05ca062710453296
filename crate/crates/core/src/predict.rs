//! Online use of a trained twin and the diagnostics used to validate it:
//! long rollouts from a synchronizing window, truncated Fourier series,
//! Hann-windowed amplitude spectra, and error metrics.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fml::FlowMapModel;
use crate::types::{ExplicitParams, FourierSeries, QoiVector};

/// Continues the QoI series `horizon_steps` steps past the initial window.
///
/// The tDT sees only the window and `gamma`; whatever hidden parameters
/// produced the window are inferred implicitly from it.
pub fn predict_qoi(
    model: &FlowMapModel,
    initial_window: &[QoiVector],
    gamma: &ExplicitParams,
    horizon_steps: usize,
) -> Result<Vec<QoiVector>> {
    model.rollout(initial_window, gamma, horizon_steps)
}

pub fn fourier_eval(series: &FourierSeries, theta: f64) -> f64 {
    let mut v = series.a0;
    for (n, (a, b)) in series.a.iter().zip(&series.b).enumerate() {
        let k = (n + 1) as f64;
        let (s, c) = (k * theta).sin_cos();
        v += a * c + b * s;
    }
    v
}

/// Least-squares fit of a truncated Fourier series of order `order` to
/// `(theta, value)` samples.
pub fn fourier_fit(samples: &[(f64, f64)], order: usize) -> Result<FourierSeries> {
    let n_coef = 2 * order + 1;
    if samples.len() < n_coef {
        return Err(Error::RankDeficient(format!(
            "{} samples for {n_coef} coefficients",
            samples.len()
        )));
    }
    let design = DMatrix::from_fn(samples.len(), n_coef, |i, j| {
        let theta = samples[i].0;
        match j {
            0 => 1.0,
            j if j <= order => (j as f64 * theta).cos(),
            j => ((j - order) as f64 * theta).sin(),
        }
    });
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let svd = design.svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), s| (hi.max(*s), lo.min(*s)));
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!(
            "design matrix condition {smax:e}/{smin:e}; too few distinct angles"
        )));
    }
    let coef = svd
        .solve(&rhs, 1e-14 * smax)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    FourierSeries::new(
        coef[0],
        coef.rows(1, order).iter().copied().collect(),
        coef.rows(1 + order, order).iter().copied().collect(),
    )
}

/// Samples `values` taken at `m` equispaced angles on `[0, 2*pi)`.
pub fn equispaced_samples(m: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / m as f64;
            (t, f(t))
        })
        .collect()
}

/// `e_2 = sqrt(int_{-pi}^{pi} (P_pred - P_ref)^2 dtheta)`, in closed form
/// through Parseval's identity.
pub fn l2_surface_error(pred: &FourierSeries, reference: &FourierSeries) -> Result<f64> {
    if pred.order() != reference.order() {
        return Err(Error::Data(format!(
            "Fourier orders differ: {} vs {}",
            pred.order(),
            reference.order()
        )));
    }
    let da0 = pred.a0 - reference.a0;
    let mut s = 0.0;
    for n in 0..pred.order() {
        let da = pred.a[n] - reference.a[n];
        let db = pred.b[n] - reference.b[n];
        s += da * da + db * db;
    }
    Ok((2.0 * PI * da0 * da0 + PI * s).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peak {
    pub frequency: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// Bin frequencies `k / (M dt)`, `k = 0..=M/2`.
    pub frequencies: Vec<f64>,
    /// Window-corrected one-sided amplitudes.
    pub amplitudes: Vec<f64>,
    /// Local maxima of `amplitudes`, largest first.
    pub ranked_peaks: Vec<Peak>,
}

impl SpectrumResult {
    pub fn bin_width(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    pub fn dominant(&self) -> Option<&Peak> {
        self.ranked_peaks.first()
    }

    pub fn top(&self, n: usize) -> &[Peak] {
        &self.ranked_peaks[..n.min(self.ranked_peaks.len())]
    }
}

/// Periodic Hann window of length `m`.
pub fn hann(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / m as f64).cos()))
        .collect()
}

/// Amplitude spectrum of a uniformly sampled real signal: mean removed,
/// Hann-windowed, one-sided. Peaks are local maxima only, so side bins of
/// a single spectral line are never ranked separately.
pub fn spectrum(signal: &[f64], dt: f64) -> Result<SpectrumResult> {
    let m = signal.len();
    if m < 16 {
        return Err(Error::Data(format!("spectrum needs at least 16 samples, got {m}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Data(format!("sampling step must be > 0, got {dt}")));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("signal[{i}] = {}", signal[i])));
    }
    let mean = signal.iter().sum::<f64>() / m as f64;
    let scale = signal.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let w = hann(m);
    let wsum: f64 = w.iter().sum();
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&w)
        .map(|(x, w)| Complex::new((x - mean) * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let half = m / 2;
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 / (m as f64 * dt)).collect();
    let amplitudes: Vec<f64> = buf[..=half].iter().map(|c| 2.0 * c.norm() / wsum).collect();

    let floor = 1e-12 * scale;
    let mut ranked_peaks: Vec<Peak> = (1..half)
        .filter(|&k| {
            let a = amplitudes[k];
            a > floor && a > amplitudes[k - 1] && a >= amplitudes[k + 1]
        })
        .map(|k| Peak {
            frequency: frequencies[k],
            amplitude: amplitudes[k],
        })
        .collect();
    ranked_peaks.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
    Ok(SpectrumResult {
        frequencies,
        amplitudes,
        ranked_peaks,
    })
}

fn check_aligned(pred: &[QoiVector], reference: &[QoiVector]) -> Result<usize> {
    if pred.len() != reference.len() {
        return Err(Error::Data(format!(
            "series lengths differ: {} vs {}",
            pred.len(),
            reference.len()
        )));
    }
    let n_v = reference.first().map_or(0, QoiVector::len);
    if pred.iter().chain(reference).any(|q| q.len() != n_v) {
        return Err(Error::Data("series dimensions differ".into()));
    }
    Ok(n_v)
}

/// `|pred - ref|` per step and component.
pub fn pointwise_error(pred: &[QoiVector], reference: &[QoiVector]) -> Result<Vec<Vec<f64>>> {
    check_aligned(pred, reference)?;
    Ok(pred
        .iter()
        .zip(reference)
        .map(|(p, r)| {
            p.as_slice()
                .iter()
                .zip(r.as_slice())
                .map(|(a, b)| (a - b).abs())
                .collect()
        })
        .collect())
}

/// Per-component error summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentError {
    pub rms: f64,
    pub max_abs: f64,
}

pub fn component_errors(pred: &[QoiVector], reference: &[QoiVector]) -> Result<Vec<ComponentError>> {
    let n_v = check_aligned(pred, reference)?;
    let errs = pointwise_error(pred, reference)?;
    let n = errs.len().max(1) as f64;
    Ok((0..n_v)
        .map(|c| {
            let sq: f64 = errs.iter().map(|e| e[c] * e[c]).sum();
            ComponentError {
                rms: (sq / n).sqrt(),
                max_abs: errs.iter().fold(0.0, |m, e| m.max(e[c])),
            }
        })
        .collect())
}

/// `sqrt(sum |pred - ref|^2 / sum |ref|^2)` over all steps and components.
pub fn relative_rms_error(pred: &[QoiVector], reference: &[QoiVector]) -> Result<f64> {
    check_aligned(pred, reference)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (p, r) in pred.iter().zip(reference) {
        for (a, b) in p.as_slice().iter().zip(r.as_slice()) {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    if den == 0.0 {
        return Err(Error::Data("reference series is identically zero".into()));
    }
    Ok((num / den).sqrt())
}

/// A time-indexed table of named series, as exchanged through CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    /// Rows at `t0 + i * dt`.
    pub fn from_qois(names: Vec<String>, t0: f64, dt: f64, qois: &[QoiVector]) -> Self {
        Self {
            names,
            t: (0..qois.len()).map(|i| t0 + i as f64 * dt).collect(),
            rows: qois.iter().map(|q| q.as_slice().to_vec()).collect(),
        }
    }

    pub fn default_names(n_v: usize) -> Vec<String> {
        (0..n_v).map(|c| format!("v{c}")).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    pub fn qois(&self) -> Result<Vec<QoiVector>> {
        self.rows.iter().map(|r| QoiVector::new(r.clone())).collect()
    }

    /// Sampling step inferred from the first two rows.
    pub fn dt(&self) -> Option<f64> {
        (self.t.len() >= 2).then(|| self.t[1] - self.t[0])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (t, row) in self.t.iter().zip(&self.rows) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::Data(format!("{}: {msg}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.get(0) != Some("t") {
            return Err(bad("first column must be named \"t\"".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut t = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            if vals.len() != names.len() + 1 {
                return Err(bad(format!("row {} has {} fields, expected {}", i + 1, vals.len(), names.len() + 1)));
            }
            t.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        Ok(Self { names, t, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(a0: f64, a: &[f64], b: &[f64]) -> FourierSeries {
        FourierSeries::new(a0, a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn eval_basics() {
        let c = series(2.0, &[0.0; 3], &[0.0; 3]);
        for t in [-3.0, 0.0, 1.0, 10.0] {
            assert_eq!(fourier_eval(&c, t), 2.0);
        }
        let cos1 = series(0.0, &[1.0], &[0.0]);
        assert_eq!(fourier_eval(&cos1, 0.0), 1.0);
        assert!((fourier_eval(&cos1, PI) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_exact_low_order_signals() {
        let s = fourier_fit(&equispaced_samples(128, |t| 1.0 + t.cos()), 30).unwrap();
        assert!((s.a0 - 1.0).abs() < 1e-10 && (s.a[0] - 1.0).abs() < 1e-10);
        assert!(s.a[1..].iter().chain(&s.b).all(|c| c.abs() < 1e-10));

        let s = fourier_fit(&equispaced_samples(128, |t| (2.0 * t).sin()), 30).unwrap();
        assert!((s.b[1] - 1.0).abs() < 1e-10);
        let others = s.a.iter().chain(&s.b[..1]).chain(&s.b[2..]).chain(std::iter::once(&s.a0));
        assert!(others.into_iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn fit_rejects_too_few_or_repeated_samples() {
        let few = equispaced_samples(10, |t| t.cos());
        assert!(matches!(fourier_fit(&few, 5), Err(Error::RankDeficient(_))));
        // 20 samples but only 4 distinct angles.
        let rep: Vec<_> = (0..20).map(|i| ((i % 4) as f64, 1.0)).collect();
        assert!(matches!(fourier_fit(&rep, 3), Err(Error::RankDeficient(_))));
        // Same angles modulo 2*pi.
        let wrap: Vec<_> = (0..20)
            .map(|i| ((i % 5) as f64 + 2.0 * PI * (i / 5) as f64, 1.0))
            .collect();
        assert!(fourier_fit(&wrap, 3).is_err());
    }

    #[test]
    fn l2_error_special_cases() {
        let a = series(0.5, &[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3]);
        assert_eq!(l2_surface_error(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.a0 += 0.25;
        assert!((l2_surface_error(&a, &b).unwrap() - (2.0 * PI).sqrt() * 0.25).abs() < 1e-14);
        let mut c = a.clone();
        c.b[2] -= 0.5;
        assert!((l2_surface_error(&a, &c).unwrap() - PI.sqrt() * 0.5).abs() < 1e-14);
        assert!(l2_surface_error(&a, &series(0.0, &[0.0], &[0.0])).is_err());
    }

    #[test]
    fn constant_signal_has_no_peaks() {
        for c in [0.0, 3.7, -1e6] {
            let s = spectrum(&vec![c; 256], 0.1).unwrap();
            assert!(s.ranked_peaks.is_empty(), "c = {c}: {:?}", s.top(3));
        }
    }

    #[test]
    fn spectrum_shape_and_errors() {
        let x: Vec<f64> = (0..100).map(|i| (0.3 * i as f64).sin()).collect();
        let s = spectrum(&x, 0.5).unwrap();
        assert_eq!(s.frequencies.len(), 51);
        assert!(s.frequencies.windows(2).all(|w| w[1] > w[0]));
        assert!(*s.frequencies.last().unwrap() <= 1.0 / (2.0 * 0.5) + 1e-15);
        assert!(s.ranked_peaks.windows(2).all(|w| w[0].amplitude >= w[1].amplitude));
        assert!(spectrum(&x[..15], 0.5).is_err());
        let mut bad = x.clone();
        bad[3] = f64::NAN;
        assert!(spectrum(&bad, 0.5).is_err());
    }

    #[test]
    fn non_power_of_two_length() {
        let dt = 0.1;
        let x: Vec<f64> = (0..1000).map(|i| (2.0 * PI * 0.13 * i as f64 * dt).cos()).collect();
        let s = spectrum(&x, dt).unwrap();
        assert!((s.dominant().unwrap().frequency - 0.13).abs() <= s.bin_width());
    }

    #[test]
    fn pointwise_errors() {
        let q = |v: f64| QoiVector::new(vec![v, -v]).unwrap();
        let r = vec![q(1.25), q(2.0)];
        assert!(pointwise_error(&r, &r).unwrap().iter().flatten().all(|e| *e == 0.0));
        let p = vec![q(1.5), q(2.0)];
        assert_eq!(pointwise_error(&p, &r).unwrap()[0], vec![0.25, 0.25]);
        let shifted: Vec<_> = r.iter().map(|x| QoiVector::new(vec![x.as_slice()[0] + 0.1, x.as_slice()[1]]).unwrap()).collect();
        let ce = component_errors(&shifted, &r).unwrap();
        assert!((ce[0].rms - 0.1).abs() < 1e-12 && ce[1].rms == 0.0);
        assert!(pointwise_error(&p[..1], &r).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let qs: Vec<_> = (0..5).map(|i| QoiVector::new(vec![i as f64 * 0.1, 1.0 / 3.0]).unwrap()).collect();
        let tab = SeriesTable::from_qois(vec!["a".into(), "b".into()], 0.0, 0.1, &qs);
        tab.write_csv(&p).unwrap();
        assert_eq!(SeriesTable::read_csv(&p).unwrap(), tab);
    }
}
