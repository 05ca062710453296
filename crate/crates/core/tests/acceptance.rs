//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 4 and 5 train real models and take several minutes in an
//! optimized build.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tdt::fml::{self, FlowMapModel, Normalization, TrainConfig};
use tdt::pipeline::{
    self, burst_starts, extract_bursts, generate_trajectories, sample_run, window_count, GenerationPlan,
    GenerationSummary,
};
use tdt::predict::{self, equispaced_samples, fourier_eval, fourier_fit, l2_surface_error, spectrum};
use tdt::sims::{run_full_dt, FullDtSpec};
use tdt::types::{burst_length, total_bursts};
use tdt::{Burst, BurstDataset, Error, ExplicitParams, FourierSeries, QoiVector, Trajectory};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_burst(rng: &mut ChaCha8Rng, n_l: usize, n_v: usize, n_gamma: usize) -> Burst {
    let entries = (0..n_l)
        .map(|_| QoiVector::new((0..n_v).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap())
        .collect();
    let gamma = ExplicitParams::new((0..n_gamma).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    Burst::new(entries, gamma).unwrap()
}

// ---------------------------------------------------------------------------

fn gradient_oracle() -> Outcome {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut n_params = 0;
    let trials = 120;
    for trial in 0..trials {
        let n_v = rng.gen_range(1..=2);
        let n_gamma = rng.gen_range(0..=1);
        let n_m = rng.gen_range(0..=3);
        let n_r = 1 + trial % 5;
        let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=6)).collect();
        let mut model = FlowMapModel::init(n_v, n_gamma, n_m, &hidden, trial as u64)
            .map_err(|e| e.to_string())?
            .with_residual(trial % 2 == 1);
        for p in model.params_mut() {
            *p += rng.gen_range(-0.2..0.2);
        }
        let mean = (0..n_v).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let std = (0..n_v).map(|_| rng.gen_range(0.5..2.0)).collect();
        model.set_normalization(Normalization { mean, std }).map_err(|e| e.to_string())?;
        let batch: Vec<_> = (0..rng.gen_range(1..=4))
            .map(|_| random_burst(&mut rng, burst_length(n_m, n_r), n_v, n_gamma))
            .collect();

        let grad = model.backward(&batch).map_err(|e| e.to_string())?;
        for i in 0..model.n_params() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + H;
            let up = model.loss_multi_step(&batch).unwrap();
            model.params_mut()[i] = orig - H;
            let down = model.loss_multi_step(&batch).unwrap();
            model.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * H);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(FLOOR);
            if rel >= 1e-5 {
                return Err(format!("trial {trial}, parameter {i}: backward {} vs fd {fd} (rel {rel:e})", grad[i]));
            }
            worst = worst.max(rel);
        }
        n_params += model.n_params();
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{trials} instances, {n_params} parameters, worst rel error {worst:.1e}, {secs:.2} s"))
}

fn loss_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..50 {
        let n_v = rng.gen_range(1..=3);
        let n_m = rng.gen_range(0..=6);
        let model = FlowMapModel::init(n_v, 0, n_m, &[rng.gen_range(2..=16)], trial).unwrap();
        let batch: Vec<_> = (0..rng.gen_range(1..=8)).map(|_| random_burst(&mut rng, n_m + 2, n_v, 0)).collect();
        let multi = model.loss_multi_step(&batch).unwrap();
        let one = model.loss_one_step(&batch).unwrap();
        ensure(multi.to_bits() == one.to_bits(), || format!("trial {trial}: {multi:e} != {one:e}"))?;
        let ga = model.backward(&batch).unwrap();
        let gb = model.backward(&batch).unwrap();
        ensure(ga == gb, || format!("trial {trial}: gradients differ between calls"))?;
    }
    Ok("50 random instances, multi-step loss with n_R = 1 bit-identical to one-step loss".into())
}

fn counting_identities() -> Outcome {
    ensure(burst_length(49, 10) == 60, || "n_L".into())?;
    ensure(total_bursts(10, 7800) == 78_000, || "N_data (n_B = 10)".into())?;
    ensure(total_bursts(20, 7800) == 156_000, || "N_data (n_B = 20)".into())?;
    ensure(window_count(2001, 60) == 1942, || "window count".into())?;
    let plan = GenerationPlan {
        spec: FullDtSpec::stuart_landau(),
        n_sim: 7800,
        n_step: 2000,
        n_m: 49,
        n_r: 10,
        n_b: 10,
        seed: 0,
    };
    plan.validate().map_err(|e| e.to_string())?;
    let s = GenerationSummary::of(&plan);
    ensure((s.n_l, s.n_data) == (60, 78_000), || format!("{s:?}"))?;

    // Brute-force enumeration on scaled-down instances, and the full scale.
    let mut checked = 0;
    for len in [2001usize, 201, 61, 60, 59, 30, 12] {
        for n_l in [60usize, 12, 6, 1] {
            let brute = (0..len).filter(|s| s + n_l <= len).count();
            ensure(window_count(len, n_l) == brute, || format!("len {len}, n_L {n_l}"))?;
            checked += 1;
        }
    }
    // Drawing every window of a short trajectory yields each start exactly once.
    let mut starts = burst_starts(30, 0, 6, 25, 1);
    starts.sort_unstable();
    ensure(starts == (0..25).collect::<Vec<_>>(), || format!("{starts:?}"))?;
    Ok(format!("n_L 60, N_data 78,000 and 156,000, 1,942 windows; {checked} enumerations agree"))
}

// ---------------------------------------------------------------------------
// End-to-end twins

/// Held-out windows start this many steps into a fresh full-DT run.
const WINDOW_START: usize = 200;

// Both twins train the increment form with light input noise.
const SL_N_B: usize = 200;
const SL_EPOCHS: usize = 500;
const SL_LR_MAX: f64 = 3e-3;
const SL_LR_DECAY: f64 = 0.99998;
const SL_INPUT_NOISE: f64 = 1e-3;

const VDP_N_B: usize = 50;
const VDP_EPOCHS: usize = 300;
const VDP_LR_DECAY: f64 = 0.99985;
const VDP_INPUT_NOISE: f64 = 1e-3;

fn held_out_runs(plan: &GenerationPlan, seed: u64, n: usize, n_step: usize) -> tdt::Result<Vec<(Vec<f64>, Trajectory)>> {
    let held = GenerationPlan {
        seed,
        n_sim: n,
        n_step,
        ..plan.clone()
    };
    (0..n)
        .map(|j| {
            let run = sample_run(&held, j);
            Ok((run.hidden_params.clone(), run_full_dt(&run)?))
        })
        .collect()
}

fn stuart_landau_twin() -> Outcome {
    let t0 = Instant::now();
    let plan = GenerationPlan {
        spec: FullDtSpec::stuart_landau(),
        n_sim: 200,
        n_step: 400,
        n_m: 19,
        n_r: 5,
        n_b: SL_N_B,
        seed: 7,
    };
    let trajectories = generate_trajectories(&plan, None).map_err(|e| e.to_string())?;
    let dataset = extract_bursts(&trajectories, plan.n_m, plan.n_r, plan.n_b, plan.seed).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        n_r: plan.n_r,
        batch_size: 64,
        epochs: SL_EPOCHS,
        lr_max: SL_LR_MAX,
        lr_decay: SL_LR_DECAY,
        input_noise: SL_INPUT_NOISE,
        rng_seed: 1,
        ..TrainConfig::default()
    };
    let init = FlowMapModel::init(2, 0, plan.n_m, &[64, 64], 3)
        .map_err(|e| e.to_string())?
        .with_residual(true);
    let trained = fml::train(init, &dataset, &cfg).map_err(|e| e.to_string())?;
    let model = trained.model;
    let final_loss = *trained.loss_history.last().unwrap();

    let horizon = 1000;
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    let runs = held_out_runs(&plan, 90_001, 5, WINDOW_START + horizon).map_err(|e| e.to_string())?;
    for (hidden, reference) in runs {
        let window = &reference.qois()[WINDOW_START - 20..WINDOW_START];
        let truth = &reference.qois()[WINDOW_START..WINDOW_START + horizon];
        let label = format!("sigma {:.3}, f {:.4}", hidden[0], hidden[1] / TAU);
        let pred = match predict::predict_qoi(&model, window, &ExplicitParams::empty(), horizon) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let mut freq_ok = true;
        let mut freqs = Vec::new();
        for c in 0..2 {
            let col = |s: &[QoiVector]| s.iter().map(|q| q.as_slice()[c]).collect::<Vec<_>>();
            let sp = spectrum(&col(&pred), reference.dt()).map_err(|e| e.to_string())?;
            let sr = spectrum(&col(truth), reference.dt()).map_err(|e| e.to_string())?;
            let (fp, fr) = (sp.dominant().map_or(f64::NAN, |p| p.frequency), sr.dominant().unwrap().frequency);
            freq_ok &= (fp - fr).abs() <= sr.bin_width() + 1e-12;
            freqs.push((fp, fr));
        }
        let err = predict::relative_rms_error(&pred[..500], &truth[..500]).map_err(|e| e.to_string())?;
        let line = format!(
            "{label}: peak {:.2} vs {:.2}, rel RMS (50 units) {err:.3}",
            freqs[0].0, freqs[0].1
        );
        if !freq_ok || err >= 0.1 {
            failures.push(line.clone());
        }
        lines.push(line);
    }
    let secs = t0.elapsed().as_secs_f64();
    if secs >= 900.0 {
        failures.push(format!("runtime {secs:.0} s"));
    }
    let summary = format!(
        "final loss {final_loss:.2e}, {secs:.0} s\n      {}",
        lines.join("\n      ")
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}\n      failing: {}", summary, failures.join("; ")))
    }
}

fn peak_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Limit-cycle amplitude of the prediction and the full DT for each held-out
/// run, or the rollout error.
fn van_der_pol_amplitudes(
    trajectories: &[Trajectory],
    plan: &GenerationPlan,
    n_m: usize,
    held: &[(Vec<f64>, Trajectory)],
) -> tdt::Result<Vec<(f64, Result<(f64, f64), String>)>> {
    let dataset: BurstDataset = extract_bursts(trajectories, n_m, plan.n_r, plan.n_b, plan.seed)?;
    let cfg = TrainConfig {
        n_r: plan.n_r,
        batch_size: 64,
        epochs: VDP_EPOCHS,
        lr_decay: VDP_LR_DECAY,
        input_noise: VDP_INPUT_NOISE,
        rng_seed: 1,
        ..TrainConfig::default()
    };
    let init = FlowMapModel::init(1, 0, n_m, &[64, 64], 2)?.with_residual(true);
    let model = fml::train(init, &dataset, &cfg)?.model;
    Ok(held
        .iter()
        .map(|(hidden, reference)| {
            let window = &reference.qois()[WINDOW_START - n_m - 1..WINDOW_START];
            let truth = reference.component(0)[WINDOW_START..WINDOW_START + 1000].to_vec();
            let amp = predict::predict_qoi(&model, window, &ExplicitParams::empty(), 1000)
                .map(|p| {
                    let x: Vec<f64> = p.iter().map(|q| q.as_slice()[0]).collect();
                    (peak_abs(&x[800..]), peak_abs(&truth[800..]))
                })
                .map_err(|e| e.to_string());
            (hidden[0], amp)
        })
        .collect())
}

fn van_der_pol_memory() -> Outcome {
    let t0 = Instant::now();
    let plan = GenerationPlan {
        spec: FullDtSpec::van_der_pol(),
        n_sim: 200,
        n_step: 400,
        n_m: 19,
        n_r: 5,
        n_b: VDP_N_B,
        seed: 3,
    };
    let trajectories = generate_trajectories(&plan, None).map_err(|e| e.to_string())?;
    let held = held_out_runs(&plan, 4242, 5, WINDOW_START + 1000).map_err(|e| e.to_string())?;
    let within = |r: &Result<(f64, f64), String>| matches!(r, Ok((p, t)) if (p - t).abs() <= 0.05 * t);
    let show = |mu: f64, r: &Result<(f64, f64), String>| match r {
        Ok((p, t)) => format!("mu {mu:.3}: {p:.3} vs {t:.3} ({:+.1}%)", 100.0 * (p - t) / t),
        Err(e) => format!("mu {mu:.3}: {e}"),
    };

    let memory = van_der_pol_amplitudes(&trajectories, &plan, 19, &held).map_err(|e| e.to_string())?;
    let control = van_der_pol_amplitudes(&trajectories, &plan, 0, &held).map_err(|e| e.to_string())?;
    let memory_ok = memory.iter().all(|(_, r)| within(r));
    let control_fails = control.iter().any(|(_, r)| !within(r));
    let report = format!(
        "{:.0} s\n      n_M = 19: {}\n      n_M = 0:  {}",
        t0.elapsed().as_secs_f64(),
        memory.iter().map(|(m, r)| show(*m, r)).collect::<Vec<_>>().join("; "),
        control.iter().map(|(m, r)| show(*m, r)).collect::<Vec<_>>().join("; "),
    );
    match (memory_ok, control_fails) {
        (true, true) => Ok(report),
        (false, _) => Err(format!("memory model misses the 5% band\n      {report}")),
        (true, false) => Err(format!("memoryless control also passes\n      {report}")),
    }
}

// ---------------------------------------------------------------------------
// Fourier surface and spectrum

fn random_series(rng: &mut ChaCha8Rng, order: usize) -> FourierSeries {
    FourierSeries::new(
        rng.gen_range(-1.0..1.0),
        (0..order).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        (0..order).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn parseval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let reference = random_series(&mut rng, 30);
        let eps = 10f64.powf(rng.gen_range(-4.0..0.0));
        let mut pred = reference.clone();
        pred.a0 += eps * rng.gen_range(-1.0..1.0);
        pred.a.iter_mut().for_each(|a| *a += eps * rng.gen_range(-1.0..1.0));
        pred.b.iter_mut().for_each(|b| *b += eps * rng.gen_range(-1.0..1.0));
        let closed = l2_surface_error(&pred, &reference).map_err(|e| e.to_string())?;
        let nodes = 4096;
        let h = TAU / nodes as f64;
        let quad = ((0..nodes)
            .map(|i| {
                let th = -PI + i as f64 * h;
                (fourier_eval(&pred, th) - fourier_eval(&reference, th)).powi(2)
            })
            .sum::<f64>()
            * h)
            .sqrt();
        let rel = (closed - quad).abs() / quad;
        ensure(rel < 1e-9, || format!("closed {closed} vs quadrature {quad}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("100 perturbations of order-30 series, worst rel error {worst:.1e}"))
}

fn fourier_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = random_series(&mut rng, 30);
        let fit = fourier_fit(&equispaced_samples(128, |t| fourier_eval(&s, t)), 30).map_err(|e| e.to_string())?;
        let (want, got) = (s.to_qoi(), fit.to_qoi());
        ensure(want.len() == 61, || "coefficient count".into())?;
        for (a, b) in want.as_slice().iter().zip(got.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst < 1e-10, || format!("worst coefficient error {worst:e}"))?;
    Ok(format!("50 random series, 61 coefficients each, worst error {worst:.1e}"))
}

fn spectrum_correctness() -> Outcome {
    let (dt, m) = (0.1, 2048);
    let sine = |f: f64| (0..m).map(|i| (TAU * f * i as f64 * dt).sin()).collect::<Vec<_>>();
    let s = spectrum(&sine(0.2), dt).map_err(|e| e.to_string())?;
    let top = s.dominant().ok_or("no peak")?.frequency;
    ensure((top - 0.2).abs() <= s.bin_width(), || format!("top peak {top}"))?;

    // Sidelobe floor, measured on the on-bin tone nearest 0.2 (bin 41).
    let k = (0.2 * m as f64 * dt).round() as usize;
    let s = spectrum(&sine(k as f64 / (m as f64 * dt)), dt).map_err(|e| e.to_string())?;
    let peak = s.amplitudes[k];
    let leak = s
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(j, _)| j.abs_diff(k) > 1)
        .fold(0.0f64, |mx, (_, a)| mx.max(*a));
    let db = 20.0 * (leak.max(f64::MIN_POSITIVE) / peak).log10();
    ensure(db <= -60.0, || format!("sidelobes at {db:.1} dB"))?;
    Ok(format!("top peak {top:.4} (bin {:.4}), sidelobes {db:.0} dB", s.bin_width()))
}

// ---------------------------------------------------------------------------
// Files

fn tdt_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tdt")).args(args).output().expect("run tdt")
}

fn serialization() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let plan = GenerationPlan {
        spec: FullDtSpec::stuart_landau(),
        n_sim: 4,
        n_step: 60,
        n_m: 5,
        n_r: 3,
        n_b: 6,
        seed: 1,
    };
    let traj = generate_trajectories(&plan, None).map_err(|e| e.to_string())?;
    let data = extract_bursts(&traj, plan.n_m, plan.n_r, plan.n_b, plan.seed).map_err(|e| e.to_string())?;
    let dpath = d.join("d.fmld");
    pipeline::save_dataset(&data, &dpath).map_err(|e| e.to_string())?;
    let back = pipeline::load_dataset(&dpath).map_err(|e| e.to_string())?;
    ensure(back == data && pipeline::encode_dataset(&back) == std::fs::read(&dpath).unwrap(), || {
        "dataset round trip".into()
    })?;

    let mut model = FlowMapModel::init(2, 0, 5, &[7, 7], 4).unwrap();
    model.set_normalization(Normalization::fit(&data)).unwrap();
    model.set_dt(Some(data.dt));
    let mpath = d.join("m.fmlm");
    fml::save_model(&model, &mpath).map_err(|e| e.to_string())?;
    let mback = fml::load_model(&mpath).map_err(|e| e.to_string())?;
    ensure(mback == model && fml::encode_model(&mback) == std::fs::read(&mpath).unwrap(), || {
        "model round trip".into()
    })?;

    // Corruptions: (file, byte edit, expected error, expected exit code).
    let dbytes = std::fs::read(&dpath).unwrap();
    let mbytes = std::fs::read(&mpath).unwrap();
    let mut cases: Vec<(&str, Vec<u8>, &str, bool)> = Vec::new();
    let mut b = dbytes.clone();
    b[0] = b'Z';
    cases.push(("d_magic.fmld", b, "magic", true));
    let mut b = dbytes.clone();
    b[4..8].copy_from_slice(&2u32.to_le_bytes());
    cases.push(("d_version.fmld", b, "version", true));
    cases.push(("d_trunc.fmld", dbytes[..20].to_vec(), "truncated", true));
    let mut b = dbytes.clone();
    b[16..20].copy_from_slice(&6u32.to_le_bytes());
    cases.push(("d_size.fmld", b, "size", true));
    let mut b = mbytes.clone();
    b[0] = b'X';
    cases.push(("m_magic.fmlm", b, "magic", false));
    let pos = mbytes
        .windows(10)
        .position(|w| w == b"[12,7,7,2]")
        .ok_or("width list not found in model header")?;
    let mut b = mbytes.clone();
    b[pos..pos + 10].copy_from_slice(b"[12,7,8,2]");
    cases.push(("m_widths.fmlm", b, "dimension", false));

    for (name, bytes, kind, is_dataset) in &cases {
        let p = d.join(name);
        std::fs::write(&p, bytes).unwrap();
        let err = if *is_dataset {
            pipeline::load_dataset(&p).err()
        } else {
            fml::load_model(&p).err()
        }
        .ok_or_else(|| format!("{name}: corrupted file loaded"))?;
        let matches = match *kind {
            "magic" => matches!(err, Error::MagicMismatch { .. }),
            "version" => matches!(err, Error::VersionMismatch { .. }),
            "truncated" => matches!(err, Error::Truncated { .. }),
            "size" => matches!(err, Error::SizeMismatch { .. }),
            _ => matches!(err, Error::DimensionMismatch { .. }),
        };
        ensure(matches, || format!("{name}: expected {kind} error, got {err}"))?;
        let flag = if *is_dataset { "--dataset" } else { "--model" };
        let out = tdt_bin(&["validate", flag, p.to_str().unwrap()]);
        ensure(out.status.code() == Some(3), || format!("{name}: exit {:?}", out.status.code()))?;
    }
    Ok(format!("dataset and model round trip bit-exact; {} corruptions rejected with exit 3", cases.len()))
}

fn run_chain(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let gen = dir.join("gen.json");
    let train = dir.join("train.json");
    std::fs::write(
        &gen,
        json!({"system": "stuart_landau", "N_sim": 6, "N_step": 120, "n_M": 9, "n_R": 3, "n_B": 5,
               "dt": 0.1, "inner_dt": 0.01, "seed": 99})
        .to_string(),
    )
    .unwrap();
    std::fs::write(&train, json!({"hidden_widths": [16, 16], "epochs": 3, "seed": 5, "batch_size": 8}).to_string())
        .unwrap();
    let out = dir.join("out");
    let o = out.to_str().unwrap();
    let steps: Vec<Vec<String>> = vec![
        vec!["--config".into(), gen.display().to_string(), "--workers".into(), "3".into(), "--out".into(), o.into(), "generate".into()],
        vec!["--config".into(), train.display().to_string(), "--out".into(), o.into(), "train".into(), "--dataset".into(), format!("{o}/dataset.fmld")],
    ];
    for args in &steps {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let r = tdt_bin(&args);
        ensure(r.status.success(), || String::from_utf8_lossy(&r.stderr).into_owned())?;
    }
    // Window: the first n_M + 1 entries of trajectory 0.
    let traj = pipeline::load_trajectories(&out.join("trajectories.fmlt")).map_err(|e| e.to_string())?;
    let table = predict::SeriesTable::from_qois(
        predict::SeriesTable::default_names(2),
        0.0,
        traj[0].dt(),
        &traj[0].qois()[..10],
    );
    table.write_csv(&out.join("window.csv")).map_err(|e| e.to_string())?;
    let r = tdt_bin(&[
        "predict",
        "--model",
        &format!("{o}/model.fmlm"),
        "--window",
        &format!("{o}/window.csv"),
        "--horizon",
        "200",
        "--output",
        &format!("{o}/prediction.csv"),
    ]);
    ensure(r.status.success(), || String::from_utf8_lossy(&r.stderr).into_owned())?;
    let mut files: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = run_chain(a.path())?;
    let fb = run_chain(b.path())?;
    let names: Vec<_> = fa.iter().map(|(n, _)| n.clone()).collect();
    ensure(names.len() == 6, || format!("artifacts {names:?}"))?;
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        ensure(na == nb && ba == bb, || format!("{na} differs between runs"))?;
    }
    Ok(format!("generate, train, predict twice: {} byte-identical", names.join(", ")))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient oracle", gradient_oracle),
        ("loss identity", loss_identity),
        ("counting identities", counting_identities),
        ("Stuart-Landau twin", stuart_landau_twin),
        ("Van der Pol memory", van_der_pol_memory),
        ("Parseval surface error", parseval),
        ("Fourier round trip", fourier_round_trip),
        ("spectrum", spectrum_correctness),
        ("serialization", serialization),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n:2} {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:2} {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
