//! Train a targeted digital twin of the Stuart–Landau oscillator from QoI
//! bursts alone, then predict unseen parameter draws from a 20-step window.
//!
//! The growth rate sigma and frequency omega of each run are hidden; the twin
//! sees only `(Re A, Im A)` and must infer both from its memory window.
//!
//! `cargo run --release --example stuart_landau_twin` (about ten minutes on
//! one core).

use std::f64::consts::TAU;
use std::time::Instant;

use tdt::fml::{train_with, FlowMapModel, TrainConfig};
use tdt::pipeline::{extract_bursts, generate_trajectories, sample_run, GenerationPlan};
use tdt::predict::{predict_qoi, relative_rms_error, spectrum};
use tdt::sims::{run_full_dt, FullDtSpec};
use tdt::{ExplicitParams, QoiVector};

fn main() -> tdt::Result<()> {
    let t0 = Instant::now();
    let plan = GenerationPlan {
        spec: FullDtSpec::stuart_landau(),
        n_sim: 200,
        n_step: 400,
        n_m: 19,
        n_r: 5,
        n_b: 200,
        seed: 7,
    };
    let trajectories = generate_trajectories(&plan, None)?;
    let dataset = extract_bursts(&trajectories, plan.n_m, plan.n_r, plan.n_b, plan.seed)?;
    println!("{} bursts of length {}", dataset.n_data(), dataset.n_l());

    let cfg = TrainConfig {
        n_r: plan.n_r,
        epochs: 500,
        lr_max: 3e-3,
        lr_decay: 0.99998,
        input_noise: 1e-3,
        rng_seed: 1,
        ..TrainConfig::default()
    };
    let init = FlowMapModel::init(2, 0, plan.n_m, &[64, 64], 3)?.with_residual(true);
    let model = train_with(init, &dataset, &cfg, |e, loss| {
        if e % 50 == 0 || e + 1 == cfg.epochs {
            println!("epoch {e:4}  loss {loss:.3e}  ({:.0?})", t0.elapsed());
        }
    })?
    .model;

    // Fresh draws, synchronized 180 steps in and predicted for 1000 steps.
    let held_out = GenerationPlan { seed: 90_001, n_sim: 5, n_step: 1200, ..plan.clone() };
    let re = |s: &[QoiVector]| s.iter().map(|q| q.as_slice()[0]).collect::<Vec<_>>();
    for j in 0..held_out.n_sim {
        let run = sample_run(&held_out, j);
        let reference = run_full_dt(&run)?;
        let window = &reference.qois()[180..200];
        let truth = &reference.qois()[200..1200];
        let pred = predict_qoi(&model, window, &ExplicitParams::empty(), 1000)?;
        let err = relative_rms_error(&pred[..500], &truth[..500])?;
        let sp = spectrum(&re(&pred), reference.dt())?;
        let sr = spectrum(&re(truth), reference.dt())?;
        println!(
            "sigma {:.3}  f {:.4}: dominant {:.3} Hz (truth {:.3}, bin {:.3}), rel RMS over 50 time units {err:.3}",
            run.hidden_params[0],
            run.hidden_params[1] / TAU,
            sp.dominant().map_or(f64::NAN, |p| p.frequency),
            sr.dominant().map_or(f64::NAN, |p| p.frequency),
            sr.bin_width()
        );
    }
    println!("total {:.0?}", t0.elapsed());
    Ok(())
}
