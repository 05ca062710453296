//! Memory in place of hidden state: the Van der Pol twin observes only `x`,
//! so a one-entry window cannot tell the rising and falling halves of the
//! cycle apart. A twin with a 20-entry window recovers the limit cycle; the
//! memoryless control does not.
//!
//! `cargo run --release --example van_der_pol_memory`

use tdt::fml::{train, FlowMapModel, TrainConfig};
use tdt::pipeline::{extract_bursts, generate_trajectories, sample_run, GenerationPlan};
use tdt::predict::predict_qoi;
use tdt::sims::{run_full_dt, FullDtSpec};
use tdt::ExplicitParams;

fn peak(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn main() -> tdt::Result<()> {
    let base = GenerationPlan {
        spec: FullDtSpec::van_der_pol(),
        n_sim: 200,
        n_step: 400,
        n_m: 19,
        n_r: 5,
        n_b: 50,
        seed: 3,
    };
    let trajectories = generate_trajectories(&base, None)?;
    let held_out = GenerationPlan { seed: 4242, n_sim: 5, n_step: 1200, ..base.clone() };
    let cfg = TrainConfig {
        n_r: base.n_r,
        epochs: 300,
        lr_decay: 0.99985,
        input_noise: 1e-3,
        rng_seed: 1,
        ..TrainConfig::default()
    };

    for n_m in [19, 0] {
        let dataset = extract_bursts(&trajectories, n_m, base.n_r, base.n_b, base.seed)?;
        let init = FlowMapModel::init(1, 0, n_m, &[64, 64], 2)?.with_residual(true);
        let model = train(init, &dataset, &cfg)?.model;
        println!("n_M = {n_m}");
        for j in 0..held_out.n_sim {
            let run = sample_run(&held_out, j);
            let reference = run_full_dt(&run)?;
            let window = &reference.qois()[200 - n_m - 1..200];
            let truth = reference.component(0)[200..1200].to_vec();
            let pred: Vec<f64> = match predict_qoi(&model, window, &ExplicitParams::empty(), 1000) {
                Ok(p) => p.iter().map(|q| q.as_slice()[0]).collect(),
                Err(e) => {
                    println!("  mu {:.3}: {e}", run.hidden_params[0]);
                    continue;
                }
            };
            let (a_pred, a_ref) = (peak(&pred[800..]), peak(&truth[800..]));
            println!(
                "  mu {:.3}: amplitude {a_pred:.4} vs {a_ref:.4} ({:+.2}%)",
                run.hidden_params[0],
                100.0 * (a_pred - a_ref) / a_ref
            );
        }
    }
    Ok(())
}
