//! Size up a reference-scale training run without computing anything:
//! dataset volume, network shape and optimizer iteration count.
//!
//! `cargo run --example training_plan`

use tdt::fml::{layer_widths, plan_training, TrainConfig};
use tdt::pipeline::{GenerationPlan, GenerationSummary};
use tdt::sims::FullDtSpec;

fn main() -> tdt::Result<()> {
    let plan = GenerationPlan {
        spec: FullDtSpec::stuart_landau(),
        n_sim: 7800,
        n_step: 2000,
        n_m: 49,
        n_r: 10,
        n_b: 10,
        seed: 0,
    };
    plan.validate()?;
    let s = GenerationSummary::of(&plan);
    println!("N_sim {} x N_step {}: n_L = {}, N_data = {}", s.n_sim, s.n_step, s.n_l, s.n_data);
    let bytes = s.n_data * s.n_l * plan.spec.qoi_dim() * 8;
    println!("burst payload about {:.1} MB", bytes as f64 / 1e6);

    let widths = layer_widths(2, 0, plan.n_m, &[64, 64]);
    let n_params: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    println!("layer widths {widths:?}, {n_params} parameters");

    let cfg = TrainConfig { n_r: plan.n_r, ..TrainConfig::default() };
    let t = plan_training(s.n_data, &cfg)?;
    println!(
        "{} batches per epoch over {} epochs: {} Adam iterations",
        t.batches_per_epoch, t.epochs, t.total_iterations
    );
    Ok(())
}
