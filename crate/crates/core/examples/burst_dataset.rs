//! Generate a small Van der Pol burst dataset, write it to disk and read it
//! back.
//!
//! `cargo run --example burst_dataset`

use tdt::pipeline::{extract_bursts, generate_trajectories, load_dataset, save_dataset, GenerationPlan, GenerationSummary};
use tdt::sims::FullDtSpec;

fn main() -> tdt::Result<()> {
    let plan = GenerationPlan {
        spec: FullDtSpec::van_der_pol(),
        n_sim: 50,
        n_step: 300,
        n_m: 19,
        n_r: 5,
        n_b: 10,
        seed: 11,
    };
    plan.validate()?;
    let s = GenerationSummary::of(&plan);
    println!("{} runs of {} steps, bursts of n_L = {}, N_data = {}", s.n_sim, s.n_step, s.n_l, s.n_data);

    let trajectories = generate_trajectories(&plan, None)?;
    let dataset = extract_bursts(&trajectories, plan.n_m, plan.n_r, plan.n_b, plan.seed)?;
    let first = &dataset.bursts[0];
    println!(
        "first burst: x from {:+.4} to {:+.4}",
        first.entries()[0].as_slice()[0],
        first.entries().last().unwrap().as_slice()[0]
    );

    let path = std::env::temp_dir().join("tdt_example_dataset.fmld");
    save_dataset(&dataset, &path)?;
    let back = load_dataset(&path)?;
    println!(
        "wrote {} bytes to {}; reload identical: {}",
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0),
        path.display(),
        back == dataset
    );
    std::fs::remove_file(&path).ok();
    Ok(())
}
