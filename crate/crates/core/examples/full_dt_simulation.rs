//! Run each built-in full digital twin once and summarize the recorded QoIs.
//!
//! `cargo run --example full_dt_simulation`

use tdt::sims::{run_full_dt, FullDtSpec, SimRun};

fn main() -> tdt::Result<()> {
    let cases = [
        (FullDtSpec::stuart_landau(), vec![1.0, std::f64::consts::TAU * 0.2, 0.0], vec![0.1, 0.0]),
        (FullDtSpec::van_der_pol(), vec![1.5], vec![0.5, 0.0]),
        (FullDtSpec::lorenz63(), vec![10.0, 28.0, 8.0 / 3.0], vec![1.0, 1.0, 1.0]),
    ];
    for (spec, hidden_params, initial_state) in cases {
        let system = spec.system;
        let run = SimRun { spec, hidden_params, initial_state, n_step: 1000 };
        let t = run_full_dt(&run)?;
        println!("{system:?}: {} entries at dt = {}", t.len(), t.dt());
        for (c, name) in system.qoi_names().iter().enumerate() {
            let x = t.component(c);
            let tail = &x[x.len() * 3 / 4..];
            let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!("  {name:>3}: final quarter spans [{lo:+.3}, {hi:+.3}]");
        }
    }
    Ok(())
}
