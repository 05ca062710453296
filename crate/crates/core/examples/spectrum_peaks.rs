//! Locate the dominant frequencies of a two-tone signal with the
//! Hann-windowed amplitude spectrum.
//!
//! `cargo run --example spectrum_peaks`

use std::f64::consts::TAU;

use tdt::predict::spectrum;

fn main() -> tdt::Result<()> {
    let dt = 0.1;
    let x: Vec<f64> = (0..2048)
        .map(|i| {
            let t = i as f64 * dt;
            (TAU * 0.2 * t).sin() + 0.3 * (TAU * 1.1 * t).cos()
        })
        .collect();
    let s = spectrum(&x, dt)?;
    println!("bin width {:.5} Hz, Nyquist {:.2} Hz", s.bin_width(), s.frequencies.last().unwrap());
    for p in s.top(3) {
        println!("  {:.4} Hz  amplitude {:.4}", p.frequency, p.amplitude);
    }
    Ok(())
}
