//! Fit a Fourier series to a closed curve sampled on equispaced angles and
//! measure the L2 distance between two surfaces in closed form.
//!
//! `cargo run --example fourier_surface`

use tdt::predict::{equispaced_samples, fourier_eval, fourier_fit, l2_surface_error};

fn main() -> tdt::Result<()> {
    // A cylinder cross-section with a small three-lobed deformation.
    let radius = |th: f64| 1.0 + 0.05 * (3.0 * th).cos() - 0.02 * (5.0 * th).sin();
    let fit = fourier_fit(&equispaced_samples(128, radius), 30)?;
    println!("a0 = {:.6}, a3 = {:.6}, b5 = {:.6}", fit.a0, fit.a[2], fit.b[4]);
    let worst = (0..1000)
        .map(|i| {
            let th = -std::f64::consts::PI + i as f64 * 0.00628;
            (fourier_eval(&fit, th) - radius(th)).abs()
        })
        .fold(0.0, f64::max);
    println!("max pointwise fit error {worst:.2e}");

    let mut deformed = fit.clone();
    deformed.a[2] += 0.01;
    println!("L2 distance after nudging a3 by 0.01: {:.6}", l2_surface_error(&deformed, &fit)?);
    println!("coefficient vector length {}", fit.to_qoi().len());
    Ok(())
}
