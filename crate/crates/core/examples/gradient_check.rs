//! Compare analytic gradients with central differences for a generator and
//! a pooling net, in both precisions.
//!
//!     cargo run --example gradient_check

use uvqa::nn::{
    build_generator, build_pooling_net, gradient_check, GradCheckConfig, Mode, Network, Tensor,
};

fn main() -> anyhow::Result<()> {
    let x: Vec<f64> = (0..2 * 12 * 12)
        .map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5)
        .collect();
    let x = Tensor::new(vec![2, 1, 12, 12], x)?;

    let mut g64 = Network::<f64>::new(build_generator(2, 4)?, 7)?;
    let mut g32 = Network::<f32>::new(build_generator(2, 4)?, 7)?;
    for (name, report) in [
        (
            "generator f64",
            gradient_check(&mut g64, &x, Mode::Train, &GradCheckConfig::f64())?,
        ),
        (
            "generator f32",
            gradient_check(&mut g32, &x.cast(), Mode::Train, &GradCheckConfig::f32())?,
        ),
    ] {
        let worst = report.worst().map(|e| e.name.clone()).unwrap_or_default();
        println!(
            "{name}: max relative error {:.2e} (worst parameter {worst})",
            report.max_error()
        );
    }

    let y: Vec<f64> = (0..3 * 3 * 8 * 8)
        .map(|i| ((i * 53 % 97) as f64 / 97.0) - 0.5)
        .collect();
    let mut pool = Network::<f64>::new(build_pooling_net(1, 2, 4)?, 3)?;
    let report = gradient_check(
        &mut pool,
        &Tensor::new(vec![3, 3, 8, 8], y)?,
        Mode::Train,
        &GradCheckConfig::f64(),
    )?;
    for e in &report.entries {
        println!(
            "pooling {:<24} {:.2e} over {} entries",
            e.name, e.error, e.checked
        );
    }
    Ok(())
}
