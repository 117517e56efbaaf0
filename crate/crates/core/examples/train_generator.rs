//! Train a small quality-map generator on synthetic distortions and compare
//! its maps with the VIF labels of unseen patches.
//!
//!     cargo run --release --example train_generator

use uvqa::distort::{build_corpus, value_noise_texture};
use uvqa::nn::{
    build_generator, extract_patches, generate_map, train_generator, Network, PatchPair,
    TrainConfig,
};
use uvqa::stats::pearson;

fn main() -> anyhow::Result<()> {
    let sources: Vec<_> = (0..60).map(|i| value_noise_texture(40, 40, i, 4)).collect();
    let mut pairs: Vec<PatchPair> = Vec::new();
    for item in build_corpus(&sources, 3)? {
        pairs.extend(extract_patches(&item.distorted, &item.label, 32)?);
    }
    let (train, test) = pairs.split_at(50);

    let mut net = Network::new(build_generator(2, 8)?, 1)?;
    let config = TrainConfig {
        epochs: 8,
        learning_rate: 3e-3,
        ..TrainConfig::generator()
    };
    let report = train_generator(&mut net, train, &config)?;
    println!(
        "loss {:.4} -> {:.4}",
        report.initial_loss,
        report.final_loss()
    );

    for p in test {
        let map = generate_map(&mut net, &p.input)?;
        let a: Vec<f64> = map.data().iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = p.label.data().iter().map(|&v| v as f64).collect();
        println!(
            "held-out patch: predicted mean {:.3}, label mean {:.3}, pearson {:.3}",
            a.iter().sum::<f64>() / a.len() as f64,
            b.iter().sum::<f64>() / b.len() as f64,
            pearson(&a, &b)?
        );
    }
    Ok(())
}
