//! Two-stage synthetic distortion (noise or blur, then block-DCT coding)
//! and the VIF-map labels used to train the map generator.
//!
//!     cargo run --example distortion_corpus

use uvqa::distort::{build_corpus, synthesize, value_noise_texture, DistortionRecipe, FirstStage};

fn main() -> anyhow::Result<()> {
    let texture = value_noise_texture(64, 64, 5, 4);
    let recipe = DistortionRecipe {
        first_stage: FirstStage::Blur { sigma: 1.5 },
        quality: 20,
        seed: 0,
    };
    let (_, provenance) = synthesize(&texture, &recipe)?;
    println!("fixed recipe: {}", serde_json::to_string(&provenance)?);

    let sources: Vec<_> = (0..6)
        .map(|i| value_noise_texture(64, 64, 100 + i, 4))
        .collect();
    for item in build_corpus(&sources, 42)? {
        println!(
            "source {}: {:?}, quality {}, label {}x{} mean VIF {:.3}",
            item.source,
            item.provenance.recipe.first_stage,
            item.provenance.recipe.quality,
            item.label.to_plane().width(),
            item.label.to_plane().height(),
            item.label.mean()
        );
    }
    Ok(())
}
