//! Write a small procedural corpus (Y4M clips plus manifest.json) that the
//! `uvqa` CLI can train and evaluate on.
//!
//!     cargo run --example synthetic_manifest -- /tmp/corpus 10

use std::path::PathBuf;
use uvqa::distort::{block_dct_compress, gaussian_blur, value_noise_texture};
use uvqa::harness::ManifestEntry;
use uvqa::media::{write_y4m, FrameRate, Plane, VideoClip};
use uvqa::quality::{vif_map, VifParams};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "corpus".into()));
    let sources: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    std::fs::create_dir_all(&dir)?;
    let fps = FrameRate::new(30, 1);
    let mut manifest = Vec::new();
    for s in 0..sources {
        let texture = value_noise_texture(80, 80, s as u64, 4);
        let pristine: Vec<Plane<f32>> = (0..10)
            .map(|t| Plane::from_fn(64, 64, |x, y| texture.get(x + t, y + t / 2)))
            .collect();
        // the uploaded source is already degraded
        let source: Vec<Plane<f32>> = pristine
            .iter()
            .map(|f| gaussian_blur(f, 0.5 + (s % 3) as f64 * 0.5))
            .collect::<Result<_, _>>()?;
        let name = format!("src{s:02}.y4m");
        std::fs::write(
            dir.join(&name),
            write_y4m(&VideoClip::from_float_frames(&name, fps, &source)?),
        )?;
        let mut entry = ManifestEntry {
            source: name.into(),
            transcoded: vec![],
            mos: vec![],
        };
        for q in [70u32, 35, 15, 5] {
            let frames: Vec<Plane<f32>> = source
                .iter()
                .map(|f| block_dct_compress(f, q))
                .collect::<Result<_, _>>()?;
            let vif: f64 = pristine
                .iter()
                .zip(&frames)
                .map(|(p, f)| vif_map(p, f, &VifParams::default()).map(|m| m.mean()))
                .sum::<Result<f64, _>>()?
                / frames.len() as f64;
            let tname = format!("src{s:02}_q{q:02}.y4m");
            std::fs::write(
                dir.join(&tname),
                write_y4m(&VideoClip::from_float_frames(&tname, fps, &frames)?),
            )?;
            entry.transcoded.push(tname.into());
            entry.mos.push(1.0 + 4.0 * vif.clamp(0.0, 1.0));
        }
        manifest.push(entry);
    }
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!("wrote {} sources to {}", sources, dir.display());
    Ok(())
}
