//! Round-trip a synthetic clip through Y4M and a frame through PGM, then
//! store a quality map in a tensor archive.
//!
//!     cargo run --example media_io

use uvqa::distort::value_noise_texture;
use uvqa::media::{
    parse_y4m, read_pgm, write_pgm, write_y4m, FrameRate, Plane, TensorArchive, VideoClip,
};

fn main() -> anyhow::Result<()> {
    let texture = value_noise_texture(96, 64, 3, 4);
    let frames: Vec<Plane<f32>> = (0..8)
        .map(|t| Plane::from_fn(64, 48, |x, y| texture.get(x + 2 * t, y)))
        .collect();
    let clip = VideoClip::from_float_frames("pan", FrameRate::new(25, 1), &frames)?;

    let bytes = write_y4m(&clip);
    let back = parse_y4m(&bytes)?;
    println!(
        "y4m: {} bytes, {}x{} x {} frames, {:.2}s, identical luma: {}",
        bytes.len(),
        back.width(),
        back.height(),
        back.frame_count(),
        back.duration_secs(),
        back.luma() == clip.luma()
    );

    let pgm = write_pgm(&clip.luma()[0]);
    println!(
        "pgm: {} bytes, identical: {}",
        pgm.len(),
        read_pgm(&pgm)? == clip.luma()[0]
    );

    let mut archive = TensorArchive::new();
    let f = frames[0].clone();
    archive.insert("frame0", vec![f.height(), f.width()], f.data().to_vec())?;
    let restored = TensorArchive::from_bytes(&archive.to_bytes())?;
    for e in restored.entries() {
        println!("archive entry {} shape {:?}", e.name, e.shape);
    }
    Ok(())
}
