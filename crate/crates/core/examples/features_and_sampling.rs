//! Characterize a pool of synthetic clips by SI, TI and CPBD blur, then pick
//! a subset whose feature histograms are as flat as possible.
//!
//!     cargo run --example features_and_sampling

use uvqa::distort::{gaussian_blur, value_noise_texture};
use uvqa::features::{feature_triple, CpbdConfig};
use uvqa::media::{FrameRate, Plane, VideoClip};
use uvqa::sampler::{
    solve_exact, solve_greedy, solve_local_search, SubsetProblem, DEFAULT_EXACT_BUDGET,
};

fn main() -> anyhow::Result<()> {
    let mut features = Vec::new();
    for i in 0..16u64 {
        let texture = value_noise_texture(96, 96, i, 1 + (i % 4) as u32);
        let speed = (i % 5) as usize;
        // hard-edged shapes so that blur registers in CPBD
        let shapes = Plane::from_fn(
            96,
            96,
            |x, y| if texture.get(x, y) > 0.5 { 0.85 } else { 0.15 },
        );
        let frames: Vec<Plane<f32>> = (0..6)
            .map(|t| {
                gaussian_blur(
                    &Plane::from_fn(64, 64, |x, y| shapes.get(x + speed * t, y)),
                    0.4 * (i % 3) as f64,
                )
            })
            .collect::<Result<_, _>>()?;
        let clip =
            VideoClip::from_float_frames(format!("clip{i}"), FrameRate::new(30, 1), &frames)?;
        let f = feature_triple(&clip, 3, &CpbdConfig::default())?;
        println!(
            "clip{i:02}  si {:6.2}  ti {:6.2}  cpbd {:.3}",
            f.si, f.ti, f.blur
        );
        features.push(f.as_array().to_vec());
    }

    let problem = SubsetProblem::uniform(features, 3, 6)?;
    let exact = solve_exact(&problem, DEFAULT_EXACT_BUDGET)?;
    let local = solve_local_search(&problem, 1, 10);
    let greedy = solve_greedy(&problem);
    println!(
        "exact   {:?} objective {:.3}",
        exact.selected, exact.objective
    );
    println!(
        "local   {:?} objective {:.3}",
        local.selected, local.objective
    );
    println!(
        "greedy  {:?} objective {:.3}",
        greedy.selected, greedy.objective
    );
    Ok(())
}
