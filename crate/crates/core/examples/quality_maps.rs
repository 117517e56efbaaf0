//! Full-reference maps (SSIM, VIF, MDSI) and PSNR for one texture under
//! increasing noise and compression.
//!
//!     cargo run --example quality_maps

use uvqa::distort::{block_dct_compress, gaussian_noise, value_noise_texture};
use uvqa::quality::{
    mdsi_map, psnr, ssim_map, vif_map, MdsiParams, SsimParams, VifParams, DEFAULT_PSNR_CEILING,
};

fn main() -> anyhow::Result<()> {
    let reference = value_noise_texture(128, 128, 11, 4);
    let mut cases = Vec::new();
    for sigma in [0.0, 5.0, 15.0, 30.0] {
        cases.push((
            format!("noise sigma {sigma}"),
            gaussian_noise(&reference, sigma, 1)?,
        ));
    }
    for q in [80, 40, 10] {
        cases.push((
            format!("dct quality {q}"),
            block_dct_compress(&reference, q)?,
        ));
    }
    println!(
        "{:<18} {:>7} {:>7} {:>7} {:>7}",
        "distortion", "ssim", "vif", "mdsi", "psnr"
    );
    for (name, d) in &cases {
        let ssim = ssim_map(&reference, d, &SsimParams::default(), true)?;
        let vif = vif_map(&reference, d, &VifParams::default())?;
        let mdsi = mdsi_map(&reference, d, None, None, &MdsiParams::default())?;
        println!(
            "{name:<18} {:7.4} {:7.4} {:7.4} {:7.2}",
            ssim.map.mean(),
            vif.mean(),
            mdsi.mean(),
            psnr(&reference, d, DEFAULT_PSNR_CEILING)?
        );
    }
    Ok(())
}
