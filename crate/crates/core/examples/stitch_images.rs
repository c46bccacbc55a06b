//! Pads up to four images and writes the 2x2 stitched 224x224 PNG.
//!
//! cargo run --example stitch_images -- out.png [image ...]

use std::path::PathBuf;

use wltscan::imageprep::{load_raster, pad_with_empty, stitch, Raster};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let out = args.next().unwrap_or_else(|| PathBuf::from("stitched.png"));
    let inputs: Vec<PathBuf> = args.collect();
    let images: Vec<Raster> = if inputs.is_empty() {
        vec![
            Raster::from_fn(60, 90, |y, x| [(x * 255 / 89) as u8, (y * 255 / 59) as u8, 128]),
            Raster::uniform(40, 40, [200, 30, 30]),
        ]
    } else {
        inputs
            .iter()
            .map(|p| load_raster(p).ok_or_else(|| format!("cannot decode {}", p.display())))
            .collect::<Result<_, _>>()?
    };
    let bundle = pad_with_empty(images)?;
    println!("slots present: {:?}", bundle.present_mask());
    std::fs::write(&out, stitch(&bundle).to_png())?;
    println!("wrote {}", out.display());
    Ok(())
}
