//! RGB images as `p = 3` grids with channels in `[0, 1]`.
//!
//! Pixel row `y` (0 at the top) maps to `h = height - y`, so `h` grows
//! upward as in the quadrant convention and the top of the image is Q1/Q2.

use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::DataGrid;

pub fn grid_from_rgb(img: &RgbImage) -> Result<DataGrid> {
    let (width, height) = img.dimensions();
    let (tw, th) = (width as usize, height as usize);
    DataGrid::from_fn(tw, th, 3, |w, h| {
        let px = img.get_pixel((w - 1) as u32, (th - h) as u32);
        px.0.iter().map(|&c| c as f64 / 255.0).collect()
    })
}

fn quantize(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn rgb_from_grid(grid: &DataGrid) -> Result<RgbImage> {
    if grid.p() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: grid.p() });
    }
    let (tw, th) = (grid.tw(), grid.th());
    let mut img = RgbImage::new(tw as u32, th as u32);
    for ((w, h), x) in grid.iter_cells() {
        img.put_pixel((w - 1) as u32, (th - h) as u32, Rgb([quantize(x[0]), quantize(x[1]), quantize(x[2])]));
    }
    Ok(img)
}

fn format_of(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        _ => Err(Error::invalid(format!(
            "unsupported image format '{}' (expected .png or .ppm)",
            path.display()
        ))),
    }
}

pub fn read_image(path: &Path) -> Result<DataGrid> {
    let format = format_of(path)?;
    let bytes = std::fs::read(path)?;
    let img = image::load_from_memory_with_format(&bytes, format)?;
    grid_from_rgb(&img.to_rgb8())
}

pub fn write_image(grid: &DataGrid, path: &Path) -> Result<()> {
    let format = format_of(path)?;
    rgb_from_grid(grid)?.save_with_format(path, format)?;
    Ok(())
}

/// Adds i.i.d. `N(0, variance)` noise to every channel (unclamped).
pub fn add_gaussian_noise(grid: &DataGrid, variance: f64, seed: u64) -> Result<DataGrid> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("noise variance must be finite and non-negative, got {variance}")));
    }
    let sd = variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = grid
        .as_slice()
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + sd * z
        })
        .collect();
    DataGrid::new(grid.tw(), grid.th(), grid.p(), values)
}
