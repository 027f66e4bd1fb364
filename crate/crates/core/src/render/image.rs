use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Linear RGB image with channels in `[0, 1]`, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f32; 3]>,
    /// Transmittance left after blending, per pixel.
    pub transmittance: Vec<f32>,
}

impl Image {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
            transmittance: vec![1.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    /// 8-bit RGB, rounded to nearest.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    /// Largest per-channel difference in 8-bit levels.
    pub fn max_lsb_diff(&self, other: &Image) -> u8 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.to_rgb8()
            .iter()
            .zip(other.to_rgb8())
            .map(|(a, b)| a.abs_diff(b))
            .max()
            .unwrap_or(0)
    }

    /// Mean absolute per-channel difference in `[0, 1]` units.
    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let n = self.pixels.len() * 3;
        if n == 0 {
            return 0.0;
        }
        self.pixels
            .iter()
            .zip(&other.pixels)
            .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs() as f64))
            .sum::<f64>()
            / n as f64
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let enc = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(
            enc,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(out)
    }

    /// Binary `P6` bytes.
    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_rgb8());
        out
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode_png()?)
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode_ppm())
    }

    /// PNG unless the extension is `.ppm`.
    pub fn save(&self, path: &Path) -> Result<()> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ppm") => self.write_ppm(path),
            _ => self.write_png(path),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let ctx = || path.display().to_string();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    f.write_all(bytes).map_err(|e| Error::io(ctx(), e))
}
