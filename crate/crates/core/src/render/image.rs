use std::path::Path;

use nalgebra::Vector3;

use super::RenderError;

/// 8-bit RGB image, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, RenderError> {
        if pixels.len() != width * height {
            return Err(RenderError::Invalid(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    /// Mean over all pixels and channels, in 0–255 units.
    pub fn mean(&self) -> f64 {
        let sum: u64 = self
            .pixels
            .iter()
            .map(|p| p.iter().map(|&c| c as u64).sum::<u64>())
            .sum();
        sum as f64 / (3 * self.pixels.len()).max(1) as f64
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, RenderError> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| RenderError::Image(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RenderError> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self, RenderError> {
        let bytes = std::fs::read(path)?;
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| RenderError::Image(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Self::new(w as usize, h as usize, pixels)
    }

    fn to_rgb_image(&self) -> image::RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flat_map(|p| p.iter().copied()).collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }
}

/// Linear RGB radiance per pixel, before tone mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Vector3<f64>>,
}

impl RadianceImage {
    pub fn get(&self, x: usize, y: usize) -> Vector3<f64> {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> Vector3<f64> {
        self.data.iter().sum::<Vector3<f64>>() / self.data.len().max(1) as f64
    }
}

/// Linear exposure then clamp-and-quantize, with optional display gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneMap {
    pub exposure: f64,
    pub gamma: Option<f64>,
}

impl Default for ToneMap {
    fn default() -> Self {
        Self {
            exposure: 1.0,
            gamma: None,
        }
    }
}

impl ToneMap {
    pub fn apply(&self, radiance: &RadianceImage) -> Image {
        let pixels = radiance
            .data
            .iter()
            .map(|c| {
                let mut out = [0u8; 3];
                for k in 0..3 {
                    let mut v = (c[k] * self.exposure).max(0.0);
                    if let Some(g) = self.gamma {
                        v = v.powf(1.0 / g);
                    }
                    out[k] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
                }
                out
            })
            .collect();
        Image {
            width: radiance.width,
            height: radiance.height,
            pixels,
        }
    }
}
