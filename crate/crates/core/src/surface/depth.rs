use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::SurfaceError;

pub const DEPTH_MAGIC: &[u8; 4] = b"DPTH";

/// Regular raster of indentation depths (mm, positive into the gel).
///
/// `values[j * width + i]` is the depth at column `i`, row `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub pixel_pitch: f64,
    pub values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, pixel_pitch: f64, values: Vec<f64>) -> Result<Self, SurfaceError> {
        if values.len() != width * height {
            return Err(SurfaceError::Invalid(format!(
                "depth map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
            return Err(SurfaceError::Invalid(format!("pixel pitch must be positive, got {pixel_pitch}")));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(SurfaceError::Invalid(format!("non-finite depth at index {bad}")));
        }
        Ok(Self {
            width,
            height,
            pixel_pitch,
            values,
        })
    }

    pub fn flat(width: usize, height: usize, pixel_pitch: f64) -> Self {
        Self {
            width,
            height,
            pixel_pitch,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    pub fn max_depth(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The map as stored on disk (values and pitch rounded to `f32`).
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixel_pitch: self.pixel_pitch as f32 as f64,
            values: self.values.iter().map(|&v| v as f32 as f64).collect(),
        }
    }

    /// Writes the `DPTH` format: magic, `u32` width, `u32` height, `f32`
    /// pitch, then row-major little-endian `f32` depths.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), SurfaceError> {
        let mut buf = Vec::with_capacity(16 + 4 * self.values.len());
        buf.extend_from_slice(DEPTH_MAGIC);
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        buf.extend_from_slice(&(self.pixel_pitch as f32).to_le_bytes());
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, SurfaceError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() < 16 || &bytes[0..4] != DEPTH_MAGIC {
            return Err(SurfaceError::Format("missing DPTH header".into()));
        }
        let word = |at: usize| <[u8; 4]>::try_from(&bytes[at..at + 4]).unwrap();
        let width = u32::from_le_bytes(word(4)) as usize;
        let height = u32::from_le_bytes(word(8)) as usize;
        let pitch = f32::from_le_bytes(word(12)) as f64;
        let expected = 16 + 4 * width * height;
        if bytes.len() != expected {
            return Err(SurfaceError::Format(format!(
                "DPTH {width}x{height} should be {expected} bytes, file has {}",
                bytes.len()
            )));
        }
        let values = (0..width * height)
            .map(|n| f32::from_le_bytes(word(16 + 4 * n)) as f64)
            .collect();
        Self::new(width, height, pitch, values)
    }
}

/// Adds uniform noise in `[-amplitude, amplitude]` from a seeded generator.
pub fn perturb_depth(depth: &DepthMap, amplitude: f64, seed: u64) -> Result<DepthMap, SurfaceError> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(SurfaceError::Invalid(format!("perturbation amplitude must be non-negative, got {amplitude}")));
    }
    if amplitude == 0.0 {
        return Ok(depth.clone());
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let values = depth
        .values
        .iter()
        .map(|&v| v + rng.gen_range(-amplitude..=amplitude))
        .collect();
    Ok(DepthMap {
        values,
        ..depth.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, proptest};

    #[test]
    fn zero_amplitude_is_identity() {
        let d = DepthMap::new(3, 2, 0.1, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(perturb_depth(&d, 0.0, 9).unwrap(), d);
    }

    #[test]
    fn perturbation_is_bounded_and_breaks_ties() {
        let d = DepthMap::flat(64, 48, 0.1);
        let p = perturb_depth(&d, 1e-4, 0).unwrap();
        // independent recomputation with the same generator
        let mut rng = Pcg64::seed_from_u64(0);
        for (a, b) in d.values.iter().zip(&p.values) {
            let noise: f64 = rng.gen_range(-1e-4..=1e-4);
            assert_eq!(*b, a + noise);
            assert!((b - a).abs() <= 1e-4);
        }
        for j in 0..48 {
            for i in 0..63 {
                assert_ne!(p.get(i, j), p.get(i + 1, j));
            }
        }
        assert_eq!(perturb_depth(&d, 1e-4, 0).unwrap(), p);
        assert_ne!(perturb_depth(&d, 1e-4, 1).unwrap(), p);
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(DepthMap::new(2, 2, 0.1, vec![0.0; 3]).is_err());
        assert!(DepthMap::new(1, 1, 0.1, vec![f64::NAN]).is_err());
        assert!(perturb_depth(&DepthMap::flat(2, 2, 1.0), -1.0, 0).is_err());
        assert!(DepthMap::read_from(&b"DPTH\x02\0\0\0\x02\0\0\0\0\0\x80\x3f"[..]).is_err());
    }

    proptest! {
        #[test]
        fn file_roundtrip_of_quantized_map(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let base = DepthMap::flat(w, h, 0.05);
            let d = perturb_depth(&base, 2.0, seed).unwrap().quantized();
            let mut buf = Vec::new();
            d.write_to(&mut buf).unwrap();
            prop_assert_eq!(buf.len(), 16 + 4 * w * h);
            prop_assert_eq!(DepthMap::read_from(&buf[..]).unwrap(), d);
        }
    }
}
