//! Image comparison: global alignment, MSE, PSNR and SSIM.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::render::Image;

pub const DEFAULT_MAX_SHIFT: usize = 20;
pub const MIN_OVERLAP: usize = 16;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const CSV_HEADER: &str = "case,offset_x,offset_y,mse,psnr_db,ssim";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("{0}")]
    Alignment(String),
    #[error("image {0}x{1} is smaller than the {2}x{2} SSIM window")]
    TooSmall(usize, usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mse: f64,
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
    /// Position of `a`'s content inside `b`: `a(x, y) ≈ b(x + dx, y + dy)`.
    pub offset: [i64; 2],
}

fn same_size(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    same_size(a, b)?;
    let sum: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| {
            (0..3)
                .map(|k| {
                    let d = p[k] as i64 - q[k] as i64;
                    (d * d) as u64
                })
                .sum::<u64>()
        })
        .sum();
    Ok(sum as f64 / (3 * a.pixels.len()).max(1) as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// Normalized 1-D Gaussian of `SSIM_WINDOW` taps.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut t = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in t.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = t.iter().sum();
    t.map(|v| v / s)
}

/// Separable filtering over fully covered window positions only.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| taps[k] * src[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| taps[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean local SSIM per channel (Gaussian window, canonical constants,
/// dynamic range 255), averaged over the three channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    same_size(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(w, h, SSIM_WINDOW));
    }
    let taps = gaussian_taps();
    let c1 = (SSIM_K1 * 255.0).powi(2);
    let c2 = (SSIM_K2 * 255.0).powi(2);
    let per_channel: Vec<f64> = (0..3)
        .into_par_iter()
        .map(|k| {
            let x: Vec<f64> = a.pixels.iter().map(|p| p[k] as f64).collect();
            let y: Vec<f64> = b.pixels.iter().map(|p| p[k] as f64).collect();
            let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
            let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();
            let mx = filter_valid(&x, w, h, &taps);
            let my = filter_valid(&y, w, h, &taps);
            let sxx = filter_valid(&xx, w, h, &taps);
            let syy = filter_valid(&yy, w, h, &taps);
            let sxy = filter_valid(&xy, w, h, &taps);
            let n = mx.len();
            (0..n)
                .map(|i| {
                    let (m1, m2) = (mx[i], my[i]);
                    let v1 = sxx[i] - m1 * m1;
                    let v2 = syy[i] - m2 * m2;
                    let cov = sxy[i] - m1 * m2;
                    ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2)) / ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2))
                })
                .sum::<f64>()
                / n as f64
        })
        .collect();
    Ok(per_channel.iter().sum::<f64>() / 3.0)
}

pub fn luma(img: &Image) -> Vec<f64> {
    img.pixels
        .iter()
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Overlap window in `a` for offset `(dx, dy)`: `[x0, x1) × [y0, y1)`.
fn overlap(w: usize, h: usize, dx: i64, dy: i64) -> Option<(usize, usize, usize, usize)> {
    let x0 = (-dx).max(0);
    let x1 = (w as i64).min(w as i64 - dx);
    let y0 = (-dy).max(0);
    let y1 = (h as i64).min(h as i64 - dy);
    if x1 - x0 < MIN_OVERLAP as i64 || y1 - y0 < MIN_OVERLAP as i64 {
        return None;
    }
    Some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
}

fn ncc(la: &[f64], lb: &[f64], w: usize, win: (usize, usize, usize, usize), dx: i64, dy: i64) -> f64 {
    let (x0, x1, y0, y1) = win;
    let n = ((x1 - x0) * (y1 - y0)) as f64;
    let at_b = |x: usize, y: usize| lb[(y as i64 + dy) as usize * w + (x as i64 + dx) as usize];
    let (mut sa, mut sb) = (0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            sa += la[y * w + x];
            sb += at_b(x, y);
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut cab, mut caa, mut cbb) = (0.0, 0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let (u, v) = (la[y * w + x] - ma, at_b(x, y) - mb);
            cab += u * v;
            caa += u * u;
            cbb += v * v;
        }
    }
    if caa > 0.0 && cbb > 0.0 {
        cab / (caa * cbb).sqrt()
    } else {
        0.0
    }
}

/// Finds the integer offset within `±max_shift` maximizing the normalized
/// cross-correlation of the luma images and crops both to the overlap.
/// Ties go to the smaller shift.
pub fn align_crop(a: &Image, b: &Image, max_shift: usize) -> Result<(Image, Image, [i64; 2]), MetricsError> {
    same_size(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < MIN_OVERLAP || h < MIN_OVERLAP {
        return Err(MetricsError::Alignment(format!(
            "images {w}x{h} are smaller than the {MIN_OVERLAP}x{MIN_OVERLAP} minimum overlap"
        )));
    }
    let (la, lb) = (luma(a), luma(b));
    let s = max_shift as i64;
    let offsets: Vec<(i64, i64)> = (-s..=s).flat_map(|dy| (-s..=s).map(move |dx| (dx, dy))).collect();
    let scores: Vec<Option<f64>> = offsets
        .par_iter()
        .map(|&(dx, dy)| overlap(w, h, dx, dy).map(|win| ncc(&la, &lb, w, win, dx, dy)))
        .collect();
    let mut best: Option<(f64, i64, (i64, i64))> = None;
    for (&(dx, dy), score) in offsets.iter().zip(&scores) {
        let Some(score) = *score else { continue };
        let dist = dx.abs() + dy.abs();
        let better = match best {
            None => true,
            Some((bs, bd, _)) => score > bs || (score == bs && dist < bd),
        };
        if better {
            best = Some((score, dist, (dx, dy)));
        }
    }
    let (_, _, (dx, dy)) = best.ok_or_else(|| MetricsError::Alignment("no offset leaves enough overlap".into()))?;
    let (x0, x1, y0, y1) = overlap(w, h, dx, dy).expect("scored offsets overlap");
    let crop = |img: &Image, ox: i64, oy: i64| {
        let mut pixels = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            for x in x0..x1 {
                pixels.push(img.get((x as i64 + ox) as usize, (y as i64 + oy) as usize));
            }
        }
        Image {
            width: x1 - x0,
            height: y1 - y0,
            pixels,
        }
    };
    Ok((crop(a, 0, 0), crop(b, dx, dy), [dx, dy]))
}

/// Aligns, crops and scores a pair.
pub fn compare(a: &Image, b: &Image, max_shift: usize) -> Result<MetricsReport, MetricsError> {
    let (ca, cb, offset) = align_crop(a, b, max_shift)?;
    let m = mse(&ca, &cb)?;
    Ok(MetricsReport {
        mse: m,
        psnr: psnr_from_mse(m),
        ssim: ssim(&ca, &cb)?,
        offset,
    })
}

fn fmt_f(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Mean and sample standard deviation of each metric over finite values.
pub fn summarize(reports: &[MetricsReport]) -> [(f64, f64); 3] {
    let stat = |f: &dyn Fn(&MetricsReport) -> f64| {
        let vals: Vec<f64> = reports.iter().map(f).filter(|v| v.is_finite()).collect();
        let n = vals.len() as f64;
        if vals.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    };
    [stat(&|r| r.mse), stat(&|r| r.psnr), stat(&|r| r.ssim)]
}

/// CSV with one row per case followed by `mean` and `sd` rows.
pub fn write_csv<W: Write>(mut out: W, rows: &[(String, MetricsReport)]) -> Result<(), MetricsError> {
    writeln!(out, "{CSV_HEADER}")?;
    for (case, r) in rows {
        writeln!(
            out,
            "{case},{},{},{},{},{}",
            r.offset[0],
            r.offset[1],
            fmt_f(r.mse),
            fmt_f(r.psnr),
            fmt_f(r.ssim)
        )?;
    }
    if !rows.is_empty() {
        let reports: Vec<MetricsReport> = rows.iter().map(|(_, r)| *r).collect();
        let [m, p, s] = summarize(&reports);
        writeln!(out, "mean,,,{},{},{}", fmt_f(m.0), fmt_f(p.0), fmt_f(s.0))?;
        writeln!(out, "sd,,,{},{},{}", fmt_f(m.1), fmt_f(p.1), fmt_f(s.1))?;
    }
    Ok(())
}

/// Deterministic textured test image with mid-range contrast.
pub fn test_pattern(width: usize, height: usize) -> Image {
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let r = 128.0 + 60.0 * (fx * 0.21).sin() * (fy * 0.13).cos();
            let g = 128.0 + 50.0 * ((fx + 2.0 * fy) * 0.07).sin();
            let checker = if (x / 8 + y / 8) % 2 == 0 { 30.0 } else { -30.0 };
            let b = 120.0 + checker + 20.0 * (fy * 0.31).sin();
            pixels.push([r.round() as u8, g.round() as u8, b.round() as u8]);
        }
    }
    Image {
        width,
        height,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shifted(a: &Image, dx: i64, dy: i64) -> Image {
        // b(x, y) = a(x − dx, y − dy); uncovered pixels stay black
        let mut b = Image::filled(a.width, a.height, [0; 3]);
        for y in 0..a.height as i64 {
            for x in 0..a.width as i64 {
                let (sx, sy) = (x - dx, y - dy);
                if sx >= 0 && sy >= 0 && sx < a.width as i64 && sy < a.height as i64 {
                    b.set(x as usize, y as usize, a.get(sx as usize, sy as usize));
                }
            }
        }
        b
    }

    #[test]
    fn mse_and_psnr_basics() {
        let a = test_pattern(20, 20);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let lo = Image::filled(7, 5, [100, 50, 3]);
        let hi = Image::filled(7, 5, [116, 66, 19]);
        assert_eq!(mse(&lo, &hi).unwrap(), 256.0);
        assert_eq!(psnr_from_mse(650.25), 20.0);
        assert!((psnr_from_mse(717.9) - 19.57).abs() < 0.005);
        assert!(mse(&lo, &a).is_err());
    }

    #[test]
    fn ssim_constant_images_closed_form() {
        let (u1, u2) = (90.0, 170.0);
        let a = Image::filled(16, 16, [u1 as u8; 3]);
        let b = Image::filled(16, 16, [u2 as u8; 3]);
        let c1 = (0.01f64 * 255.0).powi(2);
        let expect = (2.0 * u1 * u2 + c1) / (u1 * u1 + u2 * u2 + c1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-12);
        assert!(ssim(&Image::filled(10, 30, [0; 3]), &Image::filled(10, 30, [0; 3])).is_err());
    }

    #[test]
    fn ssim_of_inverse_is_low() {
        let a = test_pattern(64, 48);
        let inv = Image {
            pixels: a.pixels.iter().map(|p| p.map(|c| 255 - c)).collect(),
            ..a.clone()
        };
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        assert!(ssim(&a, &inv).unwrap() < 0.3);
    }

    #[test]
    fn alignment_recovers_shift() {
        let a = test_pattern(80, 60);
        let b = shifted(&a, 3, -2);
        let (ca, cb, off) = align_crop(&a, &b, DEFAULT_MAX_SHIFT).unwrap();
        assert_eq!(off, [3, -2]);
        assert_eq!((ca.width, ca.height), (77, 58));
        assert_eq!(ca, cb);
        let (_, _, again) = align_crop(&ca, &cb, DEFAULT_MAX_SHIFT).unwrap();
        assert_eq!(again, [0, 0]);
        let (fa, _, forced) = align_crop(&a, &b, 0).unwrap();
        assert_eq!(forced, [0, 0]);
        assert_eq!((fa.width, fa.height), (80, 60));
        assert!(align_crop(&Image::filled(15, 40, [0; 3]), &Image::filled(15, 40, [0; 3]), 2).is_err());
    }

    #[test]
    fn noise_degrades_monotonically() {
        use rand::{Rng, SeedableRng};
        let a = test_pattern(64, 64);
        let mut last = (0.0, f64::INFINITY);
        for amp in [2i32, 8, 24, 64] {
            let mut rng = rand_pcg::Pcg64::seed_from_u64(5);
            let b = Image {
                pixels: a
                    .pixels
                    .iter()
                    .map(|p| p.map(|c| (c as i32 + rng.gen_range(-amp..=amp)).clamp(0, 255) as u8))
                    .collect(),
                ..a.clone()
            };
            let (m, p) = (mse(&a, &b).unwrap(), psnr(&a, &b).unwrap());
            assert!(m > last.0 && p < last.1);
            last = (m, p);
        }
    }

    #[test]
    fn csv_layout() {
        let r = MetricsReport {
            mse: 0.0,
            psnr: f64::INFINITY,
            ssim: 1.0,
            offset: [1, -2],
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[("p/0".into(), r)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "p/0,1,-2,0,inf,1");
        assert_eq!(lines[2], "mean,,,0,nan,1");
    }

    fn small_image() -> impl Strategy<Value = Image> {
        (11usize..20, 11usize..20).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<[u8; 3]>(), w * h).prop_map(move |pixels| Image {
                width: w,
                height: h,
                pixels,
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn symmetric_and_bounded((a, b) in small_image().prop_flat_map(|a| {
            let (w, h) = (a.width, a.height);
            (Just(a), prop::collection::vec(any::<[u8; 3]>(), w * h).prop_map(move |p| Image { width: w, height: h, pixels: p }))
        })) {
            prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
            let (s1, s2) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
            prop_assert!((s1 - s2).abs() < 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&s1));
            let m = mse(&a, &b).unwrap();
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr_from_mse(m));
        }
    }
}
