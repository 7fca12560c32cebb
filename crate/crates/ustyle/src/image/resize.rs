//! Short-side bilinear resize followed by a square crop, the training-time
//! augmentation pipeline.

use super::Image;
use crate::error::{Error, Result};
use rand::Rng;

/// Bilinear resample to the exact target size, half-pixel-centered with
/// edge clamping.
pub fn resize_bilinear(img: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Contract(format!(
            "resize target must be positive, got {new_w}x{new_h}"
        )));
    }
    let sx = img.width as f64 / new_w as f64;
    let sy = img.height as f64 / new_h as f64;
    let mut out = Image::filled(new_w, new_h, [0.0; 3]);
    for y in 0..new_h {
        let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = src_y.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = src_y - y0 as f64;
        for x in 0..new_w {
            let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = src_x.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = src_x - x0 as f64;
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            let mut rgb = [0.0; 3];
            for c in 0..3 {
                let top = p00[c] + (p10[c] - p00[c]) * fx;
                let bottom = p01[c] + (p11[c] - p01[c]) * fx;
                rgb[c] = (top + (bottom - top) * fy).clamp(0.0, 1.0);
            }
            out.set_pixel(x, y, rgb);
        }
    }
    Ok(out)
}

/// Resize so the short side equals `short` (long side scaled and rounded
/// proportionally), then cut a `crop`×`crop` window: uniformly random when
/// an rng is given, centered otherwise.
pub fn resize_shortside_and_crop(
    img: &Image,
    short: usize,
    crop: usize,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<Image> {
    if crop > short {
        return Err(Error::Contract(format!(
            "crop {crop} exceeds short side {short}"
        )));
    }
    if short == 0 || crop == 0 {
        return Err(Error::Contract(
            "short and crop must be positive".to_string(),
        ));
    }
    let (new_w, new_h) = if img.width <= img.height {
        let h = ((img.height as f64) * short as f64 / img.width as f64).round() as usize;
        (short, h.max(short))
    } else {
        let w = ((img.width as f64) * short as f64 / img.height as f64).round() as usize;
        (w.max(short), short)
    };
    let resized = if new_w == img.width && new_h == img.height {
        img.clone()
    } else {
        resize_bilinear(img, new_w, new_h)?
    };
    let max_x = new_w - crop;
    let max_y = new_h - crop;
    let (ox, oy) = match rng {
        Some(r) => (
            if max_x > 0 { r.gen_range(0..=max_x) } else { 0 },
            if max_y > 0 { r.gen_range(0..=max_y) } else { 0 },
        ),
        None => (max_x / 2, max_y / 2),
    };
    let mut out = Image::filled(crop, crop, [0.0; 3]);
    for y in 0..crop {
        for x in 0..crop {
            out.set_pixel(x, y, resized.pixel(ox + x, oy + y));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn already_at_size_is_identity() {
        let mut img = Image::filled(64, 64, [0.2, 0.4, 0.6]);
        img.set_pixel(10, 20, [0.9, 0.1, 0.3]);
        let out = resize_shortside_and_crop(&img, 64, 64, None).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Image::filled(100, 50, [0.25, 0.5, 0.75]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = resize_shortside_and_crop(&img, 72, 64, Some(&mut rng)).unwrap();
        assert_eq!(out.width, 64);
        assert_eq!(out.height, 64);
        for y in 0..64 {
            for x in 0..64 {
                let p = out.pixel(x, y);
                for c in 0..3 {
                    assert!((p[c] - [0.25, 0.5, 0.75][c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn landscape_scales_long_side_proportionally() {
        // 100x50 at short=72: scale 72/50, long side rounds to 144.
        let img = Image::filled(100, 50, [0.5; 3]);
        let resized = resize_bilinear(&img, 144, 72).unwrap();
        assert_eq!((resized.width, resized.height), (144, 72));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = resize_shortside_and_crop(&img, 72, 64, Some(&mut rng)).unwrap();
        assert_eq!((out.width, out.height), (64, 64));
    }

    #[test]
    fn crop_larger_than_short_is_rejected() {
        let img = Image::filled(10, 10, [0.5; 3]);
        let err = resize_shortside_and_crop(&img, 8, 9, None).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn seeded_crops_are_reproducible() {
        let mut img = Image::filled(90, 120, [0.0; 3]);
        for y in 0..120 {
            for x in 0..90 {
                img.set_pixel(x, y, [(x as f64) / 89.0, (y as f64) / 119.0, 0.5]);
            }
        }
        let a = resize_shortside_and_crop(
            &img,
            72,
            64,
            Some(&mut ChaCha8Rng::seed_from_u64(77)),
        )
        .unwrap();
        let b = resize_shortside_and_crop(
            &img,
            72,
            64,
            Some(&mut ChaCha8Rng::seed_from_u64(77)),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
