//! Images, the PPM codec, resize/crop augmentation, and the synthetic
//! dataset generator.

mod ppm;
mod resize;
mod synth;

pub use ppm::{read_ppm, write_ppm};
pub use resize::resize_shortside_and_crop;
pub use synth::{gen_synthetic_dataset, DatasetManifest, SynthConfig};
pub(crate) use synth::{mix_seed, resolve as resolve_manifest_path};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// An RGB image with all channel values in [0, 1], interleaved row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// `3 * width * height` values, RGB interleaved.
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != 3 * width * height {
            return Err(Error::Shape(format!(
                "pixel buffer has {} values, {}x{} RGB needs {}",
                pixels.len(),
                width,
                height,
                3 * width * height
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Contract(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Image {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i] = rgb[0];
        self.pixels[i + 1] = rgb[1];
        self.pixels[i + 2] = rgb[2];
    }

    /// Planar (1, 3, h, w) tensor view of the image.
    pub fn to_tensor(&self) -> Tensor {
        let shape = Shape::new(1, 3, self.height, self.width);
        let mut data = vec![0.0; shape.numel()];
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.pixel(x, y);
                for c in 0..3 {
                    data[shape.index(0, c, y, x)] = p[c];
                }
            }
        }
        Tensor::new(shape, data).expect("shape matches by construction")
    }

    /// Extract sample `n` of a (n, 3, h, w) tensor as an image, clamping
    /// to [0, 1].
    pub fn from_tensor(t: &Tensor, n: usize) -> Result<Self> {
        let sh = t.shape;
        if sh.c != 3 {
            return Err(Error::Shape(format!(
                "image tensors need 3 channels, got {sh}"
            )));
        }
        if n >= sh.n {
            return Err(Error::Contract(format!(
                "sample index {n} out of range for batch {}",
                sh.n
            )));
        }
        let mut pixels = vec![0.0; 3 * sh.h * sh.w];
        for y in 0..sh.h {
            for x in 0..sh.w {
                for c in 0..3 {
                    pixels[3 * (y * sh.w + x) + c] =
                        t.data[sh.index(n, c, y, x)].clamp(0.0, 1.0);
                }
            }
        }
        Ok(Image {
            width: sh.w,
            height: sh.h,
            pixels,
        })
    }
}

/// Stack images of identical size into one (n, 3, h, w) batch tensor.
pub fn batch_tensor(images: &[Image]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Contract("batch_tensor needs at least one image".to_string()))?;
    let shape = Shape::new(images.len(), 3, first.height, first.width);
    let mut data = vec![0.0; shape.numel()];
    for (n, img) in images.iter().enumerate() {
        if img.width != first.width || img.height != first.height {
            return Err(Error::Shape(format!(
                "batch image {} is {}x{}, expected {}x{}",
                n, img.width, img.height, first.width, first.height
            )));
        }
        for y in 0..img.height {
            for x in 0..img.width {
                let p = img.pixel(x, y);
                for c in 0..3 {
                    data[shape.index(n, c, y, x)] = p[c];
                }
            }
        }
    }
    Tensor::new(shape, data)
}
