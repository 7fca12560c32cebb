//! Procedural dataset generator.
//!
//! Content images are smooth scenes (gradients plus a few anti-aliased
//! shapes); style images are strongly textured patterns (stripes,
//! checkers, value noise, stipple dots) with per-style color palettes, so
//! encoder feature statistics separate the styles. Everything is a pure
//! function of the seed.

use super::{write_ppm, Image};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// File listing for a generated dataset. Paths are relative to the
/// manifest's own directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub content: Vec<String>,
    pub style: Vec<String>,
    /// Style path → contiguous id in `[0, style.len())`.
    pub style_ids: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: DatasetManifest = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for p in self.content.iter().chain(&self.style) {
            if !seen.insert(p) {
                return Err(Error::Format(format!("duplicate path {p} in manifest")));
            }
        }
        if self.style_ids.len() != self.style.len() {
            return Err(Error::Format(format!(
                "style_ids has {} entries for {} styles",
                self.style_ids.len(),
                self.style.len()
            )));
        }
        let mut ids: Vec<usize> = self.style_ids.values().copied().collect();
        ids.sort_unstable();
        for (want, got) in ids.iter().enumerate() {
            if want != *got {
                return Err(Error::Format(format!(
                    "style ids must be contiguous from 0, found {ids:?}"
                )));
            }
        }
        for p in &self.style {
            if !self.style_ids.contains_key(p) {
                return Err(Error::Format(format!("style {p} missing from style_ids")));
            }
        }
        Ok(())
    }

    pub fn style_id(&self, path: &str) -> Result<usize> {
        self.style_ids
            .get(path)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("style path {path} not in manifest")))
    }
}

/// Generation parameters.
#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_content: usize,
    pub n_style: usize,
    /// Square side length of every generated image.
    pub size: usize,
}

/// Generate the dataset under `out_dir` (created if missing) and write
/// `manifest.json` next to the images. Same arguments give byte-identical
/// files.
pub fn gen_synthetic_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if cfg.n_content == 0 || cfg.n_style == 0 {
        return Err(Error::Contract(
            "dataset needs at least one content and one style image".to_string(),
        ));
    }
    if cfg.size < 8 {
        return Err(Error::Contract(format!(
            "image size {} too small to carry any texture",
            cfg.size
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = DatasetManifest {
        content: Vec::new(),
        style: Vec::new(),
        style_ids: BTreeMap::new(),
    };
    for i in 0..cfg.n_content {
        let img = content_image(cfg.seed, i, cfg.size);
        let name = format!("content_{i:03}.ppm");
        std::fs::write(out_dir.join(&name), write_ppm(&img))?;
        manifest.content.push(name);
    }
    for i in 0..cfg.n_style {
        let img = style_image(cfg.seed, i, cfg.size);
        let name = format!("style_{i:03}.ppm");
        std::fs::write(out_dir.join(&name), write_ppm(&img))?;
        manifest.style_ids.insert(name.clone(), i);
        manifest.style.push(name);
    }
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Paths in a manifest joined onto its directory.
pub(crate) fn resolve(manifest_path: &Path, name: &str) -> PathBuf {
    match manifest_path.parent() {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

pub(crate) fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 over the three inputs
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(index.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = (h.rem_euclid(1.0)) * 6.0;
    let i = h.floor() as usize % 6;
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Smooth scene: a gradient background plus a few anti-aliased shapes.
fn content_image(seed: u64, index: usize, size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xC0, index as u64));
    let sz = size as f64;
    let c0 = hsv_to_rgb(rng.gen(), rng.gen_range(0.1..0.5), rng.gen_range(0.4..0.9));
    let c1 = hsv_to_rgb(rng.gen(), rng.gen_range(0.1..0.5), rng.gen_range(0.3..0.8));
    let radial = rng.gen_bool(0.5);
    let (gx, gy) = (rng.gen_range(0.2..0.8) * sz, rng.gen_range(0.2..0.8) * sz);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());

    let mut img = Image::filled(size, size, [0.0; 3]);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let t = if radial {
                let d = ((fx - gx).powi(2) + (fy - gy).powi(2)).sqrt() / (0.9 * sz);
                smoothstep(d)
            } else {
                smoothstep((dx * fx + dy * fy) / (sz * 1.4) + 0.5)
            };
            img.set_pixel(x, y, lerp3(c0, c1, t));
        }
    }

    let n_shapes = rng.gen_range(2..=4);
    for _ in 0..n_shapes {
        let color = hsv_to_rgb(rng.gen(), rng.gen_range(0.2..0.7), rng.gen_range(0.3..0.95));
        let cx = rng.gen_range(0.15..0.85) * sz;
        let cy = rng.gen_range(0.15..0.85) * sz;
        let r = rng.gen_range(0.08..0.25) * sz;
        let rectangular = rng.gen_bool(0.4);
        for y in 0..size {
            for x in 0..size {
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                let d = if rectangular {
                    (fx - cx).abs().max((fy - cy).abs()) - r
                } else {
                    ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt() - r
                };
                // 1.5-pixel soft edge
                let alpha = 1.0 - smoothstep(d / 1.5 + 0.5);
                if alpha > 0.0 {
                    let base = img.pixel(x, y);
                    img.set_pixel(x, y, lerp3(base, color, alpha));
                }
            }
        }
    }
    img
}

/// Textured pattern with a palette unique to the style index.
fn style_image(seed: u64, index: usize, size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x57, index as u64));
    let sz = size as f64;
    // Golden-ratio hue spacing keeps palettes far apart across indices.
    let hue = (index as f64 * 0.618_033_988_75 + rng.gen_range(0.0..0.08)).fract();
    let fg = hsv_to_rgb(hue, rng.gen_range(0.7..1.0), rng.gen_range(0.75..1.0));
    let bg = hsv_to_rgb(hue + 0.5, rng.gen_range(0.5..0.9), rng.gen_range(0.1..0.35));

    let mut img = Image::filled(size, size, bg);
    match index % 4 {
        0 => {
            // stripes at a seeded angle and frequency
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let freq = rng.gen_range(3.0..8.0);
            let (dx, dy) = (angle.cos(), angle.sin());
            for y in 0..size {
                for x in 0..size {
                    let phase =
                        (dx * (x as f64 + 0.5) + dy * (y as f64 + 0.5)) / sz * freq * std::f64::consts::TAU;
                    // hard-edged bands, softened over ~1px
                    let t = smoothstep(phase.sin() * 3.0 + 0.5);
                    img.set_pixel(x, y, lerp3(bg, fg, t));
                }
            }
        }
        1 => {
            // checkers
            let cell = rng.gen_range(size / 10..=size / 5).max(2);
            for y in 0..size {
                for x in 0..size {
                    if ((x / cell) + (y / cell)) % 2 == 0 {
                        img.set_pixel(x, y, fg);
                    }
                }
            }
        }
        2 => {
            // two-octave value noise through the palette
            let noise = ValueNoise::new(&mut rng, size / 8 + 2);
            let fine = ValueNoise::new(&mut rng, size / 3 + 2);
            for y in 0..size {
                for x in 0..size {
                    let u = x as f64 / sz;
                    let v = y as f64 / sz;
                    let t = 0.7 * noise.sample(u, v) + 0.3 * fine.sample(u, v);
                    img.set_pixel(x, y, lerp3(bg, fg, smoothstep(t * 1.4 - 0.2)));
                }
            }
        }
        _ => {
            // jittered stipple dots
            let cell = (size / 8).max(3);
            let radius = rng.gen_range(0.22..0.38) * cell as f64;
            for gy in 0..size.div_ceil(cell) {
                for gx in 0..size.div_ceil(cell) {
                    let cx = gx as f64 * cell as f64
                        + rng.gen_range(0.3..0.7) * cell as f64;
                    let cy = gy as f64 * cell as f64
                        + rng.gen_range(0.3..0.7) * cell as f64;
                    let lo_x = (cx - radius - 2.0).max(0.0) as usize;
                    let hi_x = ((cx + radius + 2.0) as usize).min(size - 1);
                    let lo_y = (cy - radius - 2.0).max(0.0) as usize;
                    let hi_y = ((cy + radius + 2.0) as usize).min(size - 1);
                    for y in lo_y..=hi_y {
                        for x in lo_x..=hi_x {
                            let d = ((x as f64 + 0.5 - cx).powi(2)
                                + (y as f64 + 0.5 - cy).powi(2))
                            .sqrt()
                                - radius;
                            let alpha = 1.0 - smoothstep(d + 0.5);
                            if alpha > 0.0 {
                                let base = img.pixel(x, y);
                                img.set_pixel(x, y, lerp3(base, fg, alpha));
                            }
                        }
                    }
                }
            }
        }
    }
    img
}

struct ValueNoise {
    lattice: Vec<f64>,
    n: usize,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, n: usize) -> Self {
        ValueNoise {
            lattice: (0..n * n).map(|_| rng.gen()).collect(),
            n,
        }
    }

    /// Sample at (u, v) in [0,1]² with smoothstep-bilinear interpolation.
    fn sample(&self, u: f64, v: f64) -> f64 {
        let fx = u.clamp(0.0, 1.0) * (self.n - 1) as f64;
        let fy = v.clamp(0.0, 1.0) * (self.n - 1) as f64;
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.n - 1);
        let y1 = (y0 + 1).min(self.n - 1);
        let tx = smoothstep(fx - x0 as f64);
        let ty = smoothstep(fy - y0 as f64);
        let a = self.lattice[y0 * self.n + x0];
        let b = self.lattice[y0 * self.n + x1];
        let c = self.lattice[y1 * self.n + x0];
        let d = self.lattice[y1 * self.n + x1];
        let top = a + (b - a) * tx;
        let bottom = c + (d - c) * tx;
        top + (bottom - top) * ty
    }
}
