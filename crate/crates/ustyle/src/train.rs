//! Batch construction, the training loop, and style-weight sweeps.
//!
//! Every step assembles one graph holding up to three branches — the
//! biased full-style branch (α = 1), the unbiased zero-style branch
//! (α = 0 with the content image standing in as the style), and one
//! anchored branch per configured interior α — takes a single backward
//! pass through their combined weighted loss, and applies one Adam
//! update. The encoder is bound as constants and never moves.

use crate::error::{Error, Result};
use crate::image::{batch_tensor, read_ppm, resize_shortside_and_crop, DatasetManifest, Image};
use crate::loss::{
    anchor_style_loss, content_loss, reconstruct_loss, style_loss, total_loss, tv_loss,
    AnchorTerms, BiasedTerms, LossBreakdown, LossWeights, Modes, UnbiasedTerms,
};
use crate::net::{
    interpolate_feature, BoundStyle, Model, RegressionFn, TransformerKind, DEFAULT_WIDTHS,
};
use crate::tensor::{Adam, Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Everything one training run needs.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub transformer: TransformerKind,
    pub weights: LossWeights,
    /// Interior anchor strengths; the standard anchored setup uses
    /// {1/3, 2/3}.
    pub anchors: Vec<f64>,
    pub modes: Modes,
    /// Explicit learning rate; when absent the standard rule applies
    /// (1e-4, dropped to 1e-6 once w_s reaches 1e4).
    pub lr: Option<f64>,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    /// Square crop fed to the network; the augmentation short side is
    /// `9/8` of this.
    pub image_size: usize,
    pub manifest: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    transformer: Option<String>,
    w_c: Option<f64>,
    w_s: Option<f64>,
    w_t: Option<f64>,
    w_r: Option<f64>,
    anchors: Option<Vec<f64>>,
    modes: Option<Vec<String>>,
    lr: Option<f64>,
    batch: Option<usize>,
    steps: Option<usize>,
    seed: Option<u64>,
    image_size: Option<usize>,
    manifest: String,
}

impl TrainConfig {
    /// Parse the JSON config document. Unknown keys are rejected; `w_r`
    /// defaults to `100·w_s`; relative manifest paths stay as written.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        let transformer = match raw.transformer.as_deref() {
            None => TransformerKind::Adain,
            Some(s) => TransformerKind::parse(s)?,
        };
        let w_s = raw.w_s.unwrap_or(50.0);
        let weights = LossWeights {
            w_c: raw.w_c.unwrap_or(1.0),
            w_s,
            w_t: raw.w_t.unwrap_or(1e-3),
            w_r: raw.w_r.unwrap_or(100.0 * w_s),
        };
        let modes = match raw.modes {
            None => Modes::UNBIASED,
            Some(names) => {
                let mut modes = Modes {
                    biased: false,
                    unbiased: false,
                    anchored: false,
                };
                for name in &names {
                    match name.as_str() {
                        "biased" => modes.biased = true,
                        "unbiased" => modes.unbiased = true,
                        "anchored" => modes.anchored = true,
                        other => {
                            return Err(Error::Usage(format!(
                                "unknown training mode {other:?}"
                            )))
                        }
                    }
                }
                modes
            }
        };
        let config = TrainConfig {
            transformer,
            weights,
            anchors: raw.anchors.unwrap_or_default(),
            modes,
            lr: raw.lr,
            batch: raw.batch.unwrap_or(4),
            steps: raw.steps.unwrap_or(500),
            seed: raw.seed.unwrap_or(0),
            image_size: raw.image_size.unwrap_or(64),
            manifest: PathBuf::from(raw.manifest),
        };
        config.validate()?;
        Ok(config)
    }

    /// Load a config file; a relative manifest path is resolved against
    /// the config file's directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_json(&text)?;
        if config.manifest.is_relative() {
            if let Some(dir) = path.parent() {
                config.manifest = dir.join(&config.manifest);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.modes.validate()?;
        self.weights.validate()?;
        if !self.modes.biased {
            return Err(Error::Contract(
                "training requires the biased branch".to_string(),
            ));
        }
        for &a in &self.anchors {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Contract(format!(
                    "anchors must lie strictly inside (0, 1), got {a}"
                )));
            }
        }
        if !self.anchors.is_empty() && !self.modes.anchored {
            return Err(Error::Usage(
                "anchors configured but anchored mode disabled".to_string(),
            ));
        }
        if self.batch == 0 {
            return Err(Error::Contract("batch size must be positive".to_string()));
        }
        if self.steps == 0 {
            return Err(Error::Contract("step count must be positive".to_string()));
        }
        if self.image_size < 8 || self.image_size % 8 != 0 {
            return Err(Error::Contract(format!(
                "image_size must be a positive multiple of 8, got {}",
                self.image_size
            )));
        }
        if let Some(lr) = self.lr {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::Contract(format!(
                    "learning rate must be positive, got {lr}"
                )));
            }
        }
        Ok(())
    }

    /// Augmentation short side: 9/8 of the crop.
    pub fn short_side(&self) -> usize {
        self.image_size * 9 / 8
    }

    /// The effective learning rate under the standard rule.
    pub fn effective_lr(&self) -> f64 {
        self.lr
            .unwrap_or(if self.weights.w_s >= 1e4 { 1e-6 } else { 1e-4 })
    }
}

/// A manifest with its images decoded and kept in memory.
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub content: Vec<Image>,
    pub style: Vec<Image>,
}

impl Dataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        if manifest.content.is_empty() || manifest.style.is_empty() {
            return Err(Error::Usage(format!(
                "manifest {} lists no content or no style images",
                manifest_path.display()
            )));
        }
        let read = |name: &String| -> Result<Image> {
            let path = crate::image::resolve_manifest_path(manifest_path, name);
            read_ppm(&std::fs::read(&path)?)
        };
        Ok(Dataset {
            content: manifest.content.iter().map(read).collect::<Result<_>>()?,
            style: manifest.style.iter().map(read).collect::<Result<_>>()?,
            manifest,
        })
    }

    pub fn num_styles(&self) -> usize {
        self.style.len()
    }
}

/// One training batch: augmented content and style image stacks plus the
/// style ids the CIN transformer addresses.
pub struct Batch {
    pub content: Tensor,
    pub style: Tensor,
    pub style_ids: Vec<usize>,
}

/// Draw one batch: content and style picked uniformly with replacement,
/// each augmented by short-side resize and a random crop.
pub fn sample_batch(
    dataset: &Dataset,
    rng: &mut ChaCha8Rng,
    config: &TrainConfig,
) -> Result<Batch> {
    let short = config.short_side();
    let crop = config.image_size;
    let mut contents = Vec::with_capacity(config.batch);
    let mut styles = Vec::with_capacity(config.batch);
    let mut style_ids = Vec::with_capacity(config.batch);
    for _ in 0..config.batch {
        let ci = rng.gen_range(0..dataset.content.len());
        contents.push(resize_shortside_and_crop(
            &dataset.content[ci],
            short,
            crop,
            Some(rng),
        )?);
        let si = rng.gen_range(0..dataset.style.len());
        styles.push(resize_shortside_and_crop(
            &dataset.style[si],
            short,
            crop,
            Some(rng),
        )?);
        style_ids.push(si);
    }
    Ok(Batch {
        content: batch_tensor(&contents)?,
        style: batch_tensor(&styles)?,
        style_ids,
    })
}

/// One optimization step over the enabled branches; `step_index` only
/// feeds diagnostics.
pub fn train_step(
    model: &mut Model,
    batch: &Batch,
    config: &TrainConfig,
    opt: &mut Adam,
    step_index: usize,
) -> Result<LossBreakdown> {
    let eps = model.eps;
    let modes = config.modes;
    let mut g = Graph::new();
    let enc = model.encoder.bind(&mut g);
    let dec = model.decoder.bind(&mut g);
    let cin_nodes = model
        .cin
        .as_ref()
        .map(|bank| (g.leaf(&bank.gamma), g.leaf(&bank.beta)));

    let content = g.constant(&batch.content);
    let pyr_c = enc.encode(&mut g, content)?;

    let style_img = g.constant(&batch.style);
    let pyr_s = enc.encode(&mut g, style_img)?;
    let bound_style = match model.kind {
        TransformerKind::Adain => BoundStyle::Latent(pyr_s.latent()),
        TransformerKind::Cin => {
            let (gamma, beta) = cin_nodes.expect("cin models carry a bank");
            BoundStyle::Ids {
                ids: batch.style_ids.clone(),
                gamma,
                beta,
            }
        }
    };
    let styled = model.transform(&mut g, pyr_c.latent(), &bound_style)?;

    // Biased branch: full style strength.
    let latent_b = interpolate_feature(&mut g, pyr_c.latent(), styled, 1.0, &RegressionFn::Identity)?;
    let img_b = dec.decode(&mut g, latent_b)?;
    let pyr_b = enc.encode(&mut g, img_b)?;
    let biased = BiasedTerms {
        content: content_loss(&mut g, pyr_b.latent(), pyr_c.latent())?,
        style: style_loss(&mut g, &pyr_b, &pyr_s, eps)?,
        tv: tv_loss(&mut g, img_b)?,
    };

    // Unbiased branch: zero style strength, the content image is its own
    // style, so the decoder input is exactly the content latent.
    let unbiased = if modes.unbiased {
        let img_u = dec.decode(&mut g, pyr_c.latent())?;
        let pyr_u = enc.encode(&mut g, img_u)?;
        Some(UnbiasedTerms {
            content: content_loss(&mut g, pyr_u.latent(), pyr_c.latent())?,
            style: style_loss(&mut g, &pyr_u, &pyr_c, eps)?,
            tv: tv_loss(&mut g, img_u)?,
            reconstruct: reconstruct_loss(&mut g, img_u, content)?,
        })
    } else {
        None
    };

    // Anchored branches reuse the step's pair and styled latent.
    let mut anchor_terms = Vec::new();
    if modes.anchored {
        for &alpha in &config.anchors {
            let latent_a =
                interpolate_feature(&mut g, pyr_c.latent(), styled, alpha, &RegressionFn::Identity)?;
            let img_a = dec.decode(&mut g, latent_a)?;
            let pyr_a = enc.encode(&mut g, img_a)?;
            anchor_terms.push(AnchorTerms {
                alpha,
                content: content_loss(&mut g, pyr_a.latent(), pyr_c.latent())?,
                style: anchor_style_loss(&mut g, &pyr_a, &pyr_s, &pyr_c, alpha, eps)?,
                tv: tv_loss(&mut g, img_a)?,
            });
        }
    }

    let (total, breakdown) = total_loss(
        &mut g,
        modes,
        &config.weights,
        Some(&biased),
        unbiased.as_ref(),
        &anchor_terms,
    )?;
    if let Some(term) = breakdown.nonfinite_term() {
        return Err(Error::State(format!(
            "training aborted: loss term {term} is not finite at step {step_index}"
        )));
    }

    let grads = g.backward(total)?;
    let mut param_nodes: Vec<crate::tensor::NodeId> = Vec::new();
    for &(w, b) in &dec.layers {
        param_nodes.push(w);
        param_nodes.push(b);
    }
    if let Some((gamma, beta)) = cin_nodes {
        param_nodes.push(gamma);
        param_nodes.push(beta);
    }
    let sizes = model.trainable_param_sizes();
    let owned: Vec<Vec<f64>> = param_nodes
        .iter()
        .zip(&sizes)
        .map(|(&id, &n)| grads.get(id).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; n]))
        .collect();
    let slices: Vec<&[f64]> = owned.iter().map(|v| v.as_slice()).collect();
    opt.step(&mut model.trainable_params(), &slices)?;
    Ok(breakdown)
}

/// Per-step record of a run.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub breakdown: LossBreakdown,
    pub elapsed_secs: f64,
}

/// Append-only training log.
#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str =
        "step,total,content,style,tv,u_content,u_style,u_tv,reconstruct,a_style";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let b = &r.breakdown;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.step,
                b.total,
                b.content,
                b.style,
                b.tv,
                b.u_content,
                b.u_style,
                b.u_tv,
                b.reconstruct,
                b.a_style_sum()
            ));
        }
        out
    }
}

/// Run one full training job. Deterministic in (config, manifest bytes):
/// the model seeds derive from the config seed and the batch stream is a
/// single seeded rng.
pub fn train(config: &TrainConfig) -> Result<(Model, TrainLog)> {
    config.validate()?;
    let dataset = Dataset::load(&config.manifest)?;
    let mut model = init_model(config, dataset.num_styles());
    let mut opt = Adam::new(config.effective_lr(), &model.trainable_param_sizes());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = TrainLog::default();
    let start = Instant::now();
    for step in 0..config.steps {
        let batch = sample_batch(&dataset, &mut rng, config)?;
        let breakdown = train_step(&mut model, &batch, config, &mut opt, step)?;
        log.records.push(StepRecord {
            step,
            breakdown,
            elapsed_secs: start.elapsed().as_secs_f64(),
        });
    }
    Ok((model, log))
}

fn init_model(config: &TrainConfig, num_styles: usize) -> Model {
    let enc_seed = crate::image::mix_seed(config.seed, 0xE0C0, 0);
    let dec_seed = crate::image::mix_seed(config.seed, 0xDEC0, 0);
    let mut model = match config.transformer {
        TransformerKind::Adain => Model::new_adain(enc_seed, dec_seed, DEFAULT_WIDTHS),
        TransformerKind::Cin => Model::new_cin(enc_seed, dec_seed, DEFAULT_WIDTHS, num_styles),
    };
    model.trained_w_s = Some(config.weights.w_s);
    model
}

/// Train one model per style weight. Each member re-derives
/// `w_r = 100·w_s`, takes seed `base + index`, and re-applies the
/// learning-rate rule unless an explicit lr is set.
pub fn sweep_style_weight(
    base: &TrainConfig,
    ws_list: &[f64],
) -> Result<Vec<(f64, Model, TrainLog)>> {
    if ws_list.is_empty() {
        return Err(Error::Usage("sweep needs at least one style weight".to_string()));
    }
    let mut out = Vec::with_capacity(ws_list.len());
    for (index, &w_s) in ws_list.iter().enumerate() {
        let mut config = base.clone();
        config.weights.w_s = w_s;
        config.weights.w_r = 100.0 * w_s;
        config.seed = base.seed.wrapping_add(index as u64);
        let (model, log) = train(&config)?;
        out.push((w_s, model, log));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{gen_synthetic_dataset, SynthConfig};

    fn dataset_dir(tag: &str, n_content: usize, n_style: usize) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "ustyle-train-{tag}-{}",
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        gen_synthetic_dataset(
            &SynthConfig {
                seed: 99,
                n_content,
                n_style,
                size: 40,
            },
            &dir,
        )
        .unwrap();
        dir
    }

    fn micro_config(manifest: PathBuf) -> TrainConfig {
        TrainConfig {
            transformer: TransformerKind::Adain,
            weights: LossWeights::for_style_weight(50.0),
            anchors: vec![],
            modes: Modes::UNBIASED,
            lr: None,
            batch: 2,
            steps: 3,
            seed: 11,
            image_size: 16,
            manifest,
        }
    }

    #[test]
    fn config_json_round_trip_and_defaults() {
        let config = TrainConfig::from_json(
            r#"{"manifest": "data/manifest.json", "w_s": 1000.0, "modes": ["biased"]}"#,
        )
        .unwrap();
        assert_eq!(config.weights.w_c, 1.0);
        assert_eq!(config.weights.w_t, 1e-3);
        assert_eq!(config.weights.w_r, 100.0 * 1000.0);
        assert_eq!(config.batch, 4);
        assert_eq!(config.steps, 500);
        assert_eq!(config.image_size, 64);
        assert!(config.modes.biased && !config.modes.unbiased);
        assert_eq!(config.effective_lr(), 1e-4);
    }

    #[test]
    fn lr_rule_drops_at_large_style_weight() {
        let config = TrainConfig::from_json(r#"{"manifest": "m.json", "w_s": 10000.0}"#).unwrap();
        assert_eq!(config.effective_lr(), 1e-6);
        let config =
            TrainConfig::from_json(r#"{"manifest": "m.json", "w_s": 10000.0, "lr": 0.01}"#)
                .unwrap();
        assert_eq!(config.effective_lr(), 0.01);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_modes() {
        assert!(matches!(
            TrainConfig::from_json(r#"{"manifest": "m.json", "wz": 1.0}"#),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            TrainConfig::from_json(r#"{"manifest": "m.json", "modes": ["spicy"]}"#),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            TrainConfig::from_json(
                r#"{"manifest": "m.json", "modes": ["biased", "anchored"], "anchors": [0.5]}"#
            ),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            TrainConfig::from_json(r#"{"manifest": "m.json", "anchors": [1.0], "modes": ["biased","unbiased","anchored"]}"#),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn batches_are_seed_reproducible() {
        let dir = dataset_dir("repro", 3, 2);
        let config = micro_config(dir.join("manifest.json"));
        let dataset = Dataset::load(&config.manifest).unwrap();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let a = sample_batch(&dataset, &mut rng, &config).unwrap();
            let b = sample_batch(&dataset, &mut rng, &config).unwrap();
            (a.content.data, a.style_ids, b.content.data, b.style_ids)
        };
        assert_eq!(draw(), draw());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn style_draws_are_roughly_uniform() {
        let dir = dataset_dir("uniform", 2, 8);
        let mut config = micro_config(dir.join("manifest.json"));
        config.batch = 4;
        let dataset = Dataset::load(&config.manifest).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut counts = [0usize; 8];
        for _ in 0..250 {
            let batch = sample_batch(&dataset, &mut rng, &config).unwrap();
            for &id in &batch.style_ids {
                counts[id] += 1;
            }
        }
        for (id, &n) in counts.iter().enumerate() {
            let freq = n as f64 / 1000.0;
            assert!(
                (0.08..=0.17).contains(&freq),
                "style {id} frequency {freq}"
            );
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn biased_only_step_zeroes_the_other_branches() {
        let dir = dataset_dir("biasedonly", 2, 2);
        let mut config = micro_config(dir.join("manifest.json"));
        config.modes = Modes::BIASED;
        let dataset = Dataset::load(&config.manifest).unwrap();
        let mut model = init_model(&config, dataset.num_styles());
        let mut opt = Adam::new(config.effective_lr(), &model.trainable_param_sizes());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let batch = sample_batch(&dataset, &mut rng, &config).unwrap();
        let b = train_step(&mut model, &batch, &config, &mut opt, 0).unwrap();
        assert_eq!(b.u_content, 0.0);
        assert_eq!(b.u_style, 0.0);
        assert_eq!(b.u_tv, 0.0);
        assert_eq!(b.reconstruct, 0.0);
        assert!(b.a_style.is_empty());
        let expect =
            config.weights.w_c * b.content + config.weights.w_s * b.style + config.weights.w_t * b.tv;
        assert!((b.total - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn encoder_is_untouched_by_training() {
        let dir = dataset_dir("frozen", 2, 2);
        let config = micro_config(dir.join("manifest.json"));
        let dataset = Dataset::load(&config.manifest).unwrap();
        let mut model = init_model(&config, dataset.num_styles());
        let before = model.encoder.checksum();
        let trainable_before = model.trainable_checksum();
        let mut opt = Adam::new(config.effective_lr(), &model.trainable_param_sizes());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let batch = sample_batch(&dataset, &mut rng, &config).unwrap();
        train_step(&mut model, &batch, &config, &mut opt, 0).unwrap();
        assert_eq!(model.encoder.checksum(), before);
        assert_ne!(model.trainable_checksum(), trainable_before);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn anchored_step_populates_every_anchor() {
        let dir = dataset_dir("anchored", 2, 2);
        let mut config = micro_config(dir.join("manifest.json"));
        config.modes = Modes::ANCHORED;
        config.anchors = vec![1.0 / 3.0, 2.0 / 3.0];
        let dataset = Dataset::load(&config.manifest).unwrap();
        let mut model = init_model(&config, dataset.num_styles());
        let mut opt = Adam::new(config.effective_lr(), &model.trainable_param_sizes());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let batch = sample_batch(&dataset, &mut rng, &config).unwrap();
        let b = train_step(&mut model, &batch, &config, &mut opt, 0).unwrap();
        assert_eq!(b.a_style.len(), 2);
        assert_eq!(b.a_content.len(), 2);
        assert!(b.a_style.iter().all(|&v| v > 0.0));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn cin_training_moves_the_bank() {
        let dir = dataset_dir("cin", 2, 3);
        let mut config = micro_config(dir.join("manifest.json"));
        config.transformer = TransformerKind::Cin;
        let dataset = Dataset::load(&config.manifest).unwrap();
        let mut model = init_model(&config, dataset.num_styles());
        let gamma_before = model.cin.as_ref().unwrap().gamma.data.clone();
        let mut opt = Adam::new(config.effective_lr(), &model.trainable_param_sizes());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for step in 0..2 {
            let batch = sample_batch(&dataset, &mut rng, &config).unwrap();
            train_step(&mut model, &batch, &config, &mut opt, step).unwrap();
        }
        assert_ne!(model.cin.as_ref().unwrap().gamma.data, gamma_before);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn train_is_deterministic_in_config_and_seed() {
        let dir = dataset_dir("determinism", 2, 2);
        let config = micro_config(dir.join("manifest.json"));
        let (m1, l1) = train(&config).unwrap();
        let (m2, l2) = train(&config).unwrap();
        assert_eq!(
            crate::net::checkpoint_bytes(&m1),
            crate::net::checkpoint_bytes(&m2)
        );
        assert_eq!(l1.to_csv(), l2.to_csv());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn sweep_rederives_w_r_and_records_w_s() {
        let dir = dataset_dir("sweep", 2, 2);
        let mut config = micro_config(dir.join("manifest.json"));
        config.steps = 1;
        let swept = sweep_style_weight(&config, &[50.0, 100.0]).unwrap();
        assert_eq!(swept.len(), 2);
        assert_eq!(swept[0].1.trained_w_s, Some(50.0));
        assert_eq!(swept[1].1.trained_w_s, Some(100.0));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
