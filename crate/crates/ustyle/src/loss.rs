//! Loss terms and their weighted assembly.
//!
//! Every norm is realized as a mean over elements rather than a sum, so
//! loss magnitudes are independent of image and feature sizes and the
//! weight ratios keep their meaning across scales. Style distances live on
//! the statistics vector (per-level instance mean and std), not on raw
//! feature maps.

use crate::error::{Error, Result};
use crate::net::FeaturePyramid;
use crate::tensor::{Graph, NodeId};

/// Weights of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub w_c: f64,
    pub w_s: f64,
    pub w_t: f64,
    pub w_r: f64,
}

impl LossWeights {
    /// The standard configuration for a given style weight:
    /// `w_c = 1`, `w_t = 1e-3`, `w_r = 100·w_s`.
    pub fn for_style_weight(w_s: f64) -> Self {
        LossWeights {
            w_c: 1.0,
            w_s,
            w_t: 1e-3,
            w_r: 100.0 * w_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_c", self.w_c),
            ("w_s", self.w_s),
            ("w_t", self.w_t),
            ("w_r", self.w_r),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Contract(format!(
                    "loss weight {name} must be a non-negative real, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Which training branches are active. Each flag implies the previous:
/// anchored training extends unbiased training extends biased training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modes {
    pub biased: bool,
    pub unbiased: bool,
    pub anchored: bool,
}

impl Modes {
    pub const BIASED: Modes = Modes {
        biased: true,
        unbiased: false,
        anchored: false,
    };
    pub const UNBIASED: Modes = Modes {
        biased: true,
        unbiased: true,
        anchored: false,
    };
    pub const ANCHORED: Modes = Modes {
        biased: true,
        unbiased: true,
        anchored: true,
    };

    pub fn validate(&self) -> Result<()> {
        if self.anchored && !self.unbiased {
            return Err(Error::Contract(
                "anchored mode requires unbiased mode".to_string(),
            ));
        }
        if self.unbiased && !self.biased {
            return Err(Error::Contract(
                "unbiased mode requires biased mode".to_string(),
            ));
        }
        Ok(())
    }
}

/// Scalar values of every loss term of one step, plus the weighted total.
#[derive(Clone, Debug, Default)]
pub struct LossBreakdown {
    pub content: f64,
    pub style: f64,
    pub tv: f64,
    pub u_content: f64,
    pub u_style: f64,
    pub u_tv: f64,
    pub reconstruct: f64,
    /// Per configured anchor α, in order.
    pub a_content: Vec<f64>,
    pub a_style: Vec<f64>,
    pub a_tv: Vec<f64>,
    pub total: f64,
}

impl LossBreakdown {
    /// Anchor style losses pooled into one scalar (0 without anchors).
    pub fn a_style_sum(&self) -> f64 {
        self.a_style.iter().sum()
    }

    /// Name of the first non-finite term, if any.
    pub fn nonfinite_term(&self) -> Option<String> {
        let scalars = [
            ("content", self.content),
            ("style", self.style),
            ("tv", self.tv),
            ("u_content", self.u_content),
            ("u_style", self.u_style),
            ("u_tv", self.u_tv),
            ("reconstruct", self.reconstruct),
            ("total", self.total),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Some(name.to_string());
            }
        }
        for (name, vec) in [
            ("a_content", &self.a_content),
            ("a_style", &self.a_style),
            ("a_tv", &self.a_tv),
        ] {
            if let Some(i) = vec.iter().position(|v| !v.is_finite()) {
                return Some(format!("{name}[{i}]"));
            }
        }
        None
    }
}

/// Mean squared difference between two equal-shape feature maps.
pub fn content_loss(g: &mut Graph, feat_out: NodeId, feat_target: NodeId) -> Result<NodeId> {
    let a = g.shape(feat_out);
    let b = g.shape(feat_target);
    if a != b {
        return Err(Error::Shape(format!(
            "content_loss features differ: {a} vs {b}"
        )));
    }
    let diff = g.sub(feat_out, feat_target)?;
    let sq = g.square(diff);
    Ok(g.mean_all(sq))
}

fn moment_distance(
    g: &mut Graph,
    out_mu: NodeId,
    out_sigma: NodeId,
    tgt_mu: NodeId,
    tgt_sigma: NodeId,
) -> Result<NodeId> {
    let dmu = g.sub(out_mu, tgt_mu)?;
    let dmu_sq = g.square(dmu);
    let mu_term = g.mean_all(dmu_sq);
    let dsigma = g.sub(out_sigma, tgt_sigma)?;
    let dsigma_sq = g.square(dsigma);
    let sigma_term = g.mean_all(dsigma_sq);
    g.add(mu_term, sigma_term)
}

fn check_levels(out: &FeaturePyramid, target: &FeaturePyramid, g: &Graph) -> Result<()> {
    for (i, (o, t)) in out.levels.iter().zip(&target.levels).enumerate() {
        let osh = g.shape(*o);
        let tsh = g.shape(*t);
        if osh.n != tsh.n || osh.c != tsh.c {
            return Err(Error::Shape(format!(
                "style pyramids disagree at level {i}: {osh} vs {tsh}"
            )));
        }
    }
    Ok(())
}

/// Statistic-based style distance: per level the mean over (sample,
/// channel) of squared instance-mean differences plus squared instance-std
/// differences, summed over the four levels.
pub fn style_loss(
    g: &mut Graph,
    out: &FeaturePyramid,
    target: &FeaturePyramid,
    eps: f64,
) -> Result<NodeId> {
    check_levels(out, target, g)?;
    let mut total: Option<NodeId> = None;
    for (o, t) in out.levels.iter().zip(&target.levels) {
        let (mu_o, sigma_o) = g.instance_moments(*o, eps)?;
        let (mu_t, sigma_t) = g.instance_moments(*t, eps)?;
        let term = moment_distance(g, mu_o, sigma_o, mu_t, sigma_t)?;
        total = Some(match total {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    Ok(total.expect("pyramid has four levels"))
}

/// Smoothness penalty on the output image; see [`Graph::tv_loss`].
pub fn tv_loss(g: &mut Graph, img: NodeId) -> Result<NodeId> {
    g.tv_loss(img)
}

/// Mean absolute difference between the zero-style output and the content
/// image.
pub fn reconstruct_loss(g: &mut Graph, i_u: NodeId, i_c: NodeId) -> Result<NodeId> {
    let a = g.shape(i_u);
    let b = g.shape(i_c);
    if a != b {
        return Err(Error::Shape(format!(
            "reconstruct_loss images differ: {a} vs {b}"
        )));
    }
    let diff = g.sub(i_u, i_c)?;
    let mag = g.abs(diff);
    Ok(g.mean_all(mag))
}

/// Anchor style distance at strength α: the target statistics are the
/// per-level blends `α·μ(style) + (1−α)·μ(content)` (and likewise for σ);
/// the loss is the same statistic distance as [`style_loss`]. At α = 1 it
/// reduces to the style loss against the style pyramid, at α = 0 against
/// the content pyramid, exactly.
pub fn anchor_style_loss(
    g: &mut Graph,
    out: &FeaturePyramid,
    style: &FeaturePyramid,
    content: &FeaturePyramid,
    alpha: f64,
    eps: f64,
) -> Result<NodeId> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Contract(format!(
            "anchor alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return style_loss(g, out, style, eps);
    }
    if alpha == 0.0 {
        return style_loss(g, out, content, eps);
    }
    check_levels(out, style, g)?;
    check_levels(out, content, g)?;
    let mut total: Option<NodeId> = None;
    for ((o, s), c) in out.levels.iter().zip(&style.levels).zip(&content.levels) {
        let (mu_o, sigma_o) = g.instance_moments(*o, eps)?;
        let (mu_s, sigma_s) = g.instance_moments(*s, eps)?;
        let (mu_c, sigma_c) = g.instance_moments(*c, eps)?;
        let mu_s_part = g.scale(mu_s, alpha);
        let mu_c_part = g.scale(mu_c, 1.0 - alpha);
        let mu_t = g.add(mu_s_part, mu_c_part)?;
        let sigma_s_part = g.scale(sigma_s, alpha);
        let sigma_c_part = g.scale(sigma_c, 1.0 - alpha);
        let sigma_t = g.add(sigma_s_part, sigma_c_part)?;
        let term = moment_distance(g, mu_o, sigma_o, mu_t, sigma_t)?;
        total = Some(match total {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    Ok(total.expect("pyramid has four levels"))
}

/// Loss nodes of the biased (full-style) branch.
#[derive(Clone, Copy, Debug)]
pub struct BiasedTerms {
    pub content: NodeId,
    pub style: NodeId,
    pub tv: NodeId,
}

/// Loss nodes of the unbiased (zero-style) branch.
#[derive(Clone, Copy, Debug)]
pub struct UnbiasedTerms {
    pub content: NodeId,
    pub style: NodeId,
    pub tv: NodeId,
    pub reconstruct: NodeId,
}

/// Loss nodes of one anchored branch.
#[derive(Clone, Copy, Debug)]
pub struct AnchorTerms {
    pub alpha: f64,
    pub content: NodeId,
    pub style: NodeId,
    pub tv: NodeId,
}

/// Assemble the weighted total over all enabled branches and read back the
/// per-term breakdown. Branches whose mode is disabled contribute exactly
/// zero; a branch whose mode is enabled but whose terms are missing is a
/// usage error.
pub fn total_loss(
    g: &mut Graph,
    modes: Modes,
    weights: &LossWeights,
    biased: Option<&BiasedTerms>,
    unbiased: Option<&UnbiasedTerms>,
    anchors: &[AnchorTerms],
) -> Result<(NodeId, LossBreakdown)> {
    modes.validate()?;
    weights.validate()?;
    let mut breakdown = LossBreakdown::default();
    let mut weighted: Vec<(NodeId, f64)> = Vec::new();

    if modes.biased {
        let terms = biased.ok_or_else(|| {
            Error::Usage("biased mode enabled but biased terms missing".to_string())
        })?;
        breakdown.content = g.item(terms.content)?;
        breakdown.style = g.item(terms.style)?;
        breakdown.tv = g.item(terms.tv)?;
        weighted.push((terms.content, weights.w_c));
        weighted.push((terms.style, weights.w_s));
        weighted.push((terms.tv, weights.w_t));
    }
    if modes.unbiased {
        let terms = unbiased.ok_or_else(|| {
            Error::Usage("unbiased mode enabled but unbiased terms missing".to_string())
        })?;
        breakdown.u_content = g.item(terms.content)?;
        breakdown.u_style = g.item(terms.style)?;
        breakdown.u_tv = g.item(terms.tv)?;
        breakdown.reconstruct = g.item(terms.reconstruct)?;
        weighted.push((terms.content, weights.w_c));
        weighted.push((terms.style, weights.w_s));
        weighted.push((terms.tv, weights.w_t));
        weighted.push((terms.reconstruct, weights.w_r));
    }
    if modes.anchored {
        for terms in anchors {
            breakdown.a_content.push(g.item(terms.content)?);
            breakdown.a_style.push(g.item(terms.style)?);
            breakdown.a_tv.push(g.item(terms.tv)?);
            weighted.push((terms.content, weights.w_c));
            weighted.push((terms.style, weights.w_s));
            weighted.push((terms.tv, weights.w_t));
        }
    }

    let mut total: Option<NodeId> = None;
    for (node, w) in weighted {
        let scaled = g.scale(node, w);
        total = Some(match total {
            Some(acc) => g.add(acc, scaled)?,
            None => scaled,
        });
    }
    let total = total.unwrap_or_else(|| g.scalar(0.0));
    breakdown.total = g.item(total)?;
    Ok((total, breakdown))
}
