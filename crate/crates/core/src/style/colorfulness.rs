use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{StyleLabel, StyleObservation};

/// Photographs scoring strictly below this are relabeled monochrome.
pub const DEFAULT_MONOCHROME_THRESHOLD: f64 = 10.0;

/// Opponent-color colorfulness of an 8-bit RGB pixel set.
///
/// With `rg = R - G` and `yb = (R + G)/2 - B`, the score is
/// `sqrt(var_rg + var_yb) + 0.3 * sqrt(mean_rg^2 + mean_yb^2)` using
/// population statistics. Only moments are used, so pixel order is irrelevant.
pub fn colorfulness<T: Real>(pixels: &[[u8; 3]]) -> Result<T> {
    if pixels.is_empty() {
        return Err(Error::Invalid("colorfulness of an empty image".into()));
    }
    let half = T::of(0.5);
    // Welford running moments for both opponent channels.
    let (mut mean_rg, mut m2_rg) = (T::zero(), T::zero());
    let (mut mean_yb, mut m2_yb) = (T::zero(), T::zero());
    for (i, &[r, g, b]) in pixels.iter().enumerate() {
        let (r, g, b) = (T::of(r as f64), T::of(g as f64), T::of(b as f64));
        let rg = r - g;
        let yb = half * (r + g) - b;
        let n = T::of_count(i + 1);
        let d_rg = rg - mean_rg;
        mean_rg += d_rg / n;
        m2_rg += d_rg * (rg - mean_rg);
        let d_yb = yb - mean_yb;
        mean_yb += d_yb / n;
        m2_yb += d_yb * (yb - mean_yb);
    }
    let n = T::of_count(pixels.len());
    let var_rg = (m2_rg / n).max(T::zero());
    let var_yb = (m2_yb / n).max(T::zero());
    Ok((var_rg + var_yb).sqrt() + T::of(0.3) * (mean_rg * mean_rg + mean_yb * mean_yb).sqrt())
}

/// Decodes an image file to 8-bit RGB. Alpha is dropped and grayscale is
/// expanded to R = G = B.
pub fn load_rgb(path: &Path) -> Result<Vec<[u8; 3]>> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8().pixels().map(|p| p.0).collect())
}

pub fn colorfulness_of_file(path: &Path) -> Result<f64> {
    colorfulness(&load_rgb(path)?)
}

/// Relabels a photograph whose colorfulness is strictly below `threshold`.
pub fn relabel_monochrome(obs: &StyleObservation, pixels: &[[u8; 3]], threshold: f64) -> Result<StyleObservation> {
    relabel_with(obs, threshold, || colorfulness(pixels))
}

/// Like [`relabel_monochrome`], but only evaluates `score` for photographs.
pub fn relabel_with(
    obs: &StyleObservation,
    threshold: f64,
    score: impl FnOnce() -> Result<f64>,
) -> Result<StyleObservation> {
    let mut out = obs.clone();
    if obs.label == StyleLabel::Photography && score()? < threshold {
        out.label = StyleLabel::Monochrome;
    }
    Ok(out)
}
