//! Flat `key = value` tracker configuration files.
//!
//! Keys are exactly the [`TrackerConfig`] field names. Missing keys take
//! their defaults; unknown or repeated keys are errors.

use std::path::Path;

use convtrack_core::TrackerConfig;

use crate::error::{Error, Result};
use crate::kv;

pub const KEYS: [&str; 14] = [
    "n",
    "w",
    "d",
    "rho",
    "sigma_x",
    "sigma_y",
    "sigma_s",
    "particles",
    "background_samples",
    "seed",
    "variant",
    "kmeans_max_iters",
    "lambda_rule",
    "motion_prior",
];

pub fn parse_config(text: &str) -> Result<TrackerConfig> {
    let mut cfg = TrackerConfig::default();
    for (key, (line, raw)) in kv::parse(text)? {
        let raw = raw.as_str();
        match key.as_str() {
            "n" => cfg.n = kv::value(&key, line, raw)?,
            "w" => cfg.w = kv::value(&key, line, raw)?,
            "d" => cfg.d = kv::value(&key, line, raw)?,
            "rho" => cfg.rho = kv::value(&key, line, raw)?,
            "sigma_x" => cfg.sigma_x = kv::value(&key, line, raw)?,
            "sigma_y" => cfg.sigma_y = kv::value(&key, line, raw)?,
            "sigma_s" => cfg.sigma_s = kv::value(&key, line, raw)?,
            "particles" => cfg.particles = kv::value(&key, line, raw)?,
            "background_samples" => cfg.background_samples = kv::value(&key, line, raw)?,
            "seed" => cfg.seed = kv::value(&key, line, raw)?,
            "variant" => cfg.variant = kv::value(&key, line, raw)?,
            "kmeans_max_iters" => cfg.kmeans_max_iters = kv::value(&key, line, raw)?,
            "lambda_rule" => cfg.lambda_rule = kv::value(&key, line, raw)?,
            "motion_prior" => cfg.motion_prior = kv::value(&key, line, raw)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown config key `{key}`"),
                })
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Every field, one `key = value` per line, in [`KEYS`] order.
pub fn format_config(cfg: &TrackerConfig) -> String {
    let values = [
        cfg.n.to_string(),
        cfg.w.to_string(),
        cfg.d.to_string(),
        cfg.rho.to_string(),
        cfg.sigma_x.to_string(),
        cfg.sigma_y.to_string(),
        cfg.sigma_s.to_string(),
        cfg.particles.to_string(),
        cfg.background_samples.to_string(),
        cfg.seed.to_string(),
        cfg.variant.to_string(),
        cfg.kmeans_max_iters.to_string(),
        cfg.lambda_rule.name().to_string(),
        cfg.motion_prior.to_string(),
    ];
    KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn load_config(path: &Path) -> Result<TrackerConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| e.in_file(path))
}
