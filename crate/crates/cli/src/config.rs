//! Human-readable key-value config file for training runs.
//!
//! One `key = value` per line, `#` comments. Unknown keys are errors.
//! Network keys: channels, num_resblocks, scale, bank_factors,
//! bank_angles_deg, aspect, roi_half_width, kernel_size, model_seed.
//! Training keys: batch_size, lr, epochs, patches_per_image, seed,
//! checkpoint_every, augment, patch_size.

use lrsim_core::net::NetConfig;
use lrsim_core::train::TrainConfig;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
    /// HR patch side; 0 trains on the pairs as stored.
    pub patch_size: usize,
    pub model_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            net: NetConfig::desk(4),
            train: TrainConfig::default(),
            patch_size: 0,
            model_seed: 0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::format(format!("config key {key}: bad value {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_value(key, v))
        .collect::<Result<Vec<f64>>>()
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::format(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "channels" => cfg.net.channels = parse_value(key, value)?,
            "num_resblocks" => cfg.net.num_resblocks = parse_value(key, value)?,
            "scale" => cfg.net.scale = parse_value(key, value)?,
            "bank_factors" => cfg.net.bank.factors = parse_list(key, value)?,
            "bank_angles_deg" => {
                cfg.net.bank.angles = parse_list(key, value)?
                    .into_iter()
                    .map(|d| d.to_radians())
                    .collect()
            }
            "aspect" => cfg.net.bank.aspect = parse_value(key, value)?,
            "roi_half_width" => cfg.net.bank.roi_half_width = parse_value(key, value)?,
            "kernel_size" => cfg.net.bank.kernel_size = parse_value(key, value)?,
            "model_seed" => cfg.model_seed = parse_value(key, value)?,
            "batch_size" => cfg.train.batch_size = parse_value(key, value)?,
            "lr" => cfg.train.lr = parse_value(key, value)?,
            "epochs" => cfg.train.epochs = parse_value(key, value)?,
            "patches_per_image" => cfg.train.patches_per_image = parse_value(key, value)?,
            "seed" => cfg.train.seed = parse_value(key, value)?,
            "checkpoint_every" => cfg.train.checkpoint_every = parse_value(key, value)?,
            "augment" => cfg.train.augment = parse_value(key, value)?,
            "patch_size" => cfg.patch_size = parse_value(key, value)?,
            other => {
                return Err(CliError::format(format!(
                    "config line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(cfg)
}

pub fn load_run_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_run_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = parse_run_config(
            "# comment\nbatch_size = 4\nlr=0.001\nscale = 2 # trailing\nbank_factors = 0.5, 0.6\naugment = false\n",
        )
        .unwrap();
        assert_eq!(cfg.train.batch_size, 4);
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.net.scale, 2);
        assert_eq!(cfg.net.bank.factors, vec![0.5, 0.6]);
        assert!(!cfg.train.augment);
        // Untouched defaults.
        assert_eq!(cfg.train.epochs, 50);
        assert_eq!(cfg.net.channels, 16);
    }

    #[test]
    fn angles_in_degrees() {
        let cfg = parse_run_config("bank_angles_deg = 0, 45, -45, 90\n").unwrap();
        assert!((cfg.net.bank.angles[1] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((cfg.net.bank.angles[2] + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(parse_run_config("typo_key = 3\n"), Err(CliError::Format(_))));
        assert!(matches!(parse_run_config("lr = fast\n"), Err(CliError::Format(_))));
        assert!(matches!(parse_run_config("just a line\n"), Err(CliError::Format(_))));
    }
}
