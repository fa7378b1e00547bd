//! Run configuration: every tunable of the pipeline as flat `section.key`
//! entries, read from a `key=value` file and then overridden by flags.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use skytrace::adsb::{SynthConfig, DEFAULT_GAP_THRESHOLD_S};
use skytrace::mc::DEFAULT_MC_SAMPLES;
use skytrace::model::{Cg3dConfig, ModelKind};
use skytrace::preprocess::PreprocessConfig;
use skytrace::train::TrainConfig;
use skytrace::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub gap_threshold_s: i64,
    pub preprocess: PreprocessConfig,
    pub model: Cg3dConfig,
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub mc_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            synth: SynthConfig::default(),
            gap_threshold_s: DEFAULT_GAP_THRESHOLD_S,
            preprocess: PreprocessConfig::default(),
            model: Cg3dConfig::default(),
            kind: ModelKind::Cg3d,
            train: TrainConfig::default(),
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{}`", value.trim())))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.synth;
        let p = &mut self.preprocess;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "synth.trajectories" => s.trajectories = parse(key, value)?,
            "synth.duration_s" => s.duration_s = parse(key, value)?,
            "synth.period_s" => s.period_s = parse(key, value)?,
            "synth.cruise_speed_kt" => s.cruise_speed_kt = parse(key, value)?,
            "synth.climb_rate_fpm" => s.climb_rate_fpm = parse(key, value)?,
            "synth.max_turn_rate_deg_s" => s.max_turn_rate_deg_s = parse(key, value)?,
            "synth.gap_probability" => s.gap_probability = parse(key, value)?,
            "synth.duplicate_probability" => s.duplicate_probability = parse(key, value)?,
            "synth.start_time" => s.start_time = parse(key, value)?,
            "synth.noise.position_deg" => s.noise.position_deg = parse(key, value)?,
            "synth.noise.altitude_ft" => s.noise.altitude_ft = parse(key, value)?,
            "synth.noise.velocity_kt" => s.noise.velocity_kt = parse(key, value)?,
            "synth.noise.heading_deg" => s.noise.heading_deg = parse(key, value)?,
            "synth.noise.vertical_rate_fpm" => s.noise.vertical_rate_fpm = parse(key, value)?,
            "ingest.gap_threshold_s" => self.gap_threshold_s = parse(key, value)?,
            "preprocess.period_s" => p.period_s = parse(key, value)?,
            "preprocess.window" => p.window.input = parse(key, value)?,
            "preprocess.stride" => p.window.stride = parse(key, value)?,
            "preprocess.horizon" => p.window.horizon = parse(key, value)?,
            "preprocess.spatial_variance" => p.spatial_variance = parse(key, value)?,
            "preprocess.temporal_variance" => p.temporal_variance = parse(key, value)?,
            "model.kind" => self.kind = value.trim().parse()?,
            "mc.samples" => self.mc_samples = parse(key, value)?,
            k if k.starts_with("model.") => self.model.set(k, value)?,
            k if k.starts_with("train.") => self.train.set(k, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Propagates the root seed and window geometry, then validates every
    /// section.
    pub fn finish(&mut self) -> Result<()> {
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self.model.window = self.preprocess.window.input;
        self.model.horizon = self.preprocess.window.horizon;
        self.synth.validate()?;
        if self.gap_threshold_s <= 0 {
            return Err(Error::Config(
                "ingest.gap_threshold_s must be positive".into(),
            ));
        }
        self.preprocess.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.mc_samples == 0 {
            return Err(Error::Config("mc.samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_entries_override_defaults() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# comment\n\ntrain.epochs = 12\nmodel.gru_hidden=8\nseed=99\nmodel.kind=c3d\n",
        )
        .unwrap();
        c.finish().unwrap();
        assert_eq!(c.train.epochs, 12);
        assert_eq!(c.model.gru_hidden, 8);
        assert_eq!((c.synth.seed, c.train.seed), (99, 99));
        assert_eq!(c.kind, ModelKind::C3d);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut c = RunConfig::default();
        let e = c.apply_text("seed=1\nbogus.key=3\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(c.apply_text("no equals sign").is_err());
        assert!(c.apply_text("train.epochs=abc").is_err());
    }

    #[test]
    fn finish_validates() {
        let mut c = RunConfig::default();
        c.train.epochs = 0;
        assert_eq!(c.finish().unwrap_err().category(), "config");
        let mut c = RunConfig::default();
        c.preprocess.window.input = 50;
        assert!(c.finish().is_err());
        c.model.c3d_input = (5, 10, 10);
        c.finish().unwrap();
    }
}
