use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Activation;

/// Each horizon step predicts (lead time, lat, lon, altitude).
pub const OUTPUT_DIM: usize = 4;

/// One 2D convolution stage of the CNN branch, written `8:3x3:relu`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CnnStage {
    pub out_channels: usize,
    /// `(height, width)`; the width is clamped to the feature width it meets.
    pub kernel: (usize, usize),
    pub activation: Activation,
}

/// One 3D convolution stage, optionally followed by 2x2x2 max pooling.
/// Written `16:3x3x3:relu:pool` or `...:nopool`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct C3dStage {
    pub out_channels: usize,
    pub kernel: (usize, usize, usize),
    pub activation: Activation,
    pub pool: bool,
}

fn parse_dims(s: &str, n: usize) -> Result<Vec<usize>> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|d| d.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad kernel `{s}`")))?;
    if dims.len() != n || dims.contains(&0) {
        return Err(Error::Config(format!(
            "kernel `{s}` must have {n} positive dims"
        )));
    }
    Ok(dims)
}

fn parse_channels(s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(c) if c > 0 => Ok(c),
        _ => Err(Error::Config(format!("bad channel count `{s}`"))),
    }
}

impl fmt::Display for CnnStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, q) = self.kernel;
        write!(
            f,
            "{}:{p}x{q}:{}",
            self.out_channels,
            self.activation.name()
        )
    }
}

impl FromStr for CnnStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "cnn stage `{s}` is not channels:PxQ:activation"
            )));
        }
        let k = parse_dims(parts[1], 2)?;
        Ok(CnnStage {
            out_channels: parse_channels(parts[0])?,
            kernel: (k[0], k[1]),
            activation: parts[2].parse()?,
        })
    }
}

impl fmt::Display for C3dStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, p, q) = self.kernel;
        let pool = if self.pool { "pool" } else { "nopool" };
        write!(
            f,
            "{}:{r}x{p}x{q}:{}:{pool}",
            self.out_channels,
            self.activation.name()
        )
    }
}

impl FromStr for C3dStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!(
                "c3d stage `{s}` is not channels:RxPxQ:activation:pool|nopool"
            )));
        }
        let k = parse_dims(parts[1], 3)?;
        let pool = match parts[3] {
            "pool" => true,
            "nopool" => false,
            other => {
                return Err(Error::Config(format!(
                    "expected pool or nopool, got `{other}`"
                )))
            }
        };
        Ok(C3dStage {
            out_channels: parse_channels(parts[0])?,
            kernel: (k[0], k[1], k[2]),
            activation: parts[2].parse()?,
            pool,
        })
    }
}

fn join<S: fmt::Display>(stages: &[S]) -> String {
    stages
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn split<S: FromStr<Err = Error>>(s: &str) -> Result<Vec<S>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(str::parse).collect()
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cg3dConfig {
    pub cnn: Vec<CnnStage>,
    pub gru_hidden: usize,
    pub c3d: Vec<C3dStage>,
    /// `(frames, rows per frame, width)`; frames x rows must equal `window`.
    pub c3d_input: (usize, usize, usize),
    pub dropout_rate: f64,
    pub window: usize,
    pub horizon: usize,
}

impl Default for Cg3dConfig {
    fn default() -> Self {
        let relu = Activation::Relu;
        Cg3dConfig {
            cnn: vec![
                CnnStage {
                    out_channels: 8,
                    kernel: (3, 3),
                    activation: relu,
                },
                CnnStage {
                    out_channels: 8,
                    kernel: (3, 3),
                    activation: relu,
                },
            ],
            gru_hidden: 64,
            c3d: vec![
                C3dStage {
                    out_channels: 8,
                    kernel: (3, 3, 3),
                    activation: relu,
                    pool: true,
                },
                C3dStage {
                    out_channels: 16,
                    kernel: (3, 3, 3),
                    activation: relu,
                    pool: true,
                },
            ],
            c3d_input: (10, 10, 10),
            dropout_rate: 0.2,
            window: 100,
            horizon: 5,
        }
    }
}

impl Cg3dConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gru_hidden == 0 {
            return Err(Error::Config("model.gru_hidden must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "model.dropout = {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.window == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "model.window and model.horizon must be positive".into(),
            ));
        }
        let (d, h, w) = self.c3d_input;
        if d == 0 || h == 0 || w == 0 || d * h != self.window {
            return Err(Error::Config(format!(
                "model.c3d_input {d}x{h}x{w}: frames x rows must equal the window length {}",
                self.window
            )));
        }
        Ok(())
    }

    /// Flat `model.*` keys, as written to config files and checkpoints.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let (d, h, w) = self.c3d_input;
        [
            ("model.cnn", join(&self.cnn)),
            ("model.gru_hidden", self.gru_hidden.to_string()),
            ("model.c3d", join(&self.c3d)),
            ("model.c3d_input", format!("{d}x{h}x{w}")),
            ("model.dropout", self.dropout_rate.to_string()),
            ("model.window", self.window.to_string()),
            ("model.horizon", self.horizon.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Sets one `model.*` key. Unknown keys are a configuration error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model.cnn" => self.cnn = split(value)?,
            "model.gru_hidden" => self.gru_hidden = parse_value(key, value)?,
            "model.c3d" => self.c3d = split(value)?,
            "model.c3d_input" => {
                let d = parse_dims(value.trim(), 3)?;
                self.c3d_input = (d[0], d[1], d[2]);
            }
            "model.dropout" => self.dropout_rate = parse_value(key, value)?,
            "model.window" => self.window = parse_value(key, value)?,
            "model.horizon" => self.horizon = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

/// Which branches a model carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cg3d,
    CnnGru,
    C3d,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Cg3d, ModelKind::C3d, ModelKind::CnnGru];

    /// Row label used in comparison reports.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Cg3d => "CG3D",
            ModelKind::CnnGru => "CNN-GRU",
            ModelKind::C3d => "3D CNN",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Cg3d => "cg3d",
            ModelKind::CnnGru => "cnn-gru",
            ModelKind::C3d => "c3d",
        }
    }

    pub fn has_cnn_gru(self) -> bool {
        self != ModelKind::C3d
    }

    pub fn has_c3d(self) -> bool {
        self != ModelKind::CnnGru
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}` (cg3d, cnn-gru, c3d)")))
    }
}
