use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters and input geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Markers `M`.
    pub markers: usize,
    /// Coordinates per marker `D`.
    pub dims: usize,
    /// Frames per window `W`, also the number of output bins.
    pub window: usize,
    pub d_s: usize,
    pub d_t: usize,
    pub d_f: usize,
    pub heads_s: usize,
    pub heads_t: usize,
    pub heads_c: usize,
    pub layers_s: usize,
    pub layers_t: usize,
    pub dropout: f64,
    pub d_out: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            markers: 53,
            dims: 3,
            window: 256,
            d_s: 64,
            d_t: 128,
            d_f: 256,
            heads_s: 2,
            heads_t: 4,
            heads_c: 4,
            layers_s: 2,
            layers_t: 4,
            dropout: 0.3,
            d_out: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("markers", self.markers),
            ("dims", self.dims),
            ("window", self.window),
            ("d_s", self.d_s),
            ("d_t", self.d_t),
            ("d_f", self.d_f),
            ("heads_s", self.heads_s),
            ("heads_t", self.heads_t),
            ("heads_c", self.heads_c),
            ("layers_s", self.layers_s),
            ("layers_t", self.layers_t),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("model {name} must be at least 1")));
            }
        }
        for (width, heads, what) in [
            (self.d_s, self.heads_s, "d_s % heads_s"),
            (self.d_t, self.heads_t, "d_t % heads_t"),
            (self.d_t, self.heads_c, "d_t % heads_c"),
        ] {
            if width % heads != 0 {
                return Err(Error::Config(format!("{what} must be 0, got {width} % {heads}")));
            }
        }
        if self.d_out != 1 {
            return Err(Error::Config(format!("d_out must be 1, got {}", self.d_out)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Which encoder stacks the model contains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Spatial stack only.
    S,
    /// Temporal stack only.
    T,
    /// Both stacks with cross-attention fusion.
    #[default]
    St,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::S, Variant::T, Variant::St];

    /// Lowercase key used on the command line and in file names.
    pub fn key(self) -> &'static str {
        match self {
            Variant::S => "s",
            Variant::T => "t",
            Variant::St => "st",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::S => "S",
            Variant::T => "T",
            Variant::St => "S+T",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(Variant::S),
            "t" => Ok(Variant::T),
            "st" | "s+t" | "s_plus_t" => Ok(Variant::St),
            other => Err(Error::Config(format!("unknown model variant '{other}' (expected s, t or st)"))),
        }
    }
}
