use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base speckle noise level; the value is the per-component Gaussian
/// standard deviation relative to a full-scale clean amplitude of 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseLevel {
    S1,
    S2,
    S3,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 3] = [NoiseLevel::S1, NoiseLevel::S2, NoiseLevel::S3];

    pub fn sigma(self) -> f64 {
        match self {
            NoiseLevel::S1 => 0.2,
            NoiseLevel::S2 => 0.5,
            NoiseLevel::S3 => 0.8,
        }
    }
}

/// Fringe density level, realised as random Gaussian bubbles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FringeLevel {
    F1,
    F2,
    F3,
}

/// Bubble statistics for a 1000 x 1000 reference image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeParams {
    pub count: (usize, usize),
    pub sigma: (f64, f64),
    pub max_amplitude: f64,
}

impl FringeLevel {
    pub const ALL: [FringeLevel; 3] = [FringeLevel::F1, FringeLevel::F2, FringeLevel::F3];

    pub fn params(self) -> FringeParams {
        use std::f64::consts::PI;
        match self {
            FringeLevel::F1 => FringeParams {
                count: (3, 6),
                sigma: (40.0, 80.0),
                max_amplitude: 4.0 * PI,
            },
            FringeLevel::F2 => FringeParams {
                count: (6, 12),
                sigma: (20.0, 50.0),
                max_amplitude: 8.0 * PI,
            },
            FringeLevel::F3 => FringeParams {
                count: (12, 24),
                sigma: (10.0, 30.0),
                max_amplitude: 12.0 * PI,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strips {
    S,
    NS,
}

/// Side length of the reference image the fringe statistics are quoted for.
pub const REFERENCE_SIDE: usize = 1000;
pub const MIN_SIZE: usize = 64;

/// One simulation configuration, e.g. `S3-F1-S` at 256 px with seed 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimConfig {
    pub noise: NoiseLevel,
    pub fringe: FringeLevel,
    pub strips: Strips,
    pub size: usize,
    pub seed: u64,
}

/// Steps of the generation procedure; each draws from its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Step {
    Amplitude = 0,
    Bubbles = 1,
    Strips = 2,
    Noise = 3,
}

impl SimConfig {
    pub fn new(noise: NoiseLevel, fringe: FringeLevel, strips: Strips, size: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            noise,
            fringe,
            strips,
            size,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < MIN_SIZE {
            return Err(Error::InvalidArgument(format!(
                "image size {} below minimum {MIN_SIZE}",
                self.size
            )));
        }
        Ok(())
    }

    /// All 18 combinations in label order (noise, fringe, strips).
    pub fn grid(size: usize, seed: u64) -> Vec<SimConfig> {
        let mut out = Vec::with_capacity(18);
        for noise in NoiseLevel::ALL {
            for fringe in FringeLevel::ALL {
                for strips in [Strips::S, Strips::NS] {
                    out.push(SimConfig {
                        noise,
                        fringe,
                        strips,
                        size,
                        seed,
                    });
                }
            }
        }
        out
    }

    pub fn label(&self) -> String {
        ConfigLabel {
            noise: self.noise,
            fringe: self.fringe,
            strips: self.strips,
        }
        .to_string()
    }

    pub fn sigma_v(&self) -> f64 {
        self.noise.sigma()
    }

    fn ordinal(&self) -> u64 {
        let n = self.noise as u64;
        let f = self.fringe as u64;
        let s = self.strips as u64;
        (n * 3 + f) * 2 + s
    }

    /// Counter-based stream keyed by `(seed, config, sample index, step)`.
    pub fn rng(&self, index: usize, step: Step) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let stream = (self.ordinal() << 56) | ((index as u64 & 0x00ff_ffff_ffff_ffff) << 8) | step as u64;
        rng.set_stream(stream);
        rng
    }
}

/// `S#-F#-S` / `S#-F#-NS` configuration label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConfigLabel {
    pub noise: NoiseLevel,
    pub fringe: FringeLevel,
    pub strips: Strips,
}

impl ConfigLabel {
    pub fn config(self, size: usize, seed: u64) -> Result<SimConfig> {
        SimConfig::new(self.noise, self.fringe, self.strips, size, seed)
    }
}

impl fmt::Display for ConfigLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}-{:?}-{:?}", self.noise, self.fringe, self.strips)
    }
}

impl FromStr for ConfigLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad config label {s:?}, expected S#-F#-S or S#-F#-NS"));
        let mut parts = s.trim().split('-');
        let (n, f, st) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(f), Some(st), None) => (n, f, st),
            _ => return Err(bad()),
        };
        let noise = match n {
            "S1" => NoiseLevel::S1,
            "S2" => NoiseLevel::S2,
            "S3" => NoiseLevel::S3,
            _ => return Err(bad()),
        };
        let fringe = match f {
            "F1" => FringeLevel::F1,
            "F2" => FringeLevel::F2,
            "F3" => FringeLevel::F3,
            _ => return Err(bad()),
        };
        let strips = match st {
            "S" => Strips::S,
            "NS" => Strips::NS,
            _ => return Err(bad()),
        };
        Ok(ConfigLabel { noise, fringe, strips })
    }
}

/// Parse a comma separated label list, or `all` for the full grid.
pub fn parse_config_list(list: &str) -> Result<Vec<ConfigLabel>> {
    if list.trim() == "all" {
        return Ok(SimConfig::grid(MIN_SIZE, 0)
            .into_iter()
            .map(|c| ConfigLabel {
                noise: c.noise,
                fringe: c.fringe,
                strips: c.strips,
            })
            .collect());
    }
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}
