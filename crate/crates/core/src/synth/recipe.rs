use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{MoCapStream, RadarSignal};
use crate::error::{Error, Result};
use crate::io::{save_mocap, save_radar, SyncMark};
use crate::synth::{simulate, GaitParams, ScattererScene, Trajectory, SPEED_OF_LIGHT};
use crate::tensor::RngState;

/// Builtin scene families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Stationary,
    ConstantVelocity,
    Pendulum,
    Gait,
}

/// Single-marker parameters shared by the non-gait families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointParams {
    pub radar_position: [f64; 3],
    /// Start position (pivot for the pendulum).
    pub position: [f64; 3],
    /// Used by `constant_velocity`.
    pub velocity: [f64; 3],
    pub length: f64,
    pub amplitude_rad: f64,
    pub freq_hz: f64,
}

impl Default for PointParams {
    fn default() -> Self {
        Self {
            radar_position: [0.0, 0.0, 1.0],
            position: [5.0, 0.0, 1.0],
            velocity: [-1.0, 0.0, 0.0],
            length: 0.8,
            amplitude_rad: 0.4,
            freq_hz: 1.0,
        }
    }
}

/// A dataset description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Recipe {
    pub scene: SceneKind,
    pub duration_s: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub n_trials: usize,
    pub mocap_rate_hz: f64,
    pub radar_rate_hz: f64,
    pub carrier_hz: f64,
    /// Start of each device's clock relative to the sync pulse.
    pub mocap_clock_offset_s: f64,
    pub radar_clock_offset_s: f64,
    /// Relative per-trial spread of speed and stride rate, uniform in
    /// `[-jitter, jitter]`.
    pub jitter: f64,
    pub point: PointParams,
    pub gait: GaitParams,
}

impl Default for Recipe {
    fn default() -> Self {
        Self {
            scene: SceneKind::Gait,
            duration_s: 8.0,
            noise_sigma: 0.01,
            seed: 0,
            n_trials: 4,
            mocap_rate_hz: 250.0,
            radar_rate_hz: 256.0,
            carrier_hz: 5.8e9,
            mocap_clock_offset_s: 0.0,
            radar_clock_offset_s: 2.5,
            jitter: 0.05,
            point: PointParams::default(),
            gait: GaitParams::default(),
        }
    }
}

/// One simulated trial, on the devices' own clocks.
#[derive(Clone, Debug)]
pub struct Trial {
    pub mocap: MoCapStream,
    pub radar: RadarSignal,
    pub entry: TrialEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub index: usize,
    pub seed: u64,
    pub mocap_file: String,
    pub radar_file: String,
    pub sync: SyncMark,
    /// Realised walking or marker speed in m/s.
    pub speed_mps: f64,
    /// Realised stride rate (gait) or swing rate (pendulum); 0 otherwise.
    pub rate_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub recipe: Recipe,
    pub n_trials: usize,
    pub seed: u64,
    pub trials: Vec<TrialEntry>,
}

impl Recipe {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let r: Recipe = toml::from_str(text).map_err(|e| Error::Config(format!("recipe: {e}")))?;
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::Config(format!("duration_s must be positive, got {}", self.duration_s)));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config(format!("carrier_hz must be positive, got {}", self.carrier_hz)));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config(format!("jitter must be in [0, 1), got {}", self.jitter)));
        }
        if !(self.mocap_clock_offset_s.is_finite() && self.radar_clock_offset_s.is_finite()) {
            return Err(Error::Config("clock offsets must be finite".into()));
        }
        Ok(())
    }

    /// Scene for one trial plus its realised speed and rate.
    fn scene(&self, rng: &mut RngState) -> Result<(ScattererScene, f64, f64)> {
        let mut spread = || 1.0 + self.jitter * rng.uniform(-1.0, 1.0);
        let p = &self.point;
        let (mut scene, speed, rate) = match self.scene {
            SceneKind::Stationary => (
                ScattererScene::new(p.radar_position)
                    .with("m0", Trajectory::Stationary { position: p.position }),
                0.0,
                0.0,
            ),
            SceneKind::ConstantVelocity => {
                let k = spread();
                let velocity = p.velocity.map(|v| v * k);
                let speed = velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
                let traj = Trajectory::ConstantVelocity {
                    start: p.position,
                    velocity,
                };
                (ScattererScene::new(p.radar_position).with("m0", traj), speed, 0.0)
            }
            SceneKind::Pendulum => {
                let freq = p.freq_hz * spread();
                let traj = Trajectory::Pendulum {
                    pivot: p.position,
                    pivot_velocity: [0.0; 3],
                    length: p.length,
                    amplitude_rad: p.amplitude_rad,
                    freq_hz: freq,
                    phase_rad: 0.0,
                    swing: [1.0, 0.0, 0.0],
                    down: [0.0, 0.0, -1.0],
                };
                let speed = 2.0 * std::f64::consts::PI * freq * p.amplitude_rad * p.length;
                (ScattererScene::new(p.radar_position).with("m0", traj), speed, freq)
            }
            SceneKind::Gait => {
                let mut g = self.gait.clone();
                g.speed_mps *= spread();
                g.stride_rate_hz *= spread();
                let (speed, rate) = (g.speed_mps, g.stride_rate_hz);
                (ScattererScene::gait(&g)?, speed, rate)
            }
        };
        scene.wavelength = SPEED_OF_LIGHT / self.carrier_hz;
        scene.noise_sigma = self.noise_sigma;
        Ok((scene, speed, rate))
    }

    /// Simulates trial `index` of a dataset seeded with `seed`. Each device
    /// clock is shifted by its configured offset; the returned sync mark
    /// records where true time zero falls on each clock.
    pub fn simulate_trial(&self, index: usize, seed: u64) -> Result<Trial> {
        self.validate()?;
        let trial_seed = RngState::new(seed).derive(&[index as u64]).seed();
        let mut rng = RngState::new(trial_seed);
        let (scene, speed, rate) = self.scene(&mut rng)?;
        let noise_seed = rng.next_u64();
        let (mut mocap, mut radar) = simulate(
            &scene,
            self.duration_s,
            self.mocap_rate_hz,
            self.radar_rate_hz,
            noise_seed,
        )?;
        for t in &mut mocap.t {
            *t += self.mocap_clock_offset_s;
        }
        for t in &mut radar.t {
            *t += self.radar_clock_offset_s;
        }
        Ok(Trial {
            mocap,
            radar,
            entry: TrialEntry {
                index,
                seed: trial_seed,
                mocap_file: format!("trial_{index:03}.mocap.csv"),
                radar_file: format!("trial_{index:03}.radar.csv"),
                sync: SyncMark {
                    mocap_epoch_s: self.mocap_clock_offset_s,
                    radar_epoch_s: self.radar_clock_offset_s,
                },
                speed_mps: speed,
                rate_hz: rate,
            },
        })
    }
}

/// Writes `n_trials` simulated recordings plus `manifest.json` into `dir`.
pub fn make_dataset(
    recipe: &Recipe,
    n_trials: usize,
    seed: u64,
    dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut trials = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let trial = recipe.simulate_trial(i, seed)?;
        save_mocap(&trial.mocap, dir.join(&trial.entry.mocap_file))?;
        save_radar(&trial.radar, dir.join(&trial.entry.radar_file))?;
        log::info!("wrote trial {i} ({} radar samples)", trial.radar.len());
        trials.push(trial.entry);
    }
    let manifest = Manifest {
        recipe: recipe.clone(),
        n_trials,
        seed,
        trials,
    };
    let path: PathBuf = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
