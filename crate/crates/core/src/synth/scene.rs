use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{MoCapStream, RadarSignal};
use crate::error::{Error, Result};
use crate::tensor::RngState;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

type Vec3 = [f64; 3];

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scaled(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Parametric marker path, positions in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Stationary {
        position: Vec3,
    },
    ConstantVelocity {
        start: Vec3,
        velocity: Vec3,
    },
    /// Rigid limb of `length` hanging along `down` from a pivot that moves
    /// at `pivot_velocity`, swinging towards `swing` with angle
    /// `amplitude·sin(2πft + phase)`.
    Pendulum {
        pivot: Vec3,
        pivot_velocity: Vec3,
        length: f64,
        amplitude_rad: f64,
        freq_hz: f64,
        phase_rad: f64,
        swing: Vec3,
        down: Vec3,
    },
    /// Constant velocity plus a sinusoidal offset along `axis`.
    Bobbing {
        start: Vec3,
        velocity: Vec3,
        amplitude: f64,
        freq_hz: f64,
        phase_rad: f64,
        axis: Vec3,
    },
}

impl Trajectory {
    pub fn position(&self, t: f64) -> Vec3 {
        match *self {
            Trajectory::Stationary { position } => position,
            Trajectory::ConstantVelocity { start, velocity } => add(start, scaled(velocity, t)),
            Trajectory::Pendulum {
                pivot,
                pivot_velocity,
                length,
                amplitude_rad,
                freq_hz,
                phase_rad,
                swing,
                down,
            } => {
                let theta = amplitude_rad * (2.0 * PI * freq_hz * t + phase_rad).sin();
                let p = add(pivot, scaled(pivot_velocity, t));
                let arm = add(scaled(down, length * theta.cos()), scaled(swing, length * theta.sin()));
                add(p, arm)
            }
            Trajectory::Bobbing {
                start,
                velocity,
                amplitude,
                freq_hz,
                phase_rad,
                axis,
            } => {
                let off = amplitude * (2.0 * PI * freq_hz * t + phase_rad).sin();
                add(add(start, scaled(velocity, t)), scaled(axis, off))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub name: String,
    pub trajectory: Trajectory,
    /// Reflection amplitude `a_m ≥ 0`.
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScattererScene {
    pub scatterers: Vec<Scatterer>,
    pub radar_position: Vec3,
    /// Carrier wavelength `λ` in meters.
    pub wavelength: f64,
    /// Standard deviation of the complex noise, `E|n|² = σ²`.
    pub noise_sigma: f64,
}

impl ScattererScene {
    /// Empty scene with a 5.8 GHz radar at `radar_position`.
    pub fn new(radar_position: Vec3) -> Self {
        Self {
            scatterers: Vec::new(),
            radar_position,
            wavelength: SPEED_OF_LIGHT / 5.8e9,
            noise_sigma: 0.0,
        }
    }

    pub fn with(mut self, name: &str, trajectory: Trajectory) -> Self {
        self.scatterers.push(Scatterer {
            name: name.to_string(),
            trajectory,
            amplitude: 1.0,
        });
        self
    }

    pub fn validate(&self, duration_s: f64) -> Result<()> {
        if self.scatterers.is_empty() {
            return Err(Error::Config("scene has no scatterers".into()));
        }
        if !(self.wavelength > 0.0) || !self.wavelength.is_finite() {
            return Err(Error::Config(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        for s in &self.scatterers {
            if !(s.amplitude >= 0.0) || !s.amplitude.is_finite() {
                return Err(Error::Config(format!("scatterer '{}' has amplitude {}", s.name, s.amplitude)));
            }
            for t in [0.0, duration_s * 0.5, duration_s] {
                if s.trajectory.position(t).iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("scatterer '{}' leaves finite space", s.name)));
                }
            }
        }
        Ok(())
    }

    /// Walking figure: a bobbing torso plus swinging arms and legs.
    ///
    /// Markers are split between torso and four limbs so that left and right
    /// sides carry the same number of markers; the micro-Doppler pattern then
    /// repeats once per footfall (`stride_rate_hz`), with each limb swinging
    /// at half that rate.
    pub fn gait(p: &GaitParams) -> Result<Self> {
        p.validate()?;
        let heading = p.heading_deg.to_radians();
        let fwd = [heading.cos(), heading.sin(), 0.0];
        let side = [-heading.sin(), heading.cos(), 0.0];
        let up = [0.0, 0.0, 1.0];
        let down = [0.0, 0.0, -1.0];
        let vel = scaled(fwd, p.speed_mps);
        let origin = [p.start[0], p.start[1], 0.0];
        let limb_hz = p.stride_rate_hz / 2.0;

        let mut limb_markers = p.markers - (p.markers * 3).div_ceil(10).max(1);
        limb_markers -= limb_markers % 2;
        let torso = p.markers - limb_markers;
        let pairs = limb_markers / 2;
        let leg_pairs = pairs.div_ceil(2);
        let arm_pairs = pairs - leg_pairs;

        let mut scene = ScattererScene::new(p.radar_position);
        scene.noise_sigma = 0.0;
        for i in 0..torso {
            let frac = if torso > 1 { i as f64 / (torso - 1) as f64 } else { 0.5 };
            let height = p.hip_height + frac * (p.head_height - p.hip_height);
            let lateral = if i % 2 == 0 { 0.12 } else { -0.12 } * (1.0 - frac);
            let start = add(add(origin, scaled(up, height)), scaled(side, lateral));
            scene = scene.with(
                &format!("torso{i}"),
                Trajectory::Bobbing {
                    start,
                    velocity: vel,
                    amplitude: p.bob_amplitude,
                    freq_hz: p.stride_rate_hz,
                    phase_rad: 0.0,
                    axis: up,
                },
            );
        }
        let limbs = [
            ("leg", leg_pairs, p.hip_height, 0.1, p.leg_length, p.leg_swing_rad, 0.0),
            ("arm", arm_pairs, p.shoulder_height, 0.2, p.arm_length, p.arm_swing_rad, PI),
        ];
        for (kind, count, height, half_width, length, swing_amp, base_phase) in limbs {
            for j in 0..count {
                let frac = 0.25 + 0.75 * (j + 1) as f64 / count as f64;
                for (side_name, sign, side_phase) in [("l", 1.0, 0.0), ("r", -1.0, PI)] {
                    let pivot = add(add(origin, scaled(up, height)), scaled(side, sign * half_width));
                    scene = scene.with(
                        &format!("{kind}{side_name}{j}"),
                        Trajectory::Pendulum {
                            pivot,
                            pivot_velocity: vel,
                            length: length * frac,
                            amplitude_rad: swing_amp,
                            freq_hz: limb_hz,
                            phase_rad: base_phase + side_phase,
                            swing: fwd,
                            down,
                        },
                    );
                }
            }
        }
        Ok(scene)
    }
}

/// Parameters of [`ScattererScene::gait`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitParams {
    pub markers: usize,
    pub speed_mps: f64,
    /// Footfalls per second; the spectrogram pattern repeats at this rate.
    pub stride_rate_hz: f64,
    pub heading_deg: f64,
    /// Starting floor position `(x, y)`.
    pub start: [f64; 2],
    pub radar_position: Vec3,
    pub hip_height: f64,
    pub shoulder_height: f64,
    pub head_height: f64,
    pub leg_length: f64,
    pub arm_length: f64,
    pub leg_swing_rad: f64,
    pub arm_swing_rad: f64,
    pub bob_amplitude: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            markers: 53,
            speed_mps: 1.0,
            stride_rate_hz: 1.8,
            heading_deg: 45.0,
            start: [0.5, 0.5],
            radar_position: [8.0, 8.0, 1.0],
            hip_height: 0.9,
            shoulder_height: 1.4,
            head_height: 1.7,
            leg_length: 0.9,
            arm_length: 0.6,
            leg_swing_rad: 0.35,
            arm_swing_rad: 0.3,
            bob_amplitude: 0.03,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        if self.markers < 1 {
            return Err(Error::Config("gait needs at least one marker".into()));
        }
        if !(self.stride_rate_hz > 0.0) {
            return Err(Error::Config(format!("stride rate must be positive, got {}", self.stride_rate_hz)));
        }
        Ok(())
    }
}

/// Samples `scene` for `duration_s` seconds: marker positions at
/// `mocap_rate` and the radar return at `radar_rate`, both starting at
/// `t = 0` on a shared clock. `seed` drives only the receiver noise.
pub fn simulate(
    scene: &ScattererScene,
    duration_s: f64,
    mocap_rate: f64,
    radar_rate: f64,
    seed: u64,
) -> Result<(MoCapStream, RadarSignal)> {
    if !(mocap_rate > 0.0 && radar_rate > 0.0) {
        return Err(Error::Config("sample rates must be positive".into()));
    }
    if !(duration_s >= 1.0 / radar_rate) {
        return Err(Error::Config(format!(
            "duration {duration_s} s is shorter than one radar sample"
        )));
    }
    scene.validate(duration_s)?;

    let frames = (duration_s * mocap_rate + 1e-9).floor() as usize + 1;
    let t_m: Vec<f64> = (0..frames).map(|i| i as f64 / mocap_rate).collect();
    let mut data = Vec::with_capacity(frames * scene.scatterers.len() * 3);
    for &t in &t_m {
        for s in &scene.scatterers {
            data.extend_from_slice(&s.trajectory.position(t));
        }
    }
    let names = scene.scatterers.iter().map(|s| s.name.clone()).collect();
    let mocap = MoCapStream::new(t_m, names, 3, mocap_rate, data)?;

    let samples = (duration_s * radar_rate + 1e-9).floor() as usize + 1;
    let t_r: Vec<f64> = (0..samples).map(|i| i as f64 / radar_rate).collect();
    let k = 4.0 * PI / scene.wavelength;
    let mut rng = RngState::new(seed);
    let noise_std = scene.noise_sigma / 2f64.sqrt();
    let iq = t_r
        .iter()
        .map(|&t| {
            let mut v: Complex64 = scene
                .scatterers
                .iter()
                .map(|s| {
                    let d = dist(s.trajectory.position(t), scene.radar_position);
                    Complex64::from_polar(s.amplitude, -k * d)
                })
                .sum();
            if noise_std > 0.0 {
                v += Complex64::new(gaussian(&mut rng) * noise_std, gaussian(&mut rng) * noise_std);
            }
            v
        })
        .collect();
    let radar = RadarSignal::new(t_r, iq, radar_rate, SPEED_OF_LIGHT / scene.wavelength)?;
    Ok((mocap, radar))
}

fn gaussian(rng: &mut RngState) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng.inner())
}
