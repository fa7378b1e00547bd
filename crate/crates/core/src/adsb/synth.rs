use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{hour_of, AdsbRecord, Trajectory};
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};

/// Per-feature observation noise (standard deviations).
#[derive(Clone, Debug, PartialEq)]
pub struct SynthNoise {
    pub position_deg: f64,
    pub altitude_ft: f64,
    pub velocity_kt: f64,
    pub heading_deg: f64,
    pub vertical_rate_fpm: f64,
}

impl SynthNoise {
    pub fn none() -> Self {
        SynthNoise {
            position_deg: 0.0,
            altitude_ft: 0.0,
            velocity_kt: 0.0,
            heading_deg: 0.0,
            vertical_rate_fpm: 0.0,
        }
    }
}

impl Default for SynthNoise {
    fn default() -> Self {
        SynthNoise {
            position_deg: 2e-4,
            altitude_ft: 15.0,
            velocity_kt: 1.0,
            heading_deg: 0.3,
            vertical_rate_fpm: 30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub trajectories: usize,
    pub duration_s: u32,
    pub period_s: u32,
    pub cruise_speed_kt: f64,
    /// Peak climb or descent rate of the altitude-change arc.
    pub climb_rate_fpm: f64,
    /// Largest absolute turn rate reached by the heading oscillation.
    pub max_turn_rate_deg_s: f64,
    pub noise: SynthNoise,
    /// Probability that an interior sample is deleted.
    pub gap_probability: f64,
    /// Probability that a sample is emitted twice with the same timestamp.
    pub duplicate_probability: f64,
    /// Unix time of the first trajectory's first sample.
    pub start_time: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            trajectories: 200,
            duration_s: 1800,
            period_s: 5,
            cruise_speed_kt: 280.0,
            climb_rate_fpm: 1800.0,
            max_turn_rate_deg_s: 0.6,
            noise: SynthNoise::default(),
            gap_probability: 0.1,
            duplicate_probability: 0.02,
            start_time: 1_478_872_800,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.trajectories == 0 || self.duration_s == 0 || self.period_s == 0 {
            return fail("trajectory count, duration and period must be positive");
        }
        if self.duration_s < self.period_s {
            return fail("duration shorter than one sampling period");
        }
        if !(self.cruise_speed_kt > 0.0)
            || !(self.climb_rate_fpm >= 0.0)
            || !(self.max_turn_rate_deg_s >= 0.0)
        {
            return fail("speed must be positive, climb and turn rates non-negative");
        }
        let n = &self.noise;
        let stds = [
            n.position_deg,
            n.altitude_ft,
            n.velocity_kt,
            n.heading_deg,
            n.vertical_rate_fpm,
        ];
        if stds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return fail("noise standard deviations must be finite and non-negative");
        }
        if !(0.0..=0.5).contains(&self.gap_probability) {
            return fail("gap probability outside [0, 0.5]");
        }
        if !(0.0..=0.5).contains(&self.duplicate_probability) {
            return fail("duplicate probability outside [0, 0.5]");
        }
        if self.trajectories > 0x5f_ffff {
            return fail("too many trajectories for distinct icao24 addresses");
        }
        Ok(())
    }
}

/// Kinematic state of one synthetic flight.
struct Flight {
    lat: f64,
    lon: f64,
    heading: f64,
    speed: f64,
    speed_swing: f64,
    speed_period: f64,
    turn_amp: f64,
    turn_period: f64,
    turn_phase: f64,
    alt_start: f64,
    alt_delta: f64,
    arc_start: f64,
    arc_len: f64,
}

impl Flight {
    fn random<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Self {
        let duration = cfg.duration_s as f64;
        let climb = rng.random_range(0..3); // 0 climb, 1 descent, 2 level
        let arc_len = rng.random_range(0.3..0.7) * duration;
        // Smooth arc altitude change with peak rate climb_rate_fpm.
        let peak_delta = cfg.climb_rate_fpm * (arc_len / 60.0) * 2.0 / std::f64::consts::PI;
        let (alt_start, alt_delta) = match climb {
            0 => (rng.random_range(3_000.0..12_000.0), peak_delta),
            1 => (rng.random_range(20_000.0..36_000.0), -peak_delta),
            _ => (rng.random_range(8_000.0..30_000.0), 0.0),
        };
        Flight {
            lat: 33.6407 + rng.random_range(-1.0..1.0),
            lon: -84.4277 + rng.random_range(-1.0..1.0),
            heading: rng.random_range(0.0..360.0),
            speed: cfg.cruise_speed_kt * rng.random_range(0.8..1.0),
            speed_swing: cfg.cruise_speed_kt * rng.random_range(0.0..0.08),
            speed_period: rng.random_range(0.5..1.5) * duration,
            turn_amp: cfg.max_turn_rate_deg_s * rng.random_range(0.2..1.0),
            turn_period: rng.random_range(0.4..1.2) * duration,
            turn_phase: rng.random_range(0.0..std::f64::consts::TAU),
            alt_start,
            alt_delta,
            arc_start: rng.random_range(0.0..(duration - arc_len)),
            arc_len,
        }
    }

    fn speed_at(&self, t: f64) -> f64 {
        self.speed + self.speed_swing * (std::f64::consts::TAU * t / self.speed_period).sin()
    }

    fn turn_rate_at(&self, t: f64) -> f64 {
        self.turn_amp * (std::f64::consts::TAU * t / self.turn_period + self.turn_phase).sin()
    }

    /// Altitude (ft) and vertical rate (ft/min): a raised-cosine arc.
    fn altitude_at(&self, t: f64) -> (f64, f64) {
        let s = ((t - self.arc_start) / self.arc_len).clamp(0.0, 1.0);
        let alt = self.alt_start + self.alt_delta * 0.5 * (1.0 - (std::f64::consts::PI * s).cos());
        let rate = if s > 0.0 && s < 1.0 {
            self.alt_delta * 0.5 * std::f64::consts::PI * (std::f64::consts::PI * s).sin()
                / self.arc_len
                * 60.0
        } else {
            0.0
        };
        (alt, rate)
    }

    /// Advances position and heading by `dt` seconds starting at time `t`.
    fn advance(&mut self, t: f64, dt: f64) {
        let mid = t + 0.5 * dt;
        let heading = self.heading + 0.5 * dt * self.turn_rate_at(t);
        let dist_nm = self.speed_at(mid) * dt / 3600.0;
        let h = heading.to_radians();
        self.lat += dist_nm * h.cos() / 60.0;
        self.lon += dist_nm * h.sin() / (60.0 * self.lat.to_radians().cos());
        self.heading += dt * self.turn_rate_at(mid);
    }
}

fn noisy<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// Smooth turning, climbing or descending flights sampled every
/// `period_s`, with observation noise, deleted samples and repeated
/// samples. Deterministic per seed.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.trajectories);
    let steps = (cfg.duration_s / cfg.period_s) as usize;
    for i in 0..cfg.trajectories {
        let mut rng = rng_for(cfg.seed, stream::SYNTH, i as u64);
        let mut flight = Flight::random(cfg, &mut rng);
        let icao24 = format!("{:06x}", 0xa0_0000 + i);
        let callsign = format!("SKY{i:04}");
        let t0 = cfg.start_time + 60 * i as i64;
        let mut records = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = (k * cfg.period_s as usize) as f64;
            if k > 0 {
                // Integrate in one-second substeps between samples.
                let sub = cfg.period_s as usize;
                for j in 0..sub {
                    flight.advance(t - cfg.period_s as f64 + j as f64, 1.0);
                }
            }
            let interior = k > 0 && k < steps;
            let dropped = rng.random::<f64>() < cfg.gap_probability;
            if interior && dropped {
                continue;
            }
            let (alt, vrate) = flight.altitude_at(t);
            let n = &cfg.noise;
            let timestamp = t0 + (k * cfg.period_s as usize) as i64;
            let record = AdsbRecord {
                timestamp,
                icao24: icao24.clone(),
                callsign: callsign.clone(),
                lat: (flight.lat + noisy(&mut rng, n.position_deg)).clamp(-90.0, 90.0),
                lon: (flight.lon + noisy(&mut rng, n.position_deg)).clamp(-180.0, 180.0),
                altitude: alt + noisy(&mut rng, n.altitude_ft),
                velocity: (flight.speed_at(t) + noisy(&mut rng, n.velocity_kt)).max(0.0),
                heading: (flight.heading + noisy(&mut rng, n.heading_deg)).rem_euclid(360.0)
                    % 360.0,
                vertical_rate: vrate + noisy(&mut rng, n.vertical_rate_fpm),
                hour: hour_of(timestamp),
            };
            let repeat = rng.random::<f64>() < cfg.duplicate_probability;
            if repeat {
                records.push(record.clone());
            }
            records.push(record);
        }
        out.push(Trajectory {
            icao24,
            callsign,
            records,
        });
    }
    Ok(out)
}
