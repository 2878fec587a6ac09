use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::Result;
use crate::io::quantize;
use crate::radar::{RadarCube, RadarFrame, SPEED_OF_LIGHT};

use super::SceneSpec;

const RADAR_NOISE_STREAM: u64 = 2 << 32;

struct PointReturn {
    amplitude: f64,
    range: f64,
    sin_bearing: f64,
    radial_velocity: f64,
}

fn returns_at(spec: &SceneSpec, m: usize) -> Vec<PointReturn> {
    let dt = spec.radar.frame_interval;
    let mut out: Vec<PointReturn> = spec
        .targets
        .iter()
        .map(|t| {
            let [x, z] = t.position(m, spec.frames);
            let range = x.hypot(z);
            PointReturn {
                amplitude: t.amplitude,
                range,
                sin_bearing: x / range,
                radial_velocity: t.radial_velocity(m, spec.frames, dt),
            }
        })
        .collect();
    out.extend(spec.clutter.iter().map(|c| {
        let range = c.x.hypot(c.z);
        PointReturn { amplitude: c.amplitude, range, sin_bearing: c.x / range, radial_velocity: 0.0 }
    }));
    out
}

/// Dechirped IF samples of one frame: for every return,
/// `A·exp(j2π[(2·S·R/c)·t_s + 2·f_c·R/c]) · exp(−jπ·n·sinθ) · exp(j2π·f_D·k·T)`
/// with slope `S`, fast time `t_s = s·T/N_s`, antenna `n`, chirp `k` and
/// Doppler `f_D = 2·v_r·f_c/c`.
fn render_frame(spec: &SceneSpec, seed: u64, m: usize) -> Result<RadarFrame> {
    let cfg = &spec.radar;
    let (ns, na, nc) = (cfg.samples_per_chirp, cfg.antennas, cfg.chirps_per_frame);
    let mut frame = RadarFrame::zeros(ns, na, nc);
    let sample_time = cfg.chirp_duration / ns as f64;
    for ret in returns_at(spec, m) {
        let beat = 2.0 * cfg.chirp_slope * ret.range / SPEED_OF_LIGHT;
        let carrier = 2.0 * cfg.start_frequency * ret.range / SPEED_OF_LIGHT;
        let doppler = 2.0 * ret.radial_velocity * cfg.start_frequency / SPEED_OF_LIGHT;
        for s in 0..ns {
            let fast = 2.0 * PI * (beat * s as f64 * sample_time + carrier);
            for a in 0..na {
                let spatial = -PI * a as f64 * ret.sin_bearing;
                for c in 0..nc {
                    let slow = 2.0 * PI * doppler * c as f64 * cfg.chirp_duration;
                    let v = frame.get(s, a, c) + Complex64::from_polar(ret.amplitude, fast + spatial + slow);
                    frame.set(s, a, c, v);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RADAR_NOISE_STREAM + m as u64);
    let std = spec.radar_noise_std / std::f64::consts::SQRT_2;
    let noise = Normal::new(0.0, std.max(f64::MIN_POSITIVE)).expect("positive std");
    for v in frame.as_mut_slice() {
        if spec.radar_noise_std > 0.0 {
            *v += Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
        }
        *v = Complex64::new(quantize(v.re), quantize(v.im));
    }
    Ok(frame)
}

/// Raw radar cube for every frame of the scene (stop-and-hop: positions are
/// frozen within a frame). Frames render in parallel, one noise stream each.
pub fn render_radar(spec: &SceneSpec, seed: u64) -> Result<RadarCube> {
    spec.validate()?;
    let frames = (0..spec.frames).into_par_iter().map(|m| render_frame(spec, seed, m)).collect::<Result<Vec<_>>>()?;
    RadarCube::new(frames)
}
