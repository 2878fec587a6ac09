use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{normalize_weights, CameraIntrinsics, RadarConfig, RadarCube, RadarFrame, WeightMap, WeightMode};
use crate::error::{Error, Result};
use crate::numerics::{dft, RealMatrix};

/// Diagonal loading added to every range-bin covariance, relative to its
/// average eigenvalue.
pub const DIAGONAL_LOADING: f64 = 1e-3;

/// DFT along the sample axis for every `(antenna, chirp)` pair.
pub fn range_fft(frame: &RadarFrame) -> RadarFrame {
    let (ns, na, nc) = frame.dims();
    let mut out = RadarFrame::zeros(ns, na, nc);
    let mut column = vec![Complex64::new(0.0, 0.0); ns];
    for a in 0..na {
        for c in 0..nc {
            for (s, v) in column.iter_mut().enumerate() {
                *v = frame.get(s, a, c);
            }
            for (k, v) in dft(&column).into_iter().enumerate() {
                out.set(k, a, c, v);
            }
        }
    }
    out
}

/// Subtract the mean over chirps from every `(range bin, antenna)` slow-time
/// series, removing returns that do not change within the frame. A series
/// whose chirps are all identical cancels to exact zeros rather than to
/// rounding residue.
pub fn suppress_clutter(range_cube: &RadarFrame) -> Result<RadarFrame> {
    let (ns, na, nc) = range_cube.dims();
    if nc < 2 {
        return Err(Error::InvalidArgument(format!("clutter suppression needs at least 2 chirps, got {nc}")));
    }
    let mut out = range_cube.clone();
    let data = out.as_mut_slice();
    for series in data.chunks_exact_mut(nc) {
        if series.iter().all(|v| *v == series[0]) {
            series.fill(Complex64::new(0.0, 0.0));
            continue;
        }
        let mean = series.iter().sum::<Complex64>() / nc as f64;
        for v in series.iter_mut() {
            *v -= mean;
        }
    }
    debug_assert_eq!(data.len(), ns * na * nc);
    Ok(out)
}

/// Bearing of every image column under the pinhole model,
/// `θ_w = atan((w − x_c) / f)` with `w` the 0-based column index.
pub fn bearing_grid(intr: &CameraIntrinsics) -> Vec<f64> {
    (0..intr.width).map(|w| ((w as f64 - intr.center_col) / intr.focal).atan()).collect()
}

/// Half-wavelength ULA response, `a[n] = exp(−jπ n sin θ)`.
pub fn steering_vector(theta: f64, antennas: usize) -> Vec<Complex64> {
    let phase = -PI * theta.sin();
    (0..antennas).map(|n| Complex64::from_polar(1.0, phase * n as f64)).collect()
}

/// MVDR power `P(k, θ_w) = 1 / (aᴴ Σ_k⁻¹ a)` for every range bin and bearing.
///
/// `Σ_k` is the loaded sample covariance of the clutter-free slow-time
/// snapshots of range bin `k`. A bin with zero energy yields a zero row.
pub fn mvdr_power(clutter_free: &RadarFrame, grid: &[f64]) -> RealMatrix {
    let (ns, na, nc) = clutter_free.dims();
    let steering: Vec<Vec<Complex64>> = grid.iter().map(|&t| steering_vector(t, na)).collect();
    let mut out = RealMatrix::zeros(ns, grid.len());
    let mut cov = vec![Complex64::new(0.0, 0.0); na * na];
    let mut y = vec![Complex64::new(0.0, 0.0); na];

    for k in 0..ns {
        for a in 0..na {
            for b in 0..=a {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..nc {
                    acc += clutter_free.get(k, a, c) * clutter_free.get(k, b, c).conj();
                }
                acc /= nc as f64;
                cov[a * na + b] = acc;
                cov[b * na + a] = acc.conj();
            }
        }
        let trace: f64 = (0..na).map(|a| cov[a * na + a].re).sum();
        if !(trace > 0.0) || !trace.is_finite() {
            continue;
        }
        let load = DIAGONAL_LOADING * trace / na as f64;
        for a in 0..na {
            cov[a * na + a] += load;
        }
        let Some(chol) = cholesky(&cov, na) else {
            continue;
        };
        let row = &mut out.as_mut_slice()[k * grid.len()..(k + 1) * grid.len()];
        for (p, a_vec) in row.iter_mut().zip(&steering) {
            // aᴴ Σ⁻¹ a = ‖C⁻¹ a‖² with Σ = C Cᴴ.
            for i in 0..na {
                let mut acc = a_vec[i];
                for j in 0..i {
                    acc -= chol[i * na + j] * y[j];
                }
                y[i] = acc / chol[i * na + i];
            }
            let quad: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            *p = 1.0 / quad;
        }
    }
    out
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
fn cholesky(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k].conj();
            }
            if i == j {
                if !(sum.re > 0.0) {
                    return None;
                }
                l[i * n + i] = Complex64::new(sum.re.sqrt(), 0.0);
            } else {
                l[i * n + j] = sum / l[j * n + j].re;
            }
        }
    }
    Some(l)
}

/// `P(θ_w) = Σ_k log P(k, θ_w)`, skipping zero-power bins.
pub fn collapse_range(power: &RealMatrix) -> Vec<f64> {
    let (ns, w) = power.shape();
    let mut out = vec![0.0; w];
    for k in 0..ns {
        let row = power.row(k);
        if row.iter().all(|&p| p == 0.0) {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(row) {
            if p > 0.0 {
                *o += p.ln();
            }
        }
    }
    out
}

/// Range-azimuth MVDR power of one frame after clutter removal, `Ns x W`.
pub fn range_azimuth_map(frame: &RadarFrame, cfg: &RadarConfig, intr: &CameraIntrinsics) -> Result<RealMatrix> {
    frame.check_config(cfg)?;
    let clutter_free = suppress_clutter(&range_fft(frame))?;
    Ok(mvdr_power(&clutter_free, &bearing_grid(intr)))
}

/// Un-normalized log-power row of one frame.
pub fn raw_power_row(frame: &RadarFrame, cfg: &RadarConfig, intr: &CameraIntrinsics) -> Result<Vec<f64>> {
    Ok(collapse_range(&range_azimuth_map(frame, cfg, intr)?))
}

/// Raw log-power rows for every frame, `M x W`. Frames run in parallel.
pub fn raw_power_sequence(cube: &RadarCube, cfg: &RadarConfig, intr: &CameraIntrinsics) -> Result<RealMatrix> {
    cfg.validate()?;
    intr.validate()?;
    let rows: Vec<Vec<f64>> = cube.frames().par_iter().map(|f| raw_power_row(f, cfg, intr)).collect::<Result<_>>()?;
    let data = rows.into_iter().flatten().collect();
    RealMatrix::new(cube.len(), intr.width, data)
}

/// The full radar-to-weight map: per-frame pipeline, then sequence-wide
/// normalization.
pub fn process_sequence(
    cube: &RadarCube,
    cfg: &RadarConfig,
    intr: &CameraIntrinsics,
    mode: WeightMode,
) -> Result<WeightMap> {
    let raw = raw_power_sequence(cube, cfg, intr)?;
    Ok(normalize_weights(&raw, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn tone_frame(ns: usize, na: usize, nc: usize, bin: usize) -> RadarFrame {
        let mut f = RadarFrame::zeros(ns, na, nc);
        for s in 0..ns {
            let v = Complex64::from_polar(1.0, 2.0 * PI * (bin * s) as f64 / ns as f64);
            for a in 0..na {
                for c in 0..nc {
                    f.set(s, a, c, v);
                }
            }
        }
        f
    }

    #[test]
    fn range_fft_localizes_a_tone() {
        let out = range_fft(&tone_frame(16, 2, 3, 5));
        for k in 0..16 {
            let mag = out.get(k, 1, 2).norm();
            if k == 5 {
                assert!((mag - 16.0).abs() < 1e-12);
            } else {
                assert!(mag < 1e-12);
            }
        }
        let zero = RadarFrame::zeros(8, 2, 2);
        assert_eq!(range_fft(&zero), zero);
    }

    #[test]
    fn chirp_constant_clutter_is_removed() {
        let out = suppress_clutter(&range_fft(&tone_frame(8, 3, 5, 2))).unwrap();
        assert!(out.norm() < 1e-12);
        let zero = RadarFrame::zeros(4, 2, 3);
        assert_eq!(suppress_clutter(&zero).unwrap(), zero);
    }

    #[test]
    fn identical_chirps_cancel_exactly() {
        let v = Complex64::new(0.1, 0.7);
        let f = RadarFrame::new(1, 1, 3, vec![v; 3]).unwrap();
        assert_eq!(suppress_clutter(&f).unwrap(), RadarFrame::zeros(1, 1, 3));
        // A varying series keeps exactly its zero-mean part.
        let d = Complex64::new(0.25, -0.5);
        let f = RadarFrame::new(1, 1, 4, vec![v + d, v - d, v + d, v - d]).unwrap();
        let out = suppress_clutter(&f).unwrap();
        for (c, got) in out.as_slice().iter().enumerate() {
            let want = if c % 2 == 0 { d } else { -d };
            assert!((got - want).norm() < 1e-15);
        }
    }

    #[test]
    fn clutter_removal_needs_two_chirps() {
        let f = RadarFrame::zeros(4, 2, 1);
        assert!(matches!(suppress_clutter(&f), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn phase_progression_keeps_the_non_mean_part() {
        // x_c = exp(jωc): the mean of a geometric phase series has magnitude
        // |sin(Nω/2) / (N sin(ω/2))|, so the residual keeps 1 − that² of the power.
        let (nc, omega) = (16usize, 0.3f64);
        let mut f = RadarFrame::zeros(1, 1, nc);
        for c in 0..nc {
            f.set(0, 0, c, Complex64::from_polar(1.0, omega * c as f64));
        }
        let out = suppress_clutter(&f).unwrap();
        let mean_mag = ((nc as f64 * omega / 2.0).sin() / (nc as f64 * (omega / 2.0).sin())).abs();
        let fraction = out.norm().powi(2) / nc as f64;
        assert!((fraction - (1.0 - mean_mag * mean_mag)).abs() < 1e-12);
        let mean: Complex64 = out.as_slice().iter().sum();
        assert!(mean.norm() < 1e-12);
    }

    #[test]
    fn bearing_examples() {
        let intr = CameraIntrinsics { focal: 160.0, center_col: 10.0, width: 200, height: 1 };
        let grid = bearing_grid(&intr);
        assert_eq!(grid[10], 0.0);
        assert!((grid[170] - PI / 4.0).abs() < 1e-15);

        let intr = CameraIntrinsics { focal: 180.0, center_col: 160.0, width: 320, height: 180 };
        let grid = bearing_grid(&intr);
        assert!((grid[0] + (160.0f64 / 180.0).atan()).abs() < 1e-15);
        assert!((grid[0] + 0.727).abs() < 1e-3);
        assert!((grid[319] - (159.0f64 / 180.0).atan()).abs() < 1e-15);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bearing_grid_is_odd_symmetric_about_center() {
        let intr = CameraIntrinsics { focal: 50.0, center_col: 20.0, width: 41, height: 1 };
        let grid = bearing_grid(&intr);
        for d in 0..=20 {
            assert_eq!(grid[20 + d], -grid[20 - d]);
        }
    }

    #[test]
    fn steering_examples() {
        assert!(steering_vector(0.0, 4).iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        for (n, v) in steering_vector(PI / 2.0, 6).iter().enumerate() {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - Complex64::new(sign, 0.0)).norm() < 1e-12);
        }
        for (n, v) in steering_vector(PI / 6.0, 8).iter().enumerate() {
            let want = Complex64::from_polar(1.0, -PI * n as f64 / 2.0);
            assert!((v - want).norm() < 1e-12);
        }
    }

    fn noise_frame(rng: &mut ChaCha8Rng, ns: usize, na: usize, nc: usize, std: f64) -> RadarFrame {
        let normal = Normal::new(0.0, std / 2f64.sqrt()).unwrap();
        let data = (0..ns * na * nc).map(|_| Complex64::new(normal.sample(rng), normal.sample(rng))).collect();
        RadarFrame::new(ns, na, nc, data).unwrap()
    }

    #[test]
    fn mvdr_peaks_at_source_bearing() {
        let (na, nc) = (8, 32);
        let theta = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut f = noise_frame(&mut rng, 1, na, nc, 0.05);
        let a = steering_vector(theta, na);
        for c in 0..nc {
            let s = Complex64::from_polar(1.0, 0.7 * c as f64);
            for n in 0..na {
                let v = f.get(0, n, c) + s * a[n];
                f.set(0, n, c, v);
            }
        }
        let grid: Vec<f64> = (0..121).map(|i| -0.6 + 0.01 * i as f64).collect();
        let p = mvdr_power(&f, &grid);
        let best = (0..grid.len()).max_by(|&i, &j| p[(0, i)].total_cmp(&p[(0, j)])).unwrap();
        assert!((grid[best] - theta).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn mvdr_zero_input_gives_zero_rows() {
        let p = mvdr_power(&RadarFrame::zeros(4, 3, 5), &[-0.1, 0.0, 0.1]);
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mvdr_is_invariant_to_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = noise_frame(&mut rng, 4, 8, 16, 1.0);
        let mut g = f.clone();
        let rot = Complex64::from_polar(1.0, 1.234);
        g.as_mut_slice().iter_mut().for_each(|v| *v *= rot);
        let grid: Vec<f64> = (0..20).map(|i| -0.5 + 0.05 * i as f64).collect();
        let a = mvdr_power(&f, &grid);
        let b = mvdr_power(&g, &grid);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 1e-9 * x.abs());
        }
    }

    #[test]
    fn mvdr_white_noise_is_flat_within_3db() {
        // Averaged over independent draws, the spectrum of spatially white
        // noise should not prefer any bearing.
        let grid: Vec<f64> = (0..33).map(|i| -0.8 + 0.05 * i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mean = vec![0.0; grid.len()];
        let trials = 50;
        for _ in 0..trials {
            let f = noise_frame(&mut rng, 1, 8, 32, 1.0);
            let p = mvdr_power(&f, &grid);
            for (m, v) in mean.iter_mut().zip(p.row(0)) {
                *m += v / trials as f64;
            }
        }
        let max = mean.iter().copied().fold(f64::MIN, f64::max);
        let min = mean.iter().copied().fold(f64::MAX, f64::min);
        assert!(10.0 * (max / min).log10() < 3.0, "spread {} dB", 10.0 * (max / min).log10());
    }

    #[test]
    fn collapse_examples() {
        let p = RealMatrix::new(3, 2, vec![2.0; 6]).unwrap();
        for v in collapse_range(&p) {
            assert!((v - 3.0 * 2f64.ln()).abs() < 1e-15);
        }
        let p = RealMatrix::new(2, 2, vec![0.0, 0.0, 5.0, 0.5]).unwrap();
        assert_eq!(collapse_range(&p), vec![5f64.ln(), 0.5f64.ln()]);
        assert_eq!(collapse_range(&RealMatrix::zeros(3, 4)), vec![0.0; 4]);
    }

    #[test]
    fn dominant_bin_plus_floor() {
        let floor = 1e-3;
        let mut p = RealMatrix::new(4, 3, vec![floor; 12]).unwrap();
        p[(2, 1)] = 1e4;
        let out = collapse_range(&p);
        let direct = 1e4f64.ln() + 3.0 * floor.ln();
        assert!((out[1] - direct).abs() < 1e-12);
        assert!((out[0] - 4.0 * floor.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_cube_gives_half_weights() {
        let cfg = RadarConfig { samples_per_chirp: 8, antennas: 4, chirps_per_frame: 4, ..Default::default() };
        let intr = CameraIntrinsics { focal: 10.0, center_col: 5.0, width: 10, height: 4 };
        let cube = RadarCube::new(vec![RadarFrame::zeros(8, 4, 4); 3]).unwrap();
        let w = process_sequence(&cube, &cfg, &intr, WeightMode::Direct).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 0.5));
    }
}
