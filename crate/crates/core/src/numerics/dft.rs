use std::f64::consts::PI;

use num_complex::Complex64;

/// Forward DFT, `X[k] = Σ_n x[n]·exp(−j2πkn/N)`.
///
/// Power-of-two lengths go through an iterative radix-2 transform, everything
/// else through direct summation. An empty input yields an empty output.
pub fn dft(signal: &[Complex64]) -> Vec<Complex64> {
    transform(signal, -1.0)
}

/// Inverse DFT including the `1/N` factor, so `idft(dft(x)) == x`.
pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = spectrum.len() as f64;
    let mut out = transform(spectrum, 1.0);
    for v in &mut out {
        *v /= n;
    }
    out
}

fn transform(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    if n <= 1 {
        return input.to_vec();
    }
    if n.is_power_of_two() {
        radix2(input, sign)
    } else {
        naive(input, sign)
    }
}

fn twiddle(k: usize, n: usize, sign: f64) -> Complex64 {
    // Reduce before the trig call so large k·n products stay exact.
    let k = k % n;
    let angle = sign * 2.0 * PI * k as f64 / n as f64;
    Complex64::new(angle.cos(), angle.sin())
}

fn naive(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    let table: Vec<Complex64> = (0..n).map(|k| twiddle(k, n, sign)).collect();
    (0..n).map(|k| input.iter().enumerate().map(|(i, &x)| x * table[(k * i) % n]).sum()).collect()
}

fn radix2(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    let bits = n.trailing_zeros();
    let mut data: Vec<Complex64> = (0..n).map(|i| input[i.reverse_bits() >> (usize::BITS - bits)]).collect();
    let table: Vec<Complex64> = (0..n / 2).map(|k| twiddle(k, n, sign)).collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let w = table[j * step];
                let a = data[start + j];
                let b = data[start + j + half] * w;
                data[start + j] = a + b;
                data[start + j + half] = a - b;
            }
        }
        len *= 2;
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let out = dft(&[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert!(close(&out, &[c(1.0); 4], 1e-15));
    }

    #[test]
    fn constant_lands_in_dc() {
        let out = dft(&[c(1.0); 4]);
        assert!(close(&out, &[c(4.0), c(0.0), c(0.0), c(0.0)], 1e-15));
    }

    #[test]
    fn single_tone_lands_in_its_bin() {
        let x: Vec<Complex64> = (0..8).map(|n| Complex64::from_polar(1.0, 2.0 * PI * 2.0 * n as f64 / 8.0)).collect();
        let out = dft(&x);
        for (k, v) in out.iter().enumerate() {
            let expected = if k == 2 { 8.0 } else { 0.0 };
            assert!((v - c(expected)).norm() < 1e-12, "bin {k}: {v}");
        }
    }

    #[test]
    fn radix2_matches_direct_sum() {
        let x: Vec<Complex64> =
            (0..32).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos())).collect();
        assert!(close(&radix2(&x, -1.0), &naive(&x, -1.0), 1e-11));
    }

    fn signal(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..max_len)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inverse_round_trips(x in signal(300)) {
            let back = idft(&dft(&x));
            let scale = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(err / scale < 1e-10);
        }

        #[test]
        fn parseval_holds(x in signal(300)) {
            let spectrum = dft(&x);
            let time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let freq: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
            prop_assert!((time - freq).abs() <= 1e-9 * time.max(1e-300));
        }
    }

    #[test]
    fn round_trip_at_4096() {
        for n in [4096usize, 4095] {
            let x: Vec<Complex64> =
                (0..n).map(|i| Complex64::new((i as f64 * 0.011).sin(), (i as f64 * 0.7).cos())).collect();
            let back = idft(&dft(&x));
            let scale = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err / scale < 1e-10, "n={n} err={err}");
        }
    }
}
