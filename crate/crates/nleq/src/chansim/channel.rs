//! Memoryless nonlinearity and additive white Gaussian noise.

use rand::Rng;
use rand_distr::StandardNormal;

/// Saturating sinusoid `f(u) = A sin(u / A)`.
///
/// `A` controls the compression strength: small `A` clips hard, and as
/// `A -> inf` the map tends to the identity. A non-finite `amplitude` is
/// treated as "nonlinearity off" (exact identity).
pub fn apply_nonlinearity(samples: &mut [f64], amplitude: f64) {
    if !amplitude.is_finite() {
        return;
    }
    for u in samples.iter_mut() {
        *u = amplitude * (*u / amplitude).sin();
    }
}

/// Noise standard deviation per channel sample for a given SNR in dB.
///
/// Symbols have unit average power and the pulse shape has unit energy, so
/// the matched-filter output SNR equals `1 / sigma^2`; an SNR of `inf`
/// disables noise.
pub fn noise_sigma(snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        0.0
    } else {
        10f64.powf(-snr_db / 20.0)
    }
}

/// Draw a white Gaussian noise sequence with the given per-sample sigma.
pub fn gaussian_noise<R: Rng>(rng: &mut R, len: usize, sigma: f64) -> Vec<f64> {
    (0..len).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn nonlinearity_compresses_and_saturates() {
        let mut x = vec![0.0, 0.1, 1.0, -1.0, 10.0];
        apply_nonlinearity(&mut x, 1.0);
        assert!((x[0] - 0.0).abs() < 1e-15);
        assert!((x[1] - 0.1f64.sin()).abs() < 1e-15);
        assert!((x[2] - 1f64.sin()).abs() < 1e-15);
        assert!((x[3] + 1f64.sin()).abs() < 1e-15);
        // Output never exceeds A in magnitude.
        assert!(x[4].abs() <= 1.0);
    }

    #[test]
    fn nonlinearity_is_odd() {
        let a = 2.5;
        for &u in &[0.3, 0.9, 1.7, 4.0] {
            let mut p = [u];
            let mut n = [-u];
            apply_nonlinearity(&mut p, a);
            apply_nonlinearity(&mut n, a);
            assert!((p[0] + n[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn infinite_amplitude_is_identity() {
        let orig = vec![0.0, 0.5, -2.0, 100.0];
        let mut x = orig.clone();
        apply_nonlinearity(&mut x, f64::INFINITY);
        assert_eq!(x, orig);
    }

    #[test]
    fn large_amplitude_is_nearly_identity() {
        let mut x = vec![1.0];
        apply_nonlinearity(&mut x, 1e6);
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noise_sigma_matches_snr() {
        assert!((noise_sigma(0.0) - 1.0).abs() < 1e-15);
        assert!((noise_sigma(20.0) - 0.1).abs() < 1e-15);
        assert_eq!(noise_sigma(f64::INFINITY), 0.0);
    }

    #[test]
    fn noise_moments_match() {
        let mut rng = substream(7, 0);
        let sigma = 0.3;
        let z = gaussian_noise(&mut rng, 200_000, sigma);
        let mean: f64 = z.iter().sum::<f64>() / z.len() as f64;
        let var: f64 = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 3e-3, "mean {mean}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 1e-2, "var {var}");
    }
}
