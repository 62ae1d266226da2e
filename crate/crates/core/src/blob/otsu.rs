use crate::error::{Error, Result};

/// Otsu threshold over a `bins`-bin histogram spanning `[min, max]`.
///
/// Candidate thresholds are the interior bin edges; the one maximizing
/// between-class variance wins, ties going to the lowest edge. Class
/// statistics are accumulated on integer bin indices, so equal partitions
/// always score identically.
pub fn otsu_threshold(values: &[f32], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("otsu needs at least 2 bins, got {bins}")));
    }
    let Some((lo, hi)) = min_max(values) else {
        return Err(Error::Degenerate("otsu on an empty input".into()));
    };
    if !(hi > lo) {
        return Err(Error::Degenerate("otsu on a constant input".into()));
    }
    let hist = histogram(values, bins, lo, hi);
    let total: u64 = hist.iter().sum();
    let total_sum: u128 = hist.iter().enumerate().map(|(i, &n)| i as u128 * n as u128).sum();

    let mut best = (f64::NEG_INFINITY, 1usize);
    let (mut w0, mut s0) = (0u64, 0u128);
    for k in 1..bins {
        w0 += hist[k - 1];
        s0 += (k as u128 - 1) * hist[k - 1] as u128;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        let num = w1 as i128 * s0 as i128 - w0 as i128 * s1 as i128;
        let num = num as f64;
        let score = num * num / (w0 as f64 * w1 as f64);
        if score > best.0 {
            best = (score, k);
        }
    }
    Ok(bin_edge(lo, hi, bins, best.1))
}

#[inline]
pub(crate) fn bin_edge(lo: f64, hi: f64, bins: usize, k: usize) -> f64 {
    lo + k as f64 * (hi - lo) / bins as f64
}

fn min_max(values: &[f32]) -> Option<(f64, f64)> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Some((lo as f64, hi as f64))
}

/// Bin counts over `[lo, hi]`; the maximum lands in the last bin.
pub(crate) fn histogram(values: &[f32], bins: usize, lo: f64, hi: f64) -> Vec<u64> {
    let mut hist = vec![0u64; bins];
    let scale = bins as f64 / (hi - lo);
    for &v in values {
        let b = (((v as f64 - lo) * scale) as usize).min(bins - 1);
        hist[b] += 1;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive scan: for every candidate edge, recompute both classes'
    /// weights and means from bin centers and score w0·w1·(μ0 − μ1)².
    pub(crate) fn brute_force(values: &[f32], bins: usize) -> f64 {
        let lo = values.iter().copied().fold(f32::INFINITY, f32::min) as f64;
        let hi = values.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let hist = histogram(values, bins, lo, hi);
        let width = (hi - lo) / bins as f64;
        let center = |i: usize| lo + (i as f64 + 0.5) * width;
        let mut best = (f64::NEG_INFINITY, 0);
        for k in 1..bins {
            let (mut w0, mut m0, mut w1, mut m1) = (0.0, 0.0, 0.0, 0.0);
            for (i, &n) in hist.iter().enumerate() {
                if i < k {
                    w0 += n as f64;
                    m0 += n as f64 * center(i);
                } else {
                    w1 += n as f64;
                    m1 += n as f64 * center(i);
                }
            }
            if w0 == 0.0 || w1 == 0.0 {
                continue;
            }
            let score = w0 * w1 * (m0 / w0 - m1 / w1).powi(2);
            if score > best.0 * (1.0 + 1e-12) {
                best = (score, k);
            }
        }
        lo + best.1 as f64 * width
    }

    #[test]
    fn constant_input_is_degenerate() {
        assert!(matches!(otsu_threshold(&[3.0; 10], 256), Err(Error::Degenerate(_))));
        assert!(otsu_threshold(&[], 256).is_err());
        assert!(otsu_threshold(&[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn two_level_input() {
        let mut v = vec![0.0f32; 50];
        v.extend(vec![10.0f32; 50]);
        let t = otsu_threshold(&v, 256).unwrap();
        assert!(t > 0.0 && t < 10.0);
        // every separating edge ties, the lowest wins
        assert_eq!(t, 10.0 / 256.0);
    }

    #[test]
    fn random_bimodal_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(20..400);
            let split = rng.gen_range(0.1..0.9);
            let v: Vec<f32> = (0..n)
                .map(|_| {
                    if rng.gen_bool(split) {
                        rng.gen_range(0.0..1.0)
                    } else {
                        rng.gen_range(2.0..5.0)
                    }
                })
                .collect();
            let bins = rng.gen_range(2..300);
            let (got, want) = (otsu_threshold(&v, bins).unwrap(), brute_force(&v, bins));
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
    }
}
