//! Small numeric helpers shared across modules.

pub(crate) const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Log density of N(mean, sd^2) at `x`.
#[inline]
pub(crate) fn ln_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * LN_2PI
}

#[inline]
pub(crate) fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points.
pub(crate) fn sample_variance(data: &[f64]) -> f64 {
    if data.len() < 2 {
        return 0.0;
    }
    let m = mean(data);
    data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (data.len() - 1) as f64
}

pub(crate) fn sample_sd(data: &[f64]) -> f64 {
    sample_variance(data).sqrt()
}

/// Linear-interpolation quantile on presorted data (the convention used by
/// most statistical software for its default sample quantile, "type 7"):
/// with n points the q-quantile sits at fractional index (n-1)q.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = lo.min(n - 2) + 1;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// 64-bit integer hash (splitmix64 finalizer). Used to derive independent
/// seed streams from a master seed without overlapping counters.
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
