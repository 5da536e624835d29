//! Standard normal distribution: c.d.f., quantile, density and a sampler.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::LazyLock;

use statrs::function::erf::erfc_inv;

use crate::rng::Stream;

/// `1 / sqrt(2π)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Φ(x), the standard normal c.d.f., through the complementary error function.
///
/// Writing Φ(x) = erfc(−x/√2)/2 keeps full relative accuracy in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Φ⁻¹(p) for `p ∈ (0, 1)`; returns ±∞ at the endpoints.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // Polish the starting point with Halley steps on Φ(x) − p, working on the
    // smaller tail so that relative accuracy survives near 0 and 1.
    let (q, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut x = -SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..2 {
        let density = normal_pdf(x);
        if density == 0.0 {
            break;
        }
        let r = (normal_cdf(x) - q) / density;
        x -= r / (1.0 + 0.5 * x * r);
    }
    sign * x
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

// 256-layer ziggurat (Marsaglia & Tsang): R is the start of the tail, V the
// common area of every layer.
const ZIG_R: f64 = 3.654_152_885_361_008_8;
const ZIG_V: f64 = 0.004_928_673_233_992_336;
const TWO_POW_M52: f64 = 1.0 / 4_503_599_627_370_496.0;

pub(crate) struct Ziggurat {
    x: [f64; 257],
    f: [f64; 257],
}

static ZIGGURAT: LazyLock<Ziggurat> = LazyLock::new(|| {
    let density = |x: f64| (-0.5 * x * x).exp();
    let mut x = [0.0; 257];
    x[0] = ZIG_V / density(ZIG_R);
    x[1] = ZIG_R;
    for i in 1..255 {
        x[i + 1] = (-2.0 * (ZIG_V / x[i] + density(x[i])).ln()).sqrt();
    }
    x[256] = 0.0;
    let mut f = [0.0; 257];
    for i in 0..257 {
        f[i] = density(x[i]);
    }
    Ziggurat { x, f }
});

/// The shared layer table; hot loops fetch it once instead of per draw.
pub(crate) fn ziggurat_table() -> &'static Ziggurat {
    &ZIGGURAT
}

#[inline]
pub(crate) fn ziggurat(stream: &mut Stream) -> f64 {
    ziggurat_with(stream, &ZIGGURAT)
}

#[inline(always)]
pub(crate) fn ziggurat_with(stream: &mut Stream, table: &Ziggurat) -> f64 {
    let bits = stream.next_word();
    let layer = (bits & 0xff) as usize;
    // The top 53 bits as a signed fraction in [-1, 1).
    let u = ((bits as i64) >> 11) as f64 * TWO_POW_M52;
    let z = u * table.x[layer];
    if z.abs() < table.x[layer + 1] {
        return z;
    }
    ziggurat_slow(stream, table, layer, u, z)
}

#[cold]
#[inline(never)]
fn ziggurat_slow(stream: &mut Stream, table: &Ziggurat, layer: usize, u: f64, z: f64) -> f64 {
    let (mut layer, mut u, mut z) = (layer, u, z);
    loop {
        if layer == 0 {
            // Tail beyond R.
            loop {
                let a = -stream.uniform_open().ln() / ZIG_R;
                let b = -stream.uniform_open().ln();
                if 2.0 * b > a * a {
                    return if u < 0.0 { -(ZIG_R + a) } else { ZIG_R + a };
                }
            }
        }
        let w = stream.uniform();
        let y = table.f[layer] + w * (table.f[layer + 1] - table.f[layer]);
        if y < (-0.5 * z * z).exp() {
            return z;
        }
        let bits = stream.next_word();
        layer = (bits & 0xff) as usize;
        u = ((bits as i64) >> 11) as f64 * TWO_POW_M52;
        z = u * table.x[layer];
        if z.abs() < table.x[layer + 1] {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((normal_cdf(2.0) - 0.977_249_868_051_820_8).abs() < 1e-15);
        assert!((normal_cdf(-2.0) - 0.022_750_131_948_179_21).abs() < 1e-15);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-25);
    }

    #[test]
    fn cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for k in -800..=800 {
            let x = k as f64 / 100.0;
            let p = normal_cdf(x);
            assert!((p - (1.0 - normal_cdf(-x))).abs() <= 1e-12, "x = {x}");
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn cdf_dominates_linear_lower_bound_on_unit_interval() {
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!(normal_cdf(t) >= 0.5 + t / 4.0, "t = {t}");
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        // Composite Simpson on [0, x] of the density as an independent route.
        for &x in &[0.3, 1.0, 2.5] {
            let steps = 2000;
            let h: f64 = x / steps as f64;
            let mut acc = normal_pdf(0.0) + normal_pdf(x);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * normal_pdf(i as f64 * h);
            }
            let integral = 0.5 + acc * h / 3.0;
            assert!((integral - normal_cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-9, 0.001, 0.1, 0.5, 0.77, 0.999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() <= 1e-12 * p.max(1e-3));
        }
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(normal_quantile(1.0), f64::INFINITY);
    }

    #[test]
    fn ziggurat_layers_close() {
        let t = &*ZIGGURAT;
        // The top layer must carry the same area as every other layer.
        let top = t.x[255] * (1.0 - t.f[255]);
        assert!((top - ZIG_V).abs() < 1e-9, "top layer area {top}");
    }

    #[test]
    fn ziggurat_matches_normal_distribution() {
        let mut s = Stream::from_key(99);
        let n = 400_000;
        let mut draws: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
        draws.sort_by(f64::total_cmp);
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal_cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1.95 / sqrt(n) is the 0.1% critical value of the KS statistic.
        assert!(ks < 1.95 / (n as f64).sqrt(), "ks = {ks}");
        // Tail frequency beyond the ziggurat base.
        let tail = draws.iter().filter(|x| x.abs() > ZIG_R).count() as f64 / n as f64;
        let expected = 2.0 * normal_cdf(-ZIG_R);
        assert!((tail - expected).abs() < 5.0 * (expected / n as f64).sqrt());
    }
}
