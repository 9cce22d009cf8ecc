//! Shared numerics: dB conversions, stable log-domain helpers, Gaussian
//! integrals, Gauss-Hermite quadrature and seeded per-stream RNGs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

/// Internal saturation bound for floating-point LLRs. Far above any
/// quantizer clip in use, so it never interacts with quantization.
pub const LLR_CLAMP: f64 = 300.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ exp(x_i) over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + xs.iter().map(|&x| (x - hi).exp()).sum::<f64>().ln()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// P(a < Z ≤ b) for Z ~ N(mean, var). Differences are computed through the
/// complementary tail on whichever side is farther out, so masses of
/// 1e-300 still come out with full relative accuracy.
pub fn normal_interval(mean: f64, var: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let sd = var.sqrt();
    let za = (a - mean) / sd;
    let zb = (b - mean) / sd;
    let p = if za + zb > 0.0 {
        // both bounds in the upper tail region: use upper-tail CDFs
        normal_cdf(-za) - normal_cdf(-zb)
    } else {
        normal_cdf(zb) - normal_cdf(za)
    };
    p.max(0.0)
}

/// log N(y; mean, var).
pub fn log_normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * (d * d / var) - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

/// Binary entropy in bits; h2(0) = h2(1) = 0.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Nodes and weights of n-point Gauss-Hermite quadrature for
/// ∫ f(t) e^{-t²} dt ≈ Σ w_i f(t_i).
///
/// Roots of the (orthonormal) Hermite recurrence located by Newton's
/// method from the standard asymptotic initial guesses.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pi_m4 = std::f64::consts::PI.powf(-0.25);
    let m = (n + 1) / 2;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pi_m4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // store ascending
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Cached 128-node rule used by the rate and entropy quadratures.
pub fn gh128() -> &'static (Vec<f64>, Vec<f64>) {
    static GH: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GH.get_or_init(|| gauss_hermite(128))
}

/// E[f(Y)] for Y ~ N(mean, var) by Gauss-Hermite quadrature.
pub fn gauss_expect<F: Fn(f64) -> f64>(mean: f64, var: f64, f: F) -> f64 {
    let (nodes, weights) = gh128();
    let s = (2.0 * var).sqrt();
    let mut acc = 0.0;
    for (&t, &w) in nodes.iter().zip(weights) {
        acc += w * f(mean + s * t);
    }
    acc / std::f64::consts::PI.sqrt()
}

/// Solve f(x) = target for strictly increasing f on [lo, hi] by bisection.
/// Returns the midpoint once the bracket is below `xtol` or f is within
/// `ftol` of the target.
pub fn bisect_increasing<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    xtol: f64,
    ftol: f64,
) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - target).abs() <= ftol || (hi - lo) <= xtol {
            return mid;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Deterministic per-stream RNG: stream `index` under a master seed.
/// Identical (seed, index) gives an identical stream regardless of which
/// worker consumes it.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        master_seed ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    ))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gh_moments() {
        let (nodes, weights) = gauss_hermite(128);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let s0: f64 = weights.iter().sum();
        let s2: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * t * t).sum();
        assert_relative_eq!(s0, sqrt_pi, epsilon = 1e-12);
        assert_relative_eq!(s2, sqrt_pi / 2.0, epsilon = 1e-11);
        // ∫ e^{-t²} cos t dt = √π e^{-1/4}
        let sc: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * t.cos()).sum();
        assert_relative_eq!(sc, sqrt_pi * (-0.25f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn gauss_expect_matches_moments() {
        assert_relative_eq!(gauss_expect(3.0, 4.0, |y| y), 3.0, epsilon = 1e-10);
        assert_relative_eq!(gauss_expect(3.0, 4.0, |y| (y - 3.0) * (y - 3.0)), 4.0, epsilon = 1e-9);
    }

    #[test]
    fn normal_interval_tails() {
        // symmetric interval around the mean
        assert_relative_eq!(normal_interval(0.0, 1.0, -1.0, 1.0), 0.6826894921370859, epsilon = 1e-12);
        // far tail keeps relative accuracy
        let p = normal_interval(0.0, 1.0, 10.0, 11.0);
        assert!(p > 0.0 && p < 1e-20);
        // degenerate interval
        assert_eq!(normal_interval(0.0, 1.0, 2.0, 2.0), 0.0);
    }

    #[test]
    fn log_sum_exp_stable() {
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(log_add_exp(0.0, 0.0), 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn bisect_inverse() {
        let x = bisect_increasing(|t| t * t * t, 0.0, 10.0, 8.0, 1e-12, 0.0);
        assert_relative_eq!(x, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn stream_rng_deterministic_and_distinct() {
        use rand::RngCore;
        let a1 = stream_rng(7, 0).next_u64();
        let a2 = stream_rng(7, 0).next_u64();
        let b = stream_rng(7, 1).next_u64();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
    }
}
