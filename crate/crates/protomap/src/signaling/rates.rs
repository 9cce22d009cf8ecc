//! Information rates and soft demapping: AWGN capacity, bit-metric
//! decoding rates, per-level LLRs and the decoder uncertainty functional.

use rand::Rng;
use rand_distr::StandardNormal;

use super::constellation::Signaling;
use super::Error;
use crate::quantize::QuantizerSpec;
use crate::util::{bisect_increasing, gh128, log_sum_exp, stream_rng, LLR_CLAMP};

/// AWGN capacity ½ log₂(1 + SNR) in bits per channel use.
pub fn capacity_awgn(snr: f64) -> Result<f64, Error> {
    if snr <= 0.0 || !snr.is_finite() {
        return Err(Error::InvalidParameter("snr must be positive".into()));
    }
    Ok(0.5 * (1.0 + snr).log2())
}

/// Bit-level LLR of level `j` (1-based) for channel output `y`:
/// log of the prior-weighted likelihood mass with label bit 0 over the
/// mass with label bit 1, evaluated in the log domain and saturated at
/// ±[`LLR_CLAMP`].
pub fn demap_llr(y: f64, j: usize, signaling: &Signaling, noise_var: f64) -> f64 {
    let c = signaling.constellation();
    let mut num = Vec::with_capacity(c.size() / 2);
    let mut den = Vec::with_capacity(c.size() / 2);
    for k in 0..c.size() {
        let p = signaling.distribution().prob(k);
        if p <= 0.0 {
            continue;
        }
        let d = y - signaling.scaled_point(k);
        let log_term = p.ln() - d * d / (2.0 * noise_var);
        if c.label_bit(k, j) {
            den.push(log_term);
        } else {
            num.push(log_term);
        }
    }
    let l = log_sum_exp(&num) - log_sum_exp(&den);
    l.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// Conditional entropy H(B_j | Y) in bits by Gauss-Hermite quadrature over
/// each conditioning symbol.
pub fn cond_entropy_bit(signaling: &Signaling, snr: f64, j: usize) -> f64 {
    let noise_var = 1.0 / snr;
    let sigma_sqrt2 = (2.0 * noise_var).sqrt();
    let (nodes, weights) = gh128();
    let c = signaling.constellation();
    let mut acc = 0.0;
    for k in 0..c.size() {
        let p = signaling.distribution().prob(k);
        if p <= 0.0 {
            continue;
        }
        let x = signaling.scaled_point(k);
        let b = c.label_bit(k, j);
        let mut inner = 0.0;
        for (&t, &w) in nodes.iter().zip(weights) {
            let y = x + sigma_sqrt2 * t;
            let l = demap_llr(y, j, signaling, noise_var);
            // -log2 P(B_j = b | y) = log2(1 + e^{-(1-2b) l})
            let s = if b { -l } else { l };
            inner += w * log2_1p_exp(-s);
        }
        acc += p * inner / std::f64::consts::PI.sqrt();
    }
    acc
}

/// log2(1 + e^x) without overflow.
fn log2_1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        (x + (-x).exp().ln_1p()) / std::f64::consts::LN_2
    } else {
        x.exp().ln_1p() / std::f64::consts::LN_2
    }
}

/// Bit levels (1-based) ordered most reliable first, i.e. by ascending
/// conditional entropy at the given SNR; ties break to the lower index.
pub fn reliability_ordering(signaling: &Signaling, snr: f64) -> Vec<usize> {
    let m = signaling.bits_per_symbol();
    let mut levels: Vec<(usize, f64)> = (1..=m)
        .map(|j| (j, cond_entropy_bit(signaling, snr, j)))
        .collect();
    levels.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    levels.into_iter().map(|(j, _)| j).collect()
}

/// Achievable bit-metric decoding rate `[H(B) - Σ_j H(B_j|Y)]⁺`.
pub fn bmd_rate(signaling: &Signaling, snr: f64) -> f64 {
    let m = signaling.bits_per_symbol();
    let mut rate = signaling.entropy();
    for j in 1..=m {
        rate -= cond_entropy_bit(signaling, snr, j);
    }
    rate.max(0.0)
}

/// SNR in dB at which the bit-metric decoding rate crosses `eta`, located
/// by bisection inside `window_db`.
pub fn bmd_limit_snr_db(signaling: &Signaling, eta: f64, window_db: (f64, f64)) -> f64 {
    bisect_increasing(
        |snr_db| bmd_rate(signaling, crate::util::db_to_linear(snr_db)),
        window_db.0,
        window_db.1,
        eta,
        1e-6,
        0.0,
    )
}

/// Monte-Carlo estimate of the decoder uncertainty (bits per channel use)
/// summed over the bit levels. With a quantizer the LLR is replaced by the
/// reconstruction value of its quantization before evaluation. Returns the
/// estimate and its standard error.
pub fn uncertainty_llr(
    signaling: &Signaling,
    snr: f64,
    quantizer: Option<&QuantizerSpec>,
    num_samples: usize,
    seed: u64,
) -> (f64, f64) {
    let noise_var = 1.0 / snr;
    let sd = noise_var.sqrt();
    let mut rng = stream_rng(seed, 0x5EED_0C0D);
    let c = signaling.constellation();
    let cdf = cumulative(signaling);
    let m = signaling.bits_per_symbol();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..num_samples {
        let k = sample_index(&cdf, rng.gen::<f64>());
        let x = signaling.scaled_point(k);
        let z: f64 = rng.sample(StandardNormal);
        let y = x + sd * z;
        let mut frame = 0.0;
        for j in 1..=m {
            let mut l = demap_llr(y, j, signaling, noise_var);
            if let Some(q) = quantizer {
                l = q.reconstruct(q.quantize(l));
            }
            let s = if c.label_bit(k, j) { -l } else { l };
            frame += log2_1p_exp(-s);
        }
        sum += frame;
        sum_sq += frame * frame;
    }
    let n = num_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

fn cumulative(signaling: &Signaling) -> Vec<f64> {
    let mut acc = 0.0;
    (0..signaling.constellation().size())
        .map(|k| {
            acc += signaling.distribution().prob(k);
            acc
        })
        .collect()
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

/// SNR in dB at which `H(B) - uncertainty` reaches `eta` for a quantized
/// demapper, located by bisection with common random numbers across
/// probes.
pub fn required_snr_uncertainty(
    signaling: &Signaling,
    quantizer: Option<&QuantizerSpec>,
    eta: f64,
    window_db: (f64, f64),
    num_samples: usize,
    seed: u64,
) -> f64 {
    let h = signaling.entropy();
    bisect_increasing(
        |snr_db| {
            let (u, _) = uncertainty_llr(
                signaling,
                crate::util::db_to_linear(snr_db),
                quantizer,
                num_samples,
                seed,
            );
            h - u
        },
        window_db.0,
        window_db.1,
        eta,
        5e-3,
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn capacity_values() {
        assert_relative_eq!(capacity_awgn(1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(capacity_awgn(3.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            capacity_awgn(10f64.powf(1.5)).unwrap(),
            2.5139038366752596,
            epsilon = 1e-10
        );
        assert!(capacity_awgn(0.0).is_err());
        assert!(capacity_awgn(-1.0).is_err());
    }

    #[test]
    fn bpsk_llr_closed_form() {
        // 2-ASK uniform, label 0 on +1: l = 2y/σ²
        let s = Signaling::uniform_ask(1);
        for &(y, var) in &[(1.0, 1.0), (0.3, 0.5), (-2.0, 2.0)] {
            assert_relative_eq!(demap_llr(y, 1, &s, var), 2.0 * y / var, epsilon = 1e-10);
        }
        assert_relative_eq!(demap_llr(1.0, 1, &s, 1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn llr_sign_symmetry_and_zero() {
        let s = Signaling::uniform_ask(2);
        // level-1 LLR is odd in y for a symmetric distribution
        for &y in &[0.1, 0.7, 2.3] {
            let lp = demap_llr(y, 1, &s, 0.5);
            let ln = demap_llr(-y, 1, &s, 0.5);
            assert_relative_eq!(lp, -ln, epsilon = 1e-10);
        }
        assert_relative_eq!(demap_llr(0.0, 1, &s, 0.5), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn llr_dominated_by_largest_point() {
        let s = Signaling::uniform_ask(3);
        let c = s.constellation();
        // huge y: each level's LLR sign is set by the top point's label bit
        let top = c.size() - 1;
        for j in 1..=3 {
            let l = demap_llr(1e4, j, &s, 1.0);
            if c.label_bit(top, j) {
                assert!(l < 0.0);
            } else {
                assert!(l > 0.0);
            }
        }
    }

    #[test]
    fn bmd_rate_saturates_and_bounded_by_entropy() {
        let s = Signaling::uniform_ask(3);
        let r = bmd_rate(&s, crate::util::db_to_linear(60.0));
        assert_relative_eq!(r, 3.0, epsilon = 1e-6);
        for &db in &[0.0, 8.0, 16.0, 24.0] {
            let r = bmd_rate(&s, crate::util::db_to_linear(db));
            assert!(r <= s.entropy() + 1e-12);
        }
    }

    #[test]
    fn bmd_rate_monotone_in_snr() {
        let s = Signaling::uniform_ask(3);
        let mut prev = 0.0;
        for step in 0..30 {
            let db = -5.0 + step as f64;
            let r = bmd_rate(&s, crate::util::db_to_linear(db));
            assert!(r >= prev - 1e-9, "rate dipped at {db} dB");
            prev = r;
        }
    }

    #[test]
    fn bpsk_cond_entropy_matches_binary_awgn() {
        // independent route: direct integral of the binary-input AWGN
        // conditional entropy on a wide Simpson grid
        let s = Signaling::uniform_ask(1);
        let snr = 2.0;
        let var = 1.0 / snr;
        let h = cond_entropy_bit(&s, snr, 1);
        let mut oracle = 0.0;
        let n = 40001;
        let (lo, hi) = (-12.0, 12.0);
        let dy = (hi - lo) / (n - 1) as f64;
        for i in 0..n {
            let y: f64 = lo + i as f64 * dy;
            let p0 = (-(y - 1.0) * (y - 1.0) / (2.0 * var)).exp();
            let p1 = (-(y + 1.0) * (y + 1.0) / (2.0 * var)).exp();
            let py = 0.5 * (p0 + p1) / (2.0 * std::f64::consts::PI * var).sqrt();
            let q = p0 / (p0 + p1);
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            oracle += w * py * crate::util::binary_entropy(q);
        }
        oracle *= dy / 3.0;
        assert_relative_eq!(h, oracle, epsilon = 1e-8);
    }

    #[test]
    fn uncertainty_identity_with_bmd_rate() {
        // H(B) - uncertainty = bmd_rate within 3 standard errors
        for s in [Signaling::uniform_ask(2), Signaling::pas_ask(3, 0.05, 1.5).unwrap()] {
            let snr = crate::util::db_to_linear(9.0);
            let (u, se) = uncertainty_llr(&s, snr, None, 200_000, 11);
            let lhs = s.entropy() - u;
            let rhs = bmd_rate(&s, snr);
            assert!(
                (lhs - rhs).abs() <= 3.0 * se + 1e-9,
                "identity violated: {lhs} vs {rhs} (se {se})"
            );
        }
    }

    #[test]
    fn uncertainty_vanishes_at_high_snr() {
        let s = Signaling::uniform_ask(2);
        let (u, _) = uncertainty_llr(&s, crate::util::db_to_linear(60.0), None, 10_000, 3);
        assert!(u < 1e-6);
    }
}
