//! Protograph EXIT analysis over binary-input AWGN surrogate channels
//! matched by conditional entropy, with bisection threshold search.

use std::sync::OnceLock;

use thiserror::Error as ThisError;

use crate::bitmap::BitMapping;
use crate::protosys::BaseMatrix;
use crate::signaling::{cond_entropy_bit, Signaling};
use crate::util::{bisect_increasing, db_to_linear, gh128};

#[derive(Debug, Clone, ThisError)]
pub enum Error {
    #[error("entropy target {0} must lie strictly inside (0, 1)")]
    EntropyOutOfRange(f64),
    #[error("mapping has {mapping} columns but the protograph transmits {types} types")]
    MappingMismatch { mapping: usize, types: usize },
    #[error("no convergence sign change inside the expanded window")]
    NoBracket,
}

/// biAWGN surrogate channel for one variable-node type.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateChannel {
    /// Noise variance of the surrogate.
    pub sigma2: f64,
    /// Conditional entropy the surrogate was matched to.
    pub target_entropy: f64,
}

/// Mutual-information state of one P-EXIT run.
#[derive(Debug, Clone)]
pub struct PexitState {
    /// VN→CN mutual information per nonzero protograph entry.
    pub i_ev: Vec<f64>,
    /// CN→VN mutual information per nonzero protograph entry.
    pub i_ec: Vec<f64>,
    pub iterations: usize,
}

/// Mutual information of a biAWGN channel as a function of the LLR
/// standard deviation σ (the classic J function), by quadrature.
pub fn j_exact(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let (nodes, weights) = gh128();
    let mean = sigma * sigma / 2.0;
    let s = std::f64::consts::SQRT_2 * sigma;
    let mut acc = 0.0;
    for (&t, &w) in nodes.iter().zip(weights) {
        let l = mean + s * t;
        // log2(1 + e^{-l}) stably
        let v = if l > 0.0 {
            (-l).exp().ln_1p()
        } else {
            -l + l.exp().ln_1p()
        } / std::f64::consts::LN_2;
        acc += w * v;
    }
    (1.0 - acc / std::f64::consts::PI.sqrt()).clamp(0.0, 1.0)
}

const J_SIGMA_MAX: f64 = 40.0;
const J_TABLE_STEP: f64 = 1e-3;

struct JTable {
    values: Vec<f64>,
}

fn j_table() -> &'static JTable {
    static TABLE: OnceLock<JTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (J_SIGMA_MAX / J_TABLE_STEP) as usize + 1;
        let values = (0..n).map(|i| j_exact(i as f64 * J_TABLE_STEP)).collect();
        JTable { values }
    })
}

/// Table-interpolated J function used inside the EXIT recursion.
pub fn j_fn(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    if sigma >= J_SIGMA_MAX {
        return 1.0;
    }
    let t = j_table();
    let pos = sigma / J_TABLE_STEP;
    let i = pos as usize;
    let frac = pos - i as f64;
    (t.values[i] * (1.0 - frac) + t.values[i + 1] * frac).clamp(0.0, 1.0)
}

/// Inverse of [`j_fn`] on the same table.
pub fn j_inv(i: f64) -> f64 {
    let t = j_table();
    if i <= 0.0 {
        return 0.0;
    }
    if i >= *t.values.last().unwrap() {
        return J_SIGMA_MAX;
    }
    let idx = t.values.partition_point(|&v| v < i);
    let (lo, hi) = (t.values[idx - 1], t.values[idx]);
    let frac = if hi > lo { (i - lo) / (hi - lo) } else { 0.0 };
    (idx as f64 - 1.0 + frac) * J_TABLE_STEP
}

/// Conditional entropy H(X|Y) of a unit-energy biAWGN channel with noise
/// variance `sigma2`.
pub fn biawgn_entropy(sigma2: f64) -> f64 {
    1.0 - j_exact(2.0 / sigma2.sqrt())
}

/// Noise variance whose biAWGN conditional entropy equals the target, to
/// within 1e-9 bits. The table inverse seeds a short exact-quadrature
/// bisection for the final digits.
pub fn match_surrogate(target_entropy: f64) -> Result<SurrogateChannel, Error> {
    if target_entropy <= 0.0 || target_entropy >= 1.0 {
        return Err(Error::EntropyOutOfRange(target_entropy));
    }
    let sigma_llr = j_inv(1.0 - target_entropy).max(1e-12);
    // refine the LLR deviation on the exact J around the table estimate
    let refined = bisect_increasing(
        j_exact,
        (sigma_llr - 4.0 * J_TABLE_STEP).max(0.0),
        sigma_llr + 4.0 * J_TABLE_STEP,
        1.0 - target_entropy,
        0.0,
        1e-12,
    );
    let sigma_n = 2.0 / refined.max(1e-12);
    Ok(SurrogateChannel {
        sigma2: sigma_n * sigma_n,
        target_entropy,
    })
}

/// Per-type channel LLR standard deviations for the EXIT recursion:
/// transmitted types are matched through the mapping-mixed conditional
/// entropy, punctured types carry no channel information, shortened types
/// are perfectly known.
fn channel_llr_sigmas(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    snr: f64,
) -> Result<Vec<Option<f64>>, Error> {
    let transmitted = base.transmitted_columns();
    if mapping.n_types() != transmitted.len() {
        return Err(Error::MappingMismatch {
            mapping: mapping.n_types(),
            types: transmitted.len(),
        });
    }
    let m = signaling.bits_per_symbol();
    let entropies: Vec<f64> = (1..=m)
        .map(|j| cond_entropy_bit(signaling, snr, j))
        .collect();
    let mut sigma_ch: Vec<Option<f64>> = vec![None; base.cols()];
    for (t, &col) in transmitted.iter().enumerate() {
        let target: f64 = (0..m).map(|j| mapping.entry(j, t) * entropies[j]).sum();
        let target = target.clamp(1e-12, 1.0 - 1e-12);
        // table inverse of the matching identity H(X̃|Ỹ) = 1 - J(σ_llr)
        sigma_ch[col] = Some(j_inv(1.0 - target));
    }
    for &col in base.punctured() {
        sigma_ch[col] = Some(0.0);
    }
    // shortened stay None: known bits, unit mutual information
    Ok(sigma_ch)
}

/// Runs the EXIT recursion at one SNR; `true` when every a-posteriori
/// mutual information exceeds 1 - 1e-6 within `max_iters`.
pub fn pexit_converges(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    snr: f64,
    max_iters: usize,
) -> Result<bool, Error> {
    let (state, converged) = pexit_run(base, mapping, signaling, snr, max_iters)?;
    let _ = state;
    Ok(converged)
}

/// Full recursion returning the final per-edge state.
pub fn pexit_run(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    snr: f64,
    max_iters: usize,
) -> Result<(PexitState, bool), Error> {
    const TARGET: f64 = 1.0 - 1e-6;
    let sigma_ch = channel_llr_sigmas(base, mapping, signaling, snr)?;
    let nonzero: Vec<(usize, usize, f64)> = base
        .nonzero_entries()
        .map(|(j, i)| (j, i, base.entry(j, i) as f64))
        .collect();
    let ne = nonzero.len();
    let shortened = |i: usize| base.shortened().contains(&i);

    let mut i_ev = vec![0.0f64; ne];
    let mut i_ec = vec![0.0f64; ne];
    let mut iterations = 0;
    let mut converged = false;
    // fixed-point detection: abort once the weakest a-posteriori mutual
    // information stops moving at machine scale
    let mut best_min_app = 0.0f64;
    let mut stalled_for = 0usize;
    while iterations < max_iters {
        iterations += 1;
        // VN to CN
        let mut col_acc = vec![0.0f64; base.cols()];
        for (e, &(_, i, mult)) in nonzero.iter().enumerate() {
            let s = j_inv(i_ec[e]);
            col_acc[i] += mult * s * s;
        }
        for (e, &(_, i, _)) in nonzero.iter().enumerate() {
            if shortened(i) {
                i_ev[e] = 1.0;
                continue;
            }
            let s_in = j_inv(i_ec[e]);
            let ch = sigma_ch[i].unwrap_or(0.0);
            let var = (col_acc[i] - s_in * s_in).max(0.0) + ch * ch;
            i_ev[e] = j_fn(var.sqrt());
        }
        // CN to VN
        let mut row_acc = vec![0.0f64; base.rows()];
        for (e, &(j, _, mult)) in nonzero.iter().enumerate() {
            let s = j_inv(1.0 - i_ev[e]);
            row_acc[j] += mult * s * s;
        }
        for (e, &(j, _, _)) in nonzero.iter().enumerate() {
            let s_in = j_inv(1.0 - i_ev[e]);
            let var = (row_acc[j] - s_in * s_in).max(0.0);
            i_ec[e] = 1.0 - j_fn(var.sqrt());
        }
        // a-posteriori check over all non-shortened types
        let mut col_app = vec![0.0f64; base.cols()];
        for (e, &(_, i, mult)) in nonzero.iter().enumerate() {
            let s = j_inv(i_ec[e]);
            col_app[i] += mult * s * s;
        }
        let mut min_app = 1.0f64;
        for i in 0..base.cols() {
            if shortened(i) {
                continue;
            }
            let ch = sigma_ch[i].unwrap_or(0.0);
            let app = j_fn((col_app[i] + ch * ch).sqrt());
            min_app = min_app.min(app);
        }
        if min_app > TARGET {
            converged = true;
            break;
        }
        if min_app <= best_min_app + 1e-12 {
            stalled_for += 1;
            if stalled_for >= 40 {
                break;
            }
        } else {
            best_min_app = min_app;
            stalled_for = 0;
        }
    }
    Ok((
        PexitState {
            i_ev,
            i_ec,
            iterations,
        },
        converged,
    ))
}

#[derive(Debug, Clone)]
pub struct PexitOptions {
    pub max_iters: usize,
    pub tol_db: f64,
    pub window_db: (f64, f64),
}

impl Default for PexitOptions {
    fn default() -> Self {
        PexitOptions {
            max_iters: 1000,
            tol_db: 0.01,
            window_db: (5.0, 25.0),
        }
    }
}

/// Decoding threshold in dB: bisection on [`pexit_converges`], expanding
/// the window up to a 10 dB one-sided widening when it fails to straddle.
pub fn pexit_threshold(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    opts: &PexitOptions,
) -> Result<f64, Error> {
    let probe = |db: f64| pexit_converges(base, mapping, signaling, db_to_linear(db), opts.max_iters);
    let (mut lo, mut hi) = opts.window_db;
    let mut expand = 0.0;
    while probe(hi)? == false {
        expand += 2.0;
        if expand > 10.0 {
            return Err(Error::NoBracket);
        }
        hi += 2.0;
    }
    while probe(lo)? {
        expand += 2.0;
        if expand > 10.0 {
            return Err(Error::NoBracket);
        }
        lo -= 2.0;
    }
    while hi - lo > opts.tol_db {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitmap::{reference_mapping, MappingMode};
    use approx::assert_relative_eq;

    #[test]
    fn biawgn_entropy_limits_and_monotonicity() {
        assert!(biawgn_entropy(1e-4) < 1e-9);
        assert!(biawgn_entropy(1e6) > 1.0 - 1e-3);
        let mut prev = -1.0;
        for k in 1..=100 {
            let sigma2 = 0.05 * k as f64;
            let h = biawgn_entropy(sigma2);
            assert!(h > prev, "entropy not increasing at sigma2 {sigma2}");
            prev = h;
        }
    }

    #[test]
    fn j_round_trip() {
        for &x in &[0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999] {
            let s = j_inv(x);
            assert!((j_fn(s) - x).abs() < 1e-6, "round trip at {x}");
        }
    }

    #[test]
    fn surrogate_matching_inverse_property() {
        for &h in &[0.1, 0.5, 0.9] {
            let s = match_surrogate(h).unwrap();
            assert_relative_eq!(biawgn_entropy(s.sigma2), h, epsilon = 1e-9);
        }
        assert!(match_surrogate(0.0).is_err());
        assert!(match_surrogate(1.0).is_err());
    }

    #[test]
    fn surrogate_matching_deterministic() {
        let s = Signaling::uniform_ask(3);
        let h = cond_entropy_bit(&s, db_to_linear(17.0), 1);
        let a = match_surrogate(h).unwrap().sigma2;
        let b = match_surrogate(h).unwrap().sigma2;
        assert_eq!(a, b);
        assert!(a.is_finite() && a > 0.0);
    }

    #[test]
    fn mixture_matching_linearity() {
        // a one-hot mixing column reproduces the single-level match,
        // and the target is linear in the mixing weights by construction
        let s = Signaling::uniform_ask(3);
        let snr = db_to_linear(14.0);
        let h: Vec<f64> = (1..=3).map(|j| cond_entropy_bit(&s, snr, j)).collect();
        let one_hot = match_surrogate(h[0]).unwrap().sigma2;
        let direct = match_surrogate(1.0 * h[0] + 0.0 * h[1] + 0.0 * h[2])
            .unwrap()
            .sigma2;
        assert_relative_eq!(one_hot, direct, epsilon = 1e-12);
        let mean = (h[0] + h[1] + h[2]) / 3.0;
        let uniform_mix: f64 = (0..3).map(|j| h[j] / 3.0).sum();
        assert_relative_eq!(mean, uniform_mix, epsilon = 1e-15);
    }

    fn toy_base() -> BaseMatrix {
        BaseMatrix::new(vec![vec![3, 3]], 1, [], []).unwrap()
    }

    #[test]
    fn pexit_extremes() {
        let base = toy_base();
        let s = Signaling::uniform_ask(1);
        let mapping =
            reference_mapping(1, 2, MappingMode::Uniform, [], vec![0, 1]).unwrap();
        assert!(pexit_converges(&base, &mapping, &s, db_to_linear(15.0), 1000).unwrap());
        assert!(!pexit_converges(&base, &mapping, &s, db_to_linear(0.0), 1000).unwrap());
    }

    #[test]
    fn pexit_threshold_regular_36_bpsk() {
        // the (3,6) ensemble over BPSK: the EXIT-chart threshold of this
        // ensemble is near 1.1 dB; the Gaussian approximation is good to
        // a few hundredths of a dB here
        let base = toy_base();
        let s = Signaling::uniform_ask(1);
        let mapping =
            reference_mapping(1, 2, MappingMode::Uniform, [], vec![0, 1]).unwrap();
        let opts = PexitOptions {
            window_db: (0.0, 4.0),
            ..Default::default()
        };
        let th = pexit_threshold(&base, &mapping, &s, &opts).unwrap();
        assert!((0.9..1.4).contains(&th), "threshold {th} dB out of range");
    }

    #[test]
    fn threshold_invariant_under_column_permutation() {
        let base = BaseMatrix::new(vec![vec![2, 1, 1], vec![1, 2, 1]], 1, [], []).unwrap();
        let perm = BaseMatrix::new(vec![vec![1, 2, 1], vec![2, 1, 1]], 1, [], []).unwrap();
        let s = Signaling::uniform_ask(3);
        let mapping = BitMapping::from_rows(
            vec![
                vec![0.6, 0.2, 0.2],
                vec![0.2, 0.6, 0.2],
                vec![0.2, 0.2, 0.6],
            ],
            MappingMode::Uniform,
            [],
            vec![0, 1, 2],
        )
        .unwrap();
        let mapping_perm = BitMapping::from_rows(
            vec![
                vec![0.2, 0.6, 0.2],
                vec![0.6, 0.2, 0.2],
                vec![0.2, 0.2, 0.6],
            ],
            MappingMode::Uniform,
            [],
            vec![0, 1, 2],
        )
        .unwrap();
        let opts = PexitOptions {
            window_db: (0.0, 20.0),
            ..Default::default()
        };
        let a = pexit_threshold(&base, &mapping, &s, &opts).unwrap();
        let b = pexit_threshold(&perm, &mapping_perm, &s, &opts).unwrap();
        assert!((a - b).abs() <= opts.tol_db + 1e-9);
    }

    #[test]
    fn state_mi_trajectories_monotone() {
        let base = toy_base();
        let s = Signaling::uniform_ask(1);
        let mapping =
            reference_mapping(1, 2, MappingMode::Uniform, [], vec![0, 1]).unwrap();
        let snr = db_to_linear(2.0);
        let mut prev = 0.0;
        for iters in [1, 2, 4, 8, 16, 32] {
            let (state, _) = pexit_run(&base, &mapping, &s, snr, iters).unwrap();
            let mi = state.i_ev.iter().cloned().fold(0.0, f64::max);
            assert!(mi >= prev - 1e-12);
            prev = mi;
        }
    }
}
