//! Clipped uniform LLR quantization, quantized bit-channel densities and
//! the two-input check-node table shared by density evolution and the
//! quantized decoder.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error as ThisError;

use crate::signaling::{demap_llr, Signaling};
use crate::util::{normal_interval, stream_rng};

#[derive(Debug, Clone, ThisError)]
pub enum Error {
    #[error("quantizer needs at least 2 bits and a positive clip")]
    InvalidSpec,
    #[error("densities live on different alphabets")]
    AlphabetMismatch,
    #[error("mixture weights sum to {0}, not 1")]
    WeightSum(f64),
    #[error("weights and densities differ in length")]
    WeightCount,
}

/// A `b`-bit quantizer clipping to `±B`: `q = 2^b - 1` odd levels spaced
/// `Δ = 2B/(q-1)` apart, with an exact zero level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    bits: u32,
    clip: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u32, clip: f64) -> Result<Self, Error> {
        if bits < 2 || clip <= 0.0 || !clip.is_finite() {
            return Err(Error::InvalidSpec);
        }
        Ok(QuantizerSpec { bits, clip })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    /// Number of levels `q = 2^b - 1` (odd).
    pub fn num_levels(&self) -> usize {
        (1usize << self.bits) - 1
    }

    /// Largest level index `(q-1)/2`.
    pub fn max_level(&self) -> i32 {
        ((self.num_levels() - 1) / 2) as i32
    }

    pub fn delta(&self) -> f64 {
        2.0 * self.clip / (self.num_levels() - 1) as f64
    }

    /// The three-branch clipped rounding: exact zero for |l| ≤ Δ/2,
    /// clip-then-round elsewhere.
    pub fn quantize(&self, l: f64) -> i32 {
        let delta = self.delta();
        if l > 0.5 * delta {
            let c = l.min(self.clip);
            ((c / delta + 0.5).floor() as i32).min(self.max_level())
        } else if l < -0.5 * delta {
            let c = l.max(-self.clip);
            ((c / delta - 0.5).ceil() as i32).max(-self.max_level())
        } else {
            0
        }
    }

    /// Reconstruction value of a level.
    pub fn reconstruct(&self, level: i32) -> f64 {
        level as f64 * self.delta()
    }

    /// Array index of a level (0 ↔ most negative).
    pub fn index_of(&self, level: i32) -> usize {
        (level + self.max_level()) as usize
    }

    pub fn level_of(&self, index: usize) -> i32 {
        index as i32 - self.max_level()
    }
}

/// A probability mass function over the quantizer alphabet, index 0 being
/// the most negative level. Optionally tagged with the label-bit value it
/// was conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDensity {
    pmf: Vec<f64>,
    pub conditioned_on: Option<bool>,
}

impl QuantizedDensity {
    pub fn new(pmf: Vec<f64>) -> Self {
        QuantizedDensity {
            pmf,
            conditioned_on: None,
        }
    }

    pub fn point_mass(spec: &QuantizerSpec, level: i32) -> Self {
        let mut pmf = vec![0.0; spec.num_levels()];
        pmf[spec.index_of(level)] = 1.0;
        QuantizedDensity::new(pmf)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn mass(&self, spec: &QuantizerSpec, level: i32) -> f64 {
        self.pmf[spec.index_of(level)]
    }

    pub fn total(&self) -> f64 {
        self.pmf.iter().sum()
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            for p in &mut self.pmf {
                *p /= t;
            }
        }
    }

    /// Density of the sign-flipped message.
    pub fn mirrored(&self) -> Self {
        let mut pmf = self.pmf.clone();
        pmf.reverse();
        QuantizedDensity {
            pmf,
            conditioned_on: self.conditioned_on,
        }
    }

    /// Mean of the reconstruction values.
    pub fn mean_reconstruction(&self, spec: &QuantizerSpec) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| p * spec.reconstruct(spec.level_of(i)))
            .sum()
    }

    /// Probability of a wrong hard decision under the all-zero convention:
    /// all mass below zero plus half the mass at zero.
    pub fn error_mass(&self, spec: &QuantizerSpec) -> f64 {
        let zero = spec.index_of(0);
        self.pmf[..zero].iter().sum::<f64>() + 0.5 * self.pmf[zero]
    }

    /// Serialization used for debugging dumps: `level,mass` lines.
    pub fn to_csv(&self, spec: &QuantizerSpec) -> String {
        let mut out = String::from("level,mass\n");
        for (i, p) in self.pmf.iter().enumerate() {
            out.push_str(&format!("{},{}\n", spec.level_of(i), p));
        }
        out
    }
}

/// Convex combination of densities on a common alphabet.
pub fn mix_densities(
    densities: &[QuantizedDensity],
    weights: &[f64],
) -> Result<QuantizedDensity, Error> {
    if densities.len() != weights.len() {
        return Err(Error::WeightCount);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSum(sum));
    }
    let len = densities.first().map_or(0, QuantizedDensity::len);
    if densities.iter().any(|d| d.len() != len) {
        return Err(Error::AlphabetMismatch);
    }
    let mut pmf = vec![0.0; len];
    for (d, &w) in densities.iter().zip(weights) {
        for (acc, p) in pmf.iter_mut().zip(d.pmf()) {
            *acc += w * p;
        }
    }
    Ok(QuantizedDensity::new(pmf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMethod {
    /// Exact cell masses: locate the quantizer-cell preimages of the LLR
    /// curve by root isolation, then integrate the Gaussian mixture over
    /// each piece with complementary-error-function differences.
    Quadrature,
    /// Empirical histogram of quantized LLR samples.
    MonteCarlo { samples: usize, seed: u64 },
}

/// The quantized bit channel of one level: densities conditioned on both
/// label-bit values plus the symmetrized density used by the all-zero
/// analysis (flip the sign under bit one, average with the bit priors).
#[derive(Debug, Clone)]
pub struct BitChannelDensity {
    pub cond: [QuantizedDensity; 2],
    pub symmetrized: QuantizedDensity,
    pub prior_zero: f64,
}

/// Distribution of the quantized level-`j` LLR.
pub fn channel_density(
    j: usize,
    signaling: &Signaling,
    snr: f64,
    spec: &QuantizerSpec,
    method: DensityMethod,
    resolution: usize,
) -> BitChannelDensity {
    let cond = match method {
        DensityMethod::Quadrature => {
            [quadrature_density(j, signaling, snr, spec, false, resolution),
             quadrature_density(j, signaling, snr, spec, true, resolution)]
        }
        DensityMethod::MonteCarlo { samples, seed } => {
            monte_carlo_density(j, signaling, snr, spec, samples, seed)
        }
    };
    let prior_zero = signaling.bit_prior(j, false);
    let mut pmf = vec![0.0; spec.num_levels()];
    let flipped = cond[1].mirrored();
    for (i, p) in pmf.iter_mut().enumerate() {
        *p = prior_zero * cond[0].pmf()[i] + (1.0 - prior_zero) * flipped.pmf()[i];
    }
    let mut symmetrized = QuantizedDensity::new(pmf);
    symmetrized.normalize();
    BitChannelDensity {
        cond,
        symmetrized,
        prior_zero,
    }
}

fn quadrature_density(
    j: usize,
    signaling: &Signaling,
    snr: f64,
    spec: &QuantizerSpec,
    bit: bool,
    resolution: usize,
) -> QuantizedDensity {
    let noise_var = 1.0 / snr;
    let sd = noise_var.sqrt();
    let c = signaling.constellation();
    let cond_points: Vec<(f64, f64)> = (0..c.size())
        .filter(|&k| c.label_bit(k, j) == bit && signaling.distribution().prob(k) > 0.0)
        .map(|k| (signaling.scaled_point(k), signaling.distribution().prob(k)))
        .collect();
    let total_prior: f64 = cond_points.iter().map(|&(_, p)| p).sum();
    let mut density = QuantizedDensity::new(vec![0.0; spec.num_levels()]);
    density.conditioned_on = Some(bit);
    if cond_points.is_empty() {
        return density;
    }

    // scan range: all constellation points plus deep Gaussian tails, so
    // every cell boundary of the LLR curve with non-negligible mass is
    // crossed by the grid no matter which bit value conditions the density
    let all_points: Vec<f64> = (0..c.size()).map(|k| signaling.scaled_point(k)).collect();
    let lo = all_points.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * sd;
    let hi = all_points.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * sd;
    let n = resolution.max(512);
    let llr = |y: f64| demap_llr(y, j, signaling, noise_var);

    // quantizer cell boundaries in the LLR domain
    let delta = spec.delta();
    let boundaries: Vec<f64> = (-spec.max_level()..spec.max_level())
        .map(|l| (l as f64 + 0.5) * delta)
        .collect();

    // locate every boundary crossing of the LLR curve on a scan grid
    let step = (hi - lo) / (n - 1) as f64;
    let mut cuts: Vec<f64> = Vec::new();
    let mut prev_y = lo;
    let mut prev_l = llr(lo);
    for i in 1..n {
        let y = lo + i as f64 * step;
        let l = llr(y);
        for &b in &boundaries {
            if (prev_l - b) * (l - b) < 0.0 {
                cuts.push(refine_crossing(&llr, prev_y, y, b));
            } else if prev_l == b {
                cuts.push(prev_y);
            }
        }
        prev_y = y;
        prev_l = l;
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

    // each piece maps to one level; integrate the conditional mixture
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend(&cuts);
    edges.push(f64::INFINITY);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = if a.is_infinite() && b.is_infinite() {
            0.0
        } else if a.is_infinite() {
            b - 1.0
        } else if b.is_infinite() {
            a + 1.0
        } else {
            0.5 * (a + b)
        };
        let level = spec.quantize(llr(mid));
        let idx = spec.index_of(level);
        for &(x, p) in &cond_points {
            let lo_b = if a.is_infinite() { x - 14.0 * sd } else { a };
            let hi_b = if b.is_infinite() { x + 14.0 * sd } else { b };
            density.pmf[idx] += p / total_prior * normal_interval(x, noise_var, lo_b, hi_b);
        }
    }
    density.normalize();
    density
}

fn refine_crossing<F: Fn(f64) -> f64>(llr: &F, mut lo: f64, mut hi: f64, boundary: f64) -> f64 {
    let mut f_lo = llr(lo) - boundary;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let f_mid = llr(mid) - boundary;
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}

fn monte_carlo_density(
    j: usize,
    signaling: &Signaling,
    snr: f64,
    spec: &QuantizerSpec,
    samples: usize,
    seed: u64,
) -> [QuantizedDensity; 2] {
    let noise_var = 1.0 / snr;
    let sd = noise_var.sqrt();
    let c = signaling.constellation();
    let mut rng = stream_rng(seed, 0xDE_0517);
    let mut cdf = Vec::with_capacity(c.size());
    let mut acc = 0.0;
    for k in 0..c.size() {
        acc += signaling.distribution().prob(k);
        cdf.push(acc);
    }
    let mut hist = [vec![0u64; spec.num_levels()], vec![0u64; spec.num_levels()]];
    let mut counts = [0u64; 2];
    for _ in 0..samples {
        let u: f64 = rng.gen();
        let k = cdf.partition_point(|&cc| cc < u).min(c.size() - 1);
        let z: f64 = rng.sample(StandardNormal);
        let y = signaling.scaled_point(k) + sd * z;
        let level = spec.quantize(demap_llr(y, j, signaling, noise_var));
        let b = c.label_bit(k, j) as usize;
        hist[b][spec.index_of(level)] += 1;
        counts[b] += 1;
    }
    [0, 1].map(|b| {
        let mut d = QuantizedDensity::new(
            hist[b]
                .iter()
                .map(|&h| h as f64 / counts[b].max(1) as f64)
                .collect(),
        );
        d.conditioned_on = Some(b == 1);
        d
    })
}

/// The two-input check-node table `T(a, b) = Q(r(a) ⊞ r(b))` on
/// reconstruction values, precomputed over the whole alphabet. Density
/// evolution and the quantized decoder share this table so their
/// arithmetic matches exactly.
#[derive(Debug, Clone)]
pub struct BoxplusTable {
    spec: QuantizerSpec,
    q: usize,
    /// Output level index for each input index pair, row-major.
    table: Vec<u16>,
}

impl BoxplusTable {
    pub fn new(spec: &QuantizerSpec) -> Self {
        let q = spec.num_levels();
        let mut table = vec![0u16; q * q];
        for ia in 0..q {
            let ra = spec.reconstruct(spec.level_of(ia));
            for ib in 0..q {
                let rb = spec.reconstruct(spec.level_of(ib));
                let out = spec.quantize(boxplus(ra, rb));
                table[ia * q + ib] = spec.index_of(out) as u16;
            }
        }
        BoxplusTable {
            spec: *spec,
            q,
            table,
        }
    }

    pub fn spec(&self) -> &QuantizerSpec {
        &self.spec
    }

    /// Table lookup on levels.
    pub fn combine_levels(&self, a: i32, b: i32) -> i32 {
        let idx = self.table[self.spec.index_of(a) * self.q + self.spec.index_of(b)];
        self.spec.level_of(idx as usize)
    }

    /// Density of `T(A, B)` for independent inputs.
    pub fn combine_densities(&self, a: &QuantizedDensity, b: &QuantizedDensity) -> QuantizedDensity {
        debug_assert_eq!(a.len(), self.q);
        debug_assert_eq!(b.len(), self.q);
        let mut out = vec![0.0; self.q];
        for (ia, &pa) in a.pmf().iter().enumerate() {
            if pa < 1e-300 {
                continue;
            }
            let row = &self.table[ia * self.q..(ia + 1) * self.q];
            for (ib, &pb) in b.pmf().iter().enumerate() {
                out[row[ib] as usize] += pa * pb;
            }
        }
        QuantizedDensity::new(out)
    }
}

/// Numerically stable two-input check-node rule
/// `2 atanh(tanh(x/2) tanh(y/2))`.
pub fn boxplus(x: f64, y: f64) -> f64 {
    let sign = x.signum() * y.signum();
    let mag = x.abs().min(y.abs());
    let corr = (-(x + y).abs()).exp().ln_1p() - (-(x - y).abs()).exp().ln_1p();
    sign * mag + corr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::db_to_linear;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn quantizer_geometry() {
        let spec = QuantizerSpec::new(3, 6.0).unwrap();
        assert_eq!(spec.num_levels(), 7);
        assert_eq!(spec.max_level(), 3);
        assert_relative_eq!(spec.delta(), 2.0);
        assert!(QuantizerSpec::new(1, 6.0).is_err());
        assert!(QuantizerSpec::new(3, 0.0).is_err());
    }

    #[test]
    fn quantize_reference_points() {
        let spec = QuantizerSpec::new(3, 6.0).unwrap();
        assert_eq!(spec.quantize(0.0), 0);
        assert_eq!(spec.quantize(2.5), 1);
        assert_eq!(spec.quantize(3.1), 2);
        assert_eq!(spec.quantize(-100.0), -3);
        assert_eq!(spec.quantize(100.0), 3);
        // boundary behavior: |l| ≤ Δ/2 is exactly zero
        assert_eq!(spec.quantize(1.0), 0);
        assert_eq!(spec.quantize(1.0 + 1e-12), 1);
        assert_eq!(spec.quantize(-1.0), 0);
        assert_eq!(spec.quantize(-1.0 - 1e-12), -1);
    }

    proptest! {
        #[test]
        fn quantizer_odd_symmetry(l in -100.0f64..100.0, bits in 2u32..9, clip in 0.5f64..20.0) {
            let spec = QuantizerSpec::new(bits, clip).unwrap();
            prop_assert_eq!(spec.quantize(-l), -spec.quantize(l));
        }

        #[test]
        fn quantizer_partitions_reals(l in -50.0f64..50.0, bits in 2u32..9, clip in 0.5f64..20.0) {
            let spec = QuantizerSpec::new(bits, clip).unwrap();
            let level = spec.quantize(l);
            prop_assert!(level.abs() <= spec.max_level());
            // the level's cell contains l
            let delta = spec.delta();
            let r = level as f64 * delta;
            if level.abs() < spec.max_level() {
                prop_assert!(l > r - 0.5 * delta - 1e-9 && l < r + 0.5 * delta + 1e-9);
            } else {
                prop_assert!(l.abs() > (level.abs() as f64 - 0.5) * delta - 1e-9);
            }
        }
    }

    #[test]
    fn boxplus_reference_value() {
        // r(1) = 2, r(2) = 4 at b=3, B=6: 2 atanh(tanh(1) tanh(2))
        let v = boxplus(2.0, 4.0);
        let exact = 2.0 * (1.0f64.tanh() * 2.0f64.tanh()).atanh();
        assert_relative_eq!(v, exact, epsilon = 1e-12);
        assert_relative_eq!(v, 1.8755476740947580, epsilon = 1e-12);
        let spec = QuantizerSpec::new(3, 6.0).unwrap();
        assert_eq!(spec.quantize(v), 1);
        let t = BoxplusTable::new(&spec);
        assert_eq!(t.combine_levels(1, 2), 1);
        // sign rule: two strongly negative inputs give a positive output
        assert!(t.combine_levels(-3, -3) > 0);
        // erasure absorbs
        for a in -3..=3 {
            assert_eq!(t.combine_levels(a, 0), 0);
        }
    }

    proptest! {
        #[test]
        fn boxplus_symmetric_and_contractive(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            let v = boxplus(x, y);
            prop_assert!((v - boxplus(y, x)).abs() < 1e-12);
            prop_assert!(v.abs() <= x.abs().min(y.abs()) + 1e-12);
        }
    }

    #[test]
    fn point_mass_and_mixing() {
        let spec = QuantizerSpec::new(4, 8.0).unwrap();
        let a = QuantizedDensity::point_mass(&spec, 3);
        let b = a.mirrored();
        assert_relative_eq!(b.mass(&spec, -3), 1.0);
        let m = mix_densities(&[a.clone(), b], &[1.0, 0.0]).unwrap();
        assert_eq!(m.pmf(), a.pmf());
        // equal mix of a density and its mirror is symmetric
        let c = QuantizedDensity::point_mass(&spec, 2);
        let m = mix_densities(&[c.clone(), c.mirrored()], &[0.5, 0.5]).unwrap();
        for i in 0..m.len() {
            assert_relative_eq!(m.pmf()[i], m.pmf()[m.len() - 1 - i]);
        }
        // weight-sum violation
        assert!(mix_densities(&[c.clone()], &[0.9]).is_err());
    }

    #[test]
    fn channel_density_high_snr_saturates() {
        let s = Signaling::uniform_ask(1);
        let spec = QuantizerSpec::new(3, 6.0).unwrap();
        let d = channel_density(1, &s, db_to_linear(25.0), &spec, DensityMethod::Quadrature, 2048);
        assert!(d.symmetrized.mass(&spec, 3) > 0.999999);
    }

    #[test]
    fn channel_density_low_snr_symmetric() {
        let s = Signaling::uniform_ask(1);
        let spec = QuantizerSpec::new(4, 8.0).unwrap();
        // vanishing snr: everything collapses onto the zero level, the
        // symmetric degenerate limit
        let d = channel_density(1, &s, db_to_linear(-60.0), &spec, DensityMethod::Quadrature, 2048);
        let pmf = d.symmetrized.pmf();
        for i in 0..pmf.len() {
            assert_relative_eq!(pmf[i], pmf[pmf.len() - 1 - i], epsilon = 1e-9);
        }
        assert!(d.symmetrized.mass(&spec, 0) > 1.0 - 1e-9);
        assert_relative_eq!(d.symmetrized.total(), 1.0, epsilon = 1e-12);
        // output symmetry of the channel itself: conditioning on bit one
        // mirrors conditioning on bit zero, so the adapter is the identity
        let d = channel_density(1, &s, db_to_linear(-25.0), &spec, DensityMethod::Quadrature, 2048);
        for i in 0..d.cond[0].len() {
            assert_relative_eq!(
                d.cond[0].pmf()[i],
                d.cond[1].mirrored().pmf()[i],
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn channel_density_mean_grows_with_snr() {
        let s = Signaling::uniform_ask(1);
        let spec = QuantizerSpec::new(4, 8.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for &db in &[-3.0, 0.0, 3.0, 6.0, 9.0] {
            let d = channel_density(1, &s, db_to_linear(db), &spec, DensityMethod::Quadrature, 4096);
            let mean = d.symmetrized.mean_reconstruction(&spec);
            assert!(mean > prev, "mean not increasing at {db} dB");
            prev = mean;
        }
    }

    #[test]
    fn quadrature_and_monte_carlo_agree() {
        let s = Signaling::uniform_ask(3);
        let spec = QuantizerSpec::new(4, 8.0).unwrap();
        let snr = db_to_linear(16.0);
        let quad = channel_density(1, &s, snr, &spec, DensityMethod::Quadrature, 8192);
        let mc = channel_density(
            1,
            &s,
            snr,
            &spec,
            DensityMethod::MonteCarlo {
                samples: 10_000_000,
                seed: 17,
            },
            0,
        );
        let tv: f64 = quad
            .symmetrized
            .pmf()
            .iter()
            .zip(mc.symmetrized.pmf())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-3, "total variation {tv}");
    }
}
