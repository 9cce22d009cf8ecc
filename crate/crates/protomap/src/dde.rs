//! Protograph-aware discretized density evolution for the quantized
//! sum-product decoder, with SNR-threshold search and clipping sweeps.
//!
//! Variable nodes convolve messages on the extended integer lattice and
//! saturate once at the end; check nodes reduce pairwise through the
//! forward-backward recursion on the shared two-input table, matching a
//! table-driven decoder edge for edge.

use rayon::prelude::*;
use thiserror::Error as ThisError;

use crate::bitmap::BitMapping;
use crate::protosys::BaseMatrix;
use crate::quantize::{
    channel_density, mix_densities, BoxplusTable, DensityMethod, QuantizedDensity, QuantizerSpec,
};
use crate::signaling::Signaling;
use crate::util::db_to_linear;

#[derive(Debug, Clone, ThisError)]
pub enum Error {
    #[error("mapping has {mapping} columns but the protograph transmits {types} types")]
    MappingMismatch { mapping: usize, types: usize },
    #[error("densities live on different alphabets")]
    AlphabetMismatch,
    #[error("no convergence sign change inside the expanded window")]
    NoBracket,
    #[error(transparent)]
    Quantize(#[from] crate::quantize::Error),
}

/// One density per directed protograph edge type.
#[derive(Debug, Clone)]
pub struct EdgeDensitySet {
    /// Nonzero entries (row, col, multiplicity) in row-major order.
    pub entries: Vec<(usize, usize, u32)>,
    pub v2c: Vec<QuantizedDensity>,
    pub c2v: Vec<QuantizedDensity>,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct DdeParams {
    pub max_iters: usize,
    pub target_residual: f64,
    /// Scan resolution of the quadrature channel densities.
    pub resolution: usize,
    /// Abort a probe when the residual improves by less than this relative
    /// amount over [`DdeParams::stall_window`] iterations; the recursion
    /// has then reached its fixed point numerically.
    pub stall_rel: f64,
    pub stall_window: usize,
}

impl Default for DdeParams {
    fn default() -> Self {
        DdeParams {
            max_iters: 100,
            target_residual: 1e-8,
            resolution: 8192,
            stall_rel: 1e-9,
            stall_window: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolveResult {
    pub converged: bool,
    pub iterations: usize,
    /// Final error residual per transmitted variable-node type.
    pub residuals: Vec<f64>,
    /// Total residual after every iteration.
    pub history: Vec<f64>,
}

/// Density on the extended integer lattice used inside variable nodes
/// before the single final saturation.
#[derive(Debug, Clone)]
struct Ext {
    lo: i32,
    p: Vec<f64>,
}

impl Ext {
    fn from_density(d: &QuantizedDensity, spec: &QuantizerSpec) -> Self {
        Ext {
            lo: -spec.max_level(),
            p: d.pmf().to_vec(),
        }
    }

    fn convolve(&self, other: &Ext) -> Ext {
        let mut out = vec![0.0; self.p.len() + other.p.len() - 1];
        for (i, &a) in self.p.iter().enumerate() {
            if a < 1e-300 {
                continue;
            }
            for (k, &b) in other.p.iter().enumerate() {
                out[i + k] += a * b;
            }
        }
        Ext {
            lo: self.lo + other.lo,
            p: out,
        }
    }

    fn saturate(&self, spec: &QuantizerSpec) -> QuantizedDensity {
        let max = spec.max_level();
        let mut pmf = vec![0.0; spec.num_levels()];
        for (k, &v) in self.p.iter().enumerate() {
            let level = (self.lo + k as i32).clamp(-max, max);
            pmf[spec.index_of(level)] += v;
        }
        QuantizedDensity::new(pmf)
    }
}

/// Variable-node update for one node type: each outgoing density is the
/// saturated lattice convolution of the channel density with the other
/// incoming densities.
pub fn vn_update(
    incoming: &[QuantizedDensity],
    channel: &QuantizedDensity,
    spec: &QuantizerSpec,
) -> Result<Vec<QuantizedDensity>, Error> {
    let q = spec.num_levels();
    if channel.len() != q || incoming.iter().any(|d| d.len() != q) {
        return Err(Error::AlphabetMismatch);
    }
    let elements: Vec<Ext> = std::iter::once(channel)
        .chain(incoming)
        .map(|d| Ext::from_density(d, spec))
        .collect();
    let (prefix, suffix) = prefix_suffix(&elements, |a, b| a.convolve(b));
    let out = (1..elements.len())
        .map(|k| exclude(&prefix, &suffix, k, |a, b| a.convolve(b)).saturate(spec))
        .collect();
    Ok(out)
}

/// Check-node update for one node type through the forward-backward
/// two-input table recursion; a single incoming density passes through
/// unchanged and an empty exclusion set yields certainty (positive
/// saturation).
pub fn cn_update(
    incoming: &[QuantizedDensity],
    table: &BoxplusTable,
) -> Result<Vec<QuantizedDensity>, Error> {
    let spec = table.spec();
    let q = spec.num_levels();
    if incoming.iter().any(|d| d.len() != q) {
        return Err(Error::AlphabetMismatch);
    }
    if incoming.len() == 1 {
        return Ok(vec![QuantizedDensity::point_mass(spec, spec.max_level())]);
    }
    let elements: Vec<QuantizedDensity> = incoming.to_vec();
    let (prefix, suffix) = prefix_suffix(&elements, |a, b| table.combine_densities(a, b));
    let out = (0..elements.len())
        .map(|k| exclude(&prefix, &suffix, k, |a, b| table.combine_densities(a, b)))
        .collect();
    Ok(out)
}

fn prefix_suffix<T: Clone, F: Fn(&T, &T) -> T>(elements: &[T], combine: F) -> (Vec<T>, Vec<T>) {
    let n = elements.len();
    let mut prefix = Vec::with_capacity(n);
    for e in elements {
        let next = match prefix.last() {
            None => e.clone(),
            Some(p) => combine(p, e),
        };
        prefix.push(next);
    }
    let mut suffix: Vec<T> = Vec::with_capacity(n);
    for e in elements.iter().rev() {
        let next = match suffix.last() {
            None => e.clone(),
            Some(s) => combine(e, s),
        };
        suffix.push(next);
    }
    suffix.reverse();
    (prefix, suffix)
}

fn exclude<T: Clone, F: Fn(&T, &T) -> T>(prefix: &[T], suffix: &[T], k: usize, combine: F) -> T {
    let n = prefix.len();
    match (k.checked_sub(1), k + 1 < n) {
        (None, true) => suffix[1].clone(),
        (Some(p), false) => prefix[p].clone(),
        (Some(p), true) => combine(&prefix[p], &suffix[k + 1]),
        (None, false) => unreachable!("exclusion over a single element"),
    }
}

/// Per-column channel densities: transmitted types mix the symmetrized
/// bit-level densities by their mapping column, punctured types start at
/// the exact zero level, shortened types at positive saturation.
fn column_channels(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    snr: f64,
    spec: &QuantizerSpec,
    resolution: usize,
) -> Result<Vec<QuantizedDensity>, Error> {
    let transmitted = base.transmitted_columns();
    if mapping.n_types() != transmitted.len() {
        return Err(Error::MappingMismatch {
            mapping: mapping.n_types(),
            types: transmitted.len(),
        });
    }
    let m = signaling.bits_per_symbol();
    let level_densities: Vec<QuantizedDensity> = (1..=m)
        .map(|j| {
            channel_density(j, signaling, snr, spec, DensityMethod::Quadrature, resolution)
                .symmetrized
        })
        .collect();
    let mut channels: Vec<QuantizedDensity> = Vec::with_capacity(base.cols());
    let mut t = 0usize;
    for i in 0..base.cols() {
        if base.punctured().contains(&i) {
            channels.push(QuantizedDensity::point_mass(spec, 0));
        } else if base.shortened().contains(&i) {
            channels.push(QuantizedDensity::point_mass(spec, spec.max_level()));
        } else {
            let weights = mapping.column(t);
            channels.push(mix_densities(&level_densities, &weights)?);
            t += 1;
        }
    }
    Ok(channels)
}

/// Runs density evolution at one SNR. Convergence means the summed error
/// residual over the transmitted variable-node types (negative posterior
/// mass plus half the mass at level zero) falls below the target within
/// the iteration budget.
pub fn evolve(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    snr: f64,
    spec: &QuantizerSpec,
    params: &DdeParams,
) -> Result<EvolveResult, Error> {
    let table = BoxplusTable::new(spec);
    evolve_with_table(base, mapping, signaling, snr, spec, params, &table)
}

/// [`evolve`] with a caller-provided table so threshold searches reuse it.
pub fn evolve_with_table(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    snr: f64,
    spec: &QuantizerSpec,
    params: &DdeParams,
    table: &BoxplusTable,
) -> Result<EvolveResult, Error> {
    let channels = column_channels(base, mapping, signaling, snr, spec, params.resolution)?;
    let entries: Vec<(usize, usize, u32)> = base
        .nonzero_entries()
        .map(|(j, i)| (j, i, base.entry(j, i)))
        .collect();
    let mut state = EdgeDensitySet {
        v2c: entries
            .iter()
            .map(|&(_, i, _)| channels[i].clone())
            .collect(),
        c2v: entries
            .iter()
            .map(|_| QuantizedDensity::point_mass(spec, 0))
            .collect(),
        entries,
        iteration: 0,
    };
    let transmitted = base.transmitted_columns();
    let mut history: Vec<f64> = Vec::with_capacity(params.max_iters);
    let mut residuals = vec![1.0; transmitted.len()];

    // per-row and per-column expanded element indices
    let row_members: Vec<Vec<usize>> = (0..base.rows())
        .map(|j| {
            state
                .entries
                .iter()
                .enumerate()
                .filter(|(_, &(r, _, _))| r == j)
                .flat_map(|(e, &(_, _, mult))| std::iter::repeat(e).take(mult as usize))
                .collect()
        })
        .collect();
    let col_members: Vec<Vec<usize>> = (0..base.cols())
        .map(|i| {
            state
                .entries
                .iter()
                .enumerate()
                .filter(|(_, &(_, c, _))| c == i)
                .flat_map(|(e, &(_, _, mult))| std::iter::repeat(e).take(mult as usize))
                .collect()
        })
        .collect();

    let mut converged = false;
    for iter in 1..=params.max_iters {
        state.iteration = iter;
        // check-node pass
        let mut c2v_next = state.c2v.clone();
        for members in &row_members {
            let elements: Vec<QuantizedDensity> =
                members.iter().map(|&e| state.v2c[e].clone()).collect();
            if elements.len() == 1 {
                c2v_next[members[0]] =
                    QuantizedDensity::point_mass(spec, spec.max_level());
                continue;
            }
            let (prefix, suffix) =
                prefix_suffix(&elements, |a, b| table.combine_densities(a, b));
            let mut done = vec![false; state.v2c.len()];
            for (k, &e) in members.iter().enumerate() {
                if !done[e] {
                    c2v_next[e] =
                        exclude(&prefix, &suffix, k, |a, b| table.combine_densities(a, b));
                    done[e] = true;
                }
            }
        }
        state.c2v = c2v_next;

        // variable-node pass and posterior residual
        let mut v2c_next = state.v2c.clone();
        let mut total_residual = 0.0;
        let mut t = 0usize;
        for (i, members) in col_members.iter().enumerate() {
            let elements: Vec<Ext> = std::iter::once(Ext::from_density(&channels[i], spec))
                .chain(
                    members
                        .iter()
                        .map(|&e| Ext::from_density(&state.c2v[e], spec)),
                )
                .collect();
            let (prefix, suffix) = prefix_suffix(&elements, |a, b| a.convolve(b));
            let mut done = vec![false; state.v2c.len()];
            for (k, &e) in members.iter().enumerate() {
                if !done[e] {
                    let mut d =
                        exclude(&prefix, &suffix, k + 1, |a, b| a.convolve(b)).saturate(spec);
                    d.normalize();
                    v2c_next[e] = d;
                    done[e] = true;
                }
            }
            if base.is_transmitted(i) {
                let mut posterior = prefix.last().unwrap().saturate(spec);
                posterior.normalize();
                residuals[t] = posterior.error_mass(spec);
                total_residual += residuals[t];
                t += 1;
            }
        }
        state.v2c = v2c_next;
        history.push(total_residual);

        if total_residual < params.target_residual {
            converged = true;
            break;
        }
        // fixed-point stall: the residual has stopped moving
        if history.len() > params.stall_window {
            let prev = history[history.len() - 1 - params.stall_window];
            let now = *history.last().unwrap();
            if (prev - now).abs() <= params.stall_rel * prev.max(1e-300) {
                break;
            }
        }
    }
    Ok(EvolveResult {
        converged,
        iterations: state.iteration,
        residuals,
        history,
    })
}

/// One probe of a threshold search.
#[derive(Debug, Clone)]
pub struct ThresholdProbe {
    pub snr_db: f64,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub threshold_db: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub probes: Vec<ThresholdProbe>,
}

#[derive(Debug, Clone)]
pub struct ThresholdOptions {
    pub window_db: (f64, f64),
    pub tol_db: f64,
    pub params: DdeParams,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            window_db: (5.0, 25.0),
            tol_db: 0.01,
            params: DdeParams::default(),
        }
    }
}

/// Bisection on SNR with [`evolve`] as the oracle. The window expands by
/// up to 10 dB per side when it fails to straddle the threshold.
pub fn threshold(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    spec: &QuantizerSpec,
    opts: &ThresholdOptions,
) -> Result<ThresholdResult, Error> {
    let table = BoxplusTable::new(spec);
    let mut probes: Vec<ThresholdProbe> = Vec::new();
    let run = |db: f64, probes: &mut Vec<ThresholdProbe>| -> Result<bool, Error> {
        let r = evolve_with_table(
            base,
            mapping,
            signaling,
            db_to_linear(db),
            spec,
            &opts.params,
            &table,
        )?;
        probes.push(ThresholdProbe {
            snr_db: db,
            converged: r.converged,
            residual: *r.history.last().unwrap_or(&1.0),
            iterations: r.iterations,
        });
        Ok(r.converged)
    };
    let (mut lo, mut hi) = opts.window_db;
    let mut expand = 0.0;
    while !run(hi, &mut probes)? {
        expand += 2.0;
        if expand > 10.0 {
            return Err(Error::NoBracket);
        }
        hi += 2.0;
    }
    while run(lo, &mut probes)? {
        expand += 2.0;
        if expand > 10.0 {
            return Err(Error::NoBracket);
        }
        lo -= 2.0;
    }
    while hi - lo > opts.tol_db {
        let mid = 0.5 * (lo + hi);
        if run(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // monotonicity audit over the probe history
    let mut sorted = probes.clone();
    sorted.sort_by(|a, b| a.snr_db.partial_cmp(&b.snr_db).unwrap());
    for w in sorted.windows(2) {
        if w[0].converged && !w[1].converged {
            eprintln!(
                "dde: non-monotone convergence between {:.3} and {:.3} dB",
                w[0].snr_db, w[1].snr_db
            );
        }
    }
    let iterations_used = probes
        .iter()
        .filter(|p| p.converged)
        .map(|p| p.iterations)
        .last()
        .unwrap_or(0);
    Ok(ThresholdResult {
        threshold_db: 0.5 * (lo + hi),
        iterations_used,
        converged: true,
        probes,
    })
}

/// Threshold as a function of the clipping value at fixed bit width.
/// Returns `(clip, threshold_db)` per grid point plus the argmin clip.
pub fn clipping_sweep(
    base: &BaseMatrix,
    mapping: &BitMapping,
    signaling: &Signaling,
    bits: u32,
    clip_grid: &[f64],
    opts: &ThresholdOptions,
) -> Result<(Vec<(f64, f64)>, f64), Error> {
    let results: Vec<(f64, f64)> = clip_grid
        .par_iter()
        .map(|&clip| -> Result<(f64, f64), Error> {
            let spec = QuantizerSpec::new(bits, clip)?;
            threshold(base, mapping, signaling, &spec, opts).map(|r| (clip, r.threshold_db))
        })
        .collect::<Result<_, _>>()?;
    let argmin = results
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|&(clip, _)| clip)
        .unwrap();
    Ok((results, argmin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitmap::{reference_mapping, MappingMode};
    use approx::assert_relative_eq;

    fn spec_b4() -> QuantizerSpec {
        QuantizerSpec::new(4, 8.0).unwrap()
    }

    #[test]
    fn vn_degree_one_passes_channel_through() {
        let spec = spec_b4();
        let channel = QuantizedDensity::point_mass(&spec, 2);
        let incoming = [QuantizedDensity::point_mass(&spec, 0)];
        let out = vn_update(&incoming, &channel, &spec).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0], channel);
    }

    #[test]
    fn vn_point_masses_add_on_lattice() {
        let spec = spec_b4();
        // channel at +1, one other incoming at +2: out = point mass at +3
        let channel = QuantizedDensity::point_mass(&spec, 1);
        let incoming = [
            QuantizedDensity::point_mass(&spec, 2),
            QuantizedDensity::point_mass(&spec, 2),
        ];
        let out = vn_update(&incoming, &channel, &spec).unwrap();
        assert_relative_eq!(out[0].mass(&spec, 3), 1.0);
        assert_relative_eq!(out[1].mass(&spec, 3), 1.0);
    }

    #[test]
    fn vn_saturation_absorbs() {
        let spec = spec_b4();
        let channel = QuantizedDensity::point_mass(&spec, spec.max_level());
        let incoming = [
            QuantizedDensity::point_mass(&spec, -1),
            QuantizedDensity::point_mass(&spec, 7),
        ];
        let out = vn_update(&incoming, &channel, &spec).unwrap();
        // 7 + 7 - 1 exceeds +7: saturates
        assert_relative_eq!(out[0].mass(&spec, spec.max_level()), 1.0);
    }

    #[test]
    fn cn_erasure_absorbs_and_passthrough() {
        let spec = spec_b4();
        let table = BoxplusTable::new(&spec);
        let d = QuantizedDensity::point_mass(&spec, 3);
        let erasure = QuantizedDensity::point_mass(&spec, 0);
        // degree 3: the edge opposite the erasure sees it absorb everything
        let out = cn_update(&[d.clone(), d.clone(), erasure.clone()], &table).unwrap();
        assert_relative_eq!(out[0].mass(&spec, 0), 1.0);
        // degree 2: single-input exclusion passes through exactly
        let out = cn_update(&[d.clone(), erasure], &table).unwrap();
        assert_eq!(out[1], d);
        assert_relative_eq!(out[0].mass(&spec, 0), 1.0);
        // contraction in mean reconstruction for a non-degenerate partner
        let soft = {
            let mut pmf = vec![0.0; spec.num_levels()];
            pmf[spec.index_of(2)] = 0.7;
            pmf[spec.index_of(-1)] = 0.3;
            QuantizedDensity::new(pmf)
        };
        let out = cn_update(&[soft.clone(), d], &table).unwrap();
        assert!(
            out[1].mean_reconstruction(&spec) <= soft.mean_reconstruction(&spec) + 1e-12
        );
    }

    fn bpsk_setup() -> (BaseMatrix, BitMapping, Signaling) {
        let base = BaseMatrix::new(vec![vec![3, 3]], 1, [], []).unwrap();
        let mapping = reference_mapping(1, 2, MappingMode::Uniform, [], vec![0, 1]).unwrap();
        (base, mapping, Signaling::uniform_ask(1))
    }

    #[test]
    fn evolve_extremes() {
        let (base, mapping, s) = bpsk_setup();
        let spec = QuantizerSpec::new(8, 15.0).unwrap();
        let params = DdeParams {
            resolution: 2048,
            ..Default::default()
        };
        let high = evolve(&base, &mapping, &s, db_to_linear(6.0), &spec, &params).unwrap();
        assert!(high.converged, "residual history {:?}", high.history.last());
        let low = evolve(&base, &mapping, &s, db_to_linear(0.0), &spec, &params).unwrap();
        assert!(!low.converged);
    }

    #[test]
    fn densities_stay_normalized_over_100_iterations() {
        let (base, mapping, s) = bpsk_setup();
        let spec = QuantizerSpec::new(3, 6.0).unwrap();
        // run just below threshold so the recursion keeps moving
        let params = DdeParams {
            max_iters: 100,
            target_residual: 0.0,
            resolution: 2048,
            stall_rel: 0.0,
            stall_window: usize::MAX,
        };
        let r = evolve(&base, &mapping, &s, db_to_linear(1.0), &spec, &params).unwrap();
        assert_eq!(r.iterations, 100);
        for &h in &r.history {
            assert!(h.is_finite() && (0.0..=2.0 + 1e-9).contains(&h));
        }
    }

    #[test]
    fn residual_non_increasing_above_threshold() {
        let (base, mapping, s) = bpsk_setup();
        let spec = QuantizerSpec::new(8, 15.0).unwrap();
        let params = DdeParams {
            resolution: 2048,
            ..Default::default()
        };
        let r = evolve(&base, &mapping, &s, db_to_linear(1.6), &spec, &params).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "residual increased: {:?}", w);
        }
    }

    #[test]
    fn threshold_regular_36_bpsk_matches_high_resolution_oracle() {
        let (base, mapping, s) = bpsk_setup();
        // high-resolution oracle: 2048-bin quantization standing in for
        // unquantized density evolution (the (3,6) literature threshold is
        // sigma* ≈ 0.881, i.e. about 1.10 dB in this normalization)
        let oracle_spec = QuantizerSpec::new(11, 25.0).unwrap();
        let opts = ThresholdOptions {
            window_db: (0.5, 2.5),
            tol_db: 0.01,
            params: DdeParams {
                resolution: 4096,
                ..Default::default()
            },
        };
        let oracle = threshold(&base, &mapping, &s, &oracle_spec, &opts).unwrap();
        assert!(
            (oracle.threshold_db - 1.10).abs() < 0.08,
            "oracle threshold {} dB",
            oracle.threshold_db
        );
        let spec = QuantizerSpec::new(8, 15.0).unwrap();
        let th = threshold(&base, &mapping, &s, &spec, &opts).unwrap();
        assert!(
            (th.threshold_db - oracle.threshold_db).abs() <= 0.05,
            "8-bit {} vs oracle {}",
            th.threshold_db,
            oracle.threshold_db
        );
    }

    #[test]
    fn evolve_monotone_in_snr_over_probes() {
        let (base, mapping, s) = bpsk_setup();
        let spec = QuantizerSpec::new(4, 8.0).unwrap();
        let opts = ThresholdOptions {
            window_db: (0.5, 3.5),
            ..Default::default()
        };
        let r = threshold(&base, &mapping, &s, &spec, &opts).unwrap();
        let mut probes = r.probes.clone();
        probes.sort_by(|a, b| a.snr_db.partial_cmp(&b.snr_db).unwrap());
        for w in probes.windows(2) {
            assert!(
                !w[0].converged || w[1].converged,
                "convergence not monotone in SNR"
            );
        }
    }

    #[test]
    fn punctured_and_shortened_channels() {
        // degree-2 VN punctured, partner shortened: still converges at
        // high SNR because the shortened type injects certainty
        let base = BaseMatrix::new(vec![vec![2, 1, 1]], 2, [0], [1]).unwrap();
        let mapping = reference_mapping(1, 1, MappingMode::Uniform, [], vec![2]).unwrap();
        let s = Signaling::uniform_ask(1);
        let spec = QuantizerSpec::new(4, 8.0).unwrap();
        let params = DdeParams {
            resolution: 1024,
            ..Default::default()
        };
        let r = evolve(&base, &mapping, &s, db_to_linear(15.0), &spec, &params).unwrap();
        assert!(r.converged);
    }
}
