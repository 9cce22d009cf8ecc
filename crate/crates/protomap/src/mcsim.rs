//! Finite-length Monte-Carlo validation: floating-point and quantized
//! sum-product decoders, the full frame pipeline and required-SNR search.
//!
//! Frames are independent work units with counter-based per-frame RNG
//! streams, so parallel and serial runs aggregate to identical results.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error as ThisError;

use crate::bitmap::{BitMapping, Interleaver, MappingMode};
use crate::protosys::{build_encoder, BaseMatrix, LiftedCode, SystematicEncoder};
use crate::quantize::{boxplus, BoxplusTable, QuantizerSpec};
use crate::signaling::{demap_llr, pas_assemble, PasLayout, Signaling};
use crate::util::{db_to_linear, stream_rng, LLR_CLAMP};

#[derive(Debug, Clone, ThisError)]
pub enum Error {
    #[error("llr vector has {got} entries, the code transmits {want}")]
    LlrLength { got: usize, want: usize },
    #[error("chain setup failed: {0}")]
    Setup(String),
    #[error("required-SNR probes are non-monotone beyond confidence")]
    NonMonotoneProbes,
    #[error(transparent)]
    Protosys(#[from] crate::protosys::Error),
    #[error(transparent)]
    Bitmap(#[from] crate::bitmap::Error),
    #[error(transparent)]
    Signaling(#[from] crate::signaling::Error),
}

#[derive(Debug, Clone)]
pub enum DecoderKind {
    FloatSpa,
    QuantizedSpa(QuantizerSpec),
}

#[derive(Debug, Clone)]
pub struct DecoderConfig {
    pub kind: DecoderKind,
    pub max_iterations: usize,
}

impl DecoderConfig {
    pub fn float(max_iterations: usize) -> Self {
        DecoderConfig {
            kind: DecoderKind::FloatSpa,
            max_iterations,
        }
    }

    pub fn quantized(spec: QuantizerSpec, max_iterations: usize) -> Self {
        DecoderConfig {
            kind: DecoderKind::QuantizedSpa(spec),
            max_iterations,
        }
    }
}

/// Flooding-schedule sum-product decoder over a lifted code. The
/// quantized variant uses the same integer alphabet and two-input table
/// as density evolution.
pub struct Decoder {
    code: LiftedCode,
    config: DecoderConfig,
    table: Option<BoxplusTable>,
    /// Edge array in row-major (check) order.
    row_ptr: Vec<usize>,
    edge_col: Vec<usize>,
    /// Edges of each column (indices into the row-major edge array).
    col_edges: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub decisions: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
}

impl Decoder {
    pub fn new(code: &LiftedCode, config: DecoderConfig) -> Self {
        let mut row_ptr = Vec::with_capacity(code.num_rows() + 1);
        let mut edge_col = Vec::new();
        row_ptr.push(0);
        for r in 0..code.num_rows() {
            edge_col.extend_from_slice(code.row_cols(r));
            row_ptr.push(edge_col.len());
        }
        let mut col_edges: Vec<Vec<usize>> = vec![Vec::new(); code.num_cols()];
        for r in 0..code.num_rows() {
            for e in row_ptr[r]..row_ptr[r + 1] {
                col_edges[edge_col[e]].push(e);
            }
        }
        let table = match &config.kind {
            DecoderKind::QuantizedSpa(spec) => Some(BoxplusTable::new(spec)),
            DecoderKind::FloatSpa => None,
        };
        Decoder {
            code: code.clone(),
            config,
            table,
            row_ptr,
            edge_col,
            col_edges,
        }
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    /// Decodes from per-transmitted-bit channel LLRs; punctured positions
    /// enter as exact zeros and shortened positions as positive
    /// saturation.
    pub fn decode_transmitted(&self, llrs: &[f64]) -> Result<DecodeOutcome, Error> {
        if llrs.len() != self.code.n_transmitted() {
            return Err(Error::LlrLength {
                got: llrs.len(),
                want: self.code.n_transmitted(),
            });
        }
        let mut full = vec![0.0f64; self.code.num_cols()];
        let mask = self.code.transmitted_mask();
        let shortened = self.code.shortened_mask();
        let mut it = llrs.iter();
        for (c, &m) in mask.iter().enumerate() {
            full[c] = if m {
                *it.next().unwrap()
            } else if shortened[c] {
                LLR_CLAMP
            } else {
                0.0
            };
        }
        Ok(self.decode_full(&full))
    }

    /// Decodes from a full-length channel LLR vector (one entry per code
    /// bit, including punctured and shortened positions).
    pub fn decode_full(&self, channel_llrs: &[f64]) -> DecodeOutcome {
        match &self.config.kind {
            DecoderKind::FloatSpa => self.decode_float(channel_llrs),
            DecoderKind::QuantizedSpa(spec) => self.decode_quantized(channel_llrs, spec),
        }
    }

    fn hard_decisions(posterior: &[f64]) -> Vec<bool> {
        // positive LLR decides bit 0; ties break to bit 1
        posterior.iter().map(|&l| l <= 0.0).collect()
    }

    fn decode_float(&self, channel: &[f64]) -> DecodeOutcome {
        let n_edges = self.edge_col.len();
        let mut v2c = vec![0.0f64; n_edges];
        let mut c2v = vec![0.0f64; n_edges];
        for (e, &c) in self.edge_col.iter().enumerate() {
            v2c[e] = channel[c];
        }
        let mut decisions = Self::hard_decisions(channel);
        if self.code.syndrome_ok(&decisions) {
            return DecodeOutcome {
                decisions,
                converged: true,
                iterations: 0,
            };
        }
        let mut scratch: Vec<f64> = Vec::new();
        for iter in 1..=self.config.max_iterations {
            // check pass: forward-backward boxplus per row
            for r in 0..self.row_ptr.len() - 1 {
                let span = self.row_ptr[r]..self.row_ptr[r + 1];
                let d = span.len();
                if d == 1 {
                    c2v[span.start] = LLR_CLAMP;
                    continue;
                }
                scratch.clear();
                scratch.resize(2 * d, 0.0);
                let (fwd, bwd) = scratch.split_at_mut(d);
                let mut acc = v2c[span.start];
                fwd[0] = acc;
                for k in 1..d {
                    acc = boxplus(acc, v2c[span.start + k]);
                    fwd[k] = acc;
                }
                let mut acc = v2c[span.end - 1];
                bwd[d - 1] = acc;
                for k in (0..d - 1).rev() {
                    acc = boxplus(v2c[span.start + k], acc);
                    bwd[k] = acc;
                }
                for k in 0..d {
                    c2v[span.start + k] = if k == 0 {
                        bwd[1]
                    } else if k == d - 1 {
                        fwd[d - 2]
                    } else {
                        boxplus(fwd[k - 1], bwd[k + 1])
                    };
                }
            }
            // variable pass and posterior
            let mut posterior = channel.to_vec();
            for (col, edges) in self.col_edges.iter().enumerate() {
                let sum: f64 = edges.iter().map(|&e| c2v[e]).sum();
                posterior[col] = (posterior[col] + sum).clamp(-LLR_CLAMP, LLR_CLAMP);
                for &e in edges {
                    v2c[e] = (channel[col] + sum - c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
                }
            }
            decisions = Self::hard_decisions(&posterior);
            if self.code.syndrome_ok(&decisions) {
                return DecodeOutcome {
                    decisions,
                    converged: true,
                    iterations: iter,
                };
            }
        }
        DecodeOutcome {
            decisions,
            converged: false,
            iterations: self.config.max_iterations,
        }
    }

    fn decode_quantized(&self, channel: &[f64], spec: &QuantizerSpec) -> DecodeOutcome {
        let table = self.table.as_ref().expect("table built with config");
        let max = spec.max_level();
        let ch: Vec<i32> = channel.iter().map(|&l| spec.quantize(l)).collect();
        let n_edges = self.edge_col.len();
        let mut v2c = vec![0i32; n_edges];
        let mut c2v = vec![0i32; n_edges];
        for (e, &c) in self.edge_col.iter().enumerate() {
            v2c[e] = ch[c];
        }
        let mut decisions: Vec<bool> = ch.iter().map(|&l| l <= 0).collect();
        if self.code.syndrome_ok(&decisions) {
            return DecodeOutcome {
                decisions,
                converged: true,
                iterations: 0,
            };
        }
        let mut scratch: Vec<i32> = Vec::new();
        for iter in 1..=self.config.max_iterations {
            for r in 0..self.row_ptr.len() - 1 {
                let span = self.row_ptr[r]..self.row_ptr[r + 1];
                let d = span.len();
                if d == 1 {
                    c2v[span.start] = max;
                    continue;
                }
                scratch.clear();
                scratch.resize(2 * d, 0);
                let (fwd, bwd) = scratch.split_at_mut(d);
                let mut acc = v2c[span.start];
                fwd[0] = acc;
                for k in 1..d {
                    acc = table.combine_levels(acc, v2c[span.start + k]);
                    fwd[k] = acc;
                }
                let mut acc = v2c[span.end - 1];
                bwd[d - 1] = acc;
                for k in (0..d - 1).rev() {
                    acc = table.combine_levels(v2c[span.start + k], acc);
                    bwd[k] = acc;
                }
                for k in 0..d {
                    c2v[span.start + k] = if k == 0 {
                        bwd[1]
                    } else if k == d - 1 {
                        fwd[d - 2]
                    } else {
                        table.combine_levels(fwd[k - 1], bwd[k + 1])
                    };
                }
            }
            let mut posterior = ch.clone();
            for (col, edges) in self.col_edges.iter().enumerate() {
                let sum: i32 = edges.iter().map(|&e| c2v[e]).sum();
                let total = (ch[col] + sum).clamp(-max, max);
                posterior[col] = total;
                for &e in edges {
                    v2c[e] = (ch[col] + sum - c2v[e]).clamp(-max, max);
                }
            }
            decisions = posterior.iter().map(|&l| l <= 0).collect();
            if self.code.syndrome_ok(&decisions) {
                return DecodeOutcome {
                    decisions,
                    converged: true,
                    iterations: iter,
                };
            }
        }
        DecodeOutcome {
            decisions,
            converged: false,
            iterations: self.config.max_iterations,
        }
    }
}

/// The full simulation chain for one (code, mapping, signaling, decoder)
/// configuration.
pub struct Chain {
    pub base: BaseMatrix,
    pub code: LiftedCode,
    pub encoder: SystematicEncoder,
    pub mapping: BitMapping,
    pub interleaver: Interleaver,
    pub signaling: Signaling,
    pub decoder: Decoder,
    pub pas_layout: Option<PasLayout>,
    /// Label value → point index lookup.
    label_to_point: Vec<usize>,
}

impl Chain {
    pub fn new(
        base: BaseMatrix,
        seed: u64,
        mapping: BitMapping,
        signaling: Signaling,
        decoder_config: DecoderConfig,
    ) -> Result<Self, Error> {
        let code = crate::protosys::lift(&base, seed)?;
        let encoder = build_encoder(&code, &base)?;
        let interleaver = Interleaver::new(&mapping, &code)?;
        let pas_layout = if signaling.is_pas() {
            if mapping.mode() != MappingMode::Pas {
                return Err(Error::Setup(
                    "shaped signaling needs a shaped-mode mapping".into(),
                ));
            }
            Some(PasLayout::new(&signaling, &encoder, &interleaver)?)
        } else {
            None
        };
        let m = signaling.bits_per_symbol();
        if interleaver.levels() != m {
            return Err(Error::Setup(format!(
                "mapping has {} levels but the constellation carries {m} bits",
                interleaver.levels()
            )));
        }
        let c = signaling.constellation();
        let mut label_to_point = vec![0usize; c.size()];
        for label in 0..c.size() as u32 {
            label_to_point[label as usize] = c.point_with_label(label);
        }
        let decoder = Decoder::new(&code, decoder_config);
        Ok(Chain {
            base,
            code,
            encoder,
            mapping,
            interleaver,
            signaling,
            decoder,
            pas_layout,
            label_to_point,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.interleaver.n_symbols()
    }

    /// Information bits per frame the error counting refers to.
    pub fn info_bits_per_frame(&self) -> usize {
        match &self.pas_layout {
            Some(layout) => layout.dm_input_bits + layout.info_sign_symbols.len(),
            None => self.encoder.information_length(),
        }
    }

    /// Simulates one frame at the given noise variance. Deterministic in
    /// (master seed, frame index) regardless of scheduling.
    pub fn simulate_frame(&self, noise_var: f64, seed: u64, frame: u64) -> FrameOutcome {
        let mut rng = stream_rng(seed, frame);
        let m = self.signaling.bits_per_symbol();

        // transmitted codeword and symbols
        let (codeword, symbols, truth) = match &self.pas_layout {
            None => {
                let info: Vec<bool> = (0..self.encoder.information_length())
                    .map(|_| rng.gen())
                    .collect();
                let codeword = self.encoder.encode(&info);
                let symbols = self.modulate(&codeword);
                (codeword, symbols, FrameTruth::Uniform { info })
            }
            Some(layout) => {
                let dm_bits: Vec<bool> = (0..layout.dm_input_bits).map(|_| rng.gen()).collect();
                let sign_bits: Vec<bool> = (0..layout.info_sign_symbols.len())
                    .map(|_| rng.gen())
                    .collect();
                let frame = pas_assemble(
                    &dm_bits,
                    &sign_bits,
                    layout,
                    &self.signaling,
                    &self.encoder,
                    &self.interleaver,
                )
                .expect("layout-validated assembly");
                (
                    frame.codeword,
                    frame.symbols,
                    FrameTruth::Pas { dm_bits, sign_bits },
                )
            }
        };

        // AWGN and demapping
        let sd = noise_var.sqrt();
        let mut llrs = vec![0.0f64; self.code.num_cols()];
        for (s, &x) in symbols.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let y = x + sd * z;
            for j in 1..=m {
                llrs[self.interleaver.position(j, s)] =
                    demap_llr(y, j, &self.signaling, noise_var);
            }
        }
        for &col in self.base.shortened() {
            for c in self.code.columns_of_type(col) {
                llrs[c] = LLR_CLAMP;
            }
        }
        // punctured positions keep their exact zero

        let outcome = self.decoder.decode_full(&llrs);
        let (bit_errors, info_bits) = self.count_errors(&truth, &codeword, &outcome.decisions);
        FrameOutcome {
            bit_errors,
            info_bits,
            frame_error: bit_errors > 0,
            converged: outcome.converged,
            iterations: outcome.iterations,
        }
    }

    fn modulate(&self, codeword: &[bool]) -> Vec<f64> {
        let m = self.signaling.bits_per_symbol();
        (0..self.n_symbols())
            .map(|s| {
                let mut label = 0u32;
                for j in 1..=m {
                    label = (label << 1) | codeword[self.interleaver.position(j, s)] as u32;
                }
                self.signaling.scaled_point(self.label_to_point[label as usize])
            })
            .collect()
    }

    fn count_errors(
        &self,
        truth: &FrameTruth,
        sent_codeword: &[bool],
        decisions: &[bool],
    ) -> (u64, usize) {
        match truth {
            FrameTruth::Uniform { info } => {
                let errs = self
                    .encoder
                    .information_positions()
                    .iter()
                    .zip(info)
                    .filter(|(&pos, &bit)| decisions[pos] != bit)
                    .count() as u64;
                (errs, info.len())
            }
            FrameTruth::Pas { dm_bits, sign_bits } => {
                let layout = self.pas_layout.as_ref().unwrap();
                let m = self.signaling.bits_per_symbol();
                let c = self.signaling.constellation();
                // recover amplitude indices from the decoded amplitude bits
                let amp_of_label: std::collections::HashMap<u32, usize> = (0..c.amplitudes().len())
                    .map(|a| (c.amplitude_label(a), a))
                    .collect();
                let mut amps = Vec::with_capacity(self.n_symbols());
                for s in 0..self.n_symbols() {
                    let mut label = 0u32;
                    for j in 2..=m {
                        label = (label << 1)
                            | decisions[self.interleaver.position(j, s)] as u32;
                    }
                    amps.push(amp_of_label[&label]);
                }
                let mut errs = 0u64;
                match crate::signaling::ccdm_decode(&amps, &layout.composition) {
                    Ok(decoded_dm) => {
                        errs += decoded_dm
                            .iter()
                            .zip(dm_bits)
                            .filter(|(a, b)| a != b)
                            .count() as u64;
                    }
                    Err(_) => {
                        // composition destroyed: fall back to counting the
                        // raw amplitude-bit errors against the sent codeword
                        for s in 0..self.n_symbols() {
                            for j in 2..=m {
                                let pos = self.interleaver.position(j, s);
                                if decisions[pos] != sent_codeword[pos] {
                                    errs += 1;
                                }
                            }
                        }
                    }
                }
                for (&sym, &bit) in layout.info_sign_symbols.iter().zip(sign_bits) {
                    let pos = self.interleaver.position(1, sym);
                    if decisions[pos] != bit {
                        errs += 1;
                    }
                }
                (errs, layout.dm_input_bits + sign_bits.len())
            }
        }
    }
}

enum FrameTruth {
    Uniform { info: Vec<bool> },
    Pas { dm_bits: Vec<bool>, sign_bits: Vec<bool> },
}

#[derive(Debug, Clone, Copy)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub info_bits: usize,
    pub frame_error: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// Frame budget control: stop an SNR point after this many frame errors
/// or frames, whichever comes first.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub min_frame_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_frame_errors: 100,
            max_frames: 10_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnrRecord {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    /// Wilson 95% half-width on the frame-error rate.
    pub fer_half_width: f64,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub records: Vec<SnrRecord>,
    pub seed: u64,
    pub config_digest: String,
}

impl SimResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr,ber,fer,frames\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.snr_db, r.ber, r.fer, r.frames));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Vec<(f64, f64, f64, u64)>, Error> {
        let mut rows = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Setup(format!("bad results row: {line:?}")));
            }
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Setup(format!("bad number {t:?}")))
            };
            rows.push((
                parse(f[0])?,
                parse(f[1])?,
                parse(f[2])?,
                parse(f[3])? as u64,
            ));
        }
        Ok(rows)
    }
}

fn wilson_half_width(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let z = 1.96f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    (z / denom) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()
}

/// Accumulated counts for one SNR point, resumable across runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct SnrProgress {
    pub next_frame: u64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
}

/// Runs the pipeline over an SNR grid. `progress` optionally carries
/// partial counts from a checkpoint; the per-frame RNG streams make the
/// resumed run identical to an uninterrupted one.
pub fn run_chain(
    chain: &Chain,
    snr_list_db: &[f64],
    stop: StopRule,
    seed: u64,
    config_digest: &str,
    progress: Option<Vec<SnrProgress>>,
    mut checkpoint: Option<&mut dyn FnMut(usize, &SnrProgress)>,
) -> SimResult {
    const BATCH: u64 = 256;
    let mut records = Vec::with_capacity(snr_list_db.len());
    let mut progress =
        progress.unwrap_or_else(|| vec![SnrProgress::default(); snr_list_db.len()]);
    for (pi, &snr_db) in snr_list_db.iter().enumerate() {
        let noise_var = 1.0 / db_to_linear(snr_db);
        // distinct stream family per SNR point
        let point_seed = seed ^ ((pi as u64 + 1) << 48);
        let p = &mut progress[pi];
        while p.frame_errors < stop.min_frame_errors && p.frames < stop.max_frames {
            let batch = BATCH.min(stop.max_frames - p.frames);
            let outcomes: Vec<FrameOutcome> = (p.next_frame..p.next_frame + batch)
                .into_par_iter()
                .map(|f| chain.simulate_frame(noise_var, point_seed, f))
                .collect();
            for o in outcomes {
                p.frames += 1;
                p.bit_errors += o.bit_errors;
                p.frame_errors += o.frame_error as u64;
            }
            p.next_frame += batch;
            if let Some(cb) = checkpoint.as_mut() {
                cb(pi, p);
            }
        }
        let info_bits = chain.info_bits_per_frame() as u64;
        records.push(SnrRecord {
            snr_db,
            frames: p.frames,
            bit_errors: p.bit_errors,
            frame_errors: p.frame_errors,
            ber: p.bit_errors as f64 / (p.frames * info_bits).max(1) as f64,
            fer: p.frame_errors as f64 / p.frames.max(1) as f64,
            fer_half_width: wilson_half_width(p.frame_errors, p.frames),
        });
        eprintln!(
            "sim: {snr_db} dB: {} frames, fer {:.3e}, ber {:.3e}",
            p.frames,
            records.last().unwrap().fer,
            records.last().unwrap().ber
        );
    }
    SimResult {
        records,
        seed,
        config_digest: config_digest.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct RequiredSnrResult {
    pub snr_db: f64,
    pub probes: Vec<(f64, f64, u64)>,
}

/// Smallest SNR (within `tol_db`) whose frame-error rate is at or below
/// `target_fer`, by bisection with adaptive frame budgets. A probe stops
/// early once its Wilson interval separates from the target.
pub fn required_snr(
    chain: &Chain,
    target_fer: f64,
    window_db: (f64, f64),
    tol_db: f64,
    seed: u64,
    max_frames: u64,
) -> Result<RequiredSnrResult, Error> {
    let mut probes: Vec<(f64, f64, u64)> = Vec::new();
    let mut probe_id = 0u64;
    let mut run = |snr_db: f64, probes: &mut Vec<(f64, f64, u64)>| -> bool {
        let noise_var = 1.0 / db_to_linear(snr_db);
        probe_id += 1;
        let point_seed = seed ^ (probe_id << 40);
        let mut frames = 0u64;
        let mut errors = 0u64;
        const BATCH: u64 = 512;
        while frames < max_frames {
            let outcomes: Vec<FrameOutcome> = (frames..frames + BATCH)
                .into_par_iter()
                .map(|f| chain.simulate_frame(noise_var, point_seed, f))
                .collect();
            frames += BATCH;
            errors += outcomes.iter().filter(|o| o.frame_error).count() as u64;
            let fer = errors as f64 / frames as f64;
            let hw = wilson_half_width(errors, frames);
            if fer - hw > target_fer || (fer + hw < target_fer && errors >= 2) {
                break;
            }
            if errors >= 60 && fer > target_fer {
                break;
            }
        }
        let fer = errors as f64 / frames as f64;
        probes.push((snr_db, fer, frames));
        fer <= target_fer
    };
    let (mut lo, mut hi) = window_db;
    let mut expand = 0.0;
    while !run(hi, &mut probes) {
        expand += 1.0;
        if expand > 10.0 {
            return Err(Error::NonMonotoneProbes);
        }
        hi += 1.0;
    }
    while run(lo, &mut probes) {
        expand += 1.0;
        if expand > 10.0 {
            return Err(Error::NonMonotoneProbes);
        }
        lo -= 1.0;
    }
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if run(mid, &mut probes) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // audit: no confident low-FER probe below a confident high-FER probe
    let mut sorted = probes.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in sorted.windows(2) {
        if w[0].1 <= target_fer / 4.0 && w[1].1 >= target_fer * 4.0 {
            eprintln!(
                "sim: non-monotone required-SNR probes at {:.2} and {:.2} dB",
                w[0].0, w[1].0
            );
        }
    }
    Ok(RequiredSnrResult {
        snr_db: hi,
        probes,
    })
}

/// Uncoded BPSK bit-error probability, the closed-form sanity oracle.
pub fn uncoded_bpsk_ber(snr: f64) -> f64 {
    0.5 * libm::erfc((snr / 2.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitmap::reference_mapping;

    fn toy_chain(decoder: DecoderConfig) -> Chain {
        // rate-1/2 toy: bidiagonal parity part (always invertible), odd
        // row degrees so the all-ones word is no codeword
        let base = BaseMatrix::new(
            vec![
                vec![1, 0, 0, 0, 1, 1, 1, 0],
                vec![1, 1, 0, 0, 1, 1, 0, 1],
                vec![0, 1, 1, 0, 1, 0, 1, 1],
                vec![0, 0, 1, 1, 0, 1, 1, 1],
            ],
            4,
            [],
            [],
        )
        .unwrap();
        let mapping =
            reference_mapping(1, 8, MappingMode::Uniform, [], (0..8).collect()).unwrap();
        Chain::new(base, 5, mapping, Signaling::uniform_ask(1), decoder).unwrap()
    }

    #[test]
    fn noiseless_frame_decodes_immediately() {
        let chain = toy_chain(DecoderConfig::float(20));
        let info: Vec<bool> = (0..chain.encoder.information_length())
            .map(|i| i % 3 == 0)
            .collect();
        let cw = chain.encoder.encode(&info);
        let llrs: Vec<f64> = cw.iter().map(|&b| if b { -LLR_CLAMP } else { LLR_CLAMP }).collect();
        let out = chain.decoder.decode_full(&llrs);
        assert!(out.converged);
        assert!(out.iterations <= 1);
        assert_eq!(out.decisions, cw);
    }

    #[test]
    fn all_zero_llrs_do_not_converge() {
        // a code with an odd-degree check cannot satisfy the all-ones word
        let chain = toy_chain(DecoderConfig::float(5));
        let llrs = vec![0.0; chain.code.num_cols()];
        let out = chain.decoder.decode_full(&llrs);
        assert!(!out.converged);
    }

    #[test]
    fn converged_iff_zero_syndrome() {
        let chain = toy_chain(DecoderConfig::float(30));
        let noise_var = 1.0 / db_to_linear(3.0);
        for f in 0..200 {
            let out = chain.simulate_frame(noise_var, 7, f);
            let _ = out; // frame outcomes must be consistent internally
        }
        // spot check through decode_full
        let mut rng = stream_rng(3, 0);
        for _ in 0..50 {
            let info: Vec<bool> = (0..chain.encoder.information_length())
                .map(|_| rng.gen())
                .collect();
            let cw = chain.encoder.encode(&info);
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let z: f64 = rng.sample(StandardNormal);
                    (if b { -1.0 } else { 1.0 }) * 2.0 + z * 2.0
                })
                .collect();
            let out = chain.decoder.decode_full(&llrs);
            assert_eq!(out.converged, chain.code.syndrome_ok(&out.decisions));
        }
    }

    #[test]
    fn seeded_runs_reproduce_bit_exactly() {
        let chain = toy_chain(DecoderConfig::float(30));
        let a = run_chain(&chain, &[3.0, 4.0], StopRule { min_frame_errors: 8, max_frames: 5000 }, 42, "d", None, None);
        let b = run_chain(&chain, &[3.0, 4.0], StopRule { min_frame_errors: 8, max_frames: 5000 }, 42, "d", None, None);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn ber_bounded_by_fer() {
        let chain = toy_chain(DecoderConfig::float(30));
        let r = run_chain(
            &chain,
            &[2.0],
            StopRule {
                min_frame_errors: 20,
                max_frames: 4000,
            },
            1,
            "d",
            None,
            None,
        );
        let rec = &r.records[0];
        assert!(rec.ber <= rec.fer + 1e-12);
        assert!(rec.frame_errors <= rec.frames);
    }

    #[test]
    fn quantized_tracks_float_at_high_snr() {
        let float_chain = toy_chain(DecoderConfig::float(30));
        let spec = QuantizerSpec::new(8, 15.0).unwrap();
        let quant_chain = toy_chain(DecoderConfig::quantized(spec, 30));
        let noise_var = 1.0 / db_to_linear(7.0);
        let mut disagreements = 0u64;
        let n = 20_000u64;
        for f in 0..n {
            let a = float_chain.simulate_frame(noise_var, 77, f);
            let b = quant_chain.simulate_frame(noise_var, 77, f);
            if a.frame_error != b.frame_error {
                disagreements += 1;
            }
        }
        assert!(
            (disagreements as f64) / (n as f64) < 1e-3,
            "{disagreements} of {n} frames disagree"
        );
    }

    #[test]
    fn uncoded_bpsk_matches_tail_formula() {
        // raw BPSK through the demapper and a hard decision, no code
        let snr = db_to_linear(4.0);
        let sd = (1.0 / snr).sqrt();
        let s = Signaling::uniform_ask(1);
        let mut rng = stream_rng(123, 0);
        let n = 2_000_000u64;
        let mut errors = 0u64;
        for _ in 0..n {
            let bit: bool = rng.gen();
            let x = if bit { -1.0 } else { 1.0 };
            let z: f64 = rng.sample(StandardNormal);
            let l = demap_llr(x + sd * z, 1, &s, 1.0 / snr);
            if (l <= 0.0) != bit {
                errors += 1;
            }
        }
        let ber = errors as f64 / n as f64;
        let p = uncoded_bpsk_ber(snr);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (ber - p).abs() <= 3.0 * sigma,
            "ber {ber} vs formula {p} (3σ {})",
            3.0 * sigma
        );
    }
}
