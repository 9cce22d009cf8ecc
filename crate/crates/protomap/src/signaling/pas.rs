//! Shaped frame assembly: matcher output amplitudes ride in the
//! systematic part of the codeword, parity bits become signs, and any
//! leftover sign slots carry uniform information bits.

use super::ccdm::{ccdm_encode, quantize_composition, Composition};
use super::constellation::Signaling;
use super::Error;
use crate::bitmap::Interleaver;
use crate::protosys::SystematicEncoder;

/// Spectral efficiency of the shaped architecture:
/// `R_dm + 1 - (1 - R_c) · m` bits per channel use.
pub fn pas_spectral_efficiency(r_dm: f64, m: usize, r_c: f64) -> f64 {
    r_dm + 1.0 - (1.0 - r_c) * m as f64
}

/// Spectral efficiency of uniform signaling, `R_c · m`.
pub fn uniform_spectral_efficiency(m: usize, r_c: f64) -> f64 {
    r_c * m as f64
}

/// One assembled shaped frame.
#[derive(Debug, Clone)]
pub struct PasFrame {
    pub dm_bits: Vec<bool>,
    /// Amplitude indices (ascending amplitude order), one per symbol.
    pub amplitudes: Vec<usize>,
    /// Sign bits per symbol (true = negative amplitude).
    pub sign_bits: Vec<bool>,
    pub codeword: Vec<bool>,
    /// Transmitted values, one per symbol.
    pub symbols: Vec<f64>,
    /// Codeword positions of the uniform information bits used as signs.
    pub info_sign_positions: Vec<usize>,
}

/// Static layout of the shaped frame for a (code, mapping, signaling)
/// triple: the matcher composition and the split of sign slots between
/// parity bits and uniform information bits.
#[derive(Debug, Clone)]
pub struct PasLayout {
    pub composition: Composition,
    pub dm_input_bits: usize,
    /// Symbol indices whose sign slot is a parity position.
    pub parity_sign_symbols: Vec<usize>,
    /// Symbol indices whose sign slot is an information position.
    pub info_sign_symbols: Vec<usize>,
}

impl PasLayout {
    pub fn new(
        signaling: &Signaling,
        encoder: &SystematicEncoder,
        interleaver: &Interleaver,
    ) -> Result<Self, Error> {
        if !signaling.is_pas() {
            return Err(Error::InvalidParameter(
                "layout requires a shaped signaling spec".into(),
            ));
        }
        let n_sym = interleaver.n_symbols();
        let composition = quantize_composition(
            &signaling
                .distribution()
                .amplitude_probs(signaling.constellation()),
            n_sym as u64,
        );
        let dm_input_bits = composition.num_input_bits();
        let mut parity_sign_symbols = Vec::new();
        let mut info_sign_symbols = Vec::new();
        for s in 0..n_sym {
            let pos = interleaver.position(1, s);
            if encoder.is_parity_position(pos) {
                parity_sign_symbols.push(s);
            } else {
                info_sign_symbols.push(s);
            }
        }
        // amplitude levels must sit on information positions
        for j in 2..=interleaver.levels() {
            for s in 0..n_sym {
                if encoder.is_parity_position(interleaver.position(j, s)) {
                    return Err(Error::PasCapacityMismatch(format!(
                        "amplitude level {j} mapped onto a parity position"
                    )));
                }
            }
        }
        // full information budget: amplitude bits + uniform sign bits
        let amp_bits = (interleaver.levels() - 1) * n_sym;
        let need = amp_bits + info_sign_symbols.len();
        if need != encoder.information_length() {
            return Err(Error::PasCapacityMismatch(format!(
                "information length {} but frame needs {need}",
                encoder.information_length()
            )));
        }
        Ok(PasLayout {
            composition,
            dm_input_bits,
            parity_sign_symbols,
            info_sign_symbols,
        })
    }

    /// Exact integer spectral efficiency of assembled frames,
    /// `(k_dm + uniform sign bits) / n_symbols`.
    pub fn spectral_efficiency(&self, n_symbols: usize) -> f64 {
        (self.dm_input_bits + self.info_sign_symbols.len()) as f64 / n_symbols as f64
    }
}

/// Assembles a shaped frame: matcher bits become amplitudes, amplitudes
/// are copied into the systematic positions, parities fill the remaining
/// sign slots and `extra_sign_bits` covers the information sign slots.
pub fn pas_assemble(
    dm_bits: &[bool],
    extra_sign_bits: &[bool],
    layout: &PasLayout,
    signaling: &Signaling,
    encoder: &SystematicEncoder,
    interleaver: &Interleaver,
) -> Result<PasFrame, Error> {
    if dm_bits.len() != layout.dm_input_bits {
        return Err(Error::PasCapacityMismatch(format!(
            "matcher input {} bits, layout expects {}",
            dm_bits.len(),
            layout.dm_input_bits
        )));
    }
    if extra_sign_bits.len() != layout.info_sign_symbols.len() {
        return Err(Error::PasCapacityMismatch(format!(
            "{} uniform sign bits supplied, layout expects {}",
            extra_sign_bits.len(),
            layout.info_sign_symbols.len()
        )));
    }
    let n_sym = interleaver.n_symbols();
    let m = interleaver.levels();
    let c = signaling.constellation();

    let amplitudes = ccdm_encode(dm_bits, &layout.composition)?;
    let mut codeword = vec![false; encoder.codeword_length()];

    // amplitude label bits into levels 2..m
    for (s, &amp) in amplitudes.iter().enumerate() {
        let label = c.amplitude_label(amp);
        for j in 2..=m {
            let bit = (label >> (m - j)) & 1 == 1;
            codeword[interleaver.position(j, s)] = bit;
        }
    }
    // uniform information bits on the information sign slots
    for (&s, &bit) in layout.info_sign_symbols.iter().zip(extra_sign_bits) {
        codeword[interleaver.position(1, s)] = bit;
    }
    encoder.complete(&mut codeword);

    let mut sign_bits = vec![false; n_sym];
    let mut symbols = vec![0.0; n_sym];
    for s in 0..n_sym {
        sign_bits[s] = codeword[interleaver.position(1, s)];
        let mut label = (sign_bits[s] as u32) << (m - 1);
        label |= c.amplitude_label(amplitudes[s]);
        symbols[s] = signaling.scaled_point(c.point_with_label(label));
    }
    let info_sign_positions = layout
        .info_sign_symbols
        .iter()
        .map(|&s| interleaver.position(1, s))
        .collect();
    Ok(PasFrame {
        dm_bits: dm_bits.to_vec(),
        amplitudes,
        sign_bits,
        codeword,
        symbols,
        info_sign_positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_efficiency_formulas() {
        let r_c = 14336.0 / 16896.0;
        assert_relative_eq!(
            pas_spectral_efficiency(2.152, 4, r_c),
            2.546,
            epsilon = 1e-3
        );
        assert_relative_eq!(
            uniform_spectral_efficiency(3, r_c),
            2.545,
            epsilon = 1e-3
        );
        // degenerate: rate-1 code, one bit per symbol, zero matcher rate
        assert_relative_eq!(pas_spectral_efficiency(0.0, 1, 1.0), 1.0);
    }
}
