//! Finite-length realization of a fractional bit mapping: assigns each
//! transmitted code bit of a lifted code to one (symbol, bit level) slot.
//!
//! Within each transmitted column type the lifting-factor bits are split
//! across levels by largest-remainder rounding of `a_ji · Z`; a repair
//! pass then balances the per-level totals so every level carries exactly
//! `n_t · Z / m` bits, moving single assignments between levels of
//! non-forced columns in ascending column order.

use super::mapping::{BitMapping, MappingMode};
use super::Error;
use crate::protosys::LiftedCode;

#[derive(Debug, Clone)]
pub struct Interleaver {
    n_symbols: usize,
    levels: usize,
    /// `positions[j][s]`: lifted codeword position of level `j+1`, symbol `s`.
    positions: Vec<Vec<usize>>,
}

impl Interleaver {
    pub fn new(mapping: &BitMapping, code: &LiftedCode) -> Result<Self, Error> {
        let z = code.lifting_factor();
        let m = mapping.levels();
        let n_types = mapping.n_types();
        let n_transmitted = n_types * z;
        if n_transmitted != code.n_transmitted() {
            return Err(Error::CodeMappingMismatch {
                mapping_bits: n_transmitted,
                code_bits: code.n_transmitted(),
            });
        }
        if n_transmitted % m != 0 {
            return Err(Error::CodeMappingMismatch {
                mapping_bits: n_transmitted,
                code_bits: n_transmitted / m * m,
            });
        }
        let n_symbols = n_transmitted / m;

        // integer counts per (level, type) by largest remainder within a column
        let mut counts = vec![vec![0usize; n_types]; m];
        for i in 0..n_types {
            let mut floor_sum = 0usize;
            let mut rems: Vec<(usize, f64)> = Vec::with_capacity(m);
            for j in 0..m {
                let exact = mapping.entry(j, i) * z as f64;
                let fl = exact.floor() as usize;
                counts[j][i] = fl;
                floor_sum += fl;
                rems.push((j, exact - fl as f64));
            }
            rems.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for k in 0..(z - floor_sum) {
                counts[rems[k].0][i] += 1;
            }
        }

        // repair per-level totals without touching forced columns
        let forced = |i: usize| {
            mapping.mode() == MappingMode::Pas && mapping.parity_types().contains(&i)
        };
        loop {
            let totals: Vec<isize> = (0..m)
                .map(|j| counts[j].iter().sum::<usize>() as isize - n_symbols as isize)
                .collect();
            let Some(over) = totals.iter().position(|&t| t > 0) else {
                break;
            };
            let under = totals
                .iter()
                .position(|&t| t < 0)
                .expect("totals sum to zero");
            let col = (0..n_types)
                .filter(|&i| !forced(i) && counts[over][i] > 0)
                .max_by_key(|&i| counts[over][i])
                .ok_or(Error::UnbalancedRealization)?;
            counts[over][col] -= 1;
            counts[under][col] += 1;
        }

        // lay levels out in consecutive blocks inside each column type,
        // then deal each level's position list round-robin into symbols
        let transmitted_cols: Vec<usize> = (0..code.num_cols())
            .filter(|&c| code.transmitted_mask()[c])
            .collect();
        let mut per_level: Vec<Vec<usize>> = vec![Vec::with_capacity(n_symbols); m];
        for (t, chunk) in transmitted_cols.chunks(z).enumerate() {
            let mut offset = 0;
            for j in 0..m {
                for &pos in &chunk[offset..offset + counts[j][t]] {
                    per_level[j].push(pos);
                }
                offset += counts[j][t];
            }
        }
        for list in &per_level {
            debug_assert_eq!(list.len(), n_symbols);
        }
        Ok(Interleaver {
            n_symbols,
            levels: m,
            positions: per_level,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Lifted codeword position feeding level `j` (1-based) of symbol `s`.
    pub fn position(&self, j: usize, s: usize) -> usize {
        self.positions[j - 1][s]
    }

    pub fn level_positions(&self, j: usize) -> &[usize] {
        &self.positions[j - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitmap::mapping::reference_mapping;
    use crate::protosys::{lift, BaseMatrix};

    #[test]
    fn reference_interleaver_covers_all_transmitted_bits() {
        let base = BaseMatrix::new(
            vec![vec![1, 1, 1, 1, 1, 1], vec![1, 1, 1, 1, 1, 1]],
            6,
            [],
            [],
        )
        .unwrap();
        let code = lift(&base, 1).unwrap();
        let mapping =
            reference_mapping(3, 6, MappingMode::Uniform, [], (0..6).collect()).unwrap();
        let itl = Interleaver::new(&mapping, &code).unwrap();
        assert_eq!(itl.n_symbols(), 12);
        let mut seen = vec![false; code.num_cols()];
        for j in 1..=3 {
            for s in 0..12 {
                let p = itl.position(j, s);
                assert!(!seen[p]);
                seen[p] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn pas_parity_columns_carry_level_one_only() {
        let base = BaseMatrix::new(vec![vec![1, 1, 1, 1]], 4, [], []).unwrap();
        let code = lift(&base, 1).unwrap();
        let mapping =
            reference_mapping(2, 4, MappingMode::Pas, [0, 1], (0..4).collect()).unwrap();
        let itl = Interleaver::new(&mapping, &code).unwrap();
        // level 2 never lands on the parity types (lifted cols 0..8)
        for s in 0..itl.n_symbols() {
            assert!(itl.position(2, s) >= 8);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let base = BaseMatrix::new(vec![vec![1, 1, 1]], 4, [], []).unwrap();
        let code = lift(&base, 1).unwrap();
        let mapping =
            reference_mapping(2, 2, MappingMode::Uniform, [], vec![0, 1]).unwrap();
        assert!(Interleaver::new(&mapping, &code).is_err());
    }
}
