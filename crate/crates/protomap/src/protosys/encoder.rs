//! Systematic GF(2) encoding via one-time dense Gaussian elimination.
//!
//! Parity bits are pinned to the designated parity columns of the base
//! matrix so that shaped architectures can rely on where parities land.

use super::base::BaseMatrix;
use super::lift::LiftedCode;
use super::Error;

/// Systematic encoder for a lifted code. Shortened columns are treated as
/// known zeros and eliminated; the remaining non-parity columns carry the
/// information bits in ascending column order.
#[derive(Debug, Clone)]
pub struct SystematicEncoder {
    n_cols: usize,
    /// Lifted parity positions, one per check row, in elimination order:
    /// `parity_positions[r]` is solved by reduced row `r`.
    parity_positions: Vec<usize>,
    /// Lifted information positions, ascending.
    information_positions: Vec<usize>,
    shortened_positions: Vec<bool>,
    parity_proto_columns: Vec<usize>,
    /// Dense GF(2) map from the information vector to each parity bit,
    /// packed 64 information bits per word.
    p_rows: Vec<u64>,
    words_per_row: usize,
}

impl SystematicEncoder {
    pub fn codeword_length(&self) -> usize {
        self.n_cols
    }

    pub fn information_length(&self) -> usize {
        self.information_positions.len()
    }

    pub fn information_positions(&self) -> &[usize] {
        &self.information_positions
    }

    /// Protograph columns designated to carry parity bits.
    pub fn parity_proto_columns(&self) -> &[usize] {
        &self.parity_proto_columns
    }

    pub fn is_parity_position(&self, col: usize) -> bool {
        !self.shortened_positions[col] && !self.info_mask(col)
    }

    fn info_mask(&self, col: usize) -> bool {
        self.information_positions.binary_search(&col).is_ok()
    }

    /// Encodes an information word into a full codeword (shortened
    /// positions carry zeros).
    pub fn encode(&self, info: &[bool]) -> Vec<bool> {
        assert_eq!(info.len(), self.information_positions.len());
        let mut word = vec![false; self.n_cols];
        for (&pos, &bit) in self.information_positions.iter().zip(info) {
            word[pos] = bit;
        }
        self.complete(&mut word);
        word
    }

    /// Fills the parity positions of a codeword whose information positions
    /// are already set. Shortened positions are forced to zero.
    pub fn complete(&self, word: &mut [bool]) {
        assert_eq!(word.len(), self.n_cols);
        let k = self.information_positions.len();
        let mut packed = vec![0u64; self.words_per_row];
        for (idx, &pos) in self.information_positions.iter().enumerate() {
            if word[pos] {
                packed[idx / 64] |= 1u64 << (idx % 64);
            }
        }
        debug_assert_eq!(self.p_rows.len(), self.words_per_row * self.parity_positions.len());
        for (r, &pos) in self.parity_positions.iter().enumerate() {
            let row = &self.p_rows[r * self.words_per_row..(r + 1) * self.words_per_row];
            let mut acc = 0u64;
            for (a, b) in row.iter().zip(&packed) {
                acc ^= a & b;
            }
            word[pos] = acc.count_ones() % 2 == 1;
        }
        let _ = k;
    }
}

/// Builds the systematic encoder by eliminating the designated parity
/// columns of the lifted matrix. Fails with the achieved rank when the
/// parity submatrix is singular.
pub fn build_encoder(code: &LiftedCode, base: &BaseMatrix) -> Result<SystematicEncoder, Error> {
    let z = base.lifting_factor();
    let n_cols = code.num_cols();
    let m = code.num_rows();
    let parity_protos = base.designated_parity_columns();
    if parity_protos.len() < base.rows() {
        return Err(Error::RankDeficient { rank: 0, rows: m });
    }
    let mut shortened = vec![false; n_cols];
    for &i in base.shortened() {
        for c in code.columns_of_type(i) {
            shortened[c] = true;
        }
    }
    let parity_candidates: Vec<usize> = parity_protos
        .iter()
        .flat_map(|&i| i * z..(i + 1) * z)
        .collect();

    // dense packed H, shortened columns dropped by never pivoting on them
    let words = n_cols.div_ceil(64);
    let mut h = vec![0u64; m * words];
    for r in 0..m {
        for &c in code.row_cols(r) {
            if !shortened[c] {
                h[r * words + c / 64] ^= 1u64 << (c % 64);
            }
        }
    }

    let mut pivot_of_row: Vec<usize> = Vec::with_capacity(m);
    let mut rank = 0usize;
    for &pc in &parity_candidates {
        if rank == m {
            break;
        }
        let (w, bit) = (pc / 64, 1u64 << (pc % 64));
        let Some(pr) = (rank..m).find(|&r| h[r * words + w] & bit != 0) else {
            continue;
        };
        if pr != rank {
            for c in 0..words {
                h.swap(rank * words + c, pr * words + c);
            }
        }
        for r in 0..m {
            if r != rank && h[r * words + w] & bit != 0 {
                let (head, tail) = h.split_at_mut(rank.max(r) * words);
                let (dst, src) = if r > rank {
                    (&mut tail[..words], &head[rank * words..rank * words + words])
                } else {
                    (&mut head[r * words..r * words + words], &tail[..words])
                };
                for (d, s) in dst.iter_mut().zip(src) {
                    *d ^= s;
                }
            }
        }
        pivot_of_row.push(pc);
        rank += 1;
    }
    if rank < m {
        return Err(Error::RankDeficient { rank, rows: m });
    }

    let mut is_parity = vec![false; n_cols];
    for &p in &pivot_of_row {
        is_parity[p] = true;
    }
    let information_positions: Vec<usize> = (0..n_cols)
        .filter(|&c| !is_parity[c] && !shortened[c])
        .collect();

    // restrict reduced rows to the information columns
    let k = information_positions.len();
    let words_per_row = k.div_ceil(64);
    let mut p_rows = vec![0u64; m * words_per_row];
    for r in 0..m {
        for (idx, &c) in information_positions.iter().enumerate() {
            if h[r * words + c / 64] & (1u64 << (c % 64)) != 0 {
                p_rows[r * words_per_row + idx / 64] |= 1u64 << (idx % 64);
            }
        }
    }

    Ok(SystematicEncoder {
        n_cols,
        parity_positions: pivot_of_row,
        information_positions,
        shortened_positions: shortened,
        parity_proto_columns: parity_protos,
        p_rows,
        words_per_row,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protosys::lift;
    use rand::Rng;

    #[test]
    fn single_parity_check_code() {
        let base = BaseMatrix::new(vec![vec![1, 1]], 1, [], []).unwrap();
        let code = lift(&base, 0).unwrap();
        let enc = build_encoder(&code, &base).unwrap();
        assert_eq!(enc.information_length(), 1);
        // parity equals the information bit
        let cw = enc.encode(&[true]);
        assert_eq!(cw, vec![true, true]);
        let cw = enc.encode(&[false]);
        assert_eq!(cw, vec![false, false]);
    }

    #[test]
    fn random_messages_have_zero_syndrome() {
        let base = BaseMatrix::new(
            vec![vec![2, 1, 1, 1, 0], vec![1, 1, 0, 1, 1], vec![1, 1, 1, 0, 2]],
            16,
            [0],
            [4],
        )
        .unwrap();
        let code = lift(&base, 3).unwrap();
        let enc = build_encoder(&code, &base).unwrap();
        assert_eq!(
            enc.information_length(),
            code.num_cols() - code.num_rows() - 16
        );
        let mut rng = crate::util::stream_rng(9, 0);
        for _ in 0..50 {
            let info: Vec<bool> = (0..enc.information_length()).map(|_| rng.gen()).collect();
            let cw = enc.encode(&info);
            assert!(code.syndrome_ok(&cw));
            // shortened block stays zero
            for c in code.columns_of_type(4) {
                assert!(!cw[c]);
            }
        }
    }

    #[test]
    fn parities_land_on_designated_columns() {
        let base = BaseMatrix::new(
            vec![vec![1, 1, 1, 2], vec![1, 2, 1, 1]],
            8,
            [0],
            [],
        )
        .unwrap();
        let code = lift(&base, 1).unwrap();
        let enc = build_encoder(&code, &base).unwrap();
        assert_eq!(enc.parity_proto_columns(), &[0, 1]);
        for c in code.columns_of_type(2).chain(code.columns_of_type(3)) {
            assert!(!enc.is_parity_position(c));
        }
    }

    #[test]
    fn rank_deficient_reported() {
        // two identical rows: rank 1 of 2
        let base = BaseMatrix::new(vec![vec![1, 1], vec![1, 1]], 1, [], [])
            .unwrap()
            .with_shifts(vec![vec![0], vec![0], vec![0], vec![0]])
            .unwrap();
        let code = lift(&base, 0).unwrap();
        let err = build_encoder(&code, &base).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 1, rows: 2 }));
    }
}
