//! Quasi-cyclic lifting of a base matrix into a full parity-check matrix,
//! girth computation and alist export.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use super::base::BaseMatrix;
use super::Error;
use crate::util::stream_rng;

/// Number of candidate shifts tried per circulant before the four-cycle
/// rejection gives up and accepts a distinct-shift placement.
const SHIFT_RETRY_BUDGET: usize = 100;

/// A lifted quasi-cyclic code: sparse parity-check matrix plus the
/// bookkeeping linking lifted columns back to their protograph types.
#[derive(Debug, Clone)]
pub struct LiftedCode {
    n_cols: usize,
    n_rows: usize,
    /// Row indices per lifted column, ascending.
    col_rows: Vec<Vec<usize>>,
    /// Column indices per lifted row, ascending.
    row_cols: Vec<Vec<usize>>,
    column_type: Vec<usize>,
    transmitted_mask: Vec<bool>,
    shortened_mask: Vec<bool>,
    n_transmitted: usize,
    lifting_factor: usize,
    /// Shifts actually used, keyed by protograph entry.
    shifts: HashMap<(usize, usize), Vec<usize>>,
}

impl LiftedCode {
    pub fn num_cols(&self) -> usize {
        self.n_cols
    }

    pub fn num_rows(&self) -> usize {
        self.n_rows
    }

    pub fn lifting_factor(&self) -> usize {
        self.lifting_factor
    }

    pub fn col_rows(&self, col: usize) -> &[usize] {
        &self.col_rows[col]
    }

    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.row_cols[row]
    }

    /// Protograph column type of a lifted column.
    pub fn column_type(&self, col: usize) -> usize {
        self.column_type[col]
    }

    pub fn transmitted_mask(&self) -> &[bool] {
        &self.transmitted_mask
    }

    /// True for lifted columns of shortened (known-zero) types.
    pub fn shortened_mask(&self) -> &[bool] {
        &self.shortened_mask
    }

    pub fn n_transmitted(&self) -> usize {
        self.n_transmitted
    }

    pub fn shifts(&self) -> &HashMap<(usize, usize), Vec<usize>> {
        &self.shifts
    }

    /// Lifted columns of a protograph column type, ascending.
    pub fn columns_of_type(&self, proto_col: usize) -> std::ops::Range<usize> {
        let z = self.lifting_factor;
        proto_col * z..(proto_col + 1) * z
    }

    /// True when `word` satisfies every parity check.
    pub fn syndrome_ok(&self, word: &[bool]) -> bool {
        assert_eq!(word.len(), self.n_cols);
        self.row_cols.iter().all(|cols| {
            cols.iter().filter(|&&c| word[c]).count() % 2 == 0
        })
    }

    /// Length of the shortest cycle in the Tanner graph, or `None` for an
    /// acyclic graph. Breadth-first search from every variable node with
    /// early cutoff at the best cycle found so far.
    pub fn girth(&self) -> Option<usize> {
        // nodes: 0..n_cols variables, n_cols..n_cols+n_rows checks
        let n = self.n_cols + self.n_rows;
        let mut best: Option<usize> = None;
        let mut dist = vec![u32::MAX; n];
        let mut parent = vec![usize::MAX; n];
        let mut stamp = vec![0u32; n];
        let mut queue = std::collections::VecDeque::new();
        for root in 0..self.n_cols {
            let epoch = root as u32 + 1;
            queue.clear();
            queue.push_back(root);
            stamp[root] = epoch;
            dist[root] = 0;
            parent[root] = usize::MAX;
            while let Some(u) = queue.pop_front() {
                let du = dist[u];
                if let Some(b) = best {
                    // no shorter cycle can close beyond half the best length
                    if 2 * (du as usize + 1) >= b {
                        continue;
                    }
                }
                let neighbors: &[usize] = if u < self.n_cols {
                    &self.col_rows[u]
                } else {
                    &self.row_cols[u - self.n_cols]
                };
                for &v0 in neighbors {
                    let v = if u < self.n_cols { v0 + self.n_cols } else { v0 };
                    if v == parent[u] {
                        continue;
                    }
                    if stamp[v] == epoch {
                        let cycle = du as usize + dist[v] as usize + 1;
                        if best.map_or(true, |b| cycle < b) {
                            best = Some(cycle);
                        }
                    } else {
                        stamp[v] = epoch;
                        dist[v] = du + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if best == Some(4) {
                break; // bipartite minimum
            }
        }
        best
    }

    /// MacKay alist serialization.
    pub fn to_alist(&self) -> String {
        let max_col = self.col_rows.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.row_cols.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n_cols, self.n_rows);
        let _ = writeln!(out, "{max_col} {max_row}");
        let degs: Vec<String> = self.col_rows.iter().map(|r| r.len().to_string()).collect();
        let _ = writeln!(out, "{}", degs.join(" "));
        let degs: Vec<String> = self.row_cols.iter().map(|r| r.len().to_string()).collect();
        let _ = writeln!(out, "{}", degs.join(" "));
        for rows in &self.col_rows {
            let mut ids: Vec<String> = rows.iter().map(|r| (r + 1).to_string()).collect();
            ids.resize(max_col, "0".into());
            let _ = writeln!(out, "{}", ids.join(" "));
        }
        for cols in &self.row_cols {
            let mut ids: Vec<String> = cols.iter().map(|c| (c + 1).to_string()).collect();
            ids.resize(max_row, "0".into());
            let _ = writeln!(out, "{}", ids.join(" "));
        }
        out
    }
}

/// Expands the base matrix into its quasi-cyclic lifted code. Explicit
/// shift lists are honored when present; otherwise shifts are drawn from a
/// generator seeded with `seed`, rejecting placements that close a
/// four-cycle while the retry budget lasts.
pub fn lift(base: &BaseMatrix, seed: u64) -> Result<LiftedCode, Error> {
    let z = base.lifting_factor();
    let mut rng = stream_rng(seed, 0x11F7);
    let mut placed: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let explicit = base.circulant_shifts();
    for (k, (j, i)) in base.nonzero_entries().enumerate() {
        let mult = base.entry(j, i) as usize;
        if mult > z {
            return Err(Error::TooManyParallelEdges {
                row: j,
                col: i,
                mult,
                lifting: z,
            });
        }
        if let Some(lists) = explicit {
            placed.insert((j, i), lists[k].iter().map(|s| s % z).collect());
            continue;
        }
        let mut shifts: Vec<usize> = Vec::with_capacity(mult);
        for _ in 0..mult {
            let mut chosen = None;
            let mut fallback = None;
            for _ in 0..SHIFT_RETRY_BUDGET {
                let s = rng.gen_range(0..z);
                if shifts.contains(&s) {
                    continue;
                }
                if fallback.is_none() {
                    fallback = Some(s);
                }
                if !creates_four_cycle(base, &placed, j, i, s, &shifts) {
                    chosen = Some(s);
                    break;
                }
            }
            let s = match (chosen, fallback) {
                (Some(s), _) => s,
                (None, Some(s)) => s,
                (None, None) => {
                    // distinct shift must exist because mult <= z
                    (0..z).find(|s| !shifts.contains(s)).unwrap()
                }
            };
            shifts.push(s);
            placed.insert((j, i), shifts.clone());
        }
    }

    // expand circulants into sparse adjacency
    let n_cols = base.cols() * z;
    let n_rows = base.rows() * z;
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
    for ((j, i), shifts) in &placed {
        for &s in shifts {
            for v in 0..z {
                let col = i * z + v;
                let row = j * z + (v + s) % z;
                col_rows[col].push(row);
            }
        }
    }
    let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
    for (col, rows) in col_rows.iter_mut().enumerate() {
        rows.sort_unstable();
        for &r in rows.iter() {
            row_cols[r].push(col);
        }
    }

    let column_type: Vec<usize> = (0..n_cols).map(|c| c / z).collect();
    let transmitted_mask: Vec<bool> = (0..n_cols)
        .map(|c| base.is_transmitted(c / z))
        .collect();
    let shortened_mask: Vec<bool> = (0..n_cols)
        .map(|c| base.shortened().contains(&(c / z)))
        .collect();
    let n_transmitted = transmitted_mask.iter().filter(|&&t| t).count();

    Ok(LiftedCode {
        n_cols,
        n_rows,
        col_rows,
        row_cols,
        column_type,
        transmitted_mask,
        shortened_mask,
        n_transmitted,
        lifting_factor: z,
        shifts: placed,
    })
}

/// Checks whether adding shift `s_new` at block `(j, i)` closes a
/// four-cycle with any already-placed circulants. A four-cycle through
/// blocks `(j,i) (j,i2) (j2,i2) (j2,i)` exists iff
/// `s_new - s2 + s3 - s4 ≡ 0 (mod z)` for circulant shifts
/// `s2 ∈ S(j,i2)`, `s3 ∈ S(j2,i2)`, `s4 ∈ S(j2,i)` forming distinct edges.
fn creates_four_cycle(
    base: &BaseMatrix,
    placed: &HashMap<(usize, usize), Vec<usize>>,
    j: usize,
    i: usize,
    s_new: usize,
    siblings: &[usize],
) -> bool {
    let z = base.lifting_factor() as i64;
    let s_new = s_new as i64;
    // same block: two circulants (s_new, s') close a cycle iff 2(s_new - s') ≡ 0
    for &s in siblings {
        if (2 * (s_new - s as i64)).rem_euclid(z) == 0 {
            return true;
        }
    }
    let rows = base.rows();
    let cols = base.cols();
    for j2 in 0..rows {
        for i2 in 0..cols {
            if i2 == i && j2 == j {
                continue; // handled above
            }
            if i2 == i {
                // one column, two rows: (s_new - s4) ≡ (s2' - s3') for distinct
                // pairs within each block
                let other = match placed.get(&(j2, i)) {
                    Some(v) if v.len() >= 2 => v,
                    _ => continue,
                };
                for &s4 in siblings {
                    let d = (s_new - s4 as i64).rem_euclid(z);
                    for a in 0..other.len() {
                        for b in 0..other.len() {
                            if a != b
                                && (other[a] as i64 - other[b] as i64).rem_euclid(z) == d
                            {
                                return true;
                            }
                        }
                    }
                }
                continue;
            }
            let b2 = match placed.get(&(j, i2)) {
                Some(v) => v,
                None => continue,
            };
            if j2 == j {
                // one row, two columns: need distinct circulant pairs in both blocks
                if siblings.is_empty() || b2.len() < 2 {
                    continue;
                }
                for &s4 in siblings {
                    let d = (s_new - s4 as i64).rem_euclid(z);
                    for a in 0..b2.len() {
                        for b in 0..b2.len() {
                            if a != b && (b2[a] as i64 - b2[b] as i64).rem_euclid(z) == d {
                                return true;
                            }
                        }
                    }
                }
                continue;
            }
            let b3 = match placed.get(&(j2, i2)) {
                Some(v) => v,
                None => continue,
            };
            let b4 = match placed.get(&(j2, i)) {
                Some(v) => v,
                None => continue,
            };
            for &s2 in b2 {
                for &s3 in b3 {
                    for &s4 in b4 {
                        if (s_new - s2 as i64 + s3 as i64 - s4 as i64).rem_euclid(z) == 0 {
                            return true;
                        }
                    }
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_edge_lift_is_sum_of_two_circulants() {
        let base = BaseMatrix::new(vec![vec![2]], 3, [], [])
            .unwrap()
            .with_shifts(vec![vec![0, 1]])
            .unwrap();
        let code = lift(&base, 0).unwrap();
        assert_eq!(code.num_rows(), 3);
        assert_eq!(code.num_cols(), 3);
        // I + shift-by-1: every row and column has weight 2
        for c in 0..3 {
            assert_eq!(code.col_rows(c).len(), 2);
        }
        for r in 0..3 {
            assert_eq!(code.row_cols(r).len(), 2);
        }
        assert_eq!(code.col_rows(0), &[0, 1]);
    }

    #[test]
    fn all_zero_shifts_give_stacked_identities() {
        let base = BaseMatrix::new(vec![vec![1, 1], vec![1, 1]], 2, [], [])
            .unwrap()
            .with_shifts(vec![vec![0], vec![0], vec![0], vec![0]])
            .unwrap();
        let code = lift(&base, 0).unwrap();
        assert_eq!(code.num_rows(), 4);
        assert_eq!(code.num_cols(), 4);
        for r in 0..4 {
            assert_eq!(code.row_cols(r).len(), 2);
        }
        // col 0 hits rows 0 (block row 0) and 2 (block row 1)
        assert_eq!(code.col_rows(0), &[0, 2]);
    }

    #[test]
    fn lift_preserves_degree_profile_and_is_deterministic() {
        let base = BaseMatrix::new(
            vec![vec![2, 1, 1, 0], vec![1, 1, 0, 1], vec![0, 1, 2, 1]],
            8,
            [0],
            [3],
        )
        .unwrap();
        let a = lift(&base, 42).unwrap();
        let b = lift(&base, 42).unwrap();
        assert_eq!(a.shifts(), b.shifts());
        for i in 0..base.cols() {
            let deg = base.column_degree(i) as usize;
            for c in a.columns_of_type(i) {
                assert_eq!(a.col_rows(c).len(), deg);
            }
        }
        assert_eq!(a.n_transmitted(), 2 * 8);
    }

    #[test]
    fn parallel_edges_exceeding_lifting_rejected() {
        let base = BaseMatrix::new(vec![vec![3]], 2, [], []).unwrap();
        let err = lift(&base, 0).unwrap_err();
        assert!(matches!(err, Error::TooManyParallelEdges { .. }));
    }

    #[test]
    fn girth_of_parallel_paths_is_four() {
        let base = BaseMatrix::new(vec![vec![1, 1], vec![1, 1]], 1, [], []).unwrap();
        let code = lift(&base, 0).unwrap();
        assert_eq!(code.girth(), Some(4));
    }

    #[test]
    fn girth_of_tree_is_infinite() {
        // path graph: V0 - C0 - V1 - C1 - V2
        let base = BaseMatrix::new(vec![vec![1, 1, 0], vec![0, 1, 1]], 1, [], []).unwrap();
        let code = lift(&base, 0).unwrap();
        assert_eq!(code.girth(), None);
    }

    #[test]
    fn seeded_lift_avoids_four_cycles_when_possible() {
        let base = BaseMatrix::new(
            vec![vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 1]],
            16,
            [],
            [],
        )
        .unwrap();
        let code = lift(&base, 7).unwrap();
        let g = code.girth().unwrap();
        assert!(g >= 6, "girth {g} < 6");
    }

    #[test]
    fn alist_header_matches_dimensions() {
        let base = BaseMatrix::new(vec![vec![1, 1]], 2, [], []).unwrap();
        let code = lift(&base, 0).unwrap();
        let alist = code.to_alist();
        let mut lines = alist.lines();
        assert_eq!(lines.next().unwrap(), "4 2");
    }
}
