//! Protograph base matrices: multiplicities, puncturing/shortening masks,
//! lifting parameters and the line-oriented file format.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::Error;

/// A protograph: a small integer matrix whose entry `(j, i)` gives the
/// number of parallel edges between check type `j` and variable type `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseMatrix {
    entries: Vec<u32>,
    rows: usize,
    cols: usize,
    lifting_factor: usize,
    punctured: BTreeSet<usize>,
    shortened: BTreeSet<usize>,
    /// Per-entry circulant shifts (one list per nonzero entry, in row-major
    /// order of the nonzero entries). When absent, lifting draws shifts from
    /// a seeded generator.
    circulant_shifts: Option<Vec<Vec<usize>>>,
}

impl BaseMatrix {
    pub fn new(
        entries: Vec<Vec<u32>>,
        lifting_factor: usize,
        punctured: impl IntoIterator<Item = usize>,
        shortened: impl IntoIterator<Item = usize>,
    ) -> Result<Self, Error> {
        let rows = entries.len();
        if rows == 0 {
            return Err(Error::EmptyMatrix);
        }
        let cols = entries[0].len();
        if cols == 0 || entries.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch);
        }
        let flat: Vec<u32> = entries.into_iter().flatten().collect();
        let base = BaseMatrix {
            entries: flat,
            rows,
            cols,
            lifting_factor,
            punctured: punctured.into_iter().collect(),
            shortened: shortened.into_iter().collect(),
            circulant_shifts: None,
        };
        base.validate()?;
        Ok(base)
    }

    /// Attaches explicit circulant shifts; `shifts[k]` belongs to the k-th
    /// nonzero entry in row-major order and must hold exactly `b_ji` values,
    /// distinct modulo the lifting factor.
    pub fn with_shifts(mut self, shifts: Vec<Vec<usize>>) -> Result<Self, Error> {
        self.circulant_shifts = Some(shifts);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), Error> {
        if self.lifting_factor == 0 {
            return Err(Error::InvalidLifting);
        }
        for i in 0..self.cols {
            if self.column_degree(i) == 0 {
                return Err(Error::DisconnectedColumn(i));
            }
        }
        for &i in self.punctured.iter().chain(self.shortened.iter()) {
            if i >= self.cols {
                return Err(Error::ColumnIndexOutOfRange(i));
            }
        }
        if self.punctured.intersection(&self.shortened).next().is_some() {
            return Err(Error::OverlappingMasks);
        }
        if let Some(shifts) = &self.circulant_shifts {
            let nonzeros: Vec<(usize, usize)> = self.nonzero_entries().collect();
            if shifts.len() != nonzeros.len() {
                return Err(Error::ShiftSectionMismatch {
                    expected: nonzeros.len(),
                    got: shifts.len(),
                });
            }
            for ((j, i), list) in nonzeros.iter().zip(shifts) {
                let mult = self.entry(*j, *i) as usize;
                if list.len() != mult {
                    return Err(Error::ShiftListLength {
                        row: *j,
                        col: *i,
                        expected: mult,
                        got: list.len(),
                    });
                }
                let mut seen = BTreeSet::new();
                for &s in list {
                    if !seen.insert(s % self.lifting_factor) {
                        return Err(Error::DuplicateShift { row: *j, col: *i });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lifting_factor(&self) -> usize {
        self.lifting_factor
    }

    pub fn entry(&self, j: usize, i: usize) -> u32 {
        self.entries[j * self.cols + i]
    }

    pub fn column_degree(&self, i: usize) -> u32 {
        (0..self.rows).map(|j| self.entry(j, i)).sum()
    }

    pub fn row_degree(&self, j: usize) -> u32 {
        (0..self.cols).map(|i| self.entry(j, i)).sum()
    }

    pub fn punctured(&self) -> &BTreeSet<usize> {
        &self.punctured
    }

    pub fn shortened(&self) -> &BTreeSet<usize> {
        &self.shortened
    }

    pub fn is_transmitted(&self, i: usize) -> bool {
        !self.punctured.contains(&i) && !self.shortened.contains(&i)
    }

    /// Transmitted protograph columns in ascending order.
    pub fn transmitted_columns(&self) -> Vec<usize> {
        (0..self.cols).filter(|&i| self.is_transmitted(i)).collect()
    }

    pub fn n_transmitted(&self) -> usize {
        self.transmitted_columns().len() * self.lifting_factor
    }

    pub fn circulant_shifts(&self) -> Option<&Vec<Vec<usize>>> {
        self.circulant_shifts.as_ref()
    }

    /// Nonzero entries in row-major order.
    pub fn nonzero_entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows)
            .flat_map(move |j| (0..self.cols).map(move |i| (j, i)))
            .filter(|&(j, i)| self.entry(j, i) > 0)
    }

    /// Parity column designation used by the systematic encoder: punctured
    /// columns first, then the lowest-index non-shortened columns until one
    /// column per check type is designated.
    pub fn designated_parity_columns(&self) -> Vec<usize> {
        let mut parity: Vec<usize> = self.punctured.iter().cloned().collect();
        for i in 0..self.cols {
            if parity.len() >= self.rows {
                break;
            }
            if !self.punctured.contains(&i) && !self.shortened.contains(&i) {
                parity.push(i);
            }
        }
        parity.sort_unstable();
        parity
    }

    /// Indices into the transmitted-column list of the designated parity
    /// columns that are transmitted (the sign-carrying types of a shaped
    /// frame).
    pub fn transmitted_parity_types(&self) -> Vec<usize> {
        let parity: std::collections::BTreeSet<usize> =
            self.designated_parity_columns().into_iter().collect();
        self.transmitted_columns()
            .iter()
            .enumerate()
            .filter(|(_, col)| parity.contains(col))
            .map(|(t, _)| t)
            .collect()
    }

    /// Parses the line-oriented format: a `m_P n_P lifting` header, `m_P`
    /// rows of `n_P` multiplicities, then optional `#punctured`,
    /// `#shortened` and `#shifts` sections. Shift lines carry
    /// `row col s_1 .. s_b` for each nonzero entry.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .peekable();
        let header = lines.next().ok_or(Error::EmptyMatrix)?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(Error::Parse(format!("bad header line: {header:?}")));
        }
        let rows: usize = head[0].parse().map_err(|_| Error::Parse(header.into()))?;
        let cols: usize = head[1].parse().map_err(|_| Error::Parse(header.into()))?;
        let lifting: usize = head[2].parse().map_err(|_| Error::Parse(header.into()))?;
        let mut entries = Vec::with_capacity(rows);
        for _ in 0..rows {
            let line = lines.next().ok_or(Error::DimensionMismatch)?;
            let row: Vec<u32> = line
                .split_whitespace()
                .map(|t| {
                    let v: i64 = t.parse().map_err(|_| Error::Parse(line.into()))?;
                    u32::try_from(v).map_err(|_| Error::NegativeMultiplicity)
                })
                .collect::<Result<_, Error>>()?;
            if row.len() != cols {
                return Err(Error::DimensionMismatch);
            }
            entries.push(row);
        }
        let mut punctured = Vec::new();
        let mut shortened = Vec::new();
        let mut shifts: Option<Vec<(usize, usize, Vec<usize>)>> = None;
        while let Some(line) = lines.next() {
            if let Some(rest) = line.strip_prefix("#punctured") {
                punctured = parse_indices(rest)?;
            } else if let Some(rest) = line.strip_prefix("#shortened") {
                shortened = parse_indices(rest)?;
            } else if line.starts_with("#shifts") {
                let mut list = Vec::new();
                while let Some(&next) = lines.peek() {
                    if next.starts_with('#') {
                        break;
                    }
                    let line = lines.next().unwrap();
                    let toks = parse_indices(line)?;
                    if toks.len() < 3 {
                        return Err(Error::Parse(format!("bad shift line: {line:?}")));
                    }
                    list.push((toks[0], toks[1], toks[2..].to_vec()));
                }
                shifts = Some(list);
            } else {
                return Err(Error::Parse(format!("unknown section: {line:?}")));
            }
        }
        let base = BaseMatrix::new(entries, lifting, punctured, shortened)?;
        match shifts {
            None => Ok(base),
            Some(list) => {
                let nonzeros: Vec<(usize, usize)> = base.nonzero_entries().collect();
                let mut ordered = vec![None; nonzeros.len()];
                for (j, i, s) in list {
                    let k = nonzeros
                        .iter()
                        .position(|&(r, c)| r == j && c == i)
                        .ok_or(Error::ShiftForZeroEntry { row: j, col: i })?;
                    ordered[k] = Some(s);
                }
                let ordered: Vec<Vec<usize>> = ordered
                    .into_iter()
                    .enumerate()
                    .map(|(k, s)| {
                        s.ok_or(Error::ShiftSectionMismatch {
                            expected: nonzeros.len(),
                            got: k,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                base.with_shifts(ordered)
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    /// Serializes back to the file format accepted by [`BaseMatrix::parse`].
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.rows, self.cols, self.lifting_factor);
        for j in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|i| self.entry(j, i).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        if !self.punctured.is_empty() {
            let p: Vec<String> = self.punctured.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "#punctured {}", p.join(" "));
        }
        if !self.shortened.is_empty() {
            let s: Vec<String> = self.shortened.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "#shortened {}", s.join(" "));
        }
        if let Some(shifts) = &self.circulant_shifts {
            let _ = writeln!(out, "#shifts");
            for ((j, i), list) in self.nonzero_entries().zip(shifts) {
                let s: Vec<String> = list.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{j} {i} {}", s.join(" "));
            }
        }
        out
    }
}

fn parse_indices(text: &str) -> Result<Vec<usize>, Error> {
    text.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(text.into())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_valid_protograph() {
        let base = BaseMatrix::new(vec![vec![1, 1]], 1, [], []).unwrap();
        assert_eq!(base.rows(), 1);
        assert_eq!(base.cols(), 2);
        assert_eq!(base.n_transmitted(), 2);
    }

    #[test]
    fn transmitted_accounting() {
        // 12x69 with two punctured and one shortened column, lifting 256
        let entries = vec![vec![1u32; 69]; 12];
        let base = BaseMatrix::new(entries, 256, [0, 1], [12]).unwrap();
        assert_eq!(base.n_transmitted(), 66 * 256);
        assert_eq!(base.n_transmitted(), 16896);
    }

    #[test]
    fn shift_length_mismatch_rejected() {
        let base = BaseMatrix::new(vec![vec![1]], 4, [], []).unwrap();
        let err = base.with_shifts(vec![vec![0, 1]]).unwrap_err();
        assert!(matches!(err, Error::ShiftListLength { .. }));
    }

    #[test]
    fn overlapping_masks_rejected() {
        let err = BaseMatrix::new(vec![vec![1, 1]], 2, [0], [0]).unwrap_err();
        assert!(matches!(err, Error::OverlappingMasks));
    }

    #[test]
    fn disconnected_column_rejected() {
        let err = BaseMatrix::new(vec![vec![1, 0]], 2, [], []).unwrap_err();
        assert!(matches!(err, Error::DisconnectedColumn(1)));
    }

    #[test]
    fn duplicate_shift_mod_lifting_rejected() {
        let base = BaseMatrix::new(vec![vec![2]], 3, [], []).unwrap();
        let err = base.with_shifts(vec![vec![1, 4]]).unwrap_err();
        assert!(matches!(err, Error::DuplicateShift { .. }));
    }

    #[test]
    fn parse_round_trip() {
        let text = "2 3 4\n1 2 0\n0 1 1\n#punctured 0\n#shortened 2\n#shifts\n0 0 1\n0 1 0 2\n1 1 3\n1 2 1\n";
        let base = BaseMatrix::parse(text).unwrap();
        assert_eq!(base.entry(0, 1), 2);
        assert_eq!(base.punctured().iter().copied().collect::<Vec<_>>(), vec![0]);
        let again = BaseMatrix::parse(&base.to_file_string()).unwrap();
        assert_eq!(base, again);
    }

    #[test]
    fn parse_rejects_negative_multiplicity() {
        let err = BaseMatrix::parse("1 2 1\n1 -1\n").unwrap_err();
        assert!(matches!(err, Error::NegativeMultiplicity));
    }

    #[test]
    fn designated_parity_prefers_punctured() {
        let entries = vec![vec![1u32; 6]; 2];
        let base = BaseMatrix::new(entries, 4, [3], [0]).unwrap();
        assert_eq!(base.designated_parity_columns(), vec![1, 3]);
    }
}
