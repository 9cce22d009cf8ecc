//! The bit-mapping matrix: fractional assignment of bit levels to
//! transmitted variable-node types, its constraint set and the row-wise
//! assembly rule used by the successive optimizer.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::Error;

pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingMode {
    Uniform,
    Pas,
}

/// An `m × n_t` matrix whose entry `(j, i)` is the fraction of bit level
/// `j+1` assigned to the `i`-th transmitted variable-node type.
///
/// Every column sums to one, every row sums to `n_t / m`, and in shaped
/// mode the parity types carry bit level 1 exclusively.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMapping {
    a: Vec<f64>,
    levels: usize,
    n_types: usize,
    mode: MappingMode,
    parity_types: BTreeSet<usize>,
    /// Protograph column index of each mapping column.
    column_ids: Vec<usize>,
}

impl BitMapping {
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        mode: MappingMode,
        parity_types: impl IntoIterator<Item = usize>,
        column_ids: Vec<usize>,
    ) -> Result<Self, Error> {
        let levels = rows.len();
        let n_types = rows.first().map_or(0, Vec::len);
        if levels == 0 || n_types == 0 || rows.iter().any(|r| r.len() != n_types) {
            return Err(Error::BadDimensions);
        }
        if column_ids.len() != n_types {
            return Err(Error::BadDimensions);
        }
        let mapping = BitMapping {
            a: rows.into_iter().flatten().collect(),
            levels,
            n_types,
            mode,
            parity_types: parity_types.into_iter().collect(),
            column_ids,
        };
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn mode(&self) -> MappingMode {
        self.mode
    }

    pub fn parity_types(&self) -> &BTreeSet<usize> {
        &self.parity_types
    }

    pub fn column_ids(&self) -> &[usize] {
        &self.column_ids
    }

    /// Fraction of level `j` (0-based) on type `i`.
    pub fn entry(&self, j: usize, i: usize) -> f64 {
        self.a[j * self.n_types + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.a[j * self.n_types..(j + 1) * self.n_types]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.levels).map(|j| self.entry(j, i)).collect()
    }

    /// Checks row balance, column simplex and the shaped-mode forcing.
    pub fn validate(&self) -> Result<(), Error> {
        let row_target = self.n_types as f64 / self.levels as f64;
        for j in 0..self.levels {
            let sum: f64 = self.row(j).iter().sum();
            if (sum - row_target).abs() > CONSTRAINT_TOL * self.n_types as f64 {
                return Err(Error::RowBalance { level: j + 1, sum });
            }
        }
        for i in 0..self.n_types {
            let sum: f64 = self.column(i).iter().sum();
            if (sum - 1.0).abs() > CONSTRAINT_TOL {
                return Err(Error::ColumnSimplex { col: i, sum });
            }
            if self.a[i..].iter().step_by(self.n_types).any(|&v| v < -CONSTRAINT_TOL) {
                return Err(Error::NegativeEntry { col: i });
            }
        }
        if self.mode == MappingMode::Pas {
            for &i in &self.parity_types {
                if i >= self.n_types {
                    return Err(Error::BadDimensions);
                }
                if (self.entry(0, i) - 1.0).abs() > 0.0
                    || (1..self.levels).any(|j| self.entry(j, i) != 0.0)
                {
                    return Err(Error::ParityForcing { col: i });
                }
            }
        }
        Ok(())
    }

    /// Mapping file: a header row of protograph column indices followed by
    /// `m` rows of fractions.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let ids: Vec<String> = self.column_ids.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{}", ids.join(","));
        for j in 0..self.levels {
            let row: Vec<String> = self.row(j).iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        std::fs::write(path.as_ref(), self.to_csv())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn parse_csv(
        text: &str,
        mode: MappingMode,
        parity_types: impl IntoIterator<Item = usize>,
    ) -> Result<Self, Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::BadDimensions)?;
        let column_ids: Vec<usize> = header
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::Parse(header.into())))
            .collect::<Result<_, _>>()?;
        let rows: Vec<Vec<f64>> = lines
            .map(|l| {
                l.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(l.into())))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        BitMapping::from_rows(rows, mode, parity_types, column_ids)
    }

    pub fn load(
        path: impl AsRef<Path>,
        mode: MappingMode,
        parity_types: impl IntoIterator<Item = usize>,
    ) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse_csv(&text, mode, parity_types)
    }
}

/// Rows of the mapping that have already been fixed by the successive
/// optimizer, keyed by 0-based level.
#[derive(Debug, Clone, Default)]
pub struct FixedRows {
    levels: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl FixedRows {
    pub fn push(&mut self, level: usize, row: Vec<f64>) {
        debug_assert!(!self.levels.contains(&level));
        self.levels.push(level);
        self.rows.push(row);
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Column sums of the fixed rows (zero vector when empty).
    pub fn column_sums(&self, n_types: usize) -> Vec<f64> {
        let mut sums = vec![0.0; n_types];
        for row in &self.rows {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}

/// The all-uniform reference mapping `1/m · 1`, adjusted in shaped mode so
/// parity types carry level 1 exclusively and the remaining columns are
/// rebalanced to restore row balance.
pub fn reference_mapping(
    levels: usize,
    n_types: usize,
    mode: MappingMode,
    parity_types: impl IntoIterator<Item = usize>,
    column_ids: Vec<usize>,
) -> Result<BitMapping, Error> {
    let parity: BTreeSet<usize> = parity_types.into_iter().collect();
    match mode {
        MappingMode::Uniform => {
            let rows = vec![vec![1.0 / levels as f64; n_types]; levels];
            BitMapping::from_rows(rows, mode, parity, column_ids)
        }
        MappingMode::Pas => {
            let n_parity = parity.len();
            let n_free = n_types - n_parity;
            let row_target = n_types as f64 / levels as f64;
            let level1_free = row_target - n_parity as f64;
            if level1_free < -CONSTRAINT_TOL || n_free == 0 {
                return Err(Error::ParityBudget {
                    parity: n_parity,
                    budget: row_target,
                });
            }
            let a1 = level1_free / n_free as f64;
            let rest = (1.0 - a1) / (levels - 1) as f64;
            let mut rows = vec![vec![0.0; n_types]; levels];
            for i in 0..n_types {
                if parity.contains(&i) {
                    rows[0][i] = 1.0;
                } else {
                    rows[0][i] = a1;
                    for row in rows.iter_mut().skip(1) {
                        row[i] = rest;
                    }
                }
            }
            BitMapping::from_rows(rows, mode, parity, column_ids)
        }
    }
}

/// Assembles a full mapping from an optional free row, the fixed rows and
/// an equal split of the leftover column mass over the remaining levels.
/// In shaped mode the parity columns are hard-wired to level 1 first and
/// only the free columns participate.
pub fn make_a(
    free: Option<(usize, &[f64])>,
    fixed: &FixedRows,
    levels: usize,
    mode: MappingMode,
    parity_types: &BTreeSet<usize>,
    column_ids: Vec<usize>,
) -> Result<BitMapping, Error> {
    let n_types = column_ids.len();
    let mut rows = vec![vec![0.0; n_types]; levels];
    let mut assigned = vec![false; levels];

    // forced shaped-mode columns
    let is_forced = |i: usize| mode == MappingMode::Pas && parity_types.contains(&i);

    for (&level, row) in fixed.levels.iter().zip(&fixed.rows) {
        rows[level].clone_from(row);
        assigned[level] = true;
    }
    if let Some((level, row)) = free {
        if assigned[level] {
            return Err(Error::LevelFixedTwice { level: level + 1 });
        }
        if row.len() != n_types {
            return Err(Error::BadDimensions);
        }
        rows[level].copy_from_slice(row);
        assigned[level] = true;
    }
    for i in 0..n_types {
        if is_forced(i) {
            // level 1 carries the whole column; fixed or free rows must agree
            for (level, row) in rows.iter_mut().enumerate() {
                let want = if level == 0 { 1.0 } else { 0.0 };
                if assigned[level] && (row[i] - want).abs() > CONSTRAINT_TOL {
                    return Err(Error::ParityForcing { col: i });
                }
                row[i] = want;
            }
        }
    }

    // budget check and split of the leftover over the remaining levels,
    // proportional to each level's required free-column row sum (equal
    // split in uniform mode; in shaped mode level one's share shrinks by
    // the mass already forced onto the parity columns)
    let remaining: Vec<usize> = (0..levels).filter(|&l| !assigned[l]).collect();
    let row_target = n_types as f64 / levels as f64;
    let required = |level: usize| -> f64 {
        if mode == MappingMode::Pas && level == 0 {
            row_target - parity_types.len() as f64
        } else {
            row_target
        }
    };
    let req_total: f64 = remaining.iter().map(|&l| required(l)).sum();
    for i in 0..n_types {
        if is_forced(i) {
            continue;
        }
        let used: f64 = (0..levels).filter(|&l| assigned[l]).map(|l| rows[l][i]).sum();
        if used > 1.0 + CONSTRAINT_TOL {
            return Err(Error::ColumnBudget { col: i, used });
        }
        let leftover = (1.0 - used).max(0.0);
        if remaining.is_empty() {
            if leftover > CONSTRAINT_TOL {
                return Err(Error::ColumnBudget { col: i, used });
            }
        } else {
            for &l in &remaining {
                rows[l][i] = leftover * required(l) / req_total;
            }
        }
    }
    BitMapping::from_rows(rows, mode, parity_types.clone(), column_ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_reference() {
        let m = reference_mapping(3, 4, MappingMode::Uniform, [], vec![0, 1, 2, 3]).unwrap();
        for j in 0..3 {
            for i in 0..4 {
                assert_relative_eq!(m.entry(j, i), 1.0 / 3.0);
            }
        }
    }

    #[test]
    fn single_level_reference_is_all_ones() {
        let m = reference_mapping(1, 3, MappingMode::Uniform, [], vec![0, 1, 2]).unwrap();
        assert_eq!(m.row(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn pas_reference_two_by_two() {
        // m=2, n=2, parity {1}: forced column (1,0); row balance forces the
        // other column to (0,1)
        let m = reference_mapping(2, 2, MappingMode::Pas, [1], vec![0, 1]).unwrap();
        assert_relative_eq!(m.entry(0, 1), 1.0);
        assert_relative_eq!(m.entry(1, 1), 0.0);
        assert_relative_eq!(m.entry(0, 0), 0.0);
        assert_relative_eq!(m.entry(1, 0), 1.0);
    }

    #[test]
    fn pas_reference_infeasible_budget() {
        // 3 parity columns but row-1 budget is n/m = 2
        let err = reference_mapping(2, 4, MappingMode::Pas, [0, 1, 2], vec![0, 1, 2, 3]);
        assert!(matches!(err, Err(Error::ParityBudget { .. })));
    }

    #[test]
    fn make_a_uniform_cases() {
        // no fixed rows, uniform free row: the reference mapping
        let free = vec![0.25; 4];
        let m = make_a(
            Some((0, &free)),
            &FixedRows::default(),
            4,
            MappingMode::Uniform,
            &BTreeSet::new(),
            vec![0, 1, 2, 3],
        )
        .unwrap();
        let r = reference_mapping(4, 4, MappingMode::Uniform, [], vec![0, 1, 2, 3]).unwrap();
        assert_eq!(m, r);

        // one fixed row + one free row: the third is the componentwise rest
        let mut fixed = FixedRows::default();
        fixed.push(0, vec![1.0, 0.0, 0.0]);
        let free = vec![0.0, 0.75, 0.25];
        let m = make_a(
            Some((1, &free)),
            &fixed,
            3,
            MappingMode::Uniform,
            &BTreeSet::new(),
            vec![0, 1, 2],
        )
        .unwrap();
        for i in 0..3 {
            assert_relative_eq!(
                m.entry(2, i),
                1.0 - m.entry(0, i) - m.entry(1, i),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn make_a_empty_matches_reference_in_both_modes() {
        let ids: Vec<usize> = (0..6).collect();
        let uniform = make_a(
            None,
            &FixedRows::default(),
            3,
            MappingMode::Uniform,
            &BTreeSet::new(),
            ids.clone(),
        )
        .unwrap();
        assert_eq!(
            uniform,
            reference_mapping(3, 6, MappingMode::Uniform, [], ids.clone()).unwrap()
        );
        let parity: BTreeSet<usize> = [0, 1].into_iter().collect();
        let pas = make_a(
            None,
            &FixedRows::default(),
            3,
            MappingMode::Pas,
            &parity,
            ids.clone(),
        )
        .unwrap();
        assert_eq!(
            pas,
            reference_mapping(3, 6, MappingMode::Pas, [0, 1], ids).unwrap()
        );
    }

    #[test]
    fn make_a_rejects_budget_violation() {
        let mut fixed = FixedRows::default();
        fixed.push(0, vec![0.9, 0.9]);
        let free = vec![0.2, 0.0];
        let err = make_a(
            Some((1, &free)),
            &fixed,
            2,
            MappingMode::Uniform,
            &BTreeSet::new(),
            vec![0, 1],
        );
        assert!(matches!(err, Err(Error::ColumnBudget { .. })));
    }

    #[test]
    fn validate_catches_constraint_violations() {
        let bad = BitMapping::from_rows(
            vec![vec![0.6, 0.6], vec![0.4, 0.4]],
            MappingMode::Uniform,
            [],
            vec![0, 1],
        );
        assert!(matches!(bad, Err(Error::RowBalance { .. })));
        let bad = BitMapping::from_rows(
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            MappingMode::Uniform,
            [],
            vec![0, 1],
        );
        assert!(matches!(bad, Err(Error::ColumnSimplex { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let m = reference_mapping(3, 5, MappingMode::Uniform, [], vec![2, 3, 5, 7, 8]).unwrap();
        let text = m.to_csv();
        let back = BitMapping::parse_csv(&text, MappingMode::Uniform, []).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.column_ids(), &[2, 3, 5, 7, 8]);
    }
}
