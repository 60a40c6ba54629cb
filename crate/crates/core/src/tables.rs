//! Dense multiway contingency tables and the permutation actions on them.
//!
//! Counts are stored as integers in row-major (lexicographic multi-index)
//! order; the last axis varies fastest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// A k-way table of nonnegative integer counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    dims: Vec<usize>,
    counts: Vec<u64>,
    #[serde(skip)]
    total: u64,
}

#[derive(Deserialize)]
struct RawTable {
    dims: Vec<i64>,
    counts: Vec<i64>,
}

impl ContingencyTable {
    pub fn new(dims: Vec<usize>, counts: Vec<u64>) -> Result<Self, ParseError> {
        if dims.is_empty() {
            return Err(ParseError::Malformed("dims must not be empty".into()));
        }
        if let Some((axis, &categories)) = dims.iter().enumerate().find(|(_, &d)| d < 2) {
            return Err(ParseError::DegenerateAxis { axis, categories });
        }
        let expected: usize = dims.iter().product();
        if expected != counts.len() {
            return Err(ParseError::CellCountMismatch {
                dims,
                expected,
                found: counts.len(),
            });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(ParseError::EmptyTable);
        }
        Ok(Self {
            dims,
            counts,
            total,
        })
    }

    fn from_signed(dims: Vec<i64>, counts: Vec<i64>) -> Result<Self, ParseError> {
        let dims = dims
            .into_iter()
            .enumerate()
            .map(|(axis, d)| {
                usize::try_from(d).map_err(|_| ParseError::DegenerateAxis {
                    axis,
                    categories: 0,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let counts = counts
            .into_iter()
            .enumerate()
            .map(|(cell, v)| {
                u64::try_from(v).map_err(|_| ParseError::NegativeCount { cell, value: v })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dims, counts)
    }

    /// Parses a JSON `{dims, counts}` document, or a CSV matrix for two-way
    /// tables. The format is chosen by the first non-blank character.
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let trimmed = source.trim_start();
        if trimmed.starts_with('{') {
            let raw: RawTable =
                serde_json::from_str(trimmed).map_err(|e| ParseError::Malformed(e.to_string()))?;
            Self::from_signed(raw.dims, raw.counts)
        } else {
            Self::parse_csv(trimmed)
        }
    }

    fn parse_csv(source: &str) -> Result<Self, ParseError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(source.as_bytes());
        let mut rows: Vec<Vec<i64>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| ParseError::Malformed(e.to_string()))?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let row = record
                .iter()
                .map(|field| {
                    field
                        .parse::<i64>()
                        .map_err(|_| ParseError::Malformed(format!("not an integer: {field:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(ParseError::Malformed("empty CSV document".into()));
        }
        let ncols = rows[0].len();
        let nrows = rows.len() as i64;
        let counts: Vec<i64> = rows.into_iter().flatten().collect();
        Self::from_signed(vec![nrows, ncols as i64], counts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table serialization cannot fail")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_cells(&self) -> usize {
        self.counts.len()
    }

    pub fn n_axes(&self) -> usize {
        self.dims.len()
    }

    /// Counts converted to floating point for likelihood code.
    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn get(&self, index: &[usize]) -> u64 {
        self.counts[flat_index(&self.dims, index)]
    }

    pub fn is_square_two_way(&self) -> bool {
        self.dims.len() == 2 && self.dims[0] == self.dims[1]
    }

    fn square_side(&self) -> Result<usize> {
        if self.is_square_two_way() {
            Ok(self.dims[0])
        } else {
            Err(Error::NotSquare(self.dims.clone()))
        }
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let counts = self.counts.iter().map(|&c| c * factor).collect();
        Self::new(self.dims.clone(), counts).expect("scaling preserves validity")
    }
}

/// Reads a table from a `.json` or `.csv` file.
pub fn load_table_file(path: impl AsRef<Path>) -> Result<ContingencyTable> {
    let text = std::fs::read_to_string(path)?;
    Ok(load_table(&text)?)
}

pub fn load_table(source: &str) -> Result<ContingencyTable, ParseError> {
    ContingencyTable::parse(source)
}

/// Row-major strides for the given axis sizes.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for l in (0..dims.len().saturating_sub(1)).rev() {
        strides[l] = strides[l + 1] * dims[l + 1];
    }
    strides
}

pub fn flat_index(dims: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), index.len());
    index.iter().zip(dims).fold(0, |acc, (&i, &d)| {
        debug_assert!(i < d);
        acc * d + i
    })
}

/// Decodes a flat cell number into its multi-index.
pub fn multi_index(dims: &[usize], mut cell: usize, out: &mut [usize]) {
    for l in (0..dims.len()).rev() {
        out[l] = cell % dims[l];
        cell /= dims[l];
    }
}

/// Iterates all multi-indices in lexicographic order.
pub fn cells(dims: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n: usize = dims.iter().product();
    (0..n).map(move |cell| {
        let mut idx = vec![0; dims.len()];
        multi_index(dims, cell, &mut idx);
        idx
    })
}

/// A bijection on `{0, .., n-1}`, stored as its image vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPermutation(format!(
                    "{images:?} is not a bijection on 0..{n}"
                )));
            }
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// The transposition exchanging `i` and `j`.
    pub fn swap(n: usize, i: usize, j: usize) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(i, j);
        Self(images)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }
}

/// Which axes a category permutation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationScope {
    /// A single axis.
    Axis(usize),
    /// Both axes of a square two-way table simultaneously.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisPermutation {
    pub scope: PermutationScope,
    pub perm: Permutation,
}

impl AxisPermutation {
    /// Permuted table whose entry at `i` is the original entry at `σ(i)` on
    /// the affected axes.
    pub fn apply(&self, t: &ContingencyTable) -> Result<ContingencyTable> {
        match self.scope {
            PermutationScope::Joint => apply_joint_permutation(t, &self.perm),
            PermutationScope::Axis(axis) => {
                let d = *t.dims.get(axis).ok_or(Error::IndexOutOfRange {
                    index: axis,
                    len: t.n_axes(),
                })?;
                if self.perm.len() != d {
                    return Err(Error::InvalidPermutation(format!(
                        "permutation of length {} on axis with {d} categories",
                        self.perm.len()
                    )));
                }
                let mut src = vec![0; t.n_axes()];
                let counts = cells(&t.dims)
                    .map(|idx| {
                        src.copy_from_slice(&idx);
                        src[axis] = self.perm.apply(idx[axis]);
                        t.get(&src)
                    })
                    .collect();
                Ok(ContingencyTable::new(t.dims.clone(), counts)?)
            }
        }
    }
}

/// Simultaneous row/column relabeling of a square two-way table:
/// entry `(i, j)` of the result is entry `(σ(i), σ(j))` of `t`.
pub fn apply_joint_permutation(
    t: &ContingencyTable,
    sigma: &Permutation,
) -> Result<ContingencyTable> {
    let n = t.square_side()?;
    if sigma.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "permutation of length {} on a {n}x{n} table",
            sigma.len()
        )));
    }
    let counts = (0..n * n)
        .map(|cell| t.counts[sigma.apply(cell / n) * n + sigma.apply(cell % n)])
        .collect();
    Ok(ContingencyTable::new(t.dims.clone(), counts)?)
}

/// True iff exchanging rows `i, j` together with columns `i, j` leaves the
/// table unchanged.
pub fn is_exchange_symmetric(t: &ContingencyTable, i: usize, j: usize) -> Result<bool> {
    let n = t.square_side()?;
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
    }
    let swapped = apply_joint_permutation(t, &Permutation::swap(n, i, j))?;
    Ok(swapped == *t)
}

/// True iff the table is fixed by every simultaneous row/column permutation,
/// i.e. it is constant on the diagonal and constant off it.
pub fn is_fully_exchangeable(t: &ContingencyTable) -> bool {
    if !t.is_square_two_way() {
        return false;
    }
    let n = t.dims[0];
    let diag = t.counts[0];
    let off = t.counts[1];
    (0..n * n).all(|c| t.counts[c] == if c / n == c % n { diag } else { off })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn bumped() -> ContingencyTable {
        // fully exchangeable 4x4 plus a bump at (1,2) and (2,1) (1-based)
        let mut counts = fixtures::swiss().counts().to_vec();
        counts[1] += 3;
        counts[4] += 3;
        ContingencyTable::new(vec![4, 4], counts).unwrap()
    }

    #[test]
    fn swiss_document_totals_forty() {
        let t = fixtures::swiss();
        assert_eq!(t.total(), 40);
        assert_eq!(t.get(&[2, 2]), 4);
        assert_eq!(t.get(&[0, 3]), 2);
    }

    #[test]
    fn influenza_document_totals_263() {
        let t = fixtures::influenza();
        assert_eq!(t.dims(), &[2, 2, 2, 2]);
        assert_eq!(t.total(), 263);
        assert_eq!(t.get(&[0, 0, 0, 0]), 140);
    }

    #[test]
    fn degenerate_axis_rejected() {
        let err = load_table(r#"{"dims": [1, 3], "counts": [1, 2, 3]}"#).unwrap_err();
        assert_eq!(
            err,
            ParseError::DegenerateAxis {
                axis: 0,
                categories: 1
            }
        );
    }

    #[test]
    fn distinct_parse_errors() {
        assert!(matches!(
            load_table("{\"dims\": [2,2]"),
            Err(ParseError::Malformed(_))
        ));
        assert!(matches!(
            load_table(r#"{"dims": [2, 2], "counts": [1, -2, 3, 4]}"#),
            Err(ParseError::NegativeCount { cell: 1, value: -2 })
        ));
        assert!(matches!(
            load_table(r#"{"dims": [2, 2], "counts": [1, 2, 3]}"#),
            Err(ParseError::CellCountMismatch {
                expected: 4,
                found: 3,
                ..
            })
        ));
        assert!(matches!(
            load_table("1,2\n3,x\n"),
            Err(ParseError::Malformed(_))
        ));
        assert!(matches!(
            load_table("1,2\n3\n"),
            Err(ParseError::Malformed(_))
        ));
        assert_eq!(load_table("0,0\n0,0\n"), Err(ParseError::EmptyTable));
    }

    #[test]
    fn csv_matches_json() {
        let csv = include_str!("../data/swiss.csv");
        assert_eq!(load_table(csv).unwrap(), fixtures::swiss());
    }

    #[test]
    fn joint_permutation_of_symmetric_data_is_identity() {
        let t = fixtures::swiss();
        let sigma = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        assert_eq!(apply_joint_permutation(&t, &sigma).unwrap(), t);
        assert_eq!(
            apply_joint_permutation(&bumped(), &Permutation::identity(4)).unwrap(),
            bumped()
        );
    }

    #[test]
    fn block_table_fixed_by_double_transposition() {
        let t = ContingencyTable::new(
            vec![4, 4],
            vec![3, 3, 2, 2, 3, 3, 2, 2, 2, 2, 3, 3, 2, 2, 3, 3],
        )
        .unwrap();
        // (1 3)(2 4) in 1-based notation
        let sigma = Permutation::new(vec![2, 3, 0, 1]).unwrap();
        assert_eq!(apply_joint_permutation(&t, &sigma).unwrap(), t);
    }

    #[test]
    fn joint_permutation_requires_square() {
        let t = load_table("1,2,3\n4,5,6\n").unwrap();
        assert!(matches!(
            apply_joint_permutation(&t, &Permutation::identity(2)),
            Err(Error::NotSquare(_))
        ));
    }

    #[test]
    fn exchange_symmetry() {
        let t = fixtures::swiss();
        assert!(is_exchange_symmetric(&t, 0, 1).unwrap());
        let b = bumped();
        assert!(is_exchange_symmetric(&b, 2, 3).unwrap());
        // direct entry comparison: swapping 0 and 2 moves the bump from
        // (0,1) to (2,1), where the original has an unbumped 2
        assert_ne!(b.get(&[0, 1]), b.get(&[2, 1]));
        assert!(!is_exchange_symmetric(&b, 0, 2).unwrap());
        assert!(matches!(
            is_exchange_symmetric(&b, 0, 4),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn single_axis_permutation() {
        let t = load_table("1,2,3\n4,5,6\n").unwrap();
        let p = AxisPermutation {
            scope: PermutationScope::Axis(1),
            perm: Permutation::new(vec![2, 0, 1]).unwrap(),
        };
        assert_eq!(p.apply(&t).unwrap().counts(), &[3, 1, 2, 6, 4, 5]);
    }

    #[test]
    fn invalid_permutation_rejected() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }
}
