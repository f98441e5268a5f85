//! Maximum-benefit linear assignment.
//!
//! [`hungarian_max`] is the O(n³) shortest-augmenting-path Hungarian method
//! with row/column potentials. [`brute_force_assignment`] enumerates every
//! permutation and is only meant as a test oracle for small matrices.

use thiserror::Error;

use crate::model::{ModelError, Pairing};

/// Largest padded size the permutation oracle accepts (9! ≈ 3.6e5).
pub const BRUTE_FORCE_MAX_SIZE: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("empty benefit matrix")]
    Empty,
    #[error("row {row} has {got} columns, expected {expected}")]
    Ragged {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("entry ({row}, {col}) is not finite: {value}")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("padded size {size} exceeds the brute-force limit of {max}")]
    TooLarge { size: usize, max: usize },
    #[error("{users} {side} users cannot fit on {channels} channels")]
    ChannelBudget {
        side: &'static str,
        users: usize,
        channels: usize,
    },
    #[error("no feasible perfect matching over the allowed entries")]
    Infeasible,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Row-to-column assignment of an `R × C` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column chosen for each row; `None` when the row landed on padding.
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the selected real entries, accumulated in row order.
    pub total: f64,
}

fn shape(values: &[Vec<f64>]) -> Result<(usize, usize), AssignmentError> {
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(AssignmentError::Empty);
    }
    for (row, r) in values.iter().enumerate() {
        if r.len() != cols {
            return Err(AssignmentError::Ragged {
                row,
                got: r.len(),
                expected: cols,
            });
        }
    }
    Ok((rows, cols))
}

fn require_finite(values: &[Vec<f64>]) -> Result<(), AssignmentError> {
    for (row, r) in values.iter().enumerate() {
        for (col, &value) in r.iter().enumerate() {
            if !value.is_finite() {
                return Err(AssignmentError::NonFinite { row, col, value });
            }
        }
    }
    Ok(())
}

fn total_of(values: &[Vec<f64>], row_to_col: &[Option<usize>]) -> f64 {
    row_to_col
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| values[r][c]))
        .sum()
}

/// Maximum-total assignment on the square zero-padding of `values`.
pub fn hungarian_max(values: &[Vec<f64>]) -> Result<Assignment, AssignmentError> {
    shape(values)?;
    require_finite(values)?;
    max_assignment(values)
}

/// Hungarian core. `f64::NEG_INFINITY` entries are forbidden.
fn max_assignment(values: &[Vec<f64>]) -> Result<Assignment, AssignmentError> {
    let (rows, cols) = shape(values)?;
    let n = rows.max(cols);
    // maximization becomes minimization of `top - v`, which is nonnegative
    let top = values
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let top = if top.is_finite() { top.max(0.0) } else { 0.0 };
    let cost = |r: usize, c: usize| -> Option<f64> {
        if r < rows && c < cols {
            let v = values[r][c];
            v.is_finite().then_some(top - v)
        } else {
            Some(top)
        }
    };

    // 1-based potentials; index 0 is the virtual source column
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                if let Some(c) = cost(i0 - 1, j - 1) {
                    let cur = c - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return Err(AssignmentError::Infeasible);
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; rows];
    for (j, &i) in row_of_col.iter().enumerate().skip(1) {
        if i >= 1 && i <= rows && j <= cols {
            row_to_col[i - 1] = Some(j - 1);
        }
    }
    let total = total_of(values, &row_to_col);
    Ok(Assignment { row_to_col, total })
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Exact optimum by enumerating every permutation of the padded square.
///
/// Permutations are visited in lexicographic order and only a strictly
/// better total replaces the incumbent, so ties go to the
/// lexicographically first permutation.
pub fn brute_force_assignment(values: &[Vec<f64>]) -> Result<Assignment, AssignmentError> {
    let (rows, cols) = shape(values)?;
    require_finite(values)?;
    let n = rows.max(cols);
    if n > BRUTE_FORCE_MAX_SIZE {
        return Err(AssignmentError::TooLarge {
            size: n,
            max: BRUTE_FORCE_MAX_SIZE,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Assignment> = None;
    loop {
        let row_to_col: Vec<Option<usize>> =
            perm[..rows].iter().map(|&c| (c < cols).then_some(c)).collect();
        let total = total_of(values, &row_to_col);
        if best.as_ref().is_none_or(|b| total > b.total) {
            best = Some(Assignment { row_to_col, total });
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Pair benefits plus the value of leaving each user alone on a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BenefitMatrix {
    /// `values[i][j]`: benefit of pairing UL user `i` with DL user `j`.
    pub values: Vec<Vec<f64>>,
    pub solo_ul: Vec<f64>,
    pub solo_dl: Vec<f64>,
}

impl BenefitMatrix {
    pub fn num_ul(&self) -> usize {
        self.solo_ul.len()
    }

    pub fn num_dl(&self) -> usize {
        self.solo_dl.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoloAssignment {
    pub pairing: Pairing,
    /// Sum of chosen pair benefits and solo contributions.
    pub total: f64,
}

/// Chooses, for every user, either a partner or a channel of its own.
///
/// The augmented square problem has rows `[UL users | DL slots]` and
/// columns `[DL users | UL slots]`:
///
/// * UL `i` × DL `j` scores `s_ij`,
/// * UL `i` × any UL slot scores `solo_ul[i]`,
/// * a DL slot × DL `j` scores `solo_dl[j]`,
/// * DL slot × UL slot scores 0.
///
/// With `I + J > F` at least `m = I + J - F` pairs are needed to fit on the
/// channels; the last `m` DL slots are then barred from DL users, which
/// caps the number of lone DL users at `J - m`.
pub fn assign_with_solo(
    b: &BenefitMatrix,
    num_channels: usize,
) -> Result<SoloAssignment, AssignmentError> {
    let (ni, nj) = (b.num_ul(), b.num_dl());
    if ni > num_channels {
        return Err(AssignmentError::ChannelBudget {
            side: "UL",
            users: ni,
            channels: num_channels,
        });
    }
    if nj > num_channels {
        return Err(AssignmentError::ChannelBudget {
            side: "DL",
            users: nj,
            channels: num_channels,
        });
    }
    if b.values.len() != ni {
        return Err(ModelError::Dimension {
            what: "benefit rows",
            got: b.values.len(),
            expected: ni,
        }
        .into());
    }
    for (row, r) in b.values.iter().enumerate() {
        if r.len() != nj {
            return Err(AssignmentError::Ragged {
                row,
                got: r.len(),
                expected: nj,
            });
        }
    }
    require_finite(&b.values)?;
    require_finite(&[b.solo_ul.clone(), b.solo_dl.clone()])?;
    let n = ni + nj;
    if n == 0 {
        return Ok(SoloAssignment {
            pairing: Pairing::empty(0, 0),
            total: 0.0,
        });
    }
    let forced_pairs = n.saturating_sub(num_channels);
    let free_dl_slots = nj - forced_pairs;

    let mut m = vec![vec![0.0; n]; n];
    for i in 0..ni {
        m[i][..nj].copy_from_slice(&b.values[i]);
        for cell in &mut m[i][nj..] {
            *cell = b.solo_ul[i];
        }
    }
    for r in 0..nj {
        for j in 0..nj {
            m[ni + r][j] = if r < free_dl_slots {
                b.solo_dl[j]
            } else {
                f64::NEG_INFINITY
            };
        }
    }
    let a = max_assignment(&m)?;
    let partners = a.row_to_col[..ni]
        .iter()
        .map(|c| c.filter(|&c| c < nj))
        .collect();
    let pairing = Pairing::from_ul_partners(partners, nj)?;
    Ok(SoloAssignment {
        pairing,
        total: a.total,
    })
}
