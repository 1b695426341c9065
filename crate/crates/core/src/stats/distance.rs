//! Pairwise geodesic distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{solve_match, MatchConfig, MatchProblem};
use crate::spline::SplineCurve;

/// Result of matching shape `i` onto shape `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub i: usize,
    pub j: usize,
    pub distance: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Matches `shapes[i]` onto `shapes[j]`.
pub fn match_pair(shapes: &[SplineCurve], i: usize, j: usize, config: &MatchConfig) -> PairOutcome {
    let solved = MatchProblem::new(shapes[i].clone(), shapes[j].clone(), config.clone())
        .and_then(|p| solve_match(&p));
    match solved {
        Ok(r) => PairOutcome {
            i,
            j,
            distance: Some(r.distance),
            converged: r.converged,
            error: None,
        },
        Err(e) => {
            log::warn!("match {i} -> {j} failed: {e}");
            PairOutcome {
                i,
                j,
                distance: None,
                converged: false,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Per-entry status after symmetrization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryFlag {
    /// Both directions converged.
    Converged,
    /// Both directions finished, at least one without converging.
    NotConverged,
    /// One direction failed; the other direction's value is used.
    Transposed,
}

/// Symmetrized distance matrix with per-entry flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    /// Directed distances `d(i → j)` before symmetrization.
    raw: Vec<Option<f64>>,
    flags: Vec<EntryFlag>,
}

impl DistanceMatrix {
    /// Builds the matrix from directed outcomes covering every `i ≠ j`.
    pub fn from_outcomes(n: usize, outcomes: &[PairOutcome]) -> Result<Self> {
        let mut raw = vec![None; n * n];
        let mut conv = vec![false; n * n];
        let mut reason = vec![String::new(); n * n];
        for o in outcomes {
            if o.i >= n || o.j >= n || o.i == o.j {
                return Err(Error::invalid(format!("bad matrix entry ({}, {})", o.i, o.j)));
            }
            raw[o.i * n + o.j] = o.distance;
            conv[o.i * n + o.j] = o.converged;
            reason[o.i * n + o.j] = o.error.clone().unwrap_or_else(|| "not computed".into());
        }
        let mut values = vec![0.0; n * n];
        let mut flags = vec![EntryFlag::Converged; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (i * n + j, j * n + i);
                let (v, flag) = match (raw[a], raw[b]) {
                    (Some(x), Some(y)) => (
                        0.5 * (x + y),
                        if conv[a] && conv[b] {
                            EntryFlag::Converged
                        } else {
                            EntryFlag::NotConverged
                        },
                    ),
                    (Some(x), None) | (None, Some(x)) => (x, EntryFlag::Transposed),
                    (None, None) => {
                        return Err(Error::MissingEntry {
                            i,
                            j,
                            reason: reason[a].clone(),
                        })
                    }
                };
                values[a] = v;
                values[b] = v;
                flags[a] = flag;
                flags[b] = flag;
            }
        }
        Ok(Self {
            n,
            values,
            raw,
            flags,
        })
    }

    /// A matrix given directly, for example read back from disk. It must be
    /// symmetric with zero diagonal.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::invalid("distance matrix has the wrong size"));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(v.is_finite() && v >= 0.0) || v != values[j * n + i] {
                    return Err(Error::invalid(
                        "distance matrix must be symmetric, finite and non-negative",
                    ));
                }
            }
        }
        Ok(Self {
            n,
            raw: values.iter().map(|&v| Some(v)).collect(),
            values,
            flags: vec![EntryFlag::Converged; n * n],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn raw(&self, i: usize, j: usize) -> Option<f64> {
        self.raw[i * self.n + j]
    }

    pub fn flag(&self, i: usize, j: usize) -> EntryFlag {
        self.flags[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn all_converged(&self) -> bool {
        self.flags.iter().all(|f| *f == EntryFlag::Converged)
    }

    /// Largest relative asymmetry `|d_ij − d_ji| / max(d_ij, d_ji)` of the
    /// directed distances.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if let (Some(a), Some(b)) = (self.raw(i, j), self.raw(j, i)) {
                    let m = a.max(b);
                    if m > 0.0 {
                        worst = worst.max((a - b).abs() / m);
                    }
                }
            }
        }
        worst
    }

    /// Same matrix with rows and columns reordered: entry `(a, b)` of the
    /// result is entry `(perm[a], perm[b])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let pick = |a: usize, b: usize| perm[a] * n + perm[b];
        Self {
            n,
            values: (0..n * n).map(|k| self.values[pick(k / n, k % n)]).collect(),
            raw: (0..n * n).map(|k| self.raw[pick(k / n, k % n)]).collect(),
            flags: (0..n * n).map(|k| self.flags[pick(k / n, k % n)]).collect(),
        }
    }
}

/// All directed pairs `(i, j)`, `i ≠ j`, in row-major order.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// Computes every directed pair not already in `done`, calling `on_entry`
/// as each finishes (from worker threads), and returns all outcomes in
/// row-major order. At most `limit` new pairs are computed.
pub fn compute_pairs<F>(
    shapes: &[SplineCurve],
    config: &MatchConfig,
    done: &[PairOutcome],
    limit: Option<usize>,
    on_entry: F,
) -> Vec<PairOutcome>
where
    F: Fn(&PairOutcome) + Sync,
{
    let n = shapes.len();
    let mut have = vec![None; n * n];
    for o in done {
        if o.i < n && o.j < n {
            have[o.i * n + o.j] = Some(o.clone());
        }
    }
    let todo: Vec<(usize, usize)> = all_pairs(n)
        .into_iter()
        .filter(|&(i, j)| have[i * n + j].is_none())
        .take(limit.unwrap_or(usize::MAX))
        .collect();
    let fresh: Vec<PairOutcome> = todo
        .par_iter()
        .map(|&(i, j)| {
            let o = match_pair(shapes, i, j, config);
            on_entry(&o);
            o
        })
        .collect();
    for o in fresh {
        let k = o.i * n + o.j;
        have[k] = Some(o);
    }
    have.into_iter().flatten().collect()
}

/// Symmetrized matrix of geodesic distance estimates between all shapes.
pub fn distance_matrix(shapes: &[SplineCurve], config: &MatchConfig) -> Result<DistanceMatrix> {
    if shapes.len() < 2 {
        return Err(Error::invalid("a distance matrix needs at least two shapes"));
    }
    config.validate()?;
    let outcomes = compute_pairs(shapes, config, &[], None, |_| {});
    DistanceMatrix::from_outcomes(shapes.len(), &outcomes)
}
