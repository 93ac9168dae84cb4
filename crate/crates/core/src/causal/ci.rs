//! Fisher-z conditional independence testing and PC-stable skeleton search.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use nalgebra::DMatrix;
use statrs::function::erf::erfc;

use super::StructuralConstraints;
use crate::data::{mean_sd, Dataset};
use crate::error::{Error, Result};
use crate::par;

/// Pearson correlations of a fixed list of columns, computed once.
#[derive(Clone, Debug)]
pub struct Correlations {
    names: Vec<String>,
    r: DMatrix<f64>,
    n: usize,
}

impl Correlations {
    pub fn new(ds: &Dataset, names: &[String]) -> Result<Self> {
        let n = ds.n_rows();
        let mut z = Vec::with_capacity(names.len());
        for name in names {
            let x = ds.numeric(name)?;
            let (m, s) = mean_sd(&x);
            if !(s > 0.0) {
                return Err(Error::ConstantColumn(name.clone()));
            }
            z.push(x.iter().map(|v| (v - m) / s).collect::<Vec<_>>());
        }
        let d = names.len();
        let mut r = DMatrix::identity(d, d);
        for i in 0..d {
            for j in i + 1..d {
                let c = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 - 1.0);
                let c = c.clamp(-1.0, 1.0);
                r[(i, j)] = c;
                r[(j, i)] = c;
            }
        }
        Ok(Correlations {
            names: names.to_vec(),
            r,
            n,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[(i, j)]
    }

    /// Partial correlation of `i` and `j` given `s` from the inverse of the
    /// correlation submatrix over `[i, j, s..]`.
    pub fn partial(&self, i: usize, j: usize, s: &[usize]) -> Result<f64> {
        if i == j {
            return Ok(1.0);
        }
        if self.n <= s.len() + 3 {
            return Err(Error::InvalidArgument(format!(
                "{} rows cannot support a conditioning set of size {}",
                self.n,
                s.len()
            )));
        }
        if s.is_empty() {
            return Ok(self.r[(i, j)]);
        }
        let idx: Vec<usize> = [i, j].into_iter().chain(s.iter().copied()).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.r[(idx[a], idx[b])]);
        let chol = sub
            .cholesky()
            .ok_or_else(|| Error::Singular("correlation submatrix".into()))?;
        let diag_min = chol.l_dirty().diagonal().min();
        if diag_min < 1e-7 {
            return Err(Error::Singular("correlation submatrix".into()));
        }
        let p = chol.inverse();
        let r = -p[(0, 1)] / (p[(0, 0)] * p[(1, 1)]).sqrt();
        Ok(r.clamp(-1.0, 1.0))
    }
}

/// Partial correlation of two dataset columns given a conditioning set.
pub fn partial_correlation(ds: &Dataset, i: &str, j: &str, s: &[&str]) -> Result<f64> {
    let mut names: Vec<String> = vec![i.to_string()];
    if j != i {
        names.push(j.to_string());
    }
    names.extend(s.iter().map(|x| x.to_string()));
    let c = Correlations::new(ds, &names)?;
    let jj = if j == i { 0 } else { 1 };
    let first_s = names.len() - s.len();
    let sidx: Vec<usize> = (first_s..names.len()).collect();
    c.partial(0, jj, &sidx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CiOutcome {
    pub independent: bool,
    pub statistic: f64,
    pub p_value: f64,
}

/// Fisher's z test on a (partial) correlation `r` from `n` samples with a
/// conditioning set of size `s`.
pub fn fisher_z_test(r: f64, n: usize, s: usize, alpha: f64) -> Result<CiOutcome> {
    if n <= s + 3 {
        return Err(Error::InvalidArgument(format!(
            "n - s - 3 must be positive (n={n}, s={s})"
        )));
    }
    if !(0.0..1.0).contains(&alpha) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bad test inputs r={r} alpha={alpha}"
        )));
    }
    if r.abs() >= 1.0 {
        return Ok(CiOutcome {
            independent: false,
            statistic: f64::INFINITY,
            p_value: 0.0,
        });
    }
    let statistic = ((n - s - 3) as f64).sqrt() * r.atanh().abs();
    let p_value = erfc(statistic / std::f64::consts::SQRT_2);
    Ok(CiOutcome {
        independent: p_value > alpha,
        statistic,
        p_value,
    })
}

/// Undirected skeleton plus the separating set that removed each absent edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub names: Vec<String>,
    pub adjacent: Vec<Vec<bool>>,
    /// Keyed `(i, j)` with `i < j`.
    pub sepsets: BTreeMap<(usize, usize), Vec<usize>>,
    /// For each unshielded triple `(i, k, j)` with `i < j` and `k` not a
    /// source: how many separating sets of `i` and `j` contain `k`, and how
    /// many do not.
    pub collider_votes: BTreeMap<(usize, usize, usize), (usize, usize)>,
    pub tests_run: usize,
}

impl Skeleton {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.names.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacent[i][j])
            .collect()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        let i = self.names.iter().position(|n| n == a);
        let j = self.names.iter().position(|n| n == b);
        matches!((i, j), (Some(i), Some(j)) if self.adjacent[i][j])
    }

    pub fn sepset_names(&self, a: &str, b: &str) -> Option<Vec<&str>> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        self.sepsets
            .get(&(i.min(j), i.max(j)))
            .map(|s| s.iter().map(|&k| self.names[k].as_str()).collect())
    }
}

/// PC-stable edge removal over the dataset columns in `names` (their order fixes
/// the result). Conditioning sets of size 0..=max_cond come from the
/// adjacencies frozen at the start of each level.
pub fn learn_skeleton(
    ds: &Dataset,
    names: &[String],
    constraints: &StructuralConstraints,
    alpha: f64,
    max_cond: usize,
) -> Result<Skeleton> {
    let d = names.len();
    let mut adjacent = vec![vec![false; d]; d];
    let mut sepsets = BTreeMap::new();
    for i in 0..d {
        for j in i + 1..d {
            let forbidden = constraints.forbids(&names[i], &names[j])
                && constraints.forbids(&names[j], &names[i]);
            if forbidden {
                sepsets.insert((i, j), Vec::new());
            } else {
                adjacent[i][j] = true;
                adjacent[j][i] = true;
            }
        }
    }
    if d < 2 {
        return Ok(Skeleton {
            names: names.to_vec(),
            adjacent,
            sepsets,
            collider_votes: BTreeMap::new(),
            tests_run: 0,
        });
    }
    let corr = Correlations::new(ds, names)?;
    let n = corr.n();
    let mut tests_run = 0;

    for level in 0..=max_cond {
        if n <= level + 3 {
            break;
        }
        let frozen: Vec<Vec<usize>> = (0..d)
            .map(|i| (0..d).filter(|&j| adjacent[i][j]).collect())
            .collect();
        let edges: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .filter(|&(i, j)| adjacent[i][j])
            .collect();
        let testable = edges
            .iter()
            .any(|&(i, j)| frozen[i].len() > level || frozen[j].len() > level);
        if !testable {
            break;
        }
        let results: Vec<Result<(Option<Vec<usize>>, usize)>> = par::map(&edges, |&(i, j)| {
            let mut count = 0;
            let mut seen = BTreeSet::new();
            for (a, b) in [(i, j), (j, i)] {
                let pool: Vec<usize> = frozen[a].iter().copied().filter(|&k| k != b).collect();
                if pool.len() < level {
                    continue;
                }
                for set in pool.into_iter().combinations(level) {
                    let mut key = set.clone();
                    key.sort_unstable();
                    if !seen.insert(key) {
                        continue;
                    }
                    let r = match corr.partial(i, j, &set) {
                        Ok(r) => r,
                        Err(Error::Singular(_)) => continue,
                        Err(e) => return Err(e),
                    };
                    count += 1;
                    if fisher_z_test(r, n, level, alpha)?.independent {
                        return Ok((Some(set), count));
                    }
                }
            }
            Ok((None, count))
        });
        for (&(i, j), res) in edges.iter().zip(results) {
            let (sep, count) = res?;
            tests_run += count;
            if let Some(s) = sep {
                adjacent[i][j] = false;
                adjacent[j][i] = false;
                sepsets.insert((i, j), s);
            }
        }
    }

    // Majority rule: every subset of either endpoint's final adjacencies is
    // tested, so one unlucky separating set cannot decide a collider.
    let triples: Vec<(usize, usize, usize)> = (0..d)
        .filter(|&k| !constraints.is_source(&names[k]))
        .flat_map(|k| {
            let nb: Vec<usize> = (0..d).filter(|&x| adjacent[k][x]).collect();
            let adjacent = &adjacent;
            nb.clone()
                .into_iter()
                .tuple_combinations()
                .filter(move |&(i, j)| !adjacent[i][j])
                .map(move |(i, j)| (i, k, j))
        })
        .collect();
    let votes = par::map(&triples, |&(i, k, j)| -> Result<(usize, usize, usize)> {
        let mut seen = BTreeSet::new();
        let (mut with, mut without, mut count) = (0, 0, 0);
        for (a, b) in [(i, j), (j, i)] {
            let pool: Vec<usize> = (0..d).filter(|&x| x != b && adjacent[a][x]).collect();
            for level in 0..=max_cond.min(pool.len()) {
                if n <= level + 3 {
                    break;
                }
                for set in pool.iter().copied().combinations(level) {
                    let mut key = set.clone();
                    key.sort_unstable();
                    if !seen.insert(key) {
                        continue;
                    }
                    let r = match corr.partial(i, j, &set) {
                        Ok(r) => r,
                        Err(Error::Singular(_)) => continue,
                        Err(e) => return Err(e),
                    };
                    count += 1;
                    if fisher_z_test(r, n, level, alpha)?.independent {
                        if set.contains(&k) {
                            with += 1;
                        } else {
                            without += 1;
                        }
                    }
                }
            }
        }
        Ok((with, without, count))
    });
    let mut collider_votes = BTreeMap::new();
    for (&t, v) in triples.iter().zip(votes) {
        let (with, without, count) = v?;
        tests_run += count;
        collider_votes.insert(t, (with, without));
    }
    Ok(Skeleton {
        names: names.to_vec(),
        adjacent,
        sepsets,
        collider_votes,
        tests_run,
    })
}
