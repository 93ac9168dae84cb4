//! Causal paths, interventional means and average causal effects of options
//! on targets, and top-K reduction of the search space.

use std::collections::BTreeSet;
use std::path::Path;

use crate::causal::Admg;
use crate::data::{mean_sd, Dataset};
use crate::error::{Error, Result};
use crate::par;
use crate::space::{ConfigSpace, OptionKind, ReducedSpace, Value};

/// Directed path from an option to a target, listed origin first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CausalPath(pub Vec<String>);

/// All simple directed paths `option ~> target` with at most `max_len` edges.
/// Children are explored in vertex order, so the listing is deterministic.
pub fn find_causal_paths(g: &Admg, option: &str, target: &str, max_len: usize) -> Vec<CausalPath> {
    let (Some(s), Some(t)) = (g.index_of(option), g.index_of(target)) else {
        return Vec::new();
    };
    if s == t {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut path = vec![s];
    let mut on_path = vec![false; g.vertices().len()];
    on_path[s] = true;
    fn dfs(
        g: &Admg,
        t: usize,
        max_len: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<CausalPath>,
    ) {
        let v = *path.last().expect("nonempty");
        if v == t {
            out.push(CausalPath(
                path.iter().map(|&i| g.vertices()[i].clone()).collect(),
            ));
            return;
        }
        if path.len() > max_len {
            return;
        }
        for c in g.child_indices(v) {
            if !on_path[c] {
                on_path[c] = true;
                path.push(c);
                dfs(g, t, max_len, path, on_path, out);
                path.pop();
                on_path[c] = false;
            }
        }
    }
    dfs(g, t, max_len, &mut path, &mut on_path, &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectConfig {
    /// Equal-frequency bins used to localize `E[y | X = x]`.
    pub bins: usize,
    /// Bins with fewer rows fall back to a global linear fit.
    pub min_bin_rows: usize,
    /// Grid points per numeric option.
    pub grid: usize,
    /// Longest causal path (in edges) that counts.
    pub max_path_len: usize,
}

impl Default for EffectConfig {
    fn default() -> Self {
        EffectConfig {
            bins: 10,
            min_bin_rows: 10,
            grid: 10,
            max_path_len: usize::MAX,
        }
    }
}

/// Least-squares `y ~ a x + b`; a flat `x` gives slope 0.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, _) = mean_sd(x);
    let (my, _) = mean_sd(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return (0.0, my);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// `E[target | do(option = value)]`. Options are parentless, so the
/// intervention reduces to conditioning, estimated locally: exact matches for
/// levels and small integer domains, a linear fit inside the equal-frequency
/// bin holding `value` otherwise.
pub fn interventional_mean(
    ds: &Dataset,
    g: &Admg,
    space: &ConfigSpace,
    option: &str,
    value: Value,
    target: &str,
    cfg: &EffectConfig,
) -> Result<f64> {
    let def = space.option(option)?;
    def.check(value)?;
    if !g.parents(option).is_empty() {
        return Err(Error::Graph(format!(
            "option `{option}` has parents in the graph"
        )));
    }
    let x = ds.numeric(option)?;
    let y = ds.numeric(target)?;
    let v = value.as_f64();

    let exact = |fallback: f64| {
        let hits: Vec<f64> = x
            .iter()
            .zip(&y)
            .filter(|(a, _)| **a == v)
            .map(|(_, b)| *b)
            .collect();
        if hits.len() >= cfg.min_bin_rows.min(ds.n_rows()).max(1) {
            mean_sd(&hits).0
        } else {
            fallback
        }
    };
    match def.kind() {
        OptionKind::Boolean | OptionKind::Categorical => return Ok(exact(mean_sd(&y).0)),
        OptionKind::Integer => {
            let distinct: BTreeSet<i64> = x.iter().map(|&a| a as i64).collect();
            if distinct.len() <= cfg.bins {
                let (a, b) = linear_fit(&x, &y);
                return Ok(exact(a * v + b));
            }
        }
        OptionKind::Continuous => {}
    }

    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let bins = cfg.bins.max(1);
    let mut cuts: Vec<f64> = (1..bins).map(|b| sorted[b * n / bins]).collect();
    cuts.dedup();
    let bin_of = |a: f64| cuts.partition_point(|c| *c <= a);
    let target_bin = bin_of(v);
    let (bx, by): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(&y)
        .filter(|(a, _)| bin_of(**a) == target_bin)
        .map(|(a, b)| (*a, *b))
        .unzip();
    let (a, b) = if bx.len() >= cfg.min_bin_rows {
        linear_fit(&bx, &by)
    } else {
        linear_fit(&x, &y)
    };
    Ok(a * v + b)
}

/// Mean absolute shift of `E[target | do(option = x_j)]` from the value at the
/// option's default, over the option's grid. Zero without a causal path.
pub fn ace(
    ds: &Dataset,
    g: &Admg,
    space: &ConfigSpace,
    option: &str,
    target: &str,
    cfg: &EffectConfig,
) -> Result<f64> {
    if find_causal_paths(g, option, target, cfg.max_path_len).is_empty() {
        return Ok(0.0);
    }
    let def = space.option(option)?;
    let base = interventional_mean(ds, g, space, option, def.default_value(), target, cfg)?;
    let grid = def.grid(cfg.grid);
    let mut total = 0.0;
    for v in &grid {
        total += (interventional_mean(ds, g, space, option, *v, target, cfg)? - base).abs();
    }
    Ok(total / grid.len() as f64)
}

/// ACE values, one row per option and one column per target.
#[derive(Clone, Debug, PartialEq)]
pub struct AceTable {
    pub options: Vec<String>,
    pub targets: Vec<String>,
    /// `values[o][t]`
    pub values: Vec<Vec<f64>>,
}

impl AceTable {
    /// ACE of every tunable option of `space` on every target.
    pub fn compute(
        ds: &Dataset,
        g: &Admg,
        space: &ConfigSpace,
        targets: &[String],
        cfg: &EffectConfig,
    ) -> Result<Self> {
        for t in targets {
            ds.column(t)?;
        }
        let options: Vec<String> = space
            .tunable()
            .filter(|o| ds.get(o.name()).is_some())
            .map(|o| o.name().to_string())
            .collect();
        let pairs: Vec<(usize, usize)> = (0..options.len())
            .flat_map(|o| (0..targets.len()).map(move |t| (o, t)))
            .collect();
        let vals = par::map(&pairs, |&(o, t)| {
            ace(ds, g, space, &options[o], &targets[t], cfg)
        });
        let mut values = vec![vec![0.0; targets.len()]; options.len()];
        for (&(o, t), v) in pairs.iter().zip(vals) {
            values[o][t] = v?;
        }
        Ok(AceTable {
            options,
            targets: targets.to_vec(),
            values,
        })
    }

    pub fn get(&self, option: &str, target: &str) -> Option<f64> {
        let o = self.options.iter().position(|x| x == option)?;
        let t = self.targets.iter().position(|x| x == target)?;
        Some(self.values[o][t])
    }

    /// Options ranked for one target: ACE descending, ties by name.
    pub fn ranking(&self, target: &str) -> Result<Vec<(String, f64)>> {
        let t = self
            .targets
            .iter()
            .position(|x| x == target)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown target `{target}`")))?;
        let mut r: Vec<(String, f64)> = self
            .options
            .iter()
            .zip(&self.values)
            .map(|(o, v)| (o.clone(), v[t]))
            .collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(r)
    }

    /// Reads `option,<target>,<target>,...`.
    pub fn read_wide_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path.as_ref())?;
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if header.len() < 2 {
            return Err(Error::Parse(
                "ACE table needs an option column and a target".into(),
            ));
        }
        let targets = header[1..].to_vec();
        let mut options = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            options.push(rec[0].to_string());
            let vals = rec
                .iter()
                .skip(1)
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| Error::BadRow {
                        row,
                        reason: format!("`{c}` is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != targets.len() {
                return Err(Error::BadRow {
                    row,
                    reason: "wrong number of values".into(),
                });
            }
            values.push(vals);
        }
        if options.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(AceTable {
            options,
            targets,
            values,
        })
    }

    /// Writes the layout `read_wide_csv` reads, options in table order.
    pub fn write_wide_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(std::iter::once("option").chain(self.targets.iter().map(String::as_str)))?;
        for (o, vals) in self.options.iter().zip(&self.values) {
            w.write_record(std::iter::once(o.clone()).chain(vals.iter().map(|v| format!("{v}"))))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Long format `option,target,ace,selected`, options ordered by ACE on the
    /// first target (descending), targets in table order.
    pub fn write_long_csv(&self, path: impl AsRef<Path>, selected: &[String]) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["option", "target", "ace", "selected"])?;
        let order = match self.targets.first() {
            Some(t) => self.ranking(t)?.into_iter().map(|(o, _)| o).collect(),
            None => self.options.clone(),
        };
        for o in &order {
            let oi = self
                .options
                .iter()
                .position(|x| x == o)
                .expect("from table");
            for (ti, t) in self.targets.iter().enumerate() {
                let sel = selected.contains(o);
                w.write_record([
                    o.as_str(),
                    t.as_str(),
                    &format!("{}", self.values[oi][ti]),
                    if sel { "1" } else { "0" },
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub space: ReducedSpace,
    /// Every ACE was zero; the selection fell back to lexical order.
    pub degenerate: bool,
}

/// Union over targets of the top-`k` options with positive ACE. Options not in
/// the table or fixed in `space` are never selected.
pub fn rank_and_reduce(table: &AceTable, k: usize, space: &ConfigSpace) -> Result<Reduction> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let candidates: Vec<usize> = (0..table.options.len())
        .filter(|&o| space.get(&table.options[o]).is_some_and(|d| !d.is_fixed()))
        .collect();
    if k >= candidates.len() {
        let names: Vec<&str> = candidates
            .iter()
            .map(|&o| table.options[o].as_str())
            .collect();
        return Ok(Reduction {
            space: ReducedSpace::new(space.clone(), &names)?,
            degenerate: false,
        });
    }
    let mut chosen: BTreeSet<&str> = BTreeSet::new();
    for t in 0..table.targets.len() {
        let mut ranked: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&o| table.values[o][t] > 0.0)
            .collect();
        ranked.sort_by(|&a, &b| {
            table.values[b][t]
                .total_cmp(&table.values[a][t])
                .then_with(|| table.options[a].cmp(&table.options[b]))
        });
        chosen.extend(ranked.iter().take(k).map(|&o| table.options[o].as_str()));
    }
    let degenerate = chosen.is_empty();
    if degenerate {
        let mut names: Vec<&str> = candidates
            .iter()
            .map(|&o| table.options[o].as_str())
            .collect();
        names.sort();
        chosen.extend(names.into_iter().take(k));
    }
    let names: Vec<&str> = chosen.into_iter().collect();
    Ok(Reduction {
        space: ReducedSpace::new(space.clone(), &names)?,
        degenerate,
    })
}
