//! Profile log-likelihood over a grid of two conditional coordinates with a
//! third held fixed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{em_run, seeded_start, validate_pins, EmConfig, Pin};
use crate::error::{Error, Result};
use crate::model::{log_likelihood, ModelSpec};
use crate::tables::ContingencyTable;

/// A conditional coordinate `cond[var][class][category]`, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProfileAxis {
    pub var: usize,
    pub class: usize,
    pub category: usize,
}

impl ProfileAxis {
    pub fn new(var: usize, class: usize, category: usize) -> Self {
        Self {
            var,
            class,
            category,
        }
    }

    fn pin(self, value: f64) -> Pin {
        Pin {
            var: self.var,
            class: self.class,
            category: self.category,
            value,
        }
    }

    /// Parses the `a31` / `b12` notation: letter picks the variable (`a` is
    /// the first), then the one-based category and class digits.
    pub fn parse(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidArgument(format!("cannot parse coordinate {s:?}; expected e.g. a31"));
        let mut chars = s.chars();
        let letter = chars.next().ok_or_else(bad)?;
        if !letter.is_ascii_lowercase() {
            return Err(bad());
        }
        let digits: Vec<usize> = chars
            .map(|c| c.to_digit(10).map(|d| d as usize))
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        match digits[..] {
            [i, h] if i >= 1 && h >= 1 => {
                Ok(Self::new((letter as u8 - b'a') as usize, h - 1, i - 1))
            }
            _ => Err(bad()),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}{}{}",
            (b'a' + self.var as u8) as char,
            self.category + 1,
            self.class + 1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub x: ProfileAxis,
    pub y: ProfileAxis,
    pub fixed: ProfileAxis,
    pub fixed_value: f64,
    /// Nodes per axis.
    pub resolution: usize,
    /// Axis range, inclusive. The defaults put the 50 nodes on multiples of
    /// 1/60.
    pub lo: f64,
    pub hi: f64,
    pub starts_per_node: usize,
    pub seed: u64,
    pub em: EmConfig,
}

impl ProfileConfig {
    /// `alpha11` against `alpha21` with `alpha31` fixed, for a two-class model.
    pub fn alpha_slice(fixed_value: f64) -> Self {
        Self {
            x: ProfileAxis::new(0, 0, 0),
            y: ProfileAxis::new(0, 0, 1),
            fixed: ProfileAxis::new(0, 0, 2),
            fixed_value,
            resolution: 50,
            lo: 1.0 / 60.0,
            hi: 50.0 / 60.0,
            starts_per_node: 10,
            seed: 0,
            em: EmConfig {
                max_iterations: 5_000,
                ..EmConfig::default()
            },
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.resolution;
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakKind {
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub kind: PeakKind,
}

/// Profile values indexed `values[i][j]` at `(xs[i], ys[j])`; infeasible
/// nodes hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub config: ProfileConfig,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ProfileGrid {
    /// Header row of `y` values, then one row per `x` value.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\\{}", self.config.x.label(), self.config.y.label());
        for y in &self.ys {
            out.push_str(&format!(",{y}"));
        }
        out.push('\n');
        for (x, row) in self.xs.iter().zip(&self.values) {
            out.push_str(&x.to_string());
            for v in row {
                out.push(',');
                if v.is_finite() {
                    out.push_str(&v.to_string());
                } else {
                    out.push_str("NaN");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn peaks(&self) -> Vec<Peak> {
        find_peaks(&self.values, &self.xs, &self.ys)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Maximizes the log-likelihood with the three configured coordinates pinned,
/// over `starts_per_node` seeded EM runs per node.
pub fn profile_loglik_grid(
    t: &ContingencyTable,
    spec: &ModelSpec,
    cfg: &ProfileConfig,
) -> Result<ProfileGrid> {
    spec.check_table(t)?;
    if t.n_axes() != 2 {
        return Err(Error::InvalidArgument(
            "profile grids need a two-way table".into(),
        ));
    }
    if cfg.resolution < 2
        || cfg.starts_per_node == 0
        || cfg.lo.is_nan()
        || cfg.hi.is_nan()
        || cfg.lo >= cfg.hi
    {
        return Err(Error::InvalidArgument(
            "profile grid needs resolution >= 2, starts >= 1 and lo < hi".into(),
        ));
    }
    let axes = [cfg.x, cfg.y, cfg.fixed];
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        if axes[a] == axes[b] {
            return Err(Error::InvalidArgument(
                "profile coordinates must be distinct".into(),
            ));
        }
    }
    // the fixed pin alone must be feasible
    validate_pins(spec, &[cfg.fixed.pin(cfg.fixed_value)])?;
    let xs = cfg.nodes();
    let ys = xs.clone();
    let n = cfg.resolution;
    let flat: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|node| {
            let pins = [
                cfg.x.pin(xs[node / n]),
                cfg.y.pin(ys[node % n]),
                cfg.fixed.pin(cfg.fixed_value),
            ];
            profile_node(t, spec, cfg, &pins, node as u64)
        })
        .collect::<Result<_>>()?;
    let values = flat.chunks(n).map(<[f64]>::to_vec).collect();
    Ok(ProfileGrid {
        config: cfg.clone(),
        xs,
        ys,
        values,
    })
}

fn profile_node(
    t: &ContingencyTable,
    spec: &ModelSpec,
    cfg: &ProfileConfig,
    pins: &[Pin],
    node: u64,
) -> Result<f64> {
    if validate_pins(spec, pins).is_err() {
        return Ok(f64::NAN);
    }
    let mut best = f64::NEG_INFINITY;
    for s in 0..cfg.starts_per_node as u64 {
        let start = seeded_start(spec, cfg.seed, node * cfg.starts_per_node as u64 + s);
        match em_run(&start, t, &cfg.em, pins) {
            Ok((theta, _, _)) => best = best.max(log_likelihood(&theta, t)?),
            Err(Error::NonFiniteLikelihood) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(if best.is_finite() { best } else { f64::NAN })
}

/// Nodes, or plateaus of nodes tied within a small tolerance, that exceed all
/// of their 8 neighbours. Only plateaus whose every node has all 8 neighbours
/// on the grid and finite are considered. Peaks within a relative 1e-6 of the
/// best are global.
pub fn find_peaks(values: &[Vec<f64>], xs: &[f64], ys: &[f64]) -> Vec<Peak> {
    let n = values.len();
    let m = values.first().map_or(0, Vec::len);
    let finite = |i: isize, j: isize| {
        i >= 0
            && j >= 0
            && (i as usize) < n
            && (j as usize) < m
            && values[i as usize][j as usize].is_finite()
    };
    let interior = |i: usize, j: usize| {
        (-1..=1).all(|di| (-1..=1).all(|dj| finite(i as isize + di, j as isize + dj)))
    };
    let neighbours = |i: usize, j: usize| {
        let mut out = Vec::with_capacity(8);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if (di, dj) != (0, 0) && finite(a, b) {
                    out.push((a as usize, b as usize));
                }
            }
        }
        out
    };
    let tie = |v: f64| 1e-9 * v.abs().max(1.0);
    let mut seen = vec![vec![false; m]; n];
    let mut raw = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if seen[i][j] || !values[i][j].is_finite() {
                continue;
            }
            let v = values[i][j];
            // flood the plateau of nodes tied with (i, j)
            let mut comp = vec![(i, j)];
            seen[i][j] = true;
            let mut k = 0;
            while k < comp.len() {
                let (a, b) = comp[k];
                for (c, d) in neighbours(a, b) {
                    if !seen[c][d] && (values[c][d] - v).abs() <= tie(v) {
                        seen[c][d] = true;
                        comp.push((c, d));
                    }
                }
                k += 1;
            }
            let is_peak = comp.iter().all(|&(a, b)| interior(a, b))
                && comp.iter().all(|&(a, b)| {
                    neighbours(a, b)
                        .into_iter()
                        .all(|(c, d)| comp.contains(&(c, d)) || values[c][d] < v)
                });
            if is_peak {
                raw.push((i, j, v));
            }
        }
    }
    let best = raw.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    raw.into_iter()
        .map(|(i, j, value)| Peak {
            i,
            j,
            x: xs[i],
            y: ys[j],
            value,
            kind: if value >= best - 1e-6 * best.abs().max(1.0) {
                PeakKind::Global
            } else {
                PeakKind::Local
            },
        })
        .collect()
}
