//! Gaussian kernel density estimation on [0, 1] and valley-based peak splitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Kernel contributions beyond this many bandwidths are dropped.
const KERNEL_CUTOFF: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeOptions {
    pub grid_points: usize,
    pub lo: f64,
    pub hi: f64,
    /// Mirror samples about `lo` so no mass leaks below the boundary.
    pub reflect_lo: bool,
}

impl Default for KdeOptions {
    fn default() -> Self {
        KdeOptions {
            grid_points: 512,
            lo: 0.0,
            hi: 1.0,
            reflect_lo: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// The input samples, sorted ascending.
    pub samples: Vec<f64>,
}

impl Density {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }
}

/// Scott's rule bandwidth `σ̂ · n^(−1/5)` with the sample standard deviation.
pub fn scott_bandwidth(samples: &[f64]) -> f64 {
    stats::sample_sd(samples) * (samples.len() as f64).powf(-0.2)
}

/// Gaussian KDE with Scott's-rule bandwidth evaluated on a uniform grid.
pub fn kde(samples: &[f64], opts: &KdeOptions) -> Result<Density> {
    if samples.len() < 2 {
        return Err(Error::Degenerate("density estimation needs at least two samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    if opts.grid_points < 2 || !(opts.hi > opts.lo) {
        return Err(Error::InvalidArgument("grid needs at least two points on a non-empty range".into()));
    }
    let h = scott_bandwidth(samples);
    if samples.iter().all(|&x| x == samples[0]) || h <= 0.0 {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut kernel_points = sorted.clone();
    if opts.reflect_lo {
        kernel_points.extend(sorted.iter().map(|x| 2.0 * opts.lo - x));
        kernel_points.sort_by(f64::total_cmp);
    }

    let step = (opts.hi - opts.lo) / (opts.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..opts.grid_points).map(|i| opts.lo + step * i as f64).collect();
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let values = grid
        .par_iter()
        .map(|&x| {
            let a = kernel_points.partition_point(|&p| p < x - KERNEL_CUTOFF * h);
            let b = kernel_points.partition_point(|&p| p <= x + KERNEL_CUTOFF * h);
            let s: f64 = kernel_points[a..b]
                .iter()
                .map(|&p| {
                    let z = (x - p) / h;
                    (-0.5 * z * z).exp()
                })
                .sum();
            s * norm
        })
        .collect();
    Ok(Density {
        grid,
        values,
        bandwidth: h,
        samples: sorted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Minimum peak height relative to the global maximum.
    pub min_height: f64,
    /// Required valley depth below the lower of two neighbouring peaks.
    pub min_valley_depth: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions {
            min_height: 0.05,
            min_valley_depth: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Grid location of the density maximum.
    pub location: f64,
    pub height: f64,
    /// Mean and standard deviation of the samples assigned to this mode.
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub modality: usize,
    pub bandwidth: f64,
    /// Accepted peaks, ascending by location.
    pub peaks: Vec<Peak>,
    /// Density minima between consecutive peaks.
    pub valleys: Vec<f64>,
    /// Valley between the two highest peaks, if there are at least two.
    pub split: Option<f64>,
}

/// Detects the modes of a density and splits the samples at the valleys.
pub fn split_peaks(density: &Density, opts: &PeakOptions) -> PeakSummary {
    let v = &density.values;
    let n = v.len();
    let global_max = v.iter().copied().fold(0.0, f64::max);

    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || v[i] > v[i - 1];
            let right = i + 1 == n || v[i] >= v[i + 1];
            left && right && v[i] >= opts.min_height * global_max && v[i] > 0.0
        })
        .collect();

    // Merge neighbours whose separating valley is too shallow.
    loop {
        let shallow = maxima.windows(2).position(|w| {
            let valley = valley_index(v, w[0], w[1]);
            v[valley] > (1.0 - opts.min_valley_depth) * v[w[0]].min(v[w[1]])
        });
        match shallow {
            Some(k) => {
                let drop = if v[maxima[k]] >= v[maxima[k + 1]] { k + 1 } else { k };
                maxima.remove(drop);
            }
            None => break,
        }
    }

    let valleys: Vec<usize> = maxima.windows(2).map(|w| valley_index(v, w[0], w[1])).collect();
    let mut bounds = vec![f64::NEG_INFINITY];
    bounds.extend(valleys.iter().map(|&i| density.grid[i]));
    bounds.push(f64::INFINITY);

    let peaks: Vec<Peak> = maxima
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let (lo, hi) = (bounds[k], bounds[k + 1]);
            let a = density.samples.partition_point(|&x| x < lo);
            let b = density.samples.partition_point(|&x| x < hi);
            let members = &density.samples[a..b];
            Peak {
                location: density.grid[i],
                height: v[i],
                mean: stats::mean(members),
                sd: stats::sample_sd(members),
                count: members.len(),
            }
        })
        .collect();

    let split = if maxima.len() >= 2 {
        let mut by_height: Vec<usize> = (0..maxima.len()).collect();
        by_height.sort_by(|&a, &b| v[maxima[b]].total_cmp(&v[maxima[a]]).then(a.cmp(&b)));
        let (p, q) = (by_height[0].min(by_height[1]), by_height[0].max(by_height[1]));
        Some(density.grid[valley_index(v, maxima[p], maxima[q])])
    } else {
        None
    };

    PeakSummary {
        modality: maxima.len(),
        bandwidth: density.bandwidth,
        peaks,
        valleys: valleys.iter().map(|&i| density.grid[i]).collect(),
        split,
    }
}

fn valley_index(v: &[f64], a: usize, b: usize) -> usize {
    (a..=b).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap()
}
