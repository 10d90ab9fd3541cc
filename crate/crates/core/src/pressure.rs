//! Column pressures `ψ_j(t) = log Σ b_i^t / log a_j`, their lower envelope
//! `g`, and the partition of `[t_min, t_max]` by the dominating column.

use serde::{Deserialize, Serialize};

use crate::carpet::{Column, GLCarpet};
use crate::dimensions::CarpetSummary;
use crate::error::{Error, Result};
use crate::roots::{bisect, golden_max};
use crate::spectrum::phi_inv_raw;

/// Columns within this distance of the minimum are reported by [`g`].
pub const ARGMIN_TOL: f64 = 1e-11;

/// Two pressures agreeing this closely at every Chebyshev node are merged.
pub const IDENTITY_TOL: f64 = 1e-10;

const CHEBYSHEV_NODES: usize = 64;
const DEDUP_TOL: f64 = 1e-12;
const TANGENCY_TOL: f64 = 1e-9;

fn log_sum_exp(t: f64, logs: &[f64]) -> f64 {
    let m = logs.iter().map(|&l| t * l).fold(f64::NEG_INFINITY, f64::max);
    m + logs.iter().map(|&l| (t * l - m).exp()).sum::<f64>().ln()
}

/// Mean and variance of `log b` under the weights `b_i^t / Σ b^t`.
fn tilted_moments(t: f64, logs: &[f64]) -> (f64, f64) {
    let m = logs.iter().map(|&l| t * l).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|&l| (t * l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean = w.iter().zip(logs).map(|(w, l)| w * l).sum::<f64>() / z;
    let var = w
        .iter()
        .zip(logs)
        .map(|(w, l)| w * (l - mean) * (l - mean))
        .sum::<f64>()
        / z;
    (mean, var)
}

pub(crate) fn psi_col(col: &Column, t: f64) -> f64 {
    log_sum_exp(t, col.log_heights()) / col.log_width()
}

pub(crate) fn psi_prime_col(col: &Column, t: f64) -> f64 {
    if col.is_homogeneous() {
        return col.log_heights()[0] / col.log_width();
    }
    tilted_moments(t, col.log_heights()).0 / col.log_width()
}

pub(crate) fn psi_second_col(col: &Column, t: f64) -> f64 {
    if col.is_homogeneous() {
        return 0.0;
    }
    tilted_moments(t, col.log_heights()).1 / col.log_width()
}

pub fn psi(carpet: &GLCarpet, column: usize, t: f64) -> Result<f64> {
    Ok(psi_col(carpet.column(column)?, t))
}

pub fn psi_prime(carpet: &GLCarpet, column: usize, t: f64) -> Result<f64> {
    Ok(psi_prime_col(carpet.column(column)?, t))
}

pub fn psi_second(carpet: &GLCarpet, column: usize, t: f64) -> Result<f64> {
    Ok(psi_second_col(carpet.column(column)?, t))
}

/// Value of the envelope `min_j ψ_j(t)`.
pub fn g_value(carpet: &GLCarpet, t: f64) -> f64 {
    carpet
        .columns()
        .iter()
        .map(|c| psi_col(c, t))
        .fold(f64::INFINITY, f64::min)
}

/// `min_j ψ_j(t)` together with every column attaining it within [`ARGMIN_TOL`].
pub fn g(carpet: &GLCarpet, t: f64) -> (f64, Vec<usize>) {
    let values: Vec<f64> = carpet.columns().iter().map(|c| psi_col(c, t)).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let argmin = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v - min <= ARGMIN_TOL)
        .map(|(j, _)| j)
        .collect();
    (min, argmin)
}

/// One interval `[t_lo, t_hi]` on which a single column realises `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPart {
    pub t_lo: f64,
    pub t_hi: f64,
    pub column: usize,
    pub homogeneous: bool,
    pub theta_min: f64,
    pub theta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPartition {
    pub parts: Vec<PartitionPart>,
    pub theta_global_min: f64,
    pub theta_global_max: f64,
    /// Columns whose pressure duplicated an earlier one, as `(column, kept)`.
    pub merged: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SpectrumPartition {
    /// Index of the part whose closed interval contains `t` (first match).
    pub fn part_at(&self, t: f64) -> Option<usize> {
        self.parts.iter().position(|p| t >= p.t_lo && t <= p.t_hi)
    }

    /// Interior boundaries `t_1 < … < t_{m-1}`.
    pub fn boundaries(&self) -> Vec<f64> {
        self.parts.iter().skip(1).map(|p| p.t_lo).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOptions {
    /// Uniform samples per column pair when scanning for crossings.
    pub samples: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self { samples: 4096 }
    }
}

pub fn build_partition(carpet: &GLCarpet, summary: &CarpetSummary) -> Result<SpectrumPartition> {
    build_partition_with(carpet, summary, PartitionOptions::default())
}

fn same_coefficients(p: &Column, q: &Column, tol: f64) -> bool {
    let sorted = |c: &Column| {
        let mut v = c.log_heights().to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (u, v) = (sorted(p), sorted(q));
    (p.width() - q.width()).abs() <= tol
        && u.len() == v.len()
        && u.iter().zip(&v).all(|(x, y)| (x.exp() - y.exp()).abs() <= tol)
}

/// Roots of `ψ_i - ψ_j` in `[lo, hi]`, including pairs of close roots that a
/// grid of `samples` cells would miss.
fn crossings(p: &Column, q: &Column, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let d = |t: f64| psi_col(p, t) - psi_col(q, t);
    let ts: Vec<f64> = (0..=samples)
        .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
        .collect();
    let ds: Vec<f64> = ts.iter().map(|&t| d(t)).collect();
    let mut out = Vec::new();
    for k in 0..samples {
        if ds[k] == 0.0 {
            out.push(ts[k]);
        } else if ds[k] * ds[k + 1] < 0.0 {
            out.extend(bisect(d, ts[k], ts[k + 1], 0.0).ok());
        }
    }
    for k in 1..samples {
        let (l, m, r) = (ds[k - 1], ds[k], ds[k + 1]);
        let same_sign = l * m > 0.0 && m * r > 0.0;
        if !same_sign || m.abs() > l.abs() || m.abs() > r.abs() {
            continue;
        }
        // push toward the other side of zero and see if we get there
        let s = m.signum();
        let (t_star, v) = golden_max(|t| -s * d(t), ts[k - 1], ts[k + 1], 1e-15);
        if v > 0.0 {
            out.extend(bisect(d, ts[k - 1], t_star, 0.0).ok());
            out.extend(bisect(d, t_star, ts[k + 1], 0.0).ok());
        } else if -v <= TANGENCY_TOL {
            // touching without crossing leaves the argmin unchanged
            continue;
        }
    }
    out
}

pub fn build_partition_with(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    options: PartitionOptions,
) -> Result<SpectrumPartition> {
    if summary.degenerate {
        return Err(Error::DegenerateCarpet);
    }
    let (lo, hi) = (summary.t_min, summary.t_max);
    let cols = carpet.columns();
    let nodes: Vec<f64> = (0..CHEBYSHEV_NODES)
        .map(|k| {
            let x = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * CHEBYSHEV_NODES) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        })
        .collect();

    let mut reps: Vec<usize> = Vec::new();
    let mut merged = Vec::new();
    let mut warnings = Vec::new();
    for j in 0..cols.len() {
        let dup = reps.iter().copied().find(|&r| {
            nodes
                .iter()
                .all(|&t| (psi_col(&cols[j], t) - psi_col(&cols[r], t)).abs() <= IDENTITY_TOL)
        });
        match dup {
            Some(r) => {
                merged.push((j, r));
                if !same_coefficients(&cols[j], &cols[r], carpet.tolerance()) {
                    warnings.push(format!(
                        "columns {r} and {j} have different ratios but numerically identical pressures; treated as one"
                    ));
                }
            }
            None => reps.push(j),
        }
    }

    let mut points = vec![lo, hi];
    for (x, &i) in reps.iter().enumerate() {
        for &j in &reps[x + 1..] {
            points.extend(
                crossings(&cols[i], &cols[j], lo, hi, options.samples.max(2))
                    .into_iter()
                    .filter(|&t| t > lo && t < hi),
            );
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|b, a| *b - *a <= DEDUP_TOL);
    if *points.last().unwrap() < hi {
        points.push(hi);
    } else {
        *points.last_mut().unwrap() = hi;
    }

    let argmin = |t: f64| {
        let mut best = (reps[0], psi_col(&cols[reps[0]], t));
        for &j in &reps[1..] {
            let v = psi_col(&cols[j], t);
            if v < best.1 {
                best = (j, v);
            }
        }
        best.0
    };
    let mut spans: Vec<(f64, f64, usize)> = Vec::new();
    for w in points.windows(2) {
        let col = argmin(0.5 * (w[0] + w[1]));
        match spans.last_mut() {
            Some(last) if last.2 == col => last.1 = w[1],
            _ => spans.push((w[0], w[1], col)),
        }
    }

    let kmax = summary.kappa_max;
    let parts: Vec<PartitionPart> = spans
        .into_iter()
        .map(|(t_lo, t_hi, column)| {
            let c = &cols[column];
            let homogeneous = c.is_homogeneous();
            let theta_min = phi_inv_raw(psi_prime_col(c, t_lo), kmax);
            let theta_max = if homogeneous {
                theta_min
            } else {
                phi_inv_raw(psi_prime_col(c, t_hi), kmax)
            };
            PartitionPart {
                t_lo,
                t_hi,
                column,
                homogeneous,
                theta_min,
                theta_max,
            }
        })
        .collect();
    Ok(SpectrumPartition {
        theta_global_min: parts[0].theta_min,
        theta_global_max: parts[parts.len() - 1].theta_max,
        parts,
        merged,
        warnings,
    })
}
