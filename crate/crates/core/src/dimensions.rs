//! Dimension constants of a carpet.
//!
//! Every constant is the root of a sum of exponentials that is strictly
//! decreasing in the exponent, solved by bisection on `[0, 40]`.

use serde::{Deserialize, Serialize};

use crate::carpet::GLCarpet;
use crate::error::Result;
use crate::roots::decreasing_root;

/// Upper end of the bracket for every exponent.
pub const BRACKET_HI: f64 = 40.0;

/// Threshold on `t_max - t_min` below which the carpet is treated as regular.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarpetSummary {
    pub dim_eta: f64,
    pub t_min: f64,
    pub s: Vec<f64>,
    pub t_max: f64,
    pub dim_box: f64,
    pub dim_assouad: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub degenerate: bool,
}

fn sum_exp(logs: impl Iterator<Item = f64>, s: f64) -> f64 {
    logs.map(|l| (s * l).exp()).sum()
}

/// `Σ_j a_j^s - 1` over columns.
pub fn projected_residual(carpet: &GLCarpet, s: f64) -> f64 {
    sum_exp(carpet.columns().iter().map(|c| c.log_width()), s) - 1.0
}

/// `Σ_i b_i^s - 1` over the members of `column`.
pub fn column_residual(carpet: &GLCarpet, column: usize, s: f64) -> Result<f64> {
    let col = carpet.column(column)?;
    Ok(sum_exp(col.log_heights().iter().copied(), s) - 1.0)
}

/// `Σ_j a_j^dim_eta Σ_i b_i^t - 1`.
pub fn average_residual(carpet: &GLCarpet, dim_eta: f64, t: f64) -> f64 {
    carpet
        .columns()
        .iter()
        .map(|c| (dim_eta * c.log_width()).exp() * sum_exp(c.log_heights().iter().copied(), t))
        .sum::<f64>()
        - 1.0
}

/// Box dimension of the projection onto the horizontal axis.
pub fn solve_projected_dim(carpet: &GLCarpet) -> f64 {
    decreasing_root(|s| projected_residual(carpet, s), 0.0, BRACKET_HI)
        .expect("open set condition keeps the root in [0, 1]")
}

/// Dimension `s_j` of the vertical fibre system of one column.
pub fn solve_column_dim(carpet: &GLCarpet, column: usize) -> Result<f64> {
    carpet.column(column)?;
    decreasing_root(
        |s| column_residual(carpet, column, s).unwrap_or(f64::NAN),
        0.0,
        BRACKET_HI,
    )
}

/// Average column dimension `t_min`, given the projected dimension.
pub fn solve_t_min(carpet: &GLCarpet, dim_eta: f64) -> f64 {
    decreasing_root(|t| average_residual(carpet, dim_eta, t), 0.0, BRACKET_HI)
        .expect("open set condition keeps the root in [0, 1]")
}

pub fn summarize(carpet: &GLCarpet) -> CarpetSummary {
    let dim_eta = solve_projected_dim(carpet);
    let s: Vec<f64> = (0..carpet.num_columns())
        .map(|j| solve_column_dim(carpet, j).expect("column in range"))
        .collect();
    let t_min = solve_t_min(carpet, dim_eta);
    let t_max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kappas = carpet.maps().iter().map(|m| m.kappa());
    let (kappa_min, kappa_max) = kappas.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
        (lo.min(k), hi.max(k))
    });
    // t_min is a weighted mean of the s_j up to rounding
    let t_min = t_min.min(t_max);
    debug_assert!(kappa_min > 1.0);
    CarpetSummary {
        dim_eta,
        t_min,
        t_max,
        dim_box: dim_eta + t_min,
        dim_assouad: dim_eta + t_max,
        kappa_min,
        kappa_max,
        degenerate: t_max - t_min <= DEGENERACY_GAP,
        s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carpet::AffineMap;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projected_dimension() {
        assert_eq!(solve_projected_dim(&fixtures::bm_three_map()), 1.0);
        let one = GLCarpet::from_maps(vec![AffineMap::new(0.5, 0.25, 0.0, 0.0)]).unwrap();
        assert_eq!(solve_projected_dim(&one), 0.0);
        let k = fixtures::four_map();
        let d = solve_projected_dim(&k);
        assert_abs_diff_eq!(d, 0.787884911025870, epsilon = 1e-13);
        assert!(projected_residual(&k, d).abs() <= 1e-13);
    }

    #[test]
    fn column_dimensions() {
        let k = fixtures::four_map();
        assert_abs_diff_eq!(solve_column_dim(&k, 0).unwrap(), 0.384157793154173, epsilon = 1e-13);
        assert_abs_diff_eq!(solve_column_dim(&k, 1).unwrap(), 0.560498865223864, epsilon = 1e-13);
        let d = fixtures::degenerate();
        assert_abs_diff_eq!(solve_column_dim(&d, 0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(solve_column_dim(&fixtures::bm_three_map(), 1).unwrap(), 0.0);
        assert_eq!(solve_column_dim(&k, 2).unwrap_err().code(), "IndexOutOfRange");
    }

    #[test]
    fn average_column_dimension() {
        let k = fixtures::four_map();
        assert_abs_diff_eq!(solve_t_min(&k, solve_projected_dim(&k)), 0.476619879168021, epsilon = 1e-12);
        let bm = fixtures::bm_three_map();
        assert_abs_diff_eq!(solve_t_min(&bm, 1.0), 1.5f64.ln() / 3f64.ln(), epsilon = 1e-14);
        let d = fixtures::degenerate();
        assert_abs_diff_eq!(solve_t_min(&d, 1.0), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn summary_of_bm_carpet() {
        let s = summarize(&fixtures::bm_three_map());
        assert_abs_diff_eq!(s.t_min, 0.369070246428543, epsilon = 1e-13);
        assert_abs_diff_eq!(s.t_max, 2f64.ln() / 3f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.dim_box, 1.369070246428543, epsilon = 1e-13);
        assert_abs_diff_eq!(s.dim_assouad, 1.630929753571457, epsilon = 1e-13);
        assert_abs_diff_eq!(s.kappa_max, 3f64.ln() / 2f64.ln(), epsilon = 1e-14);
        assert!(!s.degenerate);
    }

    #[test]
    fn single_map_is_degenerate() {
        let one = GLCarpet::from_maps(vec![AffineMap::new(0.5, 0.25, 0.0, 0.0)]).unwrap();
        let s = summarize(&one);
        assert_eq!((s.dim_eta, s.t_min, s.t_max, s.dim_box, s.dim_assouad), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(s.degenerate);
        assert!(summarize(&fixtures::degenerate()).degenerate);
    }

    #[test]
    fn four_map_assouad_dimension() {
        let s = summarize(&fixtures::four_map());
        assert_abs_diff_eq!(s.dim_assouad, 0.787884911025870 + 0.560498865223864, epsilon = 1e-12);
        assert_abs_diff_eq!(s.kappa_max, 2.0959032742894, epsilon = 1e-12);
    }
}
