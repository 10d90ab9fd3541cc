//! Reference carpets and random generators used by tests, benches and docs.

use rand::Rng;

use crate::carpet::{AffineMap, GLCarpet};

fn build(maps: Vec<AffineMap>) -> GLCarpet {
    GLCarpet::from_maps(maps).expect("fixture is a valid carpet")
}

/// Two columns: widths 1/3 and 1/2 with heights {1/4, 1/10} and {1/3, 1/4}.
pub fn four_map() -> GLCarpet {
    build(vec![
        AffineMap::new(1.0 / 3.0, 0.25, 0.0, 0.0),
        AffineMap::new(1.0 / 3.0, 0.1, 0.0, 0.5),
        AffineMap::new(0.5, 1.0 / 3.0, 0.5, 3.0 / 28.0),
        AffineMap::new(0.5, 0.25, 0.5, 0.75),
    ])
}

/// Bedford–McMullen carpet on a 2×3 grid with column counts {2, 1}.
pub fn bm_three_map() -> GLCarpet {
    build(vec![
        AffineMap::new(0.5, 1.0 / 3.0, 0.0, 0.0),
        AffineMap::new(0.5, 1.0 / 3.0, 0.0, 0.5),
        AffineMap::new(0.5, 1.0 / 3.0, 0.5, 0.0),
    ])
}

/// Five maps in three columns whose spectrum has six second-order transitions.
pub fn six_transition() -> GLCarpet {
    build(vec![
        AffineMap::new(0.1, 0.05, 0.0, 0.0),
        AffineMap::new(0.4, 0.00001, 0.2, 0.0),
        AffineMap::new(0.4, 0.39, 0.2, 0.61),
        AffineMap::new(0.31, 0.000177, 0.69, 0.0),
        AffineMap::new(0.31, 0.2, 0.69, 0.8),
    ])
}

/// 53 maps in two columns; the spectrum is convex on part of its only part.
pub fn convex_bump() -> GLCarpet {
    let mut maps = vec![
        AffineMap::new(0.8, 0.001, 0.0, 0.0),
        AffineMap::new(0.2, 0.19, 0.8, 0.0),
        AffineMap::new(0.2, 0.19, 0.8, 0.2),
    ];
    maps.extend((0..50).map(|k| AffineMap::new(0.2, 1e-20, 0.8, 0.5 + 0.01 * k as f64)));
    build(maps)
}

/// Ahlfors–David regular: every column has dimension 1/2.
pub fn degenerate() -> GLCarpet {
    build(vec![
        AffineMap::new(0.5, 0.25, 0.0, 0.0),
        AffineMap::new(0.5, 0.25, 0.0, 0.5),
        AffineMap::new(0.5, 0.25, 0.5, 0.25),
        AffineMap::new(0.5, 0.25, 0.5, 0.75),
    ])
}

/// Splits `[0, 1]` into `k` disjoint intervals with random gaps.
fn random_widths<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<(f64, f64)> {
    let raw: Vec<f64> = (0..2 * k + 1).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut x = raw[0] / total;
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let w = (raw[2 * j + 1] / total).min(0.95);
        out.push((w, x));
        x += raw[2 * j + 1] / total + raw[2 * j + 2] / total;
    }
    out
}

/// Stacks heights `bs` in a column of width `a` at offset `c`, spreading gaps.
fn stack(a: f64, c: f64, bs: &[f64]) -> Vec<AffineMap> {
    let gap = (1.0 - bs.iter().sum::<f64>()) / bs.len() as f64;
    let mut y = 0.0;
    bs.iter()
        .map(|&b| {
            let m = AffineMap::new(a, b, c, y);
            y += b + gap;
            m
        })
        .collect()
}

/// Random carpet with `1..=max_columns` columns of `1..=max_per_column` maps.
pub fn random_carpet<R: Rng + ?Sized>(
    rng: &mut R,
    max_columns: usize,
    max_per_column: usize,
) -> GLCarpet {
    let k = rng.random_range(1..=max_columns);
    let mut maps = Vec::new();
    for (a, c) in random_widths(rng, k) {
        let n = rng.random_range(1..=max_per_column);
        let cap = (0.9 * a).min(0.9 / n as f64);
        let bs: Vec<f64> = (0..n).map(|_| cap * rng.random_range(0.02..1.0)).collect();
        maps.extend(stack(a, c, &bs));
    }
    build(maps)
}

/// Random carpet in which every column has a single vertical ratio.
pub fn random_homogeneous_carpet<R: Rng + ?Sized>(
    rng: &mut R,
    columns: usize,
    max_per_column: usize,
) -> GLCarpet {
    let mut maps = Vec::new();
    for (a, c) in random_widths(rng, columns) {
        let n = rng.random_range(1..=max_per_column);
        let cap = (0.9 * a).min(0.9 / n as f64);
        let b = cap * rng.random_range(0.02..1.0);
        maps.extend(stack(a, c, &vec![b; n]));
    }
    build(maps)
}
