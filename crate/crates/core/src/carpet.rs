//! Gatzouras–Lalley iterated function systems.
//!
//! A carpet is generated by diagonal affine maps `T(x, y) = (a x + c, b y + d)`
//! with `0 < b < a < 1`. Maps sharing the same horizontal part `(a, c)` form a
//! *column*. Construction validates the open set conditions for the rectangles
//! and for their projections onto the horizontal axis; after that the carpet
//! is immutable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance used to identify equal `(a, c)` pairs.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Largest admissible contraction ratio.
pub const MAX_RATIO: f64 = 0.999;

/// One generating map `(x, y) ↦ (a x + c, b y + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl AffineMap {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// `log b / log a`, the eccentricity exponent of the map.
    pub fn kappa(&self) -> f64 {
        self.b.ln() / self.a.ln()
    }
}

/// Maps sharing one horizontal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    width: f64,
    offset: f64,
    members: Vec<usize>,
    log_width: f64,
    log_heights: Vec<f64>,
    homogeneous: bool,
}

impl Column {
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Map indices in this column, sorted by vertical offset.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn log_width(&self) -> f64 {
        self.log_width
    }

    /// `log b_i` for each member, in member order.
    pub fn log_heights(&self) -> &[f64] {
        &self.log_heights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }
}

/// A validated Gatzouras–Lalley system.
#[derive(Debug, Clone, PartialEq)]
pub struct GLCarpet {
    maps: Vec<AffineMap>,
    columns: Vec<Column>,
    column_of: Vec<usize>,
    tolerance: f64,
}

impl GLCarpet {
    /// Validates `maps` and groups them into columns.
    pub fn new(maps: Vec<AffineMap>, tolerance: f64) -> Result<Self> {
        build_carpet(maps, tolerance)
    }

    /// Same as [`GLCarpet::new`] with [`DEFAULT_TOLERANCE`].
    pub fn from_maps(maps: Vec<AffineMap>) -> Result<Self> {
        build_carpet(maps, DEFAULT_TOLERANCE)
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> Result<&Column> {
        self.columns.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.columns.len(),
        })
    }

    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Column containing map `map_index`.
    pub fn column_of(&self, map_index: usize) -> Result<usize> {
        self.column_of
            .get(map_index)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: map_index,
                len: self.maps.len(),
            })
    }

    /// Column index for every map, indexed by map.
    pub fn column_assignment(&self) -> &[usize] {
        &self.column_of
    }

    pub fn is_homogeneous(&self, column: usize) -> Result<bool> {
        Ok(self.column(column)?.homogeneous)
    }
}

fn check_map(index: usize, m: &AffineMap, tol: f64) -> Result<()> {
    let finite = [m.a, m.b, m.c, m.d].iter().all(|v| v.is_finite());
    if !finite || m.b <= 0.0 || m.a <= 0.0 || m.a > MAX_RATIO {
        return Err(Error::RatioOutOfRange {
            index,
            max_ratio: MAX_RATIO,
        });
    }
    if m.b >= m.a - tol {
        return Err(Error::NotStrictlyWider {
            index,
            a: m.a,
            b: m.b,
        });
    }
    let inside = m.c >= -tol && m.c + m.a <= 1.0 + tol && m.d >= -tol && m.d + m.b <= 1.0 + tol;
    if !inside {
        return Err(Error::OutOfUnitSquare { index });
    }
    Ok(())
}

/// Length of the overlap of `[x0, x0 + w0]` and `[x1, x1 + w1]`.
fn overlap(x0: f64, w0: f64, x1: f64, w1: f64) -> f64 {
    ((x0 + w0).min(x1 + w1) - x0.max(x1)).max(0.0)
}

/// Validates a Gatzouras–Lalley system and derives its columns.
///
/// Columns are sorted by horizontal offset and members by vertical offset
/// (ties keep input order). Two rectangles overlap only if the overlap exceeds
/// `tolerance` in both directions, so shared edges are allowed.
pub fn build_carpet(maps: Vec<AffineMap>, tolerance: f64) -> Result<GLCarpet> {
    if !(tolerance > 0.0 && tolerance <= 1e-6) {
        return Err(Error::InvalidTolerance(tolerance));
    }
    if maps.is_empty() {
        return Err(Error::EmptySystem);
    }
    for (i, m) in maps.iter().enumerate() {
        check_map(i, m, tolerance)?;
    }
    for i in 0..maps.len() {
        for j in (i + 1)..maps.len() {
            let (p, q) = (&maps[i], &maps[j]);
            let ow = overlap(p.c, p.a, q.c, q.a);
            let oh = overlap(p.d, p.b, q.d, q.b);
            if ow > tolerance && oh > tolerance {
                return Err(Error::MapOverlap {
                    first: i,
                    second: j,
                });
            }
        }
    }

    // group by (a, c) against the first member of each column
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        let found = groups.iter_mut().find(|g| {
            let r = &maps[g[0]];
            (r.a - m.a).abs() <= tolerance && (r.c - m.c).abs() <= tolerance
        });
        match found {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups.sort_by(|g, h| maps[g[0]].c.total_cmp(&maps[h[0]].c));
    for g in &mut groups {
        g.sort_by(|&i, &j| maps[i].d.total_cmp(&maps[j].d));
    }

    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            let (p, q) = (&maps[groups[i][0]], &maps[groups[j][0]]);
            if overlap(p.c, p.a, q.c, q.a) > tolerance {
                return Err(Error::ColumnOverlap {
                    first: p.c,
                    second: q.c,
                });
            }
        }
    }

    let mut column_of = vec![0; maps.len()];
    let columns = groups
        .into_iter()
        .enumerate()
        .map(|(k, members)| {
            for &i in &members {
                column_of[i] = k;
            }
            let rep = maps[members[0]];
            let b0 = rep.b;
            let homogeneous = members.iter().all(|&i| (maps[i].b - b0).abs() <= tolerance);
            Column {
                width: rep.a,
                offset: rep.c,
                log_width: rep.a.ln(),
                log_heights: members.iter().map(|&i| maps[i].b.ln()).collect(),
                members,
                homogeneous,
            }
        })
        .collect();

    Ok(GLCarpet {
        maps,
        columns,
        column_of,
        tolerance,
    })
}

/// Free-function form of [`GLCarpet::column_of`].
pub fn column_of(carpet: &GLCarpet, map_index: usize) -> Result<usize> {
    carpet.column_of(map_index)
}

/// Free-function form of [`GLCarpet::is_homogeneous`].
pub fn is_homogeneous(carpet: &GLCarpet, column: usize) -> Result<bool> {
    carpet.is_homogeneous(column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn four_map_has_two_columns() {
        let k = fixtures::four_map();
        assert_eq!(k.num_columns(), 2);
        assert_eq!(k.columns()[0].members(), &[0, 1]);
        assert_eq!(k.columns()[1].members(), &[2, 3]);
        assert_eq!(k.column_of(2).unwrap(), 1);
        assert_eq!(k.column_of(1).unwrap(), 0);
        assert!(!k.is_homogeneous(0).unwrap());
    }

    #[test]
    fn single_map_is_one_column() {
        let k = GLCarpet::from_maps(vec![AffineMap::new(0.5, 0.25, 0.0, 0.0)]).unwrap();
        assert_eq!(k.num_columns(), 1);
        assert_eq!(k.columns()[0].len(), 1);
        assert_eq!(k.column_of(0).unwrap(), 0);
        assert!(k.is_homogeneous(0).unwrap());
    }

    #[test]
    fn square_map_is_rejected() {
        let err = GLCarpet::from_maps(vec![AffineMap::new(0.3, 0.3, 0.0, 0.0)]).unwrap_err();
        assert_eq!(err.code(), "NotStrictlyWider");
    }

    #[test]
    fn equal_heights_make_a_homogeneous_column() {
        let k = GLCarpet::from_maps(vec![
            AffineMap::new(0.5, 0.25, 0.0, 0.0),
            AffineMap::new(0.5, 0.25, 0.0, 0.5),
        ])
        .unwrap();
        assert!(k.is_homogeneous(0).unwrap());
    }

    #[test]
    fn validation_errors() {
        assert_eq!(GLCarpet::from_maps(vec![]).unwrap_err(), Error::EmptySystem);
        let out = GLCarpet::from_maps(vec![AffineMap::new(0.5, 0.25, 0.6, 0.0)]).unwrap_err();
        assert_eq!(out.code(), "OutOfUnitSquare");
        let overlap = GLCarpet::from_maps(vec![
            AffineMap::new(0.5, 0.25, 0.0, 0.0),
            AffineMap::new(0.5, 0.25, 0.0, 0.1),
        ])
        .unwrap_err();
        assert_eq!(overlap, Error::MapOverlap { first: 0, second: 1 });
        let cols = GLCarpet::from_maps(vec![
            AffineMap::new(0.5, 0.25, 0.0, 0.0),
            AffineMap::new(0.4, 0.25, 0.3, 0.5),
        ])
        .unwrap_err();
        assert_eq!(cols.code(), "ColumnOverlap");
        let big = GLCarpet::from_maps(vec![AffineMap::new(0.9995, 0.5, 0.0, 0.0)]).unwrap_err();
        assert_eq!(big.code(), "RatioOutOfRange");
        assert_eq!(
            GLCarpet::new(vec![AffineMap::new(0.5, 0.25, 0.0, 0.0)], 1e-3).unwrap_err(),
            Error::InvalidTolerance(1e-3)
        );
    }

    #[test]
    fn shared_edges_are_allowed() {
        let k = GLCarpet::from_maps(vec![
            AffineMap::new(0.5, 0.25, 0.0, 0.0),
            AffineMap::new(0.5, 0.25, 0.0, 0.25),
            AffineMap::new(0.5, 0.4, 0.5, 0.25),
        ])
        .unwrap();
        assert_eq!(k.num_columns(), 2);
    }

    #[test]
    fn members_sorted_by_vertical_offset() {
        let k = GLCarpet::from_maps(vec![
            AffineMap::new(0.5, 0.2, 0.0, 0.7),
            AffineMap::new(0.5, 0.1, 0.0, 0.1),
            AffineMap::new(0.25, 0.1, 0.6, 0.0),
        ])
        .unwrap();
        assert_eq!(k.columns()[0].members(), &[1, 0]);
        assert_eq!(k.columns()[1].members(), &[2]);
    }

    #[test]
    fn index_out_of_range() {
        let k = fixtures::four_map();
        assert_eq!(k.column_of(4).unwrap_err().code(), "IndexOutOfRange");
        assert_eq!(k.is_homogeneous(2).unwrap_err().code(), "IndexOutOfRange");
    }
}
