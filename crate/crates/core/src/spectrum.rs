//! The Assouad spectrum `θ ↦ dim_A^θ K` and its phase transitions.
//!
//! The value at `θ` is `dim_eta + τ*(φ(θ)) / φ(θ)` where `τ*` is the concave
//! conjugate of `g` restricted to `[t_min, t_max]` and
//! `φ(θ) = (1/θ - 1) / (1 - 1/κ_max)`.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::carpet::GLCarpet;
use crate::dimensions::CarpetSummary;
use crate::error::{Error, Result};
use crate::par::{map_collect, Parallelism};
use crate::pressure::{build_partition, psi_col, psi_prime_col, psi_second_col, SpectrumPartition};
use crate::roots::bisect;

/// Subdifferential comparisons at partition boundaries.
pub const KINK_TOL: f64 = 1e-12;

/// Transition values closer than this are the same transition.
pub const TRANSITION_TOL: f64 = 1e-10;

pub(crate) fn phi_raw(theta: f64, kappa_max: f64) -> f64 {
    (1.0 / theta - 1.0) / (1.0 - 1.0 / kappa_max)
}

pub(crate) fn phi_inv_raw(alpha: f64, kappa_max: f64) -> f64 {
    1.0 / (alpha * (1.0 - 1.0 / kappa_max) + 1.0)
}

fn check_kappa(kappa_max: f64) -> Result<()> {
    if kappa_max > 1.0 && kappa_max.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("kappa_max = {kappa_max} must exceed 1")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("theta = {theta} is outside (0, 1)")))
    }
}

pub fn phi(theta: f64, kappa_max: f64) -> Result<f64> {
    check_theta(theta)?;
    check_kappa(kappa_max)?;
    Ok(phi_raw(theta, kappa_max))
}

pub fn phi_inv(alpha: f64, kappa_max: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::DomainError(format!("alpha = {alpha} must be positive")));
    }
    check_kappa(kappa_max)?;
    Ok(phi_inv_raw(alpha, kappa_max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    /// A point `t` with `alpha` in the superdifferential of `g` at `t`.
    pub t_star: f64,
}

fn owned_partition<'a>(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    partition: Option<&'a SpectrumPartition>,
) -> Result<Cow<'a, SpectrumPartition>> {
    match partition {
        Some(p) => Ok(Cow::Borrowed(p)),
        None => Ok(Cow::Owned(build_partition(carpet, summary)?)),
    }
}

/// `τ*(α) = inf_{t ∈ [t_min, t_max]} (t α - g(t))`.
pub fn conjugate(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    partition: &SpectrumPartition,
    alpha: f64,
) -> Result<Conjugate> {
    if summary.degenerate {
        return Err(Error::DegenerateCarpet);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::DomainError(format!("alpha = {alpha} must be positive")));
    }
    let cols = carpet.columns();
    let parts = &partition.parts;
    let first = &cols[parts[0].column];
    let last = &cols[parts[parts.len() - 1].column];
    let (t_min, t_max) = (summary.t_min, summary.t_max);

    if alpha >= psi_prime_col(first, t_min) - KINK_TOL {
        return Ok(Conjugate {
            value: t_min * alpha - psi_col(first, t_min),
            t_star: t_min,
        });
    }
    if alpha <= psi_prime_col(last, t_max) + KINK_TOL {
        return Ok(Conjugate {
            value: t_max * alpha,
            t_star: t_max,
        });
    }
    for w in parts.windows(2) {
        let t = w[0].t_hi;
        let left = psi_prime_col(&cols[w[0].column], t);
        let right = psi_prime_col(&cols[w[1].column], t);
        if alpha >= right - KINK_TOL && alpha <= left + KINK_TOL {
            return Ok(Conjugate {
                value: t * alpha - psi_col(&cols[w[0].column], t),
                t_star: t,
            });
        }
    }
    for p in parts.iter().filter(|p| !p.homogeneous) {
        let c = &cols[p.column];
        if alpha <= psi_prime_col(c, p.t_lo) && alpha >= psi_prime_col(c, p.t_hi) {
            let t = bisect(|t| psi_prime_col(c, t) - alpha, p.t_lo, p.t_hi, 0.0)?;
            return Ok(Conjugate {
                value: t * alpha - psi_col(c, t),
                t_star: t,
            });
        }
    }
    Err(Error::DomainError(format!(
        "alpha = {alpha} not located in the superdifferential of g"
    )))
}

/// Which branch of the piecewise formula applies at `θ`.
///
/// Part and boundary indices are 0-based; `KinkPlateau(n)` is the boundary
/// between parts `n` and `n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    BoxTail,
    SmoothPart(usize),
    KinkPlateau(usize),
    AssouadPlateau,
    Degenerate,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::BoxTail => write!(f, "BOX_TAIL"),
            Case::SmoothPart(n) => write!(f, "SMOOTH_PART({n})"),
            Case::KinkPlateau(n) => write!(f, "KINK_PLATEAU({n})"),
            Case::AssouadPlateau => write!(f, "ASSOUAD_PLATEAU"),
            Case::Degenerate => write!(f, "DEGENERATE"),
        }
    }
}

impl Serialize for Case {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub theta: f64,
    pub value: f64,
    pub case: Case,
    pub t_star: Option<f64>,
}

fn classify(partition: &SpectrumPartition, theta: f64) -> Case {
    let parts = &partition.parts;
    if theta >= partition.theta_global_max {
        return Case::AssouadPlateau;
    }
    if theta <= partition.theta_global_min {
        return Case::BoxTail;
    }
    for (n, p) in parts.iter().enumerate() {
        if theta >= p.theta_min && theta <= p.theta_max {
            return Case::SmoothPart(n);
        }
        if n + 1 < parts.len() && theta > p.theta_max && theta < parts[n + 1].theta_min {
            return Case::KinkPlateau(n);
        }
    }
    // unreachable for a consistent partition; fall back to the nearest kink
    let n = parts
        .iter()
        .rposition(|p| p.theta_max <= theta)
        .unwrap_or(0)
        .min(parts.len().saturating_sub(2));
    Case::KinkPlateau(n)
}

fn point_with(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    partition: &SpectrumPartition,
    theta: f64,
) -> Result<SpectrumPoint> {
    let alpha = phi_raw(theta, summary.kappa_max);
    let conj = conjugate(carpet, summary, partition, alpha)?;
    let case = classify(partition, theta);
    let value = if case == Case::AssouadPlateau {
        summary.dim_assouad
    } else {
        (summary.dim_eta + conj.value / alpha).min(summary.dim_assouad)
    };
    Ok(SpectrumPoint {
        theta,
        value,
        case,
        t_star: Some(conj.t_star),
    })
}

/// Assouad spectrum at `θ`.
///
/// Pass the partition when evaluating many points; with `None` it is rebuilt.
pub fn spectrum(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    partition: Option<&SpectrumPartition>,
    theta: f64,
) -> Result<SpectrumPoint> {
    check_theta(theta)?;
    if summary.degenerate {
        return Ok(SpectrumPoint {
            theta,
            value: summary.dim_box,
            case: Case::Degenerate,
            t_star: None,
        });
    }
    let p = owned_partition(carpet, summary, partition)?;
    point_with(carpet, summary, &p, theta)
}

/// `n` equally spaced values of θ on `[1e-4, 1 - 1e-4]`.
pub fn uniform_thetas(n: usize) -> Vec<f64> {
    let (lo, hi) = (1e-4, 1.0 - 1e-4);
    match n {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Spectrum at every θ in `thetas`, in order.
pub fn spectrum_grid(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    partition: Option<&SpectrumPartition>,
    thetas: &[f64],
    mode: Parallelism,
) -> Result<Vec<SpectrumPoint>> {
    if summary.degenerate {
        return thetas.iter().map(|&t| spectrum(carpet, summary, None, t)).collect();
    }
    let p = owned_partition(carpet, summary, partition)?;
    thetas.iter().try_for_each(|&t| check_theta(t))?;
    map_collect(mode, thetas, |&t| point_with(carpet, summary, &p, t))
        .into_iter()
        .collect()
}

/// Solves `ψ'(t) = α` on `[lo, hi]` by Newton's method with a bisection guard.
fn newton_slope(c: &crate::carpet::Column, alpha: f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut t = 0.5 * (a + b);
    for _ in 0..200 {
        let f = psi_prime_col(c, t) - alpha;
        if f == 0.0 {
            return t;
        }
        // ψ' decreasing: f > 0 means the root lies to the right
        if f > 0.0 {
            a = t;
        } else {
            b = t;
        }
        let d = psi_second_col(c, t);
        let mut next = if d < 0.0 { t - f / d } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - t).abs() <= 1e-16 * (1.0 + t.abs()) || b - a <= 1e-16 {
            return next;
        }
        t = next;
    }
    t
}

/// The spectrum from the four explicit branches, without the conjugate.
///
/// Used to cross-check [`spectrum`]; both must agree to about `1e-10`.
pub fn spectrum_piecewise(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    partition: &SpectrumPartition,
    theta: f64,
) -> Result<f64> {
    check_theta(theta)?;
    if summary.degenerate {
        return Ok(summary.dim_box);
    }
    let cols = carpet.columns();
    let phi = phi_raw(theta, summary.kappa_max);
    let parts = &partition.parts;
    Ok(match classify(partition, theta) {
        Case::AssouadPlateau => summary.dim_assouad,
        Case::BoxTail => summary.dim_box - psi_col(&cols[parts[0].column], summary.t_min) / phi,
        Case::SmoothPart(n) => {
            let p = &parts[n];
            let c = &cols[p.column];
            let t = if p.homogeneous {
                p.t_lo
            } else {
                newton_slope(c, phi, p.t_lo, p.t_hi)
            };
            summary.dim_eta + (t * phi - psi_col(c, t)) / phi
        }
        Case::KinkPlateau(n) => {
            let t = parts[n].t_hi;
            summary.dim_eta + t - psi_col(&cols[parts[n].column], t) / phi
        }
        Case::Degenerate => summary.dim_box,
    })
}

/// A point `(θ, dim_A^θ K)` on the graph, parametrised by `t` in part `n`.
pub fn parametric_point(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    partition: &SpectrumPartition,
    part: usize,
    t: f64,
) -> Result<(f64, f64)> {
    let p = partition.parts.get(part).ok_or(Error::IndexOutOfRange {
        index: part,
        len: partition.parts.len(),
    })?;
    if p.homogeneous {
        return Err(Error::HomogeneousPart(part));
    }
    if !(t >= p.t_lo && t <= p.t_hi) {
        return Err(Error::DomainError(format!(
            "t = {t} outside part [{}, {}]",
            p.t_lo, p.t_hi
        )));
    }
    let c = &carpet.columns()[p.column];
    let d = psi_prime_col(c, t);
    Ok((
        phi_inv_raw(d, summary.kappa_max),
        summary.dim_eta + t - psi_col(c, t) / d,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransitionKind {
    #[serde(rename = "ORDER_1")]
    Order1,
    #[serde(rename = "ORDER_2")]
    Order2,
    OddHigher,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub theta: f64,
    pub kind: TransitionKind,
    /// Parts whose θ endpoint falls at this transition.
    pub parts: Vec<usize>,
}

/// Points where the spectrum fails to be analytic, with their order class.
pub fn classify_transitions(
    summary: &CarpetSummary,
    partition: &SpectrumPartition,
) -> Result<Vec<Transition>> {
    if summary.degenerate {
        return Err(Error::DegenerateCarpet);
    }
    // (theta, part, is_max)
    let mut ends: Vec<(f64, usize, bool)> = Vec::new();
    for (n, p) in partition.parts.iter().enumerate() {
        ends.push((p.theta_min, n, false));
        ends.push((p.theta_max, n, true));
    }
    ends.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut groups: Vec<Vec<(f64, usize, bool)>> = Vec::new();
    for e in ends {
        match groups.last_mut() {
            Some(g) if e.0 - g[0].0 <= TRANSITION_TOL => g.push(e),
            _ => groups.push(vec![e]),
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let parts_here = |is_max: bool| g.iter().filter(move |e| e.2 == is_max).map(|e| e.1);
            let homogeneous = g.iter().any(|e| partition.parts[e.1].homogeneous);
            let joined = parts_here(true).any(|n| parts_here(false).any(|m| m == n + 1));
            let kind = if homogeneous {
                TransitionKind::Order1
            } else if joined {
                TransitionKind::OddHigher
            } else {
                TransitionKind::Order2
            };
            let mut parts: Vec<usize> = g.iter().map(|e| e.1).collect();
            parts.dedup();
            Transition {
                theta: g[0].0,
                kind,
                parts,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimensions::summarize;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parameter_change() {
        assert_abs_diff_eq!(phi(0.5, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        for &t in &[0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(phi_inv(phi(t, 3.0).unwrap(), 3.0).unwrap(), t, epsilon = 1e-15);
        }
        assert!(phi(1.0 - 1e-12, 2.0).unwrap() < 1e-11);
        assert!(phi(0.0, 2.0).is_err() && phi(1.0, 2.0).is_err() && phi_inv(-1.0, 2.0).is_err());
    }

    #[test]
    fn oracle_values() {
        let cases = [
            (fixtures::four_map(), [1.27316457, 1.34244278, 1.34838378]),
            (fixtures::bm_three_map(), [1.38609002, 1.52224824, 1.63092975]),
        ];
        for (k, expect) in cases {
            let s = summarize(&k);
            let p = build_partition(&k, &s).unwrap();
            for (theta, v) in [0.1, 0.5, 0.9].into_iter().zip(expect) {
                let pt = spectrum(&k, &s, Some(&p), theta).unwrap();
                assert_abs_diff_eq!(pt.value, v, epsilon = 1e-8);
                let pw = spectrum_piecewise(&k, &s, &p, theta).unwrap();
                assert_abs_diff_eq!(pt.value, pw, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn plateau_and_degenerate() {
        let k = fixtures::four_map();
        let s = summarize(&k);
        let p = build_partition(&k, &s).unwrap();
        let pt = spectrum(&k, &s, Some(&p), p.theta_global_max).unwrap();
        assert_eq!(pt.case, Case::AssouadPlateau);
        assert_eq!(pt.value, s.dim_assouad);
        let d = fixtures::degenerate();
        let sd = summarize(&d);
        for &t in &[0.01, 0.5, 0.99] {
            let pt = spectrum(&d, &sd, None, t).unwrap();
            assert_eq!((pt.value, pt.case), (sd.dim_box, Case::Degenerate));
        }
        assert!(spectrum(&k, &s, Some(&p), 1.0).is_err());
    }

    #[test]
    fn affine_conjugate() {
        // single inhomogeneous column: g = ψ, so τ*(ψ'(t)) = t ψ'(t) - ψ(t)
        let k = fixtures::four_map();
        let s = summarize(&k);
        let p = build_partition(&k, &s).unwrap();
        let c = &k.columns()[p.parts[0].column];
        let t = 0.5 * (p.parts[0].t_lo + p.parts[0].t_hi);
        let a = psi_prime_col(c, t);
        let conj = conjugate(&k, &s, &p, a).unwrap();
        assert_abs_diff_eq!(conj.value, t * a - psi_col(c, t), epsilon = 1e-12);
        let small = conjugate(&k, &s, &p, 1e-3).unwrap();
        assert_eq!(small.value, s.t_max * 1e-3);
    }

    #[test]
    fn parametric_curve_lies_on_graph() {
        let k = fixtures::convex_bump();
        let s = summarize(&k);
        let p = build_partition(&k, &s).unwrap();
        let part = &p.parts[0];
        for i in 1..20 {
            let t = part.t_lo + (part.t_hi - part.t_lo) * i as f64 / 20.0;
            let (theta, v) = parametric_point(&k, &s, &p, 0, t).unwrap();
            assert_abs_diff_eq!(spectrum(&k, &s, Some(&p), theta).unwrap().value, v, epsilon = 1e-9);
        }
        let (theta, _) = parametric_point(&k, &s, &p, 0, part.t_hi).unwrap();
        assert_abs_diff_eq!(theta, part.theta_max, epsilon = 1e-15);
    }

    #[test]
    fn homogeneous_part_has_no_parametrisation() {
        let k = fixtures::bm_three_map();
        let s = summarize(&k);
        let p = build_partition(&k, &s).unwrap();
        assert_eq!(
            parametric_point(&k, &s, &p, 0, s.t_min).unwrap_err(),
            Error::HomogeneousPart(0)
        );
    }

    #[test]
    fn transitions() {
        let k = fixtures::six_transition();
        let s = summarize(&k);
        let p = build_partition(&k, &s).unwrap();
        let tr = classify_transitions(&s, &p).unwrap();
        assert_eq!(tr.len(), 6);
        assert!(tr.iter().all(|t| t.kind == TransitionKind::Order2));

        let one = fixtures::four_map();
        let s1 = summarize(&one);
        let p1 = build_partition(&one, &s1).unwrap();
        let tr = classify_transitions(&s1, &p1).unwrap();
        assert_eq!(p1.parts.len(), 1);
        assert_eq!(tr.len(), 2);
        assert!(tr.iter().all(|t| t.kind == TransitionKind::Order2));

        let bm = fixtures::bm_three_map();
        let sb = summarize(&bm);
        let pb = build_partition(&bm, &sb).unwrap();
        let tr = classify_transitions(&sb, &pb).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr[0].kind, TransitionKind::Order1);
        assert_eq!(
            serde_json::to_string(&TransitionKind::OddHigher).unwrap(),
            "\"ODD_HIGHER\""
        );
    }

    #[test]
    fn sequential_and_parallel_grids_agree() {
        let k = fixtures::six_transition();
        let s = summarize(&k);
        let th = uniform_thetas(500);
        let a = spectrum_grid(&k, &s, None, &th, Parallelism::Sequential).unwrap();
        let b = spectrum_grid(&k, &s, None, &th, Parallelism::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
