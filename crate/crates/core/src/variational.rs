//! The spectrum as a maximum over pairs of Bernoulli weight vectors.
//!
//! For weights `w` on the maps let `H` be the entropy, `Hη` the entropy of
//! the column marginal, and `χ1 = Σ w_i log(1/a_i)`, `χ2 = Σ w_i log(1/b_i)`.
//! The spectrum at `θ` equals `max_{v,w} f(θ, v, w)`; [`maximize_f`] finds
//! that maximum numerically without touching the pressure functions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::carpet::GLCarpet;
use crate::dimensions::CarpetSummary;
use crate::error::{Error, Result};
use crate::par::{map_range, Parallelism};
use crate::roots::golden_max;

const SUM_TOL: f64 = 1e-12;
const BOUNDARY_TOL: f64 = 1e-9;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        let ok = weights.iter().all(|&x| x >= 0.0 && x.is_finite());
        if !ok || (sum - 1.0).abs() > SUM_TOL || weights.is_empty() {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(weights))
    }

    /// Rescales nonnegative weights with a positive total.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || weights.iter().any(|&x| x < 0.0) {
            return Err(Error::NotNormalized { sum });
        }
        weights.iter_mut().for_each(|x| *x /= sum);
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// L¹ distance.
    pub fn l1(&self, other: &ProbVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(x, y)| (x - y).abs()).sum()
    }
}

fn ent(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub entropy: f64,
    pub projected_entropy: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub gamma: f64,
}

fn check_len(carpet: &GLCarpet, w: &ProbVector) -> Result<()> {
    if w.len() != carpet.num_maps() {
        return Err(Error::DomainError(format!(
            "weight vector has {} entries for {} maps",
            w.len(),
            carpet.num_maps()
        )));
    }
    Ok(())
}

/// Column marginal `η(w)`.
pub fn project(carpet: &GLCarpet, w: &ProbVector) -> Result<ProbVector> {
    check_len(carpet, w)?;
    let mut p = vec![0.0; carpet.num_columns()];
    for (i, &x) in w.as_slice().iter().enumerate() {
        p[carpet.column_assignment()[i]] += x;
    }
    Ok(ProbVector(p))
}

pub fn functionals(carpet: &GLCarpet, w: &ProbVector) -> Result<Functionals> {
    let p = project(carpet, w)?;
    let mut chi1 = 0.0;
    let mut chi2 = 0.0;
    for (m, &x) in carpet.maps().iter().zip(w.as_slice()) {
        chi1 -= x * m.a.ln();
        chi2 -= x * m.b.ln();
    }
    Ok(Functionals {
        entropy: w.as_slice().iter().map(|&x| ent(x)).sum(),
        projected_entropy: p.as_slice().iter().map(|&x| ent(x)).sum(),
        chi1,
        chi2,
        gamma: chi2 / chi1,
    })
}

/// `φ(θ, v) = (1/θ - 1) / (1 - 1/Γ(v))`.
pub fn phi_v(theta: f64, gamma_v: f64) -> f64 {
    (1.0 / theta - 1.0) / (1.0 - 1.0 / gamma_v)
}

fn f_thin(summary: &CarpetSummary, fw: &Functionals) -> f64 {
    summary.dim_eta + (fw.entropy - fw.projected_entropy) / fw.chi2
}

fn f_thick(summary: &CarpetSummary, fw: &Functionals, phi: f64) -> f64 {
    let d = fw.entropy - fw.projected_entropy;
    summary.dim_box + (d - summary.t_min * fw.chi2) / (fw.chi1 * phi)
}

fn f_branch(summary: &CarpetSummary, theta: f64, gamma_v: f64, fw: &Functionals) -> f64 {
    let phi = phi_v(theta, gamma_v);
    if phi <= fw.gamma {
        f_thin(summary, fw)
    } else {
        f_thick(summary, fw, phi)
    }
}

/// The objective `f(θ, v, w)`.
pub fn f_eval(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    theta: f64,
    v: &ProbVector,
    w: &ProbVector,
) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::DomainError(format!("theta = {theta} is outside (0, 1)")));
    }
    let fv = functionals(carpet, v)?;
    let fw = functionals(carpet, w)?;
    let phi = phi_v(theta, fv.gamma);
    if (phi - fw.gamma).abs() <= BOUNDARY_TOL {
        let (a, b) = (f_thin(summary, &fw), f_thick(summary, &fw, phi));
        debug_assert!((a - b).abs() <= 1e-8, "branches disagree: {a} vs {b}");
    }
    Ok(f_branch(summary, theta, fv.gamma, &fw))
}

/// `z(t, p)_i = p_{η(i)} b_i^t / Σ_{k ∈ η(i)} b_k^t`.
pub fn z_vector(carpet: &GLCarpet, t: f64, p: &ProbVector) -> Result<ProbVector> {
    if p.len() != carpet.num_columns() {
        return Err(Error::DomainError(format!(
            "column vector has {} entries for {} columns",
            p.len(),
            carpet.num_columns()
        )));
    }
    ProbVector::new(p.as_slice().to_vec())?;
    let mut z = vec![0.0; carpet.num_maps()];
    for (col, &pj) in carpet.columns().iter().zip(p.as_slice()) {
        let logs = col.log_heights();
        let m = logs.iter().map(|&l| t * l).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|&l| (t * l - m).exp()).sum();
        for (&i, &l) in col.members().iter().zip(logs) {
            z[i] = pj * (t * l - m).exp() / total;
        }
    }
    Ok(ProbVector(z))
}

/// `Σ w_i log(w_i / v_i)`.
pub fn kl_divergence(w: &ProbVector, v: &ProbVector) -> Result<f64> {
    if w.len() != v.len() {
        return Err(Error::DomainError("vectors differ in length".into()));
    }
    let mut total = 0.0;
    for (i, (&x, &y)) in w.as_slice().iter().zip(v.as_slice()).enumerate() {
        if x > 0.0 {
            if y <= 0.0 {
                return Err(Error::AbsoluteContinuityViolated { index: i });
            }
            total += x * (x / y).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Search budget shared by the optimisers in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub random_starts: usize,
    /// Line searches per start.
    pub max_steps: usize,
    /// Stop a start once a full sweep gains less than this.
    pub tolerance: f64,
    /// Points of the `t` grid used for structured seeds.
    pub t_grid: usize,
    /// Structured seeds refined by ascent (best by initial value).
    pub refined_seeds: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            random_starts: 256,
            max_steps: 10_000,
            tolerance: 1e-10,
            t_grid: 64,
            refined_seeds: 16,
            seed: 0,
            parallelism: Parallelism::Parallel,
        }
    }
}

/// Sufficient statistics of `w` for every objective here.
#[derive(Clone)]
struct State {
    w: Vec<f64>,
    p: Vec<f64>,
    h: f64,
    hp: f64,
    chi1: f64,
    chi2: f64,
}

struct Tables<'a> {
    col: &'a [usize],
    la: Vec<f64>,
    lb: Vec<f64>,
}

impl<'a> Tables<'a> {
    fn new(carpet: &'a GLCarpet) -> Self {
        Self {
            col: carpet.column_assignment(),
            la: carpet.maps().iter().map(|m| -m.a.ln()).collect(),
            lb: carpet.maps().iter().map(|m| -m.b.ln()).collect(),
        }
    }

    fn state(&self, w: Vec<f64>, columns: usize) -> State {
        let mut p = vec![0.0; columns];
        let (mut chi1, mut chi2) = (0.0, 0.0);
        for (i, &x) in w.iter().enumerate() {
            p[self.col[i]] += x;
            chi1 += x * self.la[i];
            chi2 += x * self.lb[i];
        }
        State {
            h: w.iter().map(|&x| ent(x)).sum(),
            hp: p.iter().map(|&x| ent(x)).sum(),
            w,
            p,
            chi1,
            chi2,
        }
    }

    /// Statistics after moving `delta` of mass from `j` to `i`, in O(1).
    fn moved(&self, s: &State, i: usize, j: usize, delta: f64) -> Functionals {
        let (wi, wj) = (s.w[i] + delta, s.w[j] - delta);
        let h = s.h - ent(s.w[i]) - ent(s.w[j]) + ent(wi.max(0.0)) + ent(wj.max(0.0));
        let (ci, cj) = (self.col[i], self.col[j]);
        let hp = if ci == cj {
            s.hp
        } else {
            s.hp - ent(s.p[ci]) - ent(s.p[cj]) + ent((s.p[ci] + delta).max(0.0))
                + ent((s.p[cj] - delta).max(0.0))
        };
        let chi1 = s.chi1 + delta * (self.la[i] - self.la[j]);
        let chi2 = s.chi2 + delta * (self.lb[i] - self.lb[j]);
        Functionals {
            entropy: h,
            projected_entropy: hp,
            chi1,
            chi2,
            gamma: chi2 / chi1,
        }
    }
}

fn current(s: &State) -> Functionals {
    Functionals {
        entropy: s.h,
        projected_entropy: s.hp,
        chi1: s.chi1,
        chi2: s.chi2,
        gamma: s.chi2 / s.chi1,
    }
}

/// Projected coordinate ascent: repeatedly moves mass between two coordinates
/// with a golden-section line search along the simplex edge.
fn ascend<F>(tables: &Tables, columns: usize, w: Vec<f64>, obj: &F, opts: &OracleOptions) -> (f64, Vec<f64>)
where
    F: Fn(&Functionals) -> f64,
{
    let n = w.len();
    let mut s = tables.state(w, columns);
    let mut best = obj(&current(&s));
    let mut steps = 0;
    loop {
        let start = best;
        for i in 0..n {
            for j in (i + 1)..n {
                let (lo, hi) = (-s.w[i], s.w[j]);
                if hi - lo <= 0.0 {
                    continue;
                }
                let (delta, v) = golden_max(|d| obj(&tables.moved(&s, i, j, d)), lo, hi, 1e-10 * (hi - lo));
                steps += 1;
                if v > best {
                    let mut w = std::mem::take(&mut s.w);
                    w[i] = (w[i] + delta).max(0.0);
                    w[j] = (w[j] - delta).max(0.0);
                    if delta == lo {
                        w[i] = 0.0;
                    }
                    if delta == hi {
                        w[j] = 0.0;
                    }
                    s = tables.state(w, columns);
                    best = obj(&current(&s));
                }
                if steps >= opts.max_steps {
                    return (best, s.w);
                }
            }
        }
        if best - start < opts.tolerance {
            return (best, s.w);
        }
    }
}

/// Dirichlet(1, …, 1) sample.
fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Deterministic starting points: vertices, uniform, and `z(t, p)` for `p`
/// on one column or split between two columns, over a grid of `t`.
fn structured_seeds(carpet: &GLCarpet, t_lo: f64, t_hi: f64, grid: usize) -> Vec<Vec<f64>> {
    let n = carpet.num_maps();
    let k = carpet.num_columns();
    let mut seeds: Vec<Vec<f64>> = (0..n).map(|i| ProbVector::vertex(n, i).into_vec()).collect();
    seeds.push(ProbVector::uniform(n).into_vec());
    let mut ps: Vec<Vec<f64>> = (0..k).map(|j| ProbVector::vertex(k, j).into_vec()).collect();
    for i in 0..k {
        for j in (i + 1)..k {
            for l in 1..8 {
                let mut p = vec![0.0; k];
                p[i] = l as f64 / 8.0;
                p[j] = 1.0 - p[i];
                ps.push(p);
            }
        }
    }
    let grid = grid.max(2);
    for step in 0..grid {
        let t = t_lo + (t_hi - t_lo) * step as f64 / (grid - 1) as f64;
        for p in &ps {
            let z = z_vector(carpet, t, &ProbVector(p.clone())).expect("column vector");
            seeds.push(z.into_vec());
        }
    }
    seeds
}

/// Maximises `obj` over the simplex by multi-start coordinate ascent.
fn multistart<F>(carpet: &GLCarpet, t_lo: f64, t_hi: f64, obj: F, opts: &OracleOptions) -> (f64, Vec<f64>)
where
    F: Fn(&Functionals) -> f64 + Sync,
{
    let tables = Tables::new(carpet);
    let k = carpet.num_columns();
    let n = carpet.num_maps();
    let mut seeds: Vec<(f64, Vec<f64>)> = structured_seeds(carpet, t_lo, t_hi, opts.t_grid)
        .into_iter()
        .map(|w| (obj(&current(&tables.state(w.clone(), k))), w))
        .collect();
    seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    seeds.truncate(opts.refined_seeds.max(1));
    let structured = seeds.len();
    let runs = map_range(opts.parallelism, structured + opts.random_starts, |idx| {
        let w = if idx < structured {
            seeds[idx].1.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add((idx - structured) as u64));
            dirichlet(&mut rng, n)
        };
        ascend(&tables, k, w, &obj, opts)
    });
    // first maximum in start order, independent of scheduling
    runs.into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one start")
}

/// Best value of `f(θ, ·, ·)` found, with the pair attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalMax {
    pub value: f64,
    pub v: ProbVector,
    pub w: ProbVector,
}

/// Best `Γ(v)` for fixed `w`, and the resulting value.
///
/// `f` is constant in `Γ(v)` on the thin side and monotone on the thick side,
/// so the maximum over `Γ(v) ∈ [κ_min, κ_max]` is at an end or where the
/// branches meet.
fn best_gamma(summary: &CarpetSummary, theta: f64, fw: &Functionals, kmin: f64, kmax: f64) -> (f64, f64) {
    let c = 1.0 / theta - 1.0;
    let mut cands = [kmin, kmax, kmax];
    if c < fw.gamma {
        cands[2] = (1.0 / (1.0 - c / fw.gamma)).clamp(kmin, kmax);
    }
    cands
        .into_iter()
        .map(|g| (f_branch(summary, theta, g, fw), g))
        .fold((f64::NEG_INFINITY, kmin), |a, b| if b.0 > a.0 { b } else { a })
}

/// Two-point mixture of the least and most eccentric maps with `Γ(v) = gamma`.
fn v_with_gamma(carpet: &GLCarpet, gamma: f64) -> ProbVector {
    let maps = carpet.maps();
    let key = |i: &usize| maps[*i].kappa();
    let lo = (0..maps.len()).min_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
    let hi = (0..maps.len()).max_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
    let n = maps.len();
    if lo == hi || (key(&hi) - key(&lo)).abs() < 1e-15 {
        return ProbVector::vertex(n, hi);
    }
    let (l1, l2) = (|i: usize| -maps[i].a.ln(), |i: usize| -maps[i].b.ln());
    let num = gamma * l1(lo) - l2(lo);
    let den = (l2(hi) - gamma * l1(hi)) - (l2(lo) - gamma * l1(lo));
    let lam = (num / den).clamp(0.0, 1.0);
    let mut v = vec![0.0; n];
    v[hi] += lam;
    v[lo] += 1.0 - lam;
    ProbVector(v)
}

/// Numerical `max_{v, w} f(θ, v, w)`.
///
/// Always a lower bound on the true maximum.
pub fn maximize_f(
    carpet: &GLCarpet,
    summary: &CarpetSummary,
    theta: f64,
    opts: &OracleOptions,
) -> Result<VariationalMax> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::DomainError(format!("theta = {theta} is outside (0, 1)")));
    }
    let (kmin, kmax) = (summary.kappa_min, summary.kappa_max);
    let obj = |fw: &Functionals| best_gamma(summary, theta, fw, kmin, kmax).0;
    let (_, w) = multistart(carpet, summary.t_min, summary.t_max, obj, opts);
    let w = ProbVector::normalized(w)?;
    let fw = functionals(carpet, &w)?;
    let (_, gamma) = best_gamma(summary, theta, &fw, kmin, kmax);
    let v = v_with_gamma(carpet, gamma);
    let value = f_eval(carpet, summary, theta, &v, &w)?;
    Ok(VariationalMax { value, v, w })
}

/// `min_w (t χ2(w) - [H(w) - H(η(w))]) / χ1(w)`.
pub fn g_variational(carpet: &GLCarpet, t: f64, opts: &OracleOptions) -> (f64, ProbVector) {
    let obj = |fw: &Functionals| -(t * fw.chi2 - (fw.entropy - fw.projected_entropy)) / fw.chi1;
    let (v, w) = multistart(carpet, t, t, obj, opts);
    (-v, ProbVector::normalized(w).expect("ascent stays on the simplex"))
}

/// `max_w [H(w) - H(η(w))] / χ2(w)`, which equals `t_max`.
pub fn fibred_max(carpet: &GLCarpet, opts: &OracleOptions) -> (f64, ProbVector) {
    let obj = |fw: &Functionals| (fw.entropy - fw.projected_entropy) / fw.chi2;
    let (v, w) = multistart(carpet, 0.0, 1.0, obj, opts);
    (v, ProbVector::normalized(w).expect("ascent stays on the simplex"))
}
