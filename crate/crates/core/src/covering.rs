//! Covering counts of approximate squares in symbolic space.
//!
//! An approximate square `P(i, u)` is the set of infinite words that start
//! with the base word `i` and whose next columns spell `u`, with `u` the
//! shortest column word making the square's width drop below the height
//! `b_i`. `S(r)` collects the squares with `b_i < r ≤ b_{i⁻}`.
//!
//! The spectrum estimate is the largest exponent
//! `log N(Q) / ((1/θ - 1) log(1/b_i))` over `Q ∈ S(r)`, where `N(Q)` counts
//! the squares of `S(b_i^{1/θ})` contained in `Q`. Lengths are handled in log
//! space; two lengths closer than [`TIE_EPS`] (in log) compare as equal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use serde::Serialize;

use crate::carpet::GLCarpet;
use crate::error::{Error, Result};
use crate::par::{map_collect, Parallelism};

pub const TIE_EPS: f64 = 1e-9;
pub const DEFAULT_CAP: usize = 5_000_000;
pub const DEFAULT_SAMPLE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolicWord {
    pub letters: Vec<usize>,
    pub width: f64,
    pub height: f64,
}

impl SymbolicWord {
    pub fn new(carpet: &GLCarpet, letters: Vec<usize>) -> Result<Self> {
        let maps = carpet.maps();
        if let Some(&i) = letters.iter().find(|&&i| i >= maps.len()) {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: maps.len(),
            });
        }
        Ok(Self {
            width: letters.iter().map(|&i| maps[i].a).product(),
            height: letters.iter().map(|&i| maps[i].b).product(),
            letters,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxSquare {
    pub base: SymbolicWord,
    pub column_ext: Vec<usize>,
}

impl ApproxSquare {
    /// Columns of the base followed by the extension.
    pub fn column_address(&self, carpet: &GLCarpet) -> Vec<usize> {
        let col = carpet.column_assignment();
        self.base
            .letters
            .iter()
            .map(|&i| col[i])
            .chain(self.column_ext.iter().copied())
            .collect()
    }

    /// Whether every infinite word in `other` also lies in `self`.
    pub fn contains(&self, carpet: &GLCarpet, other: &ApproxSquare) -> bool {
        let (a, b) = (&self.base.letters, &other.base.letters);
        if b.len() < a.len() || b[..a.len()] != a[..] {
            return false;
        }
        let mine = &self.column_ext;
        let theirs = &other.column_address(carpet)[a.len()..];
        theirs.len() >= mine.len() && theirs[..mine.len()] == mine[..]
    }

    /// Whether the infinite word starting with `word` lies in the square.
    pub fn matches(&self, carpet: &GLCarpet, word: &[usize]) -> bool {
        let base = &self.base.letters;
        let n = base.len();
        let col = carpet.column_assignment();
        word.len() >= n + self.column_ext.len()
            && word[..n] == base[..]
            && word[n..n + self.column_ext.len()]
                .iter()
                .zip(&self.column_ext)
                .all(|(&i, &c)| col[i] == c)
    }
}

/// Maps grouped by (column, height): words with equal class counts have
/// equal width and height.
struct Alphabet {
    class_of: Vec<usize>,
    lb: Vec<f64>,
    la: Vec<f64>,
    mult: Vec<f64>,
    in_column: Vec<Vec<usize>>,
    col_la: Vec<f64>,
}

impl Alphabet {
    fn new(carpet: &GLCarpet) -> Self {
        let mut class_of = vec![0; carpet.num_maps()];
        let (mut lb, mut la, mut mult): (Vec<f64>, Vec<f64>, Vec<f64>) = (vec![], vec![], vec![]);
        let mut in_column: Vec<Vec<usize>> = vec![vec![]; carpet.num_columns()];
        for (j, col) in carpet.columns().iter().enumerate() {
            for &i in col.members() {
                let b = carpet.maps()[i].b;
                let found = in_column[j]
                    .iter()
                    .copied()
                    .find(|&c| ((-lb[c]).exp() - b).abs() <= carpet.tolerance());
                let c = match found {
                    Some(c) => c,
                    None => {
                        lb.push(-b.ln());
                        la.push(-col.width().ln());
                        mult.push(0.0);
                        in_column[j].push(lb.len() - 1);
                        lb.len() - 1
                    }
                };
                mult[c] += 1.0;
                class_of[i] = c;
            }
        }
        Self {
            class_of,
            lb,
            la,
            mult,
            in_column,
            col_la: carpet.columns().iter().map(|c| -c.width().ln()).collect(),
        }
    }

    fn classes(&self) -> usize {
        self.lb.len()
    }

    /// `log(1/b)` of any word with these class counts.
    fn depth_b(&self, counts: &[u16]) -> f64 {
        counts.iter().zip(&self.lb).map(|(&n, &l)| n as f64 * l).sum()
    }

    fn depth_a(&self, counts: &[u16]) -> f64 {
        counts.iter().zip(&self.la).map(|(&n, &l)| n as f64 * l).sum()
    }

    fn col_depth(&self, m: &[u16]) -> f64 {
        m.iter().zip(&self.col_la).map(|(&n, &l)| n as f64 * l).sum()
    }

    fn counts_of(&self, letters: &[usize]) -> Vec<u16> {
        let mut c = vec![0u16; self.classes()];
        for &i in letters {
            c[self.class_of[i]] += 1;
        }
        c
    }
}

fn deeper(x: f64, bound: f64) -> bool {
    x > bound + TIE_EPS
}

/// Number of column words `c` with `lw(m0 + c) > λ ≥ lw(m0 + c⁻)`.
fn column_section_count(alpha: &Alphabet, lambda: f64, m0: &[u16]) -> f64 {
    fn rec(alpha: &Alphabet, lambda: f64, m: &mut Vec<u16>, memo: &mut HashMap<Vec<u16>, f64>) -> f64 {
        if let Some(&v) = memo.get(m.as_slice()) {
            return v;
        }
        let mut total = 0.0;
        for j in 0..m.len() {
            m[j] += 1;
            total += if deeper(alpha.col_depth(m), lambda) {
                1.0
            } else {
                rec(alpha, lambda, m, memo)
            };
            m[j] -= 1;
        }
        memo.insert(m.clone(), total);
        total
    }
    let mut m = m0.to_vec();
    rec(alpha, lambda, &mut m, &mut HashMap::new())
}

/// Visits every square of `S(r)` as `(base letters, base class counts, ext)`.
fn visit_squares<F>(carpet: &GLCarpet, alpha: &Alphabet, r: f64, cap: usize, mut f: F) -> std::result::Result<usize, usize>
where
    F: FnMut(&[usize], &[u16], &[usize]),
{
    let depth_r = -r.ln();
    let n = carpet.num_maps();
    let k = carpet.num_columns();
    let mut word = Vec::new();
    let mut counts = vec![0u16; alpha.classes()];
    let mut ext = Vec::new();
    let mut m = vec![0u16; k];
    let mut seen = 0usize;

    #[allow(clippy::too_many_arguments)]
    fn exts<F: FnMut(&[usize], &[u16], &[usize])>(
        alpha: &Alphabet,
        lambda: f64,
        word: &[usize],
        counts: &[u16],
        ext: &mut Vec<usize>,
        m: &mut Vec<u16>,
        seen: &mut usize,
        cap: usize,
        f: &mut F,
    ) -> bool {
        for j in 0..m.len() {
            ext.push(j);
            m[j] += 1;
            let ok = if deeper(alpha.col_depth(m), lambda) {
                *seen += 1;
                if *seen > cap {
                    false
                } else {
                    f(word, counts, ext);
                    true
                }
            } else {
                exts(alpha, lambda, word, counts, ext, m, seen, cap, f)
            };
            m[j] -= 1;
            ext.pop();
            if !ok {
                return false;
            }
        }
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn bases<F: FnMut(&[usize], &[u16], &[usize])>(
        alpha: &Alphabet,
        n: usize,
        depth_r: f64,
        word: &mut Vec<usize>,
        counts: &mut Vec<u16>,
        ext: &mut Vec<usize>,
        m: &mut Vec<u16>,
        seen: &mut usize,
        cap: usize,
        f: &mut F,
    ) -> bool {
        for i in 0..n {
            word.push(i);
            counts[alpha.class_of[i]] += 1;
            let b = alpha.depth_b(counts);
            let ok = if deeper(b, depth_r) {
                let lambda = b - alpha.depth_a(counts);
                exts(alpha, lambda, word, counts, ext, m, seen, cap, f)
            } else {
                bases(alpha, n, depth_r, word, counts, ext, m, seen, cap, f)
            };
            counts[alpha.class_of[i]] -= 1;
            word.pop();
            if !ok {
                return false;
            }
        }
        true
    }

    if bases(alpha, n, depth_r, &mut word, &mut counts, &mut ext, &mut m, &mut seen, cap, &mut f) {
        Ok(seen)
    } else {
        Err(cap)
    }
}

fn check_scale(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("scale r = {r} is outside (0, 1)")))
    }
}

/// All approximate squares of `S(r)`, in depth-first order.
pub fn enumerate_s(carpet: &GLCarpet, r: f64, cap: usize) -> Result<Vec<ApproxSquare>> {
    check_scale(r)?;
    let alpha = Alphabet::new(carpet);
    let mut out = Vec::new();
    visit_squares(carpet, &alpha, r, cap, |base, _, ext| {
        out.push(ApproxSquare {
            base: SymbolicWord::new(carpet, base.to_vec()).expect("letters in range"),
            column_ext: ext.to_vec(),
        })
    })
    .map_err(|cap| Error::CapExceeded { cap })?;
    Ok(out)
}

/// `|S(r)|` without materialising the squares.
pub fn count_s(carpet: &GLCarpet, r: f64, cap: usize) -> Result<usize> {
    check_scale(r)?;
    let alpha = Alphabet::new(carpet);
    visit_squares(carpet, &alpha, r, cap, |_, _, _| {}).map_err(|cap| Error::CapExceeded { cap })
}

/// Counts squares of `S(ρ)` inside squares with one fixed base class vector.
struct Counter<'a> {
    alpha: &'a Alphabet,
    depth_rho: f64,
    free_memo: HashMap<Vec<u16>, f64>,
    leaves: &'a Mutex<HashMap<Vec<u16>, f64>>,
    nodes: usize,
    cap: usize,
}

impl<'a> Counter<'a> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            Err(Error::CapExceeded { cap: self.cap })
        } else {
            Ok(())
        }
    }

    fn leaf(&self, counts: &[u16], lambda: f64) -> f64 {
        if let Some(&v) = self.leaves.lock().unwrap().get(counts) {
            return v;
        }
        let v = column_section_count(self.alpha, lambda, &vec![0; self.alpha.col_la.len()]);
        self.leaves.lock().unwrap().insert(counts.to_vec(), v);
        v
    }

    /// Squares below a node whose column constraint is already met.
    fn free(&mut self, counts: &mut Vec<u16>) -> Result<f64> {
        if let Some(&v) = self.free_memo.get(counts.as_slice()) {
            return Ok(v);
        }
        self.tick()?;
        let b = self.alpha.depth_b(counts);
        let v = if deeper(b, self.depth_rho) {
            self.leaf(counts, b - self.alpha.depth_a(counts))
        } else {
            let mut total = 0.0;
            for c in 0..counts.len() {
                counts[c] += 1;
                total += self.alpha.mult[c] * self.free(counts)?;
                counts[c] -= 1;
            }
            total
        };
        self.free_memo.insert(counts.clone(), v);
        Ok(v)
    }

    /// Squares below a node `i k` whose next letters must lie in columns `u[l..]`.
    fn constrained(&mut self, counts: &mut Vec<u16>, u: &[usize], l: usize) -> Result<f64> {
        self.tick()?;
        let alpha = self.alpha;
        let b = alpha.depth_b(counts);
        if deeper(b, self.depth_rho) {
            let lambda = b - alpha.depth_a(counts);
            let mut m = vec![0u16; alpha.col_la.len()];
            for &j in &u[l..] {
                m[j] += 1;
            }
            let lw = alpha.col_depth(&m);
            if deeper(lw, lambda) {
                // the section element on this path is a prefix of u[l..]
                m[u[u.len() - 1]] -= 1;
                return Ok(if deeper(alpha.col_depth(&m), lambda) { 0.0 } else { 1.0 });
            }
            return Ok(column_section_count(alpha, lambda, &m));
        }
        if l == u.len() {
            return self.free(counts);
        }
        let mut total = 0.0;
        for &c in &alpha.in_column[u[l]] {
            counts[c] += 1;
            total += alpha.mult[c] * self.constrained(counts, u, l + 1)?;
            counts[c] -= 1;
        }
        Ok(total)
    }
}

/// Number of squares of `S(ρ)` symbolically contained in `q`.
///
/// Requires `ρ ≤ b_{i⁻}` for the base `i` of `q`; when `b_i < ρ` the answer
/// is 1. `cap` bounds the number of search nodes.
pub fn count_inside(carpet: &GLCarpet, q: &ApproxSquare, rho: f64, cap: usize) -> Result<f64> {
    check_scale(rho)?;
    let alpha = Alphabet::new(carpet);
    let letters = &q.base.letters;
    if letters.is_empty() {
        return Err(Error::DomainError("approximate square with empty base".into()));
    }
    let counts = alpha.counts_of(letters);
    let parent = alpha.counts_of(&letters[..letters.len() - 1]);
    let depth_rho = -rho.ln();
    if deeper(alpha.depth_b(&parent), depth_rho) {
        return Err(Error::DomainError(format!(
            "rho = {rho} exceeds the height of the parent of the base word"
        )));
    }
    let leaves = Mutex::new(HashMap::new());
    let mut counter = Counter {
        alpha: &alpha,
        depth_rho,
        free_memo: HashMap::new(),
        leaves: &leaves,
        nodes: 0,
        cap,
    };
    counter.constrained(&mut counts.clone(), &q.column_ext, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveringOptions {
    /// Limit on `|S(r)|` and on search nodes per square.
    pub cap: usize,
    /// Above this many squares only a stratified sample is evaluated.
    pub sample: usize,
    pub parallelism: Parallelism,
}

impl Default for CoveringOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            sample: DEFAULT_SAMPLE,
            parallelism: Parallelism::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringEstimate {
    pub theta: f64,
    pub r: f64,
    pub estimate: f64,
    /// `|S(r)|`, or the cap when enumeration stopped early.
    pub squares: usize,
    /// Distinct squares (up to letter order inside the base) evaluated.
    pub evaluated: usize,
    pub capped: bool,
}

/// Largest covering exponent over `S(r)` at scale pair `(b_i, b_i^{1/θ})`.
pub fn estimate_spectrum(
    carpet: &GLCarpet,
    theta: f64,
    r: f64,
    opts: &CoveringOptions,
) -> Result<CoveringEstimate> {
    check_scale(r)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::DomainError(format!("theta = {theta} is outside (0, 1)")));
    }
    let alpha = Alphabet::new(carpet);
    let ecc = |c: &[u16]| alpha.depth_b(c) / alpha.depth_a(c);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let (total, mut capped) = match visit_squares(carpet, &alpha, r, opts.cap, |_, c, _| {
        let e = ecc(c);
        lo = lo.min(e);
        hi = hi.max(e);
    }) {
        Ok(n) => (n, false),
        Err(cap) => (cap, true),
    };

    // base class vector -> column extensions to evaluate
    let mut keys: BTreeMap<Vec<u16>, BTreeSet<Vec<usize>>> = BTreeMap::new();
    let sample = opts.sample.max(1);
    let mut next_pick = 0usize;
    let mut picked = 0usize;
    let mut index = 0usize;
    let _ = visit_squares(carpet, &alpha, r, total, |_, c, ext| {
        let take_all = total <= sample;
        let mut take = take_all;
        if !take_all && index == next_pick && picked < sample {
            take = true;
            picked += 1;
            next_pick = ((picked as u128 * total as u128) / sample as u128) as usize;
        }
        if !take {
            let e = ecc(c);
            take = (e - lo).abs() <= 1e-12 || (e - hi).abs() <= 1e-12;
        }
        if take {
            keys.entry(c.to_vec()).or_default().insert(ext.to_vec());
        }
        index += 1;
    });

    let groups: Vec<(Vec<u16>, Vec<Vec<usize>>)> =
        keys.into_iter().map(|(c, e)| (c, e.into_iter().collect())).collect();
    let evaluated = groups.iter().map(|g| g.1.len()).sum();
    let leaves = Mutex::new(HashMap::new());
    let results = map_collect(opts.parallelism, &groups, |(base, exts)| {
        let b = alpha.depth_b(base);
        let mut counter = Counter {
            alpha: &alpha,
            // count squares of height exactly ρ too: S(ρ(1 + δ)) for tiny δ
            depth_rho: b / theta - 2.0 * TIE_EPS,
            free_memo: HashMap::new(),
            leaves: &leaves,
            nodes: 0,
            cap: opts.cap,
        };
        let mut best = f64::NEG_INFINITY;
        let mut hit_cap = false;
        for u in exts {
            counter.nodes = 0;
            match counter.constrained(&mut base.clone(), u, 0) {
                Ok(n) => best = best.max(n.ln() / ((1.0 / theta - 1.0) * b)),
                Err(_) => hit_cap = true,
            }
        }
        (best, hit_cap)
    });
    let mut estimate = f64::NEG_INFINITY;
    for (v, c) in results {
        estimate = estimate.max(v);
        capped |= c;
    }
    Ok(CoveringEstimate {
        theta,
        r,
        estimate,
        squares: total,
        evaluated,
        capped,
    })
}
