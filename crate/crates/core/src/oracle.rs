//! Brute-force searches over deterministic skeletons and gridded
//! hidden-variable distributions.
//!
//! For one-sided dependence the aggregate decomposes: a hidden value `λ⃗`
//! contributes to exactly one component `I_j`, chosen by which of the
//! independent parties answer with a constant (`s_i = 0`) or a balanced
//! (`s_i = 1`) response. With `e_i` the mass of constant responses of
//! party `i`, the optimal central rule gives
//! `S = U_0^{1/n} P_0 + U_1^{1/n} P_1`, where `U_s` depends only on the
//! dependent party and `P_s = Σ_{s_rest: parity s} Π_i E_i(s_i)^{1/n}`.
//! The search maximizes this exactly over the grid and then rebuilds the
//! optimal model and re-evaluates it through the behavior layer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::inequalities::{even_subsets, md_bound, nth_root, s_n};
use crate::lhv::{lhv_behavior, md_degree, MDLhvModel};
use crate::quantum::CentralSignConvention;
use crate::scenario::{no_signaling_check, Scenario};

pub const MAX_GRID: usize = 400;
pub const MAX_EXHAUSTIVE_SOURCES: usize = 3;
pub const MAX_LAMBDA_SIZE: usize = 2;
pub const MAX_SKELETONS: u128 = 1 << 28;
/// Grid for product distributions in [`max_s_lhv`].
pub const EXHAUSTIVE_GRID: usize = 20;
pub const CERTIFICATE_TOL: f64 = 1e-9;
pub const NS_AUDIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub m_budget: f64,
    pub grid_resolution: usize,
    pub lambda_size: usize,
    /// 0-based index of the source whose `λ` may depend on its party's input.
    pub dependent_source: usize,
    /// Drop the no-signaling requirement on the returned model.
    pub allow_signaling: bool,
    /// Golden-section refinement around the best grid cell.
    pub refine: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            m_budget: 0.0,
            grid_resolution: 100,
            lambda_size: 2,
            dependent_source: 0,
            allow_signaling: false,
            refine: true,
        }
    }
}

impl SearchConfig {
    pub fn with_budget(m_budget: f64) -> Self {
        Self {
            m_budget,
            ..Self::default()
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        Scenario::star(n)?;
        if !(0.0..=2.0).contains(&self.m_budget) {
            return Err(NetError::OutOfRange(format!(
                "M budget {} outside [0, 2]",
                self.m_budget
            )));
        }
        if self.grid_resolution < 2 {
            return Err(NetError::OutOfRange("grid resolution must be ≥ 2".into()));
        }
        if self.grid_resolution > MAX_GRID {
            return Err(NetError::ResourceGuard(format!(
                "grid resolution {} exceeds {MAX_GRID}",
                self.grid_resolution
            )));
        }
        if n > MAX_EXHAUSTIVE_SOURCES {
            return Err(NetError::ResourceGuard(format!(
                "exhaustive search supports n ≤ {MAX_EXHAUSTIVE_SOURCES}"
            )));
        }
        if self.lambda_size == 0 {
            return Err(NetError::OutOfRange("empty hidden-variable alphabet".into()));
        }
        if self.lambda_size > MAX_LAMBDA_SIZE {
            return Err(NetError::ResourceGuard(format!(
                "alphabet size {} exceeds {MAX_LAMBDA_SIZE}",
                self.lambda_size
            )));
        }
        if self.dependent_source >= n {
            return Err(NetError::OutOfRange(format!(
                "dependent source {} for n = {n}",
                self.dependent_source
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub n: usize,
    pub config: SearchConfig,
    pub best_s: f64,
    pub best_model: MDLhvModel,
    pub achieved_m: f64,
    pub evaluations: u64,
    /// Components `I_j` of the re-evaluated best model.
    pub certificate: Vec<f64>,
    pub md_bound: f64,
    pub gap: f64,
    pub no_signaling: bool,
    pub max_ns_discrepancy: f64,
}

/// One deterministic model skeleton: response tables and central rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    /// `responses[i][λ_i][x_i]`.
    pub responses: Vec<Vec<[i8; 2]>>,
    /// Central outcome per joint `λ⃗` (mixed radix, `λ_1` least significant).
    pub central: Vec<usize>,
}

fn check_lambda_sizes(n: usize, sizes: &[usize]) -> Result<()> {
    if sizes.len() != n {
        return Err(NetError::ArityMismatch {
            expected: n,
            got: sizes.len(),
        });
    }
    if sizes.contains(&0) {
        return Err(NetError::OutOfRange("empty hidden-variable alphabet".into()));
    }
    Ok(())
}

/// `Π_i 4^{L_i} · (2^n)^{Π_i L_i}`.
pub fn skeleton_count(scenario: &Scenario, lambda_sizes: &[usize]) -> Result<u128> {
    let n = scenario.n();
    check_lambda_sizes(n, lambda_sizes)?;
    let tables: u128 = lambda_sizes.iter().map(|l| 4u128.pow(*l as u32)).product();
    let joint: u32 = lambda_sizes.iter().product::<usize>() as u32;
    let rules = (scenario.central_outcomes() as u128)
        .checked_pow(joint)
        .ok_or_else(|| NetError::ResourceGuard("skeleton count overflows".into()))?;
    tables
        .checked_mul(rules)
        .ok_or_else(|| NetError::ResourceGuard("skeleton count overflows".into()))
}

/// Stream of every skeleton in a fixed order.
#[derive(Debug, Clone)]
pub struct SkeletonStream {
    n: usize,
    sizes: Vec<usize>,
    outcomes: usize,
    joint: usize,
    next: u64,
    count: u64,
}

impl SkeletonStream {
    pub fn len_total(&self) -> u64 {
        self.count
    }

    /// Skeleton number `k` of the stream.
    pub fn decode(&self, mut k: u64) -> Skeleton {
        let mut central = Vec::with_capacity(self.joint);
        for _ in 0..self.joint {
            central.push((k % self.outcomes as u64) as usize);
            k /= self.outcomes as u64;
        }
        let mut responses = Vec::with_capacity(self.n);
        for &l in &self.sizes {
            let mut table = Vec::with_capacity(l);
            for _ in 0..l {
                let bits = k % 4;
                k /= 4;
                let v = |bit: u64| if bits >> bit & 1 == 1 { -1 } else { 1 };
                table.push([v(0), v(1)]);
            }
            responses.push(table);
        }
        Skeleton { responses, central }
    }
}

impl Iterator for SkeletonStream {
    type Item = Skeleton;

    fn next(&mut self) -> Option<Skeleton> {
        if self.next >= self.count {
            return None;
        }
        let s = self.decode(self.next);
        self.next += 1;
        Some(s)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SkeletonStream {}

pub fn enumerate_deterministic(scenario: &Scenario, lambda_sizes: &[usize]) -> Result<SkeletonStream> {
    let n = scenario.n();
    if n > MAX_EXHAUSTIVE_SOURCES || lambda_sizes.iter().any(|l| *l > MAX_LAMBDA_SIZE) {
        return Err(NetError::ResourceGuard(format!(
            "exhaustive mode needs n ≤ {MAX_EXHAUSTIVE_SOURCES} and alphabets ≤ {MAX_LAMBDA_SIZE}"
        )));
    }
    let count = skeleton_count(scenario, lambda_sizes)?;
    if count > MAX_SKELETONS {
        return Err(NetError::ResourceGuard(format!(
            "{count} skeletons exceed the limit of {MAX_SKELETONS}"
        )));
    }
    Ok(SkeletonStream {
        n,
        sizes: lambda_sizes.to_vec(),
        outcomes: scenario.central_outcomes(),
        joint: lambda_sizes.iter().product(),
        next: 0,
        count: count as u64,
    })
}

fn grid_values(size: usize, grid: usize) -> Vec<f64> {
    if size == 1 {
        vec![1.0]
    } else {
        (0..=grid).map(|k| k as f64 / grid as f64).collect()
    }
}

/// Best aggregate of one skeleton over product distributions on the grid.
fn skeleton_best_s(sk: &Skeleton, sizes: &[usize], conv: &CentralSignConvention, grid: usize) -> f64 {
    let n = sizes.len();
    let subsets = even_subsets(n);
    let joint: usize = sizes.iter().product();
    let scale = 1.0 / (1u64 << n) as f64;
    // contrib[j][λ⃗] = B^j(c(λ⃗)) 2^{-n} Π_i (T_i(0,λ_i) ± T_i(1,λ_i))
    let contrib: Vec<Vec<f64>> = subsets
        .iter()
        .enumerate()
        .map(|(jj, s)| {
            (0..joint)
                .map(|k| {
                    let mut v = conv.sign(jj + 1, sk.central[k]) * scale;
                    let mut rest = k;
                    for (i, &size) in sizes.iter().enumerate() {
                        let lam = rest % size;
                        rest /= size;
                        let t = sk.responses[i][lam];
                        let sign = if s >> i & 1 == 1 { -1.0 } else { 1.0 };
                        v *= t[0] as f64 + sign * t[1] as f64;
                    }
                    v
                })
                .collect()
        })
        .collect();
    let axes: Vec<Vec<f64>> = sizes.iter().map(|l| grid_values(*l, grid)).collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; n];
    loop {
        let weights: Vec<f64> = (0..joint)
            .map(|k| {
                let mut w = 1.0;
                let mut rest = k;
                for i in 0..n {
                    let lam = rest % sizes[i];
                    rest /= sizes[i];
                    let q = axes[i][idx[i]];
                    w *= if lam == 0 { q } else { 1.0 - q };
                }
                w
            })
            .collect();
        let s: f64 = contrib
            .iter()
            .map(|c| nth_root(c.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>().abs(), n))
            .sum();
        best = best.max(s);
        let mut i = 0;
        while i < n {
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhvMax {
    pub best_s: f64,
    /// "exhaustive" when every skeleton was enumerated, "reduced" otherwise.
    pub method: String,
    pub skeletons: u64,
}

/// Largest aggregate over measurement-independent models with the given
/// alphabets. Enumerates every skeleton when the count is within
/// [`MAX_SKELETONS`]; otherwise runs the decomposed search at `M = 0`.
pub fn max_s_lhv(scenario: &Scenario, lambda_sizes: &[usize]) -> Result<LhvMax> {
    let n = scenario.n();
    check_lambda_sizes(n, lambda_sizes)?;
    let conv = CentralSignConvention::standard(n)?;
    match enumerate_deterministic(scenario, lambda_sizes) {
        Ok(stream) => {
            let total = stream.len_total();
            let best = (0..total)
                .into_par_iter()
                .map(|k| skeleton_best_s(&stream.decode(k), lambda_sizes, &conv, EXHAUSTIVE_GRID))
                .reduce(|| f64::NEG_INFINITY, f64::max);
            Ok(LhvMax {
                best_s: best,
                method: "exhaustive".into(),
                skeletons: total,
            })
        }
        Err(NetError::ResourceGuard(why)) => {
            if n > MAX_EXHAUSTIVE_SOURCES || lambda_sizes.iter().any(|l| *l > MAX_LAMBDA_SIZE) {
                return Err(NetError::ResourceGuard(why));
            }
            log::info!("{why}; using the decomposed search");
            let core = search_core(n, lambda_sizes, 0.0, EXHAUSTIVE_GRID, 0, true, false)?;
            Ok(LhvMax {
                best_s: core.s,
                method: "reduced".into(),
                skeletons: core.evaluations,
            })
        }
        Err(e) => Err(e),
    }
}

/// Continuous parameters of a decomposed one-sided model.
#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    table: usize,
    r: [f64; 2],
    e: Vec<f64>,
    blind: bool,
    s: f64,
    evaluations: u64,
}

/// Response table number `t` of the dependent party: `T[λ][x]`.
fn dependent_table(t: usize, size: usize) -> Vec<[f64; 2]> {
    (0..size)
        .map(|lam| {
            let bits = t >> (2 * lam);
            let v = |b: usize| if bits >> b & 1 == 1 { -1.0 } else { 1.0 };
            [v(0), v(1)]
        })
        .collect()
}

fn dependent_rho(size: usize, r: [f64; 2], x: usize) -> Vec<f64> {
    if size == 1 {
        vec![1.0]
    } else {
        vec![r[x], 1.0 - r[x]]
    }
}

/// `(U_0, U_1)` for the dependent party.
fn u_values(table: &[[f64; 2]], r: [f64; 2], blind: bool) -> [f64; 2] {
    let size = table.len();
    let rho = [dependent_rho(size, r, 0), dependent_rho(size, r, 1)];
    std::array::from_fn(|s| {
        let sign = if s == 1 { -1.0 } else { 1.0 };
        let f = |lam: usize| rho[0][lam] * table[lam][0] + sign * rho[1][lam] * table[lam][1];
        if blind {
            0.5 * (0..size).map(f).sum::<f64>().abs()
        } else {
            0.5 * (0..size).map(|l| f(l).abs()).sum::<f64>()
        }
    })
}

/// `(P_0, P_1)` from the constant-response masses of the other parties.
fn p_values(e: &[f64], n: usize) -> [f64; 2] {
    let mut p = [0.0; 2];
    for s_rest in 0..1usize << e.len() {
        let prod: f64 = e
            .iter()
            .enumerate()
            .map(|(i, ei)| if s_rest >> i & 1 == 1 { 1.0 - ei } else { *ei })
            .product();
        p[(s_rest.count_ones() % 2) as usize] += nth_root(prod.max(0.0), n);
    }
    p
}

fn objective(n: usize, table: &[[f64; 2]], r: [f64; 2], e: &[f64], blind: bool) -> f64 {
    let u = u_values(table, r, blind);
    let p = p_values(e, n);
    nth_root(u[0], n) * p[0] + nth_root(u[1], n) * p[1]
}

/// Upper-right convex hull vertices of nonnegative points, as indices.
fn hull_indices(points: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
            .then(a.cmp(&b))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2
            && cross(points[upper[upper.len() - 2]], points[upper[upper.len() - 1]], points[i]) <= 0.0
        {
            upper.pop();
        }
        upper.push(i);
    }
    // Any maximizer of a nonnegative linear functional lies on the upper
    // hull; add the extreme points per axis for the degenerate directions.
    let top_y = idx.iter().copied().max_by(|&a, &b| {
        points[a][1].total_cmp(&points[b][1]).then(b.cmp(&a))
    });
    upper.extend(top_y);
    upper.sort_unstable();
    upper.dedup();
    upper
}

#[allow(clippy::too_many_arguments)]
fn search_core(
    n: usize,
    sizes: &[usize],
    m_budget: f64,
    grid: usize,
    dependent: usize,
    ns_required: bool,
    refine: bool,
) -> Result<Candidate> {
    let half = m_budget / 2.0 + 1e-12;
    let ld = sizes[dependent];
    let others: Vec<usize> = (0..n).filter(|i| *i != dependent).map(|i| sizes[i]).collect();
    let r_axis = grid_values(ld, grid);
    let tables = 1usize << (2 * ld);

    // dependent-party points
    let dep_points: Vec<(usize, [f64; 2], bool, [f64; 2])> = (0..tables)
        .into_par_iter()
        .flat_map_iter(|t| {
            let table = dependent_table(t, ld);
            let mut out = Vec::new();
            for &r0 in &r_axis {
                for &r1 in &r_axis {
                    if ld == 2 && (r0 - r1).abs() > half {
                        continue;
                    }
                    let blind = ns_required && r0 != r1;
                    let u = u_values(&table, [r0, r1], blind);
                    out.push((t, [r0, r1], blind, [nth_root(u[0], n), nth_root(u[1], n)]));
                }
            }
            out
        })
        .collect();

    // other-party points
    let e_axes: Vec<Vec<f64>> = others
        .iter()
        .map(|l| if *l == 1 { vec![0.0, 1.0] } else { grid_values(2, grid) })
        .collect();
    let mut other_points: Vec<(Vec<f64>, [f64; 2])> = Vec::new();
    let mut idx = vec![0usize; others.len()];
    loop {
        let e: Vec<f64> = idx.iter().zip(&e_axes).map(|(k, ax)| ax[*k]).collect();
        let p = p_values(&e, n);
        other_points.push((e, p));
        let mut i = 0;
        while i < idx.len() {
            idx[i] += 1;
            if idx[i] < e_axes[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == idx.len() {
            break;
        }
    }

    let a_pts: Vec<[f64; 2]> = dep_points.iter().map(|d| d.3).collect();
    let b_pts: Vec<[f64; 2]> = other_points.iter().map(|o| o.1).collect();
    let ha = hull_indices(&a_pts);
    let hb = hull_indices(&b_pts);
    let mut best: Option<(f64, usize, usize)> = None;
    for &i in &ha {
        for &k in &hb {
            let s = a_pts[i][0] * b_pts[k][0] + a_pts[i][1] * b_pts[k][1];
            let better = match best {
                None => true,
                Some((bs, bi, bk)) => s > bs + 1e-15 || ((s - bs).abs() <= 1e-15 && (i, k) < (bi, bk)),
            };
            if better {
                best = Some((s, i, k));
            }
        }
    }
    let (best_s, _, k) = best.ok_or_else(|| NetError::InvalidModel("empty search space".into()))?;
    // Among equally good dependent-party points prefer the one using the
    // most dependence, then the earliest.
    let pk = b_pts[k];
    let i = (0..a_pts.len())
        .filter(|&i| a_pts[i][0] * pk[0] + a_pts[i][1] * pk[1] >= best_s - 1e-12)
        .max_by(|&x, &y| {
            let gap = |i: usize| (dep_points[i].1[0] - dep_points[i].1[1]).abs();
            gap(x).total_cmp(&gap(y)).then(y.cmp(&x))
        })
        .expect("the hull maximizer itself qualifies");
    let (table, r, blind, _) = dep_points[i];
    let mut cand = Candidate {
        table,
        r,
        e: other_points[k].0.clone(),
        blind,
        s: 0.0,
        evaluations: (a_pts.len() + b_pts.len() + ha.len() * hb.len()) as u64,
    };
    let tab = dependent_table(table, ld);
    cand.s = objective(n, &tab, cand.r, &cand.e, cand.blind);

    if refine {
        let step = 1.0 / grid as f64;
        let mut evals = 0u64;
        for _ in 0..4 {
            if ld == 2 {
                for c in 0..2 {
                    let other = cand.r[1 - c];
                    let lo = (cand.r[c] - step).max(0.0).max(other - m_budget / 2.0);
                    let hi = (cand.r[c] + step).min(1.0).min(other + m_budget / 2.0);
                    let f = |v: f64| {
                        let mut r = cand.r;
                        r[c] = v;
                        let blind = ns_required && r[0] != r[1];
                        (objective(n, &tab, r, &cand.e, blind), blind)
                    };
                    let (v, e) = golden_max(|v| f(v).0, lo, hi);
                    evals += e;
                    let (s, blind) = f(v);
                    if s > cand.s + 1e-15 {
                        cand.r[c] = v;
                        cand.s = s;
                        cand.blind = blind;
                    }
                }
            }
            for c in 0..cand.e.len() {
                if others[c] == 1 {
                    continue;
                }
                let lo = (cand.e[c] - step).max(0.0);
                let hi = (cand.e[c] + step).min(1.0);
                let f = |v: f64| {
                    let mut e = cand.e.clone();
                    e[c] = v;
                    objective(n, &tab, cand.r, &e, cand.blind)
                };
                let (v, ev) = golden_max(f, lo, hi);
                evals += ev;
                let s = f(v);
                if s > cand.s + 1e-15 {
                    cand.e[c] = v;
                    cand.s = s;
                }
            }
        }
        cand.evaluations += evals;
        if ld == 2 {
            stretch_to_budget(n, &tab, m_budget, ns_required, &mut cand);
        }
    }
    Ok(cand)
}

/// Widen `|r0 - r1|` to exactly `m_budget / 2` when some placement keeps `S`.
fn stretch_to_budget(n: usize, tab: &[[f64; 2]], m_budget: f64, ns_required: bool, cand: &mut Candidate) {
    let want = (m_budget / 2.0).min(1.0);
    let [r0, r1] = cand.r;
    if (r0 - r1).abs() >= want - 1e-15 {
        return;
    }
    let (lo, hi) = if r0 <= r1 { (0usize, 1usize) } else { (1, 0) };
    let mid = 0.5 * (r0 + r1);
    let centred = (mid - want / 2.0).clamp(0.0, 1.0 - want);
    let mut options = Vec::new();
    for start in [cand.r[lo], cand.r[hi] - want, centred] {
        if (0.0..=1.0 - want).contains(&start) {
            let mut r = [0.0; 2];
            r[lo] = start;
            r[hi] = start + want;
            options.push(r);
        }
    }
    for r in options {
        let blind = ns_required && r[0] != r[1];
        let s = objective(n, tab, r, &cand.e, blind);
        cand.evaluations += 1;
        if s >= cand.s - 1e-12 && 2.0 * (r[0] - r[1]).abs() <= m_budget + 1e-12 {
            cand.r = r;
            cand.s = s;
            cand.blind = blind;
            return;
        }
    }
}

/// Golden-section search for a maximum on `[lo, hi]`; returns the argmax
/// and the number of evaluations.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, u64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if hi <= lo {
        return (lo, 0);
    }
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut evals = 2;
    for _ in 0..60 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
        evals += 1;
    }
    let mid = 0.5 * (lo + hi);
    (mid, evals)
}

/// Rebuild the decomposed candidate as a full model.
fn build_model(n: usize, sizes: &[usize], dependent: usize, cand: &Candidate) -> Result<MDLhvModel> {
    let conv = CentralSignConvention::standard(n)?;
    let subsets = even_subsets(n);
    let ld = sizes[dependent];
    let table = dependent_table(cand.table, ld);
    let mut e_iter = cand.e.iter();
    // per party: response table and λ distribution per own input
    let mut responses = Vec::with_capacity(n);
    let mut rhos: Vec<[Vec<f64>; 2]> = Vec::with_capacity(n);
    for (i, &l) in sizes.iter().enumerate() {
        if i == dependent {
            responses.push(table.iter().map(|t| [t[0] as i8, t[1] as i8]).collect::<Vec<_>>());
            rhos.push([dependent_rho(ld, cand.r, 0), dependent_rho(ld, cand.r, 1)]);
        } else {
            let e = *e_iter.next().expect("one mass per independent party");
            if l == 1 {
                let t = if e >= 0.5 { [1, 1] } else { [1, -1] };
                responses.push(vec![t]);
                rhos.push([vec![1.0], vec![1.0]]);
            } else {
                responses.push(vec![[1, 1], [1, -1]]);
                let rho = vec![e, 1.0 - e];
                rhos.push([rho.clone(), rho]);
            }
        }
    }
    let joint: usize = sizes.iter().product();
    let lam = |k: usize, i: usize| (k / sizes[..i].iter().product::<usize>()) % sizes[i];
    let mut central_rule = Vec::with_capacity(joint);
    for k in 0..joint {
        // component fed by λ⃗
        let mut s = 0usize;
        for i in (0..n).filter(|i| *i != dependent) {
            let t = responses[i][lam(k, i)];
            if t[0] != t[1] {
                s |= 1 << i;
            }
        }
        if s.count_ones() % 2 == 1 {
            s |= 1 << dependent;
        }
        let j = subsets.iter().position(|v| *v == s).expect("even subset") + 1;
        let sign = if s >> dependent & 1 == 1 { -1.0 } else { 1.0 };
        let f = |l: usize| {
            rhos[dependent][0][l] * table[l][0] + sign * rhos[dependent][1][l] * table[l][1]
        };
        let w = if cand.blind { (0..ld).map(f).sum::<f64>() } else { f(lam(k, dependent)) };
        let want = if w >= 0.0 { 1.0 } else { -1.0 };
        let b = (0..1usize << n)
            .find(|b| conv.sign(j, *b) == want)
            .expect("both signs occur");
        let mut row = vec![0.0; 1 << n];
        row[b] = 1.0;
        central_rule.push(row);
    }
    let distributions = (0..1usize << n)
        .map(|x| {
            (0..joint)
                .map(|k| (0..n).map(|i| rhos[i][x >> i & 1][lam(k, i)]).product())
                .collect()
        })
        .collect();
    let mut dependence_pattern = vec![Vec::new(); n];
    if ld > 1 {
        dependence_pattern[dependent].push(dependent);
    }
    let model = MDLhvModel {
        n,
        lambda_sizes: sizes.to_vec(),
        responses,
        central_rule,
        distributions,
        dependence_pattern,
    };
    model.validate()?;
    Ok(model)
}

/// Maximize `S` over one-sided models with `M ≤ M_budget` and return the
/// re-evaluated optimum.
pub fn max_s_given_md(scenario: &Scenario, cfg: &SearchConfig) -> Result<SearchResult> {
    let n = scenario.n();
    cfg.validate(n)?;
    let sizes = vec![cfg.lambda_size; n];
    log::info!(
        "search n = {n}, M ≤ {}, grid {}, no-signaling {}",
        cfg.m_budget,
        cfg.grid_resolution,
        !cfg.allow_signaling
    );
    let cand = search_core(
        n,
        &sizes,
        cfg.m_budget,
        cfg.grid_resolution,
        cfg.dependent_source,
        !cfg.allow_signaling,
        cfg.refine,
    )?;
    let model = build_model(n, &sizes, cfg.dependent_source, &cand)?;
    let t = lhv_behavior(&model)?;
    let report = s_n(&t)?;
    if (report.aggregate_s - cand.s).abs() > CERTIFICATE_TOL {
        return Err(NetError::CertificateMismatch(format!(
            "search value {} but re-evaluation gives {}",
            cand.s, report.aggregate_s
        )));
    }
    let achieved_m = md_degree(&model, cfg.dependent_source)?;
    if achieved_m > cfg.m_budget + 1e-12 {
        return Err(NetError::CertificateMismatch(format!(
            "model uses M = {achieved_m} above the budget {}",
            cfg.m_budget
        )));
    }
    let ns = no_signaling_check(&t, NS_AUDIT_TOL);
    if !cfg.allow_signaling && !ns.passed {
        return Err(NetError::CertificateMismatch(format!(
            "model signals (discrepancy {:.3e})",
            ns.max_marginal_discrepancy
        )));
    }
    let bound = md_bound(n, cfg.m_budget)?;
    Ok(SearchResult {
        n,
        config: cfg.clone(),
        best_s: report.aggregate_s,
        best_model: model,
        achieved_m,
        evaluations: cand.evaluations,
        certificate: report.components,
        md_bound: bound,
        gap: bound - report.aggregate_s,
        no_signaling: ns.passed,
        max_ns_discrepancy: ns.max_marginal_discrepancy,
    })
}

/// Grid resolution used by [`saturating_model`].
pub const SATURATION_GRID: usize = 200;

/// Best no-signaling one-sided model at dependence `m1`.
pub fn saturating_model(n: usize, m1: f64) -> Result<MDLhvModel> {
    let cfg = SearchConfig {
        m_budget: m1,
        grid_resolution: SATURATION_GRID,
        ..SearchConfig::default()
    };
    Ok(max_s_given_md(&Scenario::star(n)?, &cfg)?.best_model)
}
