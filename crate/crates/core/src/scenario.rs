//! Star-network scenarios and the behavior tensor shared by every layer.
//!
//! A scenario has `n` independent sources, each feeding one branch party
//! (binary input `x_i`, output `a_i = ±1`) and the single central party,
//! which has no input and returns an `n`-bit string `b`.
//!
//! Index conventions used throughout the crate:
//! - input tuple `x⃗` is a bitmask, bit `i` holds `x_{i+1}`;
//! - branch outputs `a⃗` are a bitmask, bit `i` is set iff `a_{i+1} = -1`;
//! - central outcome `b = b_1…b_n` is a bitmask, bit `k-1` holds `b_k`.

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

/// Largest source count accepted by [`Scenario::star`].
pub const DEFAULT_MAX_SOURCES: usize = 6;

/// Normalization tolerance used by the engines' own outputs.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Negative entries at or above `-CLAMP_TOL` are Born-rule roundoff.
pub const CLAMP_TOL: f64 = 1e-15;

/// Default tolerance for physics assertions.
pub const PHYSICS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    n_sources: usize,
}

impl Scenario {
    /// Star network with `n` sources, `n` branch parties and one central party.
    pub fn star(n: usize) -> Result<Self> {
        Self::star_with_max(n, DEFAULT_MAX_SOURCES)
    }

    pub fn star_with_max(n: usize, max: usize) -> Result<Self> {
        if n < 2 {
            return Err(NetError::InvalidScenario(format!(
                "a star network needs at least 2 sources, got {n}"
            )));
        }
        if n > max {
            return Err(NetError::InvalidScenario(format!(
                "{n} sources exceeds the configured maximum of {max}"
            )));
        }
        Ok(Self { n_sources: n })
    }

    pub fn bilocal() -> Self {
        Self { n_sources: 2 }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n_sources
    }

    /// Number of input tuples `x⃗` (also the number of branch output tuples).
    #[inline]
    pub fn contexts(&self) -> usize {
        1 << self.n_sources
    }

    /// Number of central outcomes, `2^n`.
    #[inline]
    pub fn central_outcomes(&self) -> usize {
        1 << self.n_sources
    }

    #[inline]
    pub fn branch_inputs(&self) -> usize {
        2
    }

    #[inline]
    pub fn branch_outputs(&self) -> usize {
        2
    }

    /// Entries in a dense behavior tensor.
    #[inline]
    pub fn tensor_len(&self) -> usize {
        1 << (3 * self.n_sources)
    }

    #[inline]
    pub fn index(&self, x: usize, a: usize, b: usize) -> usize {
        let n = self.n_sources;
        (x << (2 * n)) | (a << n) | b
    }
}

/// `±1` value of branch output `i` encoded in the output bitmask.
#[inline]
pub fn output_sign(a: usize, i: usize) -> f64 {
    if a >> i & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Product of all branch outputs `Π a_i` for the output bitmask.
#[inline]
pub fn output_product(a: usize) -> f64 {
    if a.count_ones() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Render an `n`-bit central outcome as `b_1…b_n`.
pub fn outcome_string(b: usize, n: usize) -> String {
    (0..n)
        .map(|k| if b >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_outcome(s: &str, n: usize) -> Result<usize> {
    if s.len() != n {
        return Err(NetError::OutOfRange(format!(
            "outcome string {s:?} must have {n} bits"
        )));
    }
    s.chars().enumerate().try_fold(0usize, |acc, (k, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << k),
        _ => Err(NetError::OutOfRange(format!("bad outcome bit {c:?} in {s:?}"))),
    })
}

/// Unpack an input bitmask into the tuple `(x_1, …, x_n)`.
pub fn input_tuple(x: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| (x >> i & 1) as u8).collect()
}

/// Full conditional distribution `P(a⃗, b | x⃗)` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTensor {
    scenario: Scenario,
    probs: Vec<f64>,
}

impl BehaviorTensor {
    /// Wrap raw probabilities. Only the shape is checked here; use
    /// [`validate_behavior`] for the numerical audit.
    pub fn from_raw(scenario: Scenario, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != scenario.tensor_len() {
            return Err(NetError::ShapeMismatch {
                expected: scenario.tensor_len(),
                got: probs.len(),
            });
        }
        Ok(Self { scenario, probs })
    }

    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let m = scenario.contexts();
        let mut probs = vec![0.0; scenario.tensor_len()];
        for x in 0..m {
            for a in 0..m {
                for b in 0..m {
                    probs[scenario.index(x, a, b)] = f(x, a, b);
                }
            }
        }
        Self { scenario, probs }
    }

    /// Uniform distribution over `(a⃗, b)` for every context.
    pub fn uniform(scenario: Scenario) -> Self {
        let w = 1.0 / (scenario.contexts() * scenario.central_outcomes()) as f64;
        Self {
            scenario,
            probs: vec![w; scenario.tensor_len()],
        }
    }

    /// Convex combination `Σ w_k t_k`. Weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, &BehaviorTensor)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| NetError::OutOfRange("empty mixture".into()))?
            .1;
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(NetError::OutOfRange(format!(
                "mixture weights must be a probability vector (sum {total})"
            )));
        }
        let mut probs = vec![0.0; first.probs.len()];
        for (w, t) in parts {
            if t.scenario != first.scenario {
                return Err(NetError::ArityMismatch {
                    expected: first.scenario.n(),
                    got: t.scenario.n(),
                });
            }
            for (acc, p) in probs.iter_mut().zip(&t.probs) {
                *acc += w * p;
            }
        }
        Ok(Self {
            scenario: first.scenario,
            probs,
        })
    }

    /// Set entries in `[-CLAMP_TOL, 0)` to zero. Larger negative entries
    /// are left alone so validation can reject them.
    pub(crate) fn clamp_roundoff(mut self) -> Self {
        for p in &mut self.probs {
            if *p < 0.0 && *p >= -CLAMP_TOL {
                *p = 0.0;
            }
        }
        self
    }

    #[inline]
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.scenario.n()
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize, b: usize) -> f64 {
        self.probs[self.scenario.index(x, a, b)]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &BehaviorTensor) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> BehaviorJson {
        let n = self.n();
        let m = self.scenario.contexts();
        let mut records = Vec::with_capacity(self.probs.len());
        // Lexicographic in (x⃗, a⃗, b) with x_1, a_1, b_1 most significant
        // and a = -1 sorting before a = +1.
        for xt in 0..m {
            let x = reverse_bits(xt, n);
            for at in 0..m {
                // digit 0 is a = -1, i.e. a set bit in the mask
                let a = !reverse_bits(at, n) & (m - 1);
                for bt in 0..m {
                    let b = reverse_bits(bt, n);
                    records.push(BehaviorRecord {
                        x: input_tuple(x, n),
                        a: (0..n).map(|i| output_sign(a, i) as i8).collect(),
                        b: outcome_string(b, n),
                        p: self.get(x, a, b),
                    });
                }
            }
        }
        BehaviorJson {
            scenario: ScenarioHeader { n },
            records,
        }
    }

    pub fn from_json(doc: &BehaviorJson) -> Result<Self> {
        let scenario = Scenario::star(doc.scenario.n)?;
        let n = scenario.n();
        let mut probs = vec![0.0; scenario.tensor_len()];
        let mut seen = vec![false; probs.len()];
        for r in &doc.records {
            if r.x.len() != n || r.a.len() != n {
                return Err(NetError::OutOfRange(format!(
                    "record arity does not match n = {n}"
                )));
            }
            let mut x = 0;
            let mut a = 0;
            for i in 0..n {
                match r.x[i] {
                    0 => {}
                    1 => x |= 1 << i,
                    v => return Err(NetError::OutOfRange(format!("input {v} is not a bit"))),
                }
                match r.a[i] {
                    1 => {}
                    -1 => a |= 1 << i,
                    v => return Err(NetError::OutOfRange(format!("output {v} is not ±1"))),
                }
            }
            let b = parse_outcome(&r.b, n)?;
            let idx = scenario.index(x, a, b);
            if seen[idx] {
                return Err(NetError::InvalidModel(format!(
                    "duplicate record for x={:?} a={:?} b={}",
                    r.x, r.a, r.b
                )));
            }
            seen[idx] = true;
            probs[idx] = r.p;
        }
        Ok(Self { scenario, probs })
    }
}

fn reverse_bits(v: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, i| acc | ((v >> (n - 1 - i)) & 1) << i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioHeader {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRecord {
    pub x: Vec<u8>,
    pub a: Vec<i8>,
    pub b: String,
    pub p: f64,
}

/// Serialized form of a [`BehaviorTensor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorJson {
    pub scenario: ScenarioHeader,
    pub records: Vec<BehaviorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Largest `|Σ_{a⃗,b} P - 1|` over input contexts.
    pub max_normalization_defect: f64,
    pub worst_context: Vec<u8>,
    /// Smallest entry in the tensor.
    pub min_entry: f64,
    /// Entries below `-CLAMP_TOL` or above `1 + tol`.
    pub out_of_range_entries: usize,
    pub passed: bool,
}

/// Audit normalization per input context and the range of every entry.
pub fn validate_behavior(t: &BehaviorTensor, tol: f64) -> ValidationReport {
    let sc = t.scenario();
    let m = sc.contexts();
    let block = m * m;
    let mut worst = 0.0;
    let mut worst_x = 0;
    for x in 0..m {
        let start = sc.index(x, 0, 0);
        let s: f64 = t.probs[start..start + block].iter().sum();
        let d = (s - 1.0).abs();
        if d > worst {
            worst = d;
            worst_x = x;
        }
    }
    let min_entry = t.probs.iter().copied().fold(f64::INFINITY, f64::min);
    let out_of_range_entries = t
        .probs
        .iter()
        .filter(|p| **p < -CLAMP_TOL || **p > 1.0 + tol || !p.is_finite())
        .count();
    ValidationReport {
        max_normalization_defect: worst,
        worst_context: input_tuple(worst_x, sc.n()),
        min_entry,
        out_of_range_entries,
        passed: worst <= tol && out_of_range_entries == 0,
    }
}

/// Which marginal and which pair of input contexts produced the largest
/// no-signaling discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsContext {
    /// Branch parties (1-based) whose outputs are kept in the marginal.
    pub branch_parties: Vec<usize>,
    pub includes_central: bool,
    pub inputs: Vec<u8>,
    pub reference_inputs: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsReport {
    pub max_marginal_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst_context: Option<NsContext>,
}

/// Check that every marginal is independent of the inputs of the parties
/// that were summed out.
///
/// For each subset of branch parties (with or without the central party)
/// the marginal at context `x⃗` is compared with the marginal at the
/// reference context that agrees with `x⃗` on the kept parties and has all
/// other inputs set to 0.
pub fn no_signaling_check(t: &BehaviorTensor, tol: f64) -> NsReport {
    let sc = t.scenario();
    let n = sc.n();
    let m = sc.contexts();
    let all = m - 1;
    let mut worst = 0.0;
    let mut worst_ctx = None;
    let mut marg = vec![0.0; m * m];
    let mut reference = vec![0.0; m * m];

    for kept in 0..m {
        for central in [false, true] {
            // Nothing summed out, or nothing kept: no constraint to test.
            if (kept == all) || (kept == 0 && !central) {
                continue;
            }
            let fill = |x: usize, out: &mut [f64]| {
                out.iter_mut().for_each(|v| *v = 0.0);
                for a in 0..m {
                    for b in 0..m {
                        let key = ((a & kept) << n) | if central { b } else { 0 };
                        out[key] += t.get(x, a, b);
                    }
                }
            };
            for x in 0..m {
                let x_ref = x & kept;
                if x_ref == x {
                    continue;
                }
                fill(x_ref, &mut reference);
                fill(x, &mut marg);
                let d = marg
                    .iter()
                    .zip(&reference)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max);
                if d > worst {
                    worst = d;
                    worst_ctx = Some(NsContext {
                        branch_parties: (0..n).filter(|i| kept >> i & 1 == 1).map(|i| i + 1).collect(),
                        includes_central: central,
                        inputs: input_tuple(x, n),
                        reference_inputs: input_tuple(x_ref, n),
                    });
                }
            }
        }
    }
    NsReport {
        max_marginal_discrepancy: worst,
        tolerance: tol,
        passed: worst <= tol,
        worst_context: worst_ctx,
    }
}

/// `⟨A¹_{x_1} … Aⁿ_{x_n} B⟩ = Σ_{a⃗,b} (Π a_i) · sign(b) · P(a⃗, b | x⃗)`.
pub fn correlator(t: &BehaviorTensor, x: usize, central_sign: impl Fn(usize) -> f64) -> f64 {
    let m = t.scenario().contexts();
    let signs: Vec<f64> = (0..m).map(&central_sign).collect();
    let mut acc = 0.0;
    for a in 0..m {
        let pa = output_product(a);
        for (b, sb) in signs.iter().enumerate() {
            acc += pa * sb * t.get(x, a, b);
        }
    }
    acc
}
