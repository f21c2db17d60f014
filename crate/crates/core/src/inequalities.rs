//! Star-network inequalities and their measurement-dependent relaxations.
//!
//! `I_j = 2^{-n} Σ_x (-1)^{g_j(x)} ⟨A¹_{x_1}…Aⁿ_{x_n} B^j⟩` and
//! `S_n = Σ_j |I_j|^{1/n}`, with classical bound `2^{n-2}`. For `n = 2`
//! the two components are the bilocal `I` and `J`.

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::quantum::CentralSignConvention;
use crate::scenario::{correlator, BehaviorTensor, Scenario, PHYSICS_TOL};

/// Even-cardinality subsets of `{1..n}` as bitmasks (party `i` ↔ bit
/// `i-1`), in increasing bitmask order. Entry `j-1` defines `g_j`.
pub fn even_subsets(n: usize) -> Vec<usize> {
    (0..1usize << n).filter(|s| s.count_ones() % 2 == 0).collect()
}

/// `g_j(x)`: parity of the inputs in the `j`-th even subset (1-based `j`).
pub fn g_parity(n: usize, j: usize, x: usize) -> Result<u8> {
    let subsets = even_subsets(n);
    if j == 0 || j > subsets.len() {
        return Err(NetError::OutOfRange(format!(
            "j = {j} outside 1..={} for n = {n}",
            subsets.len()
        )));
    }
    Ok(((x & subsets[j - 1]).count_ones() % 2) as u8)
}

/// `x ↦ x^{1/n}` for `x ≥ 0`, exact-rounding forms for `n = 2, 3`.
pub fn nth_root(x: f64, n: usize) -> f64 {
    match n {
        1 => x,
        2 => x.sqrt(),
        3 => x.cbrt(),
        _ => x.powf(1.0 / n as f64),
    }
}

fn check_arity(t: &BehaviorTensor, conv: &CentralSignConvention) -> Result<()> {
    if t.n() != conv.n() {
        return Err(NetError::ArityMismatch {
            expected: conv.n(),
            got: t.n(),
        });
    }
    Ok(())
}

/// `I_j` under the given sign convention, 1-based `j`.
pub fn star_ij(t: &BehaviorTensor, j: usize, conv: &CentralSignConvention) -> Result<f64> {
    check_arity(t, conv)?;
    let n = t.n();
    let subsets = even_subsets(n);
    if j == 0 || j > subsets.len() {
        return Err(NetError::OutOfRange(format!("component j = {j}")));
    }
    let s = subsets[j - 1];
    let total: f64 = (0..1usize << n)
        .map(|x| {
            let sign = if (x & s).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            sign * correlator(t, x, |b| conv.sign(j, b))
        })
        .sum();
    Ok(total / (1u64 << n) as f64)
}

/// All components `I_1 … I_{2^{n-1}}`.
pub fn star_components(t: &BehaviorTensor, conv: &CentralSignConvention) -> Result<Vec<f64>> {
    (1..=conv.components()).map(|j| star_ij(t, j, conv)).collect()
}

fn require_bilocal(t: &BehaviorTensor) -> Result<()> {
    if t.n() != 2 {
        return Err(NetError::ArityMismatch {
            expected: 2,
            got: t.n(),
        });
    }
    Ok(())
}

/// `I = ¼ Σ_{x,z} ⟨A_x B₀ C_z⟩`.
pub fn bilocal_i(t: &BehaviorTensor, conv: &CentralSignConvention) -> Result<f64> {
    require_bilocal(t)?;
    star_ij(t, 1, conv)
}

/// `J = ¼ Σ_{x,z} (-1)^{x+z} ⟨A_x B₁ C_z⟩`.
pub fn bilocal_j(t: &BehaviorTensor, conv: &CentralSignConvention) -> Result<f64> {
    require_bilocal(t)?;
    star_ij(t, 2, conv)
}

/// `Σ_j |I_j|^{1/n}`.
pub fn aggregate(components: &[f64], n: usize) -> f64 {
    components.iter().map(|c| nth_root(c.abs(), n)).sum()
}

pub fn classical_bound(n: usize) -> f64 {
    (1u64 << (n - 2)) as f64
}

fn check_n(n: usize) -> Result<()> {
    Scenario::star(n).map(|_| ())
}

fn check_m(m: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&m) {
        return Err(NetError::OutOfRange(format!("M = {m} outside [0, 2]")));
    }
    Ok(())
}

/// `2^{n-2} (1 + (M/2)^{1/n})`; `1 + √(M/2)` for `n = 2` and
/// `2 + ∛(4M)` for `n = 3`.
pub fn md_bound(n: usize, m: f64) -> Result<f64> {
    check_n(n)?;
    check_m(m)?;
    Ok(classical_bound(n) * (1.0 + nth_root(m / 2.0, n)))
}

/// Inverse of [`md_bound`]: `2 (S/2^{n-2} - 1)^n`. Targets at or below
/// the classical bound need no dependence and give 0.
pub fn required_md(n: usize, s_target: f64) -> Result<f64> {
    check_n(n)?;
    let c = classical_bound(n);
    if !s_target.is_finite() {
        return Err(NetError::OutOfRange(format!("S = {s_target}")));
    }
    if s_target <= c {
        return Ok(0.0);
    }
    let top = 2.0 * c;
    if s_target > top * (1.0 + 1e-12) {
        return Err(NetError::OutOfRange(format!(
            "S = {s_target} exceeds the M = 2 bound {top}"
        )));
    }
    let ratio = (s_target / c - 1.0).min(1.0);
    Ok(2.0 * ratio.powi(n as i32))
}

/// `F = 1 - M/2`.
pub fn independence_fraction(m: f64) -> Result<f64> {
    check_m(m)?;
    Ok(1.0 - m / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundProvenance {
    PaperClosedForm,
    DerivedExtrapolation,
}

impl BoundProvenance {
    pub fn for_n(n: usize) -> Self {
        if n <= 3 {
            Self::PaperClosedForm
        } else {
            Self::DerivedExtrapolation
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::PaperClosedForm => "paper-closed-form",
            Self::DerivedExtrapolation => "derived-extrapolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub n: usize,
    pub components: Vec<f64>,
    pub aggregate_s: f64,
    pub classical_bound: f64,
    pub md_bound: f64,
    pub m_used: f64,
    pub violation: bool,
    pub tolerance: f64,
    pub bound_provenance: BoundProvenance,
}

/// Full report under the standard sign convention with no dependence
/// granted.
pub fn s_n(t: &BehaviorTensor) -> Result<InequalityReport> {
    let conv = CentralSignConvention::standard(t.n())?;
    s_n_with(t, &conv, 0.0, PHYSICS_TOL)
}

/// Full report; the verdict compares `S` against `md_bound(n, m_used)`.
pub fn s_n_with(
    t: &BehaviorTensor,
    conv: &CentralSignConvention,
    m_used: f64,
    tol: f64,
) -> Result<InequalityReport> {
    let n = t.n();
    let components = star_components(t, conv)?;
    let aggregate_s = aggregate(&components, n);
    let bound = md_bound(n, m_used)?;
    Ok(InequalityReport {
        n,
        components,
        aggregate_s,
        classical_bound: classical_bound(n),
        md_bound: bound,
        m_used,
        violation: aggregate_s > bound + tol,
        tolerance: tol,
        bound_provenance: BoundProvenance::for_n(n),
    })
}
