//! Born-rule behaviors for star networks of two-qubit sources.
//!
//! Source `i` emits a two-qubit pure state whose first qubit goes to branch
//! party `i` and whose second qubit goes to the central party. The central
//! register orders its qubits by source, source 1 being the most
//! significant bit of a register index.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::sync::OnceLock;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::inequalities::even_subsets;
use crate::scenario::{output_sign, BehaviorTensor, Scenario, DEFAULT_MAX_SOURCES};

const UNIT_TOL: f64 = 1e-12;

/// Amplitudes of a two-qubit state in the order `|00⟩, |01⟩, |10⟩, |11⟩`,
/// first qubit = branch side, second = central side.
pub type TwoQubitState = [C; 4];

pub type Mat2 = [[C; 2]; 2];

/// `(|01⟩ - |10⟩)/√2`.
pub fn singlet() -> TwoQubitState {
    [
        C::new(0.0, 0.0),
        C::new(FRAC_1_SQRT_2, 0.0),
        C::new(-FRAC_1_SQRT_2, 0.0),
        C::new(0.0, 0.0),
    ]
}

/// `|β⟩ ⊗ |γ⟩` with single-qubit states `cos(t/2)|0⟩ + sin(t/2)|1⟩`.
pub fn product_state(branch_angle: f64, central_angle: f64) -> TwoQubitState {
    let (b0, b1) = ((branch_angle / 2.0).cos(), (branch_angle / 2.0).sin());
    let (c0, c1) = ((central_angle / 2.0).cos(), (central_angle / 2.0).sin());
    [
        C::new(b0 * c0, 0.0),
        C::new(b0 * c1, 0.0),
        C::new(b1 * c0, 0.0),
        C::new(b1 * c1, 0.0),
    ]
}

/// `cos θ σ_z + sin θ σ_x`.
pub fn dichotomic_observable(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [
        [C::new(c, 0.0), C::new(s, 0.0)],
        [C::new(s, 0.0), C::new(-c, 0.0)],
    ]
}

/// Eigenvector of [`dichotomic_observable`] for eigenvalue `sign` (±1).
pub fn observable_eigenvector(theta: f64, sign: f64) -> [C; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    if sign > 0.0 {
        [C::new(c, 0.0), C::new(s, 0.0)]
    } else {
        [C::new(-s, 0.0), C::new(c, 0.0)]
    }
}

fn norm_sqr(v: &[C]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

fn inner(u: &[C], v: &[C]) -> C {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Apply the Pauli string with `X` on the parties in `x_parties` and `Z`
/// on the rest to an `n`-qubit central register vector.
fn apply_xz_string(x_parties: usize, v: &[C], n: usize) -> Vec<C> {
    let to_register = |mask: usize| (0..n).fold(0, |acc, i| acc | (((mask >> i) & 1) << (n - 1 - i)));
    let flip = to_register(x_parties);
    let zbits = to_register(!x_parties & ((1 << n) - 1));
    let mut out = vec![C::new(0.0, 0.0); v.len()];
    for (k, amp) in v.iter().enumerate() {
        let sign = if (k & zbits).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        out[k ^ flip] = amp * sign;
    }
    out
}

/// Orthonormal basis of the central register; element `b` is the state
/// reported as outcome `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralBasis {
    n: usize,
    vectors: Vec<Vec<C>>,
}

impl CentralBasis {
    pub fn from_vectors(n: usize, vectors: Vec<Vec<C>>) -> Result<Self> {
        let dim = 1 << n;
        if vectors.len() != dim || vectors.iter().any(|v| v.len() != dim) {
            return Err(NetError::InvalidBasis(format!(
                "expected {dim} vectors of dimension {dim}"
            )));
        }
        let basis = Self { n, vectors };
        let defect = basis.orthonormality_defect();
        if defect > UNIT_TOL {
            return Err(NetError::InvalidBasis(format!(
                "basis is not orthonormal (Gram defect {defect:.3e})"
            )));
        }
        Ok(basis)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vectors(&self) -> &[Vec<C>] {
        &self.vectors
    }

    /// `max |⟨φ_i|φ_j⟩ - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, u) in self.vectors.iter().enumerate() {
            for (j, v) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner(u, v) - target).norm());
            }
        }
        worst
    }
}

/// Joint eigenbasis of the commuting strings `B^s` (`X` on the parties in
/// `s`, `Z` elsewhere) for even subsets `s`.
///
/// Outcome bit `k` is the eigenvalue bit of generator `k`: generator 0 is
/// `Z⊗…⊗Z`, generator `k ≥ 1` carries `X` on parties 1 and `k+1`. For
/// `n = 2` this is the Bell basis with `b_1` ↔ `ZZ` and `b_2` ↔ `XX`.
pub fn ghz_type_basis(n: usize) -> Result<CentralBasis> {
    Scenario::star(n)?;
    let dim = 1usize << n;
    let generators: Vec<usize> = std::iter::once(0).chain((1..n).map(|k| 1 | 1 << k)).collect();
    let mut vectors = Vec::with_capacity(dim);
    for b in 0..dim {
        let project = |mut v: Vec<C>| {
            for (k, g) in generators.iter().enumerate() {
                let sign = if b >> k & 1 == 1 { -1.0 } else { 1.0 };
                let gv = apply_xz_string(*g, &v, n);
                v = v.iter().zip(&gv).map(|(a, c)| (a + c * sign) * 0.5).collect();
            }
            v
        };
        // Largest projection of a computational basis vector, first wins ties.
        let mut v = (0..dim)
            .map(|seed| {
                let mut e = vec![C::new(0.0, 0.0); dim];
                e[seed] = C::new(1.0, 0.0);
                project(e)
            })
            .fold(None::<Vec<C>>, |best, v| match best {
                Some(b) if norm_sqr(&b) >= norm_sqr(&v) - 1e-12 => Some(b),
                _ => Some(v),
            })
            .filter(|v| norm_sqr(v) > 1e-6)
            .ok_or_else(|| NetError::InvalidBasis("empty joint eigenspace".into()))?;
        let norm = norm_sqr(&v).sqrt();
        let phase = v
            .iter()
            .find(|c| c.norm() > 1e-9)
            .map(|c| c.conj() / c.norm())
            .unwrap_or(C::new(1.0, 0.0));
        v.iter_mut().for_each(|c| *c = *c * phase / norm);
        vectors.push(v);
    }
    CentralBasis::from_vectors(n, vectors)
}

/// The four Bell states labeled `(b_1, b_2)` = (`ZZ` bit, `XX` bit):
/// `00 → Φ⁺`, `10 → Ψ⁺`, `01 → Φ⁻`, `11 → Ψ⁻` (bitmask order 00,10,01,11).
pub fn bell_basis() -> CentralBasis {
    let h = FRAC_1_SQRT_2;
    let z = C::new(0.0, 0.0);
    let r = |x: f64| C::new(x, 0.0);
    let vectors = vec![
        vec![r(h), z, z, r(h)],  // b = 00: Φ+
        vec![z, r(h), r(h), z],  // b = 10: Ψ+
        vec![r(h), z, z, r(-h)], // b = 01: Φ-
        vec![z, r(h), r(-h), z], // b = 11: Ψ-
    ];
    CentralBasis::from_vectors(2, vectors).expect("Bell basis is orthonormal")
}

/// The four Bell states as two-qubit source states.
pub fn bell_states() -> [TwoQubitState; 4] {
    let basis = bell_basis();
    let v = basis.vectors();
    std::array::from_fn(|i| [v[i][0], v[i][1], v[i][2], v[i][3]])
}

/// Map from central outcome to the `±1` values `B^j`, `j = 1..2^{n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralSignConvention {
    n: usize,
    /// `table[j-1][b]`.
    table: Vec<Vec<i8>>,
}

impl CentralSignConvention {
    pub fn from_table(n: usize, table: Vec<Vec<i8>>) -> Result<Self> {
        let rows = 1 << (n - 1);
        let cols = 1 << n;
        if table.len() != rows || table.iter().any(|r| r.len() != cols) {
            return Err(NetError::OutOfRange(format!(
                "sign table must be {rows} × {cols}"
            )));
        }
        if table.iter().flatten().any(|s| *s != 1 && *s != -1) {
            return Err(NetError::OutOfRange("sign table entries must be ±1".into()));
        }
        Ok(Self { n, table })
    }

    /// `B^j(b) = (-1)^{popcount(b & mask_j)}`.
    pub fn from_bitmasks(n: usize, masks: &[usize]) -> Result<Self> {
        let table = masks
            .iter()
            .map(|m| {
                (0..1usize << n)
                    .map(|b| if (b & m).count_ones() % 2 == 1 { -1 } else { 1 })
                    .collect()
            })
            .collect();
        Self::from_table(n, table)
    }

    /// Eigenvalues of the strings `B^{s_j}` on the [`ghz_type_basis`]
    /// outcomes, `s_j` the `j`-th even subset.
    pub fn standard(n: usize) -> Result<Self> {
        Scenario::star(n)?;
        static CACHE: OnceLock<Vec<CentralSignConvention>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| {
            (2..=DEFAULT_MAX_SOURCES)
                .map(|k| {
                    let basis = ghz_type_basis(k).expect("supported n");
                    Self::eigen_signs(&basis)
                })
                .collect()
        });
        Ok(cache[n - 2].clone())
    }

    fn eigen_signs(basis: &CentralBasis) -> Self {
        let n = basis.n();
        let table = even_subsets(n)
            .into_iter()
            .map(|s| {
                basis
                    .vectors()
                    .iter()
                    .map(|v| {
                        let ev = inner(v, &apply_xz_string(s, v, n)).re;
                        debug_assert!((ev.abs() - 1.0).abs() < 1e-9);
                        if ev > 0.0 {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect()
            })
            .collect();
        Self { n, table }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `B^j(b)` for 1-based `j`.
    #[inline]
    pub fn sign(&self, j: usize, b: usize) -> f64 {
        self.table[j - 1][b] as f64
    }

    pub fn components(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[Vec<i8>] {
        &self.table
    }
}

/// How the central basis was specified; kept for serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    Bell,
    Ghz,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSetup {
    pub n: usize,
    pub source_states: Vec<TwoQubitState>,
    /// Per branch party, the angles `(θ_x=0, θ_x=1)`.
    pub branch_angles: Vec<[f64; 2]>,
    pub central_basis: CentralBasis,
    pub basis_kind: BasisKind,
    pub sign_convention: CentralSignConvention,
}

impl QuantumSetup {
    pub fn validate(&self) -> Result<()> {
        Scenario::star(self.n)?;
        if self.source_states.len() != self.n || self.branch_angles.len() != self.n {
            return Err(NetError::ArityMismatch {
                expected: self.n,
                got: self.source_states.len().min(self.branch_angles.len()),
            });
        }
        for (i, s) in self.source_states.iter().enumerate() {
            let norm = norm_sqr(s).sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(NetError::InvalidState(format!(
                    "source {} has norm {norm}",
                    i + 1
                )));
            }
        }
        if self.central_basis.n() != self.n || self.sign_convention.n() != self.n {
            return Err(NetError::InvalidBasis(format!(
                "central basis / sign convention do not act on {} qubits",
                self.n
            )));
        }
        let defect = self.central_basis.orthonormality_defect();
        if defect > UNIT_TOL {
            return Err(NetError::InvalidBasis(format!("Gram defect {defect:.3e}")));
        }
        Ok(())
    }

    pub fn with_source_state(mut self, source: usize, state: TwoQubitState) -> Self {
        self.source_states[source] = state;
        self
    }

    pub fn to_json(&self) -> QuantumSetupJson {
        let amps = |v: &[C]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        QuantumSetupJson {
            n: self.n,
            source_states: self.source_states.iter().map(|s| amps(s)).collect(),
            branch_angles: self.branch_angles.clone(),
            central_basis: match self.basis_kind {
                BasisKind::Bell => BasisSpec::Named("bell".into()),
                BasisKind::Ghz => BasisSpec::Named("ghz".into()),
                BasisKind::Explicit => {
                    BasisSpec::Explicit(self.central_basis.vectors().iter().map(|v| amps(v)).collect())
                }
            },
            sign_convention: SignSpec::Table {
                table: self.sign_convention.table.clone(),
            },
        }
    }

    pub fn from_json(doc: &QuantumSetupJson) -> Result<Self> {
        let n = doc.n;
        Scenario::star(n)?;
        let to_c = |v: &[[f64; 2]]| v.iter().map(|p| C::new(p[0], p[1])).collect::<Vec<_>>();
        let source_states = doc
            .source_states
            .iter()
            .map(|s| {
                let v = to_c(s);
                <[C; 4]>::try_from(v)
                    .map_err(|_| NetError::InvalidState("source states need 4 amplitudes".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (central_basis, basis_kind) = match &doc.central_basis {
            BasisSpec::Named(name) if name == "bell" => {
                if n != 2 {
                    return Err(NetError::InvalidBasis("the Bell basis needs n = 2".into()));
                }
                (bell_basis(), BasisKind::Bell)
            }
            BasisSpec::Named(name) if name == "ghz" => (ghz_type_basis(n)?, BasisKind::Ghz),
            BasisSpec::Named(other) => {
                return Err(NetError::InvalidBasis(format!("unknown basis {other:?}")))
            }
            BasisSpec::Explicit(rows) => (
                CentralBasis::from_vectors(n, rows.iter().map(|r| to_c(r)).collect())?,
                BasisKind::Explicit,
            ),
        };
        let sign_convention = match &doc.sign_convention {
            SignSpec::Named(name) if name == "default" => CentralSignConvention::standard(n)?,
            SignSpec::Named(other) => {
                return Err(NetError::OutOfRange(format!("unknown sign convention {other:?}")))
            }
            SignSpec::Bitmasks { bitmasks } => CentralSignConvention::from_bitmasks(n, bitmasks)?,
            SignSpec::Table { table } => CentralSignConvention::from_table(n, table.clone())?,
        };
        let setup = Self {
            n,
            source_states,
            branch_angles: doc.branch_angles.clone(),
            central_basis,
            basis_kind,
            sign_convention,
        };
        setup.validate()?;
        Ok(setup)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Named(String),
    Explicit(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignSpec {
    Named(String),
    Bitmasks { bitmasks: Vec<usize> },
    Table { table: Vec<Vec<i8>> },
}

impl Default for SignSpec {
    fn default() -> Self {
        SignSpec::Named("default".into())
    }
}

/// Serialized form of a [`QuantumSetup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumSetupJson {
    pub n: usize,
    pub source_states: Vec<Vec<[f64; 2]>>,
    pub branch_angles: Vec<[f64; 2]>,
    pub central_basis: BasisSpec,
    #[serde(default)]
    pub sign_convention: SignSpec,
}

/// Born-rule behavior `P(a⃗, b | x⃗) = |⟨e_{a_1}…e_{a_n}, φ_b | Ψ⟩|²`.
pub fn quantum_behavior(setup: &QuantumSetup) -> Result<BehaviorTensor> {
    setup.validate()?;
    let n = setup.n;
    let sc = Scenario::star(n)?;
    let m = sc.contexts();

    // Central-side vector left after projecting branch qubit i onto the
    // eigenvector for (input, output): reduced[i][x][out][c].
    let reduced: Vec<[[[C; 2]; 2]; 2]> = setup
        .source_states
        .iter()
        .zip(&setup.branch_angles)
        .map(|(psi, angles)| {
            std::array::from_fn(|x| {
                std::array::from_fn(|out| {
                    let e = observable_eigenvector(angles[x], if out == 0 { 1.0 } else { -1.0 });
                    std::array::from_fn(|c| e[0].conj() * psi[c] + e[1].conj() * psi[2 + c])
                })
            })
        })
        .collect();

    let basis = setup.central_basis.vectors();
    let mut probs = vec![0.0; sc.tensor_len()];
    let mut joint = vec![C::new(0.0, 0.0); m];
    for x in 0..m {
        for a in 0..m {
            // Tensor product with source 1 as the most significant qubit.
            joint.iter_mut().for_each(|v| *v = C::new(1.0, 0.0));
            for (k, slot) in joint.iter_mut().enumerate() {
                for i in 0..n {
                    let c = (k >> (n - 1 - i)) & 1;
                    let out = usize::from(output_sign(a, i) < 0.0);
                    *slot *= reduced[i][x >> i & 1][out][c];
                }
            }
            for (b, phi) in basis.iter().enumerate() {
                probs[sc.index(x, a, b)] = inner(phi, &joint).norm_sqr();
            }
        }
    }
    Ok(BehaviorTensor::from_raw(sc, probs)?.clamp_roundoff())
}

/// Two singlets, both branch parties measuring at `(π/4, -π/4)`, Bell
/// measurement in the middle.
pub fn optimal_bilocal_setup() -> QuantumSetup {
    QuantumSetup {
        n: 2,
        source_states: vec![singlet(); 2],
        branch_angles: vec![[FRAC_PI_4, -FRAC_PI_4]; 2],
        central_basis: bell_basis(),
        basis_kind: BasisKind::Bell,
        sign_convention: CentralSignConvention::standard(2).expect("n = 2"),
    }
}

/// `n` singlets, every branch party at `(π/4, -π/4)`, GHZ-type central
/// measurement.
pub fn optimal_star_setup(n: usize) -> Result<QuantumSetup> {
    Ok(QuantumSetup {
        n,
        source_states: vec![singlet(); n],
        branch_angles: vec![[FRAC_PI_4, -FRAC_PI_4]; n],
        central_basis: ghz_type_basis(n)?,
        basis_kind: BasisKind::Ghz,
        sign_convention: CentralSignConvention::standard(n)?,
    })
}
