//! Pauli spectra `PS(psi) = {<psi|P|psi> : P in P_n}` and the small-state
//! certificates built on them.

use std::collections::HashSet;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::decomp::Decomposition;
use crate::denseoracle::{self, DenseGate};
use crate::f2linalg::F2Vector;
use crate::stabstate::{Gate, Scalar, StabilizerState, StateError};

pub const SPECTRUM_CAP: usize = 12;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("spectrum of {n} qubits exceeds the cap of {cap}")]
    Cap { n: usize, cap: usize },
    #[error("state is zero")]
    ZeroState,
    #[error("dimension mismatch: state has {state} qubits, operator has {op}")]
    Shape { state: usize, op: usize },
    #[error("vector length {0} is not a power of two")]
    Length(usize),
    #[error("bad Pauli string {0:?}")]
    Parse(String),
    #[error("states have different qubit counts ({0} vs {1})")]
    QubitCount(usize, usize),
    #[error("{0}")]
    Decomp(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Dense(#[from] denseoracle::DenseError),
}

/// Anything with a dense state vector.
pub trait DenseState {
    fn dense(&self) -> Result<Vec<Complex64>, SpectrumError>;
}

impl DenseState for [Complex64] {
    fn dense(&self) -> Result<Vec<Complex64>, SpectrumError> {
        Ok(self.to_vec())
    }
}

impl DenseState for Vec<Complex64> {
    fn dense(&self) -> Result<Vec<Complex64>, SpectrumError> {
        Ok(self.clone())
    }
}

impl DenseState for StabilizerState {
    fn dense(&self) -> Result<Vec<Complex64>, SpectrumError> {
        Ok(self.to_dense_capped(SPECTRUM_CAP)?)
    }
}

impl DenseState for Decomposition {
    fn dense(&self) -> Result<Vec<Complex64>, SpectrumError> {
        self.to_dense_capped(SPECTRUM_CAP)
            .map_err(|e| SpectrumError::Decomp(e.to_string()))
    }
}

fn qubits_of(v: &[Complex64]) -> Result<usize, SpectrumError> {
    if !v.len().is_power_of_two() {
        return Err(SpectrumError::Length(v.len()));
    }
    Ok(v.len().trailing_zeros() as usize)
}

fn normalized(v: &[Complex64]) -> Result<Vec<Complex64>, SpectrumError> {
    let n = denseoracle::norm(v);
    if n < 1e-300 {
        return Err(SpectrumError::ZeroState);
    }
    Ok(v.iter().map(|a| a / n).collect())
}

/// `i^{|x & z|} X(x) Z(z)`, which is Hermitian.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    pub x: F2Vector,
    pub z: F2Vector,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        PauliOperator {
            x: F2Vector::zeros(n),
            z: F2Vector::zeros(n),
        }
    }

    /// Character `i` acts on qubit `i`, e.g. `"XXI"`.
    pub fn parse(s: &str) -> Result<Self, SpectrumError> {
        let mut p = PauliOperator::identity(0);
        for ch in s.trim().chars() {
            let (x, z) = match ch.to_ascii_uppercase() {
                'I' => (false, false),
                'X' => (true, false),
                'Y' => (true, true),
                'Z' => (false, true),
                _ => return Err(SpectrumError::Parse(s.to_string())),
            };
            p.x.push(x);
            p.z.push(z);
        }
        Ok(p)
    }

    /// Single-qubit factors on the listed qubits.
    pub fn on(n: usize, factors: &[(char, usize)]) -> Result<Self, SpectrumError> {
        let mut label: Vec<char> = vec!['I'; n];
        for &(c, q) in factors {
            *label.get_mut(q).ok_or(SpectrumError::Shape { state: n, op: q + 1 })? = c;
        }
        Self::parse(&label.into_iter().collect::<String>())
    }

    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, SpectrumError> {
        let n = qubits_of(v)?;
        if n != self.num_qubits() {
            return Err(SpectrumError::Shape { state: n, op: self.num_qubits() });
        }
        let (x, z) = (self.x.to_u64() as usize, self.z.to_u64() as usize);
        let pre = i_pow((x & z).count_ones());
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (b, a) in v.iter().enumerate() {
            let sign = if (z & b).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[b ^ x] = pre * a * sign;
        }
        Ok(out)
    }
}

fn i_pow(k: u32) -> Complex64 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][(k % 4) as usize]
}

/// `<psi|P|psi> / <psi|psi>`.
pub fn pauli_expectation<S: DenseState + ?Sized>(state: &S, p: &PauliOperator) -> Result<Complex64, SpectrumError> {
    let v = normalized(&state.dense()?)?;
    Ok(denseoracle::inner(&v, &p.apply(&v)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PauliSpectrumSummary {
    /// Sorted by real part, then imaginary part.
    pub buckets: Vec<(Complex64, u64)>,
    pub tolerance: f64,
}

impl PauliSpectrumSummary {
    pub fn from_values(mut values: Vec<Complex64>, tolerance: f64) -> Self {
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut buckets: Vec<(Complex64, u64)> = Vec::new();
        for v in values {
            match buckets.iter_mut().rev().find(|(r, _)| (r - v).norm() <= tolerance) {
                Some(b) => b.1 += 1,
                None => buckets.push((v, 1)),
            }
        }
        buckets.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
        PauliSpectrumSummary { buckets, tolerance }
    }

    pub fn total(&self) -> u64 {
        self.buckets.iter().map(|b| b.1).sum()
    }

    /// Number of Paulis whose expectation is within tolerance of `value`.
    pub fn count_near(&self, value: Complex64) -> u64 {
        self.buckets
            .iter()
            .filter(|(r, _)| (r - value).norm() <= self.tolerance)
            .map(|b| b.1)
            .sum()
    }

    pub fn zero_count(&self) -> u64 {
        self.count_near(Complex64::new(0.0, 0.0))
    }

    pub fn same_multiset(&self, other: &PauliSpectrumSummary) -> bool {
        let tol = self.tolerance.max(other.tolerance);
        self.buckets.len() == other.buckets.len()
            && self
                .buckets
                .iter()
                .zip(&other.buckets)
                .all(|(a, b)| a.1 == b.1 && (a.0 - b.0).norm() <= tol)
    }
}

/// Every `<psi|P|psi>`, indexed by `x + 2^n z` for `P = i^{|x&z|} X(x) Z(z)`.
pub fn spectrum_values<S: DenseState + ?Sized>(state: &S) -> Result<Vec<Complex64>, SpectrumError> {
    let v = state.dense()?;
    let n = qubits_of(&v)?;
    if n > SPECTRUM_CAP {
        return Err(SpectrumError::Cap { n, cap: SPECTRUM_CAP });
    }
    let v = normalized(&v)?;
    let dim = v.len();
    let per_x: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|x| {
            // f(b) = conj(psi[b^x]) psi[b]; its Walsh-Hadamard transform at z is
            // <psi| X(x) Z(z) |psi>.
            let mut f: Vec<Complex64> = (0..dim).map(|b| v[b ^ x].conj() * v[b]).collect();
            let mut h = 1;
            while h < dim {
                for i in (0..dim).step_by(2 * h) {
                    for j in i..i + h {
                        let (a, b) = (f[j], f[j + h]);
                        f[j] = a + b;
                        f[j + h] = a - b;
                    }
                }
                h *= 2;
            }
            f.iter()
                .enumerate()
                .map(|(z, a)| i_pow((x & z).count_ones()) * a)
                .collect()
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (x, row) in per_x.into_iter().enumerate() {
        for (z, a) in row.into_iter().enumerate() {
            out[x + dim * z] = a;
        }
    }
    Ok(out)
}

pub fn full_spectrum<S: DenseState + ?Sized>(state: &S) -> Result<PauliSpectrumSummary, SpectrumError> {
    full_spectrum_with_tolerance(state, DEFAULT_TOLERANCE)
}

pub fn full_spectrum_with_tolerance<S: DenseState + ?Sized>(
    state: &S,
    tolerance: f64,
) -> Result<PauliSpectrumSummary, SpectrumError> {
    Ok(PauliSpectrumSummary::from_values(spectrum_values(state)?, tolerance))
}

/// A state is a stabilizer state iff exactly `2^n` Paulis have `|<P>| = 1`.
pub fn is_stabilizer_state<S: DenseState + ?Sized>(state: &S) -> Result<bool, SpectrumError> {
    let vals = spectrum_values(state)?;
    let n = (vals.len().trailing_zeros() / 2) as usize;
    let ones = vals.iter().filter(|a| (a.norm() - 1.0).abs() <= DEFAULT_TOLERANCE).count();
    Ok(ones == 1 << n)
}

/// Phase-insensitive key of a stabilizer state: each amplitude's power of `i`
/// relative to the first nonzero amplitude, or 4 for zero.
fn stabilizer_key(v: &[Complex64]) -> Vec<u8> {
    let first = v.iter().find(|a| a.norm() > 1e-9).copied().unwrap_or(Complex64::new(1.0, 0.0));
    let unit = first / first.norm();
    v.iter()
        .map(|a| {
            if a.norm() <= 1e-9 {
                4
            } else {
                let r = a / unit;
                let q = (r.arg() / std::f64::consts::FRAC_PI_2).round() as i64;
                q.rem_euclid(4) as u8
            }
        })
        .collect()
}

pub const ENUMERATION_CAP: usize = 4;

/// Every `n`-qubit stabilizer state once, up to global phase, found by a
/// breadth-first search over H, S and CX from `|0^n>`.
pub fn enumerate_stabilizer_states(n: usize) -> Result<Vec<StabilizerState>, SpectrumError> {
    if n > ENUMERATION_CAP {
        return Err(SpectrumError::Cap { n, cap: ENUMERATION_CAP });
    }
    let mut gates: Vec<Gate> = (0..n).flat_map(|q| [Gate::H(q), Gate::S(q)]).collect();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                gates.push(Gate::CX(a, b));
            }
        }
    }
    let start = StabilizerState::zeros_state(n);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(stabilizer_key(&start.to_dense()?));
    let mut found = vec![start];
    let mut frontier = 0;
    while frontier < found.len() {
        let s = found[frontier].clone();
        frontier += 1;
        for &g in &gates {
            let t = s.apply_gate(g)?;
            if seen.insert(stabilizer_key(&t.to_dense()?)) {
                found.push(t);
            }
        }
    }
    Ok(found)
}

/// `2^n prod_{k=1}^n (2^k + 1)`.
pub fn stabilizer_state_count(n: usize) -> u64 {
    (1..=n as u32).fold(1u64 << n, |acc, k| acc * ((1u64 << k) + 1))
}

/// Result of [`canonical_rank2_form`]: `C|phi1> = c1 |0^n>` and
/// `C|phi2> = c2 |1^a 0^b +^{n-a-b}>`, with `C = gates` applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank2Form {
    pub gates: Vec<Gate>,
    pub a: usize,
    pub b: usize,
    pub c1: Scalar,
    pub c2: Complex64,
}

impl Rank2Form {
    /// `|1^a 0^b +^{n-a-b}>` as a stabilizer state.
    pub fn target(&self, n: usize) -> StabilizerState {
        let mut s = StabilizerState::zeros_state(n);
        for q in 0..self.a {
            s.apply(Gate::X(q)).expect("in range");
        }
        for q in self.a + self.b..n {
            s.apply(Gate::H(q)).expect("in range");
        }
        s
    }
}

fn swap_gates(a: usize, b: usize) -> [Gate; 3] {
    [Gate::CX(a, b), Gate::CX(b, a), Gate::CX(a, b)]
}

/// Gates that realize `order` by swaps: afterwards qubit `i` holds what was
/// on qubit `order[i]`.
fn permutation_gates(order: &[usize]) -> Vec<Gate> {
    let n = order.len();
    // pos[q]: where the content that started on q currently sits.
    let mut at: Vec<usize> = (0..n).collect();
    let mut pos: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for i in 0..n {
        let j = pos[order[i]];
        if j != i {
            out.extend(swap_gates(i, j));
            let (ci, cj) = (at[i], at[j]);
            at.swap(i, j);
            pos[ci] = j;
            pos[cj] = i;
        }
    }
    out
}

fn evolve(s: &StabilizerState, gates: &[Gate]) -> Result<StabilizerState, SpectrumError> {
    let mut t = s.clone();
    t.apply_all(gates)?;
    Ok(t)
}

/// The two-state normal form. `phi1` is mapped to `|0^n>`; every later gate
/// fixes `|0^n>` (CX, S, CZ, Z and swaps) and brings `phi2` to
/// `|x> (x) |+^k>` and then to `|1^a 0^b +^{n-a-b}>`.
pub fn canonical_rank2_form(phi1: &StabilizerState, phi2: &StabilizerState) -> Result<Rank2Form, SpectrumError> {
    let n = phi1.num_qubits();
    if phi2.num_qubits() != n {
        return Err(SpectrumError::QubitCount(n, phi2.num_qubits()));
    }
    if phi1.is_zero() || phi2.is_zero() {
        return Err(SpectrumError::ZeroState);
    }
    let (mut gates, c1) = phi1.reduction_to_zero()?;
    let psi = evolve(phi2, &gates)?;

    // Straighten the support h + span(G) to x + span(e_p) with CX(p -> j).
    let basis = crate::f2linalg::F2Matrix::from_rows(n, psi.basis().to_vec())
        .map_err(|e| SpectrumError::Parse(e.to_string()))?;
    let rref = basis.rref();
    let pivots = rref.pivots.clone();
    for (i, &p) in pivots.iter().enumerate() {
        for j in rref.matrix.row(i).iter_ones() {
            if j != p {
                gates.push(Gate::CX(p, j));
            }
        }
    }
    let psi = evolve(phi2, &gates)?;
    let mut x = psi.offset().clone();
    for &p in &pivots {
        x.set(p, false);
    }

    // Strip the quadratic phase over the pivot coordinates with S and CZ.
    let point = |ys: &[usize]| {
        let mut v = x.clone();
        for &y in ys {
            v.set(pivots[y], true);
        }
        v
    };
    let phase = |s: &StabilizerState, v: &F2Vector| -> Result<u8, SpectrumError> {
        Ok(s.amplitude_scalar(v)?.map(|a| a.phase8).ok_or(SpectrumError::ZeroState)?)
    };
    let p0 = phase(&psi, &x)?;
    let k = pivots.len();
    let lin: Vec<u8> = (0..k)
        .map(|i| phase(&psi, &point(&[i])).map(|p| (p + 8 - p0) % 8 / 2))
        .collect::<Result<_, _>>()?;
    for (i, &l) in lin.iter().enumerate() {
        for _ in 0..l {
            gates.push(Gate::Sdg(pivots[i]));
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let pij = phase(&psi, &point(&[i, j]))?;
            let rel = (pij as i32 - p0 as i32 - 2 * (lin[i] as i32 + lin[j] as i32)).rem_euclid(8);
            if rel == 4 {
                gates.push(Gate::CZ(pivots[i], pivots[j]));
            }
        }
    }

    // Gather the |x> part first and the |+> part last.
    let rest: Vec<usize> = (0..n).filter(|q| !pivots.contains(q)).collect();
    let a = usize::from(!x.is_zero());
    let mut order = Vec::with_capacity(n);
    if let Some(c) = rest.iter().copied().find(|&q| x.get(q)) {
        for &j in &rest {
            if j != c && x.get(j) {
                gates.push(Gate::CX(c, j));
            }
        }
        order.push(c);
        order.extend(rest.iter().copied().filter(|&q| q != c));
    } else {
        order.extend(rest.iter().copied());
    }
    order.extend(pivots.iter().copied());
    gates.extend(permutation_gates(&order));

    let b = rest.len() - a;
    let mut form = Rank2Form {
        gates,
        a,
        b,
        c1,
        c2: Complex64::new(0.0, 0.0),
    };
    let image = evolve(phi2, &form.gates)?;
    let target = form.target(n);
    let mut probe = F2Vector::zeros(n);
    for q in 0..a {
        probe.set(q, true);
    }
    let t = target.amplitude(&probe)?;
    form.c2 = image.amplitude(&probe)? / t;
    Ok(form)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub details: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateZeros {
    pub case: String,
    pub gamma: [f64; 2],
    pub zero_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroCounts {
    pub cat5: u64,
    pub candidates: Vec<CandidateZeros>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cat5Report {
    pub assertions: Vec<Assertion>,
    pub zero_counts: ZeroCounts,
    pub rank_at_least_3: bool,
}

impl Cat5Report {
    pub fn passed(&self) -> bool {
        self.rank_at_least_3
    }

    pub fn first_failure(&self) -> Option<&Assertion> {
        self.assertions.iter().find(|a| !a.pass)
    }
}

pub const CAT5_ZERO_COUNT: u64 = 782;
pub const ORTHOGONAL_ZERO_COUNT: u64 = 710;

pub fn orthogonal_gammas() -> [Complex64; 4] {
    let s = FRAC_1_SQRT_2;
    [
        Complex64::new(s, s),
        Complex64::new(s, -s),
        Complex64::new(-s, -s),
        Complex64::new(-s, s),
    ]
}

pub fn nonorthogonal_gammas() -> [Complex64; 3] {
    [Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), Complex64::new(-0.5, 0.0)]
}

fn ket(label: &str) -> Vec<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    label.chars().fold(vec![one], |acc, c| {
        let q = match c {
            '0' => [one, zero],
            '1' => [zero, one],
            _ => [h, h],
        };
        // Later characters are higher qubits.
        denseoracle::kron(&acc, &q)
    })
}

/// `|0^5> + gamma |10+++>`, normalized.
pub fn orthogonal_candidate(gamma: Complex64) -> Vec<Complex64> {
    candidate("10+++", gamma)
}

/// `|0^5> + gamma |0++++>`, normalized.
pub fn nonorthogonal_candidate(gamma: Complex64) -> Vec<Complex64> {
    candidate("0++++", gamma)
}

fn candidate(label: &str, gamma: Complex64) -> Vec<Complex64> {
    let z = ket("00000");
    let o = ket(label);
    let v: Vec<Complex64> = z.iter().zip(&o).map(|(a, b)| a + gamma * b).collect();
    let n = denseoracle::norm(&v);
    v.into_iter().map(|a| a / n).collect()
}

fn check(name: impl Into<String>, pass: bool, details: impl Into<String>) -> Assertion {
    Assertion {
        name: name.into(),
        pass,
        details: details.into(),
    }
}

fn in_catp_set(x: f64) -> bool {
    [0.0, 0.25, 0.5, 1.0].iter().any(|v| (x - v).abs() <= DEFAULT_TOLERANCE)
}

pub fn cat5_certificate() -> Result<Cat5Report, SpectrumError> {
    let cat5 = denseoracle::cat_t(5);
    let mut assertions = Vec::new();

    let cat_vals = spectrum_values(&cat5)?;
    let bad = cat_vals.iter().filter(|a| !in_catp_set(a.norm())).count();
    assertions.push(check(
        "cat5 |<P>| in {0, 1/4, 1/2, 1}",
        bad == 0,
        format!("{bad} of {} Paulis outside the set", cat_vals.len()),
    ));
    let cat_spec = PauliSpectrumSummary::from_values(cat_vals, DEFAULT_TOLERANCE);
    let cat_zeros = cat_spec.zero_count();
    assertions.push(check(
        "cat5 zero count",
        cat_zeros == CAT5_ZERO_COUNT,
        format!("{cat_zeros} (expected {CAT5_ZERO_COUNT})"),
    ));
    assertions.push(check(
        "cat5 is not a stabilizer state",
        !is_stabilizer_state(&cat5)?,
        "fewer than 2^5 Paulis with |<P>| = 1",
    ));

    let mut candidates = Vec::new();
    let formula = |name: &str, state: &[Complex64], p: PauliOperator, expect: f64| -> Result<Assertion, SpectrumError> {
        let got = pauli_expectation(state, &p)?.norm();
        Ok(check(
            name,
            (got - expect).abs() <= DEFAULT_TOLERANCE,
            format!("|<P>| = {got:.12}, closed form {expect:.12}"),
        ))
    };

    for g in orthogonal_gammas() {
        let (r, th) = (g.norm(), g.arg());
        let st = orthogonal_candidate(g);
        let den = 1.0 + r * r;
        let tag = format!("orthogonal gamma={:.4}{:+.4}i", g.re, g.im);
        assertions.push(formula(
            &format!("{tag}: Z1"),
            &st,
            PauliOperator::on(5, &[('Z', 0)])?,
            ((1.0 - r * r) / den).abs(),
        )?);
        assertions.push(formula(
            &format!("{tag}: X1"),
            &st,
            PauliOperator::on(5, &[('X', 0)])?,
            (r * th.cos() / (2f64.sqrt() * den)).abs(),
        )?);
        assertions.push(formula(
            &format!("{tag}: X1Y4"),
            &st,
            PauliOperator::on(5, &[('X', 0), ('Y', 3)])?,
            (r * th.sin() / (2f64.sqrt() * den)).abs(),
        )?);
        let spec = full_spectrum(&st)?;
        let zeros = spec.zero_count();
        assertions.push(check(
            format!("{tag}: spectrum differs from cat5"),
            !spec.same_multiset(&cat_spec),
            format!("zero count {zeros} vs {cat_zeros}"),
        ));
        assertions.push(check(
            format!("{tag}: zero count"),
            zeros == ORTHOGONAL_ZERO_COUNT,
            format!("{zeros} (expected {ORTHOGONAL_ZERO_COUNT})"),
        ));
        candidates.push(CandidateZeros {
            case: "orthogonal".into(),
            gamma: [g.re, g.im],
            zero_count: zeros,
        });
    }

    for g in nonorthogonal_gammas() {
        let (r, th) = (g.norm(), g.arg());
        let st = nonorthogonal_candidate(g);
        let den = 1.0 + r * r + r * th.cos() / 2.0;
        let tag = format!("non-orthogonal gamma={:.4}{:+.4}i", g.re, g.im);
        assertions.push(formula(
            &format!("{tag}: Z2X3"),
            &st,
            PauliOperator::on(5, &[('Z', 1), ('X', 2)])?,
            (r * th.cos() / 2.0 / den).abs(),
        )?);
        assertions.push(formula(
            &format!("{tag}: Y2"),
            &st,
            PauliOperator::on(5, &[('Y', 1)])?,
            (r * th.sin() / 2.0 / den).abs(),
        )?);
        let spec = full_spectrum(&st)?;
        let zeros = spec.zero_count();
        assertions.push(check(
            format!("{tag}: spectrum differs from cat5"),
            !spec.same_multiset(&cat_spec),
            format!("zero count {zeros} vs {cat_zeros}"),
        ));
        candidates.push(CandidateZeros {
            case: "non-orthogonal".into(),
            gamma: [g.re, g.im],
            zero_count: zeros,
        });
    }

    let rank_at_least_3 = assertions.iter().all(|a| a.pass);
    Ok(Cat5Report {
        assertions,
        zero_counts: ZeroCounts {
            cat5: cat_zeros,
            candidates,
        },
        rank_at_least_3,
    })
}

/// Largest `|<s|psi>|` over all stabilizer states `s` on `n <= 4` qubits,
/// with `psi` normalized.
pub fn max_stabilizer_overlap(psi: &[Complex64]) -> Result<f64, SpectrumError> {
    let n = qubits_of(psi)?;
    let psi = normalized(psi)?;
    let states = enumerate_stabilizer_states(n)?;
    let mut best: f64 = 0.0;
    for s in states {
        let v = normalized(&s.to_dense()?)?;
        best = best.max(denseoracle::inner(&v, &psi).norm());
    }
    Ok(best)
}

/// Dense image of a gate list applied to a dense vector.
pub fn apply_gates_dense(gates: &[Gate], v: &[Complex64]) -> Result<Vec<Complex64>, SpectrumError> {
    let dg: Vec<DenseGate> = gates.iter().map(|&g| g.into()).collect();
    Ok(denseoracle::dense_apply(&dg, v, SPECTRUM_CAP.max(denseoracle::DEFAULT_CAP))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stabilizer(rng: &mut impl Rng, n: usize, depth: usize) -> StabilizerState {
        let mut s = StabilizerState::zeros_state(n);
        for _ in 0..depth {
            let q = rng.gen_range(0..n);
            let g = match rng.gen_range(0..if n > 1 { 5 } else { 3 }) {
                0 => Gate::H(q),
                1 => Gate::S(q),
                2 => Gate::X(q),
                _ => {
                    let mut r = rng.gen_range(0..n - 1);
                    if r >= q {
                        r += 1;
                    }
                    Gate::CX(q, r)
                }
            };
            s.apply(g).unwrap();
        }
        s
    }

    #[test]
    fn single_qubit_spectrum() {
        let zero = denseoracle::basis_vector(1, 0);
        let spec = full_spectrum(&zero).unwrap();
        assert_eq!(spec.total(), 4);
        assert_eq!(spec.count_near(Complex64::new(1.0, 0.0)), 2);
        assert_eq!(spec.zero_count(), 2);
        let z = PauliOperator::parse("Z").unwrap();
        assert!((pauli_expectation(&zero, &z).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn spectrum_agrees_with_direct_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let vals = spectrum_values(&v).unwrap();
        for x in 0..8u64 {
            for z in 0..8u64 {
                let p = PauliOperator {
                    x: F2Vector::from_u64(3, x),
                    z: F2Vector::from_u64(3, z),
                };
                let e = pauli_expectation(&v, &p).unwrap();
                assert!((e - vals[(x + 8 * z) as usize]).norm() < 1e-12);
                assert!(e.im.abs() < 1e-12, "Hermitian convention");
            }
        }
    }

    #[test]
    fn cat3_witness() {
        let cat3 = denseoracle::cat_t(3);
        let xx = PauliOperator::parse("XXI").unwrap();
        assert!((pauli_expectation(&cat3, &xx).unwrap() - 0.5).norm() < 1e-12);
        assert!(!is_stabilizer_state(&cat3).unwrap());
    }

    #[test]
    fn e6_and_r13_classification() {
        let e6 = crate::decomp::e_state(6);
        assert!(is_stabilizer_state(&e6).unwrap());
        let r13 = crate::codes::LinearCode::reed_muller(1, 3).unwrap();
        let v = crate::codes::code_state_dense(&r13).unwrap();
        assert!(!is_stabilizer_state(&v).unwrap());
    }

    #[test]
    fn stabilizer_counts() {
        for n in 1..=3 {
            let states = enumerate_stabilizer_states(n).unwrap();
            assert_eq!(states.len() as u64, stabilizer_state_count(n));
            assert!(states.iter().all(|s| is_stabilizer_state(s).unwrap()));
        }
        assert_eq!(stabilizer_state_count(4), 36720);
        assert!(enumerate_stabilizer_states(5).is_err());
    }

    #[test]
    fn cat3_has_no_rank_one_form() {
        let best = max_stabilizer_overlap(&denseoracle::cat_t(3)).unwrap();
        assert!(best < 1.0 - 1e-9);
    }

    #[test]
    fn cat5_certificate_passes() {
        let r = cat5_certificate().unwrap();
        assert!(r.passed(), "{:?}", r.first_failure());
        assert_eq!(r.zero_counts.cat5, 782);
        assert_eq!(r.zero_counts.candidates.len(), 7);
        assert!(r.zero_counts.candidates[..4].iter().all(|c| c.zero_count == 710));
    }

    #[test]
    fn rank2_small_examples() {
        let z2 = StabilizerState::zeros_state(2);
        let f = canonical_rank2_form(&z2, &z2).unwrap();
        assert_eq!((f.a, f.b), (0, 2));
        let ones = StabilizerState::basis_state(&F2Vector::ones(2));
        let f = canonical_rank2_form(&z2, &ones).unwrap();
        assert_eq!((f.a, f.b), (1, 1));
        let plus = StabilizerState::zeros_state(1).apply_gate(Gate::H(0)).unwrap();
        let f = canonical_rank2_form(&StabilizerState::zeros_state(1), &plus).unwrap();
        assert_eq!((f.a, f.b), (0, 0));
    }

    #[test]
    fn permutation_gates_move_qubits() {
        let order = [2usize, 0, 3, 1];
        let mut v = vec![Complex64::new(0.0, 0.0); 16];
        v[0b0100] = Complex64::new(1.0, 0.0); // qubit 2 set
        let w = apply_gates_dense(&permutation_gates(&order), &v).unwrap();
        assert!((w[0b0001] - 1.0).norm() < 1e-15);
    }

    fn check_rank2(phi1: &StabilizerState, phi2: &StabilizerState) {
        let n = phi1.num_qubits();
        let f = canonical_rank2_form(phi1, phi2).unwrap();
        let d1 = apply_gates_dense(&f.gates, &phi1.to_dense().unwrap()).unwrap();
        let d2 = apply_gates_dense(&f.gates, &phi2.to_dense().unwrap()).unwrap();
        let zero = denseoracle::basis_vector(n, 0);
        let c1 = f.c1.to_complex();
        assert!(d1.iter().zip(&zero).all(|(a, b)| (a - c1 * b).norm() < 1e-10));
        let target = f.target(n).to_dense().unwrap();
        assert!(d2.iter().zip(&target).all(|(a, b)| (a - f.c2 * b).norm() < 1e-10));
        let overlap = denseoracle::inner(&phi1.to_dense().unwrap(), &phi2.to_dense().unwrap());
        assert_eq!(f.a == 0, overlap.norm() > 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn rank2_form_postconditions(seed in any::<u64>(), n in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi1 = random_stabilizer(&mut rng, n, 4 * n);
            let phi2 = if rng.gen_bool(0.2) {
                phi1.apply_gate(Gate::X(0)).unwrap()
            } else {
                random_stabilizer(&mut rng, n, 4 * n)
            };
            check_rank2(&phi1, &phi2);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_stabilizers_have_stabilizer_spectra(seed in any::<u64>(), n in 1usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_stabilizer(&mut rng, n, 6 * n);
            let spec = full_spectrum(&s).unwrap();
            prop_assert_eq!(spec.total(), 1u64 << (2 * n));
            prop_assert!(spec.buckets.iter().all(|(v, _)| [0.0, 1.0, -1.0].iter().any(|t| (v - t).norm() < 1e-9)));
            prop_assert!(is_stabilizer_state(&s).unwrap());
        }
    }
}
