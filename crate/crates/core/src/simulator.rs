//! Strong simulation of Clifford + T and Clifford + RZ circuits.
//!
//! Every non-Clifford rotation on qubit `q` is replaced by `CX(q -> a)` onto a
//! fresh ancilla `a` prepared in `|R_theta>` and later projected onto `<0|`:
//! `U|0^n> = 2^{m/2} (I (x) <0^m|) U' |0^n>|R_{theta_1} ... R_{theta_m}>`.
//! The magic register is expanded into stabilizer terms and each term is
//! evolved through the Clifford circuit `U'`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chains::{self, ChainError};
use crate::decomp::{self, compensated_sum, Decomposition, DecompError};
use crate::denseoracle::{self, DenseGate};
use crate::f2linalg::F2Vector;
use crate::stabstate::{Gate, Scalar, StabilizerState, StateError};

pub const DEFAULT_MARGINAL_CAP: usize = 20;
pub const DEFAULT_MAX_TERMS: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bit string has {found} bits, circuit has {expected} qubits")]
    Width { expected: usize, found: usize },
    #[error("marginal leaves {free} qubits to sum over (cap {cap}); use a smaller marginal, approximate norm estimation is not implemented")]
    Marginal { free: usize, cap: usize },
    #[error("bad marginal: {0}")]
    MarginalSpec(String),
    #[error("magic-state decomposition needs {terms} terms, above the cap of {cap}")]
    TermCap { terms: u64, cap: u64 },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Dense(#[from] denseoracle::DenseError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum CircuitGate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    CX(usize, usize),
    CZ(usize, usize),
    T(usize),
    Tdg(usize),
    /// `diag(1, e^{i theta})`
    RZ(usize, f64),
}

impl CircuitGate {
    pub fn qubits(&self) -> Vec<usize> {
        use CircuitGate::*;
        match *self {
            H(q) | S(q) | Sdg(q) | X(q) | Y(q) | Z(q) | T(q) | Tdg(q) | RZ(q, _) => vec![q],
            CX(a, b) | CZ(a, b) => vec![a, b],
        }
    }

    fn dense(&self) -> DenseGate {
        use CircuitGate::*;
        match *self {
            H(q) => DenseGate::H(q),
            S(q) => DenseGate::S(q),
            Sdg(q) => DenseGate::Sdg(q),
            X(q) => DenseGate::X(q),
            Y(q) => DenseGate::Y(q),
            Z(q) => DenseGate::Z(q),
            CX(a, b) => DenseGate::CX(a, b),
            CZ(a, b) => DenseGate::CZ(a, b),
            T(q) => DenseGate::T(q),
            Tdg(q) => DenseGate::Tdg(q),
            RZ(q, t) => DenseGate::RZ(q, t),
        }
    }
}

impl fmt::Display for CircuitGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use CircuitGate::*;
        match *self {
            H(q) => write!(f, "H {q}"),
            S(q) => write!(f, "S {q}"),
            Sdg(q) => write!(f, "Sdg {q}"),
            X(q) => write!(f, "X {q}"),
            Y(q) => write!(f, "Y {q}"),
            Z(q) => write!(f, "Z {q}"),
            CX(a, b) => write!(f, "CX {a} {b}"),
            CZ(a, b) => write!(f, "CZ {a} {b}"),
            T(q) => write!(f, "T {q}"),
            Tdg(q) => write!(f, "Tdg {q}"),
            RZ(q, t) => write!(f, "RZ({t:?}) {q}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantumCircuit {
    pub n: usize,
    pub gates: Vec<CircuitGate>,
}

impl QuantumCircuit {
    pub fn new(n: usize) -> Self {
        QuantumCircuit { n, gates: Vec::new() }
    }

    pub fn push(&mut self, g: CircuitGate) -> Result<(), SimError> {
        let qs = g.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= self.n) {
            return Err(StateError::BadQubit { index: q, n: self.n }.into());
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(StateError::RepeatedQubit(qs[0]).into());
        }
        if let CircuitGate::RZ(_, t) = g {
            if !t.is_finite() {
                return Err(SimError::Parse { line: 0, msg: "non-finite angle".into() });
            }
        }
        self.gates.push(g);
        Ok(())
    }

    pub fn t_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, CircuitGate::T(_) | CircuitGate::Tdg(_)))
            .count()
    }

    pub fn rotation_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, CircuitGate::RZ(..))).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("qubits {}\n", self.n);
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }
}

fn parse_index(tok: Option<&str>, line: usize) -> Result<usize, SimError> {
    let tok = tok.ok_or_else(|| SimError::Parse { line, msg: "missing qubit index".into() })?;
    tok.parse()
        .map_err(|_| SimError::Parse { line, msg: format!("bad qubit index {tok:?}") })
}

/// Parses `qubits N` followed by one gate per line; `#` starts a comment.
pub fn parse_circuit(text: &str) -> Result<QuantumCircuit, SimError> {
    let mut circuit: Option<QuantumCircuit> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let name = toks.next().expect("nonempty");
        let Some(c) = circuit.as_mut() else {
            if !name.eq_ignore_ascii_case("qubits") {
                return Err(SimError::Parse { line, msg: "expected `qubits N` header".into() });
            }
            circuit = Some(QuantumCircuit::new(parse_index(toks.next(), line)?));
            if toks.next().is_some() {
                return Err(SimError::Parse { line, msg: "trailing tokens".into() });
            }
            continue;
        };
        let upper = name.to_ascii_uppercase();
        let gate = if let Some(rest) = upper.strip_prefix("RZ(") {
            let angle = rest
                .strip_suffix(')')
                .ok_or_else(|| SimError::Parse { line, msg: format!("bad rotation {name:?}") })?;
            let theta: f64 = angle
                .parse()
                .map_err(|_| SimError::Parse { line, msg: format!("bad angle {angle:?}") })?;
            if !theta.is_finite() {
                return Err(SimError::Parse { line, msg: "non-finite angle".into() });
            }
            CircuitGate::RZ(parse_index(toks.next(), line)?, theta)
        } else {
            let q = parse_index(toks.next(), line)?;
            match upper.as_str() {
                "H" => CircuitGate::H(q),
                "S" => CircuitGate::S(q),
                "SDG" | "S†" => CircuitGate::Sdg(q),
                "X" => CircuitGate::X(q),
                "Y" => CircuitGate::Y(q),
                "Z" => CircuitGate::Z(q),
                "T" => CircuitGate::T(q),
                "TDG" | "T†" => CircuitGate::Tdg(q),
                "CX" | "CNOT" => CircuitGate::CX(q, parse_index(toks.next(), line)?),
                "CZ" => CircuitGate::CZ(q, parse_index(toks.next(), line)?),
                _ => return Err(SimError::Parse { line, msg: format!("unknown gate {name:?}") }),
            }
        };
        if toks.next().is_some() {
            return Err(SimError::Parse { line, msg: "trailing tokens".into() });
        }
        c.push(gate).map_err(|e| SimError::Parse { line, msg: e.to_string() })?;
    }
    circuit.ok_or(SimError::Parse { line: 0, msg: "empty circuit".into() })
}

/// `U|0^n>` by dense statevector simulation.
pub fn simulate_dense(c: &QuantumCircuit, cap: usize) -> Result<Vec<Complex64>, SimError> {
    let gates: Vec<DenseGate> = c.gates.iter().map(|g| g.dense()).collect();
    Ok(denseoracle::dense_apply(&gates, &denseoracle::basis_vector(c.n, 0), cap)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum MagicKind {
    None,
    T,
    R(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GadgetizedCircuit {
    pub n: usize,
    pub m: usize,
    /// Clifford gates on `n + m` qubits; ancilla `i` is qubit `n + i`.
    pub clifford: Vec<Gate>,
    /// Angle of the `|R_theta>` state consumed by each ancilla.
    pub angles: Vec<f64>,
    pub magic_kind: MagicKind,
    /// Global phase from ancillas prepared as `X|R_{-theta}>`.
    pub phase: Complex64,
}

fn clifford_rotation(q: usize, k: u8) -> Option<Gate> {
    match k % 4 {
        0 => None,
        1 => Some(Gate::S(q)),
        2 => Some(Gate::Z(q)),
        _ => Some(Gate::Sdg(q)),
    }
}

pub fn gadgetize(c: &QuantumCircuit) -> GadgetizedCircuit {
    let mut angles = Vec::new();
    let mut flips = Vec::new();
    let mut phase = Complex64::new(1.0, 0.0);
    let mut pending: Vec<(usize, Option<Gate>)> = Vec::new();
    // First pass: count ancillas so the register size is known.
    for g in &c.gates {
        let rot = match *g {
            CircuitGate::T(q) => Some((q, FRAC_PI_4)),
            CircuitGate::Tdg(q) => Some((q, -FRAC_PI_4)),
            CircuitGate::RZ(q, t) => Some((q, t)),
            _ => None,
        };
        match rot {
            Some((q, t)) => match decomp::quarter_turns(t) {
                Some(k) => pending.push((0, clifford_rotation(q, k))),
                None => {
                    // |R_t> = e^{it} X |R_{-t}>, so negative angles share
                    // the register of their positive partner.
                    if t < 0.0 {
                        flips.push(angles.len());
                        phase *= Complex64::from_polar(1.0, t);
                    }
                    angles.push(t.abs());
                    pending.push((angles.len(), None));
                }
            },
            None => pending.push((0, None)),
        }
    }
    let n = c.n;
    let mut clifford: Vec<Gate> = flips.iter().map(|&a| Gate::X(n + a)).collect();
    for (g, (anc, rot)) in c.gates.iter().zip(pending) {
        if anc > 0 {
            clifford.push(Gate::CX(g.qubits()[0], n + anc - 1));
            continue;
        }
        if let Some(r) = rot {
            clifford.push(r);
            continue;
        }
        clifford.push(match *g {
            CircuitGate::H(q) => Gate::H(q),
            CircuitGate::S(q) => Gate::S(q),
            CircuitGate::Sdg(q) => Gate::Sdg(q),
            CircuitGate::X(q) => Gate::X(q),
            CircuitGate::Y(q) => Gate::Y(q),
            CircuitGate::Z(q) => Gate::Z(q),
            CircuitGate::CX(a, b) => Gate::CX(a, b),
            CircuitGate::CZ(a, b) => Gate::CZ(a, b),
            // Clifford-angle rotation by zero.
            _ => continue,
        });
    }
    let magic_kind = if angles.is_empty() {
        MagicKind::None
    } else if angles.iter().all(|&t| t == FRAC_PI_4) {
        MagicKind::T
    } else {
        MagicKind::R(angles.clone())
    };
    GadgetizedCircuit {
        n,
        m: angles.len(),
        clifford,
        angles,
        magic_kind,
        phase,
    }
}

impl GadgetizedCircuit {
    /// `2^{m/2} (I (x) <0^m|) U' |0^n>|magic>` by dense simulation.
    pub fn dense_output(&self, cap: usize) -> Result<Vec<Complex64>, SimError> {
        let mut v = denseoracle::basis_vector(self.n, 0);
        for &t in &self.angles {
            v = denseoracle::kron(&v, &denseoracle::qubit(denseoracle::Qubit::R(t)));
        }
        let gates: Vec<DenseGate> = self.clifford.iter().map(|&g| g.into()).collect();
        let mut v = denseoracle::dense_apply(&gates, &v, cap)?;
        for q in (self.n..self.n + self.m).rev() {
            v = denseoracle::postselect(&v, q + 1, q, false);
        }
        let s = self.phase * 2f64.powf(self.m as f64 / 2.0);
        Ok(v.into_iter().map(|a| a * s).collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// Cheapest planned construction per angle group.
    #[default]
    Auto,
    /// Chain constructions only (same planners as `Auto`).
    Chain,
    /// Product of two-term single-qubit expansions, `2^m` terms.
    Naive,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "chain" => Ok(Strategy::Chain),
            "naive" => Ok(Strategy::Naive),
            _ => Err(format!("unknown strategy {s:?}")),
        }
    }
}

/// Ancillas sharing one angle, decomposed together.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagicGroup {
    pub angle: f64,
    pub ancillas: Vec<usize>,
    pub plan: String,
    pub terms: u64,
}

fn is_t(angle: f64) -> bool {
    angle == FRAC_PI_4
}

fn is_tdg(angle: f64) -> bool {
    angle == -FRAC_PI_4
}

/// Groups ancillas by angle, in order of first appearance.
pub fn magic_groups(angles: &[f64], strategy: Strategy) -> Result<Vec<MagicGroup>, SimError> {
    let mut order: Vec<u64> = Vec::new();
    let mut by: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &t) in angles.iter().enumerate() {
        let key = t.to_bits();
        if !by.contains_key(&key) {
            order.push(key);
        }
        by.entry(key).or_default().push(i);
    }
    order
        .into_iter()
        .map(|key| {
            let angle = f64::from_bits(key);
            let ancillas = by.remove(&key).expect("present");
            let c = ancillas.len();
            let (plan, terms) = match strategy {
                Strategy::Naive => (format!("product of {c} two-term qubits"), 1u64.checked_shl(c as u32).unwrap_or(u64::MAX)),
                _ if is_t(angle) || is_tdg(angle) => {
                    let p = chains::t_power_plan(c)?;
                    let tag = if is_tdg(angle) { "conjugate of " } else { "" };
                    (format!("{tag}{p}"), p.terms())
                }
                _ => {
                    let p = chains::r_power_plan(angle, c)?;
                    (p.to_string(), p.terms())
                }
            };
            Ok(MagicGroup { angle, ancillas, plan, terms })
        })
        .collect()
}

fn equatorial(theta: f64) -> Decomposition {
    let mut d = Decomposition::empty(1);
    d.push(Scalar::exact(0, -1), StabilizerState::zeros_state(1));
    d.push(
        Scalar::new(0, -1, Complex64::from_polar(1.0, theta)),
        StabilizerState::basis_state(&F2Vector::ones(1)),
    );
    d
}

fn group_decomposition(g: &MagicGroup, strategy: Strategy) -> Result<Decomposition, SimError> {
    let c = g.ancillas.len();
    Ok(match strategy {
        Strategy::Naive => {
            let q = equatorial(g.angle);
            (1..c).fold(q.clone(), |acc, _| acc.tensor(&q))
        }
        _ if is_t(g.angle) => chains::t_power(c)?,
        _ if is_tdg(g.angle) => chains::t_power(c)?.conjugate(),
        _ => chains::r_power(g.angle, c)?,
    })
}

/// `|R_{theta_1}> ... |R_{theta_m}>` with ancilla `i` on qubit `i`.
pub fn magic_decomposition(
    angles: &[f64],
    strategy: Strategy,
    max_terms: u64,
) -> Result<(Decomposition, Vec<MagicGroup>), SimError> {
    let groups = magic_groups(angles, strategy)?;
    let planned = groups.iter().fold(1u64, |a, g| a.saturating_mul(g.terms));
    if planned > max_terms {
        return Err(SimError::TermCap { terms: planned, cap: max_terms });
    }
    let mut d = Decomposition::single(StabilizerState::zeros_state(0));
    let mut layout = Vec::new();
    for g in &groups {
        d = d.tensor(&group_decomposition(g, strategy)?);
        layout.extend(g.ancillas.iter().copied());
    }
    let mut perm = vec![0; layout.len()];
    for (pos, &a) in layout.iter().enumerate() {
        perm[a] = pos;
    }
    Ok((d.permute_qubits(&perm), groups))
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub strategy: Strategy,
    pub max_terms: u64,
    pub marginal_cap: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            strategy: Strategy::Auto,
            max_terms: DEFAULT_MAX_TERMS,
            marginal_cap: DEFAULT_MARGINAL_CAP,
        }
    }
}

/// Gadgetized circuit with its magic-register expansion, reusable across
/// many amplitude queries.
pub struct Prepared {
    pub gadgets: GadgetizedCircuit,
    pub magic: Decomposition,
    pub groups: Vec<MagicGroup>,
}

pub fn prepare(c: &QuantumCircuit, opts: &SimOptions) -> Result<Prepared, SimError> {
    let gadgets = gadgetize(c);
    let (magic, groups) = magic_decomposition(&gadgets.angles, opts.strategy, opts.max_terms)?;
    Ok(Prepared { gadgets, magic, groups })
}

impl Prepared {
    fn evolved(&self, t: &decomp::Term) -> StabilizerState {
        let mut s = StabilizerState::zeros_state(self.gadgets.n).tensor(&t.state);
        s.apply_all(&self.gadgets.clifford).expect("gadgetized gates are in range");
        s
    }

    fn prefactor(&self) -> Scalar {
        Scalar::new(0, self.gadgets.m as i32, self.gadgets.phase)
    }

    /// `<x|U|0^n>`.
    pub fn amplitude(&self, x: &F2Vector) -> Result<Complex64, SimError> {
        let n = self.gadgets.n;
        if x.len() != n {
            return Err(SimError::Width { expected: n, found: x.len() });
        }
        let full = x.concat(&F2Vector::zeros(self.gadgets.m));
        let parts: Vec<Complex64> = self
            .magic
            .terms()
            .par_iter()
            .map(|t| {
                let s = self.evolved(t);
                t.coeff.to_complex() * s.amplitude(&full).expect("width checked")
            })
            .collect();
        Ok(self.prefactor().to_complex() * compensated_sum(parts))
    }

    /// Probability that the qubits in `fixed` read out the paired bits.
    pub fn probability(&self, fixed: &[(usize, bool)], cap: usize) -> Result<f64, SimError> {
        let n = self.gadgets.n;
        let mut seen = vec![false; n];
        for &(q, _) in fixed {
            if q >= n || seen[q] {
                return Err(SimError::MarginalSpec(format!("qubit {q} out of range or repeated")));
            }
            seen[q] = true;
        }
        let free = n - fixed.len();
        if free > cap {
            return Err(SimError::Marginal { free, cap });
        }
        // Postselect from the highest index down so lower indices stay put.
        let mut cuts: Vec<(usize, bool)> = fixed.to_vec();
        cuts.extend((n..n + self.gadgets.m).map(|q| (q, false)));
        cuts.sort_by(|a, b| b.0.cmp(&a.0));
        const CHUNK: usize = 64;
        let partials: Vec<Vec<Complex64>> = self
            .magic
            .terms()
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![Complex64::new(0.0, 0.0); 1 << free];
                for t in chunk {
                    let mut s = self.evolved(t);
                    for &(q, b) in &cuts {
                        s = s.postselect(q, b).expect("in range");
                    }
                    s.accumulate_dense(t.coeff.to_complex(), &mut acc);
                }
                acc
            })
            .collect();
        let mut total = vec![Complex64::new(0.0, 0.0); 1 << free];
        for p in partials {
            for (a, b) in total.iter_mut().zip(p) {
                *a += b;
            }
        }
        let pre = self.prefactor().norm_sqr();
        Ok(pre * total.iter().map(|a| a.norm_sqr()).sum::<f64>())
    }

    pub fn term_count(&self) -> usize {
        self.magic.len()
    }
}

pub fn amplitude(c: &QuantumCircuit, x: &F2Vector, opts: &SimOptions) -> Result<Complex64, SimError> {
    prepare(c, opts)?.amplitude(x)
}

pub fn probability(c: &QuantumCircuit, fixed: &[(usize, bool)], opts: &SimOptions) -> Result<f64, SimError> {
    prepare(c, opts)?.probability(fixed, opts.marginal_cap)
}

/// Parses `q=b,q=b,...` (e.g. `0=1,3=0`) or a bit string with `_` for
/// unmeasured qubits (e.g. `1__0`, character `i` is qubit `i`).
pub fn parse_marginal(spec: &str, n: usize) -> Result<Vec<(usize, bool)>, SimError> {
    let spec = spec.trim();
    let bit = |c: &str| match c {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(SimError::MarginalSpec(format!("bad bit {c:?}"))),
    };
    if spec.contains('=') {
        return spec
            .split(',')
            .map(|p| {
                let (q, b) = p
                    .split_once('=')
                    .ok_or_else(|| SimError::MarginalSpec(format!("bad pair {p:?}")))?;
                let q: usize = q.trim().parse().map_err(|_| SimError::MarginalSpec(format!("bad qubit {q:?}")))?;
                Ok((q, bit(b.trim())?))
            })
            .collect();
    }
    if spec.chars().count() != n {
        return Err(SimError::Width { expected: n, found: spec.chars().count() });
    }
    spec.chars()
        .enumerate()
        .filter(|(_, c)| *c != '_')
        .map(|(q, c)| Ok((q, bit(&c.to_string())?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostReport {
    pub n: usize,
    pub m: usize,
    pub t_count: usize,
    pub rotation_count: usize,
    pub terms: u64,
    /// `log2(terms) / m`, absent when `m = 0`.
    pub exponent: Option<f64>,
    pub groups: Vec<MagicGroup>,
}

pub fn cost_report(c: &QuantumCircuit, strategy: Strategy) -> Result<CostReport, SimError> {
    let g = gadgetize(c);
    let groups = magic_groups(&g.angles, strategy)?;
    let terms = groups.iter().fold(1u64, |a, g| a.saturating_mul(g.terms));
    Ok(CostReport {
        n: c.n,
        m: g.m,
        t_count: c.t_count(),
        rotation_count: c.rotation_count(),
        terms,
        exponent: (g.m > 0).then(|| (terms as f64).log2() / g.m as f64),
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random Clifford + T circuit with exactly `t` T-type gates.
    fn random_clifford_t(rng: &mut impl Rng, n: usize, cliffords: usize, t: usize, with_rz: bool) -> QuantumCircuit {
        let mut c = QuantumCircuit::new(n);
        for q in 0..n {
            c.push(CircuitGate::H(q)).expect("in range");
        }
        let total = cliffords + t;
        let mut t_left = t;
        for i in 0..total {
            let q = rng.gen_range(0..n);
            let place_t = t_left > 0 && (rng.gen_range(0..total - i) < t_left);
            let g = if place_t {
                t_left -= 1;
                if with_rz && rng.gen_bool(0.5) {
                    CircuitGate::RZ(q, [0.3, -1.1, 2.0][rng.gen_range(0..3)])
                } else if rng.gen_bool(0.8) {
                    CircuitGate::T(q)
                } else {
                    CircuitGate::Tdg(q)
                }
            } else {
                let r = if n > 1 {
                    let mut r = rng.gen_range(0..n - 1);
                    if r >= q {
                        r += 1;
                    }
                    r
                } else {
                    q
                };
                match rng.gen_range(0..if n > 1 { 6 } else { 4 }) {
                    0 => CircuitGate::H(q),
                    1 => CircuitGate::S(q),
                    2 => CircuitGate::Sdg(q),
                    3 => CircuitGate::X(q),
                    4 => CircuitGate::CX(q, r),
                    _ => CircuitGate::CZ(q, r),
                }
            };
            c.push(g).expect("in range");
        }
        c
    }

    fn bits(s: &str) -> F2Vector {
        F2Vector::parse(s).unwrap()
    }

    #[test]
    fn parse_examples() {
        let c = parse_circuit("qubits 2\nH 0\nCX 0 1").unwrap();
        assert_eq!(c.gates, vec![CircuitGate::H(0), CircuitGate::CX(0, 1)]);
        let c = parse_circuit("# header\nqubits 1\nT 0 # magic\n").unwrap();
        assert_eq!(c.t_count(), 1);
        let c = parse_circuit("qubits 2\nRZ(0.785398163) 1").unwrap();
        assert_eq!(c.rotation_count(), 1);
        assert!(parse_circuit("qubits 2\nH 2").is_err());
        assert!(parse_circuit("qubits 2\nRZ(nan) 0").is_err());
        assert!(parse_circuit("qubits 2\nFOO 0").is_err());
        assert!(parse_circuit("H 0").is_err());
        let round = parse_circuit(&c.to_text()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn bell_amplitudes_and_probabilities() {
        let c = parse_circuit("qubits 2\nH 0\nCX 0 1").unwrap();
        let o = SimOptions::default();
        let a = amplitude(&c, &bits("00"), &o).unwrap();
        assert!((a - Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
        assert!((probability(&c, &[(0, false)], &o).unwrap() - 0.5).abs() < 1e-14);
        let p = probability(&c, &[(0, true), (1, true)], &o).unwrap();
        assert!((p - 0.5).abs() < 1e-14);
        assert_eq!(cost_report(&c, Strategy::Auto).unwrap().terms, 1);
    }

    #[test]
    fn single_t_gadget() {
        let c = parse_circuit("qubits 1\nH 0\nT 0\nH 0").unwrap();
        let g = gadgetize(&c);
        assert_eq!((g.m, &g.magic_kind), (1, &MagicKind::T));
        let want = (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, FRAC_PI_4)) / 2.0;
        let a = amplitude(&c, &bits("0"), &SimOptions::default()).unwrap();
        assert!((a - want).norm() < 1e-14);
        let g1 = gadgetize(&parse_circuit("qubits 1\nH 0\nT 0").unwrap());
        let d = g1.dense_output(8).unwrap();
        let e = simulate_dense(&parse_circuit("qubits 1\nH 0\nT 0").unwrap(), 8).unwrap();
        assert!(denseoracle::max_diff(&d, &e) < 1e-14);
    }

    #[test]
    fn clifford_angles_become_gates() {
        let c = parse_circuit("qubits 1\nH 0\nRZ(1.5707963267948966) 0\nRZ(3.141592653589793) 0").unwrap();
        let g = gadgetize(&c);
        assert_eq!(g.m, 0);
        assert_eq!(g.magic_kind, MagicKind::None);
        assert!(denseoracle::max_diff(&g.dense_output(8).unwrap(), &simulate_dense(&c, 8).unwrap()) < 1e-14);
    }

    #[test]
    fn mixed_angles_keep_order() {
        let c = parse_circuit("qubits 2\nH 0\nH 1\nRZ(0.3) 0\nRZ(-1.1) 1\nRZ(0.3) 1\nT 0\nTdg 1").unwrap();
        let g = gadgetize(&c);
        assert_eq!(g.angles, vec![0.3, 1.1, 0.3, FRAC_PI_4, FRAC_PI_4]);
        assert!(matches!(g.magic_kind, MagicKind::R(_)));
        assert!(denseoracle::max_diff(&g.dense_output(10).unwrap(), &simulate_dense(&c, 10).unwrap()) < 1e-12);
        let groups = magic_groups(&g.angles, Strategy::Auto).unwrap();
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].ancillas, vec![0, 2]);
        let (magic, _) = magic_decomposition(&g.angles, Strategy::Auto, DEFAULT_MAX_TERMS).unwrap();
        let want = g
            .angles
            .iter()
            .fold(vec![Complex64::new(1.0, 0.0)], |v, &t| denseoracle::kron(&v, &denseoracle::qubit(denseoracle::Qubit::R(t))));
        assert!(denseoracle::max_diff(&magic.to_dense().unwrap(), &want) < 1e-12);
    }

    #[test]
    fn cost_exponents() {
        let mut c = QuantumCircuit::new(1);
        for _ in 0..10 {
            c.push(CircuitGate::T(0)).unwrap();
        }
        let r = cost_report(&c, Strategy::Auto).unwrap();
        assert_eq!(r.terms, 18);
        assert!(r.exponent.unwrap() <= 0.417);
        let mut c6 = QuantumCircuit::new(1);
        for _ in 0..6 {
            c6.push(CircuitGate::T(0)).unwrap();
        }
        let r = cost_report(&c6, Strategy::Auto).unwrap();
        assert_eq!(r.terms, 6);
        assert!((r.exponent.unwrap() - 6f64.log2() / 6.0).abs() < 1e-12);
        assert_eq!(cost_report(&c6, Strategy::Naive).unwrap().terms, 64);
    }

    #[test]
    fn marginal_specs() {
        assert_eq!(parse_marginal("0=1,2=0", 3).unwrap(), vec![(0, true), (2, false)]);
        assert_eq!(parse_marginal("1_0", 3).unwrap(), vec![(0, true), (2, false)]);
        assert!(parse_marginal("1_", 3).is_err());
        let c = parse_circuit("qubits 22\nH 0").unwrap();
        assert!(matches!(probability(&c, &[(0, false)], &SimOptions::default()), Err(SimError::Marginal { .. })));
    }

    #[test]
    fn term_cap_is_enforced() {
        let mut c = QuantumCircuit::new(1);
        for _ in 0..12 {
            c.push(CircuitGate::T(0)).unwrap();
        }
        let o = SimOptions { strategy: Strategy::Naive, max_terms: 100, ..Default::default() };
        assert!(matches!(prepare(&c, &o), Err(SimError::TermCap { .. })));
    }

    #[test]
    fn random_circuits_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let c = random_clifford_t(&mut rng, 6, 30, 8, false);
            let dense = simulate_dense(&c, 20).unwrap();
            let p = prepare(&c, &SimOptions::default()).unwrap();
            assert!(p.term_count() <= 18);
            for x in [0usize, 5, 63] {
                let a = p.amplitude(&F2Vector::from_u64(6, x as u64)).unwrap();
                assert!((a - dense[x]).norm() < 1e-8);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn gadgets_are_sound(seed in any::<u64>(), n in 1usize..=5, t in 0usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_clifford_t(&mut rng, n, 12, t, true);
            let g = gadgetize(&c);
            let got = g.dense_output(16).unwrap();
            let want = simulate_dense(&c, 16).unwrap();
            prop_assert!(denseoracle::max_diff(&got, &want) < 1e-10);
        }

        #[test]
        fn probabilities_match_dense(seed in any::<u64>(), n in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_clifford_t(&mut rng, n, 15, 4, false);
            let dense = simulate_dense(&c, 16).unwrap();
            let mut fixed: Vec<(usize, bool)> = Vec::new();
            for q in 0..n {
                if rng.gen_bool(0.6) {
                    fixed.push((q, rng.gen_bool(0.5)));
                }
            }
            let want: f64 = dense
                .iter()
                .enumerate()
                .filter(|(i, _)| fixed.iter().all(|&(q, b)| ((i >> q) & 1 == 1) == b))
                .map(|(_, a)| a.norm_sqr())
                .sum();
            let got = probability(&c, &fixed, &SimOptions::default()).unwrap();
            prop_assert!((got - want).abs() < 1e-8);
        }

        #[test]
        fn term_order_does_not_matter(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_clifford_t(&mut rng, 4, 16, 5, false);
            let p = prepare(&c, &SimOptions::default()).unwrap();
            let x = F2Vector::from_u64(4, rng.gen_range(0..16));
            let a = p.amplitude(&x).unwrap();
            let mut terms: Vec<(Scalar, StabilizerState)> =
                p.magic.terms().iter().map(|t| (t.coeff, t.state.clone())).collect();
            terms.reverse();
            let rev = Prepared {
                gadgets: p.gadgets.clone(),
                magic: Decomposition::from_terms(p.magic.num_qubits(), terms).unwrap(),
                groups: p.groups.clone(),
            };
            prop_assert!((rev.amplitude(&x).unwrap() - a).norm() < 1e-12);
        }
    }
}
