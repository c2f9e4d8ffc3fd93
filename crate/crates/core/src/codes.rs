//! Magic code states `|L^> = 2^{-k/2} sum_{x in L} |x^>`, where `|0^> = |T>`
//! and `|1^> = |T_perp>`, for binary linear codes `L`.
//!
//! In the computational basis `|L^> = 2^{(k-m)/2} sum_{u in L_perp} e^{i pi |u|/4} |u>`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::chains;
use crate::decomp::{Decomposition, DecompError};
use crate::denseoracle::{self, Qubit};
use crate::f2linalg::{affine_space_members, F2Error, F2Matrix, F2Vector};
use crate::stabstate::{Gate, Scalar, StabilizerState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("generator rows are dependent (rank {rank} < {rows})")]
    NotFullRank { rank: usize, rows: usize },
    #[error("bad Reed-Muller parameters a={a}, b={b}")]
    ReedMuller { a: usize, b: usize },
    #[error("bound needs k < m/2, got k={k}, m={m}")]
    Dimension { k: usize, m: usize },
    #[error("stabilizer-rank bound must be at least 1")]
    Chi,
    #[error("projection constant vanishes; generator is not in standard form")]
    ZeroConstant,
    #[error(transparent)]
    F2(#[from] F2Error),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Dense(#[from] denseoracle::DenseError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearCode {
    g: F2Matrix,
}

impl LinearCode {
    pub fn new(g: F2Matrix) -> Result<Self, CodeError> {
        let rank = g.rank();
        if rank != g.nrows() {
            return Err(CodeError::NotFullRank { rank, rows: g.nrows() });
        }
        Ok(LinearCode { g })
    }

    /// Parses the one-row-per-line generator format.
    pub fn parse(text: &str) -> Result<Self, CodeError> {
        Self::new(F2Matrix::parse_text(text)?)
    }

    pub fn repetition(m: usize) -> Self {
        Self::new(F2Matrix::from_rows(m, vec![F2Vector::ones(m)]).expect("shape")).expect("rank 1")
    }

    /// Evaluations of all monomials of degree `<= a` in `b` variables at the
    /// points `0..2^b` (bit `i` of a point is variable `i`).
    pub fn reed_muller(a: usize, b: usize) -> Result<Self, CodeError> {
        if a > b || b > 16 {
            return Err(CodeError::ReedMuller { a, b });
        }
        let m = 1usize << b;
        let rows = (0u32..(1 << b))
            .filter(|mono| mono.count_ones() as usize <= a)
            .map(|mono| F2Vector::from_bits((0..m as u32).map(|p| p & mono == mono)))
            .collect();
        Self::new(F2Matrix::from_rows(m, rows)?)
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn k(&self) -> usize {
        self.g.nrows()
    }

    pub fn generator(&self) -> &F2Matrix {
        &self.g
    }

    pub fn dual(&self) -> LinearCode {
        let basis = self.g.kernel_basis();
        LinearCode {
            g: F2Matrix::from_rows(self.m(), basis).expect("shape"),
        }
    }

    pub fn codewords(&self) -> Vec<F2Vector> {
        affine_space_members(self.g.rows(), &F2Vector::zeros(self.m()))
            .expect("independent rows")
            .collect()
    }

    pub fn same_code(&self, other: &LinearCode) -> bool {
        self.g.same_row_space(&other.g)
    }
}

/// `|L^>` from its definition as a sum of magic-basis product states.
pub fn code_state_dense(code: &LinearCode) -> Result<Vec<Complex64>, CodeError> {
    let m = code.m();
    denseoracle::check_cap(m, denseoracle::DEFAULT_CAP)?;
    let t = denseoracle::qubit(Qubit::T);
    let tp = denseoracle::qubit(Qubit::TPerp);
    let mut out = vec![Complex64::new(0.0, 0.0); 1 << m];
    for x in code.codewords() {
        let mut v = vec![Complex64::new(1.0, 0.0)];
        for i in 0..m {
            v = denseoracle::kron(&v, if x.get(i) { &tp } else { &t });
        }
        for (o, a) in out.iter_mut().zip(&v) {
            *o += a;
        }
    }
    let s = 2f64.powf(-(code.k() as f64) / 2.0);
    out.iter_mut().for_each(|a| *a *= s);
    Ok(out)
}

/// `sum_{u in L_perp} e^{i pi |u|/4} |u>`, unnormalized.
pub fn dual_phase_dense(code: &LinearCode) -> Result<Vec<Complex64>, CodeError> {
    let m = code.m();
    denseoracle::check_cap(m, denseoracle::DEFAULT_CAP)?;
    let mut out = vec![Complex64::new(0.0, 0.0); 1 << m];
    for u in code.dual().codewords() {
        out[u.to_u64() as usize] = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * u.weight() as f64);
    }
    Ok(out)
}

/// `true` when every word of the dual of `R(a, b)` has weight divisible by 8
/// is promised by `ceil(b / (b - a - 1)) >= 4`.
pub fn rm_stabilizer_condition(a: usize, b: usize) -> bool {
    if a + 1 >= b {
        return false;
    }
    let d = b - a - 1;
    b.div_ceil(d) >= 4
}

/// The affine set `offset + span(basis)` carrying `sum i^{...}` with a
/// uniform phase, as a stabilizer state.
fn uniform_state(offset: F2Vector, basis: Vec<F2Vector>) -> StabilizerState {
    let k = basis.len();
    StabilizerState::from_parts(offset, basis, vec![0; k], &[], Scalar::ONE).expect("independent")
}

/// Basis of the smallest affine space containing `points`, if the points
/// fill it exactly.
fn as_affine_space(m: usize, points: &[F2Vector]) -> Option<(F2Vector, Vec<F2Vector>)> {
    let first = points.first()?.clone();
    let diffs: Vec<F2Vector> = points.iter().map(|p| p.xor(&first)).collect();
    let basis = F2Matrix::from_rows(m, diffs).ok()?.row_space_basis();
    (1usize.checked_shl(basis.len() as u32)? == points.len()).then_some((first, basis))
}

/// Phase of `e^{i pi w/4}` as an eighth-root index.
fn weight_phase(u: &F2Vector) -> u8 {
    (u.weight() % 8) as u8
}

/// Tries to read `sum_{u in L_perp} e^{i pi |u|/4}|u>` as one stabilizer
/// state by fitting a Z4 quadratic form on the dual's coordinates.
fn single_stabilizer(code: &LinearCode) -> Option<StabilizerState> {
    let dual = code.dual();
    let basis: Vec<F2Vector> = dual.generator().rows().to_vec();
    let m = code.m();
    let k = basis.len();
    let point = |ys: &[usize]| {
        let mut x = F2Vector::zeros(m);
        for &y in ys {
            x.xor_assign(&basis[y]);
        }
        x
    };
    // All weights must be even for the phases to be powers of i.
    if basis.iter().any(|b| b.weight() % 2 == 1) {
        return None;
    }
    let quarter = |x: &F2Vector| (weight_phase(x) / 2) % 4;
    let lin: Vec<u8> = (0..k).map(|a| quarter(&point(&[a]))).collect();
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let rel = (quarter(&point(&[a, b])) + 8 - lin[a] - lin[b]) % 4;
            match rel {
                0 => {}
                2 => pairs.push((a, b)),
                _ => return None,
            }
        }
    }
    let s = StabilizerState::from_parts(F2Vector::zeros(m), basis.clone(), lin, &pairs, Scalar::ONE).ok()?;
    // The fit only pins the form on pairs; confirm it everywhere.
    for u in dual.codewords() {
        let a = s.amplitude_scalar(&u).ok()??;
        if a.phase8 != weight_phase(&u) {
            return None;
        }
    }
    Some(s)
}

/// Splits `L_perp` by the phase `e^{i pi |u|/4}`. Every class must be an
/// affine space; the largest class may instead be absorbed into a uniform
/// background term over all of `L_perp`.
fn phase_classes(code: &LinearCode) -> Option<Vec<(Scalar, StabilizerState)>> {
    let m = code.m();
    let dual = code.dual();
    let mut classes: BTreeMap<u8, Vec<F2Vector>> = BTreeMap::new();
    for u in dual.codewords() {
        classes.entry(weight_phase(&u)).or_default().push(u);
    }
    let mut affine = Vec::new();
    for (&r, pts) in &classes {
        affine.push((r, pts.len(), as_affine_space(m, pts)));
    }
    let direct: Option<Vec<(Scalar, StabilizerState)>> = affine
        .iter()
        .map(|(r, _, a)| a.clone().map(|(o, b)| (Scalar::exact(*r, 0), uniform_state(o, b))))
        .collect();
    // Background: e^{i pi r0/4} over L_perp plus corrections on the others.
    let (r0, _, _) = *affine.iter().max_by_key(|(_, n, _)| *n)?;
    let mut with_bg = vec![(
        Scalar::exact(r0, 0),
        uniform_state(F2Vector::zeros(m), dual.generator().rows().to_vec()),
    )];
    let mut ok = true;
    for (r, _, a) in &affine {
        if *r == r0 {
            continue;
        }
        match a {
            Some((o, b)) => {
                let c = crate::stabstate::eighth_root(*r) - crate::stabstate::eighth_root(r0);
                with_bg.push((Scalar::from_complex(c), uniform_state(o.clone(), b.clone())));
            }
            None => ok = false,
        }
    }
    match (direct, ok) {
        (Some(d), true) => Some(if with_bg.len() < d.len() { with_bg } else { d }),
        (Some(d), false) => Some(d),
        (None, true) => Some(with_bg),
        (None, false) => None,
    }
}

/// `prod_i (I + A(u^i)) |0^m>` over a basis `u^i` of `L_perp`: `2^{m-k}` terms.
fn projector_expansion(code: &LinearCode) -> Vec<(Scalar, StabilizerState)> {
    let m = code.m();
    let mut states = vec![StabilizerState::zeros_state(m)];
    for u in code.dual().generator().rows() {
        let flipped: Vec<StabilizerState> = states
            .iter()
            .map(|s| {
                let mut t = s.clone();
                for q in u.iter_ones() {
                    t.apply(Gate::A(q)).expect("in range");
                }
                t
            })
            .collect();
        states.extend(flipped);
    }
    states.into_iter().map(|s| (Scalar::ONE, s)).collect()
}

/// The construction behind [`code_state_decomposition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeRoute {
    Stabilizer,
    PhaseClasses,
    Cat,
    Projector,
}

/// Stabilizer decomposition of `|L^>` (exactly, including normalization),
/// choosing the fewest terms among the available routes.
pub fn code_state_decomposition(code: &LinearCode) -> Result<(Decomposition, CodeRoute), CodeError> {
    let m = code.m();
    let scale = Scalar::exact(0, code.k() as i32 - m as i32);
    let mut cands: Vec<(Decomposition, CodeRoute)> = Vec::new();
    if let Some(s) = single_stabilizer(code) {
        cands.push((Decomposition::single(s).scaled(scale), CodeRoute::Stabilizer));
    }
    if let Some(terms) = phase_classes(code) {
        cands.push((Decomposition::from_terms(m, terms)?.scaled(scale), CodeRoute::PhaseClasses));
    }
    if code.k() == 1 && code.generator().row(0).weight() == m && m >= 1 {
        if let Some(plan) = chains::cat_plans(m).into_iter().nth(m).flatten() {
            cands.push((plan.build()?, CodeRoute::Cat));
        }
    }
    cands.push((
        Decomposition::from_terms(m, projector_expansion(code))?.scaled(scale),
        CodeRoute::Projector,
    ));
    Ok(cands
        .into_iter()
        .reduce(|a, b| if b.0.len() < a.0.len() { b } else { a })
        .expect("projector route always present"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrefixReport {
    /// Qubit `i` of the permuted state is qubit `perm[i]` of the code state.
    pub perm: Vec<usize>,
    pub constant: Complex64,
    pub fidelity: f64,
    pub max_residual: f64,
}

/// Checks `(<T|^k (x) I) |L^> = c |T>^{m-k}` after moving the pivot columns
/// of the generator to the front.
pub fn contract_t_prefix(code: &LinearCode) -> Result<PrefixReport, CodeError> {
    let (m, k) = (code.m(), code.k());
    let rref = code.generator().rref();
    let mut perm = rref.pivots.clone();
    perm.extend((0..m).filter(|c| !rref.pivots.contains(c)));
    let permuted = LinearCode::new(code.generator().permute_columns(&perm))?;
    let mut v = code_state_dense(&permuted)?;
    let t = denseoracle::qubit(Qubit::T);
    for _ in 0..k {
        // <T| on qubit 0; the remaining qubits shift down.
        let n = v.len().trailing_zeros() as usize;
        let lo = denseoracle::postselect(&v, n, 0, false);
        let hi = denseoracle::postselect(&v, n, 0, true);
        v = lo.iter().zip(&hi).map(|(a, b)| t[0].conj() * a + t[1].conj() * b).collect();
    }
    let target = denseoracle::power(Qubit::T, m - k);
    let constant = denseoracle::inner(&target, &v);
    if constant.norm() < 1e-12 {
        return Err(CodeError::ZeroConstant);
    }
    let fidelity = denseoracle::fidelity(&target, &v)?;
    let max_residual = v
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - constant * b).norm())
        .fold(0.0, f64::max);
    Ok(PrefixReport {
        perm,
        constant,
        fidelity,
        max_residual,
    })
}

/// `log2(chi) / (m - 2k)`. The hypothesis under which this bounds the
/// growth exponent of `|T>^n` is an assumption and is not checked here.
pub fn theorem5_bound(code: &LinearCode, chi_upper: u64) -> Result<f64, CodeError> {
    let (m, k) = (code.m(), code.k());
    if 2 * k >= m {
        return Err(CodeError::Dimension { k, m });
    }
    if chi_upper == 0 {
        return Err(CodeError::Chi);
    }
    Ok((chi_upper as f64).log2() / (m - 2 * k) as f64)
}
