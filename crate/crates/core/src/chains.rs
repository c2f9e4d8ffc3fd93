//! Decompositions of tensor powers: bonded cat chains for `|T>` and `|F>`,
//! equatorial chains for `|R_theta>`, and arbitrary single-qubit powers via
//! the symmetric subspace.
//!
//! Each family has a small planner that picks, for every `m`, the cheapest
//! of the known constructions (closed forms, chains, postselection, products)
//! and reports the term-count bound alongside the plan.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::decomp::{self, Decomposition, DecompError};
use crate::f2linalg::F2Vector;
use crate::stabstate::{eighth_root, Gate, Scalar, StabilizerState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error(transparent)]
    Decomp(#[from] DecompError),
}

impl From<crate::stabstate::StateError> for ChainError {
    fn from(e: crate::stabstate::StateError) -> Self {
        ChainError::Decomp(e.into())
    }
}

/// Planned construction and the term count it is guaranteed not to exceed.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub m: usize,
    pub terms: u64,
    pub plan: String,
}

fn sqrt2() -> Scalar {
    Scalar::exact(0, 1)
}

/// `2^{-1/2}(|0> + e^{i theta}|1>)` as two basis-state terms.
fn equatorial_qubit(theta: f64) -> Decomposition {
    let mut d = Decomposition::empty(1);
    d.push(Scalar::exact(0, -1), StabilizerState::zeros_state(1));
    d.push(
        Scalar::new(0, -1, Complex64::from_polar(1.0, theta)),
        StabilizerState::basis_state(&F2Vector::ones(1)),
    );
    d
}

/// Bonds two cat decompositions through the last qubit of `a` and the first
/// of `b`; the factor 2 undoes `<cat_2|_{ab} |cat_a>|cat_b> = |cat_{a+b-2}>/2`.
fn bond(a: &Decomposition, b: &Decomposition, bra: &Decomposition) -> Result<Decomposition, DecompError> {
    let na = a.num_qubits();
    Ok(a.tensor(b).contract_bra(bra, &[na - 1, na])?.scaled(Scalar::exact(0, 2)))
}

/// `<0|_{last} |cat_{m+1}> = 2^{-1/2} |cat_m>` for bases with `<0|psi> = <0|psi_perp>`.
fn trim_last(d: &Decomposition) -> Result<Decomposition, DecompError> {
    Ok(d.postselect(d.num_qubits() - 1, false)?.scaled(sqrt2()))
}

// ---- T ------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum CatPlan {
    /// `|cat_1> = |0>`
    One,
    Two,
    Four,
    Six,
    /// Postselect the last qubit of `cat_{m+1}`.
    Trim(Box<CatPlan>),
    Bond(Box<CatPlan>, Box<CatPlan>),
}

impl CatPlan {
    pub fn qubits(&self) -> usize {
        match self {
            CatPlan::One => 1,
            CatPlan::Two => 2,
            CatPlan::Four => 4,
            CatPlan::Six => 6,
            CatPlan::Trim(p) => p.qubits() - 1,
            CatPlan::Bond(a, b) => a.qubits() + b.qubits() - 2,
        }
    }

    pub fn terms(&self) -> u64 {
        match self {
            CatPlan::One | CatPlan::Two => 1,
            CatPlan::Four => 2,
            CatPlan::Six => 3,
            CatPlan::Trim(p) => p.terms(),
            CatPlan::Bond(a, b) => a.terms() * b.terms(),
        }
    }

    pub fn build(&self) -> Result<Decomposition, DecompError> {
        Ok(match self {
            CatPlan::One => Decomposition::single(StabilizerState::zeros_state(1)),
            CatPlan::Two => decomp::cat2(),
            CatPlan::Four => decomp::cat4(),
            CatPlan::Six => decomp::cat6(),
            CatPlan::Trim(p) => trim_last(&p.build()?)?,
            CatPlan::Bond(a, b) => bond(&a.build()?, &b.build()?, &decomp::cat2())?,
        })
    }
}

impl fmt::Display for CatPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatPlan::One => write!(f, "cat1"),
            CatPlan::Two => write!(f, "cat2"),
            CatPlan::Four => write!(f, "cat4"),
            CatPlan::Six => write!(f, "cat6"),
            CatPlan::Trim(p) => write!(f, "<0|{p}"),
            CatPlan::Bond(a, b) => write!(f, "{a}~{b}"),
        }
    }
}

/// Cheapest known `|cat_m>` plans for `m = 1..=max` (index 0 unused).
pub fn cat_plans(max: usize) -> Vec<Option<CatPlan>> {
    let top = max + 6;
    let mut best: Vec<Option<CatPlan>> = vec![None; top + 1];
    for p in [CatPlan::One, CatPlan::Two, CatPlan::Four, CatPlan::Six] {
        let m = p.qubits();
        if m <= top {
            best[m] = Some(p);
        }
    }
    let better = |cur: &Option<CatPlan>, cand: &CatPlan| cur.as_ref().map_or(true, |c| cand.terms() < c.terms());
    loop {
        let mut changed = false;
        for m in 3..=top {
            for block in [CatPlan::Four, CatPlan::Six] {
                if m + 2 < block.qubits() + 2 {
                    continue;
                }
                let a = m + 2 - block.qubits();
                if a >= m {
                    continue;
                }
                if let Some(pa) = best[a].clone() {
                    let cand = CatPlan::Bond(Box::new(pa), Box::new(block));
                    if better(&best[m], &cand) {
                        best[m] = Some(cand);
                        changed = true;
                    }
                }
            }
        }
        for m in (1..top).rev() {
            if let Some(p) = best[m + 1].clone() {
                let cand = CatPlan::Trim(Box::new(p));
                if better(&best[m], &cand) {
                    best[m] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    best.truncate(max + 1);
    best
}

#[derive(Clone, Debug, PartialEq)]
pub enum TPlan {
    T2,
    T3,
    /// `(I + A)/2` on qubit 0 of a cat state.
    FromCat(CatPlan),
    Product(Box<TPlan>, Box<TPlan>),
}

impl TPlan {
    pub fn qubits(&self) -> usize {
        match self {
            TPlan::T2 => 2,
            TPlan::T3 => 3,
            TPlan::FromCat(c) => c.qubits(),
            TPlan::Product(a, b) => a.qubits() + b.qubits(),
        }
    }

    pub fn terms(&self) -> u64 {
        match self {
            TPlan::T2 => 2,
            TPlan::T3 => 3,
            TPlan::FromCat(c) => 2 * c.terms(),
            TPlan::Product(a, b) => a.terms() * b.terms(),
        }
    }

    pub fn build(&self) -> Result<Decomposition, DecompError> {
        Ok(match self {
            TPlan::T2 => decomp::t2(),
            TPlan::T3 => decomp::t3(),
            TPlan::FromCat(c) => c.build()?.cat_to_t(),
            TPlan::Product(a, b) => a.build()?.tensor(&b.build()?),
        })
    }
}

impl fmt::Display for TPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TPlan::T2 => write!(f, "t2"),
            TPlan::T3 => write!(f, "t3"),
            TPlan::FromCat(c) => write!(f, "(I+A)[{c}]"),
            TPlan::Product(a, b) => write!(f, "{a} x {b}"),
        }
    }
}

pub fn t_plans(max: usize) -> Vec<Option<TPlan>> {
    let cats = cat_plans(max);
    let mut best: Vec<Option<TPlan>> = vec![None; max + 1];
    for m in 1..=max {
        let mut cands = Vec::new();
        if m == 2 {
            cands.push(TPlan::T2);
        }
        if m == 3 {
            cands.push(TPlan::T3);
        }
        if let Some(c) = &cats[m] {
            cands.push(TPlan::FromCat(c.clone()));
        }
        for a in 1..=m / 2 {
            if let (Some(pa), Some(pb)) = (&best[a], &best[m - a]) {
                cands.push(TPlan::Product(Box::new(pa.clone()), Box::new(pb.clone())));
            }
        }
        best[m] = cands.into_iter().reduce(|x, y| if y.terms() < x.terms() { y } else { x });
    }
    best
}

fn plan_for<P: Clone>(plans: Vec<Option<P>>, m: usize) -> Result<P, ChainError> {
    plans
        .get(m)
        .cloned()
        .flatten()
        .ok_or_else(|| ChainError::Range(format!("no plan for m = {m}")))
}

pub fn t_power_plan(m: usize) -> Result<TPlan, ChainError> {
    if m == 0 {
        return Err(ChainError::Range("m must be at least 1".into()));
    }
    plan_for(t_plans(m), m)
}

/// `|T>^m`, exact (not just proportional).
pub fn t_power(m: usize) -> Result<Decomposition, ChainError> {
    Ok(t_power_plan(m)?.build()?)
}

pub fn cat_plan(m: usize) -> Result<CatPlan, ChainError> {
    if m == 0 {
        return Err(ChainError::Range("m must be at least 1".into()));
    }
    plan_for(cat_plans(m), m)
}

/// `|cat_m>` in the T magic basis, exact.
pub fn cat_power(m: usize) -> Result<Decomposition, ChainError> {
    Ok(cat_plan(m)?.build()?)
}

pub fn t_ledger(max: usize) -> Vec<LedgerEntry> {
    t_plans(max)
        .into_iter()
        .enumerate()
        .filter_map(|(m, p)| {
            p.map(|p| LedgerEntry {
                m,
                terms: p.terms(),
                plan: p.to_string(),
            })
        })
        .collect()
}

pub fn cat_ledger(max: usize) -> Vec<LedgerEntry> {
    cat_plans(max)
        .into_iter()
        .enumerate()
        .filter_map(|(m, p)| {
            p.map(|p| LedgerEntry {
                m,
                terms: p.terms(),
                plan: p.to_string(),
            })
        })
        .collect()
}

/// `|cat_{4 ell + 2}>` from `ell` copies of `cat_6` bonded in a line, each
/// site's last free qubit meeting the next site's first qubit.
pub fn chain_t(ell: usize) -> Result<Decomposition, ChainError> {
    if ell == 0 {
        return Err(ChainError::Range("chain length must be at least 1".into()));
    }
    let block = decomp::cat6();
    let bra = decomp::cat2();
    let mut d = block.clone();
    for _ in 1..ell {
        d = bond(&d, &block, &bra)?;
    }
    Ok(d)
}

/// Number of nonzero terms of `chain_t(ell)`, computed by walking the term
/// tree without storing it.
pub fn chain_t_count(ell: usize) -> Result<u64, ChainError> {
    if ell == 0 {
        return Err(ChainError::Range("chain length must be at least 1".into()));
    }
    let block: Vec<StabilizerState> = decomp::cat6().into_terms().into_iter().map(|t| t.state).collect();
    let bra = decomp::cat2();
    let (gates, _) = bra.terms()[0].state.reduction_to_zero()?;

    fn walk(s: &StabilizerState, left: usize, block: &[StabilizerState], gates: &[Gate], depth: usize) -> u64 {
        if left == 0 {
            return u64::from(!s.is_zero());
        }
        let step = |b: &StabilizerState| -> u64 {
            let q = s.num_qubits();
            let mut t = s.tensor(b);
            let map = [q - 1, q];
            for g in gates {
                t.apply(g.remap(&map)).expect("in range");
            }
            t.postselect_in_place(q, false);
            t.postselect_in_place(q - 1, false);
            if t.is_zero() {
                0
            } else {
                walk(&t, left - 1, block, gates, depth + 1)
            }
        };
        if depth < 3 {
            block.par_iter().map(step).sum()
        } else {
            block.iter().map(step).sum()
        }
    }

    Ok(block.par_iter().map(|s| walk(s, ell - 1, &block, &gates, 1)).sum())
}

// ---- F ------------------------------------------------------------------

/// `|F> = cos b |0> + e^{i pi/4} sin b |1>` with `cos 2b = 1/sqrt3`.
pub fn f_beta() -> f64 {
    0.5 * (1.0 / 3f64.sqrt()).acos()
}

fn f_amplitudes() -> [Complex64; 2] {
    let b = f_beta();
    [Complex64::new(b.cos(), 0.0), eighth_root(1) * b.sin()]
}

fn f_perp_amplitudes() -> [Complex64; 2] {
    let b = f_beta();
    [Complex64::new(b.sin(), 0.0), -eighth_root(1) * b.cos()]
}

fn qubit_decomposition(amps: [Complex64; 2]) -> Decomposition {
    let mut d = Decomposition::empty(1);
    d.push(Scalar::from_complex(amps[0]), StabilizerState::zeros_state(1));
    d.push(Scalar::from_complex(amps[1]), StabilizerState::basis_state(&F2Vector::ones(1)));
    d
}

/// The 24 single-qubit Cliffords (up to phase) as gate words in `H`, `S`.
pub fn single_qubit_cliffords() -> Vec<(Vec<Gate>, [[Complex64; 2]; 2])> {
    let mut out: Vec<(Vec<Gate>, [[Complex64; 2]; 2])> = Vec::new();
    let mut frontier = vec![Vec::<Gate>::new()];
    while let Some(word) = frontier.pop() {
        let m = clifford_matrix(&word);
        let seen = out.iter().any(|(_, o)| same_up_to_phase(o, &m));
        if seen {
            continue;
        }
        out.push((word.clone(), m));
        for g in [Gate::H(0), Gate::S(0)] {
            let mut w = word.clone();
            w.push(g);
            frontier.insert(0, w);
        }
    }
    out
}

fn clifford_matrix(word: &[Gate]) -> [[Complex64; 2]; 2] {
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for col in 0..2 {
        let mut s = StabilizerState::basis_state(&F2Vector::from_u64(1, col as u64));
        s.apply_all(word).expect("single qubit");
        let v = s.to_dense().expect("one qubit");
        m[0][col] = v[0];
        m[1][col] = v[1];
    }
    m
}

fn same_up_to_phase(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> bool {
    let ip: Complex64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| a[i][j].conj() * b[i][j]).sum();
    (ip.norm() - 2.0).abs() < 1e-9
}

fn mat_vec(m: &[[Complex64; 2]; 2], v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn dot(a: [Complex64; 2], b: [Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// A Clifford `C` (gate word and phase) with `C|F> = |F>` and
/// `C|F_perp> = lambda |F_perp>`, returning the eigenvalue `lambda`. Searches
/// for `lambda = -1` when `involution` is set and a primitive cube root
/// otherwise.
pub fn f_stabilizing_clifford(involution: bool) -> Option<(Vec<Gate>, Complex64, Complex64)> {
    let f = f_amplitudes();
    let fp = f_perp_amplitudes();
    for (word, m) in single_qubit_cliffords() {
        let lf = dot(f, mat_vec(&m, f));
        if (lf.norm() - 1.0).abs() > 1e-9 {
            continue;
        }
        let phase = lf.conj();
        let lambda = phase * dot(fp, mat_vec(&m, fp));
        let hit = if involution {
            (lambda + 1.0).norm() < 1e-9
        } else {
            (lambda.powi(3) - 1.0).norm() < 1e-9 && (lambda - 1.0).norm() > 1e-6
        };
        if hit {
            return Some((word, phase, lambda));
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub enum FCatPlan {
    /// `(|F> + |F_perp>)/sqrt2`, a two-term single-qubit state.
    One,
    Two,
    Six,
    Bond(Box<FCatPlan>, Box<FCatPlan>),
}

impl FCatPlan {
    pub fn qubits(&self) -> usize {
        match self {
            FCatPlan::One => 1,
            FCatPlan::Two => 2,
            FCatPlan::Six => 6,
            FCatPlan::Bond(a, b) => a.qubits() + b.qubits() - 2,
        }
    }

    pub fn terms(&self) -> u64 {
        match self {
            FCatPlan::One => 2,
            FCatPlan::Two => 1,
            FCatPlan::Six => 3,
            FCatPlan::Bond(a, b) => a.terms() * b.terms(),
        }
    }

    pub fn build(&self) -> Result<Decomposition, DecompError> {
        Ok(match self {
            FCatPlan::One => {
                let (f, fp) = (f_amplitudes(), f_perp_amplitudes());
                qubit_decomposition([(f[0] + fp[0]) * FRAC_1_SQRT_2, (f[1] + fp[1]) * FRAC_1_SQRT_2])
            }
            // (|FF> + |F_perp F_perp>)/sqrt2 coincides with cat_2.
            FCatPlan::Two => decomp::cat2(),
            FCatPlan::Six => decomp::cat6_f(),
            FCatPlan::Bond(a, b) => bond(&a.build()?, &b.build()?, &decomp::cat2())?,
        })
    }
}

impl fmt::Display for FCatPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FCatPlan::One => write!(f, "catF1"),
            FCatPlan::Two => write!(f, "catF2"),
            FCatPlan::Six => write!(f, "catF6"),
            FCatPlan::Bond(a, b) => write!(f, "{a}~{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FPlan {
    /// `(I + C + C^2)/3` on qubit 0 of `cat_m(F)`.
    Project(FCatPlan),
    /// `<F|` on qubit 0 of `cat_{m+1}(F)`.
    Bra(FCatPlan),
    Product(Box<FPlan>, Box<FPlan>),
}

impl FPlan {
    pub fn qubits(&self) -> usize {
        match self {
            FPlan::Project(c) => c.qubits(),
            FPlan::Bra(c) => c.qubits() - 1,
            FPlan::Product(a, b) => a.qubits() + b.qubits(),
        }
    }

    pub fn terms(&self) -> u64 {
        match self {
            FPlan::Project(c) => 3 * c.terms(),
            FPlan::Bra(c) => 2 * c.terms(),
            FPlan::Product(a, b) => a.terms() * b.terms(),
        }
    }

    pub fn build(&self) -> Result<Decomposition, ChainError> {
        Ok(match self {
            FPlan::Project(c) => {
                let cat = c.build()?;
                let (word, phase, _) = f_stabilizing_clifford(false)
                    .ok_or_else(|| ChainError::Solve("no Clifford fixes |F>".into()))?;
                // |F>^m = sqrt2 (|F><F| (x) I)|cat_m(F)>, |F><F| = (I + C + C^2)/3.
                let w = Scalar::new(0, 1, Complex64::new(1.0 / 3.0, 0.0));
                let once = cat.apply_gates(&word)?.scaled(Scalar::from_complex(phase));
                let twice = once.apply_gates(&word)?.scaled(Scalar::from_complex(phase));
                cat.scaled(w).add(once.scaled(w))?.add(twice.scaled(w))?
            }
            FPlan::Bra(c) => c
                .build()?
                .contract_bra(&qubit_decomposition(f_amplitudes()), &[0])?
                .scaled(sqrt2()),
            FPlan::Product(a, b) => a.build()?.tensor(&b.build()?),
        })
    }
}

impl fmt::Display for FPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FPlan::Project(c) => write!(f, "(I+C+C^2)/3[{c}]"),
            FPlan::Bra(c) => write!(f, "<F|{c}"),
            FPlan::Product(a, b) => write!(f, "{a} x {b}"),
        }
    }
}

fn f_cat_plans(max: usize) -> Vec<Option<FCatPlan>> {
    let mut best: Vec<Option<FCatPlan>> = vec![None; max + 1];
    for p in [FCatPlan::One, FCatPlan::Two, FCatPlan::Six] {
        let m = p.qubits();
        if m <= max {
            best[m] = Some(p);
        }
    }
    for m in 7..=max {
        if let Some(a) = best[m - 4].clone() {
            if a.qubits() >= 2 {
                let cand = FCatPlan::Bond(Box::new(a), Box::new(FCatPlan::Six));
                if best[m].as_ref().map_or(true, |c| cand.terms() < c.terms()) {
                    best[m] = Some(cand);
                }
            }
        }
    }
    best
}

pub fn f_plans(max: usize) -> Vec<Option<FPlan>> {
    let cats = f_cat_plans(max + 1);
    let mut best: Vec<Option<FPlan>> = vec![None; max + 1];
    for m in 1..=max {
        let mut cands = Vec::new();
        if let Some(c) = &cats[m] {
            cands.push(FPlan::Project(c.clone()));
        }
        if let Some(c) = &cats[m + 1] {
            cands.push(FPlan::Bra(c.clone()));
        }
        for a in 1..=m / 2 {
            if let (Some(pa), Some(pb)) = (&best[a], &best[m - a]) {
                cands.push(FPlan::Product(Box::new(pa.clone()), Box::new(pb.clone())));
            }
        }
        best[m] = cands.into_iter().reduce(|x, y| if y.terms() < x.terms() { y } else { x });
    }
    best
}

pub fn f_power(m: usize) -> Result<Decomposition, ChainError> {
    if m == 0 {
        return Err(ChainError::Range("m must be at least 1".into()));
    }
    plan_for(f_plans(m), m)?.build()
}

pub fn f_ledger(max: usize) -> Vec<LedgerEntry> {
    f_plans(max)
        .into_iter()
        .enumerate()
        .filter_map(|(m, p)| p.map(|p| LedgerEntry { m, terms: p.terms(), plan: p.to_string() }))
        .collect()
}

// ---- R_theta --------------------------------------------------------------

/// Upper sites, lower blocks and qubits of the equatorial chain with `t` lower blocks.
pub fn chain_r_shape(t: usize) -> (usize, usize, usize) {
    (5 * t + 1, t, 24 * t + 6)
}

/// Term count of `chain_r(theta, t)` before zero terms are dropped.
pub fn chain_r_raw_terms(t: usize) -> u64 {
    4u64.pow(6 * t as u32 + 1)
}

/// Qubit lists (in the tensor product of the upper sites) met by each lower
/// block: lower `j` touches one qubit of each of the six consecutive sites
/// `5j .. 5j+5`, using the first qubit of a site not yet taken.
pub fn chain_r_wiring(t: usize) -> Vec<Vec<usize>> {
    let (uppers, _, _) = chain_r_shape(t);
    let mut used = vec![0usize; uppers];
    (0..t)
        .map(|j| {
            (5 * j..5 * j + 6)
                .map(|site| {
                    let q = 6 * site + used[site];
                    used[site] += 1;
                    q
                })
                .collect()
        })
        .collect()
}

/// The six `<cat_2(R)|` edges of a lower `|cat_6(R)>` fold into the bra of
/// `2^{-3} |cat_6(R)>`.
pub fn effective_lower_bra(theta: f64) -> Decomposition {
    decomp::cat6_r(theta).scaled(Scalar::exact(0, -6))
}

/// `|cat_{24t+6}(R_theta)>`: `5t+1` upper `cat_6(R)` sites glued by `t`
/// folded lower blocks. Exactly-zero terms are dropped; see
/// [`chain_r_raw_terms`] for the count before pruning.
pub fn chain_r(theta: f64, t: usize) -> Result<Decomposition, ChainError> {
    if t == 0 {
        return Err(ChainError::Range("t must be at least 1".into()));
    }
    if !theta.is_finite() {
        return Err(ChainError::Range("angle must be finite".into()));
    }
    let (uppers, _, _) = chain_r_shape(t);
    let site = decomp::cat6_r(theta);
    let mut d = site.clone();
    for _ in 1..uppers {
        d = d.tensor(&site);
    }
    let bra = effective_lower_bra(theta);
    let mut removed: Vec<usize> = Vec::new();
    for wires in chain_r_wiring(t) {
        let now: Vec<usize> = wires
            .iter()
            .map(|&q| q - removed.iter().filter(|&&r| r < q).count())
            .collect();
        d = d.contract_bra(&bra, &now)?;
        removed.extend(wires);
    }
    // Every upper contributes 2^{-1/2}, every lower 2^{-7/2}; the two
    // surviving branches add up to sqrt2 |cat>.
    Ok(d.scaled(Scalar::exact(0, 12 * t as i32)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum RPlan {
    /// `theta` in `(pi/2) Z`: a product stabilizer state.
    Stabilizer,
    One,
    /// `|00>, |01>+|10>, |11>`.
    Two,
    /// `<R|` on qubit 0 of `cat_{m+1}(R)` cut down from `cat_6(R)`.
    BraCat6 { cat: usize },
    /// `|R><R| = (I + e^{-it} s_+ + e^{it} s_-)/2` on qubit 0 of `cat_6(R)`.
    ProjectCat6,
    BraChain { t: usize },
    ProjectChain { t: usize },
    Trim(Box<RPlan>),
    Product(Box<RPlan>, Box<RPlan>),
}

impl RPlan {
    pub fn qubits(&self, m_stab: usize) -> usize {
        match self {
            RPlan::Stabilizer => m_stab,
            RPlan::One => 1,
            RPlan::Two => 2,
            RPlan::BraCat6 { cat } => cat - 1,
            RPlan::ProjectCat6 => 6,
            RPlan::BraChain { t } => 24 * t + 5,
            RPlan::ProjectChain { t } => 24 * t + 6,
            RPlan::Trim(p) => p.qubits(m_stab + 1) - 1,
            RPlan::Product(a, b) => a.qubits(0) + b.qubits(0),
        }
    }

    pub fn terms(&self) -> u64 {
        match self {
            RPlan::Stabilizer => 1,
            RPlan::One => 2,
            RPlan::Two => 3,
            // cut-down cats keep |0..0>, E, K (3 terms): <0| keeps 3, <1| keeps 2
            RPlan::BraCat6 { cat } => {
                if *cat == 6 {
                    6
                } else {
                    5
                }
            }
            RPlan::ProjectCat6 => 10,
            RPlan::BraChain { t } => 2 * chain_r_raw_terms(*t),
            RPlan::ProjectChain { t } => 3 * chain_r_raw_terms(*t),
            RPlan::Trim(p) => p.terms(),
            RPlan::Product(a, b) => a.terms() * b.terms(),
        }
    }

    fn build_with(&self, theta: f64, m: usize) -> Result<Decomposition, ChainError> {
        let r = || equatorial_qubit(theta);
        Ok(match self {
            RPlan::Stabilizer => {
                let k = decomp::quarter_turns(theta).expect("stabilizer angle");
                let mut s = StabilizerState::zeros_state(m);
                for q in 0..m {
                    s.apply(Gate::H(q)).expect("in range");
                    for _ in 0..k {
                        s.apply(Gate::S(q)).expect("in range");
                    }
                }
                Decomposition::single(s)
            }
            RPlan::One => r(),
            RPlan::Two => {
                let mid = StabilizerState::from_parts(
                    F2Vector::parse("10").expect("bits"),
                    vec![F2Vector::ones(2)],
                    vec![0],
                    &[],
                    Scalar::ONE,
                )?;
                let e = |k: f64| Scalar::new(0, -2, Complex64::from_polar(1.0, k * theta));
                Decomposition::from_terms(
                    2,
                    [
                        (e(0.0), StabilizerState::zeros_state(2)),
                        (e(1.0), mid),
                        (e(2.0), StabilizerState::basis_state(&F2Vector::ones(2))),
                    ],
                )?
            }
            RPlan::BraCat6 { cat } => {
                let mut c = decomp::cat6_r(theta).prune();
                for _ in *cat..6 {
                    c = trim_last(&c)?;
                }
                c.contract_bra(&r(), &[0])?.scaled(sqrt2())
            }
            RPlan::ProjectCat6 => project_r(&decomp::cat6_r(theta).prune(), theta)?,
            RPlan::BraChain { t } => chain_r(theta, *t)?.contract_bra(&r(), &[0])?.scaled(sqrt2()),
            RPlan::ProjectChain { t } => project_r(&chain_r(theta, *t)?, theta)?,
            RPlan::Trim(p) => {
                let d = p.build_with(theta, m + 1)?;
                d.postselect(d.num_qubits() - 1, false)?.scaled(sqrt2())
            }
            RPlan::Product(a, b) => {
                let da = a.build_with(theta, 0)?;
                let db = b.build_with(theta, 0)?;
                da.tensor(&db)
            }
        })
    }
}

impl fmt::Display for RPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RPlan::Stabilizer => write!(f, "stabilizer"),
            RPlan::One => write!(f, "R"),
            RPlan::Two => write!(f, "R2"),
            RPlan::BraCat6 { cat } => write!(f, "<R|catR{cat}"),
            RPlan::ProjectCat6 => write!(f, "|R><R|catR6"),
            RPlan::BraChain { t } => write!(f, "<R|chainR(t={t})"),
            RPlan::ProjectChain { t } => write!(f, "|R><R|chainR(t={t})"),
            RPlan::Trim(p) => write!(f, "<0|{p}"),
            RPlan::Product(a, b) => write!(f, "{a} x {b}"),
        }
    }
}

/// `sqrt2 (|R><R| (x) I)` on qubit 0 of a cat decomposition, with
/// `|R><R| = (I + e^{-it}|0><1| + e^{it}|1><0|)/2`.
fn project_r(cat: &Decomposition, theta: f64) -> Result<Decomposition, ChainError> {
    let half = Scalar::exact(0, -1);
    let mut out = cat.clone().scaled(half);
    for (from, to, phase) in [(true, false, -theta), (false, true, theta)] {
        let hit = cat.postselect(0, from)?;
        let ket = StabilizerState::basis_state(&F2Vector::from_bits([to]));
        let moved = Decomposition::single(ket).tensor(&hit);
        out = out.add(moved.scaled(half.mul(Scalar::from_complex(Complex64::from_polar(1.0, phase)))))?;
    }
    Ok(out)
}

/// Plans for generic angles; stabilizer angles are handled by [`r_power_plan`].
pub fn r_plans(max: usize) -> Vec<Option<RPlan>> {
    let top = max + 1;
    let mut base: Vec<Option<RPlan>> = vec![None; top + 1];
    let offer = |m: usize, p: RPlan, best: &mut Vec<Option<RPlan>>| {
        if m <= top && best[m].as_ref().map_or(true, |c| p.terms() < c.terms()) {
            best[m] = Some(p);
        }
    };
    offer(1, RPlan::One, &mut base);
    offer(2, RPlan::Two, &mut base);
    for cat in 4..=6 {
        offer(cat - 1, RPlan::BraCat6 { cat }, &mut base);
    }
    offer(6, RPlan::ProjectCat6, &mut base);
    let mut t = 1;
    while 24 * t + 5 <= top {
        offer(24 * t + 5, RPlan::BraChain { t }, &mut base);
        offer(24 * t + 6, RPlan::ProjectChain { t }, &mut base);
        t += 1;
    }
    let mut best = base;
    loop {
        let mut changed = false;
        for m in 2..=top {
            for a in 1..=m / 2 {
                if let (Some(pa), Some(pb)) = (best[a].clone(), best[m - a].clone()) {
                    let cand = RPlan::Product(Box::new(pa), Box::new(pb));
                    if best[m].as_ref().map_or(true, |c| cand.terms() < c.terms()) {
                        best[m] = Some(cand);
                        changed = true;
                    }
                }
            }
        }
        for m in (1..top).rev() {
            if let Some(p) = best[m + 1].clone() {
                let cand = RPlan::Trim(Box::new(p));
                if best[m].as_ref().map_or(true, |c| cand.terms() < c.terms()) {
                    best[m] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    best.truncate(max + 1);
    best
}

pub fn r_power_plan(theta: f64, m: usize) -> Result<RPlan, ChainError> {
    if m == 0 {
        return Err(ChainError::Range("m must be at least 1".into()));
    }
    if !theta.is_finite() {
        return Err(ChainError::Range("angle must be finite".into()));
    }
    if decomp::quarter_turns(theta).is_some() {
        return Ok(RPlan::Stabilizer);
    }
    plan_for(r_plans(m), m)
}

/// `|R_theta>^m`, exact.
pub fn r_power(theta: f64, m: usize) -> Result<Decomposition, ChainError> {
    r_power_plan(theta, m)?.build_with(theta, m)
}

pub fn r_ledger(max: usize) -> Vec<LedgerEntry> {
    r_plans(max)
        .into_iter()
        .enumerate()
        .filter_map(|(m, p)| p.map(|p| LedgerEntry { m, terms: p.terms(), plan: p.to_string() }))
        .collect()
}

// ---- arbitrary single-qubit states ---------------------------------------

/// Coefficients `c_i` with `(a|0> + b|1>)^m = sum_i c_i |R_{theta_i}>^m`,
/// `theta_i = 2 pi i/(m+1)`, and the relative residual of the solve.
pub fn symmetric_coefficients(a: Complex64, b: Complex64, m: usize) -> Result<(Vec<f64>, Vec<Complex64>, f64), ChainError> {
    if a.norm() == 0.0 && b.norm() == 0.0 {
        return Err(ChainError::Range("state must be nonzero".into()));
    }
    let n = m + 1;
    let thetas: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let scale = 2f64.powf(-(m as f64) / 2.0);
    // Row k: weight-k amplitude, 2^{-m/2} sum_i c_i e^{i theta_i k} = a^{m-k} b^k.
    let vander = DMatrix::from_fn(n, n, |k, i| Complex64::from_polar(scale, thetas[i] * k as f64));
    let rhs = DVector::from_fn(n, |k, _| a.powu((m - k) as u32) * b.powu(k as u32));
    let c = vander
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ChainError::Solve("Vandermonde system is singular".into()))?;
    let resid = (&vander * &c - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    Ok((thetas, c.iter().copied().collect(), resid))
}

/// `(a|0> + b|1>)^m` as a combination of `m+1` equatorial powers.
pub fn symmetric_power(a: Complex64, b: Complex64, m: usize) -> Result<Decomposition, ChainError> {
    if m == 0 {
        return Err(ChainError::Range("m must be at least 1".into()));
    }
    let (thetas, coeffs, resid) = symmetric_coefficients(a, b, m)?;
    if resid > 1e-9 {
        return Err(ChainError::Solve(format!("residual {resid:e} exceeds 1e-9")));
    }
    let mut out = Decomposition::empty(m);
    for (theta, c) in thetas.iter().zip(coeffs) {
        if c.norm() == 0.0 {
            continue;
        }
        let block = r_power(*theta, m)?.scaled(Scalar::from_complex(c));
        out = out.add(block)?;
    }
    Ok(out)
}
