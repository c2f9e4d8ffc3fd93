//! Unnormalized stabilizer states in affine/quadratic form.
//!
//! A state on `n` qubits is stored as
//!
//! ```text
//!   scalar * sum_{y in F2^k} i^{d.y} (-1)^{sum_{j<l} J_jl y_j y_l} |h + y_1 g_1 + ... + y_k g_k>
//! ```
//!
//! with independent rows `g_j`, an offset `h`, a Z4-valued linear part `d` and
//! a symmetric zero-diagonal binary matrix `J`. The amplitude of a basis state
//! `x` in the affine space is therefore a power of `i` times the scalar, and
//! zero elsewhere. Clifford gates and computational-basis postselection act on
//! this form in time polynomial in `n`; the Hadamard reduces to a one-variable
//! Gauss sum `sum_y i^{d y} (-1)^{y w}`.
//!
//! Qubit `i` of a state is bit `i` of a basis label, and bit `i` of a dense
//! vector index.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::f2linalg::{F2Error, F2Matrix, F2Vector};

/// Largest qubit count accepted by dense export unless a caller raises it.
pub const DEFAULT_DENSE_CAP: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("qubit index {index} out of range for {n} qubits")]
    BadQubit { index: usize, n: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    RepeatedQubit(usize),
    #[error("basis label has {found} bits, state has {expected} qubits")]
    LabelLength { expected: usize, found: usize },
    #[error("dense export of {n} qubits exceeds the cap of {cap}")]
    DenseCap { n: usize, cap: usize },
    #[error("invalid state description: {0}")]
    Invalid(String),
    #[error(transparent)]
    F2(#[from] F2Error),
}

// e^{i pi k / 4}
const EIGHTH_ROOTS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (0.0, 1.0),
    (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (-1.0, 0.0),
    (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (0.0, -1.0),
    (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

pub fn eighth_root(k: u8) -> Complex64 {
    let (re, im) = EIGHTH_ROOTS[(k % 8) as usize];
    Complex64::new(re, im)
}

/// `2^{e/2}` without going through a floating exponent.
pub fn sqrt2_pow(e: i32) -> f64 {
    let base = 2f64.powi(e.div_euclid(2));
    if e.rem_euclid(2) == 1 {
        base * SQRT_2
    } else {
        base
    }
}

/// `factor * e^{i pi phase8 / 4} * 2^{sqrt2_exp / 2}`.
///
/// Phases that are multiples of pi/4 and powers of sqrt(2) stay exact; only
/// angle-dependent coefficients land in `factor`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalar {
    pub phase8: u8,
    pub sqrt2_exp: i32,
    pub factor: Complex64,
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::ONE
    }
}

impl Scalar {
    pub const ONE: Scalar = Scalar {
        phase8: 0,
        sqrt2_exp: 0,
        factor: Complex64::new(1.0, 0.0),
    };

    pub fn new(phase8: u8, sqrt2_exp: i32, factor: Complex64) -> Self {
        Scalar {
            phase8: phase8 % 8,
            sqrt2_exp,
            factor,
        }
    }

    pub fn exact(phase8: u8, sqrt2_exp: i32) -> Self {
        Scalar::new(phase8, sqrt2_exp, Complex64::new(1.0, 0.0))
    }

    pub fn from_complex(c: Complex64) -> Self {
        Scalar::new(0, 0, c)
    }

    pub fn is_zero(&self) -> bool {
        self.factor.re == 0.0 && self.factor.im == 0.0
    }

    pub fn mul(self, o: Scalar) -> Scalar {
        Scalar {
            phase8: (self.phase8 + o.phase8) % 8,
            sqrt2_exp: self.sqrt2_exp + o.sqrt2_exp,
            factor: self.factor * o.factor,
        }
    }

    pub fn conj(self) -> Scalar {
        Scalar {
            phase8: (8 - self.phase8) % 8,
            sqrt2_exp: self.sqrt2_exp,
            factor: self.factor.conj(),
        }
    }

    pub fn times_phase8(self, k: u8) -> Scalar {
        Scalar {
            phase8: (self.phase8 + k) % 8,
            ..self
        }
    }

    pub fn times_sqrt2_pow(self, e: i32) -> Scalar {
        Scalar {
            sqrt2_exp: self.sqrt2_exp + e,
            ..self
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        self.factor * eighth_root(self.phase8) * sqrt2_pow(self.sqrt2_exp)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.factor.norm_sqr() * 2f64.powi(self.sqrt2_exp)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}{:+}i) e^(i pi {}/4) 2^({}/2)",
            self.factor.re, self.factor.im, self.phase8, self.sqrt2_exp
        )
    }
}

/// Clifford gates understood by [`StabilizerState::apply`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    Sdg(usize),
    H(usize),
    /// `e^{-i pi/4} S X`; fixes |T> and negates Z|T>.
    A(usize),
    Adg(usize),
    CX(usize, usize),
    CZ(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::H(q)
            | Gate::A(q)
            | Gate::Adg(q) => vec![q],
            Gate::CX(a, b) | Gate::CZ(a, b) => vec![a, b],
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::S(q) => Gate::Sdg(q),
            Gate::Sdg(q) => Gate::S(q),
            Gate::A(q) => Gate::Adg(q),
            Gate::Adg(q) => Gate::A(q),
            g => g,
        }
    }

    /// Same gate acting on `map[q]` instead of `q`.
    pub fn remap(&self, map: &[usize]) -> Gate {
        match *self {
            Gate::X(q) => Gate::X(map[q]),
            Gate::Y(q) => Gate::Y(map[q]),
            Gate::Z(q) => Gate::Z(map[q]),
            Gate::S(q) => Gate::S(map[q]),
            Gate::Sdg(q) => Gate::Sdg(map[q]),
            Gate::H(q) => Gate::H(map[q]),
            Gate::A(q) => Gate::A(map[q]),
            Gate::Adg(q) => Gate::Adg(map[q]),
            Gate::CX(a, b) => Gate::CX(map[a], map[b]),
            Gate::CZ(a, b) => Gate::CZ(map[a], map[b]),
        }
    }
}

/// An unnormalized stabilizer state; see the module docs for the form.
#[derive(Clone, PartialEq)]
pub struct StabilizerState {
    n: usize,
    offset: F2Vector,
    basis: Vec<F2Vector>,
    lin: Vec<u8>,
    quad: Vec<F2Vector>,
    scalar: Scalar,
    zero: bool,
}

impl fmt::Debug for StabilizerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            return write!(f, "StabilizerState(n={}, zero)", self.n);
        }
        write!(
            f,
            "StabilizerState(n={}, offset={}, basis=[",
            self.n, self.offset
        )?;
        for (j, g) in self.basis.iter().enumerate() {
            if j > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "], lin={:?}, quad=[", self.lin)?;
        for (j, r) in self.quad.iter().enumerate() {
            if j > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, "], scalar={})", self.scalar)
    }
}

impl StabilizerState {
    /// The computational basis state `|x>`.
    pub fn basis_state(x: &F2Vector) -> Self {
        StabilizerState {
            n: x.len(),
            offset: x.clone(),
            basis: Vec::new(),
            lin: Vec::new(),
            quad: Vec::new(),
            scalar: Scalar::ONE,
            zero: false,
        }
    }

    pub fn zeros_state(n: usize) -> Self {
        Self::basis_state(&F2Vector::zeros(n))
    }

    /// The zero vector on `n` qubits.
    pub fn zero(n: usize) -> Self {
        StabilizerState {
            n,
            offset: F2Vector::zeros(n),
            basis: Vec::new(),
            lin: Vec::new(),
            quad: Vec::new(),
            scalar: Scalar::from_complex(Complex64::new(0.0, 0.0)),
            zero: true,
        }
    }

    /// Builds a state directly from the affine/quadratic data. `quad` lists
    /// the pairs `(j, l)` of variables with a `(-1)^{y_j y_l}` term and `lin`
    /// holds the Z4 exponents of `i^{d_j y_j}`.
    pub fn from_parts(
        offset: F2Vector,
        basis: Vec<F2Vector>,
        lin: Vec<u8>,
        quad_pairs: &[(usize, usize)],
        scalar: Scalar,
    ) -> Result<Self, StateError> {
        let n = offset.len();
        let k = basis.len();
        if lin.len() != k {
            return Err(StateError::Invalid(format!(
                "{} linear coefficients for {k} basis rows",
                lin.len()
            )));
        }
        let g = F2Matrix::from_rows(n, basis.clone())?;
        if g.rank() != k {
            return Err(F2Error::DependentBasis.into());
        }
        let mut quad = vec![F2Vector::zeros(k); k];
        for &(a, b) in quad_pairs {
            if a >= k || b >= k || a == b {
                return Err(StateError::Invalid(format!("bad quadratic pair ({a}, {b})")));
            }
            quad[a].flip(b);
            quad[b].flip(a);
        }
        Ok(StabilizerState {
            n,
            offset,
            basis,
            lin: lin.into_iter().map(|d| d % 4).collect(),
            quad,
            scalar,
            zero: scalar.is_zero(),
        }
        .normalized_zero())
    }

    fn normalized_zero(self) -> Self {
        if self.zero || self.scalar.is_zero() {
            Self::zero(self.n)
        } else {
            self
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Dimension of the affine support.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn scalar(&self) -> Scalar {
        self.scalar
    }

    pub fn offset(&self) -> &F2Vector {
        &self.offset
    }

    pub fn basis(&self) -> &[F2Vector] {
        &self.basis
    }

    pub fn scale(&mut self, s: Scalar) {
        if self.zero {
            return;
        }
        self.scalar = self.scalar.mul(s);
        if self.scalar.is_zero() {
            *self = Self::zero(self.n);
        }
    }

    pub fn scaled(mut self, s: Scalar) -> Self {
        self.scale(s);
        self
    }

    /// `|scalar|^2 * 2^{dim}`.
    pub fn norm_sqr(&self) -> f64 {
        if self.zero {
            return 0.0;
        }
        self.scalar.norm_sqr() * 2f64.powi(self.basis.len() as i32)
    }

    fn check_qubit(&self, q: usize) -> Result<(), StateError> {
        if q >= self.n {
            Err(StateError::BadQubit {
                index: q,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    // ---- variable bookkeeping -------------------------------------------

    fn k(&self) -> usize {
        self.basis.len()
    }

    /// Row operation `g_r ^= g_p`, i.e. the substitution `y_p -> y_p + y_r`,
    /// with the phase polynomial rewritten so the state is unchanged.
    fn row_add(&mut self, r: usize, p: usize) {
        debug_assert_ne!(r, p);
        let src = self.basis[p].clone();
        self.basis[r].xor_assign(&src);

        let dp = self.lin[p];
        let jpr = self.quad[p].get(r);
        self.lin[r] = (self.lin[r] + dp + if jpr { 2 } else { 0 }) % 4;
        // Row r of J picks up row p (outside the {p, r} block); keep symmetry.
        let row_p = self.quad[p].clone();
        for l in row_p.iter_ones() {
            if l != r {
                self.quad[r].flip(l);
                self.quad[l].flip(r);
            }
        }
        if dp & 1 == 1 {
            self.quad[p].flip(r);
            self.quad[r].flip(p);
        }
    }

    fn swap_vars(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.basis.swap(a, b);
        self.lin.swap(a, b);
        self.quad.swap(a, b);
        for row in &mut self.quad {
            let (va, vb) = (row.get(a), row.get(b));
            row.set(a, vb);
            row.set(b, va);
        }
    }

    /// Complements variable `j` by moving `g_j` into the offset.
    fn shift_var(&mut self, j: usize) {
        let g = self.basis[j].clone();
        self.offset.xor_assign(&g);
        let d = self.lin[j];
        self.scalar = self.scalar.times_phase8(2 * d);
        self.lin[j] = (4 - d) % 4;
        let row = self.quad[j].clone();
        for l in row.iter_ones() {
            self.lin[l] = (self.lin[l] + 2) % 4;
        }
    }

    fn remove_var(&mut self, j: usize) {
        self.basis.remove(j);
        self.lin.remove(j);
        self.quad.remove(j);
        for row in &mut self.quad {
            *row = row.remove(j);
        }
    }

    /// Substitutes the constant `c` for variable `j` and drops it.
    fn fix_var(&mut self, j: usize, c: bool) {
        if c {
            self.shift_var(j);
        }
        self.remove_var(j);
    }

    fn push_var(&mut self, row: F2Vector, d: u8, partners: &[usize]) {
        let k = self.k();
        for r in &mut self.quad {
            r.push(false);
        }
        let mut new_row = F2Vector::zeros(k + 1);
        for &p in partners {
            new_row.flip(p);
            self.quad[p].flip(k);
        }
        self.quad.push(new_row);
        self.basis.push(row);
        self.lin.push(d % 4);
    }

    /// Variables whose basis row touches qubit `q`.
    fn column(&self, q: usize) -> F2Vector {
        F2Vector::from_bits(self.basis.iter().map(|g| g.get(q)))
    }

    /// Leaves at most one basis row with a 1 in column `q` and returns it.
    fn isolate(&mut self, q: usize) -> Option<usize> {
        let j0 = (0..self.k()).find(|&j| self.basis[j].get(q))?;
        for j in 0..self.k() {
            if j != j0 && self.basis[j].get(q) {
                self.row_add(j, j0);
            }
        }
        Some(j0)
    }

    /// After `isolate(q)` returned `j0`, tries to turn `g_{j0}` into the unit
    /// vector `e_q` using the other rows.
    fn make_unit_row(&mut self, j0: usize, q: usize) -> bool {
        let mut target = self.basis[j0].clone();
        target.flip(q);
        if target.is_zero() {
            return true;
        }
        let k = self.k();
        // Eliminate over the other rows while tracking combinations.
        let mut rows: Vec<(F2Vector, F2Vector)> = (0..k)
            .filter(|&j| j != j0)
            .map(|j| (self.basis[j].clone(), F2Vector::unit(k, j)))
            .collect();
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut next = 0;
        for col in 0..self.n {
            if next == rows.len() {
                break;
            }
            let Some(p) = (next..rows.len()).find(|&i| rows[i].0.get(col)) else {
                continue;
            };
            rows.swap(next, p);
            let pivot = rows[next].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != next && row.0.get(col) {
                    row.0.xor_assign(&pivot.0);
                    row.1.xor_assign(&pivot.1);
                }
            }
            pivots.push((col, next));
            next += 1;
        }
        let mut combo = F2Vector::zeros(k);
        let mut rest = target;
        for &(col, i) in &pivots {
            if rest.get(col) {
                rest.xor_assign(&rows[i].0);
                combo.xor_assign(&rows[i].1);
            }
        }
        if !rest.is_zero() {
            return false;
        }
        for j in combo.iter_ones() {
            self.row_add(j0, j);
        }
        debug_assert_eq!(self.basis[j0], F2Vector::unit(self.n, q));
        true
    }

    // ---- gates ------------------------------------------------------------

    pub fn apply(&mut self, gate: Gate) -> Result<(), StateError> {
        for q in gate.qubits() {
            self.check_qubit(q)?;
        }
        if let Gate::CX(a, b) | Gate::CZ(a, b) = gate {
            if a == b {
                return Err(StateError::RepeatedQubit(a));
            }
        }
        if self.zero {
            return Ok(());
        }
        match gate {
            Gate::X(q) => self.offset.flip(q),
            Gate::Z(q) => self.apply_z(q),
            Gate::Y(q) => {
                self.apply_z(q);
                self.offset.flip(q);
                self.scalar = self.scalar.times_phase8(2);
            }
            Gate::S(q) => self.apply_s(q, false),
            Gate::Sdg(q) => self.apply_s(q, true),
            Gate::H(q) => self.apply_h(q),
            Gate::A(q) => {
                self.offset.flip(q);
                self.apply_s(q, false);
                self.scalar = self.scalar.times_phase8(7);
            }
            Gate::Adg(q) => {
                self.apply_s(q, true);
                self.offset.flip(q);
                self.scalar = self.scalar.times_phase8(1);
            }
            Gate::CX(c, t) => {
                for g in &mut self.basis {
                    if g.get(c) {
                        g.flip(t);
                    }
                }
                if self.offset.get(c) {
                    self.offset.flip(t);
                }
            }
            Gate::CZ(a, b) => self.apply_cz(a, b),
        }
        Ok(())
    }

    pub fn apply_all(&mut self, gates: &[Gate]) -> Result<(), StateError> {
        gates.iter().try_for_each(|&g| self.apply(g))
    }

    /// Returns a new state with `gate` applied.
    pub fn apply_gate(&self, gate: Gate) -> Result<Self, StateError> {
        let mut s = self.clone();
        s.apply(gate)?;
        Ok(s)
    }

    fn apply_z(&mut self, q: usize) {
        if self.offset.get(q) {
            self.scalar = self.scalar.times_phase8(4);
        }
        for j in 0..self.k() {
            if self.basis[j].get(q) {
                self.lin[j] = (self.lin[j] + 2) % 4;
            }
        }
    }

    /// Multiplies by `i^{x_q}` (or `(-i)^{x_q}`).
    fn apply_s(&mut self, q: usize, dagger: bool) {
        let col = self.column(q);
        let c = self.offset.get(q);
        // i^{c + s} with s = XOR of the column variables.
        let step: u8 = if dagger ^ c { 3 } else { 1 };
        if c {
            self.scalar = self.scalar.times_phase8(if dagger { 6 } else { 2 });
        }
        let members: Vec<usize> = col.iter_ones().collect();
        for (idx, &j) in members.iter().enumerate() {
            self.lin[j] = (self.lin[j] + step) % 4;
            for &l in &members[idx + 1..] {
                self.quad[j].flip(l);
                self.quad[l].flip(j);
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let ca = self.offset.get(a);
        let cb = self.offset.get(b);
        let ta = self.column(a);
        let tb = self.column(b);
        if ca && cb {
            self.scalar = self.scalar.times_phase8(4);
        }
        if ca {
            for j in tb.iter_ones() {
                self.lin[j] = (self.lin[j] + 2) % 4;
            }
        }
        if cb {
            for j in ta.iter_ones() {
                self.lin[j] = (self.lin[j] + 2) % 4;
            }
        }
        for j in ta.iter_ones() {
            self.quad[j].xor_assign(&tb);
        }
        for j in tb.iter_ones() {
            self.quad[j].xor_assign(&ta);
        }
        // Diagonal terms y_j^2 = y_j.
        for j in 0..self.k() {
            if ta.get(j) && tb.get(j) {
                self.lin[j] = (self.lin[j] + 2) % 4;
            }
            // The two xors above cancel on the diagonal.
            debug_assert!(!self.quad[j].get(j));
        }
    }

    fn apply_h(&mut self, q: usize) {
        let hq = self.offset.get(q);
        let pivot = self.isolate(q);
        if let Some(j0) = pivot {
            if self.make_unit_row(j0, q) {
                // y_{j0} only drives x_q: sum it out against the new bit.
                let d = self.lin[j0];
                let partners = {
                    let mut row = self.quad[j0].clone();
                    row.set(j0, false);
                    row
                };
                if d % 2 == 0 {
                    // x'_q = L(y) + d/2.
                    for j in partners.iter_ones() {
                        self.basis[j].set(q, true);
                        if hq {
                            self.lin[j] = (self.lin[j] + 2) % 4;
                        }
                    }
                    self.offset.set(q, d == 2);
                    if hq && d == 2 {
                        self.scalar = self.scalar.times_phase8(4);
                    }
                    self.scalar = self.scalar.times_sqrt2_pow(1);
                    self.remove_var(j0);
                } else {
                    // sum_y i^{d y} (-1)^{y w} = sqrt2 e^{+-i pi/4} (-+i)^w
                    let sigma: u8 = if d == 1 { 3 } else { 1 };
                    self.scalar = self.scalar.times_phase8(if d == 1 { 1 } else { 7 });
                    let support: Vec<usize> = partners.iter_ones().collect();
                    for (idx, &j) in support.iter().enumerate() {
                        self.lin[j] = (self.lin[j] + sigma) % 4;
                        for &l in &support[idx + 1..] {
                            self.quad[j].flip(l);
                            self.quad[l].flip(j);
                        }
                    }
                    self.lin[j0] = (sigma + if hq { 2 } else { 0 }) % 4;
                    self.offset.set(q, false);
                }
                return;
            }
            // e_q is outside the row space: x_q becomes a fresh free bit.
            self.basis[j0].set(q, false);
            self.offset.set(q, false);
            let row = F2Vector::unit(self.n, q);
            self.push_var(row, if hq { 2 } else { 0 }, &[j0]);
            self.scalar = self.scalar.times_sqrt2_pow(-1);
        } else {
            self.offset.set(q, false);
            let row = F2Vector::unit(self.n, q);
            self.push_var(row, if hq { 2 } else { 0 }, &[]);
            self.scalar = self.scalar.times_sqrt2_pow(-1);
        }
    }

    // ---- postselection, products, evaluation ------------------------------

    /// `(<bit|_q (x) I) |s>` as an `(n-1)`-qubit state; may be the zero state.
    pub fn postselect(&self, q: usize, bit: bool) -> Result<Self, StateError> {
        self.check_qubit(q)?;
        let mut s = self.clone();
        s.postselect_in_place(q, bit);
        Ok(s)
    }

    pub(crate) fn postselect_in_place(&mut self, q: usize, bit: bool) {
        if self.zero {
            *self = Self::zero(self.n - 1);
            return;
        }
        match self.isolate(q) {
            None => {
                if self.offset.get(q) != bit {
                    *self = Self::zero(self.n - 1);
                    return;
                }
            }
            Some(j0) => {
                let c = self.offset.get(q) ^ bit;
                self.fix_var(j0, c);
                debug_assert_eq!(self.offset.get(q), bit);
            }
        }
        self.offset = self.offset.remove(q);
        for g in &mut self.basis {
            *g = g.remove(q);
        }
        self.n -= 1;
    }

    /// Tensor product with `other` placed on the higher qubit indices.
    pub fn tensor(&self, other: &StabilizerState) -> StabilizerState {
        let n = self.n + other.n;
        if self.zero || other.zero {
            return Self::zero(n);
        }
        let k1 = self.k();
        let k2 = other.k();
        let pad_hi = F2Vector::zeros(other.n);
        let pad_lo = F2Vector::zeros(self.n);
        let mut basis: Vec<F2Vector> = self.basis.iter().map(|g| g.concat(&pad_hi)).collect();
        basis.extend(other.basis.iter().map(|g| pad_lo.concat(g)));
        let zk2 = F2Vector::zeros(k2);
        let zk1 = F2Vector::zeros(k1);
        let mut quad: Vec<F2Vector> = self.quad.iter().map(|r| r.concat(&zk2)).collect();
        quad.extend(other.quad.iter().map(|r| zk1.concat(r)));
        let mut lin = self.lin.clone();
        lin.extend_from_slice(&other.lin);
        StabilizerState {
            n,
            offset: self.offset.concat(&other.offset),
            basis,
            lin,
            quad,
            scalar: self.scalar.mul(other.scalar),
            zero: false,
        }
    }

    /// Qubit `i` of the result is qubit `perm[i]` of `self`.
    pub fn permute_qubits(&self, perm: &[usize]) -> StabilizerState {
        assert_eq!(perm.len(), self.n);
        let mut s = self.clone();
        s.offset = self.offset.gather(perm);
        s.basis = self.basis.iter().map(|g| g.gather(perm)).collect();
        s
    }

    /// Entrywise complex conjugate.
    pub fn conjugate(&self) -> StabilizerState {
        let mut s = self.clone();
        s.scalar = s.scalar.conj();
        for d in &mut s.lin {
            *d = (4 - *d) % 4;
        }
        s
    }

    /// Solves `x = h + G^T y`; `None` when `x` is outside the support.
    fn coordinates(&self, x: &F2Vector) -> Option<F2Vector> {
        let k = self.k();
        let mut rows: Vec<(F2Vector, F2Vector)> = self
            .basis
            .iter()
            .enumerate()
            .map(|(j, g)| (g.clone(), F2Vector::unit(k, j)))
            .collect();
        let mut rest = x.xor(&self.offset);
        let mut y = F2Vector::zeros(k);
        let mut next = 0;
        for col in 0..self.n {
            if next == k {
                break;
            }
            let Some(p) = (next..k).find(|&i| rows[i].0.get(col)) else {
                continue;
            };
            rows.swap(next, p);
            let pivot = rows[next].clone();
            for row in rows.iter_mut().skip(next + 1) {
                if row.0.get(col) {
                    row.0.xor_assign(&pivot.0);
                    row.1.xor_assign(&pivot.1);
                }
            }
            if rest.get(col) {
                rest.xor_assign(&pivot.0);
                y.xor_assign(&pivot.1);
            }
            next += 1;
        }
        rest.is_zero().then_some(y)
    }

    /// Power of `i` (mod 4) of the phase polynomial at coordinates `y`.
    fn phase_exponent(&self, y: &F2Vector) -> u8 {
        let mut acc: u32 = 0;
        let mut pairs: u32 = 0;
        for j in y.iter_ones() {
            acc += self.lin[j] as u32;
            pairs += self.quad[j].and_count(y);
        }
        ((acc + pairs) % 4) as u8
    }

    /// Exact amplitude `<x|s>` as a scalar; `None` means zero.
    pub fn amplitude_scalar(&self, x: &F2Vector) -> Result<Option<Scalar>, StateError> {
        if x.len() != self.n {
            return Err(StateError::LabelLength {
                expected: self.n,
                found: x.len(),
            });
        }
        if self.zero {
            return Ok(None);
        }
        Ok(self
            .coordinates(x)
            .map(|y| self.scalar.times_phase8(2 * self.phase_exponent(&y))))
    }

    pub fn amplitude(&self, x: &F2Vector) -> Result<Complex64, StateError> {
        Ok(self
            .amplitude_scalar(x)?
            .map(|s| s.to_complex())
            .unwrap_or_default())
    }

    /// Visits every nonzero amplitude as `(basis index, amplitude)`; `n` must
    /// fit in a machine word.
    pub fn for_each_amplitude(&self, mut f: impl FnMut(usize, Complex64)) {
        if self.zero {
            return;
        }
        assert!(self.n < usize::BITS as usize);
        let k = self.k();
        let rows: Vec<usize> = self.basis.iter().map(|g| g.to_u64() as usize).collect();
        let base = self.scalar.to_complex();
        let phases = [
            base,
            base * Complex64::new(0.0, 1.0),
            -base,
            base * Complex64::new(0.0, -1.0),
        ];
        let mut x = self.offset.to_u64() as usize;
        let mut y = F2Vector::zeros(k);
        let mut e: u32 = 0;
        f(x, phases[0]);
        for step in 1u64..(1u64 << k) {
            let j = step.trailing_zeros() as usize;
            // Toggling y_j changes the exponent by +-(d_j + 2 J_j.y).
            let cross = self.quad[j].and_count(&y);
            let delta = (self.lin[j] as u32 + 2 * cross) % 4;
            if y.get(j) {
                e = (e + 4 - delta) % 4;
            } else {
                e = (e + delta) % 4;
            }
            y.flip(j);
            x ^= rows[j];
            f(x, phases[e as usize]);
        }
    }

    pub fn to_dense(&self) -> Result<Vec<Complex64>, StateError> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<Vec<Complex64>, StateError> {
        if self.n > cap {
            return Err(StateError::DenseCap { n: self.n, cap });
        }
        let mut v = vec![Complex64::new(0.0, 0.0); 1usize << self.n];
        self.for_each_amplitude(|i, a| v[i] = a);
        Ok(v)
    }

    /// Adds `coeff * |s>` into a dense vector of matching size.
    pub fn accumulate_dense(&self, coeff: Complex64, out: &mut [Complex64]) {
        assert_eq!(out.len(), 1usize << self.n);
        self.for_each_amplitude(|i, a| out[i] += coeff * a);
    }

    /// Clifford gates `U` and a scalar `c` with `U |s> = c |0^n>`.
    pub fn reduction_to_zero(&self) -> Result<(Vec<Gate>, Scalar), StateError> {
        if self.zero {
            return Err(StateError::Invalid("zero state has no reduction".into()));
        }
        let mut s = self.clone();
        let mut gates = Vec::new();
        // Reduced row echelon form of the basis, carried through the phases.
        let mut pivots = Vec::new();
        let mut next = 0;
        for col in 0..s.n {
            if next == s.k() {
                break;
            }
            let Some(p) = (next..s.k()).find(|&i| s.basis[i].get(col)) else {
                continue;
            };
            s.swap_vars(next, p);
            for j in 0..s.k() {
                if j != next && s.basis[j].get(col) {
                    s.row_add(j, next);
                }
            }
            pivots.push(col);
            next += 1;
        }
        let mut push = |s: &mut StabilizerState, g: Gate| {
            s.apply(g).expect("indices in range");
            gates.push(g);
        };
        for (j, &p) in pivots.iter().enumerate() {
            let targets: Vec<usize> = s.basis[j].iter_ones().filter(|&c| c != p).collect();
            for c in targets {
                push(&mut s, Gate::CX(p, c));
            }
        }
        let ones: Vec<usize> = s.offset.iter_ones().collect();
        for q in ones {
            push(&mut s, Gate::X(q));
        }
        for j in 0..pivots.len() {
            for l in (j + 1)..pivots.len() {
                if s.quad[j].get(l) {
                    push(&mut s, Gate::CZ(pivots[j], pivots[l]));
                }
            }
        }
        for (j, &p) in pivots.iter().enumerate() {
            match s.lin[j] {
                1 => push(&mut s, Gate::Sdg(p)),
                2 => push(&mut s, Gate::Z(p)),
                3 => push(&mut s, Gate::S(p)),
                _ => {}
            }
        }
        for &p in &pivots {
            push(&mut s, Gate::H(p));
        }
        debug_assert_eq!(s.k(), 0);
        debug_assert!(s.offset.is_zero());
        Ok((gates, s.scalar))
    }

    /// Equivalent state with the basis in reduced row echelon form and the
    /// offset cleared on pivot columns, so `y_j` equals `x` at pivot `j`.
    fn canonical(&self) -> (StabilizerState, Vec<usize>) {
        let mut s = self.clone();
        let mut pivots = Vec::new();
        let mut next = 0;
        for col in 0..s.n {
            if next == s.k() {
                break;
            }
            let Some(p) = (next..s.k()).find(|&i| s.basis[i].get(col)) else {
                continue;
            };
            s.swap_vars(next, p);
            for j in 0..s.k() {
                if j != next && s.basis[j].get(col) {
                    s.row_add(j, next);
                }
            }
            pivots.push(col);
            next += 1;
        }
        for (j, &p) in pivots.iter().enumerate() {
            if s.offset.get(p) {
                s.shift_var(j);
            }
        }
        (s, pivots)
    }

    /// Serializable description in terms of functions of `x` on the support.
    pub fn to_json(&self) -> StateJson {
        let n = self.n;
        if self.zero {
            return StateJson {
                n,
                basis: Vec::new(),
                offset: F2Vector::zeros(n).to_string(),
                l: F2Vector::zeros(n).to_string(),
                q: QuadJson {
                    upper: vec![F2Vector::zeros(n).to_string(); n],
                    diag: F2Vector::zeros(n).to_string(),
                },
                scalar: ScalarJson::from(Scalar::from_complex(Complex64::new(0.0, 0.0))),
                is_zero: true,
            };
        }
        let (s, pivots) = self.canonical();
        let mut l = F2Vector::zeros(n);
        let mut diag = F2Vector::zeros(n);
        let mut upper = vec![F2Vector::zeros(n); n];
        for (j, &p) in pivots.iter().enumerate() {
            let d = s.lin[j];
            // i^d x = i^{x (d mod 2)} (-1)^{x [d >= 2]}
            l.set(p, d % 2 == 1);
            diag.set(p, d >= 2);
        }
        // i^{sum} = i^{xor} (-1)^{pairs}: fold the pairs into q.
        for (j, &pj) in pivots.iter().enumerate() {
            for (m, &pm) in pivots.iter().enumerate().skip(j + 1) {
                let bit = s.quad[j].get(m) ^ (s.lin[j] % 2 == 1 && s.lin[m] % 2 == 1);
                upper[pj].set(pm, bit);
            }
        }
        StateJson {
            n,
            basis: s.basis.iter().map(|g| g.to_string()).collect(),
            offset: s.offset.to_string(),
            l: l.to_string(),
            q: QuadJson {
                upper: upper.iter().map(|r| r.to_string()).collect(),
                diag: diag.to_string(),
            },
            scalar: ScalarJson::from(s.scalar),
            is_zero: false,
        }
    }

    pub fn from_json(j: &StateJson) -> Result<Self, StateError> {
        let n = j.n;
        let parse = |s: &str| -> Result<F2Vector, StateError> {
            let v = F2Vector::parse(s)?;
            if v.len() != n {
                return Err(StateError::Invalid(format!(
                    "bit string {s:?} does not have {n} entries"
                )));
            }
            Ok(v)
        };
        if j.is_zero {
            return Ok(Self::zero(n));
        }
        let offset = parse(&j.offset)?;
        let basis = j
            .basis
            .iter()
            .map(|b| parse(b))
            .collect::<Result<Vec<_>, _>>()?;
        let l = parse(&j.l)?;
        let diag = parse(&j.q.diag)?;
        if j.q.upper.len() != n {
            return Err(StateError::Invalid(format!(
                "q.upper has {} rows, expected {n}",
                j.q.upper.len()
            )));
        }
        let upper = j
            .q
            .upper
            .iter()
            .map(|r| parse(r))
            .collect::<Result<Vec<_>, _>>()?;
        let k = basis.len();
        if F2Matrix::from_rows(n, basis.clone())?.rank() != k {
            return Err(F2Error::DependentBasis.into());
        }
        // Phase exponent (power of i) of i^{l(x)} (-1)^{q(x)} at a point.
        let exponent_at = |x: &F2Vector| -> u8 {
            let lx = l.dot(x) as u8;
            let mut qx = diag.dot(x) as u8;
            for a in x.iter_ones() {
                let mut row = upper[a].clone();
                for b in 0..=a {
                    row.set(b, false);
                }
                qx ^= row.dot(x) as u8;
            }
            (lx + 2 * qx) % 4
        };
        let point = |ys: &[usize]| {
            let mut x = offset.clone();
            for &y in ys {
                x.xor_assign(&basis[y]);
            }
            x
        };
        // The restriction to the support is a Z4 quadratic form in y; read off
        // its coefficients from the values at 0, e_j and e_j + e_l.
        let e0 = exponent_at(&point(&[]));
        let lin: Vec<u8> = (0..k)
            .map(|a| (exponent_at(&point(&[a])) + 4 - e0) % 4)
            .collect();
        let mut pairs = Vec::new();
        for a in 0..k {
            for b in (a + 1)..k {
                let e = exponent_at(&point(&[a, b]));
                let rel = (e + 8 - e0 - lin[a] - lin[b]) % 4;
                match rel {
                    0 => {}
                    2 => pairs.push((a, b)),
                    _ => {
                        return Err(StateError::Invalid(
                            "phase function is not quadratic on the support".into(),
                        ))
                    }
                }
            }
        }
        let scalar = Scalar::try_from(&j.scalar)?.times_phase8(2 * e0);
        Self::from_parts(offset, basis, lin, &pairs, scalar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarJson {
    pub phase8: u8,
    pub sqrt2_exponent: i32,
    pub re: f64,
    pub im: f64,
}

impl From<Scalar> for ScalarJson {
    fn from(s: Scalar) -> Self {
        ScalarJson {
            phase8: s.phase8,
            sqrt2_exponent: s.sqrt2_exp,
            re: s.factor.re,
            im: s.factor.im,
        }
    }
}

impl TryFrom<&ScalarJson> for Scalar {
    type Error = StateError;

    fn try_from(j: &ScalarJson) -> Result<Self, StateError> {
        if j.phase8 >= 8 || !j.re.is_finite() || !j.im.is_finite() {
            return Err(StateError::Invalid(format!("bad scalar {j:?}")));
        }
        Ok(Scalar::new(j.phase8, j.sqrt2_exponent, Complex64::new(j.re, j.im)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadJson {
    pub upper: Vec<String>,
    pub diag: String,
}

/// JSON form: amplitude of `x` in `offset + span(basis)` is
/// `scalar * i^{l.x mod 2} * (-1)^{q(x)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub n: usize,
    pub basis: Vec<String>,
    pub offset: String,
    pub l: String,
    pub q: QuadJson,
    pub scalar: ScalarJson,
    pub is_zero: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denseoracle::{self, DenseGate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> F2Vector {
        F2Vector::parse(s).unwrap()
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    pub(crate) fn random_gate(rng: &mut impl Rng, n: usize) -> Gate {
        let q = rng.gen_range(0..n);
        let mut r = rng.gen_range(0..n.max(2) - 1);
        if n > 1 && r >= q {
            r += 1;
        }
        let two = n > 1;
        match rng.gen_range(0..if two { 10 } else { 8 }) {
            0 => Gate::X(q),
            1 => Gate::Y(q),
            2 => Gate::Z(q),
            3 => Gate::S(q),
            4 => Gate::Sdg(q),
            5 | 6 => Gate::H(q),
            7 => {
                if rng.gen_bool(0.5) {
                    Gate::A(q)
                } else {
                    Gate::Adg(q)
                }
            }
            8 => Gate::CX(q, r),
            _ => Gate::CZ(q, r),
        }
    }

    #[test]
    fn basis_states() {
        let s = StabilizerState::basis_state(&bits("00"));
        assert_eq!(s.norm_sqr(), 1.0);
        let s = StabilizerState::basis_state(&bits("101"));
        let d = s.to_dense().unwrap();
        // "101": qubits 0 and 2 set -> index 5
        for (i, a) in d.iter().enumerate() {
            assert_eq!(a.re, if i == 5 { 1.0 } else { 0.0 });
        }
        assert_eq!(s.amplitude(&bits("101")).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn hadamard_on_one() {
        let s = StabilizerState::basis_state(&bits("1")).apply_gate(Gate::H(0)).unwrap();
        let d = s.to_dense().unwrap();
        assert!(close(
            &d,
            &[Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(-FRAC_1_SQRT_2, 0.0)],
            1e-15
        ));
    }

    #[test]
    fn z_on_plus_gives_minus_and_h_squared_is_identity() {
        let mut s = StabilizerState::zeros_state(1);
        s.apply(Gate::H(0)).unwrap();
        s.apply(Gate::Z(0)).unwrap();
        let d = s.to_dense().unwrap();
        assert!(close(
            &d,
            &[Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(-FRAC_1_SQRT_2, 0.0)],
            1e-15
        ));
        let mut s = StabilizerState::zeros_state(1);
        s.apply(Gate::H(0)).unwrap();
        s.apply(Gate::H(0)).unwrap();
        assert_eq!(s, StabilizerState::zeros_state(1));
    }

    #[test]
    fn a_gate_fixes_t_and_negates_t_perp() {
        // |T> = (|0> + e^{i pi/4}|1>)/sqrt2 as a two-term sum of basis states.
        let t = [Complex64::new(FRAC_1_SQRT_2, 0.0), eighth_root(1) * FRAC_1_SQRT_2];
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (x, amp) in t.iter().enumerate() {
            let mut s = StabilizerState::basis_state(&F2Vector::from_u64(1, x as u64));
            s.apply(Gate::A(0)).unwrap();
            s.accumulate_dense(*amp, &mut out);
        }
        assert!(close(&out, &t, 1e-15));
        let tp = [t[0], -t[1]];
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (x, amp) in tp.iter().enumerate() {
            let mut s = StabilizerState::basis_state(&F2Vector::from_u64(1, x as u64));
            s.apply(Gate::A(0)).unwrap();
            s.accumulate_dense(*amp, &mut out);
        }
        assert!(close(&out, &[-tp[0], -tp[1]], 1e-15));
    }

    #[test]
    fn bad_indices_are_rejected() {
        let mut s = StabilizerState::zeros_state(2);
        assert!(matches!(s.apply(Gate::H(2)), Err(StateError::BadQubit { .. })));
        assert!(matches!(s.apply(Gate::CX(1, 1)), Err(StateError::RepeatedQubit(1))));
        assert!(s.postselect(5, false).is_err());
    }

    fn bell() -> StabilizerState {
        let mut s = StabilizerState::zeros_state(2);
        s.apply(Gate::H(0)).unwrap();
        s.apply(Gate::CX(0, 1)).unwrap();
        s
    }

    #[test]
    fn postselect_bell_and_basis() {
        let p = bell().postselect(0, false).unwrap();
        assert_eq!(p.num_qubits(), 1);
        let d = p.to_dense().unwrap();
        assert!(close(&d, &[Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, 0.0)], 1e-15));

        let one = StabilizerState::basis_state(&bits("1"));
        assert!(one.postselect(0, false).unwrap().is_zero());
    }

    fn even_state(m: usize) -> StabilizerState {
        let ones = F2Matrix::from_rows(m, vec![F2Vector::ones(m)]).unwrap();
        let basis = ones.kernel_basis();
        let k = basis.len();
        StabilizerState::from_parts(
            F2Vector::zeros(m),
            basis,
            vec![0; k],
            &[],
            Scalar::exact(0, -(m as i32 - 1)),
        )
        .unwrap()
    }

    #[test]
    fn even_weight_amplitudes() {
        let e6 = even_state(6);
        let a = e6.amplitude(&bits("000000")).unwrap();
        assert!((a.re - 2f64.powf(-2.5)).abs() < 1e-15 && a.im == 0.0);
        assert_eq!(e6.amplitude(&bits("100000")).unwrap(), Complex64::new(0.0, 0.0));

        let mut k6 = e6.clone();
        for i in 0..6 {
            for j in (i + 1)..6 {
                k6.apply(Gate::CZ(i, j)).unwrap();
            }
        }
        let a = k6.amplitude(&bits("110000")).unwrap();
        assert!((a.re + 2f64.powf(-2.5)).abs() < 1e-15);
    }

    #[test]
    fn postselect_even_state_matches_dense() {
        let e6 = even_state(6);
        let p = e6.postselect(5, false).unwrap();
        let dense = e6.to_dense().unwrap();
        let expect: Vec<Complex64> = (0..32).map(|i| dense[i]).collect();
        assert!(close(&p.to_dense().unwrap(), &expect, 1e-15));
        // Uniform over even-weight strings of 5 bits with amplitude 2^{-5/2}.
        for (i, a) in p.to_dense().unwrap().iter().enumerate() {
            let even = (i as u32).count_ones() % 2 == 0;
            let want = if even { 2f64.powf(-2.5) } else { 0.0 };
            assert!((a.re - want).abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_products() {
        let s = StabilizerState::basis_state(&bits("0")).tensor(&StabilizerState::basis_state(&bits("1")));
        assert_eq!(s.amplitude(&bits("01")).unwrap(), Complex64::new(1.0, 0.0));
        assert!(StabilizerState::zero(1).tensor(&bell()).is_zero());
        let e4 = even_state(4);
        let t = e4.tensor(&e4);
        let a = e4.to_dense().unwrap();
        let kron = denseoracle::kron(&a, &a);
        assert!(close(&t.to_dense().unwrap(), &kron, 1e-15));
    }

    #[test]
    fn dense_cap() {
        let s = StabilizerState::zeros_state(30);
        assert!(matches!(s.to_dense(), Err(StateError::DenseCap { .. })));
        assert_eq!(
            StabilizerState::zeros_state(1).to_dense().unwrap(),
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        );
    }

    #[test]
    fn random_clifford_circuit_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = StabilizerState::zeros_state(8);
        for _ in 0..200 {
            s.apply(random_gate(&mut rng, 8)).unwrap();
        }
        let norm: f64 = s.to_dense().unwrap().iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_gate_sequences_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..300 {
            let n = rng.gen_range(1..=10);
            let mut s = StabilizerState::zeros_state(n);
            let mut v = denseoracle::basis_vector(n, 0);
            for _ in 0..rng.gen_range(0..=50) {
                let g = random_gate(&mut rng, n);
                s.apply(g).unwrap();
                v = denseoracle::apply_gate(&v, n, DenseGate::from(g));
            }
            let d = s.to_dense().unwrap();
            assert!(close(&d, &v, 1e-12), "trial {trial} n={n}");
            // amplitude agrees with the dense export entrywise
            for (i, want) in d.iter().enumerate().take(64) {
                let x = F2Vector::from_u64(n, i as u64);
                assert!((s.amplitude(&x).unwrap() - want).norm() < 1e-14);
            }
            let dn: f64 = d.iter().map(|a| a.norm_sqr()).sum();
            assert!((s.norm_sqr() - dn).abs() < 1e-12);
        }
    }

    #[test]
    fn postselection_preserves_total_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.gen_range(1..=8);
            let mut s = StabilizerState::zeros_state(n);
            for _ in 0..40 {
                s.apply(random_gate(&mut rng, n)).unwrap();
            }
            let q = rng.gen_range(0..n);
            let p0 = s.postselect(q, false).unwrap();
            let p1 = s.postselect(q, true).unwrap();
            assert!((p0.norm_sqr() + p1.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
            // and against the dense projection
            let d = s.to_dense().unwrap();
            for (bit, p) in [(0usize, &p0), (1, &p1)] {
                let expect = denseoracle::postselect(&d, n, q, bit == 1);
                assert!(close(&p.to_dense().unwrap(), &expect, 1e-12));
            }
        }
    }

    #[test]
    fn reduction_maps_state_to_zero_string() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..=7);
            let mut s = StabilizerState::zeros_state(n);
            for _ in 0..30 {
                s.apply(random_gate(&mut rng, n)).unwrap();
            }
            let (gates, c) = s.reduction_to_zero().unwrap();
            let mut t = s.clone();
            t.apply_all(&gates).unwrap();
            let mut want = vec![Complex64::new(0.0, 0.0); 1 << n];
            want[0] = c.to_complex();
            assert!(close(&t.to_dense().unwrap(), &want, 1e-12));
            assert!((c.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_preserves_amplitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.gen_range(1..=7);
            let mut s = StabilizerState::zeros_state(n);
            for _ in 0..30 {
                s.apply(random_gate(&mut rng, n)).unwrap();
            }
            let j = s.to_json();
            let text = serde_json::to_string(&j).unwrap();
            let back = StabilizerState::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
            assert!(close(&back.to_dense().unwrap(), &s.to_dense().unwrap(), 1e-12));
            // The JSON semantics alone reproduce every amplitude.
            let d = s.to_dense().unwrap();
            for (i, want) in d.iter().enumerate() {
                let x = F2Vector::from_u64(n, i as u64);
                let got = json_amplitude(&j, &x);
                assert!((got - want).norm() < 1e-12);
            }
        }
        let z = StabilizerState::zero(3);
        assert!(StabilizerState::from_json(&z.to_json()).unwrap().is_zero());
    }

    /// Direct evaluation of the documented JSON semantics.
    fn json_amplitude(j: &StateJson, x: &F2Vector) -> Complex64 {
        if j.is_zero {
            return Complex64::new(0.0, 0.0);
        }
        let basis: Vec<F2Vector> = j.basis.iter().map(|b| bits(b)).collect();
        let offset = bits(&j.offset);
        let members: Vec<F2Vector> = crate::f2linalg::affine_space_members(&basis, &offset)
            .unwrap()
            .collect();
        if !members.contains(x) {
            return Complex64::new(0.0, 0.0);
        }
        let l = bits(&j.l);
        let diag = bits(&j.q.diag);
        let mut q = diag.dot(x) as u32;
        for a in 0..x.len() {
            for b in (a + 1)..x.len() {
                if bits(&j.q.upper[a]).get(b) && x.get(a) && x.get(b) {
                    q += 1;
                }
            }
        }
        let s = Scalar::try_from(&j.scalar).unwrap().to_complex();
        let il = if l.dot(x) { Complex64::new(0.0, 1.0) } else { Complex64::new(1.0, 0.0) };
        s * il * if q % 2 == 1 { -1.0 } else { 1.0 }
    }

    #[test]
    fn scalar_arithmetic_is_exact() {
        let a = Scalar::exact(3, -5);
        let b = Scalar::exact(6, 7);
        let c = a.mul(b);
        assert_eq!(c.phase8, 1);
        assert_eq!(c.sqrt2_exp, 2);
        assert!((c.to_complex() - eighth_root(1) * 2.0).norm() < 1e-15);
        // deep exponents survive where floats would underflow
        let tiny = Scalar::exact(0, -3000).mul(Scalar::exact(0, 3000));
        assert_eq!(tiny.to_complex(), Complex64::new(1.0, 0.0));
        assert_eq!(sqrt2_pow(-3), 2f64.powf(-1.5));
    }
}
