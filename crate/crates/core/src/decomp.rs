//! Weighted sums of stabilizer states and the closed-form magic-state
//! decompositions they are built from.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denseoracle;
use crate::f2linalg::{F2Matrix, F2Vector};
use crate::stabstate::{Gate, Scalar, StabilizerState, StateError, StateJson};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("unknown builder {0:?}")]
    UnknownBuilder(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),
    #[error("bra acts on {bra} qubits but {given} indices were given")]
    BraWidth { bra: usize, given: usize },
    #[error("repeated qubit index {0}")]
    RepeatedQubit(usize),
    #[error("unsupported JSON version {0}")]
    Version(u32),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Dense(#[from] denseoracle::DenseError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: Scalar,
    pub state: StabilizerState,
}

/// The vector `sum_i coeff_i |state_i>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    n: usize,
    terms: Vec<Term>,
}

/// Neumaier-compensated sum, in input order.
pub fn compensated_sum<I: IntoIterator<Item = Complex64>>(values: I) -> Complex64 {
    fn step(sum: &mut f64, comp: &mut f64, x: f64) {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            *comp += (*sum - t) + x;
        } else {
            *comp += (x - t) + *sum;
        }
        *sum = t;
    }
    let (mut re, mut rc, mut im, mut ic) = (0.0, 0.0, 0.0, 0.0);
    for v in values {
        step(&mut re, &mut rc, v.re);
        step(&mut im, &mut ic, v.im);
    }
    Complex64::new(re + rc, im + ic)
}

impl Decomposition {
    pub fn empty(n: usize) -> Self {
        Decomposition { n, terms: Vec::new() }
    }

    pub fn single(state: StabilizerState) -> Self {
        let mut d = Self::empty(state.num_qubits());
        d.push(Scalar::ONE, state);
        d
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Scalar, StabilizerState)>) -> Result<Self, DecompError> {
        let mut d = Self::empty(n);
        for (c, s) in terms {
            if s.num_qubits() != n {
                return Err(DecompError::QubitMismatch(n, s.num_qubits()));
            }
            d.push(c, s);
        }
        Ok(d)
    }

    /// Appends a term unless it is zero.
    pub fn push(&mut self, coeff: Scalar, state: StabilizerState) {
        assert_eq!(state.num_qubits(), self.n);
        if !coeff.is_zero() && !state.is_zero() {
            self.terms.push(Term { coeff, state });
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<Term> {
        self.terms
    }

    pub fn scaled(mut self, s: Scalar) -> Self {
        for t in &mut self.terms {
            t.coeff = t.coeff.mul(s);
        }
        self.terms.retain(|t| !t.coeff.is_zero());
        self
    }

    /// Sum of two decompositions on the same qubits; terms of `self` first.
    pub fn add(mut self, other: Decomposition) -> Result<Self, DecompError> {
        if other.n != self.n {
            return Err(DecompError::QubitMismatch(self.n, other.n));
        }
        self.terms.extend(other.terms);
        Ok(self)
    }

    fn map_terms<F>(&self, n: usize, f: F) -> Self
    where
        F: Fn(&Term) -> Option<Term> + Sync,
    {
        let terms: Vec<Term> = self
            .terms
            .par_iter()
            .filter_map(|t| f(t))
            .filter(|t| !t.state.is_zero() && !t.coeff.is_zero())
            .collect();
        Decomposition { n, terms }
    }

    /// Drops terms whose state or coefficient vanishes.
    pub fn prune(mut self) -> Self {
        self.terms.retain(|t| !t.state.is_zero() && !t.coeff.is_zero());
        self
    }

    pub fn tensor(&self, other: &Decomposition) -> Decomposition {
        let mut out = Decomposition::empty(self.n + other.n);
        out.terms = self
            .terms
            .par_iter()
            .flat_map_iter(|a| {
                other.terms.iter().map(move |b| Term {
                    coeff: a.coeff.mul(b.coeff),
                    state: a.state.tensor(&b.state),
                })
            })
            .collect();
        out.prune()
    }

    pub fn apply_gates(&self, gates: &[Gate]) -> Result<Decomposition, DecompError> {
        let mut probe = StabilizerState::zeros_state(self.n);
        probe.apply_all(gates)?;
        Ok(self.map_terms(self.n, |t| {
            let mut s = t.state.clone();
            s.apply_all(gates).expect("validated above");
            Some(Term { coeff: t.coeff, state: s })
        }))
    }

    pub fn postselect(&self, q: usize, bit: bool) -> Result<Decomposition, DecompError> {
        if q >= self.n {
            return Err(StateError::BadQubit { index: q, n: self.n }.into());
        }
        Ok(self.map_terms(self.n - 1, |t| {
            Some(Term {
                coeff: t.coeff,
                state: t.state.postselect(q, bit).expect("checked"),
            })
        }))
    }

    pub fn permute_qubits(&self, perm: &[usize]) -> Decomposition {
        self.map_terms(self.n, |t| {
            Some(Term {
                coeff: t.coeff,
                state: t.state.permute_qubits(perm),
            })
        })
    }

    pub fn conjugate(&self) -> Decomposition {
        self.map_terms(self.n, |t| {
            Some(Term {
                coeff: t.coeff.conj(),
                state: t.state.conjugate(),
            })
        })
    }

    /// Applies `<bra|` to `qubits` (bra qubit `r` meets `qubits[r]`) and
    /// removes them. Terms come out ket-major, bra-minor.
    pub fn contract_bra(&self, bra: &Decomposition, qubits: &[usize]) -> Result<Decomposition, DecompError> {
        if qubits.len() != bra.n {
            return Err(DecompError::BraWidth { bra: bra.n, given: qubits.len() });
        }
        let mut seen = vec![false; self.n];
        for &q in qubits {
            if q >= self.n {
                return Err(StateError::BadQubit { index: q, n: self.n }.into());
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(DecompError::RepeatedQubit(q));
            }
        }
        // <phi| = conj(c) <0| U whenever U |phi> = c |0>.
        let mut reductions = Vec::with_capacity(bra.terms.len());
        for t in &bra.terms {
            let (gates, c) = t.state.reduction_to_zero()?;
            let gates: Vec<Gate> = gates.iter().map(|g| g.remap(qubits)).collect();
            reductions.push((gates, t.coeff.mul(c).conj()));
        }
        let mut order = qubits.to_vec();
        order.sort_unstable_by(|a, b| b.cmp(a));
        let n_out = self.n - qubits.len();
        let terms: Vec<Term> = self
            .terms
            .par_iter()
            .flat_map_iter(|t| {
                let order = &order;
                reductions.iter().filter_map(move |(gates, w)| {
                    let mut s = t.state.clone();
                    s.apply_all(gates).expect("validated indices");
                    for &q in order {
                        s.postselect_in_place(q, false);
                        if s.is_zero() {
                            return None;
                        }
                    }
                    Some(Term { coeff: t.coeff.mul(*w), state: s })
                })
            })
            .collect();
        Ok(Decomposition { n: n_out, terms })
    }

    /// Applies `<cat_2|` to the pair `(a, b)`.
    pub fn contract_bra_cat2(&self, a: usize, b: usize) -> Result<Decomposition, DecompError> {
        if a == b {
            return Err(DecompError::RepeatedQubit(a));
        }
        self.contract_bra(&cat2(), &[a, b])
    }

    /// `|T>^m` from a decomposition of `|cat_m>`, using `|T><T| = (I + A)/2`
    /// on qubit 0 and `(|T><T| (x) I)|cat_m> = 2^{-1/2} |T>^m`.
    pub fn cat_to_t(&self) -> Decomposition {
        let half = Scalar::exact(0, -1);
        let mut out = self.clone().scaled(half);
        let flipped = self
            .apply_gates(&[Gate::A(0)])
            .expect("qubit 0 exists")
            .scaled(half);
        out.terms.extend(flipped.terms);
        out
    }

    pub fn amplitude(&self, x: &F2Vector) -> Result<Complex64, DecompError> {
        let parts: Vec<Complex64> = self
            .terms
            .par_iter()
            .map(|t| t.state.amplitude(x).map(|a| t.coeff.to_complex() * a))
            .collect::<Result<_, _>>()?;
        Ok(compensated_sum(parts))
    }

    pub fn to_dense(&self) -> Result<Vec<Complex64>, DecompError> {
        self.to_dense_capped(denseoracle::DEFAULT_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<Vec<Complex64>, DecompError> {
        denseoracle::check_cap(self.n, cap)?;
        let mut v = vec![Complex64::new(0.0, 0.0); 1usize << self.n];
        for t in &self.terms {
            t.state.accumulate_dense(t.coeff.to_complex(), &mut v);
        }
        Ok(v)
    }

    /// `|<ref|d>| / (|ref| |d|)`.
    pub fn fidelity_vs_dense(&self, reference: &[Complex64]) -> Result<f64, DecompError> {
        let v = self.to_dense()?;
        Ok(denseoracle::fidelity(reference, &v)?)
    }

    pub fn to_json(&self) -> DecompositionJson {
        DecompositionJson {
            version: JSON_VERSION,
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let c = t.coeff.factor * crate::stabstate::eighth_root(t.coeff.phase8);
                    TermJson {
                        coeff: CoeffJson {
                            re: c.re,
                            im: c.im,
                            sqrt2_exponent: t.coeff.sqrt2_exp,
                        },
                        state: t.state.to_json(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_json(j: &DecompositionJson) -> Result<Decomposition, DecompError> {
        if j.version != JSON_VERSION {
            return Err(DecompError::Version(j.version));
        }
        let mut d = Decomposition::empty(j.n);
        for t in &j.terms {
            if !t.coeff.re.is_finite() || !t.coeff.im.is_finite() {
                return Err(DecompError::BadParams("non-finite coefficient".into()));
            }
            let s = StabilizerState::from_json(&t.state)?;
            if s.num_qubits() != j.n {
                return Err(DecompError::QubitMismatch(j.n, s.num_qubits()));
            }
            let c = Scalar::new(0, t.coeff.sqrt2_exponent, Complex64::new(t.coeff.re, t.coeff.im));
            d.push(c, s);
        }
        Ok(d)
    }
}

pub const JSON_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffJson {
    pub re: f64,
    pub im: f64,
    pub sqrt2_exponent: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coeff: CoeffJson,
    pub state: StateJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub version: u32,
    pub n: usize,
    pub terms: Vec<TermJson>,
}

// ---- building blocks ----------------------------------------------------

fn all_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|a| ((a + 1)..k).map(move |b| (a, b))).collect()
}

/// `|0^m> + i^d |1^m>`.
pub fn ghz(m: usize, d: u8) -> StabilizerState {
    StabilizerState::from_parts(
        F2Vector::zeros(m),
        vec![F2Vector::ones(m)],
        vec![d],
        &[],
        Scalar::ONE,
    )
    .expect("valid")
}

/// `sum_x i^{d |x|} (-1)^{pairs * C(|x|, 2)} |x>` over all of `F_2^m`.
pub fn full_space(m: usize, d: u8, pairs: bool) -> StabilizerState {
    let basis = (0..m).map(|i| F2Vector::unit(m, i)).collect();
    let quad = if pairs { all_pairs(m) } else { Vec::new() };
    StabilizerState::from_parts(F2Vector::zeros(m), basis, vec![d; m], &quad, Scalar::ONE).expect("valid")
}

/// `|E_m> = 2^{-(m-1)/2} sum_{|x| even} |x>`.
pub fn e_state(m: usize) -> StabilizerState {
    assert!(m >= 1);
    let ones = F2Matrix::from_rows(m, vec![F2Vector::ones(m)]).expect("shape");
    let basis = ones.kernel_basis();
    let k = basis.len();
    StabilizerState::from_parts(F2Vector::zeros(m), basis, vec![0; k], &[], Scalar::exact(0, -(m as i32 - 1)))
        .expect("valid")
}

/// `|K_m> = prod_{i<j} CZ_ij |E_m>`.
pub fn k_state(m: usize) -> StabilizerState {
    let mut s = e_state(m);
    for (a, b) in all_pairs(m) {
        s.apply(Gate::CZ(a, b)).expect("in range");
    }
    s
}

fn term(coeff: Scalar, state: StabilizerState) -> (Scalar, StabilizerState) {
    (coeff, state)
}

fn build(n: usize, terms: Vec<(Scalar, StabilizerState)>) -> Decomposition {
    let mut d = Decomposition::empty(n);
    for (c, s) in terms {
        d.terms.push(Term { coeff: c, state: s });
    }
    d
}

/// `|T>^2 = (|00> + i|11>)/2 + e^{i pi/4}(|01> + |10>)/2`.
pub fn t2() -> Decomposition {
    let mixed = StabilizerState::from_parts(
        F2Vector::parse("10").unwrap(),
        vec![F2Vector::ones(2)],
        vec![0],
        &[],
        Scalar::ONE,
    )
    .expect("valid");
    build(2, vec![term(Scalar::exact(0, -2), ghz(2, 1)), term(Scalar::exact(1, -2), mixed)])
}

/// Three-term `|T>^3`: with `w = e^{i pi/4}`,
/// `2^{-3/2} [ (w+i)/2 sum_x |x> + (1-w)(|000> - i|111>) + (w-i)/2 sum_x (-1)^{C(|x|,2)} |x> ]`.
pub fn t3() -> Decomposition {
    let w = crate::stabstate::eighth_root(1);
    let i = Complex64::new(0.0, 1.0);
    let c = |z: Complex64| Scalar::new(0, -3, z);
    build(
        3,
        vec![
            term(c((w + i) / 2.0), full_space(3, 0, false)),
            term(c(Complex64::new(1.0, 0.0) - w), ghz(3, 3)),
            term(c((w - i) / 2.0), full_space(3, 0, true)),
        ],
    )
}

/// `|cat_2> = 2^{-1/2}(|00> + i|11>)`.
pub fn cat2() -> Decomposition {
    build(2, vec![term(Scalar::exact(0, -1), ghz(2, 1))])
}

/// `|cat_4> = i|E_4> + ((1-i)/2) 2^{-1/2} (|0000> - i|1111>)`.
pub fn cat4() -> Decomposition {
    build(4, vec![term(Scalar::exact(2, 0), e_state(4)), term(Scalar::exact(7, -2), ghz(4, 3))])
}

/// `|cat_6> = 2^{-3/2}(|0^6> - i|1^6>) + 2^{-1/2} e^{3 i pi/4}(|E_6> + i|K_6>)`.
pub fn cat6() -> Decomposition {
    build(
        6,
        vec![
            term(Scalar::exact(0, -3), ghz(6, 3)),
            term(Scalar::exact(3, -1), e_state(6)),
            term(Scalar::exact(5, -1), k_state(6)),
        ],
    )
}

/// `|cat_6(F)> = (2/3)(psi_1 + e^{3 i pi/4} psi_2 - e^{i pi/4} psi_3)`.
pub fn cat6_f() -> Decomposition {
    let two_thirds = Complex64::new(2.0 / 3.0, 0.0);
    // psi_2: (-i)^{|x| mod 2}, psi_3: (-1)^{|x|(|x|+1)/2}, both 2^{-3} sum_x.
    build(
        6,
        vec![
            term(Scalar::new(0, -1, two_thirds), ghz(6, 3)),
            term(Scalar::new(3, -6, two_thirds), full_space(6, 3, true)),
            term(Scalar::new(5, -6, two_thirds), full_space(6, 2, true)),
        ],
    )
}

/// `k` with `x = k pi/2` when `x` is (numerically exactly) such a multiple.
pub fn quarter_turns(x: f64) -> Option<u8> {
    let k = (x / FRAC_PI_2).round();
    ((x - k * FRAC_PI_2).abs() <= 1e-12).then(|| k.rem_euclid(4.0) as u8)
}

/// `|cat_2(R_theta)> = 2^{-1/2}(|00> + e^{2 i theta}|11>)`.
pub fn cat2_r(theta: f64) -> Decomposition {
    if let Some(k) = quarter_turns(2.0 * theta) {
        return build(2, vec![term(Scalar::exact(0, -1), ghz(2, k))]);
    }
    let zero = StabilizerState::zeros_state(2);
    let one = StabilizerState::basis_state(&F2Vector::ones(2));
    build(
        2,
        vec![
            term(Scalar::exact(0, -1), zero),
            term(Scalar::new(0, -1, Complex64::from_polar(1.0, 2.0 * theta)), one),
        ],
    )
}

/// Four-term `|cat_6(R_theta)>`:
/// `2^{-5/2}[(1 - e^{4it})|0^6> + (e^{6it} - e^{2it})|1^6>] + e^{3it}[cos t |E_6> + i sin t |K_6>]`.
pub fn cat6_r(theta: f64) -> Decomposition {
    let e = |k: f64| Complex64::from_polar(1.0, k * theta);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    build(
        6,
        vec![
            term(Scalar::new(0, -5, one - e(4.0)), StabilizerState::zeros_state(6)),
            term(Scalar::new(0, -5, e(6.0) - e(2.0)), StabilizerState::basis_state(&F2Vector::ones(6))),
            term(Scalar::from_complex(e(3.0) * theta.cos()), e_state(6)),
            term(Scalar::from_complex(e(3.0) * i * theta.sin()), k_state(6)),
        ],
    )
}

/// Named constructor; `params` carries `m` for `E`/`K` and `theta` for the
/// equatorial builders.
pub fn build_named(name: &str, params: &[f64]) -> Result<Decomposition, DecompError> {
    let theta = || {
        params
            .first()
            .copied()
            .filter(|t| t.is_finite())
            .ok_or_else(|| DecompError::BadParams(format!("{name} needs a finite angle")))
    };
    let size = || match params.first() {
        Some(&m) if m >= 1.0 && m.fract() == 0.0 => Ok(m as usize),
        _ => Err(DecompError::BadParams(format!("{name} needs a size m >= 1"))),
    };
    Ok(match name {
        "t2" => t2(),
        "t3" => t3(),
        "cat2" => cat2(),
        "cat4" => cat4(),
        "cat6" => cat6(),
        "cat6_F" => cat6_f(),
        "cat2_R" => cat2_r(theta()?),
        "cat6_R" => cat6_r(theta()?),
        "E" => Decomposition::single(e_state(size()?)),
        "K" => Decomposition::single(k_state(size()?)),
        _ => return Err(DecompError::UnknownBuilder(name.to_string())),
    })
}
