//! Brute-force statevector engine for verification.
//!
//! Kept free of any stabilizer machinery. Index bit `i` is qubit `i`, so in
//! [`kron`] the first factor occupies the low qubits.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;
use thiserror::Error;

pub const DEFAULT_CAP: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenseError {
    #[error("dense vector on {n} qubits exceeds the cap of {cap}")]
    Cap { n: usize, cap: usize },
    #[error("vectors have different lengths ({0} vs {1})")]
    Shape(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DenseGate {
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    Sdg(usize),
    H(usize),
    A(usize),
    Adg(usize),
    T(usize),
    Tdg(usize),
    /// `diag(1, e^{i theta})`
    RZ(usize, f64),
    CX(usize, usize),
    CZ(usize, usize),
}

impl From<crate::stabstate::Gate> for DenseGate {
    fn from(g: crate::stabstate::Gate) -> Self {
        use crate::stabstate::Gate;
        match g {
            Gate::X(q) => DenseGate::X(q),
            Gate::Y(q) => DenseGate::Y(q),
            Gate::Z(q) => DenseGate::Z(q),
            Gate::S(q) => DenseGate::S(q),
            Gate::Sdg(q) => DenseGate::Sdg(q),
            Gate::H(q) => DenseGate::H(q),
            Gate::A(q) => DenseGate::A(q),
            Gate::Adg(q) => DenseGate::Adg(q),
            Gate::CX(a, b) => DenseGate::CX(a, b),
            Gate::CZ(a, b) => DenseGate::CZ(a, b),
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

pub fn check_cap(n: usize, cap: usize) -> Result<(), DenseError> {
    if n > cap {
        Err(DenseError::Cap { n, cap })
    } else {
        Ok(())
    }
}

pub fn basis_vector(n: usize, index: usize) -> Vec<Complex64> {
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[index] = c(1.0, 0.0);
    v
}

/// `a (x) b` with `a` on the low qubits.
pub fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for bj in b {
        for ai in a {
            out.push(ai * bj);
        }
    }
    out
}

pub fn tensor_power(v: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![c(1.0, 0.0)];
    for _ in 0..m {
        out = kron(&out, v);
    }
    out
}

/// Applies a 2x2 matrix `[[m00, m01], [m10, m11]]` to qubit `q`.
pub fn apply_single(v: &mut [Complex64], q: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..v.len() {
        if i & bit == 0 {
            let (a, b) = (v[i], v[i | bit]);
            v[i] = m[0][0] * a + m[0][1] * b;
            v[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn single_matrix(g: DenseGate) -> Option<(usize, [[Complex64; 2]; 2])> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let h = c(FRAC_1_SQRT_2, 0.0);
    let w = cis(-FRAC_PI_4);
    Some(match g {
        DenseGate::X(q) => (q, [[z, o], [o, z]]),
        DenseGate::Y(q) => (q, [[z, c(0.0, -1.0)], [c(0.0, 1.0), z]]),
        DenseGate::Z(q) => (q, [[o, z], [z, -o]]),
        DenseGate::S(q) => (q, [[o, z], [z, c(0.0, 1.0)]]),
        DenseGate::Sdg(q) => (q, [[o, z], [z, c(0.0, -1.0)]]),
        DenseGate::H(q) => (q, [[h, h], [h, -h]]),
        // e^{-i pi/4} S X
        DenseGate::A(q) => (q, [[z, w], [w * c(0.0, 1.0), z]]),
        DenseGate::Adg(q) => (q, [[z, w.conj() * c(0.0, -1.0)], [w.conj(), z]]),
        DenseGate::T(q) => (q, [[o, z], [z, cis(FRAC_PI_4)]]),
        DenseGate::Tdg(q) => (q, [[o, z], [z, cis(-FRAC_PI_4)]]),
        DenseGate::RZ(q, t) => (q, [[o, z], [z, cis(t)]]),
        DenseGate::CX(..) | DenseGate::CZ(..) => return None,
    })
}

pub fn apply_gate_in_place(v: &mut [Complex64], g: DenseGate) {
    if let Some((q, m)) = single_matrix(g) {
        apply_single(v, q, m);
        return;
    }
    match g {
        DenseGate::CX(ctl, tgt) => {
            let (cb, tb) = (1usize << ctl, 1usize << tgt);
            for i in 0..v.len() {
                if i & cb != 0 && i & tb == 0 {
                    v.swap(i, i | tb);
                }
            }
        }
        DenseGate::CZ(a, b) => {
            let mask = (1usize << a) | (1usize << b);
            for (i, x) in v.iter_mut().enumerate() {
                if i & mask == mask {
                    *x = -*x;
                }
            }
        }
        _ => unreachable!(),
    }
}

pub fn apply_gate(v: &[Complex64], n: usize, g: DenseGate) -> Vec<Complex64> {
    assert_eq!(v.len(), 1 << n);
    let mut out = v.to_vec();
    apply_gate_in_place(&mut out, g);
    out
}

/// Applies a gate list to `v`.
pub fn dense_apply(gates: &[DenseGate], v: &[Complex64], cap: usize) -> Result<Vec<Complex64>, DenseError> {
    let n = v.len().trailing_zeros() as usize;
    check_cap(n, cap)?;
    let mut out = v.to_vec();
    for &g in gates {
        apply_gate_in_place(&mut out, g);
    }
    Ok(out)
}

/// `(<bit|_q (x) I) v` on the remaining qubits, order preserved.
pub fn postselect(v: &[Complex64], n: usize, q: usize, bit: bool) -> Vec<Complex64> {
    assert_eq!(v.len(), 1 << n);
    let low = (1usize << q) - 1;
    (0..1usize << (n - 1))
        .map(|i| {
            let full = (i & low) | ((i & !low) << 1) | ((bit as usize) << q);
            v[full]
        })
        .collect()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `|<a|b>| / (|a| |b|)`.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> Result<f64, DenseError> {
    if a.len() != b.len() {
        return Err(DenseError::Shape(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(DenseError::ZeroVector);
    }
    Ok((inner(a, b).norm() / (na * nb)).min(1.0))
}

/// Largest entrywise distance.
pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

// ---- named states -------------------------------------------------------

/// Single-qubit magic and equatorial states and their orthogonal partners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Qubit {
    T,
    TPerp,
    F,
    FPerp,
    R(f64),
    RPerp(f64),
    Custom(Complex64, Complex64),
}

/// `cos(2 beta) = 1/sqrt(3)`.
pub fn f_beta() -> f64 {
    0.5 * (1.0 / 3f64.sqrt()).acos()
}

pub fn qubit(q: Qubit) -> [Complex64; 2] {
    let h = FRAC_1_SQRT_2;
    match q {
        Qubit::T => [c(h, 0.0), cis(FRAC_PI_4) * h],
        Qubit::TPerp => [c(h, 0.0), -cis(FRAC_PI_4) * h],
        Qubit::F => {
            let b = f_beta();
            [c(b.cos(), 0.0), cis(FRAC_PI_4) * b.sin()]
        }
        Qubit::FPerp => {
            let b = f_beta();
            [c(b.sin(), 0.0), -cis(FRAC_PI_4) * b.cos()]
        }
        Qubit::R(t) => [c(h, 0.0), cis(t) * h],
        Qubit::RPerp(t) => [c(h, 0.0), -cis(t) * h],
        Qubit::Custom(a, b) => [a, b],
    }
}

pub fn power(q: Qubit, m: usize) -> Vec<Complex64> {
    tensor_power(&qubit(q), m)
}

/// `(|psi>^m + |psi_perp>^m) / sqrt2` for the basis `{psi, psi_perp}`.
pub fn magic_cat(psi: Qubit, perp: Qubit, m: usize) -> Vec<Complex64> {
    let a = power(psi, m);
    let b = power(perp, m);
    a.iter().zip(&b).map(|(x, y)| (x + y) * FRAC_1_SQRT_2).collect()
}

pub fn cat_t(m: usize) -> Vec<Complex64> {
    magic_cat(Qubit::T, Qubit::TPerp, m)
}

pub fn cat_f(m: usize) -> Vec<Complex64> {
    magic_cat(Qubit::F, Qubit::FPerp, m)
}

pub fn cat_r(theta: f64, m: usize) -> Vec<Complex64> {
    magic_cat(Qubit::R(theta), Qubit::RPerp(theta), m)
}
