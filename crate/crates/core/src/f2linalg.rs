//! Bit-packed linear algebra over GF(2).
//!
//! Vectors store their bits in 64-bit words, bit `i` of the vector living in
//! bit `i % 64` of word `i / 64`. Everything here is exact; the stabilizer
//! state representation and the linear-code machinery are both built on it.

use std::fmt;

use thiserror::Error;

const WORD: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum F2Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("basis vectors are linearly dependent")]
    DependentBasis,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

/// A fixed-length vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct F2Vector {
    len: usize,
    words: Vec<u64>,
}

impl F2Vector {
    pub fn zeros(len: usize) -> Self {
        F2Vector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(i, true);
        v
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.set(i, true);
        }
        v
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut v = F2Vector {
            len: 0,
            words: Vec::new(),
        };
        for b in bits {
            v.push(b);
        }
        v
    }

    /// Low `len` bits of `value`, bit `i` of the integer becoming entry `i`.
    pub fn from_u64(len: usize, value: u64) -> Self {
        assert!(len <= WORD);
        let mut v = Self::zeros(len);
        if len > 0 {
            let mask = if len == WORD { u64::MAX } else { (1u64 << len) - 1 };
            v.words[0] = value & mask;
        }
        v
    }

    /// Parses a string of '0'/'1' characters, entry 0 first.
    pub fn parse(s: &str) -> Result<Self, F2Error> {
        let mut v = Self::zeros(0);
        for (col, ch) in s.trim().chars().enumerate() {
            match ch {
                '0' => v.push(false),
                '1' => v.push(true),
                other => {
                    return Err(F2Error::Parse {
                        line: 1,
                        msg: format!("unexpected character {other:?} at column {col}"),
                    })
                }
            }
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Value as an integer; only valid for vectors of length at most 64.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= WORD);
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if bit {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % WORD == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    #[inline]
    pub fn xor_assign(&mut self, other: &F2Vector) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn xor(&self, other: &F2Vector) -> F2Vector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Bitwise AND population count.
    pub fn and_count(&self, other: &F2Vector) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &F2Vector) -> bool {
        self.and_count(other) & 1 == 1
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * WORD + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * WORD + b)
                }
            })
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Copy with entry `i` deleted; later entries shift down by one.
    pub fn remove(&self, i: usize) -> F2Vector {
        debug_assert!(i < self.len);
        let mut out = F2Vector::zeros(self.len - 1);
        let (wi, bi) = (i / WORD, i % WORD);
        let low_mask = (1u64 << bi) - 1;
        for w in 0..out.words.len() {
            let lo = self.words[w];
            let hi = self.words.get(w + 1).copied().unwrap_or(0);
            let shifted = (lo >> 1) | (hi << (WORD - 1));
            out.words[w] = match w.cmp(&wi) {
                std::cmp::Ordering::Less => lo,
                std::cmp::Ordering::Equal => (lo & low_mask) | (shifted & !low_mask),
                std::cmp::Ordering::Greater => shifted,
            };
        }
        out.mask_tail();
        out
    }

    /// Copy with a new entry `bit` inserted at position `i`.
    pub fn insert(&self, i: usize, bit: bool) -> F2Vector {
        debug_assert!(i <= self.len);
        let mut out = F2Vector::zeros(self.len + 1);
        for j in 0..i {
            if self.get(j) {
                out.set(j, true);
            }
        }
        out.set(i, bit);
        for j in i..self.len {
            if self.get(j) {
                out.set(j + 1, true);
            }
        }
        out
    }

    pub fn concat(&self, other: &F2Vector) -> F2Vector {
        let mut out = self.clone();
        for b in other.iter() {
            out.push(b);
        }
        out
    }

    /// Entry `i` of the result is entry `perm[i]` of `self`.
    pub fn gather(&self, perm: &[usize]) -> F2Vector {
        F2Vector::from_bits(perm.iter().map(|&p| self.get(p)))
    }

    fn mask_tail(&mut self) {
        let r = self.len % WORD;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl fmt::Display for F2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for F2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F2Vector({self})")
    }
}

/// Dense matrix over GF(2) stored as bit-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct F2Matrix {
    cols: usize,
    rows: Vec<F2Vector>,
}

/// Reduced row echelon form of a matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rref {
    /// Same shape as the input; zero rows collected at the bottom.
    pub matrix: F2Matrix,
    pub pivots: Vec<usize>,
    pub rank: usize,
}

impl F2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        F2Matrix {
            cols,
            rows: vec![F2Vector::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        F2Matrix {
            cols: n,
            rows: (0..n).map(|i| F2Vector::unit(n, i)).collect(),
        }
    }

    pub fn from_rows(cols: usize, rows: Vec<F2Vector>) -> Result<Self, F2Error> {
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(F2Error::LengthMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Ok(F2Matrix { cols, rows })
    }

    /// Parses the generator-matrix text format: one row per line of '0'/'1'
    /// characters, blank lines ignored.
    pub fn parse_text(text: &str) -> Result<Self, F2Error> {
        let mut rows = Vec::new();
        let mut cols = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = F2Vector::parse(line).map_err(|e| match e {
                F2Error::Parse { msg, .. } => F2Error::Parse {
                    line: lineno + 1,
                    msg,
                },
                other => other,
            })?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(F2Error::Parse {
                        line: lineno + 1,
                        msg: format!("row has {} columns, expected {c}", row.len()),
                    })
                }
                _ => {}
            }
            rows.push(row);
        }
        Ok(F2Matrix {
            cols: cols.unwrap_or(0),
            rows,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &F2Vector {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[F2Vector] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<F2Vector> {
        self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize, bit: bool) {
        self.rows[i].set(j, bit)
    }

    pub fn push_row(&mut self, row: F2Vector) -> Result<(), F2Error> {
        if row.len() != self.cols {
            return Err(F2Error::LengthMismatch {
                expected: self.cols,
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn transpose(&self) -> F2Matrix {
        let mut t = F2Matrix::zeros(self.cols, self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            for j in r.iter_ones() {
                t.rows[j].set(i, true);
            }
        }
        t
    }

    /// Matrix-vector product `M v`.
    pub fn mul_vec(&self, v: &F2Vector) -> F2Vector {
        assert_eq!(v.len(), self.cols);
        F2Vector::from_bits(self.rows.iter().map(|r| r.dot(v)))
    }

    pub fn mul(&self, other: &F2Matrix) -> F2Matrix {
        assert_eq!(self.cols, other.nrows());
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc = F2Vector::zeros(other.cols);
                for i in r.iter_ones() {
                    acc.xor_assign(&other.rows[i]);
                }
                acc
            })
            .collect();
        F2Matrix {
            cols: other.cols,
            rows,
        }
    }

    pub fn rref(&self) -> Rref {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == m.rows.len() {
                break;
            }
            let Some(p) = (r..m.rows.len()).find(|&i| m.rows[i].get(c)) else {
                continue;
            };
            m.rows.swap(r, p);
            let pivot_row = m.rows[r].clone();
            for i in 0..m.rows.len() {
                if i != r && m.rows[i].get(c) {
                    m.rows[i].xor_assign(&pivot_row);
                }
            }
            pivots.push(c);
            r += 1;
        }
        Rref {
            matrix: m,
            rank: pivots.len(),
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().rank
    }

    /// Basis of `{v : M v = 0}`, one vector per free column.
    pub fn kernel_basis(&self) -> Vec<F2Vector> {
        let Rref { matrix, pivots, .. } = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        (0..self.cols)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut v = F2Vector::unit(self.cols, f);
                for (i, &p) in pivots.iter().enumerate() {
                    if matrix.rows[i].get(f) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect()
    }

    /// Nonzero rows of the reduced form: a canonical basis of the row space.
    pub fn row_space_basis(&self) -> Vec<F2Vector> {
        let Rref { matrix, rank, .. } = self.rref();
        matrix.rows.into_iter().take(rank).collect()
    }

    pub fn same_row_space(&self, other: &F2Matrix) -> bool {
        self.cols == other.cols && self.row_space_basis() == other.row_space_basis()
    }

    /// Returns the columns permuted so that entry `i` of each new row is entry
    /// `perm[i]` of the old row.
    pub fn permute_columns(&self, perm: &[usize]) -> F2Matrix {
        assert_eq!(perm.len(), self.cols);
        F2Matrix {
            cols: self.cols,
            rows: self.rows.iter().map(|r| r.gather(perm)).collect(),
        }
    }
}

impl fmt::Debug for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "F2Matrix {}x{} [", self.rows.len(), self.cols)?;
        for r in &self.rows {
            writeln!(f, "  {r}")?;
        }
        write!(f, "]")
    }
}

/// Iterator over `offset + span(basis)` in Gray-code order.
pub struct AffineMembers {
    basis: Vec<F2Vector>,
    current: F2Vector,
    index: u128,
    total: u128,
}

impl Iterator for AffineMembers {
    type Item = F2Vector;

    fn next(&mut self) -> Option<F2Vector> {
        if self.index >= self.total {
            return None;
        }
        if self.index > 0 {
            let flip = self.index.trailing_zeros() as usize;
            self.current.xor_assign(&self.basis[flip]);
        }
        self.index += 1;
        Some(self.current.clone())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.index) as usize;
        (left, Some(left))
    }
}

/// All `2^|basis|` members of the affine space `offset + span(basis)`.
pub fn affine_space_members(
    basis: &[F2Vector],
    offset: &F2Vector,
) -> Result<AffineMembers, F2Error> {
    for b in basis {
        if b.len() != offset.len() {
            return Err(F2Error::LengthMismatch {
                expected: offset.len(),
                found: b.len(),
            });
        }
    }
    let m = F2Matrix {
        cols: offset.len(),
        rows: basis.to_vec(),
    };
    if m.rank() != basis.len() {
        return Err(F2Error::DependentBasis);
    }
    assert!(basis.len() < 128, "affine space too large to enumerate");
    Ok(AffineMembers {
        basis: basis.to_vec(),
        current: offset.clone(),
        index: 0,
        total: 1u128 << basis.len(),
    })
}
