//! Exact arithmetic in GF(p) and GF(p^k).
//!
//! Elements of GF(p^k) are encoded as integers `a0 + a1*p + ... + a(k-1)*p^(k-1)`
//! where `a0 + a1*x + ...` is the polynomial representative modulo the defining
//! modulus. Prime fields are the `k = 1` case of the same encoding.
//!
//! [`FieldSpec`] holds the defining parameters; [`Field`] is a cheaply cloneable
//! handle that owns the lookup tables and the row/matrix kernels used by the
//! elimination code.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest supported characteristic (exclusive) for prime fields.
pub const MAX_PRIME: u32 = 1 << 16;
/// Largest supported field order (exclusive).
pub const MAX_ORDER: u32 = 1 << 20;

// Extension fields up to this order get a full addition table.
const ADD_TABLE_MAX_ORDER: u32 = 2048;
// Prime fields up to this size reduce through a lookup table.
const REDUCE_TABLE_MAX_PRIME: u32 = 257;

/// Parameters of a finite field: characteristic, degree, and (for `k > 1`) a
/// monic irreducible modulus given as `k + 1` coefficients, constant term first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    p: u32,
    k: u32,
    modulus: Vec<u32>,
}

/// A field element in its canonical integer encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElem(pub u32);

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn checked_order(p: u32, k: u32) -> Option<u32> {
    let mut q: u64 = 1;
    for _ in 0..k {
        q *= p as u64;
        if q >= MAX_ORDER as u64 {
            return None;
        }
    }
    Some(q as u32)
}

/// Remainder of `num` modulo the monic-or-not `den` over GF(p); coefficients
/// constant term first. `den` must have a nonzero leading coefficient.
fn poly_rem(p: u32, num: &[u32], den: &[u32]) -> Vec<u32> {
    let dd = den.len() - 1;
    let lead_inv = prime_inv(p, den[dd]);
    let mut r: Vec<u32> = num.to_vec();
    while r.len() > dd {
        let top = *r.last().unwrap();
        let shift = r.len() - 1 - dd;
        if top != 0 {
            let c = (top as u64 * lead_inv as u64 % p as u64) as u32;
            for (t, &dc) in den.iter().enumerate() {
                let sub = (c as u64 * dc as u64 % p as u64) as u32;
                let slot = &mut r[shift + t];
                *slot = (*slot + p - sub) % p;
            }
        }
        r.pop();
    }
    r
}

fn prime_inv(p: u32, x: u32) -> u32 {
    // x^(p-2) mod p
    let mut base = x as u64 % p as u64;
    let mut e = p - 2;
    let mut acc: u64 = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        e >>= 1;
    }
    acc as u32
}

/// Irreducibility over GF(p) by trial division with every monic polynomial of
/// degree 1..=k/2.
pub fn is_irreducible(p: u32, modulus: &[u32]) -> bool {
    let k = modulus.len().saturating_sub(1);
    if k == 0 || modulus[k] == 0 {
        return false;
    }
    if k == 1 {
        return true;
    }
    for d in 1..=k / 2 {
        let count = (p as u64).pow(d as u32);
        for code in 0..count {
            let mut div = Vec::with_capacity(d + 1);
            let mut c = code;
            for _ in 0..d {
                div.push((c % p as u64) as u32);
                c /= p as u64;
            }
            div.push(1);
            if poly_rem(p, modulus, &div).iter().all(|&v| v == 0) {
                return false;
            }
        }
    }
    true
}

/// First monic irreducible polynomial of degree `k` over GF(p), ordered by the
/// integer encoding of its lower coefficients.
pub fn first_irreducible(p: u32, k: u32) -> Option<Vec<u32>> {
    let q = checked_order(p, k)?;
    (0..q).find_map(|code| {
        let mut poly = Vec::with_capacity(k as usize + 1);
        let mut c = code;
        for _ in 0..k {
            poly.push(c % p);
            c /= p;
        }
        poly.push(1);
        is_irreducible(p, &poly).then_some(poly)
    })
}

fn default_modulus(p: u32, k: u32) -> Option<Vec<u32>> {
    let preferred: &[u32] = match (p, k) {
        (2, 2) => &[1, 1, 1],
        (2, 3) => &[1, 1, 0, 1],
        (3, 2) => &[1, 0, 1],
        (3, 3) => &[1, 2, 0, 1],
        (11, 3) | (37, 3) => &[4, 1, 0, 1],
        _ => &[],
    };
    if !preferred.is_empty() && is_irreducible(p, preferred) {
        return Some(preferred.to_vec());
    }
    first_irreducible(p, k)
}

impl FieldSpec {
    /// The prime field GF(p).
    pub fn prime(p: u32) -> Result<Self> {
        Self::new(p, 1)
    }

    /// GF(p^k) with the built-in modulus for the pair, or the first irreducible
    /// polynomial found by search.
    pub fn new(p: u32, k: u32) -> Result<Self> {
        Self::validate_pk(p, k)?;
        if k == 1 {
            return Ok(FieldSpec { p, k, modulus: Vec::new() });
        }
        let modulus = default_modulus(p, k)
            .ok_or_else(|| Error::InvalidField(format!("no irreducible of degree {k} over GF({p})")))?;
        Ok(FieldSpec { p, k, modulus })
    }

    /// GF(p^k) with a caller-supplied monic irreducible modulus of degree k.
    pub fn with_modulus(p: u32, modulus: Vec<u32>) -> Result<Self> {
        if modulus.len() < 2 {
            return Err(Error::InvalidField("modulus needs at least two coefficients".into()));
        }
        let k = (modulus.len() - 1) as u32;
        Self::validate_pk(p, k)?;
        if modulus.iter().any(|&c| c >= p) {
            return Err(Error::InvalidField(format!("modulus coefficient out of range for p={p}")));
        }
        if *modulus.last().unwrap() != 1 {
            return Err(Error::InvalidField("modulus must be monic".into()));
        }
        if !is_irreducible(p, &modulus) {
            return Err(Error::InvalidField(format!("modulus {modulus:?} is reducible over GF({p})")));
        }
        if k == 1 {
            return Ok(FieldSpec { p, k, modulus: Vec::new() });
        }
        Ok(FieldSpec { p, k, modulus })
    }

    /// Field of order `q = p^k`, picking the default modulus.
    pub fn from_order(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidField(format!("order {q} is not a prime power")));
        }
        let p = (2..=q).find(|d| q % d == 0).unwrap();
        let (mut rest, mut k) = (q, 0);
        while rest % p == 0 {
            rest /= p;
            k += 1;
        }
        if rest != 1 {
            return Err(Error::InvalidField(format!("order {q} is not a prime power")));
        }
        Self::new(p, k)
    }

    fn validate_pk(p: u32, k: u32) -> Result<()> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("{p} is not prime")));
        }
        if p >= MAX_PRIME {
            return Err(Error::InvalidField(format!("characteristic {p} must be below 2^16")));
        }
        if k == 0 {
            return Err(Error::InvalidField("degree must be at least 1".into()));
        }
        checked_order(p, k)
            .map(|_| ())
            .ok_or_else(|| Error::InvalidField(format!("{p}^{k} exceeds 2^20")))
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Modulus coefficients, constant term first; empty for prime fields.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn order(&self) -> u32 {
        checked_order(self.p, self.k).expect("validated at construction")
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k == 1 {
            write!(f, "GF({})", self.p)
        } else {
            write!(f, "GF({}^{})", self.p, self.k)
        }
    }
}

enum Arith {
    Prime {
        // x -> x % p for x < p*p, present for small p
        reduce: Option<Vec<u32>>,
    },
    Ext {
        log: Vec<u32>,
        // exp has length 2*(q-1) so log sums index without a modulo
        exp: Vec<u32>,
        add: Option<Vec<u32>>,
    },
}

struct FieldInner {
    spec: FieldSpec,
    p: u32,
    k: u32,
    order: u32,
    arith: Arith,
}

/// Shared handle to a constructed field. Immutable; safe to use from any thread.
#[derive(Clone)]
pub struct Field(Arc<FieldInner>);

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }
}

impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.spec)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.spec)
    }
}

fn digits(p: u32, k: u32, mut x: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(k as usize);
    for _ in 0..k {
        out.push(x % p);
        x /= p;
    }
    out
}

fn undigits(p: u32, ds: &[u32]) -> u32 {
    ds.iter().rev().fold(0, |acc, &d| acc * p + d)
}

fn poly_mul_mod(p: u32, modulus: &[u32], a: &[u32], b: &[u32]) -> Vec<u32> {
    let k = modulus.len() - 1;
    let mut prod = vec![0u64; 2 * k - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] += x as u64 * y as u64;
        }
    }
    let mut prod: Vec<u32> = prod.into_iter().map(|v| (v % p as u64) as u32).collect();
    for d in (k..prod.len()).rev() {
        let c = prod[d];
        if c == 0 {
            continue;
        }
        for t in 0..k {
            let sub = (c as u64 * modulus[t] as u64 % p as u64) as u32;
            prod[d - k + t] = (prod[d - k + t] + p - sub) % p;
        }
        prod[d] = 0;
    }
    prod.truncate(k);
    prod
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn build_ext_tables(spec: &FieldSpec) -> (Vec<u32>, Vec<u32>) {
    let (p, k) = (spec.p, spec.k);
    let q = spec.order();
    let m = &spec.modulus;
    let pow = |g: &[u32], mut e: u32| -> Vec<u32> {
        let mut acc = digits(p, k, 1);
        let mut base = g.to_vec();
        while e > 0 {
            if e & 1 == 1 {
                acc = poly_mul_mod(p, m, &acc, &base);
            }
            base = poly_mul_mod(p, m, &base, &base);
            e >>= 1;
        }
        acc
    };
    let one = digits(p, k, 1);
    let factors = prime_factors(q - 1);
    let generator = (2..q)
        .map(|g| digits(p, k, g))
        .find(|g| factors.iter().all(|&l| pow(g, (q - 1) / l) != one))
        .expect("multiplicative group of a finite field is cyclic");

    let n = (q - 1) as usize;
    let mut exp = vec![0u32; 2 * n];
    let mut log = vec![u32::MAX; q as usize];
    let mut cur = one;
    for e in 0..n {
        let enc = undigits(p, &cur);
        exp[e] = enc;
        exp[e + n] = enc;
        log[enc as usize] = e as u32;
        cur = poly_mul_mod(p, m, &cur, &generator);
    }
    (log, exp)
}

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        let (p, k) = (spec.p, spec.k);
        let order = spec.order();
        let arith = if k == 1 {
            let reduce = (p <= REDUCE_TABLE_MAX_PRIME).then(|| (0..p * p).map(|x| x % p).collect());
            Arith::Prime { reduce }
        } else {
            let (log, exp) = build_ext_tables(&spec);
            let add = (p != 2 && order <= ADD_TABLE_MAX_ORDER).then(|| {
                let mut t = vec![0u32; (order * order) as usize];
                for x in 0..order {
                    let dx = digits(p, k, x);
                    for y in 0..order {
                        let dy = digits(p, k, y);
                        let s: Vec<u32> = dx.iter().zip(&dy).map(|(a, b)| (a + b) % p).collect();
                        t[(x * order + y) as usize] = undigits(p, &s);
                    }
                }
                t
            });
            Arith::Ext { log, exp, add }
        };
        Field(Arc::new(FieldInner { spec, p, k, order, arith }))
    }

    /// Convenience: the prime field GF(p).
    pub fn prime(p: u32) -> Result<Self> {
        Ok(Self::new(FieldSpec::prime(p)?))
    }

    /// Convenience: field of order q with the default modulus.
    pub fn of_order(q: u32) -> Result<Self> {
        Ok(Self::new(FieldSpec::from_order(q)?))
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.0.spec
    }

    pub fn p(&self) -> u32 {
        self.0.p
    }

    pub fn order(&self) -> u32 {
        self.0.order
    }

    pub fn is_prime_field(&self) -> bool {
        self.0.k == 1
    }

    pub fn zero(&self) -> FieldElem {
        FieldElem(0)
    }

    pub fn one(&self) -> FieldElem {
        FieldElem(1)
    }

    pub fn minus_one(&self) -> FieldElem {
        FieldElem(self.0.p - 1)
    }

    pub fn contains(&self, x: FieldElem) -> bool {
        x.0 < self.0.order
    }

    /// Element from an encoding; fails when the encoding is out of range.
    pub fn elem(&self, v: u32) -> Result<FieldElem> {
        if v < self.0.order {
            Ok(FieldElem(v))
        } else {
            Err(Error::InvalidField(format!("{v} is not an element of {}", self.0.spec)))
        }
    }

    #[inline]
    pub(crate) fn add_raw(&self, x: u32, y: u32) -> u32 {
        let p = self.0.p;
        match &self.0.arith {
            Arith::Prime { .. } => {
                let s = x + y;
                if s >= p {
                    s - p
                } else {
                    s
                }
            }
            Arith::Ext { add, .. } => {
                if p == 2 {
                    x ^ y
                } else if let Some(t) = add {
                    t[(x * self.0.order + y) as usize]
                } else {
                    self.add_digits(x, y)
                }
            }
        }
    }

    fn add_digits(&self, mut x: u32, mut y: u32) -> u32 {
        let p = self.0.p;
        let (mut out, mut w) = (0u32, 1u32);
        for _ in 0..self.0.k {
            let s = x % p + y % p;
            out += if s >= p { s - p } else { s } * w;
            x /= p;
            y /= p;
            w *= p;
        }
        out
    }

    #[inline]
    pub(crate) fn neg_raw(&self, x: u32) -> u32 {
        let p = self.0.p;
        match &self.0.arith {
            Arith::Prime { .. } => {
                if x == 0 {
                    0
                } else {
                    p - x
                }
            }
            Arith::Ext { .. } => {
                if p == 2 {
                    return x;
                }
                let (mut rest, mut out, mut w) = (x, 0u32, 1u32);
                for _ in 0..self.0.k {
                    let d = rest % p;
                    out += if d == 0 { 0 } else { p - d } * w;
                    rest /= p;
                    w *= p;
                }
                out
            }
        }
    }

    #[inline]
    pub(crate) fn mul_raw(&self, x: u32, y: u32) -> u32 {
        match &self.0.arith {
            Arith::Prime { .. } => (x as u64 * y as u64 % self.0.p as u64) as u32,
            Arith::Ext { log, exp, .. } => {
                if x == 0 || y == 0 {
                    0
                } else {
                    exp[(log[x as usize] + log[y as usize]) as usize]
                }
            }
        }
    }

    pub(crate) fn inv_raw(&self, x: u32) -> Option<u32> {
        if x == 0 {
            return None;
        }
        Some(match &self.0.arith {
            Arith::Prime { .. } => prime_inv(self.0.p, x),
            Arith::Ext { log, exp, .. } => {
                let n = self.0.order - 1;
                exp[((n - log[x as usize]) % n) as usize]
            }
        })
    }

    pub fn add(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        FieldElem(self.add_raw(x.0, y.0))
    }

    pub fn sub(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        FieldElem(self.add_raw(x.0, self.neg_raw(y.0)))
    }

    pub fn neg(&self, x: FieldElem) -> FieldElem {
        FieldElem(self.neg_raw(x.0))
    }

    pub fn mul(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        FieldElem(self.mul_raw(x.0, y.0))
    }

    pub fn inv(&self, x: FieldElem) -> Result<FieldElem> {
        self.inv_raw(x.0).map(FieldElem).ok_or(Error::ZeroInverse)
    }

    /// `dst += a * src`, elementwise.
    pub(crate) fn axpy(&self, dst: &mut [u32], a: u32, src: &[u32]) {
        debug_assert_eq!(dst.len(), src.len());
        if a == 0 {
            return;
        }
        let p = self.0.p;
        match &self.0.arith {
            Arith::Prime { reduce } => {
                if p == 2 {
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d ^= s;
                    }
                } else if let Some(t) = reduce {
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = t[(*d + a * s) as usize];
                    }
                } else {
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = ((*d as u64 + a as u64 * s as u64) % p as u64) as u32;
                    }
                }
            }
            Arith::Ext { log, exp, add } => {
                let la = log[a as usize];
                for (d, &s) in dst.iter_mut().zip(src) {
                    if s != 0 {
                        let prod = exp[(la + log[s as usize]) as usize];
                        *d = if p == 2 {
                            *d ^ prod
                        } else if let Some(t) = add {
                            t[(*d * self.0.order + prod) as usize]
                        } else {
                            self.add_digits(*d, prod)
                        };
                    }
                }
            }
        }
    }

    /// `row *= a`, elementwise.
    pub(crate) fn scale(&self, row: &mut [u32], a: u32) {
        if a == 1 {
            return;
        }
        for v in row.iter_mut() {
            *v = self.mul_raw(*v, a);
        }
    }

    /// `out += a * b` for row-major `a` (rows x inner) and `b` (inner x cols).
    pub(crate) fn gemm_acc(&self, out: &mut [u32], a: &[u32], b: &[u32], rows: usize, inner: usize, cols: usize) {
        debug_assert_eq!(out.len(), rows * cols);
        debug_assert_eq!(a.len(), rows * inner);
        debug_assert_eq!(b.len(), inner * cols);
        if rows == 0 || cols == 0 || inner == 0 {
            return;
        }
        match &self.0.arith {
            Arith::Prime { .. } => {
                let p = self.0.p;
                if p <= REDUCE_TABLE_MAX_PRIME {
                    gemm_prime_u32(p, out, a, b, inner, cols);
                } else {
                    gemm_prime_u64(p, out, a, b, inner, cols);
                }
            }
            Arith::Ext { .. } => {
                for (orow, arow) in out.chunks_exact_mut(cols).zip(a.chunks_exact(inner)) {
                    for (t, &x) in arow.iter().enumerate() {
                        self.axpy(orow, x, &b[t * cols..(t + 1) * cols]);
                    }
                }
            }
        }
    }
}

macro_rules! gemm_prime_impl {
    ($name:ident, $acc:ty) => {
        fn $name(p: u32, out: &mut [u32], a: &[u32], b: &[u32], inner: usize, cols: usize) {
            let pm1 = (p - 1) as $acc;
            let sq = (pm1 * pm1).max(1);
            // terms that can be added to a reduced accumulator without overflow
            let limit = ((<$acc>::MAX - pm1) / sq) as u64;
            let pa = p as $acc;
            let mut acc: Vec<$acc> = vec![0; cols];
            for (orow, arow) in out.chunks_exact_mut(cols).zip(a.chunks_exact(inner)) {
                for (c, &o) in acc.iter_mut().zip(orow.iter()) {
                    *c = o as $acc;
                }
                let mut pending = 0u64;
                for (t, &x) in arow.iter().enumerate() {
                    if x == 0 {
                        continue;
                    }
                    let brow = &b[t * cols..(t + 1) * cols];
                    if x == 1 {
                        for (c, &v) in acc.iter_mut().zip(brow) {
                            *c += v as $acc;
                        }
                    } else {
                        let xa = x as $acc;
                        for (c, &v) in acc.iter_mut().zip(brow) {
                            *c += xa * v as $acc;
                        }
                    }
                    pending += 1;
                    if pending == limit {
                        for c in acc.iter_mut() {
                            *c %= pa;
                        }
                        pending = 0;
                    }
                }
                for (o, &c) in orow.iter_mut().zip(acc.iter()) {
                    *o = (c % pa) as u32;
                }
            }
        }
    };
}

gemm_prime_impl!(gemm_prime_u32, u32);
gemm_prime_impl!(gemm_prime_u64, u64);
