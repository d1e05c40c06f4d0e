//! Single-block echelonization kernels.
//!
//! Every kernel returns `(M, K, R, rho, gamma)` with
//!
//! ```text
//! [[M, 0], [K, 1]] * [rho; rho^c] * H * [gamma | gamma^c] = [[-1, R], [0, 0]]
//! ```
//!
//! Rows of `M` and `R` follow ascending pivot columns, columns of `M` and `K`
//! follow `rho`, and rows of `K` follow the complement of `rho`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::matrix::{BitString, IndexSet, Matrix};

/// Default dimension below which the recursive kernel switches to direct Gauss.
pub const DEFAULT_THRESHOLD: usize = 256;

/// Output of an echelonization of an `alpha x beta` matrix of rank `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EchResult {
    /// `r x r` multiplier.
    pub m: Matrix,
    /// `(alpha - r) x r` cleaner.
    pub k: Matrix,
    /// `r x (beta - r)` remnant.
    pub r: Matrix,
    pub rho: IndexSet,
    pub gamma: IndexSet,
}

impl EchResult {
    pub fn rank(&self) -> usize {
        self.rho.len()
    }

    fn trivial(field: &Field, alpha: usize, beta: usize) -> Self {
        EchResult {
            m: Matrix::zeros(field, 0, 0),
            k: Matrix::zeros(field, alpha, 0),
            r: Matrix::zeros(field, 0, beta),
            rho: IndexSet::empty(alpha),
            gamma: IndexSet::empty(beta),
        }
    }

    /// Check the defining identity by dense multiplication.
    pub fn satisfies_identity(&self, h: &Matrix) -> bool {
        let (alpha, beta) = h.shape();
        let r = self.rank();
        let shapes_ok = self.rho.universe() == alpha
            && self.gamma.universe() == beta
            && self.gamma.len() == r
            && self.m.shape() == (r, r)
            && self.k.shape() == (alpha - r, r)
            && self.r.shape() == (r, beta - r);
        if !shapes_ok {
            return false;
        }
        let field = h.field();
        let cols = self.gamma.permutation();
        let top = h.pick_rows(self.rho.members()).pick_cols(&cols);
        let rest = h.pick_rows(self.rho.complement().members()).pick_cols(&cols);
        let want_top = Matrix::minus_identity(field, r).hstack(&self.r).unwrap();
        let Ok(got_top) = self.m.mul(&top) else { return false };
        let Ok(got_rest) = rest.mul_add(&self.k, &top) else { return false };
        got_top == want_top && got_rest.is_zero()
    }
}

/// An interchangeable echelonization algorithm.
pub trait EchKernel: Send + Sync {
    fn name(&self) -> &str;
    fn ech(&self, h: &Matrix) -> EchResult;
}

/// Row-by-row Gauss with first-nonzero pivoting.
#[derive(Clone, Copy, Debug, Default)]
pub struct DirectGauss;

/// Halve the longer dimension until both fit under `threshold`, then run
/// [`DirectGauss`].
#[derive(Clone, Copy, Debug)]
pub struct Recursive {
    pub threshold: usize,
}

impl Default for Recursive {
    fn default() -> Self {
        Recursive { threshold: DEFAULT_THRESHOLD }
    }
}

impl EchKernel for DirectGauss {
    fn name(&self) -> &str {
        "direct"
    }

    fn ech(&self, h: &Matrix) -> EchResult {
        direct(h)
    }
}

impl EchKernel for Recursive {
    fn name(&self) -> &str {
        "recursive"
    }

    fn ech(&self, h: &Matrix) -> EchResult {
        recursive(h, self.threshold.max(1))
    }
}

type KernelFactory = fn(usize) -> Arc<dyn EchKernel>;

/// Kernels by name. The factory argument is the recursion threshold, which
/// kernels without recursion ignore.
#[derive(Clone)]
pub struct KernelRegistry {
    entries: BTreeMap<String, KernelFactory>,
}

impl Default for KernelRegistry {
    fn default() -> Self {
        let mut reg = KernelRegistry { entries: BTreeMap::new() };
        reg.register("direct", |_| Arc::new(DirectGauss));
        reg.register("recursive", |t| Arc::new(Recursive { threshold: t }));
        reg
    }
}

impl KernelRegistry {
    pub fn register(&mut self, name: &str, factory: KernelFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn create(&self, name: &str, threshold: usize) -> Result<Arc<dyn EchKernel>> {
        self.entries
            .get(name)
            .map(|f| f(threshold))
            .ok_or_else(|| Error::Plan(format!("unknown ech kernel '{name}' (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// The default kernel: recursive with [`DEFAULT_THRESHOLD`].
pub fn default_kernel() -> Arc<dyn EchKernel> {
    Arc::new(Recursive::default())
}

struct Pivot {
    col: usize,
    row: Vec<u32>,
    // coefficients on the pivot rows found so far, by pivot ordinal
    coef: Vec<u32>,
}

fn direct(h: &Matrix) -> EchResult {
    let field = h.field();
    let (alpha, beta) = h.shape();
    if alpha == 0 || beta == 0 {
        return EchResult::trivial(field, alpha, beta);
    }
    let minus_one = field.minus_one().0;
    let cap = alpha.min(beta);
    let mut pivots: Vec<Pivot> = Vec::with_capacity(cap);
    let mut rho = Vec::with_capacity(cap);
    // (row index, coefficients on pivot ordinals) for rows that reduced to zero
    let mut zero_rows: Vec<(usize, Vec<u32>)> = Vec::new();

    for t in 0..alpha {
        let mut v = h.row(t).to_vec();
        let mut coef = vec![0u32; cap];
        let seen = pivots.len();
        for p in &pivots {
            let x = v[p.col];
            if x != 0 {
                field.axpy(&mut v, x, &p.row);
                field.axpy(&mut coef[..seen], x, &p.coef[..seen]);
            }
        }
        match v.iter().position(|&x| x != 0) {
            None => zero_rows.push((t, coef)),
            Some(c) => {
                let ord = pivots.len();
                coef[ord] = 1;
                let s = field.mul_raw(minus_one, field.inv_raw(v[c]).unwrap());
                field.scale(&mut v, s);
                field.scale(&mut coef[..=ord], s);
                for p in pivots.iter_mut() {
                    let z = p.row[c];
                    if z != 0 {
                        field.axpy(&mut p.row, z, &v);
                        field.axpy(&mut p.coef[..=ord], z, &coef[..=ord]);
                    }
                }
                pivots.push(Pivot { col: c, row: v, coef });
                rho.push(t);
            }
        }
    }

    // pivot ordinals carry the rho order, so coefficients map directly to columns
    let r = pivots.len();
    pivots.sort_by_key(|p| p.col);
    let gamma = IndexSet::from_sorted(beta, pivots.iter().map(|p| p.col).collect());
    let non_pivot = gamma.complement();
    let mut m = Vec::with_capacity(r * r);
    let mut rem = Vec::with_capacity(r * (beta - r));
    for p in &pivots {
        m.extend_from_slice(&p.coef[..r]);
        rem.extend(non_pivot.members().iter().map(|&c| p.row[c]));
    }
    let mut k = Vec::with_capacity(zero_rows.len() * r);
    for (_, coef) in &zero_rows {
        k.extend_from_slice(&coef[..r]);
    }
    EchResult {
        m: Matrix::from_raw(field, r, r, m),
        k: Matrix::from_raw(field, alpha - r, r, k),
        r: Matrix::from_raw(field, r, beta - r, rem),
        rho: IndexSet::from_sorted(alpha, rho),
        gamma,
    }
}

fn recursive(h: &Matrix, threshold: usize) -> EchResult {
    let (alpha, beta) = h.shape();
    if alpha == 0 || beta == 0 {
        return EchResult::trivial(h.field(), alpha, beta);
    }
    if alpha <= threshold && beta <= threshold {
        return direct(h);
    }
    if alpha >= beta {
        split_rows(h, threshold)
    } else {
        split_cols(h, threshold)
    }
}

/// Column riffle: column `l` of the output is the next unused column of `a`
/// when `u[l] = 0` and of `b` otherwise.
pub(crate) fn col_riffle(u: &BitString, a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.check_field(b, "col_riffle")?;
    if a.rows() != b.rows() || u.count_zeros() != a.cols() || u.count_ones() != b.cols() {
        return Err(Error::bits(
            "col_riffle",
            format!("{} zeros/{} ones vs {}x{} and {}x{}", u.count_zeros(), u.count_ones(), a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let mut data = Vec::with_capacity(a.rows() * u.len());
    for r in 0..a.rows() {
        let (ra, rb) = (a.row(r), b.row(r));
        let (mut ia, mut ib) = (0, 0);
        for &bit in u.bits() {
            if bit {
                data.push(rb[ib]);
                ib += 1;
            } else {
                data.push(ra[ia]);
                ia += 1;
            }
        }
    }
    Ok(Matrix::from_raw(a.field(), a.rows(), u.len(), data))
}

fn split_rows(h: &Matrix, threshold: usize) -> EchResult {
    use crate::jobs::{cex, rrf, unh};
    let (alpha, beta) = h.shape();
    let a1 = alpha / 2;
    let h1 = h.block(0, 0, a1, beta);
    let h2 = h.block(a1, 0, alpha - a1, beta);

    let e1 = recursive(&h1, threshold);
    let (a, a_rest) = cex(&h2, &e1.gamma).unwrap();
    let h_prime = a_rest.mul_add(&a, &e1.r).unwrap();
    let e2 = recursive(&h_prime, threshold);

    let (e, r_prime) = cex(&e1.r, &e2.gamma).unwrap();
    let r_prime = r_prime.mul_add(&e, &e2.r).unwrap();
    let (gamma, lambda) = unh(&e1.gamma, &e2.gamma).unwrap();
    let r = rrf(&lambda, &r_prime, &e2.r).unwrap();

    let a_sel = a.pick_rows(e2.rho.members());
    let a_rest_rows = a.pick_rows(e2.rho.complement().members());
    let x = e2.m.mul(&a_sel).unwrap().mul(&e1.m).unwrap();
    let old_rows = e1.m.mul_add(&e, &x).unwrap().hstack(&e.mul(&e2.m).unwrap()).unwrap();
    let new_rows = x.hstack(&e2.m).unwrap();
    let m = rrf(&lambda, &old_rows, &new_rows).unwrap();

    let r1 = e1.rank();
    let k_top = e1.k.hstack(&Matrix::zeros(h.field(), e1.k.rows(), e2.rank())).unwrap();
    let k_left = a_rest_rows.mul_add(&e2.k, &a_sel).unwrap().mul(&e1.m).unwrap();
    let k_bottom = k_left.hstack(&e2.k).unwrap();
    let k = k_top.vstack(&k_bottom).unwrap();

    let mut rho = e1.rho.members().to_vec();
    rho.extend(e2.rho.members().iter().map(|&x| x + a1));
    debug_assert_eq!(rho.len(), r1 + e2.rank());
    EchResult { m, k, r, rho: IndexSet::from_sorted(alpha, rho), gamma }
}

fn split_cols(h: &Matrix, threshold: usize) -> EchResult {
    use crate::jobs::{cex, rex, unh};
    let (alpha, beta) = h.shape();
    let b1 = beta / 2;
    let hl = h.block(0, 0, alpha, b1);
    let hr = h.block(0, b1, alpha, beta - b1);

    let e1 = recursive(&hl, threshold);
    let (v, w) = rex(&hr, &e1.rho).unwrap();
    let x = e1.m.mul(&v).unwrap();
    let c_prime = w.mul_add(&e1.k, &v).unwrap();
    let e2 = recursive(&c_prime, threshold);

    let (e, x_rest) = cex(&x, &e2.gamma).unwrap();
    let x_rest = x_rest.mul_add(&e, &e2.r).unwrap();

    let mut gamma = e1.gamma.members().to_vec();
    gamma.extend(e2.gamma.members().iter().map(|&c| c + b1));
    let field = h.field();
    let (r1, r2) = (e1.rank(), e2.rank());
    let r = e1
        .r
        .hstack(&x_rest)
        .unwrap()
        .vstack(&Matrix::zeros(field, r2, e1.r.cols()).hstack(&e2.r).unwrap())
        .unwrap();

    let (rho, u) = unh(&e1.rho, &e2.rho).unwrap();
    let (k1_sel, k1_rest) = rex(&e1.k, &e2.rho).unwrap();
    let xk = e2.m.mul(&k1_sel).unwrap();
    let top = col_riffle(&u, &e1.m.mul_add(&e, &xk).unwrap(), &e.mul(&e2.m).unwrap()).unwrap();
    let bottom = col_riffle(&u, &xk, &e2.m).unwrap();
    let m = top.vstack(&bottom).unwrap();
    let k = col_riffle(&u, &k1_rest.mul_add(&e2.k, &k1_sel).unwrap(), &e2.k).unwrap();
    debug_assert_eq!(m.shape(), (r1 + r2, r1 + r2));
    EchResult { m, k, r, rho, gamma: IndexSet::from_sorted(beta, gamma) }
}
