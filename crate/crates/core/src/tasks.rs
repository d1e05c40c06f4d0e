//! Composite block tasks and the packages they exchange.
//!
//! Block coordinates are 0-based: the first block row is `i == 0` and the
//! first block column is `j == 0`.

use crate::ech::EchKernel;
use crate::error::{Error, Result};
use crate::jobs::{adi, cex, crz, ech, mad, mkr, mul, rex, rrf, un0, unh};
use crate::matrix::{BitString, IndexSet, Matrix};

/// Output of [`clear_down`] consumed by the row updates of the same block row.
/// `a`, `e` and `lambda` are absent for the first block row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PkgA {
    pub a: Option<Matrix>,
    pub m: Matrix,
    pub k: Matrix,
    pub rho_prime: IndexSet,
    pub e: Option<Matrix>,
    pub lambda: Option<BitString>,
}

/// Echelon state of a block column: pivot columns and the remnant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PkgD {
    pub r: Matrix,
    pub gamma: IndexSet,
}

/// Pivot rows found so far in a block row; `delta` marks the ones added by
/// the latest block column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PkgE {
    pub rho: IndexSet,
    pub delta: BitString,
}

/// Payload of one package slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Package {
    A(PkgA),
    D(PkgD),
    E(PkgE),
    Mat(Matrix),
}

fn set_bytes(s: &IndexSet) -> usize {
    s.len() * std::mem::size_of::<usize>()
}

impl Package {
    /// Approximate heap footprint.
    pub fn byte_size(&self) -> usize {
        match self {
            Package::A(a) => {
                a.a.as_ref().map_or(0, Matrix::byte_size)
                    + a.m.byte_size()
                    + a.k.byte_size()
                    + set_bytes(&a.rho_prime)
                    + a.e.as_ref().map_or(0, Matrix::byte_size)
                    + a.lambda.as_ref().map_or(0, BitString::len)
            }
            Package::D(d) => d.r.byte_size() + set_bytes(&d.gamma),
            Package::E(e) => set_bytes(&e.rho) + e.delta.len(),
            Package::Mat(m) => m.byte_size(),
        }
    }

    pub fn as_a(&self) -> Result<&PkgA> {
        match self {
            Package::A(a) => Ok(a),
            other => Err(Error::Plan(format!("expected an A package, got {}", other.kind()))),
        }
    }

    pub fn as_d(&self) -> Result<&PkgD> {
        match self {
            Package::D(d) => Ok(d),
            other => Err(Error::Plan(format!("expected a D package, got {}", other.kind()))),
        }
    }

    pub fn as_e(&self) -> Result<&PkgE> {
        match self {
            Package::E(e) => Ok(e),
            other => Err(Error::Plan(format!("expected an E package, got {}", other.kind()))),
        }
    }

    pub fn as_mat(&self) -> Result<&Matrix> {
        match self {
            Package::Mat(m) => Ok(m),
            other => Err(Error::Plan(format!("expected a matrix package, got {}", other.kind()))),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Package::A(_) => "A",
            Package::D(_) => "D",
            Package::E(_) => "E",
            Package::Mat(_) => "matrix",
        }
    }
}

/// Echelonize block `c` against the pivots `d` already collected in its block
/// column. Returns the extended column state and the row-operation record.
pub fn clear_down(kernel: &dyn EchKernel, c: &Matrix, d: Option<&PkgD>, i: usize) -> Result<(PkgD, PkgA)> {
    if i == 0 {
        if d.is_some() {
            return Err(Error::case("clear_down", "first block row takes no D package"));
        }
        let e = ech(kernel, c);
        let a = PkgA { a: None, m: e.m, k: e.k, rho_prime: e.rho, e: None, lambda: None };
        return Ok((PkgD { r: e.r, gamma: e.gamma }, a));
    }
    let d = d.ok_or_else(|| Error::case("clear_down", "D package required after the first block row"))?;
    if d.gamma.universe() != c.cols() || d.r.shape() != (d.gamma.len(), c.cols() - d.gamma.len()) {
        return Err(Error::shape(
            "clear_down",
            format!("C {:?}, D.R {:?}, D.gamma {}/{}", c.shape(), d.r.shape(), d.gamma.len(), d.gamma.universe()),
        ));
    }
    let (a_sel, a_rest) = cex(c, &d.gamma)?;
    let h = mad(&a_rest, &a_sel, &d.r)?;
    let e = ech(kernel, &h);
    let (a_e, r_prime) = cex(&d.r, &e.gamma)?;
    let r_prime = mad(&r_prime, &a_e, &e.r)?;
    let (gamma, lambda) = unh(&d.gamma, &e.gamma)?;
    let r = rrf(&lambda, &r_prime, &e.r)?;
    let a = PkgA { a: Some(a_sel), m: e.m, k: e.k, rho_prime: e.rho, e: Some(a_e), lambda: Some(lambda) };
    Ok((PkgD { r, gamma }, a))
}

fn require<'a, T>(x: &'a Option<T>, op: &'static str, what: &str) -> Result<&'a T> {
    x.as_ref().ok_or_else(|| Error::case(op, format!("{what} absent")))
}

/// Apply the row operations recorded in `a` to block `c` of the same block
/// row. Returns the remaining rows of `c` and the extended pivot-row block.
pub fn update_row(a: &PkgA, c: &Matrix, b: Option<&Matrix>, i: usize) -> Result<(Matrix, Matrix)> {
    const OP: &str = "update_row";
    if c.rows() != a.rho_prime.universe() {
        return Err(Error::shape(OP, format!("C has {} rows, A covers {}", c.rows(), a.rho_prime.universe())));
    }
    let (z, b) = if i == 0 {
        if b.is_some() {
            return Err(Error::case(OP, "first block row takes no B block"));
        }
        (c.clone(), None)
    } else {
        let b = b.ok_or_else(|| Error::case(OP, "B block required after the first block row"))?;
        (mad(c, require(&a.a, OP, "A.A")?, b)?, Some(b))
    };
    let (v, w) = rex(&z, &a.rho_prime)?;
    let x = mul(&a.m, &v)?;
    let b_new = match b {
        None => x,
        Some(b) => {
            let s = mad(b, require(&a.e, OP, "A.E")?, &x)?;
            rrf(require(&a.lambda, OP, "A.lambda")?, &s, &x)?
        }
    };
    let c_new = mad(&w, &a.k, &v)?;
    Ok((c_new, b_new))
}

/// Mirror [`update_row`] on the stored parts of the transformation matrix:
/// the cleaner block `K_ih` and the multiplier block `M_jh`.
///
/// `k` is absent exactly when `j == 0`; `m` is absent exactly when `h == i`.
pub fn update_row_trafo(
    a: &PkgA,
    k: Option<&Matrix>,
    m: Option<&Matrix>,
    e: &PkgE,
    i: usize,
    h: usize,
    j: usize,
) -> Result<(Matrix, Matrix)> {
    const OP: &str = "update_row_trafo";
    if h > i {
        return Err(Error::case(OP, format!("h={h} exceeds i={i}")));
    }
    if k.is_some() != (j != 0) {
        return Err(Error::case(OP, format!("K must be present iff j > 0 (j={j})")));
    }
    if m.is_some() != (h != i) {
        return Err(Error::case(OP, format!("M must be present iff h != i (h={h}, i={i})")));
    }
    let diag = h == i;

    // stored K never holds the columns of the new pivots; give them zeros
    let k = match k {
        Some(k) => Some(crz(k, &e.delta.complement())?),
        None => None,
    };
    let z = match (diag, k, m) {
        (false, Some(k), Some(m)) => Some(mad(&k, require(&a.a, OP, "A.A")?, m)?),
        (false, None, Some(m)) => Some(mul(require(&a.a, OP, "A.A")?, m)?),
        (true, Some(k), None) => Some(k),
        (true, None, None) => None,
        _ => unreachable!("presence checked above"),
    };
    let vw = match &z {
        Some(z) => Some(rex(z, &a.rho_prime)?),
        None => None,
    };
    let (x, k_new) = match vw {
        Some((v, w)) => {
            let v = if diag { adi(&v, &e.delta)? } else { v };
            (mul(&a.m, &v)?, mad(&w, &a.k, &v)?)
        }
        // V is the identity and W is zero
        None => (a.m.clone(), a.k.clone()),
    };
    let m_new = if diag && i == 0 {
        x
    } else {
        let ae = require(&a.e, OP, "A.E")?;
        let s = match m {
            Some(m) => mad(m, ae, &x)?,
            None => mul(ae, &x)?,
        };
        rrf(require(&a.lambda, OP, "A.lambda")?, &s, &x)?
    };
    Ok((k_new, m_new))
}

/// Add the new pivot rows of `a` to the row selection of the block row.
pub fn extend(a: &PkgA, e: Option<&PkgE>, j: usize) -> Result<PkgE> {
    match (j, e) {
        (0, None) => {
            let (rho, delta) = un0(&a.rho_prime);
            Ok(PkgE { rho, delta })
        }
        (0, Some(_)) => Err(Error::case("extend", "first block column takes no E package")),
        (_, None) => Err(Error::case("extend", "E package required after the first block column")),
        (_, Some(e)) => {
            let (rho, delta) = unh(&e.rho, &a.rho_prime)?;
            Ok(PkgE { rho, delta })
        }
    }
}

/// Widen `m` from the pivot rows of `e1` to those of `e2` with zero columns.
pub fn row_lengthen(m: &Matrix, e1: &PkgE, e2: &PkgE) -> Result<Matrix> {
    if m.cols() != e1.rho.len() {
        return Err(Error::shape("row_lengthen", format!("M has {} columns, E1 selects {}", m.cols(), e1.rho.len())));
    }
    crz(m, &mkr(&e1.rho, &e2.rho)?)
}

/// Split a pivot-row block into its pivot columns and the rest.
pub fn pre_clear_up(b: &Matrix, d: &PkgD) -> Result<(Matrix, Matrix)> {
    cex(b, &d.gamma)
}

/// `r + x * m`.
pub fn clear_up(r: &Matrix, x: &Matrix, m: &Matrix) -> Result<Matrix> {
    mad(r, x, m)
}

pub fn copy_d(d: &PkgD) -> Matrix {
    d.r.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ech::{DirectGauss, Recursive};
    use crate::field::Field;

    fn m(rows: &[Vec<u32>]) -> Matrix {
        Matrix::from_rows(&Field::prime(3).unwrap(), rows).unwrap()
    }

    fn set(universe: usize, members: &[usize]) -> IndexSet {
        IndexSet::new(universe, members.to_vec()).unwrap()
    }

    fn first_cleardown() -> (PkgD, PkgA) {
        clear_down(&DirectGauss, &m(&[vec![0, 2, 2], vec![0, 2, 2], vec![1, 0, 1]]), None, 0).unwrap()
    }

    fn second_cleardown() -> (PkgD, PkgA) {
        let (d, _) = first_cleardown();
        clear_down(&DirectGauss, &m(&[vec![2, 0, 1], vec![0, 1, 1], vec![1, 2, 2]]), Some(&d), 1).unwrap()
    }

    #[test]
    fn clear_down_first_row() {
        let (d, a) = first_cleardown();
        assert_eq!(d.gamma.members(), &[0, 1]);
        assert_eq!(d.r, m(&[vec![2], vec![2]]));
        assert_eq!(a.m, m(&[vec![0, 2], vec![1, 0]]));
        assert_eq!(a.k, m(&[vec![2, 0]]));
        assert_eq!(a.rho_prime.members(), &[0, 2]);
        assert!(a.a.is_none() && a.e.is_none() && a.lambda.is_none());
    }

    #[test]
    fn clear_down_second_row() {
        let (d, a) = second_cleardown();
        assert_eq!(d.gamma.members(), &[0, 1, 2]);
        assert_eq!(d.r.shape(), (3, 0));
        assert_eq!(a.a.unwrap(), m(&[vec![2, 0], vec![0, 1], vec![1, 2]]));
        assert_eq!(a.m, m(&[vec![1]]));
        assert_eq!(a.k, m(&[vec![0], vec![2]]));
        assert_eq!(a.rho_prime.members(), &[0]);
        assert_eq!(a.e.unwrap(), m(&[vec![2], vec![2]]));
        assert_eq!(a.lambda.unwrap(), BitString::from_01(&[0, 0, 1]));
    }

    #[test]
    fn clear_down_zero_block() {
        let f = Field::prime(3).unwrap();
        let (d, a) = clear_down(&Recursive { threshold: 2 }, &Matrix::zeros(&f, 4, 5), None, 0).unwrap();
        assert_eq!((d.gamma.len(), d.r.shape()), (0, (0, 5)));
        assert_eq!((a.m.shape(), a.k.shape()), ((0, 0), (4, 0)));
        assert!(a.rho_prime.is_empty());
    }

    #[test]
    fn clear_down_rejects_bad_inputs() {
        let (d, _) = first_cleardown();
        let c = m(&[vec![1, 2]]);
        assert!(clear_down(&DirectGauss, &c, Some(&d), 1).is_err());
        assert!(clear_down(&DirectGauss, &c, None, 1).is_err());
    }

    #[test]
    fn update_row_first_row() {
        let (_, a) = first_cleardown();
        let (c, b) = update_row(&a, &m(&[vec![0, 1, 0], vec![1, 2, 2], vec![0, 2, 1]]), None, 0).unwrap();
        assert_eq!(b, m(&[vec![0, 1, 2], vec![0, 1, 0]]));
        assert_eq!(c, m(&[vec![1, 1, 2]]));
    }

    #[test]
    fn update_row_second_row() {
        // hand-evaluated continuation of the six steps
        let (_, a) = second_cleardown();
        let b = m(&[vec![0, 1, 2], vec![0, 1, 0]]);
        let (c, b) = update_row(&a, &m(&[vec![0, 2, 2], vec![2, 1, 1], vec![2, 0, 0]]), Some(&b), 1).unwrap();
        assert_eq!(b, m(&[vec![0, 0, 2], vec![0, 0, 0], vec![0, 1, 0]]));
        assert_eq!(c, m(&[vec![2, 2, 1], vec![2, 2, 2]]));
    }

    #[test]
    fn update_row_without_new_pivots() {
        let (d, _) = first_cleardown();
        // a row in the span of the existing pivots
        let (_, a) = clear_down(&DirectGauss, &m(&[vec![0, 2, 2]]), Some(&d), 1).unwrap();
        assert!(a.rho_prime.is_empty());
        let b = m(&[vec![1, 2], vec![0, 1]]);
        let c = m(&[vec![2, 2]]);
        let (c2, b2) = update_row(&a, &c, Some(&b), 1).unwrap();
        assert_eq!(b2, b);
        assert_eq!(c2, mad(&c, a.a.as_ref().unwrap(), &b).unwrap());
    }

    #[test]
    fn trafo_first_block() {
        let (_, a) = first_cleardown();
        let e = extend(&a, None, 0).unwrap();
        let (k, mm) = update_row_trafo(&a, None, None, &e, 0, 0, 0).unwrap();
        assert_eq!(mm, m(&[vec![0, 2], vec![1, 0]]));
        assert_eq!(k, m(&[vec![2, 0]]));
    }

    #[test]
    fn trafo_below_first_row() {
        let (_, a) = second_cleardown();
        let (_, a0) = first_cleardown();
        let e00 = extend(&a0, None, 0).unwrap();
        let m00 = m(&[vec![0, 2], vec![1, 0]]);
        let (k, mm) = update_row_trafo(&a, None, Some(&m00), &e00, 1, 0, 0).unwrap();
        assert_eq!(mm, m(&[vec![0, 1], vec![1, 2], vec![0, 1]]));
        assert_eq!(k, m(&[vec![1, 0], vec![2, 1]]));
    }

    #[test]
    fn trafo_presence_rules() {
        let (_, a) = second_cleardown();
        let e = PkgE { rho: set(3, &[0]), delta: BitString::ones(1) };
        let mm = m(&[vec![1]]);
        assert!(update_row_trafo(&a, None, Some(&mm), &e, 1, 1, 0).is_err());
        assert!(update_row_trafo(&a, Some(&mm), None, &e, 1, 1, 0).is_err());
        assert!(update_row_trafo(&a, None, None, &e, 0, 1, 0).is_err());
    }

    #[test]
    fn extend_examples() {
        let (_, a) = first_cleardown();
        let e = extend(&a, None, 0).unwrap();
        assert_eq!((e.rho.members(), &e.delta), (&[0, 2][..], &BitString::ones(2)));

        let e0 = PkgE { rho: set(4, &[0, 2]), delta: BitString::ones(2) };
        let mut a1 = a.clone();
        a1.rho_prime = set(2, &[0]);
        let e1 = extend(&a1, Some(&e0), 1).unwrap();
        assert_eq!(e1.rho.members(), &[0, 1, 2]);
        assert_eq!(e1.delta, BitString::from_01(&[0, 1, 0]));

        a1.rho_prime = IndexSet::empty(2);
        let e2 = extend(&a1, Some(&e0), 1).unwrap();
        assert_eq!((e2.rho, e2.delta), (e0.rho.clone(), BitString::zeros(2)));
    }

    #[test]
    fn row_lengthen_examples() {
        let x = m(&[vec![1], vec![2]]);
        let e1 = PkgE { rho: set(3, &[2]), delta: BitString::ones(1) };
        let e2 = PkgE { rho: set(3, &[0, 2]), delta: BitString::ones(2) };
        assert_eq!(row_lengthen(&x, &e1, &e2).unwrap(), m(&[vec![0, 1], vec![0, 2]]));
        assert_eq!(row_lengthen(&x, &e1, &e1).unwrap(), x);
        let e0 = PkgE { rho: IndexSet::empty(3), delta: BitString::zeros(0) };
        let f = Field::prime(3).unwrap();
        assert_eq!(row_lengthen(&Matrix::zeros(&f, 2, 0), &e0, &e2).unwrap(), Matrix::zeros(&f, 2, 2));
        assert!(row_lengthen(&x, &e2, &e1).is_err());
    }

    #[test]
    fn pre_clear_up_examples() {
        let b = m(&[vec![0, 1, 2]]);
        let d = PkgD { r: m(&[vec![0, 0]]), gamma: set(3, &[1]) };
        let (x, r) = pre_clear_up(&b, &d).unwrap();
        assert_eq!((x, r), (m(&[vec![1]]), m(&[vec![0, 2]])));
        let d = PkgD { r: Matrix::zeros(b.field(), 0, 3), gamma: IndexSet::empty(3) };
        let (x, r) = pre_clear_up(&b, &d).unwrap();
        assert_eq!((x.shape(), r), ((1, 0), b.clone()));
        let d = PkgD { r: Matrix::zeros(b.field(), 3, 0), gamma: IndexSet::full(3) };
        let (x, r) = pre_clear_up(&b, &d).unwrap();
        assert_eq!((x, r.shape()), (b.clone(), (1, 0)));
    }

    #[test]
    fn clear_up_examples() {
        let r = m(&[vec![1, 2]]);
        assert_eq!(clear_up(&r, &m(&[vec![0]]), &m(&[vec![2, 2]])).unwrap(), r);
        assert_eq!(clear_up(&m(&[vec![1]]), &m(&[vec![2]]), &m(&[vec![2]])).unwrap(), m(&[vec![2]]));
        let f2 = Field::prime(2).unwrap();
        let one = |rows: &[Vec<u32>]| Matrix::from_rows(&f2, rows).unwrap();
        assert_eq!(clear_up(&one(&[vec![1, 0]]), &one(&[vec![1]]), &one(&[vec![1, 1]])).unwrap(), one(&[vec![0, 1]]));
    }

    #[test]
    fn copy_examples() {
        let d = PkgD { r: m(&[vec![2], vec![2]]), gamma: set(3, &[0, 1]) };
        assert_eq!(copy_d(&d), m(&[vec![2], vec![2]]));
        let f = Field::prime(3).unwrap();
        let d = PkgD { r: Matrix::zeros(&f, 0, 4), gamma: IndexSet::empty(4) };
        assert_eq!(copy_d(&d).shape(), (0, 4));
        let d = PkgD { r: Matrix::zeros(&f, 3, 0), gamma: IndexSet::full(3) };
        assert_eq!(copy_d(&d).shape(), (3, 0));
    }
}
