//! Elementary jobs. Tasks are compositions of these and nothing else.

use crate::ech::{EchKernel, EchResult};
use crate::error::{Error, Result};
use crate::matrix::{BitString, IndexSet, Matrix};

pub fn cpy(a: &Matrix) -> Matrix {
    a.clone()
}

pub fn mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.mul(b)
}

/// `a + b * c`.
pub fn mad(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    a.mul_add(b, c)
}

pub fn ech(kernel: &dyn EchKernel, h: &Matrix) -> EchResult {
    kernel.ech(h)
}

/// Columns of `h` in `gamma`, then the remaining columns.
pub fn cex(h: &Matrix, gamma: &IndexSet) -> Result<(Matrix, Matrix)> {
    if gamma.universe() != h.cols() {
        return Err(Error::universe("cex", format!("set over {} for {} columns", gamma.universe(), h.cols())));
    }
    Ok((h.pick_cols(gamma.members()), h.pick_cols(gamma.complement().members())))
}

/// Rows of `h` in `rho`, then the remaining rows.
pub fn rex(h: &Matrix, rho: &IndexSet) -> Result<(Matrix, Matrix)> {
    if rho.universe() != h.rows() {
        return Err(Error::universe("rex", format!("set over {} for {} rows", rho.universe(), h.rows())));
    }
    Ok((h.pick_rows(rho.members()), h.pick_rows(rho.complement().members())))
}

/// Union with history. `rho2` indexes the complement of `rho1`; the result
/// is the union in the universe of `rho1`, and `u` marks which members came
/// from `rho2`.
pub fn unh(rho1: &IndexSet, rho2: &IndexSet) -> Result<(IndexSet, BitString)> {
    let rest = rho1.complement();
    if rho2.universe() != rest.len() {
        return Err(Error::universe("unh", format!("second set over {}, complement has {}", rho2.universe(), rest.len())));
    }
    let added: Vec<usize> = rho2.members().iter().map(|&i| rest.members()[i]).collect();
    let (mut members, mut bits) = (Vec::with_capacity(rho1.len() + added.len()), Vec::with_capacity(rho1.len() + added.len()));
    let (mut a, mut b) = (rho1.members().iter().peekable(), added.iter().peekable());
    loop {
        match (a.peek(), b.peek()) {
            (Some(&&x), Some(&&y)) if x < y => {
                members.push(x);
                bits.push(false);
                a.next();
            }
            (_, Some(&&y)) => {
                members.push(y);
                bits.push(true);
                b.next();
            }
            (Some(&&x), None) => {
                members.push(x);
                bits.push(false);
                a.next();
            }
            (None, None) => break,
        }
    }
    Ok((IndexSet::from_sorted(rho1.universe(), members), BitString::new(bits)))
}

/// [`unh`] with an empty first set.
pub fn un0(rho2: &IndexSet) -> (IndexSet, BitString) {
    (rho2.clone(), BitString::ones(rho2.len()))
}

/// Bit `l` is set iff the `l`-th member of `rho2` lies in `rho1`.
pub fn mkr(rho1: &IndexSet, rho2: &IndexSet) -> Result<BitString> {
    let bits: Vec<bool> = rho2.members().iter().map(|&x| rho1.contains(x)).collect();
    let hits = bits.iter().filter(|&&b| b).count();
    if hits != rho1.len() {
        return Err(Error::InvalidIndexSet(format!("mkr: {:?} is not contained in {:?}", rho1.members(), rho2.members())));
    }
    Ok(BitString::new(bits))
}

/// Row riffle: output row `l` is the next row of `b` if `u[l] = 0`, else of `c`.
pub fn rrf(u: &BitString, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    b.check_field(c, "rrf")?;
    if b.cols() != c.cols() || u.count_zeros() != b.rows() || u.count_ones() != c.rows() {
        return Err(Error::bits(
            "rrf",
            format!("{} zeros/{} ones vs {}x{} and {}x{}", u.count_zeros(), u.count_ones(), b.rows(), b.cols(), c.rows(), c.cols()),
        ));
    }
    let mut data = Vec::with_capacity(u.len() * b.cols());
    let (mut ib, mut ic) = (0, 0);
    for &bit in u.bits() {
        if bit {
            data.extend_from_slice(c.row(ic));
            ic += 1;
        } else {
            data.extend_from_slice(b.row(ib));
            ib += 1;
        }
    }
    Ok(Matrix::from_raw(b.field(), u.len(), b.cols(), data))
}

/// Riffle in zero columns: the columns of `m` go to the set positions of
/// `lambda`, zeros everywhere else.
pub fn crz(m: &Matrix, lambda: &BitString) -> Result<Matrix> {
    if lambda.count_ones() != m.cols() {
        return Err(Error::bits("crz", format!("{} set bits for {} columns", lambda.count_ones(), m.cols())));
    }
    let zero = Matrix::zeros(m.field(), m.rows(), lambda.count_zeros());
    crate::ech::col_riffle(lambda, &zero, m)
}

/// Copy of `k` with entry `(t, p_t)` set to 1, where `p_t` is the position of
/// the `t`-th set bit of `delta`.
pub fn adi(k: &Matrix, delta: &BitString) -> Result<Matrix> {
    let marked = delta.ones_positions();
    if delta.len() != k.cols() || marked.len() > k.rows() {
        return Err(Error::bits("adi", format!("{} marks over {} bits for {}x{}", marked.len(), delta.len(), k.rows(), k.cols())));
    }
    let mut out = k.clone();
    for (t, &p) in marked.iter().enumerate() {
        out.set(t, p, 1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ech::{DirectGauss, Recursive};
    use crate::field::Field;

    fn f3() -> Field {
        Field::prime(3).unwrap()
    }

    fn m(rows: &[Vec<u32>]) -> Matrix {
        Matrix::from_rows(&f3(), rows).unwrap()
    }

    fn set(universe: usize, members: &[usize]) -> IndexSet {
        IndexSet::new(universe, members.to_vec()).unwrap()
    }

    #[test]
    fn cpy_examples() {
        let f = f3();
        assert_eq!(cpy(&m(&[vec![1, 2]])), m(&[vec![1, 2]]));
        assert_eq!(cpy(&Matrix::zeros(&f, 0, 0)).shape(), (0, 0));
        assert_eq!(cpy(&Matrix::zeros(&f, 3, 0)).shape(), (3, 0));
    }

    #[test]
    fn mul_examples() {
        let f = f3();
        let got = mul(&m(&[vec![0, 2], vec![1, 0]]), &m(&[vec![0, 1, 0], vec![0, 2, 1]])).unwrap();
        assert_eq!(got, m(&[vec![0, 1, 2], vec![0, 1, 0]]));
        let a = m(&[vec![1, 2], vec![2, 2]]);
        assert_eq!(mul(&Matrix::identity(&f, 2), &a).unwrap(), a);
        assert_eq!(mul(&Matrix::zeros(&f, 2, 0), &Matrix::zeros(&f, 0, 3)).unwrap(), Matrix::zeros(&f, 2, 3));
        assert!(mul(&a, &Matrix::zeros(&f, 3, 1)).is_err());
    }

    #[test]
    fn mad_examples() {
        let got = mad(&m(&[vec![1], vec![1], vec![2]]), &m(&[vec![2, 0], vec![0, 1], vec![1, 2]]), &m(&[vec![2], vec![2]])).unwrap();
        assert_eq!(got, m(&[vec![2], vec![0], vec![2]]));

        let a = m(&[vec![1, 2]]);
        assert_eq!(mad(&a, &m(&[vec![0]]), &m(&[vec![2, 2]])).unwrap(), a);

        let got = mad(
            &m(&[vec![0, 2, 2], vec![2, 1, 1], vec![2, 0, 0]]),
            &m(&[vec![2, 0], vec![0, 1], vec![1, 2]]),
            &m(&[vec![0, 1, 2], vec![0, 1, 0]]),
        )
        .unwrap();
        assert_eq!(got, m(&[vec![0, 1, 0], vec![2, 2, 1], vec![2, 0, 2]]));
    }

    #[test]
    fn cex_examples() {
        let h = m(&[vec![2, 0, 1], vec![0, 1, 1], vec![1, 2, 2]]);
        let (sel, rest) = cex(&h, &set(3, &[0, 1])).unwrap();
        assert_eq!(sel, m(&[vec![2, 0], vec![0, 1], vec![1, 2]]));
        assert_eq!(rest, m(&[vec![1], vec![1], vec![2]]));
        let (sel, rest) = cex(&h, &IndexSet::empty(3)).unwrap();
        assert_eq!((sel.shape(), rest), ((3, 0), h.clone()));
        let (sel, rest) = cex(&h, &IndexSet::full(3)).unwrap();
        assert_eq!((sel, rest.shape()), (h.clone(), (3, 0)));
        assert!(cex(&h, &IndexSet::full(4)).is_err());
    }

    #[test]
    fn rex_examples() {
        let h = m(&[vec![0, 1, 0], vec![1, 2, 2], vec![0, 2, 1]]);
        let (sel, rest) = rex(&h, &set(3, &[0, 2])).unwrap();
        assert_eq!(sel, m(&[vec![0, 1, 0], vec![0, 2, 1]]));
        assert_eq!(rest, m(&[vec![1, 2, 2]]));
        let (sel, rest) = rex(&h, &IndexSet::empty(3)).unwrap();
        assert_eq!((sel.shape(), rest), ((0, 3), h.clone()));
        let (sel, rest) = rex(&h, &IndexSet::full(3)).unwrap();
        assert_eq!((sel, rest.shape()), (h.clone(), (0, 3)));
    }

    #[test]
    fn unh_examples() {
        let (rho, u) = unh(&set(4, &[0, 2]), &set(2, &[0])).unwrap();
        assert_eq!(rho.members(), &[0, 1, 2]);
        assert_eq!(u, BitString::from_01(&[0, 1, 0]));

        let (rho, u) = unh(&IndexSet::empty(3), &set(3, &[1, 2])).unwrap();
        assert_eq!(rho.members(), &[1, 2]);
        assert_eq!(u, BitString::ones(2));

        let (rho, u) = unh(&set(3, &[0, 1]), &set(1, &[0])).unwrap();
        assert_eq!(rho.members(), &[0, 1, 2]);
        assert_eq!(u, BitString::from_01(&[0, 0, 1]));

        assert!(unh(&set(3, &[0]), &set(3, &[0])).is_err());
    }

    #[test]
    fn un0_examples() {
        let (rho, u) = un0(&set(3, &[0, 2]));
        assert_eq!((rho.members(), u), (&[0, 2][..], BitString::from_01(&[1, 1])));
        let (rho, u) = un0(&IndexSet::empty(0));
        assert!(rho.is_empty() && u.is_empty());
        let (rho, u) = un0(&set(2, &[1]));
        assert_eq!((rho.members(), u), (&[1][..], BitString::from_01(&[1])));
    }

    #[test]
    fn mkr_examples() {
        assert_eq!(mkr(&set(3, &[0, 2]), &set(3, &[0, 1, 2])).unwrap(), BitString::from_01(&[1, 0, 1]));
        let s = set(5, &[1, 3, 4]);
        assert_eq!(mkr(&s, &s).unwrap(), BitString::ones(3));
        assert_eq!(mkr(&IndexSet::empty(5), &s).unwrap(), BitString::zeros(3));
        assert!(mkr(&set(5, &[0]), &s).is_err());
    }

    #[test]
    fn rrf_examples() {
        let got = rrf(&BitString::from_01(&[0, 1, 0]), &m(&[vec![1, 1], vec![2, 2]]), &m(&[vec![0, 0]])).unwrap();
        assert_eq!(got, m(&[vec![1, 1], vec![0, 0], vec![2, 2]]));
        let b = m(&[vec![1, 2]]);
        assert_eq!(rrf(&BitString::zeros(1), &b, &Matrix::zeros(&f3(), 0, 2)).unwrap(), b);
        let got = rrf(&BitString::from_01(&[0, 0, 1]), &m(&[vec![0, 1], vec![1, 2]]), &m(&[vec![0, 1]])).unwrap();
        assert_eq!(got, m(&[vec![0, 1], vec![1, 2], vec![0, 1]]));
        assert!(rrf(&BitString::ones(2), &b, &b).is_err());
    }

    #[test]
    fn crz_examples() {
        let a = m(&[vec![1], vec![2]]);
        assert_eq!(crz(&a, &BitString::from_01(&[1, 0])).unwrap(), m(&[vec![1, 0], vec![2, 0]]));
        assert_eq!(crz(&a, &BitString::ones(1)).unwrap(), a);
        assert_eq!(crz(&Matrix::zeros(&f3(), 2, 0), &BitString::zeros(2)).unwrap(), Matrix::zeros(&f3(), 2, 2));
        assert!(crz(&a, &BitString::ones(2)).is_err());
    }

    #[test]
    fn adi_examples() {
        let z = Matrix::zeros(&f3(), 2, 3);
        assert_eq!(adi(&z, &BitString::from_01(&[1, 0, 1])).unwrap(), m(&[vec![1, 0, 0], vec![0, 0, 1]]));
        assert_eq!(adi(&z, &BitString::zeros(3)).unwrap(), z);
        assert_eq!(adi(&m(&[vec![2, 0]]), &BitString::from_01(&[0, 1])).unwrap(), m(&[vec![2, 1]]));
        assert!(adi(&m(&[vec![2, 0]]), &BitString::ones(2)).is_err());
    }

    #[test]
    fn ech_through_job() {
        let h = m(&[vec![0, 2, 2], vec![0, 2, 2], vec![1, 0, 1]]);
        assert_eq!(ech(&DirectGauss, &h), ech(&Recursive { threshold: 1 }, &h));
    }
}
