//! Hermite and Smith normal forms over `i128` with overflow checks.

use crate::error::{Error, Result};

pub type Matrix = Vec<Vec<i128>>;

fn overflow() -> Error {
    Error::InternalInvariantBroken("integer overflow in lattice reduction".into())
}

/// `dst -= q * src`, entrywise.
fn row_axpy(dst: &mut [i128], src: &[i128], q: i128) -> Result<()> {
    if q == 0 {
        return Ok(());
    }
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s.checked_mul(q).and_then(|p| d.checked_sub(p)).ok_or_else(overflow)?;
    }
    Ok(())
}

fn row_sub_multiple(m: &mut Matrix, dst: usize, src: usize, q: i128) -> Result<()> {
    if dst == src {
        return Err(Error::InternalInvariantBroken("row operation on itself".into()));
    }
    let (a, b) = if dst < src {
        let (lo, hi) = m.split_at_mut(src);
        (&mut lo[dst], &hi[0])
    } else {
        let (lo, hi) = m.split_at_mut(dst);
        (&mut hi[0], &lo[src])
    };
    row_axpy(a, b, q)
}

fn negate_row(row: &mut [i128]) -> Result<()> {
    for x in row.iter_mut() {
        *x = x.checked_neg().ok_or_else(overflow)?;
    }
    Ok(())
}

/// Row echelon reduction on the first `pivot_cols` columns by unimodular row
/// operations. Pivots are positive and entries above each pivot lie in
/// `[0, pivot)`. Returns the number of pivot rows.
pub fn echelon(m: &mut Matrix, pivot_cols: usize) -> Result<usize> {
    let rows = m.len();
    let mut r = 0;
    for c in 0..pivot_cols {
        if r == rows {
            break;
        }
        loop {
            let Some(p) = (r..rows).filter(|&i| m[i][c] != 0).min_by_key(|&i| m[i][c].unsigned_abs()) else {
                break;
            };
            m.swap(r, p);
            let mut clean = true;
            for i in r + 1..rows {
                if m[i][c] != 0 {
                    let q = m[i][c] / m[r][c];
                    row_sub_multiple(m, i, r, q)?;
                    clean &= m[i][c] == 0;
                }
            }
            if clean {
                break;
            }
        }
        if m[r][c] == 0 {
            continue;
        }
        if m[r][c] < 0 {
            negate_row(&mut m[r])?;
        }
        let p = m[r][c];
        for i in 0..r {
            let q = m[i][c].div_euclid(p);
            row_sub_multiple(m, i, r, q)?;
        }
        r += 1;
    }
    Ok(r)
}

/// Hermite normal form of the row lattice of `m`; zero rows are dropped.
pub fn hnf(mut m: Matrix) -> Result<Matrix> {
    let cols = m.first().map_or(0, Vec::len);
    let rank = echelon(&mut m, cols)?;
    m.truncate(rank);
    Ok(m)
}

/// A basis (as rows) of `{ x ∈ Z^n : x·A = 0 }` for an `n × d` matrix `A`,
/// i.e. the integer left kernel.
pub fn integer_left_kernel(a: &Matrix, n: usize, d: usize) -> Result<Matrix> {
    // Reduce [A | I]; rows whose A-part vanishes carry kernel vectors, and
    // the transformation is unimodular, so they form a lattice basis.
    let mut aug: Matrix = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            row.resize(d, 0);
            row.extend((0..n).map(|j| (i == j) as i128));
            row
        })
        .collect();
    let rank = echelon(&mut aug, d)?;
    Ok(aug[rank..].iter().map(|row| row[d..].to_vec()).collect())
}

/// Whether `v` lies in the row lattice of a matrix in Hermite normal form.
pub fn hnf_contains(basis: &Matrix, v: &[i128]) -> bool {
    let mut v = v.to_vec();
    for row in basis {
        let Some(p) = row.iter().position(|&x| x != 0) else { continue };
        if v[p] % row[p] != 0 {
            return false;
        }
        let q = v[p] / row[p];
        if row_axpy(&mut v, row, q).is_err() {
            return false;
        }
    }
    v.iter().all(|&x| x == 0)
}

/// Smith normal form `U·B·V = D` of an `s × f` matrix of full row rank, with
/// `W = V^{-1}` kept alongside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Smith {
    pub u: Matrix,
    pub v: Matrix,
    pub w: Matrix,
    /// Diagonal `d_1 | d_2 | ... | d_s`, all positive.
    pub diag: Vec<i128>,
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect()
}

pub fn smith(b: &Matrix, f: usize) -> Result<Smith> {
    let s = b.len();
    let mut a = b.clone();
    let mut u = identity(s);
    let mut v = identity(f);
    let mut w = identity(f);

    // Column operation col_j -= q col_i on A and V, with the inverse row
    // operation row_i += q row_j on W.
    let col_sub = |a: &mut Matrix, v: &mut Matrix, w: &mut Matrix, j: usize, i: usize, q: i128| -> Result<()> {
        if q == 0 {
            return Ok(());
        }
        for row in a.iter_mut().chain(v.iter_mut()) {
            row[j] = row[i].checked_mul(q).and_then(|p| row[j].checked_sub(p)).ok_or_else(overflow)?;
        }
        row_sub_multiple(w, i, j, -q)
    };
    let col_swap = |a: &mut Matrix, v: &mut Matrix, w: &mut Matrix, i: usize, j: usize| {
        for row in a.iter_mut().chain(v.iter_mut()) {
            row.swap(i, j);
        }
        w.swap(i, j);
    };

    for t in 0..s {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..s {
                for j in t..f {
                    if a[i][j] != 0 && best.is_none_or(|(bi, bj)| a[i][j].unsigned_abs() < a[bi][bj].unsigned_abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                return Err(Error::InternalInvariantBroken("relation basis is rank deficient".into()));
            };
            a.swap(t, pi);
            u.swap(t, pi);
            col_swap(&mut a, &mut v, &mut w, t, pj);
            let mut clean = true;
            for i in t + 1..s {
                let q = a[i][t] / a[t][t];
                row_sub_multiple(&mut a, i, t, q)?;
                row_sub_multiple(&mut u, i, t, q)?;
                clean &= a[i][t] == 0;
            }
            for j in t + 1..f {
                let q = a[t][j] / a[t][t];
                col_sub(&mut a, &mut v, &mut w, j, t, q)?;
                clean &= a[t][j] == 0;
            }
            if !clean {
                continue;
            }
            let p = a[t][t];
            let bad = (t + 1..s).find(|&i| (t + 1..f).any(|j| a[i][j] % p != 0));
            match bad {
                Some(i) => {
                    // Pull the offending row up; the next pass lowers the pivot.
                    row_sub_multiple(&mut a, t, i, -1)?;
                    row_sub_multiple(&mut u, t, i, -1)?;
                }
                None => break,
            }
        }
        if a[t][t] < 0 {
            negate_row(&mut a[t])?;
            negate_row(&mut u[t])?;
        }
    }
    let diag = (0..s).map(|i| a[i][i]).collect();
    Ok(Smith { u, v, w, diag })
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hnf_is_canonical() {
        let a = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        // Same lattice through a unimodular change of rows.
        let b = vec![a[2].clone(), a[0].clone(), a[0].iter().zip(&a[1]).map(|(x, y)| x + y).collect()];
        let ha = hnf(a.clone()).unwrap();
        assert_eq!(ha, hnf(b).unwrap());
        assert_eq!(ha, hnf(ha.clone()).unwrap());
        for (i, row) in ha.iter().enumerate() {
            let p = row.iter().position(|&x| x != 0).unwrap();
            assert!(row[p] > 0);
            for prev in &ha[..i] {
                assert!((0..row[p]).contains(&prev[p]));
            }
        }
        for row in &a {
            assert!(hnf_contains(&ha, row));
        }
        assert!(!hnf_contains(&ha, &[1, 0, 0]));
    }

    #[test]
    fn left_kernel_of_simple_systems() {
        // Rows: coefficient vectors of x, x^2, x + x^2.
        let a = vec![vec![1, 0], vec![0, 1], vec![1, 1]];
        let k = hnf(integer_left_kernel(&a, 3, 2).unwrap()).unwrap();
        assert_eq!(k, vec![vec![1, 1, -1]]);
        let a = vec![vec![2], vec![1]];
        let k = hnf(integer_left_kernel(&a, 2, 1).unwrap()).unwrap();
        assert_eq!(k, vec![vec![1, -2]]);
    }

    #[test]
    fn smith_factorization_holds() {
        let b = vec![vec![2, 4, 4], vec![-6, 6, 12]];
        let s = smith(&b, 3).unwrap();
        let d = mat_mul(&mat_mul(&s.u, &b), &s.v);
        for (i, row) in d.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert_eq!(x, if i == j { s.diag[i] } else { 0 });
            }
        }
        assert_eq!(mat_mul(&s.v, &s.w), identity(3));
        assert_eq!(s.diag[1] % s.diag[0], 0);
        assert_eq!(s.diag, vec![2, 6]);
    }

    #[test]
    fn smith_of_torsion_row() {
        let s = smith(&vec![vec![2, 0]], 2).unwrap();
        assert_eq!(s.diag, vec![2]);
        let s = smith(&vec![vec![1, 1, -1]], 3).unwrap();
        assert_eq!(s.diag, vec![1]);
    }
}
