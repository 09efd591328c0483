//! Gaussian elimination over a [`Scalar`] field.
//!
//! Used with [`Rational`](crate::Rational) for exact rank and nullspace
//! certificates. Pivoting picks the largest-magnitude entry, so the same code
//! is usable (with a positive `tol`) on floats.

use crate::scalar::Scalar;

/// Reduces `mat` in place to reduced row echelon form and returns the pivot
/// column of each nonzero row. Entries with magnitude `<= tol` count as zero.
pub fn rref<T: Scalar>(mat: &mut [Vec<T>], tol: f64) -> Vec<usize> {
    let nrows = mat.len();
    if nrows == 0 {
        return Vec::new();
    }
    let ncols = mat[0].len();
    let tol = T::from_f64(tol).unwrap_or_else(|_| T::zero());
    let mut pivots = Vec::new();
    let mut row = 0;

    for col in 0..ncols {
        if row == nrows {
            break;
        }
        let best = (row..nrows)
            .map(|r| (r, mat[r][col].abs()))
            .filter(|(_, a)| *a > tol)
            .fold(None::<(usize, T)>, |acc, (r, a)| match acc {
                Some((_, ref b)) if *b >= a => acc,
                _ => Some((r, a)),
            });
        let Some((pivot_row, _)) = best else {
            continue;
        };
        mat.swap(row, pivot_row);

        let inv = T::one() / mat[row][col].clone();
        for v in mat[row].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        let (before, rest) = mat.split_at_mut(row);
        let (pivot, after) = rest.split_first_mut().unwrap();
        for other in before.iter_mut().chain(after.iter_mut()) {
            let factor = other[col].clone();
            if factor.is_zero() {
                continue;
            }
            for (o, p) in other.iter_mut().zip(pivot.iter()) {
                *o = o.clone() - factor.clone() * p.clone();
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Exact rank (tolerance zero).
pub fn rank<T: Scalar>(rows: &[Vec<T>]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m, 0.0).len()
}

/// Basis of the right nullspace `{x : A x = 0}`, one vector per free column.
pub fn nullspace<T: Scalar>(rows: &[Vec<T>]) -> Vec<Vec<T>> {
    let Some(ncols) = rows.first().map(Vec::len) else {
        return Vec::new();
    };
    let mut m = rows.to_vec();
    let pivots = rref(&mut m, 0.0);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![T::zero(); ncols];
            x[f] = T::one();
            for (r, &p) in pivots.iter().enumerate() {
                x[p] = -m[r][f].clone();
            }
            x
        })
        .collect()
}

/// Matrix-vector product.
pub fn mat_vec<T: Scalar>(rows: &[Vec<T>], x: &[T]) -> Vec<T> {
    rows.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
        })
        .collect()
}

/// Copy of `rows` with column `col` removed.
pub fn drop_column<T: Scalar>(rows: &[Vec<T>], col: usize) -> Vec<Vec<T>> {
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use num_traits::Zero;

    fn q(n: i64) -> Rational {
        Rational::from_ratio(n, 1)
    }

    #[test]
    fn rank_of_dependent_rows() {
        let m = vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(6)], vec![q(0), q(1), q(1)]];
        assert_eq!(rank(&m), 2);
    }

    #[test]
    fn nullspace_annihilates() {
        let m = vec![vec![q(1), q(1), q(1), q(1)], vec![q(0), q(1), q(2), q(3)]];
        let basis = nullspace(&m);
        assert_eq!(basis.len(), 2);
        for x in &basis {
            assert!(mat_vec(&m, x).iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn float_elimination_with_tolerance() {
        let mut m = vec![vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]];
        assert_eq!(rref(&mut m, 1e-10).len(), 1);
    }

    #[test]
    fn empty_input() {
        let m: Vec<Vec<Rational>> = Vec::new();
        assert_eq!(rank(&m), 0);
        assert!(nullspace(&m).is_empty());
    }
}
