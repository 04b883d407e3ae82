//! Dense nonsymmetric eigenvalues for small real matrices.
//!
//! Householder reduction to upper Hessenberg form followed by the Francis
//! implicitly double-shifted QR iteration.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num::complex::Complex64;

/// Total QR sweep budget per matrix.
pub const MAX_QR_SWEEPS: usize = 500;

/// All eigenvalues of a real square matrix, repeated by algebraic multiplicity.
pub fn eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: matrix.ncols(),
        });
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix has non-finite entries".into(),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| matrix[(i, j)]).collect())
        .collect();
    reduce_to_hessenberg(&mut a);
    hessenberg_qr(a)
}

/// In-place orthogonal similarity to upper Hessenberg form.
pub(crate) fn reduce_to_hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let f = (m..=high).rev().map(|i| ort[i] * h[i][j]).sum::<f64>() / hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let f = (m..=high).rev().map(|j| ort[j] * row[j]).sum::<f64>() / hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
        for i in (m + 1)..=high {
            h[i][m - 1] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by shifted QR.
fn hessenberg_qr(mut a: Vec<Vec<f64>>) -> Result<Vec<Complex64>> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let mut sweeps = 0usize;
    let mut shift_total = 0.0;
    let mut nn = n as isize - 1;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // locate a negligible subdiagonal element
            let mut l = nu;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + shift_total;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l + 1 == nu {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += shift_total;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }

            if sweeps == MAX_QR_SWEEPS {
                return Err(Error::EigenNoConvergence(sweeps));
            }
            if its == 10 || its == 20 {
                // exceptional shift
                shift_total += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;

            // two consecutive small subdiagonal elements
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }

            // double-shift QR step on rows l..=nu, columns m..=nu
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k + 1 != nu {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = nu.min(k + 3);
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k + 1 != nu {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
            if l + 1 >= nu {
                break;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    fn close_multiset(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        let mut used = vec![false; b.len()];
        a.len() == b.len()
            && a.iter().all(|x| {
                let hit = b
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !used[*i])
                    .min_by(|(_, p), (_, q)| (*p - x).norm().total_cmp(&(*q - x).norm()));
                match hit {
                    Some((i, y)) if (y - x).norm() < tol => {
                        used[i] = true;
                        true
                    }
                    _ => false,
                }
            })
    }

    #[test]
    fn identity() {
        let ev = eigenvalues(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(ev, vec![Complex64::new(1.0, 0.0); 2]);
    }

    #[test]
    fn uncoupled_linearization() {
        // blocks diag(0,1,1) and diag(2,-1,-1)
        let mut m = DMatrix::zeros(6, 6);
        m[(1, 4)] = 1.0;
        m[(2, 5)] = 1.0;
        m[(3, 0)] = 2.0;
        m[(4, 1)] = -1.0;
        m[(5, 2)] = -1.0;
        let ev = eigenvalues(&m).unwrap();
        let i = Complex64::i();
        let expected = [0.0 * i, 0.0 * i, i, -i, i, -i];
        assert!(close_multiset(&ev, &expected, 1e-12), "{ev:?}");
    }

    #[test]
    fn companion_matrix_roots() {
        // (x-1)(x-2)(x-3)(x^2+1)
        let coeffs = [-6.0, 11.0, -12.0, 12.0, -6.0]; // x^5 - 6x^4 + 12x^3 - 12x^2 + 11x - 6
        let n = 5;
        let mut m = DMatrix::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -coeffs[i];
        }
        let ev = eigenvalues(&m).unwrap();
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
        ];
        assert!(close_multiset(&ev, &expected, 1e-10), "{:?}", sorted(ev));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(eigenvalues(&DMatrix::zeros(2, 3)).is_err());
        let mut m = DMatrix::<f64>::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(eigenvalues(&m).is_err());
        assert_eq!(eigenvalues(&DMatrix::zeros(3, 3)).unwrap().len(), 3);
    }

    proptest! {
        #[test]
        fn agrees_with_schur_oracle(
            n in 1usize..12,
            seed in prop::collection::vec(-2.0f64..2.0, 144),
        ) {
            let m = DMatrix::from_fn(n, n, |i, j| seed[i * 12 + j]);
            let ours = eigenvalues(&m).unwrap();
            let oracle: Vec<Complex64> = m.clone().complex_eigenvalues().iter().cloned().collect();
            prop_assert!(close_multiset(&ours, &oracle, 1e-7), "{:?} vs {:?}", ours, oracle);
            let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
            let sum: Complex64 = ours.iter().sum();
            prop_assert!((sum.re - trace).abs() < 1e-9 && sum.im.abs() < 1e-9);
            // closed under conjugation
            let conj: Vec<Complex64> = ours.iter().map(|z| z.conj()).collect();
            prop_assert!(close_multiset(&ours, &conj, 1e-9));
        }
    }
}
