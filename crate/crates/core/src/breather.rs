//! The breather family `w_j(t) = e^{itφ} p*_j(φ)`.
//!
//! Amplitudes are found numerically by Newton iteration on
//! `F_j(p) = -ε(Δp)_j - (1+φ)p_j + p_j³ = 0` seeded at the single-site
//! excitation, and at `φ = 0` also as exact rational power series in `ε`.

use crate::error::{Error, Result};
use crate::lattice::{coordination, laplacian, SystemParams};
use nalgebra::{DMatrix, DVector};
use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use std::fmt::Write as _;

/// Max-norm residual accepted by [`solve_breather`].
pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_MAX_ITERATIONS: usize = 50;
/// Solver preconditions `ε < 0.2`, `|φ| < 0.2`.
pub const EPSILON_BASIN: f64 = 0.2;
pub const PHI_BASIN: f64 = 0.2;

/// Amplitudes of one member of the breather family.
#[derive(Debug, Clone, PartialEq)]
pub struct BreatherProfile {
    pub phi: f64,
    pub epsilon: f64,
    pub amplitudes: Vec<f64>,
    /// Max-norm of the fixed-point residual at `amplitudes`.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl BreatherProfile {
    pub fn n_sites(&self) -> usize {
        self.amplitudes.len()
    }

    /// Smallest `K` with `|p*_j| <= K ε^{j-1}` for every site.
    pub fn decay_constant(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, p)| p.abs() / self.epsilon.powi(j as i32))
            .fold(0.0, f64::max)
    }
}

/// `F(p; ε, φ)` componentwise.
pub fn residual(p: &[f64], epsilon: f64, phi: f64) -> Vec<f64> {
    laplacian(p)
        .iter()
        .zip(p)
        .map(|(lap, &pj)| -epsilon * lap - (1.0 + phi) * pj + pj * pj * pj)
        .collect()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Jacobian `D_p F = -εΔ - (1+φ) + 3 diag(p²)`.
pub(crate) fn jacobian(p: &[f64], epsilon: f64, phi: f64) -> DMatrix<f64> {
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            epsilon * coordination(i, n) - (1.0 + phi) + 3.0 * p[i] * p[i]
        } else if i.abs_diff(j) == 1 {
            -epsilon
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Reject `ε`, `φ` outside the validated basin.
    pub enforce_basin: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Starting point; the single-site excitation `δ_{j,1}` when `None`.
    pub seed: Option<Vec<f64>>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            enforce_basin: true,
            max_iterations: NEWTON_MAX_ITERATIONS,
            tolerance: NEWTON_TOLERANCE,
            seed: None,
        }
    }
}

/// Solves for the breather amplitudes with default options.
pub fn solve_breather(params: &SystemParams, phi: f64) -> Result<BreatherProfile> {
    solve_breather_with(params, phi, &NewtonOptions::default())
}

pub fn solve_breather_with(
    params: &SystemParams,
    phi: f64,
    options: &NewtonOptions,
) -> Result<BreatherProfile> {
    let n = params.n_sites;
    let eps = params.epsilon;
    if !phi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "phi must be finite, got {phi}"
        )));
    }
    if options.enforce_basin && (eps >= EPSILON_BASIN || phi.abs() >= PHI_BASIN) {
        return Err(Error::InvalidParameter(format!(
            "(epsilon, phi) = ({eps}, {phi}) outside the solver basin \
             epsilon < {EPSILON_BASIN}, |phi| < {PHI_BASIN}"
        )));
    }
    let mut p = match &options.seed {
        Some(seed) if seed.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: seed.len(),
            })
        }
        Some(seed) => seed.clone(),
        None => unit_excitation(n),
    };

    let mut f = residual(&p, eps, phi);
    let mut norm = max_norm(&f);
    let mut iterations = 0;
    while norm >= options.tolerance {
        if iterations == options.max_iterations || !norm.is_finite() {
            return Err(Error::Diverged {
                iterations,
                residual: norm,
                last_iterate: p,
            });
        }
        let step = jacobian(&p, eps, phi)
            .lu()
            .solve(&DVector::from_column_slice(&f))
            .ok_or_else(|| {
                Error::Singular(format!("fixed-point Jacobian at iteration {iterations}"))
            })?;
        for (pj, dj) in p.iter_mut().zip(step.iter()) {
            *pj -= dj;
        }
        f = residual(&p, eps, phi);
        norm = max_norm(&f);
        iterations += 1;
    }
    // one polishing step brings the residual to rounding level
    if norm > 0.0 {
        if let Some(step) = jacobian(&p, eps, phi)
            .lu()
            .solve(&DVector::from_column_slice(&f))
        {
            let polished: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
            let polished_res = residual(&polished, eps, phi);
            if max_norm(&polished_res) <= norm {
                p = polished;
                norm = max_norm(&polished_res);
            }
        }
    }
    if !(0.5..1.5).contains(&p[0]) {
        return Err(Error::Numerical(format!(
            "Newton reached a root off the single-site branch (p_1 = {})",
            p[0]
        )));
    }
    Ok(BreatherProfile {
        phi,
        epsilon: eps,
        amplitudes: p,
        residual_norm: norm,
        iterations,
    })
}

fn unit_excitation(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    p
}

/// Leading coefficient `(-1)^{j-1} (1+φ)^{-(j-1)}` of `p*_j` in powers of `ε`.
/// Sites are numbered from 1.
pub fn leading_coefficient(site: usize, phi: f64) -> Result<f64> {
    if site == 0 {
        return Err(Error::InvalidParameter("sites are numbered from 1".into()));
    }
    if phi == -1.0 {
        return Err(Error::Pole);
    }
    let k = (site - 1) as i32;
    Ok((-1.0 / (1.0 + phi)).powi(k))
}

/// Exact rational coefficients of `p*_j(ε, φ=0) = Σ_k c_{j,k} ε^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub order: usize,
    /// `coefficients[j][k]` for site `j + 1` and power `k`.
    pub coefficients: Vec<Vec<BigRational>>,
}

impl SeriesTable {
    pub fn n_sites(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficient(&self, site: usize, power: usize) -> &BigRational {
        &self.coefficients[site - 1][power]
    }

    /// `site,power,numerator,denominator` rows, sites from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("site,power,numerator,denominator\n");
        for (j, row) in self.coefficients.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", j + 1, k, c.numer(), c.denom());
            }
        }
        out
    }
}

/// Order-by-order expansion of the fixed-point equation at `φ = 0`.
///
/// At order `k` the unknown `c_{·,k}` enters only through the diagonal
/// Jacobian `3 c_{j,0}² - 1` at the unperturbed point, so each order is an
/// explicit update from lower orders.
pub fn breather_series(n_sites: usize, order: usize) -> SeriesTable {
    let n = n_sites;
    let zero = BigRational::zero();
    let mut c = vec![vec![zero.clone(); order + 1]; n];
    if n > 0 {
        c[0][0] = BigRational::one();
    }
    let three = BigRational::from_integer(BigInt::from(3));
    for k in 1..=order {
        for j in 0..n {
            // (Δ c_{k-1})_j with free ends
            let mut rhs = zero.clone();
            if j > 0 {
                rhs += &c[j - 1][k - 1] - &c[j][k - 1];
            }
            if j + 1 < n {
                rhs += &c[j + 1][k - 1] - &c[j][k - 1];
            }
            // cubic terms not involving c_{j,k}
            let row = &c[j];
            for a in 0..=k {
                for b in 0..=(k - a) {
                    let d = k - a - b;
                    if a == k || b == k || d == k {
                        continue;
                    }
                    if row[a].is_zero() || row[b].is_zero() || row[d].is_zero() {
                        continue;
                    }
                    rhs -= &row[a] * &row[b] * &row[d];
                }
            }
            let diag = &three * &row[0] * &row[0] - BigRational::one();
            c[j][k] = rhs / diag;
        }
    }
    SeriesTable {
        order,
        coefficients: c,
    }
}

/// Horner evaluation in exact arithmetic, rounded to `f64` once per site.
pub fn evaluate_series(table: &SeriesTable, epsilon: f64) -> Result<Vec<f64>> {
    let x = BigRational::from_float(epsilon)
        .ok_or_else(|| Error::InvalidParameter(format!("epsilon must be finite, got {epsilon}")))?;
    Ok(table
        .coefficients
        .iter()
        .map(|row| {
            let value = row
                .iter()
                .rev()
                .fold(BigRational::zero(), |acc, c| acc * &x + c);
            value.to_f64().unwrap_or(f64::NAN)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn residual_hand_values() {
        assert_eq!(residual(&[1.0, 0.0, 0.0], 0.0, 0.0), vec![0.0; 3]);
        assert_eq!(residual(&[0.0; 4], 0.3, 0.1), vec![0.0; 4]);
        let f = residual(&[1.0, 0.0], 0.1, 0.0);
        assert_abs_diff_eq!(f[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], -0.1, epsilon = 1e-15);
    }

    #[test]
    fn uncoupled_solution_is_exact() {
        for n in 2..6 {
            let params = SystemParams::new(n, 0.0, 0.0).unwrap();
            let b = solve_breather(&params, 0.0).unwrap();
            assert_eq!(b.amplitudes, unit_excitation(n));
            assert_eq!(b.iterations, 0);
        }
    }

    #[test]
    fn matches_series_at_small_coupling() {
        let params = SystemParams::new(3, 0.01, 0.0).unwrap();
        let b = solve_breather(&params, 0.0).unwrap();
        let s = evaluate_series(&breather_series(3, 10), 0.01).unwrap();
        for (a, e) in b.amplitudes.iter().zip(&s) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-14);
        }
        // the order-3 truncation error is dominated by c_{2,4} = -231/16
        let s3 = evaluate_series(&breather_series(3, 3), 0.01).unwrap();
        let gap = (b.amplitudes[1] - s3[1]) / 1e-8;
        assert!((gap + 231.0 / 16.0).abs() < 1.0, "{gap}");
    }

    #[test]
    fn detuned_solution_has_leading_slope() {
        let params = SystemParams::new(3, 0.01, 0.0).unwrap();
        let b = solve_breather(&params, 0.05).unwrap();
        assert!(max_norm(&residual(&b.amplitudes, 0.01, 0.05)) < 1e-12);
        let lead = leading_coefficient(2, 0.05).unwrap();
        assert_abs_diff_eq!(lead, -0.952_380_952_380_952_4, epsilon = 1e-15);
        assert!((b.amplitudes[1] / 0.01 - lead).abs() < 0.05);
    }

    #[test]
    fn basin_is_enforced_unless_overridden() {
        let params = SystemParams::new(3, 0.25, 0.0).unwrap();
        assert!(matches!(
            solve_breather(&params, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        let params = SystemParams::new(3, 0.1, 0.0).unwrap();
        assert!(solve_breather(&params, 0.3).is_err());
        let loose = NewtonOptions {
            enforce_basin: false,
            ..NewtonOptions::default()
        };
        let b = solve_breather_with(&SystemParams::new(2, 0.2, 0.0).unwrap(), 0.0, &loose).unwrap();
        assert!(b.residual_norm < NEWTON_TOLERANCE);
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let params = SystemParams::new(3, 0.1, 0.0).unwrap();
        let opts = NewtonOptions {
            max_iterations: 1,
            ..NewtonOptions::default()
        };
        match solve_breather_with(&params, 0.0, &opts) {
            Err(Error::Diverged {
                iterations,
                last_iterate,
                ..
            }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last_iterate.len(), 3);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn singular_seed_is_reported() {
        // At p = 0 with ε = 0, φ = -1 the Jacobian vanishes identically.
        let params = SystemParams::new(2, 0.0, 0.0).unwrap();
        let opts = NewtonOptions {
            enforce_basin: false,
            seed: Some(vec![0.1, 0.0]),
            ..NewtonOptions::default()
        };
        let err = solve_breather_with(&params, -1.0, &opts);
        assert!(matches!(
            err,
            Err(Error::Singular(_)) | Err(Error::Diverged { .. })
        ));
        let opts = NewtonOptions {
            enforce_basin: false,
            seed: Some(vec![0.0, 0.0]),
            ..NewtonOptions::default()
        };
        // zero is already a root
        assert!(matches!(
            solve_breather_with(&params, -1.0, &opts),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn leading_coefficients() {
        assert_eq!(leading_coefficient(1, 0.13).unwrap(), 1.0);
        assert_eq!(leading_coefficient(2, 0.0).unwrap(), -1.0);
        assert_eq!(leading_coefficient(3, 0.0).unwrap(), 1.0);
        assert_eq!(leading_coefficient(2, -1.0), Err(Error::Pole));
        assert!(leading_coefficient(0, 0.0).is_err());
    }

    #[test]
    fn series_table_n3() {
        let t = breather_series(3, 3);
        let expected = [
            [rat(1, 1), rat(-1, 2), rat(-5, 8), rat(-21, 16)],
            [rat(0, 1), rat(-1, 1), rat(-3, 2), rat(-35, 8)],
            [rat(0, 1), rat(0, 1), rat(1, 1), rat(5, 2)],
        ];
        for (j, row) in expected.iter().enumerate() {
            assert_eq!(&t.coefficients[j], &row.to_vec());
        }
    }

    #[test]
    fn series_decay_and_sign_structure() {
        let t = breather_series(7, 9);
        assert_eq!(t.coefficient(1, 0), &BigRational::one());
        for site in 1..=7 {
            for k in 0..(site - 1).min(t.order + 1) {
                assert!(t.coefficient(site, k).is_zero(), "c[{site}][{k}]");
            }
            if site - 1 <= t.order {
                let expected = if (site - 1) % 2 == 0 { 1 } else { -1 };
                assert_eq!(t.coefficient(site, site - 1), &rat(expected, 1));
            }
        }
    }

    #[test]
    fn series_evaluation() {
        let t = breather_series(3, 3);
        assert_eq!(evaluate_series(&t, 0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        let v = evaluate_series(&t, 0.01).unwrap();
        assert_abs_diff_eq!(v[0], 0.994_936_187_5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.000_102_5, epsilon = 1e-16);
        assert!(evaluate_series(&t, f64::NAN).is_err());
    }

    #[test]
    fn csv_export() {
        let csv = breather_series(2, 1).to_csv();
        assert_eq!(
            csv,
            "site,power,numerator,denominator\n1,0,1,1\n1,1,-1,2\n2,0,0,1\n2,1,-1,1\n"
        );
    }

    #[test]
    fn decay_constant_is_order_one() {
        for &eps in &[0.001, 0.01, 0.05, 0.1] {
            let b = solve_breather(&SystemParams::new(5, eps, 0.0).unwrap(), 0.0).unwrap();
            let k = b.decay_constant();
            assert!((1.0..3.0).contains(&k), "eps={eps} K={k}");
        }
    }
}
