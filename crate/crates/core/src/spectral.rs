//! Linearization about a breather, its spectrum with and without damping,
//! and the zero-eigenspace Jordan chain with its biorthogonal adjoint frame.
//!
//! The linearization is taken in the frame co-rotating with the breather
//! frequency `φ`, so `M = [[0, A], [B, 0]]` with
//! `A = εΔ + (1+φ) - diag(p*²)` and `B = -εΔ - (1+φ) + 3 diag(p*²)`.

use crate::breather::{residual, BreatherProfile};
use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::lattice::{coordination, rotate_flat, SystemParams};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num::complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Eigenvalues below this modulus belong to the zero cluster.
pub const ZERO_EIGENVALUE_THRESHOLD: f64 = 1e-8;
/// Smallest singular value of `B` accepted by [`zero_chain`].
pub const MIN_SINGULAR_VALUE: f64 = 1e-8;
/// Tolerance on `‖M v1‖` and `‖M v2 - v1‖`.
pub const CHAIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub params: SystemParams,
    pub phi: f64,
    pub amplitudes: Vec<f64>,
    pub a_block: DMatrix<f64>,
    pub b_block: DMatrix<f64>,
}

impl Linearization {
    pub fn n_sites(&self) -> usize {
        self.amplitudes.len()
    }

    /// The assembled `2N × 2N` matrix `[[0, A], [B, 0]]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, n), (n, n)).copy_from(&self.a_block);
        m.view_mut((n, 0), (n, n)).copy_from(&self.b_block);
        m
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.matrix();
        (m * DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

pub fn build_linearization(
    profile: &BreatherProfile,
    params: &SystemParams,
) -> Result<Linearization> {
    let n = params.n_sites;
    if profile.n_sites() != n {
        return Err(Error::Provenance(format!(
            "profile has {} sites, parameters {}",
            profile.n_sites(),
            n
        )));
    }
    if profile.epsilon != params.epsilon {
        return Err(Error::Provenance(format!(
            "profile solved at epsilon = {}, parameters give {}",
            profile.epsilon, params.epsilon
        )));
    }
    let res = residual(&profile.amplitudes, params.epsilon, profile.phi)
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    if res > 1e-9 {
        return Err(Error::Provenance(format!(
            "amplitudes are not a fixed point (residual {res:e})"
        )));
    }
    let eps = params.epsilon;
    let phi = profile.phi;
    let p = &profile.amplitudes;
    let offdiag = |i: usize, j: usize| i.abs_diff(j) == 1;
    // On the fixed point, 1 + φ - εd_j - p_j² = -ε(p_{j-1} + p_{j+1}) / p_j.
    // The right-hand form makes A p* vanish to rounding of the coupling
    // terms, which keeps the double zero eigenvalue from splitting.
    let neighbours = |j: usize| {
        let mut s = 0.0;
        if j > 0 {
            s += p[j - 1];
        }
        if j + 1 < n {
            s += p[j + 1];
        }
        s
    };
    let a_block = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            if eps > 0.0 && p[i] != 0.0 {
                -eps * neighbours(i) / p[i]
            } else {
                1.0 + phi - eps * coordination(i, n) - p[i] * p[i]
            }
        } else if offdiag(i, j) {
            eps
        } else {
            0.0
        }
    });
    let b_block = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -1.0 - phi + eps * coordination(i, n) + 3.0 * p[i] * p[i]
        } else if offdiag(i, j) {
            -eps
        } else {
            0.0
        }
    });
    Ok(Linearization {
        params: *params,
        phi,
        amplitudes: p.clone(),
        a_block,
        b_block,
    })
}

/// `M - γε C̃`, where `C̃` selects the last site in both blocks.
pub fn damped_linearization(lin: &Linearization, params: &SystemParams) -> Result<DMatrix<f64>> {
    let n = lin.n_sites();
    if params.n_sites != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: params.n_sites,
        });
    }
    let mut m = lin.matrix();
    let d = params.damping_rate();
    m[(n - 1, n - 1)] -= d;
    m[(2 * n - 1, 2 * n - 1)] -= d;
    Ok(m)
}

/// Generalized kernel `M v1 = 0`, `M v2 = v1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroChain {
    /// `(0, p*)`, the phase-rotation mode.
    pub v1: Vec<f64>,
    /// `(B⁻¹p*, 0)`, the frequency mode.
    pub v2: Vec<f64>,
}

impl ZeroChain {
    /// Chain of the breather rotated by `theta`.
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            v1: rotate_flat(&self.v1, theta),
            v2: rotate_flat(&self.v2, theta),
        }
    }
}

fn solve_b(lin: &Linearization) -> Result<Vec<f64>> {
    let smallest = lin
        .b_block
        .clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |m, &s| m.min(s));
    if smallest <= MIN_SINGULAR_VALUE {
        return Err(Error::Singular(format!(
            "B block has smallest singular value {smallest:e}"
        )));
    }
    lin.b_block
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(&lin.amplitudes))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singular("B block".into()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn zero_chain(lin: &Linearization) -> Result<ZeroChain> {
    let n = lin.n_sites();
    let x = solve_b(lin)?;
    let mut v1 = vec![0.0; 2 * n];
    v1[n..].copy_from_slice(&lin.amplitudes);
    let mut v2 = vec![0.0; 2 * n];
    v2[..n].copy_from_slice(&x);

    let kernel = norm(&lin.apply(&v1));
    if kernel >= CHAIN_TOLERANCE {
        return Err(Error::Numerical(format!("|M v1| = {kernel:e}")));
    }
    let chain: Vec<f64> = lin.apply(&v2).iter().zip(&v1).map(|(a, b)| a - b).collect();
    let chain = norm(&chain);
    if chain >= CHAIN_TOLERANCE {
        return Err(Error::Numerical(format!("|M v2 - v1| = {chain:e}")));
    }
    Ok(ZeroChain { v1, v2 })
}

/// Adjoint null vectors normalized against `(∂_θX*, ∂_φX*) = (v1, v2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointFrame {
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    pub nu1: f64,
    pub nu2: f64,
}

impl AdjointFrame {
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            n1: rotate_flat(&self.n1, theta),
            n2: rotate_flat(&self.n2, theta),
            ..*self
        }
    }

    /// `⟨n_i, v_j⟩`; the identity for a consistent frame.
    pub fn pairing(&self, chain: &ZeroChain) -> [[f64; 2]; 2] {
        [
            [dot(&self.n1, &chain.v1), dot(&self.n1, &chain.v2)],
            [dot(&self.n2, &chain.v1), dot(&self.n2, &chain.v2)],
        ]
    }

    /// Projections `(⟨n1, w⟩, ⟨n2, w⟩)`.
    pub fn project(&self, w: &[f64]) -> (f64, f64) {
        (dot(&self.n1, w), dot(&self.n2, w))
    }
}

pub fn adjoint_frame(lin: &Linearization) -> Result<AdjointFrame> {
    let n = lin.n_sites();
    let x = solve_b(lin)?;
    let p = &lin.amplitudes;
    // ñ1 = (0, x) pairs with v1 = (0, p); ñ2 = (p, 0) pairs with v2 = (x, 0)
    let pairing = dot(&x, p);
    if pairing.abs() < 1e-14 {
        return Err(Error::DegenerateFrame(pairing));
    }
    let nu = pairing.recip();
    let mut n1 = vec![0.0; 2 * n];
    let mut n2 = vec![0.0; 2 * n];
    for j in 0..n {
        n1[n + j] = nu * x[j];
        n2[j] = nu * p[j];
    }
    Ok(AdjointFrame {
        n1,
        n2,
        nu1: nu,
        nu2: nu,
    })
}

/// Eigenvalues of the block product `AB`; the squared nonzero spectrum of `M`.
pub fn block_product_eigenvalues(lin: &Linearization) -> Result<Vec<Complex64>> {
    eigenvalues(&(&lin.a_block * &lin.b_block))
}

fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let root = Complex64::new(half_trace * half_trace - det, 0.0).sqrt();
    [half_trace + root, half_trace - root]
}

/// Spectrum of the undamped linearization with the zero Jordan block split
/// off before the QR iteration.
///
/// A defective double zero is only resolved to about the square root of
/// machine precision by QR on the full matrix. Here the generalized kernel
/// `span(v1, v2)` and its complement `ker [n1 n2]ᵀ` are both invariant, so
/// the spectrum is that of the 2×2 restriction `[n_i · M v_j]` together with
/// the compression of `M` onto an orthonormal basis of the complement.
pub fn undamped_spectrum(lin: &Linearization) -> Result<Vec<Complex64>> {
    let chain = zero_chain(lin)?;
    let frame = adjoint_frame(lin)?;
    let m = lin.matrix();
    let mv1 = lin.apply(&chain.v1);
    let mv2 = lin.apply(&chain.v2);
    let restriction = [
        [dot(&frame.n1, &mv1), dot(&frame.n1, &mv2)],
        [dot(&frame.n2, &mv1), dot(&frame.n2, &mv2)],
    ];
    let mut spectrum = eigenvalues_2x2(restriction).to_vec();

    let dim = m.nrows();
    let frame_cols = DMatrix::from_columns(&[
        DVector::from_column_slice(&frame.n1),
        DVector::from_column_slice(&frame.n2),
    ]);
    let gram = frame_cols.transpose() * &frame_cols;
    let gram_inv = gram.try_inverse().ok_or(Error::DegenerateFrame(0.0))?;
    let projector =
        DMatrix::<f64>::identity(dim, dim) - &frame_cols * gram_inv * frame_cols.transpose();
    let eig = SymmetricEigen::new(projector);
    let basis: Vec<DVector<f64>> = (0..dim)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if basis.len() != dim - 2 {
        return Err(Error::Numerical(format!(
            "complement basis has dimension {}, expected {}",
            basis.len(),
            dim - 2
        )));
    }
    let z = DMatrix::from_columns(&basis);
    let compressed = z.transpose() * m * &z;
    spectrum.extend(eigenvalues(&compressed)?);
    Ok(spectrum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub gamma: f64,
    pub damped: bool,
    pub eigenvalues: Vec<Complex64>,
    pub zero_chain: ZeroChain,
    pub adjoint_frame: AdjointFrame,
}

impl SpectralReport {
    /// `gamma,index,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,index,re,im\n");
        for (i, z) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{},{},{:.17e},{:.17e}", self.gamma, i, z.re, z.im);
        }
        out
    }

    /// Eigenvalues inside the zero cluster.
    pub fn near_zero(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .copied()
            .filter(|z| z.norm() < ZERO_EIGENVALUE_THRESHOLD)
            .collect()
    }
}

/// Spectrum of the damped linearization about `profile`, with the
/// undamped zero chain and adjoint frame.
pub fn spectral_report(profile: &BreatherProfile, params: &SystemParams) -> Result<SpectralReport> {
    let lin = build_linearization(profile, params)?;
    let mut ev = if params.gamma > 0.0 {
        eigenvalues(&damped_linearization(&lin, params)?)?
    } else {
        undamped_spectrum(&lin)?
    };
    sort_spectrum(&mut ev);
    Ok(SpectralReport {
        gamma: params.gamma,
        damped: params.gamma > 0.0,
        eigenvalues: ev,
        zero_chain: zero_chain(&lin)?,
        adjoint_frame: adjoint_frame(&lin)?,
    })
}

fn sort_spectrum(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| {
        a.norm()
            .total_cmp(&b.norm())
            .then(a.im.total_cmp(&b.im))
            .then(a.re.total_cmp(&b.re))
    });
}

/// Least-squares line through `(x, y)`: `(slope, intercept, max residual / max |y|)`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).abs())
        .fold(0.0f64, f64::max);
    let rel = if scale > 0.0 { worst / scale } else { 0.0 };
    (slope, intercept, rel)
}

/// One eigenvalue followed across the damping grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTrack {
    pub baseline: Complex64,
    pub values: Vec<Complex64>,
    pub slope: f64,
    pub intercept: f64,
    pub relative_residual: f64,
}

/// The two eigenvalues emanating from the undamped double zero.
///
/// Their mean real part is far below the accuracy of the individual
/// eigenvalues, so it is recovered from the trace: the damped matrix has
/// trace `-2γε`, and the remaining eigenvalues are well conditioned.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPairTrack {
    pub members: Vec<[Complex64; 2]>,
    pub mean_real: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub params: SystemParams,
    pub gammas: Vec<f64>,
    pub tracks: Vec<EigenTrack>,
    pub zero_pair: ZeroPairTrack,
}

impl SlopeReport {
    /// Slopes of `Re λ` per eigenvalue pair: the zero pair first, then the
    /// conjugate pairs in order of increasing slope magnitude.
    pub fn pair_slopes(&self) -> Vec<f64> {
        let mut pairs: Vec<f64> = Vec::new();
        let mut used = vec![false; self.tracks.len()];
        for i in 0..self.tracks.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let partner = (0..self.tracks.len())
                .filter(|&j| !used[j])
                .min_by(|&a, &b| {
                    let da = (self.tracks[a].baseline - self.tracks[i].baseline.conj()).norm();
                    let db = (self.tracks[b].baseline - self.tracks[i].baseline.conj()).norm();
                    da.total_cmp(&db)
                });
            match partner {
                Some(j) => {
                    used[j] = true;
                    pairs.push(0.5 * (self.tracks[i].slope + self.tracks[j].slope));
                }
                None => pairs.push(self.tracks[i].slope),
            }
        }
        pairs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let mut out = vec![self.zero_pair.slope];
        out.extend(pairs);
        out
    }

    /// `gamma,index,re,im` rows; indices `0, 1` are the zero pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,index,re,im\n");
        for (g, &gamma) in self.gammas.iter().enumerate() {
            let mut row = self.zero_pair.members[g].to_vec();
            row.extend(self.tracks.iter().map(|t| t.values[g]));
            for (i, z) in row.iter().enumerate() {
                let _ = writeln!(out, "{gamma},{i},{:.17e},{:.17e}", z.re, z.im);
            }
        }
        out
    }
}

/// Tracks the damped spectrum across `gamma_grid` and fits `Re λ` against `γ`.
///
/// Eigenvalues are matched greedily to their value at the previous grid
/// point within half the smallest undamped spectral gap; the pair near zero
/// is treated as a cluster.
pub fn spectral_slopes(params: &SystemParams, gamma_grid: &[f64]) -> Result<SlopeReport> {
    if gamma_grid.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidParameter(
            "damping grid must be non-negative".into(),
        ));
    }
    let mut gammas = gamma_grid.to_vec();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    if gammas.len() < 2 {
        return Err(Error::Tracking(
            "at least two distinct damping values are needed to fit a slope".into(),
        ));
    }

    let undamped = params.with_gamma(0.0)?;
    let profile = crate::breather::solve_breather(&undamped, 0.0)?;
    let lin = build_linearization(&profile, &undamped)?;
    let baseline = undamped_spectrum(&lin)?;
    let (zeros, mut nonzero): (Vec<Complex64>, Vec<Complex64>) = baseline
        .iter()
        .partition(|z| z.norm() < ZERO_EIGENVALUE_THRESHOLD);
    if zeros.len() != 2 {
        return Err(Error::Tracking(format!(
            "expected a double zero eigenvalue, found {} near zero",
            zeros.len()
        )));
    }
    sort_spectrum(&mut nonzero);
    let mut points = nonzero.clone();
    points.push(Complex64::new(0.0, 0.0));
    let mut gap = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            gap = gap.min((points[i] - points[j]).norm());
        }
    }
    let radius = 0.5 * gap;

    let spectra: Vec<(f64, Vec<Complex64>)> = gammas
        .par_iter()
        .map(|&g| {
            let p = params.with_gamma(g)?;
            let m = damped_linearization(&lin, &p)?;
            let trace = m.trace();
            Ok((trace, eigenvalues(&m)?))
        })
        .collect::<Result<_>>()?;

    let mut current = nonzero.clone();
    let mut values = vec![Vec::with_capacity(gammas.len()); nonzero.len()];
    let mut members = Vec::with_capacity(gammas.len());
    let mut mean_real = Vec::with_capacity(gammas.len());
    for (g, (trace, ev)) in gammas.iter().zip(&spectra) {
        let mut taken = vec![false; ev.len()];
        for (t, prev) in current.iter_mut().enumerate() {
            let candidates: Vec<usize> = (0..ev.len())
                .filter(|&i| !taken[i] && (ev[i] - *prev).norm() < radius)
                .collect();
            let pick = match candidates.as_slice() {
                [one] => *one,
                [] => {
                    return Err(Error::Tracking(format!(
                        "eigenvalue {prev} lost at gamma = {g}"
                    )))
                }
                _ => {
                    return Err(Error::Tracking(format!(
                        "ambiguous continuation of {prev} at gamma = {g}"
                    )))
                }
            };
            taken[pick] = true;
            *prev = ev[pick];
            values[t].push(ev[pick]);
        }
        let rest: Vec<Complex64> = (0..ev.len())
            .filter(|&i| !taken[i])
            .map(|i| ev[i])
            .collect();
        if rest.len() != 2 || rest.iter().any(|z| z.norm() >= radius) {
            return Err(Error::Tracking(format!(
                "zero pair not isolated at gamma = {g}: {rest:?}"
            )));
        }
        let tracked: f64 = current.iter().map(|z| z.re).sum();
        mean_real.push(0.5 * (trace - tracked));
        members.push([rest[0], rest[1]]);
    }

    let tracks = nonzero
        .iter()
        .zip(values)
        .map(|(&b, vals)| {
            let re: Vec<f64> = vals.iter().map(|z| z.re).collect();
            let (slope, intercept, relative_residual) = fit_line(&gammas, &re);
            EigenTrack {
                baseline: b,
                values: vals,
                slope,
                intercept,
                relative_residual,
            }
        })
        .collect();
    let (slope, intercept, relative_residual) = fit_line(&gammas, &mean_real);
    Ok(SlopeReport {
        params: *params,
        gammas,
        tracks,
        zero_pair: ZeroPairTrack {
            members,
            mean_real,
            slope,
            intercept,
            relative_residual,
        },
    })
}
