//! 2D DoA estimation with forward-backward-averaged ESPRIT on a planar array.
//!
//! The despread channel observation is FBA-extended, its dominant left
//! singular subspace extracted, and the least-squares shift-invariance
//! operators of the two subarray axes solved. Eigenvalues of the azimuth
//! operator give the azimuth spatial frequencies; the shared eigenvector
//! basis applied to the elevation operator pairs the elevation frequencies
//! automatically.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ArrayGeometry;
use crate::numerics::{eig, kron, pinv, svd, ComplexMatrix, NumericsError};

#[derive(Debug, Error)]
pub enum EspritError {
    #[error("model order {order} infeasible: requires order <= min(N_r, 2*N_t) = {max_rank} and order <= (m1-1)*m2 = {elev_bound} and order <= m1*(m2-1) = {azim_bound}")]
    InfeasibleOrder { order: usize, max_rank: usize, elev_bound: usize, azim_bound: usize },
    #[error("subarray axis has a single element; shift invariance undefined")]
    UnsupportedAxis,
    #[error("subarray-projected signal subspace is rank deficient")]
    IllConditionedSubarray,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which spatial-frequency axis a subarray operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyAxis {
    /// u axis: phase progression along the m1 (vertical) elements.
    Elevation,
    /// v axis: phase progression along the m2 (horizontal) elements.
    Azimuth,
}

/// One estimated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedPath {
    pub u: f64,
    pub v: f64,
    pub theta: f64,
    pub phi: f64,
}

/// Result of [`estimate_doa`]: per-path spatial frequencies and converted
/// angles, ordered by ascending azimuth frequency.
#[derive(Debug, Clone)]
pub struct DoAEstimate {
    pub paths: Vec<EstimatedPath>,
    /// Maps output position to the column of the shift-invariance
    /// eigendecomposition it came from.
    pub pairing: Vec<usize>,
    /// Set when an arccos argument had to be clamped by more than 1e-6,
    /// i.e. the frequency pair left the array manifold.
    pub out_of_manifold: bool,
}

/// Forward-backward extension `[H, Pi_{N_r} * conj(H) * Pi_{N_t}]`.
pub fn fba_extend(h: &ComplexMatrix) -> ComplexMatrix {
    let n_r = h.rows();
    let n_t = h.cols();
    let mut out = ComplexMatrix::zeros(n_r, 2 * n_t);
    for c in 0..n_t {
        for r in 0..n_r {
            out[(r, c)] = h[(r, c)];
            // (Pi H* Pi)[r, c] = conj(H[n_r-1-r, n_t-1-c])
            out[(r, n_t + c)] = h[(n_r - 1 - r, n_t - 1 - c)].conj();
        }
    }
    out
}

fn order_bounds(geometry: &ArrayGeometry, h_fba: &ComplexMatrix) -> (usize, usize, usize) {
    let max_rank = h_fba.rows().min(h_fba.cols());
    let elev_bound = (geometry.m1.saturating_sub(1)) * geometry.m2;
    let azim_bound = geometry.m1 * (geometry.m2.saturating_sub(1));
    (max_rank, elev_bound, azim_bound)
}

/// Dominant-`model_order` SVD factors of the FBA-extended observation.
///
/// Returns `(u_sig, s_sig, v_sig)` with `u_sig` of size `N_r x L`,
/// `s_sig` the leading singular values, and `v_sig` of size `2*N_t x L`.
pub fn signal_subspace(
    h_fba: &ComplexMatrix,
    geometry: &ArrayGeometry,
    model_order: usize,
) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix), EspritError> {
    let (max_rank, elev_bound, azim_bound) = order_bounds(geometry, h_fba);
    if model_order == 0
        || model_order > max_rank
        || model_order > elev_bound
        || model_order > azim_bound
    {
        return Err(EspritError::InfeasibleOrder {
            order: model_order,
            max_rank,
            elev_bound,
            azim_bound,
        });
    }
    let dec = svd(h_fba)?;
    Ok((
        dec.u.columns(0, model_order),
        dec.singular_values[..model_order].to_vec(),
        dec.v.columns(0, model_order),
    ))
}

/// Row indices selected by the two subarray selection matrices of an axis.
pub(crate) fn selection_rows(
    geometry: &ArrayGeometry,
    axis: FrequencyAxis,
) -> Result<(Vec<usize>, Vec<usize>), EspritError> {
    let (m1, m2) = (geometry.m1, geometry.m2);
    match axis {
        FrequencyAxis::Azimuth => {
            if m2 < 2 {
                return Err(EspritError::UnsupportedAxis);
            }
            // [I_{m2-1} 0] (x) I_{m1}: drop the last azimuth block
            let first = (0..(m2 - 1) * m1).collect();
            let second = (m1..m2 * m1).collect();
            Ok((first, second))
        }
        FrequencyAxis::Elevation => {
            if m1 < 2 {
                return Err(EspritError::UnsupportedAxis);
            }
            // I_{m2} (x) [I_{m1-1} 0]: drop the last elevation row of each block
            let mut first = Vec::with_capacity(m2 * (m1 - 1));
            let mut second = Vec::with_capacity(m2 * (m1 - 1));
            for q in 0..m2 {
                for p in 0..m1 - 1 {
                    first.push(q * m1 + p);
                    second.push(q * m1 + p + 1);
                }
            }
            Ok((first, second))
        }
    }
}

/// Materialized subarray selection matrices `(J1, J2)` of an axis; each is
/// `((m-1)*other) x N_r` and picks the leading/trailing subarray.
pub fn selection_matrices(
    geometry: &ArrayGeometry,
    axis: FrequencyAxis,
) -> Result<(ComplexMatrix, ComplexMatrix), EspritError> {
    let (m1, m2) = (geometry.m1, geometry.m2);
    let (j1, j2) = match axis {
        FrequencyAxis::Azimuth => {
            if m2 < 2 {
                return Err(EspritError::UnsupportedAxis);
            }
            let pick1 = ComplexMatrix::from_fn(m2 - 1, m2, |r, c| {
                if r == c {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            });
            let pick2 = ComplexMatrix::from_fn(m2 - 1, m2, |r, c| {
                if r + 1 == c {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            });
            let eye = ComplexMatrix::identity(m1);
            (kron(&pick1, &eye), kron(&pick2, &eye))
        }
        FrequencyAxis::Elevation => {
            if m1 < 2 {
                return Err(EspritError::UnsupportedAxis);
            }
            let pick1 = ComplexMatrix::from_fn(m1 - 1, m1, |r, c| {
                if r == c {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            });
            let pick2 = ComplexMatrix::from_fn(m1 - 1, m1, |r, c| {
                if r + 1 == c {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            });
            let eye = ComplexMatrix::identity(m2);
            (kron(&eye, &pick1), kron(&eye, &pick2))
        }
    };
    Ok((j1, j2))
}

/// Least-squares shift-invariance operator of one axis:
/// `Psi = (J1 * U_sig)^+ * (J2 * U_sig)`.
pub(crate) fn invariance_operator(
    u_sig: &ComplexMatrix,
    geometry: &ArrayGeometry,
    axis: FrequencyAxis,
) -> Result<ComplexMatrix, EspritError> {
    let (rows1, rows2) = selection_rows(geometry, axis)?;
    let sub1 = u_sig.select_rows(&rows1);
    let sub2 = u_sig.select_rows(&rows2);
    let dec = svd(&sub1)?;
    if dec.rank() < u_sig.cols() {
        return Err(EspritError::IllConditionedSubarray);
    }
    Ok(&pinv(&sub1)? * &sub2)
}

/// Threshold beyond which an arccos-argument clamp marks the estimate as
/// off the array manifold.
const MANIFOLD_CLAMP_TOLERANCE: f64 = 1e-6;

fn clamped_acos(x: f64, flagged: &mut bool) -> f64 {
    if x.abs() > 1.0 + MANIFOLD_CLAMP_TOLERANCE {
        *flagged = true;
    }
    x.clamp(-1.0, 1.0).acos()
}

/// Full 2D unitary-ESPRIT estimate from a despread channel observation.
///
/// Steps: FBA extension, dominant-subspace SVD, least-squares invariance
/// operators, eigendecomposition of the azimuth operator (eigenvalues
/// `exp(j*v)`), elevation frequencies from the diagonal of the
/// eigenvector-transformed elevation operator, principal-argument wrap, and
/// angle conversion.
pub fn estimate_doa(
    h_hat: &ComplexMatrix,
    geometry: &ArrayGeometry,
    model_order: usize,
) -> Result<DoAEstimate, EspritError> {
    let h_fba = fba_extend(h_hat);
    let (u_sig, _s_sig, _v_sig) = signal_subspace(&h_fba, geometry, model_order)?;

    let psi_v = invariance_operator(&u_sig, geometry, FrequencyAxis::Azimuth)?;
    let psi_u = invariance_operator(&u_sig, geometry, FrequencyAxis::Elevation)?;

    let azimuth_eig = eig(&psi_v)?;
    let t = &azimuth_eig.vectors;
    let t_inv = crate::numerics::inverse(t)?;
    let coupled = &(&t_inv * &psi_u) * t;

    let mut order: Vec<usize> = (0..model_order).collect();
    let v_hats: Vec<f64> = azimuth_eig.values.iter().map(|z| z.arg()).collect();
    order.sort_by(|&a, &b| v_hats[a].partial_cmp(&v_hats[b]).unwrap());

    let spacing = geometry.rx_spacing_ratio;
    let scale = 2.0 * std::f64::consts::PI * spacing;
    let mut flagged = false;
    let mut paths = Vec::with_capacity(model_order);
    for &idx in &order {
        let v = v_hats[idx];
        let u = coupled[(idx, idx)].arg();
        let theta = clamped_acos(u / scale, &mut flagged);
        let sin_theta = theta.sin();
        let phi = if sin_theta.abs() < f64::EPSILON {
            flagged = true;
            0.0
        } else {
            clamped_acos(v / (scale * sin_theta), &mut flagged)
        };
        paths.push(EstimatedPath { u, v, theta, phi });
    }

    Ok(DoAEstimate { paths, pairing: order, out_of_manifold: flagged })
}

/// Minimum-cost assignment for a square cost matrix (Hungarian algorithm
/// with potentials). Returns, for each row, the assigned column.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched[j] > 0 {
            assignment[matched[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Matches estimated paths to ground-truth frequency pairs by minimum total
/// squared distance in the (u, v) plane.
///
/// Returns the permutation (`perm[i]` is the estimate index assigned to truth
/// path `i`) and the signed per-path errors `du[i] = u_i - u_hat_perm(i)`,
/// `dv[i] = v_i - v_hat_perm(i)`.
pub fn match_paths(
    truth: &[(f64, f64)],
    est: &DoAEstimate,
) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    assert_eq!(truth.len(), est.paths.len(), "path counts must agree");
    let n = truth.len();
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|&(u, v)| {
            est.paths.iter().map(|p| (u - p.u).powi(2) + (v - p.v).powi(2)).collect()
        })
        .collect();
    let perm = hungarian(&cost);
    let du = (0..n).map(|i| truth[i].0 - est.paths[perm[i]].u).collect();
    let dv = (0..n).map(|i| truth[i].1 - est.paths[perm[i]].v).collect();
    (perm, du, dv)
}
