//! Analytical prediction of the DoA estimation error.
//!
//! Two routes are implemented and cross-checked against each other and
//! against Monte Carlo:
//!
//! 1. the exact first-order per-component MSE, evaluated from the covariance
//!    of the despread perturbation together with the SVD of the noiseless
//!    forward-backward-averaged signal, and
//! 2. the closed-form large-array expressions for the four perturbation
//!    sources (pilot contamination, intra-cell interference, inter-cell
//!    interference, noise), whose angle expectations are estimated by seeded
//!    Monte Carlo over the interference priors.
//!
//! A Jacobian conversion maps spatial-frequency MSEs to elevation/azimuth
//! angle MSEs at half-wavelength spacing.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

use crate::channel::{ctf, ArrayGeometry, LinkChannel, NetworkScenario, ScenarioConfig};
use crate::esprit::{
    fba_extend, hungarian, invariance_operator, selection_rows, signal_subspace, EspritError,
    FrequencyAxis,
};
use crate::numerics::{eig, inverse, pinv, ComplexMatrix, NumericsError};
use crate::pilots::PilotBook;

#[derive(Debug, Error)]
pub enum MseError {
    #[error("spatial frequencies of two paths coincide within 1e-6 on the {0:?} axis")]
    DegenerateMode(FrequencyAxis),
    #[error("Jacobian conversion singular: |sin| below 1e-3 for theta = {theta}, phi = {phi}")]
    SingularJacobian { theta: f64, phi: f64 },
    #[error(transparent)]
    Esprit(#[from] EspritError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Deterministic seed derivation: hashes salts into a base seed with
/// splitmix64 steps so nested Monte Carlo loops stay order-independent.
pub(crate) fn mix_seed(base: u64, salt: &[u64]) -> u64 {
    let mut x = base;
    for &s in salt {
        x ^= s.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0x1234_5678_9ABC_DEF1);
        x = x.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        x = z ^ (z >> 31);
    }
    x
}

/// Monte Carlo configuration for the interference-angle expectations of the
/// closed-form MSE theorems; priors mirror the scenario configuration.
#[derive(Debug, Clone)]
pub struct InterferenceStats {
    pub mc_samples: usize,
    pub elevation_range: (f64, f64),
    pub azimuth_range: (f64, f64),
    pub dod_range: (f64, f64),
    /// Per-path gain variance of the interference channels.
    pub gain_variance: f64,
    /// Paths per interfering link.
    pub paths_per_link: usize,
    pub seed: u64,
}

impl InterferenceStats {
    pub fn from_config(config: &ScenarioConfig, mc_samples: usize, seed: u64) -> Self {
        assert!(mc_samples >= 1);
        Self {
            mc_samples,
            elevation_range: config.elevation_range,
            azimuth_range: config.azimuth_range,
            dod_range: config.dod_range,
            gain_variance: config.gain_variance,
            paths_per_link: config.paths_per_link,
            seed,
        }
    }
}

/// The four additive MSE contributions for one path on one frequency axis,
/// in squared radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MseComponents {
    pub pilot: f64,
    pub intra: f64,
    pub inter: f64,
    pub noise: f64,
}

impl MseComponents {
    pub fn total(&self) -> f64 {
        self.pilot + self.intra + self.inter + self.noise
    }
}

/// Per-path, per-axis component breakdown for one target link.
#[derive(Debug, Clone)]
pub struct MseBreakdown {
    /// Elevation-axis (u) components, indexed by path.
    pub u: Vec<MseComponents>,
    /// Azimuth-axis (v) components, indexed by path.
    pub v: Vec<MseComponents>,
}

/// A covariance contribution of the despread perturbation, kept in factored
/// form so large arrays never materialize `N_r N_t x N_r N_t` matrices.
#[derive(Debug, Clone)]
pub enum CovTerm {
    /// `scale * I_dim`.
    ScaledIdentity { dim: usize, scale: f64 },
    /// `sum_s weights[s] * factors[s] factors[s]^H`.
    WeightedOuters { dim: usize, weights: Vec<f64>, factors: Vec<Vec<Complex64>> },
}

impl CovTerm {
    pub fn dim(&self) -> usize {
        match self {
            CovTerm::ScaledIdentity { dim, .. } => *dim,
            CovTerm::WeightedOuters { dim, .. } => *dim,
        }
    }

    pub fn empty(dim: usize) -> Self {
        CovTerm::WeightedOuters { dim, weights: Vec::new(), factors: Vec::new() }
    }

    /// Materializes the dense covariance matrix.
    pub fn to_matrix(&self) -> ComplexMatrix {
        match self {
            CovTerm::ScaledIdentity { dim, scale } => {
                ComplexMatrix::identity(*dim).scale(Complex64::new(*scale, 0.0))
            }
            CovTerm::WeightedOuters { dim, weights, factors } => {
                let mut out = ComplexMatrix::zeros(*dim, *dim);
                for (w, p) in weights.iter().zip(factors) {
                    for c in 0..*dim {
                        let pc = p[c].conj() * w;
                        for r in 0..*dim {
                            out[(r, c)] += p[r] * pc;
                        }
                    }
                }
                out
            }
        }
    }
}

/// The four Lemma-1 covariance terms of the despread perturbation.
#[derive(Debug, Clone)]
pub struct CovarianceComponents {
    pub pilot: CovTerm,
    pub intra: CovTerm,
    pub inter: CovTerm,
    pub noise: CovTerm,
}

impl CovarianceComponents {
    /// Dense total covariance `R_1 + R_2 + R_3 + R_4`.
    pub fn total_matrix(&self) -> ComplexMatrix {
        let mut m = self.pilot.to_matrix();
        m = &m + &self.intra.to_matrix();
        m = &m + &self.inter.to_matrix();
        &m + &self.noise.to_matrix()
    }
}

/// How the angle/gain expectations of the interference channels are taken.
#[derive(Debug, Clone, Copy)]
pub enum ExpectationMode<'a> {
    /// Monte Carlo over the configured priors.
    Priors(&'a InterferenceStats),
    /// Angles and per-path gain second moments read off the scenario instance.
    InstanceExact,
}

fn interference_factor(
    geometry: &ArrayGeometry,
    u: f64,
    v: f64,
    omega: f64,
    tap_phase: f64,
    sandwiched: bool,
) -> Vec<Complex64> {
    let n_r = geometry.n_r();
    let nt = geometry.nt;
    let a = crate::channel::upa_steering(geometry, u, v);
    let mut out = Vec::with_capacity(n_r * nt);
    if sandwiched {
        // (1_{Nt} b*) (x) a = conj(sum_s b_s) * (1_{Nt} (x) a)
        let sum_b: Complex64 =
            (0..nt).map(|s| Complex64::from_polar(1.0, s as f64 * omega + tap_phase)).sum();
        let c = sum_b.conj();
        for _t in 0..nt {
            for r in 0..n_r {
                out.push(c * a[(r, 0)]);
            }
        }
    } else {
        // b* (x) a
        for t in 0..nt {
            let bt = Complex64::from_polar(1.0, -(t as f64) * omega - tap_phase);
            for r in 0..n_r {
                out.push(bt * a[(r, 0)]);
            }
        }
    }
    out
}

struct TermAccumulator {
    dim: usize,
    weights: Vec<f64>,
    factors: Vec<Vec<Complex64>>,
}

impl TermAccumulator {
    fn new(dim: usize) -> Self {
        Self { dim, weights: Vec::new(), factors: Vec::new() }
    }

    fn push(&mut self, weight: f64, factor: Vec<Complex64>) {
        if weight > 0.0 {
            debug_assert_eq!(factor.len(), self.dim);
            self.weights.push(weight);
            self.factors.push(factor);
        }
    }

    fn finish(self) -> CovTerm {
        CovTerm::WeightedOuters { dim: self.dim, weights: self.weights, factors: self.factors }
    }
}

/// Covariance of the despread perturbation seen by the target user, split
/// into its pilot-contamination, intra-cell, inter-cell, and noise terms.
///
/// In `Priors` mode the angle expectations are estimated with `mc_samples`
/// seeded draws shared across interferers; gains enter through their second
/// moment. In `InstanceExact` mode the scenario's own interference angles and
/// per-path gain powers are used directly.
pub fn noise_covariance_components(
    scenario: &NetworkScenario,
    pilots: &PilotBook,
    target_user: usize,
    target_cell: usize,
    k: usize,
    sigma2: f64,
    mode: ExpectationMode<'_>,
) -> CovarianceComponents {
    let geometry = scenario.geometry();
    let dim = geometry.n_r() * geometry.nt;
    let rho1 = pilots.rho1;
    let g_cells = scenario.cells();
    let j_users = scenario.users_per_cell();

    // (lambda sums, then per-term accumulation)
    let lambda_pilot: f64 = (0..g_cells)
        .filter(|&g| g != target_cell)
        .map(|g| scenario.link(target_user, g, target_cell).large_scale)
        .sum();
    let lambda_intra: f64 = (0..j_users)
        .filter(|&j| j != target_user)
        .map(|j| scenario.link(j, target_cell, target_cell).large_scale)
        .sum();
    let lambda_inter: f64 = (0..g_cells)
        .filter(|&g| g != target_cell)
        .flat_map(|g| {
            (0..j_users)
                .filter(move |&j| j != target_user)
                .map(move |j| (j, g))
        })
        .map(|(j, g)| scenario.link(j, g, target_cell).large_scale)
        .sum();

    let mut pilot = TermAccumulator::new(dim);
    let mut intra = TermAccumulator::new(dim);
    let mut inter = TermAccumulator::new(dim);

    match mode {
        ExpectationMode::Priors(stats) => {
            let samples = stats.mc_samples;
            let l = stats.paths_per_link as f64;
            let var = stats.gain_variance;
            for (term, lambda_sum, sandwiched, rho_sq, salt) in [
                (&mut pilot, lambda_pilot, false, 1.0, 1u64),
                (&mut intra, lambda_intra, true, rho1 * rho1, 2),
                (&mut inter, lambda_inter, true, rho1 * rho1, 3),
            ] {
                if lambda_sum <= 0.0 || rho_sq == 0.0 {
                    continue;
                }
                let seed = mix_seed(
                    stats.seed,
                    &[0xC0F, salt, target_user as u64, target_cell as u64],
                );
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let weight = rho_sq * lambda_sum * l * var / samples as f64;
                for _ in 0..samples {
                    let theta = rng.random_range(stats.elevation_range.0..stats.elevation_range.1);
                    let phi = rng.random_range(stats.azimuth_range.0..stats.azimuth_range.1);
                    let dod = rng.random_range(stats.dod_range.0..stats.dod_range.1);
                    let (u, v) =
                        crate::channel::spatial_frequencies(theta, phi, geometry.rx_spacing_ratio);
                    let omega = 2.0 * PI * geometry.tx_spacing_ratio * dod.cos();
                    term.push(weight, interference_factor(geometry, u, v, omega, 0.0, sandwiched));
                }
            }
        }
        ExpectationMode::InstanceExact => {
            let n_c = scenario.num_subcarriers();
            let add_link = |term: &mut TermAccumulator,
                            user: usize,
                            cell: usize,
                            sandwiched: bool,
                            rho_sq: f64| {
                let link = scenario.link(user, cell, target_cell);
                for path in &link.paths {
                    let (u, v) = path.spatial_frequencies(geometry);
                    let omega = path.tx_frequency(geometry);
                    let tap_phase = -2.0 * PI * (k as f64) * (path.tap as f64) / n_c as f64;
                    let weight = rho_sq * link.large_scale * path.gain.norm_sqr();
                    term.push(
                        weight,
                        interference_factor(geometry, u, v, omega, tap_phase, sandwiched),
                    );
                }
            };
            for g in (0..g_cells).filter(|&g| g != target_cell) {
                add_link(&mut pilot, target_user, g, false, 1.0);
            }
            if rho1 > 0.0 {
                for j in (0..j_users).filter(|&j| j != target_user) {
                    add_link(&mut intra, j, target_cell, true, rho1 * rho1);
                }
                for g in (0..g_cells).filter(|&g| g != target_cell) {
                    for j in (0..j_users).filter(|&j| j != target_user) {
                        add_link(&mut inter, j, g, true, rho1 * rho1);
                    }
                }
            }
        }
    }

    CovarianceComponents {
        pilot: pilot.finish(),
        intra: intra.finish(),
        inter: inter.finish(),
        noise: CovTerm::ScaledIdentity { dim, scale: sigma2 },
    }
}

/// Materialized forward-backward covariance and complementary covariance
/// blocks of one term: `R_fba = blkdiag(R, Pi R* Pi)` and
/// `C_fba = [[0, R Pi], [Pi R*, 0]]`.
pub fn fba_covariances(r: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = r.rows();
    assert_eq!(n, r.cols(), "covariance must be square");
    let mut r_fba = ComplexMatrix::zeros(2 * n, 2 * n);
    let mut c_fba = ComplexMatrix::zeros(2 * n, 2 * n);
    for c in 0..n {
        for row in 0..n {
            r_fba[(row, c)] = r[(row, c)];
            r_fba[(n + row, n + c)] = r[(n - 1 - row, n - 1 - c)].conj();
            c_fba[(row, n + c)] = r[(row, n - 1 - c)];
            c_fba[(n + row, c)] = r[(n - 1 - row, c)].conj();
        }
    }
    (r_fba, c_fba)
}

/// Which noiseless-SVD factors feed the first-order formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdRoute {
    /// Full numeric SVD plus eigendecomposition of the invariance operator.
    Numeric,
    /// Closed-form factors valid under asymptotic steering orthogonality.
    Analytic,
}

fn check_distinct_frequencies(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
) -> Result<(), MseError> {
    let freqs: Vec<(f64, f64)> =
        link.paths.iter().map(|p| p.spatial_frequencies(geometry)).collect();
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            if (freqs[i].0 - freqs[j].0).abs() < 1e-6 {
                return Err(MseError::DegenerateMode(FrequencyAxis::Elevation));
            }
            if (freqs[i].1 - freqs[j].1).abs() < 1e-6 {
                return Err(MseError::DegenerateMode(FrequencyAxis::Azimuth));
            }
        }
    }
    Ok(())
}

/// The perturbation weight vector `w = beta (x) alpha` of the first-order MSE
/// formula, split into its forward and backward halves (each `N_t * N_r` long).
pub fn first_order_vectors(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
    k: usize,
    n_c: usize,
    path: usize,
    axis: FrequencyAxis,
    route: SvdRoute,
) -> Result<(Vec<Complex64>, Vec<Complex64>), MseError> {
    check_distinct_frequencies(link, geometry)?;
    let (beta, alpha) = match route {
        SvdRoute::Analytic => analytic_beta_alpha(link, geometry, k, n_c, path, axis),
        SvdRoute::Numeric => numeric_beta_alpha(link, geometry, k, n_c, path, axis)?,
    };
    let n_r = geometry.n_r();
    let nt = geometry.nt;
    debug_assert_eq!(beta.len(), 2 * nt);
    debug_assert_eq!(alpha.len(), n_r);
    let mut w1 = Vec::with_capacity(nt * n_r);
    let mut w2 = Vec::with_capacity(nt * n_r);
    for t in 0..nt {
        for r in 0..n_r {
            w1.push(beta[t] * alpha[r]);
        }
    }
    for t in nt..2 * nt {
        for r in 0..n_r {
            w2.push(beta[t] * alpha[r]);
        }
    }
    Ok((w1, w2))
}

/// Closed-form factors from the noiseless SVD under asymptotic orthogonality:
/// signal column space `A/sqrt(N_r)`, singular values
/// `sqrt(2 N_r N_t Lambda) |alpha_l|`, and the explicit two-block structure of
/// the subarray-difference vector.
fn analytic_beta_alpha(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
    k: usize,
    n_c: usize,
    path: usize,
    axis: FrequencyAxis,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let (m1, m2, nt) = (geometry.m1, geometry.m2, geometry.nt);
    let p = &link.paths[path];
    let (u, v) = p.spatial_frequencies(geometry);
    let omega = p.tx_frequency(geometry);
    let b_mag = p.gain.norm();
    let gain_phase = p.gain.arg();
    let lambda = link.large_scale;
    let phi_cap = (m1 as f64 - 1.0) * u + (m2 as f64 - 1.0) * v;
    let twiddle = -2.0 * PI * (k as f64) * (p.tap as f64) / n_c as f64;

    let pref = 1.0 / (b_mag * 2.0 * nt as f64 * lambda.sqrt());
    let mut beta = Vec::with_capacity(2 * nt);
    for t in 0..nt {
        beta.push(Complex64::from_polar(pref, -gain_phase + t as f64 * omega + twiddle));
    }
    for t in 0..nt {
        // exchange-reversed conjugate transmit steering with the Gamma phase
        let rev = (nt - 1 - t) as f64;
        beta.push(Complex64::from_polar(pref, gain_phase + phi_cap - rev * omega - twiddle));
    }

    let n_r = geometry.n_r();
    let mut alpha = vec![Complex64::ZERO; n_r];
    match axis {
        FrequencyAxis::Azimuth => {
            let denom = (m2 as f64 - 1.0) * m1 as f64;
            for pp in 0..m1 {
                alpha[pp] = Complex64::from_polar(1.0 / denom, -(pp as f64) * u) * -1.0;
                alpha[(m2 - 1) * m1 + pp] = Complex64::from_polar(
                    1.0 / denom,
                    -((m2 as f64 - 1.0) * v + pp as f64 * u),
                );
            }
        }
        FrequencyAxis::Elevation => {
            let denom = (m1 as f64 - 1.0) * m2 as f64;
            for q in 0..m2 {
                alpha[q * m1] = Complex64::from_polar(1.0 / denom, -(q as f64) * v) * -1.0;
                alpha[q * m1 + m1 - 1] = Complex64::from_polar(
                    1.0 / denom,
                    -((m1 as f64 - 1.0) * u + q as f64 * v),
                );
            }
        }
    }
    (beta, alpha)
}

/// Factors from the numeric SVD of the noiseless FBA signal and the
/// eigendecomposition of the azimuth invariance operator.
fn numeric_beta_alpha(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
    k: usize,
    n_c: usize,
    path: usize,
    axis: FrequencyAxis,
) -> Result<(Vec<Complex64>, Vec<Complex64>), MseError> {
    let l = link.num_paths();
    let h = ctf(link, geometry, k, n_c).scale(Complex64::new(link.large_scale.sqrt(), 0.0));
    let h_fba = fba_extend(&h);
    let (u_sig, s_sig, v_sig) = signal_subspace(&h_fba, geometry, l)?;

    // eigenvector basis of the azimuth operator, columns matched to paths
    let psi_v = invariance_operator(&u_sig, geometry, FrequencyAxis::Azimuth)?;
    let dec = eig(&psi_v)?;
    let true_vs: Vec<f64> =
        link.paths.iter().map(|p| p.spatial_frequencies(geometry).1).collect();
    let cost: Vec<Vec<f64>> = true_vs
        .iter()
        .map(|&tv| {
            dec.values
                .iter()
                .map(|lam| {
                    let d = (lam.arg() - tv).rem_euclid(2.0 * PI);
                    d.min(2.0 * PI - d)
                })
                .collect()
        })
        .collect();
    let perm = hungarian(&cost);

    let t_mat = &dec.vectors;
    let t_inv = inverse(t_mat)?;

    let p_target = &link.paths[path];
    let (u_true, v_true) = p_target.spatial_frequencies(geometry);
    let shift = match axis {
        FrequencyAxis::Azimuth => v_true,
        FrequencyAxis::Elevation => u_true,
    };

    // M = (J1 U)^+ (J2 / e^{j shift} - J1), applied in row-selection form
    let (rows1, rows2) = selection_rows(geometry, axis)?;
    let sub1 = u_sig.select_rows(&rows1);
    let sub1_pinv = pinv(&sub1)?;
    let phase = Complex64::from_polar(1.0, -shift);
    let n_r = geometry.n_r();
    let mut diff = ComplexMatrix::zeros(rows1.len(), n_r);
    for (ridx, (&r1, &r2)) in rows1.iter().zip(&rows2).enumerate() {
        diff[(ridx, r2)] = phase;
        diff[(ridx, r1)] += Complex64::new(-1.0, 0.0);
    }
    let m_op = &sub1_pinv * &diff; // L x N_r

    let eig_col = perm[path];
    // beta = V_sig Sigma^{-1} q_l
    let mut beta = vec![Complex64::ZERO; 2 * geometry.nt];
    for col in 0..l {
        let coeff = t_mat[(col, eig_col)] / s_sig[col];
        for (row, b) in beta.iter_mut().enumerate() {
            *b += v_sig[(row, col)] * coeff;
        }
    }
    // alpha = (U_n U_n^H)^T M^T p_l, with the noise projector I - U_sig U_sig^H
    let mut m_t_p = vec![Complex64::ZERO; n_r];
    for col in 0..n_r {
        let mut acc = Complex64::ZERO;
        for row in 0..l {
            acc += m_op[(row, col)] * t_inv[(eig_col, row)];
        }
        m_t_p[col] = acc;
    }
    // project: alpha = conj(P) x, P = I - U U^H => alpha = x - conj(U) (U^T x)
    let mut ut_x = vec![Complex64::ZERO; l];
    for (col, item) in ut_x.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for row in 0..n_r {
            acc += u_sig[(row, col)] * m_t_p[row];
        }
        *item = acc;
    }
    let mut alpha = m_t_p;
    for col in 0..l {
        for (row, a) in alpha.iter_mut().enumerate() {
            *a -= u_sig[(row, col)].conj() * ut_x[col];
        }
    }
    Ok((beta, alpha))
}

/// Quadratic form of the first-order MSE for one covariance term:
/// `1/2 (w^H R_fba^T w - Re(w^T C_fba w))` with `w = [w1; w2]`, evaluated
/// without materializing the forward-backward blocks.
pub fn fba_quadratic_form(w1: &[Complex64], w2: &[Complex64], term: &CovTerm) -> f64 {
    let n = term.dim();
    assert_eq!(w1.len(), n);
    assert_eq!(w2.len(), n);
    match term {
        CovTerm::ScaledIdentity { scale, .. } => {
            0.5 * scale
                * (0..n).map(|i| (w1[i] - w2[n - 1 - i].conj()).norm_sqr()).sum::<f64>()
        }
        CovTerm::WeightedOuters { weights, factors, .. } => {
            0.5 * weights
                .iter()
                .zip(factors)
                .map(|(c, p)| {
                    let mut d1 = Complex64::ZERO;
                    let mut d2 = Complex64::ZERO;
                    for i in 0..n {
                        d1 += p[i] * w1[i];
                        d2 += p[i].conj() * w2[n - 1 - i];
                    }
                    c * (d1 - d2.conj()).norm_sqr()
                })
                .sum::<f64>()
        }
    }
}

/// Exact first-order MSE of one spatial frequency for one perturbation
/// component, per the forward-backward perturbation formula.
///
/// The default route follows the large-array design split: closed-form SVD
/// factors for `N_r >= 64`, numeric factors below.
pub fn mse_first_order(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
    k: usize,
    n_c: usize,
    component: &CovTerm,
    path: usize,
    axis: FrequencyAxis,
) -> Result<f64, MseError> {
    let route = if geometry.n_r() >= 64 { SvdRoute::Analytic } else { SvdRoute::Numeric };
    mse_first_order_with_route(link, geometry, k, n_c, component, path, axis, route)
}

#[allow(clippy::too_many_arguments)]
pub fn mse_first_order_with_route(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
    k: usize,
    n_c: usize,
    component: &CovTerm,
    path: usize,
    axis: FrequencyAxis,
    route: SvdRoute,
) -> Result<f64, MseError> {
    let (w1, w2) = first_order_vectors(link, geometry, k, n_c, path, axis, route)?;
    Ok(fba_quadratic_form(&w1, &w2, component))
}

/// Closed-form MSE due to noise: `sigma^2 / (2 |alpha|^2 N_t Lambda M (M'-1)^2)`
/// with `(M, M') = (M_1, M_2)` on the azimuth axis and swapped on elevation.
/// A zero path gain yields an explicitly infinite MSE.
pub fn mse_noise(
    alpha_abs2: f64,
    lambda_ls: f64,
    geometry: &ArrayGeometry,
    sigma2: f64,
    axis: FrequencyAxis,
) -> f64 {
    assert!(alpha_abs2 >= 0.0 && lambda_ls > 0.0 && sigma2 >= 0.0);
    if alpha_abs2 == 0.0 {
        return if sigma2 == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let (m1, m2) = (geometry.m1 as f64, geometry.m2 as f64);
    let geom = match axis {
        FrequencyAxis::Azimuth => (m2 - 1.0).powi(2) * m1,
        FrequencyAxis::Elevation => (m1 - 1.0).powi(2) * m2,
    };
    sigma2 / (2.0 * alpha_abs2 * geometry.nt as f64 * lambda_ls * geom)
}

/// Identifies one path of one target link.
#[derive(Debug, Clone, Copy)]
pub struct TargetPath {
    pub user: usize,
    pub cell: usize,
    pub path: usize,
}

/// Monte Carlo estimates of the angle expectations appearing in the
/// closed-form interference theorems, for one target path and axis.
struct TheoremCore {
    /// Mean of the transmit-side correlation magnitude squared.
    x_bar: f64,
    /// Mean of the receive-side combination `Y + Y' - 2 Re(e^{j Phi} Ytilde)`.
    combo: f64,
}

/// Per-sample receive-side combination; nonnegative by construction
/// (it is bounded below by `(|s_full d_edge| - |s_lin d_pair|)^2`).
pub(crate) fn theorem_combo_sample(
    u_t: f64,
    v_t: f64,
    u_s: f64,
    v_s: f64,
    m1: usize,
    m2: usize,
    axis: FrequencyAxis,
) -> f64 {
    let geom_sum = |count: usize, t: f64, s: f64| -> Complex64 {
        (0..count).map(|r| Complex64::from_polar(1.0, r as f64 * (t - s))).sum()
    };
    let lin_sum = |count: usize, t: f64, s: f64| -> Complex64 {
        (0..count)
            .map(|r| Complex64::from_polar(1.0, r as f64 * t + (count - 1 - r) as f64 * s))
            .sum()
    };
    let phi_cap = (m1 as f64 - 1.0) * u_t + (m2 as f64 - 1.0) * v_t;
    let (s_full, d_edge, s_lin, d_pair) = match axis {
        FrequencyAxis::Azimuth => {
            let s_full = geom_sum(m1, u_t, u_s);
            let span = m2 as f64 - 1.0;
            let d_edge = Complex64::from_polar(1.0, span * (v_t - v_s)) - Complex64::ONE;
            let s_lin = lin_sum(m1, u_t, u_s);
            let d_pair = Complex64::from_polar(1.0, span * v_t)
                - Complex64::from_polar(1.0, span * v_s);
            (s_full, d_edge, s_lin, d_pair)
        }
        FrequencyAxis::Elevation => {
            let s_full = geom_sum(m2, v_t, v_s);
            let span = m1 as f64 - 1.0;
            let d_edge = Complex64::from_polar(1.0, span * (u_t - u_s)) - Complex64::ONE;
            let s_lin = lin_sum(m2, v_t, v_s);
            let d_pair = Complex64::from_polar(1.0, span * u_t)
                - Complex64::from_polar(1.0, span * u_s);
            (s_full, d_edge, s_lin, d_pair)
        }
    };
    let y = (s_full * d_edge).norm_sqr();
    let y_prime = (s_lin * d_pair).norm_sqr();
    let y_tilde = (s_lin * d_pair * s_full * d_edge).conj();
    let combo = y + y_prime
        - 2.0 * (Complex64::from_polar(1.0, phi_cap) * y_tilde).re;
    debug_assert!(combo >= -1e-9 * (y + y_prime).max(1.0), "combination must be nonnegative");
    combo.max(0.0)
}

fn theorem_core(
    u_t: f64,
    v_t: f64,
    omega_t: f64,
    geometry: &ArrayGeometry,
    stats: &InterferenceStats,
    seed: u64,
) -> (TheoremCore, TheoremCore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m1, m2, nt) = (geometry.m1, geometry.m2, geometry.nt);
    let mut x_acc = 0.0;
    let mut combo_u = 0.0;
    let mut combo_v = 0.0;
    for _ in 0..stats.mc_samples {
        let theta = rng.random_range(stats.elevation_range.0..stats.elevation_range.1);
        let phi = rng.random_range(stats.azimuth_range.0..stats.azimuth_range.1);
        let dod = rng.random_range(stats.dod_range.0..stats.dod_range.1);
        let (u_s, v_s) =
            crate::channel::spatial_frequencies(theta, phi, geometry.rx_spacing_ratio);
        let omega_s = 2.0 * PI * geometry.tx_spacing_ratio * dod.cos();

        let x_sample: Complex64 =
            (0..nt).map(|r| Complex64::from_polar(1.0, -(r as f64) * (omega_t - omega_s))).sum();
        x_acc += x_sample.norm_sqr();
        combo_u += theorem_combo_sample(u_t, v_t, u_s, v_s, m1, m2, FrequencyAxis::Elevation);
        combo_v += theorem_combo_sample(u_t, v_t, u_s, v_s, m1, m2, FrequencyAxis::Azimuth);
    }
    let n = stats.mc_samples as f64;
    (
        TheoremCore { x_bar: x_acc / n, combo: combo_u / n },
        TheoremCore { x_bar: x_acc / n, combo: combo_v / n },
    )
}

fn theorem_prefactor(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
    path: usize,
    axis: FrequencyAxis,
) -> f64 {
    let b2 = link.paths[path].gain.norm_sqr();
    if b2 == 0.0 {
        return f64::INFINITY;
    }
    let (m1, m2) = (geometry.m1 as f64, geometry.m2 as f64);
    let geom = match axis {
        FrequencyAxis::Azimuth => (m2 - 1.0).powi(2) * m1 * m1,
        FrequencyAxis::Elevation => (m1 - 1.0).powi(2) * m2 * m2,
    };
    1.0 / (8.0 * b2 * (geometry.nt as f64).powi(2) * link.large_scale * geom)
}

/// Transmit-side coherence of the target path: `|sum_m e^{j m omega}|^2`.
fn x_double_prime_sq(omega_t: f64, nt: usize) -> f64 {
    let s: Complex64 = (0..nt).map(|m| Complex64::from_polar(1.0, m as f64 * omega_t)).sum();
    s.norm_sqr()
}

fn target_core(
    scenario: &NetworkScenario,
    target: TargetPath,
    stats: &InterferenceStats,
    axis: FrequencyAxis,
) -> (f64, TheoremCore) {
    let geometry = scenario.geometry();
    let link = scenario.link(target.user, target.cell, target.cell);
    let p = &link.paths[target.path];
    let (u_t, v_t) = p.spatial_frequencies(geometry);
    let omega_t = p.tx_frequency(geometry);
    let seed = mix_seed(
        stats.seed,
        &[0x7E0, target.user as u64, target.cell as u64, target.path as u64],
    );
    let (core_u, core_v) = theorem_core(u_t, v_t, omega_t, geometry, stats, seed);
    let pref = theorem_prefactor(link, geometry, target.path, axis);
    match axis {
        FrequencyAxis::Elevation => (pref, core_u),
        FrequencyAxis::Azimuth => (pref, core_v),
    }
}

/// Closed-form MSE due to pilot contamination (other-cell users sharing the
/// target's exact sequences), with angle expectations over the priors.
pub fn mse_pilot(
    scenario: &NetworkScenario,
    target: TargetPath,
    stats: &InterferenceStats,
    axis: FrequencyAxis,
) -> f64 {
    let (pref, core) = target_core(scenario, target, stats, axis);
    let gain2 = stats.paths_per_link as f64 * stats.gain_variance;
    let lambda_sum: f64 = (0..scenario.cells())
        .filter(|&g| g != target.cell)
        .map(|g| scenario.link(target.user, g, target.cell).large_scale)
        .sum();
    pref * lambda_sum * gain2 * core.x_bar * core.combo
}

/// Closed-form MSE due to intra-cell interference; scales with
/// `rho1^2 |X''|^2` where `X''` is the target's transmit-side coherence sum.
pub fn mse_intra(
    scenario: &NetworkScenario,
    target: TargetPath,
    stats: &InterferenceStats,
    rho1: f64,
    axis: FrequencyAxis,
) -> f64 {
    if rho1 == 0.0 {
        return 0.0;
    }
    let (pref, core) = target_core(scenario, target, stats, axis);
    let geometry = scenario.geometry();
    let link = scenario.link(target.user, target.cell, target.cell);
    let omega_t = link.paths[target.path].tx_frequency(geometry);
    let gain2 = stats.paths_per_link as f64 * stats.gain_variance;
    let lambda_sum: f64 = (0..scenario.users_per_cell())
        .filter(|&j| j != target.user)
        .map(|j| scenario.link(j, target.cell, target.cell).large_scale)
        .sum();
    rho1 * rho1
        * x_double_prime_sq(omega_t, geometry.nt)
        * pref
        * lambda_sum
        * gain2
        * core.x_bar
        * core.combo
}

/// Closed-form MSE due to inter-cell interference from users with different
/// (non-orthogonal) sequences.
pub fn mse_inter(
    scenario: &NetworkScenario,
    target: TargetPath,
    stats: &InterferenceStats,
    rho1: f64,
    axis: FrequencyAxis,
) -> f64 {
    if rho1 == 0.0 || scenario.cells() == 1 {
        return 0.0;
    }
    let (pref, core) = target_core(scenario, target, stats, axis);
    let geometry = scenario.geometry();
    let link = scenario.link(target.user, target.cell, target.cell);
    let omega_t = link.paths[target.path].tx_frequency(geometry);
    let gain2 = stats.paths_per_link as f64 * stats.gain_variance;
    let lambda_sum: f64 = (0..scenario.cells())
        .filter(|&g| g != target.cell)
        .flat_map(|g| {
            (0..scenario.users_per_cell())
                .filter(move |&j| j != target.user)
                .map(move |j| (j, g))
        })
        .map(|(j, g)| scenario.link(j, g, target.cell).large_scale)
        .sum();
    rho1 * rho1
        * x_double_prime_sq(omega_t, geometry.nt)
        * pref
        * lambda_sum
        * gain2
        * core.x_bar
        * core.combo
}

/// Full per-path, per-axis closed-form breakdown for one target link.
pub fn analytic_breakdown(
    scenario: &NetworkScenario,
    user: usize,
    cell: usize,
    stats: &InterferenceStats,
    rho1: f64,
    sigma2: f64,
) -> MseBreakdown {
    let geometry = scenario.geometry();
    let link = scenario.link(user, cell, cell);
    let l = link.num_paths();
    let mut u_parts = Vec::with_capacity(l);
    let mut v_parts = Vec::with_capacity(l);
    for path in 0..l {
        let target = TargetPath { user, cell, path };
        let p = &link.paths[path];
        let (u_t, v_t) = p.spatial_frequencies(geometry);
        let omega_t = p.tx_frequency(geometry);
        let seed =
            mix_seed(stats.seed, &[0x7E0, user as u64, cell as u64, path as u64]);
        let (core_u, core_v) = theorem_core(u_t, v_t, omega_t, geometry, stats, seed);
        let gain2 = stats.paths_per_link as f64 * stats.gain_variance;
        let x2 = x_double_prime_sq(omega_t, geometry.nt);

        let lambda_pilot: f64 = (0..scenario.cells())
            .filter(|&g| g != cell)
            .map(|g| scenario.link(user, g, cell).large_scale)
            .sum();
        let lambda_intra: f64 = (0..scenario.users_per_cell())
            .filter(|&j| j != user)
            .map(|j| scenario.link(j, cell, cell).large_scale)
            .sum();
        let lambda_inter: f64 = (0..scenario.cells())
            .filter(|&g| g != cell)
            .flat_map(|g| {
                (0..scenario.users_per_cell()).filter(move |&j| j != user).map(move |j| (j, g))
            })
            .map(|(j, g)| scenario.link(j, g, cell).large_scale)
            .sum();

        let alpha_abs2 = p.gain.norm_sqr();
        for (axis, core, parts) in [
            (FrequencyAxis::Elevation, &core_u, &mut u_parts),
            (FrequencyAxis::Azimuth, &core_v, &mut v_parts),
        ] {
            let pref = theorem_prefactor(link, geometry, target.path, axis);
            let base = pref * gain2 * core.x_bar * core.combo;
            parts.push(MseComponents {
                pilot: base * lambda_pilot,
                intra: rho1 * rho1 * x2 * base * lambda_intra,
                inter: rho1 * rho1 * x2 * base * lambda_inter,
                noise: mse_noise(alpha_abs2, link.large_scale, geometry, sigma2, axis),
            });
        }
    }
    MseBreakdown { u: u_parts, v: v_parts }
}

/// Converts spatial-frequency MSEs to elevation/azimuth angle MSEs via the
/// first-order Jacobian, valid at half-wavelength receive spacing.
///
/// `mse_theta = mse_u / (pi^2 sin^2 theta)`;
/// `mse_phi = mse_u cot^2 theta cot^2 phi / (pi^2 sin^2 theta)
///           + mse_v / (pi^2 sin^2 theta sin^2 phi)`.
pub fn angle_mse_from_frequency_mse(
    mse_u: f64,
    mse_v: f64,
    theta: f64,
    phi: f64,
) -> Result<(f64, f64), MseError> {
    let sin_t = theta.sin();
    let sin_p = phi.sin();
    if sin_t.abs() < 1e-3 || sin_p.abs() < 1e-3 {
        return Err(MseError::SingularJacobian { theta, phi });
    }
    let pi2 = PI * PI;
    let mse_theta = mse_u / (pi2 * sin_t * sin_t);
    let cot_t = theta.cos() / sin_t;
    let cot_p = phi.cos() / sin_p;
    let mse_phi = mse_u * cot_t * cot_t * cot_p * cot_p / (pi2 * sin_t * sin_t)
        + mse_v / (pi2 * sin_t * sin_t * sin_p * sin_p);
    Ok((mse_theta, mse_phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_scenario, ArrayGeometry, PathParams, ScenarioConfig};
    use crate::pilots::build_pilot_book;
    use rand::SeedableRng;

    fn test_scenario(cells: usize, users: usize, geometry: ArrayGeometry, seed: u64) -> NetworkScenario {
        let config = ScenarioConfig {
            cells,
            users_per_cell: users,
            geometry,
            paths_per_link: 2,
            azimuth_range: (0.3, 2.8),
            ..ScenarioConfig::default_network()
        };
        draw_scenario(&config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn stats_for(scenario: &NetworkScenario, samples: usize) -> InterferenceStats {
        InterferenceStats::from_config(&scenario.config, samples, 99)
    }

    #[test]
    fn covariance_trivial_zeroings() {
        let geometry = ArrayGeometry::new(3, 3, 2);
        let scenario = test_scenario(1, 2, geometry, 5);
        let book = build_pilot_book(2, 2, 8, 0.1).unwrap();
        let stats = stats_for(&scenario, 50);
        let comps = noise_covariance_components(
            &scenario,
            &book,
            0,
            0,
            0,
            0.3,
            ExpectationMode::Priors(&stats),
        );
        // G = 1: no pilot contamination, no inter-cell term
        assert_eq!(comps.pilot.to_matrix().frobenius_norm(), 0.0);
        assert_eq!(comps.inter.to_matrix().frobenius_norm(), 0.0);
        assert!(comps.intra.to_matrix().frobenius_norm() > 0.0);

        // rho1 = 0: intra and inter vanish
        let book0 = build_pilot_book(2, 2, 8, 0.0).unwrap();
        let comps0 = noise_covariance_components(
            &scenario,
            &book0,
            0,
            0,
            0,
            0.3,
            ExpectationMode::Priors(&stats),
        );
        assert_eq!(comps0.intra.to_matrix().frobenius_norm(), 0.0);

        // noise block is sigma^2 I
        let n = comps.noise.to_matrix();
        assert!((&n - &ComplexMatrix::identity(18).scale(Complex64::new(0.3, 0.0)))
            .frobenius_norm()
            < 1e-14);
    }

    #[test]
    fn covariance_total_is_hermitian_psd() {
        let geometry = ArrayGeometry::new(3, 3, 2);
        let scenario = test_scenario(7, 2, geometry, 6);
        let book = build_pilot_book(2, 2, 8, 0.1).unwrap();
        let comps = noise_covariance_components(
            &scenario,
            &book,
            1,
            0,
            0,
            0.05,
            ExpectationMode::InstanceExact,
        );
        let total = comps.total_matrix();
        assert!((&total - &total.adjoint()).frobenius_norm() < 1e-12 * total.frobenius_norm());
        let eigs = crate::numerics::hermitian_eigenvalues(&total).unwrap();
        assert!(eigs[0] > -1e-12, "total covariance must be PSD, min eig {}", eigs[0]);
    }

    #[test]
    fn fba_covariance_block_structure() {
        let eye = ComplexMatrix::identity(4);
        let (r_fba, c_fba) = fba_covariances(&eye);
        assert!((&r_fba - &ComplexMatrix::identity(8)).frobenius_norm() < 1e-15);
        // complementary blocks sit purely off-diagonal
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(c_fba[(r, c)], Complex64::ZERO);
                assert_eq!(c_fba[(4 + r, 4 + c)], Complex64::ZERO);
            }
        }

        // Hermitian input keeps R_fba Hermitian
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = ComplexMatrix::from_fn(4, 4, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = &g * &g.adjoint();
        let (r_fba, _) = fba_covariances(&h);
        assert!((&r_fba - &r_fba.adjoint()).frobenius_norm() < 1e-12 * r_fba.frobenius_norm());
    }

    #[test]
    fn first_order_zero_covariance_gives_zero() {
        let geometry = ArrayGeometry::new(4, 4, 4);
        let scenario = test_scenario(1, 1, geometry, 9);
        let link = scenario.link(0, 0, 0);
        let zero = CovTerm::empty(16 * 4);
        for axis in [FrequencyAxis::Elevation, FrequencyAxis::Azimuth] {
            let m = mse_first_order(link, &geometry, 0, 64, &zero, 0, axis).unwrap();
            assert_eq!(m, 0.0);
        }
    }

    #[test]
    fn first_order_matches_dense_quadratic_form() {
        // the factored quadratic form must agree with the materialized
        // R_fba / C_fba evaluation
        let geometry = ArrayGeometry::new(3, 3, 2);
        let scenario = test_scenario(7, 2, geometry, 10);
        let book = build_pilot_book(2, 2, 8, 0.1).unwrap();
        let comps = noise_covariance_components(
            &scenario,
            &book,
            0,
            0,
            0,
            0.2,
            ExpectationMode::InstanceExact,
        );
        let link = scenario.link(0, 0, 0);
        let (w1, w2) = first_order_vectors(
            link,
            &geometry,
            0,
            scenario.num_subcarriers(),
            0,
            FrequencyAxis::Azimuth,
            SvdRoute::Numeric,
        )
        .unwrap();

        for term in [&comps.pilot, &comps.intra, &comps.noise] {
            let fast = fba_quadratic_form(&w1, &w2, term);
            let dense = term.to_matrix();
            let (r_fba, c_fba) = fba_covariances(&dense);
            let n = term.dim();
            let w: Vec<Complex64> = w1.iter().chain(w2.iter()).copied().collect();
            let mut t1 = Complex64::ZERO;
            let mut t2 = Complex64::ZERO;
            for i in 0..2 * n {
                for j in 0..2 * n {
                    t1 += w[i].conj() * r_fba[(j, i)] * w[j]; // w^H R^T w
                    t2 += w[i] * c_fba[(i, j)] * w[j];
                }
            }
            let slow = 0.5 * (t1.re - t2.re);
            assert!(
                (fast - slow).abs() <= 1e-10 * slow.abs().max(1e-12),
                "fast {fast:.6e} vs dense {slow:.6e}"
            );
        }
    }

    #[test]
    fn theorem_combo_zero_at_coincident_angles() {
        for axis in [FrequencyAxis::Elevation, FrequencyAxis::Azimuth] {
            let c = theorem_combo_sample(0.7, -0.4, 0.7, -0.4, 8, 8, axis);
            assert!(c.abs() < 1e-20, "coincident interference angles must contribute zero");
        }
    }

    #[test]
    fn theorem_trivial_zeroings() {
        let geometry = ArrayGeometry::new(4, 4, 4);
        let scenario = test_scenario(1, 2, geometry, 11);
        let stats = stats_for(&scenario, 200);
        let target = TargetPath { user: 0, cell: 0, path: 0 };
        // G = 1: pilot and inter vanish
        assert_eq!(mse_pilot(&scenario, target, &stats, FrequencyAxis::Azimuth), 0.0);
        assert_eq!(mse_inter(&scenario, target, &stats, 0.1, FrequencyAxis::Azimuth), 0.0);
        // rho = 0: intra and inter vanish
        assert_eq!(mse_intra(&scenario, target, &stats, 0.0, FrequencyAxis::Azimuth), 0.0);
        let multi = test_scenario(7, 2, geometry, 12);
        assert_eq!(mse_inter(&multi, target, &stats, 0.0, FrequencyAxis::Elevation), 0.0);
        assert!(mse_pilot(&multi, target, &stats, FrequencyAxis::Azimuth) > 0.0);
    }

    #[test]
    fn noise_theorem_hand_values() {
        let geometry = ArrayGeometry::new(8, 8, 8);
        let v = mse_noise(1.0, 1.0, &geometry, 1.0, FrequencyAxis::Azimuth);
        assert!((v - 1.0 / 6272.0).abs() < 1e-18, "got {v}");
        assert_eq!(mse_noise(1.0, 1.0, &geometry, 0.0, FrequencyAxis::Azimuth), 0.0);
        assert_eq!(mse_noise(0.0, 1.0, &geometry, 1.0, FrequencyAxis::Azimuth), f64::INFINITY);

        // doubling M1 at fixed M2 halves the azimuth-axis MSE
        let tall = ArrayGeometry::new(16, 8, 8);
        let v2 = mse_noise(1.0, 1.0, &tall, 1.0, FrequencyAxis::Azimuth);
        assert!((v2 - v / 2.0).abs() < 1e-18);
    }

    #[test]
    fn theorems_scale_invariant_in_lambda_and_sigma() {
        let geometry = ArrayGeometry::new(4, 4, 4);
        let scenario = test_scenario(7, 3, geometry, 13);
        let stats = stats_for(&scenario, 300);
        let target = TargetPath { user: 1, cell: 0, path: 1 };
        let sigma2 = 0.05;

        let mut scaled = scenario.clone();
        for g in 0..7 {
            for j in 0..3 {
                for bs in 0..7 {
                    scaled.link_mut(j, g, bs).large_scale *= 7.0;
                }
            }
        }
        for axis in [FrequencyAxis::Elevation, FrequencyAxis::Azimuth] {
            let a = mse_pilot(&scenario, target, &stats, axis);
            let b = mse_pilot(&scaled, target, &stats, axis);
            assert!((a - b).abs() <= 1e-12 * a.max(1e-30), "pilot not scale invariant");
            let a = mse_inter(&scenario, target, &stats, 0.1, axis);
            let b = mse_inter(&scaled, target, &stats, 0.1, axis);
            assert!((a - b).abs() <= 1e-12 * a.max(1e-30), "inter not scale invariant");
            let link = scenario.link(1, 0, 0);
            let slink = scaled.link(1, 0, 0);
            let a = mse_noise(link.paths[1].gain.norm_sqr(), link.large_scale, &geometry, sigma2, axis);
            let b = mse_noise(
                slink.paths[1].gain.norm_sqr(),
                slink.large_scale,
                &geometry,
                7.0 * sigma2,
                axis,
            );
            assert!((a - b).abs() <= 1e-15 * a.max(1e-30), "noise not degree-0 homogeneous");
        }
    }

    #[test]
    fn breakdown_components_are_nonneg_and_additive() {
        let geometry = ArrayGeometry::new(4, 4, 4);
        let scenario = test_scenario(7, 2, geometry, 14);
        let stats = stats_for(&scenario, 200);
        let breakdown = analytic_breakdown(&scenario, 0, 0, &stats, 0.1, 0.01);
        for comps in breakdown.u.iter().chain(&breakdown.v) {
            assert!(comps.pilot >= 0.0 && comps.intra >= 0.0 && comps.inter >= 0.0);
            assert!(comps.noise >= 0.0);
            let total = comps.total();
            assert!(
                (total - (comps.pilot + comps.intra + comps.inter + comps.noise)).abs() == 0.0
            );
        }
        // breakdown must coincide with the standalone theorem evaluators
        let target = TargetPath { user: 0, cell: 0, path: 0 };
        let p = mse_pilot(&scenario, target, &stats, FrequencyAxis::Azimuth);
        assert!((breakdown.v[0].pilot - p).abs() <= 1e-12 * p.max(1e-30));
        let i = mse_intra(&scenario, target, &stats, 0.1, FrequencyAxis::Elevation);
        assert!((breakdown.u[0].intra - i).abs() <= 1e-12 * i.max(1e-30));
    }

    #[test]
    fn jacobian_conversion_special_angles() {
        let pi2 = PI * PI;
        let (mt, mp) = angle_mse_from_frequency_mse(0.01, 0.02, PI / 2.0, 1.0).unwrap();
        assert!((mt - 0.01 / pi2).abs() < 1e-15);
        // cot(theta) = 0 kills the first phi-term
        assert!((mp - 0.02 / (pi2 * 1.0f64.sin().powi(2))).abs() < 1e-15);

        let (_, mp) = angle_mse_from_frequency_mse(0.01, 0.02, PI / 2.0, PI / 2.0).unwrap();
        assert!((mp - 0.02 / pi2).abs() < 1e-15);

        assert!(matches!(
            angle_mse_from_frequency_mse(0.01, 0.02, 1e-5, 1.0),
            Err(MseError::SingularJacobian { .. })
        ));
    }

    #[test]
    fn degenerate_frequencies_rejected() {
        let geometry = ArrayGeometry::new(4, 4, 2);
        let path = PathParams {
            tap: 0,
            gain: Complex64::ONE,
            elevation: 1.0,
            azimuth: 0.8,
            dod: 0.5,
        };
        let link = LinkChannel {
            paths: vec![path, PathParams { tap: 1, ..path }],
            large_scale: 1.0,
        };
        let zero = CovTerm::empty(32);
        assert!(matches!(
            mse_first_order(&link, &geometry, 0, 64, &zero, 0, FrequencyAxis::Azimuth),
            Err(MseError::DegenerateMode(_))
        ));
    }
}
