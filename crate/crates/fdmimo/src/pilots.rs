//! Shared non-orthogonal uplink pilot pool, received-signal synthesis, and
//! despreading.
//!
//! Every mobile station transmits `nt` length-`q` spreading sequences, one per
//! antenna. Sequences of the same user are orthonormal; sequences of different
//! users correlate with a constant coefficient `rho1`. The same pool is reused
//! in every cell, which is what creates pilot contamination.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use thiserror::Error;

use crate::channel::{complex_gaussian, ctf, NetworkScenario};
use crate::numerics::{psd_sqrt, ComplexMatrix, NumericsError};

#[derive(Debug, Error)]
pub enum PilotError {
    #[error("infeasible correlation: rho1 = {rho1} must lie in [0, 1/nt) = [0, {limit})")]
    InfeasibleCorrelation { rho1: f64, limit: f64 },
    #[error("sequence length {q} too small for {j_users} users with {nt} antennas")]
    SequenceTooShort { q: usize, j_users: usize, nt: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The pool of spreading sequences shared by all cells.
///
/// Row block `j*nt .. (j+1)*nt` of [`PilotBook::sequences`] belongs to user `j`.
#[derive(Debug, Clone)]
pub struct PilotBook {
    pub q: usize,
    pub j_users: usize,
    pub nt: usize,
    pub rho1: f64,
    /// `(j_users * nt) x q` stacked sequence matrix.
    pub sequences: ComplexMatrix,
}

impl PilotBook {
    /// The `nt x q` sequence matrix of one user.
    pub fn user_sequences(&self, user: usize) -> ComplexMatrix {
        assert!(user < self.j_users, "user index out of range");
        let rows: Vec<usize> = (user * self.nt..(user + 1) * self.nt).collect();
        self.sequences.select_rows(&rows)
    }
}

/// Builds a pool whose Gram matrix is exactly
/// `K = I + rho1 * (1_{J*Nt} - I_J (x) 1_{Nt})`: orthonormal within a user,
/// constant cross-correlation `rho1` between users.
///
/// Construction: `S = sqrt(K) * F` with `F` the first `J*Nt` rows of the
/// `q`-point unitary DFT, so `S S^H = K` holds to machine precision.
pub fn build_pilot_book(
    j_users: usize,
    nt: usize,
    q: usize,
    rho1: f64,
) -> Result<PilotBook, PilotError> {
    assert!(j_users >= 1 && nt >= 1);
    let limit = 1.0 / nt as f64;
    if !(0.0..limit).contains(&rho1) {
        return Err(PilotError::InfeasibleCorrelation { rho1, limit });
    }
    let n = j_users * nt;
    if q < n {
        return Err(PilotError::SequenceTooShort { q, j_users, nt });
    }

    // target Gram: ones everywhere scaled by rho1, except identity blocks per user
    let mut gram = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let same_user = r / nt == c / nt;
            gram[(r, c)] = if r == c {
                Complex64::ONE
            } else if same_user {
                Complex64::ZERO
            } else {
                Complex64::new(rho1, 0.0)
            };
        }
    }
    let root = psd_sqrt(&gram)?;

    let scale = 1.0 / (q as f64).sqrt();
    let dft_rows = ComplexMatrix::from_fn(n, q, |m, k| {
        Complex64::from_polar(scale, -2.0 * PI * (m as f64) * (k as f64) / q as f64)
    });

    Ok(PilotBook { q, j_users, nt, rho1, sequences: &root * &dft_rows })
}

/// Frequency-domain uplink received signal at BS `bs` on subcarrier `k`:
/// the pilot transmissions of every user in every cell plus i.i.d. circular
/// complex Gaussian noise of variance `sigma2` per entry.
pub fn uplink_rx(
    scenario: &NetworkScenario,
    pilots: &PilotBook,
    bs: usize,
    k: usize,
    sigma2: f64,
    rng: &mut impl Rng,
) -> ComplexMatrix {
    let geometry = scenario.geometry();
    let n_r = geometry.n_r();
    assert!(bs < scenario.cells(), "bs index out of range");
    assert_eq!(pilots.nt, geometry.nt, "pilot book antenna count mismatch");
    assert!(
        pilots.j_users >= scenario.users_per_cell(),
        "pilot book holds fewer users than the scenario schedules"
    );

    let mut z = ComplexMatrix::zeros(n_r, pilots.q);
    for cell in 0..scenario.cells() {
        for user in 0..scenario.users_per_cell() {
            let link = scenario.link(user, cell, bs);
            let h = ctf(link, geometry, k, scenario.num_subcarriers());
            let x = pilots.user_sequences(user);
            let scale = Complex64::new(link.large_scale.sqrt(), 0.0);
            z = &z + &(&h.scale(scale) * &x);
        }
    }
    if sigma2 > 0.0 {
        for c in 0..pilots.q {
            for r in 0..n_r {
                z[(r, c)] += complex_gaussian(rng, sigma2);
            }
        }
    }
    z
}

/// Correlates the received signal with the target user's sequences:
/// `Z * X_user^H`, an `N_r x N_t` channel observation. The pool is reused
/// identically in every cell, so only the user index selects sequences.
pub fn despread(z: &ComplexMatrix, pilots: &PilotBook, user: usize) -> ComplexMatrix {
    assert_eq!(z.cols(), pilots.q, "received signal width must equal the sequence length");
    &*z * &pilots.user_sequences(user).adjoint()
}
