//! Geometric mmWave channel synthesis.
//!
//! A base station carries an `m1 x m2` planar array (elevation x azimuth);
//! each mobile station carries an `nt`-element uniform linear array. Every
//! link is a sum of single-sub-path clusters, one per resolvable tap, with
//! complex Gaussian gains and angles drawn from configurable priors. Spatial
//! frequencies follow the half-wavelength-normalized conventions
//! `u = 2*pi*(d/lambda)*cos(theta)` and `v = 2*pi*(d/lambda)*sin(theta)*cos(phi)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::numerics::{kron, ComplexMatrix};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("unsupported cell layout: G = {0} (supported: 1 or 7)")]
    UnsupportedLayout(usize),
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
}

/// Base-station planar-array and mobile-station linear-array dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Elevation-direction element count (M1).
    pub m1: usize,
    /// Azimuth-direction element count (M2).
    pub m2: usize,
    /// Receive element spacing over wavelength.
    pub rx_spacing_ratio: f64,
    /// Mobile-station antenna count (N_t).
    pub nt: usize,
    /// Transmit element spacing over wavelength.
    pub tx_spacing_ratio: f64,
}

impl ArrayGeometry {
    pub fn new(m1: usize, m2: usize, nt: usize) -> Self {
        Self { m1, m2, rx_spacing_ratio: 0.5, nt, tx_spacing_ratio: 0.5 }
    }

    /// Total receive element count N_r = M1 * M2.
    pub fn n_r(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.m1 < 1 || self.m2 < 1 || self.nt < 1 {
            return Err(ChannelError::InvalidConfig("array dimensions must be >= 1".into()));
        }
        for (name, s) in [("rx", self.rx_spacing_ratio), ("tx", self.tx_spacing_ratio)] {
            if !(s > 0.0 && s <= 1.0) {
                return Err(ChannelError::InvalidConfig(format!(
                    "{name} spacing ratio {s} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// One resolvable propagation path (a single-sub-path cluster on one tap).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Channel tap index this path occupies.
    pub tap: usize,
    /// Complex path gain.
    pub gain: Complex64,
    /// Elevation DoA in radians, inside (0, pi).
    pub elevation: f64,
    /// Azimuth DoA in radians.
    pub azimuth: f64,
    /// Departure angle at the mobile station, radians.
    pub dod: f64,
}

impl PathParams {
    /// Receive spatial frequencies (u, v) for this path.
    pub fn spatial_frequencies(&self, geometry: &ArrayGeometry) -> (f64, f64) {
        spatial_frequencies(self.elevation, self.azimuth, geometry.rx_spacing_ratio)
    }

    /// Transmit spatial frequency omega = 2*pi*(dt/lambda)*cos(dod).
    pub fn tx_frequency(&self, geometry: &ArrayGeometry) -> f64 {
        2.0 * PI * geometry.tx_spacing_ratio * self.dod.cos()
    }
}

/// Multipath description of one user-to-BS link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkChannel {
    /// One entry per resolvable path; taps strictly increasing.
    pub paths: Vec<PathParams>,
    /// Large-scale fading coefficient (linear, frequency-flat).
    pub large_scale: f64,
}

impl LinkChannel {
    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// Sum of squared gain magnitudes over all paths.
    pub fn gain_energy(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

/// Priors and layout knobs for random scenario generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of cells G; 1 or 7 (center plus one hexagonal ring).
    pub cells: usize,
    /// Co-scheduled users per cell J.
    pub users_per_cell: usize,
    pub geometry: ArrayGeometry,
    /// Resolvable paths per link L (one per tap).
    pub paths_per_link: usize,
    /// OFDM subcarrier count N_c.
    pub num_subcarriers: usize,
    pub cell_radius_m: f64,
    pub pathloss_exponent: f64,
    pub pathloss_ref_distance_m: f64,
    /// Elevation DoA prior support, radians.
    pub elevation_range: (f64, f64),
    /// Azimuth DoA prior support, radians.
    pub azimuth_range: (f64, f64),
    /// Departure-angle prior support, radians.
    pub dod_range: (f64, f64),
    /// Per-path complex Gaussian gain variance.
    pub gain_variance: f64,
    /// When set, each user's large-scale coefficients are divided by its
    /// serving-link coefficient, so every serving link has unit gain and the
    /// uplink SNR definition 1/sigma^2 is exact per user.
    pub normalize_serving_links: bool,
}

impl ScenarioConfig {
    /// Paper-style defaults: 7 cells, 10 users, 8x8 panel, 4 paths,
    /// unit total gain energy per link.
    pub fn default_network() -> Self {
        Self {
            cells: 7,
            users_per_cell: 10,
            geometry: ArrayGeometry::new(8, 8, 8),
            paths_per_link: 4,
            num_subcarriers: 64,
            cell_radius_m: 1000.0,
            pathloss_exponent: 3.7,
            pathloss_ref_distance_m: 35.0,
            elevation_range: (PI / 12.0, PI / 2.0),
            azimuth_range: (-PI / 2.0, PI / 2.0),
            dod_range: (0.0, PI),
            gain_variance: 0.25,
            normalize_serving_links: true,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.geometry.validate()?;
        if self.cells != 1 && self.cells != 7 {
            return Err(ChannelError::UnsupportedLayout(self.cells));
        }
        if self.users_per_cell < 1 {
            return Err(ChannelError::InvalidConfig("users_per_cell must be >= 1".into()));
        }
        if self.paths_per_link < 1 {
            return Err(ChannelError::InvalidConfig("paths_per_link must be >= 1".into()));
        }
        if self.num_subcarriers < 1 {
            return Err(ChannelError::InvalidConfig("num_subcarriers must be >= 1".into()));
        }
        if !(self.cell_radius_m > 0.0) {
            return Err(ChannelError::InvalidConfig("cell_radius_m must be positive".into()));
        }
        if !(self.pathloss_ref_distance_m > 0.0) {
            return Err(ChannelError::InvalidConfig("pathloss reference distance must be positive".into()));
        }
        if !(self.gain_variance > 0.0) {
            return Err(ChannelError::InvalidConfig("gain_variance must be positive".into()));
        }
        for (name, (lo, hi)) in [
            ("elevation_range", self.elevation_range),
            ("azimuth_range", self.azimuth_range),
            ("dod_range", self.dod_range),
        ] {
            if !(lo < hi) {
                return Err(ChannelError::InvalidConfig(format!("{name} must satisfy lo < hi")));
            }
        }
        if self.elevation_range.0 <= 0.0 || self.elevation_range.1 >= PI {
            return Err(ChannelError::InvalidConfig("elevation_range must lie inside (0, pi)".into()));
        }
        Ok(())
    }
}

/// A drawn multi-cell network: positions, large-scale coefficients, and the
/// multipath parameters of every (user, cell) -> BS link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub config: ScenarioConfig,
    /// BS planar coordinates, meters.
    pub bs_positions: Vec<(f64, f64)>,
    /// `user_positions[g][j]` is user j of cell g, meters.
    pub user_positions: Vec<Vec<(f64, f64)>>,
    /// Flattened links: index via [`NetworkScenario::link`].
    links: Vec<LinkChannel>,
}

impl NetworkScenario {
    pub fn cells(&self) -> usize {
        self.config.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.config.users_per_cell
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.config.geometry
    }

    pub fn num_subcarriers(&self) -> usize {
        self.config.num_subcarriers
    }

    fn link_index(&self, user: usize, user_cell: usize, bs: usize) -> usize {
        let g = self.config.cells;
        let j = self.config.users_per_cell;
        assert!(user < j && user_cell < g && bs < g, "link index out of range");
        (user_cell * j + user) * g + bs
    }

    /// Channel of user `user` in cell `user_cell` towards BS `bs`.
    pub fn link(&self, user: usize, user_cell: usize, bs: usize) -> &LinkChannel {
        &self.links[self.link_index(user, user_cell, bs)]
    }

    pub fn link_mut(&mut self, user: usize, user_cell: usize, bs: usize) -> &mut LinkChannel {
        let idx = self.link_index(user, user_cell, bs);
        &mut self.links[idx]
    }

    /// Serializes the scenario to a TOML document so an experiment can be
    /// replayed without the generating seed.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialization cannot fail")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ChannelError> {
        let scenario: NetworkScenario =
            toml::from_str(s).map_err(|e| ChannelError::Parse(e.to_string()))?;
        let g = scenario.config.cells;
        let j = scenario.config.users_per_cell;
        if scenario.links.len() != g * j * g {
            return Err(ChannelError::Parse(format!(
                "expected {} links, found {}",
                g * j * g,
                scenario.links.len()
            )));
        }
        Ok(scenario)
    }
}

/// Receive spatial frequencies for a (theta, phi) direction pair.
pub fn spatial_frequencies(theta: f64, phi: f64, rx_spacing_ratio: f64) -> (f64, f64) {
    let scale = 2.0 * PI * rx_spacing_ratio;
    (scale * theta.cos(), scale * theta.sin() * phi.cos())
}

/// Inverse of [`spatial_frequencies`]; arguments are clamped to the arccos
/// domain. Returns (theta, phi).
pub fn angles_from_frequencies(u: f64, v: f64, rx_spacing_ratio: f64) -> (f64, f64) {
    let scale = 2.0 * PI * rx_spacing_ratio;
    let theta = (u / scale).clamp(-1.0, 1.0).acos();
    let sin_theta = theta.sin();
    let phi = if sin_theta == 0.0 { 0.0 } else { (v / (scale * sin_theta)).clamp(-1.0, 1.0).acos() };
    (theta, phi)
}

/// Vandermonde steering vector of an `nt`-element ULA at spatial frequency omega.
pub fn ula_steering(nt: usize, omega: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(nt, 1, |k, _| Complex64::from_polar(1.0, k as f64 * omega))
}

/// Planar-array steering vector `a(v) (x) a(u)`, with `a(u)` of length m1.
/// Element `q*m1 + p` equals `exp(j*(p*u + q*v))`.
pub fn upa_steering(geometry: &ArrayGeometry, u: f64, v: f64) -> ComplexMatrix {
    kron(&ula_steering(geometry.m2, v), &ula_steering(geometry.m1, u))
}

/// Impulse response of the path on tap `tap`: `alpha * e_r * e_t^H`.
/// A tap with no path maps to the zero matrix.
pub fn cir_tap(link: &LinkChannel, geometry: &ArrayGeometry, tap: usize) -> ComplexMatrix {
    let n_r = geometry.n_r();
    match link.paths.iter().find(|p| p.tap == tap) {
        None => ComplexMatrix::zeros(n_r, geometry.nt),
        Some(path) => {
            let (u, v) = path.spatial_frequencies(geometry);
            let e_r = upa_steering(geometry, u, v);
            let e_t = ula_steering(geometry.nt, path.tx_frequency(geometry));
            (&e_r.scale(path.gain) * &e_t.adjoint()).scale(Complex64::ONE)
        }
    }
}

/// Channel transfer function at subcarrier `k`: the DFT-weighted tap sum
/// `sum_l C(l) exp(-j*2*pi*k*l / n_c)`.
pub fn ctf(link: &LinkChannel, geometry: &ArrayGeometry, k: usize, n_c: usize) -> ComplexMatrix {
    assert!(k < n_c, "subcarrier index {k} out of range for N_c = {n_c}");
    let n_r = geometry.n_r();
    let mut h = ComplexMatrix::zeros(n_r, geometry.nt);
    for path in &link.paths {
        let (u, v) = path.spatial_frequencies(geometry);
        let e_r = upa_steering(geometry, u, v);
        let e_t = ula_steering(geometry.nt, path.tx_frequency(geometry));
        let twiddle =
            Complex64::from_polar(1.0, -2.0 * PI * (k as f64) * (path.tap as f64) / n_c as f64);
        h = &h + &(&e_r.scale(path.gain * twiddle) * &e_t.adjoint());
    }
    h
}

/// Steering matrix A = [e_r(0) .. e_r(L-1)] of a link (N_r x L).
pub fn steering_matrix(link: &LinkChannel, geometry: &ArrayGeometry) -> ComplexMatrix {
    let n_r = geometry.n_r();
    let l = link.num_paths();
    let mut a = ComplexMatrix::zeros(n_r, l);
    for (idx, path) in link.paths.iter().enumerate() {
        let (u, v) = path.spatial_frequencies(geometry);
        let col = upa_steering(geometry, u, v);
        for r in 0..n_r {
            a[(r, idx)] = col[(r, 0)];
        }
    }
    a
}

/// Transmit steering matrix B(k) = [e_t(0)*w_0 .. e_t(L-1)*w_{L-1}] with the
/// tap DFT phases folded in (N_t x L).
pub fn tx_steering_matrix(
    link: &LinkChannel,
    geometry: &ArrayGeometry,
    k: usize,
    n_c: usize,
) -> ComplexMatrix {
    let l = link.num_paths();
    let mut b = ComplexMatrix::zeros(geometry.nt, l);
    for (idx, path) in link.paths.iter().enumerate() {
        let col = ula_steering(geometry.nt, path.tx_frequency(geometry));
        let twiddle =
            Complex64::from_polar(1.0, -2.0 * PI * (k as f64) * (path.tap as f64) / n_c as f64);
        for r in 0..geometry.nt {
            b[(r, idx)] = col[(r, 0)] * twiddle;
        }
    }
    b
}

/// Power-law large-scale fading: `(distance/ref)^(-exponent)`, with distances
/// inside the reference radius clamped to the reference (near-field guard).
pub fn large_scale(distance_m: f64, exponent: f64, ref_distance_m: f64) -> f64 {
    let d = distance_m.max(ref_distance_m);
    (d / ref_distance_m).powf(-exponent)
}

/// Flat-top hexagon membership test, circumradius `r`, centered at origin.
fn in_hexagon(x: f64, y: f64, r: f64) -> bool {
    let sqrt3 = 3.0_f64.sqrt();
    y.abs() <= sqrt3 / 2.0 * r && sqrt3 * x.abs() + y.abs() <= sqrt3 * r
}

/// Standard circularly-symmetric complex Gaussian with the given variance.
pub fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draws a random multi-cell scenario; deterministic for a given generator state.
///
/// Layout: center cell at the origin plus, for G = 7, six neighbors at
/// center spacing sqrt(3) * radius. Users are placed uniformly in each
/// hexagon by rejection sampling. Per link, each path gets an i.i.d. complex
/// Gaussian gain and angles drawn uniformly from the configured supports.
pub fn draw_scenario(
    config: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<NetworkScenario, ChannelError> {
    config.validate()?;
    let g = config.cells;
    let j = config.users_per_cell;
    let r = config.cell_radius_m;

    let mut bs_positions = vec![(0.0, 0.0)];
    if g == 7 {
        let spacing = 3.0_f64.sqrt() * r;
        for i in 0..6 {
            let angle = PI / 6.0 + i as f64 * PI / 3.0;
            bs_positions.push((spacing * angle.cos(), spacing * angle.sin()));
        }
    }

    let mut user_positions = Vec::with_capacity(g);
    for cell in 0..g {
        let (cx, cy) = bs_positions[cell];
        let mut users = Vec::with_capacity(j);
        while users.len() < j {
            let x = rng.random_range(-r..r);
            let y = rng.random_range(-r..r);
            if in_hexagon(x, y, r) {
                users.push((cx + x, cy + y));
            }
        }
        user_positions.push(users);
    }

    let l = config.paths_per_link;
    let mut links = Vec::with_capacity(g * j * g);
    for user_cell in 0..g {
        for user in 0..j {
            let (ux, uy) = user_positions[user_cell][user];
            let serving_distance = {
                let (bx, by) = bs_positions[user_cell];
                ((ux - bx).powi(2) + (uy - by).powi(2)).sqrt()
            };
            let serving_lambda = large_scale(
                serving_distance,
                config.pathloss_exponent,
                config.pathloss_ref_distance_m,
            );
            for bs in 0..g {
                let (bx, by) = bs_positions[bs];
                let distance = ((ux - bx).powi(2) + (uy - by).powi(2)).sqrt();
                let mut lambda = large_scale(
                    distance,
                    config.pathloss_exponent,
                    config.pathloss_ref_distance_m,
                );
                if config.normalize_serving_links {
                    lambda /= serving_lambda;
                }
                let mut paths = Vec::with_capacity(l);
                for tap in 0..l {
                    paths.push(PathParams {
                        tap,
                        gain: complex_gaussian(rng, config.gain_variance),
                        elevation: rng
                            .random_range(config.elevation_range.0..config.elevation_range.1),
                        azimuth: rng.random_range(config.azimuth_range.0..config.azimuth_range.1),
                        dod: rng.random_range(config.dod_range.0..config.dod_range.1),
                    });
                }
                links.push(LinkChannel { paths, large_scale: lambda });
            }
        }
    }

    Ok(NetworkScenario { config: config.clone(), bs_positions, user_positions, links })
}
