//! Fisher information of the channel parameters under pilot transmission,
//! transformation to the position domain, and the squared position error
//! bound (SPEB).
//!
//! The channel parameter vector of one terminal is ordered
//! `[theta_x, theta_y, tau, nu, alpha_R, alpha_I]`; the transformed vector is
//! `[p (3), alpha_R, alpha_I]`.

use nalgebra::{Matrix3x4, Vector3};

use crate::channel::{
    array_response, array_response_derivatives, ChannelParams, StatCsi, SubcarrierSet,
};
use crate::comm_metrics::PrecoderSet;
use crate::error::IcalError;
use crate::scenario::{rotation_matrix, SatelliteState, SystemConfig, SPEED_OF_LIGHT};
use crate::{C64, CMat, CVec, RMat};

/// Number of channel parameters per terminal.
pub const NUM_ETA: usize = 6;

/// Fisher information and derived localization bounds for one terminal.
#[derive(Debug, Clone)]
pub struct FimBundle {
    /// Channel-domain FIM, 6x6 symmetric PSD.
    pub j_eta: RMat,
    /// Transformation `Gamma = blkdiag(Xi, I_2)`, 5x6.
    pub gamma: RMat,
    /// Position-domain FIM `Gamma J Gamma^T`, 5x5.
    pub j_etabar: RMat,
    /// SPEB in m^2; infinite when the transformed FIM is singular.
    pub speb_m2: f64,
    /// Numerical rank of the channel-domain FIM fell below 6.
    pub rank_deficient: bool,
}

/// Real value of the Hermitian quadratic form `v^T M v^*`.
///
/// Raises [`IcalError::NonRealQuadraticForm`] when the imaginary residual
/// exceeds `1e-8` relative to the magnitude.
pub fn hermitian_quadratic_form(v: &CVec, m: &CMat) -> Result<f64, IcalError> {
    let mv = m * v.conjugate();
    let q: C64 = v.iter().zip(mv.iter()).map(|(a, b)| a * b).sum();
    let scale = q.norm().max(1e-300);
    if q.im.abs() / scale > 1e-8 {
        return Err(IcalError::NonRealQuadraticForm(q.im.abs() / scale));
    }
    Ok(q.re)
}

/// Equivalent noise power seen by the estimator of terminal `k` at retained
/// subcarrier position `n_pos`:
/// `N_eq = (gamma / (1 + kappa)) v^T W W^H v^* + N0`.
pub fn equivalent_noise(
    stat: &StatCsi,
    w: &PrecoderSet,
    k: usize,
    n_pos: usize,
    n0: f64,
) -> Result<f64, IcalError> {
    let ut = &stat.uts[k];
    let v = &ut.responses[n_pos].vector;
    let wn = &w.w[n_pos];
    let q = hermitian_quadratic_form(v, &(wn * wn.adjoint()))?;
    Ok(ut.nlos_power() * q + n0)
}

/// Analytic derivatives of the LoS channel `h = g_los v` with respect to the
/// six channel parameters, at CP-inclusive symbol `m` and 1-based subcarrier
/// `n`.
pub fn channel_derivatives(
    params: &ChannelParams,
    m: usize,
    n: usize,
    cfg: &SystemConfig,
) -> [CVec; 6] {
    let v = array_response(params.theta_x_rad, params.theta_y_rad, n, cfg).vector;
    let (dvx, dvy) = array_response_derivatives(params.theta_x_rad, params.theta_y_rad, n, cfg);
    let two_pi = 2.0 * std::f64::consts::PI;
    let phase = two_pi
        * (params.doppler_hz * m as f64 * cfg.symbol_duration_s()
            - n as f64 * cfg.subcarrier_spacing_hz * params.delay_s);
    let rot = C64::from_polar(1.0, phase);
    let g = params.alpha * rot;
    let j = C64::new(0.0, 1.0);
    [
        dvx.map(|x| x * g),
        dvy.map(|x| x * g),
        v.map(|x| x * g * (-j * two_pi * n as f64 * cfg.subcarrier_spacing_hz)),
        v.map(|x| x * g * (j * two_pi * m as f64 * cfg.symbol_duration_s())),
        v.map(|x| x * rot),
        v.map(|x| x * rot * j),
    ]
}

/// Channel-domain FIM of one terminal under precoded pilots with identity
/// pilot covariance:
/// `[J]_{ij} = sum_m sum_n (2 / N_eq) Re(a_i^H a_j)`, `a_i = W_n^T dh/deta_i`.
///
/// Subcarrier subsampling rescales each retained term by the grid weight.
pub fn channel_fim(
    params: &ChannelParams,
    nlos_power: f64,
    w: &PrecoderSet,
    subcarriers: &SubcarrierSet,
    pilots: &[usize],
    n0: f64,
    cfg: &SystemConfig,
) -> Result<RMat, IcalError> {
    assert!(!pilots.is_empty(), "pilot symbol set must be non-empty");
    let two_pi = 2.0 * std::f64::consts::PI;
    let t_sym = cfg.symbol_duration_s();
    let mut j_eta = RMat::zeros(NUM_ETA, NUM_ETA);
    for (n_pos, &n) in subcarriers.indices.iter().enumerate() {
        let wn = &w.w[n_pos];
        let v = array_response(params.theta_x_rad, params.theta_y_rad, n, cfg).vector;
        let (dvx, dvy) =
            array_response_derivatives(params.theta_x_rad, params.theta_y_rad, n, cfg);
        let n_eq = nlos_power * hermitian_quadratic_form(&v, &(wn * wn.adjoint()))? + n0;
        // K-dimensional images of the three base vectors through W_n^T; the
        // m-dependence enters only through scalars.
        let r_v = wn.transpose() * &v;
        let r_x = wn.transpose() * &dvx;
        let r_y = wn.transpose() * &dvy;
        let base = [&r_v, &r_x, &r_y];
        let mut gram = [[C64::new(0.0, 0.0); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                gram[a][b] = base[a].dotc(base[b]);
            }
        }
        let delay_phase = -two_pi * n as f64 * cfg.subcarrier_spacing_hz * params.delay_s;
        let j = C64::new(0.0, 1.0);
        let d_tau = -j * two_pi * n as f64 * cfg.subcarrier_spacing_hz;
        let scale = subcarriers.weight * 2.0 / n_eq;
        for &m in pilots {
            let phase = two_pi * params.doppler_hz * m as f64 * t_sym + delay_phase;
            let rot = C64::from_polar(1.0, phase);
            let g = params.alpha * rot;
            let d_nu = j * two_pi * m as f64 * t_sym;
            // (scalar, base index) per parameter, parameter order
            // [theta_x, theta_y, tau, nu, alpha_R, alpha_I].
            let coef: [(C64, usize); NUM_ETA] = [
                (g, 1),
                (g, 2),
                (g * d_tau, 0),
                (g * d_nu, 0),
                (rot, 0),
                (rot * j, 0),
            ];
            for i in 0..NUM_ETA {
                for jj in i..NUM_ETA {
                    let inner = coef[i].0.conj() * coef[jj].0 * gram[coef[i].1][coef[jj].1];
                    j_eta[(i, jj)] += scale * inner.re;
                }
            }
        }
    }
    for i in 0..NUM_ETA {
        for jj in 0..i {
            j_eta[(i, jj)] = j_eta[(jj, i)];
        }
    }
    Ok(j_eta)
}

/// Position Jacobian `Xi = [d theta_x/dp, d theta_y/dp, d tau/dp, d nu/dp]`.
pub fn jacobian_xi(
    p: &Vector3<f64>,
    p_dot: &Vector3<f64>,
    sat: &SatelliteState,
    carrier_freq_hz: f64,
) -> Result<Matrix3x4<f64>, IcalError> {
    let r = rotation_matrix(sat.orientation_rad);
    let offset = p - sat.position_m;
    let range = offset.norm();
    if range == 0.0 {
        return Err(IcalError::DegenerateGeometry("terminal at satellite position".into()));
    }
    let pr = r.transpose() * offset;
    let horiz_sq = pr.x * pr.x + pr.z * pr.z;
    if horiz_sq == 0.0 {
        return Err(IcalError::DegenerateGeometry(
            "position Jacobian undefined on the array y axis".into(),
        ));
    }
    let r1 = r.column(0).into_owned();
    let r2 = r.column(1).into_owned();
    let r3 = r.column(2).into_owned();
    let d_theta_x = (r3 * pr.x - r1 * pr.z) / horiz_sq;
    let d_theta_y = (offset * pr.y - r2 * (range * range)) / (range * range * horiz_sq.sqrt());
    let d_tau = offset / (SPEED_OF_LIGHT * range);
    let radial = p_dot.dot(&offset);
    let d_nu = (offset * radial - p_dot * (range * range))
        * (carrier_freq_hz / (SPEED_OF_LIGHT * range * range * range));
    Ok(Matrix3x4::from_columns(&[d_theta_x, d_theta_y, d_tau, d_nu]))
}

/// Transformation `Gamma = blkdiag(Xi, I_2)` as a 5x6 matrix.
pub fn gamma_from_xi(xi: &Matrix3x4<f64>) -> RMat {
    let mut g = RMat::zeros(5, NUM_ETA);
    for r in 0..3 {
        for c in 0..4 {
            g[(r, c)] = xi[(r, c)];
        }
    }
    g[(3, 4)] = 1.0;
    g[(4, 5)] = 1.0;
    g
}

/// Position-domain FIM `Gamma J Gamma^T` and the SPEB
/// `Tr([J_etabar^{-1}]_{1:3,1:3})`; a singular transformed FIM yields an
/// infinite SPEB rather than an error.
pub fn transform_and_speb(j_eta: &RMat, xi: &Matrix3x4<f64>) -> (RMat, f64) {
    let gamma = gamma_from_xi(xi);
    let j_bar = &gamma * j_eta * gamma.transpose();
    // Kill rounding asymmetry before factorization.
    let j_bar = (&j_bar + j_bar.transpose()) / 2.0;
    let speb = speb_from_fim(&j_bar);
    (j_bar, speb)
}

/// Inverse of a symmetric positive definite matrix with diagonal
/// pre-scaling, which keeps the factorization accurate when blocks live on
/// wildly different scales (delay/Doppler versus amplitude information).
pub fn spd_inverse(m: &RMat) -> Option<RMat> {
    let n = m.nrows();
    let mut d = vec![0.0; n];
    for i in 0..n {
        if !(m[(i, i)] > 0.0) || !m[(i, i)].is_finite() {
            return None;
        }
        d[i] = 1.0 / m[(i, i)].sqrt();
    }
    let scaled = RMat::from_fn(n, n, |r, c| m[(r, c)] * d[r] * d[c]);
    let inv = scaled.cholesky()?.inverse();
    Some(RMat::from_fn(n, n, |r, c| inv[(r, c)] * d[r] * d[c]))
}

/// SPEB from a position-domain FIM: trace of the position block of the
/// inverse, or infinity when the matrix is not positive definite.
pub fn speb_from_fim(j_bar: &RMat) -> f64 {
    match spd_inverse(j_bar) {
        Some(inv) => inv[(0, 0)] + inv[(1, 1)] + inv[(2, 2)],
        None => f64::INFINITY,
    }
}

/// Average position error bound in meters, `sqrt(sum_k speb_k / K)`.
pub fn apeb(spebs: &[f64]) -> f64 {
    assert!(!spebs.is_empty());
    (spebs.iter().sum::<f64>() / spebs.len() as f64).sqrt()
}

/// FIM bundle for terminal `k` of a scenario under the given precoders.
pub fn fim_bundle(
    stat: &StatCsi,
    k: usize,
    w: &PrecoderSet,
    pilots: &[usize],
    n0: f64,
    cfg: &SystemConfig,
) -> Result<FimBundle, IcalError> {
    let ut = &stat.uts[k];
    let j_eta = channel_fim(&ut.params, ut.nlos_power(), w, &stat.subcarriers, pilots, n0, cfg)?;
    let xi = jacobian_xi(
        &ut.terminal.position_m,
        &ut.terminal.velocity_mps,
        &stat.sat,
        cfg.carrier_freq_hz,
    )?;
    let (j_etabar, speb_m2) = transform_and_speb(&j_eta, &xi);
    let rank_deficient = fim_rank(&j_eta) < NUM_ETA;
    Ok(FimBundle { j_eta, gamma: gamma_from_xi(&xi), j_etabar, speb_m2, rank_deficient })
}

/// Per-terminal SPEB list for the whole scenario.
pub fn sum_speb(
    stat: &StatCsi,
    w: &PrecoderSet,
    pilots: &[usize],
    n0: f64,
    cfg: &SystemConfig,
) -> Result<Vec<f64>, IcalError> {
    (0..stat.num_uts()).map(|k| Ok(fim_bundle(stat, k, w, pilots, n0, cfg)?.speb_m2)).collect()
}

/// Numerical rank of a symmetric matrix, counting eigenvalues above
/// `1e-10 * max |lambda|`.
pub fn fim_rank(j: &RMat) -> usize {
    let eig = j.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if max == 0.0 {
        return 0;
    }
    eig.iter().filter(|&&l| l > 1e-10 * max).count()
}

/// Minimum-eigenvalue PSD check for symmetric matrices.
pub fn is_psd(m: &RMat, tol: f64) -> bool {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    eig.iter().all(|&l| l >= -tol * (1.0 + max))
}
