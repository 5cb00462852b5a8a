//! Successive interference cancellation over a feasible access state:
//! decode ordering, per-layer ZF or MMSE SINRs, and Shannon rates.
//!
//! Decoding is layered. At layer `l` the signals decoded so far have been
//! subtracted, so the residual channel holds the columns of the devices
//! decoded at layers `l..tau`. Cancellation is ideal (no error propagation),
//! and all signals are real-valued.

use crate::access::AccessState;
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, pinv_normal_equations, Mat, RCOND_THRESHOLD};

/// Receive filter applied at each SIC layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Zf,
    Mmse,
}

/// Noise term used in the ZF SINR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZfNoiseMode {
    /// Squared Euclidean norm of the filter row: the post-filter noise power
    /// under white noise.
    RowNorm,
    /// Squared sum of the filter coefficients, kept as a compatibility mode.
    CoefficientSum,
}

/// Decode order of a state's active devices; layer 0 is decoded first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOrder {
    layers: Vec<usize>,
}

impl DecodeOrder {
    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Layer index at which `device` is decoded.
    pub fn layer_of(&self, device: usize) -> Option<usize> {
        self.layers.iter().position(|&d| d == device)
    }
}

/// Per-device SINRs of one feasible state, stored in decode-layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSinrs {
    filter: FilterKind,
    /// (device index, SINR), layer 0 first.
    entries: Vec<(usize, f64)>,
}

impl LayerSinrs {
    pub fn filter(&self) -> FilterKind {
        self.filter
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn sinr_of(&self, device: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|&&(d, _)| d == device)
            .map(|&(_, s)| s)
    }
}

fn check_feasible(h: &ChannelMatrix, state: &AccessState) -> Result<()> {
    let active = state.active_count();
    if active as usize > h.m_pds() {
        return Err(Error::InfeasibleState {
            state_bits: state.bits(),
            active,
            mpr: h.m_pds(),
        });
    }
    Ok(())
}

/// Decode order for a feasible state: the device with the higher LOS channel
/// gain (Euclidean column norm) is decoded first; ties fall back to the
/// lower device index.
pub fn decode_order(h: &ChannelMatrix, state: &AccessState) -> Result<DecodeOrder> {
    check_feasible(h, state)?;
    let mut layers: Vec<usize> = state.active_devices().collect();
    layers.sort_by(|&a, &b| {
        h.column_norm(b)
            .partial_cmp(&h.column_norm(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(DecodeOrder { layers })
}

/// Residual channel matrix at `layer`: columns of the devices decoded at
/// this layer and after, in decode order.
fn residual_matrix(h: &ChannelMatrix, order: &DecodeOrder, layer: usize) -> Mat {
    let cols: Vec<Vec<f64>> = order.layers()[layer..]
        .iter()
        .map(|&d| h.device_column(d))
        .collect();
    Mat::from_columns(&cols)
}

/// Per-layer SINRs under zero-forcing: the filter row is the first row of
/// the residual matrix's pseudo-inverse, leaving only noise in the
/// denominator.
pub fn zf_sinr(
    h: &ChannelMatrix,
    state: &AccessState,
    order: &DecodeOrder,
    sigma2: f64,
    responsivity: f64,
    tx_power_w: f64,
    noise_mode: ZfNoiseMode,
) -> Result<LayerSinrs> {
    check_feasible(h, state)?;
    let signal = responsivity * responsivity * tx_power_w * tx_power_w;
    let mut entries = Vec::with_capacity(order.len());
    for layer in 0..order.len() {
        let residual = residual_matrix(h, order, layer);
        let w = pinv_normal_equations(&residual).map_err(|_| Error::SingularChannel {
            layer,
            state_bits: state.bits(),
            rcond: residual.gram().rcond_inf(),
            threshold: RCOND_THRESHOLD,
        })?;
        let w_row = w.row(0);
        let noise_factor = match noise_mode {
            ZfNoiseMode::RowNorm => dot(w_row, w_row),
            ZfNoiseMode::CoefficientSum => {
                let s: f64 = w_row.iter().sum();
                s * s
            }
        };
        let device = order.layers()[layer];
        // W h_j = 1 for the zero-forcing row, so the signal term reduces to
        // xi^2 P_t^2.
        let gamma = signal / (sigma2 * noise_factor);
        entries.push((device, gamma));
    }
    Ok(LayerSinrs {
        filter: FilterKind::Zf,
        entries,
    })
}

/// Per-layer SINRs under MMSE filtering: gamma = xi^2 P_t^2 h^T C^-1 h with
/// C the covariance of the not-yet-decoded interference plus noise.
pub fn mmse_sinr(
    h: &ChannelMatrix,
    state: &AccessState,
    order: &DecodeOrder,
    sigma2: f64,
    responsivity: f64,
    tx_power_w: f64,
) -> Result<LayerSinrs> {
    check_feasible(h, state)?;
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", "noise variance must be strictly positive"));
    }
    let m = h.m_pds();
    let signal = responsivity * responsivity * tx_power_w * tx_power_w;
    let mut entries = Vec::with_capacity(order.len());
    for layer in 0..order.len() {
        let device = order.layers()[layer];
        let h_j = h.device_column(device);
        let mut cov = Mat::zeros(m, m);
        for i in 0..m {
            cov[(i, i)] = sigma2;
        }
        for &interferer in &order.layers()[layer + 1..] {
            let col = h.device_column(interferer);
            for a in 0..m {
                for b in 0..m {
                    cov[(a, b)] += signal * col[a] * col[b];
                }
            }
        }
        let rhs = Mat::from_columns(&[h_j.clone()]);
        let solved = cov.solve(&rhs).ok_or(Error::SingularChannel {
            layer,
            state_bits: state.bits(),
            rcond: 0.0,
            threshold: RCOND_THRESHOLD,
        })?;
        let gamma = signal * dot(&h_j, &solved.col(0));
        entries.push((device, gamma));
    }
    Ok(LayerSinrs {
        filter: FilterKind::Mmse,
        entries,
    })
}

/// Shannon rate per device, bits/s: B log2(1 + gamma). Returned in the same
/// decode-layer order as the SINRs.
pub fn layer_rates(sinrs: &LayerSinrs, bandwidth_hz: f64) -> Vec<(usize, f64)> {
    sinrs
        .entries()
        .iter()
        .map(|&(device, gamma)| (device, bandwidth_hz * (1.0 + gamma).log2()))
        .collect()
}
