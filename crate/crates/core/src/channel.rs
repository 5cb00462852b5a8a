//! Lambertian line-of-sight channel gains and receiver noise.
//!
//! Gains follow the generalized Lambertian emission model: the LED radiates
//! with intensity proportional to cos^rho of the irradiation angle, the PD
//! collects over its physical area within a concentrator-limited field of
//! view, and the gain falls off with the inverse square of distance.
//! Receiver noise is the sum of shot noise (signal plus background) and the
//! two thermal terms of a FET transimpedance front end.

use crate::access::AccessState;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point3};
use crate::linalg::{norm2, Mat};

/// Electron charge, coulombs.
pub const ELECTRON_CHARGE: f64 = 1.602e-19;
/// Boltzmann constant, joules per kelvin.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Transmitter / receiver optics and front-end electrical parameters.
/// All values are SI; scenario files convert from customary units at parse.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsConfig {
    /// LED semi-angle at half power, degrees.
    pub semi_angle_half_power_deg: f64,
    /// Receiver field-of-view half width, degrees.
    pub fov_deg: f64,
    /// PD physical detector area, m^2.
    pub detector_area_m2: f64,
    /// Optical filter gain (dimensionless).
    pub optical_filter_gain: f64,
    /// Concentrator refractive index (dimensionless).
    pub refractive_index: f64,
    /// Detector responsivity, A/W.
    pub responsivity: f64,
    /// Per-device transmit power, W.
    pub tx_power_w: f64,
    /// System bandwidth, Hz.
    pub bandwidth_hz: f64,
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.semi_angle_half_power_deg > 0.0 && self.semi_angle_half_power_deg < 90.0) {
            return Err(Error::invalid(
                "semi_angle_half_power_deg",
                "must lie strictly between 0 and 90 degrees",
            ));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 90.0) {
            return Err(Error::invalid("fov_deg", "must lie in (0, 90] degrees"));
        }
        for (name, v) in [
            ("detector_area_m2", self.detector_area_m2),
            ("optical_filter_gain", self.optical_filter_gain),
            ("refractive_index", self.refractive_index),
            ("responsivity", self.responsivity),
            ("tx_power_w", self.tx_power_w),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("optics", format!("{name} must be strictly positive")));
            }
        }
        Ok(())
    }
}

/// Shot- and thermal-noise parameters of the FET transimpedance receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    /// Background photocurrent, A.
    pub background_current_a: f64,
    /// Second Personick integral (dimensionless).
    pub personick_i2: f64,
    /// Third Personick integral (dimensionless).
    pub personick_i3: f64,
    /// Absolute temperature, K.
    pub temperature_k: f64,
    /// Open-loop voltage gain (dimensionless).
    pub open_loop_gain: f64,
    /// FET transconductance, S.
    pub fet_transconductance_s: f64,
    /// FET channel noise factor (dimensionless).
    pub fet_noise_factor: f64,
    /// Fixed PD capacitance per unit area, F/m^2.
    pub capacitance_f_per_m2: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            background_current_a: 5.1e-3,
            personick_i2: 0.562,
            personick_i3: 0.0868,
            temperature_k: 295.0,
            open_loop_gain: 10.0,
            fet_transconductance_s: 30e-3,
            fet_noise_factor: 1.5,
            // 112 pF/cm^2 in SI.
            capacitance_f_per_m2: 112e-12 / 1e-4,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("background_current_a", self.background_current_a),
            ("personick_i2", self.personick_i2),
            ("personick_i3", self.personick_i3),
            ("temperature_k", self.temperature_k),
            ("open_loop_gain", self.open_loop_gain),
            ("fet_transconductance_s", self.fet_transconductance_s),
            ("fet_noise_factor", self.fet_noise_factor),
            ("capacitance_f_per_m2", self.capacitance_f_per_m2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("noise", format!("{name} must be strictly positive")));
            }
        }
        Ok(())
    }
}

/// How the received optical power entering the shot-noise term is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePowerMode {
    /// Power of the devices active in the state under evaluation.
    PerState,
    /// Conservative fixed alternative: all devices transmitting at once.
    AllDevicesWorstCase,
}

/// M x N matrix of LOS gains; entry (i, j) couples device j to PD i.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    gains: Mat,
}

impl ChannelMatrix {
    pub fn new(gains: Mat) -> Self {
        ChannelMatrix { gains }
    }

    pub fn m_pds(&self) -> usize {
        self.gains.rows()
    }

    pub fn n_devices(&self) -> usize {
        self.gains.cols()
    }

    pub fn gain(&self, pd: usize, device: usize) -> f64 {
        self.gains[(pd, device)]
    }

    /// Channel column of one device across all PDs.
    pub fn device_column(&self, device: usize) -> Vec<f64> {
        self.gains.col(device)
    }

    /// Euclidean norm of a device's channel column.
    pub fn column_norm(&self, device: usize) -> f64 {
        norm2(&self.gains.col(device))
    }

    pub fn as_mat(&self) -> &Mat {
        &self.gains
    }
}

/// Lambertian emission order from the half-power semi-angle.
///
/// The canonical 60-degree LED gives order 1.
pub fn lambertian_order(semi_angle_half_power_deg: f64) -> Result<f64> {
    if !(semi_angle_half_power_deg > 0.0 && semi_angle_half_power_deg < 90.0) {
        return Err(Error::invalid(
            "semi_angle_half_power_deg",
            format!("{} is outside (0, 90)", semi_angle_half_power_deg),
        ));
    }
    let c = semi_angle_half_power_deg.to_radians().cos();
    Ok(-std::f64::consts::LN_2 / c.ln())
}

/// Optical concentrator gain: n0^2 / sin^2(fov) inside the field of view,
/// zero outside.
pub fn concentrator_gain(incidence_deg: f64, fov_deg: f64, refractive_index: f64) -> f64 {
    if incidence_deg > fov_deg {
        0.0
    } else {
        let s = fov_deg.to_radians().sin();
        refractive_index * refractive_index / (s * s)
    }
}

/// LOS gain between one device LED and one PD.
///
/// Angles are derived from the two orientation normals; the gain is zero
/// whenever the PD sees the device outside its field of view or either
/// element faces away from the other.
pub fn los_gain(
    device_pos: Point3,
    pd_pos: Point3,
    device_normal: Point3,
    pd_normal: Point3,
    optics: &OpticsConfig,
) -> Result<f64> {
    let to_pd = pd_pos.sub(device_pos);
    let d = to_pd.norm();
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let cos_irradiation = to_pd.dot(device_normal) / d;
    let cos_incidence = -to_pd.dot(pd_normal) / d;
    if cos_irradiation <= 0.0 || cos_incidence <= 0.0 {
        return Ok(0.0);
    }
    let fov_cos = optics.fov_deg.to_radians().cos();
    if cos_incidence < fov_cos {
        return Ok(0.0);
    }
    let rho = lambertian_order(optics.semi_angle_half_power_deg)?;
    let fov_sin = optics.fov_deg.to_radians().sin();
    let conc = optics.refractive_index * optics.refractive_index / (fov_sin * fov_sin);
    let h = (rho + 1.0) * optics.detector_area_m2 * optics.optical_filter_gain
        / (2.0 * std::f64::consts::PI * d * d)
        * conc
        * cos_irradiation.powf(rho)
        * cos_incidence;
    Ok(h)
}

/// Assemble the full M x N channel matrix for a geometry.
pub fn channel_matrix(geometry: &Geometry, optics: &OpticsConfig) -> Result<ChannelMatrix> {
    geometry.validate()?;
    optics.validate()?;
    let m = geometry.m_pds();
    let n = geometry.n_devices();
    let mut gains = Mat::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            gains[(i, j)] = los_gain(
                geometry.device_positions[j],
                geometry.pd_positions[i],
                geometry.device_orientation,
                geometry.pd_orientation,
                optics,
            )?;
        }
    }
    Ok(ChannelMatrix::new(gains))
}

/// Received optical power at the coordinator for one access state, averaged
/// over the PD array so one noise variance is shared by all PDs.
pub fn received_optical_power(h: &ChannelMatrix, state: &AccessState, tx_power_w: f64) -> f64 {
    let m = h.m_pds() as f64;
    let mut sum = 0.0;
    for j in state.active_devices() {
        for i in 0..h.m_pds() {
            sum += h.gain(i, j);
        }
    }
    tx_power_w * sum / m
}

/// Receiver noise variance split into its physical terms, all in A^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseComponents {
    /// Shot noise driven by the received signal power.
    pub shot_signal: f64,
    /// Shot noise from the background current.
    pub shot_background: f64,
    /// Thermal noise of the feedback resistor.
    pub thermal_feedback: f64,
    /// Thermal noise of the FET channel.
    pub thermal_fet: f64,
}

impl NoiseComponents {
    pub fn total(&self) -> f64 {
        self.shot_signal + self.shot_background + self.thermal_feedback + self.thermal_fet
    }
}

/// Term-by-term receiver noise at the given received optical power.
pub fn noise_components(
    received_power_w: f64,
    optics: &OpticsConfig,
    noise: &NoiseConfig,
) -> NoiseComponents {
    let b = optics.bandwidth_hz;
    let shot_signal = 2.0 * ELECTRON_CHARGE * optics.responsivity * received_power_w * b;
    let shot_background =
        2.0 * ELECTRON_CHARGE * noise.background_current_a * noise.personick_i2 * b;
    let da = noise.capacitance_f_per_m2 * optics.detector_area_m2;
    let thermal_feedback = 8.0 * std::f64::consts::PI * BOLTZMANN * noise.temperature_k
        / noise.open_loop_gain
        * da
        * noise.personick_i2
        * b
        * b;
    let thermal_fet = 16.0
        * std::f64::consts::PI
        * std::f64::consts::PI
        * BOLTZMANN
        * noise.temperature_k
        * noise.fet_noise_factor
        / noise.fet_transconductance_s
        * da
        * da
        * noise.personick_i3
        * b
        * b
        * b;
    NoiseComponents {
        shot_signal,
        shot_background,
        thermal_feedback,
        thermal_fet,
    }
}

/// Total receiver noise variance in A^2: shot (signal + background) plus the
/// two thermal terms. Strictly positive even at zero received power.
pub fn noise_variance(received_power_w: f64, optics: &OpticsConfig, noise: &NoiseConfig) -> f64 {
    noise_components(received_power_w, optics, noise).total()
}
