//! Device model: heterogeneous device attributes, reliability criteria, and
//! Weibull failure-time sampling.
//!
//! A device's reliability is the product of three criteria: computing
//! capability (CPU speed times the fraction of the CPU available), weighted
//! availability (mean time between failures times remaining battery), and
//! remaining communication capacity (total enabled bandwidth minus the load
//! of existing connections). The criteria are combined as printed weighted
//! products; since a pure product rescales uniformly under any positive
//! weight change, the ranking of a device population is weight-invariant,
//! which is asserted as a test property rather than "fixed".

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::DeviceId;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("device `{device}` is invalid: {reason}")]
    InvalidDevice { device: DeviceId, reason: String },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Network interface kinds a device may expose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interface {
    Wifi,
    Ether,
}

/// A heterogeneous device: compute, battery, network, failure-model, and
/// execution-history attributes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: DeviceId,
    /// CPU speed in MIPS.
    pub cpu_speed_mips: f64,
    /// Fraction of the CPU available to offloaded work, in (0, 1].
    pub cpu_avail_fraction: f64,
    /// Remaining battery fraction in [0, 1].
    pub battery: f64,
    pub has_wifi: bool,
    pub has_ether: bool,
    /// WIFI bandwidth in MBps.
    pub bandwidth_wifi_mbps: f64,
    /// Ethernet bandwidth in MBps.
    pub bandwidth_ether_mbps: f64,
    /// Current network latency in seconds, applied per transfer.
    pub latency_s: f64,
    /// End of the device's participation window, in seconds of simulated
    /// time. Once it closes the device behaves as permanently failed.
    pub avail_time_s: f64,
    /// Mean time between failures in seconds.
    pub mtbf_s: f64,
    /// Data transfer rate consumed per existing connection, MBps.
    pub per_conn_rate_mbps: f64,
    /// Number of existing connections to other devices.
    pub conn_count: u32,
    /// Tasks this device has failed, from its execution history.
    pub tasks_failed: u32,
    /// Tasks this device has executed in total.
    pub tasks_total: u32,
    /// Number of directly connected peer devices.
    pub peers_connected: u32,
}

impl DeviceSpec {
    pub fn validate(&self, population: usize) -> Result<(), DeviceError> {
        let fail = |reason: String| DeviceError::InvalidDevice { device: self.id.clone(), reason };
        if !(self.cpu_speed_mips > 0.0) {
            return Err(fail(format!("cpu_speed_mips must be > 0, got {}", self.cpu_speed_mips)));
        }
        if !(self.cpu_avail_fraction > 0.0 && self.cpu_avail_fraction <= 1.0) {
            return Err(fail(format!(
                "cpu_avail_fraction must be in (0, 1], got {}",
                self.cpu_avail_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.battery) {
            return Err(fail(format!("battery must be in [0, 1], got {}", self.battery)));
        }
        if !(self.mtbf_s > 0.0) {
            return Err(fail(format!("mtbf_s must be > 0, got {}", self.mtbf_s)));
        }
        if self.tasks_failed > self.tasks_total {
            return Err(fail(format!(
                "tasks_failed ({}) exceeds tasks_total ({})",
                self.tasks_failed, self.tasks_total
            )));
        }
        if population > 0 && self.peers_connected as usize > population.saturating_sub(1) {
            return Err(fail(format!(
                "peers_connected ({}) exceeds population - 1 ({})",
                self.peers_connected,
                population - 1
            )));
        }
        Ok(())
    }

    /// Total bandwidth over enabled interfaces, MBps.
    pub fn total_bandwidth(&self) -> f64 {
        effective_link_speed(self, Interface::Wifi) + effective_link_speed(self, Interface::Ether)
    }
}

/// Two-parameter Weibull distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    /// Shape (dimensionless).
    pub shape: f64,
    /// Scale (seconds).
    pub scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Self {
        assert!(shape > 0.0 && scale > 0.0, "Weibull parameters must be positive");
        Self { shape, scale }
    }

    /// Weibull parameters with the given mean, holding the shape fixed.
    pub fn from_mean(shape: f64, mean: f64) -> Self {
        Self::new(shape, mean / gamma(1.0 + 1.0 / shape))
    }
}

/// Weight factors for the availability, replica-score, and reliability
/// products. Each group sums to 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightsConfig {
    pub avail_y: f64,
    pub avail_z: f64,
    pub score_y: f64,
    pub score_z: f64,
    pub score_lambda: f64,
    pub alpha_cpu: f64,
    pub alpha_batt: f64,
    pub alpha_conn: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        // Score weights follow the values used for the experiments; the
        // availability pair is a separate setting and defaults to an even split.
        Self {
            avail_y: 0.5,
            avail_z: 0.5,
            score_y: 0.2,
            score_z: 0.6,
            score_lambda: 0.2,
            alpha_cpu: 1.0 / 3.0,
            alpha_batt: 1.0 / 3.0,
            alpha_conn: 1.0 / 3.0,
        }
    }
}

impl WeightsConfig {
    pub fn validate(&self) -> Result<(), DeviceError> {
        const TOL: f64 = 1e-9;
        let groups: [(&str, &[f64]); 3] = [
            ("avail_y + avail_z", &[self.avail_y, self.avail_z]),
            ("score_y + score_z + score_lambda", &[self.score_y, self.score_z, self.score_lambda]),
            ("alpha_cpu + alpha_batt + alpha_conn", &[self.alpha_cpu, self.alpha_batt, self.alpha_conn]),
        ];
        for (name, ws) in groups {
            if ws.iter().any(|w| *w < 0.0) {
                return Err(DeviceError::InvalidWeights(format!("{name}: weights must be >= 0")));
            }
            let sum: f64 = ws.iter().sum();
            if (sum - 1.0).abs() > TOL {
                return Err(DeviceError::InvalidWeights(format!("{name} = {sum}, expected 1")));
            }
        }
        Ok(())
    }
}

/// The four per-device reliability criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityScores {
    pub capability: f64,
    pub availability: f64,
    pub comm_capacity: f64,
    pub reliability: f64,
}

/// Computing capability: CPU speed times the available CPU fraction.
pub fn computing_capability(dev: &DeviceSpec) -> f64 {
    dev.cpu_speed_mips * dev.cpu_avail_fraction
}

/// Weighted availability: `(Y * mtbf) * (Z * battery)`.
pub fn availability(dev: &DeviceSpec, w: &WeightsConfig) -> f64 {
    (w.avail_y * dev.mtbf_s) * (w.avail_z * dev.battery)
}

/// Remaining communication capacity: total enabled bandwidth minus the load
/// of existing connections, clamped at zero so oversubscription cannot flip
/// the sign of the reliability product.
pub fn communication_capacity(dev: &DeviceSpec) -> f64 {
    (dev.total_bandwidth() - dev.per_conn_rate_mbps * dev.conn_count as f64).max(0.0)
}

/// All four reliability criteria, with the combined score as the weighted
/// product `(a_cpu*C) * (a_batt*A) * (a_conn*mu)`.
pub fn reliability(dev: &DeviceSpec, w: &WeightsConfig) -> ReliabilityScores {
    let capability = computing_capability(dev);
    let avail = availability(dev, w);
    let comm = communication_capacity(dev);
    let reliability = (w.alpha_cpu * capability) * (w.alpha_batt * avail) * (w.alpha_conn * comm);
    ReliabilityScores { capability, availability: avail, comm_capacity: comm, reliability }
}

/// Throughput of one interface: the binary enabled indicator times its
/// bandwidth. Latency is additive per transfer, not folded in here.
pub fn effective_link_speed(dev: &DeviceSpec, interface: Interface) -> f64 {
    match interface {
        Interface::Wifi => {
            if dev.has_wifi {
                dev.bandwidth_wifi_mbps
            } else {
                0.0
            }
        }
        Interface::Ether => {
            if dev.has_ether {
                dev.bandwidth_ether_mbps
            } else {
                0.0
            }
        }
    }
}

/// Failure time for a given uniform draw `u` in [0, 1): the inverse-CDF
/// transform `t = scale * (-ln(1-u))^(1/shape)`.
pub fn failure_time_for_uniform(p: WeibullParams, u: f64) -> f64 {
    p.scale * (-(1.0 - u).ln()).powf(1.0 / p.shape)
}

/// Samples a failure inter-arrival time from the device's Weibull law.
pub fn sample_failure_time<R: Rng + ?Sized>(p: WeibullParams, rng: &mut R) -> f64 {
    failure_time_for_uniform(p, rng.gen::<f64>())
}

/// Distribution mean `scale * Gamma(1 + 1/shape)`, used as the MTBF.
pub fn weibull_mean(p: WeibullParams) -> f64 {
    p.scale * gamma(1.0 + 1.0 / p.shape)
}
