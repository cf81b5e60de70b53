//! Problem data and the energy/rate formulas of the system model.
//!
//! Units are fixed throughout the crate: seconds, Hz, watts, joules and bits.

use std::f64::consts::LN_2;

use crate::error::{invalid, Error, Result};
use crate::numerics::{min_eigpair, outer, ComplexVector, HermitianMatrix};

/// Relative slack allowed on the CPU frequency limit before a point is
/// declared latency-infeasible.
const FREQUENCY_SLACK: f64 = 1e-9;

/// Task and chip parameters of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserParams {
    /// Task size `R` in bits.
    pub task_bits: f64,
    /// CPU cycles per bit `C`.
    pub cycles_per_bit: f64,
    /// Effective switched capacitance `κ`.
    pub capacitance: f64,
    /// Transmitter circuit power `p_c` in W.
    pub circuit_power: f64,
    /// Maximum CPU frequency in Hz; may be infinite.
    pub max_frequency: f64,
    /// Distance to the access point in m.
    pub distance: f64,
}

impl UserParams {
    /// A user with the given task size and the default chip parameters
    /// (`C = 10³`, `κ = 10⁻²⁸`, `p_c = 10⁻⁴ W`, unlimited CPU, 5 m).
    pub fn with_task(task_bits: f64) -> Self {
        Self {
            task_bits,
            cycles_per_bit: 1e3,
            capacitance: 1e-28,
            circuit_power: 1e-4,
            max_frequency: f64::INFINITY,
            distance: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and non-negative, got {v}")))
            }
        };
        finite_nonneg("task_bits", self.task_bits)?;
        if !(self.cycles_per_bit.is_finite() && self.cycles_per_bit >= 1.0) {
            return Err(invalid("cycles_per_bit", "must be finite and at least 1"));
        }
        for (name, v) in [
            ("capacitance", self.capacitance),
            ("circuit_power", self.circuit_power),
            ("distance", self.distance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and positive, got {v}")));
            }
        }
        if !(self.max_frequency > 0.0) {
            return Err(invalid("max_frequency", "must be positive"));
        }
        Ok(())
    }

    /// Smallest number of offloaded bits compatible with the CPU limit:
    /// `max(0, R − T·f_max/C)`.
    pub fn min_offload_bits(&self, block_length: f64) -> f64 {
        if self.max_frequency.is_infinite() {
            return 0.0;
        }
        (self.task_bits - block_length * self.max_frequency / self.cycles_per_bit).max(0.0)
    }
}

/// Full parameterization of the energy-minimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Number of AP antennas `N`.
    pub antennas: usize,
    /// Block length `T` in s.
    pub block_length: f64,
    /// Offloading bandwidth `B` in Hz.
    pub bandwidth: f64,
    /// Receiver noise power `σ²` in W.
    pub noise_power: f64,
    /// Energy-harvesting efficiency `ζ`.
    pub eh_efficiency: f64,
    /// AP energy per offloaded bit `α` in J/bit.
    pub ap_energy_per_bit: f64,
    /// Capacity gap `Γ`; only `1` is supported.
    pub capacity_gap: f64,
    pub users: Vec<UserParams>,
}

impl SystemParams {
    /// `K` identical users with the default system constants
    /// (`N = 4`, `B = 2 MHz`, `σ² = 10⁻⁹ W`, `ζ = 0.3`, `α = 10⁻⁴ J/bit`).
    pub fn homogeneous(users: usize, block_length: f64, user: UserParams) -> Self {
        Self {
            antennas: 4,
            block_length,
            bandwidth: 2e6,
            noise_power: 1e-9,
            eh_efficiency: 0.3,
            ap_energy_per_bit: 1e-4,
            capacity_gap: 1.0,
            users: vec![user; users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(invalid("antennas", "must be at least 1"));
        }
        if self.users.is_empty() {
            return Err(invalid("users", "at least one user is required"));
        }
        for (name, v) in [
            ("block_length", self.block_length),
            ("bandwidth", self.bandwidth),
            ("noise_power", self.noise_power),
            ("ap_energy_per_bit", self.ap_energy_per_bit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and positive, got {v}")));
            }
        }
        if !(self.eh_efficiency > 0.0 && self.eh_efficiency <= 1.0) {
            return Err(invalid("eh_efficiency", "must lie in (0, 1]"));
        }
        if self.capacity_gap != 1.0 {
            return Err(invalid("capacity_gap", "only a capacity gap of 1 is supported"));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.validate().map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::InvalidParameter {
                    name: format!("user.{}.{name}", i + 1),
                    reason,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn beta(&self, rate: f64) -> f64 {
        beta(rate, self.noise_power, self.bandwidth)
    }

    pub fn beta_prime(&self, rate: f64) -> f64 {
        beta_prime(rate, self.noise_power, self.bandwidth)
    }
}

/// Downlink and uplink channels of all users.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    downlink: Vec<ComplexVector>,
    uplink: Vec<ComplexVector>,
    downlink_outer: Vec<HermitianMatrix>,
    uplink_gain: Vec<f64>,
    downlink_gain: Vec<f64>,
}

impl ChannelSet {
    /// `downlink[i]` is `h_i`, `uplink[i]` is `g_i`. Every uplink must be
    /// non-zero and every vector must have the same dimension.
    pub fn new(downlink: Vec<ComplexVector>, uplink: Vec<ComplexVector>) -> Result<Self> {
        if downlink.len() != uplink.len() || downlink.is_empty() {
            return Err(Error::Dimension(format!(
                "{} downlink and {} uplink channels",
                downlink.len(),
                uplink.len()
            )));
        }
        let n = downlink[0].dim();
        if downlink.iter().chain(&uplink).any(|v| v.dim() != n) {
            return Err(Error::Dimension("channel vectors differ in length".into()));
        }
        let uplink_gain: Vec<f64> = uplink.iter().map(ComplexVector::norm_sqr).collect();
        if let Some(i) = uplink_gain.iter().position(|&g| !(g > 0.0)) {
            return Err(invalid(format!("uplink[{i}]"), "uplink channel gain must be positive"));
        }
        Ok(Self {
            downlink_outer: downlink.iter().map(outer).collect(),
            downlink_gain: downlink.iter().map(ComplexVector::norm_sqr).collect(),
            downlink,
            uplink,
            uplink_gain,
        })
    }

    /// Checks the channel set against a parameter set.
    pub fn check_dims(&self, params: &SystemParams) -> Result<()> {
        if self.num_users() != params.num_users() || self.antennas() != params.antennas {
            return Err(Error::Dimension(format!(
                "channels are {}×{} but parameters ask for {} users and {} antennas",
                self.num_users(),
                self.antennas(),
                params.num_users(),
                params.antennas
            )));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.downlink.len()
    }

    pub fn antennas(&self) -> usize {
        self.downlink[0].dim()
    }

    /// `h_i`.
    pub fn downlink(&self, i: usize) -> &ComplexVector {
        &self.downlink[i]
    }

    /// `g_i`.
    pub fn uplink(&self, i: usize) -> &ComplexVector {
        &self.uplink[i]
    }

    /// `H_i = h_i h_iᴴ`.
    pub fn downlink_outer(&self, i: usize) -> &HermitianMatrix {
        &self.downlink_outer[i]
    }

    /// `‖h_i‖²`.
    pub fn downlink_gain(&self, i: usize) -> f64 {
        self.downlink_gain[i]
    }

    /// `g̃_i = ‖g_i‖²`.
    pub fn uplink_gain(&self, i: usize) -> f64 {
        self.uplink_gain[i]
    }
}

/// `β(x) = σ²(2^{x/B} − 1)`, the transmit power for rate `x` at unit gain.
pub fn beta(rate: f64, noise_power: f64, bandwidth: f64) -> f64 {
    noise_power * (rate * LN_2 / bandwidth).exp_m1()
}

/// `β′(x) = (σ² ln 2 / B)·2^{x/B}`.
pub fn beta_prime(rate: f64, noise_power: f64, bandwidth: f64) -> f64 {
    noise_power * LN_2 / bandwidth * (rate * LN_2 / bandwidth).exp()
}

/// `Tζ·tr(Q H_i)`.
pub fn harvested_energy(q: &HermitianMatrix, h_outer: &HermitianMatrix, block_length: f64, eh_efficiency: f64) -> f64 {
    block_length * eh_efficiency * q.trace_product(h_outer)
}

/// `(t/g̃)·β(ℓ/t) + p_c·t`; zero at `t = ℓ = 0` and infinite when `t = 0 < ℓ`.
pub fn offload_energy(time: f64, bits: f64, uplink_gain: f64, circuit_power: f64, params: &SystemParams) -> f64 {
    if time <= 0.0 {
        return if bits > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let transmit = if bits > 0.0 {
        time / uplink_gain * params.beta(bits / time)
    } else {
        0.0
    };
    transmit + circuit_power * time
}

/// Local-computing energy at the constant frequency that just meets the
/// deadline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEnergy {
    /// `κC³(R − ℓ)³/T²`, infinite when the frequency limit is exceeded.
    pub energy: f64,
    /// `C(R − ℓ)/T`.
    pub frequency: f64,
}

pub fn local_energy(bits: f64, user: &UserParams, block_length: f64) -> LocalEnergy {
    let local_bits = (user.task_bits - bits).max(0.0);
    let frequency = user.cycles_per_bit * local_bits / block_length;
    let energy = if frequency > user.max_frequency * (1.0 + FREQUENCY_SLACK) {
        f64::INFINITY
    } else {
        user.capacitance * user.cycles_per_bit * local_bits * frequency * frequency
    };
    LocalEnergy { energy, frequency }
}

/// `T·tr(Q) + α·Σℓ_i`.
pub fn ap_energy(q: &HermitianMatrix, bits: &[f64], block_length: f64, ap_energy_per_bit: f64) -> f64 {
    block_length * q.trace() + ap_energy_per_bit * bits.iter().sum::<f64>()
}

/// Per-user energy accounting of an allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserEnergy {
    pub local: f64,
    pub offload: f64,
    pub harvested: f64,
}

impl UserEnergy {
    /// Harvested minus consumed energy.
    pub fn residual(&self) -> f64 {
        self.harvested - self.local - self.offload
    }
}

/// A complete operating point `(Q, t, ℓ, f)` with its energy breakdown.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub covariance: HermitianMatrix,
    pub time: Vec<f64>,
    pub bits: Vec<f64>,
    pub frequency: Vec<f64>,
    pub objective: f64,
    pub energy: Vec<UserEnergy>,
}

impl Allocation {
    /// Evaluates `(Q, t, ℓ)` with the deadline-meeting CPU frequencies.
    pub fn evaluate(
        covariance: HermitianMatrix,
        time: Vec<f64>,
        bits: Vec<f64>,
        params: &SystemParams,
        channels: &ChannelSet,
    ) -> Result<Self> {
        let k = params.num_users();
        if time.len() != k || bits.len() != k {
            return Err(Error::Dimension(format!(
                "allocation has {} slots and {} bit counts for {k} users",
                time.len(),
                bits.len()
            )));
        }
        channels.check_dims(params)?;
        if covariance.dim() != params.antennas {
            return Err(Error::Dimension("covariance size differs from antenna count".into()));
        }
        let t_blk = params.block_length;
        let mut frequency = Vec::with_capacity(k);
        let mut energy = Vec::with_capacity(k);
        for (i, user) in params.users.iter().enumerate() {
            let loc = local_energy(bits[i], user, t_blk);
            frequency.push(loc.frequency);
            energy.push(UserEnergy {
                local: loc.energy,
                offload: offload_energy(time[i], bits[i], channels.uplink_gain(i), user.circuit_power, params),
                harvested: harvested_energy(&covariance, channels.downlink_outer(i), t_blk, params.eh_efficiency),
            });
        }
        let objective = ap_energy(&covariance, &bits, t_blk, params.ap_energy_per_bit);
        Ok(Self {
            covariance,
            time,
            bits,
            frequency,
            objective,
            energy,
        })
    }

    /// The all-zero allocation.
    pub fn zero(params: &SystemParams, channels: &ChannelSet) -> Result<Self> {
        let k = params.num_users();
        Self::evaluate(HermitianMatrix::zeros(params.antennas), vec![0.0; k], vec![0.0; k], params, channels)
    }

    pub fn residual_energy(&self) -> Vec<f64> {
        self.energy.iter().map(UserEnergy::residual).collect()
    }
}

/// Violation magnitude of every constraint; zero means satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `C(R − ℓ)/f − T` in s.
    pub latency: Vec<f64>,
    /// `E_loc + E_offl − E_harvested` in J.
    pub energy_harvesting: Vec<f64>,
    /// `Σt − T` in s.
    pub time_budget: f64,
    /// Distance of `ℓ_i` outside `[0, R_i]` in bits.
    pub bits_bounds: Vec<f64>,
    /// `−t_i` in s.
    pub time_bounds: Vec<f64>,
    /// Distance of `f_i` outside `[0, f_max]` in Hz.
    pub frequency_bounds: Vec<f64>,
    /// `−λ_min(Q)` in W.
    pub covariance_psd: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.latency
            .iter()
            .chain(&self.energy_harvesting)
            .chain(&self.bits_bounds)
            .chain(&self.time_bounds)
            .chain(&self.frequency_bounds)
            .chain([&self.time_budget, &self.covariance_psd])
            .fold(0.0, |acc: f64, &v| if v.is_nan() { f64::INFINITY } else { acc.max(v) })
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Measures every constraint of the problem at `alloc`, using the
/// allocation's own CPU frequencies.
pub fn check_feasible(alloc: &Allocation, params: &SystemParams, channels: &ChannelSet) -> FeasibilityReport {
    let t_blk = params.block_length;
    let mut report = FeasibilityReport {
        latency: Vec::new(),
        energy_harvesting: Vec::new(),
        time_budget: (alloc.time.iter().sum::<f64>() - t_blk).max(0.0),
        bits_bounds: Vec::new(),
        time_bounds: Vec::new(),
        frequency_bounds: Vec::new(),
        covariance_psd: min_eigpair(&alloc.covariance)
            .map(|(l, _)| (-l).max(0.0))
            .unwrap_or(f64::INFINITY),
    };
    for (i, user) in params.users.iter().enumerate() {
        let (bits, time, freq) = (alloc.bits[i], alloc.time[i], alloc.frequency[i]);
        let cycles = user.cycles_per_bit * (user.task_bits - bits).max(0.0);
        let latency = if cycles == 0.0 {
            0.0
        } else if freq > 0.0 {
            cycles / freq - t_blk
        } else {
            f64::INFINITY
        };
        report.latency.push(latency.max(0.0));
        let local = cycles * user.capacitance * freq * freq;
        let offload = offload_energy(time, bits, channels.uplink_gain(i), user.circuit_power, params);
        let harvested = harvested_energy(&alloc.covariance, channels.downlink_outer(i), t_blk, params.eh_efficiency);
        report.energy_harvesting.push((local + offload - harvested).max(0.0));
        report.bits_bounds.push((-bits).max(bits - user.task_bits).max(0.0));
        report.time_bounds.push((-time).max(0.0));
        report.frequency_bounds.push((-freq).max(freq - user.max_frequency).max(0.0));
    }
    report
}
