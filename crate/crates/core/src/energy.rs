//! Drone energy physics: energy per meter, the speed-energy curve, battery
//! capacity, and charging/queueing times at nodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAVITY: f64 = 9.81;
pub const AIR_DENSITY: f64 = 1.225;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("payload {payload} kg exceeds maximum {max} kg")]
    Capacity { payload: f64, max: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

pub fn kmh(v: f64) -> f64 {
    v / 3.6
}

/// Parses a speed in m/s. A bare number is m/s; `km/h` and `m/s` suffixes
/// are accepted.
pub fn parse_speed(s: &str) -> Result<f64, EnergyError> {
    let s = s.trim();
    let (num, to_ms): (&str, fn(f64) -> f64) = if let Some(n) = s.strip_suffix("km/h") {
        (n, kmh)
    } else if let Some(n) = s.strip_suffix("m/s") {
        (n, |v| v)
    } else {
        (s, |v| v)
    };
    let v: f64 = num.trim().parse().map_err(|_| EnergyError::Domain(format!("bad speed '{s}'")))?;
    Ok(to_ms(v))
}

fn de_speed<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(s) => parse_speed(&s).map_err(serde::de::Error::custom),
    }
}

/// Physical drone description. Units are SI throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneSpec {
    pub body_mass: f64,
    pub battery_mass: f64,
    pub battery_capacity_mah: f64,
    pub battery_voltage: f64,
    /// Battery power transfer efficiency, in (0, 1].
    pub eta: f64,
    /// Effective rotor disk area (m^2) for the induced-speed estimate.
    pub rotor_area: f64,
    pub max_payload: f64,
    #[serde(deserialize_with = "de_speed")]
    pub base_speed: f64,
    #[serde(deserialize_with = "de_speed")]
    pub min_energy_speed: f64,
    #[serde(deserialize_with = "de_speed")]
    pub max_speed: f64,
    pub charge_power: f64,
    /// Cruise angle of attack (radians).
    pub attack_angle: f64,
    /// Ratio Epm(base_speed) / Epm(min_energy_speed) that fixes the curve.
    pub base_speed_epm_ratio: f64,
}

impl Default for DroneSpec {
    /// A DJI Phantom 3 class airframe.
    fn default() -> Self {
        DroneSpec {
            body_mass: 0.915,
            battery_mass: 0.365,
            battery_capacity_mah: 4480.0,
            battery_voltage: 15.2,
            eta: 0.8,
            rotor_area: 0.2,
            max_payload: 2.5,
            base_speed: kmh(105.0),
            min_energy_speed: kmh(70.0),
            max_speed: kmh(120.0),
            charge_power: 2500.0,
            attack_angle: 0.1,
            base_speed_epm_ratio: 1.25,
        }
    }
}

impl DroneSpec {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let positive = [
            ("body_mass", self.body_mass),
            ("battery_mass", self.battery_mass),
            ("battery_capacity_mah", self.battery_capacity_mah),
            ("battery_voltage", self.battery_voltage),
            ("eta", self.eta),
            ("rotor_area", self.rotor_area),
            ("max_payload", self.max_payload),
            ("base_speed", self.base_speed),
            ("min_energy_speed", self.min_energy_speed),
            ("max_speed", self.max_speed),
            ("charge_power", self.charge_power),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(EnergyError::Domain(format!("{name} must be positive, got {v}")));
        }
        if self.eta > 1.0 {
            return Err(EnergyError::Domain("eta must be at most 1".into()));
        }
        if !(self.min_energy_speed < self.base_speed && self.base_speed <= self.max_speed) {
            return Err(EnergyError::Domain("need min_energy_speed < base_speed <= max_speed".into()));
        }
        if !(self.base_speed_epm_ratio >= 1.0) {
            return Err(EnergyError::Domain("base_speed_epm_ratio must be >= 1".into()));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.attack_angle) {
            return Err(EnergyError::Domain("attack angle must be in [0, pi/2)".into()));
        }
        Ok(())
    }

    pub fn thrust(&self, payload: f64) -> f64 {
        (self.body_mass + self.battery_mass + payload) * GRAVITY
    }

    /// Momentum-theory hover estimate of the induced speed.
    pub fn induced_speed(&self, payload: f64) -> f64 {
        (self.thrust(payload) / (2.0 * AIR_DENSITY * self.rotor_area)).sqrt()
    }
}

/// Energy per meter (J/m): `k * T * (v_a sin(alpha) + v_i) / (v_a * eta)`,
/// where `k` is the degradation multiplier.
pub fn energy_per_meter(
    spec: &DroneSpec,
    payload: f64,
    airspeed: f64,
    attack_angle: f64,
    degradation_factor: f64,
) -> Result<f64, EnergyError> {
    if payload > spec.max_payload {
        return Err(EnergyError::Capacity { payload, max: spec.max_payload });
    }
    if payload < 0.0 {
        return Err(EnergyError::Domain(format!("negative payload {payload}")));
    }
    if !(airspeed > 0.0) {
        return Err(EnergyError::Domain(format!("airspeed must be positive, got {airspeed}")));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&attack_angle) {
        return Err(EnergyError::Domain(format!("attack angle {attack_angle} outside [0, pi/2)")));
    }
    if !(degradation_factor >= 1.0) {
        return Err(EnergyError::Domain(format!("degradation factor {degradation_factor} < 1")));
    }
    let thrust = spec.thrust(payload);
    let vi = spec.induced_speed(payload);
    Ok(degradation_factor * epm_from_terms(thrust, airspeed, attack_angle, vi, spec.eta))
}

/// The bare Epm expression, exposed for hand-evaluated checks.
pub fn epm_from_terms(thrust: f64, airspeed: f64, attack_angle: f64, induced: f64, eta: f64) -> f64 {
    thrust * (airspeed * attack_angle.sin() + induced) / (airspeed * eta)
}

pub fn battery_capacity_joules(spec: &DroneSpec) -> f64 {
    spec.battery_capacity_mah * spec.battery_voltage * 3600.0 / 1000.0
}

pub fn max_range(capacity_j: f64, epm: f64) -> Result<f64, EnergyError> {
    if !(epm > 0.0) {
        return Err(EnergyError::Domain(format!("energy per meter must be positive, got {epm}")));
    }
    Ok(capacity_j / epm)
}

/// Convex speed-energy relation: `Epm(v) = Epm(v_min) + c2 (v - v_min)^2`
/// on the operating band `[v_min, v_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub v_min: f64,
    pub v_max: f64,
    /// Curvature, (J/m) / (m/s)^2.
    pub c2: f64,
}

impl EnergyCurve {
    /// Picks `c2` so that `Epm(at_speed) = ratio * base_epm`.
    pub fn calibrated(v_min: f64, v_max: f64, base_epm: f64, at_speed: f64, ratio: f64) -> Result<Self, EnergyError> {
        if !(v_min > 0.0 && v_min < at_speed && at_speed <= v_max) {
            return Err(EnergyError::Domain("need 0 < v_min < calibration speed <= v_max".into()));
        }
        if !(ratio >= 1.0 && base_epm > 0.0) {
            return Err(EnergyError::Domain("ratio must be >= 1 and base_epm > 0".into()));
        }
        let c2 = (ratio - 1.0) * base_epm / (at_speed - v_min).powi(2);
        Ok(EnergyCurve { v_min, v_max, c2 })
    }

    /// Curve for a given drone and its baseline (minimum-speed) Epm.
    pub fn for_drone(spec: &DroneSpec, base_epm: f64) -> Result<Self, EnergyError> {
        Self::calibrated(spec.min_energy_speed, spec.max_speed, base_epm, spec.base_speed, spec.base_speed_epm_ratio)
    }

    pub fn contains(&self, v: f64) -> bool {
        // A hair of slack so speeds computed by bisection at the band edge pass.
        v >= self.v_min * (1.0 - 1e-12) && v <= self.v_max * (1.0 + 1e-12)
    }
}

pub fn epm_at_speed(curve: &EnergyCurve, base_epm: f64, v: f64) -> Result<f64, EnergyError> {
    if !curve.contains(v) {
        return Err(EnergyError::Domain(format!(
            "speed {v} outside operating band [{}, {}]",
            curve.v_min, curve.v_max
        )));
    }
    let dv = (v - curve.v_min).max(0.0);
    Ok(base_epm + curve.c2 * dv * dv)
}

/// Node time with batched charging: `ceil(drones / pads)` rounds.
pub fn node_time(drones_needing_charge: usize, pads: u32, per_drone_charge_s: f64) -> f64 {
    if drones_needing_charge == 0 {
        return 0.0;
    }
    let pads = pads.max(1) as usize;
    let batches = drones_needing_charge.div_ceil(pads);
    batches as f64 * per_drone_charge_s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub level_pct: f64,
    pub capacity_j: f64,
}

impl BatteryState {
    pub fn full(spec: &DroneSpec) -> Self {
        BatteryState { level_pct: 100.0, capacity_j: battery_capacity_joules(spec) }
    }
}

pub fn charge_duration(b: &BatteryState, target_pct: f64, spec: &DroneSpec) -> Result<f64, EnergyError> {
    if target_pct > 100.0 {
        return Err(EnergyError::Domain(format!("target {target_pct}% above 100")));
    }
    if target_pct < b.level_pct {
        return Err(EnergyError::Domain("target below current level".into()));
    }
    Ok((target_pct - b.level_pct) / 100.0 * b.capacity_j / spec.charge_power)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn hand_evaluated_epm() {
        // Numerator T (v sin a + v_i) = 160 W, v_a = 10 m/s, eta = 0.8.
        // T = 16 N, v sin a + v_i = 10 with a = 0 and v_i = 10.
        assert!(close(epm_from_terms(16.0, 10.0, 0.0, 10.0, 0.8), 20.0, 1e-12));
    }

    #[test]
    fn degradation_scales_linearly() {
        let s = DroneSpec::default();
        let a = energy_per_meter(&s, 1.0, 20.0, 0.1, 1.0).unwrap();
        let b = energy_per_meter(&s, 1.0, 20.0, 0.1, 1.5).unwrap();
        assert_eq!(b, 1.5 * a);
    }

    #[test]
    fn payload_increases_epm() {
        let s = DroneSpec::default();
        let a = energy_per_meter(&s, 0.0, 20.0, 0.1, 1.0).unwrap();
        let b = energy_per_meter(&s, 2.5, 20.0, 0.1, 1.0).unwrap();
        assert!(b > a);
    }

    #[test]
    fn overweight_is_capacity_error() {
        let s = DroneSpec::default();
        assert!(matches!(energy_per_meter(&s, 3.0, 20.0, 0.1, 1.0), Err(EnergyError::Capacity { .. })));
        assert!(energy_per_meter(&s, 1.0, 20.0, 0.1, 0.9).is_err());
        assert!(energy_per_meter(&s, 1.0, 0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn capacity_figures() {
        let mut s = DroneSpec::default();
        assert_eq!(battery_capacity_joules(&s), 245145.6);
        s.battery_capacity_mah = 1000.0;
        s.battery_voltage = 1.0;
        assert_eq!(battery_capacity_joules(&s), 3600.0);
        s.battery_capacity_mah = 2240.0;
        s.battery_voltage = 15.2;
        assert!(close(battery_capacity_joules(&s), 122572.8, 1e-12));
    }

    #[test]
    fn range_figures() {
        assert!(close(max_range(245145.6, 20.0).unwrap(), 12257.28, 1e-12));
        assert_eq!(max_range(7.5, 7.5).unwrap(), 1.0);
        assert!(close(max_range(245145.6, 40.0).unwrap(), 6128.64, 1e-12));
        assert!(max_range(1.0, 0.0).is_err());
    }

    #[test]
    fn curve_minimum_and_calibration() {
        let base = 10.0;
        let c = EnergyCurve::calibrated(kmh(70.0), kmh(120.0), base, kmh(105.0), 1.25).unwrap();
        assert_eq!(epm_at_speed(&c, base, kmh(70.0)).unwrap(), base);
        assert!(close(epm_at_speed(&c, base, kmh(105.0)).unwrap(), 1.25 * base, 1e-12));
        assert!(epm_at_speed(&c, base, kmh(90.0)).unwrap() < epm_at_speed(&c, base, kmh(105.0)).unwrap());
        assert!(epm_at_speed(&c, base, kmh(60.0)).is_err());
        assert!(epm_at_speed(&c, base, kmh(130.0)).is_err());
    }

    #[test]
    fn node_time_batches() {
        assert_eq!(node_time(3, 3, 600.0), 600.0);
        assert_eq!(node_time(5, 2, 600.0), 1800.0);
        assert_eq!(node_time(0, 2, 600.0), 0.0);
        assert_eq!(node_time(2, 4, 600.0), 600.0);
    }

    #[test]
    fn charge_times() {
        let s = DroneSpec { charge_power: 500.0, ..DroneSpec::default() };
        let full = BatteryState::full(&s);
        assert_eq!(charge_duration(&full, 100.0, &s).unwrap(), 0.0);
        let empty = BatteryState { level_pct: 0.0, ..full };
        let t0 = charge_duration(&empty, 100.0, &s).unwrap();
        assert!(close(t0, 490.2912, 1e-12));
        let half = BatteryState { level_pct: 50.0, ..full };
        assert!(close(charge_duration(&half, 100.0, &s).unwrap(), t0 / 2.0, 1e-12));
        assert!(charge_duration(&half, 101.0, &s).is_err());
    }

    #[test]
    fn default_spec_is_valid() {
        DroneSpec::default().validate().unwrap();
    }
}
