//! Piecewise energy and time integration of one leg.

use crate::energy::{battery_capacity_joules, energy_per_meter, epm_at_speed, DroneSpec, EnergyCurve, EnergyError};

/// Per-drone energy curve, fixed by its payload.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroneEnergy {
    pub base_epm: f64,
    pub curve: EnergyCurve,
    pub capacity_j: f64,
}

impl DroneEnergy {
    pub fn new(spec: &DroneSpec, payload: f64) -> Result<Self, EnergyError> {
        let base_epm = energy_per_meter(spec, payload, spec.min_energy_speed, spec.attack_angle, 1.0)?;
        Ok(DroneEnergy { base_epm, curve: EnergyCurve::for_drone(spec, base_epm)?, capacity_j: battery_capacity_joules(spec) })
    }

    /// Battery percent per meter at speed `v` and degradation `factor`.
    pub fn pct_per_m(&self, v: f64, factor: f64) -> f64 {
        let v = v.clamp(self.curve.v_min, self.curve.v_max);
        let epm = epm_at_speed(&self.curve, self.base_epm, v).expect("speed clamped into band");
        epm * factor / self.capacity_j * 100.0
    }
}

/// Degradation onset on the mission clock and the factor from then on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorProfile {
    pub onset: Option<f64>,
    pub factor: f64,
}

impl FactorProfile {
    pub const NONE: FactorProfile = FactorProfile { onset: None, factor: 1.0 };
}

/// Speed `v0` from departure, switching to `v1` at mission time `switch_at`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedProfile {
    pub depart: f64,
    pub v0: f64,
    pub switch_at: Option<f64>,
    pub v1: f64,
}

impl SpeedProfile {
    pub fn constant(depart: f64, v: f64) -> Self {
        SpeedProfile { depart, v0: v, switch_at: None, v1: v }
    }

    /// Distance flown when the switch happens, capped at `distance`.
    fn switch_pos(&self, distance: f64) -> f64 {
        match self.switch_at {
            Some(t) if self.v1 != self.v0 => (self.v0 * (t - self.depart)).clamp(0.0, distance),
            _ => distance,
        }
    }

    /// Mission time at which position `s` is reached.
    pub fn time_at(&self, s: f64, distance: f64) -> f64 {
        let se = self.switch_pos(distance);
        if s <= se {
            self.depart + s / self.v0
        } else {
            self.depart + se / self.v0 + (s - se) / self.v1
        }
    }

    pub fn pos_at(&self, t: f64, distance: f64) -> f64 {
        let se = self.switch_pos(distance);
        let te = self.depart + se / self.v0;
        let s = if t <= te { self.v0 * (t - self.depart) } else { se + self.v1 * (t - te) };
        s.clamp(0.0, distance)
    }

    pub fn travel_time(&self, distance: f64) -> f64 {
        let se = self.switch_pos(distance);
        if se >= distance {
            distance / self.v0
        } else {
            se / self.v0 + (distance - se) / self.v1
        }
    }

    /// `(start, end, speed)` pieces over the leg.
    pub fn pieces(&self, distance: f64) -> Vec<(f64, f64, f64)> {
        let se = self.switch_pos(distance);
        let mut out = Vec::with_capacity(2);
        if se > 0.0 {
            out.push((0.0, se, self.v0));
        }
        if se < distance {
            out.push((se, distance, self.v1));
        }
        out
    }
}

/// Result of flying one drone over a leg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroneLeg {
    /// Battery percent used over the leg (or until depletion).
    pub used_pct: f64,
    /// Depletion position (m from departure), if the battery ran out.
    pub depleted_at: Option<f64>,
}

pub fn fly_drone(
    energy: &DroneEnergy,
    battery_pct: f64,
    distance: f64,
    speed: &SpeedProfile,
    profile: &FactorProfile,
) -> DroneLeg {
    let sf = match profile.onset {
        Some(t) if profile.factor != 1.0 => speed.pos_at(t, distance),
        _ => distance,
    };
    let mut cuts: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(3);
    for (a, b, v) in speed.pieces(distance) {
        if sf > a && sf < b {
            cuts.push((a, sf, v, 1.0));
            cuts.push((sf, b, v, profile.factor));
        } else {
            cuts.push((a, b, v, if a >= sf { profile.factor } else { 1.0 }));
        }
    }
    let mut used = 0.0;
    for (a, b, v, f) in cuts {
        let rate = energy.pct_per_m(v, f);
        let need = (b - a) * rate;
        if used + need > battery_pct {
            let at = a + (battery_pct - used) / rate;
            return DroneLeg { used_pct: battery_pct, depleted_at: Some(at) };
        }
        used += need;
    }
    DroneLeg { used_pct: used, depleted_at: None }
}
