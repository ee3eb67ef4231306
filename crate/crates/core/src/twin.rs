//! Deterministic digital twin of the juice-mixer testbed.
//!
//! The task runs through four phases: fill a container at the juice station,
//! fit lid, sensors and pump tube, run the pump until the mixture is done,
//! then inspect the result. Every transition is a pure function of the state
//! and its input; illegal actions are rejected with a named reason and leave
//! the state untouched.
//!
//! Time only moves through [`TwinState::tick`]. Fill and mixing progress are
//! derived from integer elapsed time so that one long tick and many short
//! ticks of the same total produce identical states.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwinConfig {
    pub juice_kinds: Vec<String>,
    /// Fraction of the container filled per second under the spout.
    pub fill_rate_per_s: f64,
    /// Time to finish mixing in continuous mode at each strength; pulsed mode
    /// takes twice as long.
    pub mix_ms_high: u64,
    pub mix_ms_medium: u64,
    pub mix_ms_low: u64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            juice_kinds: ["orange", "apple", "cherry"].iter().map(|s| s.to_string()).collect(),
            fill_rate_per_s: 0.25,
            mix_ms_high: 10_000,
            mix_ms_medium: 20_000,
            mix_ms_low: 40_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TwinError {
    #[error("invalid twin config: {0}")]
    InvalidConfig(&'static str),
    #[error("step index {0} is out of range")]
    IndexOutOfRange(usize),
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> Option<u64> {
    (a / gcd(a, b)).checked_mul(b)
}

impl TwinConfig {
    pub fn validate(&self) -> Result<(), TwinError> {
        if self.juice_kinds.is_empty() {
            return Err(TwinError::InvalidConfig("juice_kinds is empty"));
        }
        if self.juice_kinds.iter().any(|k| k.trim().is_empty()) {
            return Err(TwinError::InvalidConfig("blank juice kind"));
        }
        let distinct: BTreeSet<&String> = self.juice_kinds.iter().collect();
        if distinct.len() != self.juice_kinds.len() {
            return Err(TwinError::InvalidConfig("duplicate juice kind"));
        }
        if !(self.fill_rate_per_s.is_finite() && self.fill_rate_per_s > 0.0) {
            return Err(TwinError::InvalidConfig("fill_rate_per_s must be positive"));
        }
        if self.mix_ms_high == 0 || self.mix_ms_medium == 0 || self.mix_ms_low == 0 {
            return Err(TwinError::InvalidConfig("mixing durations must be positive"));
        }
        if self.mix_units_full().is_none() {
            return Err(TwinError::InvalidConfig("mixing durations are too large"));
        }
        Ok(())
    }

    pub fn mix_duration_ms(&self, strength: PumpStrength, mode: PumpMode) -> u64 {
        let base = match strength {
            PumpStrength::Low => self.mix_ms_low,
            PumpStrength::Medium => self.mix_ms_medium,
            PumpStrength::High => self.mix_ms_high,
        };
        match mode {
            PumpMode::Continuous => base,
            PumpMode::Pulsed => base * 2,
        }
    }

    /// Mixing progress is counted in integer units; this many units is 100 %.
    /// Every (strength, mode) duration divides it, so each millisecond adds a
    /// whole number of units.
    fn mix_units_full(&self) -> Option<u64> {
        let h = self.mix_ms_high.checked_mul(2)?;
        let m = self.mix_ms_medium.checked_mul(2)?;
        let l = self.mix_ms_low.checked_mul(2)?;
        lcm(lcm(h, m)?, l)
    }

    /// Smallest time under the spout that fills the container completely.
    fn fill_full_ms(&self) -> u64 {
        let mut n = (1000.0 / self.fill_rate_per_s) as u64;
        while n > 0 && self.fill_fraction(n - 1) >= 1.0 {
            n -= 1;
        }
        while self.fill_fraction(n) < 1.0 {
            n += 1;
        }
        n
    }

    fn fill_fraction(&self, fill_ms: u64) -> f64 {
        (self.fill_rate_per_s * fill_ms as f64 / 1000.0).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensor {
    Temperature,
    Ph,
}

impl Sensor {
    pub const ALL: [Sensor; 2] = [Sensor::Temperature, Sensor::Ph];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpStrength {
    Low,
    Medium,
    High,
}

impl PumpStrength {
    pub const ALL: [PumpStrength; 3] = [PumpStrength::Low, PumpStrength::Medium, PumpStrength::High];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpMode {
    Continuous,
    Pulsed,
}

impl PumpMode {
    pub const ALL: [PumpMode; 2] = [PumpMode::Continuous, PumpMode::Pulsed];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub juice_kind: Option<String>,
    pub fill_level: f64,
    /// Time spent filling, capped at the time needed to fill completely.
    pub fill_ms: u64,
    pub under_spout: bool,
    pub lid_attached: bool,
    pub sensors: BTreeSet<Sensor>,
    pub tube_connected: bool,
}

impl Container {
    fn empty() -> Self {
        Self {
            juice_kind: None,
            fill_level: 0.0,
            fill_ms: 0,
            under_spout: false,
            lid_attached: false,
            sensors: BTreeSet::new(),
            tube_connected: false,
        }
    }

    pub fn is_full(&self) -> bool {
        self.fill_level >= 1.0
    }

    fn assembled(&self) -> bool {
        self.lid_attached && self.sensors.len() == Sensor::ALL.len() && self.tube_connected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pump {
    pub strength: PumpStrength,
    pub mode: PumpMode,
    pub running: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum MixtureState {
    Unmixed,
    Mixing { progress: f64 },
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Preparation,
    Assembly,
    Mixing,
    FinalSteps,
    Done,
}

impl Phase {
    pub const TASK_PHASES: [Phase; 4] =
        [Phase::Preparation, Phase::Assembly, Phase::Mixing, Phase::FinalSteps];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn title(self) -> &'static str {
        match self {
            Phase::Preparation => "Preparation",
            Phase::Assembly => "Assembly",
            Phase::Mixing => "Mixing",
            Phase::FinalSteps => "Final Steps",
            Phase::Done => "Done",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rejection {
    NoContainer,
    NotFilled,
    LidMissing,
    SensorMissing,
    TubeMissing,
    AlreadyAttached,
    PumpNotRunning,
    NotMixed,
    WrongPhase,
    UnknownJuice,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl core::error::Error for Rejection {}

/// A trainee move on the testbed.
///
/// On the wire an action is `{"action": "<Name>", "params": {...}}`; the
/// parameterised ones use the keys `juice`, `sensor`, `level` and `mode`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "ActionWire", try_from = "ActionWire")]
pub enum Action {
    PickContainer,
    PlaceUnderSpout(String),
    RemoveFromSpout,
    AttachLid,
    AttachSensor(Sensor),
    ConnectTube,
    SetPumpStrength(PumpStrength),
    SetPumpMode(PumpMode),
    StartPump,
    StopPump,
    InspectMixture,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::PickContainer => "PickContainer",
            Action::PlaceUnderSpout(_) => "PlaceUnderSpout",
            Action::RemoveFromSpout => "RemoveFromSpout",
            Action::AttachLid => "AttachLid",
            Action::AttachSensor(_) => "AttachSensor",
            Action::ConnectTube => "ConnectTube",
            Action::SetPumpStrength(_) => "SetPumpStrength",
            Action::SetPumpMode(_) => "SetPumpMode",
            Action::StartPump => "StartPump",
            Action::StopPump => "StopPump",
            Action::InspectMixture => "InspectMixture",
        }
    }

    /// Every concrete action for this station, plus one placement with a
    /// juice kind the station does not offer.
    pub fn alphabet(config: &TwinConfig) -> Vec<Action> {
        let mut all = alloc::vec![Action::PickContainer];
        all.extend(config.juice_kinds.iter().cloned().map(Action::PlaceUnderSpout));
        let mut unknown = String::from("unknown-juice");
        while config.juice_kinds.contains(&unknown) {
            unknown.push('_');
        }
        all.push(Action::PlaceUnderSpout(unknown));
        all.push(Action::RemoveFromSpout);
        all.push(Action::AttachLid);
        all.extend(Sensor::ALL.map(Action::AttachSensor));
        all.push(Action::ConnectTube);
        all.extend(PumpStrength::ALL.map(Action::SetPumpStrength));
        all.extend(PumpMode::ALL.map(Action::SetPumpMode));
        all.extend([Action::StartPump, Action::StopPump, Action::InspectMixture]);
        all
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionWire {
    pub action: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl From<Action> for ActionWire {
    fn from(a: Action) -> Self {
        let mut params = Map::new();
        let param = |v| serde_json::to_value(v).expect("enum serializes");
        match &a {
            Action::PlaceUnderSpout(kind) => {
                params.insert("juice".into(), Value::String(kind.clone()));
            }
            Action::AttachSensor(s) => {
                params.insert("sensor".into(), param(s));
            }
            Action::SetPumpStrength(l) => {
                params.insert("level".into(), serde_json::to_value(l).expect("enum serializes"));
            }
            Action::SetPumpMode(m) => {
                params.insert("mode".into(), serde_json::to_value(m).expect("enum serializes"));
            }
            _ => {}
        }
        ActionWire {
            action: a.name().into(),
            params,
        }
    }
}

impl TryFrom<ActionWire> for Action {
    type Error = String;

    fn try_from(w: ActionWire) -> Result<Self, Self::Error> {
        fn param<T: serde::de::DeserializeOwned>(w: &ActionWire, key: &str) -> Result<T, String> {
            let v = w
                .params
                .get(key)
                .ok_or_else(|| alloc::format!("{} needs params.{key}", w.action))?;
            serde_json::from_value(v.clone())
                .map_err(|e| alloc::format!("{}: bad params.{key}: {e}", w.action))
        }
        Ok(match w.action.as_str() {
            "PickContainer" => Action::PickContainer,
            "PlaceUnderSpout" => Action::PlaceUnderSpout(param(&w, "juice")?),
            "RemoveFromSpout" => Action::RemoveFromSpout,
            "AttachLid" => Action::AttachLid,
            "AttachSensor" => Action::AttachSensor(param(&w, "sensor")?),
            "ConnectTube" => Action::ConnectTube,
            "SetPumpStrength" => Action::SetPumpStrength(param(&w, "level")?),
            "SetPumpMode" => Action::SetPumpMode(param(&w, "mode")?),
            "StartPump" => Action::StartPump,
            "StopPump" => Action::StopPump,
            "InspectMixture" => Action::InspectMixture,
            other => return Err(alloc::format!("unknown action {other:?}")),
        })
    }
}

/// Legal moves with their legal parameter sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "params")]
pub enum ActionTemplate {
    PickContainer,
    PlaceUnderSpout { juice: Vec<String> },
    RemoveFromSpout,
    AttachLid,
    AttachSensor { sensor: Vec<Sensor> },
    ConnectTube,
    SetPumpStrength { level: Vec<PumpStrength> },
    SetPumpMode { mode: Vec<PumpMode> },
    StartPump,
    StopPump,
    InspectMixture,
}

impl ActionTemplate {
    pub fn expand(&self) -> Vec<Action> {
        match self {
            ActionTemplate::PickContainer => alloc::vec![Action::PickContainer],
            ActionTemplate::PlaceUnderSpout { juice } => {
                juice.iter().cloned().map(Action::PlaceUnderSpout).collect()
            }
            ActionTemplate::RemoveFromSpout => alloc::vec![Action::RemoveFromSpout],
            ActionTemplate::AttachLid => alloc::vec![Action::AttachLid],
            ActionTemplate::AttachSensor { sensor } => {
                sensor.iter().copied().map(Action::AttachSensor).collect()
            }
            ActionTemplate::ConnectTube => alloc::vec![Action::ConnectTube],
            ActionTemplate::SetPumpStrength { level } => {
                level.iter().copied().map(Action::SetPumpStrength).collect()
            }
            ActionTemplate::SetPumpMode { mode } => {
                mode.iter().copied().map(Action::SetPumpMode).collect()
            }
            ActionTemplate::StartPump => alloc::vec![Action::StartPump],
            ActionTemplate::StopPump => alloc::vec![Action::StopPump],
            ActionTemplate::InspectMixture => alloc::vec![Action::InspectMixture],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinState {
    pub config: TwinConfig,
    pub container: Option<Container>,
    pub pump: Pump,
    pub mixture: MixtureState,
    pub inspected: bool,
    pub clock_ms: u64,
    /// Mixing progress in units of `1 / mix_units_full`.
    pub mix_units: u64,
}

impl TwinState {
    pub fn new(config: TwinConfig) -> Result<Self, TwinError> {
        config.validate()?;
        Ok(Self {
            config,
            container: None,
            pump: Pump {
                strength: PumpStrength::Low,
                mode: PumpMode::Continuous,
                running: false,
            },
            mixture: MixtureState::Unmixed,
            inspected: false,
            clock_ms: 0,
            mix_units: 0,
        })
    }

    pub fn station(&self) -> &[String] {
        &self.config.juice_kinds
    }

    fn full_units(&self) -> u64 {
        self.config
            .mix_units_full()
            .expect("validated at construction")
    }

    pub fn mix_progress(&self) -> f64 {
        self.mix_units as f64 / self.full_units() as f64
    }

    pub fn assembly_complete(&self) -> bool {
        self.container.as_ref().is_some_and(Container::assembled)
    }

    pub fn phase(&self) -> Phase {
        if self.inspected {
            Phase::Done
        } else if self.mixture == MixtureState::Mixed {
            Phase::FinalSteps
        } else if self.assembly_complete() {
            Phase::Mixing
        } else if self.container.as_ref().is_some_and(Container::is_full) {
            Phase::Assembly
        } else {
            Phase::Preparation
        }
    }

    /// Applies `action`, returning the successor state or why it is illegal.
    pub fn apply(&self, action: &Action) -> Result<TwinState, Rejection> {
        use Rejection::*;
        let mut next = self.clone();
        let finished = self.mixture == MixtureState::Mixed || self.inspected;
        let knobs_live = self.phase() == Phase::Mixing;
        match action {
            Action::PickContainer => {
                if self.container.is_some() {
                    return Err(WrongPhase);
                }
                next.container = Some(Container::empty());
            }
            Action::PlaceUnderSpout(kind) => {
                let c = next.container.as_mut().ok_or(NoContainer)?;
                if !self.config.juice_kinds.contains(kind) {
                    return Err(UnknownJuice);
                }
                if c.lid_attached || c.under_spout {
                    return Err(WrongPhase);
                }
                if c.juice_kind.as_ref().is_some_and(|k| k != kind) {
                    return Err(WrongPhase);
                }
                c.under_spout = true;
                c.juice_kind = Some(kind.clone());
            }
            Action::RemoveFromSpout => {
                let c = next.container.as_mut().ok_or(NoContainer)?;
                if !c.under_spout {
                    return Err(WrongPhase);
                }
                c.under_spout = false;
            }
            Action::AttachLid => {
                let c = next.container.as_mut().ok_or(NoContainer)?;
                if c.lid_attached {
                    return Err(AlreadyAttached);
                }
                if !c.is_full() {
                    return Err(NotFilled);
                }
                if c.under_spout {
                    return Err(WrongPhase);
                }
                c.lid_attached = true;
            }
            Action::AttachSensor(sensor) => {
                let c = next.container.as_mut().ok_or(NoContainer)?;
                if c.sensors.contains(sensor) {
                    return Err(AlreadyAttached);
                }
                if !c.lid_attached {
                    return Err(LidMissing);
                }
                c.sensors.insert(*sensor);
            }
            Action::ConnectTube => {
                let c = next.container.as_mut().ok_or(NoContainer)?;
                if c.tube_connected {
                    return Err(AlreadyAttached);
                }
                if !c.lid_attached {
                    return Err(LidMissing);
                }
                c.tube_connected = true;
            }
            Action::SetPumpStrength(level) => {
                if !knobs_live {
                    return Err(WrongPhase);
                }
                next.pump.strength = *level;
            }
            Action::SetPumpMode(mode) => {
                if !knobs_live {
                    return Err(WrongPhase);
                }
                next.pump.mode = *mode;
            }
            Action::StartPump => {
                if finished || self.pump.running {
                    return Err(WrongPhase);
                }
                let c = self.container.as_ref().ok_or(NoContainer)?;
                if !c.lid_attached {
                    return Err(LidMissing);
                }
                if c.sensors.len() < Sensor::ALL.len() {
                    return Err(SensorMissing);
                }
                if !c.tube_connected {
                    return Err(TubeMissing);
                }
                next.pump.running = true;
                next.mixture = MixtureState::Mixing {
                    progress: self.mix_progress(),
                };
            }
            Action::StopPump => {
                if !self.pump.running {
                    return Err(PumpNotRunning);
                }
                next.pump.running = false;
                if self.mix_units >= self.full_units() {
                    next.mixture = MixtureState::Mixed;
                }
            }
            Action::InspectMixture => {
                if self.inspected {
                    return Err(WrongPhase);
                }
                if self.mixture != MixtureState::Mixed {
                    return Err(NotMixed);
                }
                next.inspected = true;
            }
        }
        Ok(next)
    }

    /// Advances time by `dt_ms`: fills a container sitting under the spout
    /// (until the lid goes on) and advances mixing while the pump runs.
    pub fn tick(&self, dt_ms: u64) -> TwinState {
        let mut next = self.clone();
        next.clock_ms = self.clock_ms.saturating_add(dt_ms);
        if let Some(c) = next.container.as_mut() {
            if c.under_spout && !c.lid_attached {
                let full_ms = self.config.fill_full_ms();
                c.fill_ms = c.fill_ms.saturating_add(dt_ms).min(full_ms);
                c.fill_level = self.config.fill_fraction(c.fill_ms);
            }
        }
        if self.pump.running {
            let full = self.full_units();
            let per_ms = full / self.config.mix_duration_ms(self.pump.strength, self.pump.mode);
            next.mix_units = dt_ms
                .checked_mul(per_ms)
                .and_then(|d| d.checked_add(self.mix_units))
                .map_or(full, |u| u.min(full));
            next.mixture = MixtureState::Mixing {
                progress: next.mix_progress(),
            };
        }
        next
    }

    /// Everything `apply` would accept, grouped by action.
    pub fn legal_actions(&self) -> Vec<ActionTemplate> {
        let mut out = Vec::new();
        match &self.container {
            None => out.push(ActionTemplate::PickContainer),
            Some(c) => {
                if !c.lid_attached && !c.under_spout {
                    let juice = match &c.juice_kind {
                        Some(k) => alloc::vec![k.clone()],
                        None => self.config.juice_kinds.clone(),
                    };
                    out.push(ActionTemplate::PlaceUnderSpout { juice });
                }
                if c.under_spout {
                    out.push(ActionTemplate::RemoveFromSpout);
                }
                if !c.lid_attached && c.is_full() && !c.under_spout {
                    out.push(ActionTemplate::AttachLid);
                }
                if c.lid_attached {
                    let missing: Vec<Sensor> =
                        Sensor::ALL.into_iter().filter(|s| !c.sensors.contains(s)).collect();
                    if !missing.is_empty() {
                        out.push(ActionTemplate::AttachSensor { sensor: missing });
                    }
                    if !c.tube_connected {
                        out.push(ActionTemplate::ConnectTube);
                    }
                }
            }
        }
        if self.phase() == Phase::Mixing {
            out.push(ActionTemplate::SetPumpStrength {
                level: PumpStrength::ALL.to_vec(),
            });
            out.push(ActionTemplate::SetPumpMode {
                mode: PumpMode::ALL.to_vec(),
            });
            if !self.pump.running {
                out.push(ActionTemplate::StartPump);
            }
        }
        if self.pump.running {
            out.push(ActionTemplate::StopPump);
        }
        if self.mixture == MixtureState::Mixed && !self.inspected {
            out.push(ActionTemplate::InspectMixture);
        }
        out
    }

    /// True once the twin has moved past the phase with this index
    /// (0 = Preparation .. 3 = Final Steps).
    pub fn is_step_complete(&self, step_index: usize) -> Result<bool, TwinError> {
        let phase = Phase::TASK_PHASES
            .get(step_index)
            .ok_or(TwinError::IndexOutOfRange(step_index))?;
        Ok(self.phase() > *phase)
    }

    /// Checks the state invariants; returns the first one broken.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        let mixing_or_mixed = !matches!(self.mixture, MixtureState::Unmixed);
        if mixing_or_mixed && !self.assembly_complete() {
            return Err("mixing without a complete assembly");
        }
        if self.pump.running && !self.container.as_ref().is_some_and(|c| c.tube_connected) {
            return Err("pump running without a connected tube");
        }
        if self.mix_units > self.full_units() {
            return Err("mixing progress above 1");
        }
        if let MixtureState::Mixing { progress } = self.mixture {
            if !(0.0..=1.0).contains(&progress) {
                return Err("mixing progress outside [0, 1]");
            }
        }
        if let Some(c) = &self.container {
            if !(0.0..=1.0).contains(&c.fill_level) {
                return Err("fill level outside [0, 1]");
            }
            if c.lid_attached && !c.is_full() {
                return Err("lid attached before the container was full");
            }
            if c.under_spout && c.lid_attached {
                return Err("lidded container under the spout");
            }
            if (c.tube_connected || !c.sensors.is_empty()) && !c.lid_attached {
                return Err("fittings without a lid");
            }
        }
        if self.inspected && self.mixture != MixtureState::Mixed {
            return Err("inspected before mixing finished");
        }
        Ok(())
    }
}

pub fn new_twin(config: TwinConfig) -> Result<TwinState, TwinError> {
    TwinState::new(config)
}

pub fn apply_action(state: &TwinState, action: &Action) -> Result<TwinState, Rejection> {
    state.apply(action)
}

pub fn tick(state: &TwinState, dt_ms: u64) -> TwinState {
    state.tick(dt_ms)
}

pub fn phase_of(state: &TwinState) -> Phase {
    state.phase()
}

pub fn legal_actions(state: &TwinState) -> Vec<ActionTemplate> {
    state.legal_actions()
}

pub fn is_step_complete(state: &TwinState, step_index: usize) -> Result<bool, TwinError> {
    state.is_step_complete(step_index)
}

/// The canonical happy path, as (time to advance first, action) pairs.
/// Advances are long enough for the default config; `happy_path_for`
/// sizes them for any config.
pub fn happy_path_for(config: &TwinConfig) -> Vec<(u64, Action)> {
    let fill_ms = config.fill_full_ms();
    let mix_ms = config.mix_duration_ms(PumpStrength::High, PumpMode::Continuous);
    let juice = config.juice_kinds[0].clone();
    alloc::vec![
        (0, Action::PickContainer),
        (0, Action::PlaceUnderSpout(juice)),
        (fill_ms, Action::RemoveFromSpout),
        (0, Action::AttachLid),
        (0, Action::AttachSensor(Sensor::Temperature)),
        (0, Action::AttachSensor(Sensor::Ph)),
        (0, Action::ConnectTube),
        (0, Action::SetPumpStrength(PumpStrength::High)),
        (0, Action::SetPumpMode(PumpMode::Continuous)),
        (0, Action::StartPump),
        (mix_ms, Action::StopPump),
        (0, Action::InspectMixture),
    ]
}
