//! Bot behaviour profiles and fault plans, with their command-line syntax.
//!
//! Timing defaults are invented: no per-phase duration data exists to
//! calibrate them. They only need to be plausible and reproducible.

use std::fmt;
use std::str::FromStr;

use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reaction time of a compliant bot (invented default).
pub const COMPLIANT_LATENCY_MS: u64 = 2_000;
/// Reaction time range of a slow bot (invented defaults).
pub const SLOW_MIN_MS: u64 = 8_000;
pub const SLOW_MAX_MS: u64 = 30_000;
/// How long a dropper stays away (invented default).
pub const REJOIN_DELAY_MS: u64 = 20_000;
/// Chance that a wrong scanner fumbles a scan, code or token (invented default).
pub const WRONG_PROBABILITY: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("unknown profile kind {0:?}")]
    UnknownKind(String),
    #[error("unknown parameter {key:?} for {kind}")]
    UnknownParam { kind: String, key: String },
    #[error("bad value {value:?} for {key}: {message}")]
    BadValue {
        key: String,
        value: String,
        message: String,
    },
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("slow profile needs min <= max, got {min} > {max}")]
    Range { min: u64, max: u64 },
    #[error("malformed fault {0:?}")]
    Fault(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BotKind {
    Compliant,
    /// Reacts after a uniformly drawn delay.
    Slow {
        min_ms: u64,
        max_ms: u64,
    },
    /// Disconnects once the session reaches `phase`, and rejoins after
    /// `rejoin_ms` unless that is `None`.
    Dropper {
        phase: PhaseId,
        rejoin_ms: Option<u64>,
    },
    /// Gets a scan, code or token wrong with probability `p` before
    /// getting it right.
    WrongScanner {
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotProfile {
    pub kind: BotKind,
    /// Overrides the seed derived from the run seed and the bot's identity.
    pub seed: Option<u64>,
}

impl Default for BotProfile {
    fn default() -> Self {
        Self {
            kind: BotKind::Compliant,
            seed: None,
        }
    }
}

impl BotProfile {
    pub fn new(kind: BotKind) -> Self {
        Self { kind, seed: None }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        match self.kind {
            BotKind::Slow { min_ms, max_ms } if min_ms > max_ms => Err(ProfileError::Range {
                min: min_ms,
                max: max_ms,
            }),
            BotKind::WrongScanner { p } if !(0.0..=1.0).contains(&p) => {
                Err(ProfileError::Probability(p))
            }
            _ => Ok(()),
        }
    }
}

/// Which bots a profile applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    All,
    Player(PlayerId),
}

/// A profile assignment as written on the command line:
/// `[<player>=]<kind>[:<key>=<value>,...]`, for example `slow`,
/// `s03=slow:min=5000,max=20000`, `s07=dropper:phase=PairPuzzle,rejoin=never`
/// or `wrong_scanner:p=0.2`. Without a player the profile applies to every bot
/// that has no profile of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub target: Target,
    pub profile: BotProfile,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ProfileError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ProfileError::BadValue {
        key: key.into(),
        value: value.into(),
        message: e.to_string(),
    })
}

fn parse_rejoin(value: &str) -> Result<Option<u64>, ProfileError> {
    if value == "never" {
        Ok(None)
    } else {
        parse_value("rejoin", value).map(Some)
    }
}

impl FromStr for ProfileSpec {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, params) = s.split_once(':').unwrap_or((s, ""));
        let (target, kind) = match head.split_once('=') {
            Some(("*", k)) => (Target::All, k),
            Some((who, k)) => (Target::Player(PlayerId::from(who)), k),
            None => (Target::All, head),
        };
        let pairs: Vec<(&str, &str)> = params
            .split(',')
            .filter(|p| !p.is_empty())
            .map(|p| p.split_once('=').unwrap_or((p, "")))
            .collect();
        let unknown = |key: &str| ProfileError::UnknownParam {
            kind: kind.into(),
            key: key.into(),
        };
        let mut seed = None;
        let kind = match kind {
            "compliant" => {
                for (k, v) in pairs {
                    match k {
                        "seed" => seed = Some(parse_value(k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                BotKind::Compliant
            }
            "slow" => {
                let (mut min_ms, mut max_ms) = (SLOW_MIN_MS, SLOW_MAX_MS);
                for (k, v) in pairs {
                    match k {
                        "min" => min_ms = parse_value(k, v)?,
                        "max" => max_ms = parse_value(k, v)?,
                        "seed" => seed = Some(parse_value(k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                BotKind::Slow { min_ms, max_ms }
            }
            "dropper" => {
                let (mut phase, mut rejoin_ms) = (PhaseId::PairPuzzle, Some(REJOIN_DELAY_MS));
                for (k, v) in pairs {
                    match k {
                        "phase" => phase = parse_value(k, v)?,
                        "rejoin" => rejoin_ms = parse_rejoin(v)?,
                        "seed" => seed = Some(parse_value(k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                BotKind::Dropper { phase, rejoin_ms }
            }
            "wrong_scanner" => {
                let mut p = WRONG_PROBABILITY;
                for (k, v) in pairs {
                    match k {
                        "p" => p = parse_value(k, v)?,
                        "seed" => seed = Some(parse_value(k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                BotKind::WrongScanner { p }
            }
            other => return Err(ProfileError::UnknownKind(other.into())),
        };
        let profile = BotProfile { kind, seed };
        profile.validate()?;
        Ok(ProfileSpec { target, profile })
    }
}

/// A disruption injected by the harness rather than by a bot's behaviour.
///
/// Syntax: `drop:<player>@<Phase>[+<rejoin ms>|+never]`, `crash@<Phase>`,
/// `dup:<player>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fault", rename_all = "snake_case")]
pub enum Fault {
    /// Same as a dropper profile on that player.
    Drop {
        player: PlayerId,
        phase: PhaseId,
        rejoin_ms: Option<u64>,
    },
    /// The room process dies when the session reaches `phase`; it restarts
    /// from its latest checkpoint and every client rejoins.
    Crash { phase: PhaseId },
    /// Every frame the player sends is transmitted twice.
    Duplicate { player: PlayerId },
}

impl FromStr for Fault {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProfileError::Fault(s.into());
        if let Some(rest) = s.strip_prefix("crash@") {
            return Ok(Fault::Crash {
                phase: parse_value("phase", rest)?,
            });
        }
        if let Some(who) = s.strip_prefix("dup:") {
            if who.is_empty() {
                return Err(bad());
            }
            return Ok(Fault::Duplicate {
                player: PlayerId::from(who),
            });
        }
        if let Some(rest) = s.strip_prefix("drop:") {
            let (who, when) = rest.split_once('@').ok_or_else(bad)?;
            let (phase, rejoin) = when.split_once('+').unwrap_or((when, ""));
            let rejoin_ms = if rejoin.is_empty() {
                Some(REJOIN_DELAY_MS)
            } else {
                parse_rejoin(rejoin)?
            };
            if who.is_empty() {
                return Err(bad());
            }
            return Ok(Fault::Drop {
                player: PlayerId::from(who),
                phase: parse_value("phase", phase)?,
                rejoin_ms,
            });
        }
        Err(bad())
    }
}
