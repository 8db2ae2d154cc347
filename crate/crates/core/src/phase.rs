use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The phases of a session, in their total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhaseId {
    Lobby,
    RegisterRoleplay,
    NotepadDiscovery,
    IndividualDiscovery,
    PairFormation,
    PairPuzzle,
    GroupFormation,
    GroupPuzzle,
    TeacherShare,
    TimedChallenge,
    DiaryCircle,
    Discussion,
    Ended,
}

impl PhaseId {
    pub const ALL: [PhaseId; 13] = [
        PhaseId::Lobby,
        PhaseId::RegisterRoleplay,
        PhaseId::NotepadDiscovery,
        PhaseId::IndividualDiscovery,
        PhaseId::PairFormation,
        PhaseId::PairPuzzle,
        PhaseId::GroupFormation,
        PhaseId::GroupPuzzle,
        PhaseId::TeacherShare,
        PhaseId::TimedChallenge,
        PhaseId::DiaryCircle,
        PhaseId::Discussion,
        PhaseId::Ended,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<PhaseId> {
        Self::ALL.get(self.index() + 1).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseId::Lobby => "Lobby",
            PhaseId::RegisterRoleplay => "RegisterRoleplay",
            PhaseId::NotepadDiscovery => "NotepadDiscovery",
            PhaseId::IndividualDiscovery => "IndividualDiscovery",
            PhaseId::PairFormation => "PairFormation",
            PhaseId::PairPuzzle => "PairPuzzle",
            PhaseId::GroupFormation => "GroupFormation",
            PhaseId::GroupPuzzle => "GroupPuzzle",
            PhaseId::TeacherShare => "TeacherShare",
            PhaseId::TimedChallenge => "TimedChallenge",
            PhaseId::DiaryCircle => "DiaryCircle",
            PhaseId::Discussion => "Discussion",
            PhaseId::Ended => "Ended",
        }
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown phase \"{0}\"")]
pub struct UnknownPhase(pub String);

impl FromStr for PhaseId {
    type Err = UnknownPhase;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownPhase(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_total_and_successor_walks_it() {
        let mut p = PhaseId::Lobby;
        let mut seen = vec![p];
        while let Some(n) = p.next() {
            assert!(n > p);
            seen.push(n);
            p = n;
        }
        assert_eq!(seen, PhaseId::ALL.to_vec());
        assert_eq!(PhaseId::Ended.next(), None);
    }

    #[test]
    fn names_round_trip() {
        for p in PhaseId::ALL {
            assert_eq!(p.as_str().parse::<PhaseId>().unwrap(), p);
        }
        assert!("Intermission".parse::<PhaseId>().is_err());
    }
}
