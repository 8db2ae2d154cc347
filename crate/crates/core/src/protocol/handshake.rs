use thiserror::Error;

use crate::engine::{required_edges, SessionState, UnitKind};
use crate::ids::PlayerId;
use crate::phase::PhaseId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProximityMatch {
    /// `partner` is the sender whose token the receiver entered.
    Confirmed { partner: PlayerId },
    /// The code does not belong to a partner; `stale` marks a token from an
    /// earlier formation round.
    WrongPartner { stale: bool, nudge: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HandshakeError {
    #[error("no handshake is in progress in {0}")]
    IllegalInPhase(PhaseId),
}

/// Checks a code entered by `receiver` against the tokens of its unit.
pub fn verify_proximity(
    st: &SessionState,
    receiver: &PlayerId,
    code: &str,
) -> Result<ProximityMatch, HandshakeError> {
    let (kind, unit) = match st.phase {
        PhaseId::PairFormation => (UnitKind::Pair, st.pair_of(receiver).map(|p| &p.unit)),
        PhaseId::GroupFormation => (UnitKind::Group, st.group_of(receiver).map(|g| &g.unit)),
        other => return Err(HandshakeError::IllegalInPhase(other)),
    };
    let Some(unit) = unit else {
        return Err(HandshakeError::IllegalInPhase(st.phase));
    };
    let code = code.trim().to_ascii_uppercase();
    let edges = required_edges(st, unit, kind);
    if !edges.iter().any(|(r, _)| r == receiver) {
        return Ok(ProximityMatch::WrongPartner {
            stale: false,
            nudge: "Your partner enters your code: show them your screen".into(),
        });
    }
    let owner = st
        .players
        .values()
        .find(|p| p.pair_token.as_deref() == Some(code.as_str()));
    if let Some(owner) = owner {
        if edges
            .iter()
            .any(|(r, s)| r == receiver && s == &owner.player_id)
        {
            return Ok(ProximityMatch::Confirmed {
                partner: owner.player_id.clone(),
            });
        }
        let names: Vec<&str> = edges
            .iter()
            .filter(|(r, _)| r == receiver)
            .filter_map(|(_, s)| st.players.get(s))
            .map(|p| p.persona_name.as_str())
            .collect();
        return Ok(ProximityMatch::WrongPartner {
            stale: false,
            nudge: format!(
                "That is {}, not your partner. Look for {}",
                owner.persona_name,
                names.join(" or ")
            ),
        });
    }
    if st.retired_tokens.contains_key(&code) {
        return Ok(ProximityMatch::WrongPartner {
            stale: true,
            nudge: "That code is from an earlier round: ask for the code on screen now".into(),
        });
    }
    Ok(ProximityMatch::WrongPartner {
        stale: false,
        nudge: "Nobody has that code. Check the letters again".into(),
    })
}
