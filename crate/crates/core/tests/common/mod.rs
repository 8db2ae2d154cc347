//! A driver that reads the authoritative state and always takes the right
//! next action. Used to push sessions through every phase.

#![allow(dead_code)]

use classplay_core::engine::{
    self, invariants, required_edges, Effect, Event, SessionConfig, SessionState, UnitKind,
};
use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use classplay_core::protocol::FacilitatorCmd;
use classplay_core::scenario::Scenario;

pub const TEACHER: &str = "teacher";

pub fn roster(n: usize) -> Vec<PlayerId> {
    (1..=n)
        .map(|i| PlayerId::from(format!("s{i:02}")))
        .collect()
}

pub fn new_session(s: &Scenario, n: usize, seed: u64) -> SessionState {
    engine::create_session(
        s,
        "room",
        &roster(n),
        Some(PlayerId::from(TEACHER)),
        seed,
        SessionConfig::default(),
    )
    .unwrap()
}

pub fn teacher() -> PlayerId {
    PlayerId::from(TEACHER)
}

/// The next correct event, or `None` when the session is waiting on time.
pub fn next_event(s: &Scenario, st: &SessionState) -> Option<Event> {
    let connected = |id: &PlayerId| st.is_connected(id);
    match st.phase {
        PhaseId::Lobby => {
            if let Some(p) = st.players.values().find(|p| p.join_rank.is_none()) {
                return Some(Event::Join {
                    player: p.player_id.clone(),
                });
            }
            if st.teacher.join_rank.is_none() {
                return Some(Event::Join { player: teacher() });
            }
            Some(Event::Facilitator {
                player: teacher(),
                cmd: FacilitatorCmd::Start,
            })
        }
        PhaseId::RegisterRoleplay => {
            let line = s.roleplay_script.get(st.script_cursor)?;
            let mut ackers: Vec<PlayerId> = Vec::new();
            use classplay_core::scenario::Speaker;
            if matches!(line.speaker, Speaker::Teacher | Speaker::All) {
                ackers.push(teacher());
            }
            if matches!(line.speaker, Speaker::Player | Speaker::All) {
                ackers.extend(st.players.keys().cloned());
            }
            let who = ackers
                .into_iter()
                .find(|a| connected(a) && !st.line_acks.contains(a))?;
            Some(Event::RoleAck {
                player: who,
                line: st.script_cursor,
            })
        }
        PhaseId::NotepadDiscovery => {
            let p = st.connected_players().find(|p| !p.notepad_opened)?;
            Some(Event::RoleAck {
                player: p.player_id.clone(),
                line: 0,
            })
        }
        PhaseId::IndividualDiscovery => {
            let p = st
                .connected_players()
                .find(|p| p.current_target.is_some())?;
            Some(Event::Scan {
                player: p.player_id.clone(),
                marker: p.current_target.clone().unwrap(),
            })
        }
        PhaseId::PairFormation | PhaseId::GroupFormation => {
            let kind = if st.phase == PhaseId::PairFormation {
                UnitKind::Pair
            } else {
                UnitKind::Group
            };
            let units: Vec<_> = match kind {
                UnitKind::Pair => st.pairs.iter().map(|p| &p.unit).collect(),
                UnitKind::Group => st.groups.iter().map(|g| &g.unit).collect(),
            };
            for u in units {
                for (r, snd) in required_edges(st, u, kind) {
                    if connected(&r)
                        && connected(&snd)
                        && !u.confirmed.contains(&(r.clone(), snd.clone()))
                    {
                        return Some(Event::Proximity {
                            player: r,
                            code: st.players[&snd].pair_token.clone().unwrap(),
                        });
                    }
                }
            }
            None
        }
        PhaseId::PairPuzzle | PhaseId::GroupPuzzle | PhaseId::TeacherShare => {
            let group_phase = st.phase != PhaseId::PairPuzzle;
            let units: Vec<_> = if group_phase {
                st.groups.iter().map(|g| &g.unit).collect()
            } else {
                st.pairs.iter().map(|p| &p.unit).collect()
            };
            for u in units {
                let Some(actor) = u.members.iter().find(|m| connected(m)) else {
                    continue;
                };
                if !u.solved {
                    return Some(Event::PuzzleSubmit {
                        player: actor.clone(),
                        code: u.code.clone().unwrap(),
                    });
                }
                if !u.puzzle_done() {
                    let seeker = u
                        .members
                        .iter()
                        .find(|m| connected(m) && st.players[*m].current_target.is_some())
                        .unwrap_or(actor);
                    return Some(Event::Scan {
                        player: seeker.clone(),
                        marker: u.unlock_marker.clone().unwrap(),
                    });
                }
            }
            if group_phase {
                let g = st
                    .groups
                    .iter()
                    .filter(|g| g.unit.puzzle_done() && !g.teacher_visited)
                    .filter(|g| st.unit_has_connected(&g.unit))
                    .min_by_key(|g| g.arrival_rank)?;
                return Some(Event::TeacherShareDone {
                    player: teacher(),
                    group: g.unit.id.clone(),
                });
            }
            None
        }
        PhaseId::TimedChallenge => {
            let c = st.challenge.as_ref()?;
            let (m, _) = c.scanned.iter().find(|(_, &n)| n == 0)?;
            let p = st.connected_players().next()?;
            Some(Event::ChallengeScan {
                player: p.player_id.clone(),
                marker: m.clone(),
            })
        }
        PhaseId::DiaryCircle => {
            let holder = st.diary_holder(st.read_cursor)?;
            Some(Event::ReadDone {
                player: holder.clone(),
                order: st.read_cursor,
            })
        }
        PhaseId::Discussion => Some(Event::Facilitator {
            player: teacher(),
            cmd: FacilitatorCmd::SkipPhase,
        }),
        PhaseId::Ended => None,
    }
}

pub struct Run {
    pub state: SessionState,
    pub events: Vec<Event>,
    pub effects: Vec<Vec<Effect>>,
    pub violations: Vec<invariants::Violation>,
    pub diary_reads: Vec<usize>,
}

/// Drives a session to Ended, checking invariants after every event.
/// `hook` may substitute an event of its own before each step.
pub fn drive(
    s: &Scenario,
    mut st: SessionState,
    mut hook: impl FnMut(&SessionState, usize) -> Option<Event>,
) -> Run {
    let mut run = Run {
        state: st.clone(),
        events: Vec::new(),
        effects: Vec::new(),
        violations: Vec::new(),
        diary_reads: Vec::new(),
    };
    for step in 0..100_000 {
        if st.phase == PhaseId::Ended {
            break;
        }
        let ev = hook(&st, step)
            .or_else(|| next_event(s, &st))
            .unwrap_or(Event::ClockAdvance { ms: 1_000 });
        if let Event::ReadDone { order, player } = &ev {
            if st.diary_holder(*order) == Some(player) && st.read_cursor == *order {
                run.diary_reads.push(*order);
            }
        }
        let fx = engine::apply(s, &mut st, &ev);
        run.violations.extend(invariants::check_state(s, &st));
        run.violations
            .extend(invariants::check_effects_no_leak(&st, &fx));
        run.events.push(ev);
        run.effects.push(fx);
    }
    run.violations
        .extend(invariants::check_diary_order(s, &run.diary_reads));
    run.state = st;
    run
}
