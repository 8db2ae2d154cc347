//! Seeded, deterministic assignment of tracks, partners, groups, tokens,
//! personas and diary fragments.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::state::{Group, Pair, SessionState, Unit};
use crate::ids::{PlayerId, UnitId};
use crate::scenario::{group_partition, Track};

/// Look-alike-free alphabet for handshake tokens.
pub const TOKEN_ALPHABET: &[u8] = b"ACDEFHJKLMNPRTUVWXY34679";
pub const TOKEN_LEN: usize = 4;

const PERSONAS: &[&str] = &[
    "Alex", "Bea", "Cem", "Dana", "Emil", "Fatima", "Greta", "Hugo", "Ida", "Jonas", "Kaja",
    "Leon", "Mira", "Noah", "Olga", "Paul", "Quinn", "Rosa", "Samir", "Tara", "Uli", "Vera",
    "Wanda", "Xaver", "Yara", "Zoe", "Anton", "Billie", "Chiara", "David", "Elif", "Finn", "Hanna",
    "Ilias", "Jana", "Karim", "Luisa", "Milan", "Nele", "Oskar", "Pia", "Rafael", "Sofia", "Timo",
    "Ula", "Valentin", "Wiebke", "Yusuf",
];

const TEACHER_PERSONAS: &[&str] = &[
    "Mx. Berger",
    "Ms. Novak",
    "Mr. Haas",
    "Ms. Winter",
    "Mr. Lang",
    "Ms. Roth",
];

/// A ChaCha stream derived from the session seed, a purpose label and an epoch.
pub fn rng_for(seed: u64, purpose: &str, epoch: u32) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(purpose.as_bytes());
    h.update(epoch.to_be_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Balanced split of the roster into tracks: `|#A - #B| <= 1`.
pub fn assign_tracks(roster: &[PlayerId], seed: u64) -> BTreeMap<PlayerId, Track> {
    let mut rng = rng_for(seed, "tracks", 0);
    let mut order: Vec<&PlayerId> = roster.iter().collect();
    order.shuffle(&mut rng);
    // Which track takes the extra player on odd rosters.
    let first = if rng.random::<bool>() {
        Track::A
    } else {
        Track::B
    };
    let half = order.len().div_ceil(2);
    order
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), if i < half { first } else { first.other() }))
        .collect()
}

pub fn assign_personas(roster: &[PlayerId], seed: u64) -> BTreeMap<PlayerId, String> {
    let mut rng = rng_for(seed, "personas", 0);
    let mut names: Vec<&str> = PERSONAS.to_vec();
    names.shuffle(&mut rng);
    roster
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let base = names[i % names.len()];
            let name = if i < names.len() {
                base.to_owned()
            } else {
                format!("{base} {}", i / names.len() + 1)
            };
            (p.clone(), name)
        })
        .collect()
}

pub fn teacher_persona(seed: u64) -> String {
    let mut rng = rng_for(seed, "teacher", 0);
    TEACHER_PERSONAS[rng.random_range(0..TEACHER_PERSONAS.len())].to_owned()
}

/// Spreads the scenario's instruments over the roster so neighbouring
/// players tend to hold different voices of the soundscape.
pub fn assign_instruments(
    roster: &[PlayerId],
    instruments: &[String],
    seed: u64,
) -> BTreeMap<PlayerId, Option<String>> {
    let mut rng = rng_for(seed, "instruments", 0);
    let mut pool: Vec<&String> = instruments.iter().collect();
    pool.shuffle(&mut rng);
    roster
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let inst = (!pool.is_empty()).then(|| pool[i % pool.len()].clone());
            (p.clone(), inst)
        })
        .collect()
}

/// One pair per A/B couple; an odd roster folds its leftover into the last
/// pair, giving exactly one trio.
pub fn assign_pairs(state: &SessionState) -> Vec<Pair> {
    let mut rng = rng_for(state.rng_seed, "pairs", state.token_epoch);
    let mut by_track = |t: Track| -> Vec<PlayerId> {
        let mut v: Vec<PlayerId> = state
            .players
            .values()
            .filter(|p| p.track == t)
            .map(|p| p.player_id.clone())
            .collect();
        v.shuffle(&mut rng);
        v
    };
    let a = by_track(Track::A);
    let b = by_track(Track::B);
    let n = a.len().min(b.len());
    let mut members: Vec<Vec<PlayerId>> =
        (0..n).map(|i| vec![a[i].clone(), b[i].clone()]).collect();
    let leftover: Vec<PlayerId> = a[n..].iter().chain(b[n..].iter()).cloned().collect();
    if let Some(last) = members.last_mut() {
        for p in leftover {
            // Keep track-A members first within the unit.
            let track = state.players[&p].track;
            if track == Track::A {
                last.insert(0, p);
            } else {
                last.push(p);
            }
        }
    }
    members
        .into_iter()
        .enumerate()
        .map(|(i, m)| Pair {
            unit: Unit::new(UnitId(format!("p{:02}", i + 1)), m),
        })
        .collect()
}

/// Partitions all players into groups of four and three (fewest threes),
/// keeping pairs together where the sizes allow.
pub fn assign_groups(state: &SessionState) -> Vec<Group> {
    let n = state.players.len();
    let (fours, threes) =
        group_partition(n).expect("roster size validated to have a {3,4} partition");
    let caps: Vec<usize> = std::iter::repeat_n(4, fours)
        .chain(std::iter::repeat_n(3, threes))
        .collect();
    let mut slots: Vec<Vec<PlayerId>> = vec![Vec::new(); caps.len()];
    let free = |slots: &Vec<Vec<PlayerId>>, g: usize| caps[g] - slots[g].len();

    let mut rng = rng_for(state.rng_seed, "groups", state.token_epoch);
    let mut units: Vec<Vec<PlayerId>> = if state.pairs.is_empty() {
        let mut all: Vec<PlayerId> = state.players.keys().cloned().collect();
        all.shuffle(&mut rng);
        all.into_iter().map(|p| vec![p]).collect()
    } else {
        let mut v: Vec<Vec<PlayerId>> =
            state.pairs.iter().map(|p| p.unit.members.clone()).collect();
        v.shuffle(&mut rng);
        v
    };
    // Larger units first so a trio can claim a three-seat group.
    units.sort_by_key(|u| std::cmp::Reverse(u.len()));

    let mut singles = Vec::new();
    for unit in units {
        let k = unit.len();
        let exact = (0..caps.len()).find(|&g| free(&slots, g) == k);
        let fits = exact.or_else(|| (0..caps.len()).find(|&g| free(&slots, g) >= k));
        match fits {
            Some(g) => slots[g].extend(unit),
            None => singles.extend(unit),
        }
    }
    for p in singles {
        let g = (0..caps.len())
            .find(|&g| free(&slots, g) > 0)
            .expect("capacities sum to the roster size");
        slots[g].push(p);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, members)| Group {
            unit: Unit::new(UnitId(format!("g{}", i + 1)), members),
            task_index: i,
            teacher_visited: false,
            arrival_rank: None,
            teacher_fragment: None,
        })
        .collect()
}

/// Fresh tokens for every roster player, unique within the session and
/// distinct from every token retired in earlier epochs.
pub fn generate_tokens(
    players: &[PlayerId],
    seed: u64,
    epoch: u32,
    retired: &BTreeMap<String, u32>,
) -> BTreeMap<PlayerId, String> {
    let mut rng = rng_for(seed, "tokens", epoch);
    let mut used: BTreeSet<String> = retired.keys().cloned().collect();
    let mut out = BTreeMap::new();
    for p in players {
        let token = loop {
            let t: String = (0..TOKEN_LEN)
                .map(|_| TOKEN_ALPHABET[rng.random_range(0..TOKEN_ALPHABET.len())] as char)
                .collect();
            if used.insert(t.clone()) {
                break t;
            }
        };
        out.insert(p.clone(), token);
    }
    out
}

/// Deals diary fragments (given by ascending order) to `holders`, which are
/// already sorted by join order. With at least as many holders as fragments
/// the deal is one each; otherwise every holder gets a contiguous run, the
/// first `F mod P` holders one longer than the rest.
pub fn deal_diary(orders: &[usize], holders: &[PlayerId]) -> BTreeMap<PlayerId, Vec<usize>> {
    let mut out = BTreeMap::new();
    if holders.is_empty() {
        return out;
    }
    let (f, p) = (orders.len(), holders.len());
    if f <= p {
        for (o, h) in orders.iter().zip(holders) {
            out.insert(h.clone(), vec![*o]);
        }
        return out;
    }
    let (base, extra) = (f / p, f % p);
    let mut next = 0;
    for (j, h) in holders.iter().enumerate() {
        let len = base + usize::from(j < extra);
        out.insert(h.clone(), orders[next..next + len].to_vec());
        next += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roster(n: usize) -> Vec<PlayerId> {
        (0..n).map(|i| PlayerId(format!("s{i:02}"))).collect()
    }

    #[test]
    fn tracks_balance() {
        for (n, seed) in [(4, 1), (7, 2), (20, 3), (21, 4)] {
            let m = assign_tracks(&roster(n), seed);
            let a = m.values().filter(|&&t| t == Track::A).count() as i64;
            let b = m.len() as i64 - a;
            assert!((a - b).abs() <= 1, "n={n}: {a}/{b}");
        }
        let m = assign_tracks(&roster(4), 9);
        assert_eq!(m.values().filter(|&&t| t == Track::A).count(), 2);
        assert_eq!(assign_tracks(&roster(7), 5), assign_tracks(&roster(7), 5));
    }

    #[test]
    fn tokens_unique_and_avoid_retired() {
        let r = roster(60);
        let first = generate_tokens(&r, 3, 1, &BTreeMap::new());
        let retired: BTreeMap<String, u32> = first.values().map(|t| (t.clone(), 1)).collect();
        let second = generate_tokens(&r, 3, 2, &retired);
        let all: BTreeSet<&String> = first.values().chain(second.values()).collect();
        assert_eq!(all.len(), 120);
        for t in second.values() {
            assert_eq!(t.len(), TOKEN_LEN);
            assert!(t.bytes().all(|c| TOKEN_ALPHABET.contains(&c)));
        }
    }

    #[test]
    fn diary_one_each_when_enough_players() {
        let d = deal_diary(&[0, 1, 2], &roster(5));
        assert_eq!(d.len(), 3);
        assert_eq!(d[&PlayerId::from("s00")], vec![0]);
        assert_eq!(d[&PlayerId::from("s02")], vec![2]);
    }

    #[test]
    fn diary_contiguous_runs_when_short_of_players() {
        let orders: Vec<usize> = (0..8).collect();
        let d = deal_diary(&orders, &roster(3));
        assert_eq!(d[&PlayerId::from("s00")], vec![0, 1, 2]);
        assert_eq!(d[&PlayerId::from("s01")], vec![3, 4, 5]);
        assert_eq!(d[&PlayerId::from("s02")], vec![6, 7]);
    }

    #[test]
    fn persona_names_distinct_beyond_pool() {
        let m = assign_personas(&roster(100), 1);
        let names: BTreeSet<&String> = m.values().collect();
        assert_eq!(names.len(), 100);
    }
}
