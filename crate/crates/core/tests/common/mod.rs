//! Independent Block Words oracle: exhaustive uniform-cost search over a
//! direct block-support encoding. Shares no code with the STRIPS path.

#![allow(dead_code)]

pub mod frozen;

use std::collections::{BTreeMap, VecDeque};
use std::hash::{BuildHasherDefault, Hasher};

/// Multiply-xorshift hasher for packed configurations.
#[derive(Default)]
pub struct MixHasher(u64);

impl Hasher for MixHasher {
    fn finish(&self) -> u64 {
        let mut x = self.0;
        x ^= x >> 33;
        x = x.wrapping_mul(0xff51afd7ed558ccd);
        x ^= x >> 33;
        x
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x100000001b3);
        }
    }

    fn write_u128(&mut self, v: u128) {
        self.0 = (self.0 ^ (v as u64)).wrapping_mul(0x9e3779b97f4a7c15)
            ^ ((v >> 64) as u64).wrapping_mul(0xc2b2ae3d27d4eb4f);
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = (self.0 ^ v).wrapping_mul(0x9e3779b97f4a7c15);
    }

    fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }
}

type HashMap<K, V> = std::collections::HashMap<K, V, BuildHasherDefault<MixHasher>>;
type HashSet<K> = std::collections::HashSet<K, BuildHasherDefault<MixHasher>>;

const TABLE: u8 = 14;
const HELD: u8 = 13;
const EMPTY: u8 = 15;

fn get(c: Config, i: usize) -> u8 {
    ((c >> (4 * i)) & 0xf) as u8
}

fn set(c: Config, i: usize, v: u8) -> Config {
    (c & !(0xfu128 << (4 * i))) | ((v as u128) << (4 * i))
}

/// A move in oracle terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Move {
    /// Take `block` (from the table or from atop another block).
    Take { actor: usize, block: u8, from: Option<u8> },
    /// Place `block` on the table (`None`) or on another block.
    Place { actor: usize, block: u8, onto: Option<u8> },
    Pass { actor: usize },
}

impl Move {
    pub fn actor(&self) -> usize {
        match *self {
            Move::Take { actor, .. } | Move::Place { actor, .. } | Move::Pass { actor } => actor,
        }
    }

    /// Renders the move with the STRIPS action names it corresponds to.
    pub fn render(&self, world: &World) -> String {
        let l = |b: u8| world.letters[b as usize];
        match *self {
            Move::Take { actor, block, from: None } => {
                format!("pickup({},{})", world.actors[actor], l(block))
            }
            Move::Take { actor, block, from: Some(y) } => {
                format!("unstack({},{},{})", world.actors[actor], l(block), l(y))
            }
            Move::Place { actor, block, onto: None } => {
                format!("putdown({},{})", world.actors[actor], l(block))
            }
            Move::Place { actor, block, onto: Some(y) } => {
                format!("stack({},{},{})", world.actors[actor], l(block), l(y))
            }
            Move::Pass { actor } => format!("noop({})", world.actors[actor]),
        }
    }

    /// Actor-independent identity used to match observations.
    pub fn object_key(&self) -> Option<(u8, u8, Option<u8>)> {
        match *self {
            Move::Take { block, from, .. } => Some((0, block, from)),
            Move::Place { block, onto, .. } => Some((1, block, onto)),
            Move::Pass { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub letters: Vec<char>,
    pub actors: Vec<String>,
}

/// Nibble-packed: support of each block (block below, TABLE, or HELD), then
/// each actor's hand (block or EMPTY), then the actor to move (only
/// meaningful with turn taking).
pub type Config = u128;

impl World {
    pub fn new(stacks: &[&str], actors: &[&str]) -> (World, Config) {
        let letters: Vec<char> = stacks.iter().flat_map(|s| s.chars()).collect();
        assert!(letters.len() <= 12 && actors.len() <= 3);
        let mut config: Config = 0;
        for i in 0..letters.len() {
            config = set(config, i, TABLE);
        }
        for stack in stacks {
            let chars: Vec<char> = stack.chars().collect();
            for pair in chars.windows(2) {
                let below = letters.iter().position(|&c| c == pair[0]).unwrap();
                let above = letters.iter().position(|&c| c == pair[1]).unwrap();
                config = set(config, above, below as u8);
            }
        }
        for a in 0..actors.len() {
            config = set(config, letters.len() + a, EMPTY);
        }
        (
            World {
                letters,
                actors: actors.iter().map(|s| s.to_string()).collect(),
            },
            config,
        )
    }

    pub fn demo(actors: &[&str]) -> (World, Config) {
        World::new(&["t", "reh", "l", "s", "m", "o", "f", "w", "b", "a"], actors)
    }

    /// The demonstration layout without the single-block stacks whose
    /// letter is not in `relevant`.
    ///
    /// Optimal costs, unsolvability, and shared optimal prefixes are the
    /// same in both worlds as long as every goal and observed block is
    /// relevant. A plan in the full world maps to one in the reduced world
    /// of equal length by treating a dropped block as table: placing onto
    /// it becomes a putdown and taking from it a pickup. Moves of the
    /// dropped block itself can only be removed, so optimal plans never
    /// make them. Conversely every reduced plan runs unchanged in the full
    /// world, where the dropped blocks just sit on the table.
    pub fn demo_reduced(relevant: &str, actors: &[&str]) -> (World, Config) {
        let stacks: Vec<&str> = ["t", "reh", "l", "s", "m", "o", "f", "w", "b", "a"]
            .into_iter()
            .filter(|s| s.len() > 1 || s.chars().all(|c| relevant.contains(c)))
            .collect();
        World::new(&stacks, actors)
    }

    fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn block(&self, c: char) -> u8 {
        self.letters.iter().position(|&l| l == c).unwrap() as u8
    }

    /// Bitmask of blocks with nothing on them and not held.
    fn clear_mask(&self, config: &Config) -> u32 {
        let n = self.n();
        let mut mask = (1u32 << n) - 1;
        for x in 0..n {
            let s = get(*config, x);
            if s == HELD {
                mask &= !(1 << x);
            } else if s != TABLE {
                mask &= !(1 << s);
            }
        }
        mask
    }

    /// All legal moves (with or without turn restriction) in a stable order.
    pub fn moves(&self, config: &Config, turn_taking: bool, with_pass: bool) -> Vec<(Move, Config)> {
        let mut out = Vec::new();
        self.for_each_move(config, turn_taking, with_pass, |m, c| out.push((m, c)));
        out
    }

    pub fn for_each_move(
        &self,
        config: &Config,
        turn_taking: bool,
        with_pass: bool,
        mut emit: impl FnMut(Move, Config),
    ) {
        let n = self.n();
        let clear = self.clear_mask(config);
        for actor in 0..self.actors.len() {
            if turn_taking && get(*config, n + self.actors.len()) as usize != actor {
                continue;
            }
            let next_turn = ((actor + 1) % self.actors.len()) as u8;
            let finish = |c: Config| {
                if turn_taking {
                    set(c, n + self.actors.len(), next_turn)
                } else {
                    c
                }
            };
            let hand = get(*config, n + actor);
            if hand == EMPTY {
                for b in 0..n as u8 {
                    if clear & (1 << b) == 0 {
                        continue;
                    }
                    let from = match get(*config, b as usize) {
                        TABLE => None,
                        y => Some(y),
                    };
                    let c = set(set(*config, b as usize, HELD), n + actor, b);
                    emit(Move::Take { actor, block: b, from }, finish(c));
                }
            } else {
                let c = set(set(*config, hand as usize, TABLE), n + actor, EMPTY);
                emit(Move::Place { actor, block: hand, onto: None }, finish(c));
                for y in 0..n as u8 {
                    if y == hand || clear & (1 << y) == 0 {
                        continue;
                    }
                    let c = set(set(*config, hand as usize, y), n + actor, EMPTY);
                    emit(Move::Place { actor, block: hand, onto: Some(y) }, finish(c));
                }
            }
            if with_pass {
                emit(Move::Pass { actor }, finish(*config));
            }
        }
    }

    /// `on(x,y)` pairs for a word read top-to-bottom.
    pub fn word_pairs(&self, word: &str) -> Vec<(u8, u8)> {
        let chars: Vec<char> = word.chars().collect();
        chars
            .windows(2)
            .map(|p| (self.block(p[0]), self.block(p[1])))
            .collect()
    }

    pub fn satisfies(&self, config: &Config, pairs: &[(u8, u8)]) -> bool {
        pairs.iter().all(|&(x, y)| get(*config, x as usize) == y)
    }

    pub fn holding(&self, config: &Config, actor: usize) -> Option<u8> {
        match get(*config, self.n() + actor) {
            EMPTY => None,
            b => Some(b),
        }
    }
}

/// `config` with `actor` to move, for turn-taking searches.
pub fn with_turn(world: &World, config: Config, actor: usize) -> Config {
    set(config, world.n() + world.actors.len(), actor as u8)
}

/// Moves still needed for `pairs`, counted block by block. The top block
/// x of `on(x,y)` must move if the pair is unmet, or if it is met but y
/// must move (x has to come off first). Each such x needs a take and a
/// place, or just a place when already in hand. Moves touch one block, so
/// this never overestimates; and since a block is clear when taken or
/// placed, a move changes only its own term, by one at most.
pub fn pairs_bound(config: &Config, pairs: &[(u8, u8)]) -> u32 {
    let mut moving = vec![false; pairs.len()];
    // Fixpoint over the chain of pairs; a word has at most 11.
    let mut changed = true;
    while changed {
        changed = false;
        for (i, &(x, y)) in pairs.iter().enumerate() {
            if moving[i] {
                continue;
            }
            let below_moves = pairs.iter().zip(&moving).any(|(&(top, _), &m)| top == y && m);
            if get(*config, x as usize) != y || below_moves {
                moving[i] = true;
                changed = true;
            }
        }
    }
    pairs
        .iter()
        .zip(&moving)
        .filter(|(_, &m)| m)
        .map(|(&(x, _), _)| if get(*config, x as usize) == HELD { 1 } else { 2 })
        .sum::<u32>()
}

/// Unit-cost A* over `(node, key)` with the bound above; `expand` yields
/// successor nodes. Exact because the bound is consistent.
fn unit_astar<N: Copy + Eq + std::hash::Hash + Ord>(
    start: N,
    bound: impl Fn(&N) -> u32,
    done: impl Fn(&N) -> bool,
    mut expand: impl FnMut(&N, &mut dyn FnMut(N)),
) -> Option<u32> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut best: HashMap<N, u32> = HashMap::default();
    let mut open = BinaryHeap::new();
    best.insert(start, 0);
    open.push(Reverse((bound(&start), 0u32, start)));
    while let Some(Reverse((_, g, node))) = open.pop() {
        if best.get(&node).is_some_and(|&b| b < g) {
            continue;
        }
        if done(&node) {
            return Some(g);
        }
        let mut push = |next: N| {
            if best.get(&next).is_none_or(|&b| g + 1 < b) {
                best.insert(next, g + 1);
                open.push(Reverse((g + 1 + bound(&next), g + 1, next)));
            }
        };
        expand(&node, &mut push);
    }
    None
}

/// Optimal number of moves to satisfy `pairs` without turn taking, or `None`.
pub fn optimal_cost(world: &World, start: &Config, pairs: &[(u8, u8)]) -> Option<u32> {
    unit_astar(
        *start,
        |c| pairs_bound(c, pairs),
        |c| world.satisfies(c, pairs),
        |c, push| world.for_each_move(c, false, false, |_, next| push(next)),
    )
}

/// Plain breadth-first version of [`optimal_cost`], used to cross-check it.
pub fn optimal_cost_bfs(world: &World, start: &Config, pairs: &[(u8, u8)]) -> Option<u32> {
    let mut seen: HashSet<Config> = HashSet::default();
    let mut queue = VecDeque::new();
    seen.insert(*start);
    queue.push_back((*start, 0u32));
    while let Some((config, d)) = queue.pop_front() {
        if world.satisfies(&config, pairs) {
            return Some(d);
        }
        world.for_each_move(&config, false, false, |_, next| {
            if seen.insert(next) {
                queue.push_back((next, d + 1));
            }
        });
    }
    None
}

/// Optimal cost of satisfying `pairs` with a plan that does (`comply`) or
/// does not (`!comply`) contain the observed moves, matched by object
/// identity, as an ordered subsequence. Searches over (config, matched
/// prefix length).
pub fn observation_cost(
    world: &World,
    start: &Config,
    pairs: &[(u8, u8)],
    observed: &[Move],
    comply: bool,
) -> Option<u32> {
    let keys: Vec<_> = observed.iter().map(|m| m.object_key().unwrap()).collect();
    let n = keys.len();
    unit_astar(
        (*start, 0usize),
        |(c, level)| pairs_bound(c, pairs).max(if comply { (n - level) as u32 } else { 0 }),
        |(c, level)| (if comply { *level == n } else { *level < n }) && world.satisfies(c, pairs),
        |(c, level), push| {
            world.for_each_move(c, false, false, |mv, next| {
                let level2 = if *level < n && mv.object_key() == Some(keys[*level]) {
                    level + 1
                } else {
                    *level
                };
                if comply || level2 < n {
                    push((next, level2));
                }
            })
        },
    )
}

/// Turn-taking optimal cost with zero-cost passes (0-1 BFS).
pub fn joint_cost(world: &World, start: &Config, pairs: &[(u8, u8)]) -> Option<u32> {
    let mut dist: HashMap<Config, u32> = HashMap::default();
    let mut deque = VecDeque::new();
    dist.insert(*start, 0);
    deque.push_back(*start);
    while let Some(config) = deque.pop_front() {
        let d = dist[&config];
        if world.satisfies(&config, pairs) {
            return Some(d);
        }
        for (mv, next) in world.moves(&config, true, true) {
            let w = if matches!(mv, Move::Pass { .. }) { 0 } else { 1 };
            let nd = d + w;
            if dist.get(&next).is_none_or(|&old| nd < old) {
                dist.insert(next, nd);
                if w == 0 {
                    deque.push_front(next);
                } else {
                    deque.push_back(next);
                }
            }
        }
    }
    None
}

/// Every optimal plan (as rendered move sequences) for `pairs`, without turn
/// taking, enumerated through the BFS layer graph.
pub fn all_optimal_plans(world: &World, start: &Config, pairs: &[(u8, u8)]) -> Vec<Vec<String>> {
    // Forward BFS distances.
    let mut dist: HashMap<Config, u32> = HashMap::default();
    let mut layers: Vec<Vec<Config>> = vec![vec![*start]];
    dist.insert(*start, 0);
    let mut goal_depth = None;
    while goal_depth.is_none() {
        let d = layers.len() - 1;
        if layers[d].iter().any(|c| world.satisfies(c, pairs)) {
            goal_depth = Some(d);
            break;
        }
        let mut next_layer = Vec::new();
        for config in &layers[d] {
            for (_, next) in world.moves(config, false, false) {
                if !dist.contains_key(&next) {
                    dist.insert(next, d as u32 + 1);
                    next_layer.push(next);
                }
            }
        }
        if next_layer.is_empty() {
            return Vec::new();
        }
        layers.push(next_layer);
    }
    let depth = goal_depth.unwrap();
    // Backward: states on some shortest path to a goal state.
    let mut useful: HashSet<Config> = layers[depth]
        .iter()
        .filter(|c| world.satisfies(c, pairs))
        .cloned()
        .collect();
    for d in (0..depth).rev() {
        let keep: Vec<Config> = layers[d]
            .iter()
            .filter(|c| {
                world
                    .moves(c, false, false)
                    .iter()
                    .any(|(_, n)| dist.get(n) == Some(&(d as u32 + 1)) && useful.contains(n))
            })
            .cloned()
            .collect();
        useful.extend(keep);
    }
    let mut plans = Vec::new();
    let mut path = Vec::new();
    fn walk(
        world: &World,
        config: &Config,
        d: u32,
        depth: u32,
        dist: &HashMap<Config, u32>,
        useful: &HashSet<Config>,
        pairs: &[(u8, u8)],
        path: &mut Vec<String>,
        plans: &mut Vec<Vec<String>>,
    ) {
        if d == depth {
            if world.satisfies(config, pairs) {
                plans.push(path.clone());
            }
            return;
        }
        for (mv, next) in world.moves(config, false, false) {
            if dist.get(&next) == Some(&(d + 1)) && useful.contains(&next) {
                path.push(mv.render(world));
                walk(world, &next, d + 1, depth, dist, useful, pairs, path, plans);
                path.pop();
            }
        }
    }
    walk(world, start, 0, depth as u32, &dist, &useful, pairs, &mut path, &mut plans);
    plans
}

/// Longest common prefix over all pairs of plans from two plan sets.
pub fn longest_shared_prefix(a: &[Vec<String>], b: &[Vec<String>]) -> usize {
    let mut prefixes: BTreeMap<&[String], ()> = BTreeMap::new();
    for plan in a {
        for k in 0..=plan.len() {
            prefixes.insert(&plan[..k], ());
        }
    }
    let mut best = 0;
    for plan in b {
        for k in 0..=plan.len() {
            if prefixes.contains_key(&plan[..k]) {
                best = best.max(k);
            }
        }
    }
    best
}

/// Uniform random walk of `steps` moves (no passes, no turn taking).
pub fn random_walk(world: &World, start: &Config, steps: usize, seed: u64) -> (Config, Vec<String>) {
    let mut rng = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut config = *start;
    let mut trace = Vec::new();
    for _ in 0..steps {
        let moves = world.moves(&config, false, false);
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        let (mv, next) = moves[(rng % moves.len() as u64) as usize].clone();
        trace.push(mv.render(world));
        config = next;
    }
    (config, trace)
}
