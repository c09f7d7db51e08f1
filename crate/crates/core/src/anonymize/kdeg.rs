//! k-degree anonymity for directed graphs.
//!
//! Two phases. Phase one anonymizes the out-degree and in-degree
//! sequences independently with the classic grouping dynamic program:
//! sorted degrees are partitioned into runs of size k..2k-1 and each run
//! is raised to its maximum (add-only) or moved to its median (add/del).
//! Phase two realizes the target sequences by editing edges greedily,
//! with a relaxation pass that raises whole groups by one when the greedy
//! edit stalls. Raising a whole group keeps its members sharing a degree
//! value, so k-anonymity of realized values survives relaxation; the
//! result is still checked by `verify_k_anonymity` in tests rather than
//! trusted.

use std::collections::BTreeMap;

use crate::anonymize::EdgeSet;
use crate::error::{Error, Result};
use crate::model::{SocialNetwork, UserId};

const INF: u64 = u64::MAX / 2;
/// Relaxation rounds before declaring the instance infeasible.
const MAX_RELAX_ROUNDS: usize = 60;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    AddOnly,
    AddDel,
}

/// Result of the add/del variant; `added + removed` is the edit count.
#[derive(Clone, Debug)]
pub struct KdegOutcome {
    pub edges: EdgeSet,
    pub added: usize,
    pub removed: usize,
}

/// Verification report: `ok` iff every realized in-degree value and every
/// out-degree value is shared by at least k nodes.
#[derive(Clone, Debug)]
pub struct KAnonReport {
    pub ok: bool,
    /// (direction, degree value, number of nodes with it) for violations.
    pub violations: Vec<(String, usize, usize)>,
}

/// Checks k-anonymity of realized degree values over the given user set.
/// Users without edges count with degree zero.
pub fn verify_k_anonymity(users: &[UserId], edges: &EdgeSet, k: usize) -> KAnonReport {
    let index: BTreeMap<UserId, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut out_deg = vec![0usize; users.len()];
    let mut in_deg = vec![0usize; users.len()];
    for &(a, b) in edges {
        if let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) {
            out_deg[ia] += 1;
            in_deg[ib] += 1;
        }
    }
    let mut violations = Vec::new();
    for (name, degrees) in [("out", &out_deg), ("in", &in_deg)] {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &d in degrees.iter() {
            *counts.entry(d).or_default() += 1;
        }
        for (value, count) in counts {
            if count < k {
                violations.push((name.to_string(), value, count));
            }
        }
    }
    KAnonReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// k-degree anonymization by edge addition only. The output is a superset
/// of the input edge set.
pub fn kdeg_add(network: &SocialNetwork, k: usize) -> Result<EdgeSet> {
    Ok(run(network, k, Mode::AddOnly)?.edges)
}

/// k-degree anonymization with simultaneous additions and removals.
pub fn kdeg_add_del(network: &SocialNetwork, k: usize) -> Result<KdegOutcome> {
    run(network, k, Mode::AddDel)
}

struct Graph {
    n: usize,
    present: std::collections::HashSet<(u32, u32)>,
    out_deg: Vec<usize>,
    in_deg: Vec<usize>,
}

impl Graph {
    fn has(&self, a: usize, b: usize) -> bool {
        self.present.contains(&(a as u32, b as u32))
    }

    fn add(&mut self, a: usize, b: usize) {
        debug_assert!(a != b && !self.has(a, b));
        self.present.insert((a as u32, b as u32));
        self.out_deg[a] += 1;
        self.in_deg[b] += 1;
    }

    fn remove(&mut self, a: usize, b: usize) {
        debug_assert!(self.has(a, b));
        self.present.remove(&(a as u32, b as u32));
        self.out_deg[a] -= 1;
        self.in_deg[b] -= 1;
    }
}

fn run(network: &SocialNetwork, k: usize, mode: Mode) -> Result<KdegOutcome> {
    let users: Vec<UserId> = network.users().collect();
    let n = users.len();
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::Infeasible(format!(
            "k = {k} exceeds the {n} nodes in the graph"
        )));
    }
    if k == 1 {
        // Every graph is 1-degree-anonymous.
        return Ok(KdegOutcome {
            edges: network.edges().clone(),
            added: 0,
            removed: 0,
        });
    }

    let index: BTreeMap<UserId, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut graph = Graph {
        n,
        present: std::collections::HashSet::with_capacity(network.n_edges() * 2),
        out_deg: vec![0; n],
        in_deg: vec![0; n],
    };
    for &(a, b) in network.edges() {
        graph.add(index[&a], index[&b]);
    }
    let original = graph.present.clone();

    let mut out_plan = plan_sequence(&graph.out_deg, k, mode)?;
    let mut in_plan = plan_sequence(&graph.in_deg, k, mode)?;
    equalize_totals(&mut out_plan, &mut in_plan, n, mode)?;

    match mode {
        Mode::AddOnly => realize_add_only(&mut graph, &mut out_plan, &mut in_plan)?,
        Mode::AddDel => realize_add_del(&mut graph, &mut out_plan, &mut in_plan)?,
    }

    let mut added = 0;
    let mut removed = 0;
    for e in &graph.present {
        if !original.contains(e) {
            added += 1;
        }
    }
    for e in &original {
        if !graph.present.contains(e) {
            removed += 1;
        }
    }
    let edges: EdgeSet = graph
        .present
        .iter()
        .map(|&(a, b)| (users[a as usize], users[b as usize]))
        .collect();
    Ok(KdegOutcome {
        edges,
        added,
        removed,
    })
}

struct DegreePlan {
    /// Target degree per node index.
    targets: Vec<usize>,
    /// Node indices per group; every group's targets stay uniform.
    groups: Vec<Vec<usize>>,
}

impl DegreePlan {
    fn total(&self) -> usize {
        self.targets.iter().sum()
    }

    /// Raises every member of a group by one.
    fn raise_group(&mut self, g: usize) {
        for &v in &self.groups[g] {
            self.targets[v] += 1;
        }
    }
}

/// Groups the degree sequence into runs of size k..2k-1 minimizing total
/// edit cost, via the standard O(n k) dynamic program over the sequence
/// sorted descending.
fn plan_sequence(degrees: &[usize], k: usize, mode: Mode) -> Result<DegreePlan> {
    let n = degrees.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));
    let d: Vec<usize> = order.iter().map(|&v| degrees[v]).collect();
    let prefix: Vec<u64> = std::iter::once(0u64)
        .chain(d.iter().scan(0u64, |acc, &x| {
            *acc += x as u64;
            Some(*acc)
        }))
        .collect();
    let range_sum = |i: usize, j: usize| prefix[j + 1] - prefix[i];

    // Cost of making positions i..=j one group.
    let cost = |i: usize, j: usize| -> u64 {
        match mode {
            Mode::AddOnly => (d[i] as u64) * ((j - i + 1) as u64) - range_sum(i, j),
            Mode::AddDel => {
                // d is descending: positions i..=m are >= med, m+1..=j <= med.
                let m = i + (j - i) / 2;
                let med = d[m] as u64;
                let above = range_sum(i, m) - med * ((m - i + 1) as u64);
                let below = med * ((j - m) as u64) - range_sum(m + 1, j);
                above + below
            }
        }
    };

    let mut f = vec![INF; n + 1];
    let mut choice = vec![0usize; n];
    f[n] = 0;
    for i in (0..n).rev() {
        let max_s = (2 * k - 1).min(n - i);
        for s in k..=max_s {
            if f[i + s] == INF {
                continue;
            }
            let c = cost(i, i + s - 1) + f[i + s];
            if c < f[i] {
                f[i] = c;
                choice[i] = s;
            }
        }
    }
    if f[0] == INF {
        return Err(Error::Infeasible(format!(
            "cannot partition {n} degrees into groups of at least {k}"
        )));
    }

    let mut targets = vec![0usize; n];
    let mut groups = Vec::new();
    let mut i = 0;
    while i < n {
        let s = choice[i];
        let members: Vec<usize> = order[i..i + s].to_vec();
        let target = match mode {
            Mode::AddOnly => d[i],
            Mode::AddDel => d[i + (s - 1) / 2],
        };
        for &v in &members {
            targets[v] = target;
        }
        groups.push(members);
        i += s;
    }
    Ok(DegreePlan { targets, groups })
}

/// One raisable unit: `group` raised `mult` times adds `total` to the
/// side's target sum. Groups are binary-split so each coin is 0/1 while
/// per-group raise counts stay within the n-1 degree cap.
struct Coin {
    group: usize,
    mult: usize,
    total: usize,
}

/// Builds the coin set for a plan: group g of size s whose target can
/// still rise by c (before hitting n-1) yields coins s*1, s*2, s*4, ...
/// covering any raise count up to c.
fn coin_set(plan: &DegreePlan, n: usize) -> Vec<Coin> {
    let mut coins = Vec::new();
    for (g, members) in plan.groups.iter().enumerate() {
        let size = members.len();
        let target = plan.targets[members[0]];
        let mut left = (n.saturating_sub(1)).saturating_sub(target);
        let mut mult = 1;
        while left > 0 {
            let take = mult.min(left);
            coins.push(Coin {
                group: g,
                mult: take,
                total: size * take,
            });
            left -= take;
            mult *= 2;
        }
    }
    coins
}

/// 0/1 knapsack reachability over the coin set. `parent[s]` is the coin
/// completing sum `s`; walking parents yields a valid decomposition since
/// sums are filled in descending order per coin.
fn reachable(coins: &[Coin], limit: usize, rotation: usize) -> Vec<Option<usize>> {
    let mut parent: Vec<Option<usize>> = vec![None; limit + 1];
    parent[0] = Some(usize::MAX);
    if coins.is_empty() {
        return parent;
    }
    for i in 0..coins.len() {
        let ci = (i + rotation) % coins.len();
        let c = coins[ci].total;
        if c == 0 || c > limit {
            continue;
        }
        for s in (c..=limit).rev() {
            if parent[s].is_none() && parent[s - c].is_some() {
                parent[s] = Some(ci);
            }
        }
    }
    parent
}

/// Applies the raises that realize sum `x` in the reachability table.
fn apply_raises(plan: &mut DegreePlan, parent: &[Option<usize>], coins: &[Coin], mut x: usize) {
    while x > 0 {
        let ci = parent[x].expect("apply_raises called on reachable sum");
        let coin = &coins[ci];
        for _ in 0..coin.mult {
            plan.raise_group(coin.group);
        }
        x -= coin.total;
    }
}

/// Makes the out- and in-target totals equal by raising whole groups by
/// one on either side, preferring the smallest combined raise.
fn equalize_totals(
    out_plan: &mut DegreePlan,
    in_plan: &mut DegreePlan,
    n: usize,
    _mode: Mode,
) -> Result<()> {
    let t_out = out_plan.total() as i64;
    let t_in = in_plan.total() as i64;
    if t_out == t_in {
        return Ok(());
    }
    // `low` must gain `gap` more than `high` gains.
    let (low, high, gap) = if t_out < t_in {
        (&mut *out_plan, &mut *in_plan, (t_in - t_out) as usize)
    } else {
        (&mut *in_plan, &mut *out_plan, (t_out - t_in) as usize)
    };
    let low_coins = coin_set(low, n);
    let high_coins = coin_set(high, n);
    let limit = gap + 32 * (2 * n / low_coins.len().max(1)).max(8) + 64;
    let low_reach = reachable(&low_coins, limit, 0);
    let high_reach = reachable(&high_coins, limit, 0);
    let y = (0..=limit.saturating_sub(gap))
        .find(|&y| high_reach[y].is_some() && low_reach[y + gap].is_some())
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "cannot balance degree totals (gap {gap}) with the available group sizes"
            ))
        })?;
    apply_raises(low, &low_reach, &low_coins, y + gap);
    apply_raises(high, &high_reach, &high_coins, y);
    Ok(())
}

/// Raises both sides by the same smallest positive reachable amount; used
/// when greedy realization stalls with matching totals.
fn relax_both(
    out_plan: &mut DegreePlan,
    in_plan: &mut DegreePlan,
    n: usize,
    rotation: usize,
) -> Result<usize> {
    let out_coins = coin_set(out_plan, n);
    let in_coins = coin_set(in_plan, n);
    let limit = 16 * (2 * n - 1).min(512) + 64;
    let out_reach = reachable(&out_coins, limit, rotation);
    let in_reach = reachable(&in_coins, limit, rotation);
    let z = (1..=limit)
        .find(|&z| out_reach[z].is_some() && in_reach[z].is_some())
        .ok_or_else(|| Error::Infeasible("no common relaxation amount exists".into()))?;
    apply_raises(out_plan, &out_reach, &out_coins, z);
    apply_raises(in_plan, &in_reach, &in_coins, z);
    Ok(z)
}

/// Greedy edge additions toward the targets: repeatedly connect the
/// largest out-deficit node to the largest in-deficit node it is not yet
/// pointing at.
fn realize_add_only(
    graph: &mut Graph,
    out_plan: &mut DegreePlan,
    in_plan: &mut DegreePlan,
) -> Result<()> {
    let n = graph.n;
    let mut relax_rounds = 0;
    loop {
        let mut def_out: Vec<i64> = (0..n)
            .map(|v| out_plan.targets[v] as i64 - graph.out_deg[v] as i64)
            .collect();
        let mut def_in: Vec<i64> = (0..n)
            .map(|v| in_plan.targets[v] as i64 - graph.in_deg[v] as i64)
            .collect();
        debug_assert!(def_out.iter().all(|&d| d >= 0));
        debug_assert!(def_in.iter().all(|&d| d >= 0));

        let mut progressed = true;
        while progressed {
            progressed = false;
            let mut sources: Vec<usize> = (0..n).filter(|&v| def_out[v] > 0).collect();
            if sources.is_empty() {
                break;
            }
            sources.sort_by(|&a, &b| def_out[b].cmp(&def_out[a]).then(a.cmp(&b)));
            let mut sinks: Vec<usize> = (0..n).filter(|&v| def_in[v] > 0).collect();
            sinks.sort_by(|&a, &b| def_in[b].cmp(&def_in[a]).then(a.cmp(&b)));
            'outer: for &a in &sources {
                for &b in &sinks {
                    if a != b && !graph.has(a, b) {
                        graph.add(a, b);
                        def_out[a] -= 1;
                        def_in[b] -= 1;
                        progressed = true;
                        break 'outer;
                    }
                }
            }
        }

        if def_out.iter().all(|&d| d == 0) && def_in.iter().all(|&d| d == 0) {
            return Ok(());
        }
        relax_rounds += 1;
        if relax_rounds > MAX_RELAX_ROUNDS {
            return Err(Error::Infeasible(
                "edge-addition realization stalled beyond the relaxation budget".into(),
            ));
        }
        relax_both(out_plan, in_plan, n, relax_rounds)?;
    }
}

/// Greedy realization allowing additions, removals and reroutes. Every
/// move lowers the total |target - degree| by two, so progress is
/// monotone between relaxations.
fn realize_add_del(
    graph: &mut Graph,
    out_plan: &mut DegreePlan,
    in_plan: &mut DegreePlan,
) -> Result<()> {
    let n = graph.n;
    let mut relax_rounds = 0;
    loop {
        let mut progressed = true;
        while progressed {
            progressed = false;
            let delta_out: Vec<i64> = (0..n)
                .map(|v| out_plan.targets[v] as i64 - graph.out_deg[v] as i64)
                .collect();
            let delta_in: Vec<i64> = (0..n)
                .map(|v| in_plan.targets[v] as i64 - graph.in_deg[v] as i64)
                .collect();
            if delta_out.iter().all(|&d| d == 0) && delta_in.iter().all(|&d| d == 0) {
                return Ok(());
            }
            if try_add(graph, &delta_out, &delta_in)
                || try_remove(graph, &delta_out, &delta_in)
                || try_reroute(graph, &delta_out, &delta_in)
            {
                progressed = true;
            }
        }
        relax_rounds += 1;
        if relax_rounds > MAX_RELAX_ROUNDS {
            return Err(Error::Infeasible(
                "add/del realization stalled beyond the relaxation budget".into(),
            ));
        }
        relax_both(out_plan, in_plan, n, relax_rounds)?;
    }
}

fn try_add(graph: &mut Graph, delta_out: &[i64], delta_in: &[i64]) -> bool {
    let n = graph.n;
    let mut sources: Vec<usize> = (0..n).filter(|&v| delta_out[v] > 0).collect();
    sources.sort_by(|&a, &b| delta_out[b].cmp(&delta_out[a]).then(a.cmp(&b)));
    let mut sinks: Vec<usize> = (0..n).filter(|&v| delta_in[v] > 0).collect();
    sinks.sort_by(|&a, &b| delta_in[b].cmp(&delta_in[a]).then(a.cmp(&b)));
    for &a in &sources {
        for &b in &sinks {
            if a != b && !graph.has(a, b) {
                graph.add(a, b);
                return true;
            }
        }
    }
    false
}

fn try_remove(graph: &mut Graph, delta_out: &[i64], delta_in: &[i64]) -> bool {
    let mut edges: Vec<(u32, u32)> = graph
        .present
        .iter()
        .copied()
        .filter(|&(a, b)| delta_out[a as usize] < 0 && delta_in[b as usize] < 0)
        .collect();
    edges.sort_unstable();
    if let Some(&(a, b)) = edges.first() {
        graph.remove(a as usize, b as usize);
        return true;
    }
    false
}

/// Reroute moves: shift one endpoint of an existing edge so a surplus and
/// a deficit cancel without touching the other endpoint's degree.
fn try_reroute(graph: &mut Graph, delta_out: &[i64], delta_in: &[i64]) -> bool {
    let n = graph.n;
    let mut edges: Vec<(u32, u32)> = graph.present.iter().copied().collect();
    edges.sort_unstable();

    // Out-side: (a, b) with out-surplus at a; hand the edge to some c
    // needing out-degree.
    for &(a, b) in &edges {
        let (a, b) = (a as usize, b as usize);
        if delta_out[a] < 0 {
            for c in 0..n {
                if delta_out[c] > 0 && c != b && !graph.has(c, b) {
                    graph.remove(a, b);
                    graph.add(c, b);
                    return true;
                }
            }
        }
    }
    // In-side: (a, b) with in-surplus at b; point the edge at some d
    // needing in-degree.
    for &(a, b) in &edges {
        let (a, b) = (a as usize, b as usize);
        if delta_in[b] < 0 {
            for d in 0..n {
                if delta_in[d] > 0 && d != a && !graph.has(a, d) {
                    graph.remove(a, b);
                    graph.add(a, d);
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn star(n: u64) -> SocialNetwork {
        let mut net = SocialNetwork::new();
        for u in 0..n {
            net.add_user(UserId(u));
        }
        for u in 1..n {
            net.add_edge(UserId(0), UserId(u)).unwrap();
        }
        net
    }

    fn users(net: &SocialNetwork) -> Vec<UserId> {
        net.users().collect()
    }

    #[test]
    fn verify_regular_graph_and_star() {
        let mut ring = SocialNetwork::new();
        for u in 0..6u64 {
            ring.add_user(UserId(u));
        }
        for u in 0..6u64 {
            ring.add_edge(UserId(u), UserId((u + 1) % 6)).unwrap();
        }
        assert!(verify_k_anonymity(&users(&ring), ring.edges(), 6).ok);

        let s = star(5);
        let report = verify_k_anonymity(&users(&s), s.edges(), 2);
        assert!(!report.ok);
        assert!(report
            .violations
            .iter()
            .any(|(dir, value, count)| dir == "out" && *value == 4 && *count == 1));
    }

    #[test]
    fn k_one_is_identity() {
        let s = star(5);
        assert_eq!(&kdeg_add(&s, 1).unwrap(), s.edges());
        assert_eq!(&kdeg_add_del(&s, 1).unwrap().edges, s.edges());
    }

    #[test]
    fn k_larger_than_n_is_infeasible() {
        let s = star(4);
        assert!(matches!(kdeg_add(&s, 5), Err(Error::Infeasible(_))));
    }

    #[test]
    fn star_becomes_two_anonymous_by_addition() {
        let s = star(5);
        let out = kdeg_add(&s, 2).unwrap();
        assert!(out.is_superset(s.edges()), "add-only must keep input edges");
        let report = verify_k_anonymity(&users(&s), &out, 2);
        assert!(report.ok, "violations: {:?}", report.violations);
    }

    #[test]
    fn star_becomes_two_anonymous_by_add_del() {
        let s = star(5);
        let out = kdeg_add_del(&s, 2).unwrap();
        let report = verify_k_anonymity(&users(&s), &out.edges, 2);
        assert!(report.ok, "violations: {:?}", report.violations);
    }

    #[test]
    fn random_graphs_pass_verification_at_k10() {
        for seed in 0..8u64 {
            let mut net = SocialNetwork::new();
            let n = 120u64;
            for u in 0..n {
                net.add_user(UserId(u));
            }
            let mut rng = rng_from_seed(seed);
            for _ in 0..500 {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b {
                    let _ = net.add_edge(UserId(a), UserId(b));
                }
            }
            let us = users(&net);

            let added = kdeg_add(&net, 10).unwrap();
            assert!(added.is_superset(net.edges()));
            let report = verify_k_anonymity(&us, &added, 10);
            assert!(report.ok, "seed {seed} add: {:?}", report.violations);

            let outcome = kdeg_add_del(&net, 10).unwrap();
            let report = verify_k_anonymity(&us, &outcome.edges, 10);
            assert!(report.ok, "seed {seed} add_del: {:?}", report.violations);
        }
    }
}
