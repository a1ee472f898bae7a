//! Comparison planning under a budget: pick pairs that share as few
//! identities (FAR) or instances (FRR) as possible, which keeps the variance
//! of the resulting estimate small.

use std::collections::HashSet;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data_model::{IdentityId, Metric};
use crate::error::{invalid, Error, Result};

/// Ordered triples `(i, j, k)`, `j != k`, both different from `i`, weighted by
/// `b_ij b_ik`; `pairs` is a multiset of unordered node pairs over `n` nodes.
/// Equals `sum_i [d_i^2 - sum_j b_ij^2]`.
pub fn sharing_objective(n: usize, pairs: &[(usize, usize)]) -> u64 {
    let mut degree = vec![0u64; n];
    let mut mult = std::collections::HashMap::new();
    for &(a, b) in pairs {
        degree[a] += 1;
        degree[b] += 1;
        *mult.entry((a.min(b), a.max(b))).or_insert(0u64) += 1;
    }
    let sq: u64 = degree.iter().map(|d| d * d).sum();
    let self_sq: u64 = mult.values().map(|b| 2 * b * b).sum();
    sq - self_sq
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedComparison {
    /// 1-based position in the plan.
    pub iteration: usize,
    /// Pass over the identity pairs (FAR) or identities (FRR), 1-based.
    pub cycle: usize,
    pub id_a: IdentityId,
    pub instance_a: usize,
    pub id_b: IdentityId,
    pub instance_b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub metric: Metric,
    pub budget: usize,
    pub selections: Vec<PlannedComparison>,
    /// Identity-sharing triples (FAR) or instance-sharing triples (FRR).
    pub objective_value: u64,
    pub truncated: bool,
    pub warnings: Vec<String>,
}

impl ProtocolPlan {
    /// `iteration,id_a,instance_a,id_b,instance_b` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let e = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["iteration", "id_a", "instance_a", "id_b", "instance_b"]).map_err(e)?;
        for s in &self.selections {
            w.write_record([
                s.iteration.to_string(),
                s.id_a.to_string(),
                s.instance_a.to_string(),
                s.id_b.to_string(),
                s.instance_b.to_string(),
            ])
            .map_err(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The first `limit` pairs of an ordering of all pairs of `n` nodes in which
/// every prefix has node degrees differing by at most one, so each step is
/// also a pair with the smallest summed visit count. Nodes are positions in
/// a preference ranking; the first pairs are `(0, 1), (2, 3), ...`.
///
/// Even `n`: rounds of the circle-method round robin, each a perfect
/// matching. Odd `n`: the Hamiltonian cycles of the Walecki decomposition,
/// each `v0 .. v_{n-1}` taken as the matching `(v1, v2), (v3, v4), ...`, the
/// edge `(v_{n-1}, v0)`, then the matching `(v0, v1), (v2, v3), ...`.
pub fn balanced_pair_order(n: usize, limit: usize) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    let limit = limit.min(total);
    let mut out = Vec::with_capacity(limit);
    if limit == 0 {
        return out;
    }
    if n % 2 == 0 {
        let h = n - 1;
        let round = |r: usize| {
            let mut e = vec![(n - 1, r)];
            for k in 1..n / 2 {
                e.push(((r + k) % h, (r + h - k) % h));
            }
            e
        };
        let mut pos = vec![0; n];
        for (k, &(a, b)) in round(0).iter().enumerate() {
            pos[a] = 2 * k;
            pos[b] = 2 * k + 1;
        }
        'rounds: for r in 0..h {
            let mut e: Vec<(usize, usize)> = round(r).into_iter().map(|(a, b)| order_pair(pos[a], pos[b])).collect();
            e.sort();
            for p in e {
                if out.len() == limit {
                    break 'rounds;
                }
                out.push(p);
            }
        }
    } else {
        let k = n / 2;
        let m = 2 * k;
        let cycle = |i: usize| {
            let mut c = vec![m, i];
            for j in 1..k {
                c.push((i + j) % m);
                c.push((i + m - j) % m);
            }
            c.push((i + k) % m);
            c
        };
        let first = cycle(0);
        let mut pos = vec![0; n];
        for (t, &v) in first.iter().enumerate() {
            pos[v] = if t == 0 { n - 1 } else { t - 1 };
        }
        'cycles: for i in 0..k {
            let c: Vec<usize> = cycle(i).into_iter().map(|v| pos[v]).collect();
            let mut seq = Vec::with_capacity(n);
            for t in (1..n).step_by(2) {
                seq.push(order_pair(c[t], c[t + 1]));
            }
            seq.push(order_pair(c[n - 1], c[0]));
            for t in (0..n - 1).step_by(2) {
                seq.push(order_pair(c[t], c[t + 1]));
            }
            for p in seq {
                if out.len() == limit {
                    break 'cycles;
                }
                out.push(p);
            }
        }
    }
    out
}

fn order_pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn check_units(units: &[(IdentityId, usize)]) -> Result<()> {
    let mut seen = HashSet::new();
    for (id, m) in units {
        if *m == 0 {
            return Err(invalid(format!("identity {id} has no instances")));
        }
        if !seen.insert(id) {
            return Err(invalid(format!("duplicate identity {id}")));
        }
    }
    Ok(())
}

/// Identities sorted by decreasing `key`, then label.
fn ranked(units: &[(IdentityId, usize)], key: impl Fn(usize) -> usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| key(b).cmp(&key(a)).then_with(|| units[a].0.cmp(&units[b].0)));
    order
}

fn finish(metric: Metric, budget: usize, available: usize, selections: Vec<PlannedComparison>, objective: u64) -> ProtocolPlan {
    let mut warnings = Vec::new();
    let truncated = budget > available;
    if truncated {
        let msg = format!("budget {budget} exceeds the {available} available comparisons; plan truncated");
        warn!("{msg}");
        warnings.push(msg);
    }
    ProtocolPlan {
        metric,
        budget,
        selections,
        objective_value: objective,
        truncated,
        warnings,
    }
}

/// Impostor comparison plan. The first cycle orders identity pairs greedily,
/// favouring identities with more instances on ties; later cycles revisit
/// the identity pairs in the same order, each time with a fresh instance
/// pair built from the least-used instances.
pub fn plan_far_protocol(units: &[(IdentityId, usize)], budget: usize) -> Result<ProtocolPlan> {
    check_units(units)?;
    let g = units.len();
    if g < 2 {
        return Err(invalid("FAR protocol needs at least two identities"));
    }
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let m: Vec<usize> = units.iter().map(|u| u.1).collect();
    let n_id_pairs = g * (g - 1) / 2;
    let mut available = 0usize;
    for a in 0..g {
        for b in a + 1..g {
            available += m[a] * m[b];
        }
    }
    let by_rank = ranked(units, |i| m[i]);
    let limit = if budget > n_id_pairs { n_id_pairs } else { budget };
    let order: Vec<(usize, usize)> = balanced_pair_order(g, limit)
        .into_iter()
        .map(|(a, b)| (by_rank[a], by_rank[b]))
        .collect();

    let mut inst_use: Vec<Vec<u64>> = m.iter().map(|&k| vec![0; k]).collect();
    let mut pair_used: HashSet<(usize, usize, usize, usize)> = HashSet::new();
    let mut selections = Vec::new();
    let mut id_pairs = Vec::new();
    let target = budget.min(available);
    let mut cycle = 0;
    while selections.len() < target {
        cycle += 1;
        for &(a, b) in &order {
            if selections.len() >= target {
                break;
            }
            let Some((ka, kb)) = least_used_pair(&inst_use[a], &inst_use[b], |x, y| {
                !pair_used.contains(&(a, x, b, y))
            }) else {
                continue;
            };
            pair_used.insert((a, ka, b, kb));
            inst_use[a][ka] += 1;
            inst_use[b][kb] += 1;
            id_pairs.push((a, b));
            selections.push(PlannedComparison {
                iteration: selections.len() + 1,
                cycle,
                id_a: units[a].0.clone(),
                instance_a: ka,
                id_b: units[b].0.clone(),
                instance_b: kb,
            });
        }
    }
    let objective = sharing_objective(g, &id_pairs);
    Ok(finish(Metric::Far, budget, available, selections, objective))
}

/// Instance pair `(x, y)` minimising summed use, first in index order.
fn least_used_pair(ua: &[u64], ub: &[u64], free: impl Fn(usize, usize) -> bool) -> Option<(usize, usize)> {
    let mut best: Option<(u64, usize, usize)> = None;
    let mut xa: Vec<usize> = (0..ua.len()).collect();
    xa.sort_by_key(|&x| (ua[x], x));
    let mut yb: Vec<usize> = (0..ub.len()).collect();
    yb.sort_by_key(|&y| (ub[y], y));
    for &x in &xa {
        for &y in &yb {
            let s = ua[x] + ub[y];
            if best.is_some_and(|b| s >= b.0) {
                break;
            }
            if free(x, y) {
                best = Some((s, x, y));
                break;
            }
        }
    }
    best.map(|b| (b.1, b.2))
}

/// Genuine comparison plan. Identities are visited round-robin in order of
/// decreasing genuine-pair count; each visit adds one instance pair chosen
/// greedily among that identity's instances.
pub fn plan_frr_protocol(units: &[(IdentityId, usize)], budget: usize) -> Result<ProtocolPlan> {
    check_units(units)?;
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let m: Vec<usize> = units.iter().map(|u| u.1).collect();
    if m.iter().all(|&k| k < 2) {
        return Err(invalid("FRR protocol needs an identity with at least two instances"));
    }
    let available: usize = m.iter().map(|&k| k * (k - 1) / 2).sum();
    let id_order: Vec<usize> = ranked(units, |i| m[i] * m[i].saturating_sub(1))
        .into_iter()
        .filter(|&i| m[i] >= 2)
        .collect();
    let mut next_pair = vec![0usize; units.len()];
    let mut pair_order: Vec<Vec<(usize, usize)>> = vec![Vec::new(); units.len()];
    let offsets: Vec<usize> = m
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    let total: usize = m.iter().sum();
    let mut selections = Vec::new();
    let mut nodes = Vec::new();
    let target = budget.min(available);
    let mut cycle = 0;
    while selections.len() < target {
        cycle += 1;
        for &i in &id_order {
            if selections.len() >= target {
                break;
            }
            if pair_order[i].is_empty() {
                pair_order[i] = balanced_pair_order(m[i], target);
            }
            let Some(&(x, y)) = pair_order[i].get(next_pair[i]) else {
                continue;
            };
            next_pair[i] += 1;
            nodes.push((offsets[i] + x, offsets[i] + y));
            selections.push(PlannedComparison {
                iteration: selections.len() + 1,
                cycle,
                id_a: units[i].0.clone(),
                instance_a: x,
                id_b: units[i].0.clone(),
                instance_b: y,
            });
        }
    }
    let objective = sharing_objective(total, &nodes);
    Ok(finish(Metric::Frr, budget, available, selections, objective))
}
