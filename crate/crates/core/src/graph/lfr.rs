//! LFR-style benchmark graphs with planted communities.
//!
//! Degrees and community sizes follow truncated power laws. Each node splits
//! its degree into an internal part, `≈ (1 − μ)·k`, wired by stub matching
//! inside its community, and an external part wired by stub matching across
//! communities. Invalid pairs (self-loops, repeats, same-community external
//! pairs) are repaired by random pair swaps, and dropped if no swap works.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, Labels};
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LfrParams {
    pub n: usize,
    pub avg_degree: f64,
    pub min_community: usize,
    pub mu: f64,
    pub degree_exponent: f64,
    pub community_exponent: f64,
    /// Largest community size; `None` means `max(min_community, n / 10)`.
    #[serde(default)]
    pub max_community: Option<usize>,
    pub seed: u64,
}

impl Default for LfrParams {
    fn default() -> Self {
        LfrParams {
            n: 5000,
            avg_degree: 5.0,
            min_community: 50,
            mu: 0.1,
            degree_exponent: 3.0,
            community_exponent: 1.5,
            max_community: None,
            seed: 0,
        }
    }
}

impl LfrParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.min_community == 0 || self.min_community > self.n {
            return bad(format!(
                "min_community {} infeasible for n = {}",
                self.min_community, self.n
            ));
        }
        if self.n < 2 * self.min_community {
            return bad(format!(
                "n = {} must be at least 2·min_community = {}",
                self.n,
                2 * self.min_community
            ));
        }
        if self.max_size() < self.min_community || self.max_size() > self.n {
            return bad(format!(
                "max_community {} outside [{}, {}]",
                self.max_size(),
                self.min_community,
                self.n
            ));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return bad(format!("mu {} not in [0, 1)", self.mu));
        }
        if !(self.degree_exponent > 1.0 && self.community_exponent > 1.0) {
            return bad("power-law exponents must exceed 1".into());
        }
        if self.avg_degree.is_nan() || self.avg_degree < 1.0 {
            return bad(format!("avg_degree {} below 1", self.avg_degree));
        }
        Ok(())
    }

    pub fn max_size(&self) -> usize {
        self.max_community
            .unwrap_or_else(|| self.min_community.max(self.n / 10))
    }

    fn max_degree(&self) -> f64 {
        let cap = (self.n - 1).min(self.min_community) as f64;
        cap.max(2.0 * self.avg_degree).min((self.n - 1) as f64)
    }
}

/// Mean of the continuous power law `x^-γ` truncated to `[a, b]`.
fn truncated_mean(a: f64, b: f64, gamma: f64) -> f64 {
    let close = |x: f64, y: f64| (x - y).abs() < 1e-9;
    if close(gamma, 1.0) {
        (b - a) / (b / a).ln()
    } else if close(gamma, 2.0) {
        (b / a).ln() / (1.0 / a - 1.0 / b)
    } else {
        let (e1, e2) = (1.0 - gamma, 2.0 - gamma);
        (e1 / e2) * (b.powf(e2) - a.powf(e2)) / (b.powf(e1) - a.powf(e1))
    }
}

/// Inverse-CDF draw from `x^-γ` on `[a, b]`.
fn draw_power_law(a: f64, b: f64, gamma: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    if (gamma - 1.0).abs() < 1e-9 {
        a * (b / a).powf(u)
    } else {
        let e = 1.0 - gamma;
        (a.powf(e) + u * (b.powf(e) - a.powf(e))).powf(1.0 / e)
    }
}

fn degree_sequence(p: &LfrParams, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let kmax = p.max_degree();
    // Lower cutoff chosen so the truncated mean matches the target.
    let (mut lo, mut hi) = (1.0, kmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if truncated_mean(mid, kmax, p.degree_exponent) < p.avg_degree {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kmin = 0.5 * (lo + hi);
    (0..p.n)
        .map(|_| {
            let x = draw_power_law(kmin, kmax, p.degree_exponent, rng);
            (x.round() as usize).clamp(1, kmax as usize)
        })
        .collect()
}

fn community_sizes(p: &LfrParams, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (smin, smax) = (p.min_community as f64, p.max_size() as f64);
    let mut sizes: Vec<usize> = Vec::new();
    let mut total = 0;
    while total < p.n {
        let s = (draw_power_law(smin, smax, p.community_exponent, rng).round() as usize)
            .max(p.min_community);
        if total + s <= p.n {
            sizes.push(s);
            total += s;
            continue;
        }
        let rest = p.n - total;
        if rest >= p.min_community {
            sizes.push(rest);
        } else {
            // Spread the remainder over the smallest communities.
            let mut order: Vec<usize> = (0..sizes.len()).collect();
            order.sort_by_key(|&c| (sizes[c], c));
            for i in 0..rest {
                sizes[order[i % order.len()]] += 1;
            }
        }
        total = p.n;
    }
    sizes
}

fn edge_key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Pairs stubs at random, then repairs invalid pairs by swapping endpoints
/// with randomly chosen valid pairs.
fn match_stubs(
    mut stubs: Vec<usize>,
    valid: impl Fn(usize, usize) -> bool,
    existing: &mut HashSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    stubs.shuffle(rng);
    let mut good: Vec<(usize, usize)> = Vec::with_capacity(stubs.len() / 2);
    let mut bad = Vec::new();
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0], pair[1]);
        if u != v && valid(u, v) && existing.insert(edge_key(u, v)) {
            good.push((u, v));
        } else {
            bad.push((u, v));
        }
    }
    let ok = |a: usize, b: usize, existing: &HashSet<(usize, usize)>| {
        a != b && valid(a, b) && !existing.contains(&edge_key(a, b))
    };
    for (a, b) in bad {
        if good.is_empty() {
            break;
        }
        for _ in 0..50 {
            let j = rng.gen_range(0..good.len());
            let (c, d) = good[j];
            existing.remove(&edge_key(c, d));
            let options = [((a, c), (b, d)), ((a, d), (b, c))];
            let mut done = false;
            for (x, y) in options {
                if edge_key(x.0, x.1) != edge_key(y.0, y.1)
                    && ok(x.0, x.1, existing)
                    && ok(y.0, y.1, existing)
                {
                    existing.insert(edge_key(x.0, x.1));
                    existing.insert(edge_key(y.0, y.1));
                    good[j] = x;
                    good.push(y);
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
            existing.insert(edge_key(c, d));
        }
    }
    good
}

/// Makes the stub total even by removing one stub from a random node.
fn fix_parity(nodes: &[usize], stubs: &mut [usize], rng: &mut ChaCha8Rng) {
    let total: usize = nodes.iter().map(|&v| stubs[v]).sum();
    if total % 2 == 1 {
        let holders: Vec<usize> = nodes.iter().copied().filter(|&v| stubs[v] > 0).collect();
        let v = holders[rng.gen_range(0..holders.len())];
        stubs[v] -= 1;
    }
}

/// Generates an LFR-style graph; labels are community ids.
pub fn generate_lfr(p: &LfrParams) -> Result<Graph> {
    p.validate()?;
    let mut rng = seed::rng(p.seed);
    let degrees = degree_sequence(p, &mut rng);
    let sizes = community_sizes(p, &mut rng);

    // Place high-degree nodes first, each into a community that can host its
    // internal degree, chosen proportionally to remaining capacity.
    let mut order: Vec<usize> = (0..p.n).collect();
    order.shuffle(&mut rng);
    order.sort_by_key(|&v| std::cmp::Reverse(degrees[v]));
    let mut free = sizes.clone();
    let mut community = vec![0usize; p.n];
    for &v in &order {
        let need = ((1.0 - p.mu) * degrees[v] as f64).ceil() as usize;
        let fits: Vec<usize> = (0..sizes.len())
            .filter(|&c| free[c] > 0 && sizes[c] > need)
            .collect();
        let pool: Vec<usize> = if fits.is_empty() {
            (0..sizes.len()).filter(|&c| free[c] > 0).collect()
        } else {
            fits
        };
        let total: usize = pool.iter().map(|&c| free[c]).sum();
        let mut pick = rng.gen_range(0..total);
        let mut chosen = pool[0];
        for &c in &pool {
            if pick < free[c] {
                chosen = c;
                break;
            }
            pick -= free[c];
        }
        community[v] = chosen;
        free[chosen] -= 1;
    }

    let mut k_in = vec![0usize; p.n];
    let mut k_out = vec![0usize; p.n];
    for v in 0..p.n {
        let target = (1.0 - p.mu) * degrees[v] as f64;
        let mut inside = target.floor() as usize;
        if rng.gen::<f64>() < target.fract() {
            inside += 1;
        }
        inside = inside.min(sizes[community[v]] - 1);
        k_in[v] = inside;
        k_out[v] = degrees[v] - inside;
    }
    if sizes.len() == 1 {
        k_out.iter_mut().for_each(|k| *k = 0);
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for v in 0..p.n {
        members[community[v]].push(v);
    }
    let mut existing = HashSet::new();
    let mut edges = Vec::new();
    for nodes in &members {
        fix_parity(nodes, &mut k_in, &mut rng);
        let stubs: Vec<usize> = nodes
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, k_in[v]))
            .collect();
        edges.extend(match_stubs(stubs, |_, _| true, &mut existing, &mut rng));
    }
    let all: Vec<usize> = (0..p.n).collect();
    fix_parity(&all, &mut k_out, &mut rng);
    let stubs: Vec<usize> = (0..p.n)
        .flat_map(|v| std::iter::repeat_n(v, k_out[v]))
        .collect();
    edges.extend(match_stubs(
        stubs,
        |u, v| community[u] != community[v],
        &mut existing,
        &mut rng,
    ));

    let weighted: Vec<(usize, usize, u32)> = edges.into_iter().map(|(u, v)| (u, v, 1)).collect();
    Graph::from_edges(
        p.n,
        &weighted,
        DenseMatrix::zeros(p.n, 0),
        Labels::multiclass(community),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inter_fraction(g: &Graph) -> f64 {
        let Labels::Multiclass { classes, .. } = g.labels() else {
            unreachable!()
        };
        let cut = g
            .edges()
            .iter()
            .filter(|&&(u, v)| classes[u] != classes[v])
            .count();
        cut as f64 / g.num_edges() as f64
    }

    #[test]
    fn zero_mixing_has_no_inter_edges() {
        let p = LfrParams {
            n: 400,
            mu: 0.0,
            min_community: 40,
            seed: 3,
            ..LfrParams::default()
        };
        let g = generate_lfr(&p).unwrap();
        assert_eq!(inter_fraction(&g), 0.0);
        g.check_invariants().unwrap();
    }

    #[test]
    fn mixing_fraction_at_small_scale() {
        let p = LfrParams {
            n: 500,
            mu: 0.2,
            seed: 11,
            ..LfrParams::default()
        };
        let g = generate_lfr(&p).unwrap();
        let f = inter_fraction(&g);
        assert!((f - 0.2).abs() <= 0.05, "inter fraction {f}");
    }

    #[test]
    fn reference_parameters_hit_degree_and_mixing() {
        for mu in [0.1, 0.25, 0.4] {
            let p = LfrParams {
                mu,
                seed: 1,
                ..LfrParams::default()
            };
            let g = generate_lfr(&p).unwrap();
            let mean = 2.0 * g.num_edges() as f64 / g.n() as f64;
            assert!((mean - 5.0).abs() <= 0.75, "mean degree {mean}");
            let f = inter_fraction(&g);
            assert!((f - mu).abs() <= 0.03, "inter fraction {f} for mu {mu}");
            let Labels::Multiclass {
                classes,
                num_classes,
            } = g.labels()
            else {
                unreachable!()
            };
            for c in 0..*num_classes {
                assert!(classes.iter().filter(|&&x| x == c).count() >= 50);
            }
        }
    }

    #[test]
    fn bit_reproducible() {
        let p = LfrParams {
            n: 300,
            min_community: 30,
            seed: 5,
            ..LfrParams::default()
        };
        assert_eq!(generate_lfr(&p).unwrap(), generate_lfr(&p).unwrap());
    }

    #[test]
    fn infeasible_parameters() {
        let p = LfrParams {
            n: 40,
            min_community: 50,
            ..LfrParams::default()
        };
        assert!(generate_lfr(&p).is_err());
        let p = LfrParams {
            mu: 1.0,
            ..LfrParams::default()
        };
        assert!(generate_lfr(&p).is_err());
    }
}
