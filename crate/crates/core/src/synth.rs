//! Seeded random factor graphs: Erdős–Rényi, Barabási–Albert, Watts–Strogatz and grids.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pair_index, WeightVector};

/// Attempts before giving up on drawing a connected graph.
pub const MAX_ATTEMPTS: usize = 100;

/// Mixes a base seed with a tag (splitmix64 finalizer).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    ErdosRenyi {
        prob: f64,
    },
    /// Two connected seed nodes; every new node links to `m` distinct nodes
    /// chosen proportionally to degree.
    BarabasiAlbert {
        m: usize,
    },
    /// Ring lattice of even `degree`, each edge rewired with probability `rewire`.
    WattsStrogatz {
        degree: usize,
        rewire: f64,
    },
    /// `rows x cols` lattice, nodes numbered row-major.
    Grid {
        rows: usize,
        cols: usize,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::ErdosRenyi { .. } => "erdos_renyi",
            Family::BarabasiAlbert { .. } => "barabasi_albert",
            Family::WattsStrogatz { .. } => "watts_strogatz",
            Family::Grid { .. } => "grid",
        }
    }
}

fn default_low() -> f64 {
    0.1
}
fn default_high() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecipe {
    #[serde(flatten)]
    pub family: Family,
    /// Node count; implied by `rows * cols` for grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default = "default_low")]
    pub weight_low: f64,
    #[serde(default = "default_high")]
    pub weight_high: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GraphRecipe {
    pub fn new(family: Family, p: usize, seed: u64) -> Self {
        Self { family, p: Some(p), weight_low: default_low(), weight_high: default_high(), seed }
    }

    pub fn erdos_renyi(p: usize, prob: f64, seed: u64) -> Self {
        Self::new(Family::ErdosRenyi { prob }, p, seed)
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        Self::new(Family::Grid { rows, cols }, rows * cols, 0)
    }

    pub fn nodes(&self) -> Result<usize> {
        match (&self.family, self.p) {
            (Family::Grid { rows, cols }, p) => {
                if p.is_some_and(|p| p != rows * cols) {
                    return Err(Error::InvalidParameter(format!("grid {rows}x{cols} does not have p = {p:?} nodes")));
                }
                Ok(rows * cols)
            }
            (_, Some(p)) => Ok(p),
            (_, None) => Err(Error::InvalidParameter("recipe needs a node count p".into())),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.nodes()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if p < 2 {
            return bad(format!("p = {p}; need at least 2 nodes"));
        }
        if !(self.weight_low > 0.0 && self.weight_high >= self.weight_low && self.weight_high.is_finite()) {
            return bad(format!("weight bounds [{}, {}]", self.weight_low, self.weight_high));
        }
        match self.family {
            Family::ErdosRenyi { prob } if !(0.0..=1.0).contains(&prob) => bad(format!("prob = {prob}")),
            Family::BarabasiAlbert { m: 0 } => bad("m must be at least 1".into()),
            Family::WattsStrogatz { degree, rewire } => {
                if degree < 2 || degree % 2 != 0 || degree >= p {
                    bad(format!("ring degree {degree} must be even, >= 2 and < p"))
                } else if !(0.0..=1.0).contains(&rewire) {
                    bad(format!("rewire = {rewire}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

fn erdos_renyi(p: usize, prob: f64, rng: &mut ChaCha8Rng) -> WeightVector {
    let w = (0..crate::graph::num_pairs(p)).map(|_| if rng.random_bool(prob) { 1.0 } else { 0.0 }).collect();
    WeightVector::new(p, w).expect("binary weights are valid")
}

fn barabasi_albert(p: usize, m: usize, rng: &mut ChaCha8Rng) -> WeightVector {
    let mut w = vec![0.0; crate::graph::num_pairs(p)];
    w[pair_index(p, 1, 0)] = 1.0;
    // Each node appears once per incident edge.
    let mut endpoints = vec![0usize, 1];
    for v in 2..p {
        let k = m.min(v);
        let mut targets: Vec<usize> = Vec::with_capacity(k);
        while targets.len() < k {
            let t = *endpoints.choose(rng).expect("seed edge present");
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            w[pair_index(p, v, t)] = 1.0;
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    WeightVector::new(p, w).expect("binary weights are valid")
}

fn watts_strogatz(p: usize, degree: usize, rewire: f64, rng: &mut ChaCha8Rng) -> WeightVector {
    let mut adj = vec![vec![false; p]; p];
    let mut ring = Vec::new();
    for s in 1..=degree / 2 {
        for i in 0..p {
            let j = (i + s) % p;
            if !adj[i][j] {
                adj[i][j] = true;
                adj[j][i] = true;
                ring.push((i, j));
            }
        }
    }
    for (i, j) in ring {
        if !rng.random_bool(rewire) {
            continue;
        }
        let candidates: Vec<usize> = (0..p).filter(|&k| k != i && !adj[i][k]).collect();
        if let Some(&k) = candidates.choose(rng) {
            adj[i][j] = false;
            adj[j][i] = false;
            adj[i][k] = true;
            adj[k][i] = true;
        }
    }
    let w = crate::graph::pairs(p).map(|(_, i, j)| if adj[i][j] { 1.0 } else { 0.0 }).collect();
    WeightVector::new(p, w).expect("binary weights are valid")
}

fn grid(rows: usize, cols: usize) -> WeightVector {
    let p = rows * cols;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v + 1, v, 1.0));
            }
            if r + 1 < rows {
                edges.push((v + cols, v, 1.0));
            }
        }
    }
    WeightVector::from_edges(p, edges).expect("grid edges are in range")
}

/// Binary edge indicator of a connected graph drawn from the recipe's family.
///
/// Random families are redrawn until connected, at most [`MAX_ATTEMPTS`] times.
pub fn generate_topology(recipe: &GraphRecipe) -> Result<WeightVector> {
    recipe.validate()?;
    let p = recipe.nodes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    for _ in 0..MAX_ATTEMPTS {
        let topo = match recipe.family {
            Family::ErdosRenyi { prob } => erdos_renyi(p, prob, &mut rng),
            Family::BarabasiAlbert { m } => barabasi_albert(p, m, &mut rng),
            Family::WattsStrogatz { degree, rewire } => watts_strogatz(p, degree, rewire, &mut rng),
            Family::Grid { rows, cols } => grid(rows, cols),
        };
        if topo.is_connected() {
            return Ok(topo);
        }
        if matches!(recipe.family, Family::Grid { .. }) {
            break;
        }
    }
    Err(Error::ConnectivityFailure { attempts: MAX_ATTEMPTS })
}

/// Replaces every nonzero entry with an independent `Uniform(low, high)` draw.
pub fn assign_weights(topology: &WeightVector, low: f64, high: f64, seed: u64) -> Result<WeightVector> {
    if !(low.is_finite() && high.is_finite()) || low > high || low < 0.0 {
        return Err(Error::InvalidParameter(format!("weight bounds [{low}, {high}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = (low < high).then(|| Uniform::new_inclusive(low, high).expect("bounds checked"));
    let w = topology
        .as_slice()
        .iter()
        .map(|&v| match (&dist, v > 0.0) {
            (_, false) => 0.0,
            (Some(d), true) => d.sample(&mut rng),
            (None, true) => low,
        })
        .collect();
    WeightVector::new(topology.nodes(), w)
}

/// Topology plus weights; the weights use a seed derived from the recipe's.
pub fn generate_graph(recipe: &GraphRecipe) -> Result<WeightVector> {
    let topo = generate_topology(recipe)?;
    assign_weights(&topo, recipe.weight_low, recipe.weight_high, derive_seed(recipe.seed, 1))
}
