//! One realization of the attachment process and its statistics.
//!
//! Vertex `t` (1-based) attaches to `t - Z_t`. Colors (root ids) and depths
//! are filled by a single forward pass, since the parent always precedes the
//! child. Statistics that need child counts use a second pass over the step
//! array; no adjacency lists are built.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dist::StepDistribution;
use crate::error::{Result, SurfError};
use crate::rng::SurfRng;

/// Rough peak footprint of `build` + `stats` per vertex.
pub const BYTES_PER_VERTEX: u64 = 40;
pub const DEFAULT_MEMORY_BUDGET: u64 = 3 << 30;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forest {
    steps: Vec<u64>,
    color: Vec<i64>,
    depth: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MaxDegree {
    pub over_positive: u32,
    pub over_roots: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForestStats {
    pub n: u64,
    /// Root id -> number of positive vertices in its tree, for roots with at least one.
    pub tree_sizes: BTreeMap<i64, u64>,
    /// `M_n`.
    pub num_trees: u64,
    /// `O_n`: vertices at depth one.
    pub root_hits: u64,
    /// Root id -> number of children, for roots with at least one.
    pub root_degrees: BTreeMap<i64, u32>,
    /// Child counts of vertices `1..=n`, index `t - 1`.
    #[serde(skip)]
    pub positive_degrees: Vec<u32>,
    pub height: u32,
    pub height_of_zero: u32,
    pub leaves_of_zero: u64,
    /// `N_1, N_2, ...` for the tree rooted at 0, up to its height.
    pub profile_of_zero: Vec<u64>,
    /// `B_1..B_n`, index `t - 1`.
    #[serde(skip)]
    pub block_chain: Vec<u32>,
    /// `N = max{t <= n : B_t = 1}`.
    pub last_renewal: u64,
    /// Number of `t <= n` with `B_t = 1`.
    pub renewal_visits: u64,
    pub max_degree: MaxDegree,
}

impl ForestStats {
    /// Out-degree at time `n` of any vertex id (root or positive).
    pub fn degree(&self, v: i64) -> u32 {
        if v <= 0 {
            self.root_degrees.get(&v).copied().unwrap_or(0)
        } else {
            self.positive_degrees.get(v as usize - 1).copied().unwrap_or(0)
        }
    }

    pub fn size_of_zero(&self) -> u64 {
        self.tree_sizes.get(&0).copied().unwrap_or(0)
    }

    pub fn largest_tree(&self) -> u64 {
        self.tree_sizes.values().copied().max().unwrap_or(0)
    }

    /// `B_t = t` for every `t <= n`: the whole horizon is one block.
    pub fn single_block(&self) -> bool {
        self.renewal_visits == 1
    }

    /// Number of trees of each size.
    pub fn size_histogram(&self) -> BTreeMap<u64, u64> {
        let mut hist = BTreeMap::new();
        for &size in self.tree_sizes.values() {
            *hist.entry(size).or_insert(0) += 1;
        }
        hist
    }
}

fn check_budget(n: u64, budget: u64) -> Result<()> {
    let needed = n.saturating_mul(BYTES_PER_VERTEX);
    if needed > budget {
        return Err(SurfError::MemoryBudget { n, needed, budget });
    }
    Ok(())
}

impl Forest {
    /// Draws `n` steps from `dist` with the stream seeded by `seed`.
    pub fn build(dist: &StepDistribution, n: u64, seed: u64) -> Result<Forest> {
        Self::build_with_budget(dist, n, seed, DEFAULT_MEMORY_BUDGET)
    }

    pub fn build_with_budget(dist: &StepDistribution, n: u64, seed: u64, budget: u64) -> Result<Forest> {
        if n == 0 {
            return Err(SurfError::InvalidArgument("horizon n must be at least 1".into()));
        }
        check_budget(n, budget)?;
        let mut rng = SurfRng::new(seed);
        let steps = (0..n).map(|_| dist.sample(&mut rng)).collect();
        Self::from_steps(steps)
    }

    /// Deterministic construction from given steps `Z_1..Z_n`.
    pub fn from_steps(steps: Vec<u64>) -> Result<Forest> {
        if steps.is_empty() {
            return Err(SurfError::InvalidArgument("horizon n must be at least 1".into()));
        }
        let n = steps.len();
        let mut color = Vec::with_capacity(n);
        let mut depth = Vec::with_capacity(n);
        for (idx, &z) in steps.iter().enumerate() {
            let t = idx as u64 + 1;
            if z == 0 {
                return Err(SurfError::InvalidArgument(format!("step Z_{t} is zero")));
            }
            if z >= t {
                color.push(t as i64 - z.min(i64::MAX as u64) as i64);
                depth.push(1);
            } else {
                let parent = (t - z - 1) as usize;
                color.push(color[parent]);
                depth.push(depth[parent] + 1);
            }
        }
        Ok(Forest { steps, color, depth })
    }

    pub fn horizon(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn colors(&self) -> &[i64] {
        &self.color
    }

    pub fn depths(&self) -> &[u32] {
        &self.depth
    }

    /// `t - Z_t` for `t` in `1..=n`.
    pub fn parent(&self, t: u64) -> i64 {
        t as i64 - self.steps[t as usize - 1] as i64
    }

    pub fn color(&self, t: u64) -> i64 {
        self.color[t as usize - 1]
    }

    pub fn depth(&self, t: u64) -> u32 {
        self.depth[t as usize - 1]
    }

    pub fn stats(&self) -> ForestStats {
        let n = self.steps.len();
        let mut positive_degrees = vec![0u32; n];
        // roots -j with j < n are dense, deeper ones sparse
        let mut dense_size = vec![0u32; n];
        let mut dense_degree = vec![0u32; n];
        let mut sparse_size: BTreeMap<i64, u64> = BTreeMap::new();
        let mut sparse_degree: BTreeMap<i64, u32> = BTreeMap::new();
        let mut root_hits = 0u64;
        let mut height = 0u32;
        let mut height_of_zero = 0u32;
        let mut profile_of_zero: Vec<u64> = Vec::new();
        let mut block_chain = Vec::with_capacity(n);
        let mut block = 0u32;
        let mut last_renewal = 0u64;
        let mut renewal_visits = 0u64;

        for idx in 0..n {
            let t = idx as u64 + 1;
            let z = self.steps[idx];
            if z >= t {
                root_hits += 1;
                let j = z - t;
                if j < n as u64 {
                    dense_degree[j as usize] += 1;
                } else {
                    *sparse_degree.entry(-(j as i64)).or_insert(0) += 1;
                }
            } else {
                positive_degrees[(t - z - 1) as usize] += 1;
            }

            let c = self.color[idx];
            let j = c.unsigned_abs();
            if j < n as u64 {
                dense_size[j as usize] += 1;
            } else {
                *sparse_size.entry(c).or_insert(0) += 1;
            }

            let d = self.depth[idx];
            height = height.max(d);
            if c == 0 {
                height_of_zero = height_of_zero.max(d);
                if profile_of_zero.len() < d as usize {
                    profile_of_zero.resize(d as usize, 0);
                }
                profile_of_zero[d as usize - 1] += 1;
            }

            block = if idx == 0 || z > block as u64 { 1 } else { block + 1 };
            if block == 1 {
                last_renewal = t;
                renewal_visits += 1;
            }
            block_chain.push(block);
        }

        let mut leaves_of_zero = 0u64;
        for idx in 0..n {
            if self.color[idx] == 0 && positive_degrees[idx] == 0 {
                leaves_of_zero += 1;
            }
        }

        let mut tree_sizes = sparse_size;
        for (j, &s) in dense_size.iter().enumerate() {
            if s > 0 {
                tree_sizes.insert(-(j as i64), s as u64);
            }
        }
        let mut root_degrees = sparse_degree;
        for (j, &deg) in dense_degree.iter().enumerate() {
            if deg > 0 {
                root_degrees.insert(-(j as i64), deg);
            }
        }
        let max_degree = MaxDegree {
            over_positive: positive_degrees.iter().copied().max().unwrap_or(0),
            over_roots: root_degrees.values().copied().max().unwrap_or(0),
        };

        ForestStats {
            n: n as u64,
            num_trees: tree_sizes.len() as u64,
            tree_sizes,
            root_hits,
            root_degrees,
            positive_degrees,
            height,
            height_of_zero,
            leaves_of_zero,
            profile_of_zero,
            block_chain,
            last_renewal,
            renewal_visits,
            max_degree,
        }
    }

    /// `N_1..N_kmax` for the tree rooted at 0.
    pub fn profile(&self, kmax: usize) -> Vec<u64> {
        let mut out = vec![0u64; kmax];
        for (c, d) in self.color.iter().zip(&self.depth) {
            if *c == 0 && (*d as usize) <= kmax {
                out[*d as usize - 1] += 1;
            }
        }
        out
    }

    pub fn max_degree(&self) -> MaxDegree {
        let n = self.steps.len();
        let mut positive = vec![0u32; n];
        let mut roots: BTreeMap<i64, u32> = BTreeMap::new();
        for (idx, &z) in self.steps.iter().enumerate() {
            let t = idx as u64 + 1;
            if z >= t {
                *roots.entry(t as i64 - z as i64).or_insert(0) += 1;
            } else {
                positive[(t - z - 1) as usize] += 1;
            }
        }
        MaxDegree {
            over_positive: positive.into_iter().max().unwrap_or(0),
            over_roots: roots.into_values().max().unwrap_or(0),
        }
    }
}
