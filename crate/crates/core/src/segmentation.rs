//! Segmentation by minimizing the segmented lossy coding length
//!
//! ```text
//! Lˢ(W₁ ∪ … ∪ W_k) = Σᵢ L(Wᵢ) + |Wᵢ| · (−log₂(|Wᵢ| / m))
//! ```
//!
//! where `L` is the coding length with mean ([`coding_length_with_mean`]) and
//! the second term is the entropy code for group membership. Both terms of a
//! group depend only on that group (and the fixed total `m`), so `Lˢ` is
//! additive over groups and merge gains stay valid until one of their two
//! groups changes.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{coding_length_with_mean, DataMatrix, Distortion};
use crate::error::{Error, Result};

/// Largest sample count accepted by [`segment_bruteforce`] by default.
pub const BRUTEFORCE_MAX_SAMPLES: usize = 12;

/// Disjoint, non-empty index groups covering `0..m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_group_length: Option<Vec<f64>>,
}

impl Partition {
    /// Validates `groups` as a partition of `0..m`.
    pub fn new(groups: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        let mut seen = vec![false; m];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidPartition(format!("group {g} is empty")));
            }
            for &i in group {
                if i >= m {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} out of range for {m} samples"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("index {i} appears twice")));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidPartition(format!("index {missing} is not covered")));
        }
        Ok(Self {
            groups,
            per_group_length: None,
        })
    }

    pub fn singletons(m: usize) -> Self {
        Self {
            groups: (0..m).map(|i| vec![i]).collect(),
            per_group_length: None,
        }
    }

    /// One group per distinct label value, ordered by first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut order: Vec<usize> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match order.iter().position(|&o| o == l) {
                Some(g) => groups[g].push(i),
                None => {
                    order.push(l);
                    groups.push(vec![i]);
                }
            }
        }
        Self {
            groups,
            per_group_length: None,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_samples(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn per_group_length(&self) -> Option<&[f64]> {
        self.per_group_length.as_deref()
    }

    /// Sorted groups ordered by their smallest index; drops the length cache.
    pub fn canonical(&self) -> Self {
        let mut groups: Vec<Vec<usize>> = self
            .groups
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.sort_unstable();
                g
            })
            .collect();
        groups.sort_by_key(|g| g[0]);
        Self {
            groups,
            per_group_length: None,
        }
    }

    /// Group index of every sample, using canonical group order.
    pub fn labels(&self) -> Vec<usize> {
        let canon = self.canonical();
        let mut labels = vec![0; self.num_samples()];
        for (g, group) in canon.groups.iter().enumerate() {
            for &i in group {
                labels[i] = g;
            }
        }
        labels
    }

    /// Same set partition, ignoring group and member order.
    pub fn same_as(&self, other: &Partition) -> bool {
        self.canonical().groups == other.canonical().groups
    }
}

/// Output of a segmentation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub partition: Partition,
    pub total_length: f64,
    pub epsilon: Distortion,
    pub merge_trace: Vec<MergeStep>,
}

/// One accepted merge. Groups are named by their smallest sample index at
/// the time of the merge; the merged group keeps `group_a`'s name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub group_a: usize,
    pub group_b: usize,
    pub length_delta: f64,
}

/// Coding length of one group plus its membership bits.
pub fn group_coding_length(w: &DataMatrix, indices: &[usize], eps: Distortion) -> f64 {
    let size = indices.len();
    let sub = DataMatrix::new(w.select(indices)).expect("non-empty column subset of finite data");
    let membership = size as f64 * -(size as f64 / w.m() as f64).log2();
    coding_length_with_mean(&sub, eps) + membership
}

fn check_partition(w: &DataMatrix, p: &Partition) -> Result<()> {
    Partition::new(p.groups.clone(), w.m()).map(|_| ())
}

/// Total segmented coding length `Lˢ` of `p`.
pub fn segmented_coding_length(w: &DataMatrix, p: &Partition, eps: Distortion) -> Result<f64> {
    check_partition(w, p)?;
    Ok(p.groups
        .iter()
        .map(|g| group_coding_length(w, g, eps))
        .sum())
}

/// `Lˢ(merged) − Lˢ(separate)` for groups `i` and `j` of `p`; negative means
/// merging shortens the code.
pub fn merge_gain(w: &DataMatrix, p: &Partition, i: usize, j: usize, eps: Distortion) -> Result<f64> {
    check_partition(w, p)?;
    let k = p.num_groups();
    if i >= k {
        return Err(Error::InvalidGroup(i));
    }
    if j >= k || i == j {
        return Err(Error::InvalidGroup(j));
    }
    let (a, b) = (&p.groups[i], &p.groups[j]);
    let merged: Vec<usize> = a.iter().chain(b).copied().collect();
    Ok(group_coding_length(w, &merged, eps)
        - group_coding_length(w, a, eps)
        - group_coding_length(w, b, eps))
}

/// Pairwise gain table over slot ids; only the strict upper triangle is used.
struct GainTable {
    size: usize,
    gains: Vec<f64>,
}

impl GainTable {
    fn get(&self, a: usize, b: usize) -> f64 {
        self.gains[a * self.size + b]
    }

    fn set(&mut self, a: usize, b: usize, v: f64) {
        self.gains[a * self.size + b] = v;
    }
}

/// Greedy pairwise steepest descent of the segmented coding length.
///
/// Starts from singletons and repeatedly merges the pair with the most
/// negative gain until no merge helps or a single group remains. Equal gains
/// are resolved toward the smallest `(min slot, max slot)` pair. Candidate
/// gains are evaluated in parallel but reduced in a fixed order, so results
/// do not depend on the thread count.
pub fn segment_greedy(w: &DataMatrix, eps: Distortion) -> Result<SegmentationResult> {
    let m = w.m();
    let mut members: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    let mut active = vec![true; m];
    let mut lengths: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| group_coding_length(w, &[i], eps))
        .collect();

    let pair_gain = |members: &[Vec<usize>], lengths: &[f64], a: usize, b: usize| -> f64 {
        let mut merged: Vec<usize> = members[a].iter().chain(&members[b]).copied().collect();
        merged.sort_unstable();
        group_coding_length(w, &merged, eps) - lengths[a] - lengths[b]
    };

    let mut table = GainTable {
        size: m,
        gains: vec![f64::INFINITY; m * m],
    };
    let rows: Vec<(usize, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map(|a| {
            let row = ((a + 1)..m)
                .map(|b| pair_gain(&members, &lengths, a, b))
                .collect();
            (a, row)
        })
        .collect();
    for (a, row) in rows {
        for (off, g) in row.into_iter().enumerate() {
            table.set(a, a + 1 + off, g);
        }
    }

    let mut trace = Vec::new();
    let mut live = m;
    while live > 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in (0..m).filter(|&a| active[a]) {
            for b in ((a + 1)..m).filter(|&b| active[b]) {
                let g = table.get(a, b);
                if best.is_none_or(|(_, _, bg)| g < bg) {
                    best = Some((a, b, g));
                }
            }
        }
        let Some((a, b, gain)) = best else { break };
        if gain >= 0.0 {
            break;
        }

        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        members[a].sort_unstable();
        active[b] = false;
        live -= 1;
        lengths[a] = group_coding_length(w, &members[a], eps);
        lengths[b] = 0.0;
        trace.push(MergeStep {
            group_a: a,
            group_b: b,
            length_delta: gain,
        });

        let others: Vec<usize> = (0..m).filter(|&c| active[c] && c != a).collect();
        let updates: Vec<(usize, f64)> = others
            .par_iter()
            .map(|&c| (c, pair_gain(&members, &lengths, a.min(c), a.max(c))))
            .collect();
        for (c, g) in updates {
            table.set(a.min(c), a.max(c), g);
        }
    }

    let slots: Vec<usize> = (0..m).filter(|&s| active[s]).collect();
    let groups: Vec<Vec<usize>> = slots.iter().map(|&s| members[s].clone()).collect();
    let per_group: Vec<f64> = slots.iter().map(|&s| lengths[s]).collect();
    let total_length = per_group.iter().sum();
    Ok(SegmentationResult {
        partition: Partition {
            groups,
            per_group_length: Some(per_group),
        },
        total_length,
        epsilon: eps,
        merge_trace: trace,
    })
}

/// Exhaustive minimizer of `Lˢ` over all set partitions (`m ≤ max_m`).
///
/// Partitions are enumerated as restricted growth strings in lexicographic
/// order and only a strictly shorter code replaces the incumbent, so ties go
/// to the lexicographically smallest encoding.
pub fn segment_bruteforce(w: &DataMatrix, eps: Distortion, max_m: usize) -> Result<SegmentationResult> {
    let m = w.m();
    if m > max_m || m >= usize::BITS as usize - 1 {
        return Err(Error::TooManySamples { m, max: max_m });
    }
    let subsets = 1usize << m;
    let subset_length: Vec<f64> = (0..subsets)
        .into_par_iter()
        .map(|mask| {
            if mask == 0 {
                return 0.0;
            }
            let idx: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            group_coding_length(w, &idx, eps)
        })
        .collect();

    struct Search<'a> {
        m: usize,
        lengths: &'a [f64],
        masks: Vec<usize>,
        best: f64,
        best_masks: Vec<usize>,
    }

    impl Search<'_> {
        fn visit(&mut self, i: usize) {
            if i == self.m {
                let total: f64 = self.masks.iter().map(|&mk| self.lengths[mk]).sum();
                if total < self.best {
                    self.best = total;
                    self.best_masks = self.masks.clone();
                }
                return;
            }
            for g in 0..self.masks.len() {
                self.masks[g] |= 1 << i;
                self.visit(i + 1);
                self.masks[g] &= !(1 << i);
            }
            self.masks.push(1 << i);
            self.visit(i + 1);
            self.masks.pop();
        }
    }

    let mut search = Search {
        m,
        lengths: &subset_length,
        masks: Vec::with_capacity(m),
        best: f64::INFINITY,
        best_masks: Vec::new(),
    };
    search.visit(0);

    let groups: Vec<Vec<usize>> = search
        .best_masks
        .iter()
        .map(|&mk| (0..m).filter(|i| mk >> i & 1 == 1).collect())
        .collect();
    let per_group: Vec<f64> = search.best_masks.iter().map(|&mk| subset_length[mk]).collect();
    Ok(SegmentationResult {
        partition: Partition {
            groups,
            per_group_length: Some(per_group),
        },
        total_length: search.best,
        epsilon: eps,
        merge_trace: Vec::new(),
    })
}

/// One grid point of the distortion search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionPoint {
    pub epsilon: f64,
    pub total_length: f64,
    pub objective: f64,
    pub num_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSelection {
    pub eps_star: Distortion,
    pub curve: Vec<DistortionPoint>,
    pub segmentation: SegmentationResult,
}

/// Picks `ε* = argmin_ε Lˢ(ε) + m·n·log₂ ε` over `grid`, running the greedy
/// segmentation at every grid point. Ties go to the earliest grid entry.
pub fn select_distortion(w: &DataMatrix, grid: &[Distortion]) -> Result<DistortionSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("distortion grid is empty".into()));
    }
    let penalty_scale = (w.m() * w.n()) as f64;
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, SegmentationResult)> = None;
    for (idx, &eps) in grid.iter().enumerate() {
        let seg = segment_greedy(w, eps)?;
        let objective = seg.total_length + penalty_scale * eps.value().log2();
        curve.push(DistortionPoint {
            epsilon: eps.value(),
            total_length: seg.total_length,
            objective,
            num_groups: seg.partition.num_groups(),
        });
        if best.as_ref().is_none_or(|(b, _)| objective < curve[*b].objective) {
            best = Some((idx, seg));
        }
    }
    let (idx, segmentation) = best.expect("grid is non-empty");
    Ok(DistortionSelection {
        eps_star: grid[idx],
        curve,
        segmentation,
    })
}

/// Fraction of samples whose predicted group maps to the true label under
/// the best one-to-one matching of groups to labels (exhaustive for ≤ 8
/// groups, greedy beyond).
pub fn label_agreement(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if predicted.is_empty() {
        return 1.0;
    }
    let kp = predicted.iter().max().map_or(0, |&v| v + 1);
    let kt = truth.iter().max().map_or(0, |&v| v + 1);
    let mut counts = DMatrix::<usize>::zeros(kp, kt);
    for (&p, &t) in predicted.iter().zip(truth) {
        counts[(p, t)] += 1;
    }
    let best = if kp <= 8 && kt <= 8 {
        best_assignment(&counts, 0, &mut vec![false; kt])
    } else {
        let mut used_p = vec![false; kp];
        let mut used_t = vec![false; kt];
        let mut total = 0;
        loop {
            let mut pick = None;
            for p in (0..kp).filter(|&p| !used_p[p]) {
                for t in (0..kt).filter(|&t| !used_t[t]) {
                    if pick.is_none_or(|(_, _, c)| counts[(p, t)] > c) {
                        pick = Some((p, t, counts[(p, t)]));
                    }
                }
            }
            match pick {
                Some((p, t, c)) if c > 0 => {
                    used_p[p] = true;
                    used_t[t] = true;
                    total += c;
                }
                _ => break,
            }
        }
        total
    };
    best as f64 / predicted.len() as f64
}

fn best_assignment(counts: &DMatrix<usize>, row: usize, used: &mut Vec<bool>) -> usize {
    if row == counts.nrows() {
        return 0;
    }
    let mut best = best_assignment(counts, row + 1, used);
    for t in 0..counts.ncols() {
        if !used[t] {
            used[t] = true;
            best = best.max(counts[(row, t)] + best_assignment(counts, row + 1, used));
            used[t] = false;
        }
    }
    best
}
