//! Which sub-discriminators exist for a given partition and combination
//! mode, what each one sees, and with which sign its logit enters the sum.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::partition::{check_cover, Partition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// A single discriminator on full joint samples.
    GanBaseline,
    /// Marginal and dependency sub-discriminators.
    Factorgan,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::GanBaseline => "gan_baseline",
            ModelKind::Factorgan => "factorgan",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationMode {
    /// `d_P − d_Q + Σᵢ dᵢ(xⁱ)`.
    Joint,
    /// Part 0 is a conditioning input shared by real and generated joints;
    /// it gets no marginal head.
    Conditional,
    /// No p-dependency head (`c_P ≡ 1`).
    IndependentMarginals,
    /// Every part is split again into sub-parts with their own dependency heads.
    Hierarchical,
    /// Parts are a sequence; step `i` adds prefix-dependency heads on `x¹..xⁱ`.
    Autoregressive,
}

impl fmt::Display for CombinationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombinationMode::Joint => "joint",
            CombinationMode::Conditional => "conditional",
            CombinationMode::IndependentMarginals => "independent_marginals",
            CombinationMode::Hierarchical => "hierarchical",
            CombinationMode::Autoregressive => "autoregressive",
        })
    }
}

/// Identifies one sub-discriminator. Part indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadId {
    /// The baseline's single joint discriminator.
    Joint,
    Marginal(usize),
    PDependency,
    QDependency,
    /// Dependency between the sub-parts of top-level part `i`, real data.
    GroupP(usize),
    /// Same for generated data.
    GroupQ(usize),
    /// Sub-part `j` of top-level part `i`.
    SubMarginal(usize, usize),
    /// Dependency of part `i` on parts `0..i`, real data.
    PrefixP(usize),
    /// Same for generated data.
    PrefixQ(usize),
}

/// What a head is trained to separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadRole {
    /// Real joints vs. generated joints.
    Joint,
    /// Real vs. generated samples of some dimensions.
    Marginal,
    /// Real joints vs. real blocks recombined independently.
    RealDependency,
    /// Generated joints vs. generated blocks shuffled across samples.
    GeneratedDependency,
}

impl HeadId {
    pub fn role(self) -> HeadRole {
        match self {
            HeadId::Joint => HeadRole::Joint,
            HeadId::Marginal(_) | HeadId::SubMarginal(..) => HeadRole::Marginal,
            HeadId::PDependency | HeadId::GroupP(_) | HeadId::PrefixP(_) => HeadRole::RealDependency,
            HeadId::QDependency | HeadId::GroupQ(_) | HeadId::PrefixQ(_) => {
                HeadRole::GeneratedDependency
            }
        }
    }

    /// Column name used in metrics files; part numbers are one-based.
    pub fn column_name(self) -> String {
        match self {
            HeadId::Joint => "d_joint".into(),
            HeadId::Marginal(i) => format!("d_marg_{}", i + 1),
            HeadId::PDependency => "d_p".into(),
            HeadId::QDependency => "d_q".into(),
            HeadId::GroupP(i) => format!("d_p_grp_{}", i + 1),
            HeadId::GroupQ(i) => format!("d_q_grp_{}", i + 1),
            HeadId::SubMarginal(i, j) => format!("d_marg_{}_{}", i + 1, j + 1),
            HeadId::PrefixP(i) => format!("d_p_pre_{}", i + 1),
            HeadId::PrefixQ(i) => format!("d_q_pre_{}", i + 1),
        }
    }
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.column_name())
    }
}

/// Sub-partition of every top-level part. Sub-part indices are global
/// dimension indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HierarchySpec {
    pub groups: Vec<Vec<Vec<usize>>>,
}

impl HierarchySpec {
    pub fn new(groups: Vec<Vec<Vec<usize>>>) -> Self {
        Self { groups }
    }

    /// Each part kept whole (`Jᵢ = 1`).
    pub fn trivial(partition: &Partition) -> Self {
        Self {
            groups: partition.parts().iter().map(|p| vec![p.clone()]).collect(),
        }
    }

    pub fn validate(&self, partition: &Partition) -> Result<()> {
        if self.groups.len() != partition.len() {
            return Err(Error::Partition(format!(
                "hierarchy has {} groups for {} parts",
                self.groups.len(),
                partition.len()
            )));
        }
        for (i, (group, part)) in self.groups.iter().zip(partition.parts()).enumerate() {
            if group.is_empty() || group.iter().any(Vec::is_empty) {
                return Err(Error::Partition(format!("group {i} has an empty sub-part")));
            }
            let local: Result<Vec<Vec<usize>>> = group
                .iter()
                .map(|sub| {
                    sub.iter()
                        .map(|d| {
                            part.iter().position(|p| p == d).ok_or_else(|| {
                                Error::Partition(format!(
                                    "group {i} names dimension {d}, which is not in part {i}"
                                ))
                            })
                        })
                        .collect()
                })
                .collect();
            check_cover(&local?, part.len())
                .map_err(|e| Error::Partition(format!("group {i}: {e}")))?;
        }
        Ok(())
    }
}

/// One sub-discriminator position in a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSlot {
    pub id: HeadId,
    /// `+1` or `−1` in the combined logit.
    pub sign: f64,
    /// Global dimensions fed to the head, in order.
    pub columns: Vec<usize>,
    /// For dependency heads: positions within `columns` that are decoupled
    /// from each other when forming the independent samples.
    pub blocks: Vec<Vec<usize>>,
    /// Top-level part whose marginal pool supplies real data; `None` means
    /// the paired pool.
    pub source_part: Option<usize>,
    /// May be left out of a set; an absent head contributes a zero logit.
    pub optional: bool,
}

impl HeadSlot {
    pub fn input_dim(&self) -> usize {
        self.columns.len()
    }
}

/// Structural description of a discriminator set.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorLayout {
    partition: Partition,
    kind: ModelKind,
    mode: CombinationMode,
    hierarchy: Option<HierarchySpec>,
}

fn positions(columns: &[usize], dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .map(|d| columns.iter().position(|c| c == d).expect("dims are a subset of columns"))
        .collect()
}

impl FactorLayout {
    pub fn new(
        partition: Partition,
        kind: ModelKind,
        mode: CombinationMode,
        hierarchy: Option<HierarchySpec>,
    ) -> Result<Self> {
        match (mode, &hierarchy) {
            (CombinationMode::Hierarchical, None) if kind == ModelKind::Factorgan => {
                return Err(Error::Configuration(
                    "hierarchical mode needs a hierarchy spec".into(),
                ))
            }
            (CombinationMode::Hierarchical, Some(h)) => h.validate(&partition)?,
            (_, Some(_)) => {
                return Err(Error::Configuration(format!(
                    "a hierarchy spec is only meaningful in hierarchical mode, not {mode}"
                )))
            }
            _ => {}
        }
        Ok(Self {
            partition,
            kind,
            mode,
            hierarchy,
        })
    }

    pub fn factorgan(partition: Partition, mode: CombinationMode) -> Result<Self> {
        Self::new(partition, ModelKind::Factorgan, mode, None)
    }

    pub fn hierarchical(partition: Partition, hierarchy: HierarchySpec) -> Result<Self> {
        Self::new(
            partition,
            ModelKind::Factorgan,
            CombinationMode::Hierarchical,
            Some(hierarchy),
        )
    }

    pub fn baseline(partition: Partition) -> Self {
        Self {
            partition,
            kind: ModelKind::GanBaseline,
            mode: CombinationMode::Joint,
            hierarchy: None,
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn mode(&self) -> CombinationMode {
        self.mode
    }

    pub fn hierarchy(&self) -> Option<&HierarchySpec> {
        self.hierarchy.as_ref()
    }

    /// Every head position, in canonical order.
    pub fn slots(&self) -> Vec<HeadSlot> {
        let d = self.partition.total_dim();
        let all: Vec<usize> = (0..d).collect();
        let parts = self.partition.parts();
        let part_blocks: Vec<Vec<usize>> = parts.iter().map(|p| positions(&all, p)).collect();

        let joint = |id, sign| HeadSlot {
            id,
            sign,
            columns: all.clone(),
            blocks: if id == HeadId::Joint { Vec::new() } else { part_blocks.clone() },
            source_part: None,
            optional: false,
        };
        let marginal = |i: usize| HeadSlot {
            id: HeadId::Marginal(i),
            sign: 1.0,
            columns: parts[i].clone(),
            blocks: Vec::new(),
            source_part: Some(i),
            optional: false,
        };

        if self.kind == ModelKind::GanBaseline {
            return vec![joint(HeadId::Joint, 1.0)];
        }

        let mut slots = Vec::new();
        match self.mode {
            CombinationMode::Joint => {
                slots.push(joint(HeadId::PDependency, 1.0));
                slots.push(joint(HeadId::QDependency, -1.0));
                slots.extend((0..parts.len()).map(marginal));
            }
            CombinationMode::Conditional => {
                slots.push(joint(HeadId::PDependency, 1.0));
                slots.push(joint(HeadId::QDependency, -1.0));
                slots.extend((1..parts.len()).map(marginal));
            }
            CombinationMode::IndependentMarginals => {
                slots.push(joint(HeadId::QDependency, -1.0));
                slots.extend((0..parts.len()).map(marginal));
            }
            CombinationMode::Hierarchical => {
                slots.push(joint(HeadId::PDependency, 1.0));
                slots.push(joint(HeadId::QDependency, -1.0));
                let hierarchy = self.hierarchy.as_ref().expect("validated in new");
                for (i, (group, part)) in hierarchy.groups.iter().zip(parts).enumerate() {
                    let blocks: Vec<Vec<usize>> = group.iter().map(|s| positions(part, s)).collect();
                    let single = group.len() == 1;
                    for (id, sign) in [(HeadId::GroupP(i), 1.0), (HeadId::GroupQ(i), -1.0)] {
                        slots.push(HeadSlot {
                            id,
                            sign,
                            columns: part.clone(),
                            blocks: blocks.clone(),
                            source_part: Some(i),
                            optional: single,
                        });
                    }
                    for (j, sub) in group.iter().enumerate() {
                        slots.push(HeadSlot {
                            id: HeadId::SubMarginal(i, j),
                            sign: 1.0,
                            columns: sub.clone(),
                            blocks: Vec::new(),
                            source_part: Some(i),
                            optional: false,
                        });
                    }
                }
            }
            CombinationMode::Autoregressive => {
                slots.push(marginal(0));
                for i in 1..parts.len() {
                    let columns: Vec<usize> = parts[..=i].iter().flatten().copied().collect();
                    let head_len = columns.len() - parts[i].len();
                    let blocks = vec![(0..head_len).collect(), (head_len..columns.len()).collect()];
                    for (id, sign) in [(HeadId::PrefixP(i), 1.0), (HeadId::PrefixQ(i), -1.0)] {
                        slots.push(HeadSlot {
                            id,
                            sign,
                            columns: columns.clone(),
                            blocks: blocks.clone(),
                            source_part: None,
                            optional: false,
                        });
                    }
                    slots.push(marginal(i));
                }
            }
        }
        slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> Partition {
        Partition::contiguous(&[2, 2]).unwrap()
    }

    fn ids(layout: &FactorLayout) -> Vec<HeadId> {
        layout.slots().iter().map(|s| s.id).collect()
    }

    #[test]
    fn joint_layout() {
        let layout = FactorLayout::factorgan(two_by_two(), CombinationMode::Joint).unwrap();
        assert_eq!(
            ids(&layout),
            vec![
                HeadId::PDependency,
                HeadId::QDependency,
                HeadId::Marginal(0),
                HeadId::Marginal(1)
            ]
        );
    }

    #[test]
    fn conditional_has_no_head_for_the_input() {
        let layout = FactorLayout::factorgan(two_by_two(), CombinationMode::Conditional).unwrap();
        assert!(!ids(&layout).contains(&HeadId::Marginal(0)));
    }

    #[test]
    fn independent_has_no_p_head() {
        let layout =
            FactorLayout::factorgan(two_by_two(), CombinationMode::IndependentMarginals).unwrap();
        assert!(!ids(&layout).contains(&HeadId::PDependency));
    }

    #[test]
    fn autoregressive_prefix_blocks() {
        let p = Partition::contiguous(&[1, 2, 1]).unwrap();
        let layout = FactorLayout::factorgan(p, CombinationMode::Autoregressive).unwrap();
        let slots = layout.slots();
        let pre = slots.iter().find(|s| s.id == HeadId::PrefixP(2)).unwrap();
        assert_eq!(pre.columns, vec![0, 1, 2, 3]);
        assert_eq!(pre.blocks, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn hierarchy_must_cover_each_part() {
        let p = two_by_two();
        let bad = HierarchySpec::new(vec![vec![vec![0]], vec![vec![2], vec![3]]]);
        assert!(FactorLayout::hierarchical(p.clone(), bad).is_err());
        let foreign = HierarchySpec::new(vec![vec![vec![0], vec![2]], vec![vec![1], vec![3]]]);
        assert!(FactorLayout::hierarchical(p.clone(), foreign).is_err());
        let good = HierarchySpec::new(vec![vec![vec![1], vec![0]], vec![vec![2, 3]]]);
        let layout = FactorLayout::hierarchical(p, good).unwrap();
        let slots = layout.slots();
        let g0 = slots.iter().find(|s| s.id == HeadId::GroupP(0)).unwrap();
        assert_eq!(g0.blocks, vec![vec![1], vec![0]]);
        assert!(!g0.optional);
        assert!(slots.iter().find(|s| s.id == HeadId::GroupQ(1)).unwrap().optional);
    }

    #[test]
    fn column_names() {
        assert_eq!(HeadId::Marginal(0).column_name(), "d_marg_1");
        assert_eq!(HeadId::SubMarginal(1, 0).column_name(), "d_marg_2_1");
        assert_eq!(HeadId::PrefixQ(2).column_name(), "d_q_pre_3");
    }
}
