//! Weighted coalition designs: the full powerset, paired block sampling, and
//! the alias analysis of second-order interactions against a design.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coalition::{
    binomial, check_enumerable, coalitions_of_size, kernel_weight, Coalition, ENUMERATION_CAP, MAX_FEATURES,
};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::rng::{rng_for, STREAM_DESIGN};

/// Which coalition-size blocks were enumerated and which were sampled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    /// Coalition sizes whose blocks were fully enumerated.
    pub enumerated_sizes: Vec<usize>,
    /// Coalition sizes left to the with-replacement tail sampler.
    pub sampled_sizes: Vec<usize>,
    /// Number of tail draws (rows before duplicate aggregation).
    pub tail_draws: usize,
    /// Number of distinct tail rows after aggregation.
    pub tail_rows: usize,
}

/// Stacked coalition rows `Z` with one regression weight per row.
///
/// Rows are never the empty or full coalition and are kept in
/// size-then-lexicographic order. Enumerated rows carry the Shapley kernel
/// weight of their size; rows produced by tail sampling carry an importance
/// weight (the remaining kernel mass split evenly over the draws, summed over
/// duplicates).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    dim: usize,
    rows: Vec<Coalition>,
    weights: Vec<f64>,
    block_plan: BlockPlan,
    budget: usize,
    seed: Option<u64>,
}

impl DesignMatrix {
    /// Builds a design from explicit rows and weights.
    pub fn from_rows(dim: usize, rows: Vec<Coalition>, weights: Vec<f64>) -> Result<Self> {
        if rows.len() != weights.len() {
            return Err(Error::input(format!("{} rows but {} weights", rows.len(), weights.len())));
        }
        for (r, (z, w)) in rows.iter().zip(&weights).enumerate() {
            if z.dim() != dim {
                return Err(Error::input(format!("row {} has {} features, expected {dim}", r + 1, z.dim())));
            }
            if z.is_empty() || z.is_full() {
                return Err(Error::input(format!(
                    "row {} is the empty or full coalition; those enter through the side condition",
                    r + 1
                )));
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::input(format!("row {} has non-positive weight {w}", r + 1)));
            }
        }
        let budget = rows.len();
        Ok(DesignMatrix { dim, rows, weights, block_plan: BlockPlan::default(), budget, seed: None })
    }

    /// Builds a design from explicit rows, each weighted by its kernel weight.
    pub fn with_kernel_weights(dim: usize, rows: Vec<Coalition>) -> Result<Self> {
        let weights = rows.iter().map(|z| kernel_weight(dim, z.size())).collect::<Result<Vec<_>>>()?;
        Self::from_rows(dim, rows, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Coalition] {
        &self.rows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn block_plan(&self) -> &BlockPlan {
        &self.block_plan
    }

    /// Sample budget the design was built for.
    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// True when the rows are exactly the `2^p - 2` proper nonempty
    /// coalitions.
    pub fn is_full_powerset(&self) -> bool {
        if self.dim >= 63 || self.rows.len() as u64 != (1u64 << self.dim) - 2 {
            return false;
        }
        let mut seen = vec![false; 1 << self.dim];
        for z in &self.rows {
            let m = z.mask() as usize;
            if seen[m] {
                return false;
            }
            seen[m] = true;
        }
        true
    }

    /// `Z` as a dense 0/1 matrix.
    pub fn z_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.dim, |r, c| if self.rows[r].contains(c) { 1.0 } else { 0.0 })
    }

    /// Column `j` of `Z`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|z| if z.contains(j) { 1.0 } else { 0.0 }).collect()
    }

    /// CSV with a `z1..zp,weight` header and one row per coalition.
    pub fn to_csv(&self) -> String {
        let mut out: String = (1..=self.dim).map(|j| format!("z{j},")).collect();
        out.push_str("weight\n");
        for (z, w) in self.rows.iter().zip(&self.weights) {
            for b in z.to_bits() {
                out.push_str(if b == 1 { "1," } else { "0," });
            }
            out.push_str(&format!("{w:.16e}\n"));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let repr = DesignRepr {
            p: self.dim,
            budget: self.budget,
            seed: self.seed,
            block_plan: self.block_plan.clone(),
            rows: self.rows.iter().map(Coalition::to_bits).collect(),
            weights: self.weights.clone(),
        };
        serde_json::to_value(repr).expect("design serializes")
    }
}

#[derive(Serialize)]
struct DesignRepr {
    p: usize,
    budget: usize,
    seed: Option<u64>,
    block_plan: BlockPlan,
    rows: Vec<Vec<u8>>,
    weights: Vec<f64>,
}

/// All `2^p - 2` proper nonempty coalitions with kernel weights.
pub fn full_powerset_design(p: usize) -> Result<DesignMatrix> {
    full_powerset_design_with_cap(p, ENUMERATION_CAP)
}

pub fn full_powerset_design_with_cap(p: usize, cap: usize) -> Result<DesignMatrix> {
    if p < 2 {
        return Err(Error::input(format!("a design needs p >= 2, got {p}")));
    }
    check_enumerable(p, cap.min(MAX_FEATURES - 1))?;
    let rows: Vec<Coalition> = (1..p).flat_map(|s| coalitions_of_size(p, s)).collect();
    let mut design = DesignMatrix::with_kernel_weights(p, rows)?;
    design.block_plan.enumerated_sizes = (1..p).collect();
    design.budget = design.rows.len();
    Ok(design)
}

/// Coalitions sizes grouped the way the sampler visits them: `{i, p-i}`
/// pairs from the outside in, with a lone center block when `p` is even.
fn size_blocks(p: usize) -> Vec<Vec<usize>> {
    (1..=p.div_ceil(2).max(1))
        .filter(|&i| i < p && 2 * i <= p)
        .map(|i| if 2 * i == p { vec![i] } else { vec![i, p - i] })
        .collect()
}

/// Total kernel weight carried by a block of sizes.
fn block_mass(p: usize, sizes: &[usize]) -> f64 {
    sizes.iter().map(|&s| (p - 1) as f64 / (s * (p - s)) as f64).sum()
}

fn block_rows(p: usize, sizes: &[usize]) -> f64 {
    sizes.iter().map(|&s| binomial(p, s)).sum()
}

/// Paired block sampling of `m` coalitions.
///
/// Blocks are visited from the outside in. A block pair `{i, p-i}` is fully
/// enumerated while the budget still holds all of its rows and its share `w`
/// of the remaining kernel mass satisfies `w >= C(p, i) / k`, with `k` the
/// samples still unallocated. After the first block that fails the gate, the
/// remaining budget is spent on with-replacement draws: a block is chosen in
/// proportion to its kernel mass, then a uniform coalition of the block's
/// smaller size, followed by its complement.
pub fn paired_block_sample(p: usize, m: usize, seed: u64) -> Result<DesignMatrix> {
    if p < 2 {
        return Err(Error::input(format!("a design needs p >= 2, got {p}")));
    }
    if p > MAX_FEATURES {
        return Err(Error::Resource(format!("p = {p} exceeds {MAX_FEATURES} features")));
    }
    let max_rows = if p >= 63 { u64::MAX } else { (1u64 << p) - 2 };
    if m < 2 || m as u64 > max_rows {
        return Err(Error::input(format!("budget must lie in [2, 2^p - 2] = [2, {max_rows}], got {m}")));
    }

    let mut blocks = size_blocks(p);
    let mut rows: Vec<Coalition> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut plan = BlockPlan::default();
    let mut remaining = m as f64;

    while let Some(block) = blocks.first() {
        let total_mass: f64 = blocks.iter().map(|b| block_mass(p, b)).sum();
        let share = block_mass(p, block) / total_mass;
        let needed = block_rows(p, block);
        let lead = binomial(p, block[0]);
        if needed > remaining || share * remaining < lead * (1.0 - 1e-12) {
            break;
        }
        for &s in block {
            let w = kernel_weight(p, s)?;
            for z in coalitions_of_size(p, s) {
                rows.push(z);
                weights.push(w);
            }
            plan.enumerated_sizes.push(s);
        }
        remaining -= needed;
        blocks.remove(0);
    }

    let mut draws = remaining as usize;
    if draws > 0 && !blocks.is_empty() {
        let masses: Vec<f64> = blocks.iter().map(|b| block_mass(p, b)).collect();
        let total_mass: f64 = masses.iter().sum();
        let mut rng = rng_for(seed, STREAM_DESIGN);
        let mut tally: BTreeMap<Coalition, usize> = BTreeMap::new();
        plan.tail_draws = draws;
        while draws > 0 {
            let mut u = rng.random::<f64>() * total_mass;
            let mut b = masses.len() - 1;
            for (k, mass) in masses.iter().enumerate() {
                if u < *mass {
                    b = k;
                    break;
                }
                u -= mass;
            }
            let z = random_subset(p, blocks[b][0], &mut rng);
            *tally.entry(z).or_default() += 1;
            draws -= 1;
            if draws > 0 {
                *tally.entry(z.complement()).or_default() += 1;
                draws -= 1;
            }
        }
        let unit = total_mass / plan.tail_draws as f64;
        plan.tail_rows = tally.len();
        for (z, count) in tally {
            rows.push(z);
            weights.push(unit * count as f64);
        }
        plan.sampled_sizes = blocks.iter().flatten().copied().collect();
    }
    plan.enumerated_sizes.sort_unstable();
    plan.sampled_sizes.sort_unstable();

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].cmp(&rows[b]));
    let rows: Vec<Coalition> = order.iter().map(|&i| rows[i]).collect();
    let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();

    let mut design = DesignMatrix::from_rows(p, rows, weights)?;
    design.block_plan = plan;
    design.budget = m;
    design.seed = Some(seed);
    Ok(design)
}

/// Uniformly random coalition of exactly `size` features (partial
/// Fisher-Yates).
fn random_subset(p: usize, size: usize, rng: &mut impl rand::Rng) -> Coalition {
    let mut idx: Vec<usize> = (0..p).collect();
    for k in 0..size {
        let r = rng.random_range(k..p);
        idx.swap(k, r);
    }
    Coalition::from_indices(p, &idx[..size]).expect("indices in range")
}

/// Products of design column `lead` with every later column, i.e. the
/// second-order interaction columns led by feature `lead` (zero-based).
pub fn interaction_columns(design: &DesignMatrix, order: usize, lead: usize) -> Result<DMatrix<f64>> {
    if order != 2 {
        return Err(Error::Unsupported(format!("interaction order {order}; only order 2 is analyzed")));
    }
    let p = design.dim();
    if lead + 1 >= p {
        return Err(Error::input(format!("lead feature {} must precede the last feature (p = {p})", lead + 1)));
    }
    let rows = design.rows();
    Ok(DMatrix::from_fn(rows.len(), p - lead - 1, |r, c| {
        if rows[r].contains(lead) && rows[r].contains(lead + 1 + c) {
            1.0
        } else {
            0.0
        }
    }))
}

/// Intermediate matrices of an alias computation.
#[derive(Debug, Clone)]
pub struct AliasAnalysis {
    /// `X_r*' W X_r*`
    pub normal: DMatrix<f64>,
    /// `(X_r*' W X_r*)^-1`
    pub normal_inverse: DMatrix<f64>,
    /// `X_r*' W X_int*`
    pub cross: DMatrix<f64>,
    /// `(X_r*' W X_r*)^-1 X_r*' W X_int*`, shape `(p-1) x q`.
    pub alias: DMatrix<f64>,
    pub condition: f64,
}

/// Alias matrix of `interactions` against the main effects of `design`.
///
/// The side condition is imposed by subtracting design column `p` from the
/// other main-effect columns and from every interaction column (the starred
/// matrices), which leaves `p - 1` free main effects.
pub fn alias_matrix(design: &DesignMatrix, interactions: &DMatrix<f64>) -> Result<AliasAnalysis> {
    let p = design.dim();
    let m = design.len();
    if interactions.nrows() != m {
        return Err(Error::input(format!("interaction matrix has {} rows, design has {m}", interactions.nrows())));
    }
    let last = design.column(p - 1);
    let z = design.z_matrix();
    let main = DMatrix::from_fn(m, p - 1, |r, c| z[(r, c)] - last[r]);
    let inter = DMatrix::from_fn(m, interactions.ncols(), |r, c| interactions[(r, c)] - last[r]);
    let weighted_main = DMatrix::from_fn(m, p - 1, |r, c| main[(r, c)] * design.weights()[r]);
    let normal = weighted_main.transpose() * &main;
    let cross = weighted_main.transpose() * &inter;
    let (normal_inverse, condition) = spd_inverse(&normal)?;
    let alias = &normal_inverse * &cross;
    Ok(AliasAnalysis { normal, normal_inverse, cross, alias, condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(d: &DesignMatrix) -> Vec<usize> {
        d.rows().iter().map(Coalition::size).collect()
    }

    #[test]
    fn full_design_p3_matches_hand_listing() {
        let d = full_powerset_design(3).unwrap();
        let bits: Vec<Vec<u8>> = d.rows().iter().map(Coalition::to_bits).collect();
        assert_eq!(
            bits,
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]]
        );
        assert!(d.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn full_design_p2_and_p4() {
        let d = full_powerset_design(2).unwrap();
        let bits: Vec<Vec<u8>> = d.rows().iter().map(Coalition::to_bits).collect();
        assert_eq!(bits, vec![vec![1, 0], vec![0, 1]]);
        let d = full_powerset_design(4).unwrap();
        assert_eq!(d.len(), 14);
        assert_eq!(d.rows()[4].to_bits(), vec![1, 1, 0, 0]);
        assert_eq!(d.rows()[9].to_bits(), vec![0, 0, 1, 1]);
        assert!(d.is_full_powerset());
    }

    #[test]
    fn full_design_respects_cap() {
        assert!(matches!(full_powerset_design_with_cap(8, 6), Err(Error::Resource(_))));
    }

    #[test]
    fn block_layout() {
        assert_eq!(size_blocks(6), vec![vec![1, 5], vec![2, 4], vec![3]]);
        assert_eq!(size_blocks(5), vec![vec![1, 4], vec![2, 3]]);
        assert_eq!(size_blocks(4), vec![vec![1, 3], vec![2]]);
        assert_eq!(size_blocks(2), vec![vec![1]]);
    }

    #[test]
    fn outer_block_for_p6_budget12() {
        let d = paired_block_sample(6, 12, 0).unwrap();
        assert_eq!(sizes(&d), [1, 1, 1, 1, 1, 1, 5, 5, 5, 5, 5, 5]);
        assert_eq!(d.block_plan().enumerated_sizes, vec![1, 5]);
        assert_eq!(d.block_plan().tail_draws, 0);
        assert!(d.weights().iter().all(|w| (w - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn outer_block_for_p5_budget10() {
        // shares: {1,4} carries 0.5 of 0.8333 kernel mass = 0.6 >= 5/10
        let d = paired_block_sample(5, 10, 3).unwrap();
        assert_eq!(sizes(&d), [1, 1, 1, 1, 1, 4, 4, 4, 4, 4]);
    }

    #[test]
    fn full_budget_enumerates_everything() {
        let d = paired_block_sample(4, 14, 9).unwrap();
        assert_eq!(d.rows(), full_powerset_design(4).unwrap().rows());
    }

    #[test]
    fn tail_weights_cover_remaining_mass() {
        let p = 10;
        let d = paired_block_sample(p, 60, 5).unwrap();
        let plan = d.block_plan();
        assert_eq!(plan.enumerated_sizes, vec![1, 9]);
        assert_eq!(plan.tail_draws, 40);
        let tail_mass: f64 =
            d.rows().iter().zip(d.weights()).filter(|(z, _)| ![1, 9].contains(&z.size())).map(|(_, w)| w).sum();
        let expected: f64 = size_blocks(p)[1..].iter().map(|b| block_mass(p, b)).sum();
        assert!((tail_mass - expected).abs() < 1e-12);
    }

    #[test]
    fn budget_bounds() {
        assert!(paired_block_sample(3, 1, 0).is_err());
        assert!(paired_block_sample(3, 7, 0).is_err());
        assert!(paired_block_sample(3, 6, 0).is_ok());
    }

    #[test]
    fn interaction_columns_lead_one_and_five() {
        let d = paired_block_sample(6, 12, 0).unwrap();
        let x1 = interaction_columns(&d, 2, 0).unwrap();
        assert_eq!(x1.shape(), (12, 5));
        let x5 = interaction_columns(&d, 2, 4).unwrap();
        assert_eq!(x5.shape(), (12, 1));
        // size-5 rows in lexicographic order: {1..5}, {1,2,3,4,6}, ..., {2..6}
        let col: Vec<f64> = x5.column(0).iter().copied().collect();
        let expected: Vec<f64> =
            d.rows().iter().map(|z| if z.contains(4) && z.contains(5) { 1.0 } else { 0.0 }).collect();
        assert_eq!(col, expected);
        assert_eq!(col.iter().sum::<f64>(), 4.0);
        assert!(matches!(interaction_columns(&d, 3, 0), Err(Error::Unsupported(_))));
        assert!(interaction_columns(&d, 2, 5).is_err());
    }

    #[test]
    fn zero_column_gives_zero_interactions() {
        let rows = vec![
            Coalition::from_bits(&[0, 1, 0]).unwrap(),
            Coalition::from_bits(&[0, 0, 1]).unwrap(),
            Coalition::from_bits(&[0, 1, 1]).unwrap(),
        ];
        let d = DesignMatrix::with_kernel_weights(3, rows).unwrap();
        let x = interaction_columns(&d, 2, 0).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn main_effect_columns_alias_to_identity() {
        let d = full_powerset_design(5).unwrap();
        let z = d.z_matrix();
        let own = z.columns(0, 4).into_owned();
        let a = alias_matrix(&d, &own).unwrap();
        assert!((a.alias - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn design_serializations() {
        let d = full_powerset_design(2).unwrap();
        let csv = d.to_csv();
        assert!(csv.starts_with("z1,z2,weight\n1,0,"));
        let json = d.to_json();
        assert_eq!(json["rows"], serde_json::json!([[1, 0], [0, 1]]));
    }
}
