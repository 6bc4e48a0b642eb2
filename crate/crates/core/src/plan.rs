//! Transpose planning between two decompositions.
//!
//! A transpose moves the grid from one [`DimOrder`] to another. For each rank
//! the plan records which local points stay put (same owner on both sides),
//! and for each peer the exact offsets to gather into a send payload and to
//! scatter out of a receive payload. Both sides derive the same plan
//! independently, so the wire carries payloads only, never per-point indices:
//! within a (sender, receiver) pair, points are ordered by ascending global
//! linear index under the destination ordering.
//!
//! Plans are built once at initialization and are immutable afterwards.

use std::collections::BTreeMap;

use crate::decomp::{boundary, slab_of, DecompError, RankInfo, Slab, SlabForm};
use crate::grid::{relinearize, DimOrder, GridDims, POINT_BYTES};

/// Send or receive offsets for one peer, in payload order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerIndices {
    pub peer: usize,
    /// Offsets into the local slab buffer (source side for sends, target
    /// side for receives), ordered by ascending destination global index.
    pub offsets: Vec<usize>,
}

impl PeerIndices {
    pub fn bytes(&self) -> u64 {
        (self.offsets.len() * POINT_BYTES) as u64
    }
}

/// One rank's share of a transpose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankPlan {
    pub rank: usize,
    pub src_count: usize,
    pub dst_count: usize,
    /// Retained points: (source local offset, destination local offset).
    pub local: Vec<(usize, usize)>,
    /// Per-peer send maps, ascending peer id, empty peers omitted.
    pub sends: Vec<PeerIndices>,
    /// Per-peer receive maps, ascending peer id, empty peers omitted.
    pub recvs: Vec<PeerIndices>,
}

impl RankPlan {
    pub fn send_points(&self) -> usize {
        self.sends.iter().map(|p| p.offsets.len()).sum()
    }

    pub fn recv_points(&self) -> usize {
        self.recvs.iter().map(|p| p.offsets.len()).sum()
    }

    /// Bytes this rank sends over the wire in one execution of the transpose.
    pub fn send_bytes(&self) -> u64 {
        (self.send_points() * POINT_BYTES) as u64
    }

    pub fn recv_bytes(&self) -> u64 {
        (self.recv_points() * POINT_BYTES) as u64
    }
}

/// Full transpose plan covering every rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransposePlan {
    pub dims: GridDims,
    pub np: usize,
    pub src_order: DimOrder,
    pub dst_order: DimOrder,
    pub ranks: Vec<RankPlan>,
}

/// Communication volume accounting for one plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeReport {
    /// Sum over ranks and peers of sent payload bytes.
    pub total_bytes: u64,
    /// Sent payload bytes per rank.
    pub per_rank_bytes: Vec<u64>,
    /// Form of the source decomposition.
    pub form: SlabForm,
}

/// Rank that owns linear index `x` given the `np + 1` block boundaries.
fn owner(bounds: &[usize], x: usize) -> usize {
    debug_assert!(x < *bounds.last().unwrap());
    bounds.partition_point(|&b| b <= x) - 1
}

/// Build the plan slice for a single rank.
pub fn build_rank_plan(
    dims: GridDims,
    np: usize,
    src_order: DimOrder,
    dst_order: DimOrder,
    rank: usize,
) -> Result<RankPlan, DecompError> {
    let info = RankInfo::new(rank, np);
    let src: Slab = slab_of(dims, src_order, info)?;
    let dst: Slab = slab_of(dims, dst_order, info)?;
    let src_bounds: Vec<usize> = (0..=np)
        .map(|m| boundary(dims, src_order, np, m))
        .collect::<Result<_, _>>()?;
    let dst_bounds: Vec<usize> = (0..=np)
        .map(|m| boundary(dims, dst_order, np, m))
        .collect::<Result<_, _>>()?;

    let mut local = Vec::new();
    let mut send_buckets: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for x_src in src.x_range() {
        let x_dst = relinearize(src_order, dst_order, dims, x_src);
        let q = owner(&dst_bounds, x_dst);
        if q == rank {
            local.push((x_src - src.x_start, x_dst - dst.x_start));
        } else {
            send_buckets
                .entry(q)
                .or_default()
                .push((x_dst, x_src - src.x_start));
        }
    }
    let sends = send_buckets
        .into_iter()
        .map(|(peer, mut points)| {
            points.sort_unstable_by_key(|&(x_dst, _)| x_dst);
            PeerIndices {
                peer,
                offsets: points.into_iter().map(|(_, off)| off).collect(),
            }
        })
        .collect();

    let mut recv_buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for x_dst in dst.x_range() {
        let x_src = relinearize(dst_order, src_order, dims, x_dst);
        let p = owner(&src_bounds, x_src);
        if p != rank {
            // Ascending x_dst iteration keeps payload order implicit.
            recv_buckets.entry(p).or_default().push(x_dst - dst.x_start);
        }
    }
    let recvs = recv_buckets
        .into_iter()
        .map(|(peer, offsets)| PeerIndices { peer, offsets })
        .collect();

    Ok(RankPlan {
        rank,
        src_count: src.count,
        dst_count: dst.count,
        local,
        sends,
        recvs,
    })
}

/// Build the full plan for a transpose from `src_order` to `dst_order`.
pub fn build_plan(
    dims: GridDims,
    np: usize,
    src_order: DimOrder,
    dst_order: DimOrder,
) -> Result<TransposePlan, DecompError> {
    let ranks = (0..np)
        .map(|r| build_rank_plan(dims, np, src_order, dst_order, r))
        .collect::<Result<_, _>>()?;
    Ok(TransposePlan {
        dims,
        np,
        src_order,
        dst_order,
        ranks,
    })
}

/// The two plans of the fixed pipeline: abc -> cab, then cab -> cba.
pub fn pipeline_plans(
    dims: GridDims,
    np: usize,
) -> Result<(TransposePlan, TransposePlan), DecompError> {
    // Validate the output ordering too, so unsupported worlds fail up front.
    slab_of(dims, DimOrder::Cba, RankInfo::new(0, np))?;
    Ok((
        build_plan(dims, np, DimOrder::Abc, DimOrder::Cab)?,
        build_plan(dims, np, DimOrder::Cab, DimOrder::Cba)?,
    ))
}

/// Byte accounting for a plan: 16 bytes per relocated complex point.
pub fn volume_of(plan: &TransposePlan) -> VolumeReport {
    let per_rank_bytes: Vec<u64> = plan.ranks.iter().map(|r| r.send_bytes()).collect();
    let form = slab_of(plan.dims, plan.src_order, RankInfo::new(0, plan.np))
        .expect("plan already validated")
        .form;
    VolumeReport {
        total_bytes: per_rank_bytes.iter().sum(),
        per_rank_bytes,
        form,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{delinearize, linearize, Coord3};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn dims(n1: usize, n2: usize, n3: usize) -> GridDims {
        GridDims::new(n1, n2, n3).unwrap()
    }

    /// Independent classifier: where does each global point live before and
    /// after the transpose? Re-derives block boundaries from the floor
    /// formula instead of calling into the planner.
    struct Oracle {
        dims: GridDims,
        np: usize,
    }

    impl Oracle {
        fn bounds(&self, order: DimOrder) -> Vec<usize> {
            let [p1, p2, p3] = order.permuted_lens(self.dims);
            (0..=self.np)
                .map(|m| {
                    if self.np <= p1 {
                        p1 * m / self.np * p2 * p3
                    } else {
                        p1 * p2 * m / self.np * p3
                    }
                })
                .collect()
        }

        fn owner(&self, order: DimOrder, coord: Coord3) -> usize {
            let x = linearize(order, self.dims, coord).unwrap();
            let b = self.bounds(order);
            b.partition_point(|&v| v <= x) - 1
        }

        /// (src rank, dst rank, src linear, dst linear) for every point.
        fn moves(&self, src: DimOrder, dst: DimOrder) -> Vec<(usize, usize, usize, usize)> {
            let mut out = Vec::new();
            for x in 0..self.dims.total() {
                let c_src = delinearize(src, self.dims, x).unwrap();
                let axes = src.to_axes(c_src);
                let c_dst = dst.from_axes(axes);
                let x_dst = linearize(dst, self.dims, c_dst).unwrap();
                out.push((
                    self.owner(src, c_src),
                    self.owner(dst, c_dst),
                    x,
                    x_dst,
                ));
            }
            out
        }

        fn relocated_points(&self, src: DimOrder, dst: DimOrder) -> usize {
            self.moves(src, dst).iter().filter(|(p, q, _, _)| p != q).count()
        }
    }

    fn check_plan_against_oracle(d: GridDims, np: usize, src: DimOrder, dst: DimOrder) {
        let plan = build_plan(d, np, src, dst).unwrap();
        let oracle = Oracle { dims: d, np };
        let src_bounds = oracle.bounds(src);
        let dst_bounds = oracle.bounds(dst);

        // Expected relocation sets per ordered pair, in destination order.
        let mut expect_pairs: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        let mut expect_local: BTreeMap<usize, BTreeSet<(usize, usize)>> = BTreeMap::new();
        for (p, q, x_src, x_dst) in oracle.moves(src, dst) {
            let src_off = x_src - src_bounds[p];
            let dst_off = x_dst - dst_bounds[q];
            if p == q {
                expect_local.entry(p).or_default().insert((src_off, dst_off));
            } else {
                expect_pairs.entry((p, q)).or_default().push((x_dst, src_off));
            }
        }

        for rp in &plan.ranks {
            let got_local: BTreeSet<(usize, usize)> = rp.local.iter().copied().collect();
            assert_eq!(
                got_local,
                expect_local.remove(&rp.rank).unwrap_or_default(),
                "local map mismatch on rank {}",
                rp.rank
            );
            for s in &rp.sends {
                let mut want = expect_pairs
                    .remove(&(rp.rank, s.peer))
                    .unwrap_or_else(|| panic!("unexpected send {} -> {}", rp.rank, s.peer));
                want.sort_unstable_by_key(|&(x_dst, _)| x_dst);
                let want_offsets: Vec<usize> = want.into_iter().map(|(_, o)| o).collect();
                assert_eq!(s.offsets, want_offsets, "send map {} -> {}", rp.rank, s.peer);
            }
            // Receive offsets must mirror the matching sender's payload order.
            for r in &rp.recvs {
                let sender = &plan.ranks[r.peer];
                let s = sender.sends.iter().find(|s| s.peer == rp.rank).unwrap();
                assert_eq!(s.offsets.len(), r.offsets.len(), "pair symmetry");
            }
        }
        assert!(expect_pairs.is_empty(), "planner missed pairs: {expect_pairs:?}");
        assert!(expect_local.is_empty());

        // Conservation per rank.
        for rp in &plan.ranks {
            assert_eq!(rp.local.len() + rp.send_points(), rp.src_count);
            assert_eq!(rp.local.len() + rp.recv_points(), rp.dst_count);
        }
        // Global byte balance.
        let sent: u64 = plan.ranks.iter().map(|r| r.send_bytes()).sum();
        let recv: u64 = plan.ranks.iter().map(|r| r.recv_bytes()).sum();
        assert_eq!(sent, recv);
        assert_eq!(
            sent,
            (oracle.relocated_points(src, dst) * POINT_BYTES) as u64
        );
    }

    #[test]
    fn single_rank_plan_is_all_local() {
        for (src, dst) in [(DimOrder::Abc, DimOrder::Cab), (DimOrder::Cab, DimOrder::Cba)] {
            let plan = build_plan(dims(4, 4, 4), 1, src, dst).unwrap();
            let rp = &plan.ranks[0];
            assert_eq!(rp.local.len(), 64);
            assert!(rp.sends.is_empty() && rp.recvs.is_empty());
            assert_eq!(volume_of(&plan).total_bytes, 0);
        }
    }

    #[test]
    fn second_transpose_retains_more_than_it_sends() {
        // The pipeline is chosen so that cab -> cba keeps most data in place.
        let plan = build_plan(dims(8, 8, 8), 4, DimOrder::Cab, DimOrder::Cba).unwrap();
        for rp in &plan.ranks {
            assert!(rp.local.len() >= rp.send_points(), "rank {}", rp.rank);
        }
    }

    #[test]
    fn plan_matches_oracle_on_named_cases() {
        check_plan_against_oracle(dims(4, 4, 4), 8, DimOrder::Abc, DimOrder::Cab);
        check_plan_against_oracle(dims(8, 8, 8), 4, DimOrder::Cab, DimOrder::Cba);
        check_plan_against_oracle(dims(4, 6, 8), 3, DimOrder::Abc, DimOrder::Cab);
        check_plan_against_oracle(dims(5, 7, 3), 8, DimOrder::Cab, DimOrder::Cba);
        // Both halves of the fixed pipeline on a small two-rank world.
        check_plan_against_oracle(dims(4, 4, 4), 2, DimOrder::Abc, DimOrder::Cab);
        check_plan_against_oracle(dims(4, 4, 4), 2, DimOrder::Cab, DimOrder::Cba);
    }

    #[test]
    fn pipeline_volume_surges_at_the_form_switch() {
        // For an 8x8x8 grid the decompositions switch from 1-D to 2-D above
        // np = 8, and the pipeline volume jumps accordingly.
        let d = dims(8, 8, 8);
        let vol = |np: usize| {
            let (p0, p1) = pipeline_plans(d, np).unwrap();
            volume_of(&p0).total_bytes + volume_of(&p1).total_bytes
        };
        assert!(vol(16) > vol(8));
    }

    #[test]
    fn pipeline_beats_alternative_transpose_order() {
        // Same oracle, both orders: abc->cab->cba localizes at least as much
        // as abc->bca->cba. bca is not constructible as a DimOrder, so the
        // alternative is measured with the generic permutation oracle below.
        let d = dims(8, 8, 8);
        for np in [2usize, 4, 8, 16] {
            let oracle = Oracle { dims: d, np };
            let pipeline = oracle.relocated_points(DimOrder::Abc, DimOrder::Cab)
                + oracle.relocated_points(DimOrder::Cab, DimOrder::Cba);
            let alternative = perm_relocated(d, np, [0, 1, 2], [1, 2, 0])
                + perm_relocated(d, np, [1, 2, 0], [2, 1, 0]);
            assert!(
                pipeline <= alternative,
                "np={np}: pipeline {pipeline} > alternative {alternative}"
            );
            // Cross-check the generic oracle against the DimOrder-based one.
            assert_eq!(
                perm_relocated(d, np, [0, 1, 2], [2, 0, 1]),
                oracle.relocated_points(DimOrder::Abc, DimOrder::Cab)
            );
        }
    }

    /// Relocated point count between two arbitrary axis permutations
    /// (outermost first), written independently of plan and decomp code.
    fn perm_relocated(d: GridDims, np: usize, src: [usize; 3], dst: [usize; 3]) -> usize {
        let lens = [d.n1(), d.n2(), d.n3()];
        let owner = |perm: [usize; 3], axes: [usize; 3]| -> usize {
            let [l1, l2, l3] = [lens[perm[0]], lens[perm[1]], lens[perm[2]]];
            let x = axes[perm[0]] * l2 * l3 + axes[perm[1]] * l3 + axes[perm[2]];
            let f = |m: usize| {
                if np <= l1 {
                    l1 * m / np * l2 * l3
                } else {
                    assert!(np <= l1 * l2);
                    l1 * l2 * m / np * l3
                }
            };
            (0..np).rev().find(|&m| f(m) <= x).unwrap()
        };
        let mut moved = 0;
        for a in 0..lens[0] {
            for b in 0..lens[1] {
                for c in 0..lens[2] {
                    if owner(src, [a, b, c]) != owner(dst, [a, b, c]) {
                        moved += 1;
                    }
                }
            }
        }
        moved
    }

    #[test]
    fn rebuilding_a_plan_is_deterministic() {
        let d = dims(4, 6, 8);
        let a = build_plan(d, 6, DimOrder::Abc, DimOrder::Cab).unwrap();
        let b = build_plan(d, 6, DimOrder::Abc, DimOrder::Cab).unwrap();
        assert_eq!(a, b);
        // Sender- and receiver-side derivations agree rank by rank.
        for r in 0..6 {
            assert_eq!(
                build_rank_plan(d, 6, DimOrder::Abc, DimOrder::Cab, r).unwrap(),
                a.ranks[r]
            );
        }
    }

    #[test]
    fn unsupported_world_is_rejected() {
        assert!(build_plan(dims(4, 4, 4), 17, DimOrder::Abc, DimOrder::Cab).is_err());
        // cab side caps at N3*N1 = 15 for 5x7x3.
        assert!(pipeline_plans(dims(5, 7, 3), 16).is_err());
        assert!(pipeline_plans(dims(5, 7, 3), 8).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn plans_match_oracle_on_random_worlds(
            n1 in 1usize..=6, n2 in 1usize..=6, n3 in 1usize..=6,
            np_sel in 1usize..=36,
            pair in 0usize..2,
        ) {
            let d = dims(n1, n2, n3);
            let (src, dst) = if pair == 0 {
                (DimOrder::Abc, DimOrder::Cab)
            } else {
                (DimOrder::Cab, DimOrder::Cba)
            };
            let cap = crate::decomp::max_ranks(d, src)
                .min(crate::decomp::max_ranks(d, dst));
            let np = 1 + np_sel % cap;
            check_plan_against_oracle(d, np, src, dst);
        }
    }
}
