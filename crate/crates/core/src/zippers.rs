//! r-zipper families: enumeration, normal forms, and the edge-path-set map.
//!
//! The fattened track is simulated combinatorially. Carried arcs appear as
//! strands: each edge holds an ordered list of crossings (its transverse
//! order), and each switch holds matched pairs recording which side-A tie
//! point continues into which side-B tie point. A tie-respecting isotopy can
//! neither reorder strands within an edge nor braid matched pairs, so this
//! data *is* the isotopy class.
//!
//! A family consists of one arc per cusp: either a plain arc crossing
//! exactly r edges and stopping on the far tie, or a switch connection
//! joining two cusps across at most 2r edges (one arc shared by both cusps).
//! Disjointness is enforced by the matching discipline: a strand crossing a
//! tie must land strictly between the images of its nearest matched
//! neighbours.
//!
//! The normal form is per-edge crossing counts plus free endpoint positions.
//! It determines the family: at every tie the crossing items on the two
//! sides must match up order-preservingly, and an order-preserving perfect
//! matching of two sequences is unique.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::lamination::{Lamination, LaminationError, RealizedPathSet};
use crate::path::{DirectedEdge, EdgePath};
use crate::track::{EdgeId, Side, SwitchId, TrainTrack};
use crate::weights::{end_local_index, WeightSystem};

/// A cusp of the complement: the spike between side positions `gap` and
/// `gap+1` on one side of a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cusp {
    pub switch: SwitchId,
    pub side: Side,
    pub gap: usize,
}

/// All cusps in canonical order (switch, side A before B, gap).
pub fn cusps(track: &TrainTrack) -> Vec<Cusp> {
    let mut out = Vec::new();
    for (si, sw) in track.switches.iter().enumerate() {
        for side in [Side::A, Side::B] {
            let n = sw.side(side).len();
            for gap in 0..n.saturating_sub(1) {
                out.push(Cusp { switch: SwitchId(si), side, gap });
            }
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ZipperError {
    #[error("enumeration limit reached after {families_found} families")]
    EnumerationLimit { families_found: usize },
    #[error("lamination does not cross every edge; zippers are undefined")]
    DoesNotFill,
    #[error("normal form does not reconstruct: {0}")]
    BadNormalForm(String),
    #[error(transparent)]
    Lamination(#[from] LaminationError),
}

/// One tie point: a cusp tip, or one end of a strand crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    Cusp(u32),
    End { cross: u32, end: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Owner {
    /// Multicurve strand guiding a construction; not part of the family.
    Guide,
    Arc(u16),
}

/// Where a profile gap leads: into `edge` via `end`, at end-local transverse
/// position `local`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct GapTarget {
    edge: u32,
    end: u8,
    local: u32,
}

/// The strand configuration: crossing lists per edge (end-0-local transverse
/// order) and matched pairs per switch, stored as (side-A item, side-B item).
#[derive(Debug, Clone)]
struct Layout {
    edge_lists: Vec<Vec<u32>>,
    cross_edge: Vec<u32>,
    cross_owner: Vec<Owner>,
    pairs: Vec<Vec<(Item, Item)>>,
    cusp_list: Vec<Cusp>,
}

impl Layout {
    fn empty(track: &TrainTrack) -> Layout {
        Layout {
            edge_lists: vec![Vec::new(); track.edges.len()],
            cross_edge: Vec::new(),
            cross_owner: Vec::new(),
            pairs: vec![Vec::new(); track.switches.len()],
            cusp_list: cusps(track),
        }
    }

    fn cusp_id(&self, c: Cusp) -> u32 {
        self.cusp_list.iter().position(|&x| x == c).expect("cusp exists") as u32
    }

    /// Tie profile along one side: strand ends block by block with cusp tips
    /// between blocks, plus the entry target of every gap (items.len() + 1
    /// gaps when the side is nonempty).
    fn profile(
        &self,
        track: &TrainTrack,
        switch: SwitchId,
        side: Side,
    ) -> (Vec<Item>, Vec<GapTarget>) {
        let ends = track.switches[switch.0].side(side);
        let mut items = Vec::new();
        let mut gaps = Vec::new();
        for (m, end) in ends.iter().enumerate() {
            let n = self.edge_lists[end.edge.0].len();
            gaps.push(GapTarget { edge: end.edge.0 as u32, end: end.end, local: 0 });
            for j in 0..n {
                let canon =
                    end_local_index(track, end.edge, end.end, j as u64, n as u64) as usize;
                items.push(Item::End { cross: self.edge_lists[end.edge.0][canon], end: end.end });
                if j + 1 < n {
                    gaps.push(GapTarget {
                        edge: end.edge.0 as u32,
                        end: end.end,
                        local: j as u32 + 1,
                    });
                }
            }
            if n > 0 {
                gaps.push(GapTarget { edge: end.edge.0 as u32, end: end.end, local: n as u32 });
            }
            if m + 1 < ends.len() {
                items.push(Item::Cusp(self.cusp_id(Cusp { switch, side, gap: m })));
                // gap after the cusp opens the next block; pushed on the next
                // loop iteration
            }
        }
        (items, gaps)
    }

    fn partner(&self, switch: SwitchId, item: Item) -> Option<Item> {
        self.pairs[switch.0].iter().find_map(|&(a, b)| {
            if a == item {
                Some(b)
            } else if b == item {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Admissible landing window on the opposite side: exclusive profile
    /// index bounds derived from the nearest matched neighbours of `item`.
    fn admissible_window(
        &self,
        track: &TrainTrack,
        switch: SwitchId,
        side: Side,
        item: Item,
    ) -> (isize, isize) {
        let (pa, _) = self.profile(track, switch, side);
        let (pb, _) = self.profile(track, switch, side.opposite());
        let ix = pa.iter().position(|&x| x == item).expect("arrival item in profile") as isize;
        let mut lo: isize = -1;
        for i in (0..ix).rev() {
            if let Some(p) = self.partner(switch, pa[i as usize]) {
                lo = pb.iter().position(|&x| x == p).expect("partner in profile") as isize;
                break;
            }
        }
        let mut hi: isize = pb.len() as isize;
        for i in (ix + 1) as usize..pa.len() {
            if let Some(p) = self.partner(switch, pa[i]) {
                hi = pb.iter().position(|&x| x == p).expect("partner in profile") as isize;
                break;
            }
        }
        (lo, hi)
    }

    fn push_pair(&mut self, switch: SwitchId, side_of_first: Side, x: Item, y: Item) {
        let pair = if side_of_first == Side::A { (x, y) } else { (y, x) };
        self.pairs[switch.0].push(pair);
    }

    fn pop_pair(&mut self, switch: SwitchId) {
        self.pairs[switch.0].pop();
    }

    fn insert_crossing(&mut self, track: &TrainTrack, target: GapTarget, owner: Owner) -> u32 {
        let cross = self.cross_edge.len() as u32;
        self.cross_edge.push(target.edge);
        self.cross_owner.push(owner);
        let e = target.edge as usize;
        let n = self.edge_lists[e].len() as u32;
        let canon = if target.end == 0 || track.edges[e].sides_opposite() {
            target.local as usize
        } else {
            (n - target.local) as usize
        };
        self.edge_lists[e].insert(canon, cross);
        cross
    }

    fn remove_last_crossing(&mut self) {
        let cross = (self.cross_edge.len() - 1) as u32;
        let e = self.cross_edge[cross as usize] as usize;
        let pos = self.edge_lists[e].iter().position(|&c| c == cross).unwrap();
        self.edge_lists[e].remove(pos);
        self.cross_edge.pop();
        self.cross_owner.pop();
    }

    /// Canonical total order of one tie: matched pairs anchor the two
    /// profiles, side-A singles come before side-B singles within each
    /// matched gap. Returns per-item ranks.
    fn merged_ranks(&self, track: &TrainTrack, switch: SwitchId) -> MergedRanks {
        let (pa, _) = self.profile(track, switch, Side::A);
        let (pb, _) = self.profile(track, switch, Side::B);
        let mut rank_a = vec![usize::MAX; pa.len()];
        let mut rank_b = vec![usize::MAX; pb.len()];
        let mut rank = 0usize;
        let mut ia = 0usize;
        let mut ib = 0usize;
        for i in 0..pa.len() {
            if let Some(p) = self.partner(switch, pa[i]) {
                let j = pb.iter().position(|&y| y == p).expect("partner in B profile");
                while ia < i {
                    rank_a[ia] = rank;
                    rank += 1;
                    ia += 1;
                }
                while ib < j {
                    rank_b[ib] = rank;
                    rank += 1;
                    ib += 1;
                }
                rank_a[i] = rank;
                rank_b[j] = rank;
                rank += 1;
                ia = i + 1;
                ib = j + 1;
            }
        }
        while ia < pa.len() {
            rank_a[ia] = rank;
            rank += 1;
            ia += 1;
        }
        while ib < pb.len() {
            rank_b[ib] = rank;
            rank += 1;
            ib += 1;
        }
        MergedRanks { pa, pb, rank_a, rank_b }
    }

    fn canonical_index(&self, cross: u32) -> (u32, u32) {
        let e = self.cross_edge[cross as usize];
        let idx = self.edge_lists[e as usize].iter().position(|&c| c == cross).unwrap();
        (e, idx as u32)
    }
}

struct MergedRanks {
    pa: Vec<Item>,
    pb: Vec<Item>,
    rank_a: Vec<usize>,
    rank_b: Vec<usize>,
}

impl MergedRanks {
    fn rank_of(&self, side: Side, item: Item) -> usize {
        let (p, r) = match side {
            Side::A => (&self.pa, &self.rank_a),
            Side::B => (&self.pb, &self.rank_b),
        };
        r[p.iter().position(|&x| x == item).expect("item in profile")]
    }
}

/// Kind and route of one zipper arc.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArcKind {
    /// Crosses exactly r edges and stops on the far tie.
    Plain,
    /// Joins the root cusp to cusp `target`, crossing at most 2r edges.
    SwitchConnection { target: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZipperArc {
    pub root: usize,
    pub kind: ArcKind,
    /// Directed edges crossed, in order from the root cusp (empty for a
    /// direct cusp-to-cusp connection across one tie).
    pub path: Vec<DirectedEdge>,
}

/// The normal form: per-edge crossing counts plus free endpoint positions
/// (edge, transverse index, end). Families are equal iff these are.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZipperNormalForm {
    pub counts: Vec<u32>,
    pub terminals: Vec<(u32, u32, u8)>,
}

impl ZipperNormalForm {
    pub fn total_crossings(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// A fully laid-out family.
#[derive(Debug, Clone)]
pub struct ZipperFamily {
    pub r: usize,
    pub arcs: Vec<ZipperArc>,
    /// cusp index -> arc index
    pub cusp_arc: Vec<usize>,
    layout: Layout,
}

impl ZipperFamily {
    pub fn normal_form(&self, track: &TrainTrack) -> ZipperNormalForm {
        let counts: Vec<u32> = self.layout.edge_lists.iter().map(|l| l.len() as u32).collect();
        let mut terminals = Vec::new();
        for (e, list) in self.layout.edge_lists.iter().enumerate() {
            for (idx, &cross) in list.iter().enumerate() {
                for end in 0..2u8 {
                    let item = Item::End { cross, end };
                    let sw = track.attachment(crate::track::EdgeEnd { edge: EdgeId(e), end }).switch;
                    if self.layout.partner(sw, item).is_none() {
                        terminals.push((e as u32, idx as u32, end));
                    }
                }
            }
        }
        terminals.sort_unstable();
        ZipperNormalForm { counts, terminals }
    }

    pub fn total_crossings(&self) -> usize {
        self.layout.cross_edge.len()
    }
}

/// 2^p · p^(p+q) · r^(p+q), the coarse counting bound (saturating).
pub fn z_r_upper_bound(p: u32, q: u32, r: u32) -> u128 {
    let mut out: u128 = 1;
    let mut mul = |x: u128| out = out.saturating_mul(x);
    for _ in 0..p {
        mul(2);
    }
    for _ in 0..(p + q) {
        mul(p as u128);
    }
    for _ in 0..(p + q) {
        mul(r as u128);
    }
    out
}

// ---------------------------------------------------------------------------
// Enumeration

struct Enumerator<'t> {
    track: &'t TrainTrack,
    r: usize,
    cap: usize,
    node_budget: u64,
    layout: Layout,
    cusp_arc: Vec<Option<u16>>,
    arcs: Vec<ZipperArc>,
    out: Vec<ZipperNormalForm>,
}

enum Stop {
    Cap,
}

impl<'t> Enumerator<'t> {
    fn cusp_site(&self, c: usize) -> (SwitchId, Side) {
        let cusp = self.layout.cusp_list[c];
        (cusp.switch, cusp.side)
    }

    fn run(&mut self) -> Result<(), Stop> {
        self.next_cusp(0)
    }

    fn next_cusp(&mut self, from: usize) -> Result<(), Stop> {
        let Some(c) = (from..self.layout.cusp_list.len()).find(|&i| self.cusp_arc[i].is_none())
        else {
            if self.out.len() >= self.cap {
                return Err(Stop::Cap);
            }
            self.out.push(current_normal_form(self.track, &self.layout));
            return Ok(());
        };
        let (sw, side) = self.cusp_site(c);
        let arc_id = self.arcs.len() as u16;
        self.arcs.push(ZipperArc { root: c, kind: ArcKind::Plain, path: Vec::new() });
        self.cusp_arc[c] = Some(arc_id);
        self.step(c, arc_id, Item::Cusp(c as u32), sw, side)?;
        self.cusp_arc[c] = None;
        self.arcs.pop();
        Ok(())
    }

    /// Extend the arc arriving at `item` on `side` of `sw`.
    fn step(
        &mut self,
        root: usize,
        arc_id: u16,
        item: Item,
        sw: SwitchId,
        side: Side,
    ) -> Result<(), Stop> {
        if self.node_budget == 0 {
            return Err(Stop::Cap);
        }
        self.node_budget -= 1;
        let crossings = self.arcs[arc_id as usize].path.len();

        // plain stop: exactly r edges crossed, endpoint rests on this tie
        if crossings == self.r {
            self.arcs[arc_id as usize].kind = ArcKind::Plain;
            self.next_cusp(root + 1)?;
        }

        let (lo, hi) = self.layout.admissible_window(self.track, sw, side, item);
        let (pb, gaps) = self.layout.profile(self.track, sw, side.opposite());

        // switch connections: stop at an unmatched cusp tip strictly inside
        // the window (its arc must not exist yet)
        if crossings <= 2 * self.r {
            for (i, &y) in pb.iter().enumerate() {
                let Item::Cusp(target) = y else { continue };
                if (i as isize) <= lo || (i as isize) >= hi {
                    continue;
                }
                if self.cusp_arc[target as usize].is_some() {
                    continue;
                }
                self.layout.push_pair(sw, side, item, y);
                self.cusp_arc[target as usize] = Some(arc_id);
                self.arcs[arc_id as usize].kind =
                    ArcKind::SwitchConnection { target: target as usize };
                self.next_cusp(root + 1)?;
                self.arcs[arc_id as usize].kind = ArcKind::Plain;
                self.cusp_arc[target as usize] = None;
                self.layout.pop_pair(sw);
            }
        }

        // cross into an opposite-side edge through an admissible gap
        if crossings < 2 * self.r {
            for g in 0..gaps.len() {
                let gi = g as isize;
                if gi <= lo || gi > hi {
                    continue;
                }
                let target = gaps[g];
                let cross =
                    self.layout.insert_crossing(self.track, target, Owner::Arc(arc_id));
                let entry = Item::End { cross, end: target.end };
                self.layout.push_pair(sw, side, item, entry);
                let d = DirectedEdge::departing(crate::track::EdgeEnd {
                    edge: EdgeId(target.edge as usize),
                    end: target.end,
                });
                self.arcs[arc_id as usize].path.push(d);
                let far = d.head();
                let att = self.track.attachment(far);
                let far_item = Item::End { cross, end: far.end };
                self.step(root, arc_id, far_item, att.switch, att.side)?;
                self.arcs[arc_id as usize].path.pop();
                self.layout.pop_pair(sw);
                self.layout.remove_last_crossing();
            }
        }
        Ok(())
    }
}

fn current_normal_form(track: &TrainTrack, layout: &Layout) -> ZipperNormalForm {
    let counts: Vec<u32> = layout.edge_lists.iter().map(|l| l.len() as u32).collect();
    let mut terminals = Vec::new();
    for (e, list) in layout.edge_lists.iter().enumerate() {
        for (idx, &cross) in list.iter().enumerate() {
            if layout.cross_owner[cross as usize] == Owner::Guide {
                continue;
            }
            for end in 0..2u8 {
                let item = Item::End { cross, end };
                let sw = track.attachment(crate::track::EdgeEnd { edge: EdgeId(e), end }).switch;
                if layout.partner(sw, item).is_none() {
                    terminals.push((e as u32, idx as u32, end));
                }
            }
        }
    }
    terminals.sort_unstable();
    ZipperNormalForm { counts, terminals }
}

pub const DEFAULT_FAMILY_CAP: usize = 1_000_000;

/// Enumerate every r-zipper family on the track, as sorted normal forms.
/// Depth-first growth from each cusp in canonical order; the cap bounds both
/// emitted families and explored nodes, and exceeding it reports the partial
/// count as a lower bound.
pub fn enumerate_zipper_families(
    track: &TrainTrack,
    r: usize,
    cap: usize,
) -> Result<Vec<ZipperNormalForm>, ZipperError> {
    assert!(r >= 1);
    let layout = Layout::empty(track);
    let ncusps = layout.cusp_list.len();
    let mut en = Enumerator {
        track,
        r,
        cap,
        node_budget: (cap as u64).saturating_mul(64).max(1 << 22),
        layout,
        cusp_arc: vec![None; ncusps],
        arcs: Vec::new(),
        out: Vec::new(),
    };
    match en.run() {
        Ok(()) => {
            let mut out = en.out;
            out.sort_unstable();
            let before = out.len();
            out.dedup();
            debug_assert_eq!(before, out.len(), "normal forms collided");
            Ok(out)
        }
        Err(Stop::Cap) => Err(ZipperError::EnumerationLimit { families_found: en.out.len() }),
    }
}

// ---------------------------------------------------------------------------
// Zippers from a carried multicurve

/// One tie of the channel walked alongside a lamination: where the channel
/// arrives and, if the bounding strands continue together, the pair of
/// strand ends they enter the next edge through.
#[derive(Clone, Copy)]
struct ChannelStage {
    sw: SwitchId,
    side: Side,
    entry: Option<(Item, Item)>,
}

/// Build the zipper family associated to a multicurve that crosses every
/// edge: each cusp's arc runs alongside the two nearest strands until they
/// split (switch connection) or for r edges (plain arc).
pub fn zippers_from_multicurve(
    track: &TrainTrack,
    weights: &WeightSystem,
    r: usize,
) -> Result<ZipperFamily, ZipperError> {
    weights.check(track).map_err(LaminationError::from)?;
    let w = weights.integral().map_err(LaminationError::from)?;
    if w.iter().any(|&x| x == 0) {
        return Err(ZipperError::DoesNotFill);
    }

    let mut layout = Layout::empty(track);
    // lay the guide strands; crossing id = (edge base + strand index)
    for (e, &count) in w.iter().enumerate() {
        for _ in 0..count {
            let cross = layout.cross_edge.len() as u32;
            layout.cross_edge.push(e as u32);
            layout.cross_owner.push(Owner::Guide);
            layout.edge_lists[e].push(cross);
        }
    }
    // matched pairs at every switch: stack height i on side A continues at
    // stack height i on side B (the crossing-free matching)
    for si in 0..track.switches.len() {
        let stack = |side: Side, layout: &Layout| -> Vec<Item> {
            let mut v = Vec::new();
            for end in track.switches[si].side(side) {
                let n = w[end.edge.0];
                for j in 0..n {
                    let canon = end_local_index(track, end.edge, end.end, j, n) as usize;
                    v.push(Item::End { cross: layout.edge_lists[end.edge.0][canon], end: end.end });
                }
            }
            v
        };
        let sa = stack(Side::A, &layout);
        let sb = stack(Side::B, &layout);
        debug_assert_eq!(sa.len(), sb.len());
        for (x, y) in sa.into_iter().zip(sb) {
            layout.pairs[si].push((x, y));
        }
    }

    let ncusps = layout.cusp_list.len();
    let mut cusp_arc: Vec<Option<usize>> = vec![None; ncusps];
    let mut arcs: Vec<ZipperArc> = Vec::new();

    for c in 0..ncusps {
        if cusp_arc[c].is_some() {
            continue;
        }
        let cusp = layout.cusp_list[c];
        let ends = track.switches[cusp.switch.0].side(cusp.side);
        // the two guide strands nearest the tip: bottom of block `gap`, top
        // of block `gap+1`, in end-local order (guides sit at the outer
        // positions of each block, z-strands of earlier arcs between them)
        let guide_near = |layout: &Layout, end: crate::track::EdgeEnd, last: bool| -> Item {
            let list = &layout.edge_lists[end.edge.0];
            let n = list.len() as u64;
            let pick = (0..n)
                .map(|j| end_local_index(track, end.edge, end.end, j, n))
                .map(|canon| list[canon as usize])
                .filter(|&cr| layout.cross_owner[cr as usize] == Owner::Guide);
            let cross = if last { pick.last() } else { pick.into_iter().next() }
                .expect("filling multicurve has a strand in every edge");
            Item::End { cross, end: end.end }
        };
        let mut l_item = guide_near(&layout, ends[cusp.gap], true);
        let mut lp_item = guide_near(&layout, ends[cusp.gap + 1], false);
        let mut sw = cusp.switch;
        let mut side = cusp.side;

        // probe the shared channel for up to 2r+1 edges
        let mut stages: Vec<ChannelStage> = Vec::new();
        let mut diverged: Option<(usize, usize)> = None; // (edges crossed, cusp)
        for t in 0..=(2 * r) {
            let pl = layout.partner(sw, l_item).expect("guides are matched");
            let plp = layout.partner(sw, lp_item).expect("guides are matched");
            let (Item::End { cross: cl, end: el }, Item::End { cross: clp, end: elp }) = (pl, plp)
            else {
                unreachable!("guide partners are strand ends")
            };
            let e_l = layout.cross_edge[cl as usize];
            let e_lp = layout.cross_edge[clp as usize];
            if e_l != e_lp || el != elp {
                // the strands enter adjacent blocks; the cusp between them
                // separates the channel
                let opp = side.opposite();
                let ends_opp = track.switches[sw.0].side(opp);
                let bl = ends_opp
                    .iter()
                    .position(|en| en.edge.0 as u32 == e_l && en.end == el)
                    .expect("block of l's continuation");
                let blp = ends_opp
                    .iter()
                    .position(|en| en.edge.0 as u32 == e_lp && en.end == elp)
                    .expect("block of lp's continuation");
                assert_eq!(bl + 1, blp, "diverging strands must enter adjacent blocks");
                let target = layout.cusp_id(Cusp { switch: sw, side: opp, gap: bl }) as usize;
                stages.push(ChannelStage { sw, side, entry: None });
                diverged = Some((t, target));
                break;
            }
            stages.push(ChannelStage { sw, side, entry: Some((pl, plp)) });
            // advance to the far tie
            let far = 1 - el;
            l_item = Item::End { cross: cl, end: far };
            lp_item = Item::End { cross: clp, end: far };
            let att = track.attachment(crate::track::EdgeEnd { edge: EdgeId(e_l as usize), end: far });
            sw = att.switch;
            side = att.side;
        }

        let (kind, length) = match diverged {
            Some((t, target)) => (ArcKind::SwitchConnection { target }, t),
            None => (ArcKind::Plain, r),
        };

        // lay the arc into the channel
        let arc_id = arcs.len();
        let mut path = Vec::new();
        let mut prev_item = Item::Cusp(c as u32);
        for stage in stages.iter().take(length) {
            let (entry_end, entry_cross) = insert_between(track, &mut layout, stage, arc_id as u16);
            let entry_item = Item::End { cross: entry_cross, end: entry_end.end };
            layout.push_pair(stage.sw, stage.side, prev_item, entry_item);
            path.push(DirectedEdge::departing(entry_end));
            prev_item = Item::End { cross: entry_cross, end: 1 - entry_end.end };
        }
        if let ArcKind::SwitchConnection { target } = kind {
            let last = stages[length];
            layout.push_pair(last.sw, last.side, prev_item, Item::Cusp(target as u32));
            cusp_arc[target] = Some(arc_id);
        }
        cusp_arc[c] = Some(arc_id);
        arcs.push(ZipperArc { root: c, kind, path });
    }

    // strip the guides: only arc-owned crossings remain, renumbered
    let family_layout = strip_guides(track, &layout);
    Ok(ZipperFamily {
        r,
        arcs,
        cusp_arc: cusp_arc.into_iter().map(|o| o.unwrap()).collect(),
        layout: family_layout,
    })
}

/// Insert a crossing for `arc` exactly between the stage's two channel
/// strands. The gap between them must be empty: two distinct arcs never
/// share a component of edge-minus-lamination.
fn insert_between(
    track: &TrainTrack,
    layout: &mut Layout,
    stage: &ChannelStage,
    arc: u16,
) -> (crate::track::EdgeEnd, u32) {
    let (pl, plp) = stage.entry.expect("continuing stage");
    let (Item::End { cross: cl, end }, Item::End { cross: clp, .. }) = (pl, plp) else {
        unreachable!()
    };
    let e = layout.cross_edge[cl as usize] as usize;
    let il = layout.edge_lists[e].iter().position(|&c| c == cl).unwrap();
    let ilp = layout.edge_lists[e].iter().position(|&c| c == clp).unwrap();
    assert_eq!(il.abs_diff(ilp), 1, "channel gap not adjacent: another arc intruded");
    let canon_slot = il.max(ilp) as u32;
    let n = layout.edge_lists[e].len() as u32;
    let local = if end == 0 || track.edges[e].sides_opposite() {
        canon_slot
    } else {
        n - canon_slot
    };
    let target = GapTarget { edge: e as u32, end, local };
    let cross = layout.insert_crossing(track, target, Owner::Arc(arc));
    (crate::track::EdgeEnd { edge: EdgeId(e), end }, cross)
}

fn strip_guides(track: &TrainTrack, layout: &Layout) -> Layout {
    let mut map = vec![u32::MAX; layout.cross_edge.len()];
    let mut out = Layout::empty(track);
    for (e, list) in layout.edge_lists.iter().enumerate() {
        for &cross in list {
            if let Owner::Arc(a) = layout.cross_owner[cross as usize] {
                let new = out.cross_edge.len() as u32;
                map[cross as usize] = new;
                out.cross_edge.push(e as u32);
                out.cross_owner.push(Owner::Arc(a));
                out.edge_lists[e].push(new);
            }
        }
    }
    let remap = |item: Item| -> Option<Item> {
        match item {
            Item::Cusp(c) => Some(Item::Cusp(c)),
            Item::End { cross, end } => {
                if map[cross as usize] == u32::MAX {
                    None
                } else {
                    Some(Item::End { cross: map[cross as usize], end })
                }
            }
        }
    };
    for (si, pairs) in layout.pairs.iter().enumerate() {
        for &(a, b) in pairs {
            if let (Some(a2), Some(b2)) = (remap(a), remap(b)) {
                out.pairs[si].push((a2, b2));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reconstruction from a normal form

/// Rebuild the unique family with the given normal form, or explain why none
/// exists. Crossing lists at each tie must zip up order-preservingly; arcs
/// are then traced out and validated against the two arc kinds.
pub fn reconstruct_family(
    track: &TrainTrack,
    r: usize,
    nf: &ZipperNormalForm,
) -> Result<ZipperFamily, ZipperError> {
    let bad = |msg: &str| ZipperError::BadNormalForm(msg.to_string());
    if nf.counts.len() != track.edges.len() {
        return Err(bad("count vector length mismatch"));
    }
    let mut layout = Layout::empty(track);
    for (e, &n) in nf.counts.iter().enumerate() {
        for _ in 0..n {
            let cross = layout.cross_edge.len() as u32;
            layout.cross_edge.push(e as u32);
            layout.cross_owner.push(Owner::Arc(0));
            layout.edge_lists[e].push(cross);
        }
    }
    let terminal: BTreeSet<(u32, u32, u8)> = nf.terminals.iter().copied().collect();
    if terminal.len() != nf.terminals.len() {
        return Err(bad("duplicate terminals"));
    }
    let is_terminal = |layout: &Layout, item: Item| -> bool {
        match item {
            Item::Cusp(_) => false,
            Item::End { cross, end } => {
                let (e, idx) = layout.canonical_index(cross);
                terminal.contains(&(e, idx, end))
            }
        }
    };
    // zip every tie
    for si in 0..track.switches.len() {
        let sw = SwitchId(si);
        let (pa, _) = layout.profile(track, sw, Side::A);
        let (pb, _) = layout.profile(track, sw, Side::B);
        let ca: Vec<Item> = pa.into_iter().filter(|&x| !is_terminal(&layout, x)).collect();
        let cb: Vec<Item> = pb.into_iter().filter(|&x| !is_terminal(&layout, x)).collect();
        if ca.len() != cb.len() {
            return Err(bad("tie crossing lists have unequal lengths"));
        }
        for (x, y) in ca.into_iter().zip(cb) {
            layout.pairs[si].push((x, y));
        }
    }
    // trace arcs from each cusp
    let ncusps = layout.cusp_list.len();
    let mut cusp_arc: Vec<Option<usize>> = vec![None; ncusps];
    let mut arcs: Vec<ZipperArc> = Vec::new();
    let mut used = vec![false; layout.cross_edge.len()];
    for c in 0..ncusps {
        if cusp_arc[c].is_some() {
            continue;
        }
        let arc_id = arcs.len();
        let mut path = Vec::new();
        let cusp = layout.cusp_list[c];
        let mut sw = cusp.switch;
        let mut item = Item::Cusp(c as u32);
        let kind = loop {
            let Some(next) = layout.partner(sw, item) else {
                // unmatched: plain terminal (for a cusp item this cannot
                // happen, every cusp was zipped)
                match item {
                    Item::Cusp(_) => return Err(bad("cusp left unmatched")),
                    Item::End { .. } => break ArcKind::Plain,
                }
            };
            match next {
                Item::Cusp(t) => {
                    let t = t as usize;
                    if t == c {
                        return Err(bad("arc returned to its own root"));
                    }
                    if cusp_arc[t].is_some() {
                        return Err(bad("two arcs at one cusp"));
                    }
                    cusp_arc[t] = Some(arc_id);
                    break ArcKind::SwitchConnection { target: t };
                }
                Item::End { cross, end } => {
                    if used[cross as usize] {
                        return Err(bad("strand traversed twice"));
                    }
                    used[cross as usize] = true;
                    let e = EdgeId(layout.cross_edge[cross as usize] as usize);
                    path.push(DirectedEdge::departing(crate::track::EdgeEnd { edge: e, end }));
                    let far = 1 - end;
                    item = Item::End { cross, end: far };
                    sw = track.attachment(crate::track::EdgeEnd { edge: e, end: far }).switch;
                }
            }
        };
        match &kind {
            ArcKind::Plain => {
                if path.len() != r {
                    return Err(bad("plain arc does not cross exactly r edges"));
                }
            }
            ArcKind::SwitchConnection { .. } => {
                if path.len() > 2 * r {
                    return Err(bad("switch connection exceeds 2r edges"));
                }
            }
        }
        cusp_arc[c] = Some(arc_id);
        arcs.push(ZipperArc { root: c, kind, path });
    }
    if used.iter().zip(&layout.cross_owner).any(|(&u, _)| !u) {
        return Err(bad("crossings left over: closed loops are not arcs"));
    }
    Ok(ZipperFamily {
        r,
        arcs,
        cusp_arc: cusp_arc.into_iter().map(|o| o.unwrap()).collect(),
        layout,
    })
}

// ---------------------------------------------------------------------------
// The edge-path-set map c

/// A gap whose extension was ambiguous or blocked; the map emits nothing for
/// it. Families built from laminations never produce these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedGap {
    pub edge: EdgeId,
    pub gap: usize,
    pub reason: String,
}

/// Apply the map c: for every component f of every edge minus the family,
/// grow maximal arcs both ways crossing r+1 edges each (the middle edge
/// shared) and collect the length-2r+1 paths they follow.
pub fn pathset_from_zippers(
    track: &TrainTrack,
    family: &ZipperFamily,
    r: usize,
) -> (RealizedPathSet, Vec<FlaggedGap>) {
    let mut paths = Vec::new();
    let mut flagged = Vec::new();
    for e in 0..track.edges.len() {
        let n = family.layout.edge_lists[e].len();
        for gap in 0..=n {
            match gap_path(track, &family.layout, EdgeId(e), gap, r) {
                Ok(p) => paths.push(p),
                Err(reason) => flagged.push(FlaggedGap { edge: EdgeId(e), gap, reason }),
            }
        }
    }
    (RealizedPathSet::from_paths(2 * r + 1, paths), flagged)
}

fn gap_path(
    track: &TrainTrack,
    layout: &Layout,
    edge: EdgeId,
    gap: usize,
    r: usize,
) -> Result<EdgePath, String> {
    let fwd = extend_walk(track, layout, edge, gap, 1, r)?;
    let bwd = extend_walk(track, layout, edge, gap, 0, r)?;
    let mut seq: Vec<DirectedEdge> = bwd.iter().rev().map(|d| d.reversed()).collect();
    seq.push(DirectedEdge::forward(edge));
    seq.extend_from_slice(&fwd);
    Ok(EdgePath(seq))
}

/// Walk r more edges out of `edge` through `exit_end`, staying inside the
/// family's gap structure. Frontier is a canonical-coordinate gap range of
/// one edge; it must land in a single block at every tie.
fn extend_walk(
    track: &TrainTrack,
    layout: &Layout,
    edge: EdgeId,
    gap: usize,
    exit_end: u8,
    r: usize,
) -> Result<Vec<DirectedEdge>, String> {
    let mut out = Vec::new();
    let mut cur_edge = edge;
    let mut cur_exit = exit_end;
    let mut glo = gap;
    let mut ghi = gap;
    for _ in 0..r {
        let att = track.attachment(crate::track::EdgeEnd { edge: cur_edge, end: cur_exit });
        let sw = att.switch;
        let side = att.side;
        let ranks = layout.merged_ranks(track, sw);
        let n = layout.edge_lists[cur_edge.0].len() as u32;
        // interval bounds of the gap range on the arrival side, in merged ranks
        let (a1, b1) = range_bounds(track, layout, &ranks, sw, side, cur_edge, cur_exit, glo, ghi, n);
        // reachable gaps on the far side
        let opp = side.opposite();
        let (pb, gaps) = layout.profile(track, sw, opp);
        let mut hits: Vec<GapTarget> = Vec::new();
        for (g, t) in gaps.iter().enumerate() {
            let above: i64 = if g == 0 { -1 } else { rank_i64(&ranks, opp, pb[g - 1]) };
            let below: i64 =
                if g == gaps.len() - 1 { i64::MAX } else { rank_i64(&ranks, opp, pb[g]) };
            if a1 < below && above < b1 {
                hits.push(*t);
            }
        }
        let Some(first) = hits.first() else {
            return Err("gap admits no extension".to_string());
        };
        if hits.iter().any(|t| t.edge != first.edge || t.end != first.end) {
            return Err("extension is ambiguous across blocks".to_string());
        }
        let e2 = EdgeId(first.edge as usize);
        let n2 = layout.edge_lists[e2.0].len() as u32;
        let locs: Vec<u32> = hits.iter().map(|t| t.local).collect();
        let to_canon = |local: u32| -> u32 {
            if first.end == 0 || track.edges[e2.0].sides_opposite() {
                local
            } else {
                n2 - local
            }
        };
        let canon: Vec<u32> = locs.iter().map(|&l| to_canon(l)).collect();
        glo = *canon.iter().min().unwrap() as usize;
        ghi = *canon.iter().max().unwrap() as usize;
        out.push(DirectedEdge::departing(crate::track::EdgeEnd { edge: e2, end: first.end }));
        cur_edge = e2;
        cur_exit = 1 - first.end;
    }
    Ok(out)
}

fn rank_i64(ranks: &MergedRanks, side: Side, item: Item) -> i64 {
    ranks.rank_of(side, item) as i64
}

#[allow(clippy::too_many_arguments)]
fn range_bounds(
    track: &TrainTrack,
    layout: &Layout,
    ranks: &MergedRanks,
    sw: SwitchId,
    side: Side,
    edge: EdgeId,
    end: u8,
    glo: usize,
    ghi: usize,
    n: u32,
) -> (i64, i64) {
    // end-local gap indices of the canonical range
    let to_local = |canon: usize| -> u32 {
        if end == 0 || track.edges[edge.0].sides_opposite() {
            canon as u32
        } else {
            n - canon as u32
        }
    };
    let (l1, l2) = (to_local(glo), to_local(ghi));
    let (jlo, jhi) = (l1.min(l2), l1.max(l2));
    // the block's position on this side
    let ends = track.switches[sw.0].side(side);
    let block = ends
        .iter()
        .position(|en| en.edge == edge && en.end == end)
        .expect("edge end attached here");
    let item_above: Option<Item> = if jlo > 0 {
        let canon = end_local_index(track, edge, end, jlo as u64 - 1, n as u64) as usize;
        Some(Item::End { cross: layout.edge_lists[edge.0][canon], end })
    } else if block > 0 {
        Some(Item::Cusp(layout.cusp_id(Cusp { switch: sw, side, gap: block - 1 })))
    } else {
        None
    };
    let item_below: Option<Item> = if (jhi as u64) < n as u64 {
        let canon = end_local_index(track, edge, end, jhi as u64, n as u64) as usize;
        Some(Item::End { cross: layout.edge_lists[edge.0][canon], end })
    } else if block + 1 < ends.len() {
        Some(Item::Cusp(layout.cusp_id(Cusp { switch: sw, side, gap: block })))
    } else {
        None
    };
    let a = item_above.map_or(-1, |it| rank_i64(ranks, side, it));
    let b = item_below.map_or(i64::MAX, |it| rank_i64(ranks, side, it));
    (a, b)
}

// ---------------------------------------------------------------------------
// Census of realized families

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensusProvenance {
    /// Families sampled from actual laminations: a lower bound for the count
    /// of realizable families.
    LaminationSample,
    /// Images c(z) of enumerated zipper families: an upper-bound census.
    ZipperImage,
}

#[derive(Debug, Clone)]
pub struct PathFamilyCensus {
    pub r: usize,
    pub families: Vec<RealizedPathSet>,
    pub provenance: CensusProvenance,
}

impl PathFamilyCensus {
    pub fn size(&self) -> usize {
        self.families.len()
    }
}

/// Collect the distinct realized length-(2r+1) path families over a sample
/// of laminations.
pub fn census_realized_families(
    track: &TrainTrack,
    sample: &[Lamination],
    r: usize,
) -> Result<PathFamilyCensus, LaminationError> {
    for lam in sample {
        if lam.track().as_ref() != track {
            return Err(LaminationError::TrackMismatch);
        }
    }
    let sets: Result<Vec<RealizedPathSet>, LaminationError> =
        sample.par_iter().map(|lam| lam.realized_paths(2 * r + 1)).collect();
    let families: BTreeSet<RealizedPathSet> = sets?.into_iter().collect();
    Ok(PathFamilyCensus {
        r,
        families: families.into_iter().collect(),
        provenance: CensusProvenance::LaminationSample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::assets;

    #[test]
    fn cusp_counts() {
        let t = assets::torus();
        assert_eq!(cusps(&t).len(), 2);
        assert_eq!(cusps(&assets::four_punctured_sphere()).len(), 4);
        assert_eq!(cusps(&assets::genus2()).len(), 6);
        for t in assets::all() {
            let p = cusps(&t).len();
            let chi = t.euler_characteristic().unsigned_abs() as usize;
            assert!(p <= 6 * chi, "{}", t.name);
        }
    }

    #[test]
    fn torus_r1_enumeration_is_sane() {
        let t = assets::torus();
        let fams = enumerate_zipper_families(&t, 1, DEFAULT_FAMILY_CAP).unwrap();
        assert!(!fams.is_empty());
        // the crossing-free double switch connection is one of them
        assert!(fams.iter().any(|f| f.total_crossings() == 0));
        // paper bound
        let bound = z_r_upper_bound(2, 2, 1);
        assert!((fams.len() as u128) <= bound, "{} > {}", fams.len(), bound);
        // crossings bounded by p*r
        for f in &fams {
            assert!(f.total_crossings() <= 2);
        }
    }

    #[test]
    fn counts_nondecreasing_in_r() {
        let t = assets::torus();
        let mut last = 0;
        for r in 1..=4 {
            let n = enumerate_zipper_families(&t, r, DEFAULT_FAMILY_CAP).unwrap().len();
            assert!(n >= last, "#Z_{r} = {n} < {last}");
            last = n;
        }
    }

    #[test]
    fn reconstruction_round_trips() {
        for track in assets::all() {
            let r = 2;
            let fams = match enumerate_zipper_families(&track, r, 20_000) {
                Ok(f) => f,
                Err(ZipperError::EnumerationLimit { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            for nf in fams.iter().step_by(7) {
                let fam = reconstruct_family(&track, r, nf).expect("valid nf reconstructs");
                assert_eq!(&fam.normal_form(&track), nf, "{}", track.name);
                // arcs pair up: switch connections shared, plains solo
                for (c, &a) in fam.cusp_arc.iter().enumerate() {
                    let arc = &fam.arcs[a];
                    match &arc.kind {
                        ArcKind::Plain => assert_eq!(arc.root, c),
                        ArcKind::SwitchConnection { target } => {
                            assert!(arc.root == c || *target == c)
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bad_normal_forms_rejected() {
        let t = assets::torus();
        // a terminal on a strand whose other end crosses leaves the tie
        // lists unbalanced
        let nf = ZipperNormalForm { counts: vec![1, 0], terminals: vec![(0, 0, 0)] };
        assert!(reconstruct_family(&t, 1, &nf).is_err());
        // terminal-free bulk strands close up into loops, which are not arcs
        let nf = ZipperNormalForm { counts: vec![9, 9], terminals: vec![] };
        assert!(reconstruct_family(&t, 1, &nf).is_err());
        // counts [1,0] with no terminals is the switch connection along `a`:
        // valid, and round-trips
        let nf = ZipperNormalForm { counts: vec![1, 0], terminals: vec![] };
        let fam = reconstruct_family(&t, 1, &nf).unwrap();
        assert_eq!(fam.normal_form(&t), nf);
    }

    #[test]
    fn sc_family_maps_to_slope_one_paths() {
        // weights (1,1): both cusps join in a crossing-free switch
        // connection; c must reproduce the slope-1 language
        let t = assets::torus();
        let fam = zippers_from_multicurve(&t, &WeightSystem::from_integers(&[1, 1]), 2).unwrap();
        assert_eq!(fam.arcs.len(), 1);
        assert!(matches!(fam.arcs[0].kind, ArcKind::SwitchConnection { .. }));
        assert_eq!(fam.arcs[0].path.len(), 0);
        let (paths, flagged) = pathset_from_zippers(&t, &fam, 2);
        assert!(flagged.is_empty());
        let lam = Lamination::from_slope(crate::torus::Slope::rational(1, 1).unwrap());
        assert_eq!(paths, lam.realized_paths(5).unwrap());
    }

    #[test]
    fn zipper_images_match_languages() {
        // c(a(lambda)) == b(lambda) over interior slopes at small r
        let t = assets::torus();
        for (p, q) in [(1u64, 1u64), (1, 2), (2, 3), (1, 3), (3, 4)] {
            for r in 1..=3usize {
                let fam = zippers_from_multicurve(
                    &t,
                    &WeightSystem::from_integers(&[q as i64, p as i64]),
                    r,
                )
                .unwrap();
                let (paths, flagged) = pathset_from_zippers(&t, &fam, r);
                assert!(flagged.is_empty(), "{p}/{q} r={r}: {flagged:?}");
                let lam = Lamination::from_slope(crate::torus::Slope::rational(p, q).unwrap());
                assert_eq!(paths, lam.realized_paths(2 * r + 1).unwrap(), "{p}/{q} r={r}");
            }
        }
    }

    #[test]
    fn lamination_zippers_are_enumerated() {
        // a(lambda) appears in the full enumeration
        let t = assets::torus();
        let r = 2;
        let all = enumerate_zipper_families(&t, r, DEFAULT_FAMILY_CAP).unwrap();
        for (p, q) in [(1u64, 1u64), (1, 2), (2, 3)] {
            let fam =
                zippers_from_multicurve(&t, &WeightSystem::from_integers(&[q as i64, p as i64]), r)
                    .unwrap();
            let nf = fam.normal_form(&t);
            assert!(all.binary_search(&nf).is_ok(), "a(lambda {p}/{q}) missing");
        }
    }

    #[test]
    fn multicurve_zippers_on_other_assets() {
        let t = assets::four_punctured_sphere();
        let fam = zippers_from_multicurve(&t, &WeightSystem::from_integers(&[1, 1, 1, 1]), 2).unwrap();
        // every cusp has an arc, arcs disjointly embedded by construction
        assert_eq!(fam.cusp_arc.len(), 4);
        let (paths, flagged) = pathset_from_zippers(&t, &fam, 2);
        assert!(flagged.is_empty());
        let lam = Lamination::from_multicurve(
            std::sync::Arc::new(t.clone()),
            &WeightSystem::from_integers(&[1, 1, 1, 1]),
        )
        .unwrap();
        assert_eq!(paths, lam.realized_paths(5).unwrap());

        let g = assets::genus2();
        let fam = zippers_from_multicurve(&g, &WeightSystem::from_integers(&[1, 1, 1, 1]), 2).unwrap();
        let (paths, flagged) = pathset_from_zippers(&g, &fam, 2);
        assert!(flagged.is_empty());
        let lam = Lamination::from_multicurve(
            std::sync::Arc::new(g.clone()),
            &WeightSystem::from_integers(&[1, 1, 1, 1]),
        )
        .unwrap();
        assert_eq!(paths, lam.realized_paths(5).unwrap());
    }

    #[test]
    fn census_bounds() {
        let t = assets::torus();
        let r = 2;
        let lams: Vec<Lamination> = crate::torus::farey_slopes(8)
            .into_iter()
            .filter(|s| matches!(s, crate::torus::Slope::Rational { p, q } if *p > 0 && *q > 0))
            .map(Lamination::from_slope)
            .collect();
        let census = census_realized_families(&t, &lams, r).unwrap();
        assert!(census.size() >= 1);
        let z = enumerate_zipper_families(&t, r, DEFAULT_FAMILY_CAP).unwrap();
        assert!(census.size() <= z.len(), "census {} > #Z_r {}", census.size(), z.len());
    }

    #[test]
    fn census_of_single_lamination() {
        let t = assets::torus();
        let lams = vec![Lamination::from_slope(crate::torus::Slope::rational(1, 2).unwrap())];
        assert_eq!(census_realized_families(&t, &lams, 3).unwrap().size(), 1);
    }

    #[test]
    fn enumeration_cap_reports_partial() {
        let t = assets::torus();
        match enumerate_zipper_families(&t, 3, 5) {
            Err(ZipperError::EnumerationLimit { families_found }) => {
                assert!(families_found >= 5)
            }
            other => panic!("expected cap, got {other:?}"),
        }
    }

    #[test]
    fn zero_weight_rejected_for_zippers() {
        let t = assets::torus();
        assert_eq!(
            zippers_from_multicurve(&t, &WeightSystem::from_integers(&[1, 0]), 2),
            Err(ZipperError::DoesNotFill)
        );
    }
}

impl PartialEq for ZipperFamily {
    fn eq(&self, other: &Self) -> bool {
        self.r == other.r && self.arcs == other.arcs && self.cusp_arc == other.cusp_arc
    }
}
