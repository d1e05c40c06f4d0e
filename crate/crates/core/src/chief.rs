//! The blocked echelonization driver.
//!
//! The input is chopped into an `a x b` grid of blocks. Step 1 sweeps the grid
//! block row by block row, echelonizing each block against the pivots already
//! collected in its block column and replaying the row operations along the
//! block row. Step 2 widens the stored multiplier blocks to the final pivot-row
//! selections. Step 3 clears the pivot rows upwards, block column by block
//! column from the right.
//!
//! Every block-level operation is a node in a [`TaskGraph`]; all data moves
//! through versioned package slots ([`Slot`]).

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::ech::{default_kernel, EchKernel, EchResult};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::matrix::{IndexSet, Matrix};
use crate::scheduler::{Coords, Payload, RunOptions, Task, TaskGraph, TraceRecord};
use crate::tasks::{self, Package};

impl Payload for Package {
    fn byte_size(&self) -> usize {
        Package::byte_size(self)
    }
}

/// Row and column cut sizes of the block grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChopSpec {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

fn offsets(parts: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(parts.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &p in parts {
        acc += p;
        out.push(acc);
    }
    out
}

fn cuts(total: usize, block: usize) -> Vec<usize> {
    let mut out = vec![block; total / block];
    if total % block != 0 {
        out.push(total % block);
    }
    out
}

impl ChopSpec {
    /// Blocks of `block x block` with smaller trailing remainders.
    pub fn uniform(m: usize, n: usize, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::Plan("block size must be at least 1".into()));
        }
        Ok(ChopSpec { rows: cuts(m, block), cols: cuts(n, block) })
    }

    /// Like [`ChopSpec::uniform`], but the first and last parts in each
    /// direction are half a block, so the first and last block echelonizations
    /// finish sooner.
    pub fn tapered(m: usize, n: usize, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::Plan("block size must be at least 1".into()));
        }
        let taper = |total: usize| {
            let edge = (block / 2).max(1);
            if total <= edge {
                return cuts(total, block);
            }
            let last = edge.min(total - edge);
            let mut out = vec![edge];
            out.extend(cuts(total - edge - last, block));
            if last > 0 {
                out.push(last);
            }
            out
        };
        Ok(ChopSpec { rows: taper(m), cols: taper(n) })
    }

    pub fn a(&self) -> usize {
        self.rows.len()
    }

    pub fn b(&self) -> usize {
        self.cols.len()
    }

    /// Start of each block row, followed by the total row count.
    pub fn row_offsets(&self) -> Vec<usize> {
        offsets(&self.rows)
    }

    pub fn col_offsets(&self) -> Vec<usize> {
        offsets(&self.cols)
    }
}

/// `ceil(m/block)` row parts and `ceil(n/block)` column parts.
pub fn chop(m: usize, n: usize, block: usize) -> Result<ChopSpec> {
    ChopSpec::uniform(m, n, block)
}

/// Package slot key. Superscript versions become the `stage`/`ver` fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    /// Block `(i, k)` of the shrinking input after `stage` row updates.
    C { i: usize, k: usize, stage: usize },
    /// Column state of block column `j` after `ver` block rows.
    D { j: usize, ver: usize },
    A { i: usize, j: usize },
    E { i: usize, j: usize },
    /// Pivot rows of block column `j` restricted to block column `k`.
    B { j: usize, k: usize, ver: usize },
    K { i: usize, h: usize, stage: usize },
    M { j: usize, h: usize, ver: usize },
    /// Widened multiplier block during Step 3.
    MT { j: usize, h: usize, ver: usize },
    X { j: usize, k: usize },
    R { j: usize, l: usize, ver: usize },
}

/// A Chief task with its loop indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    ClearDown { i: usize, j: usize },
    Extend { i: usize, j: usize },
    UpdateRow { i: usize, j: usize, k: usize },
    UpdateRowTrafo { i: usize, h: usize, j: usize },
    RowLengthen { j: usize, h: usize },
    Copy { k: usize },
    PreClearUp { j: usize, k: usize },
    /// Clear block `R_jl` with the pivot rows of block column `k`.
    ClearUpR { j: usize, k: usize, l: usize },
    /// Clear block `M_jh` with the pivot rows of block column `k`.
    ClearUpM { j: usize, k: usize, h: usize },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::ClearDown { .. } => "ClearDown",
            TaskKind::Extend { .. } => "Extend",
            TaskKind::UpdateRow { .. } => "UpdateRow",
            TaskKind::UpdateRowTrafo { .. } => "UpdateRowTrafo",
            TaskKind::RowLengthen { .. } => "RowLengthen",
            TaskKind::Copy { .. } => "Copy",
            TaskKind::PreClearUp { .. } => "PreClearUp",
            TaskKind::ClearUpR { .. } | TaskKind::ClearUpM { .. } => "ClearUp",
        }
    }

    /// Trace coordinates: `i` is the block row acted on, `j` the block column
    /// (or transformation column `h` for M-side tasks), `k` the third loop index.
    pub fn coords(&self) -> Coords {
        let s = Some;
        match *self {
            TaskKind::ClearDown { i, j } | TaskKind::Extend { i, j } => Coords::new(s(i), s(j), None),
            TaskKind::UpdateRow { i, j, k } => Coords::new(s(i), s(j), s(k)),
            TaskKind::UpdateRowTrafo { i, h, j } => Coords::new(s(i), s(j), s(h)),
            TaskKind::RowLengthen { j, h } => Coords::new(s(j), s(h), None),
            TaskKind::Copy { k } => Coords::new(s(k), s(k), None),
            TaskKind::PreClearUp { j, k } => Coords::new(s(j), None, s(k)),
            TaskKind::ClearUpR { j, k, l } => Coords::new(s(j), s(l), s(k)),
            TaskKind::ClearUpM { j, k, h } => Coords::new(s(j), s(h), s(k)),
        }
    }

    /// Which of the three Chief steps the task belongs to.
    pub fn step(&self) -> u8 {
        match self {
            TaskKind::ClearDown { .. } | TaskKind::Extend { .. } | TaskKind::UpdateRow { .. } | TaskKind::UpdateRowTrafo { .. } => 1,
            TaskKind::RowLengthen { .. } => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name(), self.coords())
    }
}

/// Symbolic plan entry, shared by execution and analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanNode {
    pub kind: TaskKind,
    pub inputs: Vec<Slot>,
    pub outputs: Vec<Slot>,
    pub priority: i64,
}

/// All tasks of the Chief for an `a x b` grid, in loop order.
pub fn plan_nodes(a: usize, b: usize, with_transform: bool) -> Vec<PlanNode> {
    let mut out = Vec::new();
    let mut push = |kind, inputs, outputs, priority: usize| out.push(PlanNode { kind, inputs, outputs, priority: priority as i64 });

    for i in 0..a {
        for j in 0..b {
            let p = i + j;
            let mut ins = vec![Slot::C { i, k: j, stage: j }];
            if i > 0 {
                ins.push(Slot::D { j, ver: i });
            }
            push(TaskKind::ClearDown { i, j }, ins, vec![Slot::D { j, ver: i + 1 }, Slot::A { i, j }], p);

            let mut ins = vec![Slot::A { i, j }];
            if j > 0 {
                ins.push(Slot::E { i, j: j - 1 });
            }
            push(TaskKind::Extend { i, j }, ins, vec![Slot::E { i, j }], p);

            for k in j + 1..b {
                let mut ins = vec![Slot::A { i, j }, Slot::C { i, k, stage: j }];
                if i > 0 {
                    ins.push(Slot::B { j, k, ver: i });
                }
                push(TaskKind::UpdateRow { i, j, k }, ins, vec![Slot::C { i, k, stage: j + 1 }, Slot::B { j, k, ver: i + 1 }], p);
            }
            if with_transform {
                for h in 0..=i {
                    let mut ins = vec![Slot::A { i, j }, Slot::E { i: h, j }];
                    if j > 0 {
                        ins.push(Slot::K { i, h, stage: j });
                    }
                    if h < i {
                        ins.push(Slot::M { j, h, ver: i });
                    }
                    push(
                        TaskKind::UpdateRowTrafo { i, h, j },
                        ins,
                        vec![Slot::K { i, h, stage: j + 1 }, Slot::M { j, h, ver: i + 1 }],
                        p,
                    );
                }
            }
        }
    }

    if with_transform {
        for j in 0..b {
            for h in 0..a {
                push(
                    TaskKind::RowLengthen { j, h },
                    vec![Slot::M { j, h, ver: a }, Slot::E { i: h, j }, Slot::E { i: h, j: b - 1 }],
                    vec![Slot::MT { j, h, ver: 0 }],
                    a + b,
                );
            }
        }
    }

    for k in 0..b {
        push(TaskKind::Copy { k }, vec![Slot::D { j: k, ver: a }], vec![Slot::R { j: k, l: k, ver: 0 }], a + b);
    }
    for k in (0..b).rev() {
        let p = a + b + (b - 1 - k);
        for j in 0..k {
            push(
                TaskKind::PreClearUp { j, k },
                vec![Slot::B { j, k, ver: a }, Slot::D { j: k, ver: a }],
                vec![Slot::X { j, k }, Slot::R { j, l: k, ver: 0 }],
                p,
            );
            for l in k..b {
                push(
                    TaskKind::ClearUpR { j, k, l },
                    vec![Slot::R { j, l, ver: l - k }, Slot::X { j, k }, Slot::R { j: k, l, ver: l - k }],
                    vec![Slot::R { j, l, ver: l - k + 1 }],
                    p,
                );
            }
            if with_transform {
                let v = b - 1 - k;
                for h in 0..a {
                    push(
                        TaskKind::ClearUpM { j, k, h },
                        vec![Slot::MT { j, h, ver: v }, Slot::X { j, k }, Slot::MT { j: k, h, ver: v }],
                        vec![Slot::MT { j, h, ver: v + 1 }],
                        p,
                    );
                }
            }
        }
    }
    out
}

/// Slots holding the final results.
pub fn output_slots(a: usize, b: usize, with_transform: bool) -> Vec<Slot> {
    let mut out = Vec::new();
    for j in 0..b {
        out.push(Slot::D { j, ver: a });
        for l in j..b {
            out.push(Slot::R { j, l, ver: l - j });
        }
    }
    for i in 0..a {
        out.push(Slot::E { i, j: b - 1 });
    }
    if with_transform {
        for j in 0..b {
            for h in 0..a {
                out.push(Slot::MT { j, h, ver: b - 1 - j });
            }
        }
        for i in 0..a {
            for h in 0..=i {
                out.push(Slot::K { i, h, stage: b });
            }
        }
    }
    out
}

struct ChiefTask {
    kind: TaskKind,
    kernel: Arc<dyn EchKernel>,
}

fn input<'a>(inputs: &'a [Option<Arc<Package>>], idx: usize, what: &str) -> Result<&'a Package> {
    inputs
        .get(idx)
        .and_then(|p| p.as_deref())
        .ok_or_else(|| Error::Plan(format!("missing input {what}")))
}

impl Task<Package> for ChiefTask {
    fn kind(&self) -> &'static str {
        self.kind.name()
    }

    fn coords(&self) -> Coords {
        self.kind.coords()
    }

    fn run(&self, inp: &[Option<Arc<Package>>]) -> Result<Vec<Package>> {
        let m = |idx, what| input(inp, idx, what).and_then(Package::as_mat);
        let pa = |idx| input(inp, idx, "A").and_then(Package::as_a);
        let pd = |idx| input(inp, idx, "D").and_then(Package::as_d);
        let pe = |idx, what| input(inp, idx, what).and_then(Package::as_e);
        Ok(match self.kind {
            TaskKind::ClearDown { i, .. } => {
                let d = if i > 0 { Some(pd(1)?) } else { None };
                let (d, a) = tasks::clear_down(self.kernel.as_ref(), m(0, "C")?, d, i)?;
                vec![Package::D(d), Package::A(a)]
            }
            TaskKind::Extend { j, .. } => {
                let e = if j > 0 { Some(pe(1, "E")?) } else { None };
                vec![Package::E(tasks::extend(pa(0)?, e, j)?)]
            }
            TaskKind::UpdateRow { i, .. } => {
                let b = if i > 0 { Some(m(2, "B")?) } else { None };
                let (c, b) = tasks::update_row(pa(0)?, m(1, "C")?, b, i)?;
                vec![Package::Mat(c), Package::Mat(b)]
            }
            TaskKind::UpdateRowTrafo { i, h, j } => {
                let mut next = 2;
                let k = if j > 0 {
                    next += 1;
                    Some(m(2, "K")?)
                } else {
                    None
                };
                let mm = if h < i { Some(m(next, "M")?) } else { None };
                let (k, mm) = tasks::update_row_trafo(pa(0)?, k, mm, pe(1, "E")?, i, h, j)?;
                vec![Package::Mat(k), Package::Mat(mm)]
            }
            TaskKind::RowLengthen { .. } => vec![Package::Mat(tasks::row_lengthen(m(0, "M")?, pe(1, "E")?, pe(2, "E")?)?)],
            TaskKind::Copy { .. } => vec![Package::Mat(tasks::copy_d(pd(0)?))],
            TaskKind::PreClearUp { .. } => {
                let (x, r) = tasks::pre_clear_up(m(0, "B")?, pd(1)?)?;
                vec![Package::Mat(x), Package::Mat(r)]
            }
            TaskKind::ClearUpR { .. } | TaskKind::ClearUpM { .. } => {
                vec![Package::Mat(tasks::clear_up(m(0, "target")?, m(1, "X")?, m(2, "source")?)?)]
            }
        })
    }

    fn note(&self, outputs: &[Package]) -> Option<(usize, usize)> {
        match (self.kind, outputs) {
            (TaskKind::ClearDown { .. }, [Package::D(d), Package::A(a)]) => {
                let new = a.rho_prime.len();
                Some((d.gamma.len() - new, new))
            }
            _ => None,
        }
    }
}

/// Build the executable plan for `c` chopped by `chop`, with the initial
/// block packages.
pub fn build_plan(
    c: &Matrix,
    chop: &ChopSpec,
    with_transform: bool,
    kernel: Arc<dyn EchKernel>,
) -> Result<(TaskGraph<Slot, Package>, HashMap<Slot, Package>)> {
    let (ro, co) = (chop.row_offsets(), chop.col_offsets());
    if ro[chop.a()] != c.rows() || co[chop.b()] != c.cols() || chop.rows.contains(&0) || chop.cols.contains(&0) {
        return Err(Error::shape("build_plan", format!("chop {:?}x{:?} for {}x{}", chop.rows, chop.cols, c.rows(), c.cols())));
    }
    let (a, b) = (chop.a(), chop.b());
    let mut graph = TaskGraph::new();
    for node in plan_nodes(a, b, with_transform) {
        let task = ChiefTask { kind: node.kind, kernel: kernel.clone() };
        graph.add(Box::new(task), node.inputs, node.outputs, node.priority)?;
    }
    for slot in output_slots(a, b, with_transform) {
        graph.pin(slot);
    }
    let mut initial = HashMap::new();
    for i in 0..a {
        for k in 0..b {
            let blk = c.block(ro[i], co[k], chop.rows[i], chop.cols[k]);
            initial.insert(Slot::C { i, k, stage: 0 }, Package::Mat(blk));
        }
    }
    Ok((graph, initial))
}

/// Run configuration for [`echelonize`].
#[derive(Clone)]
pub struct ChiefOptions {
    pub block: usize,
    pub threads: usize,
    pub with_transform: bool,
    pub kernel: Arc<dyn EchKernel>,
    /// Keep every intermediate package in [`ChiefRun::packages`].
    pub retain_all: bool,
    /// Use [`ChopSpec::tapered`] instead of uniform blocks.
    pub taper: bool,
}

impl Default for ChiefOptions {
    fn default() -> Self {
        ChiefOptions { block: 256, threads: 1, with_transform: true, kernel: default_kernel(), retain_all: false, taper: false }
    }
}

impl fmt::Debug for ChiefOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChiefOptions")
            .field("block", &self.block)
            .field("threads", &self.threads)
            .field("with_transform", &self.with_transform)
            .field("kernel", &self.kernel.name())
            .field("retain_all", &self.retain_all)
            .field("taper", &self.taper)
            .finish()
    }
}

/// Result of a full run: the echelon form with its transformation in
/// block-sparse form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EchelonOutput {
    pub field: Field,
    pub chop: ChopSpec,
    /// `r_blocks[j][l - j]` is block `(j, l)` of the remnant, `l >= j`.
    pub r_blocks: Vec<Vec<Matrix>>,
    /// `m_blocks[j][h]`, rows by pivots of block column `j`, columns by
    /// `varrho[h]`.
    pub m_blocks: Option<Vec<Vec<Matrix>>>,
    /// `k_blocks[i][h]` for `h <= i`; rows by the non-selected rows of block
    /// row `i`, columns by `varrho[h]`.
    pub k_blocks: Option<Vec<Vec<Matrix>>>,
    /// Selected rows of each block row, local indices.
    pub varrho: Vec<IndexSet>,
    /// Pivot columns of each block column, local indices.
    pub upsilon: Vec<IndexSet>,
}

impl EchelonOutput {
    /// Rebuild an output from the dense remnant and per-block selections.
    /// Entries of `r` left of the block diagonal are dropped; see
    /// [`below_diagonal_entry`].
    pub fn from_parts(
        chop: ChopSpec,
        varrho: Vec<IndexSet>,
        upsilon: Vec<IndexSet>,
        r: &Matrix,
        transform: Option<(Vec<Vec<Matrix>>, Vec<Vec<Matrix>>)>,
    ) -> Result<Self> {
        let field = r.field().clone();
        if upsilon.len() != chop.b() || varrho.len() != chop.a() {
            return Err(Error::shape("from_parts", "selection count does not match the block grid"));
        }
        let rank: usize = upsilon.iter().map(IndexSet::len).sum();
        if r.shape() != (rank, chop.cols.iter().sum::<usize>() - rank) {
            return Err(Error::shape("from_parts", format!("remnant is {:?} for rank {rank}", r.shape())));
        }
        let hoff = offsets(&upsilon.iter().map(IndexSet::len).collect::<Vec<_>>());
        let woff = offsets(&upsilon.iter().map(|u| u.universe() - u.len()).collect::<Vec<_>>());
        let b = chop.b();
        let r_blocks = (0..b)
            .map(|j| (j..b).map(|l| r.block(hoff[j], woff[l], hoff[j + 1] - hoff[j], woff[l + 1] - woff[l])).collect())
            .collect();
        let (m_blocks, k_blocks) = match transform {
            Some((m, k)) => (Some(m), Some(k)),
            None => (None, None),
        };
        Ok(EchelonOutput { field, chop, r_blocks, m_blocks, k_blocks, varrho, upsilon })
    }

    pub fn rank(&self) -> usize {
        self.upsilon.iter().map(IndexSet::len).sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.chop.rows.iter().sum(), self.chop.cols.iter().sum())
    }

    pub fn with_transform(&self) -> bool {
        self.m_blocks.is_some()
    }

    /// Concatenation of the per-block-row selections with row offsets.
    pub fn global_varrho(&self) -> IndexSet {
        concat(&self.varrho, &self.chop.row_offsets())
    }

    /// Concatenation of the per-block-column pivots with column offsets.
    pub fn global_upsilon(&self) -> IndexSet {
        concat(&self.upsilon, &self.chop.col_offsets())
    }

    /// The dense `r x (n - r)` remnant, rows in ascending pivot column order.
    pub fn assembled_r(&self) -> Matrix {
        let (_, n) = self.shape();
        let r = self.rank();
        let widths: Vec<usize> = self.upsilon.iter().map(|u| u.universe() - u.len()).collect();
        let woff = offsets(&widths);
        let hoff = offsets(&self.upsilon.iter().map(IndexSet::len).collect::<Vec<_>>());
        let mut out = Matrix::zeros(&self.field, r, n - r);
        for (j, row) in self.r_blocks.iter().enumerate() {
            for (d, blk) in row.iter().enumerate() {
                out.put_block(hoff[j], woff[j + d], blk);
            }
        }
        out
    }

    /// Dense `m x m` transformation, rows ordered as (pivot rows, then the
    /// non-selected rows) and columns as (`varrho`, then its complement).
    pub fn transformation(&self) -> Option<Matrix> {
        let (mb, kb) = (self.m_blocks.as_ref()?, self.k_blocks.as_ref()?);
        let (m, _) = self.shape();
        let r = self.rank();
        let sel: Vec<usize> = self.varrho.iter().map(IndexSet::len).collect();
        let rest: Vec<usize> = self.varrho.iter().map(|s| s.universe() - s.len()).collect();
        let piv: Vec<usize> = self.upsilon.iter().map(IndexSet::len).collect();
        let (soff, roff, poff) = (offsets(&sel), offsets(&rest), offsets(&piv));
        let mut t = Matrix::zeros(&self.field, m, m);
        for (j, row) in mb.iter().enumerate() {
            for (h, blk) in row.iter().enumerate() {
                t.put_block(poff[j], soff[h], blk);
            }
        }
        for (i, row) in kb.iter().enumerate() {
            for (h, blk) in row.iter().enumerate() {
                t.put_block(r + roff[i], soff[h], blk);
            }
        }
        for x in 0..m - r {
            t.set(r + x, r + x, 1);
        }
        Some(t)
    }
}

/// First nonzero entry of a dense remnant that lies in a block left of the
/// block diagonal, where the echelon form must be zero.
pub fn below_diagonal_entry(upsilon: &[IndexSet], r: &Matrix) -> Option<(usize, usize)> {
    let hoff = offsets(&upsilon.iter().map(IndexSet::len).collect::<Vec<_>>());
    let woff = offsets(&upsilon.iter().map(|u| u.universe() - u.len()).collect::<Vec<_>>());
    for j in 0..upsilon.len() {
        for row in hoff[j]..hoff[j + 1].min(r.rows()) {
            if let Some(c) = (0..woff[j].min(r.cols())).find(|&c| r.get(row, c).0 != 0) {
                return Some((row, c));
            }
        }
    }
    None
}

fn concat(parts: &[IndexSet], off: &[usize]) -> IndexSet {
    let members = parts.iter().enumerate().flat_map(|(b, s)| s.members().iter().map(move |&x| x + off[b])).collect();
    IndexSet::from_sorted(off[parts.len()], members)
}

/// Output plus run diagnostics.
pub struct ChiefRun {
    pub output: EchelonOutput,
    pub trace: Vec<TraceRecord>,
    pub peak_live_bytes: usize,
    pub makespan_ns: u64,
    /// Every package of the run when requested, else the pinned outputs.
    pub packages: HashMap<Slot, Arc<Package>>,
}

fn take<'a>(pk: &'a HashMap<Slot, Arc<Package>>, s: Slot) -> Result<&'a Package> {
    pk.get(&s).map(|p| p.as_ref()).ok_or_else(|| Error::Plan(format!("output slot {s:?} missing")))
}

/// Echelonize `c`: plan, run on `opts.threads` workers, and assemble.
pub fn echelonize(c: &Matrix, opts: &ChiefOptions) -> Result<ChiefRun> {
    let chop = if opts.taper { ChopSpec::tapered(c.rows(), c.cols(), opts.block)? } else { chop(c.rows(), c.cols(), opts.block)? };
    let (a, b) = (chop.a(), chop.b());
    let field = c.field().clone();
    if a == 0 || b == 0 {
        let varrho = chop.rows.iter().map(|&n| IndexSet::empty(n)).collect();
        let upsilon = chop.cols.iter().map(|&n| IndexSet::empty(n)).collect();
        let r_blocks = (0..b).map(|j| (j..b).map(|l| Matrix::zeros(&field, 0, chop.cols[l])).collect()).collect();
        let (mb, kb) = if opts.with_transform {
            let m = (0..b).map(|_| (0..a).map(|_| Matrix::zeros(&field, 0, 0)).collect()).collect();
            let k = (0..a).map(|i| (0..=i).map(|_| Matrix::zeros(&field, chop.rows[i], 0)).collect()).collect();
            (Some(m), Some(k))
        } else {
            (None, None)
        };
        let output = EchelonOutput { field, chop, r_blocks, m_blocks: mb, k_blocks: kb, varrho, upsilon };
        return Ok(ChiefRun { output, trace: Vec::new(), peak_live_bytes: 0, makespan_ns: 0, packages: HashMap::new() });
    }

    let (graph, initial) = build_plan(c, &chop, opts.with_transform, opts.kernel.clone())?;
    let report = graph.run(initial, RunOptions { workers: opts.threads, retain_all: opts.retain_all })?;
    let pk = &report.outputs;

    let mut upsilon = Vec::with_capacity(b);
    let mut r_blocks = Vec::with_capacity(b);
    for j in 0..b {
        upsilon.push(take(pk, Slot::D { j, ver: a })?.as_d()?.gamma.clone());
        let row = (j..b).map(|l| take(pk, Slot::R { j, l, ver: l - j }).and_then(|p| p.as_mat().cloned())).collect::<Result<Vec<_>>>()?;
        r_blocks.push(row);
    }
    let varrho = (0..a).map(|i| take(pk, Slot::E { i, j: b - 1 }).and_then(|p| Ok(p.as_e()?.rho.clone()))).collect::<Result<Vec<_>>>()?;
    let (m_blocks, k_blocks) = if opts.with_transform {
        let mb = (0..b)
            .map(|j| (0..a).map(|h| take(pk, Slot::MT { j, h, ver: b - 1 - j }).and_then(|p| p.as_mat().cloned())).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        let kb = (0..a)
            .map(|i| (0..=i).map(|h| take(pk, Slot::K { i, h, stage: b }).and_then(|p| p.as_mat().cloned())).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        (Some(mb), Some(kb))
    } else {
        (None, None)
    };
    let output = EchelonOutput { field, chop, r_blocks, m_blocks, k_blocks, varrho, upsilon };
    Ok(ChiefRun { output, trace: report.trace, peak_live_bytes: report.peak_live_bytes, makespan_ns: report.makespan_ns, packages: report.outputs })
}

/// Rank via a transform-free run.
pub fn rank(c: &Matrix, block: usize, threads: usize) -> Result<usize> {
    let opts = ChiefOptions { block, threads, with_transform: false, ..ChiefOptions::default() };
    Ok(echelonize(c, &opts)?.output.rank())
}

/// Column-by-column Gauss-Jordan reduction, kept separate from the kernels.
/// Returns the reduced rows, the pivot `(column, row)` pairs in column order,
/// and, when tracked, the accumulated row operations.
fn gauss_jordan(c: &Matrix, track: bool) -> (Vec<Vec<u32>>, Vec<(usize, usize)>, Vec<Vec<u32>>) {
    let field = c.field();
    let (m, n) = c.shape();
    let mut rows: Vec<Vec<u32>> = (0..m).map(|r| c.row(r).to_vec()).collect();
    let mut ops: Vec<Vec<u32>> = if track {
        (0..m).map(|r| (0..m).map(|x| u32::from(x == r)).collect()).collect()
    } else {
        Vec::new()
    };
    let mut used = vec![false; m];
    let mut pivots = Vec::new();
    let minus_one = field.minus_one();
    for col in 0..n {
        let Some(t) = (0..m).find(|&t| !used[t] && rows[t][col] != 0) else { continue };
        let s = field.mul(minus_one, field.inv(crate::field::FieldElem(rows[t][col])).expect("nonzero")).0;
        field.scale(&mut rows[t], s);
        if track {
            field.scale(&mut ops[t], s);
        }
        let (pivot_row, pivot_ops) = (rows[t].clone(), if track { ops[t].clone() } else { Vec::new() });
        for x in 0..m {
            let f = rows[x][col];
            if x != t && f != 0 {
                field.axpy(&mut rows[x], f, &pivot_row);
                if track {
                    field.axpy(&mut ops[x], f, &pivot_ops);
                }
            }
        }
        used[t] = true;
        pivots.push((col, t));
    }
    (rows, pivots, ops)
}

/// Independent reference echelonization of the whole matrix.
pub fn oracle_rref(c: &Matrix) -> EchResult {
    let field = c.field();
    let (m, n) = c.shape();
    let (rows, pivots, ops) = gauss_jordan(c, true);
    let gamma = IndexSet::from_sorted(n, pivots.iter().map(|p| p.0).collect());
    let mut rho_members: Vec<usize> = pivots.iter().map(|p| p.1).collect();
    rho_members.sort_unstable();
    let rho = IndexSet::from_sorted(m, rho_members);
    let r = pivots.len();
    let non_pivot = gamma.complement();
    let mut mm = Vec::with_capacity(r * r);
    let mut rem = Vec::with_capacity(r * (n - r));
    for &(_, t) in &pivots {
        mm.extend(rho.members().iter().map(|&x| ops[t][x]));
        rem.extend(non_pivot.members().iter().map(|&col| rows[t][col]));
    }
    let mut k = Vec::new();
    for &s in rho.complement().members() {
        k.extend(rho.members().iter().map(|&x| ops[s][x]));
    }
    EchResult {
        m: Matrix::from_raw(field, r, r, mm),
        k: Matrix::from_raw(field, m - r, r, k),
        r: Matrix::from_raw(field, r, n - r, rem),
        rho,
        gamma,
    }
}

/// Pivot columns and remnant only, without tracking row operations.
pub fn oracle_pivots(c: &Matrix) -> (IndexSet, Matrix) {
    let n = c.cols();
    let (rows, pivots, _) = gauss_jordan(c, false);
    let gamma = IndexSet::from_sorted(n, pivots.iter().map(|p| p.0).collect());
    let non_pivot = gamma.complement();
    let mut rem = Vec::with_capacity(pivots.len() * non_pivot.len());
    for &(_, t) in &pivots {
        rem.extend(non_pivot.members().iter().map(|&col| rows[t][col]));
    }
    (gamma, Matrix::from_raw(c.field(), pivots.len(), non_pivot.len(), rem))
}

/// Outcome of [`verify`]; `detail` names the first mismatch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub ok: bool,
    pub detail: Option<String>,
}

impl VerifyReport {
    fn pass() -> Self {
        VerifyReport { ok: true, detail: None }
    }

    fn fail(msg: impl Into<String>) -> Self {
        VerifyReport { ok: false, detail: Some(msg.into()) }
    }
}

fn first_diff(got: &Matrix, want: &Matrix) -> Option<(usize, usize, u32, u32)> {
    (0..got.rows()).find_map(|r| {
        let (g, w) = (got.row(r), want.row(r));
        (0..g.len()).find(|&c| g[c] != w[c]).map(|c| (r, c, g[c], w[c]))
    })
}

fn check_shapes(c: &Matrix, out: &EchelonOutput) -> std::result::Result<(), String> {
    if out.field != *c.field() {
        return Err(format!("field mismatch: output {} vs input {}", out.field, c.field()));
    }
    if out.shape() != c.shape() {
        return Err(format!("shape mismatch: output {:?} vs input {:?}", out.shape(), c.shape()));
    }
    let (a, b) = (out.chop.a(), out.chop.b());
    if out.varrho.len() != a || out.upsilon.len() != b {
        return Err("selection count does not match the block grid".into());
    }
    for (i, s) in out.varrho.iter().enumerate() {
        if s.universe() != out.chop.rows[i] {
            return Err(format!("varrho[{i}] over {} rows, block has {}", s.universe(), out.chop.rows[i]));
        }
    }
    for (j, s) in out.upsilon.iter().enumerate() {
        if s.universe() != out.chop.cols[j] {
            return Err(format!("upsilon[{j}] over {} columns, block has {}", s.universe(), out.chop.cols[j]));
        }
    }
    let r_sel: usize = out.varrho.iter().map(IndexSet::len).sum();
    if r_sel != out.rank() {
        return Err(format!("varrho selects {r_sel} rows but rank is {}", out.rank()));
    }
    if out.r_blocks.len() != b {
        return Err("remnant block rows do not match the grid".into());
    }
    for (j, row) in out.r_blocks.iter().enumerate() {
        if row.len() != b - j {
            return Err(format!("remnant block row {j} has {} blocks", row.len()));
        }
        for (d, blk) in row.iter().enumerate() {
            let l = j + d;
            let want = (out.upsilon[j].len(), out.chop.cols[l] - out.upsilon[l].len());
            if blk.shape() != want {
                return Err(format!("remnant block ({j},{l}) is {:?}, expected {want:?}", blk.shape()));
            }
        }
    }
    if let (Some(mb), Some(kb)) = (&out.m_blocks, &out.k_blocks) {
        if mb.len() != b || kb.len() != a {
            return Err("transformation block grid does not match".into());
        }
        for (j, row) in mb.iter().enumerate() {
            for (h, blk) in row.iter().enumerate() {
                let want = (out.upsilon[j].len(), out.varrho[h].len());
                if row.len() != a || blk.shape() != want {
                    return Err(format!("M block ({j},{h}) is {:?}, expected {want:?}", blk.shape()));
                }
            }
        }
        for (i, row) in kb.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(format!("K block row {i} has {} blocks", row.len()));
            }
            for (h, blk) in row.iter().enumerate() {
                let want = (out.chop.rows[i] - out.varrho[i].len(), out.varrho[h].len());
                if blk.shape() != want {
                    return Err(format!("K block ({i},{h}) is {:?}, expected {want:?}", blk.shape()));
                }
            }
        }
    } else if out.m_blocks.is_some() != out.k_blocks.is_some() {
        return Err("transformation is only half present".into());
    }
    Ok(())
}

/// Check `out` against `c`: the pivots and remnant must equal the oracle's,
/// and with a transformation the defining identity must hold exactly.
pub fn verify(c: &Matrix, out: &EchelonOutput) -> VerifyReport {
    if let Err(msg) = check_shapes(c, out) {
        return VerifyReport::fail(msg);
    }
    verify_with(c, out, &oracle_pivots(c))
}

/// [`verify`] with a precomputed [`oracle_pivots`] result for `c`.
pub fn verify_with(c: &Matrix, out: &EchelonOutput, oracle: &(IndexSet, Matrix)) -> VerifyReport {
    if let Err(msg) = check_shapes(c, out) {
        return VerifyReport::fail(msg);
    }
    let (gamma, want_r) = (&oracle.0, &oracle.1);
    let upsilon = out.global_upsilon();
    if upsilon != *gamma {
        let pos = upsilon.members().iter().zip(gamma.members()).position(|(x, y)| x != y).unwrap_or(upsilon.len().min(gamma.len()));
        return VerifyReport::fail(format!(
            "pivot columns differ at position {pos}: got {:?}, expected {:?} (rank {} vs {})",
            upsilon.members().get(pos),
            gamma.members().get(pos),
            upsilon.len(),
            gamma.len()
        ));
    }
    let got_r = out.assembled_r();
    if got_r.shape() != want_r.shape() {
        return VerifyReport::fail(format!("remnant is {:?}, expected {:?}", got_r.shape(), want_r.shape()));
    }
    if let Some((r, col, g, w)) = first_diff(&got_r, want_r) {
        return VerifyReport::fail(format!("remnant entry ({r},{col}) is {g}, expected {w}"));
    }

    let rank = out.rank();
    let varrho = out.global_varrho();
    match out.transformation() {
        Some(t) => {
            let rows = c.pick_rows(&varrho.permutation());
            let arranged = rows.pick_cols(&upsilon.permutation());
            let lhs = match t.mul(&arranged) {
                Ok(x) => x,
                Err(e) => return VerifyReport::fail(format!("transformation product failed: {e}")),
            };
            let (m, n) = c.shape();
            let mut want = Matrix::zeros(c.field(), m, n);
            want.put_block(0, 0, &Matrix::minus_identity(c.field(), rank));
            want.put_block(0, rank, &got_r);
            if let Some((r, col, g, w)) = first_diff(&lhs, &want) {
                return VerifyReport::fail(format!("identity fails at ({r},{col}): got {g}, expected {w}"));
            }
        }
        None => {
            let (g, _) = oracle_pivots(&c.pick_rows(varrho.members()));
            if g.len() != rank {
                return VerifyReport::fail(format!("selected rows have rank {}, expected {rank}", g.len()));
            }
        }
    }
    VerifyReport::pass()
}
