//! Cost model and critical-path analysis of the Chief's task graph.
//!
//! Costs are counted in field multiply-adds: an `(x by y) . (y by z)` product
//! costs `xyz`. Everything is exact integer arithmetic in quarter units so
//! that the `1.25 alpha^3` bound stays integral.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::sync::Arc;

use crate::chief::{plan_nodes, PlanNode, Slot, TaskKind};
use crate::error::{Error, Result};
use crate::scheduler::TraceRecord;

/// A cost in quarter units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cost(u128);

impl Cost {
    pub const ZERO: Cost = Cost(0);

    pub fn units(n: u128) -> Self {
        Cost(4 * n)
    }

    pub fn quarters(q: u128) -> Self {
        Cost(q)
    }

    pub fn in_quarters(self) -> u128 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 4.0
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost(self.0 + o.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, o: Cost) {
        self.0 += o.0;
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let frac = ["", ".25", ".5", ".75"][(self.0 % 4) as usize];
        write!(f, "{}{}", self.0 / 4, frac)
    }
}

/// Built-in cost modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Upper bounds for every task: ClearDown alpha^3, row updates 1.25 alpha^3.
    WorstCase,
    /// Costs of a well-conditioned input.
    WellConditioned,
    /// Operation counts evaluated at the ranks a run actually met.
    Exact,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::WorstCase => "worst_case",
            Mode::WellConditioned => "well_conditioned",
            Mode::Exact => "exact",
        }
    }
}

fn cube(alpha: u128) -> u128 {
    alpha * alpha * alpha
}

/// Cost of a single task under `mode`, for blocks of dimension `alpha`.
/// `r` is the rank already known in the block column and `r_prime` the number
/// of new pivots found by the ClearDown at the task's `(i, j)`.
pub fn task_cost(mode: Mode, alpha: usize, kind: &TaskKind, r: usize, r_prime: usize) -> Result<Cost> {
    if alpha == 0 {
        return Err(Error::Plan("alpha must be at least 1".into()));
    }
    if r + r_prime > alpha {
        return Err(Error::Plan(format!("r + r' = {} exceeds alpha = {alpha}", r + r_prime)));
    }
    let (al, r, rp) = (alpha as u128, r as u128, r_prime as u128);
    let a3 = cube(al);
    Ok(match (*kind, mode) {
        (TaskKind::ClearDown { .. }, Mode::WorstCase) => Cost::units(a3),
        (TaskKind::ClearDown { i, j }, Mode::WellConditioned) => Cost::units(if i == j { a3 } else { 0 }),
        (TaskKind::ClearDown { i, .. }, Mode::Exact) => {
            if i == 0 {
                Cost::units(a3)
            } else {
                Cost::units(al * r * (al - r) + al * (al - r) * rp + r * rp * (al - r - rp))
            }
        }
        (TaskKind::UpdateRow { .. } | TaskKind::UpdateRowTrafo { .. }, Mode::WorstCase) => Cost::quarters(5 * a3),
        (TaskKind::UpdateRow { .. } | TaskKind::UpdateRowTrafo { .. }, Mode::WellConditioned) => Cost::units(a3),
        (TaskKind::UpdateRow { .. } | TaskKind::UpdateRowTrafo { .. }, Mode::Exact) => Cost::units(al * al * (r + rp) + al * r * rp),
        (TaskKind::ClearUpR { .. } | TaskKind::ClearUpM { .. }, _) => Cost::units(a3),
        (TaskKind::Extend { .. } | TaskKind::RowLengthen { .. } | TaskKind::PreClearUp { .. } | TaskKind::Copy { .. }, _) => Cost::ZERO,
    })
}

/// Exhaustive check of the per-task worst-case bounds. Returns the first `(alpha, r, r')`
/// that violates them.
pub fn check_cost_bounds(max_alpha: usize) -> Option<(usize, usize, usize)> {
    let cd = TaskKind::ClearDown { i: 1, j: 0 };
    let ur = TaskKind::UpdateRow { i: 1, j: 0, k: 1 };
    for alpha in 1..=max_alpha {
        let a3 = cube(alpha as u128);
        for r in 0..=alpha {
            for rp in 0..=alpha - r {
                let c = task_cost(Mode::Exact, alpha, &cd, r, rp).ok()?;
                let u = task_cost(Mode::Exact, alpha, &ur, r, rp).ok()?;
                if c > Cost::units(a3) || u > Cost::quarters(5 * a3) {
                    return Some((alpha, r, rp));
                }
            }
        }
    }
    None
}

/// Assigns a cost to every node of a plan.
pub trait CostModel: Send + Sync {
    fn name(&self) -> &str;
    /// Cost of plan node `index`.
    fn cost(&self, index: usize, node: &PlanNode, alpha: usize) -> Result<Cost>;
}

/// Worst-case, well-conditioned, or exact costs without run data.
pub struct Formula {
    mode: Mode,
    ranks: HashMap<(usize, usize), (usize, usize)>,
}

impl Formula {
    pub fn new(mode: Mode) -> Self {
        Formula { mode, ranks: HashMap::new() }
    }

    /// Exact costs with `(r, r')` taken from the ClearDown notes of a run.
    pub fn exact_from_trace(trace: &[TraceRecord]) -> Self {
        let ranks = trace
            .iter()
            .filter(|t| t.kind == "ClearDown")
            .filter_map(|t| Some(((t.coords.i?, t.coords.j?), t.note?)))
            .collect();
        Formula { mode: Mode::Exact, ranks }
    }
}

impl CostModel for Formula {
    fn name(&self) -> &str {
        self.mode.name()
    }

    fn cost(&self, _index: usize, node: &PlanNode, alpha: usize) -> Result<Cost> {
        let ij = match node.kind {
            TaskKind::ClearDown { i, j } | TaskKind::UpdateRow { i, j, .. } | TaskKind::UpdateRowTrafo { i, j, .. } => Some((i, j)),
            _ => None,
        };
        let (r, rp) = match (self.mode, ij) {
            (Mode::Exact, Some(ij)) => *self
                .ranks
                .get(&ij)
                .ok_or_else(|| Error::Plan(format!("no ClearDown ranks recorded for {}", node.kind)))?,
            _ => (0, 0),
        };
        task_cost(self.mode, alpha, &node.kind, r, rp)
    }
}

/// Observed task durations in nanoseconds, counted as whole units.
pub struct Measured {
    durations: HashMap<usize, u64>,
}

impl Measured {
    pub fn from_trace(trace: &[TraceRecord]) -> Self {
        Measured { durations: trace.iter().map(|t| (t.node, t.end_ns - t.start_ns)).collect() }
    }
}

impl CostModel for Measured {
    fn name(&self) -> &str {
        "measured"
    }

    fn cost(&self, index: usize, node: &PlanNode, _alpha: usize) -> Result<Cost> {
        self.durations
            .get(&index)
            .map(|&ns| Cost::units(ns as u128))
            .ok_or_else(|| Error::Plan(format!("no timing recorded for {}", node.kind)))
    }
}

type Ctor = fn(Option<&[TraceRecord]>) -> Result<Arc<dyn CostModel>>;

fn need_trace(name: &str, trace: Option<&[TraceRecord]>) -> Result<()> {
    match trace {
        Some(_) => Ok(()),
        None => Err(Error::Plan(format!("cost model {name} needs a run trace"))),
    }
}

/// Cost models by name.
pub struct CostModelRegistry {
    entries: BTreeMap<String, Ctor>,
}

impl Default for CostModelRegistry {
    fn default() -> Self {
        let mut reg = CostModelRegistry { entries: BTreeMap::new() };
        reg.register("worst_case", |_| Ok(Arc::new(Formula::new(Mode::WorstCase))));
        reg.register("well_conditioned", |_| Ok(Arc::new(Formula::new(Mode::WellConditioned))));
        reg.register("exact", |t| {
            need_trace("exact", t)?;
            Ok(Arc::new(Formula::exact_from_trace(t.unwrap_or_default())))
        });
        reg.register("measured", |t| {
            need_trace("measured", t)?;
            Ok(Arc::new(Measured::from_trace(t.unwrap_or_default())))
        });
        reg
    }
}

impl CostModelRegistry {
    pub fn register(&mut self, name: &str, ctor: Ctor) {
        self.entries.insert(name.to_string(), ctor);
    }

    /// Whether the model is computed from a run.
    pub fn needs_trace(&self, name: &str) -> bool {
        self.entries.get(name).is_some_and(|c| c(None).is_err())
    }

    pub fn create(&self, name: &str, trace: Option<&[TraceRecord]>) -> Result<Arc<dyn CostModel>> {
        let ctor = self.entries.get(name).ok_or_else(|| Error::Plan(format!("unknown cost model {name:?}; known: {}", self.names().join(", "))))?;
        ctor(trace)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// The plan's dependency structure with one cost per node.
pub struct CostedGraph {
    pub nodes: Vec<PlanNode>,
    pub preds: Vec<Vec<usize>>,
    pub costs: Vec<Cost>,
}

impl CostedGraph {
    /// The full Chief plan for an `a x b` grid.
    pub fn chief(a: usize, b: usize, alpha: usize, with_transform: bool, model: &dyn CostModel) -> Result<Self> {
        Self::from_nodes(plan_nodes(a, b, with_transform), alpha, model)
    }

    pub fn from_nodes(nodes: Vec<PlanNode>, alpha: usize, model: &dyn CostModel) -> Result<Self> {
        let mut producer: HashMap<Slot, usize> = HashMap::new();
        for (v, n) in nodes.iter().enumerate() {
            for s in &n.outputs {
                producer.insert(*s, v);
            }
        }
        let preds = nodes
            .iter()
            .map(|n| {
                let mut p: Vec<usize> = n.inputs.iter().filter_map(|s| producer.get(s).copied()).collect();
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        let costs = nodes.iter().enumerate().map(|(v, n)| model.cost(v, n, alpha)).collect::<Result<_>>()?;
        Ok(CostedGraph { nodes, preds, costs })
    }

    pub fn total(&self, keep: impl Fn(&TaskKind) -> bool) -> Cost {
        self.nodes.iter().zip(&self.costs).filter(|(n, _)| keep(&n.kind)).map(|(_, &c)| c).sum()
    }

    /// Heaviest path through the subgraph induced by nodes passing `keep`.
    pub fn critical_path(&self, keep: impl Fn(&TaskKind) -> bool) -> Result<Cost> {
        let n = self.nodes.len();
        let inside: Vec<bool> = self.nodes.iter().map(|x| keep(&x.kind)).collect();
        let mut succs = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for v in (0..n).filter(|&v| inside[v]) {
            for &u in self.preds[v].iter().filter(|&&u| inside[u]) {
                succs[u].push(v);
                indeg[v] += 1;
            }
        }
        let mut finish = vec![Cost::ZERO; n];
        let mut queue: Vec<usize> = (0..n).filter(|&v| inside[v] && indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(u) = queue.pop() {
            seen += 1;
            finish[u] += self.costs[u];
            for &v in &succs[u] {
                finish[v] = finish[v].max(finish[u]);
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
        if seen != inside.iter().filter(|&&x| x).count() {
            return Err(Error::Plan("cost graph has a cycle".into()));
        }
        Ok(finish.into_iter().max().unwrap_or(Cost::ZERO))
    }

    /// Step-1 bound by layers `i + j`: each layer contributes its heaviest
    /// ClearDown plus its heaviest row update.
    pub fn layered_step_one(&self, with_transform: bool) -> Cost {
        let mut clear: BTreeMap<usize, Cost> = BTreeMap::new();
        let mut update: BTreeMap<usize, Cost> = BTreeMap::new();
        for (n, &c) in self.nodes.iter().zip(&self.costs) {
            let (map, layer) = match n.kind {
                TaskKind::ClearDown { i, j } => (&mut clear, i + j),
                TaskKind::UpdateRow { i, j, .. } => (&mut update, i + j),
                TaskKind::UpdateRowTrafo { i, j, .. } if with_transform => (&mut update, i + j),
                _ => continue,
            };
            let e = map.entry(layer).or_default();
            *e = (*e).max(c);
        }
        clear.values().copied().sum::<Cost>() + update.values().copied().sum::<Cost>()
    }
}

pub fn is_step_one(k: &TaskKind) -> bool {
    k.step() == 1
}

pub fn is_step_three(k: &TaskKind) -> bool {
    k.step() == 3
}

/// Tasks that only exist to build the transformation.
pub fn is_transform_task(k: &TaskKind) -> bool {
    matches!(k, TaskKind::UpdateRowTrafo { .. } | TaskKind::RowLengthen { .. } | TaskKind::ClearUpM { .. })
}

/// Average degree of concurrency, `total / critical`.
pub fn avg_concurrency(total: Cost, critical: Cost) -> Result<f64> {
    if critical == Cost::ZERO {
        return Err(Error::Plan("critical path has zero cost".into()));
    }
    Ok(total.in_quarters() as f64 / critical.in_quarters() as f64)
}

/// Sequential elimination cost of the whole `(a alpha) x (b alpha)` input:
/// `m n min(m, n)`.
pub fn sequential_cost(a: usize, b: usize, alpha: usize) -> Cost {
    let (m, n) = ((a * alpha) as u128, (b * alpha) as u128);
    Cost::units(m * n * m.min(n))
}

/// One line of the analysis table.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelRow {
    pub a: usize,
    pub b: usize,
    pub alpha: usize,
    pub mode: String,
    pub total_cost: Cost,
    /// Heaviest Step-1 path in the task graph.
    pub step1_exact: Cost,
    /// Step-1 bound summed over layers.
    pub step1_layered: Cost,
    pub step3: Cost,
    pub critical_path: Cost,
    pub avg_concurrency: f64,
}

impl ModelRow {
    pub const HEADER: &'static str = "a\tb\talpha\tmode\ttotal_cost\tcritical_path\tavg_concurrency\tstep1_layered\tstep1_exact\tstep3";
}

impl fmt::Display for ModelRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}",
            self.a, self.b, self.alpha, self.mode, self.total_cost, self.critical_path, self.avg_concurrency, self.step1_layered, self.step1_exact, self.step3
        )
    }
}

/// Model-unit analysis of the `a x b` Chief. The worst-case headline path is
/// the layered Step-1 bound of the transformation-tracking plan plus the
/// Step-3 path; the well-conditioned headline covers the Step-1 graph without
/// transformation tasks. Other models use the heaviest path of the full graph.
pub fn analyze(a: usize, b: usize, alpha: usize, model: &dyn CostModel) -> Result<ModelRow> {
    let g = CostedGraph::chief(a, b, alpha, true, model)?;
    let step3 = g.critical_path(is_step_three)?;
    let (step1_exact, step1_layered, critical_path) = match model.name() {
        "well_conditioned" => {
            let keep = |k: &TaskKind| is_step_one(k) && !is_transform_task(k);
            let e = g.critical_path(keep)?;
            let l = g.layered_step_one(false);
            (e, l, l)
        }
        "worst_case" => {
            let l = g.layered_step_one(true);
            (g.critical_path(is_step_one)?, l, l + step3)
        }
        _ => (g.critical_path(is_step_one)?, g.layered_step_one(true), g.critical_path(|_| true)?),
    };
    let total_cost = if model.name() == "measured" { g.total(|_| true) } else { sequential_cost(a, b, alpha) };
    let avg = if critical_path == Cost::ZERO { 0.0 } else { avg_concurrency(total_cost, critical_path)? };
    Ok(ModelRow {
        a,
        b,
        alpha,
        mode: model.name().to_string(),
        total_cost,
        step1_exact,
        step1_layered,
        step3,
        critical_path,
        avg_concurrency: avg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(x: f64) -> Cost {
        Cost::quarters((x * 4.0) as u128)
    }

    #[test]
    fn cost_examples() {
        let cd = TaskKind::ClearDown { i: 1, j: 0 };
        assert_eq!(task_cost(Mode::Exact, 10, &cd, 5, 5).unwrap(), Cost::units(500));
        let ur = TaskKind::UpdateRow { i: 0, j: 0, k: 1 };
        assert_eq!(task_cost(Mode::WorstCase, 2, &ur, 0, 0).unwrap(), Cost::units(10));
        assert_eq!(task_cost(Mode::Exact, 3, &TaskKind::Copy { k: 0 }, 0, 0).unwrap(), Cost::ZERO);
        assert_eq!(task_cost(Mode::Exact, 4, &TaskKind::ClearDown { i: 0, j: 2 }, 1, 1).unwrap(), Cost::units(64));
        assert!(task_cost(Mode::Exact, 4, &cd, 3, 2).is_err());
        let wc = |i, j| task_cost(Mode::WellConditioned, 3, &TaskKind::ClearDown { i, j }, 0, 0).unwrap();
        assert_eq!((wc(2, 2), wc(2, 1)), (Cost::units(27), Cost::ZERO));
    }

    #[test]
    fn cost_display_and_arithmetic() {
        assert_eq!(Cost::quarters(5).to_string(), "1.25");
        assert_eq!(Cost::quarters(18).to_string(), "4.5");
        assert_eq!(Cost::units(7).to_string(), "7");
        assert_eq!([Cost::quarters(3), Cost::quarters(3)].into_iter().sum::<Cost>(), q(1.5));
    }

    #[test]
    fn lemma_bounds_small() {
        assert_eq!(check_cost_bounds(16), None);
    }

    #[test]
    fn registry_lists_modes() {
        let reg = CostModelRegistry::default();
        assert_eq!(reg.names(), vec!["exact", "measured", "well_conditioned", "worst_case"]);
        assert!(reg.needs_trace("measured") && !reg.needs_trace("worst_case"));
        assert!(reg.create("nope", None).is_err());
        assert!(reg.create("exact", None).is_err());
    }

    #[test]
    fn headline_paths_small() {
        let reg = CostModelRegistry::default();
        let worst = reg.create("worst_case", None).unwrap();
        let row = analyze(3, 3, 2, worst.as_ref()).unwrap();
        assert_eq!(row.step1_layered, Cost::quarters(9 * 8 * 5));
        assert!(row.step1_exact <= row.step1_layered);

        let well = reg.create("well_conditioned", None).unwrap();
        let row = analyze(4, 4, 1, well.as_ref()).unwrap();
        assert_eq!(row.critical_path, Cost::units(10));
        assert_eq!(row.step1_exact, Cost::units(10));
    }

    #[test]
    fn single_block_has_no_parallelism() {
        let reg = CostModelRegistry::default();
        let well = reg.create("well_conditioned", None).unwrap();
        let row = analyze(1, 1, 5, well.as_ref()).unwrap();
        assert_eq!(row.avg_concurrency, 1.0);
    }

    #[test]
    fn zero_path_rejected() {
        assert!(avg_concurrency(Cost::units(3), Cost::ZERO).is_err());
        assert_eq!(avg_concurrency(Cost::units(3), Cost::units(2)).unwrap(), 1.5);
    }
}
