//! Dependency-driven task execution on a fixed worker pool.
//!
//! A [`TaskGraph`] holds task nodes that read and write named package slots.
//! Edges are implied by slot keys: a node depends on the producer of each of
//! its input slots. Slots without a producer are ready from the start and may
//! carry no payload at all. Each slot has at most one writer.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::{self, Debug};
use std::hash::Hash;
use std::io::Write;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

/// Sizes payloads for the live-memory accounting.
pub trait Payload: Send + Sync {
    fn byte_size(&self) -> usize;
}

/// Block coordinates attached to a task for tracing; unused axes are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Coords {
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub k: Option<usize>,
}

impl Coords {
    pub fn new(i: Option<usize>, j: Option<usize>, k: Option<usize>) -> Self {
        Coords { i, j, k }
    }
}

impl fmt::Display for Coords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
        write!(f, "({},{},{})", show(self.i), show(self.j), show(self.k))
    }
}

/// Unit of scheduled work. Inputs arrive in declared order; `None` marks an
/// input slot that is ready but carries no payload. Outputs must be returned
/// in declared order.
pub trait Task<P>: Send + Sync {
    fn kind(&self) -> &'static str;
    fn coords(&self) -> Coords;
    fn run(&self, inputs: &[Option<Arc<P>>]) -> Result<Vec<P>>;
    /// Optional rank annotation `(r, r')` derived from the outputs.
    fn note(&self, _outputs: &[P]) -> Option<(usize, usize)> {
        None
    }
}

struct Node<P> {
    task: Box<dyn Task<P>>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    priority: i64,
}

/// Plan of tasks over slots keyed by `K` carrying payloads `P`. Keys are
/// interned to dense slot ids as nodes are added.
pub struct TaskGraph<K, P> {
    nodes: Vec<Node<P>>,
    keys: Vec<K>,
    index: FxHashMap<K, usize>,
    producer: Vec<Option<usize>>,
    pinned: Vec<bool>,
}

impl<K, P> Default for TaskGraph<K, P> {
    fn default() -> Self {
        TaskGraph { nodes: Vec::new(), keys: Vec::new(), index: FxHashMap::default(), producer: Vec::new(), pinned: Vec::new() }
    }
}

/// One executed task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    /// Index of the node in its graph, in insertion order.
    pub node: usize,
    pub kind: &'static str,
    pub coords: Coords,
    pub worker: usize,
    pub start_ns: u64,
    pub end_ns: u64,
    /// Live payload bytes right after the task published its outputs.
    pub live_bytes: usize,
    pub note: Option<(usize, usize)>,
}

impl TraceRecord {
    pub const CSV_HEADER: &'static str = "task_kind,i,j,k,worker,start_ns,end_ns,live_bytes";

    pub fn csv_line(&self) -> String {
        let show = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{}",
            self.kind,
            show(self.coords.i),
            show(self.coords.j),
            show(self.coords.k),
            self.worker,
            self.start_ns,
            self.end_ns,
            self.live_bytes
        )
    }
}

/// Write records as CSV with a header line.
pub fn write_trace_csv(out: &mut impl Write, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", TraceRecord::CSV_HEADER)?;
    for t in trace {
        writeln!(out, "{}", t.csv_line())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub workers: usize,
    /// Keep every payload instead of releasing consumed ones.
    pub retain_all: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { workers: 1, retain_all: false }
    }
}

pub struct RunReport<K, P> {
    /// Pinned slots, or every slot when `retain_all` was set.
    pub outputs: HashMap<K, Arc<P>>,
    /// Records in completion order.
    pub trace: Vec<TraceRecord>,
    pub peak_live_bytes: usize,
    pub makespan_ns: u64,
    pub executed: usize,
}

struct Slot<P> {
    payload: Option<Arc<P>>,
    consumers_left: usize,
}

struct State<P> {
    slots: Vec<Slot<P>>,
    waiting_on: Vec<usize>,
    ready: BinaryHeap<Reverse<(i64, usize)>>,
    running: usize,
    idle: usize,
    done: usize,
    live: usize,
    peak: usize,
    trace: Vec<TraceRecord>,
    failure: Option<Error>,
}

impl<K, P> TaskGraph<K, P>
where
    K: Clone + Eq + Hash + Debug + Send + Sync,
    P: Payload,
{
    pub fn new() -> Self {
        Self::default()
    }

    fn slot_id(&mut self, key: K) -> usize {
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.keys.len();
        self.index.insert(key.clone(), id);
        self.keys.push(key);
        self.producer.push(None);
        self.pinned.push(false);
        id
    }

    /// Register a node. Fails if one of its output slots already has a writer.
    pub fn add(&mut self, task: Box<dyn Task<P>>, inputs: Vec<K>, outputs: Vec<K>, priority: i64) -> Result<usize> {
        let id = self.nodes.len();
        let outs: Vec<usize> = outputs.into_iter().map(|k| self.slot_id(k)).collect();
        for (n, &o) in outs.iter().enumerate() {
            if self.producer[o].is_some() || outs[..n].contains(&o) {
                return Err(Error::Plan(format!("slot {:?} already has a writer ({} {})", self.keys[o], task.kind(), task.coords())));
            }
        }
        for &o in &outs {
            self.producer[o] = Some(id);
        }
        let ins = inputs.into_iter().map(|k| self.slot_id(k)).collect();
        self.nodes.push(Node { task, inputs: ins, outputs: outs, priority });
        Ok(id)
    }

    /// Keep this slot's payload and return it from [`TaskGraph::run`].
    pub fn pin(&mut self, key: K) {
        let id = self.slot_id(key);
        self.pinned[id] = true;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of nodes of each kind.
    pub fn kind_counts(&self) -> HashMap<&'static str, usize> {
        let mut out = HashMap::new();
        for n in &self.nodes {
            *out.entry(n.task.kind()).or_insert(0) += 1;
        }
        out
    }

    /// Producers of each node's inputs, deduplicated.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .map(|n| {
                let mut p: Vec<usize> = n.inputs.iter().filter_map(|&k| self.producer[k]).collect();
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect()
    }

    /// Kahn's algorithm; returns a topological order or a cycle error.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let preds = self.predecessors();
        let mut succs = vec![Vec::new(); self.nodes.len()];
        let mut indeg = vec![0usize; self.nodes.len()];
        for (v, ps) in preds.iter().enumerate() {
            indeg[v] = ps.len();
            for &u in ps {
                succs[u].push(v);
            }
        }
        let mut queue: Vec<usize> = (0..self.nodes.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(u) = queue.pop() {
            order.push(u);
            for &v in &succs[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = (0..self.nodes.len()).find(|&v| indeg[v] > 0).unwrap();
            let n = &self.nodes[stuck].task;
            return Err(Error::Plan(format!("dependency cycle through {} {}", n.kind(), n.coords())));
        }
        Ok(order)
    }

    /// Execute every node once. `initial` supplies payloads for slots that no
    /// node writes; such slots missing from `initial` are ready but empty.
    /// Initial payloads for keys the graph never mentions are dropped.
    pub fn run(self, initial: HashMap<K, P>, opts: RunOptions) -> Result<RunReport<K, P>> {
        self.topological_order()?;
        let workers = opts.workers.max(1);
        let preds = self.predecessors();
        let mut succs = vec![Vec::new(); self.nodes.len()];
        for (v, ps) in preds.iter().enumerate() {
            for &u in ps {
                succs[u].push(v);
            }
        }

        let mut consumers = vec![0usize; self.keys.len()];
        for n in &self.nodes {
            for &k in &n.inputs {
                consumers[k] += 1;
            }
        }
        let mut slots: Vec<Slot<P>> = consumers.iter().map(|&c| Slot { payload: None, consumers_left: c }).collect();
        let mut live = 0;
        for (key, payload) in initial {
            let Some(&id) = self.index.get(&key) else { continue };
            if self.producer[id].is_some() {
                return Err(Error::Plan(format!("initial payload for produced slot {key:?}")));
            }
            if consumers[id] > 0 || opts.retain_all || self.pinned[id] {
                live += payload.byte_size();
                slots[id].payload = Some(Arc::new(payload));
            }
        }

        let mut ready = BinaryHeap::new();
        let waiting_on: Vec<usize> = preds.iter().map(Vec::len).collect();
        for (v, &w) in waiting_on.iter().enumerate() {
            if w == 0 {
                ready.push(Reverse((self.nodes[v].priority, v)));
            }
        }
        let state = Mutex::new(State {
            slots,
            waiting_on,
            ready,
            running: 0,
            idle: 0,
            done: 0,
            live,
            peak: live,
            trace: Vec::with_capacity(self.nodes.len()),
            failure: None,
        });
        let wake = Condvar::new();
        let total = self.nodes.len();
        let start = Instant::now();

        std::thread::scope(|scope| {
            for worker in 0..workers {
                let ctx = Ctx { state: &state, wake: &wake, nodes: &self.nodes, succs: &succs, pinned: &self.pinned, retain_all: opts.retain_all, total, start };
                scope.spawn(move || worker_loop(worker, ctx));
            }
        });

        let makespan_ns = start.elapsed().as_nanos() as u64;
        let st = state.into_inner().expect("worker panicked while holding the scheduler lock");
        if let Some(err) = st.failure {
            return Err(err);
        }
        let outputs = st
            .slots
            .into_iter()
            .enumerate()
            .filter(|(id, _)| opts.retain_all || self.pinned[*id])
            .filter_map(|(id, s)| s.payload.map(|p| (self.keys[id].clone(), p)))
            .collect();
        Ok(RunReport { outputs, trace: st.trace, peak_live_bytes: st.peak, makespan_ns, executed: st.done })
    }
}

struct Ctx<'a, P> {
    state: &'a Mutex<State<P>>,
    wake: &'a Condvar,
    nodes: &'a [Node<P>],
    succs: &'a [Vec<usize>],
    pinned: &'a [bool],
    retain_all: bool,
    total: usize,
    start: Instant,
}

fn worker_loop<P: Payload>(worker: usize, cx: Ctx<'_, P>) {
    let Ctx { state, wake, nodes, succs, pinned, retain_all, total, start } = cx;
    loop {
        let (v, inputs) = {
            let mut st = state.lock().unwrap();
            loop {
                if st.failure.is_some() || st.done == total {
                    return;
                }
                if let Some(Reverse((_, v))) = st.ready.pop() {
                    st.running += 1;
                    let inputs: Vec<Option<Arc<P>>> = nodes[v].inputs.iter().map(|&k| st.slots[k].payload.clone()).collect();
                    break (v, inputs);
                }
                if st.running == 0 {
                    // nothing runnable and nothing in flight: the graph cannot finish
                    st.failure = Some(Error::Plan("scheduler stalled with unfinished tasks".into()));
                    wake.notify_all();
                    return;
                }
                st.idle += 1;
                st = wake.wait(st).unwrap();
                st.idle -= 1;
            }
        };

        let node = &nodes[v];
        let t0 = start.elapsed().as_nanos() as u64;
        let result = node.task.run(&inputs);
        let t1 = start.elapsed().as_nanos() as u64;
        drop(inputs);

        let mut st = state.lock().unwrap();
        st.running -= 1;
        let fail = |e: Error| Error::Task { task: format!("{} {}", node.task.kind(), node.task.coords()), source: Box::new(e) };
        let outputs = match result {
            Ok(o) if o.len() == node.outputs.len() => o,
            Ok(o) => {
                st.failure = Some(fail(Error::Plan(format!("returned {} outputs, declared {}", o.len(), node.outputs.len()))));
                wake.notify_all();
                return;
            }
            Err(e) => {
                st.failure = Some(fail(e));
                wake.notify_all();
                return;
            }
        };
        let note = node.task.note(&outputs);
        for (&key, payload) in node.outputs.iter().zip(outputs) {
            let keep = st.slots[key].consumers_left > 0 || retain_all || pinned[key];
            if keep {
                st.live += payload.byte_size();
                st.slots[key].payload = Some(Arc::new(payload));
            }
        }
        for &key in &node.inputs {
            let slot = &mut st.slots[key];
            slot.consumers_left -= 1;
            let released = if slot.consumers_left == 0 && !retain_all && !pinned[key] { slot.payload.take() } else { None };
            if let Some(p) = released {
                st.live -= p.byte_size();
            }
        }
        st.peak = st.peak.max(st.live);
        let live_bytes = st.live;
        st.trace.push(TraceRecord { node: v, kind: node.task.kind(), coords: node.task.coords(), worker, start_ns: t0, end_ns: t1, live_bytes, note });
        st.done += 1;
        for &s in &succs[v] {
            st.waiting_on[s] -= 1;
            if st.waiting_on[s] == 0 {
                let prio = nodes[s].priority;
                st.ready.push(Reverse((prio, s)));
            }
        }
        if st.idle > 0 {
            wake.notify_all();
        }
    }
}
