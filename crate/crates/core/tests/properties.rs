use std::collections::HashMap;
use std::sync::Arc;

use blockech::analysis::{check_cost_bounds, CostedGraph, Measured};
use blockech::chief::{self, ChiefOptions, ChopSpec};
use blockech::ech::{DirectGauss, EchKernel, Recursive};
use blockech::io::{read_matrix, write_matrix};
use blockech::jobs::{crz, rex, rrf, un0, unh};
use blockech::scheduler::{Coords, Payload, RunOptions, Task, TaskGraph};
use blockech::tasks::{clear_down, update_row};
use blockech::{gen, echelonize, oracle_rref, verify, BitString, Field, FieldElem, IndexSet, Matrix};
use proptest::prelude::*;

const ORDERS: [u32; 9] = [2, 3, 5, 193, 4, 8, 9, 25, 1331];

fn field() -> impl Strategy<Value = Field> {
    prop::sample::select(&ORDERS[..]).prop_map(|q| Field::of_order(q).unwrap())
}

fn index_set(universe: usize) -> impl Strategy<Value = IndexSet> {
    prop::collection::vec(any::<bool>(), universe)
        .prop_map(move |bits| IndexSet::new(universe, (0..universe).filter(|&i| bits[i]).collect()).unwrap())
}

fn bits_of(set: &IndexSet) -> BitString {
    BitString::new((0..set.universe()).map(|i| set.contains(i)).collect())
}

fn opts(block: usize, threads: usize, with_transform: bool) -> ChiefOptions {
    ChiefOptions { block, threads, with_transform, ..ChiefOptions::default() }
}

/// Rank-deficient or full random matrix, chosen by `kind`.
fn sample(f: &Field, m: usize, n: usize, kind: u8, seed: u64) -> Matrix {
    match kind % 3 {
        0 => gen::random(f, m, n, seed),
        1 => gen::product(f, m, n, m.min(n) / 2, seed),
        _ => gen::product(f, m, n, 1.min(m.min(n)), seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_axioms(f in field(), x in any::<u32>(), y in any::<u32>(), z in any::<u32>()) {
        let q = f.order();
        let (x, y, z) = (FieldElem(x % q), FieldElem(y % q), FieldElem(z % q));
        prop_assert_eq!(f.add(x, y), f.add(y, x));
        prop_assert_eq!(f.mul(x, y), f.mul(y, x));
        prop_assert_eq!(f.add(f.add(x, y), z), f.add(x, f.add(y, z)));
        prop_assert_eq!(f.mul(f.mul(x, y), z), f.mul(x, f.mul(y, z)));
        prop_assert_eq!(f.mul(x, f.add(y, z)), f.add(f.mul(x, y), f.mul(x, z)));
        prop_assert_eq!(f.add(x, f.neg(x)), f.zero());
        prop_assert_eq!(f.sub(x, y), f.add(x, f.neg(y)));
        prop_assert_eq!(f.mul(x, f.one()), x);
        if x == f.zero() {
            prop_assert!(f.inv(x).is_err());
        } else {
            prop_assert_eq!(f.mul(x, f.inv(x).unwrap()), f.one());
        }
    }

    #[test]
    fn permutation_is_bijection(set in (0usize..40).prop_flat_map(index_set)) {
        let p = set.permutation();
        let mut sorted = p.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..set.universe()).collect::<Vec<_>>());
        prop_assert_eq!(&p[..set.len()], set.members());
        let rest = set.complement();
        prop_assert_eq!(&p[set.len()..], rest.members());
    }

    #[test]
    fn extract_then_riffle_is_identity(f in field(), n in 0usize..6, rows in 0usize..12, seed in any::<u64>(), mask in any::<u64>()) {
        let h = gen::random(&f, rows, n, seed);
        let rho = IndexSet::new(rows, (0..rows).filter(|i| mask >> i & 1 == 1).collect()).unwrap();
        let (picked, rest) = rex(&h, &rho).unwrap();
        prop_assert_eq!(picked.rows(), rho.len());
        prop_assert_eq!(rrf(&bits_of(&rho), &rest, &picked).unwrap(), h);
    }

    #[test]
    fn kernels_satisfy_identity_and_agree(f in field(), m in 0usize..24, n in 0usize..24, kind in any::<u8>(), seed in any::<u64>(), t in 1usize..6) {
        let h = sample(&f, m, n, kind, seed);
        let direct = DirectGauss.ech(&h);
        let rec = Recursive { threshold: t }.ech(&h);
        prop_assert!(direct.satisfies_identity(&h));
        prop_assert!(rec.satisfies_identity(&h));
        prop_assert_eq!(&direct.gamma, &rec.gamma);
        prop_assert_eq!(&direct.r, &rec.r);
        prop_assert_eq!(direct.rank(), oracle_rref(&h).rank());
    }

    #[test]
    fn union_with_history(u in 0usize..30, seed in any::<u64>()) {
        let all = seed;
        let rho1 = IndexSet::new(u, (0..u).filter(|i| all >> i & 1 == 1).collect()).unwrap();
        let rest = rho1.complement();
        let rho2 = IndexSet::new(rest.len(), (0..rest.len()).filter(|i| (all >> 32) >> (i % 32) & 1 == 1).collect()).unwrap();
        let (union, hist) = unh(&rho1, &rho2).unwrap();
        prop_assert_eq!(union.len(), rho1.len() + rho2.len());
        prop_assert_eq!(hist.count_ones(), rho2.len());
        for (pos, &x) in union.members().iter().enumerate() {
            prop_assert_eq!(hist.get(pos), !rho1.contains(x));
        }
        let (u0, h0) = un0(&rho2);
        let (u1, h1) = unh(&IndexSet::empty(rho2.universe()), &rho2).unwrap();
        prop_assert_eq!((u0, h0), (u1, h1));
    }

    #[test]
    fn riffled_zero_columns_compress_back(f in field(), rows in 0usize..6, lambda in prop::collection::vec(any::<bool>(), 0..16), seed in any::<u64>()) {
        let lambda = BitString::new(lambda);
        let m = gen::random(&f, rows, lambda.count_ones(), seed);
        let out = crz(&m, &lambda).unwrap();
        let t = out.transpose();
        let mt = m.transpose();
        for (c, &p) in lambda.ones_positions().iter().enumerate() {
            prop_assert_eq!(t.row(p), mt.row(c));
        }
        for p in lambda.zeros_positions() {
            prop_assert!(t.row(p).iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn clear_down_ranks_add_up(f in field(), alpha in 1usize..10, beta in 1usize..10, k0 in any::<u8>(), k1 in any::<u8>(), seed in any::<u64>()) {
        let kern = DirectGauss;
        let c0 = sample(&f, alpha, beta, k0, seed);
        let c1 = sample(&f, alpha, beta, k1, seed ^ 0x55);
        let (d0, a0) = clear_down(&kern, &c0, None, 0).unwrap();
        let (d1, a1) = clear_down(&kern, &c1, Some(&d0), 1).unwrap();
        prop_assert_eq!(d0.gamma.len(), oracle_rref(&c0).rank());
        prop_assert_eq!(a0.rho_prime.len(), d0.gamma.len());
        prop_assert_eq!(d1.gamma.len(), d0.gamma.len() + a1.rho_prime.len());
        prop_assert_eq!(d1.gamma.len(), oracle_rref(&c0.vstack(&c1).unwrap()).rank());
    }

    #[test]
    fn update_row_passes_through_when_nothing_new(f in field(), alpha in 1usize..8, seed in any::<u64>()) {
        let kern = DirectGauss;
        let c00 = gen::random(&f, alpha, alpha, seed);
        let c01 = gen::random(&f, alpha, alpha, seed + 1);
        let c11 = gen::random(&f, alpha, alpha, seed + 2);
        let (d0, a0) = clear_down(&kern, &c00, None, 0).unwrap();
        let (_, b0) = update_row(&a0, &c01, None, 0).unwrap();
        let (_, a1) = clear_down(&kern, &Matrix::zeros(&f, alpha, alpha), Some(&d0), 1).unwrap();
        prop_assert!(a1.rho_prime.is_empty());
        let (c_new, b_new) = update_row(&a1, &c11, Some(&b0), 1).unwrap();
        prop_assert_eq!(b_new, b0);
        prop_assert_eq!(c_new.rows(), alpha);
    }

    #[test]
    fn gfmat_round_trip(f in field(), m in 0usize..9, n in 0usize..9, seed in any::<u64>()) {
        let c = gen::random(&f, m, n, seed);
        prop_assert_eq!(read_matrix(&write_matrix(&c)).unwrap(), c);
    }

    #[test]
    fn cost_bounds_hold(max_alpha in 1usize..24) {
        prop_assert_eq!(check_cost_bounds(max_alpha), None);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_and_independence(f in field(), m in 0usize..30, n in 0usize..30, kind in any::<u8>(), seed in any::<u64>(), block in 1usize..9) {
        let c = sample(&f, m, n, kind, seed);
        let base = echelonize(&c, &opts(block, 1, true)).unwrap().output;
        let report = verify(&c, &base);
        prop_assert!(report.ok, "{:?}", report.detail);
        prop_assert_eq!(base.rank(), oracle_rref(&c).rank());

        let threaded = echelonize(&c, &opts(block, 4, true)).unwrap().output;
        prop_assert_eq!(&threaded, &base);

        let plain = echelonize(&c, &opts(block, 3, false)).unwrap().output;
        prop_assert_eq!(plain.assembled_r(), base.assembled_r());
        prop_assert_eq!(&plain.varrho, &base.varrho);
        prop_assert_eq!(&plain.upsilon, &base.upsilon);

        let other = echelonize(&c, &opts(block + 3, 2, true)).unwrap().output;
        prop_assert_eq!(other.assembled_r(), base.assembled_r());
        prop_assert_eq!(other.global_varrho(), base.global_varrho());
        prop_assert_eq!(other.global_upsilon(), base.global_upsilon());

        let tapered = echelonize(&c, &ChiefOptions { taper: true, ..opts(block, 2, true) }).unwrap().output;
        prop_assert!(verify(&c, &tapered).ok);
        prop_assert_eq!(tapered.assembled_r(), base.assembled_r());
    }

    #[test]
    fn prefix_ranks(f in field(), m in 1usize..30, n in 1usize..20, kind in any::<u8>(), seed in any::<u64>(), block in 1usize..7) {
        let c = sample(&f, m, n, kind, seed);
        let out = echelonize(&c, &opts(block, 2, false)).unwrap().output;
        let mut rows = 0;
        let mut selected = 0;
        for (i, &h) in out.chop.rows.iter().enumerate() {
            rows += h;
            selected += out.varrho[i].len();
            prop_assert_eq!(selected, oracle_rref(&c.block(0, 0, rows, n)).rank());
        }
    }

    #[test]
    fn corrupted_remnant_is_rejected(f in field(), m in 2usize..20, n in 3usize..20, seed in any::<u64>(), pick in any::<usize>(), bump in 1u32..1000) {
        let c = gen::product(&f, m, n, m.min(n) - 1, seed);
        let mut out = echelonize(&c, &opts(4, 2, true)).unwrap().output;
        let spots: Vec<(usize, usize)> = out.r_blocks.iter().enumerate()
            .flat_map(|(j, row)| row.iter().enumerate().filter(|(_, b)| !b.is_empty()).map(move |(l, _)| (j, l)))
            .collect();
        prop_assume!(!spots.is_empty());
        let (j, l) = spots[pick % spots.len()];
        let blk = &out.r_blocks[j][l];
        let (r, col) = ((pick / 7) % blk.rows(), (pick / 131) % blk.cols());
        let q = f.order();
        let old = blk.get(r, col).0;
        let new = FieldElem((old + 1 + bump % (q - 1)) % q);
        out.r_blocks[j][l] = blk.with_entry(r, col, new).unwrap();
        prop_assert!(!verify(&c, &out).ok);
    }

    #[test]
    fn measured_path_fits_makespan(f in field(), size in 1usize..40, block in 2usize..9, threads in 1usize..4, seed in any::<u64>()) {
        let c = gen::random(&f, size, size, seed);
        let run = echelonize(&c, &opts(block, threads, true)).unwrap();
        let chop = &run.output.chop;
        let model = Measured::from_trace(&run.trace);
        let g = CostedGraph::chief(chop.a(), chop.b(), block, true, &model).unwrap();
        let cp = g.critical_path(|_| true).unwrap().as_f64();
        let total = g.total(|_| true).as_f64();
        let makespan = run.makespan_ns as f64;
        prop_assert!(cp <= makespan, "critical path {cp} > makespan {makespan}");
        prop_assert!(makespan >= total / threads as f64, "makespan {makespan} < {total}/{threads}");
    }
}

#[derive(Debug)]
struct Num(u64);

impl Payload for Num {
    fn byte_size(&self) -> usize {
        8
    }
}

struct Fold {
    id: usize,
}

impl Task<Num> for Fold {
    fn kind(&self) -> &'static str {
        "Fold"
    }

    fn coords(&self) -> Coords {
        Coords::new(Some(self.id), None, None)
    }

    fn run(&self, inputs: &[Option<Arc<Num>>]) -> blockech::Result<Vec<Num>> {
        let s = inputs.iter().flatten().fold(self.id as u64, |acc, x| acc.wrapping_mul(31).wrapping_add(x.0));
        Ok(vec![Num(s)])
    }
}

fn random_dag(n: usize, edges: &[u64]) -> (TaskGraph<usize, Num>, HashMap<usize, u64>) {
    let mut g = TaskGraph::new();
    let mut expect: HashMap<usize, u64> = HashMap::new();
    for v in 0..n {
        let mask = edges[v % edges.len()];
        let inputs: Vec<usize> = (0..v).filter(|u| mask >> (u % 64) & 1 == 1).collect();
        let s = inputs.iter().fold(v as u64, |acc, u| acc.wrapping_mul(31).wrapping_add(expect[u]));
        expect.insert(v, s);
        g.add(Box::new(Fold { id: v }), inputs, vec![v], (mask % 7) as i64).unwrap();
        g.pin(v);
    }
    (g, expect)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scheduler_runs_every_task_deterministically(n in 1usize..60, edges in prop::collection::vec(any::<u64>(), 1..8), workers in 1usize..6) {
        let (g, expect) = random_dag(n, &edges);
        prop_assert!(g.topological_order().is_ok());
        let report = g.run(HashMap::new(), RunOptions { workers, retain_all: false }).unwrap();
        prop_assert_eq!(report.executed, n);
        prop_assert_eq!(report.trace.len(), n);
        for (k, v) in &expect {
            prop_assert_eq!(report.outputs[k].0, *v);
        }
    }
}

#[test]
fn tapered_chop_sums_to_shape() {
    for m in 0..40 {
        for block in 1..10 {
            let t = ChopSpec::tapered(m, m + 1, block).unwrap();
            assert_eq!(t.rows.iter().sum::<usize>(), m);
            assert_eq!(t.cols.iter().sum::<usize>(), m + 1);
            assert!(t.rows.iter().all(|&x| x > 0 && x <= block));
        }
    }
    assert_eq!(chief::chop(10, 10, 4).unwrap(), ChopSpec::uniform(10, 10, 4).unwrap());
}
