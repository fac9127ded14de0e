//! Seeded instance builders shared by the integration suites.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use splitqp::probgen::{GenSpec, ProblemClass};
use splitqp::problem::ProblemData;
use splitqp::sparse::CscMatrix;

pub const INF: f64 = f64::INFINITY;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Dense row-major `rows x cols` with each entry nonzero with probability
/// `density`; every row gets at least one nonzero.
pub fn sparse_dense(r: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Vec<f64> {
    let mut a = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            if r.random::<f64>() < density {
                a[i * cols + j] = normal(r);
            }
        }
        if cols > 0 && (0..cols).all(|j| a[i * cols + j] == 0.0) {
            a[i * cols + r.random_range(0..cols)] = normal(r);
        }
    }
    a
}

/// Upper triangle of `B Bᵀ` for `B` of size `n x rank`, row-major dense.
pub fn psd_dense(r: &mut ChaCha8Rng, n: usize, rank: usize) -> Vec<f64> {
    let b: Vec<f64> = (0..n * rank).map(|_| if r.random::<f64>() < 0.6 { normal(r) } else { 0.0 }).collect();
    gram_upper(&b, n, rank)
}

fn gram_upper(b: &[f64], n: usize, rank: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            p[i * n + j] = (0..rank).map(|k| b[i * rank + k] * b[j * rank + k]).sum();
        }
    }
    p
}

pub fn csc(rows: usize, cols: usize, dense: &[f64]) -> CscMatrix {
    CscMatrix::from_dense(rows, cols, dense)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row(a: &[f64], n: usize, i: usize) -> &[f64] {
    &a[i * n..(i + 1) * n]
}

/// Quasi-definite KKT ingredients: PSD `P` (upper), arbitrary `A`, and a
/// `rho` vector spanning `[1e-6, 1e6]` in log scale.
pub struct KktCase {
    pub p: CscMatrix,
    pub a: CscMatrix,
    pub sigma: f64,
    pub rho: Vec<f64>,
}

pub fn kkt_case(seed: u64) -> KktCase {
    let mut r = rng(seed, 1);
    let n = r.random_range(1..=12);
    let m = r.random_range(0..=12);
    let rank = r.random_range(0..=n);
    let p = psd_dense(&mut r, n, rank);
    let density = r.random_range(0.1..0.8);
    let a = sparse_dense(&mut r, m, n, density);
    let rho = (0..m).map(|_| 10f64.powf(r.random_range(-6.0..=6.0))).collect();
    KktCase { p: csc(n, n, &p), a: csc(m, n, &a), sigma: 1e-6, rho }
}

/// Feasible problem pieces around a known point `x0`.
struct Builder {
    n: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    rows: Vec<Vec<f64>>,
    l: Vec<f64>,
    u: Vec<f64>,
}

impl Builder {
    fn push(&mut self, a: Vec<f64>, l: f64, u: f64) {
        self.rows.push(a);
        self.l.push(l);
        self.u.push(u);
    }

    fn build(self, r: &mut ChaCha8Rng) -> ProblemData {
        // shuffle rows so the conflicting ones are not always last
        let m = self.rows.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(r);
        let a: Vec<f64> = order.iter().flat_map(|&i| self.rows[i].clone()).collect();
        let l = order.iter().map(|&i| self.l[i]).collect();
        let u = order.iter().map(|&i| self.u[i]).collect();
        ProblemData::new(csc(self.n, self.n, &self.p), self.q, csc(m, self.n, &a), l, u).expect("valid data")
    }
}

/// Rows with two-sided bounds around `A x0`.
fn boxed_rows(r: &mut ChaCha8Rng, n: usize, m: usize, with_cost: bool) -> (Builder, Vec<f64>) {
    let x0: Vec<f64> = (0..n).map(|_| normal(r)).collect();
    let a = sparse_dense(r, m, n, 0.6);
    let rank = if with_cost { r.random_range(1..=n) } else { 0 };
    let mut b = Builder {
        n,
        p: psd_dense(r, n, rank),
        q: (0..n).map(|_| normal(r)).collect(),
        rows: Vec::new(),
        l: Vec::new(),
        u: Vec::new(),
    };
    for i in 0..m {
        let ai = row(&a, n, i).to_vec();
        let v = dot(&ai, &x0);
        let lo = v - r.random_range(0.1..1.0);
        let hi = v + r.random_range(0.1..1.0);
        b.push(ai, lo, hi);
    }
    (b, x0)
}

/// Primal infeasible by construction. Patterns, selected by `seed % 3`:
/// a row repeated (up to a factor) with a disjoint interval, a linear
/// combination of boxed rows bounded away from its attainable range, and a
/// unit box contradicted by a sum constraint.
pub fn primal_infeasible(seed: u64) -> ProblemData {
    let mut r = rng(seed, 2);
    let n = r.random_range(2..=8);
    let m = r.random_range(n..=2 * n);
    let with_cost = r.random::<bool>();
    let (mut b, _) = boxed_rows(&mut r, n, m, with_cost);
    match seed % 3 {
        0 => {
            let i = r.random_range(0..m);
            let c = r.random_range(0.5..2.0) * if r.random::<bool>() { 1.0 } else { -1.0 };
            let ai: Vec<f64> = b.rows[i].iter().map(|v| c * v).collect();
            // c·[l_i, u_i] mapped, then pushed past its far end
            let (lo, hi) = if c > 0.0 { (c * b.l[i], c * b.u[i]) } else { (c * b.u[i], c * b.l[i]) };
            let gap = r.random_range(0.2..2.0);
            if r.random::<bool>() {
                b.push(ai, hi + gap, hi + gap + r.random_range(0.0..1.0));
            } else {
                b.push(ai, -INF, lo - gap);
            }
        }
        1 => {
            let k = r.random_range(2..=m.min(4));
            let mut picked: Vec<usize> = (0..m).collect();
            picked.shuffle(&mut r);
            let mut combo = vec![0.0; n];
            let mut hi = 0.0;
            for &j in &picked[..k] {
                let c = normal(&mut r);
                for (t, v) in combo.iter_mut().zip(&b.rows[j]) {
                    *t += c * v;
                }
                hi += (c * b.l[j]).max(c * b.u[j]);
            }
            let gap = r.random_range(0.2..2.0);
            b.push(combo, hi + gap, INF);
        }
        _ => {
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                b.push(e, 0.0, 1.0);
            }
            b.push(vec![1.0; n], n as f64 + r.random_range(0.5..2.0), INF);
        }
    }
    b.build(&mut r)
}

/// Feasible and dual infeasible by construction: a direction `d` with
/// `P d = 0`, `qᵀd < 0`, and `A d` in the recession cone of the bounds.
pub fn dual_infeasible(seed: u64) -> ProblemData {
    let mut r = rng(seed, 3);
    let n = r.random_range(2..=8);
    let m = r.random_range(1..=2 * n);
    let d: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let dd = dot(&d, &d);
    let project = |v: &mut [f64]| {
        let s = dot(v, &d) / dd;
        for (vi, di) in v.iter_mut().zip(&d) {
            *vi -= s * di;
        }
    };

    // P = B Bᵀ with the columns of B orthogonal to d; LPs for odd seeds
    let rank = if seed % 2 == 1 { 0 } else { r.random_range(1..n) };
    let mut bt: Vec<Vec<f64>> = (0..rank).map(|_| (0..n).map(|_| normal(&mut r)).collect()).collect();
    for col in &mut bt {
        project(col);
    }
    let b: Vec<f64> = (0..n).flat_map(|i| bt.iter().map(move |c| c[i]).collect::<Vec<_>>()).collect();
    let p = gram_upper(&b, n, rank);

    let mut q: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let shift = (dot(&q, &d) + r.random_range(0.2..2.0) * dd.sqrt()) / dd;
    for (qi, di) in q.iter_mut().zip(&d) {
        *qi -= shift * di;
    }

    let x0: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let mut builder = Builder { n, p, q, rows: Vec::new(), l: Vec::new(), u: Vec::new() };
    for _ in 0..m {
        let mut a: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let kind = r.random_range(0..3);
        if kind == 0 {
            project(&mut a);
        }
        let v = dot(&a, &x0);
        let ad = dot(&a, &d);
        let (lo, hi) = (v - r.random_range(0.1..1.0), v + r.random_range(0.1..1.0));
        match kind {
            0 => builder.push(a, lo, hi),
            _ if ad > 0.0 => builder.push(a, lo, INF),
            _ => builder.push(a, -INF, hi),
        }
    }
    builder.build(&mut r)
}

/// Mixed small instances: every generator class plus both infeasible kinds.
pub fn fuzz_problem(seed: u64) -> ProblemData {
    match seed % 9 {
        7 => primal_infeasible(seed),
        8 => dual_infeasible(seed),
        k => {
            let class = ProblemClass::ALL[k as usize];
            GenSpec::new(class, 1 + (seed / 9 % 3) as usize, seed).generate().expect("generator")
        }
    }
}
