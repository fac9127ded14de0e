//! The seven benchmark problem classes.
//!
//! Every public generator takes the class's leading dimension and a seed;
//! the `*_with` variants expose the secondary dimensions so that small
//! instances can be built for the dense reference solver.

use nalgebra::DMatrix;

use super::dare::solve_dare;
use super::rng::{normal, normal_vec, sparse_pattern, stream, uniform, uniform_vec, Stream};
use super::GenError;
use crate::problem::ProblemData;
use crate::sparse::CscMatrix;
use crate::vector::inf_norm;

const INF: f64 = f64::INFINITY;

#[derive(Debug, Default)]
struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Triplets {
    fn push(&mut self, row: usize, col: usize, val: f64) {
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    fn build(&self, nrows: usize, ncols: usize) -> Result<CscMatrix, GenError> {
        Ok(CscMatrix::from_triplets(nrows, ncols, &self.rows, &self.cols, &self.vals, true)?)
    }
}

/// `percent`% dense block of normals, entries `(row, col, value)`.
fn sparse_normal(
    rng: &mut Stream,
    nrows: usize,
    ncols: usize,
    percent: usize,
    mean: f64,
    sd: f64,
) -> Vec<(usize, usize, f64)> {
    sparse_pattern(rng, nrows, ncols, percent)
        .into_iter()
        .map(|(r, c)| (r, c, normal(rng, mean, sd)))
        .collect()
}

fn csc(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<CscMatrix, GenError> {
    let mut t = Triplets::default();
    for &(r, c, v) in entries {
        t.push(r, c, v);
    }
    t.build(nrows, ncols)
}

fn min_dim(class: &'static str, dim: usize, min: usize) -> Result<(), GenError> {
    if dim < min {
        Err(GenError::Dimension { class, dim, min })
    } else {
        Ok(())
    }
}

/// Upper triangle of `MMᵀ + 1e-2·I` with `M` n×n, 15% dense `N(0, 1)`.
fn gram_cost(n: usize, rng: &mut Stream) -> Result<CscMatrix, GenError> {
    let entries = sparse_normal(rng, n, n, 15, 0.0, 1.0);
    let mut t = Triplets::default();
    for i in 0..n {
        t.push(i, i, 1e-2);
    }
    // entries are column-major: each run of equal columns is one column of M
    let mut start = 0;
    while start < entries.len() {
        let col = entries[start].1;
        let end = start + entries[start..].iter().take_while(|e| e.1 == col).count();
        let column = &entries[start..end];
        for (a, &(ri, _, vi)) in column.iter().enumerate() {
            for &(rj, _, vj) in &column[a..] {
                t.push(ri.min(rj), ri.max(rj), vi * vj);
            }
        }
        start = end;
    }
    t.build(n, n)
}

pub fn random_qp(n: usize, seed: u64) -> Result<ProblemData, GenError> {
    min_dim("random_qp", n, 1)?;
    let m = 10 * n;
    let p = gram_cost(n, &mut stream(seed, 1))?;
    let a = csc(m, n, &sparse_normal(&mut stream(seed, 2), m, n, 15, 0.0, 1.0))?;
    let q = normal_vec(&mut stream(seed, 3), n, 0.0, 1.0);
    let u = uniform_vec(&mut stream(seed, 4), m, 0.0, 1.0);
    let l = uniform_vec(&mut stream(seed, 5), m, 0.0, 1.0).into_iter().map(|v| -v).collect();
    Ok(ProblemData::new(p, q, a, l, u)?)
}

pub fn eq_qp(n: usize, seed: u64) -> Result<ProblemData, GenError> {
    min_dim("eq_qp", n, 1)?;
    let m = n / 2;
    let p = gram_cost(n, &mut stream(seed, 1))?;
    let a = csc(m, n, &sparse_normal(&mut stream(seed, 2), m, n, 15, 0.0, 1.0))?;
    let q = normal_vec(&mut stream(seed, 3), n, 0.0, 1.0);
    let b = normal_vec(&mut stream(seed, 4), m, 0.0, 1.0);
    Ok(ProblemData::new(p, q, a, b.clone(), b)?)
}

/// Horizon of the optimal control class.
pub const CONTROL_HORIZON: usize = 10;

pub fn optimal_control(nx: usize, seed: u64) -> Result<ProblemData, GenError> {
    min_dim("optimal_control", nx, 1)?;
    optimal_control_with(nx, (nx / 2).max(1), CONTROL_HORIZON, seed)
}

/// Spectral radius of a square dense matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Dynamics and cost data of a control instance.
#[derive(Debug, Clone)]
pub struct ControlModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_terminal: DMatrix<f64>,
    pub x_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub x_init: Vec<f64>,
}

pub fn control_model(nx: usize, nu: usize, seed: u64) -> Result<ControlModel, GenError> {
    let mut rng = stream(seed, 1);
    let mut a = DMatrix::from_fn(nx, nx, |i, j| {
        let delta = normal(&mut rng, 0.0, 0.1);
        if i == j {
            1.0 + delta
        } else {
            delta
        }
    });
    let radius = spectral_radius(&a);
    if radius >= 1.0 {
        a *= 0.99 / radius;
    }
    let mut rng = stream(seed, 2);
    let b = DMatrix::from_fn(nx, nu, |_, _| normal(&mut rng, 0.0, 1.0));

    let mut rng = stream(seed, 3);
    let mut qdiag = vec![0.0; nx];
    for (i, _) in sparse_pattern(&mut rng, nx, 1, 70) {
        qdiag[i] = uniform(&mut rng, 0.0, 10.0);
    }
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(qdiag));
    let r = DMatrix::identity(nu, nu) * 0.1;
    let (q_terminal, _) = solve_dare(&a, &b, &q, &r, 1e-10, 100_000).ok_or(GenError::Riccati)?;

    let x_bar = uniform_vec(&mut stream(seed, 4), nx, 1.0, 2.0);
    let u_bar = uniform_vec(&mut stream(seed, 5), nu, 0.0, 0.1);
    let mut rng = stream(seed, 6);
    let x_init = x_bar.iter().map(|&xb| uniform(&mut rng, -0.5 * xb, 0.5 * xb)).collect();
    Ok(ControlModel { a, b, q, r, q_terminal, x_bar, u_bar, x_init })
}

/// Variables `(x₀..x_T, u₀..u_{T−1})`. Rows: `x₀ = x_init`, the dynamics
/// `x_{t+1} − A x_t − B u_t = 0`, then the boxes on every `x_t` and `u_t`.
pub fn optimal_control_with(nx: usize, nu: usize, horizon: usize, seed: u64) -> Result<ProblemData, GenError> {
    min_dim("optimal_control", nx, 1)?;
    min_dim("optimal_control", nu, 1)?;
    min_dim("optimal_control", horizon, 1)?;
    let model = control_model(nx, nu, seed)?;
    control_problem(&model, horizon)
}

pub fn control_problem(model: &ControlModel, horizon: usize) -> Result<ProblemData, GenError> {
    let (nx, nu, t_len) = (model.a.nrows(), model.b.ncols(), horizon);
    let n = nx * (t_len + 1) + nu * t_len;
    let xv = |t: usize, i: usize| t * nx + i;
    let uv = |t: usize, i: usize| nx * (t_len + 1) + t * nu + i;

    let mut p = Triplets::default();
    for t in 0..t_len {
        for i in 0..nx {
            let qi = model.q[(i, i)];
            if qi != 0.0 {
                p.push(xv(t, i), xv(t, i), 2.0 * qi);
            }
        }
    }
    for j in 0..nx {
        for i in 0..=j {
            let v = model.q_terminal[(i, j)];
            if v != 0.0 {
                p.push(xv(t_len, i), xv(t_len, j), 2.0 * v);
            }
        }
    }
    for t in 0..t_len {
        for i in 0..nu {
            p.push(uv(t, i), uv(t, i), 2.0 * model.r[(i, i)]);
        }
    }

    let mut a = Triplets::default();
    let (mut l, mut u) = (Vec::new(), Vec::new());
    for i in 0..nx {
        a.push(i, xv(0, i), 1.0);
        l.push(model.x_init[i]);
        u.push(model.x_init[i]);
    }
    for t in 0..t_len {
        for i in 0..nx {
            let row = l.len();
            a.push(row, xv(t + 1, i), 1.0);
            for j in 0..nx {
                a.push(row, xv(t, j), -model.a[(i, j)]);
            }
            for j in 0..nu {
                a.push(row, uv(t, j), -model.b[(i, j)]);
            }
            l.push(0.0);
            u.push(0.0);
        }
    }
    for t in 0..=t_len {
        for i in 0..nx {
            a.push(l.len(), xv(t, i), 1.0);
            l.push(-model.x_bar[i]);
            u.push(model.x_bar[i]);
        }
    }
    for t in 0..t_len {
        for i in 0..nu {
            a.push(l.len(), uv(t, i), 1.0);
            l.push(-model.u_bar[i]);
            u.push(model.u_bar[i]);
        }
    }
    let m = l.len();
    Ok(ProblemData::new(p.build(n, n)?, vec![0.0; n], a.build(m, n)?, l, u)?)
}

pub fn portfolio(k: usize, seed: u64) -> Result<ProblemData, GenError> {
    min_dim("portfolio", k, 1)?;
    portfolio_with(k, 100 * k, seed)
}

/// Variables `(x, y)` with `x` the `assets` weights and `y = Fᵀx` the `k`
/// factor exposures. Rows: `y − Fᵀx = 0`, `1ᵀx = 1`, `x ≥ 0`.
pub fn portfolio_with(k: usize, assets: usize, seed: u64) -> Result<ProblemData, GenError> {
    min_dim("portfolio", k, 1)?;
    min_dim("portfolio", assets, 1)?;
    let n = assets;
    let f = sparse_normal(&mut stream(seed, 1), n, k, 50, 0.0, 1.0);
    let d = uniform_vec(&mut stream(seed, 2), n, 0.0, (k as f64).sqrt());
    let mu = normal_vec(&mut stream(seed, 3), n, 0.0, 1.0);

    let mut p = Triplets::default();
    for (i, &di) in d.iter().enumerate() {
        p.push(i, i, 2.0 * di);
    }
    for j in 0..k {
        p.push(n + j, n + j, 2.0);
    }
    let mut q: Vec<f64> = mu.iter().map(|v| -v).collect();
    q.extend(std::iter::repeat_n(0.0, k));

    let mut a = Triplets::default();
    for &(i, j, v) in &f {
        a.push(j, i, -v);
    }
    for j in 0..k {
        a.push(j, n + j, 1.0);
    }
    for i in 0..n {
        a.push(k, i, 1.0);
        a.push(k + 1 + i, i, 1.0);
    }
    let mut l = vec![0.0; k];
    let mut u = vec![0.0; k];
    l.push(1.0);
    u.push(1.0);
    l.extend(std::iter::repeat_n(0.0, n));
    u.extend(std::iter::repeat_n(INF, n));
    let m = k + 1 + n;
    Ok(ProblemData::new(p.build(n + k, n + k)?, q, a.build(m, n + k)?, l, u)?)
}

/// Regression data shared by the lasso and Huber classes.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub a: CscMatrix,
    pub b: Vec<f64>,
}

impl RegressionData {
    /// `‖Aᵀb‖∞`. The lasso QP below has solution `x = 0` exactly when
    /// `λ ≥ 2‖Aᵀb‖∞`, the gradient of `‖Ax − b‖²` at the origin being
    /// `−2Aᵀb`.
    pub fn atb_inf_norm(&self) -> f64 {
        let mut atb = vec![0.0; self.a.ncols()];
        self.a.mul_vec_into(&self.b, &mut atb, true);
        inf_norm(&atb)
    }
}

pub fn lasso_data(n: usize, m: usize, seed: u64) -> Result<RegressionData, GenError> {
    min_dim("lasso", n, 1)?;
    min_dim("lasso", m, 1)?;
    let a = csc(m, n, &sparse_normal(&mut stream(seed, 1), m, n, 15, 0.0, 1.0))?;
    let mut rng = stream(seed, 2);
    let sd = (1.0 / n as f64).sqrt();
    let v: Vec<f64> = (0..n)
        .map(|_| {
            if uniform(&mut rng, 0.0, 1.0) < 0.5 {
                0.0
            } else {
                normal(&mut rng, 0.0, sd)
            }
        })
        .collect();
    let mut b = vec![0.0; m];
    a.mul_vec_into(&v, &mut b, false);
    let mut rng = stream(seed, 3);
    for bi in &mut b {
        *bi += normal(&mut rng, 0.0, 1.0);
    }
    Ok(RegressionData { a, b })
}

/// Linear cost `(0, 0, λ1)` of the lasso QP in `(x, y, t)`.
pub fn lasso_cost(n: usize, m: usize, lambda: f64) -> Vec<f64> {
    let mut q = vec![0.0; n + m];
    q.extend(std::iter::repeat_n(lambda, n));
    q
}

/// Variables `(x, y, t)`. Rows: `Ax − y = b`, `x − t ≤ 0`, `x + t ≥ 0`.
pub fn lasso_problem(data: &RegressionData, lambda: f64) -> Result<ProblemData, GenError> {
    let (m, n) = (data.a.nrows(), data.a.ncols());
    let nv = 2 * n + m;
    let mut p = Triplets::default();
    for i in 0..m {
        p.push(n + i, n + i, 2.0);
    }
    let mut a = Triplets::default();
    for (r, c, v) in data.a.iter() {
        a.push(r, c, v);
    }
    for i in 0..m {
        a.push(i, n + i, -1.0);
    }
    for j in 0..n {
        a.push(m + j, j, 1.0);
        a.push(m + j, n + m + j, -1.0);
        a.push(m + n + j, j, 1.0);
        a.push(m + n + j, n + m + j, 1.0);
    }
    let mut l = data.b.clone();
    let mut u = data.b.clone();
    l.extend(std::iter::repeat_n(-INF, n));
    u.extend(std::iter::repeat_n(0.0, n));
    l.extend(std::iter::repeat_n(0.0, n));
    u.extend(std::iter::repeat_n(INF, n));
    let rows = m + 2 * n;
    Ok(ProblemData::new(p.build(nv, nv)?, lasso_cost(n, m, lambda), a.build(rows, nv)?, l, u)?)
}

pub fn lasso(n: usize, seed: u64) -> Result<ProblemData, GenError> {
    lasso_with(n, 100 * n, seed)
}

pub fn lasso_with(n: usize, m: usize, seed: u64) -> Result<ProblemData, GenError> {
    let data = lasso_data(n, m, seed)?;
    lasso_problem(&data, data.atb_inf_norm() / 5.0)
}

pub fn huber(n: usize, seed: u64) -> Result<ProblemData, GenError> {
    huber_with(n, 100 * n, seed, true)
}

/// Variables `(x, u, r, s)`. Rows: `Ax − u − r + s = b`, `r ≥ 0`, `s ≥ 0`.
/// Without `outliers` the data is exactly `b = Av`.
pub fn huber_with(n: usize, m: usize, seed: u64, outliers: bool) -> Result<ProblemData, GenError> {
    min_dim("huber", n, 1)?;
    min_dim("huber", m, 1)?;
    let data = csc(m, n, &sparse_normal(&mut stream(seed, 1), m, n, 15, 0.0, 1.0))?;
    let v = normal_vec(&mut stream(seed, 2), n, 0.0, (1.0 / n as f64).sqrt());
    let mut b = vec![0.0; m];
    data.mul_vec_into(&v, &mut b, false);
    if outliers {
        let mut rng = stream(seed, 3);
        for bi in &mut b {
            *bi += if uniform(&mut rng, 0.0, 1.0) < 0.95 {
                normal(&mut rng, 0.0, 0.5)
            } else {
                uniform(&mut rng, 0.0, 10.0)
            };
        }
    }

    let nv = n + 3 * m;
    let (uo, ro, so) = (n, n + m, n + 2 * m);
    let mut p = Triplets::default();
    for i in 0..m {
        p.push(uo + i, uo + i, 2.0);
    }
    let mut q = vec![0.0; n + m];
    q.extend(std::iter::repeat_n(2.0, 2 * m));

    let mut a = Triplets::default();
    for (r, c, val) in data.iter() {
        a.push(r, c, val);
    }
    for i in 0..m {
        a.push(i, uo + i, -1.0);
        a.push(i, ro + i, -1.0);
        a.push(i, so + i, 1.0);
        a.push(m + i, ro + i, 1.0);
        a.push(2 * m + i, so + i, 1.0);
    }
    let mut l = b.clone();
    let mut u = b;
    l.extend(std::iter::repeat_n(0.0, 2 * m));
    u.extend(std::iter::repeat_n(INF, 2 * m));
    Ok(ProblemData::new(p.build(nv, nv)?, q, a.build(3 * m, nv)?, l, u)?)
}

pub fn svm(n: usize, seed: u64) -> Result<ProblemData, GenError> {
    svm_with(n, 100 * n, seed)
}

/// Variables `(x, t)` with weight `λ = 1`. Rows: `diag(b)Ax − t ≤ −1` and
/// `−t ≤ 0`; the first `⌊m/2⌋` labels are `+1`.
pub fn svm_with(n: usize, m: usize, seed: u64) -> Result<ProblemData, GenError> {
    min_dim("svm", n, 1)?;
    min_dim("svm", m, 2)?;
    let lambda = 1.0;
    let half = m / 2;
    let sd = (1.0 / n as f64).sqrt();
    let shift = 1.0 / n as f64;
    let top = sparse_normal(&mut stream(seed, 1), half, n, 15, shift, sd);
    let bottom = sparse_normal(&mut stream(seed, 2), m - half, n, 15, -shift, sd);

    let nv = n + m;
    let mut p = Triplets::default();
    for j in 0..n {
        p.push(j, j, 2.0);
    }
    let mut q = vec![0.0; n];
    q.extend(std::iter::repeat_n(lambda, m));

    let mut a = Triplets::default();
    for &(r, c, v) in &top {
        a.push(r, c, v);
    }
    for &(r, c, v) in &bottom {
        a.push(half + r, c, -v);
    }
    for i in 0..m {
        a.push(i, n + i, -1.0);
        a.push(m + i, n + i, -1.0);
    }
    let l = vec![-INF; 2 * m];
    let mut u = vec![-1.0; m];
    u.extend(std::iter::repeat_n(0.0, m));
    Ok(ProblemData::new(p.build(nv, nv)?, q, a.build(2 * m, nv)?, l, u)?)
}
