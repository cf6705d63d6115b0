//! Convex quadratic programming by a primal-dual interior-point method.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀPx + qᵀx
//! subject to  A x  = b        (multipliers y, free sign)
//!             G x <= h        (multipliers z >= 0)
//! ```
//!
//! with Lagrangian `L = ½xᵀPx + qᵀx + yᵀ(Ax − b) + zᵀ(Gx − h)`, so that at an
//! optimum `Px + q + Aᵀy + Gᵀz = 0`. The solver follows Mehrotra's
//! predictor-corrector scheme on the reduced KKT system
//!
//! ```text
//! [ P + GᵀWG   Aᵀ ] [dx]   [r1]
//! [ A          0  ] [dy] = [r2],     W = diag(z / s)
//! ```
//!
//! which is factored with a regularized envelope LDLᵀ after a reverse
//! Cuthill-McKee ordering, followed by iterative refinement against the
//! unregularized matrix.

mod ldl;
mod sparse;

pub use sparse::SparseMatrix;

use ldl::{reverse_cuthill_mckee, EnvelopeMatrix, LdlFactor};
use serde::{Deserialize, Serialize};
use sparse::{dot, norm_inf};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("hessian is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("hessian has negative diagonal entry at {0}; problem is not convex")]
    NotConvex(usize),
}

/// Problem data. The Hessian is stored in full (both triangles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProgram {
    pub hessian: SparseMatrix,
    pub linear: Vec<f64>,
    pub eq_matrix: SparseMatrix,
    pub eq_rhs: Vec<f64>,
    pub ineq_matrix: SparseMatrix,
    pub ineq_rhs: Vec<f64>,
}

impl QuadraticProgram {
    /// An unconstrained problem with zero objective over `n` variables.
    pub fn new(n: usize) -> Self {
        Self {
            hessian: SparseMatrix::zeros(n, n),
            linear: vec![0.0; n],
            eq_matrix: SparseMatrix::zeros(0, n),
            eq_rhs: Vec::new(),
            ineq_matrix: SparseMatrix::zeros(0, n),
            ineq_rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    /// Appends `Σ coeffs · x = rhs` and returns the row index.
    pub fn add_equality(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.eq_matrix.push_row();
        for &(c, v) in coeffs {
            self.eq_matrix.add(r, c, v);
        }
        self.eq_rhs.push(rhs);
        r
    }

    /// Appends `Σ coeffs · x <= rhs` and returns the row index.
    pub fn add_inequality(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.ineq_matrix.push_row();
        for &(c, v) in coeffs {
            self.ineq_matrix.add(r, c, v);
        }
        self.ineq_rhs.push(rhs);
        r
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.hessian.mul_vec(x);
        0.5 * dot(x, &px) + dot(&self.linear, x)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.num_vars();
        let dims = [
            ("hessian rows", self.hessian.nrows(), n),
            ("hessian cols", self.hessian.ncols(), n),
            ("equality cols", self.eq_matrix.ncols(), n),
            ("equality rhs", self.eq_rhs.len(), self.eq_matrix.nrows()),
            ("inequality cols", self.ineq_matrix.ncols(), n),
            (
                "inequality rhs",
                self.ineq_rhs.len(),
                self.ineq_matrix.nrows(),
            ),
        ];
        for (what, got, want) in dims {
            if got != want {
                return Err(QpError::Dimension(format!("{what}: {got} != {want}")));
            }
        }
        if n == 0 {
            return Err(QpError::Dimension("problem has no variables".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !self.hessian.is_finite() {
            return Err(QpError::NonFinite("hessian"));
        }
        if !finite(&self.linear) {
            return Err(QpError::NonFinite("linear term"));
        }
        if !self.eq_matrix.is_finite() || !finite(&self.eq_rhs) {
            return Err(QpError::NonFinite("equality constraints"));
        }
        if !self.ineq_matrix.is_finite() || !finite(&self.ineq_rhs) {
            return Err(QpError::NonFinite("inequality constraints"));
        }
        for (r, row) in self.hessian.rows().enumerate() {
            for &(c, v) in row {
                if (v - self.hessian.get(c, r)).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(QpError::NotSymmetric { row: r, col: c });
                }
            }
            if self.hessian.get(r, r) < 0.0 {
                return Err(QpError::NotConvex(r));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Bound on every KKT residual (max-norm) at an optimal exit.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

impl QpSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::Unbounded => "unbounded",
            QpStatus::MaxIterations => "max_iter",
        };
        f.write_str(s)
    }
}

/// Max-norm KKT residuals of a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖Px + q + Aᵀy + Gᵀz‖∞`
    pub stationarity: f64,
    /// `max(‖Ax − b‖∞, max(Gx − h)⁺)`
    pub primal_feasibility: f64,
    /// `max(−z)⁺`
    pub dual_feasibility: f64,
    /// `max |zᵢ (h − Gx)ᵢ|`
    pub complementarity: f64,
    /// Primal objective minus the Lagrangian dual value.
    pub duality_gap: f64,
}

impl KktResiduals {
    pub fn evaluate(qp: &QuadraticProgram, x: &[f64], y: &[f64], z: &[f64]) -> Self {
        let px = qp.hessian.mul_vec(x);
        let aty = qp.eq_matrix.tr_mul_vec(y);
        let gtz = qp.ineq_matrix.tr_mul_vec(z);
        let grad: Vec<f64> = (0..x.len())
            .map(|i| px[i] + qp.linear[i] + aty[i] + gtz[i])
            .collect();
        let ax = qp.eq_matrix.mul_vec(x);
        let gx = qp.ineq_matrix.mul_vec(x);
        let eq_res = ax
            .iter()
            .zip(&qp.eq_rhs)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let ineq_res = gx
            .iter()
            .zip(&qp.ineq_rhs)
            .fold(0.0_f64, |m, (g, h)| m.max(g - h));
        let dual_feasibility = z.iter().fold(0.0_f64, |m, &zi| m.max(-zi));
        let complementarity = z
            .iter()
            .zip(gx.iter().zip(&qp.ineq_rhs))
            .fold(0.0_f64, |m, (zi, (g, h))| m.max((zi * (h - g)).abs()));
        let duality_gap =
            dot(x, &px) + dot(&qp.linear, x) + dot(&qp.eq_rhs, y) + dot(&qp.ineq_rhs, z);
        Self {
            stationarity: norm_inf(&grad),
            primal_feasibility: eq_res.max(ineq_res),
            dual_feasibility,
            complementarity,
            duality_gap: duality_gap.abs(),
        }
    }

    /// Largest of the four KKT residuals (the gap is reported separately).
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }

    fn converged(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.duality_gap <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub primal: Vec<f64>,
    /// One multiplier per equality row.
    pub duals_eq: Vec<f64>,
    /// One nonnegative multiplier per inequality row.
    pub duals_ineq: Vec<f64>,
    pub status: QpStatus,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub objective: f64,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }

    /// Slack `h − Gx` of every inequality row.
    pub fn slacks(&self, qp: &QuadraticProgram) -> Vec<f64> {
        let gx = qp.ineq_matrix.mul_vec(&self.primal);
        qp.ineq_rhs.iter().zip(gx).map(|(h, g)| h - g).collect()
    }
}

const STATIC_REG: f64 = 1e-10;
const PIVOT_FLOOR: f64 = 1e-13;
const REFINE_STEPS: usize = 10;
const STEP_FRACTION: f64 = 0.99;

/// Reduced KKT matrix with a fixed symbolic structure and ordering.
struct KktSystem<'a> {
    qp: &'a QuadraticProgram,
    /// `perm[old] = new` for old indices `0..n` (variables) then `n..n+p`.
    perm: Vec<usize>,
    pattern: EnvelopeMatrix,
    signs: Vec<f64>,
}

impl<'a> KktSystem<'a> {
    fn new(qp: &'a QuadraticProgram) -> Self {
        let n = qp.num_vars();
        let dim = n + qp.num_eq();
        let mut adjacency = vec![Vec::new(); dim];
        let link = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        };
        for (i, row) in qp.hessian.rows().enumerate() {
            for &(j, _) in row {
                link(i, j, &mut adjacency);
            }
        }
        for row in qp.ineq_matrix.rows() {
            for (k, &(i, _)) in row.iter().enumerate() {
                for &(j, _) in &row[..k] {
                    link(i, j, &mut adjacency);
                }
            }
        }
        for (r, row) in qp.eq_matrix.rows().enumerate() {
            for &(j, _) in row {
                link(n + r, j, &mut adjacency);
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        let perm = reverse_cuthill_mckee(&adjacency);
        let entries = adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, nbrs)| nbrs.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (perm[a], perm[b]))
            .collect::<Vec<_>>();
        let pattern = EnvelopeMatrix::with_pattern(dim, entries);
        let mut signs = vec![1.0; dim];
        for r in 0..qp.num_eq() {
            signs[perm[n + r]] = -1.0;
        }
        Self {
            qp,
            perm,
            pattern,
            signs,
        }
    }

    fn assemble(&self, w: &[f64]) -> EnvelopeMatrix {
        let qp = self.qp;
        let n = qp.num_vars();
        let p = &self.perm;
        let mut k = self.pattern.clone();
        k.clear();
        for (i, row) in qp.hessian.rows().enumerate() {
            for &(j, v) in row {
                if j <= i {
                    k.add(p[i], p[j], v);
                }
            }
        }
        for (row, &wi) in qp.ineq_matrix.rows().zip(w) {
            for (a, &(i, gi)) in row.iter().enumerate() {
                for &(j, gj) in &row[..=a] {
                    k.add(p[i], p[j], wi * gi * gj);
                }
            }
        }
        for (r, row) in qp.eq_matrix.rows().enumerate() {
            for &(j, v) in row {
                k.add(p[n + r], p[j], v);
            }
        }
        k
    }

    fn factor(&self, k: &EnvelopeMatrix) -> LdlFactor {
        let mut reg = k.clone();
        for i in 0..reg.dim() {
            reg.add(i, i, self.signs[i] * STATIC_REG);
        }
        reg.factor(&self.signs, PIVOT_FLOOR)
    }

    /// Solves `K [dx; dy] = [rx; ry]` with iterative refinement.
    fn solve(
        &self,
        k: &EnvelopeMatrix,
        factor: &LdlFactor,
        rx: &[f64],
        ry: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let n = rx.len();
        let mut rhs = vec![0.0; self.perm.len()];
        for (i, &v) in rx.iter().chain(ry).enumerate() {
            rhs[self.perm[i]] = v;
        }
        let scale = 1.0 + norm_inf(&rhs);
        let mut sol = rhs.clone();
        factor.solve_in_place(&mut sol);
        let mut best = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let ks = k.mul_vec(&sol);
            let mut res: Vec<f64> = rhs.iter().zip(&ks).map(|(b, a)| b - a).collect();
            let err = norm_inf(&res);
            if err <= 1e-15 * scale || err >= best {
                break;
            }
            best = err;
            factor.solve_in_place(&mut res);
            sol.iter_mut().zip(&res).for_each(|(s, d)| *s += d);
        }
        let dx = (0..n).map(|i| sol[self.perm[i]]).collect();
        let dy = (n..self.perm.len()).map(|i| sol[self.perm[i]]).collect();
        (dx, dy)
    }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < 0.0)
        .fold(f64::INFINITY, |a, (&vi, &d)| a.min(-vi / d))
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
}

/// Solves the QP. Structural problems are errors; infeasibility and
/// iteration limits are reported through [`QpSolution::status`].
pub fn solve(qp: &QuadraticProgram, settings: &QpSettings) -> Result<QpSolution, QpError> {
    qp.validate()?;
    let n = qp.num_vars();
    let m = qp.num_ineq();
    let g = &qp.ineq_matrix;
    let a = &qp.eq_matrix;
    let tol = settings.tolerance;
    let kkt = KktSystem::new(qp);

    // Starting point: minimize ½xᵀPx + qᵀx + ½‖Gx − h‖² subject to Ax = b,
    // then push s and z into the positive orthant.
    let k0 = kkt.assemble(&vec![1.0; m]);
    let f0 = kkt.factor(&k0);
    let gth = g.tr_mul_vec(&qp.ineq_rhs);
    let rx0: Vec<f64> = (0..n).map(|i| gth[i] - qp.linear[i]).collect();
    let (mut x, mut y) = kkt.solve(&k0, &f0, &rx0, &qp.eq_rhs);
    let gx = g.mul_vec(&x);
    let mut s: Vec<f64> = qp.ineq_rhs.iter().zip(&gx).map(|(h, g)| h - g).collect();
    let mut z: Vec<f64> = s.iter().map(|v| -v).collect();
    shift_positive(&mut s);
    shift_positive(&mut z);
    let q_scale = 1.0 + norm_inf(&qp.linear);
    let mut iterations = 0;
    let mut status = QpStatus::MaxIterations;

    loop {
        let residuals = KktResiduals::evaluate(qp, &x, &y, &z);
        if residuals.converged(tol) {
            status = QpStatus::Optimal;
            break;
        }
        if m == 0 && iterations >= 3 {
            // the starting solve is already exact for a pure equality QP;
            // repeated corrections that do not converge mean an
            // inconsistent or unbounded problem
            status = if residuals.primal_feasibility > tol {
                QpStatus::Infeasible
            } else {
                QpStatus::Unbounded
            };
            break;
        }
        if iterations >= settings.max_iterations {
            break;
        }
        if iterations >= 5 {
            if let Some(found) = detect_infeasibility(qp, &x, &y, &z, q_scale, tol) {
                status = found;
                break;
            }
        }
        iterations += 1;

        let px = qp.hessian.mul_vec(&x);
        let aty = a.tr_mul_vec(&y);
        let gtz = g.tr_mul_vec(&z);
        let r_d: Vec<f64> = (0..n)
            .map(|i| px[i] + qp.linear[i] + aty[i] + gtz[i])
            .collect();
        let ax = a.mul_vec(&x);
        let r_p: Vec<f64> = ax.iter().zip(&qp.eq_rhs).map(|(a, b)| a - b).collect();
        let gx = g.mul_vec(&x);
        let r_g: Vec<f64> = (0..m).map(|i| gx[i] + s[i] - qp.ineq_rhs[i]).collect();
        let mu = if m > 0 { dot(&s, &z) / m as f64 } else { 0.0 };

        let w: Vec<f64> = s.iter().zip(&z).map(|(s, z)| z / s).collect();
        let k = kkt.assemble(&w);
        let factor = kkt.factor(&k);
        let newton = |r_c: &[f64]| -> Direction {
            let tmp: Vec<f64> = (0..m).map(|i| (z[i] * r_g[i] - r_c[i]) / s[i]).collect();
            let gt_tmp = g.tr_mul_vec(&tmp);
            let rx: Vec<f64> = (0..n).map(|i| -r_d[i] - gt_tmp[i]).collect();
            let ry: Vec<f64> = r_p.iter().map(|v| -v).collect();
            let (dx, dy) = kkt.solve(&k, &factor, &rx, &ry);
            let gdx = g.mul_vec(&dx);
            let dz = (0..m).map(|i| tmp[i] + w[i] * gdx[i]).collect();
            let ds = (0..m).map(|i| -r_g[i] - gdx[i]).collect();
            Direction { dx, dy, dz, ds }
        };

        // predictor
        let r_c: Vec<f64> = s.iter().zip(&z).map(|(s, z)| s * z).collect();
        let aff = newton(&r_c);
        let alpha_aff = 1.0_f64
            .min(max_step(&s, &aff.ds))
            .min(max_step(&z, &aff.dz));
        let sigma = if m > 0 && mu > 0.0 {
            let mu_aff = (0..m)
                .map(|i| (s[i] + alpha_aff * aff.ds[i]) * (z[i] + alpha_aff * aff.dz[i]))
                .sum::<f64>()
                / m as f64;
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // corrector
        let r_c: Vec<f64> = (0..m)
            .map(|i| s[i] * z[i] + aff.ds[i] * aff.dz[i] - sigma * mu)
            .collect();
        let dir = newton(&r_c);
        let alpha = 1.0_f64.min(STEP_FRACTION * max_step(&s, &dir.ds).min(max_step(&z, &dir.dz)));

        axpy(alpha, &dir.dx, &mut x);
        axpy(alpha, &dir.dy, &mut y);
        axpy(alpha, &dir.dz, &mut z);
        axpy(alpha, &dir.ds, &mut s);
    }

    let residuals = KktResiduals::evaluate(qp, &x, &y, &z);
    let objective = qp.objective(&x);
    Ok(QpSolution {
        primal: x,
        duals_eq: y,
        duals_ineq: z,
        status,
        residuals,
        iterations,
        objective,
    })
}

fn detect_infeasibility(
    qp: &QuadraticProgram,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    q_scale: f64,
    tol: f64,
) -> Option<QpStatus> {
    // primal infeasibility: (y, z) approaches a Farkas certificate
    // Aᵀy + Gᵀz = 0, z >= 0, bᵀy + hᵀz < 0
    let dual_scale = norm_inf(y).max(norm_inf(z));
    let px = qp.hessian.mul_vec(x);
    let grad_scale = px
        .iter()
        .zip(&qp.linear)
        .fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
    if dual_scale > 1e6 * (1.0 + grad_scale) {
        let yn: Vec<f64> = y.iter().map(|v| v / dual_scale).collect();
        let zn: Vec<f64> = z.iter().map(|v| v / dual_scale).collect();
        let mut cert = qp.eq_matrix.tr_mul_vec(&yn);
        let gz = qp.ineq_matrix.tr_mul_vec(&zn);
        cert.iter_mut().zip(&gz).for_each(|(a, b)| *a += b);
        let obj = dot(&qp.eq_rhs, &yn) + dot(&qp.ineq_rhs, &zn);
        if obj < 0.0 && norm_inf(&cert) <= 1e-6 * obj.abs() {
            return Some(QpStatus::Infeasible);
        }
    }

    // dual infeasibility: x approaches a direction of unbounded descent
    let x_scale = norm_inf(x);
    let data_scale = 1.0 + norm_inf(&qp.eq_rhs).max(norm_inf(&qp.ineq_rhs));
    if x_scale > 1e8 * data_scale {
        let xn: Vec<f64> = x.iter().map(|v| v / x_scale).collect();
        let descent = dot(&qp.linear, &xn);
        let pxn = norm_inf(&qp.hessian.mul_vec(&xn));
        let axn = norm_inf(&qp.eq_matrix.mul_vec(&xn));
        let gxn = qp
            .ineq_matrix
            .mul_vec(&xn)
            .into_iter()
            .fold(0.0_f64, f64::max);
        let small = 1e-6 * q_scale;
        if descent < -tol && pxn <= small && axn <= small && gxn <= small {
            return Some(QpStatus::Unbounded);
        }
    }
    None
}

fn shift_positive(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        v.iter_mut().for_each(|x| *x += 1.0 - min);
    }
}

fn axpy(alpha: f64, d: &[f64], v: &mut [f64]) {
    v.iter_mut().zip(d).for_each(|(a, b)| *a += alpha * b);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_bound() -> QuadraticProgram {
        // min x² s.t. x >= 1
        let mut qp = QuadraticProgram::new(1);
        qp.hessian.add(0, 0, 2.0);
        qp.add_inequality(&[(0, -1.0)], -1.0);
        qp
    }

    #[test]
    fn scalar_lower_bound() {
        let sol = solve(&scalar_bound(), &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-8);
        assert!((sol.duals_ineq[0] - 2.0).abs() < 1e-8);
        assert!(sol.residuals.max_residual() <= 1e-8);
    }

    #[test]
    fn equality_and_bound() {
        // min (x-3)² s.t. x + y = 4, y >= 2
        let mut qp = QuadraticProgram::new(2);
        qp.hessian.add(0, 0, 2.0);
        qp.linear[0] = -6.0;
        qp.add_equality(&[(0, 1.0), (1, 1.0)], 4.0);
        qp.add_inequality(&[(1, -1.0)], -2.0);
        let sol = solve(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.primal[0] - 2.0).abs() < 1e-8);
        assert!((sol.primal[1] - 2.0).abs() < 1e-8);
        // stationarity in x: 2(x-3) + y_eq = 0
        assert!((sol.duals_eq[0] - 2.0).abs() < 1e-8);
        assert!((sol.duals_ineq[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn equality_only_is_one_newton_step() {
        // min x² + y² s.t. x + y = 2
        let mut qp = QuadraticProgram::new(2);
        qp.hessian.add(0, 0, 2.0);
        qp.hessian.add(1, 1, 2.0);
        qp.add_equality(&[(0, 1.0), (1, 1.0)], 2.0);
        let sol = solve(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-10);
        assert!((sol.duals_eq[0] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn linear_program() {
        // min -x - y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 → (1.6, 1.2)
        let mut qp = QuadraticProgram::new(2);
        qp.linear = vec![-1.0, -1.0];
        qp.add_inequality(&[(0, 1.0), (1, 2.0)], 4.0);
        qp.add_inequality(&[(0, 3.0), (1, 1.0)], 6.0);
        qp.add_inequality(&[(0, -1.0)], 0.0);
        qp.add_inequality(&[(1, -1.0)], 0.0);
        let sol = solve(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.primal[0] - 1.6).abs() < 1e-7);
        assert!((sol.primal[1] - 1.2).abs() < 1e-7);
        assert!((sol.duals_ineq[0] - 0.4).abs() < 1e-7);
        assert!((sol.duals_ineq[1] - 0.2).abs() < 1e-7);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut qp = QuadraticProgram::new(1);
        qp.hessian.add(0, 0, 1.0);
        qp.add_inequality(&[(0, -1.0)], -1.0);
        qp.add_inequality(&[(0, 1.0)], 0.0);
        let sol = solve(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let mut qp = QuadraticProgram::new(2);
        qp.hessian.add(0, 0, 1.0);
        qp.hessian.add(1, 1, 1.0);
        qp.add_equality(&[(0, 1.0), (1, 1.0)], 1.0);
        qp.add_equality(&[(0, 1.0), (1, 1.0)], 2.0);
        qp.add_inequality(&[(0, -1.0)], 0.0);
        let sol = solve(&qp, &QpSettings::default()).unwrap();
        assert_ne!(sol.status, QpStatus::Optimal);
    }

    #[test]
    fn unbounded_descent_is_detected() {
        // min -x s.t. x >= 0
        let mut qp = QuadraticProgram::new(1);
        qp.linear[0] = -1.0;
        qp.add_inequality(&[(0, -1.0)], 0.0);
        let sol = solve(&qp, &QpSettings::default()).unwrap();
        assert!(matches!(
            sol.status,
            QpStatus::Unbounded | QpStatus::MaxIterations
        ));
        assert_ne!(sol.status, QpStatus::Optimal);
    }

    #[test]
    fn rejects_bad_input() {
        let mut qp = QuadraticProgram::new(2);
        qp.hessian.add(0, 1, 1.0);
        assert!(matches!(
            solve(&qp, &QpSettings::default()),
            Err(QpError::NotSymmetric { .. })
        ));
        let mut qp = QuadraticProgram::new(1);
        qp.linear[0] = f64::NAN;
        assert_eq!(
            solve(&qp, &QpSettings::default()).unwrap_err(),
            QpError::NonFinite("linear term")
        );
        let mut qp = QuadraticProgram::new(1);
        qp.eq_rhs.push(1.0);
        assert!(matches!(qp.validate(), Err(QpError::Dimension(_))));
    }
}
