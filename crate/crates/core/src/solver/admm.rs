//! Operator splitting on the homogeneous self-dual embedding of
//!
//! ```text
//!   min c'x  s.t.  A x + s = b,  s in K          (dual: A'y + c = 0, y in K*)
//! ```
//!
//! The iterate `w` runs Douglas-Rachford splitting between the linear
//! operator of the embedding and the cone `R^n x K* x R_+`, accelerated by
//! type-II Anderson mixing with a residual safeguard. Data are equilibrated
//! (Ruiz) before the run and residuals are measured in original units.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::ldl::{CscMatrix, LdlFactor};
use super::project::{project_dual, ScsCone};
use crate::error::Result;

/// Problem in the standard form above.
#[derive(Debug, Clone)]
pub struct ScsProblem {
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cones: Vec<ScsCone>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmSettings {
    pub max_iter: usize,
    /// Relative tolerance on primal residual, dual residual and gap.
    pub eps: f64,
    /// Tolerance for infeasibility certificates.
    pub eps_infeas: f64,
    /// Douglas-Rachford relaxation in `(0, 2)`.
    pub alpha: f64,
    /// Initial dual step scale.
    pub scale: f64,
    pub adaptive_scale: bool,
    pub normalize: bool,
    /// Anderson memory; 0 disables acceleration.
    pub anderson_mem: usize,
    /// Iterations between Anderson extrapolations.
    pub anderson_interval: usize,
    pub rho_x: f64,
    pub check_every: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            eps: 1e-6,
            eps_infeas: 1e-7,
            alpha: 1.5,
            scale: 0.1,
            adaptive_scale: true,
            normalize: true,
            anderson_mem: 10,
            anderson_interval: 10,
            rho_x: 1e-6,
            check_every: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScsStatus {
    Solved,
    Infeasible,
    Unbounded,
    MaxIter,
    Failed,
}

#[derive(Debug, Clone)]
pub struct ScsResult {
    pub status: ScsStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
    pub pobj: f64,
    pub dobj: f64,
}

const MIN_SCALE: f64 = 1e-6;
const MAX_SCALE: f64 = 1e6;

struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    sigma_b: f64,
    sigma_c: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn equilibrate(p: &ScsProblem, normalize: bool) -> Scaling {
    let (m, n) = (p.a.nrows, p.a.ncols);
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    if normalize {
        for _ in 0..25 {
            let mut rn = vec![0.0f64; m];
            let mut cn = vec![0.0f64; n];
            for col in 0..n {
                for q in p.a.colptr[col]..p.a.colptr[col + 1] {
                    let r = p.a.rowidx[q];
                    let v = (p.a.vals[q] * d[r] * e[col]).abs();
                    rn[r] = rn[r].max(v);
                    cn[col] = cn[col].max(v);
                }
            }
            let mut off = 0;
            for cone in &p.cones {
                let len = cone.len();
                if matches!(cone, ScsCone::Soc(_) | ScsCone::Psd(_)) && len > 0 {
                    let mx = rn[off..off + len].iter().fold(0.0f64, |a, &b| a.max(b));
                    rn[off..off + len].iter_mut().for_each(|v| *v = mx);
                }
                off += len;
            }
            for i in 0..m {
                if rn[i] > 1e-10 {
                    d[i] = (d[i] / rn[i].sqrt()).clamp(1e-4, 1e4);
                }
            }
            for j in 0..n {
                if cn[j] > 1e-10 {
                    e[j] = (e[j] / cn[j].sqrt()).clamp(1e-4, 1e4);
                }
            }
        }
    }
    let bs: Vec<f64> = p.b.iter().zip(&d).map(|(b, d)| b * d).collect();
    let cs: Vec<f64> = p.c.iter().zip(&e).map(|(c, e)| c * e).collect();
    let pick = |v: &[f64]| {
        let nv = norm_inf(v);
        if !normalize || nv < 1e-8 {
            1.0
        } else {
            (1.0 / nv).clamp(1e-4, 1e4)
        }
    };
    Scaling { sigma_b: pick(&bs), sigma_c: pick(&cs), d, e }
}

struct Kkt {
    n: usize,
    m: usize,
    upper: Vec<(usize, usize, f64)>,
    /// Positions in `upper` of the `-r_y` diagonal entries.
    ydiag: Vec<usize>,
    ldl: LdlFactor,
}

impl Kkt {
    fn new(a: &CscMatrix, rho_x: f64, ry: &[f64]) -> Result<Self> {
        let (m, n) = (a.nrows, a.ncols);
        let mut upper = Vec::with_capacity(n + m + a.nnz());
        for j in 0..n {
            upper.push((j, j, rho_x));
            for q in a.colptr[j]..a.colptr[j + 1] {
                upper.push((j, n + a.rowidx[q], a.vals[q]));
            }
        }
        let mut ydiag = Vec::with_capacity(m);
        for (i, r) in ry.iter().enumerate() {
            ydiag.push(upper.len());
            upper.push((n + i, n + i, -r));
        }
        let ldl = LdlFactor::new(n + m, &upper)?;
        Ok(Self { n, m, upper, ydiag, ldl })
    }

    fn update_ry(&mut self, ry: &[f64]) -> Result<()> {
        for (k, &pos) in self.ydiag.iter().enumerate() {
            self.upper[pos].2 = -ry[k];
        }
        self.ldl.refactor(&self.upper)
    }

    /// Solves `[[r_x I, A'], [-A, R_y]] (a, b) = (p, q)`.
    fn solve(&self, p: &[f64], q: &[f64], out: &mut [f64]) {
        out[..self.n].copy_from_slice(p);
        for i in 0..self.m {
            out[self.n + i] = -q[i];
        }
        self.ldl.solve(out);
    }
}

struct Anderson {
    mem: usize,
    dw: VecDeque<Vec<f64>>,
    df: VecDeque<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(mem: usize) -> Self {
        Self { mem, dw: VecDeque::new(), df: VecDeque::new(), prev: None }
    }

    fn reset(&mut self) {
        self.dw.clear();
        self.df.clear();
        self.prev = None;
    }

    /// Given `w` and `F(w)`, returns the accelerated next point.
    fn step(&mut self, w: &[f64], fw: &[f64]) -> Option<Vec<f64>> {
        if self.mem == 0 {
            return None;
        }
        let f: Vec<f64> = fw.iter().zip(w).map(|(a, b)| a - b).collect();
        if let Some((pw, pf)) = self.prev.take() {
            self.dw.push_back(w.iter().zip(&pw).map(|(a, b)| a - b).collect());
            self.df.push_back(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            if self.dw.len() > self.mem {
                self.dw.pop_front();
                self.df.pop_front();
            }
        }
        self.prev = Some((w.to_vec(), f.clone()));
        let k = self.df.len();
        if k == 0 {
            return None;
        }
        let mut gram = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for i in 0..k {
            rhs[i] = dot(&self.df[i], &f);
            for j in 0..=i {
                let v = dot(&self.df[i], &self.df[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let tr = (0..k).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
        if tr <= 0.0 {
            self.reset();
            return None;
        }
        for i in 0..k {
            gram[(i, i)] += 1e-10 * tr;
        }
        let gamma = match gram.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                self.reset();
                return None;
            }
        };
        if gamma.iter().any(|g| !g.is_finite() || g.abs() > 1e8) {
            self.reset();
            return None;
        }
        let mut out = fw.to_vec();
        for j in 0..k {
            let g = gamma[j];
            for ((o, a), b) in out.iter_mut().zip(&self.dw[j]).zip(&self.df[j]) {
                *o -= g * (a + b);
            }
        }
        Some(out)
    }
}

struct Work<'a> {
    p: &'a ScsProblem,
    st: &'a AdmmSettings,
    n: usize,
    m: usize,
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    sc: Scaling,
    rx: f64,
    ry: Vec<f64>,
    rt: f64,
    kkt: Kkt,
    g: Vec<f64>,
    hg: f64,
    buf: Vec<f64>,
}

impl<'a> Work<'a> {
    fn ry_for(cones: &[ScsCone], scale: f64) -> Vec<f64> {
        let mut ry = Vec::new();
        for c in cones {
            let v = match c {
                ScsCone::Zero(_) => 1.0 / (1000.0 * scale),
                _ => 1.0 / scale,
            };
            ry.extend(std::iter::repeat_n(v, c.len()));
        }
        ry
    }

    fn compute_g(&mut self) {
        let mut g = vec![0.0; self.n + self.m];
        self.kkt.solve(&self.c, &self.b, &mut g);
        self.hg = dot(&self.c, &g[..self.n]) + dot(&self.b, &g[self.n..]);
        self.g = g;
    }

    /// Resolvent of the linear part: solves `(R + M) ut = R w`.
    fn linear_step(&mut self, w: &[f64], ut: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let p: Vec<f64> = w[..n].iter().map(|v| v * self.rx).collect();
        let q: Vec<f64> = w[n..n + m].iter().zip(&self.ry).map(|(v, r)| v * r).collect();
        self.kkt.solve(&p, &q, &mut self.buf);
        let hz = dot(&self.c, &self.buf[..n]) + dot(&self.b, &self.buf[n..]);
        let tau = (self.rt * w[n + m] + hz) / (self.rt + self.hg);
        for i in 0..n + m {
            ut[i] = self.buf[i] - tau * self.g[i];
        }
        ut[n + m] = tau;
    }

    fn cone_step(&self, ut: &[f64], w: &[f64], u: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        for i in 0..n + m + 1 {
            u[i] = 2.0 * ut[i] - w[i];
        }
        project_dual(&self.p.cones, &mut u[n..n + m]);
        u[n + m] = u[n + m].max(0.0);
    }

    fn v_of(&self, w: &[f64], u: &[f64], ut: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut v = vec![0.0; n + m + 1];
        for i in 0..n + m + 1 {
            let r = if i < n {
                self.rx
            } else if i < n + m {
                self.ry[i - n]
            } else {
                self.rt
            };
            v[i] = r * (w[i] + u[i] - 2.0 * ut[i]);
        }
        v
    }

    fn unscale(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let x = (0..n).map(|j| u[j] * self.sc.e[j] / self.sc.sigma_b).collect();
        let y = (0..m).map(|i| u[n + i] * self.sc.d[i] / self.sc.sigma_c).collect();
        let s = (0..m).map(|i| v[n + i] / (self.sc.d[i] * self.sc.sigma_b)).collect();
        (x, y, s)
    }

    fn residuals(&self, x: &[f64], y: &[f64], s: &[f64]) -> (f64, f64, f64, f64, f64) {
        let p = self.p;
        let mut r = p.a.mul(x);
        for i in 0..self.m {
            r[i] += s[i] - p.b[i];
        }
        let mut d = p.a.mul_t(y);
        for j in 0..self.n {
            d[j] += p.c[j];
        }
        let pobj = dot(&p.c, x);
        let dobj = -dot(&p.b, y);
        let pres = norm(&r) / (1.0 + norm(&p.b));
        let dres = norm(&d) / (1.0 + norm(&p.c));
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        (pres, dres, gap, pobj, dobj)
    }

    /// Relative residuals in scaled units, used to adapt the step scale.
    fn scaled_residuals(&self, u: &[f64], v: &[f64]) -> (f64, f64) {
        let (n, m) = (self.n, self.m);
        let tau = u[n + m];
        if tau <= 1e-12 {
            return (1.0, 1.0);
        }
        let x = &u[..n];
        let y = &u[n..n + m];
        let s = &v[n..n + m];
        let ax = self.a.mul(x);
        let pr: Vec<f64> = (0..m).map(|i| ax[i] + s[i] - self.b[i] * tau).collect();
        let aty = self.a.mul_t(y);
        let dr: Vec<f64> = (0..n).map(|j| aty[j] + self.c[j] * tau).collect();
        let pn = norm_inf(&pr) / (1e-12 + norm_inf(&ax).max(norm_inf(s)).max(tau * norm_inf(&self.b)));
        let dn = norm_inf(&dr) / (1e-12 + norm_inf(&aty).max(tau * norm_inf(&self.c)));
        (pn, dn)
    }
}

/// Runs the splitting method.
pub fn solve_scs(p: &ScsProblem, st: &AdmmSettings) -> Result<ScsResult> {
    let (m, n) = (p.a.nrows, p.a.ncols);
    let sc = equilibrate(p, st.normalize);
    let mut a = p.a.clone();
    a.scale(&sc.d, &sc.e);
    let b: Vec<f64> = (0..m).map(|i| p.b[i] * sc.d[i] * sc.sigma_b).collect();
    let c: Vec<f64> = (0..n).map(|j| p.c[j] * sc.e[j] * sc.sigma_c).collect();
    let mut scale = st.scale;
    let ry = Work::ry_for(&p.cones, scale);
    let kkt = Kkt::new(&a, st.rho_x, &ry)?;
    let mut wk = Work {
        p,
        st,
        n,
        m,
        a,
        b,
        c,
        sc,
        rx: st.rho_x,
        ry,
        rt: 1.0,
        kkt,
        g: Vec::new(),
        hg: 0.0,
        buf: vec![0.0; n + m],
    };
    wk.compute_g();

    let len = n + m + 1;
    let mut w = vec![0.0; len];
    w[n + m] = 1.0;
    let mut ut = vec![0.0; len];
    let mut u = vec![0.0; len];
    let mut aa = Anderson::new(st.anderson_mem);
    let mut pending: Option<Vec<f64>> = None;
    let mut last_res = f64::INFINITY;
    let mut scale_updates = 0;
    let mut last_adapt = 0;
    let adapt_interval = 100;

    let mut best = None;
    for it in 0..st.max_iter {
        wk.linear_step(&w, &mut ut);
        wk.cone_step(&ut, &w, &mut u);
        let fw: Vec<f64> = (0..len).map(|i| w[i] + st.alpha * (u[i] - ut[i])).collect();
        // the map is positively homogeneous, so residuals are compared
        // relative to the iterate norm
        let res = norm(&fw.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(&w).max(1e-300);
        if !res.is_finite() {
            return Ok(failed(n, m, it));
        }
        if norm(&w) < 1e-10 && aa.mem > 0 {
            // extrapolation collapsed onto the trivial fixed point: restart
            // from the initial point without acceleration
            aa = Anderson::new(0);
            pending = None;
            last_res = f64::INFINITY;
            w.iter_mut().for_each(|t| *t = 0.0);
            w[n + m] = 1.0;
            continue;
        }
        if let Some(plain) = pending.take() {
            if res > last_res {
                w = plain;
                aa.reset();
                continue;
            }
        }

        if it % st.check_every == 0 || it + 1 == st.max_iter {
            let v = wk.v_of(&w, &u, &ut);
            let tau = u[n + m];
            let kappa = v[n + m];
            if tau > 1e-12 * (1.0 + kappa) {
                let (mut x, mut y, mut s) = wk.unscale(&u, &v);
                x.iter_mut().for_each(|t| *t /= tau);
                y.iter_mut().for_each(|t| *t /= tau);
                s.iter_mut().for_each(|t| *t /= tau);
                let (pres, dres, gap, pobj, dobj) = wk.residuals(&x, &y, &s);
                if pres <= st.eps && dres <= st.eps && gap <= st.eps {
                    return Ok(ScsResult {
                        status: ScsStatus::Solved,
                        x,
                        y,
                        s,
                        iterations: it + 1,
                        pres,
                        dres,
                        gap,
                        pobj,
                        dobj,
                    });
                }
                best = Some(ScsResult {
                    status: ScsStatus::MaxIter,
                    x,
                    y,
                    s,
                    iterations: it + 1,
                    pres,
                    dres,
                    gap,
                    pobj,
                    dobj,
                });
            }
            if let Some(cert) = certificate(&wk, &u, &v, it + 1) {
                return Ok(cert);
            }

            if st.adaptive_scale && it >= last_adapt + adapt_interval && scale_updates < 50 {
                let (pn, dn) = wk.scaled_residuals(&u, &v);
                if pn > 0.0 && dn > 0.0 {
                    let factor = (pn / dn).sqrt();
                    if !(1.0 / 3.0..=3.0).contains(&factor) {
                        let new_scale = (scale * factor).clamp(MIN_SCALE, MAX_SCALE);
                        if new_scale != scale {
                            scale = new_scale;
                            scale_updates += 1;
                            last_adapt = it;
                            let ry = Work::ry_for(&p.cones, scale);
                            for i in 0..n + m + 1 {
                                let r = if i < n {
                                    wk.rx
                                } else if i < n + m {
                                    ry[i - n]
                                } else {
                                    wk.rt
                                };
                                w[i] = u[i] + v[i] / r;
                            }
                            wk.kkt.update_ry(&ry)?;
                            wk.ry = ry;
                            wk.compute_g();
                            aa.reset();
                            pending = None;
                            last_res = f64::INFINITY;
                            continue;
                        }
                    }
                }
                last_adapt = it;
            }
        }

        last_res = res;
        let accel = if it % st.anderson_interval == 0 { aa.step(&w, &fw) } else { None };
        match accel {
            Some(mut next) => {
                // keep the plain step's norm so the extrapolation cannot
                // drift toward the trivial fixed point w = 0
                let (nn, nf) = (norm(&next), norm(&fw));
                if nn > 0.0 {
                    next.iter_mut().for_each(|t| *t *= nf / nn);
                }
                pending = Some(fw);
                w = next;
            }
            None => w = fw,
        }
    }
    Ok(best.unwrap_or_else(|| {
        let mut r = failed(n, m, st.max_iter);
        r.status = ScsStatus::MaxIter;
        r
    }))
}

fn failed(n: usize, m: usize, it: usize) -> ScsResult {
    ScsResult {
        status: ScsStatus::Failed,
        x: vec![0.0; n],
        y: vec![0.0; m],
        s: vec![0.0; m],
        iterations: it,
        pres: f64::NAN,
        dres: f64::NAN,
        gap: f64::NAN,
        pobj: f64::NAN,
        dobj: f64::NAN,
    }
}

fn certificate(wk: &Work, u: &[f64], v: &[f64], iterations: usize) -> Option<ScsResult> {
    let (n, m) = (wk.n, wk.m);
    let p = wk.p;
    let eps = wk.st.eps_infeas;
    let (x, y, s) = wk.unscale(u, v);
    let by = dot(&p.b, &y);
    if by < 0.0 {
        let aty = p.a.mul_t(&y);
        if norm(&aty) <= eps * (-by) {
            let yn: Vec<f64> = y.iter().map(|t| t / -by).collect();
            return Some(ScsResult {
                status: ScsStatus::Infeasible,
                x: vec![f64::NAN; n],
                y: yn,
                s: vec![f64::NAN; m],
                iterations,
                pres: f64::NAN,
                dres: f64::NAN,
                gap: f64::NAN,
                pobj: f64::INFINITY,
                dobj: f64::INFINITY,
            });
        }
    }
    let cx = dot(&p.c, &x);
    if cx < 0.0 {
        let mut r = p.a.mul(&x);
        for i in 0..m {
            r[i] += s[i];
        }
        if norm(&r) <= eps * (-cx) {
            return Some(ScsResult {
                status: ScsStatus::Unbounded,
                x: x.iter().map(|t| t / -cx).collect(),
                y: vec![f64::NAN; m],
                s: s.iter().map(|t| t / -cx).collect(),
                iterations,
                pres: f64::NAN,
                dres: f64::NAN,
                gap: f64::NAN,
                pobj: f64::NEG_INFINITY,
                dobj: f64::NEG_INFINITY,
            });
        }
    }
    None
}
