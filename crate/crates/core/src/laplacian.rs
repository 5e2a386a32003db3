//! Vertex-space operators behind the unperturbed internal walk: the averaging map `d`,
//! its adjoint lift, the arc reversal `S`, the boundary weight `D` and the transition
//! operator `T = d S d*`. Eigenvalues of `T` map to the walk through the inverse
//! Joukowsky map; the remaining walk eigenvalues are the birth eigenvalues at +1 and -1.

use crate::error::{Error, Result};
use crate::graph::TailedGraph;
use crate::linalg::{null_space, real, CMat, CVec, C64, I};
use crate::spectral::Cluster;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Tolerance used to group eigenvalues of `T`.
pub const T_GROUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct VertexOps {
    /// `(d psi)(v) = n_i(v)^{-1} sum_{t(a) = v} psi(a)`
    pub d: CMat,
    /// `(d* f)(a) = f(t(a))`
    pub d_star: CMat,
    /// arc reversal
    pub s: CMat,
    /// internal degrees, the weights of the vertex inner product
    pub weight: DVector<f64>,
    /// boundary weight: tail count over full degree at boundary vertices, zero elsewhere
    pub boundary: DVector<f64>,
}

impl VertexOps {
    pub fn new(tg: &TailedGraph) -> Self {
        let nv = tg.num_vertices();
        let na = tg.num_arcs();
        let mut d = CMat::zeros(nv, na);
        let mut d_star = CMat::zeros(na, nv);
        let mut s = CMat::zeros(na, na);
        for a in 0..na {
            let (_, t) = tg.arc(a);
            d[(t, a)] = real(1.0 / tg.internal_degree(t) as f64);
            d_star[(a, t)] = real(1.0);
            s[(a, tg.reverse(a))] = real(1.0);
        }
        let weight = DVector::from_fn(nv, |v, _| tg.internal_degree(v) as f64);
        let boundary = DVector::from_fn(nv, |v, _| tg.tails_at(v).len() as f64 / tg.degree(v) as f64);
        VertexOps {
            d,
            d_star,
            s,
            weight,
            boundary,
        }
    }

    pub fn boundary_matrix(&self) -> CMat {
        CMat::from_diagonal(&self.boundary.map(real))
    }

    /// Weighted inner product `<f, g> = sum n_i(v) f(v) conj(g(v))`.
    pub fn inner(&self, f: &CVec, g: &CVec) -> C64 {
        (0..f.len()).map(|v| f[v] * g[v].conj() * self.weight[v]).sum()
    }

    /// Largest boundary weight; equals `1 / min n(v)` when every boundary vertex carries one tail.
    pub fn max_boundary_weight(&self) -> f64 {
        self.boundary.max()
    }
}

/// Transition operator `(T u)(v) = n_i(v)^{-1} sum_{t(a)=v} u(o(a))`.
pub fn transition(tg: &TailedGraph) -> DMatrix<f64> {
    let nv = tg.num_vertices();
    let mut t = DMatrix::zeros(nv, nv);
    for a in 0..tg.num_arcs() {
        let (o, v) = tg.arc(a);
        t[(v, o)] += 1.0 / tg.internal_degree(v) as f64;
    }
    t
}

/// Eigenvalue of `T` with a basis orthonormal in the degree-weighted inner product.
#[derive(Debug, Clone)]
pub struct TEigen {
    pub value: f64,
    pub basis: DMatrix<f64>,
}

pub fn t_spectrum(tg: &TailedGraph) -> Vec<TEigen> {
    let nv = tg.num_vertices();
    let sq: Vec<f64> = (0..nv).map(|v| (tg.internal_degree(v) as f64).sqrt()).collect();
    let mut sym = DMatrix::<f64>::zeros(nv, nv);
    for a in 0..tg.num_arcs() {
        let (o, t) = tg.arc(a);
        sym[(t, o)] += 1.0 / (sq[t] * sq[o]);
    }
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut out: Vec<TEigen> = Vec::new();
    let mut k = 0;
    while k < nv {
        let mut end = k + 1;
        while end < nv && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] < T_GROUP_TOL {
            end += 1;
        }
        let idx = &order[k..end];
        let value = idx.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / idx.len() as f64;
        let basis = DMatrix::from_fn(nv, idx.len(), |v, c| eig.eigenvectors[(v, idx[c])] / sq[v]);
        out.push(TEigen {
            value: value.clamp(-1.0, 1.0),
            basis,
        });
        k = end;
    }
    out
}

pub fn joukowsky(z: C64) -> C64 {
    (z + z.inv()) * 0.5
}

/// Points on the unit circle mapped to `t`; one point for `t = +-1`, two otherwise.
pub fn joukowsky_preimages(t: f64) -> Result<Vec<C64>> {
    if t.is_nan() || t.abs() > 1.0 + 1e-12 {
        return Err(Error::OutOfRange(t));
    }
    // near +-1 the arccosine amplifies rounding, so snap
    if 1.0 - t.abs() < 1e-10 {
        return Ok(vec![real(t.signum())]);
    }
    let th = t.acos();
    Ok(vec![C64::from_polar(1.0, th), C64::from_polar(1.0, -th)])
}

fn is_real_unit(mu: C64, tol: f64) -> Option<f64> {
    if (mu - real(1.0)).norm() < tol {
        Some(1.0)
    } else if (mu + real(1.0)).norm() < tol {
        Some(-1.0)
    } else {
        None
    }
}

/// Lift of a vertex function to an eigenvector of the unperturbed walk at `mu`.
/// Isometric from the weighted vertex space to the arc space.
pub fn lift(ops: &VertexOps, mu: C64, f: &CVec) -> CVec {
    let base = &ops.d_star * f;
    if is_real_unit(mu, 1e-12).is_some() {
        return base;
    }
    let s = mu.arg().sin().abs();
    (&base - (&ops.s * &base) * mu) / real(2f64.sqrt() * s)
}

/// `omega_z = sign(sin arg z) / sqrt 2` off the real axis, `omega_{+-1} = -+1`.
pub fn omega(z: C64) -> f64 {
    match is_real_unit(z, 1e-12) {
        Some(s) => -s,
        None => z.arg().sin().signum() / 2f64.sqrt(),
    }
}

/// Factor relating the lifted matrix of `P_zeta E_1 P_mu` to the vertex Gram matrix:
/// `<E_1 u^mu_j, u^zeta_k> = phase * M[k][j]` with `M[k][j] = -<D g^mu_j, g^zeta_k>`.
pub fn lifted_phase(mu: C64, zeta: C64) -> C64 {
    let tau = match is_real_unit(mu, 1e-12) {
        Some(_) => real(1.0),
        None => -I * mu * mu.arg().sin().signum() / 2f64.sqrt(),
    };
    let sigma = match is_real_unit(zeta, 1e-12) {
        Some(s) => real(s),
        None => -I * zeta.arg().sin().signum() / 2f64.sqrt(),
    };
    tau * sigma.conj()
}

/// First-order scale: `mu/2` off the real axis, `mu` at `+-1`.
pub fn gamma(mu: C64) -> C64 {
    lifted_phase(mu, mu)
}

/// `(M_1, M_{-1})`: birth multiplicities at +1 and -1.
pub fn birth_multiplicities(tg: &TailedGraph) -> (usize, usize) {
    let half = tg.num_arcs() as i64 / 2;
    let nv = tg.num_vertices() as i64;
    let bip = tg.graph().is_bipartite() as i64;
    ((half - nv + 1).max(0) as usize, (half - nv + bip).max(0) as usize)
}

/// Orthonormal basis of `Ker(d) ∩ Ker(S + mu)`, the birth eigenspace at `mu = +-1`.
pub fn birth_space(ops: &VertexOps, mu: f64) -> CMat {
    let na = ops.s.nrows();
    let nv = ops.d.nrows();
    let mut stacked = CMat::zeros(nv + na, na);
    stacked.view_mut((0, 0), (nv, na)).copy_from(&ops.d);
    let shifted = &ops.s + CMat::identity(na, na) * real(mu);
    stacked.view_mut((nv, 0), (na, na)).copy_from(&shifted);
    null_space(&stacked, 1e-10)
}

/// Splits a `T`-eigenspace basis into the part vanishing on the boundary and its
/// weighted orthogonal complement. Both outputs are weighted-orthonormal.
pub fn split_boundary(tg: &TailedGraph, basis: &DMatrix<f64>) -> (CMat, CMat) {
    let bnd = tg.boundary_vertices();
    let k = basis.ncols();
    let restricted = CMat::from_fn(bnd.len(), k, |r, c| real(basis[(bnd[r], c)]));
    let null = null_space(&restricted, 1e-10);
    let comp = if null.ncols() == 0 {
        CMat::identity(k, k)
    } else {
        null_space(&null.adjoint(), 1e-10)
    };
    let b = basis.map(real);
    (&b * null, &b * comp)
}

/// Weighted-orthonormal basis of `Ker(T - t)` orthogonal to the boundary-vanishing part.
pub fn nonpersistent_basis(tg: &TailedGraph, mu: C64) -> Result<CMat> {
    let t = joukowsky_target(mu)?;
    let group = find_t_group(tg, t)?;
    Ok(split_boundary(tg, &group.basis).1)
}

fn joukowsky_target(mu: C64) -> Result<f64> {
    if (mu.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::OutOfRange(mu.norm()));
    }
    Ok(mu.re)
}

fn find_t_group(tg: &TailedGraph, t: f64) -> Result<TEigen> {
    t_spectrum(tg)
        .into_iter()
        .find(|g| (g.value - t).abs() < 1e-7)
        .ok_or_else(|| Error::ClassificationMismatch {
            value: format!("{t}"),
            expected: 1,
            found: 0,
        })
}

/// Eigenvectors of the unperturbed walk at `mu` that stay eigenvectors for every tuning:
/// lifts of boundary-vanishing `T` eigenfunctions, plus the birth space at `+-1`.
pub fn persistent_states(tg: &TailedGraph, mu: C64) -> Result<CMat> {
    let ops = VertexOps::new(tg);
    let t = joukowsky_target(mu)?;
    let mut cols: Vec<CVec> = Vec::new();
    if let Ok(group) = find_t_group(tg, t) {
        let (per, _) = split_boundary(tg, &group.basis);
        for c in 0..per.ncols() {
            cols.push(lift(&ops, mu, &per.column(c).into_owned()));
        }
    }
    if let Some(s) = is_real_unit(mu, 1e-8) {
        let b = birth_space(&ops, s);
        for c in 0..b.ncols() {
            cols.push(b.column(c).into_owned());
        }
    }
    let mut m = CMat::zeros(tg.num_arcs(), cols.len());
    for (k, c) in cols.iter().enumerate() {
        m.set_column(k, c);
    }
    Ok(m)
}

/// `M^(1)_mu = -[<D g_j, g_k>]` on the non-persistent part of `Ker(T - phi(mu))`,
/// returned with the vertex basis it is expressed in.
pub fn first_order_matrix(tg: &TailedGraph, mu: C64) -> Result<(CMat, CMat)> {
    let ops = VertexOps::new(tg);
    let g = nonpersistent_basis(tg, mu)?;
    let m = gram(&ops, &g, &g);
    let bound = ops.max_boundary_weight();
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    for &e in eig.eigenvalues.iter() {
        if e >= 0.0 || e < -bound - 1e-12 {
            return Err(Error::BoundViolated(format!(
                "first-order eigenvalue {e} outside [-{bound}, 0)"
            )));
        }
    }
    Ok((m, g))
}

// -[<D g_j, h_k>] with rows indexed by h, columns by g
fn gram(ops: &VertexOps, g: &CMat, h: &CMat) -> CMat {
    let wd = CMat::from_diagonal(&ops.weight.component_mul(&ops.boundary).map(real));
    -(h.adjoint() * wd * g)
}

/// `M^(2)_{zeta,mu} = -[<D g^mu_j, g^zeta_k>]`, rows indexed by the `zeta` basis.
pub fn second_order_matrix(tg: &TailedGraph, zeta: C64, mu: C64) -> Result<CMat> {
    let ops = VertexOps::new(tg);
    let gm = nonpersistent_basis(tg, mu)?;
    let gz = nonpersistent_basis(tg, zeta)?;
    let m = gram(&ops, &gm, &gz);
    let bound = ops.max_boundary_weight().powi(2);
    let top = crate::linalg::op_norm(&(m.adjoint() * &m));
    if top > bound + 1e-12 {
        return Err(Error::BoundViolated(format!("|M2* M2| = {top} exceeds {bound}")));
    }
    Ok(m)
}

/// Classification of one eigenvalue of the unperturbed internal walk.
#[derive(Debug, Clone, Serialize)]
pub struct ClassEntry {
    pub value: [f64; 2],
    pub inherited_mult: usize,
    pub birth_mult: usize,
    pub persistent_mult: usize,
    #[serde(rename = "T_eigenvalue")]
    pub t_eigenvalue: Option<f64>,
}

/// Splits every eigenvalue cluster of the unperturbed walk into inherited and birth parts
/// and checks the counts against the cluster multiplicities.
pub fn classify(tg: &TailedGraph, clusters: &[Cluster]) -> Result<Vec<ClassEntry>> {
    let ops = VertexOps::new(tg);
    let spec = t_spectrum(tg);
    let (m_plus, m_minus) = birth_multiplicities(tg);
    let mut expected: Vec<(C64, usize, Option<f64>, usize)> = Vec::new();
    for g in &spec {
        for mu in joukowsky_preimages(g.value)? {
            let per = split_boundary(tg, &g.basis).0.ncols();
            expected.push((mu, g.basis.ncols(), Some(g.value), per));
        }
    }
    let mut out = Vec::new();
    let mut used = vec![false; expected.len()];
    for c in clusters {
        let mu = c.value;
        let mut entry = ClassEntry {
            value: [mu.re, mu.im],
            inherited_mult: 0,
            birth_mult: 0,
            persistent_mult: 0,
            t_eigenvalue: None,
        };
        if let Some(k) = expected.iter().position(|e| (e.0 - mu).norm() < 1e-7) {
            used[k] = true;
            entry.inherited_mult = expected[k].1;
            entry.t_eigenvalue = expected[k].2;
            entry.persistent_mult = expected[k].3;
        }
        if let Some(s) = is_real_unit(mu, 1e-7) {
            let m = if s > 0.0 { m_plus } else { m_minus };
            let dim = birth_space(&ops, s).ncols();
            if dim != m {
                return Err(Error::ClassificationMismatch {
                    value: format!("{mu}"),
                    expected: m,
                    found: dim,
                });
            }
            entry.birth_mult = m;
            entry.persistent_mult += m;
        }
        let total = entry.inherited_mult + entry.birth_mult;
        if total != c.multiplicity {
            return Err(Error::ClassificationMismatch {
                value: format!("{mu}"),
                expected: total,
                found: c.multiplicity,
            });
        }
        out.push(entry);
    }
    if let Some(k) = used.iter().position(|&u| !u) {
        return Err(Error::ClassificationMismatch {
            value: format!("{}", expected[k].0),
            expected: expected[k].1,
            found: 0,
        });
    }
    Ok(out)
}

/// Orthonormal basis of the inherited subspace `span{d* f, S d* f}`.
pub fn inherited_subspace(ops: &VertexOps) -> CMat {
    let nv = ops.d_star.ncols();
    let na = ops.d_star.nrows();
    let mut m = CMat::zeros(na, 2 * nv);
    m.view_mut((0, 0), (na, nv)).copy_from(&ops.d_star);
    m.view_mut((0, nv), (na, nv)).copy_from(&(&ops.s * &ops.d_star));
    crate::linalg::orth(&m, 1e-10)
}
