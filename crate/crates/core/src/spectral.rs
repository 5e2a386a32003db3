//! Internal evolution `E = chi U chi*` and its spectral data.

use crate::coin::{CoinField, TruncatedWalk};
use crate::error::{Error, Result};
use crate::graph::{Slot, TailedGraph};
use crate::laplacian::VertexOps;
use crate::linalg::{self, real, CMat, CVec, C64};

pub const DEFAULT_TOL_CLUSTER: f64 = 1e-7;
pub const DEFAULT_TOL_CIRCLE: f64 = 1e-8;

/// Internal block of the walk for an arbitrary coin field.
pub fn internal_matrix(tg: &TailedGraph, coins: &CoinField) -> CMat {
    let na = tg.num_arcs();
    let mut e = CMat::zeros(na, na);
    for a in 0..na {
        let (o, _) = tg.arc(a);
        let row = Slot::Arc(tg.reverse(a));
        for &b in tg.incoming(o) {
            e[(a, b)] = coins.entry(tg, o, row, Slot::Arc(b));
        }
    }
    e
}

pub fn build_e(tg: &TailedGraph, eps: f64) -> Result<CMat> {
    Ok(internal_matrix(tg, &CoinField::tunable(tg, eps)?))
}

/// `(E_0, E_0^(1))` with `E_eps = E_0 + kappa E_0^(1)`, from the vertex operators:
/// `E_0 = S (2 d* d - 1)` and `E_0^(1) = -S d* D d`.
pub fn build_e_split(tg: &TailedGraph) -> (CMat, CMat) {
    let ops = VertexOps::new(tg);
    let na = tg.num_arcs();
    let e0 = &ops.s * (&ops.d_star * &ops.d * real(2.0) - CMat::identity(na, na));
    let e1 = -(&ops.s * &ops.d_star * ops.boundary_matrix() * &ops.d);
    (e0, e1)
}

/// One eigenvalue cluster with its Riesz projection.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Mean of the clustered eigenvalues.
    pub value: C64,
    pub multiplicity: usize,
    pub projector: CMat,
    /// `(E - value) P`, cleared when negligible.
    pub nilpotent: CMat,
    /// Orthonormal basis of the range of the projection.
    pub basis: CMat,
    pub on_circle: bool,
}

impl Cluster {
    pub fn is_semisimple(&self) -> bool {
        self.nilpotent.iter().all(|z| *z == real(0.0))
    }
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub clusters: Vec<Cluster>,
    pub warnings: Vec<Error>,
}

impl SpectralData {
    pub fn resonances(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| !c.on_circle)
    }

    pub fn max_modulus(&self) -> f64 {
        self.clusters.iter().fold(0.0, |m, c| m.max(c.value.norm()))
    }

    /// Cluster closest to `mu`.
    pub fn nearest(&self, mu: C64) -> Option<&Cluster> {
        self.clusters
            .iter()
            .min_by(|a, b| (a.value - mu).norm().total_cmp(&(b.value - mu).norm()))
    }

    /// Sum of all projections; equals the identity up to rounding.
    pub fn projector_sum(&self) -> CMat {
        let n = self.clusters.first().map_or(0, |c| c.projector.nrows());
        self.clusters
            .iter()
            .fold(CMat::zeros(n, n), |acc, c| acc + &c.projector)
    }
}

/// Clusters the eigenvalues of `e` and computes projections and nilpotent parts.
pub fn spectral_decompose(e: &CMat, tol_cluster: f64, tol_circle: f64) -> Result<SpectralData> {
    let n = e.nrows();
    if n == 0 {
        return Ok(SpectralData {
            clusters: Vec::new(),
            warnings: Vec::new(),
        });
    }
    let (q, t) = linalg::schur(e);
    let diag: Vec<C64> = t.diagonal().iter().copied().collect();
    let groups = linalg::cluster_points(&diag, tol_cluster);
    let scale = e.norm().max(1.0);
    let mut clusters = Vec::with_capacity(groups.len());
    for g in &groups {
        let mut member = vec![false; n];
        for &i in g {
            member[i] = true;
        }
        let (mut qq, mut tt) = (q.clone(), t.clone());
        let p = linalg::reorder_front(&mut qq, &mut tt, &member);
        let value = (0..p).map(|k| tt[(k, k)]).sum::<C64>() / real(p as f64);
        let projector = linalg::leading_projector(&qq, &tt, p);
        let mut nilpotent = (e - CMat::identity(n, n) * value) * &projector;
        if nilpotent.norm() < 1e-8 * scale {
            nilpotent.fill(real(0.0));
        }
        clusters.push(Cluster {
            value,
            multiplicity: p,
            projector,
            nilpotent,
            basis: qq.columns(0, p).into_owned(),
            on_circle: (value.norm() - 1.0).abs() < tol_circle,
        });
    }
    clusters.sort_by(|a, b| {
        let ka = a.value.arg().rem_euclid(std::f64::consts::TAU);
        let kb = b.value.arg().rem_euclid(std::f64::consts::TAU);
        ka.total_cmp(&kb).then(b.value.norm().total_cmp(&a.value.norm()))
    });
    let mut warnings = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let close = groups[i].iter().any(|&a| {
                groups[j]
                    .iter()
                    .any(|&b| (diag[a] - diag[b]).norm() < 10.0 * tol_cluster)
            });
            if close {
                warnings.push(Error::ClusterAmbiguity(
                    format!("{}", diag[groups[i][0]]),
                    format!("{}", diag[groups[j][0]]),
                ));
            }
        }
    }
    Ok(SpectralData { clusters, warnings })
}

/// Total projection `-(1/2 pi i) \oint (E - z)^{-1} dz` over the circle `|z - center| = radius`,
/// by the trapezoidal rule. Returns the projection and the number of enclosed eigenvalues.
pub fn contour_projection(e: &CMat, center: C64, radius: f64, nodes: usize) -> Result<(CMat, usize)> {
    let n = e.nrows();
    let eig = linalg::eigenvalues(e);
    let gap = eig
        .iter()
        .map(|l| ((l - center).norm() - radius).abs())
        .fold(f64::INFINITY, f64::min);
    if gap < 1e-8 * radius.max(1.0) {
        return Err(Error::SingularResolventNearContour { distance: gap });
    }
    let inside = eig.iter().filter(|l| (*l - center).norm() < radius).count();
    let mut p = CMat::zeros(n, n);
    for k in 0..nodes {
        let w = linalg::cis(std::f64::consts::TAU * k as f64 / nodes as f64) * radius;
        let shifted = e - CMat::identity(n, n) * (center + w);
        let inv = shifted
            .try_inverse()
            .ok_or(Error::SingularResolventNearContour { distance: 0.0 })?;
        p -= inv * w;
    }
    Ok((p / real(nodes as f64), inside))
}

/// Residual of the outgoing extension of an eigenvector `u` of `E_eps` at `mu`, inside the unit disk.
/// The extension vanishes on incoming tail arcs and grows like `mu^{-l}` along outgoing ones; it is
/// normalised to unit maximum before the residual `max |(U - mu) psi|` is taken over the window.
pub fn verify_outgoing(tg: &TailedGraph, eps: f64, mu: C64, u: &CVec, depth: usize) -> Result<f64> {
    if mu.norm() >= 1.0 - DEFAULT_TOL_CIRCLE || mu.norm() == 0.0 {
        return Err(Error::NotAResonance(mu.norm()));
    }
    let walk = TruncatedWalk::new(tg, eps, depth)?;
    let mut psi = walk.embed(u);
    let first = walk.apply_truncated(&psi);
    for j in 0..tg.num_tails() {
        let mut amp = first[walk.outgoing(j, 1)] / mu;
        for l in 1..=depth {
            psi[walk.outgoing(j, l)] = amp;
            amp /= mu;
        }
    }
    let top = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    psi /= real(top);
    let r = walk.apply_truncated(&psi) - &psi * mu;
    Ok(r.iter().fold(0.0, |m, z| m.max(z.norm())))
}

/// Residual `max |(U - mu) chi* u|` of the zero extension of an internal state.
pub fn closed_residual(tg: &TailedGraph, eps: f64, mu: C64, u: &CVec, depth: usize) -> Result<f64> {
    let walk = TruncatedWalk::new(tg, eps, depth)?;
    let psi = walk.embed(u);
    let r = walk.apply(&psi)? - &psi * mu;
    Ok(r.iter().fold(0.0, |m, z| m.max(z.norm())))
}
