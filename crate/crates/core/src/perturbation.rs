//! Two-stage reduction of the eigenvalue groups of `E_kappa = E_0 + kappa E_0^(1)`,
//! `kappa = 1 - e^{i pi eps}`, around the unperturbed eigenvalues on the unit circle.
//!
//! Stage one diagonalises `P E_1 P` on `Ran P`; stage two diagonalises the next
//! reduced operator `-P1 E_1 S E_1 P1` on every stage-one eigenspace.

use crate::coin::{kappa, CoinField};
use crate::error::{Error, Result};
use crate::graph::TailedGraph;
use crate::laplacian::VertexOps;
use crate::linalg::{self, real, CMat, C64};
use crate::scattering::{Ports, Scatterer};
use crate::spectral::{build_e, build_e_split, contour_projection, spectral_decompose, SpectralData};
use serde::Serialize;
use std::f64::consts::PI;

/// Tolerance for grouping stage-one and stage-two eigenvalues.
pub const STAGE_TOL: f64 = 1e-7;

/// Restriction of an operator to the range of a projection `P = W Z*` with `Z* W = 1`.
#[derive(Debug, Clone)]
struct Compression {
    w: CMat,
    zh: CMat,
}

impl Compression {
    fn new(p: &CMat) -> Self {
        let w = linalg::orth(p, 1e-8);
        let zh = w.adjoint() * p;
        Compression { w, zh }
    }

    fn restrict(&self, m: &CMat) -> CMat {
        &self.zh * m * &self.w
    }

    fn lift(&self, m: &CMat) -> CMat {
        &self.w * m * &self.zh
    }
}

/// Reduced resolvent `S` at cluster `k`: `(A - mu) S = 1 - P`, `S P = P S = 0`.
pub fn reduced_resolvent(spec: &SpectralData, k: usize) -> CMat {
    let mu = spec.clusters[k].value;
    let n = spec.clusters[k].projector.nrows();
    let mut s = CMat::zeros(n, n);
    for (j, c) in spec.clusters.iter().enumerate() {
        if j == k {
            continue;
        }
        let mut term = c.projector.clone();
        let mut denom = mu - c.value;
        for _ in 0..c.multiplicity {
            s -= &term / denom;
            if c.is_semisimple() {
                break;
            }
            term = &c.nilpotent * term;
            denom *= mu - c.value;
        }
    }
    s
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

// S^(0) = -P, S^(q) = S^q
fn resolvent_power(p: &CMat, s: &CMat, q: usize) -> CMat {
    if q == 0 {
        -p.clone()
    } else {
        (1..q).fold(s.clone(), |acc, _| acc * s)
    }
}

/// `sum_{q_1 + .. + q_{r+1} = total} S^(q_1) A S^(q_2) ... A S^(q_{r+1})` with `r` factors of `A`.
fn kato_sum(p: &CMat, s: &CMat, a: &CMat, r: usize, total: usize) -> CMat {
    let n = p.nrows();
    let mut out = CMat::zeros(n, n);
    for q in compositions(total, r + 1) {
        let mut term = resolvent_power(p, s, q[0]);
        for &qi in &q[1..] {
            term = term * a * resolvent_power(p, s, qi);
        }
        out += term;
    }
    out
}

/// Coefficients `P^(1..=order)` of the total projection `P_kappa = P + sum kappa^n P^(n)`
/// for a semisimple eigenvalue.
pub fn projection_coefficients(p: &CMat, s: &CMat, a1: &CMat, order: usize) -> Vec<CMat> {
    (1..=order)
        .map(|r| {
            let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
            kato_sum(p, s, a1, r, r) * real(sign)
        })
        .collect()
}

/// Coefficient of `kappa^r` in `kappa^{-1} (A_kappa - mu) P_kappa`; `r = 0` gives `P A1 P`.
pub fn reduced_coefficient(p: &CMat, s: &CMat, a1: &CMat, r: usize) -> CMat {
    let sign = if r.is_multiple_of(2) { 1.0 } else { -1.0 };
    kato_sum(p, s, a1, r + 1, r) * real(sign)
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondOrder {
    #[serde(serialize_with = "ser_c64")]
    pub mu2: C64,
    pub multiplicity: usize,
    /// Size of the largest Jordan block of the stage-two operator at `mu2`.
    pub jordan: usize,
    pub persistent: bool,
    #[serde(skip)]
    pub projector: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstOrder {
    #[serde(serialize_with = "ser_c64")]
    pub mu1: C64,
    pub multiplicity: usize,
    pub second: Vec<SecondOrder>,
    #[serde(skip)]
    pub projector: CMat,
}

/// Reduction data for one unperturbed eigenvalue.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub index: usize,
    pub mu: C64,
    pub m: usize,
    pub projector: CMat,
    pub resolvent: CMat,
    pub groups: Vec<FirstOrder>,
}

fn ser_c64<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&z.re)?;
    seq.serialize_element(&z.im)?;
    seq.end()
}

fn jordan_index(c: &crate::spectral::Cluster) -> usize {
    let mut k = 1;
    let mut d = c.nilpotent.clone();
    while d.norm() > 0.0 && k < c.multiplicity {
        d = &c.nilpotent * d;
        k += 1;
        if d.norm() < 1e-10 {
            break;
        }
    }
    k
}

/// Unperturbed walk, its first-order coefficient and spectral data.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub tg: TailedGraph,
    pub e0: CMat,
    pub e1: CMat,
    pub spectral: SpectralData,
}

impl Expansion {
    pub fn new(tg: &TailedGraph) -> Result<Self> {
        let (e0, e1) = build_e_split(tg);
        let spectral = spectral_decompose(
            &e0,
            crate::spectral::DEFAULT_TOL_CLUSTER,
            crate::spectral::DEFAULT_TOL_CIRCLE,
        )?;
        Ok(Expansion {
            tg: tg.clone(),
            e0,
            e1,
            spectral,
        })
    }

    pub fn len(&self) -> usize {
        self.spectral.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectral.clusters.is_empty()
    }

    pub fn value(&self, k: usize) -> C64 {
        self.spectral.clusters[k].value
    }

    /// Distance from cluster `k` to the nearest other cluster.
    pub fn gap(&self, k: usize) -> f64 {
        let mu = self.value(k);
        self.spectral
            .clusters
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, c)| (c.value - mu).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contour_radius(&self, k: usize) -> f64 {
        0.5 * self.gap(k)
    }

    /// Total projection of `E_kappa` for the group of cluster `k`, by contour integration.
    pub fn total_projection(&self, k: usize, kap: C64) -> Result<CMat> {
        let ek = &self.e0 + &self.e1 * kap;
        let mu = self.value(k);
        let (p, inside) = contour_projection(&ek, mu, self.contour_radius(k), 256)?;
        let m = self.spectral.clusters[k].multiplicity;
        if inside != m {
            return Err(Error::GroupEscapedContour {
                center: format!("{mu}"),
                expected: m,
                found: inside,
            });
        }
        Ok(p)
    }

    pub fn projection_coefficients(&self, k: usize, order: usize) -> Vec<CMat> {
        let p = &self.spectral.clusters[k].projector;
        projection_coefficients(p, &reduced_resolvent(&self.spectral, k), &self.e1, order)
    }

    /// `|| P_kappa - sum_{n <= 3} kappa^n P^(n) ||` at `kappa` and `kappa / 2`, and the observed order.
    pub fn projection_order(&self, k: usize, kap: C64) -> Result<(f64, f64, f64)> {
        let coeffs = self.projection_coefficients(k, 3);
        let p0 = &self.spectral.clusters[k].projector;
        let err = |x: C64| -> Result<f64> {
            let mut approx = p0.clone();
            let mut pow = real(1.0);
            for c in &coeffs {
                pow *= x;
                approx += c * pow;
            }
            Ok((self.total_projection(k, x)? - approx).norm())
        };
        let e1 = err(kap)?;
        let e2 = err(kap / 2.0)?;
        Ok((e1, e2, (e1 / e2).log2()))
    }

    /// Two-stage reduction at cluster `k`.
    pub fn reduce(&self, k: usize) -> Result<Reduction> {
        let cl = &self.spectral.clusters[k];
        let p = cl.projector.clone();
        let s = reduced_resolvent(&self.spectral, k);
        let a1 = &self.e1;
        let comp = Compression::new(&p);
        let k1 = comp.restrict(&(&p * a1 * &p));
        let stage1 = spectral_decompose(&k1, STAGE_TOL, 0.0)?;
        let a11 = reduced_coefficient(&p, &s, a1, 1);
        let mut groups = Vec::new();
        for c1 in &stage1.clusters {
            if !c1.is_semisimple() {
                return Err(Error::Stage1NotSemisimple(format!("{} / {}", cl.value, c1.value)));
            }
            let p1 = comp.lift(&c1.projector);
            let comp1 = Compression::new(&p1);
            let k2 = comp1.restrict(&(&p1 * &a11 * &p1));
            let stage2 = spectral_decompose(&k2, STAGE_TOL, 0.0)?;
            let second = stage2
                .clusters
                .iter()
                .map(|c2| {
                    let p2 = comp1.lift(&c2.projector);
                    let persistent = (a1 * &p2).norm() < 1e-9;
                    SecondOrder {
                        mu2: c2.value,
                        multiplicity: c2.multiplicity,
                        jordan: jordan_index(c2),
                        persistent,
                        projector: p2,
                    }
                })
                .collect();
            groups.push(FirstOrder {
                mu1: c1.value,
                multiplicity: c1.multiplicity,
                second,
                projector: p1,
            });
        }
        Ok(Reduction {
            index: k,
            mu: cl.value,
            m: cl.multiplicity,
            projector: p,
            resolvent: s,
            groups,
        })
    }

    pub fn ledger(&self) -> Result<Vec<Reduction>> {
        (0..self.len()).map(|k| self.reduce(k)).collect()
    }

    /// Stage-two operator from the sum over the other unperturbed eigenvalues,
    /// `-sum_{zeta != mu} (zeta - mu)^{-1} P1 E_1 P_zeta E_1 P1`.
    pub fn second_order_by_sum(&self, red: &Reduction, g: usize) -> CMat {
        let p1 = &red.groups[g].projector;
        let n = p1.nrows();
        let mut out = CMat::zeros(n, n);
        for (j, c) in self.spectral.clusters.iter().enumerate() {
            if j == red.index {
                continue;
            }
            out -= p1 * &self.e1 * &c.projector * &self.e1 * p1 / (c.value - red.mu);
        }
        out
    }

    /// `P1 Ã^(1,1) P1` on the stage-one eigenspace `g`.
    pub fn second_order_operator(&self, red: &Reduction, g: usize) -> CMat {
        let p1 = &red.groups[g].projector;
        p1 * reduced_coefficient(&red.projector, &red.resolvent, &self.e1, 1) * p1
    }

    /// Upper bound on `|mu^(2)|` in terms of the spectral gap and the boundary weights.
    pub fn mu2_bound(&self, k: usize) -> f64 {
        let w = VertexOps::new(&self.tg).max_boundary_weight();
        (self.len() as f64 - 1.0) * w * w / self.gap(k)
    }

    /// Eigenvalues of `E_eps` near cluster `red.mu`, assigned to reduction branches.
    pub fn track(&self, red: &Reduction, eps: f64) -> Result<Vec<Tracked>> {
        let e = build_e(&self.tg, eps)?;
        let r = self.contour_radius(red.index);
        let near: Vec<C64> = linalg::eigenvalues(&e)
            .into_iter()
            .filter(|z| (z - red.mu).norm() < r)
            .collect();
        if near.len() != red.m {
            return Err(Error::GroupEscapedContour {
                center: format!("{}", red.mu),
                expected: red.m,
                found: near.len(),
            });
        }
        let kap = kappa(eps);
        // stage one: capacity-constrained nearest assignment to mu + kappa mu1
        let firsts: Vec<(usize, C64)> = red
            .groups
            .iter()
            .enumerate()
            .flat_map(|(g, f)| std::iter::repeat_n((g, red.mu + kap * f.mu1), f.multiplicity))
            .collect();
        let a1 = assign(&near, &firsts.iter().map(|x| x.1).collect::<Vec<_>>());
        let mut out = Vec::with_capacity(near.len());
        for (g, grp) in red.groups.iter().enumerate() {
            let members: Vec<C64> = (0..near.len())
                .filter(|&i| firsts[a1[i]].0 == g)
                .map(|i| near[i])
                .collect();
            let slots: Vec<(usize, C64)> = grp
                .second
                .iter()
                .enumerate()
                .flat_map(|(s, so)| {
                    std::iter::repeat_n(
                        (s, second_order_prediction(red.mu, grp.mu1, so.mu2, eps)),
                        so.multiplicity,
                    )
                })
                .collect();
            let a2 = assign(&members, &slots.iter().map(|x| x.1).collect::<Vec<_>>());
            for (i, &z) in members.iter().enumerate() {
                let (s, pred) = slots[a2[i]];
                out.push(Tracked {
                    group: g,
                    sub: s,
                    value: z,
                    first: red.mu + kap * grp.mu1,
                    second: pred,
                });
            }
        }
        Ok(out)
    }

    /// Verdicts of the assumptions behind the resonant scattering limit for stage-one group `g`.
    pub fn resonance_conditions(&self, red: &Reduction, g: usize, probe_eps: f64) -> Result<ResonanceConditions> {
        let grp = &red.groups[g];
        let tracked = self.track(red, probe_eps)?;
        let mut single = true;
        for (s, so) in grp.second.iter().enumerate() {
            let vals: Vec<C64> = tracked
                .iter()
                .filter(|t| t.group == g && t.sub == s)
                .map(|t| t.value)
                .collect();
            let spread = vals
                .iter()
                .flat_map(|a| vals.iter().map(move |b| (a - b).norm()))
                .fold(0.0, f64::max);
            if so.multiplicity > 1 && spread > 10.0 * crate::spectral::DEFAULT_TOL_CLUSTER {
                single = false;
            }
        }
        let mut sum = CMat::zeros(red.projector.nrows(), red.projector.ncols());
        for f in &red.groups {
            for so in &f.second {
                sum += &so.projector;
            }
        }
        let resolved = (sum - &red.projector).norm() < 1e-9;
        let degrees: Vec<usize> = self.tg.boundary_vertices().iter().map(|&v| self.tg.degree(v)).collect();
        let nu_minus = *degrees.iter().min().unwrap_or(&0) as f64;
        let nu_plus = *degrees.iter().max().unwrap_or(&0) as f64;
        let lhs = 2.0 / self.gap(red.index) * (self.len() as f64 - 1.0) / (nu_minus * nu_minus);
        let rhs = 0.5 / nu_plus * (1.0 - 1.0 / nu_minus);
        let c = grp.mu1 / red.mu;
        let beta_min = grp
            .second
            .iter()
            .filter(|so| !so.persistent)
            .map(|so| (red.mu * c * (c + 1.0) - so.mu2 * 2.0).norm())
            .fold(f64::INFINITY, f64::min);
        Ok(ResonanceConditions {
            single_eigenvalue: single,
            resolved,
            degrees_ok: nu_minus >= 3.0,
            estimate: nu_minus >= 3.0 && lhs < rhs,
            estimate_lhs: lhs,
            estimate_rhs: rhs,
            beta_min,
        })
    }

    /// Limit `Sigma_0^(1)` of `Sigma_eps(lambda_eps) - 1` along the stage-one branch `g`,
    /// where `e^{-i lambda_eps} = mu e^{-i pi c eps}` and `mu1 = c mu`.
    pub fn resonant_limit(&self, red: &Reduction, g: usize) -> Result<ResonantLimit> {
        let grp = &red.groups[g];
        if grp.mu1.norm() < 1e-9 {
            return Err(Error::AssumptionViolated(format!(
                "branch at {} does not move at first order",
                red.mu
            )));
        }
        let ports = Ports::new(&self.tg, &CoinField::first_order(&self.tg)?);
        let mu = red.mu;
        let c = grp.mu1 / mu;
        let base = mu * c * (c + 1.0);
        let n = ports.direct.nrows();
        let mut sigma = CMat::zeros(n, n);
        let mut rhos = Vec::new();
        for so in grp.second.iter().filter(|so| !so.persistent) {
            let beta = base - so.mu2 * 2.0;
            if beta.norm() < 1e-12 {
                return Err(Error::AssumptionViolated(format!("vanishing denominator at {mu}")));
            }
            let rho = -so.mu2 * 2.0 / beta;
            let coef = (real(1.0) - rho.powi(so.jordan as i32)) * 2.0 / base;
            sigma += (&ports.collect * &so.projector * &ports.inject) * coef;
            rhos.push(rho);
        }
        Ok(ResonantLimit {
            mu,
            c: c.re,
            sigma,
            rhos,
        })
    }
}

/// Greedy capacity-one nearest assignment of `points` to `slots` (equal lengths).
fn assign(points: &[C64], slots: &[C64]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(points.len() * slots.len());
    for (i, p) in points.iter().enumerate() {
        for (j, s) in slots.iter().enumerate() {
            pairs.push(((p - s).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![usize::MAX; points.len()];
    let mut taken = vec![false; slots.len()];
    for (_, i, j) in pairs {
        if out[i] == usize::MAX && !taken[j] {
            out[i] = j;
            taken[j] = true;
        }
    }
    out
}

/// `mu e^{-i pi c eps} + (eps^2 pi^2 / 2)(mu c^2 + mu c - 2 mu2)` with `mu1 = c mu`.
pub fn second_order_prediction(mu: C64, mu1: C64, mu2: C64, eps: f64) -> C64 {
    let c = mu1 / mu;
    mu * (-crate::linalg::I * PI * c * eps).exp() + (mu * c * c + mu * c - mu2 * 2.0) * (eps * eps * PI * PI / 2.0)
}

/// One eigenvalue of `E_eps` with the branch it was assigned to.
#[derive(Debug, Clone, Copy)]
pub struct Tracked {
    pub group: usize,
    pub sub: usize,
    pub value: C64,
    pub first: C64,
    pub second: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceConditions {
    /// Every stage-two branch hosts a single eigenvalue of `E_eps`.
    pub single_eigenvalue: bool,
    /// Stage-two projections add up to the unperturbed eigenprojection.
    pub resolved: bool,
    /// All boundary degrees are at least three.
    pub degrees_ok: bool,
    /// The degree estimate with the smallest admissible constant `c = 1`.
    pub estimate: bool,
    pub estimate_lhs: f64,
    pub estimate_rhs: f64,
    /// Smallest `|mu c (c + 1) - 2 mu2|` over non-persistent stage-two branches.
    pub beta_min: f64,
}

impl ResonanceConditions {
    /// Conditions needed for the resonant limit to be computable and meaningful.
    pub fn usable(&self) -> bool {
        self.single_eigenvalue && self.resolved && self.beta_min > 1e-9
    }
}

#[derive(Debug, Clone)]
pub struct ResonantLimit {
    pub mu: C64,
    /// Real first-order rate `mu1 / mu`.
    pub c: f64,
    pub sigma: CMat,
    pub rhos: Vec<C64>,
}

impl ResonantLimit {
    /// `lambda_eps` with `e^{-i lambda_eps} = mu e^{-i pi c eps}`.
    pub fn lambda(&self, eps: f64) -> f64 {
        -self.mu.arg() + PI * self.c * eps
    }

    /// `|| Sigma_eps(lambda_eps) - 1 - Sigma_0^(1) ||`.
    pub fn defect(&self, tg: &TailedGraph, eps: f64) -> Result<f64> {
        let sc = Scatterer::new(
            tg,
            eps,
            crate::spectral::DEFAULT_TOL_CLUSTER,
            crate::spectral::DEFAULT_TOL_CIRCLE,
        )?;
        let s = sc.sigma(self.lambda(eps));
        let n = s.nrows();
        Ok((s - CMat::identity(n, n) - &self.sigma).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn c4_three() -> TailedGraph {
        TailedGraph::with_single_tails(Graph::cycle(4).unwrap(), &[0, 1, 2]).unwrap()
    }

    #[test]
    fn reduced_resolvent_identities() {
        let ex = Expansion::new(&c4_three()).unwrap();
        let n = ex.e0.nrows();
        for k in 0..ex.len() {
            let s = reduced_resolvent(&ex.spectral, k);
            let p = &ex.spectral.clusters[k].projector;
            let lhs = (&ex.e0 - CMat::identity(n, n) * ex.value(k)) * &s;
            assert!((lhs - (CMat::identity(n, n) - p)).norm() < 1e-10);
            assert!((&s * p).norm() < 1e-10 && (p * &s).norm() < 1e-10);
        }
    }

    #[test]
    fn first_coefficient_is_standard() {
        let ex = Expansion::new(&c4_three()).unwrap();
        let p = &ex.spectral.clusters[0].projector;
        let s = reduced_resolvent(&ex.spectral, 0);
        let c = projection_coefficients(p, &s, &ex.e1, 1);
        let want = -(p * &ex.e1 * &s) - &s * &ex.e1 * p;
        assert!((&c[0] - want).norm() < 1e-13);
        assert!((reduced_coefficient(p, &s, &ex.e1, 0) - p * &ex.e1 * p).norm() < 1e-13);
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(2, 3).len(), 6);
        assert_eq!(compositions(3, 4).len(), 20);
    }

    #[test]
    fn reduction_resolves_projection() {
        let ex = Expansion::new(&c4_three()).unwrap();
        for red in ex.ledger().unwrap() {
            let mut sum = CMat::zeros(8, 8);
            for g in &red.groups {
                for s in &g.second {
                    sum += &s.projector;
                }
            }
            assert!((sum - &red.projector).norm() < 1e-9);
        }
    }

    #[test]
    fn unit_circle_value_is_fixed_at_zero_eps() {
        let ex = Expansion::new(&c4_three()).unwrap();
        for k in 0..ex.len() {
            let red = ex.reduce(k).unwrap();
            for g in &red.groups {
                for s in &g.second {
                    assert_eq!(second_order_prediction(red.mu, g.mu1, s.mu2, 0.0), red.mu);
                }
            }
        }
    }

    #[test]
    fn assignment_is_a_permutation() {
        let pts = [real(0.0), real(1.0), real(1.1)];
        let slots = [real(1.05), real(0.1), real(1.0)];
        let a = assign(&pts, &slots);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
        assert_eq!(a[0], 1);
    }

    fn k4(tails: &[usize]) -> TailedGraph {
        TailedGraph::with_single_tails(Graph::complete(4).unwrap(), tails).unwrap()
    }

    #[test]
    fn vanishing_identities() {
        // E_1 and its adjoint kill birth states; E_1 kills every persistent state
        for tg in [c4_three(), k4(&[0, 1, 2])] {
            let ex = Expansion::new(&tg).unwrap();
            let ops = VertexOps::new(&tg);
            for s in [1.0, -1.0] {
                let b = crate::laplacian::birth_space(&ops, s);
                assert!((&ex.e1 * &b).norm() < 1e-12);
                assert!((ex.e1.adjoint() * &b).norm() < 1e-12);
            }
            for k in 0..ex.len() {
                let per = crate::laplacian::persistent_states(&tg, ex.value(k)).unwrap();
                assert!((&ex.e1 * &per).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stage_two_operator_equals_sum_over_other_eigenvalues() {
        for tg in [c4_three(), k4(&[0, 1, 2]), k4(&[0, 1, 2, 3])] {
            let ex = Expansion::new(&tg).unwrap();
            for red in ex.ledger().unwrap() {
                for g in 0..red.groups.len() {
                    let a = ex.second_order_operator(&red, g);
                    let b = ex.second_order_by_sum(&red, g);
                    assert!((a - b).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn second_order_coefficients_respect_bound() {
        for tg in [c4_three(), k4(&[0, 1, 2]), k4(&[0, 1, 2, 3])] {
            let ex = Expansion::new(&tg).unwrap();
            for red in ex.ledger().unwrap() {
                let bound = ex.mu2_bound(red.index);
                for g in &red.groups {
                    for s in &g.second {
                        assert!(s.mu2.norm() <= bound, "{} > {bound}", s.mu2);
                    }
                }
            }
        }
    }

    #[test]
    fn eigenvalues_depend_continuously_on_eps() {
        let tg = k4(&[0, 1, 2]);
        let ex = Expansion::new(&tg).unwrap();
        for red in ex.ledger().unwrap() {
            let t1 = ex.track(&red, 1e-3).unwrap();
            let t2 = ex.track(&red, 5e-4).unwrap();
            let d1 = t1.iter().map(|t| (t.value - red.mu).norm()).fold(0.0, f64::max);
            let d2 = t2.iter().map(|t| (t.value - red.mu).norm()).fold(0.0, f64::max);
            assert!(d1 < 1e-2 && d2 <= d1 + 1e-14);
        }
    }

    #[test]
    fn moving_branches_have_real_negative_rate() {
        for tg in [c4_three(), k4(&[0, 1, 2])] {
            let ex = Expansion::new(&tg).unwrap();
            for red in ex.ledger().unwrap() {
                for g in &red.groups {
                    let c = g.mu1 / red.mu;
                    let moving = g.second.iter().any(|s| !s.persistent);
                    if moving {
                        assert!(c.im.abs() < 1e-12 && c.re < -1e-3, "c = {c}");
                    } else {
                        assert!(g.mu1.norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn resonant_limit_needs_motion() {
        let ex = Expansion::new(&c4_three()).unwrap();
        let red = ex.reduce(0).unwrap();
        let still = red.groups.iter().position(|g| g.mu1.norm() < 1e-9).unwrap();
        assert!(matches!(
            ex.resonant_limit(&red, still),
            Err(Error::AssumptionViolated(_))
        ));
        let moving = red.groups.iter().position(|g| g.mu1.norm() > 1e-9).unwrap();
        let lim = ex.resonant_limit(&red, moving).unwrap();
        assert!((lim.lambda(0.0) + red.mu.arg()).abs() < 1e-15);
    }
}
