//! Stationary scattering: iteration of the internal evolution driven by an incoming
//! plane wave, its closed-form limit through the resonance expansion, and the
//! scattering matrix relating incoming to outgoing tail amplitudes.

use crate::coin::CoinField;
use crate::error::{Error, Result};
use crate::graph::{Slot, TailedGraph};
use crate::linalg::{cis, real, CMat, CVec, C64};
use crate::spectral::{internal_matrix, spectral_decompose, SpectralData};
use std::f64::consts::TAU;

/// Couplings between the internal arcs and the first arcs of the tails.
#[derive(Debug, Clone)]
pub struct Ports {
    /// `chi U phi_0 = inject alpha` for a unit incoming wave with amplitudes `alpha`.
    pub inject: CMat,
    /// `(U chi* v)(a#_{j,1})` as a map from internal states to tails.
    pub collect: CMat,
    /// `(U phi_0)(a#_{j,1})`: direct reflection among tails sharing a vertex.
    pub direct: CMat,
}

impl Ports {
    pub fn new(tg: &TailedGraph, coins: &CoinField) -> Self {
        let na = tg.num_arcs();
        let nt = tg.num_tails();
        let mut inject = CMat::zeros(na, nt);
        let mut collect = CMat::zeros(nt, na);
        let mut direct = CMat::zeros(nt, nt);
        for a in 0..na {
            let (o, _) = tg.arc(a);
            for &k in tg.tails_at(o) {
                inject[(a, k)] = coins.entry(tg, o, Slot::Arc(tg.reverse(a)), Slot::Tail(k));
            }
        }
        for j in 0..nt {
            let v = tg.tail_vertex(j);
            for &b in tg.incoming(v) {
                collect[(j, b)] = coins.entry(tg, v, Slot::Tail(j), Slot::Arc(b));
            }
            for &k in tg.tails_at(v) {
                direct[(j, k)] = coins.entry(tg, v, Slot::Tail(j), Slot::Tail(k));
            }
        }
        Ports {
            inject,
            collect,
            direct,
        }
    }
}

/// Everything needed to evaluate the scattering matrix at a fixed tuning.
#[derive(Debug, Clone)]
pub struct Scatterer {
    pub eps: f64,
    pub e: CMat,
    pub ports: Ports,
    pub spectral: SpectralData,
}

/// Result of the stationary iteration.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub state: CVec,
    pub steps: usize,
    /// Near-circle clusters that still overlap the source.
    pub warnings: Vec<String>,
}

impl Scatterer {
    pub fn new(tg: &TailedGraph, eps: f64, tol_cluster: f64, tol_circle: f64) -> Result<Self> {
        let coins = CoinField::tunable(tg, eps)?;
        let e = internal_matrix(tg, &coins);
        let spectral = spectral_decompose(&e, tol_cluster, tol_circle)?;
        Ok(Scatterer {
            eps,
            e,
            ports: Ports::new(tg, &coins),
            spectral,
        })
    }

    pub fn num_tails(&self) -> usize {
        self.ports.direct.nrows()
    }

    /// `v = lim e^{i lambda t} u_t` from the resonance expansion, for the source `f`.
    pub fn limit_closed_form(&self, lambda: f64, f: &CVec) -> CVec {
        let z = cis(-lambda);
        let mut v = CVec::zeros(f.len());
        for c in self.spectral.resonances() {
            let mut term = &c.projector * f;
            let mut denom = z - c.value;
            let mut s = 0;
            loop {
                v += &term / denom;
                s += 1;
                if s >= c.multiplicity || c.is_semisimple() {
                    break;
                }
                term = &c.nilpotent * term;
                denom *= z - c.value;
            }
        }
        v
    }

    /// Rescaled iteration `w_{t+1} = e^{i lambda} (E w_t + f)` from `w_0 = 0`; stops once the
    /// increment stays below `tol` for five consecutive steps.
    pub fn limit_iterative(&self, lambda: f64, f: &CVec, tol: f64, max_steps: usize) -> Result<Iterate> {
        let phase = cis(lambda);
        let mut warnings = Vec::new();
        for c in self.spectral.clusters.iter().filter(|c| c.on_circle) {
            let overlap = (&c.projector * f).norm();
            if overlap > 1e-7 {
                warnings.push(format!(
                    "source overlaps unit-circle eigenvalue {} by {overlap:e}",
                    c.value
                ));
            }
        }
        let mut w = CVec::zeros(f.len());
        let mut quiet = 0;
        let mut inc = f64::INFINITY;
        for step in 1..=max_steps {
            let next = (&self.e * &w + f) * phase;
            inc = (&next - &w).iter().fold(0.0, |m, z| m.max(z.norm()));
            w = next;
            quiet = if inc < tol { quiet + 1 } else { 0 };
            if quiet >= 5 {
                return Ok(Iterate {
                    state: w,
                    steps: step,
                    warnings,
                });
            }
        }
        Err(Error::NoConvergence {
            steps: max_steps,
            increment: inc,
        })
    }

    /// `e^{-i lambda} alpha# = (U chi* v + U phi_0)(a#_{.,1})`.
    pub fn outgoing(&self, v: &CVec, incoming: &CVec) -> CVec {
        &self.ports.collect * v + &self.ports.direct * incoming
    }

    /// Scattering matrix from the resonance expansion.
    pub fn sigma(&self, lambda: f64) -> CMat {
        let n = self.num_tails();
        let mut out = CMat::zeros(n, n);
        for k in 0..n {
            let mut alpha = CVec::zeros(n);
            alpha[k] = real(1.0);
            let f = &self.ports.inject * &alpha;
            let v = self.limit_closed_form(lambda, &f);
            out.set_column(k, &self.outgoing(&v, &alpha));
        }
        out
    }

    /// Scattering matrix from the stationary iteration, column by column.
    pub fn sigma_iterative(&self, lambda: f64, tol: f64, max_steps: usize) -> Result<CMat> {
        let n = self.num_tails();
        let mut out = CMat::zeros(n, n);
        for k in 0..n {
            let mut alpha = CVec::zeros(n);
            alpha[k] = real(1.0);
            let f = &self.ports.inject * &alpha;
            let it = self.limit_iterative(lambda, &f, tol, max_steps)?;
            out.set_column(k, &self.outgoing(&it.state, &alpha));
        }
        Ok(out)
    }
}

/// `|| S* S - I ||_F`.
pub fn unitarity_defect(s: &CMat) -> f64 {
    (s.adjoint() * s - CMat::identity(s.ncols(), s.ncols())).norm()
}

/// `n` equally spaced points on `[0, 2 pi)`.
pub fn lambda_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionPoint {
    pub lambda: f64,
    pub z: C64,
    pub tau_sq: f64,
    pub reflection_sq: f64,
}

/// Transmission out of the inflow tail into all other tails over a grid of quasi-energies.
pub fn transmission(sc: &Scatterer, inflow: usize, grid: &[f64]) -> Result<Vec<TransmissionPoint>> {
    if inflow >= sc.num_tails() {
        return Err(Error::Input(format!("inflow tail {inflow} does not exist")));
    }
    Ok(grid
        .iter()
        .map(|&lambda| {
            let s = sc.sigma(lambda);
            let col = s.column(inflow);
            let reflection_sq = col[inflow].norm_sqr();
            let tau_sq = col.iter().map(|z| z.norm_sqr()).sum::<f64>() - reflection_sq;
            TransmissionPoint {
                lambda,
                z: cis(-lambda),
                tau_sq,
                reflection_sq,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::spectral::{DEFAULT_TOL_CIRCLE, DEFAULT_TOL_CLUSTER};
    use proptest::prelude::*;

    const TRIANGLE_WITH_TAILS: &str = r#"{
        "vertices": 4,
        "edges": [[0, 1], [1, 2], [2, 0], [2, 3]],
        "tails": [{"vertex": 0, "count": 1}, {"vertex": 3, "count": 2}]
    }"#;

    #[test]
    fn json_graph_scattering_is_unitary_and_matches_iteration() {
        let tg = TailedGraph::from_json(TRIANGLE_WITH_TAILS).unwrap();
        assert_eq!(tg.num_tails(), 3);
        let sc = Scatterer::new(&tg, 0.3, DEFAULT_TOL_CLUSTER, DEFAULT_TOL_CIRCLE).unwrap();
        for l in lambda_grid(32) {
            assert!(unitarity_defect(&sc.sigma(l)) < 1e-9);
        }
        let curve = transmission(&sc, 1, &lambda_grid(32)).unwrap();
        assert!(curve.iter().all(|p| (p.tau_sq + p.reflection_sq - 1.0).abs() < 1e-9));
        let alpha = CVec::from_vec(vec![real(1.0), real(0.0), real(-0.5)]);
        let f = &sc.ports.inject * &alpha;
        for l in [0.3, 1.7, std::f64::consts::PI] {
            let it = sc.limit_iterative(l, &f, 1e-13, 1_000_000).unwrap();
            assert!((it.state - sc.limit_closed_form(l, &f)).camax() < 1e-8);
        }
    }

    #[test]
    fn json_graph_resonances_are_outgoing() {
        let tg = TailedGraph::from_json(TRIANGLE_WITH_TAILS).unwrap();
        let eps = 0.7;
        let sd = spectral_decompose(
            &crate::spectral::build_e(&tg, eps).unwrap(),
            DEFAULT_TOL_CLUSTER,
            DEFAULT_TOL_CIRCLE,
        )
        .unwrap();
        let mut seen = 0;
        for c in sd
            .resonances()
            .filter(|c| c.value.norm() < 1.0 - 1e-6 && c.value.norm() > 1e-6 && c.is_semisimple())
        {
            let u: CVec = c.basis.column(0).into_owned();
            assert!(crate::spectral::verify_outgoing(&tg, eps, c.value, &u, 20).unwrap() < 1e-8);
            seen += 1;
        }
        assert!(seen > 0);
    }

    fn c4_three() -> TailedGraph {
        TailedGraph::with_single_tails(Graph::cycle(4).unwrap(), &[0, 1, 2]).unwrap()
    }

    #[test]
    fn closed_boundary_is_identity() {
        let sc = Scatterer::new(&c4_three(), 0.0, DEFAULT_TOL_CLUSTER, DEFAULT_TOL_CIRCLE).unwrap();
        for lambda in lambda_grid(16) {
            assert!((sc.sigma(lambda) - CMat::identity(3, 3)).norm() < 1e-14);
        }
    }

    #[test]
    fn iteration_matches_closed_form() {
        let sc = Scatterer::new(&c4_three(), 0.25, DEFAULT_TOL_CLUSTER, DEFAULT_TOL_CIRCLE).unwrap();
        for lambda in [0.3, std::f64::consts::PI, 4.0] {
            let a = sc.sigma(lambda);
            let b = sc.sigma_iterative(lambda, 1e-13, 200_000).unwrap();
            assert!((a - b).norm() < 1e-9, "lambda {lambda}");
        }
    }

    #[test]
    fn source_avoids_unit_circle() {
        let tg = TailedGraph::with_single_tails(Graph::complete(4).unwrap(), &[0, 1, 2, 3]).unwrap();
        let sc = Scatterer::new(&tg, 0.4, DEFAULT_TOL_CLUSTER, DEFAULT_TOL_CIRCLE).unwrap();
        for c in sc.spectral.clusters.iter().filter(|c| c.on_circle) {
            assert!((&c.projector * &sc.ports.inject).norm() < 1e-9);
        }
    }

    #[test]
    fn transmission_conserves_probability() {
        let sc = Scatterer::new(&c4_three(), 0.5, DEFAULT_TOL_CLUSTER, DEFAULT_TOL_CIRCLE).unwrap();
        let pts = transmission(&sc, 0, &lambda_grid(64)).unwrap();
        for p in &pts {
            assert!((p.tau_sq + p.reflection_sq - 1.0).abs() < 1e-10);
        }
        assert!(matches!(transmission(&sc, 3, &[0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn non_convergence_reported() {
        let sc = Scatterer::new(&c4_three(), 0.05, DEFAULT_TOL_CLUSTER, DEFAULT_TOL_CIRCLE).unwrap();
        let f = &sc.ports.inject * CVec::from_element(3, real(1.0));
        assert!(matches!(
            sc.limit_iterative(1.0, &f, 1e-14, 10),
            Err(Error::NoConvergence { steps: 10, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sigma_unitary(eps in 0.0f64..=1.0, lambda in 0.0f64..TAU, complete in proptest::bool::ANY) {
            let g = if complete { Graph::complete(4).unwrap() } else { Graph::cycle(4).unwrap() };
            let tg = TailedGraph::with_single_tails(g, &[0, 1, 3]).unwrap();
            let sc = Scatterer::new(&tg, eps, DEFAULT_TOL_CLUSTER, DEFAULT_TOL_CIRCLE).unwrap();
            prop_assert!(unitarity_defect(&sc.sigma(lambda)) < 1e-9);
        }
    }
}
