//! Local coins and the walk operator on tailed graphs.

use crate::error::{Error, Result};
use crate::graph::{Slot, TailedGraph};
use crate::linalg::{cis, real, CMat, CVec, C64};
use std::f64::consts::PI;

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::ParamOutOfRange {
            name: "epsilon",
            value: eps,
        });
    }
    Ok(())
}

fn ones(r: usize, c: usize) -> CMat {
    CMat::from_element(r, c, real(1.0))
}

/// Grover coin `(2/n) J - I`.
pub fn grover(n: usize) -> CMat {
    ones(n, n) * real(2.0 / n as f64) - CMat::identity(n, n)
}

/// `G_{n,eps} = J/n - e^{-i pi eps} (I - J/n)`; `eps = 0` is Grover, `eps = 1` the identity.
pub fn tunable_block(n: usize, eps: f64) -> Result<CMat> {
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::BadBlockSizes { n, n_i: 0 });
    }
    let avg = ones(n, n) * real(1.0 / n as f64);
    Ok(&avg - (CMat::identity(n, n) - &avg) * cis(-PI * eps))
}

fn check_blocks(n: usize, n_i: usize) -> Result<()> {
    if n_i == 0 || n_i >= n {
        return Err(Error::BadBlockSizes { n, n_i });
    }
    Ok(())
}

/// Boundary coin `blockdiag(G_{n_i,eps}, I) G_{n,1-eps}`.
pub fn boundary_coin(n: usize, n_i: usize, eps: f64) -> Result<CMat> {
    check_blocks(n, n_i)?;
    let mut left = CMat::identity(n, n);
    left.view_mut((0, 0), (n_i, n_i)).copy_from(&tunable_block(n_i, eps)?);
    Ok(left * tunable_block(n, 1.0 - eps)?)
}

/// Split `g_eps = g_0 + kappa g_1` with `kappa = 1 - e^{i pi eps}`; the dependence is exactly affine.
pub fn linearize(n: usize, n_i: usize) -> Result<(CMat, CMat)> {
    check_blocks(n, n_i)?;
    let nj = n - n_i;
    let mut g0 = CMat::identity(n, n);
    g0.view_mut((0, 0), (n_i, n_i)).copy_from(&grover(n_i));
    let inv = 1.0 / n as f64;
    let mut g1 = ones(n, n) * real(inv);
    g1.view_mut((0, 0), (n_i, n_i))
        .copy_from(&(ones(n_i, n_i) * real(-(nj as f64) * inv / n_i as f64)));
    let mut tt = ones(nj, nj) * real(inv);
    for k in 0..nj {
        tt[(k, k)] -= real(1.0);
    }
    g1.view_mut((n_i, n_i), (nj, nj)).copy_from(&tt);
    Ok((g0, g1))
}

pub fn kappa(eps: f64) -> C64 {
    real(1.0) - cis(PI * eps)
}

/// Coin at every internal vertex for a given tuning parameter.
#[derive(Debug, Clone)]
pub struct CoinField {
    pub eps: f64,
    coins: Vec<CMat>,
}

impl CoinField {
    /// Tunable boundary coins at boundary vertices, Grover elsewhere.
    pub fn tunable(tg: &TailedGraph, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let coins = (0..tg.num_vertices())
            .map(|v| {
                if tg.is_boundary(v) {
                    boundary_coin(tg.degree(v), tg.internal_degree(v), eps)
                } else {
                    Ok(grover(tg.internal_degree(v)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoinField { eps, coins })
    }

    /// First-order coefficient in `kappa`; zero away from the boundary.
    pub fn first_order(tg: &TailedGraph) -> Result<Self> {
        let coins = (0..tg.num_vertices())
            .map(|v| {
                if tg.is_boundary(v) {
                    Ok(linearize(tg.degree(v), tg.internal_degree(v))?.1)
                } else {
                    let d = tg.internal_degree(v);
                    Ok(CMat::zeros(d, d))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoinField { eps: f64::NAN, coins })
    }

    pub fn at(&self, v: usize) -> &CMat {
        &self.coins[v]
    }

    /// Coin entry at `v` between two slots.
    pub fn entry(&self, tg: &TailedGraph, v: usize, row: Slot, col: Slot) -> C64 {
        let r = tg.slot_position(v, row).expect("row slot not at vertex");
        let c = tg.slot_position(v, col).expect("column slot not at vertex");
        self.coins[v][(r, c)]
    }
}

/// Walk operator restricted to the internal arcs plus the first `depth` arcs of every tail
/// in each direction.
#[derive(Debug, Clone)]
pub struct TruncatedWalk {
    tg: TailedGraph,
    coins: CoinField,
    depth: usize,
}

impl TruncatedWalk {
    pub fn new(tg: &TailedGraph, eps: f64, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::DepthTooSmall(depth));
        }
        Ok(TruncatedWalk {
            tg: tg.clone(),
            coins: CoinField::tunable(tg, eps)?,
            depth,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.tg.num_arcs() + 2 * self.depth * self.tg.num_tails()
    }

    /// Incoming tail arc `(v_{j,k+1}, v_{j,k})`, `0 <= k < depth`.
    pub fn incoming(&self, j: usize, k: usize) -> usize {
        assert!(k < self.depth);
        self.tg.num_arcs() + 2 * self.depth * j + k
    }

    /// Outgoing tail arc `(v_{j,l-1}, v_{j,l})`, `1 <= l <= depth`.
    pub fn outgoing(&self, j: usize, l: usize) -> usize {
        assert!(l >= 1 && l <= self.depth);
        self.tg.num_arcs() + 2 * self.depth * j + self.depth + l - 1
    }

    /// Embeds an internal state with zero tail amplitudes.
    pub fn embed(&self, u: &CVec) -> CVec {
        let mut psi = CVec::zeros(self.dim());
        psi.rows_mut(0, u.len()).copy_from(u);
        psi
    }

    fn coin_row(&self, psi: &CVec, v: usize, row: usize) -> C64 {
        let c = self.coins.at(v);
        let tg = &self.tg;
        let mut acc = C64::new(0.0, 0.0);
        for (p, s) in tg.slots(v).into_iter().enumerate() {
            let amp = match s {
                Slot::Arc(b) => psi[b],
                Slot::Tail(j) => psi[self.incoming(j, 0)],
            };
            acc += c[(row, p)] * amp;
        }
        acc
    }

    /// One step. Amplitude on the outermost outgoing arcs would leave the window, so it is an error.
    pub fn apply(&self, psi: &CVec) -> Result<CVec> {
        for j in 0..self.tg.num_tails() {
            if psi[self.outgoing(j, self.depth)].norm() > 0.0 {
                return Err(Error::DepthTooSmall(self.depth));
            }
        }
        Ok(self.apply_truncated(psi))
    }

    /// One step, discarding what leaves the window and feeding zero in from outside.
    pub fn apply_truncated(&self, psi: &CVec) -> CVec {
        assert_eq!(psi.len(), self.dim());
        let tg = &self.tg;
        let mut out = CVec::zeros(self.dim());
        for a in 0..tg.num_arcs() {
            let (o, _) = tg.arc(a);
            let row = tg.slot_position(o, Slot::Arc(tg.reverse(a))).unwrap();
            out[a] = self.coin_row(psi, o, row);
        }
        for j in 0..tg.num_tails() {
            let v = tg.tail_vertex(j);
            let row = tg.slot_position(v, Slot::Tail(j)).unwrap();
            out[self.outgoing(j, 1)] = self.coin_row(psi, v, row);
            for l in 1..self.depth {
                out[self.outgoing(j, l + 1)] = psi[self.outgoing(j, l)];
            }
            for k in 0..self.depth - 1 {
                out[self.incoming(j, k)] = psi[self.incoming(j, k + 1)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use proptest::prelude::*;

    fn unitarity_defect(m: &CMat) -> f64 {
        (m.adjoint() * m - CMat::identity(m.nrows(), m.ncols())).norm()
    }

    #[test]
    fn tunable_endpoints() {
        for n in 1..6 {
            assert!((tunable_block(n, 0.0).unwrap() - grover(n)).norm() < 1e-14);
            assert!((tunable_block(n, 1.0).unwrap() - CMat::identity(n, n)).norm() < 1e-14);
        }
        assert!(matches!(tunable_block(3, 1.5), Err(Error::ParamOutOfRange { .. })));
        assert!(matches!(tunable_block(3, -0.1), Err(Error::ParamOutOfRange { .. })));
    }

    #[test]
    fn boundary_endpoints() {
        let g = boundary_coin(3, 2, 1.0).unwrap();
        assert!((g - grover(3)).norm() < 1e-14);
        let g = boundary_coin(3, 2, 0.0).unwrap();
        let want = CMat::from_row_slice(
            3,
            3,
            &[
                real(0.0),
                real(1.0),
                real(0.0),
                real(1.0),
                real(0.0),
                real(0.0),
                real(0.0),
                real(0.0),
                real(1.0),
            ],
        );
        assert!((g - want).norm() < 1e-14);
        assert!(matches!(boundary_coin(3, 3, 0.5), Err(Error::BadBlockSizes { .. })));
        assert!(matches!(boundary_coin(3, 0, 0.5), Err(Error::BadBlockSizes { .. })));
    }

    #[test]
    fn first_order_entries() {
        // n = 4, n_i = 2: internal block -(2/2)/4, mixed 1/4, tail block 1/4 - delta
        let (_, g1) = linearize(4, 2).unwrap();
        assert!((g1[(0, 1)] - real(-0.25)).norm() < 1e-15);
        assert!((g1[(0, 2)] - real(0.25)).norm() < 1e-15);
        assert!((g1[(2, 2)] - real(-0.75)).norm() < 1e-15);
        assert!((g1[(2, 3)] - real(0.25)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn coins_unitary(n in 1usize..9, eps in 0.0f64..=1.0) {
            prop_assert!(unitarity_defect(&tunable_block(n, eps).unwrap()) < 1e-12);
            if n >= 2 {
                for n_i in 1..n {
                    prop_assert!(unitarity_defect(&boundary_coin(n, n_i, eps).unwrap()) < 1e-12);
                }
            }
        }

        #[test]
        fn linearization_exact(n in 2usize..9, frac in 0.0f64..1.0, eps in 0.0f64..=1.0) {
            let n_i = 1 + ((n - 1) as f64 * frac) as usize % (n - 1);
            let (g0, g1) = linearize(n, n_i).unwrap();
            let rebuilt = &g0 + &g1 * kappa(eps);
            prop_assert!((rebuilt - boundary_coin(n, n_i, eps).unwrap()).norm() < 1e-12);
            prop_assert!((g1.transpose() - &g1).norm() < 1e-15);
        }

        #[test]
        fn truncated_walk_preserves_norm(eps in 0.0f64..=1.0, seed in 0u64..1000) {
            let tg = TailedGraph::with_single_tails(Graph::complete(4).unwrap(), &[0, 2]).unwrap();
            let w = TruncatedWalk::new(&tg, eps, 6).unwrap();
            let mut psi = CVec::zeros(w.dim());
            let mut s = seed;
            for k in 0..w.dim() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                psi[k] = C64::new(((s >> 33) % 1000) as f64 / 1000.0, ((s >> 13) % 1000) as f64 / 1000.0 - 0.5);
            }
            for j in 0..tg.num_tails() {
                psi[w.outgoing(j, 6)] = real(0.0);
            }
            let out = w.apply(&psi).unwrap();
            prop_assert!((out.norm() - psi.norm()).abs() < 1e-12 * psi.norm());
        }
    }

    #[test]
    fn tail_transport() {
        let tg = TailedGraph::with_single_tails(Graph::cycle(4).unwrap(), &[0, 1, 2]).unwrap();
        let w = TruncatedWalk::new(&tg, 0.3, 8).unwrap();
        let mut psi = CVec::zeros(w.dim());
        psi[w.incoming(1, 5)] = real(1.0);
        let out = w.apply(&psi).unwrap();
        assert_eq!(out[w.incoming(1, 4)], real(1.0));
        assert!((out.norm() - 1.0).abs() < 1e-15);
        let mut psi = CVec::zeros(w.dim());
        psi[w.outgoing(2, 3)] = real(1.0);
        assert_eq!(w.apply(&psi).unwrap()[w.outgoing(2, 4)], real(1.0));
        let mut psi = CVec::zeros(w.dim());
        psi[w.outgoing(0, 8)] = real(1.0);
        assert_eq!(w.apply(&psi), Err(Error::DepthTooSmall(8)));
    }

    #[test]
    fn closed_boundary_reflects() {
        // at eps = 0 the tail coin block is the identity: incoming amplitude turns straight back
        let tg = TailedGraph::with_single_tails(Graph::cycle(4).unwrap(), &[0]).unwrap();
        let w = TruncatedWalk::new(&tg, 0.0, 4).unwrap();
        let mut psi = CVec::zeros(w.dim());
        psi[w.incoming(0, 0)] = real(1.0);
        let out = w.apply(&psi).unwrap();
        assert!((out[w.outgoing(0, 1)] - real(1.0)).norm() < 1e-15);
        assert!((out.norm() - 1.0).abs() < 1e-15);
    }
}
