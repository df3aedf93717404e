use std::ops::Range;

use faer::Mat;
use rayon::prelude::*;

use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::linalg::{dense_solve, DenseSpd};

/// Block-diagonal preconditioner: per segment
/// `D̂βᵢᵀ Â♯ᵢ⁻¹ Ĝᵢ Â♯ᵢ⁻¹ D̂βᵢ + M^Dᵢ` on the Ψ_D block and `M^Σᵢ` on the Ψ_Σ
/// block, each factorized densely once.
#[derive(Debug)]
pub struct Preconditioner {
    n_psi_d: usize,
    blocks_d: Vec<(Range<usize>, DenseSpd)>,
    blocks_s: Vec<(Range<usize>, DenseSpd)>,
}

type Block = (Range<usize>, DenseSpd);

impl Preconditioner {
    pub fn new(sys: &BlockSystem) -> Result<Self> {
        let nseg = sys.dofs.hat_free_range.len();
        let built: Vec<Result<(Block, Block)>> = (0..nseg)
            .into_par_iter()
            .map(|i| {
                let dr = sys.dofs.psi_d_range(i);
                let sr = sys.dofs.psi_s_range(i);
                let top = psi_d_block(sys, i);
                let pd = DenseSpd::new(&top, &format!("preconditioner Ψ_D block of segment {i}"))?;
                let ms = sys.m_s.dense_block(sr.clone(), sr.clone());
                let ps = DenseSpd::new(&ms, &format!("preconditioner Ψ_Σ block of segment {i}"))?;
                Ok(((dr, pd), (sr, ps)))
            })
            .collect();
        let mut blocks_d = Vec::with_capacity(nseg);
        let mut blocks_s = Vec::with_capacity(nseg);
        for b in built {
            let (d, s) = b?;
            blocks_d.push(d);
            blocks_s.push(s);
        }
        Ok(Self {
            n_psi_d: sys.n_psi_d(),
            blocks_d,
            blocks_s,
        })
    }

    /// `z = 𝒫⁻¹ r`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        let (zd, zs) = z.split_at_mut(self.n_psi_d);
        let (rd, rs) = r.split_at(self.n_psi_d);
        let solve_into = |blocks: &[(Range<usize>, DenseSpd)], rv: &[f64], zv: &mut [f64]| {
            for (range, f) in blocks {
                zv[range.clone()].copy_from_slice(&f.solve(&rv[range.clone()]));
            }
        };
        rayon::join(|| solve_into(&self.blocks_d, rd, zd), || solve_into(&self.blocks_s, rs, zs));
        z
    }
}

/// Dense `D̂βᵢᵀ Â♯ᵢ⁻¹ Ĝᵢ Â♯ᵢ⁻¹ D̂βᵢ + M^Dᵢ` for segment `i`.
pub fn psi_d_block(sys: &BlockSystem, i: usize) -> Mat<f64> {
    let hr = sys.dofs.hat_free_range[i].clone();
    let dr = sys.dofs.psi_d_range(i);
    let md = sys.m_d.dense_block(dr.clone(), dr.clone());
    if hr.is_empty() {
        return md;
    }
    let ah = sys.a_hat_sharp.dense_block(hr.clone(), hr.clone());
    let gh = sys.g_hat.dense_block(hr.clone(), hr.clone());
    let dh = sys.d_hat_beta.dense_block(hr, dr);
    let x = dense_solve(&ah, &dh);
    let sym = x.transpose() * &gh * &x;
    let mut out = md + sym;
    // Symmetrize away rounding so the dense Cholesky sees an exactly symmetric matrix.
    let n = out.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (out[(r, c)] + out[(c, r)]);
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
    }
    out
}

pub(crate) fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::State(format!("{what} contains non-finite values")))
    }
}
