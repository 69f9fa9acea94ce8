use nalgebra::{DMatrix, SVD};

use super::system::DdaeSystem;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

/// Default relative rank tolerance for the nullspace of `E`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Blocks `A_i^{(jk)}` of one term after the change of coordinates.
#[derive(Clone, Debug)]
pub struct TermBlocks {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
}

/// Splitting of the DDAE into coupled delay-differential and delay-difference
/// parts, from orthonormal bases `U`, `V` with `UᵀE = 0`, `EV = 0`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    nu: usize,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    u_perp: DMatrix<f64>,
    v_perp: DMatrix<f64>,
    e11: DMatrix<f64>,
    blocks: Vec<TermBlocks>,
    delays: Vec<f64>,
    difference: Vec<DMatrix<f64>>,
}

impl Decomposition {
    fn nonsingular(system: &DdaeSystem) -> Self {
        let n = system.dim();
        Self {
            nu: 0,
            u: DMatrix::zeros(n, 0),
            v: DMatrix::zeros(n, 0),
            u_perp: DMatrix::identity(n, n),
            v_perp: DMatrix::identity(n, n),
            e11: system.e().clone(),
            blocks: Vec::new(),
            delays: system.delays(),
            difference: Vec::new(),
        }
    }

    /// Builds the decomposition from given orthonormal nullspace bases.
    ///
    /// The result only depends on the spaces spanned by `u` and `v`, up to a
    /// similarity of the difference matrices.
    pub fn from_bases(system: &DdaeSystem, u: DMatrix<f64>, v: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let n = system.dim();
        let nu = u.ncols();
        if u.nrows() != n || v.nrows() != n || v.ncols() != nu {
            return Err(Error::Dimension(format!("nullspace bases must both be {n}x{nu}")));
        }
        if nu == 0 {
            return Ok(Self::nonsingular(system));
        }
        let u_perp = orthogonal_complement(&u);
        let v_perp = orthogonal_complement(&v);
        let e11 = u_perp.transpose() * system.e() * &v_perp;

        let blocks: Vec<TermBlocks> = system
            .terms()
            .iter()
            .map(|t| TermBlocks {
                a11: u_perp.transpose() * &t.matrix * &v_perp,
                a12: u_perp.transpose() * &t.matrix * &v,
                a21: u.transpose() * &t.matrix * &v_perp,
                a22: u.transpose() * &t.matrix * &v,
            })
            .collect();

        let a22_0 = &blocks[0].a22;
        let sv = a22_0.singular_values();
        let smallest = sv.min();
        let scale = spectral_norm(system.a0()).max(1.0);
        if smallest <= rank_tol.max(1e-14) * scale {
            return Err(Error::AssumptionViolation {
                smallest_singular_value: smallest,
            });
        }
        let lu = a22_0.clone().lu();
        let difference = blocks[1..]
            .iter()
            .map(|b| lu.solve(&b.a22).expect("A22_0 checked nonsingular"))
            .collect();

        Ok(Self {
            nu,
            u,
            v,
            u_perp,
            v_perp,
            e11,
            blocks,
            delays: system.delays(),
            difference,
        })
    }

    /// Nullity of `E`.
    pub fn nullity(&self) -> usize {
        self.nu
    }

    pub fn is_nonsingular_e(&self) -> bool {
        self.nu == 0
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn u_perp(&self) -> &DMatrix<f64> {
        &self.u_perp
    }

    pub fn v_perp(&self) -> &DMatrix<f64> {
        &self.v_perp
    }

    pub fn e11(&self) -> &DMatrix<f64> {
        &self.e11
    }

    /// Blocks for terms `i = 0..m` (empty when `E` is nonsingular).
    pub fn blocks(&self) -> &[TermBlocks] {
        &self.blocks
    }

    /// Nonzero delays `τ_1..τ_m`.
    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    /// `M_k = (UᵀA₀V)⁻¹ UᵀA_kV` for `k = 1..m`.
    pub fn difference_matrices(&self) -> &[DMatrix<f64>] {
        &self.difference
    }

    /// True when every `M_k` vanishes, i.e. the algebraic part is delay free.
    pub fn has_trivial_difference_part(&self) -> bool {
        self.difference.iter().all(|m| m.iter().all(|&x| x == 0.0))
    }
}

/// Computes the nullspace decomposition with bases from the SVD of `E`.
///
/// Singular values below `rank_tol · σ_max` count as zero. A nonsingular `E`
/// yields an empty decomposition.
pub fn decompose(system: &DdaeSystem, rank_tol: f64) -> Result<Decomposition> {
    let n = system.dim();
    let svd = SVD::new(system.e().clone(), true, true);
    let smax = svd.singular_values.max();
    let rank = if smax == 0.0 {
        0
    } else {
        svd.singular_values.iter().filter(|&&s| s > rank_tol * smax).count()
    };
    if rank == n {
        return Ok(Decomposition::nonsingular(system));
    }
    let w = svd.u.expect("left singular vectors requested");
    let z = svd.v_t.expect("right singular vectors requested").transpose();
    let u = w.columns(rank, n - rank).into_owned();
    let v = z.columns(rank, n - rank).into_owned();
    Decomposition::from_bases(system, u, v, rank_tol)
}

fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let k = basis.ncols();
    let projector = DMatrix::<f64>::identity(n, n) - basis * basis.transpose();
    let svd = SVD::new(projector, true, false);
    svd.u
        .expect("left singular vectors requested")
        .columns(0, n - k)
        .into_owned()
}
