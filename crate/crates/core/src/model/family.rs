use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::io::{interconnect, ControllerIo, IoSystem, PlantIo};
use super::system::{DdaeSystem, DelayTerm};
use crate::error::{Error, Result};

/// Systems whose matrices depend affinely on a parameter vector:
/// `A_i(p) = A_i + Σ_j p_j C_{i,j}` with `E` and the delays fixed.
#[derive(Clone, Debug)]
pub struct AffineFamily {
    e: DMatrix<f64>,
    delays: Vec<f64>,
    base: Vec<DMatrix<f64>>,
    // coeffs[j][i]: coefficient of p_j in the term with delay delays[i]
    coeffs: Vec<Vec<DMatrix<f64>>>,
}

impl AffineFamily {
    /// `delays[0]` must be 0 and `base`/each `coeffs[j]` hold one matrix per delay.
    pub fn new(
        e: DMatrix<f64>,
        delays: Vec<f64>,
        base: Vec<DMatrix<f64>>,
        coeffs: Vec<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        let family = Self {
            e,
            delays,
            base,
            coeffs,
        };
        // a valid assembly at p = 0 validates dimensions and delays
        let terms = family.terms_at(&vec![0.0; family.coeffs.len()]);
        DdaeSystem::new(family.e.clone(), terms)?;
        for (j, c) in family.coeffs.iter().enumerate() {
            if c.len() != family.delays.len() || c.iter().any(|m| m.shape() != family.e.shape()) {
                return Err(Error::Dimension(format!(
                    "coefficient set {j} does not match the delay slots"
                )));
            }
        }
        Ok(family)
    }

    pub fn n_params(&self) -> usize {
        self.coeffs.len()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// `∂A_i/∂p_j` for the delay slot `i`.
    pub fn coeff(&self, j: usize, slot: usize) -> &DMatrix<f64> {
        &self.coeffs[j][slot]
    }

    fn terms_at(&self, p: &[f64]) -> Vec<DelayTerm> {
        self.delays
            .iter()
            .enumerate()
            .map(|(i, &delay)| {
                let mut matrix = self.base[i].clone();
                for (j, &pj) in p.iter().enumerate() {
                    if pj != 0.0 {
                        matrix += &self.coeffs[j][i] * pj;
                    }
                }
                DelayTerm { delay, matrix }
            })
            .collect()
    }

    pub fn assemble(&self, p: &[f64]) -> Result<DdaeSystem> {
        if p.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                p.len()
            )));
        }
        DdaeSystem::new(self.e.clone(), self.terms_at(p))
    }

    /// Same family with the nonzero delays replaced.
    pub fn with_delays(&self, delays: &[f64]) -> Result<Self> {
        if delays.len() + 1 != self.delays.len() {
            return Err(Error::Dimension("delay count mismatch".into()));
        }
        let mut all = vec![0.0];
        all.extend_from_slice(delays);
        Self::new(self.e.clone(), all, self.base.clone(), self.coeffs.clone())
    }
}

/// Entries of `K = [A_c B_c; C_c D_c]` pinned to given values; `None` marks a
/// free entry.
pub type FixedMask = DMatrix<Option<f64>>;

/// Closed-loop family of a plant with an undelayed controller of order `n_c`,
/// parameterized by the free entries of `vec[A_c B_c; C_c D_c]` (column-major).
#[derive(Clone, Debug)]
pub struct ControllerFamily {
    family: AffineFamily,
    plant: PlantIo,
    n_c: usize,
    n_u: usize,
    n_y: usize,
    fixed: DMatrix<f64>,
    // column-major positions in K of the free entries
    free: Vec<(usize, usize)>,
}

impl ControllerFamily {
    pub fn family(&self) -> &AffineFamily {
        &self.family
    }

    pub fn plant(&self) -> &PlantIo {
        &self.plant
    }

    pub fn order(&self) -> usize {
        self.n_c
    }

    pub fn n_params(&self) -> usize {
        self.free.len()
    }

    /// Controller gain block `K(p)`.
    pub fn gain_matrix(&self, p: &[f64]) -> DMatrix<f64> {
        let mut k = self.fixed.clone();
        for (&(r, c), &v) in self.free.iter().zip(p) {
            k[(r, c)] = v;
        }
        k
    }

    pub fn controller(&self, p: &[f64]) -> ControllerIo {
        split_gain(&self.gain_matrix(p), self.n_c, self.n_u, self.n_y)
    }

    pub fn assemble(&self, p: &[f64]) -> Result<DdaeSystem> {
        self.family.assemble(p)
    }

    /// Parameters of a controller with this structure; pinned entries are ignored.
    pub fn params_of(&self, k: &DMatrix<f64>) -> Vec<f64> {
        self.free.iter().map(|&(r, c)| k[(r, c)]).collect()
    }

    /// Random starting point: entries i.i.d. `N(0, 0.5²)` with `A_c` shifted by `−0.5 I`.
    pub fn initial_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(0.0, 0.5).expect("valid standard deviation");
        self.free
            .iter()
            .map(|&(r, c)| {
                let x = normal.sample(rng);
                if r == c && r < self.n_c {
                    x - 0.5
                } else {
                    x
                }
            })
            .collect()
    }
}

fn split_gain(k: &DMatrix<f64>, n_c: usize, n_u: usize, n_y: usize) -> ControllerIo {
    let ac = k.view((0, 0), (n_c, n_c)).into_owned();
    let bc = k.view((0, n_c), (n_c, n_y)).into_owned();
    let cc = k.view((n_c, 0), (n_u, n_c)).into_owned();
    let dc = k.view((n_c, n_c), (n_u, n_y)).into_owned();
    IoSystem::state_space(ac, bc, cc, dc).expect("blocks of K are consistent")
}

/// Builds the closed-loop controller family of `plant` for controller order `n_c`.
pub fn make_controller_family(plant: &PlantIo, n_c: usize, fixed_mask: Option<&FixedMask>) -> Result<ControllerFamily> {
    let n_u = plant.n_inputs();
    let n_y = plant.n_outputs();
    let rows = n_c + n_u;
    let cols = n_c + n_y;
    let mut fixed = DMatrix::zeros(rows, cols);
    let mut free = Vec::new();
    if let Some(mask) = fixed_mask {
        if mask.shape() != (rows, cols) {
            return Err(Error::Dimension(format!(
                "fixed mask is {}x{}, expected {rows}x{cols}",
                mask.nrows(),
                mask.ncols()
            )));
        }
    }
    for c in 0..cols {
        for r in 0..rows {
            match fixed_mask.and_then(|m| m[(r, c)]) {
                Some(v) => fixed[(r, c)] = v,
                None => free.push((r, c)),
            }
        }
    }

    let base = interconnect(plant, &split_gain(&fixed, n_c, n_u, n_y))?;
    let delays: Vec<f64> = base.terms().iter().map(|t| t.delay).collect();
    let base_mats: Vec<DMatrix<f64>> = base.terms().iter().map(|t| t.matrix.clone()).collect();
    let mut coeffs = Vec::with_capacity(free.len());
    for &(r, c) in &free {
        let mut k = fixed.clone();
        k[(r, c)] += 1.0;
        let unit = interconnect(plant, &split_gain(&k, n_c, n_u, n_y))?;
        if unit.terms().len() != base.terms().len() {
            return Err(Error::Dimension("controller entry changed the delay set".into()));
        }
        coeffs.push(
            unit.terms()
                .iter()
                .zip(&base_mats)
                .map(|(t, b)| &t.matrix - b)
                .collect(),
        );
    }
    let family = AffineFamily::new(base.e().clone(), delays, base_mats, coeffs)?;
    Ok(ControllerFamily {
        family,
        plant: plant.clone(),
        n_c,
        n_u,
        n_y,
        fixed,
        free,
    })
}
