use nalgebra::DMatrix;

use super::system::{DdaeSystem, DelayTerm};
use crate::error::{Error, Result};

/// A list of matrices with one delay per matrix, e.g. `{B₁, B₂}` with `hB = [r₁, r₂]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DelayedTerms {
    pub matrices: Vec<DMatrix<f64>>,
    pub delays: Vec<f64>,
}

impl DelayedTerms {
    pub fn new(matrices: Vec<DMatrix<f64>>, delays: Vec<f64>) -> Result<Self> {
        let terms = Self { matrices, delays };
        terms.check_delays("terms")?;
        Ok(terms)
    }

    pub fn single(matrix: DMatrix<f64>, delay: f64) -> Self {
        Self {
            matrices: vec![matrix],
            delays: vec![delay],
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DMatrix<f64>, f64)> {
        self.matrices.iter().zip(self.delays.iter().copied())
    }

    fn check_delays(&self, name: &str) -> Result<()> {
        if self.matrices.len() != self.delays.len() {
            return Err(Error::Dimension(format!(
                "{name}: {} matrices but {} delays",
                self.matrices.len(),
                self.delays.len()
            )));
        }
        if let Some(&h) = self.delays.iter().find(|h| !h.is_finite() || **h < 0.0) {
            return Err(Error::Delay(format!("{name}: delay {h} is negative or not finite")));
        }
        Ok(())
    }

    fn check_shape(&self, name: &str, rows: usize, cols: usize) -> Result<()> {
        self.check_delays(name)?;
        for (i, m) in self.matrices.iter().enumerate() {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(Error::Dimension(format!(
                    "{name}[{i}] is {}x{}, expected {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(())
    }
}

/// Input-output delay system
///
/// ```text
/// E ż(t) = Σ A_i z(t − hA_i) + Σ B1_i u(t − hB1_i)
///   y(t) = Σ C1_i z(t − hC1_i) + Σ D11_i u(t − hD11_i)
/// ```
///
/// used both for plants and for controllers (which read `y` and produce `u`).
#[derive(Clone, Debug, PartialEq)]
pub struct IoSystem {
    pub e: DMatrix<f64>,
    pub a: DelayedTerms,
    pub b1: DelayedTerms,
    pub c1: DelayedTerms,
    pub d11: DelayedTerms,
    n_state: usize,
    n_in: usize,
    n_out: usize,
}

pub type PlantIo = IoSystem;
pub type ControllerIo = IoSystem;

impl IoSystem {
    pub fn new(
        (n_state, n_in, n_out): (usize, usize, usize),
        e: Option<DMatrix<f64>>,
        a: DelayedTerms,
        b1: DelayedTerms,
        c1: DelayedTerms,
        d11: DelayedTerms,
    ) -> Result<Self> {
        let e = e.unwrap_or_else(|| DMatrix::identity(n_state, n_state));
        if e.nrows() != n_state || e.ncols() != n_state {
            return Err(Error::Dimension(format!(
                "E is {}x{}, expected {n_state}x{n_state}",
                e.nrows(),
                e.ncols()
            )));
        }
        a.check_shape("A", n_state, n_state)?;
        b1.check_shape("B1", n_state, n_in)?;
        c1.check_shape("C1", n_out, n_state)?;
        d11.check_shape("D11", n_out, n_in)?;
        Ok(Self {
            e,
            a,
            b1,
            c1,
            d11,
            n_state,
            n_in,
            n_out,
        })
    }

    /// Static gain `u(t) = D y(t)`.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (n_out, n_in) = d.shape();
        Self::new(
            (0, n_in, n_out),
            None,
            DelayedTerms::empty(),
            DelayedTerms::empty(),
            DelayedTerms::empty(),
            DelayedTerms::single(d, 0.0),
        )
        .expect("static gain is always consistent")
    }

    /// Undelayed state-space controller `ż_c = A_c z_c + B_c y`, `u = C_c z_c + D_c y`.
    pub fn state_space(ac: DMatrix<f64>, bc: DMatrix<f64>, cc: DMatrix<f64>, dc: DMatrix<f64>) -> Result<Self> {
        let n_c = ac.nrows();
        let (n_out, n_in) = dc.shape();
        if n_c == 0 {
            return Ok(Self::static_gain(dc));
        }
        Self::new(
            (n_c, n_in, n_out),
            None,
            DelayedTerms::single(ac, 0.0),
            DelayedTerms::single(bc, 0.0),
            DelayedTerms::single(cc, 0.0),
            DelayedTerms::single(dc, 0.0),
        )
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.n_out
    }

    /// Replaces the feedthrough terms, keeping everything else.
    pub fn with_feedthrough(&self, d11: DelayedTerms) -> Result<Self> {
        Self::new(
            (self.n_state, self.n_in, self.n_out),
            Some(self.e.clone()),
            self.a.clone(),
            self.b1.clone(),
            self.c1.clone(),
            d11,
        )
    }

    /// True when no feedthrough term is present (all `D11` matrices zero).
    pub fn is_strictly_proper(&self) -> bool {
        self.d11.matrices.iter().all(|d| d.iter().all(|&x| x == 0.0))
    }
}

/// Builds a plant with the argument order `A, B, C, D, E` (state, input,
/// output, feedthrough, descriptor); `E` defaults to the identity.
pub fn create_plant(
    a: DelayedTerms,
    b1: DelayedTerms,
    c1: DelayedTerms,
    d11: Option<DelayedTerms>,
    e: Option<DMatrix<f64>>,
) -> Result<PlantIo> {
    let d11 = d11.unwrap_or_default();
    let n_state = a
        .matrices
        .first()
        .map(|m| m.nrows())
        .or_else(|| e.as_ref().map(|e| e.nrows()))
        .ok_or_else(|| Error::Dimension("cannot infer the state dimension".into()))?;
    let n_in = b1.matrices.first().or(d11.matrices.first()).map_or(0, |m| m.ncols());
    let n_out = c1.matrices.first().or(d11.matrices.first()).map_or(0, |m| m.nrows());
    IoSystem::new((n_state, n_in, n_out), e, a, b1, c1, d11)
}

/// Closed loop of a plant and a controller as one DDAE in `x = [z; z_c; u; y]`.
///
/// The output equations become algebraic rows `0 = −y + Σ C1_i z(t−·) + Σ D11_i u(t−·)`
/// and `0 = −u + Σ Ĉ_i z_c(t−·) + Σ D̂_i y(t−·)`; no input or output is eliminated.
pub fn interconnect(plant: &PlantIo, controller: &ControllerIo) -> Result<DdaeSystem> {
    if plant.n_in != controller.n_out || plant.n_out != controller.n_in {
        return Err(Error::Dimension(format!(
            "plant has {} inputs / {} outputs but the controller reads {} and writes {}",
            plant.n_in, plant.n_out, controller.n_in, controller.n_out
        )));
    }
    let nz = plant.n_state;
    let nc = controller.n_state;
    let nu = plant.n_in;
    let ny = plant.n_out;
    let n = nz + nc + nu + ny;
    let (oz, oc, ou, oy) = (0, nz, nz + nc, nz + nc + nu);

    let mut e = DMatrix::zeros(n, n);
    e.view_mut((oz, oz), (nz, nz)).copy_from(&plant.e);
    if nc > 0 {
        e.view_mut((oc, oc), (nc, nc)).copy_from(&controller.e);
    }

    let mut terms = Vec::new();
    let mut push = |delay: f64, row: usize, col: usize, m: &DMatrix<f64>| {
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((row, col), m.shape()).copy_from(m);
        terms.push(DelayTerm { delay, matrix: full });
    };
    for (m, h) in plant.a.iter() {
        push(h, oz, oz, m);
    }
    for (m, h) in plant.b1.iter() {
        push(h, oz, ou, m);
    }
    for (m, h) in plant.c1.iter() {
        push(h, oy, oz, m);
    }
    for (m, h) in plant.d11.iter() {
        push(h, oy, ou, m);
    }
    for (m, h) in controller.a.iter() {
        push(h, oc, oc, m);
    }
    for (m, h) in controller.b1.iter() {
        push(h, oc, oy, m);
    }
    for (m, h) in controller.c1.iter() {
        push(h, ou, oc, m);
    }
    for (m, h) in controller.d11.iter() {
        push(h, ou, oy, m);
    }
    let mut minus_identity = DMatrix::zeros(n, n);
    for i in ou..n {
        minus_identity[(i, i)] = -1.0;
    }
    terms.push(DelayTerm {
        delay: 0.0,
        matrix: minus_identity,
    });
    DdaeSystem::from_terms(e, terms)
}

/// Rewrites `d/dt (z + Σ G_i z(t−τ_i)) = Σ H_i z(t−τ_i)` with the slack variable
/// `v = z + Σ G_i z(t−τ_i)`, giving a DDAE in `x = [v; z]`.
pub fn neutral_to_ddae(g: &DelayedTerms, h: &DelayedTerms) -> Result<DdaeSystem> {
    let nz = h
        .matrices
        .first()
        .or(g.matrices.first())
        .map(|m| m.nrows())
        .ok_or_else(|| Error::Dimension("no matrices given".into()))?;
    g.check_shape("G", nz, nz)?;
    h.check_shape("H", nz, nz)?;
    if let Some(&d) = g.delays.iter().find(|&&d| d <= 0.0) {
        return Err(Error::Delay(format!(
            "G term at delay {d}: undelayed terms belong in the identity of the constraint"
        )));
    }
    let n = 2 * nz;
    let mut e = DMatrix::zeros(n, n);
    e.view_mut((0, 0), (nz, nz)).fill_with_identity();

    let mut terms = Vec::new();
    for (m, d) in h.iter() {
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((0, nz), (nz, nz)).copy_from(m);
        terms.push(DelayTerm { delay: d, matrix: full });
    }
    for (m, d) in g.iter() {
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((nz, nz), (nz, nz)).copy_from(m);
        terms.push(DelayTerm { delay: d, matrix: full });
    }
    let mut constraint = DMatrix::zeros(n, n);
    for i in 0..nz {
        constraint[(nz + i, i)] = -1.0;
        constraint[(nz + i, nz + i)] = 1.0;
    }
    terms.push(DelayTerm {
        delay: 0.0,
        matrix: constraint,
    });
    DdaeSystem::from_terms(e, terms)
}
