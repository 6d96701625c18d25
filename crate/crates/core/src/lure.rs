//! Incremental multiplier matrices for slope-restricted nonlinearities and
//! the generic absolute-contractivity LMIs of a Lur'e system
//! `ẋ = Ax + BΨ(Cx)` (or its discrete analogue `x⁺ = Ax + BΨ(Cx)`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, DiagPosMatrix, GeneralMatrix, SymMatrix};

/// Slope bounds `k1 ≤ (ψ(a) − ψ(b)) / (a − b) ≤ k2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeInterval {
    k1: f64,
    k2: f64,
}

impl SlopeInterval {
    /// Non-expansive: slopes in `[-1, 1]`.
    pub const CONE: SlopeInterval = SlopeInterval { k1: -1.0, k2: 1.0 };
    /// Monotone non-expansive: slopes in `[0, 1]`.
    pub const MONE: SlopeInterval = SlopeInterval { k1: 0.0, k2: 1.0 };

    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k1.is_finite() && k2.is_finite()) || k1 > k2 {
            return Err(Error::InvalidArgument(format!(
                "slope interval [{k1}, {k2}] must satisfy k1 <= k2"
            )));
        }
        Ok(Self { k1, k2 })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn contains(&self, other: &SlopeInterval) -> bool {
        self.k1 <= other.k1 && other.k2 <= self.k2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplierKind {
    GeneralSlope { k1: f64, k2: f64 },
    Cone,
    Mone,
}

/// A `2n × 2n` incremental multiplier matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierMatrix {
    n: usize,
    m: SymMatrix,
    kind: MultiplierKind,
}

impl MultiplierMatrix {
    fn from_blocks(q: &DiagPosMatrix, b11: f64, b12: f64, b22: f64, kind: MultiplierKind) -> Self {
        let n = q.dim();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (i, &qi) in q.diag().iter().enumerate() {
            m[(i, i)] = b11 * qi;
            m[(i, n + i)] = b12 * qi;
            m[(n + i, i)] = b12 * qi;
            m[(n + i, n + i)] = b22 * qi;
        }
        let m = SymMatrix::new(m).expect("multiplier blocks are symmetric and finite");
        Self { n, m, kind }
    }

    /// `[[Q, 0], [0, −Q]]`.
    pub fn cone(q: &DiagPosMatrix) -> Self {
        Self::from_blocks(q, 1.0, 0.0, -1.0, MultiplierKind::Cone)
    }

    /// `[[0, Q], [Q, −2Q]]`.
    pub fn mone(q: &DiagPosMatrix) -> Self {
        Self::from_blocks(q, 0.0, 1.0, -2.0, MultiplierKind::Mone)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MultiplierKind {
        self.kind
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.m
    }
}

/// Multiplier `[[−2k1k2 Q, (k1+k2) Q], [(k1+k2) Q, −2Q]]` admitted by every
/// elementwise nonlinearity slope-restricted to `interval`.
pub fn imm_slope(q: &DiagPosMatrix, interval: SlopeInterval) -> MultiplierMatrix {
    let (k1, k2) = (interval.k1, interval.k2);
    MultiplierMatrix::from_blocks(
        q,
        -2.0 * k1 * k2,
        k1 + k2,
        -2.0,
        MultiplierKind::GeneralSlope { k1, k2 },
    )
}

/// `(A, B, C)` with `A: n×n`, `B: n×m`, `C: m×n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LureSystem {
    a: GeneralMatrix,
    b: GeneralMatrix,
    c: GeneralMatrix,
}

impl LureSystem {
    pub fn new(a: GeneralMatrix, b: GeneralMatrix, c: GeneralMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || c.nrows() != b.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn nonlinearity_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &GeneralMatrix {
        &self.a
    }

    pub fn b(&self) -> &GeneralMatrix {
        &self.b
    }

    pub fn c(&self) -> &GeneralMatrix {
        &self.c
    }

    /// `Γ = blockdiag(C, I_m)`.
    fn gamma(&self) -> DMatrix<f64> {
        let (n, m) = (self.state_dim(), self.nonlinearity_dim());
        let mut g = DMatrix::zeros(2 * m, n + m);
        g.view_mut((0, 0), (m, n)).copy_from(&self.c);
        for i in 0..m {
            g[(m + i, n + i)] = 1.0;
        }
        g
    }

    fn check_dims(&self, p: &SymMatrix, mult: &MultiplierMatrix) -> Result<()> {
        if p.dim() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "P is {0}x{0}, state dimension is {1}",
                p.dim(),
                self.state_dim()
            )));
        }
        if mult.dim() != self.nonlinearity_dim() {
            return Err(Error::DimensionMismatch(format!(
                "multiplier acts on {} channels, B has {} columns",
                mult.dim(),
                self.nonlinearity_dim()
            )));
        }
        Ok(())
    }

    /// `base + λ Γᵀ M Γ`, where `base` is the `(n+m)`-square quadratic form of
    /// the contraction inequality.
    fn add_multiplier(
        &self,
        base: DMatrix<f64>,
        mult: &MultiplierMatrix,
        lambda: f64,
    ) -> Result<SymMatrix> {
        let gamma = self.gamma();
        let mg = matmul(mult.matrix(), &gamma);
        let gmg = matmul(&gamma.transpose(), &mg);
        let total = DMatrix::from_fn(base.nrows(), base.ncols(), |i, j| {
            base[(i, j)] + lambda * gmg[(i, j)]
        });
        SymMatrix::new(total)
    }
}

/// `[[PA + AᵀP + 2cP, PB], [BᵀP, 0]] + λ ΓᵀMΓ` (continuous time, rate `c`).
pub fn assemble_lure_ct(
    sys: &LureSystem,
    p: &SymMatrix,
    mult: &MultiplierMatrix,
    c: f64,
    lambda: f64,
) -> Result<SymMatrix> {
    sys.check_dims(p, mult)?;
    let (n, m) = (sys.state_dim(), sys.nonlinearity_dim());
    let pa = matmul(p, &sys.a);
    let atp = matmul(&sys.a.transpose(), p);
    let pb = matmul(p, &sys.b);
    let mut base = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            base[(i, j)] = pa[(i, j)] + atp[(i, j)] + 2.0 * c * p[(i, j)];
        }
    }
    base.view_mut((0, n), (n, m)).copy_from(&pb);
    base.view_mut((n, 0), (m, n)).copy_from(&pb.transpose());
    sys.add_multiplier(base, mult, lambda)
}

/// `[[AᵀPA − ρ²P, AᵀPB], [BᵀPA, BᵀPB]] + λ ΓᵀMΓ` (discrete time, factor `ρ`).
pub fn assemble_lure_dt(
    sys: &LureSystem,
    p: &SymMatrix,
    mult: &MultiplierMatrix,
    rho: f64,
    lambda: f64,
) -> Result<SymMatrix> {
    sys.check_dims(p, mult)?;
    let (n, m) = (sys.state_dim(), sys.nonlinearity_dim());
    let atp = matmul(&sys.a.transpose(), p);
    let atpa = matmul(&atp, &sys.a);
    let atpb = matmul(&atp, &sys.b);
    let btpb = matmul(&matmul(&sys.b.transpose(), p), &sys.b);
    let mut base = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            base[(i, j)] = atpa[(i, j)] - rho * rho * p[(i, j)];
        }
    }
    base.view_mut((0, n), (n, m)).copy_from(&atpb);
    base.view_mut((n, 0), (m, n)).copy_from(&atpb.transpose());
    base.view_mut((n, n), (m, m)).copy_from(&btpb);
    sys.add_multiplier(base, mult, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_nsd, lambda_max};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn slope_multiplier_matches_cone_and_mone_forms() {
        let q = DiagPosMatrix::identity(2);
        let cone2 = imm_slope(&q, SlopeInterval::CONE);
        assert_eq!(
            cone2.matrix().as_matrix(),
            &(MultiplierMatrix::cone(&q).matrix().as_matrix() * 2.0)
        );
        let mone = imm_slope(&q, SlopeInterval::MONE);
        assert_eq!(mone.matrix(), MultiplierMatrix::mone(&q).matrix());
    }

    #[test]
    fn slope_multiplier_half_one() {
        let q = DiagPosMatrix::new(vec![2.0]).unwrap();
        let m = imm_slope(&q, SlopeInterval::new(0.5, 1.0).unwrap());
        assert_eq!(
            m.matrix().as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[-2.0, 3.0, 3.0, -4.0])
        );
    }

    #[test]
    fn multiplier_structure() {
        let q = DiagPosMatrix::new(vec![1.0, 3.0]).unwrap();
        let c = MultiplierMatrix::cone(&q);
        assert!(c.matrix().view((0, 2), (2, 2)).iter().all(|&v| v == 0.0));
        let m = MultiplierMatrix::mone(&q);
        assert!(m.matrix().view((0, 0), (2, 2)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_ct_assembly() {
        let sys = LureSystem::new(scalar(-1.0), scalar(1.0), scalar(1.0)).unwrap();
        let q = DiagPosMatrix::identity(1);
        let l = assemble_lure_ct(
            &sys,
            &SymMatrix::identity(1),
            &MultiplierMatrix::mone(&q),
            0.5,
            1.0,
        )
        .unwrap();
        assert_eq!(
            l.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 2.0, -2.0])
        );
        assert!(lambda_max(&l).unwrap() > 0.0);
    }

    #[test]
    fn zero_multiplier_needs_zero_coupling() {
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.5, -1.0]);
        let q = DiagPosMatrix::identity(2);
        let mult = MultiplierMatrix::mone(&q);
        let p = SymMatrix::identity(2);
        let with_b =
            LureSystem::new(a.clone(), DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let l = assemble_lure_ct(&with_b, &p, &mult, 0.0, 0.0).unwrap();
        assert!(!is_nsd(&l, 1e-12).unwrap().0);
        let no_b = LureSystem::new(a, DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let l = assemble_lure_ct(&no_b, &p, &mult, 0.0, 0.0).unwrap();
        assert!(is_nsd(&l, 1e-12).unwrap().0);
    }

    #[test]
    fn dt_degenerate_cases() {
        let sys = LureSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let q = DiagPosMatrix::identity(2);
        let l = assemble_lure_dt(
            &sys,
            &SymMatrix::identity(2),
            &MultiplierMatrix::cone(&q),
            0.7,
            0.0,
        )
        .unwrap();
        assert!(is_nsd(&l, 0.0).unwrap().0);

        let sys = LureSystem::new(scalar(0.5), scalar(0.0), scalar(1.0)).unwrap();
        let q = DiagPosMatrix::identity(1);
        let l = assemble_lure_dt(
            &sys,
            &SymMatrix::identity(1),
            &MultiplierMatrix::cone(&q),
            0.6,
            0.0,
        )
        .unwrap();
        assert!((l[(0, 0)] - (0.25 - 0.36)).abs() < 1e-15);
        assert_eq!(l[(1, 1)], 0.0);
        assert!(is_nsd(&l, 0.0).unwrap().0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(LureSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2)
        )
        .is_err());
        let sys = LureSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let q = DiagPosMatrix::identity(3);
        assert!(matches!(
            assemble_lure_ct(
                &sys,
                &SymMatrix::identity(2),
                &MultiplierMatrix::cone(&q),
                0.1,
                1.0
            ),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
