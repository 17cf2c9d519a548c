//! Reduction of a system in characteristic coordinates to (almost-)canonical
//! form.
//!
//! The pipeline is: null structure of `B^u` and the rotation `S` built on its
//! right null vectors, the transversality matrix `M = z̃·B^x·z`, the split into
//! evolution and hypersurface equations, and the redefinition of the null
//! variables `ŵ = w + L^x q` that removes `∂_x q` from the hypersurface
//! equations. The result is stored in the variable order `(q̂, ŵ)`.

use crate::error::{Error, Result};
use crate::matkit::{
    determinant, inverse, orthonormal_complete, qr_column_pivoted, rank_and_nullspaces, Matrix, Vector,
};
use crate::scalar::{Scalar, Tolerances};
use crate::sysmodel::{side_matrices, verify_characteristic, Chart, FirstOrderSystem, SideMatrices};

/// Null vectors of `B^u`, the rotation built from them, and the rotated
/// principal and lower-order matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicStructure<T> {
    pub m: usize,
    /// Orthonormal `z_(ν)`.
    pub right_null: Vec<Vector<T>>,
    /// Unit-length `z̃_(ν)`.
    pub left_null: Vec<Vector<T>>,
    /// Orthogonal; first `m` rows are `right_null`.
    pub s: Matrix<T>,
    /// `S·B^a·Sᵀ` per chart coordinate.
    pub b_prime: Vec<Matrix<T>>,
    pub d_prime: Matrix<T>,
}

pub fn null_structure<T: Scalar>(
    b: &SideMatrices<T>,
    d: &Matrix<T>,
    tol: &Tolerances<T>,
) -> Result<CharacteristicStructure<T>> {
    let n = b.n_unknowns();
    let ns = rank_and_nullspaces(b.bu(), tol.rank)?;
    let m = ns.right.len();
    if m == 0 {
        return Err(Error::NotCharacteristic);
    }
    let s = orthonormal_complete(&ns.right, n, tol.orth)?;
    let mut b_prime: Vec<Matrix<T>> = b.b.iter().map(|bc| bc.congruence(&s)).collect();
    let d_prime = d.congruence(&s);

    let bound = tol.rank * b.bu().norm();
    let bu_prime = &mut b_prime[0];
    for i in 0..n {
        for j in 0..m {
            debug_assert!(bu_prime[(i, j)].abs() <= bound.max(T::epsilon() * T::lit(16.0)));
            bu_prime[(i, j)] = T::zero();
        }
    }
    Ok(CharacteristicStructure {
        m,
        right_null: ns.right,
        left_null: ns.left,
        s,
        b_prime,
        d_prime,
    })
}

/// `M[ν][μ] = z̃_(ν)·B^x·z_(μ)`; fails when `|det M| ≤ tol`.
pub fn transversality_check<T: Scalar>(
    cs: &CharacteristicStructure<T>,
    b: &SideMatrices<T>,
    tol: T,
) -> Result<Matrix<T>> {
    let mm = transversality_matrix(cs, b);
    let det = determinant(&mm)?;
    if det.abs() <= tol {
        return Err(Error::NotTransverse { det: det.as_f64() });
    }
    Ok(mm)
}

fn transversality_matrix<T: Scalar>(cs: &CharacteristicStructure<T>, b: &SideMatrices<T>) -> Matrix<T> {
    let zl = Matrix::from_rows(&cs.left_null).expect("null vectors share a length");
    let zr = Matrix::from_rows(&cs.right_null).expect("null vectors share a length");
    &(&zl * b.bx()) * &zr.transpose()
}

/// How the canonical variables relate to the original unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableOrder<T> {
    /// `v̂ = to_hat · v`, with `v̂ = (q̂, ŵ)`.
    pub to_hat: Matrix<T>,
    pub labels: Vec<String>,
}

/// Almost-canonical (or, with `strict`, canonical) characteristic system
///
/// ```text
/// Nu ∂_u q̂ + Nx ∂_x q̂ + Σ_i Ni ∂_i v̂ + N0 v̂ = 0    (evolution)
///              ∂_x ŵ + Σ_i Li ∂_i v̂ + L0 v̂ = 0    (hypersurface)
/// ```
///
/// with `v̂ = (q̂, ŵ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSystem<T> {
    pub m: usize,
    pub n_unknowns: usize,
    /// `u`, `x`, then the transverse coordinate names.
    pub coord_names: Vec<String>,
    pub variables: VariableOrder<T>,
    pub nu: Matrix<T>,
    pub nx: Matrix<T>,
    pub ni: Vec<Matrix<T>>,
    pub n0: Matrix<T>,
    pub li: Vec<Matrix<T>>,
    pub l0: Matrix<T>,
    /// The `∂_x q` coefficient of the hypersurface equations before it was
    /// absorbed into `ŵ`.
    pub lx: Matrix<T>,
    pub strict: bool,
    /// Rows combine the original equations into (evolution, hypersurface).
    pub row_ops: Matrix<T>,
    /// Rows of the rotated system used as evolution equations.
    pub evolution_rows: Vec<usize>,
}

impl<T: Scalar> CanonicalSystem<T> {
    /// Builds a system directly from its blocks. Bookkeeping matrices are set
    /// to the identity.
    #[allow(clippy::too_many_arguments)]
    pub fn from_blocks(
        coord_names: Vec<String>,
        nu: Matrix<T>,
        nx: Matrix<T>,
        ni: Vec<Matrix<T>>,
        n0: Matrix<T>,
        li: Vec<Matrix<T>>,
        l0: Matrix<T>,
    ) -> Result<Self> {
        let p = nu.rows();
        let m = l0.rows();
        let n = p + m;
        let d = coord_names.len().checked_sub(2).ok_or_else(|| Error::Dimension("need u and x coordinates".into()))?;
        let shape_ok = nu.is_square()
            && nx.rows() == p
            && nx.cols() == p
            && n0.rows() == p
            && n0.cols() == n
            && l0.cols() == n
            && ni.len() == d
            && li.len() == d
            && ni.iter().all(|x| x.rows() == p && x.cols() == n)
            && li.iter().all(|x| x.rows() == m && x.cols() == n);
        if !shape_ok {
            return Err(Error::Dimension("inconsistent canonical block shapes".into()));
        }
        if inverse(&nu).is_err() {
            return Err(Error::NotReducible("Nu is singular".into()));
        }
        Ok(Self {
            m,
            n_unknowns: n,
            coord_names,
            variables: VariableOrder {
                to_hat: Matrix::identity(n),
                labels: default_labels(m, n),
            },
            nu,
            nx,
            ni,
            n0,
            li,
            l0,
            lx: Matrix::zeros(m, p),
            strict: false,
            row_ops: Matrix::identity(n),
            evolution_rows: (m..n).collect(),
        })
    }

    /// Number of normal variables.
    pub fn n_normal(&self) -> usize {
        self.n_unknowns - self.m
    }

    pub fn transverse_dim(&self) -> usize {
        self.ni.len()
    }

    /// Replaces the undifferentiated blocks.
    pub fn with_lower_order(mut self, n0: Matrix<T>, l0: Matrix<T>) -> Result<Self> {
        if n0.rows() != self.n_normal() || n0.cols() != self.n_unknowns || l0.rows() != self.m || l0.cols() != self.n_unknowns
        {
            return Err(Error::Dimension("lower-order blocks have the wrong shape".into()));
        }
        self.n0 = n0;
        self.l0 = l0;
        Ok(self)
    }

    /// Divides the evolution equations by `Nu`, giving `∂_u q̂` unit
    /// coefficient.
    pub fn to_strict(&self) -> Result<Self> {
        let inv = inverse(&self.nu)?;
        let p = self.n_normal();
        let mut out = self.clone();
        out.nu = Matrix::identity(p);
        out.nx = &inv * &self.nx;
        out.ni = self.ni.iter().map(|x| &inv * x).collect();
        out.n0 = &inv * &self.n0;
        let evo = &inv * &self.row_ops.block(0, 0, p, self.n_unknowns);
        out.row_ops.set_block(0, 0, &evo);
        out.strict = true;
        Ok(out)
    }

    /// Full coefficient matrix of `∂_c v̂` for chart coordinate `c`, rows in
    /// (evolution, hypersurface) order.
    pub fn principal(&self, c: usize) -> Matrix<T> {
        let m = self.m;
        match c {
            0 => Matrix::block_diag(&self.nu, &Matrix::zeros(m, m)),
            1 => Matrix::block_diag(&self.nx, &Matrix::identity(m)),
            _ => {
                let i = c - 2;
                Matrix::vstack(&self.ni[i], &self.li[i])
            }
        }
    }

    pub fn lower_order(&self) -> Matrix<T> {
        Matrix::vstack(&self.n0, &self.l0)
    }
}

fn default_labels(m: usize, n: usize) -> Vec<String> {
    (m + 1..=n)
        .map(|k| format!("q{k}"))
        .chain((1..=m).map(|k| format!("w{k}")))
        .collect()
}

/// Splits the rotated system into evolution and hypersurface equations and
/// brings it to almost-canonical form.
pub fn split_and_reduce<T: Scalar>(
    cs: &CharacteristicStructure<T>,
    b: &SideMatrices<T>,
    d: &Matrix<T>,
    tol: &Tolerances<T>,
) -> Result<CanonicalSystem<T>> {
    let n = b.n_unknowns();
    let m = cs.m;
    let p = n - m;
    let nc = b.b.len();

    // hypersurface rows: M⁻¹ z̃ applied to the original equations
    let mm = transversality_check(cs, b, tol.rank)?;
    let zl = Matrix::from_rows(&cs.left_null)?;
    let hyp_ops = &inverse(&mm)? * &zl;
    let st = cs.s.transpose();
    let mut hyp: Vec<Matrix<T>> = b.b.iter().map(|bc| &(&hyp_ops * bc) * &st).collect();
    let mut hyp0 = &(&hyp_ops * d) * &st;
    hyp[0] = Matrix::zeros(m, n);
    hyp[1].set_block(0, 0, &Matrix::identity(m));

    // evolution rows: rotated rows with an invertible u-principal block
    let evolution_rows = select_evolution_rows(&cs.b_prime[0], m, tol.rank)?;
    let mut evo: Vec<Matrix<T>> = cs.b_prime.iter().map(|bp| bp.select_rows(&evolution_rows)).collect();
    let mut evo0 = cs.d_prime.select_rows(&evolution_rows);
    let mut evo_ops = cs.s.select_rows(&evolution_rows);
    evo[0].set_block(0, 0, &Matrix::zeros(p, m));

    // eliminate ∂_x w from the evolution rows using the hypersurface rows
    let g = evo[1].block(0, 0, p, m);
    for c in 1..nc {
        evo[c] = &evo[c] - &(&g * &hyp[c]);
    }
    evo0 = &evo0 - &(&g * &hyp0);
    evo_ops = &evo_ops - &(&g * &hyp_ops);
    evo[1].set_block(0, 0, &Matrix::zeros(p, m));

    // ŵ = w + L^x q, i.e. w = ŵ - L^x q
    let lx = hyp[1].block(0, m, m, p);
    let substitute = |k: &Matrix<T>| -> Matrix<T> {
        let kw = k.block(0, 0, k.rows(), m);
        let kq = &k.block(0, m, k.rows(), p) - &(&kw * &lx);
        Matrix::hstack(&kq, &kw)
    };
    let evo: Vec<Matrix<T>> = evo.iter().map(substitute).collect();
    let evo0 = substitute(&evo0);
    let mut hyp: Vec<Matrix<T>> = hyp.iter().map(substitute).collect();
    hyp0 = substitute(&hyp0);
    hyp[1].set_block(0, 0, &Matrix::zeros(m, p));

    let nu = evo[0].block(0, 0, p, p);
    let nx = evo[1].block(0, 0, p, p);

    // v̂ = P·T·S·v with T = [[I, Lx], [0, I]] in (w, q) order
    let mut t = Matrix::identity(n);
    t.set_block(0, m, &lx);
    let ts = &t * &cs.s;
    let order: Vec<usize> = (m..n).chain(0..m).collect();
    let to_hat = ts.select_rows(&order);

    Ok(CanonicalSystem {
        m,
        n_unknowns: n,
        coord_names: b.names.clone(),
        variables: VariableOrder {
            to_hat,
            labels: default_labels(m, n),
        },
        nu,
        nx,
        ni: evo[2..].to_vec(),
        n0: evo0,
        li: hyp[2..].to_vec(),
        l0: hyp0,
        lx,
        strict: false,
        row_ops: Matrix::vstack(&evo_ops, &hyp_ops),
        evolution_rows,
    })
}

/// Picks `N - m` rows of `B'^u` whose trailing block is invertible: the
/// natural rows `m..N` if they work, otherwise a greedy pivoted choice.
fn select_evolution_rows<T: Scalar>(bu_prime: &Matrix<T>, m: usize, tol: T) -> Result<Vec<usize>> {
    let n = bu_prime.rows();
    let p = n - m;
    let candidates = bu_prime.block(0, m, n, p);
    let natural: Vec<usize> = (m..n).collect();
    let full_rank = |rows: &[usize]| {
        let block = candidates.select_rows(rows);
        let qr = qr_column_pivoted(&block);
        // rank relative to the whole candidate block so a tiny block does not
        // pass on its own scale
        let threshold = tol * candidates.norm();
        (0..p).all(|k| qr.r[(k, k)].abs() > threshold)
    };
    if full_rank(&natural) {
        return Ok(natural);
    }
    let qr = qr_column_pivoted(&candidates.transpose());
    let mut chosen: Vec<usize> = qr.perm[..p].to_vec();
    chosen.sort_unstable();
    if full_rank(&chosen) {
        Ok(chosen)
    } else {
        Err(Error::NotReducible("no choice of evolution rows gives an invertible Nu".into()))
    }
}

/// `C^a ∂_a v̂ + Dc v̂ = 0` with `R = 2 Dc`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSystem<T> {
    /// Index 0 is `u`, 1 is `x`, then transverse.
    pub c: Vec<Matrix<T>>,
    pub dc: Matrix<T>,
    pub r: Matrix<T>,
    pub m: usize,
    pub coord_names: Vec<String>,
}

impl<T: Scalar> CompactSystem<T> {
    pub fn n_unknowns(&self) -> usize {
        self.dc.rows()
    }

    pub fn n_normal(&self) -> usize {
        self.n_unknowns() - self.m
    }

    pub fn nu(&self) -> Matrix<T> {
        let p = self.n_normal();
        self.c[0].block(0, 0, p, p)
    }

    pub fn nx(&self) -> Matrix<T> {
        let p = self.n_normal();
        self.c[1].block(0, 0, p, p)
    }

    /// `C^u + C^x`, the weight of the norm on `Σ_T`.
    pub fn sigma_weight(&self) -> Matrix<T> {
        &self.c[0] + &self.c[1]
    }
}

pub fn compact_form<T: Scalar>(canon: &CanonicalSystem<T>) -> CompactSystem<T> {
    let nc = canon.coord_names.len();
    let dc = canon.lower_order();
    CompactSystem {
        c: (0..nc).map(|c| canon.principal(c)).collect(),
        r: dc.scale(T::lit(2.0)),
        dc,
        m: canon.m,
        coord_names: canon.coord_names.clone(),
    }
}

/// Every intermediate product of the reduction, for reporting.
#[derive(Debug, Clone)]
pub struct Reduction<T> {
    pub sides: SideMatrices<T>,
    pub multiplicity: usize,
    pub structure: CharacteristicStructure<T>,
    pub transversality: Matrix<T>,
    pub canonical: CanonicalSystem<T>,
    pub compact: CompactSystem<T>,
}

/// Runs the whole reduction from a system and chart.
pub fn reduce<T: Scalar>(sys: &FirstOrderSystem<T>, chart: &Chart<T>, tol: &Tolerances<T>) -> Result<Reduction<T>> {
    let sides = side_matrices(sys, chart)?;
    let multiplicity = verify_characteristic(&sides, tol.rank)?;
    let structure = null_structure(&sides, sys.lower_order(), tol)?;
    let transversality = transversality_check(&structure, &sides, tol.rank)?;
    let canonical = split_and_reduce(&structure, &sides, sys.lower_order(), tol)?;
    let compact = compact_form(&canonical);
    Ok(Reduction {
        sides,
        multiplicity,
        structure,
        transversality,
        canonical,
        compact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::load_system;

    const WAVE: &str = include_str!("../data/wave3d.sys");

    fn wave() -> Reduction<f64> {
        let (sys, chart) = load_system(WAVE).unwrap();
        reduce(&sys, &chart, &Tolerances::default()).unwrap()
    }

    fn close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) {
        assert!(a.max_abs_diff(b) <= tol, "{a:?}\n!=\n{b:?}");
    }

    #[test]
    fn wave_null_structure() {
        let r = wave();
        let h = 0.5f64.sqrt();
        assert_eq!(r.structure.m, 1);
        for z in [&r.structure.right_null[0], &r.structure.left_null[0]] {
            for (a, b) in z.iter().zip([h, -h, 0.0, 0.0]) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let s = Matrix::from_f64_rows(&[&[h, -h, 0.0, 0.0], &[h, h, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        close(&r.structure.s, &s, 1e-15);
    }

    #[test]
    fn wave_transversality_is_one_with_unit_vectors() {
        let r = wave();
        assert!((r.transversality[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wave_almost_canonical_blocks() {
        let c = wave().canonical;
        let h = 0.5f64.sqrt();
        close(&c.nu, &Matrix::from_diagonal(&[2.0, 1.0, 1.0]), 1e-14);
        close(&c.nx, &Matrix::from_diagonal(&[-1.0, 0.0, 0.0]), 1e-14);
        assert!(c.lx.max_abs() < 1e-15);
        // ∂_x ŵ − h ∂_y q̂3 − h ∂_z q̂4 = 0, columns (q2, q3, q4, w)
        close(&c.li[0], &Matrix::from_f64_rows(&[&[0.0, -h, 0.0, 0.0]]), 1e-14);
        close(&c.li[1], &Matrix::from_f64_rows(&[&[0.0, 0.0, -h, 0.0]]), 1e-14);
        assert_eq!(c.variables.labels, ["q2", "q3", "q4", "w1"]);
    }

    #[test]
    fn already_aligned_two_by_two() {
        let bu: Matrix<f64> = Matrix::from_f64_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let bx: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let sides = SideMatrices {
            b: vec![bu, bx],
            names: vec!["u".into(), "x".into()],
        };
        let cs = null_structure(&sides, &Matrix::zeros(2, 2), &Tolerances::default()).unwrap();
        assert_eq!(cs.m, 1);
        assert_eq!(cs.right_null[0], vec![1.0, 0.0]);
        assert_eq!(cs.s, Matrix::identity(2));
    }

    #[test]
    fn decoupled_advection_is_returned_unchanged() {
        // v = (q, w): ∂_u q = 0, ∂_x w = 0
        let sys = FirstOrderSystem::new(
            vec!["u".into(), "x".into()],
            vec![Matrix::from_diagonal(&[1.0, 0.0]), Matrix::from_diagonal(&[0.0, 1.0])],
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let r = reduce(&sys, &Chart::identity(2), &Tolerances::default()).unwrap();
        let c = &r.canonical;
        assert_eq!(c.nu, Matrix::from_f64_rows(&[&[1.0]]));
        assert_eq!(c.nx, Matrix::from_f64_rows(&[&[0.0]]));
        assert_eq!(c.variables.to_hat, Matrix::identity(2));
        assert_eq!(c.l0, Matrix::zeros(1, 2));
    }

    #[test]
    fn transversality_failure_for_y_as_x() {
        let (sys, _) = load_system(WAVE).unwrap();
        let chart = Chart::new(
            Matrix::from_f64_rows(&[&[1.0, -1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]),
            vec![0.0; 4],
        )
        .unwrap();
        let err = reduce(&sys, &chart, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::NotTransverse { .. }), "{err}");
    }

    #[test]
    fn greedy_row_selection_for_asymmetric_bu() {
        // B^u = [[0, 1], [0, 0]]: right null e1, left null e2. The rotated
        // natural evolution row is row 1 = (0, 0), so the selector must pick
        // row 0 instead.
        let sys = FirstOrderSystem::new(
            vec!["u".into(), "x".into()],
            vec![Matrix::from_f64_rows(&[&[0.0, 1.0], &[0.0, 0.0]]), Matrix::from_f64_rows(&[&[0.0, 0.0], &[1.0, 0.0]])],
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let r: Reduction<f64> = reduce(&sys, &Chart::identity(2), &Tolerances::default()).unwrap();
        assert_eq!(r.canonical.evolution_rows, vec![0]);
        assert!((r.canonical.nu[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(determinant(&r.canonical.row_ops).unwrap().abs() > 1e-10);
    }

    #[test]
    fn strict_form_has_identity_nu() {
        let c = wave().canonical.to_strict().unwrap();
        assert!(c.strict);
        close(&c.nu, &Matrix::identity(3), 0.0);
        close(&c.nx, &Matrix::from_diagonal(&[-0.5, 0.0, 0.0]), 1e-14);
    }

    #[test]
    fn compact_lower_order_scaling() {
        let c = wave().canonical;
        let zero = compact_form(&c);
        assert_eq!(zero.r, Matrix::zeros(4, 4));
        let d = [1.0, -2.0, 3.0, 0.5];
        let dc = Matrix::from_diagonal(&d);
        let c = c.with_lower_order(dc.block(0, 0, 3, 4), dc.block(3, 0, 1, 4)).unwrap();
        let cf = compact_form(&c);
        assert_eq!(cf.r, Matrix::from_diagonal(&[2.0, -4.0, 6.0, 1.0]));
    }
}
