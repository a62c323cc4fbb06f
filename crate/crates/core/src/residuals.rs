//! Elemental variational residuals.
//!
//! Every residual in this crate is affine in the trial function: for a fixed
//! element, basis and quadrature rule it reads
//!
//! ```text
//! r = sum_t  c_t * M_t * u_{slot_t}(points)  -  rhs
//! ```
//!
//! where `u_slot` is the value or a pure input derivative of the trial
//! function at the block's points. A [`ResidualBlock`] stores exactly this:
//! the points, the operator matrices and the right-hand side (the force
//! projection). Residual values for a network or an exact-solution evaluator
//! and the loss gradient are all computed from the same blocks.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, TestBasis};
use crate::diffengine::{slot_count, ForwardPass, Jet, JetOrder, Slot};
use crate::error::{contract, Error, Result};
use crate::network::Mlp;
use crate::quadrature::{ElementRule, Rule2d};

/// Which integration-by-parts variant of the weak form to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariationalForm {
    R1,
    R2,
    R3,
}

impl std::str::FromStr for VariationalForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "R1" => Ok(Self::R1),
            "R2" => Ok(Self::R2),
            "R3" => Ok(Self::R3),
            _ => Err(Error::Config(format!("unknown variational form `{s}`"))),
        }
    }
}

/// Anything that can report its value and pure input derivatives at a batch
/// of points: a network, or a closed-form solution.
pub trait TrialFunction: Sync {
    fn input_dim(&self) -> usize;

    /// Slot table `S x P` for `points` (`P x dim`).
    fn slots(&self, points: ArrayView2<'_, f64>, order: JetOrder) -> Result<Array2<f64>>;
}

impl TrialFunction for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }

    fn slots(&self, points: ArrayView2<'_, f64>, order: JetOrder) -> Result<Array2<f64>> {
        Ok(ForwardPass::new(self, points, order)?.output().clone())
    }
}

/// Closed-form field written over [`Jet`]s; 1D fields read only `x[0]`.
pub type JetField = fn(&[Jet<2>]) -> Jet<2>;

/// A closed-form solution used in place of a network.
#[derive(Clone, Copy)]
pub struct ExactTrial {
    pub dim: usize,
    pub field: JetField,
}

impl ExactTrial {
    pub fn new(dim: usize, field: JetField) -> Self {
        Self { dim, field }
    }

    pub fn jet(&self, point: &[f64]) -> Jet<2> {
        let mut x = [Jet::constant(0.0); 2];
        for (i, &p) in point.iter().enumerate().take(2) {
            x[i] = Jet::variable(p, i);
        }
        (self.field)(&x[..self.dim])
    }
}

impl TrialFunction for ExactTrial {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn slots(&self, points: ArrayView2<'_, f64>, order: JetOrder) -> Result<Array2<f64>> {
        let dim = self.dim;
        let mut out = Array2::zeros((slot_count(dim, order), points.nrows()));
        for (p, row) in points.rows().into_iter().enumerate() {
            let j = self.jet(row.as_slice().expect("row-major points"));
            out[[0, p]] = j.v;
            for i in 0..dim {
                if order >= JetOrder::First {
                    out[[Slot::D1(i).index(dim), p]] = j.d1[i];
                }
                if order == JetOrder::Second {
                    out[[Slot::D2(i).index(dim), p]] = j.d2[i];
                }
            }
        }
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("exact solution produced {bad}")));
        }
        Ok(out)
    }
}

/// Multiplier of one operator term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Const(f64),
    /// `scale * physical[index]`, for trainable physical parameters.
    Physical {
        index: usize,
        scale: f64,
    },
}

impl Coefficient {
    pub fn value(&self, physical: &[f64]) -> f64 {
        match *self {
            Coefficient::Const(c) => c,
            Coefficient::Physical { index, scale } => scale * physical[index],
        }
    }
}

/// Linear map from one slot at the block's points to residual entries.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    /// `K x P`
    Dense(Array2<f64>),
    /// Pointwise scaling, `K = P`.
    Diagonal(Array1<f64>),
}

impl Operator {
    fn apply(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            Operator::Dense(m) => m.dot(&u),
            Operator::Diagonal(d) => d * &u,
        }
    }

    fn apply_transpose(&self, r: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            Operator::Dense(m) => m.t().dot(&r),
            Operator::Diagonal(d) => d * &r,
        }
    }

    fn rows(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Diagonal(d) => d.len(),
        }
    }

    fn cols(&self) -> usize {
        match self {
            Operator::Dense(m) => m.ncols(),
            Operator::Diagonal(d) => d.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub slot: Slot,
    pub operator: Operator,
    pub coefficient: Coefficient,
}

/// An affine residual functional; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    /// `P x dim`
    pub points: Array2<f64>,
    pub terms: Vec<Term>,
    pub rhs: Array1<f64>,
}

impl ResidualBlock {
    pub fn new(points: Array2<f64>, terms: Vec<Term>, rhs: Array1<f64>) -> Result<Self> {
        let dim = points.ncols();
        for t in &terms {
            if t.operator.cols() != points.nrows() || t.operator.rows() != rhs.len() {
                return Err(contract(format!(
                    "operator of shape {}x{} does not fit {} residuals over {} points",
                    t.operator.rows(),
                    t.operator.cols(),
                    rhs.len(),
                    points.nrows()
                )));
            }
            let axis = match t.slot {
                Slot::Value => 0,
                Slot::D1(i) | Slot::D2(i) => i,
            };
            if axis >= dim {
                return Err(contract(format!(
                    "slot {:?} exceeds input dimension {dim}",
                    t.slot
                )));
            }
        }
        Ok(Self { points, terms, rhs })
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Highest derivative order any term needs.
    pub fn order(&self) -> JetOrder {
        self.terms
            .iter()
            .map(|t| t.slot.order())
            .max()
            .unwrap_or(JetOrder::Value)
    }

    /// Residual given the trial slot table over this block's points
    /// (`S x P`, any order at least [`Self::order`]).
    pub fn residual_from_slots(&self, slots: ArrayView2<'_, f64>, physical: &[f64]) -> Array1<f64> {
        let dim = self.dim();
        let mut r = -&self.rhs;
        for t in &self.terms {
            let c = t.coefficient.value(physical);
            let u = slots.row(t.slot.index(dim));
            r.scaled_add(c, &t.operator.apply(u));
        }
        r
    }

    /// Accumulates `d(sum_k g_k r_k)/d slots` into `cot` (`S x P`) and the
    /// derivative with respect to physical parameters into `phys_grad`.
    pub fn pull_back(
        &self,
        g: ArrayView1<'_, f64>,
        slots: ArrayView2<'_, f64>,
        physical: &[f64],
        mut cot: ndarray::ArrayViewMut2<'_, f64>,
        phys_grad: &mut [f64],
    ) {
        let dim = self.dim();
        for t in &self.terms {
            let row = t.slot.index(dim);
            let back = t.operator.apply_transpose(g);
            cot.row_mut(row)
                .scaled_add(t.coefficient.value(physical), &back);
            if let Coefficient::Physical { index, scale } = t.coefficient {
                phys_grad[index] += scale * back.dot(&slots.row(row));
            }
        }
    }

    pub fn evaluate(&self, trial: &dyn TrialFunction, physical: &[f64]) -> Result<Array1<f64>> {
        if trial.input_dim() != self.dim() {
            return Err(contract(format!(
                "trial function has dimension {}, residual expects {}",
                trial.input_dim(),
                self.dim()
            )));
        }
        let slots = trial.slots(self.points.view(), self.order())?;
        Ok(self.residual_from_slots(slots.view(), physical))
    }
}

fn eval_checked(f: &dyn Fn(&[f64]) -> f64, point: &[f64], what: &str) -> Result<f64> {
    let v = f(point);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            what: what.to_string(),
            node: point.to_vec(),
        })
    }
}

fn points_1d(xs: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).expect("column of points")
}

/// `M[k, q] = w_q * s * table[k, q]`
fn weighted(table: &Array2<f64>, weights: &[f64], s: f64) -> Array2<f64> {
    let mut m = table.clone();
    for (mut col, &w) in m.columns_mut().into_iter().zip(weights) {
        col *= w * s;
    }
    m
}

fn projection_1d(
    rule: &ElementRule,
    test: &Array2<f64>,
    f: &dyn Fn(&[f64]) -> f64,
    what: &str,
) -> Result<Array1<f64>> {
    let vals = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| Ok(w * eval_checked(f, &[x], what)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(test.dot(&Array1::from(vals)))
}

/// Function-approximation residual `R_k = int (u - target) v_k dx` over the
/// rule's element.
pub fn vnn_block(
    rule: &ElementRule,
    basis: &TestBasis,
    target: &dyn Fn(&[f64]) -> f64,
) -> Result<ResidualBlock> {
    let table = basis.table(&rule.xi)?;
    let rhs = projection_1d(rule, &table.value, target, "target")?;
    ResidualBlock::new(
        points_1d(&rule.points),
        vec![Term {
            slot: Slot::Value,
            operator: Operator::Dense(weighted(&table.value, &rule.weights, 1.0)),
            coefficient: Coefficient::Const(1.0),
        }],
        rhs,
    )
}

fn require_compact(basis: &TestBasis) -> Result<()> {
    if basis.kind != BasisKind::CompactPoisson {
        return Err(contract(
            "PDE residuals need test functions vanishing at element endpoints (compact_poisson)",
        ));
    }
    Ok(())
}

/// Residual of `-u'' = f` against compact test functions on the rule's element.
///
/// * R1: `-int u'' phi - F`
/// * R2: `int u' phi' - F`
/// * R3: `-int u phi'' + [u phi']_a^b - F`
///
/// The `u' phi` flux vanishes with the test function; the `u phi'` endpoint
/// term of R3 does not, and is kept.
pub fn poisson1d_block(
    form: VariationalForm,
    rule: &ElementRule,
    basis: &TestBasis,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<ResidualBlock> {
    require_compact(basis)?;
    let table = basis.table(&rule.xi)?;
    let rhs = projection_1d(rule, &table.value, f, "forcing")?;
    let jac = rule.jacobian_inv();
    let w = &rule.weights;
    let block = match form {
        VariationalForm::R1 => ResidualBlock::new(
            points_1d(&rule.points),
            vec![Term {
                slot: Slot::D2(0),
                operator: Operator::Dense(weighted(&table.value, w, -1.0)),
                coefficient: Coefficient::Const(1.0),
            }],
            rhs,
        )?,
        VariationalForm::R2 => ResidualBlock::new(
            points_1d(&rule.points),
            vec![Term {
                slot: Slot::D1(0),
                operator: Operator::Dense(weighted(&table.d1, w, jac)),
                coefficient: Coefficient::Const(1.0),
            }],
            rhs,
        )?,
        VariationalForm::R3 => {
            let q = rule.len();
            let k = basis.count;
            let mut xs = rule.points.clone();
            xs.extend([rule.a, rule.b]);
            let mut m = Array2::zeros((k, q + 2));
            m.slice_mut(ndarray::s![.., ..q])
                .assign(&weighted(&table.d2, w, -jac * jac));
            for kk in 1..=k {
                m[[kk - 1, q]] = -basis.test_fn(kk, -1.0, 1)? * jac;
                m[[kk - 1, q + 1]] = basis.test_fn(kk, 1.0, 1)? * jac;
            }
            ResidualBlock::new(
                points_1d(&xs),
                vec![Term {
                    slot: Slot::Value,
                    operator: Operator::Dense(m),
                    coefficient: Coefficient::Const(1.0),
                }],
                rhs,
            )?
        }
    };
    Ok(block)
}

fn points_2d(pts: &[[f64; 2]]) -> Array2<f64> {
    Array2::from_shape_vec((pts.len(), 2), pts.iter().flatten().copied().collect())
        .expect("2D points")
}

/// `M[k1*K2 + k2, i*Qy + j] = s * w_ij * a[k1, i] * b[k2, j]`
fn tensor_operator(rule: &Rule2d, a: &Array2<f64>, b: &Array2<f64>, s: f64) -> Array2<f64> {
    let (k1, k2) = (a.nrows(), b.nrows());
    let (qx, qy) = (rule.x.len(), rule.y.len());
    let mut m = Array2::zeros((k1 * k2, qx * qy));
    for i in 0..k1 {
        for j in 0..k2 {
            let mut row = m.row_mut(i * k2 + j);
            for p in 0..qx {
                let ap = s * a[[i, p]];
                for q in 0..qy {
                    let idx = p * qy + q;
                    row[idx] = ap * b[[j, q]] * rule.weights[idx];
                }
            }
        }
    }
    m
}

fn projection_2d(
    rule: &Rule2d,
    m: &Array2<f64>,
    f: &dyn Fn(&[f64]) -> f64,
    what: &str,
) -> Result<Array1<f64>> {
    let vals = rule
        .points
        .iter()
        .map(|p| eval_checked(f, p, what))
        .collect::<Result<Vec<f64>>>()?;
    Ok(m.dot(&Array1::from(vals)))
}

/// Residual of `u_xx + u_yy = f` against `phi_k1(x) psi_k2(y)`, flattened
/// with `k1` outer.
///
/// * R1: `int (u_xx + u_yy) phi psi - F`
/// * R2: `-int (u_x phi' psi + u_y phi psi') - F`
/// * R3: `int u (phi'' psi + phi psi'') - int [u phi']_x psi dy - int [u psi']_y phi dx - F`
pub fn poisson2d_block(
    form: VariationalForm,
    rule: &Rule2d,
    basis_x: &TestBasis,
    basis_y: &TestBasis,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<ResidualBlock> {
    require_compact(basis_x)?;
    require_compact(basis_y)?;
    let tx = basis_x.table(&rule.x.xi)?;
    let ty = basis_y.table(&rule.y.xi)?;
    let (jx, jy) = (rule.x.jacobian_inv(), rule.y.jacobian_inv());
    let mass = tensor_operator(rule, &tx.value, &ty.value, 1.0);
    let rhs = projection_2d(rule, &mass, f, "forcing")?;
    let term = |slot, m| Term {
        slot,
        operator: Operator::Dense(m),
        coefficient: Coefficient::Const(1.0),
    };
    match form {
        VariationalForm::R1 => ResidualBlock::new(
            points_2d(&rule.points),
            vec![term(Slot::D2(0), mass.clone()), term(Slot::D2(1), mass)],
            rhs,
        ),
        VariationalForm::R2 => ResidualBlock::new(
            points_2d(&rule.points),
            vec![
                term(Slot::D1(0), tensor_operator(rule, &tx.d1, &ty.value, -jx)),
                term(Slot::D1(1), tensor_operator(rule, &tx.value, &ty.d1, -jy)),
            ],
            rhs,
        ),
        VariationalForm::R3 => {
            let (k1, k2) = (basis_x.count, basis_y.count);
            let (qx, qy) = (rule.x.len(), rule.y.len());
            let nq = qx * qy;
            let mut pts = rule.points.clone();
            // x-edges: (a, y_j) then (b, y_j); y-edges: (x_i, c) then (x_i, d)
            let (a, b, c, d) = (rule.x.a, rule.x.b, rule.y.a, rule.y.b);
            pts.extend(rule.y.points.iter().map(|&y| [a, y]));
            pts.extend(rule.y.points.iter().map(|&y| [b, y]));
            pts.extend(rule.x.points.iter().map(|&x| [x, c]));
            pts.extend(rule.x.points.iter().map(|&x| [x, d]));
            let mut m = Array2::zeros((k1 * k2, pts.len()));
            m.slice_mut(ndarray::s![.., ..nq]).assign(
                &(tensor_operator(rule, &tx.d2, &ty.value, jx * jx)
                    + tensor_operator(rule, &tx.value, &ty.d2, jy * jy)),
            );
            for i in 0..k1 {
                let dl = basis_x.test_fn(i + 1, -1.0, 1)? * jx;
                let dr = basis_x.test_fn(i + 1, 1.0, 1)? * jx;
                for j in 0..k2 {
                    let dlo = basis_y.test_fn(j + 1, -1.0, 1)? * jy;
                    let dhi = basis_y.test_fn(j + 1, 1.0, 1)? * jy;
                    let mut row = m.row_mut(i * k2 + j);
                    for q in 0..qy {
                        let wpsi = rule.y.weights[q] * ty.value[[j, q]];
                        row[nq + q] = dl * wpsi;
                        row[nq + qy + q] = -dr * wpsi;
                    }
                    for p in 0..qx {
                        let wphi = rule.x.weights[p] * tx.value[[i, p]];
                        row[nq + 2 * qy + p] = dlo * wphi;
                        row[nq + 2 * qy + qx + p] = -dhi * wphi;
                    }
                }
            }
            ResidualBlock::new(points_2d(&pts), vec![term(Slot::Value, m)], rhs)
        }
    }
}

/// Residual of `u_t + v u_x - kappa u_xx = 0` on a space-time element with
/// inputs `(t, x)`, against `phi_kt(t) psi_kx(x)` (`k_t` outer). R2 moves
/// one `x` derivative of the diffusion term onto the test function.
pub fn ade_block(
    form: VariationalForm,
    rule: &Rule2d,
    basis_t: &TestBasis,
    basis_x: &TestBasis,
    v: f64,
    kappa: Coefficient,
) -> Result<ResidualBlock> {
    require_compact(basis_t)?;
    require_compact(basis_x)?;
    let tt = basis_t.table(&rule.x.xi)?;
    let tx = basis_x.table(&rule.y.xi)?;
    let jx = rule.y.jacobian_inv();
    let mass = tensor_operator(rule, &tt.value, &tx.value, 1.0);
    let negate = |c: Coefficient| match c {
        Coefficient::Const(k) => Coefficient::Const(-k),
        Coefficient::Physical { index, scale } => Coefficient::Physical {
            index,
            scale: -scale,
        },
    };
    let mut terms = vec![
        Term {
            slot: Slot::D1(0),
            operator: Operator::Dense(mass.clone()),
            coefficient: Coefficient::Const(1.0),
        },
        Term {
            slot: Slot::D1(1),
            operator: Operator::Dense(mass.clone()),
            coefficient: Coefficient::Const(v),
        },
    ];
    match form {
        VariationalForm::R1 => terms.push(Term {
            slot: Slot::D2(1),
            operator: Operator::Dense(mass.clone()),
            coefficient: negate(kappa),
        }),
        VariationalForm::R2 => terms.push(Term {
            slot: Slot::D1(1),
            operator: Operator::Dense(tensor_operator(rule, &tt.value, &tx.d1, jx)),
            coefficient: kappa,
        }),
        VariationalForm::R3 => {
            return Err(contract(
                "advection-diffusion residual supports forms R1 and R2",
            ))
        }
    }
    let k = mass.nrows();
    ResidualBlock::new(points_2d(&rule.points), terms, Array1::zeros(k))
}

/// `R_k = int (u - target) v_k` for `trial` on the rule's element.
pub fn vnn_residual(
    trial: &dyn TrialFunction,
    target: &dyn Fn(&[f64]) -> f64,
    rule: &ElementRule,
    basis: &TestBasis,
) -> Result<Array1<f64>> {
    vnn_block(rule, basis, target)?.evaluate(trial, &[])
}

pub fn poisson1d_residual(
    form: VariationalForm,
    trial: &dyn TrialFunction,
    rule: &ElementRule,
    basis: &TestBasis,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<Array1<f64>> {
    poisson1d_block(form, rule, basis, f)?.evaluate(trial, &[])
}

pub fn poisson2d_residual(
    form: VariationalForm,
    trial: &dyn TrialFunction,
    rule: &Rule2d,
    basis_x: &TestBasis,
    basis_y: &TestBasis,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<Array1<f64>> {
    poisson2d_block(form, rule, basis_x, basis_y, f)?.evaluate(trial, &[])
}

pub fn ade_residual(
    form: VariationalForm,
    trial: &dyn TrialFunction,
    rule: &Rule2d,
    basis_t: &TestBasis,
    basis_x: &TestBasis,
    v: f64,
    kappa: f64,
) -> Result<Array1<f64>> {
    ade_block(form, rule, basis_t, basis_x, v, Coefficient::Const(kappa))?.evaluate(trial, &[])
}
