//! Gauss-Legendre and Gauss-Lobatto rules, affine maps to elements and 2D
//! tensor products.
//!
//! Nodes are found by Newton iteration on Legendre polynomials (roots of
//! `P_Q` for Gauss-Legendre, roots of `P'_{Q-1}` plus the endpoints for
//! Gauss-Lobatto). Only half the nodes are computed; the rest are mirrored
//! so every rule is exactly symmetric. Rules are memoized per `(family, Q)`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::basis::legendre_triple;
use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureFamily {
    GaussLegendre,
    GaussLobatto,
}

/// Nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub family: QuadratureFamily,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type Cache = RwLock<HashMap<(QuadratureFamily, usize), Arc<QuadratureRule>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memoized(
    family: QuadratureFamily,
    q: usize,
    build: fn(usize) -> QuadratureRule,
) -> Arc<QuadratureRule> {
    if let Some(rule) = cache().read().expect("quadrature cache").get(&(family, q)) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build(q));
    cache()
        .write()
        .expect("quadrature cache")
        .entry((family, q))
        .or_insert(rule)
        .clone()
}

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// `Q`-point Gauss-Legendre rule, exact for polynomials of degree `2Q - 1`.
pub fn gauss_legendre(q: usize) -> Result<Arc<QuadratureRule>> {
    if q == 0 {
        return Err(contract("Gauss-Legendre rule needs at least one point"));
    }
    Ok(memoized(
        QuadratureFamily::GaussLegendre,
        q,
        build_gauss_legendre,
    ))
}

/// `Q`-point Gauss-Lobatto rule including `+-1`, exact for degree `2Q - 3`.
pub fn gauss_lobatto(q: usize) -> Result<Arc<QuadratureRule>> {
    if q < 2 {
        return Err(contract(format!(
            "Gauss-Lobatto rule needs at least two points, got {q}"
        )));
    }
    Ok(memoized(
        QuadratureFamily::GaussLobatto,
        q,
        build_gauss_lobatto,
    ))
}

pub fn rule(family: QuadratureFamily, q: usize) -> Result<Arc<QuadratureRule>> {
    match family {
        QuadratureFamily::GaussLegendre => gauss_legendre(q),
        QuadratureFamily::GaussLobatto => gauss_lobatto(q),
    }
}

fn build_gauss_legendre(q: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q / 2 {
        // Tricomi-style initial guess, largest root first
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp, _) = legendre_triple(q, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, dp, _) = legendre_triple(q, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        let (_, dp, _) = legendre_triple(q, 0.0);
        nodes[q / 2] = 0.0;
        weights[q / 2] = 2.0 / (dp * dp);
    }
    QuadratureRule {
        family: QuadratureFamily::GaussLegendre,
        nodes,
        weights,
    }
}

fn build_gauss_lobatto(q: usize) -> QuadratureRule {
    let n = q - 1;
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let end_w = 2.0 / (q * n) as f64;
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    weights[0] = end_w;
    weights[n] = end_w;
    let weight_at = |x: f64| {
        let (p, _, _) = legendre_triple(n, x);
        2.0 / ((q * n) as f64 * p * p)
    };
    for i in 1..q / 2 {
        let mut x = (std::f64::consts::PI * i as f64 / n as f64).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (_, dp, d2p) = legendre_triple(n, x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        let w = weight_at(x);
        nodes[i] = -x;
        nodes[n - i] = x;
        weights[i] = w;
        weights[n - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
        weights[q / 2] = weight_at(0.0);
    }
    QuadratureRule {
        family: QuadratureFamily::GaussLobatto,
        nodes,
        weights,
    }
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// The rule on `[a, b]`: `x = a + (b - a)(xi + 1)/2`, weights scaled by `(b - a)/2`.
    pub fn map_to_element(&self, a: f64, b: f64) -> Result<ElementRule> {
        if !(a < b) {
            return Err(contract(format!("element [{a}, {b}] is empty or reversed")));
        }
        let half = 0.5 * (b - a);
        Ok(ElementRule {
            a,
            b,
            xi: self.nodes.clone(),
            points: self.nodes.iter().map(|&xi| a + half * (xi + 1.0)).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        })
    }

    /// The rule itself viewed as an [`ElementRule`] on `[-1, 1]`.
    pub fn reference(&self) -> ElementRule {
        ElementRule {
            a: -1.0,
            b: 1.0,
            xi: self.nodes.clone(),
            points: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// A 1D rule mapped onto an element `[a, b]`, remembering reference coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementRule {
    pub a: f64,
    pub b: f64,
    /// Reference coordinates of the nodes.
    pub xi: Vec<f64>,
    /// Physical coordinates of the nodes.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ElementRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `d xi / d x` of the affine map.
    pub fn jacobian_inv(&self) -> f64 {
        2.0 / (self.b - self.a)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Concatenates rules over adjacent sub-intervals `[a, c]` and `[c, b]`
    /// into one rule on `[a, b]`; reference coordinates are re-expressed
    /// relative to the combined interval.
    pub fn join(&self, other: &ElementRule) -> Result<ElementRule> {
        if self.b != other.a {
            return Err(contract("joined rules must share an endpoint"));
        }
        let (a, b) = (self.a, other.b);
        let points: Vec<f64> = self.points.iter().chain(&other.points).copied().collect();
        Ok(ElementRule {
            a,
            b,
            xi: points
                .iter()
                .map(|&x| 2.0 * (x - a) / (b - a) - 1.0)
                .collect(),
            points,
            weights: self.weights.iter().chain(&other.weights).copied().collect(),
        })
    }
}

/// Tensor-product rule on a rectangle; node `(i, j)` is stored at `i * Qy + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule2d {
    pub x: ElementRule,
    pub y: ElementRule,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

pub fn tensor_product(rule_x: &ElementRule, rule_y: &ElementRule) -> Rule2d {
    let mut points = Vec::with_capacity(rule_x.len() * rule_y.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (&x, &wx) in rule_x.points.iter().zip(&rule_x.weights) {
        for (&y, &wy) in rule_y.points.iter().zip(&rule_y.weights) {
            points.push([x, y]);
            weights.push(wx * wy);
        }
    }
    Rule2d {
        x: rule_x.clone(),
        y: rule_y.clone(),
        points,
        weights,
    }
}

impl Rule2d {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w * f(p[0], p[1]))
            .sum()
    }
}
