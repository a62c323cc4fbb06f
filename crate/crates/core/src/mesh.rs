//! Non-overlapping element decompositions: 1D partitions, structured 2D
//! grids, and the L-shaped domain covered by rectangles.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition1D {
    boundaries: Vec<f64>,
}

fn check_increasing(b: &[f64], what: &str) -> Result<()> {
    if b.len() < 2 {
        return Err(contract(format!("{what} needs at least two boundaries")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(contract(format!("{what} has non-finite boundaries")));
    }
    if b.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(contract(format!(
            "{what} boundaries must be strictly increasing: {b:?}"
        )));
    }
    Ok(())
}

pub fn uniform_partition(a: f64, b: f64, n_el: usize) -> Result<Decomposition1D> {
    if n_el == 0 {
        return Err(contract("partition needs at least one element"));
    }
    if !(a < b) {
        return Err(contract(format!(
            "interval [{a}, {b}] is empty or reversed"
        )));
    }
    let h = (b - a) / n_el as f64;
    let mut boundaries: Vec<f64> = (0..n_el).map(|i| a + h * i as f64).collect();
    boundaries.push(b);
    Ok(Decomposition1D { boundaries })
}

pub fn explicit_partition(boundaries: Vec<f64>) -> Result<Decomposition1D> {
    check_increasing(&boundaries, "partition")?;
    Ok(Decomposition1D { boundaries })
}

impl Decomposition1D {
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.boundaries[e], self.boundaries[e + 1])
    }

    pub fn elements(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.boundaries.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn start(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn end(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    pub fn measure(&self) -> f64 {
        self.elements().map(|(a, b)| b - a).sum()
    }
}

/// Structured grid of rectangles `[x_ex, x_ex+1] x [y_ey, y_ey+1]`, of which
/// only the `active` index pairs belong to the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition2D {
    x: Decomposition1D,
    y: Decomposition1D,
    active: BTreeSet<(usize, usize)>,
}

/// An active element of a [`Decomposition2D`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element2D {
    pub index: (usize, usize),
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Element2D {
    pub fn area(&self) -> f64 {
        (self.x.1 - self.x.0) * (self.y.1 - self.y.0)
    }
}

impl Decomposition2D {
    /// All cells of the tensor grid active.
    pub fn rectangular(x: Decomposition1D, y: Decomposition1D) -> Self {
        let active = (0..x.len())
            .flat_map(|i| (0..y.len()).map(move |j| (i, j)))
            .collect();
        Self { x, y, active }
    }

    pub fn with_active(
        x: Decomposition1D,
        y: Decomposition1D,
        active: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let active: BTreeSet<_> = active.into_iter().collect();
        if active.is_empty() {
            return Err(contract("2D decomposition has no active elements"));
        }
        if let Some(&(i, j)) = active.iter().find(|&&(i, j)| i >= x.len() || j >= y.len()) {
            return Err(contract(format!(
                "active element ({i}, {j}) outside the grid"
            )));
        }
        Ok(Self { x, y, active })
    }

    pub fn uniform(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        Ok(Self::rectangular(
            uniform_partition(a, b, nx)?,
            uniform_partition(a, b, ny)?,
        ))
    }

    pub fn x(&self) -> &Decomposition1D {
        &self.x
    }

    pub fn y(&self) -> &Decomposition1D {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, ex: usize, ey: usize) -> bool {
        self.active.contains(&(ex, ey))
    }

    /// Active elements in lexicographic `(e_x, e_y)` order.
    pub fn elements(&self) -> impl Iterator<Item = Element2D> + '_ {
        self.active.iter().map(|&(i, j)| Element2D {
            index: (i, j),
            x: self.x.element(i),
            y: self.y.element(j),
        })
    }

    pub fn measure(&self) -> f64 {
        self.elements().map(|e| e.area()).sum()
    }

    /// Whether `(x, y)` lies in the closure of some active element.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.elements()
            .any(|e| e.x.0 <= x && x <= e.x.1 && e.y.0 <= y && y <= e.y.1)
    }

    /// Unit edges of active elements not shared with another active element,
    /// i.e. the domain boundary, as segments `(start, end)`.
    pub fn boundary_segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        let (nx, ny) = (self.x.len(), self.y.len());
        let active = |i: isize, j: isize| {
            i >= 0
                && j >= 0
                && (i as usize) < nx
                && (j as usize) < ny
                && self.is_active(i as usize, j as usize)
        };
        let mut segs = Vec::new();
        for e in self.elements() {
            let (i, j) = (e.index.0 as isize, e.index.1 as isize);
            let ((x0, x1), (y0, y1)) = (e.x, e.y);
            if !active(i, j - 1) {
                segs.push(([x0, y0], [x1, y0]));
            }
            if !active(i + 1, j) {
                segs.push(([x1, y0], [x1, y1]));
            }
            if !active(i, j + 1) {
                segs.push(([x1, y1], [x0, y1]));
            }
            if !active(i - 1, j) {
                segs.push(([x0, y1], [x0, y0]));
            }
        }
        segs
    }
}

/// `[-1, 1]^2` without the quadrant `(0, 1) x (-1, 0)`.
///
/// Coarse: three unit squares. Fine: both axes graded geometrically with
/// ratio 1/2 toward the reentrant corner on the side where the L is cut,
/// `x: -1, -1/2, -1/4, -1/8, -1/16, 0, 1` and `y: -1, 0, 1/16, 1/8, 1/4, 1/2, 1`,
/// which leaves 35 active cells.
pub fn lshape_partition(fine: bool) -> Decomposition2D {
    let (xb, yb) = if fine {
        (
            vec![-1.0, -0.5, -0.25, -0.125, -0.0625, 0.0, 1.0],
            vec![-1.0, 0.0, 0.0625, 0.125, 0.25, 0.5, 1.0],
        )
    } else {
        (vec![-1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0])
    };
    let x = explicit_partition(xb).expect("static partition");
    let y = explicit_partition(yb).expect("static partition");
    let mut active = Vec::new();
    for i in 0..x.len() {
        for j in 0..y.len() {
            let (xa, _) = x.element(i);
            let (_, yb) = y.element(j);
            let cut = xa >= 0.0 && yb <= 0.0;
            if !cut {
                active.push((i, j));
            }
        }
    }
    Decomposition2D::with_active(x, y, active).expect("static decomposition")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_partitions() {
        assert_eq!(
            uniform_partition(-1.0, 1.0, 1).unwrap().boundaries(),
            &[-1.0, 1.0]
        );
        assert_eq!(
            uniform_partition(-1.0, 1.0, 2).unwrap().boundaries(),
            &[-1.0, 0.0, 1.0]
        );
        let d = uniform_partition(-1.0, 1.0, 4).unwrap();
        assert!(d.elements().all(|(a, b)| b - a == 0.5));
        assert!(uniform_partition(-1.0, 1.0, 0).is_err());
        assert!(uniform_partition(1.0, -1.0, 2).is_err());
    }

    #[test]
    fn explicit_partitions() {
        let d = explicit_partition(vec![-1.0, -0.2, 0.2, 1.0]).unwrap();
        assert_eq!(d.len(), 3);
        assert!((d.element(1).1 - d.element(1).0 - 0.4).abs() < 1e-15);
        assert_eq!(explicit_partition(vec![-1.0, 1.0]).unwrap().len(), 1);
        assert_eq!(
            explicit_partition(vec![-1.0, -0.05, 0.15, 1.0])
                .unwrap()
                .len(),
            3
        );
        assert!(explicit_partition(vec![-1.0, 0.5, 0.2, 1.0]).is_err());
        assert!(explicit_partition(vec![-1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(explicit_partition(vec![0.0]).is_err());
    }

    #[test]
    fn lshape_layouts() {
        let coarse = lshape_partition(false);
        assert_eq!(coarse.len(), 3);
        assert!(!coarse.is_active(1, 0));
        assert!((coarse.measure() - 3.0).abs() < 1e-13);
        let fine = lshape_partition(true);
        assert_eq!(fine.len(), 35);
        assert!((fine.measure() - 3.0).abs() < 1e-13);
        assert!(fine.contains(-0.5, -0.5));
        assert!(!fine.contains(0.5, -0.5));
        assert!(fine.contains(0.0, -0.5));
    }

    #[test]
    fn boundary_segments_trace_the_perimeter() {
        let sq = Decomposition2D::uniform(-1.0, 1.0, 2, 2).unwrap();
        let len: f64 = sq
            .boundary_segments()
            .iter()
            .map(|(a, b)| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt())
            .sum();
        assert!((len - 8.0).abs() < 1e-14);
        for fine in [false, true] {
            let l = lshape_partition(fine);
            let len: f64 = l
                .boundary_segments()
                .iter()
                .map(|(a, b)| (b[0] - a[0]).abs() + (b[1] - a[1]).abs())
                .sum();
            assert!((len - 8.0).abs() < 1e-14, "fine={fine} len={len}");
        }
    }

    #[test]
    fn rejects_empty_or_out_of_range_active_sets() {
        let x = uniform_partition(0.0, 1.0, 2).unwrap();
        let y = uniform_partition(0.0, 1.0, 2).unwrap();
        assert!(Decomposition2D::with_active(x.clone(), y.clone(), []).is_err());
        assert!(Decomposition2D::with_active(x, y, [(2, 0)]).is_err());
    }
}
