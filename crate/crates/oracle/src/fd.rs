use std::f64::consts::PI;

/// Central-difference gradient of `loss` at `params`.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(loss: F, params: &[f64], h: f64) -> Vec<f64> {
    assert!(
        (1e-7..=1e-3).contains(&h),
        "finite-difference step {h} outside [1e-7, 1e-3]"
    );
    let mut x = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = loss(&x);
            x[i] = orig - h;
            let down = loss(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Space-time grid produced by [`ade_reference`].
#[derive(Debug, Clone)]
pub struct AdeGrid {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    /// Row-major `ts.len() x xs.len()`.
    pub values: Vec<f64>,
}

impl AdeGrid {
    pub fn node(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.xs.len() + ix]
    }

    /// Bilinear interpolation inside `[0,1] x [-1,1]`.
    pub fn at(&self, t: f64, x: f64) -> f64 {
        let (it, ft) = locate(&self.ts, t);
        let (ix, fx) = locate(&self.xs, x);
        let u00 = self.node(it, ix);
        let u01 = self.node(it, ix + 1);
        let u10 = self.node(it + 1, ix);
        let u11 = self.node(it + 1, ix + 1);
        (1.0 - ft) * ((1.0 - fx) * u00 + fx * u01) + ft * ((1.0 - fx) * u10 + fx * u11)
    }
}

fn locate(nodes: &[f64], s: f64) -> (usize, f64) {
    let n = nodes.len();
    let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
    let pos = ((s - nodes[0]) / h).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n - 2);
    (i, pos - i as f64)
}

/// Crank-Nicolson solution of `u_t + v u_x = kappa u_xx` on `[-1,1] x [0,1]`
/// with `u(+-1, t) = 0` and `u(x, 0) = -sin(pi x)`.
///
/// Advection uses central differences; each step is a tridiagonal solve.
pub fn ade_reference(v: f64, kappa: f64, nx: usize, nt: usize) -> AdeGrid {
    assert!(nx >= 100 && nt >= 100, "ade_reference needs nx, nt >= 100");
    let dx = 2.0 / (nx - 1) as f64;
    let dt = 1.0 / (nt - 1) as f64;
    let xs: Vec<f64> = (0..nx).map(|j| -1.0 + j as f64 * dx).collect();
    let ts: Vec<f64> = (0..nt).map(|n| n as f64 * dt).collect();
    let mut values = vec![0.0; nx * nt];
    for (j, &x) in xs.iter().enumerate() {
        values[j] = -(PI * x).sin();
    }

    // L u_j = lo u_{j-1} + di u_j + up u_{j+1}
    let lo = v / (2.0 * dx) + kappa / (dx * dx);
    let di = -2.0 * kappa / (dx * dx);
    let up = -v / (2.0 * dx) + kappa / (dx * dx);
    let m = nx - 2;
    let a = vec![-0.5 * dt * lo; m];
    let b = vec![1.0 - 0.5 * dt * di; m];
    let c = vec![-0.5 * dt * up; m];
    let mut rhs = vec![0.0; m];
    let mut scratch = vec![0.0; m];

    for n in 1..nt {
        let (prev_rows, cur_rows) = values.split_at_mut(n * nx);
        let prev = &prev_rows[(n - 1) * nx..];
        let cur = &mut cur_rows[..nx];
        for k in 0..m {
            let j = k + 1;
            rhs[k] = prev[j] + 0.5 * dt * (lo * prev[j - 1] + di * prev[j] + up * prev[j + 1]);
        }
        thomas(&a, &b, &c, &mut rhs, &mut scratch);
        cur[0] = 0.0;
        cur[nx - 1] = 0.0;
        cur[1..nx - 1].copy_from_slice(&rhs);
    }
    AdeGrid { xs, ts, values }
}

/// Solves a tridiagonal system in place (`d` becomes the solution).
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], cp: &mut [f64]) {
    let n = d.len();
    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let denom = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / denom;
        d[i] = (d[i] - a[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Uniform-grid solution of Laplace's equation on a region of `[-1,1]^2`.
#[derive(Debug, Clone)]
pub struct LaplaceGrid {
    pub coords: Vec<f64>,
    /// Row-major over `(iy, ix)`; NaN outside the region.
    pub values: Vec<f64>,
    /// Max-norm of the final discrete residual.
    pub residual: f64,
}

impl LaplaceGrid {
    pub fn node(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.coords.len() + ix]
    }

    /// Bilinear interpolation. Corners carrying zero weight are skipped, so
    /// nodes on the region boundary never pick up NaN from outside.
    pub fn at(&self, x: f64, y: f64) -> f64 {
        let (ix, fx) = locate(&self.coords, x);
        let (iy, fy) = locate(&self.coords, y);
        let u00 = self.node(ix, iy);
        let u10 = self.node(ix + 1, iy);
        let u01 = self.node(ix, iy + 1);
        let u11 = self.node(ix + 1, iy + 1);
        let w = [
            ((1.0 - fx) * (1.0 - fy), u00),
            (fx * (1.0 - fy), u10),
            ((1.0 - fx) * fy, u01),
            (fx * fy, u11),
        ];
        w.iter()
            .filter(|(wt, _)| *wt > 1e-12)
            .map(|(wt, u)| wt * u)
            .sum()
    }
}

/// Five-point Laplacian on `[-1,1]^2` restricted to the closed region given by
/// `contains`, with Dirichlet data on every node that has a neighbour (among
/// its eight) outside the region. `n` is the number of cells per unit length.
///
/// The interior system is solved by conjugate gradients until the max-norm
/// residual drops below `1e-10`.
pub fn laplace_reference<C, B>(contains: C, boundary: B, n: usize) -> LaplaceGrid
where
    C: Fn(f64, f64) -> bool,
    B: Fn(f64, f64) -> f64,
{
    assert!(
        n >= 64,
        "laplace_reference needs n >= 64 cells per unit length"
    );
    let m = 2 * n + 1;
    let h = 1.0 / n as f64;
    let coords: Vec<f64> = (0..m).map(|i| -1.0 + i as f64 * h).collect();
    let inside = |ix: isize, iy: isize| -> bool {
        ix >= 0
            && iy >= 0
            && (ix as usize) < m
            && (iy as usize) < m
            && contains(coords[ix as usize], coords[iy as usize])
    };

    let mut values = vec![f64::NAN; m * m];
    let mut index = vec![usize::MAX; m * m];
    let mut unknowns = Vec::new();
    for iy in 0..m {
        for ix in 0..m {
            let (sx, sy) = (ix as isize, iy as isize);
            if !inside(sx, sy) {
                continue;
            }
            let interior = (-1..=1).all(|dy| (-1..=1).all(|dx| inside(sx + dx, sy + dy)));
            if interior {
                index[iy * m + ix] = unknowns.len();
                unknowns.push(iy * m + ix);
                values[iy * m + ix] = 0.0;
            } else {
                values[iy * m + ix] = boundary(coords[ix], coords[iy]);
            }
        }
    }
    let dirichlet = values.iter().filter(|v| v.is_finite()).count() - unknowns.len();
    assert!(
        dirichlet > 0,
        "laplace_reference: region has no Dirichlet nodes"
    );

    let neighbours = |k: usize| [k - 1, k + 1, k - m, k + m];
    // A u = b with A = 4I - adjacency over unknowns
    let mut b = vec![0.0; unknowns.len()];
    for (row, &k) in unknowns.iter().enumerate() {
        for nb in neighbours(k) {
            if index[nb] == usize::MAX {
                b[row] += values[nb];
            }
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (row, &k) in unknowns.iter().enumerate() {
            let mut s = 4.0 * x[row];
            for nb in neighbours(k) {
                let j = index[nb];
                if j != usize::MAX {
                    s -= x[j];
                }
            }
            out[row] = s;
        }
    };

    let len = unknowns.len();
    let mut x = vec![0.0; len];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let max_norm = |v: &[f64]| v.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));
    let mut iterations = 0;
    while max_norm(&r) > 1e-11 && iterations < 20 * len {
        apply(&p, &mut ap);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        for i in 0..len {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }
    // recompute the true residual rather than trusting the recurrence
    apply(&x, &mut ap);
    let residual = ap
        .iter()
        .zip(&b)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    for (row, &k) in unknowns.iter().enumerate() {
        values[k] = x[row];
    }
    LaplaceGrid {
        coords,
        values,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_gradient_of_quadratic() {
        let g = fd_gradient(|p| p[0] * p[0] + 3.0 * p[1], &[1.0, 2.0], 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn ade_initial_slice_is_exact() {
        let grid = ade_reference(1.0, 0.1 / PI, 101, 101);
        for (j, &x) in grid.xs.iter().enumerate() {
            assert_eq!(grid.node(0, j), -(PI * x).sin());
        }
    }

    #[test]
    fn ade_heat_mode() {
        let kappa = 0.1 / PI;
        let grid = ade_reference(0.0, kappa, 2001, 2001);
        let mut err = 0.0_f64;
        for (it, &t) in grid.ts.iter().enumerate().step_by(50) {
            for (ix, &x) in grid.xs.iter().enumerate().step_by(20) {
                let exact = -(-kappa * PI * PI * t).exp() * (PI * x).sin();
                err = err.max((grid.node(it, ix) - exact).abs());
            }
        }
        assert!(err < 2e-4, "heat mode error {err}");
    }

    #[test]
    fn ade_grid_doubling_is_second_order() {
        let kappa = 0.1 / PI;
        let sample = |n: usize| {
            let g = ade_reference(1.0, kappa, n, n);
            [(0.5, -0.5), (0.5, 0.0), (1.0, 0.5), (0.25, 0.25)]
                .iter()
                .map(|&(t, x)| g.at(t, x))
                .collect::<Vec<_>>()
        };
        let (a, b, c) = (sample(201), sample(401), sample(801));
        let d1: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum();
        let d2: f64 = b.iter().zip(&c).map(|(p, q)| (p - q).abs()).sum();
        let ratio = d1 / d2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    fn lshape(x: f64, y: f64) -> bool {
        x.abs() <= 1.0 && y.abs() <= 1.0 && !(x > 0.0 && y < 0.0)
    }

    #[test]
    fn laplace_reproduces_harmonic_quadratic() {
        let grid = laplace_reference(lshape, |x, y| x * x - y * y, 128);
        assert!(grid.residual <= 1e-10);
        let mut err = 0.0_f64;
        for (iy, &y) in grid.coords.iter().enumerate() {
            for (ix, &x) in grid.coords.iter().enumerate() {
                let u = grid.node(ix, iy);
                if u.is_finite() {
                    err = err.max((u - (x * x - y * y)).abs());
                }
            }
        }
        assert!(err < 1e-4, "err {err}");
    }

    #[test]
    fn laplace_constant_data() {
        let grid = laplace_reference(lshape, |_, _| 2.5, 64);
        for u in grid.values.iter().filter(|u| u.is_finite()) {
            assert!((u - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn laplace_grid_doubling_away_from_corner() {
        let exact = |x: f64, y: f64| x.exp() * y.sin();
        let err = |n: usize| {
            let g = laplace_reference(lshape, exact, n);
            let probes = [(-0.5, 0.5), (-0.5, -0.5), (0.5, 0.5), (-0.25, 0.75)];
            probes
                .iter()
                .map(|&(x, y)| (g.at(x, y) - exact(x, y)).abs())
                .fold(0.0_f64, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((3.3..4.7).contains(&ratio), "ratio {ratio}");
    }
}
