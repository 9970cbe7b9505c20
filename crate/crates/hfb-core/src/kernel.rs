//! Two-point kernel algebra.
//!
//! A kernel `A(x, y)` is stored dense, row-major with the x index outermost.
//! Composition is the quadrature-weighted matrix product
//! `(u o v)(x, y) = h^d * sum_z u(x, z) v(z, y)`, the adjoint is
//! `A*(x, y) = conj(A(y, x))`, and the identity element is the discrete
//! delta kernel with diagonal `1/h^d`.

use num_complex::Complex64;

use crate::error::{HfbError, Result};
use crate::grid::Grid;
use crate::linalg;

/// One-point complex field on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field1 {
    pub values: Vec<Complex64>,
}

impl Field1 {
    pub fn zeros(grid: &Grid) -> Field1 {
        Field1 { values: vec![Complex64::default(); grid.points()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(usize) -> Complex64) -> Field1 {
        Field1 { values: (0..grid.points()).map(f).collect() }
    }

    /// `L^2(dx)` norm with quadrature weight `h^d`.
    pub fn l2(&self, grid: &Grid) -> f64 {
        (grid.quad() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Structural symmetry of a kernel. `Symmetric` means `A(x,y) = A(y,x)`,
/// `Hermitian` means `A(x,y) = conj(A(y,x))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    None,
    Symmetric,
    Hermitian,
}

/// Two-point kernel over Grid x Grid.
#[derive(Clone, Debug)]
pub struct Kernel2 {
    pub nd: usize,
    pub values: Vec<Complex64>,
    pub symmetry: Symmetry,
}

/// Relative tolerance for symmetry-flag measurement.
const FLAG_TOL: f64 = 1e-10;

impl Kernel2 {
    pub fn zeros(grid: &Grid) -> Kernel2 {
        let nd = grid.points();
        Kernel2 { nd, values: vec![Complex64::default(); nd * nd], symmetry: Symmetry::Symmetric }
    }

    pub fn zeros_like(a: &Kernel2) -> Kernel2 {
        Kernel2 {
            nd: a.nd,
            values: vec![Complex64::default(); a.nd * a.nd],
            symmetry: Symmetry::Symmetric,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<Complex64>) -> Result<Kernel2> {
        let nd = grid.points();
        if values.len() != nd * nd {
            return Err(HfbError::Shape(format!(
                "kernel needs {} entries, got {}",
                nd * nd,
                values.len()
            )));
        }
        let mut k = Kernel2 { nd, values, symmetry: Symmetry::None };
        k.symmetry = k.measure_symmetry();
        Ok(k)
    }

    /// Discrete delta kernel (composition identity): diagonal `1/h^d`.
    pub fn delta(grid: &Grid) -> Kernel2 {
        let nd = grid.points();
        let mut values = vec![Complex64::default(); nd * nd];
        let inv = 1.0 / grid.quad();
        for i in 0..nd {
            values[i * nd + i] = Complex64::new(inv, 0.0);
        }
        Kernel2 { nd, values, symmetry: Symmetry::Hermitian }
    }

    /// Tensor product `(a (x) b)(x, y) = a(x) b(y)`.
    pub fn tensor(grid: &Grid, a: &Field1, b: &Field1) -> Kernel2 {
        let nd = grid.points();
        let mut values = vec![Complex64::default(); nd * nd];
        for x in 0..nd {
            let ax = a.values[x];
            let row = &mut values[x * nd..(x + 1) * nd];
            for (y, slot) in row.iter_mut().enumerate() {
                *slot = ax * b.values[y];
            }
        }
        let mut k = Kernel2 { nd, values, symmetry: Symmetry::None };
        k.symmetry = k.measure_symmetry();
        k
    }

    pub fn at(&self, x: usize, y: usize) -> Complex64 {
        self.values[x * self.nd + y]
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Measures the strictest symmetry flag that holds to `FLAG_TOL`
    /// relative to the largest entry.
    pub fn measure_symmetry(&self) -> Symmetry {
        let scale = self.max_abs();
        if scale == 0.0 {
            return Symmetry::Symmetric;
        }
        let tol = FLAG_TOL * scale;
        let (mut sym, mut herm) = (true, true);
        'outer: for x in 0..self.nd {
            for y in (x + 1)..self.nd {
                let a = self.at(x, y);
                let b = self.at(y, x);
                if (a - b).norm() > tol {
                    sym = false;
                }
                if (a - b.conj()).norm() > tol {
                    herm = false;
                }
                if !sym && !herm {
                    break 'outer;
                }
            }
        }
        // A real symmetric kernel satisfies both classes; report Symmetric.
        if sym {
            return Symmetry::Symmetric;
        }
        if herm && (0..self.nd).all(|i| self.at(i, i).im.abs() <= tol) {
            return Symmetry::Hermitian;
        }
        Symmetry::None
    }

    /// Residuals against the two symmetry classes, absolute.
    pub fn symmetry_residuals(&self) -> (f64, f64) {
        let mut sym = 0.0f64;
        let mut herm = 0.0f64;
        for x in 0..self.nd {
            for y in x..self.nd {
                let a = self.at(x, y);
                let b = self.at(y, x);
                sym = sym.max((a - b).norm());
                herm = herm.max((a - b.conj()).norm());
            }
        }
        (sym, herm)
    }

    /// `L^2(dx dy)` norm with weight `h^(2d)`.
    pub fn l2(&self, grid: &Grid) -> f64 {
        (grid.quad().powi(2) * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Trace `h^d * sum_x A(x, x)`.
    pub fn trace(&self, grid: &Grid) -> Complex64 {
        let mut t = Complex64::default();
        for i in 0..self.nd {
            t += self.at(i, i);
        }
        t * grid.quad()
    }

    /// Diagonal restriction `x -> A(x, x)`.
    pub fn diagonal(&self) -> Field1 {
        Field1 { values: (0..self.nd).map(|i| self.at(i, i)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Rigorous upper bound on the operator norm (with the `h^d` quadrature
    /// weight folded in).
    pub fn op_norm_bound(&self, grid: &Grid) -> f64 {
        grid.quad() * linalg::schur_norm_bound(&self.values, self.nd)
    }

    /// Operator norm via power iteration (quadrature weight folded in).
    pub fn op_norm(&self, grid: &Grid) -> f64 {
        grid.quad() * linalg::op_norm_power(&self.values, self.nd, 120)
    }

    /// Smallest operator eigenvalue of a hermitian kernel.
    pub fn min_eig(&self, grid: &Grid) -> f64 {
        let tol = 1e-13 * linalg::schur_norm_bound(&self.values, self.nd).max(1.0);
        grid.quad() * linalg::min_eig_hermitian(&self.values, self.nd, tol)
    }
}

// -- elementwise helpers used by the integrators --

pub fn conj(a: &Kernel2) -> Kernel2 {
    let values = a.values.iter().map(|v| v.conj()).collect();
    let symmetry = match a.symmetry {
        Symmetry::Symmetric => Symmetry::Symmetric,
        Symmetry::Hermitian => Symmetry::Hermitian,
        Symmetry::None => Symmetry::None,
    };
    Kernel2 { nd: a.nd, values, symmetry }
}

pub fn transpose(a: &Kernel2) -> Kernel2 {
    let nd = a.nd;
    let mut values = vec![Complex64::default(); nd * nd];
    for x in 0..nd {
        for y in 0..nd {
            values[y * nd + x] = a.values[x * nd + y];
        }
    }
    Kernel2 { nd, values, symmetry: a.symmetry }
}

pub fn add(a: &Kernel2, b: &Kernel2) -> Kernel2 {
    assert_eq!(a.nd, b.nd);
    let values = a.values.iter().zip(b.values.iter()).map(|(x, y)| x + y).collect();
    let symmetry = if a.symmetry == b.symmetry { a.symmetry } else { Symmetry::None };
    Kernel2 { nd: a.nd, values, symmetry }
}

pub fn axpy(y: &mut Kernel2, alpha: Complex64, x: &Kernel2) {
    assert_eq!(y.nd, x.nd);
    for (yv, xv) in y.values.iter_mut().zip(x.values.iter()) {
        *yv += alpha * xv;
    }
    if y.symmetry != x.symmetry {
        y.symmetry = Symmetry::None;
    }
}

pub fn scale(a: &mut Kernel2, alpha: Complex64) {
    for v in a.values.iter_mut() {
        *v *= alpha;
    }
    if alpha.im != 0.0 && a.symmetry == Symmetry::Hermitian {
        a.symmetry = Symmetry::None;
    }
}

// -- kernel algebra --

/// `(u o v)(x, y) = h^d sum_z u(x, z) v(z, y)`.
pub fn compose(grid: &Grid, u: &Kernel2, v: &Kernel2) -> Result<Kernel2> {
    let nd = grid.points();
    if u.nd != nd || v.nd != nd {
        return Err(HfbError::Shape("compose: kernel/grid mismatch".into()));
    }
    let values = linalg::matmul_scaled(&u.values, &v.values, nd, grid.quad());
    let mut k = Kernel2 { nd, values, symmetry: Symmetry::None };
    k.symmetry = k.measure_symmetry();
    Ok(k)
}

/// `A*(x, y) = conj(A(y, x))`.
pub fn adjoint(a: &Kernel2) -> Kernel2 {
    let nd = a.nd;
    let mut values = vec![Complex64::default(); nd * nd];
    for x in 0..nd {
        for y in 0..nd {
            values[y * nd + x] = a.values[x * nd + y].conj();
        }
    }
    Kernel2 { nd, values, symmetry: a.symmetry }
}

/// `[A, B] = A o B - B o A`.
pub fn commutator(grid: &Grid, a: &Kernel2, b: &Kernel2) -> Result<Kernel2> {
    let ab = compose(grid, a, b)?;
    let ba = compose(grid, b, a)?;
    let values = ab.values.iter().zip(ba.values.iter()).map(|(x, y)| x - y).collect();
    let mut k = Kernel2 { nd: ab.nd, values, symmetry: Symmetry::None };
    k.symmetry = k.measure_symmetry();
    Ok(k)
}

/// `{A, B} = A o B + B o A`.
pub fn anticommutator(grid: &Grid, a: &Kernel2, b: &Kernel2) -> Result<Kernel2> {
    let ab = compose(grid, a, b)?;
    let ba = compose(grid, b, a)?;
    Ok(add(&ab, &ba))
}

/// Commutator of a pointwise multiplication operator with a kernel:
/// `[w, A](x, y) = (w(x) - w(y)) A(x, y)`.
pub fn commutator_mult(w: &[f64], a: &Kernel2) -> Kernel2 {
    let nd = a.nd;
    assert_eq!(w.len(), nd);
    let mut values = vec![Complex64::default(); nd * nd];
    for x in 0..nd {
        for y in 0..nd {
            values[x * nd + y] = (w[x] - w[y]) * a.values[x * nd + y];
        }
    }
    let mut k = Kernel2 { nd, values, symmetry: Symmetry::None };
    k.symmetry = k.measure_symmetry();
    k
}

/// Anticommutator of a pointwise multiplication operator with a kernel:
/// `{w, A}(x, y) = (w(x) + w(y)) A(x, y)`.
pub fn anticommutator_mult(w: &[f64], a: &Kernel2) -> Kernel2 {
    let nd = a.nd;
    assert_eq!(w.len(), nd);
    let mut values = vec![Complex64::default(); nd * nd];
    for x in 0..nd {
        for y in 0..nd {
            values[x * nd + y] = (w[x] + w[y]) * a.values[x * nd + y];
        }
    }
    Kernel2 { nd, values, symmetry: a.symmetry }
}

/// `(A)_symm(x, y) = A(x, y) + A(y, x)`.
pub fn symmetrize(a: &Kernel2) -> Kernel2 {
    let nd = a.nd;
    let mut values = vec![Complex64::default(); nd * nd];
    for x in 0..nd {
        for y in 0..nd {
            values[x * nd + y] = a.values[x * nd + y] + a.values[y * nd + x];
        }
    }
    Kernel2 { nd, values, symmetry: Symmetry::Symmetric }
}

/// `(A)_skew(x, y) = A(x, y) - conj(A(y, x))`, anti-hermitian output.
pub fn skew(a: &Kernel2) -> Kernel2 {
    let nd = a.nd;
    let mut values = vec![Complex64::default(); nd * nd];
    for x in 0..nd {
        for y in 0..nd {
            values[x * nd + y] = a.values[x * nd + y] - a.values[y * nd + x].conj();
        }
    }
    Kernel2 { nd, values, symmetry: Symmetry::None }
}

/// Pointwise multiplication by an even difference profile:
/// `(V . A)(x, y) = V(x - y) A(x, y)` with `V` sampled on the torus.
pub fn mul_vdiff(grid: &Grid, vdiff: &[f64], a: &Kernel2) -> Kernel2 {
    let nd = a.nd;
    assert_eq!(vdiff.len(), nd);
    let n = grid.n;
    let d = grid.d;
    let mut values = vec![Complex64::default(); nd * nd];
    let mut xi = [0usize; 3];
    let mut yi = [0usize; 3];
    for x in 0..nd {
        grid.decode(x, &mut xi);
        for y in 0..nd {
            grid.decode(y, &mut yi);
            let mut flat = 0usize;
            for a_ in 0..d {
                flat = flat * n + (xi[a_] + n - yi[a_]) % n;
            }
            values[x * nd + y] = vdiff[flat] * a.values[x * nd + y];
        }
    }
    let mut k = Kernel2 { nd, values, symmetry: a.symmetry };
    // V(x-y) is even, so it preserves both flags; recompute defensively.
    k.symmetry = k.measure_symmetry();
    k
}

// -- rotated view --

/// Rotation to difference/sum coordinates `B(u, w) = A(x, y)` with
/// `u = x - y mod L`, `w = x + y mod L` per axis. Requires odd `n`, where
/// the index map is a bijection of the lattice; the change of variables
/// carries a global Jacobian factor 2^d relative to the continuum, which is
/// a fixed constant across all comparisons and is left in place.
pub fn rotate(grid: &Grid, a: &Kernel2) -> Result<Kernel2> {
    if grid.n % 2 == 0 {
        return Err(HfbError::Shape("rotated view requires odd n".into()));
    }
    let nd = grid.points();
    let n = grid.n;
    let d = grid.d;
    let mut values = vec![Complex64::default(); nd * nd];
    let mut xi = [0usize; 3];
    let mut yi = [0usize; 3];
    for x in 0..nd {
        grid.decode(x, &mut xi);
        for y in 0..nd {
            grid.decode(y, &mut yi);
            let mut u = 0usize;
            let mut w = 0usize;
            for a_ in 0..d {
                u = u * n + (xi[a_] + n - yi[a_]) % n;
                w = w * n + (xi[a_] + yi[a_]) % n;
            }
            values[u * nd + w] = a.values[x * nd + y];
        }
    }
    let mut k = Kernel2 { nd, values, symmetry: Symmetry::None };
    k.symmetry = k.measure_symmetry();
    Ok(k)
}

/// Inverse of [`rotate`]: `A(x, y) = B(x - y, x + y)`.
pub fn unrotate(grid: &Grid, b: &Kernel2) -> Result<Kernel2> {
    if grid.n % 2 == 0 {
        return Err(HfbError::Shape("rotated view requires odd n".into()));
    }
    let nd = grid.points();
    let n = grid.n;
    let d = grid.d;
    // x = (u + w) / 2, y = (w - u) / 2 mod n, with 1/2 = (n+1)/2 mod n.
    let inv2 = (n + 1) / 2;
    let mut values = vec![Complex64::default(); nd * nd];
    let mut ui = [0usize; 3];
    let mut wi = [0usize; 3];
    for u in 0..nd {
        grid.decode(u, &mut ui);
        for w in 0..nd {
            grid.decode(w, &mut wi);
            let mut x = 0usize;
            let mut y = 0usize;
            for a_ in 0..d {
                x = x * n + ((ui[a_] + wi[a_]) * inv2) % n;
                y = y * n + ((wi[a_] + n - ui[a_]) * inv2) % n;
            }
            values[x * nd + y] = b.values[u * nd + w];
        }
    }
    let mut k = Kernel2 { nd, values, symmetry: Symmetry::None };
    k.symmetry = k.measure_symmetry();
    Ok(k)
}
