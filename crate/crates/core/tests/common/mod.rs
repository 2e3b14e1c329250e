//! Test-side oracles, kept deliberately independent of the library paths
//! they check: moments come from vertical-chord (scanline) integration
//! instead of fan triangles, Legendre values from the raw three-term
//! recurrence instead of the coefficient matrix, and enclosing circles from
//! brute force instead of Welzl's algorithm.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`, the classic Golub-free construction. Self-checked by
/// `oracle_self_checks` in the property suite.
pub fn gauss_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, accurate enough for Newton
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_p_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_p_with_derivative(n, x);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence and the derivative
/// identity `(t^2 - 1) P_n' = n (t P_n - P_{n-1})`.
fn legendre_p_with_derivative(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut pm = 1.0;
    let mut p = t;
    for k in 1..n {
        let next = (((2 * k + 1) as f64) * t * p - k as f64 * pm) / (k + 1) as f64;
        pm = p;
        p = next;
    }
    let d = n as f64 * (t * p - pm) / (t * t - 1.0);
    (p, d)
}

/// Values `P_j(2x - 1)` for `j = 0..=top` (unnormalized, shifted).
pub fn shifted_p_all(top: usize, x: f64) -> Vec<f64> {
    let t = 2.0 * x - 1.0;
    let mut out = Vec::with_capacity(top + 1);
    out.push(1.0);
    if top >= 1 {
        out.push(t);
    }
    for k in 1..top {
        let next = (((2 * k + 1) as f64) * t * out[k] - k as f64 * out[k - 1]) / (k + 1) as f64;
        out.push(next);
    }
    out
}

/// Values of the shifted normalized Legendre polynomials
/// `L_j(x) = sqrt(2j+1) P_j(2x-1)` for `j = 0..=order`.
pub fn legendre_values(order: usize, x: f64) -> Vec<f64> {
    shifted_p_all(order, x)
        .into_iter()
        .enumerate()
        .map(|(j, p)| ((2 * j + 1) as f64).sqrt() * p)
        .collect()
}

/// Antiderivatives `G_j(y) = int_0^y L_j(t) dt` for `j = 0..=order`, from
/// the identity `(2j+1) P_j = (P_{j+1} - P_{j-1})'` on `[-1, 1]`:
/// `G_j(y) = (P_{j+1}(2y-1) - P_{j-1}(2y-1)) / (2 sqrt(2j+1))` for `j >= 1`
/// (the boundary terms at `y = 0` cancel since `P_k(-1) = (-1)^k`), and
/// `G_0(y) = y`.
pub fn legendre_antiderivatives(order: usize, y: f64) -> Vec<f64> {
    let p = shifted_p_all(order + 1, y);
    let mut out = Vec::with_capacity(order + 1);
    out.push(y);
    for j in 1..=order {
        out.push((p[j + 1] - p[j - 1]) / (2.0 * ((2 * j + 1) as f64).sqrt()));
    }
    out
}

/// The vertical chord `[y_lo, y_hi]` cut from a convex polygon at abscissa
/// `x`, or `None` when the line misses the polygon. Exact at slab-interior
/// abscissas; vertices on the line are handled by the touching edges.
pub fn chord(verts: &[[f64; 2]], x: f64) -> Option<(f64, f64)> {
    let n = verts.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        if a[0] == b[0] {
            if a[0] == x {
                lo = lo.min(a[1].min(b[1]));
                hi = hi.max(a[1].max(b[1]));
            }
            continue;
        }
        let (xmin, xmax) = if a[0] < b[0] { (a[0], b[0]) } else { (b[0], a[0]) };
        if x < xmin || x > xmax {
            continue;
        }
        let y = a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0]);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    if lo <= hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Integrates a vector-valued integrand over `[a, b]` with panel doubling
/// until the whole vector moves by less than `tol`, starting from a Gauss
/// rule already exact for the piecewise-polynomial integrands used here
/// (the doubling is pure self-validation in that case).
fn integrate_adaptive(
    a: f64,
    b: f64,
    dim: usize,
    nodes: usize,
    tol: f64,
    mut f: impl FnMut(f64, &mut [f64]),
) -> Vec<f64> {
    let (gx, gw) = gauss_nodes(nodes);
    let mut buf = vec![0.0; dim];
    let mut prev: Option<Vec<f64>> = None;
    let mut panels = 1usize;
    loop {
        let mut acc = vec![0.0; dim];
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + width * p as f64;
            let mid = lo + 0.5 * width;
            for (t, w) in gx.iter().zip(&gw) {
                let x = mid + 0.5 * width * t;
                f(x, &mut buf);
                let scale = 0.5 * width * w;
                for (acc_v, bv) in acc.iter_mut().zip(&buf) {
                    *acc_v += scale * bv;
                }
            }
        }
        if let Some(pv) = &prev {
            let worst = acc.iter().zip(pv).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if worst <= tol || panels >= 64 {
                return acc;
            }
        }
        prev = Some(acc);
        panels *= 2;
    }
}

fn slab_edges(verts: &[[f64; 2]]) -> Vec<f64> {
    let mut xs: Vec<f64> = verts.iter().map(|v| v[0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Scanline geometric moments: `mu_kl = int x^k (y_hi^{l+1} - y_lo^{l+1}) /
/// (l+1) dx`, integrated slab by slab between vertex abscissas where the
/// chord endpoints are linear in `x`. Returns the full square grid
/// `(order+1) x (order+1)`.
pub fn oracle_geometric_moments(verts: &[[f64; 2]], order: usize) -> Vec<Vec<f64>> {
    let m = order + 1;
    let xs = slab_edges(verts);
    let mut grid = vec![vec![0.0; m]; m];
    for win in xs.windows(2) {
        let vals = integrate_adaptive(win[0], win[1], m * m, order + 2, 1e-13, |x, out| {
            let Some((lo, hi)) = chord(verts, x) else {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            };
            let mut xp = 1.0;
            for k in 0..m {
                let mut lo_p = lo;
                let mut hi_p = hi;
                for l in 0..m {
                    // (y_hi^{l+1} - y_lo^{l+1}) / (l + 1)
                    out[k * m + l] = xp * (hi_p - lo_p) / (l + 1) as f64;
                    lo_p *= lo;
                    hi_p *= hi;
                }
                xp *= x;
            }
        });
        for k in 0..m {
            for l in 0..m {
                grid[k][l] += vals[k * m + l];
            }
        }
    }
    grid
}

/// Scanline Legendre moments: `lambda_ij = int L_i(x) (G_j(y_hi) -
/// G_j(y_lo)) dx` with the antiderivatives `G_j` of the shifted normalized
/// basis. Full square grid.
pub fn oracle_legendre_moments(verts: &[[f64; 2]], order: usize) -> Vec<Vec<f64>> {
    let m = order + 1;
    let xs = slab_edges(verts);
    let mut grid = vec![vec![0.0; m]; m];
    for win in xs.windows(2) {
        let vals = integrate_adaptive(win[0], win[1], m * m, order + 2, 1e-13, |x, out| {
            let Some((lo, hi)) = chord(verts, x) else {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            };
            let li = legendre_values(order, x);
            let g_hi = legendre_antiderivatives(order, hi);
            let g_lo = legendre_antiderivatives(order, lo);
            for i in 0..m {
                for j in 0..m {
                    out[i * m + j] = li[i] * (g_hi[j] - g_lo[j]);
                }
            }
        });
        for i in 0..m {
            for j in 0..m {
                grid[i][j] += vals[i * m + j];
            }
        }
    }
    grid
}

/// Coefficients of the orthonormal polynomials on `[0, 1]` by modified
/// Gram-Schmidt on the monomials under the Hilbert inner product
/// `<x^a, x^b> = 1/(a+b+1)`. Row `i` holds the coefficients of `x^0..x^i`,
/// sign fixed by a positive leading coefficient. Accurate only to a few
/// orders (f64 Gram-Schmidt on monomials is the textbook ill-conditioned
/// construction), which is exactly why it is an oracle for low orders only.
pub fn gram_schmidt_coeffs(order: usize) -> Vec<Vec<f64>> {
    assert!(order <= 6, "the Gram-Schmidt oracle is only trustworthy at low orders");
    let inner = |p: &[f64], q: &[f64]| -> f64 {
        let mut s = 0.0;
        for (a, pa) in p.iter().enumerate() {
            for (b, qb) in q.iter().enumerate() {
                s += pa * qb / (a + b + 1) as f64;
            }
        }
        s
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for i in 0..=order {
        // start from x^i, subtract projections onto the finished rows
        let mut p = vec![0.0; i + 1];
        p[i] = 1.0;
        for row in &rows {
            let c = inner(&p, row);
            for (pv, rv) in p.iter_mut().zip(row) {
                *pv -= c * rv;
            }
        }
        let norm = inner(&p, &p).sqrt();
        for pv in p.iter_mut() {
            *pv /= norm;
        }
        if p[i] < 0.0 {
            for pv in p.iter_mut() {
                *pv = -*pv;
            }
        }
        rows.push(p);
    }
    rows
}

fn circle_through(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<([f64; 2], f64)> {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-14 {
        return None;
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
    let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
    let r = ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt();
    Some(([ux, uy], r))
}

fn covers(center: [f64; 2], r: f64, pts: &[[f64; 2]]) -> bool {
    pts.iter().all(|p| {
        ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt() <= r + 1e-12
    })
}

/// Radius of the smallest circle enclosing the points, by brute force over
/// all diameter pairs and all circumscribed triples.
pub fn brute_circumradius(pts: &[[f64; 2]]) -> f64 {
    assert!(pts.len() >= 2);
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let center = [0.5 * (pts[i][0] + pts[j][0]), 0.5 * (pts[i][1] + pts[j][1])];
            let r = 0.5
                * ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
            if r < best && covers(center, r, pts) {
                best = r;
            }
            for k in (j + 1)..pts.len() {
                if let Some((c, r)) = circle_through(pts[i], pts[j], pts[k]) {
                    if r < best && covers(c, r, pts) {
                        best = r;
                    }
                }
            }
        }
    }
    best
}

/// Central-difference gradient of `f` at `h`.
pub fn central_difference_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    h: &[f64],
    eps: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(h.len());
    let mut probe = h.to_vec();
    for i in 0..h.len() {
        probe[i] = h[i] + eps;
        let fp = f(&probe);
        probe[i] = h[i] - eps;
        let fm = f(&probe);
        probe[i] = h[i];
        out.push((fp - fm) / (2.0 * eps));
    }
    out
}

/// Largest absolute entrywise difference between two square grids.
pub fn grid_max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (ra, rb) in a.iter().zip(b) {
        for (va, vb) in ra.iter().zip(rb) {
            worst = worst.max((va - vb).abs());
        }
    }
    worst
}
