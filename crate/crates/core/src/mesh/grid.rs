use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::atomic::{AtomicU64, Ordering};

use faer::prelude::*;
use faer::Mat;

use crate::error::{Error, Result};

use super::domain::{gauss_curvature, DomainSpec};
use super::field::ScalarField;

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// Lattice points whose level-set value is within this of zero are boundary nodes.
const LATTICE_ON_BOUNDARY: f64 = 1e-12;

/// Unit stencil directions: `x`, `y`, the diagonal and the anti-diagonal.
pub const DIRECTIONS: [[f64; 2]; 4] = [
    [1.0, 0.0],
    [0.0, 1.0],
    [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
    [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
];
const STEPS: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// One side of a three-point stencil: the neighbouring node and its distance.
///
/// `dist` equals the lattice spacing along the direction unless the segment
/// leaves the domain, in which case the neighbour is the boundary intersection
/// (Shortley-Weller fractional spacing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub node: usize,
    pub dist: f64,
}

/// Second-difference stencils along each direction at an interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    /// `arms[k] = [forward, backward]` along `DIRECTIONS[k]`. Only `arms[0]` is used in 1D.
    pub arms: [[Arm; 2]; 4],
    /// True when every arm has full lattice length.
    pub regular: bool,
    /// `taps[k]`: `(node, weight)` pairs of the second difference along
    /// direction `k`, centre first. Unused slots carry weight zero.
    pub taps: [[(usize, f64); 4]; 4],
}

impl Stencil {
    fn new(node: usize, arms: [[Arm; 2]; 4], regular: bool) -> Self {
        let taps = std::array::from_fn(|k| {
            let [fwd, bwd] = arms[k];
            let w = second_derivative_weights(&[0.0, fwd.dist, -bwd.dist]);
            [
                (node, w[0]),
                (fwd.node, w[1]),
                (bwd.node, w[2]),
                (node, 0.0),
            ]
        });
        Stencil {
            arms,
            regular,
            taps,
        }
    }

    /// Replaces the three-point difference along `k` by a four-point one
    /// through an extra node at signed offset `offset`, exact for cubics.
    fn extend(&mut self, k: usize, extra: usize, offset: f64) {
        let [fwd, bwd] = self.arms[k];
        let center = self.taps[k][0].0;
        let w = second_derivative_weights(&[0.0, fwd.dist, -bwd.dist, offset]);
        self.taps[k] = [
            (center, w[0]),
            (fwd.node, w[1]),
            (bwd.node, w[2]),
            (extra, w[3]),
        ];
    }
}

/// Weights of the second derivative at 0 from values at `offsets`
/// (three or four distinct points), exact for polynomials of degree
/// `offsets.len() - 1`.
fn second_derivative_weights(offsets: &[f64]) -> Vec<f64> {
    (0..offsets.len())
        .map(|j| {
            let others = offsets
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &s)| s);
            let denom: f64 = others.clone().map(|s| offsets[j] - s).product();
            let num = if offsets.len() == 3 {
                2.0
            } else {
                -2.0 * others.sum::<f64>()
            };
            num / denom
        })
        .collect()
}

/// Data carried by each boundary node.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode {
    pub normal: [f64; 2],
    pub curvature: f64,
    /// Share of boundary measure (arclength in 2D, 1 per endpoint in 1D).
    pub arc_weight: f64,
    /// One-sided gradient weights over nodes, second-order accurate.
    pub gradient: Vec<(usize, [f64; 2])>,
    /// One-sided Hessian weights `[xx, yy, xy]` over nodes.
    pub hessian: Vec<(usize, [f64; 3])>,
    /// Weights extrapolating interior values of a derived field to this node.
    pub extrapolation: Vec<(usize, f64)>,
}

/// A discretized domain: Cartesian nodes clipped to the domain, boundary
/// intersections, stencils and quadrature weights.
#[derive(Debug, Clone)]
pub struct Grid {
    id: u64,
    domain: DomainSpec,
    resolution: usize,
    h: f64,
    coords: Vec<[f64; 2]>,
    n_interior: usize,
    stencils: Vec<Stencil>,
    boundary: Vec<BoundaryNode>,
    weights: Vec<f64>,
}

/// Builds a grid with `resolution` lattice points across the domain's widest extent.
pub fn build_grid(domain: DomainSpec, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    if resolution < 4 {
        return Err(Error::InvalidParameter(format!(
            "resolution must be at least 4 (got {resolution})"
        )));
    }
    match domain {
        DomainSpec::Interval { a, b } => Ok(build_interval(domain, a, b, resolution)),
        _ => build_planar(domain, resolution),
    }
}

impl Grid {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_interior(&self) -> usize {
        self.n_interior
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn interior_coords(&self) -> &[[f64; 2]] {
        &self.coords[..self.n_interior]
    }

    pub fn boundary_coords(&self) -> &[[f64; 2]] {
        &self.coords[self.n_interior..]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        node >= self.n_interior
    }

    pub fn stencils(&self) -> &[Stencil] {
        &self.stencils
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    /// Interior quadrature weights, one per node (zero at boundary nodes in 2D).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of stencil directions in use.
    pub fn num_directions(&self) -> usize {
        if self.dim() == 1 {
            1
        } else {
            4
        }
    }

    pub fn check(&self, field: &ScalarField) -> Result<()> {
        if field.grid_id() == self.id {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Builds a field from interior values, filling boundary nodes by one-sided
    /// extrapolation.
    pub fn extend_interior(&self, interior: &[f64]) -> Result<ScalarField> {
        if interior.len() != self.n_interior {
            return Err(Error::GridMismatch);
        }
        let boundary: Vec<f64> = self
            .boundary
            .iter()
            .map(|b| b.extrapolation.iter().map(|&(n, c)| c * interior[n]).sum())
            .collect();
        ScalarField::from_parts(self, interior, &boundary)
    }
}

fn next_id() -> u64 {
    NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed)
}

fn build_interval(domain: DomainSpec, a: f64, b: f64, resolution: usize) -> Grid {
    let n = resolution;
    let h = (b - a) / (n - 1) as f64;
    let x = |i: usize| if i == n - 1 { b } else { a + i as f64 * h };
    // interior node k <-> lattice index k + 1; boundary: a then b
    let n_int = n - 2;
    let lattice_to_node = |i: usize| -> usize {
        if i == 0 {
            n_int
        } else if i == n - 1 {
            n_int + 1
        } else {
            i - 1
        }
    };
    let mut coords: Vec<[f64; 2]> = (1..n - 1).map(|i| [x(i), 0.0]).collect();
    coords.push([a, 0.0]);
    coords.push([b, 0.0]);

    let stencils = (1..n - 1)
        .map(|i| {
            let fwd = Arm {
                node: lattice_to_node(i + 1),
                dist: h,
            };
            let bwd = Arm {
                node: lattice_to_node(i - 1),
                dist: h,
            };
            Stencil::new(i - 1, [[fwd, bwd]; 4], true)
        })
        .collect();

    // one-sided second-order derivatives at the endpoints; cubic extrapolation
    let end = |sign: f64, lattice: [usize; 4]| -> BoundaryNode {
        let nodes = lattice.map(lattice_to_node);
        // derivative in +x direction
        let g = [-3.0, 4.0, -1.0].map(|c| -sign * c / (2.0 * h));
        let hs = [2.0, -5.0, 4.0, -1.0].map(|c| c / (h * h));
        let ext = [4.0, -6.0, 4.0, -1.0];
        BoundaryNode {
            normal: [sign, 0.0],
            curvature: 1.0,
            arc_weight: 1.0,
            gradient: (0..3).map(|k| (nodes[k], [g[k], 0.0])).collect(),
            hessian: (0..4).map(|k| (nodes[k], [hs[k], 0.0, 0.0])).collect(),
            extrapolation: {
                let inward = |k: usize| if sign < 0.0 { k } else { n - 1 - k };
                let coeffs: &[f64] = match n_int {
                    2 => &[2.0, -1.0],
                    3 => &[3.0, -3.0, 1.0],
                    _ => &ext,
                };
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (lattice_to_node(inward(k + 1)), c))
                    .collect()
            },
        }
    };
    let left = end(-1.0, [0, 1, 2, 3]);
    let right = end(1.0, [n - 1, n - 2, n - 3, n - 4]);

    let mut weights = vec![h; n_int];
    weights.push(0.5 * h);
    weights.push(0.5 * h);

    Grid {
        id: next_id(),
        domain,
        resolution,
        h,
        coords,
        n_interior: n_int,
        stencils,
        boundary: vec![left, right],
        weights,
    }
}

/// Where exactly one arm along a direction is cut short by the boundary, adds
/// the next node beyond the opposite full-length arm.
fn extend_cut_stencils(stencils: &mut [Stencil], n_int: usize, h: f64) {
    let cut = |arm: &Arm, full: f64| arm.dist < full * (1.0 - 1e-12);
    for i in 0..stencils.len() {
        for (k, &(si, sj)) in STEPS.iter().enumerate() {
            let full = h * ((si * si + sj * sj) as f64).sqrt();
            let [fwd, bwd] = stencils[i].arms[k];
            let (near, side, sign) = match (cut(&fwd, full), cut(&bwd, full)) {
                (true, false) => (bwd, 1, -1.0),
                (false, true) => (fwd, 0, 1.0),
                _ => continue,
            };
            if near.node >= n_int {
                continue;
            }
            let far = stencils[near.node].arms[k][side];
            stencils[i].extend(k, far.node, sign * (near.dist + far.dist));
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Site {
    Interior(usize),
    OnBoundary,
    Outside,
}

/// Boundary node identity used before boundary nodes are sorted.
#[derive(Clone, Copy)]
enum PendingArm {
    Interior(usize, f64),
    Boundary(usize, f64),
}

fn build_planar(domain: DomainSpec, resolution: usize) -> Result<Grid> {
    let n = resolution;
    let (sa, sb) = domain.semi_axes();
    let half = sa.max(sb);
    let h = 2.0 * half / (n - 1) as f64;
    let lat = |i: i64| -half + i as f64 * h;

    let mut sites = vec![Site::Outside; n * n];
    let mut coords: Vec<[f64; 2]> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let p = [lat(i as i64), lat(j as i64)];
            let lv = domain.level(p);
            sites[j * n + i] = if lv < -LATTICE_ON_BOUNDARY {
                coords.push(p);
                Site::Interior(coords.len() - 1)
            } else if lv <= LATTICE_ON_BOUNDARY {
                Site::OnBoundary
            } else {
                Site::Outside
            };
        }
    }
    let n_int = coords.len();
    if n_int == 0 {
        return Err(Error::GridResolution("no interior nodes".into()));
    }
    let site = |i: i64, j: i64| -> Site {
        if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
            Site::Outside
        } else {
            sites[j as usize * n + i as usize]
        }
    };

    // boundary points keyed by quantized coordinates
    let mut bpoints: Vec<[f64; 2]> = Vec::new();
    let mut bkeys: HashMap<(i64, i64), usize> = HashMap::new();
    let mut add_boundary = |p: [f64; 2]| -> usize {
        let p = domain.project_to_boundary(p);
        let key = (
            (p[0] / h * 1e7).round() as i64,
            (p[1] / h * 1e7).round() as i64,
        );
        *bkeys.entry(key).or_insert_with(|| {
            bpoints.push(p);
            bpoints.len() - 1
        })
    };

    let mut pending: Vec<([[PendingArm; 2]; 4], bool)> = Vec::with_capacity(n_int);
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            if !matches!(site(i, j), Site::Interior(_)) {
                continue;
            }
            let p = [lat(i), lat(j)];
            let mut regular = true;
            let mut arms = [[PendingArm::Interior(0, 0.0); 2]; 4];
            for (k, &(si, sj)) in STEPS.iter().enumerate() {
                let full = h * ((si * si + sj * sj) as f64).sqrt();
                for (side, sign) in [1i64, -1].into_iter().enumerate() {
                    let (ni, nj) = (i + sign * si, j + sign * sj);
                    arms[k][side] = match site(ni, nj) {
                        Site::Interior(idx) => PendingArm::Interior(idx, full),
                        Site::OnBoundary => {
                            PendingArm::Boundary(add_boundary([lat(ni), lat(nj)]), full)
                        }
                        Site::Outside => {
                            regular = false;
                            let dir = DIRECTIONS[k].map(|c| c * sign as f64);
                            let t = domain.ray_exit(p, dir).min(full);
                            let q = [p[0] + t * dir[0], p[1] + t * dir[1]];
                            PendingArm::Boundary(add_boundary(q), t)
                        }
                    };
                }
            }
            pending.push((arms, regular));
        }
    }

    // order boundary nodes by parametric angle
    let mut order: Vec<usize> = (0..bpoints.len()).collect();
    order.sort_by(|&x, &y| {
        domain
            .boundary_angle(bpoints[x])
            .total_cmp(&domain.boundary_angle(bpoints[y]))
    });
    let mut rank = vec![0usize; bpoints.len()];
    for (r, &b) in order.iter().enumerate() {
        rank[b] = r;
    }
    let mut stencils: Vec<Stencil> = pending
        .into_iter()
        .enumerate()
        .map(|(node, (arms, regular))| {
            let arms = arms.map(|pair| {
                pair.map(|a| match a {
                    PendingArm::Interior(node, dist) => Arm { node, dist },
                    PendingArm::Boundary(b, dist) => Arm {
                        node: n_int + rank[b],
                        dist,
                    },
                })
            });
            Stencil::new(node, arms, regular)
        })
        .collect();
    extend_cut_stencils(&mut stencils, n_int, h);
    for &b in &order {
        coords.push(bpoints[b]);
    }
    let nb = order.len();

    // chord-trapezoid arclength weights
    let bcoords = &coords[n_int..];
    let chord = |a: usize, b: usize| {
        let (p, q) = (bcoords[a], bcoords[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    };
    let arc: Vec<f64> = (0..nb)
        .map(|k| 0.5 * (chord(k, (k + 1) % nb) + chord(k, (k + nb - 1) % nb)))
        .collect();

    let buckets = Buckets::new(&coords, h, half);
    let mut boundary = Vec::with_capacity(nb);
    for (k, &p) in bcoords.iter().enumerate() {
        let fit = local_fit(&buckets, &coords, p, h, |_| true)?;
        let interior_fit = local_fit(&buckets, &coords, p, h, |m| m < n_int)?;
        boundary.push(BoundaryNode {
            normal: domain.outward_normal(p),
            curvature: gauss_curvature(&domain, p)?,
            arc_weight: arc[k],
            gradient: fit
                .nodes
                .iter()
                .enumerate()
                .map(|(c, &m)| (m, [fit.weights[1][c], fit.weights[2][c]]))
                .collect(),
            hessian: fit
                .nodes
                .iter()
                .enumerate()
                .map(|(c, &m)| (m, [fit.weights[3][c], fit.weights[5][c], fit.weights[4][c]]))
                .collect(),
            extrapolation: interior_fit
                .nodes
                .iter()
                .enumerate()
                .map(|(c, &m)| (m, interior_fit.weights[0][c]))
                .collect(),
        });
    }

    let weights = planar_weights(&domain, &sites, n, h, half, n_int, nb)?;

    Ok(Grid {
        id: next_id(),
        domain,
        resolution,
        h,
        coords,
        n_interior: n_int,
        stencils,
        boundary,
        weights,
    })
}

/// Spatial hash of nodes by nearest lattice cell.
struct Buckets {
    h: f64,
    half: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Buckets {
    fn new(coords: &[[f64; 2]], h: f64, half: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut b = Buckets {
            h,
            half,
            cells: HashMap::new(),
        };
        for (n, &p) in coords.iter().enumerate() {
            cells.entry(b.cell(p)).or_default().push(n);
        }
        b.cells = cells;
        b
    }

    fn cell(&self, p: [f64; 2]) -> (i64, i64) {
        (
            ((p[0] + self.half) / self.h).round() as i64,
            ((p[1] + self.half) / self.h).round() as i64,
        )
    }

    fn within(&self, p: [f64; 2], radius: f64, coords: &[[f64; 2]]) -> Vec<usize> {
        let (ci, cj) = self.cell(p);
        let reach = (radius / self.h).ceil() as i64 + 1;
        let mut out = Vec::new();
        for dj in -reach..=reach {
            for di in -reach..=reach {
                if let Some(list) = self.cells.get(&(ci + di, cj + dj)) {
                    for &m in list {
                        let q = coords[m];
                        if (q[0] - p[0]).hypot(q[1] - p[1]) <= radius {
                            out.push(m);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

struct LocalFit {
    nodes: Vec<usize>,
    /// Rows: value, d/dx, d/dy, d2/dx2, d2/dxdy, d2/dy2 at the centre point.
    weights: [Vec<f64>; 6],
}

/// Least-squares polynomial fit around `p` over nearby nodes accepted by `keep`.
///
/// Quadratic when the neighbourhood supports it, falling back to linear and
/// then constant fits on very coarse grids.
fn local_fit(
    buckets: &Buckets,
    coords: &[[f64; 2]],
    p: [f64; 2],
    h: f64,
    keep: impl Fn(usize) -> bool,
) -> Result<LocalFit> {
    for (order, min_nodes) in [(3usize, 16usize), (2, 10), (1, 4), (0, 1)] {
        let mut radius = 2.5 * h;
        while radius <= 6.0 * h {
            let nodes: Vec<usize> = buckets
                .within(p, radius, coords)
                .into_iter()
                .filter(|&m| keep(m))
                .collect();
            if nodes.len() >= min_nodes {
                if let Some(fit) = fit_polynomial(coords, &nodes, p, h, order) {
                    return Ok(fit);
                }
            }
            radius += 0.5 * h;
        }
    }
    Err(Error::GridResolution(format!(
        "cannot fit a one-sided stencil at ({:.4}, {:.4})",
        p[0], p[1]
    )))
}

fn fit_polynomial(
    coords: &[[f64; 2]],
    nodes: &[usize],
    p: [f64; 2],
    h: f64,
    order: usize,
) -> Option<LocalFit> {
    let m = nodes.len();
    let ncols = [1, 3, 6, 10][order];
    let basis = |q: [f64; 2]| {
        let (s, t) = ((q[0] - p[0]) / h, (q[1] - p[1]) / h);
        [
            1.0,
            s,
            t,
            0.5 * s * s,
            s * t,
            0.5 * t * t,
            s * s * s,
            s * s * t,
            s * t * t,
            t * t * t,
        ]
    };
    let a = Mat::<f64>::from_fn(m, ncols, |r, c| basis(coords[nodes[r]])[c]);
    let id = Mat::<f64>::identity(m, m);
    let x = a.col_piv_qr().solve_lstsq(&id);
    // reject rank-deficient neighbourhoods: the fit must reproduce its own basis
    for c in 0..ncols {
        for r in 0..ncols {
            let got: f64 = (0..m).map(|k| x[(r, k)] * a[(k, c)]).sum();
            let want = if r == c { 1.0 } else { 0.0 };
            if !got.is_finite() || (got - want).abs() > 1e-8 {
                return None;
            }
        }
    }
    let scale = [
        1.0,
        1.0 / h,
        1.0 / h,
        1.0 / (h * h),
        1.0 / (h * h),
        1.0 / (h * h),
    ];
    let weights: [Vec<f64>; 6] = std::array::from_fn(|r| {
        (0..m)
            .map(|c| if r < ncols { x[(r, c)] * scale[r] } else { 0.0 })
            .collect()
    });
    Some(LocalFit {
        nodes: nodes.to_vec(),
        weights,
    })
}

/// Area and centroid of `[x0,x1] x [y0,y1]` intersected with the domain.
fn clipped_cell(domain: &DomainSpec, x0: f64, x1: f64, y0: f64, y1: f64) -> (f64, f64, f64) {
    // composite 4-point Gauss-Legendre in x of the clipped vertical chord
    const GL: [(f64, f64); 4] = [
        (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    ];
    let sub = 128;
    let dx = (x1 - x0) / sub as f64;
    let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
    for s in 0..sub {
        let mid = x0 + (s as f64 + 0.5) * dx;
        for &(node, wt) in &GL {
            let x = mid + 0.5 * dx * node;
            if let Some((lo, hi)) = domain.slice_y(x) {
                let (a, b) = (lo.max(y0), hi.min(y1));
                if b > a {
                    let len = b - a;
                    let w = 0.5 * dx * wt;
                    area += w * len;
                    mx += w * len * x;
                    my += w * len * 0.5 * (a + b);
                }
            }
        }
    }
    if area > 0.0 {
        (area, mx / area, my / area)
    } else {
        (0.0, 0.5 * (x0 + x1), 0.5 * (y0 + y1))
    }
}

/// Cell-area quadrature weights on interior nodes.
///
/// Every lattice cell's share of the domain goes to interior nodes. Cut cells are
/// split over a node and its axis neighbours so that the first moments of the
/// cut piece are reproduced, which keeps the rule exact for linear integrands.
fn planar_weights(
    domain: &DomainSpec,
    sites: &[Site],
    n: usize,
    h: f64,
    half: f64,
    n_int: usize,
    nb: usize,
) -> Result<Vec<f64>> {
    let mut w = vec![0.0; n_int + nb];
    let lat = |i: i64| -half + i as f64 * h;
    let site = |i: i64, j: i64| -> Site {
        if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
            Site::Outside
        } else {
            sites[j as usize * n + i as usize]
        }
    };
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let (cx, cy) = (lat(i), lat(j));
            let (x0, x1, y0, y1) = (cx - 0.5 * h, cx + 0.5 * h, cy - 0.5 * h, cy + 0.5 * h);
            let corners_inside = [(x0, y0), (x0, y1), (x1, y0), (x1, y1)]
                .iter()
                .all(|&(x, y)| domain.contains([x, y]));
            if corners_inside {
                if let Site::Interior(idx) = site(i, j) {
                    w[idx] += h * h;
                    continue;
                }
            }
            let (area, gx, gy) = if corners_inside {
                (h * h, cx, cy)
            } else {
                clipped_cell(domain, x0, x1, y0, y1)
            };
            if area <= 0.0 {
                continue;
            }
            // anchor: interior node nearest the centroid
            let (gi, gj) = (
                ((gx + half) / h).round() as i64,
                ((gy + half) / h).round() as i64,
            );
            let mut best: Option<(f64, i64, i64, usize)> = None;
            for dj in -2..=2 {
                for di in -2..=2 {
                    if let Site::Interior(idx) = site(gi + di, gj + dj) {
                        let d = (lat(gi + di) - gx).hypot(lat(gj + dj) - gy);
                        if best.is_none_or(|b| d < b.0) {
                            best = Some((d, gi + di, gj + dj, idx));
                        }
                    }
                }
            }
            let Some((_, ai, aj, anchor)) = best else {
                return Err(Error::GridResolution(
                    "cut cell has no interior node within two cells".into(),
                ));
            };
            let (ax, ay) = (lat(ai), lat(aj));
            let mut rest = area;
            let pick = |off: f64, step: (i64, i64)| -> Option<(f64, usize)> {
                let first = if off >= 0.0 { 1 } else { -1 };
                for s in [first, -first] {
                    if let Site::Interior(idx) = site(ai + s * step.0, aj + s * step.1) {
                        return Some((s as f64, idx));
                    }
                }
                None
            };
            if let Some((s, idx)) = pick(gx - ax, (1, 0)) {
                let share = area * (gx - ax) / (s * h);
                w[idx] += share;
                rest -= share;
            }
            if let Some((s, idx)) = pick(gy - ay, (0, 1)) {
                let share = area * (gy - ay) / (s * h);
                w[idx] += share;
                rest -= share;
            }
            w[anchor] += rest;
        }
    }
    Ok(w)
}
