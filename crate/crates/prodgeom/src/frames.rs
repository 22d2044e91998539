//! Per-point extraction of the adapted frame and first-order invariants of a
//! hypersurface: unit normal N, product angle C = g(PN,N), X = PN - CN, the
//! frame E₁,E₂,E₃ built from J₁N, J₂N and X, the decomposition PY = TY + μ(Y)N,
//! and the shape operator with its entries b₁…b₆.
//!
//! The shape operator is obtained by finite-differencing the normal field over
//! parameter space (Weingarten map) and chain-ruling through the chart
//! partials; no Christoffel symbols are involved at this stage.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::ambient::{complex_j, product_p, AmbientPoint, AmbientTangent, JWhich};
use crate::immersions::{Immersion, Jet2};
use crate::{GeomError, Result};

/// Tolerances controlling frame construction.
#[derive(Clone, Copy, Debug)]
pub struct FrameTolerance {
    /// The E-frame is declared degenerate when `1 - C²` falls below this.
    pub c_degenerate: f64,
    /// Residual tolerance for frame-level identities.
    pub residual_tol: f64,
}

impl Default for FrameTolerance {
    fn default() -> Self {
        Self {
            c_degenerate: 1e-6,
            residual_tol: 1e-5,
        }
    }
}

/// Deterministic sign conventions for the unit normal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalConvention {
    /// First coordinate of the flat 6-vector `(v,w)` with magnitude above
    /// 1e-8 is made positive. Simple, but discontinuous where that
    /// coordinate crosses zero; pair with [`SignTracker`] for batches.
    Scan,
    /// The chart basis followed by N is positively oriented with respect to
    /// the canonical orientation of T(S²×S²). Continuous on a connected
    /// chart, so safe inside composed immersions.
    Oriented,
}

/// Per-point frame record.
#[derive(Clone, Debug)]
pub struct FrameData {
    pub point: AmbientPoint,
    pub normal: AmbientTangent,
    /// Product angle `C = g(PN, N)`.
    pub c: f64,
    /// `X = PN - CN`, tangent to the hypersurface.
    pub x: AmbientTangent,
    /// Orthonormal tangent basis: the adapted E-frame when `C² < 1 - ε`,
    /// otherwise a Gram-Schmidt basis of the chart partials.
    pub basis: [AmbientTangent; 3],
    /// Whether `basis` is the adapted E-frame.
    pub is_e_frame: bool,
    /// Shape operator in `basis`: `shape[(i,j)] = g(basis_i, A basis_j)`.
    /// Stored as measured (before symmetrization).
    pub shape: Matrix3<f64>,
    /// `T` in `basis`: `t_mat[(i,j)] = g(basis_i, T basis_j)`.
    pub t_mat: Matrix3<f64>,
    /// `μ(basis_j) = g(P basis_j, N)`.
    pub mu: Vector3<f64>,
    /// `X` in `basis` coordinates.
    pub x_coeffs: Vector3<f64>,
    /// `A` applied to the chart partials, as ambient tangents.
    pub a_chart: [AmbientTangent; 3],
    /// The jet this frame was built from.
    pub jet: Jet2,
}

impl FrameData {
    /// Shape entries `(b₁,…,b₆)` in the E-frame, symmetrized. `None` when the
    /// frame is degenerate.
    pub fn b_entries(&self) -> Option<[f64; 6]> {
        if !self.is_e_frame {
            return None;
        }
        let s = &self.shape;
        Some([
            s[(0, 0)],
            0.5 * (s[(0, 1)] + s[(1, 0)]),
            0.5 * (s[(0, 2)] + s[(2, 0)]),
            s[(1, 1)],
            0.5 * (s[(1, 2)] + s[(2, 1)]),
            s[(2, 2)],
        ])
    }

    /// Symmetrized shape matrix.
    pub fn shape_sym(&self) -> Matrix3<f64> {
        0.5 * (self.shape + self.shape.transpose())
    }

    /// Defect of self-adjointness of the measured shape matrix.
    pub fn shape_asymmetry(&self) -> f64 {
        (self.shape - self.shape.transpose()).abs().max()
    }
}

/// Mean curvature `H = Tr(A)/3`.
pub fn mean_curvature(f: &FrameData) -> f64 {
    f.shape.trace() / 3.0
}

/// Principal curvatures, ascending.
pub fn principal_curvatures(f: &FrameData) -> [f64; 3] {
    let eig = f.shape_sym().symmetric_eigen();
    let mut vals = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Canonical orthonormal basis of the 4-dim tangent space at a point,
/// `(a₁,0), (a₂,0), (0,b₁), (0,b₂)` with `a₂ = p ∧ a₁`, `b₂ = q ∧ b₁`. Its
/// orientation class is independent of the choices of `a₁`, `b₁`.
fn tangent_space_basis(pt: &AmbientPoint) -> [AmbientTangent; 4] {
    let a1 = pick_orthogonal(pt.p);
    let a2 = pt.p.cross(&a1);
    let b1 = pick_orthogonal(pt.q);
    let b2 = pt.q.cross(&b1);
    let z = Vector3::zeros();
    [
        AmbientTangent { base: *pt, v: a1, w: z },
        AmbientTangent { base: *pt, v: a2, w: z },
        AmbientTangent { base: *pt, v: z, w: b1 },
        AmbientTangent { base: *pt, v: z, w: b2 },
    ]
}

fn pick_orthogonal(p: Vector3<f64>) -> Vector3<f64> {
    let c = if p.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    c.cross(&p).normalize()
}

/// The unique-up-to-sign unit vector g-orthogonal to the three chart
/// partials, with no sign convention applied.
fn raw_normal(j: &Jet2) -> Result<AmbientTangent> {
    let frame = tangent_space_basis(&j.point);
    // 3x4 coordinate matrix of the partials in the orthonormal frame
    let mut m = [[0.0f64; 4]; 3];
    for (i, d) in j.d1.iter().enumerate() {
        for (k, f) in frame.iter().enumerate() {
            m[i][k] = d.dot(f);
        }
    }
    // generalized cross product: cofactors along a virtual fourth row
    let minor = |skip: usize| -> f64 {
        let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
        let a = Matrix3::from_fn(|r, c| m[r][cols[c]]);
        a.determinant()
    };
    let mut n = [0.0f64; 4];
    for (k, nk) in n.iter_mut().enumerate() {
        *nk = if k % 2 == 0 { minor(k) } else { -minor(k) };
    }
    let scale = j.d1.iter().map(|d| d.norm()).fold(1.0, |a, b| a * b);
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-8 * scale.max(1e-30) {
        return Err(GeomError::SingularChart(
            "chart partials are rank deficient; no unique normal".into(),
        ));
    }
    let mut out = AmbientTangent::zero(j.point);
    for (k, f) in frame.iter().enumerate() {
        out = out.add(&f.scale(n[k] / norm));
    }
    Ok(out)
}

fn apply_convention(j: &Jet2, n: AmbientTangent, conv: NormalConvention) -> AmbientTangent {
    match conv {
        NormalConvention::Scan => {
            for x in n.flat() {
                if x.abs() > 1e-8 {
                    return if x > 0.0 { n } else { n.neg() };
                }
            }
            n
        }
        NormalConvention::Oriented => {
            let frame = tangent_space_basis(&j.point);
            let mut m = Matrix4::zeros();
            for (r, d) in j.d1.iter().enumerate() {
                for (c, f) in frame.iter().enumerate() {
                    m[(r, c)] = d.dot(f);
                }
            }
            for (c, f) in frame.iter().enumerate() {
                m[(3, c)] = n.dot(f);
            }
            if m.determinant() > 0.0 {
                n
            } else {
                n.neg()
            }
        }
    }
}

/// Unit normal of a jet under a deterministic sign convention.
pub fn unit_normal(j: &Jet2, conv: NormalConvention) -> Result<AmbientTangent> {
    Ok(apply_convention(j, raw_normal(j)?, conv))
}

/// Propagates the normal sign by continuity within a sampling batch: flips
/// the incoming normal when its flat inner product with the previous one is
/// negative.
#[derive(Default)]
pub struct SignTracker {
    prev: Option<[f64; 6]>,
}

impl SignTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, n: AmbientTangent) -> AmbientTangent {
        let out = match self.prev {
            None => n,
            Some(prev) => {
                let dot: f64 = n.flat().iter().zip(prev.iter()).map(|(a, b)| a * b).sum();
                if dot < 0.0 {
                    n.neg()
                } else {
                    n
                }
            }
        };
        self.prev = Some(out.flat());
        out
    }
}

/// Solves the Gram system to express an ambient tangent in chart-partial
/// coordinates: returns `c` with `y ≈ Σ c_j d1_j`.
fn chart_coords(j: &Jet2, y: &AmbientTangent) -> Result<Vector3<f64>> {
    let g = j.induced_metric();
    let rhs = Vector3::from_fn(|i, _| j.d1[i].dot(y));
    g.lu()
        .solve(&rhs)
        .ok_or_else(|| GeomError::SingularChart("induced metric not invertible".into()))
}

fn tangential(y: &AmbientTangent, normal: &AmbientTangent) -> AmbientTangent {
    y.sub(&normal.scale(y.dot(normal)))
}

/// Builds the full frame record at `s`, with the oriented sign convention.
pub fn build_frame(im: &Immersion, s: [f64; 3], tol: &FrameTolerance) -> Result<FrameData> {
    build_frame_with(im, s, tol, NormalConvention::Oriented)
}

/// Builds the full frame record at `s` under the given sign convention.
pub fn build_frame_with(
    im: &Immersion,
    s: [f64; 3],
    tol: &FrameTolerance,
    conv: NormalConvention,
) -> Result<FrameData> {
    let jet = im.jet(s)?;
    let normal = unit_normal(&jet, conv)?;
    let point = jet.point;

    // Weingarten: A d1_j = -(dN/ds_j)^tangential, with the neighbor normals
    // sign-matched to the center.
    let h = im.fd_step();
    let mut a_chart = [AmbientTangent::zero(point); 3];
    for k in 0..3 {
        let mut sp = s;
        sp[k] += h;
        let mut sm = s;
        sm[k] -= h;
        let np = matched_normal(im, sp, &normal)?;
        let nm = matched_normal(im, sm, &normal)?;
        // difference of the raw 6-vectors, then projected to the tangent
        // space at the center point
        let d = AmbientTangent::new(
            point,
            (np.v - nm.v) / (2.0 * h),
            (np.w - nm.w) / (2.0 * h),
        );
        a_chart[k] = tangential(&d, &normal).neg();
    }

    let pn = product_p(&normal);
    let c = pn.dot(&normal);
    let x = tangential(&pn.sub(&normal.scale(c)), &normal);

    let one_minus_c2 = 1.0 - c * c;
    let (basis, is_e_frame) = if one_minus_c2 > tol.c_degenerate {
        let j1n = complex_j(JWhich::J1, &normal);
        let j2n = complex_j(JWhich::J2, &normal);
        let e1 = j1n.add(&j2n).scale(1.0 / (2.0 * (1.0 + c)).sqrt());
        let e2 = j1n.sub(&j2n).scale(1.0 / (2.0 * (1.0 - c)).sqrt());
        let e3 = x.scale(1.0 / one_minus_c2.sqrt());
        ([e1, e2, e3], true)
    } else {
        (gram_schmidt(&jet.d1), false)
    };

    // A, T, mu, X in the chosen orthonormal basis
    let mut shape = Matrix3::zeros();
    let mut t_mat = Matrix3::zeros();
    let mut mu = Vector3::zeros();
    let mut x_coeffs = Vector3::zeros();
    for jcol in 0..3 {
        let ej = &basis[jcol];
        // A e_j through the chart coordinates of e_j
        let coords = chart_coords(&jet, ej)?;
        let mut aej = AmbientTangent::zero(point);
        for (k, ak) in a_chart.iter().enumerate() {
            aej = aej.add(&ak.scale(coords[k]));
        }
        let pej = product_p(ej);
        mu[jcol] = pej.dot(&normal);
        let tej = tangential(&pej.sub(&normal.scale(mu[jcol])), &normal);
        x_coeffs[jcol] = x.dot(&basis[jcol]);
        for irow in 0..3 {
            shape[(irow, jcol)] = basis[irow].dot(&aej);
            t_mat[(irow, jcol)] = basis[irow].dot(&tej);
        }
    }

    Ok(FrameData {
        point,
        normal,
        c,
        x,
        basis,
        is_e_frame,
        shape,
        t_mat,
        mu,
        x_coeffs,
        a_chart,
        jet,
    })
}

/// Normal at `s`, sign-matched to a reference normal by the flat inner
/// product.
fn matched_normal(im: &Immersion, s: [f64; 3], reference: &AmbientTangent) -> Result<AmbientTangent> {
    let jet = im.jet(s)?;
    let n = raw_normal(&jet)?;
    let dot: f64 = n
        .flat()
        .iter()
        .zip(reference.flat().iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(if dot < 0.0 { n.neg() } else { n })
}

fn gram_schmidt(d1: &[AmbientTangent; 3]) -> [AmbientTangent; 3] {
    let e1 = d1[0].normalize();
    let mut e2 = d1[1].sub(&e1.scale(d1[1].dot(&e1)));
    e2 = e2.normalize();
    let mut e3 = d1[2]
        .sub(&e1.scale(d1[2].dot(&e1)))
        .sub(&e2.scale(d1[2].dot(&e2)));
    e3 = e3.normalize();
    [e1, e2, e3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::metric_g;
    use crate::immersions::{family_hatmab, family_mab, family_mt};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_box(im: &Immersion, rng: &mut impl Rng, margin_frac: f64) -> [f64; 3] {
        let b = im.bounds();
        let mut s = [0.0; 3];
        for k in 0..3 {
            let (lo, hi) = b[k];
            let m = (hi - lo) * margin_frac;
            s[k] = lo + m + rng.gen::<f64>() * (hi - lo - 2.0 * m);
        }
        s
    }

    #[test]
    fn normal_is_orthogonal_to_partials() {
        let im = family_mab();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let s = sample_box(&im, &mut rng, 0.05);
            let jet = im.jet(s).unwrap();
            let n = unit_normal(&jet, NormalConvention::Oriented).unwrap();
            assert!((n.norm() - 1.0).abs() <= 1e-10);
            for d in &jet.d1 {
                assert!(metric_g(&n, d).unwrap().abs() <= 1e-8 * d.norm());
            }
        }
    }

    #[test]
    fn mab_has_c_zero_at_origin() {
        let im = family_mab();
        let f = build_frame(&im, [0.0, 0.0, 0.0], &FrameTolerance::default()).unwrap();
        assert!(f.c.abs() <= 1e-10, "C = {}", f.c);
    }

    #[test]
    fn flipping_normal_sign_flips_b_and_preserves_spectrum() {
        let im = family_mab();
        let tol = FrameTolerance::default();
        let s = [0.3, 0.5, -0.2];
        let f_scan = build_frame_with(&im, s, &tol, NormalConvention::Scan).unwrap();
        let f_or = build_frame_with(&im, s, &tol, NormalConvention::Oriented).unwrap();
        let rel: f64 = f_scan
            .normal
            .flat()
            .iter()
            .zip(f_or.normal.flat().iter())
            .map(|(a, b)| a * b)
            .sum();
        let sgn = rel.signum();
        let b1 = f_scan.b_entries().unwrap();
        let b2 = f_or.b_entries().unwrap();
        for (x, y) in b1.iter().zip(b2.iter()) {
            assert!((x - sgn * y).abs() <= 1e-7, "b mismatch {x} vs {y}");
        }
        let h1 = mean_curvature(&f_scan).abs();
        let h2 = mean_curvature(&f_or).abs();
        assert!((h1 - h2).abs() <= 1e-9);
        let p1 = principal_curvatures(&f_scan);
        let mut p2 = principal_curvatures(&f_or).map(|v| sgn * v);
        p2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in p1.iter().zip(p2.iter()) {
            assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn mab_b_entries_match_closed_form() {
        // b2 = 0 and b1 = (1/sqrt2) tan(t1/sqrt2) up to the normal sign
        let im = family_mab();
        let tol = FrameTolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let s = sample_box(&im, &mut rng, 0.1);
            let f = build_frame(&im, s, &tol).unwrap();
            let b = f.b_entries().unwrap();
            let expect = (s[0] / std::f64::consts::SQRT_2).tan() / std::f64::consts::SQRT_2;
            assert!(b[1].abs() <= 1e-6, "b2 = {}", b[1]);
            assert!(
                (b[0].abs() - expect.abs()).abs() <= 1e-5,
                "b1 = {} vs {}",
                b[0],
                expect
            );
            // b4 = -b1 on a minimal family
            assert!((b[0] + b[3]).abs() <= 1e-5);
        }
    }

    #[test]
    fn m0_case1_b_values() {
        let im = family_mt(0.0).unwrap();
        let tol = FrameTolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let s = sample_box(&im, &mut rng, 0.1);
            let f = build_frame(&im, s, &tol).unwrap();
            let b = f.b_entries().unwrap();
            assert!(b[0].abs() <= 1e-5, "b1 = {}", b[0]);
            assert!(b[3].abs() <= 1e-5, "b4 = {}", b[3]);
            assert!(
                (b[1].abs() - 1.0 / std::f64::consts::SQRT_2).abs() <= 1e-5,
                "b2 = {}",
                b[1]
            );
            let pc = principal_curvatures(&f);
            let s2 = std::f64::consts::SQRT_2;
            assert!((pc[0] + 1.0 / s2).abs() <= 1e-5);
            assert!(pc[1].abs() <= 1e-5);
            assert!((pc[2] - 1.0 / s2).abs() <= 1e-5);
        }
    }

    #[test]
    fn frame_relations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let tol = FrameTolerance::default();
        for im in [family_mt(0.3).unwrap(), family_mab(), family_hatmab()] {
            for _ in 0..10 {
                let s = sample_box(&im, &mut rng, 0.1);
                let f = build_frame(&im, s, &tol).unwrap();
                assert!(f.is_e_frame);
                // |X|^2 = 1 - C^2
                assert!((f.x.dot(&f.x) - (1.0 - f.c * f.c)).abs() <= 1e-8);
                // PE1 = E1, PE2 = -E2, PN = CN + sqrt(1-C^2) E3
                let pe1 = product_p(&f.basis[0]);
                assert!(pe1.sub(&f.basis[0]).norm() <= 1e-8);
                let pe2 = product_p(&f.basis[1]);
                assert!(pe2.add(&f.basis[1]).norm() <= 1e-8);
                let pn = product_p(&f.normal);
                let rhs = f
                    .normal
                    .scale(f.c)
                    .add(&f.basis[2].scale((1.0 - f.c * f.c).sqrt()));
                assert!(pn.sub(&rhs).norm() <= 1e-8);
                // mu(E1) = mu(E2) = 0, mu(E3) = sqrt(1-C^2)
                assert!(f.mu[0].abs() <= 1e-6);
                assert!(f.mu[1].abs() <= 1e-6);
                assert!((f.mu[2] - (1.0 - f.c * f.c).sqrt()).abs() <= 1e-6);
                // T diag in E-basis: TE1 = E1, TE2 = -E2, TE3 = -C E3
                assert!((f.t_mat[(0, 0)] - 1.0).abs() <= 1e-6);
                assert!((f.t_mat[(1, 1)] + 1.0).abs() <= 1e-6);
                assert!((f.t_mat[(2, 2)] + f.c).abs() <= 1e-6);
                // shape self-adjoint
                assert!(f.shape_asymmetry() <= 1e-6);
            }
        }
    }

    #[test]
    fn constant_c_families_have_vanishing_b3_b5_b6() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let tol = FrameTolerance::default();
        for im in [family_mt(0.3).unwrap(), family_mab(), family_hatmab()] {
            for _ in 0..10 {
                let s = sample_box(&im, &mut rng, 0.1);
                let f = build_frame(&im, s, &tol).unwrap();
                let b = f.b_entries().unwrap();
                assert!(b[2].abs() <= 1e-5, "b3 = {}", b[2]);
                assert!(b[4].abs() <= 1e-5, "b5 = {}", b[4]);
                assert!(b[5].abs() <= 1e-5, "b6 = {}", b[5]);
            }
        }
    }

    #[test]
    fn mean_curvature_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let tol = FrameTolerance::default();
        let mab = family_mab();
        for _ in 0..10 {
            let s = sample_box(&mab, &mut rng, 0.1);
            let f = build_frame(&mab, s, &tol).unwrap();
            assert!(mean_curvature(&f).abs() <= 1e-6);
        }
        // M_t at t = 0.3: constant H across samples
        let mt = family_mt(0.3).unwrap();
        let hs: Vec<f64> = (0..10)
            .map(|_| {
                let s = sample_box(&mt, &mut rng, 0.1);
                mean_curvature(&build_frame(&mt, s, &tol).unwrap()).abs()
            })
            .collect();
        let spread = hs.iter().cloned().fold(f64::MIN, f64::max)
            - hs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-5, "H spread {spread}");
        // hat M has non-constant H
        let hat = family_hatmab();
        let hs: Vec<f64> = (0..30)
            .map(|_| {
                let s = sample_box(&hat, &mut rng, 0.1);
                mean_curvature(&build_frame(&hat, s, &tol).unwrap())
            })
            .collect();
        let range = hs.iter().cloned().fold(f64::MIN, f64::max)
            - hs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(range > 0.05, "H range {range}");
    }

    #[test]
    fn sign_tracker_keeps_batch_continuous() {
        let im = family_mab();
        let mut tracker = SignTracker::new();
        let mut prev: Option<AmbientTangent> = None;
        for k in 0..40 {
            let t2 = -1.5 + 0.1 * k as f64; // sweeps through scan-rule flips
            let jet = im.jet([0.2, t2, 0.1]).unwrap();
            let n = tracker.apply(unit_normal(&jet, NormalConvention::Scan).unwrap());
            if let Some(p) = prev {
                let dot: f64 = n
                    .flat()
                    .iter()
                    .zip(p.flat().iter())
                    .map(|(a, b)| a * b)
                    .sum();
                assert!(dot > 0.5, "batch continuity broken at step {k}");
            }
            prev = Some(n);
        }
    }
}
