//! B-spline and NURBS curves on `[0, 1]`: basis functions with derivatives,
//! Greville abscissae, knot insertion, Bézier degree elevation and
//! endpoint-interpolating least-squares fitting.

use nalgebra::{DMatrix, Vector4};

use crate::error::{Error, Result};
use crate::so3::Vec3;

/// Highest derivative order the evaluators produce.
pub const MAX_DERIVATIVE: usize = 3;

/// Open (clamped) knot vector on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument("spline degree must be ≥ 1".into()));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::InvalidArgument(format!(
                "{} knots are too few for degree {degree}",
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("knot vector must be nondecreasing".into()));
        }
        let m = knots.len();
        let clamped = knots[..=degree].iter().all(|&k| k == 0.0)
            && knots[m - degree - 1..].iter().all(|&k| k == 1.0);
        if !clamped {
            return Err(Error::InvalidArgument(
                "knot vector must be open on [0, 1] (end multiplicity p + 1)".into(),
            ));
        }
        Ok(Self { degree, knots })
    }

    /// Uniform open knot vector with `n` basis functions.
    pub fn uniform(degree: usize, n: usize) -> Result<Self> {
        if n < degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "need at least p + 1 = {} control points, got {n}",
                degree + 1
            )));
        }
        let spans = n - degree;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..spans).map(|k| k as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions.
    #[inline]
    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Span index `i` with `U[i] ≤ u < U[i+1]`; `u = 1` maps to the last span.
    pub fn find_span(&self, u: f64) -> usize {
        let n = self.len();
        let p = self.degree;
        if u >= self.knots[n] {
            return n - 1;
        }
        let (mut lo, mut hi) = (p, n);
        let mut mid = (lo + hi) / 2;
        while u < self.knots[mid] || u >= self.knots[mid + 1] {
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2;
        }
        mid
    }

    /// Nonzero B-spline basis functions and their derivatives up to `nd`
    /// at `u` (derivative rows, `p + 1` columns), following the standard
    /// triangular-table algorithm.
    pub fn basis_derivatives(&self, span: usize, u: f64, nd: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let k = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = u - k[span + 1 - j];
            right[j] = k[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![0.0; p + 1]; nd + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for kk in 1..=nd.min(p) {
                let mut d = 0.0;
                let rk = r as isize - kk as isize;
                let pk = p - kk;
                if r >= kk {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { kk - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][kk] = -a[s1][kk - 1] / ndu[pk + 1][r];
                    d += a[s2][kk] * ndu[r][pk];
                }
                ders[kk][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for (kk, row) in ders.iter_mut().enumerate().skip(1) {
            if kk > p {
                row.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            row.iter_mut().for_each(|v| *v *= fac);
            fac *= (p - kk) as f64;
        }
        ders
    }
}

/// Values and u-derivatives of the `p + 1` active basis functions at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    /// Global index of the first active function.
    pub first: usize,
    /// `ders[k][j]` is the k-th u-derivative of function `first + j`.
    pub ders: Vec<Vec<f64>>,
}

impl BasisTable {
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.first..self.first + self.ders[0].len()
    }
}

/// Rational (NURBS) curve patch in 3-D. Plain B-splines have unit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SplinePatch {
    knots: KnotVector,
    control_points: Vec<Vec3>,
    weights: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl SplinePatch {
    pub fn new(knots: KnotVector, control_points: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if control_points.len() != n || weights.len() != n {
            return Err(Error::InvalidArgument(format!(
                "knot vector defines {n} basis functions but got {} control points and {} weights",
                control_points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("NURBS weights must be positive".into()));
        }
        if control_points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument("control points must be finite".into()));
        }
        Ok(Self { knots, control_points, weights })
    }

    pub fn bspline(knots: KnotVector, control_points: Vec<Vec3>) -> Result<Self> {
        let w = vec![1.0; control_points.len()];
        Self::new(knots, control_points, w)
    }

    /// Degree-`p` straight segment with `n` control points, uniformly spaced.
    pub fn line(a: Vec3, b: Vec3, degree: usize, n: usize) -> Result<Self> {
        let knots = KnotVector::uniform(degree, n)?;
        let g = greville_of(&knots);
        let cps = g.iter().map(|&t| a + (b - a) * t).collect();
        Self::bspline(knots, cps)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    #[inline]
    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.control_points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.control_points.is_empty()
    }

    #[inline]
    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_rational(&self) -> bool {
        self.weights.iter().any(|&w| (w - 1.0).abs() > 1e-15)
    }

    /// Same basis, new control points.
    pub fn with_control_points(&self, control_points: Vec<Vec3>) -> Result<Self> {
        Self::new(self.knots.clone(), control_points, self.weights.clone())
    }

    /// Rigid/linear map applied to every control point.
    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            knots: self.knots.clone(),
            control_points: self.control_points.iter().map(f).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Same curve traversed backwards (`u ↦ 1 − u`).
    pub fn reversed(&self) -> Self {
        let mut knots: Vec<f64> = self.knots.knots.iter().rev().map(|k| 1.0 - k).collect();
        knots.iter_mut().for_each(|k| *k = if k.abs() < 1e-15 { 0.0 } else { *k });
        Self {
            knots: KnotVector { degree: self.degree(), knots },
            control_points: self.control_points.iter().rev().cloned().collect(),
            weights: self.weights.iter().rev().cloned().collect(),
        }
    }

    fn check_param(u: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidArgument(format!("parameter u = {u} outside [0, 1]")));
        }
        Ok(())
    }

    /// Active rational basis functions and their u-derivatives up to
    /// `max_deriv` (at most [`MAX_DERIVATIVE`]).
    pub fn basis_eval(&self, u: f64, max_deriv: usize) -> Result<BasisTable> {
        Self::check_param(u)?;
        if max_deriv > MAX_DERIVATIVE {
            return Err(Error::InvalidArgument(format!(
                "derivative order {max_deriv} exceeds {MAX_DERIVATIVE}"
            )));
        }
        let p = self.degree();
        let span = self.knots.find_span(u);
        let first = span - p;
        let n_ders = self.knots.basis_derivatives(span, u, max_deriv);
        let w = &self.weights[first..=span];
        // A_j^(k) = N_j^(k) w_j; W^(k) = Σ_j A_j^(k)
        let a: Vec<Vec<f64>> = n_ders
            .iter()
            .map(|row| row.iter().zip(w).map(|(n, w)| n * w).collect())
            .collect();
        let wsum: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
        let mut ders = vec![vec![0.0; p + 1]; max_deriv + 1];
        for k in 0..=max_deriv {
            for j in 0..=p {
                let mut v = a[k][j];
                for l in 1..=k {
                    v -= binomial(k, l) * wsum[l] * ders[k - l][j];
                }
                ders[k][j] = v / wsum[0];
            }
        }
        Ok(BasisTable { first, ders })
    }

    /// Position and u-derivatives `c, c,u, …` up to `max_deriv`.
    pub fn curve_eval(&self, u: f64, max_deriv: usize) -> Result<Vec<Vec3>> {
        let table = self.basis_eval(u, max_deriv)?;
        Ok(combine(&table, &self.control_points))
    }

    /// Greville abscissae, one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        greville_of(&self.knots)
    }

    /// Boehm knot insertion, carried out in homogeneous coordinates so the
    /// rational curve is unchanged.
    pub fn insert_knot(&self, u: f64) -> Result<Self> {
        Self::check_param(u)?;
        if u <= 0.0 || u >= 1.0 {
            return Err(Error::InvalidArgument("can only insert interior knots".into()));
        }
        let p = self.degree();
        let k = self.knots.find_span(u);
        let knots = &self.knots.knots;
        let hom: Vec<Vector4<f64>> = self.homogeneous();
        let n = hom.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let q = if i + p <= k {
                hom[i]
            } else if i > k {
                hom[i - 1]
            } else {
                let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
                hom[i] * alpha + hom[i - 1] * (1.0 - alpha)
            };
            out.push(q);
        }
        let mut new_knots = knots.clone();
        new_knots.insert(k + 1, u);
        Self::from_homogeneous(KnotVector::new(p, new_knots)?, &out)
    }

    /// Raises the degree of a single-segment (Bézier) patch to `target`.
    pub fn elevate_bezier(&self, target: usize) -> Result<Self> {
        let p = self.degree();
        if self.len() != p + 1 {
            return Err(Error::InvalidArgument(
                "degree elevation is implemented for Bézier patches only".into(),
            ));
        }
        if target < p {
            return Err(Error::InvalidArgument("cannot lower the degree".into()));
        }
        let mut hom = self.homogeneous();
        for q in p..target {
            let mut next = Vec::with_capacity(q + 2);
            for i in 0..=q + 1 {
                let a = i as f64 / (q + 1) as f64;
                let prev = if i > 0 { hom[i - 1] } else { Vector4::zeros() };
                let cur = if i <= q { hom[i] } else { Vector4::zeros() };
                next.push(prev * a + cur * (1.0 - a));
            }
            hom = next;
        }
        let knots = KnotVector::uniform(target, target + 1)?;
        Self::from_homogeneous(knots, &hom)
    }

    /// Inserts uniformly spaced knots into a Bézier patch to reach `n`
    /// control points on a uniform open knot vector.
    pub fn refine_bezier_uniform(&self, n: usize) -> Result<Self> {
        let p = self.degree();
        if self.len() != p + 1 {
            return Err(Error::InvalidArgument("uniform refinement expects a Bézier patch".into()));
        }
        if n < p + 1 {
            return Err(Error::InvalidArgument(format!("n = {n} < p + 1")));
        }
        let spans = n - p;
        let mut patch = self.clone();
        for k in 1..spans {
            patch = patch.insert_knot(k as f64 / spans as f64)?;
        }
        Ok(patch)
    }

    fn homogeneous(&self) -> Vec<Vector4<f64>> {
        self.control_points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| Vector4::new(p.x * w, p.y * w, p.z * w, w))
            .collect()
    }

    fn from_homogeneous(knots: KnotVector, hom: &[Vector4<f64>]) -> Result<Self> {
        let cps = hom.iter().map(|h| Vec3::new(h.x / h.w, h.y / h.w, h.z / h.w)).collect();
        let w = hom.iter().map(|h| h.w).collect();
        Self::new(knots, cps, w)
    }
}

/// `Σ_j R_j^(k) v_j` for every derivative row of `table`.
pub fn combine(table: &BasisTable, coeffs: &[Vec3]) -> Vec<Vec3> {
    table
        .ders
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(Vec3::zeros(), |acc, (j, r)| acc + coeffs[table.first + j] * *r)
        })
        .collect()
}

fn greville_of(knots: &KnotVector) -> Vec<f64> {
    let p = knots.degree;
    (0..knots.len())
        .map(|j| knots.knots[j + 1..=j + p].iter().sum::<f64>() / p as f64)
        .collect()
}

/// Chord-length parametrization of a point sequence, normalized to `[0, 1]`.
pub fn chord_length_params(points: &[Vec3]) -> Vec<f64> {
    let mut t = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    t.push(0.0);
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        t.push(acc);
    }
    let total = acc.max(f64::MIN_POSITIVE);
    t.iter_mut().for_each(|v| *v /= total);
    if let Some(last) = t.last_mut() {
        *last = 1.0;
    }
    t
}

/// Result of a least-squares curve fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub patch: SplinePatch,
    /// Largest distance between a sample and the fitted curve at its parameter.
    pub max_residual: f64,
    pub rms_residual: f64,
}

/// Degree-`p` B-spline with `n` control points fitted to `points` at
/// parameters `params` in the least-squares sense, interpolating both ends.
pub fn fit_bspline(points: &[Vec3], params: &[f64], degree: usize, n: usize) -> Result<FitReport> {
    if points.len() != params.len() {
        return Err(Error::InvalidArgument("points and params differ in length".into()));
    }
    if points.len() < n {
        return Err(Error::InvalidArgument(format!(
            "need at least {n} samples to fit {n} control points"
        )));
    }
    let knots = KnotVector::uniform(degree, n)?;
    let first = points[0];
    let last = *points.last().unwrap();
    let m = points.len();
    let inner = n - 2;
    let mut a = DMatrix::<f64>::zeros(m, inner);
    let mut b = DMatrix::<f64>::zeros(m, 3);
    for (row, (&t, x)) in params.iter().zip(points).enumerate() {
        let span = knots.find_span(t);
        let ders = knots.basis_derivatives(span, t, 0);
        let mut rhs = *x;
        for (j, &nj) in ders[0].iter().enumerate() {
            let g = span - degree + j;
            if g == 0 {
                rhs -= first * nj;
            } else if g == n - 1 {
                rhs -= last * nj;
            } else {
                a[(row, g - 1)] = nj;
            }
        }
        for c in 0..3 {
            b[(row, c)] = rhs[c];
        }
    }
    let mut cps = Vec::with_capacity(n);
    cps.push(first);
    if inner > 0 {
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-13)
            .map_err(|e| Error::Geometry(format!("least-squares fit failed: {e}")))?;
        for i in 0..inner {
            cps.push(Vec3::new(sol[(i, 0)], sol[(i, 1)], sol[(i, 2)]));
        }
    }
    cps.push(last);
    let patch = SplinePatch::bspline(knots, cps)?;
    let mut max_r: f64 = 0.0;
    let mut sum2 = 0.0;
    for (&t, x) in params.iter().zip(points) {
        let r = (patch.curve_eval(t, 0)?[0] - x).norm();
        max_r = max_r.max(r);
        sum2 += r * r;
    }
    Ok(FitReport { patch, max_residual: max_r, rms_residual: (sum2 / m as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Textbook Cox–de Boor recursion, used as an independent oracle.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, u: f64) -> f64 {
        if p == 0 {
            let last = knots.len() - 1;
            let at_end = u == knots[last] && knots[i + 1] == knots[last] && knots[i] < knots[i + 1];
            return if (knots[i] <= u && u < knots[i + 1]) || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (u - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, u);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - u) / d2 * cox_de_boor(knots, i + 1, p - 1, u);
        }
        v
    }

    fn quadratic_patch() -> SplinePatch {
        let knots = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).unwrap();
        let cps = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 2.0, 0.0),
            Vec3::new(2.0, -1.0, 1.0),
            Vec3::new(3.0, 0.0, 0.5),
        ];
        SplinePatch::bspline(knots, cps).unwrap()
    }

    fn quarter_circle() -> SplinePatch {
        let knots = KnotVector::uniform(2, 3).unwrap();
        let cps = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        SplinePatch::new(knots, cps, vec![1.0, FRAC_1_SQRT_2, 1.0]).unwrap()
    }

    #[test]
    fn clamped_end_interpolation() {
        let t = quadratic_patch().basis_eval(0.0, 0).unwrap();
        assert_eq!(t.first, 0);
        assert_eq!(t.ders[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn basis_matches_cox_de_boor() {
        let patch = quadratic_patch();
        let k = patch.knots().knots().to_vec();
        for &u in &[0.0, 0.1, 0.25, 0.5, 0.77, 1.0] {
            let t = patch.basis_eval(u, 0).unwrap();
            for (j, g) in t.active().enumerate() {
                assert_relative_eq!(t.ders[0][j], cox_de_boor(&k, g, 2, u), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences_with_slope_two() {
        let knots = KnotVector::uniform(4, 9).unwrap();
        let w = vec![1.0, 0.8, 1.3, 0.9, 1.1, 1.0, 0.7, 1.2, 1.0];
        let cps = (0..9).map(|i| Vec3::new(i as f64, (i as f64).sin(), 0.0)).collect();
        let patch = SplinePatch::new(knots, cps, w).unwrap();
        let u0 = 0.43;
        let exact = patch.basis_eval(u0, 3).unwrap();
        for order in 1..=3 {
            let mut errs = vec![];
            for &e in &[2e-3, 1e-3, 5e-4] {
                let lo = patch.basis_eval(u0 - e, 3).unwrap();
                let hi = patch.basis_eval(u0 + e, 3).unwrap();
                assert_eq!(lo.first, exact.first);
                let err = (0..5)
                    .map(|j| {
                        let fd = (hi.ders[order - 1][j] - lo.ders[order - 1][j]) / (2.0 * e);
                        (fd - exact.ders[order][j]).abs()
                    })
                    .fold(0.0, f64::max);
                errs.push(err);
            }
            for w in errs.windows(2) {
                let slope = (w[0] / w[1]).log2();
                assert!((slope - 2.0).abs() < 0.15, "order {order}: slope {slope}");
            }
        }
    }

    #[test]
    fn greville_examples() {
        assert_eq!(quadratic_patch().greville(), vec![0.0, 0.25, 0.75, 1.0]);
        let lin = KnotVector::new(1, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(greville_of(&lin), vec![0.0, 1.0]);
    }

    #[test]
    fn curve_examples() {
        let line = SplinePatch::line(Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), 1, 2).unwrap();
        assert_relative_eq!(line.curve_eval(0.5, 0).unwrap()[0], Vec3::new(1.0, 0.0, 0.0));

        let arc = quarter_circle();
        for i in 0..=20 {
            let u = i as f64 / 20.0;
            assert_relative_eq!(arc.curve_eval(u, 0).unwrap()[0].norm(), 1.0, epsilon = 1e-15);
        }

        let patch = quadratic_patch();
        let k = patch.knots().knots();
        let cps = patch.control_points();
        let d = patch.curve_eval(0.0, 1).unwrap()[1];
        assert_relative_eq!(d, (cps[1] - cps[0]) * (2.0 / (k[3] - k[1])), epsilon = 1e-14);
        assert_eq!(patch.curve_eval(1.0, 0).unwrap()[0], cps[3]);
    }

    #[test]
    fn out_of_range_parameter_is_rejected() {
        assert!(quadratic_patch().basis_eval(1.2, 0).is_err());
        assert!(quadratic_patch().basis_eval(-0.1, 1).is_err());
    }

    #[test]
    fn degree_elevation_and_refinement_preserve_the_arc() {
        let arc = quarter_circle();
        let fine = arc.elevate_bezier(6).unwrap().refine_bezier_uniform(15).unwrap();
        assert_eq!(fine.len(), 15);
        assert_eq!(*fine.knots(), KnotVector::uniform(6, 15).unwrap());
        for i in 0..=50 {
            let u = i as f64 / 50.0;
            let a = arc.curve_eval(u, 2).unwrap();
            let b = fine.curve_eval(u, 2).unwrap();
            for k in 0..3 {
                assert!((a[k] - b[k]).norm() < 1e-11, "u = {u}, order {k}");
            }
        }
    }

    #[test]
    fn least_squares_fit_interpolates_ends() {
        let pts: Vec<Vec3> = (0..=60)
            .map(|i| {
                let t = i as f64 / 60.0;
                Vec3::new(t, (3.0 * t).sin(), 0.1 * t * t)
            })
            .collect();
        let params = chord_length_params(&pts);
        let fit = fit_bspline(&pts, &params, 4, 30).unwrap();
        assert_eq!(fit.patch.control_points()[0], pts[0]);
        assert_eq!(*fit.patch.control_points().last().unwrap(), pts[60]);
        assert!(fit.max_residual < 1e-3, "{}", fit.max_residual);
    }

    proptest! {
        #[test]
        fn partition_of_unity(u in 0.0..=1.0f64, p in 2usize..7, extra in 0usize..8) {
            let knots = KnotVector::uniform(p, p + 1 + extra).unwrap();
            let n = knots.len();
            let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * ((i * 7) % 5) as f64 / 5.0).collect();
            let cps = vec![Vec3::zeros(); n];
            let patch = SplinePatch::new(knots, cps, w).unwrap();
            let t = patch.basis_eval(u, 3).unwrap();
            prop_assert!((t.ders[0].iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 1..=3 {
                let s: f64 = t.ders[k].iter().sum();
                let scale: f64 = t.ders[k].iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                prop_assert!(s.abs() < 1e-12 * scale);
            }
        }

        #[test]
        fn greville_is_monotone_and_square(raw in prop::collection::vec(0.0..1.0f64, 0..10), p in 1usize..6) {
            let mut interior = raw.clone();
            interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut knots = vec![0.0; p + 1];
            knots.extend(interior.iter().cloned());
            knots.extend(std::iter::repeat_n(1.0, p + 1));
            let kv = KnotVector::new(p, knots).unwrap();
            let g = greville_of(&kv);
            prop_assert_eq!(g.len(), kv.len());
            prop_assert_eq!(g[0], 0.0);
            prop_assert!((g[g.len() - 1] - 1.0).abs() < 1e-15);
            prop_assert!(g.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn knot_insertion_preserves_curve(u_ins in 0.01..0.99f64) {
            let patch = quadratic_patch().insert_knot(0.3).unwrap();
            let refined = patch.insert_knot(u_ins).unwrap();
            for i in 0..50 {
                let u = i as f64 / 49.0;
                let a = patch.curve_eval(u, 0).unwrap()[0];
                let b = refined.curve_eval(u, 0).unwrap()[0];
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
