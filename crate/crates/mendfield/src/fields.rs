//! The joint field abstraction and the composition rules that derive a
//! fractured or restoration shape from a complete shape and a break shape.
//!
//! A fractured shape is the intersection of the complete shape `C` with the
//! break shape `B`; the restoration is the intersection of `C` with the
//! complement of `B`. Occupancies compose with the product T-norm; the SDF
//! and normal of the composite come from whichever of the two surfaces is
//! exposed at the query point, decided by a branch on the break occupancy
//! (binarized at [`OCC_THRESHOLD`]) and on which SDF is larger. Ties fall to
//! the complete-shape branch.

use crate::math::Vec3;

/// Binarization threshold μ for relaxed occupancies inside branch tests.
pub const OCC_THRESHOLD: f64 = 0.5;

/// One evaluation of a joint field: occupancy in [0,1] (exactly 0 or 1 for
/// ground truth), signed distance in unit-cube units (negative inside), and
/// a unit surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFieldSample {
    pub occ: f64,
    pub sdf: f64,
    pub nf: Vec3,
}

impl JointFieldSample {
    pub fn new(occ: f64, sdf: f64, nf: Vec3) -> Self {
        JointFieldSample { occ, sdf, nf }
    }
}

/// Which derived shape a composition produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeTarget {
    /// `C ∩ B`: what remains after the break carves the shape.
    Fractured,
    /// `C ∩ B′`: the piece the break removed.
    Restoration,
}

/// A shape as a queryable joint field.
pub trait ShapeField: Send + Sync {
    fn sample(&self, p: Vec3) -> JointFieldSample;

    /// Signed distance only; override when cheaper than a full sample.
    fn sdf(&self, p: Vec3) -> f64 {
        self.sample(p).sdf
    }
}

impl<T: ShapeField + ?Sized> ShapeField for &T {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        (**self).sample(p)
    }
    fn sdf(&self, p: Vec3) -> f64 {
        (**self).sdf(p)
    }
}

impl<T: ShapeField + ?Sized> ShapeField for std::sync::Arc<T> {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        (**self).sample(p)
    }
    fn sdf(&self, p: Vec3) -> f64 {
        (**self).sdf(p)
    }
}

/// Occupancy of the composite shape (product T-norm).
pub fn compose_occupancy(c: &JointFieldSample, b: &JointFieldSample, target: ComposeTarget) -> f64 {
    match target {
        ComposeTarget::Fractured => c.occ * b.occ,
        ComposeTarget::Restoration => c.occ * (1.0 - b.occ),
    }
}

/// True when the composite surface at this point belongs to the break shape
/// rather than the complete shape. Shared by SDF and normal composition.
fn break_branch(c: &JointFieldSample, b: &JointFieldSample, target: ComposeTarget) -> bool {
    match target {
        ComposeTarget::Fractured => b.occ <= OCC_THRESHOLD || b.sdf > c.sdf,
        ComposeTarget::Restoration => b.occ > OCC_THRESHOLD || -b.sdf > c.sdf,
    }
}

/// Signed distance of the composite shape.
pub fn compose_sdf(c: &JointFieldSample, b: &JointFieldSample, target: ComposeTarget) -> f64 {
    if break_branch(c, b, target) {
        match target {
            ComposeTarget::Fractured => b.sdf,
            ComposeTarget::Restoration => -b.sdf,
        }
    } else {
        c.sdf
    }
}

/// Surface normal of the composite shape. The restoration faces the break
/// surface from the other side, so it takes the negated break normal.
pub fn compose_nf(c: &JointFieldSample, b: &JointFieldSample, target: ComposeTarget) -> Vec3 {
    if break_branch(c, b, target) {
        match target {
            ComposeTarget::Fractured => b.nf,
            ComposeTarget::Restoration => -b.nf,
        }
    } else {
        c.nf
    }
}

/// Boolean subtraction in SDF form: the distance field of `C` minus `B`.
pub fn subtract_sdf(s_c: f64, s_b: f64) -> f64 {
    s_c.max(-s_b)
}

/// Full composed sample.
pub fn compose(c: &JointFieldSample, b: &JointFieldSample, target: ComposeTarget) -> JointFieldSample {
    JointFieldSample {
        occ: compose_occupancy(c, b, target),
        sdf: compose_sdf(c, b, target),
        nf: compose_nf(c, b, target),
    }
}

/// A derived shape field: composes two underlying fields on every query.
pub struct ComposedField<C, B> {
    pub complete: C,
    pub brk: B,
    pub target: ComposeTarget,
}

impl<C: ShapeField, B: ShapeField> ComposedField<C, B> {
    pub fn new(complete: C, brk: B, target: ComposeTarget) -> Self {
        ComposedField {
            complete,
            brk,
            target,
        }
    }
}

impl<C: ShapeField, B: ShapeField> ShapeField for ComposedField<C, B> {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        let c = self.complete.sample(p);
        let b = self.brk.sample(p);
        compose(&c, &b, self.target)
    }
}

/// Wraps a [`crate::geometry::Primitive`] as a shape field.
pub struct PrimitiveField(pub crate::geometry::Primitive);

impl ShapeField for PrimitiveField {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        let (occ, sdf, nf) = self.0.field(p);
        JointFieldSample::new(occ as f64, sdf, nf)
    }
    fn sdf(&self, p: Vec3) -> f64 {
        self.0.sdf(p)
    }
}

impl ShapeField for crate::geometry::MeshField {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        let (occ, sdf, nf) = self.field(p);
        JointFieldSample::new(occ as f64, sdf, nf)
    }
    fn sdf(&self, p: Vec3) -> f64 {
        self.sdf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{marching_cubes, Primitive, PrimitiveShape};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn s(occ: f64, sdf: f64) -> JointFieldSample {
        JointFieldSample::new(occ, sdf, Vec3::new(0.0, 0.0, 1.0))
    }

    #[test]
    fn occupancy_products() {
        assert_relative_eq!(
            compose_occupancy(&s(1.0, -0.1), &s(1.0, -0.1), ComposeTarget::Fractured),
            1.0
        );
        assert_relative_eq!(
            compose_occupancy(&s(1.0, -0.1), &s(0.0, 0.1), ComposeTarget::Restoration),
            1.0
        );
        assert_relative_eq!(
            compose_occupancy(&s(0.8, 0.0), &s(0.5, 0.0), ComposeTarget::Fractured),
            0.4
        );
    }

    #[test]
    fn sdf_branches() {
        // Outside the break shape the fractured surface is the break's.
        let c = s(1.0, -0.2);
        let b = s(0.0, 0.1);
        assert_relative_eq!(compose_sdf(&c, &b, ComposeTarget::Fractured), 0.1);

        // Inside the break shape the restoration surface is the negated break.
        let b = s(1.0, -0.1);
        assert_relative_eq!(compose_sdf(&c, &b, ComposeTarget::Restoration), 0.1);

        // Deep inside both: complete branch.
        let c = s(1.0, -0.3);
        let b = s(1.0, -0.4);
        assert_relative_eq!(compose_sdf(&c, &b, ComposeTarget::Fractured), -0.3);
    }

    #[test]
    fn sdf_ties_take_the_complete_branch() {
        let c = s(1.0, -0.2);
        let b = s(1.0, -0.2);
        // Fractured: b.occ > μ and s_B = s_C → otherwise-branch → s_C.
        assert_relative_eq!(compose_sdf(&c, &b, ComposeTarget::Fractured), -0.2);
        assert_eq!(compose_nf(&c, &b, ComposeTarget::Fractured), c.nf);
        // Restoration tie: −s_B = 0.2 vs s_C = −0.2 — not a tie there, build one.
        let c = s(1.0, 0.2);
        let b = s(0.0, -0.2);
        // b.occ ≤ μ and −s_B = s_C → otherwise-branch.
        assert_relative_eq!(compose_sdf(&c, &b, ComposeTarget::Restoration), 0.2);
    }

    #[test]
    fn nf_directions() {
        let nz = Vec3::new(0.0, 0.0, 1.0);
        let nx = Vec3::new(1.0, 0.0, 0.0);
        let c = JointFieldSample::new(1.0, -0.2, nx);
        let b = JointFieldSample::new(0.0, 0.1, nz);
        // Break branch active (b.occ ≤ μ).
        assert_eq!(compose_nf(&c, &b, ComposeTarget::Fractured), nz);
        let b_in = JointFieldSample::new(1.0, -0.1, nz);
        assert_eq!(compose_nf(&c, &b_in, ComposeTarget::Restoration), -nz);
        // Complete branch: deep inside break, far from its surface.
        let b_deep = JointFieldSample::new(1.0, -0.9, nz);
        assert_eq!(compose_nf(&c, &b_deep, ComposeTarget::Fractured), nx);
    }

    #[test]
    fn subtract_sdf_max_rule() {
        assert_relative_eq!(subtract_sdf(-0.3, -0.1), 0.1);
        // 0.3 inside C, 0.2 from the carved-away B: the nearer boundary wins.
        assert_relative_eq!(subtract_sdf(-0.3, 0.2), -0.2);
        assert_relative_eq!(subtract_sdf(-0.3, 0.5), -0.3);
    }

    #[test]
    fn sphere_minus_half_space_volume_is_hemisphere() {
        // Level set of max(s_C, −s_B) where B is the lower half-space.
        let sphere = Primitive::new(PrimitiveShape::Sphere { radius: 0.4 });
        let half = Primitive::new(PrimitiveShape::HalfSpace); // inside: z ≤ 0
        let mesh = marching_cubes(
            |p| subtract_sdf(sphere.sdf(p), half.sdf(p)),
            96,
            0.0,
        );
        mesh.check_closed().unwrap();
        let volume = mesh.signed_volume();
        let analytic = 2.0 / 3.0 * PI * 0.4f64.powi(3);
        assert!(
            (volume - analytic).abs() / analytic < 0.03,
            "volume {volume} vs {analytic}"
        );
    }

    #[test]
    fn composed_sign_matches_membership_oracle_on_grid() {
        // Sphere C ∩ half-space B on a 17³ grid: composed SDF sign must agree
        // with the brute-force membership test o_C ∧ o_B away from surfaces.
        let sphere = PrimitiveField(Primitive::new(PrimitiveShape::Sphere { radius: 0.4 }));
        let half = PrimitiveField(Primitive::new(PrimitiveShape::HalfSpace));
        let n = 17;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let f = |t: usize| -1.0 + 2.0 * t as f64 / (n - 1) as f64;
                    let p = Vec3::new(0.6 * f(i), 0.6 * f(j), 0.6 * f(k));
                    let c = sphere.sample(p);
                    let b = half.sample(p);
                    if c.sdf.abs() <= 1e-3 || b.sdf.abs() <= 1e-3 {
                        continue;
                    }
                    let inside = c.occ == 1.0 && b.occ == 1.0;
                    let sdf = compose_sdf(&c, &b, ComposeTarget::Fractured);
                    assert_eq!(sdf < 0.0, inside, "at {p:?}");
                }
            }
        }
    }

    fn arb_sample() -> impl Strategy<Value = JointFieldSample> {
        (0.0f64..=1.0, -0.5f64..0.5, 0..6usize).prop_map(|(occ, sdf, axis)| {
            let mut nf = Vec3::zeros();
            nf[axis % 3] = if axis < 3 { 1.0 } else { -1.0 };
            JointFieldSample::new(occ, sdf, nf)
        })
    }

    proptest! {
        #[test]
        fn binary_occupancies_partition_the_complete_shape(
            c_in in proptest::bool::ANY,
            b_in in proptest::bool::ANY,
            sdf_c in -0.5f64..0.5,
            sdf_b in -0.5f64..0.5,
        ) {
            let c = s(f64::from(c_in), sdf_c);
            let b = s(f64::from(b_in), sdf_b);
            let f = compose_occupancy(&c, &b, ComposeTarget::Fractured);
            let r = compose_occupancy(&c, &b, ComposeTarget::Restoration);
            prop_assert_eq!(f + r, c.occ);
        }

        #[test]
        fn composed_nf_is_unit(c in arb_sample(), b in arb_sample()) {
            for target in [ComposeTarget::Fractured, ComposeTarget::Restoration] {
                prop_assert!((compose_nf(&c, &b, target).norm() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn composed_nf_comes_from_an_input(c in arb_sample(), b in arb_sample()) {
            for target in [ComposeTarget::Fractured, ComposeTarget::Restoration] {
                let nf = compose_nf(&c, &b, target);
                prop_assert!(nf == c.nf || nf == b.nf || nf == -b.nf);
            }
        }
    }
}
