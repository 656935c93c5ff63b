//! The rendering-equation residual: L(x,wo) - E(x,wo) - T(L)(x,wo),
//! estimated with the same reused path segments as RHS rendering.

use super::{estimate_rhs, RenderStats, RhsAttach, SceneView, ShadingSample};
use crate::autodiff::{RgbVar, Tape};
use crate::neuralfield::Radiance;
use crate::rng::RandomStream;

/// Gradient routing for the residual. Under the default routing the
/// scene parameters are treated as constants (stop-gradient) and only
/// the cache parameters receive gradients.
#[derive(Clone, Copy, Debug)]
pub struct ResidualAttach {
    pub theta: bool,
    pub phi: bool,
    pub albedo_hint: bool,
}

impl Default for ResidualAttach {
    fn default() -> Self {
        ResidualAttach {
            theta: true,
            phi: false,
            albedo_hint: false,
        }
    }
}

/// Signed residual at a shading sample. Gradients flow to the cache
/// through both the left-hand query and the transport estimate.
pub fn residual_at<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    tape: &mut Tape,
    sample: &ShadingSample,
    rng: &mut RandomStream,
    n_inner: u32,
    attach: ResidualAttach,
    stats: &mut RenderStats,
) -> RgbVar {
    let hit = &sample.hit;
    let hint = view.albedo_hint(tape, hit, attach.albedo_hint);
    let lhs = field.radiance(
        tape,
        view.store,
        hit.position,
        sample.wo,
        hit.n,
        hint,
        attach.theta,
    );
    let rhs = estimate_rhs(
        view,
        field,
        tape,
        sample,
        rng,
        n_inner,
        RhsAttach {
            phi: attach.phi,
            theta: attach.theta,
            albedo_hint: attach.albedo_hint,
        },
        stats,
    );
    tape.rgb_sub(lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{rgb_value, GradientTable, ParamStore};
    use crate::geometry::{Ray, SceneParams};
    use crate::math::vec3;
    use crate::neuralfield::ConstField;
    use crate::scenes;

    fn setup(scene: &crate::geometry::Scene) -> (ParamStore, SceneParams) {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(1);
        let params = SceneParams::build(scene, &mut store, &mut rng);
        (store, params)
    }

    fn primary(scene: &crate::geometry::Scene) -> ShadingSample {
        let ray = Ray::new(vec3(0.1, 0.2, -0.1), vec3(0.4, -0.2, 0.89).normalized(), 0.0, f64::INFINITY);
        ShadingSample::primary(scene.intersect(&ray).unwrap(), ray.dir)
    }

    #[test]
    fn zero_field_residual_is_negative_emission() {
        let scene = scenes::furnace_cube(0.5, 1.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let field = ConstField([0.0, 0.0, 0.0]);
        let mut tape = Tape::new();
        let mut stats = RenderStats::default();
        let mut rng = RandomStream::new(2);
        let r = residual_at(
            view,
            &field,
            &mut tape,
            &primary(&scene),
            &mut rng,
            1,
            ResidualAttach::default(),
            &mut stats,
        );
        assert_eq!(rgb_value(r), [-1.0, -1.0, -1.0]);
    }

    #[test]
    fn equilibrium_field_residual_is_zero_mean() {
        let rho = 0.5;
        let scene = scenes::furnace_cube(rho, 1.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let eq = 1.0 / (1.0 - rho);
        let field = ConstField([eq, eq, eq]);
        let sample = primary(&scene);
        let mut tape = Tape::new();
        let mut stats = RenderStats::default();
        let n = 20_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for i in 0..n {
            let mut rng = RandomStream::derive(7, &[i]);
            let mark = tape.mark();
            let r = residual_at(
                view,
                &field,
                &mut tape,
                &sample,
                &mut rng,
                1,
                ResidualAttach::default(),
                &mut stats,
            );
            let v = rgb_value(r)[1];
            sum += v;
            sum2 += v * v;
            tape.reset_to(mark);
        }
        let mean = sum / n as f64;
        let sigma = (((sum2 / n as f64 - mean * mean).max(0.0)) / n as f64).sqrt();
        assert!(
            mean.abs() <= 3.0 * sigma.max(1e-12),
            "residual mean {mean}, 3 sigma {}",
            3.0 * sigma
        );
    }

    #[test]
    fn residual_squared_has_zero_gradient_to_scene_parameters() {
        // default routing stop-gradients the scene parameters
        let scene = scenes::lit_cube(0.7, 5.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let field = ConstField([0.4, 0.4, 0.4]);
        let mut tape = Tape::new();
        let mut stats = RenderStats::default();
        let mut rng = RandomStream::new(3);
        let r = residual_at(
            view,
            &field,
            &mut tape,
            &primary(&scene),
            &mut rng,
            1,
            ResidualAttach::default(),
            &mut stats,
        );
        let sq = [
            tape.mul(r[0], r[0]),
            tape.mul(r[1], r[1]),
            tape.mul(r[2], r[2]),
        ];
        let total = tape.sum(&sq);
        let mut grads = GradientTable::new(store.len());
        tape.backward(total, &store, &mut grads);
        for range in params.phi_ranges() {
            for id in range.iter() {
                assert_eq!(grads.get(id), 0.0, "phi gradient leaked through the prior");
            }
        }
    }
}
