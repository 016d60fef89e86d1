//! Scratch probe: bound versus truth magnitudes for the logistic-t
//! benchmark using the grid third-derivative scan.

use std::time::Instant;

use laplace_audit::bounds::{bound_report, decay_terms};
use laplace_audit::certificates::{
    build_constants_with, optimize_radii_with, BoundTarget, Centric, ThirdDerivMethod,
};
use laplace_audit::geometry::Geometry;
use laplace_audit::model::{gen_logistic, logistic_t_model};
use laplace_audit::oracle::importance_truth_md;
use nalgebra::DMatrix;

fn main() {
    let d = 5usize;
    let method = ThirdDerivMethod::Grid { points: 64, directions: 8, seed: 7 };
    for &(target, grid) in &[
        (BoundTarget::W1, &[400usize, 800, 1600, 3200, 5000][..]),
        (BoundTarget::Cov, &[1000usize, 2000, 3500, 6000, 12000][..]),
    ] {
        println!("target {target:?}");
        for &n in grid {
            let t0 = Instant::now();
            let (x, y) = gen_logistic(n, d, &vec![1.0; d], 1234);
            let m = logistic_t_model(&x, &y, &vec![0.0; d], &DMatrix::identity(d, d), 4.0)
                .unwrap();
            let geom = Geometry::analyze(&m).unwrap();
            let radii = match optimize_radii_with(&m, &geom, Centric::Map, target, method) {
                Ok(r) => r,
                Err(e) => {
                    println!("  n={n}: {e:?} ({:.1}s)", t0.elapsed().as_secs_f64());
                    continue;
                }
            };
            let cs = build_constants_with(
                &m,
                &geom,
                Centric::Map,
                radii.delta,
                Some(radii.delta_bar),
                method,
            )
            .unwrap();
            let dec = decay_terms(&geom, &cs, n as f64).unwrap();
            let rep = bound_report(&m, &geom, &cs, &dec, Centric::Map, n as f64).unwrap();
            let truth =
                importance_truth_md(&m, &geom.mode_map.theta, &geom.curv_map.j, 30_000, 42)
                    .unwrap();
            let mean_norm = truth.mean.norm();
            let cov_op = truth.cov.clone().symmetric_eigen().eigenvalues.max();
            println!(
                "  n={n}: w1={:.4} mean_err={:.4} |mean|={:.4} cov_ipm={:.4} cov_err={:.6} cov_op={:.6} ({:.1}s)",
                rep.w1.total,
                rep.mean_error,
                mean_norm,
                rep.cov_ipm.total,
                rep.cov_error,
                cov_op,
                t0.elapsed().as_secs_f64()
            );
            println!(
                "    delta={:.4} delta_bar={:.4} m2={:.3e} m2_bar={:.3e} kappa={:.3e} kappa_bar={:.3e} m1_hat={:.3e}",
                radii.delta, radii.delta_bar, cs.m2, cs.m2_bar, cs.kappa, cs.kappa_bar, cs.m1_hat
            );
        }
    }
}
