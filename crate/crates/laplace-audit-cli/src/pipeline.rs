//! Shared audit pipeline and ground-truth helpers used by every
//! subcommand.

use laplace_audit::bounds::{bound_report, decay_terms, BoundReport};
use laplace_audit::certificates::{
    build_constants, optimize_radii, verify_assumptions, AssumptionReport, BoundTarget, Centric,
    ConstantSet,
};
use laplace_audit::geometry::Geometry;
use laplace_audit::model::ModelDescriptor;
use laplace_audit::oracle::{
    importance_truth_md, quadrature_truth_1d, LaplaceParams1d, PosteriorTruth,
};
use laplace_audit::{AuditError, Result};

use crate::config::RadiusPolicy;

/// One complete audit: geometry, radii, constants, assumption checks and
/// the bound report.
pub struct AuditOutcome {
    pub centric: Centric,
    pub geom: Geometry,
    pub delta: f64,
    pub delta_bar: Option<f64>,
    pub constants: ConstantSet,
    pub assumptions: AssumptionReport,
    /// True when every assumption required by this centring passes.
    pub certified: bool,
    pub report: BoundReport,
}

pub fn audit_model(
    model: &ModelDescriptor,
    centric: Centric,
    target: BoundTarget,
    radius: Option<&RadiusPolicy>,
) -> Result<AuditOutcome> {
    let geom = Geometry::analyze(model)?;
    let (delta, delta_bar) = match radius {
        Some(RadiusPolicy::Fixed { delta, delta_bar }) => {
            if centric == Centric::Map && delta_bar.is_none() {
                return Err(AuditError::Invalid(
                    "posterior-mode centring with fixed radii needs delta_bar".into(),
                ));
            }
            (*delta, *delta_bar)
        }
        _ => {
            let radii = optimize_radii(model, &geom, centric, target)?;
            match centric {
                Centric::Map => (radii.delta, Some(radii.delta_bar)),
                Centric::Mle => (radii.delta, None),
            }
        }
    };
    let constants = build_constants(model, &geom, centric, delta, delta_bar)?;
    let assumptions = verify_assumptions(model, &geom, &constants);
    let certified = match centric {
        Centric::Map => assumptions.map_ok(),
        Centric::Mle => assumptions.mle_ok(),
    };
    let n = model.n as f64;
    let dec = decay_terms(&geom, &constants, n)?;
    let report = bound_report(model, &geom, &constants, &dec, centric, n)?;
    Ok(AuditOutcome {
        centric,
        geom,
        delta,
        delta_bar,
        constants,
        assumptions,
        certified,
        report,
    })
}

/// Centre and per-observation curvature of the Gaussian approximation
/// for the chosen centring.
pub fn approximation(geom: &Geometry, centric: Centric) -> (&nalgebra::DVector<f64>, &nalgebra::DMatrix<f64>) {
    match centric {
        Centric::Map => (&geom.mode_map.theta, &geom.curv_map.j),
        Centric::Mle => (&geom.mode_mle.theta, &geom.curv_mle.j),
    }
}

/// Ground truth for the configured model: exact quadrature in one
/// dimension, seeded importance sampling up to dimension eight.
pub fn ground_truth(
    model: &ModelDescriptor,
    geom: &Geometry,
    centric: Centric,
    samples: usize,
    seed: u64,
) -> Result<PosteriorTruth> {
    let (center, j) = approximation(geom, centric);
    if model.d == 1 {
        quadrature_truth_1d(
            model,
            LaplaceParams1d { center: center[0], j: j[(0, 0)], n: model.n as f64 },
        )
    } else if model.d <= 8 {
        importance_truth_md(model, center, j, samples, seed)
    } else {
        Err(AuditError::Unavailable(
            "no ground-truth oracle beyond dimension 8".into(),
        ))
    }
}

/// Truth summaries on the raw parameter scale: the posterior-mean error
/// and covariance error of the Gaussian approximation, plus the scalar
/// magnitudes the crossover markers compare against.
pub struct TruthSummary {
    pub mean_error: f64,
    pub cov_error: f64,
    pub mean_magnitude: f64,
    pub cov_magnitude: f64,
}

pub fn truth_summary(
    truth: &PosteriorTruth,
    geom: &Geometry,
    centric: Centric,
    n: f64,
) -> TruthSummary {
    let (center, j) = approximation(geom, centric);
    let laplace_cov = j
        .clone()
        .cholesky()
        .map(|c| c.inverse() / n)
        .unwrap_or_else(|| nalgebra::DMatrix::from_element(j.nrows(), j.ncols(), f64::NAN));
    let mean_error = (&truth.mean - center).norm();
    let diff = &truth.cov - &laplace_cov;
    let op_norm = |m: &nalgebra::DMatrix<f64>| -> f64 {
        m.clone().symmetric_eigen().eigenvalues.amax()
    };
    TruthSummary {
        mean_error,
        cov_error: op_norm(&diff),
        mean_magnitude: truth.mean.norm(),
        cov_magnitude: op_norm(&truth.cov),
    }
}
