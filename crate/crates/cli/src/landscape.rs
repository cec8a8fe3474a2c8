//! `quasigrad landscape`.

use std::io::Write;

use serde_json::json;

use quasigrad::landscape::{
    breakdown_critical_a, build_breakdown_example, build_hyper_counterexample, hyper_kkt_check,
    stationarity_check, HyperDeletion, STATIONARITY_TOLERANCE,
};
use quasigrad::{WeightVector, WeightedDataset};

use crate::args::{layered, DeletionArg, ExampleArg, LandscapeArgs, ObjectiveArg};
use crate::input::read_csv_file;
use crate::report::{LandscapeDocument, SCHEMA_VERSION};
use crate::{emit, json_text, resolve_seed, Failure, EXIT_NOT_STATIONARY, EXIT_OK};

pub(crate) fn run(flags: &LandscapeArgs, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let s = layered(flags, flags.config.as_deref())?;
    let epsilon = s
        .epsilon
        .ok_or_else(|| Failure::missing("--epsilon", "the deletion budget is required"))?;
    let tol = s.tol.unwrap_or(STATIONARITY_TOLERANCE);
    let seed = resolve_seed(s.seed);
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| Failure::missing(flag, "the example needs it"))
    };
    let config = serde_json::to_value(&s).expect("arguments serialize");

    let (source, report, example) = match s.example {
        Some(ExampleArg::Breakdown) => {
            let a = need(s.a, "--a")?;
            let ex = build_breakdown_example(epsilon, a)?;
            let report = stationarity_check(&ex.data, &ex.candidate, epsilon, tol, seed)?;
            let critical = breakdown_critical_a(epsilon);
            let example = json!({
                "a": a,
                "n": ex.data.n(),
                "critical_a": critical.is_finite().then_some(critical),
            });
            ("breakdown", report, Some(example))
        }
        Some(ExampleArg::Hyper) => {
            let deletion = match s.deletion.unwrap_or(DeletionArg::ZeroAtom) {
                DeletionArg::ZeroAtom => HyperDeletion::ZeroAtom,
                DeletionArg::LargeAtom => HyperDeletion::LargeAtom,
            };
            let ex = build_hyper_counterexample(
                epsilon,
                need(s.delta, "--delta")?,
                need(s.a, "--a")?,
                need(s.b, "--b")?,
                deletion,
            )?;
            let report = hyper_kkt_check(&ex.atoms.data, &ex.atoms.candidate, epsilon, tol, seed)?;
            let example = json!({
                "deletion": deletion,
                "delta": ex.delta,
                "a": ex.a,
                "b": ex.b,
                "gamma": ex.gamma,
                "n": ex.atoms.data.n(),
                "f1_candidate": ex.f1_candidate,
                "f1_candidate_closed_form": ex.f1_candidate_analytic,
                "f1_good": ex.f1_good,
                "f1_good_closed_form": ex.f1_good_analytic,
            });
            ("hyper", report, Some(example))
        }
        None => {
            let input = s.input.as_ref().ok_or_else(|| {
                Failure::missing("--input", "pass --example or an input CSV with --weights")
            })?;
            let weights = s
                .weights
                .as_ref()
                .ok_or_else(|| Failure::missing("--weights", "the weighting to check"))?;
            let data =
                WeightedDataset::from_rows(&read_csv_file(input, s.header.unwrap_or(false))?)?;
            let w: Vec<f64> = read_csv_file(weights, false)?
                .into_iter()
                .flatten()
                .collect();
            let q = WeightVector::new(w)?;
            let report = match s.objective.unwrap_or(ObjectiveArg::Covariance) {
                ObjectiveArg::Covariance => stationarity_check(&data, &q, epsilon, tol, seed)?,
                ObjectiveArg::Hyper => hyper_kkt_check(&data, &q, epsilon, tol, seed)?,
            };
            ("input", report, None)
        }
    };

    let doc = LandscapeDocument {
        schema_version: SCHEMA_VERSION,
        source: source.into(),
        epsilon,
        stationary: report.stationary,
        config,
        stationarity: serde_json::to_value(&report).expect("report serializes"),
        example,
    };
    emit(&json_text(&doc), s.output.as_deref(), stdout)?;
    Ok(if report.stationary {
        EXIT_OK
    } else {
        EXIT_NOT_STATIONARY
    })
}
