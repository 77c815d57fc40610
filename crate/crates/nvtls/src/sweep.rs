//! Parallel sweeps. Work items run on the rayon pool and results are gathered
//! in input order, so outputs do not depend on the thread count.

use rayon::prelude::*;

use nvtls_core::dynamics::{random_phases, DriveParams, StepSpec};
use nvtls_core::experiments::{run_sequence, DressedFrame, PulseSequence};
use nvtls_core::eigen::EigenSystem;
use nvtls_core::signal::{mean_trace, TimeTrace};
use nvtls_core::spectra::{eigensystem_at, track_eigensystems, LevelCurves, LevelSelector};
use nvtls_core::spin::{FieldSpec, NvOperators, SpinSystemParams};

use crate::error::{CliError, CliResult};
use crate::schedule::{parse_schedule, substitute};

/// Phase range of the random-phase average, rad.
pub const PHASE_RANGE: (f64, f64) = (0.0, std::f64::consts::PI);

/// Maps `f` over `items` in parallel. On failure the error of the first
/// failing item in input order is returned.
pub fn par_try_map<T, U, F>(items: &[T], f: F) -> CliResult<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> CliResult<U> + Sync + Send,
{
    let results: Vec<CliResult<U>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Runs `f` inside a pool of `threads` workers; `None` uses the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Tracked level curves with the grid eigensystems computed in parallel.
pub fn level_curves(
    params: &SpinSystemParams,
    b: f64,
    phi_deg: f64,
    theta_grid: &[f64],
    selector: &LevelSelector,
) -> CliResult<LevelCurves> {
    let ops = NvOperators::new();
    let eig_at = |t: f64| eigensystem_at(&ops, params, &FieldSpec::new(b, t, phi_deg)?);
    let eigs: Vec<EigenSystem> = par_try_map(theta_grid, |&t| Ok(eig_at(t)?))?;
    Ok(track_eigensystems(theta_grid, &eigs, selector, &eig_at)?)
}

/// Mean of `signal` over `n` seeded random drive phases in [`PHASE_RANGE`].
/// Traces are evaluated in parallel and summed in draw order.
pub fn phase_average_par<F>(base: &DriveParams, n: usize, seed: u64, signal: F) -> CliResult<TimeTrace>
where
    F: Fn(&DriveParams) -> CliResult<TimeTrace> + Sync + Send,
{
    let phases = random_phases(n, PHASE_RANGE, seed)?;
    let traces = par_try_map(&phases, |&p| signal(&base.with_phase(p)))?;
    let mut avg = mean_trace(&traces)?;
    avg.meta.retain(|(k, _)| k != "phase_rad");
    avg.meta.push(("phase_average".into(), format!("{n} phases in [0, pi], seed {seed}")));
    Ok(avg)
}

/// One row per swept value: the populations of every `read` in the
/// schedule with `<var>` set to that value.
pub fn sequence_sweep(
    frame: &DressedFrame,
    template: &str,
    var: Option<&str>,
    values: &[f64],
    spec: StepSpec,
) -> CliResult<Vec<Vec<f64>>> {
    let build = |v: Option<f64>| -> CliResult<PulseSequence> {
        let text = match (var, v) {
            (Some(name), Some(v)) => substitute(template, &[(name, v)])?,
            _ => substitute(template, &[])?,
        };
        parse_schedule(&text)
    };
    if var.is_none() {
        let seq = build(None)?;
        return Ok(vec![run_sequence(frame, &seq, spec)?.reads]);
    }
    par_try_map(values, |&v| Ok(run_sequence(frame, &build(Some(v))?, spec)?.reads))
}
