//! Per-iteration metrics, run summaries, campaign aggregation and CSV
//! trace persistence.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseVector;
use crate::problem::ProblemInstance;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Indices i with |x_i| > threshold, ascending. A strict nonzero support is
/// `support(x, 0.0)`.
pub fn support(x: &DenseVector, threshold: f64) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Symmetric-difference count between the thresholded support of `x` and
/// the strict support of `x_true`.
pub fn support_error(x: &DenseVector, x_true: &DenseVector, threshold: f64) -> usize {
    debug_assert_eq!(x.dim(), x_true.dim());
    x.iter()
        .zip(x_true.iter())
        .filter(|(xi, ti)| (xi.abs() > threshold) != (**ti != 0.0))
        .count()
}

/// One recorded iteration. `rel_error` and `support_error` are absent when
/// the instance has no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub residual: f64,
    pub rel_error: Option<f64>,
    pub l1: f64,
    pub l0: usize,
    pub support_error: Option<usize>,
    pub lambda_l1: f64,
    pub step_norm: f64,
}

/// Per-iteration metric records for one solver run, in iteration order
/// starting at k = 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

/// Builds the trace row for iterate `x` with weights `lambda`. The residual
/// norm is passed in because the solver loop already has it from the
/// gradient evaluation.
pub fn row_from_iterate(
    p: &ProblemInstance,
    k: usize,
    x: &DenseVector,
    lambda: &DenseVector,
    step_norm: f64,
    residual_norm: f64,
    support_threshold: f64,
) -> TraceRow {
    let norms = x.norms();
    let (rel_error, supp_err) = match p.x_true() {
        Some(t) => {
            let denom = t.l2();
            let rel = if denom > 0.0 { x.distance(t) / denom } else { x.l2() };
            (Some(rel), Some(support_error(x, t, support_threshold)))
        }
        None => (None, None),
    };
    TraceRow {
        k,
        residual: residual_norm,
        rel_error,
        l1: norms.l1,
        l0: support(x, support_threshold).len(),
        support_error: supp_err,
        lambda_l1: lambda.l1(),
        step_norm,
    }
}

/// Summary of a single run: when it converged, when its support settled,
/// and the final metrics snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// First iteration whose step norm fell below the stop tolerance;
    /// absent when the iteration cap was hit first.
    pub convergence_iter: Option<usize>,
    /// Smallest k from which the recorded support never changes again;
    /// 0 when the support never changes within the trace. Absent when the
    /// support was still changing at the last recorded iteration.
    pub support_stab_iter: Option<usize>,
    /// Total recorded iterations.
    pub iterations: usize,
    /// Final metrics snapshot (last trace row).
    pub final_row: Option<TraceRow>,
}

/// Detects support changes between consecutive rows through the persisted
/// metric columns (l0 and support_error). Changes that swap equal numbers
/// of true-for-true or false-for-false coordinates within one iteration are
/// invisible in this schema; such simultaneous swaps do not occur in the
/// solver dynamics this crate records.
fn support_changed(prev: &TraceRow, cur: &TraceRow) -> bool {
    prev.l0 != cur.l0 || prev.support_error != cur.support_error
}

/// Computes convergence and support-stabilization iterations from a trace.
/// Operates purely on the persisted columns, so re-summarizing a trace that
/// went through a CSV round trip yields the identical summary.
pub fn summarize(trace: &IterationTrace, stop_tol: f64) -> RunSummary {
    let rows = &trace.rows;
    if rows.is_empty() {
        return RunSummary {
            convergence_iter: None,
            support_stab_iter: None,
            iterations: 0,
            final_row: None,
        };
    }
    let convergence_iter = rows.iter().find(|r| r.step_norm < stop_tol).map(|r| r.k);
    let mut last_change: Option<usize> = None;
    for pair in rows.windows(2) {
        if support_changed(&pair[0], &pair[1]) {
            last_change = Some(pair[1].k);
        }
    }
    let final_k = rows.last().expect("nonempty").k;
    let support_stab_iter = match last_change {
        None => Some(0),
        // Still changing at the last recorded step: no stable tail exists.
        Some(k) if k == final_k => None,
        Some(k) => Some(k),
    };
    RunSummary {
        convergence_iter,
        support_stab_iter,
        iterations: final_k,
        final_row: rows.last().cloned(),
    }
}

/// How many of each outcome an aggregate saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinedCounts {
    pub runs: usize,
    pub converged: usize,
    pub support_stab_defined: usize,
    pub diverged: usize,
}

/// Table-style aggregate for one algorithm. Means are over runs where the
/// quantity is defined; `conv_mean_capped` additionally imputes the
/// iteration cap for non-converged runs so both averaging conventions are
/// available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmAggregate {
    pub conv_mean: Option<f64>,
    pub conv_mean_capped: Option<f64>,
    pub supp_stab_mean: Option<f64>,
    pub final_rel_error_mean: Option<f64>,
    pub defined_counts: DefinedCounts,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Arithmetic means over the defined entries of the summaries.
pub fn aggregate(summaries: &[RunSummary]) -> AlgorithmAggregate {
    let conv: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.convergence_iter.map(|k| k as f64))
        .collect();
    let capped: Vec<f64> = summaries
        .iter()
        .map(|s| s.convergence_iter.unwrap_or(s.iterations) as f64)
        .collect();
    let stab: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.support_stab_iter.map(|k| k as f64))
        .collect();
    let rel: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.final_row.as_ref().and_then(|r| r.rel_error))
        .collect();
    AlgorithmAggregate {
        conv_mean: mean(&conv),
        conv_mean_capped: mean(&capped),
        supp_stab_mean: mean(&stab),
        final_rel_error_mean: mean(&rel),
        defined_counts: DefinedCounts {
            runs: summaries.len(),
            converged: conv.len(),
            support_stab_defined: stab.len(),
            diverged: 0,
        },
    }
}

pub const TRACE_HEADER: &str = "k,residual,rel_error,l1,l0,support_error,lambda_l1,step_norm";

fn fmt_real(v: f64) -> String {
    // 17 significant digits round-trips f64 exactly.
    format!("{v:.16e}")
}

/// Writes the trace as CSV with the fixed eight-column header; reals carry
/// 17 significant digits so the file round-trips bitwise.
pub fn write_trace<W: Write>(trace: &IterationTrace, mut w: W) -> Result<(), TraceError> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.rows {
        let rel = r.rel_error.map(fmt_real).unwrap_or_default();
        let serr = r.support_error.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.k,
            fmt_real(r.residual),
            rel,
            fmt_real(r.l1),
            r.l0,
            serr,
            fmt_real(r.lambda_l1),
            fmt_real(r.step_norm),
        )?;
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, TraceError> {
    s.parse().map_err(|_| TraceError::Parse {
        line,
        message: format!("bad {what}: {s:?}"),
    })
}

/// Reads a trace written by [`write_trace`]. Malformed rows report their
/// line number.
pub fn read_trace<R: BufRead>(r: R) -> Result<IterationTrace, TraceError> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(TraceError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header?;
    if header.trim_end() != TRACE_HEADER {
        return Err(TraceError::Parse { line: 1, message: format!("unexpected header: {header:?}") });
    }
    let mut trace = IterationTrace::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(TraceError::Parse {
                line: lineno,
                message: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        trace.rows.push(TraceRow {
            k: parse_field(fields[0], lineno, "k")?,
            residual: parse_field(fields[1], lineno, "residual")?,
            rel_error: if fields[2].is_empty() {
                None
            } else {
                Some(parse_field(fields[2], lineno, "rel_error")?)
            },
            l1: parse_field(fields[3], lineno, "l1")?,
            l0: parse_field(fields[4], lineno, "l0")?,
            support_error: if fields[5].is_empty() {
                None
            } else {
                Some(parse_field(fields[5], lineno, "support_error")?)
            },
            lambda_l1: parse_field(fields[6], lineno, "lambda_l1")?,
            step_norm: parse_field(fields[7], lineno, "step_norm")?,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vecf(v: &[f64]) -> DenseVector {
        DenseVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn support_examples() {
        let x = vecf(&[1.0, 0.0, -2.0]);
        assert_eq!(support(&x, 0.0), vec![0, 2]);
        let x = vecf(&[1e-9, 1.0]);
        assert_eq!(support(&x, 1e-6), vec![1]);
    }

    #[test]
    fn support_error_examples() {
        let t = vecf(&[1.0, 0.0, 0.0]);
        assert_eq!(support_error(&t, &t, 0.0), 0);
        let zero = DenseVector::zeros(3);
        let truth = vecf(&[1.0, 2.0, 0.0]);
        assert_eq!(support_error(&zero, &truth, 0.0), 2);
        let x = vecf(&[1.0, 1.0, 0.0]);
        let t2 = vecf(&[1.0, 0.0, 0.0]);
        assert_eq!(support_error(&x, &t2, 0.0), 1);
    }

    proptest! {
        // self-error is zero whenever the threshold sits below every
        // nonzero magnitude (always at threshold 0), and the count agrees
        // with the symmetric difference of the two index sets
        #[test]
        fn support_error_self_and_symmetry(
            x in proptest::collection::vec(-3.0f64..3.0, 1..30),
            t in proptest::collection::vec(-3.0f64..3.0, 1..30),
        ) {
            let n = x.len().min(t.len());
            let xv = DenseVector::new(x[..n].to_vec()).unwrap();
            let tv = DenseVector::new(t[..n].to_vec()).unwrap();
            prop_assert_eq!(support_error(&xv, &xv, 0.0), 0);
            let thr = 1e-3;
            let sx: std::collections::BTreeSet<usize> =
                support(&xv, thr).into_iter().collect();
            let st: std::collections::BTreeSet<usize> =
                support(&tv, 0.0).into_iter().collect();
            prop_assert_eq!(
                support_error(&xv, &tv, thr),
                sx.symmetric_difference(&st).count()
            );
        }
    }

    fn row(k: usize, l0: usize, serr: usize, step: f64) -> TraceRow {
        TraceRow {
            k,
            residual: 1.0,
            rel_error: Some(0.5),
            l1: 1.0,
            l0,
            support_error: Some(serr),
            lambda_l1: 0.0,
            step_norm: step,
        }
    }

    #[test]
    fn summarize_constant_support_is_zero() {
        let trace = IterationTrace { rows: vec![row(1, 3, 1, 1.0), row(2, 3, 1, 0.5), row(3, 3, 1, 1e-12)] };
        let s = summarize(&trace, 1e-10);
        assert_eq!(s.support_stab_iter, Some(0));
        assert_eq!(s.convergence_iter, Some(3));
        assert_eq!(s.iterations, 3);
    }

    #[test]
    fn summarize_reports_last_change() {
        let mut rows = vec![row(1, 1, 9, 1.0), row(2, 2, 8, 1.0), row(3, 3, 7, 1.0)];
        for k in 4..=10 {
            rows.push(row(k, 3, 7, if k == 10 { 1e-12 } else { 0.1 }));
        }
        let s = summarize(&IterationTrace { rows }, 1e-10);
        assert_eq!(s.support_stab_iter, Some(3));
        assert_eq!(s.convergence_iter, Some(10));
    }

    #[test]
    fn summarize_capped_flickering_support_is_absent() {
        // A dense-iterate style run that hits the cap with its support still
        // changing at the final step: stabilization is not established.
        let rows = vec![row(1, 100, 90, 1.0), row(2, 101, 91, 1.0), row(3, 100, 90, 1.0)];
        let s = summarize(&IterationTrace { rows }, 1e-10);
        assert_eq!(s.support_stab_iter, None);
        assert_eq!(s.convergence_iter, None);
    }

    #[test]
    fn summarize_empty_trace() {
        let s = summarize(&IterationTrace::new(), 1e-10);
        assert_eq!(s.iterations, 0);
        assert!(s.convergence_iter.is_none() && s.final_row.is_none());
    }

    #[test]
    fn aggregate_examples() {
        let mk = |conv: Option<usize>, stab: Option<usize>, iters: usize| RunSummary {
            convergence_iter: conv,
            support_stab_iter: stab,
            iterations: iters,
            final_row: None,
        };
        let single = aggregate(&[mk(Some(10), Some(2), 10)]);
        assert_eq!(single.conv_mean, Some(10.0));
        assert_eq!(single.supp_stab_mean, Some(2.0));

        let two = aggregate(&[mk(Some(10), Some(2), 10), mk(Some(20), Some(4), 20)]);
        assert_eq!(two.conv_mean, Some(15.0));
        assert_eq!(two.supp_stab_mean, Some(3.0));

        // capped imputation: non-converged run contributes its cap
        let mixed = aggregate(&[mk(Some(10), None, 10), mk(None, None, 100)]);
        assert_eq!(mixed.conv_mean, Some(10.0));
        assert_eq!(mixed.conv_mean_capped, Some(55.0));
        assert_eq!(mixed.defined_counts.converged, 1);
    }

    #[test]
    fn trace_csv_round_trip_exact() {
        let trace = IterationTrace {
            rows: vec![
                TraceRow {
                    k: 1,
                    residual: std::f64::consts::PI / 25.0,
                    rel_error: Some(1.0 / 3.0),
                    l1: 2.5e-300,
                    l0: 7,
                    support_error: Some(3),
                    lambda_l1: 1e3,
                    step_norm: f64::MIN_POSITIVE,
                },
                TraceRow {
                    k: 2,
                    residual: 4.0,
                    rel_error: None,
                    l1: 0.0,
                    l0: 0,
                    support_error: None,
                    lambda_l1: 0.1,
                    step_norm: 1e-10,
                },
            ],
        };
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn long_trace_round_trips_bitwise() {
        // cap-length trace: 5e4 rows of awkward floats survive persistence
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2e3 - 1e3
        };
        let rows: Vec<TraceRow> = (1..=50_000)
            .map(|k| TraceRow {
                k,
                residual: next().abs(),
                rel_error: Some(next().abs() / 1e3),
                l1: next().abs(),
                l0: k % 201,
                support_error: Some(k % 17),
                lambda_l1: next().abs() * 1e-6,
                step_norm: next().abs() * 1e-9,
            })
            .collect();
        let trace = IterationTrace { rows };
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn empty_trace_writes_header_only() {
        let mut buf = Vec::new();
        write_trace(&IterationTrace::new(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), format!("{TRACE_HEADER}\n"));
        assert!(read_trace(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = format!("{TRACE_HEADER}\n1,oops,,1.0,2,,0.0,0.1\n");
        match read_trace(text.as_bytes()) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(
            (0usize..100000, -1.0e6f64..1e6, 0.0f64..1e3, 0usize..200, 0usize..200, 0.0f64..10.0, 0.0f64..1.0),
            0..50,
        )) {
            let trace = IterationTrace {
                rows: rows.iter().enumerate().map(|(i, r)| TraceRow {
                    k: i + 1,
                    residual: r.1.abs(),
                    rel_error: Some(r.2),
                    l1: r.1.abs() * 2.0,
                    l0: r.3,
                    support_error: Some(r.4),
                    lambda_l1: r.5,
                    step_norm: r.6,
                }).collect(),
            };
            let mut buf = Vec::new();
            write_trace(&trace, &mut buf).unwrap();
            let back = read_trace(&buf[..]).unwrap();
            prop_assert_eq!(trace, back);
        }
    }
}
