//! Closed-loop analysis of the thrust balancer: assembly of the augmented
//! system matrix, eigenvalue classification, saturation-pattern sweeps, and
//! pole placement for the per-turbine integral gain.
//!
//! The balancer couples the diagonal thrust model to the integral errors
//! through the rank-one weight matrix W; the structure leaves one
//! uncontrollable pole on the unit circle for every pattern, and the design
//! goal is to keep every other eigenvalue strictly inside.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Matrix2, Schur};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Eigenvalues within this distance of the unit circle count as marginal.
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;
/// Interior eigenvalues must satisfy |λ| ≤ 1 − STABILITY_MARGIN.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Balance weight matrix from the per-turbine unsaturated flags: every row
/// equals the flag vector (1 = unsaturated). Returns (W, M).
pub fn build_w(unsaturated: &[bool]) -> (DMatrix<f64>, usize) {
    let n = unsaturated.len();
    let m = unsaturated.iter().filter(|&&s| s).count();
    let w = DMatrix::from_fn(n, n, |_, j| if unsaturated[j] { 1.0 } else { 0.0 });
    (w, m)
}

/// Augmented closed-loop matrix with the weight matrix for one saturation
/// pattern.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    pub a_cl: DMatrix<f64>,
    pub n_t: usize,
    pub m: usize,
}

/// Assemble [[A, B K], [((1/M) W − I) T_s, I]] for diagonal A = a I,
/// B = b I, K = diag(k).
pub fn build_acl(
    a: f64,
    b: f64,
    k: &[f64],
    unsaturated: &[bool],
    ts: f64,
) -> Result<ClosedLoopSystem> {
    let n = unsaturated.len();
    if k.len() != n {
        return Err(Error::Analysis("gain vector length mismatch".into()));
    }
    let (w, m) = build_w(unsaturated);
    if m == 0 {
        return Err(Error::Analysis(
            "all turbines saturated: no closed loop defined".into(),
        ));
    }
    let mut a_cl = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a_cl[(i, i)] = a;
        a_cl[(i, n + i)] = b * k[i];
        a_cl[(n + i, n + i)] = 1.0;
    }
    let coupling = w.map(|x| x / m as f64) - DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            a_cl[(n + i, j)] = coupling[(i, j)] * ts;
        }
    }
    Ok(ClosedLoopSystem { a_cl, n_t: n, m })
}

/// Eigenvalue classification of a closed-loop matrix.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex<f64>>,
    /// Count of eigenvalues with |λ| within `UNIT_CIRCLE_TOL` of 1.
    pub count_on_unit_circle: usize,
    /// Largest modulus among eigenvalues not on the unit circle.
    pub max_interior_modulus: f64,
    /// True when no eigenvalue exceeds the circle and all interior ones keep
    /// the stability margin.
    pub stable: bool,
}

/// Dense nonsymmetric eigensolve and classification.
pub fn spectrum(a_cl: &DMatrix<f64>) -> Result<SpectrumReport> {
    if a_cl.iter().any(|v| !v.is_finite()) {
        return Err(Error::Analysis("matrix contains non-finite entries".into()));
    }
    // bounded QR iteration at a relaxed threshold: the repeated interior
    // pole pairs of this structure stall the default machine-epsilon sweep
    let schur = Schur::try_new(a_cl.clone(), 1.0e-12, 100_000)
        .ok_or_else(|| Error::Analysis("eigensolver did not converge".into()))?;
    let eigs = schur.complex_eigenvalues();
    let eigenvalues: Vec<Complex<f64>> = eigs.iter().map(|e| Complex::new(e.re, e.im)).collect();
    let mut on_circle = 0usize;
    let mut max_interior: f64 = 0.0;
    let mut outside = false;
    for e in &eigenvalues {
        let r = e.norm();
        if (r - 1.0).abs() <= UNIT_CIRCLE_TOL {
            on_circle += 1;
        } else if r > 1.0 {
            outside = true;
        } else {
            max_interior = max_interior.max(r);
        }
    }
    let stable = !outside && max_interior <= 1.0 - STABILITY_MARGIN;
    Ok(SpectrumReport {
        eigenvalues,
        count_on_unit_circle: on_circle,
        max_interior_modulus: max_interior,
        stable,
    })
}

/// Decoupled per-turbine design model under full thrust feedback:
/// [[a, b k], [−T_s, 1]].
pub fn decoupled_matrix(a: f64, b: f64, k: f64, ts: f64) -> Matrix2<f64> {
    Matrix2::new(a, b * k, -ts, 1.0)
}

/// Real roots of the decoupled characteristic polynomial
/// λ² − (1 + a) λ + (a + b k T_s). `None` when the pair is complex.
pub fn decoupled_poles(a: f64, b: f64, k: f64, ts: f64) -> Option<(f64, f64)> {
    let trace = 1.0 + a;
    let det = a + b * k * ts;
    let disc = trace * trace - 4.0 * det;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    Some(((trace + root) / 2.0, (trace - root) / 2.0))
}

/// Integral gain placing the decoupled pole pair. The trace of the decoupled
/// matrix is fixed at 1 + a, so the requested pair must satisfy
/// p1 + p2 = 1 + a; the gain then sets the product: k = (p1 p2 − a)/(b T_s).
/// Both poles must be real in (0, 1) (overdamped).
pub fn place_gains(a: f64, b: f64, ts: f64, p1: f64, p2: f64) -> Result<f64> {
    if !(0.0 < a && a < 1.0) || b <= 0.0 || ts <= 0.0 {
        return Err(Error::Analysis("need 0 < a < 1, b > 0, T_s > 0".into()));
    }
    if !(0.0..1.0).contains(&p1) || !(0.0..1.0).contains(&p2) {
        return Err(Error::Analysis(
            "requested poles must be real in (0, 1); complex or unstable pairs are rejected".into(),
        ));
    }
    if ((p1 + p2) - (1.0 + a)).abs() > 1e-9 {
        return Err(Error::Analysis(format!(
            "infeasible pole pair: sum must equal 1 + a = {} (got {})",
            1.0 + a,
            p1 + p2
        )));
    }
    let k = (p1 * p2 - a) / (b * ts);
    // verify the placement before handing the gain back
    let (q1, q2) = decoupled_poles(a, b, k, ts)
        .ok_or_else(|| Error::Analysis("placed poles came out complex".into()))?;
    let ok =
        (q1 - p1).abs().min((q1 - p2).abs()) < 1e-6 && (q2 - p1).abs().min((q2 - p2).abs()) < 1e-6;
    if !ok {
        return Err(Error::Analysis("pole placement verification failed".into()));
    }
    Ok(k)
}

/// Verdict for one saturation pattern.
#[derive(Debug, Clone)]
pub struct PatternVerdict {
    pub unsaturated: Vec<bool>,
    pub m: usize,
    pub count_on_unit_circle: usize,
    pub max_interior_modulus: f64,
    /// |det((1/M) W − I)|, structurally zero.
    pub coupling_det: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub entries: Vec<PatternVerdict>,
    pub all_ok: bool,
}

/// Pattern generation mode for the sweep.
#[derive(Debug, Clone, Copy)]
pub enum SweepMode {
    /// Every nonempty unsaturated set (2^N − 1 patterns).
    Exhaustive,
    /// All-unsaturated plus every single/double saturation plus `count`
    /// random patterns from the given seed.
    Sampled { count: usize, seed: u64 },
}

fn check_pattern(a: f64, b: f64, k: &[f64], unsat: &[bool], ts: f64) -> Result<PatternVerdict> {
    let sys = build_acl(a, b, k, unsat, ts)?;
    let rep = spectrum(&sys.a_cl)?;
    let (w, m) = build_w(unsat);
    let coupling = w.map(|x| x / m as f64) - DMatrix::identity(unsat.len(), unsat.len());
    let det = coupling.determinant().abs();
    let ok = rep.count_on_unit_circle >= 1
        && rep.stable
        && rep
            .eigenvalues
            .iter()
            .all(|e| e.norm() <= 1.0 + UNIT_CIRCLE_TOL)
        && det <= UNIT_CIRCLE_TOL;
    Ok(PatternVerdict {
        unsaturated: unsat.to_vec(),
        m,
        count_on_unit_circle: rep.count_on_unit_circle,
        max_interior_modulus: rep.max_interior_modulus,
        coupling_det: det,
        ok,
    })
}

/// Sweep saturation patterns and verify the marginal pole plus interior
/// stability for each.
pub fn sweep_patterns(a: f64, b: f64, k: &[f64], ts: f64, mode: SweepMode) -> Result<SweepReport> {
    let n = k.len();
    let mut patterns: Vec<Vec<bool>> = Vec::new();
    match mode {
        SweepMode::Exhaustive => {
            for bits in 1u32..(1u32 << n) {
                patterns.push((0..n).map(|i| bits & (1 << i) != 0).collect());
            }
        }
        SweepMode::Sampled { count, seed } => {
            patterns.push(vec![true; n]);
            for i in 0..n {
                let mut p = vec![true; n];
                p[i] = false;
                patterns.push(p);
            }
            for i in 0..n {
                for j in i + 1..n {
                    let mut p = vec![true; n];
                    p[i] = false;
                    p[j] = false;
                    patterns.push(p);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while patterns.len() < count + 1 + n + n * (n - 1) / 2 {
                let p: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                if p.iter().any(|&s| s) {
                    patterns.push(p);
                }
            }
        }
    }
    let mut entries = Vec::with_capacity(patterns.len());
    for p in &patterns {
        entries.push(check_pattern(a, b, k, p, ts)?);
    }
    let all_ok = entries.iter().all(|e| e.ok);
    Ok(SweepReport { entries, all_ok })
}

/// Plain-text spectrum report plus a machine-readable eigenvalue CSV.
pub fn write_reports(
    report_path: &Path,
    csv_path: &Path,
    baseline: &SpectrumReport,
    sweep: Option<&SweepReport>,
) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "closed-loop spectrum report");
    let _ = writeln!(
        text,
        "eigenvalues on unit circle (tol {UNIT_CIRCLE_TOL:e}): {}",
        baseline.count_on_unit_circle
    );
    let _ = writeln!(
        text,
        "max interior modulus: {:.12}",
        baseline.max_interior_modulus
    );
    let _ = writeln!(text, "stable: {}", baseline.stable);
    if let Some(s) = sweep {
        let _ = writeln!(
            text,
            "\npattern sweep: {} patterns, all_ok = {}",
            s.entries.len(),
            s.all_ok
        );
        for e in &s.entries {
            let flags: String = e
                .unsaturated
                .iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect();
            let _ = writeln!(
                text,
                "  s={flags} M={} unit={} max_interior={:.9} det={:.3e} {}",
                e.m,
                e.count_on_unit_circle,
                e.max_interior_modulus,
                e.coupling_det,
                if e.ok { "ok" } else { "VIOLATION" }
            );
        }
    }
    std::fs::write(report_path, text).map_err(|source| Error::Write {
        path: report_path.to_path_buf(),
        source,
    })?;

    let mut csv = String::from("re,im,modulus\n");
    for e in &baseline.eigenvalues {
        let _ = writeln!(csv, "{:.15e},{:.15e},{:.15e}", e.re, e.im, e.norm());
    }
    std::fs::write(csv_path, csv).map_err(|source| Error::Write {
        path: csv_path.to_path_buf(),
        source,
    })
}
