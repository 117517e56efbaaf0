//! Opinion-score processing and agreement statistics.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input is constant")]
    Constant,
    #[error("score {0} outside 1..=5")]
    ScoreOutOfRange(f64),
    #[error("subject {subject} has no score for presentation {presentation}")]
    MissingScore {
        subject: String,
        presentation: String,
    },
    #[error("no hidden reference for source {0}")]
    MissingReference(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// One rated stimulus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub id: String,
    pub source: String,
    pub hidden_reference: bool,
}

/// Subjects x presentations grid of 1..5 scores; `None` marks a missing
/// rating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub subjects: Vec<String>,
    pub presentations: Vec<Presentation>,
    scores: Vec<Vec<Option<f64>>>,
}

#[derive(Deserialize)]
struct CsvRow {
    subject_id: String,
    presentation_id: String,
    score: f64,
    #[serde(default)]
    source_id: Option<String>,
    #[serde(default)]
    is_hidden_reference: Option<String>,
}

fn truthy(s: &str) -> bool {
    matches!(
        s.trim().to_ascii_lowercase().as_str(),
        "1" | "true" | "yes" | "y"
    )
}

impl ScoreMatrix {
    pub fn new(
        subjects: Vec<String>,
        presentations: Vec<Presentation>,
        scores: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, StatsError> {
        if scores.len() != subjects.len() {
            return Err(StatsError::LengthMismatch(scores.len(), subjects.len()));
        }
        for row in &scores {
            if row.len() != presentations.len() {
                return Err(StatsError::LengthMismatch(row.len(), presentations.len()));
            }
            if let Some(s) = row.iter().flatten().find(|s| !(1.0..=5.0).contains(*s)) {
                return Err(StatsError::ScoreOutOfRange(*s));
            }
        }
        Ok(Self {
            subjects,
            presentations,
            scores,
        })
    }

    /// Complete matrix from rows of scores.
    pub fn dense(
        presentations: Vec<Presentation>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, StatsError> {
        let subjects = (0..rows.len()).map(|i| format!("s{i}")).collect();
        Self::new(
            subjects,
            presentations,
            rows.into_iter()
                .map(|r| r.into_iter().map(Some).collect())
                .collect(),
        )
    }

    /// Long-format CSV with header `subject_id,presentation_id,score`, plus
    /// optional `source_id` and `is_hidden_reference` columns. Without a
    /// source column every presentation is its own source.
    pub fn from_csv(reader: impl Read) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut subjects: Vec<String> = Vec::new();
        let mut subject_index = BTreeMap::new();
        let mut presentations: Vec<Presentation> = Vec::new();
        let mut presentation_index = BTreeMap::new();
        let mut cells = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row.map_err(|e| StatsError::Csv(e.to_string()))?;
            let s = *subject_index
                .entry(row.subject_id.clone())
                .or_insert_with(|| {
                    subjects.push(row.subject_id.clone());
                    subjects.len() - 1
                });
            let p = *presentation_index
                .entry(row.presentation_id.clone())
                .or_insert_with(|| {
                    presentations.push(Presentation {
                        id: row.presentation_id.clone(),
                        source: row
                            .source_id
                            .clone()
                            .unwrap_or_else(|| row.presentation_id.clone()),
                        hidden_reference: row.is_hidden_reference.as_deref().is_some_and(truthy),
                    });
                    presentations.len() - 1
                });
            cells.push((s, p, row.score));
        }
        let mut scores = vec![vec![None; presentations.len()]; subjects.len()];
        for (s, p, v) in cells {
            scores[s][p] = Some(v);
        }
        Self::new(subjects, presentations, scores)
    }

    pub fn score(&self, subject: usize, presentation: usize) -> Option<f64> {
        self.scores[subject][presentation]
    }

    /// `(subject, presentation)` index pairs without a rating.
    pub fn missing(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (s, row) in self.scores.iter().enumerate() {
            for (p, v) in row.iter().enumerate() {
                if v.is_none() {
                    out.push((s, p));
                }
            }
        }
        out
    }

    fn require(&self, s: usize, p: usize) -> Result<f64, StatsError> {
        self.scores[s][p].ok_or_else(|| StatsError::MissingScore {
            subject: self.subjects[s].clone(),
            presentation: self.presentations[p].id.clone(),
        })
    }

    fn check_subjects(&self, subjects: &[usize]) -> Result<(), StatsError> {
        if subjects.is_empty() {
            return Err(StatsError::TooFew {
                what: "subjects",
                need: 1,
                got: 0,
            });
        }
        Ok(())
    }
}

/// Per-presentation mean over `subjects`.
pub fn mos(matrix: &ScoreMatrix, subjects: &[usize]) -> Result<Vec<f64>, StatsError> {
    matrix.check_subjects(subjects)?;
    (0..matrix.presentations.len())
        .map(|p| {
            let mut total = 0.0;
            for &s in subjects {
                total += matrix.require(s, p)?;
            }
            Ok(total / subjects.len() as f64)
        })
        .collect()
}

/// Per-presentation mean of `score - score(hidden reference) + 5`.
pub fn dmos(matrix: &ScoreMatrix, subjects: &[usize]) -> Result<Vec<f64>, StatsError> {
    matrix.check_subjects(subjects)?;
    let mut reference = BTreeMap::new();
    for (p, pres) in matrix.presentations.iter().enumerate() {
        if pres.hidden_reference {
            reference.entry(pres.source.as_str()).or_insert(p);
        }
    }
    (0..matrix.presentations.len())
        .map(|p| {
            let source = &matrix.presentations[p].source;
            let r = *reference
                .get(source.as_str())
                .ok_or_else(|| StatsError::MissingReference(source.clone()))?;
            let mut total = 0.0;
            for &s in subjects {
                total += matrix.require(s, p)? - matrix.require(s, r)? + 5.0;
            }
            Ok(total / subjects.len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectDiagnostics {
    pub subject: String,
    /// Scores above the upper bound.
    pub above: usize,
    /// Scores below the lower bound.
    pub below: usize,
    /// `(P + Q) / (J K)`.
    pub outlier_fraction: f64,
    /// `|P - Q| / (P + Q)`, 0 when there are no outliers.
    pub imbalance: f64,
    pub rejected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub retained: Vec<usize>,
    pub rejected: Vec<usize>,
    pub kurtosis: Vec<f64>,
    pub subjects: Vec<SubjectDiagnostics>,
}

pub const OUTLIER_FRACTION: f64 = 0.05;
pub const IMBALANCE_LIMIT: f64 = 0.3;

/// Outlier-subject screening: per presentation, kurtosis of the scores picks
/// a 2 sigma (normal, 2 <= beta2 <= 4) or sqrt(20) sigma band around the
/// mean; a subject is rejected when more than 5% of its scores fall outside
/// and the excursions are not predominantly on one side.
pub fn screen_subjects(matrix: &ScoreMatrix) -> Result<ScreeningReport, StatsError> {
    let n = matrix.subjects.len();
    if n < 2 {
        return Err(StatsError::TooFew {
            what: "subjects",
            need: 2,
            got: n,
        });
    }
    let jk = matrix.presentations.len();
    let mut above = vec![0usize; n];
    let mut below = vec![0usize; n];
    let mut kurtosis = Vec::with_capacity(jk);
    for p in 0..jk {
        let v: Vec<f64> = (0..n)
            .map(|s| matrix.require(s, p))
            .collect::<Result<_, _>>()?;
        let mean = v.iter().sum::<f64>() / n as f64;
        let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let beta2 = if m2 > 0.0 { m4 / (m2 * m2) } else { 3.0 };
        kurtosis.push(beta2);
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let k = if (2.0..=4.0).contains(&beta2) {
            2.0
        } else {
            20f64.sqrt()
        };
        let (lo, hi) = (mean - k * sd, mean + k * sd);
        for (s, &x) in v.iter().enumerate() {
            if x > hi {
                above[s] += 1;
            } else if x < lo {
                below[s] += 1;
            }
        }
    }
    let mut report = ScreeningReport {
        retained: Vec::new(),
        rejected: Vec::new(),
        kurtosis,
        subjects: Vec::new(),
    };
    for s in 0..n {
        let (p, q) = (above[s], below[s]);
        let outlier_fraction = (p + q) as f64 / jk.max(1) as f64;
        let imbalance = if p + q == 0 {
            0.0
        } else {
            (p as f64 - q as f64).abs() / (p + q) as f64
        };
        let rejected = outlier_fraction > OUTLIER_FRACTION && imbalance < IMBALANCE_LIMIT;
        if rejected {
            report.rejected.push(s);
        } else {
            report.retained.push(s);
        }
        report.subjects.push(SubjectDiagnostics {
            subject: matrix.subjects[s].clone(),
            above: p,
            below: q,
            outlier_fraction,
            imbalance,
            rejected,
        });
    }
    Ok(report)
}

/// `b1 (1/2 - 1/(1 + exp(b2 (x - b3)))) + b4 x + b5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub beta: [f64; 5],
}

impl LogisticParams {
    pub const IDENTITY: LogisticParams = LogisticParams {
        beta: [0.0, 1.0, 0.0, 1.0, 0.0],
    };

    pub fn eval(&self, x: f64) -> f64 {
        let [b1, b2, b3, b4, b5] = self.beta;
        b1 * (0.5 - sigmoid(-b2 * (x - b3))) + b4 * x + b5
    }

    fn gradient(&self, x: f64) -> [f64; 5] {
        let [b1, b2, b3, _, _] = self.beta;
        let z = b2 * (x - b3);
        let s = sigmoid(-z);
        let ds = s * sigmoid(z);
        [0.5 - s, b1 * ds * (x - b3), -b1 * ds * b2, x, 1.0]
    }
}

/// `1 / (1 + exp(-z))` without overflow.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: LogisticParams,
    /// Sum of squared residuals at `params`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after every accepted step, starting from the initial guess.
    pub history: Vec<f64>,
}

pub const LM_MAX_ITERATIONS: usize = 500;
pub const LM_TOLERANCE: f64 = 1e-10;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sse(params: &LogisticParams, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| (params.eval(a) - b).powi(2))
        .sum()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for c in 0..N {
        let piv = (c..N).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() <= scale * 1e-14 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..N {
            let f = a[r][c] / a[c][c];
            for k in c..N {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let s: f64 = (r + 1..N).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Exact least squares for `b1, b4, b5` with `b2, b3` held; `None` when the
/// three columns are degenerate.
fn refit_linear(params: &LogisticParams, x: &[f64], y: &[f64]) -> Option<LogisticParams> {
    let [_, b2, b3, _, _] = params.beta;
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let row = [0.5 - sigmoid(-b2 * (xi - b3)), xi, 1.0];
        for a in 0..3 {
            aty[a] += row[a] * yi;
            for b in 0..3 {
                ata[a][b] += row[a] * row[b];
            }
        }
    }
    let [b1, b4, b5] = solve(ata, aty)?;
    Some(LogisticParams {
        beta: [b1, b2, b3, b4, b5],
    })
}

/// Least-squares fit of the five-parameter logistic by Levenberg-Marquardt.
/// Starts from `(max y - min y, 1/std x, mean x, OLS slope, OLS intercept)`
/// and stops when an accepted step changes the residual by less than
/// `1e-10` relative, or after 500 iterations (then `converged` is false and
/// the best iterate is returned). The start and every accepted step are
/// followed by an exact solve for the linear parameters `b1, b4, b5`, kept
/// only when it lowers the residual; without it the fit crawls along the
/// `b1 -> inf, b2 -> 0` valley on near-linear data.
pub fn fit_logistic(x: &[f64], y: &[f64]) -> Result<LogisticFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 5 {
        return Err(StatsError::TooFew {
            what: "points",
            need: 5,
            got: x.len(),
        });
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(StatsError::Constant);
    }
    let slope = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / sxx;
    let std = (sxx / x.len() as f64).sqrt();
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut params = LogisticParams {
        beta: [ymax - ymin, 1.0 / std, mx, slope, my - slope * mx],
    };
    let mut residual = sse(&params, x, y);
    let mut history = vec![residual];
    let polish = |params: &mut LogisticParams, residual: &mut f64, history: &mut Vec<f64>| {
        if let Some(p) = refit_linear(params, x, y) {
            let r = sse(&p, x, y);
            if r < *residual {
                *params = p;
                *residual = r;
                history.push(r);
            }
        }
    };
    polish(&mut params, &mut residual, &mut history);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < LM_MAX_ITERATIONS {
        iterations += 1;
        if residual <= f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        let mut jtj = [[0.0; 5]; 5];
        let mut jtr = [0.0; 5];
        for (&xi, &yi) in x.iter().zip(y) {
            let g = params.gradient(xi);
            let r = yi - params.eval(xi);
            for a in 0..5 {
                jtr[a] += g[a] * r;
                for b in 0..5 {
                    jtj[a][b] += g[a] * g[b];
                }
            }
        }
        // shrink lambda after success, grow it until a step is accepted
        let mut accepted = false;
        while lambda < 1e16 {
            let mut m = jtj;
            for (d, row) in m.iter_mut().enumerate() {
                row[d] += lambda * jtj[d][d].max(1e-12);
            }
            if let Some(step) = solve(m, jtr) {
                let mut trial = params;
                for (b, s) in trial.beta.iter_mut().zip(step) {
                    *b += s;
                }
                let r = sse(&trial, x, y);
                if r.is_finite() && r < residual {
                    let before = residual;
                    params = trial;
                    residual = r;
                    history.push(r);
                    polish(&mut params, &mut residual, &mut history);
                    let change = (before - residual) / before;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    converged = change < LM_TOLERANCE;
                    break;
                }
            }
            lambda *= 10.0;
        }
        // no downhill step at any damping: a (local) minimum
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }
    Ok(LogisticFit {
        params,
        residual,
        iterations,
        converged,
        history,
    })
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew {
            what: "points",
            need: 2,
            got: x.len(),
        });
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson correlation of average ranks.
pub fn srocc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// PLCC and RMSE between `f(x)` and `y`.
pub fn plcc_rmse(x: &[f64], y: &[f64], params: &LogisticParams) -> Result<(f64, f64), StatsError> {
    check_pair(x, y)?;
    let fx: Vec<f64> = x.iter().map(|&v| params.eval(v)).collect();
    let rmse =
        (fx.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    Ok((pearson(&fx, y)?, rmse))
}

/// Agreement of objective predictions with subjective scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub srocc: f64,
    pub plcc: f64,
    pub rmse: f64,
    pub fit: LogisticParams,
}

/// Fit the logistic on `(x, y)` and report SROCC, PLCC and RMSE on the same data.
pub fn evaluate(x: &[f64], y: &[f64]) -> Result<CorrelationReport, StatsError> {
    let fit = fit_logistic(x, y)?;
    let (plcc, rmse) = plcc_rmse(x, y, &fit.params)?;
    Ok(CorrelationReport {
        srocc: srocc(x, y)?,
        plcc,
        rmse,
        fit: fit.params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn presentations(sources: usize, versions: usize) -> Vec<Presentation> {
        let mut out = Vec::new();
        for s in 0..sources {
            for v in 0..versions {
                out.push(Presentation {
                    id: format!("src{s}_v{v}"),
                    source: format!("src{s}"),
                    hidden_reference: v == 0,
                });
            }
        }
        out
    }

    #[test]
    fn mos_and_dmos_basics() {
        let pres = presentations(2, 3);
        let all5 = ScoreMatrix::dense(pres.clone(), vec![vec![5.0; 6]; 4]).unwrap();
        assert!(mos(&all5, &[0, 1, 2, 3]).unwrap().iter().all(|&m| m == 5.0));
        assert!(dmos(&all5, &[0, 1, 2, 3])
            .unwrap()
            .iter()
            .all(|&m| m == 5.0));
        assert!(ScoreMatrix::dense(pres.clone(), vec![vec![6.0; 6]]).is_err());
        let nosrc: Vec<Presentation> = pres
            .iter()
            .map(|p| Presentation {
                hidden_reference: false,
                ..p.clone()
            })
            .collect();
        let m = ScoreMatrix::dense(nosrc, vec![vec![3.0; 6]]).unwrap();
        assert!(matches!(
            dmos(&m, &[0]),
            Err(StatsError::MissingReference(_))
        ));
    }

    #[test]
    fn toy_matrix_by_hand() {
        // one source: reference, two versions; three subjects
        let pres = presentations(1, 3);
        let m = ScoreMatrix::dense(
            pres,
            vec![
                vec![5.0, 4.0, 2.0],
                vec![4.0, 4.0, 1.0],
                vec![5.0, 3.0, 3.0],
            ],
        )
        .unwrap();
        let mo = mos(&m, &[0, 1, 2]).unwrap();
        assert_eq!(mo, vec![14.0 / 3.0, 11.0 / 3.0, 2.0]);
        // (4-5+5, 4-4+5, 3-5+5) and (2-5+5, 1-4+5, 3-5+5)
        let d = dmos(&m, &[0, 1, 2]).unwrap();
        assert_eq!(d, vec![5.0, 4.0, 7.0 / 3.0]);
        assert_eq!(mos(&m, &[1]).unwrap(), vec![4.0, 4.0, 1.0]);
    }

    #[test]
    fn missing_scores_are_flagged() {
        let pres = presentations(1, 2);
        let m = ScoreMatrix::new(
            vec!["a".into(), "b".into()],
            pres,
            vec![vec![Some(3.0), None], vec![Some(4.0), Some(2.0)]],
        )
        .unwrap();
        assert_eq!(m.missing(), vec![(0, 1)]);
        assert!(matches!(
            mos(&m, &[0, 1]),
            Err(StatsError::MissingScore { .. })
        ));
        assert_eq!(mos(&m, &[1]).unwrap(), vec![4.0, 2.0]);
    }

    #[test]
    fn csv_ingest() {
        let text = "subject_id,presentation_id,score,source_id,is_hidden_reference\n\
                    a,p0,5,s,1\na,p1,3,s,0\nb,p0,4,s,1\nb,p1,4,s,0\n";
        let m = ScoreMatrix::from_csv(text.as_bytes()).unwrap();
        assert_eq!(m.subjects, vec!["a", "b"]);
        assert!(m.presentations[0].hidden_reference && !m.presentations[1].hidden_reference);
        assert_eq!(dmos(&m, &[0, 1]).unwrap(), vec![5.0, 4.0]);
        let short = "subject_id,presentation_id,score\na,p0,2\n";
        assert_eq!(
            ScoreMatrix::from_csv(short.as_bytes())
                .unwrap()
                .presentations[0]
                .source,
            "p0"
        );
        assert!(ScoreMatrix::from_csv("subject_id,score\na,2\n".as_bytes()).is_err());
    }

    /// 20 ordinary subjects scoring around a per-presentation quality, with
    /// a symmetric 2/3/4-style spread, plus one extra subject.
    fn panel(extra: impl Fn(usize, f64) -> f64) -> ScoreMatrix {
        let pres = presentations(5, 4);
        let n = pres.len();
        let mut rows = Vec::new();
        for s in 0..20 {
            rows.push(
                (0..n)
                    .map(|p| {
                        let q = 3.0;
                        // offsets -1, 0, 0, +1 cycle over subjects
                        q + [-1.0, 0.0, 0.0, 1.0][(s + p) % 4]
                    })
                    .collect(),
            );
        }
        rows.push((0..n).map(|p| extra(p, 3.0)).collect());
        ScoreMatrix::dense(pres, rows).unwrap()
    }

    #[test]
    fn identical_subjects_are_all_kept() {
        let m = ScoreMatrix::dense(presentations(3, 3), vec![vec![4.0; 9]; 6]).unwrap();
        let r = screen_subjects(&m).unwrap();
        assert!(r.rejected.is_empty());
        assert_eq!(r.retained.len(), 6);
        assert!(screen_subjects(
            &ScoreMatrix::dense(presentations(1, 2), vec![vec![3.0; 2]]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn bidirectional_outlier_is_rejected() {
        let m = panel(|p, q| if p % 2 == 0 { q + 2.0 } else { q - 2.0 });
        let r = screen_subjects(&m).unwrap();
        let d = &r.subjects[20];
        // both conditions, checked directly
        assert!(d.outlier_fraction > 0.05, "{d:?}");
        assert!(d.imbalance < 0.3, "{d:?}");
        assert_eq!(r.rejected, vec![20]);
        assert!(
            r.kurtosis.iter().all(|k| (2.0..=4.0).contains(k)),
            "{:?}",
            r.kurtosis
        );
    }

    #[test]
    fn one_sided_outlier_is_kept() {
        let m = panel(|_, q| q + 2.0);
        let r = screen_subjects(&m).unwrap();
        let d = &r.subjects[20];
        assert!(d.outlier_fraction > 0.05, "{d:?}");
        assert_eq!(d.imbalance, 1.0);
        assert!(r.rejected.is_empty());
    }

    #[test]
    fn logistic_on_linear_data() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 2.0).collect();
        let fit = fit_logistic(&x, &x).unwrap();
        assert!(fit.residual < 1e-12, "{fit:?}");
        let fx: Vec<f64> = x.iter().map(|&v| fit.params.eval(v)).collect();
        let (plcc, rmse) = plcc_rmse(&x, &x, &fit.params).unwrap();
        assert!(plcc > 1.0 - 1e-12 && rmse < 1e-6, "{fx:?}");
        assert!(fit_logistic(&[1.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).is_err());
        assert!(fit_logistic(&x[..4], &x[..4]).is_err());
    }

    #[test]
    fn logistic_recovers_generated_curve() {
        let truth = LogisticParams {
            beta: [3.0, 1.5, 0.2, 0.1, 2.5],
        };
        let x: Vec<f64> = (0..40).map(|i| -3.0 + i as f64 * 0.15).collect();
        let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
        let fit = fit_logistic(&x, &y).unwrap();
        for &v in &x {
            assert!((fit.params.eval(v) - truth.eval(v)).abs() < 1e-6, "{fit:?}");
        }
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn srocc_hand_values() {
        assert_eq!(
            srocc(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap(),
            1.0
        );
        assert_eq!(
            srocc(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(),
            -1.0
        );
        assert!((srocc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(
            srocc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::Constant)
        ));
    }

    #[test]
    fn srocc_with_ties_matches_textbook_formula() {
        // ranks x: 1.5 1.5 3 4 5 ; y: 2 1 3.5 3.5 5
        let x = [1.0, 1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 1.0, 3.0, 3.0, 5.0];
        assert_eq!(average_ranks(&x), vec![1.5, 1.5, 3.0, 4.0, 5.0]);
        assert_eq!(average_ranks(&y), vec![2.0, 1.0, 3.5, 3.5, 5.0]);
        // Pearson of the two rank vectors, by hand: mean 3 for both
        let dx = [-1.5, -1.5, 0.0, 1.0, 2.0];
        let dy = [-1.0, -2.0, 0.5, 0.5, 2.0];
        let sxy: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
        let sxx: f64 = dx.iter().map(|a| a * a).sum();
        let syy: f64 = dy.iter().map(|a| a * a).sum();
        assert!((srocc(&x, &y).unwrap() - sxy / (sxx * syy).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn plcc_identities() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(
            plcc_rmse(&x, &x, &LogisticParams::IDENTITY).unwrap(),
            (1.0, 0.0)
        );
        assert!((plcc_rmse(&x, &y, &LogisticParams::IDENTITY).unwrap().0 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fitted_plcc_beats_raw_on_monotone_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|v| 1.0 + 4.0 * v.powf(2.5) + rng.random_range(-0.05..0.05))
                .collect();
            let fit = fit_logistic(&x, &y).unwrap();
            let raw = pearson(&x, &y).unwrap();
            let (after, _) = plcc_rmse(&x, &y, &fit.params).unwrap();
            assert!(after >= raw - 1e-9, "{after} < {raw}");
        }
    }

    proptest! {
        #[test]
        fn srocc_ignores_monotone_transforms(v in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..30)) {
            let x: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            if let Ok(r) = srocc(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|a| a.exp().min(1e300) + 3.0 * a).collect();
                let ty: Vec<f64> = y.iter().map(|a| a * a * a).collect();
                prop_assert!((srocc(&tx, &ty).unwrap() - r).abs() < 1e-12);
            }
        }

        #[test]
        fn clean_subjects_are_never_rejected(base in prop::collection::vec(1u8..=5, 12), n in 3usize..8) {
            // everyone agrees, so every score sits on the mean
            let rows = vec![base.iter().map(|&b| b as f64).collect::<Vec<_>>(); n];
            let m = ScoreMatrix::dense(presentations(3, 4), rows).unwrap();
            let r = screen_subjects(&m).unwrap();
            prop_assert!(r.rejected.is_empty());
            prop_assert!(r.subjects.iter().all(|d| d.above + d.below == 0));
        }

        #[test]
        fn lm_residual_never_increases(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..15).map(|_| rng.random_range(0.0..10.0)).collect();
            let y: Vec<f64> = x.iter().map(|v| 1.0 + 4.0 / (1.0 + (-(v - 5.0)).exp()) + rng.random_range(-0.3..0.3)).collect();
            let fit = fit_logistic(&x, &y).unwrap();
            prop_assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(*fit.history.last().unwrap(), fit.residual);
        }
    }
}
