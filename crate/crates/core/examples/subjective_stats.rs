//! Subject screening, MOS/DMOS, the 5-parameter logistic mapping and the
//! correlation figures used for evaluation.
//!
//!     cargo run --example subjective_stats

use uvqa::stats::{dmos, evaluate, mos, screen_subjects, Presentation, ScoreMatrix};

fn main() -> anyhow::Result<()> {
    let presentations: Vec<Presentation> = (0..12)
        .map(|p| Presentation {
            id: format!("p{p}"),
            source: format!("src{}", p / 4),
            hidden_reference: p % 4 == 0,
        })
        .collect();
    let truth: Vec<f64> = (0..12)
        .map(|p| {
            if p % 4 == 0 {
                4.0
            } else {
                4.0 - 0.5 * (p % 4) as f64 - 0.1 * (p / 4) as f64
            }
        })
        .collect();
    let mut rows: Vec<Vec<f64>> = (0..20)
        .map(|s| {
            truth
                .iter()
                .enumerate()
                .map(|(p, t)| t + 0.4 * [-1.0, 0.0, 0.0, 1.0][(s + p) % 4])
                .collect()
        })
        .collect();
    // an erratic subject, 0.8 off in either direction
    rows.push(
        truth
            .iter()
            .enumerate()
            .map(|(p, t)| if p % 2 == 0 { t + 0.8 } else { t - 0.8 })
            .collect(),
    );
    let matrix = ScoreMatrix::dense(presentations, rows)?;

    let screening = screen_subjects(&matrix)?;
    println!("rejected subjects: {:?}", screening.rejected);
    let m = mos(&matrix, &screening.retained)?;
    let d = dmos(&matrix, &screening.retained)?;
    println!(
        "mos  {:?}",
        m.iter()
            .map(|v| (v * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );
    println!(
        "dmos {:?}",
        d.iter()
            .map(|v| (v * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );

    let prediction: Vec<f64> = m
        .iter()
        .enumerate()
        .map(|(i, v)| (v - 1.0).powf(1.7) / 10.0 + 0.02 * (i as f64).sin())
        .collect();
    let r = evaluate(&prediction, &m)?;
    println!(
        "srocc {:.3}  plcc {:.3}  rmse {:.3}  beta {:?}",
        r.srocc, r.plcc, r.rmse, r.fit.beta
    );
    Ok(())
}
