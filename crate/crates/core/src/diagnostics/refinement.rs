//! Grid-refinement study separating genuine concentration from
//! discretization artifacts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{run, FinalStatus};
use crate::io::Scenario;

/// Successive peak ratios within this relative band count as unchanged.
pub const BOUNDED_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// Peaks keep growing (or hold) under refinement: the concentration is
    /// resolved more sharply on finer grids.
    ConcentrationRobust,
    /// Peaks agree across grids to within [`BOUNDED_BAND`].
    Bounded,
    /// Peaks shrink under refinement: the growth came from the mesh.
    GridArtifact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub grids: Vec<(usize, usize)>,
    /// Largest `linf(u)` seen over each run.
    pub peaks: Vec<f64>,
    pub statuses: Vec<FinalStatus>,
    pub classification: Classification,
}

/// Classifies a sequence of peaks from successively doubled grids.
pub fn classify_peaks(peaks: &[f64]) -> Classification {
    let ratios: Vec<f64> = peaks.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().all(|r| (r - 1.0).abs() <= BOUNDED_BAND) {
        Classification::Bounded
    } else if ratios.iter().all(|&r| r >= 1.0 / (1.0 + BOUNDED_BAND)) {
        Classification::ConcentrationRobust
    } else {
        Classification::GridArtifact
    }
}

fn check_grids(grids: &[(usize, usize)]) -> Result<()> {
    if grids.len() < 3 {
        return Err(Error::InvalidRefinement(format!("{} grid(s) given", grids.len())));
    }
    for w in grids.windows(2) {
        if w[1].0 != 2 * w[0].0 || w[1].1 != 2 * w[0].1 {
            return Err(Error::InvalidRefinement(format!(
                "{}x{} does not double {}x{}",
                w[1].0, w[1].1, w[0].0, w[0].1
            )));
        }
    }
    Ok(())
}

/// Runs `scenario` on each grid (snapshots suppressed) and classifies the
/// behaviour of the peak density.
pub fn refinement_blowup_classifier(scenario: &Scenario, grids: &[(usize, usize)]) -> Result<RefinementReport> {
    check_grids(grids)?;
    let mut peaks = Vec::with_capacity(grids.len());
    let mut statuses = Vec::with_capacity(grids.len());
    for &(nx, ny) in grids {
        let s = scenario.with_cells(nx, ny);
        s.validate()?;
        let traj = run(s.initial_state()?, &s.params()?, &s.control, s.t_end, &[])?;
        peaks.push(traj.peak_linf_u);
        statuses.push(traj.final_status);
    }
    Ok(RefinementReport {
        grids: grids.to_vec(),
        classification: classify_peaks(&peaks),
        peaks,
        statuses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_scenario;
    use std::path::Path;

    #[test]
    fn classify_examples() {
        assert_eq!(classify_peaks(&[1.54, 1.58, 1.59]), Classification::Bounded);
        assert_eq!(
            classify_peaks(&[10.0, 40.0, 160.0]),
            Classification::ConcentrationRobust
        );
        assert_eq!(classify_peaks(&[10.0, 10.5, 30.0]), Classification::ConcentrationRobust);
        assert_eq!(classify_peaks(&[160.0, 40.0, 10.0]), Classification::GridArtifact);
        assert_eq!(classify_peaks(&[10.0, 30.0, 12.0]), Classification::GridArtifact);
    }

    #[test]
    fn grids_must_double() {
        let s = parse_scenario(
            "name='d'\nt_end=0.01\n[grid]\nnx=8\nny=8\n[model]\nm=1.0\nchi=0.0\n[initial]\nkind='gaussian'\nsigma=0.25\n",
            Path::new("d.toml"),
        )
        .unwrap();
        assert!(matches!(
            refinement_blowup_classifier(&s, &[(8, 8), (16, 16)]),
            Err(Error::InvalidRefinement(_))
        ));
        assert!(matches!(
            refinement_blowup_classifier(&s, &[(8, 8), (16, 16), (24, 24)]),
            Err(Error::InvalidRefinement(_))
        ));
        let r = refinement_blowup_classifier(&s, &[(8, 8), (16, 16), (32, 32)]).unwrap();
        assert_eq!(r.peaks.len(), 3);
        assert!(r.statuses.iter().all(|&s| s == FinalStatus::ReachedT));
    }
}
