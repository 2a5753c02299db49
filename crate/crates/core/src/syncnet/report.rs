use super::{wrap_angle, ApertureState, SyncError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Signed estimation errors of one aperture, estimate minus truth.
/// Angle errors are wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncErrorRow {
    pub id: usize,
    /// Euclidean, m.
    pub position_error: f64,
    pub orientation_error: f64,
    /// s.
    pub time_offset_error: f64,
    /// Hz.
    pub cfo_error: f64,
    pub phase_offset_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncErrorReport {
    pub rows: Vec<SyncErrorRow>,
    pub rms_position: f64,
    pub rms_orientation: f64,
    pub rms_time_offset: f64,
    pub rms_phase_offset: f64,
    /// RMS error of the clock differences `TO_a - TO_b` over all unordered
    /// pairs. Without anchors only these differences are identifiable.
    pub rms_relative_time_offset: f64,
}

pub fn sync_error_report(
    estimates: &BTreeMap<usize, ApertureState>,
    truth: &BTreeMap<usize, ApertureState>,
) -> Result<SyncErrorReport, SyncError> {
    if !estimates.keys().eq(truth.keys()) {
        let e: Vec<_> = estimates.keys().collect();
        let t: Vec<_> = truth.keys().collect();
        return Err(SyncError::IdMismatch(format!("estimates {e:?}, truth {t:?}")));
    }
    let rows: Vec<SyncErrorRow> = estimates
        .iter()
        .map(|(id, e)| {
            let t = &truth[id];
            SyncErrorRow {
                id: *id,
                position_error: (e.position[0] - t.position[0]).hypot(e.position[1] - t.position[1]),
                orientation_error: wrap_angle(e.orientation - t.orientation),
                time_offset_error: e.time_offset - t.time_offset,
                cfo_error: e.cfo - t.cfo,
                phase_offset_error: wrap_angle(e.phase_offset - t.phase_offset),
            }
        })
        .collect();
    let rms = |f: &dyn Fn(&SyncErrorRow) -> f64| {
        if rows.is_empty() {
            return 0.0;
        }
        (rows.iter().map(|r| f(r).powi(2)).sum::<f64>() / rows.len() as f64).sqrt()
    };
    let mut sq = 0.0;
    let mut pairs = 0usize;
    for (a, ra) in rows.iter().enumerate() {
        for rb in &rows[a + 1..] {
            sq += (ra.time_offset_error - rb.time_offset_error).powi(2);
            pairs += 1;
        }
    }
    Ok(SyncErrorReport {
        rms_position: rms(&|r| r.position_error),
        rms_orientation: rms(&|r| r.orientation_error),
        rms_time_offset: rms(&|r| r.time_offset_error),
        rms_phase_offset: rms(&|r| r.phase_offset_error),
        rms_relative_time_offset: if pairs == 0 { 0.0 } else { (sq / pairs as f64).sqrt() },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn errors_are_signed_and_wrapped() {
        let t: BTreeMap<_, _> = [(1, ApertureState::new(1, [0.0, 0.0], PI - 0.1, 1e-9, 0.0))].into();
        let e: BTreeMap<_, _> = [(1, ApertureState::new(1, [3.0, 4.0], -PI + 0.1, 3e-9, -0.2))].into();
        let r = sync_error_report(&e, &t).unwrap();
        let row = r.rows[0];
        assert_eq!(row.position_error, 5.0);
        assert!((row.orientation_error - 0.2).abs() < 1e-12);
        assert!((row.time_offset_error - 2e-9).abs() < 1e-22);
        assert!((row.phase_offset_error + 0.2).abs() < 1e-15);
        assert_eq!(r.rms_relative_time_offset, 0.0);
    }

    #[test]
    fn common_clock_shift_cancels_in_relative_error() {
        let t: BTreeMap<_, _> = (1..=3).map(|i| (i, ApertureState::new(i, [i as f64, 0.0], 0.0, i as f64 * 1e-9, 0.0))).collect();
        let e: BTreeMap<_, _> = t.iter().map(|(i, s)| (*i, ApertureState { time_offset: s.time_offset + 5e-9, ..*s })).collect();
        let r = sync_error_report(&e, &t).unwrap();
        assert!((r.rms_time_offset - 5e-9).abs() < 1e-20);
        assert!(r.rms_relative_time_offset < 1e-20);
    }

    #[test]
    fn mismatched_ids() {
        let t: BTreeMap<_, _> = [(1, ApertureState::new(1, [0.0, 0.0], 0.0, 0.0, 0.0))].into();
        let e: BTreeMap<_, _> = [(2, ApertureState::new(2, [0.0, 0.0], 0.0, 0.0, 0.0))].into();
        assert!(matches!(sync_error_report(&e, &t), Err(SyncError::IdMismatch(_))));
    }
}
