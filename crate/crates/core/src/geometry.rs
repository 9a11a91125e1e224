//! Transducer geometry of a four-beam Janus DVL.
//!
//! Beam `i` (0-based here, 1-based in user-facing text) points along
//! `[cos ψᵢ sin α, sin ψᵢ sin α, cos α]` with `ψᵢ = i·90° + 45°`. The 4×3
//! matrix stacking those rows maps DVL-frame velocity to along-beam
//! velocity; [`solve_velocity`] inverts that map in the least-squares sense
//! over any subset of at least three beams.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Number of acoustic beams.
pub const BEAM_COUNT: usize = 4;

/// Smallest singular value accepted for the active beam submatrix.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: pitch angle {alpha_deg}° must lie strictly between 0° and 90°")]
    DegenerateGeometry { alpha_deg: f64 },
    #[error("insufficient beams: {active} active, at least 3 are required")]
    InsufficientBeams { active: usize },
    #[error("singular beam system: smallest singular value {sigma_min:e} below {RANK_TOLERANCE:e}")]
    SingularSystem { sigma_min: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
}

/// Velocity of the vehicle expressed in the DVL frame, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DvlVelocity(pub [f64; 3]);

impl DvlVelocity {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// Along-beam velocities, one per transducer, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BeamVelocities(pub [f64; BEAM_COUNT]);

impl BeamVelocities {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry {
    alpha: f64,
    yaw_angles: [f64; BEAM_COUNT],
    matrix: [[f64; 3]; BEAM_COUNT],
}

/// Builds the transducer matrix for pitch angle `alpha` (radians).
pub fn build_geometry(alpha: f64) -> Result<BeamGeometry, GeometryError> {
    let right = std::f64::consts::FRAC_PI_2;
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= right {
        return Err(GeometryError::DegenerateGeometry {
            alpha_deg: alpha.to_degrees(),
        });
    }
    let mut yaw_angles = [0.0; BEAM_COUNT];
    let mut matrix = [[0.0; 3]; BEAM_COUNT];
    let (sa, ca) = alpha.sin_cos();
    for (i, (yaw, row)) in yaw_angles.iter_mut().zip(matrix.iter_mut()).enumerate() {
        *yaw = (i as f64 * 90.0 + 45.0).to_radians();
        let (sy, cy) = yaw.sin_cos();
        *row = [cy * sa, sy * sa, ca];
    }
    Ok(BeamGeometry {
        alpha,
        yaw_angles,
        matrix,
    })
}

impl BeamGeometry {
    /// Convenience constructor taking the pitch angle in degrees.
    pub fn from_degrees(alpha_deg: f64) -> Result<Self, GeometryError> {
        build_geometry(alpha_deg.to_radians())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn yaw_angles(&self) -> &[f64; BEAM_COUNT] {
        &self.yaw_angles
    }

    pub fn matrix(&self) -> &[[f64; 3]; BEAM_COUNT] {
        &self.matrix
    }

    /// `Tᵀ·T`, row-major.
    pub fn normal_matrix(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for row in &self.matrix {
            for (r, out_row) in out.iter_mut().enumerate() {
                for (c, v) in out_row.iter_mut().enumerate() {
                    *v += row[r] * row[c];
                }
            }
        }
        out
    }
}

/// `T · v`.
pub fn project_to_beams(geom: &BeamGeometry, v: &DvlVelocity) -> BeamVelocities {
    let mut out = [0.0; BEAM_COUNT];
    for (o, row) in out.iter_mut().zip(geom.matrix.iter()) {
        *o = row[0] * v.0[0] + row[1] * v.0[1] + row[2] * v.0[2];
    }
    BeamVelocities(out)
}

/// Least-squares velocity from the beams flagged in `active`.
///
/// The active rows of the transducer matrix are factorized with an SVD; the
/// smallest singular value gates [`GeometryError::SingularSystem`] and the
/// solution is the minimum-norm minimizer of `‖y_active − T_active·v‖²`,
/// which equals `(TᵀT)⁻¹Tᵀy` whenever the system has full column rank.
pub fn solve_velocity(
    geom: &BeamGeometry,
    beams: &[f64; BEAM_COUNT],
    active: &[bool; BEAM_COUNT],
) -> Result<DvlVelocity, GeometryError> {
    let rows: Vec<usize> = (0..BEAM_COUNT).filter(|&i| active[i]).collect();
    if rows.len() < 3 {
        return Err(GeometryError::InsufficientBeams { active: rows.len() });
    }
    if rows.iter().any(|&i| !beams[i].is_finite()) {
        return Err(GeometryError::NonFinite { what: "beam velocities" });
    }
    let a = DMatrix::from_fn(rows.len(), 3, |r, c| geom.matrix[rows[r]][c]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| beams[i]));
    let svd = a.svd(true, true);
    let sigma_min = svd.singular_values.min();
    if sigma_min < RANK_TOLERANCE {
        return Err(GeometryError::SingularSystem { sigma_min });
    }
    let x = svd
        .solve(&y, RANK_TOLERANCE)
        .map_err(|_| GeometryError::SingularSystem { sigma_min })?;
    Ok(DvlVelocity([x[0], x[1], x[2]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const ALL: [bool; 4] = [true; 4];

    fn geom20() -> BeamGeometry {
        BeamGeometry::from_degrees(20.0).unwrap()
    }

    #[test]
    fn first_row_at_twenty_degrees() {
        let g = geom20();
        let row = g.matrix()[0];
        assert_abs_diff_eq!(row[0], 0.241845, epsilon = 1e-6);
        assert_abs_diff_eq!(row[1], 0.241845, epsilon = 1e-6);
        assert_abs_diff_eq!(row[2], 0.939693, epsilon = 1e-6);
    }

    #[test]
    fn yaw_angles_follow_quadrants() {
        let g = geom20();
        for (i, yaw) in g.yaw_angles().iter().enumerate() {
            assert_abs_diff_eq!(yaw.to_degrees(), 45.0 + 90.0 * i as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn rows_are_unit_vectors() {
        for deg in [1.0, 20.0, 45.0, 89.0] {
            let g = BeamGeometry::from_degrees(deg).unwrap();
            for row in g.matrix() {
                let n: f64 = row.iter().map(|v| v * v).sum();
                assert_abs_diff_eq!(n, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn normal_matrix_at_twenty_degrees() {
        let n = geom20().normal_matrix();
        assert_abs_diff_eq!(n[0][0], 0.233956, epsilon = 1e-6);
        assert_abs_diff_eq!(n[1][1], 0.233956, epsilon = 1e-6);
        // 4cos²20° = 3.532089
        assert_abs_diff_eq!(n[2][2], 3.532089, epsilon = 1e-6);
        assert_abs_diff_eq!(n[2][2], 4.0 * 20f64.to_radians().cos().powi(2), epsilon = 1e-12);
        for (r, c) in [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)] {
            assert!(n[r][c].abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_angles_rejected() {
        for deg in [0.0, 90.0, -5.0, 120.0, f64::NAN] {
            assert!(matches!(
                BeamGeometry::from_degrees(deg),
                Err(GeometryError::DegenerateGeometry { .. })
            ));
        }
    }

    #[test]
    fn projection_examples() {
        let g = geom20();
        assert_eq!(project_to_beams(&g, &DvlVelocity::default()).0, [0.0; 4]);
        let up = project_to_beams(&g, &DvlVelocity::new(0.0, 0.0, 1.0));
        for b in up.0 {
            assert_abs_diff_eq!(b, 0.939693, epsilon = 1e-6);
        }
        let fwd = project_to_beams(&g, &DvlVelocity::new(1.0, 0.0, 0.0));
        let expect = [0.241845, -0.241845, -0.241845, 0.241845];
        for (b, e) in fwd.0.iter().zip(expect) {
            assert_abs_diff_eq!(*b, e, epsilon = 1e-6);
        }
    }

    #[test]
    fn round_trip_full_and_three_beam() {
        let g = geom20();
        let v = DvlVelocity::new(1.3, -0.4, 0.07);
        let beams = project_to_beams(&g, &v).0;
        let full = solve_velocity(&g, &beams, &ALL).unwrap();
        let sub = solve_velocity(&g, &beams, &[true, true, true, false]).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(full.0[k], v.0[k], epsilon = 1e-9);
            assert_abs_diff_eq!(sub.0[k], v.0[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn two_beams_are_insufficient() {
        let g = geom20();
        let err = solve_velocity(&g, &[0.0; 4], &[true, false, true, false]).unwrap_err();
        assert_eq!(err, GeometryError::InsufficientBeams { active: 2 });
    }

    #[test]
    fn non_finite_beam_is_rejected() {
        let g = geom20();
        let err = solve_velocity(&g, &[f64::NAN, 0.0, 0.0, 0.0], &ALL).unwrap_err();
        assert!(matches!(err, GeometryError::NonFinite { .. }));
        // inactive NaN is ignored
        assert!(solve_velocity(&g, &[f64::NAN, 0.0, 0.0, 0.0], &[false, true, true, true]).is_ok());
    }

    #[test]
    fn full_solve_minimizes_residual() {
        let g = geom20();
        let y = [0.31, -0.12, -0.27, 0.44];
        let v = solve_velocity(&g, &y, &ALL).unwrap();
        let residual = |cand: &DvlVelocity| {
            let p = project_to_beams(&g, cand).0;
            p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        let best = residual(&v);
        for dx in [-1e-3, 0.0, 1e-3] {
            for dy in [-1e-3, 0.0, 1e-3] {
                for dz in [-1e-3, 0.0, 1e-3] {
                    let c = DvlVelocity::new(v.0[0] + dx, v.0[1] + dy, v.0[2] + dz);
                    assert!(residual(&c) >= best - 1e-15);
                }
            }
        }
    }
}
