use serde::{Deserialize, Serialize};

/// Numerical tolerances shared across modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Singular values below `rank_tol * sigma_max` count as zero.
    pub rank_tol: f64,
    /// Largest accepted `‖φ(x)‖∞` for a point to count as on the manifold.
    pub manifold_tol: f64,
    /// Half-width of the band `|b(x)| ≤ band` standing in for the boundary.
    pub boundary_band: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: 1e-10,
            manifold_tol: 1e-8,
            boundary_band: 1e-3,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = [self.rank_tol, self.manifold_tol, self.boundary_band, self.newton_tol]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !ok || self.newton_max_iter == 0 {
            return Err(crate::Error::InvalidInput("tolerances must be positive and finite".into()));
        }
        Ok(())
    }
}
