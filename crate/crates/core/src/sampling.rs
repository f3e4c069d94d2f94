//! Seeded random sampling of surface points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypersurface::{dual_map, gaussian_point, project_to_surface, Surface, SurfacePoint};

/// Draws `count` points: Gaussian ambient seeds projected onto `S`. Seeds
/// whose projection fails or where the dual map is undefined are redrawn.
pub fn sample_points(surface: &Surface, count: usize, seed: u64) -> Result<Vec<SurfacePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_draws = 20 * count + 100;
    let mut draws = 0;
    while out.len() < count {
        if draws == max_draws {
            return Err(Error::ProjectionDiverged { iterations: draws });
        }
        draws += 1;
        let ambient = gaussian_point(&mut rng, surface.n());
        let Ok(p) = project_to_surface(surface, &ambient) else {
            continue;
        };
        if dual_map(surface, &p).is_ok() {
            out.push(p);
        }
    }
    Ok(out)
}

/// Points where every pair sum `z_j w_j + z_k w_k` exceeds `min_margin`.
pub fn sample_points_with_margin(
    surface: &Surface,
    count: usize,
    seed: u64,
    min_margin: f64,
) -> Result<Vec<SurfacePoint>> {
    let mut out = Vec::with_capacity(count);
    let mut batch_seed = seed;
    while out.len() < count {
        for p in sample_points(surface, count, batch_seed)? {
            let w = dual_map(surface, &p)?;
            if crate::hypersurface::star_margin(&p.z, &w).0 > min_margin && out.len() < count {
                out.push(p);
            }
        }
        batch_seed = batch_seed.wrapping_add(0x9e37_79b9);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_on_surface() {
        let s = Surface::ellipsoid(&[3.0, 1.0, 0.5]).unwrap();
        let a = sample_points(&s, 10, 5).unwrap();
        let b = sample_points(&s, 10, 5).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(
                s.rho_at(&p.z).abs()
                    < 1e-12 * (1.0 + p.z.iter().map(|c| c.norm_sqr()).sum::<f64>())
            );
        }
    }
}
