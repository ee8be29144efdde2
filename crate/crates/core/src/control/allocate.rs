//! Constrained thrust allocation.
//!
//! Maps a desired body wrench onto nonnegative, saturation-bounded thruster
//! magnitudes by an active-set bounded least-squares solve of
//! `min ‖W(M·u − [f; τ])‖²  s.t.  0 ≤ uᵢ ≤ f_max`, with the torque rows
//! weighted above the force rows so attitude demands win when the same
//! thrusters serve both.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attitude::Vec3;
use crate::error::{Error, Result};

const KKT_TOL: f64 = 1e-10;
const BOUND_TOL: f64 = 1e-12;

/// One body-mounted thruster: position, firing direction (unit), and
/// saturation limit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thruster {
    pub position: Vec3,
    pub direction: Vec3,
    pub f_max: f64,
}

/// Validated thruster layout with its stacked force/torque influence matrix.
#[derive(Clone, Debug)]
pub struct ThrusterConfig {
    thrusters: Vec<Thruster>,
    influence: DMatrix<f64>,
    attitude_weight: f64,
}

impl ThrusterConfig {
    /// Directions must be unit within 1e-6 (then normalized exactly); the
    /// stacked 6×n influence matrix must have rank 6.
    pub fn new(thrusters: Vec<Thruster>) -> Result<Self> {
        Self::with_attitude_weight(thrusters, 10.0)
    }

    pub fn with_attitude_weight(mut thrusters: Vec<Thruster>, attitude_weight: f64) -> Result<Self> {
        if thrusters.is_empty() {
            return Err(Error::Configuration("thruster layout is empty".into()));
        }
        if !(attitude_weight > 0.0) {
            return Err(Error::Configuration("attitude weight must be positive".into()));
        }
        for (i, t) in thrusters.iter_mut().enumerate() {
            let n = t.direction.norm();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::Configuration(format!(
                    "thruster {i} direction has norm {n}, expected unit"
                )));
            }
            t.direction /= n;
            if !(t.f_max > 0.0) {
                return Err(Error::Configuration(format!("thruster {i} has non-positive f_max")));
            }
        }
        let n = thrusters.len();
        let mut influence = DMatrix::<f64>::zeros(6, n);
        for (j, t) in thrusters.iter().enumerate() {
            let torque = t.position.cross(&t.direction);
            for i in 0..3 {
                influence[(i, j)] = t.direction[i];
                influence[(3 + i, j)] = torque[i];
            }
        }
        let rank = influence.clone().svd(false, false).rank(1e-9);
        if rank < 6 {
            return Err(Error::Configuration(format!(
                "thruster influence matrix has rank {rank}, need 6 for full wrench authority"
            )));
        }
        Ok(Self { thrusters, influence, attitude_weight })
    }

    /// Ten-thruster default: eight corner thrusters canted tangentially on a
    /// 0.05 m half-width cube (force authority in all axes plus z-torque
    /// couples by level) and two pure-force axial thrusters.
    pub fn default_layout() -> Self {
        let h = 0.05;
        let cant = 0.5;
        let axial = (1.0 - 0.25f64).sqrt();
        let mut thrusters = Vec::with_capacity(10);
        for &(sx, sy) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let d = Vec3::new(-sy * cant, sx * cant, axial).normalize();
            thrusters.push(Thruster { position: Vec3::new(sx * h, sy * h, -h), direction: d, f_max: 1.0 });
        }
        for &(sx, sy) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let d = Vec3::new(sy * cant, -sx * cant, -axial).normalize();
            thrusters.push(Thruster { position: Vec3::new(sx * h, sy * h, h), direction: d, f_max: 1.0 });
        }
        thrusters.push(Thruster { position: Vec3::new(0.0, 0.0, -h), direction: Vec3::z(), f_max: 1.0 });
        thrusters.push(Thruster { position: Vec3::new(0.0, 0.0, h), direction: -Vec3::z(), f_max: 1.0 });
        Self::new(thrusters).expect("default layout is rank 6")
    }

    pub fn thrusters(&self) -> &[Thruster] {
        &self.thrusters
    }

    pub fn len(&self) -> usize {
        self.thrusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thrusters.is_empty()
    }

    pub fn influence(&self) -> &DMatrix<f64> {
        &self.influence
    }

    pub fn attitude_weight(&self) -> f64 {
        self.attitude_weight
    }

    /// Net body wrench produced by a thrust vector.
    pub fn wrench_of(&self, thrust: &[f64]) -> (Vec3, Vec3) {
        let mut force = Vec3::zeros();
        let mut torque = Vec3::zeros();
        for (t, &u) in self.thrusters.iter().zip(thrust) {
            force += t.direction * u;
            torque += t.position.cross(&t.direction) * u;
        }
        (force, torque)
    }
}

/// Result of one allocation solve. `residual` is the weighted objective norm
/// `‖W(M·u − d)‖` actually minimized.
#[derive(Clone, Debug)]
pub struct Allocation {
    pub thrust: Vec<f64>,
    pub residual: f64,
}

/// Allocate a desired body force and torque onto the thruster set.
pub fn allocate(f_body: &Vec3, tau_body: &Vec3, tc: &ThrusterConfig) -> Result<Allocation> {
    let n = tc.len();
    let mut a = tc.influence.clone();
    let mut d = DVector::<f64>::zeros(6);
    for i in 0..3 {
        d[i] = f_body[i];
        d[3 + i] = tau_body[i] * tc.attitude_weight;
        for j in 0..n {
            a[(3 + i, j)] *= tc.attitude_weight;
        }
    }
    let upper: Vec<f64> = tc.thrusters.iter().map(|t| t.f_max).collect();
    let thrust = bvls(&a, &d, &upper)?;
    let residual = (&a * DVector::from_column_slice(&thrust) - &d).norm();
    Ok(Allocation { thrust, residual })
}

#[derive(Clone, Copy, PartialEq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// Bounded-variable least squares, active-set form (Stark–Parker flavor of
/// Lawson–Hanson). Deterministic: ties break on the lowest index.
fn bvls(a: &DMatrix<f64>, d: &DVector<f64>, upper: &[f64]) -> Result<Vec<f64>> {
    let n = a.ncols();
    let mut state = vec![Bound::Lower; n];
    let mut u = DVector::<f64>::zeros(n);

    let max_outer = 10 * n + 20;
    for _ in 0..max_outer {
        let residual = d - a * &u;
        let grad = a.transpose() * residual;

        // most violating bound-active variable, if any
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            let violation = match state[j] {
                Bound::Lower => grad[j],
                Bound::Upper => -grad[j],
                Bound::Free => continue,
            };
            if violation > KKT_TOL && best.map_or(true, |(_, v)| violation > v) {
                best = Some((j, violation));
            }
        }
        let Some((enter, _)) = best else {
            return Ok(u.as_slice().to_vec());
        };
        state[enter] = Bound::Free;

        // re-solve the free subproblem, clipping along the segment to the
        // first bound hit until the free set is interior
        loop {
            let free: Vec<usize> = (0..n).filter(|&j| state[j] == Bound::Free).collect();
            if free.is_empty() {
                break;
            }
            let mut rhs = d.clone();
            for j in 0..n {
                if state[j] == Bound::Upper {
                    rhs -= a.column(j) * upper[j];
                }
            }
            let sub = a.select_columns(free.iter());
            let sol = sub
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::NumericalFailure(format!("allocation subproblem: {e}")))?;

            let mut alpha = 1.0f64;
            let mut blocker: Option<(usize, Bound)> = None;
            for (idx, &j) in free.iter().enumerate() {
                let target = sol[idx];
                let current = u[j];
                if target < -BOUND_TOL && target < current {
                    let step = (0.0 - current) / (target - current);
                    if step < alpha {
                        alpha = step;
                        blocker = Some((j, Bound::Lower));
                    }
                } else if target > upper[j] + BOUND_TOL && target > current {
                    let step = (upper[j] - current) / (target - current);
                    if step < alpha {
                        alpha = step;
                        blocker = Some((j, Bound::Upper));
                    }
                }
            }

            for (idx, &j) in free.iter().enumerate() {
                u[j] += alpha * (sol[idx] - u[j]);
            }
            match blocker {
                None => {
                    for &j in &free {
                        u[j] = u[j].clamp(0.0, upper[j]);
                    }
                    break;
                }
                Some((j, side)) => {
                    u[j] = match side {
                        Bound::Lower => 0.0,
                        Bound::Upper => upper[j],
                        Bound::Free => unreachable!(),
                    };
                    state[j] = side;
                }
            }
        }
    }
    Err(Error::NumericalFailure("thrust allocation did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_layout_has_rank_six() {
        let tc = ThrusterConfig::default_layout();
        assert_eq!(tc.len(), 10);
        assert_eq!(tc.influence().clone().svd(false, false).rank(1e-9), 6);
    }

    #[test]
    fn zero_demand_yields_zero_thrust() {
        let tc = ThrusterConfig::default_layout();
        let alloc = allocate(&Vec3::zeros(), &Vec3::zeros(), &tc).unwrap();
        assert!(alloc.thrust.iter().all(|&u| u == 0.0));
        assert_eq!(alloc.residual, 0.0);
    }

    #[test]
    fn pure_force_demand_uses_matching_thruster() {
        let tc = ThrusterConfig::default_layout();
        // thruster 8 is the pure +z axial unit at the bottom face
        let demand = Vec3::new(0.0, 0.0, 0.4);
        let alloc = allocate(&demand, &Vec3::zeros(), &tc).unwrap();
        assert_abs_diff_eq!(alloc.thrust[8], 0.4, epsilon = 1e-9);
        for (j, &u) in alloc.thrust.iter().enumerate() {
            if j != 8 {
                assert!(u <= 1e-9, "thruster {j} fired {u}");
            }
        }
    }

    #[test]
    fn feasible_demands_are_met_within_tolerance() {
        // demands built from in-bounds thrust mixes lie inside the polytope
        let tc = ThrusterConfig::default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mix: Vec<f64> = (0..tc.len()).map(|_| rng.random_range(0.0..0.9)).collect();
            let (f, tau) = tc.wrench_of(&mix);
            let alloc = allocate(&f, &tau, &tc).unwrap();
            for (j, &u) in alloc.thrust.iter().enumerate() {
                assert!(
                    (0.0..=tc.thrusters()[j].f_max + 1e-12).contains(&u),
                    "thruster {j} out of bounds: {u}"
                );
            }
            let (force, torque) = tc.wrench_of(&alloc.thrust);
            let demand_norm = (f.norm_squared() + tau.norm_squared()).sqrt();
            let err = ((force - f).norm_squared() + (torque - tau).norm_squared()).sqrt();
            assert!(err <= 1e-6 * demand_norm.max(1e-9), "demand missed by {err}");
        }
    }

    #[test]
    fn unit_wrench_demands_have_authority() {
        let tc = ThrusterConfig::default_layout();
        for i in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut f = Vec3::zeros();
                f[i] = 0.3 * sign;
                let alloc = allocate(&f, &Vec3::zeros(), &tc).unwrap();
                let (force, torque) = tc.wrench_of(&alloc.thrust);
                assert!((force - f).norm() < 1e-6, "force axis {i} sign {sign}");
                assert!(torque.norm() < 1e-6);

                let mut tau = Vec3::zeros();
                tau[i] = 0.01 * sign;
                let alloc = allocate(&Vec3::zeros(), &tau, &tc).unwrap();
                let (force, torque) = tc.wrench_of(&alloc.thrust);
                assert!((torque - tau).norm() < 1e-6, "torque axis {i} sign {sign}");
                assert!(force.norm() < 1e-6);
            }
        }
    }

    /// Exhaustive grid oracle on a reduced 3-thruster planar config.
    #[test]
    fn matches_grid_search_oracle_on_reduced_config() {
        let thrusters = vec![
            Thruster { position: Vec3::new(0.05, 0.0, 0.0), direction: Vec3::y(), f_max: 1.0 },
            Thruster { position: Vec3::new(-0.05, 0.0, 0.0), direction: Vec3::y(), f_max: 1.0 },
            Thruster { position: Vec3::new(0.0, 0.05, 0.0), direction: Vec3::x(), f_max: 1.0 },
        ];
        // rank-6 is impossible with 3 thrusters; build the weighted system the
        // same way allocate() does and call the solver directly
        let weight = 10.0;
        let n = thrusters.len();
        let mut a = DMatrix::<f64>::zeros(6, n);
        for (j, t) in thrusters.iter().enumerate() {
            let torque = t.position.cross(&t.direction);
            for i in 0..3 {
                a[(i, j)] = t.direction[i];
                a[(3 + i, j)] = torque[i] * weight;
            }
        }
        let upper = vec![1.0; 3];
        let grid_steps = 60;

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..20 {
            // demands constructed from in-range thrust mixes so the optimum is
            // (near) feasible, plus a few unreachable ones
            let d = if trial % 4 == 0 {
                let mut d = DVector::<f64>::zeros(6);
                d[0] = rng.random_range(-2.0..2.0);
                d[2] = rng.random_range(-1.0..1.0); // unreachable z-force
                d
            } else {
                let mix: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
                &a * DVector::from_column_slice(&mix)
            };

            let solved = bvls(&a, &d, &upper).unwrap();
            let solved_resid = (&a * DVector::from_column_slice(&solved) - &d).norm();

            let mut best = f64::INFINITY;
            let step = 1.0 / grid_steps as f64;
            for i in 0..=grid_steps {
                for j in 0..=grid_steps {
                    for k in 0..=grid_steps {
                        let u = DVector::from_column_slice(&[
                            i as f64 * step,
                            j as f64 * step,
                            k as f64 * step,
                        ]);
                        let r = (&a * u - &d).norm();
                        if r < best {
                            best = r;
                        }
                    }
                }
            }
            assert!(
                solved_resid <= best + 1e-4,
                "trial {trial}: solver residual {solved_resid} vs grid {best}"
            );
        }
    }

    #[test]
    fn saturated_demand_stays_within_bounds() {
        let tc = ThrusterConfig::default_layout();
        let alloc = allocate(&Vec3::new(50.0, -20.0, 10.0), &Vec3::new(1.0, 1.0, -1.0), &tc).unwrap();
        for (j, &u) in alloc.thrust.iter().enumerate() {
            assert!((0.0..=tc.thrusters()[j].f_max + 1e-12).contains(&u), "thruster {j}: {u}");
        }
        assert!(alloc.residual > 0.0);
    }

    #[test]
    fn rank_deficient_layout_rejected() {
        // all thrusters through the center of mass along z: no torque, no xy force
        let thrusters = (0..4)
            .map(|_| Thruster { position: Vec3::zeros(), direction: Vec3::z(), f_max: 1.0 })
            .collect();
        assert!(matches!(ThrusterConfig::new(thrusters), Err(Error::Configuration(_))));
    }

    #[test]
    fn non_unit_direction_rejected() {
        let thrusters = vec![Thruster { position: Vec3::zeros(), direction: Vec3::new(0.0, 0.0, 2.0), f_max: 1.0 }];
        assert!(ThrusterConfig::new(thrusters).is_err());
    }
}
