use super::config::EnvConfig;

/// Zones laid out on a grid; zone id `z = y * width + x`. Every zone is
/// reachable from every other zone in a single move.
#[derive(Debug, Clone)]
pub struct ZoneMap {
    width: usize,
    height: usize,
    travel: Vec<u32>,
    revenue: Vec<f64>,
}

impl ZoneMap {
    pub fn new(width: usize, height: usize, kappa_t: f64, rho0: f64, rho1: f64) -> ZoneMap {
        let n = width * height;
        let mut travel = Vec::with_capacity(n * n);
        let mut revenue = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let d = manhattan(width, a, b) as f64;
                travel.push((kappa_t * d).round().max(1.0) as u32);
                revenue.push(rho0 + rho1 * d);
            }
        }
        ZoneMap {
            width,
            height,
            travel,
            revenue,
        }
    }

    pub fn from_config(cfg: &EnvConfig) -> ZoneMap {
        ZoneMap::new(cfg.grid_width, cfg.grid_height, cfg.kappa_t, cfg.rho0, cfg.rho1)
    }

    pub fn num_zones(&self) -> usize {
        self.width * self.height
    }

    pub fn coords(&self, z: usize) -> (usize, usize) {
        (z % self.width, z / self.width)
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        manhattan(self.width, a, b)
    }

    pub fn travel_time(&self, a: usize, b: usize) -> u32 {
        self.travel[a * self.num_zones() + b]
    }

    pub fn base_revenue(&self, a: usize, b: usize) -> f64 {
        self.revenue[a * self.num_zones() + b]
    }

    pub fn max_distance_from(&self, a: usize) -> u32 {
        (0..self.num_zones()).map(|b| self.distance(a, b)).max().unwrap_or(0)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

fn manhattan(width: usize, a: usize, b: usize) -> u32 {
    let (ax, ay) = ((a % width) as i64, (a / width) as i64);
    let (bx, by) = ((b % width) as i64, (b / width) as i64);
    ((ax - bx).abs() + (ay - by).abs()) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn travel_and_revenue_follow_distance() {
        let m = ZoneMap::new(5, 2, 1.0, 1.0, 1.0);
        assert_eq!(m.travel_time(3, 3), 1);
        assert_eq!(m.distance(0, 9), 5);
        assert_eq!(m.travel_time(0, 9), 5);
        assert_eq!(m.base_revenue(0, 9), 6.0);
        assert_eq!(m.base_revenue(4, 4), 1.0);
        let slow = ZoneMap::new(5, 2, 2.0, 1.0, 1.0);
        assert_eq!(slow.travel_time(0, 1), 2);
    }

    #[test]
    fn revenue_strictly_increases_with_distance() {
        let m = ZoneMap::new(4, 3, 1.0, 0.5, 0.7);
        for o in 0..m.num_zones() {
            for a in 0..m.num_zones() {
                for b in 0..m.num_zones() {
                    if m.distance(o, a) < m.distance(o, b) {
                        assert!(m.base_revenue(o, a) < m.base_revenue(o, b));
                    }
                }
            }
        }
    }
}
