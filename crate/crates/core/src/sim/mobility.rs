use rand::Rng;

/// Point in the simulation area, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Random-waypoint walker with zero pause time.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub target: Position,
    /// m/s.
    pub speed: f64,
    /// Speed range for redraws, m/s.
    pub speed_range: (f64, f64),
}

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

pub fn uniform_point<R: Rng>(rng: &mut R, width: f64, height: f64) -> Position {
    Position {
        x: rng.gen::<f64>() * width,
        y: rng.gen::<f64>() * height,
    }
}

pub fn uniform_speed<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    range.0 + rng.gen::<f64>() * (range.1 - range.0)
}

impl Waypoint {
    /// Advances `pos` by one slot. On reaching the waypoint the walker stops
    /// there and draws a new waypoint, then a new speed.
    pub fn step<R: Rng>(
        &mut self,
        pos: &mut Position,
        dt: f64,
        area: (f64, f64),
        rng: &mut R,
    ) {
        let reach = self.speed * dt;
        let dist = pos.distance(&self.target);
        if dist <= reach {
            *pos = self.target;
            self.target = uniform_point(rng, area.0, area.1);
            self.speed = uniform_speed(rng, self.speed_range);
        } else if reach > 0.0 {
            let f = reach / dist;
            pos.x += (self.target.x - pos.x) * f;
            pos.y += (self.target.y - pos.y) * f;
        }
    }
}
