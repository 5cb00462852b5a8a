//! Room geometry: coordinator photo-detector array on the ceiling plane,
//! device LEDs below, both described in a right-handed frame with `z` up.

use crate::error::{Error, Result};

/// A point or direction in 3-D space, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn sub(self, other: Point3) -> Point3 {
        Point3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Result<Point3> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::invalid("orientation", "zero or non-finite normal"));
        }
        Ok(Point3::new(self.x / n, self.y / n, self.z / n))
    }
}

/// Axis-aligned room extent, metres. The origin sits at one floor corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomDims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl RoomDims {
    pub fn contains(&self, p: Point3) -> bool {
        p.x >= 0.0
            && p.x <= self.length
            && p.y >= 0.0
            && p.y <= self.width
            && p.z >= 0.0
            && p.z <= self.height
    }

    pub fn center_floor(&self) -> Point3 {
        Point3::new(self.length / 2.0, self.width / 2.0, 0.0)
    }
}

/// Positions and orientations of the coordinator PDs and the device LEDs.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub room: RoomDims,
    pub pd_positions: Vec<Point3>,
    /// Unit normal of every PD (default straight down).
    pub pd_orientation: Point3,
    pub device_positions: Vec<Point3>,
    /// Unit normal of every device LED (default straight up).
    pub device_orientation: Point3,
}

impl Geometry {
    pub fn n_devices(&self) -> usize {
        self.device_positions.len()
    }

    pub fn m_pds(&self) -> usize {
        self.pd_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.room.length <= 0.0 || self.room.width <= 0.0 || self.room.height <= 0.0 {
            return Err(Error::invalid("room", "dimensions must be strictly positive"));
        }
        if self.pd_positions.is_empty() {
            return Err(Error::invalid("pd_positions", "need at least one photo-detector"));
        }
        if self.device_positions.is_empty() {
            return Err(Error::invalid("device_positions", "need at least one device"));
        }
        for (i, p) in self.pd_positions.iter().enumerate() {
            if !self.room.contains(*p) {
                return Err(Error::invalid(
                    "pd_positions",
                    format!("PD {} at ({}, {}, {}) is outside the room", i, p.x, p.y, p.z),
                ));
            }
        }
        for (j, p) in self.device_positions.iter().enumerate() {
            if !self.room.contains(*p) {
                return Err(Error::invalid(
                    "device_positions",
                    format!("device {} at ({}, {}, {}) is outside the room", j, p.x, p.y, p.z),
                ));
            }
        }
        for n in [self.pd_orientation, self.device_orientation] {
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("orientation", "normals must be unit vectors"));
            }
        }
        Ok(())
    }
}

/// Coordinator PD array centred above the floor centre at `height`.
///
/// Layouts: one PD at the centre, a pair split by `spacing` along the room's
/// length axis, or a 2x2 grid of `spacing` x `spacing`. Other counts need
/// explicit positions.
pub fn pd_array(m: usize, room: &RoomDims, height: f64, spacing: f64) -> Result<Vec<Point3>> {
    let c = room.center_floor();
    let (cx, cy) = (c.x, c.y);
    let h = spacing / 2.0;
    match m {
        1 => Ok(vec![Point3::new(cx, cy, height)]),
        2 => Ok(vec![
            Point3::new(cx - h, cy, height),
            Point3::new(cx + h, cy, height),
        ]),
        4 => Ok(vec![
            Point3::new(cx - h, cy - h, height),
            Point3::new(cx - h, cy + h, height),
            Point3::new(cx + h, cy - h, height),
            Point3::new(cx + h, cy + h, height),
        ]),
        other => Err(Error::invalid(
            "pd_count",
            format!("no built-in array layout for {} PDs; supply explicit positions", other),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> RoomDims {
        RoomDims {
            length: 10.0,
            width: 20.0,
            height: 5.0,
        }
    }

    #[test]
    fn pd_pair_is_split_along_length_axis() {
        let pds = pd_array(2, &room(), 4.85, 0.15).unwrap();
        assert_eq!(pds.len(), 2);
        assert!((pds[0].x - 4.925).abs() < 1e-12);
        assert!((pds[1].x - 5.075).abs() < 1e-12);
        assert_eq!(pds[0].y, 10.0);
        assert_eq!(pds[0].z, 4.85);
    }

    #[test]
    fn pd_grid_has_four_corners() {
        let pds = pd_array(4, &room(), 4.85, 0.15).unwrap();
        assert_eq!(pds.len(), 4);
        let xs: Vec<f64> = pds.iter().map(|p| p.x).collect();
        assert!(xs.iter().filter(|&&x| (x - 4.925).abs() < 1e-12).count() == 2);
        assert!(xs.iter().filter(|&&x| (x - 5.075).abs() < 1e-12).count() == 2);
    }

    #[test]
    fn unsupported_array_size_is_rejected() {
        assert!(pd_array(3, &room(), 4.85, 0.15).is_err());
    }

    #[test]
    fn validate_rejects_out_of_room_device() {
        let g = Geometry {
            room: room(),
            pd_positions: vec![Point3::new(5.0, 10.0, 4.85)],
            pd_orientation: Point3::new(0.0, 0.0, -1.0),
            device_positions: vec![Point3::new(11.0, 1.0, 0.85)],
            device_orientation: Point3::new(0.0, 0.0, 1.0),
        };
        assert!(g.validate().is_err());
    }
}
