//! Shared benchmark fixtures.

use bbmtail::{Ball, EventSpec, MovingBallSpec};

/// `Z_t(B(0, 1)) = 0` in one dimension with `β = 1`.
pub fn empty_unit_ball() -> EventSpec {
    let ball = MovingBallSpec::new(Ball::centered(1, 1.0).expect("valid ball"), 0.0, 1.0, None)
        .expect("valid moving ball");
    EventSpec::empty(ball)
}
