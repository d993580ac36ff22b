#pragma once

#include <Eigen/Core>

namespace rd3g {

/// Stadium oval: two straights joined by semicircles, driven counter-clockwise.
/// Arc length s = 0 at the start of the lower straight.
class StadiumTrack {
 public:
  StadiumTrack(double straight_length, double radius, double width,
               Eigen::Vector2d center = Eigen::Vector2d::Zero());

  double length() const;
  double straight_length() const { return straight_; }
  double radius() const { return radius_; }
  double width() const { return width_; }
  const Eigen::Vector2d& center() const { return center_; }

  /// Nearest-centerline coordinates of a point with first and second
  /// derivatives with respect to the point.
  struct Frame {
    double s = 0.0;        // arc length in [0, length)
    double lateral = 0.0;  // signed offset, positive to the left of travel
    double heading = 0.0;  // centerline tangent angle
    Eigen::Vector2d ds, dlateral, dheading;
    Eigen::Matrix2d d2s, d2lateral, d2heading;
  };
  Frame frame(const Eigen::Vector2d& p) const;

  /// Arc length of the nearest centerline point.
  double progress(const Eigen::Vector2d& p) const { return frame(p).s; }

  /// Position and tangent heading at arc length s, offset laterally.
  struct Pose {
    Eigen::Vector2d position;
    double heading;
  };
  Pose pose_at(double s, double lateral = 0.0) const;

  /// a - b wrapped to the shorter signed arc, in (-L/2, L/2].
  double signed_gap(double a, double b) const;

 private:
  double straight_;
  double radius_;
  double width_;
  Eigen::Vector2d center_;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace rd3g
