#include "rd3g/track.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rd3g {

using Eigen::Matrix2d;
using Eigen::Vector2d;

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

StadiumTrack::StadiumTrack(double straight_length, double radius, double width,
                           Vector2d center)
    : straight_(straight_length), radius_(radius), width_(width), center_(center) {
  if (!(straight_length >= 0.0 && radius > 0.0 && width > 0.0))
    throw std::invalid_argument("track needs straight >= 0, radius > 0, width > 0");
}

double StadiumTrack::length() const { return 2.0 * straight_ + 2.0 * kPi * radius_; }

double StadiumTrack::signed_gap(double a, double b) const {
  const double L = length();
  double d = std::fmod(a - b, L);
  if (d > 0.5 * L) d -= L;
  if (d <= -0.5 * L) d += L;
  return d;
}

StadiumTrack::Frame StadiumTrack::frame(const Vector2d& p) const {
  const Vector2d q = p - center_;
  const double a = 0.5 * straight_;
  const double R = radius_;
  Frame f;
  f.ds.setZero();
  f.dlateral.setZero();
  f.dheading.setZero();
  f.d2s.setZero();
  f.d2lateral.setZero();
  f.d2heading.setZero();

  if (std::abs(q.x()) <= a) {
    if (q.y() < 0.0) {
      f.s = q.x() + a;
      f.lateral = q.y() + R;
      f.heading = 0.0;
      f.ds = Vector2d(1.0, 0.0);
      f.dlateral = Vector2d(0.0, 1.0);
    } else {
      f.s = straight_ + kPi * R + (a - q.x());
      f.lateral = R - q.y();
      f.heading = kPi;
      f.ds = Vector2d(-1.0, 0.0);
      f.dlateral = Vector2d(0.0, -1.0);
    }
    return f;
  }

  // Arcs: angle phi about the arc center; s and heading are affine in phi and
  // the lateral offset is R - |d|.
  const bool right = q.x() > a;
  const Vector2d d = q - Vector2d(right ? a : -a, 0.0);
  const double r2 = d.squaredNorm();
  const double r = std::sqrt(r2);
  double phi = std::atan2(d.y(), d.x());
  double s0;
  if (right) {
    s0 = straight_ + R * (phi + 0.5 * kPi);
  } else {
    if (phi < 0.0) phi += 2.0 * kPi;
    s0 = 2.0 * straight_ + kPi * R + R * (phi - 0.5 * kPi);
  }
  const Vector2d dphi(-d.y() / r2, d.x() / r2);
  Matrix2d d2phi;
  const double r4 = r2 * r2;
  d2phi << 2.0 * d.x() * d.y() / r4, (d.y() * d.y() - d.x() * d.x()) / r4,
      (d.y() * d.y() - d.x() * d.x()) / r4, -2.0 * d.x() * d.y() / r4;
  const Matrix2d radial = (Matrix2d::Identity() - d * d.transpose() / r2) / r;

  f.s = s0 >= length() ? s0 - length() : s0;
  f.lateral = R - r;
  f.heading = wrap_angle(phi + 0.5 * kPi);
  f.ds = R * dphi;
  f.d2s = R * d2phi;
  f.dlateral = -d / r;
  f.d2lateral = -radial;
  f.dheading = dphi;
  f.d2heading = d2phi;
  return f;
}

StadiumTrack::Pose StadiumTrack::pose_at(double s, double lateral) const {
  const double L = length();
  s = std::fmod(s, L);
  if (s < 0.0) s += L;
  const double a = 0.5 * straight_;
  const double R = radius_;
  Vector2d pos;
  double heading;
  if (s < straight_) {
    pos = Vector2d(-a + s, -R);
    heading = 0.0;
  } else if (s < straight_ + kPi * R) {
    const double phi = (s - straight_) / R - 0.5 * kPi;
    pos = Vector2d(a + R * std::cos(phi), R * std::sin(phi));
    heading = phi + 0.5 * kPi;
  } else if (s < 2.0 * straight_ + kPi * R) {
    pos = Vector2d(a - (s - straight_ - kPi * R), R);
    heading = kPi;
  } else {
    const double phi = (s - 2.0 * straight_ - kPi * R) / R + 0.5 * kPi;
    pos = Vector2d(-a + R * std::cos(phi), R * std::sin(phi));
    heading = phi + 0.5 * kPi;
  }
  const Vector2d left(-std::sin(heading), std::cos(heading));
  return {center_ + pos + lateral * left, wrap_angle(heading)};
}

}  // namespace rd3g
