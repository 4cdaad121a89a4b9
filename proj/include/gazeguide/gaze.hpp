#ifndef GAZEGUIDE_GAZE_HPP
#define GAZEGUIDE_GAZE_HPP

#include "gazeguide/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

namespace gazeguide {

struct GazeSample {
  std::int64_t ts_us = 0;
  Rayd ray{Vec3d::Zero(), Vec3d::UnitZ()};
};

class InsufficientSamples : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultReferenceDepthM = 2.0;

/// Bounded, strictly time-ordered history of gaze samples. Oldest samples
/// are evicted once capacity is reached. Single writer.
class GazeTrack {
 public:
  explicit GazeTrack(std::size_t capacity = 512, double reference_depth_m = kDefaultReferenceDepthM);

  /// Appends `s` when it is newer than the last sample; returns false for
  /// late or duplicate timestamps.
  bool push_sample(const GazeSample& s);

  void set_reference_depth(double depth_m);
  double reference_depth() const { return reference_depth_m_; }

  /// Boxcar (width 3) smoothing of gaze points before differentiation.
  void set_smoothing(bool on) { smoothing_ = on; }
  bool smoothing() const { return smoothing_; }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const GazeSample& operator[](std::size_t i) const { return samples_[i]; }
  const GazeSample& back() const { return samples_.back(); }
  const GazeSample& front() const { return samples_.front(); }
  void clear() { samples_.clear(); }

 private:
  std::size_t capacity_;
  double reference_depth_m_;
  bool smoothing_ = false;
  std::deque<GazeSample> samples_;
};

/// Gaze-point velocity G(t) in m/s.
struct GazeKinematics {
  std::int64_t ts_us = 0;
  Vec3d velocity = Vec3d::Zero();
  double speed = 0.0;
};

struct FixationEvent {
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  Vec3d centroid_dir = Vec3d::UnitZ();
  double dispersion_deg = 0.0;
};

/// Dwell accumulation on one marker. `confirmed` latches.
struct DwellState {
  std::uint64_t marker_id = 0;
  std::int64_t accumulated_us = 0;
  std::int64_t gap_us = 0;
  bool confirmed = false;

  std::optional<std::int64_t> run_start_us;
  std::optional<std::int64_t> last_hit_us;
};

Vec3d gaze_point(const GazeSample& s, double depth_m);

/// Velocity of the gaze point at the track's reference depth. Uses the
/// derivative of the interpolating polynomial through the latest centred
/// stencil: five samples when available, otherwise three.
GazeKinematics estimate_kinematics(const GazeTrack& track);

/// Dispersion-threshold identification over the whole track, oldest first.
std::vector<FixationEvent> detect_fixations(const GazeTrack& track, int window_ms,
                                            double dispersion_threshold_deg);

/// Most recent fixation in the track, if any.
std::optional<FixationEvent> detect_fixation(const GazeTrack& track, int window_ms,
                                             double dispersion_threshold_deg);

DwellState update_dwell(DwellState state, const GazeSample& s, const Aabbd& marker_box, int dwell_ms,
                        int gap_tolerance_ms);

}  // namespace gazeguide

#endif  // GAZEGUIDE_GAZE_HPP
