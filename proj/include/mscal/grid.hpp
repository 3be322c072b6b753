#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mscal/spline.hpp"
#include "mscal/types.hpp"

namespace mscal {

// FNV-1a over a byte buffer; also used as the grid file checksum.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ull);

// Digest of the physical model fields (coupling, timing, envelope, initial
// state).  Numerical knobs — Fock truncation and integrator step — are
// deliberately excluded so grids may be built at a different accuracy than
// the estimator model they serve.
std::uint64_t model_digest(const ModelConfig& cfg);

// Axis order of every likelihood grid: (rabi / rabi_opt, centerline,
// sideband, phase_step).  Rabi is stored relative to the nominal optimum so
// one grid stays valid when gate-time feedback rescales the optimum.
struct GridSpec {
  std::array<GridAxis, 4> axes{};
  MeasurementSetting setting{};
  std::uint64_t digest = 0;  // model_digest of the build config

  std::size_t node_count() const {
    return std::size_t(axes[0].count) * axes[1].count * axes[2].count * axes[3].count;
  }
  void validate() const;  // counts >= 4, min < max
  bool operator==(const GridSpec&) const = default;
};

// Production grid for a multi-gate menu setting: (1 +- 0.5) relative Rabi x
// (0 +- 3.5 kHz) centerline x (10 +- 5 kHz) sideband x (+-pi) phase step,
// 21/21/21/25 samples.  Frequencies angular (rad/s).
GridSpec multi_gate_grid_spec(const MeasurementSetting& setting, const ModelConfig& cfg);
// Single-gate grid with the widened centerline (+-7 kHz) and sideband
// (10 +- 10 kHz) ranges.
GridSpec single_gate_grid_spec(const ModelConfig& cfg);
// Reduced preset for quick builds: halved ranges, 9/9/9/13 samples.
GridSpec test_scale_grid_spec(const MeasurementSetting& setting, const ModelConfig& cfg);

// Outcome probabilities at every grid node, row-major with axis 3 fastest,
// three values (p_gg, p_one, p_ee) per node.
struct GridTable {
  GridSpec spec;
  std::vector<double> values;

  bool operator==(const GridTable&) const = default;
};

// Evaluates the physics at every node (data-parallel, deterministic by node
// index).  cfg must hash to spec.digest.  Collects per-node physics failures
// and throws after the sweep if any node failed.
GridTable build_grid(const GridSpec& spec, const ModelConfig& cfg, unsigned threads = 0);

// Binary persistence: magic, format version, axes, setting, model digest,
// node values, FNV-1a checksum of everything after the header.  Bad magic or
// version -> "unsupported grid file"; size or checksum mismatch ->
// "corrupt grid file".
void save_grid(const GridTable& table, const std::filesystem::path& path);
GridTable load_grid(const std::filesystem::path& path);

// Maps absolute gate parameters into grid coordinates relative to the
// current operating point: rabi_opt is today's optimal Rabi frequency and
// time_scale = (current gate time) / (grid build gate time).  The dynamics
// are invariant under t -> s t with all angular frequencies divided by s, so
// one grid stays valid across gate-time feedback by scaling the frequency
// coordinates back into the build frame.
struct QueryFrame {
  double rabi_opt = 1.0;
  double time_scale = 1.0;

  std::array<double, 4> coordinates(const GateParams& theta) const {
    return {theta.rabi / rabi_opt, theta.centerline * time_scale,
            theta.sideband * time_scale, theta.phase_step};
  }
};

// Cubic-spline likelihood queries over one grid.  Immutable once built;
// safe to share across threads.
class Interpolator {
 public:
  explicit Interpolator(const GridTable& table);

  const GridSpec& spec() const { return spec_; }
  bool inside(const std::array<double, 4>& coords) const { return spline_.inside(coords); }

  // Interpolated outcome probabilities, clamped to [0, 1] and renormalized.
  // Throws "outside grid support" beyond the bounding box.
  OutcomeDistribution query(const std::array<double, 4>& coords) const;

 private:
  GridSpec spec_;
  Spline4 spline_;
};

}  // namespace mscal
